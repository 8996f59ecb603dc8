//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tlsc_core::benchmarks::KlSettings;
use tlsc_core::solvers::Nonlinearity;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("invalid value for `{key}`: {message}")]
    Value { key: &'static str, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    Example1,
    Example2,
    Custom,
}

impl Example {
    pub fn name(&self) -> &'static str {
        match self {
            Example::Example1 => "example1",
            Example::Example2 => "example2",
            Example::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DirectSc,
    TwoLevel,
    CoarseOnly,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CoarseOnly, Method::DirectSc, Method::TwoLevel];

    pub fn name(&self) -> &'static str {
        match self {
            Method::DirectSc => "direct_sc",
            Method::TwoLevel => "two_level",
            Method::CoarseOnly => "coarse_only",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct_sc" => Ok(Method::DirectSc),
            "two_level" => Ok(Method::TwoLevel),
            "coarse_only" => Ok(Method::CoarseOnly),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// What errors are measured against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReferenceSpec {
    /// The manufactured solution (example 1 only).
    Analytic,
    /// A reference solution stored with [`crate::cache`].
    Cached(PathBuf),
    /// Direct collocation with `h_sub` subdivisions and isotropic degree `p`.
    Compute { h_sub: usize, p: usize },
}

/// Affine coefficient `mean + Σ amplitudes[n] y_n` with constant forcing.
#[derive(Debug, Clone, Copy)]
pub struct CustomSettings<'a> {
    pub mean: f64,
    pub amplitudes: &'a [f64],
    pub forcing: f64,
    pub nonlinearity: Nonlinearity,
}

/// Mesh pair `(H_sub, h_sub)` or degree pair `(P, p)`.
pub type LevelPair = (usize, usize);

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub example: Example,
    pub methods: Vec<Method>,
    /// Coarse subdivisions per side (`H = 2 / H_sub` on `[-1, 1]`).
    pub coarse_sub: usize,
    pub fine_sub: usize,
    pub coarse_degree: usize,
    pub fine_degree: usize,
    pub dims: usize,
    pub newton_eps: f64,
    pub cg_tol: f64,
    pub validation_extra_degree: usize,
    pub kl: KlSettings,
    pub output_dir: Option<PathBuf>,
    pub reference: Option<ReferenceSpec>,
    /// Where a computed reference is written for reuse.
    pub reference_cache: Option<PathBuf>,
    pub h_ladder: Option<Vec<LevelPair>>,
    pub p_ladder: Option<Vec<LevelPair>>,
    pub custom_mean: f64,
    pub custom_amplitudes: Vec<f64>,
    pub custom_forcing: f64,
    pub custom_nonlinearity: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            example: Example::Example1,
            methods: Method::ALL.to_vec(),
            coarse_sub: 8,
            fine_sub: 32,
            coarse_degree: 2,
            fine_degree: 4,
            dims: 2,
            newton_eps: 1e-2,
            cg_tol: 1e-9,
            validation_extra_degree: 2,
            kl: KlSettings::default(),
            output_dir: None,
            reference: None,
            reference_cache: None,
            h_ladder: None,
            p_ladder: None,
            custom_mean: 3.0,
            custom_amplitudes: vec![1.0, 1.0],
            custom_forcing: -1.0,
            custom_nonlinearity: "cubic".into(),
        }
    }
}

const KEYS: &[&str] = &[
    "example",
    "method",
    "H",
    "h",
    "P",
    "p",
    "N",
    "newton_eps",
    "cg_tol",
    "validation_extra_degree",
    "kl_n",
    "sigma",
    "correlation_length",
    "output_dir",
    "reference",
    "reference_cache",
    "h_ladder",
    "p_ladder",
    "custom_mean",
    "custom_amplitudes",
    "custom_forcing",
    "custom_nonlinearity",
];

fn parse_num<T: FromStr>(key: &'static str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigError::Value { key, message: format!("`{v}`: {e}") })
}

fn parse_list<T: FromStr>(key: &'static str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_num(key, s)).collect()
}

/// `a:b` pairs, or bare `b` with `a` filled in by `derive`.
fn parse_ladder(key: &'static str, v: &str, derive: fn(usize) -> usize) -> Result<Vec<LevelPair>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| match item.split_once(':') {
            Some((a, b)) => Ok((parse_num(key, a.trim())?, parse_num(key, b.trim())?)),
            None => {
                let b = parse_num(key, item)?;
                Ok((derive(b), b))
            }
        })
        .collect()
}

/// Coarse partner of a fine mesh: the largest divisor of `h_sub` not above `√(2 h_sub)`.
///
/// On `[-1, 1]` this is the coarse mesh with `h ≈ H²`.
pub fn default_coarse_sub(h_sub: usize) -> usize {
    let bound = (2.0 * h_sub as f64).sqrt();
    (1..=h_sub).filter(|d| h_sub % d == 0 && (*d as f64) <= bound + 1e-12).max().unwrap_or(1)
}

/// Coarse partner of a fine degree: `⌈p / 2⌉`.
pub fn default_coarse_degree(p: usize) -> usize {
    p.div_ceil(2)
}

fn parse_reference(v: &str) -> Result<ReferenceSpec, ConfigError> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    match parts.as_slice() {
        ["analytic"] => Ok(ReferenceSpec::Analytic),
        ["cached", path] => Ok(ReferenceSpec::Cached(PathBuf::from(path))),
        ["compute", h, p] => Ok(ReferenceSpec::Compute { h_sub: parse_num("reference", h)?, p: parse_num("reference", p)? }),
        _ => Err(ConfigError::Value {
            key: "reference",
            message: format!("`{v}`: expected `analytic`, `cached <path>` or `compute <h_sub> <p>`"),
        }),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    /// Parses and validates a configuration; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut truncation_given = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| ConfigError::Syntax { line: line_no, message: format!("expected `key = value`, got `{line}`") })?;
            let key = *KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| ConfigError::UnknownKey { line: line_no, key: key.into() })?;
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate { line: line_no, key: key.into() });
            }
            seen.push(key);
            match key {
                "example" => {
                    cfg.example = match value {
                        "example1" => Example::Example1,
                        "example2" => Example::Example2,
                        "custom" => Example::Custom,
                        _ => return Err(ConfigError::Value { key: "example", message: format!("unknown example `{value}`") }),
                    }
                }
                "method" => {
                    cfg.methods = value
                        .split(',')
                        .map(|s| s.trim().parse())
                        .collect::<Result<_, _>>()
                        .map_err(|message| ConfigError::Value { key: "method", message })?
                }
                "H" => cfg.coarse_sub = parse_num("H", value)?,
                "h" => cfg.fine_sub = parse_num("h", value)?,
                "P" => cfg.coarse_degree = parse_num("P", value)?,
                "p" => cfg.fine_degree = parse_num("p", value)?,
                "N" => {
                    cfg.dims = parse_num("N", value)?;
                    truncation_given = true;
                }
                "newton_eps" => cfg.newton_eps = parse_num("newton_eps", value)?,
                "cg_tol" => cfg.cg_tol = parse_num("cg_tol", value)?,
                "validation_extra_degree" => cfg.validation_extra_degree = parse_num("validation_extra_degree", value)?,
                "kl_n" => cfg.kl.kl_n = parse_num("kl_n", value)?,
                "sigma" => cfg.kl.sigma = parse_num("sigma", value)?,
                "correlation_length" => cfg.kl.correlation_length = parse_num("correlation_length", value)?,
                "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
                "reference" => cfg.reference = Some(parse_reference(value)?),
                "reference_cache" => cfg.reference_cache = Some(PathBuf::from(value)),
                "h_ladder" => cfg.h_ladder = Some(parse_ladder("h_ladder", value, default_coarse_sub)?),
                "p_ladder" => cfg.p_ladder = Some(parse_ladder("p_ladder", value, default_coarse_degree)?),
                "custom_mean" => cfg.custom_mean = parse_num("custom_mean", value)?,
                "custom_amplitudes" => cfg.custom_amplitudes = parse_list("custom_amplitudes", value)?,
                "custom_forcing" => cfg.custom_forcing = parse_num("custom_forcing", value)?,
                "custom_nonlinearity" => cfg.custom_nonlinearity = value.to_string(),
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if cfg.example == Example::Custom && !truncation_given {
            cfg.dims = cfg.custom_amplitudes.len();
        }
        cfg.kl.truncation = cfg.dims;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.methods.is_empty() {
            return bad("no method selected".into());
        }
        check_mesh_pair(self.coarse_sub, self.fine_sub)?;
        if !(self.newton_eps > 0.0) || !(self.cg_tol > 0.0) {
            return bad(format!("tolerances must be positive (newton_eps = {}, cg_tol = {})", self.newton_eps, self.cg_tol));
        }
        if self.dims == 0 {
            return bad("N must be at least 1".into());
        }
        match self.example {
            Example::Example1 if self.dims != 2 => return bad(format!("example1 has N = 2, got {}", self.dims)),
            Example::Custom if self.dims != self.custom_amplitudes.len() => {
                return bad(format!("N = {} but {} custom amplitudes given", self.dims, self.custom_amplitudes.len()))
            }
            Example::Custom => {
                self.nonlinearity()?;
            }
            _ => {}
        }
        if self.example == Example::Example2 {
            if self.kl.kl_n == 0 || !(self.kl.sigma > 0.0) || !(self.kl.correlation_length > 0.0) {
                return bad("kl_n, sigma and correlation_length must be positive".into());
            }
        }
        if self.reference == Some(ReferenceSpec::Analytic) && self.example != Example::Example1 {
            return bad("an analytic reference exists only for example1".into());
        }
        if let Some(ladder) = &self.h_ladder {
            for &(c, f) in ladder {
                check_mesh_pair(c, f)?;
            }
        }
        if let Some(ladder) = &self.p_ladder {
            if ladder.is_empty() {
                return bad("p_ladder is empty".into());
            }
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, ConfigError> {
        match self.custom_nonlinearity.as_str() {
            "cubic" => Ok(Nonlinearity::Cubic),
            "linear" => Ok(Nonlinearity::Linear),
            "zero" => Ok(Nonlinearity::Zero),
            other => Err(ConfigError::Value {
                key: "custom_nonlinearity",
                message: format!("`{other}`: expected cubic, linear or zero"),
            }),
        }
    }

    pub fn custom(&self) -> Result<CustomSettings<'_>, ConfigError> {
        Ok(CustomSettings {
            mean: self.custom_mean,
            amplitudes: &self.custom_amplitudes,
            forcing: self.custom_forcing,
            nonlinearity: self.nonlinearity()?,
        })
    }

    /// Text form accepted by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: &[LevelPair]| v.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "example = {}", self.example.name());
        let _ = writeln!(s, "method = {}", self.methods.iter().map(Method::name).collect::<Vec<_>>().join(", "));
        let _ = writeln!(s, "H = {}", self.coarse_sub);
        let _ = writeln!(s, "h = {}", self.fine_sub);
        let _ = writeln!(s, "P = {}", self.coarse_degree);
        let _ = writeln!(s, "p = {}", self.fine_degree);
        let _ = writeln!(s, "N = {}", self.dims);
        let _ = writeln!(s, "newton_eps = {:e}", self.newton_eps);
        let _ = writeln!(s, "cg_tol = {:e}", self.cg_tol);
        let _ = writeln!(s, "validation_extra_degree = {}", self.validation_extra_degree);
        let _ = writeln!(s, "kl_n = {}", self.kl.kl_n);
        let _ = writeln!(s, "sigma = {}", self.kl.sigma);
        let _ = writeln!(s, "correlation_length = {}", self.kl.correlation_length);
        if let Some(d) = &self.output_dir {
            let _ = writeln!(s, "output_dir = {}", d.display());
        }
        match &self.reference {
            Some(ReferenceSpec::Analytic) => s.push_str("reference = analytic\n"),
            Some(ReferenceSpec::Cached(p)) => {
                let _ = writeln!(s, "reference = cached {}", p.display());
            }
            Some(ReferenceSpec::Compute { h_sub, p }) => {
                let _ = writeln!(s, "reference = compute {h_sub} {p}");
            }
            None => {}
        }
        if let Some(p) = &self.reference_cache {
            let _ = writeln!(s, "reference_cache = {}", p.display());
        }
        if let Some(l) = &self.h_ladder {
            let _ = writeln!(s, "h_ladder = {}", join(l));
        }
        if let Some(l) = &self.p_ladder {
            let _ = writeln!(s, "p_ladder = {}", join(l));
        }
        if self.example == Example::Custom {
            let _ = writeln!(s, "custom_mean = {}", self.custom_mean);
            let amps: Vec<String> = self.custom_amplitudes.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "custom_amplitudes = {}", amps.join(", "));
            let _ = writeln!(s, "custom_forcing = {}", self.custom_forcing);
            let _ = writeln!(s, "custom_nonlinearity = {}", self.custom_nonlinearity);
        }
        s
    }
}

/// Both counts positive and the fine mesh nested in the coarse one.
pub fn check_mesh_pair(coarse: usize, fine: usize) -> Result<(), ConfigError> {
    if coarse == 0 || fine == 0 {
        return Err(ConfigError::Invalid("subdivision counts must be positive".into()));
    }
    if fine % coarse != 0 {
        return Err(ConfigError::Invalid(format!("h = {fine} subdivisions is not nested in H = {coarse}")));
    }
    Ok(())
}
