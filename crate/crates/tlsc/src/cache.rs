//! Binary reference-solution cache.
//!
//! Layout (little-endian): the 8-byte magic `TLSC0001`; `u32` random
//! dimension `N`; `N` `u32` degrees; `u32` mesh subdivisions; `u32` vertex
//! count; the `f64` Gauss nodes of every dimension in order; then every
//! nodal vector as `f64`s in grid order. A `.meta` text file next to the
//! cache echoes the configuration that produced it.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use tlsc_core::solvers::{SolutionKind, StochasticSolution};
use tlsc_core::{Mesh, Rect, TensorGrid};

pub const MAGIC: &[u8; 8] = b"TLSC0001";

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: not a reference cache or unsupported version (header {found:?})")]
    Version { path: PathBuf, found: String },
    #[error("{path}: truncated or oversized file ({detail})")]
    Truncated { path: PathBuf, detail: String },
    #[error("{path}: {detail}")]
    Shape { path: PathBuf, detail: String },
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CacheError + '_ {
    move |source| CacheError::Io { path: path.into(), source }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn encode(sol: &StochasticSolution) -> Vec<u8> {
    let grid = &sol.grid;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dims() as u32).to_le_bytes());
    for &d in grid.degrees() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(sol.mesh.subdivisions() as u32).to_le_bytes());
    out.extend_from_slice(&(sol.mesh.num_vertices() as u32).to_le_bytes());
    for rule in grid.rules() {
        for x in &rule.nodes {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    for u in &sol.nodal {
        for x in u {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Writes `sol` and its `.meta` sidecar.
pub fn save(sol: &StochasticSolution, path: &Path, meta: &str) -> Result<(), CacheError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&encode(sol)).map_err(io_err(path))?;
    let mpath = meta_path(path);
    fs::write(&mpath, meta).map_err(io_err(&mpath))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], CacheError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| CacheError::Truncated {
            path: self.path.into(),
            detail: format!("missing {what} at byte {}", self.pos),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize, CacheError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64, CacheError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Reads a cache written by [`save`]; the mesh is rebuilt on `domain`.
///
/// The grid nodes stored in the file must equal the nodes this build
/// computes for the stored degrees bit for bit.
pub fn load(path: &Path, domain: Rect) -> Result<StochasticSolution, CacheError> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    let header = r.take(8, "header").map_err(|_| CacheError::Version {
        path: path.into(),
        found: String::from_utf8_lossy(&bytes[..bytes.len().min(8)]).into_owned(),
    })?;
    if header != MAGIC {
        return Err(CacheError::Version { path: path.into(), found: String::from_utf8_lossy(header).into_owned() });
    }
    let shape = |detail: String| CacheError::Shape { path: path.into(), detail };
    let dims = r.u32("dimension")?;
    if dims == 0 {
        return Err(shape("random dimension is zero".into()));
    }
    let degrees = (0..dims).map(|_| r.u32("degree")).collect::<Result<Vec<_>, _>>()?;
    let n = r.u32("mesh subdivisions")?;
    let nv = r.u32("vertex count")?;
    if n == 0 || nv != (n + 1) * (n + 1) {
        return Err(shape(format!("vertex count {nv} does not match {n} subdivisions")));
    }
    let grid = TensorGrid::new(&degrees).map_err(|e| shape(e.to_string()))?;
    for (d, rule) in grid.rules().iter().enumerate() {
        for (i, &expected) in rule.nodes.iter().enumerate() {
            let stored = r.f64("grid node")?;
            if stored.to_bits() != expected.to_bits() {
                return Err(shape(format!("grid node {i} of dimension {d} is {stored:e}, expected {expected:e}")));
            }
        }
    }
    let mut nodal = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        nodal.push((0..nv).map(|_| r.f64("nodal value")).collect::<Result<Vec<_>, _>>()?);
    }
    if r.pos != bytes.len() {
        return Err(CacheError::Truncated { path: path.into(), detail: format!("{} trailing bytes", bytes.len() - r.pos) });
    }
    let mesh = Mesh::uniform(domain, n).map_err(|e| shape(e.to_string()))?;
    Ok(StochasticSolution { grid, mesh, nodal, kind: SolutionKind::DirectSc })
}
