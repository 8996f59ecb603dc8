//! Convergence-rate analysis for degree studies that run into a spatial floor.
//!
//! At a fixed mesh the collocation error in `p` decays until the
//! discretization error of the mesh dominates. The floor is taken as the
//! error at the largest degree. Degrees whose error exceeds the floor by more
//! than [`FLOOR_MARGIN`] are "pre-floor"; over those, the stochastic component
//! `sqrt(e(p)² - floor²)` is fitted against `p` on a semi-log scale.

use tlsc_core::norms::{fit_slope, LineFit, NormError, SlopeScale};

/// Relative excess over the floor that marks a degree as pre-floor.
pub const FLOOR_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct FloorFit {
    pub floor: f64,
    /// Errors decrease strictly from each degree to the next, up to and including the first floor degree.
    pub decreasing_until_floor: bool,
    pub pre_floor: Vec<f64>,
    /// `log(stochastic error)` against degree; `None` with fewer than three pre-floor degrees.
    pub fit: Option<LineFit>,
}

/// `points` are `(degree, error)` sorted by degree.
pub fn floor_fit(points: &[(f64, f64)]) -> Result<FloorFit, NormError> {
    let floor = points.last().map(|p| p.1).ok_or(NormError::TooFewPoints { needed: 1, got: 0 })?;
    let first_floor = points.iter().position(|&(_, e)| e <= floor * (1.0 + FLOOR_MARGIN)).unwrap_or(points.len() - 1);
    let decreasing_until_floor = points[..=first_floor].windows(2).all(|w| w[1].1 < w[0].1);
    let pre: Vec<(f64, f64)> =
        points[..first_floor].iter().map(|&(p, e)| (p, (e * e - floor * floor).max(0.0).sqrt())).collect();
    let fit = if pre.len() >= 3 { Some(fit_slope(&pre, SlopeScale::SemiLog)?) } else { None };
    Ok(FloorFit { floor, decreasing_until_floor, pre_floor: pre.iter().map(|p| p.0).collect(), fit })
}
