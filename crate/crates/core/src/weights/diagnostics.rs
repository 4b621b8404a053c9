use serde::Serialize;

use super::{local_poly_weights, DesignGrid, WeightVector};
use crate::error::Result;

/// Measured constants of the weight assumptions over a set of probe targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightDiagnostics {
    /// Probe targets at which weights exist.
    pub probes: Vec<f64>,
    /// Probes skipped because the local fit was not solvable there.
    pub skipped: Vec<f64>,
    /// `sup_t sum_j |w_j(t)|`.
    pub abs_sum_bound: f64,
    /// `sup_t max_j |w_j(t)| * p * h`.
    pub max_weight_bound: f64,
    /// `sup_t #{j : w_j(t) != 0}`.
    pub max_nonzero: usize,
    /// `sup_t #{j : w_j(t) != 0} / (p h)`.
    pub nonzero_ratio: f64,
    /// Largest Lipschitz ratio over consecutive probe pairs.
    pub lipschitz_bound: f64,
}

/// Ratio `max_j |w_j(t) - w_j(s)| * p h / min(|t - s| / h, 1)`, zero when
/// `t == s`.
pub fn lipschitz_ratio(grid: &DesignGrid, h: f64, degree: usize, t: f64, s: f64) -> Result<f64> {
    if t == s {
        return Ok(0.0);
    }
    let wt = local_poly_weights(t, grid, h, degree)?;
    let ws = local_poly_weights(s, grid, h, degree)?;
    Ok(ratio_of(&wt, &ws, grid.len(), h))
}

fn ratio_of(wt: &WeightVector, ws: &WeightVector, p: usize, h: f64) -> f64 {
    let gap = (wt.target - ws.target).abs();
    if gap == 0.0 {
        return 0.0;
    }
    let diff = wt
        .values
        .iter()
        .zip(&ws.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    diff * p as f64 * h / (gap / h).min(1.0)
}

pub fn check_weight_assumptions(
    grid: &DesignGrid,
    h: f64,
    degree: usize,
    n_probe: usize,
) -> Result<WeightDiagnostics> {
    let n_probe = n_probe.max(2);
    let p = grid.len() as f64;
    let mut probes = Vec::new();
    let mut skipped = Vec::new();
    let mut fitted: Vec<WeightVector> = Vec::new();
    for k in 0..n_probe {
        let t = k as f64 / (n_probe - 1) as f64;
        match local_poly_weights(t, grid, h, degree) {
            Ok(w) => {
                probes.push(t);
                fitted.push(w);
            }
            Err(crate::Error::InsufficientSupport { .. }) | Err(crate::Error::SingularDesign { .. }) => {
                skipped.push(t)
            }
            Err(e) => return Err(e),
        }
    }

    let mut abs_sum_bound: f64 = 0.0;
    let mut max_weight_bound: f64 = 0.0;
    let mut max_nonzero = 0;
    for w in &fitted {
        abs_sum_bound = abs_sum_bound.max(w.values.iter().map(|v| v.abs()).sum());
        let max_abs = w.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        max_weight_bound = max_weight_bound.max(max_abs * p * h);
        max_nonzero = max_nonzero.max(w.values.iter().filter(|v| **v != 0.0).count());
    }
    let lipschitz_bound = fitted
        .windows(2)
        .map(|pair| ratio_of(&pair[0], &pair[1], grid.len(), h))
        .fold(0.0, f64::max);

    Ok(WeightDiagnostics {
        probes,
        skipped,
        abs_sum_bound,
        max_weight_bound,
        max_nonzero,
        nonzero_ratio: max_nonzero as f64 / (p * h),
        lipschitz_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_local_linear_constants() {
        let grid = DesignGrid::uniform(100).unwrap();
        let d = check_weight_assumptions(&grid, 0.1, 1, 201).unwrap();
        assert!(d.skipped.is_empty());
        assert!(d.abs_sum_bound < 3.0, "C4 = {}", d.abs_sum_bound);
        // regression constant for this configuration (boundary probes dominate)
        assert!((d.abs_sum_bound - 1.442_305_5).abs() < 1e-6);
        assert!(d.abs_sum_bound >= 1.0);
        // ceil(2 p h) + 1 support points at most
        assert!(d.max_nonzero <= 21, "nonzero = {}", d.max_nonzero);
        assert!(d.max_weight_bound.is_finite() && d.lipschitz_bound.is_finite());
    }

    #[test]
    fn same_point_has_zero_lipschitz_ratio() {
        let grid = DesignGrid::midpoints(13).unwrap();
        assert_eq!(lipschitz_ratio(&grid, 0.3, 2, 0.4, 0.4).unwrap(), 0.0);
    }
}
