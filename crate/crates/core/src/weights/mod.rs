//! Local polynomial weights for linear smoothers.
//!
//! Every estimator in this crate is linear in the data: a value at a target
//! point is a fixed weighted sum of column means (univariate) or of
//! cross-product matrices (bivariate). The weights here are the local
//! weighted-least-squares solutions with an Epanechnikov localization kernel,
//! so they reproduce polynomials up to the fitted degree exactly and vanish
//! outside the bandwidth window.

mod bivariate;
mod diagnostics;

pub use bivariate::{bivariate_weights, BivariateWeightField, PairSet, PairSmoother};
pub use diagnostics::{check_weight_assumptions, lipschitz_ratio, WeightDiagnostics};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible condition number of a local normal-equations matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Ordered sampling locations of one sample on the unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignGrid {
    points: Vec<f64>,
}

impl DesignGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("design grid is empty".into()));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("design grid has non-finite points".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "design points must be strictly increasing".into(),
            ));
        }
        if points[0] < 0.0 || points[points.len() - 1] > 1.0 {
            return Err(Error::InvalidArgument(
                "design points must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { points })
    }

    /// `p` equispaced points including both endpoints.
    pub fn uniform(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidArgument("uniform grid needs p >= 2".into()));
        }
        let step = 1.0 / (p - 1) as f64;
        Self::new((0..p).map(|j| j as f64 * step).collect())
    }

    /// Cell midpoints `(j - 1/2) / p`, `j = 1..=p`.
    pub fn midpoints(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("midpoint grid needs p >= 1".into()));
        }
        Self::new((0..p).map(|j| (j as f64 + 0.5) / p as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Epanechnikov kernel `0.75 (1 - u^2)` on `[-1, 1]`.
#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Weights of a degree-`d` local polynomial fit evaluated at one target.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub target: f64,
    pub bandwidth: f64,
    pub degree: usize,
    pub values: Vec<f64>,
}

impl WeightVector {
    pub fn apply(&self, y: &[f64]) -> f64 {
        self.values.iter().zip(y).map(|(w, y)| w * y).sum()
    }
}

/// Returns `M^{-1} e_1` for a symmetric positive definite `M`, rejecting
/// matrices whose condition number exceeds [`MAX_CONDITION`].
pub(crate) fn first_column_of_inverse(m: DMatrix<f64>, at: impl FnOnce() -> String) -> Result<DVector<f64>> {
    let dim = m.nrows();
    let eig = SymmetricEigen::new(m);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { at: at(), condition });
    }
    let mut out = DVector::zeros(dim);
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out.axpy(v[0] / lambda, &v, 1.0);
    }
    Ok(out)
}

/// Local polynomial weights of degree `degree` at `t` with bandwidth `h`.
pub fn local_poly_weights(t: f64, grid: &DesignGrid, h: f64, degree: usize) -> Result<WeightVector> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    if degree == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    if grid.len() < degree + 2 {
        return Err(Error::InvalidArgument(format!(
            "grid of {} points too small for degree {degree}",
            grid.len()
        )));
    }
    let dim = degree + 1;
    let scaled: Vec<f64> = grid.points().iter().map(|tj| (tj - t) / h).collect();
    let kernel: Vec<f64> = scaled.iter().map(|&u| epanechnikov(u)).collect();
    let found = kernel.iter().filter(|&&k| k > 0.0).count();
    if found < dim {
        return Err(Error::InsufficientSupport {
            at: format!("t = {t}"),
            bandwidth: h,
            found,
            needed: dim,
        });
    }

    // normal equations in the scaled variable u = (t_j - t) / h
    let mut m = DMatrix::zeros(dim, dim);
    let mut powers = vec![0.0; 2 * degree + 1];
    for (&u, &k) in scaled.iter().zip(&kernel) {
        if k == 0.0 {
            continue;
        }
        let mut up = k;
        for slot in powers.iter_mut() {
            *slot += up;
            up *= u;
        }
    }
    for r in 0..dim {
        for c in 0..dim {
            m[(r, c)] = powers[r + c];
        }
    }
    let coef = first_column_of_inverse(m, || format!("t = {t}"))?;

    let values = scaled
        .iter()
        .zip(&kernel)
        .map(|(&u, &k)| {
            if k == 0.0 {
                return 0.0;
            }
            // Horner evaluation of sum_r coef_r u^r
            let poly = coef.iter().rev().fold(0.0, |acc, c| acc * u + c);
            k * poly
        })
        .collect();
    Ok(WeightVector {
        target: t,
        bandwidth: h,
        degree,
        values,
    })
}

/// A univariate linear smoother tabulated at a fixed set of targets.
///
/// Row `a` of the weight matrix holds the local polynomial weights at
/// `targets[a]`, so smoothing a vector of column means is one matrix-vector
/// product.
#[derive(Debug, Clone)]
pub struct LinearSmoother {
    targets: Vec<f64>,
    bandwidth: f64,
    degree: usize,
    weights: DMatrix<f64>,
}

impl LinearSmoother {
    pub fn new(grid: &DesignGrid, targets: &[f64], h: f64, degree: usize) -> Result<Self> {
        let mut weights = DMatrix::zeros(targets.len(), grid.len());
        for (a, &t) in targets.iter().enumerate() {
            let w = local_poly_weights(t, grid, h, degree)?;
            for (j, v) in w.values.into_iter().enumerate() {
                weights[(a, j)] = v;
            }
        }
        Ok(Self {
            targets: targets.to_vec(),
            bandwidth: h,
            degree,
            weights,
        })
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `targets × design` weight matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.weights.ncols(), "smoother input length");
        let v = DVector::from_column_slice(values);
        (&self.weights * v).iter().copied().collect()
    }
}
