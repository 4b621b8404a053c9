//! Degree-one local linear weights over design-point pairs restricted to one
//! side of the diagonal.
//!
//! Only pairs `(t_j, t_l)` with `j < l` (or `j <= l`) enter the fit, so a
//! covariance surface with a kink on the diagonal is never smoothed across it.
//! The localization kernel is the product Epanechnikov kernel, which vanishes
//! as soon as either coordinate leaves the bandwidth box.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{epanechnikov, first_column_of_inverse, DesignGrid};
use crate::error::{Error, Result};

/// Which design pairs `(j, l)` a bivariate fit may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSet {
    /// `j < l`: lag-0 covariance kernels (the diagonal carries noise variance).
    Strict,
    /// `j <= l`: lagged cross-covariance kernels.
    Inclusive,
}

impl PairSet {
    #[inline]
    pub fn admits(self, j: usize, l: usize) -> bool {
        match self {
            PairSet::Strict => j < l,
            PairSet::Inclusive => j <= l,
        }
    }

    fn mask(self, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |j, l| if self.admits(j, l) { 1.0 } else { 0.0 })
    }
}

/// Bivariate weights at one target `(t, s)` with `t <= s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateWeightField {
    pub t: f64,
    pub s: f64,
    pub bandwidth: f64,
    pub pairs: PairSet,
    /// Nonzero weights as `(j, l, w_jl)`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl BivariateWeightField {
    /// `sum_{j,l} w_jl f(j, l)`.
    pub fn apply(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        self.entries.iter().map(|&(j, l, w)| w * f(j, l)).sum()
    }

    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> f64 {
        self.apply(|j, l| m[(j, l)])
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

pub fn bivariate_weights(
    t: f64,
    s: f64,
    grid: &DesignGrid,
    h: f64,
    pairs: PairSet,
) -> Result<BivariateWeightField> {
    check_bandwidth(h)?;
    if t > s {
        return Err(Error::InvalidArgument(format!(
            "bivariate weights need t <= s, got ({t}, {s})"
        )));
    }
    let pts = grid.points();
    let u: Vec<f64> = pts.iter().map(|x| (x - t) / h).collect();
    let v: Vec<f64> = pts.iter().map(|x| (x - s) / h).collect();

    let mut support = Vec::new();
    for j in 0..pts.len() {
        let kj = epanechnikov(u[j]);
        if kj == 0.0 {
            continue;
        }
        for l in 0..pts.len() {
            if !pairs.admits(j, l) {
                continue;
            }
            let kl = epanechnikov(v[l]);
            if kl > 0.0 {
                support.push((j, l, kj * kl));
            }
        }
    }
    let at = || format!("(t, s) = ({t}, {s})");
    if support.len() < 3 {
        return Err(Error::InsufficientSupport {
            at: at(),
            bandwidth: h,
            found: support.len(),
            needed: 3,
        });
    }

    let mut m = DMatrix::zeros(3, 3);
    for &(j, l, k) in &support {
        let x = [1.0, u[j], v[l]];
        for r in 0..3 {
            for c in 0..3 {
                m[(r, c)] += k * x[r] * x[c];
            }
        }
    }
    let coef = first_column_of_inverse(m, at)?;
    let entries = support
        .into_iter()
        .map(|(j, l, k)| (j, l, k * (coef[0] + coef[1] * u[j] + coef[2] * v[l])))
        .collect();
    Ok(BivariateWeightField {
        t,
        s,
        bandwidth: h,
        pairs,
        entries,
    })
}

/// Bivariate local linear smoother tabulated on a `targets × targets`
/// lattice, upper triangle only (`targets[a] <= targets[b]`).
///
/// The fit at every lattice cell shares the same separable kernel matrices,
/// so applying the smoother to a `p × p` cross-product matrix costs a handful
/// of dense matrix products instead of one weighted sum per cell.
#[derive(Debug, Clone)]
pub struct PairSmoother {
    targets: Vec<f64>,
    bandwidth: f64,
    pairs: PairSet,
    mask: DMatrix<f64>,
    k0: DMatrix<f64>,
    k1: DMatrix<f64>,
    /// First row of the inverse normal-equations matrix, per cell `(a, b)`
    /// with `a <= b`, stored row-major in `a * T + b`.
    coef: Vec<[f64; 3]>,
}

impl PairSmoother {
    pub fn new(grid: &DesignGrid, targets: &[f64], h: f64, pairs: PairSet) -> Result<Self> {
        check_bandwidth(h)?;
        if targets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("lattice targets must be increasing".into()));
        }
        let nt = targets.len();
        let p = grid.len();
        let pts = grid.points();
        let mut k0 = DMatrix::zeros(nt, p);
        let mut k1 = DMatrix::zeros(nt, p);
        let mut k2 = DMatrix::zeros(nt, p);
        let mut ind = DMatrix::zeros(nt, p);
        for (a, &t) in targets.iter().enumerate() {
            for (j, &x) in pts.iter().enumerate() {
                let u = (x - t) / h;
                let k = epanechnikov(u);
                if k > 0.0 {
                    k0[(a, j)] = k;
                    k1[(a, j)] = k * u;
                    k2[(a, j)] = k * u * u;
                    ind[(a, j)] = 1.0;
                }
            }
        }
        let mask = pairs.mask(p);
        let k0m = &k0 * &mask;
        let k1m = &k1 * &mask;
        let k2m = &k2 * &mask;
        let count = &ind * &mask * ind.transpose();
        let m00 = &k0m * k0.transpose();
        let m10 = &k1m * k0.transpose();
        let m01 = &k0m * k1.transpose();
        let m20 = &k2m * k0.transpose();
        let m11 = &k1m * k1.transpose();
        let m02 = &k0m * k2.transpose();

        let mut coef = vec![[0.0; 3]; nt * nt];
        for a in 0..nt {
            for b in a..nt {
                let at = || format!("(t, s) = ({}, {})", targets[a], targets[b]);
                let found = count[(a, b)].round() as usize;
                if found < 3 {
                    return Err(Error::InsufficientSupport {
                        at: at(),
                        bandwidth: h,
                        found,
                        needed: 3,
                    });
                }
                let m = DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        m00[(a, b)],
                        m10[(a, b)],
                        m01[(a, b)],
                        m10[(a, b)],
                        m20[(a, b)],
                        m11[(a, b)],
                        m01[(a, b)],
                        m11[(a, b)],
                        m02[(a, b)],
                    ],
                );
                let c = first_column_of_inverse(m, at)?;
                coef[a * nt + b] = [c[0], c[1], c[2]];
            }
        }
        Ok(Self {
            targets: targets.to_vec(),
            bandwidth: h,
            pairs,
            mask,
            k0,
            k1,
            coef,
        })
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn pairs(&self) -> PairSet {
        self.pairs
    }

    /// Smooths a `p × p` pair-indexed matrix. The returned `T × T` matrix
    /// holds the estimate at `(targets[a], targets[b])` for `a <= b`; the
    /// strict lower triangle is zero.
    pub fn smooth_upper(&self, pair_values: &DMatrix<f64>) -> DMatrix<f64> {
        let masked = pair_values.component_mul(&self.mask);
        let a0 = &self.k0 * &masked;
        let a1 = &self.k1 * &masked;
        let n00 = &a0 * self.k0.transpose();
        let n10 = &a1 * self.k0.transpose();
        let n01 = &a0 * self.k1.transpose();
        let nt = self.targets.len();
        let mut out = DMatrix::zeros(nt, nt);
        for a in 0..nt {
            for b in a..nt {
                let c = self.coef[a * nt + b];
                out[(a, b)] = c[0] * n00[(a, b)] + c[1] * n10[(a, b)] + c[2] * n01[(a, b)];
            }
        }
        out
    }
}
