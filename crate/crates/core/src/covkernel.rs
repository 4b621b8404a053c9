//! Covariance, lagged cross-covariance and long-run covariance kernels.
//!
//! All kernels are smoothed from raw product matrices
//! `P_jl = (n-1)^{-1} sum_i (Y_ij Y_{i+b,l} - Ybar_j Ybar_l)` with the
//! bivariate weights of [`crate::weights::PairSmoother`]. Lag-0 fits use only
//! off-diagonal pairs `j < l`, so the observation-noise variance on the
//! diagonal never enters.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_diff::CurveMatrix;
use crate::quadrature::EvalGrid;
use crate::weights::{DesignGrid, PairSet, PairSmoother};

/// Default ratio between bandwidths of consecutive lags.
pub const LAG_BANDWIDTH_FACTOR: f64 = 1.1;

/// Relative floor below which a diagonal variance is treated as zero.
pub const VARIANCE_FLOOR_RATIO: f64 = 1e-10;

/// A kernel surface tabulated on `eval_grid × eval_grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    pub eval_grid: EvalGrid,
    pub values: DMatrix<f64>,
    /// Lag of the field; `None` for long-run and pooled fields.
    pub lag: Option<i64>,
    pub bandwidths: Vec<f64>,
}

impl KernelField {
    pub fn constant(eval_grid: &EvalGrid, c: f64) -> Self {
        let g = eval_grid.len();
        Self {
            eval_grid: eval_grid.clone(),
            values: DMatrix::from_element(g, g, c),
            lag: Some(0),
            bandwidths: Vec::new(),
        }
    }

    pub fn from_fn(eval_grid: &EvalGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let pts = eval_grid.points();
        Self {
            eval_grid: eval_grid.clone(),
            values: DMatrix::from_fn(pts.len(), pts.len(), |a, b| f(pts[a], pts[b])),
            lag: None,
            bandwidths: Vec::new(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.values.diagonal().iter().copied().collect()
    }

    /// Double trapezoid integral over `[0, 1]^2`.
    pub fn double_integral(&self) -> f64 {
        let w = self.eval_grid.weights();
        let mut total = 0.0;
        for (a, wa) in w.iter().enumerate() {
            for (b, wb) in w.iter().enumerate() {
                total += wa * wb * self.values[(a, b)];
            }
        }
        total
    }

    pub fn max_asymmetry(&self) -> f64 {
        let g = self.values.nrows();
        let mut worst: f64 = 0.0;
        for a in 0..g {
            for b in 0..a {
                worst = worst.max((self.values[(a, b)] - self.values[(b, a)]).abs());
            }
        }
        worst
    }

    /// Writes rows `t,s,value` over the full lattice.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "s", "value"])?;
        let pts = self.eval_grid.points();
        for (a, t) in pts.iter().enumerate() {
            for (b, s) in pts.iter().enumerate() {
                w.write_record(&[t.to_string(), s.to_string(), self.values[(a, b)].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Correlation surface of a kernel; unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationField {
    pub eval_grid: EvalGrid,
    pub values: DMatrix<f64>,
}

/// Bartlett weight `1 - b / (m + 1)`.
pub fn bartlett_weight(b: usize, m: usize) -> f64 {
    1.0 - b as f64 / (m as f64 + 1.0)
}

/// Bandwidths `h_b = factor^b * h_0` for lags `0..=m`.
pub fn lag_bandwidths(h0: f64, m: usize, factor: f64) -> Vec<f64> {
    (0..=m).map(|b| h0 * factor.powi(b as i32)).collect()
}

/// `P_jl = (|R| - 1)^{-1} sum (Y_ij Y_{i+b,l} - Ybar_j Ybar_l)` over rows
/// `i` with both `i` and `i + b` in `rows`. Means are taken over `rows`.
pub fn product_matrix(values: &DMatrix<f64>, rows: &[usize], lag: usize) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n < lag + 2 {
        return Err(Error::LagTooLarge { lag, n });
    }
    let p = values.ncols();
    let mut means = vec![0.0; p];
    for &i in rows {
        for (j, m) in means.iter_mut().enumerate() {
            *m += values[(i, j)];
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);

    if lag == 0 {
        let centered = DMatrix::from_fn(n, p, |r, j| values[(rows[r], j)] - means[j]);
        return Ok(centered.transpose() * &centered / (n as f64 - 1.0));
    }

    let mut member = vec![false; values.nrows()];
    rows.iter().for_each(|&i| member[i] = true);
    let lead: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&i| i + lag < member.len() && member[i + lag])
        .collect();
    let a = DMatrix::from_fn(lead.len(), p, |r, j| values[(lead[r], j)]);
    let b = DMatrix::from_fn(lead.len(), p, |r, l| values[(lead[r] + lag, l)]);
    let count = lead.len() as f64;
    let mut out = a.transpose() * b;
    for j in 0..p {
        for l in 0..p {
            out[(j, l)] -= count * means[j] * means[l];
        }
    }
    Ok(out / (n as f64 - 1.0))
}

fn all_rows(sample: &CurveMatrix) -> Vec<usize> {
    (0..sample.n_curves()).collect()
}

/// Reflects a filled upper triangle onto the lower one.
fn mirror_upper(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let g = m.nrows();
    for a in 0..g {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    m
}

/// Assembles the full lag-`b` field from its two half-plane fits.
/// `plus(a, c)` estimates `Gamma(t_a, t_c; b)` and `minus(a, c)` estimates
/// `Gamma(t_a, t_c; -b)`, both for `a <= c`.
fn assemble_lag(plus: &DMatrix<f64>, minus: &DMatrix<f64>) -> DMatrix<f64> {
    let g = plus.nrows();
    DMatrix::from_fn(g, g, |a, c| match a.cmp(&c) {
        std::cmp::Ordering::Less => plus[(a, c)],
        std::cmp::Ordering::Greater => minus[(c, a)],
        std::cmp::Ordering::Equal => 0.5 * (plus[(a, a)] + minus[(a, a)]),
    })
}

/// Kernel smoother for one lag with a fixed design grid, lattice and bandwidth.
#[derive(Debug, Clone)]
pub struct LagSmoother {
    lag: usize,
    smoother: PairSmoother,
}

impl LagSmoother {
    pub fn new(grid: &DesignGrid, eval_grid: &EvalGrid, lag: usize, h: f64) -> Result<Self> {
        Self::with_targets(grid, eval_grid.points(), lag, h)
    }

    /// Smoother on an arbitrary increasing target lattice.
    pub fn with_targets(grid: &DesignGrid, targets: &[f64], lag: usize, h: f64) -> Result<Self> {
        let pairs = if lag == 0 { PairSet::Strict } else { PairSet::Inclusive };
        Ok(Self {
            lag,
            smoother: PairSmoother::new(grid, targets, h, pairs)?,
        })
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn bandwidth(&self) -> f64 {
        self.smoother.bandwidth()
    }

    /// Full field from a product matrix of this lag.
    pub fn field(&self, products: &DMatrix<f64>) -> DMatrix<f64> {
        if self.lag == 0 {
            return mirror_upper(self.smoother.smooth_upper(products));
        }
        let plus = self.smoother.smooth_upper(products);
        let minus = self.smoother.smooth_upper(&products.transpose());
        assemble_lag(&plus, &minus)
    }

    pub fn smoother(&self) -> &PairSmoother {
        &self.smoother
    }
}

pub fn cov_kernel(sample: &CurveMatrix, h0: f64, eval_grid: &EvalGrid) -> Result<KernelField> {
    if sample.n_curves() < 2 {
        return Err(Error::LagTooLarge { lag: 0, n: sample.n_curves() });
    }
    let s = LagSmoother::new(sample.grid(), eval_grid, 0, h0)?;
    let products = product_matrix(sample.values(), &all_rows(sample), 0)?;
    Ok(KernelField {
        eval_grid: eval_grid.clone(),
        values: s.field(&products),
        lag: Some(0),
        bandwidths: vec![h0],
    })
}

/// Lag-`b` cross-covariance `Gamma(t, s; b) = Cov(Z_i(t), Z_{i+b}(s))`.
/// Negative `b` returns the transpose of the `|b|` field.
pub fn lagged_kernel(sample: &CurveMatrix, b: i64, h_b: f64, eval_grid: &EvalGrid) -> Result<KernelField> {
    if b == 0 {
        return Err(Error::InvalidArgument("lagged_kernel needs a nonzero lag".into()));
    }
    let lag = b.unsigned_abs() as usize;
    if sample.n_curves() < lag + 2 {
        return Err(Error::LagTooLarge { lag, n: sample.n_curves() });
    }
    let s = LagSmoother::new(sample.grid(), eval_grid, lag, h_b)?;
    let products = product_matrix(sample.values(), &all_rows(sample), lag)?;
    let field = s.field(&products);
    Ok(KernelField {
        eval_grid: eval_grid.clone(),
        values: if b > 0 { field } else { field.transpose() },
        lag: Some(b),
        bandwidths: vec![h_b],
    })
}

/// Reusable long-run kernel estimator for lags `0..=m`.
#[derive(Debug, Clone)]
pub struct LongRunEstimator {
    eval_grid: EvalGrid,
    smoothers: Vec<LagSmoother>,
}

impl LongRunEstimator {
    /// `bandwidths[b]` is the bandwidth of lag `b`; `m = bandwidths.len() - 1`.
    pub fn new(grid: &DesignGrid, eval_grid: &EvalGrid, bandwidths: &[f64]) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::InvalidArgument("long-run kernel needs at least the lag-0 bandwidth".into()));
        }
        let smoothers = bandwidths
            .iter()
            .enumerate()
            .map(|(b, &h)| LagSmoother::new(grid, eval_grid, b, h))
            .collect::<Result<_>>()?;
        Ok(Self {
            eval_grid: eval_grid.clone(),
            smoothers,
        })
    }

    pub fn max_lag(&self) -> usize {
        self.smoothers.len() - 1
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.smoothers.iter().map(LagSmoother::bandwidth).collect()
    }

    /// Lag-0 field and long-run field.
    pub fn estimate(&self, values: &DMatrix<f64>) -> Result<(KernelField, KernelField)> {
        let rows: Vec<usize> = (0..values.nrows()).collect();
        let m = self.max_lag();
        if rows.len() < m + 2 {
            return Err(Error::LagTooLarge { lag: m, n: rows.len() });
        }
        let gamma0 = self.smoothers[0].field(&product_matrix(values, &rows, 0)?);
        let mut total = gamma0.clone();
        for s in &self.smoothers[1..] {
            let f = s.field(&product_matrix(values, &rows, s.lag())?);
            let w = bartlett_weight(s.lag(), m);
            total += (&f + f.transpose()) * w;
        }
        let lag0 = KernelField {
            eval_grid: self.eval_grid.clone(),
            values: gamma0,
            lag: Some(0),
            bandwidths: vec![self.smoothers[0].bandwidth()],
        };
        let long_run = KernelField {
            eval_grid: self.eval_grid.clone(),
            values: total,
            lag: None,
            bandwidths: self.bandwidths(),
        };
        Ok((lag0, long_run))
    }
}

/// Bartlett-weighted long-run kernel with lags `0..=m`, `m = bandwidths.len() - 1`.
pub fn long_run_kernel(sample: &CurveMatrix, bandwidths: &[f64], eval_grid: &EvalGrid) -> Result<KernelField> {
    let est = LongRunEstimator::new(sample.grid(), eval_grid, bandwidths)?;
    let (lag0, long_run) = est.estimate(sample.values())?;
    if est.max_lag() == 0 {
        return Ok(lag0);
    }
    Ok(long_run)
}

/// `gamma_s + ratio * gamma_d`.
pub fn pooled_variance(gamma_s: &KernelField, gamma_d: &KernelField, ratio: f64) -> Result<KernelField> {
    if gamma_s.eval_grid != gamma_d.eval_grid {
        return Err(Error::GridMismatch);
    }
    if !(ratio >= 0.0) {
        return Err(Error::InvalidArgument(format!("ratio must be nonnegative, got {ratio}")));
    }
    let mut bandwidths = gamma_s.bandwidths.clone();
    bandwidths.extend(&gamma_d.bandwidths);
    Ok(KernelField {
        eval_grid: gamma_s.eval_grid.clone(),
        values: &gamma_s.values + &gamma_d.values * ratio,
        lag: None,
        bandwidths,
    })
}

/// `f(t,s) - int f(t,y) dy - int f(y,s) dy + int int f`.
pub fn project_center(f: &KernelField) -> KernelField {
    let w = f.eval_grid.weights();
    let g = w.len();
    let row: Vec<f64> = (0..g)
        .map(|a| (0..g).map(|b| w[b] * f.values[(a, b)]).sum())
        .collect();
    let col: Vec<f64> = (0..g)
        .map(|b| (0..g).map(|a| w[a] * f.values[(a, b)]).sum())
        .collect();
    let total: f64 = row.iter().zip(w).map(|(r, wa)| r * wa).sum();
    KernelField {
        eval_grid: f.eval_grid.clone(),
        values: DMatrix::from_fn(g, g, |a, b| f.values[(a, b)] - row[a] - col[b] + total),
        lag: f.lag,
        bandwidths: f.bandwidths.clone(),
    }
}

/// Floor below which a diagonal entry counts as degenerate.
pub fn variance_floor(diagonal: &[f64]) -> f64 {
    VARIANCE_FLOOR_RATIO * diagonal.iter().cloned().fold(0.0, f64::max)
}

/// Checks a variance curve against [`variance_floor`].
pub fn check_variance(eval_grid: &EvalGrid, variance: &[f64]) -> Result<()> {
    let floor = variance_floor(variance);
    for (t, &v) in eval_grid.points().iter().zip(variance) {
        if !(v > floor) {
            return Err(Error::DegenerateVariance { t: *t, value: v, floor });
        }
    }
    Ok(())
}

pub fn correlation(f: &KernelField) -> Result<CorrelationField> {
    let diag = f.diagonal();
    check_variance(&f.eval_grid, &diag)?;
    let sd: Vec<f64> = diag.iter().map(|v| v.sqrt()).collect();
    let g = diag.len();
    let values = DMatrix::from_fn(g, g, |a, b| {
        if a == b {
            1.0
        } else {
            f.values[(a, b)] / (sd[a] * sd[b])
        }
    });
    Ok(CorrelationField {
        eval_grid: f.eval_grid.clone(),
        values,
    })
}

/// Standard-deviation curves of the lag-0 and long-run kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDiagnostics {
    pub lag0_sd: Vec<f64>,
    pub long_run_sd: Vec<f64>,
    /// Whether the long-run diagonal dominates the lag-0 diagonal everywhere.
    pub long_run_dominates: bool,
}

pub fn kernel_diagnostics(lag0: &KernelField, long_run: &KernelField) -> KernelDiagnostics {
    let sd = |f: &KernelField| f.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<_>>();
    let lag0_sd = sd(lag0);
    let long_run_sd = sd(long_run);
    let long_run_dominates = long_run_sd.iter().zip(&lag0_sd).all(|(l, z)| l >= z);
    KernelDiagnostics {
        lag0_sd,
        long_run_sd,
        long_run_dominates,
    }
}
