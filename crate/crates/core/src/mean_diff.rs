//! Mean and mean-difference estimation for a dense and a sparse sample.
//!
//! The difference `delta = mu_sparse - mu_dense` is estimated from residuals:
//! the sparse column means minus the dense mean fit evaluated at the sparse
//! design points are smoothed with the sparse-grid weights. The dense fit at
//! sparse points always uses fresh weights at those exact locations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::covkernel::KernelField;
use crate::error::{Error, Result};
use crate::quadrature::EvalGrid;
use crate::weights::{DesignGrid, LinearSmoother};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Dense,
    Sparse,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Dense => "dense",
            SampleKind::Sparse => "sparse",
        }
    }
}

impl std::fmt::Display for SampleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `n × p` observations of one sample on a shared design grid. Rows are
/// curves in time order, columns are design points.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveMatrix {
    values: DMatrix<f64>,
    grid: DesignGrid,
    kind: SampleKind,
}

impl CurveMatrix {
    pub fn new(values: DMatrix<f64>, grid: DesignGrid, kind: SampleKind) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "curve matrix has {} columns but the grid has {} points",
                values.ncols(),
                grid.len()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::InvalidArgument("curve matrix has no curves".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("curve matrix has missing or non-finite values".into()));
        }
        Ok(Self { values, grid, kind })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &DesignGrid {
        &self.grid
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_means(&self) -> Vec<f64> {
        column_means_of(&self.values, 0..self.values.nrows())
    }

    /// Column means over a subset of curves.
    pub fn column_means_over(&self, rows: &[usize]) -> Vec<f64> {
        column_means_of(&self.values, rows.iter().copied())
    }

    /// Observations minus a per-design-point mean.
    pub fn centered_by(&self, mean_at_design: &[f64]) -> Result<CurveMatrix> {
        if mean_at_design.len() != self.n_points() {
            return Err(Error::GridMismatch);
        }
        let mut values = self.values.clone();
        for (j, m) in mean_at_design.iter().enumerate() {
            values.column_mut(j).add_scalar_mut(-m);
        }
        CurveMatrix::new(values, self.grid.clone(), self.kind)
    }
}

fn column_means_of(values: &DMatrix<f64>, rows: impl Iterator<Item = usize> + Clone) -> Vec<f64> {
    let count = rows.clone().count() as f64;
    (0..values.ncols())
        .map(|j| rows.clone().map(|i| values[(i, j)]).sum::<f64>() / count)
        .collect()
}

/// Smoothing parameters attached to an estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h: Option<f64>,
    pub h_dense: Option<f64>,
    pub degree: Option<usize>,
    pub degree_dense: Option<usize>,
}

/// A function estimate tabulated on the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate {
    pub eval_grid: EvalGrid,
    pub values: Vec<f64>,
    pub bandwidths: Bandwidths,
}

impl CurveEstimate {
    pub fn new(eval_grid: EvalGrid, values: Vec<f64>, bandwidths: Bandwidths) -> Result<Self> {
        if values.len() != eval_grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("estimate has non-finite values".into()));
        }
        Ok(Self {
            eval_grid,
            values,
            bandwidths,
        })
    }

    /// Trapezoid-rule integral over `[0, 1]`.
    pub fn integral(&self) -> f64 {
        self.eval_grid.integrate(&self.values)
    }

    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense-sample mean fit. Keeps the column means so the fit can be evaluated
/// at arbitrary points with fresh weights.
#[derive(Debug, Clone)]
pub struct DenseMean {
    pub estimate: CurveEstimate,
    column_means: Vec<f64>,
    grid: DesignGrid,
    bandwidth: f64,
    degree: usize,
}

impl DenseMean {
    pub fn at(&self, points: &[f64]) -> Result<Vec<f64>> {
        let s = LinearSmoother::new(&self.grid, points, self.bandwidth, self.degree)?;
        Ok(s.apply(&self.column_means))
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

pub fn dense_mean(
    dense: &CurveMatrix,
    h_dense: f64,
    degree_dense: usize,
    eval_grid: &EvalGrid,
) -> Result<DenseMean> {
    let column_means = dense.column_means();
    let s = LinearSmoother::new(dense.grid(), eval_grid.points(), h_dense, degree_dense)?;
    let estimate = CurveEstimate::new(
        eval_grid.clone(),
        s.apply(&column_means),
        Bandwidths {
            h_dense: Some(h_dense),
            degree_dense: Some(degree_dense),
            ..Default::default()
        },
    )?;
    Ok(DenseMean {
        estimate,
        column_means,
        grid: dense.grid().clone(),
        bandwidth: h_dense,
        degree: degree_dense,
    })
}

/// Difference of two separately smoothed means.
#[allow(clippy::too_many_arguments)]
pub fn naive_difference(
    sparse: &CurveMatrix,
    dense: &CurveMatrix,
    h: f64,
    h_dense: f64,
    degree: usize,
    degree_dense: usize,
    eval_grid: &EvalGrid,
) -> Result<CurveEstimate> {
    let sparse_fit = LinearSmoother::new(sparse.grid(), eval_grid.points(), h, degree)?
        .apply(&sparse.column_means());
    let dense_fit = dense_mean(dense, h_dense, degree_dense, eval_grid)?;
    let values = sparse_fit
        .iter()
        .zip(&dense_fit.estimate.values)
        .map(|(s, d)| s - d)
        .collect();
    CurveEstimate::new(
        eval_grid.clone(),
        values,
        Bandwidths {
            h: Some(h),
            h_dense: Some(h_dense),
            degree: Some(degree),
            degree_dense: Some(degree_dense),
        },
    )
}

/// Residual-based difference estimate together with its ingredients.
#[derive(Debug, Clone)]
pub struct ResidualDifference {
    pub estimate: CurveEstimate,
    /// `Ybar_j^{sparse} - mu_dense_hat(t_j^{sparse})`.
    pub residuals: Vec<f64>,
    /// Dense mean fit at the sparse design points.
    pub dense_at_sparse: Vec<f64>,
}

pub fn residual_difference(
    sparse: &CurveMatrix,
    dense_mean: &DenseMean,
    h: f64,
    degree: usize,
    eval_grid: &EvalGrid,
) -> Result<ResidualDifference> {
    let dense_at_sparse = dense_mean.at(sparse.grid().points())?;
    let residuals: Vec<f64> = sparse
        .column_means()
        .iter()
        .zip(&dense_at_sparse)
        .map(|(y, m)| y - m)
        .collect();
    let values = LinearSmoother::new(sparse.grid(), eval_grid.points(), h, degree)?.apply(&residuals);
    let estimate = CurveEstimate::new(
        eval_grid.clone(),
        values,
        Bandwidths {
            h: Some(h),
            h_dense: Some(dense_mean.bandwidth()),
            degree: Some(degree),
            degree_dense: Some(dense_mean.degree()),
        },
    )?;
    Ok(ResidualDifference {
        estimate,
        residuals,
        dense_at_sparse,
    })
}

/// Reconstructed sparse mean `delta_hat + mu_dense_hat`.
pub fn sparse_mean(delta_hat: &CurveEstimate, dense_mean: &CurveEstimate) -> Result<CurveEstimate> {
    if delta_hat.eval_grid != dense_mean.eval_grid {
        return Err(Error::GridMismatch);
    }
    let values = delta_hat
        .values
        .iter()
        .zip(&dense_mean.values)
        .map(|(d, m)| d + m)
        .collect();
    CurveEstimate::new(delta_hat.eval_grid.clone(), values, delta_hat.bandwidths)
}

/// Centered difference `delta_hat - int_0^1 delta_hat`.
pub fn center(delta_hat: &CurveEstimate) -> CurveEstimate {
    let mean = delta_hat.integral();
    CurveEstimate {
        eval_grid: delta_hat.eval_grid.clone(),
        values: delta_hat.values.iter().map(|v| v - mean).collect(),
        bandwidths: delta_hat.bandwidths,
    }
}

/// Confidence interval for a scalar functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarCI {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub variance_used: f64,
}

/// Normal-approximation interval for `int_0^1 delta` at confidence `level`,
/// with asymptotic variance `int int pooled / n`.
pub fn integral_ci(
    delta_hat: &CurveEstimate,
    pooled_variance_surface: &KernelField,
    n: usize,
    level: f64,
) -> Result<ScalarCI> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0, 1), got {level}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if pooled_variance_surface.eval_grid != delta_hat.eval_grid {
        return Err(Error::GridMismatch);
    }
    let mut double = pooled_variance_surface.double_integral();
    if double < -1e-8 {
        return Err(Error::NegativeVariance(double));
    }
    if double < 0.0 {
        double = 0.0;
    }
    let variance = double / n as f64;
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let half = z * variance.sqrt();
    let estimate = delta_hat.integral();
    Ok(ScalarCI {
        estimate,
        lower: estimate - half,
        upper: estimate + half,
        level,
        variance_used: variance,
    })
}

/// Precomputed smoothers for repeated two-sample fits on fixed grids and
/// bandwidths.
#[derive(Debug, Clone)]
pub struct TwoSampleSmoothers {
    eval_grid: EvalGrid,
    /// Sparse-grid weights at the evaluation grid (`h`, `d`).
    pub sparse_eval: LinearSmoother,
    /// Dense-grid weights at the evaluation grid (`h_dense`, `d_dense`).
    pub dense_eval: LinearSmoother,
    /// Dense-grid weights at the sparse design points.
    pub dense_at_sparse: LinearSmoother,
}

/// Full set of mean estimates from one two-sample fit.
#[derive(Debug, Clone)]
pub struct TwoSampleFit {
    pub dense_mean: CurveEstimate,
    pub delta: CurveEstimate,
    pub sparse_mean: CurveEstimate,
    pub residuals: Vec<f64>,
    pub dense_at_sparse: Vec<f64>,
}

impl TwoSampleSmoothers {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sparse_grid: &DesignGrid,
        dense_grid: &DesignGrid,
        eval_grid: &EvalGrid,
        h: f64,
        h_dense: f64,
        degree: usize,
        degree_dense: usize,
    ) -> Result<Self> {
        Ok(Self {
            eval_grid: eval_grid.clone(),
            sparse_eval: LinearSmoother::new(sparse_grid, eval_grid.points(), h, degree)?,
            dense_eval: LinearSmoother::new(dense_grid, eval_grid.points(), h_dense, degree_dense)?,
            dense_at_sparse: LinearSmoother::new(dense_grid, sparse_grid.points(), h_dense, degree_dense)?,
        })
    }

    pub fn eval_grid(&self) -> &EvalGrid {
        &self.eval_grid
    }

    pub fn bandwidths(&self) -> Bandwidths {
        Bandwidths {
            h: Some(self.sparse_eval.bandwidth()),
            h_dense: Some(self.dense_eval.bandwidth()),
            degree: Some(self.sparse_eval.degree()),
            degree_dense: Some(self.dense_eval.degree()),
        }
    }

    pub fn fit(&self, sparse: &CurveMatrix, dense: &CurveMatrix) -> Result<TwoSampleFit> {
        if sparse.n_points() != self.sparse_eval.matrix().ncols()
            || dense.n_points() != self.dense_eval.matrix().ncols()
        {
            return Err(Error::GridMismatch);
        }
        let dense_means = dense.column_means();
        let dense_values = self.dense_eval.apply(&dense_means);
        let dense_at_sparse = self.dense_at_sparse.apply(&dense_means);
        let residuals: Vec<f64> = sparse
            .column_means()
            .iter()
            .zip(&dense_at_sparse)
            .map(|(y, m)| y - m)
            .collect();
        let bw = self.bandwidths();
        let dense_mean = CurveEstimate::new(
            self.eval_grid.clone(),
            dense_values,
            Bandwidths {
                h: None,
                degree: None,
                ..bw
            },
        )?;
        let delta = CurveEstimate::new(self.eval_grid.clone(), self.sparse_eval.apply(&residuals), bw)?;
        let sparse_mean = sparse_mean(&delta, &dense_mean)?;
        Ok(TwoSampleFit {
            dense_mean,
            delta,
            sparse_mean,
            residuals,
            dense_at_sparse,
        })
    }
}
