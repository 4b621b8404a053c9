//! hv-block K-fold cross-validation for every bandwidth in the pipeline.
//!
//! Test blocks are contiguous runs of `floor(n/K)` curves; training sets drop
//! the test block and `g` curves on either side of it. Scores are the mean
//! over folds of a sup-norm prediction error, and the smallest score wins
//! with ties going to the larger bandwidth.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covkernel::{product_matrix, LagSmoother};
use crate::error::{Error, Result};
use crate::mean_diff::{CurveMatrix, DenseMean};
use crate::weights::LinearSmoother;

/// Scores within `TIE_TOLERANCE * best + TIE_FLOOR` of the minimum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;
pub const TIE_FLOOR: f64 = 1e-12;

/// One fold with zero-based curve indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    pub gap: usize,
    pub folds: Vec<Fold>,
}

pub fn make_folds(n: usize, k: usize, gap: usize) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let block = n / k;
    if block == 0 {
        return Err(Error::DegenerateFold { fold: 1 });
    }
    let mut folds = Vec::with_capacity(k);
    for r in 0..k {
        let start = r * block;
        let end = start + block;
        let lo = start.saturating_sub(gap);
        let hi = (end + gap).min(n);
        let train: Vec<usize> = (0..lo).chain(hi..n).collect();
        if train.is_empty() {
            return Err(Error::DegenerateFold { fold: r + 1 });
        }
        folds.push(Fold {
            test: (start..end).collect(),
            train,
        });
    }
    Ok(FoldPlan { n, k, gap, folds })
}

/// Per-fold score of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CVTraceRow {
    pub candidate: f64,
    pub fold: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVResult {
    pub candidates: Vec<f64>,
    /// Mean fold score per candidate; `None` when the candidate was skipped.
    pub scores: Vec<Option<f64>>,
    pub selected: f64,
    pub trace: Vec<CVTraceRow>,
    /// Skipped candidates with the reason.
    pub skipped: Vec<(f64, String)>,
}

impl CVResult {
    fn from_scores(candidates: &[f64], per_fold: Vec<std::result::Result<Vec<f64>, Error>>) -> Result<Self> {
        let mut scores = Vec::with_capacity(candidates.len());
        let mut trace = Vec::new();
        let mut skipped = Vec::new();
        for (&h, folds) in candidates.iter().zip(per_fold) {
            match folds {
                Ok(f) => {
                    for (r, s) in f.iter().enumerate() {
                        trace.push(CVTraceRow {
                            candidate: h,
                            fold: r + 1,
                            score: *s,
                        });
                    }
                    scores.push(Some(f.iter().sum::<f64>() / f.len() as f64));
                }
                Err(e @ (Error::InsufficientSupport { .. } | Error::SingularDesign { .. })) => {
                    skipped.push((h, e.to_string()));
                    scores.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let selected = select(candidates, &scores)?;
        Ok(Self {
            candidates: candidates.to_vec(),
            scores,
            selected,
            trace,
            skipped,
        })
    }

    /// Writes rows `candidate,fold,score`.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["candidate", "fold", "score"])?;
        for row in &self.trace {
            w.write_record(&[row.candidate.to_string(), row.fold.to_string(), row.score.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Argmin of the scores; near-ties go to the larger candidate.
fn select(candidates: &[f64], scores: &[Option<f64>]) -> Result<f64> {
    let best = scores
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NoViableBandwidth);
    }
    let tol = TIE_TOLERANCE * best.abs() + TIE_FLOOR;
    candidates
        .iter()
        .zip(scores)
        .filter(|(_, s)| s.is_some_and(|s| s <= best + tol))
        .map(|(h, _)| *h)
        .fold(None, |acc: Option<f64>, h| Some(acc.map_or(h, |a| a.max(h))))
        .ok_or(Error::NoViableBandwidth)
}

/// Sums scores of several CV runs over the same candidate grid, as for
/// groups pooled into one season. A candidate skipped anywhere is skipped.
pub fn pool_results(results: &[CVResult]) -> Result<CVResult> {
    let first = results.first().ok_or(Error::NoViableBandwidth)?;
    if results.iter().any(|r| r.candidates != first.candidates) {
        return Err(Error::InvalidArgument("pooled CV runs must share one candidate grid".into()));
    }
    let scores: Vec<Option<f64>> = (0..first.candidates.len())
        .map(|w| results.iter().map(|r| r.scores[w]).sum::<Option<f64>>())
        .collect();
    let selected = select(&first.candidates, &scores)?;
    Ok(CVResult {
        candidates: first.candidates.clone(),
        scores,
        selected,
        trace: results.iter().flat_map(|r| r.trace.iter().copied()).collect(),
        skipped: results.iter().flat_map(|r| r.skipped.iter().cloned()).collect(),
    })
}

/// `count` log-spaced bandwidths from `2/p` to `0.8`.
pub fn default_candidates(p: usize, count: usize) -> Vec<f64> {
    let lo = 2.0 / p as f64;
    let hi = 0.8f64;
    if lo >= hi || count < 2 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Candidate `h` for the dense mean: fold score is the sup over design points
/// of test column means minus the training fit.
pub fn cv_mean_bandwidth(dense: &CurveMatrix, candidates: &[f64], degree: usize, folds: &FoldPlan) -> Result<CVResult> {
    check_plan(dense, folds)?;
    let split: Vec<(Vec<f64>, Vec<f64>)> = folds
        .folds
        .iter()
        .map(|f| (dense.column_means_over(&f.train), dense.column_means_over(&f.test)))
        .collect();
    let per_fold = candidates
        .iter()
        .map(|&h| {
            let s = LinearSmoother::new(dense.grid(), dense.grid().points(), h, degree)?;
            Ok(split.iter().map(|(train, test)| sup_diff(test, &s.apply(train))).collect())
        })
        .collect();
    CVResult::from_scores(candidates, per_fold)
}

/// Candidate `h` for the difference, with the dense mean fixed from the
/// full dense sample and folds over sparse curves.
pub fn cv_delta_bandwidth(
    sparse: &CurveMatrix,
    dense_mean: &DenseMean,
    candidates: &[f64],
    degree: usize,
    folds: &FoldPlan,
) -> Result<CVResult> {
    check_plan(sparse, folds)?;
    let at_sparse = dense_mean.at(sparse.grid().points())?;
    let residual = |means: Vec<f64>| -> Vec<f64> { means.iter().zip(&at_sparse).map(|(y, m)| y - m).collect() };
    let split: Vec<(Vec<f64>, Vec<f64>)> = folds
        .folds
        .iter()
        .map(|f| {
            (
                residual(sparse.column_means_over(&f.train)),
                residual(sparse.column_means_over(&f.test)),
            )
        })
        .collect();
    let per_fold = candidates
        .iter()
        .map(|&h| {
            let s = LinearSmoother::new(sparse.grid(), sparse.grid().points(), h, degree)?;
            Ok(split.iter().map(|(train, test)| sup_diff(test, &s.apply(train))).collect())
        })
        .collect();
    CVResult::from_scores(candidates, per_fold)
}

/// Candidate `h` for the lag-`lag` kernel of a residual matrix.
///
/// Lag 0 compares the training fit with the test product matrix over
/// `j < l`; positive lags compare the symmetrized fit `F + F^T` with
/// `Z + Z^T` over `j <= l`.
pub fn cv_kernel_bandwidth(residuals: &CurveMatrix, lag: usize, candidates: &[f64], folds: &FoldPlan) -> Result<CVResult> {
    check_plan(residuals, folds)?;
    let values = residuals.values();
    let symmetrize = |m: DMatrix<f64>| if lag == 0 { m } else { &m + m.transpose() };
    let split: Vec<(DMatrix<f64>, DMatrix<f64>)> = folds
        .folds
        .iter()
        .map(|f| {
            Ok((
                product_matrix(values, &f.train, lag)?,
                symmetrize(product_matrix(values, &f.test, lag)?),
            ))
        })
        .collect::<Result<_>>()?;
    let p = residuals.n_points();
    let per_fold = candidates
        .iter()
        .map(|&h| {
            let s = LagSmoother::with_targets(residuals.grid(), residuals.grid().points(), lag, h)?;
            Ok(split
                .iter()
                .map(|(train, test)| {
                    let fit = symmetrize(s.field(train));
                    let mut worst: f64 = 0.0;
                    for j in 0..p {
                        let from = if lag == 0 { j + 1 } else { j };
                        for l in from..p {
                            worst = worst.max((fit[(j, l)] - test[(j, l)]).abs());
                        }
                    }
                    worst
                })
                .collect())
        })
        .collect();
    CVResult::from_scores(candidates, per_fold)
}

fn check_plan(sample: &CurveMatrix, folds: &FoldPlan) -> Result<()> {
    if folds.n != sample.n_curves() {
        return Err(Error::InvalidArgument(format!(
            "fold plan covers {} curves but the sample has {}",
            folds.n,
            sample.n_curves()
        )));
    }
    Ok(())
}
