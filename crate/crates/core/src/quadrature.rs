//! Uniform evaluation grid on `[0, 1]` with trapezoid-rule integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl EvalGrid {
    /// `g` equispaced points from 0 to 1 inclusive.
    pub fn uniform(g: usize) -> Result<Self> {
        if g < 3 {
            return Err(Error::InvalidArgument(format!(
                "evaluation grid needs at least 3 points, got {g}"
            )));
        }
        let step = 1.0 / (g - 1) as f64;
        let mut points: Vec<f64> = (0..g).map(|a| a as f64 * step).collect();
        points[g - 1] = 1.0;
        let mut weights = vec![step; g];
        weights[0] = step / 2.0;
        weights[g - 1] = step / 2.0;
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Trapezoid weights; they sum to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `int_0^1 f` by the trapezoid rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}
