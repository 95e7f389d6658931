use serde::{Deserialize, Serialize};

use crate::error::{BgkError, Result};

/// Nodes strictly inside `(0, 1)` carrying a continuous piecewise-linear
/// representation: hat functions between nodes, constant continuation on
/// `[0, x₀]` and `[x_{N−1}, 1]`. `weights[j]` is the integral of the `j`-th
/// basis function, so `Σ w_j f_j` integrates the interpolant exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    grading: Option<f64>,
}

impl SpatialGrid {
    /// `n` nodes at the cell midpoints of a uniform parameter grid pushed
    /// through `ξ(s) = (2s)^q / 2` (mirrored on the right half).
    pub fn graded(n: usize, exponent: f64) -> Result<Self> {
        if n < 2 {
            return Err(BgkError::Domain(format!("grid needs at least 2 nodes (got {n})")));
        }
        if !(exponent.is_finite() && exponent >= 1.0) {
            return Err(BgkError::Domain(format!("grading exponent must be >= 1 (got {exponent})")));
        }
        let map = |s: f64| {
            if s <= 0.5 {
                0.5 * (2.0 * s).powf(exponent)
            } else {
                1.0 - 0.5 * (2.0 * (1.0 - s)).powf(exponent)
            }
        };
        let nodes = (0..n).map(|j| map((j as f64 + 0.5) / n as f64)).collect();
        let mut g = Self::from_nodes(nodes)?;
        g.grading = Some(exponent);
        Ok(g)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Err(BgkError::Domain(format!("grid needs at least 2 nodes (got {n})")));
        }
        if nodes[0] <= 0.0 || nodes[n - 1] >= 1.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BgkError::Domain("grid nodes must be strictly increasing inside (0, 1)".into()));
        }
        let mut weights = vec![0.0; n];
        weights[0] = nodes[0];
        weights[n - 1] = 1.0 - nodes[n - 1];
        for k in 0..n - 1 {
            let h = nodes[k + 1] - nodes[k];
            weights[k] += 0.5 * h;
            weights[k + 1] += 0.5 * h;
        }
        Ok(Self { nodes, weights, grading: None })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grading(&self) -> Option<f64> {
        self.grading
    }

    /// Breakpoints `0, x₀, …, x_{N−1}, 1` of the piecewise-linear basis.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.nodes.len() + 2);
        b.push(0.0);
        b.extend_from_slice(&self.nodes);
        b.push(1.0);
        b
    }

    /// Evaluates the interpolant of nodal `values` at `x ∈ [0, 1]`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let n = self.nodes.len();
        let k = self.nodes.partition_point(|&xn| xn <= x);
        if k == 0 {
            return values[0];
        }
        if k == n {
            return values[n - 1];
        }
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        let t = (x - x0) / (x1 - x0);
        values[k - 1] + t * (values[k] - values[k - 1])
    }

    /// `∫₀¹` of the interpolant of `values`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Temperature profile `T(x)` on its own grid, piecewise-linear off nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureProfile {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl TemperatureProfile {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BgkError::Domain(format!(
                "profile has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(BgkError::NegativeTemperature { node, value });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: SpatialGrid, t: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![t; n])
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    /// True when every nodal value lies in `[lo − slack, hi + slack]`.
    pub fn within(&self, lo: f64, hi: f64, slack: f64) -> bool {
        self.values.iter().all(|&t| t >= lo - slack && t <= hi + slack)
    }

    /// Sup-norm distance to another profile on the same grid.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
