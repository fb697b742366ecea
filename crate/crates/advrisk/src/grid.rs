//! Uniform one-dimensional grids, atomized distributions and functions on
//! them, and sliding-window ball extrema.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for deciding that a length is an integer multiple of
/// the grid spacing.
const ALIGN_REL_TOL: f64 = 1e-9;

/// Uniform grid with nodes `lo + k * spacing` for `k` in `[0, count)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: f64,
    spacing: f64,
    count: usize,
}

impl Grid {
    /// Builds a grid after validating its parameters.
    pub fn new(lo: f64, spacing: f64, count: usize) -> Result<Self> {
        if !lo.is_finite() {
            return Err(Error::Grid {
                reason: format!("origin {lo} is not finite"),
            });
        }
        if !spacing.is_finite() || spacing <= 0.0 {
            return Err(Error::Grid {
                reason: format!("spacing {spacing} must be positive and finite"),
            });
        }
        if count == 0 {
            return Err(Error::Grid {
                reason: "count must be positive".into(),
            });
        }
        Ok(Grid { lo, spacing, count })
    }

    /// First node.
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Last node.
    pub fn hi(&self) -> f64 {
        self.node(self.count - 1)
    }

    /// Distance between adjacent nodes.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of nodes.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Coordinate of node `k`.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k < self.count, "node index out of range");
        self.lo + k as f64 * self.spacing
    }

    /// All node coordinates in order.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|k| self.node(k))
    }

    /// Converts a nonnegative length into a whole number of grid steps.
    ///
    /// The length must be an integer multiple of the spacing within a
    /// relative tolerance of 1e-9; otherwise the error names the two
    /// nearest admissible lengths.
    pub fn steps_for(&self, len: f64) -> Result<usize> {
        if !len.is_finite() || len < 0.0 {
            return Err(Error::Precondition {
                reason: format!("length {len} must be finite and nonnegative"),
            });
        }
        let ratio = len / self.spacing;
        let k = ratio.round();
        if (len - k * self.spacing).abs() <= ALIGN_REL_TOL * self.spacing.max(len.abs()) {
            return Ok(k as usize);
        }
        let below = ratio.floor() * self.spacing;
        let above = ratio.ceil() * self.spacing;
        Err(Error::Alignment {
            eps: len,
            below,
            above,
        })
    }

    /// Index of the node equal to `x`, within alignment tolerance.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        let off_grid = || Error::OffGrid {
            x,
            lo: self.lo,
            spacing: self.spacing,
            count: self.count,
        };
        if !x.is_finite() {
            return Err(off_grid());
        }
        let ratio = (x - self.lo) / self.spacing;
        let k = ratio.round();
        if (x - (self.lo + k * self.spacing)).abs() > ALIGN_REL_TOL * self.spacing.max(x.abs()) {
            return Err(off_grid());
        }
        if k < 0.0 || k >= self.count as f64 {
            return Err(off_grid());
        }
        Ok(k as usize)
    }

    /// Number of steps from this grid's origin to another's.
    ///
    /// Both grids must share a spacing and have origins a whole number of
    /// steps apart, so every node of one lies on the other's lattice.
    pub fn step_offset(&self, other: &Grid) -> Result<i64> {
        if (self.spacing - other.spacing).abs() > ALIGN_REL_TOL * self.spacing {
            return Err(Error::GridMismatch {
                reason: format!("spacings differ: {} vs {}", self.spacing, other.spacing),
            });
        }
        let ratio = (other.lo - self.lo) / self.spacing;
        let k = ratio.round();
        if (other.lo - (self.lo + k * self.spacing)).abs()
            > ALIGN_REL_TOL * self.spacing.max(other.lo.abs()).max(self.lo.abs())
        {
            return Err(Error::GridMismatch {
                reason: format!(
                    "origins {} and {} are not a whole number of steps apart",
                    self.lo, other.lo
                ),
            });
        }
        Ok(k as i64)
    }

    /// Same grid widened by `pad_steps` nodes on each end.
    pub fn extended(&self, pad_steps: usize) -> Grid {
        Grid {
            lo: self.lo - pad_steps as f64 * self.spacing,
            spacing: self.spacing,
            count: self.count + 2 * pad_steps,
        }
    }
}

/// Pair of nonnegative atomic measures on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    grid: Grid,
    mass0: Vec<f64>,
    mass1: Vec<f64>,
}

impl GridDistribution {
    /// Builds a distribution whose combined mass lies in `(0, 1]`.
    pub fn new(grid: Grid, mass0: Vec<f64>, mass1: Vec<f64>) -> Result<Self> {
        Self::build(grid, mass0, mass1, false)
    }

    /// Builds a distribution without the unit upper bound on total mass,
    /// for inputs such as a pair of separately normalized measures.
    pub fn new_unnormalized(grid: Grid, mass0: Vec<f64>, mass1: Vec<f64>) -> Result<Self> {
        Self::build(grid, mass0, mass1, true)
    }

    fn build(grid: Grid, mass0: Vec<f64>, mass1: Vec<f64>, allow_over: bool) -> Result<Self> {
        if mass0.len() != grid.count() || mass1.len() != grid.count() {
            return Err(Error::Distribution {
                reason: format!(
                    "mass vectors of length {} and {} on a grid of {} nodes",
                    mass0.len(),
                    mass1.len(),
                    grid.count()
                ),
            });
        }
        for (label, masses) in [("mass0", &mass0), ("mass1", &mass1)] {
            for (k, &m) in masses.iter().enumerate() {
                if !m.is_finite() || m < 0.0 {
                    return Err(Error::Distribution {
                        reason: format!("{label}[{k}] = {m} must be finite and nonnegative"),
                    });
                }
            }
        }
        let total: f64 = mass0.iter().chain(mass1.iter()).sum();
        if total <= 0.0 || (!allow_over && total > 1.0 + ALIGN_REL_TOL) {
            return Err(Error::MassBudget { total });
        }
        Ok(GridDistribution { grid, mass0, mass1 })
    }

    /// Underlying grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Class-0 atom masses per node.
    pub fn mass0(&self) -> &[f64] {
        &self.mass0
    }

    /// Class-1 atom masses per node.
    pub fn mass1(&self) -> &[f64] {
        &self.mass1
    }

    /// Total class-0 mass.
    pub fn total_mass0(&self) -> f64 {
        self.mass0.iter().sum()
    }

    /// Total class-1 mass.
    pub fn total_mass1(&self) -> f64 {
        self.mass1.iter().sum()
    }

    /// Combined mass of both classes.
    pub fn total_mass(&self) -> f64 {
        self.total_mass0() + self.total_mass1()
    }

    /// Nodes carrying mass in either class, as `(index, x, m0, m1)`.
    pub fn atoms(&self) -> impl Iterator<Item = (usize, f64, f64, f64)> + '_ {
        (0..self.grid.count()).filter_map(move |k| {
            let (m0, m1) = (self.mass0[k], self.mass1[k]);
            if m0 > 0.0 || m1 > 0.0 {
                Some((k, self.grid.node(k), m0, m1))
            } else {
                None
            }
        })
    }

    /// One class's atoms as `(x, mass)` pairs, skipping empty nodes.
    pub fn marginal(&self, class: u8) -> Vec<(f64, f64)> {
        assert!(class <= 1, "class must be 0 or 1");
        let masses = if class == 0 { &self.mass0 } else { &self.mass1 };
        (0..self.grid.count())
            .filter(|&k| masses[k] > 0.0)
            .map(|k| (self.grid.node(k), masses[k]))
            .collect()
    }

    /// First and last node indices carrying mass, if any mass exists.
    pub fn support_range(&self) -> Option<(usize, usize)> {
        let mut iter = self.atoms().map(|(k, _, _, _)| k);
        let first = iter.next()?;
        Some((first, iter.last().unwrap_or(first)))
    }

    /// Same masses on a grid widened by `pad` on both ends.
    pub fn extend(&self, pad: f64) -> Result<GridDistribution> {
        let w = self.grid.steps_for(pad)?;
        let grid = self.grid.extended(w);
        let mut mass0 = vec![0.0; grid.count()];
        let mut mass1 = vec![0.0; grid.count()];
        mass0[w..w + self.grid.count()].copy_from_slice(&self.mass0);
        mass1[w..w + self.grid.count()].copy_from_slice(&self.mass1);
        Ok(GridDistribution { grid, mass0, mass1 })
    }

    /// Emits the distribution as `x,p0,p1` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p0,p1\n");
        for k in 0..self.grid.count() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.grid.node(k),
                self.mass0[k],
                self.mass1[k]
            ));
        }
        out
    }

    /// Parses `x,p0,p1` rows, inferring the grid from the x column.
    ///
    /// Requires at least two rows with uniformly spaced, increasing x.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut mass0 = Vec::new();
        let mut mass1 = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line_no == 0 && line.split(',').any(|c| c.trim().parse::<f64>().is_err()) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Csv {
                    line: line_no + 1,
                    reason: format!("expected 3 columns, got {}", fields.len()),
                });
            }
            let mut parsed = [0.0; 3];
            for (slot, field) in parsed.iter_mut().zip(&fields) {
                *slot = field.trim().parse::<f64>().map_err(|e| Error::Csv {
                    line: line_no + 1,
                    reason: format!("bad number {:?}: {e}", field.trim()),
                })?;
            }
            xs.push(parsed[0]);
            mass0.push(parsed[1]);
            mass1.push(parsed[2]);
        }
        if xs.len() < 2 {
            return Err(Error::Csv {
                line: text.lines().count(),
                reason: "need at least two data rows to infer the grid".into(),
            });
        }
        let spacing = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        let grid = Grid::new(xs[0], spacing, xs.len())?;
        for (k, &x) in xs.iter().enumerate() {
            if !matches!(grid.index_of(x), Ok(i) if i == k) {
                return Err(Error::Csv {
                    line: k + 2,
                    reason: format!("x = {x} breaks uniform spacing {spacing}"),
                });
            }
        }
        GridDistribution::new(grid, mass0, mass1)
    }
}

/// Extended-real-valued function sampled at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    /// Builds a grid function; values may be infinite but not NaN.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::GridMismatch {
                reason: format!(
                    "{} values on a grid of {} nodes",
                    values.len(),
                    grid.count()
                ),
            });
        }
        if let Some(k) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Precondition {
                reason: format!("value at node {k} is NaN"),
            });
        }
        Ok(GridFunction { grid, values })
    }

    /// Constant function on the grid.
    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.count()])
    }

    /// Samples a closure at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    /// Underlying grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Node values in grid order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at node `k`.
    pub fn value_at(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Value at the node equal to `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.values[self.grid.index_of(x)?])
    }

    /// Applies a map to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        Self::from_fn(
            self.grid,
            |x| f(self.values[self.grid.index_of(x).unwrap()]),
        )
    }

    /// Node-wise maximum over the radius-`eps` window, clamped at the ends.
    pub fn sup_ball(&self, eps: f64) -> Result<GridFunction> {
        let w = self.grid.steps_for(eps)?;
        Ok(GridFunction {
            grid: self.grid,
            values: slide_extremum(&self.values, w, true),
        })
    }

    /// Node-wise minimum over the radius-`eps` window, clamped at the ends.
    pub fn inf_ball(&self, eps: f64) -> Result<GridFunction> {
        let w = self.grid.steps_for(eps)?;
        Ok(GridFunction {
            grid: self.grid,
            values: slide_extremum(&self.values, w, false),
        })
    }

    /// Indicator pair `(1 where f <= 0, 1 where f > 0)`; ties go to the
    /// first component, and the two sum to one at every node.
    pub fn threshold_indicators(&self) -> (GridFunction, GridFunction) {
        let at_most: Vec<f64> = self
            .values
            .iter()
            .map(|&v| if v <= 0.0 { 1.0 } else { 0.0 })
            .collect();
        let above: Vec<f64> = at_most.iter().map(|&v| 1.0 - v).collect();
        (
            GridFunction {
                grid: self.grid,
                values: at_most,
            },
            GridFunction {
                grid: self.grid,
                values: above,
            },
        )
    }

    /// Emits the function as `x,value` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for k in 0..self.grid.count() {
            out.push_str(&format!("{},{}\n", self.grid.node(k), self.values[k]));
        }
        out
    }

    /// Parses `x,value` rows, inferring the grid from the x column.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line_no == 0 && line.split(',').any(|c| c.trim().parse::<f64>().is_err()) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 2 {
                return Err(Error::Csv {
                    line: line_no + 1,
                    reason: format!("expected 2 columns, got {}", fields.len()),
                });
            }
            let x = fields[0].trim().parse::<f64>().map_err(|e| Error::Csv {
                line: line_no + 1,
                reason: format!("bad number {:?}: {e}", fields[0].trim()),
            })?;
            let v = fields[1].trim().parse::<f64>().map_err(|e| Error::Csv {
                line: line_no + 1,
                reason: format!("bad number {:?}: {e}", fields[1].trim()),
            })?;
            xs.push(x);
            values.push(v);
        }
        if xs.len() < 2 {
            return Err(Error::Csv {
                line: text.lines().count(),
                reason: "need at least two data rows to infer the grid".into(),
            });
        }
        let spacing = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        let grid = Grid::new(xs[0], spacing, xs.len())?;
        for (k, &x) in xs.iter().enumerate() {
            if !matches!(grid.index_of(x), Ok(i) if i == k) {
                return Err(Error::Csv {
                    line: k + 2,
                    reason: format!("x = {x} breaks uniform spacing {spacing}"),
                });
            }
        }
        GridFunction::new(grid, values)
    }
}

/// Sliding window extremum over `[k - w, k + w]` clamped to the slice, via
/// a monotone deque in O(n).
fn slide_extremum(values: &[f64], w: usize, take_max: bool) -> Vec<f64> {
    let n = values.len();
    let beats = |a: f64, b: f64| if take_max { a >= b } else { a <= b };
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut out = Vec::with_capacity(n);
    let mut next = 0;
    for k in 0..n {
        let hi = (k + w).min(n - 1);
        while next <= hi {
            while let Some(&back) = deque.back() {
                if beats(values[next], values[back]) {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&front| front + w < k) {
            deque.pop_front();
        }
        out.push(values[*deque.front().expect("window never empty")]);
    }
    out
}
