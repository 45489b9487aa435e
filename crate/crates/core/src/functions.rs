//! Truncated function spaces on uniform partitions.
//!
//! A [`PiecewiseAffine`] lives on a window of the uniform partition
//! `{i * rho}` and is constant outside it. Two functions on different
//! partitions can be compared exactly: distances are integrated cell by cell
//! over the merged node set.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::WeakPotential;

/// Relative tolerance used to decide that two spacings agree.
pub(crate) const SPACING_RTOL: f64 = 1e-12;

pub(crate) fn same_spacing(a: f64, b: f64) -> bool {
    (a - b).abs() <= SPACING_RTOL * a.abs().max(b.abs())
}

/// A window `i_min ..= i_max` of the partition `{i * spacing : i in Z}`.
///
/// Nodes are always aligned with the origin. The window itself need not
/// contain the origin; recovery pieces placed far from it use tight windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr")]
pub struct UniformPartition {
    spacing: f64,
    i_min: i64,
    i_max: i64,
}

#[derive(Deserialize)]
struct PartitionRepr {
    spacing: f64,
    i_min: i64,
    i_max: i64,
}

impl TryFrom<PartitionRepr> for UniformPartition {
    type Error = Error;
    fn try_from(r: PartitionRepr) -> Result<Self> {
        Self::new(r.spacing, r.i_min, r.i_max)
    }
}

impl UniformPartition {
    pub fn new(spacing: f64, i_min: i64, i_max: i64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
        }
        if i_max - i_min < 2 {
            return Err(Error::InvalidParameter(format!(
                "partition window [{i_min}, {i_max}] needs at least two cells"
            )));
        }
        Ok(Self { spacing, i_min, i_max })
    }

    /// The smallest window `[-n, n]` covering `[-halfwidth, halfwidth]`.
    pub fn symmetric(spacing: f64, halfwidth: f64) -> Result<Self> {
        let n = (halfwidth / spacing - 1e-9).ceil().max(1.0) as i64;
        Self::new(spacing, -n, n)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn i_min(&self) -> i64 {
        self.i_min
    }

    pub fn i_max(&self) -> i64 {
        self.i_max
    }

    pub fn len(&self) -> usize {
        (self.i_max - self.i_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: i64) -> f64 {
        i as f64 * self.spacing
    }

    pub fn left(&self) -> f64 {
        self.node(self.i_min)
    }

    pub fn right(&self) -> f64 {
        self.node(self.i_max)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (self.i_min..=self.i_max).map(move |i| self.node(i))
    }

    /// The same partition with the window moved by `k` nodes.
    pub fn shifted(&self, k: i64) -> Self {
        Self {
            i_min: self.i_min + k,
            i_max: self.i_max + k,
            ..*self
        }
    }
}

/// A continuous function, affine on every cell of a uniform partition window
/// and constant beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseAffineRepr", into = "PiecewiseAffineRepr")]
pub struct PiecewiseAffine {
    partition: UniformPartition,
    node_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PiecewiseAffineRepr {
    partition: UniformPartition,
    node_values: Vec<f64>,
    left_tail: f64,
    right_tail: f64,
}

impl TryFrom<PiecewiseAffineRepr> for PiecewiseAffine {
    type Error = Error;
    fn try_from(r: PiecewiseAffineRepr) -> Result<Self> {
        let g = Self::new(r.partition, r.node_values)?;
        if g.left_tail() != r.left_tail || g.right_tail() != r.right_tail {
            return Err(Error::InvalidParameter(
                "tails must equal the first and last node values".into(),
            ));
        }
        Ok(g)
    }
}

impl From<PiecewiseAffine> for PiecewiseAffineRepr {
    fn from(g: PiecewiseAffine) -> Self {
        Self {
            left_tail: g.left_tail(),
            right_tail: g.right_tail(),
            partition: g.partition,
            node_values: g.node_values,
        }
    }
}

impl PiecewiseAffine {
    pub fn new(partition: UniformPartition, node_values: Vec<f64>) -> Result<Self> {
        if node_values.len() != partition.len() {
            return Err(Error::InvalidParameter(format!(
                "{} node values for a partition of {} nodes",
                node_values.len(),
                partition.len()
            )));
        }
        if let Some(bad) = node_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite node value {bad}")));
        }
        Ok(Self { partition, node_values })
    }

    pub fn constant(partition: UniformPartition, value: f64) -> Self {
        Self {
            node_values: vec![value; partition.len()],
            partition,
        }
    }

    pub fn partition(&self) -> &UniformPartition {
        &self.partition
    }

    pub fn spacing(&self) -> f64 {
        self.partition.spacing
    }

    pub fn node_values(&self) -> &[f64] {
        &self.node_values
    }

    pub fn left_tail(&self) -> f64 {
        self.node_values[0]
    }

    pub fn right_tail(&self) -> f64 {
        *self.node_values.last().unwrap()
    }

    /// Cell slopes, left to right.
    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        let rho = self.spacing();
        self.node_values.windows(2).map(move |c| (c[1] - c[0]) / rho)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.partition;
        let s = x / p.spacing;
        if s <= p.i_min as f64 {
            return self.left_tail();
        }
        if s >= p.i_max as f64 {
            return self.right_tail();
        }
        let nearest = s.round();
        if (s - nearest).abs() < 1e-12 {
            return self.node_values[(nearest as i64 - p.i_min) as usize];
        }
        let k = s.floor();
        let t = s - k;
        let idx = (k as i64 - p.i_min) as usize;
        (1.0 - t) * self.node_values[idx] + t * self.node_values[idx + 1]
    }

    /// `g(x + a)` for `a = k * spacing`: the same node values on a window
    /// moved by `-k` nodes.
    pub fn translated_by_nodes(&self, k: i64) -> Self {
        Self {
            partition: self.partition.shifted(-k),
            node_values: self.node_values.clone(),
        }
    }

    /// `g + c`.
    pub fn offset(&self, c: f64) -> Self {
        Self {
            partition: self.partition,
            node_values: self.node_values.iter().map(|v| v + c).collect(),
        }
    }

    /// `x -> g(x / eps)`, living on spacing `eps * rho`.
    pub fn dilated(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("dilation factor must be positive, got {eps}")));
        }
        let p = &self.partition;
        Ok(Self {
            partition: UniformPartition::new(p.spacing * eps, p.i_min, p.i_max)?,
            node_values: self.node_values.clone(),
        })
    }

    /// Extends the window to `[i_min, i_max]` (which must contain the current
    /// one), continuing with the tail values.
    pub fn extended(&self, i_min: i64, i_max: i64) -> Result<Self> {
        let p = &self.partition;
        if i_min > p.i_min || i_max < p.i_max {
            return Err(Error::InvalidParameter(format!(
                "window [{i_min}, {i_max}] does not contain [{}, {}]",
                p.i_min, p.i_max
            )));
        }
        let mut values = Vec::with_capacity((i_max - i_min + 1) as usize);
        values.extend(std::iter::repeat_n(self.left_tail(), (p.i_min - i_min) as usize));
        values.extend_from_slice(&self.node_values);
        values.extend(std::iter::repeat_n(self.right_tail(), (i_max - p.i_max) as usize));
        Self::new(UniformPartition::new(p.spacing, i_min, i_max)?, values)
    }

    /// Pointwise sum of two functions on the same spacing, on the union of
    /// their windows.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if !same_spacing(self.spacing(), other.spacing()) {
            return Err(Error::InvalidParameter(format!(
                "cannot add functions on spacings {} and {}",
                self.spacing(),
                other.spacing()
            )));
        }
        let lo = self.partition.i_min.min(other.partition.i_min);
        let hi = self.partition.i_max.max(other.partition.i_max);
        let a = self.extended(lo, hi)?;
        let b = other.extended(lo, hi)?;
        let values = a.node_values.iter().zip(&b.node_values).map(|(x, y)| x + y).collect();
        Self::new(a.partition, values)
    }

    /// Writes `x,value` rows for every node.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_samples_csv(out, self.partition.nodes().zip(self.node_values.iter().copied()))
    }
}

/// Writes `x,value` CSV with one header row and LF line endings.
pub fn write_samples_csv(mut out: impl Write, samples: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    writeln!(out, "x,value")?;
    for (x, v) in samples {
        writeln!(out, "{x},{v}")?;
    }
    Ok(())
}

/// Piecewise-affine interpolation of `f` at the nodes of `partition`.
///
/// `tails` must match `f` at the window edges to within `1e-8`.
pub fn interpolate(
    f: impl Fn(f64) -> f64,
    partition: &UniformPartition,
    tails: (f64, f64),
) -> Result<PiecewiseAffine> {
    let values: Vec<f64> = partition.nodes().map(&f).collect();
    let (left, right) = (values[0], *values.last().unwrap());
    if (left - tails.0).abs() > 1e-8 || (right - tails.1).abs() > 1e-8 {
        return Err(Error::Construction(format!(
            "tails ({}, {}) do not match the function at the window edges ({left}, {right})",
            tails.0, tails.1
        )));
    }
    let mut g = PiecewiseAffine::new(*partition, values)?;
    let n = g.node_values.len();
    g.node_values[0] = tails.0;
    g.node_values[n - 1] = tails.1;
    Ok(g)
}

pub fn eval_pa(g: &PiecewiseAffine, x: f64) -> f64 {
    g.eval(x)
}

/// `int g'(x)^2 dx`, exactly.
pub fn dirichlet_energy(g: &PiecewiseAffine) -> f64 {
    let rho = g.spacing();
    g.node_values.windows(2).map(|c| (c[1] - c[0]).powi(2)).sum::<f64>() / rho
}

/// Sorted union of both node sets (and `extra` points), deduplicated.
fn merged_nodes(g1: &PiecewiseAffine, g2: &PiecewiseAffine, extra: &[f64]) -> Vec<f64> {
    let mut xs: Vec<f64> = g1
        .partition
        .nodes()
        .chain(g2.partition.nodes())
        .chain(extra.iter().copied())
        .collect();
    xs.sort_by(f64::total_cmp);
    let scale = g1.spacing().min(g2.spacing());
    xs.dedup_by(|b, a| (*b - *a).abs() <= 1e-9 * scale);
    xs
}

/// `int_x0^x1 d^2` for `d` affine with end values `d0`, `d1`.
fn affine_square_integral(h: f64, d0: f64, d1: f64) -> f64 {
    h * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0
}

/// `int_x0^x1 |d|` for `d` affine with end values `d0`, `d1`.
fn affine_abs_integral(h: f64, d0: f64, d1: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * h * (d0.abs() + d1.abs())
    } else {
        0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

/// `||g1 - g2||_2` over the real line. The tails must agree on each side.
pub fn l2_distance(g1: &PiecewiseAffine, g2: &PiecewiseAffine) -> Result<f64> {
    if g1.left_tail() != g2.left_tail() || g1.right_tail() != g2.right_tail() {
        return Err(Error::InfiniteDistance(format!(
            "tails ({}, {}) and ({}, {}) differ",
            g1.left_tail(),
            g1.right_tail(),
            g2.left_tail(),
            g2.right_tail()
        )));
    }
    let xs = merged_nodes(g1, g2, &[]);
    let sq: f64 = xs
        .windows(2)
        .map(|c| {
            let d0 = g1.eval(c[0]) - g2.eval(c[0]);
            let d1 = g1.eval(c[1]) - g2.eval(c[1]);
            affine_square_integral(c[1] - c[0], d0, d1)
        })
        .sum();
    Ok(sq.sqrt())
}

/// `int_a^b |g1 - g2|`.
pub fn l1_distance_window(g1: &PiecewiseAffine, g2: &PiecewiseAffine, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidParameter(format!("empty window [{a}, {b}]")));
    }
    let xs: Vec<f64> = merged_nodes(g1, g2, &[a, b])
        .into_iter()
        .filter(|&x| x >= a && x <= b)
        .collect();
    Ok(xs
        .windows(2)
        .map(|c| {
            let d0 = g1.eval(c[0]) - g2.eval(c[0]);
            let d1 = g1.eval(c[1]) - g2.eval(c[1]);
            affine_abs_integral(c[1] - c[0], d0, d1)
        })
        .sum())
}

/// `int_a^b |g - s|` for a step function `s`.
pub fn l1_distance_to_step(g: &PiecewiseAffine, s: &StepFunction, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidParameter(format!("empty window [{a}, {b}]")));
    }
    let mut xs: Vec<f64> = g
        .partition
        .nodes()
        .chain(s.breakpoints.iter().copied())
        .chain([a, b])
        .filter(|&x| x >= a && x <= b)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    Ok(xs
        .windows(2)
        .map(|c| {
            let level = s.eval(0.5 * (c[0] + c[1])) as f64;
            affine_abs_integral(c[1] - c[0], g.eval(c[0]) - level, g.eval(c[1]) - level)
        })
        .sum())
}

/// Total variation of `p o g`, where `p` is the transition cost.
///
/// `p` is nondecreasing and `g` is affine on every cell, so `p o g` is
/// monotone per cell and the variation telescopes over the nodes.
pub fn var_of_p_composed(g: &PiecewiseAffine, pot: &WeakPotential) -> Result<f64> {
    let p: Vec<f64> = g
        .node_values
        .iter()
        .map(|&v| pot.transition_cost(v))
        .collect::<Result<_>>()?;
    Ok(p.windows(2).map(|c| (c[1] - c[0]).abs()).sum())
}

/// An integer-valued step function with finitely many jumps.
///
/// `levels[j]` is the value on `(breakpoints[j-1], breakpoints[j])`, with
/// `breakpoints[-1] = -inf` and `breakpoints[m] = +inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRepr")]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    levels: Vec<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRepr {
    breakpoints: Vec<f64>,
    levels: Vec<i64>,
}

impl TryFrom<StepRepr> for StepFunction {
    type Error = Error;
    fn try_from(r: StepRepr) -> Result<Self> {
        Self::new(r.breakpoints, r.levels)
    }
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<i64>) -> Result<Self> {
        if levels.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints need {} levels, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                levels.len()
            )));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("breakpoints must be finite".into()));
        }
        if breakpoints.windows(2).any(|c| c[0] >= c[1]) {
            return Err(Error::InvalidParameter("breakpoints must be strictly increasing".into()));
        }
        if levels.windows(2).any(|c| c[0] == c[1]) {
            return Err(Error::InvalidParameter("consecutive levels must differ".into()));
        }
        Ok(Self { breakpoints, levels })
    }

    pub fn constant(level: i64) -> Self {
        Self {
            breakpoints: Vec::new(),
            levels: vec![level],
        }
    }

    /// `level` for `x < at`, `level + jump` after.
    pub fn unit_jump(at: f64, level: i64, jump: i64) -> Result<Self> {
        Self::new(vec![at], vec![level, level + jump])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[i64] {
        &self.levels
    }

    pub fn eval(&self, x: f64) -> i64 {
        self.levels[self.breakpoints.partition_point(|&t| t <= x)]
    }

    /// Jumps as `(location, from, to)`.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, i64, i64)> + '_ {
        self.breakpoints
            .iter()
            .zip(self.levels.windows(2))
            .map(|(&t, l)| (t, l[0], l[1]))
    }
}

/// `sum_j |z_{j+1} - z_j|`.
pub fn step_variation(s: &StepFunction) -> u64 {
    s.levels.windows(2).map(|c| c[0].abs_diff(c[1])).sum()
}

/// A discrete displacement sequence `xi_i`, `i in [i_min, i_min + n)`, with the
/// first and last values held fixed during minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    delta_eff: f64,
    i_min: i64,
    values: Vec<f64>,
}

impl ChainState {
    pub fn new(delta_eff: f64, i_min: i64, values: Vec<f64>) -> Result<Self> {
        if !(delta_eff > 0.0) {
            return Err(Error::InvalidParameter(format!("node spacing must be positive, got {delta_eff}")));
        }
        if values.len() < 3 {
            return Err(Error::InvalidParameter("a chain needs at least three nodes".into()));
        }
        Ok(Self { delta_eff, i_min, values })
    }

    /// Samples of `g` at its nodes.
    pub fn from_function(g: &PiecewiseAffine) -> Self {
        Self {
            delta_eff: g.spacing(),
            i_min: g.partition.i_min,
            values: g.node_values.clone(),
        }
    }

    pub fn delta_eff(&self) -> f64 {
        self.delta_eff
    }

    pub fn i_min(&self) -> i64 {
        self.i_min
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_clamp(&self) -> f64 {
        self.values[0]
    }

    pub fn right_clamp(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn partition(&self) -> UniformPartition {
        UniformPartition {
            spacing: self.delta_eff,
            i_min: self.i_min,
            i_max: self.i_min + self.values.len() as i64 - 1,
        }
    }

    /// The piecewise-affine function through the chain values.
    pub fn lift(&self) -> PiecewiseAffine {
        PiecewiseAffine {
            partition: self.partition(),
            node_values: self.values.clone(),
        }
    }

    /// The same chain on a window moved by `k` nodes, padded with `pad`
    /// copies of the clamp values on each side.
    pub fn shifted(&self, k: i64, pad: usize) -> Self {
        let mut values = vec![self.left_clamp(); pad];
        values.extend_from_slice(&self.values);
        values.extend(std::iter::repeat_n(self.right_clamp(), pad));
        Self {
            delta_eff: self.delta_eff,
            i_min: self.i_min + k - pad as i64,
            values,
        }
    }
}
