//! The heteroclinic wall profile and recovery sequences built from it.
//!
//! The increasing profile solves `xi' = sqrt(w(xi))` with `xi(0) = 1/2`. It is
//! tabulated by inverting `y(xi) = int_{1/2}^{xi} dt / sqrt(w(t))` on a graded
//! grid that stops at `eta` and `1 - eta`. Beyond the table the profile is
//! continued by the linearized tails `eta * exp(-kappa |y - y_end|)`, which
//! recovery constructions at small `epsilon` need: their tangent point
//! `1 / sqrt(epsilon)` in profile coordinates lies far out in the tail.
//!
//! Recovery outputs are sampled on the partition of spacing
//! `epsilon * delta`; in the profile coordinate `y = (x - x0) / epsilon` the
//! nodes sit exactly at `k * delta`.

use serde::Serialize;

use crate::energies::{continuum_energy_twoscale, TwoScaleParams};
use crate::error::{Error, Result};
use crate::functions::{write_samples_csv, PiecewiseAffine, StepFunction, UniformPartition};
use crate::potential::WeakPotential;
use crate::quadrature::{gauss_legendre, GAUSS_LEGENDRE_8};

/// Default truncation level of the tabulated profile.
pub const DEFAULT_ETA: f64 = 1e-4;

/// Target step in `y` of the graded grid where `w''` is small.
const GRID_STEP: f64 = 2e-3;

/// Smallest number of grid cells a wall may span.
const MIN_WALL_CELLS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Self::Increasing => 1.0,
            Self::Decreasing => -1.0,
        }
    }
}

/// A tabulated monotone heteroclinic connection between the wells 0 and 1.
#[derive(Debug, Clone)]
pub struct HeteroclinicProfile {
    eta: f64,
    direction: Direction,
    /// Abscissae of the increasing profile, strictly increasing, with `y = 0`
    /// at `xi = 1/2`.
    y: Vec<f64>,
    xi: Vec<f64>,
    /// `sqrt(w(xi))` at every node.
    slope: Vec<f64>,
    kappa_left: f64,
    kappa_right: f64,
}

/// One half of the table, walking from `1/2` towards `target`.
fn half_table(pot: &WeakPotential, target: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let sign = if target > 0.5 { 1.0 } else { -1.0 };
    let mut ys = vec![0.0];
    let mut xis = vec![0.5];
    let mut slopes = vec![pot.sqrt_w(0.5)];
    let mut xi = 0.5;
    let mut y = 0.0;
    while (target - xi) * sign > 0.0 {
        let s = *slopes.last().unwrap();
        if !(s > 0.0) {
            return Err(Error::PotentialDegenerate(format!(
                "sqrt(w) vanishes at {xi} before the profile reaches {target}"
            )));
        }
        let dy = GRID_STEP / (1.0 + pot.d2w(xi).abs()).sqrt();
        let mut next = xi + sign * dy * s;
        // Avoid a sliver cell at the end.
        if (target - next) * sign < 0.5 * dy * s {
            next = target;
        }
        let inc = gauss_legendre(|t| 1.0 / pot.sqrt_w(t), xi.min(next), xi.max(next));
        if !inc.is_finite() {
            return Err(Error::PotentialDegenerate(format!(
                "profile quadrature diverges on [{}, {}]",
                xi.min(next),
                xi.max(next)
            )));
        }
        y += sign * inc;
        xi = next;
        ys.push(y);
        xis.push(xi);
        slopes.push(pot.sqrt_w(xi));
    }
    Ok((ys, xis, slopes))
}

impl HeteroclinicProfile {
    pub fn new(pot: &WeakPotential, eta: f64, direction: Direction) -> Result<Self> {
        if !(eta > 0.0 && eta < 0.4) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 0.4), got {eta}")));
        }
        let report = pot.validate();
        if !report.passed {
            return Err(Error::PotentialDegenerate(report.diagnostics.join("; ")));
        }
        let (mut y, mut xi, mut slope) = half_table(pot, eta)?;
        y.reverse();
        xi.reverse();
        slope.reverse();
        let (yu, xu, su) = half_table(pot, 1.0 - eta)?;
        y.extend_from_slice(&yu[1..]);
        xi.extend_from_slice(&xu[1..]);
        slope.extend_from_slice(&su[1..]);
        let kappa_left = slope[0] / xi[0];
        let kappa_right = slope[slope.len() - 1] / (1.0 - xi[xi.len() - 1]);
        Ok(Self {
            eta,
            direction,
            y,
            xi,
            slope,
            kappa_left,
            kappa_right,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// The same table read in the other direction.
    pub fn mirrored(&self) -> Self {
        let direction = match self.direction {
            Direction::Increasing => Direction::Decreasing,
            Direction::Decreasing => Direction::Increasing,
        };
        Self { direction, ..self.clone() }
    }

    /// Tabulated range `[y_min, y_max]` of the profile's argument.
    pub fn table_range(&self) -> (f64, f64) {
        let (a, b) = (self.y[0], self.y[self.y.len() - 1]);
        match self.direction {
            Direction::Increasing => (a, b),
            Direction::Decreasing => (-b, -a),
        }
    }

    /// Table nodes `(y, xi(y))` in increasing `y`.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        match self.direction {
            Direction::Increasing => self.y.iter().copied().zip(self.xi.iter().copied()).collect(),
            Direction::Decreasing => self
                .y
                .iter()
                .rev()
                .map(|&y| -y)
                .zip(self.xi.iter().rev().copied())
                .collect(),
        }
    }

    /// Growth rates of the two tails.
    pub fn tail_rates(&self) -> (f64, f64) {
        (self.kappa_left, self.kappa_right)
    }

    /// Value and derivative of the increasing profile.
    fn inc_with_derivative(&self, y: f64) -> (f64, f64) {
        let n = self.y.len();
        if y <= self.y[0] {
            let q = self.xi[0] * (self.kappa_left * (y - self.y[0])).exp();
            return (q, self.kappa_left * q);
        }
        if y >= self.y[n - 1] {
            let q = (1.0 - self.xi[n - 1]) * (-self.kappa_right * (y - self.y[n - 1])).exp();
            return (1.0 - q, self.kappa_right * q);
        }
        let k = self.y.partition_point(|&t| t <= y) - 1;
        let h = self.y[k + 1] - self.y[k];
        let t = (y - self.y[k]) / h;
        let (p0, p1) = (self.xi[k], self.xi[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let deriv = ((6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (value, deriv)
    }

    /// `1 - xi(y)` and `xi'(y)` of the increasing profile, without
    /// cancellation in the right tail.
    fn upper_defect(&self, y: f64) -> (f64, f64) {
        let n = self.y.len();
        if y >= self.y[n - 1] {
            let q = (1.0 - self.xi[n - 1]) * (-self.kappa_right * (y - self.y[n - 1])).exp();
            (q, self.kappa_right * q)
        } else {
            let (v, d) = self.inc_with_derivative(y);
            (1.0 - v, d)
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.eval_with_derivative(y).0
    }

    pub fn derivative(&self, y: f64) -> f64 {
        self.eval_with_derivative(y).1
    }

    pub fn eval_with_derivative(&self, y: f64) -> (f64, f64) {
        let s = self.direction.sign();
        let (v, d) = self.inc_with_derivative(s * y);
        (v, s * d)
    }

    /// `(int xi'^2, int w(xi))` over the tabulated range.
    pub fn energy_split(&self, pot: &WeakPotential) -> (f64, f64) {
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        for k in 0..self.y.len() - 1 {
            let (a, b) = (self.y[k], self.y[k + 1]);
            for &(t, wt) in &GAUSS_LEGENDRE_8 {
                let (v, d) = self.inc_with_derivative(a + t * (b - a));
                kinetic += (b - a) * wt * d * d;
                potential += (b - a) * wt * pot.w(v);
            }
        }
        (kinetic, potential)
    }

    /// Energy carried by the two exponential tails, each of `int xi'^2` and
    /// `int w(xi)` to leading order.
    pub fn tail_energy(&self) -> f64 {
        let ql = self.xi[0];
        let qr = 1.0 - self.xi[self.xi.len() - 1];
        0.5 * (self.kappa_left * ql * ql + self.kappa_right * qr * qr)
    }

    /// Writes the table as `x,value` CSV.
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        write_samples_csv(out, self.samples())
    }
}

pub fn heteroclinic_profile(pot: &WeakPotential, eta: f64, direction: Direction) -> Result<HeteroclinicProfile> {
    HeteroclinicProfile::new(pot, eta, direction)
}

/// One spliced jump of a recovery output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpPiece {
    pub location: f64,
    pub from: i64,
    pub to: i64,
    pub energy: f64,
}

/// A recovery output and the geometry it was built with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryBuild {
    pub epsilon: f64,
    pub delta: f64,
    /// Half-width of one unit wall, where the tangent line meets the far
    /// level.
    pub beta: f64,
    /// `sqrt(epsilon)`.
    pub tangent_point: f64,
    /// Distance between consecutive unit walls of a multiple jump.
    pub separation: f64,
    pub pieces: Vec<JumpPiece>,
    pub energy: f64,
    #[serde(skip)]
    pub result: PiecewiseAffine,
}

impl RecoveryBuild {
    /// Metadata without the sampled function.
    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

/// Unit-wall geometry at a given `(epsilon, delta)`, in profile coordinates.
#[derive(Debug, Clone, Copy)]
struct WallGeometry {
    epsilon: f64,
    delta: f64,
    /// Tangent point `1 / sqrt(epsilon)`.
    tangent: f64,
    /// Where the tangent line meets the far level, `beta / epsilon`.
    reach: f64,
    /// Nodes on each side of the wall centre.
    half_nodes: i64,
    /// Separation of consecutive walls in nodes.
    stride: i64,
}

/// Builds recovery sequences for integer step functions.
#[derive(Debug, Clone)]
pub struct Recovery<'a> {
    pot: &'a WeakPotential,
    profile: HeteroclinicProfile,
}

impl<'a> Recovery<'a> {
    pub fn new(pot: &'a WeakPotential, eta: f64) -> Result<Self> {
        Ok(Self {
            pot,
            profile: HeteroclinicProfile::new(pot, eta, Direction::Increasing)?,
        })
    }

    pub fn profile(&self) -> &HeteroclinicProfile {
        &self.profile
    }

    fn geometry(&self, epsilon: f64, delta: f64) -> Result<WallGeometry> {
        TwoScaleParams::new(epsilon, delta)?;
        let tangent = 1.0 / epsilon.sqrt();
        let (q, d) = self.profile.upper_defect(tangent);
        let reach = tangent + q / d;
        if !(reach > tangent && reach.is_finite()) {
            return Err(Error::Construction(format!(
                "tangent line at {tangent} does not reach the upper level"
            )));
        }
        if 2.0 * reach / delta < MIN_WALL_CELLS {
            return Err(Error::Construction(format!(
                "grid too coarse: a wall of width {} spans fewer than {MIN_WALL_CELLS} cells of size {}",
                2.0 * reach * epsilon,
                epsilon * delta
            )));
        }
        let half_nodes = (reach / delta).ceil() as i64 + 1;
        // Smallest integer T with T * delta > 2 * reach + delta.
        let stride = ((2.0 * reach + delta) / delta).floor() as i64 + 1;
        Ok(WallGeometry {
            epsilon,
            delta,
            tangent,
            reach,
            half_nodes,
            stride,
        })
    }

    /// The truncated increasing unit wall at profile coordinate `y`.
    fn unit_wall(&self, g: &WallGeometry, y: f64) -> f64 {
        if y <= -g.reach {
            0.0
        } else if y < -g.tangent {
            let (v, d) = self.profile.inc_with_derivative(-g.tangent);
            (v + d * (y + g.tangent)).max(0.0)
        } else if y <= g.tangent {
            self.profile.inc_with_derivative(y).0
        } else if y < g.reach {
            let (q, d) = self.profile.upper_defect(g.tangent);
            (1.0 - (q - d * (y - g.tangent))).min(1.0)
        } else {
            1.0
        }
    }

    /// Node values of `base + sum_k s * wall(y - k T)` on node offsets
    /// `lo ..= hi` relative to the first wall, `s` the sign of `jump`.
    fn multi_values(&self, g: &WallGeometry, jump: i64, base: i64, lo: i64, hi: i64) -> Vec<f64> {
        let copies = jump.unsigned_abs() as i64;
        (lo..=hi)
            .map(|k| {
                let mut v = base as f64;
                for c in 0..copies {
                    let off = k - c * g.stride;
                    if off.abs() > g.half_nodes {
                        if off > 0 {
                            v += jump.signum() as f64;
                        }
                        continue;
                    }
                    let y = off as f64 * g.delta;
                    v += if jump > 0 {
                        self.unit_wall(g, y)
                    } else {
                        self.unit_wall(g, -y) - 1.0
                    };
                }
                v
            })
            .collect()
    }

    fn build_multi(&self, g: &WallGeometry, x0: f64, jump: i64, base: i64) -> Result<(PiecewiseAffine, JumpPiece)> {
        if jump == 0 {
            return Err(Error::InvalidParameter("jump must be nonzero".into()));
        }
        let h = g.epsilon * g.delta;
        let i0 = (x0 / h).round() as i64;
        let lo = -g.half_nodes;
        let hi = (jump.abs() - 1) * g.stride + g.half_nodes;
        let values = self.multi_values(g, jump, base, lo, hi);
        let partition = UniformPartition::new(h, i0 + lo, i0 + hi)?;
        let f = PiecewiseAffine::new(partition, values)?;
        let energy = continuum_energy_twoscale(&f, self.pot, &TwoScaleParams::new(g.epsilon, g.delta)?)?;
        let piece = JumpPiece {
            location: i0 as f64 * h,
            from: base,
            to: base + jump,
            energy,
        };
        Ok((f, piece))
    }

    fn finish(&self, g: &WallGeometry, result: PiecewiseAffine, pieces: Vec<JumpPiece>) -> Result<RecoveryBuild> {
        let energy = continuum_energy_twoscale(&result, self.pot, &TwoScaleParams::new(g.epsilon, g.delta)?)?;
        Ok(RecoveryBuild {
            epsilon: g.epsilon,
            delta: g.delta,
            beta: g.reach * g.epsilon,
            tangent_point: g.tangent * g.epsilon,
            separation: g.stride as f64 * g.epsilon * g.delta,
            pieces,
            energy,
            result,
        })
    }

    /// A single unit wall at `x0` (snapped to the grid) between
    /// `levels.0` on the left and `levels.1` on the right.
    pub fn step(&self, epsilon: f64, delta: f64, x0: f64, direction: Direction, levels: (i64, i64)) -> Result<RecoveryBuild> {
        let jump = levels.1 - levels.0;
        let expected = match direction {
            Direction::Increasing => 1,
            Direction::Decreasing => -1,
        };
        if jump != expected {
            return Err(Error::InvalidParameter(format!(
                "levels {levels:?} are not a unit {direction:?} step"
            )));
        }
        self.multijump(epsilon, delta, x0, jump, levels.0)
    }

    /// `|jump|` unit walls starting at `x0`, from `base` to `base + jump`.
    pub fn multijump(&self, epsilon: f64, delta: f64, x0: f64, jump: i64, base: i64) -> Result<RecoveryBuild> {
        let g = self.geometry(epsilon, delta)?;
        let (f, piece) = self.build_multi(&g, x0, jump, base)?;
        self.finish(&g, f, vec![piece])
    }

    /// A recovery output for an arbitrary integer step function.
    pub fn bv(&self, epsilon: f64, delta: f64, target: &StepFunction) -> Result<RecoveryBuild> {
        let g = self.geometry(epsilon, delta)?;
        let h = epsilon * delta;
        let first = target.levels()[0];
        if target.breakpoints().is_empty() {
            let f = PiecewiseAffine::constant(UniformPartition::new(h, -1, 1)?, first as f64);
            return self.finish(&g, f, Vec::new());
        }
        let mut built: Vec<(PiecewiseAffine, JumpPiece, i64)> = Vec::new();
        for (t, from, to) in target.jumps() {
            let (f, piece) = self.build_multi(&g, t, to - from, from)?;
            if let Some((prev, prev_piece, _)) = built.last() {
                if f.partition().i_min() <= prev.partition().i_max() {
                    return Err(Error::Construction(format!(
                        "breakpoints {} and {} are too close for epsilon = {epsilon}, delta = {delta}",
                        prev_piece.location, piece.location
                    )));
                }
            }
            built.push((f, piece, from));
        }
        let i_min = built[0].0.partition().i_min();
        let i_max = built[built.len() - 1].0.partition().i_max();
        let mut values = vec![first as f64; (i_max - i_min + 1) as usize];
        for (f, _, from) in &built {
            let p = f.partition();
            let start = (p.i_min() - i_min) as usize;
            for (k, v) in f.node_values().iter().enumerate() {
                values[start + k] += v - *from as f64;
            }
            let jump = f.right_tail() - *from as f64;
            for v in values.iter_mut().skip(start + f.node_values().len()) {
                *v += jump;
            }
        }
        let result = PiecewiseAffine::new(UniformPartition::new(h, i_min, i_max)?, values)?;
        let pieces = built.into_iter().map(|(_, p, _)| p).collect();
        self.finish(&g, result, pieces)
    }
}

/// A single-wall recovery output with the default profile truncation.
pub fn recovery_step(
    pot: &WeakPotential,
    epsilon: f64,
    delta: f64,
    x0: f64,
    direction: Direction,
    levels: (i64, i64),
) -> Result<RecoveryBuild> {
    Recovery::new(pot, DEFAULT_ETA)?.step(epsilon, delta, x0, direction, levels)
}

pub fn recovery_multijump(pot: &WeakPotential, epsilon: f64, delta: f64, x0: f64, jump: i64, base: i64) -> Result<PiecewiseAffine> {
    Ok(Recovery::new(pot, DEFAULT_ETA)?.multijump(epsilon, delta, x0, jump, base)?.result)
}

pub fn recovery_bv(pot: &WeakPotential, epsilon: f64, delta: f64, target: &StepFunction) -> Result<PiecewiseAffine> {
    Ok(Recovery::new(pot, DEFAULT_ETA)?.bv(epsilon, delta, target)?.result)
}
