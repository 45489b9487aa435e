//! Minimization of the discrete energies under clamped boundary values, and
//! translation normalization of wall configurations.
//!
//! The minimizer is gradient descent with an Armijo backtracking line search.
//! By default the descent direction is preconditioned by the elastic part of
//! the Hessian plus the well curvature, a tridiagonal matrix solved exactly
//! per iteration.

use serde::{Deserialize, Serialize};

use crate::energies::{energy_and_grad, BoundaryData, EnergyKind, ReferenceProfile};
use crate::error::{Error, Result};
use crate::functions::{ChainState, PiecewiseAffine, UniformPartition};
use crate::potential::WeakPotential;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
/// Relative size of rounding noise in an energy change.
const ROUNDING: f64 = 16.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    /// Constant step length.
    Fixed { step: f64 },
    /// Start at step 1 and halve until the Armijo condition holds.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "init")]
pub enum Init {
    /// One `tanh` wall per unit of jump, spread evenly over the window.
    ReferenceProfile,
    /// One linear ramp of width two wall lengths per unit of jump, spread
    /// evenly over the window.
    LinearRamp,
    /// A given chain on the window.
    Provided { chain: ChainState },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    /// Elastic tridiagonal part of the Hessian plus `w''` on the diagonal,
    /// floored at `w''(0)`.
    Elastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    /// Stop once the sup norm of the projected gradient is at most this.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub init: Init,
    pub preconditioner: Preconditioner,
    /// Keep a per-iteration `(iter, energy, grad_norm)` trace.
    pub record_trace: bool,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 100_000,
            step_rule: StepRule::Backtracking,
            init: Init::ReferenceProfile,
            preconditioner: Preconditioner::Elastic,
            record_trace: false,
        }
    }
}

impl MinimizeConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if let StepRule::Fixed { step } = self.step_rule {
            if !(step > 0.0) {
                return Err(Error::InvalidParameter(format!("fixed step must be positive, got {step}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(flatten)]
    pub kind: EnergyKind,
    pub iterations: usize,
    pub converged: bool,
    pub energy: f64,
    pub wall_count: u64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeOutcome {
    pub chain: ChainState,
    pub energy: f64,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl MinimizeOutcome {
    pub fn write_trace_csv(&self, mut out: impl std::io::Write) -> Result<()> {
        writeln!(out, "iter,energy,grad_norm")?;
        for r in &self.trace {
            writeln!(out, "{},{},{}", r.iter, r.energy, r.grad_norm)?;
        }
        Ok(())
    }
}

/// Centres of `count` walls spread evenly over `[left, right]`, each at the
/// middle of its own sub-interval. Callers move them to cell midpoints,
/// where a discrete wall has its lowest energy.
fn wall_centres(left: f64, right: f64, count: usize) -> impl Iterator<Item = f64> {
    let width = (right - left) / count as f64;
    (0..count).map(move |k| left + (k as f64 + 0.5) * width)
}

fn initial_values(
    window: &UniformPartition,
    boundary: &BoundaryData,
    kind: &EnergyKind,
    init: &Init,
) -> Result<Vec<f64>> {
    let (ml, mr) = (boundary.m_left(), boundary.m_right());
    let jump = boundary.jump();
    let sign = jump.signum() as f64;
    let count = jump.unsigned_abs() as usize;
    let scale = kind.wall_scale();
    let h = window.spacing();
    let centres: Vec<f64> = wall_centres(window.left(), window.right(), count)
        .map(|c| ((c / h).floor() + 0.5) * h)
        .collect();
    let mut values: Vec<f64> = match init {
        Init::ReferenceProfile => {
            let unit = ReferenceProfile::unit();
            window
                .nodes()
                .map(|x| ml + sign * centres.iter().map(|c| unit.eval((x - c) / scale)).sum::<f64>())
                .collect()
        }
        Init::LinearRamp => window
            .nodes()
            .map(|x| {
                ml + sign
                    * centres
                        .iter()
                        .map(|c| (0.5 + 0.5 * (x - c) / scale).clamp(0.0, 1.0))
                        .sum::<f64>()
            })
            .collect(),
        Init::Provided { chain } => {
            if chain.partition() != *window {
                return Err(Error::InvalidParameter("provided chain does not live on the window".into()));
            }
            if chain.left_clamp() != ml || chain.right_clamp() != mr {
                return Err(Error::InvalidParameter(format!(
                    "provided chain clamps ({}, {}) differ from the boundary levels ({ml}, {mr})",
                    chain.left_clamp(),
                    chain.right_clamp()
                )));
            }
            chain.values().to_vec()
        }
    };
    let n = values.len();
    values[0] = ml;
    values[n - 1] = mr;
    Ok(values)
}

/// Solves `P d = r` on the interior nodes for the preconditioner `P` with
/// diagonal `diag` and constant off-diagonal `off`; `d` is zero at both ends.
fn solve_tridiagonal(diag: &[f64], off: f64, r: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = r.len();
    d[0] = 0.0;
    d[n - 1] = 0.0;
    if n <= 2 {
        return;
    }
    // Thomas algorithm on indices 1 ..= n - 2.
    let mut c_prev = 0.0;
    let mut d_prev = 0.0;
    for i in 1..n - 1 {
        let denom = diag[i] - off * c_prev;
        c_prev = off / denom;
        d_prev = (r[i] - off * d_prev) / denom;
        scratch[i] = c_prev;
        d[i] = d_prev;
    }
    for i in (1..n - 2).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}

/// Energy change from `x` to `y`, summed term by term so that rounding is
/// relative to the change rather than to the energy.
fn energy_change(x: &[f64], wx: &[f64], y: &[f64], wy: &mut [f64], pot: &WeakPotential, (a, b): (f64, f64)) -> f64 {
    let mut change = 0.0;
    for i in 0..x.len() {
        wy[i] = pot.w(y[i]);
        change += b * (wy[i] - wx[i]);
        if i > 0 {
            let (dy, dx) = (y[i] - y[i - 1], x[i] - x[i - 1]);
            change += a * (dy - dx) * (dy + dx);
        }
    }
    change
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes the discrete energy of `kind` over chains on `window` clamped
/// to the boundary levels.
pub fn minimize_energy(
    kind: &EnergyKind,
    pot: &WeakPotential,
    boundary: &BoundaryData,
    window: &UniformPartition,
    cfg: &MinimizeConfig,
) -> Result<MinimizeOutcome> {
    cfg.check()?;
    if !crate::functions::same_spacing(window.spacing(), kind.spacing()) {
        return Err(Error::InvalidParameter(format!(
            "window spacing {} does not match the energy's spacing {}",
            window.spacing(),
            kind.spacing()
        )));
    }
    let coeffs = crate::energies::coefficients(kind);
    let (a, b) = coeffs;
    let mut x = initial_values(window, boundary, kind, &cfg.init)?;
    let n = x.len();
    let spacing = window.spacing();

    let mut grad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut wx: Vec<f64> = x.iter().map(|&v| pot.w(v)).collect();
    let mut wy = vec![0.0; n];

    let mut energy = energy_and_grad(&x, spacing, pot, kind, &mut grad)?;
    let mut grad_norm = sup_norm(&grad);
    let mut trace = Vec::new();
    let floor = pot.curvature_at_well().max(0.0);
    let p_off = -2.0 * a;
    let mut p_diag = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = grad_norm <= cfg.grad_tol;

    while !converged && iterations < cfg.max_iters {
        if cfg.record_trace {
            trace.push(TraceRow { iter: iterations, energy, grad_norm });
        }
        match cfg.preconditioner {
            Preconditioner::Elastic => {
                for (d, &v) in p_diag.iter_mut().zip(&x) {
                    *d = 4.0 * a + b * pot.d2w(v).max(floor);
                }
                solve_tridiagonal(&p_diag, p_off, &grad, &mut dir, &mut scratch)
            }
            Preconditioner::None => dir.copy_from_slice(&grad),
        }
        // Descent along -dir; slope = grad . dir > 0.
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let noise = ROUNDING * energy.abs();
        let mut step = match cfg.step_rule {
            StepRule::Fixed { step } => step,
            StepRule::Backtracking => 1.0,
        };
        let accepted = loop {
            for i in 0..n {
                trial[i] = x[i] - step * dir[i];
            }
            let change = energy_change(&x, &wx, &trial, &mut wy, pot, coeffs);
            if !change.is_finite() {
                return Err(Error::Numeric(format!("energy change is {change} at iteration {iterations}")));
            }
            if let StepRule::Fixed { .. } = cfg.step_rule {
                if change > 0.0 {
                    return Err(Error::Numeric(format!(
                        "fixed step increased the energy by {change:e} at iteration {iterations}"
                    )));
                }
                break true;
            }
            if change <= -ARMIJO * step * slope {
                break true;
            }
            // Near a minimum the change drops below rounding: accept a step
            // that keeps the energy within rounding and shrinks the slope
            // along the direction.
            if change <= noise {
                energy_and_grad(&trial, spacing, pot, kind, &mut trial_grad)?;
                let new_slope: f64 = trial_grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
                if new_slope.abs() < slope {
                    break true;
                }
            }
            step *= 0.5;
            if step < MIN_STEP {
                break false;
            }
        };
        if !accepted {
            break;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut wx, &mut wy);
        let new_energy = energy_and_grad(&x, spacing, pot, kind, &mut grad)?;
        iterations += 1;
        energy = new_energy;
        grad_norm = sup_norm(&grad);
        converged = grad_norm <= cfg.grad_tol;
    }
    if cfg.record_trace {
        trace.push(TraceRow { iter: iterations, energy, grad_norm });
    }
    let chain = ChainState::new(spacing, window.i_min(), x)?;
    let energy = crate::energies::discrete_energy_of(&chain, pot, kind)?;
    let wall_count = wall_count(&chain);
    Ok(MinimizeOutcome {
        diagnostics: Diagnostics {
            kind: *kind,
            iterations,
            converged,
            energy,
            wall_count,
            grad_norm,
        },
        chain,
        energy,
        trace,
    })
}

/// Number of unit walls crossed by the chain.
///
/// The chain is assigned to the integer level nearest its first value; the
/// level changes when a value comes within `1/4` of another integer, and
/// every change adds the number of levels crossed.
pub fn wall_count(c: &ChainState) -> u64 {
    let mut level = c.values()[0].round() as i64;
    let mut count = 0;
    for &v in c.values() {
        let m = v.round();
        if (v - m).abs() < 0.25 && m as i64 != level {
            count += (m as i64).abs_diff(level);
            level = m as i64;
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationConfig {
    pub alpha: f64,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self { alpha: 0.1 }
    }
}

impl NormalizationConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1/2), got {alpha}")));
        }
        Ok(Self { alpha })
    }
}

/// `p(1 - alpha) - p(alpha)`.
pub fn i_alpha(pot: &WeakPotential, ncfg: &NormalizationConfig) -> Result<f64> {
    Ok(pot.transition_cost(1.0 - ncfg.alpha)? - pot.transition_cost(ncfg.alpha)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalization {
    pub shift: f64,
    pub normalized: PiecewiseAffine,
    /// `|V_a^0| + |V_a^1|` at the chosen shift.
    pub v_measure: f64,
}

/// Length of `{u in (lo, hi) : g(u) in (c - r, c + r)}` over the real line,
/// tails included.
fn band_measure(g: &PiecewiseAffine, lo: f64, hi: f64, c: f64, r: f64) -> f64 {
    let inside = |v: f64| (v - c).abs() < r;
    let p = g.partition();
    let (left, right) = (p.left(), p.right());
    let mut total = 0.0;
    if inside(g.left_tail()) && lo < left {
        total += left - lo;
    }
    if inside(g.right_tail()) && hi > right {
        total += hi - right;
    }
    let h = p.spacing();
    let k_first = (((lo - left) / h).floor().max(0.0)) as usize;
    let k_last = (((hi - left) / h).ceil().max(0.0) as usize).min(p.len() - 1);
    let values = g.node_values();
    for k in k_first..k_last {
        let (x0, x1) = (left + k as f64 * h, left + (k + 1) as f64 * h);
        let (a, b) = (x0.max(lo), x1.min(hi));
        if a >= b {
            continue;
        }
        let (v0, v1) = (values[k], values[k + 1]);
        // Parameter range where the affine piece lies inside the band.
        let (t0, t1) = if v0 == v1 {
            if inside(v0) {
                (0.0, 1.0)
            } else {
                continue;
            }
        } else {
            let ta = (c - r - v0) / (v1 - v0);
            let tb = (c + r - v0) / (v1 - v0);
            (ta.min(tb).max(0.0), ta.max(tb).min(1.0))
        };
        let (s0, s1) = (x0 + t0 * h, x0 + t1 * h);
        total += (s1.min(b) - s0.max(a)).max(0.0);
    }
    total
}

/// `|V_a^0| + |V_a^1|` for `a = k * delta`.
fn v_measure_at(g: &PiecewiseAffine, threshold: f64, alpha: f64, a: f64) -> f64 {
    band_measure(g, threshold + a, f64::INFINITY, 0.0, alpha)
        + band_measure(g, f64::NEG_INFINITY, -threshold + a, 1.0, alpha)
}

/// Translates `g` by a grid multiple so that its wall lines up with the
/// reference profile.
///
/// Among the shifts minimizing `|V_a^0| + |V_a^1|`, the minimizing shifts
/// form runs of consecutive grid multiples; the middle of a run is taken
/// (rounded down) and ties between runs go to the smallest `|a|`.
pub fn translation_normalize(
    g: &PiecewiseAffine,
    vbar: &ReferenceProfile,
    ncfg: &NormalizationConfig,
    delta: f64,
) -> Result<Normalization> {
    NormalizationConfig::new(ncfg.alpha)?;
    if vbar.boundary.levels() != (0, 1) || g.left_tail() != 0.0 || g.right_tail() != 1.0 {
        return Err(Error::Domain(format!(
            "normalization needs tails (0, 1), got ({}, {})",
            g.left_tail(),
            g.right_tail()
        )));
    }
    if !crate::functions::same_spacing(g.spacing(), delta) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} does not match the spacing {}",
            g.spacing()
        )));
    }
    let alpha = ncfg.alpha;
    let threshold = (1.0 - 2.0 * alpha).atanh();
    let p = g.partition();
    let reach = (threshold / delta).ceil() as i64 + 1;
    let ks: Vec<i64> = (p.i_min() - reach..=p.i_max() + reach).collect();
    let measures: Vec<f64> = ks
        .iter()
        .map(|&k| v_measure_at(g, threshold, alpha, k as f64 * delta))
        .collect();
    let best = measures.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best);
    let mut chosen: Option<i64> = None;
    let mut idx = 0;
    while idx < ks.len() {
        if measures[idx] > best + tol {
            idx += 1;
            continue;
        }
        let start = ks[idx];
        while idx + 1 < ks.len() && measures[idx + 1] <= best + tol {
            idx += 1;
        }
        let mid = (start + ks[idx]).div_euclid(2);
        if chosen.is_none_or(|c| mid.abs() < c.abs()) {
            chosen = Some(mid);
        }
        idx += 1;
    }
    let k = chosen.expect("the shift range is never empty");
    Ok(Normalization {
        shift: k as f64 * delta,
        normalized: g.translated_by_nodes(k),
        v_measure: measures[(k - ks[0]) as usize],
    })
}
