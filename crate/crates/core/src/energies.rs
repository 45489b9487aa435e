//! Energy functionals of the chain at every scale.
//!
//! Discrete energies act on [`ChainState`]s, continuum energies on
//! [`PiecewiseAffine`] functions. Weak-interaction integrals over a cell use
//! the order-8 Gauss-Legendre rule applied to `w` composed with the affine
//! piece; elastic integrals are exact.
//!
//! A grid mismatch between a function and the parameters of a functional is
//! an error rather than an infinite energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{dirichlet_energy, same_spacing, step_variation, ChainState, PiecewiseAffine, StepFunction};
use crate::potential::WeakPotential;
use crate::quadrature::{gauss_legendre, GAUSS_LEGENDRE_8};

/// Mesoscale discretization length `delta = sqrt(b/a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MesoscaleParams {
    delta: f64,
}

impl MesoscaleParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleParams {
    epsilon: f64,
    delta: f64,
}

impl TwoScaleParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && delta > 0.0 && epsilon * delta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need epsilon, delta > 0 and epsilon * delta <= 1, got ({epsilon}, {delta})"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Node spacing `epsilon * delta`.
    pub fn spacing(&self) -> f64 {
        self.epsilon * self.delta
    }
}

/// Which discrete energy to work with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum EnergyKind {
    Meso(MesoscaleParams),
    TwoScale(TwoScaleParams),
}

impl EnergyKind {
    pub fn spacing(&self) -> f64 {
        match self {
            Self::Meso(m) => m.delta,
            Self::TwoScale(t) => t.spacing(),
        }
    }

    /// Length scale of a wall: 1 at the mesoscale, `epsilon` for two-scale.
    pub fn wall_scale(&self) -> f64 {
        match self {
            Self::Meso(_) => 1.0,
            Self::TwoScale(t) => t.epsilon,
        }
    }

    /// Coefficients `(a, b)` of the discrete energy
    /// `a * sum (xi_i - xi_{i-1})^2 + b * sum w(xi_i)`.
    fn discrete_coefficients(&self) -> (f64, f64) {
        match self {
            // delta * sum ((d xi) / delta)^2 + delta * sum w
            Self::Meso(m) => (1.0 / m.delta, m.delta),
            // eps * sum ((d xi) / (eps delta))^2 * eps delta + eps^-1 * sum w * eps delta
            Self::TwoScale(t) => {
                let h = t.spacing();
                (t.epsilon * h / (h * h), h / t.epsilon)
            }
        }
    }

    /// Weights `(a, b)` of `a * int xi'^2 + b * int w(xi)` in the continuum
    /// counterpart.
    fn continuum_weights(&self) -> (f64, f64) {
        match self {
            Self::Meso(_) => (1.0, 1.0),
            Self::TwoScale(t) => (t.epsilon, 1.0 / t.epsilon),
        }
    }

    fn check_spacing(&self, spacing: f64) -> Result<()> {
        if same_spacing(spacing, self.spacing()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "node spacing {spacing} does not match the energy's spacing {}",
                self.spacing()
            )))
        }
    }

    fn params_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryData {
    m_left: i64,
    m_right: i64,
}

impl BoundaryData {
    pub fn new(m_left: i64, m_right: i64) -> Result<Self> {
        if m_left == m_right {
            return Err(Error::InvalidParameter(format!("boundary levels must differ, got {m_left} twice")));
        }
        Ok(Self { m_left, m_right })
    }

    pub fn m_left(&self) -> f64 {
        self.m_left as f64
    }

    pub fn m_right(&self) -> f64 {
        self.m_right as f64
    }

    pub fn levels(&self) -> (i64, i64) {
        (self.m_left, self.m_right)
    }

    /// `m_right - m_left`.
    pub fn jump(&self) -> i64 {
        self.m_right - self.m_left
    }
}

/// `x -> (m_r - m_l) (tanh x + 1) / 2 + m_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    pub boundary: BoundaryData,
}

impl ReferenceProfile {
    pub fn new(boundary: BoundaryData) -> Self {
        Self { boundary }
    }

    pub fn unit() -> Self {
        Self::new(BoundaryData { m_left: 0, m_right: 1 })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.boundary.jump() as f64 * 0.5 * (x.tanh() + 1.0) + self.boundary.m_left()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let c = x.cosh();
        self.boundary.jump() as f64 * 0.5 / (c * c)
    }
}

/// Largest value increment handled by a single Gauss-Legendre panel.
const MAX_PANEL_RISE: f64 = 0.05;

/// `int_0^1 w(a + t (b - a)) dt`, on enough panels that each one spans a
/// value increment of at most [`MAX_PANEL_RISE`].
#[inline]
fn cell_weak_average(pot: &WeakPotential, a: f64, b: f64) -> f64 {
    let panels = ((b - a).abs() / MAX_PANEL_RISE).ceil().max(1.0);
    let d = (b - a) / panels;
    let mut sum = 0.0;
    for k in 0..panels as usize {
        let start = a + k as f64 * d;
        sum += GAUSS_LEGENDRE_8.iter().map(|&(t, wt)| wt * pot.w(start + t * d)).sum::<f64>();
    }
    sum / panels
}

/// `int w(g(x)) dx` over the window of `g`.
pub fn weak_term(g: &PiecewiseAffine, pot: &WeakPotential) -> f64 {
    let rho = g.spacing();
    rho * g
        .node_values()
        .windows(2)
        .map(|c| cell_weak_average(pot, c[0], c[1]))
        .sum::<f64>()
}

fn discrete_energy(c: &ChainState, pot: &WeakPotential, kind: &EnergyKind) -> Result<f64> {
    kind.check_spacing(c.delta_eff())?;
    let (a, b) = kind.discrete_coefficients();
    let v = c.values();
    let elastic: f64 = v.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum();
    let weak: f64 = v.iter().map(|&x| pot.w(x)).sum();
    let e = a * elastic + b * weak;
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Numeric(format!("discrete energy is {e}")))
    }
}

/// `delta * sum ((xi_i - xi_{i-1}) / delta)^2 + delta * sum w(xi_i)` over the
/// chain window, clamped end nodes included.
pub fn discrete_energy_meso(c: &ChainState, pot: &WeakPotential, mp: &MesoscaleParams) -> Result<f64> {
    discrete_energy(c, pot, &EnergyKind::Meso(*mp))
}

/// The two-scale discrete energy on spacing `epsilon * delta`.
pub fn discrete_energy_twoscale(c: &ChainState, pot: &WeakPotential, tp: &TwoScaleParams) -> Result<f64> {
    discrete_energy(c, pot, &EnergyKind::TwoScale(*tp))
}

/// Discrete energy of either kind.
pub fn discrete_energy_of(c: &ChainState, pot: &WeakPotential, kind: &EnergyKind) -> Result<f64> {
    discrete_energy(c, pot, kind)
}

fn continuum_energy(g: &PiecewiseAffine, pot: &WeakPotential, kind: &EnergyKind) -> Result<f64> {
    kind.check_spacing(g.spacing())?;
    let (a, b) = kind.continuum_weights();
    Ok(a * dirichlet_energy(g) + b * weak_term(g, pot))
}

/// `int g'^2 + int w(g)` for `g` piecewise affine on spacing `delta`.
pub fn continuum_energy_meso(g: &PiecewiseAffine, pot: &WeakPotential, mp: &MesoscaleParams) -> Result<f64> {
    continuum_energy(g, pot, &EnergyKind::Meso(*mp))
}

/// `eps int g'^2 + eps^-1 int w(g)` for `g` on spacing `epsilon * delta`.
pub fn continuum_energy_twoscale(g: &PiecewiseAffine, pot: &WeakPotential, tp: &TwoScaleParams) -> Result<f64> {
    continuum_energy(g, pot, &EnergyKind::TwoScale(*tp))
}

pub fn continuum_energy_of(g: &PiecewiseAffine, pot: &WeakPotential, kind: &EnergyKind) -> Result<f64> {
    continuum_energy(g, pot, kind)
}

/// `|E_delta[lift of c] - E^delta[c]|`.
pub fn energy_gap(c: &ChainState, pot: &WeakPotential, mp: &MesoscaleParams) -> Result<f64> {
    let continuum = continuum_energy_meso(&c.lift(), pot, mp)?;
    let discrete = discrete_energy_meso(c, pot, mp)?;
    Ok((continuum - discrete).abs())
}

/// `F[g] = int g'^2 + int w(g)` on any spacing.
pub fn continuum_f(g: &PiecewiseAffine, pot: &WeakPotential) -> f64 {
    dirichlet_energy(g) + weak_term(g, pot)
}

/// `F_eps[g] = eps int g'^2 + eps^-1 int w(g)`.
pub fn continuum_f_eps(g: &PiecewiseAffine, pot: &WeakPotential, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(epsilon * dirichlet_energy(g) + weak_term(g, pot) / epsilon)
}

/// An energy of a smooth profile integrated over a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothEnergy {
    pub value: f64,
    /// Energy density at the two window edges times a unit decay length: an
    /// estimate of what exponentially decaying tails would add.
    pub tail_bound: f64,
}

/// `eps int_a^b f'^2 + eps^-1 int_a^b w(f)` by composite Gauss-Legendre on
/// `panels` equal panels. `F` is the case `eps = 1`.
pub fn continuum_f_eps_smooth(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    (a, b): (f64, f64),
    panels: usize,
    pot: &WeakPotential,
    epsilon: f64,
) -> Result<SmoothEnergy> {
    if !(a < b) || panels == 0 || !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("need a < b, panels > 0 and epsilon > 0".into()));
    }
    let density = |x: f64| epsilon * df(x).powi(2) + pot.w(f(x)) / epsilon;
    let h = (b - a) / panels as f64;
    let value = (0..panels)
        .map(|k| gauss_legendre(density, a + h * k as f64, a + h * (k + 1) as f64))
        .sum();
    Ok(SmoothEnergy {
        value,
        tail_bound: density(a) + density(b),
    })
}

/// `Var(s) * p(1)`.
pub fn bv_energy(s: &StepFunction, pot: &WeakPotential) -> f64 {
    step_variation(s) as f64 * pot.p_bar()
}

/// Gradient of the discrete energy with respect to the chain values; zero at
/// the two clamped end nodes.
pub fn grad_discrete(c: &ChainState, pot: &WeakPotential, kind: &EnergyKind) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; c.values().len()];
    energy_and_grad(c.values(), c.delta_eff(), pot, kind, &mut grad)?;
    Ok(grad)
}

/// Discrete energy of `values` and its projected gradient, written into
/// `grad`. Shared by the minimizer.
pub(crate) fn energy_and_grad(
    values: &[f64],
    spacing: f64,
    pot: &WeakPotential,
    kind: &EnergyKind,
    grad: &mut [f64],
) -> Result<f64> {
    kind.check_spacing(spacing)?;
    let (a, b) = kind.discrete_coefficients();
    let n = values.len();
    let mut elastic = 0.0;
    let mut weak = 0.0;
    for i in 0..n {
        let (w, dw) = pot.w_and_dw(values[i]);
        weak += w;
        if i > 0 {
            elastic += (values[i] - values[i - 1]).powi(2);
        }
        grad[i] = if i == 0 || i == n - 1 {
            0.0
        } else {
            2.0 * a * (2.0 * values[i] - values[i - 1] - values[i + 1]) + b * dw
        };
    }
    let e = a * elastic + b * weak;
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Numeric(format!("discrete energy is {e}")))
    }
}

/// Elastic and weak coefficients of the discrete energy, in that order.
pub(crate) fn coefficients(kind: &EnergyKind) -> (f64, f64) {
    kind.discrete_coefficients()
}

/// A loggable energy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub functional: String,
    pub params: serde_json::Value,
    pub value: f64,
    pub tail_bound: f64,
}

impl EnergyRecord {
    pub fn new(functional: &str, kind: &EnergyKind, value: f64, tail_bound: f64) -> Self {
        Self {
            functional: functional.to_owned(),
            params: kind.params_json(),
            value,
            tail_bound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{interpolate, UniformPartition};
    use crate::potential::PairPotentialSpec;
    use crate::quadrature::adaptive_simpson;

    fn pot() -> WeakPotential {
        WeakPotential::new(PairPotentialSpec::default()).unwrap()
    }

    fn vbar_chain(delta: f64, halfwidth: f64) -> ChainState {
        let p = UniformPartition::symmetric(delta, halfwidth).unwrap();
        let r = ReferenceProfile::unit();
        let g = interpolate(|x| r.eval(x), &p, (r.eval(p.left()), r.eval(p.right()))).unwrap();
        ChainState::from_function(&g)
    }

    #[test]
    fn params_validate() {
        assert!(MesoscaleParams::new(1.5).is_err());
        assert!(MesoscaleParams::new(0.0).is_err());
        assert!(TwoScaleParams::new(10.0, 0.5).is_err());
        assert!(BoundaryData::new(1, 1).is_err());
        let r = ReferenceProfile::new(BoundaryData::new(2, -1).unwrap());
        assert!((r.eval(-40.0) - 2.0).abs() < 1e-12 && (r.eval(40.0) + 1.0).abs() < 1e-12);
        assert!(r.derivative(0.3) < 0.0);
    }

    #[test]
    fn zero_chain_and_unit_ramp() {
        let pot = pot();
        let mp = MesoscaleParams::new(0.1).unwrap();
        let zero = ChainState::new(0.1, -3, vec![0.0; 7]).unwrap();
        assert!(discrete_energy_meso(&zero, &pot, &mp).unwrap().abs() <= 10.0 * pot.quadrature_tol());
        assert!(continuum_energy_meso(&zero.lift(), &pot, &mp).unwrap().abs() <= 10.0 * pot.quadrature_tol());

        let ramp = ChainState::new(0.1, -2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let e = continuum_energy_meso(&ramp.lift(), &pot, &mp).unwrap();
        let avg = adaptive_simpson(|t| pot.w(t), 0.0, 1.0, 1e-12).unwrap();
        assert!((e - (1.0 / 0.1 + 0.1 * avg)).abs() < 1e-9, "{e}");

        let bad = MesoscaleParams::new(0.2).unwrap();
        assert!(matches!(discrete_energy_meso(&ramp, &pot, &bad), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn single_jump_with_flat_potential() {
        // A potential whose weak term vanishes: deep standoff, tiny well.
        let spec = PairPotentialSpec {
            well_depth: 1e-12,
            standoff: 50.0,
            ..PairPotentialSpec::default()
        };
        let flat = WeakPotential::new(spec).unwrap();
        let c = ChainState::new(0.1, -1, vec![0.0, 1.0, 1.0]).unwrap();
        let e = discrete_energy_meso(&c, &flat, &MesoscaleParams::new(0.1).unwrap()).unwrap();
        assert!((e - 10.0).abs() < 1e-9);
    }

    #[test]
    fn discrete_energy_matches_wide_truncation_oracle() {
        let pot = pot();
        let c = vbar_chain(0.1, 20.0);
        let mp = MesoscaleParams::new(0.1).unwrap();
        let e = discrete_energy_meso(&c, &pot, &mp).unwrap();
        // Independent direct summation with the plain |j| <= 4 J_max sum.
        let spec = pot.spec();
        let big = 4 * spec.truncation_radius as i64;
        let w = |xi: f64| -> f64 {
            (-big..=big)
                .map(|j| {
                    let j = j as f64;
                    spec.h((j + 0.5 + xi) / spec.sigma) - spec.h((j + 0.5) / spec.sigma)
                })
                .sum()
        };
        let v = c.values();
        let oracle: f64 = v.windows(2).map(|p| (p[1] - p[0]).powi(2) / 0.1).sum::<f64>()
            + 0.1 * v.iter().map(|&x| w(x)).sum::<f64>();
        assert!((e - oracle).abs() < 1e-8, "{e} vs {oracle}");
    }

    #[test]
    fn two_scale_reduces_to_meso_at_unit_epsilon() {
        let pot = pot();
        let c = vbar_chain(0.05, 10.0);
        let m = discrete_energy_meso(&c, &pot, &MesoscaleParams::new(0.05).unwrap()).unwrap();
        let t = discrete_energy_twoscale(&c, &pot, &TwoScaleParams::new(1.0, 0.05).unwrap()).unwrap();
        assert!((m - t).abs() <= 1e-12 * m);
        let cm = continuum_energy_meso(&c.lift(), &pot, &MesoscaleParams::new(0.05).unwrap()).unwrap();
        let ct = continuum_energy_twoscale(&c.lift(), &pot, &TwoScaleParams::new(1.0, 0.05).unwrap()).unwrap();
        assert!((cm - ct).abs() < 1e-14);
        assert_eq!(continuum_f_eps(&c.lift(), &pot, 1.0).unwrap(), continuum_f(&c.lift(), &pot));
    }

    #[test]
    fn gap_is_second_order() {
        let pot = pot();
        let gap = |d: f64| {
            energy_gap(&vbar_chain(d, 20.0), &pot, &MesoscaleParams::new(d).unwrap()).unwrap()
        };
        let ratio = gap(0.1) / gap(0.05);
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
        let zero = ChainState::new(0.1, -3, vec![1.0; 7]).unwrap();
        assert!(energy_gap(&zero, &pot, &MesoscaleParams::new(0.1).unwrap()).unwrap() <= 10.0 * pot.quadrature_tol());
    }

    #[test]
    fn bv_energy_values() {
        let pot = pot();
        assert_eq!(bv_energy(&StepFunction::constant(2), &pot), 0.0);
        assert_eq!(bv_energy(&StepFunction::unit_jump(0.0, 0, 1).unwrap(), &pot), pot.p_bar());
        let s = StepFunction::new(vec![0.0, 5.0], vec![0, 2, 1]).unwrap();
        assert!((bv_energy(&s, &pot) - 3.0 * pot.p_bar()).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_constant_integer_chain_vanishes() {
        let pot = pot();
        let c = ChainState::new(0.1, -3, vec![2.0; 7]).unwrap();
        let g = grad_discrete(&c, &pot, &EnergyKind::Meso(MesoscaleParams::new(0.1).unwrap())).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn gradient_is_antisymmetric_for_odd_chain() {
        // xi(-x) = 1 - xi(x) gives g_{-i} = -g_i (w even about 1/2).
        let pot = pot();
        let c = vbar_chain(0.1, 5.0);
        let g = grad_discrete(&c, &pot, &EnergyKind::Meso(MesoscaleParams::new(0.1).unwrap())).unwrap();
        let n = g.len();
        for i in 0..n {
            assert!((g[i] + g[n - 1 - i]).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn smooth_energy_of_constant_and_record_json() {
        let pot = pot();
        let e = continuum_f_eps_smooth(|_| 1.0, |_| 0.0, (-3.0, 3.0), 10, &pot, 1.0).unwrap();
        assert!(e.value.abs() < 1e-8);
        let kind = EnergyKind::Meso(MesoscaleParams::new(0.1).unwrap());
        let rec = EnergyRecord::new("discrete_energy_meso", &kind, 2.0, 0.0);
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"functional\":\"discrete_energy_meso\""));
        assert!(text.contains("\"delta\":0.1"));
    }
}
