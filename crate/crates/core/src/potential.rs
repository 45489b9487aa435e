//! Substrate interaction: the Lennard-Jones pair potential `V`, the
//! standoff-composed horizontal potential `h(d) = V(sqrt(d^2 + s^2))`, and the
//! periodic weak interaction
//!
//! ```text
//! w(xi) = sum_j [ h((j + 1/2 + xi) / sigma) - h((j + 1/2) / sigma) ]
//! ```
//!
//! together with the transition cost `p(z) = 2 * int_0^z sqrt(w)`.
//!
//! The infinite sum is truncated to the index set `-J-1 ..= J`, which pairs
//! every term `j` with its mirror `-j-1`, and is evaluated at the reduced
//! argument `xi - round(xi)`. The approximant is therefore exactly periodic,
//! exactly even about integers and half integers, and vanishes exactly on the
//! integers; truncation only perturbs its shape, by at most the size of the
//! omitted tail terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Parameters of the Lennard-Jones 12-6 pair potential and of the substrate
/// geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairPotentialSpec {
    pub well_depth: f64,
    pub r_min: f64,
    /// Vertical distance between the chain and the line of fixed atoms.
    pub standoff: f64,
    /// Horizontal length scale of `h`, in units of the substrate spacing.
    pub sigma: f64,
    /// Number of fixed-atom terms kept on each side of the lattice sum.
    pub truncation_radius: u32,
    /// Absolute tolerance for integrals of `sqrt(w)`.
    pub quadrature_tol: f64,
}

impl Default for PairPotentialSpec {
    /// The frozen repository default. It passes [`WeakPotential::validate`]
    /// with `w''(0) ~ 2.09` and `p(1) ~ 2.066`.
    fn default() -> Self {
        Self {
            well_depth: 0.125,
            r_min: 1.2,
            standoff: 0.85,
            sigma: 0.5,
            truncation_radius: 16,
            quadrature_tol: 1e-9,
        }
    }
}

impl PairPotentialSpec {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("well_depth", self.well_depth),
            ("r_min", self.r_min),
            ("standoff", self.standoff),
            ("sigma", self.sigma),
            ("quadrature_tol", self.quadrature_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.truncation_radius < 8 {
            return Err(Error::InvalidParameter(format!(
                "truncation_radius must be at least 8, got {}",
                self.truncation_radius
            )));
        }
        let outermost = self.h((self.truncation_radius as f64 + 0.5) / self.sigma).abs();
        if outermost > self.quadrature_tol {
            return Err(Error::InvalidParameter(format!(
                "truncation_radius {} leaves a tail term of {outermost:e} above quadrature_tol {:e}",
                self.truncation_radius, self.quadrature_tol
            )));
        }
        Ok(())
    }

    /// `V(r) = well_depth * ((r_min/r)^12 - 2 (r_min/r)^6)`.
    pub fn pair_potential(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("pair distance must be positive, got {r}")));
        }
        Ok(self.v_of_sq(r * r).0)
    }

    /// `h(d) = V(sqrt(d^2 + standoff^2))`.
    pub fn h(&self, d: f64) -> f64 {
        self.v_of_sq(d * d + self.standoff * self.standoff).0
    }

    /// `h` and its first two derivatives.
    pub fn h_with_derivatives(&self, d: f64) -> [f64; 3] {
        let (v, vq, vqq) = self.v_of_sq(d * d + self.standoff * self.standoff);
        [v, 2.0 * d * vq, 4.0 * d * d * vqq + 2.0 * vq]
    }

    /// `V` and its first two derivatives with respect to `q = r^2`.
    #[inline]
    fn v_of_sq(&self, q: f64) -> (f64, f64, f64) {
        let u = self.r_min * self.r_min / q;
        let u3 = u * u * u;
        let u6 = u3 * u3;
        let a = self.well_depth;
        (
            a * (u6 - 2.0 * u3),
            a * 6.0 * (u3 - u6) / q,
            a * (42.0 * u6 - 24.0 * u3) / (q * q),
        )
    }
}

/// Free function form of [`PairPotentialSpec::pair_potential`].
pub fn eval_pair_potential(r: f64, spec: &PairPotentialSpec) -> Result<f64> {
    spec.pair_potential(r)
}

/// Free function form of [`PairPotentialSpec::h`].
pub fn eval_h(d: f64, spec: &PairPotentialSpec) -> f64 {
    spec.h(d)
}

/// The periodic weak interaction `w` with cached surface energy and well
/// curvature. Immutable after construction.
#[derive(Debug, Clone)]
pub struct WeakPotential {
    spec: PairPotentialSpec,
    /// Arguments `(j + 1/2) / sigma` for `j` in `-J-1 ..= J`.
    offsets: Vec<f64>,
    /// `h` at the offsets.
    reference: Vec<f64>,
    p_bar: f64,
    curvature_at_well: f64,
}

impl WeakPotential {
    pub fn new(spec: PairPotentialSpec) -> Result<Self> {
        spec.check()?;
        let j_max = spec.truncation_radius as i64;
        let offsets: Vec<f64> = (-j_max - 1..=j_max)
            .map(|j| (j as f64 + 0.5) / spec.sigma)
            .collect();
        let reference = offsets.iter().map(|&d| spec.h(d)).collect();
        let mut pot = Self {
            spec,
            offsets,
            reference,
            p_bar: 0.0,
            curvature_at_well: 0.0,
        };
        pot.curvature_at_well = pot.d2w(0.0);
        pot.p_bar = pot.cost_on_unit(1.0)?;
        Ok(pot)
    }

    pub fn spec(&self) -> &PairPotentialSpec {
        &self.spec
    }

    /// Surface energy of one unit wall, `p(1)`.
    pub fn p_bar(&self) -> f64 {
        self.p_bar
    }

    /// `w''(0)`.
    pub fn curvature_at_well(&self) -> f64 {
        self.curvature_at_well
    }

    pub fn quadrature_tol(&self) -> f64 {
        self.spec.quadrature_tol
    }

    /// Evaluates `w` (`order = 0`) or one of its first two derivatives.
    pub fn eval_w(&self, xi: f64, order: u8) -> Result<f64> {
        match order {
            0 => Ok(self.w(xi)),
            1 => Ok(self.dw(xi)),
            2 => Ok(self.d2w(xi)),
            _ => Err(Error::InvalidParameter(format!(
                "derivative order must be 0, 1 or 2, got {order}"
            ))),
        }
    }

    #[inline]
    fn reduce(xi: f64) -> f64 {
        xi - xi.round()
    }

    pub fn w(&self, xi: f64) -> f64 {
        let shift = Self::reduce(xi) / self.spec.sigma;
        self.offsets
            .iter()
            .zip(&self.reference)
            .map(|(&d, &h0)| self.spec.h(d + shift) - h0)
            .sum()
    }

    pub fn dw(&self, xi: f64) -> f64 {
        self.w_and_dw(xi).1
    }

    /// `w` and `w'` in one pass over the lattice sum.
    pub fn w_and_dw(&self, xi: f64) -> (f64, f64) {
        let shift = Self::reduce(xi) / self.spec.sigma;
        let s2 = self.spec.standoff * self.spec.standoff;
        let mut w = 0.0;
        let mut dw = 0.0;
        for (&d0, &h0) in self.offsets.iter().zip(&self.reference) {
            let d = d0 + shift;
            let (v, vq, _) = self.spec.v_of_sq(d * d + s2);
            w += v - h0;
            dw += 2.0 * d * vq;
        }
        (w, dw / self.spec.sigma)
    }

    pub fn d2w(&self, xi: f64) -> f64 {
        let shift = Self::reduce(xi) / self.spec.sigma;
        let sum: f64 = self
            .offsets
            .iter()
            .map(|&d| self.spec.h_with_derivatives(d + shift)[2])
            .sum();
        sum / (self.spec.sigma * self.spec.sigma)
    }

    /// `sqrt(w)`, with truncation noise below zero clipped.
    #[inline]
    pub fn sqrt_w(&self, xi: f64) -> f64 {
        self.w(xi).max(0.0).sqrt()
    }

    /// `2 * int_0^z sqrt(w(t)) dt` for `z` in `[0, 1]`.
    fn cost_on_unit(&self, z: f64) -> Result<f64> {
        Ok(2.0 * adaptive_simpson(|t| self.sqrt_w(t), 0.0, z, 0.5 * self.spec.quadrature_tol)?)
    }

    /// Transition cost `p(z) = 2 * int_0^z sqrt(w(t)) dt`.
    ///
    /// The integral is split at the integers, where `sqrt(w)` has kinks, and
    /// every unit piece is integrated on its own; periodicity of `w` is not
    /// used, so `p(z + 1) - p(z) = p(1)` is a genuine check.
    pub fn transition_cost(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::Domain(format!("transition cost at non-finite {z}")));
        }
        let (lo, hi, sign) = if z >= 0.0 { (0.0, z, 1.0) } else { (z, 0.0, -1.0) };
        let mut knots = vec![lo];
        let mut k = lo.floor() + 1.0;
        while k < hi {
            knots.push(k);
            k += 1.0;
        }
        knots.push(hi);
        let pieces = (knots.len() - 1) as f64;
        let mut total = 0.0;
        for pair in knots.windows(2) {
            total += adaptive_simpson(
                |t| self.sqrt_w(t),
                pair[0],
                pair[1],
                0.5 * self.spec.quadrature_tol / pieces,
            )?;
        }
        Ok(sign * 2.0 * total)
    }

    /// Samples `w` and checks the structural assumptions (positivity off the
    /// integers, positive well curvature, periodicity, symmetry about 1/2).
    pub fn validate(&self) -> ValidationReport {
        let tol = 10.0 * self.spec.quadrature_tol;
        let n = 10_000;
        let mut min_off = f64::INFINITY;
        let mut period = 0.0f64;
        let mut symmetry = 0.0f64;
        for k in 0..=n {
            let xi = -0.5 + 2.0 * k as f64 / n as f64;
            let w = self.w(xi);
            if (xi - xi.round()).abs() >= 1e-3 {
                min_off = min_off.min(w);
            }
            period = period.max((self.w(xi + 1.0) - w).abs());
            symmetry = symmetry.max((self.w(1.0 - xi) - w).abs());
        }
        let at_integers = [-1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|&m| self.w(m).abs())
            .fold(0.0, f64::max);

        let mut diagnostics = Vec::new();
        // w ~ w''(0) t^2 / 2 must be resolvable above the noise floor at the
        // sampling distance 1e-3.
        if self.curvature_at_well * 0.5e-6 <= tol {
            diagnostics.push(format!(
                "degenerate well: w''(0) = {:e} is not resolvable above the noise floor",
                self.curvature_at_well
            ));
        }
        if !(min_off > tol) {
            diagnostics.push(format!(
                "w is not positive off the integers: min = {min_off:e}"
            ));
        }
        if at_integers > tol {
            diagnostics.push(format!("w does not vanish on the integers: {at_integers:e}"));
        }
        if period > tol {
            diagnostics.push(format!("periodicity defect {period:e}"));
        }
        if symmetry > tol {
            diagnostics.push(format!("symmetry defect {symmetry:e}"));
        }
        ValidationReport {
            min_w_off_integers: min_off,
            curvature_at_well: self.curvature_at_well,
            max_abs_w_at_integers: at_integers,
            max_periodicity_defect: period,
            max_symmetry_defect: symmetry,
            passed: diagnostics.is_empty(),
            diagnostics,
        }
    }
}

/// Free function form of [`WeakPotential::validate`].
pub fn validate_potential(pot: &WeakPotential) -> ValidationReport {
    pot.validate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub min_w_off_integers: f64,
    pub curvature_at_well: f64,
    pub max_abs_w_at_integers: f64,
    pub max_periodicity_defect: f64,
    pub max_symmetry_defect: f64,
    pub passed: bool,
    pub diagnostics: Vec<String>,
}
