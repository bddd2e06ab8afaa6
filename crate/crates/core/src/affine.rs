//! Exact self-similar expanding solutions (affine motion).
//!
//! Inside a ball that expands with scale factor `a(t)`, the velocity field
//! `u = (a'/a) r` together with the rescaled profile
//!
//! ```text
//!   rho(r, t) = rho_0A(r / a(t)) / a(t)^(m+1),
//!   rho_0A(y) = (rho_c^(gamma-1) - (gamma-1)/(2 gamma K) y^2)^(1/(gamma-1)),
//! ```
//!
//! solves the radial Euler system exactly provided the scale factor obeys
//!
//! ```text
//!   a'' = a^(-(m+1)(gamma-1) - 1),     a(0) = 1,  a'(0) = v_a,
//! ```
//!
//! which conserves `a'^2 - (2/k)(1 - a^-k) - v_a^2` with `k = (m+1)(gamma-1)`.
//! The motion provides exact boundary data for free-boundary runs, a
//! convergence reference for the solver, and the seed state for the
//! admissibility theory of composite (affine inside, supersonic outside)
//! initial data.

use std::fmt;
use std::io::Write;

use crate::characters::{characters_from_gradients, CharacterError};
use crate::gas::GasParams;
use crate::ode::{integrate_adaptive, AdaptiveOptions, DenseOutput, OdeError};

/// Relative first-integral drift allowed over the integrated span before the
/// trajectory is rejected as under-resolved.
pub const FIRST_INTEGRAL_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum AffineError {
    #[error("center density must be positive and finite: got {0}")]
    CenterDensity(f64),
    #[error("expansion speed must be nonnegative and finite: got {0}")]
    ExpansionSpeed(f64),
    #[error("patch radius {b} must lie inside the profile support [0, {y_vac})")]
    PatchRadius { b: f64, y_vac: f64 },
    #[error("profile argument {y} outside [0, {y_vac}]")]
    OutsideProfile { y: f64, y_vac: f64 },
    #[error("point (r, t) = ({r}, {t}) outside the affine patch (y = {y} > b = {b})")]
    OutsidePatch { r: f64, t: f64, y: f64, b: f64 },
    #[error("time {t} outside the integrated span [0, {horizon}]")]
    OutsideSpan { t: f64, horizon: f64 },
    #[error("scale-factor integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("first-integral drift {drift} exceeds {FIRST_INTEGRAL_TOL} over [0, {horizon}]")]
    Drift { drift: f64, horizon: f64 },
    #[error("characters undefined on the interface: {0}")]
    Character(#[from] CharacterError),
}

/// Integrate the scale-factor equation `a'' = a^(-(m+1)(gamma-1)-1)` from
/// `a(0) = 1`, `a'(0) = v_a` up to `horizon`, enforcing the first-integral
/// drift bound at every accepted step.
pub fn integrate_motion(
    params: &GasParams,
    v_a: f64,
    horizon: f64,
) -> Result<DenseOutput<2>, AffineError> {
    if !(v_a.is_finite() && v_a >= 0.0) {
        return Err(AffineError::ExpansionSpeed(v_a));
    }
    let k = (params.m() + 1.0) * (params.gamma() - 1.0);
    let opts = AdaptiveOptions { rtol: 1e-13, atol: 1e-13, h_max: 0.25, max_steps: 10_000_000 };
    let sol = integrate_adaptive(
        |_t, y: &[f64; 2]| [y[1], y[0].powf(-k - 1.0)],
        0.0,
        [1.0, v_a],
        horizon,
        &opts,
    )?;
    let drift = sol
        .knots()
        .iter()
        .map(|kn| first_integral(k, v_a, kn.y[0], kn.y[1]).abs())
        .fold(0.0f64, f64::max)
        / v_a.mul_add(v_a, 1.0);
    if drift > FIRST_INTEGRAL_TOL {
        return Err(AffineError::Drift { drift, horizon });
    }
    Ok(sol)
}

/// `a'^2 - (2/k)(1 - a^-k) - v_a^2`; identically zero along exact motion.
fn first_integral(k: f64, v_a: f64, a: f64, a_prime: f64) -> f64 {
    a_prime * a_prime - 2.0 / k * (1.0 - a.powf(-k)) - v_a * v_a
}

/// An integrated affine motion: gas constants, center density, expansion
/// speed, patch radius, and the dense scale-factor trajectory.
#[derive(Clone)]
pub struct AffineMotion {
    params: GasParams,
    rho_c: f64,
    v_a: f64,
    b: f64,
    horizon: f64,
    trajectory: DenseOutput<2>,
}

impl fmt::Debug for AffineMotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineMotion")
            .field("rho_c", &self.rho_c)
            .field("v_a", &self.v_a)
            .field("b", &self.b)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl AffineMotion {
    pub fn new(
        params: GasParams,
        rho_c: f64,
        v_a: f64,
        b: f64,
        horizon: f64,
    ) -> Result<Self, AffineError> {
        if !(rho_c.is_finite() && rho_c > 0.0) {
            return Err(AffineError::CenterDensity(rho_c));
        }
        let y_vac = vacuum_radius(&params, rho_c);
        if !(b > 0.0 && b < y_vac) {
            return Err(AffineError::PatchRadius { b, y_vac });
        }
        let trajectory = integrate_motion(&params, v_a, horizon)?;
        Ok(Self { params, rho_c, v_a, b, horizon, trajectory })
    }

    #[inline]
    pub fn params(&self) -> &GasParams {
        &self.params
    }

    #[inline]
    pub fn rho_c(&self) -> f64 {
        self.rho_c
    }

    #[inline]
    pub fn v_a(&self) -> f64 {
        self.v_a
    }

    /// Patch radius in profile coordinates (and the interface radius at t = 0).
    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Radius where the initial profile reaches vacuum.
    pub fn vacuum_radius(&self) -> f64 {
        vacuum_radius(&self.params, self.rho_c)
    }

    /// `(a, a')` at time `t`.
    pub fn scale_factor(&self, t: f64) -> Result<(f64, f64), AffineError> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(AffineError::OutsideSpan { t, horizon: self.horizon });
        }
        let y = self.trajectory.eval(t);
        Ok((y[0], y[1]))
    }

    /// First-integral residual of the dense trajectory at `t`.
    pub fn first_integral_residual(&self, t: f64) -> Result<f64, AffineError> {
        let (a, ap) = self.scale_factor(t)?;
        let k = (self.params.m() + 1.0) * (self.params.gamma() - 1.0);
        Ok(first_integral(k, self.v_a, a, ap))
    }

    /// Initial density profile `rho_0A(y)` for `0 <= y <= y_vac`.
    pub fn initial_profile(&self, y: f64) -> Result<f64, AffineError> {
        let y_vac = self.vacuum_radius();
        if !(0.0..=y_vac).contains(&y) {
            return Err(AffineError::OutsideProfile { y, y_vac });
        }
        let gamma = self.params.gamma();
        Ok(self.profile_pow(y).powf(1.0 / (gamma - 1.0)))
    }

    /// `rho_c^(gamma-1) - (gamma-1)/(2 gamma K) y^2`, i.e. `rho_0A^(gamma-1)`.
    fn profile_pow(&self, y: f64) -> f64 {
        let gamma = self.params.gamma();
        let cc = (gamma - 1.0) / (2.0 * gamma * self.params.entropy_k());
        (self.rho_c.powf(gamma - 1.0) - cc * y * y).max(0.0)
    }

    /// `(rho, u)` of the exact solution at `(r, t)`; defined on the patch
    /// `0 <= r <= b a(t)`.
    pub fn state(&self, r: f64, t: f64) -> Result<(f64, f64), AffineError> {
        let (a, ap) = self.scale_factor(t)?;
        let y = r / a;
        if y > self.b * (1.0 + 1e-12) || r < 0.0 {
            return Err(AffineError::OutsidePatch { r, t, y, b: self.b });
        }
        let gamma = self.params.gamma();
        let rho = self.profile_pow(y).powf(1.0 / (gamma - 1.0)) / a.powf(self.params.m() + 1.0);
        Ok((rho, ap / a * r))
    }

    /// Sound speed and its exact radial gradient at `(r, t)`, plus the
    /// velocity gradient `u_r = a'/a`. Closed form:
    /// `h = sqrt(K gamma) a^(-k/2) S(y)` with `S = sqrt(rho_0A^(gamma-1))`.
    pub fn sound_speed_gradient(&self, r: f64, t: f64) -> Result<(f64, f64, f64), AffineError> {
        let (a, ap) = self.scale_factor(t)?;
        let y = r / a;
        if y > self.b * (1.0 + 1e-12) || r < 0.0 {
            return Err(AffineError::OutsidePatch { r, t, y, b: self.b });
        }
        let gamma = self.params.gamma();
        let kk = self.params.entropy_k() * gamma;
        let k_exp = (self.params.m() + 1.0) * (gamma - 1.0);
        let s = self.profile_pow(y).sqrt();
        let cc = (gamma - 1.0) / (2.0 * gamma * self.params.entropy_k());
        let h = kk.sqrt() * a.powf(-0.5 * k_exp) * s;
        let h_r = -kk.sqrt() * a.powf(-0.5 * k_exp - 1.0) * cc * y / s;
        Ok((h, h_r, ap / a))
    }

    /// Characters `(alpha, beta)` of the exact field at `(r, t)`.
    pub fn characters(&self, r: f64, t: f64) -> Result<(f64, f64), AffineError> {
        let (_, u) = self.state(r, t)?;
        let (h, h_r, u_r) = self.sound_speed_gradient(r, t)?;
        Ok(characters_from_gradients(&self.params, r, h, u, h_r, u_r)?)
    }

    /// Trace the slow characteristic `dr/dt = c1(r, t)` of the exact field
    /// from `(from_r, 0)` up to `t_end`. With `from_r = b` this is the
    /// moving interface `B_b(t)` separating the affine patch from the outer
    /// region.
    pub fn trace_interface(&self, from_r: f64, t_end: f64) -> Result<DenseOutput<1>, AffineError> {
        if t_end > self.horizon * (1.0 + 1e-12) {
            return Err(AffineError::OutsideSpan { t: t_end, horizon: self.horizon });
        }
        let opts = AdaptiveOptions { rtol: 1e-12, atol: 1e-12, h_max: 0.05, max_steps: 10_000_000 };
        let sol = integrate_adaptive(
            |t, y: &[f64; 1]| {
                // closed-form c1 of the affine field; poisoning the step on a
                // patch exit surfaces as a NonFinite integration error
                let r = y[0];
                match (self.state(r, t), self.sound_speed_gradient(r, t)) {
                    (Ok((_, u)), Ok((h, _, _))) => [u - h],
                    _ => [f64::NAN],
                }
            },
            0.0,
            [from_r],
            t_end,
            &opts,
        )?;
        Ok(sol)
    }

    /// Export the trajectory as CSV rows `t,a,a_prime,first_integral_residual`
    /// sampled every `dt` (the horizon is always included).
    pub fn write_trajectory(&self, out: &mut dyn Write, dt: f64) -> std::io::Result<()> {
        assert!(dt > 0.0, "sample spacing must be positive");
        writeln!(out, "t,a,a_prime,first_integral_residual")?;
        let mut t = 0.0f64;
        loop {
            let clamped = t.min(self.horizon);
            let (a, ap) = self.scale_factor(clamped).expect("within span");
            let res = self.first_integral_residual(clamped).expect("within span");
            writeln!(out, "{clamped},{a},{ap},{res}")?;
            if clamped >= self.horizon {
                return Ok(());
            }
            t += dt;
        }
    }
}

/// `y_vac = sqrt(2 gamma K/(gamma-1)) rho_c^((gamma-1)/2)`: support radius of
/// the initial profile.
pub fn vacuum_radius(params: &GasParams, rho_c: f64) -> f64 {
    let gamma = params.gamma();
    (2.0 * gamma * params.entropy_k() / (gamma - 1.0)).sqrt() * rho_c.powf(params.kappa())
}

/// Admissibility of composite data built on an affine patch: the patch must
/// sit strictly inside the profile support, and the expansion speed must
/// clear three thresholds,
///
/// ```text
///   v_a >= (m+1) sqrt(K gamma) S_b / b          (interface moves supersonically)
///   v_a >= 2 sqrt(K gamma) S_b / ((gamma-1) b)  (z >= 0 at the patch edge)
///   v_a >= b / (sqrt(K gamma) S_b)              (expansion dominates pressure pull)
/// ```
///
/// with `S_b = sqrt(rho_c^(gamma-1) - (gamma-1)/(2 gamma K) b^2)`. As the
/// patch edge approaches vacuum the third threshold diverges; the report
/// flags that near-degeneracy separately.
#[derive(Clone, Copy, Debug)]
pub struct AdmissibilityReport {
    pub y_vac: f64,
    /// `S_b^2`, the profile margin at the patch edge; must be positive.
    pub density_margin: f64,
    pub density_margin_ok: bool,
    pub required_v_a: [f64; 3],
    pub v_a: f64,
    pub condition_ok: [bool; 3],
    /// Set when the patch edge is within 0.1% (in `S_b^2`) of vacuum.
    pub near_degeneracy: bool,
}

impl AdmissibilityReport {
    pub fn overall(&self) -> bool {
        self.density_margin_ok && self.condition_ok.iter().all(|&c| c)
    }

    /// Indices (0-based) of the failed speed thresholds.
    pub fn failed_conditions(&self) -> Vec<usize> {
        self.condition_ok.iter().enumerate().filter(|(_, &ok)| !ok).map(|(i, _)| i).collect()
    }
}

pub fn check_admissibility(
    params: &GasParams,
    rho_c: f64,
    v_a: f64,
    b: f64,
) -> AdmissibilityReport {
    let gamma = params.gamma();
    let kk = (params.entropy_k() * gamma).sqrt();
    let cc = (gamma - 1.0) / (2.0 * gamma * params.entropy_k());
    let margin = rho_c.powf(gamma - 1.0) - cc * b * b;
    let y_vac = vacuum_radius(params, rho_c);
    let s_b = margin.max(0.0).sqrt();
    let required = if margin > 0.0 {
        [
            (params.m() + 1.0) * kk * s_b / b,
            2.0 * kk * s_b / ((gamma - 1.0) * b),
            b / (kk * s_b),
        ]
    } else {
        [f64::INFINITY; 3]
    };
    AdmissibilityReport {
        y_vac,
        density_margin: margin,
        density_margin_ok: margin > 0.0,
        required_v_a: required,
        v_a,
        condition_ok: [v_a >= required[0], v_a >= required[1], v_a >= required[2]],
        near_degeneracy: margin <= 1e-3 * rho_c.powf(gamma - 1.0),
    }
}

/// What admissible composite data guarantees on the interface, verified
/// numerically on the exact field along the traced `B_b(t)`.
#[derive(Clone, Copy, Debug)]
pub struct InterfaceConclusions {
    pub min_alpha: f64,
    pub beta_at_start: f64,
    pub min_z: f64,
    pub min_c1: f64,
}

/// Sample the traced interface and report the extrema backing the claims
/// `alpha > 0`, `beta(b, 0) >= 0`, `z >= 0`, `c1 > 0` on the boundary.
pub fn interface_conclusions(
    motion: &AffineMotion,
    t_end: f64,
    samples: usize,
) -> Result<InterfaceConclusions, AffineError> {
    assert!(samples >= 2);
    let trace = motion.trace_interface(motion.b(), t_end)?;
    let params = *motion.params();
    let mut min_alpha = f64::INFINITY;
    let mut min_z = f64::INFINITY;
    let mut min_c1 = f64::INFINITY;
    let mut beta_at_start = f64::NAN;
    for i in 0..samples {
        let t = t_end * i as f64 / (samples - 1) as f64;
        let r = trace.eval(t)[0];
        let (alpha, beta) = motion.characters(r, t)?;
        let (_, u) = motion.state(r, t)?;
        let (h, _, _) = motion.sound_speed_gradient(r, t)?;
        let (_, z) = params.riemann_variables(h, u);
        let (c1, _) = params.wave_speeds(h, u);
        min_alpha = min_alpha.min(alpha);
        min_z = min_z.min(z);
        min_c1 = min_c1.min(c1);
        if i == 0 {
            beta_at_start = beta;
        }
    }
    Ok(InterfaceConclusions { min_alpha, beta_at_start, min_z, min_c1 })
}

/// Outer initial data `(rho_0, u_0)(r)` for `r >= b`, as closures.
pub struct OuterData<'a> {
    pub rho: &'a dyn Fn(f64) -> f64,
    pub u: &'a dyn Fn(f64) -> f64,
}

/// Compatibility of outer data with the affine patch at the corner `(b, 0)`:
///
/// 1. value match of `(rho, u)` at `r = b`;
/// 2. match of the one-sided slope of `z = u - 2h/(gamma-1)` against the
///    affine-side slope `v_a + b/(sqrt(K gamma) S_b)`, i.e. the data joins
///    C^1 in the incoming Riemann variable;
/// 3. the interface data solves the characteristic boundary equation
///    `d/dt z(B(t), t) = m u h / B` along the traced interface, checked as a
///    finite-difference residual that shrinks at second order in the
///    sampling step.
#[derive(Clone, Copy, Debug)]
pub struct CompatibilityReport {
    pub value_mismatch_rho: f64,
    pub value_mismatch_u: f64,
    pub z_slope_outer: f64,
    pub z_slope_affine: f64,
    pub boundary_ode_residual: f64,
    /// Sampling step used for the residual (its accuracy scale is `dt^2`).
    pub ode_dt: f64,
    pub algebraic_tol: f64,
    pub ode_tol: f64,
}

impl CompatibilityReport {
    pub fn pass(&self) -> [bool; 3] {
        [
            self.value_mismatch_rho <= self.algebraic_tol && self.value_mismatch_u <= self.algebraic_tol,
            (self.z_slope_outer - self.z_slope_affine).abs() <= self.algebraic_tol,
            self.boundary_ode_residual <= self.ode_tol,
        ]
    }

    pub fn overall(&self) -> bool {
        self.pass().iter().all(|&p| p)
    }
}

pub fn check_compatibility(
    motion: &AffineMotion,
    outer: &OuterData<'_>,
    t_check: f64,
) -> Result<CompatibilityReport, AffineError> {
    let params = motion.params();
    let b = motion.b();
    let gamma = params.gamma();
    let (rho_b, u_b) = motion.state(b, 0.0)?;

    // relative scales so the tolerances mean the same thing for any units
    let rho_scale = rho_b.abs().max(1e-300);
    let u_scale = u_b.abs().max(motion.v_a()).max(1e-300);
    let value_mismatch_rho = ((outer.rho)(b) - rho_b).abs() / rho_scale;
    let value_mismatch_u = ((outer.u)(b) - u_b).abs() / u_scale;

    // one-sided second-order slope of z from the outer side
    let z_of = |r: f64| -> f64 {
        let h = params.sound_speed((outer.rho)(r)).unwrap_or(f64::NAN);
        params.riemann_variables(h, (outer.u)(r)).1
    };
    let delta = 1e-6 * b;
    let z_slope_outer = (-3.0 * z_of(b) + 4.0 * z_of(b + delta) - z_of(b + 2.0 * delta)) / (2.0 * delta);
    let kk = (params.entropy_k() * gamma).sqrt();
    let cc = (gamma - 1.0) / (2.0 * gamma * params.entropy_k());
    let s_b = (motion.rho_c().powf(gamma - 1.0) - cc * b * b).max(0.0).sqrt();
    let z_slope_affine = motion.v_a() + b / (kk * s_b);

    // boundary characteristic equation along the traced interface
    let t_check = t_check.min(motion.horizon());
    let trace = motion.trace_interface(b, t_check)?;
    // the third time derivative of z along the interface reaches O(100) on
    // the reference cases, so the step must be small enough that the dt^2
    // truncation sits clearly under ode_tol
    let n = 512usize;
    let dt = t_check / n as f64;
    let z_at = |t: f64| -> Result<(f64, f64, f64, f64), AffineError> {
        let r = trace.eval(t)[0];
        let (_, u) = motion.state(r, t)?;
        let (h, _, _) = motion.sound_speed_gradient(r, t)?;
        Ok((params.riemann_variables(h, u).1, u, h, r))
    };
    let mut samples = Vec::with_capacity(n + 1);
    for i in 0..=n {
        samples.push(z_at(i as f64 * dt)?);
    }
    let mut worst = 0.0f64;
    for i in 1..n {
        let (_, u, h, r) = samples[i];
        let residual = (samples[i + 1].0 - samples[i - 1].0) / (2.0 * dt) - params.m() * u * h / r;
        worst = worst.max(residual.abs() / u_scale.max(1.0));
    }

    Ok(CompatibilityReport {
        value_mismatch_rho,
        value_mismatch_u,
        z_slope_outer,
        z_slope_affine,
        boundary_ode_residual: worst,
        ode_dt: dt,
        algebraic_tol: 1e-8,
        ode_tol: 1e-4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::Symmetry;
    use approx::assert_relative_eq;

    /// The worked reference case: gamma = 2, K = 1, m = 1, rho_c = 1, b = 1.
    fn reference(v_a: f64) -> AffineMotion {
        let p = GasParams::new(2.0, 1.0, Symmetry::Cylindrical).unwrap();
        AffineMotion::new(p, 1.0, v_a, 1.0, 4.0).unwrap()
    }

    #[test]
    fn profile_matches_hand_arithmetic() {
        // rho_0A(y) = 1 - y^2/4: support radius 2, value 3/4 at y = 1.
        let m = reference(3.0);
        assert_relative_eq!(m.vacuum_radius(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(m.initial_profile(0.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(m.initial_profile(1.0).unwrap(), 0.75, max_relative = 1e-14);
        assert!(m.initial_profile(2.0).unwrap().abs() < 1e-14);
        assert!(m.initial_profile(2.5).is_err());
    }

    #[test]
    fn center_state_scales_with_inverse_volume() {
        let m = reference(3.0);
        for t in [0.0, 0.7, 2.0, 4.0] {
            let (a, _) = m.scale_factor(t).unwrap();
            let (rho, u) = m.state(0.0, t).unwrap();
            assert_relative_eq!(rho, 1.0 / a.powi(2), max_relative = 1e-10);
            assert_eq!(u, 0.0);
        }
    }

    #[test]
    fn scale_factor_obeys_monotonicity_bounds() {
        // v_a < a' <= sqrt(2/k + v_a^2) and a > 1 for t > 0; here k = 2.
        let m = reference(3.0);
        let cap = (1.0f64 + 9.0).sqrt();
        for i in 1..=80 {
            let t = 4.0 * i as f64 / 80.0;
            let (a, ap) = m.scale_factor(t).unwrap();
            assert!(a > 1.0, "a({t}) = {a}");
            assert!(ap > 3.0 && ap <= cap + 1e-12, "a'({t}) = {ap}");
        }
    }

    #[test]
    fn first_integral_stays_pinned() {
        for (gamma, m_idx, v_a) in [(1.2, 1, 0.5), (2.0, 2, 3.0), (2.5, 1, 1.0)] {
            let p = GasParams::new(gamma, 1.0, Symmetry::from_index(m_idx).unwrap()).unwrap();
            let motion = AffineMotion::new(p, 1.0, v_a, 0.5 * vacuum_radius(&p, 1.0), 50.0).unwrap();
            for i in 0..200 {
                let t = 50.0 * (i as f64 + 0.5) / 200.0;
                let res = motion.first_integral_residual(t).unwrap().abs();
                assert!(res <= 1e-10 * (1.0 + v_a * v_a), "drift {res} at t = {t}");
            }
        }
    }

    #[test]
    fn exact_state_solves_the_euler_system() {
        // Finite-difference residual of (r^m rho)_t + (r^m rho u)_r and the
        // momentum equation on the exact field, centered stencils.
        let m = reference(3.0);
        let p = *m.params();
        let (dr, dt) = (1e-4, 1e-4);
        let mut worst = (0.0f64, 0.0f64);
        for &(r, t) in &[(0.3, 0.2), (0.6, 1.0), (0.8, 2.5), (0.5, 3.5)] {
            let f = |rr: f64, tt: f64| m.state(rr, tt).unwrap();
            let mass = |rr: f64, tt: f64| rr * f(rr, tt).0;
            let mass_flux = |rr: f64, tt: f64| {
                let (rho, u) = f(rr, tt);
                rr * rho * u
            };
            let mom = |rr: f64, tt: f64| {
                let (rho, u) = f(rr, tt);
                rr * rho * u * u
            };
            let pressure = |rr: f64, tt: f64| p.pressure(f(rr, tt).0);
            let ddt = |g: &dyn Fn(f64, f64) -> f64| (g(r, t + dt) - g(r, t - dt)) / (2.0 * dt);
            let ddr = |g: &dyn Fn(f64, f64) -> f64| (g(r + dr, t) - g(r - dr, t)) / (2.0 * dr);
            let res_mass = ddt(&mass) + ddr(&mass_flux);
            let res_mom = ddt(&mass_flux) + ddr(&mom) + r * ddr(&pressure);
            worst.0 = worst.0.max(res_mass.abs());
            worst.1 = worst.1.max(res_mom.abs());
        }
        // second-order stencils at step 1e-4 on O(1) fields
        assert!(worst.0 < 1e-6, "mass residual {}", worst.0);
        assert!(worst.1 < 1e-6, "momentum residual {}", worst.1);
    }

    #[test]
    fn admissibility_thresholds_match_hand_arithmetic() {
        let p = GasParams::new(2.0, 1.0, Symmetry::Cylindrical).unwrap();
        let report = check_admissibility(&p, 1.0, 3.0, 1.0);
        // S_b = sqrt(3)/2; thresholds 2 sqrt(2) S_b, 2 sqrt(2) S_b, 1/(sqrt(2) S_b)
        let s_b = 0.75f64.sqrt();
        assert_relative_eq!(report.required_v_a[0], 2.0 * 2f64.sqrt() * s_b, max_relative = 1e-14);
        assert_relative_eq!(report.required_v_a[1], 2.0 * 2f64.sqrt() * s_b, max_relative = 1e-14);
        assert_relative_eq!(report.required_v_a[2], 1.0 / (2f64.sqrt() * s_b), max_relative = 1e-14);
        assert!(report.overall());

        let slow = check_admissibility(&p, 1.0, 2.0, 1.0);
        assert!(!slow.overall());
        assert_eq!(slow.failed_conditions(), vec![0, 1]);
    }

    #[test]
    fn near_vacuum_patch_is_flagged_degenerate() {
        let p = GasParams::new(2.0, 1.0, Symmetry::Cylindrical).unwrap();
        let y_vac = vacuum_radius(&p, 1.0);
        let report = check_admissibility(&p, 1.0, 50.0, y_vac * (1.0 - 1e-5));
        assert!(report.near_degeneracy);
        assert!(report.required_v_a[2] > 10.0, "third threshold should diverge");
    }

    #[test]
    fn interface_conclusions_hold_for_admissible_data() {
        let m = reference(3.0);
        let c = interface_conclusions(&m, 2.0, 120).unwrap();
        assert!(c.min_alpha > 0.0, "alpha on interface: {}", c.min_alpha);
        assert!(c.beta_at_start >= 0.0, "beta at corner: {}", c.beta_at_start);
        assert!(c.min_z >= 0.0, "z on interface: {}", c.min_z);
        assert!(c.min_c1 > 0.0, "c1 on interface: {}", c.min_c1);
        // hand value: beta(1, 0) = 3 + 2/sqrt(6) ... computed directly below
        let (_, beta0) = m.characters(1.0, 0.0).unwrap();
        assert_relative_eq!(c.beta_at_start, beta0, max_relative = 1e-9);
    }

    #[test]
    fn compatibility_accepts_c1_extension_and_rejects_kink() {
        let m = reference(3.0);
        let p = *m.params();
        let b = 1.0;
        let (h_b, h_r_b, _) = m.sound_speed_gradient(b, 0.0).unwrap();
        let decay = -h_r_b / h_b;
        let rho_ext = move |r: f64| {
            let h = h_b * (-decay * (r - b)).exp();
            p.rho_from_sound_speed(h).unwrap()
        };
        let u_ext = move |r: f64| 3.0 * r;
        let report =
            check_compatibility(&m, &OuterData { rho: &rho_ext, u: &u_ext }, 1.0).unwrap();
        assert!(report.pass()[0], "value match: {report:?}");
        assert!(report.pass()[1], "slope match: {report:?}");
        assert!(report.pass()[2], "interface equation: {report:?}");
        assert_relative_eq!(report.z_slope_affine, 3.0 + 1.0 / (2f64.sqrt() * 0.75f64.sqrt()),
            max_relative = 1e-12);

        // a kink in u0' at the corner must trip the slope condition only
        let u_kink = move |r: f64| 3.0 * r + 0.05 * (r - b);
        let report =
            check_compatibility(&m, &OuterData { rho: &rho_ext, u: &u_kink }, 1.0).unwrap();
        assert!(report.pass()[0]);
        assert!(!report.pass()[1]);
        assert!((report.z_slope_outer - report.z_slope_affine - 0.05).abs() < 1e-6);
    }

    #[test]
    fn trajectory_csv_has_expected_shape() {
        let m = reference(3.0);
        let mut buf = Vec::new();
        m.write_trajectory(&mut buf, 0.5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,a,a_prime,first_integral_residual");
        assert_eq!(lines.len(), 1 + 9); // t = 0, 0.5, ..., 4.0
        assert!(lines[1].starts_with("0,1,3,"));
    }
}
