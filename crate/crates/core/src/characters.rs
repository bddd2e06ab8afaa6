//! Rarefaction/compression characters and their Riccati dynamics.
//!
//! For radial isentropic flow the gradient content of the solution is
//! carried by two scalar fields along the acoustic characteristics
//! `d1 = d_t + c1 d_r` and `d2 = d_t + c2 d_r`:
//!
//! ```text
//!   alpha = u_r + 2 h_r/(gamma-1) + (m/r) h u / c2
//!   beta  = u_r - 2 h_r/(gamma-1) - (m/r) h u / c1
//! ```
//!
//! Positive characters mean the flow is locally rarefying along that
//! family, negative ones mean compression. They obey coupled Riccati
//! equations
//!
//! ```text
//!   d1 beta  = -((1+gamma)/4) beta^2 - ((3-gamma)/4) alpha beta + A1 alpha - B1 beta
//!   d2 alpha = -((1+gamma)/4) alpha^2 - ((3-gamma)/4) alpha beta + A2 beta - B2 alpha
//! ```
//!
//! whose coefficients satisfy `A_i >= 0` and `B_i - A_i >= 0` on supersonic
//! expanding states; the closed forms of `B_i - A_i` are kept alongside the
//! raw coefficients because the difference is exactly what the invariant-
//! region arguments consume. Weighted characters `h^(-lambda) alpha` trade
//! the damping terms against the quadratic ones and are what the blow-up
//! bounds are phrased in.

use crate::gas::{FlowField, GasParams};
use crate::stencil::radial_derivative;

#[derive(Debug, thiserror::Error)]
pub enum CharacterError {
    #[error("characters are undefined at the origin (r = {0})")]
    UndefinedAtOrigin(f64),
    #[error("sonic state at r = {r}: wave speed {speed} too close to zero")]
    Sonic { r: f64, speed: f64 },
    #[error("non-finite input at r = {0}")]
    NonFinite(f64),
    #[error("state probe left the field domain at (r, t) = ({r}, {t})")]
    ProbeOutsideDomain { r: f64, t: f64 },
}

/// Relative threshold below which a wave speed counts as sonic and the
/// character fields are reported undefined rather than blown up.
const SONIC_GUARD: f64 = 1e-14;

fn guard_speeds(r: f64, u: f64, h: f64, c1: f64, c2: f64) -> Result<(), CharacterError> {
    if !(r.is_finite() && u.is_finite() && h.is_finite()) {
        return Err(CharacterError::NonFinite(r));
    }
    if r <= 0.0 {
        return Err(CharacterError::UndefinedAtOrigin(r));
    }
    let scale = u.abs().max(h).max(f64::MIN_POSITIVE);
    for c in [c1, c2] {
        if c.abs() < SONIC_GUARD * scale {
            return Err(CharacterError::Sonic { r, speed: c });
        }
    }
    Ok(())
}

/// Characters `(alpha, beta)` from pointwise radial gradients.
pub fn characters_from_gradients(
    params: &GasParams,
    r: f64,
    h: f64,
    u: f64,
    h_r: f64,
    u_r: f64,
) -> Result<(f64, f64), CharacterError> {
    let (c1, c2) = params.wave_speeds(h, u);
    guard_speeds(r, u, h, c1, c2)?;
    let geom = params.m() / r * h * u;
    let grad = h_r / params.kappa();
    Ok((u_r + grad + geom / c2, u_r - grad - geom / c1))
}

/// Characters recovered from directional derivatives of the momentum flux
/// `F = r^m rho u`:
///
/// ```text
///   alpha = -(d1 F) / (r^m rho c2),    beta = -(d2 F) / (r^m rho c1).
/// ```
///
/// The field closure returns `(rho, u)` at a spacetime point or `None`
/// outside its domain. Each directional derivative is a centered difference
/// along a straight chord of the characteristic through `(r, t)` with time
/// offset `delta`, so the result carries an `O(delta^2)` bias on curved
/// characteristics; it exists to cross-check the gradient route, not to
/// replace it.
pub fn characters_from_momentum_flux(
    params: &GasParams,
    r: f64,
    t: f64,
    delta: f64,
    field: &dyn Fn(f64, f64) -> Option<(f64, f64)>,
) -> Result<(f64, f64), CharacterError> {
    assert!(delta > 0.0, "probe step must be positive");
    let (rho, u) = field(r, t).ok_or(CharacterError::ProbeOutsideDomain { r, t })?;
    let h = params.sound_speed(rho).map_err(|_| CharacterError::NonFinite(r))?;
    let (c1, c2) = params.wave_speeds(h, u);
    guard_speeds(r, u, h, c1, c2)?;
    let m = params.m();
    let flux = |rr: f64, tt: f64| -> Result<f64, CharacterError> {
        let (rho, u) = field(rr, tt).ok_or(CharacterError::ProbeOutsideDomain { r: rr, t: tt })?;
        Ok(rr.powf(m) * rho * u)
    };
    let along = |speed: f64| -> Result<f64, CharacterError> {
        let fp = flux(r + speed * delta, t + delta)?;
        let fm = flux(r - speed * delta, t - delta)?;
        Ok((fp - fm) / (2.0 * delta))
    };
    let d1f = along(c1)?;
    let d2f = along(c2)?;
    let weight = r.powf(m) * rho;
    Ok((-d1f / (weight * c2), -d2f / (weight * c1)))
}

/// Coefficients of the two Riccati equations at one state, together with
/// the closed forms of `B1 - A1` and `B2 - A2`.
#[derive(Clone, Copy, Debug)]
pub struct RiccatiCoeffs {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    /// `B1 - A1 = (3-gamma) m u^2 h^2 / (r c1^2 c2)`, evaluated directly.
    pub d1: f64,
    /// `B2 - A2 = (3-gamma) m u^2 h^2 / (r c2^2 c1)`, evaluated directly.
    pub d2: f64,
}

pub fn riccati_coeffs(
    params: &GasParams,
    r: f64,
    h: f64,
    u: f64,
) -> Result<RiccatiCoeffs, CharacterError> {
    let (c1, c2) = params.wave_speeds(h, u);
    guard_speeds(r, u, h, c1, c2)?;
    let gamma = params.gamma();
    let kappa = params.kappa();
    let m = params.m();
    let gm4 = 0.25 * (gamma - 1.0);

    let pressure_excess = kappa * u * u - h * h;
    let a1 = m * c2 * pressure_excess / (2.0 * r * c1 * c1);
    let a2 = m * c1 * pressure_excess / (2.0 * r * c2 * c2);

    let b1 = m / (r * c1 * c1)
        * (gm4 * u * u * u - 0.5 * h * h * h - gm4 * u * u * h
            + 0.5 * u * h * h
            + (h * u * c1 / c2) * (h + kappa * u));
    let b2 = m / (r * c2 * c2)
        * (gm4 * u * u * u + 0.5 * h * h * h + gm4 * u * u * h
            + 0.5 * u * h * h
            + (h * u * c2 / c1) * (h - kappa * u));

    let core = (3.0 - gamma) * m * u * u * h * h / r;
    let d1 = core / (c1 * c1 * c2);
    let d2 = core / (c2 * c2 * c1);
    Ok(RiccatiCoeffs { a1, b1, a2, b2, d1, d2 })
}

/// Right-hand sides `(d1 beta, d2 alpha)` of the Riccati system.
pub fn riccati_rhs(params: &GasParams, coeffs: &RiccatiCoeffs, alpha: f64, beta: f64) -> (f64, f64) {
    let gamma = params.gamma();
    let quad = 0.25 * (1.0 + gamma);
    let cross = 0.25 * (3.0 - gamma) * alpha * beta;
    let d1_beta = -quad * beta * beta - cross + coeffs.a1 * alpha - coeffs.b1 * beta;
    let d2_alpha = -quad * alpha * alpha - cross + coeffs.a2 * beta - coeffs.b2 * alpha;
    (d1_beta, d2_alpha)
}

/// Derivatives of the sound speed along the two characteristics,
/// `(d1 h, d2 h)`:
///
/// ```text
///   d1 h = -((gamma-1)/2) (m u^2 h)/(r c2) - ((gamma-1)/2) h alpha
///   d2 h = -((gamma-1)/2) (m u^2 h)/(r c1) - ((gamma-1)/2) h beta
/// ```
pub fn dh_along_characteristics(
    params: &GasParams,
    r: f64,
    h: f64,
    u: f64,
    alpha: f64,
    beta: f64,
) -> (f64, f64) {
    let (c1, c2) = params.wave_speeds(h, u);
    let kappa = params.kappa();
    let m = params.m();
    let d1h = -kappa * m * u * u * h / (r * c2) - kappa * h * alpha;
    let d2h = -kappa * m * u * u * h / (r * c1) - kappa * h * beta;
    (d1h, d2h)
}

/// Right-hand sides for the weighted characters `h^(-lambda) beta` along
/// `d1` and `h^(-lambda) alpha` along `d2`, any `lambda >= 0`:
///
/// ```text
///   d1 (h^-l b) = -((1+gamma)/4) h^l (h^-l b)^2
///                 + ((gamma-3)/4 + (gamma-1) l/2) h^l (h^-l a)(h^-l b)
///                 + A1 (h^-l a) - B1 (h^-l b)
///                 + ((gamma-1)/2) l (m u^2)/(r c2) (h^-l b)
/// ```
///
/// and symmetrically for `d2 (h^-l a)` with `c1`, `A2`, `B2`. At
/// `lambda = (3-gamma)/(2(gamma-1))` the cross term cancels, at
/// `lambda = 2/(gamma-1)` it absorbs the quadratic into
/// `(alpha_hat - beta_hat)` form; [`Weighting`] names those two presets.
#[allow(clippy::too_many_arguments)]
pub fn weighted_rhs(
    params: &GasParams,
    lambda: f64,
    coeffs: &RiccatiCoeffs,
    r: f64,
    h: f64,
    u: f64,
    alpha: f64,
    beta: f64,
) -> (f64, f64) {
    assert!(lambda >= 0.0, "weight exponent must be nonnegative");
    let gamma = params.gamma();
    let kappa = params.kappa();
    let m = params.m();
    let (c1, c2) = params.wave_speeds(h, u);
    let hl = h.powf(lambda);
    let wa = alpha / hl;
    let wb = beta / hl;
    let quad = 0.25 * (1.0 + gamma);
    let cross_coeff = 0.25 * (gamma - 3.0) + kappa * lambda;
    let cross = cross_coeff * hl * wa * wb;
    let d1_wb = -quad * hl * wb * wb + cross + coeffs.a1 * wa - coeffs.b1 * wb
        + kappa * lambda * m * u * u / (r * c2) * wb;
    let d2_wa = -quad * hl * wa * wa + cross + coeffs.a2 * wb - coeffs.b2 * wa
        + kappa * lambda * m * u * u / (r * c1) * wa;
    (d1_wb, d2_wa)
}

/// Named weight exponents for the character weightings that the theory
/// singles out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    /// `lambda = 0`: the raw characters.
    Plain,
    /// `lambda = (3-gamma)/(2(gamma-1))`: cancels the alpha-beta cross term;
    /// these are the variables the compression threshold is stated in.
    Tilde,
    /// `lambda = 2/(gamma-1)`: used for the global bound on positive parts.
    Hat,
}

impl Weighting {
    pub fn lambda(self, params: &GasParams) -> f64 {
        match self {
            Weighting::Plain => 0.0,
            Weighting::Tilde => (3.0 - params.gamma()) / (2.0 * (params.gamma() - 1.0)),
            Weighting::Hat => 2.0 / (params.gamma() - 1.0),
        }
    }
}

/// Characters at one cell in every weighting. The `bar` pair additionally
/// discounts by `exp(-C_b t)`; construction takes the product `C_b * t`
/// directly so fields at `t = 0` or without a ledger pass `0.0`.
#[derive(Clone, Copy, Debug)]
pub struct CharacterState {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_tilde: f64,
    pub beta_tilde: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub alpha_bar: f64,
    pub beta_bar: f64,
}

impl CharacterState {
    pub fn from_characters(params: &GasParams, h: f64, alpha: f64, beta: f64, cb_t: f64) -> Self {
        let lt = Weighting::Tilde.lambda(params);
        let lh = Weighting::Hat.lambda(params);
        let wt = h.powf(-lt);
        let wh = h.powf(-lh);
        let discount = (-cb_t).exp();
        Self {
            alpha,
            beta,
            alpha_tilde: wt * alpha,
            beta_tilde: wt * beta,
            alpha_hat: wh * alpha,
            beta_hat: wh * beta,
            alpha_bar: discount * wh * alpha,
            beta_bar: discount * wh * beta,
        }
    }
}

/// Character fields over a flow snapshot. Cells where the characters do not
/// exist (sonic states, the origin) are `None`.
#[derive(Clone, Debug)]
pub struct CharacterField {
    pub time: f64,
    values: Vec<Option<CharacterState>>,
}

impl CharacterField {
    /// Differentiate a snapshot radially and evaluate the characters
    /// cellwise. `cb_t` is the `C_b * t` discount fed to the `bar` pair.
    pub fn from_flow_field(params: &GasParams, field: &FlowField, cb_t: f64) -> Self {
        let h: Vec<f64> = field.states().iter().map(|s| s.h).collect();
        let u: Vec<f64> = field.states().iter().map(|s| s.u).collect();
        let h_r = radial_derivative(field.radii(), &h);
        let u_r = radial_derivative(field.radii(), &u);
        let values = field
            .radii()
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                characters_from_gradients(params, r, h[i], u[i], h_r[i], u_r[i])
                    .ok()
                    .map(|(a, b)| CharacterState::from_characters(params, h[i], a, b, cb_t))
            })
            .collect();
        Self { time: field.time, values }
    }

    #[inline]
    pub fn values(&self) -> &[Option<CharacterState>] {
        &self.values
    }

    /// Minimum and maximum of `min(alpha, beta)` / `max(alpha, beta)` over
    /// the defined cells of `range`.
    pub fn extrema(&self, range: std::ops::Range<usize>) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut any = false;
        for v in self.values[range].iter().flatten() {
            lo = lo.min(v.alpha.min(v.beta));
            hi = hi.max(v.alpha.max(v.beta));
            any = true;
        }
        any.then_some((lo, hi))
    }
}
