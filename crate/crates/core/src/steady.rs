//! Steady supersonic reference flows.
//!
//! A time-independent radial flow satisfies two algebraic conservation
//! relations: constant weighted mass flux and the Bernoulli head,
//!
//! ```text
//!   r^m rho u = Phi,        u^2/2 + h^2/(gamma-1) = E.
//! ```
//!
//! Given `(Phi, E)`, the density at each radius solves
//! `Phi^2/(2 r^{2m} rho^2) + K gamma/(gamma-1) rho^{gamma-1} = E`, which has
//! one subsonic and one supersonic root; this module always picks the
//! supersonic branch. The family is deliberately constructed without the
//! character formulas so it can serve as an independent oracle: its
//! characters must vanish identically.

use crate::gas::GasParams;

#[derive(Debug, thiserror::Error)]
pub enum SteadyError {
    #[error("reference state must be supersonic (z > 0): got z = {0}")]
    NotSupersonic(f64),
    #[error("reference state must have positive density and velocity")]
    BadReference,
    #[error("no supersonic root at r = {r}: flow would choke (min residual {residual})")]
    Choked { r: f64, residual: f64 },
}

/// A steady supersonic flow pinned by its mass flux and Bernoulli head.
#[derive(Clone, Copy, Debug)]
pub struct SteadyFlow {
    params: GasParams,
    /// `r^m rho u`, conserved.
    pub phi: f64,
    /// `u^2/2 + h^2/(gamma-1)`, conserved.
    pub head: f64,
}

impl SteadyFlow {
    /// Build the flow through one reference state `(rho, u)` at radius `r`.
    pub fn from_reference(params: GasParams, r: f64, rho: f64, u: f64) -> Result<Self, SteadyError> {
        if !(rho > 0.0 && u > 0.0 && r > 0.0) {
            return Err(SteadyError::BadReference);
        }
        let h = params.sound_speed(rho).map_err(|_| SteadyError::BadReference)?;
        let (_, z) = params.riemann_variables(h, u);
        if z <= 0.0 {
            return Err(SteadyError::NotSupersonic(z));
        }
        let phi = r.powf(params.m()) * rho * u;
        let head = 0.5 * u * u + h * h / (params.gamma() - 1.0);
        Ok(Self { params, phi, head })
    }

    /// Bernoulli residual at `(r, rho)`.
    fn residual(&self, r: f64, rho: f64) -> f64 {
        let p = &self.params;
        let u = self.phi / (r.powf(p.m()) * rho);
        let h2 = p.entropy_k() * p.gamma() * rho.powf(p.gamma() - 1.0);
        0.5 * u * u + h2 / (p.gamma() - 1.0) - self.head
    }

    /// `(rho, u)` on the supersonic branch at radius `r`.
    pub fn state_at(&self, r: f64) -> Result<(f64, f64), SteadyError> {
        let p = &self.params;
        let gamma = p.gamma();
        // The residual is convex in rho with its minimum at the sonic
        // density; the supersonic root lies below it.
        let rho_sonic = (self.phi * self.phi / (p.entropy_k() * gamma * r.powf(2.0 * p.m())))
            .powf(1.0 / (gamma + 1.0));
        let at_min = self.residual(r, rho_sonic);
        if at_min >= 0.0 {
            return Err(SteadyError::Choked { r, residual: at_min });
        }
        let mut lo = rho_sonic * 1e-14;
        let mut hi = rho_sonic;
        // residual(lo) > 0 from the kinetic term, residual(hi) < 0
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.residual(r, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        let rho = 0.5 * (lo + hi);
        Ok((rho, self.phi / (r.powf(p.m()) * rho)))
    }
}
