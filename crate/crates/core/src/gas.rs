//! Gas law, state types, and problem statements.
//!
//! The gas is isentropic with pressure `p = K rho^gamma`. All derived
//! quantities hang off the sound speed
//!
//! ```text
//!   h = sqrt(K gamma) rho^((gamma-1)/2),
//! ```
//!
//! which is more convenient than `rho` itself: the Riemann variables are
//! `w = u + 2h/(gamma-1)` and `z = u - 2h/(gamma-1)`, and the two wave
//! speeds are `c1 = u - h` and `c2 = u + h`. Supersonic expansion means
//! `z >= 0`, i.e. the flow outruns its own sound speed with margin
//! `c1 >= (3-gamma)/(gamma-1) * h > 0`.

use std::fmt;
use std::sync::Arc;

use crate::affine::AffineMotion;

/// Symmetry index of the radial reduction: `m = 1` for cylindrical flow,
/// `m = 2` for spherical flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    Cylindrical,
    Spherical,
}

impl Symmetry {
    /// The exponent `m` as a float, the way it enters every formula.
    #[inline]
    pub fn index(self) -> f64 {
        match self {
            Symmetry::Cylindrical => 1.0,
            Symmetry::Spherical => 2.0,
        }
    }

    pub fn from_index(m: u32) -> Result<Self, GasError> {
        match m {
            1 => Ok(Symmetry::Cylindrical),
            2 => Ok(Symmetry::Spherical),
            _ => Err(GasError::SymmetryIndex(m)),
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() as u32)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GasError {
    #[error("gamma out of (1,3): got {0}")]
    Gamma(f64),
    #[error("entropy constant K must be positive and finite: got {0}")]
    Entropy(f64),
    #[error("symmetry index must be 1 or 2: got {0}")]
    SymmetryIndex(u32),
    #[error("density must be nonnegative and finite: got {0}")]
    Density(f64),
    #[error("sound speed must be nonnegative and finite: got {0}")]
    SoundSpeed(f64),
    #[error("radial grid must be finite, strictly increasing, with at least 3 cells")]
    Grid,
    #[error("scenario geometry invalid: left edge {left}, base radius {b}, right edge {right}")]
    Geometry { left: f64, b: f64, right: f64 },
    #[error("horizon must be positive and finite: got {0}")]
    Horizon(f64),
    #[error("velocity ceiling C0 must be positive and finite: got {0}")]
    VelocityCeiling(f64),
    #[error("initial data violates the supersonic-expansion assumption at r = {r}: {detail}")]
    Assumption { r: f64, detail: String },
}

/// Gas constants for one problem: adiabatic exponent, entropy constant, and
/// symmetry index. The exponent is restricted to the open interval (1,3);
/// at `gamma = 3` the two character equations degenerate (the coupling
/// coefficient `3 - gamma` vanishes together with the bound `c1 >=
/// (3-gamma)/(gamma-1) h`), so the boundary is excluded outright.
#[derive(Clone, Copy, Debug)]
pub struct GasParams {
    gamma: f64,
    entropy_k: f64,
    symmetry: Symmetry,
}

impl GasParams {
    pub fn new(gamma: f64, entropy_k: f64, symmetry: Symmetry) -> Result<Self, GasError> {
        if !(gamma.is_finite() && gamma > 1.0 && gamma < 3.0) {
            return Err(GasError::Gamma(gamma));
        }
        if !(entropy_k.is_finite() && entropy_k > 0.0) {
            return Err(GasError::Entropy(entropy_k));
        }
        Ok(Self { gamma, entropy_k, symmetry })
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn entropy_k(&self) -> f64 {
        self.entropy_k
    }

    #[inline]
    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Symmetry index `m` as a float.
    #[inline]
    pub fn m(&self) -> f64 {
        self.symmetry.index()
    }

    /// `kappa = (gamma-1)/2`, the exponent tying sound speed to density and
    /// the slope of the supersonic cone `h <= kappa u`.
    #[inline]
    pub fn kappa(&self) -> f64 {
        0.5 * (self.gamma - 1.0)
    }

    /// Pressure `p = K rho^gamma`.
    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        self.entropy_k * rho.powf(self.gamma)
    }

    /// Sound speed `h = sqrt(K gamma) rho^((gamma-1)/2)`.
    pub fn sound_speed(&self, rho: f64) -> Result<f64, GasError> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(GasError::Density(rho));
        }
        Ok((self.entropy_k * self.gamma).sqrt() * rho.powf(self.kappa()))
    }

    /// Inverse of [`sound_speed`](Self::sound_speed):
    /// `rho = (h^2 / (K gamma))^(1/(gamma-1))`.
    pub fn rho_from_sound_speed(&self, h: f64) -> Result<f64, GasError> {
        if !(h.is_finite() && h >= 0.0) {
            return Err(GasError::SoundSpeed(h));
        }
        Ok((h * h / (self.entropy_k * self.gamma)).powf(1.0 / (self.gamma - 1.0)))
    }

    /// Riemann variables `(w, z) = (u + 2h/(gamma-1), u - 2h/(gamma-1))`.
    #[inline]
    pub fn riemann_variables(&self, h: f64, u: f64) -> (f64, f64) {
        let q = h / self.kappa();
        (u + q, u - q)
    }

    /// Wave speeds `(c1, c2) = (u - h, u + h)` of the two acoustic families.
    #[inline]
    pub fn wave_speeds(&self, h: f64, u: f64) -> (f64, f64) {
        (u - h, u + h)
    }
}

/// Complete hydrodynamic state of one cell. Everything beyond `(rho, u)` is
/// derived at construction so that downstream code never recomputes the
/// thermodynamics inconsistently.
#[derive(Clone, Copy, Debug)]
pub struct CellState {
    pub rho: f64,
    pub u: f64,
    pub h: f64,
    pub w: f64,
    pub z: f64,
    pub c1: f64,
    pub c2: f64,
}

impl CellState {
    pub fn new(params: &GasParams, rho: f64, u: f64) -> Result<Self, GasError> {
        let h = params.sound_speed(rho)?;
        if !u.is_finite() {
            return Err(GasError::Assumption { r: f64::NAN, detail: format!("non-finite velocity {u}") });
        }
        let (w, z) = params.riemann_variables(h, u);
        let (c1, c2) = params.wave_speeds(h, u);
        Ok(Self { rho, u, h, w, z, c1, c2 })
    }
}

/// Strictly increasing cell-center radii of a uniform grid.
pub fn uniform_centers(left: f64, right: f64, cells: usize) -> Vec<f64> {
    let dr = (right - left) / cells as f64;
    (0..cells).map(|i| left + (i as f64 + 0.5) * dr).collect()
}

/// One instant of the flow on a radial grid.
#[derive(Clone, Debug)]
pub struct FlowField {
    pub time: f64,
    radii: Vec<f64>,
    states: Vec<CellState>,
}

impl FlowField {
    pub fn new(time: f64, radii: Vec<f64>, states: Vec<CellState>) -> Result<Self, GasError> {
        if radii.len() < 3 || radii.len() != states.len() {
            return Err(GasError::Grid);
        }
        if !radii.windows(2).all(|p| p[0].is_finite() && p[0] < p[1]) {
            return Err(GasError::Grid);
        }
        Ok(Self { time, radii, states })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    #[inline]
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    #[inline]
    pub fn states(&self) -> &[CellState] {
        &self.states
    }
}

/// How the left side of the computational window is closed.
#[derive(Clone)]
pub enum BoundaryMode {
    /// Data below the base radius is unknown. Ghost cells freeze the initial
    /// extension and verification is restricted to the dependence cone of
    /// `[b, infinity)`, traced along the fast characteristic from `(b, 0)`.
    DependenceCone,
    /// The region inside the outward-moving interface curve carries an exact
    /// affine solution; cells behind the interface are kept pinned to it and
    /// act as boundary data for the free region.
    CharacteristicLeft(AffineMotion),
    /// Half-line problem shrunk to a small positive left edge where the data
    /// vanishes; used for studies of the `b -> 0` limit.
    HalfLineOrigin,
    /// Both ghost banks follow the exact affine solution. Used for
    /// manufactured-solution convergence studies on a window strictly
    /// inside the affine patch; no frontier masking applies.
    AffineDirichlet(AffineMotion),
}

impl fmt::Debug for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryMode::DependenceCone => write!(f, "DependenceCone"),
            BoundaryMode::CharacteristicLeft(_) => write!(f, "CharacteristicLeft(..)"),
            BoundaryMode::HalfLineOrigin => write!(f, "HalfLineOrigin"),
            BoundaryMode::AffineDirichlet(_) => write!(f, "AffineDirichlet(..)"),
        }
    }
}

/// Initial profile `(rho0, u0)` as a resolution-independent function of
/// radius, plus the handful of data-dependent constants the bound ledger
/// needs. Presets build the closure once (analytically or from a dense
/// construction pass) and every grid samples it.
#[derive(Clone)]
pub struct InitialData {
    eval: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
}

impl InitialData {
    pub fn from_fn(eval: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval) }
    }

    /// `(rho0, u0)` at radius `r`.
    #[inline]
    pub fn eval(&self, r: f64) -> (f64, f64) {
        (self.eval)(r)
    }
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InitialData(..)")
    }
}

/// A complete problem statement: gas constants, window geometry, horizon,
/// initial data, boundary mode, and the velocity ceiling `C0`.
///
/// `b` is the base radius the a-priori theory is anchored at; `grid_left`
/// may sit below it when a run deliberately carries extra (untrusted) cells
/// to the left, and coincides with `b` otherwise.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub params: GasParams,
    pub grid_left: f64,
    pub b: f64,
    pub r_right: f64,
    pub horizon: f64,
    pub c0: f64,
    pub boundary: BoundaryMode,
    pub initial: InitialData,
}

impl Scenario {
    pub fn new(
        params: GasParams,
        b: f64,
        r_right: f64,
        horizon: f64,
        c0: f64,
        boundary: BoundaryMode,
        initial: InitialData,
    ) -> Result<Self, GasError> {
        let scenario = Self { params, grid_left: b, b, r_right, horizon, c0, boundary, initial };
        scenario.check_geometry()?;
        Ok(scenario)
    }

    /// Extend the grid below the base radius. Cells in `[grid_left, b)` are
    /// evolved but excluded from every verified region.
    pub fn with_grid_left(mut self, grid_left: f64) -> Result<Self, GasError> {
        self.grid_left = grid_left;
        self.check_geometry()?;
        Ok(self)
    }

    fn check_geometry(&self) -> Result<(), GasError> {
        let ok = self.grid_left.is_finite()
            && self.b.is_finite()
            && self.r_right.is_finite()
            && self.grid_left > 0.0
            && self.grid_left <= self.b
            && self.b < self.r_right;
        if !ok {
            return Err(GasError::Geometry { left: self.grid_left, b: self.b, right: self.r_right });
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(GasError::Horizon(self.horizon));
        }
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(GasError::VelocityCeiling(self.c0));
        }
        Ok(())
    }

    /// Sample the initial profile onto `cells` uniform cell centers spanning
    /// the full window `[grid_left, r_right]`.
    pub fn sample_initial(&self, cells: usize) -> Result<FlowField, GasError> {
        let radii = uniform_centers(self.grid_left, self.r_right, cells);
        let states = radii
            .iter()
            .map(|&r| {
                let (rho, u) = self.initial.eval(r);
                CellState::new(&self.params, rho, u)
            })
            .collect::<Result<Vec<_>, _>>()?;
        FlowField::new(0.0, radii, states)
    }

    /// Check the supersonic-expansion assumption pointwise on a sampled
    /// profile: `0 < 2h/(gamma-1) <= u <= C0`, i.e. positive density,
    /// nonnegative `z`, and velocity within the ceiling. The half-line mode
    /// admits vanishing data at the left edge (the `b -> 0` picture), so
    /// equality with zero is tolerated there.
    pub fn check_assumptions(&self, field: &FlowField) -> Result<(), GasError> {
        // Margin for the z >= 0 comparison: sampled profiles hit the cone
        // boundary up to roundoff when data is constructed with z = 0.
        let scale = field.states().iter().map(|s| s.u.abs().max(s.h)).fold(0.0_f64, f64::max);
        let slack = 1e-12 * scale.max(1.0);
        let vacuum_edge_ok = matches!(self.boundary, BoundaryMode::HalfLineOrigin);
        for (i, (&r, s)) in field.radii().iter().zip(field.states()).enumerate() {
            let at_edge = i == 0 && vacuum_edge_ok;
            if s.rho <= 0.0 && !at_edge {
                return Err(GasError::Assumption { r, detail: format!("density {} not positive", s.rho) });
            }
            if s.u <= 0.0 && !at_edge {
                return Err(GasError::Assumption { r, detail: format!("velocity {} not positive", s.u) });
            }
            if s.z < -slack {
                return Err(GasError::Assumption {
                    r,
                    detail: format!("z = {} negative: flow not supersonic", s.z),
                });
            }
            if s.u > self.c0 * (1.0 + 1e-12) {
                return Err(GasError::Assumption {
                    r,
                    detail: format!("velocity {} exceeds ceiling C0 = {}", s.u, self.c0),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(gamma: f64, k: f64, m: u32) -> GasParams {
        GasParams::new(gamma, k, Symmetry::from_index(m).unwrap()).unwrap()
    }

    #[test]
    fn rejects_gamma_outside_open_interval() {
        for g in [1.0, 3.0, 3.5, 0.2, f64::NAN] {
            assert!(GasParams::new(g, 1.0, Symmetry::Cylindrical).is_err(), "gamma = {g}");
        }
        assert!(GasParams::new(1.0 + 1e-9, 1.0, Symmetry::Cylindrical).is_ok());
    }

    #[test]
    fn sound_speed_round_trip_and_monotonicity() {
        let p = params(1.4, 0.7, 2);
        let mut prev = 0.0;
        for i in 1..60 {
            let rho = 1e-6 * 10f64.powf(i as f64 * 0.2);
            let h = p.sound_speed(rho).unwrap();
            assert!(h > prev, "sound speed must increase with density");
            prev = h;
            let back = p.rho_from_sound_speed(h).unwrap();
            assert_relative_eq!(back, rho, max_relative = 1e-12);
        }
        assert_eq!(p.sound_speed(0.0).unwrap(), 0.0);
        assert!(p.sound_speed(-1.0).is_err());
        assert!(p.rho_from_sound_speed(-0.5).is_err());
    }

    #[test]
    fn riemann_variables_match_definition() {
        // gamma = 2 makes 2/(gamma-1) = 2, so w = u + 2h, z = u - 2h.
        let p = params(2.0, 1.0, 1);
        let (w, z) = p.riemann_variables(0.5, 2.0);
        assert_relative_eq!(w, 3.0);
        assert_relative_eq!(z, 1.0);
        let (c1, c2) = p.wave_speeds(0.5, 2.0);
        assert_relative_eq!(c1, 1.5);
        assert_relative_eq!(c2, 2.5);
    }

    #[test]
    fn supersonic_wave_speed_margin() {
        // With z >= 0 the slow speed keeps the margin c1 >= (3-gamma)/(gamma-1) h.
        let mut rng_state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            // xorshift is plenty for spreading test points
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..2000 {
            let gamma = 1.0 + 1.9999 * next().max(1e-6);
            let p = params(gamma, 1.0, 1);
            let u = 1e-3 + 10.0 * next();
            let h = p.kappa() * u * next(); // any state with z >= 0
            let (c1, _) = p.wave_speeds(h, u);
            let margin = (3.0 - gamma) / (gamma - 1.0) * h;
            assert!(
                c1 >= margin - 1e-12 * u.max(1.0),
                "c1 = {c1} below margin {margin} at gamma = {gamma}"
            );
        }
    }

    #[test]
    fn flow_field_rejects_bad_grids() {
        let p = params(2.0, 1.0, 1);
        let s = CellState::new(&p, 1.0, 1.0).unwrap();
        assert!(FlowField::new(0.0, vec![1.0, 2.0], vec![s; 2]).is_err());
        assert!(FlowField::new(0.0, vec![1.0, 1.0, 2.0], vec![s; 3]).is_err());
        assert!(FlowField::new(0.0, vec![1.0, 0.5, 2.0], vec![s; 3]).is_err());
        assert!(FlowField::new(0.0, vec![1.0, 2.0, 3.0], vec![s; 3]).is_ok());
    }

    #[test]
    fn scenario_assumption_check_flags_subsonic_data() {
        let p = params(2.0, 0.5, 1);
        // rho = 0.36 gives h = 0.6 and z = 1 - 2*0.6 = -0.2: not supersonic.
        let initial = InitialData::from_fn(move |_r| (0.36, 1.0));
        let sc = Scenario::new(p, 1.0, 2.0, 1.0, 1.0, BoundaryMode::DependenceCone, initial).unwrap();
        let field = sc.sample_initial(16).unwrap();
        let err = sc.check_assumptions(&field).unwrap_err();
        assert!(matches!(err, GasError::Assumption { .. }));
    }
}
