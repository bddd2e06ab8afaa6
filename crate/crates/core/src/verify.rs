//! A-priori bounds ("the ledger") and runtime checks on stored runs.
//!
//! Every admissible scenario carries a small table of constants derived
//! from its initial and boundary data: a velocity ceiling `C0`, character
//! bounds, suprema of the Riccati coefficients over the reachable state
//! box, time-dependent density floors, an explicit blowup-time bound for
//! compressive seeds, and the compression threshold `N(b, T)` past which
//! blowup is guaranteed before the horizon. This module assembles that
//! table, computing each supremum by two independent routes (a reduced
//! closed form and a dense sampling oracle over the state box, required to
//! agree within 1%), and then replays stored snapshots against the
//! resulting inequalities:
//!
//! * supersonic window: `h/kappa <= u <= 2 C0` cellwise,
//! * character signs: `min(alpha, beta) >= -eps_grid` with the slack
//!   proportional to the cell width, and `max(alpha, beta)` below the
//!   initial maximum plus a fixed margin,
//! * coefficient signs: `A_i >= 0` and `B_i - A_i >= 0` cellwise,
//! * density floors: `rho >= rho_bar (b/(b+2 C0 t))^m e^(-c t)` with the
//!   exponent depending on whether sign hypotheses hold.
//!
//! The reachable state box is `{r >= b, 0 < u <= 2 C0, 0 < h <= kappa u}`:
//! the invariant region guaranteed for supersonic expanding data. On it
//! every coefficient factors through `s = h/u`, e.g.
//!
//! ```text
//!   A1 = (m u / r) (1+s)(kappa - s^2) / (2 (1-s)^2),
//! ```
//!
//! so the closed-form supremum is `(2 m C0 / b)` times a one-dimensional
//! shape maximum, while the oracle samples the full box through the same
//! coefficient code the runtime checks use.

use crate::affine::{AffineError, AffineMotion};
use crate::characters::{riccati_coeffs, CharacterField, CharacterState};
use crate::gas::{
    BoundaryMode, CellState, FlowField, GasError, GasParams, Scenario, Symmetry,
};
use crate::solver::{run_scenario, RunRecord, SolverConfig, SolverError};

/// Margin added to observed character maxima before they are used as caps.
pub const CHARACTER_MARGIN: f64 = 1e-6;
/// Cells next to the outflow edge excluded from verification.
const RIGHT_MARGIN_CELLS: usize = 2;
/// Required relative agreement between the two supremum routes.
const SUPREMUM_TOLERANCE: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Gas(#[from] GasError),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("closed-form and sampled suprema disagree for {name}: {closed} vs {sampled}")]
    SupremumMismatch { name: &'static str, closed: f64, sampled: f64 },
    #[error("blowup bound needs a negative seed, got {0}")]
    NonNegativeSeed(f64),
    #[error("{0}")]
    BadInput(String),
}

/// The assembled table of scenario constants. All bounds are finite for
/// `b > 0` and `gamma < 3` except `t_star` (absent for data without a
/// negative seed) and `n_threshold` (infinite when no amount of initial
/// compression wins against these bounds before the horizon).
#[derive(Clone, Debug)]
pub struct BoundLedger {
    pub params: GasParams,
    pub b: f64,
    pub horizon: f64,
    /// Velocity ceiling: data stays below it, solutions below twice it.
    pub c0: f64,
    /// Largest initial/boundary character (signed).
    pub m0: f64,
    /// Largest initial/boundary |character|, recorded for diagnostics.
    pub m0_abs: f64,
    /// Character upper-bound hypothesis, `m0` plus the fixed margin.
    pub m_hyp: f64,
    /// Smallest initial/boundary density.
    pub rho_bar: f64,
    /// Most negative initial tilde-weighted character.
    pub seed_tilde: f64,
    /// Supremum of `A_i`, `|B_i|` over the reachable box.
    pub k_hat: f64,
    /// Bound with `m u^2/(r c_i) + 1 <= c_b` over the same box.
    pub c_b: f64,
    /// Decay exponent of the rarefaction density floor.
    pub m_b: f64,
    /// Cap on the hat-weighted characters.
    pub m_bar: f64,
    /// Decay exponent of the general density floor.
    pub m_bar_b: f64,
    /// Leading constant of the tilde-weight lower bound.
    pub c_hat: f64,
    /// Lower bound on the tilde weight `h^lambda` up to the horizon.
    pub h_tilde_min: f64,
    /// Upper bound on the tilde-weighted partner character.
    pub a_tilde_max: f64,
    /// Blowup-time bound at the initial seed, when that seed is negative.
    pub t_star: Option<f64>,
    /// Compression threshold `N(b, T)`.
    pub n_threshold: f64,
}

/// `m_b = M + 2 m (gamma-1) C0 / (b (3-gamma))`.
fn rarefaction_floor_exponent(params: &GasParams, m_cap: f64, c0: f64, b: f64) -> f64 {
    let gamma = params.gamma();
    m_cap + 2.0 * params.m() * (gamma - 1.0) * c0 / (b * (3.0 - gamma))
}

/// `m_bar = 1 + (K gamma)^(-1/(gamma-1)) m0 / rho_bar`.
///
/// The cap is one-sided: it dominates the hat characters from above, so only
/// the signed maximum of the data enters. A deep compression trough lowers
/// the minimum without touching this bound. Clamped at zero so the cap never
/// drops below one when the data is compressive everywhere.
fn hat_character_cap(params: &GasParams, m0: f64, rho_bar: f64) -> f64 {
    let gamma = params.gamma();
    let kg = params.entropy_k() * gamma;
    1.0 + kg.powf(-1.0 / (gamma - 1.0)) * m0.max(0.0) / rho_bar
}

/// `m_bar_b = e^(c_b T) ((gamma-1) C0)^(2/(gamma-1)) m_bar
///            + 2 m (gamma-1) C0 / (b (3-gamma))`.
fn general_floor_exponent(
    params: &GasParams,
    c_b: f64,
    horizon: f64,
    c0: f64,
    m_bar: f64,
    b: f64,
) -> f64 {
    let gamma = params.gamma();
    (c_b * horizon).exp() * ((gamma - 1.0) * c0).powf(2.0 / (gamma - 1.0)) * m_bar
        + 2.0 * params.m() * (gamma - 1.0) * c0 / (b * (3.0 - gamma))
}

/// `c_hat = (K gamma)^((3-gamma)/(4(gamma-1))) rho_bar^((3-gamma)/4)
///          e^(-m_bar_b (3-gamma) T / 4)`.
fn tilde_weight_constant(params: &GasParams, rho_bar: f64, m_bar_b: f64, horizon: f64) -> f64 {
    let gamma = params.gamma();
    let kg = params.entropy_k() * gamma;
    kg.powf((3.0 - gamma) / (4.0 * (gamma - 1.0)))
        * rho_bar.powf((3.0 - gamma) / 4.0)
        * (-m_bar_b * (3.0 - gamma) * horizon / 4.0).exp()
}

/// `a_tilde_max = e^(c_b T) ((gamma-1) C0)^((gamma+1)/(2(gamma-1))) m_bar`.
fn tilde_partner_cap(params: &GasParams, c_b: f64, horizon: f64, c0: f64, m_bar: f64) -> f64 {
    let gamma = params.gamma();
    (c_b * horizon).exp() * ((gamma - 1.0) * c0).powf((gamma + 1.0) / (2.0 * (gamma - 1.0))) * m_bar
}

/// `t* = (b/(2 C0)) ((1 + 4 C0 (4 - m(3-gamma)) /
///        ((-seed)(gamma+1) c_hat b))^(4/(4-m(3-gamma))) - 1)`.
fn blowup_time_formula(params: &GasParams, b: f64, c0: f64, c_hat: f64, seed: f64) -> f64 {
    let gamma = params.gamma();
    let q = 4.0 - params.m() * (3.0 - gamma);
    let inner = 1.0 + 4.0 * c0 * q / ((-seed) * (gamma + 1.0) * c_hat * b);
    (b / (2.0 * c0)) * (inner.powf(4.0 / q) - 1.0)
}

/// Shape factors of the Riccati coefficients on the reachable box: each
/// coefficient equals `(m u / r)` times one of these functions of
/// `s = h/u`.
fn coefficient_shapes(kappa: f64, s: f64) -> [f64; 4] {
    let om = 1.0 - s;
    let op = 1.0 + s;
    let a1 = op * (kappa - s * s) / (2.0 * om * om);
    let a2 = om * (kappa - s * s) / (2.0 * op * op);
    let b1 = (0.5 * kappa - 0.5 * s * s * s - 0.5 * kappa * s
        + 0.5 * s * s
        + s * om * (s + kappa) / op)
        / (om * om);
    let b2 = (0.5 * kappa + 0.5 * s * s * s + 0.5 * kappa * s + 0.5 * s * s
        + s * op * (s - kappa) / om)
        / (op * op);
    [a1, a2, b1, b2]
}

/// Closed-form route for the box suprema `(k_hat, c_b)`: the coefficients
/// are linear in `u` and decay like `1/r`, so the supremum sits at
/// `u = 2 C0`, `r = b`, leaving a one-dimensional shape maximum over
/// `s = h/u` in `(0, kappa]` found by dense scan.
fn box_suprema_closed(params: &GasParams, b: f64, c0: f64) -> (f64, f64) {
    let kappa = params.kappa();
    let gamma = params.gamma();
    let n = 200_000;
    let mut shape_max = 0.0f64;
    for j in 1..=n {
        let s = kappa * j as f64 / n as f64;
        let [a1, a2, b1, b2] = coefficient_shapes(kappa, s);
        shape_max = shape_max.max(a1).max(a2).max(b1.abs()).max(b2.abs());
    }
    let k_hat = 2.0 * params.m() * c0 / b * shape_max;
    // u^2/c1 = u (u/c1) with u/c1 = 1/(1-s) <= 1/(1-kappa) = 2/(3-gamma)
    let c_b = 1.0 + 4.0 * params.m() * c0 / (b * (3.0 - gamma));
    (k_hat, c_b)
}

/// Sampling oracle for the same suprema: a dense grid over the box
/// evaluated through the runtime coefficient code.
fn box_suprema_sampled(params: &GasParams, b: f64, c0: f64, nu: usize, ns: usize) -> (f64, f64) {
    let kappa = params.kappa();
    let m = params.m();
    let mut k_hat = 0.0f64;
    let mut speed_part = 0.0f64;
    for i in 1..=nu {
        let u = 2.0 * c0 * i as f64 / nu as f64;
        for j in 1..=ns {
            let s = kappa * j as f64 / ns as f64;
            let h = s * u;
            let Ok(c) = riccati_coeffs(params, b, h, u) else { continue };
            k_hat = k_hat.max(c.a1).max(c.a2).max(c.b1.abs()).max(c.b2.abs());
            let (c1, c2) = params.wave_speeds(h, u);
            speed_part = speed_part.max(m * u * u / (b * c1)).max(m * u * u / (b * c2));
        }
    }
    (k_hat, 1.0 + speed_part)
}

fn dual_route_suprema(params: &GasParams, b: f64, c0: f64) -> Result<(f64, f64), VerifyError> {
    let (kc, cc) = box_suprema_closed(params, b, c0);
    let (ks, cs) = box_suprema_sampled(params, b, c0, 500, 2000);
    let agree = |closed: f64, sampled: f64| {
        (closed - sampled).abs() <= SUPREMUM_TOLERANCE * closed.abs().max(sampled.abs())
    };
    if !agree(kc, ks) {
        return Err(VerifyError::SupremumMismatch { name: "K_hat", closed: kc, sampled: ks });
    }
    if !agree(cc, cs) {
        return Err(VerifyError::SupremumMismatch { name: "C_b", closed: cc, sampled: cs });
    }
    Ok((kc.max(ks), cc.max(cs)))
}

struct DataExtrema {
    m0: f64,
    m0_abs: f64,
    rho_bar: f64,
    seed_tilde: f64,
}

impl DataExtrema {
    fn fold(&mut self, rho: f64, state: &CharacterState) {
        self.m0 = self.m0.max(state.alpha.max(state.beta));
        self.m0_abs = self.m0_abs.max(state.alpha.abs().max(state.beta.abs()));
        self.rho_bar = self.rho_bar.min(rho);
        self.seed_tilde = self.seed_tilde.min(state.alpha_tilde.min(state.beta_tilde));
    }
}

/// Extrema of the prescribed data over `[b, r_right]`, plus the boundary
/// curve for interface scenarios: those prescribe state along the moving
/// interface too, and the floors and caps must cover it.
fn data_extrema(scenario: &Scenario, samples: usize) -> Result<DataExtrema, VerifyError> {
    let params = &scenario.params;
    let n = samples.max(64);
    let dr = (scenario.r_right - scenario.b) / n as f64;
    let mut radii = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for i in 0..n {
        let r = scenario.b + (i as f64 + 0.5) * dr;
        let (rho, u) = scenario.initial.eval(r);
        radii.push(r);
        states.push(CellState::new(params, rho, u)?);
    }
    let field = FlowField::new(0.0, radii, states)?;
    let chars = CharacterField::from_flow_field(params, &field, 0.0);

    let mut out = DataExtrema {
        m0: f64::NEG_INFINITY,
        m0_abs: 0.0,
        rho_bar: f64::INFINITY,
        seed_tilde: f64::INFINITY,
    };
    for (i, v) in chars.values().iter().enumerate() {
        let Some(state) = v else {
            return Err(VerifyError::BadInput(format!(
                "characters undefined in the initial data at r = {}",
                field.radii()[i]
            )));
        };
        out.fold(field.states()[i].rho, state);
    }

    if let BoundaryMode::CharacteristicLeft(motion) = &scenario.boundary {
        let curve = motion.trace_interface(scenario.b, scenario.horizon)?;
        let nt = (n / 4).max(64);
        for k in 0..=nt {
            let t = scenario.horizon * k as f64 / nt as f64;
            let r = curve.eval(t)[0];
            let (rho, _) = motion.state(r, t)?;
            let (alpha, beta) = motion.characters(r, t)?;
            let h = params.sound_speed(rho)?;
            let state = CharacterState::from_characters(params, h, alpha, beta, 0.0);
            out.fold(rho, &state);
        }
    }
    Ok(out)
}

/// Assemble the full ledger for a scenario. `samples` controls how densely
/// the prescribed data is scanned for its extrema.
pub fn assemble_ledger(scenario: &Scenario, samples: usize) -> Result<BoundLedger, VerifyError> {
    let params = scenario.params;
    let b = scenario.b;
    let c0 = scenario.c0;
    let horizon = scenario.horizon;
    if !(b > 0.0 && c0 > 0.0 && horizon > 0.0) {
        return Err(VerifyError::BadInput(format!(
            "ledger needs positive b, C0, horizon; got {b}, {c0}, {horizon}"
        )));
    }
    let data = data_extrema(scenario, samples)?;
    let (k_hat, c_b) = dual_route_suprema(&params, b, c0)?;

    let gamma = params.gamma();
    let m = params.m();
    let m_hyp = data.m0 + CHARACTER_MARGIN;
    let m_b = rarefaction_floor_exponent(&params, m_hyp, c0, b);
    let m_bar = hat_character_cap(&params, data.m0, data.rho_bar);
    let m_bar_b = general_floor_exponent(&params, c_b, horizon, c0, m_bar, b);
    let c_hat = tilde_weight_constant(&params, data.rho_bar, m_bar_b, horizon);
    let h_tilde_min = c_hat * (b / (b + 2.0 * c0 * horizon)).powf(m * (3.0 - gamma) / 4.0);
    let a_tilde_max = tilde_partner_cap(&params, c_b, horizon, c0, m_bar);

    let mut ledger = BoundLedger {
        params,
        b,
        horizon,
        c0,
        m0: data.m0,
        m0_abs: data.m0_abs,
        m_hyp,
        rho_bar: data.rho_bar,
        seed_tilde: data.seed_tilde,
        k_hat,
        c_b,
        m_b,
        m_bar,
        m_bar_b,
        c_hat,
        h_tilde_min,
        a_tilde_max,
        t_star: None,
        n_threshold: f64::INFINITY,
    };
    if ledger.seed_tilde < 0.0 {
        ledger.t_star = Some(blowup_time_formula(&params, b, c0, c_hat, ledger.seed_tilde));
    }
    ledger.n_threshold = ledger.compute_threshold();
    Ok(ledger)
}

impl BoundLedger {
    /// Density floor under sign hypotheses (both characters nonnegative).
    pub fn density_floor_rarefaction(&self, t: f64) -> f64 {
        self.rho_bar
            * (self.b / (self.b + 2.0 * self.c0 * t)).powf(self.params.m())
            * (-self.m_b * t).exp()
    }

    /// Density floor requiring only the upper character cap; valid for
    /// compressive data before blowup.
    pub fn density_floor_general(&self, t: f64) -> f64 {
        self.rho_bar
            * (self.b / (self.b + 2.0 * self.c0 * t)).powf(self.params.m())
            * (-self.m_bar_b * t).exp()
    }

    /// Upper bound on the first blowup time for a negative tilde-weighted
    /// seed. Decreasing in |seed|, tending to zero.
    pub fn blowup_time_bound(&self, seed: f64) -> Result<f64, VerifyError> {
        if !(seed < 0.0) {
            return Err(VerifyError::NonNegativeSeed(seed));
        }
        Ok(blowup_time_formula(&self.params, self.b, self.c0, self.c_hat, seed))
    }

    /// Does a tilde-weighted character at `-n` guarantee blowup before the
    /// horizon? True when the quadratic term dominates every remainder the
    /// ledger allows (so half of it survives as decay) and the resulting
    /// time bound beats the horizon.
    fn admits_blowup(&self, n: f64) -> bool {
        let gamma = self.params.gamma();
        let remainder = -(1.0 + gamma) / 8.0 * self.h_tilde_min * n * n
            + self.k_hat * n
            + self.k_hat * self.a_tilde_max.max(0.0);
        if !(remainder < 0.0) {
            return false;
        }
        match self.blowup_time_bound(-n) {
            Ok(t) => t < self.horizon,
            Err(_) => false,
        }
    }

    /// Smallest compression magnitude that `admits_blowup` accepts, to
    /// 1e-3 relative, by bracket doubling and bisection. The admitting set
    /// is an interval `(n*, inf)`: the quadratic condition fails below its
    /// larger root and the time bound only improves with n.
    fn compute_threshold(&self) -> f64 {
        let mut hi = 1.0f64;
        while !self.admits_blowup(hi) {
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0f64;
        for _ in 0..200 {
            if hi - lo <= 1e-3 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.admits_blowup(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    pub fn compression_threshold(&self) -> f64 {
        self.n_threshold
    }
}

/// One report-style check over a run: pass/fail, the worst slack seen
/// (negative means violated by that much), where, and how many cells
/// violated.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub worst_margin: f64,
    pub location: Option<(f64, f64)>,
    pub violations: usize,
}

impl CheckOutcome {
    fn new(name: &'static str) -> Self {
        CheckOutcome { name, passed: true, worst_margin: f64::INFINITY, location: None, violations: 0 }
    }

    fn observe(&mut self, margin: f64, r: f64, t: f64) {
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.location = Some((r, t));
        }
        if margin < 0.0 {
            self.violations += 1;
            self.passed = false;
        }
    }
}

/// Cellwise `h/kappa <= u <= 2 C0` over `range`, exact (no slack): the
/// conclusion carries a factor-2 margin over the data hypothesis, so a
/// faithful discrete solution passes it without help.
pub fn check_supersonic_region(
    params: &GasParams,
    field: &FlowField,
    c0: f64,
    range: std::ops::Range<usize>,
) -> CheckOutcome {
    let mut out = CheckOutcome::new("supersonic-region");
    let kappa = params.kappa();
    for i in range {
        let s = &field.states()[i];
        let margin = (s.u - s.h / kappa).min(2.0 * c0 - s.u);
        out.observe(margin, field.radii()[i], field.time);
    }
    out
}

/// Character floor and ceiling over `range`: `min(alpha, beta) >= -slack`
/// and `max(alpha, beta) < cap`. Returns the two outcomes in that order.
pub fn check_character_signs(
    chars: &CharacterField,
    field: &FlowField,
    cap: f64,
    slack: f64,
    range: std::ops::Range<usize>,
) -> [CheckOutcome; 2] {
    let mut floor = CheckOutcome::new("character-floor");
    let mut ceiling = CheckOutcome::new("character-ceiling");
    for i in range {
        let Some(v) = &chars.values()[i] else { continue };
        let r = field.radii()[i];
        floor.observe(v.alpha.min(v.beta) + slack, r, chars.time);
        ceiling.observe(cap - v.alpha.max(v.beta), r, chars.time);
    }
    [floor, ceiling]
}

/// Cellwise coefficient signs over `range`: `A_1, A_2 >= 0` and the
/// differences `B_i - A_i >= 0`, all exact.
pub fn check_coefficient_signs(
    params: &GasParams,
    field: &FlowField,
    range: std::ops::Range<usize>,
) -> CheckOutcome {
    let mut out = CheckOutcome::new("coefficient-signs");
    for i in range {
        let s = &field.states()[i];
        let r = field.radii()[i];
        match riccati_coeffs(params, r, s.h, s.u) {
            Ok(c) => out.observe(c.a1.min(c.a2).min(c.d1).min(c.d2), r, field.time),
            Err(_) => out.observe(f64::NEG_INFINITY, r, field.time),
        }
    }
    out
}

/// Which density floor a run is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloorKind {
    /// Sign hypotheses hold (rarefactive data): the slow-decay floor, and
    /// the character sign/cap checks apply.
    Rarefaction,
    /// Only the upper character cap is assumed: the fast-decay floor;
    /// sign-dependent checks are skipped.
    General,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub checks: Vec<CheckOutcome>,
    /// Per-snapshot `(t, min char, max char)` over the active window.
    pub character_extrema: Vec<(f64, f64, f64)>,
    /// Cap the ceiling check used: discrete initial max plus the margin.
    pub character_cap: f64,
    /// Slack the floor check used: calibration constant times cell width.
    pub eps_grid: f64,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Replay the ledger inequalities over a stored run. `slack_per_dr` is the
/// calibrated character-sign slack per unit cell width; the actual slack
/// scales with this run's resolution, so refining the grid tightens the
/// check. Snapshots at or past a detected blowup are excluded: the bounds
/// are statements about the smooth regime.
pub fn verify_run(
    record: &RunRecord,
    ledger: &BoundLedger,
    slack_per_dr: f64,
    floor: FloorKind,
) -> Result<RunReport, VerifyError> {
    if record.snapshots.is_empty() {
        return Err(VerifyError::BadInput("run record holds no snapshots".into()));
    }
    let params = &record.params;
    let dr = (record.r_right - record.grid_left) / record.config.cells as f64;
    let eps_grid = slack_per_dr * dr;
    let cutoff = record.blowup().map(|e| e.time);

    let active = |snap: &crate::solver::Snapshot| {
        let n = snap.field.radii().len();
        let hi = n.saturating_sub(RIGHT_MARGIN_CELLS);
        snap.first_active.min(hi)..hi
    };

    let first = &record.snapshots[0];
    let cap = first
        .characters
        .extrema(active(first))
        .map(|(_, hi)| hi + CHARACTER_MARGIN)
        .unwrap_or(f64::INFINITY);

    // The floor statement for the evolved solution anchors at the infimum
    // of its own initial data. A steep feature can put a grid cell slightly
    // below the ledger's scan minimum, so take the smaller of the two; only
    // the anchor moves, the decay profile is asserted unchanged.
    let floor_anchor = {
        let mut lo = ledger.rho_bar;
        for s in &first.field.states()[active(first)] {
            lo = lo.min(s.rho);
        }
        lo / ledger.rho_bar
    };

    let mut supersonic = CheckOutcome::new("supersonic-region");
    let mut char_floor = CheckOutcome::new("character-floor");
    let mut char_ceiling = CheckOutcome::new("character-ceiling");
    let mut coeff_signs = CheckOutcome::new("coefficient-signs");
    let mut density = CheckOutcome::new(match floor {
        FloorKind::Rarefaction => "density-floor-rarefaction",
        FloorKind::General => "density-floor-general",
    });
    let mut extrema = Vec::new();

    for snap in &record.snapshots {
        if cutoff.is_some_and(|tb| snap.time >= tb) {
            break;
        }
        let range = active(snap);
        let t = snap.time;

        let s = check_supersonic_region(params, &snap.field, ledger.c0, range.clone());
        merge(&mut supersonic, s);
        let c = check_coefficient_signs(params, &snap.field, range.clone());
        merge(&mut coeff_signs, c);

        if floor == FloorKind::Rarefaction {
            let [f, c] =
                check_character_signs(&snap.characters, &snap.field, cap, eps_grid, range.clone());
            merge(&mut char_floor, f);
            merge(&mut char_ceiling, c);
        }

        let floor_val = floor_anchor
            * match floor {
                FloorKind::Rarefaction => ledger.density_floor_rarefaction(t),
                FloorKind::General => ledger.density_floor_general(t),
            };
        for i in range.clone() {
            let rho = snap.field.states()[i].rho;
            density.observe(rho - floor_val, snap.field.radii()[i], t);
        }

        if let Some((lo, hi)) = snap.characters.extrema(range) {
            extrema.push((t, lo, hi));
        }
    }

    let mut checks = vec![supersonic, coeff_signs, density];
    if floor == FloorKind::Rarefaction {
        checks.push(char_floor);
        checks.push(char_ceiling);
    }
    Ok(RunReport { checks, character_extrema: extrema, character_cap: cap, eps_grid })
}

fn merge(into: &mut CheckOutcome, from: CheckOutcome) {
    if from.worst_margin < into.worst_margin {
        into.worst_margin = from.worst_margin;
        into.location = from.location;
    }
    into.violations += from.violations;
    into.passed &= from.passed;
}

/// Calibrate the character-sign slack per unit cell width against a flow
/// with known characters: a window inside an exact affine patch, evolved
/// with exact ghost data on both sides, is compared cellwise against the
/// closed form, and the worst discrepancy (times a safety factor of five)
/// divided by the cell width becomes the constant. Checks elsewhere then
/// use `C * dr`, which halves under 2x refinement by construction.
pub fn calibrate_character_slack(cells: usize) -> Result<f64, VerifyError> {
    let params = GasParams::new(2.0, 1.0, Symmetry::Cylindrical)?;
    let motion = AffineMotion::new(params, 1.0, 3.0, 1.0, 0.2)?;
    let data = motion.clone();
    let init = crate::gas::InitialData::from_fn(move |r| {
        let rho = data.initial_profile(r).unwrap();
        (rho, 3.0 * r)
    });
    // window clear of the sonic radius near 0.46, inside the patch
    let scenario = Scenario::new(
        params,
        0.6,
        0.95,
        0.12,
        3.0 * 0.95,
        BoundaryMode::AffineDirichlet(motion.clone()),
        init,
    )?;
    let config = SolverConfig {
        cells,
        snapshot_dt: 0.02,
        waive_assumptions: true,
        ..Default::default()
    };
    let record = run_scenario(&scenario, config)?;
    let dr = (0.95 - 0.6) / cells as f64;
    let mut worst = 0.0f64;
    for snap in &record.snapshots {
        for (i, v) in snap.characters.values().iter().enumerate() {
            let Some(v) = v else { continue };
            let r = snap.field.radii()[i];
            let (ea, eb) = motion.characters(r, snap.time)?;
            worst = worst.max((v.alpha - ea).abs()).max((v.beta - eb).abs());
        }
    }
    Ok(5.0 * worst / dr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(gamma: f64, k: f64, m: u32) -> GasParams {
        GasParams::new(gamma, k, Symmetry::from_index(m).unwrap()).unwrap()
    }

    /// A ledger with hand-set bounds, for exercising the formulas alone.
    fn synthetic_ledger(gamma: f64, m: u32) -> BoundLedger {
        let p = params(gamma, 1.0, m);
        BoundLedger {
            params: p,
            b: 1.0,
            horizon: 1.0,
            c0: 1.0,
            m0: 1.0,
            m0_abs: 1.0,
            m_hyp: 1.0,
            rho_bar: 1.0,
            seed_tilde: 0.0,
            k_hat: 1.0,
            c_b: 1.0,
            m_b: 1.0,
            m_bar: 1.0,
            m_bar_b: 1.0,
            c_hat: 1.0,
            h_tilde_min: 1.0,
            a_tilde_max: 1.0,
            t_star: None,
            n_threshold: f64::INFINITY,
        }
    }

    #[test]
    fn floor_exponent_arithmetic() {
        // gamma=2, m=1, b=1, C0=1, M=1: the additive term is 2, so m_b = 3
        let p = params(2.0, 1.0, 1);
        assert_relative_eq!(rarefaction_floor_exponent(&p, 1.0, 1.0, 1.0), 3.0);
        // floor(1) = rho_bar (1/3) e^-3
        let mut lg = synthetic_ledger(2.0, 1);
        lg.m_b = 3.0;
        assert_relative_eq!(
            lg.density_floor_rarefaction(1.0),
            (1.0f64 / 3.0) * (-3.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn hat_cap_arithmetic() {
        // K gamma = 1 and m0 = rho_bar make the cap exactly 2
        let p = params(2.0, 0.5, 1);
        assert_relative_eq!(hat_character_cap(&p, 0.7, 0.7), 2.0);
    }

    #[test]
    fn general_floor_exponent_at_zero_horizon() {
        let p = params(2.0, 1.0, 1);
        let expect = ((p.gamma() - 1.0) * 1.0f64).powf(2.0 / (p.gamma() - 1.0)) * 1.5 + 2.0;
        assert_relative_eq!(general_floor_exponent(&p, 7.0, 0.0, 1.0, 1.5, 1.0), expect);
    }

    #[test]
    fn blowup_bound_worked_value() {
        // gamma=2, m=1, b=1, C0=1, c_hat=1, seed=-4: exponent 4/3 and
        // t* = (1/2)(2^(4/3) - 1)
        let lg = synthetic_ledger(2.0, 1);
        let t = lg.blowup_time_bound(-4.0).unwrap();
        assert_relative_eq!(t, 0.5 * (2.0f64.powf(4.0 / 3.0) - 1.0), max_relative = 1e-13);
        assert!(lg.blowup_time_bound(0.0).is_err());
        assert!(lg.blowup_time_bound(1.0).is_err());
    }

    #[test]
    fn blowup_bound_shrinks_to_zero_with_seed() {
        for (gamma, m) in [(1.4, 1u32), (2.0, 2), (2.5, 1)] {
            let lg = synthetic_ledger(gamma, m);
            let mut prev = f64::INFINITY;
            for k in 1..=8 {
                let t = lg.blowup_time_bound(-(10.0f64.powi(k))).unwrap();
                assert!(t > 0.0);
                assert!(t < prev, "t* must fall strictly: {t} !< {prev}");
                prev = t;
            }
            assert!(prev < 1e-3 * lg.b / lg.c0, "t*(-1e8) still {prev}");
        }
    }

    #[test]
    fn threshold_matches_hand_bisection() {
        // gamma=2: quadratic -(3/8)n^2 + n + 1 < 0 needs
        // n > (1 + sqrt(5/2))/(3/4) = 3.4415; the time condition needs
        // (1+4/n)^(4/3) < 3, i.e. n > 4/(3^(3/4)-1) = 3.126; the quadratic
        // root is the binding one
        let mut lg = synthetic_ledger(2.0, 1);
        lg.n_threshold = lg.compute_threshold();
        let quad_root = (1.0 + 2.5f64.sqrt()) / 0.75;
        let time_root = 4.0 / (3.0f64.powf(0.75) - 1.0);
        let expect = quad_root.max(time_root);
        assert_relative_eq!(lg.n_threshold, expect, max_relative = 2e-3);
        assert!(lg.admits_blowup(lg.n_threshold));
        assert!(!lg.admits_blowup(0.99 * lg.n_threshold));
    }

    #[test]
    fn threshold_relaxes_with_longer_horizons() {
        let mut prev = f64::INFINITY;
        for horizon in [0.25, 0.5, 1.0, 2.0] {
            let mut lg = synthetic_ledger(2.0, 1);
            lg.horizon = horizon;
            lg.n_threshold = lg.compute_threshold();
            assert!(lg.n_threshold <= prev + 1e-9);
            prev = lg.n_threshold;
        }
    }

    #[test]
    fn threshold_degrades_to_infinity_without_quadratic_help() {
        let mut lg = synthetic_ledger(2.0, 1);
        lg.h_tilde_min = 0.0;
        assert!(lg.compute_threshold().is_infinite());
    }

    #[test]
    fn supremum_routes_agree_across_the_parameter_grid() {
        for gamma in [1.4, 2.0, 2.5] {
            for m in [1u32, 2] {
                let p = params(gamma, 0.005, m);
                let (kc, cc) = box_suprema_closed(&p, 1.0, 1.0);
                let (ks, cs) = box_suprema_sampled(&p, 1.0, 1.0, 500, 2000);
                assert_relative_eq!(kc, ks, max_relative = SUPREMUM_TOLERANCE);
                assert_relative_eq!(cc, cs, max_relative = SUPREMUM_TOLERANCE);
            }
        }
    }

    #[test]
    fn assembled_ledger_is_finite_and_consistent() {
        let p = params(2.0, 0.005, 1);
        let spec = presets::CharacterSpec {
            rho_left: 1.0,
            u_left: 1.0,
            alpha0: 0.3,
            // strictly positive level: a zero level would let finite
            // difference noise in the sampled seed dip microscopically
            // negative
            beta0: 0.05,
            bump: None,
        };
        // short horizon: the general-route exponents are double
        // exponential in the horizon and underflow past T of about 0.7
        let sc = presets::rarefaction(p, 1.0, 4.0, 0.25, spec).unwrap();
        let lg = assemble_ledger(&sc, 2048).unwrap();
        for (name, v) in [
            ("m_b", lg.m_b),
            ("c_b", lg.c_b),
            ("k_hat", lg.k_hat),
            ("m_bar", lg.m_bar),
            ("m_bar_b", lg.m_bar_b),
            ("c_hat", lg.c_hat),
        ] {
            assert!(v.is_finite() && v > 0.0, "{name} should be a positive bound: {v}");
        }
        // rarefactive data: no negative seed, no finite blowup bound
        assert!(lg.seed_tilde >= 0.0);
        assert!(lg.t_star.is_none());
        // floors start at rho_bar and decay
        assert_relative_eq!(lg.density_floor_rarefaction(0.0), lg.rho_bar);
        assert!(lg.density_floor_rarefaction(0.5) < lg.rho_bar);
        assert!(lg.density_floor_general(0.5) <= lg.density_floor_rarefaction(0.5));
    }

    #[test]
    fn compressive_ledger_carries_its_own_blowup_bound() {
        let p = params(2.0, 0.005, 1);
        let spec = presets::CharacterSpec {
            rho_left: 1.0,
            u_left: 1.0,
            alpha0: 0.3,
            beta0: 0.05,
            bump: Some(presets::BumpSpec { amplitude: -40.0, center: 1.3, width: 0.004 }),
        };
        let (sc, seed) = presets::compressive(p, 1.0, 2.0, 1.0, spec).unwrap();
        let lg = assemble_ledger(&sc, 4096).unwrap();
        assert!(lg.seed_tilde < 0.0);
        assert_relative_eq!(lg.seed_tilde, seed, max_relative = 2e-2);
        let t_star = lg.t_star.unwrap();
        assert!(t_star > 0.0);
    }

    #[test]
    fn rarefaction_run_passes_every_check() {
        let p = params(2.0, 0.005, 1);
        let spec = presets::CharacterSpec {
            rho_left: 1.0,
            u_left: 1.0,
            alpha0: 0.3,
            beta0: 0.0,
            bump: None,
        };
        let sc = presets::rarefaction(p, 1.0, 4.0, 0.8, spec).unwrap();
        let lg = assemble_ledger(&sc, 2048).unwrap();
        let config = SolverConfig { cells: 200, snapshot_dt: 0.2, ..Default::default() };
        let record = run_scenario(&sc, config).unwrap();
        let report = verify_run(&record, &lg, 2.0, FloorKind::Rarefaction).unwrap();
        for c in &report.checks {
            assert!(
                c.passed,
                "{} failed with margin {} at {:?}",
                c.name, c.worst_margin, c.location
            );
        }
        assert!(report.check("character-floor").is_some());
        assert!(!report.character_extrema.is_empty());
    }

    #[test]
    fn doctored_density_is_caught() {
        let p = params(2.0, 0.005, 1);
        let spec = presets::CharacterSpec {
            rho_left: 1.0,
            u_left: 1.0,
            alpha0: 0.3,
            beta0: 0.0,
            bump: None,
        };
        let sc = presets::rarefaction(p, 1.0, 4.0, 0.4, spec).unwrap();
        let lg = assemble_ledger(&sc, 1024).unwrap();
        let config = SolverConfig { cells: 120, snapshot_dt: 0.1, ..Default::default() };
        let mut record = run_scenario(&sc, config).unwrap();
        // shrink one interior density far below any floor
        let last = record.snapshots.last_mut().unwrap();
        let radii = last.field.radii().to_vec();
        let mut states = last.field.states().to_vec();
        let mid = states.len() / 2;
        states[mid] = CellState::new(&p, 1e-6, states[mid].u).unwrap();
        last.field = FlowField::new(last.time, radii, states).unwrap();
        let report = verify_run(&record, &lg, 2.0, FloorKind::Rarefaction).unwrap();
        let density = report.check("density-floor-rarefaction").unwrap();
        assert!(!density.passed);
        assert!(density.violations >= 1);
        assert!(!report.all_passed());
    }

    #[test]
    fn calibrated_slack_is_positive_and_grid_linear() {
        let c = calibrate_character_slack(96).unwrap();
        assert!(c.is_finite() && c > 0.0);
        // the slack a run is checked against halves exactly under 2x
        // refinement because it is C * dr by construction
        let dr = 0.01;
        assert_relative_eq!(c * dr / 2.0, c * (dr / 2.0));
    }

    proptest! {
        /// The closed-form box supremum really dominates the coefficients
        /// at random admissible states, including radii beyond b.
        #[test]
        fn k_hat_dominates_random_states(
            gamma in 1.1f64..2.9,
            mi in 1u32..3,
            uf in 0.01f64..1.0,
            sf in 0.01f64..1.0,
            rf in 0.0f64..4.0,
        ) {
            let p = params(gamma, 0.01, mi);
            let b = 0.8;
            let c0 = 1.3;
            let (k_hat, c_b) = box_suprema_closed(&p, b, c0);
            let u = 2.0 * c0 * uf;
            let s = p.kappa() * sf;
            let r = b * (1.0 + rf);
            if let Ok(c) = riccati_coeffs(&p, r, s * u, u) {
                let worst = c.a1.max(c.a2).max(c.b1.abs()).max(c.b2.abs());
                prop_assert!(worst <= k_hat * (1.0 + 1e-9));
                let (c1, c2) = p.wave_speeds(s * u, u);
                let speed = (p.m() * u * u / (r * c1)).max(p.m() * u * u / (r * c2));
                prop_assert!(1.0 + speed <= c_b * (1.0 + 1e-9));
            }
        }

        /// Blowup bounds are positive and decreasing for negative seeds.
        #[test]
        fn blowup_bound_is_positive_and_monotone(
            gamma in 1.1f64..2.9,
            mi in 1u32..3,
            seed in -1e6f64..-1e-3,
        ) {
            let lg = synthetic_ledger(gamma, mi);
            let t = lg.blowup_time_bound(seed).unwrap();
            prop_assert!(t > 0.0);
            let t2 = lg.blowup_time_bound(seed * 2.0).unwrap();
            prop_assert!(t2 < t);
        }
    }
}
