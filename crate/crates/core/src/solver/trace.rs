//! Characteristic tracing and Riccati cross-validation on stored runs.
//!
//! A run record samples the flow on a fixed grid at snapshot times; this
//! module interpolates it bilinearly in `(r, t)`, integrates paths
//! `dr/dt = c_1` or `c_2` through it with a fixed-step RK4, and integrates
//! the Riccati equation for the character carried by that family along the
//! way, using the field-interpolated companion character as a coefficient.
//! Comparing the ODE result against the field-derived character along the
//! same path is a two-route consistency check: the two values come from
//! different discretizations (an ODE in time versus finite differences in
//! radius), so their agreement measures how faithfully the run resolves
//! the characteristic structure.

use super::RunRecord;
use crate::characters::{riccati_coeffs, riccati_rhs};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("record holds fewer than two snapshots")]
    TooFewSnapshots,
    #[error("trace left the sampled domain at r = {r}, t = {t}")]
    LeftDomain { r: f64, t: f64 },
    #[error("characters undefined along the path at r = {r}, t = {t}")]
    Undefined { r: f64, t: f64 },
    #[error("only {kept} of {total} comparison points lie in the trusted region")]
    Untrusted { kept: usize, total: usize },
}

/// Which characteristic family a path follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Slow family, `dr/dt = c1 = u - h`; carries `beta`.
    One,
    /// Fast family, `dr/dt = c2 = u + h`; carries `alpha`.
    Two,
}

/// Bilinear space-time interpolation over a run record.
pub struct FieldSampler<'a> {
    record: &'a RunRecord,
    times: Vec<f64>,
}

impl<'a> FieldSampler<'a> {
    pub fn new(record: &'a RunRecord) -> Result<Self, TraceError> {
        if record.snapshots.len() < 2 {
            return Err(TraceError::TooFewSnapshots);
        }
        let times: Vec<f64> = record.snapshots.iter().map(|s| s.time).collect();
        Ok(FieldSampler { record, times })
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn locate_time(&self, t: f64) -> (usize, f64) {
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let span = self.times[i + 1] - self.times[i];
        ((i), ((t - self.times[i]) / span).clamp(0.0, 1.0))
    }

    fn locate_radius(&self, r: f64) -> Option<(usize, f64)> {
        let radii = self.record.snapshots[0].field.radii();
        if r < radii[0] || r > radii[radii.len() - 1] {
            return None;
        }
        let j = radii.partition_point(|&x| x <= r).clamp(1, radii.len() - 1) - 1;
        let mu = (r - radii[j]) / (radii[j + 1] - radii[j]);
        Some((j, mu.clamp(0.0, 1.0)))
    }

    /// Interpolated `(rho, u, h)`; `h` is recomputed from the interpolated
    /// density so the state stays on the isentrope.
    pub fn state(&self, r: f64, t: f64) -> Option<(f64, f64, f64)> {
        let (i, lam) = self.locate_time(t);
        let (j, mu) = self.locate_radius(r)?;
        let pick = |si: usize, sj: usize| -> (f64, f64) {
            let s = &self.record.snapshots[si].field.states()[sj];
            (s.rho, s.u)
        };
        let blend = |a: (f64, f64), b: (f64, f64), w: f64| {
            (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1))
        };
        let lower = blend(pick(i, j), pick(i, j + 1), mu);
        let upper = blend(pick(i + 1, j), pick(i + 1, j + 1), mu);
        let (rho, u) = blend(lower, upper, lam);
        let h = self.record.params.sound_speed(rho).ok()?;
        Some((rho, u, h))
    }

    /// Interpolated `(alpha, beta)`; None when any corner is undefined.
    pub fn characters(&self, r: f64, t: f64) -> Option<(f64, f64)> {
        let (i, lam) = self.locate_time(t);
        let (j, mu) = self.locate_radius(r)?;
        let pick = |si: usize, sj: usize| -> Option<(f64, f64)> {
            self.record.snapshots[si].characters.values()[sj]
                .as_ref()
                .map(|c| (c.alpha, c.beta))
        };
        let blend = |a: (f64, f64), b: (f64, f64), w: f64| {
            (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1))
        };
        let lower = blend(pick(i, j)?, pick(i, j + 1)?, mu);
        let upper = blend(pick(i + 1, j)?, pick(i + 1, j + 1)?, mu);
        Some(blend(lower, upper, lam))
    }

    fn speed(&self, r: f64, t: f64, family: Family) -> Option<f64> {
        let (_, u, h) = self.state(r, t)?;
        Some(match family {
            Family::One => u - h,
            Family::Two => u + h,
        })
    }

    /// Is `(r, t)` safely right of the verified frontier?
    fn trusted(&self, r: f64, t: f64) -> bool {
        let cfg = &self.record.config;
        let dr = {
            let radii = self.record.snapshots[0].field.radii();
            radii[1] - radii[0]
        };
        let margin = cfg.cone_margin_cells.max(cfg.interface_margin_cells) as f64 * dr;
        r > self.record.frontier_at(t) + margin
    }
}

/// Integrate `dr/dt = c_family` from `(r0, t0)` to `t1` with `steps` RK4
/// steps; returns the sampled path including both endpoints.
pub fn trace_characteristic(
    record: &RunRecord,
    family: Family,
    r0: f64,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vec<(f64, f64)>, TraceError> {
    let sampler = FieldSampler::new(record)?;
    let steps = steps.max(1);
    let dt = (t1 - t0) / steps as f64;
    let mut path = Vec::with_capacity(steps + 1);
    let mut r = r0;
    let mut t = t0;
    path.push((t, r));
    let speed = |r: f64, t: f64| -> Result<f64, TraceError> {
        sampler.speed(r, t, family).ok_or(TraceError::LeftDomain { r, t })
    };
    for _ in 0..steps {
        let k1 = speed(r, t)?;
        let k2 = speed(r + 0.5 * dt * k1, t + 0.5 * dt)?;
        let k3 = speed(r + 0.5 * dt * k2, t + 0.5 * dt)?;
        let k4 = speed(r + dt * k3, t + dt)?;
        r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
        if sampler.locate_radius(r).is_none() {
            return Err(TraceError::LeftDomain { r, t });
        }
        path.push((t, r));
    }
    Ok(path)
}

/// Outcome of integrating the Riccati equation along one traced
/// characteristic and comparing against the field-derived character.
#[derive(Clone, Debug)]
pub struct RiccatiComparison {
    /// Max |ODE - field| over compared points, divided by `scale`.
    pub max_relative_deviation: f64,
    /// Max |field character| along the path (the normalization).
    pub scale: f64,
    pub compared_points: usize,
    /// The traced `(t, r)` path.
    pub path: Vec<(f64, f64)>,
    /// Character carried by the ODE at each path point.
    pub ode_values: Vec<f64>,
    /// Field-derived character at each path point; None where undefined
    /// or untrusted.
    pub field_values: Vec<Option<f64>>,
}

/// Trace one characteristic from `(r0, t_start)` to `t1` and integrate the
/// character it carries (`beta` for family 1, `alpha` for family 2) as an
/// ODE, reading state and companion character from the stored field. The
/// deviation from the field-derived character is compared only at trusted
/// points (right of the frontier); fewer than 60% trusted points is an
/// error rather than a silently thin comparison.
pub fn riccati_deviation(
    record: &RunRecord,
    family: Family,
    r0: f64,
    t1: f64,
    steps: usize,
) -> Result<RiccatiComparison, TraceError> {
    let sampler = FieldSampler::new(record)?;
    let params = record.params;
    let t0 = sampler.t_start();
    let steps = steps.max(2);
    let dt = (t1 - t0) / steps as f64;

    let rhs = |r: f64, t: f64, y: f64| -> Result<(f64, f64), TraceError> {
        let (_, u, h) = sampler.state(r, t).ok_or(TraceError::LeftDomain { r, t })?;
        let (alpha_f, beta_f) =
            sampler.characters(r, t).ok_or(TraceError::Undefined { r, t })?;
        let coeffs = riccati_coeffs(&params, r, h, u).map_err(|_| TraceError::Undefined { r, t })?;
        let (speed, dy) = match family {
            Family::One => {
                let (d1_beta, _) = riccati_rhs(&params, &coeffs, alpha_f, y);
                (u - h, d1_beta)
            }
            Family::Two => {
                let (_, d2_alpha) = riccati_rhs(&params, &coeffs, y, beta_f);
                (u + h, d2_alpha)
            }
        };
        Ok((speed, dy))
    };

    let field_value = |r: f64, t: f64| -> Option<f64> {
        let (a, b) = sampler.characters(r, t)?;
        Some(match family {
            Family::One => b,
            Family::Two => a,
        })
    };

    let mut r = r0;
    let mut t = t0;
    let mut y = field_value(r, t).ok_or(TraceError::Undefined { r, t })?;
    let mut path = vec![(t, r)];
    let mut ode_values = vec![y];
    let mut field_values = vec![Some(y)];
    let mut scale = y.abs();
    let mut max_dev = 0.0f64;
    let mut kept = 0usize;
    let mut total = 0usize;

    for _ in 0..steps {
        let (kr1, ky1) = rhs(r, t, y)?;
        let (kr2, ky2) = rhs(r + 0.5 * dt * kr1, t + 0.5 * dt, y + 0.5 * dt * ky1)?;
        let (kr3, ky3) = rhs(r + 0.5 * dt * kr2, t + 0.5 * dt, y + 0.5 * dt * ky2)?;
        let (kr4, ky4) = rhs(r + dt * kr3, t + dt, y + dt * ky3)?;
        r += dt / 6.0 * (kr1 + 2.0 * kr2 + 2.0 * kr3 + kr4);
        y += dt / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4);
        t += dt;
        if sampler.locate_radius(r).is_none() {
            return Err(TraceError::LeftDomain { r, t });
        }
        path.push((t, r));
        ode_values.push(y);
        total += 1;
        if sampler.trusted(r, t) {
            let f = field_value(r, t).ok_or(TraceError::Undefined { r, t })?;
            field_values.push(Some(f));
            scale = scale.max(f.abs());
            max_dev = max_dev.max((y - f).abs());
            kept += 1;
        } else {
            field_values.push(None);
        }
    }
    if kept * 10 < total * 6 {
        return Err(TraceError::Untrusted { kept, total });
    }
    let scale = scale.max(1e-30);
    Ok(RiccatiComparison {
        max_relative_deviation: max_dev / scale,
        scale,
        compared_points: kept,
        path,
        ode_values,
        field_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::AffineMotion;
    use crate::gas::{BoundaryMode, GasParams, InitialData, Scenario, Symmetry};
    use crate::solver::{run_scenario, SolverConfig};
    use approx::assert_relative_eq;

    /// A uniform supersonic state frozen in time, assembled by hand (a
    /// constant state is not steady under radial geometry, so a solver run
    /// would drift): characteristic paths through it are exact straight
    /// lines the RK4 must reproduce to round-off.
    fn uniform_record(rho: f64, u: f64) -> crate::solver::RunRecord {
        use crate::characters::CharacterField;
        use crate::gas::{CellState, FlowField};
        use crate::solver::{RunStatus, Snapshot};

        let p = GasParams::new(2.0, 0.02, Symmetry::Cylindrical).unwrap();
        let cells = 64usize;
        let (left, right) = (1.0, 8.0);
        let dr = (right - left) / cells as f64;
        let radii: Vec<f64> = (0..cells).map(|i| left + (i as f64 + 0.5) * dr).collect();
        let snapshots = (0..=4)
            .map(|k| {
                let t = 0.25 * k as f64;
                let states: Vec<CellState> =
                    radii.iter().map(|_| CellState::new(&p, rho, u).unwrap()).collect();
                let field = FlowField::new(t, radii.clone(), states).unwrap();
                let characters = CharacterField::from_flow_field(&p, &field, 0.0);
                Snapshot { time: t, frontier: left, first_active: 0, field, characters }
            })
            .collect();
        crate::solver::RunRecord {
            params: p,
            config: SolverConfig { cells, snapshot_dt: 0.25, ..Default::default() },
            grid_left: left,
            b: left,
            r_right: right,
            horizon: 1.0,
            c0: u,
            snapshots,
            status: RunStatus::Completed,
            boundary_mass_flux: (0.0, 0.0),
        }
    }

    #[test]
    fn traces_straight_lines_through_uniform_flow() {
        let rho = 1.0;
        let u = 1.0;
        let record = uniform_record(rho, u);
        let h = record.params.sound_speed(rho).unwrap();
        for (family, speed) in [(Family::One, u - h), (Family::Two, u + h)] {
            let path = trace_characteristic(&record, family, 2.0, 0.0, 1.0, 64).unwrap();
            let (t_end, r_end) = *path.last().unwrap();
            assert_relative_eq!(t_end, 1.0, epsilon = 1e-12);
            assert_relative_eq!(r_end, 2.0 + speed, max_relative = 1e-10);
        }
    }

    #[test]
    fn leaving_the_domain_is_an_error() {
        let record = uniform_record(1.0, 2.0);
        let err = trace_characteristic(&record, Family::Two, 7.5, 0.0, 1.0, 64);
        assert!(matches!(err, Err(TraceError::LeftDomain { .. })));
    }

    #[test]
    fn riccati_route_agrees_with_field_route_on_exact_flow() {
        // window strictly inside an affine patch, exact ghosts on both
        // sides: every cell is trusted and the field is smooth
        let p = GasParams::new(2.0, 1.0, Symmetry::Cylindrical).unwrap();
        let motion = AffineMotion::new(p, 1.0, 3.0, 1.0, 0.2).unwrap();
        let data = motion.clone();
        let init = InitialData::from_fn(move |r| {
            let rho = data.initial_profile(r).unwrap();
            (rho, 3.0 * r)
        });
        let sc = Scenario::new(
            p,
            0.4,
            0.95,
            0.12,
            3.0 * 0.95,
            BoundaryMode::AffineDirichlet(motion),
            init,
        )
        .unwrap();
        let config = SolverConfig {
            cells: 320,
            snapshot_dt: 0.006,
            waive_assumptions: true,
            ..Default::default()
        };
        let record = run_scenario(&sc, config).unwrap();
        // start clear of the sonic radius near r = 0.46, where the slow
        // family's characters grow like 1/c1
        for (family, r0) in [(Family::One, 0.6), (Family::Two, 0.55)] {
            let cmp = riccati_deviation(&record, family, r0, 0.12, 600).unwrap();
            assert!(
                cmp.max_relative_deviation < 0.03,
                "{:?} deviation too large: {}",
                family,
                cmp.max_relative_deviation
            );
            assert!(cmp.compared_points > 500);
        }
    }
}
