//! Run-directory layout and the round trip back from disk.
//!
//! ```text
//! out/
//!   manifest.txt            key = value pairs, written atomically
//!   verification.txt        one line per check
//!   snapshots/snap-0000.csv r,rho,u,h,w,z,c1,c2,alpha,beta
//!   traces/char-one.csv     t,r along the slow characteristic
//!   traces/char-two.csv     t,r along the fast characteristic
//! ```
//!
//! Data files hold no timestamps and are written in a fixed order, so a
//! repeated run produces byte-identical bytes; wall-clock timing lives
//! only in the manifest. Floats go through the shortest round-tripping
//! decimal form, which lets `verify` rebuild the exact stored states.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use rcwave_core::characters::CharacterField;
use rcwave_core::solver::{
    trace_characteristic, BlowupEvent, BlowupKind, Family, RunStatus, Snapshot, SourceTreatment,
};
use rcwave_core::verify::{BoundLedger, FloorKind, RunReport};
use rcwave_core::{CellState, FlowField, GasParams, RunRecord, SolverConfig, Symmetry};

use crate::config::{ceiling_to_string, parse_ceiling};

/// How a finished run measures against the ledger's claims. Computed once
/// and echoed into the manifest so a reader does not have to redo the
/// threshold comparisons.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub exit_code: i32,
    /// Present when the run blew up: did the ledger predict it?
    pub blowup_expected: Option<bool>,
    /// Present when the run blew up and a time bound exists.
    pub blowup_within_bound: Option<bool>,
    pub notes: Vec<String>,
}

/// Everything the writer needs to lay down one run directory.
pub struct RunArtifacts<'a> {
    pub preset: &'a str,
    pub hash: u64,
    pub assumptions_waived: bool,
    pub initial_echo: &'a [(String, String)],
    pub record: &'a RunRecord,
    pub ledger: &'a BoundLedger,
    pub report: &'a RunReport,
    pub slack_per_dr: f64,
    pub floor: FloorKind,
    pub ledger_samples: usize,
    pub verdict: &'a Verdict,
    pub wall_seconds: f64,
}

pub fn floor_to_string(floor: FloorKind) -> &'static str {
    match floor {
        FloorKind::Rarefaction => "rarefaction",
        FloorKind::General => "general",
    }
}

fn parse_floor(s: &str) -> Result<FloorKind> {
    match s {
        "rarefaction" => Ok(FloorKind::Rarefaction),
        "general" => Ok(FloorKind::General),
        other => bail!("unknown floor kind {other:?}"),
    }
}

pub fn blowup_kind_str(kind: BlowupKind) -> &'static str {
    match kind {
        BlowupKind::GradientBlowup => "gradient",
        BlowupKind::StepUnderflow => "step-underflow",
        BlowupKind::NonPhysicalState => "non-physical",
    }
}

fn parse_blowup_kind(s: &str) -> Result<BlowupKind> {
    match s {
        "gradient" => Ok(BlowupKind::GradientBlowup),
        "step-underflow" => Ok(BlowupKind::StepUnderflow),
        "non-physical" => Ok(BlowupKind::NonPhysicalState),
        other => bail!("unknown blowup kind {other:?}"),
    }
}

/// Write snapshots, traces, the verification report, and finally the
/// manifest. The manifest goes last and lands via rename, so a directory
/// with a manifest in it is always a complete one.
pub fn write_run_dir(dir: &Path, art: &RunArtifacts) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))
        .with_context(|| format!("creating {}", dir.display()))?;
    for (i, snap) in art.record.snapshots.iter().enumerate() {
        let path = dir.join("snapshots").join(format!("snap-{i:04}.csv"));
        write_snapshot_csv(&path, snap).with_context(|| format!("writing {}", path.display()))?;
    }
    let trace_notes = write_traces(dir, art.record)?;
    write_verification_report(&dir.join("verification.txt"), art)?;

    let lines = manifest_lines(art, &trace_notes);
    let tmp = dir.join("manifest.txt.tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        for (key, value) in &lines {
            writeln!(out, "{key} = {value}")?;
        }
        out.flush()?;
    }
    fs::rename(&tmp, dir.join("manifest.txt"))?;
    Ok(())
}

fn write_snapshot_csv(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "# time={} frontier={} first_active={}",
        snap.time, snap.frontier, snap.first_active
    )?;
    writeln!(out, "r,rho,u,h,w,z,c1,c2,alpha,beta")?;
    for (i, (&r, s)) in snap.field.radii().iter().zip(snap.field.states()).enumerate() {
        let (alpha, beta) = match &snap.characters.values()[i] {
            Some(v) => (v.alpha, v.beta),
            None => (f64::NAN, f64::NAN),
        };
        writeln!(
            out,
            "{r},{},{},{},{},{},{},{},{alpha},{beta}",
            s.rho, s.u, s.h, s.w, s.z, s.c1, s.c2
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Both characteristic families traced from the middle of the study
/// region. A trace that runs out of the sampled domain is skipped with a
/// note instead of failing the run.
fn write_traces(dir: &Path, record: &RunRecord) -> Result<[String; 2]> {
    fs::create_dir_all(dir.join("traces"))?;
    let r0 = 0.5 * (record.b + record.r_right);
    let t1 = record.final_time();
    let mut notes = [String::new(), String::new()];
    for (k, (family, name)) in
        [(Family::One, "char-one.csv"), (Family::Two, "char-two.csv")].into_iter().enumerate()
    {
        match trace_characteristic(record, family, r0, 0.0, t1, 256) {
            Ok(points) => {
                let path = dir.join("traces").join(name);
                let mut out = BufWriter::new(File::create(&path)?);
                writeln!(out, "t,r")?;
                for (t, r) in points {
                    writeln!(out, "{t},{r}")?;
                }
                out.flush()?;
                notes[k] = "ok".into();
            }
            Err(e) => notes[k] = format!("skipped: {e}"),
        }
    }
    Ok(notes)
}

fn write_verification_report(path: &Path, art: &RunArtifacts) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for c in &art.report.checks {
        let state = if c.passed { "pass" } else { "FAIL" };
        let at = c
            .location
            .map_or_else(|| "none".into(), |(r, t)| format!("r={r} t={t}"));
        writeln!(
            out,
            "check {}: {state}, worst margin {} at {at}, violations {}",
            c.name, c.worst_margin, c.violations
        )?;
    }
    writeln!(out, "character cap {}", art.report.character_cap)?;
    writeln!(out, "character slack {} per run", art.report.eps_grid)?;
    for note in &art.verdict.notes {
        writeln!(out, "note: {note}")?;
    }
    let passed = art.report.checks.iter().filter(|c| c.passed).count();
    writeln!(out, "result: {passed}/{} checks passed", art.report.checks.len())?;
    out.flush()?;
    Ok(())
}

fn manifest_lines(art: &RunArtifacts, trace_notes: &[String; 2]) -> Vec<(String, String)> {
    let mut lines: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| lines.push((k.to_string(), v));

    let rec = art.record;
    let p = &rec.params;
    put("scenario.hash", format!("{:016x}", art.hash));
    put("scenario.preset", art.preset.to_string());
    put("assumptions_waived", art.assumptions_waived.to_string());
    put("gas.gamma", p.gamma().to_string());
    put("gas.entropy_k", p.entropy_k().to_string());
    put("gas.symmetry", format!("{}", p.m() as u32));
    put("domain.grid_left", rec.grid_left.to_string());
    put("domain.b", rec.b.to_string());
    put("domain.r_right", rec.r_right.to_string());
    put("domain.horizon", rec.horizon.to_string());
    put("domain.c0", rec.c0.to_string());
    for (key, value) in art.initial_echo {
        put(&format!("initial.{key}"), value.clone());
    }
    let s = &rec.config;
    put("solver.cells", s.cells.to_string());
    put("solver.cfl", s.cfl.to_string());
    put("solver.theta", s.theta.to_string());
    put("solver.order", s.order.to_string());
    put(
        "solver.source_split",
        match s.source_split {
            SourceTreatment::Unsplit => "unsplit".into(),
            SourceTreatment::StrangSplit => "strang".into(),
        },
    );
    put("solver.snapshot_dt", s.snapshot_dt.to_string());
    put("solver.gradient_ceiling", ceiling_to_string(s.gradient_ceiling));
    put("solver.cone_margin_cells", s.cone_margin_cells.to_string());
    put("solver.interface_margin_cells", s.interface_margin_cells.to_string());
    put("solver.bar_tilt", s.bar_tilt.to_string());
    put("solver.max_steps", s.max_steps.to_string());
    put("verify.samples", art.ledger_samples.to_string());
    put("verify.slack_per_dr", art.slack_per_dr.to_string());
    put("verify.floor", floor_to_string(art.floor).to_string());

    let l = art.ledger;
    put("ledger.m0", l.m0.to_string());
    put("ledger.m0_abs", l.m0_abs.to_string());
    put("ledger.m_hyp", l.m_hyp.to_string());
    put("ledger.rho_bar", l.rho_bar.to_string());
    put("ledger.seed_tilde", l.seed_tilde.to_string());
    put("ledger.k_hat", l.k_hat.to_string());
    put("ledger.c_b", l.c_b.to_string());
    put("ledger.m_b", l.m_b.to_string());
    put("ledger.m_bar", l.m_bar.to_string());
    put("ledger.m_bar_b", l.m_bar_b.to_string());
    put("ledger.c_hat", l.c_hat.to_string());
    put("ledger.h_tilde_min", l.h_tilde_min.to_string());
    put("ledger.a_tilde_max", l.a_tilde_max.to_string());
    put("ledger.t_star", l.t_star.map_or_else(|| "none".into(), |t| t.to_string()));
    put("ledger.n_threshold", l.n_threshold.to_string());

    match rec.blowup() {
        None => put("run.termination", "horizon reached".into()),
        Some(e) => {
            put("run.termination", "blowup".into());
            put("run.blowup_time", e.time.to_string());
            put("run.blowup_radius", e.radius.to_string());
            put("run.blowup_kind", blowup_kind_str(e.kind).into());
        }
    }
    put("run.final_time", rec.final_time().to_string());
    put("run.snapshots", rec.snapshots.len().to_string());
    put("run.mass_flux_left", rec.boundary_mass_flux.0.to_string());
    put("run.mass_flux_right", rec.boundary_mass_flux.1.to_string());
    put("run.wall_clock_seconds", format!("{:.3}", art.wall_seconds));
    put("trace.one", trace_notes[0].clone());
    put("trace.two", trace_notes[1].clone());

    for c in &art.report.checks {
        let at = c
            .location
            .map_or_else(|| "none".into(), |(r, t)| format!("r={r} t={t}"));
        put(
            &format!("check.{}", c.name),
            format!(
                "{} worst={} at {at} violations={}",
                if c.passed { "pass" } else { "fail" },
                c.worst_margin,
                c.violations
            ),
        );
    }
    let passed = art.report.checks.iter().filter(|c| c.passed).count();
    put("verification.checks_passed", format!("{passed}/{}", art.report.checks.len()));
    put("verification.all_passed", art.report.all_passed().to_string());
    put("verification.eps_grid", art.report.eps_grid.to_string());
    put("verification.character_cap", art.report.character_cap.to_string());
    if let Some(expected) = art.verdict.blowup_expected {
        put("blowup.expected", expected.to_string());
    }
    if let Some(within) = art.verdict.blowup_within_bound {
        put("blowup.within_bound", within.to_string());
    }
    put("exit.code", art.verdict.exit_code.to_string());
    lines
}

pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once(" = ") else {
            bail!("{}:{}: expected `key = value`", path.display(), lineno + 1);
        };
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

/// A run directory pulled back into memory: enough to replay verification
/// against the stored snapshots.
pub struct StoredRun {
    pub record: RunRecord,
    pub ledger: BoundLedger,
    pub slack_per_dr: f64,
    pub floor: FloorKind,
}

pub fn load_run_dir(dir: &Path) -> Result<StoredRun> {
    let manifest = read_manifest(&dir.join("manifest.txt"))?;
    let get = |key: &str| -> Result<&str> {
        manifest.get(key).map(String::as_str).ok_or_else(|| anyhow!("manifest missing {key}"))
    };
    let fget = |key: &str| -> Result<f64> {
        get(key)?.parse::<f64>().map_err(|e| anyhow!("manifest {key}: {e}"))
    };
    let uget = |key: &str| -> Result<usize> {
        get(key)?.parse::<usize>().map_err(|e| anyhow!("manifest {key}: {e}"))
    };

    let symmetry = Symmetry::from_index(
        get("gas.symmetry")?.parse::<u32>().map_err(|e| anyhow!("manifest gas.symmetry: {e}"))?,
    )?;
    let params = GasParams::new(fget("gas.gamma")?, fget("gas.entropy_k")?, symmetry)?;

    let config = SolverConfig {
        cells: uget("solver.cells")?,
        cfl: fget("solver.cfl")?,
        theta: fget("solver.theta")?,
        order: uget("solver.order")? as u8,
        source_split: match get("solver.source_split")? {
            "unsplit" => SourceTreatment::Unsplit,
            "strang" => SourceTreatment::StrangSplit,
            other => bail!("manifest solver.source_split: unknown value {other:?}"),
        },
        snapshot_dt: fget("solver.snapshot_dt")?,
        gradient_ceiling: parse_ceiling(get("solver.gradient_ceiling")?)
            .map_err(|e| anyhow!("manifest solver.gradient_ceiling: {e}"))?,
        cone_margin_cells: uget("solver.cone_margin_cells")?,
        interface_margin_cells: uget("solver.interface_margin_cells")?,
        bar_tilt: fget("solver.bar_tilt")?,
        waive_assumptions: get("assumptions_waived")? == "true",
        max_steps: uget("solver.max_steps")?,
    };

    let snapshots = read_snapshots(&dir.join("snapshots"), &params, config.bar_tilt)?;
    let declared = uget("run.snapshots")?;
    if snapshots.len() != declared {
        bail!("manifest records {declared} snapshots, directory holds {}", snapshots.len());
    }
    if snapshots.is_empty() {
        bail!("run directory holds no snapshots");
    }

    let status = match get("run.termination")? {
        "blowup" => RunStatus::Blowup(BlowupEvent {
            time: fget("run.blowup_time")?,
            radius: fget("run.blowup_radius")?,
            kind: parse_blowup_kind(get("run.blowup_kind")?)?,
        }),
        _ => RunStatus::Completed,
    };

    let t_star = match get("ledger.t_star")? {
        "none" => None,
        v => Some(v.parse::<f64>().map_err(|e| anyhow!("manifest ledger.t_star: {e}"))?),
    };
    let ledger = BoundLedger {
        params,
        b: fget("domain.b")?,
        horizon: fget("domain.horizon")?,
        c0: fget("domain.c0")?,
        m0: fget("ledger.m0")?,
        m0_abs: fget("ledger.m0_abs")?,
        m_hyp: fget("ledger.m_hyp")?,
        rho_bar: fget("ledger.rho_bar")?,
        seed_tilde: fget("ledger.seed_tilde")?,
        k_hat: fget("ledger.k_hat")?,
        c_b: fget("ledger.c_b")?,
        m_b: fget("ledger.m_b")?,
        m_bar: fget("ledger.m_bar")?,
        m_bar_b: fget("ledger.m_bar_b")?,
        c_hat: fget("ledger.c_hat")?,
        h_tilde_min: fget("ledger.h_tilde_min")?,
        a_tilde_max: fget("ledger.a_tilde_max")?,
        t_star,
        n_threshold: fget("ledger.n_threshold")?,
    };

    let record = RunRecord {
        params,
        config,
        grid_left: fget("domain.grid_left")?,
        b: ledger.b,
        r_right: fget("domain.r_right")?,
        horizon: ledger.horizon,
        c0: ledger.c0,
        snapshots,
        status,
        boundary_mass_flux: (fget("run.mass_flux_left")?, fget("run.mass_flux_right")?),
    };

    let slack_per_dr = fget("verify.slack_per_dr")?;
    let floor = parse_floor(get("verify.floor")?)?;
    Ok(StoredRun { record, ledger, slack_per_dr, floor })
}

fn read_snapshots(dir: &Path, params: &GasParams, bar_tilt: f64) -> Result<Vec<Snapshot>> {
    let mut indexed: Vec<(usize, std::path::PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let Some(index) = name
            .strip_prefix("snap-")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        else {
            continue;
        };
        indexed.push((index, path));
    }
    indexed.sort_by_key(|(i, _)| *i);
    indexed
        .into_iter()
        .map(|(_, path)| {
            read_snapshot_csv(&path, params, bar_tilt)
                .with_context(|| format!("reading {}", path.display()))
        })
        .collect()
}

/// Rebuild one snapshot. Only `r`, `rho`, `u` are read back; the rest of
/// the state and the characters are recomputed, so doctoring a derived
/// column cannot mask a primitive one.
fn read_snapshot_csv(path: &Path, params: &GasParams, bar_tilt: f64) -> Result<Snapshot> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty snapshot file"))?;
    let mut time = None;
    let mut frontier = None;
    let mut first_active = None;
    for piece in header.trim_start_matches('#').split_whitespace() {
        let Some((key, value)) = piece.split_once('=') else { continue };
        match key {
            "time" => time = Some(value.parse::<f64>()?),
            "frontier" => frontier = Some(value.parse::<f64>()?),
            "first_active" => first_active = Some(value.parse::<usize>()?),
            _ => {}
        }
    }
    let (Some(time), Some(frontier), Some(first_active)) = (time, frontier, first_active) else {
        bail!("snapshot header lacks time/frontier/first_active: {header:?}");
    };
    lines.next(); // column names

    let mut radii = Vec::new();
    let mut states = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut next = || -> Result<f64> {
            cols.next()
                .ok_or_else(|| anyhow!("row {}: too few columns", lineno + 3))?
                .parse::<f64>()
                .map_err(|e| anyhow!("row {}: {e}", lineno + 3))
        };
        let r = next()?;
        let rho = next()?;
        let u = next()?;
        radii.push(r);
        states.push(CellState::new(params, rho, u)?);
    }
    let field = FlowField::new(time, radii, states)?;
    let characters = CharacterField::from_flow_field(params, &field, bar_tilt * time);
    Ok(Snapshot { time, frontier, first_active, field, characters })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lines_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        fs::write(&path, "a.b = 1\n# comment\nc.d = two words\n").unwrap();
        let map = read_manifest(&path).unwrap();
        assert_eq!(map["a.b"], "1");
        assert_eq!(map["c.d"], "two words");
        assert!(read_manifest(&dir.path().join("missing.txt")).is_err());
    }

    #[test]
    fn blowup_kind_strings_round_trip() {
        for kind in
            [BlowupKind::GradientBlowup, BlowupKind::StepUnderflow, BlowupKind::NonPhysicalState]
        {
            assert_eq!(parse_blowup_kind(blowup_kind_str(kind)).unwrap(), kind);
        }
        assert!(parse_blowup_kind("sideways").is_err());
    }
}
