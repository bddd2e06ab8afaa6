//! The four verbs. `run` executes and verifies one scenario, `sweep` runs
//! a grid of parameter overrides, `verify` replays the checks on a stored
//! run directory, and `affine` reports on the exact affine core alone.
//!
//! Exit codes, shared by all verbs: 0 when everything claimed holds, 2
//! when a verification claim fails, 3 when the solver dies, 4 for broken
//! configs and I/O trouble (the error path out of `main`).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::Deserialize;

use rcwave_core::affine::{check_admissibility, interface_conclusions};
use rcwave_core::solver::run_scenario;
use rcwave_core::verify::{
    assemble_ledger, calibrate_character_slack, verify_run, BoundLedger, RunReport,
};
use rcwave_core::{GasParams, RunRecord, Symmetry};

use crate::artifacts::{self, floor_to_string, RunArtifacts, Verdict};
use crate::config::Config;

/// Decide the exit code for a finished, verified run.
///
/// A blowup is acceptable only when the seed clears the compression
/// threshold and the event lands within the time bound; reaching the
/// horizon is acceptable only when no blowup was promised. Cellwise check
/// failures always fail the run.
pub fn judge(record: &RunRecord, ledger: &BoundLedger, report: &RunReport) -> Verdict {
    let mut notes = Vec::new();
    let mut pass = report.all_passed();
    if !pass {
        for c in report.checks.iter().filter(|c| !c.passed) {
            notes.push(format!("check {} failed in {} cells", c.name, c.violations));
        }
    }

    // the admitting seeds form an interval, so clearing the threshold is
    // the same test the ledger itself applies
    let expected = ledger.seed_tilde < 0.0 && -ledger.seed_tilde >= ledger.n_threshold;
    let mut blowup_expected = None;
    let mut blowup_within = None;
    match record.blowup() {
        Some(event) => {
            blowup_expected = Some(expected);
            match ledger.t_star {
                Some(t_star) => {
                    let within = event.time <= t_star;
                    blowup_within = Some(within);
                    if expected && !within {
                        pass = false;
                        notes.push(format!(
                            "blowup at t = {} misses the bound t* = {t_star}",
                            event.time
                        ));
                    } else if expected {
                        notes.push(format!(
                            "blowup at t = {} within the bound t* = {t_star}",
                            event.time
                        ));
                    } else {
                        notes.push(
                            "seed below the compression threshold: no blowup promised, none ruled \
                             out"
                            .into(),
                        );
                    }
                }
                None => {
                    pass = false;
                    notes.push(
                        "blowup despite nonnegative initial characters, contradicting the global \
                         claim"
                            .into(),
                    );
                }
            }
        }
        None => {
            if expected {
                let t_star = ledger.t_star.unwrap_or(f64::INFINITY);
                if record.final_time() >= t_star {
                    pass = false;
                    notes.push(format!(
                        "run reached t = {} without the blowup promised by t* = {t_star}",
                        record.final_time()
                    ));
                }
            }
        }
    }
    Verdict {
        exit_code: if pass { 0 } else { 2 },
        blowup_expected,
        blowup_within_bound: blowup_within,
        notes,
    }
}

/// Character-sign slack per cell width, calibrated once per process
/// against the exact-window fixture; configs can override it.
fn default_slack() -> Result<f64> {
    static SLACK: OnceLock<f64> = OnceLock::new();
    if let Some(s) = SLACK.get() {
        return Ok(*s);
    }
    let s = calibrate_character_slack(96).map_err(|e| anyhow!("slack calibration: {e}"))?;
    Ok(*SLACK.get_or_init(|| s))
}

pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub waive: bool,
    pub refine: u32,
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let cfg = Config::load(&args.config)?;
    let code = run_one(&cfg, args.waive, args.refine, &args.out, true)?;
    Ok(code)
}

/// Build, run, verify, and write one run directory. Returns the exit code
/// it would give; `Err` means config or I/O trouble (exit 4 upstream).
fn run_one(cfg: &Config, waive: bool, refine: u32, out: &Path, chatty: bool) -> Result<i32> {
    let started = Instant::now();
    let mut built = cfg.build(waive)?;
    if refine == 0 {
        anyhow::bail!("--refine: the multiplier must be at least 1");
    }
    built.solver.cells *= refine as usize;

    let ledger = assemble_ledger(&built.scenario, built.ledger_samples)
        .map_err(|e| anyhow!("assembling the bound ledger: {e}"))?;
    let slack_per_dr = match built.slack_per_dr {
        Some(s) => s,
        None => default_slack()?,
    };

    let record = match run_scenario(&built.scenario, built.solver) {
        Ok(record) => record,
        Err(e) => {
            eprintln!("solver error: {e}");
            return Ok(3);
        }
    };
    let report = verify_run(&record, &ledger, slack_per_dr, built.floor)
        .map_err(|e| anyhow!("verifying the run: {e}"))?;
    let verdict = judge(&record, &ledger, &report);

    let initial_echo = cfg.initial_echo();
    artifacts::write_run_dir(
        out,
        &RunArtifacts {
            preset: built.preset.as_str(),
            hash: built.hash,
            assumptions_waived: built.assumptions_waived,
            initial_echo: &initial_echo,
            record: &record,
            ledger: &ledger,
            report: &report,
            slack_per_dr,
            floor: built.floor,
            ledger_samples: built.ledger_samples,
            verdict: &verdict,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )?;

    if chatty {
        let termination = match record.blowup() {
            None => format!("horizon reached at t = {}", record.final_time()),
            Some(e) => format!(
                "blowup ({}) at t = {}, r = {}",
                artifacts::blowup_kind_str(e.kind),
                e.time,
                e.radius
            ),
        };
        let passed = report.checks.iter().filter(|c| c.passed).count();
        println!(
            "{} preset, {} cells, floor {}: {termination}",
            built.preset.as_str(),
            built.solver.cells,
            floor_to_string(built.floor),
        );
        println!("checks: {passed}/{} passed", report.checks.len());
        for note in &verdict.notes {
            println!("note: {note}");
        }
        println!("run directory: {}", out.display());
    }
    Ok(verdict.exit_code)
}

pub fn cmd_verify(dir: &Path) -> Result<i32> {
    let stored = artifacts::load_run_dir(dir)?;
    let report = verify_run(&stored.record, &stored.ledger, stored.slack_per_dr, stored.floor)
        .map_err(|e| anyhow!("verifying stored run: {e}"))?;
    let verdict = judge(&stored.record, &stored.ledger, &report);
    for c in &report.checks {
        println!(
            "check {}: {}, worst margin {}, violations {}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.worst_margin,
            c.violations
        );
    }
    for note in &verdict.notes {
        println!("note: {note}");
    }
    println!("verdict: exit {}", verdict.exit_code);
    Ok(verdict.exit_code)
}

pub struct SweepArgs {
    pub config: PathBuf,
    pub grid: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
    pub waive: bool,
}

/// One sweep point: overrides applied on top of the base config. Keys
/// mirror the config sections they override.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridCell {
    gamma: Option<f64>,
    entropy_k: Option<f64>,
    symmetry: Option<u32>,
    b: Option<f64>,
    r_right: Option<f64>,
    horizon: Option<f64>,
    rho_left: Option<f64>,
    u_left: Option<f64>,
    alpha0: Option<f64>,
    beta0: Option<f64>,
    bump_amplitude: Option<f64>,
    bump_center: Option<f64>,
    bump_width: Option<f64>,
    target_seed: Option<f64>,
    rho_c: Option<f64>,
    v_a: Option<f64>,
    u_slope: Option<f64>,
    h_slope: Option<f64>,
    solver_cells: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    cells: Vec<GridCell>,
}

impl GridCell {
    fn apply(&self, base: &Config) -> Config {
        let mut cfg = base.clone();
        macro_rules! set {
            ($target:expr, $field:ident) => {
                if let Some(v) = self.$field {
                    $target = v;
                }
            };
        }
        set!(cfg.gas.gamma, gamma);
        set!(cfg.gas.entropy_k, entropy_k);
        set!(cfg.gas.symmetry, symmetry);
        set!(cfg.domain.b, b);
        set!(cfg.domain.r_right, r_right);
        set!(cfg.domain.horizon, horizon);
        set!(cfg.solver.cells, solver_cells);
        macro_rules! set_opt {
            ($field:ident) => {
                if self.$field.is_some() {
                    cfg.initial.$field = self.$field;
                }
            };
        }
        set_opt!(rho_left);
        set_opt!(u_left);
        set_opt!(alpha0);
        set_opt!(beta0);
        set_opt!(bump_amplitude);
        set_opt!(bump_center);
        set_opt!(bump_width);
        set_opt!(target_seed);
        set_opt!(rho_c);
        set_opt!(v_a);
        set_opt!(u_slope);
        set_opt!(h_slope);
        cfg
    }
}

/// One aggregated row. Missing quantities (a cell that failed to build,
/// a run without a blowup) print as nan so the table keeps its shape.
struct SweepRow {
    gamma: f64,
    m: u32,
    b: f64,
    c0: f64,
    seed: f64,
    observed_blowup_time: f64,
    t_star: f64,
    n_threshold: f64,
    floors_ok: bool,
    signs_ok: bool,
    exit_code: i32,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let base = Config::load(&args.config)?;
    let text = fs::read_to_string(&args.grid)
        .with_context(|| format!("reading grid {}", args.grid.display()))?;
    let grid: GridFile =
        toml::from_str(&text).with_context(|| format!("parsing grid {}", args.grid.display()))?;

    fs::create_dir_all(&args.out)?;
    // calibrate before forking so the worker threads share the cached value
    if base.verify.slack_per_dr.is_none() {
        default_slack()?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .map_err(|e| anyhow!("building worker pool: {e}"))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        grid.cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| run_cell(&base, cell, i, args))
            .collect()
    });

    let table = args.out.join("sweep.csv");
    let mut out = std::io::BufWriter::new(fs::File::create(&table)?);
    writeln!(
        out,
        "gamma,m,b,C0,seed,observed_blowup_time,t_star,N_threshold,floors_ok,signs_ok"
    )?;
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.gamma,
            row.m,
            row.b,
            row.c0,
            row.seed,
            row.observed_blowup_time,
            row.t_star,
            row.n_threshold,
            row.floors_ok,
            row.signs_ok
        )?;
    }
    out.flush()?;

    let failures = rows.iter().filter(|r| r.exit_code != 0).count();
    println!("sweep: {} cells, {} failed, table at {}", rows.len(), failures, table.display());
    Ok(if failures == 0 { 0 } else { 2 })
}

fn run_cell(base: &Config, cell: &GridCell, index: usize, args: &SweepArgs) -> SweepRow {
    let cfg = cell.apply(base);
    let dir = args.out.join(format!("cell-{index:03}"));
    let mut row = SweepRow {
        gamma: cfg.gas.gamma,
        m: cfg.gas.symmetry,
        b: cfg.domain.b,
        c0: f64::NAN,
        seed: f64::NAN,
        observed_blowup_time: f64::NAN,
        t_star: f64::NAN,
        n_threshold: f64::NAN,
        floors_ok: false,
        signs_ok: false,
        exit_code: 4,
    };
    match run_cell_inner(&cfg, args.waive, &dir) {
        Ok((code, filled)) => {
            row = SweepRow { exit_code: code, ..filled };
        }
        Err(e) => {
            let _ = fs::create_dir_all(&dir);
            let _ = fs::write(dir.join("error.txt"), format!("{e:#}\n"));
            eprintln!("cell {index}: {e:#}");
        }
    }
    row
}

fn run_cell_inner(cfg: &Config, waive: bool, dir: &Path) -> Result<(i32, SweepRow)> {
    let code = run_one(cfg, waive, 1, dir, false)?;
    // pull the aggregate quantities back out of the freshly written manifest
    let manifest = artifacts::read_manifest(&dir.join("manifest.txt"))?;
    let fget = |key: &str| -> f64 {
        manifest.get(key).and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN)
    };
    let check_ok = |key: &str| -> bool {
        manifest.get(key).map_or(false, |v| v.starts_with("pass"))
    };
    let floors_ok = check_ok("check.density-floor-rarefaction")
        || check_ok("check.density-floor-general");
    let signs_ok = manifest
        .iter()
        .filter(|(k, _)| k.starts_with("check.") && !k.starts_with("check.density-floor"))
        .all(|(_, v)| v.starts_with("pass"));
    Ok((
        code,
        SweepRow {
            gamma: fget("gas.gamma"),
            m: fget("gas.symmetry") as u32,
            b: fget("domain.b"),
            c0: fget("domain.c0"),
            seed: fget("ledger.seed_tilde"),
            observed_blowup_time: fget("run.blowup_time"),
            t_star: fget("ledger.t_star"),
            n_threshold: fget("ledger.n_threshold"),
            floors_ok,
            signs_ok,
            exit_code: code,
        },
    ))
}

pub struct AffineArgs {
    pub gamma: f64,
    pub entropy_k: f64,
    pub symmetry: u32,
    pub rho_c: f64,
    pub v_a: f64,
    pub b: f64,
    pub horizon: f64,
    pub out: Option<PathBuf>,
}

/// Names for the three expansion-speed thresholds, in the order the
/// admissibility report stores them.
pub const AFFINE_CONDITION_NAMES: [&str; 3] = [
    "outgoing character stays nonnegative",
    "interface stays supersonic",
    "slow wave keeps moving outward",
];

pub fn cmd_affine(args: &AffineArgs) -> Result<i32> {
    let params = GasParams::new(
        args.gamma,
        args.entropy_k,
        Symmetry::from_index(args.symmetry).map_err(|e| anyhow!("--symmetry: {e}"))?,
    )
    .map_err(|e| anyhow!("gas parameters: {e}"))?;
    let report = check_admissibility(&params, args.rho_c, args.v_a, args.b);

    println!(
        "affine core: rho_c = {}, v_a = {}, b = {}, vacuum radius {}",
        args.rho_c, args.v_a, args.b, report.y_vac
    );
    println!(
        "density margin at the patch edge: {} ({})",
        report.density_margin,
        if report.density_margin_ok { "positive" } else { "NOT positive" }
    );
    if report.near_degeneracy {
        println!("warning: the patch edge sits within 0.1% of vacuum");
    }
    for i in 0..3 {
        println!(
            "condition {} ({}): needs v_a >= {}, got {} -> {}",
            i + 1,
            AFFINE_CONDITION_NAMES[i],
            report.required_v_a[i],
            report.v_a,
            if report.condition_ok[i] { "pass" } else { "FAIL" }
        );
    }

    if !report.overall() {
        println!("admissible: no");
        return Ok(2);
    }
    println!("admissible: yes");

    let motion = rcwave_core::AffineMotion::new(params, args.rho_c, args.v_a, args.b, args.horizon)
        .map_err(|e| anyhow!("constructing the affine motion: {e}"))?;
    let conclusions = interface_conclusions(&motion, args.horizon, 512)
        .map_err(|e| anyhow!("tracing the interface: {e}"))?;
    println!("interface trace over [0, {}]:", args.horizon);
    println!("  min alpha = {}", conclusions.min_alpha);
    println!("  beta at start = {}", conclusions.beta_at_start);
    println!("  min z = {}", conclusions.min_z);
    println!("  min c1 = {}", conclusions.min_c1);

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let path = dir.join("affine-trajectory.csv");
        let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
        motion
            .write_trajectory(&mut file, args.horizon / 256.0)
            .with_context(|| format!("writing {}", path.display()))?;
        file.flush()?;
        println!("trajectory written to {}", path.display());
    }
    Ok(0)
}
