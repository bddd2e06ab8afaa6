//! Run configuration: one TOML file with `[gas]`, `[domain]`, `[initial]`
//! and optional `[boundary]`, `[solver]`, `[verify]` sections.
//!
//! Parsing is strict (unknown keys are rejected) and building is eager:
//! the initial profile is constructed and the pointwise data checks run
//! here, before any time stepping, so a bad configuration fails with a
//! diagnostic naming the offending key instead of a mid-run surprise.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use rcwave_core::presets::{self, BumpSpec, CharacterSpec};
use rcwave_core::solver::{GradientCeiling, SourceTreatment};
use rcwave_core::verify::FloorKind;
use rcwave_core::{GasParams, Scenario, SolverConfig, Symmetry};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub gas: GasSection,
    pub domain: DomainSection,
    pub initial: InitialSection,
    pub boundary: Option<BoundarySection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub gamma: f64,
    #[serde(default = "one")]
    pub entropy_k: f64,
    /// 1 for cylindrical symmetry, 2 for spherical.
    pub symmetry: u32,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Base radius: the left edge of the region under study.
    pub b: f64,
    pub r_right: f64,
    pub horizon: f64,
}

/// Initial data comes from a named preset; which other keys are required
/// depends on the preset, and leftovers are rejected.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub preset: PresetKind,
    pub rho_left: Option<f64>,
    pub u_left: Option<f64>,
    pub alpha0: Option<f64>,
    pub beta0: Option<f64>,
    pub bump_amplitude: Option<f64>,
    pub bump_center: Option<f64>,
    pub bump_width: Option<f64>,
    /// Compressive preset only: retune the bump amplitude until the most
    /// negative weighted character hits this value.
    pub target_seed: Option<f64>,
    pub rho_c: Option<f64>,
    pub v_a: Option<f64>,
    pub u_slope: Option<f64>,
    pub h_slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    /// Smooth supersonic data with nonnegative characters.
    Rarefaction,
    /// Rarefaction profile plus a localized negative character bump.
    Compressive,
    /// Exact affine core patched to a rarefactive outer tail.
    AffineComposite,
    /// Linear-in-radius data vanishing at a small left edge.
    OriginWedge,
}

impl PresetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetKind::Rarefaction => "rarefaction",
            PresetKind::Compressive => "compressive",
            PresetKind::AffineComposite => "affine-composite",
            PresetKind::OriginWedge => "origin-wedge",
        }
    }

    fn boundary_mode(self) -> &'static str {
        match self {
            PresetKind::Rarefaction | PresetKind::Compressive => "dependence-cone",
            PresetKind::AffineComposite => "characteristic-left",
            PresetKind::OriginWedge => "half-line-origin",
        }
    }
}

/// The boundary mode is implied by the preset; this section only exists so
/// a config can state it explicitly and be checked against that implication.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub mode: String,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "default_order")]
    pub order: u8,
    /// Defaults to horizon / 20.
    pub snapshot_dt: Option<f64>,
    #[serde(default)]
    pub source_split: SourceSplitChoice,
    /// "relative:X" (multiple of the initial max gradient) or "absolute:X".
    pub gradient_ceiling: Option<CeilingSpec>,
    #[serde(default = "default_cone_margin")]
    pub cone_margin_cells: usize,
    #[serde(default = "default_interface_margin")]
    pub interface_margin_cells: usize,
    #[serde(default)]
    pub bar_tilt: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            cells: default_cells(),
            cfl: default_cfl(),
            theta: 1.0,
            order: default_order(),
            snapshot_dt: None,
            source_split: SourceSplitChoice::Unsplit,
            gradient_ceiling: None,
            cone_margin_cells: default_cone_margin(),
            interface_margin_cells: default_interface_margin(),
            bar_tilt: 0.0,
            max_steps: default_max_steps(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SourceSplitChoice {
    #[default]
    Unsplit,
    Strang,
}

impl SourceSplitChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceSplitChoice::Unsplit => "unsplit",
            SourceSplitChoice::Strang => "strang",
        }
    }
}

/// Gradient ceiling written as `kind:value` so the manifest echoes the
/// config verbatim.
#[derive(Debug, Clone, Copy)]
pub struct CeilingSpec(pub GradientCeiling);

impl TryFrom<String> for CeilingSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        parse_ceiling(&s).map(CeilingSpec)
    }
}

impl<'de> Deserialize<'de> for CeilingSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_ceiling(&s).map(CeilingSpec).map_err(serde::de::Error::custom)
    }
}

pub fn parse_ceiling(s: &str) -> Result<GradientCeiling, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| format!("gradient ceiling must be kind:value, got {s:?}"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("gradient ceiling value: {e}"))?;
    if !(value.is_finite() && value > 0.0) {
        return Err(format!("gradient ceiling must be positive, got {value}"));
    }
    match kind.trim() {
        "relative" => Ok(GradientCeiling::RelativeToInitial(value)),
        "absolute" => Ok(GradientCeiling::Absolute(value)),
        other => Err(format!("gradient ceiling kind must be relative or absolute, got {other:?}")),
    }
}

pub fn ceiling_to_string(c: GradientCeiling) -> String {
    match c {
        GradientCeiling::RelativeToInitial(x) => format!("relative:{x}"),
        GradientCeiling::Absolute(x) => format!("absolute:{x}"),
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Sample count for the bound-ledger scan of the initial data.
    pub samples: Option<usize>,
    /// Character-sign slack per unit cell width; calibrated when absent.
    pub slack_per_dr: Option<f64>,
    /// Which density floor to check; defaults from the preset.
    pub floor: Option<FloorChoice>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FloorChoice {
    Rarefaction,
    General,
}

fn one() -> f64 {
    1.0
}
fn default_cells() -> usize {
    400
}
fn default_cfl() -> f64 {
    0.45
}
fn default_order() -> u8 {
    2
}
fn default_cone_margin() -> usize {
    8
}
fn default_interface_margin() -> usize {
    2
}
fn default_max_steps() -> usize {
    50_000_000
}

/// Everything a run needs, built and validated.
#[derive(Debug)]
pub struct BuiltRun {
    pub scenario: Scenario,
    pub preset: PresetKind,
    pub solver: SolverConfig,
    pub ledger_samples: usize,
    /// None asks the runner to calibrate against the exact-window fixture.
    pub slack_per_dr: Option<f64>,
    pub floor: FloorKind,
    pub assumptions_waived: bool,
    /// Canonical hash of the scenario-defining inputs.
    pub hash: u64,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Construct the scenario, run the data checks, and resolve defaults.
    /// `waive` admits data outside the sign hypotheses (compressive runs)
    /// and skips the pointwise checks; the manifest records the waiver.
    pub fn build(&self, waive: bool) -> Result<BuiltRun> {
        let params = GasParams::new(
            self.gas.gamma,
            self.gas.entropy_k,
            Symmetry::from_index(self.gas.symmetry).map_err(|e| anyhow!("gas.symmetry: {e}"))?,
        )
        .map_err(|e| anyhow!("gas: {e}"))?;
        let d = self.domain;
        if let Some(boundary) = &self.boundary {
            let implied = self.initial.preset.boundary_mode();
            if boundary.mode != implied {
                bail!(
                    "boundary.mode: preset {} runs with {implied}, not {:?}",
                    self.initial.preset.as_str(),
                    boundary.mode
                );
            }
        }

        let ini = &self.initial;
        let (scenario, default_floor) = match ini.preset {
            PresetKind::Rarefaction => {
                let spec = self.character_spec(false)?;
                let sc = presets::rarefaction(params, d.b, d.r_right, d.horizon, spec)
                    .map_err(|e| anyhow!("initial: {e}"))?;
                (sc, FloorKind::Rarefaction)
            }
            PresetKind::Compressive => {
                if !waive {
                    bail!(
                        "initial.preset: compressive data leaves the sign hypotheses, so the \
                         run may blow up; pass --waive-assumptions to accept that"
                    );
                }
                let spec = self.character_spec(true)?;
                let sc = match ini.target_seed {
                    Some(seed) => {
                        presets::compressive_with_seed(params, d.b, d.r_right, d.horizon, spec, seed)
                    }
                    None => presets::compressive(params, d.b, d.r_right, d.horizon, spec),
                }
                .map_err(|e| anyhow!("initial: {e}"))?
                .0;
                (sc, FloorKind::General)
            }
            PresetKind::AffineComposite => {
                let rho_c = require(ini.rho_c, "initial.rho_c")?;
                let v_a = require(ini.v_a, "initial.v_a")?;
                let (sc, _motion) =
                    presets::affine_composite(params, rho_c, v_a, d.b, d.r_right, d.horizon, !waive)
                        .map_err(|e| anyhow!("initial: {e}"))?;
                (sc, FloorKind::Rarefaction)
            }
            PresetKind::OriginWedge => {
                let u_slope = require(ini.u_slope, "initial.u_slope")?;
                let h_slope = require(ini.h_slope, "initial.h_slope")?;
                let sc = presets::origin_wedge(params, d.b, d.r_right, d.horizon, u_slope, h_slope)
                    .map_err(|e| anyhow!("initial: {e}"))?;
                (sc, FloorKind::Rarefaction)
            }
        };

        let solver = self.solver_config(waive)?;
        if !waive {
            let probe = scenario
                .sample_initial(solver.cells.max(64))
                .map_err(|e| anyhow!("initial: {e}"))?;
            scenario.check_assumptions(&probe).map_err(|e| anyhow!("initial: {e}"))?;
        }

        let floor = match self.verify.floor {
            Some(FloorChoice::Rarefaction) => FloorKind::Rarefaction,
            Some(FloorChoice::General) => FloorKind::General,
            None => default_floor,
        };
        Ok(BuiltRun {
            hash: self.scenario_hash(waive),
            scenario,
            preset: ini.preset,
            solver,
            ledger_samples: self.verify.samples.unwrap_or(4096),
            slack_per_dr: self.verify.slack_per_dr,
            floor,
            assumptions_waived: waive,
        })
    }

    fn character_spec(&self, need_bump: bool) -> Result<CharacterSpec> {
        let ini = &self.initial;
        let bump = match (ini.bump_amplitude, ini.bump_center, ini.bump_width) {
            (None, None, None) => None,
            (Some(amplitude), Some(center), Some(width)) => {
                if !(width > 0.0) {
                    bail!("initial.bump_width: must be positive, got {width}");
                }
                Some(BumpSpec { amplitude, center, width })
            }
            _ => bail!("initial: bump_amplitude, bump_center, bump_width come as a trio"),
        };
        if need_bump && bump.is_none() {
            bail!("initial: the compressive preset needs a bump trio");
        }
        Ok(CharacterSpec {
            rho_left: require(ini.rho_left, "initial.rho_left")?,
            u_left: require(ini.u_left, "initial.u_left")?,
            alpha0: require(ini.alpha0, "initial.alpha0")?,
            beta0: require(ini.beta0, "initial.beta0")?,
            bump,
        })
    }

    fn solver_config(&self, waive: bool) -> Result<SolverConfig> {
        let s = self.solver;
        if s.cells < 8 {
            bail!("solver.cells: need at least 8, got {}", s.cells);
        }
        if !(s.cfl > 0.0 && s.cfl < 1.0) {
            bail!("solver.cfl: must sit in (0, 1), got {}", s.cfl);
        }
        if !(1.0..=2.0).contains(&s.theta) {
            bail!("solver.theta: must sit in [1, 2], got {}", s.theta);
        }
        if !matches!(s.order, 1 | 2) {
            bail!("solver.order: must be 1 or 2, got {}", s.order);
        }
        let snapshot_dt = s.snapshot_dt.unwrap_or(self.domain.horizon / 20.0);
        if !(snapshot_dt > 0.0) {
            bail!("solver.snapshot_dt: must be positive, got {snapshot_dt}");
        }
        let defaults = SolverConfig::default();
        Ok(SolverConfig {
            cells: s.cells,
            cfl: s.cfl,
            theta: s.theta,
            order: s.order,
            source_split: match s.source_split {
                SourceSplitChoice::Unsplit => SourceTreatment::Unsplit,
                SourceSplitChoice::Strang => SourceTreatment::StrangSplit,
            },
            snapshot_dt,
            gradient_ceiling: s.gradient_ceiling.map_or(defaults.gradient_ceiling, |c| c.0),
            cone_margin_cells: s.cone_margin_cells,
            interface_margin_cells: s.interface_margin_cells,
            bar_tilt: s.bar_tilt,
            waive_assumptions: waive,
            max_steps: s.max_steps,
        })
    }

    /// Hash of every input that shapes the data files, so re-verification
    /// can tell whether a stored run matches a config.
    pub fn scenario_hash(&self, waive: bool) -> u64 {
        let s = self.solver;
        let ini = self.initial;
        let mut line = format!(
            "preset={};gamma={};entropy_k={};m={};b={};r_right={};horizon={};cells={};cfl={};\
             theta={};order={};split={};snapshot_dt={:?};bar_tilt={};waive={}",
            ini.preset.as_str(),
            self.gas.gamma,
            self.gas.entropy_k,
            self.gas.symmetry,
            self.domain.b,
            self.domain.r_right,
            self.domain.horizon,
            s.cells,
            s.cfl,
            s.theta,
            s.order,
            s.source_split.as_str(),
            s.snapshot_dt,
            s.bar_tilt,
            waive,
        );
        for (key, value) in [
            ("rho_left", ini.rho_left),
            ("u_left", ini.u_left),
            ("alpha0", ini.alpha0),
            ("beta0", ini.beta0),
            ("bump_amplitude", ini.bump_amplitude),
            ("bump_center", ini.bump_center),
            ("bump_width", ini.bump_width),
            ("target_seed", ini.target_seed),
            ("rho_c", ini.rho_c),
            ("v_a", ini.v_a),
            ("u_slope", ini.u_slope),
            ("h_slope", ini.h_slope),
        ] {
            if let Some(v) = value {
                line.push_str(&format!(";{key}={v}"));
            }
        }
        fnv1a64(line.as_bytes())
    }

    /// `initial.*` echo for the manifest: whichever optional keys the
    /// config set (the preset itself lands under `scenario.preset`).
    pub fn initial_echo(&self) -> Vec<(String, String)> {
        let ini = self.initial;
        [
            ("rho_left", ini.rho_left),
            ("u_left", ini.u_left),
            ("alpha0", ini.alpha0),
            ("beta0", ini.beta0),
            ("bump_amplitude", ini.bump_amplitude),
            ("bump_center", ini.bump_center),
            ("bump_width", ini.bump_width),
            ("target_seed", ini.target_seed),
            ("rho_c", ini.rho_c),
            ("v_a", ini.v_a),
            ("u_slope", ini.u_slope),
            ("h_slope", ini.h_slope),
        ]
        .into_iter()
        .filter_map(|(key, value)| value.map(|v| (key.to_string(), v.to_string())))
        .collect()
    }
}

fn require(value: Option<f64>, key: &str) -> Result<f64> {
    value.ok_or_else(|| anyhow!("{key}: missing key for this preset"))
}

/// 64-bit FNV-1a. The hash only has to be stable and cheap; it tags run
/// directories and catches config/run-dir mismatches.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Config {
        toml::from_str(text).expect("config parses")
    }

    const RAREFACTION: &str = r#"
        [gas]
        gamma = 2.0
        entropy_k = 0.01
        symmetry = 1

        [domain]
        b = 1.0
        r_right = 3.0
        horizon = 0.5

        [initial]
        preset = "rarefaction"
        rho_left = 1.0
        u_left = 1.0
        alpha0 = 0.3
        beta0 = 0.05
    "#;

    #[test]
    fn minimal_rarefaction_config_builds() {
        let built = parse(RAREFACTION).build(false).expect("builds");
        assert_eq!(built.preset, PresetKind::Rarefaction);
        assert_eq!(built.solver.cells, 400);
        assert_eq!(built.floor, FloorKind::Rarefaction);
        assert!((built.solver.snapshot_dt - 0.025).abs() < 1e-15);
        assert!(!built.assumptions_waived);
    }

    #[test]
    fn gamma_out_of_range_is_named() {
        let cfg = parse(&RAREFACTION.replace("gamma = 2.0", "gamma = 3.5"));
        let err = cfg.build(false).unwrap_err();
        assert!(format!("{err:#}").contains("gamma out of (1,3)"), "{err:#}");
    }

    #[test]
    fn compressive_preset_needs_the_waiver() {
        let text = RAREFACTION.replace("preset = \"rarefaction\"", "preset = \"compressive\"")
            + "\nbump_amplitude = -0.5\nbump_center = 1.5\nbump_width = 0.05\n";
        let cfg = parse(&text);
        let err = cfg.build(false).unwrap_err();
        assert!(format!("{err}").contains("--waive-assumptions"), "{err}");
        let built = cfg.build(true).expect("waiver admits it");
        assert!(built.assumptions_waived);
        assert_eq!(built.floor, FloorKind::General);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = RAREFACTION.to_string() + "\ntypo_key = 1.0\n";
        assert!(toml::from_str::<Config>(&text).is_err());
    }

    #[test]
    fn boundary_mode_must_match_the_preset() {
        let text = RAREFACTION.to_string() + "\n[boundary]\nmode = \"half-line-origin\"\n";
        let err = parse(&text).build(false).unwrap_err();
        assert!(format!("{err}").contains("dependence-cone"), "{err}");
    }

    #[test]
    fn ceiling_spec_round_trips() {
        for text in ["relative:250", "absolute:1e4"] {
            let parsed = parse_ceiling(text).expect("parses");
            assert_eq!(ceiling_to_string(parsed), text.replace("1e4", "10000"));
        }
        assert!(parse_ceiling("sideways:3").is_err());
        assert!(parse_ceiling("relative:-1").is_err());
    }

    #[test]
    fn hash_tracks_every_scenario_input() {
        let base = parse(RAREFACTION).scenario_hash(false);
        let tweaked = parse(&RAREFACTION.replace("alpha0 = 0.3", "alpha0 = 0.31"));
        assert_ne!(base, tweaked.scenario_hash(false));
        assert_ne!(base, parse(RAREFACTION).scenario_hash(true));
        assert_eq!(base, parse(RAREFACTION).scenario_hash(false));
    }
}
