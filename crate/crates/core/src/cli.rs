//! Command implementations behind the `feller` binary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{config_hash, ConfigFile, FamilyConfig, SimulationConfig};
use crate::error::{Error, Result};
use crate::family::{default_x_grid, default_xi_grid, FellerFamily, Parametric, Variant};
use crate::levy::LevyKind;
use crate::presets::{self, FigureSpec};
use crate::rng::RngStream;
use crate::sim::{simulate_ensemble, simulate_path, SamplePath, SimConfig};
use crate::stats::{ecf_test, xi_grid, EcfReport};

pub const TOOL_NAME: &str = "feller";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DEFAULT_PROBE_STATES: [f64; 5] = [-10.0, -1.0, 0.0, 1.0, 10.0];
pub const ECF_DRAWS: usize = 10_000;
const ECF_GRID_MAX: f64 = 10.0;
const ECF_GRID_POINTS: usize = 41;

const DEFAULT_X0: f64 = 0.0;
const DEFAULT_HORIZON: f64 = 1.0;
const DEFAULT_H: f64 = 0.01;
const DEFAULT_SEED: u64 = 0;
const DEFAULT_PATHS: usize = 1;

pub const PATHS_FILE: &str = "paths.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CONFIG_FILE: &str = "config.toml";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub x0: Option<f64>,
    pub horizon: Option<f64>,
    pub h: Option<f64>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

/// Reads a config file, or builds one naming a preset when `arg` is a
/// preset name and no such file exists.
pub fn load_config(arg: &str) -> Result<ConfigFile> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        return ConfigFile::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{arg}: {msg}")),
            other => other,
        });
    }
    if presets::preset(arg).is_some() {
        return Ok(ConfigFile::preset(arg));
    }
    Err(Error::Config(format!("'{arg}' is neither a readable config file nor a preset name")))
}

fn preset_defaults(cfg: &ConfigFile) -> Option<FigureSpec> {
    match &cfg.family {
        FamilyConfig::Preset(name) => presets::preset_run(name),
        _ => None,
    }
}

/// Run settings: command line, then the `[simulation]` table, then preset
/// defaults, then built-in defaults.
pub fn resolve_settings(cfg: &ConfigFile, ov: &Overrides) -> SimConfig {
    let sim = cfg.simulation.unwrap_or_default();
    let preset = preset_defaults(cfg);
    SimConfig {
        x0: ov.x0.or(sim.x0).or(preset.map(|p| p.x0)).unwrap_or(DEFAULT_X0),
        horizon: ov
            .horizon
            .or(sim.horizon)
            .or(preset.map(|p| p.horizon))
            .unwrap_or(DEFAULT_HORIZON),
        h: ov.h.or(sim.h).or(preset.map(|p| p.h)).unwrap_or(DEFAULT_H),
        seed: ov.seed.or(sim.seed).unwrap_or(DEFAULT_SEED),
        n_paths: ov
            .paths
            .or(sim.paths)
            .or(preset.map(|p| p.n_paths))
            .unwrap_or(DEFAULT_PATHS),
    }
}

/// The config as written next to run outputs: the family fully expanded and
/// every run setting explicit.
pub fn canonical_config(family: &FellerFamily, sim: &SimConfig) -> ConfigFile {
    ConfigFile {
        family: FamilyConfig::describe(family),
        simulation: Some(SimulationConfig {
            x0: Some(sim.x0),
            horizon: Some(sim.horizon),
            h: Some(sim.h),
            seed: Some(sim.seed),
            paths: Some(sim.n_paths),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub ok: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub path_id: u64,
    pub step: usize,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub family: String,
    pub config_file: String,
    pub config_hash: String,
    pub seed: u64,
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub x0: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub outputs: Vec<String>,
    pub validation: ValidationSummary,
    #[serde(default)]
    pub truncated: Vec<Truncation>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn validation_summary(family: &FellerFamily) -> Result<ValidationSummary> {
    let report = family.validate(&default_x_grid(), &default_xi_grid())?;
    let mut notes = report.notes.clone();
    notes.extend(report.range_violations.iter().cloned());
    Ok(ValidationSummary { ok: report.ok(), notes })
}

/// Extra CSV column computed from the state.
pub type Column<'a> = (&'a str, &'a dyn Fn(f64) -> f64);

pub fn write_paths_csv(paths: &[SamplePath], extra: Option<Column<'_>>, out: impl Write) -> Result<()> {
    let mut out = BufWriter::new(out);
    match extra {
        Some((name, _)) => writeln!(out, "path_id,t,x,{name}")?,
        None => writeln!(out, "path_id,t,x")?,
    }
    for path in paths {
        let id = path.provenance.path_index;
        for (t, x) in path.times.iter().zip(&path.values) {
            match extra {
                Some((_, f)) => writeln!(out, "{id},{t:.16e},{x:.16e},{:.16e}", f(*x))?,
                None => writeln!(out, "{id},{t:.16e},{x:.16e}")?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub paths_file: PathBuf,
    pub manifest: RunManifest,
    pub paths: Vec<SamplePath>,
}

fn run_and_write(
    command: &str,
    family: &FellerFamily,
    sim: &SimConfig,
    out_dir: &Path,
    paths_name: &str,
    extra: Option<Column<'_>>,
) -> Result<RunOutput> {
    sim.validate()?;
    let canonical = canonical_config(family, sim).to_toml()?;
    let validation = validation_summary(family)?;
    let paths = simulate_ensemble(family, sim)?;

    fs::create_dir_all(out_dir)?;
    let paths_file = out_dir.join(paths_name);
    write_paths_csv(&paths, extra, File::create(&paths_file)?)?;
    fs::write(out_dir.join(CONFIG_FILE), &canonical)?;

    let truncated = paths
        .iter()
        .filter_map(|p| {
            p.provenance.overflow.map(|o| Truncation {
                path_id: p.provenance.path_index,
                step: o.step,
                time: o.time,
                value: o.value,
            })
        })
        .collect();
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        command: command.to_string(),
        family: family.id().to_string(),
        config_file: CONFIG_FILE.to_string(),
        config_hash: config_hash(&canonical),
        seed: sim.seed,
        h: sim.h,
        horizon: sim.horizon,
        x0: sim.x0,
        n_paths: sim.n_paths,
        n_steps: sim.n_steps(),
        outputs: vec![paths_name.to_string()],
        validation,
        truncated,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out_dir.join(MANIFEST_FILE), text)?;
    Ok(RunOutput {
        dir: out_dir.to_path_buf(),
        paths_file,
        manifest,
        paths,
    })
}

pub fn simulate(cfg: &ConfigFile, ov: &Overrides, out_dir: &Path) -> Result<RunOutput> {
    let family = cfg.family.build()?;
    let sim = resolve_settings(cfg, ov);
    run_and_write("simulate", &family, &sim, out_dir, PATHS_FILE, None)
}

fn stable_index(family: &FellerFamily) -> Option<&crate::family::ScalarFn> {
    match family.variant() {
        Variant::Parametric(Parametric::StableLike { alpha }) => Some(alpha),
        _ => None,
    }
}

/// Regenerates a figure run. `cfg` replaces the figure's preset family.
pub fn figure(id: u8, cfg: Option<&ConfigFile>, ov: &Overrides, out_dir: &Path) -> Result<RunOutput> {
    let spec = presets::figure(id)
        .ok_or_else(|| Error::Config(format!("unknown figure {id}, expected 1 to 4")))?;
    let base = cfg.cloned().unwrap_or_else(|| ConfigFile::preset(spec.preset));
    let family = base.family.build()?;
    let sim = base.simulation.unwrap_or_default();
    let settings = SimConfig {
        x0: ov.x0.or(sim.x0).unwrap_or(spec.x0),
        horizon: ov.horizon.or(sim.horizon).unwrap_or(spec.horizon),
        h: ov.h.or(sim.h).unwrap_or(spec.h),
        seed: ov.seed.or(sim.seed).unwrap_or(DEFAULT_SEED),
        n_paths: ov.paths.or(sim.paths).unwrap_or(spec.n_paths),
    };
    let name = format!("figure{id}.csv");
    let alpha = stable_index(&family).cloned();
    let alpha_fn = alpha.as_ref().map(|a| move |x: f64| a.eval(x));
    let extra: Option<Column<'_>> = alpha_fn.as_ref().map(|f| ("alpha", f as &dyn Fn(f64) -> f64));
    run_and_write(&format!("figure {id}"), &family, &settings, out_dir, &name, extra)
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub state: f64,
    pub ecf: EcfReport,
    pub overflow: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ValidateOutput {
    pub text: String,
    pub warnings: bool,
    pub probes: Vec<ProbeResult>,
}

impl ValidateOutput {
    /// Exit status: 2 for warnings under `--strict`, 0 otherwise.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && self.warnings {
            2
        } else {
            0
        }
    }
}

pub fn validate(cfg: &ConfigFile, ov: &Overrides, probe_states: &[f64]) -> Result<ValidateOutput> {
    let family = cfg.family.build()?;
    let sim = resolve_settings(cfg, ov);
    sim.validate()?;
    let report = family.validate(&default_x_grid(), &default_xi_grid())?;
    let mut text = report.to_text();
    let mut warnings = !report.ok();

    let grid = xi_grid(ECF_GRID_MAX, ECF_GRID_POINTS);
    let mut rng = RngStream::new(sim.seed).substream(u64::MAX);
    let mut probes = Vec::new();
    for (i, &state) in probe_states.iter().enumerate() {
        let ecf = ecf_test(&family, state, sim.h, ECF_DRAWS, &grid, &mut rng)?;
        let probe = SimConfig {
            x0: state,
            n_paths: 1,
            ..sim
        };
        let path = simulate_path(&family, &probe, i as u64)?;
        let overflow = path.provenance.overflow.map(|o| {
            format!(
                "path from x0={state} left |x| <= 1e300 at step {} (t={:.6})",
                o.step, o.time
            )
        });
        let _ = writeln!(text, "  probe x={state}: {}", ecf.summary());
        if let Some(msg) = &overflow {
            let _ = writeln!(text, "  overflow: {msg}");
        }
        warnings |= !ecf.pass || overflow.is_some();
        probes.push(ProbeResult { state, ecf, overflow });
    }
    let _ = writeln!(text, "result: {}", if warnings { "warnings" } else { "ok" });
    Ok(ValidateOutput { text, warnings, probes })
}

const CATALOG_PARAMS: [&str; 8] = [
    "psi = xi^2/2",
    "direction = up | down; psi = 1 - e^{+-i xi}",
    "psi = |xi|",
    "alpha in (0, 2]; psi = |xi|^alpha",
    "direction = up | down; psi = ln(1 -+ i xi)",
    "alpha > 0, |beta| < alpha, delta > 0, mu real",
    "a > 0, b in (-pi, pi), r > 0, m real",
    "slope real; psi = -i slope xi",
];

pub fn list_text() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "presets:");
    for p in &presets::PRESETS {
        let _ = writeln!(s, "  {:<20} {}", p.name, p.summary);
    }
    let _ = writeln!(s, "levy processes:");
    for (name, params) in LevyKind::NAMES.iter().zip(CATALOG_PARAMS) {
        let _ = writeln!(s, "  {name:<20} {params}");
    }
    let _ = writeln!(s, "function presets:");
    for f in crate::family::NamedFn::ALL {
        let _ = writeln!(s, "  {}", f.name());
    }
    let _ = writeln!(s, "figures:");
    for f in &presets::FIGURES {
        let _ = writeln!(
            s,
            "  {}  {:<20} T={} h={} x0={} paths={}",
            f.id, f.preset, f.horizon, f.h, f.x0, f.n_paths
        );
    }
    s
}
