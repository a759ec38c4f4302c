//! Flat key-value benchmark configuration.
//!
//! A config file is line oriented: `key = value` pairs, `#` starts a
//! comment, blank lines are skipped. Lists (grids, room geometry) are
//! space separated. Every key has a scenario-dependent default, so the
//! minimal file is a single `scenario = ...` line.
//!
//! Parsing is fail-fast: unknown keys, duplicate keys, and keys the chosen
//! scenario never reads are all hard errors. A typo must fail loudly
//! instead of silently running with a default.
//!
//! Conventions: angles in radians, distances in meters, rates in Hz,
//! times in seconds.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gptraj::sim::GtKind;
use gptraj::traj::{Mode, Repr};
use gptraj::V3;

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

/// Which experiment the runner builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Batch solve against ranges from four fixed anchors to two body tags.
    UwbBatch,
    /// Batch solve against wall returns of a single body-fixed lidar.
    LidarBatch,
    /// Sliding-window run over a two-lidar rig with an estimated extrinsic
    /// that slips mid-run.
    Mlcme,
}

impl Scenario {
    /// Name used in the CSV `scenario` column and in file names.
    pub fn name(self) -> &'static str {
        match self {
            Scenario::UwbBatch => "uwb_batch",
            Scenario::LidarBatch => "lidar_batch",
            Scenario::Mlcme => "mlcme",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the per-run solve time is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    /// Skip timing; the CSV column reads 0 and reruns are byte-identical.
    None,
    /// Wall clock around the solve only, median of 3 repeats.
    Wall,
}

/// Text names used in the CSV for the grid enums.
pub fn repr_name(r: Repr) -> &'static str {
    match r {
        Repr::So3R3 => "so3r3",
        Repr::Se3 => "se3",
    }
}

pub fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Cf => "cf",
        Mode::Ap => "ap",
    }
}

// ---------------------------------------------------------------------------
// Config struct
// ---------------------------------------------------------------------------

/// Fully resolved benchmark configuration.
///
/// Grid fields drive a nested sweep in the fixed order omega, dt,
/// representation, mode; per-point seeds are `seed + grid index` in that
/// order, so a run is reproducible regardless of how it is scheduled.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub scenario: Scenario,
    /// Analytic ground-truth motion driving the simulation.
    pub gt: GtKind,
    pub omega_grid: Vec<f64>,
    pub dt_grid: Vec<f64>,
    pub repr_grid: Vec<Repr>,
    pub mode_grid: Vec<Mode>,
    /// Master seed; per-grid-point seeds derive from it.
    pub seed: u64,
    /// Simulated duration in seconds.
    pub horizon: f64,
    pub timing: Timing,
    /// Solver iteration cap.
    pub max_iters: usize,
    /// Relative cost-decrease convergence threshold. The benchmark default
    /// is looser than the library default: the final crawl along shallow
    /// valleys changes the RMSE well below the reporting resolution while
    /// dominating the runtime.
    pub rel_tol: f64,
    /// Optional robust-loss width on whitened residual norms.
    pub huber: Option<f64>,
    /// Isotropic white-noise density on the rotational jerk.
    pub qc_rot: f64,
    /// Isotropic white-noise density on the translational jerk.
    pub qc_pos: f64,
    /// Output directory for the CSV and auxiliary reports.
    pub out: String,
    /// Write per-run iteration logs next to the CSV.
    pub solve_log: bool,

    // Batch initialization: zero-mean Gaussian perturbation of the true
    // pose at every support time, per-axis standard deviations.
    pub init_sigma_rot: f64,
    pub init_sigma_pos: f64,

    // UWB scenario.
    pub sigma_range: f64,

    // Lidar scenarios.
    pub sigma_lidar: f64,
    pub room_center: V3,
    pub room_dims: V3,
    pub lidar_rate: f64,
    pub lidar_dirs: usize,
    pub lidar_rays_per_tick: usize,

    // Sliding-window calibration scenario.
    pub window: f64,
    pub slide: f64,
    /// Spacing of pose-consistency couplings between the two trajectories.
    pub cons_period: f64,
    pub cons_sigma_rot: f64,
    pub cons_sigma_pos: f64,
    /// Loose prior re-anchored at the current extrinsic every window.
    pub ext_prior_sigma_rot: f64,
    pub ext_prior_sigma_pos: f64,
    /// Fixed-magnitude, random-direction initial pose and extrinsic errors.
    pub init_err_rot: f64,
    pub init_err_pos: f64,
}

// ---------------------------------------------------------------------------
// Raw key-value layer
// ---------------------------------------------------------------------------

/// Parsed `key = value` pairs with line numbers, consumed by `take`.
struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {lineno}: expected `key = value`, got `{line}`");
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                bail!("line {lineno}: empty key or value");
            }
            if let Some((first, _)) = entries.insert(key.clone(), (lineno, value)) {
                bail!("line {lineno}: duplicate key `{key}` (first set on line {first})");
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    /// Error out on anything not consumed: unknown keys and keys the
    /// scenario does not read both end up here.
    fn finish(self, scenario: Scenario) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let mut names: Vec<String> = Vec::new();
        for (key, (lineno, _)) in &self.entries {
            names.push(format!("`{key}` (line {lineno})"));
        }
        bail!(
            "key(s) not recognized for scenario {scenario}: {}",
            names.join(", ")
        );
    }
}

// ---------------------------------------------------------------------------
// Typed value parsers
// ---------------------------------------------------------------------------

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .with_context(|| format!("key `{key}`: `{s}` is not a number"))?;
    if !v.is_finite() {
        bail!("key `{key}`: value must be finite");
    }
    Ok(v)
}

fn parse_pos(key: &str, s: &str) -> Result<f64> {
    let v = parse_f64(key, s)?;
    if v <= 0.0 {
        bail!("key `{key}`: value must be positive, got {v}");
    }
    Ok(v)
}

fn parse_nonneg(key: &str, s: &str) -> Result<f64> {
    let v = parse_f64(key, s)?;
    if v < 0.0 {
        bail!("key `{key}`: value must be non-negative, got {v}");
    }
    Ok(v)
}

fn parse_u64(key: &str, s: &str) -> Result<u64> {
    s.parse()
        .with_context(|| format!("key `{key}`: `{s}` is not an unsigned integer"))
}

fn parse_usize_pos(key: &str, s: &str) -> Result<usize> {
    let v: usize = s
        .parse()
        .with_context(|| format!("key `{key}`: `{s}` is not an unsigned integer"))?;
    if v == 0 {
        bail!("key `{key}`: value must be at least 1");
    }
    Ok(v)
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bail!("key `{key}`: expected `true` or `false`, got `{s}`"),
    }
}

fn parse_list_pos(key: &str, s: &str) -> Result<Vec<f64>> {
    let items: Vec<f64> = s
        .split_whitespace()
        .map(|w| parse_pos(key, w))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("key `{key}`: list must not be empty");
    }
    Ok(items)
}

fn parse_v3(key: &str, s: &str) -> Result<V3> {
    let items: Vec<f64> = s
        .split_whitespace()
        .map(|w| parse_f64(key, w))
        .collect::<Result<_>>()?;
    if items.len() != 3 {
        bail!("key `{key}`: expected exactly 3 numbers, got {}", items.len());
    }
    Ok(V3::new(items[0], items[1], items[2]))
}

fn parse_gt(key: &str, s: &str) -> Result<GtKind> {
    match s {
        "split" => Ok(GtKind::Split),
        "nonsplit" => Ok(GtKind::NonSplit),
        "lissajous" => Ok(GtKind::Lissajous),
        _ => bail!("key `{key}`: expected split, nonsplit, or lissajous, got `{s}`"),
    }
}

fn parse_repr_list(key: &str, s: &str) -> Result<Vec<Repr>> {
    let items: Vec<Repr> = s
        .split_whitespace()
        .map(|w| match w {
            "so3r3" => Ok(Repr::So3R3),
            "se3" => Ok(Repr::Se3),
            _ => bail!("key `{key}`: expected so3r3 or se3, got `{w}`"),
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("key `{key}`: list must not be empty");
    }
    if items.len() > 2 || (items.len() == 2 && items[0] == items[1]) {
        bail!("key `{key}`: duplicate entries");
    }
    Ok(items)
}

fn parse_mode_list(key: &str, s: &str) -> Result<Vec<Mode>> {
    let items: Vec<Mode> = s
        .split_whitespace()
        .map(|w| match w {
            "cf" => Ok(Mode::Cf),
            "ap" => Ok(Mode::Ap),
            _ => bail!("key `{key}`: expected cf or ap, got `{w}`"),
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("key `{key}`: list must not be empty");
    }
    if items.len() > 2 || (items.len() == 2 && items[0] == items[1]) {
        bail!("key `{key}`: duplicate entries");
    }
    Ok(items)
}

fn parse_timing(key: &str, s: &str) -> Result<Timing> {
    match s {
        "none" => Ok(Timing::None),
        "wall" => Ok(Timing::Wall),
        _ => bail!("key `{key}`: expected none or wall, got `{s}`"),
    }
}

fn parse_huber(key: &str, s: &str) -> Result<Option<f64>> {
    if s == "none" {
        Ok(None)
    } else {
        Ok(Some(parse_pos(key, s)?))
    }
}

// ---------------------------------------------------------------------------
// Assembly with scenario defaults
// ---------------------------------------------------------------------------

/// Take `key` if present, parse it, otherwise fall back to `default`.
macro_rules! take_or {
    ($raw:expr, $key:literal, $parser:ident, $default:expr) => {
        match $raw.take($key) {
            Some(v) => $parser($key, &v)?,
            None => $default,
        }
    };
}

impl BenchConfig {
    /// Parse a config file's text into a fully validated configuration.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;

        let scenario = match raw.take("scenario").as_deref() {
            Some("uwb_batch") => Scenario::UwbBatch,
            Some("lidar_batch") => Scenario::LidarBatch,
            Some("mlcme") => Scenario::Mlcme,
            Some(other) => {
                bail!("key `scenario`: expected uwb_batch, lidar_batch, or mlcme, got `{other}`")
            }
            None => bail!("missing required key `scenario`"),
        };
        let is_mlcme = scenario == Scenario::Mlcme;
        let is_lidar = scenario != Scenario::UwbBatch;

        // Grid defaults: the batch sweeps span the regime where the faster
        // motions separate the representations; the calibration sweep uses
        // the printed table's grid and support spacing.
        let omega_default: Vec<f64> = if is_mlcme {
            vec![0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95]
        } else {
            vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        };
        let dt_default = if is_mlcme { vec![0.04357] } else { vec![0.1] };
        let repr_default = if is_mlcme {
            vec![Repr::So3R3]
        } else {
            vec![Repr::So3R3, Repr::Se3]
        };
        let mode_default = if is_mlcme {
            vec![Mode::Cf]
        } else {
            vec![Mode::Cf, Mode::Ap]
        };
        let gt_default = if is_mlcme {
            GtKind::Lissajous
        } else {
            GtKind::Split
        };

        let cfg = BenchConfig {
            scenario,
            gt: take_or!(raw, "gt", parse_gt, gt_default),
            omega_grid: take_or!(raw, "omega_grid", parse_list_pos, omega_default),
            dt_grid: take_or!(raw, "dt_grid", parse_list_pos, dt_default),
            repr_grid: take_or!(raw, "repr_grid", parse_repr_list, repr_default),
            mode_grid: take_or!(raw, "mode_grid", parse_mode_list, mode_default),
            seed: take_or!(raw, "seed", parse_u64, 1),
            horizon: take_or!(raw, "horizon", parse_pos, 20.0),
            timing: take_or!(raw, "timing", parse_timing, Timing::None),
            max_iters: take_or!(raw, "max_iters", parse_usize_pos, 150),
            rel_tol: take_or!(raw, "rel_tol", parse_pos, 1e-5),
            huber: take_or!(raw, "huber", parse_huber, None),
            qc_rot: take_or!(raw, "qc_rot", parse_pos, if is_mlcme { 1.0 } else { 10.0 }),
            qc_pos: take_or!(raw, "qc_pos", parse_pos, if is_mlcme { 1.0 } else { 10.0 }),
            out: take_or!(raw, "out", parse_string, "bench_out".to_string()),
            solve_log: take_or!(raw, "solve_log", parse_bool, false),

            init_sigma_rot: if is_mlcme {
                0.0
            } else {
                take_or!(raw, "init_sigma_rot", parse_nonneg, 0.2f64.sqrt())
            },
            init_sigma_pos: if is_mlcme {
                0.0
            } else {
                take_or!(raw, "init_sigma_pos", parse_nonneg, 0.5f64.sqrt())
            },

            sigma_range: if scenario == Scenario::UwbBatch {
                take_or!(raw, "sigma_range", parse_nonneg, 0.05f64.sqrt())
            } else {
                0.0
            },

            sigma_lidar: if is_lidar {
                take_or!(raw, "sigma_lidar", parse_nonneg, 0.05)
            } else {
                0.0
            },
            room_center: if is_lidar {
                take_or!(
                    raw,
                    "room_center",
                    parse_v3,
                    if is_mlcme {
                        V3::new(0.0, 0.0, 1.5)
                    } else {
                        V3::zeros()
                    }
                )
            } else {
                V3::zeros()
            },
            room_dims: if is_lidar {
                take_or!(
                    raw,
                    "room_dims",
                    parse_v3,
                    if is_mlcme {
                        V3::new(6.0, 6.0, 3.0)
                    } else {
                        V3::new(12.0, 12.0, 12.0)
                    }
                )
            } else {
                V3::zeros()
            },
            lidar_rate: if is_lidar {
                take_or!(
                    raw,
                    "lidar_rate",
                    parse_pos,
                    if is_mlcme { 50000.0 } else { 300.0 }
                )
            } else {
                0.0
            },
            lidar_dirs: if is_lidar {
                take_or!(raw, "lidar_dirs", parse_usize_pos, if is_mlcme { 64 } else { 16 })
            } else {
                0
            },
            lidar_rays_per_tick: if is_lidar {
                take_or!(
                    raw,
                    "lidar_rays_per_tick",
                    parse_usize_pos,
                    if is_mlcme { 1 } else { 16 }
                )
            } else {
                0
            },

            window: if is_mlcme {
                take_or!(raw, "window", parse_pos, 2.0)
            } else {
                0.0
            },
            slide: if is_mlcme {
                take_or!(raw, "slide", parse_pos, 1.0)
            } else {
                0.0
            },
            cons_period: if is_mlcme {
                take_or!(raw, "cons_period", parse_pos, 0.25)
            } else {
                0.0
            },
            cons_sigma_rot: if is_mlcme {
                take_or!(raw, "cons_sigma_rot", parse_pos, 0.01)
            } else {
                0.0
            },
            cons_sigma_pos: if is_mlcme {
                take_or!(raw, "cons_sigma_pos", parse_pos, 0.01)
            } else {
                0.0
            },
            ext_prior_sigma_rot: if is_mlcme {
                take_or!(raw, "ext_prior_sigma_rot", parse_pos, 1.0)
            } else {
                0.0
            },
            ext_prior_sigma_pos: if is_mlcme {
                take_or!(raw, "ext_prior_sigma_pos", parse_pos, 1.0)
            } else {
                0.0
            },
            init_err_rot: if is_mlcme {
                take_or!(
                    raw,
                    "init_err_rot",
                    parse_nonneg,
                    5f64.to_radians()
                )
            } else {
                0.0
            },
            init_err_pos: if is_mlcme {
                take_or!(raw, "init_err_pos", parse_nonneg, 0.1)
            } else {
                0.0
            },
        };
        raw.finish(scenario)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and parse a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("in config file {}", path.display()))
    }

    /// Cross-field checks that the per-key parsers cannot see.
    fn validate(&self) -> Result<()> {
        for &dt in &self.dt_grid {
            if dt >= self.horizon {
                bail!("dt_grid entry {dt} does not fit inside horizon {}", self.horizon);
            }
        }
        if self.scenario == Scenario::Mlcme {
            if self.slide > self.window {
                bail!(
                    "slide ({}) must not exceed window ({})",
                    self.slide,
                    self.window
                );
            }
            if self.window >= self.horizon {
                bail!(
                    "window ({}) must be smaller than horizon ({})",
                    self.window,
                    self.horizon
                );
            }
            for &dt in &self.dt_grid {
                if dt >= self.window {
                    bail!("dt_grid entry {dt} does not fit inside window {}", self.window);
                }
            }
        }
        Ok(())
    }

    /// Number of grid points the run will produce, one CSV row each.
    pub fn grid_len(&self) -> usize {
        self.omega_grid.len() * self.dt_grid.len() * self.repr_grid.len() * self.mode_grid.len()
    }
}

fn parse_string(_key: &str, s: &str) -> Result<String> {
    Ok(s.to_string())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
