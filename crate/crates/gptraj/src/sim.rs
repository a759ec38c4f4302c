//! Synthetic ground-truth trajectories and seeded measurement simulators.
//!
//! Three analytic vehicle motions drive the benchmarks:
//!
//! - [`GtKind::Split`]: rotation and translation follow independent
//!   sinusoids, so the body's attitude is unrelated to where it is heading.
//! - [`GtKind::NonSplit`]: the body x-axis stays tangent to the translation
//!   path, like a fixed-wing aircraft or a wheeled vehicle.
//! - [`GtKind::Lissajous`]: a planar figure-eight at constant height with
//!   the tangent-frame orientation rule, used by the two-sensor rig runs.
//!
//! Two measurement models consume a pose function of time:
//!
//! - [`simulate_uwb`]: body-mounted tags range to fixed anchors at a fixed
//!   period under additive Gaussian noise.
//! - [`simulate_lidar`]: a body-mounted sensor traces rays against the six
//!   walls of an axis-aligned box room; each ray returns a noisy range that
//!   is converted back to a sensor-frame point, tagged with the wall that
//!   generated it so factors can associate points to planes analytically.
//!
//! Determinism: every draw comes from a counter-mode generator keyed by the
//! master seed with a dedicated stream per (measurement kind, sensor, tick),
//! so measurement sets are bitwise reproducible regardless of iteration or
//! thread order, and changing one sensor's noise never shifts another's.
//!
//! Conventions: rotations are world-from-body, positions world-frame,
//! lidar points sensor-frame, SI units throughout.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::se3::Pose;
use crate::so3;
use crate::{M3, V3};

/// Stream-id tag for range measurements (highest byte of the stream word).
const STREAM_RANGE: u64 = 1;
/// Stream-id tag for lidar measurements.
const STREAM_LIDAR: u64 = 2;

/// Slack for accepting a tick time on the boundary of the horizon despite
/// floating-point accumulation in `k * period`.
const TICK_SLACK: f64 = 1e-9;

/// Rays whose noisy range would fall below this are dropped rather than
/// emitted with a non-physical length. This never triggers for the shipped
/// scenarios, whose sensors keep well over a meter of wall clearance.
const MIN_RAY_RANGE: f64 = 1e-3;

/// Errors from geometry construction, simulation, and measurement parsing.
#[derive(Debug, Error)]
pub enum SimError {
    /// A sensor origin left the room interior during simulation.
    #[error("sensor outside the room at t = {t}")]
    OutsideRoom {
        /// Time of the first offending tick.
        t: f64,
    },
    /// Invalid geometry parameters (non-positive room dimensions, ...).
    #[error("invalid geometry: {0}")]
    Geometry(String),
    /// A measurement text line failed to parse.
    #[error("parse error on line {line}: {msg}")]
    Parse {
        /// 1-based line number.
        line: usize,
        /// What was wrong.
        msg: String,
    },
    /// Underlying I/O failure while reading or writing measurement text.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Ground-truth trajectories
// ---------------------------------------------------------------------------

/// Family of analytic ground-truth motions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtKind {
    /// Attitude sinusoids independent of the translation sinusoids.
    Split,
    /// Body x-axis tangent to the translation path.
    NonSplit,
    /// Planar figure-eight at constant height, tangent-frame orientation.
    Lissajous,
}

/// Analytic ground-truth trajectory: a smooth pose function of time.
#[derive(Debug, Clone, Copy)]
pub struct GtTrajectory {
    kind: GtKind,
    /// Angular frequency of the motion in rad/s.
    omega: f64,
}

impl GtTrajectory {
    /// A ground-truth trajectory of the given family and frequency.
    pub fn new(kind: GtKind, omega: f64) -> Self {
        Self { kind, omega }
    }

    /// Which analytic family this is.
    pub fn kind(&self) -> GtKind {
        self.kind
    }

    /// Angular frequency in rad/s.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// World-from-body pose at time `t`.
    ///
    /// The phase constants 57 and 43 are radian arguments; they de-align the
    /// axes so no coordinate starts at an extremum.
    pub fn pose(&self, t: f64) -> Pose {
        let w = self.omega;
        match self.kind {
            GtKind::Split => {
                let theta = V3::new(
                    std::f64::consts::FRAC_PI_2 * (w * t + 57.0).cos(),
                    std::f64::consts::FRAC_PI_2 * (w * t + 57.0).sin(),
                    std::f64::consts::PI * 3f64.sqrt() / 2.0 * (w * t / 3.0 + 43.0).sin(),
                );
                let p = V3::new(
                    5.0 * (0.45 * t + 43.0).sin(),
                    5.0 * (0.45 * t + 43.0).cos(),
                    5.0 * (0.15 * t + 57.0).cos(),
                );
                Pose::new(so3::exp(&theta), p)
            }
            GtKind::NonSplit => {
                let p = V3::new(
                    5.0 * (w * t + 43.0).sin(),
                    5.0 * (w * t + 43.0).cos(),
                    5.0 * (w * t / 3.0 + 57.0).cos(),
                );
                let pdot = V3::new(
                    5.0 * w * (w * t + 43.0).cos(),
                    -5.0 * w * (w * t + 43.0).sin(),
                    -5.0 * w / 3.0 * (w * t / 3.0 + 57.0).sin(),
                );
                Pose::new(tangent_frame(&p, &pdot), p)
            }
            GtKind::Lissajous => {
                // y = 2 sin(wt) cos(wt) = sin(2wt), so ydot = 2w cos(2wt).
                let p = V3::new(
                    2.0 * (w * t).sin(),
                    2.0 * (w * t).sin() * (w * t).cos(),
                    0.75,
                );
                let pdot = V3::new(2.0 * w * (w * t).cos(), 2.0 * w * (2.0 * w * t).cos(), 0.0);
                Pose::new(tangent_frame(&p, &pdot), p)
            }
        }
    }
}

/// Orientation whose x-axis is the unit tangent of the path: `e_x` along the
/// velocity, `e_z` along `(p / |p|) ^ e_x` re-normalized so the frame stays
/// orthonormal, and `e_y = e_z ^ e_x` closing the right-handed triad.
///
/// Degenerate when the velocity vanishes or aligns with the position
/// direction; neither occurs on the shipped motions, whose planar velocity
/// never vanishes while the position keeps an out-of-plane component.
fn tangent_frame(p: &V3, pdot: &V3) -> M3 {
    let e_x = pdot / pdot.norm();
    let e_z = p.normalize().cross(&e_x).normalize();
    let e_y = e_z.cross(&e_x);
    M3::from_columns(&[e_x, e_y, e_z])
}

// ---------------------------------------------------------------------------
// Rooms and ray casting
// ---------------------------------------------------------------------------

/// One wall plane: points on the wall satisfy `normal . x + offset = 0`,
/// and the room interior has `normal . x + offset > 0`.
#[derive(Debug, Clone, Copy)]
pub struct Plane {
    /// Inward-facing unit normal.
    pub normal: V3,
    /// Plane offset in the equation `normal . x + offset = 0`.
    pub offset: f64,
}

/// An axis-aligned box room bounded by six inward-facing wall planes.
///
/// Walls are indexed `0..6` in the order `+x, -x, +y, -y, +z, -z`.
#[derive(Debug, Clone, Copy)]
pub struct BoxRoom {
    planes: [Plane; 6],
    center: V3,
    half: V3,
}

impl BoxRoom {
    /// An axis-aligned box of full extents `dims` centered at `center`.
    pub fn centered(center: V3, dims: V3) -> Result<Self, SimError> {
        if dims.min().is_nan() || dims.min() <= 0.0 {
            return Err(SimError::Geometry(format!(
                "room dimensions must be positive, got {:?}",
                (dims.x, dims.y, dims.z)
            )));
        }
        let half = dims / 2.0;
        let mut planes = [Plane {
            normal: V3::zeros(),
            offset: 0.0,
        }; 6];
        for axis in 0..3 {
            let mut n = V3::zeros();
            // Wall on the + side has inward normal -e_axis and sits at
            // center[axis] + half[axis], so n . x + offset = 0 there.
            n[axis] = -1.0;
            planes[2 * axis] = Plane {
                normal: n,
                offset: center[axis] + half[axis],
            };
            n[axis] = 1.0;
            planes[2 * axis + 1] = Plane {
                normal: n,
                offset: -(center[axis] - half[axis]),
            };
        }
        Ok(Self {
            planes,
            center,
            half,
        })
    }

    /// The six wall planes, indexed `+x, -x, +y, -y, +z, -z`.
    pub fn planes(&self) -> &[Plane; 6] {
        &self.planes
    }

    /// Whether `x` lies strictly inside the room.
    pub fn contains(&self, x: &V3) -> bool {
        let d = x - self.center;
        (0..3).all(|axis| d[axis].abs() < self.half[axis])
    }
}

/// Nearest wall hit by the ray `origin + t dir`, as `(range, wall index)`.
///
/// Only walls the ray is heading into (`normal . dir < 0`) are candidates;
/// from a point strictly inside the room the nearest such intersection is
/// the physical first hit.
pub fn ray_box(origin: &V3, dir: &V3, room: &BoxRoom) -> Result<(f64, usize), SimError> {
    if !room.contains(origin) {
        return Err(SimError::OutsideRoom { t: f64::NAN });
    }
    let mut best: Option<(f64, usize)> = None;
    for (wall, plane) in room.planes().iter().enumerate() {
        let denom = plane.normal.dot(dir);
        if denom >= 0.0 {
            continue;
        }
        let range = -(plane.normal.dot(origin) + plane.offset) / denom;
        if best.is_none_or(|(b, _)| range < b) {
            best = Some((range, wall));
        }
    }
    // A unit direction always heads into at least one of six axis-aligned
    // inward normals, so a hit exists whenever the origin is interior.
    best.ok_or_else(|| SimError::Geometry("ray parallel to every wall".into()))
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

/// One range measurement from a body-mounted tag to a fixed anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeas {
    /// Measurement time.
    pub t: f64,
    /// Index of the tag on the body.
    pub tag: usize,
    /// Index of the anchor in the world.
    pub anchor: usize,
    /// Measured distance in meters.
    pub d: f64,
}

/// One lidar return: a sensor-frame point and the wall that generated it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    /// Measurement time.
    pub t: f64,
    /// Index of the sensor on the rig.
    pub lidar: usize,
    /// Point in the sensor frame.
    pub p: V3,
    /// Index of the wall the generating ray hit.
    pub wall: usize,
}

/// The generator for one sensor's tick: same key as the master seed with a
/// stream word `(kind << 56) | (sensor << 40) | tick`, so every
/// (kind, sensor, tick) triple draws from an independent substream.
fn tick_rng(seed: u64, kind: u64, sensor: usize, tick: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((kind << 56) | ((sensor as u64) << 40) | tick);
    rng
}

/// Gaussian range noise; `sigma = 0` is exact (no draw at all, so noiseless
/// runs stay bitwise independent of the distribution implementation).
fn range_noise(rng: &mut ChaCha12Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

/// Simulate tag-to-anchor ranging at a fixed period.
///
/// Ticks are `t = k period` for `k = 1, 2, ...` up to and including
/// `horizon`; each tick yields one measurement per (tag, anchor) pair in
/// index order: `d = |R_t x_tag + p_t - anchor| + noise`.
pub fn simulate_uwb<F: Fn(f64) -> Pose>(
    pose_of: F,
    anchors: &[V3],
    tags: &[V3],
    period: f64,
    horizon: f64,
    sigma: f64,
    seed: u64,
) -> Vec<RangeMeas> {
    let n_ticks = ((horizon + TICK_SLACK) / period).floor() as u64;
    let mut out = Vec::with_capacity(n_ticks as usize * tags.len() * anchors.len());
    for k in 1..=n_ticks {
        let t = k as f64 * period;
        let pose = pose_of(t);
        for (tag, x_tag) in tags.iter().enumerate() {
            let mut rng = tick_rng(seed, STREAM_RANGE, tag, k);
            let world_tag = pose.r * x_tag + pose.p;
            for (anchor, x_anchor) in anchors.iter().enumerate() {
                let d = (world_tag - x_anchor).norm() + range_noise(&mut rng, sigma);
                out.push(RangeMeas { t, tag, anchor, d });
            }
        }
    }
    out
}

/// Ray pattern and timing of one lidar.
#[derive(Debug, Clone, Copy)]
pub struct LidarConfig {
    /// Size of the fixed direction lattice in the sensor frame.
    pub n_dirs: usize,
    /// Directions traced per tick, cycling through the lattice in order.
    pub rays_per_tick: usize,
    /// Tick rate in Hz.
    pub rate: f64,
    /// Range noise standard deviation in meters.
    pub sigma: f64,
}

/// Evenly distributed unit directions on the sphere: latitude from the
/// midpoint rule on `z`, longitude stepping by the golden angle.
pub fn sphere_lattice(n: usize) -> Vec<V3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            V3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Simulate wall returns for one body-mounted lidar.
///
/// At each tick `t = k / rate` the sensor pose is the body pose composed
/// with the (possibly time-varying) mount. `rays_per_tick` lattice
/// directions are traced per tick, continuing through the lattice across
/// ticks so a low per-tick count still sweeps the whole pattern. Each hit
/// range gets Gaussian noise and is converted back to a sensor-frame point.
///
/// Fails with the offending timestamp if the sensor origin ever leaves the
/// room interior.
pub fn simulate_lidar<F, M>(
    pose_of: F,
    mount_of: M,
    room: &BoxRoom,
    cfg: &LidarConfig,
    horizon: f64,
    lidar: usize,
    seed: u64,
) -> Result<Vec<LidarPoint>, SimError>
where
    F: Fn(f64) -> Pose,
    M: Fn(f64) -> Pose,
{
    let dirs = sphere_lattice(cfg.n_dirs);
    let n_ticks = ((horizon + TICK_SLACK) * cfg.rate).floor() as u64;
    let mut out = Vec::with_capacity(n_ticks as usize * cfg.rays_per_tick);
    for k in 1..=n_ticks {
        let t = k as f64 / cfg.rate;
        let sensor = pose_of(t).compose(&mount_of(t));
        if !room.contains(&sensor.p) {
            return Err(SimError::OutsideRoom { t });
        }
        let mut rng = tick_rng(seed, STREAM_LIDAR, lidar, k);
        for j in 0..cfg.rays_per_tick {
            let idx = ((k - 1) as usize * cfg.rays_per_tick + j) % cfg.n_dirs;
            let world_dir = sensor.r * dirs[idx];
            let (range, wall) = ray_box(&sensor.p, &world_dir, room)?;
            let noisy = range + range_noise(&mut rng, cfg.sigma);
            if noisy < MIN_RAY_RANGE {
                continue;
            }
            out.push(LidarPoint {
                t,
                lidar,
                p: noisy * dirs[idx],
                wall,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Two-sensor rig
// ---------------------------------------------------------------------------

/// Body-from-sensor mounts of the two-sensor rig at time `t`.
///
/// Sensor 0 pitches 45 degrees and sits at the body origin. Sensor 1 yaws
/// 180 degrees and hangs behind and below; its vertical offset slips from
/// -0.25 m to -0.35 m during `t` in (10, 20), mimicking a mechanical holder
/// shifting mid-run, which the calibration experiments must detect and
/// re-converge from.
pub fn rig_mounts(t: f64) -> [Pose; 2] {
    let pitch = std::f64::consts::FRAC_PI_4;
    let mount0 = Pose::new(so3::exp(&V3::new(0.0, pitch, 0.0)), V3::zeros());
    let z = if t > 10.0 && t < 20.0 { -0.35 } else { -0.25 };
    let mount1 = Pose::new(
        so3::exp(&V3::new(0.0, 0.0, std::f64::consts::PI)),
        V3::new(-0.5, 0.0, z),
    );
    [mount0, mount1]
}

/// Ground-truth sensor-0-from-sensor-1 extrinsic of [`rig_mounts`] at `t`.
pub fn rig_relative_extrinsic(t: f64) -> Pose {
    let [m0, m1] = rig_mounts(t);
    m0.inverse().compose(&m1)
}

// ---------------------------------------------------------------------------
// Text dump / load
// ---------------------------------------------------------------------------

/// Write range measurements as lines `RANGE t tag anchor d`.
///
/// Floats use the shortest round-trip decimal form, so a dump/load cycle
/// reproduces the measurement set bitwise.
pub fn write_ranges<W: Write>(w: &mut W, meas: &[RangeMeas]) -> Result<(), SimError> {
    for m in meas {
        writeln!(w, "RANGE {} {} {} {}", m.t, m.tag, m.anchor, m.d)?;
    }
    Ok(())
}

/// Read range measurements written by [`write_ranges`].
pub fn read_ranges<R: BufRead>(r: R) -> Result<Vec<RangeMeas>, SimError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| SimError::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        if fields.len() != 5 || fields[0] != "RANGE" {
            return Err(err("expected `RANGE t tag anchor d`"));
        }
        out.push(RangeMeas {
            t: fields[1].parse().map_err(|_| err("bad time"))?,
            tag: fields[2].parse().map_err(|_| err("bad tag index"))?,
            anchor: fields[3].parse().map_err(|_| err("bad anchor index"))?,
            d: fields[4].parse().map_err(|_| err("bad distance"))?,
        });
    }
    Ok(out)
}

/// Write lidar points as lines `LIDAR t lidar x y z wall`.
pub fn write_points<W: Write>(w: &mut W, points: &[LidarPoint]) -> Result<(), SimError> {
    for pt in points {
        writeln!(
            w,
            "LIDAR {} {} {} {} {} {}",
            pt.t, pt.lidar, pt.p.x, pt.p.y, pt.p.z, pt.wall
        )?;
    }
    Ok(())
}

/// Read lidar points written by [`write_points`].
pub fn read_points<R: BufRead>(r: R) -> Result<Vec<LidarPoint>, SimError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| SimError::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        if fields.len() != 7 || fields[0] != "LIDAR" {
            return Err(err("expected `LIDAR t lidar x y z wall`"));
        }
        let coord =
            |s: &str| -> Result<f64, SimError> { s.parse().map_err(|_| err("bad coordinate")) };
        out.push(LidarPoint {
            t: fields[1].parse().map_err(|_| err("bad time"))?,
            lidar: fields[2].parse().map_err(|_| err("bad lidar index"))?,
            p: V3::new(coord(fields[3])?, coord(fields[4])?, coord(fields[5])?),
            wall: fields[6].parse().map_err(|_| err("bad wall index"))?,
        });
    }
    Ok(out)
}
