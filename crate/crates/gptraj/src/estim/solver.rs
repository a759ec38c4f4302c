//! Damped Gauss-Newton optimization over the factor graph, plus a fixed-lag
//! smoother that slides an active window along the trajectory.
//!
//! The normal equations are assembled into the block-tridiagonal-plus-border
//! structure of [`super::linalg::BandBorder`]: one band block per active
//! support time (stacking the tangents of all trajectories sharing the
//! grid), and a 6-dimensional border when an extrinsic is estimated.
//! Support states before `active_start` are held fixed; their Jacobian
//! blocks are dropped, which conditions the window on the frozen history.

use nalgebra::{DMatrix, DVector};

use super::linalg::BandBorder;
use super::{eval_all, Block, EstimError, Factor, FactorBlocks, Problem};
use crate::se3::{self, Pose};
use crate::traj::{SupportState, TrajError};
use crate::{V18, V6};

/// Damping factor applied when a step is rejected.
const LAMBDA_UP: f64 = 10.0;
/// Damping relaxation applied after an accepted step.
const LAMBDA_DOWN: f64 = 0.5;
/// Damping used when an undamped solve fails.
const FALLBACK_LAMBDA: f64 = 1e-4;
/// Slack for window boundary comparisons, in seconds.
const TIME_SLACK: f64 = 1e-9;

/// Parameters of the damped Gauss-Newton loop.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Maximum accepted iterations.
    pub max_iters: usize,
    /// Initial damping; zero runs undamped Gauss-Newton steps.
    pub lambda_init: f64,
    /// Relative cost decrease below which the solve is converged.
    pub rel_tol: f64,
    /// Absolute cost decrease below which the solve is converged; catches
    /// noiseless problems whose cost sits at the rounding floor, where the
    /// relative decrease is dominated by cancellation noise.
    pub abs_tol: f64,
    /// Optional robust-loss width applied to whitened residual norms.
    pub huber_delta: Option<f64>,
    /// Damping ceiling; exceeding it aborts the solve as non-converged.
    pub lambda_max: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            lambda_init: 1e-4,
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            huber_delta: None,
            lambda_max: 1e10,
        }
    }
}

/// One accepted iteration (entry 0 is the initial state).
#[derive(Debug, Clone, Copy)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub lambda: f64,
    pub step_norm: f64,
}

/// Outcome of a solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    /// Number of accepted iterations.
    pub iters: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub records: Vec<IterRecord>,
    /// Wall-clock time spent inside [`solve`], in seconds.  Covers factor
    /// evaluation and the linear algebra, not problem construction.
    pub solve_time_s: f64,
}

impl SolveReport {
    /// Plain-text iteration log, one line per accepted step.
    pub fn render(&self) -> String {
        let mut s = String::from("iter cost lambda step_norm\n");
        for r in &self.records {
            s.push_str(&format!(
                "{} {:.12e} {:.3e} {:.6e}\n",
                r.iter, r.cost, r.lambda, r.step_norm
            ));
        }
        s
    }
}

/// Where a block lands in the band-border layout.
#[derive(Debug, Clone, Copy)]
enum Loc {
    Band { idx: usize, off: usize },
    Border,
}

/// Resolved problem layout: which knots are active and how trajectories
/// interleave within a band block.
struct Layout {
    n_trajs: usize,
    active_start: usize,
    n_band: usize,
    block_dim: usize,
    bdim: usize,
}

impl Layout {
    fn new(problem: &Problem) -> Result<Self, EstimError> {
        let n_trajs = problem.trajs.len();
        let base = &problem.trajs[0];
        for t in problem.trajs.iter().skip(1) {
            if t.n_knots() != base.n_knots()
                || (t.t0() - base.t0()).abs() > TIME_SLACK
                || (t.dt() - base.dt()).abs() > TIME_SLACK
            {
                return Err(EstimError::Config(
                    "trajectories must share one support grid".into(),
                ));
            }
        }
        let n_knots = base.n_knots();
        if problem.active_start >= n_knots {
            return Err(EstimError::Config(
                "no active support states to optimize".into(),
            ));
        }
        Ok(Self {
            n_trajs,
            active_start: problem.active_start,
            n_band: n_knots - problem.active_start,
            block_dim: 18 * n_trajs,
            bdim: if problem.extrinsic.is_some() { 6 } else { 0 },
        })
    }

    fn locate(&self, block: &Block) -> Option<Loc> {
        match block {
            Block::Knot { traj, k } => {
                if *k < self.active_start {
                    None
                } else {
                    Some(Loc::Band {
                        idx: k - self.active_start,
                        off: 18 * traj,
                    })
                }
            }
            Block::Extrinsic => Some(Loc::Border),
        }
    }
}

/// Robust weight on a whitened residual norm.
fn huber_weight(norm: f64, delta: Option<f64>) -> f64 {
    match delta {
        None => 1.0,
        Some(d) => {
            if norm <= d {
                1.0
            } else {
                d / norm
            }
        }
    }
}

/// Robust cost of one whitened residual.
fn robust_cost(norm_sq: f64, delta: Option<f64>) -> f64 {
    match delta {
        None => norm_sq,
        Some(d) => {
            let n = norm_sq.sqrt();
            if n <= d {
                norm_sq
            } else {
                2.0 * d * n - d * d
            }
        }
    }
}

/// Total cost of a set of evaluated factors.
fn total_cost(blocks: &[FactorBlocks], delta: Option<f64>) -> f64 {
    blocks
        .iter()
        .map(|fb| robust_cost(fb.r.norm_squared(), delta))
        .sum()
}

/// Assemble the damped normal equations `H dx = -g` from evaluated factors.
fn assemble(
    layout: &Layout,
    blocks: &[FactorBlocks],
    delta: Option<f64>,
) -> Result<BandBorder, EstimError> {
    let mut sys = BandBorder::new(layout.n_band, layout.block_dim, layout.bdim);
    for fb in blocks {
        if fb.r.nrows() == 0 {
            continue;
        }
        let w = huber_weight(fb.r.norm(), delta);
        let locs: Vec<Option<Loc>> = fb.entries.iter().map(|(b, _)| layout.locate(b)).collect();
        for (i, (_, ji)) in fb.entries.iter().enumerate() {
            let Some(li) = locs[i] else { continue };
            let jtr: DVector<f64> = ji.transpose() * &fb.r * w;
            match li {
                Loc::Band { idx, off } => {
                    let mut view = sys.b[idx].rows_mut(off, ji.ncols());
                    view -= &jtr;
                }
                Loc::Border => {
                    sys.b_border -= &jtr;
                }
            }
            for (j, (_, jj)) in fb.entries.iter().enumerate() {
                let Some(lj) = locs[j] else { continue };
                let h: DMatrix<f64> = ji.transpose() * jj * w;
                match (li, lj) {
                    (Loc::Band { idx: bi, off: oi }, Loc::Band { idx: bj, off: oj }) => {
                        if bi == bj {
                            let mut v = sys.diag[bi].view_mut((oi, oj), (h.nrows(), h.ncols()));
                            v += &h;
                        } else if bi == bj + 1 {
                            let mut v = sys.sub[bj].view_mut((oi, oj), (h.nrows(), h.ncols()));
                            v += &h;
                        } else if bj != bi + 1 {
                            return Err(EstimError::Config(
                                "factor couples non-adjacent support states".into(),
                            ));
                        }
                        // The bj == bi + 1 case is covered by the mirrored
                        // ordered pair.
                    }
                    (Loc::Band { idx, off }, Loc::Border) => {
                        let mut v = sys.border[idx].view_mut((off, 0), (h.nrows(), h.ncols()));
                        v += &h;
                    }
                    (Loc::Border, Loc::Band { .. }) => {}
                    (Loc::Border, Loc::Border) => {
                        sys.corner += &h;
                    }
                }
            }
        }
    }
    Ok(sys)
}

/// Snapshot of the mutable state, for reverting rejected steps.
struct Snapshot {
    knots: Vec<Vec<SupportState>>,
    extrinsic: Option<Pose>,
}

impl Snapshot {
    fn take(problem: &Problem, active_start: usize) -> Self {
        Self {
            knots: problem
                .trajs
                .iter()
                .map(|t| t.knots()[active_start..].to_vec())
                .collect(),
            extrinsic: problem.extrinsic,
        }
    }

    fn restore(&self, problem: &mut Problem, active_start: usize) {
        for (ti, saved) in self.knots.iter().enumerate() {
            for (i, s) in saved.iter().enumerate() {
                *problem.trajs[ti].knot_mut(active_start + i) = *s;
            }
        }
        problem.extrinsic = self.extrinsic;
    }
}

/// Apply a solved step to every active support state and the extrinsic.
fn apply_delta(problem: &mut Problem, layout: &Layout, dx: &[DVector<f64>], de: &DVector<f64>) {
    for ti in 0..layout.n_trajs {
        for (bi, step) in dx.iter().enumerate() {
            let d = V18::from_column_slice(&step.as_slice()[18 * ti..18 * ti + 18]);
            problem.trajs[ti].apply_step(layout.active_start + bi, &d);
        }
    }
    if de.nrows() == 6 {
        if let Some(e) = problem.extrinsic.as_mut() {
            *e = e.compose(&se3::exp(&V6::from_column_slice(de.as_slice())));
        }
    }
}

fn step_norm(dx: &[DVector<f64>], de: &DVector<f64>) -> f64 {
    let band: f64 = dx.iter().map(|v| v.norm_squared()).sum();
    (band + de.norm_squared()).sqrt()
}

fn all_finite(dx: &[DVector<f64>], de: &DVector<f64>) -> bool {
    dx.iter().all(|v| v.iter().all(|x| x.is_finite())) && de.iter().all(|x| x.is_finite())
}

/// Minimize the factor costs with damped Gauss-Newton steps.
///
/// Steps are accepted only when they do not increase the cost; rejected
/// steps raise the damping and retry.  Convergence means the relative cost
/// decrease of an accepted step fell below `rel_tol`.
pub fn solve(problem: &mut Problem, opts: &SolveOptions) -> Result<SolveReport, EstimError> {
    let started = std::time::Instant::now();
    let layout = Layout::new(problem)?;
    let delta = opts.huber_delta;

    let mut blocks = eval_all(problem)?;
    let mut cost = total_cost(&blocks, delta);
    if !cost.is_finite() {
        return Err(EstimError::NonFinite("initial cost"));
    }
    let initial_cost = cost;
    let mut records = vec![IterRecord {
        iter: 0,
        cost,
        lambda: opts.lambda_init,
        step_norm: 0.0,
    }];
    let mut lambda = opts.lambda_init;
    let mut converged = false;
    let mut iters = 0;

    'outer: for iter in 1..=opts.max_iters {
        let base = assemble(&layout, &blocks, delta)?;
        loop {
            let mut sys = base.clone();
            if lambda > 0.0 {
                sys.add_damping(lambda);
            }
            let step = match sys.solve() {
                Ok((dx, de)) if all_finite(&dx, &de) => Some((dx, de)),
                _ => None,
            };
            let Some((dx, de)) = step else {
                lambda = if lambda == 0.0 {
                    FALLBACK_LAMBDA
                } else {
                    lambda * LAMBDA_UP
                };
                if lambda > opts.lambda_max {
                    break 'outer;
                }
                continue;
            };

            let snap = Snapshot::take(problem, layout.active_start);
            apply_delta(problem, &layout, &dx, &de);
            // A trial state can push the blended rotation outside the
            // kernel domain; that is a rejectable step, not a hard error.
            let trial = match eval_all(problem) {
                Ok(b) => Some(b),
                Err(EstimError::Traj(TrajError::BlendDomain { .. })) => None,
                Err(e) => return Err(e),
            };
            let new_cost = trial
                .as_ref()
                .map(|b| total_cost(b, delta))
                .unwrap_or(f64::INFINITY);

            if new_cost.is_finite() && new_cost <= cost {
                blocks = trial.expect("finite cost from a rejected evaluation");
                let prev = cost;
                cost = new_cost;
                iters = iter;
                records.push(IterRecord {
                    iter,
                    cost,
                    lambda,
                    step_norm: step_norm(&dx, &de),
                });
                lambda *= LAMBDA_DOWN;
                if prev - cost <= opts.rel_tol * prev + opts.abs_tol {
                    converged = true;
                    break 'outer;
                }
                continue 'outer;
            }

            snap.restore(problem, layout.active_start);
            lambda = if lambda == 0.0 {
                FALLBACK_LAMBDA
            } else {
                lambda * LAMBDA_UP
            };
            if lambda > opts.lambda_max {
                break 'outer;
            }
        }
    }

    Ok(SolveReport {
        converged,
        iters,
        initial_cost,
        final_cost: cost,
        records,
        solve_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Result of one fixed-lag window.
#[derive(Debug, Clone)]
pub struct WindowResult {
    /// Upper time bound of the window.
    pub t_hi: f64,
    pub report: SolveReport,
    /// Extrinsic estimate after the window's solve.
    pub extrinsic: Option<Pose>,
}

/// Largest support index a factor touches, or `None` when it only touches
/// the extrinsic.
fn factor_max_knot(f: &Factor, t0: f64, dt: f64, n_knots: usize) -> Option<usize> {
    let seg_hi = |t: f64| -> usize {
        let seg = (((t - t0) / dt).floor() as isize).clamp(0, n_knots as isize - 2) as usize;
        seg + 1
    };
    match f {
        Factor::MotionPrior { seg, .. } => Some(seg + 1),
        Factor::KnotPrior { k, .. } => Some(*k),
        Factor::Range { t, .. } => Some(seg_hi(*t)),
        Factor::PointToPlane { t, .. } => Some(seg_hi(*t)),
        Factor::ExtrinsicConsistency { t, .. } => Some(seg_hi(*t)),
        Factor::ExtrinsicPrior { .. } => None,
    }
}

/// Run a sliding-window smoother until `horizon`.
///
/// Each window extends the trajectories to the window's upper bound, pulls
/// new factors from `factor_source` over the freshly covered interval,
/// freezes support states older than `window` seconds, drops factors that
/// no longer touch active states, re-anchors any extrinsic prior at the
/// current estimate, and solves.  With `window` covering the whole horizon
/// this reduces to a batch solve.
pub fn fixed_lag_run<F>(
    problem: &mut Problem,
    window: f64,
    slide: f64,
    horizon: f64,
    opts: &SolveOptions,
    mut factor_source: F,
) -> Result<Vec<WindowResult>, EstimError>
where
    F: FnMut(f64, f64) -> Vec<Factor>,
{
    if window <= 0.0 || slide <= 0.0 {
        return Err(EstimError::Config(
            "window and slide must be positive".into(),
        ));
    }
    let t0 = problem.trajs[0].t0();
    if horizon <= t0 + TIME_SLACK {
        return Err(EstimError::Config(
            "horizon must lie beyond the trajectory start".into(),
        ));
    }

    let mut results = Vec::new();
    let mut prev_hi = t0;
    let mut t_hi = (t0 + window).min(horizon);
    loop {
        for tr in &mut problem.trajs {
            tr.extend_to(t_hi);
        }
        problem.sync_motion_priors();
        problem.factors.extend(factor_source(prev_hi, t_hi));

        let dt = problem.trajs[0].dt();
        let n = problem.trajs[0].n_knots();
        let lo = t_hi - window;
        let start = if lo <= t0 {
            0
        } else {
            ((lo - t0) / dt - TIME_SLACK).ceil() as usize
        };
        problem.active_start = start.min(n.saturating_sub(2));

        let keep_from = problem.active_start;
        problem
            .factors
            .retain(|f| match factor_max_knot(f, t0, dt, n) {
                Some(k) => k >= keep_from,
                None => true,
            });
        if let Some(e) = problem.extrinsic {
            for f in &mut problem.factors {
                if let Factor::ExtrinsicPrior { prior, .. } = f {
                    *prior = e;
                }
            }
        }

        let report = solve(problem, opts)?;
        results.push(WindowResult {
            t_hi,
            report,
            extrinsic: problem.extrinsic,
        });

        if t_hi >= horizon - TIME_SLACK {
            break;
        }
        prev_hi = t_hi;
        t_hi = (t_hi + slide).min(horizon);
    }
    Ok(results)
}
