//! Deterministic integration of the kinetic equations.
//!
//! The small and truncated systems are finite and integrated as they stand.
//! The full and large systems are integrated up to a size cap with the mass
//! above it lumped into a tail (see [`ClosureSystem`]); the cap defaults to
//! `max(4L + 2 ell, 64)`.
//!
//! Exhaustion is declared when the interaction mass drops below
//! `event_threshold`. The crossing is located by bisection on the dense
//! output, and the vanishing point of `M` is then extrapolated from the
//! local behaviour of `M / (-dM/dt)`, which is linear in `t_ex - t` for any
//! power-law approach to zero.

mod sdirk;
mod systems;

pub use sdirk::{OdeSystem, Sdirk4, StepControl, StepStats};
pub use systems::{ClosureSystem, KineticSystem, PairSystem};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kinetics::{self, clamp_component, ClusterDistribution, EmissionParams, SystemKind};
use crate::math;
use crate::trajectory::{Tracking, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: u64,
    /// Time resolution of the exhaustion-time bisection.
    pub event_tol: f64,
    /// Interaction mass below which the solution counts as exhausted.
    pub event_threshold: f64,
    pub record_dt: f64,
    pub tracking: Tracking,
    /// Size cap for the full and large systems.
    pub truncation: Option<usize>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-13,
            h0: 1e-6,
            h_min: 1e-14,
            max_steps: 1_000_000,
            event_tol: 1e-7,
            event_threshold: 1e-9,
            record_dt: 0.01,
            tracking: Tracking::All,
            truncation: None,
        }
    }
}

impl IntegratorConfig {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            rtol: self.rtol,
            atol: self.atol,
            h0: self.h0,
            h_min: self.h_min,
            max_steps: self.max_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.step_control().validate()?;
        if !(self.event_tol > 0.0) || !(self.event_threshold > 0.0) || !(self.record_dt > 0.0) {
            return Err(Error::InvalidParams(
                "event_tol, event_threshold and record_dt must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Default size cap for the full and large systems.
pub fn default_truncation(largest_initial: usize, ell: usize) -> usize {
    (4 * largest_initial + 2 * ell).max(64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    ReachedTEnd,
    /// `t_ex` is the extrapolated zero of `M`; `t_threshold` is where `M`
    /// crossed the event threshold.
    Exhausted {
        t_ex: f64,
        t_threshold: f64,
    },
    StepFailure {
        t: f64,
        h: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    /// Components set to zero after falling slightly below it.
    pub clamps: u64,
    pub steps: StepStats,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub trajectory: Trajectory,
    pub terminal: Terminal,
    pub diagnostics: Diagnostics,
}

/// A located exhaustion event.
#[derive(Debug, Clone, PartialEq)]
pub struct Exhaustion {
    pub t_ex: f64,
    pub t_threshold: f64,
    /// Dense-output state at `t_threshold`.
    pub state: Vec<f64>,
}

/// Integrates the kinetic equations selected by `params` from `u0`.
pub fn integrate(
    u0: &ClusterDistribution,
    params: &EmissionParams,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<SolveResult> {
    params.check_initial(u0)?;
    let ell = params.ell();
    let largest = u0.max_size().unwrap_or(1);
    match params.kind() {
        SystemKind::Small => {
            let sys = PairSystem::new(ell, ell);
            integrate_system(&sys, u0.to_dense(ell + 1)[1..].to_vec(), t_end, cfg)
        }
        SystemKind::Truncated(n) => {
            let sys = PairSystem::new(ell, n);
            integrate_system(&sys, u0.to_dense(n + 1)[1..].to_vec(), t_end, cfg)
        }
        SystemKind::Full | SystemKind::Large => {
            let cap = cfg
                .truncation
                .unwrap_or_else(|| default_truncation(largest, ell));
            if cap < largest || cap <= ell {
                return Err(Error::InvalidParams(alloc::format!(
                    "size cap {cap} must exceed both ell and the largest initial size {largest}"
                )));
            }
            let sys = ClosureSystem::new(ell, cap, kinetics::moment(u0, 1));
            let mut y0 = u0.to_dense(cap + 1)[1..].to_vec();
            y0.push(0.0);
            integrate_system(&sys, y0, t_end, cfg)
        }
    }
}

/// Integrates any kinetic system from `y0` at `t = 0`.
pub fn integrate_system<S: KineticSystem>(
    sys: &S,
    y0: Vec<f64>,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidParams("t_end must be positive".into()));
    }
    let mut trajectory = Trajectory::new();
    let mut diagnostics = Diagnostics::default();
    trajectory.push(sys.record(0.0, &y0, &cfg.tracking));
    if sys.interaction_mass(0.0, &y0) < cfg.event_threshold {
        return Ok(SolveResult {
            trajectory,
            terminal: Terminal::Exhausted {
                t_ex: 0.0,
                t_threshold: 0.0,
            },
            diagnostics,
        });
    }

    let mut ig = Sdirk4::new(sys, 0.0, y0, cfg.step_control())?;
    let mut targets = Vec::new();
    let mut k = 1u64;
    loop {
        let t = k as f64 * cfg.record_dt;
        if t >= t_end - 1e-12 * t_end.max(1.0) {
            break;
        }
        targets.push(t);
        k += 1;
    }
    targets.push(t_end);

    for &target in &targets {
        while ig.t() < target {
            match ig.step(target) {
                Ok(_) => {}
                Err(Error::StepFailure { t, h }) => {
                    diagnostics.steps = ig.stats();
                    return Ok(SolveResult {
                        trajectory,
                        terminal: Terminal::StepFailure { t, h },
                        diagnostics,
                    });
                }
                Err(e) => return Err(e),
            }
            if let Some(ex) = detect_exhaustion(&ig, cfg)? {
                let mut state = ex.state;
                clamp_state(sys, &mut state, &mut diagnostics)?;
                trajectory.push(sys.record(ex.t_threshold, &state, &cfg.tracking));
                diagnostics.steps = ig.stats();
                return Ok(SolveResult {
                    trajectory,
                    terminal: Terminal::Exhausted {
                        t_ex: ex.t_ex,
                        t_threshold: ex.t_threshold,
                    },
                    diagnostics,
                });
            }
            let mut y = ig.y().to_vec();
            if clamp_state(sys, &mut y, &mut diagnostics)? {
                ig.set_state(y)?;
            }
        }
        trajectory.push(sys.record(ig.t(), ig.y(), &cfg.tracking));
    }
    diagnostics.steps = ig.stats();
    Ok(SolveResult {
        trajectory,
        terminal: Terminal::ReachedTEnd,
        diagnostics,
    })
}

fn clamp_state<S: KineticSystem>(sys: &S, y: &mut [f64], diag: &mut Diagnostics) -> Result<bool> {
    let mut any = false;
    for n in 1..=sys.sizes() {
        let (v, clamped) = clamp_component(n, y[n - 1])?;
        if clamped {
            y[n - 1] = v;
            diag.clamps += 1;
            any = true;
        }
    }
    Ok(any)
}

/// Checks the last accepted step for a threshold crossing of the interaction
/// mass and, if there is one, locates it and extrapolates the exhaustion
/// time.
pub fn detect_exhaustion<S: KineticSystem>(
    ig: &Sdirk4<'_, S>,
    cfg: &IntegratorConfig,
) -> Result<Option<Exhaustion>> {
    let sys = ig.system();
    let thr = cfg.event_threshold;
    let t1 = ig.t();
    if sys.interaction_mass(t1, ig.y()) >= thr {
        return Ok(None);
    }
    let Some((t0, y0, f0)) = ig.previous() else {
        return Ok(None);
    };
    let mass_at = |t: f64| sys.interaction_mass(t, &ig.dense(t));
    let (mut lo, mut hi) = (t0, t1);
    while hi - lo > cfg.event_tol {
        let mid = 0.5 * (lo + hi);
        if mass_at(mid) >= thr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The upper end keeps `M` at or below the threshold.
    let t_threshold = hi;
    let state = ig.dense(t_threshold);

    let g0 = mass_over_rate(sys, t0, y0, Some(f0));
    let g1 = mass_over_rate(sys, t_threshold, &state, None);
    let t_ex = match (g0, g1) {
        (Some(g0), Some(g1)) if t_threshold > t0 => {
            let slope = (g1 - g0) / (t_threshold - t0);
            if slope < 0.0 {
                t_threshold - g1 / slope
            } else {
                t_threshold
            }
        }
        _ => t_threshold,
    };
    Ok(Some(Exhaustion {
        t_ex: t_ex.max(t_threshold),
        t_threshold,
        state,
    }))
}

/// `M / (-dM/dt)`, when `M` is positive and decreasing.
fn mass_over_rate<S: KineticSystem>(sys: &S, t: f64, y: &[f64], f: Option<&[f64]>) -> Option<f64> {
    let mass = sys.interaction_mass(t, y);
    let mut buf = vec![0.0; y.len()];
    let f = match f {
        Some(f) => f,
        None => {
            sys.rhs(t, y, &mut buf).ok()?;
            &buf
        }
    };
    let rate = sys.mass_rate(t, y, f);
    (mass > 0.0 && rate < 0.0).then(|| mass / -rate)
}

/// Exhaustion time of the `ell = 3` small system from `(p, q, 1 - p - q)`.
/// `None` when the initial state cannot react at all.
pub fn exhaustion_time(p: f64, q: f64, cfg: &IntegratorConfig) -> Result<Option<f64>> {
    let r = 1.0 - p - q;
    let r = if r < 0.0 && r > -1e-12 { 0.0 } else { r };
    let u0 = ClusterDistribution::initial(3, [(1, p), (2, q), (3, r)])?;
    let params = EmissionParams::new(3, SystemKind::Small)?;
    if kinetics::interaction_mass(&u0) < cfg.event_threshold {
        return Ok(None);
    }
    let cfg = IntegratorConfig {
        tracking: Tracking::Sizes(Vec::new()),
        record_dt: 1.0,
        ..cfg.clone()
    };
    match integrate(&u0, &params, 1.0, &cfg)?.terminal {
        Terminal::Exhausted { t_ex, .. } => Ok(Some(t_ex)),
        Terminal::ReachedTEnd => Ok(None),
        Terminal::StepFailure { t, h } => Err(Error::StepFailure { t, h }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCell {
    pub p: f64,
    pub q: f64,
    pub t_ex: Option<f64>,
}

/// Points `(p, q) = (i, j) / (grid_n - 1)` with `i + j <= grid_n - 1`.
pub fn heatmap_grid(grid_n: usize) -> Result<Vec<(f64, f64)>> {
    if grid_n < 2 {
        return Err(Error::InvalidParams("grid_n must be at least 2".into()));
    }
    let d = (grid_n - 1) as f64;
    let mut pts = Vec::new();
    for i in 0..grid_n {
        for j in 0..grid_n - i {
            pts.push((i as f64 / d, j as f64 / d));
        }
    }
    Ok(pts)
}

/// Exhaustion times of the three-species system over the `(p, q)` simplex.
/// Only `ell = 3` is supported.
pub fn exhaustion_heatmap(
    ell: usize,
    grid_n: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<HeatCell>> {
    if ell != 3 {
        return Err(Error::InvalidParams(
            "the heat map covers the ell = 3 system only".into(),
        ));
    }
    heatmap_grid(grid_n)?
        .into_iter()
        .map(|(p, q)| {
            Ok(HeatCell {
                p,
                q,
                t_ex: exhaustion_time(p, q, cfg)?,
            })
        })
        .collect()
}

/// Least-squares slope of `ln v` against `ln t` over samples in `window`.
pub fn small_time_slope(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::InvalidParams(
            "times and values differ in length".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|&(&t, &v)| t >= window.0 && t <= window.1 && t > 0.0 && v > 0.0)
        .map(|(&t, &v)| (math::ln(t), math::ln(v)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DomainError(
            "fewer than two positive samples in the window".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DomainError("window holds a single time".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three(p: f64, q: f64) -> ClusterDistribution {
        ClusterDistribution::initial(3, [(1, p), (2, q), (3, 1.0 - p - q)]).unwrap()
    }

    fn small3() -> EmissionParams {
        EmissionParams::new(3, SystemKind::Small).unwrap()
    }

    #[test]
    fn boundary_r_zero_is_linear() {
        let p = 0.4;
        let res = integrate(
            &three(p, 0.6),
            &small3(),
            0.25,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(res.terminal, Terminal::ReachedTEnd);
        for r in res.trajectory.records() {
            assert!((r.fraction(1) - (p + r.t)).abs() < 1e-9);
            assert!((r.fraction(2) - (1.0 - p - 2.0 * r.t)).abs() < 1e-9);
            assert_eq!(r.fraction(3), 0.0);
        }
    }

    #[test]
    fn boundary_exhaustion_times() {
        let cfg = IntegratorConfig::default();
        for p in [0.1, 0.4, 0.7] {
            let a = exhaustion_time(p, 1.0 - p, &cfg).unwrap().unwrap();
            assert!((a - (1.0 - p) / 2.0).abs() < 1e-6, "r = 0, p = {p}: {a}");
            let b = exhaustion_time(p, 0.0, &cfg).unwrap().unwrap();
            assert!((b - (1.0 - p)).abs() < 1e-6, "q = 0, p = {p}: {b}");
        }
        assert_eq!(exhaustion_time(1.0, 0.0, &cfg).unwrap(), None);
    }

    #[test]
    fn conservation_in_three_species() {
        let u0 = three(0.5, 0.3);
        let res = integrate(&u0, &small3(), 0.3, &IntegratorConfig::default()).unwrap();
        for r in res.trajectory.records() {
            assert!((r.moments[0] - (1.0 - r.t)).abs() < 1e-9, "t = {}", r.t);
            assert!((r.moments[1] - (1.7 - 3.0 * r.t)).abs() < 1e-9);
        }
    }

    #[test]
    fn exhaustion_record_sits_at_threshold() {
        let res = integrate(
            &three(0.5, 0.3),
            &small3(),
            1.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let Terminal::Exhausted { t_ex, t_threshold } = res.terminal else {
            panic!("{:?}", res.terminal);
        };
        assert!(t_ex >= t_threshold && t_ex - t_threshold < 1e-3);
        let recs = res.trajectory.records();
        let (last, before) = recs.split_last().unwrap();
        assert!(last.interaction_mass <= 1e-9);
        assert!(before.iter().all(|r| r.interaction_mass > 1e-9));
    }

    #[test]
    fn slope_of_power_law() {
        let t: Vec<f64> = (0..20)
            .map(|k| 1e-4 * 10f64.powf(k as f64 / 19.0))
            .collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * t * t).collect();
        assert!((small_time_slope(&t, &v, (1e-4, 1e-3)).unwrap() - 2.0).abs() < 1e-12);
        assert!(small_time_slope(&t[..1], &v[..1], (0.0, 1.0)).is_err());
    }

    #[test]
    fn heatmap_shape() {
        assert_eq!(heatmap_grid(4).unwrap().len(), 10);
        assert!(exhaustion_heatmap(2, 4, &IntegratorConfig::default()).is_err());
    }
}
