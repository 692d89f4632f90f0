//! Five-stage, order-4 singly diagonally implicit Runge–Kutta method
//! (Hairer & Wanner, SDIRK4) with an embedded order-3 estimate.
//!
//! The method is L-stable and stiffly accurate, so the last stage is the new
//! state. Stages are solved by simplified Newton with one LU factorization of
//! `I - h γ J`, which is kept across steps while Newton converges quickly and
//! the step size stays near the one it was built for.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;

const GAMMA: f64 = 0.25;
const C: [f64; 5] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
const A: [[f64; 5]; 5] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
];
/// `b - b_hat`, with `b` the last row of `A`.
const E: [f64; 5] = [
    25.0 / 24.0 - 59.0 / 48.0,
    -49.0 / 48.0 + 17.0 / 96.0,
    125.0 / 16.0 - 225.0 / 32.0,
    0.0,
    0.25,
];

const NEWTON_MAX_ITER: usize = 8;
const NEWTON_TOL: f64 = 1e-2;

/// A first-order system `y' = f(t, y)` with an analytic Jacobian.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
    /// Writes `∂f/∂y` into `jac` (already sized `dim × dim`).
    fn jacobian(&self, t: f64, y: &[f64], jac: &mut DMatrix<f64>) -> Result<()>;
    /// Whether a trial state may be accepted (for example, no component
    /// meaningfully negative).
    fn admissible(&self, _y: &[f64]) -> bool {
        true
    }
}

/// Integrator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: u64,
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol >= 1e-13) || !(self.atol > 0.0) {
            return Err(Error::InvalidParams(
                "need rtol >= 1e-13 and atol > 0".into(),
            ));
        }
        if !(self.h_min > 0.0) || !(self.h0 >= self.h_min) {
            return Err(Error::InvalidParams("need 0 < h_min <= h0".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParams("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Work counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub jacobians: u64,
    pub factorizations: u64,
    pub newton_failures: u64,
}

struct Factor {
    lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    h: f64,
}

enum Attempt {
    Done {
        y1: Vec<f64>,
        f1: Vec<f64>,
        err: f64,
        iters: usize,
    },
    NewtonFailed,
    RhsFailed,
}

/// Stepper state: the current point plus the last accepted step for dense
/// output.
pub struct Sdirk4<'a, S: OdeSystem> {
    sys: &'a S,
    ctl: StepControl,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    prev: Option<(f64, Vec<f64>, Vec<f64>)>,
    jac: DMatrix<f64>,
    jac_current: bool,
    jac_t: Option<f64>,
    factor: Option<Factor>,
    stats: StepStats,
}

impl<S: OdeSystem> core::fmt::Debug for Sdirk4<'_, S> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Sdirk4")
            .field("t", &self.t)
            .field("h", &self.h)
            .field("dim", &self.y.len())
            .field("stats", &self.stats)
            .finish()
    }
}

impl<'a, S: OdeSystem> Sdirk4<'a, S> {
    pub fn new(sys: &'a S, t0: f64, y0: Vec<f64>, ctl: StepControl) -> Result<Self> {
        ctl.validate()?;
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::InvalidParams(
                "state length does not match the system".into(),
            ));
        }
        let mut f = vec![0.0; n];
        sys.rhs(t0, &y0, &mut f)?;
        Ok(Self {
            sys,
            h: ctl.h0,
            ctl,
            t: t0,
            y: y0,
            f,
            prev: None,
            jac: DMatrix::zeros(n, n),
            jac_current: false,
            jac_t: None,
            factor: None,
            stats: StepStats::default(),
        })
    }

    pub fn system(&self) -> &'a S {
        self.sys
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    /// `f(t, y)` at the current point.
    pub fn f(&self) -> &[f64] {
        &self.f
    }
    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Overwrites the current state in place (used for clamping tiny
    /// negative components). Re-evaluates `f`.
    pub fn set_state(&mut self, y: Vec<f64>) -> Result<()> {
        self.sys.rhs(self.t, &y, &mut self.f)?;
        self.y = y;
        Ok(())
    }

    /// Cubic Hermite interpolant over the last accepted step.
    pub fn dense(&self, t: f64) -> Vec<f64> {
        let Some((t0, y0, f0)) = &self.prev else {
            return self.y.clone();
        };
        let h = self.t - t0;
        let th = (t - t0) / h;
        let h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
        let h10 = th * (1.0 - th) * (1.0 - th);
        let h01 = th * th * (3.0 - 2.0 * th);
        let h11 = th * th * (th - 1.0);
        (0..self.y.len())
            .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * self.y[i] + h11 * h * self.f[i])
            .collect()
    }

    /// Start of the last accepted step with its state and slope.
    pub fn previous(&self) -> Option<(f64, &[f64], &[f64])> {
        self.prev
            .as_ref()
            .map(|(t, y, f)| (*t, y.as_slice(), f.as_slice()))
    }

    fn weight(&self, i: usize, other: f64) -> f64 {
        self.ctl.atol + self.ctl.rtol * math::abs(self.y[i]).max(math::abs(other))
    }

    fn refresh_jacobian(&mut self) -> Result<()> {
        self.sys.jacobian(self.t, &self.y, &mut self.jac)?;
        self.stats.jacobians += 1;
        self.jac_current = true;
        self.jac_t = Some(self.t);
        self.factor = None;
        Ok(())
    }

    fn factorize(&mut self, h: f64) {
        let n = self.y.len();
        let mut m = &self.jac * (-h * GAMMA);
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        self.factor = Some(Factor { lu: m.lu(), h });
        self.stats.factorizations += 1;
    }

    fn attempt(&self, h: f64) -> Attempt {
        let n = self.y.len();
        let factor = self.factor.as_ref().expect("factorized");
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(5);
        let mut base = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut fz = vec![0.0; n];
        let mut rhs = DVector::<f64>::zeros(n);
        let mut max_iters = 0;
        for s in 0..5 {
            for i in 0..n {
                let mut acc = self.y[i];
                for (j, kj) in k.iter().enumerate() {
                    acc += h * A[s][j] * kj[i];
                }
                base[i] = acc;
                let guess_slope = k.last().map_or(self.f[i], |kl| kl[i]);
                z[i] = acc + h * GAMMA * guess_slope;
            }
            let ts = self.t + C[s] * h;
            let mut prev_norm = f64::INFINITY;
            let mut converged = false;
            for it in 0..NEWTON_MAX_ITER {
                if self.sys.rhs(ts, &z, &mut fz).is_err() {
                    return Attempt::RhsFailed;
                }
                for i in 0..n {
                    rhs[i] = base[i] + h * GAMMA * fz[i] - z[i];
                }
                if !factor.lu.solve_mut(&mut rhs) {
                    return Attempt::NewtonFailed;
                }
                let mut norm: f64 = 0.0;
                for i in 0..n {
                    z[i] += rhs[i];
                    norm = norm.max(math::abs(rhs[i]) / self.weight(i, z[i]));
                }
                if !norm.is_finite() {
                    return Attempt::NewtonFailed;
                }
                max_iters = max_iters.max(it + 1);
                if norm <= NEWTON_TOL {
                    converged = true;
                    break;
                }
                if it > 0 && norm > 0.9 * prev_norm {
                    return Attempt::NewtonFailed;
                }
                prev_norm = norm;
            }
            if !converged {
                return Attempt::NewtonFailed;
            }
            k.push(
                z.iter()
                    .zip(&base)
                    .map(|(zi, bi)| (zi - bi) / (h * GAMMA))
                    .collect(),
            );
        }
        let y1 = z;
        let f1 = k[4].clone();
        for i in 0..n {
            rhs[i] = h * (0..5).map(|s| E[s] * k[s][i]).sum::<f64>();
        }
        // Filtering through the iteration matrix keeps the estimate bounded
        // on stiff components.
        if !factor.lu.solve_mut(&mut rhs) {
            return Attempt::NewtonFailed;
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            err = err.max(math::abs(rhs[i]) / self.weight(i, y1[i]));
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }
        Attempt::Done {
            y1,
            f1,
            err,
            iters: max_iters,
        }
    }

    /// Takes one accepted step, never past `t_limit`. Returns the new time.
    pub fn step(&mut self, t_limit: f64) -> Result<f64> {
        let span = t_limit - self.t;
        if !(span > 0.0) {
            return Err(Error::InvalidParams(
                "step target is not ahead of the current time".into(),
            ));
        }
        loop {
            if self.stats.accepted + self.stats.rejected >= self.ctl.max_steps {
                return Err(Error::StepFailure {
                    t: self.t,
                    h: self.h,
                });
            }
            // Stretch slightly to avoid leaving a sliver before the target.
            let clipped = self.h >= span * (1.0 - 1e-9) || span - self.h < 1e-3 * self.h;
            let h = if clipped { span } else { self.h };
            if h < self.ctl.h_min && !clipped {
                return Err(Error::StepFailure { t: self.t, h });
            }
            if !self.jac_current {
                self.refresh_jacobian()?;
            }
            let refactor = match &self.factor {
                Some(fac) => !(0.8..=1.25).contains(&(h / fac.h)),
                None => true,
            };
            if refactor {
                self.factorize(h);
            }
            match self.attempt(h) {
                Attempt::Done { y1, f1, err, iters } => {
                    if err <= 1.0 && self.sys.admissible(&y1) {
                        let fac = (0.9 * math::powf(err.max(1e-10), -0.25)).clamp(0.2, 5.0);
                        let proposal = h * fac;
                        self.h = if clipped {
                            proposal.max(self.h.min(proposal * 5.0))
                        } else {
                            proposal
                        };
                        let t1 = if clipped { t_limit } else { self.t + h };
                        let y0 = core::mem::replace(&mut self.y, y1);
                        let f0 = core::mem::replace(&mut self.f, f1);
                        self.prev = Some((self.t, y0, f0));
                        self.t = t1;
                        self.stats.accepted += 1;
                        // Keep the Jacobian while Newton converges fast.
                        self.jac_current = iters <= 3;
                        return Ok(t1);
                    }
                    self.stats.rejected += 1;
                    let fac = if err <= 1.0 {
                        0.5
                    } else {
                        (0.9 * math::powf(err, -0.25)).clamp(0.2, 0.9)
                    };
                    self.h = h * fac;
                }
                Attempt::NewtonFailed => {
                    self.stats.newton_failures += 1;
                    self.stats.rejected += 1;
                    let exact_h = self.factor.as_ref().is_some_and(|f| f.h == h);
                    if !exact_h {
                        self.factor = None;
                    } else if self.jac_t != Some(self.t) {
                        self.jac_current = false;
                    } else {
                        self.h = h * 0.25;
                    }
                }
                Attempt::RhsFailed => {
                    self.stats.rejected += 1;
                    self.h = h * 0.5;
                }
            }
        }
    }
}
