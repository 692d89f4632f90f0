//! Kinetic equations in dense form with analytic Jacobians.
//!
//! With `w_k = k u_k` every rate is `f_n = (B_n - 2 w_n W_n) / M`, where
//! `B_n` sums `w_i w_j` over `i + j = n + ell`, `W_n` is the total weight of
//! permitted partners of size `n`, and `M` is the interaction mass.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::sdirk::OdeSystem;
use crate::error::{Error, Result};
use crate::kinetics::{CLAMP_ERROR, EPS_M};
use crate::trajectory::{Record, Tracking};

/// Trial states may dip below zero by this much before a step is rejected.
pub(crate) const NEG_TOL: f64 = 0.1 * CLAMP_ERROR;

/// What the driver needs beyond the plain ODE.
pub trait KineticSystem: OdeSystem {
    /// Number of cluster-size components (they come first in the state).
    fn sizes(&self) -> usize;
    fn interaction_mass(&self, t: f64, y: &[f64]) -> f64;
    /// `dM/dt` along the flow, given `dy = f(t, y)`.
    fn mass_rate(&self, t: f64, y: &[f64], dy: &[f64]) -> f64;
    /// `m_0 ..= m_3` of the state.
    fn moments(&self, t: f64, y: &[f64]) -> [f64; 4];

    fn record(&self, t: f64, y: &[f64], tracking: &Tracking) -> Record {
        let fractions: BTreeMap<usize, f64> = (1..=self.sizes())
            .filter(|&n| tracking.keeps(n))
            .map(|n| (n, y[n - 1]))
            .collect();
        Record {
            t,
            fractions,
            moments: self.moments(t, y),
            gel_fraction: None,
            interaction_mass: self.interaction_mass(t, y),
            step: None,
        }
    }
}

fn prefix_weights(y: &[f64], cap: usize) -> (Vec<f64>, Vec<f64>) {
    let mut w = vec![0.0; cap + 1];
    let mut p = vec![0.0; cap + 1];
    for k in 1..=cap {
        w[k] = k as f64 * y[k - 1];
        p[k] = p[k - 1] + w[k];
    }
    (w, p)
}

/// `B_n` for `n = 1..=cap` over represented sizes.
fn births(w: &[f64], cap: usize, ell: usize) -> Vec<f64> {
    let mut b = vec![0.0; cap + 1];
    for (n, bn) in b.iter_mut().enumerate().skip(1) {
        let s = n + ell;
        let lo = s.saturating_sub(cap).max(1);
        let hi = (s - 1).min(cap);
        let mut acc = 0.0;
        for i in lo..=hi {
            acc += w[i] * w[s - i];
        }
        *bn = acc;
    }
    b
}

fn moments_of(y: &[f64], cap: usize) -> [f64; 4] {
    let mut m = [0.0; 4];
    for n in 1..=cap {
        let x = n as f64;
        let v = y[n - 1];
        m[0] += v;
        m[1] += x * v;
        m[2] += x * x * v;
        m[3] += x * x * x * v;
    }
    m
}

/// Sizes `1..=cap` where a pair reacts only if its product is nonempty and
/// at most `cap`. With `cap = ell` this is the small system; with a larger
/// cap it is the truncated system.
#[derive(Debug, Clone)]
pub struct PairSystem {
    ell: usize,
    cap: usize,
}

impl PairSystem {
    pub fn new(ell: usize, cap: usize) -> Self {
        Self { ell, cap }
    }

    /// Partner range `lo..=hi` for size `n`.
    fn partners(&self, n: usize) -> (usize, usize) {
        let lo = (self.ell + 1).saturating_sub(n).max(1);
        let hi = if n <= self.ell {
            self.cap
        } else {
            self.cap + self.ell - n
        };
        (lo, hi)
    }

    fn partner_weights(&self, p: &[f64]) -> Vec<f64> {
        let mut wn = vec![0.0; self.cap + 1];
        for (n, x) in wn.iter_mut().enumerate().skip(1) {
            let (lo, hi) = self.partners(n);
            if lo <= hi {
                *x = p[hi] - p[lo - 1];
            }
        }
        wn
    }

    fn eval(&self, y: &[f64]) -> Result<Evaluation> {
        let (w, p) = prefix_weights(y, self.cap);
        let wn = self.partner_weights(&p);
        let mass: f64 = (1..=self.cap).map(|n| w[n] * wn[n]).sum();
        if !(mass >= EPS_M) {
            return Err(Error::DivisionByExhaustion { denominator: mass });
        }
        let b = births(&w, self.cap, self.ell);
        let f = (1..=self.cap)
            .map(|n| (b[n] - 2.0 * w[n] * wn[n]) / mass)
            .collect();
        Ok(Evaluation { w, wn, mass, f })
    }
}

struct Evaluation {
    w: Vec<f64>,
    wn: Vec<f64>,
    mass: f64,
    f: Vec<f64>,
}

impl OdeSystem for PairSystem {
    fn dim(&self) -> usize {
        self.cap
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let ev = self.eval(y)?;
        dy.copy_from_slice(&ev.f);
        Ok(())
    }

    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut DMatrix<f64>) -> Result<()> {
        let Evaluation { w, wn, mass, f } = self.eval(y)?;
        let (cap, ell) = (self.cap, self.ell);
        for n in 1..=cap {
            let (lo, hi) = self.partners(n);
            let nf = n as f64;
            let fm = f[n - 1] / mass;
            for k in 1..=cap {
                let kf = k as f64;
                let mut d = 0.0;
                let j = n + ell;
                if k < j && j - k <= cap {
                    d += 2.0 * kf * w[j - k];
                }
                if k == n {
                    d -= 2.0 * nf * wn[n];
                }
                if (lo..=hi).contains(&k) {
                    d -= 2.0 * w[n] * kf;
                }
                jac[(n - 1, k - 1)] = d / mass - fm * 2.0 * kf * wn[k];
            }
        }
        Ok(())
    }

    fn admissible(&self, y: &[f64]) -> bool {
        y.iter().all(|&v| v >= -NEG_TOL)
    }
}

impl KineticSystem for PairSystem {
    fn sizes(&self) -> usize {
        self.cap
    }

    fn interaction_mass(&self, _t: f64, y: &[f64]) -> f64 {
        let (w, p) = prefix_weights(y, self.cap);
        let wn = self.partner_weights(&p);
        (1..=self.cap).map(|n| w[n] * wn[n]).sum()
    }

    fn mass_rate(&self, _t: f64, y: &[f64], dy: &[f64]) -> f64 {
        let (_, p) = prefix_weights(y, self.cap);
        let wn = self.partner_weights(&p);
        (1..=self.cap)
            .map(|k| 2.0 * k as f64 * wn[k] * dy[k - 1])
            .sum()
    }

    fn moments(&self, _t: f64, y: &[f64]) -> [f64; 4] {
        moments_of(y, self.cap)
    }
}

/// The full (or large) equations with sizes `1..=cap` represented and
/// everything above lumped into a tail.
///
/// The first moment is known in closed form, `m(t) = m_1(0) - ell t`, so the
/// interaction mass is `m^2` minus the forbidden small block and the partner
/// weight of size `n` is `m` minus its forbidden partners. The last state
/// component counts tail clusters. Tail clusters reacting with small ones can
/// land back within `ell` of the cap; those returns are not represented.
#[derive(Debug, Clone)]
pub struct ClosureSystem {
    ell: usize,
    cap: usize,
    m1_initial: f64,
}

impl ClosureSystem {
    pub fn new(ell: usize, cap: usize, m1_initial: f64) -> Self {
        Self {
            ell,
            cap,
            m1_initial,
        }
    }

    pub fn first_moment(&self, t: f64) -> f64 {
        self.m1_initial - self.ell as f64 * t
    }

    /// `S_n`: weight of partners forbidden to size `n`.
    fn forbidden(&self, p: &[f64], n: usize) -> f64 {
        if n >= self.ell {
            0.0
        } else {
            p[(self.ell - n).min(self.cap)]
        }
    }

    fn eval(&self, t: f64, y: &[f64]) -> Result<ClosureEval> {
        let cap = self.cap;
        let m = self.first_moment(t);
        let (w, p) = prefix_weights(y, cap);
        let s: Vec<f64> = (0..=cap)
            .map(|n| if n == 0 { 0.0 } else { self.forbidden(&p, n) })
            .collect();
        let block: f64 = (1..=cap).map(|n| w[n] * s[n]).sum();
        let mass = m * m - block;
        if !(mass >= EPS_M) {
            return Err(Error::DivisionByExhaustion { denominator: mass });
        }
        let b = births(&w, cap, self.ell);
        let mut f: Vec<f64> = (1..=cap)
            .map(|n| (b[n] - 2.0 * w[n] * (m - s[n])) / mass)
            .collect();
        let tail_mass = m - p[cap];
        let over: f64 = (self.ell + 1..=cap)
            .map(|i| w[i] * (p[cap] - p[cap + self.ell - i]))
            .sum();
        f.push((over - tail_mass * tail_mass) / mass);
        Ok(ClosureEval {
            m,
            w,
            p,
            s,
            mass,
            f,
            tail_mass,
        })
    }
}

struct ClosureEval {
    m: f64,
    w: Vec<f64>,
    p: Vec<f64>,
    s: Vec<f64>,
    mass: f64,
    f: Vec<f64>,
    tail_mass: f64,
}

impl OdeSystem for ClosureSystem {
    fn dim(&self) -> usize {
        self.cap + 1
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let ev = self.eval(t, y)?;
        dy.copy_from_slice(&ev.f);
        Ok(())
    }

    fn jacobian(&self, t: f64, y: &[f64], jac: &mut DMatrix<f64>) -> Result<()> {
        let ClosureEval {
            m,
            w,
            p,
            s,
            mass,
            f,
            tail_mass,
        } = self.eval(t, y)?;
        let (cap, ell) = (self.cap, self.ell);
        let dmass: Vec<f64> = (0..=cap).map(|k| -2.0 * k as f64 * s[k]).collect();
        for n in 1..=cap {
            let nf = n as f64;
            let fm = f[n - 1] / mass;
            for k in 1..=cap {
                let kf = k as f64;
                let mut d = 0.0;
                let j = n + ell;
                if k < j && j - k <= cap {
                    d += 2.0 * kf * w[j - k];
                }
                if k == n {
                    d -= 2.0 * nf * (m - s[n]);
                }
                if n < ell && k <= ell - n {
                    d += 2.0 * w[n] * kf;
                }
                jac[(n - 1, k - 1)] = d / mass - fm * dmass[k];
            }
            jac[(n - 1, cap)] = 0.0;
        }
        let fz = f[cap] / mass;
        for k in 1..=cap {
            let kf = k as f64;
            let dover = if k > ell {
                2.0 * kf * (p[cap] - p[cap + ell - k])
            } else {
                0.0
            };
            jac[(cap, k - 1)] = (dover + 2.0 * tail_mass * kf) / mass - fz * dmass[k];
        }
        jac[(cap, cap)] = 0.0;
        Ok(())
    }

    fn admissible(&self, y: &[f64]) -> bool {
        y[..self.cap].iter().all(|&v| v >= -NEG_TOL)
    }
}

impl KineticSystem for ClosureSystem {
    fn sizes(&self) -> usize {
        self.cap
    }

    fn interaction_mass(&self, t: f64, y: &[f64]) -> f64 {
        let m = self.first_moment(t);
        let (w, p) = prefix_weights(y, self.cap);
        let block: f64 = (1..=self.cap).map(|n| w[n] * self.forbidden(&p, n)).sum();
        m * m - block
    }

    fn mass_rate(&self, t: f64, y: &[f64], dy: &[f64]) -> f64 {
        let m = self.first_moment(t);
        let (_, p) = prefix_weights(y, self.cap);
        let grad: f64 = (1..=self.cap)
            .map(|k| -2.0 * k as f64 * self.forbidden(&p, k) * dy[k - 1])
            .sum();
        grad - 2.0 * m * self.ell as f64
    }

    /// `m_0` includes the tail count and `m_1` is the closed form; `m_2` and
    /// `m_3` cover represented sizes only.
    fn moments(&self, t: f64, y: &[f64]) -> [f64; 4] {
        let mut m = moments_of(y, self.cap);
        m[0] += y[self.cap];
        m[1] = self.first_moment(t);
        m
    }
}
