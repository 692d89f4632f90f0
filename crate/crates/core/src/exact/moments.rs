//! Closed forms for the moments of monodisperse data and the moment
//! hierarchy integrator.
//!
//! Before gelation the moments obey
//!
//! ```text
//! m_k' = -2 m_{k+1} / m_1 + sum_{q+r+s=k} k!/(q! r! s!) (-ell)^q m_{r+1} m_{s+1} / m_1^2.
//! ```
//!
//! For `k >= 1` the `(0, k, 0)` and `(0, 0, k)` terms cancel the leading
//! `m_{k+1}` term exactly, so `m_k'` depends on `m_1 ..= m_k` only and the
//! hierarchy truncates without closure error. `m_0` and `m_1` are linear in
//! `t` and substituted in closed form.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kinetics::MomentVector;
use crate::math;
use crate::ode::{IntegratorConfig, OdeSystem, Sdirk4};

/// Gelation and exhaustion times of monodisperse `k`-mer data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalTimes {
    /// `k / (2k - ell)`.
    pub t_gel: f64,
    /// `k / ell`; infinite when `ell = 0`.
    pub t_ex: f64,
}

pub fn gelation_time(k: usize, ell: usize) -> Result<CriticalTimes> {
    if k == 0 || ell > k {
        return Err(Error::InvalidParams("need k >= 1 and ell <= k".into()));
    }
    let (k, l) = (k as f64, ell as f64);
    Ok(CriticalTimes {
        t_gel: k / (2.0 * k - l),
        t_ex: if ell == 0 { f64::INFINITY } else { k / l },
    })
}

fn gel_denominator(k: f64, l: f64, t: f64) -> f64 {
    k - 2.0 * k * t + l * t
}

fn check_pre_gel(k: usize, ell: usize, t: f64) -> Result<(f64, f64)> {
    let (kf, l) = (k as f64, ell as f64);
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    if t < 0.0 || gel_denominator(kf, l, t) <= 0.0 {
        return Err(Error::DomainError(alloc::format!(
            "t = {t} is outside the pre-gelation window"
        )));
    }
    Ok((kf, l))
}

/// `m_2(t)` for `k`-mer initial data.
pub fn closed_m2(k: usize, ell: usize, t: f64) -> Result<f64> {
    let (k, l) = check_pre_gel(k, ell, t)?;
    Ok((k - l * t) * (k * k - 2.0 * k * l * t + l * l * t) / gel_denominator(k, l, t))
}

/// `m_3(t)` for `k`-mer initial data.
pub fn closed_m3(k: usize, ell: usize, t: f64) -> Result<f64> {
    let (k, l) = check_pre_gel(k, ell, t)?;
    let d = gel_denominator(k, l, t);
    let c = l - 2.0 * k;
    let poly = l * l * c * c * c * t * t * t
        + k * l * (2.0 * l * l * l - 6.0 * k * l * l + k * k * l + 6.0 * k * k * k) * t * t
        - k * k * l * c * (l - 4.0 * k) * t
        + k * k * k * k * k;
    Ok((k - l * t) / (d * d * d) * poly)
}

/// Moments `m_2 ..= m_kmax` as an ODE system.
#[derive(Debug, Clone)]
struct Hierarchy {
    ell: f64,
    k_max: usize,
    m1_0: f64,
    /// Per `k`: `(coefficient, a, b)` for terms `c m_a m_b / m_1^2`.
    terms: Vec<Vec<(f64, usize, usize)>>,
}

impl Hierarchy {
    fn new(ell: usize, k_max: usize, m1_0: f64) -> Self {
        let l = ell as f64;
        let mut terms = vec![Vec::new(); k_max + 1];
        for (k, tk) in terms.iter_mut().enumerate().skip(2) {
            for q in 0..=k {
                for r in 0..=k - q {
                    let s = k - q - r;
                    if q == 0 && (r == k || s == k) {
                        continue;
                    }
                    let c = multinomial(k, q, r) * math::powi(-l, q as i32);
                    if c != 0.0 {
                        tk.push((c, r + 1, s + 1));
                    }
                }
            }
        }
        Self {
            ell: l,
            k_max,
            m1_0,
            terms,
        }
    }

    fn m1(&self, t: f64) -> f64 {
        self.m1_0 - self.ell * t
    }

    /// `m_a` from the state (`y[0]` is `m_2`).
    fn get(&self, t: f64, y: &[f64], a: usize) -> f64 {
        if a == 1 {
            self.m1(t)
        } else {
            y[a - 2]
        }
    }
}

fn multinomial(k: usize, q: usize, r: usize) -> f64 {
    let f = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();
    f(k) / (f(q) * f(r) * f(k - q - r))
}

impl OdeSystem for Hierarchy {
    fn dim(&self) -> usize {
        self.k_max - 1
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let m1 = self.m1(t);
        if m1 <= 0.0 {
            return Err(Error::DivisionByExhaustion {
                denominator: m1 * m1,
            });
        }
        let inv = 1.0 / (m1 * m1);
        for k in 2..=self.k_max {
            dy[k - 2] = self.terms[k]
                .iter()
                .map(|&(c, a, b)| c * self.get(t, y, a) * self.get(t, y, b))
                .sum::<f64>()
                * inv;
        }
        Ok(())
    }

    fn jacobian(&self, t: f64, y: &[f64], jac: &mut DMatrix<f64>) -> Result<()> {
        let m1 = self.m1(t);
        let inv = 1.0 / (m1 * m1);
        jac.fill(0.0);
        for k in 2..=self.k_max {
            for &(c, a, b) in &self.terms[k] {
                if a >= 2 {
                    jac[(k - 2, a - 2)] += c * self.get(t, y, b) * inv;
                }
                if b >= 2 {
                    jac[(k - 2, b - 2)] += c * self.get(t, y, a) * inv;
                }
            }
        }
        Ok(())
    }
}

/// Sampled moments `m_0 ..= m_kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub moments: Vec<MomentVector>,
}

/// `m_2` above this value is taken as the onset of gelation.
pub const BLOW_UP: f64 = 1e10;

/// Integrates the hierarchy from `m_init` (which must hold `m_0 ..= m_kmax`)
/// to `t_end`, sampling every `cfg.record_dt`.
pub fn moment_hierarchy(
    m_init: &MomentVector,
    ell: usize,
    k_max: usize,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<MomentSeries> {
    if k_max < 2 || m_init.kmax() < k_max {
        return Err(Error::InvalidParams(
            "need k_max >= 2 and initial moments up to k_max".into(),
        ));
    }
    cfg.validate()?;
    let m0_0 = m_init.get(0);
    let m1_0 = m_init.get(1);
    let l = ell as f64;
    if !(t_end > 0.0) || (ell > 0 && t_end >= m1_0 / l) {
        return Err(Error::DomainError(alloc::format!(
            "t_end = {t_end} is outside (0, m_1(0) / ell)"
        )));
    }
    let sys = Hierarchy::new(ell, k_max, m1_0);
    let y0: Vec<f64> = (2..=k_max).map(|k| m_init.get(k)).collect();
    let snapshot = |t: f64, y: &[f64]| {
        let mut m = vec![m0_0 - t, m1_0 - l * t];
        m.extend_from_slice(y);
        MomentVector::new(m)
    };
    let mut series = MomentSeries {
        times: vec![0.0],
        moments: vec![snapshot(0.0, &y0)],
    };
    let mut ig = Sdirk4::new(&sys, 0.0, y0, cfg.step_control())?;
    let mut k = 1u64;
    loop {
        let target = (k as f64 * cfg.record_dt).min(t_end);
        while ig.t() < target {
            match ig.step(target) {
                Ok(_) => {}
                Err(Error::StepFailure { t, .. }) => return Err(Error::GelationReached { t }),
                Err(e) => return Err(e),
            }
            let m2 = ig.y()[0];
            if !(m2 < BLOW_UP) {
                return Err(Error::GelationReached { t: ig.t() });
            }
        }
        series.times.push(target);
        series.moments.push(snapshot(target, ig.y()));
        if target >= t_end {
            break;
        }
        k += 1;
    }
    Ok(series)
}

/// Initial moments `k^j` of monodisperse `k`-mer data.
pub fn kmer_moments(k: usize, k_max: usize) -> MomentVector {
    MomentVector::new(
        (0..=k_max)
            .map(|j| math::powi(k as f64, j as i32))
            .collect(),
    )
}
