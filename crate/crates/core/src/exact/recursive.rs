//! The recursive integral formula for large-cluster solutions.
//!
//! For sizes above `ell` the equation for `u_n` is linear in `u_n` once the
//! smaller sizes are known:
//!
//! ```text
//! u_n' = (B_n + 2 n ell u_ell u_n - 2 n m u_n) / m^2,   m = m_1(0) - ell t,
//! ```
//!
//! where `B_n` sums `i (n + ell - i) u_i u_{n+ell-i}` over `ell < i < n`. The
//! `u_ell` coupling vanishes for purely large data; it is kept so the same
//! engine reproduces mixed monomer/dimer solutions at `ell = 1`. Solving with
//! the integrating factor `m^{-2n/ell} / E`, `E = exp(∫ 2 n ell u_ell / m^2)`:
//!
//! ```text
//! u_n(t) = m^{2n/ell} E(t) [ ∫_0^t m^{-2n/ell-2} B_n / E ds + u_n(0) m_1(0)^{-2n/ell} ].
//! ```
//!
//! Each `u_n` is tabulated on Chebyshev panels so later sizes call cheap
//! interpolants rather than nested quadratures.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kinetics::ClusterDistribution;
use crate::math;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights at `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, math::abs((k - g) * h))
}

/// Adaptive Gauss–Kronrod (7/15) quadrature to absolute tolerance `tol`,
/// always bisecting the interval with the largest error estimate.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = kronrod15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::QuadratureFailure {
                a,
                b,
                estimate: f64::INFINITY,
            });
        }
        if err <= tol.max(50.0 * f64::EPSILON * math::abs(total)) {
            return Ok(total);
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if parts.len() >= MAX_INTERVALS || mid <= lo || mid >= hi {
            return Err(Error::QuadratureFailure {
                a,
                b,
                estimate: err,
            });
        }
        let (v1, e1) = kronrod15(f, lo, mid);
        let (v2, e2) = kronrod15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Piecewise Chebyshev interpolant on `[a, b]`.
#[derive(Debug, Clone)]
pub struct PanelInterpolant {
    a: f64,
    b: f64,
    panels: usize,
    deg: usize,
    values: Vec<f64>,
}

impl PanelInterpolant {
    /// Node `j` of panel `k`, from the right end (`j = 0`) to the left.
    fn node(a: f64, b: f64, panels: usize, deg: usize, k: usize, j: usize) -> f64 {
        let w = (b - a) / panels as f64;
        let lo = a + k as f64 * w;
        let x = math::cos(core::f64::consts::PI * j as f64 / deg as f64);
        lo + 0.5 * w * (1.0 + x)
    }

    /// All nodes in increasing order, shared panel ends included once.
    fn sorted_nodes(a: f64, b: f64, panels: usize, deg: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(panels * deg + 1);
        out.push(a);
        for k in 0..panels {
            for j in (0..deg).rev() {
                out.push(Self::node(a, b, panels, deg, k, j));
            }
        }
        out
    }

    /// Builds the interpolant from values at the sorted nodes.
    fn from_sorted(a: f64, b: f64, panels: usize, deg: usize, sorted: &[f64]) -> Self {
        let mut values = vec![0.0; panels * (deg + 1)];
        for k in 0..panels {
            for j in 0..=deg {
                values[k * (deg + 1) + j] = sorted[k * deg + (deg - j)];
            }
        }
        Self {
            a,
            b,
            panels,
            deg,
            values,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let w = (self.b - self.a) / self.panels as f64;
        let k = (((t - self.a) / w) as usize).min(self.panels - 1);
        let lo = self.a + k as f64 * w;
        let x = 2.0 * (t - lo) / w - 1.0;
        let vals = &self.values[k * (self.deg + 1)..(k + 1) * (self.deg + 1)];
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, &v) in vals.iter().enumerate() {
            let xj = math::cos(core::f64::consts::PI * j as f64 / self.deg as f64);
            let d = x - xj;
            if d == 0.0 {
                return v;
            }
            let mut wj = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == self.deg {
                wj *= 0.5;
            }
            num += wj * v / d;
            den += wj / d;
        }
        num / den
    }
}

const PANELS: usize = 24;
const DEGREE: usize = 16;
/// Absolute accuracy target on `u_n`.
pub const ITERATE_TOL: f64 = 1e-10;

/// `∫_0^t g` at every sorted node, segment by segment.
fn cumulative<F: Fn(f64) -> f64>(g: &F, nodes: &[f64], tol: f64) -> Result<Vec<f64>> {
    let span = nodes[nodes.len() - 1] - nodes[0];
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in nodes.windows(2) {
        acc += integrate_adaptive(g, w[0], w[1], tol * (w[1] - w[0]) / span)?;
        out.push(acc);
    }
    Ok(out)
}

/// `u_n` on `[0, horizon]` from the recursive formula.
#[derive(Debug, Clone)]
pub struct NumericSolution {
    n: usize,
    interp: PanelInterpolant,
}

impl NumericSolution {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.interp.domain().1
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::DomainError(alloc::format!(
                "t = {t} is outside [0, {}]",
                self.horizon()
            )));
        }
        Ok(self.interp.eval(t))
    }

    /// Evaluation without the range check; callers stay inside the domain.
    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        self.interp.eval(t)
    }
}

/// Solves for `u_n` given `family(i, t) = u_i(t)` for `ell <= i < n`.
pub fn iterate_numeric<F: Fn(usize, f64) -> f64>(
    family: &F,
    u_n0: f64,
    ell: usize,
    m1_0: f64,
    n: usize,
    horizon: f64,
) -> Result<NumericSolution> {
    if ell == 0 || n <= ell {
        return Err(Error::InvalidParams("need ell >= 1 and n > ell".into()));
    }
    let lf = ell as f64;
    if !(horizon > 0.0) || !(m1_0 - lf * horizon > 0.0) {
        return Err(Error::DomainError(alloc::format!(
            "horizon {horizon} must lie in (0, m_1(0) / ell = {})",
            m1_0 / lf
        )));
    }
    let m = |t: f64| m1_0 - lf * t;
    let a = 2.0 * n as f64 / lf;
    let nodes = PanelInterpolant::sorted_nodes(0.0, horizon, PANELS, DEGREE);

    let coupling = |s: f64| {
        let ms = m(s);
        2.0 * n as f64 * lf * family(ell, s) / (ms * ms)
    };
    let log_e_vals = cumulative(&coupling, &nodes, ITERATE_TOL)?;
    let log_e = PanelInterpolant::from_sorted(0.0, horizon, PANELS, DEGREE, &log_e_vals);

    let birth = |s: f64| {
        let mut b = 0.0;
        for i in ell + 1..n {
            let j = n + ell - i;
            b += (i * j) as f64 * family(i, s) * family(j, s);
        }
        let ms = m(s);
        b * math::powf(ms, -a - 2.0) * math::exp(-log_e.eval(s))
    };
    // Accuracy on u_n maps to accuracy on the bracket through m^{2n/ell}.
    let tol = ITERATE_TOL * math::powf(m1_0, -a);
    let j_vals = cumulative(&birth, &nodes, tol)?;
    let initial = u_n0 * math::powf(m1_0, -a);
    let u_vals: Vec<f64> = nodes
        .iter()
        .zip(j_vals.iter().zip(&log_e_vals))
        .map(|(&t, (&jv, &le))| math::powf(m(t), a) * math::exp(le) * (jv + initial))
        .collect();
    Ok(NumericSolution {
        n,
        interp: PanelInterpolant::from_sorted(0.0, horizon, PANELS, DEGREE, &u_vals),
    })
}

/// `u_{ell+1} ..= u_{n_max}` for initial data supported above `ell`.
pub fn iterate_family(
    u0: &ClusterDistribution,
    n_max: usize,
    horizon: f64,
) -> Result<Vec<NumericSolution>> {
    let ell = u0.ell();
    if u0.iter().any(|(n, _)| n <= ell) {
        return Err(Error::InvalidInitialDistribution(
            "the recursive formula needs sizes above ell only".into(),
        ));
    }
    let m1_0: f64 = u0.iter().map(|(n, v)| n as f64 * v).sum();
    let mut out: Vec<NumericSolution> = Vec::new();
    for n in ell + 1..=n_max {
        let family = |i: usize, t: f64| {
            if i <= ell {
                0.0
            } else {
                out[i - ell - 1].eval_unchecked(t)
            }
        };
        let sol = iterate_numeric(&family, u0.get(n), ell, m1_0, n, horizon)?;
        out.push(sol);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_examples() {
        let v = integrate_adaptive(&|x: f64| x.sin(), 0.0, core::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate_adaptive(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
        assert!(integrate_adaptive(&|x: f64| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn interpolant_reproduces_smooth_function() {
        let nodes = PanelInterpolant::sorted_nodes(0.0, 0.6, 4, 12);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        let vals: Vec<f64> = nodes.iter().map(|t| (3.0 * t).exp()).collect();
        let p = PanelInterpolant::from_sorted(0.0, 0.6, 4, 12, &vals);
        for k in 0..=100 {
            let t = 0.006 * k as f64;
            assert!((p.eval(t) - (3.0 * t).exp()).abs() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn minimal_cluster_case_is_closed_form() {
        // Empty birth sum: ell = 3, delta_4 gives (m / 4)^{8/3}.
        let sol = iterate_numeric(&|_, _| 0.0, 1.0, 3, 4.0, 4, 1.0).unwrap();
        for t in [0.0, 0.3, 0.9] {
            let m: f64 = 4.0 - 3.0 * t;
            assert!((sol.eval(t).unwrap() - (m / 4.0).powf(8.0 / 3.0)).abs() < 1e-12);
        }
        assert!(sol.eval(1.2).is_err());
        assert!(iterate_numeric(&|_, _| 0.0, 1.0, 3, 4.0, 4, 1.5).is_err());
    }

    #[test]
    fn dimer_family_matches_low_order_closed_forms() {
        let u0 = ClusterDistribution::monodisperse(1, 2).unwrap();
        let fam = iterate_family(&u0, 4, 0.6).unwrap();
        for t in [0.0, 0.2, 0.45, 0.6] {
            let m: f64 = 2.0 - t;
            assert!((fam[0].eval(t).unwrap() - m.powi(4) / 16.0).abs() < 1e-12);
            assert!(
                (fam[1].eval(t).unwrap() - (m.powi(6) / 32.0 - m.powi(7) / 64.0)).abs() < 1e-11
            );
            assert!((fam[2].eval(t).unwrap() - 3.0 / 512.0 * t * t * m.powi(8)).abs() < 1e-9);
        }
    }
}
