//! Exact and semi-exact solutions: closed forms, the rational polynomial
//! family for dimer data, the recursive integral formula and the moment
//! hierarchy.

mod moments;
mod poly;
mod recursive;

pub use moments::{
    closed_m2, closed_m3, gelation_time, kmer_moments, moment_hierarchy, CriticalTimes,
    MomentSeries, BLOW_UP,
};
pub use poly::{
    birth_convolution, eval_family, integrate_birth, polynomial_family, satisfies_sign_pattern,
    RationalPoly,
};
pub use recursive::{
    integrate_adaptive, iterate_family, iterate_numeric, NumericSolution, PanelInterpolant,
    ITERATE_TOL,
};

use crate::error::{Error, Result};
use crate::math;

/// Smallest large cluster `u_{ell+1}`, which nothing can produce:
/// `u_{ell+1}(0) (m_1(t) / m_1(0))^{2(ell+1)/ell}`.
pub fn min_cluster_closed_form(u0_min: f64, m1_0: f64, ell: usize, t: f64) -> Result<f64> {
    if ell == 0 {
        return Err(Error::InvalidParams(
            "emission size must be at least 1".into(),
        ));
    }
    let l = ell as f64;
    let m = m1_0 - l * t;
    if !(m > 0.0) {
        return Err(Error::DomainError(alloc::format!("m_1 = {m} at t = {t}")));
    }
    Ok(u0_min * math::powf(m / m1_0, 2.0 * (l + 1.0) / l))
}

/// `(u_1, u_2, u_3)` for `ell = 1` and `u_1(0) = u_2(0) = 1/2`, with
/// `m = 3/2 - t`.
pub fn mixed_monomer_dimer_closed_forms(t: f64) -> Result<(f64, f64, f64)> {
    let m = 1.5 - t;
    if !(m > 0.0) || t < 0.0 {
        return Err(Error::DomainError(alloc::format!(
            "t = {t} is outside [0, 3/2)"
        )));
    }
    let u1 = m * m / (m + 3.0);
    let u2 = 40.5 * math::powi(m / (m + 3.0), 4);
    let u3 = 6561.0 * math::powi(m, 6) * (3.0 - 2.0 * m) / (9.0 * math::powi(m + 3.0, 7));
    Ok((u1, u2, u3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_cluster_examples() {
        for t in [0.0, 0.4, 1.3] {
            let m: f64 = 2.0 - t;
            assert!(
                (min_cluster_closed_form(1.0, 2.0, 1, t).unwrap() - m.powi(4) / 16.0).abs() < 1e-15
            );
            let m: f64 = 4.0 - 3.0 * t;
            let v = min_cluster_closed_form(1.0, 4.0, 3, t).unwrap();
            assert!((v - (m / 4.0).powf(8.0 / 3.0)).abs() < 1e-15);
        }
        assert_eq!(min_cluster_closed_form(0.3, 2.0, 1, 0.0).unwrap(), 0.3);
        assert!(min_cluster_closed_form(1.0, 2.0, 1, 2.0).is_err());
    }

    #[test]
    fn mixed_closed_form_examples() {
        let (a, b, c) = mixed_monomer_dimer_closed_forms(0.0).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15 && c.abs() < 1e-15);
        let (a, b, c) = mixed_monomer_dimer_closed_forms(0.5).unwrap();
        assert!((a - 0.25).abs() < 1e-15);
        assert!((b - 81.0 / 512.0).abs() < 1e-15);
        assert!((c - 6561.0 / (9.0 * 16384.0)).abs() < 1e-15);
        let (a, b, c) = mixed_monomer_dimer_closed_forms(1.5 - 1e-9).unwrap();
        assert!(a < 1e-15 && b < 1e-30 && c < 1e-50);
        assert!(mixed_monomer_dimer_closed_forms(1.5).is_err());
    }

    #[test]
    fn recursive_formula_reproduces_mixed_trimer() {
        let family = |i: usize, t: f64| {
            let (u1, u2, _) = mixed_monomer_dimer_closed_forms(t).unwrap();
            match i {
                1 => u1,
                2 => u2,
                _ => 0.0,
            }
        };
        let sol = iterate_numeric(&family, 0.0, 1, 1.5, 3, 1.2).unwrap();
        for k in 0..=24 {
            let t = (0.05 * k as f64).min(1.2);
            let exact = mixed_monomer_dimer_closed_forms(t).unwrap().2;
            assert!((sol.eval(t).unwrap() - exact).abs() < 1e-8, "t = {t}");
        }
    }
}
