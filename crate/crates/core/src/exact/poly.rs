//! Exact polynomial solutions for dimer initial data with `ell = 1`.
//!
//! With `m = m_1(t) = 2 - t` every `u_n` is a polynomial in `m`. Writing the
//! kinetic equation with the integrating factor `m^{-2n}` and substituting
//! `ds = -dm` turns each step of the recursion into two maps: a convolution
//! that builds the birth term from lower sizes, and a monomial-wise
//! integration that solves for `u_n`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::kinetics::ClusterDistribution;

/// Polynomial in `m_1` with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RationalPoly {
    coeffs: BTreeMap<u32, BigRational>,
}

impl RationalPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(exp: u32, c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(exp, c);
        p
    }

    pub fn add_term(&mut self, exp: u32, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = self.coeffs.entry(exp).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(&exp);
        }
    }

    pub fn coeff(&self, exp: u32) -> BigRational {
        self.coeffs
            .get(&exp)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Nonzero terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (u32, &BigRational)> + '_ {
        self.coeffs.iter().map(|(&e, c)| (e, c))
    }

    pub fn min_exp(&self) -> Option<u32> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<u32> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.coeffs {
            for (eb, cb) in &other.coeffs {
                out.add_term(ea + eb, ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero();
        for (e, a) in &self.coeffs {
            out.add_term(*e, a * c);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.coeffs {
            out.add_term(*e, c.clone());
        }
        out
    }

    /// Floating-point value at `m`.
    pub fn eval(&self, m: f64) -> f64 {
        // Horner over the dense exponent range keeps rounding error small
        // relative to the largest term.
        let Some(top) = self.max_exp() else {
            return 0.0;
        };
        let mut acc = 0.0;
        for e in (0..=top).rev() {
            let c = self.coeffs.get(&e).map_or(0.0, to_f64);
            acc = acc * m + c;
        }
        acc
    }

    /// `q(t) = p(m0 - t)`, exact. Evaluating `q` near `t = 0` avoids the
    /// cancellation between the large terms of `p` at `m` near `m0`.
    pub fn in_time_variable(&self, m0: i64) -> Self {
        let mut out = Self::zero();
        let m0 = BigRational::from_integer(BigInt::from(m0));
        for (&e, c) in &self.coeffs {
            // (m0 - t)^e = sum_k binom(e, k) m0^{e-k} (-t)^k
            let mut binom = BigInt::one();
            for k in 0..=e {
                let mut term =
                    c * pow_rat(&m0, i64::from(e - k)) * BigRational::from_integer(binom.clone());
                if k % 2 == 1 {
                    term = -term;
                }
                out.add_term(k, term);
                binom = binom * BigInt::from(e - k) / BigInt::from(k + 1);
            }
        }
        out
    }

    /// Sum of `|a_j| m^j`, the scale of rounding error in [`Self::eval`].
    pub fn magnitude(&self, m: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(&e, c)| libm::fabs(to_f64(c)) * libm::pow(m, f64::from(e)))
            .sum()
    }

    /// Value at `m = b / 2^e`, computed exactly and rounded once.
    pub fn eval_dyadic(&self, b: &BigInt, e: u32) -> f64 {
        let Some(top) = self.max_exp() else {
            return 0.0;
        };
        let den = self
            .coeffs
            .values()
            .fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        let numer = |j: u32| self.coeffs.get(&j).map(|c| c.numer() * (&den / c.denom()));
        // Homogeneous Horner: sum_j N_j b^j 2^{e (top - j)}.
        let mut h = numer(top).unwrap_or_default();
        for j in (0..top).rev() {
            h *= b;
            if let Some(nj) = numer(j) {
                h += nj << (u64::from(e) * u64::from(top - j));
            }
        }
        ratio_to_f64(&h, &(den << (u64::from(e) * u64::from(top))))
    }

    /// Exact value at a rational `m`.
    pub fn eval_exact(&self, m: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        let mut power = BigRational::one();
        let mut at = 0u32;
        for (&e, c) in &self.coeffs {
            while at < e {
                power *= m;
                at += 1;
            }
            acc += c * &power;
        }
        acc
    }
}

/// `n / d` rounded to `f64` without normalizing the fraction.
fn ratio_to_f64(n: &BigInt, d: &BigInt) -> f64 {
    if n.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries at least 64 significant bits.
    let shift = 64 + d.bits() as i64 - n.bits() as i64;
    let q = if shift >= 0 {
        (n << shift as u64) / d
    } else {
        n / (d << (-shift) as u64)
    };
    libm::ldexp(q.to_f64().unwrap_or(f64::NAN), -(shift as i32))
}

pub(crate) fn to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pow_rat(base: &BigRational, e: i64) -> BigRational {
    let mut out = BigRational::one();
    let b = if e < 0 { base.recip() } else { base.clone() };
    for _ in 0..e.unsigned_abs() {
        out *= &b;
    }
    out
}

/// Birth term `B_n = sum_{i=2}^{n-1} i (n + 1 - i) u_i u_{n+1-i}` from the
/// polynomials of sizes `2..n` (`polys[k]` holds `u_{k+2}`).
pub fn birth_convolution(polys: &[RationalPoly], n: usize) -> RationalPoly {
    let mut out = RationalPoly::zero();
    for i in 2..n {
        let j = n + 1 - i;
        let w = rat((i * j) as i64, 1);
        out = out.add(&polys[i - 2].mul(&polys[j - 2]).scale(&w));
    }
    out
}

/// Solves `u_n' = (B_n - 2 n m u_n) / m^2`, `m = m0 - t`, monomial by
/// monomial: `m^p` in `B_n` contributes
/// `m0^{p-2n-1} / (p-2n-1) m^{2n} - m^{p-1} / (p-2n-1)`.
pub fn integrate_birth(
    birth: &RationalPoly,
    n: usize,
    u_n0: &BigRational,
    m0: &BigRational,
) -> RationalPoly {
    let two_n = 2 * n as i64;
    let mut lead = u_n0 * pow_rat(m0, -two_n);
    let mut out = RationalPoly::zero();
    for (p, c) in birth.terms() {
        let d = p as i64 - two_n - 1;
        assert!(d != 0, "birth term has exponent 2n + 1");
        let dr = rat(d, 1);
        lead += c * pow_rat(m0, d) / &dr;
        out.add_term(p - 1, -(c / &dr));
    }
    out.add_term(2 * n as u32, lead);
    out
}

/// `u_2 ..= u_{n_max}` for `u_k(0) = delta_{2,k}` and `ell = 1`; entry `k`
/// holds `u_{k+2}`.
pub fn polynomial_family(n_max: usize) -> Result<Vec<RationalPoly>> {
    if n_max < 2 {
        return Err(Error::InvalidParams("n_max must be at least 2".into()));
    }
    let m0 = rat(2, 1);
    let mut polys = Vec::with_capacity(n_max - 1);
    polys.push(RationalPoly::monomial(4, rat(1, 16)));
    for n in 3..=n_max {
        let birth = birth_convolution(&polys, n);
        polys.push(integrate_birth(&birth, n, &BigRational::zero(), &m0));
    }
    Ok(polys)
}

/// Evaluates the family at time `t` (`m_1 = 2 - t`) as an `ell = 1`
/// distribution over sizes `2..=n_max`.
///
/// Evaluation is exact and rounded once: in floating point the terms of
/// `u_n` near `m = 2` cancel to nothing by `n` around 20.
pub fn eval_family(polys: &[RationalPoly], t: f64) -> Result<ClusterDistribution> {
    let m = 2.0 - t;
    if !(m >= 0.0) {
        return Err(Error::DomainError(alloc::format!(
            "t = {t} is past m_1 = 0"
        )));
    }
    let tr = BigRational::from_float(t)
        .ok_or_else(|| Error::DomainError(alloc::format!("t = {t} is not finite")))?;
    let m = rat(2, 1) - tr;
    let e = m.denom().trailing_zeros().unwrap_or(0) as u32;
    ClusterDistribution::from_fractions(
        1,
        polys
            .iter()
            .enumerate()
            .map(|(k, p)| (k + 2, p.eval_dyadic(m.numer(), e).max(0.0))),
    )
}

/// Whether `u_n` has `a_{2n} > 0`, `(-1)^n a_{3n-2} > 0` and no terms
/// outside `[2n, 3n - 2]`.
pub fn satisfies_sign_pattern(p: &RationalPoly, n: usize) -> bool {
    let (lo, hi) = (2 * n as u32, 3 * n as u32 - 2);
    let in_range = p.terms().all(|(e, _)| (lo..=hi).contains(&e));
    let first = p.coeff(lo).is_positive();
    let last = p.coeff(hi);
    let last_ok = if n % 2 == 0 {
        last.is_positive()
    } else {
        last.is_negative()
    };
    in_range && first && last_ok
}
