//! Kinetic equations for coagulation with emission of `ell` particles.
//!
//! A [`ClusterDistribution`] holds cluster fractions `u_n` (normalized to the
//! initial cluster count). Every function here is a pure evaluation on such a
//! distribution; the integrators in [`crate::ode`] and the exact engines in
//! [`crate::exact`] are built on top of these definitions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Rate normalizers below this value count as exhausted.
pub const EPS_M: f64 = 1e-12;

/// Negative components above `-CLAMP_ERROR` are clamped to zero; anything
/// more negative is a solver failure.
pub const CLAMP_ERROR: f64 = 1e-9;

/// Tolerance on `sum u_n = 1` for initial data.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Default hard cap on the largest representable cluster size.
pub const DEFAULT_S_MAX: usize = 1 << 26;

/// Which specialization of the kinetic equations applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// The full equations, any support.
    Full,
    /// Only sizes `<= ell`; the system is finite and closed.
    Small,
    /// Only sizes `> ell`; the interaction mass reduces to `m_1^2`.
    Large,
    /// Large clusters with products restricted to sizes `<= N`.
    Truncated(usize),
}

/// Emission size together with the system specialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmissionParams {
    ell: usize,
    kind: SystemKind,
}

impl EmissionParams {
    pub fn new(ell: usize, kind: SystemKind) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidParams(
                "emission size must be at least 1".into(),
            ));
        }
        if let SystemKind::Truncated(n) = kind {
            if n < ell + 2 {
                return Err(Error::InvalidParams(format!(
                    "truncation size {n} must exceed ell + 1 = {}",
                    ell + 1
                )));
            }
        }
        Ok(Self { ell, kind })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    /// Checks that `u` is admissible initial data for this system: matching
    /// emission size, support compatible with the kind, and for
    /// `Truncated(N)` the bound `N >= 2L + ell` where `L` is the largest
    /// occupied size.
    pub fn check_initial(&self, u: &ClusterDistribution) -> Result<()> {
        self.check_support(u)?;
        if let SystemKind::Truncated(n) = self.kind {
            let largest = u.max_size().unwrap_or(0);
            if n < 2 * largest + self.ell {
                return Err(Error::InvalidParams(format!(
                    "truncation size {n} is below 2L + ell = {}",
                    2 * largest + self.ell
                )));
            }
        }
        Ok(())
    }

    /// Checks only the support restrictions implied by the kind.
    pub fn check_support(&self, u: &ClusterDistribution) -> Result<()> {
        if u.ell() != self.ell {
            return Err(Error::InvalidParams(format!(
                "distribution has ell = {} but parameters have ell = {}",
                u.ell(),
                self.ell
            )));
        }
        match self.kind {
            SystemKind::Full => Ok(()),
            SystemKind::Small => match u.iter().find(|&(n, v)| n > self.ell && v > 0.0) {
                Some((n, _)) => Err(Error::InvalidInitialDistribution(format!(
                    "small system has mass at size {n} > ell"
                ))),
                None => Ok(()),
            },
            SystemKind::Large | SystemKind::Truncated(_) => {
                if let Some((n, _)) = u.iter().find(|&(n, v)| n <= self.ell && v > 0.0) {
                    return Err(Error::InvalidInitialDistribution(format!(
                        "large system has mass at size {n} <= ell"
                    )));
                }
                if let SystemKind::Truncated(cap) = self.kind {
                    if let Some(n) = u.max_size().filter(|&n| n > cap) {
                        return Err(Error::InvalidInitialDistribution(format!(
                            "size {n} exceeds the truncation size {cap}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Where the mass of a distribution sits relative to `ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportShape {
    Empty,
    SmallOnly,
    LargeOnly,
    Mixed,
}

/// Sparse nonnegative cluster fractions `u_n`, keyed by size.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDistribution {
    ell: usize,
    s_max: usize,
    u: BTreeMap<usize, f64>,
}

impl ClusterDistribution {
    /// Initial data: nonnegative, nonempty, and summing to one.
    pub fn initial<I>(ell: usize, fractions: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let dist = Self::from_fractions(ell, fractions)?;
        if dist.u.is_empty() {
            return Err(Error::InvalidInitialDistribution("empty support".into()));
        }
        let total = dist.total();
        if math::abs(total - 1.0) > NORMALIZATION_TOL {
            return Err(Error::InvalidInitialDistribution(format!(
                "fractions sum to {total}, expected 1"
            )));
        }
        Ok(dist)
    }

    /// Monodisperse `k`-mer initial data `u_n = delta_{n,k}`.
    pub fn monodisperse(ell: usize, k: usize) -> Result<Self> {
        Self::initial(ell, [(k, 1.0)])
    }

    /// A state at some later time: nonnegative entries, no normalization
    /// requirement. Zero entries are dropped.
    pub fn from_fractions<I>(ell: usize, fractions: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        if ell == 0 {
            return Err(Error::InvalidParams(
                "emission size must be at least 1".into(),
            ));
        }
        let mut u = BTreeMap::new();
        for (n, v) in fractions {
            if n == 0 {
                return Err(Error::InvalidInitialDistribution(
                    "size 0 is not a cluster".into(),
                ));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInitialDistribution(format!(
                    "u_{n} = {v} is not a nonnegative number"
                )));
            }
            if n > DEFAULT_S_MAX {
                return Err(Error::InvalidInitialDistribution(format!(
                    "size {n} exceeds the cap {DEFAULT_S_MAX}"
                )));
            }
            if v > 0.0 {
                *u.entry(n).or_insert(0.0) += v;
            }
        }
        Ok(Self {
            ell,
            s_max: DEFAULT_S_MAX,
            u,
        })
    }

    /// Builds a distribution from a dense slice where `values[i]` is the
    /// fraction of size `offset + i`. Negative values in `(-CLAMP_ERROR, 0)`
    /// are clamped; the number of clamped entries is returned.
    pub fn from_dense_clamped(ell: usize, offset: usize, values: &[f64]) -> Result<(Self, usize)> {
        let mut clamps = 0;
        let mut pairs = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            let (v, clamped) = clamp_component(offset + i, v)?;
            clamps += usize::from(clamped);
            pairs.push((offset + i, v));
        }
        Ok((Self::from_fractions(ell, pairs)?, clamps))
    }

    /// Lowers the hard size cap. Fails if the support already exceeds it.
    pub fn with_s_max(mut self, s_max: usize) -> Result<Self> {
        if let Some(n) = self.max_size().filter(|&n| n > s_max) {
            return Err(Error::InvalidInitialDistribution(format!(
                "size {n} exceeds the cap {s_max}"
            )));
        }
        self.s_max = s_max;
        Ok(self)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn get(&self, n: usize) -> f64 {
        self.u.get(&n).copied().unwrap_or(0.0)
    }

    /// Occupied sizes in increasing order with their fractions.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.u.iter().map(|(&n, &v)| (n, v))
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn max_size(&self) -> Option<usize> {
        self.u.keys().next_back().copied()
    }

    pub fn total(&self) -> f64 {
        self.u.values().sum()
    }

    pub fn shape(&self) -> SupportShape {
        let small = self.u.keys().any(|&n| n <= self.ell);
        let large = self.u.keys().any(|&n| n > self.ell);
        match (small, large) {
            (false, false) => SupportShape::Empty,
            (true, false) => SupportShape::SmallOnly,
            (false, true) => SupportShape::LargeOnly,
            (true, true) => SupportShape::Mixed,
        }
    }

    /// Dense copy with `out[n] = u_n` for `n < len`.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (n, v) in self.iter().take_while(|&(n, _)| n < len) {
            out[n] = v;
        }
        out
    }
}

/// Applies the negative-clamp rule to one component. Returns the clamped
/// value and whether a clamp happened.
pub fn clamp_component(size: usize, value: f64) -> Result<(f64, bool)> {
    if value >= 0.0 {
        Ok((value, false))
    } else if value > -CLAMP_ERROR {
        Ok((0.0, true))
    } else {
        Err(Error::NegativeState { size, value })
    }
}

/// Moments `m_0 ..= m_kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    m: Vec<f64>,
}

impl MomentVector {
    pub fn new(m: Vec<f64>) -> Self {
        Self { m }
    }

    pub fn of(u: &ClusterDistribution, kmax: usize) -> Self {
        Self {
            m: (0..=kmax).map(|k| moment(u, k as u32)).collect(),
        }
    }

    pub fn get(&self, k: usize) -> f64 {
        self.m[k]
    }

    pub fn kmax(&self) -> usize {
        self.m.len().saturating_sub(1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }
}

/// `m_k = sum n^k u_n`.
pub fn moment(u: &ClusterDistribution, k: u32) -> f64 {
    u.iter()
        .map(|(n, v)| math::powi(n as f64, k as i32) * v)
        .sum()
}

/// `M = sum over ordered pairs with i + j >= ell + 1 of i j u_i u_j`.
///
/// Written as `m1b (m1b + 2 m1s)` plus the permitted part of the small block,
/// which equals `m_1^2` minus the forbidden block `i + j <= ell` without the
/// cancellation that subtraction suffers near exhaustion.
pub fn interaction_mass(u: &ClusterDistribution) -> f64 {
    let ell = u.ell();
    let split = split_moments(u);
    let small = small_weights(u);
    let mut block = 0.0;
    for i in 1..=ell {
        for j in (ell + 1 - i)..=ell {
            block += small[i] * small[j];
        }
    }
    split.m1b * (split.m1b + 2.0 * split.m1s) + block
}

/// Interaction mass of the truncated system: pairs whose product size lies in
/// `[1, cap]`.
pub fn truncated_interaction_mass(u: &ClusterDistribution, cap: usize) -> f64 {
    let ell = u.ell();
    let sizes: Vec<(usize, f64)> = u.iter().collect();
    let mut total = 0.0;
    for &(i, ui) in &sizes {
        for &(j, uj) in &sizes {
            if i + j > ell && i + j - ell <= cap {
                total += (i * j) as f64 * ui * uj;
            }
        }
    }
    total
}

/// `s[j] = j u_j` for `j = 0..=ell` (entry 0 unused).
fn small_weights(u: &ClusterDistribution) -> Vec<f64> {
    let ell = u.ell();
    let mut s = vec![0.0; ell + 1];
    for (n, v) in u.iter().take_while(|&(n, _)| n <= ell) {
        s[n] = n as f64 * v;
    }
    s
}

/// Time derivative `du_n/dt` of every size that is occupied or can be
/// produced in one reaction.
///
/// Each ordered pair `(i, j)` with a permissible product contributes weight
/// `i j u_i u_j / M`: one `i`-cluster and one `j`-cluster are lost and one
/// `(i + j - ell)`-cluster is gained. Summing these contributions per size
/// gives the birth-minus-death form of the kinetic equations. For
/// `Truncated(N)` only products of size `<= N` are permitted and `M` is the
/// truncated interaction mass; for `Large` the normalizer is `m_1^2`.
pub fn rhs(u: &ClusterDistribution, params: &EmissionParams) -> Result<BTreeMap<usize, f64>> {
    params.check_support(u)?;
    let ell = params.ell();
    let (cap, denom) = match params.kind() {
        SystemKind::Full | SystemKind::Small => (usize::MAX, interaction_mass(u)),
        SystemKind::Large => {
            let m1 = moment(u, 1);
            (usize::MAX, m1 * m1)
        }
        SystemKind::Truncated(n) => (n, truncated_interaction_mass(u, n)),
    };
    if !(denom >= EPS_M) {
        return Err(Error::DivisionByExhaustion { denominator: denom });
    }
    let sizes: Vec<(usize, f64)> = u.iter().collect();
    let mut du: BTreeMap<usize, f64> = sizes.iter().map(|&(n, _)| (n, 0.0)).collect();
    for &(i, ui) in &sizes {
        for &(j, uj) in &sizes {
            if i + j <= ell || i + j - ell > cap {
                continue;
            }
            let w = (i * j) as f64 * ui * uj / denom;
            *du.get_mut(&i).expect("occupied") -= w;
            *du.get_mut(&j).expect("occupied") -= w;
            *du.entry(i + j - ell).or_insert(0.0) += w;
        }
    }
    Ok(du)
}

/// Cluster and particle totals split into small (`<= ell`) and large sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitMoments {
    pub m0s: f64,
    pub m0b: f64,
    pub m1s: f64,
    pub m1b: f64,
}

pub fn split_moments(u: &ClusterDistribution) -> SplitMoments {
    let ell = u.ell();
    let mut out = SplitMoments {
        m0s: 0.0,
        m0b: 0.0,
        m1s: 0.0,
        m1b: 0.0,
    };
    for (n, v) in u.iter() {
        if n <= ell {
            out.m0s += v;
            out.m1s += n as f64 * v;
        } else {
            out.m0b += v;
            out.m1b += n as f64 * v;
        }
    }
    out
}

/// Growth rates of the small/large cluster and particle totals.
///
/// Pairs are grouped by reactant sizes `k` (larger) and `j` (smaller):
/// small-small, large-large, a large `k < 2 ell` with a small `j` that
/// leaves a small product (`j <= 2 ell - k`) or a large one, and `k >= 2 ell`
/// with a small `j`. Small-small pairs only count when permissible
/// (`k + j >= ell + 1`), so the cluster rates always sum to `-1` and the
/// particle rates to `-ell`.
pub fn split_moment_rates(u: &ClusterDistribution) -> Result<SplitMoments> {
    let ell = u.ell();
    let m = interaction_mass(u);
    if !(m >= EPS_M) {
        return Err(Error::DivisionByExhaustion { denominator: m });
    }
    let s = small_weights(u);
    let split = split_moments(u);
    let lf = ell as f64;

    // Permitted small-small block.
    let mut small_block = 0.0;
    for k in 1..=ell {
        for j in (ell + 1 - k)..=ell {
            small_block += s[k] * s[j];
        }
    }

    // Large-small pair sums.
    let mut stay_small = 0.0; // ell < k < 2 ell, j <= 2 ell - k
    let mut stay_small_p_s = 0.0; // weighted by (k - ell)
    let mut stay_small_p_b = 0.0; // weighted by k
    let mut go_large = 0.0; // remaining large-small pairs
    let mut go_large_p_s = 0.0; // weighted by j
    let mut go_large_p_b = 0.0; // weighted by (ell - j)
    for (k, v) in u.iter().filter(|&(k, _)| k > ell) {
        let sk = k as f64 * v;
        for (j, &sj) in s.iter().enumerate().skip(1) {
            let w = sk * sj;
            if k < 2 * ell && j <= 2 * ell - k {
                stay_small += w;
                stay_small_p_s += (k - ell) as f64 * w;
                stay_small_p_b += k as f64 * w;
            } else {
                go_large += w;
                go_large_p_s += j as f64 * w;
                go_large_p_b += (ell - j) as f64 * w;
            }
        }
    }

    Ok(SplitMoments {
        m0s: -(small_block + 2.0 * go_large) / m,
        m0b: -(split.m1b * split.m1b + 2.0 * stay_small) / m,
        m1s: (-lf * small_block + 2.0 * stay_small_p_s - 2.0 * go_large_p_s) / m,
        m1b: -(lf * split.m1b * split.m1b + 2.0 * stay_small_p_b + 2.0 * go_large_p_b) / m,
    })
}

/// q-coordinates `q_n = u_n / m_1`.
pub fn to_q(u: &ClusterDistribution) -> Result<ClusterDistribution> {
    let m1 = moment(u, 1);
    if !(m1 > 0.0) {
        return Err(Error::DomainError("q-coordinates need m_1 > 0".into()));
    }
    ClusterDistribution::from_fractions(u.ell(), u.iter().map(|(n, v)| (n, v / m1)))
}

/// Inverse of [`to_q`] given the total mass `m1`.
pub fn from_q(q: &ClusterDistribution, m1: f64) -> Result<ClusterDistribution> {
    if !(m1 > 0.0) {
        return Err(Error::DomainError("q-coordinates need m_1 > 0".into()));
    }
    ClusterDistribution::from_fractions(q.ell(), q.iter().map(|(n, v)| (n, v * m1)))
}

fn catalan_like(big_l: usize, ell: usize, n_max: usize, seeded: bool) -> Result<Vec<f64>> {
    if big_l == 0 || ell == 0 {
        return Err(Error::InvalidParams("L and ell must be positive".into()));
    }
    let base = 2 * big_l + ell;
    if n_max < base {
        return Err(Error::InvalidParams(format!(
            "n_max must be at least 2L + ell = {base}"
        )));
    }
    let mut a = vec![0.0; n_max + 1];
    if seeded {
        for (k, slot) in a.iter_mut().enumerate().take(base).skip(ell + 1) {
            *slot = k as f64;
        }
    }
    a[base] = base as f64;
    for n in base..n_max {
        let conv: f64 = ((ell + 1)..=n).map(|k| a[k] * a[n - k + ell + 1]).sum();
        let factor = (2 * big_l) as f64 / (n + 1 - ell - 2 * big_l) as f64;
        a[n + 1] = (n + 1) as f64 * factor * conv;
    }
    Ok(a)
}

/// Catalan-like majorant sequence `A_n` for truncated large-cluster
/// solutions with initial support in `[ell + 1, L]`, indexed by size
/// (`result[n] = A_n`, zero below `ell + 1`).
///
/// `A_{2L+ell} = 2L + ell`, sizes `ell < k < 2L + ell` are seeded with
/// `A_k = k` (the trivial bound `k u_k <= k`), and for `n >= 2L + ell`
///
/// `A_{n+1} / (n+1) = 2L / (n + 1 - ell - 2L) * sum_{k=ell+1}^{n} A_k A_{n-k+ell+1}`.
///
/// With these seeds every `A_n` is positive and
/// `u_i(t) <= (A_i / i) t^{(i - ell)/2L - 1}` holds for `i >= 2L + ell`.
pub fn catalan_bound_sequence(big_l: usize, ell: usize, n_max: usize) -> Result<Vec<f64>> {
    catalan_like(big_l, ell, n_max, true)
}

/// The same recursion with all sizes below `2L + ell` set to zero. This is
/// the sequence that obeys the geometric growth bound
/// [`catalan_growth_bound`]; it vanishes on sizes that cannot be written as
/// sums from `2L + ell` upward.
pub fn catalan_tail_sequence(big_l: usize, ell: usize, n_max: usize) -> Result<Vec<f64>> {
    catalan_like(big_l, ell, n_max, false)
}

/// `(2L+ell)^3 gamma^{(n-ell)/2L - 1} / n^2` with
/// `gamma = 14 (2L+ell+2)(2L+ell)^3`.
pub fn catalan_growth_bound(big_l: usize, ell: usize, n: usize) -> f64 {
    let base = (2 * big_l + ell) as f64;
    let gamma = 14.0 * (base + 2.0) * base * base * base;
    let expo = (n as f64 - ell as f64) / (2 * big_l) as f64 - 1.0;
    base * base * base * math::powf(gamma, expo) / (n as f64 * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_species() -> ClusterDistribution {
        ClusterDistribution::initial(3, [(1, 0.5), (2, 0.3), (3, 0.2)]).unwrap()
    }

    /// Ordered double sum straight from the definition.
    fn brute_mass(u: &ClusterDistribution) -> f64 {
        let mut m = 0.0;
        for (i, ui) in u.iter() {
            for (j, uj) in u.iter() {
                if i + j > u.ell() {
                    m += (i * j) as f64 * ui * uj;
                }
            }
        }
        m
    }

    #[test]
    fn interaction_mass_examples() {
        let u = three_species();
        assert!((interaction_mass(&u) - 2.04).abs() < 1e-14);
        assert!((brute_mass(&u) - 2.04).abs() < 1e-14);
        let dimer = ClusterDistribution::monodisperse(1, 2).unwrap();
        assert_eq!(interaction_mass(&dimer), 4.0);
        let empty = ClusterDistribution::from_fractions(2, []).unwrap();
        assert_eq!(interaction_mass(&empty), 0.0);
    }

    #[test]
    fn three_species_rhs() {
        let u = three_species();
        let p = EmissionParams::new(3, SystemKind::Small).unwrap();
        let du = rhs(&u, &p).unwrap();
        let m = 2.04;
        assert!((du[&1] - 0.36 / m).abs() < 1e-14);
        assert!((du[&2] + 0.72 / m).abs() < 1e-14);
        assert!((du[&3] + (6.0 * 0.5 * 0.2 + 12.0 * 0.3 * 0.2 + 9.0 * 0.04) / m).abs() < 1e-14);
        assert!((du[&1] - 0.176470588).abs() < 1e-8);
        assert!((du[&2] + 0.352941176).abs() < 1e-8);
        assert!((du[&3] + 0.823529412).abs() < 1e-8);
        assert!((du.values().sum::<f64>() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_rhs_examples() {
        let p = EmissionParams::new(1, SystemKind::Large).unwrap();
        let u = ClusterDistribution::from_fractions(1, [(2, 0.5)]).unwrap();
        let du = rhs(&u, &p).unwrap();
        assert!((du[&2] + 2.0).abs() < 1e-14);
        assert!((du[&3] - 1.0).abs() < 1e-14);

        // single occupied size ell + 1
        let ell = 4;
        let p = EmissionParams::new(ell, SystemKind::Large).unwrap();
        let u = ClusterDistribution::from_fractions(ell, [(ell + 1, 0.3)]).unwrap();
        let m1 = moment(&u, 1);
        let du = rhs(&u, &p).unwrap();
        assert!((du[&(ell + 1)] + 2.0 * (ell + 1) as f64 * 0.3 / m1).abs() < 1e-14);
        assert_eq!(du.len(), 2);
    }

    #[test]
    fn rhs_rejects_exhausted_and_wrong_kind() {
        let p = EmissionParams::new(3, SystemKind::Small).unwrap();
        let u = ClusterDistribution::from_fractions(3, [(1, 1.0)]).unwrap();
        assert!(matches!(
            rhs(&u, &p),
            Err(Error::DivisionByExhaustion { .. })
        ));
        let u = ClusterDistribution::from_fractions(3, [(5, 1.0)]).unwrap();
        assert!(matches!(
            rhs(&u, &p),
            Err(Error::InvalidInitialDistribution(_))
        ));
        let p = EmissionParams::new(3, SystemKind::Large).unwrap();
        let u = three_species();
        assert!(rhs(&u, &p).is_err());
    }

    #[test]
    fn truncated_rhs_keeps_products_in_range() {
        let p = EmissionParams::new(1, SystemKind::Truncated(10)).unwrap();
        let u = ClusterDistribution::from_fractions(1, [(2, 0.2), (5, 0.3), (9, 0.1)]).unwrap();
        let du = rhs(&u, &p).unwrap();
        assert!(du.keys().all(|&n| n <= 10));
        let count: f64 = du.values().sum();
        let mass: f64 = du.iter().map(|(&n, &v)| n as f64 * v).sum();
        assert!((count + 1.0).abs() < 1e-12);
        assert!((mass + 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_and_split() {
        let u = three_species();
        assert!((moment(&u, 1) - 1.7).abs() < 1e-15);
        assert!((moment(&u, 0) - 1.0).abs() < 1e-15);
        let dimer = ClusterDistribution::monodisperse(1, 2).unwrap();
        assert_eq!(moment(&dimer, 2), 4.0);
        let s = split_moments(&u);
        assert_eq!((s.m0b, s.m1b), (0.0, 0.0));
        assert!((s.m0s - 1.0).abs() < 1e-15 && (s.m1s - 1.7).abs() < 1e-15);
        let s = split_moments(&dimer);
        assert_eq!((s.m0s, s.m1s), (0.0, 0.0));
    }

    #[test]
    fn split_rates_pure_states() {
        let r = split_moment_rates(&three_species()).unwrap();
        assert_eq!((r.m0b, r.m1b), (0.0, 0.0));
        assert!((r.m0s + 1.0).abs() < 1e-14 && (r.m1s + 3.0).abs() < 1e-14);
        let u = ClusterDistribution::from_fractions(3, [(4, 0.3), (7, 0.7)]).unwrap();
        let r = split_moment_rates(&u).unwrap();
        assert_eq!((r.m0s, r.m1s), (0.0, 0.0));
        assert!((r.m0b + 1.0).abs() < 1e-14 && (r.m1b + 3.0).abs() < 1e-14);
    }

    /// Expected change per reaction, enumerating ordered reactant pairs.
    fn brute_split_rates(u: &ClusterDistribution) -> SplitMoments {
        let ell = u.ell();
        let m = brute_mass(u);
        let mut r = SplitMoments {
            m0s: 0.0,
            m0b: 0.0,
            m1s: 0.0,
            m1b: 0.0,
        };
        let small = |n: usize| n <= ell;
        for (i, ui) in u.iter() {
            for (j, uj) in u.iter() {
                if i + j <= ell {
                    continue;
                }
                let p = (i * j) as f64 * ui * uj / m;
                let k = i + j - ell;
                for (n, sign) in [(i, -1.0), (j, -1.0), (k, 1.0)] {
                    if small(n) {
                        r.m0s += sign * p;
                        r.m1s += sign * p * n as f64;
                    } else {
                        r.m0b += sign * p;
                        r.m1b += sign * p * n as f64;
                    }
                }
            }
        }
        r
    }

    #[test]
    fn split_rates_match_pair_enumeration() {
        let u = ClusterDistribution::from_fractions(3, [(2, 0.4), (5, 0.6)]).unwrap();
        let r = split_moment_rates(&u).unwrap();
        let b = brute_split_rates(&u);
        for (x, y) in [
            (r.m0s, b.m0s),
            (r.m0b, b.m0b),
            (r.m1s, b.m1s),
            (r.m1b, b.m1b),
        ] {
            assert!((x - y).abs() < 1e-13, "{x} vs {y}");
        }
        assert!(r.m0s <= 0.0 && r.m0b <= 0.0 && r.m1b <= 0.0);
    }

    #[test]
    fn q_coordinates() {
        let dimer = ClusterDistribution::monodisperse(1, 2).unwrap();
        assert_eq!(to_q(&dimer).unwrap().get(2), 0.5);
        let u = ClusterDistribution::from_fractions(2, [(7, 0.3)]).unwrap();
        assert!((to_q(&u).unwrap().get(7) - 1.0 / 7.0).abs() < 1e-15);
        assert!(to_q(&ClusterDistribution::from_fractions(2, []).unwrap()).is_err());
    }

    #[test]
    fn catalan_examples() {
        let a = catalan_bound_sequence(2, 1, 12).unwrap();
        assert_eq!(a[5], 5.0);
        // A_6 / 6 = 4 / 1 * (A_2 A_5 + A_3 A_4 + A_4 A_3 + A_5 A_2)
        let hand = 6.0 * 4.0 * (2.0 * 5.0 + 3.0 * 4.0 + 4.0 * 3.0 + 5.0 * 2.0);
        assert_eq!(a[6], hand);
        assert_eq!(a[6], 1056.0);
        assert!(a[2..].iter().all(|&x| x > 0.0));
        assert!(catalan_bound_sequence(2, 1, 4).is_err());
    }

    #[test]
    fn catalan_tail_obeys_growth_bound() {
        for (big_l, ell) in [(1, 1), (2, 1), (2, 3), (3, 2)] {
            let a = catalan_tail_sequence(big_l, ell, 80).unwrap();
            for (n, &an) in a.iter().enumerate().skip(2 * big_l + ell) {
                let bound = catalan_growth_bound(big_l, ell, n);
                assert!(an <= bound * (1.0 + 1e-12), "L={big_l} ell={ell} n={n}");
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(EmissionParams::new(0, SystemKind::Full).is_err());
        assert!(EmissionParams::new(2, SystemKind::Truncated(3)).is_err());
        let p = EmissionParams::new(1, SystemKind::Truncated(4)).unwrap();
        let u = ClusterDistribution::monodisperse(1, 2).unwrap();
        assert!(p.check_initial(&u).is_err());
        let p = EmissionParams::new(1, SystemKind::Truncated(5)).unwrap();
        assert!(p.check_initial(&u).is_ok());
        assert!(ClusterDistribution::initial(1, [(2, 0.5)]).is_err());
        assert!(ClusterDistribution::initial(1, [(2, 1.5), (3, -0.5)]).is_err());
        assert!(ClusterDistribution::initial(1, []).is_err());
    }

    #[test]
    fn clamp_rule() {
        assert_eq!(clamp_component(3, -1e-13).unwrap(), (0.0, true));
        assert_eq!(clamp_component(3, 0.25).unwrap(), (0.25, false));
        assert!(clamp_component(3, -1e-8).is_err());
    }
}
