//! Finite-N particle simulation.
//!
//! One reaction happens per step and time advances by `1 / N0`, so time is
//! the extent of reaction. Reactants are an ordered pair drawn without
//! replacement, each with probability proportional to cluster size, and the
//! pair is redrawn until its product is nonempty (`i + j >= ell + 1`).
//!
//! Size-proportional draws go through a Fenwick tree over sizes holding the
//! weights `n U_n`, so a draw and an update both cost `O(log S)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kinetics::ClusterDistribution;
use crate::math;
use crate::trajectory::{Record, Tracking, Trajectory};

/// Name and version of the random stream. Changing the generator or the way
/// draws are made changes every trajectory, so bump this with it.
pub const RNG_STREAM: &str = "chacha8-u64range/1";

/// Rejection attempts before falling back to exact enumeration.
pub const RETRY_CAP: u32 = 1_000_000;

/// Prefix-sum tree over size slots `1..=capacity` with integer weights.
#[derive(Debug, Clone)]
pub struct WeightedSizeIndex {
    tree: Vec<u64>,
    total: u64,
}

impl WeightedSizeIndex {
    pub fn new(capacity: usize) -> Self {
        Self {
            tree: vec![0; capacity.max(1) + 1],
            total: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Adds `delta` to the weight of `size`, doubling the capacity as needed.
    pub fn add(&mut self, size: usize, delta: i64) {
        debug_assert!(size >= 1);
        if size > self.capacity() {
            let mut cap = self.capacity();
            while cap < size {
                cap *= 2;
            }
            self.grow(cap);
        }
        let mut i = size;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
        self.total = self.total.wrapping_add_signed(delta);
    }

    /// Sum of weights over sizes `1..=size`.
    pub fn prefix(&self, size: usize) -> u64 {
        let mut i = size.min(self.capacity());
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i &= i - 1;
        }
        sum
    }

    pub fn point(&self, size: usize) -> u64 {
        if size == 0 || size > self.capacity() {
            return 0;
        }
        self.prefix(size) - self.prefix(size - 1)
    }

    /// Smallest size whose prefix sum exceeds `target`; `target < total`.
    pub fn find(&self, target: u64) -> usize {
        debug_assert!(target < self.total);
        let n = self.capacity();
        let mut pos = 0;
        let mut rem = target;
        let mut step = 1usize << (usize::BITS - 1 - n.leading_zeros());
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos + 1
    }

    fn grow(&mut self, capacity: usize) {
        let old: Vec<u64> = (1..=self.capacity()).map(|s| self.point(s)).collect();
        self.tree = vec![0; capacity + 1];
        // Linear-time build.
        for (k, w) in old.into_iter().enumerate() {
            self.tree[k + 1] += w;
        }
        for i in 1..=capacity {
            let parent = i + (i & i.wrapping_neg());
            if parent <= capacity {
                self.tree[parent] += self.tree[i];
            }
        }
    }
}

/// How the emerging gel interacts with the sol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GelPolicy {
    /// No intervention: the gel keeps reacting with the sol. Sampling
    /// without replacement already prevents the gel pairing with itself.
    ZiffStell,
    /// Clusters of size `>= threshold` are removed from both draws.
    Stockmayer { threshold: usize },
}

impl GelPolicy {
    /// Stockmayer with the default threshold `N / 100`.
    pub fn stockmayer_default(n0: u64) -> Self {
        GelPolicy::Stockmayer {
            threshold: ((n0 / 100) as usize).max(2),
        }
    }

    fn eligible(&self, size: usize) -> bool {
        match *self {
            GelPolicy::ZiffStell => true,
            GelPolicy::Stockmayer { threshold } => size < threshold,
        }
    }
}

/// Integer cluster counts of one replica together with its sampler state.
#[derive(Debug, Clone)]
pub struct ParticleState {
    ell: usize,
    n0: u64,
    p0: u64,
    counts: BTreeMap<usize, u64>,
    /// Weights `n U_n` over clusters eligible for sampling.
    index: WeightedSizeIndex,
    eligible_clusters: u64,
    total_clusters: u64,
    total_particles: u64,
    step_count: u64,
    policy: GelPolicy,
    seed: u64,
    rng: ChaCha8Rng,
    fallback_draws: u64,
}

impl ParticleState {
    /// Rounds `N u0_n` to integers with the largest-remainder rule (ties go
    /// to the smaller size), so the initial cluster count is exactly `N`.
    pub fn new(n: u64, u0: &ClusterDistribution, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams("need at least two clusters".into()));
        }
        if u0.is_empty() {
            return Err(Error::InvalidInitialDistribution("empty support".into()));
        }
        let total = u0.total();
        if math::abs(total - 1.0) > 1e-9 {
            return Err(Error::InvalidInitialDistribution(format!(
                "fractions sum to {total}, expected 1"
            )));
        }
        let counts = largest_remainder(n, u0);
        Self::from_counts(u0.ell(), counts, seed)
    }

    /// A state with the given counts; `N0` is the number of clusters.
    pub fn from_counts<I>(ell: usize, counts: I, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, u64)>,
    {
        if ell == 0 {
            return Err(Error::InvalidParams(
                "emission size must be at least 1".into(),
            ));
        }
        let counts: BTreeMap<usize, u64> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        if counts.contains_key(&0) {
            return Err(Error::InvalidInitialDistribution(
                "size 0 is not a cluster".into(),
            ));
        }
        let n0: u64 = counts.values().sum();
        if n0 == 0 {
            return Err(Error::InvalidInitialDistribution("no clusters".into()));
        }
        let p0: u64 = counts.iter().map(|(&s, &c)| s as u64 * c).sum();
        let largest = counts.keys().next_back().copied().unwrap_or(1);
        let mut state = Self {
            ell,
            n0,
            p0,
            counts,
            index: WeightedSizeIndex::new(2 * largest),
            eligible_clusters: 0,
            total_clusters: n0,
            total_particles: p0,
            step_count: 0,
            policy: GelPolicy::ZiffStell,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fallback_draws: 0,
        };
        state.rebuild_index();
        Ok(state)
    }

    /// Switches the gel policy, rebuilding the sampling index.
    pub fn with_policy(mut self, policy: GelPolicy) -> Result<Self> {
        if let GelPolicy::Stockmayer { threshold } = policy {
            if threshold < self.ell + 1 {
                return Err(Error::InvalidParams(format!(
                    "Stockmayer threshold {threshold} must be at least ell + 1 = {}",
                    self.ell + 1
                )));
            }
        }
        self.policy = policy;
        self.rebuild_index();
        Ok(self)
    }

    fn rebuild_index(&mut self) {
        let largest = self.counts.keys().next_back().copied().unwrap_or(1);
        self.index = WeightedSizeIndex::new(2 * largest);
        self.eligible_clusters = 0;
        for (&s, &c) in &self.counts {
            if self.policy.eligible(s) {
                self.index.add(s, (s as u64 * c) as i64);
                self.eligible_clusters += c;
            }
        }
    }

    pub fn ell(&self) -> usize {
        self.ell
    }
    pub fn n0(&self) -> u64 {
        self.n0
    }
    pub fn initial_particles(&self) -> u64 {
        self.p0
    }
    pub fn total_clusters(&self) -> u64 {
        self.total_clusters
    }
    pub fn total_particles(&self) -> u64 {
        self.total_particles
    }
    pub fn step_count(&self) -> u64 {
        self.step_count
    }
    pub fn policy(&self) -> GelPolicy {
        self.policy
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    /// Draws that needed the exact-enumeration fallback.
    pub fn fallback_draws(&self) -> u64 {
        self.fallback_draws
    }
    pub fn index(&self) -> &WeightedSizeIndex {
        &self.index
    }

    /// Extent of reaction `step_count / N0`.
    pub fn time(&self) -> f64 {
        self.step_count as f64 / self.n0 as f64
    }

    pub fn count(&self, size: usize) -> u64 {
        self.counts.get(&size).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&s, &c)| (s, c))
    }

    pub fn largest_size(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }

    /// Normalized fractions `U_n / N0`.
    pub fn fractions(&self) -> Result<ClusterDistribution> {
        let n0 = self.n0 as f64;
        ClusterDistribution::from_fractions(
            self.ell,
            self.counts().map(|(s, c)| (s, c as f64 / n0)),
        )
    }

    /// Largest eligible cluster and the next one (which may share its size).
    fn two_largest_eligible(&self) -> Option<(usize, usize)> {
        if self.eligible_clusters < 2 {
            return None;
        }
        let total = self.index.total();
        let first = self.index.find(total - 1);
        let c = self.count(first);
        let second = if c >= 2 {
            first
        } else {
            self.index.find(total - first as u64 - 1)
        };
        Some((first, second))
    }

    /// Whether some ordered pair of distinct eligible clusters has a
    /// nonempty product. The best candidates are the two largest clusters.
    pub fn feasibility_check(&self) -> bool {
        self.two_largest_eligible()
            .is_some_and(|(a, b)| a + b > self.ell)
    }

    /// Draws an ordered reactant pair conditioned on a nonempty product.
    pub fn sample_pair(&mut self) -> Result<(usize, usize)> {
        if !self.feasibility_check() {
            return Err(Error::Exhausted);
        }
        for _ in 0..RETRY_CAP {
            let total = self.index.total();
            let i = self.index.find(self.rng.gen_range(0..total));
            self.index.add(i, -(i as i64));
            let j = self.index.find(self.rng.gen_range(0..total - i as u64));
            self.index.add(i, i as i64);
            if i + j > self.ell {
                return Ok((i, j));
            }
        }
        self.fallback_draws += 1;
        self.sample_pair_exact()
    }

    /// Enumerates the conditional pair law directly:
    /// `P(i, j) ∝ i U_i * j (U_j - [i = j]) / (W - i)` over permissible pairs.
    fn sample_pair_exact(&mut self) -> Result<(usize, usize)> {
        let total = self.index.total() as f64;
        let sizes: Vec<(usize, u64)> = self
            .counts()
            .filter(|&(s, _)| self.policy.eligible(s))
            .collect();
        let mut pairs = Vec::new();
        let mut acc = 0.0;
        for &(i, ci) in &sizes {
            for &(j, cj) in &sizes {
                let cj = if i == j { cj - 1 } else { cj };
                if i + j <= self.ell || cj == 0 {
                    continue;
                }
                acc += (i as f64 * ci as f64) * (j as f64 * cj as f64) / (total - i as f64);
                pairs.push((acc, i, j));
            }
        }
        if pairs.is_empty() {
            return Err(Error::Exhausted);
        }
        let r = self.rng.gen::<f64>() * acc;
        let k = pairs
            .partition_point(|&(c, _, _)| c <= r)
            .min(pairs.len() - 1);
        Ok((pairs[k].1, pairs[k].2))
    }

    fn remove_cluster(&mut self, size: usize) {
        let c = self.counts.get_mut(&size).expect("cluster present");
        *c -= 1;
        if *c == 0 {
            self.counts.remove(&size);
        }
        if self.policy.eligible(size) {
            self.index.add(size, -(size as i64));
            self.eligible_clusters -= 1;
        }
    }

    fn add_cluster(&mut self, size: usize) {
        *self.counts.entry(size).or_insert(0) += 1;
        if self.policy.eligible(size) {
            self.index.add(size, size as i64);
            self.eligible_clusters += 1;
        }
    }

    /// Performs one reaction and returns `(i, j, product)`.
    pub fn step(&mut self) -> Result<(usize, usize, usize)> {
        let (i, j) = self.sample_pair()?;
        let product = i + j - self.ell;
        self.apply(i, j, product);
        Ok((i, j, product))
    }

    fn apply(&mut self, i: usize, j: usize, product: usize) {
        self.remove_cluster(i);
        self.remove_cluster(j);
        self.add_cluster(product);
        self.step_count += 1;
        self.total_clusters -= 1;
        self.total_particles -= self.ell as u64;
    }

    /// Largest cluster size over total particles; zero when empty.
    pub fn gel_fraction(&self) -> f64 {
        match self.largest_size() {
            Some(s) if self.total_particles > 0 => s as f64 / self.total_particles as f64,
            _ => 0.0,
        }
    }

    /// Re-derives every running total from the counts and checks the index.
    pub fn audit(&self) -> bool {
        let clusters: u64 = self.counts.values().sum();
        let particles: u64 = self.counts.iter().map(|(&s, &c)| s as u64 * c).sum();
        let index_ok = self.counts.iter().all(|(&s, &c)| {
            let expected = if self.policy.eligible(s) {
                s as u64 * c
            } else {
                0
            };
            self.index.point(s) == expected
        });
        let eligible_weight: u64 = self
            .counts
            .iter()
            .filter(|(&s, _)| self.policy.eligible(s))
            .map(|(&s, &c)| s as u64 * c)
            .sum();
        clusters == self.total_clusters
            && particles == self.total_particles
            && self.total_clusters == self.n0 - self.step_count
            && self.total_particles == self.p0 - self.ell as u64 * self.step_count
            && index_ok
            && eligible_weight == self.index.total()
    }

    /// `m_0 ..= m_3` of the normalized fractions, from exact integer sums.
    pub fn moments(&self) -> [f64; 4] {
        let mut sums = [0u128; 4];
        for (&s, &c) in &self.counts {
            let s = s as u128;
            let c = c as u128;
            sums[0] += c;
            sums[1] += s * c;
            sums[2] += s * s * c;
            sums[3] += s * s * s * c;
        }
        let n0 = self.n0 as f64;
        sums.map(|x| x as f64 / n0)
    }

    /// Interaction mass of the normalized fractions.
    pub fn interaction_mass(&self) -> f64 {
        let ell = self.ell;
        let n0 = self.n0 as f64;
        let mut small = vec![0.0; ell + 1];
        let mut m1s = 0.0;
        let mut m1b = 0.0;
        for (&s, &c) in &self.counts {
            let w = s as f64 * c as f64 / n0;
            if s <= ell {
                small[s] = w;
                m1s += w;
            } else {
                m1b += w;
            }
        }
        let mut block = 0.0;
        for i in 1..=ell {
            for j in (ell + 1 - i)..=ell {
                block += small[i] * small[j];
            }
        }
        m1b * (m1b + 2.0 * m1s) + block
    }

    fn record(&self, tracking: &Tracking) -> Record {
        let n0 = self.n0 as f64;
        let fractions = self
            .counts()
            .filter(|&(s, _)| tracking.keeps(s))
            .map(|(s, c)| (s, c as f64 / n0))
            .collect();
        Record {
            t: self.time(),
            fractions,
            moments: self.moments(),
            gel_fraction: Some(self.gel_fraction()),
            interaction_mass: self.interaction_mass(),
            step: Some(self.step_count),
        }
    }

    /// Runs until `step_count / N0 >= t_end` or no reaction is possible,
    /// recording every `record_dt` (rounded to whole steps) and at the end.
    pub fn run(&mut self, t_end: f64, record_dt: f64, tracking: &Tracking) -> Result<RunOutcome> {
        if !(t_end > 0.0) || !(record_dt > 0.0) {
            return Err(Error::InvalidParams(
                "t_end and record_dt must be positive".into(),
            ));
        }
        let n0 = self.n0 as f64;
        let end_step = (libm::ceil(t_end * n0 - 1e-9) as u64).max(self.step_count);
        let mut trajectory = Trajectory::new();
        let mut k = 0u64;
        let mut next_record = self.step_count;
        let mut terminal = Terminal::ReachedTEnd;
        loop {
            if self.step_count >= next_record {
                trajectory.push(self.record(tracking));
                while next_record <= self.step_count {
                    k += 1;
                    next_record = math::round(k as f64 * record_dt * n0) as u64;
                }
            }
            if self.step_count >= end_step {
                break;
            }
            match self.step() {
                Ok(_) => {}
                Err(Error::Exhausted) => {
                    terminal = Terminal::Exhausted { t: self.time() };
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        trajectory.push(self.record(tracking));
        Ok(RunOutcome {
            trajectory,
            terminal,
            metadata: RunMetadata {
                seed: self.seed,
                n0: self.n0,
                ell: self.ell,
                policy: self.policy,
                initial_particles: self.p0,
                steps: self.step_count,
                fallback_draws: self.fallback_draws,
                rng_stream: RNG_STREAM,
            },
        })
    }
}

/// How a particle run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    ReachedTEnd,
    /// No permissible pair remained at extent `t`.
    Exhausted {
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub seed: u64,
    pub n0: u64,
    pub ell: usize,
    pub policy: GelPolicy,
    /// Particle count after rounding; may differ from `N0 m_1(u0)` by O(S).
    pub initial_particles: u64,
    pub steps: u64,
    pub fallback_draws: u64,
    pub rng_stream: &'static str,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub terminal: Terminal,
    pub metadata: RunMetadata,
}

fn largest_remainder(n: u64, u0: &ClusterDistribution) -> Vec<(usize, u64)> {
    let nf = n as f64;
    let mut counts = Vec::with_capacity(u0.len());
    let mut remainders = Vec::with_capacity(u0.len());
    let mut assigned = 0u64;
    for (s, v) in u0.iter() {
        let x = nf * v;
        let base = math::floor(x);
        counts.push((s, base as u64));
        remainders.push((x - base, s, counts.len() - 1));
        assigned += base as u64;
    }
    // Ties resolved toward the smaller size.
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut deficit = n.saturating_sub(assigned);
    for &(_, _, k) in remainders.iter().cycle() {
        if deficit == 0 {
            break;
        }
        counts[k].1 += 1;
        deficit -= 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenwick_basics() {
        let mut idx = WeightedSizeIndex::new(4);
        idx.add(1, 3);
        idx.add(3, 6);
        idx.add(9, 9); // grows
        assert!(idx.capacity() >= 9);
        assert_eq!(idx.total(), 18);
        assert_eq!(idx.point(3), 6);
        assert_eq!(idx.point(9), 9);
        assert_eq!(idx.find(0), 1);
        assert_eq!(idx.find(2), 1);
        assert_eq!(idx.find(3), 3);
        assert_eq!(idx.find(8), 3);
        assert_eq!(idx.find(9), 9);
        assert_eq!(idx.find(17), 9);
        idx.add(3, -6);
        assert_eq!(idx.find(3), 9);
    }

    #[test]
    fn init_rounding() {
        let dimer = ClusterDistribution::monodisperse(1, 2).unwrap();
        let s = ParticleState::new(10, &dimer, 1).unwrap();
        assert_eq!(s.count(2), 10);
        assert_eq!(s.total_particles(), 20);

        let three = ClusterDistribution::initial(3, [(1, 0.5), (2, 0.3), (3, 0.2)]).unwrap();
        let s = ParticleState::new(10, &three, 1).unwrap();
        assert_eq!((s.count(1), s.count(2), s.count(3)), (5, 3, 2));

        let tie = ClusterDistribution::initial(1, [(2, 0.5), (3, 0.5)]).unwrap();
        let s = ParticleState::new(7, &tie, 1).unwrap();
        assert_eq!((s.count(2), s.count(3)), (4, 3));
        assert_eq!(s.total_clusters(), 7);
    }

    #[test]
    fn init_rejects_bad_input() {
        let dimer = ClusterDistribution::monodisperse(1, 2).unwrap();
        assert!(ParticleState::new(1, &dimer, 0).is_err());
        let half = ClusterDistribution::from_fractions(1, [(2, 0.5)]).unwrap();
        assert!(ParticleState::new(10, &half, 0).is_err());
        let empty = ClusterDistribution::from_fractions(1, []).unwrap();
        assert!(ParticleState::new(10, &empty, 0).is_err());
    }

    #[test]
    fn single_size_steps() {
        let mut s = ParticleState::from_counts(1, [(2, 50)], 3).unwrap();
        assert_eq!(s.sample_pair().unwrap(), (2, 2));
        assert_eq!(s.step().unwrap(), (2, 2, 3));
        assert_eq!((s.count(2), s.count(3)), (48, 1));

        let mut s = ParticleState::from_counts(3, [(2, 2)], 3).unwrap();
        assert_eq!(s.step().unwrap(), (2, 2, 1));
        assert_eq!((s.count(2), s.count(1)), (0, 1));

        // S_3 + S_3 -> S_3 with ell = 3: one fewer 3-cluster.
        let mut s = ParticleState::from_counts(3, [(3, 5)], 3).unwrap();
        s.step().unwrap();
        assert_eq!(s.count(3), 4);
        assert!(s.audit());
    }

    #[test]
    fn exhaustion() {
        let mut s = ParticleState::from_counts(3, [(1, 2)], 0).unwrap();
        assert!(!s.feasibility_check());
        assert_eq!(s.sample_pair(), Err(Error::Exhausted));
        let s = ParticleState::from_counts(3, [(2, 1), (1, 5)], 0).unwrap();
        assert!(!s.feasibility_check());
        let s = ParticleState::from_counts(3, [(3, 1), (1, 5)], 0).unwrap();
        assert!(s.feasibility_check());
        let s = ParticleState::from_counts(3, [(9, 1)], 0).unwrap();
        assert!(!s.feasibility_check());
    }

    #[test]
    fn gel_fraction_examples() {
        let s = ParticleState::from_counts(1, [(2, 1000)], 0).unwrap();
        assert!((s.gel_fraction() - 1.0 / 1000.0).abs() < 1e-15);
        let s = ParticleState::from_counts(1, [(3, 1)], 0).unwrap();
        assert_eq!(s.gel_fraction(), 1.0);
    }

    #[test]
    fn exact_fallback_respects_constraint() {
        let mut s = ParticleState::from_counts(3, [(1, 40), (3, 2), (2, 3)], 9).unwrap();
        for _ in 0..200 {
            let (i, j) = s.sample_pair_exact().unwrap();
            assert!(i + j >= 4);
        }
    }

    #[test]
    fn stockmayer_freezes_large_clusters() {
        let s = ParticleState::from_counts(1, [(2, 10), (20, 1)], 0)
            .unwrap()
            .with_policy(GelPolicy::Stockmayer { threshold: 10 })
            .unwrap();
        assert_eq!(s.index().total(), 20);
        let mut s = s;
        for _ in 0..5 {
            let (i, j, _) = s.step().unwrap();
            assert!(i < 10 && j < 10);
        }
        assert!(s.audit());
        assert_eq!(s.count(20), 1);
        assert!(ParticleState::from_counts(3, [(4, 3)], 0)
            .unwrap()
            .with_policy(GelPolicy::Stockmayer { threshold: 3 })
            .is_err());
    }

    #[test]
    fn run_records_and_conserves() {
        let u0 = ClusterDistribution::monodisperse(2, 5).unwrap();
        let mut s = ParticleState::new(1000, &u0, 11).unwrap();
        let out = s.run(0.5, 0.1, &Tracking::All).unwrap();
        assert_eq!(out.terminal, Terminal::ReachedTEnd);
        let times: Vec<f64> = out.trajectory.times().collect();
        assert_eq!(times, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        for r in out.trajectory.records() {
            let k = r.step.unwrap();
            assert_eq!(r.moments[0], (1000 - k) as f64 / 1000.0);
            assert_eq!(r.moments[1], (5000 - 2 * k) as f64 / 1000.0);
        }
        assert!(s.audit());
    }
}
