//! Hybrid circuit protocols: measurement layers, cluster (CHRC) and
//! power-law (LRHRC) unitary layers, and whole-trajectory drivers.
//!
//! Sites are 0-based. Periodic boundaries throughout.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{Quadripartition, Region, Scratch};
use crate::error::{Error, Result};
use crate::seeds::{stream_rng, StreamKey};
use crate::tableau::{sample_two_qubit_clifford, MeasurementKind, StabilizerTableau, SymplecticGate};

/// Anything the layers can drive: the tableau itself, the dense oracle, or a
/// recorder in tests.
pub trait CircuitTarget {
    fn n_qubits(&self) -> usize;
    fn apply_gate(&mut self, gate: &SymplecticGate, i: usize, j: usize);
    fn measure(&mut self, site: usize) -> MeasurementKind;
    /// Consistency check run after every layer in debug builds.
    fn check(&self) -> Result<()> {
        Ok(())
    }
}

impl CircuitTarget for StabilizerTableau {
    fn n_qubits(&self) -> usize {
        StabilizerTableau::n_qubits(self)
    }

    #[inline]
    fn apply_gate(&mut self, gate: &SymplecticGate, i: usize, j: usize) {
        debug_assert!(i != j && i.max(j) < self.n_qubits());
        self.apply_unchecked(gate, i, j);
    }

    #[inline]
    fn measure(&mut self, site: usize) -> MeasurementKind {
        debug_assert!(site < self.n_qubits());
        self.measure_unchecked(site)
    }

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

/// How pair distances enter the power-law weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    /// `|i - j|`, matching the normalization sum over `r = 1..L-1`.
    #[default]
    Linear,
    /// `min(|i - j|, L - |i - j|)` on the ring.
    Chordal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum UnitaryKind {
    /// Clusters of `m - 1` gates with ranges `1..m`.
    Chrc { m: usize },
    /// Independent pairs with probability `r^-alpha / N`.
    Lrhrc {
        alpha: f64,
        #[serde(default)]
        distance: Distance,
    },
}

impl UnitaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            UnitaryKind::Chrc { .. } => "chrc",
            UnitaryKind::Lrhrc { .. } => "lrhrc",
        }
    }

    /// The control parameter: `M` or `alpha`.
    pub fn param(&self) -> f64 {
        match *self {
            UnitaryKind::Chrc { m } => m as f64,
            UnitaryKind::Lrhrc { alpha, .. } => alpha,
        }
    }

    fn stream_tag(&self) -> u8 {
        match self {
            UnitaryKind::Chrc { .. } => 1,
            UnitaryKind::Lrhrc { distance: Distance::Linear, .. } => 2,
            UnitaryKind::Lrhrc { distance: Distance::Chordal, .. } => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub kind: UnitaryKind,
    /// Number of system qubits `L`.
    pub size: usize,
    /// Measurement probability per site per step.
    pub p: f64,
    /// Number of steps `T`.
    pub steps: usize,
    pub master_seed: u64,
    pub n_trajectories: usize,
}

impl ProtocolConfig {
    /// Defaults: `T = 4L`, seed 0, one trajectory.
    pub fn new(kind: UnitaryKind, size: usize, p: f64) -> Self {
        Self { kind, size, p, steps: 4 * size, master_seed: 0, n_trajectories: 1 }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_trajectories(mut self, n: usize) -> Self {
        self.n_trajectories = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.size;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidConfig(format!("p = {} outside [0, 1]", self.p)));
        }
        if l == 0 || !l.is_multiple_of(4) {
            return Err(Error::InvalidConfig(format!("L = {l} must be a positive multiple of 4")));
        }
        match self.kind {
            UnitaryKind::Chrc { m } => check_cluster(l, m)?,
            UnitaryKind::Lrhrc { alpha, .. } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidConfig(format!("alpha = {alpha} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    pub fn stream_key(&self, trajectory_id: u64, ancilla: bool) -> StreamKey {
        StreamKey {
            tag: self.kind.stream_tag() | if ancilla { 0x80 } else { 0 },
            size: self.size,
            p: self.p,
            param: self.kind.param(),
            trajectory_id,
        }
    }
}

fn check_cluster(l: usize, m: usize) -> Result<()> {
    if m < 2 || !m.is_multiple_of(2) || m > l || !l.is_multiple_of(m) {
        return Err(Error::InvalidConfig(format!(
            "cluster size M = {m} must be even, 2 <= M <= L and divide L = {l}"
        )));
    }
    Ok(())
}

fn check_target<T: CircuitTarget + ?Sized>(t: &T, n_sites: usize) -> Result<()> {
    if n_sites > t.n_qubits() {
        return Err(Error::SiteOutOfRange { site: n_sites - 1, n: t.n_qubits() });
    }
    Ok(())
}

/// Measures each of the first `n_sites` sites with probability `p`.
/// Returns how many measurements fired.
pub fn measurement_layer<T, R>(t: &mut T, n_sites: usize, p: f64, rng: &mut R) -> Result<usize>
where
    T: CircuitTarget + ?Sized,
    R: Rng + ?Sized,
{
    check_target(t, n_sites)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("p = {p} outside [0, 1]")));
    }
    let mut fired = 0;
    for site in 0..n_sites {
        if rng.random::<f64>() < p {
            t.measure(site);
            fired += 1;
        }
    }
    Ok(fired)
}

/// One CHRC layer on a ring of `n_sites`: clusters `i = 0, 1, ..., L-1` in
/// order, each applying fresh gates on `(i, i+1), (i, i+2), ..., (i, i+m-1)`.
pub fn chrc_layer<T, R>(t: &mut T, n_sites: usize, m: usize, rng: &mut R) -> Result<()>
where
    T: CircuitTarget + ?Sized,
    R: Rng + ?Sized,
{
    check_target(t, n_sites)?;
    check_cluster(n_sites, m)?;
    for i in 0..n_sites {
        for r in 1..m {
            let g = sample_two_qubit_clifford(rng);
            t.apply_gate(&g, i, (i + r) % n_sites);
        }
    }
    Ok(())
}

/// `N = sum_{r=1}^{L-1} r^-alpha`.
pub fn kac_normalization(n_sites: usize, alpha: f64) -> f64 {
    (1..n_sites).map(|r| (r as f64).powf(-alpha)).sum()
}

/// Inclusion probability of a pair at linear separation `r`.
pub fn pair_probability(r: usize, n_sites: usize, alpha: f64, distance: Distance) -> f64 {
    let d = match distance {
        Distance::Linear => r,
        Distance::Chordal => r.min(n_sites - r),
    };
    (d as f64).powf(-alpha) / kac_normalization(n_sites, alpha)
}

/// Expected number of pairs per LRHRC layer, `sum_r (L - r) P(r)`.
pub fn expected_pair_count(n_sites: usize, alpha: f64, distance: Distance) -> f64 {
    let norm = kac_normalization(n_sites, alpha);
    (1..n_sites)
        .map(|r| {
            let d = match distance {
                Distance::Linear => r,
                Distance::Chordal => r.min(n_sites - r),
            };
            (n_sites - r) as f64 * (d as f64).powf(-alpha) / norm
        })
        .sum()
}

/// Draws the pair set of one LRHRC layer: each pair `(i, j)`, `i < j`,
/// independently with [`pair_probability`]. Returned in random order.
pub fn sample_pairs<R: Rng + ?Sized>(
    n_sites: usize,
    alpha: f64,
    distance: Distance,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if n_sites < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 sites, got {n_sites}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!("alpha = {alpha} must be >= 0")));
    }
    let norm = kac_normalization(n_sites, alpha);
    let mut pairs = Vec::new();
    for r in 1..n_sites {
        let d = match distance {
            Distance::Linear => r,
            Distance::Chordal => r.min(n_sites - r),
        };
        let q = ((d as f64).powf(-alpha) / norm).min(1.0);
        let candidates = n_sites - r;
        if q >= 1.0 {
            pairs.extend((0..candidates).map(|i| (i, i + r)));
            continue;
        }
        if q <= 0.0 {
            continue;
        }
        // skip ahead by geometric gaps instead of one coin per pair
        let log_miss = (-q).ln_1p();
        let gap = |rng: &mut R| -> u64 {
            // failures before the first success, by inversion
            let u: f64 = 1.0 - rng.random::<f64>();
            let g = (u.ln() / log_miss).floor();
            if g >= candidates as f64 { candidates as u64 } else { g as u64 }
        };
        let mut i = gap(rng);
        while i < candidates as u64 {
            let i_us = i as usize;
            pairs.push((i_us, i_us + r));
            i += 1 + gap(rng);
        }
    }
    pairs.shuffle(rng);
    Ok(pairs)
}

/// One LRHRC layer on the first `n_sites` qubits. Returns the gate count.
pub fn lrhrc_layer<T, R>(
    t: &mut T,
    n_sites: usize,
    alpha: f64,
    distance: Distance,
    rng: &mut R,
) -> Result<usize>
where
    T: CircuitTarget + ?Sized,
    R: Rng + ?Sized,
{
    check_target(t, n_sites)?;
    let pairs = sample_pairs(n_sites, alpha, distance, rng)?;
    for &(i, j) in &pairs {
        let g = sample_two_qubit_clifford(rng);
        t.apply_gate(&g, i, j);
    }
    Ok(pairs.len())
}

/// Applies the unitary layer of `kind` on the first `n_sites` qubits.
pub fn unitary_layer<T, R>(t: &mut T, kind: &UnitaryKind, n_sites: usize, rng: &mut R) -> Result<()>
where
    T: CircuitTarget + ?Sized,
    R: Rng + ?Sized,
{
    match *kind {
        UnitaryKind::Chrc { m } => chrc_layer(t, n_sites, m, rng),
        UnitaryKind::Lrhrc { alpha, distance } => {
            lrhrc_layer(t, n_sites, alpha, distance, rng).map(|_| ())
        }
    }
}

/// Measurement layer followed by one unitary layer.
pub fn step<T, R>(t: &mut T, kind: &UnitaryKind, n_sites: usize, p: f64, rng: &mut R) -> Result<()>
where
    T: CircuitTarget + ?Sized,
    R: Rng + ?Sized,
{
    measurement_layer(t, n_sites, p, rng)?;
    debug_check(t)?;
    unitary_layer(t, kind, n_sites, rng)?;
    debug_check(t)
}

#[inline]
fn debug_check<T: CircuitTarget + ?Sized>(t: &T) -> Result<()> {
    if cfg!(debug_assertions) {
        t.check()
    } else {
        Ok(())
    }
}

/// Stationary observables of one trajectory, in bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryObservables {
    /// `S(B ∪ C)`.
    pub s_half: u32,
    pub i2_ac: u32,
    pub i3: i32,
    pub neg_ac: u32,
}

/// Evaluates the observables on the A|B|C|D quadripartition.
pub fn observe(t: &StabilizerTableau, scratch: &mut Scratch) -> Result<TrajectoryObservables> {
    let q = Quadripartition::new(t.n_qubits())?;
    Ok(TrajectoryObservables {
        s_half: scratch.entropy(t, &q.b.union(&q.c))? as u32,
        i2_ac: scratch.mutual_information(t, &q.a, &q.c)? as u32,
        i3: scratch.tmi(t, &q)? as i32,
        neg_ac: scratch.negativity(t, &q.a, &q.c)? as u32,
    })
}

/// Runs `T` steps from `|0...0>` and measures the final state.
pub fn run_trajectory(config: &ProtocolConfig, trajectory_id: u64) -> Result<TrajectoryObservables> {
    config.validate()?;
    let mut rng = stream_rng(config.master_seed, &config.stream_key(trajectory_id, false));
    let mut t = StabilizerTableau::new_z_product_state(config.size)?;
    for _ in 0..config.steps {
        step(&mut t, &config.kind, config.size, config.p, &mut rng)?;
    }
    observe(&t, &mut Scratch::new())
}

/// Entangles an extra reference qubit `R` (index `L`) with the system.
///
/// A sweep of gates `(R,0), (0,1), ..., (L-2,L-1)` is followed by gates
/// `(R,k)` in random order until `S_R = 1`; the whole sequence repeats if
/// that never happens.
pub fn entangle_ancilla<R: Rng + ?Sized>(
    t: &mut StabilizerTableau,
    scratch: &mut Scratch,
    rng: &mut R,
) -> Result<()> {
    let n = t.n_qubits();
    if n < 2 {
        return Err(Error::EmptyRegister);
    }
    let l = n - 1;
    let reference = Region::new(vec![l])?;
    loop {
        t.apply_two_qubit(&sample_two_qubit_clifford(rng), l, 0)?;
        for k in 0..l.saturating_sub(1) {
            t.apply_two_qubit(&sample_two_qubit_clifford(rng), k, k + 1)?;
        }
        let mut order: Vec<usize> = (0..l).collect();
        order.shuffle(rng);
        for k in order {
            if scratch.entropy(t, &reference)? == 1 {
                return Ok(());
            }
            t.apply_two_qubit(&sample_two_qubit_clifford(rng), l, k)?;
        }
        if scratch.entropy(t, &reference)? == 1 {
            return Ok(());
        }
    }
}

/// Reference-qubit entropy `S_R(t)` for `t = 0..=T`, with `t = 0` taken
/// right after the entangling preamble.
pub fn run_ancilla_trajectory(config: &ProtocolConfig, trajectory_id: u64) -> Result<Vec<u8>> {
    config.validate()?;
    let l = config.size;
    let mut rng = stream_rng(config.master_seed, &config.stream_key(trajectory_id, true));
    let mut t = StabilizerTableau::new_z_product_state(l + 1)?;
    let mut scratch = Scratch::new();
    entangle_ancilla(&mut t, &mut scratch, &mut rng)?;
    let reference = Region::new(vec![l])?;
    let mut series = Vec::with_capacity(config.steps + 1);
    series.push(scratch.entropy(&t, &reference)? as u8);
    for _ in 0..config.steps {
        step(&mut t, &config.kind, l, config.p, &mut rng)?;
        series.push(scratch.entropy(&t, &reference)? as u8);
    }
    Ok(series)
}

/// All trajectories of `config`, in parallel, ordered by trajectory id.
pub fn run_batch(config: &ProtocolConfig) -> Result<Vec<TrajectoryObservables>> {
    config.validate()?;
    (0..config.n_trajectories as u64).into_par_iter().map(|id| run_trajectory(config, id)).collect()
}

/// Ancilla series of all trajectories of `config`, in parallel.
pub fn run_ancilla_batch(config: &ProtocolConfig) -> Result<Vec<Vec<u8>>> {
    config.validate()?;
    (0..config.n_trajectories as u64)
        .into_par_iter()
        .map(|id| run_ancilla_trajectory(config, id))
        .collect()
}

/// Running sums for order-independent merging of trajectory results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }

    /// Standard error of the mean; zero for a single sample.
    pub fn stderr(&self) -> Option<f64> {
        let n = self.n as f64;
        match self.n {
            0 => None,
            1 => Some(0.0),
            _ => {
                let mean = self.sum / n;
                let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
                Some((var / n).sqrt())
            }
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Sample mean and standard error of the mean over trajectories.
pub fn conditional_average(results: &[f64]) -> Result<(f64, f64)> {
    if results.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = results.len() as f64;
    let mean = results.iter().sum::<f64>() / n;
    if results.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = results.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::entropy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[derive(Default)]
    struct Recorder {
        n: usize,
        gates: Vec<(usize, usize)>,
        measured: Vec<usize>,
    }

    impl CircuitTarget for Recorder {
        fn n_qubits(&self) -> usize {
            self.n
        }
        fn apply_gate(&mut self, _: &SymplecticGate, i: usize, j: usize) {
            self.gates.push((i, j));
        }
        fn measure(&mut self, site: usize) -> MeasurementKind {
            self.measured.push(site);
            MeasurementKind::Deterministic
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn measurement_layer_limits() {
        let mut t = StabilizerTableau::new_z_product_state(8).unwrap();
        for _ in 0..5 {
            chrc_layer(&mut t, 8, 2, &mut rng(1)).unwrap();
        }
        let before = t.clone();
        assert_eq!(measurement_layer(&mut t, 8, 0.0, &mut rng(2)).unwrap(), 0);
        assert_eq!(t, before);
        assert_eq!(measurement_layer(&mut t, 8, 1.0, &mut rng(3)).unwrap(), 8);
        for start in 0..8 {
            for len in 1..8 {
                assert_eq!(entropy(&t, &Region::contiguous(start, len, 8).unwrap()).unwrap(), 0);
            }
        }
    }

    #[test]
    fn measurement_count_is_binomial() {
        let mut rec = Recorder { n: 10_000, ..Default::default() };
        let fired = measurement_layer(&mut rec, 10_000, 0.5, &mut rng(4)).unwrap() as f64;
        let sigma = (10_000.0f64 * 0.25).sqrt();
        assert!((fired - 5000.0).abs() < 3.0 * sigma, "fired {fired}");
    }

    #[test]
    fn chrc_m2_staircase_order() {
        let mut rec = Recorder { n: 6, ..Default::default() };
        chrc_layer(&mut rec, 6, 2, &mut rng(5)).unwrap();
        assert_eq!(rec.gates, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
    }

    #[test]
    fn chrc_m4_cluster_order() {
        let mut rec = Recorder { n: 8, ..Default::default() };
        chrc_layer(&mut rec, 8, 4, &mut rng(6)).unwrap();
        assert_eq!(rec.gates.len(), 8 * 3);
        assert_eq!(&rec.gates[..4], &[(0, 1), (0, 2), (0, 3), (1, 2)]);
        assert_eq!(&rec.gates[21..], &[(7, 0), (7, 1), (7, 2)]);
    }

    #[test]
    fn chrc_rejects_bad_cluster_sizes() {
        let mut rec = Recorder { n: 8, ..Default::default() };
        for m in [0, 1, 3, 6, 10] {
            assert!(chrc_layer(&mut rec, 8, m, &mut rng(7)).is_err(), "M = {m}");
        }
    }

    #[test]
    fn large_alpha_selects_nearest_neighbours_only() {
        let mut r = rng(8);
        let mut total = 0;
        for _ in 0..200 {
            let pairs = sample_pairs(16, 50.0, Distance::Linear, &mut r).unwrap();
            assert!(pairs.iter().all(|&(i, j)| j - i == 1));
            total += pairs.len();
        }
        assert_eq!(total, 200 * 15);
        assert!((expected_pair_count(16, 50.0, Distance::Linear) - 15.0).abs() < 1e-9);
    }

    fn check_mean_count(l: usize, alpha: f64, layers: usize, seed: u64) {
        // independent closed form: Bernoulli sum with P(r) = r^-a / sum_r r^-a
        let norm: f64 = (1..l).map(|r| 1.0 / (r as f64).powf(alpha)).sum();
        let probs: Vec<f64> = (1..l).map(|r| 1.0 / (r as f64).powf(alpha) / norm).collect();
        let mean: f64 = (1..l).map(|r| (l - r) as f64 * probs[r - 1]).sum();
        let var: f64 = (1..l).map(|r| (l - r) as f64 * probs[r - 1] * (1.0 - probs[r - 1])).sum();
        let mut r = rng(seed);
        let total: usize =
            (0..layers).map(|_| sample_pairs(l, alpha, Distance::Linear, &mut r).unwrap().len()).sum();
        let emp = total as f64 / layers as f64;
        let sigma = (var / layers as f64).sqrt();
        assert!((emp - mean).abs() < 3.0 * sigma, "L={l} alpha={alpha}: {emp} vs {mean} ± {sigma}");
    }

    #[test]
    fn alpha_zero_mean_pair_count() {
        // every pair with probability 1/(L-1): mean L/2
        assert!((expected_pair_count(16, 0.0, Distance::Linear) - 8.0).abs() < 1e-12);
        check_mean_count(16, 0.0, 10_000, 9);
    }

    #[test]
    fn alpha_two_mean_pair_count() {
        check_mean_count(64, 2.0, 10_000, 10);
    }

    #[test]
    fn chordal_distance_probabilities() {
        let l = 12;
        assert_eq!(
            pair_probability(11, l, 2.0, Distance::Chordal),
            pair_probability(1, l, 2.0, Distance::Chordal)
        );
        assert!(pair_probability(11, l, 2.0, Distance::Linear) < pair_probability(1, l, 2.0, Distance::Linear));
    }

    #[test]
    fn lrhrc_rejects_tiny_systems() {
        let mut rec = Recorder { n: 4, ..Default::default() };
        assert!(lrhrc_layer(&mut rec, 1, 1.0, Distance::Linear, &mut rng(1)).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = ProtocolConfig::new(UnitaryKind::Chrc { m: 2 }, 16, 0.3);
        assert_eq!(ok.steps, 64);
        ok.validate().unwrap();
        assert!(ProtocolConfig::new(UnitaryKind::Chrc { m: 4 }, 12, 0.3).validate().is_ok());
        assert!(ProtocolConfig::new(UnitaryKind::Chrc { m: 8 }, 12, 0.3).validate().is_err());
        assert!(ProtocolConfig::new(UnitaryKind::Chrc { m: 2 }, 10, 0.3).validate().is_err());
        let lr = |a| ProtocolConfig::new(UnitaryKind::Lrhrc { alpha: a, distance: Distance::Linear }, 8, 0.1);
        assert!(lr(-0.5).validate().is_err());
        assert!(lr(0.0).validate().is_ok());
        assert!(ProtocolConfig::new(UnitaryKind::Chrc { m: 2 }, 8, 1.5).validate().is_err());
    }

    #[test]
    fn trajectories_are_deterministic() {
        let cfg = ProtocolConfig::new(UnitaryKind::Lrhrc { alpha: 1.5, distance: Distance::Linear }, 16, 0.2)
            .with_seed(42);
        assert_eq!(run_trajectory(&cfg, 3).unwrap(), run_trajectory(&cfg, 3).unwrap());
        assert_eq!(run_ancilla_trajectory(&cfg, 3).unwrap(), run_ancilla_trajectory(&cfg, 3).unwrap());
    }

    #[test]
    fn unitary_only_reaches_volume_law() {
        let cfg = ProtocolConfig::new(UnitaryKind::Chrc { m: 2 }, 32, 0.0).with_steps(128).with_seed(1);
        for id in 0..4 {
            let obs = run_trajectory(&cfg, id).unwrap();
            // random stabilizer states sit within O(1) of L/2 = 16
            assert!(obs.s_half >= 13 && obs.s_half <= 16, "S = {}", obs.s_half);
        }
    }

    #[test]
    fn ancilla_series_shape() {
        let p0 = ProtocolConfig::new(UnitaryKind::Chrc { m: 2 }, 8, 0.0).with_seed(5);
        for id in 0..5 {
            let s = run_ancilla_trajectory(&p0, id).unwrap();
            assert_eq!(s.len(), 33);
            assert!(s.iter().all(|&v| v == 1));
        }
        let p1 = ProtocolConfig::new(UnitaryKind::Lrhrc { alpha: 2.0, distance: Distance::Linear }, 8, 1.0)
            .with_seed(5);
        for id in 0..5 {
            let s = run_ancilla_trajectory(&p1, id).unwrap();
            assert_eq!(s[0], 1);
            // a full projective layer disentangles R at the first step
            assert!(s[1..].iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn accumulator_merges_like_a_single_pass() {
        let xs: Vec<f64> = (0..100).map(|k| ((k * 37) % 11) as f64).collect();
        let whole: Accumulator = xs.iter().copied().collect();
        let mut a: Accumulator = xs[..40].iter().copied().collect();
        let b: Accumulator = xs[40..].iter().copied().collect();
        a.merge(&b);
        assert_eq!(a, whole);
        let (m, e) = conditional_average(&xs).unwrap();
        assert!((a.mean().unwrap() - m).abs() < 1e-12);
        assert!((a.stderr().unwrap() - e).abs() < 1e-12);
    }

    #[test]
    fn conditional_average_cases() {
        assert_eq!(conditional_average(&[]), Err(Error::EmptySample));
        assert_eq!(conditional_average(&[3.0, 3.0, 3.0]).unwrap(), (3.0, 0.0));
        assert_eq!(conditional_average(&[0.0, 1.0, 0.0, 1.0]).unwrap().0, 0.5);
        let mut r = rng(12);
        let draws: Vec<f64> = (0..10_000).map(|_| if r.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
        let (_, se) = conditional_average(&draws).unwrap();
        let analytic = (0.3f64 * 0.7 / 10_000.0).sqrt();
        assert!((se - analytic).abs() < 0.1 * analytic);
    }
}
