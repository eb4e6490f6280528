//! Dense state-vector reference for small registers.
//!
//! Everything here works on explicit `2^L` amplitude vectors and density
//! matrices, so it is independent of the GF(2) machinery it is used to check.
//! Qubit `k` is bit `k` of the basis index.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entanglement::{Region, Scratch};
use crate::error::{Error, Result};
use crate::protocols::{step, CircuitTarget, UnitaryKind};
use crate::tableau::{symplectic_group, MeasurementKind, StabilizerTableau, SymplecticGate, SP4_ORDER};

/// Largest register the oracle accepts.
pub const MAX_QUBITS: usize = 12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Pauli string on two qubits for the exponent vector `(x_i, x_j, z_i, z_j)`,
/// qubit `i` being the first tensor factor.
pub fn pauli2(v: u8) -> Matrix4<C64> {
    let single = |x: bool, z: bool| -> [[C64; 2]; 2] {
        // X^x Z^z
        let zm = if z { [[ONE, ZERO], [ZERO, -ONE]] } else { [[ONE, ZERO], [ZERO, ONE]] };
        if x {
            [zm[1], zm[0]]
        } else {
            zm
        }
    };
    let a = single(v & 1 != 0, v & 4 != 0);
    let b = single(v & 2 != 0, v & 8 != 0);
    Matrix4::from_fn(|r, c| a[r >> 1][c >> 1] * b[r & 1][c & 1])
}

fn gate_generators() -> Vec<(SymplecticGate, Matrix4<C64>)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h = [[C64::new(s, 0.0), C64::new(s, 0.0)], [C64::new(s, 0.0), C64::new(-s, 0.0)]];
    let ph = [[ONE, ZERO], [ZERO, C64::new(0.0, 1.0)]];
    let id = [[ONE, ZERO], [ZERO, ONE]];
    let kron = |a: [[C64; 2]; 2], b: [[C64; 2]; 2]| {
        Matrix4::from_fn(|r, c| a[r >> 1][c >> 1] * b[r & 1][c & 1])
    };
    let mut cnot = Matrix4::zeros();
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[(r, c)] = ONE;
    }
    let sym = |rows| SymplecticGate::from_rows(rows).expect("generator is symplectic");
    vec![
        (sym([0b0100, 0b0010, 0b0001, 0b1000]), kron(h, id)),
        (sym([0b0001, 0b1000, 0b0100, 0b0010]), kron(id, h)),
        (sym([0b0001, 0b0010, 0b0101, 0b1000]), kron(ph, id)),
        (sym([0b0001, 0b0010, 0b0100, 0b1010]), kron(id, ph)),
        (sym([0b0001, 0b0011, 0b1100, 0b1000]), cnot),
    ]
}

/// One concrete unitary per element of Sp(4, F2), found by breadth-first
/// search over products of H, S and CNOT.
fn unitary_table() -> &'static [Matrix4<C64>] {
    static TABLE: OnceLock<Vec<Matrix4<C64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let gens = gate_generators();
        let mut table: Vec<Option<Matrix4<C64>>> = vec![None; SP4_ORDER];
        let id = SymplecticGate::IDENTITY;
        table[id.index()] = Some(Matrix4::identity());
        let mut frontier = vec![(id, Matrix4::<C64>::identity())];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (s, u) in &frontier {
                for (gs, gu) in &gens {
                    let s2 = gs.compose(s);
                    let idx = s2.index();
                    if table[idx].is_none() {
                        let u2 = gu * u;
                        table[idx] = Some(u2);
                        next.push((s2, u2));
                    }
                }
            }
            frontier = next;
        }
        table.into_iter().map(|u| u.expect("generators span Sp(4,F2)")).collect()
    })
}

/// A 4x4 unitary whose conjugation action on Pauli strings matches `g` up to sign.
pub fn gate_unitary(g: &SymplecticGate) -> Matrix4<C64> {
    unitary_table()[g.index()]
}

/// Checks that `u P(v) u^† = ± P(g v)` (or `±i`) for all 15 non-identity Paulis.
pub fn conjugation_matches(g: &SymplecticGate, u: &Matrix4<C64>) -> bool {
    (1u8..16).all(|v| {
        let lhs = u * pauli2(v) * u.adjoint();
        let target = pauli2(g.act(v));
        let c = (target.adjoint() * lhs).trace() / 4.0;
        (c.norm() - 1.0).abs() < 1e-9 && (lhs - target * c).norm() < 1e-9
    })
}

/// Verifies the whole lookup table.
pub fn verify_unitary_table() -> Result<()> {
    for g in symplectic_group() {
        let u = gate_unitary(g);
        if (u * u.adjoint() - Matrix4::identity()).norm() > 1e-9 {
            return Err(Error::Oracle(format!("non-unitary entry for {g:?}")));
        }
        if !conjugation_matches(g, &u) {
            return Err(Error::Oracle(format!("conjugation mismatch for {g:?}")));
        }
    }
    Ok(())
}

/// Explicit pure state on `n <= 12` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<C64>,
}

impl DenseState {
    /// `|0...0>`.
    pub fn zero_state(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Oracle(format!("dense register of {n} qubits")));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n || n == 0 || n > MAX_QUBITS {
            return Err(Error::Oracle(format!("{} amplitudes", amps.len())));
        }
        let s = Self { n, amps };
        if (s.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::Oracle("state is not normalized".into()));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies `u` with qubit `i` as the first tensor factor.
    pub fn apply_two_qubit(&mut self, u: &Matrix4<C64>, i: usize, j: usize) {
        assert!(i != j && i < self.n && j < self.n);
        let (bi, bj) = (1usize << i, 1usize << j);
        for base in 0..self.amps.len() {
            if base & (bi | bj) != 0 {
                continue;
            }
            let idx = [base, base | bj, base | bi, base | bi | bj];
            let old = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|c| u[(r, c)] * old[c]).sum();
            }
        }
    }

    /// Probability of `Z_site = +1` (`plus`) or `-1`.
    pub fn outcome_probability(&self, site: usize, plus: bool) -> f64 {
        let bit = 1usize << site;
        self.amps
            .iter()
            .enumerate()
            .filter(|(k, _)| (k & bit == 0) == plus)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projects with `(1 ± Z_site)/2` and renormalizes. Errors on a
    /// zero-probability branch.
    pub fn measure_z(&self, site: usize, plus: bool) -> Result<(DenseState, f64)> {
        if site >= self.n {
            return Err(Error::SiteOutOfRange { site, n: self.n });
        }
        let prob = self.outcome_probability(site, plus);
        if prob < 1e-12 {
            return Err(Error::Oracle(format!("branch with probability {prob}")));
        }
        let bit = 1usize << site;
        let scale = 1.0 / prob.sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| if (k & bit == 0) == plus { a * scale } else { ZERO })
            .collect();
        Ok((DenseState { n: self.n, amps }, prob))
    }

    /// Reduced density matrix on `sites`, in the given order (first site is
    /// the most significant index bit).
    pub fn reduced_density(&self, sites: &[usize]) -> DMatrix<C64> {
        let psi = self.bipartite_amplitudes(sites);
        &psi * psi.adjoint()
    }

    /// Amplitudes as a matrix with `sites` indexing rows and the remaining
    /// qubits indexing columns.
    pub fn bipartite_amplitudes(&self, sites: &[usize]) -> DMatrix<C64> {
        let k = sites.len();
        let rest: Vec<usize> = (0..self.n).filter(|s| !sites.contains(s)).collect();
        let mut psi = DMatrix::<C64>::zeros(1 << k, 1 << rest.len());
        for (idx, &a) in self.amps.iter().enumerate() {
            let row = sites.iter().fold(0, |acc, &s| (acc << 1) | ((idx >> s) & 1));
            let col = rest.iter().fold(0, |acc, &s| (acc << 1) | ((idx >> s) & 1));
            psi[(row, col)] = a;
        }
        psi
    }
}

/// `-tr(ρ_A log2 ρ_A)` from the Schmidt coefficients across `A`. The
/// complex Hermitian eigensolver returns non-finite values on some exactly
/// rank-one inputs, so this goes through the SVD instead.
pub fn dense_entropy(s: &DenseState, a: &Region) -> f64 {
    if a.is_empty() || a.len() == s.n {
        return 0.0;
    }
    s.bipartite_amplitudes(a.sites())
        .singular_values()
        .iter()
        .map(|&sv| sv * sv)
        .filter(|&l| l > 1e-14)
        .map(|l| -l * l.log2())
        .sum()
}

/// `log2 || ρ_AB^{Γ_A} ||_1`, tracing out the complement of `a ∪ b`.
pub fn dense_negativity(s: &DenseState, a: &Region, b: &Region) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let sites: Vec<usize> = a.sites().iter().chain(b.sites()).copied().collect();
    let rho = s.reduced_density(&sites);
    let db = 1usize << nb;
    let pt = DMatrix::from_fn(1 << (na + nb), 1 << (na + nb), |r, c| {
        let (ra, rb) = (r / db, r % db);
        let (ca, cb) = (c / db, c % db);
        rho[(ca * db + rb, ra * db + cb)]
    });
    pt.singular_values().sum().log2()
}

pub fn dense_mutual_information(s: &DenseState, a: &Region, c: &Region) -> f64 {
    dense_entropy(s, a) + dense_entropy(s, c) - dense_entropy(s, &a.union(c))
}

pub fn dense_tmi(s: &DenseState, a: &Region, b: &Region, c: &Region) -> f64 {
    let e = |r: &Region| dense_entropy(s, r);
    e(a) + e(b) + e(c) - e(&a.union(b)) - e(&a.union(c)) - e(&b.union(c)) + e(&a.union(b).union(c))
}

impl CircuitTarget for DenseState {
    fn n_qubits(&self) -> usize {
        self.n
    }

    fn apply_gate(&mut self, gate: &SymplecticGate, i: usize, j: usize) {
        self.apply_two_qubit(&gate_unitary(gate), i, j);
    }

    /// Keeps the `+` branch whenever it is possible.
    fn measure(&mut self, site: usize) -> MeasurementKind {
        let p_plus = self.outcome_probability(site, true);
        let plus = p_plus > 1e-9;
        let (next, _) = self.measure_z(site, plus).expect("branch with nonzero probability");
        *self = next;
        if p_plus > 1e-9 && p_plus < 1.0 - 1e-9 {
            MeasurementKind::Random
        } else {
            MeasurementKind::Deterministic
        }
    }

    fn check(&self) -> Result<()> {
        if (self.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::Oracle(format!("norm drifted to {}", self.norm_sqr())));
        }
        Ok(())
    }
}

/// Tolerance for integer agreement of dense quantities.
pub const DENSE_TOL: f64 = 1e-8;

fn agree(name: &str, exact: i64, dense: f64) -> Result<()> {
    // written so that NaN fails
    if !((exact as f64 - dense).abs() <= DENSE_TOL) {
        return Err(Error::Oracle(format!("{name}: tableau {exact}, dense {dense}")));
    }
    Ok(())
}

/// Splits `n` sites into four consecutive blocks as evenly as possible.
pub fn blocks(n: usize) -> [Region; 4] {
    let base = n / 4;
    let extra = n % 4;
    let mut start = 0;
    std::array::from_fn(|k| {
        let len = base + usize::from(k < extra);
        let r = Region::contiguous(start, len, n).expect("block fits");
        start += len;
        r
    })
}

/// Compares entropy of `B ∪ C`, `I_2(A:C)`, `I_3(A:B:C)` and `E(A:C)` on
/// [`blocks`]. Returns the number of comparisons made.
pub fn compare_observables(t: &StabilizerTableau, d: &DenseState, scratch: &mut Scratch) -> Result<usize> {
    let [a, b, c, _] = blocks(t.n_qubits());
    let bc = b.union(&c);
    agree("S(BC)", scratch.entropy(t, &bc)? as i64, dense_entropy(d, &bc))?;
    agree("I2(A:C)", scratch.mutual_information(t, &a, &c)? as i64, dense_mutual_information(d, &a, &c))?;
    agree("I3(A:B:C)", scratch.tmi_regions(t, &a, &b, &c)?, dense_tmi(d, &a, &b, &c))?;
    agree("E(A:C)", scratch.negativity(t, &a, &c)? as i64, dense_negativity(d, &a, &c))?;
    Ok(4)
}

/// Compares the entropy of every subset of sites and the negativity of
/// `pairs` random disjoint region pairs.
pub fn compare_exhaustive<R: Rng + ?Sized>(
    t: &StabilizerTableau,
    d: &DenseState,
    scratch: &mut Scratch,
    pairs: usize,
    rng: &mut R,
) -> Result<usize> {
    let n = t.n_qubits();
    let mut count = 0;
    for mask in 0usize..1 << n {
        let r = Region::new((0..n).filter(|k| mask >> k & 1 == 1).collect())?;
        agree(&format!("S{:?}", r.sites()), scratch.entropy(t, &r)? as i64, dense_entropy(d, &r))?;
        count += 1;
    }
    for _ in 0..pairs {
        // label each site: 0 = A, 1 = B, 2 = traced
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let pick = |l| Region::new((0..n).filter(|&k| labels[k] == l).collect());
        let (a, b) = (pick(0)?, pick(1)?);
        let e = scratch.negativity(t, &a, &b)? as i64;
        agree(&format!("E({:?}:{:?})", a.sites(), b.sites()), e, dense_negativity(d, &a, &b))?;
        count += 1;
    }
    Ok(count)
}

/// Unitary layer kinds used for random replays at small sizes.
pub fn replay_kinds(n: usize) -> Vec<UnitaryKind> {
    use crate::protocols::Distance;
    let mut kinds = vec![UnitaryKind::Chrc { m: 2 }];
    if n.is_multiple_of(4) {
        kinds.push(UnitaryKind::Chrc { m: 4 });
    }
    kinds.push(UnitaryKind::Lrhrc { alpha: 1.5, distance: Distance::Linear });
    kinds
}

/// Replays one random hybrid circuit on both a tableau and a dense state
/// from identical random tapes, comparing observables after every step and
/// every subsystem entropy at the end.
pub fn replay(kind: &UnitaryKind, n: usize, p: f64, steps: usize, seed: u64) -> Result<usize> {
    let mut t = StabilizerTableau::new_z_product_state(n)?;
    let mut d = DenseState::zero_state(n)?;
    let mut tape_t = ChaCha8Rng::seed_from_u64(seed);
    let mut tape_d = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = Scratch::new();
    let mut count = 0;
    for _ in 0..steps {
        step(&mut t, kind, n, p, &mut tape_t)?;
        step(&mut d, kind, n, p, &mut tape_d)?;
        count += compare_observables(&t, &d, &mut scratch)?;
    }
    let mut extra = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    count += compare_exhaustive(&t, &d, &mut scratch, 8, &mut extra)?;
    Ok(count)
}

/// Outcome of [`equivalence_suite`].
#[derive(Clone, Debug, Default)]
pub struct EquivalenceReport {
    pub circuits: usize,
    pub comparisons: usize,
    pub failures: Vec<String>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.circuits > 0
    }
}

/// Runs `circuits` random replays for every size and replay kind, with
/// `p` drawn uniformly from `[0, 0.5)` and `T = 4L`.
pub fn equivalence_suite(sizes: &[usize], circuits: usize, seed: u64) -> EquivalenceReport {
    let mut report = EquivalenceReport::default();
    let mut params = ChaCha8Rng::seed_from_u64(seed);
    for &n in sizes {
        for kind in replay_kinds(n) {
            for c in 0..circuits {
                let p = params.random_range(0.0..0.5);
                let circuit_seed: u64 = params.random();
                match replay(&kind, n, p, 4 * n, circuit_seed) {
                    Ok(k) => report.comparisons += k,
                    Err(e) => report.failures.push(format!(
                        "L={n} {kind:?} circuit {c} (p={p:.3}, seed={circuit_seed}): {e}"
                    )),
                }
                report.circuits += 1;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::entropy;
    use crate::tableau::sample_two_qubit_clifford;

    fn region(s: &[usize]) -> Region {
        Region::new(s.to_vec()).unwrap()
    }

    #[test]
    fn every_group_element_has_a_matching_unitary() {
        verify_unitary_table().unwrap();
    }

    #[test]
    fn identity_and_hadamard_entries() {
        let u = gate_unitary(&SymplecticGate::IDENTITY);
        let phase = u[(0, 0)];
        assert!((u - Matrix4::identity() * phase).norm() < 1e-12);

        // x/z swap on the first qubit acts as H ⊗ I up to phase
        let g = SymplecticGate::from_rows([0b0100, 0b0010, 0b0001, 0b1000]).unwrap();
        let u = gate_unitary(&g);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = Matrix4::from_fn(|r, c| {
            let hv = if (r >> 1) & (c >> 1) == 1 { -s } else { s };
            if r & 1 == c & 1 { C64::new(hv, 0.0) } else { ZERO }
        });
        let c = (h.adjoint() * u).trace() / 4.0;
        assert!((c.norm() - 1.0).abs() < 1e-12);
        assert!((u - h * c).norm() < 1e-12);
    }

    #[test]
    fn dense_measurement_branches() {
        let zero = DenseState::zero_state(1).unwrap();
        let (after, p) = zero.measure_z(0, true).unwrap();
        assert_eq!(after, zero);
        assert!((p - 1.0).abs() < 1e-15);
        assert!(zero.measure_z(0, false).is_err());

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DenseState::from_amplitudes(vec![C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        for branch in [true, false] {
            let (post, p) = plus.measure_z(0, branch).unwrap();
            assert!((p - 0.5).abs() < 1e-12);
            assert_eq!(dense_entropy(&post, &region(&[0])), 0.0);
        }
    }

    #[test]
    fn branch_probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let amps: Vec<C64> = (0..32).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s = DenseState::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap();
        for site in 0..5 {
            let total = s.outcome_probability(site, true) + s.outcome_probability(site, false);
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bell_pair_dense_values() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DenseState::from_amplitudes(vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)]).unwrap();
        assert!((dense_entropy(&bell, &region(&[0])) - 1.0).abs() < 1e-12);
        assert!((dense_negativity(&bell, &region(&[0]), &region(&[1])) - 1.0).abs() < 1e-12);
        let zero = DenseState::zero_state(3).unwrap();
        assert!(dense_entropy(&zero, &region(&[1])).abs() < 1e-12);
        assert!(dense_negativity(&zero, &region(&[0]), &region(&[2])).abs() < 1e-12);
    }

    #[test]
    fn ghz_endpoint_negativity_is_zero_densely() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![ZERO; 8];
        amps[0] = C64::new(s, 0.0);
        amps[7] = C64::new(s, 0.0);
        let ghz = DenseState::from_amplitudes(amps).unwrap();
        assert!(dense_negativity(&ghz, &region(&[0]), &region(&[2])).abs() < 1e-10);
        let t = StabilizerTableau::from_text("111|000\n000|110\n000|011\n").unwrap();
        assert_eq!(crate::entanglement::negativity(&t, &region(&[0]), &region(&[2])).unwrap(), 0);
    }

    #[test]
    fn gate_sequences_match_dense_at_every_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 4;
        let mut t = StabilizerTableau::new_z_product_state(n).unwrap();
        let mut d = DenseState::zero_state(n).unwrap();
        for _ in 0..500 {
            let g = sample_two_qubit_clifford(&mut rng);
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            t.apply_two_qubit(&g, i, j).unwrap();
            d.apply_gate(&g, i, j);
            for mask in 1..(1usize << n) - 1 {
                let r = Region::new((0..n).filter(|k| mask >> k & 1 == 1).collect()).unwrap();
                let exact = entropy(&t, &r).unwrap() as f64;
                assert!((exact - dense_entropy(&d, &r)).abs() < DENSE_TOL);
            }
        }
    }

    #[test]
    fn measurement_entropy_drop_matches_both_dense_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 6;
        for trial in 0..30 {
            let mut t = StabilizerTableau::new_z_product_state(n).unwrap();
            let mut d = DenseState::zero_state(n).unwrap();
            for _ in 0..30 {
                let g = sample_two_qubit_clifford(&mut rng);
                let i = rng.random_range(0..n);
                let j = (i + rng.random_range(1..n)) % n;
                t.apply_two_qubit(&g, i, j).unwrap();
                d.apply_gate(&g, i, j);
            }
            let site = rng.random_range(0..n);
            t.measure_z(site).unwrap();
            let branches: Vec<DenseState> = [true, false]
                .into_iter()
                .filter_map(|b| d.measure_z(site, b).ok().map(|(s, _)| s))
                .collect();
            assert!(!branches.is_empty());
            for mask in 1..(1usize << n) - 1 {
                let r = Region::new((0..n).filter(|k| mask >> k & 1 == 1).collect()).unwrap();
                let exact = entropy(&t, &r).unwrap() as f64;
                for b in &branches {
                    assert!((exact - dense_entropy(b, &r)).abs() < DENSE_TOL, "trial {trial}");
                }
            }
        }
    }

    #[test]
    fn small_equivalence_suite_passes() {
        let report = equivalence_suite(&[4, 6], 10, 99);
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.circuits, 2 * 10 + 3 * 10);
    }
}
