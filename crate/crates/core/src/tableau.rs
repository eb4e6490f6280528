//! Phase-free stabilizer tableaux and their Clifford/measurement updates.
//!
//! A pure state of `n` qubits is described by `n` independent, commuting
//! Pauli strings. Signs are not stored: entropies and negativities do not
//! depend on them, and measurement outcomes are never read out.
//!
//! Storage is component-major: row `k < n` holds the X-exponent of site `k`
//! across all generators, row `n + k` the Z-exponent. A two-qubit gate then
//! mixes four packed rows word by word, and the generators anticommuting
//! with `Z_k` are simply the set bits of row `k`.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

/// Number of elements of Sp(4, F2).
pub const SP4_ORDER: usize = 720;

/// A two-qubit Clifford modulo Paulis and phase: a 4x4 symplectic matrix over
/// GF(2) acting on the exponent vector `(x_i, x_j, z_i, z_j)`.
///
/// `rows[a]` is a bitmask over the input components feeding output `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymplecticGate {
    rows: [u8; 4],
}

const OMEGA: SymplecticGate = SymplecticGate { rows: [0b0100, 0b1000, 0b0001, 0b0010] };

impl SymplecticGate {
    pub const IDENTITY: SymplecticGate = SymplecticGate { rows: [0b0001, 0b0010, 0b0100, 0b1000] };

    /// Builds a gate from bitmask rows, rejecting non-symplectic matrices.
    pub fn from_rows(rows: [u8; 4]) -> Result<Self> {
        let g = SymplecticGate { rows: rows.map(|r| r & 0xF) };
        if g.is_symplectic() {
            Ok(g)
        } else {
            Err(Error::InvalidTableau(format!("matrix {rows:?} is not symplectic")))
        }
    }

    pub fn rows(&self) -> [u8; 4] {
        self.rows
    }

    #[inline]
    pub fn entry(&self, a: usize, b: usize) -> bool {
        (self.rows[a] >> b) & 1 == 1
    }

    pub fn to_bitmatrix(&self) -> BitMatrix {
        BitMatrix::from_fn(4, 4, |a, b| self.entry(a, b))
    }

    pub fn from_bitmatrix(m: &BitMatrix) -> Result<Self> {
        if m.n_rows() != 4 || m.n_cols() != 4 {
            return Err(Error::LengthMismatch { left: m.n_rows() * m.n_cols(), right: 16 });
        }
        let mut rows = [0u8; 4];
        for (a, row) in rows.iter_mut().enumerate() {
            for b in 0..4 {
                if m.get(a, b) {
                    *row |= 1 << b;
                }
            }
        }
        Self::from_rows(rows)
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn compose(&self, other: &SymplecticGate) -> SymplecticGate {
        let mut rows = [0u8; 4];
        for (a, out) in rows.iter_mut().enumerate() {
            for b in 0..4 {
                if self.entry(a, b) {
                    *out ^= other.rows[b];
                }
            }
        }
        SymplecticGate { rows }
    }

    pub fn transpose(&self) -> SymplecticGate {
        let mut rows = [0u8; 4];
        for (a, out) in rows.iter_mut().enumerate() {
            for b in 0..4 {
                if self.entry(b, a) {
                    *out |= 1 << b;
                }
            }
        }
        SymplecticGate { rows }
    }

    pub fn is_symplectic(&self) -> bool {
        self.transpose().compose(&OMEGA).compose(self) == OMEGA
    }

    /// Group inverse, `Ω sᵀ Ω`.
    pub fn inverse(&self) -> SymplecticGate {
        OMEGA.compose(&self.transpose()).compose(&OMEGA)
    }

    /// Image of a 4-bit exponent vector (bit `b` = component `b`).
    #[inline]
    pub fn act(&self, v: u8) -> u8 {
        let mut out = 0;
        for a in 0..4 {
            out |= (((self.rows[a] & v).count_ones() & 1) as u8) << a;
        }
        out
    }

    /// Position of this gate in [`symplectic_group`].
    pub fn index(&self) -> usize {
        symplectic_group().binary_search(self).expect("gate is a group element")
    }
}

/// All 720 elements of Sp(4, F2), sorted.
pub fn symplectic_group() -> &'static [SymplecticGate] {
    static GROUP: OnceLock<Vec<SymplecticGate>> = OnceLock::new();
    GROUP.get_or_init(|| {
        let all: Vec<SymplecticGate> = (0u32..1 << 16)
            .map(|code| SymplecticGate {
                rows: [0, 1, 2, 3].map(|a| ((code >> (4 * a)) & 0xF) as u8),
            })
            .filter(SymplecticGate::is_symplectic)
            .collect();
        let mut all = all;
        all.sort();
        assert_eq!(all.len(), SP4_ORDER);
        all
    })
}

/// Uniformly random two-qubit Clifford (modulo Paulis and phase).
pub fn sample_two_qubit_clifford<R: Rng + ?Sized>(rng: &mut R) -> SymplecticGate {
    symplectic_group()[rng.random_range(0..SP4_ORDER)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasurementKind {
    /// `Z_site` already stabilizes the state (up to sign).
    Deterministic,
    /// Outcome was a fair coin; the state was projected.
    Random,
}

/// Stabilizer generators of a pure state, without signs.
#[derive(Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    comps: BitMatrix,
}

impl StabilizerTableau {
    /// `|0...0>`, stabilized by `Z_0, ..., Z_{n-1}`.
    pub fn new_z_product_state(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyRegister);
        }
        let mut comps = BitMatrix::zeros(2 * n, n);
        for k in 0..n {
            comps.set(n + k, k, true);
        }
        Ok(Self { n, comps })
    }

    /// Builds a tableau from an `n x 2n` generator matrix, row `j` being
    /// `(x-part | z-part)` of generator `j`. Validated.
    pub fn from_generators(gens: &BitMatrix) -> Result<Self> {
        let n = gens.n_rows();
        if n == 0 {
            return Err(Error::EmptyRegister);
        }
        if gens.n_cols() != 2 * n {
            return Err(Error::LengthMismatch { left: gens.n_cols(), right: 2 * n });
        }
        let t = Self { n, comps: gens.transpose() };
        t.validate()?;
        Ok(t)
    }

    /// Parses the text dump produced by [`StabilizerTableau::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (x, z) = line
                .split_once('|')
                .ok_or_else(|| Error::InvalidTableau(format!("missing '|' in {line:?}")))?;
            let mut row = Vec::with_capacity(x.len() + z.len());
            for ch in x.chars().chain(z.chars()) {
                match ch {
                    '0' => row.push(0u8),
                    '1' => row.push(1u8),
                    _ => return Err(Error::InvalidTableau(format!("bad character {ch:?}"))),
                }
            }
            if x.len() != z.len() {
                return Err(Error::InvalidTableau(format!("unbalanced row {line:?}")));
            }
            rows.push(row);
        }
        if rows.iter().any(|r| r.len() != 2 * rows.len()) {
            return Err(Error::InvalidTableau("generator length must be 2n".into()));
        }
        Self::from_generators(&BitMatrix::from_rows(&rows))
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// X-exponents of `site` across generators (bit `j` = generator `j`).
    #[inline]
    pub fn x_component(&self, site: usize) -> &[u64] {
        self.comps.row(site)
    }

    /// Z-exponents of `site` across generators.
    #[inline]
    pub fn z_component(&self, site: usize) -> &[u64] {
        self.comps.row(self.n + site)
    }

    /// The `n x 2n` generator matrix, one `(x | z)` row per generator.
    pub fn generators(&self) -> BitMatrix {
        self.comps.transpose()
    }

    /// One generator per line as `x-bits|z-bits`.
    pub fn to_text(&self) -> String {
        let g = self.generators();
        let mut out = String::with_capacity(self.n * (2 * self.n + 2));
        for j in 0..self.n {
            for c in 0..2 * self.n {
                if c == self.n {
                    out.push('|');
                }
                out.push(if g.get(j, c) { '1' } else { '0' });
            }
            let _ = writeln!(out);
        }
        out
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n {
            Err(Error::SiteOutOfRange { site, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Conjugates every generator by the Clifford `g` on sites `(i, j)`.
    pub fn apply_two_qubit(&mut self, g: &SymplecticGate, i: usize, j: usize) -> Result<()> {
        self.check_site(i)?;
        self.check_site(j)?;
        if i == j {
            return Err(Error::SameSite(i));
        }
        self.apply_unchecked(g, i, j);
        Ok(())
    }

    #[inline]
    pub(crate) fn apply_unchecked(&mut self, g: &SymplecticGate, i: usize, j: usize) {
        let n = self.n;
        let s = self.comps.stride();
        let base = [i * s, j * s, (n + i) * s, (n + j) * s];
        let rows = g.rows;
        let data = self.comps.data_mut();
        for w in 0..s {
            let v = [data[base[0] + w], data[base[1] + w], data[base[2] + w], data[base[3] + w]];
            for a in 0..4 {
                let r = rows[a];
                let mut acc = 0u64;
                for (b, &vb) in v.iter().enumerate() {
                    if (r >> b) & 1 == 1 {
                        acc ^= vb;
                    }
                }
                data[base[a] + w] = acc;
            }
        }
    }

    /// Projective measurement of `Z_site`.
    ///
    /// If some generators anticommute with `Z_site`, the first one (in
    /// generator order) is multiplied into the others and then replaced by
    /// `Z_site`.
    pub fn measure_z(&mut self, site: usize) -> Result<MeasurementKind> {
        self.check_site(site)?;
        Ok(self.measure_unchecked(site))
    }

    pub(crate) fn measure_unchecked(&mut self, site: usize) -> MeasurementKind {
        let n = self.n;
        let s = self.comps.stride();
        let xs = site * s;
        let Some(kw) = (0..s).find(|&w| self.comps.data()[xs + w] != 0) else {
            return MeasurementKind::Deterministic;
        };
        let data = self.comps.data_mut();
        let kbit = 1u64 << data[xs + kw].trailing_zeros();
        // drop the pivot from the anticommuting set
        data[xs + kw] ^= kbit;
        for c in 0..2 * n {
            if c != site && data[c * s + kw] & kbit != 0 {
                for w in 0..s {
                    data[c * s + w] ^= data[xs + w];
                }
            }
        }
        for w in 0..s {
            data[xs + w] = 0;
        }
        for c in 0..2 * n {
            data[c * s + kw] &= !kbit;
        }
        data[(n + site) * s + kw] |= kbit;
        MeasurementKind::Random
    }

    /// Checks commutation, independence and non-triviality of the generators.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let s = self.comps.stride();
        let mut support = vec![0u64; s];
        for c in 0..2 * n {
            for (acc, w) in support.iter_mut().zip(self.comps.row(c)) {
                *acc |= w;
            }
        }
        for j in 0..n {
            if (support[j / 64] >> (j % 64)) & 1 == 0 {
                return Err(Error::InvalidTableau(format!("generator {j} is the identity")));
            }
        }

        // commutation matrix sum_k x_k z_k^T + z_k x_k^T
        let mut comm = BitMatrix::zeros(n, n);
        for k in 0..n {
            let (x, z) = (self.x_component(k), self.z_component(k));
            for (src, dst) in [(x, z), (z, x)] {
                for (wi, &word) in src.iter().enumerate() {
                    let mut bits = word;
                    while bits != 0 {
                        let j = wi * 64 + bits.trailing_zeros() as usize;
                        for (d, a) in comm.row_mut(j).iter_mut().zip(dst) {
                            *d ^= a;
                        }
                        bits &= bits - 1;
                    }
                }
            }
        }
        if let Some(j) = (0..n).find(|&j| !comm.row_is_zero(j)) {
            return Err(Error::InvalidTableau(format!("generator {j} anticommutes with another")));
        }

        let rank = self.comps.rank();
        if rank != n {
            return Err(Error::InvalidTableau(format!("rank {rank} < {n}")));
        }
        Ok(())
    }
}

impl std::fmt::Debug for StabilizerTableau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "StabilizerTableau(n = {})", self.n)?;
        f.write_str(&self.to_text())
    }
}
