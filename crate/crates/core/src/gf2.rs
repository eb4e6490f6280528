//! Dense, bit-packed linear algebra over GF(2).
//!
//! Rows are stored as contiguous runs of `u64` words, least significant bit
//! first. Bits past `n_cols` in the last word of every row are kept at zero so
//! that whole-word operations (XOR, popcount, equality) never see garbage.

use std::fmt;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

#[inline]
fn tail_mask(bits: usize) -> u64 {
    match bits % WORD {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// A packed vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; words_for(len)] }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut v = Self::zeros(bits.len());
        for (k, b) in bits.into_iter().enumerate() {
            v.set(k, b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, k: usize) -> bool {
        assert!(k < self.len, "bit {k} out of range for length {}", self.len);
        (self.words[k / WORD] >> (k % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, k: usize, value: bool) {
        assert!(k < self.len, "bit {k} out of range for length {}", self.len);
        let mask = 1u64 << (k % WORD);
        if value {
            self.words[k / WORD] |= mask;
        } else {
            self.words[k / WORD] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Element-wise sum (XOR). Panics on length mismatch.
    pub fn xor(&self, other: &BitVector) -> BitVector {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        BitVector {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        }
    }

    /// Symplectic inner product of two Pauli strings in `(x | z)` layout.
    ///
    /// Returns `true` iff the represented Pauli strings anticommute.
    pub fn symplectic_product(&self, other: &BitVector) -> Result<bool> {
        if self.len != other.len {
            return Err(Error::LengthMismatch { left: self.len, right: other.len });
        }
        if !self.len.is_multiple_of(2) {
            return Err(Error::OddSymplecticLength(self.len));
        }
        let n = self.len / 2;
        let mut acc = false;
        for k in 0..n {
            acc ^= (self.get(k) & other.get(n + k)) ^ (self.get(n + k) & other.get(k));
        }
        Ok(acc)
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len).map(|k| if self.get(k) { '1' } else { '0' }).collect();
        write!(f, "BitVector({s})")
    }
}

/// A dense row-major matrix over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    n_rows: usize,
    n_cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        let stride = words_for(n_cols);
        Self { n_rows, n_cols, stride, data: vec![0; n_rows * stride] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.set(k, k, true);
        }
        m
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for r in 0..n_rows {
            for c in 0..n_cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from rows of 0/1 values. All rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), n_cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            assert_eq!(row.len(), n_cols, "ragged rows");
            for (c, &b) in row.iter().enumerate() {
                if b & 1 == 1 {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Reshape to `n_rows x n_cols` zeros, reusing the allocation.
    pub fn reset(&mut self, n_rows: usize, n_cols: usize) {
        self.n_rows = n_rows;
        self.n_cols = n_cols;
        self.stride = words_for(n_cols);
        self.data.clear();
        self.data.resize(n_rows * self.stride, 0);
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of `u64` words per row.
    #[inline]
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub(crate) fn data(&self) -> &[u64] {
        &self.data
    }

    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [u64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        (self.data[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        let mask = 1u64 << (c % WORD);
        let w = &mut self.data[r * self.stride + c / WORD];
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, r: usize, c: usize) {
        self.data[r * self.stride + c / WORD] ^= 1u64 << (c % WORD);
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    /// Copies a packed row in; the source must already respect the padding invariant.
    pub fn set_row_words(&mut self, r: usize, words: &[u64]) {
        assert_eq!(words.len(), self.stride);
        debug_assert_eq!(words.last().map_or(0, |w| w & !tail_mask(self.n_cols)), 0);
        self.row_mut(r).copy_from_slice(words);
    }

    pub fn row_vector(&self, r: usize) -> BitVector {
        BitVector { len: self.n_cols, words: self.row(r).to_vec() }
    }

    pub fn row_is_zero(&self, r: usize) -> bool {
        self.row(r).iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let s = self.stride;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (head, tail) = self.data.split_at_mut(hi * s);
        head[lo * s..(lo + 1) * s].swap_with_slice(&mut tail[..s]);
    }

    /// `row[dst] ^= row[src]`, touching words from `from_word` on.
    #[inline]
    fn xor_row_from(&mut self, src: usize, dst: usize, from_word: usize) {
        debug_assert_ne!(src, dst);
        let s = self.stride;
        if src < dst {
            let (head, tail) = self.data.split_at_mut(dst * s);
            let src_row = &head[src * s + from_word..(src + 1) * s];
            for (d, a) in tail[from_word..s].iter_mut().zip(src_row) {
                *d ^= a;
            }
        } else {
            let (head, tail) = self.data.split_at_mut(src * s);
            let dst_row = &mut head[dst * s + from_word..(dst + 1) * s];
            for (d, a) in dst_row.iter_mut().zip(&tail[from_word..s]) {
                *d ^= a;
            }
        }
    }

    /// `row[dst] ^= row[src]`.
    pub fn xor_rows(&mut self, src: usize, dst: usize) {
        self.xor_row_from(src, dst, 0);
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.n_cols, self.n_rows);
        for r in 0..self.n_rows {
            let row = self.row(r);
            for (wi, &w) in row.iter().enumerate() {
                let mut bits = w;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    t.set(wi * WORD + b, r, true);
                    bits &= bits - 1;
                }
            }
        }
        t
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::LengthMismatch { left: self.n_cols, right: other.n_rows });
        }
        let mut out = BitMatrix::zeros(self.n_rows, other.n_cols);
        for r in 0..self.n_rows {
            for k in 0..self.n_cols {
                if self.get(r, k) {
                    let s = out.stride;
                    for (d, a) in out.data[r * s..(r + 1) * s].iter_mut().zip(other.row(k)) {
                        *d ^= a;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Copy of columns `range` as a new matrix.
    pub fn select_columns(&self, range: std::ops::Range<usize>) -> BitMatrix {
        assert!(range.end <= self.n_cols);
        let width = range.end - range.start;
        let mut out = BitMatrix::zeros(self.n_rows, width);
        for r in 0..self.n_rows {
            for (k, c) in range.clone().enumerate() {
                if self.get(r, c) {
                    out.set(r, k, true);
                }
            }
        }
        out
    }

    /// Forward elimination that only pivots in the leading `n_pivot_cols`
    /// columns, carrying the remaining columns along.
    ///
    /// Returns the number of pivots found, `r`. Afterwards rows `r..` are zero
    /// on the leading columns and rows `..r` are in echelon form there.
    pub fn eliminate_leading_columns(&mut self, n_pivot_cols: usize) -> usize {
        assert!(n_pivot_cols <= self.n_cols);
        let mut rank = 0;
        for col in 0..n_pivot_cols {
            if rank == self.n_rows {
                break;
            }
            let w = col / WORD;
            let mask = 1u64 << (col % WORD);
            let Some(pivot) =
                (rank..self.n_rows).find(|&r| self.data[r * self.stride + w] & mask != 0)
            else {
                continue;
            };
            self.swap_rows(rank, pivot);
            for r in rank + 1..self.n_rows {
                if self.data[r * self.stride + w] & mask != 0 {
                    self.xor_row_from(rank, r, w);
                }
            }
            rank += 1;
        }
        rank
    }

    /// Rank over GF(2), destroying the contents of `self`.
    pub fn rank_in_place(&mut self) -> usize {
        self.eliminate_leading_columns(self.n_cols)
    }

    /// Rank over GF(2).
    pub fn rank(&self) -> usize {
        self.clone().rank_in_place()
    }

    /// Reduces `self` to reduced row-echelon form and returns the pivot columns.
    pub fn row_reduce_in_place(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..self.n_cols {
            if rank == self.n_rows {
                break;
            }
            let w = col / WORD;
            let mask = 1u64 << (col % WORD);
            let Some(pivot) =
                (rank..self.n_rows).find(|&r| self.data[r * self.stride + w] & mask != 0)
            else {
                continue;
            };
            self.swap_rows(rank, pivot);
            for r in 0..self.n_rows {
                if r != rank && self.data[r * self.stride + w] & mask != 0 {
                    self.xor_row_from(rank, r, w);
                }
            }
            pivots.push(col);
            rank += 1;
        }
        pivots
    }

    /// Reduced row-echelon form and pivot columns.
    pub fn row_reduce(&self) -> (BitMatrix, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.row_reduce_in_place();
        (m, pivots)
    }

    /// True if the padding invariant holds for every row.
    pub fn is_canonical(&self) -> bool {
        if self.stride == 0 {
            return true;
        }
        let mask = !tail_mask(self.n_cols);
        (0..self.n_rows).all(|r| self.data[r * self.stride + self.stride - 1] & mask == 0)
    }
}

impl Default for BitMatrix {
    fn default() -> Self {
        BitMatrix::zeros(0, 0)
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.n_rows, self.n_cols)?;
        for r in 0..self.n_rows {
            let s: String =
                (0..self.n_cols).map(|c| if self.get(r, c) { '1' } else { '0' }).collect();
            writeln!(f, "  {s}")?;
        }
        Ok(())
    }
}

/// Rank of `m` over GF(2).
pub fn rank_gf2(m: &BitMatrix) -> usize {
    m.rank()
}

/// Reduced row-echelon form of `m` with its pivot columns.
pub fn row_reduce(m: &BitMatrix) -> (BitMatrix, Vec<usize>) {
    m.row_reduce()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Unpacked reference elimination over integers mod 2.
    fn naive_rank(rows: &[Vec<u8>]) -> usize {
        let mut m: Vec<Vec<u8>> = rows.to_vec();
        let n_rows = m.len();
        let n_cols = m.first().map_or(0, |r| r.len());
        let mut rank = 0;
        for c in 0..n_cols {
            let Some(p) = (rank..n_rows).find(|&r| m[r][c] % 2 == 1) else { continue };
            m.swap(rank, p);
            for r in 0..n_rows {
                if r != rank && m[r][c] % 2 == 1 {
                    let pivot = m[rank].clone();
                    for (x, y) in m[r].iter_mut().zip(&pivot) {
                        *x = (*x + y) % 2;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    fn random_rows(rng: &mut impl Rng, r: usize, c: usize) -> Vec<Vec<u8>> {
        (0..r).map(|_| (0..c).map(|_| rng.random_range(0..2u8)).collect()).collect()
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        assert_eq!(rank_gf2(&BitMatrix::zeros(5, 8)), 0);
    }

    #[test]
    fn identity_has_full_rank() {
        assert_eq!(rank_gf2(&BitMatrix::identity(6)), 6);
    }

    #[test]
    fn rank_matches_naive_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let rows = random_rows(&mut rng, 12, 20);
            let m = BitMatrix::from_rows(&rows);
            assert_eq!(rank_gf2(&m), naive_rank(&rows));
        }
    }

    #[test]
    fn rank_matches_naive_across_word_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for &(r, c) in &[(70, 130), (130, 70), (64, 64), (1, 200), (65, 1)] {
            let rows = random_rows(&mut rng, r, c);
            assert_eq!(BitMatrix::from_rows(&rows).rank(), naive_rank(&rows));
        }
    }

    #[test]
    fn identity_row_reduces_to_itself() {
        let id = BitMatrix::identity(9);
        let (r, pivots) = row_reduce(&id);
        assert_eq!(r, id);
        assert_eq!(pivots, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn duplicate_rows_are_eliminated() {
        let rows = vec![
            vec![1, 0, 1, 1, 0],
            vec![0, 1, 1, 0, 1],
            vec![1, 0, 1, 1, 0],
            vec![1, 1, 0, 1, 1],
        ];
        // row 2 duplicates row 0, row 3 = row 0 + row 1
        let (r, pivots) = row_reduce(&BitMatrix::from_rows(&rows));
        assert_eq!(pivots.len(), 2);
        assert!(r.row_is_zero(2) && r.row_is_zero(3));
    }

    #[test]
    fn row_reduce_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = BitMatrix::from_rows(&random_rows(&mut rng, 10, 14));
            let (once, p1) = m.row_reduce();
            let (twice, p2) = once.row_reduce();
            assert_eq!(once, twice);
            assert_eq!(p1, p2);
            assert!(p1.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(p1.len(), m.rank());
            assert!((p1.len()..10).all(|r| once.row_is_zero(r)));
        }
    }

    #[test]
    fn transpose_round_trips_and_keeps_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = BitMatrix::from_rows(&random_rows(&mut rng, 67, 129));
        let t = m.transpose();
        assert!(t.is_canonical());
        assert_eq!(t.transpose(), m);
        assert_eq!(t.rank(), m.rank());
    }

    #[test]
    fn eliminate_leading_columns_zeroes_the_tail_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut m = BitMatrix::from_rows(&random_rows(&mut rng, 12, 16));
            let before = m.rank();
            let r = m.eliminate_leading_columns(5);
            assert_eq!(m.rank(), before);
            for row in r..12 {
                assert!((0..5).all(|c| !m.get(row, c)));
            }
        }
    }

    #[test]
    fn symplectic_product_examples() {
        let n = 5;
        let v = BitVector::from_bits((0..2 * n).map(|k| k == 3));
        let w = BitVector::from_bits((0..2 * n).map(|k| k == n + 3));
        assert!(v.symplectic_product(&w).unwrap());
        assert!(!v.symplectic_product(&v).unwrap());
        let short = BitVector::zeros(4);
        assert!(matches!(v.symplectic_product(&short), Err(Error::LengthMismatch { .. })));
    }

    /// Dense 2x2 Pauli products, used to check commutation from explicit matrices.
    mod dense {
        use num_complex::Complex64 as C;

        pub type M = Vec<Vec<C>>;

        fn kron(a: &M, b: &M) -> M {
            let (ra, rb) = (a.len(), b.len());
            let mut out = vec![vec![C::new(0.0, 0.0); ra * rb]; ra * rb];
            for i in 0..ra {
                for j in 0..ra {
                    for k in 0..rb {
                        for l in 0..rb {
                            out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                        }
                    }
                }
            }
            out
        }

        fn mul(a: &M, b: &M) -> M {
            let n = a.len();
            let mut out = vec![vec![C::new(0.0, 0.0); n]; n];
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        out[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            out
        }

        pub fn pauli(x: &[bool], z: &[bool]) -> M {
            let one = C::new(1.0, 0.0);
            let zero = C::new(0.0, 0.0);
            let mut acc: M = vec![vec![one]];
            for (&xi, &zi) in x.iter().zip(z) {
                let xm: M = if xi { vec![vec![zero, one], vec![one, zero]] } else { vec![vec![one, zero], vec![zero, one]] };
                let zm: M = if zi { vec![vec![one, zero], vec![zero, -one]] } else { vec![vec![one, zero], vec![zero, one]] };
                acc = kron(&acc, &mul(&xm, &zm));
            }
            acc
        }

        pub fn anticommute(a: &M, b: &M) -> bool {
            let ab = mul(a, b);
            let ba = mul(b, a);
            // either AB = BA or AB = -BA for Pauli strings
            let commute = ab.iter().flatten().zip(ba.iter().flatten()).all(|(p, q)| (p - q).norm() < 1e-12);
            !commute
        }
    }

    #[test]
    fn symplectic_product_matches_dense_pauli_commutators() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 4;
        for _ in 0..100 {
            let bits_a: Vec<bool> = (0..2 * n).map(|_| rng.random()).collect();
            let bits_b: Vec<bool> = (0..2 * n).map(|_| rng.random()).collect();
            let a = BitVector::from_bits(bits_a.iter().copied());
            let b = BitVector::from_bits(bits_b.iter().copied());
            let pa = dense::pauli(&bits_a[..n], &bits_a[n..]);
            let pb = dense::pauli(&bits_b[..n], &bits_b[n..]);
            assert_eq!(a.symplectic_product(&b).unwrap(), dense::anticommute(&pa, &pb));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix() -> impl Strategy<Value = Vec<Vec<u8>>> {
            (1usize..20, 1usize..80).prop_flat_map(|(r, c)| {
                proptest::collection::vec(proptest::collection::vec(0u8..2, c), r)
            })
        }

        proptest! {
            #[test]
            fn rank_is_transpose_invariant(rows in matrix()) {
                let m = BitMatrix::from_rows(&rows);
                prop_assert_eq!(m.rank(), m.transpose().rank());
            }

            #[test]
            fn rank_invariant_under_row_operations(rows in matrix(), a in 0usize..20, b in 0usize..20) {
                let mut m = BitMatrix::from_rows(&rows);
                let before = m.rank();
                let (a, b) = (a % m.n_rows(), b % m.n_rows());
                m.swap_rows(a, b);
                prop_assert_eq!(m.rank(), before);
                if a != b {
                    m.xor_rows(a, b);
                    prop_assert_eq!(m.rank(), before);
                }
                prop_assert!(m.is_canonical());
            }

            #[test]
            fn symplectic_product_is_symmetric_and_bilinear(
                v in proptest::collection::vec(any::<bool>(), 12),
                w in proptest::collection::vec(any::<bool>(), 12),
                u in proptest::collection::vec(any::<bool>(), 12),
            ) {
                let (v, w, u) = (BitVector::from_bits(v), BitVector::from_bits(w), BitVector::from_bits(u));
                prop_assert_eq!(v.symplectic_product(&w).unwrap(), w.symplectic_product(&v).unwrap());
                let lhs = v.symplectic_product(&w.xor(&u)).unwrap();
                let rhs = v.symplectic_product(&w).unwrap() ^ v.symplectic_product(&u).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
