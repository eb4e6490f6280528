//! Entanglement measures of stabilizer states, in bits.
//!
//! All quantities are exact integers computed from GF(2) ranks of pieces of
//! the generator matrix. The tableau is only borrowed; elimination happens in
//! scratch buffers.

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::tableau::StabilizerTableau;

/// A set of sites, kept sorted and free of duplicates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    sites: Vec<usize>,
}

impl Region {
    pub fn new(mut sites: Vec<usize>) -> Result<Self> {
        sites.sort_unstable();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidRegion(format!("site {} listed twice", w[0])));
        }
        Ok(Self { sites })
    }

    /// `len` consecutive sites starting at `start`, wrapping around a ring of `n`.
    pub fn contiguous(start: usize, len: usize, n: usize) -> Result<Self> {
        if len > n {
            return Err(Error::InvalidRegion(format!("{len} sites on a ring of {n}")));
        }
        Self::new((0..len).map(|k| (start + k) % n).collect())
    }

    pub fn empty() -> Self {
        Self { sites: Vec::new() }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    /// Sites of `0..n` not in `self`.
    pub fn complement(&self, n: usize) -> Region {
        Region { sites: (0..n).filter(|s| !self.contains(*s)).collect() }
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut sites = self.sites.clone();
        sites.extend_from_slice(&other.sites);
        sites.sort_unstable();
        sites.dedup();
        Region { sites }
    }

    fn check_range(&self, n: usize) -> Result<()> {
        match self.sites.last() {
            Some(&s) if s >= n => Err(Error::SiteOutOfRange { site: s, n }),
            _ => Ok(()),
        }
    }

    fn check_disjoint(&self, other: &Region) -> Result<()> {
        match self.sites.iter().find(|s| other.contains(**s)) {
            Some(&s) => Err(Error::OverlappingRegions(s)),
            None => Ok(()),
        }
    }
}

/// Four equal contiguous blocks `A, B, C, D` in ring order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quadripartition {
    pub a: Region,
    pub b: Region,
    pub c: Region,
    pub d: Region,
}

impl Quadripartition {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(4) {
            return Err(Error::NotDivisibleByFour(n));
        }
        let q = n / 4;
        Ok(Self {
            a: Region::contiguous(0, q, n)?,
            b: Region::contiguous(q, q, n)?,
            c: Region::contiguous(2 * q, q, n)?,
            d: Region::contiguous(3 * q, q, n)?,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.a.len() * 4
    }
}

/// Reusable buffers for repeated measurements on one trajectory.
#[derive(Default, Debug)]
pub struct Scratch {
    work: BitMatrix,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rank of the generator matrix restricted to `region`, minus `|region|`.
    pub fn entropy(&mut self, t: &StabilizerTableau, region: &Region) -> Result<usize> {
        region.check_range(t.n_qubits())?;
        self.work.reset(2 * region.len(), t.n_qubits());
        for (k, &s) in region.sites().iter().enumerate() {
            self.work.set_row_words(2 * k, t.x_component(s));
            self.work.set_row_words(2 * k + 1, t.z_component(s));
        }
        let rank = self.work.rank_in_place();
        debug_assert!(rank >= region.len());
        Ok(rank - region.len())
    }

    pub fn mutual_information(
        &mut self,
        t: &StabilizerTableau,
        a: &Region,
        c: &Region,
    ) -> Result<usize> {
        a.check_disjoint(c)?;
        let sa = self.entropy(t, a)?;
        let sc = self.entropy(t, c)?;
        let sac = self.entropy(t, &a.union(c))?;
        debug_assert!(sa + sc >= sac, "subadditivity violated");
        Ok(sa + sc - sac)
    }

    pub fn tmi(&mut self, t: &StabilizerTableau, q: &Quadripartition) -> Result<i64> {
        if q.n_sites() != t.n_qubits() {
            return Err(Error::InvalidRegion(format!(
                "quadripartition of {} sites on {} qubits",
                q.n_sites(),
                t.n_qubits()
            )));
        }
        self.tmi_regions(t, &q.a, &q.b, &q.c)
    }

    /// `I_3(A:B:C)` for arbitrary pairwise disjoint regions.
    pub fn tmi_regions(
        &mut self,
        t: &StabilizerTableau,
        a: &Region,
        b: &Region,
        c: &Region,
    ) -> Result<i64> {
        a.check_disjoint(b)?;
        a.check_disjoint(c)?;
        b.check_disjoint(c)?;
        let ab = a.union(b);
        let s = |scratch: &mut Self, r: &Region| scratch.entropy(t, r).map(|v| v as i64);
        Ok(s(self, a)? + s(self, b)? + s(self, c)?
            - s(self, &ab)?
            - s(self, &a.union(c))?
            - s(self, &b.union(c))?
            + s(self, &ab.union(c))?)
    }

    /// Logarithmic negativity between `a` and `b`, tracing out everything else.
    pub fn negativity(&mut self, t: &StabilizerTableau, a: &Region, b: &Region) -> Result<usize> {
        let rank = self.anticommutation_rank(t, a, b)?;
        debug_assert!(rank % 2 == 0, "alternating matrix with odd rank {rank}");
        Ok(rank / 2)
    }

    /// GF(2) rank of the matrix of pairwise anticommutation of the
    /// A-restrictions of the subgroup supported on `a ∪ b`. Always even.
    pub fn anticommutation_rank(
        &mut self,
        t: &StabilizerTableau,
        a: &Region,
        b: &Region,
    ) -> Result<usize> {
        let n = t.n_qubits();
        a.check_range(n)?;
        b.check_range(n)?;
        a.check_disjoint(b)?;
        let rest = a.union(b).complement(n);
        let (nc, na) = (rest.len(), a.len());

        // Components (rows) x generators, traced part first, then A's x and z.
        self.work.reset(2 * nc + 2 * na, n);
        for (k, &s) in rest.sites().iter().enumerate() {
            self.work.set_row_words(2 * k, t.x_component(s));
            self.work.set_row_words(2 * k + 1, t.z_component(s));
        }
        for (k, &s) in a.sites().iter().enumerate() {
            self.work.set_row_words(2 * nc + k, t.x_component(s));
            self.work.set_row_words(2 * nc + na + k, t.z_component(s));
        }
        let mut gens = self.work.transpose();

        // Rows left with no support on the traced part generate G_AB.
        let r = gens.eliminate_leading_columns(2 * nc);
        let m = n - r;
        if m == 0 || na == 0 {
            return Ok(0);
        }
        let (x0, z0) = (2 * nc, 2 * nc + na);
        let mut xa = BitMatrix::zeros(m, na);
        let mut za = BitMatrix::zeros(m, na);
        for i in 0..m {
            for k in 0..na {
                if gens.get(r + i, x0 + k) {
                    xa.set(i, k, true);
                }
                if gens.get(r + i, z0 + k) {
                    za.set(i, k, true);
                }
            }
        }
        let mut j = BitMatrix::zeros(m, m);
        for p in 0..m {
            for q in p + 1..m {
                let parity = xa
                    .row(p)
                    .iter()
                    .zip(za.row(q))
                    .zip(za.row(p).iter().zip(xa.row(q)))
                    .map(|((xp, zq), (zp, xq))| ((xp & zq) ^ (zp & xq)).count_ones())
                    .sum::<u32>()
                    & 1;
                if parity == 1 {
                    j.set(p, q, true);
                    j.set(q, p, true);
                }
            }
        }
        Ok(j.rank_in_place())
    }
}

/// Von Neumann entropy of `region`, in bits.
pub fn entropy(t: &StabilizerTableau, region: &Region) -> Result<usize> {
    Scratch::new().entropy(t, region)
}

/// `I_2(A:C) = S(A) + S(C) - S(AC)`.
pub fn mutual_information(t: &StabilizerTableau, a: &Region, c: &Region) -> Result<usize> {
    Scratch::new().mutual_information(t, a, c)
}

/// Tripartite mutual information `I_3(A:B:C)` of the quadripartition.
pub fn tmi(t: &StabilizerTableau, q: &Quadripartition) -> Result<i64> {
    Scratch::new().tmi(t, q)
}

/// Logarithmic negativity between `a` and `b`; the complement is traced out.
pub fn negativity(t: &StabilizerTableau, a: &Region, b: &Region) -> Result<usize> {
    Scratch::new().negativity(t, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(sites: &[usize]) -> Region {
        Region::new(sites.to_vec()).unwrap()
    }

    fn bell() -> StabilizerTableau {
        StabilizerTableau::from_text("11|00\n00|11\n").unwrap()
    }

    fn ghz3() -> StabilizerTableau {
        StabilizerTableau::from_text("111|000\n000|110\n000|011\n").unwrap()
    }

    #[test]
    fn region_validation() {
        assert!(Region::new(vec![1, 2, 1]).is_err());
        assert_eq!(Region::contiguous(6, 4, 8).unwrap().sites(), &[0, 1, 6, 7]);
        let t = StabilizerTableau::new_z_product_state(4).unwrap();
        assert!(matches!(entropy(&t, &region(&[4])), Err(Error::SiteOutOfRange { .. })));
    }

    #[test]
    fn quadripartition_layout() {
        let q = Quadripartition::new(8).unwrap();
        assert_eq!(q.a.sites(), &[0, 1]);
        assert_eq!(q.d.sites(), &[6, 7]);
        assert_eq!(Quadripartition::new(6), Err(Error::NotDivisibleByFour(6)));
    }

    #[test]
    fn product_state_measures_vanish() {
        let t = StabilizerTableau::new_z_product_state(8).unwrap();
        let q = Quadripartition::new(8).unwrap();
        for start in 0..8 {
            for len in 0..=8 {
                assert_eq!(entropy(&t, &Region::contiguous(start, len, 8).unwrap()).unwrap(), 0);
            }
        }
        assert_eq!(mutual_information(&t, &q.a, &q.c).unwrap(), 0);
        assert_eq!(tmi(&t, &q).unwrap(), 0);
        assert_eq!(negativity(&t, &q.a, &q.c).unwrap(), 0);
    }

    #[test]
    fn bell_pair_values() {
        let t = bell();
        assert_eq!(entropy(&t, &region(&[0])).unwrap(), 1);
        assert_eq!(entropy(&t, &region(&[0, 1])).unwrap(), 0);
        assert_eq!(mutual_information(&t, &region(&[0]), &region(&[1])).unwrap(), 2);
        assert_eq!(negativity(&t, &region(&[0]), &region(&[1])).unwrap(), 1);
    }

    #[test]
    fn ghz_endpoints_have_no_negativity() {
        let t = ghz3();
        assert_eq!(negativity(&t, &region(&[0]), &region(&[2])).unwrap(), 0);
        assert_eq!(mutual_information(&t, &region(&[0]), &region(&[2])).unwrap(), 1);
        assert_eq!(negativity(&t, &region(&[0]), &region(&[1, 2])).unwrap(), 1);
    }

    #[test]
    fn ghz4_tmi_is_seven_term_sum() {
        // one site per part: every proper subset has entropy 1, ABC too
        let t = StabilizerTableau::from_text("1111|0000\n0000|1100\n0000|0110\n0000|0011\n").unwrap();
        let q = Quadripartition::new(4).unwrap();
        assert_eq!(tmi(&t, &q).unwrap(), 1);
    }

    #[test]
    fn overlapping_regions_are_rejected() {
        let t = bell();
        assert_eq!(
            mutual_information(&t, &region(&[0, 1]), &region(&[1])),
            Err(Error::OverlappingRegions(1))
        );
        assert_eq!(negativity(&t, &region(&[0]), &region(&[0])), Err(Error::OverlappingRegions(0)));
    }

    #[test]
    fn tmi_rejects_mismatched_partition() {
        let t = StabilizerTableau::new_z_product_state(9).unwrap();
        assert!(tmi(&t, &Quadripartition::new(8).unwrap()).is_err());
    }
}
