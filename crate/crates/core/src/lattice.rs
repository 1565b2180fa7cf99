//! Open chains, regions, k-boundaries and the overlapping block splitting.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default cap on the total Hilbert space dimension of a lattice.
pub const DEFAULT_DIM_CAP: usize = 1 << 12;

/// A finite open chain of `n_sites` sites, each carrying a `local_dim`-level system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lattice {
    n_sites: usize,
    local_dim: usize,
}

/// Builds a chain with the default dimension cap.
pub fn make_chain(n_sites: usize, local_dim: usize) -> Result<Lattice> {
    Lattice::chain_with_cap(n_sites, local_dim, DEFAULT_DIM_CAP)
}

impl Lattice {
    pub fn chain_with_cap(n_sites: usize, local_dim: usize, cap: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be at least 1".into()));
        }
        if local_dim < 2 {
            return Err(Error::InvalidParameter("local_dim must be at least 2".into()));
        }
        let dim = checked_pow(local_dim, n_sites).unwrap_or(usize::MAX);
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        Ok(Self { n_sites, local_dim })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// Total Hilbert space dimension `local_dim^n_sites`.
    pub fn dim(&self) -> usize {
        self.local_dim.pow(self.n_sites as u32)
    }

    /// Dimension of the space carried by `region`.
    pub fn region_dim(&self, region: &Region) -> usize {
        self.local_dim.pow(region.len() as u32)
    }

    pub fn full_region(&self) -> Region {
        Region::range(0, self.n_sites)
    }

    pub fn contains(&self, region: &Region) -> bool {
        region.sites().last().is_none_or(|&s| s < self.n_sites)
    }

    pub fn check_region(&self, region: &Region) -> Result<()> {
        match region.sites().last() {
            Some(&s) if s >= self.n_sites => Err(Error::SiteOutOfRange {
                site: s,
                n_sites: self.n_sites,
            }),
            _ => Ok(()),
        }
    }

    /// `Λ \ region`.
    pub fn complement(&self, region: &Region) -> Region {
        self.full_region().difference(region)
    }

    /// The k-boundary `{x ∉ A : d(x, A) < k}`, truncated at the chain ends.
    pub fn boundary(&self, region: &Region, k: usize) -> Result<Region> {
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        self.check_region(region)?;
        let sites = (0..self.n_sites)
            .filter(|x| !region.contains(*x))
            .filter(|&x| region.sites().iter().any(|&a| x.abs_diff(a) < k))
            .collect();
        Ok(Region(sites))
    }

    /// `A ∪ ∂A`.
    pub fn closure(&self, region: &Region, k: usize) -> Result<Region> {
        Ok(region.union(&self.boundary(region, k)?))
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let exp = u32::try_from(exp).ok()?;
    base.checked_pow(exp)
}

/// A sorted, duplicate-free set of site indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Region(Vec<usize>);

impl Region {
    /// Normalizes arbitrary site lists by sorting and removing duplicates.
    pub fn new(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Self(sites)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Sites `start..end`.
    pub fn range(start: usize, end: usize) -> Self {
        Self((start..end).collect())
    }

    pub fn single(site: usize) -> Self {
        Self(alloc::vec![site])
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.0.binary_search(&site).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Position of `site` within this region.
    pub fn position(&self, site: usize) -> Option<usize> {
        self.0.binary_search(&site).ok()
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Region::new(v)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region(self.iter().filter(|&s| other.contains(s)).collect())
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region(self.iter().filter(|&s| !other.contains(s)).collect())
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.iter().all(|s| other.contains(s))
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.iter().all(|s| !other.contains(s))
    }

    /// Splits the region into maximal runs of consecutive sites.
    pub fn segments(&self) -> Vec<Region> {
        let mut out: Vec<Region> = Vec::new();
        for s in self.iter() {
            match out.last_mut() {
                Some(r) if r.0.last() == Some(&(s - 1)) => r.0.push(s),
                _ => out.push(Region::single(s)),
            }
        }
        out
    }

    /// Mirror image under `x ↦ n_sites - 1 - x`.
    pub fn reflect(&self, n_sites: usize) -> Region {
        Region::new(self.iter().map(|s| n_sites - 1 - s).collect())
    }
}

impl From<Vec<usize>> for Region {
    fn from(sites: Vec<usize>) -> Self {
        Region::new(sites)
    }
}

impl<const N: usize> From<[usize; N]> for Region {
    fn from(sites: [usize; N]) -> Self {
        Region::new(sites.to_vec())
    }
}

/// Distance between two regions; `overlap` flags regions that share a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Distance {
    pub value: usize,
    pub overlap: bool,
}

/// `min |x − y|` over `x ∈ c`, `y ∈ d`.
pub fn region_distance(c: &Region, d: &Region) -> Result<Distance> {
    if c.is_empty() || d.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let value = c
        .iter()
        .flat_map(|x| d.iter().map(move |y| x.abs_diff(y)))
        .min()
        .unwrap_or(0);
    Ok(Distance {
        value,
        overlap: value == 0,
    })
}

/// The cover `A_1, B_1, …, A_n, B_n` laid out left to right from site 0.
///
/// Every block has `2(k+l)−1` sites and consecutive blocks overlap in `l`
/// sites, so the chain has `n(4k+2l−2)+l` sites and `B_n` ends at the last site.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Splitting {
    pub k: usize,
    pub l: usize,
    pub n_blocks: usize,
    pub n_sites: usize,
    pub a_blocks: Vec<Region>,
    pub b_blocks: Vec<Region>,
}

/// Builds the standard splitting for `(k, l, n)`.
pub fn standard_splitting(k: usize, l: usize, n_blocks: usize) -> Result<Splitting> {
    if k == 0 || l == 0 || n_blocks == 0 {
        return Err(Error::InvalidParameter("k, l and n_blocks must be at least 1".into()));
    }
    let size = 2 * (k + l) - 1;
    let stride = size - l;
    let n_sites = n_blocks * (4 * k + 2 * l - 2) + l;
    let mut a_blocks = Vec::with_capacity(n_blocks);
    let mut b_blocks = Vec::with_capacity(n_blocks);
    for i in 0..n_blocks {
        let a_start = 2 * i * stride;
        let b_start = a_start + stride;
        a_blocks.push(Region::range(a_start, a_start + size));
        b_blocks.push(Region::range(b_start, b_start + size));
    }
    debug_assert_eq!(b_blocks.last().map(|b| b.sites()[size - 1] + 1), Some(n_sites));
    Ok(Splitting {
        k,
        l,
        n_blocks,
        n_sites,
        a_blocks,
        b_blocks,
    })
}

fn union_all(regions: &[Region]) -> Region {
    Region::new(regions.iter().flat_map(|r| r.iter()).collect())
}

impl Splitting {
    pub fn lattice(&self, local_dim: usize, cap: usize) -> Result<Lattice> {
        Lattice::chain_with_cap(self.n_sites, local_dim, cap)
    }

    pub fn full(&self) -> Region {
        Region::range(0, self.n_sites)
    }

    /// `A = ∪ A_i`.
    pub fn a(&self) -> Region {
        union_all(&self.a_blocks)
    }

    /// `B = ∪ B_i`.
    pub fn b(&self) -> Region {
        union_all(&self.b_blocks)
    }

    /// `C = B^c`.
    pub fn c(&self) -> Region {
        self.full().difference(&self.b())
    }

    /// `D = A^c`.
    pub fn d(&self) -> Region {
        self.full().difference(&self.a())
    }

    /// All blocks in left-to-right order.
    pub fn blocks(&self) -> Vec<Region> {
        self.a_blocks
            .iter()
            .zip(&self.b_blocks)
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect()
    }

    /// `C_i = A_i ∖ B`.
    pub fn c_segments(&self) -> Vec<Region> {
        let b = self.b();
        self.a_blocks.iter().map(|a| a.difference(&b)).collect()
    }

    /// `D_i = B_i ∖ A`.
    pub fn d_segments(&self) -> Vec<Region> {
        let a = self.a();
        self.b_blocks.iter().map(|b| b.difference(&a)).collect()
    }

    /// `E_i = A_i ∩ B_i`.
    pub fn e_segments(&self) -> Vec<Region> {
        self.a_blocks
            .iter()
            .zip(&self.b_blocks)
            .map(|(a, b)| a.intersection(b))
            .collect()
    }

    /// `F_i = B_i ∩ A_{i+1}`, one fewer than the number of blocks.
    pub fn f_segments(&self) -> Vec<Region> {
        self.b_blocks
            .iter()
            .zip(self.a_blocks.iter().skip(1))
            .map(|(b, a)| b.intersection(a))
            .collect()
    }

    /// `C_1, E_1, D_1, F_1, C_2, …, E_n, D_n`, which tile the chain.
    pub fn ordered_segments(&self) -> Vec<Region> {
        let (c, d, e, f) = (
            self.c_segments(),
            self.d_segments(),
            self.e_segments(),
            self.f_segments(),
        );
        let mut out = Vec::new();
        for i in 0..self.n_blocks {
            out.push(c[i].clone());
            out.push(e[i].clone());
            out.push(d[i].clone());
            if i + 1 < self.n_blocks {
                out.push(f[i].clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn chain_dimensions() {
        assert_eq!(make_chain(4, 2).unwrap().dim(), 16);
        assert_eq!(make_chain(1, 3).unwrap().dim(), 3);
        assert_eq!(make_chain(13, 2), Err(Error::DimensionCap { dim: 8192, cap: 4096 }));
        assert!(make_chain(0, 2).is_err());
        assert!(make_chain(3, 1).is_err());
        assert!(make_chain(200, 2).is_err());
    }

    #[test]
    fn boundaries() {
        let chain7 = make_chain(7, 2).unwrap();
        assert_eq!(chain7.boundary(&Region::single(3), 2).unwrap(), Region::from([2, 4]));
        assert_eq!(chain7.boundary(&Region::from([0, 1]), 2).unwrap(), Region::from([2]));
        let chain9 = make_chain(9, 2).unwrap();
        assert_eq!(
            chain9.boundary(&Region::single(4), 3).unwrap(),
            Region::from([2, 3, 5, 6])
        );
        assert_eq!(chain7.boundary(&Region::empty(), 2), Err(Error::EmptyRegion));
        assert!(chain7.boundary(&Region::single(9), 2).is_err());
        assert!(chain7.boundary(&Region::single(3), 1).unwrap().is_empty());
    }

    #[test]
    fn distances() {
        let d = |a: &[usize], b: &[usize]| region_distance(&Region::new(a.to_vec()), &Region::new(b.to_vec())).unwrap();
        assert_eq!(d(&[0, 1], &[4, 5]).value, 3);
        assert_eq!(d(&[0], &[1]).value, 1);
        assert_eq!(d(&[0, 7], &[3, 10]).value, 3);
        let overlap = d(&[0, 2], &[2, 5]);
        assert!(overlap.overlap);
        assert_eq!(overlap.value, 0);
    }

    #[test]
    fn splitting_examples() {
        let s = standard_splitting(2, 1, 1).unwrap();
        assert_eq!(s.n_sites, 9);
        assert_eq!(s.a_blocks, vec![Region::range(0, 5)]);
        assert_eq!(s.b_blocks, vec![Region::range(4, 9)]);
        assert_eq!(s.c(), Region::range(0, 4));
        assert_eq!(s.d(), Region::range(5, 9));

        let s = standard_splitting(2, 1, 2).unwrap();
        assert_eq!(s.n_sites, 17);
        assert!(s.blocks().iter().all(|b| b.len() == 5));
        assert_eq!(s.a_blocks[0].intersection(&s.b_blocks[0]).len(), 1);
        assert_eq!(s.b_blocks[0].intersection(&s.a_blocks[1]).len(), 1);

        let s = standard_splitting(1, 1, 1).unwrap();
        assert_eq!(s.n_sites, 5);
        assert!(s.blocks().iter().all(|b| b.len() == 3));
        assert!(standard_splitting(0, 1, 1).is_err());
    }

    #[test]
    fn splitting_sweep() {
        for k in 1..=3 {
            for l in 1..=4 {
                for n in 1..=3 {
                    let s = standard_splitting(k, l, n).unwrap();
                    assert_eq!(s.n_sites, n * (4 * k + 2 * l - 2) + l);
                    assert_eq!(union_all(&s.blocks()), s.full());
                    let blocks = s.blocks();
                    for b in &blocks {
                        assert_eq!(b.len(), 2 * (k + l) - 1);
                    }
                    for w in blocks.windows(2) {
                        assert_eq!(w[0].intersection(&w[1]).len(), l);
                    }
                    let segs = s.ordered_segments();
                    let flat: Vec<usize> = segs.iter().flat_map(|r| r.iter()).collect();
                    assert_eq!(flat, (0..s.n_sites).collect::<Vec<_>>());
                    assert_eq!(s.c().union(&s.d()).union(&s.a().intersection(&s.b())), s.full());
                }
            }
        }
    }

    #[test]
    fn region_algebra() {
        let a = Region::new(vec![3, 1, 1, 2]);
        assert_eq!(a.sites(), &[1, 2, 3]);
        let b = Region::from([2, 5]);
        assert_eq!(a.union(&b), Region::from([1, 2, 3, 5]));
        assert_eq!(a.intersection(&b), Region::from([2]));
        assert_eq!(a.difference(&b), Region::from([1, 3]));
        assert_eq!(
            Region::from([0, 1, 3, 5, 6]).segments(),
            vec![Region::from([0, 1]), Region::from([3]), Region::from([5, 6])]
        );
        assert_eq!(Region::from([0, 1]).reflect(5), Region::from([3, 4]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn boundary_is_disjoint_and_close(
                n in 1usize..12,
                k in 1usize..4,
                mask in proptest::collection::vec(any::<bool>(), 12),
            ) {
                let lattice = Lattice::chain_with_cap(n, 2, usize::MAX).unwrap();
                let region = Region::new((0..n).filter(|&i| mask[i]).collect());
                prop_assume!(!region.is_empty());
                let bd = lattice.boundary(&region, k).unwrap();
                prop_assert!(bd.is_disjoint(&region));
                for x in bd.iter() {
                    prop_assert!(region_distance(&Region::single(x), &region).unwrap().value < k);
                }
                for x in lattice.complement(&region.union(&bd)).iter() {
                    prop_assert!(region_distance(&Region::single(x), &region).unwrap().value >= k);
                }
            }
        }
    }
}
