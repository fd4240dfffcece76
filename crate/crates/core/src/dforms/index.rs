//! Strictly increasing multi-indices stored as bitmasks, with rank tables
//! for the dense layout of `Λ^p`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// A strictly increasing multi-index `i_1 < ... < i_p` in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub(crate) u8);

impl MultiIndex {
    pub fn new(indices: &[usize]) -> Result<Self> {
        let mut mask = 0u8;
        let mut prev: Option<usize> = None;
        for &i in indices {
            if i >= MAX_DIM || prev.is_some_and(|p| p >= i) {
                return Err(Error::InvalidIndex(indices.to_vec()));
            }
            mask |= 1 << i;
            prev = Some(i);
        }
        Ok(MultiIndex(mask))
    }

    pub fn empty() -> Self {
        MultiIndex(0)
    }

    pub fn from_mask(mask: u8) -> Self {
        MultiIndex(mask)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn indices(self) -> Vec<usize> {
        (0..MAX_DIM).filter(|&i| self.0 & (1 << i) != 0).collect()
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn complement(self, n: usize) -> Self {
        MultiIndex(!self.0 & full_mask(n))
    }

    /// Sign of the permutation sorting the concatenation `self ++ other`;
    /// zero when the two overlap.
    pub fn shuffle_sign(self, other: MultiIndex) -> f64 {
        shuffle_sign(self.0, other.0)
    }
}

pub(crate) fn full_mask(n: usize) -> u8 {
    if n >= 8 {
        0xff
    } else {
        ((1u16 << n) - 1) as u8
    }
}

/// Sign of the shuffle bringing `a ++ b` into increasing order, 0 if they overlap.
#[inline]
pub(crate) fn shuffle_sign(a: u8, b: u8) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    // count pairs (i in a, j in b) with i > j
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        bb &= bb - 1;
        inversions += (a >> j).count_ones();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, b| a * b as f64)
}

/// Masks of each cardinality in lexicographic order of the index sequences,
/// plus the inverse rank map.
pub(crate) struct Basis {
    pub by_degree: Vec<Vec<u8>>,
    pub rank: [u16; 256],
}

fn build_basis(n: usize) -> Basis {
    let mut by_degree = vec![Vec::new(); n + 1];
    let mut all: Vec<u8> = (0..=full_mask(n) as u16).map(|m| m as u8).collect();
    all.sort_by_key(|&m| {
        let idx = MultiIndex(m).indices();
        (idx.len(), idx)
    });
    let mut rank = [u16::MAX; 256];
    for m in all {
        let d = m.count_ones() as usize;
        rank[m as usize] = by_degree[d].len() as u16;
        by_degree[d].push(m);
    }
    Basis { by_degree, rank }
}

pub(crate) fn basis(n: usize) -> &'static Basis {
    static CACHE: [OnceLock<Basis>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    CACHE[n].get_or_init(|| build_basis(n))
}

/// Entries `(rank a, rank b, rank a|b, sign)` over disjoint pairs of
/// cardinalities `(p1, p2)`.
pub(crate) type ProductTable = Vec<(u16, u16, u16, f64)>;

pub(crate) fn product_table(n: usize, p1: usize, p2: usize) -> &'static ProductTable {
    static CACHE: [OnceLock<Vec<ProductTable>>; MAX_DIM + 1] =
        [const { OnceLock::new() }; MAX_DIM + 1];
    let tables = CACHE[n].get_or_init(|| {
        let b = basis(n);
        let mut out = Vec::with_capacity((n + 1) * (n + 1));
        for d1 in 0..=n {
            for d2 in 0..=n {
                let mut t = Vec::new();
                if d1 + d2 <= n {
                    for (ia, &a) in b.by_degree[d1].iter().enumerate() {
                        for (ib, &bm) in b.by_degree[d2].iter().enumerate() {
                            if a & bm == 0 {
                                let k = b.rank[(a | bm) as usize];
                                t.push((ia as u16, ib as u16, k, shuffle_sign(a, bm)));
                            }
                        }
                    }
                }
                out.push(t);
            }
        }
        out
    });
    &tables[p1 * (n + 1) + p2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing() {
        assert!(MultiIndex::new(&[0, 2, 1]).is_err());
        assert!(MultiIndex::new(&[1, 1]).is_err());
        assert_eq!(MultiIndex::new(&[0, 3]).unwrap().indices(), vec![0, 3]);
    }

    #[test]
    fn shuffle_signs() {
        let a = MultiIndex::new(&[1]).unwrap();
        let b = MultiIndex::new(&[0]).unwrap();
        assert_eq!(a.shuffle_sign(b), -1.0);
        assert_eq!(b.shuffle_sign(a), 1.0);
        let c = MultiIndex::new(&[0, 2]).unwrap();
        let d = MultiIndex::new(&[1, 3]).unwrap();
        // (0 2 1 3): one inversion
        assert_eq!(c.shuffle_sign(d), -1.0);
        assert_eq!(c.shuffle_sign(c), 0.0);
    }

    #[test]
    fn ranks_are_lexicographic() {
        let b = basis(4);
        let two: Vec<Vec<usize>> =
            b.by_degree[2].iter().map(|&m| MultiIndex(m).indices()).collect();
        assert_eq!(
            two,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        for d in 0..=4 {
            assert_eq!(b.by_degree[d].len(), binomial(4, d));
        }
    }

    #[test]
    fn complement_of_full_is_empty() {
        let f = MultiIndex::new(&[0, 1, 2]).unwrap();
        assert!(f.complement(3).is_empty());
        assert_eq!(MultiIndex::empty().complement(8).len(), 8);
    }
}
