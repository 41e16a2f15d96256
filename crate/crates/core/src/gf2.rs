//! Linear algebra over GF(2) on bitset rows.

use crate::bits::BitSet;

/// Row space kept in reduced row echelon form.
///
/// Every stored row has a distinct pivot (its lowest set bit) and no other
/// stored row has that bit set, so [`Basis::reduce`] returns a canonical
/// representative of a vector's coset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    dim: usize,
    rows: Vec<(usize, BitSet)>,
}

impl Basis {
    pub fn new(dim: usize) -> Self {
        Self { dim, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = &BitSet> {
        self.rows.iter().map(|(_, r)| r)
    }

    pub fn reduce(&self, v: &BitSet) -> BitSet {
        let mut r = v.clone();
        for (pivot, row) in &self.rows {
            if r.contains(*pivot) {
                r.xor_with(row);
            }
        }
        r
    }

    pub fn contains(&self, v: &BitSet) -> bool {
        self.reduce(v).is_empty()
    }

    /// Adds `v` to the span; returns `false` if it was already inside.
    pub fn insert(&mut self, v: &BitSet) -> bool {
        let r = self.reduce(v);
        let Some(pivot) = r.first() else {
            return false;
        };
        for (_, row) in self.rows.iter_mut() {
            if row.contains(pivot) {
                row.xor_with(&r);
            }
        }
        self.rows.push((pivot, r));
        true
    }

    /// Every vector of the span, indexed by the subset of stored rows summed
    /// (bit `t` of the index selects row `t`).
    pub fn span_vectors(&self) -> impl Iterator<Item = BitSet> + '_ {
        assert!(self.rank() < 32, "span too large to enumerate");
        (0u32..(1 << self.rank())).map(move |mask| {
            let mut v = BitSet::new(self.dim);
            for (t, (_, row)) in self.rows.iter().enumerate() {
                if mask >> t & 1 == 1 {
                    v.xor_with(row);
                }
            }
            v
        })
    }
}

pub fn rank(rows: &[BitSet]) -> usize {
    let Some(first) = rows.first() else {
        return 0;
    };
    let mut b = Basis::new(first.len());
    for r in rows {
        b.insert(r);
    }
    b.rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(dim: usize, bits: &[usize]) -> BitSet {
        BitSet::from_indices(dim, bits.iter().copied())
    }

    #[test]
    fn small_ranks() {
        assert_eq!(rank(&[v(3, &[0]), v(3, &[1]), v(3, &[0, 1])]), 2);
        assert_eq!(rank(&[v(3, &[0]), v(3, &[1]), v(3, &[2])]), 3);
        assert_eq!(rank(&[v(3, &[]), v(3, &[])]), 0);
        assert_eq!(rank(&[]), 0);
    }

    #[test]
    fn reduce_is_canonical() {
        let mut b = Basis::new(4);
        b.insert(&v(4, &[0, 1]));
        b.insert(&v(4, &[1, 2]));
        let x = v(4, &[0, 3]);
        let y = x.xor(&v(4, &[0, 2]));
        assert_eq!(b.reduce(&x), b.reduce(&y));
        assert!(b.contains(&v(4, &[0, 2])));
        assert_eq!(b.span_vectors().count(), 4);
    }

    /// Rank by counting the distinct vectors of the span: 2^rank.
    fn rank_by_span(rows: &[BitSet], dim: usize) -> usize {
        let mut span = std::collections::HashSet::new();
        span.insert(BitSet::new(dim));
        for r in rows {
            let next: Vec<BitSet> = span.iter().map(|s| s.xor(r)).collect();
            span.extend(next);
        }
        span.len().trailing_zeros() as usize
    }

    proptest! {
        #[test]
        fn rank_matches_span_size(rows in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 6), 0..7)) {
            let rows: Vec<BitSet> = rows.iter().map(|r| BitSet::from_indices(6, r.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i))).collect();
            let mut b = Basis::new(6);
            for r in &rows { b.insert(r); }
            prop_assert_eq!(b.rank(), rank_by_span(&rows, 6));
        }
    }
}
