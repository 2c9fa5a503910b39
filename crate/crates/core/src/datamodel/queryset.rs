use std::fmt;
use std::sync::Arc;

/// Identifier of a query that is live in the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryId(pub u64);

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// The set of queries interested in a tuple, kept as a strictly ascending
/// list. Immutable: every operation returns a new set, and identical sets
/// are shared by reference count.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuerySet(Arc<[QueryId]>);

impl QuerySet {
    pub fn empty() -> QuerySet {
        QuerySet(Arc::from(Vec::new()))
    }

    pub fn single(q: QueryId) -> QuerySet {
        QuerySet(Arc::from(vec![q]))
    }

    /// `ids` must be strictly ascending.
    pub fn from_sorted(ids: Vec<QueryId>) -> QuerySet {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]), "ids not strictly ascending");
        QuerySet(Arc::from(ids))
    }

    pub fn from_ids(ids: impl IntoIterator<Item = QueryId>) -> QuerySet {
        let mut ids: Vec<QueryId> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        QuerySet(Arc::from(ids))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[QueryId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = QueryId> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, q: QueryId) -> bool {
        self.0.binary_search(&q).is_ok()
    }

    pub fn ptr_eq(&self, other: &QuerySet) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn is_subset_of(&self, other: &QuerySet) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        let mut from = 0;
        for q in self.iter() {
            match other.0[from..].binary_search(&q) {
                Ok(i) => from += i + 1,
                Err(_) => return false,
            }
        }
        true
    }

    pub fn union(&self, other: &QuerySet) -> QuerySet {
        if self.ptr_eq(other) || other.is_empty() {
            return self.clone();
        }
        if self.is_empty() {
            return other.clone();
        }
        let (a, b) = (self.as_slice(), other.as_slice());
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        if out.len() == a.len() {
            return self.clone();
        }
        if out.len() == b.len() {
            return other.clone();
        }
        QuerySet::from_sorted(out)
    }

    pub fn intersect(&self, other: &QuerySet) -> QuerySet {
        if self.ptr_eq(other) {
            return self.clone();
        }
        if self.is_empty() || other.is_empty() {
            return QuerySet::empty();
        }
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let out = if small.len() * 8 < large.len() {
            // galloping: binary search the larger list from a moving lower bound
            let mut out = Vec::with_capacity(small.len());
            let mut from = 0;
            for q in small.iter() {
                match large.0[from..].binary_search(&q) {
                    Ok(i) => {
                        out.push(q);
                        from += i + 1;
                    }
                    Err(i) => from += i,
                }
                if from >= large.len() {
                    break;
                }
            }
            out
        } else {
            let (a, b) = (small.as_slice(), large.as_slice());
            let mut out = Vec::with_capacity(a.len());
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        out.push(a[i]);
                        i += 1;
                        j += 1;
                    }
                }
            }
            out
        };
        if out.len() == small.len() {
            return small.clone();
        }
        QuerySet::from_sorted(out)
    }
}

impl fmt::Debug for QuerySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, q) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", q.0)?;
        }
        f.write_str("}")
    }
}

impl FromIterator<QueryId> for QuerySet {
    fn from_iter<T: IntoIterator<Item = QueryId>>(iter: T) -> Self {
        QuerySet::from_ids(iter)
    }
}

pub fn queryset_union(a: &QuerySet, b: &QuerySet) -> QuerySet {
    a.union(b)
}

pub fn queryset_intersect(a: &QuerySet, b: &QuerySet) -> QuerySet {
    a.intersect(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn qs(ids: &[u64]) -> QuerySet {
        QuerySet::from_ids(ids.iter().map(|&i| QueryId(i)))
    }

    #[test]
    fn union_examples() {
        assert_eq!(qs(&[1, 3]).union(&qs(&[2, 3])), qs(&[1, 2, 3]));
        assert_eq!(qs(&[]).union(&qs(&[5])), qs(&[5]));
        let odd: Vec<u64> = (1..=100).filter(|i| i % 2 == 1).collect();
        let even: Vec<u64> = (1..=100).filter(|i| i % 2 == 0).collect();
        let all: Vec<u64> = (1..=100).collect();
        assert_eq!(qs(&odd).union(&qs(&even)), qs(&all));
    }

    #[test]
    fn intersect_examples() {
        // query "A" = 1, "B" = 2
        assert_eq!(qs(&[1, 2]).intersect(&qs(&[2])), qs(&[2]));
        assert!(qs(&[1]).intersect(&qs(&[2])).is_empty());
    }

    #[test]
    fn shared_sets_stay_shared() {
        let a = qs(&[1, 2, 3]);
        let b = qs(&[0, 1, 2, 3, 4]);
        assert!(a.intersect(&b).ptr_eq(&a));
        assert!(b.union(&a).ptr_eq(&b));
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
    }

    fn oracle(a: &BTreeSet<u64>, b: &BTreeSet<u64>, union: bool) -> QuerySet {
        let v: Vec<u64> = if union {
            a.union(b).copied().collect()
        } else {
            a.intersection(b).copied().collect()
        };
        qs(&v)
    }

    proptest! {
        #[test]
        fn matches_brute_force(a in proptest::collection::btree_set(0u64..200, 0..64),
                               b in proptest::collection::btree_set(0u64..200, 0..64)) {
            let sa = qs(&a.iter().copied().collect::<Vec<_>>());
            let sb = qs(&b.iter().copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.union(&sb), oracle(&a, &b, true));
            prop_assert_eq!(sa.intersect(&sb), oracle(&a, &b, false));
            prop_assert!(sa.union(&sb).len() <= sa.len() + sb.len());
        }

        #[test]
        fn galloping_matches_brute_force(a in proptest::collection::btree_set(0u64..4000, 0..8),
                                         b in proptest::collection::btree_set(0u64..4000, 100..400)) {
            let sa = qs(&a.iter().copied().collect::<Vec<_>>());
            let sb = qs(&b.iter().copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.intersect(&sb), oracle(&a, &b, false));
            prop_assert_eq!(sb.intersect(&sa), oracle(&a, &b, false));
            prop_assert_eq!(sa.is_subset_of(&sb), a.is_subset(&b));
        }
    }
}
