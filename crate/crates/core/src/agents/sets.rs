use std::fmt;

/// A set of proposer indices packed into a `u64`.
///
/// Acceptors store their baseline proposal set in every state, and the
/// exact chain keys states by value, so this needs to be `Copy` and cheap
/// to hash. Markets are capped well below 64 proposers.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ProposerSet(u64);

impl ProposerSet {
    pub const EMPTY: ProposerSet = ProposerSet(0);
    pub const CAPACITY: usize = 64;

    pub fn singleton(i: usize) -> Self {
        let mut s = Self::EMPTY;
        s.insert(i);
        s
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < Self::CAPACITY, "proposer index {i} exceeds set capacity");
        self.0 |= 1 << i;
    }

    pub fn contains(self, i: usize) -> bool {
        i < Self::CAPACITY && self.0 & (1 << i) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn difference(self, other: ProposerSet) -> ProposerSet {
        ProposerSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: ProposerSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// The `k`-th smallest member.
    pub fn nth(self, k: usize) -> Option<usize> {
        self.iter().nth(k)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }
}

impl FromIterator<usize> for ProposerSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = Self::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Debug for ProposerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
