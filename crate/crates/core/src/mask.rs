//! Fixed-size token bitsets.

/// One bit per vocabulary entry; bit set means the token is permitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenMask {
    words: Vec<u64>,
    len: usize,
}

impl TokenMask {
    pub fn empty(len: usize) -> Self {
        TokenMask { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn full(len: usize) -> Self {
        let mut m = TokenMask { words: vec![u64::MAX; len.div_ceil(64)], len };
        m.clear_tail();
        m
    }

    pub(crate) fn from_words(words: Vec<u64>, len: usize) -> Option<Self> {
        if words.len() != len.div_ceil(64) {
            return None;
        }
        let m = TokenMask { words, len };
        let mut trimmed = m.clone();
        trimmed.clear_tail();
        (trimmed == m).then_some(m)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "token {i} outside mask of {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.len
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }

    #[cfg(test)]
    fn from_bools(bits: &[bool]) -> Self {
        let mut m = TokenMask::empty(bits.len());
        bits.iter().enumerate().filter(|(_, &b)| b).for_each(|(i, _)| m.insert(i));
        m
    }

    /// Calls `f` with each maximal run of set indices inside a 64-bit word,
    /// in increasing order. Full words arrive as one 64-element range.
    #[inline]
    pub fn for_each_range(&self, mut f: impl FnMut(std::ops::Range<usize>)) {
        for (wi, &w) in self.words.iter().enumerate() {
            let base = wi * 64;
            if w == u64::MAX {
                f(base..base + 64);
                continue;
            }
            let mut w = w;
            while w != 0 {
                let lo = w.trailing_zeros() as usize;
                let run = (w >> lo).trailing_ones() as usize;
                f(base + lo..base + lo + run);
                w &= !(((1u128 << (lo + run)) - 1) as u64);
            }
        }
    }

    /// Bytes used by a byte-granular encoding of this mask.
    pub fn byte_len(&self) -> usize {
        self.len.div_ceil(8)
    }
}

impl FromIterator<usize> for TokenMask {
    /// Collects into a mask sized to the largest index; prefer
    /// [`TokenMask::empty`] plus [`TokenMask::insert`] when the vocabulary
    /// size is known.
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let items: Vec<usize> = iter.into_iter().collect();
        let len = items.iter().max().map_or(0, |m| m + 1);
        let mut m = TokenMask::empty(len);
        for i in items {
            m.insert(i);
        }
        m
    }
}
