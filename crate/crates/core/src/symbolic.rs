//! Finite words over a finite alphabet, the left shift, and the symbolic metric.
//!
//! Infinite symbols only enter the library as the tail argument of a cylinder
//! function. Since every implemented cylinder function is constant in the
//! tail, an infinite symbol is represented by a finite prefix followed by the
//! constant tail `0, 0, 0, ...` (see [`TAIL_SYMBOL`]).

use std::fmt;

use crate::error::{Error, Result};

/// Symbol repeated forever to complete a finite prefix into an infinite symbol.
pub const TAIL_SYMBOL: u8 = 0;

/// Default cap on the number of words a single enumeration may visit (2^24).
pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// The index set `I` of the symbol space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if !(2..=256).contains(&size) {
            return Err(Error::InvalidAlphabet(size));
        }
        Ok(Self { size })
    }

    /// Alphabet with a single symbol. Only useful for degenerate systems such
    /// as a one-map IFS, where every level has exactly one word.
    pub fn singleton() -> Self {
        Self { size: 1 }
    }

    pub(crate) fn with_size(size: usize) -> Result<Self> {
        if size == 1 {
            Ok(Self::singleton())
        } else {
            Self::new(size)
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `#I^n`, saturating in `u128`.
    pub fn count_words(&self, n: usize) -> u128 {
        (self.size as u128).saturating_pow(n as u32)
    }

    pub fn check_symbol(&self, symbol: usize) -> Result<()> {
        if symbol < self.size {
            Ok(())
        } else {
            Err(Error::InvalidSymbol { symbol, size: self.size })
        }
    }
}

/// Upper bound on `#I^n` for a single enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_words: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_words: DEFAULT_BUDGET }
    }
}

impl Budget {
    pub fn new(max_words: u64) -> Self {
        Self { max_words }
    }

    pub fn check(&self, alphabet: Alphabet, n: usize) -> Result<u64> {
        let requested = alphabet.count_words(n);
        if requested > self.max_words as u128 {
            Err(Error::BudgetExceeded { requested, limit: self.max_words })
        } else {
            Ok(requested as u64)
        }
    }
}

/// A finite word `i = (i_1, ..., i_k)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    symbols: Vec<u8>,
}

impl Word {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(symbols: Vec<u8>, alphabet: Alphabet) -> Result<Self> {
        for &s in &symbols {
            alphabet.check_symbol(s as usize)?;
        }
        Ok(Self { symbols })
    }

    /// Builds a word without checking symbols against an alphabet.
    pub fn from_symbols(symbols: impl Into<Vec<u8>>) -> Self {
        Self { symbols: symbols.into() }
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// `i|_k`, the first `k` symbols.
    pub fn prefix(&self, k: usize) -> Word {
        Word { symbols: self.symbols[..k.min(self.len())].to_vec() }
    }

    /// `σ^k(i)`. Shifting past the end yields the empty word.
    pub fn shifted(&self, k: usize) -> Word {
        Word { symbols: self.symbols[k.min(self.len())..].to_vec() }
    }

    pub fn push(&mut self, symbol: u8) {
        self.symbols.push(symbol);
    }

    /// The first `k` symbols of the infinite symbol `(self, TAIL_SYMBOL, ...)`.
    pub fn padded(&self, k: usize) -> Word {
        let mut symbols = self.symbols[..k.min(self.len())].to_vec();
        symbols.resize(k, TAIL_SYMBOL);
        Word { symbols }
    }

    /// Base-`#I` packed index; lexicographic order equals numeric order
    /// among words of the same length.
    pub fn packed_index(&self, alphabet: Alphabet) -> u64 {
        let base = alphabet.size() as u64;
        self.symbols.iter().fold(0u64, |acc, &s| acc * base + s as u64)
    }

    pub fn from_packed_index(index: u64, len: usize, alphabet: Alphabet) -> Word {
        let base = alphabet.size() as u64;
        let mut symbols = vec![0u8; len];
        let mut rest = index;
        for slot in symbols.iter_mut().rev() {
            *slot = (rest % base) as u8;
            rest /= base;
        }
        Word { symbols }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.symbols.iter().all(|&s| s < 10) {
            for s in &self.symbols {
                write!(f, "{s}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.symbols.iter().map(|s| s.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

/// Streams `I^n` in lexicographic order without materializing it.
pub struct WordIter {
    alphabet: usize,
    current: Vec<u8>,
    done: bool,
}

impl Iterator for WordIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        let out = Word { symbols: self.current.clone() };
        // odometer increment
        let mut pos = self.current.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            if (self.current[pos] as usize) + 1 < self.alphabet {
                self.current[pos] += 1;
                break;
            }
            self.current[pos] = 0;
        }
        Some(out)
    }
}

pub fn words_of_length(alphabet: Alphabet, n: usize, budget: Budget) -> Result<WordIter> {
    budget.check(alphabet, n)?;
    Ok(WordIter { alphabet: alphabet.size(), current: vec![0; n], done: false })
}

pub fn shift_word(w: &Word) -> Result<Word> {
    if w.is_empty() {
        return Err(Error::EmptyWord);
    }
    Ok(w.shifted(1))
}

pub fn concat(i: &Word, j: &Word) -> Word {
    let mut symbols = Vec::with_capacity(i.len() + j.len());
    symbols.extend_from_slice(&i.symbols);
    symbols.extend_from_slice(&j.symbols);
    Word { symbols }
}

/// `2^{-(k-1)}` where `k` is the first (1-based) position at which the words differ.
pub fn word_metric(i: &Word, j: &Word) -> Result<f64> {
    if i.len() != j.len() {
        return Err(Error::LengthMismatch { left: i.len(), right: j.len() });
    }
    Ok(match i.symbols.iter().zip(&j.symbols).position(|(a, b)| a != b) {
        None => 0.0,
        Some(p) => 0.5f64.powi(p as i32),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn w(s: &[u8]) -> Word {
        Word::from_symbols(s.to_vec())
    }

    #[test]
    fn enumerates_small_levels() {
        let two = Alphabet::new(2).unwrap();
        let level0: Vec<Word> = words_of_length(two, 0, Budget::default()).unwrap().collect();
        assert_eq!(level0, vec![Word::empty()]);

        let level2: Vec<String> = words_of_length(two, 2, Budget::default()).unwrap().map(|w| w.to_string()).collect();
        assert_eq!(level2, ["00", "01", "10", "11"]);

        let three = Alphabet::new(3).unwrap();
        let level5: Vec<Word> = words_of_length(three, 5, Budget::default()).unwrap().collect();
        assert_eq!(level5.len(), 243);
        assert_eq!(level5[0], w(&[0; 5]));
        assert_eq!(level5[242], w(&[2; 5]));
        assert!(level5.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn enumeration_respects_budget() {
        let two = Alphabet::new(2).unwrap();
        let err = words_of_length(two, 11, Budget::new(1024)).err().unwrap();
        assert!(matches!(err, Error::BudgetExceeded { requested: 2048, limit: 1024 }));
        assert!(words_of_length(two, 10, Budget::new(1024)).is_ok());
    }

    #[test]
    fn no_duplicates_up_to_level_12() {
        for size in 2..=3 {
            let alphabet = Alphabet::new(size).unwrap();
            for n in 0..=12 {
                if size == 3 && n > 10 {
                    continue;
                }
                let seen: HashSet<Word> = words_of_length(alphabet, n, Budget::default()).unwrap().collect();
                assert_eq!(seen.len() as u128, alphabet.count_words(n));
            }
        }
    }

    #[test]
    fn alphabet_rejects_single_symbol() {
        assert!(matches!(Alphabet::new(1), Err(Error::InvalidAlphabet(1))));
        assert!(Word::new(vec![0, 3], Alphabet::new(3).unwrap()).is_err());
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift_word(&w(&[0, 1, 2])).unwrap(), w(&[1, 2]));
        assert_eq!(shift_word(&w(&[1])).unwrap(), Word::empty());
        let twice = shift_word(&shift_word(&w(&[0, 1, 0, 1])).unwrap()).unwrap();
        assert_eq!(twice, w(&[0, 1]));
        assert!(matches!(shift_word(&Word::empty()), Err(Error::EmptyWord)));
    }

    #[test]
    fn concat_examples() {
        assert_eq!(concat(&w(&[0]), &w(&[1])), w(&[0, 1]));
        assert_eq!(concat(&Word::empty(), &w(&[2, 2])), w(&[2, 2]));
        assert_eq!(concat(&w(&[0, 1]), &w(&[1, 0])), w(&[0, 1, 1, 0]));
    }

    #[test]
    fn metric_examples() {
        assert_eq!(word_metric(&w(&[1, 0]), &w(&[1, 0])).unwrap(), 0.0);
        assert_eq!(word_metric(&w(&[0, 1]), &w(&[1, 1])).unwrap(), 1.0);
        assert_eq!(word_metric(&w(&[0, 0, 0]), &w(&[0, 0, 1])).unwrap(), 0.25);
        assert!(matches!(word_metric(&w(&[0]), &w(&[0, 1])), Err(Error::LengthMismatch { left: 1, right: 2 })));
    }

    #[test]
    fn packed_index_matches_enumeration_order() {
        let three = Alphabet::new(3).unwrap();
        for (k, word) in words_of_length(three, 4, Budget::default()).unwrap().enumerate() {
            assert_eq!(word.packed_index(three), k as u64);
            assert_eq!(Word::from_packed_index(k as u64, 4, three), word);
        }
    }

    fn word_strategy(len: usize) -> impl Strategy<Value = Word> {
        proptest::collection::vec(0u8..3, len).prop_map(Word::from_symbols)
    }

    proptest! {
        #[test]
        fn metric_is_ultrametric(
            (a, b, c) in (1usize..10).prop_flat_map(|n| (word_strategy(n), word_strategy(n), word_strategy(n)))
        ) {
            let ac = word_metric(&a, &c).unwrap();
            let ab = word_metric(&a, &b).unwrap();
            let bc = word_metric(&b, &c).unwrap();
            prop_assert!(ac <= ab.max(bc));
        }

        #[test]
        fn shift_undoes_prepend(a in 0u8..3, rest in proptest::collection::vec(0u8..3, 0..12)) {
            let tail = Word::from_symbols(rest);
            let joined = concat(&Word::from_symbols(vec![a]), &tail);
            prop_assert_eq!(shift_word(&joined).unwrap(), tail.clone());
            prop_assert_eq!(joined.len(), tail.len() + 1);
        }
    }
}
