//! Character inventory for the corrector network. Words are split into
//! characters; four reserved symbols occupy the first indices.

use std::collections::HashMap;

use crate::corpus::Token;
use crate::error::{EmendError, Result};
use crate::extraction::ParallelDataset;

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const PAD: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: usize = 4;

/// Ordered character inventory plus the reserved BOS/EOS/PAD/UNK symbols at
/// indices 0-3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    /// Builds a vocabulary from a sorted, deduplicated character list.
    pub fn from_chars(mut chars: Vec<char>) -> Result<CharVocab> {
        chars.sort_unstable();
        chars.dedup();
        if chars.is_empty() {
            return Err(EmendError::Config("character vocabulary is empty".into()));
        }
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + RESERVED))
            .collect();
        Ok(CharVocab { chars, index })
    }

    /// Every character appearing in the dataset's error or correct forms.
    pub fn from_dataset(dataset: &ParallelDataset) -> Result<CharVocab> {
        let mut chars: Vec<char> = dataset
            .pairs
            .iter()
            .flat_map(|p| p.error_form.as_str().chars().chain(p.correct_form.as_str().chars()))
            .collect();
        chars.sort_unstable();
        chars.dedup();
        CharVocab::from_chars(chars)
    }

    /// Total symbol count including the reserved ones.
    pub fn size(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn char_index(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK)
    }

    /// Per-character indices; unknown characters map to UNK. BOS/EOS framing
    /// is applied by the decoder, not here.
    pub fn encode_word(&self, word: &Token) -> Vec<usize> {
        word.as_str().chars().map(|c| self.char_index(c)).collect()
    }

    /// Renders an index sequence, skipping reserved symbols.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter_map(|&id| id.checked_sub(RESERVED).and_then(|i| self.chars.get(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    #[test]
    fn encode_maps_chars_after_reserved_block() {
        let vocab = CharVocab::from_chars(vec!['a', 'b', 'c']).unwrap();
        assert_eq!(vocab.encode_word(&tok("abc")), vec![4, 5, 6]);
        assert_eq!(vocab.size(), 7);
    }

    #[test]
    fn unknown_chars_become_unk() {
        let vocab = CharVocab::from_chars(vec!['a', 'c']).unwrap();
        assert_eq!(vocab.encode_word(&tok("aωc")), vec![4, UNK, 5]);
    }

    #[test]
    fn decode_inverts_encode_for_known_chars() {
        let vocab = CharVocab::from_chars("abcdefg".chars().collect()).unwrap();
        let word = tok("decaf");
        let ids = vocab.encode_word(&word);
        assert_eq!(vocab.decode(&ids), "decaf");
    }

    #[test]
    fn decode_skips_reserved_symbols() {
        let vocab = CharVocab::from_chars(vec!['a', 'b']).unwrap();
        assert_eq!(vocab.decode(&[BOS, 4, EOS, 5, PAD]), "ab");
    }

    #[test]
    fn from_chars_sorts_and_dedups() {
        let vocab = CharVocab::from_chars(vec!['c', 'a', 'c', 'b']).unwrap();
        assert_eq!(vocab.chars(), &['a', 'b', 'c']);
    }
}
