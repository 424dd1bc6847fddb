//! Corpus ingestion: tokenization, frequency counting and the replayable
//! sentence stream that feeds the embedding trainer.
//!
//! Tokenization is deliberately minimal: whitespace split, surrounding
//! punctuation stripped (hyphens and apostrophes survive, so OCR fragments
//! like `friend-` stay intact), lowercased, no stopword removal.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{EmendError, Result};

/// A lowercased, whitespace-free word form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Wraps an already-normalized string. Returns `None` if the invariants
    /// (non-empty, no whitespace, lowercase-stable) do not hold.
    pub fn new(s: impl Into<String>) -> Option<Token> {
        let s = s.into();
        if s.is_empty() || s.chars().any(char::is_whitespace) || s.to_lowercase() != s {
            None
        } else {
            Some(Token(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Character length (not byte length).
    pub fn char_len(&self) -> usize {
        self.0.chars().count()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn keep_in_core(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '\''
}

/// Strips surrounding punctuation (everything but letters, digits, hyphens
/// and apostrophes) from both ends of a whitespace-delimited piece.
pub fn strip_punctuation(piece: &str) -> &str {
    piece.trim_matches(|c| !keep_in_core(c))
}

/// Splits a line into tokens: whitespace split, surrounding punctuation
/// stripped, lowercased. Tokens carrying U+FFFD (encoding damage from lossy
/// UTF-8 decoding) are dropped rather than guessed at.
pub fn tokenize(line: &str) -> Vec<Token> {
    line.split_whitespace()
        .map(strip_punctuation)
        .filter(|core| !core.is_empty() && !core.contains('\u{FFFD}'))
        .map(|core| Token(core.to_lowercase()))
        .collect()
}

/// A replayable sequence of token sequences. Iterating twice yields the
/// identical stream, which is what lets the CBOW trainer run several epochs
/// over on-disk corpora without buffering them.
#[derive(Debug, Clone)]
pub enum SentenceStream {
    InMemory(Vec<Vec<Token>>),
    /// One sentence per line, tokenized on the fly at every pass. Files are
    /// visited in the stored order.
    Files(Vec<PathBuf>),
}

impl SentenceStream {
    pub fn in_memory(sentences: Vec<Vec<Token>>) -> SentenceStream {
        SentenceStream::InMemory(sentences)
    }

    /// Tokenizes a block of text, one sentence per line, into memory.
    pub fn from_text(text: &str) -> SentenceStream {
        SentenceStream::InMemory(text.lines().map(tokenize).collect())
    }

    /// Streams every `.txt` file under `dir` (non-recursive), in lexicographic
    /// path order so replays are stable.
    pub fn from_dir(dir: &Path) -> Result<SentenceStream> {
        let entries = std::fs::read_dir(dir).map_err(|e| EmendError::io(dir, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| EmendError::io(dir, e))?;
            let path = entry.path();
            if path.is_file() && path.extension().is_some_and(|ext| ext == "txt") {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(EmendError::Config(format!(
                "no .txt files found in {}",
                dir.display()
            )));
        }
        files.sort();
        Ok(SentenceStream::Files(files))
    }

    pub fn from_files(files: Vec<PathBuf>) -> SentenceStream {
        SentenceStream::Files(files)
    }

    /// One pass over the stream. Undecodable bytes are replaced with U+FFFD
    /// by the reader and the affected tokens dropped by `tokenize`.
    pub fn for_each<F: FnMut(&[Token])>(&self, mut f: F) -> Result<()> {
        match self {
            SentenceStream::InMemory(sentences) => {
                for s in sentences {
                    f(s);
                }
                Ok(())
            }
            SentenceStream::Files(files) => {
                for path in files {
                    let file = File::open(path).map_err(|e| EmendError::io(path, e))?;
                    let mut reader = BufReader::new(file);
                    let mut buf = Vec::new();
                    loop {
                        buf.clear();
                        let n = reader
                            .read_until(b'\n', &mut buf)
                            .map_err(|e| EmendError::io(path, e))?;
                        if n == 0 {
                            break;
                        }
                        let line = String::from_utf8_lossy(&buf);
                        f(&tokenize(&line));
                    }
                }
                Ok(())
            }
        }
    }

    /// Materializes the stream, mostly for tests and corpus synthesis.
    pub fn collect_sentences(&self) -> Result<Vec<Vec<Token>>> {
        let mut out = Vec::new();
        self.for_each(|s| out.push(s.to_vec()))?;
        Ok(out)
    }
}

/// Token occurrence counts over an ingested corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    entries: HashMap<Token, u64>,
    total_tokens: u64,
}

impl FrequencyTable {
    pub fn new() -> FrequencyTable {
        FrequencyTable::default()
    }

    pub fn add(&mut self, token: Token) {
        *self.entries.entry(token).or_insert(0) += 1;
        self.total_tokens += 1;
    }

    pub fn count(&self, token: &str) -> u64 {
        self.entries.get(token).copied().unwrap_or(0)
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn distinct_tokens(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, u64)> {
        self.entries.iter().map(|(t, &c)| (t, c))
    }

    /// Merges another table into this one. Associative and commutative, so
    /// sharded counts can be combined in any order.
    pub fn merge(&mut self, other: FrequencyTable) {
        for (token, count) in other.entries {
            *self.entries.entry(token).or_insert(0) += count;
        }
        self.total_tokens += other.total_tokens;
    }

    /// Entries sorted by descending count, then lexicographic token. This is
    /// the canonical order used by the TSV format and the embedding vocab.
    pub fn sorted_entries(&self) -> Vec<(&Token, u64)> {
        let mut entries: Vec<_> = self.iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries
    }

    /// Writes `token<TAB>count` lines in canonical order.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| EmendError::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (token, count) in self.sorted_entries() {
            writeln!(w, "{token}\t{count}").map_err(|e| EmendError::io(path, e))?;
        }
        w.flush().map_err(|e| EmendError::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<FrequencyTable> {
        let file = File::open(path).map_err(|e| EmendError::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| EmendError::io(path, e))?;

        let mut table = FrequencyTable::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(token), Some(count)) = (fields.next(), fields.next()) else {
                return Err(EmendError::parse(path, lineno, "expected token<TAB>count"));
            };
            let token = Token::new(token).ok_or_else(|| {
                EmendError::parse(path, lineno, format!("invalid token {token:?}"))
            })?;
            let count: u64 = count.parse().map_err(|_| {
                EmendError::parse(path, lineno, format!("invalid count {count:?}"))
            })?;
            if count == 0 {
                return Err(EmendError::parse(path, lineno, "zero count"));
            }
            *table.entries.entry(token).or_insert(0) += count;
            table.total_tokens += count;
        }
        Ok(table)
    }
}

/// Exact multiset count of the stream's tokens.
pub fn count_frequencies(stream: &SentenceStream) -> Result<FrequencyTable> {
    let mut table = FrequencyTable::new();
    stream.for_each(|sentence| {
        for token in sentence {
            table.add(token.clone());
        }
    })?;
    Ok(table)
}

/// Tokens occurring at least `min_count` times (the threshold is inclusive).
pub fn filter_vocab(table: &FrequencyTable, min_count: u64) -> Vec<Token> {
    let mut vocab: Vec<Token> = table
        .iter()
        .filter(|&(_, count)| count >= min_count)
        .map(|(t, _)| t.clone())
        .collect();
    vocab.sort();
    vocab
}
