//! Correction front ends over the trained models: the NMT corrector with
//! lexicon filtering, the embedding+edit-distance baseline, the cascade of
//! the two, and whole-document correction.

use serde::Serialize;

use crate::corpus::{strip_punctuation, Token};
use crate::embeddings::{EmbeddingModel, NeighborIndex};
use crate::extraction::levenshtein;
use crate::lexicon::Lexicon;
use crate::nmt::Decoder;

/// Which corrector produced (or failed to produce) an output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Nmt,
    W2v,
    Cascade,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nmt => "nmt",
            Method::W2v => "w2v",
            Method::Cascade => "cascade",
        }
    }
}

/// Outcome of correcting a single word. `output` is always a correctly
/// spelled form when present; `candidate_rank` is the 1-based rank of the
/// chosen NMT candidate when the NMT leg produced the output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub input: Token,
    pub output: Option<Token>,
    pub method: Method,
    pub candidate_rank: Option<usize>,
}

impl Correction {
    fn none(input: Token, method: Method) -> Correction {
        Correction {
            input,
            output: None,
            method,
            candidate_rank: None,
        }
    }
}

/// Defaults shared by the correctors: candidates inspected and the strict
/// edit-distance bound of the embedding baseline.
pub const DEFAULT_CANDIDATES: usize = 10;
pub const DEFAULT_W2V_MAX_DIST: usize = 4;

/// Scans the decoder's top candidates in rank order and returns the first
/// correctly spelled one. Duplicate candidate strings are dropped before
/// ranking so ranks refer to distinct forms.
pub fn correct_nmt(word: &Token, decoder: &Decoder, lex: &Lexicon, n_candidates: usize) -> Correction {
    let hypotheses = decoder.beam_decode(word, n_candidates, n_candidates);
    let mut seen: Vec<&str> = Vec::new();
    let mut rank = 0;
    for hyp in &hypotheses {
        if seen.iter().any(|s| *s == hyp.word) {
            continue;
        }
        seen.push(&hyp.word);
        rank += 1;
        let Some(candidate) = Token::new(hyp.word.clone()) else {
            continue;
        };
        if lex.is_correct(&candidate) {
            return Correction {
                input: word.clone(),
                output: Some(candidate),
                method: Method::Nmt,
                candidate_rank: Some(rank),
            };
        }
    }
    Correction::none(word.clone(), Method::Nmt)
}

/// The embedding baseline: among the word's correctly spelled neighbors,
/// pick the one at minimal edit distance, provided that distance is strictly
/// below `max_dist`. Ties prefer the higher-cosine neighbor, then the
/// lexicographically smaller one. Out-of-vocabulary words yield no output.
pub fn correct_w2v(
    word: &Token,
    index: &NeighborIndex<'_>,
    lex: &Lexicon,
    k: usize,
    max_dist: usize,
) -> Correction {
    let Ok(neighbors) = index.most_similar(word, k) else {
        return Correction::none(word.clone(), Method::W2v);
    };
    let mut best: Option<(usize, f64, &Token)> = None;
    for (neighbor, cos) in neighbors.entries() {
        if !lex.is_correct(neighbor) {
            continue;
        }
        let d = levenshtein(word.as_str(), neighbor.as_str());
        let better = match &best {
            None => true,
            Some((bd, bc, bt)) => {
                d < *bd || (d == *bd && (*cos > *bc || (*cos == *bc && neighbor < *bt)))
            }
        };
        if better {
            best = Some((d, *cos, neighbor));
        }
    }
    match best {
        Some((d, _, neighbor)) if d >= 1 && d < max_dist => Correction {
            input: word.clone(),
            output: Some(neighbor.clone()),
            method: Method::W2v,
            candidate_rank: None,
        },
        _ => Correction::none(word.clone(), Method::W2v),
    }
}

/// Tries the embedding baseline first and falls back to the NMT corrector.
/// The method tag records which leg fired; a fully failed cascade is tagged
/// `cascade`.
pub fn correct_cascade(
    word: &Token,
    index: &NeighborIndex<'_>,
    decoder: &Decoder,
    lex: &Lexicon,
    k: usize,
    max_dist: usize,
    n_candidates: usize,
) -> Correction {
    let first = correct_w2v(word, index, lex, k, max_dist);
    if first.output.is_some() {
        return first;
    }
    let second = correct_nmt(word, decoder, lex, n_candidates);
    if second.output.is_some() {
        return second;
    }
    Correction::none(word.clone(), Method::Cascade)
}

/// A corrector bundle the harness and CLI dispatch over.
pub enum Corrector<'a> {
    Nmt {
        decoder: &'a Decoder,
        n_candidates: usize,
    },
    W2v {
        index: NeighborIndex<'a>,
        k: usize,
        max_dist: usize,
    },
    Cascade {
        index: NeighborIndex<'a>,
        decoder: &'a Decoder,
        k: usize,
        max_dist: usize,
        n_candidates: usize,
    },
}

impl<'a> Corrector<'a> {
    pub fn nmt(decoder: &'a Decoder) -> Corrector<'a> {
        Corrector::Nmt {
            decoder,
            n_candidates: DEFAULT_CANDIDATES,
        }
    }

    pub fn w2v(model: &'a EmbeddingModel) -> Corrector<'a> {
        Corrector::W2v {
            index: model.neighbor_index(),
            k: DEFAULT_CANDIDATES,
            max_dist: DEFAULT_W2V_MAX_DIST,
        }
    }

    pub fn cascade(model: &'a EmbeddingModel, decoder: &'a Decoder) -> Corrector<'a> {
        Corrector::Cascade {
            index: model.neighbor_index(),
            decoder,
            k: DEFAULT_CANDIDATES,
            max_dist: DEFAULT_W2V_MAX_DIST,
            n_candidates: DEFAULT_CANDIDATES,
        }
    }

    pub fn correct(&self, word: &Token, lex: &Lexicon) -> Correction {
        match self {
            Corrector::Nmt {
                decoder,
                n_candidates,
            } => correct_nmt(word, decoder, lex, *n_candidates),
            Corrector::W2v { index, k, max_dist } => correct_w2v(word, index, lex, *k, *max_dist),
            Corrector::Cascade {
                index,
                decoder,
                k,
                max_dist,
                n_candidates,
            } => correct_cascade(word, index, decoder, lex, *k, *max_dist, *n_candidates),
        }
    }
}

/// One replaced (or unresolved) token in a corrected document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Change {
    /// Zero-based token position over the whole document.
    pub position: usize,
    pub original: String,
    /// None when every candidate failed the lexicon.
    pub replacement: Option<String>,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentCorrection {
    pub text: String,
    pub changes: Vec<Change>,
}

/// Corrects a document token by token, preserving whitespace and surrounding
/// punctuation. Tokens that pass the lexicon are left alone; erroneous ones
/// are replaced when a corrector output exists and logged either way.
pub fn correct_document(text: &str, corrector: &Corrector<'_>, lex: &Lexicon) -> DocumentCorrection {
    let mut out = String::with_capacity(text.len());
    let mut changes = Vec::new();
    let mut position = 0usize;

    for piece in split_keeping_separators(text) {
        let Piece::Word(raw) = piece else {
            if let Piece::Gap(gap) = piece {
                out.push_str(gap);
            }
            continue;
        };
        let core = strip_punctuation(raw);
        let token = Token::new(core.to_lowercase());
        let current = position;
        position += 1;

        let Some(token) = token else {
            out.push_str(raw);
            continue;
        };
        if token.as_str().contains('\u{FFFD}') || lex.is_correct(&token) {
            out.push_str(raw);
            continue;
        }

        let correction = corrector.correct(&token, lex);
        match &correction.output {
            Some(replacement) => {
                let start = raw.find(core).unwrap_or(0);
                out.push_str(&raw[..start]);
                out.push_str(replacement.as_str());
                out.push_str(&raw[start + core.len()..]);
                changes.push(Change {
                    position: current,
                    original: token.to_string(),
                    replacement: Some(replacement.to_string()),
                    method: correction.method,
                });
            }
            None => {
                out.push_str(raw);
                changes.push(Change {
                    position: current,
                    original: token.to_string(),
                    replacement: None,
                    method: correction.method,
                });
            }
        }
    }

    DocumentCorrection { text: out, changes }
}

enum Piece<'a> {
    Word(&'a str),
    Gap(&'a str),
}

/// Splits text into whitespace runs and non-whitespace runs, preserving both.
fn split_keeping_separators(text: &str) -> impl Iterator<Item = Piece<'_>> {
    let mut rest = text;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let is_space = rest.chars().next().unwrap().is_whitespace();
        let end = rest
            .char_indices()
            .find(|(_, c)| c.is_whitespace() != is_space)
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let (piece, tail) = rest.split_at(end);
        rest = tail;
        Some(if is_space {
            Piece::Gap(piece)
        } else {
            Piece::Word(piece)
        })
    })
}
