//! Parallel-data extraction: mine (error form, correct form) training pairs
//! from the noisy corpus itself.
//!
//! For every seed word, its embedding neighbors are split into correct and
//! erroneous forms by the lexicon oracle. Each error form is grouped with the
//! closest correct form by Levenshtein distance (the seed itself counts as a
//! grouping candidate), and groupings beyond the distance cutoff are dropped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FrequencyTable, Token};
use crate::embeddings::EmbeddingModel;
use crate::error::{EmendError, Result};
use crate::lexicon::Lexicon;

/// Unit-cost edit distance over Unicode scalar values, single-row DP.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }

    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let substitution = diagonal + usize::from(ca != cb);
            row[j + 1] = substitution.min(above + 1).min(row[j] + 1);
            diagonal = above;
        }
    }
    row[b.len()]
}

/// Where a seed list's words and frequency bound come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    /// Every correctly spelled word in the embedding vocabulary.
    VocabAll,
    /// Vocabulary words above a frequency bound in the (noisy) corpus itself.
    CorpusFreq,
    /// Words above a frequency bound in a user-supplied clean frequency file.
    ExternalFreq,
}

impl SeedSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SeedSource::VocabAll => "vocab-all",
            SeedSource::CorpusFreq => "corpus-freq",
            SeedSource::ExternalFreq => "external-freq",
        }
    }
}

impl std::str::FromStr for SeedSource {
    type Err = EmendError;

    fn from_str(s: &str) -> Result<SeedSource> {
        match s {
            "vocab-all" => Ok(SeedSource::VocabAll),
            "corpus-freq" => Ok(SeedSource::CorpusFreq),
            "external-freq" => Ok(SeedSource::ExternalFreq),
            other => Err(EmendError::Config(format!(
                "unknown seed source {other:?} (expected vocab-all, corpus-freq or external-freq)"
            ))),
        }
    }
}

/// Correctly spelled query words for neighbor mining.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList {
    pub words: Vec<Token>,
    pub source: SeedSource,
    pub min_freq: u64,
    pub min_length: usize,
}

/// Builds a seed list. All words pass the lexicon oracle, meet the frequency
/// bound for their source and have at least `min_length` characters.
///
/// `corpus_freq` backs the `corpus-freq` source, `external_freq` the
/// `external-freq` source; `vocab-all` applies no frequency bound beyond the
/// vocabulary's own.
pub fn build_seed_list(
    source: SeedSource,
    model: &EmbeddingModel,
    corpus_freq: Option<&FrequencyTable>,
    external_freq: Option<&FrequencyTable>,
    lex: &Lexicon,
    min_freq: u64,
    min_length: usize,
) -> Result<SeedList> {
    if min_freq < 1 {
        return Err(EmendError::Config("min_freq must be at least 1".into()));
    }
    if min_length < 1 {
        return Err(EmendError::Config("min_length must be at least 1".into()));
    }

    let candidates: Vec<Token> = match source {
        SeedSource::VocabAll => model.vocab().to_vec(),
        SeedSource::CorpusFreq => {
            let table = corpus_freq.ok_or_else(|| {
                EmendError::Config("corpus-freq seed source requires a frequency table".into())
            })?;
            model
                .vocab()
                .iter()
                .filter(|t| table.count(t.as_str()) >= min_freq)
                .cloned()
                .collect()
        }
        SeedSource::ExternalFreq => {
            let table = external_freq.ok_or_else(|| {
                EmendError::Config("external-freq seed source requires a frequency file".into())
            })?;
            let mut words: Vec<Token> = table
                .iter()
                .filter(|&(_, count)| count >= min_freq)
                .map(|(t, _)| t.clone())
                .collect();
            words.sort();
            words
        }
    };

    let mut words: Vec<Token> = candidates
        .into_iter()
        .filter(|t| t.char_len() >= min_length && lex.is_correct(t))
        .collect();
    words.sort();
    words.dedup();

    Ok(SeedList {
        words,
        source,
        min_freq,
        min_length,
    })
}

/// One mined training pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParallelPair {
    /// Fails the lexicon oracle.
    pub error_form: Token,
    /// Passes the lexicon oracle.
    pub correct_form: Token,
    /// Levenshtein distance between the two, within 1..=max_dist.
    pub distance: usize,
    /// The seed whose neighborhood produced the pair.
    pub seed_word: Token,
}

/// Extraction run metadata, written as a JSON sidecar next to the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed_source: SeedSource,
    pub min_freq: u64,
    pub min_length: usize,
    pub k: usize,
    pub max_dist: usize,
    pub seed_count: usize,
    pub oov_seeds: usize,
    pub pair_count: usize,
}

/// Deduplicated, deterministically ordered training pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelDataset {
    pub pairs: Vec<ParallelPair>,
    pub provenance: Provenance,
}

impl ParallelDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Splits a seed's neighbor list into correct forms and error forms, and
/// greedily groups every error form with its Levenshtein-closest correct form
/// (ties to the lexicographically smallest). The seed itself is a grouping
/// candidate. Pairs at distance 0 or beyond `max_dist` are dropped.
fn pairs_for_seed(
    seed: &Token,
    neighbors: &[(Token, f64)],
    lex: &Lexicon,
    max_dist: usize,
) -> Vec<ParallelPair> {
    let mut correct_forms: Vec<&Token> = vec![seed];
    let mut error_forms: Vec<&Token> = Vec::new();
    for (neighbor, _) in neighbors {
        if lex.is_correct(neighbor) {
            correct_forms.push(neighbor);
        } else {
            error_forms.push(neighbor);
        }
    }

    let mut pairs = Vec::new();
    for error in error_forms {
        let mut best: Option<(usize, &Token)> = None;
        for &correct in &correct_forms {
            let d = levenshtein(error.as_str(), correct.as_str());
            let better = match best {
                None => true,
                Some((bd, bc)) => d < bd || (d == bd && correct < bc),
            };
            if better {
                best = Some((d, correct));
            }
        }
        if let Some((distance, correct)) = best {
            if (1..=max_dist).contains(&distance) {
                pairs.push(ParallelPair {
                    error_form: error.clone(),
                    correct_form: correct.clone(),
                    distance,
                    seed_word: seed.clone(),
                });
            }
        }
    }
    pairs
}

/// Runs the extraction over every seed. Out-of-vocabulary seeds are skipped
/// and counted in the provenance. The result is deduplicated on
/// (error_form, correct_form) — the lexicographically smallest seed wins —
/// and sorted by (correct_form, error_form) so the output is independent of
/// the per-seed schedule.
pub fn extract_pairs(
    seeds: &SeedList,
    model: &EmbeddingModel,
    lex: &Lexicon,
    k: usize,
    max_dist: usize,
) -> Result<ParallelDataset> {
    if seeds.words.is_empty() {
        return Err(EmendError::Config("empty seed list".into()));
    }
    if k < 1 {
        return Err(EmendError::Config("k must be at least 1".into()));
    }

    let index = model.neighbor_index();
    let per_seed: Vec<std::result::Result<Vec<ParallelPair>, Token>> = seeds
        .words
        .par_iter()
        .map(|seed| match index.most_similar(seed, k) {
            Ok(neighbors) => Ok(pairs_for_seed(seed, neighbors.entries(), lex, max_dist)),
            Err(EmendError::OutOfVocabulary(_)) => Err(seed.clone()),
            Err(_) => Ok(Vec::new()),
        })
        .collect();

    let mut oov_seeds = 0usize;
    let mut dedup: HashMap<(Token, Token), ParallelPair> = HashMap::new();
    for result in per_seed {
        match result {
            Ok(pairs) => {
                for pair in pairs {
                    let key = (pair.error_form.clone(), pair.correct_form.clone());
                    match dedup.entry(key) {
                        std::collections::hash_map::Entry::Vacant(entry) => {
                            entry.insert(pair);
                        }
                        std::collections::hash_map::Entry::Occupied(mut entry) => {
                            if pair.seed_word < entry.get().seed_word {
                                entry.insert(pair);
                            }
                        }
                    }
                }
            }
            Err(_oov) => oov_seeds += 1,
        }
    }

    let mut pairs: Vec<ParallelPair> = dedup.into_values().collect();
    pairs.sort_by(|a, b| {
        (&a.correct_form, &a.error_form).cmp(&(&b.correct_form, &b.error_form))
    });

    let provenance = Provenance {
        seed_source: seeds.source,
        min_freq: seeds.min_freq,
        min_length: seeds.min_length,
        k,
        max_dist,
        seed_count: seeds.words.len(),
        oov_seeds,
        pair_count: pairs.len(),
    };
    Ok(ParallelDataset { pairs, provenance })
}

/// Writes `error<TAB>correct<TAB>distance<TAB>seed` lines under a header
/// comment.
pub fn write_dataset(dataset: &ParallelDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| EmendError::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# error_form\tcorrect_form\tdistance\tseed_word")
        .map_err(|e| EmendError::io(path, e))?;
    for pair in &dataset.pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            pair.error_form, pair.correct_form, pair.distance, pair.seed_word
        )
        .map_err(|e| EmendError::io(path, e))?;
    }
    w.flush().map_err(|e| EmendError::io(path, e))
}

/// Writes the provenance JSON sidecar.
pub fn write_provenance(provenance: &Provenance, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(provenance)
        .expect("provenance serialization cannot fail");
    std::fs::write(path, json + "\n").map_err(|e| EmendError::io(path, e))
}

/// Reads a dataset TSV. The provenance sidecar is not consulted; reads
/// reconstruct counts from the file itself.
pub fn read_dataset(path: &Path) -> Result<ParallelDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| EmendError::io(path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(EmendError::parse(
                path,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let error_form = Token::new(fields[0])
            .ok_or_else(|| EmendError::parse(path, lineno, "invalid error form"))?;
        let correct_form = Token::new(fields[1])
            .ok_or_else(|| EmendError::parse(path, lineno, "invalid correct form"))?;
        let distance: usize = fields[2]
            .parse()
            .map_err(|_| EmendError::parse(path, lineno, "invalid distance"))?;
        let seed_word = Token::new(fields[3])
            .ok_or_else(|| EmendError::parse(path, lineno, "invalid seed word"))?;
        pairs.push(ParallelPair {
            error_form,
            correct_form,
            distance,
            seed_word,
        });
    }

    let pair_count = pairs.len();
    Ok(ParallelDataset {
        pairs,
        provenance: Provenance {
            seed_source: SeedSource::VocabAll,
            min_freq: 1,
            min_length: 1,
            k: 0,
            max_dist: 0,
            seed_count: 0,
            oov_seeds: 0,
            pair_count,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingModel;
    use proptest::prelude::*;

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    fn lex(words: &[&str]) -> Lexicon {
        Lexicon::new(words.iter().map(|w| w.to_string())).unwrap()
    }

    #[test]
    fn levenshtein_single_substitution() {
        assert_eq!(levenshtein("friendship", "friendlhip"), 1);
    }

    #[test]
    fn levenshtein_identity_and_inserts() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
    }

    #[test]
    fn levenshtein_single_insertion() {
        assert_eq!(levenshtein("affetion", "affection"), 1);
    }

    #[test]
    fn levenshtein_unicode_chars() {
        assert_eq!(levenshtein("naïve", "naive"), 1);
    }

    proptest! {
        #[test]
        fn levenshtein_symmetric(a in "[ab]{0,6}", b in "[ab]{0,6}") {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        }

        #[test]
        fn levenshtein_triangle(
            a in "[ab]{0,5}",
            b in "[ab]{0,5}",
            c in "[ab]{0,5}",
        ) {
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }
    }

    /// A model whose "vectors" are chosen so that each planted word's
    /// neighbor list is exactly the rest of the vocabulary in a controlled
    /// cosine order: words sharing the seed's group get near-identical
    /// directions.
    fn toy_model(entries: &[(&str, [f64; 3])]) -> EmbeddingModel {
        let vocab: Vec<Token> = entries.iter().map(|(w, _)| tok(w)).collect();
        let vectors: Vec<f64> = entries.iter().flat_map(|(_, v)| v.to_vec()).collect();
        EmbeddingModel::from_parts(vocab, 3, vectors.clone(), vectors).unwrap()
    }

    #[test]
    fn extract_groups_errors_with_closest_correct_form() {
        // Neighborhood of "friendship": one error of the seed itself, one
        // correct synonym, one error of that synonym, one distant synonym.
        let model = toy_model(&[
            ("friendship", [1.0, 0.0, 0.0]),
            ("friendlhip", [0.99, 0.1, 0.0]),
            ("affection", [0.9, 0.3, 0.0]),
            ("affetion", [0.85, 0.4, 0.0]),
            ("gratitude", [0.8, 0.5, 0.0]),
        ]);
        let lexicon = lex(&["friendship", "affection", "gratitude"]);
        let seeds = SeedList {
            words: vec![tok("friendship")],
            source: SeedSource::VocabAll,
            min_freq: 1,
            min_length: 1,
        };
        let dataset = extract_pairs(&seeds, &model, &lexicon, 10, 3).unwrap();
        let got: Vec<(String, String)> = dataset
            .pairs
            .iter()
            .map(|p| (p.error_form.to_string(), p.correct_form.to_string()))
            .collect();
        // "affetion" groups with "affection", not with the seed.
        assert_eq!(
            got,
            vec![
                ("affetion".into(), "affection".into()),
                ("friendlhip".into(), "friendship".into()),
            ]
        );
        assert!(dataset.pairs.iter().all(|p| p.distance == 1));
        assert_eq!(dataset.pairs[1].seed_word, tok("friendship"));
    }

    #[test]
    fn extract_drops_pairs_beyond_cutoff() {
        let model = toy_model(&[
            ("friendship", [1.0, 0.0, 0.0]),
            ("fzzzzzzp", [0.99, 0.1, 0.0]),
        ]);
        let lexicon = lex(&["friendship"]);
        let seeds = SeedList {
            words: vec![tok("friendship")],
            source: SeedSource::VocabAll,
            min_freq: 1,
            min_length: 1,
        };
        let dataset = extract_pairs(&seeds, &model, &lexicon, 10, 3).unwrap();
        assert!(dataset.is_empty());
    }

    #[test]
    fn extract_all_correct_neighbors_yields_nothing() {
        let model = toy_model(&[
            ("friendship", [1.0, 0.0, 0.0]),
            ("affection", [0.9, 0.3, 0.0]),
            ("gratitude", [0.8, 0.5, 0.0]),
        ]);
        let lexicon = lex(&["friendship", "affection", "gratitude"]);
        let seeds = SeedList {
            words: vec![tok("friendship")],
            source: SeedSource::VocabAll,
            min_freq: 1,
            min_length: 1,
        };
        let dataset = extract_pairs(&seeds, &model, &lexicon, 10, 3).unwrap();
        assert!(dataset.is_empty());
    }

    #[test]
    fn extract_skips_oov_seeds_and_counts_them() {
        let model = toy_model(&[
            ("friendship", [1.0, 0.0, 0.0]),
            ("friendlhip", [0.99, 0.1, 0.0]),
        ]);
        let lexicon = lex(&["friendship", "gratitude"]);
        let seeds = SeedList {
            words: vec![tok("friendship"), tok("gratitude")],
            source: SeedSource::VocabAll,
            min_freq: 1,
            min_length: 1,
        };
        let dataset = extract_pairs(&seeds, &model, &lexicon, 10, 3).unwrap();
        assert_eq!(dataset.provenance.oov_seeds, 1);
        assert_eq!(dataset.len(), 1);
    }

    #[test]
    fn extract_rejects_empty_seed_list() {
        let model = toy_model(&[("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0])]);
        let seeds = SeedList {
            words: vec![],
            source: SeedSource::VocabAll,
            min_freq: 1,
            min_length: 1,
        };
        let err = extract_pairs(&seeds, &model, &lex(&["a"]), 10, 3).unwrap_err();
        assert!(matches!(err, EmendError::Config(_)));
    }

    #[test]
    fn seed_list_excludes_error_forms_regardless_of_frequency() {
        let model = toy_model(&[("cat", [1.0, 0.0, 0.0]), ("ca7", [0.9, 0.1, 0.0])]);
        let mut table = FrequencyTable::new();
        for _ in 0..150 {
            table.add(tok("cat"));
        }
        for _ in 0..200 {
            table.add(tok("ca7"));
        }
        let seeds = build_seed_list(
            SeedSource::CorpusFreq,
            &model,
            Some(&table),
            None,
            &lex(&["cat"]),
            100,
            1,
        )
        .unwrap();
        assert_eq!(seeds.words, vec![tok("cat")]);
    }

    #[test]
    fn seed_list_min_length_filter() {
        let model = toy_model(&[("cat", [1.0, 0.0, 0.0]), ("tiger", [0.0, 1.0, 0.0])]);
        let seeds = build_seed_list(
            SeedSource::VocabAll,
            &model,
            None,
            None,
            &lex(&["cat", "tiger"]),
            1,
            5,
        )
        .unwrap();
        assert_eq!(seeds.words, vec![tok("tiger")]);
    }

    #[test]
    fn seed_list_external_source_requires_file() {
        let model = toy_model(&[("cat", [1.0, 0.0, 0.0])]);
        let err = build_seed_list(
            SeedSource::ExternalFreq,
            &model,
            None,
            None,
            &lex(&["cat"]),
            1000,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, EmendError::Config(_)));
    }

    #[test]
    fn seed_list_sizes_non_increasing_in_min_length() {
        let entries: Vec<(String, [f64; 3])> = ["a", "an", "the", "cat", "dogs", "tiger", "horse"]
            .iter()
            .enumerate()
            .map(|(i, w)| (w.to_string(), [1.0, i as f64, 0.0]))
            .collect();
        let borrowed: Vec<(&str, [f64; 3])> =
            entries.iter().map(|(w, v)| (w.as_str(), *v)).collect();
        let model = toy_model(&borrowed);
        let lexicon = lex(&["a", "an", "the", "cat", "dogs", "tiger", "horse"]);
        let mut sizes = Vec::new();
        for min_length in 1..=5 {
            let seeds = build_seed_list(
                SeedSource::VocabAll,
                &model,
                None,
                None,
                &lexicon,
                1,
                min_length,
            )
            .unwrap();
            sizes.push(seeds.words.len());
        }
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{sizes:?}");
    }

    #[test]
    fn dataset_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        let dataset = ParallelDataset {
            pairs: vec![ParallelPair {
                error_form: tok("affetion"),
                correct_form: tok("affection"),
                distance: 1,
                seed_word: tok("friendship"),
            }],
            provenance: Provenance {
                seed_source: SeedSource::VocabAll,
                min_freq: 1,
                min_length: 1,
                k: 10,
                max_dist: 3,
                seed_count: 1,
                oov_seeds: 0,
                pair_count: 1,
            },
        };
        write_dataset(&dataset, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.pairs, dataset.pairs);
    }

    #[test]
    fn dataset_read_reports_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        std::fs::write(&path, "# header\nonly\ttwo\n").unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert!(matches!(err, EmendError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        let dataset = ParallelDataset {
            pairs: vec![],
            provenance: Provenance {
                seed_source: SeedSource::VocabAll,
                min_freq: 1,
                min_length: 1,
                k: 10,
                max_dist: 3,
                seed_count: 0,
                oov_seeds: 0,
                pair_count: 0,
            },
        };
        write_dataset(&dataset, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with('#'));
        assert_eq!(text.lines().count(), 1);
        assert!(read_dataset(&path).unwrap().is_empty());
    }
}
