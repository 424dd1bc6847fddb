//! Evaluation harness: gold-standard scoring with the Correct /
//! False positive / No output metric triple, a configurable OCR-noise
//! generator for desk-scale end-to-end validation, and the report formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{SentenceStream, Token};
use crate::corrector::Correction;
use crate::error::{EmendError, Result};
use crate::lexicon::Lexicon;

/// One gold-standard item: an observed erroneous form and its correction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GoldPair {
    pub erroneous: Token,
    pub expected: Token,
}

/// Reads a `erroneous<TAB>expected` gold file ('#' comments allowed),
/// enforcing the invariants: the two forms differ and the expected form
/// passes the lexicon oracle.
pub fn read_gold(path: &Path, lex: &Lexicon) -> Result<Vec<GoldPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| EmendError::io(path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(EmendError::parse(path, lineno, "expected erroneous<TAB>expected"));
        }
        let erroneous = Token::new(fields[0])
            .ok_or_else(|| EmendError::parse(path, lineno, "invalid erroneous form"))?;
        let expected = Token::new(fields[1])
            .ok_or_else(|| EmendError::parse(path, lineno, "invalid expected form"))?;
        if erroneous == expected {
            return Err(EmendError::parse(path, lineno, "erroneous form equals expected form"));
        }
        if !lex.is_correct(&expected) {
            return Err(EmendError::parse(
                path,
                lineno,
                format!("expected form {expected:?} fails the lexicon oracle"),
            ));
        }
        pairs.push(GoldPair { erroneous, expected });
    }
    Ok(pairs)
}

pub fn write_gold(pairs: &[GoldPair], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| EmendError::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# erroneous\texpected").map_err(|e| EmendError::io(path, e))?;
    for pair in pairs {
        writeln!(w, "{}\t{}", pair.erroneous, pair.expected).map_err(|e| EmendError::io(path, e))?;
    }
    w.flush().map_err(|e| EmendError::io(path, e))
}

/// Classification of one evaluated pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Output equals the gold correction.
    Correct,
    /// Output is a valid word but not the gold correction.
    FalsePositive,
    /// No output, or an output failing the lexicon oracle.
    NoOutput,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItemReport {
    pub input: String,
    pub expected: String,
    pub output: Option<String>,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub outcome: Outcome,
}

/// The metric triple over a gold set, plus per-item records.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub n: usize,
    /// Rate of exact corrections.
    pub correct: f64,
    /// Rate of valid-but-wrong corrections.
    pub false_positive: f64,
    /// Rate of pairs with no usable output.
    pub no_output: f64,
    pub items: Vec<ItemReport>,
}

impl EvaluationReport {
    fn from_items(items: Vec<ItemReport>) -> EvaluationReport {
        let n = items.len();
        let count = |o: Outcome| items.iter().filter(|i| i.outcome == o).count();
        EvaluationReport {
            n,
            correct: count(Outcome::Correct) as f64 / n as f64,
            false_positive: count(Outcome::FalsePositive) as f64 / n as f64,
            no_output: count(Outcome::NoOutput) as f64 / n as f64,
            items,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| EmendError::io(path, e))
    }

    /// Plain table with the familiar column layout.
    pub fn human_table(&self, label: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>8} {:>15} {:>10}\n",
            "source", "Correct", "False positive", "No output"
        ));
        out.push_str(&format!(
            "{:<16} {:>8.3} {:>15.3} {:>10.3}\n",
            label, self.correct, self.false_positive, self.no_output
        ));
        out
    }
}

/// Scores a corrector against the gold set. Every pair lands in exactly one
/// of the three outcome classes; rates are class counts over n.
pub fn evaluate<F>(gold: &[GoldPair], correct_fn: F, lex: &Lexicon) -> Result<EvaluationReport>
where
    F: Fn(&Token) -> Correction + Sync,
{
    if gold.is_empty() {
        return Err(EmendError::Config("gold set is empty".into()));
    }
    let items: Vec<ItemReport> = gold
        .par_iter()
        .map(|pair| {
            let correction = correct_fn(&pair.erroneous);
            let outcome = match &correction.output {
                Some(output) if *output == pair.expected => Outcome::Correct,
                Some(output) if lex.is_correct(output) => Outcome::FalsePositive,
                _ => Outcome::NoOutput,
            };
            ItemReport {
                input: pair.erroneous.to_string(),
                expected: pair.expected.to_string(),
                output: correction.output.as_ref().map(|t| t.to_string()),
                method: correction.method.as_str().to_string(),
                rank: correction.candidate_rank,
                outcome,
            }
        })
        .collect();
    Ok(EvaluationReport::from_items(items))
}

/// One weighted character(-bigram) confusion.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRule {
    pub pattern: String,
    pub replacement: String,
    pub weight: f64,
}

impl NoiseRule {
    pub fn new(pattern: &str, replacement: &str, weight: f64) -> NoiseRule {
        NoiseRule {
            pattern: pattern.into(),
            replacement: replacement.into(),
            weight,
        }
    }
}

/// Substitution table plus per-token corruption probability, standing in for
/// the systematic confusions an OCR engine makes on historical type.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub rules: Vec<NoiseRule>,
    pub corruption_prob: f64,
}

impl NoiseModel {
    /// Long-s era confusions at the given per-token corruption probability.
    pub fn default_confusions(corruption_prob: f64) -> NoiseModel {
        NoiseModel {
            rules: vec![
                NoiseRule::new("s", "f", 1.0),
                NoiseRule::new("f", "s", 1.0),
                NoiseRule::new("sh", "lh", 1.0),
                NoiseRule::new("sh", "ih", 1.0),
                NoiseRule::new("e", "c", 1.0),
                NoiseRule::new("c", "e", 1.0),
                NoiseRule::new("rn", "m", 1.0),
                NoiseRule::new("li", "h", 1.0),
            ],
            corruption_prob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.corruption_prob) {
            return Err(EmendError::Config("corruption probability must lie in [0, 1]".into()));
        }
        for rule in &self.rules {
            if rule.pattern.is_empty() || rule.replacement.is_empty() {
                return Err(EmendError::Config(
                    "noise rule patterns and replacements must be non-empty".into(),
                ));
            }
            if !(rule.weight > 0.0) || !rule.weight.is_finite() {
                return Err(EmendError::Config("noise rule weights must be positive".into()));
            }
        }
        Ok(())
    }

    /// Reads `pattern<TAB>replacement<TAB>weight` rules; a missing weight
    /// defaults to 1.
    pub fn from_tsv(path: &Path, corruption_prob: f64) -> Result<NoiseModel> {
        let text = std::fs::read_to_string(path).map_err(|e| EmendError::io(path, e))?;
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 {
                return Err(EmendError::parse(path, lineno, "expected pattern<TAB>replacement"));
            }
            let weight = match fields.get(2) {
                Some(w) => w
                    .parse()
                    .map_err(|_| EmendError::parse(path, lineno, "invalid weight"))?,
                None => 1.0,
            };
            rules.push(NoiseRule::new(fields[0], fields[1], weight));
        }
        let model = NoiseModel {
            rules,
            corruption_prob,
        };
        model.validate()?;
        Ok(model)
    }

    /// Applies one weighted substitution among all rule occurrences in the
    /// token. Returns None when no rule matches.
    fn corrupt_token(&self, token: &Token, rng: &mut ChaCha8Rng) -> Option<Token> {
        let text = token.as_str();
        let mut occurrences: Vec<(usize, &NoiseRule)> = Vec::new();
        for rule in &self.rules {
            for (pos, _) in text.match_indices(rule.pattern.as_str()) {
                occurrences.push((pos, rule));
            }
        }
        if occurrences.is_empty() {
            return None;
        }
        let total: f64 = occurrences.iter().map(|(_, r)| r.weight).sum();
        let mut draw = rng.random::<f64>() * total;
        let mut chosen = occurrences.len() - 1;
        for (i, (_, rule)) in occurrences.iter().enumerate() {
            draw -= rule.weight;
            if draw <= 0.0 {
                chosen = i;
                break;
            }
        }
        let (pos, rule) = occurrences[chosen];
        let mut corrupted = String::with_capacity(text.len());
        corrupted.push_str(&text[..pos]);
        corrupted.push_str(&rule.replacement);
        corrupted.push_str(&text[pos + rule.pattern.len()..]);
        Token::new(corrupted)
    }
}

/// Corrupts a clean stream token by token. Every corrupted token whose
/// source passes the lexicon oracle, differs from its source and fails the
/// oracle itself becomes a gold pair; the gold list is deduplicated over
/// (erroneous, expected) types and sorted. Deterministic in the seed.
pub fn synthesize_corpus(
    clean: &SentenceStream,
    noise: &NoiseModel,
    lex: &Lexicon,
    seed: u64,
) -> Result<(SentenceStream, Vec<GoldPair>)> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy: Vec<Vec<Token>> = Vec::new();
    let mut gold: Vec<GoldPair> = Vec::new();

    clean.for_each(|sentence| {
        let mut out = Vec::with_capacity(sentence.len());
        for token in sentence {
            let corrupt = rng.random::<f64>() < noise.corruption_prob;
            let mut emitted = token.clone();
            if corrupt {
                if let Some(corrupted) = noise.corrupt_token(token, &mut rng) {
                    if corrupted != *token
                        && lex.is_correct(token)
                        && !lex.is_correct(&corrupted)
                    {
                        gold.push(GoldPair {
                            erroneous: corrupted.clone(),
                            expected: token.clone(),
                        });
                    }
                    emitted = corrupted;
                }
            }
            out.push(emitted);
        }
        noisy.push(out);
    })?;

    gold.sort();
    gold.dedup();
    Ok((SentenceStream::in_memory(noisy), gold))
}

/// How the clean-text sampler distributes words.
#[derive(Debug, Clone)]
pub struct TextShape {
    /// Zipf exponent of the global rank-frequency curve.
    pub zipf_exponent: f64,
    /// Tokens per line.
    pub sentence_len: usize,
    /// Distinct successor words in each word's transition distribution.
    /// Sentences are sampled from this sparse bigram chain, which gives
    /// every word the characteristic context signature embedding-based
    /// extraction relies on.
    pub successors: usize,
    /// Probability of following the chain rather than drawing a fresh word
    /// from the global distribution.
    pub chain_weight: f64,
}

impl Default for TextShape {
    fn default() -> TextShape {
        TextShape {
            zipf_exponent: 1.0,
            sentence_len: 10,
            successors: 12,
            chain_weight: 0.85,
        }
    }
}

struct CumulativeDist {
    word_ids: Vec<usize>,
    cumulative: Vec<f64>,
    total: f64,
}

impl CumulativeDist {
    fn new(weighted: impl Iterator<Item = (usize, f64)>) -> CumulativeDist {
        let mut word_ids = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (id, w) in weighted {
            total += w;
            word_ids.push(id);
            cumulative.push(total);
        }
        CumulativeDist {
            word_ids,
            cumulative,
            total,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let draw = rng.random::<f64>() * self.total;
        let idx = self
            .cumulative
            .partition_point(|&c| c <= draw)
            .min(self.word_ids.len() - 1);
        self.word_ids[idx]
    }
}

/// Samples a token stream from a wordlist: a sparse seeded bigram chain over
/// globally Zipf-distributed words (rank r gets weight 1/(r+1)^s). Each word
/// transitions to a small fixed successor set, so words acquire distinct
/// co-occurrence signatures. Deterministic in the seed.
pub fn generate_clean_text(
    wordlist: &[Token],
    n_tokens: usize,
    shape: &TextShape,
    seed: u64,
) -> Result<SentenceStream> {
    if wordlist.is_empty() {
        return Err(EmendError::Config("wordlist is empty".into()));
    }
    if shape.sentence_len == 0 {
        return Err(EmendError::Config("sentence length must be positive".into()));
    }
    if shape.successors == 0 {
        return Err(EmendError::Config("successor count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&shape.chain_weight) {
        return Err(EmendError::Config("chain weight must lie in [0, 1]".into()));
    }

    let weights: Vec<f64> = (0..wordlist.len())
        .map(|rank| 1.0 / ((rank + 1) as f64).powf(shape.zipf_exponent))
        .collect();
    let global = CumulativeDist::new(weights.iter().enumerate().map(|(i, &w)| (i, w)));

    // Fixed successor sets, drawn once from the global distribution per
    // word; within a set, earlier draws get higher weight.
    let mut chain_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC4A1_4C4A_14C4_A14C);
    let chain: Vec<CumulativeDist> = (0..wordlist.len())
        .map(|_| {
            let mut picked = Vec::with_capacity(shape.successors);
            while picked.len() < shape.successors.min(wordlist.len()) {
                let id = global.sample(&mut chain_rng);
                if !picked.contains(&id) {
                    picked.push(id);
                }
            }
            CumulativeDist::new(
                picked
                    .into_iter()
                    .enumerate()
                    .map(|(j, id)| (id, 1.0 / (j + 1) as f64)),
            )
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::with_capacity(n_tokens.div_ceil(shape.sentence_len));
    let mut current = Vec::with_capacity(shape.sentence_len);
    let mut previous: Option<usize> = None;
    for _ in 0..n_tokens {
        let id = match previous {
            Some(prev) if rng.random::<f64>() < shape.chain_weight => chain[prev].sample(&mut rng),
            _ => global.sample(&mut rng),
        };
        previous = Some(id);
        current.push(wordlist[id].clone());
        if current.len() == shape.sentence_len {
            sentences.push(std::mem::take(&mut current));
            previous = None;
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(SentenceStream::in_memory(sentences))
}

/// Writes a sentence stream as plain text, one sentence per line.
pub fn write_corpus(stream: &SentenceStream, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| EmendError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut failure = None;
    stream.for_each(|sentence| {
        if failure.is_some() {
            return;
        }
        let line: Vec<&str> = sentence.iter().map(|t| t.as_str()).collect();
        if let Err(e) = writeln!(w, "{}", line.join(" ")) {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(EmendError::io(path, e));
    }
    w.flush().map_err(|e| EmendError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::Method;

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    fn lex(words: &[&str]) -> Lexicon {
        Lexicon::new(words.iter().map(|w| w.to_string())).unwrap()
    }

    fn gold(pairs: &[(&str, &str)]) -> Vec<GoldPair> {
        pairs
            .iter()
            .map(|(e, c)| GoldPair {
                erroneous: tok(e),
                expected: tok(c),
            })
            .collect()
    }

    fn table_corrector<'a>(
        mapping: &'a [(&'a str, Option<&'a str>)],
    ) -> impl Fn(&Token) -> Correction + Sync + 'a {
        move |word: &Token| {
            let output = mapping
                .iter()
                .find(|(from, _)| *from == word.as_str())
                .and_then(|(_, to)| to.map(|t| tok(t)));
            Correction {
                input: word.clone(),
                output,
                method: Method::Nmt,
                candidate_rank: None,
            }
        }
    }

    #[test]
    fn evaluate_arithmetic() {
        let lexicon = lex(&["cat", "dog", "sun", "map", "hat"]);
        let pairs = gold(&[("cqt", "cat"), ("dqg", "dog"), ("sqn", "sun"), ("mqp", "map")]);
        // 2 exact, 1 wrong-but-valid, 1 none.
        let corrector = table_corrector(&[
            ("cqt", Some("cat")),
            ("dqg", Some("dog")),
            ("sqn", Some("hat")),
            ("mqp", None),
        ]);
        let report = evaluate(&pairs, corrector, &lexicon).unwrap();
        assert_eq!(report.n, 4);
        assert!((report.correct - 0.50).abs() < 1e-12);
        assert!((report.false_positive - 0.25).abs() < 1e-12);
        assert!((report.no_output - 0.25).abs() < 1e-12);
    }

    #[test]
    fn evaluate_perfect_corrector() {
        let lexicon = lex(&["cat", "dog"]);
        let pairs = gold(&[("cqt", "cat"), ("dqg", "dog")]);
        let corrector = table_corrector(&[("cqt", Some("cat")), ("dqg", Some("dog"))]);
        let report = evaluate(&pairs, corrector, &lexicon).unwrap();
        assert_eq!((report.correct, report.false_positive, report.no_output), (1.0, 0.0, 0.0));
    }

    #[test]
    fn evaluate_output_failing_lexicon_counts_as_no_output() {
        let lexicon = lex(&["cat"]);
        let pairs = gold(&[("cqt", "cat")]);
        let corrector = table_corrector(&[("cqt", Some("zzz"))]);
        let report = evaluate(&pairs, corrector, &lexicon).unwrap();
        assert_eq!(report.no_output, 1.0);
    }

    #[test]
    fn evaluate_empty_gold_is_config_error() {
        let lexicon = lex(&["cat"]);
        let corrector = table_corrector(&[]);
        assert!(matches!(
            evaluate(&[], corrector, &lexicon),
            Err(EmendError::Config(_))
        ));
    }

    #[test]
    fn rates_partition_and_sum_to_one() {
        let lexicon = lex(&["cat", "dog", "sun", "hat", "map"]);
        let pairs = gold(&[
            ("cqt", "cat"),
            ("dqg", "dog"),
            ("sqn", "sun"),
            ("hqt", "hat"),
            ("mqp", "map"),
        ]);
        let corrector = table_corrector(&[
            ("cqt", Some("cat")),
            ("dqg", Some("cat")),
            ("sqn", None),
            ("hqt", Some("hat")),
            ("mqp", Some("zzz")),
        ]);
        let report = evaluate(&pairs, corrector, &lexicon).unwrap();
        let sum = report.correct + report.false_positive + report.no_output;
        assert!((sum - 1.0).abs() < 1e-9);
        // Partition: outcome counts add up to n.
        let counts = [Outcome::Correct, Outcome::FalsePositive, Outcome::NoOutput]
            .iter()
            .map(|&o| report.items.iter().filter(|i| i.outcome == o).count())
            .sum::<usize>();
        assert_eq!(counts, report.n);
    }

    /// Reference-row formatting check: 116/57/27 of 200 must render as the
    /// familiar 0.580 / 0.285 / 0.135 triple in both report formats.
    #[test]
    fn report_formats_reference_row() {
        let lexicon: Vec<String> = (0..200).map(|i| format!("word{i:03}")).collect();
        let lexicon = Lexicon::new(lexicon).unwrap();
        let pairs: Vec<GoldPair> = (0..200)
            .map(|i| GoldPair {
                erroneous: tok(&format!("wqrd{i:03}")),
                expected: tok(&format!("word{i:03}")),
            })
            .collect();
        let corrector = move |word: &Token| {
            let i: usize = word.as_str()[4..].parse().unwrap();
            let output = if i < 116 {
                Some(tok(&format!("word{i:03}")))
            } else if i < 116 + 57 {
                Some(tok(&format!("word{:03}", (i + 1) % 200)))
            } else {
                None
            };
            Correction {
                input: word.clone(),
                output,
                method: Method::Nmt,
                candidate_rank: None,
            }
        };
        let report = evaluate(&pairs, corrector, &lexicon).unwrap();
        assert!((report.correct - 0.580).abs() < 1e-12);
        assert!((report.false_positive - 0.285).abs() < 1e-12);
        assert!((report.no_output - 0.135).abs() < 1e-12);

        let json = report.to_json();
        assert!(json.contains("\"n\": 200"), "{json}");
        assert!(json.contains("\"correct\": 0.58"), "{json}");
        assert!(json.contains("\"false_positive\": 0.285"), "{json}");
        assert!(json.contains("\"no_output\": 0.135"), "{json}");

        let table = report.human_table("gold");
        assert!(table.contains("Correct"), "{table}");
        assert!(table.contains("False positive"), "{table}");
        assert!(table.contains("No output"), "{table}");
        assert!(table.contains("0.580") && table.contains("0.285") && table.contains("0.135"));
    }

    #[test]
    fn zero_probability_noise_is_identity() {
        let lexicon = lex(&["the", "ship", "sails"]);
        let clean = SentenceStream::from_text("the ship sails\n");
        let noise = NoiseModel::default_confusions(0.0);
        let (noisy, gold) = synthesize_corpus(&clean, &noise, &lexicon, 7).unwrap();
        assert_eq!(
            noisy.collect_sentences().unwrap(),
            clean.collect_sentences().unwrap()
        );
        assert!(gold.is_empty());
    }

    #[test]
    fn full_probability_substitution_applies_rules() {
        let lexicon = lex(&["friendship"]);
        let clean = SentenceStream::from_text("friendship friendship friendship friendship\n");
        let noise = NoiseModel {
            rules: vec![NoiseRule::new("s", "f", 1.0)],
            corruption_prob: 1.0,
        };
        let (noisy, gold) = synthesize_corpus(&clean, &noise, &lexicon, 3).unwrap();
        let sentences = noisy.collect_sentences().unwrap();
        // "friendship" has exactly one applicable site, so every token
        // becomes "friendfhip".
        for token in &sentences[0] {
            assert_eq!(token.as_str(), "friendfhip");
        }
        assert_eq!(gold.len(), 1);
        for pair in &gold {
            assert_eq!(pair.expected, tok("friendship"));
            assert!(crate::extraction::levenshtein(
                pair.erroneous.as_str(),
                pair.expected.as_str()
            ) >= 1);
        }
    }

    #[test]
    fn synthesis_is_deterministic_in_seed() {
        let lexicon = lex(&["the", "ship", "sails", "fast", "horse", "cart"]);
        let clean = generate_clean_text(
            &["the", "ship", "sails", "fast", "horse", "cart"]
                .iter()
                .map(|w| tok(w))
                .collect::<Vec<_>>(),
            500,
            &TextShape {
                sentence_len: 8,
                ..TextShape::default()
            },
            11,
        )
        .unwrap();
        let noise = NoiseModel::default_confusions(0.3);
        let (n1, g1) = synthesize_corpus(&clean, &noise, &lexicon, 42).unwrap();
        let (n2, g2) = synthesize_corpus(&clean, &noise, &lexicon, 42).unwrap();
        assert_eq!(n1.collect_sentences().unwrap(), n2.collect_sentences().unwrap());
        assert_eq!(g1, g2);
        // A different seed corrupts different token instances.
        let (n3, _) = synthesize_corpus(&clean, &noise, &lexicon, 43).unwrap();
        assert_ne!(
            n1.collect_sentences().unwrap(),
            n3.collect_sentences().unwrap()
        );
    }

    #[test]
    fn gold_pairs_source_must_pass_lexicon() {
        // "zzs" is not a lexicon word: corrupting it produces no gold pair.
        let lexicon = lex(&["ship"]);
        let clean = SentenceStream::from_text("zzs zzs zzs\n");
        let noise = NoiseModel {
            rules: vec![NoiseRule::new("s", "f", 1.0)],
            corruption_prob: 1.0,
        };
        let (_, gold) = synthesize_corpus(&clean, &noise, &lexicon, 5).unwrap();
        assert!(gold.is_empty());
    }

    #[test]
    fn gold_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.tsv");
        let lexicon = lex(&["cat", "dog"]);
        let pairs = gold(&[("cqt", "cat"), ("dqg", "dog")]);
        write_gold(&pairs, &path).unwrap();
        let back = read_gold(&path, &lexicon).unwrap();
        assert_eq!(back, pairs);

        std::fs::write(&path, "cqt\tnotaword\n").unwrap();
        assert!(matches!(
            read_gold(&path, &lexicon),
            Err(EmendError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn clean_text_generation_is_zipfian_and_deterministic() {
        let words: Vec<Token> = (0..50).map(|i| tok(&format!("w{i:02}"))).collect();
        let shape = TextShape::default();
        let s1 = generate_clean_text(&words, 2000, &shape, 3).unwrap();
        let s2 = generate_clean_text(&words, 2000, &shape, 3).unwrap();
        let c1 = s1.collect_sentences().unwrap();
        assert_eq!(c1, s2.collect_sentences().unwrap());
        assert_eq!(c1.iter().map(|s| s.len()).sum::<usize>(), 2000);
        // Rank 0 occurs more often than rank 30.
        let table = crate::corpus::count_frequencies(&s1).unwrap();
        assert!(table.count("w00") > table.count("w30"));
    }
}
