//! The lexicon oracle: decides whether a word form counts as correctly
//! spelled. Membership is lemma lookup plus a small ordered table of suffix
//! rules, so inflected forms of listed lemmas still pass.
//!
//! No wordlist ships with the crate; any one-lemma-per-line file (a
//! spellchecker dictionary, for instance) slots in.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::corpus::Token;
use crate::error::{EmendError, Result};

/// An ordered suffix rewrite: `suffix` is removed and `replacement` appended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub suffix: String,
    pub replacement: String,
}

impl SuffixRule {
    pub fn new(suffix: impl Into<String>, replacement: impl Into<String>) -> SuffixRule {
        SuffixRule {
            suffix: suffix.into(),
            replacement: replacement.into(),
        }
    }

    /// The rewritten word, if the rule applies and yields a non-empty string.
    fn apply(&self, word: &str) -> Option<String> {
        let stem = word.strip_suffix(self.suffix.as_str())?;
        if stem.is_empty() && self.replacement.is_empty() {
            return None;
        }
        Some(format!("{stem}{}", self.replacement))
    }
}

/// English inflection rules, first match wins. Enough for inflection-tolerant
/// membership; this is not a morphological analyzer.
pub fn default_suffix_rules() -> Vec<SuffixRule> {
    [
        ("s", ""),
        ("es", ""),
        ("ies", "y"),
        ("ed", ""),
        ("ed", "e"),
        ("ing", ""),
        ("ing", "e"),
        ("er", ""),
        ("est", ""),
    ]
    .into_iter()
    .map(|(s, r)| SuffixRule::new(s, r))
    .collect()
}

/// Lemma set plus lemmatization rules.
#[derive(Debug, Clone)]
pub struct Lexicon {
    lemmas: HashSet<String>,
    suffix_rules: Vec<SuffixRule>,
}

impl Lexicon {
    /// Builds a lexicon from lowercase lemmas with the default rule table.
    /// Errors if the effective lemma set is empty.
    pub fn new(lemmas: impl IntoIterator<Item = String>) -> Result<Lexicon> {
        let lemmas: HashSet<String> = lemmas.into_iter().map(|l| l.to_lowercase()).collect();
        if lemmas.is_empty() {
            return Err(EmendError::Config("lexicon has no lemmas".into()));
        }
        Ok(Lexicon {
            lemmas,
            suffix_rules: default_suffix_rules(),
        })
    }

    /// Loads a wordlist: one lemma per line, blank lines and `#` comments
    /// skipped, entries lowercased and deduplicated.
    pub fn load_wordlist(path: &Path) -> Result<Lexicon> {
        let file = File::open(path).map_err(|e| EmendError::io(path, e))?;
        let mut text = String::new();
        BufReader::new(file)
            .read_to_string(&mut text)
            .map_err(|e| EmendError::io(path, e))?;

        let lemmas: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase())
            .collect();
        if lemmas.is_empty() {
            return Err(EmendError::Config(format!(
                "wordlist {} contains no lemmas",
                path.display()
            )));
        }
        Lexicon::new(lemmas)
    }

    /// Replaces the rule table. Rules are applied in the given order.
    pub fn with_suffix_rules(mut self, rules: Vec<SuffixRule>) -> Lexicon {
        self.suffix_rules = rules;
        self
    }

    /// Loads a `suffix<TAB>replacement` rule override file. An absent second
    /// column means the suffix is simply removed.
    pub fn load_suffix_rules(path: &Path) -> Result<Vec<SuffixRule>> {
        let text = std::fs::read_to_string(path).map_err(|e| EmendError::io(path, e))?;
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let suffix = fields.next().unwrap_or("").trim();
            if suffix.is_empty() {
                return Err(EmendError::parse(path, idx + 1, "empty suffix"));
            }
            let replacement = fields.next().unwrap_or("").trim();
            rules.push(SuffixRule::new(suffix, replacement));
        }
        if rules.is_empty() {
            return Err(EmendError::Config(format!(
                "suffix rule file {} contains no rules",
                path.display()
            )));
        }
        Ok(rules)
    }

    pub fn contains_lemma(&self, word: &str) -> bool {
        self.lemmas.contains(word)
    }

    pub fn lemma_count(&self) -> usize {
        self.lemmas.len()
    }

    /// Applies the first suffix rule whose output is in the lemma set;
    /// returns the word unchanged when no rule lands.
    pub fn lemmatize(&self, word: &Token) -> Token {
        if self.lemmas.contains(word.as_str()) {
            return word.clone();
        }
        for rule in &self.suffix_rules {
            if let Some(candidate) = rule.apply(word.as_str()) {
                if self.lemmas.contains(&candidate) {
                    // Ill-formed rule outputs (whitespace, uppercase) are
                    // treated as non-matches rather than panics.
                    if let Some(lemma) = Token::new(candidate) {
                        return lemma;
                    }
                }
            }
        }
        word.clone()
    }

    /// True iff the word or its lemma is listed.
    pub fn is_correct(&self, word: &Token) -> bool {
        self.lemmas.contains(word.as_str())
            || self.lemmas.contains(self.lemmatize(word).as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    fn lex(words: &[&str]) -> Lexicon {
        Lexicon::new(words.iter().map(|w| w.to_string())).unwrap()
    }

    #[test]
    fn load_wordlist_dedups_and_skips_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("words.txt");
        std::fs::write(&path, "# header\n\nCat\ncat\ndog\n").unwrap();
        let lexicon = Lexicon::load_wordlist(&path).unwrap();
        assert_eq!(lexicon.lemma_count(), 2);
        assert!(lexicon.contains_lemma("cat"));
        assert!(lexicon.contains_lemma("dog"));
    }

    #[test]
    fn load_wordlist_missing_file() {
        let err = Lexicon::load_wordlist(Path::new("/nonexistent/words.txt")).unwrap_err();
        assert!(matches!(err, EmendError::Io { .. }));
    }

    #[test]
    fn load_wordlist_empty_effective_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        std::fs::write(&path, "# only a comment\n\n").unwrap();
        let err = Lexicon::load_wordlist(&path).unwrap_err();
        assert!(matches!(err, EmendError::Config(_)));
    }

    #[test]
    fn lemmatize_plural() {
        let lexicon = lex(&["cat"]);
        assert_eq!(lexicon.lemmatize(&tok("cats")), tok("cat"));
    }

    #[test]
    fn lemmatize_identity_on_lemma() {
        let lexicon = lex(&["cat"]);
        assert_eq!(lexicon.lemmatize(&tok("cat")), tok("cat"));
    }

    #[test]
    fn lemmatize_custom_rule_table() {
        let lexicon = lex(&["run"]).with_suffix_rules(vec![SuffixRule::new("nning", "n")]);
        assert_eq!(lexicon.lemmatize(&tok("running")), tok("run"));
    }

    #[test]
    fn lemmatize_first_matching_rule_wins() {
        // "moved": -s no, -es no, -ies no, -ed -> "mov" (absent), -ed -> "move".
        let lexicon = lex(&["move"]);
        assert_eq!(lexicon.lemmatize(&tok("moved")), tok("move"));
    }

    #[test]
    fn is_correct_direct_member() {
        assert!(lex(&["friendship"]).is_correct(&tok("friendship")));
    }

    #[test]
    fn is_correct_rejects_error_form() {
        assert!(!lex(&["friendship", "affection"]).is_correct(&tok("friendlhip")));
    }

    #[test]
    fn is_correct_via_lemmatization() {
        assert!(lex(&["cat"]).is_correct(&tok("cats")));
    }

    #[test]
    fn hyphen_fragment_is_error_unless_listed() {
        assert!(!lex(&["friend"]).is_correct(&tok("friend-")));
    }

    #[test]
    fn rule_never_produces_empty_string() {
        // "s" with rule s -> "" would yield "", which must not apply.
        let lexicon = lex(&["s"]);
        assert_eq!(lexicon.lemmatize(&tok("s")), tok("s"));
        assert!(lexicon.is_correct(&tok("s")));
    }

    proptest! {
        // lemmatize returns the word itself or a listed lemma.
        #[test]
        fn lemmatize_closed_over_lemmas(word in "[a-z]{1,10}") {
            let lexicon = lex(&["cat", "dog", "move", "run"]);
            let token = tok(&word);
            let lemma = lexicon.lemmatize(&token);
            prop_assert!(lemma == token || lexicon.contains_lemma(lemma.as_str()));
        }

        // Adding lemmas never flips is_correct from true to false.
        #[test]
        fn adding_lemmas_is_monotone(word in "[a-z]{1,8}", extra in "[a-z]{1,8}") {
            let base = lex(&["cat", "dog"]);
            let token = tok(&word);
            let before = base.is_correct(&token);
            let grown = lex(&["cat", "dog", &extra]);
            if before {
                prop_assert!(grown.is_correct(&token));
            }
        }
    }
}
