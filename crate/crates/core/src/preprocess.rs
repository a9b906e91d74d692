//! Text cleaning and stopword removal.
//!
//! Cleaning applies five rules in order: case folding, URL removal,
//! email-attribute removal (addresses, bare domain suffixes, reply/forward
//! subject prefixes), character filtering to `a-z`, and whitespace collapse.
//! URL and email-attribute rules run on whitespace-delimited runs before
//! character filtering, because filtering erases the `://`, `@` and `:`
//! markers they key on.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_id.txt");

const URL_MARKERS: [&str; 3] = ["http://", "https://", "www."];
const SUBJECT_PREFIXES: [&str; 3] = ["re:", "fw:", "fwd:"];

/// Lowercase `a-z` tokens joined by single spaces, no edge spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CleanText(String);

impl CleanText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Accepts `s` only if it already has the cleaned shape.
    pub fn new(s: &str) -> Option<CleanText> {
        let shaped = s
            .split(' ')
            .all(|t| !t.is_empty() && t.bytes().all(|b| b.is_ascii_lowercase()));
        if s.is_empty() || shaped {
            Some(CleanText(s.to_owned()))
        } else {
            None
        }
    }
}

impl std::fmt::Display for CleanText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where a stopword list came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopwordSource {
    Bundled,
    File(PathBuf),
    Inline,
}

#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
    source: StopwordSource,
}

impl StopwordList {
    /// The bundled Indonesian list.
    pub fn bundled() -> StopwordList {
        Self::parse(BUNDLED_STOPWORDS, StopwordSource::Bundled).expect("bundled stopword list is well-formed")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<StopwordList> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, StopwordSource::File(path.to_path_buf()))
    }

    pub fn from_words<I, S>(words: I) -> Result<StopwordList>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = HashSet::new();
        for w in words {
            set.insert(normalize_entry(w.as_ref())?);
        }
        Ok(StopwordList {
            words: set,
            source: StopwordSource::Inline,
        })
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source: StopwordSource) -> Result<StopwordList> {
        let mut words = HashSet::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            words.insert(normalize_entry(line)?);
        }
        Ok(StopwordList { words, source })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source(&self) -> &StopwordSource {
        &self.source
    }

    /// Entries in sorted order.
    pub fn sorted_words(&self) -> Vec<String> {
        let mut v: Vec<String> = self.words.iter().cloned().collect();
        v.sort();
        v
    }
}

fn normalize_entry(word: &str) -> Result<String> {
    let w = word.trim();
    if w.is_empty() || w.chars().any(char::is_whitespace) {
        return Err(Error::Invalid(format!("stopword entry {word:?} must be a single word")));
    }
    Ok(w.to_lowercase())
}

fn is_url_boundary(run: &str, at: usize) -> bool {
    run[..at].chars().next_back().is_none_or(|c| !c.is_ascii_alphanumeric())
}

/// Cut the run at the first URL marker that starts a new word.
fn strip_url(run: &str) -> &str {
    let cut = URL_MARKERS
        .iter()
        .flat_map(|m| run.match_indices(m).map(|(i, _)| i))
        .filter(|&i| is_url_boundary(run, i))
        .min();
    match cut {
        Some(i) => &run[..i],
        None => run,
    }
}

/// `.com`, `.net`, `.id`: a dot followed by 2-4 ASCII letters.
fn is_domain_suffix(run: &str) -> bool {
    match run.strip_prefix('.') {
        Some(rest) => (2..=4).contains(&rest.len()) && rest.bytes().all(|b| b.is_ascii_lowercase()),
        None => false,
    }
}

fn strip_subject_prefixes(mut run: &str) -> &str {
    'outer: loop {
        for p in SUBJECT_PREFIXES {
            if let Some(rest) = run.strip_prefix(p) {
                run = rest;
                continue 'outer;
            }
        }
        return run;
    }
}

/// Apply the five cleaning rules. Never fails; the result may be empty.
pub fn clean_text(raw: &str) -> CleanText {
    let lower = raw.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for run in lower.split_whitespace() {
        let run = strip_url(run);
        if run.contains('@') || is_domain_suffix(run) {
            continue;
        }
        let run = strip_subject_prefixes(run);
        let start = out.len();
        if start > 0 {
            out.push(' ');
        }
        out.extend(run.chars().filter(char::is_ascii_lowercase));
        if out.len() == start + usize::from(start > 0) {
            out.truncate(start);
        }
    }
    CleanText(out)
}

pub fn tokenize(clean: &CleanText) -> Vec<String> {
    if clean.is_empty() {
        return Vec::new();
    }
    clean.as_str().split(' ').map(str::to_owned).collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stopwords: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stopwords.contains(t)).collect()
}

/// `remove_stopwords(tokenize(clean_text(raw)))`.
pub fn preprocess(raw: &str, stopwords: &StopwordList) -> Vec<String> {
    remove_stopwords(tokenize(&clean_text(raw)), stopwords)
}

/// A stopword list bound to the cleaning rules; the unit shared by training
/// and inference so both see identical preprocessing.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    stopwords: StopwordList,
}

impl Preprocessor {
    pub fn new(stopwords: StopwordList) -> Self {
        Preprocessor { stopwords }
    }

    pub fn stopwords(&self) -> &StopwordList {
        &self.stopwords
    }

    pub fn clean(&self, raw: &str) -> CleanText {
        clean_text(raw)
    }

    pub fn tokens(&self, raw: &str) -> Vec<String> {
        preprocess(raw, &self.stopwords)
    }
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor::new(StopwordList::bundled())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cleans_url_and_punctuation() {
        assert_eq!(
            clean_text("Halo! Kunjungi https://promo.co SEKARANG!!!").as_str(),
            "halo kunjungi sekarang"
        );
    }

    #[test]
    fn empty_is_fixed_point() {
        assert_eq!(clean_text("").as_str(), "");
        assert_eq!(clean_text("   \t\n ").as_str(), "");
    }

    #[test]
    fn strips_prefix_and_address() {
        assert_eq!(
            clean_text("re: Penawaran kirim ke budi@mail.com").as_str(),
            "penawaran kirim ke"
        );
        assert_eq!(clean_text("FWD: RE: rapat").as_str(), "rapat");
        assert_eq!(clean_text("Re:Penawaran").as_str(), "penawaran");
    }

    #[test]
    fn removes_www_and_domain_suffixes() {
        assert_eq!(
            clean_text("cek www.diskon.id sekarang .com .net .id juga").as_str(),
            "cek sekarang juga"
        );
        // five letters is not a suffix
        assert_eq!(clean_text(".hello").as_str(), "hello");
    }

    #[test]
    fn url_marker_must_start_a_word() {
        assert_eq!(clean_text("(https://x.co/a) lihat").as_str(), "lihat");
        assert_eq!(clean_text("awww.wow").as_str(), "awwwwow");
    }

    #[test]
    fn digits_and_non_ascii_letters_dropped() {
        assert_eq!(clean_text("Café 100rb ñandú 2024").as_str(), "caf rb and");
        assert_eq!(clean_text("123 456").as_str(), "");
    }

    #[test]
    fn tokenize_cases() {
        assert_eq!(tokenize(&clean_text("halo dunia")), words(&["halo", "dunia"]));
        assert!(tokenize(&clean_text("")).is_empty());
        assert_eq!(tokenize(&clean_text("a b a")), words(&["a", "b", "a"]));
    }

    #[test]
    fn stopword_removal_cases() {
        let sw = StopwordList::bundled();
        let input = words(&["penawaran", "yang", "luar", "biasa", "dan", "gratis"]);
        assert_eq!(
            remove_stopwords(input, &sw),
            words(&["penawaran", "luar", "biasa", "gratis"])
        );
        let clean = words(&["rapat", "proyek"]);
        assert_eq!(remove_stopwords(clean.clone(), &sw), clean);
        assert!(remove_stopwords(words(&["yang", "dan", "di"]), &sw).is_empty());
    }

    #[test]
    fn pipeline_degenerate_inputs() {
        let sw = StopwordList::bundled();
        assert!(preprocess("https://promo.example.com/klik?id=5", &sw).is_empty());
        assert!(preprocess("Yang dan DI, itu!", &sw).is_empty());
    }

    #[test]
    fn stopword_file_parsing() {
        let sw = StopwordList::parse("# comment\n\nYang\n dan \n", StopwordSource::Inline).unwrap();
        assert_eq!(sw.sorted_words(), words(&["dan", "yang"]));
        assert!(StopwordList::parse("two words\n", StopwordSource::Inline).is_err());
    }

    #[test]
    fn clean_text_shape_check() {
        assert!(CleanText::new("halo dunia").is_some());
        assert!(CleanText::new("").is_some());
        assert!(CleanText::new("halo  dunia").is_none());
        assert!(CleanText::new(" halo").is_none());
        assert!(CleanText::new("Halo").is_none());
    }
}
