//! Arabic text preprocessing: diacritic stripping, date removal,
//! tokenization and stop-word removal, composed in that fixed order.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};

/// Default stop-word list, one token per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_ar.txt");

pub const TATWEEL: char = '\u{0640}';
pub const SUPERSCRIPT_ALEF: char = '\u{0670}';

#[derive(Debug, Error)]
pub enum TextError {
    #[error("strip_diacritics is enabled but the diacritic set is empty")]
    EmptyDiacriticSet,
    #[error("reading stop-word list {path}: {source}")]
    Stoplist { path: String, source: std::io::Error },
}

/// Harakat and Quranic marks U+064B..=U+065F, superscript alef, tatweel.
pub fn default_diacritics() -> BTreeSet<char> {
    let mut set: BTreeSet<char> = ('\u{064B}'..='\u{065F}').collect();
    set.insert(SUPERSCRIPT_ALEF);
    set.insert(TATWEEL);
    set
}

/// Parses a stop-word file body: one token per line, blank lines ignored.
pub fn parse_stoplist(body: &str) -> BTreeSet<String> {
    body.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_owned).collect()
}

pub fn read_stoplist(path: &Path) -> Result<BTreeSet<String>, TextError> {
    let body = std::fs::read_to_string(path)
        .map_err(|source| TextError::Stoplist { path: path.display().to_string(), source })?;
    Ok(parse_stoplist(&body))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    stoplist: BTreeSet<String>,
    pub strip_diacritics: bool,
    pub remove_dates: bool,
    diacritic_codepoints: BTreeSet<char>,
    /// Fold أ إ آ ٱ to ا and ى to ي. Off by default.
    pub fold_alef: bool,
    /// Light prefix/suffix stemming applied after stop-word removal. Off by default.
    pub stem: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig::new(parse_stoplist(DEFAULT_STOPWORDS), true, true, default_diacritics(), false, false)
            .expect("default config is valid")
    }
}

impl PreprocessConfig {
    /// Builds a config, normalizing the stop tokens with the same settings
    /// that will be applied to input text.
    pub fn new(
        stoplist: BTreeSet<String>,
        strip_diacritics: bool,
        remove_dates: bool,
        diacritic_codepoints: BTreeSet<char>,
        fold_alef: bool,
        stem: bool,
    ) -> Result<Self, TextError> {
        if strip_diacritics && diacritic_codepoints.is_empty() {
            return Err(TextError::EmptyDiacriticSet);
        }
        let mut cfg = PreprocessConfig {
            stoplist: BTreeSet::new(),
            strip_diacritics,
            remove_dates,
            diacritic_codepoints,
            fold_alef,
            stem,
        };
        cfg.stoplist = stoplist
            .iter()
            .flat_map(|s| tokenize(&cfg.normalize(s)).into_vec())
            .collect();
        Ok(cfg)
    }

    /// Tokenization only.
    pub fn disabled() -> Self {
        PreprocessConfig::new(BTreeSet::new(), false, false, default_diacritics(), false, false).unwrap()
    }

    pub fn with_stoplist(self, stoplist: BTreeSet<String>) -> Self {
        PreprocessConfig::new(stoplist, self.strip_diacritics, self.remove_dates, self.diacritic_codepoints, self.fold_alef, self.stem)
            .expect("settings already validated")
    }

    pub fn stoplist(&self) -> &BTreeSet<String> {
        &self.stoplist
    }

    pub fn diacritic_codepoints(&self) -> &BTreeSet<char> {
        &self.diacritic_codepoints
    }

    /// Character-level stage: diacritics and optional alef folding.
    pub fn normalize(&self, text: &str) -> String {
        let stripped = if self.strip_diacritics { strip_diacritics(text, &self.diacritic_codepoints) } else { text.to_owned() };
        if self.fold_alef {
            fold_alef(&stripped)
        } else {
            stripped
        }
    }
}

/// Removes every scalar in `set`; everything else is kept in order.
pub fn strip_diacritics(text: &str, set: &BTreeSet<char>) -> String {
    text.chars().filter(|c| !set.contains(c)).collect()
}

pub fn fold_alef(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'أ' | 'إ' | 'آ' | 'ٱ' => 'ا',
            'ى' => 'ي',
            c => c,
        })
        .collect()
}

// Digit classes accept both ASCII and Arabic-Indic digits.
const D: &str = "[0-9٠-٩]";
const YEAR: &str = "(?:1[34][0-9]{2}|19[0-9]{2}|20[0-9]{2}|١[٣٤][٠-٩]{2}|١٩[٠-٩]{2}|٢٠[٠-٩]{2})";
const CONTEXT_WORDS: &[&str] = &[
    "بتاريخ", "وبتاريخ", "تاريخ", "التاريخ", "مواليد", "عام", "العام", "لعام", "سنة", "السنة", "لسنة", "بسنة", "بعام",
];

struct DatePatterns {
    numeric: Regex,
    context_year: Regex,
    year_suffix: Regex,
}

fn date_patterns() -> &'static DatePatterns {
    static PATTERNS: OnceLock<DatePatterns> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        let sep = "[/.\\-]";
        // d/m/y or y/m/d with '/', '-' or '.' separators
        let numeric = format!("(?:{D}{{1,2}}{sep}{D}{{1,2}}{sep}{YEAR}|{YEAR}{sep}{D}{{1,2}}{sep}{D}{{1,2}})");
        let gap = "[^\\p{L}\\p{N}]*";
        let ctx = CONTEXT_WORDS.join("|");
        DatePatterns {
            numeric: Regex::new(&numeric).unwrap(),
            context_year: Regex::new(&format!("(?:{ctx}){gap}(?P<year>{YEAR})")).unwrap(),
            // 1440هـ, 1440 ه, 2020 م
            year_suffix: Regex::new(&format!("(?P<year>{YEAR}){gap}(?:هـ|ه|م)")).unwrap(),
        }
    })
}

fn is_letter_or_digit(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_digit(c: char) -> bool {
    c.is_ascii_digit() || ('٠'..='٩').contains(&c)
}

/// Removes dates and collapses whitespace.
///
/// Patterns, all requiring no digit immediately before or after the match:
/// - numeric `d/m/y` and `y/m/d` with `/`, `-` or `.` separators, where the
///   year is Hijri 13xx-14xx or Gregorian 19xx-20xx;
/// - a bare year following a date context word (تاريخ, عام, سنة, ...) with only
///   non-alphanumeric characters between them;
/// - a bare year followed by an era suffix (هـ, ه, م) that ends the word.
///
/// Text with no match is returned unchanged.
pub fn remove_dates(text: &str) -> String {
    let pats = date_patterns();
    let mut cuts: Vec<(usize, usize)> = Vec::new();

    let prev_char = |pos: usize| text[..pos].chars().next_back();
    let next_char = |pos: usize| text[pos..].chars().next();

    for m in pats.numeric.find_iter(text) {
        if !prev_char(m.start()).is_some_and(is_digit) && !next_char(m.end()).is_some_and(is_digit) {
            cuts.push((m.start(), m.end()));
        }
    }
    for caps in pats.context_year.captures_iter(text) {
        let whole = caps.get(0).unwrap();
        let year = caps.name("year").unwrap();
        if !prev_char(whole.start()).is_some_and(is_letter_or_digit) && !next_char(year.end()).is_some_and(is_digit) {
            cuts.push((year.start(), year.end()));
        }
    }
    for caps in pats.year_suffix.captures_iter(text) {
        let whole = caps.get(0).unwrap();
        let year = caps.name("year").unwrap();
        if !prev_char(year.start()).is_some_and(is_digit) && !next_char(whole.end()).is_some_and(is_letter_or_digit) {
            cuts.push((year.start(), year.end()));
        }
    }
    if cuts.is_empty() {
        return text.to_owned();
    }
    cuts.sort_unstable();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for (s, e) in cuts {
        if e <= pos {
            continue;
        }
        let s = s.max(pos);
        out.push_str(&text[pos..s]);
        out.push(' ');
        pos = e;
    }
    out.push_str(&text[pos..]);
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Ordered list of non-empty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn new() -> Self {
        TokenList(Vec::new())
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.join(sep)
    }

    /// Appends a reserved token that cannot come out of [`tokenize`].
    pub fn push_reserved(&mut self, token: &str) {
        debug_assert!(token.chars().any(is_delimiter));
        self.0.push(token.to_owned());
    }

    pub fn extend(&mut self, other: TokenList) {
        self.0.extend(other.0);
    }
}

impl<S: Into<String>> FromIterator<S> for TokenList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenList(iter.into_iter().map(Into::into).filter(|t: &String| !t.is_empty()).collect())
    }
}

impl<'a> IntoIterator for &'a TokenList {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Whitespace, punctuation, symbols, control and format characters split tokens.
pub fn is_delimiter(c: char) -> bool {
    if c.is_whitespace() {
        return true;
    }
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
            | Control
            | Format
            | LineSeparator
            | ParagraphSeparator
            | SpaceSeparator
    )
}

pub fn tokenize(text: &str) -> TokenList {
    text.split(is_delimiter).filter(|t| !t.is_empty()).collect()
}

pub fn drop_stopwords(tokens: &TokenList, stoplist: &BTreeSet<String>) -> TokenList {
    tokens.iter().filter(|t| !stoplist.contains(*t)).cloned().collect()
}

const PREFIXES: &[&str] = &["وال", "بال", "كال", "فال", "لل", "ال"];
const SUFFIXES: &[&str] = &["ها", "ات", "ون", "ين", "ان", "ية", "هم", "ة"];

/// Light stemmer: strips at most one article prefix and one suffix, keeping
/// at least three letters.
pub fn light_stem(token: &str) -> String {
    let mut s = token;
    for p in PREFIXES {
        if let Some(rest) = s.strip_prefix(p) {
            if rest.chars().count() >= 3 {
                s = rest;
                break;
            }
        }
    }
    for suf in SUFFIXES {
        if let Some(rest) = s.strip_suffix(suf) {
            if rest.chars().count() >= 3 {
                s = rest;
                break;
            }
        }
    }
    s.to_owned()
}

fn date_stop_pass(text: &str, config: &PreprocessConfig) -> TokenList {
    let dated = if config.remove_dates { remove_dates(text) } else { text.to_owned() };
    drop_stopwords(&tokenize(&dated), &config.stoplist)
}

/// Full pipeline: diacritics → dates → tokenize → stop words (→ stem).
///
/// Dropping a stop word can bring a context word next to a year
/// ("عام في 1440"), and cutting one date can expose another, so the date
/// and stop-word stages are repeated on the joined tokens until nothing
/// changes. Each round only deletes characters, so this terminates, and the
/// result is a fixed point of the unstemmed pipeline.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> TokenList {
    let mut tokens = date_stop_pass(&config.normalize(text), config);
    if config.remove_dates {
        loop {
            let again = date_stop_pass(&tokens.join(" "), config);
            if again == tokens {
                break;
            }
            tokens = again;
        }
    }
    if config.stem {
        tokens.iter().map(|t| light_stem(t)).collect()
    } else {
        tokens
    }
}
