//! Persian-aware text cleanup: symbol repair, character unification,
//! whitespace tokenization and stop-word removal.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use crate::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("../../data/normalization.tsv");
const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_fa.txt");

/// Upper bound on normalization passes before giving up on a fixpoint.
const MAX_PASSES: usize = 8;

/// Character-level rewrite rules applied by [`normalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationTable {
    char_map: BTreeMap<String, String>,
    symbol_strip_set: BTreeSet<char>,
    max_source_chars: usize,
}

impl NormalizationTable {
    /// Builds a table, replacing every replacement string by its own
    /// normal form so that one pass reaches the closure.
    pub fn new(char_map: BTreeMap<String, String>, symbol_strip_set: BTreeSet<char>) -> Result<Self> {
        if char_map.keys().any(String::is_empty) {
            return Err(Error::Config("normalization source must not be empty".into()));
        }
        if let Some(c) = symbol_strip_set.iter().find(|c| c.is_whitespace()) {
            return Err(Error::Config(format!("whitespace {c:?} cannot be a strip symbol")));
        }
        let mut table = NormalizationTable {
            max_source_chars: char_map.keys().map(|k| k.chars().count()).max().unwrap_or(0),
            char_map,
            symbol_strip_set,
        };
        let mut closed = BTreeMap::new();
        for (src, rep) in &table.char_map {
            let mut cur = rep.clone();
            let mut settled = false;
            for _ in 0..MAX_PASSES {
                let next = table.rewrite(&cur);
                if next == cur {
                    settled = true;
                    break;
                }
                cur = next;
            }
            if !settled {
                return Err(Error::Config(format!(
                    "normalization rule for {src:?} never settles (cyclic rewrites)"
                )));
            }
            closed.insert(src.clone(), cur);
        }
        table.char_map = closed;
        Ok(table)
    }

    /// A table that changes nothing except whitespace.
    pub fn empty() -> Self {
        NormalizationTable::new(BTreeMap::new(), BTreeSet::new()).expect("empty table is valid")
    }

    /// The bundled table: Arabic letter forms, digits, zero-width marks,
    /// diacritics and common separator symbols.
    pub fn persian_default() -> Self {
        NormalizationTable::parse(DEFAULT_TABLE).expect("bundled table parses")
    }

    /// Parses `SOURCE<TAB>REPLACEMENT` lines. `#` starts a comment line.
    /// A single-character source mapped to one space joins the strip set.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut strip = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (src, rep) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "expected SOURCE<TAB>REPLACEMENT".into(),
            })?;
            let src = unescape(src).map_err(|msg| Error::Parse { line: line_no, msg })?;
            let rep = unescape(rep).map_err(|msg| Error::Parse { line: line_no, msg })?;
            if src.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "empty source".into(),
                });
            }
            let mut chars = src.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if rep == " " => {
                    strip.insert(c);
                }
                _ => {
                    map.insert(src, rep);
                }
            }
        }
        NormalizationTable::new(map, strip)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        NormalizationTable::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_strip_symbol(&self, c: char) -> bool {
        self.symbol_strip_set.contains(&c)
    }

    /// One left-to-right, longest-match pass of the character map and strip
    /// set. Whitespace is left alone.
    fn rewrite(&self, s: &str) -> String {
        let chars: Vec<char> = s.chars().collect();
        let mut out = String::with_capacity(s.len());
        let mut i = 0;
        let mut key = String::new();
        'outer: while i < chars.len() {
            let longest = self.max_source_chars.min(chars.len() - i);
            for len in (1..=longest).rev() {
                key.clear();
                key.extend(&chars[i..i + len]);
                if let Some(rep) = self.char_map.get(&key) {
                    out.push_str(rep);
                    i += len;
                    continue 'outer;
                }
            }
            let c = chars[i];
            out.push(if self.symbol_strip_set.contains(&c) { ' ' } else { c });
            i += 1;
        }
        out
    }
}

fn unescape(field: &str) -> std::result::Result<String, String> {
    let mut out = String::new();
    let mut it = field.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match it.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('u') => {
                let hex: String = it.by_ref().take(4).collect();
                let code = u32::from_str_radix(&hex, 16)
                    .ok()
                    .filter(|_| hex.len() == 4)
                    .ok_or_else(|| format!("bad \\u escape {hex:?}"))?;
                out.push(char::from_u32(code).ok_or_else(|| format!("invalid code point {code:#x}"))?);
            }
            other => return Err(format!("unknown escape \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Applies the table, turns strip symbols into spaces, collapses whitespace
/// runs and trims. Idempotent.
pub fn normalize(raw: &str, table: &NormalizationTable) -> String {
    let mut cur = collapse_whitespace(&table.rewrite(raw));
    for _ in 1..MAX_PASSES {
        let next = collapse_whitespace(&table.rewrite(&cur));
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Splits normalized text on spaces.
pub fn tokenize(normalized: &str) -> Vec<String> {
    normalized.split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// Ordered, normalized stop words.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StopWordList {
    words: Vec<String>,
    set: HashSet<String>,
}

impl StopWordList {
    /// Builds a list from raw entries, normalizing each one and dropping
    /// empties and duplicates.
    pub fn new<I, S>(words: I, table: &NormalizationTable) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut list = StopWordList::default();
        for w in words {
            for tok in tokenize(&normalize(w.as_ref(), table)) {
                if list.set.insert(tok.clone()) {
                    list.words.push(tok);
                }
            }
        }
        list
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, table: &NormalizationTable) -> Self {
        StopWordList::new(
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')),
            table,
        )
    }

    pub fn load(path: impl AsRef<Path>, table: &NormalizationTable) -> Result<Self> {
        Ok(StopWordList::parse(&std::fs::read_to_string(path)?, table))
    }

    pub fn persian_default(table: &NormalizationTable) -> Self {
        StopWordList::parse(DEFAULT_STOPWORDS, table)
    }

    /// Keeps only the first `n` (most frequent) entries.
    pub fn truncated(&self, n: usize) -> Self {
        StopWordList {
            words: self.words[..n.min(self.words.len())].to_vec(),
            set: self.words.iter().take(n).cloned().collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.set.contains(token)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn remove_stopwords(tokens: &[String], stops: &StopWordList) -> Vec<String> {
    tokens.iter().filter(|t| !stops.contains(t)).cloned().collect()
}

pub fn preprocess(raw: &str, table: &NormalizationTable, stops: &StopWordList) -> Vec<String> {
    remove_stopwords(&tokenize(&normalize(raw, table)), stops)
}

/// A table and stop list bundled for repeated preprocessing.
#[derive(Clone, Debug)]
pub struct Preprocessor {
    pub table: NormalizationTable,
    pub stops: StopWordList,
}

impl Preprocessor {
    pub fn new(table: NormalizationTable, stops: StopWordList) -> Self {
        Preprocessor { table, stops }
    }

    pub fn persian_default() -> Self {
        let table = NormalizationTable::persian_default();
        let stops = StopWordList::persian_default(&table);
        Preprocessor { table, stops }
    }

    pub fn run(&self, raw: &str) -> Vec<String> {
        preprocess(raw, &self.table, &self.stops)
    }
}
