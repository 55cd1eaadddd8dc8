//! Linguistic primitives for substitution-set construction: Penn Treebank
//! tag grouping, Porter stemming, rule-based lemmatization, and the
//! tagged-corpus file format.

mod lemma;
mod porter;

pub use lemma::{lemmatize, IRREGULAR_NOUNS, IRREGULAR_VERBS};
pub use porter::porter_stem;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

/// Coarse POS group a Penn Treebank tag belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PosGroup {
    Conj,
    Det,
    Pron,
    Prep,
    Wh,
    Noun,
    Verb,
    Adj,
    Adv,
    Other,
}

impl PosGroup {
    pub const ALL: [PosGroup; 10] = [
        PosGroup::Conj,
        PosGroup::Det,
        PosGroup::Pron,
        PosGroup::Prep,
        PosGroup::Wh,
        PosGroup::Noun,
        PosGroup::Verb,
        PosGroup::Adj,
        PosGroup::Adv,
        PosGroup::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PosGroup::Conj => "CONJ",
            PosGroup::Det => "DET",
            PosGroup::Pron => "PRON",
            PosGroup::Prep => "PREP",
            PosGroup::Wh => "WH",
            PosGroup::Noun => "NOUN",
            PosGroup::Verb => "VERB",
            PosGroup::Adj => "ADJ",
            PosGroup::Adv => "ADV",
            PosGroup::Other => "OTHER",
        }
    }

    pub fn from_name(s: &str) -> Option<PosGroup> {
        Self::ALL.into_iter().find(|g| g.name() == s)
    }
}

impl fmt::Display for PosGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Map a PTB tag to its POS group. Total: unlisted tags go to `Other`.
pub fn classify_tag(tag: &str) -> PosGroup {
    match tag {
        "CC" => PosGroup::Conj,
        "DT" | "PDT" => PosGroup::Det,
        "PRP" | "PRP$" => PosGroup::Pron,
        "IN" | "TO" | "RP" => PosGroup::Prep,
        "WDT" | "WP" | "WP$" | "WRB" => PosGroup::Wh,
        "NN" | "NNP" | "NNPS" | "NNS" => PosGroup::Noun,
        "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" => PosGroup::Verb,
        "JJ" | "JJR" | "JJS" => PosGroup::Adj,
        "RB" | "RBR" | "RBS" => PosGroup::Adv,
        _ => PosGroup::Other,
    }
}

const KNOWN_TAGS: &[&str] = &[
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP",
    "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB",
    "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB", ".", ",", ":", "``", "''",
    "-LRB-", "-RRB-", "$", "#",
];

/// A surface token with its PTB POS tag ("UNK" when the tag is not a
/// known PTB tag).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedToken {
    pub surface: String,
    pub tag: String,
}

impl TaggedToken {
    pub fn new(surface: &str, tag: &str) -> Self {
        let tag = if KNOWN_TAGS.contains(&tag) { tag } else { "UNK" };
        TaggedToken {
            surface: surface.to_string(),
            tag: tag.to_string(),
        }
    }

    pub fn group(&self) -> PosGroup {
        classify_tag(&self.tag)
    }
}

#[derive(Debug, Error)]
pub enum TaggedParseError {
    #[error("line {line}: expected `token<TAB>TAG`, got {found} fields")]
    BadFieldCount { line: usize, found: usize },
    #[error("line {line}: empty token")]
    EmptyToken { line: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Parse a tagged corpus: one `token<TAB>TAG` per line, blank line
/// separates sentences.
pub fn parse_tagged<R: Read>(reader: R) -> Result<Vec<Vec<TaggedToken>>, TaggedParseError> {
    let mut sentences = Vec::new();
    let mut current: Vec<TaggedToken> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(TaggedParseError::BadFieldCount {
                line: lineno,
                found: fields.len(),
            });
        }
        if fields[0].is_empty() {
            return Err(TaggedParseError::EmptyToken { line: lineno });
        }
        current.push(TaggedToken::new(fields[0], fields[1]));
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

pub fn parse_tagged_corpus(path: &Path) -> Result<Vec<Vec<TaggedToken>>, TaggedParseError> {
    parse_tagged(File::open(path)?)
}
