//! Corpus ingestion: sentence normalization, vocabulary construction,
//! annotated-span conversion, and the labeled TSV dataset format.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use regex::Regex;
use thiserror::Error;

pub const UNK: &str = "<unk>";
pub const NUM: &str = "<num>";
pub const PAD: &str = "<pad>";

pub const UNK_ID: usize = 0;
pub const NUM_ID: usize = 1;
pub const PAD_ID: usize = 2;

/// A whitespace-tokenized sentence.
pub type Sentence = Vec<String>;

/// A sentence with one 0/1 grammaticality label per token
/// (1 = correct, 0 = incorrect).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub labels: Vec<u8>,
}

impl LabeledSentence {
    pub fn new(tokens: Vec<String>, labels: Vec<u8>) -> Self {
        assert_eq!(tokens.len(), labels.len(), "token/label length mismatch");
        assert!(labels.iter().all(|&l| l <= 1), "labels must be 0 or 1");
        LabeledSentence { tokens, labels }
    }

    pub fn all_correct(tokens: Vec<String>) -> Self {
        let labels = vec![1; tokens.len()];
        LabeledSentence { tokens, labels }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("annotation parse error at offset {offset}: {msg}")]
    Annotation { offset: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Why a raw line was rejected during normalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejection {
    Empty,
    TooShort { len: usize },
    TooLong { len: usize },
    NoFinalPeriod,
    MatchedFilter { pattern: String },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Empty => write!(f, "empty after normalization"),
            Rejection::TooShort { len } => write!(f, "too short ({len} tokens)"),
            Rejection::TooLong { len } => write!(f, "too long ({len} tokens)"),
            Rejection::NoFinalPeriod => write!(f, "does not end with a period"),
            Rejection::MatchedFilter { pattern } => write!(f, "matched filter /{pattern}/"),
        }
    }
}

/// Normalization rules. `min_len`/`max_len` bound the accepted token count
/// inclusively; the defaults accept 5 < n <= 50.
#[derive(Clone, Debug)]
pub struct NormalizeConfig {
    pub min_len: usize,
    pub max_len: usize,
    pub reject_patterns: Vec<Regex>,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        // formula and citation-bracket filters; both configurable since the
        // exact exclusion rule is a preprocessing choice
        let patterns = [r"\$", r"\\\(", r"\\\[", r"\[[0-9][0-9, ]*\]"];
        NormalizeConfig {
            min_len: 6,
            max_len: 50,
            reject_patterns: patterns.iter().map(|p| Regex::new(p).unwrap()).collect(),
        }
    }
}

fn is_numeric_token(tok: &str) -> bool {
    let t = tok.strip_prefix(['+', '-']).unwrap_or(tok);
    let t = t.strip_suffix('%').unwrap_or(t);
    if t.is_empty() {
        return false;
    }
    let mut seen_digit = false;
    for c in t.chars() {
        match c {
            '0'..='9' => seen_digit = true,
            '.' | ',' => {}
            _ => return false,
        }
    }
    seen_digit
}

/// Normalize one raw line: drop parenthesized spans with their contents,
/// replace numeric tokens with the number marker, then accept only
/// sentences of valid length that end with a period.
pub fn normalize_sentence(raw: &str, rules: &NormalizeConfig) -> Result<Sentence, Rejection> {
    for pat in &rules.reject_patterns {
        if pat.is_match(raw) {
            return Err(Rejection::MatchedFilter {
                pattern: pat.as_str().to_string(),
            });
        }
    }
    let mut tokens: Vec<String> = Vec::new();
    let mut depth = 0usize;
    for tok in raw.split_whitespace() {
        match tok {
            "(" => depth += 1,
            ")" => depth = depth.saturating_sub(1),
            _ if depth > 0 => {}
            _ if is_numeric_token(tok) => tokens.push(NUM.to_string()),
            _ => tokens.push(tok.to_string()),
        }
    }
    if tokens.is_empty() {
        return Err(Rejection::Empty);
    }
    if tokens.last().map(String::as_str) != Some(".") {
        return Err(Rejection::NoFinalPeriod);
    }
    if tokens.len() < rules.min_len {
        return Err(Rejection::TooShort { len: tokens.len() });
    }
    if tokens.len() > rules.max_len {
        return Err(Rejection::TooLong { len: tokens.len() });
    }
    Ok(tokens)
}

/// Token/id bijection with reserved markers at fixed ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    pub min_frequency: usize,
}

impl Vocabulary {
    /// Ids: reserved markers first, then tokens with frequency >=
    /// `min_frequency`, ordered by descending frequency with lexicographic
    /// tie-break.
    pub fn build<'a, I>(corpus: I, min_frequency: usize) -> Result<Vocabulary, CorpusError>
    where
        I: IntoIterator<Item = &'a Sentence>,
    {
        assert!(min_frequency >= 1, "min_frequency must be >= 1");
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for sentence in corpus {
            any = true;
            for tok in sentence {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        if !any {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(tok, n)| *n >= min_frequency && !matches!(*tok, UNK | NUM | PAD))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut id_to_token: Vec<String> =
            vec![UNK.to_string(), NUM.to_string(), PAD.to_string()];
        id_to_token.extend(kept.into_iter().map(|(t, _)| t.to_string()));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            min_frequency,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    /// Non-reserved tokens, in id order.
    pub fn content_tokens(&self) -> &[String] {
        &self.id_to_token[3..]
    }

    pub fn encode(&self, sentence: &[String]) -> Vec<usize> {
        sentence.iter().map(|t| self.id(t)).collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for tok in &self.id_to_token {
            writeln!(w, "{tok}")?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Vocabulary, CorpusError> {
        let mut id_to_token = Vec::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                return Err(CorpusError::Format {
                    line: i + 1,
                    msg: "empty token in vocabulary file".into(),
                });
            }
            id_to_token.push(line);
        }
        if id_to_token.len() < 3
            || id_to_token[UNK_ID] != UNK
            || id_to_token[NUM_ID] != NUM
            || id_to_token[PAD_ID] != PAD
        {
            return Err(CorpusError::Format {
                line: 1,
                msg: format!("vocabulary must start with the reserved markers {UNK}, {NUM}, {PAD}"),
            });
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            min_frequency: 1,
        })
    }

    pub fn write_file(&self, path: &Path) -> std::io::Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn read_file(path: &Path) -> Result<Vocabulary, CorpusError> {
        Self::read(File::open(path)?)
    }
}

/// One segment of an annotated sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnnotatedSpan {
    Plain(String),
    /// Tokens the editor deleted: kept in the output, labeled incorrect.
    Delete(String),
    /// Tokens the editor inserted: dropped from the output.
    Insert(String),
}

/// A sentence carrying inline `<del>`/`<ins>` annotation spans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSpanSentence {
    pub spans: Vec<AnnotatedSpan>,
}

impl AnnotatedSpanSentence {
    /// Parse inline markup. Spans must not nest.
    pub fn parse(line: &str) -> Result<AnnotatedSpanSentence, CorpusError> {
        let mut spans = Vec::new();
        let mut rest = line;
        let mut offset = 0;
        loop {
            let del = rest.find("<del>");
            let ins = rest.find("<ins>");
            let (pos, open, close, is_del) = match (del, ins) {
                (None, None) => {
                    if !rest.trim().is_empty() {
                        spans.push(AnnotatedSpan::Plain(rest.to_string()));
                    }
                    break;
                }
                (Some(d), Some(i)) if d < i => (d, "<del>", "</del>", true),
                (Some(d), None) => (d, "<del>", "</del>", true),
                (_, Some(i)) => (i, "<ins>", "</ins>", false),
            };
            let before = &rest[..pos];
            if !before.trim().is_empty() {
                spans.push(AnnotatedSpan::Plain(before.to_string()));
            }
            let body_start = pos + open.len();
            let body_rest = &rest[body_start..];
            let end = body_rest.find(close).ok_or(CorpusError::Annotation {
                offset: offset + pos,
                msg: format!("unclosed {open}"),
            })?;
            let body = &body_rest[..end];
            if body.contains("<del>") || body.contains("<ins>") {
                return Err(CorpusError::Annotation {
                    offset: offset + body_start,
                    msg: "nested annotation span".into(),
                });
            }
            spans.push(if is_del {
                AnnotatedSpan::Delete(body.to_string())
            } else {
                AnnotatedSpan::Insert(body.to_string())
            });
            let consumed = body_start + end + close.len();
            offset += consumed;
            rest = &rest[consumed..];
        }
        // stray closing tag outside any span
        for span in &spans {
            if let AnnotatedSpan::Plain(text) = span {
                for tag in ["</del>", "</ins>"] {
                    if let Some(p) = text.find(tag) {
                        return Err(CorpusError::Annotation {
                            offset: p,
                            msg: format!("unmatched {tag}"),
                        });
                    }
                }
            }
        }
        Ok(AnnotatedSpanSentence { spans })
    }
}

/// Flatten annotation spans into a labeled sentence: delete-span tokens are
/// kept with label 0, insert-span tokens are dropped, everything else is
/// labeled 1.
pub fn convert_annotated(annotated: &AnnotatedSpanSentence) -> LabeledSentence {
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    for span in &annotated.spans {
        match span {
            AnnotatedSpan::Plain(text) => {
                for tok in text.split_whitespace() {
                    tokens.push(tok.to_string());
                    labels.push(1);
                }
            }
            AnnotatedSpan::Delete(text) => {
                for tok in text.split_whitespace() {
                    tokens.push(tok.to_string());
                    labels.push(0);
                }
            }
            AnnotatedSpan::Insert(_) => {}
        }
    }
    LabeledSentence { tokens, labels }
}

/// Write labeled sentences as TSV: `token<TAB>label` lines, blank line
/// between sentences.
pub fn write_dataset<W: Write>(mut w: W, data: &[LabeledSentence]) -> std::io::Result<()> {
    for (i, sent) in data.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        for (tok, label) in sent.tokens.iter().zip(&sent.labels) {
            writeln!(w, "{tok}\t{label}")?;
        }
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<Vec<LabeledSentence>, CorpusError> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.is_empty() {
            if !tokens.is_empty() {
                out.push(LabeledSentence {
                    tokens: std::mem::take(&mut tokens),
                    labels: std::mem::take(&mut labels),
                });
            }
            continue;
        }
        let (tok, label) = line.split_once('\t').ok_or_else(|| CorpusError::Format {
            line: lineno,
            msg: "expected `token<TAB>label`".into(),
        })?;
        if tok.is_empty() {
            return Err(CorpusError::Format {
                line: lineno,
                msg: "empty token".into(),
            });
        }
        let label = match label {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(CorpusError::Format {
                    line: lineno,
                    msg: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        };
        tokens.push(tok.to_string());
        labels.push(label);
    }
    if !tokens.is_empty() {
        out.push(LabeledSentence { tokens, labels });
    }
    Ok(out)
}

pub fn write_dataset_file(path: &Path, data: &[LabeledSentence]) -> std::io::Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), data)
}

pub fn read_dataset_file(path: &Path) -> Result<Vec<LabeledSentence>, CorpusError> {
    read_dataset(File::open(path)?)
}

/// Summary statistics of a labeled dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub incorrect_pct: f64,
    pub vocab_size: usize,
}

pub fn corpus_stats(data: &[LabeledSentence]) -> Result<CorpusStats, CorpusError> {
    if data.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut tokens = 0usize;
    let mut incorrect = 0usize;
    let mut vocab: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for sent in data {
        tokens += sent.len();
        incorrect += sent.labels.iter().filter(|&&l| l == 0).count();
        vocab.extend(sent.tokens.iter().map(String::as_str));
    }
    Ok(CorpusStats {
        sentences: data.len(),
        tokens,
        incorrect_pct: 100.0 * incorrect as f64 / tokens as f64,
        vocab_size: vocab.len(),
    })
}

pub fn read_sentences_file(path: &Path) -> Result<Vec<Sentence>, CorpusError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(line.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}
