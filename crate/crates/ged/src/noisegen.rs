//! Artificial-error generation: substitution sets built from a tagged
//! corpus, plus one-substitution-per-sentence noising in uniform or
//! linguistic mode.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{LabeledSentence, Sentence, Vocabulary};
use crate::lingpipe::{lemmatize, porter_stem, PosGroup, TaggedToken};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("dictionary has {size} tokens; need at least 2 to substitute")]
    DictionaryTooSmall { size: usize },
    #[error("vocabulary has {size} substitutable tokens; need at least 2")]
    VocabularyTooSmall { size: usize },
    #[error("cannot inject an error into an empty sentence")]
    EmptySentence,
    #[error("substitution table line {line}: {msg}")]
    TableFormat { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Index of one substitution set. Closed-class groups share one set per
/// group; nouns/verbs are keyed by lemma; adjectives/adverbs by stem.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubstitutionKey {
    Group(PosGroup),
    Lemma(PosGroup, String),
    Stem(PosGroup, String),
}

impl SubstitutionKey {
    pub fn group(&self) -> PosGroup {
        match self {
            SubstitutionKey::Group(g)
            | SubstitutionKey::Lemma(g, _)
            | SubstitutionKey::Stem(g, _) => *g,
        }
    }

    fn serialize(&self) -> String {
        match self {
            SubstitutionKey::Group(g) => format!("group:{}", g.name()),
            SubstitutionKey::Lemma(g, l) => format!("lemma:{}:{l}", g.name()),
            SubstitutionKey::Stem(g, s) => format!("stem:{}:{s}", g.name()),
        }
    }

    fn parse(s: &str, line: usize) -> Result<SubstitutionKey, NoiseError> {
        let bad = |msg: &str| NoiseError::TableFormat {
            line,
            msg: msg.to_string(),
        };
        let mut parts = s.splitn(3, ':');
        let kind = parts.next().ok_or_else(|| bad("empty key"))?;
        let group = parts
            .next()
            .and_then(PosGroup::from_name)
            .ok_or_else(|| bad("bad or missing POS group"))?;
        match (kind, parts.next()) {
            ("group", None) => Ok(SubstitutionKey::Group(group)),
            ("lemma", Some(l)) => Ok(SubstitutionKey::Lemma(group, l.to_string())),
            ("stem", Some(st)) => Ok(SubstitutionKey::Stem(group, st.to_string())),
            _ => Err(bad("expected group:G, lemma:G:L or stem:G:S")),
        }
    }
}

/// Substitution sets plus the token dictionary they were built from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubstitutionTable {
    sets: BTreeMap<SubstitutionKey, BTreeSet<String>>,
    membership: HashMap<String, Vec<SubstitutionKey>>,
    dictionary: BTreeSet<String>,
}

impl SubstitutionTable {
    /// Process every distinct (token, tag) pair of a tagged corpus:
    /// closed-class tokens join their group set, nouns/verbs their lemma
    /// set, adjectives/adverbs their stem set. All tokens enter the
    /// dictionary.
    pub fn build<'a, I>(tagged: I) -> SubstitutionTable
    where
        I: IntoIterator<Item = &'a Vec<TaggedToken>>,
    {
        let mut table = SubstitutionTable::default();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        for sentence in tagged {
            for tok in sentence {
                if seen.insert((tok.surface.clone(), tok.tag.clone())) {
                    table.insert(tok);
                }
            }
        }
        table
    }

    fn insert(&mut self, tok: &TaggedToken) {
        self.dictionary.insert(tok.surface.clone());
        let group = tok.group();
        let lower = tok.surface.to_lowercase();
        let key = match group {
            PosGroup::Conj | PosGroup::Det | PosGroup::Pron | PosGroup::Prep | PosGroup::Wh => {
                SubstitutionKey::Group(group)
            }
            PosGroup::Noun | PosGroup::Verb => {
                SubstitutionKey::Lemma(group, lemmatize(&lower, group))
            }
            PosGroup::Adj | PosGroup::Adv => SubstitutionKey::Stem(group, porter_stem(&lower)),
            PosGroup::Other => return,
        };
        self.add_member(key, &tok.surface);
    }

    fn add_member(&mut self, key: SubstitutionKey, surface: &str) {
        let set = self.sets.entry(key.clone()).or_default();
        if set.insert(surface.to_string()) {
            self.membership
                .entry(surface.to_string())
                .or_default()
                .push(key);
        }
    }

    pub fn sets(&self) -> impl Iterator<Item = (&SubstitutionKey, &BTreeSet<String>)> {
        self.sets.iter()
    }

    pub fn set(&self, key: &SubstitutionKey) -> Option<&BTreeSet<String>> {
        self.sets.get(key)
    }

    pub fn keys_of(&self, token: &str) -> &[SubstitutionKey] {
        self.membership.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn dictionary(&self) -> &BTreeSet<String> {
        &self.dictionary
    }

    pub fn set_count(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty() && self.dictionary.is_empty()
    }

    /// Per-group count of substitution sets.
    pub fn group_stats(&self) -> BTreeMap<PosGroup, usize> {
        let mut stats = BTreeMap::new();
        for key in self.sets.keys() {
            *stats.entry(key.group()).or_insert(0) += 1;
        }
        stats
    }

    /// One line per set (`kind:group[:key]<TAB>members...`, keys and
    /// members sorted), then the dictionary as a final `dict` line.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (key, members) in &self.sets {
            write!(w, "{}\t", key.serialize())?;
            let members: Vec<&str> = members.iter().map(String::as_str).collect();
            writeln!(w, "{}", members.join(" "))?;
        }
        let dict: Vec<&str> = self.dictionary.iter().map(String::as_str).collect();
        writeln!(w, "dict\t{}", dict.join(" "))?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<SubstitutionTable, NoiseError> {
        let mut table = SubstitutionTable::default();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (key, members) = line.split_once('\t').ok_or(NoiseError::TableFormat {
                line: lineno,
                msg: "expected `key<TAB>members`".into(),
            })?;
            if key == "dict" {
                table
                    .dictionary
                    .extend(members.split_whitespace().map(str::to_string));
                continue;
            }
            let key = SubstitutionKey::parse(key, lineno)?;
            for member in members.split_whitespace() {
                table.add_member(key.clone(), member);
                table.dictionary.insert(member.to_string());
            }
        }
        Ok(table)
    }

    pub fn write_file(&self, path: &Path) -> std::io::Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn read_file(path: &Path) -> Result<SubstitutionTable, NoiseError> {
        Self::read(File::open(path)?)
    }
}

/// How replacements are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMode {
    Uniform,
    Linguistic,
}

/// Configuration for corpus noising. `group_filter`, when set, restricts
/// linguistic-mode substitutions to tokens covered by sets of those groups.
#[derive(Clone, Debug)]
pub struct NoiseConfig {
    pub mode: NoiseMode,
    pub seed: u64,
    pub group_filter: Option<BTreeSet<PosGroup>>,
}

impl NoiseConfig {
    pub fn new(mode: NoiseMode, seed: u64) -> Self {
        NoiseConfig {
            mode,
            seed,
            group_filter: None,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// RNG for sentence `index`, a pure function of (seed, index) so that
/// generation order and sharding cannot change the output.
pub fn sentence_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

fn draw_not_equal<'a, R: Rng>(
    pool: &'a [&'a str],
    original: &str,
    rng: &mut R,
) -> Option<&'a str> {
    // rejection loop as specified; bounded because the pool holds >= 2
    // distinct tokens and at most one equals the original
    if pool.len() < 2 && pool.contains(&original) {
        return None;
    }
    if pool.is_empty() {
        return None;
    }
    loop {
        let cand = pool[rng.gen_range(0..pool.len())];
        if cand != original {
            return Some(cand);
        }
    }
}

/// Substitution sets with at least two members that contain `token`.
fn usable_keys<'a>(table: &'a SubstitutionTable, token: &str) -> Vec<&'a SubstitutionKey> {
    table
        .keys_of(token)
        .iter()
        .filter(|k| table.set(k).is_some_and(|s| s.len() >= 2))
        .collect()
}

fn substitute_linguistic<R: Rng>(
    sentence: &Sentence,
    position: usize,
    table: &SubstitutionTable,
    rng: &mut R,
) -> Result<LabeledSentence, NoiseError> {
    let original = sentence[position].as_str();
    let keys = usable_keys(table, original);
    let replacement = if keys.is_empty() {
        // token outside any multi-member set: fall back to the dictionary
        if table.dictionary().len() < 2 {
            return Err(NoiseError::DictionaryTooSmall {
                size: table.dictionary().len(),
            });
        }
        let pool: Vec<&str> = table.dictionary().iter().map(String::as_str).collect();
        draw_not_equal(&pool, original, rng)
            .ok_or(NoiseError::DictionaryTooSmall { size: pool.len() })?
            .to_string()
    } else {
        // a token may sit in several sets; pick among them uniformly
        let key = keys[rng.gen_range(0..keys.len())];
        let pool: Vec<&str> = table.set(key).unwrap().iter().map(String::as_str).collect();
        draw_not_equal(&pool, original, rng)
            .ok_or(NoiseError::DictionaryTooSmall { size: pool.len() })?
            .to_string()
    };
    Ok(apply_substitution(sentence, position, &replacement))
}

fn apply_substitution(sentence: &Sentence, position: usize, replacement: &str) -> LabeledSentence {
    let mut tokens = sentence.clone();
    tokens[position] = replacement.to_string();
    let mut labels = vec![1u8; tokens.len()];
    labels[position] = 0;
    LabeledSentence { tokens, labels }
}

/// Replace the token at one uniformly random position with a different
/// member of its substitution set (dictionary fallback), labeled 0.
pub fn inject_error_linguistic<R: Rng>(
    sentence: &Sentence,
    table: &SubstitutionTable,
    rng: &mut R,
) -> Result<LabeledSentence, NoiseError> {
    if sentence.is_empty() {
        return Err(NoiseError::EmptySentence);
    }
    let position = rng.gen_range(0..sentence.len());
    substitute_linguistic(sentence, position, table, rng)
}

/// Replace the token at one uniformly random position with a different
/// token drawn uniformly from the vocabulary (reserved markers excluded).
pub fn inject_error_uniform<R: Rng>(
    sentence: &Sentence,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<LabeledSentence, NoiseError> {
    if sentence.is_empty() {
        return Err(NoiseError::EmptySentence);
    }
    let pool: Vec<&str> = vocab.content_tokens().iter().map(String::as_str).collect();
    if pool.len() < 2 {
        return Err(NoiseError::VocabularyTooSmall { size: pool.len() });
    }
    let position = rng.gen_range(0..sentence.len());
    let original = sentence[position].as_str();
    let replacement = draw_not_equal(&pool, original, rng)
        .ok_or(NoiseError::VocabularyTooSmall { size: pool.len() })?;
    Ok(apply_substitution(sentence, position, replacement))
}

/// Noise a whole corpus, one error per sentence. With a group filter,
/// position sampling retries up to the sentence length and then skips the
/// sentence with all-correct labels. Output is a pure function of
/// (corpus, table, config.seed).
pub fn generate_training_set(
    corpus: &[Sentence],
    table: &SubstitutionTable,
    vocab: Option<&Vocabulary>,
    config: &NoiseConfig,
) -> Result<Vec<LabeledSentence>, NoiseError> {
    let mut out = Vec::with_capacity(corpus.len());
    for (index, sentence) in corpus.iter().enumerate() {
        let mut rng = sentence_rng(config.seed, index as u64);
        let labeled = match config.mode {
            NoiseMode::Uniform => {
                let vocab = vocab.expect("uniform mode requires a vocabulary");
                inject_error_uniform(sentence, vocab, &mut rng)?
            }
            NoiseMode::Linguistic => match &config.group_filter {
                None => inject_error_linguistic(sentence, table, &mut rng)?,
                Some(filter) => {
                    if sentence.is_empty() {
                        return Err(NoiseError::EmptySentence);
                    }
                    let mut chosen = None;
                    for _ in 0..sentence.len() {
                        let position = rng.gen_range(0..sentence.len());
                        let token = sentence[position].as_str();
                        if usable_keys(table, token)
                            .iter()
                            .any(|k| filter.contains(&k.group()))
                        {
                            chosen = Some(position);
                            break;
                        }
                    }
                    match chosen {
                        Some(position) => {
                            substitute_linguistic(sentence, position, table, &mut rng)?
                        }
                        None => LabeledSentence::all_correct(sentence.clone()),
                    }
                }
            },
        };
        out.push(labeled);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lingpipe::parse_tagged;

    fn toks(s: &str) -> Sentence {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn table_from(pairs: &[(&str, &str)]) -> SubstitutionTable {
        let sentence: Vec<TaggedToken> = pairs
            .iter()
            .map(|(tok, tag)| TaggedToken::new(tok, tag))
            .collect();
        SubstitutionTable::build(std::iter::once(&sentence))
    }

    #[test]
    fn determiners_share_the_group_set() {
        let table = table_from(&[("an", "DT"), ("a", "DT"), ("this", "DT"), ("these", "DT")]);
        let set = table.set(&SubstitutionKey::Group(PosGroup::Det)).unwrap();
        for t in ["an", "a", "this", "these"] {
            assert!(set.contains(t), "missing {t}");
        }
    }

    #[test]
    fn verb_inflections_share_a_lemma_set() {
        let table = table_from(&[
            ("built", "VBD"),
            ("build", "VB"),
            ("builds", "VBZ"),
            ("building", "VBG"),
        ]);
        let key = SubstitutionKey::Lemma(PosGroup::Verb, "build".into());
        let set = table.set(&key).unwrap();
        assert_eq!(set.len(), 4);
        for t in ["built", "build", "builds", "building"] {
            assert!(set.contains(t));
        }
    }

    #[test]
    fn singleton_set_from_one_token() {
        let table = table_from(&[("the", "DT")]);
        let set = table.set(&SubstitutionKey::Group(PosGroup::Det)).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn adjective_and_adverb_stems_live_in_distinct_sets() {
        let table = table_from(&[("suitably", "RB"), ("suitable", "JJ")]);
        let stem = crate::lingpipe::porter_stem("suitably");
        assert_eq!(stem, crate::lingpipe::porter_stem("suitable"));
        assert!(table
            .set(&SubstitutionKey::Stem(PosGroup::Adv, stem.clone()))
            .is_some());
        assert!(table
            .set(&SubstitutionKey::Stem(PosGroup::Adj, stem))
            .is_some());
        assert_eq!(table.set_count(), 2);
    }

    #[test]
    fn other_group_tokens_enter_only_the_dictionary() {
        let table = table_from(&[(".", "."), ("42", "CD")]);
        assert_eq!(table.set_count(), 0);
        assert!(table.dictionary().contains("."));
        assert!(table.dictionary().contains("42"));
    }

    #[test]
    fn linguistic_injection_prefers_the_matching_set() {
        let table = table_from(&[
            ("an", "DT"),
            ("a", "DT"),
            ("this", "DT"),
            ("these", "DT"),
            ("apple", "NN"),
            ("table", "NN"),
        ]);
        let sentence = toks("There is an apple on the table .");
        // run many seeds; whenever "an" is hit, the replacement must come
        // from the determiner set
        let mut hit = false;
        for seed in 0..200 {
            let mut rng = sentence_rng(seed, 0);
            let labeled = inject_error_linguistic(&sentence, &table, &mut rng).unwrap();
            let pos = labeled.labels.iter().position(|&l| l == 0).unwrap();
            assert_ne!(labeled.tokens[pos], sentence[pos]);
            if sentence[pos] == "an" {
                hit = true;
                assert!(["a", "this", "these"].contains(&labeled.tokens[pos].as_str()));
            }
        }
        assert!(hit, "no seed ever substituted the determiner");
    }

    #[test]
    fn singleton_membership_falls_back_to_dictionary() {
        let table = table_from(&[("the", "DT"), ("apple", "NN"), ("pear", "NN")]);
        let sentence = toks("the");
        for seed in 0..50 {
            let mut rng = sentence_rng(seed, 0);
            let labeled = inject_error_linguistic(&sentence, &table, &mut rng).unwrap();
            assert_ne!(labeled.tokens[0], "the");
            assert!(table.dictionary().contains(&labeled.tokens[0]));
        }
    }

    #[test]
    fn tiny_dictionary_is_an_error() {
        let table = table_from(&[("the", "DT")]);
        let sentence = toks("the");
        let mut rng = sentence_rng(0, 0);
        assert!(matches!(
            inject_error_linguistic(&sentence, &table, &mut rng),
            Err(NoiseError::DictionaryTooSmall { size: 1 })
        ));
    }

    #[test]
    fn same_seed_gives_identical_output() {
        let table = table_from(&[
            ("an", "DT"),
            ("a", "DT"),
            ("bird", "NN"),
            ("birds", "NNS"),
            ("was", "VBD"),
            ("is", "VBZ"),
        ]);
        let corpus = vec![
            toks("an ugly bird was observed ."),
            toks("a bird is here today ."),
        ];
        let config = NoiseConfig::new(NoiseMode::Linguistic, 7);
        let a = generate_training_set(&corpus, &table, None, &config).unwrap();
        let b = generate_training_set(&corpus, &table, None, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_mode_draws_from_vocabulary() {
        let corpus = vec![toks("an ugly bird was observed by the man yesterday .")];
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let mut rng = sentence_rng(3, 0);
        let labeled = inject_error_uniform(&corpus[0], &vocab, &mut rng).unwrap();
        let zeros: Vec<usize> = labeled
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(zeros.len(), 1);
        let pos = zeros[0];
        assert_ne!(labeled.tokens[pos], corpus[0][pos]);
        assert!(vocab.contains(&labeled.tokens[pos]));
        // reserved markers never appear as replacements
        assert!(![crate::corpus::UNK, crate::corpus::NUM, crate::corpus::PAD]
            .contains(&labeled.tokens[pos].as_str()));
    }

    #[test]
    fn group_filter_restricts_substitution_targets() {
        let table = table_from(&[
            ("an", "DT"),
            ("a", "DT"),
            ("bird", "NN"),
            ("birds", "NNS"),
            ("quickly", "RB"),
            ("quick", "JJ"),
        ]);
        let corpus = vec![toks("an bird quickly flies away today .")];
        let mut config = NoiseConfig::new(NoiseMode::Linguistic, 11);
        config.group_filter = Some([PosGroup::Det].into_iter().collect());
        for seed in 0..100 {
            config.seed = seed;
            let out = generate_training_set(&corpus, &table, None, &config).unwrap();
            if let Some(pos) = out[0].labels.iter().position(|&l| l == 0) {
                assert_eq!(corpus[0][pos], "an", "seed {seed} substituted at {pos}");
            }
        }
    }

    #[test]
    fn table_roundtrip_is_byte_identical() {
        let table = table_from(&[
            ("an", "DT"),
            ("a", "DT"),
            ("built", "VBD"),
            ("builds", "VBZ"),
            ("eggs", "NNS"),
            ("egg", "NN"),
            ("of", "IN"),
            ("in", "IN"),
            (".", "."),
        ]);
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let back = SubstitutionTable::read(&buf[..]).unwrap();
        let mut buf2 = Vec::new();
        back.write(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(table.set_count(), back.set_count());
    }

    #[test]
    fn table_build_is_shard_order_independent() {
        let text = "an\tDT\na\tDT\nbirds\tNNS\n\nbird\tNN\nflies\tVBZ\nquick\tJJ\n";
        let sents = parse_tagged(text.as_bytes()).unwrap();
        let fwd = SubstitutionTable::build(sents.iter());
        let rev = SubstitutionTable::build(sents.iter().rev());
        let mut a = Vec::new();
        let mut b = Vec::new();
        fwd.write(&mut a).unwrap();
        rev.write(&mut b).unwrap();
        assert_eq!(a, b);
    }
}
