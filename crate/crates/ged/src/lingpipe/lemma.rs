//! Rule-based English lemmatizer for nouns and verbs: an irregular-form
//! table consulted first, then deterministic suffix rules.

use super::PosGroup;

/// (inflected, lemma) pairs for irregular verbs. Covers past tense, past
/// participle and suppletive present forms of the common irregulars.
pub const IRREGULAR_VERBS: &[(&str, &str)] = &[
    ("am", "be"),
    ("is", "be"),
    ("are", "be"),
    ("was", "be"),
    ("were", "be"),
    ("been", "be"),
    ("being", "be"),
    ("has", "have"),
    ("had", "have"),
    ("having", "have"),
    ("does", "do"),
    ("did", "do"),
    ("done", "do"),
    ("goes", "go"),
    ("went", "go"),
    ("gone", "go"),
    ("said", "say"),
    ("says", "say"),
    ("made", "make"),
    ("took", "take"),
    ("taken", "take"),
    ("came", "come"),
    ("saw", "see"),
    ("seen", "see"),
    ("knew", "know"),
    ("known", "know"),
    ("got", "get"),
    ("gotten", "get"),
    ("gave", "give"),
    ("given", "give"),
    ("found", "find"),
    ("thought", "think"),
    ("told", "tell"),
    ("became", "become"),
    ("showed", "show"),
    ("shown", "show"),
    ("left", "leave"),
    ("felt", "feel"),
    ("put", "put"),
    ("brought", "bring"),
    ("began", "begin"),
    ("begun", "begin"),
    ("kept", "keep"),
    ("held", "hold"),
    ("wrote", "write"),
    ("written", "write"),
    ("stood", "stand"),
    ("heard", "hear"),
    ("let", "let"),
    ("meant", "mean"),
    ("set", "set"),
    ("met", "meet"),
    ("ran", "run"),
    ("paid", "pay"),
    ("sat", "sit"),
    ("spoke", "speak"),
    ("spoken", "speak"),
    ("lay", "lie"),
    ("lain", "lie"),
    ("led", "lead"),
    ("read", "read"),
    ("grew", "grow"),
    ("grown", "grow"),
    ("lost", "lose"),
    ("fell", "fall"),
    ("fallen", "fall"),
    ("sent", "send"),
    ("built", "build"),
    ("understood", "understand"),
    ("drew", "draw"),
    ("drawn", "draw"),
    ("broke", "break"),
    ("broken", "break"),
    ("spent", "spend"),
    ("cut", "cut"),
    ("rose", "rise"),
    ("risen", "rise"),
    ("drove", "drive"),
    ("driven", "drive"),
    ("bought", "buy"),
    ("wore", "wear"),
    ("worn", "wear"),
    ("chose", "choose"),
    ("chosen", "choose"),
    ("ate", "eat"),
    ("eaten", "eat"),
    ("flew", "fly"),
    ("flown", "fly"),
    ("fled", "flee"),
    ("ground", "grind"),
    ("forgot", "forget"),
    ("forgotten", "forget"),
    ("hit", "hit"),
    ("hurt", "hurt"),
    ("laid", "lay"),
    ("slept", "sleep"),
    ("swept", "sweep"),
    ("wept", "weep"),
    ("crept", "creep"),
    ("caught", "catch"),
    ("taught", "teach"),
    ("fought", "fight"),
    ("sought", "seek"),
    ("sold", "sell"),
    ("shot", "shoot"),
    ("shut", "shut"),
    ("spread", "spread"),
    ("sang", "sing"),
    ("sung", "sing"),
    ("sank", "sink"),
    ("sunk", "sink"),
    ("swam", "swim"),
    ("swum", "swim"),
    ("rang", "ring"),
    ("rung", "ring"),
    ("drank", "drink"),
    ("drunk", "drink"),
    ("threw", "throw"),
    ("thrown", "throw"),
    ("blew", "blow"),
    ("blown", "blow"),
    ("hid", "hide"),
    ("hidden", "hide"),
    ("bit", "bite"),
    ("bitten", "bite"),
    ("rode", "ride"),
    ("ridden", "ride"),
    ("froze", "freeze"),
    ("frozen", "freeze"),
    ("stole", "steal"),
    ("stolen", "steal"),
    ("struck", "strike"),
    ("swore", "swear"),
    ("sworn", "swear"),
    ("tore", "tear"),
    ("torn", "tear"),
    ("woke", "wake"),
    ("woken", "wake"),
    ("won", "win"),
    ("wound", "wind"),
    ("bore", "bear"),
    ("borne", "bear"),
    ("born", "bear"),
    ("beat", "beat"),
    ("beaten", "beat"),
    ("bent", "bend"),
    ("bet", "bet"),
    ("bound", "bind"),
    ("bled", "bleed"),
    ("bred", "breed"),
    ("burnt", "burn"),
    ("burst", "burst"),
    ("cast", "cast"),
    ("clung", "cling"),
    ("cost", "cost"),
    ("dealt", "deal"),
    ("dug", "dig"),
    ("dreamt", "dream"),
    ("fed", "feed"),
    ("hung", "hang"),
    ("knelt", "kneel"),
    ("knit", "knit"),
    ("learnt", "learn"),
    ("lent", "lend"),
    ("lit", "light"),
    ("quit", "quit"),
    ("rid", "rid"),
    ("shook", "shake"),
    ("shaken", "shake"),
    ("shone", "shine"),
    ("slid", "slide"),
    ("spelt", "spell"),
    ("spilt", "spill"),
    ("spun", "spin"),
    ("split", "split"),
    ("sprang", "spring"),
    ("sprung", "spring"),
    ("stuck", "stick"),
    ("stung", "sting"),
    ("strove", "strive"),
    ("striven", "strive"),
    ("swung", "swing"),
    ("undergone", "undergo"),
    ("underwent", "undergo"),
    ("upheld", "uphold"),
    ("withdrew", "withdraw"),
    ("withdrawn", "withdraw"),
    ("arose", "arise"),
    ("arisen", "arise"),
    ("awoke", "awake"),
    ("awoken", "awake"),
    ("beheld", "behold"),
    ("forbade", "forbid"),
    ("forbidden", "forbid"),
    ("foresaw", "foresee"),
    ("foreseen", "foresee"),
    ("forgave", "forgive"),
    ("forgiven", "forgive"),
    ("lied", "lie"),
    ("overcame", "overcome"),
    ("overtook", "overtake"),
    ("overtaken", "overtake"),
    ("proven", "prove"),
    ("shrank", "shrink"),
    ("shrunk", "shrink"),
    ("slain", "slay"),
    ("slew", "slay"),
    ("strung", "string"),
    ("trod", "tread"),
    ("trodden", "tread"),
    ("undertook", "undertake"),
    ("undertaken", "undertake"),
    ("wrung", "wring"),
];

/// (plural, singular) pairs for irregular nouns, including the common
/// -ves class and Latin/Greek plurals.
pub const IRREGULAR_NOUNS: &[(&str, &str)] = &[
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("geese", "goose"),
    ("mice", "mouse"),
    ("lice", "louse"),
    ("people", "person"),
    ("oxen", "ox"),
    ("dice", "die"),
    ("brethren", "brother"),
    ("criteria", "criterion"),
    ("phenomena", "phenomenon"),
    ("data", "datum"),
    ("bacteria", "bacterium"),
    ("curricula", "curriculum"),
    ("memoranda", "memorandum"),
    ("strata", "stratum"),
    ("corpora", "corpus"),
    ("genera", "genus"),
    ("media", "medium"),
    ("millennia", "millennium"),
    ("spectra", "spectrum"),
    ("maxima", "maximum"),
    ("minima", "minimum"),
    ("optima", "optimum"),
    ("quanta", "quantum"),
    ("analyses", "analysis"),
    ("bases", "basis"),
    ("crises", "crisis"),
    ("theses", "thesis"),
    ("hypotheses", "hypothesis"),
    ("diagnoses", "diagnosis"),
    ("parentheses", "parenthesis"),
    ("syntheses", "synthesis"),
    ("emphases", "emphasis"),
    ("oases", "oasis"),
    ("axes", "axis"),
    ("indices", "index"),
    ("matrices", "matrix"),
    ("vertices", "vertex"),
    ("appendices", "appendix"),
    ("radii", "radius"),
    ("alumni", "alumnus"),
    ("fungi", "fungus"),
    ("nuclei", "nucleus"),
    ("stimuli", "stimulus"),
    ("syllabi", "syllabus"),
    ("cacti", "cactus"),
    ("foci", "focus"),
    ("loci", "locus"),
    ("algae", "alga"),
    ("larvae", "larva"),
    ("formulae", "formula"),
    ("antennae", "antenna"),
    ("leaves", "leaf"),
    ("lives", "life"),
    ("knives", "knife"),
    ("wives", "wife"),
    ("halves", "half"),
    ("calves", "calf"),
    ("loaves", "loaf"),
    ("selves", "self"),
    ("shelves", "shelf"),
    ("thieves", "thief"),
    ("wolves", "wolf"),
    ("scarves", "scarf"),
    ("elves", "elf"),
    ("hooves", "hoof"),
    ("sheaves", "sheaf"),
    ("series", "series"),
    ("species", "species"),
    ("sheep", "sheep"),
    ("deer", "deer"),
    ("fish", "fish"),
    ("aircraft", "aircraft"),
    ("echoes", "echo"),
    ("heroes", "hero"),
    ("potatoes", "potato"),
    ("tomatoes", "tomato"),
    ("vetoes", "veto"),
];

fn lookup(table: &[(&str, &str)], token: &str) -> Option<String> {
    table
        .iter()
        .find(|(infl, _)| *infl == token)
        .map(|(_, lemma)| lemma.to_string())
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn ends_sibilant(stem: &str) -> bool {
    stem.ends_with('s')
        || stem.ends_with('x')
        || stem.ends_with('z')
        || stem.ends_with("ch")
        || stem.ends_with("sh")
}

fn lemmatize_noun(token: &str) -> String {
    if let Some(lemma) = lookup(IRREGULAR_NOUNS, token) {
        return lemma;
    }
    if let Some(stem) = token.strip_suffix("ies") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = token.strip_suffix("es") {
        if ends_sibilant(stem) {
            return stem.to_string();
        }
        if stem.ends_with('o') {
            return stem.to_string();
        }
    }
    if token.ends_with('s') && !token.ends_with("ss") && !token.ends_with("us") {
        return token[..token.len() - 1].to_string();
    }
    token.to_string()
}

/// Undo regular -ed/-ing inflection: restore a dropped silent e after v/u,
/// undo consonant doubling for the usual doubling consonants.
fn restore_base(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 1 && (b[n - 1] == b'v' || b[n - 1] == b'u') {
        return format!("{stem}e");
    }
    if n >= 3
        && b[n - 1] == b[n - 2]
        && matches!(b[n - 1], b'b' | b'd' | b'g' | b'k' | b'm' | b'n' | b'p' | b'r' | b't')
        && is_vowel(b[n - 3])
    {
        return stem[..n - 1].to_string();
    }
    stem.to_string()
}

fn lemmatize_verb(token: &str) -> String {
    if let Some(lemma) = lookup(IRREGULAR_VERBS, token) {
        return lemma;
    }
    if let Some(stem) = token.strip_suffix("ies") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = token.strip_suffix("ied") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    for suffix in ["ing", "ed"] {
        if let Some(stem) = token.strip_suffix(suffix) {
            if stem.len() >= 2 && stem.bytes().any(is_vowel) {
                return restore_base(stem);
            }
        }
    }
    if let Some(stem) = token.strip_suffix("es") {
        if ends_sibilant(stem) || stem.ends_with('o') {
            return stem.to_string();
        }
    }
    if token.ends_with('s') && !token.ends_with("ss") {
        return token[..token.len() - 1].to_string();
    }
    token.to_string()
}

/// Lemmatize a lowercase token as a noun or a verb. Other POS groups are
/// keyed by stem, not lemma, and never reach this function.
pub fn lemmatize(token: &str, group: PosGroup) -> String {
    match group {
        PosGroup::Noun => lemmatize_noun(token),
        PosGroup::Verb => lemmatize_verb(token),
        other => panic!("lemmatize called with non-nominal/verbal group {other:?}"),
    }
}
