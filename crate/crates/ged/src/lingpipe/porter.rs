//! Porter stemmer, the classic rule sequence (steps 1a through 5b).

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Number of VC sequences in `w[..len]`.
fn measure(w: &[u8], len: usize) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..len {
        let vowel = !is_consonant(w, i);
        if prev_vowel && !vowel {
            m += 1;
        }
        prev_vowel = vowel;
    }
    m
}

fn has_vowel(w: &[u8], len: usize) -> bool {
    (0..len).any(|i| !is_consonant(w, i))
}

fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

/// consonant-vowel-consonant at the end, where the final consonant is not
/// w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    if n < 3 {
        return false;
    }
    is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn ends_with(w: &[u8], suffix: &str) -> bool {
    w.len() >= suffix.len() && &w[w.len() - suffix.len()..] == suffix.as_bytes()
}

fn set_suffix(w: &mut Vec<u8>, old: &str, new: &str) {
    let keep = w.len() - old.len();
    w.truncate(keep);
    w.extend_from_slice(new.as_bytes());
}

/// Apply the first rule whose suffix matches, provided the stem measure
/// condition holds. Matching ends at the first suffix hit, as in the
/// original algorithm.
fn rule_step(w: &mut Vec<u8>, min_measure: usize, rules: &[(&str, &str)]) {
    for (old, new) in rules {
        if ends_with(w, old) {
            let stem_len = w.len() - old.len();
            if measure(w, stem_len) > min_measure {
                set_suffix(w, old, new);
            }
            return;
        }
    }
}

pub fn porter_stem(token: &str) -> String {
    let mut w: Vec<u8> = token.bytes().collect();
    if w.len() <= 2 {
        return token.to_string();
    }

    // step 1a
    if ends_with(&w, "sses") {
        set_suffix(&mut w, "sses", "ss");
    } else if ends_with(&w, "ies") {
        set_suffix(&mut w, "ies", "i");
    } else if !ends_with(&w, "ss") && ends_with(&w, "s") {
        w.pop();
    }

    // step 1b
    let mut did_strip = false;
    if ends_with(&w, "eed") {
        if measure(&w, w.len() - 3) > 0 {
            w.pop();
        }
    } else if ends_with(&w, "ed") && has_vowel(&w, w.len() - 2) {
        w.truncate(w.len() - 2);
        did_strip = true;
    } else if ends_with(&w, "ing") && has_vowel(&w, w.len() - 3) {
        w.truncate(w.len() - 3);
        did_strip = true;
    }
    if did_strip {
        if ends_with(&w, "at") || ends_with(&w, "bl") || ends_with(&w, "iz") {
            w.push(b'e');
        } else if ends_double_consonant(&w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
            w.pop();
        } else if measure(&w, w.len()) == 1 && ends_cvc(&w) {
            w.push(b'e');
        }
    }

    // step 1c
    if ends_with(&w, "y") && has_vowel(&w, w.len() - 1) {
        let n = w.len();
        w[n - 1] = b'i';
    }

    // step 2
    rule_step(
        &mut w,
        0,
        &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ],
    );

    // step 3
    rule_step(
        &mut w,
        0,
        &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ],
    );

    // step 4
    let step4: &[&str] = &[
        "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ion", "ism", "ate",
        "iti", "ous", "ive", "ize", "al", "er", "ic", "ou",
    ];
    for suf in step4 {
        if ends_with(&w, suf) {
            let stem_len = w.len() - suf.len();
            let stem_ok = if *suf == "ion" {
                stem_len > 0 && matches!(w[stem_len - 1], b's' | b't')
            } else {
                true
            };
            if stem_ok && measure(&w, stem_len) > 1 {
                w.truncate(stem_len);
            }
            break;
        }
    }

    // step 5a
    if ends_with(&w, "e") {
        let m = measure(&w, w.len() - 1);
        if m > 1 || (m == 1 && !ends_cvc(&w[..w.len() - 1])) {
            w.pop();
        }
    }

    // step 5b
    if measure(&w, w.len()) > 1 && ends_double_consonant(&w) && w[w.len() - 1] == b'l' {
        w.pop();
    }

    String::from_utf8(w).unwrap_or_else(|_| token.to_string())
}
