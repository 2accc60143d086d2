//! The original Porter (1980) suffix-stripping stemmer.
//!
//! Operates on lowercase ASCII words. Each step applies the first rule whose
//! suffix matches; if that rule's condition fails the word is left alone for
//! the step (no fallback to shorter suffixes).

/// Stems a single lowercase word.
pub fn stem(word: &str) -> String {
    if !word.is_ascii() {
        return word.to_owned();
    }
    let mut w = word.as_bytes().to_vec();
    w = step1a(w);
    w = step1b(w);
    w = step1c(w);
    w = step2(w);
    w = step3(w);
    w = step4(w);
    w = step5a(w);
    w = step5b(w);
    String::from_utf8(w).expect("ascii in, ascii out")
}

type Condition = fn(&[u8]) -> bool;

fn is_vowel_letter(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Consonant flags per position; `y` is a consonant at the start of a word or
/// after a vowel.
fn consonant_flags(w: &[u8]) -> Vec<bool> {
    let mut flags: Vec<bool> = Vec::with_capacity(w.len());
    for (i, &c) in w.iter().enumerate() {
        let cons = if is_vowel_letter(c) {
            false
        } else if c == b'y' {
            i == 0 || !flags[i - 1]
        } else {
            true
        };
        flags.push(cons);
    }
    flags
}

fn is_consonant(w: &[u8], i: usize) -> bool {
    consonant_flags(&w[..=i])[i]
}

/// `m` in `[C](VC){m}[V]`.
fn measure(w: &[u8]) -> usize {
    let flags = consonant_flags(w);
    flags.windows(2).filter(|p| !p[0] && p[1]).count()
}

fn positive_measure(w: &[u8]) -> bool {
    measure(w) > 0
}

fn measure_gt_1(w: &[u8]) -> bool {
    measure(w) > 1
}

fn contains_vowel(w: &[u8]) -> bool {
    consonant_flags(w).iter().any(|&c| !c)
}

fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

/// `*o`: ends consonant-vowel-consonant, last not `w`, `x` or `y`.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    if n < 3 {
        return false;
    }
    let f = consonant_flags(w);
    f[n - 3] && !f[n - 2] && f[n - 1] && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn strip<'a>(w: &'a [u8], suffix: &str) -> Option<&'a [u8]> {
    w.strip_suffix(suffix.as_bytes())
}

fn join(stem: &[u8], tail: &str) -> Vec<u8> {
    let mut out = stem.to_vec();
    out.extend_from_slice(tail.as_bytes());
    out
}

fn apply_rules(w: Vec<u8>, rules: &[(&str, &str, Condition)]) -> Vec<u8> {
    for &(suffix, replacement, cond) in rules {
        if let Some(stem) = strip(&w, suffix) {
            return if cond(stem) { join(stem, replacement) } else { w };
        }
    }
    w
}

fn always(_: &[u8]) -> bool {
    true
}

fn step1a(w: Vec<u8>) -> Vec<u8> {
    apply_rules(
        w,
        &[
            ("sses", "ss", always),
            ("ies", "i", always),
            ("ss", "ss", always),
            ("s", "", always),
        ],
    )
}

fn step1b(w: Vec<u8>) -> Vec<u8> {
    if let Some(stem) = strip(&w, "eed") {
        return if positive_measure(stem) { join(stem, "ee") } else { w };
    }

    let stem = ["ed", "ing"]
        .iter()
        .filter_map(|s| strip(&w, s))
        .find(|stem| contains_vowel(stem));
    let Some(stem) = stem else {
        return w;
    };

    // AT -> ATE, BL -> BLE, IZ -> IZE
    if [b"at", b"bl", b"iz"].iter().any(|s| stem.ends_with(*s)) {
        return join(stem, "e");
    }
    if ends_double_consonant(stem) {
        let last = stem[stem.len() - 1];
        return if matches!(last, b'l' | b's' | b'z') {
            stem.to_vec()
        } else {
            stem[..stem.len() - 1].to_vec()
        };
    }
    if measure(stem) == 1 && ends_cvc(stem) {
        return join(stem, "e");
    }
    stem.to_vec()
}

fn step1c(w: Vec<u8>) -> Vec<u8> {
    apply_rules(w, &[("y", "i", contains_vowel)])
}

fn step2(w: Vec<u8>) -> Vec<u8> {
    const P: Condition = positive_measure;
    apply_rules(
        w,
        &[
            ("ational", "ate", P),
            ("tional", "tion", P),
            ("enci", "ence", P),
            ("anci", "ance", P),
            ("izer", "ize", P),
            ("abli", "able", P),
            ("alli", "al", P),
            ("entli", "ent", P),
            ("eli", "e", P),
            ("ousli", "ous", P),
            ("ization", "ize", P),
            ("ation", "ate", P),
            ("ator", "ate", P),
            ("alism", "al", P),
            ("iveness", "ive", P),
            ("fulness", "ful", P),
            ("ousness", "ous", P),
            ("aliti", "al", P),
            ("iviti", "ive", P),
            ("biliti", "ble", P),
        ],
    )
}

fn step3(w: Vec<u8>) -> Vec<u8> {
    const P: Condition = positive_measure;
    apply_rules(
        w,
        &[
            ("icate", "ic", P),
            ("ative", "", P),
            ("alize", "al", P),
            ("iciti", "ic", P),
            ("ical", "ic", P),
            ("ful", "", P),
            ("ness", "", P),
        ],
    )
}

fn ion_condition(stem: &[u8]) -> bool {
    measure(stem) > 1 && matches!(stem.last(), Some(b's' | b't'))
}

fn step4(w: Vec<u8>) -> Vec<u8> {
    const M: Condition = measure_gt_1;
    apply_rules(
        w,
        &[
            ("al", "", M),
            ("ance", "", M),
            ("ence", "", M),
            ("er", "", M),
            ("ic", "", M),
            ("able", "", M),
            ("ible", "", M),
            ("ant", "", M),
            ("ement", "", M),
            ("ment", "", M),
            ("ent", "", M),
            ("ion", "", ion_condition),
            ("ou", "", M),
            ("ism", "", M),
            ("ate", "", M),
            ("iti", "", M),
            ("ous", "", M),
            ("ive", "", M),
            ("ize", "", M),
        ],
    )
}

fn step5a(w: Vec<u8>) -> Vec<u8> {
    if let Some(stem) = strip(&w, "e") {
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            return stem.to_vec();
        }
    }
    w
}

fn step5b(w: Vec<u8>) -> Vec<u8> {
    if w.ends_with(b"ll") && measure(&w[..w.len() - 1]) > 1 {
        return w[..w.len() - 1].to_vec();
    }
    w
}
