use unicode_normalization::char::canonical_combining_class;
use unicode_normalization::UnicodeNormalization;

/// Normalized text with a map from every normalized character back to the
/// character index in the original string it came from.
///
/// Normalization runs per base-character segment (a starter followed by its
/// combining marks) so each output character has a well-defined origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedText {
    chars: Vec<char>,
    // origin.len() == chars.len() + 1; the final entry is the original length.
    origin: Vec<usize>,
}

impl NormalizedText {
    pub fn new(text: &str) -> Self {
        let mut out = NormalizedText {
            chars: Vec::with_capacity(text.len()),
            origin: Vec::with_capacity(text.len() + 1),
        };
        let mut in_space = false;
        let mut segment = String::new();
        let mut segment_start = 0;
        let mut total = 0;

        for (idx, c) in text.chars().enumerate() {
            if idx > 0 && canonical_combining_class(c) == 0 {
                out.push_segment(&segment, segment_start, &mut in_space);
                segment.clear();
                segment_start = idx;
            }
            segment.push(c);
            total = idx + 1;
        }
        if !segment.is_empty() {
            out.push_segment(&segment, segment_start, &mut in_space);
        }
        out.origin.push(total);
        out
    }

    fn push_segment(&mut self, segment: &str, start: usize, in_space: &mut bool) {
        let mut emit = |c: char| {
            let c = lowercase_latin(fold_width(c));
            if c.is_whitespace() {
                if !*in_space {
                    self.chars.push(' ');
                    self.origin.push(start);
                    *in_space = true;
                }
            } else {
                self.chars.push(c);
                self.origin.push(start);
                *in_space = false;
            }
        };
        let mut it = segment.chars();
        match (it.next(), it.next()) {
            (Some(c), None) if c.is_ascii() => emit(c),
            _ => segment.nfkc().for_each(emit),
        }
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Original character index of the normalized character at `pos`.
    /// `pos == len()` maps to the original length.
    pub fn origin(&self, pos: usize) -> usize {
        self.origin[pos]
    }

    /// Original `(start, length)` span covered by normalized range `[start, end)`.
    pub fn original_span(&self, start: usize, end: usize) -> (usize, usize) {
        let from = self.origin[start];
        // Characters produced by one original segment share an origin, so the
        // span ends where the next segment begins.
        let mut to = self.origin[end];
        if end > start && to == self.origin[end - 1] {
            let mut k = end;
            while k < self.chars.len() && self.origin[k] == self.origin[end - 1] {
                k += 1;
            }
            to = self.origin[k];
        }
        (from, to - from)
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }
}

/// Canonical form used for matching: compatibility normalization, full-width
/// folding, Latin lowercasing and whitespace collapsing.
pub fn normalize_text(text: &str) -> String {
    NormalizedText::new(text).as_string()
}

fn fold_width(c: char) -> char {
    match c {
        '\u{FF01}'..='\u{FF5E}' => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
        '\u{3000}' => ' ',
        _ => c,
    }
}

fn lowercase_latin(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    if ('\u{00C0}'..='\u{024F}').contains(&c) && c.is_uppercase() {
        let mut lower = c.to_lowercase();
        if let (Some(l), None) = (lower.next(), lower.next()) {
            return l;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_width_is_folded_and_lowercased() {
        assert_eq!(normalize_text("ＦＤＧ"), "fdg");
        assert_eq!(normalize_text("ＳＵＶｍａｘ　４．２"), "suvmax 4.2");
    }

    #[test]
    fn whitespace_runs_collapse() {
        assert_eq!(normalize_text("SUVmax  4.2"), "suvmax 4.2");
        assert_eq!(normalize_text("a\n\t b"), "a b");
    }

    #[test]
    fn latin_accents_lowercase() {
        assert_eq!(normalize_text("ÉTUDE"), "étude");
        // decomposed input composes
        assert_eq!(normalize_text("E\u{0301}"), "é");
    }

    #[test]
    fn origin_map_tracks_expansions() {
        // U+2474 PARENTHESIZED DIGIT ONE expands to "(1)"
        let n = NormalizedText::new("a⑴b");
        assert_eq!(n.as_string(), "a(1)b");
        assert_eq!(n.origin(0), 0);
        assert_eq!(n.origin(1), 1);
        assert_eq!(n.origin(3), 1);
        assert_eq!(n.origin(4), 2);
        assert_eq!(n.original_span(1, 4), (1, 1));
        assert_eq!(n.original_span(4, 5), (2, 1));
    }

    #[test]
    fn origin_map_tracks_collapsed_space() {
        let n = NormalizedText::new("x   y");
        assert_eq!(n.as_string(), "x y");
        assert_eq!(n.origin(2), 4);
        assert_eq!(n.original_span(2, 3), (4, 1));
    }

    #[test]
    fn empty_text() {
        let n = NormalizedText::new("");
        assert!(n.is_empty());
        assert_eq!(n.origin(0), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn idempotent_on_arbitrary_strings(s in "\\PC{0,40}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn idempotent_on_clinical_mix(s in "[ａ-ｚＡ-Ｚ０-９肺癌淋巴结 \t\nA-Za-z0-9.,，。（）()①②ÀÉÖ\u{0301}\u{3000}]{0,60}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn origin_is_monotone(s in "\\PC{0,40}") {
            let n = NormalizedText::new(&s);
            for k in 1..=n.len() {
                prop_assert!(n.origin(k - 1) <= n.origin(k));
            }
            prop_assert_eq!(n.origin(n.len()), s.chars().count());
        }
    }
}
