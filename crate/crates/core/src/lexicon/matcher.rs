use super::{Category, Lexicon, NormalizedText};

/// Character trie over normalized lexicon terms.
///
/// `longest_match_at` walks the trie from a position and remembers the
/// deepest terminal node reached.
#[derive(Debug, Clone)]
pub struct Matcher {
    nodes: Vec<Node>,
    terms: Vec<(String, Category)>,
}

#[derive(Debug, Clone, Default)]
struct Node {
    // sorted by char
    edges: Vec<(char, u32)>,
    terminal: Option<u32>,
}

impl Node {
    fn child(&self, c: char) -> Option<u32> {
        self.edges
            .binary_search_by_key(&c, |&(k, _)| k)
            .ok()
            .map(|i| self.edges[i].1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermMatch<'a> {
    pub term: &'a str,
    pub category: Category,
    /// Length in normalized characters.
    pub length: usize,
}

impl Matcher {
    pub fn new(lexicon: &Lexicon) -> Self {
        let mut matcher = Matcher {
            nodes: vec![Node::default()],
            terms: Vec::with_capacity(lexicon.len()),
        };
        for (term, category) in lexicon.iter() {
            let id = matcher.terms.len() as u32;
            matcher.terms.push((term.to_string(), category));
            let mut node = 0usize;
            for c in term.chars() {
                node = match matcher.nodes[node].child(c) {
                    Some(next) => next as usize,
                    None => {
                        let next = matcher.nodes.len();
                        matcher.nodes.push(Node::default());
                        let edges = &mut matcher.nodes[node].edges;
                        let at = edges.partition_point(|&(k, _)| k < c);
                        edges.insert(at, (c, next as u32));
                        next
                    }
                };
            }
            matcher.nodes[node].terminal = Some(id);
        }
        matcher
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Longest term that is a prefix of `chars[pos..]`. `chars` must already
    /// be normalized.
    pub fn longest_match_at(&self, chars: &[char], pos: usize) -> Option<TermMatch<'_>> {
        let mut node = &self.nodes[0];
        let mut best = None;
        for (depth, &c) in chars.get(pos..)?.iter().enumerate() {
            match node.child(c) {
                Some(next) => node = &self.nodes[next as usize],
                None => break,
            }
            if let Some(id) = node.terminal {
                best = Some((id, depth + 1));
            }
        }
        best.map(|(id, length)| {
            let (term, category) = &self.terms[id as usize];
            TermMatch {
                term,
                category: *category,
                length,
            }
        })
    }

    /// Normalizes `text` and queries at normalized character `position`.
    pub fn longest_match(&self, text: &str, position: usize) -> Option<TermMatch<'_>> {
        let normalized = NormalizedText::new(text);
        self.longest_match_at(normalized.chars(), position)
    }
}

/// Builds the longest-match automaton for a lexicon.
pub fn build_matcher(lexicon: &Lexicon) -> Matcher {
    Matcher::new(lexicon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lexicon(terms: &[&str]) -> Lexicon {
        Lexicon::from_entries(terms.iter().map(|t| (*t, Category::General))).unwrap()
    }

    #[test]
    fn longer_term_wins() {
        let m = Matcher::new(&lexicon(&["肺", "肺癌"]));
        let hit = m.longest_match("肺癌转移", 0).unwrap();
        assert_eq!((hit.term, hit.length), ("肺癌", 2));
    }

    #[test]
    fn no_term_at_position() {
        let m = Matcher::new(&lexicon(&["ab"]));
        assert!(m.longest_match("abc", 1).is_none());
        assert!(m.longest_match("abc", 7).is_none());
    }

    #[test]
    fn query_is_normalized() {
        let m = Matcher::new(&lexicon(&["suv"]));
        let hit = m.longest_match("SUV", 0).unwrap();
        assert_eq!((hit.term, hit.length), ("suv", 3));
    }

    #[test]
    fn prefix_without_terminal_falls_back() {
        let m = Matcher::new(&lexicon(&["a", "abcd"]));
        let hit = m.longest_match("abcx", 0).unwrap();
        assert_eq!(hit.term, "a");
    }

    fn brute_force(terms: &[String], chars: &[char], pos: usize) -> Option<String> {
        terms
            .iter()
            .filter(|t| {
                let t: Vec<char> = t.chars().collect();
                pos + t.len() <= chars.len() && chars[pos..pos + t.len()] == t[..]
            })
            .max_by_key(|t| t.chars().count())
            .cloned()
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(
            terms in prop::collection::vec("[abc肺癌]{1,4}", 1..50),
            text in "[abc肺癌 ]{0,200}",
        ) {
            let lex = Lexicon::from_entries(terms.iter().map(|t| (t.as_str(), Category::General))).unwrap();
            let stored: Vec<String> = lex.iter().map(|(t, _)| t.to_string()).collect();
            let m = Matcher::new(&lex);
            let chars: Vec<char> = text.chars().collect();
            for pos in 0..chars.len() {
                let got = m.longest_match_at(&chars, pos).map(|h| h.term.to_string());
                prop_assert_eq!(got, brute_force(&stored, &chars, pos));
            }
        }

        #[test]
        fn source_order_irrelevant(mut terms in prop::collection::vec("[ab]{1,3}", 1..10), text in "[ab]{0,30}") {
            let m1 = Matcher::new(&lexicon(&terms.iter().map(String::as_str).collect::<Vec<_>>()));
            terms.reverse();
            let m2 = Matcher::new(&lexicon(&terms.iter().map(String::as_str).collect::<Vec<_>>()));
            let chars: Vec<char> = text.chars().collect();
            for pos in 0..chars.len() {
                prop_assert_eq!(m1.longest_match_at(&chars, pos), m2.longest_match_at(&chars, pos));
            }
        }
    }
}
