use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lexicon::NormalizedText;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// One token per non-whitespace character, except that runs of ASCII
    /// alphanumerics (with decimal points between digits) form one token.
    #[default]
    Character,
    Whitespace,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "character" => Ok(Scheme::Character),
            "whitespace" => Ok(Scheme::Whitespace),
            other => Err(format!("unknown tokenization scheme {other:?}")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Character => "character",
            Scheme::Whitespace => "whitespace",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub scheme: Scheme,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Builds a sequence directly from tokens (used by tests and callers that
    /// tokenize elsewhere).
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        TokenSequence {
            tokens: tokens.into_iter().map(Into::into).collect(),
            scheme: Scheme::Whitespace,
        }
    }
}

pub fn tokenize(text: &str, scheme: Scheme) -> TokenSequence {
    let normalized = NormalizedText::new(text);
    let chars = normalized.chars();
    let tokens = match scheme {
        Scheme::Whitespace => normalized
            .as_string()
            .split_whitespace()
            .map(str::to_string)
            .collect(),
        Scheme::Character => {
            let mut tokens = Vec::new();
            let mut i = 0;
            while i < chars.len() {
                let c = chars[i];
                if c.is_whitespace() {
                    i += 1;
                } else if c.is_ascii_alphanumeric() {
                    let start = i;
                    i += 1;
                    while i < chars.len() {
                        let next = chars[i];
                        let decimal_point = next == '.'
                            && chars[i - 1].is_ascii_digit()
                            && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
                        if next.is_ascii_alphanumeric() || decimal_point {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    tokens.push(chars[start..i].iter().collect());
                } else {
                    tokens.push(c.to_string());
                    i += 1;
                }
            }
            tokens
        }
    };
    TokenSequence { tokens, scheme }
}
