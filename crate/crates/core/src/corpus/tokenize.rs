use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Characters that always form a standalone single-character token.
pub const DELIMITERS: [char; 14] = [
    '=', ',', ';', ':', '(', ')', '[', ']', '{', '}', '"', '\'', '<', '>',
];

pub fn is_delimiter(c: char) -> bool {
    DELIMITERS.contains(&c)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Half-open byte range into the owning message's raw text.
    pub span: Range<usize>,
}

/// A raw log line plus its ordered tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenizedMessage {
    pub raw: String,
    pub tokens: Vec<Token>,
}

impl TokenizedMessage {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }
}

/// Splits `raw` into tokens.
///
/// Whitespace runs separate chunks and never produce tokens. Inside a chunk every
/// character from [`DELIMITERS`] is its own token and maximal runs of the remaining
/// characters form one token each. `.` `/` `-` `_` are ordinary characters, so
/// versions, paths and addresses stay whole.
pub fn tokenize(raw: &str) -> TokenizedMessage {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;

    let close_run = |start: &mut Option<usize>, end: usize, tokens: &mut Vec<Token>| {
        if let Some(s) = start.take() {
            tokens.push(Token {
                text: raw[s..end].to_string(),
                span: s..end,
            });
        }
    };

    for (i, c) in raw.char_indices() {
        if c.is_whitespace() {
            close_run(&mut run_start, i, &mut tokens);
        } else if is_delimiter(c) {
            close_run(&mut run_start, i, &mut tokens);
            let end = i + c.len_utf8();
            tokens.push(Token {
                text: raw[i..end].to_string(),
                span: i..end,
            });
        } else if run_start.is_none() {
            run_start = Some(i);
        }
    }
    close_run(&mut run_start, raw.len(), &mut tokens);

    TokenizedMessage {
        raw: raw.to_string(),
        tokens,
    }
}
