//! Word tokenization shared by the vocabulary, TF-IDF weighting, and
//! document truncation.
//!
//! A token is a maximal run of Unicode alphanumeric characters that is at
//! least two characters long, lowercased. Everything else separates tokens.

/// One token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

pub const MIN_TOKEN_CHARS: usize = 2;

/// Iterator over the tokens of `text`.
pub fn tokens(text: &str) -> Tokens<'_> {
    Tokens { text, pos: 0 }
}

pub struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Iterator for Tokens<'a> {
    type Item = Token;

    fn next(&mut self) -> Option<Token> {
        let bytes_len = self.text.len();
        while self.pos < bytes_len {
            let rest = &self.text[self.pos..];
            let mut start = None;
            let mut chars = 0usize;
            let mut end = self.pos;
            for (off, ch) in rest.char_indices() {
                if ch.is_alphanumeric() {
                    if start.is_none() {
                        start = Some(self.pos + off);
                    }
                    chars += 1;
                    end = self.pos + off + ch.len_utf8();
                } else if start.is_some() {
                    break;
                }
            }
            let Some(start) = start else {
                self.pos = bytes_len;
                return None;
            };
            self.pos = end;
            if chars >= MIN_TOKEN_CHARS {
                return Some(Token {
                    text: self.text[start..end].to_lowercase(),
                    start,
                    end,
                });
            }
        }
        None
    }
}

pub fn token_count(text: &str) -> usize {
    tokens(text).count()
}

/// Byte offset just past the `n`-th token, or `None` if the text has at most
/// `n` tokens.
pub fn prefix_end(text: &str, n: usize) -> Option<usize> {
    if n == 0 {
        return Some(0);
    }
    let mut it = tokens(text);
    let end = it.nth(n - 1)?.end;
    it.next().map(|_| end)
}
