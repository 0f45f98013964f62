use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// Split on Unicode whitespace.
    #[default]
    Whitespace,
    /// Whitespace split plus every punctuation or symbol character as its own
    /// token, except `.`/`,` style separators between two digits.
    Intl,
    /// One token per extended grapheme cluster, whitespace dropped.
    Char,
}

impl Tokenizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Tokenizer::Whitespace => "whitespace",
            Tokenizer::Intl => "intl",
            Tokenizer::Char => "char",
        }
    }
}

impl fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Tokenizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "whitespace" => Ok(Tokenizer::Whitespace),
            "intl" => Ok(Tokenizer::Intl),
            "char" => Ok(Tokenizer::Char),
            other => Err(Error::InvalidArgument(format!("unknown tokenizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenizationScheme {
    pub name: Tokenizer,
    pub lowercase: bool,
}

impl TokenizationScheme {
    pub fn new(name: Tokenizer, lowercase: bool) -> Self {
        TokenizationScheme { name, lowercase }
    }
}

fn is_punct_or_symbol(c: char) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    let re = RE.get_or_init(|| Regex::new(r"^[\p{P}\p{S}]$").expect("valid regex"));
    let mut buf = [0u8; 4];
    re.is_match(c.encode_utf8(&mut buf))
}

fn intl_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let between_digits = i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_numeric()
                && chars[i + 1].is_numeric()
                && matches!(c, '.' | ',');
            if is_punct_or_symbol(c) && !between_digits {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

pub fn tokenize(text: &str, scheme: &TokenizationScheme) -> Vec<String> {
    let lowered;
    let text = if scheme.lowercase {
        lowered = text.to_lowercase();
        lowered.as_str()
    } else {
        text
    };
    match scheme.name {
        Tokenizer::Whitespace => text.split_whitespace().map(str::to_string).collect(),
        Tokenizer::Intl => intl_tokens(text),
        Tokenizer::Char => text
            .graphemes(true)
            .filter(|g| !g.chars().all(char::is_whitespace))
            .map(str::to_string)
            .collect(),
    }
}
