//! Vocabulary and tokenization.
//!
//! Four reserved tokens are always present at fixed ids: `<unk>` (0),
//! `<bos>` (1), `<eos>` (2) and `<sep>` (3). `<bos>` and `<sep>` are
//! structural markers: they may appear in conditioning context but never
//! receive probability mass as prediction targets. Every other token,
//! plus `<unk>` and `<eos>`, is an *event* token.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub type TokenId = u32;

pub const UNK: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const SEP: TokenId = 3;

pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const SEP_TOKEN: &str = "<sep>";

/// Dense token vocabulary with reserved markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    pub fn new() -> Self {
        let mut vocab = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for reserved in [UNK_TOKEN, BOS_TOKEN, EOS_TOKEN, SEP_TOKEN] {
            vocab.add_or_get(reserved);
        }
        vocab
    }

    /// Rebuild from a token list (deserialization path). The first four
    /// entries must be the reserved markers in their fixed order.
    pub fn from_tokens(tokens: Vec<String>) -> crate::Result<Self> {
        let reserved = [UNK_TOKEN, BOS_TOKEN, EOS_TOKEN, SEP_TOKEN];
        if tokens.len() < reserved.len() {
            return Err(crate::Error::BadFormat(
                "vocab is missing reserved tokens".into(),
            ));
        }
        for (i, want) in reserved.iter().enumerate() {
            if tokens[i] != *want {
                return Err(crate::Error::BadFormat(format!(
                    "reserved token {i} is {:?}, expected {want:?}",
                    tokens[i]
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id as TokenId).is_some() {
                return Err(crate::Error::BadFormat(format!(
                    "duplicate vocab token {tok:?}"
                )));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }

    /// Number of event tokens (everything except `<bos>` and `<sep>`).
    pub fn event_len(&self) -> usize {
        self.tokens.len() - 2
    }

    pub fn is_event(&self, id: TokenId) -> bool {
        id != BOS && id != SEP && (id as usize) < self.tokens.len()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Insert `token` if absent; returns its id either way.
    pub fn add_or_get(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }
}

/// Token id sequence, valid against some [`Vocab`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSeq(pub Vec<TokenId>);

impl TokenSeq {
    pub fn new(ids: Vec<TokenId>) -> Self {
        TokenSeq(ids)
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Render back to surface text, tokens joined by single spaces.
    pub fn to_text(&self, vocab: &Vocab) -> String {
        let mut out = String::new();
        for (i, &id) in self.0.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(vocab.token(id).unwrap_or(UNK_TOKEN));
        }
        out
    }
}

impl From<Vec<TokenId>> for TokenSeq {
    fn from(ids: Vec<TokenId>) -> Self {
        TokenSeq(ids)
    }
}

/// Split text into surface tokens: lowercase, whitespace-split, then
/// detach leading and trailing non-alphanumeric characters as single-char
/// tokens. Digit runs stay intact ("1999" is one token).
pub fn surface_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.to_lowercase().split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && !chars[start].is_alphanumeric() {
            start += 1;
        }
        while end > start && !chars[end - 1].is_alphanumeric() {
            end -= 1;
        }
        for &c in &chars[..start] {
            out.push(c.to_string());
        }
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        for &c in &chars[end..] {
            out.push(c.to_string());
        }
    }
    out
}

/// Tokenize, appending unseen tokens to the vocabulary.
pub fn tokenize_build(text: &str, vocab: &mut Vocab) -> TokenSeq {
    TokenSeq(
        surface_tokens(text)
            .iter()
            .map(|t| vocab.add_or_get(t))
            .collect(),
    )
}

/// Tokenize against a frozen vocabulary; unseen tokens map to `<unk>`.
pub fn tokenize_frozen(text: &str, vocab: &Vocab) -> TokenSeq {
    TokenSeq(
        surface_tokens(text)
            .iter()
            .map(|t| vocab.id(t).unwrap_or(UNK))
            .collect(),
    )
}

/// One content-transfer instance: extend `context` with `target`, drawing
/// facts from `grounding`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub grounding: String,
    pub context: String,
    pub target: String,
}

impl Example {
    pub fn new(
        grounding: impl Into<String>,
        context: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Example {
            grounding: grounding.into(),
            context: context.into(),
            target: target.into(),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.target.trim().is_empty() {
            return Err(crate::Error::InvalidArgument(
                "example target must be non-empty".into(),
            ));
        }
        Ok(())
    }
}
