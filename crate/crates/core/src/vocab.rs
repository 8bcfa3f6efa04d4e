use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Corpus;
use crate::error::{io_err, Result};

pub const UNK: usize = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// Token to embedding-row map. Row 0 is reserved for unseen tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(std::iter::empty::<&str>())
    }
}

impl Vocabulary {
    /// Builds a vocabulary in first-seen order.
    pub fn from_tokens<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let mut v = Self { tokens: vec![UNK_TOKEN.to_string()], index: HashMap::new() };
        v.index.insert(UNK_TOKEN.to_string(), UNK);
        for t in tokens {
            v.insert(t.as_ref());
        }
        v
    }

    pub fn from_corpora<'a>(corpora: impl IntoIterator<Item = &'a Corpus>) -> Self {
        Self::from_tokens(
            corpora
                .into_iter()
                .flat_map(|c| c.instances.iter().flat_map(|i| i.tokens.iter())),
        )
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string(&VocabFile { tokens: self.tokens[1..].to_vec() })?;
        fs::write(path, s + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: VocabFile = serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?;
        Ok(Self::from_tokens(f.tokens))
    }
}
