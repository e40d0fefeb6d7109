use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Lowercased words split on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Serialized as its word list; the lookup index is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        Vocab::from_words(words)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

impl Vocab {
    /// Ids are assigned by first occurrence after the two reserved entries.
    pub fn build<S: AsRef<str>>(corpus: &[S]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::validation("cannot build a vocabulary from an empty corpus"));
        }
        let mut v = Vocab::from_words(vec![PAD.to_string(), UNK.to_string()]);
        for text in corpus {
            for w in tokenize(text.as_ref()) {
                if !v.index.contains_key(&w) {
                    v.index.insert(w.clone(), v.words.len());
                    v.words.push(w);
                }
            }
        }
        Ok(v)
    }

    fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Token ids of exactly `maxlen` entries: the first `maxlen` words, then
/// padding. The flag is true when the text held no words.
pub fn tokenize_pad(text: &str, vocab: &Vocab, maxlen: usize) -> (Vec<usize>, bool) {
    let mut ids: Vec<usize> = tokenize(text)
        .iter()
        .take(maxlen)
        .map(|w| vocab.id(w))
        .collect();
    let empty = ids.is_empty();
    if empty {
        tracing::warn!("empty explanation text encoded as all padding");
    }
    ids.resize(maxlen, PAD_ID);
    (ids, empty)
}
