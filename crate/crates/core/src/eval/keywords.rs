//! Word-frequency summaries of explanation texts.

use std::collections::{BTreeMap, BTreeSet};

use crate::autoencoder::tokenize;

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const BOILERPLATE: &str = include_str!("../../data/boilerplate.txt");

fn word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// The fixed English stopword list.
pub fn stopwords() -> BTreeSet<String> {
    word_list(STOPWORDS)
}

/// Words the explanation templates contribute; the default blocklist.
pub fn template_blocklist() -> BTreeSet<String> {
    word_list(BOILERPLATE)
}

/// Top `top_k` words by count after dropping stopwords, blocklisted words
/// and pure numbers. Ties are broken alphabetically.
pub fn keyword_frequencies<S: AsRef<str>>(
    texts: &[S],
    blocklist: &BTreeSet<String>,
    top_k: usize,
) -> Vec<(String, usize)> {
    let stop = stopwords();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in texts {
        for w in tokenize(t.as_ref()) {
            if stop.contains(&w) || blocklist.contains(&w) || w.chars().all(|c| c.is_ascii_digit()) {
                continue;
            }
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    // BTreeMap order is alphabetical and the sort is stable.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked.truncate(top_k);
    ranked
}
