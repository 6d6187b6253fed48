use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sampling::Discrete;
use crate::walk_gen::WalkCorpus;

/// Tokens in order of first appearance with their corpus frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.index_of(token).map(|i| self.counts[i])
    }

    /// Rewrites the corpus walks as vocabulary indices.
    pub fn encode(&self, corpus: &WalkCorpus) -> Vec<Vec<u32>> {
        let remap: Vec<u32> = corpus
            .names()
            .iter()
            .map(|name| self.index.get(name).map_or(u32::MAX, |&i| i as u32))
            .collect();
        corpus
            .walks()
            .iter()
            .map(|w| w.iter().map(|&t| remap[t as usize]).collect())
            .collect()
    }
}

/// Exact token counts; no pruning, every token keeps a row.
pub fn build_vocab(corpus: &WalkCorpus) -> Result<Vocabulary> {
    if corpus.token_count() == 0 {
        return Err(Error::InvalidArgument(
            "cannot build a vocabulary from an empty corpus".into(),
        ));
    }
    let mut slot: Vec<Option<usize>> = vec![None; corpus.names().len()];
    let mut tokens = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for &t in corpus.walks().iter().flatten() {
        let i = *slot[t as usize].get_or_insert_with(|| {
            tokens.push(corpus.names()[t as usize].clone());
            counts.push(0);
            tokens.len() - 1
        });
        counts[i] += 1;
    }
    let index = tokens
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    Ok(Vocabulary {
        tokens,
        counts,
        index,
    })
}

/// Noise distribution for negative sampling, `P(w) ∝ count(w)^0.75`.
pub fn negative_sampling_distribution(vocab: &Vocabulary) -> Discrete {
    let masses: Vec<f64> = vocab
        .counts
        .iter()
        .map(|&c| (c as f64).powf(0.75))
        .collect();
    Discrete::from_masses(&masses).expect("vocabulary counts are positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_in_first_appearance_order() {
        let corpus = WalkCorpus::from_tokens(&[vec!["A", "B"], vec!["B", "C"]]);
        let v = build_vocab(&corpus).unwrap();
        assert_eq!(v.tokens(), ["A", "B", "C"]);
        assert_eq!(v.counts(), [1, 2, 1]);
    }

    #[test]
    fn order_ignores_name_table_order() {
        // Name table says Z first, but A is seen first in the walks.
        let corpus = WalkCorpus::new(vec!["Z".into(), "A".into()], vec![vec![1, 0, 1]]).unwrap();
        let v = build_vocab(&corpus).unwrap();
        assert_eq!(v.tokens(), ["A", "Z"]);
        assert_eq!(v.encode(&corpus), vec![vec![0, 1, 0]]);
    }

    #[test]
    fn empty_corpus_fails() {
        let corpus = WalkCorpus::from_tokens::<&str>(&[]);
        assert!(build_vocab(&corpus).is_err());
    }

    #[test]
    fn indices_stable_under_append() {
        let base = vec![vec!["A", "B", "C"], vec!["C", "D"]];
        let mut extended = base.clone();
        extended.push(vec!["E", "A", "F"]);
        let v1 = build_vocab(&WalkCorpus::from_tokens(&base)).unwrap();
        let v2 = build_vocab(&WalkCorpus::from_tokens(&extended)).unwrap();
        for t in v1.tokens() {
            assert_eq!(v1.index_of(t), v2.index_of(t));
        }
    }

    #[test]
    fn noise_distribution() {
        let corpus = WalkCorpus::from_tokens(&[vec!["A"; 16], vec!["B"]]);
        let d = negative_sampling_distribution(&build_vocab(&corpus).unwrap());
        assert!((d.probs()[0] - 8.0 / 9.0).abs() < 1e-12);
        assert!((d.probs()[1] - 1.0 / 9.0).abs() < 1e-12);

        let corpus = WalkCorpus::from_tokens(&[vec!["A", "B", "C", "D", "E", "F"]]);
        let d = negative_sampling_distribution(&build_vocab(&corpus).unwrap());
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-12));
    }
}
