//! Sparse bag-of-words storage.
//!
//! A [`Corpus`] holds `I` documents over a vocabulary of `J` word ids. Each
//! [`Document`] keeps only its nonzero counts, sorted by word id. An optional
//! [`Groups`] partition of the word ids supports the grouped (multivariate)
//! model, where each group is its own multinomial.

mod docword;
pub mod rollcall;

pub use docword::{
    load_docword, load_group_file, load_vocab, read_docword, save_docword, write_docword,
    write_group_file, write_vocab,
};

use crate::error::{Error, Result};
use crate::mathfn::{ln_factorial, ln_gamma};

/// Sparse word counts of one document, sorted by word id with zeros suppressed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    entries: Vec<(usize, u32)>,
}

impl Document {
    /// Build from `(word, count)` pairs in any order. Duplicate words are summed
    /// and zero counts dropped.
    pub fn from_counts(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut entries: Vec<(usize, u32)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        entries.sort_unstable_by_key(|&(w, _)| w);
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(entries.len());
        for (w, c) in entries {
            match merged.last_mut() {
                Some((last, total)) if *last == w => *total += c,
                _ => merged.push((w, c)),
            }
        }
        Document { entries: merged }
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// Total count `L`.
    pub fn len(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct words.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, word: usize) -> u32 {
        self.entries
            .binary_search_by_key(&word, |&(w, _)| w)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Largest word id present, if any.
    pub fn max_word(&self) -> Option<usize> {
        self.entries.last().map(|&(w, _)| w)
    }

    /// One sequence with this bag, words in ascending id order.
    pub fn to_sequence(&self) -> DocumentSeq {
        let tokens = self
            .entries
            .iter()
            .flat_map(|&(w, c)| std::iter::repeat_n(w, c as usize))
            .collect();
        DocumentSeq { tokens }
    }
}

/// A document as an ordered list of word ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocumentSeq {
    pub tokens: Vec<usize>,
}

/// Collapse a sequence into its bag of words.
pub fn bag(seq: &DocumentSeq) -> Document {
    Document::from_counts(seq.tokens.iter().map(|&w| (w, 1)))
}

/// `ln(L! / Π_j w_j!)`, the number of sequences sharing this bag.
pub fn log_multinomial_coeff(doc: &Document) -> f64 {
    let total = doc.len();
    if total == 0 {
        return 0.0;
    }
    ln_gamma(total as f64 + 1.0).expect("positive argument")
        - doc
            .entries
            .iter()
            .map(|&(_, c)| ln_factorial(c as u64))
            .sum::<f64>()
}

/// A partition of the word ids `0..J` into groups `0..G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Groups {
    of_word: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Groups {
    /// From a per-word group id. Every group id in `0..G` must be used.
    pub fn new(of_word: Vec<usize>) -> Result<Self> {
        let num_groups = of_word.iter().map(|&g| g + 1).max().unwrap_or(0);
        let mut members = vec![Vec::new(); num_groups];
        for (w, &g) in of_word.iter().enumerate() {
            members[g].push(w);
        }
        if let Some(g) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::Validation(format!(
                "group ids must be contiguous: group {} has no words",
                g + 1
            )));
        }
        Ok(Groups { of_word, members })
    }

    /// A single group holding every word.
    pub fn single(num_words: usize) -> Self {
        Groups {
            of_word: vec![0; num_words],
            members: vec![(0..num_words).collect()],
        }
    }

    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    pub fn num_words(&self) -> usize {
        self.of_word.len()
    }

    pub fn group_of(&self, word: usize) -> usize {
        self.of_word[word]
    }

    pub fn members(&self, group: usize) -> &[usize] {
        &self.members[group]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.of_word
    }

    /// Per-group totals `L_g = Σ_{j ∈ B_g} w_j`.
    pub fn totals(&self, doc: &Document) -> Vec<u64> {
        let mut out = vec![0u64; self.num_groups()];
        for &(w, c) in doc.entries() {
            out[self.of_word[w]] += c as u64;
        }
        out
    }

    /// Split a document into one sub-document per group.
    pub fn split(&self, doc: &Document) -> Vec<Document> {
        let mut parts = vec![Vec::new(); self.num_groups()];
        for &(w, c) in doc.entries() {
            parts[self.of_word[w]].push((w, c));
        }
        parts
            .into_iter()
            .map(|entries| Document { entries })
            .collect()
    }
}

/// Sparse document-by-word count matrix with optional vocabulary and groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    docs: Vec<Document>,
    num_words: usize,
    total: u64,
    vocab: Option<Vec<String>>,
    groups: Option<Groups>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>, num_words: usize) -> Result<Self> {
        if let Some((i, w)) = docs
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.max_word().map(|w| (i, w)))
            .find(|&(_, w)| w >= num_words)
        {
            return Err(Error::Validation(format!(
                "document {} uses word id {} but the vocabulary has {} words",
                i + 1,
                w + 1,
                num_words
            )));
        }
        let total = docs.iter().map(Document::len).sum();
        Ok(Corpus {
            docs,
            num_words,
            total,
            vocab: None,
            groups: None,
        })
    }

    /// `I`.
    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    /// `J`.
    pub fn num_words(&self) -> usize {
        self.num_words
    }

    /// `S = Σ_i L_(i)`.
    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn nnz(&self) -> usize {
        self.docs.iter().map(Document::nnz).sum()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc(&self, i: usize) -> &Document {
        &self.docs[i]
    }

    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    pub fn groups(&self) -> Option<&Groups> {
        self.groups.as_ref()
    }

    pub fn with_vocab(mut self, vocab: Vec<String>) -> Result<Self> {
        if vocab.len() != self.num_words {
            return Err(Error::Validation(format!(
                "vocabulary has {} tokens but the corpus has {} word ids",
                vocab.len(),
                self.num_words
            )));
        }
        self.vocab = Some(vocab);
        Ok(self)
    }

    pub fn with_groups(mut self, groups: Groups) -> Result<Self> {
        if groups.num_words() != self.num_words {
            return Err(Error::Validation(format!(
                "group partition covers {} words, corpus has {}",
                groups.num_words(),
                self.num_words
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    /// Attach a partition given as `(word, group)` pairs, both zero-based.
    ///
    /// Every word id in `0..J` must be assigned exactly once and the group ids
    /// must be contiguous from zero.
    pub fn split_groups(self, assignment: &[(usize, usize)]) -> Result<Self> {
        let mut of_word: Vec<Option<usize>> = vec![None; self.num_words];
        for &(w, g) in assignment {
            let slot = of_word.get_mut(w).ok_or_else(|| {
                Error::Validation(format!(
                    "group assignment names word {} outside the vocabulary of {}",
                    w + 1,
                    self.num_words
                ))
            })?;
            if slot.is_some() {
                return Err(Error::Validation(format!(
                    "word {} is assigned to more than one group",
                    w + 1
                )));
            }
            *slot = Some(g);
        }
        let missing: Vec<usize> = of_word
            .iter()
            .enumerate()
            .filter(|(_, g)| g.is_none())
            .map(|(w, _)| w + 1)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Validation(format!(
                "words without a group: {missing:?}"
            )));
        }
        let groups = Groups::new(of_word.into_iter().map(Option::unwrap).collect())?;
        self.with_groups(groups)
    }

    /// Total count of each word over the collection.
    pub fn word_totals(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.num_words];
        for d in &self.docs {
            for &(w, c) in d.entries() {
                out[w] += c as u64;
            }
        }
        out
    }

    /// Split into two corpora by document index; `held_out[i]` selects the second.
    pub fn partition(&self, held_out: &[bool]) -> (Corpus, Corpus) {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (d, &h) in self.docs.iter().zip(held_out) {
            if h {
                b.push(d.clone())
            } else {
                a.push(d.clone())
            }
        }
        let make = |docs: Vec<Document>| {
            let total = docs.iter().map(Document::len).sum();
            Corpus {
                docs,
                num_words: self.num_words,
                total,
                vocab: self.vocab.clone(),
                groups: self.groups.clone(),
            }
        };
        (make(a), make(b))
    }
}
