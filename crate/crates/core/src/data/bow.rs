//! Bag-of-words corpora and term selection.
//!
//! File format: one document per line, `label<TAB>term:count term:count …`.
//! Blank lines are skipped. Repeated terms within a line are summed.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct BowCorpus {
    /// `docs × vocab` term counts (nonnegative integers stored as `f64`).
    pub counts: Matrix,
    pub vocab: Vec<String>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl BowCorpus {
    pub fn docs(&self) -> usize {
        self.counts.rows()
    }

    /// Total count of each term over the corpus.
    pub fn term_totals(&self) -> Vec<f64> {
        self.counts.column_sums()
    }

    fn keep_columns(&self, cols: &[usize]) -> BowCorpus {
        BowCorpus {
            counts: self.counts.select_columns(cols),
            vocab: cols.iter().map(|&c| self.vocab[c].clone()).collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Re-expresses this corpus over `reference`'s vocabulary and class
    /// numbering, e.g. to push a test split through a selection made on the
    /// training split. Terms unknown to `reference` are dropped.
    pub fn align_to(&self, reference: &BowCorpus) -> Result<BowCorpus> {
        let own: HashMap<&str, usize> = self.vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut counts = Matrix::zeros(self.docs(), reference.vocab.len());
        for (j, term) in reference.vocab.iter().enumerate() {
            if let Some(&src) = own.get(term.as_str()) {
                for r in 0..self.docs() {
                    counts.set(r, j, self.counts.get(r, src));
                }
            }
        }
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let name = &self.class_names[l];
                reference
                    .class_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::invalid(format!("class {name:?} not present in reference corpus")))
            })
            .collect::<Result<_>>()?;
        Ok(BowCorpus {
            counts,
            vocab: reference.vocab.clone(),
            labels,
            class_names: reference.class_names.clone(),
        })
    }
}

/// Class names sort numerically when every name is an integer, otherwise
/// lexicographically.
fn sort_class_names(names: &mut [String]) {
    if names.iter().all(|n| n.parse::<u64>().is_ok()) {
        names.sort_by_key(|n| n.parse::<u64>().expect("checked"));
    } else {
        names.sort();
    }
}

pub fn parse_bow(text: &str) -> Result<BowCorpus> {
    let mut vocab: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut docs: Vec<(String, Vec<(usize, u64)>)> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (label, terms) = line.split_once('\t').ok_or_else(|| Error::Parse {
            what: "bag-of-words",
            line: line_no,
            msg: "missing TAB after label".into(),
        })?;
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::Parse {
                what: "bag-of-words",
                line: line_no,
                msg: "empty label".into(),
            });
        }
        let mut entries = Vec::new();
        for tok in terms.split_whitespace() {
            let (term, count) = tok.rsplit_once(':').ok_or_else(|| Error::Parse {
                what: "bag-of-words",
                line: line_no,
                msg: format!("expected term:count, got {tok:?}"),
            })?;
            let count: u64 = count.parse().map_err(|_| Error::Parse {
                what: "bag-of-words",
                line: line_no,
                msg: format!("count in {tok:?} is not a nonnegative integer"),
            })?;
            let id = *index.entry(term.to_string()).or_insert_with(|| {
                vocab.push(term.to_string());
                vocab.len() - 1
            });
            entries.push((id, count));
        }
        docs.push((label.to_string(), entries));
    }
    if docs.is_empty() {
        return Err(Error::Empty("bag-of-words corpus".into()));
    }

    let mut class_names: Vec<String> = docs.iter().map(|(l, _)| l.clone()).collect();
    sort_class_names(&mut class_names);
    class_names.dedup();

    let mut counts = Matrix::zeros(docs.len(), vocab.len());
    let mut labels = Vec::with_capacity(docs.len());
    for (r, (label, entries)) in docs.iter().enumerate() {
        labels.push(class_names.iter().position(|n| n == label).expect("collected above"));
        for &(id, c) in entries {
            counts.set(r, id, counts.get(r, id) + c as f64);
        }
    }
    Ok(BowCorpus {
        counts,
        vocab,
        labels,
        class_names,
    })
}

pub fn load_bow(path: impl AsRef<Path>) -> Result<BowCorpus> {
    parse_bow(&fs::read_to_string(path)?)
}

/// Drops terms whose total corpus count is below `lo` or above `hi`.
/// Pass `u64::MAX` for an open upper bound.
pub fn frequency_filter(c: &BowCorpus, lo: u64, hi: u64) -> Result<BowCorpus> {
    if lo > hi {
        return Err(Error::invalid(format!("frequency bounds reversed: {lo} > {hi}")));
    }
    let keep: Vec<usize> = c
        .term_totals()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= lo as f64 && t <= hi as f64)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::invalid(format!("no term has a total count within [{lo}, {hi}]")));
    }
    Ok(c.keep_columns(&keep))
}

fn entropy_bits(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain (bits) of each term's presence indicator about the class:
/// `H(C) − P(t)·H(C | t) − P(¬t)·H(C | ¬t)`.
pub fn information_gain(c: &BowCorpus) -> Vec<f64> {
    let classes = c.class_names.len().max(c.labels.iter().max().map_or(0, |m| m + 1));
    let mut class_counts = vec![0usize; classes];
    for &l in &c.labels {
        class_counts[l] += 1;
    }
    let h_class = entropy_bits(&class_counts);
    let n = c.docs() as f64;

    (0..c.counts.cols())
        .map(|t| {
            let mut present = vec![0usize; classes];
            for (r, &l) in c.labels.iter().enumerate() {
                if c.counts.get(r, t) > 0.0 {
                    present[l] += 1;
                }
            }
            let absent: Vec<usize> = class_counts.iter().zip(&present).map(|(a, p)| a - p).collect();
            let n_present: usize = present.iter().sum();
            let p_t = n_present as f64 / n;
            h_class - p_t * entropy_bits(&present) - (1.0 - p_t) * entropy_bits(&absent)
        })
        .collect()
}

/// Gains are compared after rounding to `1 / IG_TIE_SCALE` bits.
pub const IG_TIE_SCALE: f64 = 1e12;

/// Keeps the `k` terms with the highest information gain. Ties go to the
/// earlier vocabulary entry; the kept terms stay in vocabulary order.
pub fn info_gain_select(c: &BowCorpus, k: usize) -> Result<BowCorpus> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k > c.vocab.len() {
        return Err(Error::invalid(format!(
            "cannot select {k} terms from a vocabulary of {}",
            c.vocab.len()
        )));
    }
    // gains equal up to rounding (e.g. class-permuted contingency tables)
    // count as ties
    let key: Vec<i64> = information_gain(c).iter().map(|g| (g * IG_TIE_SCALE).round() as i64).collect();
    let mut order: Vec<usize> = (0..key.len()).collect();
    // stable sort keeps vocabulary order among equal gains
    order.sort_by(|&a, &b| key[b].cmp(&key[a]));
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    Ok(c.keep_columns(&keep))
}

/// Scales each document by its own largest count; empty documents stay zero.
pub fn bow_to_dataset(c: &BowCorpus) -> Dataset {
    let mut x = c.counts.clone();
    for r in 0..x.rows() {
        let row = x.row_mut(r);
        let max = row.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            for v in row.iter_mut() {
                *v /= max;
            }
        }
    }
    Dataset {
        x,
        labels: Some(c.labels.clone()),
        class_names: Some(c.class_names.clone()),
        image_dims: None,
    }
}
