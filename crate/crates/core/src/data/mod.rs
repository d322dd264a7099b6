//! Dataset ingestion: IDX image files, numeric CSV and bag-of-words corpora.

mod bow;
mod csv;
mod idx;

pub use self::bow::{
    bow_to_dataset, frequency_filter, info_gain_select, IG_TIE_SCALE, information_gain, load_bow, parse_bow, BowCorpus,
};
pub use self::csv::{load_matrix_csv, parse_matrix_csv};
pub use self::idx::{encode_idx, load_idx, parse_idx, IdxBytes};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Examples as rows of `x`, every value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Option<Vec<usize>>,
    /// `class_names[i]` names dense label `i`.
    pub class_names: Option<Vec<String>>,
    /// `(rows, cols)` when each example is a flattened image.
    pub image_dims: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(x: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        for r in 0..x.rows() {
            for (c, &v) in x.row(r).iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange { row: r + 1, col: c + 1, value: v });
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != x.rows() {
                return Err(Error::CountMismatch { images: x.rows(), labels: l.len() });
            }
        }
        Ok(Dataset {
            x,
            labels,
            class_names: None,
            image_dims: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    /// Number of classes: the length of `class_names` if present, otherwise
    /// one past the largest label.
    pub fn num_classes(&self) -> usize {
        if let Some(names) = &self.class_names {
            return names.len();
        }
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |&m| m + 1)
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::invalid("dataset has no labels"))
    }

    fn class_name(&self, label: usize) -> String {
        self.class_names
            .as_ref()
            .and_then(|n| n.get(label).cloned())
            .unwrap_or_else(|| label.to_string())
    }
}

/// Keeps the rows whose label is in `keep` and renumbers labels densely in
/// the order of `keep` (`[1, 2, 6]` becomes `0, 1, 2`). The original label
/// names end up in `class_names`. An empty result is an error.
pub fn subset_by_labels(d: &Dataset, keep: &[usize]) -> Result<Dataset> {
    let out = subset_by_labels_allow_empty(d, keep)?;
    if out.is_empty() {
        return Err(Error::invalid(format!("no examples carry any of the labels {keep:?}")));
    }
    Ok(out)
}

/// Like [`subset_by_labels`] but returns an empty dataset when nothing matches.
pub fn subset_by_labels_allow_empty(d: &Dataset, keep: &[usize]) -> Result<Dataset> {
    if keep.is_empty() {
        return Err(Error::invalid("label subset must not be empty"));
    }
    let labels = d.labels()?;
    let mut rows = Vec::new();
    let mut new_labels = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(pos) = keep.iter().position(|k| k == l) {
            rows.push(i);
            new_labels.push(pos);
        }
    }
    Ok(Dataset {
        x: d.x.select_rows(&rows),
        labels: Some(new_labels),
        class_names: Some(keep.iter().map(|&k| d.class_name(k)).collect()),
        image_dims: d.image_dims,
    })
}
