//! Scalar diagnostics for trained autoencoders and weight matrices.

use serde::Serialize;

use crate::autoencoder::{ae_forward, kl_term, squared_error_mean, AeParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Mean squared reconstruction error `‖Y − X‖²_F / m`. The same quantity as
/// `LossBreakdown::recon`.
pub fn reconstruction_error(params: &AeParams, x: &Matrix) -> Result<f64> {
    let (_, recon) = ae_forward(params, x)?;
    if x.rows() == 0 {
        return Err(Error::Empty("reconstruction batch".into()));
    }
    Ok(squared_error_mean(&recon, x))
}

/// Unweighted `Σ_r KL(p ‖ p̂_r)` over the hidden units' mean activations on `x`.
pub fn kl_sparsity_measure(params: &AeParams, x: &Matrix, p: f64) -> Result<f64> {
    let hidden = params.encode(x)?;
    kl_term(p, &hidden.column_means())
}

/// Share of entries that are `>= 0`.
pub fn nonneg_fraction(w: &Matrix) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::Empty("weight matrix".into()));
    }
    let n = w.as_slice().iter().filter(|&&v| v >= 0.0).count();
    Ok(n as f64 / w.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramSpec {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl HistogramSpec {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `bin_lo,bin_hi,count` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.bin_edges[i], self.bin_edges[i + 1], c));
        }
        out
    }
}

/// `bins` equal-width bins over `[lo, hi]`. Values outside the range land in
/// the first or last bin.
pub fn weight_histogram(w: &Matrix, bins: usize, lo: f64, hi: f64) -> Result<HistogramSpec> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("histogram range needs finite lo < hi, got [{lo}, {hi}]")));
    }
    let width = hi - lo;
    let bin_edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 / bins as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for &v in w.as_slice() {
        let pos = ((v - lo) / width * bins as f64).floor();
        let idx = if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    Ok(HistogramSpec { bin_edges, counts })
}
