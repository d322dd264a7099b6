//! Single sigmoid autoencoder: forward pass, composite loss and its exact
//! gradient.
//!
//! Shapes follow the row-major batch convention. `x` is `m × n`, the encoder
//! `w1` is `n' × n`, the decoder `w2` is `n × n'`. Then
//!
//! ```text
//! H = σ(X·W1ᵀ + bx)        (m × n')
//! Y = σ(H·W2ᵀ + bh)        (m × n)
//! ```
//!
//! The loss is `‖Y − X‖²_F / m + β·Σ_r KL(p ‖ p̂_r) + Σ_{W1,W2} f(w)`, where
//! `p̂_r` is the batch-mean activation of hidden unit `r` and `f` is the
//! negative-weight penalty from [`crate::penalty`]. Biases are never penalized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperparams::Hyperparams;
use crate::matrix::{sigmoid, Matrix};
use crate::penalty::{add_penalty_grad, penalty_sum};
use crate::rng::Rng;

/// Mean activations are clamped into `[KL_CLAMP, 1 − KL_CLAMP]` before the
/// logarithms of the KL term.
pub const KL_CLAMP: f64 = 1e-8;

/// Encoder and decoder parameters of one autoencoder.
#[derive(Clone, Debug, PartialEq)]
pub struct AeParams {
    pub w1: Matrix,
    pub bx: Vec<f64>,
    pub w2: Matrix,
    pub bh: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean squared reconstruction error.
    pub recon: f64,
    /// β-weighted KL sparsity term.
    pub kl: f64,
    /// Nonnegativity penalty summed over both weight matrices.
    pub penalty: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AeGrads {
    pub dw1: Matrix,
    pub dbx: Vec<f64>,
    pub dw2: Matrix,
    pub dbh: Vec<f64>,
}

impl AeParams {
    /// Uniform weights in `[-r, r]` with `r = √(6 / (n + n' + 1))`, zero biases.
    pub fn init(n_visible: usize, n_hidden: usize, rng: &mut Rng) -> Result<Self> {
        if n_visible == 0 || n_hidden == 0 {
            return Err(Error::invalid(format!(
                "autoencoder sizes must be positive, got {n_visible}-{n_hidden}"
            )));
        }
        let r = (6.0 / (n_visible + n_hidden + 1) as f64).sqrt();
        let w1 = rng.uniform(-r, r, n_hidden, n_visible)?;
        let w2 = rng.uniform(-r, r, n_visible, n_hidden)?;
        Ok(AeParams {
            w1,
            bx: vec![0.0; n_hidden],
            w2,
            bh: vec![0.0; n_visible],
        })
    }

    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        AeParams {
            w1: Matrix::zeros(n_hidden, n_visible),
            bx: vec![0.0; n_hidden],
            w2: Matrix::zeros(n_visible, n_hidden),
            bh: vec![0.0; n_visible],
        }
    }

    pub fn n_visible(&self) -> usize {
        self.w1.cols()
    }

    pub fn n_hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, n) = self.w1.shape();
        if self.w2.shape() != (n, h) || self.bx.len() != h || self.bh.len() != n {
            return Err(Error::invalid(format!(
                "inconsistent autoencoder shapes: w1 {:?}, bx {}, w2 {:?}, bh {}",
                self.w1.shape(),
                self.bx.len(),
                self.w2.shape(),
                self.bh.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.bx.iter().chain(&self.bh).all(|v| v.is_finite())
    }

    /// All parameters in the order w1, bx, w2, bh.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(&self.bx);
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(&self.bh);
        out
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.bx.len() + self.w2.len() + self.bh.len()
    }

    /// Mutable access to parameter `i` in [`flatten`](Self::flatten) order.
    pub fn param_mut(&mut self, i: usize) -> &mut f64 {
        let (a, b, c) = (self.w1.len(), self.bx.len(), self.w2.len());
        if i < a {
            &mut self.w1.as_mut_slice()[i]
        } else if i < a + b {
            &mut self.bx[i - a]
        } else if i < a + b + c {
            &mut self.w2.as_mut_slice()[i - a - b]
        } else {
            &mut self.bh[i - a - b - c]
        }
    }

    /// One gradient-descent step: `θ ← θ − rate·∇θ`.
    pub fn step(&mut self, grads: &AeGrads, rate: f64) -> Result<()> {
        self.w1.sub_scaled(rate, &grads.dw1)?;
        self.w2.sub_scaled(rate, &grads.dw2)?;
        for (b, g) in self.bx.iter_mut().zip(&grads.dbx) {
            *b -= rate * g;
        }
        for (b, g) in self.bh.iter_mut().zip(&grads.dbh) {
            *b -= rate * g;
        }
        Ok(())
    }

    /// Hidden activations `σ(X·W1ᵀ + bx)`.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.validate()?;
        if x.cols() != self.n_visible() {
            return Err(Error::ShapeMismatch {
                op: "encode",
                left: x.shape(),
                right: self.w1.shape(),
            });
        }
        let mut z = x.matmul_nt(&self.w1)?;
        z.add_row_broadcast(&self.bx)?;
        Ok(sigmoid(&z))
    }

    pub fn decode(&self, hidden: &Matrix) -> Result<Matrix> {
        let mut z = hidden.matmul_nt(&self.w2)?;
        z.add_row_broadcast(&self.bh)?;
        Ok(sigmoid(&z))
    }
}

impl AeGrads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(self.dw1.as_slice());
        out.extend_from_slice(&self.dbx);
        out.extend_from_slice(self.dw2.as_slice());
        out.extend_from_slice(&self.dbh);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.dw1.is_finite()
            && self.dw2.is_finite()
            && self.dbx.iter().chain(&self.dbh).all(|v| v.is_finite())
    }
}

/// Returns `(hidden, reconstruction)`.
pub fn ae_forward(params: &AeParams, x: &Matrix) -> Result<(Matrix, Matrix)> {
    let hidden = params.encode(x)?;
    let recon = params.decode(&hidden)?;
    Ok((hidden, recon))
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("target activation p must lie in (0, 1), got {p}")))
    }
}

#[inline]
fn clamp_mean(a: f64) -> f64 {
    a.clamp(KL_CLAMP, 1.0 - KL_CLAMP)
}

fn kl_unchecked(p: f64, mean_act: &[f64]) -> f64 {
    mean_act
        .iter()
        .map(|&a| {
            let q = clamp_mean(a);
            p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
        })
        .sum()
}

/// `Σ_r KL(p ‖ p̂_r)` between Bernoulli distributions.
pub fn kl_term(p: f64, mean_act: &[f64]) -> Result<f64> {
    check_p(p)?;
    Ok(kl_unchecked(p, mean_act))
}

fn check_batch(params: &AeParams, x: &Matrix) -> Result<()> {
    params.validate()?;
    if x.cols() != params.n_visible() {
        return Err(Error::ShapeMismatch {
            op: "autoencoder batch",
            left: x.shape(),
            right: params.w1.shape(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::Empty("autoencoder batch".into()));
    }
    Ok(())
}

pub(crate) fn squared_error_mean(recon: &Matrix, x: &Matrix) -> f64 {
    let sse: f64 = recon
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(y, t)| (y - t) * (y - t))
        .sum();
    sse / x.rows() as f64
}

fn breakdown(params: &AeParams, x: &Matrix, hidden: &Matrix, recon: &Matrix, hp: &Hyperparams) -> LossBreakdown {
    let recon_err = squared_error_mean(recon, x);
    let kl = if hp.beta == 0.0 {
        0.0
    } else {
        hp.beta * kl_unchecked(hp.p, &hidden.column_means())
    };
    let penalty = penalty_sum(&params.w1, hp) + penalty_sum(&params.w2, hp);
    LossBreakdown {
        recon: recon_err,
        kl,
        penalty,
        total: recon_err + kl + penalty,
    }
}

pub fn ae_loss(params: &AeParams, x: &Matrix, hp: &Hyperparams) -> Result<LossBreakdown> {
    check_batch(params, x)?;
    hp.validate()?;
    let (hidden, recon) = ae_forward(params, x)?;
    Ok(breakdown(params, x, &hidden, &recon, hp))
}

pub fn ae_grad(params: &AeParams, x: &Matrix, hp: &Hyperparams) -> Result<AeGrads> {
    ae_loss_and_grad(params, x, hp).map(|(_, g)| g)
}

/// Loss and gradient from a single forward pass.
pub fn ae_loss_and_grad(params: &AeParams, x: &Matrix, hp: &Hyperparams) -> Result<(LossBreakdown, AeGrads)> {
    check_batch(params, x)?;
    hp.validate()?;
    let (hidden, recon) = ae_forward(params, x)?;
    let loss = breakdown(params, x, &hidden, &recon, hp);
    let m = x.rows() as f64;

    // output pre-activation: d/dz2 of ‖y − x‖²/m is 2(y − x)·y(1 − y)/m
    let mut d_out = recon.clone();
    for (d, &t) in d_out.as_mut_slice().iter_mut().zip(x.as_slice()) {
        let y = *d;
        *d = 2.0 * (y - t) * y * (1.0 - y) / m;
    }
    let mut dw2 = d_out.matmul_tn(&hidden)?;
    let dbh = d_out.column_sums();

    let mut d_hidden = d_out.matmul(&params.w2)?;
    if hp.beta != 0.0 {
        let p = hp.p;
        let sparsity: Vec<f64> = hidden
            .column_means()
            .into_iter()
            .map(|a| {
                let q = clamp_mean(a);
                hp.beta * (-p / q + (1.0 - p) / (1.0 - q)) / m
            })
            .collect();
        d_hidden.add_row_broadcast(&sparsity)?;
    }
    for (d, &h) in d_hidden.as_mut_slice().iter_mut().zip(hidden.as_slice()) {
        *d *= h * (1.0 - h);
    }
    let mut dw1 = d_hidden.matmul_tn(x)?;
    let dbx = d_hidden.column_sums();

    add_penalty_grad(&mut dw1, &params.w1, hp);
    add_penalty_grad(&mut dw2, &params.w2, hp);

    Ok((loss, AeGrads { dw1, dbx, dw2, dbh }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(seed: u64, n: usize, h: usize, m: usize) -> (AeParams, Matrix) {
        let mut rng = Rng::new(seed);
        let mut p = AeParams::init(n, h, &mut rng).unwrap();
        for b in p.bx.iter_mut().chain(p.bh.iter_mut()) {
            *b = rng.uniform_scalar(-0.5, 0.5);
        }
        let x = rng.uniform(0.0, 1.0, m, n).unwrap();
        (p, x)
    }

    #[test]
    fn zero_params_give_half_activations() {
        let p = AeParams::zeros(5, 3);
        let x = Rng::new(1).uniform(0.0, 1.0, 4, 5).unwrap();
        let (h, y) = ae_forward(&p, &x).unwrap();
        assert!(h.as_slice().iter().all(|&v| v == 0.5));
        assert!(y.as_slice().iter().all(|&v| v == 0.5));
        assert_eq!(h.shape(), (4, 3));
        assert_eq!(y.shape(), (4, 5));
    }

    #[test]
    fn single_unit_hidden_value() {
        let mut p = AeParams::zeros(2, 1);
        p.w1 = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let (h, _) = ae_forward(&p, &x).unwrap();
        assert!((h.get(0, 0) - 0.880_797_077_977_882_3).abs() < 1e-15);
    }

    #[test]
    fn rows_processed_independently() {
        let (p, x) = toy(4, 6, 3, 5);
        let (h, y) = ae_forward(&p, &x).unwrap();
        let single = x.select_rows(&[3]);
        let (h3, y3) = ae_forward(&p, &single).unwrap();
        assert_eq!(h3.row(0), h.row(3));
        assert_eq!(y3.row(0), y.row(3));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = AeParams::zeros(5, 3);
        assert!(matches!(ae_forward(&p, &Matrix::zeros(2, 4)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn kl_examples() {
        assert!(kl_term(0.05, &[0.05, 0.05]).unwrap().abs() < 1e-15);
        let v = kl_term(0.05, &[0.5]).unwrap();
        let oracle = 0.05 * (0.1f64).ln() + 0.95 * (0.95f64 / 0.5).ln();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.494_63).abs() < 1e-5);
        assert!(kl_term(0.05, &[0.3]).unwrap() > 0.0);
        assert!(kl_term(0.0, &[0.3]).is_err());
        assert!(kl_term(1.0, &[0.3]).is_err());
        // saturated unit stays finite
        assert!(kl_term(0.05, &[1.0]).unwrap().is_finite());
    }

    #[test]
    fn loss_components_sum() {
        let (p, x) = toy(11, 6, 3, 4);
        let hp = Hyperparams::default();
        let l = ae_loss(&p, &x, &hp).unwrap();
        assert_eq!(l.total, l.recon + l.kl + l.penalty);
        assert!(l.recon >= 0.0 && l.kl >= 0.0 && l.penalty >= 0.0);
    }

    #[test]
    fn nonnegative_weights_have_no_penalty() {
        let (mut p, x) = toy(2, 6, 3, 4);
        for v in p.w1.as_mut_slice().iter_mut().chain(p.w2.as_mut_slice()) {
            *v = v.abs();
        }
        let hp = Hyperparams::default();
        assert_eq!(ae_loss(&p, &x, &hp).unwrap().penalty, 0.0);
        let with = ae_grad(&p, &x, &hp).unwrap();
        let without = ae_grad(&p, &x, &hp.unconstrained()).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn bias_gradients_ignore_penalty() {
        let (mut p, x) = toy(3, 6, 3, 4);
        for v in p.w1.as_mut_slice().iter_mut().chain(p.w2.as_mut_slice()) {
            *v = -v.abs();
        }
        let hp = Hyperparams::default();
        let with = ae_grad(&p, &x, &hp).unwrap();
        let without = ae_grad(&p, &x, &hp.unconstrained()).unwrap();
        assert_eq!(with.dbx, without.dbx);
        assert_eq!(with.dbh, without.dbh);
        assert_ne!(with.dw1, without.dw1);
    }

    #[test]
    fn flatten_and_param_mut_agree() {
        let (mut p, _) = toy(5, 4, 2, 1);
        let flat = p.flatten();
        assert_eq!(flat.len(), p.param_count());
        for (i, &v) in flat.iter().enumerate() {
            assert_eq!(*p.param_mut(i), v);
        }
    }
}
