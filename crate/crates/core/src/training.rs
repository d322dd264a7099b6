//! Full-batch gradient descent for single autoencoders, greedy layer-wise
//! stacking, the softmax head and joint fine-tuning.
//!
//! Every routine is a pure function of its inputs and `hp.seed`.

use serde::Serialize;

use crate::autoencoder::{ae_loss_and_grad, AeParams, LossBreakdown};
use crate::error::{Error, Result};
use crate::hyperparams::Hyperparams;
use crate::matrix::{argmax, softmax_rows, Matrix};
use crate::penalty::{add_penalty_grad, penalty_sum};
use crate::rng::Rng;

/// Training aborts once the total loss exceeds this or stops being finite.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxLayer {
    /// `classes × features`.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl SoftmaxLayer {
    pub fn zeros(classes: usize, features: usize) -> Self {
        SoftmaxLayer {
            w: Matrix::zeros(classes, features),
            b: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.w.rows()
    }

    pub fn logits(&self, features: &Matrix) -> Result<Matrix> {
        let mut z = features.matmul_nt(&self.w)?;
        z.add_row_broadcast(&self.b)?;
        Ok(z)
    }
}

/// Encoders from greedy pretraining, optionally topped by a softmax layer.
///
/// Only `w1`/`bx` of each encoder take part in prediction; decoders are kept
/// so that reconstruction metrics stay available.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedNetwork {
    pub encoders: Vec<AeParams>,
    pub softmax: Option<SoftmaxLayer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub dw: Matrix,
    pub db: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGrads {
    pub encoders: Vec<LayerGrads>,
    pub softmax: LayerGrads,
}

impl NetworkGrads {
    /// Same order as [`StackedNetwork::trainable_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in self.encoders.iter().chain(std::iter::once(&self.softmax)) {
            out.extend_from_slice(g.dw.as_slice());
            out.extend_from_slice(&g.db);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupervisedRecord {
    pub cross_entropy: f64,
    pub penalty: f64,
    pub total: f64,
    pub accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EpochRecord {
    Unsupervised(LossBreakdown),
    Supervised(SupervisedRecord),
}

impl EpochRecord {
    pub fn total(&self) -> f64 {
        match self {
            EpochRecord::Unsupervised(l) => l.total,
            EpochRecord::Supervised(s) => s.total,
        }
    }
}

/// Per-epoch history. Record `e` holds the loss of the parameters as they
/// were at the start of epoch `e`, before that epoch's update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub epochs_run: usize,
    pub warnings: Vec<String>,
}

impl TrainReport {
    pub fn totals(&self) -> Vec<f64> {
        self.records.iter().map(EpochRecord::total).collect()
    }

    /// CSV with a header row and one line per epoch, 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let supervised = matches!(self.records.first(), Some(EpochRecord::Supervised(_)));
        out.push_str(if supervised {
            "epoch,cross_entropy,penalty,total,accuracy\n"
        } else {
            "epoch,recon,kl,penalty,total\n"
        });
        for (i, r) in self.records.iter().enumerate() {
            let line = match r {
                EpochRecord::Unsupervised(l) => {
                    format!("{},{},{},{},{}\n", i + 1, l.recon, l.kl, l.penalty, l.total)
                }
                EpochRecord::Supervised(s) => format!(
                    "{},{},{},{},{}\n",
                    i + 1,
                    s.cross_entropy,
                    s.penalty,
                    s.total,
                    s.accuracy
                ),
            };
            out.push_str(&line);
        }
        out
    }
}

fn guard(epoch: usize, total: f64) -> Result<()> {
    if total.is_finite() && total <= DIVERGENCE_LIMIT {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, value: total })
    }
}

fn check_unit_interval(x: &Matrix) -> Result<()> {
    for r in 0..x.rows() {
        for (c, &v) in x.row(r).iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { row: r + 1, col: c + 1, value: v });
            }
        }
    }
    Ok(())
}

/// Trains one autoencoder on `x` by full-batch gradient descent.
pub fn train_ae(x: &Matrix, n_hidden: usize, hp: &Hyperparams) -> Result<(AeParams, TrainReport)> {
    hp.validate()?;
    if x.rows() == 0 {
        return Err(Error::Empty("training data".into()));
    }
    check_unit_interval(x)?;
    let mut rng = Rng::new(hp.seed);
    let mut params = AeParams::init(x.cols(), n_hidden, &mut rng)?;
    let mut report = TrainReport::default();
    for epoch in 1..=hp.epochs {
        let (loss, grads) = ae_loss_and_grad(&params, x, hp)?;
        guard(epoch, loss.total)?;
        report.records.push(EpochRecord::Unsupervised(loss));
        params.step(&grads, hp.learning_rate)?;
        report.epochs_run = epoch;
    }
    if !params.is_finite() {
        return Err(Error::Diverged { epoch: hp.epochs, value: f64::NAN });
    }
    Ok((params, report))
}

/// Greedy layer-wise pretraining. Layer `i` is trained on the hidden
/// activations of layer `i − 1` with seed `hp.seed + i`.
pub fn stack_pretrain(x: &Matrix, layer_sizes: &[usize], hp: &Hyperparams) -> Result<(StackedNetwork, Vec<TrainReport>)> {
    if layer_sizes.is_empty() {
        return Err(Error::invalid("layer_sizes must not be empty"));
    }
    let mut encoders = Vec::with_capacity(layer_sizes.len());
    let mut reports = Vec::with_capacity(layer_sizes.len());
    let mut input = x.clone();
    for (i, &size) in layer_sizes.iter().enumerate() {
        let layer_hp = Hyperparams {
            seed: hp.seed.wrapping_add(i as u64),
            ..hp.clone()
        };
        let (params, report) = train_ae(&input, size, &layer_hp).map_err(|e| e.in_layer(i))?;
        log::info!(
            "layer {i}: {}-{} trained, final loss {:?}",
            params.n_visible(),
            params.n_hidden(),
            report.records.last().map(EpochRecord::total)
        );
        if i + 1 < layer_sizes.len() {
            input = params.encode(&input).map_err(|e| e.in_layer(i))?;
        }
        encoders.push(params);
        reports.push(report);
    }
    Ok((StackedNetwork { encoders, softmax: None }, reports))
}

fn check_labels(rows: usize, labels: &[usize], classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::invalid(format!("{rows} examples but {} labels", labels.len())));
    }
    if classes == 0 {
        return Err(Error::invalid("classes must be positive"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} outside [0, {classes})")));
    }
    Ok(())
}

/// Mean cross-entropy, penalty and accuracy of `logits` plus `dL/dlogits`.
fn cross_entropy(logits: &Matrix, labels: &[usize]) -> (f64, f64, Matrix) {
    let m = logits.rows() as f64;
    let mut ce = 0.0;
    let mut correct = 0usize;
    let mut d = logits.clone();
    for (r, &y) in labels.iter().enumerate() {
        let row = d.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        ce -= row[y] - lse;
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
        if argmax(row) == y {
            correct += 1;
        }
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= m;
        }
    }
    (ce / m, correct as f64 / m, d)
}

/// Softmax-layer loss and gradient on fixed features.
pub fn softmax_loss_and_grad(
    layer: &SoftmaxLayer,
    features: &Matrix,
    labels: &[usize],
    hp: &Hyperparams,
) -> Result<(SupervisedRecord, LayerGrads)> {
    check_labels(features.rows(), labels, layer.classes())?;
    let logits = layer.logits(features)?;
    let (ce, accuracy, d_logits) = cross_entropy(&logits, labels);
    let mut dw = d_logits.matmul_tn(features)?;
    add_penalty_grad(&mut dw, &layer.w, hp);
    let penalty = penalty_sum(&layer.w, hp);
    Ok((
        SupervisedRecord {
            cross_entropy: ce,
            penalty,
            total: ce + penalty,
            accuracy,
        },
        LayerGrads { dw, db: d_logits.column_sums() },
    ))
}

/// Fits a softmax classifier on fixed features, starting from zero weights.
/// The negative-weight penalty applies to its weight matrix.
pub fn train_softmax(
    features: &Matrix,
    labels: &[usize],
    classes: usize,
    hp: &Hyperparams,
) -> Result<(SoftmaxLayer, TrainReport)> {
    hp.validate()?;
    check_labels(features.rows(), labels, classes)?;
    if features.rows() == 0 {
        return Err(Error::Empty("softmax training data".into()));
    }
    let mut report = TrainReport::default();
    let mut seen = vec![0usize; classes];
    for &l in labels {
        seen[l] += 1;
    }
    for (c, _) in seen.iter().enumerate().filter(|(_, &n)| n == 0) {
        let msg = format!("class {c} has no training examples");
        log::warn!("{msg}");
        report.warnings.push(msg);
    }

    let mut layer = SoftmaxLayer::zeros(classes, features.cols());
    for epoch in 1..=hp.epochs {
        let (rec, g) = softmax_loss_and_grad(&layer, features, labels, hp)?;
        guard(epoch, rec.total)?;
        report.records.push(EpochRecord::Supervised(rec));
        layer.w.sub_scaled(hp.learning_rate, &g.dw)?;
        for (b, d) in layer.b.iter_mut().zip(&g.db) {
            *b -= hp.learning_rate * d;
        }
        report.epochs_run = epoch;
    }
    Ok((layer, report))
}

impl StackedNetwork {
    pub fn input_dim(&self) -> Option<usize> {
        self.encoders.first().map(AeParams::n_visible)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.encoders.iter().map(AeParams::n_hidden).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoders.is_empty() {
            return Err(Error::invalid("network has no encoder layers"));
        }
        for (i, e) in self.encoders.iter().enumerate() {
            e.validate().map_err(|err| err.in_layer(i))?;
        }
        for (i, pair) in self.encoders.windows(2).enumerate() {
            if pair[0].n_hidden() != pair[1].n_visible() {
                return Err(Error::invalid(format!(
                    "layer {i} emits {} features but layer {} expects {}",
                    pair[0].n_hidden(),
                    i + 1,
                    pair[1].n_visible()
                )));
            }
        }
        if let Some(s) = &self.softmax {
            let top = self.encoders.last().map_or(0, AeParams::n_hidden);
            if s.w.cols() != top || s.b.len() != s.w.rows() {
                return Err(Error::invalid(format!(
                    "softmax {:?} (bias {}) does not fit {top} top-layer features",
                    s.w.shape(),
                    s.b.len()
                )));
            }
        }
        Ok(())
    }

    /// Activations of every encoder layer, input first.
    fn activations(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        let mut acts = Vec::with_capacity(self.encoders.len() + 1);
        acts.push(x.clone());
        for e in &self.encoders {
            let next = e.encode(acts.last().expect("non-empty"))?;
            acts.push(next);
        }
        Ok(acts)
    }

    /// Output of the top encoder layer.
    pub fn features(&self, x: &Matrix) -> Result<Matrix> {
        self.validate()?;
        let mut acts = self.activations(x)?;
        Ok(acts.pop().expect("non-empty"))
    }

    fn softmax_layer(&self) -> Result<&SoftmaxLayer> {
        self.softmax
            .as_ref()
            .ok_or_else(|| Error::invalid("network has no softmax layer"))
    }

    pub fn trainable_param_count(&self) -> usize {
        let enc: usize = self.encoders.iter().map(|e| e.w1.len() + e.bx.len()).sum();
        enc + self.softmax.as_ref().map_or(0, |s| s.w.len() + s.b.len())
    }

    /// Encoder `w1`, `bx` per layer, then softmax `w`, `b`.
    pub fn trainable_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trainable_param_count());
        for e in &self.encoders {
            out.extend_from_slice(e.w1.as_slice());
            out.extend_from_slice(&e.bx);
        }
        if let Some(s) = &self.softmax {
            out.extend_from_slice(s.w.as_slice());
            out.extend_from_slice(&s.b);
        }
        out
    }

    pub fn trainable_param_mut(&mut self, mut i: usize) -> &mut f64 {
        for e in &mut self.encoders {
            if i < e.w1.len() {
                return &mut e.w1.as_mut_slice()[i];
            }
            i -= e.w1.len();
            if i < e.bx.len() {
                return &mut e.bx[i];
            }
            i -= e.bx.len();
        }
        let s = self.softmax.as_mut().expect("index past encoder parameters");
        if i < s.w.len() {
            &mut s.w.as_mut_slice()[i]
        } else {
            &mut s.b[i - s.w.len()]
        }
    }

    fn step(&mut self, g: &NetworkGrads, rate: f64) -> Result<()> {
        for (e, lg) in self.encoders.iter_mut().zip(&g.encoders) {
            e.w1.sub_scaled(rate, &lg.dw)?;
            for (b, d) in e.bx.iter_mut().zip(&lg.db) {
                *b -= rate * d;
            }
        }
        let s = self.softmax.as_mut().expect("validated");
        s.w.sub_scaled(rate, &g.softmax.dw)?;
        for (b, d) in s.b.iter_mut().zip(&g.softmax.db) {
            *b -= rate * d;
        }
        Ok(())
    }
}

/// Supervised loss of the whole network (mean cross-entropy plus the
/// penalty on every encoder and softmax weight) and its gradient with
/// respect to all trainable parameters.
pub fn network_loss_and_grad(
    net: &StackedNetwork,
    x: &Matrix,
    labels: &[usize],
    hp: &Hyperparams,
) -> Result<(SupervisedRecord, NetworkGrads)> {
    net.validate()?;
    let softmax = net.softmax_layer()?;
    check_labels(x.rows(), labels, softmax.classes())?;
    let acts = net.activations(x)?;
    let top = acts.last().expect("non-empty");
    let (ce, accuracy, d_logits) = cross_entropy(&softmax.logits(top)?, labels);

    let mut dw = d_logits.matmul_tn(top)?;
    add_penalty_grad(&mut dw, &softmax.w, hp);
    let softmax_grads = LayerGrads { dw, db: d_logits.column_sums() };
    let mut penalty = penalty_sum(&softmax.w, hp);

    let mut d_act = d_logits.matmul(&softmax.w)?;
    let mut enc_grads = Vec::with_capacity(net.encoders.len());
    for (l, e) in net.encoders.iter().enumerate().rev() {
        let out = &acts[l + 1];
        for (d, &a) in d_act.as_mut_slice().iter_mut().zip(out.as_slice()) {
            *d *= a * (1.0 - a);
        }
        let mut dw = d_act.matmul_tn(&acts[l])?;
        add_penalty_grad(&mut dw, &e.w1, hp);
        let db = d_act.column_sums();
        if l > 0 {
            d_act = d_act.matmul(&e.w1)?;
        }
        enc_grads.push(LayerGrads { dw, db });
        penalty += penalty_sum(&e.w1, hp);
    }
    enc_grads.reverse();

    Ok((
        SupervisedRecord {
            cross_entropy: ce,
            penalty,
            total: ce + penalty,
            accuracy,
        },
        NetworkGrads {
            encoders: enc_grads,
            softmax: softmax_grads,
        },
    ))
}

/// Jointly trains every encoder and the softmax layer on labelled data.
/// The KL sparsity term is not part of this objective.
pub fn finetune(
    net: &StackedNetwork,
    x: &Matrix,
    labels: &[usize],
    hp: &Hyperparams,
) -> Result<(StackedNetwork, TrainReport)> {
    hp.validate()?;
    net.validate()?;
    net.softmax_layer()?;
    let mut net = net.clone();
    let mut report = TrainReport::default();
    for epoch in 1..=hp.epochs {
        let (rec, g) = network_loss_and_grad(&net, x, labels, hp)?;
        guard(epoch, rec.total)?;
        report.records.push(EpochRecord::Supervised(rec));
        net.step(&g, hp.learning_rate)?;
        report.epochs_run = epoch;
    }
    Ok((net, report))
}

/// Class probabilities and argmax labels (lowest index on ties).
pub fn predict(net: &StackedNetwork, x: &Matrix) -> Result<(Matrix, Vec<usize>)> {
    let features = net.features(x)?;
    let probs = softmax_rows(&net.softmax_layer()?.logits(&features)?);
    let labels = probs.row_iter().map(argmax).collect();
    Ok((probs, labels))
}

pub fn evaluate_accuracy(net: &StackedNetwork, x: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != x.rows() {
        return Err(Error::invalid(format!("{} examples but {} labels", x.rows(), labels.len())));
    }
    let (_, predicted) = predict(net, x)?;
    Ok(accuracy(&predicted, labels))
}

pub(crate) fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len() as f64
}
