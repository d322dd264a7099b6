//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use std::path::PathBuf;

use ncsae::data::BowCorpus;
use ncsae::{AeParams, Hyperparams, Matrix, Rng, StackedNetwork};

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-6;
/// Partials smaller than this are compared on an absolute scale: central
/// differences at the fixed step carry ~1e-10 of round-off.
pub const FD_SCALE_FLOOR: f64 = 1e-3;
/// Finite differences are meaningless within a step of a kink.
pub const KINK_MARGIN: f64 = 1e-4;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn mnist_sample_dir() -> PathBuf {
    workspace_root().join("data/mnist-sample")
}

pub fn default_hp() -> Hyperparams {
    Hyperparams {
        p: 0.05,
        beta: 3.0,
        alpha1: 0.0003,
        alpha2: 0.003,
        kappa: 0.1,
        ..Hyperparams::default()
    }
}

/// The four penalty regimes: none, L1 only, L2 only, both.
pub fn alpha_regimes() -> Vec<(&'static str, Hyperparams)> {
    let base = default_hp();
    vec![
        ("a1=0,a2=0", Hyperparams { alpha1: 0.0, alpha2: 0.0, ..base.clone() }),
        ("a1>0,a2=0", Hyperparams { alpha2: 0.0, ..base.clone() }),
        ("a1=0,a2>0", Hyperparams { alpha1: 0.0, ..base.clone() }),
        ("a1>0,a2>0", base),
    ]
}

/// Straight transcription of the composite penalty, written without
/// reference to the library.
pub fn penalty_oracle(w: f64, a1: f64, a2: f64, kappa: f64) -> f64 {
    if w >= 0.0 {
        return 0.0;
    }
    let gamma = if w.abs() > kappa { w.abs() } else { w * w / (2.0 * kappa) + kappa / 2.0 };
    a1 * gamma + 0.5 * a2 * w * w
}

pub fn penalty_grad_oracle(w: f64, a1: f64, a2: f64, kappa: f64) -> f64 {
    if w >= 0.0 {
        return 0.0;
    }
    let dgamma = if w.abs() > kappa { w.signum() } else { w / kappa };
    a1 * dgamma + a2 * w
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FdWorst {
    pub rel: f64,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl std::fmt::Display for FdWorst {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "worst relative error {:.3e} at parameter {} (analytic {:e}, numeric {:e})",
            self.rel, self.index, self.analytic, self.numeric
        )
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_SCALE_FLOOR)
}

pub fn away_from_kinks(weights: &[f64], kappa: f64) -> bool {
    weights
        .iter()
        .all(|&w| w.abs() > KINK_MARGIN && (w + kappa).abs() > KINK_MARGIN)
}

/// Central differences of `loss` over `n` coordinates, where `set(i, v)`
/// writes coordinate `i` and `get(i)` reads it. Returns the worst relative
/// error against `analytic`.
pub fn fd_worst<S>(
    state: &mut S,
    analytic: &[f64],
    get: impl Fn(&S, usize) -> f64,
    set: impl Fn(&mut S, usize, f64),
    loss: impl Fn(&S) -> f64,
) -> FdWorst {
    let mut worst = FdWorst::default();
    for (i, &a) in analytic.iter().enumerate() {
        let orig = get(state, i);
        set(state, i, orig + FD_STEP);
        let up = loss(state);
        set(state, i, orig - FD_STEP);
        let down = loss(state);
        set(state, i, orig);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let e = rel_err(a, numeric);
        if e > worst.rel || e.is_nan() {
            worst = FdWorst { rel: e, index: i, analytic: a, numeric };
        }
    }
    worst
}

/// Seeded instance whose weights sit clear of the penalty's kinks. Seeds are
/// tried in order from `seed`.
pub fn ae_instance(seed: u64, n: usize, n_hidden: usize, m: usize, kappa: f64) -> (AeParams, Matrix, u64) {
    for s in seed.. {
        let mut rng = Rng::new(s);
        let p = AeParams::init(n, n_hidden, &mut rng).unwrap();
        let weights: Vec<f64> = p.w1.as_slice().iter().chain(p.w2.as_slice()).copied().collect();
        if away_from_kinks(&weights, kappa) {
            let x = rng.uniform(0.0, 1.0, m, n).unwrap();
            return (p, x, s);
        }
    }
    unreachable!()
}

pub fn ae_fd_check(p: &AeParams, x: &Matrix, hp: &Hyperparams) -> FdWorst {
    let analytic = ncsae::ae_grad(p, x, hp).unwrap().flatten();
    let mut state = p.clone();
    fd_worst(
        &mut state,
        &analytic,
        |s, i| s.flatten()[i],
        |s, i, v| *s.param_mut(i) = v,
        |s| ncsae::ae_loss(s, x, hp).unwrap().total,
    )
}

pub fn network_fd_check(net: &StackedNetwork, x: &Matrix, labels: &[usize], hp: &Hyperparams) -> FdWorst {
    let (_, g) = ncsae::network_loss_and_grad(net, x, labels, hp).unwrap();
    let analytic = g.flatten();
    assert_eq!(analytic.len(), net.trainable_param_count());
    let mut state = net.clone();
    fd_worst(
        &mut state,
        &analytic,
        |s, i| s.trainable_params()[i],
        |s, i, v| *s.trainable_param_mut(i) = v,
        |s| ncsae::network_loss_and_grad(s, x, labels, hp).unwrap().0.total,
    )
}

/// Information gain as the mutual information between a term's presence and
/// the class, summed over the joint table. In bits.
pub fn ig_oracle(docs: &[(usize, Vec<bool>)], term: usize, classes: usize) -> f64 {
    let n = docs.len() as f64;
    let mut joint = vec![[0.0f64; 2]; classes];
    for (c, present) in docs {
        joint[*c][present[term] as usize] += 1.0 / n;
    }
    let pc: Vec<f64> = joint.iter().map(|r| r[0] + r[1]).collect();
    let pt = [0, 1].map(|t| joint.iter().map(|r| r[t]).sum::<f64>());
    let mut mi = 0.0;
    for c in 0..classes {
        for t in 0..2 {
            let pj = joint[c][t];
            if pj > 0.0 {
                mi += pj * (pj / (pc[c] * pt[t])).log2();
            }
        }
    }
    mi
}

pub fn presence_table(c: &BowCorpus) -> Vec<(usize, Vec<bool>)> {
    (0..c.docs())
        .map(|r| (c.labels[r], c.counts.row(r).iter().map(|&v| v > 0.0).collect()))
        .collect()
}

/// Top-`k` term names by oracle gain. Gains equal after rounding to 12 decimal places
/// are ties and go to the earlier vocabulary entry.
pub fn oracle_top_k(c: &BowCorpus, k: usize) -> Vec<String> {
    let table = presence_table(c);
    let classes = c.class_names.len();
    let gains: Vec<f64> = (0..c.vocab.len()).map(|t| ig_oracle(&table, t, classes)).collect();
    let key: Vec<i64> = gains.iter().map(|g| (g * 1e12).round() as i64).collect();
    let mut idx: Vec<usize> = (0..gains.len()).collect();
    idx.sort_by_key(|&i| (std::cmp::Reverse(key[i]), i));
    let mut keep = idx[..k].to_vec();
    keep.sort_unstable();
    keep.into_iter().map(|i| c.vocab[i].clone()).collect()
}

pub struct SaeOracle {
    pub recon: f64,
    pub kl: f64,
    pub dw1: Vec<f64>,
    pub dbx: Vec<f64>,
    pub dw2: Vec<f64>,
    pub dbh: Vec<f64>,
}

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Unpenalized sparse autoencoder written with scalar loops: mean squared
/// reconstruction error plus `beta` times the Bernoulli KL of each unit's
/// mean activation from `p`.
pub fn sae_oracle(params: &AeParams, x: &Matrix, p: f64, beta: f64) -> SaeOracle {
    let (m, n, h) = (x.rows(), x.cols(), params.n_hidden());
    let w1 = |j: usize, i: usize| params.w1.get(j, i);
    let w2 = |i: usize, j: usize| params.w2.get(i, j);
    let mut hid = vec![vec![0.0; h]; m];
    let mut out = vec![vec![0.0; n]; m];
    for r in 0..m {
        for j in 0..h {
            let z: f64 = (0..n).map(|i| w1(j, i) * x.get(r, i)).sum::<f64>() + params.bx[j];
            hid[r][j] = sig(z);
        }
        for i in 0..n {
            let z: f64 = (0..h).map(|j| w2(i, j) * hid[r][j]).sum::<f64>() + params.bh[i];
            out[r][i] = sig(z);
        }
    }
    let mut recon = 0.0;
    for r in 0..m {
        for i in 0..n {
            recon += (out[r][i] - x.get(r, i)).powi(2);
        }
    }
    recon /= m as f64;
    let rho: Vec<f64> = (0..h)
        .map(|j| ((0..m).map(|r| hid[r][j]).sum::<f64>() / m as f64).clamp(1e-8, 1.0 - 1e-8))
        .collect();
    let kl = beta * rho.iter().map(|&q| p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()).sum::<f64>();

    let mut dw1 = vec![0.0; h * n];
    let mut dbx = vec![0.0; h];
    let mut dw2 = vec![0.0; n * h];
    let mut dbh = vec![0.0; n];
    for r in 0..m {
        let delta_out: Vec<f64> = (0..n)
            .map(|i| 2.0 * (out[r][i] - x.get(r, i)) * out[r][i] * (1.0 - out[r][i]) / m as f64)
            .collect();
        for i in 0..n {
            for j in 0..h {
                dw2[i * h + j] += delta_out[i] * hid[r][j];
            }
            dbh[i] += delta_out[i];
        }
        for j in 0..h {
            let back: f64 = (0..n).map(|i| delta_out[i] * w2(i, j)).sum();
            let sparse = beta * (-p / rho[j] + (1.0 - p) / (1.0 - rho[j])) / m as f64;
            let delta_hid = (back + sparse) * hid[r][j] * (1.0 - hid[r][j]);
            for i in 0..n {
                dw1[j * n + i] += delta_hid * x.get(r, i);
            }
            dbx[j] += delta_hid;
        }
    }
    SaeOracle { recon, kl, dw1, dbx, dw2, dbh }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Six labelled documents. Totals: `the` 80 and `said` 72 exceed 70;
/// `rare` 2, `odd` 3 fall below 4; every other term lands in [4, 70].
pub const SIX_DOC_CORPUS: &str = "\
earn\tthe:14 said:12 profit:3 net:2 dividend:4 rare:1
earn\tthe:13 said:12 profit:2 net:3 shares:1 odd:1
acq\tthe:13 said:12 shares:3 stake:4 merger:1 rare:1
acq\tthe:14 said:12 stake:2 merger:4 net:1 odd:2
grain\tthe:13 said:12 wheat:5 tonnes:3 export:2
grain\tthe:13 said:12 wheat:3 tonnes:2 export:2 profit:1
";

/// Deterministic `docs × terms` corpus over `classes` labels. Term `t`
/// favours class `t % classes` with a strength that varies by term; every
/// seventh term duplicates its predecessor's column to create exact ties.
pub fn synthetic_corpus(seed: u64, docs: usize, terms: usize, classes: usize) -> String {
    let mut rng = Rng::new(seed);
    let strength: Vec<f64> = (0..terms).map(|_| rng.uniform_scalar(0.0, 0.8)).collect();
    let mut out = String::new();
    for d in 0..docs {
        let class = d % classes;
        out.push_str(&format!("c{class}\t"));
        let mut prev: Option<u64> = None;
        for t in 0..terms {
            let count = if t % 7 == 6 {
                prev.unwrap_or(0)
            } else {
                let base = 0.1 + if t % classes == class { strength[t] } else { 0.0 };
                if rng.next_f64() < base {
                    1 + (rng.next_u64() % 4)
                } else {
                    0
                }
            };
            prev = Some(count);
            if count > 0 {
                out.push_str(&format!("w{t:03}:{count} "));
            }
        }
        out.push('\n');
    }
    out
}
