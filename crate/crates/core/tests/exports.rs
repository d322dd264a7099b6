mod common;

use common::*;
use ncsae::export::{
    decay_curves_csv, export_decay_curves, export_receptive_fields, quantize_weight, standard_decay_settings, GrayImage,
};
use ncsae::params::{load_network, save_network};
use ncsae::{stack_pretrain, Hyperparams, Rng};

#[test]
fn decay_csv_equals_penalty_pointwise() {
    let settings = standard_decay_settings();
    let csv = decay_curves_csv(&settings, -1.0, 0.5, 301).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 2 * settings.len());
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let w = v[0];
        for (j, hp) in settings.iter().enumerate() {
            assert_eq!(v[1 + j], penalty_oracle(w, hp.alpha1, hp.alpha2, hp.kappa), "w = {w}");
            assert_eq!(v[1 + settings.len() + j], penalty_grad_oracle(w, hp.alpha1, hp.alpha2, hp.kappa));
        }
        rows += 1;
    }
    assert_eq!(rows, 301);
}

#[test]
fn receptive_field_pgm_parses_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let w = Rng::new(12).uniform(-1.5, 1.5, 10, 28 * 28).unwrap();
    let path = dir.path().join("rf.pgm");
    let img = export_receptive_fields(&w, 28, 28, 5, &path).unwrap();
    let back = GrayImage::from_pgm(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(back, img);
    assert_eq!((back.width, back.height), (5 * 28 + 4, 2 * 28 + 1));
    for u in 0..10 {
        let (x0, y0) = ((u % 5) * 29, (u / 5) * 29);
        for k in 0..784 {
            assert_eq!(back.get(x0 + k % 28, y0 + k / 28), quantize_weight(w.get(u, k)));
        }
    }
}

#[test]
fn file_exports_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let x = Rng::new(1).uniform(0.0, 1.0, 12, 9).unwrap();
    let hp = Hyperparams { epochs: 15, ..default_hp() };
    let mut bytes = Vec::new();
    for run in 0..2 {
        let (net, _) = stack_pretrain(&x, &[4, 2], &hp).unwrap();
        let p = dir.path().join(format!("net{run}.params"));
        save_network(&net, &p).unwrap();
        assert_eq!(load_network(&p).unwrap(), net);
        let d = dir.path().join(format!("decay{run}.csv"));
        export_decay_curves(&standard_decay_settings(), -1.0, 1.0, 50, &d).unwrap();
        bytes.push((std::fs::read(p).unwrap(), std::fs::read(d).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}
