mod common;

use common::*;
use ncsae::data::{
    encode_idx, frequency_filter, info_gain_select, information_gain, load_idx, parse_bow, parse_idx,
};
use ncsae::subset_by_labels;

#[test]
fn frequency_filter_on_six_documents() {
    let c = parse_bow(SIX_DOC_CORPUS).unwrap();
    assert_eq!(c.docs(), 6);
    assert_eq!(c.class_names, vec!["acq", "earn", "grain"]);
    let f = frequency_filter(&c, 4, 70).unwrap();
    let kept: Vec<&str> = f.vocab.iter().map(String::as_str).collect();
    assert_eq!(kept, ["profit", "net", "dividend", "shares", "stake", "merger", "wheat", "tonnes", "export"]);
    for (t, total) in f.term_totals().iter().enumerate() {
        assert!((4.0..=70.0).contains(total), "{} has total {total}", f.vocab[t]);
    }
}

#[test]
fn information_gain_matches_mutual_information_oracle() {
    let c = frequency_filter(&parse_bow(SIX_DOC_CORPUS).unwrap(), 4, 70).unwrap();
    let table = presence_table(&c);
    let ig = information_gain(&c);
    for t in 0..c.vocab.len() {
        let o = ig_oracle(&table, t, 3);
        assert!((ig[t] - o).abs() < 1e-12, "{}: {} vs {o}", c.vocab[t], ig[t]);
    }
    // wheat appears in exactly the grain documents: IG = H(C) − (2/3)·1 = log2 3 − 2/3
    let wheat = c.vocab.iter().position(|t| t == "wheat").unwrap();
    assert!((ig[wheat] - (3f64.log2() - 2.0 / 3.0)).abs() < 1e-12);
    for k in 1..=c.vocab.len() {
        assert_eq!(info_gain_select(&c, k).unwrap().vocab, oracle_top_k(&c, k), "k = {k}");
    }
}

#[test]
fn select_200_of_500_terms() {
    let c = parse_bow(&synthetic_corpus(2024, 80, 500, 4)).unwrap();
    assert_eq!(c.vocab.len(), 500);
    let s = info_gain_select(&c, 200).unwrap();
    assert_eq!(s.vocab.len(), 200);
    assert_eq!(s.vocab, oracle_top_k(&c, 200));
    assert_eq!(s.counts.cols(), 200);
}

#[test]
fn bundled_mnist_sample_round_trips() {
    let dir = mnist_sample_dir();
    let images = dir.join("t10k-images-idx3-ubyte.gz");
    let labels = dir.join("t10k-labels-idx1-ubyte.gz");
    let d = load_idx(&images, &labels).unwrap();
    assert_eq!(d.image_dims, Some((28, 28)));
    assert_eq!(d.x.cols(), 784);
    assert_eq!(d.len(), 2000);
    assert!(d.labels.as_ref().unwrap().iter().all(|&l| l < 10));
    let bytes = encode_idx(&d).unwrap();
    let again = parse_idx(&bytes.images, &bytes.labels, &images, &labels).unwrap();
    assert_eq!(again.x, d.x);
    assert_eq!(encode_idx(&again).unwrap(), bytes);

    let sub = subset_by_labels(&d, &[1, 2, 6]).unwrap();
    assert_eq!(sub.num_classes(), 3);
    assert!(sub.len() > 500);
}
