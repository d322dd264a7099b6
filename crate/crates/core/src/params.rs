//! Versioned text container for trained parameters.
//!
//! ```text
//! ncsae-params v1
//! kind <ae|network>
//! entries <N>
//! <name> <rows> <cols>          (N times, each followed by `rows` lines
//! <v> <v> ...                    of `cols` space-separated values)
//! checksum sha256 <hex>
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a save/load
//! cycle is bit-exact. The checksum covers every byte before the checksum
//! line. Biases are stored as `1 × n` entries. A network stores
//! `encoder<i>.{w1,bx,w2,bh}` per layer, then `softmax.w` and `softmax.b` when
//! a head is present.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::autoencoder::AeParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::training::{SoftmaxLayer, StackedNetwork};

pub const FORMAT_HEADER: &str = "ncsae-params v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Ae,
    Network,
}

impl ParamKind {
    fn as_str(self) -> &'static str {
        match self {
            ParamKind::Ae => "ae",
            ParamKind::Network => "network",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamFile {
    pub kind: ParamKind,
    pub entries: Vec<(String, Matrix)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        what: "parameter file",
        line,
        msg: msg.into(),
    }
}

impl ParamFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_HEADER}");
        let _ = writeln!(out, "kind {}", self.kind.as_str());
        let _ = writeln!(out, "entries {}", self.entries.len());
        for (name, m) in &self.entries {
            let _ = writeln!(out, "{name} {} {}", m.rows(), m.cols());
            for row in m.row_iter() {
                let mut first = true;
                for v in row {
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    let _ = write!(out, "{v}");
                }
                out.push('\n');
            }
        }
        let digest = sha256_hex(out.as_bytes());
        let _ = writeln!(out, "checksum sha256 {digest}");
        out
    }

    pub fn parse(text: &str) -> Result<ParamFile> {
        let body_end = text
            .trim_end_matches('\n')
            .rfind('\n')
            .map(|i| i + 1)
            .ok_or_else(|| parse_err(1, "missing checksum line"))?;
        let (body, tail) = text.split_at(body_end);
        let total_lines = body.lines().count() + 1;
        let expected = tail
            .trim_end()
            .strip_prefix("checksum sha256 ")
            .ok_or_else(|| parse_err(total_lines, "missing checksum line"))?;
        let found = sha256_hex(body.as_bytes());
        if expected != found {
            return Err(Error::Checksum {
                expected: expected.to_string(),
                found,
            });
        }

        let mut lines = body.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(total_lines, format!("unexpected end of file, expected {what}")));

        let (n, header) = next("format header")?;
        if header != FORMAT_HEADER {
            return Err(parse_err(n, format!("unsupported format header {header:?}, expected {FORMAT_HEADER:?}")));
        }
        let (n, kind_line) = next("kind")?;
        let kind = match kind_line.strip_prefix("kind ") {
            Some("ae") => ParamKind::Ae,
            Some("network") => ParamKind::Network,
            _ => return Err(parse_err(n, format!("bad kind line {kind_line:?}"))),
        };
        let (n, count_line) = next("entry count")?;
        let count: usize = count_line
            .strip_prefix("entries ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(n, format!("bad entry count line {count_line:?}")))?;

        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, head) = next("entry header")?;
            let parts: Vec<&str> = head.split(' ').collect();
            let [name, rows, cols] = parts[..] else {
                return Err(parse_err(n, format!("bad entry header {head:?}")));
            };
            let dim = |s: &str| s.parse::<usize>().map_err(|_| parse_err(n, format!("bad dimension {s:?}")));
            let (rows, cols) = (dim(rows)?, dim(cols)?);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, row) = next("matrix row")?;
                let before = data.len();
                for tok in row.split(' ').filter(|t| !t.is_empty()) {
                    data.push(tok.parse::<f64>().map_err(|_| parse_err(n, format!("bad value {tok:?}")))?);
                }
                if data.len() - before != cols {
                    return Err(parse_err(n, format!("expected {cols} values, found {}", data.len() - before)));
                }
            }
            entries.push((name.to_string(), Matrix::from_vec(rows, cols, data)?));
        }
        if let Ok((n, _)) = next("") {
            return Err(parse_err(n, "content after the last entry"));
        }
        Ok(ParamFile { kind, entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ParamFile> {
        ParamFile::parse(&fs::read_to_string(path)?)
    }

    fn take(&mut self, name: &str) -> Result<Matrix> {
        match self.entries.first() {
            Some((n, _)) if n == name => Ok(self.entries.remove(0).1),
            Some((n, _)) => Err(parse_err(0, format!("expected entry {name:?}, found {n:?}"))),
            None => Err(parse_err(0, format!("missing entry {name:?}"))),
        }
    }

    fn take_vec(&mut self, name: &str) -> Result<Vec<f64>> {
        let m = self.take(name)?;
        if m.rows() != 1 {
            return Err(parse_err(0, format!("entry {name:?} must be a 1 × n row, found {:?}", m.shape())));
        }
        Ok(m.into_vec())
    }
}

fn push_ae(entries: &mut Vec<(String, Matrix)>, prefix: &str, p: &AeParams) {
    entries.push((format!("{prefix}w1"), p.w1.clone()));
    entries.push((format!("{prefix}bx"), Matrix::row_vector(&p.bx)));
    entries.push((format!("{prefix}w2"), p.w2.clone()));
    entries.push((format!("{prefix}bh"), Matrix::row_vector(&p.bh)));
}

fn take_ae(file: &mut ParamFile, prefix: &str) -> Result<AeParams> {
    let p = AeParams {
        w1: file.take(&format!("{prefix}w1"))?,
        bx: file.take_vec(&format!("{prefix}bx"))?,
        w2: file.take(&format!("{prefix}w2"))?,
        bh: file.take_vec(&format!("{prefix}bh"))?,
    };
    p.validate()?;
    Ok(p)
}

pub fn ae_params_file(p: &AeParams) -> ParamFile {
    let mut entries = Vec::with_capacity(4);
    push_ae(&mut entries, "", p);
    ParamFile {
        kind: ParamKind::Ae,
        entries,
    }
}

pub fn network_file(net: &StackedNetwork) -> ParamFile {
    let mut entries = Vec::new();
    for (i, enc) in net.encoders.iter().enumerate() {
        push_ae(&mut entries, &format!("encoder{i}."), enc);
    }
    if let Some(s) = &net.softmax {
        entries.push(("softmax.w".into(), s.w.clone()));
        entries.push(("softmax.b".into(), Matrix::row_vector(&s.b)));
    }
    ParamFile {
        kind: ParamKind::Network,
        entries,
    }
}

pub fn ae_params_from_file(mut file: ParamFile) -> Result<AeParams> {
    if file.kind != ParamKind::Ae {
        return Err(Error::invalid(format!("expected an ae parameter file, found kind {}", file.kind.as_str())));
    }
    let p = take_ae(&mut file, "")?;
    if let Some((name, _)) = file.entries.first() {
        return Err(parse_err(0, format!("unexpected entry {name:?}")));
    }
    Ok(p)
}

pub fn network_from_file(mut file: ParamFile) -> Result<StackedNetwork> {
    if file.kind != ParamKind::Network {
        return Err(Error::invalid(format!(
            "expected a network parameter file, found kind {}",
            file.kind.as_str()
        )));
    }
    let mut encoders = Vec::new();
    while file.entries.first().is_some_and(|(n, _)| n.starts_with("encoder")) {
        encoders.push(take_ae(&mut file, &format!("encoder{}.", encoders.len()))?);
    }
    let softmax = if file.entries.is_empty() {
        None
    } else {
        let w = file.take("softmax.w")?;
        let b = file.take_vec("softmax.b")?;
        Some(SoftmaxLayer { w, b })
    };
    if let Some((name, _)) = file.entries.first() {
        return Err(parse_err(0, format!("unexpected entry {name:?}")));
    }
    let net = StackedNetwork { encoders, softmax };
    net.validate()?;
    Ok(net)
}

pub fn save_ae_params(p: &AeParams, path: impl AsRef<Path>) -> Result<()> {
    ae_params_file(p).save(path)
}

pub fn load_ae_params(path: impl AsRef<Path>) -> Result<AeParams> {
    ae_params_from_file(ParamFile::load(path)?)
}

pub fn save_network(net: &StackedNetwork, path: impl AsRef<Path>) -> Result<()> {
    network_file(net).save(path)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<StackedNetwork> {
    network_from_file(ParamFile::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn sample_net() -> StackedNetwork {
        let mut rng = Rng::new(3);
        let mut l0 = AeParams::init(6, 4, &mut rng).unwrap();
        l0.bx = vec![0.1, -0.2, 1e-300, f64::MIN_POSITIVE];
        let l1 = AeParams::init(4, 2, &mut rng).unwrap();
        let mut head = SoftmaxLayer::zeros(3, 2);
        head.w.set(2, 1, -1.0 / 3.0);
        StackedNetwork {
            encoders: vec![l0, l1],
            softmax: Some(head),
        }
    }

    #[test]
    fn network_round_trip_is_bit_exact() {
        let net = sample_net();
        let text = network_file(&net).to_text();
        assert!(text.starts_with("ncsae-params v1\nkind network\nentries 10\nencoder0.w1 4 6\n"));
        let back = network_from_file(ParamFile::parse(&text).unwrap()).unwrap();
        assert_eq!(back, net);
        assert_eq!(network_file(&back).to_text(), text);
    }

    #[test]
    fn ae_round_trip_through_disk() {
        let mut rng = Rng::new(11);
        let p = AeParams::init(5, 3, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.params");
        save_ae_params(&p, &path).unwrap();
        assert_eq!(load_ae_params(&path).unwrap(), p);
    }

    #[test]
    fn headless_network_round_trips() {
        let mut net = sample_net();
        net.softmax = None;
        let back = network_from_file(network_file(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn corruption_is_detected() {
        let text = network_file(&sample_net()).to_text();
        let flipped = text.replacen("encoder1.w1 2 4", "encoder1.w1 2 5", 1);
        assert!(matches!(ParamFile::parse(&flipped), Err(Error::Checksum { .. })));
        let truncated = &text[..text.len() / 2];
        assert!(ParamFile::parse(truncated).is_err());
        assert!(ParamFile::parse("").is_err());
    }

    #[test]
    fn wrong_version_and_kind() {
        let mut body = String::from("ncsae-params v0\nkind ae\nentries 0\n");
        let digest = sha256_hex(body.as_bytes());
        body.push_str(&format!("checksum sha256 {digest}\n"));
        let err = ParamFile::parse(&body).unwrap_err();
        assert!(err.to_string().contains("unsupported format header"), "{err}");

        let file = network_file(&sample_net());
        assert!(ae_params_from_file(file).is_err());
    }
}
