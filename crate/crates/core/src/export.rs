//! File exports: receptive-field image grids (binary PGM) and penalty decay
//! curves (CSV).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hyperparams::Hyperparams;
use crate::matrix::Matrix;
use crate::penalty::{penalty, penalty_grad};

/// 8-bit grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Binary PGM: `P5\n<width> <height>\n255\n` then `width·height` bytes.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Reads a binary PGM with maxval 255. Comments are not supported.
    pub fn from_pgm(bytes: &[u8]) -> Result<GrayImage> {
        let err = |msg: &str| Error::Parse {
            what: "PGM",
            line: 0,
            msg: msg.to_string(),
        };
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(err("incomplete header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("non-ASCII header"))?);
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        if fields[0] != "P5" {
            return Err(err("not a binary PGM (P5)"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| err("bad header number"));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(err("only maxval 255 is supported"));
        }
        let raster = bytes.get(pos..).unwrap_or_default();
        if raster.len() != width * height {
            return Err(err(&format!(
                "raster has {} bytes, header promises {}",
                raster.len(),
                width * height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels: raster.to_vec(),
        })
    }
}

/// Weight → gray level: −1 is black (0), 0 is mid-gray (127), +1 is white
/// (255), linear on each side, clipped outside `[−1, 1]`.
pub fn quantize_weight(w: f64) -> u8 {
    let v = if w.is_nan() { 0.0 } else { w.clamp(-1.0, 1.0) };
    if v <= 0.0 {
        (127.0 * (1.0 + v)).round() as u8
    } else {
        (127.0 + 128.0 * v).round() as u8
    }
}

/// Lays out each row of `w1` as an `img_rows × img_cols` tile, `grid_cols`
/// tiles per grid row, with one black pixel between neighbouring tiles.
/// Unused grid cells are black.
pub fn render_receptive_fields(w1: &Matrix, img_rows: usize, img_cols: usize, grid_cols: usize) -> Result<GrayImage> {
    if img_rows * img_cols != w1.cols() {
        return Err(Error::ShapeMismatch {
            op: "receptive field tiles",
            left: w1.shape(),
            right: (img_rows, img_cols),
        });
    }
    if grid_cols == 0 || w1.rows() == 0 {
        return Err(Error::invalid("receptive field grid needs at least one unit and one column"));
    }
    let units = w1.rows();
    let grid_rows = units.div_ceil(grid_cols);
    let width = grid_cols * img_cols + (grid_cols - 1);
    let height = grid_rows * img_rows + (grid_rows - 1);
    let mut pixels = vec![0u8; width * height];
    for u in 0..units {
        let (gr, gc) = (u / grid_cols, u % grid_cols);
        let (y0, x0) = (gr * (img_rows + 1), gc * (img_cols + 1));
        for (k, &w) in w1.row(u).iter().enumerate() {
            let (r, c) = (k / img_cols, k % img_cols);
            pixels[(y0 + r) * width + x0 + c] = quantize_weight(w);
        }
    }
    Ok(GrayImage { width, height, pixels })
}

pub fn export_receptive_fields(
    w1: &Matrix,
    img_rows: usize,
    img_cols: usize,
    grid_cols: usize,
    path: impl AsRef<Path>,
) -> Result<GrayImage> {
    let img = render_receptive_fields(w1, img_rows, img_cols, grid_cols)?;
    fs::write(path, img.to_pgm())?;
    Ok(img)
}

/// `w, penalty_0.., grad_0..` sampled at `steps` evenly spaced points on
/// `[w_lo, w_hi]`, one penalty and one gradient column per setting.
pub fn decay_curves_csv(hp_list: &[Hyperparams], w_lo: f64, w_hi: f64, steps: usize) -> Result<String> {
    if steps < 2 {
        return Err(Error::invalid(format!("decay curves need at least 2 steps, got {steps}")));
    }
    if hp_list.is_empty() {
        return Err(Error::invalid("decay curves need at least one setting"));
    }
    if !(w_lo < w_hi) {
        return Err(Error::invalid(format!("decay curve range needs w_lo < w_hi, got [{w_lo}, {w_hi}]")));
    }
    let mut out = String::from("w");
    for hp in hp_list {
        out.push_str(&format!(",penalty_a1_{}_a2_{}_k_{}", hp.alpha1, hp.alpha2, hp.kappa));
    }
    for hp in hp_list {
        out.push_str(&format!(",grad_a1_{}_a2_{}_k_{}", hp.alpha1, hp.alpha2, hp.kappa));
    }
    out.push('\n');
    for i in 0..steps {
        let w = if i + 1 == steps {
            w_hi
        } else {
            w_lo + (w_hi - w_lo) * i as f64 / (steps - 1) as f64
        };
        out.push_str(&w.to_string());
        for hp in hp_list {
            out.push_str(&format!(",{}", penalty(w, hp)));
        }
        for hp in hp_list {
            out.push_str(&format!(",{}", penalty_grad(w, hp)));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_decay_curves(
    hp_list: &[Hyperparams],
    w_lo: f64,
    w_hi: f64,
    steps: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let csv = decay_curves_csv(hp_list, w_lo, w_hi, steps)?;
    fs::write(path, csv)?;
    Ok(())
}

/// The three settings compared when plotting decay curves: L1 only, L2 only
/// and the composite L1/L2 penalty.
pub fn standard_decay_settings() -> Vec<Hyperparams> {
    let base = Hyperparams::default();
    vec![
        Hyperparams { alpha2: 0.0, ..base.clone() },
        Hyperparams { alpha1: 0.0, ..base.clone() },
        base,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_anchors() {
        assert_eq!(quantize_weight(-1.0), 0);
        assert_eq!(quantize_weight(-5.0), 0);
        assert_eq!(quantize_weight(0.0), 127);
        assert_eq!(quantize_weight(1.0), 255);
        assert_eq!(quantize_weight(3.0), 255);
        assert_eq!(quantize_weight(0.5), 191);
        assert_eq!(quantize_weight(-0.5), 64);
    }

    #[test]
    fn zero_weights_are_mid_gray() {
        let img = render_receptive_fields(&Matrix::zeros(4, 6), 2, 3, 2).unwrap();
        assert_eq!((img.width, img.height), (7, 5));
        for y in 0..img.height {
            for x in 0..img.width {
                let separator = x == 3 || y == 2;
                assert_eq!(img.get(x, y), if separator { 0 } else { 127 }, "({x},{y})");
            }
        }
    }

    #[test]
    fn single_white_pixel() {
        let mut w = Matrix::zeros(3, 4);
        w.set(1, 3, 1.0);
        let img = render_receptive_fields(&w, 2, 2, 3).unwrap();
        let whites: Vec<_> = (0..img.height)
            .flat_map(|y| (0..img.width).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y) == 255)
            .collect();
        // unit 1 sits in tile column 1 (x0 = 3); pixel 3 is (row 1, col 1)
        assert_eq!(whites, vec![(4, 1)]);
    }

    #[test]
    fn pgm_header_and_round_trip() {
        let mut w = Matrix::zeros(5, 4);
        w.set(0, 0, -0.3);
        w.set(4, 2, 0.8);
        let img = render_receptive_fields(&w, 2, 2, 2).unwrap();
        let bytes = img.to_pgm();
        let header = format!("P5\n{} {}\n255\n", img.width, img.height);
        assert!(bytes.starts_with(header.as_bytes()));
        assert_eq!(bytes.len(), header.len() + img.width * img.height);
        assert_eq!(GrayImage::from_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn tile_shape_must_match() {
        assert!(render_receptive_fields(&Matrix::zeros(2, 6), 2, 2, 1).is_err());
    }

    #[test]
    fn decay_csv_shape() {
        let csv = decay_curves_csv(&standard_decay_settings(), -1.0, 1.0, 11).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0].split(',').count(), 7);
        for line in &lines[1..] {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            if v[0] >= 0.0 {
                assert_eq!(&v[1..4], &[0.0, 0.0, 0.0]);
            }
        }
        assert!(decay_curves_csv(&standard_decay_settings(), -1.0, 1.0, 1).is_err());
    }
}
