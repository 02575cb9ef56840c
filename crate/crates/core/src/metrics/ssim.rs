//! Structural similarity between two profiles treated as images.
//!
//! Pixels are dB values above the floor, so the floor maps to black and the
//! dynamic range `R` runs from the floor to the largest cell of either
//! grid. Local statistics use uniform 8x8 windows at stride 1 with
//! `C1 = (0.01 R)²` and `C2 = (0.03 R)²`; the score is the mean over all
//! windows. Grids smaller than a window are compared as one global window.

use super::pdap::PdapGrid;
use crate::error::Result;

pub const WINDOW: usize = 8;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

pub fn ssim(a: &PdapGrid, b: &PdapGrid) -> Result<f64> {
    a.check_same_config(b, "ssim")?;
    let cfg = a.config();
    let (rows, cols) = (cfg.delay_bins, cfg.angle_bins);
    let pa: Vec<f64> = a.values_db().iter().map(|v| v - cfg.floor_db).collect();
    let pb: Vec<f64> = b.values_db().iter().map(|v| v - cfg.floor_db).collect();
    let peak = pa.iter().chain(&pb).copied().fold(0.0, f64::max);
    let range = if peak > 0.0 { peak } else { 1.0 };
    let c1 = (K1 * range) * (K1 * range);
    let c2 = (K2 * range) * (K2 * range);

    let (wr, wc) = if rows >= WINDOW && cols >= WINDOW {
        (WINDOW, WINDOW)
    } else {
        (rows, cols)
    };
    // Summed-area table of lit pixels; a window that is black in both
    // images scores exactly 1 and is not recomputed.
    let stride = cols + 1;
    let mut lit = vec![0usize; (rows + 1) * stride];
    for r in 0..rows {
        for c in 0..cols {
            let here = usize::from(pa[r * cols + c] != 0.0 || pb[r * cols + c] != 0.0);
            lit[(r + 1) * stride + c + 1] =
                here + lit[r * stride + c + 1] + lit[(r + 1) * stride + c] - lit[r * stride + c];
        }
    }
    let n = (wr * wc) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in 0..=rows - wr {
        for c0 in 0..=cols - wc {
            let (r1, c1e) = (r0 + wr, c0 + wc);
            let count = lit[r1 * stride + c1e] + lit[r0 * stride + c0]
                - lit[r0 * stride + c1e]
                - lit[r1 * stride + c0];
            if count == 0 {
                total += 1.0;
                windows += 1;
                continue;
            }
            let mut sa = 0.0;
            let mut sb = 0.0;
            for r in r0..r0 + wr {
                for c in c0..c0 + wc {
                    sa += pa[r * cols + c];
                    sb += pb[r * cols + c];
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
            for r in r0..r0 + wr {
                for c in c0..c0 + wc {
                    let da = pa[r * cols + c] - ma;
                    let db = pb[r * cols + c] - mb;
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            }
            let (vaa, vbb, vab) = (vaa / n, vbb / n, vab / n);
            let num = (2.0 * ma * mb + c1) * (2.0 * vab + c2);
            let den = (ma * ma + mb * mb + c1) * (vaa + vbb + c2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}
