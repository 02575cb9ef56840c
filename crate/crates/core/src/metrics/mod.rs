//! Channel statistics and the real-versus-generated evaluation.

mod cdf;
mod pdap;
mod spread;
mod ssim;

use serde::Serialize;

use crate::channel::ChannelSample;
use crate::error::{Error, Result};

pub use cdf::{cdf, CdfTable};
pub use pdap::{average_pdap, pdap, pdap_of, pdap_rmse, GridConfig, PdapGrid};
pub use spread::{angular_spread, angular_spread_of, delay_spread, delay_spread_of, mean_of};
pub use ssim::{ssim, WINDOW as SSIM_WINDOW};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub grid: GridConfig,
    /// Largest distance gap, meters, for pairing a real and a generated
    /// sample in the SSIM comparison.
    pub pair_tolerance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            pair_tolerance: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SsimSummary {
    pub pairs: usize,
    pub min: f64,
    pub p10: f64,
    pub median: f64,
    pub mean: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalSummary {
    pub real_count: usize,
    pub generated_count: usize,
    pub mean_delay_spread_real_ns: f64,
    pub mean_delay_spread_gen_ns: f64,
    pub delay_spread_rel_gap: f64,
    pub mean_angular_spread_real_deg: f64,
    pub mean_angular_spread_gen_deg: f64,
    pub angular_spread_rel_gap: f64,
    pub pdap_rmse_db: f64,
    pub clipped_real: usize,
    pub clipped_gen: usize,
    /// `None` when no pair fell within the distance tolerance.
    pub ssim: Option<SsimSummary>,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub delay_real: CdfTable,
    pub delay_gen: CdfTable,
    pub angle_real: CdfTable,
    pub angle_gen: CdfTable,
    pub pdap_real: PdapGrid,
    pub pdap_gen: PdapGrid,
    /// One SSIM value per distance-paired (real, generated) sample.
    pub ssim_values: Vec<f64>,
    pub ssim_cdf: CdfTable,
    pub summary: EvalSummary,
}

fn spreads(samples: &[ChannelSample]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut delay = Vec::with_capacity(samples.len());
    let mut angle = Vec::with_capacity(samples.len());
    for s in samples {
        delay.push(delay_spread(s)?);
        angle.push(angular_spread(s)?);
    }
    Ok((delay, angle))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rel_gap(real: f64, generated: f64) -> f64 {
    (generated - real).abs() / real.abs()
}

/// For each real sample, the generated sample with the nearest distance,
/// if it lies within `tolerance`.
pub fn pair_by_distance(
    real: &[ChannelSample],
    generated: &[ChannelSample],
    tolerance: f64,
) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..generated.len()).collect();
    order.sort_by(|&a, &b| generated[a].distance().total_cmp(&generated[b].distance()));
    let dists: Vec<f64> = order.iter().map(|&i| generated[i].distance()).collect();
    let mut pairs = Vec::new();
    for (ri, r) in real.iter().enumerate() {
        let d = r.distance();
        let k = dists.partition_point(|&x| x < d);
        let best = [k.checked_sub(1), (k < dists.len()).then_some(k)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (dists[a] - d).abs().total_cmp(&(dists[b] - d).abs()));
        if let Some(j) = best {
            if (dists[j] - d).abs() <= tolerance {
                pairs.push((ri, order[j]));
            }
        }
    }
    pairs
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn summarize_ssim(table: &CdfTable) -> Option<SsimSummary> {
    if table.is_empty() {
        return None;
    }
    let v = &table.values;
    Some(SsimSummary {
        pairs: v.len(),
        min: v[0],
        p10: table.quantile(0.1)?,
        median: median(v),
        mean: mean(v),
        p90: table.quantile(0.9)?,
        max: v[v.len() - 1],
    })
}

/// Compares a generated set against ground truth: spread CDFs, average
/// PDAPs and their RMSE, and SSIM between distance-paired PDAPs.
pub fn evaluate(
    real: &[ChannelSample],
    generated: &[ChannelSample],
    config: &EvalConfig,
) -> Result<EvalReport> {
    if real.is_empty() || generated.is_empty() {
        return Err(Error::Domain("evaluation needs non-empty real and generated sets".into()));
    }
    if config.pair_tolerance.is_nan() || config.pair_tolerance < 0.0 {
        return Err(Error::Config("pair_tolerance must be non-negative".into()));
    }
    let (dr, ar) = spreads(real)?;
    let (dg, ag) = spreads(generated)?;
    let pdap_real = average_pdap(real, &config.grid)?;
    let pdap_gen = average_pdap(generated, &config.grid)?;
    let rmse = pdap_rmse(&pdap_real, &pdap_gen)?;

    let mut ssim_values = Vec::new();
    for (ri, gi) in pair_by_distance(real, generated, config.pair_tolerance) {
        let a = pdap(&real[ri], &config.grid)?;
        let b = pdap(&generated[gi], &config.grid)?;
        ssim_values.push(ssim(&a, &b)?);
    }
    let ssim_cdf = cdf(&ssim_values)?;

    let summary = EvalSummary {
        real_count: real.len(),
        generated_count: generated.len(),
        mean_delay_spread_real_ns: mean(&dr) * 1e9,
        mean_delay_spread_gen_ns: mean(&dg) * 1e9,
        delay_spread_rel_gap: rel_gap(mean(&dr), mean(&dg)),
        mean_angular_spread_real_deg: mean(&ar),
        mean_angular_spread_gen_deg: mean(&ag),
        angular_spread_rel_gap: rel_gap(mean(&ar), mean(&ag)),
        pdap_rmse_db: rmse,
        clipped_real: pdap_real.clipped(),
        clipped_gen: pdap_gen.clipped(),
        ssim: summarize_ssim(&ssim_cdf),
    };
    Ok(EvalReport {
        delay_real: cdf(&dr)?,
        delay_gen: cdf(&dg)?,
        angle_real: cdf(&ar)?,
        angle_gen: cdf(&ag)?,
        pdap_real,
        pdap_gen,
        ssim_values,
        ssim_cdf,
        summary,
    })
}
