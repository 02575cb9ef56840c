//! Power delay angular profiles on a fixed (delay, azimuth) grid.

use crate::channel::{ChannelSample, Mpc};
use crate::error::{Error, Result};

/// Binning of the delay and angle axes plus the dB floor.
#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    /// Left edge of the first delay bin, seconds.
    pub delay_start: f64,
    pub delay_bin: f64,
    pub delay_bins: usize,
    /// Left edge of the first angle bin, degrees.
    pub angle_start: f64,
    pub angle_bin: f64,
    pub angle_bins: usize,
    pub floor_db: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            delay_start: 0.0,
            delay_bin: 2.5e-9,
            delay_bins: 160,
            angle_start: -180.0,
            angle_bin: 2.0,
            angle_bins: 180,
            floor_db: -200.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delay_bin > 0.0
            && self.angle_bin > 0.0
            && self.delay_bins > 0
            && self.angle_bins > 0
            && self.delay_start.is_finite()
            && self.angle_start.is_finite()
            && self.floor_db.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid grid configuration {self:?}")))
        }
    }

    pub fn cells(&self) -> usize {
        self.delay_bins * self.angle_bins
    }

    /// Bin of `value` on an axis, clamped to the edge bins. The flag is
    /// set when clamping happened.
    fn bin(value: f64, start: f64, width: f64, count: usize) -> (usize, bool) {
        let pos = ((value - start) / width).floor();
        if pos < 0.0 {
            (0, true)
        } else if pos >= count as f64 {
            (count - 1, true)
        } else {
            (pos as usize, false)
        }
    }

    /// Row-major cell index of a component, and whether it was clipped.
    pub fn cell_of(&self, m: &Mpc) -> (usize, bool) {
        let (i, ci) = Self::bin(m.delay, self.delay_start, self.delay_bin, self.delay_bins);
        let (j, cj) = Self::bin(m.aoa, self.angle_start, self.angle_bin, self.angle_bins);
        (i * self.angle_bins + j, ci || cj)
    }

    pub fn to_db(&self, linear: f64) -> f64 {
        if linear > 0.0 {
            (10.0 * linear.log10()).max(self.floor_db)
        } else {
            self.floor_db
        }
    }
}

/// Power per (delay bin, angle bin) cell, row-major with delay as rows.
#[derive(Clone, Debug, PartialEq)]
pub struct PdapGrid {
    config: GridConfig,
    linear: Vec<f64>,
    db: Vec<f64>,
    clipped: usize,
}

impl PdapGrid {
    fn from_linear(config: &GridConfig, linear: Vec<f64>, clipped: usize) -> Self {
        let db = linear.iter().map(|&p| config.to_db(p)).collect();
        Self {
            config: config.clone(),
            linear,
            db,
            clipped,
        }
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Cell values in dB, row-major (delay rows, angle columns).
    pub fn values_db(&self) -> &[f64] {
        &self.db
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn value_db(&self, delay_bin: usize, angle_bin: usize) -> f64 {
        self.db[delay_bin * self.config.angle_bins + angle_bin]
    }

    /// Components that fell outside the grid and were clamped to an edge.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    pub fn total_linear_power(&self) -> f64 {
        self.linear.iter().sum()
    }

    /// Left edges of the delay bins, seconds.
    pub fn delay_axis(&self) -> Vec<f64> {
        (0..self.config.delay_bins)
            .map(|i| self.config.delay_start + i as f64 * self.config.delay_bin)
            .collect()
    }

    /// Left edges of the angle bins, degrees.
    pub fn angle_axis(&self) -> Vec<f64> {
        (0..self.config.angle_bins)
            .map(|j| self.config.angle_start + j as f64 * self.config.angle_bin)
            .collect()
    }

    /// CSV matrix: a header row of angle bin edges, then one row per delay
    /// bin led by its delay edge.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay_s\\aoa_deg");
        for a in self.angle_axis() {
            out.push_str(&format!(",{a}"));
        }
        out.push('\n');
        for (i, d) in self.delay_axis().into_iter().enumerate() {
            out.push_str(&format!("{d:e}"));
            for j in 0..self.config.angle_bins {
                out.push_str(&format!(",{}", self.value_db(i, j)));
            }
            out.push('\n');
        }
        out
    }

    pub(crate) fn check_same_config(&self, other: &PdapGrid, op: &'static str) -> Result<()> {
        if self.config != other.config {
            return Err(Error::Shape {
                op,
                lhs: vec![self.config.delay_bins, self.config.angle_bins],
                rhs: vec![other.config.delay_bins, other.config.angle_bins],
            });
        }
        Ok(())
    }
}

pub fn pdap_of(mpcs: &[Mpc], config: &GridConfig) -> Result<PdapGrid> {
    config.validate()?;
    let mut linear = vec![0.0; config.cells()];
    let mut clipped = 0;
    for m in mpcs {
        let (cell, clip) = config.cell_of(m);
        linear[cell] += m.power();
        clipped += usize::from(clip);
    }
    Ok(PdapGrid::from_linear(config, linear, clipped))
}

/// Profile of one sample: each component's power `gain²` lands in its
/// cell; empty cells sit at the floor.
pub fn pdap(sample: &ChannelSample, config: &GridConfig) -> Result<PdapGrid> {
    pdap_of(sample.mpcs(), config)
}

/// Cell-wise mean of the linear profiles of `samples`, converted to dB.
pub fn average_pdap(samples: &[ChannelSample], config: &GridConfig) -> Result<PdapGrid> {
    if samples.is_empty() {
        return Err(Error::Domain("average over zero samples".into()));
    }
    config.validate()?;
    let mut acc = vec![0.0; config.cells()];
    let mut clipped = 0;
    for s in samples {
        for m in s.mpcs() {
            let (cell, clip) = config.cell_of(m);
            acc[cell] += m.power();
            clipped += usize::from(clip);
        }
    }
    let n = samples.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(PdapGrid::from_linear(config, acc, clipped))
}

/// Root-mean-square difference of two grids in the dB domain.
pub fn pdap_rmse(a: &PdapGrid, b: &PdapGrid) -> Result<f64> {
    a.check_same_config(b, "pdap_rmse")?;
    let sum: f64 = a
        .db
        .iter()
        .zip(&b.db)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / a.db.len() as f64).sqrt())
}
