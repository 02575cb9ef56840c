use super::ChannelSample;
use crate::error::{Error, Result};

/// Per-feature min-max bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    /// `(v - min) / (max - min)` clipped to `[0, 1]`.
    pub fn forward(&self, v: f64) -> f64 {
        ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }

    /// Inverse map; the input is clamped to `[0, 1]` first.
    pub fn inverse(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        self.min + u * (self.max - self.min)
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.max > self.min
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    GainDb,
    Phase,
    Delay,
    Aoa,
    Distance,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::GainDb,
        Feature::Phase,
        Feature::Delay,
        Feature::Aoa,
        Feature::Distance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::GainDb => "gain_db",
            Feature::Phase => "phase",
            Feature::Delay => "delay",
            Feature::Aoa => "aoa",
            Feature::Distance => "distance",
        }
    }
}

/// Min-max normalization fitted on a training split. Bounds are shared by
/// all components of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaler {
    pub gain_db: Range,
    pub phase: Range,
    pub delay: Range,
    pub aoa: Range,
    pub distance: Range,
}

impl Scaler {
    pub fn fit(samples: &[ChannelSample]) -> Result<Self> {
        let mut s = Self {
            gain_db: Range::empty(),
            phase: Range::empty(),
            delay: Range::empty(),
            aoa: Range::empty(),
            distance: Range::empty(),
        };
        for sample in samples {
            s.distance.include(sample.distance());
            for m in sample.mpcs() {
                s.gain_db.include(m.gain_db());
                s.phase.include(m.phase);
                s.delay.include(m.delay);
                s.aoa.include(m.aoa);
            }
        }
        s.check()?;
        Ok(s)
    }

    pub fn from_ranges(ranges: [Range; 5]) -> Result<Self> {
        let s = Self {
            gain_db: ranges[0],
            phase: ranges[1],
            delay: ranges[2],
            aoa: ranges[3],
            distance: ranges[4],
        };
        s.check()?;
        Ok(s)
    }

    pub fn get(&self, f: Feature) -> Range {
        match f {
            Feature::GainDb => self.gain_db,
            Feature::Phase => self.phase,
            Feature::Delay => self.delay,
            Feature::Aoa => self.aoa,
            Feature::Distance => self.distance,
        }
    }

    /// Fails on a degenerate feature (max <= min).
    pub fn check(&self) -> Result<()> {
        for f in Feature::ALL {
            let r = self.get(f);
            if !r.is_valid() {
                return Err(Error::Config(format!(
                    "degenerate scaler for {}: min {} max {}",
                    f.name(),
                    r.min,
                    r.max
                )));
            }
        }
        Ok(())
    }
}
