use crate::channel::{ChannelSample, Mpc};
use crate::error::{Error, Result};

/// Power-weighted RMS spread of `values` with weights `powers`.
fn rms_spread(values: impl Iterator<Item = (f64, f64)> + Clone) -> Result<f64> {
    let total: f64 = values.clone().map(|(_, p)| p).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Domain("total path power must be positive".into()));
    }
    let mean = values.clone().map(|(v, p)| v * p).sum::<f64>() / total;
    let second = values.map(|(v, p)| (v - mean) * (v - mean) * p).sum::<f64>() / total;
    Ok(second.sqrt())
}

/// RMS delay spread in seconds, each component weighted by `gain²`.
pub fn delay_spread(sample: &ChannelSample) -> Result<f64> {
    delay_spread_of(sample.mpcs())
}

/// RMS angular spread in degrees, with angles taken as plain reals.
pub fn angular_spread(sample: &ChannelSample) -> Result<f64> {
    angular_spread_of(sample.mpcs())
}

/// [`delay_spread`] over an arbitrary set of components.
pub fn delay_spread_of(mpcs: &[Mpc]) -> Result<f64> {
    rms_spread(mpcs.iter().map(|m| (m.delay, m.power())))
}

/// [`angular_spread`] over an arbitrary set of components.
pub fn angular_spread_of(mpcs: &[Mpc]) -> Result<f64> {
    rms_spread(mpcs.iter().map(|m| (m.aoa, m.power())))
}

/// Mean of a per-sample statistic.
pub fn mean_of(samples: &[ChannelSample], stat: fn(&ChannelSample) -> Result<f64>) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("mean over zero samples".into()));
    }
    let mut acc = 0.0;
    for s in samples {
        acc += stat(s)?;
    }
    Ok(acc / samples.len() as f64)
}
