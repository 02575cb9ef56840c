use crate::error::{Error, Result};

/// Empirical CDF: sorted values with their cumulative probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct CdfTable {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl CdfTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest value whose cumulative probability reaches `p`.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        let i = self.probabilities.iter().position(|&q| q >= p)?;
        Some(self.values[i])
    }

    /// `value,probability` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,probability\n");
        for (v, p) in self.values.iter().zip(&self.probabilities) {
            out.push_str(&format!("{v:.16e},{p:.16e}\n"));
        }
        out
    }
}

/// Rank `i` (1-based) of `n` sorted values gets probability `i / n`; ties
/// keep one row each.
pub fn cdf(values: &[f64]) -> Result<CdfTable> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("cdf of non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let probabilities = (1..=sorted.len()).map(|i| i as f64 / n).collect();
    Ok(CdfTable {
        values: sorted,
        probabilities,
    })
}
