use crate::error::{Error, Result};

/// Result of a log-linear fit `v(t) ≈ A e^{−rate·t}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS of `(v − fit)/fit` over the samples.
    pub relative_residual: f64,
}

pub fn fit_exponential_decay(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Fit(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 8 {
        return Err(Error::Fit(format!(
            "need at least 8 samples, got {}",
            times.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit(format!("values must be positive, found {v}")));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, l) in times.iter().zip(&logs) {
        sxy += (t - tm) * (l - lm);
        sxx += (t - tm) * (t - tm);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("all sample times coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let amplitude = intercept.exp();
    let ss: f64 = times
        .iter()
        .zip(values)
        .map(|(t, v)| {
            let fit = (intercept + slope * t).exp();
            ((v - fit) / fit).powi(2)
        })
        .sum();
    Ok(DecayFit {
        rate: -slope,
        amplitude,
        relative_residual: (ss / n).sqrt(),
    })
}
