use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_model::OpoModel;

/// APD detection event. `is_dark` never reaches the exported dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Click {
    pub time_s: f64,
    pub is_dark: bool,
}

/// Superposed Poisson processes of field-induced and dark clicks over
/// `[0, duration_s)`, in time order.
pub fn click_times<R: Rng>(model: &OpoModel, duration_s: f64, rng: &mut R) -> Result<Vec<Click>> {
    model.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::param("duration_s", "must be > 0"));
    }
    let signal = model.signal_click_rate();
    let dark = model.dark_count_rate_hz;
    let total = signal + dark;
    let mut out = Vec::new();
    if total <= 0.0 {
        return Ok(out);
    }
    let gap = Exp::new(total).map_err(|e| Error::param("rate", e.to_string()))?;
    let p_dark = dark / total;
    let mut t = gap.sample(rng);
    while t < duration_s {
        out.push(Click {
            time_s: t,
            is_dark: rng.random::<f64>() < p_dark,
        });
        t += gap.sample(rng);
    }
    Ok(out)
}

/// Empirical dark fraction of a click record.
pub fn dark_fraction(clicks: &[Click]) -> f64 {
    if clicks.is_empty() {
        return 0.0;
    }
    clicks.iter().filter(|c| c.is_dark).count() as f64 / clicks.len() as f64
}
