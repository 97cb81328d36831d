use rand_distr::{Beta, Distribution, Exp1, Gamma};

use super::RngStream;
use crate::error::{domain, Result};

fn check_shape(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        domain(format!("{name} must be finite and > 0, got {v}"))
    }
}

/// Draw from `Beta(a, b)`, clamped into the open unit interval.
pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(sample_beta_pair(a, b, rng)?.0)
}

/// Draw `B ~ Beta(a, b)` together with `1 - B`, both strictly inside `(0, 1]`.
pub fn sample_beta_pair(a: f64, b: f64, rng: &mut RngStream) -> Result<(f64, f64)> {
    check_shape("beta shape a", a)?;
    check_shape("beta shape b", b)?;
    let dist = Beta::new(a, b).map_err(|e| crate::Error::Domain(e.to_string()))?;
    let mut v: f64 = dist.sample(rng);
    if !(v > 0.0) {
        v = f64::MIN_POSITIVE;
    }
    if !(v < 1.0) {
        v = 1.0 - f64::EPSILON / 2.0;
    }
    Ok((v, 1.0 - v))
}

/// Draw from `Gamma(shape, rate)` (mean `shape / rate`).
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    check_shape("gamma shape", shape)?;
    check_shape("gamma rate", rate)?;
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| crate::Error::Domain(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Standard exponential draw.
pub fn sample_exponential(rng: &mut RngStream) -> f64 {
    Exp1.sample(rng)
}
