use super::special::{exp_integral_e1, ln_gamma_unchecked, lower_gamma_series, upper_gamma_cf};
use crate::error::{domain, Error, Result};

/// Tail mass `nu(x) = int_x^inf l(t) dt` of the Lévy density `l(t) = t^-1 e^-t` (gamma
/// subordinator, `alpha = 0`) or `l(t) = alpha t^(-alpha-1) e^-t` (`0 < alpha < 1`).
#[derive(Debug, Clone, Copy)]
pub struct LevyTail {
    alpha: f64,
    gamma_1ma: f64,
}

const LN_MIN_POSITIVE: f64 = -708.396_418_532_264_1;

impl LevyTail {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return domain(format!("Lévy tail requires 0 <= alpha < 1, got {alpha}"));
        }
        Ok(LevyTail {
            alpha,
            gamma_1ma: ln_gamma_unchecked(1.0 - alpha).exp(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Gamma(1 - alpha)`; the rate of the Gamma-distributed time horizon.
    pub fn gamma_one_minus_alpha(&self) -> f64 {
        self.gamma_1ma
    }

    pub fn density(&self, x: f64) -> f64 {
        if self.alpha == 0.0 {
            (-x).exp() / x
        } else {
            self.alpha * (-(self.alpha + 1.0) * x.ln() - x).exp()
        }
    }

    /// Tail mass for `x > 0` (no argument checks).
    pub fn tail(&self, x: f64) -> f64 {
        let a = self.alpha;
        if a == 0.0 {
            return exp_integral_e1(x).unwrap_or(0.0);
        }
        if x >= 1.0 {
            // alpha * Gamma(-alpha, x) straight from the continued fraction.
            let front = (-x - a * x.ln()).exp();
            if front == 0.0 {
                return 0.0;
            }
            return a * front * upper_gamma_cf(-a, x).unwrap_or(0.0);
        }
        // Integration by parts: x^-a e^-x - Gamma(1 - a, x).
        let s = 1.0 - a;
        let lower = (-x + s * x.ln()).exp() * lower_gamma_series(s, x).unwrap_or(0.0);
        (-x - a * x.ln()).exp() - (self.gamma_1ma - lower)
    }

    /// `int_0^c t l(t) dt`, the expected jump mass per unit time below `c`.
    pub fn small_mass(&self, c: f64) -> f64 {
        let a = self.alpha;
        if c <= 0.0 {
            return 0.0;
        }
        if a == 0.0 {
            return -(-c).exp_m1();
        }
        let s = 1.0 - a;
        if c < s + 1.0 {
            a * (-c + s * c.ln()).exp() * lower_gamma_series(s, c).unwrap_or(0.0)
        } else {
            let upper = (-c + s * c.ln()).exp() * upper_gamma_cf(s, c).unwrap_or(0.0);
            a * (self.gamma_1ma - upper)
        }
    }

    fn initial_guess(&self, y: f64) -> f64 {
        let small = if self.alpha == 0.0 {
            -y - super::special::EULER_GAMMA
        } else {
            -(y + self.gamma_1ma).ln() / self.alpha
        };
        if y >= 1.0 {
            small
        } else {
            small.max((-y.ln()).max(1e-3).ln())
        }
    }

    /// Solves `tail(x) = y`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        self.inverse_bracketed(y, None)
    }

    /// Solves `tail(x) = y` given a point `upper` already known to satisfy `tail(upper) <= y`.
    /// Successive Ferguson-Klass jumps use the previous jump as `upper`.
    pub fn inverse_below(&self, y: f64, upper: f64) -> Result<f64> {
        self.inverse_bracketed(y, Some(upper))
    }

    fn inverse_bracketed(&self, y: f64, upper: Option<f64>) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return domain(format!("Lévy tail inverse requires finite y > 0, got {y}"));
        }
        let f = |u: f64| self.tail(u.exp()) - y;
        let guess = self.initial_guess(y).clamp(LN_MIN_POSITIVE, 7.0);

        // Bracket [lo, hi] in log space with f(lo) >= 0 >= f(hi).
        let mut hi = match upper {
            Some(x) if x > 0.0 => x.ln().min(7.0),
            _ => guess,
        };
        let mut step = 0.5;
        while f(hi) > 0.0 {
            hi += step;
            step *= 2.0;
            if hi > 7.0 {
                hi = 7.0;
                break;
            }
        }
        let mut lo = guess.min(hi);
        let mut step = 0.5;
        while f(lo) < 0.0 {
            if lo <= LN_MIN_POSITIVE {
                return Err(Error::Numeric(format!(
                    "Lévy tail inverse of {y} (alpha={}) underflows f64",
                    self.alpha
                )));
            }
            lo = (lo - step).max(LN_MIN_POSITIVE);
            step *= 2.0;
        }

        // Safeguarded Newton on u = ln x; bisection whenever Newton leaves the bracket.
        let mut u = if guess > lo && guess < hi {
            guess
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..300 {
            let fu = f(u);
            if fu.abs() <= 1e-14 * y {
                return Ok(u.exp());
            }
            if fu > 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
                return Ok(u.exp());
            }
            let x = u.exp();
            let slope = -x * self.density(x);
            let newton = u - fu / slope;
            u = if slope < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(u.exp())
    }
}

/// Tail mass of the Lévy measure; see [`LevyTail`].
pub fn levy_tail(alpha: f64, x: f64) -> Result<f64> {
    let lt = LevyTail::new(alpha)?;
    if !(x > 0.0) {
        return domain(format!("Lévy tail requires x > 0, got {x}"));
    }
    Ok(lt.tail(x))
}

/// Inverse of [`levy_tail`] in its second argument.
pub fn levy_tail_inverse(alpha: f64, y: f64) -> Result<f64> {
    LevyTail::new(alpha)?.inverse(y)
}

/// `int_0^c t l(t) dt`; see [`LevyTail::small_mass`].
pub fn levy_small_mass(alpha: f64, c: f64) -> Result<f64> {
    let lt = LevyTail::new(alpha)?;
    if !(c >= 0.0) {
        return domain(format!("small-jump mass requires c >= 0, got {c}"));
    }
    Ok(lt.small_mass(c))
}
