//! Scalar special functions behind every kernel and bound: the
//! Riemann-Liouville weight `omega_beta(t) = t^(beta-1) / Gamma(beta)`,
//! log-gamma, and the one-parameter Mittag-Leffler function.

use crate::error::{Error, Result};

/// Natural logarithm of `|Gamma(x)|` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            what: "log_gamma needs a positive finite argument",
            value: x,
        });
    }
    Ok(libm::lgamma_r(x).0)
}

/// `Gamma(x)`, rejecting the poles at non-positive integers.
pub fn gamma(x: f64) -> Result<f64> {
    if is_gamma_pole(x) {
        return Err(Error::Domain {
            what: "gamma pole",
            value: x,
        });
    }
    Ok(libm::tgamma(x))
}

fn is_gamma_pole(x: f64) -> bool {
    !x.is_finite() || (x <= 0.0 && libm::floor(x) == x)
}

/// `omega_beta(t) = t^(beta-1) / Gamma(beta)`.
///
/// `t = 0` is accepted for `beta >= 1` (the weight is 0 for `beta > 1`
/// and 1 for `beta = 1`).
pub fn omega(beta: f64, t: f64) -> Result<f64> {
    let w = Weight::new(beta)?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain {
            what: "omega needs t >= 0",
            value: t,
        });
    }
    if t == 0.0 && beta < 1.0 {
        return Err(Error::Domain {
            what: "omega is singular at t = 0 for beta < 1",
            value: beta,
        });
    }
    Ok(w.at(t))
}

/// A Riemann-Liouville weight with its gamma factor resolved once, for
/// repeated evaluation in kernel loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    beta: f64,
    log_abs_gamma: f64,
    sign: f64,
}

impl Weight {
    pub fn new(beta: f64) -> Result<Self> {
        if is_gamma_pole(beta) {
            return Err(Error::Domain {
                what: "omega order at a gamma pole",
                value: beta,
            });
        }
        let (lg, sign) = libm::lgamma_r(beta);
        Ok(Self {
            beta,
            log_abs_gamma: lg,
            sign: f64::from(sign),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Unchecked evaluation. Returns `+inf` (times the gamma sign) at
    /// `t = 0` when `beta < 1` and NaN for negative `t`.
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.sign * libm::exp((self.beta - 1.0) * libm::log(t) - self.log_abs_gamma)
        } else if t == 0.0 {
            if self.beta > 1.0 {
                0.0
            } else if self.beta == 1.0 {
                1.0
            } else {
                self.sign * f64::INFINITY
            }
        } else {
            f64::NAN
        }
    }

    /// `omega(base + width) - omega(base)` without cancellation, for
    /// `base >= 0` and `width > 0`.
    #[inline]
    pub fn increment(&self, base: f64, width: f64) -> f64 {
        if base <= 0.0 {
            return self.at(width) - self.at(0.0);
        }
        let p = self.beta - 1.0;
        self.at(base) * libm::expm1(p * libm::log1p(width / base))
    }
}

/// The weights `omega_beta`, `omega_(beta+1)`, `omega_(beta+2)`, enough to
/// integrate `omega_beta` against linear factors in closed form.
#[derive(Debug, Clone, Copy)]
pub struct WeightFamily {
    pub base: Weight,
    pub first: Weight,
    pub second: Weight,
}

impl WeightFamily {
    pub fn new(beta: f64) -> Result<Self> {
        Ok(Self {
            base: Weight::new(beta)?,
            first: Weight::new(beta + 1.0)?,
            second: Weight::new(beta + 2.0)?,
        })
    }

    /// `int_d^(d+width) omega_beta(r) dr`.
    #[inline]
    pub fn integral(&self, d: f64, width: f64) -> f64 {
        self.first.increment(d, width)
    }

    /// `int_d^(d+width) (r - anchor) * omega_beta(r) dr` for `d > 0`.
    ///
    /// Narrow cells far from the origin go through a Taylor expansion about
    /// the cell centre, where the closed form would cancel.
    pub fn moment(&self, d: f64, width: f64, anchor: f64) -> f64 {
        let centre = d + 0.5 * width;
        let q = 0.5 * width / centre;
        if d > 0.0 && q <= 0.25 {
            self.moment_series(centre, width, centre - anchor)
        } else {
            // [(r - a) w1(r) - w2(r)] evaluated between d and d + width
            let hi = d + width;
            (hi - anchor) * self.first.at(hi)
                - (d - anchor) * self.first.at(d)
                - self.second.increment(d, width)
        }
    }

    fn moment_series(&self, centre: f64, width: f64, offset: f64) -> f64 {
        let beta = self.base.beta();
        let half = 0.5 * width;
        let q = half / centre;
        let w = self.base.at(centre);
        let mut coef = 1.0; // prod_{i<=j} (beta - i) / i
        let mut qj = 1.0;
        let mut odd = 0.0;
        let mut even = 0.0;
        let (mut last_odd, mut last_even) = (f64::INFINITY, f64::INFINITY);
        for j in 0..400usize {
            if j > 0 {
                coef *= (beta - j as f64) / j as f64;
                qj *= q;
            }
            let jf = j as f64;
            if j % 2 == 1 {
                last_odd = coef * qj / (jf + 2.0);
                odd += last_odd;
            } else {
                last_even = coef * qj / (jf + 1.0);
                even += last_even;
            }
            if j >= 3
                && libm::fabs(last_odd) <= 1e-17 * libm::fabs(odd)
                && libm::fabs(last_even) <= 1e-17 * libm::fabs(even)
            {
                break;
            }
        }
        2.0 * w * half * (half * odd + offset * even)
    }
}

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Hard cap on the number of series terms in [`mittag_leffler`].
pub const MITTAG_LEFFLER_MAX_TERMS: usize = 10_000;

/// One-parameter Mittag-Leffler function `E_alpha(z) = sum z^k / Gamma(alpha k + 1)`
/// for `0 < alpha <= 1`.
///
/// The power series is summed with compensation until a term drops below
/// `1e-16` of the partial sum. Terms are formed in log space so they never
/// overflow on their own; the sum itself leaves double range once
/// `z^(1/alpha)` passes roughly 700, and that case is reported as
/// [`Error::SeriesDivergence`]. Negative arguments are accepted while the
/// alternating series keeps at least eight significant digits.
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain {
            what: "mittag_leffler needs 0 < alpha <= 1",
            value: alpha,
        });
    }
    if !z.is_finite() {
        return Err(Error::Domain {
            what: "mittag_leffler needs a finite argument",
            value: z,
        });
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let diverged = |terms| Error::SeriesDivergence { alpha, z, terms };
    let log_abs_z = libm::log(libm::fabs(z));
    let mut acc = CompensatedSum::new();
    acc.add(1.0);
    let mut largest: f64 = 1.0;
    for k in 1..MITTAG_LEFFLER_MAX_TERMS {
        let kf = k as f64;
        let log_term = kf * log_abs_z - libm::lgamma_r(alpha * kf + 1.0).0;
        let mut term = libm::exp(log_term);
        if z < 0.0 && k % 2 == 1 {
            term = -term;
        }
        if !term.is_finite() {
            return Err(diverged(k));
        }
        acc.add(term);
        largest = largest.max(libm::fabs(term));
        let sum = acc.value();
        if !sum.is_finite() {
            return Err(diverged(k));
        }
        if libm::fabs(term) < 1e-16 * libm::fabs(sum) {
            if largest > 1e8 * libm::fabs(sum) {
                // alternating series lost too many digits
                return Err(diverged(k));
            }
            return Ok(sum);
        }
    }
    Err(diverged(MITTAG_LEFFLER_MAX_TERMS))
}
