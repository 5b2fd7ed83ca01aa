//! Problem data for `D^alpha u - (mu u_x)_x = c u + f` on `(xl, xr)` with
//! Dirichlet boundaries, including the two manufactured test problems.

use alloc::boxed::Box;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{Error, Result};
use crate::kernels::check_alpha;
use crate::special::Weight;

pub type SpaceFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
pub type TimeFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Exact solution data for manufactured problems.
pub struct ExactSolution {
    /// `u(x, t)`.
    pub u: SpaceTimeFn,
    /// `(D^alpha u)(x, t)`.
    pub caputo: SpaceTimeFn,
    /// `(L u)(x, t) = -(mu u_x)_x`, if known.
    pub lu: Option<SpaceTimeFn>,
}

/// Coefficients, data and optional exact solution of one problem.
pub struct ProblemSpec {
    pub name: &'static str,
    pub xl: f64,
    pub xr: f64,
    pub alpha: f64,
    /// Regularity parameter of the exact solution, if known.
    pub sigma: Option<f64>,
    pub mu: SpaceFn,
    pub c: SpaceFn,
    pub f: SpaceTimeFn,
    pub u0: SpaceFn,
    pub ub_left: TimeFn,
    pub ub_right: TimeFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &(self.xl, self.xr))
            .field("alpha", &self.alpha)
            .field("sigma", &self.sigma)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn exact(&self) -> Result<&ExactSolution> {
        self.exact.as_ref().ok_or(Error::MissingExact)
    }

    /// `max |c|` sampled on `samples + 1` equispaced points.
    pub fn kappa(&self, samples: usize) -> f64 {
        let n = samples.max(1);
        (0..=n)
            .map(|i| libm::fabs((self.c)(self.xl + (self.xr - self.xl) * i as f64 / n as f64)))
            .fold(0.0, f64::max)
    }

    /// PDE residual `D^alpha u + L u - c u - f` of the exact solution at `(x, t)`.
    pub fn residual(&self, x: f64, t: f64) -> Result<f64> {
        let ex = self.exact()?;
        let lu = ex.lu.as_ref().ok_or(Error::MissingExact)?;
        Ok((ex.caputo)(x, t) + lu(x, t) - (self.c)(x) * (ex.u)(x, t) - (self.f)(x, t))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "regularity parameter must be positive",
            value: sigma,
        })
    }
}

/// Variable diffusivity `e^x`, reaction `2 sin x + 1`, exact solution
/// `u = omega_(1+sigma)(t) sin x` on `(0, pi)` with zero initial and boundary data.
pub fn example1(alpha: f64, sigma: f64) -> Result<ProblemSpec> {
    check_alpha(alpha)?;
    check_sigma(sigma)?;
    let w = Weight::new(1.0 + sigma)?;
    let wc = Weight::new(1.0 + sigma - alpha)?;
    Ok(ProblemSpec {
        name: "example1",
        xl: 0.0,
        xr: PI,
        alpha,
        sigma: Some(sigma),
        mu: Box::new(libm::exp),
        c: Box::new(|x| 2.0 * libm::sin(x) + 1.0),
        f: Box::new(move |x, t| {
            let (s, c) = (libm::sin(x), libm::cos(x));
            wc.at(t) * s + w.at(t) * (libm::exp(x) * (s - c) - (2.0 * s + 1.0) * s)
        }),
        u0: Box::new(|_| 0.0),
        ub_left: Box::new(|_| 0.0),
        ub_right: Box::new(|_| 0.0),
        exact: Some(ExactSolution {
            u: Box::new(move |x, t| w.at(t) * libm::sin(x)),
            caputo: Box::new(move |x, t| wc.at(t) * libm::sin(x)),
            lu: Some(Box::new(move |x, t| w.at(t) * libm::exp(x) * (libm::sin(x) - libm::cos(x)))),
        }),
    })
}

/// Diffusivity `cos x + 2`, reaction `2 sin x + 1`, exact solution
/// `u = (1 + omega_(1+sigma)(t)) sin x` on `(0, pi)`.
pub fn example2(alpha: f64, sigma: f64) -> Result<ProblemSpec> {
    check_alpha(alpha)?;
    check_sigma(sigma)?;
    let w = Weight::new(1.0 + sigma)?;
    let wc = Weight::new(1.0 + sigma - alpha)?;
    Ok(ProblemSpec {
        name: "example2",
        xl: 0.0,
        xr: PI,
        alpha,
        sigma: Some(sigma),
        mu: Box::new(|x| libm::cos(x) + 2.0),
        c: Box::new(|x| 2.0 * libm::sin(x) + 1.0),
        f: Box::new(move |x, t| {
            let (s, c) = (libm::sin(x), libm::cos(x));
            wc.at(t) * s + (1.0 + w.at(t)) * (2.0 * s * (1.0 + c) - (2.0 * s + 1.0) * s)
        }),
        u0: Box::new(libm::sin),
        ub_left: Box::new(|_| 0.0),
        ub_right: Box::new(|_| 0.0),
        exact: Some(ExactSolution {
            u: Box::new(move |x, t| (1.0 + w.at(t)) * libm::sin(x)),
            caputo: Box::new(move |x, t| wc.at(t) * libm::sin(x)),
            lu: Some(Box::new(move |x, t| {
                (1.0 + w.at(t)) * 2.0 * libm::sin(x) * (1.0 + libm::cos(x))
            })),
        }),
    })
}

/// Inputs of [`custom_problem`].
pub struct CustomProblem {
    pub xl: f64,
    pub xr: f64,
    pub alpha: f64,
    pub sigma: Option<f64>,
    pub mu: SpaceFn,
    pub c: SpaceFn,
    pub f: SpaceTimeFn,
    pub u0: SpaceFn,
    pub ub_left: TimeFn,
    pub ub_right: TimeFn,
    pub exact: Option<ExactSolution>,
}

/// Number of sample points used by the construction checks.
const CHECK_SAMPLES: usize = 256;
const CHECK_TOL: f64 = 1e-13;

/// Validates and wraps user-supplied problem data. The diffusivity must be
/// positive on a sample of the domain; an exact solution, if given, must
/// agree with the initial and boundary data.
pub fn custom_problem(p: CustomProblem) -> Result<ProblemSpec> {
    check_alpha(p.alpha)?;
    if let Some(s) = p.sigma {
        check_sigma(s)?;
    }
    if !(p.xl.is_finite() && p.xr.is_finite() && p.xr > p.xl) {
        return Err(Error::InvalidMesh("space domain must satisfy xl < xr"));
    }
    let at = |i: usize| p.xl + (p.xr - p.xl) * i as f64 / CHECK_SAMPLES as f64;
    for i in 0..=2 * CHECK_SAMPLES {
        let x = p.xl + (p.xr - p.xl) * i as f64 / (2 * CHECK_SAMPLES) as f64;
        let m = (p.mu)(x);
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain {
                what: "diffusivity must be positive on the domain",
                value: m,
            });
        }
    }
    if let Some(ex) = &p.exact {
        for i in 0..=CHECK_SAMPLES {
            let x = at(i);
            let d = libm::fabs((ex.u)(x, 0.0) - (p.u0)(x));
            if d > CHECK_TOL * libm::fabs((p.u0)(x)).max(1.0) {
                return Err(Error::Inconsistent {
                    what: "initial data differ from the exact solution at t = 0",
                    deviation: d,
                });
            }
        }
        for i in 0..=CHECK_SAMPLES {
            let t = i as f64 / CHECK_SAMPLES as f64;
            for (side, x) in [(&p.ub_left, p.xl), (&p.ub_right, p.xr)] {
                let d = libm::fabs((ex.u)(x, t) - side(t));
                if d > CHECK_TOL * libm::fabs(side(t)).max(1.0) {
                    return Err(Error::Inconsistent {
                        what: "boundary data differ from the exact solution",
                        deviation: d,
                    });
                }
            }
        }
    }
    Ok(ProblemSpec {
        name: "custom",
        xl: p.xl,
        xr: p.xr,
        alpha: p.alpha,
        sigma: p.sigma,
        mu: p.mu,
        c: p.c,
        f: p.f,
        u0: p.u0,
        ub_left: p.ub_left,
        ub_right: p.ub_right,
        exact: p.exact,
    })
}

/// The homogeneous problem with the given coefficients and initial data:
/// `f = 0`, `u_b = 0`.
pub fn homogeneous_problem(xl: f64, xr: f64, alpha: f64, mu: SpaceFn, c: SpaceFn, u0: SpaceFn) -> Result<ProblemSpec> {
    custom_problem(CustomProblem {
        xl,
        xr,
        alpha,
        sigma: None,
        mu,
        c,
        f: Box::new(|_, _| 0.0),
        u0,
        ub_left: Box::new(|_| 0.0),
        ub_right: Box::new(|_| 0.0),
        exact: None,
    })
}
