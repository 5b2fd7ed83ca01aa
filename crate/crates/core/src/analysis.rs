//! Error measurement, convergence studies, global consistency sums and
//! evaluators for the stability and fractional Gronwall bounds.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{check_alpha, complementary_convolve, ComplementaryRow, KernelRow, KernelTable, Scheme};
use crate::mesh::{build_graded_mesh, TimeMesh};
use crate::problems::ProblemSpec;
use crate::kernels::KernelBuilder;
use crate::solver::{solve_with, HistoryMode, SchemeConfig, SolutionHistory, Stepper};
use crate::spatial::{build_grid, Operator, SpaceGrid};
use crate::special::{gamma, mittag_leffler};

/// Maximum and per-level discrete `H^1` errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTrace {
    /// `max_(1<=n<=N) |u(t_n) - u^n|_1`.
    pub max: f64,
    /// `|u(t_n) - u^n|_1` for `n = 0..=N`.
    pub per_level: Vec<f64>,
}

/// Streaming `H^1` error against the exact solution; feed it each level as
/// the solver produces it.
pub struct H1ErrorTracker<'p> {
    problem: &'p ProblemSpec,
    grid: SpaceGrid,
    op: Operator,
    buf: Vec<f64>,
    trace: ErrorTrace,
    failed: Option<Error>,
}

impl<'p> H1ErrorTracker<'p> {
    pub fn new(problem: &'p ProblemSpec, grid: &SpaceGrid) -> Result<Self> {
        problem.exact()?;
        Ok(Self {
            problem,
            grid: *grid,
            op: Operator::diffusion(grid, &problem.mu)?,
            buf: vec![0.0; grid.node_len()],
            trace: ErrorTrace {
                max: 0.0,
                per_level: Vec::new(),
            },
            failed: None,
        })
    }

    pub fn observe(&mut self, n: usize, t: f64, u: &[f64]) {
        let exact = &self.problem.exact.as_ref().expect("checked in new").u;
        for (i, b) in self.buf.iter_mut().enumerate() {
            *b = exact(self.grid.x(i), t) - u[i];
        }
        match self.op.h1_seminorm(&self.grid, &self.buf) {
            Ok(e) => {
                if n >= 1 {
                    self.trace.max = self.trace.max.max(e);
                }
                self.trace.per_level.push(e);
            }
            Err(err) => self.failed = Some(err),
        }
    }

    pub fn finish(self) -> Result<ErrorTrace> {
        match self.failed {
            Some(e) => Err(e),
            None => Ok(self.trace),
        }
    }
}

/// `e = max_n |u(t_n) - u^n|_1` for a stored solution.
pub fn h1_error(history: &SolutionHistory, problem: &ProblemSpec, grid: &SpaceGrid) -> Result<ErrorTrace> {
    let mut tracker = H1ErrorTracker::new(problem, grid)?;
    for n in 0..=history.len() {
        let u = history.level(n)?;
        tracker.observe(n, history.times()[n], &u);
    }
    tracker.finish()
}

/// Solves and measures the `H^1` error without storing intermediate levels.
pub fn solve_and_measure(config: &SchemeConfig, problem: &ProblemSpec, mesh: &TimeMesh, grid: &SpaceGrid) -> Result<ErrorTrace> {
    let mut tracker = H1ErrorTracker::new(problem, grid)?;
    let cfg = config.with_history(HistoryMode::Recompute);
    solve_with(&cfg, problem, mesh, grid, |n, t, u| tracker.observe(n, t, u))?;
    tracker.finish()
}

/// Solves on `grid` and on its two-fold refinement in lockstep and measures
/// the `H^1` error of the Richardson combination `(4 u_(2M) - u_M) / 3` on the
/// coarse nodes, which cancels the leading `h^2` spatial error.
pub fn solve_and_measure_extrapolated(config: &SchemeConfig, problem: &ProblemSpec, mesh: &TimeMesh, grid: &SpaceGrid) -> Result<ErrorTrace> {
    let fine_grid = build_grid(grid.xl(), grid.xr(), 2 * grid.intervals())?;
    let mut tracker = H1ErrorTracker::new(problem, grid)?;
    let mut coarse = Stepper::new(config, problem, mesh, grid)?;
    let mut fine = Stepper::new(config, problem, mesh, &fine_grid)?;
    let builder = KernelBuilder::new(mesh, config.scheme, config.alpha)?;
    let mut combined = vec![0.0; grid.node_len()];
    let combine = |out: &mut [f64], c: &[f64], f: &[f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (4.0 * f[2 * i] - c[i]) / 3.0;
        }
    };
    combine(&mut combined, coarse.current(), fine.current());
    tracker.observe(0, 0.0, &combined);
    for n in 1..=mesh.len() {
        let row = builder.row(n)?;
        coarse.advance_with_row(&row)?;
        fine.advance_with_row(&row)?;
        combine(&mut combined, coarse.current(), fine.current());
        tracker.observe(n, mesh.t(n), &combined);
    }
    tracker.finish()
}

/// How the error of a run is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialErrorMode {
    /// Error of the computed solution on the `M`-interval grid.
    #[default]
    Direct,
    /// Error of the spatial Richardson combination of the `M` and `2M` solutions.
    Extrapolated,
}

/// Error of one run in the requested mode.
pub fn measure(mode: SpatialErrorMode, config: &SchemeConfig, problem: &ProblemSpec, mesh: &TimeMesh, grid: &SpaceGrid) -> Result<ErrorTrace> {
    match mode {
        SpatialErrorMode::Direct => solve_and_measure(config, problem, mesh, grid),
        SpatialErrorMode::Extrapolated => solve_and_measure_extrapolated(config, problem, mesh, grid),
    }
}

/// `order_i = log2(e_i / e_(i+1))` for step counts that double.
pub fn convergence_orders(steps: &[usize], errors: &[f64]) -> Result<Vec<f64>> {
    if steps.len() != errors.len() {
        return Err(Error::ShapeMismatch {
            expected: steps.len(),
            found: errors.len(),
        });
    }
    if steps.len() < 2 {
        return Err(Error::ShapeMismatch {
            expected: 2,
            found: steps.len(),
        });
    }
    for (i, w) in steps.windows(2).enumerate() {
        if w[1] != 2 * w[0] {
            return Err(Error::NotDoubling { index: i + 1 });
        }
    }
    Ok(errors.windows(2).map(|w| libm::log2(w[0] / w[1])).collect())
}

/// Order predicted by the convergence theory on graded meshes.
pub fn predicted_order(scheme: Scheme, alpha: f64, sigma: f64, gamma: f64) -> f64 {
    let cap = match scheme {
        Scheme::L1 => 2.0 - alpha,
        Scheme::FracCn => 2.0,
    };
    (gamma * sigma).min(cap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub intervals: usize,
    pub error: f64,
    /// `log2(e(N)/e(2N))`, absent on the last row.
    pub order: Option<f64>,
}

/// Spatial resolution policy: start at `initial` intervals and double while
/// `|e(M) - e(2M)| >= tolerance * e(M)` at the finest step count, up to `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGuard {
    pub initial: usize,
    pub max: usize,
    pub tolerance: f64,
    pub enabled: bool,
}

impl Default for SpatialGuard {
    fn default() -> Self {
        Self {
            initial: 2048,
            max: 16384,
            tolerance: 0.05,
            enabled: true,
        }
    }
}

/// Outcome of the spatial guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardOutcome {
    /// Intervals used for every row of the study.
    pub intervals: usize,
    /// `|e(M) - e(2M)| / e(M)` for the accepted `M` (finest step count).
    pub relative_change: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub scheme: Scheme,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub t_final: f64,
    /// Size of the graded phase; `None` uses the default.
    pub graded_span: Option<f64>,
    pub steps: Vec<usize>,
    pub guard: SpatialGuard,
    pub spatial: SpatialErrorMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scheme: Scheme,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub rows: Vec<ConvergenceRow>,
    pub predicted_order: f64,
    pub guard: Option<GuardOutcome>,
    pub spatial: SpatialErrorMode,
}

impl ConvergenceReport {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }
}

/// Resolution chosen by the spatial guard, with the finest-row error it measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialResolution {
    pub intervals: usize,
    pub guard: Option<GuardOutcome>,
    /// Error at the finest step count and the chosen `M`, if already computed.
    pub finest_error: Option<f64>,
}

fn check_study(study: &ConvergenceStudy, problem: &ProblemSpec) -> Result<()> {
    check_alpha(study.alpha)?;
    if problem.alpha != study.alpha {
        return Err(Error::Domain {
            what: "study order differs from the problem order",
            value: study.alpha,
        });
    }
    if study.steps.is_empty() {
        return Err(Error::ShapeMismatch { expected: 1, found: 0 });
    }
    for (i, w) in study.steps.windows(2).enumerate() {
        if w[1] != 2 * w[0] {
            return Err(Error::NotDoubling { index: i + 1 });
        }
    }
    Ok(())
}

/// Maximum `H^1` error of one study point `(N, M)`.
pub fn study_error(study: &ConvergenceStudy, problem: &ProblemSpec, steps: usize, intervals: usize) -> Result<f64> {
    let config = SchemeConfig::new(study.scheme, study.alpha)?.with_history(HistoryMode::Recompute);
    let mesh = build_graded_mesh(study.gamma, steps, study.t_final, study.graded_span)?;
    let grid = build_grid(problem.xl, problem.xr, intervals)?;
    Ok(measure(study.spatial, &config, problem, &mesh, &grid)?.max)
}

/// Applies the spatial guard at the finest step count of the study.
pub fn resolve_spatial(study: &ConvergenceStudy, problem: &ProblemSpec) -> Result<SpatialResolution> {
    check_study(study, problem)?;
    let mut m = study.guard.initial;
    if !study.guard.enabled {
        return Ok(SpatialResolution {
            intervals: m,
            guard: None,
            finest_error: None,
        });
    }
    let finest = *study.steps.last().expect("checked nonempty");
    let mut e_m = study_error(study, problem, finest, m)?;
    loop {
        let e_2m = study_error(study, problem, finest, 2 * m)?;
        let change = libm::fabs(e_m - e_2m) / e_m;
        let passed = change < study.guard.tolerance;
        if passed || 2 * m > study.guard.max {
            if !passed {
                log::warn!("spatial guard not met at M = {m}: relative change {change:.3}");
            }
            return Ok(SpatialResolution {
                intervals: m,
                guard: Some(GuardOutcome {
                    intervals: m,
                    relative_change: change,
                    passed,
                }),
                finest_error: Some(e_m),
            });
        }
        log::info!("spatial guard: doubling M to {}", 2 * m);
        m *= 2;
        e_m = e_2m;
    }
}

/// Builds the report from per-row errors in study order.
pub fn assemble_report(study: &ConvergenceStudy, resolution: &SpatialResolution, errors: &[f64]) -> Result<ConvergenceReport> {
    if errors.len() != study.steps.len() {
        return Err(Error::ShapeMismatch {
            expected: study.steps.len(),
            found: errors.len(),
        });
    }
    let orders = if errors.len() >= 2 {
        convergence_orders(&study.steps, errors)?
    } else {
        Vec::new()
    };
    let rows = study
        .steps
        .iter()
        .zip(errors)
        .enumerate()
        .map(|(i, (&n, &e))| ConvergenceRow {
            steps: n,
            intervals: resolution.intervals,
            error: e,
            order: orders.get(i).copied(),
        })
        .collect();
    Ok(ConvergenceReport {
        scheme: study.scheme,
        alpha: study.alpha,
        sigma: study.sigma,
        gamma: study.gamma,
        rows,
        predicted_order: predicted_order(study.scheme, study.alpha, study.sigma, study.gamma),
        guard: resolution.guard,
        spatial: study.spatial,
    })
}

/// Runs a temporal convergence study for `problem`, whose order and
/// regularity must match the study parameters.
pub fn run_convergence(study: &ConvergenceStudy, problem: &ProblemSpec) -> Result<ConvergenceReport> {
    let resolution = resolve_spatial(study, problem)?;
    let finest = *study.steps.last().expect("checked nonempty");
    let errors = study
        .steps
        .iter()
        .map(|&n| match resolution.finest_error {
            Some(e) if n == finest => Ok(e),
            _ => study_error(study, problem, n, resolution.intervals),
        })
        .collect::<Result<Vec<f64>>>()?;
    assemble_report(study, &resolution, &errors)
}

fn check_power(power: u8) -> Result<()> {
    if power == 1 || power == 2 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "accumulation power must be 1 or 2",
            value: f64::from(power),
        })
    }
}

/// `sum_(j=1..n) P^(n)_(n-j) |upsilon^j|^power` for every `n`, from explicit
/// complementary rows.
pub fn global_consistency_accumulate(p_rows: &[ComplementaryRow], upsilon: &[f64], power: u8) -> Result<Vec<f64>> {
    check_power(power)?;
    p_rows
        .iter()
        .map(|p| {
            let n = p.n;
            if n > upsilon.len() || p.coeffs.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    found: upsilon.len(),
                });
            }
            Ok((1..=n).map(|j| p.coeffs[n - j] * libm::pow(libm::fabs(upsilon[j - 1]), f64::from(power))).sum())
        })
        .collect()
}

/// Same sums as [`global_consistency_accumulate`] in `O(N^2)` from the kernel rows.
pub fn global_consistency_fast(rows: &[KernelRow], upsilon: &[f64], power: u8) -> Result<Vec<f64>> {
    check_power(power)?;
    let g: Vec<f64> = upsilon.iter().map(|u| libm::pow(libm::fabs(*u), f64::from(power))).collect();
    complementary_convolve(rows, &g)
}

/// `max_(1<=k<=n) a_k` for every prefix.
fn running_max(a: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    a.iter()
        .map(|&v| {
            m = m.max(v);
            m
        })
        .collect()
}

/// Inputs of the `H^1` stability estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityInput<'a> {
    /// `|u^0|_1`.
    pub initial_h1: f64,
    /// `||f^(n-nu)||` for `n = 1..=N`.
    pub forcing_norms: &'a [f64],
    pub alpha: f64,
    pub kappa: f64,
    pub c_omega: f64,
    /// Maximum adjacent step ratio.
    pub rho: f64,
    pub pi_a: f64,
}

/// `|u^n|_1^2 <= 2 E_alpha(4 pi_A max(1,rho) kappa^2 C t_n^alpha) (|u^0|_1^2 + max_k sum_j P^(k)_(k-j) ||f^(j-nu)||^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityBound {
    /// Bound on `|u^n|_1^2`, `n = 1..=N`.
    pub squared: Vec<f64>,
    /// Square roots of `squared`.
    pub h1: Vec<f64>,
}

/// Evaluates the stability bound; the kernel rows supply the complementary sums.
/// A Mittag-Leffler argument beyond double range is an error.
pub fn stability_bound(input: &StabilityInput<'_>, rows: &[KernelRow], mesh: &TimeMesh) -> Result<StabilityBound> {
    check_alpha(input.alpha)?;
    let n_max = input.forcing_norms.len();
    if n_max > mesh.len() {
        return Err(Error::ShapeMismatch {
            expected: mesh.len(),
            found: n_max,
        });
    }
    let f2: Vec<f64> = input.forcing_norms.iter().map(|f| f * f).collect();
    let acc = running_max(&complementary_convolve(rows, &f2)?);
    let rate = 4.0 * input.pi_a * input.rho.max(1.0) * input.kappa * input.kappa * input.c_omega;
    let v0 = input.initial_h1 * input.initial_h1;
    let mut squared = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let e = mittag_leffler(input.alpha, rate * libm::pow(mesh.t(n), input.alpha))?;
        squared.push(2.0 * e * (v0 + acc[n - 1]));
    }
    let h1 = squared.iter().map(|s| libm::sqrt(*s)).collect();
    Ok(StabilityBound { squared, h1 })
}

/// Which hypothesis of the improved Gronwall inequality the data satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GronwallHypothesis {
    /// `sum_k A_(n-k) grad (v^k)^2 <= sum_k lambda_(n-k) (v^(k-nu))^2 + v^(n-nu) xi^n + (eta^n)^2`.
    Difference,
    /// The same inequality after convolution with the complementary kernel.
    Convolved,
}

/// Data of one application of the improved discrete fractional Gronwall inequality.
#[derive(Debug, Clone)]
pub struct GronwallInstance<'a> {
    /// `lambda_0 .. lambda_(N-1)`.
    pub lambda: &'a [f64],
    /// Upper bound for `sum_l lambda_l`.
    pub big_lambda: f64,
    /// `xi^1 .. xi^N`.
    pub xi: &'a [f64],
    /// `eta^1 .. eta^N`.
    pub eta: &'a [f64],
    /// `v^0 .. v^N`.
    pub v: &'a [f64],
    pub rows: &'a [KernelRow],
    pub mesh: &'a TimeMesh,
    pub alpha: f64,
    pub nu: f64,
    pub rho: f64,
    pub pi_a: f64,
    pub hypothesis: GronwallHypothesis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    /// Right side minus left side of the hypothesis, per step.
    pub hypothesis_margins: Vec<f64>,
    /// Whether every hypothesis margin is nonnegative up to round-off.
    pub hypothesis_holds: bool,
    /// Conclusion right side minus `v^n`, per step. `+inf` where the
    /// Mittag-Leffler factor exceeds double range (the bound is vacuous).
    pub conclusion_margins: Vec<f64>,
    /// The Mittag-Leffler factor overflowed for some step.
    pub overflowed: bool,
    /// Whether the simple form (`Lambda <= 0`, no step restriction) was used.
    pub simple_form: bool,
    /// Whether `tau <= 1/(2 pi_A Gamma(2-alpha) Lambda)^(1/alpha)` holds.
    pub step_restriction_met: bool,
}

impl GronwallReport {
    pub fn min_conclusion_margin(&self) -> f64 {
        self.conclusion_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Checks the hypothesis and evaluates the conclusion of the improved
/// discrete fractional Gronwall inequality.
pub fn gronwall_check(inst: &GronwallInstance<'_>) -> Result<GronwallReport> {
    check_alpha(inst.alpha)?;
    let n_max = inst.xi.len();
    if inst.eta.len() != n_max || inst.v.len() != n_max + 1 || inst.lambda.len() < n_max || inst.rows.len() < n_max {
        return Err(Error::ShapeMismatch {
            expected: n_max,
            found: inst.eta.len(),
        });
    }
    if inst.mesh.len() < n_max {
        return Err(Error::ShapeMismatch {
            expected: n_max,
            found: inst.mesh.len(),
        });
    }
    let all = inst.xi.iter().chain(inst.eta).chain(inst.v);
    if let Some(&bad) = all.clone().find(|x| !(**x >= 0.0)) {
        return Err(Error::Domain {
            what: "Gronwall sequences must be nonnegative",
            value: bad,
        });
    }
    let nu = inst.nu;
    let v = inst.v;
    let off = |k: usize| nu * v[k - 1] + (1.0 - nu) * v[k];
    // right side of the difference form without the history terms
    let forcing: Vec<f64> = (1..=n_max)
        .map(|n| {
            let mem: f64 = (1..=n).map(|k| inst.lambda[n - k] * off(k) * off(k)).sum();
            mem + off(n) * inst.xi[n - 1] + inst.eta[n - 1] * inst.eta[n - 1]
        })
        .collect();
    let hypothesis_margins: Vec<f64> = match inst.hypothesis {
        GronwallHypothesis::Difference => (1..=n_max)
            .map(|n| {
                let row = &inst.rows[n - 1];
                let lhs: f64 = (1..=n).map(|k| row.get(n - k) * (v[k] * v[k] - v[k - 1] * v[k - 1])).sum();
                forcing[n - 1] - lhs
            })
            .collect(),
        GronwallHypothesis::Convolved => {
            let conv = complementary_convolve(inst.rows, &forcing)?;
            (1..=n_max).map(|n| v[0] * v[0] + conv[n - 1] - v[n] * v[n]).collect()
        }
    };
    let scale = forcing.iter().chain(v.iter()).fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let hypothesis_holds = hypothesis_margins.iter().all(|m| *m >= -tol);

    let pxi = running_max(&complementary_convolve(inst.rows, inst.xi)?);
    let root = libm::sqrt(inst.pi_a * gamma(1.0 - inst.alpha)?);
    let eta_t: Vec<f64> = (1..=n_max)
        .map(|k| libm::pow(inst.mesh.t(k), inst.alpha / 2.0) * inst.eta[k - 1])
        .collect();
    let eta_max = running_max(&eta_t);
    let simple_form = inst.big_lambda <= 0.0 && inst.lambda.iter().all(|l| *l <= 0.0);
    let mut overflowed = false;
    let mut conclusion_margins = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let core = v[0] + pxi[n - 1] + root * eta_max[n - 1];
        let rhs = if simple_form {
            core
        } else {
            let z = 2.0 * inst.rho.max(1.0) * inst.pi_a * inst.big_lambda * libm::pow(inst.mesh.t(n), inst.alpha);
            match mittag_leffler(inst.alpha, z) {
                Ok(e) => 2.0 * e * core,
                Err(Error::SeriesDivergence { .. }) => {
                    overflowed = true;
                    f64::INFINITY
                }
                Err(e) => return Err(e),
            }
        };
        conclusion_margins.push(rhs - v[n]);
    }
    let step_restriction_met = simple_form || {
        let prod = 2.0 * inst.pi_a * gamma(2.0 - inst.alpha)? * inst.big_lambda;
        inst.mesh.tau_max() <= libm::pow(prod, -1.0 / inst.alpha)
    };
    Ok(GronwallReport {
        hypothesis_margins,
        hypothesis_holds,
        conclusion_margins,
        overflowed,
        simple_form,
        step_restriction_met,
    })
}

/// Margins of the L1 local consistency bound
/// `|Upsilon^n| <= A_0 G^n + sum_(k<n) (A_(n-k-1) - A_(n-k)) G^k`, where
/// `G^k = 2 int_(t_(k-1))^(t_k) (t - t_(k-1)) |v''(t)| dt` is supplied by the caller.
pub fn consistency_bound_check_l1(table: &KernelTable, upsilon: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    if table.scheme() != Scheme::L1 {
        return Err(Error::Domain {
            what: "L1 consistency bound needs L1 kernels",
            value: table.nu(),
        });
    }
    bound_margins(table, upsilon, g, g)
}

/// Margins of the Alikhanov local consistency bound
/// `|Upsilon^(n-theta)| <= A_0 G_loc^n + sum_(k<n) (A_(n-k-1) - A_(n-k)) G_his^k`.
pub fn consistency_bound_check_alikhanov(table: &KernelTable, upsilon: &[f64], g_loc: &[f64], g_his: &[f64]) -> Result<Vec<f64>> {
    if table.scheme() != Scheme::FracCn {
        return Err(Error::Domain {
            what: "Alikhanov consistency bound needs Alikhanov kernels",
            value: table.nu(),
        });
    }
    bound_margins(table, upsilon, g_loc, g_his)
}

fn bound_margins(table: &KernelTable, upsilon: &[f64], local: &[f64], hist: &[f64]) -> Result<Vec<f64>> {
    let n_max = upsilon.len();
    if local.len() < n_max || hist.len() + 1 < n_max || table.len() < n_max {
        return Err(Error::ShapeMismatch {
            expected: n_max,
            found: local.len(),
        });
    }
    Ok((1..=n_max)
        .map(|n| {
            let row = table.row(n);
            let mut bound = row.a0() * local[n - 1];
            for k in 1..n {
                bound += (row.get(n - k - 1) - row.get(n - k)) * hist[k - 1];
            }
            bound - libm::fabs(upsilon[n - 1])
        })
        .collect())
}
