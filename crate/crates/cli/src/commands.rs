//! Command implementations. Each returns plain data plus renderers so the
//! binary, the tests and the acceptance suite share one code path.

use std::io::Write;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use subdiff_core::analysis::{
    assemble_report, convergence_orders, h1_error, measure, resolve_spatial, stability_bound, study_error, ConvergenceReport,
    ConvergenceStudy, SpatialErrorMode, SpatialGuard, StabilityInput,
};
use subdiff_core::kernels::{
    complementary_rows, verify_complementary_identity, verify_kernel_assumptions, verify_p_bound, AssumptionReport, KernelTable,
    Scheme,
};
use subdiff_core::mesh::{build_custom_mesh, build_graded_mesh, build_uniform_mesh, mesh_diagnostics, random_mesh, MeshReport, TimeMesh};
use subdiff_core::problems::{example1, example2, ProblemSpec};
use subdiff_core::solver::{check_step_restriction, solve, stability_threshold, SchemeConfig, StepRestriction};
use subdiff_core::spatial::{build_grid, l2_norm, Operator, SpaceGrid};

use crate::config::RunConfig;
use crate::format::{order2, sci17, sci3, write_csv, Markdown};
use crate::presets::{ColumnPreset, SpatialPreset, TablePreset};

pub fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

pub fn example_problem(example: u8, alpha: f64, sigma: f64) -> Result<ProblemSpec> {
    Ok(match example {
        1 => example1(alpha, sigma)?,
        2 => example2(alpha, sigma)?,
        other => bail!("unknown example {other}; use 1 or 2"),
    })
}

/// Runs a convergence study with the step counts spread over `pool`.
/// Rows come back in study order whatever the completion order.
pub fn run_study(study: &ConvergenceStudy, problem: &ProblemSpec, pool: &rayon::ThreadPool) -> Result<ConvergenceReport> {
    let resolution = resolve_spatial(study, problem)?;
    let finest = *study.steps.last().expect("validated");
    let errors = pool.install(|| {
        study
            .steps
            .par_iter()
            .map(|&n| match resolution.finest_error {
                Some(e) if n == finest => Ok(e),
                _ => study_error(study, problem, n, resolution.intervals),
            })
            .collect::<subdiff_core::Result<Vec<f64>>>()
    })?;
    Ok(assemble_report(study, &resolution, &errors)?)
}

pub fn study_from_config(cfg: &RunConfig) -> ConvergenceStudy {
    ConvergenceStudy {
        scheme: cfg.scheme.into(),
        alpha: cfg.alpha,
        sigma: cfg.sigma,
        gamma: cfg.gamma.value(),
        t_final: cfg.t_final,
        graded_span: cfg.graded_span,
        steps: cfg.steps.clone(),
        guard: SpatialGuard {
            initial: cfg.intervals,
            max: cfg.guard.max_intervals,
            tolerance: cfg.guard.tolerance,
            enabled: cfg.guard.enabled,
        },
        spatial: cfg.spatial.into(),
    }
}

pub fn convergence(cfg: &RunConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let problem = example_problem(cfg.example, cfg.alpha, cfg.sigma)?;
    let pool = build_pool(cfg.threads)?;
    run_study(&study_from_config(cfg), &problem, &pool)
}

fn guard_line(report: &ConvergenceReport) -> String {
    let mode = match report.spatial {
        SpatialErrorMode::Direct => "direct",
        SpatialErrorMode::Extrapolated => "extrapolated",
    };
    match report.guard {
        Some(g) => format!(
            "spatial error: {mode}; guard at M = {}: relative change {} ({})",
            g.intervals,
            sci3(g.relative_change),
            if g.passed { "passed" } else { "NOT met" }
        ),
        None => format!("spatial error: {mode}; guard disabled"),
    }
}

pub fn convergence_markdown(report: &ConvergenceReport) -> String {
    let mut md = Markdown::new(["N", "M", "e(M,N)", "Order"]);
    for r in &report.rows {
        md.row([r.steps.to_string(), r.intervals.to_string(), sci3(r.error), order2(r.order)]);
    }
    format!(
        "{} scheme, alpha = {}, sigma = {}, gamma = {}\n\n{}\npredicted order: {:.2}\n{}\n",
        report.scheme.name(),
        report.alpha,
        report.sigma,
        report.gamma,
        md.render(),
        report.predicted_order,
        guard_line(report)
    )
}

pub fn convergence_csv<W: Write>(report: &ConvergenceReport, out: W) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.steps.to_string(),
                r.intervals.to_string(),
                sci17(r.error),
                r.order.map(sci17).unwrap_or_default(),
                sci17(report.predicted_order),
            ]
        })
        .collect();
    write_csv(out, &["N", "M", "error", "order", "predicted_order"], &rows)
}

/// Options shared by every reproduction run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub intervals: usize,
    pub guard: SpatialGuard,
    pub spatial: SpatialErrorMode,
    /// Replaces the preset step counts (for quick looks).
    pub steps: Option<Vec<usize>>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            intervals: 2048,
            guard: SpatialGuard::default(),
            spatial: SpatialErrorMode::Extrapolated,
            steps: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ColumnResult {
    pub preset: ColumnPreset,
    pub report: ConvergenceReport,
    pub elapsed: Duration,
}

impl ColumnResult {
    /// Reproduced and printed order for each consecutive pair.
    pub fn order_pairs(&self) -> Vec<(f64, f64)> {
        self.report.orders().into_iter().zip(self.preset.paper_orders.iter().copied()).collect()
    }

    /// Reproduced error divided by the printed error, per row.
    pub fn error_ratios(&self) -> Vec<f64> {
        self.report.rows.iter().zip(self.preset.paper_errors).map(|(r, p)| r.error / p).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TableResult {
    pub preset: TablePreset,
    pub columns: Vec<ColumnResult>,
    pub elapsed: Duration,
}

pub fn column_study(table: &TablePreset, column: &ColumnPreset, opts: &ReproduceOptions) -> ConvergenceStudy {
    ConvergenceStudy {
        scheme: table.scheme,
        alpha: column.alpha,
        sigma: column.sigma,
        gamma: column.gamma,
        t_final: 1.0,
        graded_span: None,
        steps: opts.steps.clone().unwrap_or_else(|| table.steps.to_vec()),
        guard: SpatialGuard {
            initial: opts.intervals,
            ..opts.guard
        },
        spatial: opts.spatial,
    }
}

pub fn reproduce_column(table: &TablePreset, column: &ColumnPreset, opts: &ReproduceOptions, pool: &rayon::ThreadPool) -> Result<ColumnResult> {
    let start = Instant::now();
    let problem = example_problem(table.example, column.alpha, column.sigma)?;
    let report = run_study(&column_study(table, column, opts), &problem, pool)
        .with_context(|| format!("table {} column {}", table.id, column.label))?;
    Ok(ColumnResult {
        preset: column.clone(),
        report,
        elapsed: start.elapsed(),
    })
}

pub fn reproduce_table(table: &TablePreset, opts: &ReproduceOptions, pool: &rayon::ThreadPool) -> Result<TableResult> {
    let start = Instant::now();
    let columns = pool.install(|| {
        table
            .columns
            .par_iter()
            .map(|c| reproduce_column(table, c, opts, pool))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(TableResult {
        preset: table.clone(),
        columns,
        elapsed: start.elapsed(),
    })
}

fn paper_at(values: &[f64], i: usize) -> Option<f64> {
    values.get(i).copied()
}

pub fn table_markdown(result: &TableResult) -> String {
    let mut out = format!("Table {}: {}\n", result.preset.id, result.preset.title);
    for c in &result.columns {
        let mut md = Markdown::new(["N", "e(M,N)", "Order", "paper e", "paper Order", "|dOrder|", "e/paper e"]);
        for (i, r) in c.report.rows.iter().enumerate() {
            let paper_e = paper_at(c.preset.paper_errors, i);
            let paper_o = paper_at(c.preset.paper_orders, i);
            let delta = r.order.zip(paper_o).map(|(a, b)| format!("{:.2}", (a - b).abs())).unwrap_or_else(|| "*".into());
            md.row([
                r.steps.to_string(),
                sci3(r.error),
                order2(r.order),
                paper_e.map(sci3).unwrap_or_else(|| "-".into()),
                order2(paper_o),
                delta,
                paper_e.map(|p| format!("{:.2}", r.error / p)).unwrap_or_else(|| "-".into()),
            ]);
        }
        out.push_str(&format!(
            "\n{} (predicted order {:.2})\n\n{}{}\n",
            c.preset.label,
            c.report.predicted_order,
            md.render(),
            guard_line(&c.report)
        ));
    }
    out
}

pub fn table_csv<W: Write>(result: &TableResult, out: W) -> Result<()> {
    let mut rows = Vec::new();
    for c in &result.columns {
        for (i, r) in c.report.rows.iter().enumerate() {
            rows.push(vec![
                c.preset.label.to_string(),
                sci17(c.preset.alpha),
                sci17(c.preset.sigma),
                sci17(c.preset.gamma),
                r.steps.to_string(),
                r.intervals.to_string(),
                sci17(r.error),
                r.order.map(sci17).unwrap_or_default(),
                paper_at(c.preset.paper_errors, i).map(sci17).unwrap_or_default(),
                paper_at(c.preset.paper_orders, i).map(sci17).unwrap_or_default(),
            ]);
        }
    }
    write_csv(
        out,
        &["column", "alpha", "sigma", "gamma", "N", "M", "error", "order", "paper_error", "paper_order"],
        &rows,
    )
}

#[derive(Debug, Clone)]
pub struct SpatialRow {
    pub intervals: usize,
    pub error: f64,
    pub order: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SpatialResult {
    pub preset: SpatialPreset,
    pub rows: Vec<SpatialRow>,
    pub elapsed: Duration,
}

/// Spatial order study at fixed `N`; errors are measured directly.
pub fn reproduce_spatial(p: &SpatialPreset, pool: &rayon::ThreadPool) -> Result<SpatialResult> {
    let start = Instant::now();
    let problem = example_problem(p.example, p.alpha, p.sigma)?;
    let config = SchemeConfig::new(p.scheme, p.alpha)?.with_history(subdiff_core::solver::HistoryMode::Recompute);
    let mesh = build_graded_mesh(p.gamma, p.steps, 1.0, None)?;
    let errors = pool.install(|| {
        p.intervals
            .par_iter()
            .map(|&m| {
                let grid = build_grid(problem.xl, problem.xr, m)?;
                Ok(measure(SpatialErrorMode::Direct, &config, &problem, &mesh, &grid)?.max)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let orders = convergence_orders(p.intervals, &errors)?;
    let rows = p
        .intervals
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(i, (&m, &e))| SpatialRow {
            intervals: m,
            error: e,
            order: orders.get(i).copied(),
        })
        .collect();
    Ok(SpatialResult {
        preset: p.clone(),
        rows,
        elapsed: start.elapsed(),
    })
}

pub fn spatial_markdown(result: &SpatialResult) -> String {
    let mut md = Markdown::new(["M", "e(M,N)", "Order (h)"]);
    for r in &result.rows {
        md.row([r.intervals.to_string(), sci3(r.error), order2(r.order)]);
    }
    format!(
        "Table {}: {}\n\n{}expected order: {:.2}\n",
        result.preset.id,
        result.preset.title,
        md.render(),
        result.preset.expected_order
    )
}

pub fn spatial_csv<W: Write>(result: &SpatialResult, out: W) -> Result<()> {
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| vec![r.intervals.to_string(), sci17(r.error), r.order.map(sci17).unwrap_or_default()])
        .collect();
    write_csv(out, &["M", "error", "order"], &rows)
}

/// How a time mesh is specified on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Graded { gamma: f64, steps: usize, t_final: f64, span: Option<f64> },
    Uniform { steps: usize, t_final: f64 },
    Random { steps: usize, rho: f64, seed: u64, t_final: f64 },
    Custom(Vec<f64>),
}

impl MeshSpec {
    pub fn build(&self) -> Result<TimeMesh> {
        Ok(match self {
            MeshSpec::Graded { gamma, steps, t_final, span } => build_graded_mesh(*gamma, *steps, *t_final, *span)?,
            MeshSpec::Uniform { steps, t_final } => build_uniform_mesh(*steps, *t_final)?,
            MeshSpec::Random { steps, rho, seed, t_final } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                random_mesh(&mut rng, *steps, *rho, *t_final)?
            }
            MeshSpec::Custom(times) => build_custom_mesh(times)?,
        })
    }

    /// Grading exponent used by the mesh diagnostics.
    pub fn gamma(&self) -> f64 {
        match self {
            MeshSpec::Graded { gamma, .. } => *gamma,
            _ => 1.0,
        }
    }
}

/// Reads a custom mesh: one time per line or comma separated, starting at 0.
pub fn read_times(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad time '{s}'")))
        .collect()
}

#[derive(Debug, Clone)]
pub struct KernelDiagnostics {
    pub scheme: Scheme,
    pub alpha: f64,
    pub steps: usize,
    pub max_ratio: f64,
    pub assumptions: AssumptionReport,
    pub identity_deviation: f64,
    /// Margins of the complementary-kernel bound for exponents 0 and 1.
    pub p_bound_margins: [f64; 2],
}

pub fn kernel_diagnostics(table: &KernelTable, mesh: &TimeMesh) -> Result<KernelDiagnostics> {
    let assumptions = verify_kernel_assumptions(table, mesh)?;
    let p = complementary_rows(table.rows())?;
    let identity_deviation = verify_complementary_identity(&p, table.rows())?;
    let pi_a = table.scheme().pi_a();
    let p_bound_margins = [
        verify_p_bound(&p, mesh, table.alpha(), 0, pi_a)?,
        verify_p_bound(&p, mesh, table.alpha(), 1, pi_a)?,
    ];
    Ok(KernelDiagnostics {
        scheme: table.scheme(),
        alpha: table.alpha(),
        steps: mesh.len(),
        max_ratio: mesh.max_ratio(),
        assumptions,
        identity_deviation,
        p_bound_margins,
    })
}

fn ok_flag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

pub fn kernel_text(d: &KernelDiagnostics) -> String {
    let a = &d.assumptions;
    let mut s = format!(
        "scheme: {}\nalpha: {}\nN: {}\nmax step ratio: {}\n",
        d.scheme.name(),
        d.alpha,
        d.steps,
        sci3(d.max_ratio)
    );
    s += &format!("monotone kernels: {} (margin {})\n", ok_flag(a.monotone_ok), sci3(a.monotone_margin));
    s += &format!("first coefficient condition: {} (margin {})\n", ok_flag(a.first_coef_ok), sci3(a.first_coef_margin));
    s += &format!("empirical pi_A: {:.6} (bound {})\n", a.pi_a, d.scheme.pi_a());
    if let Some(m) = a.l1_difference_margin {
        s += &format!("L1 difference bound: {} (margin {})\n", ok_flag(m > 0.0), sci3(m));
    }
    if let Some(m) = a.alikhanov {
        s += &format!(
            "Alikhanov conditions: {} (difference {}, positivity {}, first pair {}, upper {}, lower {})\n",
            ok_flag(m.all_positive()),
            sci3(m.difference_lower),
            sci3(m.difference_lower_positive),
            sci3(m.first_pair),
            sci3(m.upper),
            sci3(m.lower)
        );
    }
    if let Some((n, k, what)) = a.worst_location {
        s += &format!("tightest check: {what} at n = {n}, k = {k}\n");
    }
    s += &format!("assumptions overall: {}\n", ok_flag(a.passes()));
    s += &format!("complementary identity deviation: {}\n", sci3(d.identity_deviation));
    s += &format!(
        "complementary bound margins (m = 0, 1): {}, {}\n",
        sci3(d.p_bound_margins[0]),
        sci3(d.p_bound_margins[1])
    );
    s
}

pub fn kernel_row_csv<W: Write>(table: &KernelTable, n: usize, out: W) -> Result<()> {
    if n == 0 || n > table.len() {
        bail!("row {n} is outside 1..={}", table.len());
    }
    let row = table.row(n);
    let rows: Vec<Vec<String>> = row.coeffs.iter().enumerate().map(|(j, c)| vec![j.to_string(), sci17(*c)]).collect();
    write_csv(out, &["j", "coefficient"], &rows)
}

pub fn mesh_csv<W: Write>(mesh: &TimeMesh, out: W) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..=mesh.len())
        .map(|k| {
            vec![
                k.to_string(),
                sci17(mesh.t(k)),
                if k >= 1 { sci17(mesh.tau(k)) } else { String::new() },
                if k >= 1 && k < mesh.len() { sci17(mesh.rho(k)) } else { String::new() },
            ]
        })
        .collect();
    write_csv(out, &["k", "t", "tau", "rho"], &rows)
}

pub fn mesh_text(mesh: &TimeMesh, report: &MeshReport) -> String {
    format!(
        "N: {}\nT: {}\ntau_max: {}\nmax ratio: {} (bound {}, {})\nstep constant: {}\ntime ratio constant: {}\nrelative step constant: {}\ntau_1 order: {}\n",
        mesh.len(),
        mesh.final_time(),
        sci3(mesh.tau_max()),
        sci3(report.rho_max),
        report.rho_bound,
        ok_flag(report.ratio_ok),
        sci3(report.step_constant),
        sci3(report.time_ratio_constant),
        sci3(report.relative_step_constant),
        report.tau1_order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into())
    )
}

pub fn mesh_report(spec: &MeshSpec, rho_bound: f64) -> Result<(TimeMesh, MeshReport)> {
    let mesh = spec.build()?;
    let report = mesh_diagnostics(&mesh, spec.gamma(), rho_bound);
    Ok((mesh, report))
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub grid: SpaceGrid,
    pub final_time: f64,
    pub final_level: Vec<f64>,
    pub exact_final: Vec<f64>,
    pub max_error: f64,
    pub final_error: f64,
    pub restriction: StepRestriction,
}

pub fn solve_example(scheme: Scheme, example: u8, alpha: f64, sigma: f64, mesh: &TimeMesh, intervals: usize) -> Result<SolveOutcome> {
    let problem = example_problem(example, alpha, sigma)?;
    let grid = build_grid(problem.xl, problem.xr, intervals)?;
    let config = SchemeConfig::new(scheme, alpha)?;
    let history = solve(&config, &problem, mesh, &grid)?;
    let trace = h1_error(&history, &problem, &grid)?;
    let exact = &problem.exact()?.u;
    let t = mesh.final_time();
    let op = Operator::new(&grid, &problem.mu, &problem.c)?;
    let restriction = check_step_restriction(mesh, scheme, alpha, op.kappa(), op.embedding_constant(&grid))?;
    Ok(SolveOutcome {
        grid,
        final_time: t,
        final_level: history.last().to_vec(),
        exact_final: grid.sample(|x| exact(x, t)),
        max_error: trace.max,
        final_error: *trace.per_level.last().expect("at least one level"),
        restriction,
    })
}

pub fn solution_csv<W: Write>(s: &SolveOutcome, out: W) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..s.grid.node_len())
        .map(|i| {
            vec![
                sci17(s.grid.x(i)),
                sci17(s.final_level[i]),
                sci17(s.exact_final[i]),
                sci17(s.final_level[i] - s.exact_final[i]),
            ]
        })
        .collect();
    write_csv(out, &["x", "u", "exact", "difference"], &rows)
}

#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub kappa: f64,
    pub c_omega: f64,
    pub pi_a: f64,
    pub rho: f64,
    pub stability_threshold: f64,
    pub restriction: StepRestriction,
    /// `max_n |u^n|_1` of the computed solution.
    pub solution_h1_max: f64,
    /// Stability bound on `|u^n|_1` at `t_N`.
    pub stability_h1_final: f64,
    /// Whether `|u^n|_1` stays below the bound at every step.
    pub stability_holds: bool,
}

/// Evaluates the stability theory for an example on a given mesh.
pub fn bounds(scheme: Scheme, example: u8, alpha: f64, sigma: f64, mesh: &TimeMesh, intervals: usize) -> Result<BoundsReport> {
    let problem = example_problem(example, alpha, sigma)?;
    let grid = build_grid(problem.xl, problem.xr, intervals)?;
    let op = Operator::new(&grid, &problem.mu, &problem.c)?;
    let kappa = op.kappa();
    let c_omega = op.embedding_constant(&grid);
    let pi_a = scheme.pi_a();
    let rho = mesh.max_ratio();
    let threshold = stability_threshold(alpha, kappa, c_omega, pi_a)?;
    let restriction = check_step_restriction(mesh, scheme, alpha, kappa, c_omega)?;
    let config = SchemeConfig::new(scheme, alpha)?;
    let history = solve(&config, &problem, mesh, &grid)?;
    let table = KernelTable::build(mesh, scheme, alpha)?;
    let nu = table.nu();
    let interior = |v: Vec<f64>| v[1..v.len() - 1].to_vec();
    let forcing: Vec<f64> = (1..=mesh.len())
        .map(|n| {
            let t = mesh.offset_time(n, nu);
            l2_norm(&grid, &interior(grid.sample(|x| (problem.f)(x, t))))
        })
        .collect::<subdiff_core::Result<_>>()?;
    let initial_h1 = op.h1_seminorm(&grid, history.initial())?;
    let input = StabilityInput {
        initial_h1,
        forcing_norms: &forcing,
        alpha,
        kappa,
        c_omega,
        rho,
        pi_a,
    };
    let bound = stability_bound(&input, table.rows(), mesh)?;
    let mut holds = true;
    let mut solution_h1_max: f64 = 0.0;
    for n in 1..=mesh.len() {
        let h1 = op.h1_seminorm(&grid, &history.level(n)?)?;
        solution_h1_max = solution_h1_max.max(h1);
        holds &= h1 <= bound.h1[n - 1];
    }
    Ok(BoundsReport {
        kappa,
        c_omega,
        pi_a,
        rho,
        stability_threshold: threshold,
        restriction,
        solution_h1_max,
        stability_h1_final: *bound.h1.last().expect("nonempty mesh"),
        stability_holds: holds,
    })
}

pub fn bounds_text(b: &BoundsReport) -> String {
    format!(
        "kappa: {}\nC_Omega: {}\npi_A: {}\nmax step ratio: {}\nstability step threshold: {}\nconvergence step restriction: {} (tau_max {}, {})\nmax |u^n|_1: {}\nstability bound at t_N: {}\nstability bound respected: {}\n",
        sci3(b.kappa),
        sci3(b.c_omega),
        b.pi_a,
        sci3(b.rho),
        sci3(b.stability_threshold),
        sci3(b.restriction.threshold),
        sci3(b.restriction.tau_max),
        if b.restriction.satisfied { "satisfied" } else { "violated" },
        sci3(b.solution_h1_max),
        sci3(b.stability_h1_final),
        ok_flag(b.stability_holds)
    )
}
