//! The weighted time-stepping scheme
//! `(D u)^(n-nu) + L_h u^(n-nu) = c u^(n-nu) + f(t_(n-nu))`,
//! `u^(n-nu) = nu u^(n-1) + (1 - nu) u^n`, with `nu = 0` (L1) or
//! `nu = alpha/2` (fractional Crank-Nicolson).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{check_alpha, KernelBuilder, KernelRow, Scheme};
use crate::mesh::TimeMesh;
use crate::problems::ProblemSpec;
use crate::spatial::{assemble_weighted_system, solve_tridiagonal_into, Operator, SpaceGrid, TridiagonalSystem};
use crate::special::gamma;

/// How a solve keeps its levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryMode {
    /// Every level `u^0 .. u^N` is stored.
    #[default]
    Full,
    /// Only `u^0`, the last level and the interior differences (which the
    /// nonlocal sum needs anyway) are stored; intermediate levels are
    /// recomputed from the differences on request.
    Recompute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub alpha: f64,
    pub history: HistoryMode,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            scheme,
            alpha,
            history: HistoryMode::Full,
        })
    }

    pub fn with_history(mut self, history: HistoryMode) -> Self {
        self.history = history;
        self
    }

    /// Offset `nu`: 0 for L1, `alpha/2` for fractional Crank-Nicolson.
    pub fn nu(&self) -> f64 {
        self.scheme.offset(self.alpha)
    }
}

/// Result of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionHistory {
    grid: SpaceGrid,
    times: Vec<f64>,
    u0: Vec<f64>,
    /// `u^k - u^(k-1)` on interior nodes, level-major.
    diffs: Vec<f64>,
    /// `(u^n_0, u^n_M)` for every level.
    boundary: Vec<[f64; 2]>,
    levels: Option<Vec<Vec<f64>>>,
    last: Vec<f64>,
}

impl SolutionHistory {
    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.times.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// All node vectors `u^0 .. u^N` when stored in full.
    pub fn levels(&self) -> Option<&[Vec<f64>]> {
        self.levels.as_deref()
    }

    /// Node vector `u^n`, rebuilt from the differences if necessary.
    pub fn level(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.len() {
            return Err(Error::IndexOutOfRange { index: n, len: self.len() });
        }
        if let Some(levels) = &self.levels {
            return Ok(levels[n].clone());
        }
        if n == self.len() {
            return Ok(self.last.clone());
        }
        let mi = self.grid.interior_len();
        let mut u = self.u0.clone();
        for k in 1..=n {
            let d = &self.diffs[(k - 1) * mi..k * mi];
            for (ui, di) in u[1..=mi].iter_mut().zip(d) {
                *ui += di;
            }
        }
        u[0] = self.boundary[n][0];
        u[mi + 1] = self.boundary[n][1];
        Ok(u)
    }

    pub fn initial(&self) -> &[f64] {
        &self.u0
    }

    pub fn last(&self) -> &[f64] {
        &self.last
    }

    /// Interior differences `u^k - u^(k-1)`, `1 <= k <= N`.
    pub fn diff(&self, k: usize) -> &[f64] {
        let mi = self.grid.interior_len();
        &self.diffs[(k - 1) * mi..k * mi]
    }
}

/// Step-size restriction of the convergence theorems,
/// `tau <= 1 / (factor Gamma(2-alpha) kappa^2 C)^(1/alpha)` with factor 2 for
/// L1 and 6 for fractional Crank-Nicolson.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRestriction {
    pub threshold: f64,
    pub tau_max: f64,
    pub satisfied: bool,
}

fn restriction_threshold(factor: f64, alpha: f64, kappa: f64, c_omega: f64) -> Result<f64> {
    let prod = factor * gamma(2.0 - alpha)? * kappa * kappa * c_omega;
    if prod <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(libm::pow(prod, -1.0 / alpha))
}

pub fn check_step_restriction(mesh: &TimeMesh, scheme: Scheme, alpha: f64, kappa: f64, c_omega: f64) -> Result<StepRestriction> {
    check_alpha(alpha)?;
    let factor = match scheme {
        Scheme::L1 => 2.0,
        Scheme::FracCn => 6.0,
    };
    let threshold = restriction_threshold(factor, alpha, kappa, c_omega)?;
    let tau_max = mesh.tau_max();
    Ok(StepRestriction {
        threshold,
        tau_max,
        satisfied: tau_max <= threshold,
    })
}

/// Step-size restriction of the `H^1` stability estimate,
/// `tau <= 1 / (4 pi_A Gamma(2-alpha) kappa^2 C)^(1/alpha)`.
pub fn stability_threshold(alpha: f64, kappa: f64, c_omega: f64, pi_a: f64) -> Result<f64> {
    check_alpha(alpha)?;
    restriction_threshold(4.0 * pi_a, alpha, kappa, c_omega)
}

/// Reusable buffers for one step.
#[derive(Debug, Clone)]
struct Workspace {
    hist: Vec<f64>,
    cp: Vec<f64>,
    x: Vec<f64>,
}

impl Workspace {
    fn new(mi: usize) -> Self {
        Self {
            hist: vec![0.0; mi],
            cp: vec![0.0; mi],
            x: vec![0.0; mi],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn advance(
    problem: &ProblemSpec,
    grid: &SpaceGrid,
    op: &Operator,
    mesh: &TimeMesh,
    row: &KernelRow,
    diffs: &[f64],
    prev: &[f64],
    ws: &mut Workspace,
    out: &mut [f64],
) -> Result<()> {
    let n = row.n;
    let nu = row.nu;
    let mi = grid.interior_len();
    if prev.len() != mi + 2 || out.len() != mi + 2 {
        return Err(Error::ShapeMismatch {
            expected: mi + 2,
            found: prev.len(),
        });
    }
    if diffs.len() != (n - 1) * mi || row.coeffs.len() != n || n > mesh.len() {
        return Err(Error::ShapeMismatch {
            expected: (n - 1) * mi,
            found: diffs.len(),
        });
    }
    let a0 = row.a0();
    if !(a0 > 0.0) {
        return Err(Error::CorruptKernel { n });
    }

    // sum_(k<n) A_(n-k) (u^k - u^(k-1)), k outer so the inner loop streams memory
    let hist = &mut ws.hist;
    hist.iter_mut().for_each(|v| *v = 0.0);
    let mut k = 1;
    while k + 3 < n {
        let (a1, a2, a3, a4) = (row.get(n - k), row.get(n - k - 1), row.get(n - k - 2), row.get(n - k - 3));
        let block = &diffs[(k - 1) * mi..(k + 3) * mi];
        let (d1, rest) = block.split_at(mi);
        let (d2, rest) = rest.split_at(mi);
        let (d3, d4) = rest.split_at(mi);
        for i in 0..mi {
            hist[i] += a1 * d1[i] + a2 * d2[i] + a3 * d3[i] + a4 * d4[i];
        }
        k += 4;
    }
    for k in k..n {
        let a = row.get(n - k);
        let d = &diffs[(k - 1) * mi..k * mi];
        for (h, di) in hist.iter_mut().zip(d) {
            *h += a * di;
        }
    }

    // Unknown is the offset level z = (1 - nu) u^n + nu u^(n-1); with
    // u^n - u^(n-1) = (z - u^(n-1)) / (1 - nu) the step reads
    // (a0 I + (1 - nu)(L_h - c)) z = (1 - nu)(f - hist) + a0 u^(n-1),
    // so L_h is never applied to known data and rounding is not amplified by 1/h^2.
    let mut sys: TridiagonalSystem = assemble_weighted_system(op, a0, nu)?;
    let t_off = mesh.offset_time(n, nu);
    let keep = 1.0 - nu;
    for r in 0..mi {
        let i = r + 1;
        sys.rhs[r] = keep * ((problem.f)(grid.x(i), t_off) - hist[r]) + a0 * prev[i];
    }
    let t_n = mesh.t(n);
    let left = (problem.ub_left)(t_n);
    let right = (problem.ub_right)(t_n);
    let w = keep / (grid.h() * grid.h());
    let mu = op.mu_half();
    sys.rhs[0] += w * mu[0] * (keep * left + nu * prev[0]);
    sys.rhs[mi - 1] += w * mu[mi] * (keep * right + nu * prev[mi + 1]);

    solve_tridiagonal_into(&sys, &mut ws.cp, &mut ws.x)?;
    out[0] = left;
    out[mi + 1] = right;
    for r in 0..mi {
        out[r + 1] = prev[r + 1] + (ws.x[r] - prev[r + 1]) / keep;
    }
    Ok(())
}

/// One step of the scheme: given `u^(n-1)` (all nodes), the interior
/// differences of levels `1..n-1` (level-major) and kernel row `n`, returns `u^n`.
pub fn step(
    problem: &ProblemSpec,
    grid: &SpaceGrid,
    op: &Operator,
    mesh: &TimeMesh,
    row: &KernelRow,
    diffs: &[f64],
    prev: &[f64],
) -> Result<Vec<f64>> {
    let mut ws = Workspace::new(grid.interior_len());
    let mut out = vec![0.0; grid.node_len()];
    advance(problem, grid, op, mesh, row, diffs, prev, &mut ws, &mut out)?;
    Ok(out)
}

/// Incremental solver state; each call to [`Stepper::advance`] produces the next level.
pub struct Stepper<'a> {
    problem: &'a ProblemSpec,
    mesh: &'a TimeMesh,
    grid: SpaceGrid,
    op: Operator,
    builder: KernelBuilder<'a>,
    n: usize,
    current: Vec<f64>,
    next: Vec<f64>,
    diffs: Vec<f64>,
    ws: Workspace,
}

impl<'a> Stepper<'a> {
    pub fn new(config: &SchemeConfig, problem: &'a ProblemSpec, mesh: &'a TimeMesh, grid: &SpaceGrid) -> Result<Self> {
        if config.alpha != problem.alpha {
            return Err(Error::Domain {
                what: "scheme order differs from the problem order",
                value: config.alpha,
            });
        }
        let op = Operator::new(grid, &problem.mu, &problem.c)?;
        let mut current = grid.sample(&problem.u0);
        current[0] = (problem.ub_left)(0.0);
        current[grid.intervals()] = (problem.ub_right)(0.0);
        let mi = grid.interior_len();
        Ok(Self {
            problem,
            mesh,
            grid: *grid,
            op,
            builder: KernelBuilder::new(mesh, config.scheme, config.alpha)?,
            n: 0,
            next: vec![0.0; current.len()],
            current,
            diffs: Vec::with_capacity(mesh.len() * mi),
            ws: Workspace::new(mi),
        })
    }

    /// Index of the current level.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn diffs(&self) -> &[f64] {
        &self.diffs
    }

    pub fn is_done(&self) -> bool {
        self.n >= self.mesh.len()
    }

    /// Advances to level `n + 1` and returns it.
    pub fn advance(&mut self) -> Result<&[f64]> {
        if self.is_done() {
            return Err(Error::IndexOutOfRange {
                index: self.n + 1,
                len: self.mesh.len(),
            });
        }
        let row = self.builder.row(self.n + 1)?;
        self.advance_with_row(&row)
    }

    /// Advances with a caller-supplied kernel row for step `n + 1`.
    pub fn advance_with_row(&mut self, row: &KernelRow) -> Result<&[f64]> {
        if row.n != self.n + 1 {
            return Err(Error::IndexOutOfRange {
                index: row.n,
                len: self.mesh.len(),
            });
        }
        advance(
            self.problem,
            &self.grid,
            &self.op,
            self.mesh,
            row,
            &self.diffs,
            &self.current,
            &mut self.ws,
            &mut self.next,
        )?;
        let mi = self.grid.interior_len();
        self.diffs.extend((1..=mi).map(|i| self.next[i] - self.current[i]));
        core::mem::swap(&mut self.current, &mut self.next);
        self.n += 1;
        Ok(&self.current)
    }
}

/// Runs all `N` steps. The observer sees every level `(n, t_n, u^n)`,
/// including `n = 0`, as soon as it is computed.
pub fn solve_with<F>(config: &SchemeConfig, problem: &ProblemSpec, mesh: &TimeMesh, grid: &SpaceGrid, mut observer: F) -> Result<SolutionHistory>
where
    F: FnMut(usize, f64, &[f64]),
{
    let mut stepper = Stepper::new(config, problem, mesh, grid)?;
    let kappa = stepper.op.kappa();
    let c_omega = stepper.op.embedding_constant(grid);
    let restriction = check_step_restriction(mesh, config.scheme, config.alpha, kappa, c_omega)?;
    if !restriction.satisfied {
        log::warn!(
            "maximum step {:e} exceeds the step restriction {:e}; the error estimate is not guaranteed",
            restriction.tau_max,
            restriction.threshold
        );
    }
    let u0 = stepper.current.clone();
    observer(0, 0.0, &u0);
    let full = config.history == HistoryMode::Full;
    let mut levels = if full {
        let mut v = Vec::with_capacity(mesh.len() + 1);
        v.push(u0.clone());
        Some(v)
    } else {
        None
    };
    let mut boundary = Vec::with_capacity(mesh.len() + 1);
    boundary.push([u0[0], u0[grid.intervals()]]);
    while !stepper.is_done() {
        let n = stepper.n + 1;
        let u = stepper.advance()?;
        observer(n, mesh.t(n), u);
        boundary.push([u[0], u[u.len() - 1]]);
        if let Some(levels) = levels.as_mut() {
            levels.push(u.to_vec());
        }
    }
    Ok(SolutionHistory {
        grid: *grid,
        times: mesh.times().to_vec(),
        u0,
        last: stepper.current,
        diffs: stepper.diffs,
        boundary,
        levels,
    })
}

pub fn solve(config: &SchemeConfig, problem: &ProblemSpec, mesh: &TimeMesh, grid: &SpaceGrid) -> Result<SolutionHistory> {
    solve_with(config, problem, mesh, grid, |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_row, KernelTable};
    use crate::mesh::{build_graded_mesh, build_uniform_mesh};
    use crate::problems::{example1, example2, homogeneous_problem, CustomProblem, custom_problem};
    use crate::spatial::build_grid;
    use crate::testing::assert_rel;
    use alloc::boxed::Box;
    use core::f64::consts::PI;

    fn zero_problem(alpha: f64) -> ProblemSpec {
        homogeneous_problem(0.0, PI, alpha, Box::new(|_| 1.0), Box::new(|x| 2.0 * libm::sin(x) + 1.0), Box::new(|_| 0.0)).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = zero_problem(0.5);
        let mesh = build_graded_mesh(2.0, 16, 1.0, None).unwrap();
        let grid = build_grid(0.0, PI, 16).unwrap();
        for scheme in [Scheme::L1, Scheme::FracCn] {
            let cfg = SchemeConfig::new(scheme, 0.5).unwrap();
            let h = solve(&cfg, &p, &mesh, &grid).unwrap();
            assert!(h.levels().unwrap().iter().all(|l| l.iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn single_interior_node_by_hand() {
        // M = 2, h = pi/2, mu = 1, c = 0, f = 1, u0 = 0: (A0 + 2/h^2) u = 1
        let p = custom_problem(CustomProblem {
            xl: 0.0,
            xr: PI,
            alpha: 0.5,
            sigma: None,
            mu: Box::new(|_| 1.0),
            c: Box::new(|_| 0.0),
            f: Box::new(|_, _| 1.0),
            u0: Box::new(|_| 0.0),
            ub_left: Box::new(|_| 0.0),
            ub_right: Box::new(|_| 0.0),
            exact: None,
        })
        .unwrap();
        let mesh = build_uniform_mesh(1, 0.25).unwrap();
        let grid = build_grid(0.0, PI, 2).unwrap();
        let cfg = SchemeConfig::new(Scheme::L1, 0.5).unwrap();
        let h = solve(&cfg, &p, &mesh, &grid).unwrap();
        let a0 = libm::pow(0.25, -0.5) / libm::tgamma(1.5);
        let hh = PI / 2.0;
        let want = 1.0 / (a0 + 2.0 / (hh * hh));
        assert_rel(h.last()[1], want, 1e-15);
    }

    #[test]
    fn stepped_equation_residual_vanishes() {
        let p = example1(0.5, 1.5).unwrap();
        let mesh = build_graded_mesh(1.0, 8, 1.0, None).unwrap();
        let grid = build_grid(0.0, PI, 16).unwrap();
        for scheme in [Scheme::L1, Scheme::FracCn] {
            let cfg = SchemeConfig::new(scheme, 0.5).unwrap();
            let h = solve(&cfg, &p, &mesh, &grid).unwrap();
            let op = Operator::new(&grid, &p.mu, &p.c).unwrap();
            let table = KernelTable::build(&mesh, scheme, 0.5).unwrap();
            let nu = cfg.nu();
            let levels = h.levels().unwrap();
            for n in 1..=mesh.len() {
                let row = table.row(n);
                let lu_n = op.apply(&levels[n]).unwrap();
                let lu_p = op.apply(&levels[n - 1]).unwrap();
                let t = mesh.offset_time(n, nu);
                for i in 1..grid.intervals() {
                    let dc: f64 = (1..=n).map(|k| row.get(n - k) * (levels[k][i] - levels[k - 1][i])).sum();
                    let w = |a: f64, b: f64| nu * a + (1.0 - nu) * b;
                    let c = (p.c)(grid.x(i));
                    let res = dc + w(lu_p[i - 1], lu_n[i - 1]) - c * w(levels[n - 1][i], levels[n][i]) - (p.f)(grid.x(i), t);
                    assert!(res.abs() < 1e-11, "{scheme:?} n={n} i={i}: {res}");
                }
            }
        }
    }

    #[test]
    fn nonzero_dirichlet_data_reach_the_boundary() {
        let p = custom_problem(CustomProblem {
            xl: 0.0,
            xr: 1.0,
            alpha: 0.5,
            sigma: None,
            mu: Box::new(|_| 1.0),
            c: Box::new(|_| 0.0),
            f: Box::new(|_, _| 0.0),
            u0: Box::new(|x| x),
            ub_left: Box::new(|_| 0.0),
            ub_right: Box::new(|_| 1.0),
            exact: Some(crate::problems::ExactSolution {
                u: Box::new(|x, _| x),
                caputo: Box::new(|_, _| 0.0),
                lu: Some(Box::new(|_, _| 0.0)),
            }),
        })
        .unwrap();
        let mesh = build_uniform_mesh(5, 1.0).unwrap();
        let grid = build_grid(0.0, 1.0, 8).unwrap();
        for scheme in [Scheme::L1, Scheme::FracCn] {
            let h = solve(&SchemeConfig::new(scheme, 0.5).unwrap(), &p, &mesh, &grid).unwrap();
            for (i, v) in h.last().iter().enumerate() {
                assert!((v - grid.x(i)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn recompute_mode_reproduces_levels() {
        let p = example2(0.4, 1.4).unwrap();
        let mesh = build_graded_mesh(1.5, 12, 1.0, None).unwrap();
        let grid = build_grid(0.0, PI, 20).unwrap();
        let cfg = SchemeConfig::new(Scheme::FracCn, 0.4).unwrap();
        let full = solve(&cfg, &p, &mesh, &grid).unwrap();
        let mut seen = Vec::new();
        let lean = solve_with(&cfg.with_history(HistoryMode::Recompute), &p, &mesh, &grid, |n, _, u| seen.push((n, u.to_vec()))).unwrap();
        assert!(lean.levels().is_none());
        assert_eq!(lean.last(), full.last());
        for n in 0..=12 {
            assert_eq!(seen[n].1, full.levels().unwrap()[n]);
            let l = lean.level(n).unwrap();
            for (a, b) in l.iter().zip(&full.levels().unwrap()[n]) {
                assert!((a - b).abs() < 1e-13);
            }
        }
        // determinism
        let again = solve(&cfg, &p, &mesh, &grid).unwrap();
        assert_eq!(again, full);
    }

    #[test]
    fn free_step_matches_stepper() {
        let p = example1(0.7, 1.3).unwrap();
        let mesh = build_graded_mesh(1.0, 4, 1.0, None).unwrap();
        let grid = build_grid(0.0, PI, 10).unwrap();
        let cfg = SchemeConfig::new(Scheme::L1, 0.7).unwrap();
        let mut st = Stepper::new(&cfg, &p, &mesh, &grid).unwrap();
        st.advance().unwrap();
        st.advance().unwrap();
        let prev = st.current().to_vec();
        let diffs = st.diffs().to_vec();
        let row = kernel_row(&mesh, Scheme::L1, 0.7, 3).unwrap();
        let op = Operator::new(&grid, &p.mu, &p.c).unwrap();
        let u3 = step(&p, &grid, &op, &mesh, &row, &diffs, &prev).unwrap();
        assert_eq!(st.advance().unwrap(), &u3[..]);
        assert!(step(&p, &grid, &op, &mesh, &row, &diffs[1..], &prev).is_err());
    }

    #[test]
    fn step_restriction() {
        let mesh = build_uniform_mesh(10, 1.0).unwrap();
        let r = check_step_restriction(&mesh, Scheme::L1, 0.5, 0.0, 1.0).unwrap();
        assert!(r.threshold.is_infinite() && r.satisfied);
        let c = PI / 6f64.sqrt();
        let r = check_step_restriction(&mesh, Scheme::L1, 0.5, 3.0, c).unwrap();
        let want = 1.0 / (2.0 * libm::tgamma(1.5) * 9.0 * c).powi(2);
        assert_rel(r.threshold, want, 1e-14);
        assert!(!r.satisfied);
        let f = check_step_restriction(&mesh, Scheme::FracCn, 0.5, 3.0, c).unwrap();
        assert_rel(f.threshold, r.threshold / 9.0, 1e-14);
        // a single step of exactly the threshold passes
        let edge = crate::mesh::build_custom_mesh(&[0.0, r.threshold]).unwrap();
        assert!(check_step_restriction(&edge, Scheme::L1, 0.5, 3.0, c).unwrap().satisfied);
        let over = crate::mesh::build_custom_mesh(&[0.0, r.threshold * (1.0 + 1e-12)]).unwrap();
        assert!(!check_step_restriction(&over, Scheme::L1, 0.5, 3.0, c).unwrap().satisfied);
    }

    #[test]
    fn mismatched_order_is_rejected() {
        let p = example1(0.5, 1.5).unwrap();
        let mesh = build_uniform_mesh(4, 1.0).unwrap();
        let grid = build_grid(0.0, PI, 8).unwrap();
        assert!(Stepper::new(&SchemeConfig::new(Scheme::L1, 0.4).unwrap(), &p, &mesh, &grid).is_err());
    }
}
