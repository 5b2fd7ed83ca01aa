//! Uniform 1-D grid, the variable-coefficient operator `L_h v = -d_h(mu d_h v)`,
//! discrete norms and the tridiagonal solves used by the time stepper.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform grid `x_i = xl + i h`, `0 <= i <= M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    xl: f64,
    xr: f64,
    m: usize,
    h: f64,
}

/// Grid on `[xl, xr]` with `m` subintervals.
pub fn build_grid(xl: f64, xr: f64, m: usize) -> Result<SpaceGrid> {
    if !(xl.is_finite() && xr.is_finite() && xr > xl) {
        return Err(Error::InvalidMesh("space domain must satisfy xl < xr"));
    }
    if m < 2 {
        return Err(Error::InvalidMesh("space grid needs at least two subintervals"));
    }
    Ok(SpaceGrid {
        xl,
        xr,
        m,
        h: (xr - xl) / m as f64,
    })
}

impl SpaceGrid {
    pub fn xl(&self) -> f64 {
        self.xl
    }

    pub fn xr(&self) -> f64 {
        self.xr
    }

    /// Number of subintervals `M`.
    pub fn intervals(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of interior nodes `M - 1`.
    pub fn interior_len(&self) -> usize {
        self.m - 1
    }

    /// Number of nodes `M + 1`.
    pub fn node_len(&self) -> usize {
        self.m + 1
    }

    /// Node `x_i`; the last node is exactly `xr`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.m {
            self.xr
        } else {
            self.xl + i as f64 * self.h
        }
    }

    /// Half point `x_(i-1/2)` for `1 <= i <= M`.
    #[inline]
    pub fn half(&self, i: usize) -> f64 {
        self.xl + (i as f64 - 0.5) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.m).map(|i| self.x(i)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..=self.m).map(|i| f(self.x(i))).collect()
    }

    /// Interior part of a node vector, or the vector itself if it already
    /// has interior length. Boundary values are ignored.
    fn interior<'v>(&self, v: &'v [f64]) -> Result<&'v [f64]> {
        if v.len() == self.m + 1 {
            Ok(&v[1..self.m])
        } else if v.len() == self.m - 1 {
            Ok(v)
        } else {
            Err(Error::ShapeMismatch {
                expected: self.m + 1,
                found: v.len(),
            })
        }
    }

    fn check_nodes(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.m + 1 {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.m + 1,
                found: v.len(),
            })
        }
    }
}

/// Coefficients sampled once on a grid: `mu` at half points, `c` at nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    /// `mu_half[i - 1] = mu(x_(i-1/2))`, `1 <= i <= M`.
    mu_half: Vec<f64>,
    /// `c[i] = c(x_i)`, `0 <= i <= M`.
    c: Vec<f64>,
    h: f64,
}

impl Operator {
    pub fn new<Mu, C>(grid: &SpaceGrid, mu: Mu, c: C) -> Result<Self>
    where
        Mu: Fn(f64) -> f64,
        C: Fn(f64) -> f64,
    {
        let mu_half: Vec<f64> = (1..=grid.m).map(|i| mu(grid.half(i))).collect();
        if let Some(&bad) = mu_half.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain {
                what: "diffusivity must be positive at every half point",
                value: bad,
            });
        }
        let c = grid.sample(c);
        if let Some(&bad) = c.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "reaction coefficient must be finite",
                value: bad,
            });
        }
        Ok(Self {
            mu_half,
            c,
            h: grid.h,
        })
    }

    /// Diffusion-only operator (`c = 0`).
    pub fn diffusion<Mu: Fn(f64) -> f64>(grid: &SpaceGrid, mu: Mu) -> Result<Self> {
        Self::new(grid, mu, |_| 0.0)
    }

    pub fn mu_half(&self) -> &[f64] {
        &self.mu_half
    }

    pub fn reaction(&self) -> &[f64] {
        &self.c
    }

    /// `max_i |c(x_i)|` over the sampled nodes.
    pub fn kappa(&self) -> f64 {
        self.c.iter().fold(0.0, |m, &v| m.max(libm::fabs(v)))
    }

    /// Smallest sampled diffusivity.
    pub fn mu_min(&self) -> f64 {
        self.mu_half.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn m(&self) -> usize {
        self.mu_half.len()
    }

    /// `(L_h v)_i` for every interior node; `v` holds all `M + 1` node values.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let m = self.m();
        if v.len() != m + 1 {
            return Err(Error::ShapeMismatch {
                expected: m + 1,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; m - 1];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let inv_h2 = 1.0 / (self.h * self.h);
        for i in 1..self.m() {
            let left = self.mu_half[i - 1] * (v[i] - v[i - 1]);
            let right = self.mu_half[i] * (v[i + 1] - v[i]);
            out[i - 1] = -(right - left) * inv_h2;
        }
    }

    /// `|v|_1 = sqrt(h sum_(i=1..M) mu(x_(i-1/2)) (d_h v(x_(i-1/2)))^2)`.
    /// An interior vector is extended by zero boundary values.
    pub fn h1_seminorm(&self, grid: &SpaceGrid, v: &[f64]) -> Result<f64> {
        let m = self.m();
        let get = node_reader(grid, v)?;
        let mut s = 0.0;
        for i in 1..=m {
            let d = get(i) - get(i - 1);
            s += self.mu_half[i - 1] * d * d;
        }
        Ok(libm::sqrt(s / self.h))
    }

    /// `C = (xr - xl) / sqrt(6 mu_min)`, with `mu_min` the smallest sampled diffusivity.
    pub fn embedding_constant(&self, grid: &SpaceGrid) -> f64 {
        (grid.xr - grid.xl) / libm::sqrt(6.0 * self.mu_min())
    }
}

fn node_reader<'v>(grid: &SpaceGrid, v: &'v [f64]) -> Result<impl Fn(usize) -> f64 + 'v> {
    let m = grid.m;
    let full = if v.len() == m + 1 {
        true
    } else if v.len() == m - 1 {
        false
    } else {
        return Err(Error::ShapeMismatch {
            expected: m + 1,
            found: v.len(),
        });
    };
    Ok(move |i: usize| {
        if full {
            v[i]
        } else if i == 0 || i == m {
            0.0
        } else {
            v[i - 1]
        }
    })
}

/// `(L_h v)(x_i)` at interior nodes for a diffusivity given as a function.
pub fn apply_lh<Mu: Fn(f64) -> f64>(grid: &SpaceGrid, mu: Mu, v: &[f64]) -> Result<Vec<f64>> {
    grid.check_nodes(v)?;
    Operator::diffusion(grid, mu)?.apply(v)
}

/// Tridiagonal system over interior nodes. `sub[0]` and `sup[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Row excess `diag - |sub| - |sup|`, formed without cancellation, for
    /// matrices with nonpositive off-diagonals and nonnegative excess. When
    /// present the elimination works from it and keeps full relative accuracy
    /// in the pivots; it must be cleared if `diag` is edited.
    pub slack: Option<Vec<f64>>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x` for the stored matrix.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Whether every row is strictly diagonally dominant.
    pub fn diagonally_dominant(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| {
            let off = if i > 0 { libm::fabs(self.sub[i]) } else { 0.0 }
                + if i + 1 < n { libm::fabs(self.sup[i]) } else { 0.0 };
            libm::fabs(self.diag[i]) > off
        })
    }
}

/// Matrix `a0 I + (1 - nu)(L_h - c)` over interior nodes with a zero right side.
/// Boundary contributions are the caller's responsibility.
pub fn assemble_weighted_system(op: &Operator, a0: f64, nu: f64) -> Result<TridiagonalSystem> {
    if !(a0 > 0.0) {
        return Err(Error::Domain {
            what: "leading kernel coefficient must be positive",
            value: a0,
        });
    }
    let n = op.m() - 1;
    let w = (1.0 - nu) / (op.h * op.h);
    let mut sys = TridiagonalSystem {
        sub: vec![0.0; n],
        diag: vec![0.0; n],
        sup: vec![0.0; n],
        rhs: vec![0.0; n],
        slack: None,
    };
    let mut slack = vec![0.0; n];
    for r in 0..n {
        let i = r + 1;
        let (ml, mr) = (op.mu_half[i - 1], op.mu_half[i]);
        sys.diag[r] = a0 + w * (ml + mr) - (1.0 - nu) * op.c[i];
        slack[r] = a0 - (1.0 - nu) * op.c[i];
        if r > 0 {
            sys.sub[r] = -w * ml;
        } else {
            slack[r] += w * ml;
        }
        if r + 1 < n {
            sys.sup[r] = -w * mr;
        } else {
            slack[r] += w * mr;
        }
    }
    if slack.iter().all(|s| *s >= 0.0) {
        sys.slack = Some(slack);
    }
    Ok(sys)
}

/// Thomas elimination. A pivot that is negligible against its row is reported
/// as [`Error::ZeroPivot`].
pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    let mut scratch = vec![0.0; sys.len()];
    let mut x = vec![0.0; sys.len()];
    solve_tridiagonal_into(sys, &mut scratch, &mut x)?;
    Ok(x)
}

pub(crate) fn solve_tridiagonal_into(sys: &TridiagonalSystem, cp: &mut [f64], x: &mut [f64]) -> Result<()> {
    let n = sys.len();
    if sys.sub.len() != n || sys.sup.len() != n || sys.rhs.len() != n || x.len() != n || cp.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: sys.rhs.len(),
        });
    }
    if let Some(slack) = sys.slack.as_deref() {
        if slack.len() == n {
            return solve_with_slack(sys, slack, cp, x);
        }
    }
    for i in 0..n {
        let scale = libm::fabs(sys.diag[i]) + libm::fabs(sys.sub[i]) + libm::fabs(sys.sup[i]);
        let pivot = if i == 0 {
            sys.diag[0]
        } else {
            sys.diag[i] - sys.sub[i] * cp[i - 1]
        };
        if !(libm::fabs(pivot) > 1e-14 * scale) || !pivot.is_finite() {
            return Err(Error::ZeroPivot { row: i });
        }
        cp[i] = sys.sup[i] / pivot;
        x[i] = if i == 0 {
            sys.rhs[0] / pivot
        } else {
            (sys.rhs[i] - sys.sub[i] * x[i - 1]) / pivot
        };
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    Ok(())
}

// Elimination on an M-matrix parametrised by its off-diagonals and row excess.
// The reduced excess `e_i = s_i + l_i e_(i-1) / p_(i-1)` and pivot `p_i = e_i + u_i`
// are sums of nonnegative terms, so they carry no cancellation error.
fn solve_with_slack(sys: &TridiagonalSystem, slack: &[f64], cp: &mut [f64], x: &mut [f64]) -> Result<()> {
    let n = sys.len();
    let mut excess = 0.0;
    let mut prev_pivot = 1.0;
    for i in 0..n {
        let l = if i > 0 { -sys.sub[i] } else { 0.0 };
        let u = if i + 1 < n { -sys.sup[i] } else { 0.0 };
        excess = slack[i] + if i > 0 { l * excess / prev_pivot } else { 0.0 };
        let pivot = excess + u;
        let scale = slack[i] + l + u;
        if !(pivot > 1e-14 * scale) || !pivot.is_finite() {
            return Err(Error::ZeroPivot { row: i });
        }
        cp[i] = u / pivot;
        x[i] = if i > 0 { (sys.rhs[i] + l * x[i - 1]) / pivot } else { sys.rhs[0] / pivot };
        prev_pivot = pivot;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] += cp[i] * x[i + 1];
    }
    Ok(())
}

/// `<v, w> = h sum_(interior) v_i w_i`; accepts node or interior vectors.
pub fn l2_inner(grid: &SpaceGrid, v: &[f64], w: &[f64]) -> Result<f64> {
    let (v, w) = (grid.interior(v)?, grid.interior(w)?);
    Ok(grid.h * v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
}

pub fn l2_norm(grid: &SpaceGrid, v: &[f64]) -> Result<f64> {
    Ok(libm::sqrt(l2_inner(grid, v, v)?))
}

/// Discrete `H^1` seminorm for a diffusivity given as a function.
pub fn h1_seminorm<Mu: Fn(f64) -> f64>(grid: &SpaceGrid, mu: Mu, v: &[f64]) -> Result<f64> {
    Operator::diffusion(grid, mu)?.h1_seminorm(grid, v)
}

/// Embedding constant `C` in `||v|| <= C |v|_1`.
pub fn embedding_constant<Mu: Fn(f64) -> f64>(grid: &SpaceGrid, mu: Mu) -> Result<f64> {
    Ok(Operator::diffusion(grid, mu)?.embedding_constant(grid))
}
