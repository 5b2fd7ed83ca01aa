//! Discrete Caputo kernels on arbitrary meshes.
//!
//! A discrete Caputo derivative at the offset point `t_(n-nu)` is the
//! convolution-like sum `sum_(k=1..n) A^(n)_(n-k) (v^k - v^(k-1))`. Row `n`
//! stores `A^(n)_0 .. A^(n)_(n-1)` with the history index `j = n - k`. The
//! L1 formula uses `nu = 0`; the Alikhanov formula uses `nu = theta = alpha/2`.
//!
//! Every cell integral is evaluated in closed form from the weights
//! `omega_(2-alpha)` and `omega_(3-alpha)` (with a centred Taylor expansion for
//! narrow cells far from the evaluation point), so no quadrature error
//! reaches the convergence studies.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;
use crate::special::{CompensatedSum, Weight, WeightFamily};

/// Time-stepping family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// L1 formula, offset `nu = 0`.
    L1,
    /// Alikhanov formula at `t_(n - alpha/2)` (fractional Crank-Nicolson).
    FracCn,
}

impl Scheme {
    /// Offset parameter `nu`.
    pub fn offset(self, alpha: f64) -> f64 {
        match self {
            Scheme::L1 => 0.0,
            Scheme::FracCn => 0.5 * alpha,
        }
    }

    /// Kernel lower-bound constant known for this family (1 for L1, 11/4 for
    /// Alikhanov on meshes with ratios up to 7/4).
    pub fn pi_a(self) -> f64 {
        match self {
            Scheme::L1 => 1.0,
            Scheme::FracCn => 11.0 / 4.0,
        }
    }

    /// Upper bound on adjacent step ratios under which the kernel
    /// properties are known to hold.
    pub fn ratio_bound(self) -> f64 {
        match self {
            Scheme::L1 => f64::INFINITY,
            Scheme::FracCn => 7.0 / 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::L1 => "l1",
            Scheme::FracCn => "fraccn",
        }
    }
}

/// Coefficients `A^(n)_0 .. A^(n)_(n-1)` of one discrete Caputo row.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub n: usize,
    pub nu: f64,
    pub alpha: f64,
    pub coeffs: Vec<f64>,
}

impl KernelRow {
    #[inline]
    pub fn a0(&self) -> f64 {
        self.coeffs[0]
    }

    /// `A^(n)_j`.
    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.coeffs[j]
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "fractional order must lie in (0, 1)",
            value: alpha,
        })
    }
}

fn check_step(mesh: &TimeMesh, n: usize) -> Result<()> {
    if n >= 1 && n <= mesh.len() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            index: n,
            len: mesh.len(),
        })
    }
}

/// L1 kernel row: `A^(n)_(n-k) = (1/tau_k) int_(t_(k-1))^(t_k) omega_(1-alpha)(t_n - s) ds`.
pub fn l1_kernel_row(mesh: &TimeMesh, alpha: f64, n: usize) -> Result<KernelRow> {
    check_alpha(alpha)?;
    check_step(mesh, n)?;
    let fam = WeightFamily::new(1.0 - alpha)?;
    Ok(KernelRow {
        n,
        nu: 0.0,
        alpha,
        coeffs: l1_coeffs(&fam, mesh, n),
    })
}

fn l1_coeffs(fam: &WeightFamily, mesh: &TimeMesh, n: usize) -> Vec<f64> {
    let tn = mesh.t(n);
    let mut coeffs = vec![0.0; n];
    for k in 1..=n {
        let tau = mesh.tau(k);
        coeffs[n - k] = fam.integral(tn - mesh.t(k), tau) / tau;
    }
    coeffs
}

/// Distance from the offset point `t_(n-theta)` to `t_k`, `k <= n - 1`.
#[inline]
fn offset_distance(mesh: &TimeMesh, n: usize, k: usize, theta: f64) -> f64 {
    (mesh.t(n - 1) - mesh.t(k)) + (1.0 - theta) * mesh.tau(n)
}

/// Alikhanov `a`-coefficients `a^(n)_0 .. a^(n)_(n-1)`.
///
/// `a^(n)_(n-k)` integrates `omega_(1-alpha)(t_(n-theta) - s)` over cell `k`
/// and divides by that cell's own width `tau_k`, which is the slope of the
/// linear part of the interpolant on the cell.
pub fn alikhanov_a_coeffs(mesh: &TimeMesh, alpha: f64, n: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_step(mesh, n)?;
    let fam = WeightFamily::new(1.0 - alpha)?;
    Ok(a_coeffs(&fam, mesh, alpha, n))
}

fn a_coeffs(fam: &WeightFamily, mesh: &TimeMesh, alpha: f64, n: usize) -> Vec<f64> {
    let theta = 0.5 * alpha;
    let tau_n = mesh.tau(n);
    let mut a = vec![0.0; n];
    a[0] = fam.first.at((1.0 - theta) * tau_n) / tau_n;
    for k in 1..n {
        let tau = mesh.tau(k);
        a[n - k] = fam.integral(offset_distance(mesh, n, k, theta), tau) / tau;
    }
    a
}

/// Alikhanov `b`-coefficients, indexed by `j = n - k` for `1 <= j <= n - 1`.
/// Entry 0 is unused and set to zero. Requires `n >= 2`.
pub fn alikhanov_b_coeffs(mesh: &TimeMesh, alpha: f64, n: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_step(mesh, n)?;
    if n < 2 {
        return Err(Error::IndexOutOfRange { index: n, len: mesh.len() });
    }
    let fam = WeightFamily::new(1.0 - alpha)?;
    Ok(b_coeffs(&fam, mesh, alpha, n))
}

fn b_coeffs(fam: &WeightFamily, mesh: &TimeMesh, alpha: f64, n: usize) -> Vec<f64> {
    let theta = 0.5 * alpha;
    let mut b = vec![0.0; n];
    for k in 1..n {
        let tau = mesh.tau(k);
        let d = offset_distance(mesh, n, k, theta);
        // int (s - t_(k-1/2)) w(t_(n-theta) - s) ds == int (c - r) w(r) dr, c the cell centre
        let centred = -fam.moment(d, tau, d + 0.5 * tau);
        b[n - k] = 2.0 * centred / (tau * (tau + mesh.tau(k + 1)));
    }
    b
}

/// Alikhanov kernel row assembled from the `a` and `b` coefficients.
pub fn alikhanov_kernel_row(mesh: &TimeMesh, alpha: f64, n: usize) -> Result<KernelRow> {
    check_alpha(alpha)?;
    check_step(mesh, n)?;
    let fam = WeightFamily::new(1.0 - alpha)?;
    Ok(alikhanov_row(&fam, mesh, alpha, n))
}

fn alikhanov_row(fam: &WeightFamily, mesh: &TimeMesh, alpha: f64, n: usize) -> KernelRow {
    let mut coeffs = a_coeffs(fam, mesh, alpha, n);
    if n >= 2 {
        let b = b_coeffs(fam, mesh, alpha, n);
        // A_(n-k) = a_(n-k) + rho_(k-1) b_(n-k+1) - b_(n-k), with b_0 = b_n = 0
        for k in 1..=n {
            let j = n - k;
            let mut v = coeffs[j] - b[j];
            if k >= 2 {
                v += mesh.rho(k - 1) * b[j + 1];
            }
            coeffs[j] = v;
        }
    }
    KernelRow {
        n,
        nu: 0.5 * alpha,
        alpha,
        coeffs,
    }
}

/// Row `n` of the requested scheme.
pub fn kernel_row(mesh: &TimeMesh, scheme: Scheme, alpha: f64, n: usize) -> Result<KernelRow> {
    match scheme {
        Scheme::L1 => l1_kernel_row(mesh, alpha, n),
        Scheme::FracCn => alikhanov_kernel_row(mesh, alpha, n),
    }
}

/// Builds successive kernel rows with the gamma factors resolved once.
#[derive(Debug, Clone)]
pub struct KernelBuilder<'m> {
    mesh: &'m TimeMesh,
    scheme: Scheme,
    alpha: f64,
    fam: WeightFamily,
}

impl<'m> KernelBuilder<'m> {
    pub fn new(mesh: &'m TimeMesh, scheme: Scheme, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            mesh,
            scheme,
            alpha,
            fam: WeightFamily::new(1.0 - alpha)?,
        })
    }

    pub fn row(&self, n: usize) -> Result<KernelRow> {
        check_step(self.mesh, n)?;
        Ok(match self.scheme {
            Scheme::L1 => KernelRow {
                n,
                nu: 0.0,
                alpha: self.alpha,
                coeffs: l1_coeffs(&self.fam, self.mesh, n),
            },
            Scheme::FracCn => alikhanov_row(&self.fam, self.mesh, self.alpha, n),
        })
    }
}

/// All kernel rows `1..=N` of one scheme on one mesh. Memory is `O(N^2)`;
/// the solver builds rows on demand instead.
#[derive(Debug, Clone)]
pub struct KernelTable {
    scheme: Scheme,
    alpha: f64,
    rows: Vec<KernelRow>,
}

impl KernelTable {
    pub fn build(mesh: &TimeMesh, scheme: Scheme, alpha: f64) -> Result<Self> {
        let builder = KernelBuilder::new(mesh, scheme, alpha)?;
        let rows = (1..=mesh.len()).map(|n| builder.row(n)).collect::<Result<_>>()?;
        Ok(Self { scheme, alpha, rows })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.scheme.offset(self.alpha)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row `n`, `1 <= n <= N`.
    pub fn row(&self, n: usize) -> &KernelRow {
        &self.rows[n - 1]
    }

    pub fn rows(&self) -> &[KernelRow] {
        &self.rows
    }
}

fn check_rows(rows: &[KernelRow], n: usize) -> Result<()> {
    if rows.len() < n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: rows.len(),
        });
    }
    for (i, row) in rows[..n].iter().enumerate() {
        if row.coeffs.len() != i + 1 {
            return Err(Error::ShapeMismatch {
                expected: i + 1,
                found: row.coeffs.len(),
            });
        }
        if !(row.a0() > 0.0) {
            return Err(Error::CorruptKernel { n: i + 1 });
        }
    }
    Ok(())
}

/// Complementary kernel `P^(n)_0 .. P^(n)_(n-1)` for one step `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementaryRow {
    pub n: usize,
    pub coeffs: Vec<f64>,
}

/// Complementary kernel by the descending recursion
/// `P_0 = 1/A^(n)_0`, `P_(n-j) = (1/A^(j)_0) sum_(k=j+1..n) (A^(k)_(k-j-1) - A^(k)_(k-j)) P_(n-k)`.
///
/// `rows[i]` must be the kernel row of step `i + 1`.
pub fn complementary_row(rows: &[KernelRow], n: usize) -> Result<ComplementaryRow> {
    if n == 0 {
        return Err(Error::IndexOutOfRange { index: 0, len: rows.len() });
    }
    check_rows(rows, n)?;
    Ok(complementary_unchecked(rows, n))
}

fn complementary_unchecked(rows: &[KernelRow], n: usize) -> ComplementaryRow {
    let mut p = vec![0.0; n];
    p[0] = 1.0 / rows[n - 1].a0();
    for j in (1..n).rev() {
        let mut acc = 0.0;
        for k in j + 1..=n {
            let row = &rows[k - 1];
            acc += (row.get(k - j - 1) - row.get(k - j)) * p[n - k];
        }
        p[n - j] = acc / rows[j - 1].a0();
    }
    ComplementaryRow { n, coeffs: p }
}

/// Complementary rows for every step `1..=rows.len()`; `O(N^3)` work.
pub fn complementary_rows(rows: &[KernelRow]) -> Result<Vec<ComplementaryRow>> {
    check_rows(rows, rows.len())?;
    Ok((1..=rows.len()).map(|n| complementary_unchecked(rows, n)).collect())
}

/// `y^n = sum_(j=1..n) P^(n)_(n-j) g^j` for every `n`, obtained in `O(N^2)`
/// by solving the discrete equation `sum_k A^(n)_(n-k) (y^k - y^(k-1)) = g^n`
/// with `y^0 = 0`. `g[i]` holds `g^(i+1)`.
pub fn complementary_convolve(rows: &[KernelRow], g: &[f64]) -> Result<Vec<f64>> {
    check_rows(rows, g.len())?;
    let n_max = g.len();
    let mut diffs: Vec<f64> = Vec::with_capacity(n_max);
    let mut out = Vec::with_capacity(n_max);
    let mut y = 0.0;
    for n in 1..=n_max {
        let row = &rows[n - 1];
        let mut hist = CompensatedSum::new();
        for k in 1..n {
            hist.add(row.get(n - k) * diffs[k - 1]);
        }
        let dy = (g[n - 1] - hist.value()) / row.a0();
        diffs.push(dy);
        y += dy;
        out.push(y);
    }
    Ok(out)
}

/// `max_(1<=k<=n) |sum_(j=k..n) P^(n)_(n-j) A^(j)_(j-k) - 1|` for one row.
pub fn complementary_identity_deviation(p: &ComplementaryRow, rows: &[KernelRow]) -> Result<f64> {
    let n = p.n;
    if p.coeffs.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: p.coeffs.len(),
        });
    }
    check_rows(rows, n)?;
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        let mut s = 0.0;
        for j in k..=n {
            s += p.coeffs[n - j] * rows[j - 1].get(j - k);
        }
        worst = worst.max(libm::fabs(s - 1.0));
    }
    Ok(worst)
}

/// Largest deviation of the complementary identity over all supplied rows.
pub fn verify_complementary_identity(p_rows: &[ComplementaryRow], rows: &[KernelRow]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in p_rows {
        worst = worst.max(complementary_identity_deviation(p, rows)?);
    }
    Ok(worst)
}

/// Margin of the bound `sum_j P^(n)_(n-j) omega_(1+m alpha-alpha)(t_j) <= pi_A omega_(1+m alpha)(t_n)`,
/// minimised over the supplied rows. A nonnegative result means the bound holds.
pub fn verify_p_bound(p_rows: &[ComplementaryRow], mesh: &TimeMesh, alpha: f64, m: u8, pi_a: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if m > 1 {
        return Err(Error::Domain {
            what: "P bound exponent must be 0 or 1",
            value: f64::from(m),
        });
    }
    let mf = f64::from(m);
    let inner = Weight::new(1.0 + mf * alpha - alpha)?;
    let outer = Weight::new(1.0 + mf * alpha)?;
    let mut margin = f64::INFINITY;
    for p in p_rows {
        let n = p.n;
        check_step(mesh, n)?;
        let mut lhs = 0.0;
        for j in 1..=n {
            lhs += p.coeffs[n - j] * inner.at(mesh.t(j));
        }
        margin = margin.min(pi_a * outer.at(mesh.t(n)) - lhs);
    }
    Ok(margin)
}

/// Slack in the kernel-specific strengthening used for the Alikhanov family.
/// Every field is a relative margin; all must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlikhanovMargins {
    /// `A_(n-k-1) - A_(n-k) >= (1 + rho_k) b_(n-k) - (1/(5 tau_k)) int (t_k - s) omega_(-alpha)(t_(n-theta) - s) ds`
    pub difference_lower: f64,
    /// Positivity of that lower bound.
    pub difference_lower_positive: f64,
    /// `A_0 - A_1 > theta (2 A_0 - A_1)`
    pub first_pair: f64,
    /// `A_0 <= (24/11) omega_(2-alpha)(tau_n) / tau_n`
    pub upper: f64,
    /// `A_(n-k) >= (4/11) (1/tau_k) int omega_(1-alpha)(t_n - s) ds`
    pub lower: f64,
}

impl AlikhanovMargins {
    pub fn all_positive(&self) -> bool {
        self.difference_lower > 0.0
            && self.difference_lower_positive > 0.0
            && self.first_pair > 0.0
            && self.upper >= 0.0
            && self.lower > 0.0
    }

    pub fn min(&self) -> f64 {
        self.difference_lower
            .min(self.difference_lower_positive)
            .min(self.first_pair)
            .min(self.upper)
            .min(self.lower)
    }
}

/// Results of checking the kernel assumptions on a full table.
///
/// Margins are relative (scaled by the magnitude of the compared terms) and
/// minimised over every tested index pair; a positive value means the
/// property holds everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub scheme: Scheme,
    /// `A_(j-1) >= A_j > 0` in every row.
    pub monotone_ok: bool,
    pub monotone_margin: f64,
    /// `(1 - 2 nu) A_0 - (1 - nu) A_1 >= 0` in every row with `n >= 2`.
    pub first_coef_ok: bool,
    pub first_coef_margin: f64,
    /// Smallest `pi_A` with `A_(n-k) >= (1/(pi_A tau_k)) int omega_(1-alpha)(t_n - s) ds`.
    pub pi_a: f64,
    /// L1 only: `A_(n-k-1) - A_(n-k) > (1/2) int d omega_(1-alpha)(t_n - s)`.
    pub l1_difference_margin: Option<f64>,
    /// Alikhanov only.
    pub alikhanov: Option<AlikhanovMargins>,
    /// `(n, k)` of the tightest margin and which check produced it.
    pub worst_location: Option<(usize, usize, &'static str)>,
}

impl AssumptionReport {
    /// Monotonicity, first-coefficient and scheme-specific checks all pass.
    pub fn passes(&self) -> bool {
        self.monotone_ok
            && self.first_coef_ok
            && self.l1_difference_margin.is_none_or(|m| m > 0.0)
            && self.alikhanov.is_none_or(|m| m.all_positive())
    }
}

struct Tracker {
    worst: f64,
    at: Option<(usize, usize, &'static str)>,
}

impl Tracker {
    fn see(&mut self, margin: f64, n: usize, k: usize, what: &'static str, slot: &mut f64) {
        if margin < *slot || margin.is_nan() {
            *slot = margin;
        }
        if margin < self.worst || (margin.is_nan() && self.at.is_none()) {
            self.worst = margin;
            self.at = Some((n, k, what));
        }
    }
}

#[inline]
fn rel(diff: f64, a: f64, b: f64) -> f64 {
    let scale = libm::fabs(a).max(libm::fabs(b));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Checks the kernel assumptions over every row of `table`.
pub fn verify_kernel_assumptions(table: &KernelTable, mesh: &TimeMesh) -> Result<AssumptionReport> {
    let scheme = table.scheme();
    let alpha = table.alpha();
    let nu = table.nu();
    let n_max = table.len();
    if n_max > mesh.len() {
        return Err(Error::ShapeMismatch {
            expected: mesh.len(),
            found: n_max,
        });
    }
    let fam = WeightFamily::new(1.0 - alpha)?;
    let mut tr = Tracker {
        worst: f64::INFINITY,
        at: None,
    };
    let mut monotone = f64::INFINITY;
    let mut first = f64::INFINITY;
    let mut pi_a: f64 = 0.0;
    let mut l1_diff = f64::INFINITY;
    let mut am = AlikhanovMargins {
        difference_lower: f64::INFINITY,
        difference_lower_positive: f64::INFINITY,
        first_pair: f64::INFINITY,
        upper: f64::INFINITY,
        lower: f64::INFINITY,
    };
    let neg = match scheme {
        Scheme::FracCn => Some(WeightFamily::new(-alpha)?),
        Scheme::L1 => None,
    };
    let theta = 0.5 * alpha;
    let drift = Weight::new(1.0 - alpha)?;

    for n in 1..=n_max {
        let row = table.row(n);
        let l1 = l1_coeffs(&fam, mesh, n);
        // positivity of the last coefficient and monotone decay
        let last = row.get(n - 1);
        tr.see(if last > 0.0 { 1.0 } else { -1.0 }, n, 1, "positivity", &mut monotone);
        for j in 1..n {
            let (prev, cur) = (row.get(j - 1), row.get(j));
            tr.see(rel(prev - cur, prev, cur), n, n - j, "monotone", &mut monotone);
        }
        if n >= 2 {
            let (a0, a1) = (row.get(0), row.get(1));
            let v = (1.0 - 2.0 * nu) * a0 - (1.0 - nu) * a1;
            tr.see(rel(v, a0, a1), n, n - 1, "first coefficient", &mut first);
        }
        for k in 1..=n {
            pi_a = pi_a.max(l1[n - k] / row.get(n - k));
        }
        match scheme {
            Scheme::L1 => {
                let tn = mesh.t(n);
                for k in 1..n {
                    let lhs = row.get(n - k - 1) - row.get(n - k);
                    let rhs = 0.5 * (drift.at(tn - mesh.t(k)) - drift.at(tn - mesh.t(k - 1)));
                    tr.see(rel(lhs - rhs, lhs, rhs), n, k, "L1 difference bound", &mut l1_diff);
                }
            }
            Scheme::FracCn => {
                let neg = neg.as_ref().expect("set for FracCn");
                if n >= 2 {
                    let b = b_coeffs(&fam, mesh, alpha, n);
                    for k in 1..n {
                        let lhs = row.get(n - k - 1) - row.get(n - k);
                        let tau = mesh.tau(k);
                        let d = offset_distance(mesh, n, k, theta);
                        let tail = neg.moment(d, tau, d);
                        let mid = (1.0 + mesh.rho(k)) * b[n - k] - tail / (5.0 * tau);
                        tr.see(rel(lhs - mid, lhs, mid), n, k, "Alikhanov difference bound", &mut am.difference_lower);
                        tr.see(rel(mid, lhs, mid), n, k, "Alikhanov difference bound sign", &mut am.difference_lower_positive);
                    }
                    let (a0, a1) = (row.get(0), row.get(1));
                    let v = (a0 - a1) - theta * (2.0 * a0 - a1);
                    tr.see(rel(v, a0, a1), n, n, "Alikhanov first pair", &mut am.first_pair);
                }
                let tau_n = mesh.tau(n);
                let cap = 24.0 / 11.0 * fam.first.at(tau_n) / tau_n;
                tr.see(rel(cap - row.a0(), cap, row.a0()), n, n, "Alikhanov upper bound", &mut am.upper);
                for k in 1..=n {
                    let a = row.get(n - k);
                    let floor = 4.0 / 11.0 * l1[n - k];
                    tr.see(rel(a - floor, a, floor), n, k, "Alikhanov lower bound", &mut am.lower);
                }
            }
        }
    }

    Ok(AssumptionReport {
        scheme,
        monotone_ok: monotone >= 0.0,
        monotone_margin: monotone,
        first_coef_ok: n_max < 2 || first >= 0.0,
        first_coef_margin: first,
        pi_a,
        l1_difference_margin: (scheme == Scheme::L1).then_some(l1_diff),
        alikhanov: (scheme == Scheme::FracCn).then_some(am),
        worst_location: tr.at,
    })
}

/// `sum_(k=1..n) A^(n)_(n-k) (v^k - v^(k-1))` with `history = [v^0, .., v^n]`.
pub fn apply_discrete_caputo(row: &KernelRow, history: &[f64]) -> Result<f64> {
    let n = row.n;
    if history.len() != n + 1 || row.coeffs.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n + 1,
            found: history.len(),
        });
    }
    let mut s = 0.0;
    for k in 1..=n {
        s += row.get(n - k) * (history[k] - history[k - 1]);
    }
    Ok(s)
}

/// Local consistency errors `Upsilon^(n-nu)[v] = (D^alpha v)(t_(n-nu)) - (discrete)^(n-nu)`
/// for `n = 1..=N`, given `v` and its exact Caputo derivative.
pub fn local_consistency<V, C>(table: &KernelTable, mesh: &TimeMesh, v: V, caputo: C) -> Vec<f64>
where
    V: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    let nu = table.nu();
    let values: Vec<f64> = mesh.times().iter().map(|&t| v(t)).collect();
    (1..=table.len())
        .map(|n| {
            let row = table.row(n);
            let mut s = CompensatedSum::new();
            for k in 1..=n {
                s.add(row.get(n - k) * (values[k] - values[k - 1]));
            }
            caputo(mesh.offset_time(n, nu)) - s.value()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_custom_mesh, build_graded_mesh, build_uniform_mesh, random_mesh};
    use crate::special::omega;
    use crate::testing::{assert_rel, quad, quad_origin_singular};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_unit(n: usize) -> TimeMesh {
        build_custom_mesh(&(0..=n).map(|k| k as f64).collect::<Vec<_>>()).unwrap()
    }

    // Brute-force kernel oracle: every coefficient by quadrature of its definition.
    fn l1_oracle(mesh: &TimeMesh, alpha: f64, n: usize) -> Vec<f64> {
        let tn = mesh.t(n);
        let mut out = vec![0.0; n];
        for k in 1..=n {
            let (a, b) = (mesh.t(k - 1), mesh.t(k));
            let integral = if k == n {
                quad_origin_singular(|r| omega(1.0 - alpha, r).unwrap(), b - a, alpha)
            } else {
                quad(|s| omega(1.0 - alpha, tn - s).unwrap(), a, b)
            };
            out[n - k] = integral / (b - a);
        }
        out
    }

    fn b_oracle(mesh: &TimeMesh, alpha: f64, n: usize, k: usize) -> f64 {
        let theta = alpha / 2.0;
        let ts = mesh.offset_time(n, theta);
        let (a, b) = (mesh.t(k - 1), mesh.t(k));
        let mid = 0.5 * (a + b);
        let integral = quad(|s| (s - mid) * omega(1.0 - alpha, ts - s).unwrap(), a, b);
        2.0 * integral / (mesh.tau(k) * (mesh.tau(k) + mesh.tau(k + 1)))
    }

    #[test]
    fn l1_rows_on_unit_mesh() {
        let m = uniform_unit(4);
        let r1 = l1_kernel_row(&m, 0.5, 1).unwrap();
        assert_rel(r1.a0(), core::f64::consts::FRAC_2_SQRT_PI, 1e-14);
        let r2 = l1_kernel_row(&m, 0.5, 2).unwrap();
        assert_rel(r2.get(0), core::f64::consts::FRAC_2_SQRT_PI, 1e-14);
        let g15 = core::f64::consts::PI.sqrt() / 2.0;
        assert_rel(r2.get(1), (2f64.sqrt() - 1.0) / g15, 1e-14);
        assert_rel(r2.get(1), 0.467_389_954_510_218_1, 1e-13);
        assert!(apply_discrete_caputo(&r2, &[3.0, 3.0, 3.0]).unwrap() == 0.0);
    }

    #[test]
    fn l1_leading_coefficient_closed_form() {
        let m = build_graded_mesh(3.0, 40, 1.0, None).unwrap();
        let alpha = 0.3;
        let g = libm::tgamma(2.0 - alpha);
        for n in 1..=40 {
            let r = l1_kernel_row(&m, alpha, n).unwrap();
            assert_rel(r.a0(), libm::pow(m.tau(n), -alpha) / g, 1e-13);
        }
    }

    #[test]
    fn l1_rows_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let alpha = rng.gen_range(0.05..0.95);
            let m = random_mesh(&mut rng, 12, 1.75, 1.0).unwrap();
            let n = rng.gen_range(1..=12);
            let got = l1_kernel_row(&m, alpha, n).unwrap();
            for (g, w) in got.coeffs.iter().zip(l1_oracle(&m, alpha, n)) {
                assert_rel(*g, w, 1e-10);
            }
        }
    }

    #[test]
    fn alikhanov_coefficients_on_unit_mesh() {
        let m = uniform_unit(3);
        let g15 = core::f64::consts::PI.sqrt() / 2.0;
        let a1 = alikhanov_a_coeffs(&m, 0.5, 1).unwrap();
        assert_rel(a1[0], 0.75f64.sqrt() / g15, 1e-14);
        assert_rel(a1[0], 0.9772050238, 1e-9);
        let a2 = alikhanov_a_coeffs(&m, 0.5, 2).unwrap();
        assert_rel(a2[1], (1.75f64.sqrt() - 0.75f64.sqrt()) / g15, 1e-14);
        assert_rel(a2[1], 0.515_500_306_554_621_7, 1e-13);

        let b2 = alikhanov_b_coeffs(&m, 0.5, 2).unwrap();
        // int_0^1 (s - 1/2)(1.75 - s)^(-1/2) ds / sqrt(pi), by quadrature
        let oracle = quad(|s| (s - 0.5) / (1.75 - s).sqrt(), 0.0, 1.0) / core::f64::consts::PI.sqrt();
        assert_rel(b2[1], oracle, 1e-12);
        assert_rel(b2[1], 0.017_931_863_101_134_53, 1e-12);
        assert!(alikhanov_b_coeffs(&m, 0.5, 1).is_err());

        let r1 = alikhanov_kernel_row(&m, 0.5, 1).unwrap();
        assert_rel(r1.a0(), 0.9772050238, 1e-9);
        let r2 = alikhanov_kernel_row(&m, 0.5, 2).unwrap();
        assert_rel(r2.get(0), a2[0] + b2[1], 1e-15);
        assert_rel(r2.get(1), a2[1] - b2[1], 1e-15);
        assert_rel(r2.get(0), 0.995_136_886_906_974_4, 1e-13);
        assert_rel(r2.get(1), 0.497_568_443_453_487_2, 1e-13);
    }

    #[test]
    fn b_coefficients_match_quadrature_and_are_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 300 {
            let alpha = rng.gen_range(0.05..0.95);
            let n_steps = rng.gen_range(3..40);
            let m = if rng.gen_bool(0.5) {
                random_mesh(&mut rng, n_steps, 1.75, 1.0).unwrap()
            } else {
                build_graded_mesh(rng.gen_range(1.0..4.0), n_steps.max(8), 1.0, None).unwrap()
            };
            let n = rng.gen_range(2..=m.len());
            let k = rng.gen_range(1..n);
            let b = alikhanov_b_coeffs(&m, alpha, n).unwrap()[n - k];
            assert!(b > 0.0);
            assert_rel(b, b_oracle(&m, alpha, n, k), 1e-10);
            checked += 1;
        }
    }

    #[test]
    fn printed_divisor_breaks_exactness() {
        // Dividing every a-coefficient by tau_n instead of tau_k loses
        // exactness on v(t) = t as soon as the mesh is nonuniform.
        let m = build_custom_mesh(&[0.0, 0.1, 0.3, 0.6, 1.0]).unwrap();
        let alpha = 0.4;
        let n = 4;
        let a = alikhanov_a_coeffs(&m, alpha, n).unwrap();
        let exact = omega(2.0 - alpha, m.offset_time(n, alpha / 2.0)).unwrap();
        let with_tau_k: f64 = (1..=n).map(|k| a[n - k] * m.tau(k)).sum();
        let with_tau_n: f64 = (1..=n).map(|k| a[n - k] * m.tau(k) * m.tau(k) / m.tau(n)).sum();
        assert_rel(with_tau_k, exact, 1e-13);
        assert!((with_tau_n - exact).abs() > 1e-3);
    }

    #[test]
    fn discrete_derivative_is_exact_on_linear_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let alpha = rng.gen_range(0.05..0.95);
            let m = random_mesh(&mut rng, 32, 1.75, 1.0).unwrap();
            for scheme in [Scheme::L1, Scheme::FracCn] {
                let table = KernelTable::build(&m, scheme, alpha).unwrap();
                let ups = local_consistency(&table, &m, |t| t, |t| omega(2.0 - alpha, t).unwrap());
                for (n, u) in ups.iter().enumerate() {
                    let scale = omega(2.0 - alpha, m.offset_time(n + 1, table.nu())).unwrap();
                    assert!(u.abs() <= 1e-12 * scale, "{scheme:?} n={}: {u}", n + 1);
                }
            }
        }
    }

    #[test]
    fn complementary_rows_on_unit_mesh() {
        let m = uniform_unit(2);
        let table = KernelTable::build(&m, Scheme::L1, 0.5).unwrap();
        let p1 = complementary_row(table.rows(), 1).unwrap();
        assert_rel(p1.coeffs[0], core::f64::consts::PI.sqrt() / 2.0, 1e-14);
        assert_rel(p1.coeffs[0], 0.8862269255, 1e-9);
        let p2 = complementary_row(table.rows(), 2).unwrap();
        let (a1, a2) = (table.row(1), table.row(2));
        let by_hand = (a2.get(0) - a2.get(1)) * (1.0 / a2.get(0)) / a1.get(0);
        assert_rel(p2.coeffs[1], by_hand, 1e-14);
        assert_rel(p2.coeffs[1], 0.519_139_713_590_015_8, 1e-13);
        let s = p2.coeffs[0] * a2.get(1) + p2.coeffs[1] * a1.get(0);
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(complementary_identity_deviation(&p1, table.rows()).unwrap(), (p1.coeffs[0] * a1.a0() - 1.0).abs());
    }

    #[test]
    fn identity_on_graded_and_random_meshes() {
        let m = build_graded_mesh(2.0, 64, 1.0, None).unwrap();
        let table = KernelTable::build(&m, Scheme::L1, 0.5).unwrap();
        let p = complementary_rows(table.rows()).unwrap();
        assert!(verify_complementary_identity(&p, table.rows()).unwrap() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_mesh(&mut rng, 64, 1.75, 1.0).unwrap();
        let table = KernelTable::build(&m, Scheme::FracCn, 0.5).unwrap();
        let p = complementary_rows(table.rows()).unwrap();
        assert!(verify_complementary_identity(&p, table.rows()).unwrap() < 1e-12);
        assert!(p.iter().all(|r| r.coeffs.iter().all(|&x| x >= 0.0)));
    }

    #[test]
    fn fast_convolution_matches_explicit_rows() {
        let m = build_graded_mesh(3.0, 48, 1.0, None).unwrap();
        for scheme in [Scheme::L1, Scheme::FracCn] {
            let table = KernelTable::build(&m, scheme, 0.4).unwrap();
            let p = complementary_rows(table.rows()).unwrap();
            let g: Vec<f64> = (1..=48).map(|j| 1.0 + (j as f64).sin()).collect();
            let fast = complementary_convolve(table.rows(), &g).unwrap();
            for (n, pr) in p.iter().enumerate() {
                let direct: f64 = (1..=n + 1).map(|j| pr.coeffs[n + 1 - j] * g[j - 1]).sum();
                assert_rel(fast[n], direct, 1e-12);
            }
        }
    }

    #[test]
    fn p_bound_holds_with_known_constants() {
        let m = build_graded_mesh(2.0, 64, 1.0, None).unwrap();
        for (scheme, pi_a) in [(Scheme::L1, 1.0), (Scheme::FracCn, 11.0 / 4.0)] {
            let table = KernelTable::build(&m, scheme, 0.5).unwrap();
            let p = complementary_rows(table.rows()).unwrap();
            for mm in [0u8, 1] {
                let margin = verify_p_bound(&p, &m, 0.5, mm, pi_a).unwrap();
                assert!(margin >= -1e-13, "{scheme:?} m={mm}: {margin}");
            }
            // with m = 1 the weights collapse to 1
            let direct: f64 = p[63].coeffs.iter().sum();
            let margin_last = pi_a * omega(1.5, 1.0).unwrap() - direct;
            assert!(verify_p_bound(&p, &m, 0.5, 1, pi_a).unwrap() <= margin_last + 1e-15);
        }
        assert!(verify_p_bound(&[], &m, 0.5, 2, 1.0).is_err());
    }

    #[test]
    fn assumption_checks() {
        let m = build_uniform_mesh(64, 1.0).unwrap();
        for &alpha in &[0.1, 0.5, 0.9] {
            let t = KernelTable::build(&m, Scheme::L1, alpha).unwrap();
            let r = verify_kernel_assumptions(&t, &m).unwrap();
            assert!(r.passes(), "{r:?}");
            assert!(r.pi_a <= 1.0 + 1e-12);
        }
        let m = build_graded_mesh(3.0, 128, 1.0, None).unwrap();
        let t = KernelTable::build(&m, Scheme::FracCn, 0.4).unwrap();
        let r = verify_kernel_assumptions(&t, &m).unwrap();
        assert!(r.passes(), "{r:?}");
        assert!(r.alikhanov.unwrap().min() > 0.0);
        assert!(r.pi_a <= 11.0 / 4.0);

        let bad = build_custom_mesh(&[0.0, 0.8, 0.9, 1.0]).unwrap();
        let t = KernelTable::build(&bad, Scheme::FracCn, 0.5).unwrap();
        let r = verify_kernel_assumptions(&t, &bad).unwrap();
        assert!(!r.passes());
        assert!(r.worst_location.is_some());
    }

    #[test]
    fn shape_errors() {
        let m = uniform_unit(3);
        assert!(l1_kernel_row(&m, 0.5, 0).is_err());
        assert!(l1_kernel_row(&m, 0.5, 4).is_err());
        assert!(l1_kernel_row(&m, 1.0, 1).is_err());
        let r = l1_kernel_row(&m, 0.5, 2).unwrap();
        assert!(apply_discrete_caputo(&r, &[0.0, 1.0]).is_err());
        let corrupt = [KernelRow { n: 1, nu: 0.0, alpha: 0.5, coeffs: vec![0.0] }];
        assert_eq!(complementary_row(&corrupt, 1), Err(Error::CorruptKernel { n: 1 }));
    }
}
