//! Nonuniform time meshes `0 = t_0 < t_1 < ... < t_N = T`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// An immutable time mesh. Steps and ratios are derived from the time
/// points at construction and never set independently.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    times: Vec<f64>,
    steps: Vec<f64>,
    ratios: Vec<f64>,
    tau_max: f64,
    gamma_hint: Option<f64>,
}

impl TimeMesh {
    fn from_times(times: Vec<f64>, gamma_hint: Option<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidMesh("a mesh needs at least two time points"));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidMesh("the first time point must be 0"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidMesh("time points must be finite"));
        }
        let steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        if steps.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidMesh("time points must be strictly increasing"));
        }
        let ratios = steps.windows(2).map(|w| w[0] / w[1]).collect();
        let tau_max = steps.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            times,
            steps,
            ratios,
            tau_max,
            gamma_hint,
        })
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `t_k` for `0 <= k <= N`.
    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.times[k]
    }

    /// `tau_k = t_k - t_(k-1)` for `1 <= k <= N`.
    #[inline]
    pub fn tau(&self, k: usize) -> f64 {
        self.steps[k - 1]
    }

    /// `rho_k = tau_k / tau_(k+1)` for `1 <= k <= N - 1`.
    #[inline]
    pub fn rho(&self, k: usize) -> f64 {
        self.ratios[k - 1]
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn gamma_hint(&self) -> Option<f64> {
        self.gamma_hint
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    /// Offset point `t_(n-nu) = nu t_(n-1) + (1 - nu) t_n`.
    #[inline]
    pub fn offset_time(&self, n: usize, nu: f64) -> f64 {
        self.times[n] - nu * self.steps[n - 1]
    }
}

/// Default size of the graded phase, `T0 = min(1/gamma, 2^-gamma)`.
pub fn default_graded_span(gamma: f64) -> f64 {
    (1.0 / gamma).min(libm::pow(2.0, -gamma))
}

/// Number of graded cells `N0 = ceil(gamma N T0 / (T + (gamma - 1) T0))`.
///
/// A relative slack of a few ulps keeps exact integers such as `5.000000000000001`
/// from rounding up.
pub fn graded_cell_count(gamma: f64, n: usize, t_final: f64, t0: f64) -> usize {
    let x = gamma * n as f64 * t0 / (t_final + (gamma - 1.0) * t0);
    libm::ceil(x * (1.0 - 8.0 * f64::EPSILON)) as usize
}

/// Initially graded mesh: `t_k = (k/N0)^gamma T0` for `k <= N0`, then a
/// uniform phase of `N - N0` equal steps landing exactly on `T`.
pub fn build_graded_mesh(gamma: f64, n: usize, t_final: f64, t0: Option<f64>) -> Result<TimeMesh> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::Domain {
            what: "grading parameter must be >= 1",
            value: gamma,
        });
    }
    if n < 2 {
        return Err(Error::InvalidMesh("graded mesh needs N >= 2"));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::Domain {
            what: "final time must be positive",
            value: t_final,
        });
    }
    let t0 = t0.unwrap_or_else(|| default_graded_span(gamma).min(t_final));
    if !(t0 > 0.0 && t0 <= t_final) {
        return Err(Error::Domain {
            what: "graded span T0 must lie in (0, T]",
            value: t0,
        });
    }
    let n0 = graded_cell_count(gamma, n, t_final, t0);
    if n0 >= n {
        return Err(Error::InvalidMesh(
            "graded phase consumes every step; decrease T0 or increase N",
        ));
    }
    let n0 = n0.max(1);
    let mut times = Vec::with_capacity(n + 1);
    for k in 0..=n0 {
        times.push(libm::pow(k as f64 / n0 as f64, gamma) * t0);
    }
    times[n0] = t0;
    let uniform = (t_final - t0) / (n - n0) as f64;
    for k in n0 + 1..=n {
        times.push(t0 + (k - n0) as f64 * uniform);
    }
    times[n] = t_final;
    TimeMesh::from_times(times, Some(gamma))
}

/// Uniform mesh `t_k = k T / N`.
pub fn build_uniform_mesh(n: usize, t_final: f64) -> Result<TimeMesh> {
    if n < 1 {
        return Err(Error::InvalidMesh("uniform mesh needs N >= 1"));
    }
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * t_final / n as f64).collect();
    times[n] = t_final;
    TimeMesh::from_times(times, Some(1.0))
}

/// Mesh from explicit time points (first entry 0, strictly increasing).
pub fn build_custom_mesh(times: &[f64]) -> Result<TimeMesh> {
    TimeMesh::from_times(times.to_vec(), None)
}

const RANDOM_BAND_MIN: f64 = 1.0 / 16.0;
const RANDOM_BAND_MAX: f64 = 16.0;

/// Random mesh whose adjacent ratios `tau_k / tau_(k+1)` are drawn uniformly
/// from `[1/rho, rho]`, rescaled to end at `t_final`. A draw that would take
/// the step outside `[tau_1/16, 16 tau_1]` is inverted.
pub fn random_mesh<R: Rng + ?Sized>(rng: &mut R, n: usize, rho: f64, t_final: f64) -> Result<TimeMesh> {
    if n < 1 {
        return Err(Error::InvalidMesh("random mesh needs N >= 1"));
    }
    if !(rho >= 1.0) {
        return Err(Error::Domain {
            what: "ratio bound must be >= 1",
            value: rho,
        });
    }
    let mut steps = Vec::with_capacity(n);
    let mut tau = 1.0;
    steps.push(tau);
    for _ in 1..n {
        let mut r: f64 = if rho > 1.0 { rng.gen_range(1.0 / rho..=rho) } else { 1.0 };
        // keep steps within a fixed band so time differences stay well conditioned
        if !(RANDOM_BAND_MIN..=RANDOM_BAND_MAX).contains(&(tau / r)) {
            r = 1.0 / r;
        }
        tau /= r;
        steps.push(tau);
    }
    let total: f64 = steps.iter().sum();
    let mut times = Vec::with_capacity(n + 1);
    times.push(0.0);
    let mut acc = 0.0;
    for s in &steps {
        acc += s;
        times.push(acc * t_final / total);
    }
    times[n] = t_final;
    TimeMesh::from_times(times, None)
}

/// Executable diagnostics for the step-ratio and grading assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub rho_max: f64,
    pub rho_bound: f64,
    pub ratio_ok: bool,
    /// `max_k tau_k / (tau * min(1, t_k^(1 - 1/gamma)))`
    pub step_constant: f64,
    /// `max_(k>=2) t_k / t_(k-1)`
    pub time_ratio_constant: f64,
    /// `max_(k>=2) (tau_k/t_k) / (tau_(k-1)/t_(k-1))`
    pub relative_step_constant: f64,
    /// `ln(tau_1) / ln(tau)`, empirical exponent of `tau_1 = O(tau^gamma)`;
    /// absent when `tau >= 1`.
    pub tau1_order: Option<f64>,
}

impl MeshReport {
    /// Largest of the three grading constants.
    pub fn grading_constant(&self) -> f64 {
        self.step_constant
            .max(self.time_ratio_constant)
            .max(self.relative_step_constant)
    }
}

pub fn mesh_diagnostics(mesh: &TimeMesh, gamma: f64, rho_bound: f64) -> MeshReport {
    let rho_max = mesh.max_ratio();
    let tau = mesh.tau_max();
    let expo = 1.0 - 1.0 / gamma;
    let mut step_constant: f64 = 0.0;
    for k in 1..=mesh.len() {
        let scale = tau * libm::pow(mesh.t(k), expo).min(1.0);
        step_constant = step_constant.max(mesh.tau(k) / scale);
    }
    let mut time_ratio_constant: f64 = 0.0;
    let mut relative_step_constant: f64 = 0.0;
    for k in 2..=mesh.len() {
        time_ratio_constant = time_ratio_constant.max(mesh.t(k) / mesh.t(k - 1));
        let now = mesh.tau(k) / mesh.t(k);
        let before = mesh.tau(k - 1) / mesh.t(k - 1);
        relative_step_constant = relative_step_constant.max(now / before);
    }
    let tau1_order = (tau < 1.0).then(|| libm::log(mesh.tau(1)) / libm::log(tau));
    MeshReport {
        rho_max,
        rho_bound,
        ratio_ok: rho_max <= rho_bound,
        step_constant,
        time_ratio_constant,
        relative_step_constant,
        tau1_order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn graded_mesh_with_unit_grading_is_uniform() {
        let m = build_graded_mesh(1.0, 10, 1.0, Some(0.5)).unwrap();
        assert_eq!(graded_cell_count(1.0, 10, 1.0, 0.5), 5);
        for k in 0..=10 {
            assert!((m.t(k) - k as f64 / 10.0).abs() < 1e-15);
        }
        for k in 1..=10 {
            assert!((m.tau(k) - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn graded_mesh_quadratic_example() {
        let m = build_graded_mesh(2.0, 8, 1.0, Some(0.25)).unwrap();
        let want = [0.0, 0.015625, 0.0625, 0.140625, 0.25];
        for (k, w) in want.iter().enumerate() {
            assert!((m.t(k) - w).abs() < 1e-15);
        }
        for k in 5..=8 {
            assert!((m.tau(k) - 0.1875).abs() < 1e-15);
        }
        assert_eq!(m.t(8), 1.0);
    }

    #[test]
    fn graded_mesh_guard_rejects_full_graded_phase() {
        assert_eq!(graded_cell_count(3.0, 4, 1.0, 0.9), 4);
        assert!(build_graded_mesh(3.0, 4, 1.0, Some(0.9)).is_err());
        assert!(build_graded_mesh(0.5, 10, 1.0, None).is_err());
        assert!(build_graded_mesh(2.0, 1, 1.0, None).is_err());
    }

    #[test]
    fn custom_mesh_steps_and_ratios() {
        let m = build_custom_mesh(&[0.0, 1.0]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.tau(1), 1.0);
        assert!(m.ratios().is_empty());

        let m = build_custom_mesh(&[0.0, 0.25, 0.75, 1.5]).unwrap();
        assert_eq!(m.steps(), &[0.25, 0.5, 0.75]);
        assert!((m.rho(1) - 0.5).abs() < 1e-15);
        assert!((m.rho(2) - 2.0 / 3.0).abs() < 1e-15);

        assert!(build_custom_mesh(&[0.0, 0.5, 0.5]).is_err());
        assert!(build_custom_mesh(&[0.1, 0.5]).is_err());
        assert!(build_custom_mesh(&[0.0, -0.5]).is_err());
    }

    #[test]
    fn diagnostics_on_uniform_and_graded_meshes() {
        let m = build_uniform_mesh(16, 1.0).unwrap();
        let r = mesh_diagnostics(&m, 1.0, 1.75);
        assert!((r.rho_max - 1.0).abs() < 1e-12);
        assert!(r.ratio_ok);
        assert!(r.grading_constant().is_finite());

        let m = build_graded_mesh(2.0, 8, 1.0, Some(0.25)).unwrap();
        let want = [1.0 / 3.0, 0.6, 0.078125 / 0.109375, 0.109375 / 0.1875, 1.0, 1.0, 1.0];
        for (k, w) in want.iter().enumerate() {
            assert!((m.rho(k + 1) - w).abs() < 1e-12, "rho_{}", k + 1);
        }
        let r = mesh_diagnostics(&m, 2.0, 1.75);
        assert!((r.rho_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_flag_adversarial_ratio() {
        let m = build_custom_mesh(&[0.0, 0.8, 0.9, 1.0]).unwrap();
        let r = mesh_diagnostics(&m, 1.0, 1.75);
        assert!((r.rho_max - 8.0).abs() < 1e-12);
        assert!(!r.ratio_ok);
    }

    #[test]
    fn graded_ratios_never_exceed_one() {
        for &gamma in &[1.0, 1.5, 2.0, 3.0, 5.0] {
            let mut n = 8;
            while n <= 1024 {
                let m = build_graded_mesh(gamma, n, 1.0, None).unwrap();
                assert!(m.max_ratio() <= 1.0 + 1e-12, "gamma={gamma} N={n}");
                n *= 2;
            }
        }
    }

    #[test]
    fn grading_constants_stay_bounded_under_refinement() {
        for &gamma in &[1.0, 2.0, 3.0, 5.0] {
            let mut n = 32;
            while n <= 1024 {
                let a = mesh_diagnostics(&build_graded_mesh(gamma, n, 1.0, None).unwrap(), gamma, 1.75);
                let b = mesh_diagnostics(&build_graded_mesh(gamma, 2 * n, 1.0, None).unwrap(), gamma, 1.75);
                for (x, y) in [
                    (a.step_constant, b.step_constant),
                    (a.time_ratio_constant, b.time_ratio_constant),
                    (a.relative_step_constant, b.relative_step_constant),
                ] {
                    let q = y / x;
                    assert!((0.5..=2.0).contains(&q), "gamma={gamma} N={n}: {x} -> {y}");
                }
                n *= 2;
            }
        }
    }

    #[test]
    fn random_meshes_respect_ratio_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_mesh(&mut rng, 64, 1.75, 1.0).unwrap();
            assert_eq!(m.final_time(), 1.0);
            assert!(m.ratios().iter().all(|&r| (1.0 / 1.75 * (1.0 - 1e-12)..=1.75 * (1.0 + 1e-12)).contains(&r)));
        }
    }
}
