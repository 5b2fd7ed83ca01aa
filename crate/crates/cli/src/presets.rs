//! Parameter grids of the published convergence tables, with their printed
//! errors and orders for side-by-side comparison.

use subdiff_core::kernels::Scheme;

/// One column of a published table.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnPreset {
    pub label: &'static str,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    /// Printed `e(M, N)` per step count.
    pub paper_errors: &'static [f64],
    /// Printed orders; one fewer than the errors.
    pub paper_orders: &'static [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TablePreset {
    pub id: u8,
    pub title: &'static str,
    pub scheme: Scheme,
    pub example: u8,
    pub steps: &'static [usize],
    pub columns: Vec<ColumnPreset>,
}

/// Spatial order study: fixed `N`, varying `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPreset {
    pub id: u8,
    pub title: &'static str,
    pub scheme: Scheme,
    pub example: u8,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub steps: usize,
    pub intervals: &'static [usize],
    pub expected_order: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Temporal(TablePreset),
    Spatial(SpatialPreset),
}

pub const TABLE_IDS: std::ops::RangeInclusive<u8> = 1..=9;

const L1_STEPS: &[usize] = &[100, 200, 400, 800, 1600];
const CN_STEPS: &[usize] = &[128, 256, 512, 1024, 2048];
const CN_STEPS_LONG: &[usize] = &[128, 256, 512, 1024, 2048, 4096];

fn col(
    label: &'static str,
    alpha: f64,
    sigma: f64,
    gamma: f64,
    paper_errors: &'static [f64],
    paper_orders: &'static [f64],
) -> ColumnPreset {
    ColumnPreset {
        label,
        alpha,
        sigma,
        gamma,
        paper_errors,
        paper_orders,
    }
}

/// Preset for table `id` in `1..=9`.
pub fn preset(id: u8) -> Option<Preset> {
    let t = |title, scheme, example, steps, columns| {
        Some(Preset::Temporal(TablePreset {
            id,
            title,
            scheme,
            example,
            steps,
            columns,
        }))
    };
    match id {
        1 => t(
            "Example 1 (L1), sigma = 2 - alpha, gamma = 1",
            Scheme::L1,
            1,
            L1_STEPS,
            vec![
                col("alpha=0.1, sigma=1.9", 0.1, 1.9, 1.0, &[3.84e-06, 1.08e-06, 3.02e-07, 8.46e-08, 2.37e-08], &[1.83, 1.84, 1.84, 1.84]),
                col("alpha=0.5, sigma=1.5", 0.5, 1.5, 1.0, &[1.71e-04, 6.56e-05, 2.48e-05, 9.27e-06, 3.43e-06], &[1.38, 1.40, 1.42, 1.43]),
                col("alpha=0.9, sigma=1.1", 0.9, 1.1, 1.0, &[1.03e-03, 5.36e-04, 2.75e-04, 1.40e-04, 7.04e-05], &[0.94, 0.96, 0.98, 0.99]),
            ],
        ),
        2 => t(
            "Example 1 (L1), alpha = 0.5, sigma = 0.5",
            Scheme::L1,
            1,
            L1_STEPS,
            vec![
                col("gamma=1", 0.5, 0.5, 1.0, &[2.57e-02, 1.88e-02, 1.37e-02, 9.88e-03, 7.11e-03], &[0.45, 0.46, 0.47, 0.47]),
                col("gamma=3", 0.5, 0.5, 3.0, &[6.34e-04, 2.34e-04, 8.56e-05, 3.10e-05, 1.11e-05], &[1.43, 1.45, 1.47, 1.48]),
                col("gamma=3.75", 0.5, 0.5, 3.75, &[4.66e-04, 1.68e-04, 6.01e-05, 2.14e-05, 7.63e-06], &[1.47, 1.48, 1.49, 1.49]),
            ],
        ),
        3 => t(
            "Example 1 (L1), alpha = 0.5, sigma = 0.75",
            Scheme::L1,
            1,
            L1_STEPS,
            vec![
                col("gamma=1", 0.5, 0.75, 1.0, &[3.70e-03, 2.28e-03, 1.39e-03, 8.46e-04, 5.12e-04], &[0.70, 0.71, 0.72, 0.72]),
                col("gamma=2", 0.5, 0.75, 2.0, &[2.26e-04, 8.48e-05, 3.14e-05, 1.15e-05, 4.18e-06], &[1.41, 1.43, 1.45, 1.46]),
                col("gamma=2.5", 0.5, 0.75, 2.5, &[1.47e-04, 5.30e-05, 1.90e-05, 6.79e-06, 2.42e-06], &[1.47, 1.48, 1.48, 1.49]),
            ],
        ),
        4 => t(
            "Example 1 (L1), alpha = 0.5, sigma = 1.25",
            Scheme::L1,
            1,
            L1_STEPS,
            vec![
                col("gamma=1", 0.5, 1.25, 1.0, &[2.75e-04, 1.22e-04, 5.33e-05, 2.31e-05, 9.92e-06], &[1.17, 1.20, 1.21, 1.22]),
                col("gamma=1.2", 0.5, 1.25, 1.2, &[1.18e-04, 4.52e-05, 1.70e-05, 6.34e-06, 2.34e-06], &[1.39, 1.41, 1.43, 1.44]),
                col("gamma=1.8", 0.5, 1.25, 1.8, &[7.76e-05, 2.75e-05, 9.55e-06, 3.14e-06, 9.96e-07], &[1.49, 1.53, 1.60, 1.66]),
            ],
        ),
        5 => t(
            "Example 2 (FracCN), sigma = 1 + alpha, gamma = 1",
            Scheme::FracCn,
            2,
            CN_STEPS_LONG,
            vec![
                col("alpha=0.4, sigma=1.4", 0.4, 1.4, 1.0, &[3.42e-05, 1.10e-05, 3.73e-06, 1.28e-06, 4.50e-07, 1.60e-07], &[1.63, 1.57, 1.54, 1.51, 1.49]),
                col("alpha=0.6, sigma=1.6", 0.6, 1.6, 1.0, &[3.43e-05, 8.73e-06, 2.23e-06, 5.40e-07, 1.33e-07, 5.02e-08], &[1.97, 1.96, 1.90, 1.71, 1.71]),
                col("alpha=0.8, sigma=1.8", 0.8, 1.8, 1.0, &[2.65e-05, 6.76e-06, 1.73e-06, 4.61e-07, 1.27e-07, 3.57e-08], &[1.97, 1.96, 1.92, 1.86, 1.83]),
            ],
        ),
        6 => t(
            "Example 2 (FracCN), alpha = 0.4, sigma = 1.2",
            Scheme::FracCn,
            2,
            CN_STEPS,
            vec![
                col("gamma=1", 0.4, 1.2, 1.0, &[6.17e-05, 2.40e-05, 9.49e-06, 3.83e-06, 1.57e-06], &[1.36, 1.34, 1.31, 1.29]),
                col("gamma=5/3", 0.4, 1.2, 5.0 / 3.0, &[1.32e-05, 3.19e-06, 7.98e-07, 1.91e-07, 4.61e-08], &[2.05, 2.00, 2.06, 2.05]),
                col("gamma=2", 0.4, 1.2, 2.0, &[1.39e-05, 3.36e-06, 8.16e-07, 1.96e-07, 4.70e-08], &[2.04, 2.04, 2.06, 2.06]),
            ],
        ),
        7 => t(
            "Example 2 (FracCN), alpha = 0.4, sigma = 0.8",
            Scheme::FracCn,
            2,
            CN_STEPS,
            vec![
                col("gamma=2", 0.4, 0.8, 2.0, &[2.43e-05, 5.59e-06, 1.74e-06, 5.69e-07, 1.87e-07], &[2.12, 1.69, 1.61, 1.61]),
                col("gamma=5/2", 0.4, 0.8, 2.5, &[2.49e-05, 5.72e-06, 1.29e-06, 2.53e-07, 4.67e-08], &[2.12, 2.15, 2.35, 2.43]),
                col("gamma=3", 0.4, 0.8, 3.0, &[2.75e-05, 6.35e-06, 1.43e-06, 2.84e-07, 5.66e-08], &[2.12, 2.15, 2.33, 2.33]),
            ],
        ),
        8 => t(
            "Example 2 (FracCN), alpha = 0.4, sigma = 0.4",
            Scheme::FracCn,
            2,
            CN_STEPS,
            vec![
                col("gamma=2", 0.4, 0.4, 2.0, &[3.35e-03, 1.91e-03, 1.09e-03, 6.21e-04, 3.56e-04], &[0.81, 0.81, 0.81, 0.80]),
                col("gamma=5/2", 0.4, 0.4, 2.5, &[1.50e-03, 7.41e-04, 3.71e-04, 1.85e-04, 9.25e-05], &[1.01, 1.00, 1.00, 1.00]),
                col("gamma=5", 0.4, 0.4, 5.0, &[4.56e-04, 1.01e-04, 2.20e-05, 4.90e-06, 1.11e-06], &[2.17, 2.20, 2.17, 2.14]),
            ],
        ),
        9 => Some(Preset::Spatial(SpatialPreset {
            id,
            title: "Spatial order, Example 2 (FracCN), alpha = 0.4, sigma = 2, gamma = 2, N = 4096",
            scheme: Scheme::FracCn,
            example: 2,
            alpha: 0.4,
            sigma: 2.0,
            gamma: 2.0,
            steps: 4096,
            intervals: &[16, 32, 64, 128],
            expected_order: 2.0,
        })),
        _ => None,
    }
}
