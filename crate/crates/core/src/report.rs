use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Increments below this are treated as roundoff when estimating rates.
const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Convergence record of a fixed-point loop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// relative increment (or residual) per iteration
    pub residual_history: Vec<f64>,
    /// ratio of successive increments, the observed contraction constant
    pub increment_ratios: Vec<f64>,
    pub converged: bool,
}

impl SolverReport {
    /// Records one iteration's increment and returns the new ratio, if any.
    pub fn push(&mut self, increment: f64) -> Option<f64> {
        self.iterations += 1;
        let ratio = self.residual_history.last().and_then(|&prev| {
            (prev > 0.0).then(|| increment / prev)
        });
        if let Some(r) = ratio {
            self.increment_ratios.push(r);
        }
        self.residual_history.push(increment);
        ratio
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.increment_ratios.iter().copied().reduce(f64::max)
    }

    /// Ratio over the last few iterations before the increment reached the
    /// roundoff floor; a steadier estimate than the final ratio.
    pub fn asymptotic_ratio(&self) -> Option<f64> {
        let usable = self.usable_ratios();
        usable.last().copied().or_else(|| self.increment_ratios.first().copied())
    }

    /// Geometric mean of the ratios above the roundoff floor. Robust when
    /// successive ratios alternate, as they do for lagged convection.
    pub fn mean_ratio(&self) -> Option<f64> {
        let usable = self.usable_ratios();
        if usable.is_empty() {
            return self.increment_ratios.first().copied();
        }
        let log_sum: f64 = usable.iter().map(|r| r.ln()).sum();
        Some((log_sum / usable.len() as f64).exp())
    }

    fn usable_ratios(&self) -> Vec<f64> {
        self.residual_history
            .windows(2)
            .filter(|w| w[1] > ROUNDOFF_FLOOR && w[0] > ROUNDOFF_FLOOR)
            .map(|w| w[1] / w[0])
            .collect()
    }

    pub fn final_increment(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }

    /// CSV with columns `iter,residual,ratio`; the first ratio is empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,residual,ratio\n");
        for (i, r) in self.residual_history.iter().enumerate() {
            let ratio = if i == 0 {
                String::new()
            } else {
                self.increment_ratios
                    .get(i - 1)
                    .map(|x| format!("{x:.17e}"))
                    .unwrap_or_default()
            };
            writeln!(s, "{},{:.17e},{}", i + 1, r, ratio).unwrap();
        }
        s
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
