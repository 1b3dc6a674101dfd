//! Double exponential (Holt) smoothing of per-window arrival rates.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Level/trend state of a Holt smoother plus the recent observations used
/// to refit its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastState {
    smoothed: Option<f64>,
    trend: f64,
    trend_pending: bool,
    alpha: f64,
    gamma: f64,
    history: VecDeque<f64>,
    history_cap: usize,
}

fn check_weight(name: &str, w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::config(name, format!("smoothing weight {w} must lie in [0, 1]")));
    }
    Ok(())
}

impl ForecastState {
    /// An empty smoother. The first observation sets the level, the second
    /// sets the trend to their difference; afterwards the Holt recurrences
    /// apply.
    pub fn new(alpha: f64, gamma: f64, history_cap: usize) -> Result<Self> {
        check_weight("policy.alpha", alpha)?;
        check_weight("policy.gamma", gamma)?;
        Ok(ForecastState {
            smoothed: None,
            trend: 0.0,
            trend_pending: false,
            alpha,
            gamma,
            history: VecDeque::new(),
            history_cap: history_cap.max(1),
        })
    }

    /// A smoother already holding level `smoothed` and trend `trend`.
    pub fn initialized(smoothed: f64, trend: f64, alpha: f64, gamma: f64) -> Result<Self> {
        let mut s = Self::new(alpha, gamma, usize::MAX)?;
        s.smoothed = Some(smoothed);
        s.trend = trend;
        Ok(s)
    }

    pub fn smoothed(&self) -> Option<f64> {
        self.smoothed
    }

    pub fn trend(&self) -> f64 {
        self.trend
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn history(&self) -> &VecDeque<f64> {
        &self.history
    }

    pub fn set_weights(&mut self, alpha: f64, gamma: f64) -> Result<()> {
        check_weight("policy.alpha", alpha)?;
        check_weight("policy.gamma", gamma)?;
        self.alpha = alpha;
        self.gamma = gamma;
        Ok(())
    }

    /// Folds one observed arrival rate into the level and trend.
    pub fn update(&mut self, lambda_observed: f64) {
        match self.smoothed {
            None => {
                self.smoothed = Some(lambda_observed);
                self.trend = 0.0;
                self.trend_pending = true;
            }
            Some(prev) => {
                if self.trend_pending {
                    self.trend = lambda_observed - prev;
                    self.trend_pending = false;
                }
                let (s, b) = holt_step(prev, self.trend, lambda_observed, self.alpha, self.gamma);
                self.smoothed = Some(s);
                self.trend = b;
            }
        }
        self.history.push_back(lambda_observed);
        while self.history.len() > self.history_cap {
            self.history.pop_front();
        }
    }

    /// One-step-ahead forecast `max(0, S + b)`, or `None` before any observation.
    pub fn forecast_next(&self) -> Option<f64> {
        self.smoothed.map(|s| (s + self.trend).max(0.0))
    }

    /// Refits the weights on the retained history. Histories shorter than
    /// four observations leave the weights unchanged.
    pub fn refit(&mut self, grid_step: f64) -> Result<()> {
        let series: Vec<f64> = self.history.iter().copied().collect();
        if let Some((a, g)) = refit_smoothing(&series, grid_step)? {
            self.alpha = a;
            self.gamma = g;
        }
        Ok(())
    }
}

fn holt_step(s_prev: f64, b_prev: f64, y: f64, alpha: f64, gamma: f64) -> (f64, f64) {
    let s = alpha * y + (1.0 - alpha) * (s_prev + b_prev);
    let b = gamma * (s - s_prev) + (1.0 - gamma) * b_prev;
    (s, b)
}

/// Sum of squared one-step-ahead errors of a Holt smoother over `series`,
/// using the level/trend initialization of `ForecastState`.
pub fn one_step_sse(series: &[f64], alpha: f64, gamma: f64) -> f64 {
    if series.len() < 3 {
        return 0.0;
    }
    let mut s = series[1];
    let mut b = series[1] - series[0];
    let mut sse = 0.0;
    for &y in &series[2..] {
        let err = y - (s + b);
        sse += err * err;
        (s, b) = holt_step(s, b, y, alpha, gamma);
    }
    sse
}

/// Grid points `0, step, 2 step, ..., 1` along one weight axis.
pub fn weight_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::config("policy.grid_step", "must lie in (0, 1]"));
    }
    let cells = (1.0 / step).round() as usize;
    Ok((0..=cells).map(|i| (i as f64 * step).min(1.0)).collect())
}

/// Least-squares `(alpha, gamma)` over a square grid, ties broken by the
/// smallest alpha and then the smallest gamma. Returns `None` when the
/// history is too short to fit.
pub fn refit_smoothing(history: &[f64], grid_step: f64) -> Result<Option<(f64, f64)>> {
    let grid = weight_grid(grid_step)?;
    if history.len() < 4 {
        return Ok(None);
    }
    let mut best = (grid[0], grid[0]);
    let mut best_sse = f64::INFINITY;
    for &a in &grid {
        for &g in &grid {
            let sse = one_step_sse(history, a, g);
            if sse < best_sse {
                best_sse = sse;
                best = (a, g);
            }
        }
    }
    Ok(Some(best))
}
