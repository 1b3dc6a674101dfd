//! Streaming window statistics and run summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::queueing::TrafficEstimate;

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Sample variance over squared sample mean.
    pub fn scv(&self) -> Option<f64> {
        if self.count < 2 || self.mean == 0.0 {
            return None;
        }
        let var = self.m2 / (self.count - 1) as f64;
        Some(var / (self.mean * self.mean))
    }
}

/// Raw observations collected during one observation window.
#[derive(Debug, Clone, Default)]
pub struct WindowStats {
    pub arrivals: u64,
    last_arrival: Option<f64>,
    gaps: Moments,
    services: Moments,
}

impl WindowStats {
    /// Starts a window, remembering the last arrival of the previous window
    /// so the first gap can be measured.
    pub fn carry_over(previous: &WindowStats) -> Self {
        WindowStats {
            last_arrival: previous.last_arrival,
            ..WindowStats::default()
        }
    }

    pub fn record_arrival(&mut self, t: f64) {
        self.arrivals += 1;
        if let Some(prev) = self.last_arrival {
            self.gaps.push(t - prev);
        }
        self.last_arrival = Some(t);
    }

    pub fn record_completion(&mut self, service_time: f64) {
        self.services.push(service_time);
    }

    /// Per-window traffic estimate. Quantities the window cannot support
    /// (no gaps, no completions) are carried forward from `fallback`.
    pub fn estimate(&self, window_hours: f64, fallback: &TrafficEstimate) -> TrafficEstimate {
        TrafficEstimate {
            lambda: self.arrivals as f64 / window_hours,
            mean_service: self
                .services
                .mean()
                .filter(|m| *m > 0.0)
                .unwrap_or(fallback.mean_service),
            ca2: self.gaps.scv().unwrap_or(fallback.ca2),
            cs2: self.services.scv().unwrap_or(fallback.cs2),
        }
    }
}

/// Two-sided 95% Student-t confidence interval for the mean of `samples`.
/// `None` with fewer than two samples.
pub fn t_interval_95(samples: &[f64]) -> Option<ConfidenceInterval> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?.inverse_cdf(0.975);
    let half_width = t * (var / n as f64).sqrt();
    Some(ConfidenceInterval {
        mean,
        half_width,
        low: mean - half_width,
        high: mean + half_width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub half_width: f64,
    pub low: f64,
    pub high: f64,
}

impl ConfidenceInterval {
    pub fn overlaps(&self, other: &ConfidenceInterval) -> bool {
        self.low <= other.high && other.low <= self.high
    }
}
