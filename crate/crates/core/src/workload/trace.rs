//! Piecewise-constant arrival-rate traces.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Duration in hours covered by the last breakpoint of a trace.
pub const LAST_SEGMENT_HOURS: f64 = 1.0;

/// Arrival rate over time: `scale * raw_rate` where the raw rate is the value
/// of the latest breakpoint at or before `t`. Past the final segment the
/// last rate holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTrace {
    breakpoints: Vec<(f64, f64)>,
    scale: f64,
}

impl RateTrace {
    pub fn new(breakpoints: Vec<(f64, f64)>, scale: f64) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::domain("a rate trace needs at least one breakpoint"));
        }
        for (i, &(t, r)) in breakpoints.iter().enumerate() {
            if !t.is_finite() || !r.is_finite() || r < 0.0 {
                return Err(Error::domain(format!("breakpoint {i} ({t}, {r}) is invalid")));
            }
            if i > 0 && t <= breakpoints[i - 1].0 {
                return Err(Error::domain(format!(
                    "breakpoint times must be strictly increasing (row {i})"
                )));
            }
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::domain(format!("trace scale {scale} is invalid")));
        }
        Ok(RateTrace { breakpoints, scale })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0].0
    }

    /// End of the last segment.
    pub fn end(&self) -> f64 {
        self.breakpoints.last().map_or(0.0, |b| b.0) + LAST_SEGMENT_HOURS
    }

    fn segment(&self, t: f64) -> usize {
        self.breakpoints
            .partition_point(|b| b.0 <= t)
            .saturating_sub(1)
    }

    /// Scaled arrival rate at `t`.
    pub fn rate(&self, t: f64) -> f64 {
        self.scale * self.breakpoints[self.segment(t)].1
    }

    pub fn peak_rate(&self) -> f64 {
        self.scale * self.breakpoints.iter().map(|b| b.1).fold(0.0, f64::max)
    }

    /// First breakpoint after `t` whose rate is positive.
    pub fn next_positive_after(&self, t: f64) -> Option<f64> {
        self.breakpoints
            .iter()
            .find(|b| b.0 > t && b.1 > 0.0)
            .map(|b| b.0)
    }

    /// Time-average of the raw (unscaled) rate over `[start, end]`.
    pub fn raw_time_average(&self) -> f64 {
        self.raw_integral(self.start(), self.end()) / (self.end() - self.start())
    }

    fn raw_integral(&self, t0: f64, t1: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(t, r)) in self.breakpoints.iter().enumerate() {
            let seg_end = self
                .breakpoints
                .get(i + 1)
                .map_or(f64::INFINITY, |b| b.0);
            let seg_start = if i == 0 { f64::NEG_INFINITY } else { t };
            let lo = seg_start.max(t0);
            let hi = seg_end.min(t1);
            if hi > lo {
                total += r * (hi - lo);
            }
        }
        total
    }

    /// Expected number of arrivals in `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        self.scale * self.raw_integral(t0, t1)
    }

    /// Mean scaled rate over `[t0, t1]`.
    pub fn mean_rate(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return self.rate(t0);
        }
        self.integral(t0, t1) / (t1 - t0)
    }

    /// Writes the raw breakpoints as `hour,rate` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["hour", "rate"])?;
        for &(h, r) in &self.breakpoints {
            w.write_record([format!("{h}"), format!("{r}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses a `hour,rate` CSV into raw breakpoints.
pub fn parse_trace<R: Read>(input: R, path: &Path) -> Result<Vec<(f64, f64)>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "hour" || &headers[1] != "rate" {
        return Err(parse_err(1, "expected header `hour,rate`".into()));
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", record.len())));
        }
        let hour: f64 = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad hour `{}`", &record[0])))?;
        let rate: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad rate `{}`", &record[1])))?;
        if !hour.is_finite() || !rate.is_finite() || rate < 0.0 {
            return Err(parse_err(line, "hour must be finite and rate non-negative".into()));
        }
        if let Some(&(prev, _)) = points.last() {
            if hour <= prev {
                return Err(parse_err(line, format!("hour {hour} does not follow {prev}")));
            }
        }
        points.push((hour, rate));
    }
    if points.is_empty() {
        return Err(parse_err(1, "trace has no rows".into()));
    }
    Ok(points)
}

/// Scale that makes the time-averaged offered load of `raw` equal
/// `target_mean_load * capacity`.
pub fn scale_for_load(raw: &RateTrace, target_mean_load: f64, capacity: u64, mean_service: f64) -> Result<f64> {
    if !(target_mean_load > 0.0 && target_mean_load.is_finite()) {
        return Err(Error::config("experiment.trace_load", "must be positive"));
    }
    let avg = raw.raw_time_average();
    if avg <= 0.0 {
        return Err(Error::domain("trace has zero average rate and cannot be scaled"));
    }
    Ok(target_mean_load * capacity as f64 / (mean_service * avg))
}

/// Reads a trace file and scales it to the requested mean load.
pub fn load_trace(
    path: &Path,
    target_mean_load: f64,
    capacity: u64,
    mean_service: f64,
) -> Result<RateTrace> {
    let file = std::fs::File::open(path)?;
    let points = parse_trace(file, path)?;
    let raw = RateTrace::new(points, 1.0)?;
    let scale = scale_for_load(&raw, target_mean_load, capacity, mean_service)?;
    Ok(raw.with_scale(scale))
}

/// Knobs of the synthetic demand trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTraceSpec {
    pub hours: usize,
    /// Linear growth over the whole trace, as a fraction of the mean.
    pub trend: f64,
    pub monthly_amplitude: f64,
    pub weekly_amplitude: f64,
    pub daily_amplitude: f64,
    /// Expected spikes per day.
    pub spike_rate: f64,
    pub spike_height: f64,
    /// Hour-to-hour multiplicative noise (standard deviation).
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticTraceSpec {
    fn default() -> Self {
        SyntheticTraceSpec {
            hours: 720,
            trend: 0.06,
            monthly_amplitude: 0.04,
            weekly_amplitude: 0.06,
            daily_amplitude: 0.15,
            spike_rate: 0.3,
            spike_height: 0.2,
            noise: 0.02,
            seed: 7,
        }
    }
}

/// Hourly demand with a trend, monthly/weekly/daily cycles and sporadic
/// spikes, normalized to a mean near 1.
pub fn synthetic_trace(spec: &SyntheticTraceSpec) -> Result<RateTrace> {
    if spec.hours == 0 {
        return Err(Error::config("trace.hours", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(3);
    let noise = Normal::new(0.0, spec.noise.max(0.0)).map_err(|e| Error::domain(e.to_string()))?;
    let h_total = spec.hours as f64;
    let mut spike = vec![0.0; spec.hours];
    let p_spike = (spec.spike_rate / 24.0).clamp(0.0, 1.0);
    for h in 0..spec.hours {
        if rng.random::<f64>() < p_spike {
            let height = spec.spike_height * (0.5 + 0.5 * rng.random::<f64>());
            let len = rng.random_range(1..=4usize);
            for (k, slot) in spike.iter_mut().skip(h).take(len).enumerate() {
                *slot += height * (1.0 - k as f64 / (len as f64 + 1.0));
            }
        }
    }
    let points = (0..spec.hours)
        .map(|h| {
            let t = h as f64;
            let base = 1.0
                + spec.trend * (t / h_total - 0.5)
                + spec.monthly_amplitude * (2.0 * PI * t / 720.0).sin()
                + spec.weekly_amplitude * (2.0 * PI * t / 168.0).sin()
                + spec.daily_amplitude * (2.0 * PI * (t - 8.0) / 24.0).sin()
                + spike[h];
            let r = base * (1.0 + noise.sample(&mut rng));
            (t, (r.max(0.0) * 1e6).round() / 1e6)
        })
        .collect();
    RateTrace::new(points, 1.0)
}
