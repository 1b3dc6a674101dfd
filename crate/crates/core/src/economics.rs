//! Revenue per unit time: customer charges minus the (indirect-cost inflated)
//! electricity bill.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricePoint {
    pub from_hour: f64,
    /// $/kWh from `from_hour` until the next point.
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tariff {
    /// What a customer pays per hour of job time, in $.
    pub charge_rate: f64,
    /// Flat electricity price in $/kWh, used when `schedule` is empty.
    pub electricity_price: f64,
    /// Piecewise-constant price over wall-clock hours. Times past the last
    /// point hold the last price.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<PricePoint>,
    /// Total cost per unit of electricity cost (capital and amortization on
    /// top of the bill itself).
    pub indirect_cost_multiplier: f64,
}

impl Default for Tariff {
    fn default() -> Self {
        Tariff {
            charge_rate: 0.085,
            electricity_price: 0.1,
            schedule: Vec::new(),
            indirect_cost_multiplier: 3.0,
        }
    }
}

impl Tariff {
    pub fn constant(charge_rate: f64, electricity_price: f64, indirect_cost_multiplier: f64) -> Self {
        Tariff {
            charge_rate,
            electricity_price,
            schedule: Vec::new(),
            indirect_cost_multiplier,
        }
    }

    pub fn with_schedule(mut self, schedule: Vec<PricePoint>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.charge_rate.is_finite() && self.charge_rate >= 0.0) {
            return Err(Error::config("tariff.charge_rate", "must be non-negative"));
        }
        if !(self.electricity_price.is_finite() && self.electricity_price >= 0.0) {
            return Err(Error::config("tariff.electricity_price", "must be non-negative"));
        }
        if !(self.indirect_cost_multiplier.is_finite() && self.indirect_cost_multiplier >= 1.0) {
            return Err(Error::config("tariff.indirect_cost_multiplier", "must be at least 1"));
        }
        for (i, p) in self.schedule.iter().enumerate() {
            if !(p.price.is_finite() && p.price >= 0.0) {
                return Err(Error::config(format!("tariff.schedule[{i}].price"), "must be non-negative"));
            }
            if !p.from_hour.is_finite() || (i > 0 && p.from_hour <= self.schedule[i - 1].from_hour) {
                return Err(Error::config(
                    format!("tariff.schedule[{i}].from_hour"),
                    "must be strictly increasing",
                ));
            }
        }
        if let Some(first) = self.schedule.first() {
            if first.from_hour > 0.0 {
                return Err(Error::config("tariff.schedule[0].from_hour", "must start at hour 0"));
            }
        }
        Ok(())
    }

    /// Electricity price in $/kWh in force at `hour`.
    pub fn price_at(&self, hour: f64) -> f64 {
        match self.schedule.iter().rposition(|p| p.from_hour <= hour) {
            Some(i) => self.schedule[i].price,
            None => self
                .schedule
                .first()
                .map_or(self.electricity_price, |p| p.price),
        }
    }

    /// Effective cost in $ of drawing `watts` over `[t0, t1]`, including
    /// indirect costs.
    pub fn energy_cost(&self, watts: f64, t0: f64, t1: f64) -> f64 {
        let kw = watts / 1000.0 * self.indirect_cost_multiplier;
        if self.schedule.is_empty() {
            return kw * self.electricity_price * (t1 - t0);
        }
        let mut cost = 0.0;
        let mut t = t0;
        while t < t1 {
            let next_change = self
                .schedule
                .iter()
                .map(|p| p.from_hour)
                .find(|&h| h > t)
                .unwrap_or(f64::INFINITY);
            let end = next_change.min(t1);
            cost += kw * self.price_at(t) * (end - t);
            t = end;
        }
        cost
    }

    /// Average charge paid per job of mean length `mean_service`.
    pub fn charge_per_job(&self, mean_service: f64) -> f64 {
        self.charge_rate * mean_service
    }
}

/// `R = (c / mu) T - r P` in $/hour at the flat (or first scheduled) price.
pub fn revenue_rate(throughput: f64, mean_service: f64, power_watts: f64, tariff: &Tariff) -> f64 {
    revenue_rate_at_price(throughput, mean_service, power_watts, tariff, tariff.price_at(0.0))
}

/// `revenue_rate` with the electricity price in force at `hour`.
pub fn revenue_rate_at(
    throughput: f64,
    mean_service: f64,
    power_watts: f64,
    tariff: &Tariff,
    hour: f64,
) -> f64 {
    revenue_rate_at_price(throughput, mean_service, power_watts, tariff, tariff.price_at(hour))
}

pub(crate) fn revenue_rate_at_price(
    throughput: f64,
    mean_service: f64,
    power_watts: f64,
    tariff: &Tariff,
    price: f64,
) -> f64 {
    tariff.charge_per_job(mean_service) * throughput
        - price * tariff.indirect_cost_multiplier * power_watts / 1000.0
}
