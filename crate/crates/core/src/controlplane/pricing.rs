//! Zero-profit subscription pricing.
//!
//! Each resource class is priced so that selling 85% of its capacity for a
//! year exactly recovers its annual cost.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COST_RECOVERY_UTILIZATION: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResourceClass {
    /// One vCPU-year; RAM is bundled with vCPU.
    Vcpu,
    VolumeTb,
    SecureObjectTb,
}

impl ResourceClass {
    pub const ALL: [ResourceClass; 3] = [
        ResourceClass::Vcpu,
        ResourceClass::VolumeTb,
        ResourceClass::SecureObjectTb,
    ];
}

impl fmt::Display for ResourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResourceClass::Vcpu => "vcpu",
            ResourceClass::VolumeTb => "volume-tb",
            ResourceClass::SecureObjectTb => "secure-object-tb",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PricingError {
    #[error("resource class {0} has zero capacity")]
    ZeroCapacity(ResourceClass),
}

impl PricingError {
    pub fn name(&self) -> &'static str {
        "ZeroCapacity"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    /// Annual cost per class (hardware amortization plus staff), dollars.
    pub annual_cost: BTreeMap<ResourceClass, f64>,
    /// Sellable units per class.
    pub capacity: BTreeMap<ResourceClass, f64>,
}

impl PricingConfig {
    /// Illustrative configuration: 2,240 oversubscribed vCPUs, 200 TB of
    /// volume storage and 300 TB of secure object storage.
    pub fn example() -> Self {
        Self {
            annual_cost: [
                (ResourceClass::Vcpu, 100_000.0),
                (ResourceClass::VolumeTb, 10_000.0),
                (ResourceClass::SecureObjectTb, 20_000.0),
            ]
            .into(),
            capacity: [
                (ResourceClass::Vcpu, 2_240.0),
                (ResourceClass::VolumeTb, 200.0),
                (ResourceClass::SecureObjectTb, 300.0),
            ]
            .into(),
        }
    }

    pub fn unit_price(&self, class: ResourceClass) -> Result<f64, PricingError> {
        let cost = self.annual_cost.get(&class).copied().unwrap_or(0.0);
        let capacity = self.capacity.get(&class).copied().unwrap_or(0.0);
        if capacity <= 0.0 {
            return Err(PricingError::ZeroCapacity(class));
        }
        Ok(cost / (COST_RECOVERY_UTILIZATION * capacity))
    }

    pub fn total_annual_cost(&self) -> f64 {
        self.annual_cost.values().sum()
    }

    /// Revenue if every class sells `utilization` of its capacity.
    pub fn revenue_at(&self, utilization: f64) -> Result<f64, PricingError> {
        self.annual_cost
            .keys()
            .map(|&c| Ok(self.unit_price(c)? * utilization * self.capacity[&c]))
            .sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub units: BTreeMap<ResourceClass, f64>,
}

impl Bundle {
    /// 16 vCPUs (with 32 GB RAM) and 2 TB of volume storage.
    pub fn base() -> Self {
        Self {
            units: [(ResourceClass::Vcpu, 16.0), (ResourceClass::VolumeTb, 2.0)].into(),
        }
    }

    pub fn with(mut self, class: ResourceClass, units: f64) -> Self {
        *self.units.entry(class).or_default() += units;
        self
    }
}

/// Annual price of a bundle.
pub fn price_subscription(config: &PricingConfig, bundle: &Bundle) -> Result<f64, PricingError> {
    bundle
        .units
        .iter()
        .map(|(&class, &units)| Ok(units * config.unit_price(class)?))
        .sum()
}
