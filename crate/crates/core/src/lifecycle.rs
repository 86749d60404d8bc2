//! dbGaP cache expiration.
//!
//! Objects in cache-tier buckets expire first-in-first-out by creation time.
//! A sweep runs in up to three phases:
//!
//! 1. delete every object older than its bucket's expiration;
//! 2. while the tier is above the utilization target, shrink a tier-wide
//!    threshold by a constant factor (never below the floor) and delete,
//!    oldest first, objects older than it until the tier drops to the target;
//! 3. if the floor is reached and the tier is still above target, delete
//!    oldest first regardless of age until it is not.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, Tier};
use crate::poolstore::Cluster;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("expiration must be at least 1 day, got {0}")]
pub struct InvalidPolicy(pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifecyclePolicy {
    pub expiration_days: f64,
}

impl LifecyclePolicy {
    pub const DEFAULT_DAYS: f64 = 60.0;

    pub fn days(expiration_days: f64) -> Self {
        Self { expiration_days }
    }

    pub fn validate(&self) -> Result<(), InvalidPolicy> {
        if self.expiration_days >= 1.0 && self.expiration_days.is_finite() {
            Ok(())
        } else {
            Err(InvalidPolicy(self.expiration_days))
        }
    }
}

impl Default for LifecyclePolicy {
    fn default() -> Self {
        Self::days(Self::DEFAULT_DAYS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub target_utilization: f64,
    pub reduction_factor: f64,
    pub floor_days: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            target_utilization: 0.80,
            reduction_factor: 0.9,
            floor_days: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletedObject {
    pub bucket: String,
    pub key: String,
    pub created_ts: u64,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Ascending by creation time.
    pub deleted: Vec<DeletedObject>,
    pub bytes_freed: u64,
    pub threshold_start_days: f64,
    pub threshold_final_days: f64,
    pub utilization_before: f64,
    pub utilization_after: f64,
}

impl SweepReport {
    /// Human-readable table.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<24} {:<40} {:>12} {:>14}\n",
            "BUCKET", "KEY", "CREATED_TS", "SIZE"
        );
        for d in &self.deleted {
            out.push_str(&format!(
                "{:<24} {:<40} {:>12} {:>14}\n",
                d.bucket, d.key, d.created_ts, d.size
            ));
        }
        out.push_str(&format!(
            "deleted={} bytes_freed={} threshold={:.3}d->{:.3}d utilization={:.4}->{:.4}\n",
            self.deleted.len(),
            self.bytes_freed,
            self.threshold_start_days,
            self.threshold_final_days,
            self.utilization_before,
            self.utilization_after
        ));
        out
    }

    /// One `bucket key created_ts size` line per deleted object.
    pub fn render_lines(&self) -> String {
        self.deleted
            .iter()
            .map(|d| format!("{} {} {} {}\n", d.bucket, d.key, d.created_ts, d.size))
            .collect()
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_table())
    }
}

/// Logical bytes in cache-tier buckets over the cache pool quota.
pub fn utilization(gateway: &Gateway, cluster: &Cluster) -> f64 {
    let Ok(pool) = Gateway::tier_pool(cluster, Tier::S3cache) else {
        return 0.0;
    };
    let quota = cluster.pool(&pool).map_or(0, |p| p.spec.quota_bytes);
    if quota == 0 {
        return 0.0;
    }
    cache_bytes(gateway) as f64 / quota as f64
}

fn cache_bytes(gateway: &Gateway) -> u64 {
    gateway
        .buckets()
        .filter(|b| b.tier == Tier::S3cache)
        .map(|b| b.usage_bytes())
        .sum()
}

struct Candidate {
    bucket: String,
    key: String,
    created_ts: u64,
    size: u64,
    policy_days: f64,
}

fn age_days(now: u64, created_ts: u64) -> f64 {
    now.saturating_sub(created_ts) as f64 / SECONDS_PER_DAY
}

pub fn sweep(gateway: &mut Gateway, cluster: &mut Cluster, now: u64, config: &SweepConfig) -> SweepReport {
    let quota = Gateway::tier_pool(cluster, Tier::S3cache)
        .ok()
        .and_then(|p| cluster.pool(&p).ok().map(|p| p.spec.quota_bytes))
        .unwrap_or(0);
    let mut candidates: Vec<Candidate> = gateway
        .buckets()
        .filter(|b| b.tier == Tier::S3cache)
        .flat_map(|b| {
            let policy_days = b.lifecycle.unwrap_or_default().expiration_days;
            b.objects().map(move |o| Candidate {
                bucket: b.name.clone(),
                key: o.key.clone(),
                created_ts: o.created_ts,
                size: o.size,
                policy_days,
            })
        })
        .collect();
    candidates.sort_by(|a, b| {
        (a.created_ts, &a.bucket, &a.key).cmp(&(b.created_ts, &b.bucket, &b.key))
    });
    let threshold_start = candidates
        .iter()
        .map(|c| c.policy_days)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
        .unwrap_or(LifecyclePolicy::DEFAULT_DAYS);

    let mut used = cache_bytes(gateway);
    let util = |used: u64| if quota == 0 { 0.0 } else { used as f64 / quota as f64 };
    let utilization_before = util(used);
    let mut alive = vec![true; candidates.len()];
    let mut deleted = Vec::new();

    let mut remove = |i: usize, alive: &mut Vec<bool>, used: &mut u64, deleted: &mut Vec<DeletedObject>| {
        let c = &candidates[i];
        if gateway.delete_object(cluster, &c.bucket, &c.key).is_ok() {
            *used -= c.size;
            deleted.push(DeletedObject {
                bucket: c.bucket.clone(),
                key: c.key.clone(),
                created_ts: c.created_ts,
                size: c.size,
            });
        }
        alive[i] = false;
    };

    // Phase 1: plain expiration.
    for (i, c) in candidates.iter().enumerate() {
        if age_days(now, c.created_ts) > c.policy_days {
            remove(i, &mut alive, &mut used, &mut deleted);
        }
    }

    // Phase 2: shrink the tier-wide threshold.
    let mut threshold = threshold_start;
    while util(used) > config.target_utilization && threshold > config.floor_days {
        threshold = (threshold * config.reduction_factor).max(config.floor_days);
        for i in 0..candidates.len() {
            if util(used) <= config.target_utilization {
                break;
            }
            let limit = candidates[i].policy_days.min(threshold);
            if alive[i] && age_days(now, candidates[i].created_ts) > limit {
                remove(i, &mut alive, &mut used, &mut deleted);
            }
        }
    }

    // Phase 3: strict FIFO at the floor.
    for i in 0..candidates.len() {
        if util(used) <= config.target_utilization {
            break;
        }
        if alive[i] {
            remove(i, &mut alive, &mut used, &mut deleted);
        }
    }

    deleted.sort_by(|a, b| (a.created_ts, &a.bucket, &a.key).cmp(&(b.created_ts, &b.bucket, &b.key)));
    SweepReport {
        bytes_freed: deleted.iter().map(|d| d.size).sum(),
        deleted,
        threshold_start_days: threshold_start,
        threshold_final_days: threshold,
        utilization_before,
        utilization_after: util(used),
    }
}
