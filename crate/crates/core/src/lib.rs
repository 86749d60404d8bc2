//! A desk-scale controlled-access data cloud.
//!
//! Storage pools with replication and Reed–Solomon erasure coding, a tiered
//! S3-style gateway with an expiring cache tier, subscription quotas, VM
//! placement with oversubscription and live-migration drains, a
//! security-group policy engine, a hash-chained audit log, and analytic
//! models of storage throughput and HPL sizing.

pub mod audit;
pub mod cloud;
pub mod controlplane;
pub mod gateway;
pub mod lifecycle;
pub mod netpolicy;
pub mod perfmodel;
pub mod poolstore;
mod serde_util;

pub use cloud::{Cloud, CloudError, ClusterShape, Ctx};
