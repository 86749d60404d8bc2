//! Analytic storage-throughput and HPL-sizing models.
//!
//! Client throughput is the lesser of a bandwidth ceiling (backend bandwidth
//! divided by write amplification, with an extra CPU penalty for erasure
//! coding) and an IOPS ceiling (backend operations per second times object
//! size, divided by the backend writes each object costs).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poolstore::Redundancy;

/// Peak GFLOPS per core of a 2.5 GHz Haswell core.
pub const HASWELL_PEAK_GFLOPS: f64 = 40.0;
/// Peak GFLOPS per core of a 2.4 GHz Broadwell core.
pub const BROADWELL_PEAK_GFLOPS: f64 = 46.4;

/// Reference client throughputs at 4 MB objects, MB/s.
pub const REPLICATED_4MB_CLIENT_MBPS: f64 = 4078.0;
pub const ERASURE_4MB_CLIENT_MBPS: f64 = 6310.0;

/// Reference FIO write bandwidths, MB/s (not modeled).
pub const VOLUME_FIO_WRITE_MBPS: f64 = 270.0;
pub const PARALLEL_FS_FIO_WRITE_MBPS: f64 = 240.0;

/// Fitted EC CPU penalty on the bandwidth ceiling.
pub const DEFAULT_CPU_PENALTY_EC: f64 = 0.78;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerfError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

impl PerfError {
    pub fn name(&self) -> &'static str {
        "InvalidModel"
    }
}

/// Backend writes (MB) caused by `client_mb` of client writes.
pub fn backend_bytes(client_mb: f64, scheme: Redundancy) -> f64 {
    match scheme {
        Redundancy::Replicated { copies } => client_mb * copies as f64,
        Redundancy::ErasureCoded { data, parity } => {
            client_mb * (data as f64 + parity as f64) / data as f64
        }
    }
}

fn ops_per_object(scheme: Redundancy) -> f64 {
    scheme.width() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackendModel {
    pub backend_bandwidth_mbps: f64,
    /// Backend write operations per second.
    pub iops_budget: f64,
    pub cpu_penalty_ec: f64,
}

impl BackendModel {
    pub fn new(backend_bandwidth_mbps: f64, iops_budget: f64, cpu_penalty_ec: f64) -> Result<Self, PerfError> {
        if backend_bandwidth_mbps.is_nan() || backend_bandwidth_mbps <= 0.0 {
            return Err(PerfError::InvalidModel("bandwidth must be > 0".into()));
        }
        if iops_budget.is_nan() || iops_budget <= 0.0 {
            return Err(PerfError::InvalidModel("iops budget must be > 0".into()));
        }
        if !(cpu_penalty_ec > 0.0 && cpu_penalty_ec <= 1.0) {
            return Err(PerfError::InvalidModel("cpu penalty must be in (0, 1]".into()));
        }
        Ok(Self {
            backend_bandwidth_mbps,
            iops_budget,
            cpu_penalty_ec,
        })
    }

    /// Solves for bandwidth and IOPS from two observations at one object
    /// size: a replicated pool that is bandwidth-bound and an erasure-coded
    /// pool that is IOPS-bound. Fails if the solution contradicts either
    /// regime assumption.
    pub fn calibrate(
        replicated: Redundancy,
        replicated_mbps: f64,
        erasure: Redundancy,
        erasure_mbps: f64,
        object_size_mb: f64,
        cpu_penalty_ec: f64,
    ) -> Result<Self, PerfError> {
        let bandwidth = replicated_mbps * replicated.amplification();
        let iops = erasure_mbps * ops_per_object(erasure) / object_size_mb;
        let model = Self::new(bandwidth, iops, cpu_penalty_ec)?;
        if model.iops_ceiling(replicated, object_size_mb) < replicated_mbps {
            return Err(PerfError::InvalidModel(
                "replicated observation is not bandwidth-bound".into(),
            ));
        }
        if model.bandwidth_ceiling(erasure) < erasure_mbps {
            return Err(PerfError::InvalidModel(
                "erasure-coded observation is not IOPS-bound".into(),
            ));
        }
        Ok(model)
    }

    /// Model calibrated to the 4 MB reference throughputs of a 3x
    /// replicated and a 4:2 erasure-coded pool.
    pub fn reference() -> Self {
        Self::calibrate(
            Redundancy::Replicated { copies: 3 },
            REPLICATED_4MB_CLIENT_MBPS,
            Redundancy::ErasureCoded { data: 4, parity: 2 },
            ERASURE_4MB_CLIENT_MBPS,
            4.0,
            DEFAULT_CPU_PENALTY_EC,
        )
        .expect("reference observations are consistent")
    }

    pub fn bandwidth_ceiling(&self, scheme: Redundancy) -> f64 {
        let base = self.backend_bandwidth_mbps / scheme.amplification();
        match scheme {
            Redundancy::Replicated { .. } => base,
            Redundancy::ErasureCoded { .. } => base * self.cpu_penalty_ec,
        }
    }

    pub fn iops_ceiling(&self, scheme: Redundancy, object_size_mb: f64) -> f64 {
        self.iops_budget * object_size_mb / ops_per_object(scheme)
    }

    /// Client-visible write throughput, MB/s.
    pub fn client_throughput(&self, scheme: Redundancy, object_size_mb: f64) -> f64 {
        self.bandwidth_ceiling(scheme)
            .min(self.iops_ceiling(scheme, object_size_mb))
    }

    /// Object size in `[lo, hi]` where `b` starts to outperform `a`, found by
    /// bisection. `None` if the sign of `b - a` does not change over the
    /// interval.
    pub fn crossover(&self, a: Redundancy, b: Redundancy, lo: f64, hi: f64) -> Option<f64> {
        let diff = |s: f64| self.client_throughput(b, s) - self.client_throughput(a, s);
        let (mut lo, mut hi) = (lo, hi);
        if diff(lo) >= 0.0 || diff(hi) <= 0.0 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if diff(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        Some(hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HplConfig {
    pub threads: u32,
    pub mem_per_thread_bytes: u64,
    pub fill: f64,
    pub peak_gflops_per_core: f64,
}

impl HplConfig {
    /// Weak scaling: memory per thread held constant.
    pub fn weak(threads: u32) -> Self {
        Self {
            threads,
            mem_per_thread_bytes: 2 * 1024 * 1024 * 1024,
            fill: 0.8,
            peak_gflops_per_core: BROADWELL_PEAK_GFLOPS,
        }
    }

    /// Strong scaling: the single-thread problem size at every thread count.
    pub fn strong(threads: u32) -> Self {
        Self {
            threads,
            ..Self::weak(1)
        }
    }

    fn sizing_threads(&self, strong: bool) -> u32 {
        if strong {
            1
        } else {
            self.threads.max(1)
        }
    }
}

/// N = floor(sqrt(t * fill * mem_per_thread / 8)), eight bytes per double.
pub fn hpl_matrix_size(config: &HplConfig) -> u64 {
    hpl_size_for(config.sizing_threads(false), config)
}

/// Problem size under strong scaling (fixed at the one-thread value).
pub fn hpl_matrix_size_strong(config: &HplConfig) -> u64 {
    hpl_size_for(config.sizing_threads(true), config)
}

fn hpl_size_for(threads: u32, config: &HplConfig) -> u64 {
    let bytes = threads as f64 * config.fill * config.mem_per_thread_bytes as f64;
    (bytes / 8.0).sqrt().floor() as u64
}

/// Fraction of theoretical peak.
pub fn percent_of_peak(measured_gflops: f64, cores: u32, peak_per_core: f64) -> f64 {
    measured_gflops / (cores as f64 * peak_per_core)
}

/// Loss in fraction-of-peak points from bare metal to VM.
pub fn virtualization_loss(bare_fraction: f64, vm_fraction: f64) -> f64 {
    bare_fraction - vm_fraction
}
