//! The whole system behind one handle.
//!
//! Every mutating call goes through [`Cloud::audited`], which checks the
//! caller's clock, runs the operation and appends exactly one audit entry
//! whatever the outcome. Lifecycle sweeps log one entry per expired object
//! and policy evaluation logs only denials.

use std::net::IpAddr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{actions, AuditError, AuditLog, Outcome};
use crate::controlplane::{
    ControlError, ControlPlane, MigrationPlan, NodeId, Subscription, Vm, VmId, Volume, VolumeId,
};
use crate::controlplane::{PricingConfig, PricingError};
use crate::gateway::{Gateway, GatewayError, ListPage, ObjectMeta, Tier};
use crate::lifecycle::{self, LifecyclePolicy, SweepConfig, SweepReport};
use crate::netpolicy::{self, PacketQuery, PolicyError, RuleSet, ScopeConfig, Verdict};
use crate::poolstore::{Cluster, OsdId, PoolError, PoolRole, PoolSpec, Redundancy, RepairReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("no block storage pool is configured")]
    NoBlockPool,
}

impl CloudError {
    pub fn name(&self) -> &'static str {
        match self {
            CloudError::Pool(e) => e.name(),
            CloudError::Gateway(e) => e.name(),
            CloudError::Control(e) => e.name(),
            CloudError::Policy(e) => e.name(),
            CloudError::Audit(e) => e.name(),
            CloudError::Pricing(e) => e.name(),
            CloudError::NoBlockPool => "NoBlockPool",
        }
    }

    /// Refusals on policy or quota grounds log as `denied`, the rest as `error`.
    pub fn outcome(&self) -> Outcome {
        match self.name() {
            "TierForbidden" | "KeyRequired" | "KeyMismatch" | "BucketQuotaExceeded"
            | "PoolQuotaExceeded" | "VolumeQuotaExceeded" | "ProjectQuotaExceeded"
            | "QuotaBelowUsage" => Outcome::Denied,
            _ => Outcome::Error,
        }
    }
}

pub type Result<T> = std::result::Result<T, CloudError>;

/// Who is acting, and when.
#[derive(Debug, Clone, Copy)]
pub struct Ctx<'a> {
    pub actor: &'a str,
    pub now: u64,
}

impl<'a> Ctx<'a> {
    pub fn new(actor: &'a str, now: u64) -> Self {
        Self { actor, now }
    }
}

/// Cluster shape for [`Cloud::build`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterShape {
    pub nodes: u32,
    pub threads_per_node: u32,
    pub ram_gb_per_node: u32,
    pub osds: u32,
    pub osd_capacity_bytes: u64,
}

impl Default for ClusterShape {
    /// Twenty 56-thread, 256 GB compute nodes and eight OSDs.
    fn default() -> Self {
        Self {
            nodes: 20,
            threads_per_node: 56,
            ram_gb_per_node: 256,
            osds: 8,
            osd_capacity_bytes: 400_000_000_000_000,
        }
    }
}

/// Pool layout as shares of usable capacity (raw / 3): block, cache,
/// secure archive, general.
pub const POOL_SHARES: [(&str, PoolRole, u64); 4] = [
    ("rbd", PoolRole::Block, 200),
    ("dbgap-cache", PoolRole::S3cache, 500),
    ("secure-archive", PoolRole::S3secure, 150),
    ("general", PoolRole::S3general, 50),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cloud {
    pub cluster: Cluster,
    pub gateway: Gateway,
    pub control: ControlPlane,
    pub rules: RuleSet,
    pub scopes: ScopeConfig,
    pub pricing: PricingConfig,
    pub sweep_config: SweepConfig,
    pub default_lifecycle: LifecyclePolicy,
    /// Persisted separately as an append-only line file.
    #[serde(skip)]
    pub audit: AuditLog,
}

impl Cloud {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            cluster: Cluster::new(),
            gateway: Gateway::new(rng_seed),
            control: ControlPlane::new(),
            rules: RuleSet::default(),
            scopes: ScopeConfig::default(),
            pricing: PricingConfig::example(),
            sweep_config: SweepConfig::default(),
            default_lifecycle: LifecyclePolicy::default(),
            audit: AuditLog::new(),
        }
    }

    /// Nodes, OSDs and the four standard pools: 3x replicated block storage
    /// and 4:2 erasure-coded object tiers.
    pub fn build(shape: ClusterShape, rng_seed: u64) -> Result<Self> {
        let mut cloud = Self::new(rng_seed);
        for _ in 0..shape.nodes {
            cloud.control.add_node(shape.threads_per_node, shape.ram_gb_per_node);
        }
        for _ in 0..shape.osds {
            cloud.cluster.add_osd(shape.osd_capacity_bytes);
        }
        let usable = cloud.cluster.raw_capacity() / 3;
        let total: u64 = POOL_SHARES.iter().map(|s| s.2).sum();
        for (name, role, share) in POOL_SHARES {
            let redundancy = match role {
                PoolRole::Block => Redundancy::Replicated { copies: 3 },
                _ => Redundancy::ErasureCoded { data: 4, parity: 2 },
            };
            cloud.cluster.create_pool(PoolSpec {
                name: name.to_string(),
                redundancy,
                quota_bytes: (usable as u128 * share as u128 / total as u128) as u64,
                role,
            })?;
        }
        Ok(cloud)
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    fn check_clock(&self, now: u64) -> Result<()> {
        match self.audit.last_ts() {
            Some(last) if now < last => Err(AuditError::ClockRegression { ts: now, last }.into()),
            _ => Ok(()),
        }
    }

    /// Runs `op` and logs one entry for it.
    pub fn audited<T>(
        &mut self,
        ctx: Ctx<'_>,
        action: &str,
        resource: &str,
        op: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        self.check_clock(ctx.now)?;
        let result = op(self);
        let outcome = match &result {
            Ok(_) => Outcome::Ok,
            Err(e) => e.outcome(),
        };
        self.audit
            .append(ctx.now, ctx.actor, action, resource, outcome)
            .expect("clock checked before the operation");
        result
    }

    fn block_pool(&self) -> Result<String> {
        self.cluster
            .pool_for_role(PoolRole::Block)
            .map(|p| p.spec.name.clone())
            .ok_or(CloudError::NoBlockPool)
    }

    // Tenancy.

    pub fn create_project(&mut self, ctx: Ctx<'_>, id: &str, sub: Subscription) -> Result<()> {
        self.audited(ctx, actions::CREATE_PROJECT, &format!("project/{id}"), |c| {
            c.control.create_project(id, sub)?;
            c.control.add_member(id, ctx.actor)?;
            Ok(())
        })
    }

    pub fn set_addons(&mut self, ctx: Ctx<'_>, project: &str, vcpus: u32, volume_tb: u32) -> Result<()> {
        self.audited(ctx, actions::QUOTA_CHANGE, &format!("project/{project}"), |c| {
            Ok(c.control.set_addons(project, vcpus, volume_tb)?)
        })
    }

    pub fn set_dbgap(&mut self, ctx: Ctx<'_>, project: &str, approved: bool) -> Result<()> {
        self.audited(ctx, actions::QUOTA_CHANGE, &format!("project/{project}/dbgap"), |c| {
            Ok(c.control.set_dbgap(project, approved)?)
        })
    }

    pub fn register_image(&mut self, ctx: Ctx<'_>, name: &str, bytes: u64) -> Result<()> {
        self.audited(ctx, "register-image", &format!("image/{name}"), |c| {
            c.control.register_image(name, bytes)?;
            Ok(())
        })
    }

    // Object gateway.

    pub fn create_bucket(
        &mut self,
        ctx: Ctx<'_>,
        project: &str,
        name: &str,
        tier: Tier,
        quota_bytes: u64,
    ) -> Result<()> {
        self.audited(ctx, actions::CREATE_BUCKET, &format!("s3/{name}"), |c| {
            let dbgap = c.control.project(project)?.subscription.dbgap_approved;
            c.gateway.create_bucket(
                &c.cluster,
                project,
                dbgap,
                name,
                tier,
                quota_bytes,
                c.default_lifecycle,
                ctx.now,
            )?;
            Ok(())
        })
    }

    pub fn put_object(
        &mut self,
        ctx: Ctx<'_>,
        bucket: &str,
        key: &str,
        payload: &[u8],
        customer_key: Option<&[u8]>,
    ) -> Result<ObjectMeta> {
        self.audited(ctx, actions::PUT_OBJECT, &format!("s3/{bucket}/{key}"), |c| {
            Ok(c.gateway
                .put_object(&mut c.cluster, bucket, key, payload, customer_key, ctx.now)?)
        })
    }

    pub fn get_object(
        &mut self,
        ctx: Ctx<'_>,
        bucket: &str,
        key: &str,
        customer_key: Option<&[u8]>,
    ) -> Result<Vec<u8>> {
        self.audited(ctx, actions::GET_OBJECT, &format!("s3/{bucket}/{key}"), |c| {
            Ok(c.gateway.get_object(&c.cluster, bucket, key, customer_key)?)
        })
    }

    pub fn delete_object(&mut self, ctx: Ctx<'_>, bucket: &str, key: &str) -> Result<u64> {
        self.audited(ctx, actions::DELETE_OBJECT, &format!("s3/{bucket}/{key}"), |c| {
            Ok(c.gateway.delete_object(&mut c.cluster, bucket, key)?)
        })
    }

    pub fn list_objects(
        &self,
        bucket: &str,
        prefix: &str,
        max_keys: usize,
        continuation: Option<&str>,
    ) -> Result<ListPage> {
        Ok(self.gateway.list_objects(bucket, prefix, max_keys, continuation)?)
    }

    pub fn set_lifecycle(&mut self, ctx: Ctx<'_>, bucket: &str, policy: LifecyclePolicy) -> Result<()> {
        self.audited(ctx, actions::SET_LIFECYCLE, &format!("s3/{bucket}"), |c| {
            Ok(c.gateway.set_lifecycle(bucket, policy)?)
        })
    }

    /// Expires cache objects; one `expire-object` entry per deletion.
    pub fn sweep(&mut self, ctx: Ctx<'_>) -> Result<SweepReport> {
        self.check_clock(ctx.now)?;
        let report = lifecycle::sweep(&mut self.gateway, &mut self.cluster, ctx.now, &self.sweep_config);
        for d in &report.deleted {
            self.audit
                .append(
                    ctx.now,
                    ctx.actor,
                    actions::EXPIRE_OBJECT,
                    &format!("s3/{}/{}", d.bucket, d.key),
                    Outcome::Ok,
                )
                .expect("clock checked");
        }
        Ok(report)
    }

    pub fn cache_utilization(&self) -> f64 {
        lifecycle::utilization(&self.gateway, &self.cluster)
    }

    // Volumes and VMs.

    pub fn create_volume(
        &mut self,
        ctx: Ctx<'_>,
        project: &str,
        bytes: u64,
        source_image: Option<&str>,
    ) -> Result<Volume> {
        self.audited(ctx, actions::CREATE_VOLUME, &format!("project/{project}/volume"), |c| {
            c.control.check_volume(project, bytes, source_image)?;
            let pool = c.block_pool()?;
            c.cluster.reserve(&pool, bytes)?;
            Ok(c.control.create_volume(project, bytes, source_image)?.clone())
        })
    }

    pub fn snapshot_volume(&mut self, ctx: Ctx<'_>, project: &str, volume: VolumeId) -> Result<Volume> {
        self.audited(ctx, actions::SNAPSHOT_VOLUME, &format!("project/{project}/{volume}"), |c| {
            let bytes = c.control.snapshot_size(project, volume)?;
            c.control.check_volume(project, bytes, None)?;
            let pool = c.block_pool()?;
            c.cluster.reserve(&pool, bytes)?;
            Ok(c.control.snapshot_volume(project, volume)?.clone())
        })
    }

    pub fn delete_volume(&mut self, ctx: Ctx<'_>, project: &str, volume: VolumeId) -> Result<u64> {
        self.audited(ctx, actions::DELETE_VOLUME, &format!("project/{project}/{volume}"), |c| {
            let pool = c.block_pool()?;
            let v = c.control.delete_volume(project, volume)?;
            c.cluster.release(&pool, v.logical_bytes)?;
            Ok(v.logical_bytes)
        })
    }

    pub fn launch_vm(
        &mut self,
        ctx: Ctx<'_>,
        project: &str,
        vcpus: u32,
        ram_gb: u32,
        boot_volume: VolumeId,
    ) -> Result<Vm> {
        self.audited(ctx, actions::LAUNCH_VM, &format!("project/{project}/vm"), |c| {
            Ok(c.control.launch_vm(project, vcpus, ram_gb, boot_volume)?.clone())
        })
    }

    /// Creates a boot volume and launches a VM on it as a single operation;
    /// if the launch fails the volume is rolled back too.
    #[allow(clippy::too_many_arguments)]
    pub fn launch_vm_on_new_volume(
        &mut self,
        ctx: Ctx<'_>,
        project: &str,
        vcpus: u32,
        ram_gb: u32,
        boot_bytes: u64,
        source_image: Option<&str>,
    ) -> Result<(Vm, Volume)> {
        self.audited(ctx, actions::LAUNCH_VM, &format!("project/{project}/vm"), |c| {
            let pool = c.block_pool()?;
            c.control.check_volume(project, boot_bytes, source_image)?;
            c.cluster.reserve(&pool, boot_bytes)?;
            let saved = c.control.clone();
            let vol = c.control.create_volume(project, boot_bytes, source_image)?.id;
            match c.control.launch_vm(project, vcpus, ram_gb, vol) {
                Ok(vm) => {
                    let vm = vm.clone();
                    Ok((vm, c.control.volume(vol)?.clone()))
                }
                Err(e) => {
                    c.control = saved;
                    c.cluster.release(&pool, boot_bytes)?;
                    Err(e.into())
                }
            }
        })
    }

    pub fn delete_vm(&mut self, ctx: Ctx<'_>, vm: VmId) -> Result<Vm> {
        self.audited(ctx, actions::DELETE_VM, &format!("vm/{vm}"), |c| Ok(c.control.delete_vm(vm)?))
    }

    pub fn drain_node(&mut self, ctx: Ctx<'_>, node: NodeId) -> Result<MigrationPlan> {
        self.audited(ctx, actions::DRAIN_NODE, &format!("node/{node}"), |c| {
            Ok(c.control.drain_node(node)?)
        })
    }

    pub fn undrain_node(&mut self, ctx: Ctx<'_>, node: NodeId) -> Result<()> {
        self.audited(ctx, actions::UNDRAIN_NODE, &format!("node/{node}"), |c| {
            Ok(c.control.undrain_node(node)?)
        })
    }

    // Storage operations.

    pub fn fail_osd(&mut self, ctx: Ctx<'_>, osd: OsdId) -> Result<()> {
        self.audited(ctx, actions::FAIL_OSD, &format!("osd/{}", osd.0), |c| {
            Ok(c.cluster.fail_osd(osd)?)
        })
    }

    pub fn restore_osd(&mut self, ctx: Ctx<'_>, osd: OsdId) -> Result<()> {
        self.audited(ctx, "restore-osd", &format!("osd/{}", osd.0), |c| {
            Ok(c.cluster.restore_osd(osd)?)
        })
    }

    pub fn repair(&mut self, ctx: Ctx<'_>, pool: &str) -> Result<RepairReport> {
        self.audited(ctx, actions::REPAIR_POOL, &format!("pool/{pool}"), |c| {
            Ok(c.cluster.repair(pool)?)
        })
    }

    // Network policy.

    pub fn replace_rules(&mut self, ctx: Ctx<'_>, rules: RuleSet) -> Result<()> {
        self.audited(ctx, actions::RULES_REPLACE, "policy/rules", |c| {
            c.rules = rules;
            Ok(())
        })
    }

    pub fn replace_scopes(&mut self, ctx: Ctx<'_>, scopes: ScopeConfig) -> Result<()> {
        self.audited(ctx, "scopes-replace", "policy/scopes", |c| {
            scopes.validate()?;
            c.scopes = scopes;
            Ok(())
        })
    }

    /// Evaluates one packet; denials are logged.
    pub fn evaluate_packet(&mut self, ctx: Ctx<'_>, packet: &PacketQuery) -> Result<Verdict> {
        let verdict = netpolicy::evaluate(packet, &self.rules, &self.scopes);
        if let Verdict::Deny(reason) = verdict {
            self.check_clock(ctx.now)?;
            let resource = format!(
                "vm/{}/{}:{}/{}",
                packet.dst_vm.project,
                packet.dst_vm.vm,
                packet.port,
                reason.as_str()
            );
            self.audit
                .append(ctx.now, ctx.actor, actions::POLICY_DENY, &resource, Outcome::Denied)
                .expect("clock checked");
        }
        Ok(verdict)
    }

    /// Source scope as seen by a VM in `project`.
    pub fn classify(&self, addr: IpAddr, project: &str) -> netpolicy::Scope {
        self.scopes.classify_source(addr, project)
    }

    /// Recomputes every usage counter and quota relation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        self.control.check_invariants()?;
        for b in self.gateway.buckets() {
            let sum: u64 = b.objects().map(|o| o.size).sum();
            if sum != b.usage_bytes() {
                return Err(format!("bucket {} usage {} != {}", b.name, b.usage_bytes(), sum));
            }
            if sum > b.quota_bytes {
                return Err(format!("bucket {} over quota", b.name));
            }
        }
        for p in self.cluster.pools() {
            let logical = p.logical_bytes();
            if logical > p.spec.quota_bytes {
                return Err(format!("pool {} over quota", p.spec.name));
            }
            let stripes: u64 = p.stripes().map(|s| s.payload_len).sum();
            if stripes + p.reserved_bytes() != logical {
                return Err(format!("pool {} logical bytes drifted", p.spec.name));
            }
        }
        if let Ok(block) = self.block_pool() {
            let volumes: u64 = self.control.volumes().map(|v| v.logical_bytes).sum();
            let reserved = self.cluster.pool(&block).map_or(0, |p| p.reserved_bytes());
            if volumes != reserved {
                return Err(format!("block reservations {reserved} != volume bytes {volumes}"));
            }
        }
        for o in self.cluster.osds() {
            if o.used_bytes() > o.capacity_bytes {
                return Err(format!("{} over capacity", o.id));
            }
        }
        Ok(())
    }
}
