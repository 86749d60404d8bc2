//! Tenancy and compute: projects, subscription quotas, volumes and CoW
//! clones, VM placement with oversubscription, and node drains.

pub mod image;
pub mod pricing;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use image::{parse_image_name, ImageName, MalformedName};
pub use pricing::{price_subscription, Bundle, PricingConfig, PricingError, ResourceClass};

pub const TB: u64 = 1_000_000_000_000;
pub const GB: u64 = 1_000_000_000;

/// vCPUs sold per hardware thread.
pub const VCPU_OVERSUBSCRIPTION: u32 = 2;
/// GB of RAM sold per physical GB.
pub const RAM_OVERSUBSCRIPTION: u32 = 1;

macro_rules! numbered_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "-{}"), self.0)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                s.strip_prefix(concat!($prefix, "-"))
                    .unwrap_or(s)
                    .parse()
                    .map($name)
            }
        }
    };
}

numbered_id!(VmId, "vm");
numbered_id!(VolumeId, "vol");
numbered_id!(NodeId, "node");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControlError {
    #[error("project {0} already exists")]
    DuplicateProject(String),
    #[error("no such project {0}")]
    NoSuchProject(String),
    #[error("no such volume {0}")]
    NoSuchVolume(VolumeId),
    #[error("no such image {0}")]
    NoSuchImage(String),
    #[error("no such VM {0}")]
    NoSuchVm(VmId),
    #[error("no such node {0}")]
    NoSuchNode(NodeId),
    #[error("volume quota exceeded: {requested} bytes requested, {available} available")]
    VolumeQuotaExceeded { requested: u64, available: u64 },
    #[error("project quota exceeded for {resource}: {requested} requested, {available} available")]
    ProjectQuotaExceeded {
        resource: &'static str,
        requested: u64,
        available: u64,
    },
    #[error("no compute node can host {vcpus} vCPUs / {ram_gb} GB")]
    CapacityExhausted { vcpus: u32, ram_gb: u32 },
    #[error("cannot drain {node}: no room for {vm}")]
    InsufficientClusterHeadroom { node: NodeId, vm: VmId },
    #[error("volume {0} is in use")]
    VolumeInUse(VolumeId),
    #[error("volume {0} is not bootable")]
    NotBootable(VolumeId),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("quota below current usage for {0}")]
    QuotaBelowUsage(&'static str),
    #[error(transparent)]
    MalformedName(#[from] MalformedName),
}

impl ControlError {
    pub fn name(&self) -> &'static str {
        match self {
            ControlError::DuplicateProject(_) => "DuplicateProject",
            ControlError::NoSuchProject(_) => "NoSuchProject",
            ControlError::NoSuchVolume(_) => "NoSuchVolume",
            ControlError::NoSuchImage(_) => "NoSuchImage",
            ControlError::NoSuchVm(_) => "NoSuchVm",
            ControlError::NoSuchNode(_) => "NoSuchNode",
            ControlError::VolumeQuotaExceeded { .. } => "VolumeQuotaExceeded",
            ControlError::ProjectQuotaExceeded { .. } => "ProjectQuotaExceeded",
            ControlError::CapacityExhausted { .. } => "CapacityExhausted",
            ControlError::InsufficientClusterHeadroom { .. } => "InsufficientClusterHeadroom",
            ControlError::VolumeInUse(_) => "VolumeInUse",
            ControlError::NotBootable(_) => "NotBootable",
            ControlError::InvalidSize(_) => "InvalidSize",
            ControlError::QuotaBelowUsage(_) => "QuotaBelowUsage",
            ControlError::MalformedName(_) => "MalformedName",
        }
    }
}

pub type Result<T> = std::result::Result<T, ControlError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub vcpus: u32,
    pub ram_gb: u32,
    pub volume_tb: u32,
    pub addon_vcpus: u32,
    pub addon_volume_tb: u32,
    pub dbgap_approved: bool,
}

impl Subscription {
    /// 16 vCPUs, 32 GB RAM, 2 TB of volume storage.
    pub fn base() -> Self {
        Self {
            vcpus: 16,
            ram_gb: 32,
            volume_tb: 2,
            addon_vcpus: 0,
            addon_volume_tb: 0,
            dbgap_approved: false,
        }
    }

    pub fn dbgap(mut self) -> Self {
        self.dbgap_approved = true;
        self
    }

    pub fn vcpu_quota(&self) -> u32 {
        self.vcpus + self.addon_vcpus
    }

    pub fn ram_quota_gb(&self) -> u32 {
        self.ram_gb
    }

    pub fn volume_quota_bytes(&self) -> u64 {
        (self.volume_tb + self.addon_volume_tb) as u64 * TB
    }

    /// Priced units of this subscription.
    pub fn bundle(&self) -> Bundle {
        Bundle::default()
            .with(ResourceClass::Vcpu, self.vcpu_quota() as f64)
            .with(ResourceClass::VolumeTb, (self.volume_tb + self.addon_volume_tb) as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub vcpus: u32,
    pub ram_gb: u32,
    pub volume_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub subscription: Subscription,
    pub usage: Usage,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeNode {
    pub id: NodeId,
    pub hw_threads: u32,
    pub ram_gb: u32,
    pub resident: BTreeSet<VmId>,
    pub maintenance: bool,
    pub used_vcpus: u32,
    pub used_ram_gb: u32,
}

impl ComputeNode {
    pub fn vcpu_capacity(&self) -> u32 {
        self.hw_threads * VCPU_OVERSUBSCRIPTION
    }

    pub fn ram_capacity_gb(&self) -> u32 {
        self.ram_gb * RAM_OVERSUBSCRIPTION
    }

    pub fn fits(&self, vcpus: u32, ram_gb: u32) -> bool {
        !self.maintenance
            && self.used_vcpus + vcpus <= self.vcpu_capacity()
            && self.used_ram_gb + ram_gb <= self.ram_capacity_gb()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vm {
    pub id: VmId,
    pub project: String,
    pub vcpus: u32,
    pub ram_gb: u32,
    pub boot_volume: VolumeId,
    pub host: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeKind {
    Volume,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Volume {
    pub id: VolumeId,
    pub project: String,
    pub logical_bytes: u64,
    pub kind: VolumeKind,
    /// Image this volume is a CoW clone of.
    pub source_image: Option<String>,
    /// Volume a snapshot was taken from.
    pub source_volume: Option<VolumeId>,
    pub attached_to: Option<VmId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Image {
    pub name: ImageName,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Migration {
    pub vm: VmId,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationPlan {
    pub node: NodeId,
    pub moves: Vec<Migration>,
}

impl MigrationPlan {
    pub fn render(&self) -> String {
        let mut out = format!("drain {}: {} migration(s)\n", self.node, self.moves.len());
        for m in &self.moves {
            out.push_str(&format!("  {} {} -> {}\n", m.vm, m.from, m.to));
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPlane {
    projects: BTreeMap<String, Project>,
    nodes: BTreeMap<NodeId, ComputeNode>,
    vms: BTreeMap<VmId, Vm>,
    volumes: BTreeMap<VolumeId, Volume>,
    images: BTreeMap<String, Image>,
    next_vm: u64,
    next_volume: u64,
}

impl ControlPlane {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn projects(&self) -> impl Iterator<Item = &Project> {
        self.projects.values()
    }

    pub fn project(&self, id: &str) -> Result<&Project> {
        self.projects
            .get(id)
            .ok_or_else(|| ControlError::NoSuchProject(id.to_string()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ComputeNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: NodeId) -> Result<&ComputeNode> {
        self.nodes.get(&id).ok_or(ControlError::NoSuchNode(id))
    }

    pub fn vms(&self) -> impl Iterator<Item = &Vm> {
        self.vms.values()
    }

    pub fn vm(&self, id: VmId) -> Result<&Vm> {
        self.vms.get(&id).ok_or(ControlError::NoSuchVm(id))
    }

    pub fn volumes(&self) -> impl Iterator<Item = &Volume> {
        self.volumes.values()
    }

    pub fn volume(&self, id: VolumeId) -> Result<&Volume> {
        self.volumes.get(&id).ok_or(ControlError::NoSuchVolume(id))
    }

    pub fn images(&self) -> impl Iterator<Item = &Image> {
        self.images.values()
    }

    pub fn total_vcpu_capacity(&self) -> u64 {
        self.nodes.values().map(|n| n.vcpu_capacity() as u64).sum()
    }

    pub fn create_project(&mut self, id: &str, subscription: Subscription) -> Result<&Project> {
        if self.projects.contains_key(id) {
            return Err(ControlError::DuplicateProject(id.to_string()));
        }
        let project = Project {
            id: id.to_string(),
            subscription,
            usage: Usage::default(),
            members: BTreeSet::new(),
        };
        Ok(self.projects.entry(id.to_string()).or_insert(project))
    }

    pub fn add_member(&mut self, project: &str, actor: &str) -> Result<()> {
        self.project_mut(project)?.members.insert(actor.to_string());
        Ok(())
    }

    /// Sets à la carte add-ons (whole vCPUs and TB).
    pub fn set_addons(&mut self, project: &str, addon_vcpus: u32, addon_volume_tb: u32) -> Result<()> {
        let p = self.project_mut(project)?;
        let mut sub = p.subscription;
        sub.addon_vcpus = addon_vcpus;
        sub.addon_volume_tb = addon_volume_tb;
        if p.usage.vcpus > sub.vcpu_quota() {
            return Err(ControlError::QuotaBelowUsage("vcpus"));
        }
        if p.usage.volume_bytes > sub.volume_quota_bytes() {
            return Err(ControlError::QuotaBelowUsage("volume"));
        }
        p.subscription = sub;
        Ok(())
    }

    pub fn set_dbgap(&mut self, project: &str, approved: bool) -> Result<()> {
        self.project_mut(project)?.subscription.dbgap_approved = approved;
        Ok(())
    }

    pub fn register_image(&mut self, name: &str, bytes: u64) -> Result<&Image> {
        let parsed = parse_image_name(name)?;
        if bytes == 0 {
            return Err(ControlError::InvalidSize("image must be > 0 bytes".into()));
        }
        let image = Image { name: parsed, bytes };
        self.images.insert(name.to_string(), image);
        Ok(&self.images[name])
    }

    pub fn add_node(&mut self, hw_threads: u32, ram_gb: u32) -> NodeId {
        let id = NodeId(self.nodes.keys().next_back().map_or(0, |n| n.0 + 1));
        self.nodes.insert(
            id,
            ComputeNode {
                id,
                hw_threads,
                ram_gb,
                resident: BTreeSet::new(),
                maintenance: false,
                used_vcpus: 0,
                used_ram_gb: 0,
            },
        );
        id
    }

    /// Checks a volume allocation without committing it.
    pub fn check_volume(&self, project: &str, bytes: u64, source_image: Option<&str>) -> Result<()> {
        let p = self.project(project)?;
        if bytes == 0 {
            return Err(ControlError::InvalidSize("volume must be > 0 bytes".into()));
        }
        if let Some(name) = source_image {
            let image = self
                .images
                .get(name)
                .ok_or_else(|| ControlError::NoSuchImage(name.to_string()))?;
            if bytes < image.bytes {
                return Err(ControlError::InvalidSize(format!(
                    "clone of {name} needs at least {} bytes",
                    image.bytes
                )));
            }
        }
        let available = p
            .subscription
            .volume_quota_bytes()
            .saturating_sub(p.usage.volume_bytes);
        if bytes > available {
            return Err(ControlError::VolumeQuotaExceeded {
                requested: bytes,
                available,
            });
        }
        Ok(())
    }

    /// Registers a volume. A clone only records its source image; the full
    /// logical size still counts toward quota.
    pub fn create_volume(
        &mut self,
        project: &str,
        bytes: u64,
        source_image: Option<&str>,
    ) -> Result<&Volume> {
        self.check_volume(project, bytes, source_image)?;
        let id = self.alloc_volume_id();
        self.insert_volume(Volume {
            id,
            project: project.to_string(),
            logical_bytes: bytes,
            kind: VolumeKind::Volume,
            source_image: source_image.map(str::to_string),
            source_volume: None,
            attached_to: None,
        })
    }

    /// Size a snapshot of `volume` would be charged.
    pub fn snapshot_size(&self, project: &str, volume: VolumeId) -> Result<u64> {
        let v = self.volume(volume)?;
        if v.project != project {
            return Err(ControlError::NoSuchVolume(volume));
        }
        Ok(v.logical_bytes)
    }

    /// Snapshots are charged at the source's full logical size.
    pub fn snapshot_volume(&mut self, project: &str, volume: VolumeId) -> Result<&Volume> {
        let bytes = self.snapshot_size(project, volume)?;
        self.check_volume(project, bytes, None)?;
        let source_image = self.volumes[&volume].source_image.clone();
        let id = self.alloc_volume_id();
        self.insert_volume(Volume {
            id,
            project: project.to_string(),
            logical_bytes: bytes,
            kind: VolumeKind::Snapshot,
            source_image,
            source_volume: Some(volume),
            attached_to: None,
        })
    }

    pub fn delete_volume(&mut self, project: &str, volume: VolumeId) -> Result<Volume> {
        let v = self.volume(volume)?;
        if v.project != project {
            return Err(ControlError::NoSuchVolume(volume));
        }
        if v.attached_to.is_some() {
            return Err(ControlError::VolumeInUse(volume));
        }
        let v = self.volumes.remove(&volume).unwrap();
        self.project_mut(project)?.usage.volume_bytes -= v.logical_bytes;
        Ok(v)
    }

    /// First-fit over nodes by ascending id.
    pub fn launch_vm(
        &mut self,
        project: &str,
        vcpus: u32,
        ram_gb: u32,
        boot_volume: VolumeId,
    ) -> Result<&Vm> {
        if vcpus == 0 || ram_gb == 0 {
            return Err(ControlError::InvalidSize("VM needs vCPUs and RAM".into()));
        }
        let p = self.project(project)?;
        let sub = p.subscription;
        let quota_check = |resource, used: u32, quota: u32, req: u32| {
            let available = quota.saturating_sub(used);
            if req > available {
                Err(ControlError::ProjectQuotaExceeded {
                    resource,
                    requested: req as u64,
                    available: available as u64,
                })
            } else {
                Ok(())
            }
        };
        quota_check("vcpus", p.usage.vcpus, sub.vcpu_quota(), vcpus)?;
        quota_check("ram_gb", p.usage.ram_gb, sub.ram_quota_gb(), ram_gb)?;
        let vol = self.volume(boot_volume)?;
        if vol.project != project {
            return Err(ControlError::NoSuchVolume(boot_volume));
        }
        if vol.kind != VolumeKind::Volume {
            return Err(ControlError::NotBootable(boot_volume));
        }
        if vol.attached_to.is_some() {
            return Err(ControlError::VolumeInUse(boot_volume));
        }
        let host = self
            .nodes
            .values()
            .find(|n| n.fits(vcpus, ram_gb))
            .map(|n| n.id)
            .ok_or(ControlError::CapacityExhausted { vcpus, ram_gb })?;

        self.next_vm += 1;
        let id = VmId(self.next_vm);
        let node = self.nodes.get_mut(&host).unwrap();
        node.used_vcpus += vcpus;
        node.used_ram_gb += ram_gb;
        node.resident.insert(id);
        let usage = &mut self.projects.get_mut(project).unwrap().usage;
        usage.vcpus += vcpus;
        usage.ram_gb += ram_gb;
        self.volumes.get_mut(&boot_volume).unwrap().attached_to = Some(id);
        self.vms.insert(
            id,
            Vm {
                id,
                project: project.to_string(),
                vcpus,
                ram_gb,
                boot_volume,
                host,
            },
        );
        Ok(&self.vms[&id])
    }

    pub fn delete_vm(&mut self, id: VmId) -> Result<Vm> {
        let vm = self.vms.remove(&id).ok_or(ControlError::NoSuchVm(id))?;
        let node = self.nodes.get_mut(&vm.host).expect("host exists");
        node.used_vcpus -= vm.vcpus;
        node.used_ram_gb -= vm.ram_gb;
        node.resident.remove(&id);
        let usage = &mut self.projects.get_mut(&vm.project).expect("owner exists").usage;
        usage.vcpus -= vm.vcpus;
        usage.ram_gb -= vm.ram_gb;
        if let Some(v) = self.volumes.get_mut(&vm.boot_volume) {
            v.attached_to = None;
        }
        Ok(vm)
    }

    /// Computes a first-fit live-migration plan for every VM on `node`
    /// against the other schedulable nodes, without changing anything.
    pub fn plan_drain(&self, node: NodeId) -> Result<MigrationPlan> {
        let source = self.node(node)?;
        let mut targets: Vec<ComputeNode> = self
            .nodes
            .values()
            .filter(|n| n.id != node && !n.maintenance)
            .cloned()
            .collect();
        let mut moves = Vec::new();
        for &vm_id in &source.resident {
            let vm = &self.vms[&vm_id];
            let target = targets
                .iter_mut()
                .find(|n| n.fits(vm.vcpus, vm.ram_gb))
                .ok_or(ControlError::InsufficientClusterHeadroom { node, vm: vm_id })?;
            target.used_vcpus += vm.vcpus;
            target.used_ram_gb += vm.ram_gb;
            moves.push(Migration {
                vm: vm_id,
                from: node,
                to: target.id,
            });
        }
        Ok(MigrationPlan { node, moves })
    }

    /// Live-migrates every VM off `node` and puts it in maintenance, or
    /// changes nothing.
    pub fn drain_node(&mut self, node: NodeId) -> Result<MigrationPlan> {
        let plan = self.plan_drain(node)?;
        for m in &plan.moves {
            let vm = self.vms.get_mut(&m.vm).unwrap();
            let (vcpus, ram) = (vm.vcpus, vm.ram_gb);
            vm.host = m.to;
            let from = self.nodes.get_mut(&m.from).unwrap();
            from.used_vcpus -= vcpus;
            from.used_ram_gb -= ram;
            from.resident.remove(&m.vm);
            let to = self.nodes.get_mut(&m.to).unwrap();
            to.used_vcpus += vcpus;
            to.used_ram_gb += ram;
            to.resident.insert(m.vm);
        }
        self.nodes.get_mut(&node).unwrap().maintenance = true;
        Ok(plan)
    }

    /// Returns a node to service. Nothing migrates back.
    pub fn undrain_node(&mut self, node: NodeId) -> Result<()> {
        self.nodes
            .get_mut(&node)
            .ok_or(ControlError::NoSuchNode(node))?
            .maintenance = false;
        Ok(())
    }

    /// Recomputes every usage counter from first principles and reports
    /// the first mismatch or capacity violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for n in self.nodes.values() {
            let (vcpus, ram) = n.resident.iter().fold((0, 0), |(c, r), id| {
                let vm = &self.vms[id];
                (c + vm.vcpus, r + vm.ram_gb)
            });
            if (vcpus, ram) != (n.used_vcpus, n.used_ram_gb) {
                return Err(format!("{} usage counters drifted", n.id));
            }
            if vcpus > n.vcpu_capacity() || ram > n.ram_capacity_gb() {
                return Err(format!("{} over capacity", n.id));
            }
            if n.maintenance && !n.resident.is_empty() {
                return Err(format!("{} in maintenance still hosts VMs", n.id));
            }
        }
        for vm in self.vms.values() {
            if !self.nodes[&vm.host].resident.contains(&vm.id) {
                return Err(format!("{} not resident on its host", vm.id));
            }
        }
        for p in self.projects.values() {
            let vcpus: u32 = self.vms.values().filter(|v| v.project == p.id).map(|v| v.vcpus).sum();
            let ram: u32 = self.vms.values().filter(|v| v.project == p.id).map(|v| v.ram_gb).sum();
            let vol: u64 = self
                .volumes
                .values()
                .filter(|v| v.project == p.id)
                .map(|v| v.logical_bytes)
                .sum();
            let expected = Usage {
                vcpus,
                ram_gb: ram,
                volume_bytes: vol,
            };
            if expected != p.usage {
                return Err(format!("project {} usage {:?} != {:?}", p.id, p.usage, expected));
            }
            let s = &p.subscription;
            if vcpus > s.vcpu_quota() || ram > s.ram_quota_gb() || vol > s.volume_quota_bytes() {
                return Err(format!("project {} over quota", p.id));
            }
        }
        Ok(())
    }

    fn project_mut(&mut self, id: &str) -> Result<&mut Project> {
        self.projects
            .get_mut(id)
            .ok_or_else(|| ControlError::NoSuchProject(id.to_string()))
    }

    fn alloc_volume_id(&mut self) -> VolumeId {
        self.next_volume += 1;
        VolumeId(self.next_volume)
    }

    fn insert_volume(&mut self, volume: Volume) -> Result<&Volume> {
        let id = volume.id;
        self.project_mut(&volume.project)?.usage.volume_bytes += volume.logical_bytes;
        self.volumes.insert(id, volume);
        Ok(&self.volumes[&id])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Twenty dual 14-core hyper-threaded nodes with 256 GB each.
    fn reference_cluster() -> ControlPlane {
        let mut cp = ControlPlane::new();
        for _ in 0..20 {
            cp.add_node(56, 256);
        }
        cp
    }

    fn roomy() -> Subscription {
        Subscription {
            vcpus: 10_000,
            ram_gb: 100_000,
            volume_tb: 1_000,
            ..Subscription::base()
        }
    }

    fn boot(cp: &mut ControlPlane, project: &str) -> VolumeId {
        cp.create_volume(project, 10 * GB, None).unwrap().id
    }

    #[test]
    fn capacity_of_reference_cluster() {
        let cp = reference_cluster();
        assert_eq!(cp.total_vcpu_capacity(), 2_240);
        assert_eq!(cp.node(NodeId(0)).unwrap().vcpu_capacity(), 112);
    }

    #[test]
    fn seven_sixteen_vcpu_vms_per_node() {
        let mut cp = ControlPlane::new();
        cp.add_node(56, 256);
        cp.create_project("big", roomy()).unwrap();
        for _ in 0..7 {
            let v = boot(&mut cp, "big");
            cp.launch_vm("big", 16, 32, v).unwrap();
        }
        let v = boot(&mut cp, "big");
        assert_eq!(
            cp.launch_vm("big", 16, 32, v).unwrap_err(),
            ControlError::CapacityExhausted { vcpus: 16, ram_gb: 32 }
        );
        cp.add_node(56, 256);
        assert_eq!(cp.launch_vm("big", 16, 32, v).unwrap().host, NodeId(1));
    }

    #[test]
    fn ram_is_not_oversubscribed() {
        let mut cp = ControlPlane::new();
        cp.add_node(56, 256);
        cp.create_project("big", roomy()).unwrap();
        for i in 0..9 {
            let v = boot(&mut cp, "big");
            let r = cp.launch_vm("big", 1, 32, v);
            if i < 8 {
                r.unwrap();
            } else {
                assert_eq!(r.unwrap_err().name(), "CapacityExhausted");
            }
        }
    }

    #[test]
    fn base_subscription_vcpu_quota() {
        let mut cp = reference_cluster();
        cp.create_project("p1", Subscription::base()).unwrap();
        let a = boot(&mut cp, "p1");
        cp.launch_vm("p1", 16, 16, a).unwrap();
        let b = boot(&mut cp, "p1");
        let err = cp.launch_vm("p1", 1, 1, b).unwrap_err();
        assert_eq!(err.name(), "ProjectQuotaExceeded");
        cp.set_addons("p1", 1, 0).unwrap();
        cp.launch_vm("p1", 1, 1, b).unwrap();
        assert_eq!(cp.set_addons("p1", 0, 0).unwrap_err().name(), "QuotaBelowUsage");
    }

    #[test]
    fn volume_quota_counts_snapshots() {
        let mut cp = ControlPlane::new();
        cp.create_project("p1", Subscription::base()).unwrap();
        let v = cp.create_volume("p1", 1_500 * GB, None).unwrap().id;
        assert_eq!(
            cp.create_volume("p1", 600 * GB, None).unwrap_err().name(),
            "VolumeQuotaExceeded"
        );
        assert_eq!(cp.snapshot_volume("p1", v).unwrap_err().name(), "VolumeQuotaExceeded");
        let small = cp.create_volume("p1", 200 * GB, None).unwrap().id;
        let snap = cp.snapshot_volume("p1", small).unwrap().clone();
        assert_eq!(snap.kind, VolumeKind::Snapshot);
        assert_eq!(snap.logical_bytes, 200 * GB);
        assert_eq!(cp.project("p1").unwrap().usage.volume_bytes, 1_900 * GB);
        cp.delete_volume("p1", v).unwrap();
        assert_eq!(cp.project("p1").unwrap().usage.volume_bytes, 400 * GB);
        cp.check_invariants().unwrap();
    }

    #[test]
    fn clone_charges_logical_size() {
        let mut cp = ControlPlane::new();
        cp.create_project("p1", Subscription::base()).unwrap();
        cp.register_image("Centos7_dbgap_blessed_desktop", 10 * GB).unwrap();
        let v = cp
            .create_volume("p1", 10 * GB, Some("Centos7_dbgap_blessed_desktop"))
            .unwrap()
            .clone();
        assert_eq!(v.source_image.as_deref(), Some("Centos7_dbgap_blessed_desktop"));
        assert_eq!(cp.project("p1").unwrap().usage.volume_bytes, 10 * GB);
        assert_eq!(
            cp.create_volume("p1", GB, Some("Centos7_dbgap_blessed_desktop")).unwrap_err().name(),
            "InvalidSize"
        );
        assert_eq!(cp.create_volume("p1", GB, Some("nope")).unwrap_err().name(), "NoSuchImage");
        assert_eq!(cp.register_image("foo", 1).unwrap_err().name(), "MalformedName");
    }

    #[test]
    fn attached_volume_cannot_be_deleted_or_reused() {
        let mut cp = reference_cluster();
        cp.create_project("p1", Subscription::base()).unwrap();
        let v = boot(&mut cp, "p1");
        let vm = cp.launch_vm("p1", 2, 4, v).unwrap().id;
        assert_eq!(cp.delete_volume("p1", v).unwrap_err().name(), "VolumeInUse");
        assert_eq!(cp.launch_vm("p1", 2, 4, v).unwrap_err().name(), "VolumeInUse");
        let snap = cp.snapshot_volume("p1", v).unwrap().id;
        assert_eq!(cp.launch_vm("p1", 2, 4, snap).unwrap_err().name(), "NotBootable");
        cp.delete_vm(vm).unwrap();
        cp.delete_volume("p1", v).unwrap();
        cp.check_invariants().unwrap();
    }

    #[test]
    fn drain_moves_vm_to_other_node() {
        let mut cp = ControlPlane::new();
        let a = cp.add_node(56, 256);
        let b = cp.add_node(56, 256);
        cp.create_project("p", roomy()).unwrap();
        let v = boot(&mut cp, "p");
        let vm = cp.launch_vm("p", 16, 32, v).unwrap().id;
        let plan = cp.drain_node(a).unwrap();
        assert_eq!(plan.moves, vec![Migration { vm, from: a, to: b }]);
        assert_eq!(cp.vm(vm).unwrap().host, b);
        assert!(cp.node(a).unwrap().maintenance);
        cp.check_invariants().unwrap();

        // Undrain does not move anything back, and new VMs may land on it again.
        cp.undrain_node(a).unwrap();
        assert_eq!(cp.vm(vm).unwrap().host, b);
        let v2 = boot(&mut cp, "p");
        assert_eq!(cp.launch_vm("p", 1, 1, v2).unwrap().host, a);
    }

    #[test]
    fn failed_drain_changes_nothing() {
        let mut cp = ControlPlane::new();
        let a = cp.add_node(8, 32);
        cp.add_node(8, 32);
        cp.create_project("p", roomy()).unwrap();
        for _ in 0..2 {
            let v = boot(&mut cp, "p");
            cp.launch_vm("p", 16, 32, v).unwrap();
        }
        let before = cp.clone();
        assert_eq!(cp.drain_node(a).unwrap_err().name(), "InsufficientClusterHeadroom");
        assert_eq!(cp, before);
    }

    #[test]
    fn maintenance_node_not_scheduled() {
        let mut cp = ControlPlane::new();
        let a = cp.add_node(8, 32);
        cp.create_project("p", roomy()).unwrap();
        cp.drain_node(a).unwrap();
        let v = boot(&mut cp, "p");
        assert_eq!(cp.launch_vm("p", 1, 1, v).unwrap_err().name(), "CapacityExhausted");
    }

    #[test]
    fn ids_round_trip() {
        assert_eq!("vm-12".parse::<VmId>().unwrap(), VmId(12));
        assert_eq!("7".parse::<NodeId>().unwrap(), NodeId(7));
        assert_eq!(VolumeId(3).to_string(), "vol-3");
    }
}
