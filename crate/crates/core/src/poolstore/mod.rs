//! Storage plane: simulated OSDs, shard placement, replication, erasure
//! coding, failure repair and backend byte accounting.

pub mod erasure;
pub mod placement;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::serde_util::shard_map;
pub use erasure::{CodecError, ReedSolomon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OsdId(pub u32);

impl fmt::Display for OsdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "osd.{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PoolError {
    #[error("insufficient up OSDs: need {needed}, have {up}")]
    InsufficientOsds { needed: usize, up: usize },
    #[error("pool {0} already exists")]
    DuplicatePoolName(String),
    #[error("no such pool {0}")]
    NoSuchPool(String),
    #[error("no such OSD {0}")]
    NoSuchOsd(OsdId),
    #[error("pool {pool} quota exceeded: {requested} bytes requested, {available} available")]
    PoolQuotaExceeded {
        pool: String,
        requested: u64,
        available: u64,
    },
    #[error("object {0} not found")]
    ObjectNotFound(String),
    #[error("object {0} is unrecoverable")]
    Unrecoverable(String),
    #[error("{0} has no room for the shard")]
    OsdFull(OsdId),
    #[error("invalid redundancy: {0}")]
    InvalidRedundancy(String),
    #[error("pool quotas would exceed raw capacity at worst-case amplification")]
    CapacityOvercommitted,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl PoolError {
    pub fn name(&self) -> &'static str {
        match self {
            PoolError::InsufficientOsds { .. } => "InsufficientOsds",
            PoolError::DuplicatePoolName(_) => "DuplicatePoolName",
            PoolError::NoSuchPool(_) => "NoSuchPool",
            PoolError::NoSuchOsd(_) => "NoSuchOsd",
            PoolError::PoolQuotaExceeded { .. } => "PoolQuotaExceeded",
            PoolError::ObjectNotFound(_) => "ObjectNotFound",
            PoolError::Unrecoverable(_) => "Unrecoverable",
            PoolError::OsdFull(_) => "OsdFull",
            PoolError::InvalidRedundancy(_) => "InvalidRedundancy",
            PoolError::CapacityOvercommitted => "CapacityOvercommitted",
            PoolError::Codec(e) => e.name(),
        }
    }
}

pub type Result<T> = std::result::Result<T, PoolError>;

/// Redundancy scheme of a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Redundancy {
    Replicated { copies: u8 },
    ErasureCoded { data: u8, parity: u8 },
}

impl Redundancy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Redundancy::Replicated { copies } if copies >= 1 => Ok(()),
            Redundancy::ErasureCoded { data, parity }
                if data >= 1 && parity >= 1 && data as usize + parity as usize <= 256 =>
            {
                Ok(())
            }
            other => Err(PoolError::InvalidRedundancy(other.to_string())),
        }
    }

    /// Number of shards (or copies) per object.
    pub fn width(&self) -> usize {
        match *self {
            Redundancy::Replicated { copies } => copies as usize,
            Redundancy::ErasureCoded { data, parity } => data as usize + parity as usize,
        }
    }

    /// Shards that may be lost while the object stays readable.
    pub fn tolerated_losses(&self) -> usize {
        match *self {
            Redundancy::Replicated { copies } => copies as usize - 1,
            Redundancy::ErasureCoded { parity, .. } => parity as usize,
        }
    }

    /// Nominal backend bytes per logical byte: r, or (k+m)/k.
    pub fn amplification(&self) -> f64 {
        match *self {
            Redundancy::Replicated { copies } => copies as f64,
            Redundancy::ErasureCoded { data, parity } => {
                (data as f64 + parity as f64) / data as f64
            }
        }
    }

    pub fn shard_size(&self, len: u64) -> u64 {
        match *self {
            Redundancy::Replicated { .. } => len,
            Redundancy::ErasureCoded { data, .. } => len.div_ceil(data as u64),
        }
    }

    /// Exact backend bytes for one object of `len` bytes, padding included.
    pub fn backend_bytes(&self, len: u64) -> u64 {
        self.shard_size(len) * self.width() as u64
    }
}

impl fmt::Display for Redundancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Redundancy::Replicated { copies } => write!(f, "rep:{copies}"),
            Redundancy::ErasureCoded { data, parity } => write!(f, "ec:{data},{parity}"),
        }
    }
}

impl FromStr for Redundancy {
    type Err = PoolError;

    /// Parses `rep:3` or `ec:4,2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || PoolError::InvalidRedundancy(s.to_string());
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let r = match kind {
            "rep" | "replicated" => Redundancy::Replicated {
                copies: args.trim().parse().map_err(|_| bad())?,
            },
            "ec" => {
                let (k, m) = args.split_once(',').ok_or_else(bad)?;
                Redundancy::ErasureCoded {
                    data: k.trim().parse().map_err(|_| bad())?,
                    parity: m.trim().parse().map_err(|_| bad())?,
                }
            }
            _ => return Err(bad()),
        };
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolRole {
    Block,
    S3cache,
    S3secure,
    S3general,
}

impl fmt::Display for PoolRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolRole::Block => "block",
            PoolRole::S3cache => "s3cache",
            PoolRole::S3secure => "s3secure",
            PoolRole::S3general => "s3general",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub name: String,
    pub redundancy: Redundancy,
    /// Logical byte cap.
    pub quota_bytes: u64,
    pub role: PoolRole,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShardKey {
    pub pool: String,
    pub object_id: String,
    pub index: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OsdNode {
    pub id: OsdId,
    pub capacity_bytes: u64,
    pub up: bool,
    /// At-rest encryption flag. The key itself lives in the cluster keystore.
    pub encrypted_at_rest: bool,
    #[serde(with = "shard_map")]
    shards: BTreeMap<ShardKey, Vec<u8>>,
}

impl OsdNode {
    fn new(id: OsdId, capacity_bytes: u64) -> Self {
        Self {
            id,
            capacity_bytes,
            up: true,
            encrypted_at_rest: false,
            shards: BTreeMap::new(),
        }
    }

    pub fn used_bytes(&self) -> u64 {
        self.shards.values().map(|s| s.len() as u64).sum()
    }

    pub fn stored_shards(&self) -> BTreeMap<ShardKey, u64> {
        self.shards
            .iter()
            .map(|(k, v)| (k.clone(), v.len() as u64))
            .collect()
    }

    /// Raw shard bytes as they sit on the device.
    pub fn raw_shards(&self) -> impl Iterator<Item = (&ShardKey, &[u8])> {
        self.shards.iter().map(|(k, v)| (k, v.as_slice()))
    }
}

/// Placement of one object: which OSD holds which shard index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeMap {
    pub pool: String,
    pub object_id: String,
    pub shard_size: u64,
    /// True payload length; EC shards are zero-padded past it.
    pub payload_len: u64,
    pub locations: Vec<(OsdId, u16)>,
    pub scheme: Redundancy,
}

impl StripeMap {
    pub fn backend_bytes(&self) -> u64 {
        self.shard_size * self.locations.len() as u64
    }

    fn key(&self, index: u16) -> ShardKey {
        ShardKey {
            pool: self.pool.clone(),
            object_id: self.object_id.clone(),
            index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub spec: PoolSpec,
    objects: BTreeMap<String, StripeMap>,
    /// Thin-provisioned block reservations (volumes) counted against quota.
    reserved_bytes: u64,
}

impl Pool {
    pub fn logical_bytes(&self) -> u64 {
        self.objects.values().map(|s| s.payload_len).sum::<u64>() + self.reserved_bytes
    }

    pub fn reserved_bytes(&self) -> u64 {
        self.reserved_bytes
    }

    pub fn stripe(&self, object_id: &str) -> Option<&StripeMap> {
        self.objects.get(object_id)
    }

    pub fn stripes(&self) -> impl Iterator<Item = &StripeMap> {
        self.objects.values()
    }

    fn available(&self) -> u64 {
        self.spec.quota_bytes.saturating_sub(self.logical_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    pub logical_bytes: u64,
    pub backend_bytes: u64,
    /// backend / logical; 0 for an empty pool.
    pub amplification: f64,
}

/// At-rest key record, stored apart from OSD shard state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtRestKey {
    pub osd: OsdId,
    pub key_id: String,
    pub key_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RepairReport {
    pub pool: String,
    /// (object, shard index, new OSD)
    pub rebuilt: Vec<(String, u16, OsdId)>,
    pub unrecoverable: Vec<String>,
    pub bytes_written: u64,
}

impl RepairReport {
    pub fn is_noop(&self) -> bool {
        self.rebuilt.is_empty() && self.unrecoverable.is_empty()
    }

    /// Line-oriented text table.
    pub fn render(&self) -> String {
        let mut out = format!("{:<10} {:<32} {:>5} {:>8}\n", "STATUS", "OBJECT", "SHARD", "TARGET");
        for (obj, idx, osd) in &self.rebuilt {
            out.push_str(&format!("{:<10} {:<32} {:>5} {:>8}\n", "rebuilt", obj, idx, osd.to_string()));
        }
        for obj in &self.unrecoverable {
            out.push_str(&format!("{:<10} {:<32} {:>5} {:>8}\n", "lost", obj, "-", "-"));
        }
        out.push_str(&format!(
            "pool={} rebuilt={} unrecoverable={} bytes_written={}\n",
            self.pool,
            self.rebuilt.len(),
            self.unrecoverable.len(),
            self.bytes_written
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cluster {
    osds: BTreeMap<OsdId, OsdNode>,
    pools: BTreeMap<String, Pool>,
    keystore: BTreeMap<OsdId, AtRestKey>,
}

impl Cluster {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cluster of `count` OSDs of `capacity_bytes` each.
    pub fn with_osds(count: u32, capacity_bytes: u64) -> Self {
        let mut c = Self::new();
        for _ in 0..count {
            c.add_osd(capacity_bytes);
        }
        c
    }

    pub fn add_osd(&mut self, capacity_bytes: u64) -> OsdId {
        let id = OsdId(self.osds.keys().next_back().map_or(0, |i| i.0 + 1));
        self.osds.insert(id, OsdNode::new(id, capacity_bytes));
        id
    }

    pub fn osd(&self, id: OsdId) -> Option<&OsdNode> {
        self.osds.get(&id)
    }

    pub fn osds(&self) -> impl Iterator<Item = &OsdNode> {
        self.osds.values()
    }

    pub fn up_count(&self) -> usize {
        self.osds.values().filter(|o| o.up).count()
    }

    pub fn raw_capacity(&self) -> u64 {
        self.osds.values().map(|o| o.capacity_bytes).sum()
    }

    /// Turns on the at-rest encryption flag and files the key in the keystore.
    pub fn enable_at_rest_encryption(&mut self, id: OsdId) -> Result<&AtRestKey> {
        let osd = self.osds.get_mut(&id).ok_or(PoolError::NoSuchOsd(id))?;
        osd.encrypted_at_rest = true;
        let key = Sha256::digest(format!("at-rest:{}:{}", id.0, osd.capacity_bytes));
        let record = AtRestKey {
            osd: id,
            key_id: format!("luks-{}", id.0),
            key_hex: hex::encode(key),
        };
        Ok(self.keystore.entry(id).or_insert(record))
    }

    pub fn at_rest_key(&self, id: OsdId) -> Option<&AtRestKey> {
        self.keystore.get(&id)
    }

    pub fn create_pool(&mut self, spec: PoolSpec) -> Result<String> {
        spec.redundancy.validate()?;
        if self.pools.contains_key(&spec.name) {
            return Err(PoolError::DuplicatePoolName(spec.name));
        }
        let needed = spec.redundancy.width();
        let up = self.up_count();
        if up < needed {
            return Err(PoolError::InsufficientOsds { needed, up });
        }
        let total_quota: u128 = self
            .pools
            .values()
            .map(|p| p.spec.quota_bytes as u128)
            .sum::<u128>()
            + spec.quota_bytes as u128;
        let max_amp = self
            .pools
            .values()
            .map(|p| p.spec.redundancy.amplification())
            .fold(spec.redundancy.amplification(), f64::max);
        if total_quota as f64 * max_amp > self.raw_capacity() as f64 {
            return Err(PoolError::CapacityOvercommitted);
        }
        let name = spec.name.clone();
        self.pools.insert(
            name.clone(),
            Pool {
                spec,
                objects: BTreeMap::new(),
                reserved_bytes: 0,
            },
        );
        Ok(name)
    }

    pub fn pool(&self, name: &str) -> Result<&Pool> {
        self.pools
            .get(name)
            .ok_or_else(|| PoolError::NoSuchPool(name.to_string()))
    }

    pub fn pools(&self) -> impl Iterator<Item = &Pool> {
        self.pools.values()
    }

    /// First pool registered for `role`.
    pub fn pool_for_role(&self, role: PoolRole) -> Option<&Pool> {
        self.pools.values().find(|p| p.spec.role == role)
    }

    /// Deterministic placement of `stripe_width` shards of one object.
    pub fn place_shards(&self, pool: &str, object_id: &str, stripe_width: usize) -> Result<StripeMap> {
        let p = self.pool(pool)?;
        let locations = placement::place(
            pool,
            object_id,
            self.osds.values().map(|o| (o.id, o.up)),
            stripe_width,
        )
        .ok_or(PoolError::InsufficientOsds {
            needed: stripe_width,
            up: self.up_count(),
        })?;
        Ok(StripeMap {
            pool: pool.to_string(),
            object_id: object_id.to_string(),
            shard_size: 0,
            payload_len: 0,
            locations: locations
                .into_iter()
                .enumerate()
                .map(|(i, id)| (id, i as u16))
                .collect(),
            scheme: p.spec.redundancy,
        })
    }

    /// Stores `payload`, replacing any previous object under the same id.
    pub fn write_object(
        &mut self,
        pool: &str,
        object_id: &str,
        payload: &[u8],
    ) -> Result<(StripeMap, u64)> {
        let p = self.pool(pool)?;
        let len = payload.len() as u64;
        let previous = p.objects.get(object_id).map_or(0, |s| s.payload_len);
        let available = p.available() + previous;
        if len > available {
            return Err(PoolError::PoolQuotaExceeded {
                pool: pool.to_string(),
                requested: len,
                available,
            });
        }
        let scheme = p.spec.redundancy;
        let mut stripe = self.place_shards(pool, object_id, scheme.width())?;
        let shards: Vec<Vec<u8>> = match scheme {
            Redundancy::Replicated { copies } => vec![payload.to_vec(); copies as usize],
            Redundancy::ErasureCoded { data, parity } => {
                ReedSolomon::new(data as usize, parity as usize)?.encode_payload(payload)
            }
        };
        stripe.shard_size = scheme.shard_size(len);
        stripe.payload_len = len;

        let old = self.pools[pool].objects.get(object_id).cloned();
        for &(osd, idx) in &stripe.locations {
            let node = &self.osds[&osd];
            let replaced = old
                .as_ref()
                .filter(|o| o.locations.contains(&(osd, idx)))
                .map_or(0, |o| o.shard_size);
            if node.used_bytes() - replaced + stripe.shard_size > node.capacity_bytes {
                return Err(PoolError::OsdFull(osd));
            }
        }
        if let Some(old) = old {
            self.drop_shards(&old);
        }
        for (&(osd, idx), data) in stripe.locations.iter().zip(shards) {
            let key = stripe.key(idx);
            self.osds.get_mut(&osd).unwrap().shards.insert(key, data);
        }
        let backend = stripe.backend_bytes();
        self.pools
            .get_mut(pool)
            .unwrap()
            .objects
            .insert(object_id.to_string(), stripe.clone());
        Ok((stripe, backend))
    }

    pub fn read_object(&self, pool: &str, object_id: &str) -> Result<Vec<u8>> {
        let stripe = self
            .pool(pool)?
            .objects
            .get(object_id)
            .ok_or_else(|| PoolError::ObjectNotFound(object_id.to_string()))?;
        let unrecoverable = || PoolError::Unrecoverable(object_id.to_string());
        match stripe.scheme {
            Redundancy::Replicated { .. } => stripe
                .locations
                .iter()
                .find_map(|&(osd, idx)| self.live_shard(osd, &stripe.key(idx)))
                .map(<[u8]>::to_vec)
                .ok_or_else(unrecoverable),
            Redundancy::ErasureCoded { data, parity } => {
                let rs = ReedSolomon::new(data as usize, parity as usize)?;
                let shards = self.gather(stripe, rs.total_shards());
                rs.decode_payload(&shards, stripe.payload_len as usize)
                    .map_err(|e| match e {
                        CodecError::TooManyErasures { .. } => unrecoverable(),
                        other => other.into(),
                    })
            }
        }
    }

    /// Removes an object, returning the logical bytes freed.
    pub fn delete_object(&mut self, pool: &str, object_id: &str) -> Result<u64> {
        self.pool(pool)?;
        let stripe = self
            .pools
            .get_mut(pool)
            .unwrap()
            .objects
            .remove(object_id)
            .ok_or_else(|| PoolError::ObjectNotFound(object_id.to_string()))?;
        self.drop_shards(&stripe);
        Ok(stripe.payload_len)
    }

    /// Counts `bytes` of thin-provisioned block capacity against the quota.
    pub fn reserve(&mut self, pool: &str, bytes: u64) -> Result<()> {
        let p = self.pool(pool)?;
        let available = p.available();
        if bytes > available {
            return Err(PoolError::PoolQuotaExceeded {
                pool: pool.to_string(),
                requested: bytes,
                available,
            });
        }
        self.pools.get_mut(pool).unwrap().reserved_bytes += bytes;
        Ok(())
    }

    pub fn release(&mut self, pool: &str, bytes: u64) -> Result<()> {
        self.pool(pool)?;
        let p = self.pools.get_mut(pool).unwrap();
        p.reserved_bytes = p.reserved_bytes.saturating_sub(bytes);
        Ok(())
    }

    pub fn fail_osd(&mut self, id: OsdId) -> Result<()> {
        self.osds.get_mut(&id).ok_or(PoolError::NoSuchOsd(id))?.up = false;
        Ok(())
    }

    pub fn restore_osd(&mut self, id: OsdId) -> Result<()> {
        self.osds.get_mut(&id).ok_or(PoolError::NoSuchOsd(id))?.up = true;
        Ok(())
    }

    /// Rebuilds shards whose OSD is down onto up OSDs outside the stripe.
    pub fn repair(&mut self, pool: &str) -> Result<RepairReport> {
        let object_ids: Vec<String> = self.pool(pool)?.objects.keys().cloned().collect();
        let mut report = RepairReport {
            pool: pool.to_string(),
            ..Default::default()
        };
        for object_id in object_ids {
            let stripe = self.pools[pool].objects[&object_id].clone();
            let lost: Vec<usize> = stripe
                .locations
                .iter()
                .enumerate()
                .filter(|(_, (osd, _))| !self.osds[osd].up)
                .map(|(pos, _)| pos)
                .collect();
            if lost.is_empty() {
                continue;
            }
            let shards = match self.rebuild_all(&stripe) {
                Some(s) => s,
                None => {
                    report.unrecoverable.push(object_id);
                    continue;
                }
            };
            let mut updated = stripe.clone();
            let mut members: BTreeSet<OsdId> = stripe.locations.iter().map(|l| l.0).collect();
            let ranked = placement::rank(pool, &object_id, self.osds.keys().copied());
            for pos in lost {
                let (old_osd, idx) = stripe.locations[pos];
                let target = ranked.iter().copied().find(|id| {
                    let node = &self.osds[id];
                    node.up
                        && !members.contains(id)
                        && node.used_bytes() + stripe.shard_size <= node.capacity_bytes
                });
                let Some(target) = target else {
                    // No room now; a later repair with more OSDs can finish it.
                    continue;
                };
                let key = stripe.key(idx);
                self.osds.get_mut(&old_osd).unwrap().shards.remove(&key);
                self.osds
                    .get_mut(&target)
                    .unwrap()
                    .shards
                    .insert(key, shards[idx as usize].clone());
                members.insert(target);
                updated.locations[pos] = (target, idx);
                report.rebuilt.push((object_id.clone(), idx, target));
                report.bytes_written += stripe.shard_size;
            }
            self.pools
                .get_mut(pool)
                .unwrap()
                .objects
                .insert(object_id, updated);
        }
        Ok(report)
    }

    pub fn repair_all(&mut self) -> Vec<RepairReport> {
        let names: Vec<String> = self.pools.keys().cloned().collect();
        names
            .iter()
            .map(|n| self.repair(n).expect("pool listed"))
            .collect()
    }

    pub fn accounting(&self, pool: &str) -> Result<Accounting> {
        let p = self.pool(pool)?;
        let logical_bytes = p.logical_bytes();
        let backend_bytes = p.objects.values().map(StripeMap::backend_bytes).sum::<u64>()
            + p.spec.redundancy.backend_bytes(p.reserved_bytes);
        let amplification = if logical_bytes == 0 {
            0.0
        } else {
            backend_bytes as f64 / logical_bytes as f64
        };
        Ok(Accounting {
            logical_bytes,
            backend_bytes,
            amplification,
        })
    }

    fn live_shard(&self, osd: OsdId, key: &ShardKey) -> Option<&[u8]> {
        let node = self.osds.get(&osd)?;
        if !node.up {
            return None;
        }
        node.shards.get(key).map(Vec::as_slice)
    }

    fn gather(&self, stripe: &StripeMap, width: usize) -> Vec<Option<Vec<u8>>> {
        let mut shards = vec![None; width];
        for &(osd, idx) in &stripe.locations {
            if let Some(data) = self.live_shard(osd, &stripe.key(idx)) {
                shards[idx as usize] = Some(data.to_vec());
            }
        }
        shards
    }

    /// Every shard of the stripe, indexed by shard index, if recoverable.
    fn rebuild_all(&self, stripe: &StripeMap) -> Option<Vec<Vec<u8>>> {
        match stripe.scheme {
            Redundancy::Replicated { copies } => {
                let copy = stripe
                    .locations
                    .iter()
                    .find_map(|&(osd, idx)| self.live_shard(osd, &stripe.key(idx)))?;
                Some(vec![copy.to_vec(); copies as usize])
            }
            Redundancy::ErasureCoded { data, parity } => {
                let rs = ReedSolomon::new(data as usize, parity as usize).ok()?;
                let shards = self.gather(stripe, rs.total_shards());
                let mut blocks = rs.decode(&shards).ok()?;
                let parity = rs.encode(&blocks).ok()?;
                blocks.extend(parity);
                Some(blocks)
            }
        }
    }

    fn drop_shards(&mut self, stripe: &StripeMap) {
        for &(osd, idx) in &stripe.locations {
            if let Some(node) = self.osds.get_mut(&osd) {
                node.shards.remove(&stripe.key(idx));
            }
        }
    }
}
