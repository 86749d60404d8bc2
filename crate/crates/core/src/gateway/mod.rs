//! Tiered S3-subset object gateway.
//!
//! Buckets live in one of three tiers, each backed by its own storage pool:
//! the expiring dbGaP cache (`s3cache`), the persistent secure archive
//! (`s3secure`) and general object storage (`s3general`). Object creation
//! time is the only timestamp kept.

pub mod http;
pub mod sse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lifecycle::LifecyclePolicy;
use crate::poolstore::{Cluster, PoolError, PoolRole};
pub use sse::SseInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    S3cache,
    S3secure,
    S3general,
}

impl Tier {
    pub fn pool_role(self) -> PoolRole {
        match self {
            Tier::S3cache => PoolRole::S3cache,
            Tier::S3secure => PoolRole::S3secure,
            Tier::S3general => PoolRole::S3general,
        }
    }

    /// Controlled-data tiers need a dbGaP-approved project.
    pub fn requires_dbgap(self) -> bool {
        matches!(self, Tier::S3cache | Tier::S3secure)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.pool_role().fmt(f)
    }
}

impl FromStr for Tier {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s3cache" => Ok(Tier::S3cache),
            "s3secure" => Ok(Tier::S3secure),
            "s3general" => Ok(Tier::S3general),
            other => Err(GatewayError::ValidationError(format!("unknown tier {other}"))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("bucket name {0} is taken")]
    NameTaken(String),
    #[error("operation not permitted on tier {0}")]
    TierForbidden(Tier),
    #[error("invalid bucket name {0:?}")]
    InvalidName(String),
    #[error("no such bucket {0}")]
    NoSuchBucket(String),
    #[error("no such key {0}")]
    NoSuchKey(String),
    #[error("bucket {bucket} quota exceeded: {requested} bytes requested, {available} available")]
    BucketQuotaExceeded {
        bucket: String,
        requested: u64,
        available: u64,
    },
    #[error("object is encrypted with a customer key; none supplied")]
    KeyRequired,
    #[error("customer key does not match the object's key fingerprint")]
    KeyMismatch,
    #[error("validation error: {0}")]
    ValidationError(String),
    #[error("no storage pool backs tier {0}")]
    NoPoolForTier(Tier),
    #[error("stored ciphertext failed authentication")]
    IntegrityFailure,
    #[error(transparent)]
    Storage(#[from] PoolError),
}

impl GatewayError {
    pub fn name(&self) -> &'static str {
        match self {
            GatewayError::NameTaken(_) => "NameTaken",
            GatewayError::TierForbidden(_) => "TierForbidden",
            GatewayError::InvalidName(_) => "InvalidName",
            GatewayError::NoSuchBucket(_) => "NoSuchBucket",
            GatewayError::NoSuchKey(_) => "NoSuchKey",
            GatewayError::BucketQuotaExceeded { .. } => "BucketQuotaExceeded",
            GatewayError::KeyRequired => "KeyRequired",
            GatewayError::KeyMismatch => "KeyMismatch",
            GatewayError::ValidationError(_) => "ValidationError",
            GatewayError::NoPoolForTier(_) => "NoPoolForTier",
            GatewayError::IntegrityFailure => "IntegrityFailure",
            GatewayError::Storage(e) => e.name(),
        }
    }
}

pub type Result<T> = std::result::Result<T, GatewayError>;

/// 3–63 characters of lowercase ASCII letters, digits and hyphens.
pub fn validate_bucket_name(name: &str) -> Result<()> {
    let ok = (3..=63).contains(&name.len())
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-');
    if ok {
        Ok(())
    } else {
        Err(GatewayError::InvalidName(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMeta {
    pub key: String,
    /// Plaintext size.
    pub size: u64,
    pub created_ts: u64,
    /// Hex SHA-256 of the plaintext.
    pub content_hash: String,
    pub sse: Option<SseInfo>,
}

impl ObjectMeta {
    pub fn sse_fingerprint(&self) -> Option<&str> {
        self.sse.as_ref().map(|s| s.fingerprint.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub name: String,
    pub tier: Tier,
    pub owner: String,
    pub quota_bytes: u64,
    pub lifecycle: Option<LifecyclePolicy>,
    pub created_ts: u64,
    usage_bytes: u64,
    objects: BTreeMap<String, ObjectMeta>,
}

impl Bucket {
    pub fn usage_bytes(&self) -> u64 {
        self.usage_bytes
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectMeta> {
        self.objects.values()
    }

    pub fn object(&self, key: &str) -> Option<&ObjectMeta> {
        self.objects.get(key)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Pool object identity of a bucket key.
pub fn object_id(bucket: &str, key: &str) -> String {
    format!("{bucket}/{key}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListPage {
    pub entries: Vec<ObjectMeta>,
    /// Pass back to fetch the next page; `None` on the last page.
    pub continuation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gateway {
    buckets: BTreeMap<String, Bucket>,
    rng_seed: u64,
    nonce_counter: u64,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new(0)
    }
}

impl Gateway {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            buckets: BTreeMap::new(),
            rng_seed,
            nonce_counter: 0,
        }
    }

    pub fn buckets(&self) -> impl Iterator<Item = &Bucket> {
        self.buckets.values()
    }

    pub fn bucket(&self, name: &str) -> Result<&Bucket> {
        self.buckets
            .get(name)
            .ok_or_else(|| GatewayError::NoSuchBucket(name.to_string()))
    }

    fn bucket_mut(&mut self, name: &str) -> Result<&mut Bucket> {
        self.buckets
            .get_mut(name)
            .ok_or_else(|| GatewayError::NoSuchBucket(name.to_string()))
    }

    /// Pool name backing a tier.
    pub fn tier_pool(cluster: &Cluster, tier: Tier) -> Result<String> {
        cluster
            .pool_for_role(tier.pool_role())
            .map(|p| p.spec.name.clone())
            .ok_or(GatewayError::NoPoolForTier(tier))
    }

    /// Bucket names are unique across all tiers so request paths stay
    /// unambiguous. Cache buckets start with the default expiration policy.
    #[allow(clippy::too_many_arguments)]
    pub fn create_bucket(
        &mut self,
        cluster: &Cluster,
        owner: &str,
        dbgap_approved: bool,
        name: &str,
        tier: Tier,
        quota_bytes: u64,
        default_lifecycle: LifecyclePolicy,
        now: u64,
    ) -> Result<&Bucket> {
        validate_bucket_name(name)?;
        if tier.requires_dbgap() && !dbgap_approved {
            return Err(GatewayError::TierForbidden(tier));
        }
        if self.buckets.contains_key(name) {
            return Err(GatewayError::NameTaken(name.to_string()));
        }
        Self::tier_pool(cluster, tier)?;
        let bucket = Bucket {
            name: name.to_string(),
            tier,
            owner: owner.to_string(),
            quota_bytes,
            lifecycle: (tier == Tier::S3cache).then_some(default_lifecycle),
            created_ts: now,
            usage_bytes: 0,
            objects: BTreeMap::new(),
        };
        Ok(self.buckets.entry(name.to_string()).or_insert(bucket))
    }

    pub fn put_object(
        &mut self,
        cluster: &mut Cluster,
        bucket: &str,
        key: &str,
        payload: &[u8],
        customer_key: Option<&[u8]>,
        now: u64,
    ) -> Result<ObjectMeta> {
        if key.is_empty() {
            return Err(GatewayError::ValidationError("empty object key".into()));
        }
        let b = self.bucket(bucket)?;
        let size = payload.len() as u64;
        let previous = b.objects.get(key).map_or(0, |o| o.size);
        let available = b.quota_bytes.saturating_sub(b.usage_bytes - previous);
        if size > available {
            return Err(GatewayError::BucketQuotaExceeded {
                bucket: bucket.to_string(),
                requested: size,
                available,
            });
        }
        let pool = Self::tier_pool(cluster, b.tier)?;
        let oid = object_id(bucket, key);
        let (stored, sse) = match customer_key {
            Some(ck) => {
                let nonce = self.next_nonce();
                let ct = sse::seal(ck, &nonce, oid.as_bytes(), payload);
                let info = SseInfo {
                    fingerprint: sse::fingerprint(ck),
                    nonce: nonce.to_vec(),
                };
                (ct, Some(info))
            }
            None => (payload.to_vec(), None),
        };
        cluster.write_object(&pool, &oid, &stored)?;
        let meta = ObjectMeta {
            key: key.to_string(),
            size,
            created_ts: now,
            content_hash: hex::encode(Sha256::digest(payload)),
            sse,
        };
        let b = self.bucket_mut(bucket)?;
        b.usage_bytes = b.usage_bytes - previous + size;
        b.objects.insert(key.to_string(), meta.clone());
        Ok(meta)
    }

    pub fn get_object(
        &self,
        cluster: &Cluster,
        bucket: &str,
        key: &str,
        customer_key: Option<&[u8]>,
    ) -> Result<Vec<u8>> {
        let b = self.bucket(bucket)?;
        let meta = b
            .objects
            .get(key)
            .ok_or_else(|| GatewayError::NoSuchKey(key.to_string()))?;
        let oid = object_id(bucket, key);
        match &meta.sse {
            None => Ok(cluster.read_object(&Self::tier_pool(cluster, b.tier)?, &oid)?),
            Some(info) => {
                let ck = customer_key.ok_or(GatewayError::KeyRequired)?;
                if sse::fingerprint(ck) != info.fingerprint {
                    return Err(GatewayError::KeyMismatch);
                }
                let stored = cluster.read_object(&Self::tier_pool(cluster, b.tier)?, &oid)?;
                sse::open(ck, &info.nonce, oid.as_bytes(), &stored)
                    .ok_or(GatewayError::IntegrityFailure)
            }
        }
    }

    /// Deletes an object and returns the plaintext bytes freed.
    pub fn delete_object(&mut self, cluster: &mut Cluster, bucket: &str, key: &str) -> Result<u64> {
        let b = self.bucket(bucket)?;
        if !b.objects.contains_key(key) {
            return Err(GatewayError::NoSuchKey(key.to_string()));
        }
        let pool = Self::tier_pool(cluster, b.tier)?;
        cluster.delete_object(&pool, &object_id(bucket, key))?;
        let b = self.bucket_mut(bucket)?;
        let meta = b.objects.remove(key).expect("checked above");
        b.usage_bytes -= meta.size;
        Ok(meta.size)
    }

    /// Lexicographic listing. `continuation` is the last key of the
    /// previous page.
    pub fn list_objects(
        &self,
        bucket: &str,
        prefix: &str,
        max_keys: usize,
        continuation: Option<&str>,
    ) -> Result<ListPage> {
        use std::ops::Bound;
        let b = self.bucket(bucket)?;
        let start = match continuation {
            Some(after) => Bound::Excluded(after.to_string()),
            None => Bound::Included(prefix.to_string()),
        };
        let mut matching = b
            .objects
            .range((start, Bound::Unbounded))
            .map(|(_, m)| m)
            .skip_while(|m| !m.key.starts_with(prefix) && m.key.as_str() < prefix)
            .take_while(|m| m.key.starts_with(prefix));
        let entries: Vec<ObjectMeta> = matching.by_ref().take(max_keys).cloned().collect();
        let more = matching.next().is_some();
        let continuation = if more && max_keys > 0 {
            entries.last().map(|m| m.key.clone())
        } else {
            None
        };
        Ok(ListPage {
            entries,
            continuation,
        })
    }

    pub fn set_lifecycle(&mut self, bucket: &str, policy: LifecyclePolicy) -> Result<()> {
        policy
            .validate()
            .map_err(|e| GatewayError::ValidationError(e.to_string()))?;
        let b = self.bucket_mut(bucket)?;
        if b.tier != Tier::S3cache {
            return Err(GatewayError::TierForbidden(b.tier));
        }
        b.lifecycle = Some(policy);
        Ok(())
    }

    fn next_nonce(&mut self) -> [u8; sse::NONCE_LEN] {
        let mut rng = ChaCha20Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(self.nonce_counter);
        self.nonce_counter += 1;
        let mut nonce = [0u8; sse::NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        nonce
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poolstore::{PoolSpec, Redundancy};

    const MB: u64 = 1_000_000;

    pub(crate) fn fixture() -> (Cluster, Gateway) {
        let mut c = Cluster::with_osds(8, 1 << 34);
        let ec = Redundancy::ErasureCoded { data: 4, parity: 2 };
        for (name, role) in [
            ("cache", PoolRole::S3cache),
            ("secure", PoolRole::S3secure),
            ("general", PoolRole::S3general),
        ] {
            c.create_pool(PoolSpec {
                name: name.into(),
                redundancy: ec,
                quota_bytes: 1 << 30,
                role,
            })
            .unwrap();
        }
        (c, Gateway::new(42))
    }

    fn mk(g: &mut Gateway, c: &Cluster, name: &str, tier: Tier, quota: u64) {
        g.create_bucket(c, "p1", true, name, tier, quota, LifecyclePolicy::default(), 0)
            .unwrap();
    }

    #[test]
    fn bucket_creation_rules() {
        let (c, mut g) = fixture();
        let b = g
            .create_bucket(&c, "p1", true, "cache-1", Tier::S3cache, MB, LifecyclePolicy::default(), 5)
            .unwrap();
        assert_eq!(b.lifecycle, Some(LifecyclePolicy::days(60.0)));
        let err = g
            .create_bucket(&c, "p2", false, "sec", Tier::S3secure, MB, LifecyclePolicy::default(), 5)
            .unwrap_err();
        assert_eq!(err, GatewayError::TierForbidden(Tier::S3secure));
        assert!(g
            .create_bucket(&c, "p2", false, "gen", Tier::S3general, MB, LifecyclePolicy::default(), 5)
            .is_ok());
        for bad in ["AB", "ab", "Upper", "has_underscore", &"x".repeat(64)] {
            let err = g
                .create_bucket(&c, "p1", true, bad, Tier::S3general, MB, LifecyclePolicy::default(), 5)
                .unwrap_err();
            assert_eq!(err.name(), "InvalidName", "{bad}");
        }
        let err = g
            .create_bucket(&c, "p1", true, "gen", Tier::S3secure, MB, LifecyclePolicy::default(), 5)
            .unwrap_err();
        assert_eq!(err.name(), "NameTaken");
    }

    #[test]
    fn secure_put_lands_on_ec_pool() {
        let (mut c, mut g) = fixture();
        mk(&mut g, &c, "arch", Tier::S3secure, 10 * MB);
        g.put_object(&mut c, "arch", "data.bam", &vec![1u8; MB as usize], None, 10)
            .unwrap();
        let acct = c.accounting("secure").unwrap();
        assert_eq!(acct.backend_bytes, 1_500_000);
        assert!(c.pool("secure").unwrap().stripe("arch/data.bam").is_some());
        assert!(c.pool("general").unwrap().stripe("arch/data.bam").is_none());
    }

    #[test]
    fn bucket_quota() {
        let (mut c, mut g) = fixture();
        mk(&mut g, &c, "small", Tier::S3general, 100);
        g.put_object(&mut c, "small", "a", &[0; 80], None, 1).unwrap();
        let err = g.put_object(&mut c, "small", "b", &[0; 21], None, 1).unwrap_err();
        assert_eq!(err.name(), "BucketQuotaExceeded");
        assert_eq!(g.bucket("small").unwrap().usage_bytes(), 80);
        assert_eq!(c.accounting("general").unwrap().logical_bytes, 80);
        // Replacing an object only needs room for the difference.
        g.put_object(&mut c, "small", "a", &[0; 100], None, 2).unwrap();
        assert_eq!(g.bucket("small").unwrap().usage_bytes(), 100);
    }

    #[test]
    fn sse_c_semantics() {
        let (mut c, mut g) = fixture();
        mk(&mut g, &c, "sec", Tier::S3secure, MB);
        let meta = g
            .put_object(&mut c, "sec", "k", b"genome", Some(b"customer-key"), 1)
            .unwrap();
        assert_eq!(meta.sse_fingerprint(), Some(sse::fingerprint(b"customer-key").as_str()));
        assert_eq!(meta.size, 6);
        assert_eq!(g.get_object(&c, "sec", "k", Some(b"customer-key")).unwrap(), b"genome");
        assert_eq!(
            g.get_object(&c, "sec", "k", Some(b"wrong")).unwrap_err(),
            GatewayError::KeyMismatch
        );
        assert_eq!(g.get_object(&c, "sec", "k", None).unwrap_err(), GatewayError::KeyRequired);
        g.put_object(&mut c, "sec", "plain", b"open", None, 2).unwrap();
        assert_eq!(g.get_object(&c, "sec", "plain", None).unwrap(), b"open");
    }

    #[test]
    fn nonces_differ_per_object() {
        let (mut c, mut g) = fixture();
        mk(&mut g, &c, "sec", Tier::S3secure, MB);
        let a = g.put_object(&mut c, "sec", "a", b"x", Some(b"k"), 1).unwrap();
        let b = g.put_object(&mut c, "sec", "b", b"x", Some(b"k"), 1).unwrap();
        assert_ne!(a.sse.unwrap().nonce, b.sse.unwrap().nonce);
    }

    #[test]
    fn delete_and_list() {
        let (mut c, mut g) = fixture();
        mk(&mut g, &c, "gen", Tier::S3general, MB);
        for k in ["b/1", "a/2", "a/1"] {
            g.put_object(&mut c, "gen", k, k.as_bytes(), None, 1).unwrap();
        }
        let page = g.list_objects("gen", "a/", 100, None).unwrap();
        let keys: Vec<_> = page.entries.iter().map(|m| m.key.as_str()).collect();
        assert_eq!(keys, ["a/1", "a/2"]);
        assert_eq!(page.continuation, None);

        let p1 = g.list_objects("gen", "", 1, None).unwrap();
        let p2 = g.list_objects("gen", "", 1, p1.continuation.as_deref()).unwrap();
        let p3 = g.list_objects("gen", "", 1, p2.continuation.as_deref()).unwrap();
        assert_eq!(p1.entries[0].key, "a/1");
        assert_eq!(p2.entries[0].key, "a/2");
        assert_eq!(p3.entries[0].key, "b/1");
        assert_eq!(p3.continuation, None);

        assert_eq!(g.delete_object(&mut c, "gen", "a/1").unwrap(), 3);
        assert_eq!(g.get_object(&c, "gen", "a/1", None).unwrap_err().name(), "NoSuchKey");
        assert_eq!(g.delete_object(&mut c, "gen", "a/1").unwrap_err().name(), "NoSuchKey");
        assert_eq!(g.bucket("gen").unwrap().usage_bytes(), 6);

        mk(&mut g, &c, "empty", Tier::S3general, MB);
        assert!(g.list_objects("empty", "", 10, None).unwrap().entries.is_empty());
    }

    #[test]
    fn lifecycle_only_on_cache_tier() {
        let (c, mut g) = fixture();
        mk(&mut g, &c, "cache", Tier::S3cache, MB);
        mk(&mut g, &c, "sec", Tier::S3secure, MB);
        g.set_lifecycle("cache", LifecyclePolicy::days(30.0)).unwrap();
        assert_eq!(g.bucket("cache").unwrap().lifecycle, Some(LifecyclePolicy::days(30.0)));
        assert_eq!(
            g.set_lifecycle("sec", LifecyclePolicy::days(60.0)).unwrap_err(),
            GatewayError::TierForbidden(Tier::S3secure)
        );
        assert_eq!(
            g.set_lifecycle("cache", LifecyclePolicy::days(0.0)).unwrap_err().name(),
            "ValidationError"
        );
    }
}
