use wg_core::audit::{actions, AuditFilter, ChainStatus};
use wg_core::controlplane::{Subscription, GB};
use wg_core::gateway::http::{self, HttpRequest};
use wg_core::gateway::Tier;
use wg_core::lifecycle::{LifecyclePolicy, SECONDS_PER_DAY};
use wg_core::netpolicy::{Direction, PacketQuery, Verdict, VmRef};
use wg_core::perfmodel;
use wg_core::poolstore::{OsdId, PoolRole, PoolSpec, Redundancy};
use wg_core::{Cloud, ClusterShape, Ctx};

const DAY: u64 = SECONDS_PER_DAY as u64;

/// Cloud whose cache pool holds 1 MB, so sweeps are easy to provoke.
fn small_cloud() -> Cloud {
    let mut cloud = Cloud::new(5);
    for _ in 0..8 {
        cloud.cluster.add_osd(100 * GB);
    }
    for (name, redundancy, quota, role) in [
        ("rbd", Redundancy::Replicated { copies: 3 }, 50 * GB, PoolRole::Block),
        ("cache", Redundancy::ErasureCoded { data: 4, parity: 2 }, 1_000_000, PoolRole::S3cache),
        ("secure", Redundancy::ErasureCoded { data: 4, parity: 2 }, 1_000_000, PoolRole::S3secure),
    ] {
        cloud
            .cluster
            .create_pool(PoolSpec { name: name.into(), redundancy, quota_bytes: quota, role })
            .unwrap();
    }
    cloud.control.add_node(56, 256);
    let admin = Ctx::new("admin", 0);
    cloud.create_project(admin, "lab", Subscription::base().dbgap()).unwrap();
    cloud.create_bucket(admin, "lab", "cache-a", Tier::S3cache, 1_000_000).unwrap();
    cloud.create_bucket(admin, "lab", "vault", Tier::S3secure, 1_000_000).unwrap();
    cloud
}

#[test]
fn sweep_logs_one_entry_per_expired_object() {
    let mut cloud = small_cloud();
    for i in 0..10u64 {
        cloud
            .put_object(Ctx::new("alice", i * DAY), "cache-a", &format!("o{i}"), &[0; 100], None)
            .unwrap();
    }
    let before = cloud.audit().len();
    let report = cloud.sweep(Ctx::new("lifecycle", 65 * DAY)).unwrap();
    assert_eq!(report.deleted.len(), 5, "objects older than 60 days");
    let expired = cloud.audit().query(&AuditFilter {
        actor: Some("lifecycle".into()),
        ..Default::default()
    });
    assert_eq!(expired.len(), 5);
    assert!(expired.iter().all(|e| e.action == actions::EXPIRE_OBJECT));
    assert_eq!(cloud.audit().len(), before + 5);
    assert_eq!(cloud.audit().verify_chain(), ChainStatus::Ok);

    let before = cloud.audit().len();
    assert!(cloud.sweep(Ctx::new("lifecycle", 65 * DAY)).unwrap().deleted.is_empty());
    assert_eq!(cloud.audit().len(), before);
}

#[test]
fn set_lifecycle_only_on_cache_and_logged() {
    let mut cloud = small_cloud();
    let ctx = Ctx::new("alice", 1);
    cloud.set_lifecycle(ctx, "cache-a", LifecyclePolicy::days(7.0)).unwrap();
    let err = cloud.set_lifecycle(ctx, "vault", LifecyclePolicy::days(7.0)).unwrap_err();
    assert_eq!(err.name(), "TierForbidden");
    let err = cloud.set_lifecycle(ctx, "cache-a", LifecyclePolicy::days(0.5)).unwrap_err();
    assert_eq!(err.name(), "ValidationError");
    let n = cloud
        .audit()
        .entries()
        .iter()
        .filter(|e| e.action == actions::SET_LIFECYCLE)
        .count();
    assert_eq!(n, 3);
}

#[test]
fn tier_access_follows_project_approval() {
    let mut cloud = small_cloud();
    let ctx = Ctx::new("bob", 1);
    cloud.create_project(ctx, "open", Subscription::base()).unwrap();
    let err = cloud.create_bucket(ctx, "open", "open-vault", Tier::S3secure, 10).unwrap_err();
    assert_eq!(err.name(), "TierForbidden");
    cloud.set_dbgap(ctx, "open", true).unwrap();
    cloud.create_bucket(ctx, "open", "open-vault", Tier::S3secure, 10).unwrap();
}

#[test]
fn accounting_agrees_with_the_model() {
    let mut cloud = small_cloud();
    let ctx = Ctx::new("alice", 1);
    cloud.put_object(ctx, "cache-a", "k", &[9; 4_000], None).unwrap();
    cloud.create_volume(ctx, "lab", 10 * GB, None).unwrap();
    for (pool, scheme) in [
        ("cache", Redundancy::ErasureCoded { data: 4, parity: 2 }),
        ("rbd", Redundancy::Replicated { copies: 3 }),
    ] {
        let acct = cloud.cluster.accounting(pool).unwrap();
        let predicted = perfmodel::backend_bytes(acct.logical_bytes as f64, scheme);
        assert_eq!(acct.backend_bytes as f64, predicted, "{pool}");
    }
}

#[test]
fn customer_keys_never_persist() {
    let mut cloud = small_cloud();
    let key = b"correct horse battery staple";
    let ctx = Ctx::new("alice", 1);
    cloud.put_object(ctx, "vault", "sample.vcf", b"ACGT", Some(key)).unwrap();
    let state = serde_json::to_string(&cloud).unwrap();
    assert!(!state.contains(std::str::from_utf8(key).unwrap()));
    assert!(!state.contains(&hex::encode(key)));
    let meta = cloud.gateway.bucket("vault").unwrap().object("sample.vcf").unwrap().clone();
    assert!(meta.sse_fingerprint().is_some());
    let mut restored: Cloud = serde_json::from_str(&state).unwrap();
    assert_eq!(restored.get_object(ctx, "vault", "sample.vcf", Some(key)).unwrap(), b"ACGT");
}

#[test]
fn at_rest_keys_stay_out_of_shard_state() {
    let mut cloud = small_cloud();
    let key = cloud.cluster.enable_at_rest_encryption(OsdId(2)).unwrap().key_hex.clone();
    cloud.put_object(Ctx::new("alice", 1), "vault", "x", &[1; 64], None).unwrap();
    let osd_json = serde_json::to_string(cloud.cluster.osd(OsdId(2)).unwrap()).unwrap();
    assert!(osd_json.contains("\"encrypted_at_rest\":true"));
    assert!(!osd_json.contains(&key));
}

#[test]
fn degraded_reads_and_repair_through_the_facade() {
    let mut cloud = small_cloud();
    let ctx = Ctx::new("ops", 1);
    let payload: Vec<u8> = (0..10_000u32).map(|i| (i * 7) as u8).collect();
    cloud.put_object(ctx, "vault", "big", &payload, Some(b"k")).unwrap();
    cloud.fail_osd(ctx, OsdId(0)).unwrap();
    cloud.fail_osd(ctx, OsdId(5)).unwrap();
    assert_eq!(cloud.get_object(ctx, "vault", "big", Some(b"k")).unwrap(), payload);
    let report = cloud.repair(ctx, "secure").unwrap();
    assert!(report.unrecoverable.is_empty());
    let report = cloud.repair(ctx, "secure").unwrap();
    assert!(report.is_noop());
    assert_eq!(cloud.get_object(ctx, "vault", "big", Some(b"k")).unwrap(), payload);
    cloud.check_invariants().unwrap();
}

#[test]
fn http_requests_are_audited_like_direct_calls() {
    let mut cloud = small_cloud();
    let before = cloud.audit().len();
    let put = HttpRequest {
        method: "PUT".into(),
        path: "/vault/reads/r1.bam".into(),
        query: String::new(),
        sse_key: Some(b"k".to_vec()),
        body: b"reads".to_vec(),
    };
    assert_eq!(http::handle(&mut cloud, Ctx::new("carol", 3), &put).status, 200);
    let get = HttpRequest {
        method: "GET".into(),
        sse_key: Some(b"nope".to_vec()),
        body: Vec::new(),
        ..put
    };
    let resp = http::handle(&mut cloud, Ctx::new("carol", 4), &get);
    assert_eq!(resp.status, 403);
    let tail = &cloud.audit().entries()[before..];
    assert_eq!(tail.len(), 2);
    assert_eq!(tail[1].action, actions::GET_OBJECT);
    assert_eq!(tail[1].outcome.as_str(), "denied");
    assert_eq!(tail[1].resource, "s3/vault/reads/r1.bam");
}

#[test]
fn firewall_denials_land_in_the_log() {
    let mut cloud = Cloud::build(ClusterShape::default(), 1).unwrap();
    cloud.scopes.umn_cidrs = vec!["128.101.0.0/16".parse().unwrap()];
    cloud
        .replace_rules(Ctx::new("admin", 1), "lab 443 UMN # portal".parse().unwrap())
        .unwrap();
    let packet = |port, ssl| PacketQuery {
        direction: Direction::Ingress,
        src_addr: "128.101.7.7".parse().unwrap(),
        dst_vm: VmRef { vm: "vm-3".into(), project: "lab".into() },
        port,
        ssl,
    };
    let ctx = Ctx::new("net", 2);
    assert_eq!(cloud.evaluate_packet(ctx, &packet(443, true)).unwrap(), Verdict::Allow);
    assert_ne!(cloud.evaluate_packet(ctx, &packet(443, false)).unwrap(), Verdict::Allow);
    assert_ne!(cloud.evaluate_packet(ctx, &packet(22, true)).unwrap(), Verdict::Allow);
    let denies: Vec<_> = cloud
        .audit()
        .entries()
        .iter()
        .filter(|e| e.action == actions::POLICY_DENY)
        .map(|e| e.resource.clone())
        .collect();
    assert_eq!(denies, ["vm/lab/vm-3:443/ssl-required", "vm/lab/vm-3:22/port-not-permitted"]);
}
