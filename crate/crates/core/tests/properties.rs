use std::collections::BTreeSet;
use std::net::{IpAddr, Ipv4Addr};

use proptest::prelude::*;

use wg_core::audit::{self, AuditLog, ChainStatus, Outcome};
use wg_core::controlplane::{parse_image_name, ControlPlane, Subscription, GB};
use wg_core::gateway::{Gateway, Tier};
use wg_core::lifecycle::{self, LifecyclePolicy, SweepConfig};
use wg_core::netpolicy::{self, Direction, PacketQuery, RuleSet, Scope, ScopeConfig, Verdict, VmRef};
use wg_core::perfmodel::{self, BackendModel, HplConfig};
use wg_core::poolstore::erasure::ReedSolomon;
use wg_core::poolstore::{Cluster, OsdId, PoolRole, PoolSpec, Redundancy};

fn scheme() -> impl Strategy<Value = Redundancy> {
    prop_oneof![
        (1u8..=4).prop_map(|copies| Redundancy::Replicated { copies }),
        (1u8..=5, 1u8..=3).prop_map(|(data, parity)| Redundancy::ErasureCoded { data, parity }),
    ]
}

fn cluster_with(scheme: Redundancy, osds: u32, capacity: u64, quota: u64) -> Cluster {
    let mut c = Cluster::with_osds(osds, capacity);
    c.create_pool(PoolSpec {
        name: "p".into(),
        redundancy: scheme,
        quota_bytes: quota,
        role: PoolRole::S3general,
    })
    .unwrap();
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn any_k_shards_rebuild_the_payload(
        k in 1usize..=6,
        m in 1usize..=3,
        payload in proptest::collection::vec(any::<u8>(), 0..4096),
        erase_seed in any::<u64>(),
    ) {
        let rs = ReedSolomon::new(k, m).unwrap();
        let mut slots: Vec<Option<Vec<u8>>> = rs.encode_payload(&payload).into_iter().map(Some).collect();
        let mut order: Vec<usize> = (0..k + m).collect();
        let mut s = erase_seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        for &i in &order[..m] {
            slots[i] = None;
        }
        prop_assert_eq!(rs.decode_payload(&slots, payload.len()).unwrap(), payload);
    }

    #[test]
    fn stripes_are_well_formed(
        scheme in scheme(),
        osds in 8u32..16,
        down in proptest::collection::btree_set(0u32..16, 0..4),
        object in "[a-z]{1,12}",
    ) {
        let mut c = cluster_with(scheme, osds, 1 << 30, 1 << 20);
        for d in down.iter().filter(|&&d| d < osds) {
            c.fail_osd(OsdId(*d)).unwrap();
        }
        match c.place_shards("p", &object, scheme.width()) {
            Ok(stripe) => {
                prop_assert_eq!(stripe.locations.len(), scheme.width());
                let ids: BTreeSet<_> = stripe.locations.iter().map(|l| l.0).collect();
                prop_assert_eq!(ids.len(), scheme.width());
                let idx: Vec<u16> = stripe.locations.iter().map(|l| l.1).collect();
                prop_assert_eq!(idx, (0..scheme.width() as u16).collect::<Vec<_>>());
                for (osd, _) in &stripe.locations {
                    prop_assert!(c.osd(*osd).unwrap().up);
                }
                prop_assert_eq!(c.place_shards("p", &object, scheme.width()).unwrap(), stripe);
            }
            Err(e) => {
                prop_assert_eq!(e.name(), "InsufficientOsds");
                prop_assert!(c.up_count() < scheme.width());
            }
        }
    }

    #[test]
    fn osd_capacity_and_pool_quota_hold(
        scheme in scheme(),
        ops in proptest::collection::vec((0u8..3, 0usize..6, 0usize..400), 1..60),
    ) {
        let mut c = cluster_with(scheme, 8, 600, 1_000);
        for (op, obj, len) in ops {
            let id = format!("o{obj}");
            match op {
                0 | 1 => { let _ = c.write_object("p", &id, &vec![1u8; len]); }
                _ => { let _ = c.delete_object("p", &id); }
            }
            for o in c.osds() {
                prop_assert!(o.used_bytes() <= o.capacity_bytes);
            }
            let pool = c.pool("p").unwrap();
            prop_assert!(pool.logical_bytes() <= pool.spec.quota_bytes);
            let sum: u64 = pool.stripes().map(|s| s.payload_len).sum();
            prop_assert_eq!(sum, pool.logical_bytes());
        }
    }

    #[test]
    fn pool_quotas_fit_raw_capacity(
        specs in proptest::collection::vec((scheme(), 1u64..5_000), 1..6),
    ) {
        let mut c = Cluster::with_osds(8, 1_000);
        let mut accepted = Vec::new();
        for (i, (scheme, quota)) in specs.into_iter().enumerate() {
            let spec = PoolSpec { name: format!("p{i}"), redundancy: scheme, quota_bytes: quota, role: PoolRole::S3general };
            if c.create_pool(spec).is_ok() {
                accepted.push((scheme, quota));
            }
        }
        let max_amp = accepted.iter().map(|(s, _)| s.amplification()).fold(0.0, f64::max);
        let total: u64 = accepted.iter().map(|(_, q)| q).sum();
        prop_assert!(total as f64 * max_amp <= c.raw_capacity() as f64 + 1e-9);
    }

    #[test]
    fn bucket_usage_matches_objects(
        ops in proptest::collection::vec((any::<bool>(), 0usize..5, 0usize..300), 1..80),
    ) {
        let mut c = cluster_with(Redundancy::ErasureCoded { data: 4, parity: 2 }, 8, 1 << 20, 1 << 16);
        let mut g = Gateway::new(1);
        g.create_bucket(&c, "p1", false, "bkt", Tier::S3general, 1_000, LifecyclePolicy::default(), 0).unwrap();
        for (t, (put, key, len)) in ops.into_iter().enumerate() {
            let key = format!("k{key}");
            if put {
                let _ = g.put_object(&mut c, "bkt", &key, &vec![3u8; len], None, t as u64);
            } else {
                let _ = g.delete_object(&mut c, "bkt", &key);
            }
            let b = g.bucket("bkt").unwrap();
            let sum: u64 = b.objects().map(|o| o.size).sum();
            prop_assert_eq!(sum, b.usage_bytes());
            prop_assert!(sum <= b.quota_bytes);
        }
    }

    #[test]
    fn sweep_report_is_ordered_and_shrinks_usage(
        objects in proptest::collection::vec((0u64..200, 1u64..2_000), 1..60),
        policy in 1.0f64..90.0,
    ) {
        let day = 86_400;
        let mut c = cluster_with(Redundancy::ErasureCoded { data: 4, parity: 2 }, 8, 1 << 24, 0);
        c.create_pool(PoolSpec {
            name: "cache".into(),
            redundancy: Redundancy::ErasureCoded { data: 4, parity: 2 },
            quota_bytes: 40_000,
            role: PoolRole::S3cache,
        }).unwrap();
        let mut g = Gateway::new(1);
        g.create_bucket(&c, "p1", true, "cache", Tier::S3cache, 40_000, LifecyclePolicy::days(policy), 0).unwrap();
        for (i, (age_days, size)) in objects.iter().enumerate() {
            let ts = (200 - age_days) * day + i as u64;
            let _ = g.put_object(&mut c, "cache", &format!("o{i}"), &vec![0u8; *size as usize], None, ts);
        }
        let now = 200 * day + 1_000;
        let report = lifecycle::sweep(&mut g, &mut c, now, &SweepConfig::default());
        prop_assert!(report.deleted.windows(2).all(|w| w[0].created_ts <= w[1].created_ts));
        prop_assert!(report.utilization_after <= report.utilization_before);
        prop_assert!(report.utilization_after <= 0.80 + 1e-12);
        let again = lifecycle::sweep(&mut g, &mut c, now, &SweepConfig::default());
        prop_assert!(again.deleted.is_empty());
    }

    #[test]
    fn node_capacity_follows_oversubscription(threads in 1u32..512, ram in 1u32..4096) {
        let mut cp = ControlPlane::new();
        let id = cp.add_node(threads, ram);
        let n = cp.node(id).unwrap();
        prop_assert_eq!(n.vcpu_capacity(), threads * 2);
        prop_assert_eq!(n.ram_capacity_gb(), ram);
    }

    #[test]
    fn control_plane_invariants_under_random_ops(
        ops in proptest::collection::vec((0u8..6, 0usize..3, 1u32..10, 1u32..20, 1u64..900), 1..60),
    ) {
        let mut cp = ControlPlane::new();
        let nodes: Vec<_> = (0..3).map(|_| cp.add_node(6, 24)).collect();
        for p in 0..3 {
            cp.create_project(&format!("p{p}"), Subscription::base()).unwrap();
        }
        for (op, who, cpus, ram, gb) in ops {
            let p = format!("p{who}");
            let vols: Vec<_> = cp.volumes().filter(|v| v.project == p).map(|v| v.id).collect();
            match op {
                0 => { let _ = cp.create_volume(&p, gb * GB, None); }
                1 => if let Some(&v) = vols.first() { let _ = cp.snapshot_volume(&p, v); },
                2 => if let Some(&v) = vols.last() { let _ = cp.delete_volume(&p, v); },
                3 => if let Some(&v) = vols.first() { let _ = cp.launch_vm(&p, cpus, ram, v); },
                4 => { let _ = cp.drain_node(nodes[who]); }
                _ => { let _ = cp.undrain_node(nodes[who]); }
            }
            prop_assert_eq!(cp.check_invariants(), Ok(()));
            for proj in cp.projects() {
                prop_assert!(proj.usage.volume_bytes <= proj.subscription.volume_quota_bytes());
                prop_assert!(proj.usage.vcpus <= proj.subscription.vcpu_quota());
                prop_assert!(proj.usage.ram_gb <= proj.subscription.ram_quota_gb());
            }
        }
    }

    #[test]
    fn image_names_round_trip(
        distro in "[A-Za-z]{1,8}",
        version in "[0-9]{1,2}(\\.[0-9]{1,2})?",
        tags in proptest::collection::vec("[a-z0-9]{1,6}", 1..4),
    ) {
        let text = format!("{distro}{version}_{}", tags.join("_"));
        let parsed = parse_image_name(&text).unwrap();
        prop_assert_eq!(&parsed.distro, &distro);
        prop_assert_eq!(&parsed.tags, &tags);
        prop_assert_eq!(parsed.to_string(), text);
    }

    #[test]
    fn rules_only_widen_ingress(
        a in any::<u8>(), b in any::<u8>(),
        port in prop_oneof![Just(22u16), Just(80), Just(443), Just(8443), 1u16..=65535],
        ssl in any::<bool>(),
        rule_text in proptest::collection::vec((prop_oneof![Just("ANY".to_string()), (1u16..=65535).prop_map(|p| p.to_string())], any::<bool>()), 0..5),
    ) {
        let config = ScopeConfig {
            umn_cidrs: vec!["128.101.0.0/16".parse().unwrap()],
            bastion_addrs: ["128.101.5.5".parse().unwrap()].into(),
            project_subnets: [("p1".to_string(), "10.1.0.0/24".parse().unwrap())].into(),
        };
        let rules: RuleSet = rule_text
            .iter()
            .map(|(p, umn)| format!("p1 {p} {}\n", if *umn { "UMN" } else { "Stratus" }))
            .collect::<String>()
            .parse()
            .unwrap();
        for addr in [
            IpAddr::V4(Ipv4Addr::new(128, 101, a, b)),
            IpAddr::V4(Ipv4Addr::new(10, 1, 0, b)),
            IpAddr::V4(Ipv4Addr::new(a, b, 1, 1)),
        ] {
            let mut packet = PacketQuery {
                direction: Direction::Ingress,
                src_addr: addr,
                dst_vm: VmRef { vm: "vm-1".into(), project: "p1".into() },
                port,
                ssl,
            };
            let without = netpolicy::evaluate(&packet, &RuleSet::default(), &config);
            let with = netpolicy::evaluate(&packet, &rules, &config);
            if without == Verdict::Allow {
                prop_assert_eq!(with, Verdict::Allow);
            }
            if config.classify_source(addr, "p1") == Scope::World {
                prop_assert_ne!(with, Verdict::Allow);
            }
            packet.direction = Direction::Egress;
            prop_assert_eq!(netpolicy::evaluate(&packet, &RuleSet::default(), &config), Verdict::Allow);
        }
    }

    #[test]
    fn throughput_never_exceeds_either_ceiling(scheme in scheme(), size in 0.01f64..64.0) {
        let m = BackendModel::reference();
        let t = m.client_throughput(scheme, size);
        prop_assert!(t > 0.0);
        prop_assert!(t <= m.bandwidth_ceiling(scheme) + 1e-9);
        prop_assert!(t <= m.iops_ceiling(scheme, size) + 1e-9);
    }

    #[test]
    fn throughput_is_non_decreasing_in_size(scheme in scheme(), a in 0.01f64..64.0, b in 0.01f64..64.0) {
        let m = BackendModel::reference();
        let (small, large) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(m.client_throughput(scheme, small) <= m.client_throughput(scheme, large));
    }

    #[test]
    fn weak_scaling_grows_with_root_of_threads(threads in 1u32..=1024) {
        let n1 = perfmodel::hpl_matrix_size(&HplConfig::weak(1)) as f64;
        let nt = perfmodel::hpl_matrix_size(&HplConfig::weak(threads)) as f64;
        let exact = (threads as f64 * 0.8 * 2.0 * 1024f64.powi(3) / 8.0).sqrt();
        prop_assert!(nt <= exact && exact < nt + 1.0);
        prop_assert!((nt / n1 - (threads as f64).sqrt()).abs() < 1e-3 * (threads as f64).sqrt());
    }

    #[test]
    fn backend_bytes_scale_with_amplification(scheme in scheme(), mb in 0.0f64..1e6) {
        let got = perfmodel::backend_bytes(mb, scheme);
        prop_assert!((got - mb * scheme.amplification()).abs() <= 1e-9 * got.max(1.0));
    }

    #[test]
    fn hpl_size_is_the_floor(threads in 1u32..=4096) {
        let cfg = HplConfig::weak(threads);
        let n = perfmodel::hpl_matrix_size(&cfg) as u128;
        let bytes = threads as u128 * 2 * 1024 * 1024 * 1024 * 8 / 10;
        prop_assert!(n * n * 8 <= bytes);
        prop_assert!((n + 1) * (n + 1) * 8 > bytes);
    }

    #[test]
    fn appended_logs_verify(events in proptest::collection::vec((0u64..5, "[a-z]{1,8}", "[a-z/]{1,16}"), 0..64)) {
        let mut log = AuditLog::new();
        let mut ts = 0;
        for (dt, actor, resource) in &events {
            ts += dt;
            log.append(ts, actor, "put-object", resource, Outcome::Ok).unwrap();
        }
        prop_assert_eq!(log.verify_chain(), ChainStatus::Ok);
        prop_assert_eq!(audit::verify_lines(&log.to_lines()), ChainStatus::Ok);
        for (i, e) in log.entries().iter().enumerate() {
            prop_assert_eq!(e.seq, i as u64);
        }
        prop_assert_eq!(AuditLog::from_lines(&log.to_lines()).unwrap(), log);
    }
}
