//! Command dispatch against an in-memory state.

use std::fs;
use std::io::Write;
use std::net::IpAddr;

use wg_core::audit::{self, AuditFilter, ChainStatus};
use wg_core::controlplane::{NodeId, Subscription, VmId, GB};
use wg_core::gateway::Tier;
use wg_core::lifecycle::LifecyclePolicy;
use wg_core::netpolicy::{Direction, PacketQuery, RuleSet, ScopeConfig, Verdict, VmRef};
use wg_core::perfmodel::{self, BackendModel, HplConfig};
use wg_core::poolstore::{OsdId, Redundancy};
use wg_core::{Cloud, CloudError, ClusterShape, Ctx};

use crate::args::*;
use crate::report::{self, Table};
use crate::state::{StateError, StateFile};

/// Why a command did not succeed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// Bad arguments; exit 2.
    Usage(String),
    /// A named domain error; exit 1.
    Domain { name: String, message: String },
    /// A negative answer that is not an error (a denied packet); exit 1.
    Negative,
}

impl Failure {
    pub fn domain(name: &str, message: impl Into<String>) -> Self {
        Failure::Domain {
            name: name.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain { .. } | Failure::Negative => 1,
        }
    }

    /// The line printed for this failure, if any.
    pub fn message(&self) -> Option<String> {
        match self {
            Failure::Usage(m) => Some(format!("error: {m}")),
            Failure::Domain { name, message } => Some(format!("error: {name}: {message}")),
            Failure::Negative => None,
        }
    }
}

impl From<CloudError> for Failure {
    fn from(e: CloudError) -> Self {
        Failure::domain(e.name(), e.to_string())
    }
}

impl From<StateError> for Failure {
    fn from(e: StateError) -> Self {
        Failure::domain(e.name(), e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::domain("IoError", e.to_string())
    }
}

pub type Outcome = Result<(), Failure>;

/// Loaded state plus what it takes to persist it again.
#[derive(Debug, Default)]
pub struct Session {
    pub state: Option<StateFile>,
    /// Audit entries already on disk; `None` means rewrite the whole log.
    pub persisted: Option<usize>,
}

impl Session {
    pub fn loaded(state: StateFile, persisted: usize) -> Self {
        Self {
            state: Some(state),
            persisted: Some(persisted),
        }
    }

    pub fn cloud(&mut self) -> Result<&mut Cloud, Failure> {
        self.state
            .as_mut()
            .map(|s| &mut s.cloud)
            .ok_or_else(|| Failure::domain("NoState", "no state loaded; run `wg init` first"))
    }

    /// Clock for a command: the explicit `--now`, else the last audit time.
    pub fn now(&self, explicit: Option<u64>) -> u64 {
        explicit.unwrap_or_else(|| {
            self.state
                .as_ref()
                .and_then(|s| s.cloud.audit().last_ts())
                .unwrap_or(0)
        })
    }
}

/// Commands that never touch the state file.
pub fn is_stateless(cmd: &Command) -> bool {
    match cmd {
        Command::Model(_) => true,
        Command::Report(r) => matches!(r.kind, ReportKind::Throughput | ReportKind::Scaling),
        _ => false,
    }
}

pub fn run_stateless(cmd: &Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Model(m) => model(m, out),
        Command::Report(r) => {
            let table = match r.kind {
                ReportKind::Throughput => nonempty(&r.sizes, "sizes").map(|_| report::throughput(&r.sizes))?,
                ReportKind::Scaling => nonempty(&r.threads, "threads").map(|_| report::scaling(&r.threads))?,
                _ => unreachable!("stateful report"),
            };
            emit(out, &table, r.csv)
        }
        _ => unreachable!("stateful command"),
    }
}

fn nonempty<T>(v: &[T], what: &str) -> Result<(), Failure> {
    if v.is_empty() {
        Err(Failure::domain("NothingToReport", format!("no {what} given")))
    } else {
        Ok(())
    }
}

fn emit(out: &mut dyn Write, table: &Table, csv: bool) -> Outcome {
    if csv {
        out.write_all(table.csv().as_bytes())?;
    } else {
        out.write_all(table.text().as_bytes())?;
    }
    Ok(())
}

fn model(cmd: &ModelCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        ModelCmd::Throughput { scheme, sizes, csv } => {
            let scheme: Redundancy = scheme
                .parse()
                .map_err(|e: wg_core::poolstore::PoolError| Failure::Usage(e.to_string()))?;
            nonempty(sizes, "sizes")?;
            if let Some(bad) = sizes.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                return Err(Failure::Usage(format!("object size must be positive, got {bad}")));
            }
            let table = report::model_throughput(&BackendModel::reference(), scheme, sizes);
            emit(out, &table, *csv)
        }
        ModelCmd::Hpl { threads, strong, csv } => {
            nonempty(threads, "threads")?;
            let mut t = Table::new(vec!["threads", "n", "matrix_gib", "peak_gflops"]);
            for &th in threads {
                let cfg = if *strong { HplConfig::strong(th) } else { HplConfig::weak(th) };
                let n = if *strong {
                    perfmodel::hpl_matrix_size_strong(&cfg)
                } else {
                    perfmodel::hpl_matrix_size(&cfg)
                };
                t.push(vec![
                    th.to_string(),
                    n.to_string(),
                    format!("{:.2}", (n * n * 8) as f64 / (1u64 << 30) as f64),
                    format!("{:.1}", th as f64 * cfg.peak_gflops_per_core),
                ]);
            }
            emit(out, &t, *csv)
        }
    }
}

/// Fresh state for `init`.
pub fn init_state(args: &InitArgs) -> Result<StateFile, Failure> {
    let shape = ClusterShape {
        nodes: args.nodes,
        threads_per_node: args.threads_per_node,
        ram_gb_per_node: args.ram_gb_per_node,
        osds: args.osds,
        osd_capacity_bytes: args.osd_capacity,
    };
    let cloud = Cloud::build(shape, args.seed)?;
    Ok(StateFile::new(args.seed, cloud))
}

pub fn describe_init(state: &StateFile, out: &mut dyn Write) -> Outcome {
    let c = &state.cloud;
    writeln!(
        out,
        "initialized: {} compute nodes ({} vCPU), {} OSDs ({} bytes raw), {} pools",
        c.control.nodes().count(),
        c.control.total_vcpu_capacity(),
        c.cluster.osds().count(),
        c.cluster.raw_capacity(),
        c.cluster.pools().count()
    )?;
    Ok(())
}

/// Runs one stateful command. `init` is handled by the caller.
pub fn dispatch(
    session: &mut Session,
    cmd: &Command,
    actor: &str,
    now: Option<u64>,
    out: &mut dyn Write,
) -> Outcome {
    let now = session.now(now);
    let ctx = Ctx::new(actor, now);
    let cloud = session.cloud()?;
    match cmd {
        Command::Init(_) | Command::Scenario(_) | Command::Serve(_) => {
            unreachable!("handled by the caller")
        }
        Command::Model(_) => run_stateless(cmd, out),
        Command::Project(p) => project(cloud, ctx, p, out),
        Command::Bucket(b) => bucket(cloud, ctx, b, out),
        Command::Object(o) => object(cloud, ctx, o, out),
        Command::Lifecycle(l) => lifecycle(cloud, ctx, l, out),
        Command::Volume(v) => volume(cloud, ctx, v, out),
        Command::Vm(v) => vm(cloud, ctx, v, out),
        Command::Node(n) => node(cloud, ctx, n, out),
        Command::Policy(p) => policy(cloud, ctx, p, out),
        Command::Audit(a) => audit_cmd(cloud, a, out),
        Command::Report(r) => {
            let table = match r.kind {
                ReportKind::Utilization => report::utilization(cloud),
                ReportKind::Pricing => report::pricing(&cloud.pricing),
                _ => return run_stateless(cmd, out),
            };
            let table = table.ok_or_else(|| {
                Failure::domain("NothingToReport", "the state has nothing to report")
            })?;
            emit(out, &table, r.csv)
        }
    }
}

fn project(cloud: &mut Cloud, ctx: Ctx<'_>, cmd: &ProjectCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        ProjectCmd::Create { id, base: _, dbgap } => {
            let sub = if *dbgap { Subscription::base().dbgap() } else { Subscription::base() };
            cloud.create_project(ctx, id, sub)?;
            writeln!(
                out,
                "created project {id} ({} vCPU, {} GB RAM, {} TB volumes{})",
                sub.vcpu_quota(),
                sub.ram_quota_gb(),
                sub.volume_quota_bytes() / wg_core::controlplane::TB,
                if *dbgap { ", controlled access" } else { "" }
            )?;
        }
        ProjectCmd::Addons { id, vcpus, volume_tb } => {
            cloud.set_addons(ctx, id, *vcpus, *volume_tb)?;
            writeln!(out, "{id}: add-ons set to {vcpus} vCPU, {volume_tb} TB")?;
        }
        ProjectCmd::Dbgap { id, value } => {
            let on = matches!(value, OnOff::On);
            cloud.set_dbgap(ctx, id, on)?;
            writeln!(out, "{id}: controlled access {}", if on { "approved" } else { "revoked" })?;
        }
        ProjectCmd::List => {
            let mut t = Table::new(vec!["project", "vcpus", "ram_gb", "volume_bytes", "dbgap"]);
            for p in cloud.control.projects() {
                let s = &p.subscription;
                t.push(vec![
                    p.id.clone(),
                    format!("{}/{}", p.usage.vcpus, s.vcpu_quota()),
                    format!("{}/{}", p.usage.ram_gb, s.ram_quota_gb()),
                    format!("{}/{}", p.usage.volume_bytes, s.volume_quota_bytes()),
                    if s.dbgap_approved { "yes" } else { "no" }.into(),
                ]);
            }
            out.write_all(t.text().as_bytes())?;
        }
        ProjectCmd::Show { id } => {
            let p = cloud.control.project(id).map_err(CloudError::from)?;
            let text = serde_json::to_string_pretty(p).expect("project serializes");
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn bucket(cloud: &mut Cloud, ctx: Ctx<'_>, cmd: &BucketCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        BucketCmd::Create { project, name, tier, quota } => {
            let tier: Tier = tier.parse().map_err(CloudError::from)?;
            cloud.create_bucket(ctx, project, name, tier, *quota)?;
            writeln!(out, "created bucket {name} ({tier}, quota {quota} bytes) for {project}")?;
        }
        BucketCmd::List => {
            let mut t = Table::new(vec!["bucket", "tier", "owner", "objects", "usage_bytes", "quota_bytes"]);
            for b in cloud.gateway.buckets() {
                t.push(vec![
                    b.name.clone(),
                    b.tier.to_string(),
                    b.owner.clone(),
                    b.len().to_string(),
                    b.usage_bytes().to_string(),
                    b.quota_bytes.to_string(),
                ]);
            }
            out.write_all(t.text().as_bytes())?;
        }
    }
    Ok(())
}

fn object(cloud: &mut Cloud, ctx: Ctx<'_>, cmd: &ObjectCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        ObjectCmd::Put { bucket, key, file, data, sse_key } => {
            let payload = match (file, data) {
                (Some(path), _) => fs::read(path)?,
                (None, Some(d)) => d.clone().into_bytes(),
                (None, None) => return Err(Failure::Usage("one of --file or --data is required".into())),
            };
            let meta = cloud.put_object(ctx, bucket, key, &payload, sse_key.as_deref().map(str::as_bytes))?;
            write!(out, "put {bucket}/{key} size={} sha256={}", meta.size, meta.content_hash)?;
            if let Some(fp) = meta.sse_fingerprint() {
                write!(out, " sse-fingerprint={fp}")?;
            }
            writeln!(out)?;
        }
        ObjectCmd::Get { bucket, key, sse_key, out: path } => {
            let payload = cloud.get_object(ctx, bucket, key, sse_key.as_deref().map(str::as_bytes))?;
            match path {
                Some(p) => {
                    fs::write(p, &payload)?;
                    writeln!(out, "wrote {} bytes to {}", payload.len(), p.display())?;
                }
                None => out.write_all(&payload)?,
            }
        }
        ObjectCmd::Delete { bucket, key } => {
            let freed = cloud.delete_object(ctx, bucket, key)?;
            writeln!(out, "deleted {bucket}/{key} ({freed} bytes)")?;
        }
        ObjectCmd::List { bucket, prefix, max_keys, continuation } => {
            let page = cloud.list_objects(bucket, prefix, *max_keys, continuation.as_deref())?;
            for o in &page.entries {
                writeln!(out, "{}\t{}\t{}", o.key, o.size, o.created_ts)?;
            }
            if let Some(next) = page.continuation {
                writeln!(out, "continuation: {next}")?;
            }
        }
    }
    Ok(())
}

fn lifecycle(cloud: &mut Cloud, ctx: Ctx<'_>, cmd: &LifecycleCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        LifecycleCmd::Set { bucket, days } => {
            cloud.set_lifecycle(ctx, bucket, LifecyclePolicy::days(*days))?;
            writeln!(out, "{bucket}: objects expire after {days} days")?;
        }
        LifecycleCmd::Sweep { lines } => {
            let report = cloud.sweep(ctx)?;
            let text = if *lines { report.render_lines() } else { report.render_table() };
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn parse_id<T: std::str::FromStr>(text: &str, what: &str) -> Result<T, Failure> {
    text.parse()
        .map_err(|_| Failure::Usage(format!("invalid {what} id: {text}")))
}

fn volume(cloud: &mut Cloud, ctx: Ctx<'_>, cmd: &VolumeCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        VolumeCmd::Create { project, size_gb, image } => {
            let v = cloud.create_volume(ctx, project, size_gb * GB, image.as_deref())?;
            writeln!(out, "created {} ({} bytes) for {project}", v.id, v.logical_bytes)?;
        }
        VolumeCmd::Snapshot { project, volume } => {
            let v = cloud.snapshot_volume(ctx, project, parse_id(volume, "volume")?)?;
            writeln!(out, "created snapshot {} of {volume} ({} bytes)", v.id, v.logical_bytes)?;
        }
        VolumeCmd::Delete { project, volume } => {
            let freed = cloud.delete_volume(ctx, project, parse_id(volume, "volume")?)?;
            writeln!(out, "deleted {volume} ({freed} bytes)")?;
        }
        VolumeCmd::List { project } => {
            let mut t = Table::new(vec!["volume", "project", "kind", "bytes", "source", "attached_to"]);
            for v in cloud
                .control
                .volumes()
                .filter(|v| project.as_ref().is_none_or(|p| *p == v.project))
            {
                let source = v
                    .source_image
                    .clone()
                    .or_else(|| v.source_volume.map(|s| s.to_string()))
                    .unwrap_or_else(|| "-".into());
                t.push(vec![
                    v.id.to_string(),
                    v.project.clone(),
                    serde_json::to_value(v.kind).expect("kind").as_str().unwrap_or("").into(),
                    v.logical_bytes.to_string(),
                    source,
                    v.attached_to.map_or_else(|| "-".into(), |a| a.to_string()),
                ]);
            }
            out.write_all(t.text().as_bytes())?;
        }
        VolumeCmd::RegisterImage { name, size_gb } => {
            cloud.register_image(ctx, name, size_gb * GB)?;
            writeln!(out, "registered image {name} ({} bytes)", size_gb * GB)?;
        }
    }
    Ok(())
}

fn vm(cloud: &mut Cloud, ctx: Ctx<'_>, cmd: &VmCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        VmCmd::Launch { project, vcpus, ram_gb, volume, boot_gb, image } => {
            let ram_gb = ram_gb.unwrap_or(vcpus.saturating_mul(2));
            let vm = match volume {
                Some(v) => {
                    if image.is_some() {
                        return Err(Failure::Usage("--image applies only to a new boot volume".into()));
                    }
                    cloud.launch_vm(ctx, project, *vcpus, ram_gb, parse_id(v, "volume")?)?
                }
                None => {
                    cloud
                        .launch_vm_on_new_volume(ctx, project, *vcpus, ram_gb, boot_gb * GB, image.as_deref())?
                        .0
                }
            };
            writeln!(
                out,
                "launched {} on {} ({} vCPU, {} GB RAM) booting {}",
                vm.id, vm.host, vm.vcpus, vm.ram_gb, vm.boot_volume
            )?;
        }
        VmCmd::Delete { vm } => {
            let gone = cloud.delete_vm(ctx, parse_id::<VmId>(vm, "vm")?)?;
            writeln!(out, "deleted {} from {}", gone.id, gone.host)?;
        }
        VmCmd::List => {
            let mut t = Table::new(vec!["vm", "project", "vcpus", "ram_gb", "host", "boot_volume"]);
            for v in cloud.control.vms() {
                t.push(vec![
                    v.id.to_string(),
                    v.project.clone(),
                    v.vcpus.to_string(),
                    v.ram_gb.to_string(),
                    v.host.to_string(),
                    v.boot_volume.to_string(),
                ]);
            }
            out.write_all(t.text().as_bytes())?;
        }
    }
    Ok(())
}

fn node(cloud: &mut Cloud, ctx: Ctx<'_>, cmd: &NodeCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        NodeCmd::List => {
            let mut t = Table::new(vec!["node", "vcpus", "ram_gb", "vms", "state"]);
            for n in cloud.control.nodes() {
                t.push(vec![
                    n.id.to_string(),
                    format!("{}/{}", n.used_vcpus, n.vcpu_capacity()),
                    format!("{}/{}", n.used_ram_gb, n.ram_capacity_gb()),
                    n.resident.len().to_string(),
                    if n.maintenance { "maintenance" } else { "active" }.into(),
                ]);
            }
            out.write_all(t.text().as_bytes())?;
            let mut t = Table::new(vec!["osd", "used_bytes", "capacity_bytes", "state", "at_rest"]);
            for o in cloud.cluster.osds() {
                t.push(vec![
                    o.id.to_string(),
                    o.used_bytes().to_string(),
                    o.capacity_bytes.to_string(),
                    if o.up { "up" } else { "down" }.into(),
                    if o.encrypted_at_rest { "encrypted" } else { "-" }.into(),
                ]);
            }
            out.write_all(t.text().as_bytes())?;
        }
        NodeCmd::Drain { node, dry_run } => {
            let id: NodeId = parse_id(node, "node")?;
            let plan = if *dry_run {
                cloud.control.plan_drain(id).map_err(CloudError::from)?
            } else {
                cloud.drain_node(ctx, id)?
            };
            out.write_all(plan.render().as_bytes())?;
        }
        NodeCmd::Undrain { node } => {
            cloud.undrain_node(ctx, parse_id(node, "node")?)?;
            writeln!(out, "{node} is back in service")?;
        }
        NodeCmd::FailOsd { osd } => {
            cloud.fail_osd(ctx, OsdId(*osd))?;
            writeln!(out, "{} marked down", OsdId(*osd))?;
        }
        NodeCmd::RestoreOsd { osd } => {
            cloud.restore_osd(ctx, OsdId(*osd))?;
            writeln!(out, "{} marked up", OsdId(*osd))?;
        }
        NodeCmd::Repair { pool } => {
            let pools: Vec<String> = match pool {
                Some(p) => vec![p.clone()],
                None => cloud.cluster.pools().map(|p| p.spec.name.clone()).collect(),
            };
            for p in pools {
                out.write_all(cloud.repair(ctx, &p)?.render().as_bytes())?;
            }
        }
    }
    Ok(())
}

fn resolve_dst(cloud: &Cloud, dst: &str) -> Result<VmRef, Failure> {
    if let Some((project, vm)) = dst.split_once('/') {
        return Ok(VmRef { vm: vm.into(), project: project.into() });
    }
    let id: VmId = parse_id(dst, "vm")?;
    let vm = cloud.control.vm(id).map_err(CloudError::from)?;
    Ok(VmRef { vm: vm.id.to_string(), project: vm.project.clone() })
}

fn policy(cloud: &mut Cloud, ctx: Ctx<'_>, cmd: &PolicyCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        PolicyCmd::Eval { src, dst, port, ssl, egress } => {
            let src_addr: IpAddr = src
                .parse()
                .map_err(|_| Failure::Usage(format!("invalid source address: {src}")))?;
            let packet = PacketQuery {
                direction: if *egress { Direction::Egress } else { Direction::Ingress },
                src_addr,
                dst_vm: resolve_dst(cloud, dst)?,
                port: *port,
                ssl: *ssl,
            };
            let scope = cloud.classify(src_addr, &packet.dst_vm.project);
            let verdict = cloud.evaluate_packet(ctx, &packet)?;
            writeln!(out, "{verdict} (source scope {scope})")?;
            if verdict != Verdict::Allow {
                return Err(Failure::Negative);
            }
        }
        PolicyCmd::Rules(RulesCmd::Load { file }) => {
            let text = fs::read_to_string(file)?;
            let rules: RuleSet = text.parse().map_err(CloudError::from)?;
            let n = rules.rules.len();
            cloud.replace_rules(ctx, rules)?;
            writeln!(out, "loaded {n} rule(s)")?;
        }
        PolicyCmd::Rules(RulesCmd::Show) => out.write_all(cloud.rules.render().as_bytes())?,
        PolicyCmd::Scopes { umn, bastion, subnet } => {
            let mut scopes = ScopeConfig::default();
            for c in umn {
                scopes
                    .umn_cidrs
                    .push(c.parse().map_err(|_| Failure::Usage(format!("invalid CIDR: {c}")))?);
            }
            for b in bastion {
                scopes
                    .bastion_addrs
                    .insert(b.parse().map_err(|_| Failure::Usage(format!("invalid address: {b}")))?);
            }
            for s in subnet {
                let (p, c) = s
                    .split_once('=')
                    .ok_or_else(|| Failure::Usage(format!("expected project=cidr, got {s}")))?;
                let net = c.parse().map_err(|_| Failure::Usage(format!("invalid CIDR: {c}")))?;
                scopes.project_subnets.insert(p.to_string(), net);
            }
            cloud.replace_scopes(ctx, scopes)?;
            writeln!(
                out,
                "scopes: {} campus range(s), {} bastion(s), {} project subnet(s)",
                umn.len(),
                bastion.len(),
                subnet.len()
            )?;
        }
    }
    Ok(())
}

fn audit_cmd(cloud: &Cloud, cmd: &AuditCmd, out: &mut dyn Write) -> Outcome {
    match cmd {
        AuditCmd::Verify => report_chain(cloud.audit().verify_chain(), cloud.audit().len(), out),
        AuditCmd::Query { actor, resource, since, until } => {
            let filter = AuditFilter {
                actor: actor.clone(),
                resource: resource.clone(),
                since: *since,
                until: *until,
            };
            for e in cloud.audit().query(&filter) {
                writeln!(out, "{}", e.to_line())?;
            }
            Ok(())
        }
    }
}

/// `audit verify` against the raw bytes of a persisted log.
pub fn verify_log_bytes(data: &[u8], out: &mut dyn Write) -> Outcome {
    let entries = data.split(|b| *b == b'\n').filter(|l| !l.is_empty()).count();
    report_chain(audit::verify_bytes(data), entries, out)
}

fn report_chain(status: ChainStatus, entries: usize, out: &mut dyn Write) -> Outcome {
    match status {
        ChainStatus::Ok => {
            writeln!(out, "OK: {entries} entries verified")?;
            Ok(())
        }
        ChainStatus::BadAt(seq) => Err(Failure::domain(
            "AuditTampered",
            format!("hash chain breaks at entry {seq}"),
        )),
    }
}
