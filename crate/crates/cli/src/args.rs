use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wg", version, about = "Operate a desk-scale controlled-access data cloud")]
pub struct Cli {
    /// State file. Defaults to ./wg-state.json.
    #[arg(long, global = true, env = "WG_STATE")]
    pub state: Option<PathBuf>,

    /// Logical clock in seconds. Defaults to the time of the last audit entry.
    #[arg(long, global = true)]
    pub now: Option<u64>,

    /// Authenticated actor recorded in the audit log.
    #[arg(long, global = true, env = "WG_ACTOR", default_value = "operator")]
    pub actor: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a fresh state file.
    Init(InitArgs),
    #[command(subcommand)]
    Project(ProjectCmd),
    #[command(subcommand)]
    Bucket(BucketCmd),
    #[command(subcommand)]
    Object(ObjectCmd),
    #[command(subcommand)]
    Lifecycle(LifecycleCmd),
    #[command(subcommand)]
    Volume(VolumeCmd),
    #[command(subcommand)]
    Vm(VmCmd),
    /// Compute nodes and OSDs.
    #[command(subcommand)]
    Node(NodeCmd),
    #[command(subcommand)]
    Policy(PolicyCmd),
    #[command(subcommand)]
    Audit(AuditCmd),
    /// Analytic performance models.
    #[command(subcommand)]
    Model(ModelCmd),
    /// CSV and text reports.
    Report(ReportArgs),
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Serve the object gateway over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long, default_value_t = 20)]
    pub nodes: u32,
    #[arg(long, default_value_t = 56)]
    pub threads_per_node: u32,
    #[arg(long, default_value_t = 256)]
    pub ram_gb_per_node: u32,
    #[arg(long, default_value_t = 8)]
    pub osds: u32,
    /// Bytes per OSD.
    #[arg(long, default_value_t = 400_000_000_000_000)]
    pub osd_capacity: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace an existing state file and its audit log.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum ProjectCmd {
    /// Create a project on the base subscription (16 vCPU, 32 GB, 2 TB).
    Create {
        id: String,
        /// Accepted for clarity; every project starts on the base bundle.
        #[arg(long)]
        base: bool,
        #[arg(long)]
        dbgap: bool,
    },
    /// Set add-on units (whole vCPUs and TB).
    Addons {
        id: String,
        #[arg(long, default_value_t = 0)]
        vcpus: u32,
        #[arg(long, default_value_t = 0)]
        volume_tb: u32,
    },
    /// Grant or revoke controlled-access approval.
    Dbgap { id: String, value: OnOff },
    List,
    Show { id: String },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum BucketCmd {
    Create {
        project: String,
        name: String,
        #[arg(long)]
        tier: String,
        /// Quota in bytes.
        #[arg(long)]
        quota: u64,
    },
    List,
}

#[derive(Debug, Subcommand)]
pub enum ObjectCmd {
    Put {
        bucket: String,
        key: String,
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        file: Option<PathBuf>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        sse_key: Option<String>,
    },
    Get {
        bucket: String,
        key: String,
        #[arg(long)]
        sse_key: Option<String>,
        /// Write the payload here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Delete {
        bucket: String,
        key: String,
    },
    List {
        bucket: String,
        #[arg(long, default_value = "")]
        prefix: String,
        #[arg(long, default_value_t = 1000)]
        max_keys: usize,
        #[arg(long)]
        continuation: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LifecycleCmd {
    Set {
        bucket: String,
        #[arg(long)]
        days: f64,
    },
    /// Expire cache-tier objects at the `--now` clock.
    Sweep {
        /// Print one deleted object per line instead of a table.
        #[arg(long)]
        lines: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum VolumeCmd {
    Create {
        project: String,
        #[arg(long)]
        size_gb: u64,
        /// Clone from this image.
        #[arg(long)]
        image: Option<String>,
    },
    Snapshot {
        project: String,
        volume: String,
    },
    Delete {
        project: String,
        volume: String,
    },
    List {
        project: Option<String>,
    },
    /// Add a bootable image to the catalog.
    RegisterImage {
        name: String,
        #[arg(long)]
        size_gb: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum VmCmd {
    /// Launch a VM. Without `--volume`, a boot volume is created for it.
    Launch {
        project: String,
        #[arg(long)]
        vcpus: u32,
        /// Defaults to 2 GB per vCPU.
        #[arg(long)]
        ram_gb: Option<u32>,
        #[arg(long)]
        volume: Option<String>,
        #[arg(long, default_value_t = 20)]
        boot_gb: u64,
        #[arg(long)]
        image: Option<String>,
    },
    Delete {
        vm: String,
    },
    List,
}

#[derive(Debug, Subcommand)]
pub enum NodeCmd {
    List,
    /// Live-migrate every VM away and mark the node for maintenance.
    Drain {
        node: String,
        /// Show the migration plan without applying it.
        #[arg(long)]
        dry_run: bool,
    },
    Undrain {
        node: String,
    },
    FailOsd {
        osd: u32,
    },
    RestoreOsd {
        osd: u32,
    },
    /// Rebuild missing shards in one pool, or all pools.
    Repair {
        pool: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum PolicyCmd {
    /// Evaluate one packet; exits 0 on ALLOW and 1 on DENY.
    Eval {
        #[arg(long)]
        src: String,
        /// Destination VM id, or `project/vm` for a VM not in the state.
        #[arg(long)]
        dst: String,
        #[arg(long)]
        port: u16,
        #[arg(long)]
        ssl: bool,
        #[arg(long)]
        egress: bool,
    },
    #[command(subcommand)]
    Rules(RulesCmd),
    /// Replace the source-scope configuration.
    Scopes {
        #[arg(long = "umn")]
        umn: Vec<String>,
        #[arg(long = "bastion")]
        bastion: Vec<String>,
        /// `project=cidr`
        #[arg(long = "subnet")]
        subnet: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RulesCmd {
    /// Replace all security-group rules from a rule file.
    Load { file: PathBuf },
    Show,
}

#[derive(Debug, Subcommand)]
pub enum AuditCmd {
    Verify,
    Query {
        #[arg(long)]
        actor: Option<String>,
        #[arg(long)]
        resource: Option<String>,
        #[arg(long)]
        since: Option<u64>,
        #[arg(long)]
        until: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ModelCmd {
    Throughput {
        #[arg(long, default_value = "ec:4,2")]
        scheme: String,
        /// Object sizes in MB.
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,4")]
        sizes: Vec<f64>,
        #[arg(long)]
        csv: bool,
    },
    Hpl {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        threads: Vec<u32>,
        #[arg(long)]
        strong: bool,
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Throughput,
    Scaling,
    Utilization,
    Pricing,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub kind: ReportKind,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pub threads: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,2,4")]
    pub sizes: Vec<f64>,
    /// Emit only the CSV.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCmd {
    /// Run `@<now> <command>` lines in order against one state.
    Replay { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
}
