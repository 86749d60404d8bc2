//! Security-group policy engine.
//!
//! | Scope   | Ingress                          | Egress |
//! |---------|----------------------------------|--------|
//! | World   | none                             | all    |
//! | UMN     | 443, 8443 with SSL, needs rule   | all    |
//! | Stratus | any port via bastion, needs rule | all    |
//! | Project | all                              | all    |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use ipnet::IpNet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ports campus clients may reach, always over SSL.
pub const CAMPUS_PORTS: [u16; 2] = [443, 8443];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    World,
    Umn,
    Stratus,
    Project,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::World => "World",
            Scope::Umn => "UMN",
            Scope::Stratus => "Stratus",
            Scope::Project => "Project",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("overlapping ranges: {0} and {1}")]
    Overlap(String, String),
    #[error("rule line {line}: {reason}")]
    BadRule { line: usize, reason: String },
}

impl PolicyError {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyError::Overlap(..) => "Overlap",
            PolicyError::BadRule { .. } => "BadRule",
        }
    }
}

fn overlaps(a: &IpNet, b: &IpNet) -> bool {
    a.contains(&b.network()) || b.contains(&a.network())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeConfig {
    pub umn_cidrs: Vec<IpNet>,
    pub bastion_addrs: BTreeSet<IpAddr>,
    pub project_subnets: BTreeMap<String, IpNet>,
}

impl ScopeConfig {
    /// Project subnets must be pairwise disjoint and hold no bastion.
    /// Bastions and project subnets may sit inside campus ranges; the more
    /// specific scope wins.
    pub fn validate(&self) -> Result<(), PolicyError> {
        let subnets: Vec<&IpNet> = self.project_subnets.values().collect();
        for (i, a) in subnets.iter().enumerate() {
            for b in &subnets[i + 1..] {
                if overlaps(a, b) {
                    return Err(PolicyError::Overlap(a.to_string(), b.to_string()));
                }
            }
            if let Some(bastion) = self.bastion_addrs.iter().find(|addr| a.contains(*addr)) {
                return Err(PolicyError::Overlap(a.to_string(), bastion.to_string()));
            }
        }
        Ok(())
    }

    pub fn classify_source(&self, addr: IpAddr, dst_project: &str) -> Scope {
        if self
            .project_subnets
            .get(dst_project)
            .is_some_and(|net| net.contains(&addr))
        {
            Scope::Project
        } else if self.bastion_addrs.contains(&addr) {
            Scope::Stratus
        } else if self.umn_cidrs.iter().any(|net| net.contains(&addr)) {
            Scope::Umn
        } else {
            Scope::World
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PortSpec {
    Any,
    Port(u16),
}

impl PortSpec {
    pub fn matches(&self, port: u16) -> bool {
        match self {
            PortSpec::Any => true,
            PortSpec::Port(p) => *p == port,
        }
    }
}

impl fmt::Display for PortSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortSpec::Any => f.write_str("ANY"),
            PortSpec::Port(p) => write!(f, "{p}"),
        }
    }
}

/// Scopes a security-group exception can open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleScope {
    Umn,
    Stratus,
}

impl RuleScope {
    fn scope(self) -> Scope {
        match self {
            RuleScope::Umn => Scope::Umn,
            RuleScope::Stratus => Scope::Stratus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityGroupRule {
    pub project: String,
    pub port: PortSpec,
    pub source_scope: RuleScope,
    pub note: String,
}

impl fmt::Display for SecurityGroupRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.project, self.port, self.source_scope.scope())?;
        if !self.note.is_empty() {
            write!(f, " # {}", self.note)?;
        }
        Ok(())
    }
}

/// Per-project exceptions. Replaced wholesale, never edited in place.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleSet {
    pub rules: Vec<SecurityGroupRule>,
}

impl RuleSet {
    pub fn has_exception(&self, project: &str, port: u16, scope: Scope) -> bool {
        self.rules.iter().any(|r| {
            r.project == project && r.source_scope.scope() == scope && r.port.matches(port)
        })
    }

    /// Renders in the line-oriented rule file format.
    pub fn render(&self) -> String {
        self.rules.iter().map(|r| format!("{r}\n")).collect()
    }
}

impl FromStr for RuleSet {
    type Err = PolicyError;

    /// Parses `project port source_scope # note` lines. Blank lines and
    /// lines starting with `#` are skipped.
    fn from_str(text: &str) -> Result<Self, PolicyError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let (body, note) = match raw.split_once('#') {
                Some((b, n)) => (b, n.trim()),
                None => (raw, ""),
            };
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let bad = |reason: &str| PolicyError::BadRule {
                line,
                reason: reason.to_string(),
            };
            let [project, port, scope] = fields[..] else {
                return Err(bad("expected `project port source_scope`"));
            };
            let port = if port.eq_ignore_ascii_case("any") {
                PortSpec::Any
            } else {
                match port.parse::<u16>() {
                    Ok(p) if p >= 1 => PortSpec::Port(p),
                    _ => return Err(bad("port must be 1-65535 or ANY")),
                }
            };
            let source_scope = match scope.to_ascii_lowercase().as_str() {
                "umn" => RuleScope::Umn,
                "stratus" => RuleScope::Stratus,
                _ => return Err(bad("source scope must be UMN or Stratus")),
            };
            rules.push(SecurityGroupRule {
                project: project.to_string(),
                port,
                source_scope,
                note: note.to_string(),
            });
        }
        Ok(RuleSet { rules })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Ingress,
    Egress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmRef {
    pub vm: String,
    pub project: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketQuery {
    pub direction: Direction,
    pub src_addr: IpAddr,
    pub dst_vm: VmRef,
    pub port: u16,
    pub ssl: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DenyReason {
    /// The source scope never gets ingress.
    Scope,
    PortNotPermitted,
    SslRequired,
    NoException,
}

impl DenyReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DenyReason::Scope => "scope",
            DenyReason::PortNotPermitted => "port-not-permitted",
            DenyReason::SslRequired => "ssl-required",
            DenyReason::NoException => "no-exception",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Allow,
    Deny(DenyReason),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Allow => f.write_str("ALLOW"),
            Verdict::Deny(r) => write!(f, "DENY {}", r.as_str()),
        }
    }
}

pub fn evaluate(packet: &PacketQuery, rules: &RuleSet, config: &ScopeConfig) -> Verdict {
    if packet.direction == Direction::Egress {
        return Verdict::Allow;
    }
    let project = packet.dst_vm.project.as_str();
    let scope = config.classify_source(packet.src_addr, project);
    evaluate_scope(scope, packet.port, packet.ssl, |scope, port| {
        rules.has_exception(project, port, scope)
    })
}

/// Ingress decision for an already-classified source.
pub fn evaluate_scope(
    scope: Scope,
    port: u16,
    ssl: bool,
    has_exception: impl Fn(Scope, u16) -> bool,
) -> Verdict {
    match scope {
        Scope::Project => Verdict::Allow,
        Scope::World => Verdict::Deny(DenyReason::Scope),
        Scope::Stratus => {
            if has_exception(scope, port) {
                Verdict::Allow
            } else {
                Verdict::Deny(DenyReason::NoException)
            }
        }
        Scope::Umn => {
            if !CAMPUS_PORTS.contains(&port) {
                Verdict::Deny(DenyReason::PortNotPermitted)
            } else if !ssl {
                Verdict::Deny(DenyReason::SslRequired)
            } else if !has_exception(scope, port) {
                Verdict::Deny(DenyReason::NoException)
            } else {
                Verdict::Allow
            }
        }
    }
}
