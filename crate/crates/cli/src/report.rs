//! Tabular output: aligned text for people, CSV for tools.

use wg_core::controlplane::{
    pricing::COST_RECOVERY_UTILIZATION, price_subscription, Bundle, PricingConfig, ResourceClass,
};
use wg_core::perfmodel::{self, BackendModel, HplConfig};
use wg_core::poolstore::Redundancy;
use wg_core::Cloud;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Extra lines printed under the text rendering only.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(headers: Vec<&'static str>) -> Self {
        Self {
            headers,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn text(&self) -> String {
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|i| {
                self.rows
                    .iter()
                    .map(|r| r[i].len())
                    .chain([self.headers[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: Vec<&str>| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(self.headers.clone());
        for row in &self.rows {
            out.push_str(&line(row.iter().map(String::as_str).collect()));
        }
        for note in &self.notes {
            out.push_str(note);
            out.push('\n');
        }
        out
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

const REP3: Redundancy = Redundancy::Replicated { copies: 3 };
const EC42: Redundancy = Redundancy::ErasureCoded { data: 4, parity: 2 };

/// Client and backend throughput of one scheme across object sizes.
pub fn model_throughput(model: &BackendModel, scheme: Redundancy, sizes: &[f64]) -> Table {
    let mut t = Table::new(vec![
        "scheme",
        "size_mb",
        "client_mbps",
        "backend_mbps",
        "bandwidth_ceiling",
        "iops_ceiling",
        "bound",
    ]);
    for &size in sizes {
        let client = model.client_throughput(scheme, size);
        let bw = model.bandwidth_ceiling(scheme);
        let iops = model.iops_ceiling(scheme, size);
        t.push(vec![
            scheme.to_string(),
            format!("{size:.2}"),
            format!("{client:.1}"),
            format!("{:.1}", perfmodel::backend_bytes(client, scheme)),
            format!("{bw:.1}"),
            format!("{iops:.1}"),
            if bw <= iops { "bandwidth" } else { "iops" }.to_string(),
        ]);
    }
    t
}

/// Replicated and erasure-coded pools side by side, with the crossover.
pub fn throughput(sizes: &[f64]) -> Table {
    let model = BackendModel::reference();
    let mut t = model_throughput(&model, REP3, sizes);
    t.rows.extend(model_throughput(&model, EC42, sizes).rows);
    let lo = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sizes.iter().copied().fold(0.0, f64::max);
    match model.crossover(REP3, EC42, lo, hi) {
        Some(x) => t.notes.push(format!("crossover: {EC42} overtakes {REP3} at {x:.3} MB")),
        None => t.notes.push(format!("crossover: none in [{lo}, {hi}] MB")),
    }
    t
}

/// HPL problem sizes under weak and strong scaling.
pub fn scaling(threads: &[u32]) -> Table {
    let mut t = Table::new(vec!["threads", "n_weak", "n_strong", "matrix_gib", "peak_gflops"]);
    for &th in threads {
        let cfg = HplConfig::weak(th);
        let n = perfmodel::hpl_matrix_size(&cfg);
        let strong = perfmodel::hpl_matrix_size_strong(&HplConfig::strong(th));
        t.push(vec![
            th.to_string(),
            n.to_string(),
            strong.to_string(),
            format!("{:.2}", (n * n * 8) as f64 / (1u64 << 30) as f64),
            format!("{:.1}", th as f64 * cfg.peak_gflops_per_core),
        ]);
    }
    t
}

/// Per-pool logical and backend usage. `None` when there are no pools.
pub fn utilization(cloud: &Cloud) -> Option<Table> {
    let mut t = Table::new(vec![
        "pool",
        "scheme",
        "logical_bytes",
        "backend_bytes",
        "quota_bytes",
        "utilization",
        "amplification",
    ]);
    for pool in cloud.cluster.pools() {
        let acct = cloud.cluster.accounting(&pool.spec.name).ok()?;
        let util = if pool.spec.quota_bytes == 0 {
            0.0
        } else {
            acct.logical_bytes as f64 / pool.spec.quota_bytes as f64
        };
        t.push(vec![
            pool.spec.name.clone(),
            pool.spec.redundancy.to_string(),
            acct.logical_bytes.to_string(),
            acct.backend_bytes.to_string(),
            pool.spec.quota_bytes.to_string(),
            format!("{util:.4}"),
            format!("{:.2}", acct.amplification),
        ]);
    }
    if t.rows.is_empty() {
        return None;
    }
    t.notes
        .push(format!("cache tier utilization: {:.4}", cloud.cache_utilization()));
    Some(t)
}

/// Unit prices and revenue at the cost-recovery utilization.
pub fn pricing(config: &PricingConfig) -> Option<Table> {
    let mut t = Table::new(vec![
        "class",
        "annual_cost",
        "capacity",
        "unit_price",
        "units_sold",
        "revenue",
    ]);
    let (mut cost, mut revenue) = (0.0, 0.0);
    for class in ResourceClass::ALL {
        let Some(&annual) = config.annual_cost.get(&class) else {
            continue;
        };
        let capacity = config.capacity.get(&class).copied().unwrap_or(0.0);
        let price = config.unit_price(class).ok()?;
        let sold = COST_RECOVERY_UTILIZATION * capacity;
        cost += annual;
        revenue += price * sold;
        t.push(vec![
            class.to_string(),
            format!("{annual:.2}"),
            format!("{capacity:.2}"),
            format!("{price:.2}"),
            format!("{sold:.2}"),
            format!("{:.2}", price * sold),
        ]);
    }
    if t.rows.is_empty() {
        return None;
    }
    t.push(vec![
        "total".into(),
        format!("{cost:.2}"),
        String::new(),
        String::new(),
        String::new(),
        format!("{revenue:.2}"),
    ]);
    if let Ok(base) = price_subscription(config, &Bundle::base()) {
        t.notes.push(format!("base bundle (16 vCPU, 2 TB): {base:.2} per year"));
    }
    t.notes.push(format!(
        "revenue - cost at {:.0}% utilization: {:.2}",
        COST_RECOVERY_UTILIZATION * 100.0,
        revenue - cost
    ));
    Some(t)
}
