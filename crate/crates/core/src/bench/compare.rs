//! Fixed versus allocated power across methods and seeds.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_on_network, RunReport};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::scheduler::{Method, Network, PowerMode};

/// Row labels of the gain table.
pub const METRICS: [&str; 3] = ["sum_throughput", "per_user_throughput", "satisfaction_ratio"];

fn metrics(r: &RunReport) -> [f64; 3] {
    [
        r.summary.mean_sum_mbps,
        r.summary.mean_per_user_mbps,
        r.summary.satisfaction_ratio,
    ]
}

/// Mean and sample standard deviation of each metric over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl MetricStats {
    pub fn from_reports(reports: &[&RunReport]) -> Self {
        let n = reports.len() as f64;
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for i in 0..3 {
            let xs: Vec<f64> = reports.iter().map(|r| metrics(r)[i]).collect();
            mean[i] = xs.iter().sum::<f64>() / n;
            if xs.len() > 1 {
                std[i] = (xs.iter().map(|x| (x - mean[i]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            }
        }
        Self { mean, std }
    }
}

/// Per-seed ratio `alloc / fixed` of each metric, averaged over seeds.
/// Reports are paired by position.
pub fn gain_ratios(fixed: &[&RunReport], alloc: &[&RunReport]) -> [f64; 3] {
    let n = fixed.len().min(alloc.len());
    let mut g = [0.0; 3];
    for (f, a) in fixed.iter().zip(alloc) {
        let (mf, ma) = (metrics(f), metrics(a));
        for i in 0..3 {
            g[i] += ma[i] / mf[i] / n as f64;
        }
    }
    g
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodColumn {
    pub method: Method,
    pub fixed: MetricStats,
    pub alloc: MetricStats,
    /// Indexed like [`METRICS`].
    pub gains: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub seeds: Vec<u64>,
    pub columns: Vec<MethodColumn>,
    pub runs: Vec<RunReport>,
}

impl Comparison {
    fn reports(&self, method: Method, power: PowerMode) -> Vec<&RunReport> {
        let mut v: Vec<&RunReport> = self
            .runs
            .iter()
            .filter(|r| r.method == method && r.power == power)
            .collect();
        v.sort_by_key(|r| r.seed);
        v
    }

    /// Gain table, one row per metric and one column per method.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().map(|c| c.method.id().to_string()));
        w.write_record(&header)?;
        for (i, name) in METRICS.iter().enumerate() {
            let mut row = vec![name.to_string()];
            row.extend(self.columns.iter().map(|c| c.gains[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// One row per run with the metrics the gains are computed from.
    pub fn write_runs_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["method", "power", "seed", "sum_throughput", "per_user_throughput", "satisfaction_ratio"])?;
        for r in &self.runs {
            let m = metrics(r);
            w.write_record([
                r.method.id().to_string(),
                r.power.id().to_string(),
                r.seed.to_string(),
                m[0].to_string(),
                m[1].to_string(),
                m[2].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs every method with fixed and with allocated power on each seed.
///
/// A column compares a scheduler with its own output re-powered, so `alg1-x`
/// and `alg2-x` share a column pair.
pub fn compare_methods(config: &ScenarioConfig, methods: &[Method], seeds: &[u64]) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    let mut bases: Vec<Method> = Vec::new();
    for m in methods {
        let b = m.fixed_power_counterpart();
        if !bases.contains(&b) {
            bases.push(b);
        }
    }
    let jobs: Vec<(Method, PowerMode, u64)> = bases
        .iter()
        .flat_map(|&b| {
            seeds
                .iter()
                .flat_map(move |&s| [(b, PowerMode::Fixed, s), (b, PowerMode::Allocated, s)])
        })
        .collect();
    let networks: Vec<(u64, Network)> = seeds
        .par_iter()
        .map(|&s| {
            let mut c = config.clone();
            c.rng_seed = s;
            Network::generate(&c).map(|n| (s, n))
        })
        .collect::<Result<_>>()?;
    let runs: Vec<RunReport> = jobs
        .par_iter()
        .map(|&(m, p, s)| {
            let net = &networks.iter().find(|(seed, _)| *seed == s).expect("generated").1;
            let method = match (m, p) {
                (Method::Alg1Strict, PowerMode::Allocated) => Method::Alg2Strict,
                (Method::Alg1Relax, PowerMode::Allocated) => Method::Alg2Relax,
                _ => m,
            };
            run_on_network(net, method, p)
        })
        .collect::<Result<_>>()?;
    let mut cmp = Comparison {
        seeds: seeds.to_vec(),
        columns: Vec::new(),
        runs,
    };
    for &b in &bases {
        let alloc_method = match b {
            Method::Alg1Strict => Method::Alg2Strict,
            Method::Alg1Relax => Method::Alg2Relax,
            m => m,
        };
        let fixed = cmp.reports(b, PowerMode::Fixed);
        let alloc = cmp.reports(alloc_method, PowerMode::Allocated);
        let column = MethodColumn {
            method: alloc_method,
            fixed: MetricStats::from_reports(&fixed),
            alloc: MetricStats::from_reports(&alloc),
            gains: gain_ratios(&fixed, &alloc),
        };
        cmp.columns.push(column);
    }
    Ok(cmp)
}
