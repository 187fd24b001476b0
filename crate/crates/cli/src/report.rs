//! Report writing: deterministic JSON records plus CSV tables, persisted by
//! temp-and-rename so partial files never appear.

use anyhow::Context;
use maxgraph_core::identities::IdentityReport;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub records: Vec<IdentityReport>,
    pub summary: Summary,
}

impl VerifyReport {
    pub fn new(scenario: String, seed: u64, tolerance_scale: f64, records: Vec<IdentityReport>) -> Self {
        let passed = records.iter().filter(|r| r.pass).count();
        let summary = Summary {
            total: records.len(),
            passed,
            failed: records.len() - passed,
        };
        VerifyReport {
            scenario,
            seed,
            tolerance_scale,
            records,
            summary,
        }
    }
}

/// Serialize to pretty JSON and write atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let bytes = serde_json::to_vec_pretty(value).context("serializing report")?;
    atomic_write(path, &bytes)
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let tmp: PathBuf = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn fmt_point(p: &[f64]) -> String {
    p.iter()
        .map(|x| format!("{x:.17e}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// One CSV row per identity record.
pub fn records_csv(records: &[IdentityReport]) -> String {
    let mut out = String::from("check,tag,point,lhs,rhs,residual,tolerance,pass\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.3e},{}\n",
            r.name,
            r.tag,
            fmt_point(&r.point),
            r.lhs,
            r.rhs,
            r.residual,
            r.tolerance,
            r.pass
        ));
    }
    out
}

/// One CSV row per solution node: coordinates, value, gradient components.
pub fn solution_csv(graph: &maxgraph_core::solver::DiscreteGraph) -> String {
    use maxgraph_core::solver::DomainSpec;
    let h = graph.domain.spacing();
    let mut out = String::new();
    match &graph.domain {
        DomainSpec::Torus { n } => {
            out.push_str("x,y,value,grad_x,grad_y\n");
            let n = *n;
            let f = &graph.values;
            let idx = |i: usize, j: usize| (i % n) * n + (j % n);
            for i in 0..n {
                for j in 0..n {
                    let gx = (f[idx(i + 1, j)] - f[idx(i + n - 1, j)]) / (2.0 * h);
                    let gy = (f[idx(i, j + 1)] - f[idx(i, j + n - 1)]) / (2.0 * h);
                    out.push_str(&format!(
                        "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                        i as f64 * h,
                        j as f64 * h,
                        f[idx(i, j)],
                        gx,
                        gy
                    ));
                }
            }
        }
        _ => {
            out.push_str("x,value,grad\n");
            let f = &graph.values;
            for i in 0..f.len() {
                let g = if i == 0 {
                    (f[1] - f[0]) / h
                } else if i + 1 == f.len() {
                    (f[i] - f[i - 1]) / h
                } else {
                    (f[i + 1] - f[i - 1]) / (2.0 * h)
                };
                out.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e}\n",
                    i as f64 * h,
                    f[i],
                    g
                ));
            }
        }
    }
    out
}
