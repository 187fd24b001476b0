//! Scenario configuration: metrics, graph, check list, solver and estimate
//! blocks, loaded from TOML.

use anyhow::{bail, Context};
use maxgraph_core::graph::{GraphMap, ProductMetric};
use maxgraph_core::metric::metric_by_name;
use maxgraph_core::solutions::{builtin_graph, GraphParams};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub sigma1: MetricSpec,
    pub sigma2: MetricSpec,
    pub graph: GraphSpec,
    pub checks: Option<ChecksSpec>,
    pub solver: Option<SolverSpec>,
    pub estimates: Option<EstimatesSpec>,
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub metric: String,
    pub dim: usize,
}

#[derive(Debug, Deserialize)]
pub struct GraphSpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: GraphParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    pub names: Vec<String>,
    pub points: PointsSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointsSpec {
    /// Explicit chart points.
    Explicit { points: Vec<Vec<f64>> },
    /// Seeded uniform points in a centered box.
    RandomBox {
        half_width: f64,
        count: usize,
        seed: u64,
    },
    /// Seeded directions on geodesic shells (radial charts).
    Shells {
        shells: Vec<f64>,
        per_shell: usize,
        seed: u64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub domain: String,
    pub grid: usize,
    pub c: f64,
    pub seed: Option<u64>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
    /// Torus initial data: target maximum gradient of the seeded field.
    pub init_gradient: Option<f64>,
    /// Interval data.
    pub length: Option<f64>,
    pub left: Option<f64>,
    pub right: Option<f64>,
    /// Radial-disk data.
    pub radius: Option<f64>,
    pub boundary: Option<f64>,
    /// Take the rim value from the radial family member of the [graph] block.
    pub boundary_from_family: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatesSpec {
    pub radii: Vec<f64>,
    pub samples: Option<usize>,
    pub witnesses: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub json: Option<String>,
    pub csv_dir: Option<String>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        let cfg: ScenarioConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn scenario_name(&self, path: &Path) -> String {
        self.name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into())
        })
    }

    pub fn build_product(&self) -> anyhow::Result<ProductMetric> {
        let s1 = metric_by_name(&self.sigma1.metric, self.sigma1.dim)?;
        let s2 = metric_by_name(&self.sigma2.metric, self.sigma2.dim)?;
        Ok(ProductMetric::new(s1, s2))
    }

    pub fn build_graph(&self) -> anyhow::Result<GraphMap> {
        let mut params = self.graph.params.clone();
        if params.m.is_none() {
            params.m = Some(self.sigma1.dim);
        }
        if params.n.is_none() {
            params.n = Some(self.sigma2.dim);
        }
        let built = builtin_graph(&self.graph.kind, &params)?;
        if built.map.domain_dim() != self.sigma1.dim || built.map.target_dim() != self.sigma2.dim {
            bail!(
                "graph dimensions {}x{} do not match the charts {}x{}",
                built.map.domain_dim(),
                built.map.target_dim(),
                self.sigma1.dim,
                self.sigma2.dim
            );
        }
        Ok(built.map)
    }

    /// Chart points for the check list, deterministic given the seed.
    pub fn sample_points(&self, override_seed: Option<u64>) -> anyhow::Result<Vec<Vec<f64>>> {
        let Some(checks) = &self.checks else {
            bail!("scenario has no [checks] block");
        };
        let m = self.sigma1.dim;
        let pts = match &checks.points {
            PointsSpec::Explicit { points } => points.clone(),
            PointsSpec::RandomBox {
                half_width,
                count,
                seed,
            } => maxgraph_core::sampling::seeded_box(
                m,
                *half_width,
                *count,
                override_seed.unwrap_or(*seed),
            ),
            PointsSpec::Shells {
                shells,
                per_shell,
                seed,
            } => {
                let seed = override_seed.unwrap_or(*seed);
                let hyperbolic = self.sigma1.metric == "poincare_ball";
                let mut out = Vec::new();
                for (k, &r) in shells.iter().enumerate() {
                    let rho = if hyperbolic { (r / 2.0).tanh() } else { r };
                    for dir in
                        maxgraph_core::sampling::seeded_directions(m, *per_shell, seed + k as u64)
                    {
                        out.push(dir.iter().map(|&u| u * rho).collect());
                    }
                }
                out
            }
        };
        Ok(pts)
    }
}
