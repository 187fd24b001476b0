//! Scenario-driven front end: verification suites, solver experiments and
//! isoperimetric estimates over text configurations, with JSON/CSV reports.

mod config;
mod report;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use config::ScenarioConfig;
use maxgraph_core::identities::{check_registry, run_check};
use maxgraph_core::metric::{metric_by_name, METRIC_NAMES};
use maxgraph_core::solutions::{verify_family_properties, CmcFamily, GRAPH_NAMES};
use maxgraph_core::solver::{solve_cmc, DomainSpec, InitialData, SolveOptions};
use report::{records_csv, solution_csv, write_json, VerifyReport};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "maxgraph",
    version,
    about = "Spacelike graph geometry engine: identity suites, CMC families, discrete solves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario configuration file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the sampling / solver seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiply identity tolerances by this factor.
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's identity checks at sampled points.
    Verify(CommonArgs),
    /// Solve the scenario's discrete maximal/CMC problem.
    Solve(CommonArgs),
    /// Verify the radial CMC family directly.
    Family {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Isoperimetric estimates: mean-curvature bound and Cheeger witnesses.
    Estimates {
        /// Scenario file with an [estimates] block (graph-based checks).
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Metric name for a witness-only query.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 64)]
        witnesses: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List registered metrics, graph constructions and identity checks.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Verify(args) => cmd_verify(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Family { m, c, samples, out } => cmd_family(m, c, samples, out),
        Command::Estimates {
            scenario,
            metric,
            dim,
            radius,
            witnesses,
            out,
        } => cmd_estimates(scenario, metric, dim, radius, witnesses, out),
        Command::List => {
            cmd_list();
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn out_path(out: &Option<PathBuf>, name: &str) -> PathBuf {
    match out {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}

fn cmd_verify(args: CommonArgs) -> anyhow::Result<ExitCode> {
    let cfg = ScenarioConfig::load(&args.scenario)?;
    let product = cfg.build_product()?;
    let graph = cfg.build_graph()?;
    let points = cfg.sample_points(args.seed)?;
    let Some(checks) = &cfg.checks else {
        bail!("scenario has no [checks] block");
    };
    let registry: Vec<&str> = check_registry().iter().map(|c| c.name).collect();
    for name in &checks.names {
        if !registry.contains(&name.as_str()) {
            bail!("unknown check `{name}`; see `maxgraph list`");
        }
    }

    let mut records = Vec::new();
    for name in &checks.names {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for p in &points {
            let mut rep = run_check(name, &product, &graph, p)
                .with_context(|| format!("check {name} at {p:?}"))?;
            if rep.kind == "identity" {
                rep.tolerance *= args.tolerance_scale;
                rep.pass = rep.residual <= rep.tolerance;
            }
            worst = worst.max(rep.residual);
            ok &= rep.pass;
            records.push(rep);
        }
        println!(
            "{:<28} {}  worst residual {:.3e}",
            name,
            if ok { "pass" } else { "FAIL" },
            worst
        );
    }

    let scenario_name = cfg.scenario_name(&args.scenario);
    let rep = VerifyReport::new(
        scenario_name,
        args.seed.unwrap_or(0),
        args.tolerance_scale,
        records,
    );
    let json_name = cfg
        .output
        .as_ref()
        .and_then(|o| o.json.clone())
        .unwrap_or_else(|| "verify_report.json".into());
    write_json(&out_path(&args.out, &json_name), &rep)?;
    let csv_dir = cfg
        .output
        .as_ref()
        .and_then(|o| o.csv_dir.clone())
        .unwrap_or_else(|| ".".into());
    let csv_path = out_path(&args.out, &csv_dir).join("identity_records.csv");
    report::atomic_write(&csv_path, records_csv(&rep.records).as_bytes())?;
    println!(
        "{} checks, {} passed, {} failed",
        rep.summary.total, rep.summary.passed, rep.summary.failed
    );
    Ok(if rep.summary.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct SolveReport {
    scenario: String,
    seed: u64,
    domain: String,
    grid: usize,
    c: f64,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    sup_central_gradient: f64,
    mean_value: f64,
    range: f64,
    log: Vec<maxgraph_core::solver::IterationRecord>,
}

fn cmd_solve(args: CommonArgs) -> anyhow::Result<ExitCode> {
    let cfg = ScenarioConfig::load(&args.scenario)?;
    let Some(spec) = &cfg.solver else {
        bail!("scenario has no [solver] block");
    };
    let seed = args.seed.or(spec.seed).unwrap_or(0);
    let (domain, metric, init) = match spec.domain.as_str() {
        "torus" => {
            let metric = metric_by_name("flat_torus", 2)?;
            let init = InitialData::Random {
                max_gradient: spec.init_gradient.unwrap_or(0.5),
            };
            (DomainSpec::Torus { n: spec.grid }, metric, init)
        }
        "interval" => {
            let metric = metric_by_name("line", 1)?;
            let domain = DomainSpec::Interval {
                n: spec.grid,
                length: spec.length.unwrap_or(1.0),
                left: spec.left.unwrap_or(0.0),
                right: spec.right.unwrap_or(0.0),
            };
            (domain, metric, InitialData::Random { max_gradient: 0.0 })
        }
        "radial_disk" => {
            let metric = metric_by_name(&cfg.sigma1.metric, cfg.sigma1.dim)?;
            let radius = spec
                .radius
                .context("radial_disk solves need `radius`")?;
            let boundary = if spec.boundary_from_family.unwrap_or(false) {
                let family = CmcFamily::new(
                    cfg.sigma1.dim,
                    cfg.graph.params.c.unwrap_or(spec.c),
                    cfg.graph.params.d.unwrap_or(0.0),
                )?;
                family.value_radial(radius)?
            } else {
                spec.boundary.context("radial_disk solves need `boundary`")?
            };
            let domain = DomainSpec::RadialDisk {
                n: spec.grid,
                radius,
                boundary,
            };
            (domain, metric, InitialData::Random { max_gradient: 0.0 })
        }
        other => bail!("unknown solver domain `{other}`"),
    };
    let options = SolveOptions {
        c: spec.c,
        max_iterations: spec.max_iterations.unwrap_or(60),
        tolerance: spec.tolerance.unwrap_or(1e-11),
        damping_init: 0.5,
        seed,
    };
    let result = solve_cmc(&options, &domain, &metric, &init)?;
    let rep = SolveReport {
        scenario: cfg.scenario_name(&args.scenario),
        seed,
        domain: spec.domain.clone(),
        grid: spec.grid,
        c: spec.c,
        converged: result.converged,
        iterations: result.iterations,
        final_residual: result.final_residual,
        sup_central_gradient: result.graph.max_central_gradient(),
        mean_value: result.graph.mean(),
        range: result.graph.range(),
        log: result.log.clone(),
    };
    println!(
        "solve {}: {} after {} iterations, residual {:.3e}, sup|Df| {:.3e}",
        rep.scenario,
        if rep.converged { "converged" } else { "stalled" },
        rep.iterations,
        rep.final_residual,
        rep.sup_central_gradient
    );
    let json_name = cfg
        .output
        .as_ref()
        .and_then(|o| o.json.clone())
        .unwrap_or_else(|| "solve_report.json".into());
    write_json(&out_path(&args.out, &json_name), &rep)?;
    let csv_dir = cfg
        .output
        .as_ref()
        .and_then(|o| o.csv_dir.clone())
        .unwrap_or_else(|| ".".into());
    let csv_path = out_path(&args.out, &csv_dir).join("solution.csv");
    report::atomic_write(&csv_path, solution_csv(&result.graph).as_bytes())?;
    Ok(if rep.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_family(m: usize, c: f64, samples: usize, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let report = verify_family_properties(m, c, samples)?;
    for check in &report.checks {
        println!(
            "{:<24} {}  lhs {:.6e}  rhs {:.6e}",
            check.name,
            if check.pass { "pass" } else { "FAIL" },
            check.lhs,
            check.rhs
        );
    }
    println!(
        "constancy std-dev {:.3e}, oracle deviation {:.3e}",
        report.scalar_std_dev, report.max_oracle_deviation
    );
    write_json(&out_path(&out, "family_report.json"), &report)?;
    Ok(if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct EstimatesReport {
    scenario: Option<String>,
    prop9: Vec<maxgraph_core::estimates::Prop9Report>,
    cheeger: Vec<CheegerRow>,
}

#[derive(Serialize)]
struct CheegerRow {
    metric: String,
    dim: usize,
    radius: f64,
    witness_bound: f64,
}

fn cmd_estimates(
    scenario: Option<PathBuf>,
    metric: Option<String>,
    dim: Option<usize>,
    radius: Option<f64>,
    witnesses: usize,
    out: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let mut rep = EstimatesReport {
        scenario: None,
        prop9: Vec::new(),
        cheeger: Vec::new(),
    };
    let mut all_pass = true;
    if let Some(path) = scenario {
        let cfg = ScenarioConfig::load(&path)?;
        let Some(spec) = &cfg.estimates else {
            bail!("scenario has no [estimates] block");
        };
        let product = cfg.build_product()?;
        let graph = cfg.build_graph()?;
        rep.scenario = Some(cfg.scenario_name(&path));
        for &r in &spec.radii {
            let p9 = maxgraph_core::estimates::prop9_check(
                &product,
                &graph,
                r,
                spec.samples.unwrap_or(1000),
            )?;
            println!(
                "prop9 r={r}: inf|H| {:.6e} <= {:.6e}  slack {:.3e}  {}",
                p9.lhs_inf_mean,
                p9.rhs,
                p9.slack,
                if p9.pass { "pass" } else { "FAIL" }
            );
            all_pass &= p9.pass;
            rep.prop9.push(p9);
            let w = maxgraph_core::estimates::cheeger_witness(
                &product.sigma1,
                r,
                spec.witnesses.unwrap_or(witnesses),
            )?;
            rep.cheeger.push(CheegerRow {
                metric: cfg.sigma1.metric.clone(),
                dim: cfg.sigma1.dim,
                radius: r,
                witness_bound: w,
            });
        }
    } else {
        let name = metric.context("either --scenario or --metric is required")?;
        let dim = dim.context("--dim is required with --metric")?;
        let r = radius.context("--radius is required with --metric")?;
        let field = metric_by_name(&name, dim)?;
        let w = maxgraph_core::estimates::cheeger_witness(&field, r, witnesses)?;
        println!("cheeger witness bound for {name} (dim {dim}) at r={r}: {w:.9e}");
        rep.cheeger.push(CheegerRow {
            metric: name,
            dim,
            radius: r,
            witness_bound: w,
        });
    }
    write_json(&out_path(&out, "estimates_report.json"), &rep)?;
    let mut csv = String::from("kind,metric,dim,radius,lhs,rhs,slack,witness_bound,pass\n");
    for p9 in &rep.prop9 {
        csv.push_str(&format!(
            "prop9,,,{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            p9.measures.radius,
            p9.lhs_inf_mean,
            p9.rhs,
            p9.slack,
            p9.measures.cheeger_witness,
            p9.pass
        ));
    }
    for row in &rep.cheeger {
        csv.push_str(&format!(
            "cheeger,{},{},{:.17e},,,,{:.17e},true\n",
            row.metric, row.dim, row.radius, row.witness_bound
        ));
    }
    report::atomic_write(&out_path(&out, "estimates_rows.csv"), csv.as_bytes())?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_list() {
    println!("metrics:");
    for name in METRIC_NAMES {
        println!("  {name}");
    }
    println!("graphs:");
    for name in GRAPH_NAMES {
        println!("  {name}");
    }
    println!("checks:");
    for info in check_registry() {
        println!("  {:<28} [{}] {}", info.name, info.tag, info.description);
    }
}
