use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frolicher::adiabatic_analysis::{classify_with_refinement, sweep};
use frolicher::catalog::{catalog, load_manifold, load_metric_file};
use frolicher::complex_model::exterior_derivatives;
use frolicher::inequality_checks::PSD_RTOL;
use frolicher::metric_geometry::HermitianMetricModel;
use frolicher::report::{analyze, AnalysisOptions};
use frolicher::scalar::GaussRat;
use frolicher::spectral_sequence::pages_by_filtration;
use frolicher::{Error, Result};

#[derive(Parser)]
#[command(name = "frolicher", version, about = "Frölicher pages and adiabatic-limit spectra on invariant-form models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Eigenvalue sweep over h = 2^-j with CSV output.
    Sweep(SweepArgs),
    /// List the built-in manifolds.
    Catalog,
}

#[derive(Args)]
struct Common {
    /// Catalog name or path to a manifold JSON file.
    manifold: String,
    /// JSON file with an n×n Hermitian matrix of [re, im] pairs.
    #[arg(long, value_name = "FILE")]
    metric: Option<PathBuf>,
    /// Last grid index: h runs over 2^-j for j = 0..=J.
    #[arg(long, value_name = "INT", default_value_t = 10)]
    j_max: usize,
    /// Seed for the second (random) metric.
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    /// Directory for report and CSV files.
    #[arg(long, value_name = "DIR")]
    emit: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Relative tolerance for PSD gaps and kernel tests.
    #[arg(long, value_name = "FLOAT", default_value_t = PSD_RTOL)]
    tol: f64,
    /// Pages over exact Gaussian rationals (default).
    #[arg(long, conflicts_with = "float")]
    exact: bool,
    /// Pages in floating point on the metric-adapted complex.
    #[arg(long)]
    float: bool,
    /// Include the torsion hypothesis verdict in the report.
    #[arg(long)]
    check_hypothesis: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
}

fn load(c: &Common) -> Result<(frolicher::complex_model::InvariantComplexStructure, HermitianMetricModel)> {
    let (s, metric) = load_manifold(&c.manifold)?;
    let metric = match &c.metric {
        Some(path) => load_metric_file(path, s.n)?,
        None => metric,
    };
    Ok((s, metric))
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<bool> {
    let (s, metric) = load(&a.common)?;
    let opts = AnalysisOptions {
        j_max: a.common.j_max,
        tol: a.tol,
        exact: !a.float,
        seed: a.common.seed,
        check_hypothesis: a.check_hypothesis,
    };
    let analysis = analyze(&s, &metric, &opts)?;
    let r = &analysis.report;
    match &a.common.emit {
        Some(dir) => {
            analysis.emit(dir)?;
            println!("{}: n={} N={} betti={:?}", r.manifold.name, r.manifold.n, r.pages.degeneration_page, r.pages.betti);
            println!("decay counts vs pages: {}", verdict(r.theorem.pass));
            if let Some(h) = &r.hypothesis {
                println!("torsion hypothesis: {}", verdict(h.verdict.pass));
            }
            println!("SKT: {}", verdict(r.skt.pass));
            for f in &r.failures {
                println!("FAILED {f}");
            }
            println!("report written to {}", dir.join("report.json").display());
        }
        None => print!("{}", r.to_json()?),
    }
    Ok(r.pass)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<bool> {
    let c = &a.common;
    let (s, metric) = load(c)?;
    let geom = metric.orthonormalize(&s)?;
    let betti: Vec<usize> = if s.is_exact() {
        let pages = pages_by_filtration(&exterior_derivatives::<GaussRat>(&s)?)?;
        pages.betti
    } else {
        (0..=2 * s.n).map(|k| geom.complex.betti(k)).collect()
    };
    let mut sw = sweep(&geom, &betti, c.j_max)?;
    let cls = classify_with_refinement(&mut sw)?;
    let dir = c.emit.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    sw.write_csv(&dir.join("eigenvalues.csv"))?;
    cls.write_csv(&dir.join("classification.csv"))?;
    println!(
        "{}: {} h-values, {} unclassifiable, written to {}",
        s.name,
        sw.points.len(),
        cls.unclassifiable().len(),
        dir.display()
    );
    Ok(cls.unclassifiable().is_empty())
}

fn cmd_catalog() {
    for s in catalog() {
        println!("{} n={}", s.name, s.n);
        for line in s.summary() {
            println!("  {line}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Catalog => {
            cmd_catalog();
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Usage(_) | Error::Parse(_) | Error::UnknownManifold(_) | Error::Metric(_) => 2,
                _ => 3,
            })
        }
    }
}
