//! The full analysis pipeline and its serialized report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::adiabatic_analysis::{
    check_distribution_identities, classify_with_refinement, degeneration_criterion, metric_independence,
    pure_type_energy_identities, sweep, verify_theorem_main, BookkeepingReport, DecayClassification, DegenerationVerdict,
    EigenSweep, EnergyIdentities, MetricIndependence, TheoremVerdict, CLASS_WINDOW, DUALITY_RTOL,
};
use crate::catalog::random_metric;
use crate::complex_model::{exterior_derivatives, BigradedComplex, InvariantComplexStructure};
use crate::error::{Error, Result};
use crate::inequality_checks::{
    check_appendix, check_core_inequalities, check_hypothesis, check_skt, HypothesisVerdict,
    InequalityOperators, InequalityVerdict, SktVerdict, DEFAULT_DELTAS, DEFAULT_H_GRID, PSD_RTOL,
};
use crate::laplacians::{verify_bkn, KERNEL_RTOL};
use crate::metric_geometry::HermitianMetricModel;
use crate::scalar::{Field, GaussRat};
use crate::spectral_sequence::{cross_validate, harmonic_tower, page_statistics, CrossValidation, SpectralPageSet};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "frolicher";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Identity residuals (BKN, energy identities) above this fail.
pub const IDENTITY_RTOL: f64 = 1e-9;
/// h at which the pure-type energy identities are evaluated.
const ENERGY_H: f64 = 0.5;
/// Grid indices whose distribution identities are checked.
const BOOKKEEPING_POINTS: [usize; 3] = [0, 2, 4];

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    pub j_max: usize,
    pub tol: f64,
    pub exact: bool,
    pub seed: u64,
    pub check_hypothesis: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { j_max: 10, tol: PSD_RTOL, exact: true, seed: 0, check_hypothesis: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub psd_rtol: f64,
    pub kernel_rtol: f64,
    pub class_window: f64,
    pub duality_rtol: f64,
    pub identity_rtol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifoldDescriptor {
    pub name: String,
    pub n: usize,
    pub structure: Vec<String>,
    pub exact_coefficients: bool,
}

impl ManifoldDescriptor {
    pub fn of(s: &InvariantComplexStructure) -> Self {
        ManifoldDescriptor { name: s.name.clone(), n: s.n, structure: s.summary(), exact_coefficients: s.is_exact() }
    }
}

/// Rows of [re, im] pairs.
fn metric_rows(g: &HermitianMetricModel) -> Vec<Vec<[f64; 2]>> {
    (0..g.n).map(|i| (0..g.n).map(|j| [g.g[(i, j)].re, g.g[(i, j)].im]).collect()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PagesSection {
    pub arithmetic: &'static str,
    pub max_page: usize,
    pub degeneration_page: usize,
    pub betti: Vec<usize>,
    /// bidegree[r]["p,q"] = dim E_r^{p,q}
    pub bidegree: Vec<BTreeMap<String, usize>>,
    /// degree[r][k] = dim E_r^k
    pub degree: Vec<Vec<usize>>,
    pub cross_validation: CrossValidation,
    /// Dimension identity, duality, page recursion and d_r² = 0 all hold.
    pub bookkeeping_holds: bool,
}

fn pages_section<S: Field>(pages: &SpectralPageSet<S>, cv: CrossValidation, arithmetic: &'static str) -> PagesSection {
    let stats = page_statistics(pages);
    PagesSection {
        arithmetic,
        max_page: pages.max_page,
        degeneration_page: pages.degeneration_page(),
        betti: pages.betti.clone(),
        bidegree: pages.dims.iter().map(|m| m.iter().map(|(&(p, q), &d)| (format!("{p},{q}"), d)).collect()).collect(),
        degree: stats.degree_dims.clone(),
        cross_validation: cv,
        bookkeeping_holds: stats.all_hold(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub h: Vec<f64>,
    pub floor_reached: bool,
    pub duality_residual: f64,
    pub direct_deviation: f64,
    pub kernel_dims_match: bool,
    /// Smallest positive eigenvalue per degree at the last grid point.
    pub smallest_positive: Vec<Option<f64>>,
}

impl SweepSummary {
    pub fn of(s: &EigenSweep) -> Self {
        let last = s.points.last().expect("sweeps are never empty");
        SweepSummary {
            h: s.h_values(),
            floor_reached: s.floor_reached,
            duality_residual: s.duality_residual(),
            direct_deviation: s.max_direct_deviation(),
            kernel_dims_match: s.kernel_dims_match(),
            smallest_positive: last.spectra.iter().zip(&s.betti).map(|(v, &b)| v.get(b).copied()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricIndependenceSection {
    pub seed: u64,
    pub verdict: MetricIndependence,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisSection {
    pub verdict: HypothesisVerdict,
    /// Some(ok) when the hypothesis holds: whether the pages give E_2 = E_∞.
    pub second_page_degeneration: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool: Tool,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub j_max: usize,
    pub manifold: ManifoldDescriptor,
    pub metric: Vec<Vec<[f64; 2]>>,
    pub complex_identities: BTreeMap<String, f64>,
    pub bkn_residual: f64,
    pub pages: PagesSection,
    pub sweep: SweepSummary,
    pub classification: DecayClassification,
    pub theorem: TheoremVerdict,
    pub degeneration: Vec<DegenerationVerdict>,
    pub bookkeeping: Vec<BookkeepingReport>,
    pub metric_independence: MetricIndependenceSection,
    pub energy_identities: EnergyIdentities,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisSection>,
    pub skt: SktVerdict,
    pub inequalities: Vec<InequalityVerdict>,
    /// Human-readable list of asserted checks that failed.
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Everything the CSV emitters need besides the report itself.
pub struct Analysis {
    pub report: AnalysisReport,
    pub sweep: EigenSweep,
}

struct SpectralPart {
    pages: PagesSection,
    sweep: EigenSweep,
    classification: DecayClassification,
    theorem: TheoremVerdict,
    degeneration: Vec<DegenerationVerdict>,
}

/// Pages by all three methods, then the sweep and its verdicts against them.
fn spectral_part<S: Field>(
    c: &BigradedComplex<S>,
    arithmetic: &'static str,
    geom: &crate::metric_geometry::Geometry,
    j_max: usize,
) -> Result<SpectralPart> {
    let (pages, _, cv) = cross_validate(c)?;
    let mut sw = sweep(geom, &pages.betti, j_max)?;
    let classification = classify_with_refinement(&mut sw)?;
    let theorem = verify_theorem_main(&pages, &classification);
    let degeneration = (1..=2).map(|r| degeneration_criterion(&sw, &pages, r)).collect();
    Ok(SpectralPart { pages: pages_section(&pages, cv, arithmetic), sweep: sw, classification, theorem, degeneration })
}

fn identity_residuals<S: Field>(c: &BigradedComplex<S>, tol: f64) -> Result<BTreeMap<String, f64>> {
    let rep = c.verify_complex_identities(tol)?;
    Ok(BTreeMap::from([
        ("del_squared".to_string(), rep.del_squared),
        ("dbar_squared".to_string(), rep.dbar_squared),
        ("anticommutator".to_string(), rep.anticommutator),
    ]))
}

/// Complex validation, pages by three methods, sweep, classification,
/// the eigenvalue-count verdict and the inequality suite.
pub fn analyze(s: &InvariantComplexStructure, metric: &HermitianMetricModel, opts: &AnalysisOptions) -> Result<Analysis> {
    if metric.n != s.n {
        return Err(Error::Metric(format!("metric is {}x{} but {} has n = {}", metric.n, metric.n, s.name, s.n)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let geom = metric.orthonormalize(s)?;
    let (identities, part) = if opts.exact {
        if !s.is_exact() {
            return Err(Error::Config(format!("{}: coefficients are not exact; use --float", s.name)));
        }
        let c = exterior_derivatives::<GaussRat>(s)?;
        (identity_residuals(&c, 0.0)?, spectral_part(&c, "exact", &geom, opts.j_max)?)
    } else {
        (identity_residuals(&geom.complex, 1e-12)?, spectral_part(&geom.complex, "float", &geom, opts.j_max)?)
    };
    let SpectralPart { pages: pages_sec, sweep: sw, classification: cls, theorem, degeneration } = part;
    let mut failures = Vec::new();

    if !pages_sec.cross_validation.agree() {
        failures.push("page dimensions disagree between methods".into());
    }
    if !pages_sec.bookkeeping_holds {
        failures.push("page bookkeeping identities".into());
    }
    if sw.duality_residual() > DUALITY_RTOL {
        failures.push(format!("spectral duality residual {:.2e}", sw.duality_residual()));
    }
    if !sw.kernel_dims_match() {
        failures.push("dim ker Δ_h differs from the Betti numbers".into());
    }
    for f in cls.unclassifiable() {
        failures.push(format!("unclassifiable slope at k={}, i={}", f.k, f.i));
    }
    if !theorem.pass {
        failures.push("eigenvalue decay counts differ from page dimensions".into());
    }
    for d in &degeneration {
        if !d.consistent {
            failures.push(format!("degeneration criterion at r={} disagrees with the pages", d.r));
        }
    }

    let bkn = verify_bkn(&geom, f64::INFINITY)?.max();
    if bkn > IDENTITY_RTOL {
        failures.push(format!("BKN residual {bkn:.2e}"));
    }

    let bookkeeping: Vec<BookkeepingReport> = BOOKKEEPING_POINTS
        .iter()
        .filter(|&&j| j < sw.points.len())
        .map(|&j| check_distribution_identities(&sw, j))
        .collect::<Result<_>>()?;
    for b in bookkeeping.iter().filter(|b| !b.pass()) {
        failures.push(format!("distribution identities at h={}", b.h));
    }

    let other = random_metric(s.n, opts.seed).orthonormalize(s)?;
    let mut sw2 = sweep(&other, &sw.betti, opts.j_max)?;
    let cls2 = classify_with_refinement(&mut sw2)?;
    let independence = metric_independence(&cls, &cls2);
    if !independence.pass {
        failures.push(format!("decay counts depend on the metric (seed {})", opts.seed));
    }

    let tower = harmonic_tower(&geom.complex)?;
    let energy = pure_type_energy_identities(&geom, &tower, ENERGY_H, opts.seed)?;
    if energy.quadratic_form > IDENTITY_RTOL || energy.adjoint_scaling > IDENTITY_RTOL {
        failures.push(format!(
            "energy identities: quadratic form {:.2e}, adjoint scaling {:.2e}",
            energy.quadratic_form, energy.adjoint_scaling
        ));
    }

    let ops = InequalityOperators::new(&geom)?;
    let hyp = check_hypothesis(&ops, opts.tol);
    let skt = check_skt(&ops, opts.tol);
    let mut inequalities = check_core_inequalities(&ops, &hyp, &DEFAULT_H_GRID, opts.tol)?;
    inequalities.extend(check_appendix(&ops, &skt, &DEFAULT_H_GRID, &DEFAULT_DELTAS, opts.tol)?);
    for v in inequalities.iter().filter(|v| v.failed_assertion()) {
        failures.push(format!("{} at k={} (gap {:.3e}, norm {:.3e})", v.name, v.k, v.gap, v.norm));
    }
    let consistency = hyp.pass.then(|| pages_sec.degree.get(2).map_or(true, |row| row == &pages_sec.betti));
    if consistency == Some(false) {
        failures.push("torsion hypothesis holds but E_2 ≠ E_∞".into());
    }
    let hypothesis = opts.check_hypothesis.then(|| HypothesisSection { verdict: hyp, second_page_degeneration: consistency });

    let pass = failures.is_empty();
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        tool: Tool { name: TOOL_NAME, version: TOOL_VERSION },
        tolerances: Tolerances {
            psd_rtol: opts.tol,
            kernel_rtol: KERNEL_RTOL,
            class_window: CLASS_WINDOW,
            duality_rtol: DUALITY_RTOL,
            identity_rtol: IDENTITY_RTOL,
        },
        seed: opts.seed,
        j_max: opts.j_max,
        manifold: ManifoldDescriptor::of(s),
        metric: metric_rows(metric),
        complex_identities: identities,
        bkn_residual: bkn,
        pages: pages_sec,
        sweep: SweepSummary::of(&sw),
        classification: cls,
        theorem,
        degeneration,
        bookkeeping,
        metric_independence: MetricIndependenceSection { seed: opts.seed, verdict: independence },
        energy_identities: energy,
        hypothesis,
        skt,
        inequalities,
        failures,
        pass,
    };
    Ok(Analysis { report, sweep: sw })
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

impl Analysis {
    /// report.json, eigenvalues.csv, classification.csv and verdicts.csv.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json()?)?;
        self.sweep.write_csv(&dir.join("eigenvalues.csv"))?;
        self.report.classification.write_csv(&dir.join("classification.csv"))?;
        self.report.theorem.write_csv(&dir.join("verdicts.csv"))?;
        Ok(())
    }
}
