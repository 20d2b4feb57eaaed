//! Spectra of Δ_h on the grid h_j = 2^{−j}, their distribution functions,
//! decay classes λ ≍ h^{2ρ}, and the comparisons of those classes with the
//! pages of the spectral sequence.
//!
//! Eigenvalues come from singular values: Δ_h = d_h*d_h ⊕ d_h d_h* on
//! complementary subspaces, so the nonzero spectrum in degree k is
//! σ²(d_h^{(k)}) ∪ σ²(d_h^{(k−1)}). Squaring singular values keeps small
//! eigenvalues accurate far below ε·‖Δ_h‖, where a direct eigensolve loses them.
//! A direct eigensolve is still run at every grid point as a cross-check.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::complex_model::binomial;
use crate::error::{Error, Result};
use crate::laplacians::kernel_floor;
use crate::linalg::float::{self, hermitian_eigenvalues, try_hermitian_eigenvalues, try_singular_values};
use crate::metric_geometry::{check_h, Geometry};
use crate::scalar::{Field, C64};
use crate::spectral_sequence::{HarmonicTower, SpectralPageSet};

/// Half-width of the window around an integer inside which ρ is rounded.
pub const CLASS_WINDOW: f64 = 0.25;
/// Number of trailing grid points used by slope fits and growth tests.
pub const TAIL_POINTS: usize = 4;
pub const DUALITY_RTOL: f64 = 1e-9;
/// Relative residual allowed for Δ_h-invariance of Im d_h and Im d_h*.
pub const INVARIANCE_RTOL: f64 = 1e-8;

pub fn grid_h(j: usize) -> f64 {
    0.5f64.powi(j as i32)
}

/// Spectra of Δ_h at one grid point.
#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub j: usize,
    pub h: f64,
    /// ‖Δ_h‖ over all degrees.
    pub norm: f64,
    /// spectra[k]: eigenvalues in degree k, ascending, with multiplicity.
    pub spectra: Vec<Vec<f64>>,
    /// max |λ_svd − λ_direct| / ‖Δ_h‖ over all degrees.
    pub direct_deviation: f64,
    /// Eigenvalues of the directly assembled Δ_h below the kernel floor, per degree.
    pub direct_kernel: Vec<usize>,
}

impl GridPoint {
    /// Smallest eigenvalue outside the kernel, over all degrees.
    pub fn smallest_positive(&self, betti: &[usize]) -> Option<f64> {
        self.spectra.iter().zip(betti).filter_map(|(s, &b)| s.get(b).copied()).reduce(f64::min)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenSweep {
    pub name: String,
    pub n: usize,
    pub betti: Vec<usize>,
    /// rank of d: Λ^k → Λ^{k+1}
    pub ranks: Vec<usize>,
    pub j_max: usize,
    pub points: Vec<GridPoint>,
    /// The grid stopped before j_max because an eigenvalue fell below the
    /// precision floor 1e3·ε·‖Δ_h‖.
    pub floor_reached: bool,
    #[serde(skip)]
    geom: Geometry,
}

fn ranks_from_betti(n: usize, betti: &[usize]) -> Result<Vec<usize>> {
    let mut ranks = Vec::with_capacity(2 * n + 1);
    let mut prev = 0usize;
    for (k, &b) in betti.iter().enumerate() {
        let dim = binomial(2 * n, k);
        let r = dim.checked_sub(b + prev).ok_or_else(|| {
            Error::Inconsistent(format!("b_{k} = {b} exceeds dim Λ^{k} − rank d^{} = {}", k as i64 - 1, dim - prev.min(dim)))
        })?;
        ranks.push(r);
        prev = r;
    }
    if prev != 0 {
        return Err(Error::Inconsistent(format!("Betti numbers {betti:?} leave d nonzero on top-degree forms")));
    }
    Ok(ranks)
}

/// d_h = h∂ + ∂̄ from degree k to k+1 (empty for k = 2n).
fn d_h(geom: &Geometry, k: usize, h: f64) -> Result<DMatrix<C64>> {
    let n = geom.n();
    if k >= 2 * n {
        return Ok(DMatrix::zeros(0, binomial(2 * n, k)));
    }
    geom.complex.assemble_total(k, Some(C64::new(h, 0.0)))
}

fn grid_point(geom: &Geometry, betti: &[usize], ranks: &[usize], j: usize) -> Result<GridPoint> {
    let h = grid_h(j);
    let n = geom.n();
    let ds: Vec<DMatrix<C64>> = (0..=2 * n).map(|k| d_h(geom, k, h)).collect::<Result<_>>()?;
    let mut sq = Vec::with_capacity(ds.len());
    for (k, d) in ds.iter().enumerate() {
        let s = try_singular_values(d).ok_or_else(|| Error::Numeric(format!("SVD did not converge at h={h}, k={k}")))?;
        sq.push(s.iter().take(ranks[k]).map(|x| x * x).collect::<Vec<f64>>());
    }
    let mut spectra = Vec::with_capacity(ds.len());
    for k in 0..=2 * n {
        let mut ev = vec![0.0; betti[k]];
        ev.extend(&sq[k]);
        if k > 0 {
            ev.extend(&sq[k - 1]);
        }
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        spectra.push(ev);
    }
    let norm = spectra.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let floor = kernel_floor(norm);
    let mut direct_deviation = 0.0f64;
    let mut direct_kernel = Vec::with_capacity(ds.len());
    for k in 0..=2 * n {
        let mut lap = ds[k].adjoint() * &ds[k];
        if k > 0 {
            lap += &ds[k - 1] * ds[k - 1].adjoint();
        }
        let ev = try_hermitian_eigenvalues(&lap)
            .ok_or_else(|| Error::Numeric(format!("eigensolver did not converge at h={h}, k={k}")))?;
        for (a, b) in ev.iter().zip(&spectra[k]) {
            direct_deviation = direct_deviation.max((a - b).abs() / norm.max(1e-300));
        }
        direct_kernel.push(ev.iter().filter(|&&l| l.abs() <= floor).count());
    }
    Ok(GridPoint { j, h, norm, spectra, direct_deviation, direct_kernel })
}

/// Spectra of Δ_h for h = 2^{−j}, j = 0..=j_max, stopping early once the
/// smallest nonzero eigenvalue drops below 1e3·ε·‖Δ_h‖. `betti` fixes the
/// ranks of d, so the kernel count is exact by construction.
pub fn sweep(geom: &Geometry, betti: &[usize], j_max: usize) -> Result<EigenSweep> {
    let n = geom.n();
    if betti.len() != 2 * n + 1 {
        return Err(Error::Config(format!("expected {} Betti numbers, got {}", 2 * n + 1, betti.len())));
    }
    let ranks = ranks_from_betti(n, betti)?;
    let mut s = EigenSweep {
        name: geom.complex.name.clone(),
        n,
        betti: betti.to_vec(),
        ranks,
        j_max: 0,
        points: Vec::new(),
        floor_reached: false,
        geom: geom.clone(),
    };
    s.extend_to(j_max)?;
    if s.points.is_empty() {
        return Err(Error::Numeric(format!("{}: nonzero eigenvalue below the precision floor already at h = 1", s.name)));
    }
    Ok(s)
}

impl EigenSweep {
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn h_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.h).collect()
    }

    /// Continue the grid up to j_max (no-op once the floor was reached).
    pub fn extend_to(&mut self, j_max: usize) -> Result<()> {
        let start = self.points.len();
        if self.floor_reached || j_max + 1 <= start {
            self.j_max = self.j_max.max(j_max);
            return Ok(());
        }
        let new: Vec<GridPoint> = (start..=j_max)
            .into_par_iter()
            .map(|j| grid_point(&self.geom, &self.betti, &self.ranks, j))
            .collect::<Result<_>>()?;
        for p in new {
            if let Some(m) = p.smallest_positive(&self.betti) {
                if m < kernel_floor(p.norm) {
                    self.floor_reached = true;
                    break;
                }
            }
            self.points.push(p);
        }
        self.j_max = j_max;
        Ok(())
    }

    pub fn spectrum(&self, j: usize, k: usize) -> &[f64] {
        &self.points[j].spectra[k]
    }

    /// max_{h,i} |λ_i^k(h) − λ_i^{2n−k}(h)| / ‖Δ_h‖.
    pub fn duality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in &self.points {
            for k in 0..=2 * self.n {
                let (a, b) = (&p.spectra[k], &p.spectra[2 * self.n - k]);
                if a.len() != b.len() {
                    return f64::INFINITY;
                }
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((x - y).abs() / p.norm.max(1e-300));
                }
            }
        }
        worst
    }

    /// Every grid point's direct eigensolve finds exactly b_k near-zero eigenvalues.
    pub fn kernel_dims_match(&self) -> bool {
        self.points.iter().all(|p| p.direct_kernel == self.betti)
    }

    pub fn max_direct_deviation(&self) -> f64 {
        self.points.iter().fold(0.0f64, |a, p| a.max(p.direct_deviation))
    }

    /// N_h^k(λ) at grid index j.
    pub fn count(&self, j: usize, k: usize, lambda: f64) -> usize {
        self.spectrum(j, k).iter().filter(|&&l| l <= lambda).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            k: usize,
            i: usize,
            h: f64,
            lambda: f64,
        }
        let mut w = csv::Writer::from_path(path)?;
        for k in 0..=2 * self.n {
            for i in 0..binomial(2 * self.n, k) {
                for p in &self.points {
                    w.serialize(Row { k, i: i + 1, h: p.h, lambda: p.spectra[k][i] })?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Spectra of Δ_h restricted to the three pieces of
/// Λ^k = ker Δ_h ⊕ Im d_h ⊕ Im d_h*. Conjugation by θ_h carries these onto
/// ker Δ_{ω_h} ⊕ Im d ⊕ Im d*_{ω_h} with the same restricted spectra.
#[derive(Clone, Debug, Serialize)]
pub struct ThreeSpaceSpectra {
    pub h: f64,
    pub k: usize,
    pub harmonic: usize,
    /// On the exact piece (ascending).
    pub exact: Vec<f64>,
    /// On the coexact piece (ascending).
    pub coexact: Vec<f64>,
    /// ‖Δ_h B − B·BᴴΔ_hB‖ / ‖Δ_h‖ over both pieces, B orthonormal.
    pub invariance: f64,
}

fn restricted_spectrum(lap: &DMatrix<C64>, b: &DMatrix<C64>) -> (Vec<f64>, f64) {
    if b.ncols() == 0 {
        return (vec![], 0.0);
    }
    let m = b.adjoint() * lap * b;
    let res = (lap * b - b * &m).norm() / float::op_norm(lap).max(1e-300);
    (hermitian_eigenvalues(&m), res)
}

/// Three-space decomposition of degree-k forms at scale h. The pieces are
/// spanned by singular vectors of d_h, with ranks fixed by d at h = 1.
pub fn three_space_spectra(geom: &Geometry, h: f64, k: usize) -> Result<ThreeSpaceSpectra> {
    check_h(h)?;
    let n = geom.n();
    if k > 2 * n {
        return Err(Error::Config(format!("degree {k} outside 0..={}", 2 * n)));
    }
    let dim = geom.basis().degree_dim(k);
    let rank = |deg: usize| -> Result<usize> { Ok(float::rank(&geom.complex.assemble_total(deg, None)?)) };
    let d_out = d_h(geom, k, h)?;
    let mut lap = d_out.adjoint() * &d_out;
    let e = if k > 0 {
        let d_in = d_h(geom, k - 1, h)?;
        lap += &d_in * d_in.adjoint();
        let (_, u, _) = float::svd_full(&d_in);
        u.columns(0, rank(k - 1)?).into_owned()
    } else {
        DMatrix::zeros(dim, 0)
    };
    let e_star = if k < 2 * n && d_out.nrows() > 0 {
        let (_, _, v) = float::svd_full(&d_out);
        v.columns(0, rank(k)?).into_owned()
    } else {
        DMatrix::zeros(dim, 0)
    };
    let (exact, r1) = restricted_spectrum(&lap, &e);
    let (coexact, r2) = restricted_spectrum(&lap, &e_star);
    let invariance = r1.max(r2);
    if invariance > INVARIANCE_RTOL {
        return Err(Error::Numeric(format!(
            "Im d_h / Im d_h* not Δ_h-invariant at h={h}, k={k}: residual {invariance:.2e}"
        )));
    }
    let harmonic = dim - exact.len() - coexact.len();
    Ok(ThreeSpaceSpectra { h, k, harmonic, exact, coexact, invariance })
}

/// N_h^k(λ), F_h^{k−1}(λ), F_h^k(λ), G_h^k(λ), G_h^{k+1}(λ) and b_k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DistributionValues {
    pub n: usize,
    pub f_prev: usize,
    pub f: usize,
    pub g: usize,
    pub g_next: usize,
    pub b: usize,
}

impl DistributionValues {
    /// N = F^{k−1} + b_k + F^k
    pub fn counting_identity(&self) -> bool {
        self.n == self.f_prev + self.b + self.f
    }

    /// F^k = G^{k+1}
    pub fn transfer_identity(&self) -> bool {
        self.f == self.g_next
    }
}

fn count_le(v: &[f64], lambda: f64) -> usize {
    v.iter().filter(|&&x| x <= lambda).count()
}

/// Distribution functions at grid index j, degree k and level λ. N is read
/// from the sweep; F and G from the three-space decomposition, with
/// F^{−1} = G^{2n+1} = 0.
pub fn distribution_functions(sweep: &EigenSweep, j: usize, k: usize, lambda: f64) -> Result<DistributionValues> {
    let h = sweep.points.get(j).ok_or_else(|| Error::Config(format!("grid index {j} not in the sweep")))?.h;
    let n = sweep.n;
    let here = three_space_spectra(&sweep.geom, h, k)?;
    let f_prev = if k > 0 { count_le(&three_space_spectra(&sweep.geom, h, k - 1)?.coexact, lambda) } else { 0 };
    let g_next = if k < 2 * n { count_le(&three_space_spectra(&sweep.geom, h, k + 1)?.exact, lambda) } else { 0 };
    Ok(DistributionValues {
        n: sweep.count(j, k, lambda),
        f_prev,
        f: count_le(&here.coexact, lambda),
        g: count_le(&here.exact, lambda),
        g_next,
        b: sweep.betti[k],
    })
}

/// Outcome of the counting identities at every inter-eigenvalue level.
#[derive(Clone, Debug, Serialize)]
pub struct BookkeepingReport {
    pub h: f64,
    pub samples: usize,
    /// (k, λ, values) where an identity failed.
    pub failures: Vec<(usize, f64, DistributionValues)>,
    pub harmonic_matches_betti: bool,
}

impl BookkeepingReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty() && self.harmonic_matches_betti
    }
}

/// Levels at which N_h^k is sampled: 0, midpoints between distinct
/// consecutive eigenvalues, and above the top of the spectrum.
pub fn sample_levels(spectrum: &[f64], norm: f64) -> Vec<f64> {
    let gap = 1e-7 * norm.max(1e-300);
    let mut out = vec![0.0];
    for w in spectrum.windows(2) {
        if w[1] - w[0] > gap {
            out.push(0.5 * (w[0] + w[1]));
        }
    }
    out.push(spectrum.last().copied().unwrap_or(0.0) * 2.0 + 1.0);
    out
}

/// Checks both counting identities at every sampled level in every degree.
pub fn check_distribution_identities(sweep: &EigenSweep, j: usize) -> Result<BookkeepingReport> {
    let p = sweep.points.get(j).ok_or_else(|| Error::Config(format!("grid index {j} not in the sweep")))?;
    let n = sweep.n;
    let pieces: Vec<ThreeSpaceSpectra> =
        (0..=2 * n).into_par_iter().map(|k| three_space_spectra(&sweep.geom, p.h, k)).collect::<Result<_>>()?;
    let harmonic_matches_betti = pieces.iter().zip(&sweep.betti).all(|(t, &b)| t.harmonic == b);
    let mut failures = Vec::new();
    let mut samples = 0;
    for k in 0..=2 * n {
        for lambda in sample_levels(&p.spectra[k], p.norm) {
            samples += 1;
            let v = DistributionValues {
                n: count_le(&p.spectra[k], lambda),
                f_prev: if k > 0 { count_le(&pieces[k - 1].coexact, lambda) } else { 0 },
                f: count_le(&pieces[k].coexact, lambda),
                g: count_le(&pieces[k].exact, lambda),
                g_next: if k < 2 * n { count_le(&pieces[k + 1].exact, lambda) } else { 0 },
                b: sweep.betti[k],
            };
            if !v.counting_identity() || !v.transfer_identity() {
                failures.push((k, lambda, v));
            }
        }
    }
    Ok(BookkeepingReport { h: p.h, samples, failures, harmonic_matches_betti })
}

/// Decay class of one eigenvalue branch: λ ≍ h^{2r}, or identically zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DecayClass {
    Finite(usize),
    Infinite,
}

impl DecayClass {
    pub fn at_least(self, r: usize) -> bool {
        match self {
            DecayClass::Finite(c) => c >= r,
            DecayClass::Infinite => true,
        }
    }
}

impl fmt::Display for DecayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayClass::Finite(r) => write!(f, "{r}"),
            DecayClass::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for DecayClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DecayClass::Finite(r) => s.serialize_u64(*r as u64),
            DecayClass::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexFit {
    pub k: usize,
    /// 1-based position in the sorted spectrum.
    pub i: usize,
    /// Fitted ρ (half the log-log slope); None for kernel indices.
    pub rho: Option<f64>,
    /// None when ρ is farther than 0.25 from every integer.
    pub class: Option<DecayClass>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayClassification {
    pub name: String,
    /// h values of the fitted tail.
    pub tail: Vec<f64>,
    /// fits[k][i]
    pub fits: Vec<Vec<IndexFit>>,
    /// counts[k][r] = #{i : ρ_i ≥ r}, r = 0..=max(n+1, 3).
    pub counts: Vec<Vec<usize>>,
    /// The grid was extended by one point because of unclassifiable slopes.
    pub refined: bool,
}

impl DecayClassification {
    pub fn unclassifiable(&self) -> Vec<&IndexFit> {
        self.fits.iter().flatten().filter(|f| f.class.is_none()).collect()
    }

    pub fn count(&self, r: usize, k: usize) -> usize {
        let c = &self.counts[k];
        c[r.min(c.len() - 1)]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            k: usize,
            i: usize,
            slope: String,
            class: String,
        }
        let mut w = csv::Writer::from_path(path)?;
        for f in self.fits.iter().flatten() {
            w.serialize(Row {
                k: f.k,
                i: f.i,
                slope: f.rho.map_or_else(|| "inf".into(), |r| format!("{:.6}", 2.0 * r)),
                class: f.class.map_or_else(|| "unclassified".into(), |c| c.to_string()),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn round_class(rho: f64) -> Option<DecayClass> {
    let r = rho.round();
    if r >= 0.0 && (rho - r).abs() <= CLASS_WINDOW {
        Some(DecayClass::Finite(r as usize))
    } else {
        None
    }
}

/// Fit ρ for every sorted eigenvalue index over the last four grid points.
/// Branches are matched by sorted position; only counts are compared later.
pub fn classify_decay(sweep: &EigenSweep) -> Result<DecayClassification> {
    let below = sweep.points.iter().filter(|p| p.h < 0.25).count();
    if below < TAIL_POINTS {
        return Err(Error::Numeric(format!(
            "{}: {below} grid points below h = 1/4 (need {TAIL_POINTS}); raise --j-max",
            sweep.name
        )));
    }
    let tail = &sweep.points[sweep.points.len() - TAIL_POINTS..];
    let x: Vec<f64> = tail.iter().map(|p| p.h.ln()).collect();
    let top = (sweep.n + 1).max(3);
    let mut fits = Vec::new();
    let mut counts = Vec::new();
    for k in 0..=2 * sweep.n {
        let mut row = Vec::new();
        for i in 0..binomial(2 * sweep.n, k) {
            if i < sweep.betti[k] {
                row.push(IndexFit { k, i: i + 1, rho: None, class: Some(DecayClass::Infinite) });
                continue;
            }
            let y: Vec<f64> = tail.iter().map(|p| p.spectra[k][i].ln()).collect();
            let rho = 0.5 * ls_slope(&x, &y);
            row.push(IndexFit { k, i: i + 1, rho: Some(rho), class: round_class(rho) });
        }
        // unclassified branches count by their raw ρ
        let c: Vec<usize> = (0..=top)
            .map(|r| {
                row.iter()
                    .filter(|f| match (f.class, f.rho) {
                        (Some(c), _) => c.at_least(r),
                        (None, Some(rho)) => rho >= r as f64,
                        (None, None) => true,
                    })
                    .count()
            })
            .collect();
        counts.push(c);
        fits.push(row);
    }
    Ok(DecayClassification { name: sweep.name.clone(), tail: tail.iter().map(|p| p.h).collect(), fits, counts, refined: false })
}

/// [`classify_decay`], extending the grid by one halving when some slope is
/// unclassifiable and the precision floor allows it.
pub fn classify_with_refinement(sweep: &mut EigenSweep) -> Result<DecayClassification> {
    let first = classify_decay(sweep)?;
    if first.unclassifiable().is_empty() || sweep.floor_reached {
        return Ok(first);
    }
    let before = sweep.points.len();
    sweep.extend_to(sweep.points.len())?;
    if sweep.points.len() == before {
        return Ok(first);
    }
    let mut second = classify_decay(sweep)?;
    second.refined = true;
    Ok(second)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictRow {
    pub r: usize,
    pub k: usize,
    pub dim_er: usize,
    pub count: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremVerdict {
    pub rows: Vec<VerdictRow>,
    pub pass: bool,
}

impl TheoremVerdict {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            r: usize,
            k: usize,
            #[serde(rename = "dimEr")]
            dim_er: usize,
            count: usize,
            pass: bool,
        }
        let mut w = csv::Writer::from_path(path)?;
        for v in &self.rows {
            w.serialize(Row { r: v.r, k: v.k, dim_er: v.dim_er, count: v.count, pass: v.pass })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// c_r^k = dim E_r^k for every degree and r = 1 ..= max(N+1, 3). Pages past the
/// last computed one equal E_∞. A degree with an unclassifiable branch fails.
pub fn verify_theorem_main<S: Field>(pages: &SpectralPageSet<S>, cls: &DecayClassification) -> TheoremVerdict {
    let n = pages.n();
    let r_top = (pages.degeneration_page() + 1).max(3);
    let mut rows = Vec::new();
    for r in 1..=r_top {
        for k in 0..=2 * n {
            let clean = cls.fits[k].iter().all(|f| f.class.is_some());
            let dim_er = pages.degree_dim(r, k);
            let count = cls.count(r, k);
            rows.push(VerdictRow { r, k, dim_er, count, pass: clean && dim_er == count });
        }
    }
    let pass = rows.iter().all(|v| v.pass);
    TheoremVerdict { rows, pass }
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeGrowth {
    pub k: usize,
    /// δ_h^{(k)} / h^{2r} on the tail; empty when there is no positive eigenvalue.
    pub ratios: Vec<f64>,
    /// None when vacuous.
    pub grows: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegenerationVerdict {
    pub r: usize,
    pub degrees: Vec<DegreeGrowth>,
    /// δ/h^{2r} grows by ≥ 2 per halving in every degree 1..=n.
    pub criterion: bool,
    pub vacuous: bool,
    /// E_r = E_∞ according to the pages.
    pub pages_degenerate: bool,
    pub consistent: bool,
}

/// Growth test for the smallest positive eigenvalue δ_h^{(k)}, k = 1..=n,
/// compared with the page-side statement E_r = E_∞.
pub fn degeneration_criterion<S: Field>(sweep: &EigenSweep, pages: &SpectralPageSet<S>, r: usize) -> DegenerationVerdict {
    let tail = &sweep.points[sweep.points.len().saturating_sub(TAIL_POINTS)..];
    let mut degrees = Vec::new();
    for k in 1..=sweep.n {
        let b = sweep.betti[k];
        let ratios: Vec<f64> = if tail.iter().all(|p| p.spectra[k].len() > b) {
            tail.iter().map(|p| p.spectra[k][b] / p.h.powi(2 * r as i32)).collect()
        } else {
            Vec::new()
        };
        let grows = (!ratios.is_empty()).then(|| ratios.windows(2).all(|w| w[1] >= 2.0 * w[0]));
        degrees.push(DegreeGrowth { k, ratios, grows });
    }
    let vacuous = degrees.iter().all(|d| d.grows.is_none());
    let criterion = degrees.iter().all(|d| d.grows != Some(false));
    let pages_degenerate = pages.degeneration_page() <= r;
    DegenerationVerdict { r, degrees, criterion, vacuous, pages_degenerate, consistent: criterion == pages_degenerate }
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricIndependence {
    /// (k, r, count under the first metric, count under the second)
    pub mismatches: Vec<(usize, usize, usize, usize)>,
    pub pass: bool,
}

pub fn metric_independence(a: &DecayClassification, b: &DecayClassification) -> MetricIndependence {
    let mut mismatches = Vec::new();
    for (k, (ca, cb)) in a.counts.iter().zip(&b.counts).enumerate() {
        for (r, (x, y)) in ca.iter().zip(cb).enumerate() {
            if x != y {
                mismatches.push((k, r, *x, *y));
            }
        }
    }
    let pass = mismatches.is_empty() && a.counts.len() == b.counts.len();
    MetricIndependence { mismatches, pass }
}

/// Residuals of the pure-type energy identities at one h.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyIdentities {
    pub h: f64,
    /// ⟨⟨Δ_h u,u⟩⟩_ω vs h^{2(n−p)}⟨⟨Δ_{ω_h}u,u⟩⟩_{ω_h}, relative.
    pub quadratic_form: f64,
    /// (d_r)*_{ω_h} vs h^{2r}(d_r)*_ω on the tower, relative.
    pub adjoint_scaling: f64,
    /// h^{2(n−p)}‖du‖²_{ω_h} vs Σ h^{2r}‖d_r u_r‖², relative (reported only).
    pub splitting: f64,
    /// The same for d*_{ω_h} and (d_r)*_ω on Im d_r (reported only).
    pub adjoint_splitting: f64,
}

fn block_vector(geom: &Geometry, p: usize, q: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let b = geom.basis();
    let mut u = DMatrix::zeros(b.total_dim(), 1);
    for g in b.block_range(p, q) {
        u[(g, 0)] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    u
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

/// Evaluates the pure-type identities on seeded random forms of every
/// bidegree. The splittings u = Σ u_r use the ω-induced tower: u_0 is the part
/// of u orthogonal to ker ∂̄, and u_r its projection onto (ker d_r)^⊥ ⊆ H_r.
pub fn pure_type_energy_identities(geom: &Geometry, tower: &HarmonicTower<C64>, h: f64, seed: u64) -> Result<EnergyIdentities> {
    check_h(h)?;
    let b = geom.basis().clone();
    let n = geom.n();
    let c = &geom.complex;
    let d = c.d_op(1.0);
    let dh = c.d_op(h);
    let lap_h = dh.commutator(&dh.adjoint());
    let wh = geom.rescaled(h)?;
    let w = wh.gram();
    let d_star_wh = wh.adjoint(&d);
    let lap_wh = d.commutator(&d_star_wh);
    let dbar = c.full_dbar();
    let lap_norm = lap_h.norm().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut quadratic_form, mut splitting, mut adjoint_splitting) = (0.0f64, 0.0f64, 0.0f64);
    let q2 = |x: &DMatrix<C64>, m: &DMatrix<C64>, y: &DMatrix<C64>| (x.adjoint() * m * y)[(0, 0)];
    let levels = tower.levels();
    for (p, q) in b.all_bidegrees() {
        let u = block_vector(geom, p, q, &mut rng);
        let unorm2 = u.norm_squared();
        let weight = h.powi(2 * (n - p) as i32);
        let lhs = q2(&u, &lap_h.matrix, &u).re;
        let rhs = weight * q2(&u, &(&w * &lap_wh.matrix), &u).re;
        quadratic_form = quadratic_form.max(rel(lhs, rhs, lap_norm * unorm2));

        let du = &d.matrix * &u;
        let lhs = weight * q2(&du, &w, &du).re;
        let ub = u.rows(b.block_range(p, q).start, b.dim(p, q)).into_owned();
        // r = 0: d_0 = ∂̄ on (ker ∂̄)^⊥
        let mut rhs = (&dbar * &u).norm_squared();
        for r in 1..levels {
            let f = tower.frame(r, p, q);
            let Some(dr) = tower.d_r(r, p, q) else { continue };
            if f.ncols() == 0 || dr.nrows() == 0 {
                continue;
            }
            let co = tower.coimage(r, p, q);
            let ur = &co * (co.adjoint() * &ub);
            let coords = f.adjoint() * ur;
            rhs += h.powi(2 * r as i32) * (dr * coords).norm_squared();
        }
        let scale = (d.norm() * d.norm()).max(1.0) * unorm2;
        splitting = splitting.max(rel(lhs, rhs, scale));

        let ds = &d_star_wh.matrix * &u;
        let lhs = weight * q2(&ds, &w, &ds).re;
        let range = b.block_range(p, q);
        let dbar_star = dbar.adjoint();
        // v_0: projection of u onto Im ∂̄ inside Λ^{p,q}
        let mut rhs = 0.0;
        if q > 0 {
            let src = b.block_range(p, q - 1);
            let blk = dbar.view((range.start, src.start), (range.len(), src.len())).into_owned();
            let im = C64::column_basis(&blk);
            let v0 = &im * (im.adjoint() * &ub);
            let mut full = DMatrix::zeros(b.total_dim(), 1);
            full.rows_mut(range.start, range.len()).copy_from(&v0);
            rhs += (&dbar_star * full).norm_squared();
        }
        for r in 1..levels {
            if p < r || q + r < 1 || q + r - 1 > n {
                continue;
            }
            let (sp, sq) = (p - r, q + r - 1);
            let Some(dsrc) = tower.d_r(r, sp, sq) else { continue };
            let f = tower.frame(r, p, q);
            if dsrc.ncols() == 0 || dsrc.nrows() == 0 || f.ncols() == 0 {
                continue;
            }
            let im = C64::column_basis(&(f * dsrc));
            if im.ncols() == 0 {
                continue;
            }
            let vr = &im * (im.adjoint() * &ub);
            let coords = f.adjoint() * vr;
            rhs += h.powi(2 * r as i32) * (dsrc.adjoint() * coords).norm_squared();
        }
        adjoint_splitting = adjoint_splitting.max(rel(lhs, rhs, scale));
    }

    // (d_r)*_{ω_h} = h^{2r}(d_r)*_ω on frame coordinates
    let mut adjoint_scaling = 0.0f64;
    for r in 1..levels {
        for (&(p, q), dr) in &tower.d[r - 1] {
            if dr.nrows() == 0 || dr.ncols() == 0 || q + 1 < r {
                continue;
            }
            let (tp, tq) = (p + r, q + 1 - r);
            if tp > n {
                continue;
            }
            let fs = tower.frame(r, p, q);
            let ft = tower.frame(r, tp, tq);
            let gram = |f: &DMatrix<C64>, pp: usize, qq: usize| {
                let rg = b.block_range(pp, qq);
                let wv = w.view((rg.start, rg.start), (rg.len(), rg.len()));
                f.adjoint() * wv * f
            };
            let gs = gram(fs, p, q);
            let gt = gram(ft, tp, tq);
            let Some(adj_h) = gs.lu().solve(&(dr.adjoint() * gt)) else {
                return Err(Error::Numeric(format!("ω_h Gram of H_{r}^{{{p},{q}}} singular at h={h}")));
            };
            let target = dr.adjoint() * C64::new(h.powi(2 * r as i32), 0.0);
            let scale = target.norm().max(1e-300);
            if target.norm() > 0.0 {
                adjoint_scaling = adjoint_scaling.max((adj_h - target).norm() / scale);
            }
        }
    }
    Ok(EnergyIdentities { h, quadratic_form, adjoint_scaling, splitting, adjoint_splitting })
}
