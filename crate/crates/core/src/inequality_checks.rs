//! Operator inequalities A ≥ B certified as PSD gaps min eig(A − B), degree
//! by degree, together with the torsion hypothesis ker Δ″ ⊂ ker [τ,τ*] and
//! the SKT condition ∂∂̄ω = 0.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::complex_model::GradedOperator;
use crate::error::{Error, Result};
use crate::laplacians::{OperatorSuite, KERNEL_RTOL};
use crate::linalg::float::{hermitian_eigenvalues, hermitian_residual, max_eig, op_norm, psd_kernel_ref};
use crate::metric_geometry::Geometry;
use crate::scalar::{Field, C64};
use crate::spectral_sequence::SpectralPageSet;

/// Relative tolerance for PSD gaps: pass iff min eig ≥ −tol·‖A − B‖.
pub const PSD_RTOL: f64 = 1e-10;
/// Relative self-adjointness residual above which [`psd_gap`] refuses its input.
pub const HERMITIAN_RTOL: f64 = 1e-10;
/// h values in (0,1) used when none are given.
pub const DEFAULT_H_GRID: [f64; 6] = [0.9, 0.75, 0.5, 0.25, 0.1, 0.01];
pub const DEFAULT_DELTAS: [f64; 3] = [0.5, 1.0, 2.0];
/// Fractions of h_0(k) at which Δ″ ≥ h[τ,τ*] is tested.
const H0_FRACTIONS: [f64; 5] = [0.99, 0.75, 0.5, 0.1, 0.01];

/// PSD gap of one inequality in one degree.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityVerdict {
    pub name: String,
    pub k: usize,
    pub h: Option<f64>,
    pub delta: Option<f64>,
    /// Smallest eigenvalue of LHS − RHS.
    pub gap: f64,
    /// ‖LHS − RHS‖
    pub norm: f64,
    pub tol: f64,
    pub pass: bool,
    /// Failures count only for asserted verdicts; the rest are informational.
    pub asserted: bool,
    pub constants: BTreeMap<String, f64>,
}

impl InequalityVerdict {
    pub fn failed_assertion(&self) -> bool {
        self.asserted && !self.pass
    }
}

/// Smallest eigenvalue of A − B together with ‖A − B‖.
pub fn psd_gap(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<(f64, f64)> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::Usage(format!("psd_gap needs square matrices of one shape, got {:?} and {:?}", a.shape(), b.shape())));
    }
    let scale = op_norm(a).max(op_norm(b)).max(1.0);
    for (m, side) in [(a, "left"), (b, "right")] {
        let r = hermitian_residual(m);
        if r > HERMITIAN_RTOL * scale {
            return Err(Error::Usage(format!("{side} operand is not self-adjoint (residual {r:.2e})")));
        }
    }
    let diff = a - b;
    let diff = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
    if diff.is_empty() {
        return Ok((0.0, 0.0));
    }
    let gap = hermitian_eigenvalues(&diff).first().copied().unwrap_or(0.0);
    Ok((gap, op_norm(&diff)))
}

struct Check<'a> {
    name: &'a str,
    k: usize,
    h: Option<f64>,
    delta: Option<f64>,
    asserted: bool,
    constants: BTreeMap<String, f64>,
}

impl Check<'_> {
    fn run(self, lhs: &DMatrix<C64>, rhs: &DMatrix<C64>, tol: f64) -> Result<InequalityVerdict> {
        let (gap, norm) = psd_gap(lhs, rhs)?;
        Ok(InequalityVerdict {
            name: self.name.to_string(),
            k: self.k,
            h: self.h,
            delta: self.delta,
            gap,
            norm,
            tol,
            pass: gap >= -tol * norm,
            asserted: self.asserted,
            constants: self.constants,
        })
    }
}

fn check<'a>(name: &'a str, k: usize) -> Check<'a> {
    Check { name, k, h: None, delta: None, asserted: true, constants: BTreeMap::new() }
}

fn consts(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// h-independent operators, one degree block at a time.
#[derive(Clone, Debug)]
pub struct InequalityOperators {
    pub n: usize,
    geom: Geometry,
    pub lap_del: GradedOperator,
    pub lap_dbar: GradedOperator,
    pub lap: GradedOperator,
    pub tau_tau: GradedOperator,
    pub taubar_taubar: GradedOperator,
    pub x_omega: GradedOperator,
    pub x_bar_omega: GradedOperator,
    pub ddbar_omega: Vec<C64>,
}

impl InequalityOperators {
    pub fn new(geom: &Geometry) -> Result<Self> {
        let s = OperatorSuite::build(geom, 1.0)?;
        Ok(InequalityOperators {
            n: geom.n(),
            geom: geom.clone(),
            lap_del: s.lap_del,
            lap_dbar: s.lap_dbar,
            lap: s.lap,
            tau_tau: s.torsion.tau_tau,
            taubar_taubar: s.torsion.taubar_taubar,
            x_omega: s.torsion.x_omega,
            x_bar_omega: s.torsion.x_bar_omega,
            ddbar_omega: s.torsion.ddbar_omega,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    /// Δ_h = [d_h, d_h*] with d_h = h∂ + ∂̄.
    pub fn lap_h(&self, h: f64) -> GradedOperator {
        let dh = self.geom.complex.d_op(h);
        dh.commutator(&dh.adjoint())
    }
}

fn blk(op: &GradedOperator, k: usize) -> DMatrix<C64> {
    op.degree_block(k)
}

/// Orthonormal frame of ker Δ″ in degree k, assembled from bidegree blocks.
fn dbar_harmonic_frame(ops: &InequalityOperators, k: usize) -> DMatrix<C64> {
    let b = ops.lap_dbar.basis.clone();
    let range = b.degree_range(k);
    let reference = ops.lap_dbar.norm();
    let mut cols: Vec<DMatrix<C64>> = Vec::new();
    for (p, q) in b.all_bidegrees().into_iter().filter(|&(p, q)| p + q == k) {
        let r = b.block_range(p, q);
        let kern = psd_kernel_ref(&ops.lap_dbar.bidegree_block(p, q), KERNEL_RTOL, reference);
        let mut full = DMatrix::zeros(range.len(), kern.ncols());
        full.view_mut((r.start - range.start, 0), (r.len(), kern.ncols())).copy_from(&kern);
        cols.push(full);
    }
    let total: usize = cols.iter().map(|c| c.ncols()).sum();
    let mut out = DMatrix::zeros(range.len(), total);
    let mut at = 0;
    for c in cols {
        out.view_mut((0, at), (range.len(), c.ncols())).copy_from(&c);
        at += c.ncols();
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisDegree {
    pub k: usize,
    pub kernel_dim: usize,
    /// max ‖[τ,τ*]u‖ over an orthonormal frame u of ker Δ″
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisVerdict {
    pub degrees: Vec<HypothesisDegree>,
    pub tol: f64,
    pub pass: bool,
}

impl HypothesisVerdict {
    pub fn holds_in(&self, k: usize) -> bool {
        self.degrees.iter().any(|d| d.k == k && d.pass)
    }
}

/// ker Δ″ ⊂ ker [τ,τ*] in degrees 1..=n, tested on a frame of ker Δ″ with
/// tolerance tol·max(‖Δ″‖, 1).
pub fn check_hypothesis(ops: &InequalityOperators, tol: f64) -> HypothesisVerdict {
    let scale = ops.lap_dbar.norm().max(1.0);
    let degrees: Vec<HypothesisDegree> = (1..=ops.n)
        .map(|k| {
            let frame = dbar_harmonic_frame(ops, k);
            let image = blk(&ops.tau_tau, k) * &frame;
            let residual = image.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
            HypothesisDegree { k, kernel_dim: frame.ncols(), residual, pass: residual <= tol * scale }
        })
        .collect();
    let pass = degrees.iter().all(|d| d.pass);
    HypothesisVerdict { degrees, tol, pass }
}

/// With the hypothesis in every degree 1..=n the pages must give
/// dim E_2^k = b_k for all k. None when the hypothesis fails somewhere.
pub fn hypothesis_consistency<S: Field>(hyp: &HypothesisVerdict, pages: &SpectralPageSet<S>) -> Option<bool> {
    hyp.pass.then(|| (0..pages.betti.len()).all(|k| pages.degree_dim(2.min(pages.max_page), k) == pages.betti[k]))
}

#[derive(Clone, Debug, Serialize)]
pub struct SktVerdict {
    /// ‖∂∂̄ω‖ as a coefficient vector of 4-forms.
    pub ddbar_norm: f64,
    pub scale: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn check_skt(ops: &InequalityOperators, tol: f64) -> SktVerdict {
    let c = &ops.geom.complex;
    let omega: f64 = ops.geom.omega_form().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = (op_norm(&c.full_del()) * op_norm(&c.full_dbar()) * omega).max(1.0);
    let ddbar_norm = ops.ddbar_omega.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    SktVerdict { ddbar_norm, scale, tol, pass: ddbar_norm <= tol * scale }
}

/// δ″_k, C_k and h_0(k) = min(δ″_k / C_k, 1), with h_0 = 1 when C_k = 0 or
/// Δ″ vanishes in degree k.
#[derive(Clone, Debug, Serialize)]
pub struct TorsionThreshold {
    pub k: usize,
    /// Smallest positive eigenvalue of Δ″; None when Δ″ = 0 in degree k.
    pub delta_dbar: Option<f64>,
    pub c_k: f64,
    pub h0: f64,
}

pub fn torsion_threshold(ops: &InequalityOperators, k: usize) -> TorsionThreshold {
    let lap = blk(&ops.lap_dbar, k);
    let floor = KERNEL_RTOL * ops.lap_dbar.norm().max(1.0);
    let delta_dbar = hermitian_eigenvalues(&lap).into_iter().find(|&l| l > floor);
    let tt = blk(&ops.tau_tau, k);
    let c_k = if tt.is_empty() { 0.0 } else { max_eig(&tt).max(0.0) };
    let h0 = match delta_dbar {
        Some(d) if c_k > 0.0 => (d / c_k).min(1.0),
        _ => 1.0,
    };
    TorsionThreshold { k, delta_dbar, c_k, h0 }
}

/// Δ_h ≥ ¾Δ″ + h²Δ′ − Ch², Δ_h − h²Δ ≥ (1−h)h(Δ″ − h[τ,τ*]), and, where
/// the torsion hypothesis holds in degree k, Δ″ ≥ h[τ,τ*] and Δ_h ≥ h²Δ for
/// h < h_0(k) together with ker Δ_h = ker Δ.
///
/// For the first inequality the minimal C(h) is reported and the PSD gap is
/// taken with C = 4·max eig [τ,τ*], an h-independent bound.
pub fn check_core_inequalities(ops: &InequalityOperators, hyp: &HypothesisVerdict, h_grid: &[f64], tol: f64) -> Result<Vec<InequalityVerdict>> {
    for &h in h_grid {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Config(format!("h grid values must lie in (0,1), got {h}")));
        }
    }
    let n = ops.n;
    let mut out = Vec::new();
    let c_bound = 4.0 * max_eig(&ops.tau_tau.matrix).max(0.0);
    let mut lower_grid: Vec<f64> = vec![4.0, 2.0, 1.0];
    lower_grid.extend(h_grid);
    for k in 0..=2 * n {
        let dpp = blk(&ops.lap_dbar, k);
        let dp = blk(&ops.lap_del, k);
        let tt = blk(&ops.tau_tau, k);
        let full = blk(&ops.lap, k);
        for &h in &lower_grid {
            let lh = blk(&ops.lap_h(h), k);
            let rhs0 = &dpp * C64::new(0.75, 0.0) + &dp * C64::new(h * h, 0.0);
            let (g0, _) = psd_gap(&lh, &rhs0)?;
            let c_min = (-g0).max(0.0) / (h * h);
            let id = DMatrix::<C64>::identity(dpp.nrows(), dpp.nrows());
            let rhs = &rhs0 - id * C64::new(c_bound * h * h, 0.0);
            let mut c = check("lower_estimate", k);
            c.h = Some(h);
            c.constants = consts(&[("C_min", c_min), ("C", c_bound)]);
            out.push(c.run(&lh, &rhs, tol)?);
        }
        for &h in h_grid {
            let lh = blk(&ops.lap_h(h), k);
            let lhs = &lh - &full * C64::new(h * h, 0.0);
            let rhs = (&dpp - &tt * C64::new(h, 0.0)) * C64::new((1.0 - h) * h, 0.0);
            let mut c = check("difference_bound", k);
            c.h = Some(h);
            out.push(c.run(&lhs, &rhs, tol)?);
        }
    }
    for k in 1..=n {
        let th = torsion_threshold(ops, k);
        let asserted = hyp.holds_in(k);
        let mut base = consts(&[("C_k", th.c_k), ("h0", th.h0)]);
        if let Some(d) = th.delta_dbar {
            base.insert("delta_dbar".into(), d);
        }
        let dpp = blk(&ops.lap_dbar, k);
        let tt = blk(&ops.tau_tau, k);
        let full = blk(&ops.lap, k);
        let kernel = psd_kernel_ref(&full, KERNEL_RTOL, ops.lap.norm());
        for f in H0_FRACTIONS {
            let h = f * th.h0;
            let mut c = check("dbar_dominates_torsion", k);
            c.h = Some(h);
            c.asserted = asserted;
            c.constants = base.clone();
            out.push(c.run(&dpp, &(&tt * C64::new(h, 0.0)), tol)?);

            let lh_op = ops.lap_h(h);
            let lh = blk(&lh_op, k);
            let mut c = check("h2_domination", k);
            c.h = Some(h);
            c.asserted = asserted;
            c.constants = base.clone();
            out.push(c.run(&lh, &(&full * C64::new(h * h, 0.0)), tol)?);

            // ker Δ_h ⊆ ker Δ, with equal dimensions: ‖Δ K_h‖ ≤ tol·‖Δ‖
            let kh = psd_kernel_ref(&lh, KERNEL_RTOL, lh_op.norm());
            let leak = op_norm(&(&full * &kh));
            let dims_equal = kh.ncols() == kernel.ncols();
            let scale = ops.lap.norm().max(1.0);
            let mut constants = base.clone();
            constants.insert("dim_ker_lap_h".into(), kh.ncols() as f64);
            constants.insert("dim_ker_lap".into(), kernel.ncols() as f64);
            out.push(InequalityVerdict {
                name: "kernel_equality".into(),
                k,
                h: Some(h),
                delta: None,
                gap: -leak,
                norm: scale,
                tol,
                pass: dims_equal && leak <= tol * scale,
                asserted,
                constants,
            });
        }
    }
    Ok(out)
}

/// Comparisons of Δ′ and Δ″ that hold for SKT metrics. Asserted only when
/// `skt` passes. The constant for the −Ch and −Ch² bounds is max eig [τ̄,τ̄*].
pub fn check_appendix(ops: &InequalityOperators, skt: &SktVerdict, h_grid: &[f64], deltas: &[f64], tol: f64) -> Result<Vec<InequalityVerdict>> {
    for &h in h_grid {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Config(format!("h grid values must lie in (0,1), got {h}")));
        }
    }
    if let Some(&d) = deltas.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::Config(format!("δ values must be positive, got {d}")));
    }
    let n = ops.n;
    let asserted = skt.pass;
    let c = max_eig(&ops.taubar_taubar.matrix).max(0.0);
    let cs = consts(&[("C", c)]);
    let r = |x: f64| C64::new(x, 0.0);
    let mut out = Vec::new();
    for k in 0..=2 * n {
        let dpp = blk(&ops.lap_dbar, k);
        let dp = blk(&ops.lap_del, k);
        let tt = blk(&ops.tau_tau, k);
        let tbtb = blk(&ops.taubar_taubar, k);
        let xb = blk(&ops.x_bar_omega, k);
        let full = blk(&ops.lap, k);
        let id = DMatrix::<C64>::identity(dpp.nrows(), dpp.nrows());
        for &d in deltas {
            let upper = &dpp * r(1.0 + d) + &tbtb * r(1.0 + 1.0 / d);
            let mut v = check("del_upper_bound", k);
            v.delta = Some(d);
            v.asserted = asserted;
            out.push(v.run(&upper, &dp, tol)?);

            let lower = &dpp * r(1.0 / (1.0 + d)) - &tt * r(1.0 / d);
            let mut v = check("del_lower_bound", k);
            v.delta = Some(d);
            v.asserted = asserted;
            out.push(v.run(&dp, &lower, tol)?);
        }
        for &h in h_grid {
            let rhs = &dp * r(h) + &xb * r(h) - &tbtb * r(h / (1.0 - h));
            let mut v = check("dbar_vs_del", k);
            v.h = Some(h);
            v.asserted = asserted;
            out.push(v.run(&dpp, &rhs, tol)?);

            let lh = blk(&ops.lap_h(h), k);
            let lin = &lh - &full * r(h);
            let rhs = (&xb * r(1.0 - h) - &tbtb) * r(h);
            let mut v = check("linear_h_bound", k);
            v.h = Some(h);
            v.asserted = asserted;
            out.push(v.run(&lin, &rhs, tol)?);

            let mut v = check("linear_h_constant", k);
            v.h = Some(h);
            v.asserted = asserted;
            v.constants = cs.clone();
            out.push(v.run(&lin, &(&id * r(-c * h)), tol)?);

            let quad = &lh - &full * r(h * h);
            let rhs = (&xb * r(1.0 - h) - &tbtb) * r(h * h);
            let mut v = check("quadratic_h_bound", k);
            v.h = Some(h);
            v.asserted = asserted;
            out.push(v.run(&quad, &rhs, tol)?);

            let mut v = check("quadratic_h_constant", k);
            v.h = Some(h);
            v.asserted = asserted;
            v.constants = cs.clone();
            out.push(v.run(&quad, &(&id * r(-c * h * h)), tol)?);
        }
    }
    Ok(out)
}
