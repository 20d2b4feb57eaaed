//! Adjoints, Laplacians, torsion operators and the rescaling relations.

use nalgebra::DMatrix;

use crate::complex_model::{wedge_operator, GradedOperator};
use crate::error::{Error, Result};
use crate::linalg::float::{
    generalized_eigenvalues, generalized_eigh, hermitian_eigenvalues, max_abs, op_norm, psd_kernel_ref,
};
use crate::metric_geometry::{check_h, Geometry};
use crate::scalar::C64;

/// Relative eigenvalue cutoff used for kernels of Laplacians.
pub const KERNEL_RTOL: f64 = 1e-9;

/// h-independent operators of a metric.
#[derive(Clone, Debug)]
pub struct Torsion {
    pub tau: GradedOperator,
    pub tau_bar: GradedOperator,
    pub tau_star: GradedOperator,
    pub tau_bar_star: GradedOperator,
    /// [τ, τ*]
    pub tau_tau: GradedOperator,
    /// [τ̄, τ̄*]
    pub taubar_taubar: GradedOperator,
    pub x_omega: GradedOperator,
    pub x_bar_omega: GradedOperator,
    /// Δ′_τ = [∂+τ, (∂+τ)*]
    pub lap_del_tau: GradedOperator,
    /// Δ″_τ̄ = [∂̄+τ̄, (∂̄+τ̄)*]
    pub lap_dbar_taubar: GradedOperator,
    /// [Λ, [Λ, (i/2)∂∂̄ω∧·]]
    pub ddbar_term: GradedOperator,
    pub del_omega: Vec<C64>,
    pub dbar_omega: Vec<C64>,
    pub ddbar_omega: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct OperatorSuite {
    pub h: f64,
    pub del: GradedOperator,
    pub dbar: GradedOperator,
    pub d: GradedOperator,
    pub d_h: GradedOperator,
    pub del_star: GradedOperator,
    pub dbar_star: GradedOperator,
    pub d_star: GradedOperator,
    pub d_h_star: GradedOperator,
    pub d_star_wh: GradedOperator,
    pub lap_del: GradedOperator,
    pub lap_dbar: GradedOperator,
    pub lap: GradedOperator,
    pub lap_h: GradedOperator,
    pub lap_wh: GradedOperator,
    pub lefschetz: GradedOperator,
    pub lambda: GradedOperator,
    pub torsion: Torsion,
    /// Projector onto ker Δ″.
    pub p_harm: GradedOperator,
    pub tilde: GradedOperator,
}

fn apply(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let x = nalgebra::DVector::from_column_slice(v);
    (m * x).iter().copied().collect()
}

pub fn torsion_operators(geom: &Geometry) -> Torsion {
    let b = geom.basis().clone();
    let c = &geom.complex;
    let (_, lam) = geom.lefschetz_pair();
    let omega = geom.omega_form();
    let del_omega = apply(&c.full_del(), &omega);
    let dbar_omega = apply(&c.full_dbar(), &omega);
    let ddbar_omega = apply(&c.full_del(), &dbar_omega);

    let del_w = GradedOperator::pure(b.clone(), wedge_operator(&b, &del_omega), 2, 1);
    let dbar_w = GradedOperator::pure(b.clone(), wedge_operator(&b, &dbar_omega), 1, 2);
    let half_i = C64::new(0.0, 0.5);
    let ddbar_w = GradedOperator::pure(b.clone(), wedge_operator(&b, &ddbar_omega), 2, 2).scale_c(half_i);

    let tau = lam.commutator(&del_w);
    let tau_bar = lam.commutator(&dbar_w);
    let tau_star = tau.adjoint();
    let tau_bar_star = tau_bar.adjoint();
    let tau_tau = tau.commutator(&tau_star);
    let taubar_taubar = tau_bar.commutator(&tau_bar_star);
    let x_omega = del_w.commutator(&del_w.adjoint());
    let x_bar_omega = dbar_w.commutator(&dbar_w.adjoint());
    let dt = c.del_op().plus(&tau);
    let lap_del_tau = dt.commutator(&dt.adjoint());
    let dbt = c.dbar_op().plus(&tau_bar);
    let lap_dbar_taubar = dbt.commutator(&dbt.adjoint());
    let ddbar_term = lam.commutator(&lam.commutator(&ddbar_w));
    Torsion {
        tau,
        tau_bar,
        tau_star,
        tau_bar_star,
        tau_tau,
        taubar_taubar,
        x_omega,
        x_bar_omega,
        lap_del_tau,
        lap_dbar_taubar,
        ddbar_term,
        del_omega,
        dbar_omega,
        ddbar_omega,
    }
}

/// Orthogonal projector onto ker of a bidegree-preserving PSD operator,
/// computed blockwise.
pub fn kernel_projector(op: &GradedOperator) -> GradedOperator {
    let b = op.basis.clone();
    let d = b.total_dim();
    let mut p = DMatrix::zeros(d, d);
    let reference = op.norm();
    for (pp, qq) in b.all_bidegrees() {
        let r = b.block_range(pp, qq);
        let blk = op.bidegree_block(pp, qq);
        let k = psd_kernel_ref(&blk, KERNEL_RTOL, reference);
        let proj = &k * k.adjoint();
        p.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&proj);
    }
    GradedOperator::pure(b, p, 0, 0)
}

impl OperatorSuite {
    pub fn build(geom: &Geometry, h: f64) -> Result<Self> {
        check_h(h)?;
        let c = &geom.complex;
        let del = c.del_op();
        let dbar = c.dbar_op();
        let d = c.d_op(1.0);
        let d_h = c.d_op(h);
        let del_star = del.adjoint();
        let dbar_star = dbar.adjoint();
        let d_star = d.adjoint();
        let d_h_star = d_h.adjoint();
        let d_star_wh = geom.rescaled(h)?.adjoint(&d);
        let lap_del = del.commutator(&del_star);
        let lap_dbar = dbar.commutator(&dbar_star);
        let lap = d.commutator(&d_star);
        let lap_h = d_h.commutator(&d_h_star);
        let lap_wh = d.commutator(&d_star_wh);
        let (lefschetz, lambda) = geom.lefschetz_pair();
        let torsion = torsion_operators(geom);
        let p_harm = kernel_projector(&lap_dbar);
        let tilde = del
            .compose(&p_harm)
            .compose(&del_star)
            .plus(&del_star.compose(&p_harm).compose(&del))
            .plus(&lap_dbar);
        Ok(OperatorSuite {
            h,
            del,
            dbar,
            d,
            d_h,
            del_star,
            dbar_star,
            d_star,
            d_h_star,
            d_star_wh,
            lap_del,
            lap_dbar,
            lap,
            lap_h,
            lap_wh,
            lefschetz,
            lambda,
            torsion,
            p_harm,
            tilde,
        })
    }

    /// Residual of Δ_h = h²Δ′ + Δ″ + h[∂,∂̄*] + h[∂̄,∂*].
    pub fn expansion_residual(&self) -> f64 {
        let h = self.h;
        let rhs = self
            .lap_del
            .scale(h * h)
            .plus(&self.lap_dbar)
            .plus(&self.del.commutator(&self.dbar_star).scale(h))
            .plus(&self.dbar.commutator(&self.del_star).scale(h));
        max_abs(&(&self.lap_h.matrix - &rhs.matrix))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BknReport {
    /// ‖Δ″ − Δ′_τ − [Λ,[Λ,(i/2)∂∂̄ω]] + X_ω‖ / max(‖Δ″‖, 1)
    pub bkn: f64,
    /// Same for the conjugate form Δ′ = Δ″_τ̄ + [Λ,[Λ,(i/2)∂∂̄ω]] − X̄_ω.
    pub bkn_conjugate: f64,
    /// ‖[∂,∂̄*] + [∂,τ̄*]‖ and ‖[∂,∂̄*] + [τ,∂̄*]‖, relative.
    pub comm_tau_bar: f64,
    pub comm_tau: f64,
    pub scale: f64,
}

impl BknReport {
    pub fn max(&self) -> f64 {
        self.bkn.max(self.bkn_conjugate).max(self.comm_tau_bar).max(self.comm_tau)
    }
}

pub fn verify_bkn(geom: &Geometry, tol: f64) -> Result<BknReport> {
    let s = OperatorSuite::build(geom, 1.0)?;
    let t = &s.torsion;
    let scale = op_norm(&s.lap_dbar.matrix).max(1.0);
    let rhs = t.lap_del_tau.plus(&t.ddbar_term).minus(&t.x_omega);
    let bkn = op_norm(&(&s.lap_dbar.matrix - &rhs.matrix)) / scale;
    let rhs_c = t.lap_dbar_taubar.plus(&t.ddbar_term).minus(&t.x_bar_omega);
    let bkn_conjugate = op_norm(&(&s.lap_del.matrix - &rhs_c.matrix)) / scale;
    let lhs = s.del.commutator(&s.dbar_star);
    let a = s.del.commutator(&t.tau_bar_star);
    let b = t.tau.commutator(&s.dbar_star);
    let comm_tau_bar = op_norm(&(&lhs.matrix + &a.matrix)) / scale;
    let comm_tau = op_norm(&(&lhs.matrix + &b.matrix)) / scale;
    let rep = BknReport { bkn, bkn_conjugate, comm_tau_bar, comm_tau, scale };
    if rep.max() > tol {
        return Err(Error::Convention(format!(
            "{}: BKN residual {:.3e}, conjugate {:.3e}, commutators {:.3e}/{:.3e} exceed {tol:.1e}",
            geom.complex.name, rep.bkn, rep.bkn_conjugate, rep.comm_tau_bar, rep.comm_tau
        )));
    }
    Ok(rep)
}

#[derive(Clone, Debug)]
pub struct RescalingReport {
    pub h: f64,
    /// ‖Δ_h − θ_h Δ_{ω_h} θ_h⁻¹‖ / max(‖Δ_h‖, 1)
    pub conjugation: f64,
    /// Per degree: max |λ_i(Δ_h) − λ_i(Δ_{ω_h})| / max(‖Δ_h‖, 1)
    pub spectra: Vec<f64>,
    /// Per degree: the same comparison between the generalized problem and θ_h conjugation.
    pub paths: Vec<f64>,
    /// Max relative residual of Δ_h(θ_h x) = λ θ_h x over eigenvectors x of Δ_{ω_h}.
    pub eigenvectors: f64,
    /// Per degree, number of eigenvalues of Δ_h below 1e3·eps·‖Δ_h‖.
    pub kernel_dims: Vec<usize>,
    /// ∂*_{ω_h} − h²∂* and ∂̄*_{ω_h} − ∂̄*.
    pub adjoint_formulas: f64,
}

impl RescalingReport {
    pub fn worst_spectrum(&self) -> f64 {
        self.spectra.iter().chain(&self.paths).fold(0.0f64, |a, &b| a.max(b))
    }
}

pub fn kernel_floor(norm: f64) -> f64 {
    1e3 * f64::EPSILON * norm.max(1.0)
}

pub fn verify_rescaling_relations(geom: &Geometry, h: f64) -> Result<RescalingReport> {
    let s = OperatorSuite::build(geom, h)?;
    let b = geom.basis().clone();
    let theta = geom.theta(h)?;
    let theta_inv = geom.theta(1.0 / h)?;
    let conj = theta.compose(&s.lap_wh).compose(&theta_inv);
    let norm = op_norm(&s.lap_h.matrix).max(1.0);
    let conjugation = max_abs(&(&s.lap_h.matrix - &conj.matrix)) / norm;
    let w = geom.rescaled(h)?.gram();
    let mut spectra = Vec::new();
    let mut paths = Vec::new();
    let mut kernel_dims = Vec::new();
    let mut eigenvectors = 0.0f64;
    for k in 0..=2 * b.n {
        let r = b.degree_range(k);
        let lh = s.lap_h.sub(r.clone(), r.clone());
        let ev_h = hermitian_eigenvalues(&lh);
        let wk = w.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let lw = s.lap_wh.sub(r.clone(), r.clone());
        let a = &wk * &lw;
        let ev_w = generalized_eigenvalues(&a, &wk)
            .ok_or_else(|| Error::Numeric(format!("ω_h Gram not positive definite at h={h}, k={k}")))?;
        let ev_t = hermitian_eigenvalues(&conj.sub(r.clone(), r.clone()));
        let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / norm;
        spectra.push(diff(&ev_h, &ev_w));
        paths.push(diff(&ev_w, &ev_t));
        let floor = kernel_floor(norm);
        kernel_dims.push(ev_h.iter().filter(|&&l| l.abs() <= floor).count());
        let (vals, vecs) = generalized_eigh(&a, &wk).expect("checked above");
        let th = theta.sub(r.clone(), r.clone());
        for (i, &lam) in vals.iter().enumerate() {
            let x = &th * vecs.column(i);
            let res = (&lh * &x - &x * C64::new(lam, 0.0)).norm() / (x.norm() * norm);
            eigenvectors = eigenvectors.max(res);
        }
    }
    let wh = geom.rescaled(h)?;
    let ds = wh.adjoint(&s.del);
    let dbs = wh.adjoint(&s.dbar);
    let adjoint_formulas = max_abs(&(&ds.matrix - &s.del_star.matrix * C64::new(h * h, 0.0)))
        .max(max_abs(&(&dbs.matrix - &s.dbar_star.matrix)));
    Ok(RescalingReport { h, conjugation, spectra, paths, eigenvectors, kernel_dims, adjoint_formulas })
}

/// ⟨⟨Δ_h u,u⟩⟩ − h²⟨⟨Δ′u,u⟩⟩ − ⟨⟨Δ″u,u⟩⟩ for a pure-type u (global index range of its bidegree).
pub fn pure_type_quadratic_residual(s: &OperatorSuite, u: &[C64]) -> f64 {
    let x = nalgebra::DVector::from_column_slice(u);
    let q = |m: &DMatrix<C64>| (x.adjoint() * m * &x)[(0, 0)];
    let lhs = q(&s.lap_h.matrix);
    let rhs = q(&s.lap_del.matrix) * (s.h * s.h) + q(&s.lap_dbar.matrix);
    (lhs - rhs).norm()
}
