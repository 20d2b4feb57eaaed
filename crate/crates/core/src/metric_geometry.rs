//! Hermitian metrics on the invariant model, the rescaled products ω_h, the
//! scaling θ_h, the Lefschetz pair and the Hodge star.
//!
//! The metric matrix g is read as the coefficient matrix of the fundamental
//! form, ω = i Σ g_{jk} ε^j∧ε̄^k.  With g = L Lᴴ (Cholesky) the coframe
//! η^a = Σ_j L_{ja} ε^j is unitary and ω = i Σ η^a∧η̄^a; every operator below
//! lives in the η-basis, where the pointwise product on Λ^{p,q} is the
//! standard one and invariant forms have total volume 1.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::complex_model::{
    exterior_derivatives, wedge_operator, wedge_sign, BigradedBasis, BigradedComplex, GradedOperator,
    InvariantComplexStructure, Shift, StructureTerm,
};
use crate::error::{Error, Result};
use crate::linalg::float::hermitian_eigenvalues;
use crate::scalar::{Coeff, C64};

#[derive(Clone, Debug)]
pub struct HermitianMetricModel {
    pub n: usize,
    pub g: DMatrix<C64>,
    /// C with η = C ε.
    pub coframe: DMatrix<C64>,
    /// C⁻¹, so ε = C⁻¹ η.
    pub inverse: DMatrix<C64>,
}

impl HermitianMetricModel {
    pub fn identity(n: usize) -> Self {
        let i = DMatrix::identity(n, n);
        HermitianMetricModel { n, g: i.clone(), coframe: i.clone(), inverse: i }
    }

    pub fn new(g: DMatrix<C64>) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n || n == 0 {
            return Err(Error::Metric(format!("metric must be square, got {}x{}", g.nrows(), g.ncols())));
        }
        let herm = (&g - g.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let scale = g.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if herm > 1e-12 * scale.max(1.0) {
            return Err(Error::Metric(format!("metric is not Hermitian (asymmetry {herm:.3e})")));
        }
        let ev = hermitian_eigenvalues(&g);
        let lo = ev[0];
        if lo <= 1e-14 * ev[n - 1].abs().max(1.0) {
            return Err(Error::Metric(format!("metric is not positive definite (smallest eigenvalue {lo:.6e})")));
        }
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Metric(format!("Cholesky failed (smallest eigenvalue {lo:.6e})")))?;
        let l = chol.l();
        let coframe = l.transpose();
        let inverse = coframe.clone().try_inverse().ok_or_else(|| Error::Metric("singular coframe change".into()))?;
        Ok(HermitianMetricModel { n, g, coframe, inverse })
    }

    pub fn is_identity(&self) -> bool {
        self.g == DMatrix::identity(self.n, self.n)
    }

    /// Structure constants of the same complex structure in the η-coframe.
    pub fn transform_structure(&self, s: &InvariantComplexStructure) -> InvariantComplexStructure {
        let n = s.n;
        let c = &self.coframe;
        let d = &self.inverse;
        // a2[j][b][c] (b<c) for ∂ε^j, b2[j][b][c] for ∂̄ε^j, in η-monomials
        let mut a2 = vec![DMatrix::<C64>::zeros(n, n); n];
        let mut b2 = vec![DMatrix::<C64>::zeros(n, n); n];
        for t in &s.partial {
            let (j, k, l) = (t.i - 1, t.j - 1, t.k - 1);
            for bb in 0..n {
                for cc in bb + 1..n {
                    a2[j][(bb, cc)] += t.coeff.value * (d[(k, bb)] * d[(l, cc)] - d[(k, cc)] * d[(l, bb)]);
                }
            }
        }
        for t in &s.dbar {
            let (j, k, l) = (t.i - 1, t.j - 1, t.k - 1);
            for bb in 0..n {
                for cc in 0..n {
                    b2[j][(bb, cc)] += t.coeff.value * d[(k, bb)] * d[(l, cc)].conj();
                }
            }
        }
        // Structurally zero constants come out as rounding noise; chop them
        // relative to the largest constant so sub-block ranks stay exact.
        let mut vals = vec![(Vec::new(), Vec::new()); n];
        let mut big = 0.0f64;
        for a in 0..n {
            let mut pa = DMatrix::<C64>::zeros(n, n);
            let mut pb = DMatrix::<C64>::zeros(n, n);
            for j in 0..n {
                pa += &a2[j] * c[(a, j)];
                pb += &b2[j] * c[(a, j)];
            }
            big = big.max(pa.iter().chain(pb.iter()).map(|v| v.norm()).fold(0.0, f64::max));
            vals[a] = (pa.iter().copied().collect::<Vec<_>>(), pb.iter().copied().collect::<Vec<_>>());
        }
        let chop = 1e-12 * big;
        let mut out = InvariantComplexStructure::new(&s.name, n);
        for a in 0..n {
            let pa_m = DMatrix::from_column_slice(n, n, &vals[a].0);
            let pb_m = DMatrix::from_column_slice(n, n, &vals[a].1);
            for bb in 0..n {
                for cc in 0..n {
                    let (pa, pb) = (pa_m[(bb, cc)], pb_m[(bb, cc)]);
                    let coeff = |v: C64| Coeff { exact: None, value: v };
                    if bb < cc && pa.norm() > chop {
                        out.partial.push(StructureTerm { i: a + 1, j: bb + 1, k: cc + 1, coeff: coeff(pa) });
                    }
                    if pb.norm() > chop {
                        out.dbar.push(StructureTerm { i: a + 1, j: bb + 1, k: cc + 1, coeff: coeff(pb) });
                    }
                }
            }
        }
        out
    }

    /// Orthonormal model: the complex in the η-basis.
    pub fn orthonormalize(&self, s: &InvariantComplexStructure) -> Result<Geometry> {
        if s.n != self.n {
            return Err(Error::Metric(format!("metric is {}x{} but the manifold has n = {}", self.n, self.n, s.n)));
        }
        let complex = if self.is_identity() {
            exterior_derivatives::<C64>(s)?
        } else {
            let mut c = exterior_derivatives::<C64>(&self.transform_structure(s))?;
            // Cancelling products leave ~1e-17 entries in blocks that vanish
            // identically (∂̄ on Λ^{0,2} for Iwasawa, say).
            let big = c.del.values().chain(c.dbar.values()).flat_map(|m| m.iter()).map(|v| v.norm()).fold(0.0, f64::max);
            for m in c.del.values_mut().chain(c.dbar.values_mut()) {
                m.apply(|v| if v.norm() <= 1e-12 * big { *v = C64::zero() });
            }
            c
        };
        Ok(Geometry { metric: self.clone(), complex })
    }
}

/// A complex together with the metric making its basis orthonormal.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub metric: HermitianMetricModel,
    pub complex: BigradedComplex<C64>,
}

impl Geometry {
    pub fn basis(&self) -> &Arc<BigradedBasis> {
        &self.complex.basis
    }

    pub fn n(&self) -> usize {
        self.complex.basis.n
    }

    /// ω = i Σ η^j∧η̄^j as a global coefficient vector.
    pub fn omega_form(&self) -> Vec<C64> {
        let b = self.basis();
        let n = b.n;
        let mut v = vec![C64::zero(); b.total_dim()];
        for j in 0..n {
            let mask = (1u16 << j) | (1u16 << (n + j));
            v[b.global_index(mask)] = C64::new(0.0, 1.0);
        }
        v
    }

    /// dV = ωⁿ/n! = iⁿ (−1)^{n(n−1)/2} η^{1..n}∧η̄^{1..n}: the coefficient.
    pub fn volume_coefficient(&self) -> C64 {
        let n = self.n();
        let ipow = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)][n % 4];
        let sign = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        ipow * sign
    }

    pub fn lefschetz_pair(&self) -> (GradedOperator, GradedOperator) {
        let b = self.basis().clone();
        let l = GradedOperator::pure(b.clone(), wedge_operator(&b, &self.omega_form()), 1, 1);
        let lam = l.adjoint();
        (l, lam)
    }

    /// ⋆: Λ^{p,q} → Λ^{n−q,n−p} with ⟨u,v⟩ dV = u ∧ ⋆v̄.
    pub fn hodge_star(&self) -> GradedOperator {
        let b = self.basis().clone();
        let n = b.n;
        let full: u16 = ((1u32 << (2 * n)) - 1) as u16;
        let vol = self.volume_coefficient();
        let d = b.total_dim();
        let mut m = DMatrix::zeros(d, d);
        for g in 0..d {
            let mono = b.mono(g);
            let (p, q) = (mono.p, mono.q);
            // u0 = η^J∧η̄^I, image monomial η^{J^c}∧η̄^{I^c}
            let low = mono.mask & ((1 << n) - 1);
            let high = mono.mask >> n;
            let u0 = high | (low << n);
            let target = full & !u0;
            let s = wedge_sign(u0, target).expect("complementary monomials");
            let pq_sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
            let c = vol * (pq_sign * s as f64);
            m[(b.global_index(target), g)] = c;
        }
        // ⋆ maps (p,q) to (n−q, n−p): mixed as a shift, degree k ↦ 2n−k
        GradedOperator::new(b, m, 0, Shift::Mixed)
    }

    /// θ_h u = h^p u.
    pub fn theta(&self, h: f64) -> Result<GradedOperator> {
        check_h(h)?;
        let b = self.basis().clone();
        let diag: Vec<C64> = b.monos().iter().map(|m| C64::new(h.powi(m.p as i32), 0.0)).collect();
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        Ok(GradedOperator::pure(b, m, 0, 0))
    }

    pub fn rescaled(&self, h: f64) -> Result<RescaledInnerProduct> {
        check_h(h)?;
        Ok(RescaledInnerProduct { n: self.n(), h, basis: self.basis().clone() })
    }
}

pub fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("scale h must be positive, got {h}")));
    }
    Ok(())
}

/// ⟨u,v⟩_{ω_h} = h^{2p}⟨u,v⟩_ω pointwise; globally ⟨⟨u,v⟩⟩_{ω_h} = h^{−2(n−p)}⟨⟨u,v⟩⟩_ω.
#[derive(Clone, Debug)]
pub struct RescaledInnerProduct {
    pub n: usize,
    pub h: f64,
    pub basis: Arc<BigradedBasis>,
}

fn herm(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

impl RescaledInnerProduct {
    pub fn pointwise(&self, u: &[C64], v: &[C64], p: usize) -> C64 {
        herm(u, v) * self.h.powi(2 * p as i32)
    }

    pub fn global(&self, u: &[C64], v: &[C64], p: usize) -> C64 {
        herm(u, v) * self.h.powi(-2 * (self.n - p) as i32)
    }

    /// Weight of the global product on a monomial of holomorphic degree p.
    pub fn weight(&self, p: usize) -> f64 {
        self.h.powi(-2 * (self.n as i32 - p as i32))
    }

    /// Diagonal Gram of the global ω_h product on the full algebra.
    pub fn gram(&self) -> DMatrix<C64> {
        let diag: Vec<C64> = self.basis.monos().iter().map(|m| C64::new(self.weight(m.p), 0.0)).collect();
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
    }

    /// Adjoint of A for the ω_h product: W⁻¹ Aᴴ W.
    pub fn adjoint(&self, a: &GradedOperator) -> GradedOperator {
        let w = self.gram();
        let winv = w.map(|z| if z == C64::zero() { z } else { 1.0 / z });
        let adj = a.adjoint();
        GradedOperator { matrix: &winv * &adj.matrix * &w, ..adj }
    }
}
