use frolicher::catalog::{self, catalog, random_metric};
use frolicher::complex_model::{exterior_derivatives, wedge_operator, BigradedBasis, Shift};
use frolicher::laplacians::{
    kernel_projector, pure_type_quadratic_residual, verify_bkn, verify_rescaling_relations, OperatorSuite,
};
use frolicher::linalg::float::{hermitian_eigenvalues, max_abs, op_norm};
use frolicher::metric_geometry::{Geometry, HermitianMetricModel};
use frolicher::scalar::C64;
use frolicher::Error;
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn identity_geom(s: &frolicher::complex_model::InvariantComplexStructure) -> Geometry {
    HermitianMetricModel::identity(s.n).orthonormalize(s).unwrap()
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Matrix of k×k minors det(m[I,K]) over lexicographic index sets.
fn compound(m: &DMatrix<C64>, k: usize) -> DMatrix<C64> {
    let n = m.nrows();
    let sets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    DMatrix::from_fn(sets.len(), sets.len(), |a, b| {
        if k == 0 {
            return c(1.0);
        }
        DMatrix::from_fn(k, k, |i, j| m[(sets[a][i], sets[b][j])]).determinant()
    })
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |i, j| {
        a[(i / b.nrows(), j / b.ncols())] * b[(i % b.nrows(), j % b.ncols())]
    })
}

/// P with η^I∧η̄^J = Σ P[(I,J),(K,L)] ε^K∧ε̄^L.
fn change_of_basis(coframe: &DMatrix<C64>, p: usize, q: usize) -> DMatrix<C64> {
    kron(&compound(coframe, p), &compound(coframe, q).map(|z| z.conj()))
}

#[test]
fn orthonormalize_identity_and_diagonal() {
    let g = HermitianMetricModel::identity(3);
    assert_eq!(g.coframe, DMatrix::identity(3, 3));
    let d = HermitianMetricModel::new(DMatrix::from_diagonal(&DVector::from_vec(vec![c(4.0), c(1.0)]))).unwrap();
    // η¹ = 2ε¹, η² = ε²
    assert!((d.coframe[(0, 0)] - c(2.0)).norm() < 1e-15);
    assert!((d.coframe[(1, 1)] - c(1.0)).norm() < 1e-15);
    // Kodaira–Thurston: ∂̄ε² = ε¹∧ε̄¹ becomes ∂̄η² = (1/4) η¹∧η̄¹
    let geom = d.orthonormalize(&catalog::kodaira_thurston()).unwrap();
    let blk = geom.complex.dbar_block(1, 0);
    assert!((blk[(0, 1)] - c(0.25)).norm() < 1e-15);
    assert!((blk.norm() - 0.25).abs() < 1e-15);
}

#[test]
fn non_positive_metric_reports_smallest_eigenvalue() {
    let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(1.0)]);
    match HermitianMetricModel::new(m) {
        Err(Error::Metric(msg)) => assert!(msg.contains("-1.0"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn minor_determinant_gram_oracle() {
    for seed in 0..5 {
        for n in 2..=3 {
            let g = random_metric(n, seed);
            // covector product induced by ω = i Σ g_{jk} ε^j∧ε̄^k
            let g1 = g.g.clone().try_inverse().unwrap().transpose();
            for (p, q) in [(1, 1), (1, 0), (0, 2), (2, 1)] {
                if p > n || q > n {
                    continue;
                }
                let gram_eps = kron(&compound(&g1, p), &compound(&g1.map(|z| z.conj()), q));
                let pm = change_of_basis(&g.coframe, p, q);
                let gram_eta = &pm * gram_eps * pm.adjoint();
                let dim = gram_eta.nrows();
                assert!((gram_eta - DMatrix::<C64>::identity(dim, dim)).norm() < 1e-12, "seed {seed} n {n} ({p},{q})");
            }
        }
    }
}

#[test]
fn transformed_blocks_are_conjugated_differentials() {
    for s in [catalog::iwasawa(), catalog::calabi_eckmann(), catalog::nilmanifold_e3()] {
        let g = random_metric(3, 11);
        let eps = exterior_derivatives::<C64>(&s).unwrap();
        let eta = g.orthonormalize(&s).unwrap().complex;
        for (p, q) in [(1, 0), (0, 1), (1, 1), (2, 0)] {
            let src = change_of_basis(&g.coframe, p, q);
            for (blk_e, blk_h, tp, tq) in [
                (eps.del_block(p, q), eta.del_block(p, q), p + 1, q),
                (eps.dbar_block(p, q), eta.dbar_block(p, q), p, q + 1),
            ] {
                let tgt = change_of_basis(&g.coframe, tp, tq);
                let expect = tgt.transpose().try_inverse().unwrap() * blk_e * src.transpose();
                assert!((expect - blk_h).norm() < 1e-12, "{} ({p},{q})", s.name);
            }
        }
    }
}

#[test]
fn rescaled_inner_product() {
    let geom = identity_geom(&catalog::torus(3));
    let r = geom.rescaled(0.5).unwrap();
    let u = vec![C64::new(1.0, 2.0), C64::new(0.0, -1.0)];
    let v = vec![C64::new(0.5, 0.0), C64::new(3.0, 1.0)];
    let base: C64 = u.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
    assert!((r.pointwise(&u, &v, 1) - base * 0.25).norm() < 1e-15);
    assert!((r.global(&u, &v, 3) - base).norm() < 1e-15);
    assert!((r.global(&u, &v, 1) - base * 16.0).norm() < 1e-12);
    let one = geom.rescaled(1.0).unwrap();
    assert_eq!(one.pointwise(&u, &v, 2), base);
    assert!(geom.rescaled(0.0).is_err());
    assert!(geom.rescaled(-1.0).is_err());
}

#[test]
fn theta_scaling() {
    let geom = identity_geom(&catalog::iwasawa());
    let t1 = geom.theta(1.0).unwrap();
    assert_eq!(t1.matrix, DMatrix::identity(64, 64));
    let t = geom.theta(0.5).unwrap();
    let blk = t.bidegree_block(1, 2);
    assert_eq!(blk, DMatrix::identity(9, 9) * c(0.5));
    let tt = geom.theta(0.5).unwrap().compose(&geom.theta(0.3).unwrap());
    assert!(max_abs(&(&tt.matrix - &geom.theta(0.15).unwrap().matrix)) < 1e-15);
    assert_eq!(t.matrix, t.matrix.adjoint());
    // d_h = θ_h d θ_h⁻¹ on degree-1 forms
    for h in [0.5, 0.125] {
        let lhs = geom.complex.d_op(h);
        let rhs = geom.theta(h).unwrap().compose(&geom.complex.d_op(1.0)).compose(&geom.theta(1.0 / h).unwrap());
        assert!(max_abs(&(lhs.degree_block(1) - rhs.degree_block(1))) < 1e-15);
        assert!(max_abs(&(lhs.matrix - rhs.matrix)) < 1e-14);
    }
    assert!(geom.theta(0.0).is_err());
}

#[test]
fn lefschetz_pair() {
    let g1 = identity_geom(&catalog::torus(1));
    let (l, lam) = g1.lefschetz_pair();
    let b = g1.basis();
    let one = b.global_index(0);
    let top = b.global_index(0b11);
    assert_eq!(l.matrix[(top, one)], C64::new(0.0, 1.0));
    // Λ(ω) = 1
    let omega = DVector::from_vec(g1.omega_form());
    let lw = &lam.matrix * omega;
    assert!((lw[one] - c(1.0)).norm() < 1e-15);
    assert_eq!(l.shift, Shift::Pure(1, 1));
    assert_eq!(lam.shift, Shift::Pure(-1, -1));

    for s in [catalog::torus(2), catalog::torus(3), catalog::iwasawa()] {
        for geom in [identity_geom(&s), random_metric(s.n, 3).orthonormalize(&s).unwrap()] {
            let (l, lam) = geom.lefschetz_pair();
            let comm = l.commutator(&lam);
            let b = geom.basis();
            for k in 0..=2 * b.n {
                let r = b.degree_range(k);
                let blk = comm.sub(r.clone(), r.clone());
                let expect = DMatrix::<C64>::identity(r.len(), r.len()) * c(k as f64 - b.n as f64);
                assert!(max_abs(&(blk - expect)) < 1e-13);
            }
        }
    }
    let g3 = identity_geom(&catalog::torus(3));
    let (l, lam) = g3.lefschetz_pair();
    let ll = lam.compose(&l).bidegree_block(0, 0);
    assert!((ll[(0, 0)] - c(3.0)).norm() < 1e-14);
}

#[test]
fn hodge_star_n1() {
    let g = identity_geom(&catalog::torus(1));
    let star = g.hodge_star();
    let b = g.basis();
    let one = b.global_index(0);
    let top = b.global_index(0b11);
    // ⋆1 = ω = i ε¹∧ε̄¹ and ⋆ω = 1
    assert_eq!(star.matrix[(top, one)], C64::new(0.0, 1.0));
    let omega = DVector::from_vec(g.omega_form());
    let so = &star.matrix * omega;
    assert!((so[one] - c(1.0)).norm() < 1e-15);
}

/// u ∧ ⋆v̄ = ⟨u,v⟩ dV on random forms of complementary type.
fn check_star_definition(geom: &Geometry, rng: &mut ChaCha8Rng) {
    let b = geom.basis().clone();
    let star = geom.hodge_star();
    let conj = b.conj_matrix();
    let top = b.global_index(((1u32 << (2 * b.n)) - 1) as u16);
    let vol = geom.volume_coefficient();
    for (p, q) in b.all_bidegrees() {
        let r = b.block_range(p, q);
        let mut u = DVector::<C64>::zeros(b.total_dim());
        let mut v = DVector::<C64>::zeros(b.total_dim());
        for g in r.clone() {
            u[g] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            v[g] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let vbar = &conj * v.map(|z| z.conj());
        let sv = &star.matrix * vbar;
        let wedge = wedge_operator(&b, u.as_slice()) * sv;
        let inner: C64 = u.iter().zip(v.iter()).map(|(a, b)| a * b.conj()).sum();
        for (g, z) in wedge.iter().enumerate() {
            let expect = if g == top { inner * vol } else { c(0.0) };
            assert!((z - expect).norm() < 1e-13, "({p},{q})");
        }
    }
}

#[test]
fn hodge_star_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in catalog() {
        for geom in [identity_geom(&s), random_metric(s.n, 7).orthonormalize(&s).unwrap()] {
            let b: &BigradedBasis = geom.basis();
            let star = geom.hodge_star();
            let ss = star.compose(&star);
            for k in 0..=2 * b.n {
                let r = b.degree_range(k);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let expect = DMatrix::<C64>::identity(r.len(), r.len()) * c(sign);
                assert!(max_abs(&(ss.sub(r.clone(), r.clone()) - expect)) < 1e-14);
            }
            // unitary and maps (p,q) to (n−q,n−p)
            let d = b.total_dim();
            assert!(max_abs(&(star.matrix.adjoint() * &star.matrix - DMatrix::<C64>::identity(d, d))) < 1e-14);
            for (row, mr) in b.monos().iter().enumerate() {
                for (col, mc) in b.monos().iter().enumerate() {
                    if star.matrix[(row, col)].norm() > 0.0 {
                        assert_eq!((mr.p, mr.q), (b.n - mc.q, b.n - mc.p));
                    }
                }
            }
            check_star_definition(&geom, &mut rng);
            // ∂* = −⋆∂̄⋆ and d_h* = −⋆ (h∂̄ + ∂) ⋆
            let s1 = OperatorSuite::build(&geom, 0.3).unwrap();
            let rhs = star.compose(&s1.dbar).compose(&star).scale(-1.0);
            assert!(max_abs(&(&s1.del_star.matrix - &rhs.matrix)) < 1e-12, "{}", s.name);
            let dbar_h = s1.dbar.scale(0.3).plus(&s1.del);
            let rhs = star.compose(&dbar_h).compose(&star).scale(-1.0);
            assert!(max_abs(&(&s1.d_h_star.matrix - &rhs.matrix)) < 1e-12, "{}", s.name);
        }
    }
}

#[test]
fn laplacian_examples() {
    let iw = identity_geom(&catalog::iwasawa());
    let s = OperatorSuite::build(&iw, 1.0).unwrap();
    let ev = hermitian_eigenvalues(&s.lap_dbar.bidegree_block(0, 1));
    assert!((ev[0]).abs() < 1e-14 && (ev[1]).abs() < 1e-14 && (ev[2] - 1.0).abs() < 1e-14);
    assert!(max_abs(&(&s.lap_h.matrix - &s.lap.matrix)) < 1e-14);

    let t = identity_geom(&catalog::torus(2));
    for h in [1.0, 0.5, 0.01] {
        let s = OperatorSuite::build(&t, h).unwrap();
        assert_eq!(max_abs(&s.lap_h.matrix), 0.0);
        assert_eq!(s.torsion.tau.max_abs(), 0.0);
    }
    assert!(OperatorSuite::build(&t, 0.0).is_err());
}

#[test]
fn suite_invariants_on_catalog() {
    for s in catalog() {
        for geom in [identity_geom(&s), random_metric(s.n, 21).orthonormalize(&s).unwrap()] {
            for h in [1.0, 0.5, 0.1] {
                let su = OperatorSuite::build(&geom, h).unwrap();
                let norm = su.lap_h.norm().max(1.0);
                assert!(su.expansion_residual() <= 1e-12 * norm, "{} h={h}", s.name);
                for op in [&su.lap_del, &su.lap_dbar, &su.lap, &su.lap_h, &su.tilde, &su.torsion.tau_tau] {
                    assert!(max_abs(&(&op.matrix - op.matrix.adjoint())) < 1e-12);
                    assert!(hermitian_eigenvalues(&op.matrix)[0] >= -1e-12 * op.norm().max(1.0));
                    assert!(op.shift_violation() < 1e-13);
                }
                assert_eq!(su.lap_del.shift, Shift::Pure(0, 0));
                assert_eq!(su.lap_h.shift, Shift::Mixed);
                assert_eq!(su.lap_h.degree, 0);
                assert!(su.lap_h.shift_violation() < 1e-13);
                assert!(su.torsion.tau.shift_violation() < 1e-13);
                assert_eq!(su.torsion.tau.shift, Shift::Pure(1, 0));
                let bracket = su.torsion.tau.commutator(&su.dbar_star);
                assert_eq!(bracket.shift, Shift::Pure(1, -1));
                // Δ_{ω_h} is self-adjoint for the ω_h product: W Δ_{ω_h} Hermitian
                let w = geom.rescaled(h).unwrap().gram();
                let wl = &w * &su.lap_wh.matrix;
                assert!(max_abs(&(&wl - wl.adjoint())) <= 1e-12 * op_norm(&wl).max(1.0));
                // conjugation symmetry τ̄ = conj(τ)
                let ct = su.torsion.tau.conjugate();
                assert!(max_abs(&(&ct.matrix - &su.torsion.tau_bar.matrix)) < 1e-13);
            }
        }
    }
}

#[test]
fn iwasawa_torsion_is_nonzero() {
    let s = OperatorSuite::build(&identity_geom(&catalog::iwasawa()), 1.0).unwrap();
    assert!(s.torsion.tau.max_abs() > 0.1);
    let b = s.torsion.tau.basis.clone();
    let r = b.degree_range(1);
    let ev = hermitian_eigenvalues(&s.torsion.tau_tau.sub(r.clone(), r));
    assert!(*ev.last().unwrap() > 0.1);
}

#[test]
fn bkn_on_catalog_and_random_metrics() {
    for s in catalog() {
        verify_bkn(&identity_geom(&s), 1e-10).unwrap();
        for seed in 0..5 {
            let geom = random_metric(s.n, 100 + seed).orthonormalize(&s).unwrap();
            let r = verify_bkn(&geom, 1e-10).unwrap();
            assert!(r.max() <= 1e-10);
        }
    }
}

#[test]
fn bkn_anchor_detects_wrong_normalization() {
    // doubling the ∂∂̄ω term must leave an O(1) residual where ∂∂̄ω ≠ 0
    let geom = identity_geom(&catalog::iwasawa());
    let s = OperatorSuite::build(&geom, 1.0).unwrap();
    let t = &s.torsion;
    let wrong = t.lap_del_tau.plus(&t.ddbar_term.scale(2.0)).minus(&t.x_omega);
    let res = op_norm(&(&s.lap_dbar.matrix - &wrong.matrix)) / op_norm(&s.lap_dbar.matrix);
    assert!(res > 0.1, "{res}");
}

#[test]
fn tilde_laplacian() {
    let t = identity_geom(&catalog::torus(2));
    let s = OperatorSuite::build(&t, 1.0).unwrap();
    assert_eq!(max_abs(&s.tilde.matrix), 0.0);
    assert!(max_abs(&(&s.p_harm.matrix - DMatrix::<C64>::identity(16, 16))) < 1e-14);

    for sname in catalog() {
        let geom = identity_geom(&sname);
        let su = OperatorSuite::build(&geom, 1.0).unwrap();
        let p = &su.p_harm.matrix;
        assert!(max_abs(&(p * p - p)) < 1e-12);
        assert!(max_abs(&(p - p.adjoint())) < 1e-12);
        // kernel characterization: ker Δ̃ = ker(p″∂) ∩ ker(p″∂*) ∩ ker ∂̄ ∩ ker ∂̄*
        let stack = |ops: &[&DMatrix<C64>]| {
            let rows: usize = ops.iter().map(|m| m.nrows()).sum();
            let mut out = DMatrix::zeros(rows, ops[0].ncols());
            let mut at = 0;
            for m in ops {
                out.view_mut((at, 0), (m.nrows(), m.ncols())).copy_from(m);
                at += m.nrows();
            }
            out
        };
        let a = p * &su.del.matrix;
        let bm = p * &su.del_star.matrix;
        let big = stack(&[&a, &bm, &su.dbar.matrix, &su.dbar_star.matrix]);
        let dim = big.ncols();
        let ker_big = dim - frolicher::linalg::float::rank(&big);
        let ker_tilde = dim - frolicher::linalg::float::rank(&su.tilde.matrix);
        assert_eq!(ker_big, ker_tilde, "{}", sname.name);
    }
    let geom = identity_geom(&catalog::iwasawa());
    let su = OperatorSuite::build(&geom, 1.0).unwrap();
    let blk = su.tilde.bidegree_block(1, 0);
    assert_eq!(3 - frolicher::linalg::float::rank(&blk), 2);
    let kp = kernel_projector(&su.lap_dbar);
    assert_eq!(kp.matrix, su.p_harm.matrix);
}

#[test]
fn rescaling_relations() {
    for s in catalog() {
        let geom = identity_geom(&s);
        let betti: Vec<usize> = {
            let e = exterior_derivatives::<frolicher::scalar::GaussRat>(&s).unwrap();
            (0..=2 * s.n).map(|k| e.betti(k)).collect()
        };
        for h in [1.0, 0.5, 0.125, 1.0 / 64.0] {
            let r = verify_rescaling_relations(&geom, h).unwrap();
            assert!(r.conjugation <= 1e-11, "{} h={h} {}", s.name, r.conjugation);
            assert!(r.worst_spectrum() <= 1e-9, "{} h={h} {:?}", s.name, r.spectra);
            assert!(r.eigenvectors <= 1e-9, "{} h={h} {}", s.name, r.eigenvectors);
            assert!(r.adjoint_formulas <= 1e-12);
            assert_eq!(r.kernel_dims, betti, "{} h={h}", s.name);
        }
    }
}

#[test]
fn pure_type_quadratic_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for s in [catalog::iwasawa(), catalog::calabi_eckmann(), catalog::kodaira_thurston()] {
        let geom = random_metric(s.n, 4).orthonormalize(&s).unwrap();
        let b = geom.basis().clone();
        for h in [0.5, 0.1] {
            let su = OperatorSuite::build(&geom, h).unwrap();
            for (p, q) in b.all_bidegrees() {
                let mut u = vec![c(0.0); b.total_dim()];
                for g in b.block_range(p, q) {
                    u[g] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
                assert!(pure_type_quadratic_residual(&su, &u) < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn prop_bkn_and_sl2_on_random_metrics(seed in 0u64..10_000, which in 0usize..8) {
        let s = catalog()[which].clone();
        let geom = random_metric(s.n, seed).orthonormalize(&s).unwrap();
        prop_assert!(verify_bkn(&geom, 1e-10).is_ok());
        let (l, lam) = geom.lefschetz_pair();
        let comm = l.commutator(&lam);
        let b = geom.basis();
        for k in 0..=2 * b.n {
            let r = b.degree_range(k);
            let expect = DMatrix::<C64>::identity(r.len(), r.len()) * c(k as f64 - b.n as f64);
            prop_assert!(max_abs(&(comm.sub(r.clone(), r.clone()) - expect)) < 1e-12);
        }
    }

    #[test]
    fn prop_rescaling_conjugation(seed in 0u64..10_000, e in 0u32..7) {
        let s = catalog::iwasawa();
        let h = 0.5f64.powi(e as i32);
        let geom = random_metric(3, seed).orthonormalize(&s).unwrap();
        let r = verify_rescaling_relations(&geom, h).unwrap();
        prop_assert!(r.conjugation <= 1e-11);
        prop_assert!(r.worst_spectrum() <= 1e-9);
    }
}
