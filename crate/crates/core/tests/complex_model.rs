use frolicher::catalog::{self, catalog, load_manifold, parse_manifold};
use frolicher::complex_model::{binomial, build_basis, exterior_derivatives, wedge_sign, InvariantComplexStructure};
use frolicher::scalar::{gauss, Coeff, Field, GaussRat, C64};
use frolicher::Error;
use nalgebra::DMatrix;
use num_traits::Zero;

fn q(v: i64) -> GaussRat {
    gauss((v, 1), (0, 1))
}

#[test]
fn basis_dimensions() {
    let b1 = build_basis(1).unwrap();
    assert_eq!(b1.degree_dim(1), 2);
    assert_eq!(b1.dim(1, 0), 1);
    assert_eq!(b1.dim(0, 1), 1);
    let labels: Vec<String> = b1.degree_range(1).map(|g| b1.mono(g).label()).collect();
    assert_eq!(labels, vec!["E1", "e1"]);

    let b3 = build_basis(3).unwrap();
    assert_eq!(b3.dim(1, 1), 9);
    assert_eq!(b3.degree_dim(3), 20);
    for n in 1..=4 {
        let b = build_basis(n).unwrap();
        assert_eq!(b.total_dim(), 1 << (2 * n));
        for k in 0..=2 * n {
            assert_eq!(b.degree_dim(k), binomial(2 * n, k));
        }
        for (p, q) in b.all_bidegrees() {
            assert_eq!(b.dim(p, q), binomial(n, p) * binomial(n, q));
        }
    }
    assert!(matches!(build_basis(0), Err(Error::Config(_))));
    assert!(matches!(build_basis(5), Err(Error::Config(_))));
}

#[test]
fn lexicographic_order_within_a_block() {
    let b = build_basis(3).unwrap();
    let pairs: Vec<(Vec<usize>, Vec<usize>)> =
        b.block_range(1, 1).map(|g| (b.mono(g).i.clone(), b.mono(g).j.clone())).collect();
    let mut sorted = pairs.clone();
    sorted.sort();
    assert_eq!(pairs, sorted);
}

#[test]
fn wedge_signs() {
    // e1 ∧ e2 canonical, e2 ∧ e1 = −e1∧e2
    assert_eq!(wedge_sign(0b01, 0b10), Some(1));
    assert_eq!(wedge_sign(0b10, 0b01), Some(-1));
    assert_eq!(wedge_sign(0b01, 0b01), None);
    // (e2∧e3) ∧ e1 = e1∧e2∧e3 (two transpositions)
    assert_eq!(wedge_sign(0b110, 0b001), Some(1));
}

#[test]
fn torus_differentials_vanish() {
    for n in 1..=3 {
        let c = exterior_derivatives::<GaussRat>(&catalog::torus(n)).unwrap();
        for m in c.del.values().chain(c.dbar.values()) {
            assert!(m.iter().all(|x| x.is_zero()));
        }
        for k in 0..=2 * n {
            assert!(c.assemble_total(k, None).unwrap().iter().all(|x| x.is_zero()));
        }
    }
}

#[test]
fn iwasawa_dbar_on_01_forms() {
    let c = exterior_derivatives::<GaussRat>(&catalog::iwasawa()).unwrap();
    let b = &c.basis;
    let m = c.dbar_block(0, 1);
    // (0,1) basis: E1, E2, E3 ; (0,2) basis: E1E2, E1E3, E2E3
    let src: Vec<String> = b.block_range(0, 1).map(|g| b.mono(g).label()).collect();
    let tgt: Vec<String> = b.block_range(0, 2).map(|g| b.mono(g).label()).collect();
    assert_eq!(src, vec!["E1", "E2", "E3"]);
    assert_eq!(tgt, vec!["E1E2", "E1E3", "E2E3"]);
    let mut expected = DMatrix::from_element(3, 3, q(0));
    expected[(0, 2)] = q(-1);
    assert_eq!(m, &expected);
    // ∂ on (1,0): e3 ↦ −e1e2
    let d = c.del_block(1, 0);
    let mut expected = DMatrix::from_element(3, 3, q(0));
    expected[(0, 2)] = q(-1);
    assert_eq!(d, &expected);
}

#[test]
fn kodaira_thurston_read_off() {
    let c = exterior_derivatives::<GaussRat>(&catalog::kodaira_thurston()).unwrap();
    let b = &c.basis;
    assert!(c.del_block(1, 0).iter().all(|x| x.is_zero()));
    let m = c.dbar_block(1, 0);
    // (1,1) basis e1E1, e1E2, e2E1, e2E2
    let tgt: Vec<String> = b.block_range(1, 1).map(|g| b.mono(g).label()).collect();
    assert_eq!(tgt, vec!["e1E1", "e1E2", "e2E1", "e2E2"]);
    let mut expected = DMatrix::from_element(4, 2, q(0));
    expected[(0, 1)] = q(1);
    assert_eq!(m, &expected);
    // ∂ε̄² = conj(∂̄ε²) = ε̄¹∧ε¹ = −ε¹∧ε̄¹
    let m = c.del_block(0, 1);
    let mut expected = DMatrix::from_element(4, 2, q(0));
    expected[(0, 1)] = q(-1);
    assert_eq!(m, &expected);
}

#[test]
fn catalog_satisfies_double_complex_axioms_exactly() {
    let cat = catalog();
    assert!(cat.len() >= 6);
    for s in cat {
        let s = s.validated().unwrap();
        assert!(s.is_exact(), "{}", s.name);
        let c = exterior_derivatives::<GaussRat>(&s).unwrap();
        let r = c.verify_complex_identities(0.0).unwrap();
        assert!(r.exact_zero, "{}", s.name);
        assert_eq!((r.del_squared, r.dbar_squared, r.anticommutator), (0.0, 0.0, 0.0));
        let f = exterior_derivatives::<C64>(&s).unwrap();
        assert!(f.conjugation_residual() == 0.0, "{}", s.name);
    }
}

#[test]
fn corrupted_constant_names_block() {
    let bad = catalog::iwasawa().with_partial(1, 1, 3, Coeff::real(1, 1));
    let c = exterior_derivatives::<GaussRat>(&bad).unwrap();
    match c.verify_complex_identities(0.0) {
        Err(Error::ModelInvalid(msg)) => assert!(msg.contains("(0,1)->(0,3)"), "{msg}"),
        other => panic!("expected model error, got {other:?}"),
    }
    let f = exterior_derivatives::<C64>(&bad).unwrap();
    assert!(f.verify_complex_identities(1e-12).is_err());
}

#[test]
fn iwasawa_total_degree_one() {
    let c = exterior_derivatives::<GaussRat>(&catalog::iwasawa()).unwrap();
    let d1 = c.assemble_total(1, None).unwrap();
    assert_eq!(GaussRat::rank(&d1), 2);
    let b = &c.basis;
    let half = gauss((1, 2), (0, 1));
    let dh = c.assemble_total(1, Some(half.clone())).unwrap();
    let col = |label: &str| b.degree_range(1).position(|g| b.mono(g).label() == label).unwrap();
    let row = |label: &str| b.degree_range(2).position(|g| b.mono(g).label() == label).unwrap();
    assert_eq!(dh[(row("e1e2"), col("e3"))], -half);
    assert_eq!(dh[(row("E1E2"), col("E3"))], q(-1));
    let nonzero = dh.iter().filter(|x| !x.is_zero()).count();
    assert_eq!(nonzero, 2);
    assert!(c.assemble_total(7, None).is_err());
}

#[test]
fn float_and_exact_ranks_agree() {
    for s in catalog() {
        let e = exterior_derivatives::<GaussRat>(&s).unwrap();
        let f = exterior_derivatives::<C64>(&s).unwrap();
        for k in 0..=2 * s.n {
            let re = GaussRat::rank(&e.assemble_total(k, None).unwrap());
            let rf = C64::rank(&f.assemble_total(k, None).unwrap());
            assert_eq!(re, rf, "{} k={k}", s.name);
        }
    }
}

#[test]
fn assemble_total_is_linear_in_h() {
    let c = exterior_derivatives::<C64>(&catalog::calabi_eckmann()).unwrap();
    for k in 0..6 {
        let d0 = c.assemble_total(k, Some(C64::zero())).unwrap();
        let d1 = c.assemble_total(k, None).unwrap();
        let h = C64::new(0.37, 0.0);
        let dh = c.assemble_total(k, Some(h)).unwrap();
        let expect = &d0 + (&d1 - &d0) * h;
        assert!((dh - expect).norm() < 1e-14);
    }
}

#[test]
fn load_by_name_and_file() {
    let (s, g) = load_manifold("torus2").unwrap();
    assert_eq!(s.n, 2);
    assert!(s.partial.is_empty() && s.dbar.is_empty());
    assert!(g.is_identity());
    let (s, _) = load_manifold("iwasawa").unwrap();
    assert_eq!(s.n, 3);
    assert_eq!(s.summary(), vec!["A[3][(1,2)] = -1".to_string()]);
    assert!(matches!(load_manifold("no_such_thing"), Err(Error::UnknownManifold(_))));

    let text = r#"{"name":"kt","n":2,"partial":[],"dbar":[{"i":2,"j":1,"k":1,"re":1,"im":0}]}"#;
    let (s, _) = parse_manifold(text).unwrap();
    let c = exterior_derivatives::<GaussRat>(&s).unwrap();
    let kt = exterior_derivatives::<GaussRat>(&catalog::kodaira_thurston()).unwrap();
    assert_eq!(c.dbar, kt.dbar);
    assert_eq!(c.del, kt.del);
}

#[test]
fn schema_errors_carry_field_paths() {
    let bad = r#"{"name":"x","n":2,"dbar":[{"i":3,"j":1,"k":1,"re":1,"im":0}]}"#;
    let err = parse_manifold(bad).unwrap_err().to_string();
    assert!(err.contains("dbar[0].i"), "{err}");
    let bad = r#"{"name":"x","n":2,"partial":[{"i":1,"j":1,"k":2,"re":"1/0","im":0}]}"#;
    let err = parse_manifold(bad).unwrap_err().to_string();
    assert!(err.contains("$.partial[0].re"), "{err}");
    let bad = r#"{"n":2}"#;
    assert!(parse_manifold(bad).unwrap_err().to_string().contains("$.name"));
    let bad = r#"{"name":"x","n":2,"metric":[[[1,0],[0,0]],[[0,0],[-1,0]]]}"#;
    assert!(matches!(parse_manifold(bad), Err(Error::Metric(_))));
}

#[test]
fn fractions_and_floats() {
    let text = r#"{"name":"ce","n":3,
        "partial":[{"i":1,"j":1,"k":3,"re":0,"im":"-1/2"},{"i":2,"j":2,"k":3,"re":"-1/2","im":0}],
        "dbar":[{"i":1,"j":1,"k":3,"re":0,"im":"-1/2"},{"i":2,"j":2,"k":3,"re":"1/2","im":0},
                {"i":3,"j":1,"k":1,"re":0,"im":"1/2"},{"i":3,"j":2,"k":2,"re":"-1/2","im":0}]}"#;
    let (s, _) = parse_manifold(text).unwrap();
    assert!(s.is_exact());
    let c = exterior_derivatives::<GaussRat>(&s).unwrap();
    assert_eq!(c.del, exterior_derivatives::<GaussRat>(&catalog::calabi_eckmann()).unwrap().del);

    let text = r#"{"name":"f","n":2,"dbar":[{"i":2,"j":1,"k":1,"re":0.5,"im":0}]}"#;
    let (s, _) = parse_manifold(text).unwrap();
    assert!(!s.is_exact());
    assert!(exterior_derivatives::<GaussRat>(&s).is_err());
    assert!(exterior_derivatives::<C64>(&s).is_ok());
}

#[test]
fn partial_slots_are_normalized() {
    let s = InvariantComplexStructure::new("x", 3).with_partial(3, 2, 1, Coeff::real(1, 1)).validated().unwrap();
    assert_eq!((s.partial[0].j, s.partial[0].k), (1, 2));
    assert_eq!(s.partial[0].coeff, Coeff::real(-1, 1));
}
