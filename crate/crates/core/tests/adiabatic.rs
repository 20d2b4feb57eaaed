use frolicher::adiabatic_analysis::*;
use frolicher::catalog::{self, catalog, random_metric};
use frolicher::complex_model::{binomial, exterior_derivatives, InvariantComplexStructure};
use frolicher::linalg::float::hermitian_eigenvalues;
use frolicher::metric_geometry::{Geometry, HermitianMetricModel};
use frolicher::scalar::{GaussRat, C64};
use frolicher::spectral_sequence::{harmonic_tower, pages_by_filtration, SpectralPageSet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn pages(s: &InvariantComplexStructure) -> SpectralPageSet<GaussRat> {
    pages_by_filtration(&exterior_derivatives::<GaussRat>(s).unwrap()).unwrap()
}

fn identity_geom(s: &InvariantComplexStructure) -> Geometry {
    HermitianMetricModel::identity(s.n).orthonormalize(s).unwrap()
}

fn classified(geom: &Geometry, betti: &[usize]) -> (EigenSweep, DecayClassification) {
    let mut sw = sweep(geom, betti, 10).unwrap();
    let cls = classify_with_refinement(&mut sw).unwrap();
    (sw, cls)
}

fn diag_metric(d: &[f64]) -> HermitianMetricModel {
    HermitianMetricModel::new(DMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|&x| C64::new(x, 0.0)))))
        .unwrap()
}

/// Δ_h in degree k assembled directly from the float complex.
fn direct_laplacian(geom: &Geometry, k: usize, h: f64) -> DMatrix<C64> {
    let n = geom.n();
    let dim = binomial(2 * n, k);
    let hh = Some(C64::new(h, 0.0));
    let mut lap = DMatrix::zeros(dim, dim);
    if k < 2 * n {
        let d = geom.complex.assemble_total(k, hh).unwrap();
        lap += d.adjoint() * d;
    }
    if k > 0 {
        let d = geom.complex.assemble_total(k - 1, hh).unwrap();
        lap += &d * d.adjoint();
    }
    lap
}

#[test]
fn grid_is_dyadic() {
    assert_eq!(grid_h(0), 1.0);
    assert_eq!(grid_h(3), 0.125);
    let s = catalog::iwasawa();
    let sw = sweep(&identity_geom(&s), &pages(&s).betti, 8).unwrap();
    assert_eq!(sw.h_values(), (0..=8).map(grid_h).collect::<Vec<_>>());
}

#[test]
fn torus_spectra_vanish() {
    for n in 1..=3 {
        let s = catalog::torus(n);
        let sw = sweep(&identity_geom(&s), &pages(&s).betti, 6).unwrap();
        for p in &sw.points {
            for (k, spec) in p.spectra.iter().enumerate() {
                assert_eq!(spec.len(), binomial(2 * n, k));
                assert!(spec.iter().all(|&l| l == 0.0));
            }
        }
    }
}

#[test]
fn iwasawa_degree_one_at_h_one() {
    let s = catalog::iwasawa();
    let geom = identity_geom(&s);
    let sw = sweep(&geom, &pages(&s).betti, 4).unwrap();
    let direct = hermitian_eigenvalues(&direct_laplacian(&geom, 1, 1.0));
    let norm = sw.points[0].norm;
    assert_eq!(direct.iter().filter(|l| l.abs() < 1e-12 * norm).count(), 4);
    let spec = sw.spectrum(0, 1);
    assert_eq!(spec.len(), 6);
    assert_eq!(spec.iter().filter(|&&l| l == 0.0).count(), 4);
    for (a, b) in spec.iter().zip(&direct) {
        assert!((a - b).abs() <= 1e-12 * norm);
    }
}

#[test]
fn sweep_agrees_with_direct_solve_and_duality() {
    for s in catalog() {
        let geom = identity_geom(&s);
        let sw = sweep(&geom, &pages(&s).betti, 10).unwrap();
        assert!(sw.max_direct_deviation() < 1e-12, "{}", s.name);
        assert!(sw.duality_residual() < DUALITY_RTOL, "{}", s.name);
        assert!(sw.kernel_dims_match(), "{}", s.name);
    }
}

#[test]
fn sweep_rejects_wrong_betti_length() {
    let s = catalog::iwasawa();
    assert!(sweep(&identity_geom(&s), &[1, 4, 8], 4).is_err());
}

#[test]
fn distribution_extremes() {
    let s = catalog::iwasawa();
    let sw = sweep(&identity_geom(&s), &pages(&s).betti, 4).unwrap();
    for k in 0..=6 {
        let top = distribution_functions(&sw, 2, k, 1e6).unwrap();
        assert_eq!(top.n, binomial(6, k));
        let zero = distribution_functions(&sw, 2, k, 0.0).unwrap();
        assert_eq!((zero.n, zero.f, zero.g), (sw.betti[k], 0, 0));
    }
}

#[test]
fn iwasawa_counting_identity_at_quarter() {
    // recount from the raw sorted spectra: F^0 = positive eigenvalues in
    // degree 0 (none), and the rest of degree 1 above the kernel is F^0 + F^1
    let s = catalog::iwasawa();
    let sw = sweep(&identity_geom(&s), &pages(&s).betti, 4).unwrap();
    assert_eq!(sw.points[2].h, 0.25);
    let spec1 = sw.spectrum(2, 1).to_vec();
    let spec0 = sw.spectrum(2, 0).to_vec();
    for lambda in sample_levels(&spec1, sw.points[2].norm) {
        let v = distribution_functions(&sw, 2, 1, lambda).unwrap();
        let n1 = spec1.iter().filter(|&&l| l <= lambda).count();
        let f0 = spec0.iter().filter(|&&l| l > 0.0 && l <= lambda).count();
        assert_eq!(v.n, n1);
        assert_eq!(v.f_prev, f0);
        assert_eq!(v.f, n1 - 4 - f0);
        assert!(v.counting_identity() && v.transfer_identity());
    }
}

#[test]
fn bookkeeping_on_catalog() {
    for s in catalog() {
        let sw = sweep(&identity_geom(&s), &pages(&s).betti, 3).unwrap();
        for j in 0..=3 {
            let b = check_distribution_identities(&sw, j).unwrap();
            assert!(b.pass(), "{} j={j}: {:?}", s.name, b.failures.first());
            assert!(b.samples > 2 * s.n);
        }
    }
}

#[test]
fn three_space_dimensions() {
    let s = catalog::iwasawa();
    let geom = identity_geom(&s);
    let betti = pages(&s).betti.clone();
    for h in [1.0, 0.5, 0.25, 1.0 / 1024.0] {
        for k in 0..=6 {
            let t = three_space_spectra(&geom, h, k).unwrap();
            assert_eq!(t.harmonic, betti[k]);
            assert_eq!(t.harmonic + t.exact.len() + t.coexact.len(), binomial(6, k));
            assert!(t.exact.iter().chain(&t.coexact).all(|&l| l > 0.0));
        }
    }
    assert!(three_space_spectra(&geom, 0.0, 1).is_err());
    assert!(three_space_spectra(&geom, 0.5, 7).is_err());
}

#[test]
fn slope_fit_and_rounding() {
    let x: Vec<f64> = (6..10).map(|j| grid_h(j).ln()).collect();
    let y: Vec<f64> = x.iter().map(|l| 4.0 * l + 1.5).collect();
    assert!((ls_slope(&x, &y) - 4.0).abs() < 1e-12);
    assert_eq!(round_class(2.2), Some(DecayClass::Finite(2)));
    assert_eq!(round_class(1.76), Some(DecayClass::Finite(2)));
    assert_eq!(round_class(1.5), None);
    assert_eq!(round_class(-0.6), None);
    assert!(DecayClass::Infinite.at_least(7));
    assert!(!DecayClass::Finite(1).at_least(2));
    assert_eq!(serde_json::to_string(&[DecayClass::Finite(3), DecayClass::Infinite]).unwrap(), r#"[3,"inf"]"#);
}

#[test]
fn classification_needs_small_h() {
    let s = catalog::iwasawa();
    let sw = sweep(&identity_geom(&s), &pages(&s).betti, 4).unwrap();
    assert!(classify_decay(&sw).is_err());
}

#[test]
fn torus_classes_are_infinite() {
    let s = catalog::torus(2);
    let (_, cls) = classified(&identity_geom(&s), &pages(&s).betti);
    assert!(cls.fits.iter().flatten().all(|f| f.class == Some(DecayClass::Infinite)));
    // Kähler metric diag(1,2): E_1 = E_∞
    let geom = diag_metric(&[1.0, 2.0]).orthonormalize(&s).unwrap();
    let (_, cls) = classified(&geom, &pages(&s).betti);
    assert_eq!(cls.count(1, 2), 6);
}

#[test]
fn iwasawa_degree_one_counts() {
    let s = catalog::iwasawa();
    let p = pages(&s);
    let (_, cls) = classified(&identity_geom(&s), &p.betti);
    assert!(cls.unclassifiable().is_empty());
    assert_eq!((cls.count(1, 1), cls.count(2, 1), cls.count(3, 1)), (5, 4, 4));
    assert_eq!(cls.count(1, 1), p.degree_dim(1, 1));
    assert_eq!(cls.count(2, 1), p.degree_dim(2, 1));
    let v = verify_theorem_main(&p, &cls);
    assert!(v.pass);
    assert_eq!(v.rows.iter().map(|r| r.r).max(), Some(3));
    assert_eq!(v.rows.len(), 3 * 7);
}

#[test]
fn theorem_on_catalog() {
    for s in catalog() {
        let p = pages(&s);
        let (_, cls) = classified(&identity_geom(&s), &p.betti);
        let v = verify_theorem_main(&p, &cls);
        assert!(v.pass, "{}: {:?}", s.name, v.rows.iter().find(|r| !r.pass));
        let n = s.n;
        for k in 0..=2 * n {
            let c = &cls.counts[k];
            assert_eq!(c[0], binomial(2 * n, k));
            assert!(c.windows(2).all(|w| w[0] >= w[1]));
            let inf = cls.fits[k].iter().filter(|f| f.class == Some(DecayClass::Infinite)).count();
            assert_eq!(inf, p.betti[k]);
        }
    }
}

#[test]
fn theorem_fails_on_wrong_pages() {
    // a single perturbed count must be caught
    let s = catalog::iwasawa();
    let p = pages(&s);
    let (_, mut cls) = classified(&identity_geom(&s), &p.betti);
    cls.counts[1][2] += 1;
    assert!(!verify_theorem_main(&p, &cls).pass);
}

#[test]
fn degeneration_criterion_matches_pages() {
    let t = catalog::torus(2);
    let tp = pages(&t);
    let sw = sweep(&identity_geom(&t), &tp.betti, 10).unwrap();
    let v = degeneration_criterion(&sw, &tp, 1);
    assert!(v.vacuous && v.criterion && v.consistent);

    let s = catalog::iwasawa();
    let p = pages(&s);
    let sw = sweep(&identity_geom(&s), &p.betti, 10).unwrap();
    let r1 = degeneration_criterion(&sw, &p, 1);
    assert!(!r1.criterion && !r1.pages_degenerate && r1.consistent);
    assert_eq!(r1.degrees[0].grows, Some(false));
    let r2 = degeneration_criterion(&sw, &p, 2);
    assert!(r2.criterion && r2.pages_degenerate && r2.consistent);

    for s in catalog() {
        let p = pages(&s);
        let sw = sweep(&identity_geom(&s), &p.betti, 10).unwrap();
        for r in 1..=2 {
            assert!(degeneration_criterion(&sw, &p, r).consistent, "{} r={r}", s.name);
        }
    }
}

#[test]
fn metric_independence_of_counts() {
    let t = catalog::torus(2);
    let tp = pages(&t);
    let (_, a) = classified(&identity_geom(&t), &tp.betti);
    let (_, b) = classified(&diag_metric(&[1.0, 2.0]).orthonormalize(&t).unwrap(), &tp.betti);
    assert!(metric_independence(&a, &b).pass);

    for s in [catalog::iwasawa(), catalog::kodaira_thurston()] {
        let p = pages(&s);
        let (_, a) = classified(&identity_geom(&s), &p.betti);
        let (_, b) = classified(&random_metric(s.n, 11).orthonormalize(&s).unwrap(), &p.betti);
        let v = metric_independence(&a, &b);
        assert!(v.pass, "{}: {:?}", s.name, v.mismatches);
        assert!(metric_independence(&a, &a).pass);
        let mut c = a.clone();
        c.counts[1][1] += 1;
        assert!(!metric_independence(&a, &c).pass);
    }
}

#[test]
fn energy_identities_iwasawa() {
    let s = catalog::iwasawa();
    let geom = identity_geom(&s);
    let tower = harmonic_tower(&geom.complex).unwrap();
    let e = pure_type_energy_identities(&geom, &tower, 0.5, 1).unwrap();
    assert!(e.quadratic_form <= 1e-12, "{e:?}");
    assert!(e.adjoint_scaling <= 1e-10, "{e:?}");
    let one = pure_type_energy_identities(&geom, &tower, 1.0, 1).unwrap();
    assert!(one.quadratic_form <= 1e-12);
}

#[test]
fn energy_identities_on_catalog() {
    for s in catalog() {
        let geom = random_metric(s.n, 5).orthonormalize(&s).unwrap();
        let tower = harmonic_tower(&geom.complex).unwrap();
        for h in [1.0, 0.5, 0.125] {
            let e = pure_type_energy_identities(&geom, &tower, h, 9).unwrap();
            assert!(e.quadratic_form <= 1e-11, "{} h={h}: {e:?}", s.name);
            assert!(e.adjoint_scaling <= 1e-9, "{} h={h}: {e:?}", s.name);
        }
    }
}

#[test]
fn csv_outputs() {
    let s = catalog::iwasawa();
    let p = pages(&s);
    let (sw, cls) = classified(&identity_geom(&s), &p.betti);
    let dir = std::env::temp_dir().join(format!("frolicher-adiabatic-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    sw.write_csv(&dir.join("eig.csv")).unwrap();
    cls.write_csv(&dir.join("cls.csv")).unwrap();
    verify_theorem_main(&p, &cls).write_csv(&dir.join("verdict.csv")).unwrap();
    let eig = std::fs::read_to_string(dir.join("eig.csv")).unwrap();
    assert!(eig.starts_with("k,i,h,lambda\n"));
    assert_eq!(eig.lines().count(), 1 + 64 * sw.points.len());
    let cls_text = std::fs::read_to_string(dir.join("cls.csv")).unwrap();
    assert!(cls_text.starts_with("k,i,slope,class\n"));
    assert!(cls_text.contains("1,1,inf,inf"));
    let verdict = std::fs::read_to_string(dir.join("verdict.csv")).unwrap();
    assert!(verdict.starts_with("r,k,dimEr,count,pass\n"));
    assert!(verdict.contains("1,1,5,5,true"));
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn random_metrics_keep_counts(seed in 0u64..1000, pick in 0usize..2) {
        let s = [catalog::kodaira_thurston(), catalog::iwasawa()][pick].clone();
        let p = pages(&s);
        let geom = random_metric(s.n, seed).orthonormalize(&s).unwrap();
        let (sw, cls) = classified(&geom, &p.betti);
        prop_assert!(sw.duality_residual() < DUALITY_RTOL);
        prop_assert!(sw.kernel_dims_match());
        prop_assert!(verify_theorem_main(&p, &cls).pass);
        prop_assert!(check_distribution_identities(&sw, 1).unwrap().pass());
    }

    #[test]
    fn sample_levels_separate_eigenvalues(mut v in prop::collection::vec(0.0f64..10.0, 1..12)) {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let levels = sample_levels(&v, 10.0);
        prop_assert_eq!(levels[0], 0.0);
        prop_assert!(*levels.last().unwrap() > *v.last().unwrap());
        for l in &levels[1..levels.len() - 1] {
            prop_assert!(v.iter().all(|x| (x - l).abs() > 0.0));
        }
    }
}
