//! Bundled manifolds and the JSON manifold schema.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::complex_model::InvariantComplexStructure;
use crate::error::{Error, Result};
use crate::metric_geometry::HermitianMetricModel;
use crate::scalar::{Coeff, Number, C64};

fn one() -> Coeff {
    Coeff::real(1, 1)
}

pub fn torus(n: usize) -> InvariantComplexStructure {
    InvariantComplexStructure::new(&format!("torus{n}"), n)
}

/// ∂ε³ = −ε¹∧ε².
pub fn iwasawa() -> InvariantComplexStructure {
    InvariantComplexStructure::new("iwasawa", 3).with_partial(3, 1, 2, Coeff::real(-1, 1))
}

/// ∂̄ε² = ε¹∧ε̄¹.
pub fn kodaira_thurston() -> InvariantComplexStructure {
    InvariantComplexStructure::new("kodaira_thurston", 2).with_dbar(2, 1, 1, one())
}

/// ∂̄ε³ = ε¹∧ε̄¹ + ε²∧ε̄²: the abelian structure on (5-dim Heisenberg) × ℝ.
pub fn heisenberg5() -> InvariantComplexStructure {
    InvariantComplexStructure::new("heisenberg5", 3).with_dbar(3, 1, 1, one()).with_dbar(3, 2, 2, one())
}

/// dε² = ε¹∧ε̄¹, dε³ = ε²∧ε̄¹: a nilpotent structure whose spectral sequence
/// has d_2 ≠ 0 (E_2 ≠ E_3 = E_∞ in degrees 2 to 4).
pub fn nilmanifold_e3() -> InvariantComplexStructure {
    InvariantComplexStructure::new("nilmanifold_e3", 3).with_dbar(2, 1, 1, one()).with_dbar(3, 2, 1, one())
}

/// su(2)⊕su(2) with φ¹ = e1+ie2, φ² = f1+if2, φ³ = e3+if3, where
/// de1 = e23, de2 = e31, de3 = e12 and likewise for f:
/// dφ¹ = −(i/2)(φ¹³ + φ¹³̄), dφ² = −(1/2)φ²³ + (1/2)φ²³̄,
/// dφ³ = (i/2)φ¹¹̄ − (1/2)φ²²̄.
pub fn calabi_eckmann() -> InvariantComplexStructure {
    InvariantComplexStructure::new("calabi_eckmann", 3)
        .with_partial(1, 1, 3, Coeff::imag(-1, 2))
        .with_dbar(1, 1, 3, Coeff::imag(-1, 2))
        .with_partial(2, 2, 3, Coeff::real(-1, 2))
        .with_dbar(2, 2, 3, Coeff::real(1, 2))
        .with_dbar(3, 1, 1, Coeff::imag(1, 2))
        .with_dbar(3, 2, 2, Coeff::real(-1, 2))
}

pub fn catalog() -> Vec<InvariantComplexStructure> {
    vec![
        torus(1),
        torus(2),
        torus(3),
        iwasawa(),
        kodaira_thurston(),
        heisenberg5(),
        nilmanifold_e3(),
        calabi_eckmann(),
    ]
}

pub fn lookup(name: &str) -> Result<InvariantComplexStructure> {
    catalog().into_iter().find(|s| s.name == name).ok_or_else(|| Error::UnknownManifold(name.into()))
}

/// Catalog name or path to a manifold JSON file; metric defaults to identity.
pub fn load_manifold(src: &str) -> Result<(InvariantComplexStructure, HermitianMetricModel)> {
    let path = Path::new(src);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        parse_manifold(&text)
    } else {
        let s = lookup(src)?.validated()?;
        let n = s.n;
        Ok((s, HermitianMetricModel::identity(n)))
    }
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Parse(format!("{path}.{key}: missing")))
}

fn index(v: &Value, key: &str, path: &str) -> Result<usize> {
    field(v, key, path)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("{path}.{key}: expected a positive integer")))
}

pub fn parse_manifold(text: &str) -> Result<(InvariantComplexStructure, HermitianMetricModel)> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("$: {e}")))?;
    let name = field(&v, "name", "$")?
        .as_str()
        .ok_or_else(|| Error::Parse("$.name: expected a string".into()))?
        .to_string();
    let n = index(&v, "n", "$")?;
    let mut s = InvariantComplexStructure::new(&name, n);
    for key in ["partial", "dbar"] {
        let Some(list) = v.get(key) else { continue };
        let arr = list.as_array().ok_or_else(|| Error::Parse(format!("$.{key}: expected an array")))?;
        for (idx, t) in arr.iter().enumerate() {
            let p = format!("$.{key}[{idx}]");
            let (i, j, k) = (index(t, "i", &p)?, index(t, "j", &p)?, index(t, "k", &p)?);
            let re = match t.get("re") {
                Some(x) => Number::from_json(x, &format!("{p}.re"))?,
                None => Number::int(0),
            };
            let im = match t.get("im") {
                Some(x) => Number::from_json(x, &format!("{p}.im"))?,
                None => Number::int(0),
            };
            let c = Coeff::new(re, im);
            s = if key == "partial" { s.with_partial(i, j, k, c) } else { s.with_dbar(i, j, k, c) };
        }
    }
    let s = s.validated()?;
    let metric = match v.get("metric") {
        Some(m) => HermitianMetricModel::new(parse_matrix(m, n, "$.metric")?)?,
        None => HermitianMetricModel::identity(n),
    };
    Ok((s, metric))
}

/// n×n matrix of [re, im] pairs (numbers or "p/q" strings).
pub fn parse_matrix(v: &Value, n: usize, path: &str) -> Result<DMatrix<C64>> {
    let rows = v.as_array().ok_or_else(|| Error::Parse(format!("{path}: expected an array of rows")))?;
    if rows.len() != n {
        return Err(Error::Parse(format!("{path}: expected {n} rows, got {}", rows.len())));
    }
    let mut m = DMatrix::zeros(n, n);
    for (r, row) in rows.iter().enumerate() {
        let cols = row.as_array().ok_or_else(|| Error::Parse(format!("{path}[{r}]: expected an array")))?;
        if cols.len() != n {
            return Err(Error::Parse(format!("{path}[{r}]: expected {n} entries, got {}", cols.len())));
        }
        for (c, e) in cols.iter().enumerate() {
            let p = format!("{path}[{r}][{c}]");
            let pair = e.as_array().filter(|a| a.len() == 2).ok_or_else(|| Error::Parse(format!("{p}: expected [re, im]")))?;
            let re = Number::from_json(&pair[0], &format!("{p}[0]"))?;
            let im = Number::from_json(&pair[1], &format!("{p}[1]"))?;
            m[(r, c)] = C64::new(re.value, im.value);
        }
    }
    Ok(m)
}

pub fn load_metric_file(path: &Path, n: usize) -> Result<HermitianMetricModel> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("$: {e}")))?;
    let m = match v.get("metric") {
        Some(inner) => parse_matrix(inner, n, "$.metric")?,
        None => parse_matrix(&v, n, "$")?,
    };
    HermitianMetricModel::new(m)
}

/// Seeded random positive-definite metric A Aᴴ + I/2.
pub fn random_metric(n: usize, seed: u64) -> HermitianMetricModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let g = &a * a.adjoint() + DMatrix::<C64>::identity(n, n) * C64::new(0.5, 0.0);
    let g = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    HermitianMetricModel::new(g).expect("A Aᴴ + I/2 is positive definite")
}
