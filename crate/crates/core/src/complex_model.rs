//! Bigraded double complex of invariant forms built from structure constants.
//!
//! Generators are ε^1..ε^n followed by ε̄^1..ε̄^n; a monomial ε^I∧ε̄^J is a bit
//! mask over these 2n generators in increasing order (barred after unbarred).
//! The global basis is ordered by total degree k, then p, then
//! lexicographically on (I, J), so degree and bidegree blocks are contiguous.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::sync::Arc;

use itertools::Itertools;
use nalgebra::DMatrix;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{self, adj};
use crate::scalar::{Coeff, Field, C64};

pub type Bidegree = (usize, usize);

/// One basis monomial ε^I ∧ ε̄^J.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mono {
    pub mask: u16,
    pub p: usize,
    pub q: usize,
    /// 1-based indices.
    pub i: Vec<usize>,
    pub j: Vec<usize>,
}

impl Mono {
    pub fn degree(&self) -> usize {
        self.p + self.q
    }

    pub fn label(&self) -> String {
        let mut s = String::new();
        for a in &self.i {
            s.push_str(&format!("e{a}"));
        }
        for b in &self.j {
            s.push_str(&format!("E{b}"));
        }
        if s.is_empty() {
            s.push('1');
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct BigradedBasis {
    pub n: usize,
    monos: Vec<Mono>,
    index: HashMap<u16, usize>,
    blocks: BTreeMap<Bidegree, Range<usize>>,
    degrees: Vec<Range<usize>>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub fn build_basis(n: usize) -> Result<BigradedBasis> {
    if !(1..=4).contains(&n) {
        return Err(Error::Config(format!("complex dimension {n} outside 1..=4")));
    }
    let mut monos = Vec::new();
    let mut blocks = BTreeMap::new();
    let mut degrees = Vec::new();
    for k in 0..=2 * n {
        let k_start = monos.len();
        for p in k.saturating_sub(n)..=k.min(n) {
            let q = k - p;
            let start = monos.len();
            for i in (1..=n).combinations(p) {
                for j in (1..=n).combinations(q) {
                    let mut mask = 0u16;
                    for &a in &i {
                        mask |= 1 << (a - 1);
                    }
                    for &b in &j {
                        mask |= 1 << (n + b - 1);
                    }
                    monos.push(Mono { mask, p, q, i: i.clone(), j: j.clone() });
                }
            }
            blocks.insert((p, q), start..monos.len());
        }
        degrees.push(k_start..monos.len());
    }
    let index = monos.iter().enumerate().map(|(g, m)| (m.mask, g)).collect();
    Ok(BigradedBasis { n, monos, index, blocks, degrees })
}

impl BigradedBasis {
    pub fn total_dim(&self) -> usize {
        self.monos.len()
    }

    pub fn monos(&self) -> &[Mono] {
        &self.monos
    }

    pub fn mono(&self, g: usize) -> &Mono {
        &self.monos[g]
    }

    pub fn global_index(&self, mask: u16) -> usize {
        self.index[&mask]
    }

    pub fn dim(&self, p: usize, q: usize) -> usize {
        self.blocks.get(&(p, q)).map_or(0, |r| r.len())
    }

    pub fn dim_i(&self, p: i64, q: i64) -> usize {
        if p < 0 || q < 0 {
            0
        } else {
            self.dim(p as usize, q as usize)
        }
    }

    pub fn block_range(&self, p: usize, q: usize) -> Range<usize> {
        self.blocks.get(&(p, q)).cloned().unwrap_or(0..0)
    }

    pub fn degree_range(&self, k: usize) -> Range<usize> {
        self.degrees.get(k).cloned().unwrap_or(0..0)
    }

    pub fn degree_dim(&self, k: usize) -> usize {
        self.degree_range(k).len()
    }

    /// Bidegrees (p, k−p) of degree k in ascending p.
    pub fn bidegrees(&self, k: usize) -> Vec<Bidegree> {
        let n = self.n;
        if k > 2 * n {
            return vec![];
        }
        (k.saturating_sub(n)..=k.min(n)).map(|p| (p, k - p)).collect()
    }

    pub fn all_bidegrees(&self) -> Vec<Bidegree> {
        self.blocks.keys().copied().collect()
    }

    /// Offset of block (p,q) inside the degree-(p+q) space.
    pub fn offset_in_degree(&self, p: usize, q: usize) -> usize {
        self.block_range(p, q).start - self.degree_range(p + q).start
    }

    /// Conjugation ε^I∧ε̄^J ↦ ε̄^I∧ε^J = (−1)^{pq} ε^J∧ε̄^I, as (target index, sign).
    pub fn conj_of(&self, g: usize) -> (usize, i32) {
        let m = &self.monos[g];
        let n = self.n;
        let low = m.mask & ((1 << n) - 1);
        let high = m.mask >> n;
        let target = (low << n) | high;
        let sign = if (m.p * m.q) % 2 == 0 { 1 } else { -1 };
        (self.index[&target], sign)
    }

    /// Signed permutation matrix of the conjugation on coefficient vectors
    /// (the antilinear map is `conj_matrix · v̄`).
    pub fn conj_matrix(&self) -> DMatrix<C64> {
        let d = self.total_dim();
        let mut c = DMatrix::zeros(d, d);
        for g in 0..d {
            let (t, s) = self.conj_of(g);
            c[(t, g)] = C64::new(s as f64, 0.0);
        }
        c
    }
}

/// Sign of a∧b relative to the canonical monomial a|b, or None when they share
/// a generator.
pub fn wedge_sign(a: u16, b: u16) -> Option<i32> {
    if a & b != 0 {
        return None;
    }
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let y = rest.trailing_zeros();
        swaps += (a >> (y + 1)).count_ones();
        rest &= rest - 1;
    }
    Some(if swaps % 2 == 0 { 1 } else { -1 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureTerm {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub coeff: Coeff,
}

/// ∂ε^i = Σ A[i][(j,k)] ε^j∧ε^k (j<k) and ∂̄ε^i = Σ B[i][(j,k)] ε^j∧ε̄^k.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantComplexStructure {
    pub name: String,
    pub n: usize,
    pub partial: Vec<StructureTerm>,
    pub dbar: Vec<StructureTerm>,
}

impl InvariantComplexStructure {
    pub fn new(name: &str, n: usize) -> Self {
        InvariantComplexStructure { name: name.into(), n, partial: vec![], dbar: vec![] }
    }

    pub fn with_partial(mut self, i: usize, j: usize, k: usize, c: Coeff) -> Self {
        self.partial.push(StructureTerm { i, j, k, coeff: c });
        self
    }

    pub fn with_dbar(mut self, i: usize, j: usize, k: usize, c: Coeff) -> Self {
        self.dbar.push(StructureTerm { i, j, k, coeff: c });
        self
    }

    /// Checks index ranges and stores every ∂ slot with j<k.
    pub fn validated(mut self) -> Result<Self> {
        let n = self.n;
        if !(1..=4).contains(&n) {
            return Err(Error::Config(format!("complex dimension {n} outside 1..=4")));
        }
        for (field, terms) in [("partial", &self.partial), ("dbar", &self.dbar)] {
            for (idx, t) in terms.iter().enumerate() {
                for (name, v) in [("i", t.i), ("j", t.j), ("k", t.k)] {
                    if v < 1 || v > n {
                        return Err(Error::Parse(format!("{field}[{idx}].{name}: index {v} outside 1..={n}")));
                    }
                }
            }
        }
        for (idx, t) in self.partial.iter_mut().enumerate() {
            if t.j == t.k {
                if !t.coeff.is_zero() {
                    return Err(Error::Parse(format!("partial[{idx}]: j = k gives ε^j∧ε^j = 0")));
                }
            } else if t.j > t.k {
                std::mem::swap(&mut t.j, &mut t.k);
                t.coeff = Coeff { exact: t.coeff.exact.as_ref().map(|q| -q.clone()), value: -t.coeff.value };
            }
        }
        Ok(self)
    }

    pub fn is_exact(&self) -> bool {
        self.partial.iter().chain(&self.dbar).all(|t| t.coeff.exact.is_some())
    }

    pub fn summary(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in self.partial.iter().filter(|t| !t.coeff.is_zero()) {
            out.push(format!("A[{}][({},{})] = {}", t.i, t.j, t.k, t.coeff.display()));
        }
        for t in self.dbar.iter().filter(|t| !t.coeff.is_zero()) {
            out.push(format!("B[{}][({},{})] = {}", t.i, t.j, t.k, t.coeff.display()));
        }
        out
    }
}

type Image<S> = Vec<(u16, S)>;

fn push_two<S: Field>(out: &mut Image<S>, a: usize, b: usize, c: S) {
    use std::cmp::Ordering::*;
    match a.cmp(&b) {
        Less => out.push(((1 << a) | (1 << b), c)),
        Greater => out.push(((1 << a) | (1 << b), -c)),
        Equal => {}
    }
}

/// (∂ image, ∂̄ image) of each of the 2n generators as 2-form monomials.
fn generator_images<S: Field>(s: &InvariantComplexStructure) -> Result<(Vec<Image<S>>, Vec<Image<S>>)> {
    let n = s.n;
    let mut del = vec![Vec::new(); 2 * n];
    let mut dbar = vec![Vec::new(); 2 * n];
    let lift = |c: &Coeff| {
        S::lift(c).ok_or_else(|| Error::Config(format!("{}: exact path requested for inexact coefficients", s.name)))
    };
    for t in &s.partial {
        let c: S = lift(&t.coeff)?;
        let (i, j, k) = (t.i - 1, t.j - 1, t.k - 1);
        push_two(&mut del[i], j, k, c.clone());
        push_two(&mut dbar[n + i], n + j, n + k, c.conj());
    }
    for t in &s.dbar {
        let c: S = lift(&t.coeff)?;
        let (i, j, k) = (t.i - 1, t.j - 1, t.k - 1);
        push_two(&mut dbar[i], j, n + k, c.clone());
        // ∂ε̄^i = Σ conj(B) ε̄^j∧ε^k
        push_two(&mut del[n + i], n + j, k, c.conj());
    }
    Ok((del, dbar))
}

/// Anti-derivation applied to one monomial.
fn derive<S: Field>(mask: u16, gen: &[Image<S>]) -> Image<S> {
    let mut out: Image<S> = Vec::new();
    let mut t = 0usize;
    let mut bits = mask;
    while bits != 0 {
        let g = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let rest = mask & !(1 << g);
        let pos_sign = if t % 2 == 0 { S::one() } else { -S::one() };
        for (two, c) in &gen[g] {
            if let Some(sg) = wedge_sign(*two, rest) {
                let v = if sg > 0 { c.clone() } else { -c.clone() };
                out.push((two | rest, pos_sign.clone() * v));
            }
        }
        t += 1;
    }
    out
}

#[derive(Clone, Debug)]
pub struct BigradedComplex<S: Field> {
    pub name: String,
    pub basis: Arc<BigradedBasis>,
    /// ∂: Λ^{p,q} → Λ^{p+1,q}, keyed by source.
    pub del: BTreeMap<Bidegree, DMatrix<S>>,
    /// ∂̄: Λ^{p,q} → Λ^{p,q+1}, keyed by source.
    pub dbar: BTreeMap<Bidegree, DMatrix<S>>,
}

pub fn exterior_derivatives<S: Field>(s: &InvariantComplexStructure) -> Result<BigradedComplex<S>> {
    let basis = Arc::new(build_basis(s.n)?);
    let (gdel, gdbar) = generator_images::<S>(s)?;
    let mut del = BTreeMap::new();
    let mut dbar = BTreeMap::new();
    for (p, q) in basis.all_bidegrees() {
        let src = basis.block_range(p, q);
        for (target, gen, store) in [((p + 1, q), &gdel, &mut del), ((p, q + 1), &gdbar, &mut dbar)] {
            let tgt = basis.block_range(target.0, target.1);
            let mut m = DMatrix::<S>::zeros(tgt.len(), src.len());
            for (col, g) in src.clone().enumerate() {
                for (mask, c) in derive(basis.mono(g).mask, gen) {
                    let row = basis.global_index(mask) - tgt.start;
                    m[(row, col)] += c;
                }
            }
            store.insert((p, q), m);
        }
    }
    Ok(BigradedComplex { name: s.name.clone(), basis, del, dbar })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub del_squared: f64,
    pub dbar_squared: f64,
    pub anticommutator: f64,
    /// All residuals are exactly zero (only meaningful on the exact path).
    pub exact_zero: bool,
}

impl<S: Field> BigradedComplex<S> {
    pub fn n(&self) -> usize {
        self.basis.n
    }

    pub fn del_block(&self, p: usize, q: usize) -> &DMatrix<S> {
        &self.del[&(p, q)]
    }

    pub fn dbar_block(&self, p: usize, q: usize) -> &DMatrix<S> {
        &self.dbar[&(p, q)]
    }

    /// Matrix of h∂ + ∂̄ from degree k to degree k+1.
    pub fn assemble_total(&self, k: usize, h: Option<S>) -> Result<DMatrix<S>> {
        let b = &self.basis;
        if k > 2 * b.n {
            return Err(Error::Config(format!("degree {k} outside 0..={}", 2 * b.n)));
        }
        let rows = b.degree_dim(k + 1);
        let cols = b.degree_dim(k);
        let mut m = DMatrix::zeros(rows, cols);
        let h = h.unwrap_or_else(S::one);
        for (p, q) in b.bidegrees(k) {
            let c0 = b.offset_in_degree(p, q);
            if p < b.n {
                let r0 = b.offset_in_degree(p + 1, q);
                let blk = self.del_block(p, q).map(|x| x * h.clone());
                m.view_mut((r0, c0), blk.shape()).copy_from(&blk);
            }
            if q < b.n {
                let r0 = b.offset_in_degree(p, q + 1);
                let blk = self.dbar_block(p, q);
                let mut v = m.view_mut((r0, c0), blk.shape());
                v += blk;
            }
        }
        Ok(m)
    }

    fn full(&self, which: &BTreeMap<Bidegree, DMatrix<S>>, shift: Bidegree) -> DMatrix<S> {
        let b = &self.basis;
        let d = b.total_dim();
        let mut m = DMatrix::zeros(d, d);
        for (&(p, q), blk) in which {
            let src = b.block_range(p, q);
            let tgt = b.block_range(p + shift.0, q + shift.1);
            if tgt.is_empty() {
                continue;
            }
            m.view_mut((tgt.start, src.start), blk.shape()).copy_from(blk);
        }
        m
    }

    /// ∂ on the whole exterior algebra.
    pub fn full_del(&self) -> DMatrix<S> {
        self.full(&self.del, (1, 0))
    }

    pub fn full_dbar(&self) -> DMatrix<S> {
        self.full(&self.dbar, (0, 1))
    }

    /// Max residuals of ∂², ∂̄², ∂∂̄+∂̄∂; the first offending block is named
    /// in the error (∂̄² blocks are scanned first, then ∂², then the mixed one).
    pub fn verify_complex_identities(&self, tol: f64) -> Result<IdentityReport> {
        let b = &self.basis;
        let n = b.n;
        let mut first_bad: Option<String> = None;
        let mut track = |name: &str, src: Bidegree, tgt: Bidegree, m: &DMatrix<S>, acc: &mut f64, exact: &mut bool| {
            let r = m.iter().fold(0.0f64, |a, x| a.max(x.to_c64().norm()));
            let nonzero = m.iter().any(|x| !x.is_zero());
            *exact &= !nonzero;
            *acc = acc.max(r);
            let bad = if S::EXACT { nonzero } else { r > tol };
            if bad && first_bad.is_none() {
                first_bad = Some(format!(
                    "{name} nonzero on block ({},{})->({},{}) (max entry {r:.3e})",
                    src.0, src.1, tgt.0, tgt.1
                ));
            }
        };
        let (mut dd, mut bb, mut mix) = (0.0, 0.0, 0.0);
        let mut exact = true;
        for (p, q) in b.all_bidegrees() {
            if q + 2 <= n {
                let m = self.dbar_block(p, q + 1) * self.dbar_block(p, q);
                track("dbar∘dbar", (p, q), (p, q + 2), &m, &mut bb, &mut exact);
            }
        }
        for (p, q) in b.all_bidegrees() {
            if p + 2 <= n {
                let m = self.del_block(p + 1, q) * self.del_block(p, q);
                track("del∘del", (p, q), (p + 2, q), &m, &mut dd, &mut exact);
            }
        }
        for (p, q) in b.all_bidegrees() {
            if p < n && q < n {
                let m = self.del_block(p, q + 1) * self.dbar_block(p, q) + self.dbar_block(p + 1, q) * self.del_block(p, q);
                track("del∘dbar+dbar∘del", (p, q), (p + 1, q + 1), &m, &mut mix, &mut exact);
            }
        }
        if let Some(msg) = first_bad {
            return Err(Error::ModelInvalid(format!("{}: {msg}", self.name)));
        }
        Ok(IdentityReport { del_squared: dd, dbar_squared: bb, anticommutator: mix, exact_zero: exact })
    }

    /// Float copy.
    pub fn to_float(&self) -> BigradedComplex<C64> {
        BigradedComplex {
            name: self.name.clone(),
            basis: self.basis.clone(),
            del: self.del.iter().map(|(k, v)| (*k, linalg::to_c64(v))).collect(),
            dbar: self.dbar.iter().map(|(k, v)| (*k, linalg::to_c64(v))).collect(),
        }
    }

    /// Betti number b_k = dim ker d_k − rank d_{k−1}.
    pub fn betti(&self, k: usize) -> usize {
        let dk = self.assemble_total(k, None).expect("degree in range");
        let ker = self.basis.degree_dim(k) - S::rank(&dk);
        let im = if k == 0 { 0 } else { S::rank(&self.assemble_total(k - 1, None).expect("degree in range")) };
        ker - im
    }
}

impl BigradedComplex<C64> {
    /// Residual of conj∘∂∘conj − ∂̄ on the full algebra.
    pub fn conjugation_residual(&self) -> f64 {
        let c = self.basis.conj_matrix();
        // conj(A) acting on v: C·conj(A·conj(C⁻¹ v)) = C Ā C⁻¹ v, with C real.
        let ct = c.transpose();
        let lhs = &c * self.full_del().map(|z| z.conj()) * &ct;
        linalg::float::max_abs(&(lhs - self.full_dbar()))
    }
}

/// Which pure bidegree shift an operator has, or a sum of several.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shift {
    Pure(i32, i32),
    Mixed,
}

impl Shift {
    fn add(self, o: Shift) -> Shift {
        match (self, o) {
            (Shift::Pure(a, b), Shift::Pure(c, d)) => Shift::Pure(a + c, b + d),
            _ => Shift::Mixed,
        }
    }
}

/// Operator on the full exterior algebra with a declared total degree and
/// bidegree shift.
#[derive(Clone, Debug)]
pub struct GradedOperator {
    pub basis: Arc<BigradedBasis>,
    pub matrix: DMatrix<C64>,
    pub degree: i32,
    pub shift: Shift,
}

impl GradedOperator {
    pub fn new(basis: Arc<BigradedBasis>, matrix: DMatrix<C64>, degree: i32, shift: Shift) -> Self {
        GradedOperator { basis, matrix, degree, shift }
    }

    pub fn pure(basis: Arc<BigradedBasis>, matrix: DMatrix<C64>, a: i32, b: i32) -> Self {
        GradedOperator { basis, matrix, degree: a + b, shift: Shift::Pure(a, b) }
    }

    pub fn zero_like(&self) -> Self {
        let d = self.matrix.nrows();
        GradedOperator { matrix: DMatrix::zeros(d, d), ..self.clone() }
    }

    pub fn identity(basis: Arc<BigradedBasis>) -> Self {
        let d = basis.total_dim();
        GradedOperator::pure(basis, DMatrix::identity(d, d), 0, 0)
    }

    /// self ∘ other.
    pub fn compose(&self, other: &GradedOperator) -> GradedOperator {
        GradedOperator {
            basis: self.basis.clone(),
            matrix: &self.matrix * &other.matrix,
            degree: self.degree + other.degree,
            shift: self.shift.add(other.shift),
        }
    }

    pub fn plus(&self, other: &GradedOperator) -> GradedOperator {
        assert_eq!(self.degree, other.degree, "sum of operators of different degrees");
        let shift = if self.shift == other.shift { self.shift } else { Shift::Mixed };
        GradedOperator { basis: self.basis.clone(), matrix: &self.matrix + &other.matrix, degree: self.degree, shift }
    }

    pub fn minus(&self, other: &GradedOperator) -> GradedOperator {
        self.plus(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> GradedOperator {
        self.scale_c(C64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: C64) -> GradedOperator {
        GradedOperator { matrix: &self.matrix * s, ..self.clone() }
    }

    /// Adjoint for the standard (η-orthonormal) product.
    pub fn adjoint(&self) -> GradedOperator {
        let shift = match self.shift {
            Shift::Pure(a, b) => Shift::Pure(-a, -b),
            Shift::Mixed => Shift::Mixed,
        };
        GradedOperator { basis: self.basis.clone(), matrix: adj(&self.matrix), degree: -self.degree, shift }
    }

    /// Graded commutator [A,B] = AB − (−1)^{ab} BA.
    pub fn commutator(&self, other: &GradedOperator) -> GradedOperator {
        let ab = self.compose(other);
        let ba = other.compose(self);
        let sign = if (self.degree * other.degree).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        GradedOperator { matrix: &ab.matrix - &ba.matrix * C64::new(sign, 0.0), ..ab }
    }

    /// Antilinear conjugate: v ↦ conj(A conj(v)).
    pub fn conjugate(&self) -> GradedOperator {
        let c = self.basis.conj_matrix();
        let shift = match self.shift {
            Shift::Pure(a, b) => Shift::Pure(b, a),
            Shift::Mixed => Shift::Mixed,
        };
        GradedOperator {
            basis: self.basis.clone(),
            matrix: &c * self.matrix.map(|z| z.conj()) * c.transpose(),
            degree: self.degree,
            shift,
        }
    }

    /// Block from Λ^{p,q} to Λ^{p+a,q+b} (pure shift only).
    pub fn block(&self, p: usize, q: usize) -> Option<(Bidegree, DMatrix<C64>)> {
        let Shift::Pure(a, b) = self.shift else { return None };
        let (tp, tq) = (p as i32 + a, q as i32 + b);
        if tp < 0 || tq < 0 {
            return None;
        }
        let (tp, tq) = (tp as usize, tq as usize);
        let src = self.basis.block_range(p, q);
        let tgt = self.basis.block_range(tp, tq);
        if src.is_empty() || tgt.is_empty() {
            return None;
        }
        Some(((tp, tq), self.matrix.view((tgt.start, src.start), (tgt.len(), src.len())).into_owned()))
    }

    /// Square restriction between arbitrary index ranges.
    pub fn sub(&self, rows: Range<usize>, cols: Range<usize>) -> DMatrix<C64> {
        self.matrix.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
    }

    /// Matrix from degree k to degree k+deg.
    pub fn degree_block(&self, k: usize) -> DMatrix<C64> {
        let t = k as i32 + self.degree;
        let rows = if t < 0 { 0..0 } else { self.basis.degree_range(t as usize) };
        self.sub(rows, self.basis.degree_range(k))
    }

    /// Restriction to Λ^{p,q} (for bidegree-preserving operators).
    pub fn bidegree_block(&self, p: usize, q: usize) -> DMatrix<C64> {
        let r = self.basis.block_range(p, q);
        self.sub(r.clone(), r)
    }

    /// Largest entry lying outside the declared degree/shift.
    pub fn shift_violation(&self) -> f64 {
        let b = &self.basis;
        let mut worst = 0.0f64;
        for (r, mr) in b.monos().iter().enumerate() {
            for (c, mc) in b.monos().iter().enumerate() {
                let z = self.matrix[(r, c)].norm();
                if z == 0.0 {
                    continue;
                }
                let dp = mr.p as i32 - mc.p as i32;
                let dq = mr.q as i32 - mc.q as i32;
                let ok = match self.shift {
                    Shift::Pure(a, bb) => dp == a && dq == bb,
                    Shift::Mixed => dp + dq == self.degree,
                };
                if !ok {
                    worst = worst.max(z);
                }
            }
        }
        worst
    }

    pub fn norm(&self) -> f64 {
        linalg::float::op_norm(&self.matrix)
    }

    pub fn max_abs(&self) -> f64 {
        linalg::float::max_abs(&self.matrix)
    }
}

/// Multiplication operator v ↦ f∧v by a form given by its global coefficients.
pub fn wedge_operator(basis: &Arc<BigradedBasis>, form: &[C64]) -> DMatrix<C64> {
    let d = basis.total_dim();
    let mut m = DMatrix::zeros(d, d);
    for (fg, &c) in form.iter().enumerate() {
        if c == C64::zero() {
            continue;
        }
        let fm = basis.mono(fg).mask;
        for col in 0..d {
            let vm = basis.mono(col).mask;
            if let Some(s) = wedge_sign(fm, vm) {
                let row = basis.global_index(fm | vm);
                m[(row, col)] += c * s as f64;
            }
        }
    }
    m
}

impl BigradedComplex<C64> {
    pub fn del_op(&self) -> GradedOperator {
        GradedOperator::pure(self.basis.clone(), self.full_del(), 1, 0)
    }

    pub fn dbar_op(&self) -> GradedOperator {
        GradedOperator::pure(self.basis.clone(), self.full_dbar(), 0, 1)
    }

    pub fn d_op(&self, h: f64) -> GradedOperator {
        let m = self.full_del() * C64::new(h, 0.0) + self.full_dbar();
        GradedOperator::new(self.basis.clone(), m, 1, Shift::Mixed)
    }
}
