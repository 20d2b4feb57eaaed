//! Pages of the Frölicher spectral sequence, computed three ways: from the
//! p-filtration of the total complex, from the zig-zag chain condition on
//! single bidegrees, and from a tower of harmonic subspaces.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::complex_model::{BigradedBasis, BigradedComplex, Bidegree};
use crate::error::{Error, Result};
use crate::linalg::{self, adj, complement_reps, hcat, mul, orth_complement_in, to_c64};
use crate::scalar::{Field, C64};

/// Tolerance used by float-path zero tests on representatives.
pub const FLOAT_ZERO: f64 = 1e-9;

fn norm<S: Field>(m: &DMatrix<S>) -> f64 {
    m.iter().map(|x| x.to_c64().norm_sqr()).sum::<f64>().sqrt()
}

fn negligible<S: Field>(m: &DMatrix<S>, scale: f64) -> bool {
    if S::EXACT {
        linalg::is_zero_matrix(m)
    } else {
        norm(m) <= FLOAT_ZERO * scale.max(1.0)
    }
}

/// Float path: zero the columns that are rounding noise relative to `scale`,
/// so that relative rank thresholds do not promote them to directions.
fn clean<S: Field>(mut m: DMatrix<S>, scale: f64) -> DMatrix<S> {
    if S::EXACT {
        return m;
    }
    for j in 0..m.ncols() {
        let cn = m.column(j).iter().map(|x| x.to_c64().norm_sqr()).sum::<f64>().sqrt();
        if cn <= FLOAT_ZERO * scale.max(1.0) {
            m.column_mut(j).fill(S::zero());
        }
    }
    m
}

/// ∂ block from (p,q), zero-padded when either end is out of range.
fn del_i<S: Field>(c: &BigradedComplex<S>, p: i64, q: i64) -> DMatrix<S> {
    let b = &c.basis;
    let (rows, cols) = (b.dim_i(p + 1, q), b.dim_i(p, q));
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, cols);
    }
    c.del_block(p as usize, q as usize).clone()
}

fn dbar_i<S: Field>(c: &BigradedComplex<S>, p: i64, q: i64) -> DMatrix<S> {
    let b = &c.basis;
    let (rows, cols) = (b.dim_i(p, q + 1), b.dim_i(p, q));
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, cols);
    }
    c.dbar_block(p as usize, q as usize).clone()
}

/// Block matrix from (row block, col block, matrix) triples.
fn assemble<S: Field>(rows: &[usize], cols: &[usize], blocks: Vec<(usize, usize, DMatrix<S>)>) -> DMatrix<S> {
    let ro: Vec<usize> = rows.iter().scan(0, |a, &d| { let o = *a; *a += d; Some(o) }).collect();
    let co: Vec<usize> = cols.iter().scan(0, |a, &d| { let o = *a; *a += d; Some(o) }).collect();
    let mut m = DMatrix::zeros(rows.iter().sum(), cols.iter().sum());
    for (i, j, blk) in blocks {
        if blk.is_empty() {
            continue;
        }
        let mut v = m.view_mut((ro[i], co[j]), (rows[i], cols[j]));
        v += blk;
    }
    m
}

fn bidegrees_in(b: &BigradedBasis, k: usize) -> Vec<Bidegree> {
    b.bidegrees(k)
}

/// Pages E_0, …, E_{max_page} with representatives and differentials.
#[derive(Clone, Debug)]
pub struct SpectralPageSet<S: Field> {
    pub name: String,
    pub basis: Arc<BigradedBasis>,
    pub max_page: usize,
    /// dims[r][(p,q)] = dim E_r^{p,q}
    pub dims: Vec<BTreeMap<Bidegree, usize>>,
    /// Zig-zag representatives in F^p of total degree p+q (degree coordinates).
    pub reps: Vec<BTreeMap<Bidegree, DMatrix<S>>>,
    /// d_r: E_r^{p,q} → E_r^{p+r,q−r+1} in representative coordinates.
    pub d: Vec<BTreeMap<Bidegree, DMatrix<S>>>,
    pub betti: Vec<usize>,
}

impl<S: Field> SpectralPageSet<S> {
    pub fn n(&self) -> usize {
        self.basis.n
    }

    pub fn dim(&self, r: usize, p: usize, q: usize) -> usize {
        let r = r.min(self.max_page);
        self.dims[r].get(&(p, q)).copied().unwrap_or(0)
    }

    pub fn degree_dim(&self, r: usize, k: usize) -> usize {
        bidegrees_in(&self.basis, k).iter().map(|&(p, q)| self.dim(r, p, q)).sum()
    }

    pub fn rank_d(&self, r: usize, p: usize, q: usize) -> usize {
        if r > self.max_page {
            return 0;
        }
        self.d[r].get(&(p, q)).map_or(0, |m| S::rank(m))
    }

    /// m_r^k = Σ_{l≥r} Σ_{p+q=k} rank d_l^{p,q}
    pub fn m(&self, r: usize, k: usize) -> usize {
        (r..=self.max_page).map(|l| bidegrees_in(&self.basis, k).iter().map(|&(p, q)| self.rank_d(l, p, q)).sum::<usize>()).sum()
    }

    /// dim L_r^{p,q} = Σ_{l≥r} rank d_l^{p,q}
    pub fn l_dim(&self, r: usize, p: usize, q: usize) -> usize {
        (r..=self.max_page).map(|l| self.rank_d(l, p, q)).sum()
    }

    /// Smallest r ≥ 1 with E_r^k = E_∞^k.
    pub fn degeneration_page_in_degree(&self, k: usize) -> usize {
        (1..=self.max_page).find(|&r| self.degree_dim(r, k) == self.betti[k]).unwrap_or(self.max_page)
    }

    /// Smallest r ≥ 1 with E_r = E_∞.
    pub fn degeneration_page(&self) -> usize {
        (0..=2 * self.n()).map(|k| self.degeneration_page_in_degree(k)).max().unwrap_or(1)
    }

    pub fn dims_table(&self, r: usize) -> Vec<Vec<usize>> {
        let n = self.n();
        (0..=n).map(|p| (0..=n).map(|q| self.dim(r, p, q)).collect()).collect()
    }
}

/// Start offset of F^s inside the degree-k coordinates.
fn fstart(b: &BigradedBasis, k: usize, s: i64) -> usize {
    let s = s.max(0) as usize;
    (0..s.min(k + 1)).map(|p| b.dim_i(p as i64, k as i64 - p as i64)).sum()
}

struct DegreeMaps<S: Field> {
    /// total[k]: degree k → k+1
    total: Vec<DMatrix<S>>,
    cache: std::cell::RefCell<std::collections::HashMap<(usize, i64, i64), DMatrix<S>>>,
}

impl<S: Field> DegreeMaps<S> {
    fn new(c: &BigradedComplex<S>) -> Result<Self> {
        let total = (0..=2 * c.n()).map(|k| c.assemble_total(k, None)).collect::<Result<Vec<_>>>()?;
        Ok(DegreeMaps { total, cache: Default::default() })
    }

    /// Z_r^p in degree k: x ∈ F^p with dx ∈ F^{p+r}. r = −1 gives F^p.
    fn z(&self, b: &BigradedBasis, k: usize, p: i64, r: i64) -> DMatrix<S> {
        let key = (k, p, r);
        if let Some(m) = self.cache.borrow().get(&key) {
            return m.clone();
        }
        let out = self.z_uncached(b, k, p, r);
        self.cache.borrow_mut().insert(key, out.clone());
        out
    }

    fn z_uncached(&self, b: &BigradedBasis, k: usize, p: i64, r: i64) -> DMatrix<S> {
        let dim = b.degree_dim(k);
        let c0 = fstart(b, k, p);
        let width = dim - c0;
        let free = if r < 0 {
            linalg::identity::<S>(width)
        } else {
            let rows = fstart(b, k + 1, p + r);
            let sub = self.total[k].view((0, c0), (rows, width)).into_owned();
            S::kernel(&sub)
        };
        let mut out = DMatrix::zeros(dim, free.ncols());
        out.view_mut((c0, 0), (width, free.ncols())).copy_from(&free);
        out
    }

    /// Z_{r−1}^{p+1} + d Z_{r−1}^{p−r+1}, the denominator of E_r^{p,k−p}.
    fn boundary(&self, b: &BigradedBasis, k: usize, p: i64, r: i64) -> DMatrix<S> {
        let upper = self.z(b, k, p + 1, r - 1);
        if k == 0 {
            return upper;
        }
        let lower = self.z(b, k - 1, p - r + 1, r - 1);
        let img = clean(mul(&self.total[k - 1], &lower), norm(&self.total[k - 1]));
        hcat(&upper, &img)
    }
}

/// Pages from Z_r^p = F^p ∩ d⁻¹(F^{p+r}) and
/// E_r^p = Z_r^p / (Z_{r−1}^{p+1} + d Z_{r−1}^{p−r+1}).
pub fn pages_by_filtration<S: Field>(c: &BigradedComplex<S>) -> Result<SpectralPageSet<S>> {
    let b = c.basis.clone();
    let n = b.n;
    let maps = DegreeMaps::new(c)?;
    let max_page = n + 1;
    let mut dims = Vec::new();
    let mut reps = Vec::new();
    let mut dens = Vec::new();
    for r in 0..=max_page as i64 {
        let mut dm = BTreeMap::new();
        let mut rm = BTreeMap::new();
        let mut den_m = BTreeMap::new();
        for (p, q) in b.all_bidegrees() {
            let k = p + q;
            let z = maps.z(&b, k, p as i64, r);
            let den = maps.boundary(&b, k, p as i64, r);
            let zr = S::rank(&z);
            if linalg::sum_dim(&z, &den) != zr {
                return Err(Error::Inconsistent(format!(
                    "{}: boundary space not contained in Z_{r}^{p} (degree {k})",
                    c.name
                )));
            }
            let rep = complement_reps(&z, &den);
            dm.insert((p, q), rep.ncols());
            rm.insert((p, q), rep);
            den_m.insert((p, q), den);
        }
        dims.push(dm);
        reps.push(rm);
        dens.push(den_m);
    }
    let mut ds = Vec::new();
    for r in 0..=max_page {
        let mut dr = BTreeMap::new();
        for (p, q) in b.all_bidegrees() {
            let src = &reps[r][&(p, q)];
            let (tp, tq) = (p + r, q as i64 - r as i64 + 1);
            if tp > n || tq < 0 || tq as usize > n {
                continue;
            }
            let tq = tq as usize;
            let tgt = &reps[r][&(tp, tq)];
            let k = p + q;
            let y = mul(&maps.total[k], src);
            let coords = if src.ncols() == 0 || tgt.ncols() == 0 {
                DMatrix::zeros(tgt.ncols(), src.ncols())
            } else {
                let sys = hcat(tgt, &dens[r][&(tp, tq)]);
                let x = S::solve(&sys, &y).ok_or_else(|| {
                    Error::Inconsistent(format!("{}: d_{r} image of E_{r}^{{{p},{q}}} is not a page class", c.name))
                })?;
                clean(x.rows(0, tgt.ncols()).into_owned(), norm(&maps.total[k]))
            };
            dr.insert((p, q), coords);
        }
        ds.push(dr);
    }
    let betti = (0..=2 * n).map(|k| c.betti(k)).collect();
    Ok(SpectralPageSet { name: c.name.clone(), basis: b, max_page, dims, reps, d: ds, betti })
}

/// Solutions (α, u_1, …, u_{r−1}) of ∂̄α = 0, ∂α = ∂̄u_1, ∂u_l = ∂̄u_{l+1}
/// stacked as one matrix, with the column dimensions of each unknown.
fn chain_system<S: Field>(c: &BigradedComplex<S>, r: usize, p: i64, q: i64) -> (DMatrix<S>, Vec<usize>) {
    let b = &c.basis;
    let cols: Vec<usize> = (0..r as i64).map(|l| b.dim_i(p + l, q - l)).collect();
    let mut rows = vec![b.dim_i(p, q + 1)];
    let mut blocks = vec![(0, 0, dbar_i(c, p, q))];
    for l in 0..r.saturating_sub(1) as i64 {
        // ∂u_l − ∂̄u_{l+1} in Λ^{p+l+1,q−l}
        rows.push(b.dim_i(p + l + 1, q - l));
        let i = rows.len() - 1;
        blocks.push((i, l as usize, del_i(c, p + l, q - l)));
        blocks.push((i, l as usize + 1, -dbar_i(c, p + l + 1, q - l - 1)));
    }
    (assemble(&rows, &cols, blocks), cols)
}

/// Classes of Λ^{p,q} satisfying the chain condition of length r, and the
/// boundary subspace ∂y_{p−1} + ∂̄y_p coming from shorter chains below.
pub fn chain_spaces<S: Field>(c: &BigradedComplex<S>, r: usize, p: usize, q: usize) -> (DMatrix<S>, DMatrix<S>) {
    let b = &c.basis;
    let (p, q) = (p as i64, q as i64);
    let k = p + q;
    let dim_a = b.dim_i(p, q);
    if r == 0 {
        return (linalg::identity(dim_a), DMatrix::zeros(dim_a, 0));
    }
    let (m, _) = chain_system(c, r, p, q);
    let ker = if m.nrows() == 0 { linalg::identity(m.ncols()) } else { S::kernel(&m) };
    let z = S::column_basis(&clean(ker.rows(0, dim_a).into_owned(), 1.0));
    // y_s ∈ Λ^{s,k−1−s}, s = p−r+1 … p
    let ss: Vec<i64> = (p - r as i64 + 1..=p).collect();
    let cols: Vec<usize> = ss.iter().map(|&s| b.dim_i(s, k - 1 - s)).collect();
    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    if r >= 2 {
        let s0 = ss[0];
        rows.push(b.dim_i(s0, k - s0));
        blocks.push((0, 0, dbar_i(c, s0, k - 1 - s0)));
        for (i, &s) in ss.iter().enumerate().take(r - 2) {
            rows.push(b.dim_i(s + 1, k - s - 1));
            let row = rows.len() - 1;
            blocks.push((row, i, del_i(c, s, k - 1 - s)));
            blocks.push((row, i + 1, dbar_i(c, s + 1, k - 2 - s)));
        }
    }
    let constraints = assemble(&rows, &cols, blocks);
    let free = if constraints.nrows() == 0 { linalg::identity(constraints.ncols()) } else { S::kernel(&constraints) };
    let last = ss.len() - 1;
    let mut img_blocks = vec![(0, last, dbar_i(c, p, q - 1))];
    if last >= 1 {
        img_blocks.push((0, last - 1, del_i(c, p - 1, q)));
    }
    let image = assemble(&[dim_a], &cols, img_blocks);
    let scale = norm(&image);
    let bnd = S::column_basis(&clean(mul(&image, &free), scale));
    (z, bnd)
}

/// dim E_r^{p,q} from the chain condition, r ≥ 0.
pub fn chain_dim<S: Field>(c: &BigradedComplex<S>, r: usize, p: usize, q: usize) -> Result<usize> {
    let (z, bnd) = chain_spaces(c, r, p, q);
    let zr = z.ncols();
    if linalg::sum_dim(&z, &bnd) != zr {
        return Err(Error::Inconsistent(format!(
            "{}: chain boundaries escape the cycle space at r={r}, ({p},{q})",
            c.name
        )));
    }
    Ok(zr - S::rank(&bnd))
}

/// All chain-condition dims for r = 0..=max_page.
pub fn pages_by_chain_condition<S: Field>(c: &BigradedComplex<S>, max_page: usize) -> Result<Vec<BTreeMap<Bidegree, usize>>> {
    (0..=max_page)
        .map(|r| c.basis.all_bidegrees().into_iter().map(|(p, q)| Ok(((p, q), chain_dim(c, r, p, q)?))).collect())
        .collect()
}

/// Nested subspaces H_1 ⊇ H_2 ⊇ … with the induced d_r between them.
#[derive(Clone, Debug)]
pub struct HarmonicTower<S: Field> {
    pub name: String,
    pub basis: Arc<BigradedBasis>,
    /// frames[r−1][(p,q)]: columns spanning H_r^{p,q} inside Λ^{p,q}.
    pub frames: Vec<BTreeMap<Bidegree, DMatrix<S>>>,
    /// d[r−1][(p,q)]: H_r^{p,q} → H_r^{p+r,q−r+1} in frame coordinates.
    pub d: Vec<BTreeMap<Bidegree, DMatrix<S>>>,
}

/// Minimal-norm chain u_1, …, u_{r−1} for each column α of `alpha`;
/// returns the stacked u (rows ordered by l) or `None` if unsolvable.
pub fn min_norm_chain<S: Field>(c: &BigradedComplex<S>, r: usize, p: usize, q: usize, alpha: &DMatrix<S>) -> Option<Vec<DMatrix<S>>> {
    if r <= 1 {
        return Some(Vec::new());
    }
    let b = &c.basis;
    let (p, q) = (p as i64, q as i64);
    let (m, rhs_rows) = chain_operator(c, r, p, q);
    let da = mul(&del_i(c, p, q), alpha);
    let mut rhs = DMatrix::zeros(rhs_rows.iter().sum(), alpha.ncols());
    rhs.view_mut((0, 0), da.shape()).copy_from(&da);
    let u = if m.ncols() == 0 {
        if !negligible(&rhs, norm(alpha)) {
            return None;
        }
        DMatrix::zeros(0, alpha.ncols())
    } else {
        let scale = norm(&del_i(c, p, q)).max(1.0) * norm(alpha);
        S::min_norm_solve(&m, &rhs, scale)?
    };
    let mut out = Vec::new();
    let mut at = 0;
    for l in 1..r as i64 {
        let d = b.dim_i(p + l, q - l);
        out.push(u.rows(at, d).into_owned());
        at += d;
    }
    Some(out)
}

/// Operator (u_1, …, u_{r−1}) ↦ (∂̄u_1, ∂̄u_2 − ∂u_1, …) and its row dims.
fn chain_operator<S: Field>(c: &BigradedComplex<S>, r: usize, p: i64, q: i64) -> (DMatrix<S>, Vec<usize>) {
    let b = &c.basis;
    let cols: Vec<usize> = (1..r as i64).map(|l| b.dim_i(p + l, q - l)).collect();
    let rows: Vec<usize> = (1..r as i64).map(|l| b.dim_i(p + l, q - l + 1)).collect();
    let mut blocks = Vec::new();
    for l in 1..r as i64 {
        let i = (l - 1) as usize;
        blocks.push((i, i, dbar_i(c, p + l, q - l)));
        if l >= 2 {
            blocks.push((i, i - 1, -del_i(c, p + l - 1, q - l + 1)));
        }
    }
    (assemble(&rows, &cols, blocks), rows)
}

/// ∂u_{r−1} (or ∂α when r = 1) for the minimal-norm chain.
pub fn chain_end<S: Field>(c: &BigradedComplex<S>, r: usize, p: usize, q: usize, alpha: &DMatrix<S>) -> Option<DMatrix<S>> {
    let u = min_norm_chain(c, r, p, q, alpha)?;
    let last = r as i64 - 1;
    let (lp, lq) = (p as i64 + last, q as i64 - last);
    let x = if r <= 1 { alpha.clone() } else { u.last().cloned().unwrap() };
    Some(mul(&del_i(c, lp, lq), &x))
}

/// Coordinates of the orthogonal projection of `y` onto span(frame).
fn frame_coords<S: Field>(frame: &DMatrix<S>, y: &DMatrix<S>) -> DMatrix<S> {
    let fh = adj(frame);
    S::solve(&mul(&fh, frame), &mul(&fh, y)).expect("frame columns are independent")
}

fn harmonic_first<S: Field>(c: &BigradedComplex<S>, p: usize, q: usize) -> DMatrix<S> {
    let (pi, qi) = (p as i64, q as i64);
    let dbar = dbar_i(c, pi, qi);
    let ker = if dbar.nrows() == 0 { linalg::identity(dbar.ncols()) } else { S::kernel(&dbar) };
    let incoming = dbar_i(c, pi, qi - 1);
    let im = if incoming.ncols() == 0 { DMatrix::zeros(ker.nrows(), 0) } else { S::column_basis(&incoming) };
    orth_complement_in(&ker, &im)
}

/// H_1 = ker ∂̄ ∩ ker ∂̄*, then H_{r+1} = (Im d_r)^⊥ ∩ ker d_r inside H_r,
/// with d_r α = P_r(∂u_{r−1}) for minimal-norm chains.
pub fn harmonic_tower<S: Field>(c: &BigradedComplex<S>) -> Result<HarmonicTower<S>> {
    let b = c.basis.clone();
    let n = b.n;
    let top = n + 1;
    let scale = norm(&c.full_del()).max(1.0);
    let mut frames = vec![b.all_bidegrees().into_iter().map(|(p, q)| ((p, q), harmonic_first(c, p, q))).collect::<BTreeMap<_, _>>()];
    let mut ds = Vec::new();
    for r in 1..=top {
        let cur = &frames[r - 1];
        let mut dr = BTreeMap::new();
        for (p, q) in b.all_bidegrees() {
            let f = &cur[&(p, q)];
            let (tp, tq) = (p + r, q as i64 - r as i64 + 1);
            if tp > n || tq < 0 || tq as usize > n {
                continue;
            }
            let tgt = &cur[&(tp, tq as usize)];
            let m = if f.ncols() == 0 || tgt.ncols() == 0 {
                // still require the chain to exist
                if f.ncols() > 0 && chain_end(c, r, p, q, f).is_none() {
                    return Err(chain_error(c, r, p, q));
                }
                DMatrix::zeros(tgt.ncols(), f.ncols())
            } else {
                let y = chain_end(c, r, p, q, f).ok_or_else(|| chain_error(c, r, p, q))?;
                clean(frame_coords(tgt, &y), scale.powi(r as i32))
            };
            dr.insert((p, q), m);
        }
        let mut next = BTreeMap::new();
        for (p, q) in b.all_bidegrees() {
            let f = &cur[&(p, q)];
            let ker = match dr.get(&(p, q)) {
                Some(m) if m.nrows() > 0 && f.ncols() > 0 => mul(f, &S::kernel(m)),
                _ => f.clone(),
            };
            let (sp, sq) = (p as i64 - r as i64, q as i64 + r as i64 - 1);
            let im = if sp >= 0 && sq >= 0 && (sq as usize) <= n {
                match dr.get(&(sp as usize, sq as usize)) {
                    Some(m) if m.ncols() > 0 && f.ncols() > 0 => mul(f, m),
                    _ => DMatrix::zeros(f.nrows(), 0),
                }
            } else {
                DMatrix::zeros(f.nrows(), 0)
            };
            let im = if im.ncols() > 0 { S::column_basis(&im) } else { im };
            next.insert((p, q), orth_complement_in(&ker, &im));
        }
        ds.push(dr);
        frames.push(next);
    }
    Ok(HarmonicTower { name: c.name.clone(), basis: b, frames, d: ds })
}

fn chain_error<S: Field>(c: &BigradedComplex<S>, r: usize, p: usize, q: usize) -> Error {
    Error::Inconsistent(format!("{}: chain equation unsolvable for an element of H_{r}^{{{p},{q}}}", c.name))
}

impl<S: Field> HarmonicTower<S> {
    pub fn levels(&self) -> usize {
        self.frames.len()
    }

    /// dim H_r^{p,q}, r ≥ 1; r = 0 gives Λ^{p,q}.
    pub fn dim(&self, r: usize, p: usize, q: usize) -> usize {
        if r == 0 {
            return self.basis.dim(p, q);
        }
        let r = r.min(self.frames.len());
        self.frames[r - 1].get(&(p, q)).map_or(0, |f| f.ncols())
    }

    pub fn frame(&self, r: usize, p: usize, q: usize) -> &DMatrix<S> {
        &self.frames[r.min(self.frames.len()) - 1][&(p, q)]
    }

    pub fn d_r(&self, r: usize, p: usize, q: usize) -> Option<&DMatrix<S>> {
        self.d.get(r - 1)?.get(&(p, q))
    }

    /// Frame of (ker d_l)^⊥ inside H_l^{p,q}.
    pub fn coimage(&self, l: usize, p: usize, q: usize) -> DMatrix<S> {
        let f = self.frame(l, p, q);
        match self.d_r(l, p, q) {
            Some(m) if m.nrows() > 0 && f.ncols() > 0 => {
                let ker = mul(f, &S::kernel(m));
                orth_complement_in(f, &ker)
            }
            _ => DMatrix::zeros(f.nrows(), 0),
        }
    }

    /// Largest distance of an H_{r+1} frame column from span H_r.
    pub fn nesting_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 1..self.frames.len() {
            for (&(p, q), f) in &self.frames[r] {
                if f.ncols() == 0 {
                    continue;
                }
                let outer = &self.frames[r - 1][&(p, q)];
                let proj = mul(outer, &frame_coords(outer, f));
                worst = worst.max(norm(&(proj - f)) / norm(f).max(1e-300));
            }
        }
        worst
    }
}

/// Bound constants C_r^{p,q} = ‖P_r ∘ T_r‖ on H_r^{p,q}, where T_r α = ∂u_{r−1}
/// with the minimal-norm chain, and the matching ‖T_r‖.
pub fn projection_bounds<S: Field>(c: &BigradedComplex<S>, tower: &HarmonicTower<S>) -> Result<Vec<BTreeMap<Bidegree, (f64, f64)>>> {
    let mut out = Vec::new();
    for r in 1..=tower.d.len() {
        let mut m = BTreeMap::new();
        for (&(p, q), dm) in &tower.d[r - 1] {
            let f = tower.frame(r, p, q);
            if f.ncols() == 0 {
                continue;
            }
            let tgt = tower.frame(r, p + r, q + 1 - r);
            let y = chain_end(c, r, p, q, f).ok_or_else(|| chain_error(c, r, p, q))?;
            let g = to_c64(&(adj(f) * f));
            let proj = if tgt.ncols() > 0 { to_c64(&(tgt * dm)) } else { DMatrix::zeros(y.nrows(), f.ncols()) };
            let opn = |a: &DMatrix<C64>| {
                let ev = crate::linalg::float::generalized_eigenvalues(&(a.adjoint() * a), &g).unwrap_or_default();
                ev.last().copied().unwrap_or(0.0).max(0.0).sqrt()
            };
            m.insert((p, q), (opn(&proj), opn(&to_c64(&y))));
        }
        out.push(m);
    }
    Ok(out)
}

/// Change of P_r(∂u_{r−1}) when the minimal-norm chain is replaced by random
/// other chains for the same α; zero when d_r is well defined.
pub fn d_r_choice_residual<S: Field>(c: &BigradedComplex<S>, tower: &HarmonicTower<S>, r: usize, p: usize, q: usize, seed: u64) -> Result<f64> {
    let f = tower.frame(r, p, q);
    let tp = p + r;
    let tq = q as i64 + 1 - r as i64;
    if f.ncols() == 0 || r < 2 || tp > c.n() || tq < 0 {
        return Ok(0.0);
    }
    let tgt = tower.frame(r, tp, tq as usize);
    if tgt.ncols() == 0 {
        return Ok(0.0);
    }
    let base = tower.d_r(r, p, q).cloned().unwrap_or_else(|| DMatrix::zeros(0, 0));
    let (m, _) = chain_operator(c, r, p as i64, q as i64);
    let hom = S::kernel(&m);
    if hom.ncols() == 0 {
        return Ok(0.0);
    }
    let u = min_norm_chain(c, r, p, q, f).ok_or_else(|| chain_error(c, r, p, q))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mix = DMatrix::<S>::zeros(hom.ncols(), f.ncols());
    for x in mix.iter_mut() {
        *x = S::from_i64(rng.random_range(-3..=3));
    }
    let shift = mul(&hom, &mix);
    let last = u.last().unwrap();
    let off: usize = u[..u.len() - 1].iter().map(|x| x.nrows()).sum();
    let alt = last + shift.rows(off, last.nrows());
    let lp = p as i64 + r as i64 - 1;
    let lq = q as i64 - r as i64 + 1;
    let y = mul(&del_i(c, lp, lq), &alt);
    let coords = frame_coords(tgt, &y);
    Ok(norm(&(coords - base)))
}

/// Zig-zag lift α − u_1 + u_2 − … of an element with a length-l chain, as a
/// vector in degree-(p+q) coordinates.
pub fn zigzag_lift<S: Field>(c: &BigradedComplex<S>, l: usize, p: usize, q: usize, alpha: &DMatrix<S>) -> Option<DMatrix<S>> {
    let b = &c.basis;
    let k = p + q;
    let u = min_norm_chain(c, l, p, q, alpha)?;
    let mut out = DMatrix::zeros(b.degree_dim(k), alpha.ncols());
    let place = |out: &mut DMatrix<S>, pp: usize, qq: usize, m: &DMatrix<S>, sign: bool| {
        if m.nrows() == 0 {
            return;
        }
        let o = b.offset_in_degree(pp, qq);
        let mut v = out.view_mut((o, 0), m.shape());
        if sign {
            v -= m;
        } else {
            v += m;
        }
    };
    place(&mut out, p, q, alpha, false);
    for (j, uj) in u.iter().enumerate() {
        let j1 = j + 1;
        if uj.nrows() > 0 {
            place(&mut out, p + j1, q - j1, uj, j1 % 2 == 1);
        }
    }
    Some(out)
}

/// Aggregated bookkeeping over pages.
#[derive(Clone, Debug, Serialize)]
pub struct PageStatistics {
    pub betti: Vec<usize>,
    /// degree_dims[r][k] = dim E_r^k
    pub degree_dims: Vec<Vec<usize>>,
    /// m[r][k]
    pub m: Vec<Vec<usize>>,
    pub degeneration_page: usize,
    pub degeneration_by_degree: Vec<usize>,
    /// (r, k) where dim E_r^k ≠ b_k + m_r^{k−1} + m_r^k
    pub dimension_identity_failures: Vec<(usize, usize)>,
    /// (r, k) where dim E_r^k ≠ dim E_r^{2n−k}
    pub duality_failures: Vec<(usize, usize)>,
    pub euler: Vec<i64>,
    pub euler_betti: i64,
    /// (r, p, q) where dim E_{r+1} ≠ dim ker d_r − rank of the incoming d_r
    pub page_recursion_failures: Vec<(usize, usize, usize)>,
    /// (r, p, q) where d_r ∘ d_r ≠ 0
    pub d_squared_failures: Vec<(usize, usize, usize)>,
    pub monotone: bool,
}

impl PageStatistics {
    pub fn all_hold(&self) -> bool {
        self.dimension_identity_failures.is_empty()
            && self.duality_failures.is_empty()
            && self.page_recursion_failures.is_empty()
            && self.d_squared_failures.is_empty()
            && self.monotone
            && self.euler.iter().all(|&e| e == self.euler_betti)
    }
}

pub fn page_statistics<S: Field>(pages: &SpectralPageSet<S>) -> PageStatistics {
    let n = pages.n();
    let b = &pages.basis;
    let rmax = pages.max_page;
    let degree_dims: Vec<Vec<usize>> = (0..=rmax).map(|r| (0..=2 * n).map(|k| pages.degree_dim(r, k)).collect()).collect();
    let m: Vec<Vec<usize>> = (0..=rmax).map(|r| (0..=2 * n).map(|k| pages.m(r, k)).collect()).collect();
    let mut dim_fail = Vec::new();
    let mut dual_fail = Vec::new();
    let mut rec_fail = Vec::new();
    let mut dd_fail = Vec::new();
    for r in 0..=rmax {
        for k in 0..=2 * n {
            let prev = if k == 0 { 0 } else { m[r][k - 1] };
            if degree_dims[r][k] != pages.betti[k] + prev + m[r][k] {
                dim_fail.push((r, k));
            }
            if degree_dims[r][k] != degree_dims[r][2 * n - k] {
                dual_fail.push((r, k));
            }
        }
        for (p, q) in b.all_bidegrees() {
            if r < rmax {
                let out = pages.d[r].get(&(p, q));
                let ker = pages.dim(r, p, q) - out.map_or(0, |x| S::rank(x));
                let (sp, sq) = (p as i64 - r as i64, q as i64 + r as i64 - 1);
                let inc = if sp >= 0 && sq >= 0 { pages.rank_d(r, sp as usize, sq as usize) } else { 0 };
                if pages.dim(r + 1, p, q) != ker - inc {
                    rec_fail.push((r, p, q));
                }
            }
            if let (Some(first), true) = (pages.d[r].get(&(p, q)), q + 1 >= r) {
                if let Some(second) = pages.d[r].get(&(p + r, q + 1 - r)) {
                    if first.nrows() > 0 && !negligible(&mul(second, first), 1.0) {
                        dd_fail.push((r, p, q));
                    }
                }
            }
        }
    }
    let monotone = (1..=rmax).all(|r| b.all_bidegrees().iter().all(|&(p, q)| pages.dim(r, p, q) <= pages.dim(r - 1, p, q)));
    let alt = |v: &[usize]| v.iter().enumerate().map(|(k, &d)| if k % 2 == 0 { d as i64 } else { -(d as i64) }).sum::<i64>();
    let euler = degree_dims.iter().map(|v| alt(v)).collect();
    PageStatistics {
        betti: pages.betti.clone(),
        degeneration_page: pages.degeneration_page(),
        degeneration_by_degree: (0..=2 * n).map(|k| pages.degeneration_page_in_degree(k)).collect(),
        degree_dims,
        m,
        dimension_identity_failures: dim_fail,
        duality_failures: dual_fail,
        euler,
        euler_betti: alt(&pages.betti),
        page_recursion_failures: rec_fail,
        d_squared_failures: dd_fail,
        monotone,
    }
}

/// Largest component of d ζ below filtration level p+r, over zig-zag lifts ζ
/// of L_r^{p,q} = ⊕_{l≥r} (ker d_l)^⊥ ⊆ H_l^{p,q}; zero when d(L_r^{p,q}) ⊆ A_{p+r}.
pub fn inclusion_residual<S: Field>(c: &BigradedComplex<S>, tower: &HarmonicTower<S>, r: usize) -> Result<f64> {
    let b = &c.basis;
    let mut worst = 0.0f64;
    for (p, q) in b.all_bidegrees() {
        let k = p + q;
        if k == 2 * b.n {
            continue;
        }
        let dk = c.assemble_total(k, None)?;
        for l in r.max(1)..=tower.d.len() {
            let co = tower.coimage(l, p, q);
            if co.ncols() == 0 {
                continue;
            }
            let z = zigzag_lift(c, l, p, q, &co).ok_or_else(|| chain_error(c, l, p, q))?;
            let dz = mul(&dk, &z);
            let cut = fstart(b, k + 1, (p + r) as i64);
            let low = dz.rows(0, cut).into_owned();
            let rel = norm(&low) / norm(&dz).max(1e-300);
            if S::EXACT && !linalg::is_zero_matrix(&low) {
                worst = worst.max(rel.max(1.0));
            } else {
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

/// d_r of the tower assembled on ⊕_{p+q=k} H_r^{p,q} → ⊕_{p+q=k+1} H_r^{p,q}.
fn tower_degree_map<S: Field>(tower: &HarmonicTower<S>, r: usize, k: usize) -> DMatrix<S> {
    let b = &tower.basis;
    let src: Vec<Bidegree> = b.bidegrees(k);
    let tgt: Vec<Bidegree> = b.bidegrees(k + 1);
    let cols: Vec<usize> = src.iter().map(|&(p, q)| tower.dim(r, p, q)).collect();
    let rows: Vec<usize> = tgt.iter().map(|&(p, q)| tower.dim(r, p, q)).collect();
    let mut blocks = Vec::new();
    for (j, &(p, q)) in src.iter().enumerate() {
        if let Some(m) = tower.d_r(r, p, q) {
            if let Some(i) = tgt.iter().position(|&t| t == (p + r, q + 1 - r)) {
                blocks.push((i, j, m.clone()));
            }
        }
    }
    assemble(&rows, &cols, blocks)
}

/// Eigenvalues (ascending) of d_r d_r* + d_r* d_r on ⊕_{p+q=k} H_r^{p,q},
/// with orthonormal frames.
pub fn formal_page_laplacian(tower: &HarmonicTower<C64>, r: usize, k: usize) -> Vec<f64> {
    let out = tower_degree_map(tower, r, k);
    let mut lap = out.adjoint() * &out;
    if k > 0 {
        let inc = tower_degree_map(tower, r, k - 1);
        lap += &inc * inc.adjoint();
    }
    crate::linalg::float::hermitian_eigenvalues(&lap)
}

/// Per-page disagreement between the three methods.
#[derive(Clone, Debug, Serialize)]
pub struct CrossValidation {
    pub pages_checked: usize,
    /// (r, p, q, filtration, chain, tower)
    pub mismatches: Vec<(usize, usize, usize, usize, usize, usize)>,
}

impl CrossValidation {
    pub fn agree(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn cross_validate<S: Field>(c: &BigradedComplex<S>) -> Result<(SpectralPageSet<S>, HarmonicTower<S>, CrossValidation)> {
    let pages = pages_by_filtration(c)?;
    let chain = pages_by_chain_condition(c, pages.max_page)?;
    let tower = harmonic_tower(c)?;
    let mut mismatches = Vec::new();
    for r in 0..=pages.max_page {
        for (p, q) in c.basis.all_bidegrees() {
            let f = pages.dim(r, p, q);
            let ch = chain[r][&(p, q)];
            let t = tower.dim(r, p, q);
            if f != ch || f != t {
                mismatches.push((r, p, q, f, ch, t));
            }
        }
    }
    let pages_checked = pages.max_page + 1;
    Ok((pages, tower, CrossValidation { pages_checked, mismatches }))
}

/// Like [`cross_validate`] but an error on any disagreement.
pub fn checked_pages<S: Field>(c: &BigradedComplex<S>) -> Result<(SpectralPageSet<S>, HarmonicTower<S>)> {
    let (pages, tower, cv) = cross_validate(c)?;
    if let Some(&(r, p, q, f, ch, t)) = cv.mismatches.first() {
        return Err(Error::Inconsistent(format!(
            "{}: E_{r}^{{{p},{q}}} is {f} by filtration, {ch} by chains, {t} by the harmonic tower",
            c.name
        )));
    }
    Ok((pages, tower))
}
