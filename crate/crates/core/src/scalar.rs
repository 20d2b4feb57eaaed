//! Scalar fields used by the dual exact/float path.
//!
//! `GaussRat` is an exact Gaussian rational (`Complex<BigRational>`);
//! `C64` is the float side.  Both implement [`Field`], which carries the
//! rank/kernel/solve primitives so that page computations can be written
//! once and run on either.

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, Neg, SubAssign};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg;

pub type C64 = Complex64;
pub type GaussRat = Complex<BigRational>;

pub trait Field:
    nalgebra::Scalar
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    const EXACT: bool;

    fn conj(&self) -> Self;
    fn from_gauss(q: &GaussRat) -> Self;
    fn to_c64(&self) -> C64;

    fn rank(m: &DMatrix<Self>) -> usize;
    /// Columns spanning the null space of `m`.
    fn kernel(m: &DMatrix<Self>) -> DMatrix<Self>;
    /// Linearly independent columns spanning the column space of `m`.
    fn column_basis(m: &DMatrix<Self>) -> DMatrix<Self>;
    /// Indices of the columns that are independent of the ones before them.
    fn pivots(m: &DMatrix<Self>) -> Vec<usize>;
    /// Some `x` with `a x = b`, or `None` if the system is inconsistent.
    fn solve(a: &DMatrix<Self>, b: &DMatrix<Self>) -> Option<DMatrix<Self>>;
    /// The solution of `a x = b` orthogonal to ker a (minimal norm). `scale`
    /// is the magnitude b would have without cancellation; float residuals
    /// are judged against it.
    fn min_norm_solve(a: &DMatrix<Self>, b: &DMatrix<Self>, _scale: f64) -> Option<DMatrix<Self>> {
        let ah = crate::linalg::adj(a);
        let y = Self::solve(&(a * &ah), b)?;
        Some(ah * y)
    }

    /// Coefficient in this field; `None` if exactness is required but absent.
    fn lift(c: &Coeff) -> Option<Self>;

    fn from_i64(v: i64) -> Self {
        Self::from_gauss(&Complex::new(BigRational::from_integer(v.into()), BigRational::zero()))
    }
}

impl Field for GaussRat {
    const EXACT: bool = true;

    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn from_gauss(q: &GaussRat) -> Self {
        q.clone()
    }
    fn lift(c: &Coeff) -> Option<Self> {
        c.exact.clone()
    }
    fn to_c64(&self) -> C64 {
        C64::new(rat_to_f64(&self.re), rat_to_f64(&self.im))
    }
    fn rank(m: &DMatrix<Self>) -> usize {
        linalg::exact::rank(m)
    }
    fn kernel(m: &DMatrix<Self>) -> DMatrix<Self> {
        linalg::exact::kernel(m)
    }
    fn column_basis(m: &DMatrix<Self>) -> DMatrix<Self> {
        linalg::exact::column_basis(m)
    }
    fn pivots(m: &DMatrix<Self>) -> Vec<usize> {
        if m.is_empty() {
            return Vec::new();
        }
        linalg::exact::rref(m).1
    }
    fn solve(a: &DMatrix<Self>, b: &DMatrix<Self>) -> Option<DMatrix<Self>> {
        linalg::exact::solve(a, b)
    }
}

impl Field for C64 {
    const EXACT: bool = false;

    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn from_gauss(q: &GaussRat) -> Self {
        q.to_c64()
    }
    fn lift(c: &Coeff) -> Option<Self> {
        Some(c.value)
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn rank(m: &DMatrix<Self>) -> usize {
        linalg::float::rank(m)
    }
    fn kernel(m: &DMatrix<Self>) -> DMatrix<Self> {
        linalg::float::kernel(m)
    }
    fn column_basis(m: &DMatrix<Self>) -> DMatrix<Self> {
        linalg::float::column_basis(m)
    }
    fn pivots(m: &DMatrix<Self>) -> Vec<usize> {
        // greedy rank growth
        let mut out = Vec::new();
        let mut r = 0;
        for j in 0..m.ncols() {
            let rr = linalg::float::rank(&m.columns(0, j + 1).into_owned());
            if rr > r {
                out.push(j);
                r = rr;
            }
        }
        out
    }
    fn solve(a: &DMatrix<Self>, b: &DMatrix<Self>) -> Option<DMatrix<Self>> {
        linalg::float::solve(a, b)
    }
    fn min_norm_solve(a: &DMatrix<Self>, b: &DMatrix<Self>, scale: f64) -> Option<DMatrix<Self>> {
        let x = linalg::float::pinv(a, linalg::float::RANK_RTOL) * b;
        let res = (a * &x - b).norm();
        (res <= 1e-8 * (a.norm() * x.norm() + b.norm() + scale)).then_some(x)
    }
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // huge numerator/denominator: scale down before converting
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
            let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (r.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

/// A number read from input: exact when given as an integer or `"p/q"`.
#[derive(Clone, Debug, PartialEq)]
pub struct Number {
    pub exact: Option<BigRational>,
    pub value: f64,
}

impl Number {
    pub fn int(v: i64) -> Self {
        Number { exact: Some(BigRational::from_integer(v.into())), value: v as f64 }
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        let r = BigRational::new(p.into(), q.into());
        let value = rat_to_f64(&r);
        Number { exact: Some(r), value }
    }

    pub fn from_json(v: &serde_json::Value, path: &str) -> Result<Self> {
        match v {
            serde_json::Value::Number(x) => {
                if let Some(i) = x.as_i64() {
                    Ok(Number::int(i))
                } else {
                    let f = x.as_f64().ok_or_else(|| Error::Parse(format!("{path}: not a number")))?;
                    Ok(Number { exact: None, value: f })
                }
            }
            serde_json::Value::String(s) => Self::parse_str(s)
                .ok_or_else(|| Error::Parse(format!("{path}: cannot read number {s:?}"))),
            _ => Err(Error::Parse(format!("{path}: expected a number or \"p/q\" string"))),
        }
    }

    pub fn parse_str(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let p: BigInt = a.trim().parse().ok()?;
            let q: BigInt = b.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            let r = BigRational::new(p, q);
            let value = rat_to_f64(&r);
            return Some(Number { exact: Some(r), value });
        }
        if let Ok(p) = s.parse::<BigInt>() {
            let r = BigRational::from_integer(p);
            let value = rat_to_f64(&r);
            return Some(Number { exact: Some(r), value });
        }
        let f: f64 = s.parse().ok()?;
        Some(Number { exact: None, value: f })
    }
}

/// Complex coefficient with an optional exact value.
#[derive(Clone, Debug, PartialEq)]
pub struct Coeff {
    pub exact: Option<GaussRat>,
    pub value: C64,
}

impl Coeff {
    pub fn new(re: Number, im: Number) -> Self {
        let exact = match (re.exact, im.exact) {
            (Some(a), Some(b)) => Some(Complex::new(a, b)),
            _ => None,
        };
        Coeff { exact, value: C64::new(re.value, im.value) }
    }

    pub fn real(p: i64, q: i64) -> Self {
        Coeff::new(Number::ratio(p, q), Number::int(0))
    }

    pub fn imag(p: i64, q: i64) -> Self {
        Coeff::new(Number::int(0), Number::ratio(p, q))
    }

    pub fn is_zero(&self) -> bool {
        match &self.exact {
            Some(q) => q.is_zero(),
            None => self.value == C64::zero(),
        }
    }

    pub fn display(&self) -> String {
        match &self.exact {
            Some(q) => fmt_gauss(q),
            None => format!("{}", self.value),
        }
    }
}

pub fn fmt_gauss(q: &GaussRat) -> String {
    match (q.re.is_zero(), q.im.is_zero()) {
        (true, true) => "0".into(),
        (false, true) => q.re.to_string(),
        (true, false) => format!("{}i", q.im),
        (false, false) => {
            let sign = if q.im.is_negative() { "-" } else { "+" };
            format!("{}{}{}i", q.re, sign, q.im.abs())
        }
    }
}

pub fn gauss(re: (i64, i64), im: (i64, i64)) -> GaussRat {
    Complex::new(BigRational::new(re.0.into(), re.1.into()), BigRational::new(im.0.into(), im.1.into()))
}
