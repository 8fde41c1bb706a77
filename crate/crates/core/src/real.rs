//! Adaptive-precision real numbers.
//!
//! A [`Real`] is an expression DAG over exact rationals, isolated roots of
//! rational polynomials and `exp` of rationals. Every node can produce a
//! rigorous enclosure at any working scale: first a cheap outward-rounded
//! `f64` interval, then dyadic intervals `[lo, hi] * 2^-s` over big integers
//! with `s` doubling up to the configured bit budget. Comparisons refine
//! until the enclosures separate and report
//! [`RealError::IndeterminateComparison`] when the budget runs out.
//!
//! Values that are exactly rational stay exact: arithmetic between exact
//! operands folds eagerly, so ties between rational quantities are decided
//! exactly instead of timing out.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU32, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::poly::Poly;

pub const DEFAULT_BIT_BUDGET: u32 = 4096;
const FIRST_SCALE: u32 = 64;

static BIT_BUDGET: AtomicU32 = AtomicU32::new(DEFAULT_BIT_BUDGET);

/// Current maximum working precision in bits.
pub fn bit_budget() -> u32 {
    BIT_BUDGET.load(AtomicOrdering::Relaxed)
}

/// Sets the process-wide precision budget (clamped to at least 64 bits).
pub fn set_bit_budget(bits: u32) {
    BIT_BUDGET.store(bits.max(FIRST_SCALE), AtomicOrdering::Relaxed);
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RealError {
    #[error("comparison could not be decided within {bits} bits")]
    IndeterminateComparison { bits: u32 },
}

/// Immutable handle to a real number; cloning is cheap.
#[derive(Clone)]
pub struct Real(Arc<Node>);

struct Node {
    expr: Expr,
    f64_cache: OnceLock<Option<(f64, f64)>>,
    big_cache: Mutex<Vec<(u32, Option<(BigInt, BigInt)>)>>,
}

enum Expr {
    Exact(BigRational),
    Root(RootCell),
    Add(Real, Real),
    Sub(Real, Real),
    Mul(Real, Real),
    Div(Real, Real),
    Neg(Real),
    Exp(BigRational),
    Powi(Real, i32),
}

/// Simple real root of a square-free polynomial, bracketed by a rational
/// interval with a strict sign change. Refinement only ever shrinks it.
struct RootCell {
    poly: Poly,
    bracket: Mutex<Bracket>,
}

struct Bracket {
    lo: BigRational,
    hi: BigRational,
    sign_lo: i32,
}

impl Real {
    fn from_expr(expr: Expr) -> Self {
        Real(Arc::new(Node {
            expr,
            f64_cache: OnceLock::new(),
            big_cache: Mutex::new(Vec::new()),
        }))
    }

    pub fn from_rational(q: BigRational) -> Self {
        Self::from_expr(Expr::Exact(q))
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(n.into()))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Self::from_rational(BigRational::from_integer(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::from_rational(BigRational::new(n.into(), d.into()))
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    /// The unique root of `poly` strictly inside `(lo, hi)`.
    ///
    /// `poly` must be square-free with exactly one real root in the open
    /// interval and nonzero values at both ends. Linear polynomials fold to
    /// an exact rational.
    pub fn algebraic(poly: Poly, lo: BigRational, hi: BigRational) -> Self {
        if poly.degree() == Some(1) {
            let c = poly.coeffs();
            return Self::from_rational(-&c[0] / &c[1]);
        }
        let sign_lo = poly.sign_at(&lo);
        debug_assert!(sign_lo != 0 && poly.sign_at(&hi) == -sign_lo);
        Self::from_expr(Expr::Root(RootCell {
            poly,
            bracket: Mutex::new(Bracket { lo, hi, sign_lo }),
        }))
    }

    /// `e^q` for rational `q`.
    pub fn exp_rational(q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::one();
        }
        Self::from_expr(Expr::Exp(q.clone()))
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match &self.0.expr {
            Expr::Exact(q) => Some(q),
            _ => None,
        }
    }

    pub fn powi(&self, n: i32) -> Self {
        if let Some(q) = self.exact() {
            if n >= 0 {
                return Self::from_rational(num_traits::pow(q.clone(), n as usize));
            }
            if !q.is_zero() {
                return Self::from_rational(num_traits::pow(q.recip(), n.unsigned_abs() as usize));
            }
        }
        match n {
            0 => Self::one(),
            1 => self.clone(),
            _ => Self::from_expr(Expr::Powi(self.clone(), n)),
        }
    }

    pub fn recip(&self) -> Self {
        &Self::one() / self
    }

    /// Polynomial with rational coefficients evaluated at `self` (Horner).
    pub fn eval_poly(&self, p: &Poly) -> Self {
        p.coeffs()
            .iter()
            .rev()
            .fold(Real::zero(), |acc, c| &(&acc * self) + &Real::from_rational(c.clone()))
    }

    /// Integer linear combination `sum k_i * x_i`.
    pub fn linear_combination<'a, I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (i64, &'a Real)>,
    {
        let mut exact = BigRational::zero();
        let mut rest: Option<Real> = None;
        for (k, x) in terms {
            if k == 0 {
                continue;
            }
            if let Some(q) = x.exact() {
                exact += q * BigRational::from_integer(k.into());
                continue;
            }
            let term = if k == 1 { x.clone() } else { &Real::from_int(k) * x };
            rest = Some(match rest {
                None => term,
                Some(r) => &r + &term,
            });
        }
        match rest {
            None => Real::from_rational(exact),
            Some(r) if exact.is_zero() => r,
            Some(r) => &r + &Real::from_rational(exact),
        }
    }

    /// Rigorous `f64` enclosure, if the expression is finite at that level.
    pub fn enclosure_f64(&self) -> Option<(f64, f64)> {
        *self.0.f64_cache.get_or_init(|| self.compute_f64())
    }

    /// Rigorous dyadic enclosure `[lo, hi] * 2^-scale`, `None` when a
    /// division by an interval containing zero blocks evaluation.
    pub fn enclosure(&self, scale: u32) -> Option<(BigInt, BigInt)> {
        {
            let cache = self.0.big_cache.lock().unwrap();
            if let Some((_, v)) = cache.iter().find(|(s, _)| *s == scale) {
                return v.clone();
            }
        }
        let v = self.compute_big(scale);
        let mut cache = self.0.big_cache.lock().unwrap();
        if !cache.iter().any(|(s, _)| *s == scale) {
            if cache.len() >= 4 {
                cache.remove(0);
            }
            cache.push((scale, v.clone()));
        }
        v
    }

    /// Midpoint approximation, for display and diagnostics only.
    pub fn to_f64(&self) -> f64 {
        if let Some(q) = self.exact() {
            return q.to_f64().unwrap_or(f64::NAN);
        }
        if let Some((lo, hi)) = self.enclosure_f64() {
            return 0.5 * (lo + hi);
        }
        match self.enclosure(128) {
            Some((lo, hi)) => {
                let mid = BigRational::new(lo + hi, BigInt::one() << 129usize);
                mid.to_f64().unwrap_or(f64::NAN)
            }
            None => f64::NAN,
        }
    }

    /// Decimal string with `digits` significant digits (display precision).
    pub fn to_decimal(&self, digits: usize) -> String {
        let q = match self.exact() {
            Some(q) => q.clone(),
            None => {
                let scale = (digits as u32) * 4 + 96;
                let (lo, hi) = self
                    .enclosure(scale)
                    .or_else(|| self.enclosure(scale * 2))
                    .unwrap_or_default();
                BigRational::new(lo + hi, BigInt::one() << (scale as usize + 1))
            }
        };
        format_significant(&q, digits)
    }

    pub fn cmp_real(&self, other: &Real) -> Result<Ordering, RealError> {
        self.cmp_within(other, bit_budget())
    }

    /// Compare with an explicit precision budget.
    pub fn cmp_within(&self, other: &Real, budget: u32) -> Result<Ordering, RealError> {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ok(Ordering::Equal);
        }
        if let (Some(a), Some(b)) = (self.exact(), other.exact()) {
            return Ok(a.cmp(b));
        }
        if let (Some((alo, ahi)), Some((blo, bhi))) = (self.enclosure_f64(), other.enclosure_f64()) {
            if ahi < blo {
                return Ok(Ordering::Less);
            }
            if bhi < alo {
                return Ok(Ordering::Greater);
            }
        }
        let mut scale = FIRST_SCALE;
        loop {
            if let (Some((alo, ahi)), Some((blo, bhi))) = (self.enclosure(scale), other.enclosure(scale)) {
                if ahi < blo {
                    return Ok(Ordering::Less);
                }
                if bhi < alo {
                    return Ok(Ordering::Greater);
                }
                if alo == ahi && blo == bhi && alo == blo {
                    // both enclosures collapsed to the same point
                    return Ok(Ordering::Equal);
                }
            }
            if scale >= budget {
                return Err(RealError::IndeterminateComparison { bits: budget });
            }
            scale = (scale * 2).min(budget);
        }
    }

    pub fn lt(&self, other: &Real) -> Result<bool, RealError> {
        Ok(self.cmp_real(other)? == Ordering::Less)
    }

    pub fn le(&self, other: &Real) -> Result<bool, RealError> {
        Ok(self.cmp_real(other)? != Ordering::Greater)
    }

    pub fn gt(&self, other: &Real) -> Result<bool, RealError> {
        Ok(self.cmp_real(other)? == Ordering::Greater)
    }

    pub fn ge(&self, other: &Real) -> Result<bool, RealError> {
        Ok(self.cmp_real(other)? != Ordering::Less)
    }

    pub fn signum(&self) -> Result<i32, RealError> {
        Ok(match self.cmp_real(&Real::zero())? {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        })
    }

    fn compute_f64(&self) -> Option<(f64, f64)> {
        let out = match &self.0.expr {
            Expr::Exact(q) => rational_f64_enclosure(q),
            Expr::Root(cell) => {
                let (lo, hi) = cell.enclose(64);
                let lo = BigRational::new(lo, BigInt::one() << 64usize);
                let hi = BigRational::new(hi, BigInt::one() << 64usize);
                Some((rational_f64_enclosure(&lo)?.0, rational_f64_enclosure(&hi)?.1))
            }
            Expr::Add(a, b) => {
                let (a, b) = (a.enclosure_f64()?, b.enclosure_f64()?);
                Some((down(a.0 + b.0), up(a.1 + b.1)))
            }
            Expr::Sub(a, b) => {
                let (a, b) = (a.enclosure_f64()?, b.enclosure_f64()?);
                Some((down(a.0 - b.1), up(a.1 - b.0)))
            }
            Expr::Neg(a) => {
                let a = a.enclosure_f64()?;
                Some((-a.1, -a.0))
            }
            Expr::Mul(a, b) => mul_f64(a.enclosure_f64()?, b.enclosure_f64()?),
            Expr::Div(a, b) => {
                let (a, b) = (a.enclosure_f64()?, b.enclosure_f64()?);
                if b.0 <= 0.0 && b.1 >= 0.0 {
                    return None;
                }
                let cands = [a.0 / b.0, a.0 / b.1, a.1 / b.0, a.1 / b.1];
                Some((down(fmin(&cands)), up(fmax(&cands))))
            }
            Expr::Exp(q) => {
                let (lo, hi) = rational_f64_enclosure(q)?;
                // libm exp is accurate to about one ulp; widen by four
                Some((down(down(down(down(lo.exp())))), up(up(up(up(hi.exp()))))))
            }
            Expr::Powi(a, n) => {
                let base = a.enclosure_f64()?;
                let mut acc = (1.0, 1.0);
                for _ in 0..n.unsigned_abs() {
                    acc = mul_f64(acc, base)?;
                }
                if *n < 0 {
                    if acc.0 <= 0.0 && acc.1 >= 0.0 {
                        return None;
                    }
                    acc = (down(1.0 / acc.1), up(1.0 / acc.0));
                }
                Some(acc)
            }
        };
        out.filter(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi)
    }

    fn compute_big(&self, s: u32) -> Option<(BigInt, BigInt)> {
        match &self.0.expr {
            Expr::Exact(q) => Some(rational_enclosure(q, s)),
            Expr::Root(cell) => Some(cell.enclose(s)),
            Expr::Add(a, b) => {
                let (a, b) = (a.enclosure(s)?, b.enclosure(s)?);
                Some((a.0 + b.0, a.1 + b.1))
            }
            Expr::Sub(a, b) => {
                let (a, b) = (a.enclosure(s)?, b.enclosure(s)?);
                Some((a.0 - b.1, a.1 - b.0))
            }
            Expr::Neg(a) => {
                let a = a.enclosure(s)?;
                Some((-a.1, -a.0))
            }
            Expr::Mul(a, b) => Some(mul_big(&a.enclosure(s)?, &b.enclosure(s)?, s)),
            Expr::Div(a, b) => div_big(&a.enclosure(s)?, &b.enclosure(s)?, s),
            Expr::Exp(q) => Some(exp_enclosure(q, s)),
            Expr::Powi(a, n) => {
                let base = a.enclosure(s)?;
                let one = BigInt::one() << s as usize;
                let mut acc = (one.clone(), one.clone());
                let mut sq = base;
                let mut e = n.unsigned_abs();
                while e > 0 {
                    if e & 1 == 1 {
                        acc = mul_big(&acc, &sq, s);
                    }
                    e >>= 1;
                    if e > 0 {
                        sq = mul_big(&sq, &sq, s);
                    }
                }
                if *n < 0 {
                    div_big(&(one.clone(), one), &acc, s)
                } else {
                    Some(acc)
                }
            }
        }
    }
}

impl RootCell {
    fn enclose(&self, s: u32) -> (BigInt, BigInt) {
        let mut b = self.bracket.lock().unwrap();
        let target = BigRational::new(BigInt::one(), BigInt::one() << (s as usize + 1));
        let two = BigRational::from_integer(2.into());
        while &b.hi - &b.lo > target {
            let mid = (&b.lo + &b.hi) / &two;
            let sm = self.poly.sign_at(&mid);
            if sm == 0 {
                b.lo = mid.clone();
                b.hi = mid;
                break;
            }
            if sm == b.sign_lo {
                b.lo = mid;
            } else {
                b.hi = mid;
            }
        }
        (floor_scaled(&b.lo, s), ceil_scaled(&b.hi, s))
    }
}

fn floor_scaled(q: &BigRational, s: u32) -> BigInt {
    (q.numer() << s as usize).div_floor(q.denom())
}

fn ceil_scaled(q: &BigRational, s: u32) -> BigInt {
    -((-q.numer() << s as usize).div_floor(q.denom()))
}

fn rational_enclosure(q: &BigRational, s: u32) -> (BigInt, BigInt) {
    (floor_scaled(q, s), ceil_scaled(q, s))
}

fn shr_floor(x: BigInt, s: u32) -> BigInt {
    x.div_floor(&(BigInt::one() << s as usize))
}

fn shr_ceil(x: BigInt, s: u32) -> BigInt {
    -((-x).div_floor(&(BigInt::one() << s as usize)))
}

fn mul_big(a: &(BigInt, BigInt), b: &(BigInt, BigInt), s: u32) -> (BigInt, BigInt) {
    let p = [&a.0 * &b.0, &a.0 * &b.1, &a.1 * &b.0, &a.1 * &b.1];
    let lo = p.iter().min().unwrap().clone();
    let hi = p.iter().max().unwrap().clone();
    (shr_floor(lo, s), shr_ceil(hi, s))
}

fn div_big(a: &(BigInt, BigInt), b: &(BigInt, BigInt), s: u32) -> Option<(BigInt, BigInt)> {
    if !b.0.is_positive() && !b.1.is_negative() {
        return None;
    }
    let mut lo: Option<BigInt> = None;
    let mut hi: Option<BigInt> = None;
    for x in [&a.0, &a.1] {
        for y in [&b.0, &b.1] {
            let num = x << s as usize;
            let f = num.div_floor(y);
            let c = -((-&num).div_floor(y));
            lo = Some(match lo {
                Some(l) if l <= f => l,
                _ => f,
            });
            hi = Some(match hi {
                Some(h) if h >= c => h,
                _ => c,
            });
        }
    }
    Some((lo?, hi?))
}

/// Enclosure of `e^q` at scale `s`: argument halving, a Taylor series in
/// fixed point with an explicit error count, then repeated squaring.
fn exp_enclosure(q: &BigRational, s: u32) -> (BigInt, BigInt) {
    let half = BigRational::new(1.into(), 2.into());
    let mut r = 0u32;
    let mut x = q.clone();
    while x.abs() > half {
        x /= BigRational::from_integer(2.into());
        r += 1;
    }
    let mag_bits = q.abs().ceil().to_integer().bits() as u32 * 2;
    let work = s + r + 32 + mag_bits;
    let (a, b) = (x.numer().clone(), x.denom().clone());
    let mut term = BigInt::one() << work as usize;
    let mut sum = term.clone();
    let mut k = 0u64;
    loop {
        k += 1;
        term = (&term * &a).div_floor(&(&b * BigInt::from(k)));
        if term.is_zero() || (term.abs() == BigInt::one() && k > 4) {
            sum += &term;
            break;
        }
        sum += &term;
    }
    let err = BigInt::from(2 * k + 8);
    let mut iv = (&sum - &err, &sum + &err);
    for _ in 0..r {
        iv = mul_big(&iv, &iv, work);
    }
    (shr_floor(iv.0, work - s), shr_ceil(iv.1, work - s))
}

fn down(x: f64) -> f64 {
    x.next_down()
}

fn up(x: f64) -> f64 {
    x.next_up()
}

fn fmin(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn fmax(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn mul_f64(a: (f64, f64), b: (f64, f64)) -> Option<(f64, f64)> {
    let cands = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    if cands.iter().any(|c| c.is_nan()) {
        return None;
    }
    Some((down(fmin(&cands)), up(fmax(&cands))))
}

fn rational_f64_enclosure(q: &BigRational) -> Option<(f64, f64)> {
    let v = q.to_f64()?;
    if !v.is_finite() {
        return None;
    }
    if q.is_integer() && v.abs() < 9.0e15 {
        return Some((v, v));
    }
    Some((down(down(v)), up(up(v))))
}

/// Formats a rational with `digits` significant decimal digits.
pub fn format_significant(q: &BigRational, digits: usize) -> String {
    if q.is_zero() {
        return "0".into();
    }
    let neg = q.is_negative();
    let a = q.abs();
    // find exponent e with 10^e <= a < 10^(e+1)
    let ten = BigRational::from_integer(10.into());
    let mut e: i64 = (a.to_f64().unwrap_or(1.0).log10().floor()) as i64;
    let pow10 = |k: i64| -> BigRational {
        if k >= 0 {
            num_traits::pow(ten.clone(), k as usize)
        } else {
            num_traits::pow(ten.clone(), (-k) as usize).recip()
        }
    };
    while pow10(e) > a {
        e -= 1;
    }
    while pow10(e + 1) <= a {
        e += 1;
    }
    let shift = digits as i64 - 1 - e;
    let scaled = &a * pow10(shift);
    let mut int = scaled.round().to_integer();
    let mut s = int.to_string();
    if s.len() > digits {
        // rounding carried into a new digit
        int /= 10;
        s = int.to_string();
        e += 1;
    }
    let point = e + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), s)
    } else if point as usize >= s.len() {
        format!("{}{}", s, "0".repeat(point as usize - s.len()))
    } else {
        format!("{}.{}", &s[..point as usize], &s[point as usize..])
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact() {
            Some(q) => write!(f, "Real({q})"),
            None => write!(f, "Real(~{})", self.to_f64()),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact() {
            Some(q) => write!(f, "{q}"),
            None => write!(f, "{}", self.to_decimal(20)),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident, $fold:expr) => {
        impl<'a> $trait<&'a Real> for &'a Real {
            type Output = Real;
            fn $method(self, rhs: &'a Real) -> Real {
                if let (Some(a), Some(b)) = (self.exact(), rhs.exact()) {
                    let f: fn(&BigRational, &BigRational) -> Option<BigRational> = $fold;
                    if let Some(v) = f(a, b) {
                        return Real::from_rational(v);
                    }
                }
                Real::from_expr(Expr::$variant(self.clone(), rhs.clone()))
            }
        }
        impl $trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, Add, |a, b| Some(a + b));
binop!(Sub, sub, Sub, |a, b| Some(a - b));
binop!(Mul, mul, Mul, |a, b| Some(a * b));
binop!(Div, div, Div, |a, b| if b.is_zero() { None } else { Some(a / b) });

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        match self.exact() {
            Some(q) => Real::from_rational(-q.clone()),
            None => Real::from_expr(Expr::Neg(self.clone())),
        }
    }
}
