//! Dense univariate polynomials over the rationals, with the handful of exact
//! algorithms the rest of the crate leans on: Euclidean gcd, square-free
//! parts, Sturm sequences and real-root isolation.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Polynomial with rational coefficients, stored lowest degree first and
/// without trailing zeros (the zero polynomial has no coefficients).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<BigRational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigRational::from_integer(c.into())).collect())
    }

    pub fn from_bigints(coeffs: &[BigInt]) -> Self {
        Self::new(coeffs.iter().cloned().map(BigRational::from_integer).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from_ints(&[1])
    }

    /// `x - r`
    pub fn linear_root(r: &BigRational) -> Self {
        Self::new(vec![-r.clone(), BigRational::one()])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn lead(&self) -> Option<&BigRational> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * x + c)
    }

    /// Sign of `self(x)` as -1, 0 or 1.
    pub fn sign_at(&self, x: &BigRational) -> i32 {
        sign_of(&self.eval(x))
    }

    /// Sign of the polynomial at `m / 2^k`, evaluated in integers.
    pub fn sign_at_dyadic(&self, m: &BigInt, k: u32) -> i32 {
        let Some(deg) = self.degree() else { return 0 };
        // Horner on sum c_i m^i 2^{k(deg-i)}, scaled by the common denominator
        let den = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let mut acc = BigInt::zero();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            let ci = c.numer() * (&den / c.denom());
            acc = acc * m + (ci << (k as usize * (deg - i)));
        }
        sign_big(&acc)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn neg(&self) -> Self {
        self.scale(&-BigRational::one())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let z = BigRational::zero();
        Self::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&z) + other.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead = divisor.lead().unwrap().clone();
        let mut rem = self.coeffs.clone();
        let Some(nd) = self.degree() else {
            return (Self::zero(), Self::zero());
        };
        if nd < dd {
            return (Self::zero(), self.clone());
        }
        let mut quot = vec![BigRational::zero(); nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let c = &rem[k + dd] / &lead;
            if !c.is_zero() {
                for (j, dc) in divisor.coeffs.iter().enumerate() {
                    rem[k + j] -= &c * dc;
                }
            }
            quot[k] = c;
        }
        rem.truncate(dd);
        (Self::new(quot), Self::new(rem))
    }

    pub fn rem(&self, divisor: &Self) -> Self {
        self.div_rem(divisor).1
    }

    pub fn monic(&self) -> Self {
        match self.lead() {
            Some(l) => self.scale(&l.recip()),
            None => Self::zero(),
        }
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Product of the distinct irreducible factors (monic).
    pub fn squarefree(&self) -> Self {
        if self.degree().unwrap_or(0) == 0 {
            return self.monic();
        }
        let g = self.gcd(&self.derivative());
        self.div_rem(&g).0.monic()
    }

    /// Integer coefficients with positive leading term and content one.
    pub fn primitive_integer(&self) -> Vec<BigInt> {
        if self.is_zero() {
            return Vec::new();
        }
        let den = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let mut ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| c.numer() * (&den / c.denom()))
            .collect();
        let content = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        let sign = if ints.last().unwrap().is_negative() { -1 } else { 1 };
        for c in &mut ints {
            *c = &*c / &content * sign;
        }
        ints
    }

    /// Strictly positive bound on the absolute value of every complex root.
    pub fn root_bound(&self) -> BigRational {
        let lead = self.lead().expect("zero polynomial has no roots").abs();
        let m = self.coeffs[..self.coeffs.len() - 1]
            .iter()
            .map(|c| c.abs() / &lead)
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
        m + BigRational::one()
    }

    pub fn sturm_chain(&self) -> Vec<Poly> {
        let mut chain = vec![self.clone(), self.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let r = chain[n - 2].rem(&chain[n - 1]).neg();
            if r.is_zero() {
                break;
            }
            chain.push(r);
        }
        chain
    }

    /// Distinct real roots in the half-open interval `(a, b]`.
    pub fn count_roots(&self, a: &BigRational, b: &BigRational) -> usize {
        let chain = self.squarefree().sturm_chain();
        sign_variations(&chain, a).saturating_sub(sign_variations(&chain, b))
    }

    /// Rational roots, without multiplicity, in increasing order.
    pub fn rational_roots(&self) -> Vec<BigRational> {
        let ints = self.squarefree().primitive_integer();
        if ints.is_empty() {
            return Vec::new();
        }
        let mut roots = Vec::new();
        // strip the root at zero
        let first_nonzero = ints.iter().position(|c| !c.is_zero()).unwrap();
        if first_nonzero > 0 {
            roots.push(BigRational::zero());
        }
        let ints = &ints[first_nonzero..];
        if ints.len() > 1 {
            let p_div = divisors(&ints[0].abs());
            let q_div = divisors(&ints.last().unwrap().abs());
            let poly = Poly::from_bigints(ints);
            for p in &p_div {
                for q in &q_div {
                    for s in [1i32, -1] {
                        let r = BigRational::new(p * s, q.clone());
                        if poly.eval(&r).is_zero() && !roots.contains(&r) {
                            roots.push(r);
                        }
                    }
                }
            }
        }
        roots.sort();
        roots
    }

    /// Approximate complex roots (Durand-Kerner), for diagnostics and for
    /// proposing candidate factors that are then verified exactly.
    pub fn complex_roots_f64(&self) -> Vec<Complex64> {
        let Some(deg) = self.degree() else { return Vec::new() };
        if deg == 0 {
            return Vec::new();
        }
        let monic = self.monic();
        let c: Vec<Complex64> = monic
            .coeffs
            .iter()
            .map(|q| Complex64::new(q.to_f64().unwrap_or(f64::NAN), 0.0))
            .collect();
        let eval = |z: Complex64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, k| acc * z + k);
        let radius = monic.root_bound().to_f64().unwrap_or(2.0);
        let seed = Complex64::new(0.4, 0.9);
        let mut roots: Vec<Complex64> = (0..deg)
            .map(|k| seed.powu(k as u32) * radius.min(4.0).max(1.0) * 0.5)
            .collect();
        for _ in 0..2000 {
            let mut delta = 0.0f64;
            for i in 0..deg {
                let zi = roots[i];
                let mut den = Complex64::new(1.0, 0.0);
                for (j, zj) in roots.iter().enumerate() {
                    if j != i {
                        den *= zi - zj;
                    }
                }
                if den.norm() == 0.0 {
                    den = Complex64::new(1e-12, 0.0);
                }
                let step = eval(zi) / den;
                roots[i] = zi - step;
                delta = delta.max(step.norm());
            }
            if delta < 1e-15 {
                break;
            }
        }
        roots
    }

    /// Display with a chosen variable name.
    pub fn display_var(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let ints = self.primitive_integer_preserving_sign();
        let mut out = String::new();
        for (i, c) in ints.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let show_mag = i == 0 || !mag.is_one();
            if show_mag {
                out.push_str(&mag.to_string());
            }
            match i {
                0 => {}
                1 => out.push_str(var),
                _ => out.push_str(&format!("{var}^{i}")),
            }
        }
        out
    }

    fn primitive_integer_preserving_sign(&self) -> Vec<BigInt> {
        let mut ints = self.primitive_integer();
        if self.lead().is_some_and(|l| l.is_negative()) {
            for c in &mut ints {
                *c = -&*c;
            }
        }
        ints
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_var("x"))
    }
}

pub(crate) fn sign_of(q: &BigRational) -> i32 {
    if q.is_zero() {
        0
    } else if q.is_positive() {
        1
    } else {
        -1
    }
}

pub(crate) fn sign_big(q: &BigInt) -> i32 {
    if q.is_zero() {
        0
    } else if q.is_positive() {
        1
    } else {
        -1
    }
}

fn sign_variations(chain: &[Poly], x: &BigRational) -> usize {
    let signs: Vec<i32> = chain.iter().map(|p| p.sign_at(x)).filter(|&s| s != 0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    if n.is_zero() {
        return vec![BigInt::one()];
    }
    let mut out = Vec::new();
    let mut d = BigInt::one();
    while &d * &d <= n {
        if (&n % &d).is_zero() {
            out.push(d.clone());
            let e = &n / &d;
            if e != d {
                out.push(e);
            }
        }
        d += 1;
    }
    out
}

/// Characteristic polynomial `det(xI - A)` and the adjugate coefficients of
/// `xI - A`, by the Faddeev-LeVerrier recurrence.
///
/// Returns `(charpoly, adj)` where `adj[k]` is the matrix coefficient of
/// `x^(n-1-k)` in `adj(xI - A)`.
pub fn faddeev_leverrier(a: &[Vec<BigInt>]) -> (Poly, Vec<Vec<Vec<BigInt>>>) {
    let n = a.len();
    let mut coeffs = vec![BigInt::zero(); n + 1];
    coeffs[n] = BigInt::one();
    let mut m = vec![vec![BigInt::zero(); n]; n];
    let mut adj = Vec::with_capacity(n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = mat_mul(a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &coeffs[n - k + 1];
        }
        m = next;
        adj.push(m.clone());
        let am = mat_mul(a, &m);
        let trace: BigInt = (0..n).map(|i| am[i][i].clone()).sum();
        coeffs[n - k] = -trace / BigInt::from(k);
    }
    (Poly::from_bigints(&coeffs), adj)
}

pub(crate) fn mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut out = vec![vec![BigInt::zero(); m]; n];
    for i in 0..n {
        for (k, bk) in b.iter().enumerate() {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += &a[i][k] * &bk[j];
            }
        }
    }
    out
}

pub(crate) fn mat_pow(a: &[Vec<BigInt>], mut e: u32) -> Vec<Vec<BigInt>> {
    let n = a.len();
    let mut result: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let mut base = a.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = mat_mul(&base, &base);
        }
    }
    result
}

/// Irreducible-over-Q factor of `p` that vanishes at the real root isolated
/// in `(lo, hi)`. Rational roots are split off exactly; higher-degree
/// candidates are proposed from numerical roots and accepted only after
/// exact division and a Sturm check.
pub fn factor_containing(p: &Poly, lo: &BigRational, hi: &BigRational) -> Poly {
    let sf = p.squarefree();
    for r in sf.rational_roots() {
        if &r > lo && &r <= hi {
            return Poly::linear_root(&r);
        }
    }
    let mut rest = sf.clone();
    for r in sf.rational_roots() {
        rest = rest.div_rem(&Poly::linear_root(&r)).0;
    }
    let deg = rest.degree().unwrap_or(0);
    if deg <= 3 {
        return rest.monic();
    }
    let roots = rest.complex_roots_f64();
    let mid = ((lo + hi) / BigRational::from_integer(2.into())).to_f64().unwrap_or(0.0);
    let anchor = roots
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1 - Complex64::new(mid, 0.0)).norm();
            let db = (b.1 - Complex64::new(mid, 0.0)).norm();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .unwrap();
    let others: Vec<usize> = (0..deg).filter(|&i| i != anchor).collect();
    if others.len() > 20 {
        return rest.monic();
    }
    // subsets by increasing size
    for size in 0..others.len() {
        for mask in 0u32..(1u32 << others.len()) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let mut prod = vec![Complex64::new(1.0, 0.0)];
            let chosen = std::iter::once(anchor)
                .chain(others.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &i)| i));
            for i in chosen {
                let mut next = vec![Complex64::new(0.0, 0.0); prod.len() + 1];
                for (k, c) in prod.iter().enumerate() {
                    next[k + 1] += c;
                    next[k] -= c * roots[i];
                }
                prod = next;
            }
            let mut ints = Vec::with_capacity(prod.len());
            let mut ok = true;
            for c in &prod {
                let r = c.re.round();
                if (c.re - r).abs() > 1e-6 || c.im.abs() > 1e-6 || !r.is_finite() {
                    ok = false;
                    break;
                }
                ints.push(BigInt::from(r as i64));
            }
            if !ok {
                continue;
            }
            let cand = Poly::from_bigints(&ints);
            if cand.degree().unwrap_or(0) == 0 {
                continue;
            }
            if rest.rem(&cand).is_zero() && cand.count_roots(lo, hi) == 1 {
                return cand.monic();
            }
        }
    }
    rest.monic()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn gcd_and_squarefree() {
        // (x-1)^2 (x+2)
        let p = Poly::from_ints(&[2, -3, 0, 1]);
        assert_eq!(p.squarefree(), Poly::from_ints(&[-2, 1, 1]));
        let g = p.gcd(&Poly::from_ints(&[-1, 1]));
        assert_eq!(g, Poly::from_ints(&[-1, 1]));
    }

    #[test]
    fn sturm_counts() {
        // x^2 - 2 has roots ±1.414...
        let p = Poly::from_ints(&[-2, 0, 1]);
        assert_eq!(p.count_roots(&q(-2, 1), &q(2, 1)), 2);
        assert_eq!(p.count_roots(&q(0, 1), &q(2, 1)), 1);
        assert_eq!(p.count_roots(&q(3, 2), &q(2, 1)), 0);
    }

    #[test]
    fn rational_root_search() {
        // (2x - 3)(x + 1) x
        let p = Poly::from_ints(&[0, -3, -1, 2]);
        assert_eq!(p.rational_roots(), vec![q(-1, 1), q(0, 1), q(3, 2)]);
    }

    #[test]
    fn charpoly_of_fibonacci_matrix() {
        let a = vec![vec![BigInt::from(1), BigInt::from(1)], vec![BigInt::from(1), BigInt::from(0)]];
        let (p, adj) = faddeev_leverrier(&a);
        assert_eq!(p, Poly::from_ints(&[-1, -1, 1]));
        assert_eq!(adj.len(), 2);
        assert_eq!(adj[0][0][0], BigInt::from(1));
    }

    #[test]
    fn dyadic_sign_matches_rational_sign() {
        let p = Poly::from_ints(&[-1, -1, 1]);
        for m in -20i64..20 {
            let x = q(m, 8);
            assert_eq!(p.sign_at(&x), p.sign_at_dyadic(&BigInt::from(m), 3), "m={m}");
        }
    }

    #[test]
    fn factor_picks_quadratic_inside_quartic() {
        // (x^2 - x - 1)(x^2 + 1)
        let p = Poly::from_ints(&[-1, -1, 0, -1, 1]);
        let f = factor_containing(&p, &q(3, 2), &q(2, 1));
        assert_eq!(f, Poly::from_ints(&[-1, -1, 1]));
    }

    #[test]
    fn display_is_readable() {
        assert_eq!(Poly::from_ints(&[-1, -1, 1]).to_string(), "x^2 - x - 1");
        assert_eq!(Poly::from_ints(&[1, -7, 1]).to_string(), "x^2 - 7x + 1");
    }
}
