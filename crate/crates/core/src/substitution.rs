//! Symbolic substitution systems: words, substitution matrices, primitivity,
//! Perron growth rates, distributions and the incommensurability verdict.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{self, Poly};
use crate::real::{Real, RealError};

/// Letters are indices into the alphabet of the owning system.
pub type Sym = usize;
pub type Word = Vec<Sym>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubstError {
    #[error("unknown letter `{0}`")]
    UnknownLetter(String),
    #[error("substitution system is not primitive")]
    NotPrimitive,
    #[error("substitution system is not expansive")]
    NotExpansive,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("letter `{0}` is defined twice")]
    DuplicateLetter(String),
    #[error("rule for `{0}` refers to undefined letter `{1}`")]
    UndefinedLetter(String, String),
    #[error("rule for `{0}` has an empty image")]
    EmptyRule(String),
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error(transparent)]
    Real(#[from] RealError),
}

/// A finite alphabet with one nonempty production word per letter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutionSystem {
    name: String,
    letters: Vec<String>,
    rules: Vec<Word>,
}

impl SubstitutionSystem {
    pub fn new(name: impl Into<String>, letters: Vec<String>, rules: Vec<Word>) -> Result<Self, SubstError> {
        if letters.is_empty() {
            return Err(SubstError::EmptyAlphabet);
        }
        for (i, l) in letters.iter().enumerate() {
            if letters[..i].contains(l) {
                return Err(SubstError::DuplicateLetter(l.clone()));
            }
        }
        if rules.len() != letters.len() {
            return Err(SubstError::Parse { line: 0, msg: "one rule per letter required".into() });
        }
        for (i, r) in rules.iter().enumerate() {
            if r.is_empty() {
                return Err(SubstError::EmptyRule(letters[i].clone()));
            }
            if let Some(&bad) = r.iter().find(|&&s| s >= letters.len()) {
                return Err(SubstError::UndefinedLetter(letters[i].clone(), bad.to_string()));
            }
        }
        Ok(Self { name: name.into(), letters, rules })
    }

    /// Builds a system from `(letter, image)` pairs with letter names as
    /// tokens; images are token lists.
    pub fn from_rules(name: &str, rules: &[(&str, &[&str])]) -> Result<Self, SubstError> {
        let letters: Vec<String> = rules.iter().map(|(l, _)| l.to_string()).collect();
        let mut images = Vec::with_capacity(rules.len());
        for (l, img) in rules {
            let mut w = Vec::with_capacity(img.len());
            for t in img.iter() {
                let idx = letters
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| SubstError::UndefinedLetter(l.to_string(), t.to_string()))?;
                w.push(idx);
            }
            images.push(w);
        }
        Self::new(name, letters, images)
    }

    /// Shorthand for single-character letters: `("a", "ab")`.
    pub fn from_chars(name: &str, rules: &[(char, &str)]) -> Result<Self, SubstError> {
        let letters: Vec<String> = rules.iter().map(|(c, _)| c.to_string()).collect();
        let mut images = Vec::with_capacity(rules.len());
        for (l, img) in rules {
            let mut w = Vec::new();
            for c in img.chars() {
                let idx = letters
                    .iter()
                    .position(|x| x.len() == c.len_utf8() && x.starts_with(c))
                    .ok_or_else(|| SubstError::UndefinedLetter(l.to_string(), c.to_string()))?;
                w.push(idx);
            }
            images.push(w);
        }
        Self::new(name, letters, images)
    }

    /// Parses the line-oriented `.sys` format:
    ///
    /// ```text
    /// system fib
    /// letter a -> a b
    /// letter b -> a
    /// ```
    pub fn parse(text: &str) -> Result<Self, SubstError> {
        let mut name: Option<String> = None;
        let mut defs: Vec<(usize, String, Vec<String>)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks = content.split_whitespace();
            match toks.next() {
                Some("system") => {
                    let n = toks
                        .next()
                        .ok_or_else(|| SubstError::Parse { line, msg: "missing system name".into() })?;
                    if toks.next().is_some() {
                        return Err(SubstError::Parse { line, msg: "system name must be one token".into() });
                    }
                    if name.is_some() {
                        return Err(SubstError::Parse { line, msg: "more than one system header".into() });
                    }
                    name = Some(n.to_string());
                }
                Some("letter") => {
                    let l = toks
                        .next()
                        .ok_or_else(|| SubstError::Parse { line, msg: "missing letter".into() })?;
                    if toks.next() != Some("->") {
                        return Err(SubstError::Parse { line, msg: "expected `->`".into() });
                    }
                    let body: Vec<String> = toks.map(str::to_string).collect();
                    if defs.iter().any(|(_, d, _)| d == l) {
                        return Err(SubstError::DuplicateLetter(l.to_string()));
                    }
                    if body.is_empty() {
                        return Err(SubstError::EmptyRule(l.to_string()));
                    }
                    defs.push((line, l.to_string(), body));
                }
                Some(other) => {
                    return Err(SubstError::Parse { line, msg: format!("unexpected keyword `{other}`") })
                }
                None => unreachable!(),
            }
        }
        let name = name.ok_or(SubstError::Parse { line: 0, msg: "missing `system` header".into() })?;
        let letters: Vec<String> = defs.iter().map(|(_, l, _)| l.clone()).collect();
        let mut rules = Vec::with_capacity(defs.len());
        for (_, l, body) in &defs {
            let mut w = Vec::with_capacity(body.len());
            for t in body {
                let idx = letters
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| SubstError::UndefinedLetter(l.clone(), t.clone()))?;
                w.push(idx);
            }
            rules.push(w);
        }
        Self::new(name, letters, rules)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("system {}\n", self.name);
        for (i, l) in self.letters.iter().enumerate() {
            let body: Vec<&str> = self.rules[i].iter().map(|&s| self.letters[s].as_str()).collect();
            out.push_str(&format!("letter {} -> {}\n", l, body.join(" ")));
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }

    pub fn size(&self) -> usize {
        self.letters.len()
    }

    pub fn image(&self, a: Sym) -> &[Sym] {
        &self.rules[a]
    }

    pub fn rules(&self) -> &[Word] {
        &self.rules
    }

    pub fn letter_index(&self, name: &str) -> Option<Sym> {
        self.letters.iter().position(|l| l == name)
    }

    /// Parses a word: whitespace-separated tokens, or a bare string when every
    /// letter name is a single character.
    pub fn parse_word(&self, text: &str) -> Result<Word, SubstError> {
        let text = text.trim();
        let tokens: Vec<String> = if text.contains(char::is_whitespace) || !self.single_char_letters() {
            text.split_whitespace().map(str::to_string).collect()
        } else {
            text.chars().map(|c| c.to_string()).collect()
        };
        tokens
            .iter()
            .map(|t| self.letter_index(t).ok_or_else(|| SubstError::UnknownLetter(t.clone())))
            .collect()
    }

    pub fn format_word(&self, w: &[Sym]) -> String {
        let names = w.iter().map(|&s| self.letters[s].as_str());
        if self.single_char_letters() {
            names.collect()
        } else {
            names.collect::<Vec<_>>().join(" ")
        }
    }

    fn single_char_letters(&self) -> bool {
        self.letters.iter().all(|l| l.chars().count() == 1)
    }

    pub fn check_word(&self, w: &[Sym]) -> Result<(), SubstError> {
        match w.iter().find(|&&s| s >= self.size()) {
            Some(s) => Err(SubstError::UnknownLetter(s.to_string())),
            None => Ok(()),
        }
    }

    /// `sigma^k(w)`; `k = 0` is the identity.
    pub fn apply(&self, w: &[Sym], k: usize) -> Result<Word, SubstError> {
        self.check_word(w)?;
        let mut cur = w.to_vec();
        for _ in 0..k {
            cur = cur.iter().flat_map(|&s| self.rules[s].iter().copied()).collect();
        }
        Ok(cur)
    }

    /// Length of `sigma^k(w)` without materializing the word.
    pub fn image_length(&self, w: &[Sym], k: usize) -> BigInt {
        let mut counts = letter_counts(w, self.size());
        let a = self.matrix();
        for _ in 0..k {
            counts = a.apply_to_counts(&counts);
        }
        counts.iter().sum()
    }

    pub fn matrix(&self) -> SubstitutionMatrix {
        let n = self.size();
        let mut entries = vec![vec![0u64; n]; n];
        for (j, img) in self.rules.iter().enumerate() {
            for &i in img {
                entries[i][j] += 1;
            }
        }
        SubstitutionMatrix { entries }
    }

    /// Some power `A^k` with `k = (n-1)^2 + 1` is entrywise positive.
    pub fn is_primitive(&self) -> bool {
        let n = self.size();
        let pattern: Vec<Vec<bool>> = self
            .matrix()
            .entries
            .iter()
            .map(|row| row.iter().map(|&x| x > 0).collect())
            .collect();
        let k = (n - 1) * (n - 1) + 1;
        let power = bool_matrix_pow(&pattern, k);
        power.iter().all(|row| row.iter().all(|&b| b))
    }

    pub fn is_expansive(&self) -> Result<bool, SubstError> {
        if !self.is_primitive() {
            return Err(SubstError::NotPrimitive);
        }
        Ok(self.rules.iter().any(|r| r.len() > 1))
    }

    fn require_growth(&self) -> Result<(), SubstError> {
        if !self.is_expansive()? {
            return Err(SubstError::NotExpansive);
        }
        Ok(())
    }

    /// Perron data of the substitution matrix.
    pub fn perron(&self) -> Result<Perron, SubstError> {
        self.require_growth()?;
        Ok(Perron::of_matrix(&self.matrix().to_bigint()))
    }

    pub fn growth_rate(&self) -> Result<Real, SubstError> {
        Ok(self.perron()?.lambda)
    }

    /// Positive left Perron eigenvector normalized to minimum weight one.
    pub fn distribution(&self) -> Result<Distribution, SubstError> {
        let perron = self.perron()?;
        perron.left_distribution()
    }
}

impl fmt::Display for SubstitutionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn letter_counts(w: &[Sym], n: usize) -> Vec<BigInt> {
    let mut counts = vec![BigInt::zero(); n];
    for &s in w {
        counts[s] += 1;
    }
    counts
}

fn bool_matrix_pow(m: &[Vec<bool>], mut k: usize) -> Vec<Vec<bool>> {
    let n = m.len();
    let mul = |a: &[Vec<bool>], b: &[Vec<bool>]| -> Vec<Vec<bool>> {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).any(|l| a[i][l] && b[l][j])).collect())
            .collect()
    };
    let mut result: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    let mut base = m.to_vec();
    while k > 0 {
        if k & 1 == 1 {
            result = mul(&result, &base);
        }
        k >>= 1;
        if k > 0 {
            base = mul(&base, &base);
        }
    }
    result
}

/// `entries[i][j]` counts occurrences of letter `i` in the image of letter `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionMatrix {
    pub entries: Vec<Vec<u64>>,
}

impl SubstitutionMatrix {
    pub fn to_bigint(&self) -> Vec<Vec<BigInt>> {
        self.entries.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let n = self.entries.len();
        (0..n).map(|j| self.entries.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn apply_to_counts(&self, v: &[BigInt]) -> Vec<BigInt> {
        self.entries
            .iter()
            .map(|row| row.iter().zip(v).map(|(&a, x)| BigInt::from(a) * x).sum())
            .collect()
    }
}

/// Perron root of a primitive nonnegative integer matrix together with the
/// exact data used to certify statements about it.
#[derive(Clone, Debug)]
pub struct Perron {
    pub charpoly: Poly,
    /// Irreducible factor of the characteristic polynomial vanishing at the root.
    pub minpoly: Poly,
    /// Isolating interval `(lo, hi)` for the root of `minpoly`.
    pub interval: (BigRational, BigRational),
    pub lambda: Real,
    adjugate: Vec<Vec<Vec<BigInt>>>,
}

impl Perron {
    pub fn of_matrix(a: &[Vec<BigInt>]) -> Self {
        let (charpoly, adjugate) = poly::faddeev_leverrier(a);
        let (lo, hi) = isolate_largest_root(&charpoly);
        let minpoly = poly::factor_containing(&charpoly, &lo, &hi);
        let (lo, hi) = tighten_for(&minpoly, lo, hi);
        let lambda = Real::algebraic(minpoly.clone(), lo.clone(), hi.clone());
        Self { charpoly, minpoly, interval: (lo, hi), lambda, adjugate }
    }

    pub fn is_rational(&self) -> bool {
        self.minpoly.degree() == Some(1)
    }

    /// Reduces `p` modulo the minimal polynomial.
    pub fn reduce(&self, p: &Poly) -> Poly {
        p.rem(&self.minpoly)
    }

    /// Exact sign of `p(lambda)`.
    pub fn sign_of(&self, p: &Poly) -> Result<i32, RealError> {
        let r = self.reduce(p);
        if r.is_zero() {
            return Ok(0);
        }
        self.lambda.eval_poly(&r).signum()
    }

    /// Inverse of `p(lambda)` as a polynomial in `lambda`.
    pub fn invert(&self, p: &Poly) -> Poly {
        // extended Euclid: s p + t m = 1
        let (mut r0, mut r1) = (self.minpoly.clone(), self.reduce(p));
        let (mut s0, mut s1) = (Poly::zero(), Poly::one());
        while !r1.is_zero() {
            let (q, r) = r0.div_rem(&r1);
            let s = s0.sub(&q.mul(&s1));
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
        }
        // r0 is a nonzero constant because minpoly is irreducible
        let c = r0.coeffs()[0].clone();
        self.reduce(&s0.scale(&c.recip()))
    }

    /// Left eigenvector as polynomials in lambda, from a row of
    /// `adj(lambda I - A)`.
    pub fn left_eigen_polys(&self) -> Vec<Poly> {
        let n = self.adjugate.len();
        let row_poly = |row: usize, j: usize| {
            let mut coeffs = vec![BigInt::zero(); n];
            for (k, m) in self.adjugate.iter().enumerate() {
                coeffs[n - 1 - k] = m[row][j].clone();
            }
            self.reduce(&Poly::from_bigints(&coeffs))
        };
        let row = (0..n)
            .find(|&r| (0..n).any(|j| !row_poly(r, j).is_zero()))
            .unwrap_or(0);
        (0..n).map(|j| row_poly(row, j)).collect()
    }

    pub fn left_distribution(&self) -> Result<Distribution, SubstError> {
        let polys = self.left_eigen_polys();
        // orient positively, then divide by the minimal entry
        let sign = self.sign_of(&polys[0])?;
        let polys: Vec<Poly> = if sign < 0 { polys.iter().map(Poly::neg).collect() } else { polys };
        let mut min = 0;
        for j in 1..polys.len() {
            if self.sign_of(&polys[j].sub(&polys[min]))? < 0 {
                min = j;
            }
        }
        let inv = self.invert(&polys[min]);
        let polys: Vec<Poly> = polys.iter().map(|p| self.reduce(&p.mul(&inv))).collect();
        let weights = polys.iter().map(|p| self.lambda.eval_poly(p)).collect();
        Ok(Distribution { weights, polys, lambda: self.lambda.clone() })
    }

    /// Checks that lambda strictly dominates every other eigenvalue in
    /// absolute value, using numerical roots with Smith inclusion radii.
    pub fn dominates_spectrum(&self) -> bool {
        let sf = self.charpoly.squarefree();
        let roots = sf.complex_roots_f64();
        if roots.is_empty() {
            return false;
        }
        let deg = roots.len() as f64;
        let coeffs: Vec<f64> = sf.coeffs().iter().map(|c| num_traits::ToPrimitive::to_f64(c).unwrap()).collect();
        let eval = |z: num_complex::Complex64| {
            coeffs.iter().rev().fold(num_complex::Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
        };
        let lead = *coeffs.last().unwrap();
        let radii: Vec<f64> = roots
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let den: f64 = roots
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, w)| (z - w).norm())
                    .product();
                deg * eval(*z).norm() / (lead.abs() * den) + 1e-12
            })
            .collect();
        let lam = self.lambda.to_f64();
        let perron = roots
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - lam).norm().total_cmp(&(b.1 - lam).norm()))
            .map(|(i, _)| i)
            .unwrap();
        let lam_lo = lam - radii[perron];
        roots
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != perron)
            .all(|(i, z)| z.norm() + radii[i] < lam_lo)
    }
}

/// Isolates the largest real root of `p` in an interval whose endpoints are
/// not roots of the square-free part.
pub(crate) fn isolate_largest_root(p: &Poly) -> (BigRational, BigRational) {
    let sf = p.squarefree();
    let bound = sf.root_bound();
    let mut lo = -bound.clone() - BigRational::one();
    let mut hi = bound;
    let two = BigRational::from_integer(2.into());
    loop {
        let count = sf.count_roots(&lo, &hi);
        assert!(count >= 1, "polynomial has no real root");
        if count == 1 && sf.sign_at(&lo) != 0 {
            return (lo, hi);
        }
        let mut mid = (&lo + &hi) / &two;
        if sf.sign_at(&mid) == 0 {
            // nudge off a rational root
            mid = (&mid + &hi) / &two;
            if sf.count_roots(&mid, &hi) == 0 {
                mid = (&lo + &hi) / &two - (&hi - &lo) / BigRational::from_integer(8.into());
            }
        }
        if sf.count_roots(&mid, &hi) >= 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Shrinks `(lo, hi)` so that both ends give nonzero values of `f` and the
/// interval holds exactly one of its roots.
fn tighten_for(f: &Poly, mut lo: BigRational, mut hi: BigRational) -> (BigRational, BigRational) {
    if f.degree() == Some(1) {
        return (lo, hi);
    }
    let two = BigRational::from_integer(2.into());
    while f.sign_at(&hi) == 0 || f.sign_at(&lo) == 0 || f.count_roots(&lo, &hi) != 1 {
        let mid = (&lo + &hi) / &two;
        if f.count_roots(&mid, &hi) >= 1 && f.sign_at(&mid) != 0 {
            lo = mid;
        } else if f.sign_at(&mid) != 0 {
            hi = mid;
        } else {
            hi = (&mid + &hi) / &two;
        }
    }
    (lo, hi)
}

/// Left Perron eigenvector `nu` with `nu . A = lambda nu`.
#[derive(Clone, Debug)]
pub struct Distribution {
    pub weights: Vec<Real>,
    /// Each weight as a polynomial in lambda (reduced modulo the minimal polynomial).
    pub polys: Vec<Poly>,
    pub lambda: Real,
}

impl Distribution {
    pub fn from_weights(weights: Vec<Real>, lambda: Real) -> Self {
        Self { polys: Vec::new(), weights, lambda }
    }

    pub fn weight(&self, a: Sym) -> &Real {
        &self.weights[a]
    }

    /// Compares two weights, deciding equality exactly when both are known
    /// as polynomials in the growth rate.
    pub fn cmp_weights(&self, i: Sym, j: Sym) -> Result<Ordering, RealError> {
        if !self.polys.is_empty() && self.polys[i] == self.polys[j] {
            return Ok(Ordering::Equal);
        }
        self.weights[i].cmp_real(&self.weights[j])
    }

    pub fn argmin(&self) -> Result<Sym, RealError> {
        let mut best = 0;
        for j in 1..self.weights.len() {
            if self.cmp_weights(j, best)? == Ordering::Less {
                best = j;
            }
        }
        Ok(best)
    }

    pub fn argmax(&self) -> Result<Sym, RealError> {
        let mut best = 0;
        for j in 1..self.weights.len() {
            if self.cmp_weights(j, best)? == Ordering::Greater {
                best = j;
            }
        }
        Ok(best)
    }

    /// `|w|_nu`, the weighted length; the empty word has length zero.
    pub fn length(&self, w: &[Sym]) -> Result<Real, SubstError> {
        let n = self.weights.len();
        if let Some(s) = w.iter().find(|&&s| s >= n) {
            return Err(SubstError::UnknownLetter(s.to_string()));
        }
        let mut counts = vec![0i64; n];
        for &s in w {
            counts[s] += 1;
        }
        Ok(Real::linear_combination(counts.iter().copied().zip(self.weights.iter())))
    }

    /// Length of a word given as letter counts.
    pub fn length_of_counts(&self, counts: &[i64]) -> Real {
        Real::linear_combination(counts.iter().copied().zip(self.weights.iter()))
    }

    /// Multiplies every weight by `factor`. Exact polynomial forms are kept
    /// only for rational factors.
    pub fn scaled(&self, factor: &Real) -> Self {
        let polys = match factor.exact() {
            Some(q) if !self.polys.is_empty() => self.polys.iter().map(|p| p.scale(q)).collect(),
            _ => Vec::new(),
        };
        Self { weights: self.weights.iter().map(|w| w * factor).collect(), polys, lambda: self.lambda.clone() }
    }
}

/// `|w|_nu` for a distribution.
pub fn nu_length(dist: &Distribution, w: &[Sym]) -> Result<Real, SubstError> {
    dist.length(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Commensurability {
    IncommensurateUpTo { bound: u32 },
    Commensurate { m: u32, n: u32 },
    Indeterminate,
}

impl fmt::Display for Commensurability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IncommensurateUpTo { bound } => write!(f, "IncommensurateUpTo({bound})"),
            Self::Commensurate { m, n } => write!(f, "Commensurate({m},{n})"),
            Self::Indeterminate => write!(f, "Indeterminate"),
        }
    }
}

/// Searches `m, n <= bound` for `lambda^m = gamma^n`. Candidates that
/// enclosures cannot separate are settled exactly through the characteristic
/// polynomials of `A^m` and `B^n`.
pub fn incommensurate(
    sys_a: &SubstitutionSystem,
    sys_b: &SubstitutionSystem,
    bound: u32,
) -> Result<Commensurability, SubstError> {
    let pa = sys_a.perron()?;
    let pb = sys_b.perron()?;
    let ma = sys_a.matrix().to_bigint();
    let mb = sys_b.matrix().to_bigint();
    let quick_bits = 256;
    for m in 1..=bound {
        let lm = pa.lambda.powi(m as i32);
        for n in 1..=bound {
            let gn = pb.lambda.powi(n as i32);
            match lm.cmp_within(&gn, quick_bits) {
                Ok(Ordering::Equal) => return Ok(Commensurability::Commensurate { m, n }),
                Ok(_) => continue,
                Err(_) => {}
            }
            match powers_equal(&ma, m, &mb, n) {
                Some(true) => return Ok(Commensurability::Commensurate { m, n }),
                Some(false) => continue,
                None => return Ok(Commensurability::Indeterminate),
            }
        }
    }
    Ok(Commensurability::IncommensurateUpTo { bound })
}

/// Exact test of `rho(A)^m == rho(B)^n` for primitive matrices.
pub(crate) fn powers_equal(a: &[Vec<BigInt>], m: u32, b: &[Vec<BigInt>], n: u32) -> Option<bool> {
    let am = poly::mat_pow(a, m);
    let bn = poly::mat_pow(b, n);
    let (fa, _) = poly::faddeev_leverrier(&am);
    let (fb, _) = poly::faddeev_leverrier(&bn);
    let fa = fa.squarefree();
    let fb = fb.squarefree();
    let h = fa.gcd(&fb);
    if h.degree().unwrap_or(0) == 0 {
        return Some(false);
    }
    let (mut ilo, mut ihi) = isolate_largest_root(&fa);
    let (mut jlo, mut jhi) = isolate_largest_root(&fb);
    if h.count_roots(&ilo, &ihi) == 0 || h.count_roots(&jlo, &jhi) == 0 {
        return Some(false);
    }
    let two = BigRational::from_integer(2.into());
    for _ in 0..10_000 {
        // each interval now holds exactly one root of h; shrink until it is
        // the only root of h there
        let ci = h.count_roots(&ilo, &ihi);
        let cj = h.count_roots(&jlo, &jhi);
        if ci == 1 && cj == 1 {
            let lo = if ilo > jlo { ilo.clone() } else { jlo.clone() };
            let hi = if ihi < jhi { ihi.clone() } else { jhi.clone() };
            if lo >= hi {
                return Some(false);
            }
            return Some(h.count_roots(&lo, &hi) == 1 && fa.count_roots(&lo, &hi) >= 1 && fb.count_roots(&lo, &hi) >= 1);
        }
        bisect_keep_top(&fa, &mut ilo, &mut ihi, &two);
        bisect_keep_top(&fb, &mut jlo, &mut jhi, &two);
    }
    None
}

fn bisect_keep_top(f: &Poly, lo: &mut BigRational, hi: &mut BigRational, two: &BigRational) {
    let mid = (&*lo + &*hi) / two;
    if f.count_roots(&mid, hi) >= 1 {
        *lo = mid;
    } else {
        *hi = mid;
    }
}

/// Numerator/denominator helper for building `Real`s from small fractions.
pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> SubstitutionSystem {
        SubstitutionSystem::from_chars("fib", &[('a', "ab"), ('b', "a")]).unwrap()
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let text = "system fib\n# comment\nletter a -> a b\nletter b -> a\n";
        let sys = SubstitutionSystem::parse(text).unwrap();
        assert_eq!(sys, fib());
        assert_eq!(SubstitutionSystem::parse(&sys.to_text()).unwrap(), sys);
        assert!(matches!(
            SubstitutionSystem::parse("system x\nletter a -> a\nletter a -> a a\n"),
            Err(SubstError::DuplicateLetter(_))
        ));
        assert!(matches!(
            SubstitutionSystem::parse("system x\nletter a -> a c\n"),
            Err(SubstError::UndefinedLetter(_, _))
        ));
        assert!(matches!(SubstitutionSystem::parse("letter a -> a\n"), Err(SubstError::Parse { .. })));
        assert!(matches!(
            SubstitutionSystem::parse("system x\nletter a ->\n"),
            Err(SubstError::EmptyRule(_))
        ));
    }

    #[test]
    fn multi_char_letters_are_tokens() {
        let sys = SubstitutionSystem::parse("system t\nletter Y1 -> Y1 W2\nletter W2 -> Y1\n").unwrap();
        let w = sys.parse_word("Y1 W2 Y1").unwrap();
        assert_eq!(w, vec![0, 1, 0]);
        assert_eq!(sys.format_word(&w), "Y1 W2 Y1");
        assert!(matches!(sys.parse_word("Y1 Q"), Err(SubstError::UnknownLetter(_))));
    }

    #[test]
    fn apply_zero_is_identity() {
        let sys = fib();
        let w = sys.parse_word("abba").unwrap();
        assert_eq!(sys.apply(&w, 0).unwrap(), w);
        assert!(sys.apply(&[7], 1).is_err());
    }

    #[test]
    fn image_length_matches_apply() {
        let sys = fib();
        let w = sys.parse_word("ab").unwrap();
        for k in 0..10 {
            assert_eq!(sys.image_length(&w, k), BigInt::from(sys.apply(&w, k).unwrap().len()));
        }
    }

    #[test]
    fn non_primitive_errors_propagate() {
        let sys = SubstitutionSystem::from_chars("t", &[('a', "ab"), ('b', "b")]).unwrap();
        assert_eq!(sys.is_expansive(), Err(SubstError::NotPrimitive));
        assert!(matches!(sys.growth_rate(), Err(SubstError::NotPrimitive)));
        let swap = SubstitutionSystem::from_chars("s", &[('a', "b"), ('b', "a")]).unwrap();
        assert!(!swap.is_primitive());
        let id = SubstitutionSystem::from_chars("i", &[('a', "a")]).unwrap();
        assert_eq!(id.is_expansive(), Ok(false));
        assert!(matches!(id.growth_rate(), Err(SubstError::NotExpansive)));
    }

    #[test]
    fn exact_field_inverse() {
        let p = fib().perron().unwrap();
        // 1/phi = phi - 1
        let inv = p.invert(&Poly::from_ints(&[0, 1]));
        assert_eq!(inv, Poly::from_ints(&[-1, 1]));
        assert_eq!(p.sign_of(&Poly::from_ints(&[-1, -1, 1])).unwrap(), 0);
    }

    #[test]
    fn integer_growth_rate_is_exact() {
        let sys = SubstitutionSystem::from_chars("two", &[('0', "00")]).unwrap();
        assert_eq!(sys.growth_rate().unwrap().exact(), Some(&BigRational::from_integer(2.into())));
        // a -> ab, b -> ab has charpoly x(x - 2)
        let sys = SubstitutionSystem::from_chars("t", &[('a', "ab"), ('b', "ab")]).unwrap();
        assert_eq!(sys.growth_rate().unwrap().exact(), Some(&BigRational::from_integer(2.into())));
    }
}
