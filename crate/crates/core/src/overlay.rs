//! The overlay alphabet built from a pair of substitution systems: letters
//! `(alpha, beta, p, s, delta)`, the row adjacency predicate, the production
//! relation and the `~N` relation on words.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::{Real, RealError};
use crate::substitution::{self, Distribution, Perron, SubstError, SubstitutionSystem, Sym, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OverlayError {
    #[error(transparent)]
    Subst(#[from] SubstError),
    #[error(transparent)]
    Real(#[from] RealError),
    #[error("growth rates must exceed 1")]
    NotExpanding,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OverlayLetter {
    pub alpha: Sym,
    pub beta: Word,
    pub p: Word,
    pub s: Word,
    pub delta: u32,
}

/// Scaling of the second distribution relative to the first.
#[derive(Clone, Debug)]
pub struct OverlayConfig {
    /// `min nu' = slack * gamma * max eta'`.
    pub slack: BigRational,
}

impl Default for OverlayConfig {
    fn default() -> Self {
        Self { slack: BigRational::new(3.into(), 2.into()) }
    }
}

#[derive(Clone, Debug)]
pub struct OverlaySystem {
    pub sys_a: SubstitutionSystem,
    pub sys_b: SubstitutionSystem,
    pub perron_a: Perron,
    pub perron_b: Perron,
    /// Scaled distributions.
    pub nu: Distribution,
    pub eta: Distribution,
    pub lambda: Real,
    pub gamma: Real,
    pub k: u32,
    pub n: usize,
    pub letters: Vec<OverlayLetter>,
    index: HashMap<OverlayLetter, usize>,
}

impl OverlaySystem {
    pub fn lookup(&self, x: &OverlayLetter) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn letter(&self, id: usize) -> &OverlayLetter {
        &self.letters[id]
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// `sigma_B^k` on words over the second alphabet.
    pub fn apply_b(&self, w: &[Sym], k: u32) -> Word {
        self.sys_b.apply(w, k as usize).expect("letters of the second system")
    }

    /// Checks both defining inequality chains of a candidate letter for the
    /// witness `b`. Ties count as failures.
    pub fn satisfies(&self, x: &OverlayLetter, b: Sym) -> Result<bool, OverlayError> {
        letter_conditions(self, x, b)
    }

    /// `|w|_eta` under the scaled distribution.
    pub fn eta_length(&self, w: &[Sym]) -> Real {
        counts_length(&self.eta, w)
    }

    pub fn nu_length(&self, w: &[Sym]) -> Real {
        counts_length(&self.nu, w)
    }

    pub fn format_letter(&self, x: &OverlayLetter) -> String {
        let fb = |w: &[Sym]| {
            if w.is_empty() {
                "ε".to_string()
            } else {
                self.sys_b.format_word(w)
            }
        };
        format!(
            "({}, {}, {}, {}, {})",
            self.sys_a.letters()[x.alpha],
            fb(&x.beta),
            fb(&x.p),
            fb(&x.s),
            x.delta
        )
    }
}

fn counts_length(dist: &Distribution, w: &[Sym]) -> Real {
    let mut counts = vec![0i64; dist.weights.len()];
    for &s in w {
        counts[s] += 1;
    }
    dist.length_of_counts(&counts)
}

/// Smallest `k` with `gamma^k >= lambda`.
pub fn compute_k(lambda: &Real, gamma: &Real) -> Result<u32, OverlayError> {
    if lambda.le(&Real::one())? || gamma.le(&Real::one())? {
        return Err(OverlayError::NotExpanding);
    }
    let mut k = 1u32;
    loop {
        if gamma.powi(k as i32).cmp_real(lambda)? != Ordering::Less {
            return Ok(k);
        }
        k += 1;
    }
}

/// As [`compute_k`], settling unresolved comparisons `gamma^k = lambda`
/// exactly from the substitution matrices.
pub fn compute_k_exact(sys_a: &SubstitutionSystem, sys_b: &SubstitutionSystem) -> Result<u32, OverlayError> {
    let lambda = sys_a.growth_rate()?;
    let gamma = sys_b.growth_rate()?;
    let ma = sys_a.matrix().to_bigint();
    let mb = sys_b.matrix().to_bigint();
    let mut k = 1u32;
    loop {
        match gamma.powi(k as i32).cmp_real(&lambda) {
            Ok(Ordering::Less) => {}
            Ok(_) => return Ok(k),
            Err(e) => match substitution::powers_equal(&ma, 1, &mb, k) {
                Some(true) => return Ok(k),
                _ => return Err(e.into()),
            },
        }
        k += 1;
    }
}

/// Normalizes `eta` to minimum weight one and rescales `nu` so that its
/// minimum is `slack * gamma * max eta'`.
pub fn scale_distributions(
    nu: &Distribution,
    eta: &Distribution,
    gamma: &Real,
    slack: &BigRational,
) -> Result<(Distribution, Distribution), OverlayError> {
    let eta_min = eta.weights[eta.argmin()?].clone();
    let eta_scaled = eta.scaled(&eta_min.recip());
    let eta_max = eta_scaled.weights[eta_scaled.argmax()?].clone();
    let nu_min = nu.weights[nu.argmin()?].clone();
    let target = &(&Real::from_rational(slack.clone()) * gamma) * &eta_max;
    let nu_scaled = nu.scaled(&(&target / &nu_min));
    Ok((nu_scaled, eta_scaled))
}

/// Enumerates the overlay alphabet with the default scaling.
pub fn enumerate_alphabet(sys_a: &SubstitutionSystem, sys_b: &SubstitutionSystem) -> Result<OverlaySystem, OverlayError> {
    enumerate_alphabet_with(sys_a, sys_b, &OverlayConfig::default())
}

pub fn enumerate_alphabet_with(
    sys_a: &SubstitutionSystem,
    sys_b: &SubstitutionSystem,
    config: &OverlayConfig,
) -> Result<OverlaySystem, OverlayError> {
    let perron_a = sys_a.perron()?;
    let perron_b = sys_b.perron()?;
    let nu0 = perron_a.left_distribution()?;
    let eta0 = perron_b.left_distribution()?;
    let lambda = perron_a.lambda.clone();
    let gamma = perron_b.lambda.clone();
    let k = compute_k_exact(sys_a, sys_b)?;
    let (nu, eta) = scale_distributions(&nu0, &eta0, &gamma, &config.slack)?;
    let mut ov = OverlaySystem {
        sys_a: sys_a.clone(),
        sys_b: sys_b.clone(),
        perron_a,
        perron_b,
        nu,
        eta,
        lambda,
        gamma,
        k,
        n: 1,
        letters: Vec::new(),
        index: HashMap::new(),
    };
    let mut letters = Vec::new();
    for alpha in 0..sys_a.size() {
        collect_for_alpha(&ov, alpha, &mut letters)?;
    }
    letters.sort();
    letters.dedup();
    ov.n = letters.iter().map(|x| x.p.len().max(x.s.len())).max().unwrap_or(0) + 1;
    ov.index = letters.iter().cloned().enumerate().map(|(i, x)| (x, i)).collect();
    ov.letters = letters;
    Ok(ov)
}

fn collect_for_alpha(ov: &OverlaySystem, alpha: Sym, out: &mut Vec<OverlayLetter>) -> Result<(), OverlayError> {
    let nb = ov.sys_b.size();
    let alpha_len = ov.nu.weights[alpha].clone();
    let image_len = ov.nu_length(ov.sys_a.image(alpha));
    let gamma = &ov.gamma;
    let deltas: Vec<u32> = if ov.k == 0 { vec![0] } else { vec![ov.k - 1, ov.k] };

    // depth-first over beta; the tail length only grows, so a failing
    // prefix prunes every extension
    let mut stack: Vec<Word> = (0..nb).map(|b| vec![b]).collect();
    while let Some(beta) = stack.pop() {
        let tail = ov.eta_length(&beta[1..]);
        if tail.cmp_real(&alpha_len)? != Ordering::Less {
            continue;
        }
        for b in 0..nb {
            stack.push([beta.as_slice(), &[b]].concat());
        }
        let beta_len = ov.eta_length(&beta);
        for b in 0..nb {
            let covered = gamma * &(&beta_len + &ov.eta.weights[b]);
            if alpha_len.cmp_real(&covered)? != Ordering::Less {
                continue;
            }
            for &delta in &deltas {
                let first = ov.apply_b(&beta[..1], delta);
                let middle = ov.apply_b(&beta[1..], delta);
                let last = ov.apply_b(&[b], delta);
                let middle_len = ov.eta_length(&middle);
                for p_len in 0..first.len() {
                    let q = &first[p_len..];
                    let q_tail = ov.eta_length(&q[1..]);
                    for s_len in 0..last.len() {
                        let s = &last[..s_len];
                        let t1 = last[s_len];
                        let lower = &(&q_tail + &middle_len) + &ov.eta_length(s);
                        if lower.cmp_real(&image_len)? != Ordering::Less {
                            continue;
                        }
                        let upper = gamma * &(&(&lower + &ov.eta.weights[q[0]]) + &ov.eta.weights[t1]);
                        if image_len.cmp_real(&upper)? != Ordering::Less {
                            continue;
                        }
                        out.push(OverlayLetter {
                            alpha,
                            beta: beta.clone(),
                            p: first[..p_len].to_vec(),
                            s: s.to_vec(),
                            delta,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

fn letter_conditions(ov: &OverlaySystem, x: &OverlayLetter, b: Sym) -> Result<bool, OverlayError> {
    if x.beta.is_empty() || (x.delta != ov.k && x.delta + 1 != ov.k) {
        return Ok(false);
    }
    let alpha_len = ov.nu_length(&[x.alpha]);
    if ov.eta_length(&x.beta[1..]).cmp_real(&alpha_len)? != Ordering::Less {
        return Ok(false);
    }
    let beta_b: Word = x.beta.iter().copied().chain(std::iter::once(b)).collect();
    if alpha_len.cmp_real(&(&ov.gamma * &ov.eta_length(&beta_b)))? != Ordering::Less {
        return Ok(false);
    }
    let pq = ov.apply_b(&x.beta[..1], x.delta);
    let st = ov.apply_b(&[b], x.delta);
    if !(pq.len() > x.p.len() && pq.starts_with(&x.p) && st.len() > x.s.len() && st.starts_with(&x.s)) {
        return Ok(false);
    }
    let q = &pq[x.p.len()..];
    let r = ov.apply_b(&x.beta[1..], x.delta);
    let t1 = st[x.s.len()];
    let lower_word: Word = q[1..].iter().chain(&r).chain(&x.s).copied().collect();
    let upper_word: Word = q.iter().chain(&r).chain(&x.s).chain(std::iter::once(&t1)).copied().collect();
    let image = ov.nu_length(ov.sys_a.image(x.alpha));
    Ok(ov.eta_length(&lower_word).cmp_real(&image)? == Ordering::Less
        && image.cmp_real(&(&ov.gamma * &ov.eta_length(&upper_word)))? == Ordering::Less)
}

/// Row adjacency: `s(x) = p(y)` and `delta(x) = delta(y)`.
pub fn adjacent(x: &OverlayLetter, y: &OverlayLetter) -> bool {
    x.s == y.p && x.delta == y.delta
}

/// `(x, w)` is a production rule: the letters of `w` spell `sigma(alpha(x))`
/// and `p(x) beta(w) = sigma_B^delta(beta(x)) s(x)`.
pub fn is_production(ov: &OverlaySystem, x: &OverlayLetter, w: &[&OverlayLetter]) -> bool {
    if w.is_empty() {
        return false;
    }
    let alphas: Word = w.iter().map(|y| y.alpha).collect();
    if alphas.as_slice() != ov.sys_a.image(x.alpha) {
        return false;
    }
    let lhs: Word = x.p.iter().chain(w.iter().flat_map(|y| y.beta.iter())).copied().collect();
    let mut rhs = ov.apply_b(&x.beta, x.delta);
    rhs.extend_from_slice(&x.s);
    lhs == rhs
}

/// `u ~N v`: `u = p c s`, `v = p' c s'` with all four affixes shorter than `n`.
pub fn approx_eq<T: PartialEq>(u: &[T], v: &[T], n: usize) -> bool {
    if n == 0 {
        return false;
    }
    for pu in 0..n.min(u.len() + 1) {
        for su in 0..n.min(u.len() - pu + 1) {
            let c = &u[pu..u.len() - su];
            if c.len() > v.len() {
                continue;
            }
            for pv in 0..n.min(v.len() - c.len() + 1) {
                let sv = v.len() - pv - c.len();
                if sv < n && &v[pv..pv + c.len()] == c {
                    return true;
                }
            }
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("row {row_letter} of the produced word breaks beta(w') ~N sigma_B^delta(beta(w)) at position {position}")]
pub struct Property3Violation {
    /// Index in `w'` of the letter whose beta contains the first mismatch.
    pub row_letter: usize,
    /// Position in the concatenated beta word.
    pub position: usize,
}

/// Checks `beta(w') ~N sigma_B^delta(beta(w))` for a parent row `w` and its
/// produced row `w'`.
pub fn verify_property3(ov: &OverlaySystem, w: &[&OverlayLetter], w_prime: &[&OverlayLetter]) -> Result<(), Property3Violation> {
    let produced: Word = w_prime.iter().flat_map(|y| y.beta.iter().copied()).collect();
    let delta = w.first().map(|x| x.delta).unwrap_or(0);
    let parent_beta: Word = w.iter().flat_map(|x| x.beta.iter().copied()).collect();
    let expected = ov.apply_b(&parent_beta, delta);
    if approx_eq(&produced, &expected, ov.n) {
        return Ok(());
    }
    // locate the first disagreement after discarding the leading p
    let skip = w.first().map(|x| x.p.len()).unwrap_or(0);
    let aligned = expected.get(skip..).unwrap_or(&[]);
    let position = produced
        .iter()
        .zip(aligned)
        .position(|(a, b)| a != b)
        .unwrap_or(produced.len().min(aligned.len()));
    let mut acc = 0;
    let mut row_letter = w_prime.len().saturating_sub(1);
    for (i, y) in w_prime.iter().enumerate() {
        acc += y.beta.len();
        if position < acc {
            row_letter = i;
            break;
        }
    }
    Err(Property3Violation { row_letter, position })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_eq_examples() {
        assert!(approx_eq(b"abc", b"abc", 1));
        assert!(approx_eq(b"abc", b"xabcy", 2));
        assert!(!approx_eq(b"aaaa", b"bbbb", 2));
        assert!(approx_eq(b"aaaa", b"bbbb", 5));
        assert!(!approx_eq(b"abc", b"xxabc", 2));
    }

    #[test]
    fn k_examples() {
        assert_eq!(compute_k(&Real::from_int(3), &Real::from_int(2)).unwrap(), 2);
        assert_eq!(compute_k(&Real::from_int(2), &Real::from_int(2)).unwrap(), 1);
        assert!(compute_k(&Real::from_int(1), &Real::from_int(2)).is_err());
    }

    #[test]
    fn adjacency_examples() {
        let x = OverlayLetter { alpha: 0, beta: vec![0], p: vec![], s: vec![0], delta: 1 };
        let y = OverlayLetter { alpha: 0, beta: vec![0], p: vec![0], s: vec![], delta: 1 };
        assert!(adjacent(&x, &y));
        let w = OverlayLetter { p: vec![0, 0], ..y.clone() };
        assert!(!adjacent(&x, &w));
        let z = OverlayLetter { delta: 2, ..y.clone() };
        assert!(!adjacent(&x, &z));
    }
}
