//! Sparse multivariate polynomials over exact rationals.
//!
//! One flat variable space serves both constant symbols and differential
//! generators; a [`Var`] either indexes a context table (constants, `x`,
//! auxiliaries) or encodes a pair (component, derivative order) directly,
//! so derivative variables of any order need no registration.
//!
//! Monomials are compared in graded order (total degree first, then
//! exponents along ascending variable id), which is multiplicative and
//! therefore valid for leading-term division.

use num::{BigInt, BigRational, One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Binomial coefficient for possibly negative integer upper argument.
pub fn binom(n: i64, k: u32) -> Rat {
    let mut acc = Rat::one();
    for j in 0..k {
        acc *= rat(n - j as i64);
        acc /= rat(j as i64 + 1);
    }
    acc
}

const UVAR_BIT: u32 = 1 << 31;
const UVAR_ORD_BITS: u32 = 24;

/// Variable identifier over the flat space.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var(u32);

impl Var {
    /// Generator registered in a context table (constant, x, auxiliary).
    pub fn table(idx: usize) -> Var {
        assert!((idx as u32) < UVAR_BIT, "generator table overflow");
        Var(idx as u32)
    }

    /// Differential variable u_i^{(n)}.
    pub fn uvar(i: usize, n: usize) -> Var {
        assert!(i < 127 && (n as u32) < (1 << UVAR_ORD_BITS), "uvar out of range");
        Var(UVAR_BIT | ((i as u32) << UVAR_ORD_BITS) | n as u32)
    }

    pub fn as_uvar(self) -> Option<(usize, usize)> {
        if self.0 & UVAR_BIT != 0 {
            let i = ((self.0 & !UVAR_BIT) >> UVAR_ORD_BITS) as usize;
            let n = (self.0 & ((1 << UVAR_ORD_BITS) - 1)) as usize;
            Some((i, n))
        } else {
            None
        }
    }

    pub fn as_table(self) -> Option<usize> {
        if self.0 & UVAR_BIT == 0 {
            Some(self.0 as usize)
        } else {
            None
        }
    }
}

/// Monomial: sorted (variable, positive exponent) pairs.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Mono(Vec<(Var, u32)>);

impl Mono {
    pub fn one() -> Mono {
        Mono(Vec::new())
    }

    pub fn var(v: Var) -> Mono {
        Mono(vec![(v, 1)])
    }

    pub fn var_pow(v: Var, e: u32) -> Mono {
        if e == 0 {
            Mono::one()
        } else {
            Mono(vec![(v, e)])
        }
    }

    pub fn from_pairs(mut pairs: Vec<(Var, u32)>) -> Mono {
        pairs.retain(|&(_, e)| e > 0);
        pairs.sort_by_key(|&(v, _)| v);
        for w in pairs.windows(2) {
            assert!(w[0].0 != w[1].0, "duplicate variable in monomial");
        }
        Mono(pairs)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pairs(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0, self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Mono(out)
    }

    /// Divide exactly; None if any exponent would go negative.
    pub fn try_div(&self, other: &Mono) -> Option<Mono> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for &(v, e) in &self.0 {
            while j < other.0.len() && other.0[j].0 < v {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == v {
                let f = other.0[j].1;
                j += 1;
                if f > e {
                    return None;
                }
                if e > f {
                    out.push((v, e - f));
                }
            } else {
                out.push((v, e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Mono(out))
    }

    /// Remove a variable entirely.
    pub fn without(&self, v: Var) -> Mono {
        Mono(self.0.iter().cloned().filter(|&(w, _)| w != v).collect())
    }

    pub fn with_exp(&self, v: Var, e: u32) -> Mono {
        let mut pairs: Vec<(Var, u32)> =
            self.0.iter().cloned().filter(|&(w, _)| w != v).collect();
        if e > 0 {
            pairs.push((v, e));
        }
        Mono::from_pairs(pairs)
    }
}

/// Graded order: total degree, then exponents along ascending variable id
/// (higher exponent on an earlier variable wins).
impl Ord for Mono {
    fn cmp(&self, other: &Mono) -> Ordering {
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                // a variable present here but not there: we carry more weight early
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => match self.0[i].1.cmp(&other.0[j].1) {
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                    }
                    o => return o,
                },
            }
        }
        // equal total degree forces both exhausted
        debug_assert!(i == self.0.len() && j == other.0.len());
        Ordering::Equal
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Mono) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial; terms sorted descending by monomial, no zero coefficients.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Poly {
    terms: Vec<(Mono, Rat)>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { terms: Vec::new() }
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly {
                terms: vec![(Mono::one(), c)],
            }
        }
    }

    pub fn var(v: Var) -> Poly {
        Poly {
            terms: vec![(Mono::var(v), Rat::one())],
        }
    }

    pub fn monomial(m: Mono, c: Rat) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly {
                terms: vec![(m, c)],
            }
        }
    }

    pub fn from_terms(terms: Vec<(Mono, Rat)>) -> Poly {
        let mut acc: BTreeMap<Mono, Rat> = BTreeMap::new();
        for (m, c) in terms {
            let entry = acc.entry(m).or_insert_with(Rat::zero);
            *entry += c;
        }
        Poly::from_map(acc)
    }

    fn from_map(map: BTreeMap<Mono, Rat>) -> Poly {
        let mut terms: Vec<(Mono, Rat)> =
            map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.reverse();
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(Mono, Rat)] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Leading (monomial, coefficient) in the graded order.
    pub fn leading(&self) -> Option<(&Mono, &Rat)> {
        self.terms.first().map(|(m, c)| (m, c))
    }

    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 if self.terms[0].0.is_one() => Some(self.terms[0].1.clone()),
            _ => None,
        }
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map(|c| c.is_one()).unwrap_or(false)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(m, _)| m.total_degree())
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms
            .iter()
            .map(|(m, _)| m.exponent(v))
            .max()
            .unwrap_or(0)
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.terms.iter().any(|(m, _)| m.exponent(v) > 0)
    }

    pub fn for_each_var(&self, mut f: impl FnMut(Var)) {
        for (m, _) in &self.terms {
            for &(v, _) in m.pairs() {
                f(v);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            match self.terms[i].0.cmp(&other.terms[j].0) {
                Ordering::Greater => {
                    out.push(self.terms[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(other.terms[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &self.terms[i].1 + &other.terms[j].1;
                    if !c.is_zero() {
                        out.push((self.terms[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&other.terms[j..]);
        Poly { terms: out }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut acc: BTreeMap<Mono, Rat> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.mul(m2);
                let entry = acc.entry(m).or_insert_with(Rat::zero);
                *entry += c1 * c2;
            }
        }
        Poly::from_map(acc)
    }

    pub fn mul_term(&self, m: &Mono, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m1, c1)| (m1.mul(m), c1 * c))
                .collect(),
        }
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        self.mul_term(&Mono::one(), c)
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Partial derivative with respect to one variable.
    pub fn derivative(&self, v: Var) -> Poly {
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e > 0 {
                terms.push((m.with_exp(v, e - 1), c * rat(e as i64)));
            }
        }
        Poly::from_terms(terms)
    }

    /// Exact division; None when not divisible.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = divisor.as_constant() {
            return Some(self.scale(&(Rat::one() / c)));
        }
        let (dm, dc) = divisor.leading().unwrap();
        let mut rem = self.clone();
        let mut quo: Vec<(Mono, Rat)> = Vec::new();
        while !rem.is_zero() {
            let (rm, rc) = rem.leading().unwrap();
            let qm = rm.try_div(dm)?;
            let qc = rc / dc;
            quo.push((qm.clone(), qc.clone()));
            rem = rem.sub(&divisor.mul_term(&qm, &qc));
        }
        Some(Poly::from_terms(quo))
    }

    /// Substitute a variable by a polynomial.
    pub fn substitute(&self, v: Var, value: &Poly) -> Poly {
        let mut powers: Vec<Poly> = vec![Poly::one()];
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v) as usize;
            while powers.len() <= e {
                let next = powers.last().unwrap().mul(value);
                powers.push(next);
            }
            let rest = Poly::monomial(m.without(v), c.clone());
            out = out.add(&rest.mul(&powers[e]));
        }
        out
    }

    /// Evaluate under a total assignment.
    pub fn eval(&self, assign: &dyn Fn(Var) -> Rat) -> Rat {
        let mut total = Rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &(v, e) in m.pairs() {
                let val = assign(v);
                for _ in 0..e {
                    t *= &val;
                }
            }
            total += t;
        }
        total
    }

    /// Scale to integer-coprime coefficients with positive leading
    /// coefficient; returns (multiplier, primitive) with
    /// self = multiplier * primitive.
    pub fn primitive(&self) -> (Rat, Poly) {
        if self.is_zero() {
            return (Rat::one(), Poly::zero());
        }
        let mut den_lcm = BigInt::one();
        for (_, c) in &self.terms {
            den_lcm = num::integer::lcm(den_lcm, c.denom().clone());
        }
        let mut num_gcd = BigInt::zero();
        for (_, c) in &self.terms {
            let scaled = c.numer() * (&den_lcm / c.denom());
            num_gcd = num::integer::gcd(num_gcd, scaled);
        }
        if num_gcd.is_zero() {
            num_gcd = BigInt::one();
        }
        let mut mult = Rat::new(num_gcd, den_lcm);
        let lead_sign_neg = self.terms[0].1.is_negative();
        if lead_sign_neg {
            mult = -mult;
        }
        let inv = Rat::one() / mult.clone();
        (mult, self.scale(&inv))
    }
}

/// Order polynomials: term count, then termwise (monomial, coefficient).
/// Used only to keep denominator factor lists sorted deterministically.
impl Ord for Poly {
    fn cmp(&self, other: &Poly) -> Ordering {
        match self.terms.len().cmp(&other.terms.len()) {
            Ordering::Equal => {}
            o => return o,
        }
        for ((m1, c1), (m2, c2)) in self.terms.iter().zip(&other.terms) {
            match m1.cmp(m2).then_with(|| c1.cmp(c2)) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Poly) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", c)?;
            for &(v, e) in m.pairs() {
                write!(f, "*v{}^{}", v.0, e)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> Var {
        Var::table(i)
    }

    #[test]
    fn mono_mul_div() {
        let a = Mono::from_pairs(vec![(v(0), 2), (v(1), 1)]);
        let b = Mono::from_pairs(vec![(v(0), 1)]);
        let ab = a.mul(&b);
        assert_eq!(ab.exponent(v(0)), 3);
        assert_eq!(ab.try_div(&a).unwrap(), b);
        assert!(b.try_div(&a).is_none());
    }

    #[test]
    fn graded_order_is_multiplicative() {
        let x = Mono::var(v(0));
        let y = Mono::var(v(1));
        let xy = x.mul(&y);
        let x2 = x.mul(&x);
        assert!(x2 > xy); // same degree, earlier variable heavier
        assert!(xy > y);
        let z = Mono::var(v(2));
        assert!(x2.mul(&z) > xy.mul(&z));
    }

    #[test]
    fn poly_arith() {
        let x = Poly::var(v(0));
        let y = Poly::var(v(1));
        let p = x.add(&y); // x + y
        let q = p.mul(&p); // x^2 + 2xy + y^2
        assert_eq!(q.num_terms(), 3);
        let diff = q.sub(&x.mul(&x)).sub(&y.mul(&y)).sub(&x.mul(&y).scale(&rat(2)));
        assert!(diff.is_zero());
    }

    #[test]
    fn exact_division() {
        let x = Poly::var(v(0));
        let y = Poly::var(v(1));
        let p = x.add(&y);
        let q = x.sub(&y);
        let prod = p.mul(&q); // x^2 - y^2
        assert_eq!(prod.div_exact(&p).unwrap(), q);
        assert_eq!(prod.div_exact(&q).unwrap(), p);
        assert!(prod.add(&Poly::one()).div_exact(&p).is_none());
    }

    #[test]
    fn derivative_and_substitute() {
        let x = Poly::var(v(0));
        let y = Poly::var(v(1));
        let p = x.pow(3).mul(&y).add(&y.pow(2)); // x^3 y + y^2
        let dp = p.derivative(v(0)); // 3 x^2 y
        assert_eq!(dp, x.pow(2).mul(&y).scale(&rat(3)));
        let s = p.substitute(v(1), &Poly::one()); // x^3 + 1
        assert_eq!(s, x.pow(3).add(&Poly::one()));
    }

    #[test]
    fn primitive_normalization() {
        let x = Poly::var(v(0));
        let p = x.scale(&ratio(-2, 3)).add(&Poly::constant(ratio(-4, 3)));
        let (mult, prim) = p.primitive();
        assert_eq!(mult, ratio(-2, 3));
        assert_eq!(prim, x.add(&Poly::constant(rat(2))));
        let (m2, p2) = prim.primitive();
        assert!(m2.is_one() && p2 == prim);
    }

    #[test]
    fn binom_negative_upper() {
        assert_eq!(binom(-1, 0), rat(1));
        assert_eq!(binom(-1, 3), rat(-1));
        assert_eq!(binom(-2, 2), rat(3));
        assert_eq!(binom(3, 2), rat(3));
        assert_eq!(binom(2, 5), rat(0));
    }
}
