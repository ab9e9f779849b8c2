//! The space of rational expressions in λ, μ whose only pole is on
//! λ+μ. Canonical coordinates per degree: λ^a μ^b, and λ^a (λ+μ)^{−c}
//! with c > 0. Partial fractions eliminate mixed μ-and-(λ+μ) terms.

use super::series::DoubleSeries;
use crate::diffalg::{Ctx, DiffExpr};
use crate::poly::binom;
use std::collections::BTreeMap;

/// Canonical element: key (a, b, c) stands for λ^a μ^b (λ+μ)^{−c};
/// invariant c > 0 implies b = 0.
#[derive(Clone, Debug)]
pub struct VlmElem {
    coeffs: BTreeMap<(i64, i64, u32), DiffExpr>,
    ctx: Ctx,
}

impl VlmElem {
    pub fn zero(ctx: &Ctx) -> VlmElem {
        VlmElem {
            coeffs: BTreeMap::new(),
            ctx: ctx.clone(),
        }
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    /// Insert coeff·λ^a μ^b (λ+μ)^ν_pow, reducing to canonical form.
    /// Positive powers of λ+μ expand binomially; negative powers with
    /// μ present reduce by partial fractions.
    pub fn insert(&mut self, a: i64, b: i64, nu_pow: i64, coeff: DiffExpr) {
        if coeff.is_zero() {
            return;
        }
        if nu_pow >= 0 {
            // (λ+μ)^p = Σ_k C(p,k) λ^k μ^{p−k}
            for k in 0..=nu_pow {
                self.raw_add((a + k, b + nu_pow - k, 0), coeff.scale(&binom(nu_pow, k as u32)));
            }
            return;
        }
        let c = (-nu_pow) as u32;
        if b == 0 {
            self.raw_add((a, 0, c), coeff);
        } else if b > 0 {
            // μ ν^{−1} = 1 − λ ν^{−1}
            self.insert(a, b - 1, nu_pow + 1, coeff.clone());
            self.insert(a + 1, b - 1, nu_pow, -coeff);
        } else {
            // μ^{−1} ν^{−1} = λ^{−1} μ^{−1} − λ^{−1} ν^{−1}
            self.insert(a - 1, b, nu_pow + 1, coeff.clone());
            self.insert(a - 1, b + 1, nu_pow, -coeff);
        }
    }

    fn raw_add(&mut self, key: (i64, i64, u32), val: DiffExpr) {
        if val.is_zero() {
            return;
        }
        let ctx = self.ctx.clone();
        let cur = self
            .coeffs
            .entry(key)
            .or_insert_with(|| DiffExpr::zero(&ctx));
        *cur = &*cur + &val;
        if cur.is_zero() {
            self.coeffs.remove(&key);
        }
    }

    pub fn term(a: i64, b: i64, nu_pow: i64, coeff: DiffExpr) -> VlmElem {
        let mut e = VlmElem::zero(coeff.ctx());
        e.insert(a, b, nu_pow, coeff);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient on the canonical basis monomial λ^a μ^b (λ+μ)^{−c}.
    pub fn coord(&self, a: i64, b: i64, c: u32) -> DiffExpr {
        assert!(c == 0 || b == 0, "not a canonical basis monomial");
        self.coeffs
            .get(&(a, b, c))
            .cloned()
            .unwrap_or_else(|| DiffExpr::zero(&self.ctx))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i64, i64, u32), &DiffExpr)> {
        self.coeffs.iter()
    }

    /// Total degree of a term: a + b − c.
    pub fn degrees(&self) -> Vec<i64> {
        let mut ds: Vec<i64> = self
            .coeffs
            .keys()
            .map(|&(a, b, c)| a + b - c as i64)
            .collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    pub fn add(&self, other: &VlmElem) -> VlmElem {
        let mut out = self.clone();
        for (&k, v) in &other.coeffs {
            out.raw_add(k, v.clone());
        }
        out
    }

    pub fn neg(&self) -> VlmElem {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = -v.clone();
        }
        out
    }

    pub fn sub(&self, other: &VlmElem) -> VlmElem {
        self.add(&other.neg())
    }

    pub fn mul_expr(&self, e: &DiffExpr) -> VlmElem {
        let mut out = VlmElem::zero(&self.ctx);
        for (&(a, b, c), v) in &self.coeffs {
            out.raw_add((a, b, c), v.clone() * e.clone());
        }
        out
    }
}

/// Idempotent canonicalization: rebuilds through the normalizing insert.
pub fn vlm_normalize(e: &VlmElem) -> VlmElem {
    let mut out = VlmElem::zero(e.ctx());
    for (&(a, b, c), v) in e.terms() {
        out.insert(a, b, -(c as i64), v.clone());
    }
    out
}

/// Operator shift in one slot of the product of Lemma-style expansions:
/// the first factor's variable is offset by an operator acting on the
/// second factor's coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VlmShift {
    Zero,
    Total,
}

const SHIFT_CAP: usize = 200;

/// Product e₁(λ+S, μ+T)·e₂ with S, T ∈ {0, ∂} acting on the coefficients
/// of e₂. Expansions in a shifted slot with negative exponent must
/// terminate (derivatives of the affected coefficient eventually vanish).
pub fn vlm_mul(e1: &VlmElem, e2: &VlmElem, s: VlmShift, t: VlmShift) -> VlmElem {
    let ctx = e1.ctx().clone();
    let mut out = VlmElem::zero(&ctx);
    for (&(m, n, cpow), a) in e1.terms() {
        let p = -(cpow as i64);
        for (&(m2, n2, cpow2), b) in e2.terms() {
            // (λ+S)^m (μ+T)^n (λ+μ+S+T)^p b, expanded slot by slot
            let mut lam_parts: Vec<(i64, DiffExpr)> = Vec::new();
            expand_slot(m, s, b, &mut lam_parts);
            for (dm, bs) in lam_parts {
                let mut mu_parts: Vec<(i64, DiffExpr)> = Vec::new();
                expand_slot(n, t, &bs, &mut mu_parts);
                for (dn, bst) in mu_parts {
                    let mut nu_parts: Vec<(i64, DiffExpr)> = Vec::new();
                    expand_nu_slot(p, s, t, &bst, &mut nu_parts);
                    for (dp, bstk) in nu_parts {
                        let coeff = a.clone() * bstk;
                        out.insert(
                            m - dm + m2,
                            n - dn + n2,
                            p - dp - cpow2 as i64,
                            coeff,
                        );
                    }
                }
            }
        }
    }
    out
}

fn expand_slot(exp: i64, shift: VlmShift, b: &DiffExpr, parts: &mut Vec<(i64, DiffExpr)>) {
    match shift {
        VlmShift::Zero => parts.push((0, b.clone())),
        VlmShift::Total => {
            let mut cur = b.clone();
            let mut i = 0i64;
            loop {
                if cur.is_zero() {
                    break;
                }
                parts.push((i, cur.scale(&binom(exp, i as u32))));
                cur = cur.total_derivative();
                i += 1;
                if exp >= 0 && i > exp {
                    break;
                }
                assert!(
                    (i as usize) < SHIFT_CAP,
                    "shift expansion does not terminate for negative exponent"
                );
            }
        }
    }
}

fn expand_nu_slot(
    exp: i64,
    s: VlmShift,
    t: VlmShift,
    b: &DiffExpr,
    parts: &mut Vec<(i64, DiffExpr)>,
) {
    use num::BigRational;
    use num::FromPrimitive;
    let scale_base: Option<BigRational> = match (s, t) {
        (VlmShift::Zero, VlmShift::Zero) => None,
        (VlmShift::Total, VlmShift::Total) => Some(BigRational::from_i64(2).unwrap()),
        _ => Some(BigRational::from_i64(1).unwrap()),
    };
    match scale_base {
        None => parts.push((0, b.clone())),
        Some(base) => {
            // (S+T)^k b = base^k ∂^k b
            let mut cur = b.clone();
            let mut mult = BigRational::from_i64(1).unwrap();
            let mut k = 0i64;
            loop {
                if cur.is_zero() {
                    break;
                }
                parts.push((k, cur.scale(&(binom(exp, k as u32) * mult.clone()))));
                cur = cur.total_derivative();
                mult *= base.clone();
                k += 1;
                if exp >= 0 && k > exp {
                    break;
                }
                assert!(
                    (k as usize) < SHIFT_CAP,
                    "shift expansion does not terminate for negative exponent"
                );
            }
        }
    }
}

/// Expansion domains for embedding into a two-variable Laurent field.
/// Naming: first variable dominates (expansions descend in it).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// axes (λ, μ), poles expand with μ dominant
    MuLambda,
    /// axes (λ, μ), poles expand with λ dominant
    LambdaMu,
    /// axes (λ, ν): μ = ν−λ, ν dominant
    NuLambda,
    /// axes (λ, ν): μ = ν−λ, λ dominant
    LambdaNu,
    /// axes (μ, ν): λ = ν−μ, ν dominant
    NuMu,
    /// axes (μ, ν): λ = ν−μ, μ dominant
    MuNu,
}

/// Embed a canonical element into the Laurent expansion along `route`,
/// keeping exponents down to `floor` on each axis. Output axes for the
/// ν-routes are (λ or μ, ν) stored in the series' (λ, μ) slots.
pub fn iota_embed(e: &VlmElem, route: Route, floor: i64) -> DoubleSeries {
    let ctx = e.ctx().clone();
    let mut out = DoubleSeries::zero(&ctx, floor, floor);
    for (&(a, b, c), v) in e.terms() {
        debug_assert!(c == 0 || b == 0);
        match route {
            Route::MuLambda | Route::LambdaMu => {
                let mu_dom = route == Route::MuLambda;
                if c == 0 {
                    out.term(a, b, v.clone());
                } else {
                    // ν^{−c} = Σ_k C(−c,k) sub^k dom^{−c−k}
                    let mut k = 0i64;
                    loop {
                        let (da, db) = if mu_dom {
                            (a + k, b - c as i64 - k)
                        } else {
                            (a - c as i64 - k, b + k)
                        };
                        if (mu_dom && db < floor) || (!mu_dom && da < floor) {
                            break;
                        }
                        out.term(da, db, v.scale(&binom(-(c as i64), k as u32)));
                        k += 1;
                    }
                }
            }
            Route::NuLambda | Route::LambdaNu | Route::NuMu | Route::MuNu => {
                // Rewrite the eliminated variable. Kept slot-1 variable:
                // λ for the first two routes, μ for the others.
                let (kept_exp, gone_exp) = match route {
                    Route::NuLambda | Route::LambdaNu => (a, b),
                    _ => (b, a),
                };
                // gone = ν − kept
                let nu_exp = -(c as i64);
                if gone_exp >= 0 {
                    for k in 0..=gone_exp {
                        let sign = if k % 2 == 0 { 1 } else { -1 };
                        let w = binom(gone_exp, k as u32) * num::BigRational::from_integer(sign.into());
                        out.term(kept_exp + k, nu_exp + gone_exp - k, v.scale(&w));
                    }
                } else {
                    let dom_is_nu = matches!(route, Route::NuLambda | Route::NuMu);
                    // (ν − kept)^g, g < 0: descending in the dominant slot
                    let mut k = 0i64;
                    loop {
                        let (dk, dn, sign_pow) = if dom_is_nu {
                            // Σ C(g,k) (−kept)^k ν^{g−k}
                            (kept_exp + k, nu_exp + gone_exp - k, k)
                        } else {
                            // Σ C(g,k) ν^k (−kept)^{g−k}
                            (kept_exp + gone_exp - k, nu_exp + k, gone_exp - k)
                        };
                        if (dom_is_nu && dn < floor) || (!dom_is_nu && dk < floor) {
                            break;
                        }
                        let sign = if sign_pow.rem_euclid(2) == 0 { 1 } else { -1 };
                        let w = binom(gone_exp, k as u32) * num::BigRational::from_integer(sign.into());
                        out.term(dk, dn, v.scale(&w));
                        k += 1;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::CtxBuilder;

    fn ctx() -> Ctx {
        CtxBuilder::new(["u"]).build().unwrap()
    }

    fn one(c: &Ctx) -> DiffExpr {
        DiffExpr::one(c)
    }

    fn p(s: &str, c: &Ctx) -> DiffExpr {
        crate::parse::parse_expr(s, c).unwrap()
    }

    #[test]
    fn basis_coordinates() {
        let c = ctx();
        // λμ is already canonical: degree 2, coordinate at (1,1,0)
        let e = VlmElem::term(1, 1, 0, one(&c));
        assert_eq!(e.coord(1, 1, 0), one(&c));
        assert_eq!(e.degrees(), vec![2]);
    }

    #[test]
    fn partial_fraction_mixed_pole() {
        let c = ctx();
        // (λ+μ)^{−1}(λ−μ) = 2λ(λ+μ)^{−1} − 1
        let mut e = VlmElem::zero(&c);
        e.insert(1, 0, -1, one(&c));
        e.insert(0, 1, -1, -one(&c));
        assert_eq!(e.coord(1, 0, 1), p("2", &c));
        assert_eq!(e.coord(0, 0, 0), p("-1", &c));
        assert_eq!(e.terms().count(), 2);
    }

    #[test]
    fn negative_mu_reduction() {
        let c = ctx();
        // μ^{−1}ν^{−1} = λ^{−1}μ^{−1} − λ^{−1}ν^{−1}
        let mut e = VlmElem::zero(&c);
        e.insert(0, -1, -1, one(&c));
        assert_eq!(e.coord(-1, -1, 0), one(&c));
        assert_eq!(e.coord(-1, 0, 1), p("-1", &c));
    }

    #[test]
    fn normalize_idempotent() {
        let c = ctx();
        let mut e = VlmElem::zero(&c);
        e.insert(2, 3, -2, p("u'", &c));
        let n1 = vlm_normalize(&e);
        let n2 = vlm_normalize(&n1);
        assert!(n1.sub(&n2).is_zero());
        for (&(_, b, cc), _) in n1.terms() {
            assert!(cc == 0 || b == 0);
        }
    }

    #[test]
    fn iota_binomial_expansion() {
        let c = ctx();
        let e = VlmElem::term(0, 0, -1, one(&c));
        let s = iota_embed(&e, Route::MuLambda, -5);
        // Σ_k C(−1,k) λ^k μ^{−1−k} = μ^{−1} − λμ^{−2} + λ²μ^{−3} − …
        assert_eq!(s.coeff(0, -1), one(&c));
        assert_eq!(s.coeff(1, -2), p("-1", &c));
        assert_eq!(s.coeff(2, -3), one(&c));
        assert_eq!(s.coeff(3, -4), p("-1", &c));
        let s2 = iota_embed(&e, Route::LambdaMu, -5);
        assert_eq!(s2.coeff(-1, 0), one(&c));
        assert_eq!(s2.coeff(-2, 1), p("-1", &c));
    }

    #[test]
    fn iota_routes_agree_on_polynomials() {
        let c = ctx();
        // (λ+μ)² has no pole: both λμ-routes give identical expansions
        let e = VlmElem::term(0, 0, 2, p("u", &c));
        let a = iota_embed(&e, Route::MuLambda, -4);
        let b = iota_embed(&e, Route::LambdaMu, -4);
        assert!(a.sub(&b).is_zero_within(-4, -4));
        assert_eq!(a.coeff(1, 1), p("2*u", &c));
    }

    #[test]
    fn nu_route_eliminates_mu() {
        let c = ctx();
        // λμ = λ(ν−λ) = λν − λ² on axes (λ, ν)
        let e = VlmElem::term(1, 1, 0, one(&c));
        let s = iota_embed(&e, Route::NuLambda, -4);
        assert_eq!(s.coeff(1, 1), one(&c));
        assert_eq!(s.coeff(2, 0), p("-1", &c));
    }

    #[test]
    fn shifted_product_matches_expansion() {
        let c = ctx();
        // (λ+∂)u' · 1: shift in the λ slot of e₁ = λ against e₂ = u'
        let e1 = VlmElem::term(1, 0, 0, one(&c));
        let e2 = VlmElem::term(0, 0, 0, p("u'", &c));
        let r = vlm_mul(&e1, &e2, VlmShift::Total, VlmShift::Zero);
        assert_eq!(r.coord(1, 0, 0), p("u'", &c));
        assert_eq!(r.coord(0, 0, 0), p("u''", &c));

        // ν-slot shift: (λ+μ+2∂)² on u with S=T=∂
        let e3 = VlmElem::term(0, 0, 2, one(&c));
        let e4 = VlmElem::term(0, 0, 0, p("u", &c));
        let r2 = vlm_mul(&e3, &e4, VlmShift::Total, VlmShift::Total);
        assert_eq!(r2.coord(2, 0, 0), p("u", &c));
        assert_eq!(r2.coord(1, 1, 0), p("2*u", &c));
        assert_eq!(r2.coord(1, 0, 0), p("4*u'", &c));
        assert_eq!(r2.coord(0, 0, 0), p("4*u''", &c));
    }
}
