//! Exact polynomials in λ and μ with coefficients in the algebra of
//! differential functions, and operator symbols acting on them through
//! the substitution λ+μ+∂.

use crate::diffalg::{Ctx, DiffExpr};
use crate::ore::PseudoDiffOp;
use crate::poly::binom;
use std::collections::BTreeMap;
use std::fmt;

/// Element of V[λ,μ].
#[derive(Clone, Debug)]
pub struct BiPoly {
    coeffs: BTreeMap<(u32, u32), DiffExpr>,
    ctx: Ctx,
}

impl BiPoly {
    pub fn zero(ctx: &Ctx) -> BiPoly {
        BiPoly {
            coeffs: BTreeMap::new(),
            ctx: ctx.clone(),
        }
    }

    pub fn term(a: u32, b: u32, c: DiffExpr) -> BiPoly {
        let ctx = c.ctx().clone();
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert((a, b), c);
        }
        BiPoly { coeffs, ctx }
    }

    /// λ-symbol of a differential operator as a polynomial in the first
    /// variable (λ) or second (μ).
    pub fn from_symbol(op: &PseudoDiffOp, second_var: bool) -> BiPoly {
        assert!(op.is_differential(), "symbols of differential operators only");
        let mut out = BiPoly::zero(op.ctx());
        for (&n, c) in op.terms() {
            let key = if second_var { (0, n as u32) } else { (n as u32, 0) };
            out.coeffs.insert(key, c.clone());
        }
        out
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, a: u32, b: u32) -> DiffExpr {
        self.coeffs
            .get(&(a, b))
            .cloned()
            .unwrap_or_else(|| DiffExpr::zero(&self.ctx))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &DiffExpr)> {
        self.coeffs.iter()
    }

    fn insert_add(&mut self, key: (u32, u32), val: DiffExpr) {
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

    pub fn add(&self, other: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            out.insert_add(*k, v.clone());
        }
        out
    }

    pub fn neg(&self) -> BiPoly {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = -v.clone();
        }
        out
    }

    pub fn sub(&self, other: &BiPoly) -> BiPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero(&self.ctx);
        for ((a1, b1), c1) in &self.coeffs {
            for ((a2, b2), c2) in &other.coeffs {
                out.insert_add((a1 + a2, b1 + b2), c1.clone() * c2.clone());
            }
        }
        out
    }

    pub fn mul_expr(&self, e: &DiffExpr) -> BiPoly {
        let mut out = BiPoly::zero(&self.ctx);
        for (k, v) in &self.coeffs {
            out.insert_add(*k, v.clone() * e.clone());
        }
        out
    }

    /// Swap the roles of λ and μ.
    pub fn swap_vars(&self) -> BiPoly {
        let mut out = BiPoly::zero(&self.ctx);
        for ((a, b), v) in &self.coeffs {
            out.insert_add((*b, *a), v.clone());
        }
        out
    }
}

impl fmt::Display for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        for (k, ((a, b), v)) in self.coeffs.iter().rev().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})", v)?;
            if *a > 0 {
                write!(f, "*lambda^{}", a)?;
            }
            if *b > 0 {
                write!(f, "*mu^{}", b)?;
            }
        }
        Ok(())
    }
}

/// X(λ+μ+∂) applied to an element of V[λ,μ]: each x_p (λ+μ+∂)^p expands
/// trinomially with ∂ acting on the coefficients.
pub fn apply_outer(op: &PseudoDiffOp, bp: &BiPoly) -> BiPoly {
    assert!(op.is_differential(), "outer symbol must be differential");
    let ctx = bp.ctx().clone();
    let mut out = BiPoly::zero(&ctx);
    for (&p, a) in op.terms() {
        let p = p as u32;
        for ((e1, e2), c) in bp.terms() {
            // (λ+μ+∂)^p c = Σ_{i+j≤p} C(p,i) C(p−i,j) λ^i μ^j c^{(p−i−j)}
            for i in 0..=p {
                for j in 0..=(p - i) {
                    let w = binom(p as i64, i) * binom((p - i) as i64, j);
                    let der = c.dn((p - i - j) as usize);
                    out.insert_add((e1 + i, e2 + j), (a.clone() * der).scale(&w));
                }
            }
        }
    }
    out
}

/// Notation A(λ+μ+∂)(B(λ) C(μ)): outer operator symbol against a product
/// of one-variable symbols.
#[derive(Clone, Debug)]
pub struct ThreeSlotTerm {
    pub outer: PseudoDiffOp,
    pub left: PseudoDiffOp,
    pub right: PseudoDiffOp,
}

impl ThreeSlotTerm {
    pub fn eval(&self) -> BiPoly {
        let prod = BiPoly::from_symbol(&self.left, false).mul(&BiPoly::from_symbol(&self.right, true));
        apply_outer(&self.outer, &prod)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::CtxBuilder;

    fn ctx() -> Ctx {
        CtxBuilder::new(["u"]).build().unwrap()
    }

    fn p(s: &str, c: &Ctx) -> DiffExpr {
        crate::parse::parse_expr(s, c).unwrap()
    }

    #[test]
    fn ring_arithmetic() {
        let c = ctx();
        let x = BiPoly::term(1, 0, p("u", &c));
        let y = BiPoly::term(0, 1, p("u'", &c));
        let s = x.add(&y);
        let sq = s.mul(&s);
        assert_eq!(sq.coeff(2, 0), p("u^2", &c));
        assert_eq!(sq.coeff(1, 1), p("2*u*u'", &c));
        assert_eq!(sq.coeff(0, 2), p("u'^2", &c));
        assert!(sq.sub(&sq).is_zero());
    }

    #[test]
    fn outer_shift_expansion() {
        let c = ctx();
        // ∂ at λ+μ+∂ on a constant-in-λμ coefficient: (λ+μ+∂)u = λu + μu + u'
        let op = PseudoDiffOp::d_power(1, &c);
        let res = apply_outer(&op, &BiPoly::term(0, 0, p("u", &c)));
        assert_eq!(res.coeff(1, 0), p("u", &c));
        assert_eq!(res.coeff(0, 1), p("u", &c));
        assert_eq!(res.coeff(0, 0), p("u'", &c));
    }

    #[test]
    fn three_slot_matches_manual() {
        let c = ctx();
        let t = ThreeSlotTerm {
            outer: PseudoDiffOp::monomial(&p("u", &c), 1),
            left: PseudoDiffOp::from_expr(&p("u'", &c)),
            right: PseudoDiffOp::d_power(1, &c),
        };
        // u(λ+μ+∂)(u' · μ) = u(λ+μ)u'μ + u u''μ
        let r = t.eval();
        assert_eq!(r.coeff(1, 1), p("u*u'", &c));
        assert_eq!(r.coeff(0, 2), p("u*u'", &c));
        assert_eq!(r.coeff(0, 1), p("u*u''", &c));
    }
}
