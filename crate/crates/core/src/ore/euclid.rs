//! Division with remainder and Euclidean algorithms in the Ore ring of
//! differential operators over the coefficient fraction field.
//!
//! Right division A = Q∘B + R underlies right gcds and left lcms; the
//! left-sided versions are obtained through the adjoint anti-involution.

use super::PseudoDiffOp;
use crate::diffalg::DiffExpr;

/// A = Q ∘ B + R with ord R < ord B. Both operators must be differential.
pub fn right_divide(a: &PseudoDiffOp, b: &PseudoDiffOp) -> (PseudoDiffOp, PseudoDiffOp) {
    assert!(a.is_differential() && b.is_differential(), "right_divide needs differential operators");
    let ctx = a.ctx().clone();
    let ord_b = b.order().expect("division by zero operator");
    let lead_b = b.leading().unwrap().clone();
    let mut q = PseudoDiffOp::zero(&ctx);
    let mut r = a.clone();
    while let Some(ord_r) = r.order() {
        if ord_r < ord_b {
            break;
        }
        let lead_r = r.leading().unwrap().clone();
        let qt = PseudoDiffOp::monomial(&(lead_r / lead_b.clone()), ord_r - ord_b);
        q = q.add(&qt);
        r = r.sub(&qt.compose(b, None));
    }
    (q, r)
}

/// A = B ∘ Q + R with ord R < ord B.
pub fn left_divide(a: &PseudoDiffOp, b: &PseudoDiffOp) -> (PseudoDiffOp, PseudoDiffOp) {
    let (q, r) = right_divide(&a.adjoint(None), &b.adjoint(None));
    (q.adjoint(None), r.adjoint(None))
}

fn monic(a: &PseudoDiffOp) -> PseudoDiffOp {
    match a.leading() {
        Some(l) => a.left_mul_expr(&(DiffExpr::one(a.ctx()) / l.clone())),
        None => a.clone(),
    }
}

/// Greatest common right divisor, normalized monic.
pub fn right_gcd(a: &PseudoDiffOp, b: &PseudoDiffOp) -> PseudoDiffOp {
    let mut r0 = a.clone();
    let mut r1 = b.clone();
    while !r1.is_exact_zero() {
        let (_, r2) = right_divide(&r0, &r1);
        r0 = r1;
        r1 = r2;
    }
    monic(&r0)
}

/// Extended Euclid for right division: returns (g, u, v) with
/// g = u∘A + v∘B the monic right gcd.
pub fn extended_right_euclid(
    a: &PseudoDiffOp,
    b: &PseudoDiffOp,
) -> (PseudoDiffOp, PseudoDiffOp, PseudoDiffOp) {
    let ctx = a.ctx().clone();
    let mut r0 = a.clone();
    let mut r1 = b.clone();
    let mut u0 = PseudoDiffOp::identity(&ctx);
    let mut u1 = PseudoDiffOp::zero(&ctx);
    let mut v0 = PseudoDiffOp::zero(&ctx);
    let mut v1 = PseudoDiffOp::identity(&ctx);
    while !r1.is_exact_zero() {
        let (q, r2) = right_divide(&r0, &r1);
        let u2 = u0.sub(&q.compose(&u1, None));
        let v2 = v0.sub(&q.compose(&v1, None));
        r0 = r1;
        r1 = r2;
        u0 = u1;
        u1 = u2;
        v0 = v1;
        v1 = v2;
    }
    // normalize g monic, scaling the cofactors alike
    match r0.leading() {
        Some(l) => {
            let inv = DiffExpr::one(&ctx) / l.clone();
            (
                r0.left_mul_expr(&inv),
                u0.left_mul_expr(&inv),
                v0.left_mul_expr(&inv),
            )
        }
        None => (r0, u0, v0),
    }
}

/// Least common left multiple: the minimal-order M with M = U∘A = V∘B.
/// Returns (M, U, V).
pub fn left_lcm(
    a: &PseudoDiffOp,
    b: &PseudoDiffOp,
) -> (PseudoDiffOp, PseudoDiffOp, PseudoDiffOp) {
    let ctx = a.ctx().clone();
    // run the remainder sequence one step past the gcd: the cofactors at
    // the zero remainder give u∘A + v∘B = 0, so M = u∘A = −v∘B
    let mut r0 = a.clone();
    let mut r1 = b.clone();
    let mut u0 = PseudoDiffOp::identity(&ctx);
    let mut u1 = PseudoDiffOp::zero(&ctx);
    let mut v0 = PseudoDiffOp::zero(&ctx);
    let mut v1 = PseudoDiffOp::identity(&ctx);
    assert!(
        !a.is_exact_zero() && !b.is_exact_zero(),
        "lcm of zero operator"
    );
    while !r1.is_exact_zero() {
        let (q, r2) = right_divide(&r0, &r1);
        let u2 = u0.sub(&q.compose(&u1, None));
        let v2 = v0.sub(&q.compose(&v1, None));
        r0 = r1;
        r1 = r2;
        u0 = u1;
        u1 = u2;
        v0 = v1;
        v1 = v2;
    }
    let m_raw = u1.compose(a, None);
    let l = m_raw.leading().expect("lcm vanished").clone();
    let inv = DiffExpr::one(&ctx) / l;
    (
        m_raw.left_mul_expr(&inv),
        u1.left_mul_expr(&inv),
        v1.neg().left_mul_expr(&inv),
    )
}

/// Least common right multiple via the adjoint: M = A∘P = B∘Q.
/// Returns (M, P, Q).
pub fn right_lcm(
    a: &PseudoDiffOp,
    b: &PseudoDiffOp,
) -> (PseudoDiffOp, PseudoDiffOp, PseudoDiffOp) {
    let (m, u, v) = left_lcm(&a.adjoint(None), &b.adjoint(None));
    (m.adjoint(None), u.adjoint(None), v.adjoint(None))
}

/// Greatest common left divisor via the adjoint.
pub fn left_gcd(a: &PseudoDiffOp, b: &PseudoDiffOp) -> PseudoDiffOp {
    right_gcd(&a.adjoint(None), &b.adjoint(None)).adjoint(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::{Ctx, CtxBuilder};

    fn ctx() -> Ctx {
        CtxBuilder::new(["u"]).build().unwrap()
    }

    fn p(s: &str, c: &Ctx) -> DiffExpr {
        crate::parse::parse_expr(s, c).unwrap()
    }

    #[test]
    fn right_division_fixture() {
        let c = ctx();
        // (∂² + u) = (∂ + u)(∂ − u) + (u + u' + u²)
        let a = PseudoDiffOp::from_terms([(2, p("1", &c)), (0, p("u", &c))], &c);
        let b = PseudoDiffOp::from_terms([(1, p("1", &c)), (0, p("-u", &c))], &c);
        let (q, r) = right_divide(&a, &b);
        assert_eq!(q.coeff(1).unwrap(), p("1", &c));
        assert_eq!(q.coeff(0).unwrap(), p("u", &c));
        assert_eq!(r.order(), Some(0));
        assert_eq!(r.coeff(0).unwrap(), p("u + u' + u^2", &c));
        assert!(a.sub(&q.compose(&b, None).add(&r)).is_exact_zero());
    }

    #[test]
    fn extended_euclid_identity() {
        let c = ctx();
        let a = PseudoDiffOp::from_terms([(3, p("u", &c)), (1, p("u'", &c)), (0, p("1", &c))], &c);
        let b = PseudoDiffOp::from_terms([(2, p("1", &c)), (0, p("u^2", &c))], &c);
        let (g, u, v) = extended_right_euclid(&a, &b);
        let combo = u.compose(&a, None).add(&v.compose(&b, None));
        assert!(combo.sub(&g).is_exact_zero());
    }

    #[test]
    fn common_right_factor_detected() {
        let c = ctx();
        let f = PseudoDiffOp::from_terms([(1, p("1", &c)), (0, p("u", &c))], &c);
        let a = PseudoDiffOp::from_terms([(1, p("u'", &c)), (0, p("u^2", &c))], &c).compose(&f, None);
        let b = PseudoDiffOp::from_terms([(2, p("1", &c)), (0, p("x", &c))], &c).compose(&f, None);
        let g = right_gcd(&a, &b);
        assert_eq!(g.order(), Some(1));
        let (_, r) = right_divide(&a, &g);
        assert!(r.is_exact_zero());
        let (_, r) = right_divide(&b, &g);
        assert!(r.is_exact_zero());
    }

    #[test]
    fn lcm_properties() {
        let c = ctx();
        let a = PseudoDiffOp::from_terms([(1, p("1", &c)), (0, p("u", &c))], &c);
        let b = PseudoDiffOp::from_terms([(1, p("u", &c)), (0, p("1", &c))], &c);
        let (m, u_co, v_co) = left_lcm(&a, &b);
        assert!(u_co.compose(&a, None).sub(&m).is_exact_zero());
        assert!(v_co.compose(&b, None).sub(&m).is_exact_zero());
        assert_eq!(m.order(), Some(2));
        // right lcm mirrors through the adjoint
        let (m2, pco, qco) = right_lcm(&a, &b);
        assert!(a.compose(&pco, None).sub(&m2).is_exact_zero());
        assert!(b.compose(&qco, None).sub(&m2).is_exact_zero());
    }

    #[test]
    fn left_division_mirror() {
        let c = ctx();
        let a = PseudoDiffOp::from_terms([(2, p("u", &c)), (0, p("u'", &c))], &c);
        let b = PseudoDiffOp::from_terms([(1, p("u", &c)), (0, p("1", &c))], &c);
        let (q, r) = left_divide(&a, &b);
        assert!(a.sub(&b.compose(&q, None).add(&r)).is_exact_zero());
        assert!(r.order().unwrap_or(-1) < b.order().unwrap());
    }
}
