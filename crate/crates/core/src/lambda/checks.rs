//! Exact polynomial certificates: the Poisson property of a rational
//! matrix through its fractional decomposition, and the symplectic
//! property of a differential matrix. Both reduce to identities in
//! V[λ,μ] with no series truncation.

use super::bipoly::{apply_outer, BiPoly};
use crate::diffalg::DiffExpr;
use crate::ore::{
    is_nondegenerate, skewadjoint_pair_check, FractionPair, MatOp, OreError, PseudoDiffOp,
};
use crate::diffalg::max_order_bound;

#[derive(Debug, thiserror::Error)]
pub enum LambdaError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("missing decomposition: {0}")]
    MissingDecomposition(String),
    #[error(transparent)]
    Ore(#[from] OreError),
}

/// Outcome of an exact identity check, with any nonzero residuals keyed
/// by the generator triple that produced them.
#[derive(Debug)]
pub struct IdentityReport {
    pub residuals: Vec<((usize, usize, usize), BiPoly)>,
    pub ok: bool,
}

/// Coefficientwise partial derivative of a differential operator symbol.
fn symbol_partial(op: &PseudoDiffOp, i: usize, n: usize) -> PseudoDiffOp {
    PseudoDiffOp::from_terms(
        op.terms().map(|(&m, c)| (m, c.partial_u(i, n))),
        op.ctx(),
    )
}

/// (w+∂)^n X(w) as a symbol: composition with ∂^n on the left.
fn shift_pow(op: &PseudoDiffOp, n: usize) -> PseudoDiffOp {
    PseudoDiffOp::d_power(n as i64, op.ctx()).compose(op, None)
}

/// (−∂)^n as an exact operator.
fn signed_d_power(n: usize, ctx: &crate::diffalg::Ctx) -> PseudoDiffOp {
    let op = PseudoDiffOp::d_power(n as i64, ctx);
    if n % 2 == 0 {
        op
    } else {
        op.neg()
    }
}

fn bi(lam: &PseudoDiffOp, mu: &PseudoDiffOp) -> BiPoly {
    BiPoly::from_symbol(lam, false).mul(&BiPoly::from_symbol(mu, true))
}

fn coeff_order_bound(mat: &MatOp) -> usize {
    let mut nmax = 0usize;
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            for (_, c) in mat.at(i, j).terms() {
                if let Some(b) = max_order_bound(c) {
                    nmax = nmax.max(b.max(0) as usize);
                }
            }
        }
    }
    nmax
}

/// Poisson property of H = A∘B^{-1} as an exact identity on A and B:
/// for every generator triple (i,j,k),
///
///   Σ_{s,t,n}  A*_{ks}(λ+μ+∂) [ ∂B_{sj}(μ)/∂u_t^{(n)} (λ+∂)^n A_{ti}(λ)
///                             − ∂B_{si}(λ)/∂u_t^{(n)} (μ+∂)^n A_{tj}(μ) ]
///            + B*_{ks}(λ+μ+∂) [ ∂A_{sj}(μ)/∂u_t^{(n)} (λ+∂)^n A_{ti}(λ)
///                             − ∂A_{si}(λ)/∂u_t^{(n)} (μ+∂)^n A_{tj}(μ) ]
///            + A*_{ks}(λ+μ+∂)(−λ−μ−∂)^n [ ∂A_{ti}(λ)/∂u_s^{(n)} B_{tj}(μ)
///                                        + ∂B_{ti}(λ)/∂u_s^{(n)} A_{tj}(μ) ]
///   = 0  in V[λ,μ].
///
/// Requires the pair skewadjoint (A*∘B + B*∘A = 0) and B nondegenerate.
pub fn jacobi_poly_check(a: &MatOp, b: &MatOp) -> Result<IdentityReport, LambdaError> {
    if !a.is_differential() || !b.is_differential() {
        return Err(LambdaError::Precondition(
            "decomposition entries must be differential".into(),
        ));
    }
    let pair = FractionPair::new(a.clone(), b.clone());
    if !skewadjoint_pair_check(&pair) {
        return Err(LambdaError::Precondition(
            "A*B + B*A does not vanish".into(),
        ));
    }
    if !is_nondegenerate(b) {
        return Err(LambdaError::Precondition(
            "denominator is degenerate".into(),
        ));
    }
    let ell = a.nrows();
    let nmax = coeff_order_bound(a).max(coeff_order_bound(b));
    let ctx = a.ctx().clone();
    let mut residuals = Vec::new();
    for i in 0..ell {
        for j in 0..ell {
            for k in 0..ell {
                let mut res = BiPoly::zero(&ctx);
                for s in 0..ell {
                    let a_ks_star = a.at(k, s).adjoint(None);
                    let b_ks_star = b.at(k, s).adjoint(None);
                    let mut inner1 = BiPoly::zero(&ctx);
                    let mut inner2 = BiPoly::zero(&ctx);
                    for t in 0..ell {
                        for n in 0..=nmax {
                            let sh_ti = shift_pow(a.at(t, i), n);
                            let sh_tj = shift_pow(a.at(t, j), n);
                            let db_sj = symbol_partial(b.at(s, j), t, n);
                            let db_si = symbol_partial(b.at(s, i), t, n);
                            let da_sj = symbol_partial(a.at(s, j), t, n);
                            let da_si = symbol_partial(a.at(s, i), t, n);
                            inner1 = inner1
                                .add(&bi(&sh_ti, &db_sj))
                                .sub(&bi(&db_si, &sh_tj));
                            inner2 = inner2
                                .add(&bi(&sh_ti, &da_sj))
                                .sub(&bi(&da_si, &sh_tj));
                        }
                    }
                    res = res
                        .add(&apply_outer(&a_ks_star, &inner1))
                        .add(&apply_outer(&b_ks_star, &inner2));
                    for t in 0..ell {
                        for n in 0..=nmax {
                            let da_ti = symbol_partial(a.at(t, i), s, n);
                            let db_ti = symbol_partial(b.at(t, i), s, n);
                            let inner3 = bi(&da_ti, b.at(t, j)).add(&bi(&db_ti, a.at(t, j)));
                            if inner3.is_zero() {
                                continue;
                            }
                            let op3 = a_ks_star.compose(&signed_d_power(n, &ctx), None);
                            res = res.add(&apply_outer(&op3, &inner3));
                        }
                    }
                }
                if !res.is_zero() {
                    residuals.push(((i, j, k), res));
                }
            }
        }
    }
    let ok = residuals.is_empty();
    Ok(IdentityReport { residuals, ok })
}

/// Symplectic property of a nondegenerate skewadjoint differential
/// matrix: for every generator triple (i,j,k),
///
///   Σ_n [ ∂S_{ki}(μ)/∂u_j^{(n)} λ^n − ∂S_{kj}(λ)/∂u_i^{(n)} μ^n
///       + (−λ−μ−∂)^n ∂S_{ij}(λ)/∂u_k^{(n)} ] = 0  in V[λ,μ].
pub fn symplectic_check(s: &MatOp) -> Result<IdentityReport, LambdaError> {
    if !s.is_differential() {
        return Err(LambdaError::Precondition(
            "symplectic candidate must be differential".into(),
        ));
    }
    if !s.is_square() {
        return Err(LambdaError::Precondition("matrix must be square".into()));
    }
    if !s.adjoint(None).add(s).is_exact_zero() {
        return Err(LambdaError::Precondition(
            "candidate is not skewadjoint".into(),
        ));
    }
    if !is_nondegenerate(s) {
        return Err(LambdaError::Precondition("candidate is degenerate".into()));
    }
    let ell = s.nrows();
    let nmax = coeff_order_bound(s);
    let ctx = s.ctx().clone();
    let one = DiffExpr::one(&ctx);
    let mut residuals = Vec::new();
    for i in 0..ell {
        for j in 0..ell {
            for k in 0..ell {
                let mut res = BiPoly::zero(&ctx);
                for n in 0..=nmax {
                    let t1 = BiPoly::from_symbol(&symbol_partial(s.at(k, i), j, n), true)
                        .mul(&BiPoly::term(n as u32, 0, one.clone()));
                    let t2 = BiPoly::from_symbol(&symbol_partial(s.at(k, j), i, n), false)
                        .mul(&BiPoly::term(0, n as u32, one.clone()));
                    let t3 = apply_outer(
                        &signed_d_power(n, &ctx),
                        &BiPoly::from_symbol(&symbol_partial(s.at(i, j), k, n), false),
                    );
                    res = res.add(&t1).sub(&t2).add(&t3);
                }
                if !res.is_zero() {
                    residuals.push(((i, j, k), res));
                }
            }
        }
    }
    let ok = residuals.is_empty();
    Ok(IdentityReport { residuals, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::CtxBuilder;

    fn p(s: &str, c: &crate::diffalg::Ctx) -> DiffExpr {
        crate::parse::parse_expr(s, c).unwrap()
    }

    #[test]
    fn gfz_is_poisson() {
        let c = CtxBuilder::new(["u"]).build().unwrap();
        // H = ∂: A = ∂, B = 1
        let a = MatOp::scalar(PseudoDiffOp::d_power(1, &c));
        let b = MatOp::identity(1, &c);
        let rep = jacobi_poly_check(&a, &b).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn sokolov_fraction_is_poisson() {
        let c = CtxBuilder::new(["u"]).build().unwrap();
        // u'∂^{-1}u' = A∘B^{-1} with A = u', B = (1/u')∂
        let a = MatOp::scalar(PseudoDiffOp::from_expr(&p("u'", &c)));
        let b = MatOp::scalar(PseudoDiffOp::monomial(&p("1/u'", &c), 1));
        let rep = jacobi_poly_check(&a, &b).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn shifted_derivative_bracket_fails_jacobi() {
        let c = CtxBuilder::new(["u"]).build().unwrap();
        // A = u'∂ + u''/2 is skewadjoint but not Poisson: the Jacobi
        // combination keeps a u'λ³ term
        let a = MatOp::scalar(PseudoDiffOp::from_terms(
            [(1i64, p("u'", &c)), (0i64, p("u''/2", &c))],
            &c,
        ));
        let b = MatOp::identity(1, &c);
        let rep = jacobi_poly_check(&a, &b).unwrap();
        assert!(!rep.ok);
        assert!(!rep.residuals.is_empty());
    }

    #[test]
    fn skew_precondition_enforced() {
        let c = CtxBuilder::new(["u"]).build().unwrap();
        let a = MatOp::scalar(PseudoDiffOp::from_expr(&p("u", &c)));
        let b = MatOp::identity(1, &c);
        assert!(matches!(
            jacobi_poly_check(&a, &b),
            Err(LambdaError::Precondition(_))
        ));
    }

    #[test]
    fn constant_coefficient_symplectic() {
        let c = CtxBuilder::new(["u"]).constants(["c"]).build().unwrap();
        let s = MatOp::scalar(PseudoDiffOp::monomial(&p("c", &c), 1));
        assert!(symplectic_check(&s).unwrap().ok);
    }

    #[test]
    fn sokolov_symplectic() {
        let c = CtxBuilder::new(["u"]).build().unwrap();
        // S = (1/u')∂(1/u'): order-one skewadjoint, inverse of u'∂^{-1}u'
        let op = PseudoDiffOp::monomial(&p("1/u'", &c), 1)
            .compose(&PseudoDiffOp::from_expr(&p("1/u'", &c)), None);
        let s = MatOp::scalar(op);
        assert!(symplectic_check(&s).unwrap().ok);
    }

    #[test]
    fn non_symplectic_rejected() {
        let c = CtxBuilder::new(["u"]).build().unwrap();
        // any skew first-order scalar operator is symplectic, so the
        // counterexample needs order three: S = u∂³ + (3/2)u'∂² − u'''/4
        let s = MatOp::scalar(PseudoDiffOp::from_terms(
            [
                (3i64, p("u", &c)),
                (2i64, p("3/2*u'", &c)),
                (0i64, p("-u'''/4", &c)),
            ],
            &c,
        ));
        let rep = symplectic_check(&s).unwrap();
        assert!(!rep.ok);
    }

    #[test]
    fn first_order_skew_is_symplectic() {
        let c = CtxBuilder::new(["u"]).build().unwrap();
        // f∂ + f'/2 closes for any coefficient f
        for (f, half_df) in [("u'", "u''/2"), ("u", "u'/2"), ("u'^3", "3/2*u'^2*u''")] {
            let s = MatOp::scalar(PseudoDiffOp::from_terms(
                [(1i64, p(f, &c)), (0i64, p(half_df, &c))],
                &c,
            ));
            let rep = symplectic_check(&s).unwrap();
            assert!(rep.ok, "f = {}", f);
        }
    }
}
