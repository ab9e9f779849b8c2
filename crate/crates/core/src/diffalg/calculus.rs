//! Variational calculus: variational derivatives, Fréchet derivatives,
//! evolutionary vector fields, closedness, and exactness tests.

use super::DiffExpr;
use crate::poly::{binom, rat};

/// Occurrence bound for derivative orders: every ∂f/∂u_i^{(n)} with n
/// above this vanishes. None when f cannot depend on any u_i^{(n)}.
pub fn max_order_bound(f: &DiffExpr) -> Option<i64> {
    let mut cap: Option<i64> = None;
    let mut bump = |n: Option<i64>| {
        if let Some(n) = n {
            cap = Some(cap.map_or(n, |c: i64| c.max(n)));
        }
    };
    for (_, n) in f.raw().uvar_support() {
        bump(Some(n as i64));
    }
    for v in f.raw().table_support() {
        if let Some(t) = f.ctx().aux_table(v) {
            bump(t.dord);
        }
    }
    cap
}

/// δf/δu_i = Σ_n (−∂)^n ∂f/∂u_i^{(n)}.
pub fn variational_derivative(f: &DiffExpr, i: usize) -> DiffExpr {
    let ctx = f.ctx().clone();
    let mut out = DiffExpr::zero(&ctx);
    let bound = match max_order_bound(f) {
        Some(b) => b,
        None => return out,
    };
    for n in 0..=bound as usize {
        let p = f.partial_u(i, n);
        if p.is_zero() {
            continue;
        }
        let signed = if n % 2 == 0 { p.dn(n) } else { -p.dn(n) };
        out = out + signed;
    }
    out
}

/// All components of the variational derivative.
pub fn variational_gradient(f: &DiffExpr) -> Vec<DiffExpr> {
    (0..f.ctx().nvars())
        .map(|i| variational_derivative(f, i))
        .collect()
}

/// D_P(∂)Q: (D_P Q)_i = Σ_{j,n} (∂P_i/∂u_j^{(n)}) Q_j^{(n)}.
pub fn frechet_apply(p: &[DiffExpr], q: &[DiffExpr]) -> Vec<DiffExpr> {
    assert_eq!(p.len(), q.len());
    let ctx = p[0].ctx().clone();
    let ell = ctx.nvars();
    assert_eq!(p.len(), ell);
    let mut out = vec![DiffExpr::zero(&ctx); ell];
    for i in 0..ell {
        let bound = match max_order_bound(&p[i]) {
            Some(b) => b,
            None => continue,
        };
        for j in 0..ell {
            for n in 0..=bound as usize {
                let c = p[i].partial_u(j, n);
                if !c.is_zero() {
                    out[i] = &out[i] + &(c * q[j].dn(n));
                }
            }
        }
    }
    out
}

/// D_P(∂)*Q: (D_P* Q)_i = Σ_{j,n} (−∂)^n ((∂P_j/∂u_i^{(n)}) Q_j).
pub fn frechet_adjoint_apply(p: &[DiffExpr], q: &[DiffExpr]) -> Vec<DiffExpr> {
    assert_eq!(p.len(), q.len());
    let ctx = p[0].ctx().clone();
    let ell = ctx.nvars();
    let mut out = vec![DiffExpr::zero(&ctx); ell];
    for j in 0..ell {
        let bound = match max_order_bound(&p[j]) {
            Some(b) => b,
            None => continue,
        };
        for i in 0..ell {
            for n in 0..=bound as usize {
                let c = p[j].partial_u(i, n);
                if c.is_zero() {
                    continue;
                }
                let term = (c * q[j].clone()).dn(n);
                out[i] = if n % 2 == 0 {
                    &out[i] + &term
                } else {
                    &out[i] - &term
                };
            }
        }
    }
    out
}

/// Lie bracket of evolutionary vector fields: [P,Q] = D_Q(∂)P − D_P(∂)Q.
pub fn lie_bracket(p: &[DiffExpr], q: &[DiffExpr]) -> Vec<DiffExpr> {
    let a = frechet_apply(q, p);
    let b = frechet_apply(p, q);
    a.into_iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Whether the covector F is closed: D_F(∂) = D_F(∂)*, checked
/// coefficientwise as Σ_n (∂F_i/∂u_j^{(n)}) λ^n = Σ_n (−λ−∂)^n (∂F_j/∂u_i^{(n)}).
pub fn is_closed(f: &[DiffExpr]) -> bool {
    let ell = f.len();
    let bound = f
        .iter()
        .filter_map(max_order_bound)
        .max()
        .unwrap_or(-1);
    if bound < 0 {
        return true;
    }
    let n_max = bound as usize;
    for i in 0..ell {
        for j in i..ell {
            for k in 0..=n_max {
                let lhs = f[i].partial_u(j, k);
                let mut rhs = DiffExpr::zero(f[i].ctx());
                for m in k..=n_max {
                    let c = f[j].partial_u(i, m);
                    if c.is_zero() {
                        continue;
                    }
                    let sign = if m % 2 == 0 { 1 } else { -1 };
                    let w = binom(m as i64, k as u32) * rat(sign);
                    rhs = rhs + c.dn(m - k).scale(&w);
                }
                if lhs != rhs {
                    return false;
                }
            }
        }
    }
    true
}

/// Density of the pairing ⟨F, P⟩ = ∫ Σ F_i P_i.
pub fn pairing(f: &[DiffExpr], p: &[DiffExpr]) -> DiffExpr {
    assert_eq!(f.len(), p.len());
    let ctx = f[0].ctx().clone();
    let mut out = DiffExpr::zero(&ctx);
    for (a, b) in f.iter().zip(p) {
        out = out + (a.clone() * b.clone());
    }
    out
}

/// Whether a density vanishes in the variational sense, i.e. lies in
/// ∂𝒱 + quasiconstants: all variational derivatives are zero.
pub fn density_is_zero(f: &DiffExpr) -> bool {
    (0..f.ctx().nvars()).all(|i| variational_derivative(f, i).is_zero())
}

/// Outcome of an exactness test f = g'.
#[derive(Clone, Debug)]
pub enum TdResult {
    /// Not exact; the witness is a nonzero variational derivative.
    No { index: usize, witness: DiffExpr },
    /// Exact with an antiderivative in the algebra.
    Yes(DiffExpr),
    /// All variational derivatives vanish but no antiderivative was found
    /// within the ansatz; one exists in a normal extension.
    YesInNormalExtension,
}

/// Decide whether f is a total derivative. The antiderivative search uses
/// an ansatz over monomials up to the occurrence order and degree of f,
/// with poles taken from the denominator factors of f.
pub fn is_total_derivative(f: &DiffExpr) -> TdResult {
    for i in 0..f.ctx().nvars() {
        let vd = variational_derivative(f, i);
        if !vd.is_zero() {
            return TdResult::No { index: i, witness: vd };
        }
    }
    let ctx = f.ctx().clone();
    if f.is_zero() {
        return TdResult::Yes(DiffExpr::zero(&ctx));
    }
    let dord_max = max_order_bound(f).unwrap_or(0);
    let deg_max = f.ansatz_degree() + 1;
    let mut gens = crate::solve::AnsatzGens::new(&ctx);
    gens.include_x = true;
    for v in f.raw().table_support() {
        if !ctx.is_const(v) {
            gens.aux.push(v);
        }
    }
    for (fac, e) in f.raw().den_factors() {
        gens.add_pole(fac.clone(), *e);
    }
    let candidates = crate::solve::ansatz_monomials(&ctx, dord_max, deg_max, &gens);
    let sol = crate::solve::solve_linear(
        &candidates,
        &|b| vec![b.total_derivative()],
        &[f.clone()],
        &ctx,
    );
    match sol {
        Some(s) => TdResult::Yes(crate::solve::combine(&s.particular, &candidates, &ctx)),
        None => TdResult::YesInNormalExtension,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::{AuxSpec, Ctx, CtxBuilder};

    fn plain_ctx() -> Ctx {
        CtxBuilder::new(["u"]).build().unwrap()
    }

    fn p(s: &str, ctx: &Ctx) -> DiffExpr {
        crate::parse::parse_expr(s, ctx).unwrap()
    }

    #[test]
    fn variational_derivative_basics() {
        let ctx = plain_ctx();
        // δ(u'^2/2) = -u''
        let f = p("u'^2/2", &ctx);
        assert_eq!(variational_derivative(&f, 0), p("-u''", &ctx));
        // total derivatives are annihilated
        let g = p("u*u''' + x*u'", &ctx).total_derivative();
        assert!(variational_derivative(&g, 0).is_zero());
        assert!(density_is_zero(&g));
        assert!(!density_is_zero(&p("u'^2", &ctx)));
    }

    #[test]
    fn variational_derivative_sqrt_density() {
        let ctx = CtxBuilder::new(["u"])
            .constants(["b2", "b3"])
            .aux(AuxSpec::Sqrt {
                name: "s".into(),
                arg: "b2 + b3*u'^2".into(),
            })
            .build()
            .unwrap();
        // δ∫s = -b3 (u'/s)' = -b2 b3 u''/s^3
        let vd = variational_derivative(&p("s", &ctx), 0);
        let direct = -(p("b3*u'/s", &ctx).total_derivative());
        assert_eq!(vd, direct);
        assert_eq!(vd, p("-b2*b3*u''/s^3", &ctx));
    }

    #[test]
    fn lie_bracket_values() {
        let ctx = plain_ctx();
        let x_flow = vec![p("u'", &ctx)];
        let q = vec![p("u''", &ctx)];
        assert!(lie_bracket(&x_flow, &q)[0].is_zero());
        let pfield = vec![p("u*u'", &ctx)];
        let br = lie_bracket(&pfield, &q);
        assert_eq!(br[0], p("2*u'*u''", &ctx));
        assert!(lie_bracket(&pfield, &pfield)[0].is_zero());
    }

    #[test]
    fn closedness() {
        let ctx = plain_ctx();
        // variational gradients are closed
        let grads = variational_gradient(&p("u*u'^2 + u^4", &ctx));
        assert!(is_closed(&grads));
        // F = u' is not: its derivative operator is skew
        assert!(!is_closed(&[p("u'", &ctx)]));
    }

    #[test]
    fn exactness_results() {
        let ctx = plain_ctx();
        match is_total_derivative(&p("u'*u''", &ctx)) {
            TdResult::Yes(g) => assert_eq!(g.total_derivative(), p("u'*u''", &ctx)),
            other => panic!("expected Yes, got {:?}", other),
        }
        match is_total_derivative(&p("x", &ctx)) {
            TdResult::Yes(g) => assert_eq!(g.total_derivative(), p("x", &ctx)),
            other => panic!("expected Yes, got {:?}", other),
        }
        match is_total_derivative(&p("u''^2", &ctx)) {
            TdResult::No { witness, .. } => assert!(!witness.is_zero()),
            other => panic!("expected No, got {:?}", other),
        }
        // u''/u' = (log u')' has no antiderivative in the algebra
        match is_total_derivative(&p("u''/u'", &ctx)) {
            TdResult::YesInNormalExtension => (),
            other => panic!("expected extension case, got {:?}", other),
        }
    }

    #[test]
    fn frechet_and_adjoint_pair() {
        let ctx = plain_ctx();
        // ∫ Q · D_P R = ∫ R · D_P* Q up to total derivatives
        let pf = vec![p("u*u'' + u'^2", &ctx)];
        let q = vec![p("u'", &ctx)];
        let r = vec![p("u^2", &ctx)];
        let lhs = pairing(&q, &frechet_apply(&pf, &r));
        let rhs = pairing(&r, &frechet_adjoint_apply(&pf, &q));
        assert!(density_is_zero(&(lhs - rhs)));
    }
}
