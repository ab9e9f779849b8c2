//! Certified insolubility of scalar association equations.
//!
//! To decide whether op·F = rhs can have any solution, the operator is
//! peeled from the left: a factor ∂ is split off exactly when the adjoint
//! applied to 1 vanishes, and the equation is replaced by its antiderivative
//! with a fresh free constant. When the adjoint test fails, a unit factor
//! built from the leading coefficient is divided out first. Each peel keeps
//! the inhomogeneity as a core expression plus carried terms with unknown
//! constant multipliers; solvability of a ∂-peel forces the variational
//! derivative of the full right side to vanish, a linear condition on the
//! constants. An inconsistent condition certifies that no choice of
//! constants, hence no solution of the original equation, exists.

use super::MagriError;
use crate::diffalg::{is_total_derivative, variational_derivative, Ctx, DiffExpr, TdResult};
use crate::ore::{MatOp, PseudoDiffOp};
use crate::poly::{Mono, Var};
use crate::solve::{combine, solve_linear_images};

/// Outcome of the obstruction analysis.
#[derive(Clone, Debug)]
pub enum BlockedVerdict {
    /// No solution exists in the algebra or any extension; the witness is
    /// the nonvanishing variational derivative of the forced inhomogeneity,
    /// taken modulo the carried directions.
    Blocked { witness: DiffExpr },
    /// No obstruction was found. A solution may exist, possibly outside
    /// the ansatz or the algebra; nothing is certified.
    Inconclusive,
}

impl BlockedVerdict {
    pub fn is_blocked(&self) -> bool {
        matches!(self, BlockedVerdict::Blocked { .. })
    }

    pub fn into_error(self) -> Option<MagriError> {
        match self {
            BlockedVerdict::Blocked { witness } => Some(MagriError::BlockedCertified { witness }),
            BlockedVerdict::Inconclusive => None,
        }
    }
}

/// Exact left quotient q with op = ∂∘q; valid only when op*(1) = 0.
fn divide_left_d(op: &PseudoDiffOp, ctx: &Ctx) -> PseudoDiffOp {
    let order = op.order().expect("nonzero operator");
    let mut g = vec![DiffExpr::zero(ctx); order as usize];
    // f_n = g_{n-1} + g_n' descending from the top coefficient
    for n in (1..=order).rev() {
        let f_n = op.coeff(n).expect("differential operator");
        let g_n = if (n as usize) < g.len() {
            g[n as usize].clone()
        } else {
            DiffExpr::zero(ctx)
        };
        g[(n - 1) as usize] = f_n - g_n.total_derivative();
    }
    PseudoDiffOp::from_terms(
        g.into_iter().enumerate().map(|(m, c)| (m as i64, c)),
        ctx,
    )
}

/// Unit candidates for clearing a failed ∂-divisibility test: inverses of
/// divisor monomials of the leading coefficient's denominator, smallest
/// first, then the leading coefficient itself.
fn unit_candidates(op: &PseudoDiffOp, ctx: &Ctx) -> Vec<DiffExpr> {
    let Some(lead) = op.leading() else {
        return Vec::new();
    };
    let mut pole_vars: Vec<(Var, u32)> = Vec::new();
    for (fac, exp) in lead.raw().den_factors() {
        let terms = fac.terms();
        if terms.len() == 1 && terms[0].0.pairs().len() == 1 {
            let (v, e) = terms[0].0.pairs()[0];
            pole_vars.push((v, e * exp));
        }
    }
    let mut monomials: Vec<(u32, Mono)> = Vec::new();
    let mut stack = vec![(0usize, Mono::one(), 0u32)];
    while let Some((i, m, deg)) = stack.pop() {
        if i == pole_vars.len() {
            if deg > 0 {
                monomials.push((deg, m));
            }
            continue;
        }
        let (v, emax) = pole_vars[i];
        for k in 0..=emax {
            let mut next = m.clone();
            if k > 0 {
                next = next.mul(&Mono::from_pairs(vec![(v, k)]));
            }
            stack.push((i + 1, next, deg + k));
        }
    }
    monomials.sort_by_key(|(deg, m)| (*deg, m.pairs().to_vec()));
    let mut out: Vec<DiffExpr> = monomials
        .into_iter()
        .map(|(_, m)| {
            let mut e = DiffExpr::one(ctx);
            for (v, k) in m.pairs() {
                e = e / DiffExpr::var(*v, ctx).pow(*k as i64);
            }
            e
        })
        .collect();
    out.push(lead.clone());
    out.dedup();
    out
}

struct PeelState {
    core: DiffExpr,
    carried: Vec<DiffExpr>,
    /// Set when a kernel direction had to be dropped; inconsistencies found
    /// afterwards are no longer certificates.
    lossy: bool,
}

/// Decide op·F = rhs for scalar chains. Matrix chains and operators with
/// nonunit obstructed factors are reported as inconclusive.
pub fn blocked_obstruction(op: &MatOp, rhs: &[DiffExpr]) -> BlockedVerdict {
    if op.nrows() != 1 || op.ncols() != 1 || rhs.len() != 1 {
        return BlockedVerdict::Inconclusive;
    }
    let ctx = op.ctx().clone();
    let mut cur = op.at(0, 0).clone();
    if !cur.is_differential() {
        return BlockedVerdict::Inconclusive;
    }
    let mut st = PeelState {
        core: rhs[0].clone(),
        carried: Vec::new(),
        lossy: false,
    };
    loop {
        let Some(order) = cur.order() else {
            // zero operator: rhs must vanish identically
            return if st.core.is_zero() || !st.carried.is_empty() || st.lossy {
                BlockedVerdict::Inconclusive
            } else {
                BlockedVerdict::Blocked {
                    witness: st.core.clone(),
                }
            };
        };
        if order == 0 {
            // multiplication equation; no differential obstruction remains
            return BlockedVerdict::Inconclusive;
        }
        let r = cur.adjoint(None).apply(&DiffExpr::one(&ctx));
        if !r.is_zero() {
            let mut peeled = false;
            for f in unit_candidates(&cur, &ctx) {
                if f.is_zero() {
                    continue;
                }
                let finv = DiffExpr::one(&ctx) / f.clone();
                let scaled = cur.left_mul_expr(&finv);
                if scaled.adjoint(None).apply(&DiffExpr::one(&ctx)).is_zero() {
                    cur = scaled;
                    st.core = st.core * finv.clone();
                    for t in &mut st.carried {
                        *t = t.clone() * finv.clone();
                    }
                    peeled = true;
                    break;
                }
            }
            if !peeled {
                return BlockedVerdict::Inconclusive;
            }
        }
        // peel one ∂: the right side must be a total derivative for some
        // choice of the carried constants
        let delta_core = variational_derivative(&st.core, 0);
        let (total, kernel_combos) = if st.carried.is_empty() {
            if !delta_core.is_zero() {
                return if st.lossy {
                    BlockedVerdict::Inconclusive
                } else {
                    BlockedVerdict::Blocked {
                        witness: delta_core,
                    }
                };
            }
            (st.core.clone(), Vec::new())
        } else {
            let images: Vec<Vec<DiffExpr>> = st
                .carried
                .iter()
                .map(|t| vec![variational_derivative(t, 0)])
                .collect();
            let neg = vec![-delta_core.clone()];
            match solve_linear_images(&images, &neg, &ctx) {
                None => {
                    return if st.lossy {
                        BlockedVerdict::Inconclusive
                    } else {
                        BlockedVerdict::Blocked {
                            witness: delta_core,
                        }
                    };
                }
                Some(sol) => {
                    let shift = combine(&sol.particular, &st.carried, &ctx);
                    let combos: Vec<DiffExpr> = sol
                        .kernel
                        .iter()
                        .map(|k| combine(k, &st.carried, &ctx))
                        .filter(|c| !c.is_zero())
                        .collect();
                    (st.core.clone() + shift, combos)
                }
            }
        };
        let mut carried_next = Vec::new();
        for combo in kernel_combos {
            match is_total_derivative(&combo) {
                TdResult::Yes(anti) => carried_next.push(anti),
                // the direction cannot be integrated here; drop it and
                // remember that later inconsistencies prove nothing
                _ => st.lossy = true,
            }
        }
        match is_total_derivative(&total) {
            TdResult::Yes(anti) => st.core = anti,
            // continuing would need an element outside the algebra
            _ => return BlockedVerdict::Inconclusive,
        }
        carried_next.push(DiffExpr::one(&ctx));
        carried_next.dedup();
        st.carried = carried_next;
        cur = divide_left_d(&cur, &ctx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::{AuxSpec, CtxBuilder};
    use crate::parse::parse_expr;

    fn p(s: &str, ctx: &Ctx) -> DiffExpr {
        parse_expr(s, ctx).unwrap()
    }

    fn op(terms: Vec<(i64, &str)>, ctx: &Ctx) -> MatOp {
        MatOp::scalar(PseudoDiffOp::from_terms(
            terms.into_iter().map(|(n, s)| (n, p(s, ctx))),
            ctx,
        ))
    }

    fn d_compose(parts: Vec<&str>, ctx: &Ctx) -> MatOp {
        // d ∘ f1 ∘ d ∘ f2 ∘ ... ∘ d
        let mut acc = PseudoDiffOp::d_power(1, ctx);
        for f in parts {
            acc = acc
                .compose(&PseudoDiffOp::from_expr(&p(f, ctx)), None)
                .compose(&PseudoDiffOp::d_power(1, ctx), None);
        }
        MatOp::scalar(acc)
    }

    fn plain_ctx() -> Ctx {
        CtxBuilder::new(["u"]).build().unwrap()
    }

    #[test]
    fn triple_d_chain_blocks_on_quadratic_sources() {
        let ctx = plain_ctx();
        let d3 = d_compose(vec!["1/u'", "1/u'"], &ctx);
        // source (1/u')(P/u')' for P = u and P = u^2: obstructed at the
        // first peel
        for (pn, expected) in [
            ("u/u'", "-u''/u'^3"),
            ("u^2/u'", "2/u' - 2*u*u''/u'^3"),
        ] {
            let rhs = vec![p("1/u'", &ctx) * p(pn, &ctx).total_derivative()];
            match blocked_obstruction(&d3, &rhs) {
                BlockedVerdict::Blocked { witness } => {
                    assert_eq!(witness, p(expected, &ctx));
                }
                BlockedVerdict::Inconclusive => panic!("{} must be blocked", pn),
            }
        }
    }

    #[test]
    fn triple_d_chain_blocks_on_the_constant_source_after_two_peels() {
        let ctx = plain_ctx();
        let d3 = d_compose(vec!["1/u'", "1/u'"], &ctx);
        let rhs = vec![p("1/u'", &ctx) * p("1/u'", &ctx).total_derivative()];
        match blocked_obstruction(&d3, &rhs) {
            BlockedVerdict::Blocked { witness } => {
                assert_eq!(witness, p("-u''/u'^3", &ctx));
            }
            BlockedVerdict::Inconclusive => panic!("constant source must be blocked"),
        }
    }

    #[test]
    fn zero_source_is_inconclusive() {
        let ctx = plain_ctx();
        let d3 = d_compose(vec!["1/u'", "1/u'"], &ctx);
        let rhs = vec![DiffExpr::zero(&ctx)];
        assert!(!blocked_obstruction(&d3, &rhs).is_blocked());
    }

    #[test]
    fn exponential_x_weight_blocks_the_heavenly_operator() {
        let ctx = CtxBuilder::new(["u"])
            .constants(["g"])
            .aux(AuxSpec::Exp {
                name: "w".into(),
                arg: "g*x".into(),
            })
            .build()
            .unwrap();
        let z = d_compose(vec!["1/u''"], &ctx);
        // gradient of the density w·u
        let rhs = vec![p("w", &ctx)];
        match blocked_obstruction(&z, &rhs) {
            BlockedVerdict::Blocked { witness } => {
                assert_eq!(witness, p("g*w", &ctx));
            }
            BlockedVerdict::Inconclusive => panic!("exponential weight must be blocked"),
        }
    }

    #[test]
    fn exponential_u_density_blocks_at_once() {
        let ctx = CtxBuilder::new(["u"])
            .constants(["g"])
            .aux(AuxSpec::Exp {
                name: "w".into(),
                arg: "g*u".into(),
            })
            .build()
            .unwrap();
        let d = MatOp::scalar(PseudoDiffOp::d_power(1, &ctx));
        // gradient of the density e^{gu}
        let rhs = vec![p("g*w", &ctx)];
        match blocked_obstruction(&d, &rhs) {
            BlockedVerdict::Blocked { witness } => {
                assert_eq!(witness, p("g^2*w", &ctx));
            }
            BlockedVerdict::Inconclusive => panic!("exponential density must be blocked"),
        }
    }

    #[test]
    fn total_derivative_source_passes_through() {
        let ctx = plain_ctx();
        let d = MatOp::scalar(PseudoDiffOp::d_power(1, &ctx));
        let rhs = vec![p("u'*u''", &ctx)];
        assert!(!blocked_obstruction(&d, &rhs).is_blocked());
    }
}
