//! Closed-form hierarchies for the Liouville-type pairs with a1 = b1 = 0.
//!
//! Three one-parameter families admit explicit towers: the square-root
//! family (b2, b3 both nonzero), the power family (b3 = 0), and the inverse
//! family (b2 = 0). Each tower is returned together with a fully populated
//! ladder whose links are verified symbolically, so the binomial and double
//! factorial coefficients are checked against the recursion rather than
//! trusted. Densities are normalized so that the variational gradient of
//! h_n equals the stored gradient ξ_n.

use super::ladder::{verify_ladder, DensityInfo, LadderState};
use super::MagriError;
use crate::diffalg::{AuxSpec, Ctx, CtxBuilder, DiffExpr};
use crate::ore::{FractionPair, MatOp, PseudoDiffOp};
use crate::parse::parse_expr;
use crate::poly::{rat as rint, Rat};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LiouvilleCase {
    /// b2, b3 nonzero: tower in inverse powers of sqrt(b2 + b3 u'^2).
    Sqrt,
    /// b3 = 0: tower in odd powers of u'.
    Power,
    /// b2 = 0: tower in inverse even powers of u'.
    Inverse,
}

/// A closed-form tower P_0..P_n, h_0..h_n with its verified ladder. The
/// ladder carries a short explicit prefix, so the tower entry P_m sits at
/// ladder position m + offset.
pub struct ClosedFormFamily {
    pub case: LiouvilleCase,
    pub p: Vec<DiffExpr>,
    pub h: Vec<DiffExpr>,
    pub state: LadderState,
    pub offset: usize,
}

fn binom(n: i64, k: i64) -> Rat {
    let mut out = rint(1);
    for i in 0..k {
        out = out * rint(n - i) / rint(i + 1);
    }
    out
}

/// Double factorial with (-1)!! = 0!! = 1.
fn dfact(k: i64) -> Rat {
    let mut out = rint(1);
    let mut j = k;
    while j > 1 {
        out = out * rint(j);
        j -= 2;
    }
    out
}

fn scale(e: &DiffExpr, r: Rat) -> DiffExpr {
    e.clone() * DiffExpr::from_rat(r, e.ctx())
}

/// Context with the constants a2, a3, b2, b3 and, for the square-root
/// family, the auxiliary s = sqrt(b2 + b3 u'^2).
pub fn liouville_closed_ctx(case: LiouvilleCase) -> Ctx {
    let builder = CtxBuilder::new(["u"]).constants(["a2", "a3", "b2", "b3"]);
    let builder = match case {
        LiouvilleCase::Sqrt => builder.aux(AuxSpec::Sqrt {
            name: "s".into(),
            arg: "b2 + b3*u'^2".into(),
        }),
        _ => builder,
    };
    builder.build().unwrap()
}

fn p(s: &str, ctx: &Ctx) -> DiffExpr {
    parse_expr(s, ctx).unwrap_or_else(|e| panic!("closed-form template {s}: {e}"))
}

fn op(terms: Vec<(i64, &str)>, ctx: &Ctx) -> PseudoDiffOp {
    PseudoDiffOp::from_terms(terms.into_iter().map(|(n, s)| (n, p(s, ctx))), ctx)
}

/// A = ((a2 + a3 u'^2)/u'')d - a3 u' over B = d∘(1/u'')∘d; the minimal
/// fraction of a2 d⁻¹ + a3 u'∘d⁻¹∘u' with these constants.
fn h_fraction(ctx: &Ctx) -> FractionPair {
    let a = MatOp::scalar(op(vec![(1, "(a2 + a3*u'^2)/u''"), (0, "-a3*u'")], ctx));
    let inner =
        PseudoDiffOp::from_expr(&p("1/u''", ctx)).compose(&PseudoDiffOp::d_power(1, ctx), None);
    let b = MatOp::scalar(PseudoDiffOp::d_power(1, ctx).compose(&inner, None));
    FractionPair::new(a, b)
}

fn k_fraction(case: LiouvilleCase, ctx: &Ctx) -> FractionPair {
    match case {
        LiouvilleCase::Sqrt => {
            let c = MatOp::scalar(op(vec![(1, "(b2 + b3*u'^2)/u''"), (0, "-b3*u'")], ctx));
            FractionPair::new(c, h_fraction(ctx).b)
        }
        LiouvilleCase::Power => {
            let c = MatOp::scalar(PseudoDiffOp::from_expr(&p("b2", ctx)));
            let d = MatOp::scalar(PseudoDiffOp::d_power(1, ctx));
            FractionPair::new(c, d)
        }
        LiouvilleCase::Inverse => {
            let c = MatOp::scalar(PseudoDiffOp::from_expr(&p("b3*u'", ctx)));
            let d = MatOp::scalar(
                PseudoDiffOp::from_expr(&p("1/u'", ctx))
                    .compose(&PseudoDiffOp::d_power(1, ctx), None),
            );
            FractionPair::new(c, d)
        }
    }
}

/// s^{-m} for odd m, canonicalized as s/(b2 + b3 u'^2)^{(m+1)/2}.
fn s_inv_pow(m: i64, ctx: &Ctx) -> DiffExpr {
    assert!(m >= 1 && m % 2 == 1);
    p("s", ctx) * p("b2 + b3*u'^2", ctx).pow(-(m + 1) / 2)
}

fn sqrt_family(n_max: usize, ctx: &Ctx) -> (Vec<DiffExpr>, Vec<DiffExpr>, Vec<DiffExpr>) {
    let delta = p("a2*b3 - a3*b2", ctx);
    let mut ps = Vec::new();
    let mut hs = Vec::new();
    let mut fs = Vec::new();
    for n in 0..=n_max as i64 {
        let mut pn = DiffExpr::zero(ctx);
        let mut fnn = DiffExpr::zero(ctx);
        for k in 0..=n {
            let c = scale(
                &(delta.pow(n - k + 1) * p("a3", ctx).pow(k) * p("b3", ctx).pow(-n)),
                binom(n, k) * dfact(2 * n - 1 - 2 * k) / dfact(2 * n - 2 * k),
            );
            let basis = s_inv_pow(2 * (n - k) + 1, ctx);
            pn = pn + c.clone() * p("-u'", ctx) * basis.clone();
            fnn = fnn + scale(&(c * basis / p("b3", ctx)), rint(1) / rint(2 * (n - k) + 2));
        }
        ps.push(pn);
        hs.push(-fnn.clone());
        fs.push(fnn);
    }
    (ps, hs, fs)
}

/// Shared shape of the power and inverse towers: binomial and double
/// factorial weights against a geometric basis in u'. Entry 0 of the
/// output belongs to the ladder prefix, the tower proper starts at 1.
fn binomial_tower(
    n_max: usize,
    ctx: &Ctx,
    // constant names (hi, lo, den): terms carry hi^{m+1-k} lo^k / den^{m+1}
    names: (&str, &str, &str),
    // u'-exponent of the k-th basis element in P_m and h_m
    p_exp: fn(i64) -> i64,
    h_exp: fn(i64) -> i64,
) -> (Vec<DiffExpr>, Vec<DiffExpr>) {
    let hi = p(names.0, ctx);
    let lo = p(names.1, ctx);
    let den = p(names.2, ctx);
    let up = p("u'", ctx);
    let mut ps = Vec::new();
    let mut hs = Vec::new();
    for m in -1..=(n_max as i64) {
        let n = m + 1;
        let mut pm = DiffExpr::zero(ctx);
        let mut hm = DiffExpr::zero(ctx);
        for k in 0..=n {
            let cst = hi.pow(n - k) * lo.pow(k);
            pm = pm
                + scale(
                    &(cst.clone() * den.pow(-n) * up.pow(p_exp(k))),
                    binom(n, k) * dfact(2 * k - 1) / dfact(2 * k),
                );
            hm = hm
                + scale(
                    &(cst * den.pow(-n - 1) * up.pow(h_exp(k))),
                    binom(n, k) * dfact(2 * k - 1) / dfact(2 * k + 2),
                );
        }
        ps.push(pm);
        hs.push(hm);
    }
    (ps, hs)
}

/// Build the tower of order n together with its verified ladder.
pub fn closed_form_liouville(
    case: LiouvilleCase,
    n: usize,
    ctx: &Ctx,
) -> Result<ClosedFormFamily, MagriError> {
    let h = h_fraction(ctx);
    let k = k_fraction(case, ctx);
    let mut state = LadderState::new(h, k);
    let (ps, hs, offset) = match case {
        LiouvilleCase::Sqrt => {
            let (ps, hs, fs) = sqrt_family(n, ctx);
            state.push_witness(vec![p("u'/a2", ctx)]);
            state.push_witness(vec![p("u'/b2", ctx)]);
            state.push_witness(vec![p("-1/a3", ctx)]);
            state.push_witness(vec![p("-1/b3 - s", ctx)]);
            state.push_witness(vec![p("-s", ctx)]);
            state.set_density(0, DensityInfo::Known(DiffExpr::zero(ctx)));
            state.set_density(1, DensityInfo::Known(p("s", ctx)));
            for (m, f) in fs.iter().enumerate() {
                state.push_witness(vec![f.clone()]);
                state.set_density(m + 2, DensityInfo::Known(hs[m].clone()));
                if m + 1 < fs.len() {
                    // shared denominator: the same witness closes both links
                    state.push_witness(vec![f.clone()]);
                }
            }
            (ps, hs, 2usize)
        }
        LiouvilleCase::Power => {
            // the negated densities are the horizontal witnesses; entry -1
            // of the tower supplies the prefix
            let (mut ps, mut hs) =
                binomial_tower(n, ctx, ("a2", "a3", "b2"), |k| 2 * k + 1, |k| 2 * k + 2);
            for hm in &mut hs {
                *hm = -hm.clone();
            }
            let h_prev = hs.remove(0);
            let p_prev = ps.remove(0);
            state.push_witness(vec![p("-1/a3", ctx)]);
            state.push_witness(vec![p_prev / p("b2", ctx)]);
            state.set_density(0, DensityInfo::Known(h_prev.clone()));
            let mut g = -h_prev;
            for (m, pm) in ps.iter().enumerate() {
                state.push_witness(vec![g.clone()]);
                state.push_witness(vec![pm.clone() / p("b2", ctx)]);
                state.set_density(m + 1, DensityInfo::Known(hs[m].clone()));
                g = -hs[m].clone();
            }
            (ps, hs, 1usize)
        }
        LiouvilleCase::Inverse => {
            let (mut ps, mut hs) =
                binomial_tower(n, ctx, ("a3", "a2", "b3"), |k| -2 * k, |k| -(2 * k + 1));
            let h_prev = hs.remove(0);
            let p_prev = ps.remove(0);
            state.push_witness(vec![p("u'/a2", ctx)]);
            state.push_witness(vec![p_prev / p("b3*u'", ctx)]);
            state.set_density(0, DensityInfo::Known(h_prev.clone()));
            let mut g = -h_prev;
            for (m, pm) in ps.iter().enumerate() {
                state.push_witness(vec![g.clone()]);
                state.push_witness(vec![pm.clone() / p("b3*u'", ctx)]);
                state.set_density(m + 1, DensityInfo::Known(hs[m].clone()));
                g = -hs[m].clone();
            }
            (ps, hs, 1usize)
        }
    };
    let report = verify_ladder(&state);
    if !report.all_ok() {
        return Err(MagriError::Shape(format!(
            "closed forms fail the recursion at link {}",
            report
                .first_failure()
                .map(|l| l.label.clone())
                .unwrap_or_default()
        )));
    }
    for (m, pm) in ps.iter().enumerate() {
        if state.p(m + offset) != vec![pm.clone()] {
            return Err(MagriError::Shape(format!(
                "tower entry {m} disagrees with the ladder"
            )));
        }
    }
    Ok(ClosedFormFamily {
        case,
        p: ps,
        h: hs,
        state,
        offset,
    })
}

/// Constants of the exponential-weight recursion. b12 must satisfy
/// b12^2 = -b2/b1 in the context (a constant square root generator), or be
/// zero for the degenerate b2 = 0 variant.
pub struct PqConstants {
    pub a1: DiffExpr,
    pub a2: DiffExpr,
    pub b1: DiffExpr,
    pub b2: DiffExpr,
    pub b12: DiffExpr,
}

/// Polynomial pairs of the exponential-weight recursion: p_{n+1} =
/// (a1/b1) p_n + ((a2 b1 - a1 b2)/b1^2) q_n with q_n'' + 2 b12 q_n' = p_n,
/// starting from p_0 = 0. The free constant of each q_n comes from eps.
pub struct PqData {
    pub p: Vec<DiffExpr>,
    pub q: Vec<DiffExpr>,
}

/// x-coefficients of an x-polynomial over the quasiconstants, lowest first.
fn x_coeffs(f: &DiffExpr, ctx: &Ctx) -> Result<Vec<DiffExpr>, MagriError> {
    if f.dord().is_some() {
        return Err(MagriError::Shape(
            "pq recursion left the x-polynomial ring".into(),
        ));
    }
    if f.is_zero() {
        return Ok(Vec::new());
    }
    let x = p("x", ctx);
    let mut derivs = vec![f.clone()];
    while !derivs.last().unwrap().is_zero() {
        if derivs.len() > 64 {
            return Err(MagriError::Shape("pq degree overflow".into()));
        }
        derivs.push(derivs.last().unwrap().total_derivative());
    }
    let degree = derivs.len() - 2;
    let mut coeffs = vec![DiffExpr::zero(ctx); degree + 1];
    let mut rest = f.clone();
    let mut fact = rint(1);
    for i in 2..=degree {
        fact = fact * rint(i as i64);
    }
    for i in (0..=degree).rev() {
        // after stripping higher terms the i-th derivative of rest is i! c_i
        let mut di = rest.clone();
        for _ in 0..i {
            di = di.total_derivative();
        }
        let ci = scale(&di, rint(1) / fact.clone());
        rest = rest - ci.clone() * x.pow(i as i64);
        coeffs[i] = ci;
        if i > 0 {
            fact = fact / rint(i as i64);
        }
    }
    debug_assert!(rest.is_zero());
    Ok(coeffs)
}

pub fn pq_polynomials(
    consts: &PqConstants,
    eps: &[DiffExpr],
    n: usize,
) -> Result<PqData, MagriError> {
    let ctx = consts.a1.ctx().clone();
    if eps.len() < n + 1 {
        return Err(MagriError::Shape(format!(
            "need {} integration constants, got {}",
            n + 1,
            eps.len()
        )));
    }
    let x = p("x", &ctx);
    let kappa = (consts.a2.clone() * consts.b1.clone() - consts.a1.clone() * consts.b2.clone())
        / (consts.b1.clone() * consts.b1.clone());
    let degenerate = consts.b12.is_zero();
    let mut ps = vec![DiffExpr::zero(&ctx)];
    let mut qs: Vec<DiffExpr> = Vec::new();
    for step in 0..=n {
        let pn = ps[step].clone();
        let coeffs = x_coeffs(&pn, &ctx)?;
        let q = if degenerate {
            // q'' = p: integrate twice, the linear term is the free choice
            let mut q = eps[step].clone() * x.clone();
            for (i, c) in coeffs.iter().enumerate() {
                let denom = rint((i + 1) as i64) * rint((i + 2) as i64);
                q = q + scale(c, rint(1) / denom) * x.pow((i + 2) as i64);
            }
            q
        } else {
            // q'' + 2 b12 q' = p solved from the top coefficient down
            let d = coeffs.len();
            let mut cq = vec![DiffExpr::zero(&ctx); d + 2];
            for i in (0..d).rev() {
                let num = coeffs[i].clone()
                    - scale(&cq[i + 2], rint((i + 2) as i64) * rint((i + 1) as i64));
                cq[i + 1] = num / scale(&consts.b12, rint(2) * rint((i + 1) as i64));
            }
            let mut q = eps[step].clone();
            for (j, c) in cq.iter().enumerate().skip(1) {
                q = q + c.clone() * x.pow(j as i64);
            }
            q
        };
        // invariant: the defining equation holds exactly
        let lhs = q.total_derivative().total_derivative()
            + scale(&consts.b12, rint(2)) * q.total_derivative();
        if lhs != pn {
            return Err(MagriError::Shape(format!(
                "pq step {step}: quotient does not satisfy its equation"
            )));
        }
        qs.push(q.clone());
        if step < n {
            let next = consts.a1.clone() / consts.b1.clone() * pn + kappa.clone() * q;
            ps.push(next);
        }
    }
    Ok(PqData { p: ps, q: qs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_tower_matches_the_recursion() {
        let ctx = liouville_closed_ctx(LiouvilleCase::Sqrt);
        let fam = closed_form_liouville(LiouvilleCase::Sqrt, 2, &ctx).unwrap();
        assert_eq!(fam.p[0], p("(a3*b2 - a2*b3)*u'/s", &ctx));
        assert_eq!(
            fam.p[1],
            p(
                "-(a2*b3 - a3*b2)*a3*u'/(b3*s) - (a2*b3 - a3*b2)^2*u'/(2*b3*(b2 + b3*u'^2)*s)",
                &ctx
            )
        );
        assert_eq!(fam.h[0], p("-(a2*b3 - a3*b2)/(2*b3*s)", &ctx));
        assert_eq!(fam.offset, 2);
        assert_eq!(fam.state.n_p(), 5);
    }

    #[test]
    fn power_tower_matches_the_recursion() {
        let ctx = liouville_closed_ctx(LiouvilleCase::Power);
        let fam = closed_form_liouville(LiouvilleCase::Power, 3, &ctx).unwrap();
        assert_eq!(fam.p[0], p("a2*u'/b2 + a3*u'^3/(2*b2)", &ctx));
        assert_eq!(fam.h[0], p("-a2*u'^2/(2*b2^2) - a3*u'^4/(8*b2^2)", &ctx));
        assert_eq!(
            fam.p[1],
            p("a2^2*u'/b2^2 + a2*a3*u'^3/b2^2 + 3*a3^2*u'^5/(8*b2^2)", &ctx)
        );
    }

    #[test]
    fn inverse_tower_matches_the_recursion() {
        let ctx = liouville_closed_ctx(LiouvilleCase::Inverse);
        let fam = closed_form_liouville(LiouvilleCase::Inverse, 3, &ctx).unwrap();
        assert_eq!(fam.p[0], p("a3/b3 + a2/(2*b3*u'^2)", &ctx));
        assert_eq!(fam.h[0], p("a3/(2*b3^2*u') + a2/(8*b3^2*u'^3)", &ctx));
    }

    #[test]
    fn pq_recursion_grows_degree_one_per_step() {
        let ctx = CtxBuilder::new(["u"])
            .constants(["a1", "a2", "b1", "b2", "e0", "e1", "e2"])
            .aux(AuxSpec::ConstSqrt {
                name: "r".into(),
                value: "-b2/b1".into(),
            })
            .build()
            .unwrap();
        let consts = PqConstants {
            a1: p("a1", &ctx),
            a2: p("a2", &ctx),
            b1: p("b1", &ctx),
            b2: p("b2", &ctx),
            b12: p("r", &ctx),
        };
        let eps = vec![p("e0", &ctx), p("e1", &ctx), p("e2", &ctx)];
        let data = pq_polynomials(&consts, &eps, 2).unwrap();
        assert!(data.p[0].is_zero());
        assert_eq!(data.q[0], p("e0", &ctx));
        assert_eq!(data.p[1], p("(a2*b1 - a1*b2)*e0/b1^2", &ctx));
        assert_eq!(data.q[1], p("(a2*b1 - a1*b2)*e0*x/(2*b1^2*r) + e1", &ctx));
    }

    #[test]
    fn degenerate_pq_uses_double_integration() {
        let ctx = CtxBuilder::new(["u"])
            .constants(["a1", "a2", "b1", "e0", "e1"])
            .build()
            .unwrap();
        let consts = PqConstants {
            a1: p("a1", &ctx),
            a2: p("a2", &ctx),
            b1: p("b1", &ctx),
            b2: DiffExpr::zero(&ctx),
            b12: DiffExpr::zero(&ctx),
        };
        let eps = vec![p("e0", &ctx), p("e1", &ctx)];
        let data = pq_polynomials(&consts, &eps, 1).unwrap();
        assert_eq!(data.q[0], p("e0*x", &ctx));
        assert_eq!(data.p[1], p("a2*e0*x/b1", &ctx));
        assert_eq!(data.q[1], p("e1*x + a2*e0*x^3/(6*b1)", &ctx));
    }
}
