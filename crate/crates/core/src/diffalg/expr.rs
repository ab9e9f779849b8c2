//! Exact fractions of differential polynomials.
//!
//! A [`RawExpr`] is num / Π factor^exp with the denominator kept factored.
//! Invariants maintained by the single constructor [`RawExpr::make`]:
//! square relations are fully reduced in the numerator, every denominator
//! factor is primitive with positive leading coefficient and does not
//! divide the numerator, and a zero numerator forces an empty denominator.
//! Consequently `is_zero` is just a numerator test, which keeps equality
//! sound without any multivariate gcd.

use super::{Ctx, DiffContext};
use crate::poly::{rat, Mono, Poly, Rat, Var};
use num::{One, Signed, Zero};
use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct RawExpr {
    num: Poly,
    den: Vec<(Poly, u32)>,
}

fn fm_mul(a: &[(Poly, u32)], b: &[(Poly, u32)]) -> Vec<(Poly, u32)> {
    let mut out = a.to_vec();
    for (f, e) in b {
        match out.iter_mut().find(|(g, _)| g == f) {
            Some((_, e0)) => *e0 += e,
            None => out.push((f.clone(), *e)),
        }
    }
    out.sort_by(|(f, _), (g, _)| f.cmp(g));
    out
}

fn fm_lcm(a: &[(Poly, u32)], b: &[(Poly, u32)]) -> Vec<(Poly, u32)> {
    let mut out = a.to_vec();
    for (f, e) in b {
        match out.iter_mut().find(|(g, _)| g == f) {
            Some((_, e0)) => *e0 = (*e0).max(*e),
            None => out.push((f.clone(), *e)),
        }
    }
    out.sort_by(|(f, _), (g, _)| f.cmp(g));
    out
}

/// Π a^e / Π b^e as a polynomial; requires b ⊆ a.
fn fm_quotient_expand(a: &[(Poly, u32)], b: &[(Poly, u32)]) -> Poly {
    let mut out = Poly::one();
    for (f, e) in a {
        let eb = b
            .iter()
            .find(|(g, _)| g == f)
            .map(|(_, e)| *e)
            .unwrap_or(0);
        debug_assert!(eb <= *e);
        if *e > eb {
            out = out.mul(&f.pow(*e - eb));
        }
    }
    out
}

fn fm_expand(a: &[(Poly, u32)]) -> Poly {
    fm_quotient_expand(a, &[])
}

impl RawExpr {
    pub fn zero() -> RawExpr {
        RawExpr {
            num: Poly::zero(),
            den: Vec::new(),
        }
    }

    pub fn one() -> RawExpr {
        RawExpr {
            num: Poly::one(),
            den: Vec::new(),
        }
    }

    pub fn from_rat(c: Rat) -> RawExpr {
        RawExpr {
            num: Poly::constant(c),
            den: Vec::new(),
        }
    }

    pub fn from_poly(p: Poly, ctx: &DiffContext) -> RawExpr {
        RawExpr::make(p, Vec::new(), ctx)
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den_factors(&self) -> &[(Poly, u32)] {
        &self.den
    }

    pub fn den_expanded(&self) -> Poly {
        fm_expand(&self.den)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_empty() && self.num.is_one()
    }

    pub fn as_rat(&self) -> Option<Rat> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    /// Whether only constant symbols (and no x, u-variables, auxiliaries
    /// other than constant roots) occur.
    pub fn is_const_only(&self, ctx: &DiffContext) -> bool {
        let ok = |v: Var| match v.as_uvar() {
            Some(_) => false,
            None => {
                ctx.is_const(v)
                    || ctx
                        .aux_table(v)
                        .map(|t| t.dord.is_none() && t.xpart.is_zero() && t.total.is_zero())
                        .unwrap_or(false)
            }
        };
        let mut good = true;
        self.num.for_each_var(|v| good &= ok(v));
        for (f, _) in &self.den {
            f.for_each_var(|v| good &= ok(v));
        }
        good
    }

    /// The normalizing constructor; every arithmetic result passes here.
    pub fn make(num: Poly, den: Vec<(Poly, u32)>, ctx: &DiffContext) -> RawExpr {
        // reduce square relations in the numerator
        let reduced = reduce_relations(num, ctx);
        let (mut num, extra) = (reduced.num, reduced.den);
        let mut den = fm_mul(&den, &extra);

        // normalize denominator factors
        let mut scale = Rat::one();
        let mut clean: Vec<(Poly, u32)> = Vec::new();
        let mut pending: Vec<(RawExpr, u32)> = Vec::new(); // factor rewrites to fold in
        for (f, e) in den.drain(..) {
            if e == 0 || f.is_one() {
                continue;
            }
            if let Some(c) = f.as_constant() {
                assert!(!c.is_zero(), "zero denominator factor");
                for _ in 0..e {
                    scale /= c.clone();
                }
                continue;
            }
            // bare relation generator: 1/g^(2k+r) = g^r / square^(k+r)
            if let Some((m, c)) = single_term(&f) {
                if let Some(v) = single_var_power(m) {
                    if let Some(t) = ctx.aux_table(v.0) {
                        if let Some(square) = t.square.clone() {
                            let tot = (v.1 as u64) * e as u64;
                            let k = (tot / 2) as u32;
                            let r = (tot % 2) as u32;
                            for _ in 0..e {
                                scale /= c.clone();
                            }
                            if r == 1 {
                                num = num.mul(&Poly::var(v.0));
                            }
                            if k + r > 0 {
                                pending.push((square, k + r));
                            }
                            continue;
                        }
                    }
                }
            }
            // factors containing a squared relation variable: reduce and fold
            if ctx
                .relation_vars()
                .iter()
                .any(|&rv| f.degree_in(rv) >= 2)
            {
                pending.push((reduce_relations(f, ctx), e));
                continue;
            }
            let (mult, prim) = f.primitive();
            for _ in 0..e {
                scale /= &mult;
            }
            clean.push((prim, e));
        }
        num = num.scale(&scale);
        let mut result = RawExpr {
            num,
            den: normalize_factors(clean),
        };
        // fold pending rewrites: 1/(n/d)^e = d^e / n^e
        for (rw, e) in pending {
            let mut inv_num = Poly::one();
            for _ in 0..e {
                inv_num = inv_num.mul(&rw.den_expanded());
            }
            let mut extra_den = Vec::new();
            for _ in 0..e {
                extra_den = fm_mul(&extra_den, &[(rw.num.clone(), 1)]);
            }
            let piece = RawExpr::make(inv_num, extra_den, ctx);
            result = result.mul(&piece, ctx);
        }
        result.cancel();
        result
    }

    fn cancel(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        let mut den = std::mem::take(&mut self.den);
        for (f, e) in den.iter_mut() {
            while *e > 0 {
                match self.num.div_exact(f) {
                    Some(q) => {
                        self.num = q;
                        *e -= 1;
                    }
                    None => break,
                }
            }
        }
        den.retain(|(_, e)| *e > 0);
        self.den = normalize_factors(den);
    }

    pub fn add(&self, other: &RawExpr, ctx: &DiffContext) -> RawExpr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let lcm = fm_lcm(&self.den, &other.den);
        let n1 = self.num.mul(&fm_quotient_expand(&lcm, &self.den));
        let n2 = other.num.mul(&fm_quotient_expand(&lcm, &other.den));
        RawExpr::make(n1.add(&n2), lcm, ctx)
    }

    pub fn sub(&self, other: &RawExpr, ctx: &DiffContext) -> RawExpr {
        self.add(&other.neg(), ctx)
    }

    pub fn neg(&self) -> RawExpr {
        RawExpr {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, c: &Rat) -> RawExpr {
        if c.is_zero() {
            return RawExpr::zero();
        }
        RawExpr {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &RawExpr, ctx: &DiffContext) -> RawExpr {
        if self.is_zero() || other.is_zero() {
            return RawExpr::zero();
        }
        RawExpr::make(self.num.mul(&other.num), fm_mul(&self.den, &other.den), ctx)
    }

    pub fn div(&self, other: &RawExpr, ctx: &DiffContext) -> RawExpr {
        assert!(!other.is_zero(), "division by zero expression");
        if self.is_zero() {
            return RawExpr::zero();
        }
        let num = self.num.mul(&other.den_expanded());
        let den = fm_mul(&self.den, &[(other.num.clone(), 1)]);
        RawExpr::make(num, den, ctx)
    }

    pub fn pow(&self, e: i64, ctx: &DiffContext) -> RawExpr {
        if e == 0 {
            return RawExpr::one();
        }
        let base = if e < 0 {
            RawExpr::one().div(self, ctx)
        } else {
            self.clone()
        };
        let mut acc = base.clone();
        for _ in 1..e.unsigned_abs() {
            acc = acc.mul(&base, ctx);
        }
        acc
    }

    /// All u_i^{(n)} present in numerator or denominator.
    pub fn uvar_support(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        let mut visit = |p: &Poly| {
            p.for_each_var(|v| {
                if let Some(pair) = v.as_uvar() {
                    out.insert(pair);
                }
            })
        };
        visit(&self.num);
        for (f, _) in &self.den {
            visit(f);
        }
        out
    }

    /// All table generators present.
    pub fn table_support(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        let mut visit = |p: &Poly| {
            p.for_each_var(|v| {
                if v.as_table().is_some() {
                    out.insert(v);
                }
            })
        };
        visit(&self.num);
        for (f, _) in &self.den {
            visit(f);
        }
        out
    }

    fn var_total_derivative(v: Var, ctx: &DiffContext) -> RawExpr {
        if let Some((i, n)) = v.as_uvar() {
            return RawExpr {
                num: Poly::var(Var::uvar(i, n + 1)),
                den: Vec::new(),
            };
        }
        match ctx.generator(v).map(|g| &g.kind) {
            Some(super::GenKind::X) => RawExpr::one(),
            Some(super::GenKind::Const) => RawExpr::zero(),
            Some(super::GenKind::Aux(t)) => t.total.clone(),
            None => panic!("unknown generator"),
        }
    }

    fn var_partial_u(v: Var, i: usize, n: usize, ctx: &DiffContext) -> RawExpr {
        if let Some((j, m)) = v.as_uvar() {
            return if (j, m) == (i, n) {
                RawExpr::one()
            } else {
                RawExpr::zero()
            };
        }
        match ctx.generator(v).map(|g| &g.kind) {
            Some(super::GenKind::Aux(t)) => t
                .uparts
                .iter()
                .find(|((j, m), _)| (*j, *m) == (i, n))
                .map(|(_, e)| e.clone())
                .unwrap_or_else(RawExpr::zero),
            _ => RawExpr::zero(),
        }
    }

    fn var_partial_x(v: Var, ctx: &DiffContext) -> RawExpr {
        if v.as_uvar().is_some() {
            return RawExpr::zero();
        }
        match ctx.generator(v).map(|g| &g.kind) {
            Some(super::GenKind::X) => RawExpr::one(),
            Some(super::GenKind::Aux(t)) => t.xpart.clone(),
            _ => RawExpr::zero(),
        }
    }

    fn derive_with(&self, ctx: &DiffContext, dv: &dyn Fn(Var) -> RawExpr) -> RawExpr {
        // chain rule over the numerator
        let mut vars: Vec<Var> = Vec::new();
        self.num.for_each_var(|v| {
            if !vars.contains(&v) {
                vars.push(v);
            }
        });
        let mut out = RawExpr::zero();
        for v in vars {
            let dvv = dv(v);
            if dvv.is_zero() {
                continue;
            }
            let dn = RawExpr {
                num: self.num.derivative(v),
                den: self.den.clone(),
            };
            out = out.add(&dn.mul(&dvv, ctx), ctx);
        }
        // quotient rule over denominator factors
        for (idx, (f, e)) in self.den.iter().enumerate() {
            let mut fvars: Vec<Var> = Vec::new();
            f.for_each_var(|v| {
                if !fvars.contains(&v) {
                    fvars.push(v);
                }
            });
            let mut df = RawExpr::zero();
            for v in fvars {
                let dvv = dv(v);
                if dvv.is_zero() {
                    continue;
                }
                df = df.add(
                    &RawExpr::from_poly(f.derivative(v), ctx).mul(&dvv, ctx),
                    ctx,
                );
            }
            if df.is_zero() {
                continue;
            }
            // -e * num * df / (f^(e+1) * rest)
            let mut den = self.den.clone();
            den[idx].1 = e + 1;
            let piece = RawExpr::make(self.num.scale(&rat(-(*e as i64))), den, ctx).mul(&df, ctx);
            out = out.add(&piece, ctx);
        }
        out
    }

    pub fn total_derivative(&self, ctx: &DiffContext) -> RawExpr {
        self.derive_with(ctx, &|v| RawExpr::var_total_derivative(v, ctx))
    }

    pub fn partial_u(&self, i: usize, n: usize, ctx: &DiffContext) -> RawExpr {
        self.derive_with(ctx, &|v| RawExpr::var_partial_u(v, i, n, ctx))
    }

    pub fn partial_x(&self, ctx: &DiffContext) -> RawExpr {
        self.derive_with(ctx, &|v| RawExpr::var_partial_x(v, ctx))
    }

    /// Max n with ∂f/∂u_i^{(n)} ≠ 0 over all i; None for quasiconstants.
    pub fn dord(&self, ctx: &DiffContext) -> Option<i64> {
        let mut cap: Option<i64> = None;
        let mut bump = |n: Option<i64>| {
            if let Some(n) = n {
                cap = Some(cap.map_or(n, |c: i64| c.max(n)));
            }
        };
        for (_, n) in self.uvar_support() {
            bump(Some(n as i64));
        }
        for v in self.table_support() {
            if let Some(t) = ctx.aux_table(v) {
                bump(t.dord);
            }
        }
        let cap = cap?;
        for n in (0..=cap).rev() {
            for i in 0..ctx.nvars() {
                if !self.partial_u(i, n as usize, ctx).is_zero() {
                    return Some(n);
                }
            }
        }
        None
    }

    /// Substitute a variable by an expression (used to instantiate
    /// symbolic constants and solved unknowns).
    pub fn subst_var(&self, v: Var, val: &RawExpr, ctx: &DiffContext) -> RawExpr {
        let subst_poly = |p: &Poly| -> RawExpr {
            let mut out = RawExpr::zero();
            for (m, c) in p.terms() {
                let e = m.exponent(v);
                let rest = RawExpr::make(Poly::monomial(m.without(v), c.clone()), Vec::new(), ctx);
                let piece = if e == 0 {
                    rest
                } else {
                    rest.mul(&val.pow(e as i64, ctx), ctx)
                };
                out = out.add(&piece, ctx);
            }
            out
        };
        let mut out = subst_poly(&self.num);
        for (f, e) in &self.den {
            let fs = subst_poly(f);
            out = out.div(&fs.pow(*e as i64, ctx), ctx);
        }
        out
    }

    /// Evaluate numerically; None when a denominator vanishes.
    pub fn eval(&self, assign: &dyn Fn(Var) -> Rat) -> Option<Rat> {
        let mut den = Rat::one();
        for (f, e) in &self.den {
            let val = f.eval(assign);
            if val.is_zero() {
                return None;
            }
            for _ in 0..*e {
                den *= &val;
            }
        }
        Some(self.num.eval(assign) / den)
    }

    /// Total degree of the numerator counting x, u-variables and
    /// auxiliaries (constant symbols excluded); used by ansatz sizing.
    pub fn ansatz_degree(&self, ctx: &DiffContext) -> u32 {
        self.num
            .terms()
            .iter()
            .map(|(m, _)| {
                m.pairs()
                    .iter()
                    .filter(|(v, _)| !ctx.is_const(*v))
                    .map(|(_, e)| *e)
                    .sum::<u32>()
            })
            .max()
            .unwrap_or(0)
    }
}

fn single_term(p: &Poly) -> Option<(&Mono, &Rat)> {
    if p.num_terms() == 1 {
        p.leading()
    } else {
        None
    }
}

fn single_var_power(m: &Mono) -> Option<(Var, u32)> {
    if m.pairs().len() == 1 {
        Some(m.pairs()[0])
    } else {
        None
    }
}

/// Rewrite every monomial with a squared relation generator using
/// g^(2k+r) = square^k g^r; may introduce denominators.
fn reduce_relations(p: Poly, ctx: &DiffContext) -> RawExpr {
    if ctx.relation_vars().is_empty() {
        return RawExpr {
            num: p,
            den: Vec::new(),
        };
    }
    let offender = ctx
        .relation_vars()
        .iter()
        .copied()
        .find(|&v| p.degree_in(v) >= 2);
    let v = match offender {
        None => {
            return RawExpr {
                num: p,
                den: Vec::new(),
            }
        }
        Some(v) => v,
    };
    let square = ctx
        .aux_table(v)
        .and_then(|t| t.square.clone())
        .expect("relation var without square");
    let mut plain = Vec::new();
    let mut acc = RawExpr::zero();
    for (m, c) in p.terms() {
        let e = m.exponent(v);
        if e >= 2 {
            let k = (e / 2) as i64;
            let r = e % 2;
            let rest = RawExpr::make(Poly::monomial(m.with_exp(v, r), c.clone()), Vec::new(), ctx);
            acc = acc.add(&rest.mul(&square.pow(k, ctx), ctx), ctx);
        } else {
            plain.push((m.clone(), c.clone()));
        }
    }
    let plain = reduce_relations(Poly::from_terms(plain), ctx);
    acc.add(&plain, ctx)
}

fn normalize_factors(mut den: Vec<(Poly, u32)>) -> Vec<(Poly, u32)> {
    den.retain(|(_, e)| *e > 0);
    den.sort_by(|(f, _), (g, _)| f.cmp(g));
    let mut out: Vec<(Poly, u32)> = Vec::new();
    for (f, e) in den {
        match out.last_mut() {
            Some((g, e0)) if *g == f => *e0 += e,
            _ => out.push((f, e)),
        }
    }
    out
}

/// A [`RawExpr`] bound to its context, with operator overloads.
#[derive(Clone, Debug)]
pub struct DiffExpr {
    raw: RawExpr,
    ctx: Ctx,
}

impl DiffExpr {
    pub fn new(raw: RawExpr, ctx: &Ctx) -> DiffExpr {
        DiffExpr {
            raw,
            ctx: Arc::clone(ctx),
        }
    }

    pub fn zero(ctx: &Ctx) -> DiffExpr {
        DiffExpr::new(RawExpr::zero(), ctx)
    }

    pub fn one(ctx: &Ctx) -> DiffExpr {
        DiffExpr::new(RawExpr::one(), ctx)
    }

    pub fn num_i64(n: i64, ctx: &Ctx) -> DiffExpr {
        DiffExpr::new(RawExpr::from_rat(rat(n)), ctx)
    }

    pub fn from_rat(c: Rat, ctx: &Ctx) -> DiffExpr {
        DiffExpr::new(RawExpr::from_rat(c), ctx)
    }

    pub fn var(v: Var, ctx: &Ctx) -> DiffExpr {
        DiffExpr::new(RawExpr::from_poly(Poly::var(v), ctx), ctx)
    }

    /// u_i^{(n)}.
    pub fn u(i: usize, n: usize, ctx: &Ctx) -> DiffExpr {
        DiffExpr::var(Var::uvar(i, n), ctx)
    }

    pub fn named(name: &str, ctx: &Ctx) -> DiffExpr {
        let v = ctx
            .lookup(name)
            .unwrap_or_else(|| panic!("unknown generator '{}'", name));
        DiffExpr::var(v, ctx)
    }

    pub fn raw(&self) -> &RawExpr {
        &self.raw
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn is_zero(&self) -> bool {
        self.raw.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.raw.is_one()
    }

    pub fn as_rat(&self) -> Option<Rat> {
        self.raw.as_rat()
    }

    pub fn is_const_only(&self) -> bool {
        self.raw.is_const_only(&self.ctx)
    }

    pub fn scale(&self, c: &Rat) -> DiffExpr {
        DiffExpr::new(self.raw.scale(c), &self.ctx)
    }

    pub fn pow(&self, e: i64) -> DiffExpr {
        DiffExpr::new(self.raw.pow(e, &self.ctx), &self.ctx)
    }

    pub fn total_derivative(&self) -> DiffExpr {
        DiffExpr::new(self.raw.total_derivative(&self.ctx), &self.ctx)
    }

    /// n-fold total derivative.
    pub fn dn(&self, n: usize) -> DiffExpr {
        let mut out = self.clone();
        for _ in 0..n {
            out = out.total_derivative();
        }
        out
    }

    pub fn partial_u(&self, i: usize, n: usize) -> DiffExpr {
        DiffExpr::new(self.raw.partial_u(i, n, &self.ctx), &self.ctx)
    }

    pub fn partial_x(&self) -> DiffExpr {
        DiffExpr::new(self.raw.partial_x(&self.ctx), &self.ctx)
    }

    pub fn dord(&self) -> Option<i64> {
        self.raw.dord(&self.ctx)
    }

    pub fn uvar_support(&self) -> BTreeSet<(usize, usize)> {
        self.raw.uvar_support()
    }

    pub fn subst_var(&self, v: Var, val: &DiffExpr) -> DiffExpr {
        DiffExpr::new(self.raw.subst_var(v, val.raw(), &self.ctx), &self.ctx)
    }

    pub fn eval(&self, assign: &dyn Fn(Var) -> Rat) -> Option<Rat> {
        self.raw.eval(assign)
    }

    pub fn ansatz_degree(&self) -> u32 {
        self.raw.ansatz_degree(&self.ctx)
    }

    fn same_ctx(&self, other: &DiffExpr) {
        assert!(
            Arc::ptr_eq(&self.ctx, &other.ctx),
            "mixing expressions from different contexts"
        );
    }
}

impl PartialEq for DiffExpr {
    fn eq(&self, other: &DiffExpr) -> bool {
        self.same_ctx(other);
        self.raw.sub(&other.raw, &self.ctx).is_zero()
    }
}

impl Eq for DiffExpr {}

macro_rules! binop {
    ($trait:ident, $method:ident, $raw:ident) => {
        impl $trait for &DiffExpr {
            type Output = DiffExpr;
            fn $method(self, rhs: &DiffExpr) -> DiffExpr {
                self.same_ctx(rhs);
                DiffExpr::new(self.raw.$raw(&rhs.raw, &self.ctx), &self.ctx)
            }
        }
        impl $trait for DiffExpr {
            type Output = DiffExpr;
            fn $method(self, rhs: DiffExpr) -> DiffExpr {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&DiffExpr> for DiffExpr {
            type Output = DiffExpr;
            fn $method(self, rhs: &DiffExpr) -> DiffExpr {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl Neg for &DiffExpr {
    type Output = DiffExpr;
    fn neg(self) -> DiffExpr {
        DiffExpr::new(self.raw.neg(), &self.ctx)
    }
}

impl Neg for DiffExpr {
    type Output = DiffExpr;
    fn neg(self) -> DiffExpr {
        -&self
    }
}

fn fmt_coeff_mono(c: &Rat, m: &Mono, ctx: &DiffContext, out: &mut String) {
    let mut parts: Vec<String> = Vec::new();
    let abs = c.abs();
    if !abs.is_one() || m.is_one() {
        parts.push(format!("{}", abs));
    }
    for &(v, e) in m.pairs() {
        let name = ctx.display_var(v);
        if e == 1 {
            parts.push(name);
        } else {
            parts.push(format!("{}^{}", name, e));
        }
    }
    out.push_str(&parts.join("*"));
}

fn fmt_poly(p: &Poly, ctx: &DiffContext) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, (m, c)) in p.terms().iter().enumerate() {
        if k == 0 {
            if c.is_negative() {
                out.push('-');
            }
        } else if c.is_negative() {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        fmt_coeff_mono(c, m, ctx, &mut out);
    }
    out
}

impl fmt::Display for DiffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = fmt_poly(&self.raw.num, &self.ctx);
        if self.raw.den.is_empty() {
            return write!(f, "{}", num);
        }
        let mut den = String::new();
        for (k, (fac, e)) in self.raw.den.iter().enumerate() {
            if k > 0 {
                den.push('*');
            }
            den.push('(');
            den.push_str(&fmt_poly(fac, &self.ctx));
            den.push(')');
            if *e > 1 {
                den.push_str(&format!("^{}", e));
            }
        }
        write!(f, "({})/({})", num, den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::{AuxSpec, CtxBuilder};

    fn plain_ctx() -> Ctx {
        CtxBuilder::new(["u"]).build().unwrap()
    }

    fn p(s: &str, ctx: &Ctx) -> DiffExpr {
        crate::parse::parse_expr(s, ctx).unwrap()
    }

    #[test]
    fn arithmetic_and_cancellation() {
        let ctx = plain_ctx();
        let a = p("(u^2 - u'^2) / (u + u')", &ctx);
        let b = p("u - u'", &ctx);
        assert_eq!(a, b);
        let c = p("1/u + 1/u'", &ctx);
        let d = p("(u + u')/(u * u')", &ctx);
        assert_eq!(c, d);
        assert!((a.clone() - a).is_zero());
    }

    #[test]
    fn total_derivative_quotient() {
        let ctx = plain_ctx();
        let f = p("u'/u", &ctx);
        let expect = p("u''/u - u'^2/u^2", &ctx);
        assert_eq!(f.total_derivative(), expect);
        // x is the independent variable
        let g = p("x*u", &ctx);
        assert_eq!(g.total_derivative(), p("u + x*u'", &ctx));
    }

    #[test]
    fn partials_and_dord() {
        let ctx = plain_ctx();
        let f = p("u*u'' + u'^2", &ctx);
        assert_eq!(f.partial_u(0, 2), p("u", &ctx));
        assert_eq!(f.partial_u(0, 1), p("2*u'", &ctx));
        assert_eq!(f.dord(), Some(2));
        assert_eq!(p("x", &ctx).dord(), None);
        // dord must be verified, not read off occurrences
        let g = p("u''/u''", &ctx);
        assert_eq!(g.dord(), None);
    }

    #[test]
    fn sqrt_aux_tables() {
        // s = sqrt(b2 + b3 u'^2)
        let ctx = CtxBuilder::new(["u"])
            .constants(["b2", "b3"])
            .aux(AuxSpec::Sqrt {
                name: "s".into(),
                arg: "b2 + b3*u'^2".into(),
            })
            .build()
            .unwrap();
        let s = p("s", &ctx);
        // s' = b3 u' u'' / s
        let expect = p("b3*u'*u''/s", &ctx);
        assert_eq!(s.total_derivative(), expect);
        // s^2 reduces to its square
        assert_eq!(p("s^2", &ctx), p("b2 + b3*u'^2", &ctx));
        // 1/s = s/(b2 + b3 u'^2)
        assert_eq!(p("1/s", &ctx), p("s/(b2 + b3*u'^2)", &ctx));
        assert_eq!(s.dord(), Some(1));
    }

    #[test]
    fn constant_root_relation() {
        // y^2 = -b/a
        let ctx = CtxBuilder::new(["u"])
            .constants(["a", "b"])
            .aux(AuxSpec::ConstSqrt {
                name: "y".into(),
                value: "-b/a".into(),
            })
            .build()
            .unwrap();
        assert_eq!(p("y^3", &ctx), p("-b*y/a", &ctx));
        assert_eq!(p("1/y", &ctx), p("-a*y/b", &ctx));
        assert!(p("y", &ctx).total_derivative().is_zero());
        assert!(p("y", &ctx).is_const_only());
    }

    #[test]
    fn eval_respects_relations() {
        let ctx = CtxBuilder::new(["u"])
            .constants(["b2", "b3"])
            .aux(AuxSpec::Sqrt {
                name: "s".into(),
                arg: "b2 + b3*u'^2".into(),
            })
            .sample_hint("s", "b2")
            .build()
            .unwrap();
        let f = p("s^2 - b2 - b3*u'^2", &ctx);
        assert!(f.is_zero());
        let mut k = 0i64;
        let mut rng = move || {
            k += 1;
            rat(k * 3 + 1) / rat(2)
        };
        let vars: Vec<Var> = vec![Var::uvar(0, 1)];
        let assign = crate::diffalg::sample_assignment(&ctx, &vars, &mut rng).unwrap();
        let lookup = |v: Var| assign.get(&v).cloned().unwrap_or_else(|| rat(0));
        // the sampled point satisfies the square relation
        let g = p("s*s", &ctx);
        let h = p("b2 + b3*u'^2", &ctx);
        assert_eq!(g.eval(&lookup), h.eval(&lookup));
    }

    #[test]
    fn subst_and_display() {
        let ctx = CtxBuilder::new(["u"]).constants(["a"]).build().unwrap();
        let f = p("a*u' + a^2", &ctx);
        let a = ctx.lookup("a").unwrap();
        let g = f.subst_var(a, &p("2", &ctx));
        assert_eq!(g, p("2*u' + 4", &ctx));
        let shown = format!("{}", p("-u''/u'^2", &ctx));
        let back = p(&shown, &ctx);
        assert_eq!(back, p("-u''/u'^2", &ctx));
    }
}
