//! Exact linear solving for ansatz methods.
//!
//! Unknown coefficients range over the field of constant symbols; rows are
//! obtained by clearing denominators of each image component and matching
//! coefficients of the non-constant monomials.

use crate::diffalg::{Ctx, DiffContext, DiffExpr, RawExpr};
use crate::poly::{Mono, Poly, Rat, Var};
use num::One;
use std::collections::{BTreeMap, HashMap};

/// Generators admitted into an ansatz besides the u-variables.
#[derive(Clone)]
pub struct AnsatzGens {
    pub include_x: bool,
    /// Auxiliary generators allowed as numerator factors.
    pub aux: Vec<Var>,
    /// Pole factors: candidate denominators (factor, max exponent).
    pub poles: Vec<(Poly, u32)>,
}

impl AnsatzGens {
    pub fn new(_ctx: &Ctx) -> AnsatzGens {
        AnsatzGens {
            include_x: false,
            aux: Vec::new(),
            poles: Vec::new(),
        }
    }

    pub fn add_pole(&mut self, factor: Poly, max_exp: u32) {
        match self.poles.iter_mut().find(|(f, _)| *f == factor) {
            Some((_, e)) => *e = (*e).max(max_exp),
            None => self.poles.push((factor, max_exp)),
        }
    }
}

/// All monomials in x, u_i^{(n)} for n ≤ dord_max, and the listed
/// auxiliaries, of total degree ≤ deg_max, times every pole combination.
/// Generators with a square relation are capped at exponent 1.
pub fn ansatz_monomials(
    ctx: &Ctx,
    dord_max: i64,
    deg_max: u32,
    gens: &AnsatzGens,
) -> Vec<DiffExpr> {
    let mut vars: Vec<Var> = Vec::new();
    if gens.include_x {
        vars.push(ctx.x_var());
    }
    for i in 0..ctx.nvars() {
        for n in 0..=dord_max.max(0) as usize {
            vars.push(Var::uvar(i, n));
        }
    }
    for &v in &gens.aux {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    let cap = |v: Var| -> u32 {
        if ctx.relation_vars().contains(&v) {
            1
        } else {
            deg_max
        }
    };
    let mut monos: Vec<Mono> = Vec::new();
    let mut cur: Vec<(Var, u32)> = Vec::new();
    fn rec(
        vars: &[Var],
        k: usize,
        left: u32,
        cap: &dyn Fn(Var) -> u32,
        cur: &mut Vec<(Var, u32)>,
        out: &mut Vec<Mono>,
    ) {
        if k == vars.len() {
            out.push(Mono::from_pairs(cur.clone()));
            return;
        }
        let v = vars[k];
        let top = left.min(cap(v));
        for e in 0..=top {
            if e > 0 {
                cur.push((v, e));
            }
            rec(vars, k + 1, left - e, cap, cur, out);
            if e > 0 {
                cur.pop();
            }
        }
    }
    rec(&vars, 0, deg_max, &cap, &mut cur, &mut monos);

    // pole combinations: exponent vectors over the pole factors
    let mut poles: Vec<Vec<(Poly, u32)>> = vec![Vec::new()];
    for (f, emax) in &gens.poles {
        let mut next = Vec::new();
        for combo in &poles {
            for e in 0..=*emax {
                let mut c = combo.clone();
                if e > 0 {
                    c.push((f.clone(), e));
                }
                next.push(c);
            }
        }
        poles = next;
    }

    let mut out = Vec::new();
    for den in &poles {
        for m in &monos {
            let e = RawExpr::make(Poly::monomial(m.clone(), Rat::one()), den.clone(), ctx);
            if !e.is_zero() {
                out.push(DiffExpr::new(e, ctx));
            }
        }
    }
    out
}

/// Affine solution set of a linear problem: particular + span(kernel).
/// Coefficients are constant-field elements, one per candidate.
pub struct AffineSolution {
    pub particular: Vec<RawExpr>,
    pub kernel: Vec<Vec<RawExpr>>,
}

/// Is a table generator effectively a constant of the field (quasiconstant
/// with no x-dependence), so it may live inside matrix entries?
fn const_like(v: Var, ctx: &DiffContext) -> bool {
    if ctx.is_const(v) {
        return true;
    }
    match ctx.aux_table(v) {
        Some(t) => t.total.is_zero() && t.xpart.is_zero() && t.uparts.is_empty(),
        None => false,
    }
}

fn split_mono(m: &Mono, ctx: &DiffContext) -> (Mono, Mono) {
    let mut cpart = Vec::new();
    let mut rest = Vec::new();
    for &(v, e) in m.pairs() {
        if v.as_uvar().is_none() && const_like(v, ctx) {
            cpart.push((v, e));
        } else {
            rest.push((v, e));
        }
    }
    (Mono::from_pairs(cpart), Mono::from_pairs(rest))
}

/// Group a polynomial by its non-constant monomial part.
fn rows_of_poly(p: &Poly, ctx: &DiffContext) -> BTreeMap<Mono, Poly> {
    let mut out: BTreeMap<Mono, Poly> = BTreeMap::new();
    for (m, c) in p.terms() {
        let (cm, key) = split_mono(m, ctx);
        let entry = out.entry(key).or_insert_with(Poly::zero);
        *entry = entry.add(&Poly::monomial(cm, c.clone()));
    }
    out.retain(|_, v| !v.is_zero());
    out
}

struct Row {
    entries: HashMap<usize, RawExpr>,
    rhs: RawExpr,
}

/// Solve Σ_k c_k apply(B_k) = rhs for constants c_k. Returns None when
/// inconsistent.
pub fn solve_linear(
    candidates: &[DiffExpr],
    apply: &dyn Fn(&DiffExpr) -> Vec<DiffExpr>,
    rhs: &[DiffExpr],
    ctx: &Ctx,
) -> Option<AffineSolution> {
    let images: Vec<Vec<DiffExpr>> = candidates.iter().map(apply).collect();
    solve_linear_images(&images, rhs, ctx)
}

/// Same problem with precomputed candidate images; this is the entry point
/// when the unknowns are vector-valued and the candidates have no scalar
/// representation of their own.
pub fn solve_linear_images(
    images: &[Vec<DiffExpr>],
    rhs: &[DiffExpr],
    ctx: &Ctx,
) -> Option<AffineSolution> {
    let ncomp = rhs.len();
    for im in images {
        assert_eq!(im.len(), ncomp, "image arity mismatch");
    }

    let mut rows: BTreeMap<(usize, Mono), Row> = BTreeMap::new();
    for comp in 0..ncomp {
        // common denominator across this component
        let mut lcm: Vec<(Poly, u32)> = rhs[comp].raw().den_factors().to_vec();
        for im in &images {
            for (f, e) in im[comp].raw().den_factors() {
                match lcm.iter_mut().find(|(g, _)| g == f) {
                    Some((_, e0)) => *e0 = (*e0).max(*e),
                    None => lcm.push((f.clone(), *e)),
                }
            }
        }
        let lcm_expr = {
            let mut p = Poly::one();
            for (f, e) in &lcm {
                p = p.mul(&f.pow(*e));
            }
            RawExpr::from_poly(p, ctx)
        };
        let clear = |e: &DiffExpr| -> Poly {
            let cleared = e.raw().mul(&lcm_expr, ctx);
            assert!(
                cleared.den_factors().is_empty(),
                "denominator did not clear"
            );
            cleared.num().clone()
        };
        for (k, im) in images.iter().enumerate() {
            if im[comp].is_zero() {
                continue;
            }
            for (key, cpoly) in rows_of_poly(&clear(&im[comp]), ctx) {
                let row = rows
                    .entry((comp, key))
                    .or_insert_with(|| Row {
                        entries: HashMap::new(),
                        rhs: RawExpr::zero(),
                    });
                let e = RawExpr::from_poly(cpoly, ctx);
                match row.entries.get_mut(&k) {
                    Some(v) => *v = v.add(&e, ctx),
                    None => {
                        row.entries.insert(k, e);
                    }
                }
            }
        }
        if !rhs[comp].is_zero() {
            for (key, cpoly) in rows_of_poly(&clear(&rhs[comp]), ctx) {
                let row = rows
                    .entry((comp, key))
                    .or_insert_with(|| Row {
                        entries: HashMap::new(),
                        rhs: RawExpr::zero(),
                    });
                row.rhs = row.rhs.add(&RawExpr::from_poly(cpoly, ctx), ctx);
            }
        }
    }

    let mut rows: Vec<Row> = rows.into_values().collect();
    let ncand = images.len();

    // reduced row echelon over the constant field
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; ncand];
    let mut next_row = 0usize;
    for col in 0..ncand {
        let pivot = (next_row..rows.len()).find(|&r| {
            rows[r]
                .entries
                .get(&col)
                .map(|e| !e.is_zero())
                .unwrap_or(false)
        });
        let pivot = match pivot {
            Some(p) => p,
            None => continue,
        };
        rows.swap(next_row, pivot);
        let inv = RawExpr::one().div(&rows[next_row].entries[&col], ctx);
        let prow_entries: Vec<(usize, RawExpr)> = rows[next_row]
            .entries
            .iter()
            .map(|(c, e)| (*c, e.mul(&inv, ctx)))
            .collect();
        rows[next_row].entries = prow_entries.iter().cloned().collect();
        rows[next_row].rhs = rows[next_row].rhs.mul(&inv, ctx);
        let prow: HashMap<usize, RawExpr> = prow_entries.into_iter().collect();
        let prhs = rows[next_row].rhs.clone();
        for r in 0..rows.len() {
            if r == next_row {
                continue;
            }
            let factor = match rows[r].entries.get(&col) {
                Some(f) if !f.is_zero() => f.clone(),
                _ => continue,
            };
            for (c, e) in &prow {
                let delta = e.mul(&factor, ctx);
                let cur = rows[r]
                    .entries
                    .remove(c)
                    .unwrap_or_else(RawExpr::zero);
                let newv = cur.sub(&delta, ctx);
                if !newv.is_zero() {
                    rows[r].entries.insert(*c, newv);
                }
            }
            rows[r].rhs = rows[r].rhs.sub(&prhs.mul(&factor, ctx), ctx);
        }
        pivot_of_col[col] = Some(next_row);
        next_row += 1;
    }

    // consistency
    for row in &rows {
        let empty = row.entries.values().all(|e| e.is_zero());
        if empty && !row.rhs.is_zero() {
            return None;
        }
    }

    let mut particular = vec![RawExpr::zero(); ncand];
    for (col, pr) in pivot_of_col.iter().enumerate() {
        if let Some(r) = pr {
            particular[col] = rows[*r].rhs.clone();
        }
    }
    let mut kernel = Vec::new();
    for free in 0..ncand {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut vec_k = vec![RawExpr::zero(); ncand];
        vec_k[free] = RawExpr::one();
        for (col, pr) in pivot_of_col.iter().enumerate() {
            if let Some(r) = pr {
                if let Some(e) = rows[*r].entries.get(&free) {
                    vec_k[col] = e.neg();
                }
            }
        }
        kernel.push(vec_k);
    }
    Some(AffineSolution { particular, kernel })
}

/// Σ coeffs_k · candidates_k.
pub fn combine(coeffs: &[RawExpr], candidates: &[DiffExpr], ctx: &Ctx) -> DiffExpr {
    assert_eq!(coeffs.len(), candidates.len());
    let mut out = DiffExpr::zero(ctx);
    for (c, b) in coeffs.iter().zip(candidates) {
        if !c.is_zero() {
            out = out + DiffExpr::new(c.clone(), ctx) * b.clone();
        }
    }
    out
}
