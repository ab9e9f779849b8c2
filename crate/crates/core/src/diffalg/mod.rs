//! Algebras of differential functions.
//!
//! A [`DiffContext`] fixes the differential variables u_1..u_ℓ, the
//! independent variable x, named constant symbols, and auxiliary
//! generators (square roots, exponentials) with table-driven derivative
//! rules and optional square relations. Expressions over a context are
//! exact fractions; see [`expr`].

mod calculus;
mod expr;

pub use calculus::*;
pub use expr::{DiffExpr, RawExpr};

use crate::poly::{Poly, Rat, Var};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub type Ctx = Arc<DiffContext>;

/// Surface syntax of an auxiliary generator, used for parsing and printing.
#[derive(Clone, Debug)]
pub enum Surface {
    Sqrt(RawExpr),
    Exp(RawExpr),
}

/// Derivative tables for an auxiliary generator.
#[derive(Clone, Debug)]
pub struct AuxTable {
    /// Total derivative of the generator.
    pub total: RawExpr,
    /// Nonzero partials with respect to u_i^{(n)}.
    pub uparts: Vec<((usize, usize), RawExpr)>,
    /// Partial with respect to x.
    pub xpart: RawExpr,
    /// Square relation g^2 = value, if any.
    pub square: Option<RawExpr>,
    /// Max derivative order the generator depends on; None = quasiconstant.
    pub dord: Option<i64>,
    pub surface: Option<Surface>,
}

#[derive(Clone, Debug)]
pub enum GenKind {
    X,
    Const,
    Aux(AuxTable),
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub name: String,
    pub kind: GenKind,
}

/// Hint for the numeric oracle: after sampling every variable, overwrite
/// `solve_for` with the value making `aux`'s square relation hold
/// (the relation must be linear in `solve_for`).
#[derive(Clone, Copy, Debug)]
pub struct SampleHint {
    pub aux: Var,
    pub solve_for: Var,
}

#[derive(Debug)]
pub struct DiffContext {
    var_names: Vec<String>,
    gens: Vec<Generator>,
    by_name: HashMap<String, Var>,
    relation_vars: Vec<Var>,
    sample_hints: Vec<SampleHint>,
}

impl DiffContext {
    /// Number of differential variables ℓ.
    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, i: usize) -> &str {
        &self.var_names[i]
    }

    pub fn generators(&self) -> &[Generator] {
        &self.gens
    }

    pub fn generator(&self, v: Var) -> Option<&Generator> {
        v.as_table().and_then(|i| self.gens.get(i))
    }

    pub fn x_var(&self) -> Var {
        Var::table(0)
    }

    /// Resolve a name: differential variables, x, constants, auxiliaries.
    pub fn lookup(&self, name: &str) -> Option<Var> {
        self.by_name.get(name).copied()
    }

    pub fn relation_vars(&self) -> &[Var] {
        &self.relation_vars
    }

    pub fn sample_hints(&self) -> &[SampleHint] {
        &self.sample_hints
    }

    pub fn aux_table(&self, v: Var) -> Option<&AuxTable> {
        match self.generator(v) {
            Some(Generator {
                kind: GenKind::Aux(t),
                ..
            }) => Some(t),
            _ => None,
        }
    }

    pub fn is_const(&self, v: Var) -> bool {
        matches!(
            self.generator(v),
            Some(Generator {
                kind: GenKind::Const,
                ..
            })
        )
    }

    /// Find the sqrt auxiliary whose square equals the given expression.
    pub fn sqrt_aux_for(&self, arg: &RawExpr) -> Option<Var> {
        for (i, g) in self.gens.iter().enumerate() {
            if let GenKind::Aux(t) = &g.kind {
                if let Some(Surface::Sqrt(a)) = &t.surface {
                    if a == arg {
                        return Some(Var::table(i));
                    }
                }
            }
        }
        None
    }

    /// Find the exp auxiliary with the given argument.
    pub fn exp_aux_for(&self, arg: &RawExpr) -> Option<Var> {
        for (i, g) in self.gens.iter().enumerate() {
            if let GenKind::Aux(t) = &g.kind {
                if let Some(Surface::Exp(a)) = &t.surface {
                    if a == arg {
                        return Some(Var::table(i));
                    }
                }
            }
        }
        None
    }

    pub fn display_var(&self, v: Var) -> String {
        if let Some((i, n)) = v.as_uvar() {
            let base = &self.var_names[i];
            match n {
                0 => base.clone(),
                1 => format!("{}'", base),
                2 => format!("{}''", base),
                _ => format!("{}^({})", base, n),
            }
        } else {
            self.gens[v.as_table().unwrap()].name.clone()
        }
    }
}

impl fmt::Display for DiffContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vars [{}]", self.var_names.join(", "))?;
        let consts: Vec<&str> = self
            .gens
            .iter()
            .filter(|g| matches!(g.kind, GenKind::Const))
            .map(|g| g.name.as_str())
            .collect();
        if !consts.is_empty() {
            write!(f, ", constants [{}]", consts.join(", "))?;
        }
        let auxs: Vec<&str> = self
            .gens
            .iter()
            .filter(|g| matches!(g.kind, GenKind::Aux(_)))
            .map(|g| g.name.as_str())
            .collect();
        if !auxs.is_empty() {
            write!(f, ", auxiliaries [{}]", auxs.join(", "))?;
        }
        Ok(())
    }
}

/// Specification of an auxiliary generator, resolved during build.
#[derive(Clone, Debug)]
pub enum AuxSpec {
    /// sqrt(arg): square relation g^2 = arg.
    Sqrt { name: String, arg: String },
    /// exp(arg): derivative rule g' = arg' g.
    Exp { name: String, arg: String },
    /// Constant square root: g^2 = value (an expression in constants),
    /// quasiconstant with zero derivative.
    ConstSqrt { name: String, value: String },
}

pub struct CtxBuilder {
    var_names: Vec<String>,
    consts: Vec<String>,
    auxs: Vec<AuxSpec>,
    hints: Vec<(String, String)>,
}

impl CtxBuilder {
    pub fn new<S: Into<String>>(vars: impl IntoIterator<Item = S>) -> CtxBuilder {
        CtxBuilder {
            var_names: vars.into_iter().map(Into::into).collect(),
            consts: Vec::new(),
            auxs: Vec::new(),
            hints: Vec::new(),
        }
    }

    pub fn constants<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.consts.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn aux(mut self, spec: AuxSpec) -> Self {
        self.auxs.push(spec);
        self
    }

    /// Numeric-oracle hint: solve the relation of `aux` for the constant
    /// `solve_for` when sampling.
    pub fn sample_hint(mut self, aux: &str, solve_for: &str) -> Self {
        self.hints.push((aux.to_string(), solve_for.to_string()));
        self
    }

    pub fn build(self) -> Result<Ctx, String> {
        assert!(
            !self.var_names.is_empty() && self.var_names.len() <= 8,
            "between 1 and 8 differential variables"
        );
        let mut gens = vec![Generator {
            name: "x".to_string(),
            kind: GenKind::X,
        }];
        for c in &self.consts {
            gens.push(Generator {
                name: c.clone(),
                kind: GenKind::Const,
            });
        }
        // provisional context with empty aux tables for parsing definitions
        let aux_base = gens.len();
        for spec in &self.auxs {
            let name = match spec {
                AuxSpec::Sqrt { name, .. }
                | AuxSpec::Exp { name, .. }
                | AuxSpec::ConstSqrt { name, .. } => name.clone(),
            };
            gens.push(Generator {
                name,
                kind: GenKind::Const, // placeholder until tables are filled
            });
        }
        let mut by_name = HashMap::new();
        for (i, name) in self.var_names.iter().enumerate() {
            by_name.insert(name.clone(), Var::uvar(i, 0));
        }
        for (i, g) in gens.iter().enumerate() {
            if by_name.insert(g.name.clone(), Var::table(i)).is_some() {
                return Err(format!("duplicate generator name '{}'", g.name));
            }
        }
        let mut relation_vars: Vec<Var> = Vec::new();
        for (k, spec) in self.auxs.iter().enumerate() {
            let idx = aux_base + k;
            let self_var = Var::table(idx);
            // rebuild so earlier aux tables are visible to this definition
            let cur = Arc::new(DiffContext {
                var_names: self.var_names.clone(),
                gens: gens.clone(),
                by_name: by_name.clone(),
                relation_vars: relation_vars.clone(),
                sample_hints: Vec::new(),
            });
            let table = match spec {
                AuxSpec::Sqrt { arg, .. } => {
                    let a = crate::parse::parse_expr(arg, &cur)
                        .map_err(|e| format!("in sqrt arg '{}': {}", arg, e))?;
                    if a.raw().num().contains_var(self_var) {
                        return Err("self-referential sqrt".into());
                    }
                    build_sqrt_table(self_var, a.raw().clone(), &cur)
                }
                AuxSpec::Exp { arg, .. } => {
                    let a = crate::parse::parse_expr(arg, &cur)
                        .map_err(|e| format!("in exp arg '{}': {}", arg, e))?;
                    if a.raw().num().contains_var(self_var) {
                        return Err("self-referential exp".into());
                    }
                    build_exp_table(self_var, a.raw().clone(), &cur)
                }
                AuxSpec::ConstSqrt { value, .. } => {
                    let a = crate::parse::parse_expr(value, &cur)
                        .map_err(|e| format!("in sqrt value '{}': {}", value, e))?;
                    if !a.raw().is_const_only(&cur) {
                        return Err(format!("sqrt value '{}' is not constant", value));
                    }
                    AuxTable {
                        total: RawExpr::zero(),
                        uparts: Vec::new(),
                        xpart: RawExpr::zero(),
                        square: Some(a.raw().clone()),
                        dord: None,
                        surface: Some(Surface::Sqrt(a.raw().clone())),
                    }
                }
            };
            if table.square.is_some() {
                relation_vars.push(self_var);
            }
            gens[idx].kind = GenKind::Aux(table);
        }

        let mut sample_hints = Vec::new();
        for (aux, solve_for) in &self.hints {
            let av = by_name
                .get(aux)
                .copied()
                .ok_or_else(|| format!("unknown aux '{}' in hint", aux))?;
            let sv = by_name
                .get(solve_for)
                .copied()
                .ok_or_else(|| format!("unknown constant '{}' in hint", solve_for))?;
            sample_hints.push(SampleHint {
                aux: av,
                solve_for: sv,
            });
        }

        Ok(Arc::new(DiffContext {
            var_names: self.var_names,
            gens,
            by_name,
            relation_vars,
            sample_hints,
        }))
    }
}

/// sqrt(A): g' = A'/(2g) = A' g / (2A), likewise for the partials.
fn build_sqrt_table(self_var: Var, arg: RawExpr, ctx: &DiffContext) -> AuxTable {
    let half_over_arg = |d: RawExpr| -> RawExpr {
        // d * g / (2 A)
        let g = RawExpr::from_poly(Poly::var(self_var), ctx);
        d.mul(&g, ctx)
            .div(&arg.scale(&crate::poly::rat(2)), ctx)
    };
    let total = half_over_arg(arg.total_derivative(ctx));
    let mut uparts = Vec::new();
    for (i, n) in arg.uvar_support() {
        let p = arg.partial_u(i, n, ctx);
        if !p.is_zero() {
            uparts.push(((i, n), half_over_arg(p)));
        }
    }
    let xpart = half_over_arg(arg.partial_x(ctx));
    let dord = uparts.iter().map(|((_, n), _)| *n as i64).max();
    AuxTable {
        total,
        uparts,
        xpart,
        square: Some(arg.clone()),
        dord,
        surface: Some(Surface::Sqrt(arg)),
    }
}

/// exp(A): g' = A' g, likewise for the partials.
fn build_exp_table(self_var: Var, arg: RawExpr, ctx: &DiffContext) -> AuxTable {
    let g = RawExpr::from_poly(Poly::var(self_var), ctx);
    let total = arg.total_derivative(ctx).mul(&g, ctx);
    let mut uparts = Vec::new();
    for (i, n) in arg.uvar_support() {
        let p = arg.partial_u(i, n, ctx);
        if !p.is_zero() {
            uparts.push(((i, n), p.mul(&g, ctx)));
        }
    }
    let xpart = arg.partial_x(ctx).mul(&g, ctx);
    let dord = uparts.iter().map(|((_, n), _)| *n as i64).max();
    AuxTable {
        total,
        uparts,
        xpart,
        square: None,
        dord,
        surface: Some(Surface::Exp(arg)),
    }
}

/// Convenience: evaluate numerically with a sampler respecting relations.
pub fn sample_assignment(
    ctx: &Ctx,
    vars: &[Var],
    rng: &mut impl FnMut() -> Rat,
) -> Option<HashMap<Var, Rat>> {
    let mut assign: HashMap<Var, Rat> = HashMap::new();
    for &v in vars {
        assign.entry(v).or_insert_with(&mut *rng);
    }
    // make sure hint variables exist
    for h in ctx.sample_hints() {
        assign.entry(h.aux).or_insert_with(&mut *rng);
        assign.entry(h.solve_for).or_insert_with(&mut *rng);
    }
    for h in ctx.sample_hints() {
        let table = ctx.aux_table(h.aux)?;
        let square = table.square.clone()?;
        let s_val = assign[&h.aux].clone();
        let target = &s_val * &s_val;
        // relation must be linear in solve_for: R = r0 + r1 * t
        let eval_at = |t: Rat, assign: &HashMap<Var, Rat>| -> Option<Rat> {
            let mut a = assign.clone();
            a.insert(h.solve_for, t);
            square.eval(&|v| a.get(&v).cloned().unwrap_or_else(Rat::zero))
        };
        let r0 = eval_at(Rat::zero(), &assign)?;
        let r1 = eval_at(Rat::one(), &assign)?;
        let slope = &r1 - &r0;
        if slope.is_zero() {
            return None;
        }
        assign.insert(h.solve_for, (&target - &r0) / slope);
    }
    Some(assign)
}

use num::{One, Zero};
