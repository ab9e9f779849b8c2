//! Lenard-Magri ladders over algebras of differential functions.
//!
//! An association ∫h →_{AB⁻¹} P asks for a witness F with B(∂)F = δh/δu and
//! A(∂)F = P. Ladders interleave two fractions H = A∘B⁻¹ and K = C∘D⁻¹; the
//! engine solves each link as a finite linear problem over the constant
//! field (ansatz method), verifies transcribed ladders independently of how
//! they were produced, and runs the involution, symmetry, closedness, and
//! differential-order checks that the recursion theory predicts.

mod blocked;
mod closed;
mod emit;
mod ladder;
mod mock;

pub use blocked::{blocked_obstruction, BlockedVerdict};
pub use closed::{
    closed_form_liouville, liouville_closed_ctx, pq_polynomials, ClosedFormFamily, LiouvilleCase,
    PqConstants, PqData,
};
pub use emit::{hierarchy_emit, EmitFormat, EquationLhs, HierarchyDoc, HierarchyEq};
pub use ladder::{
    closedness_propagation_check, dord_analysis, extend_ladder, involution_check,
    symmetry_residual, verify_ladder, ClosednessReport, DensityInfo, DordReport, DordRow,
    ExtensionReport, LadderPolicy, LadderReport, LadderState, LinkReport, SymmetryEntry,
    SymmetryReport,
};
pub use mock::{MockLadder, MockModel};

use crate::diffalg::{Ctx, DiffExpr};
use crate::ore::{FractionPair, MatOp};
use crate::poly::{Mono, Poly, Rat, Var};
use crate::solve::{ansatz_monomials, solve_linear_images, AnsatzGens};
use num::One;
use thiserror::Error;

pub type VectorField = Vec<DiffExpr>;
pub type Covector = Vec<DiffExpr>;

#[derive(Debug, Error)]
pub enum MagriError {
    #[error(
        "no solution within the ansatz (dord {dord}, degree {degree}, {escalations} escalations)"
    )]
    NotFoundWithinAnsatz {
        dord: i64,
        degree: u32,
        escalations: u32,
    },
    #[error("scheme blocked: variational obstruction {witness}")]
    BlockedCertified { witness: DiffExpr },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Finite search space for one association solve: monomials in x, the
/// u-variables up to a differential order, and auxiliary generators, up to
/// a total degree, multiplied by pole combinations.
#[derive(Clone)]
pub struct Ansatz {
    pub dord: i64,
    pub degree: u32,
    pub gens: AnsatzGens,
}

impl Ansatz {
    /// Ansatz sized for op·F = rhs. The generator pool is read off the
    /// problem: registered auxiliaries and denominator factors of the
    /// operator coefficients and of the right-hand side, plus first
    /// derivative poles up to exponent three.
    pub fn for_problem(op: &MatOp, rhs: &[DiffExpr], ctx: &Ctx) -> Ansatz {
        let mut gens = AnsatzGens::new(ctx);
        gens.include_x = true;
        let mut note_expr = |e: &DiffExpr, gens: &mut AnsatzGens| {
            for v in e.raw().table_support() {
                if !ctx.is_const(v) && !gens.aux.contains(&v) {
                    gens.aux.push(v);
                }
            }
            for (fac, e0) in e.raw().den_factors() {
                let single_gen = fac.terms().len() == 1 && fac.terms()[0].0.pairs().len() == 1;
                let cap = if single_gen { (*e0).max(3) } else { *e0 };
                gens.add_pole(fac.clone(), cap);
            }
        };
        let mut coeff_dord = None::<i64>;
        for i in 0..op.nrows() {
            for j in 0..op.ncols() {
                for (_, c) in op.at(i, j).terms() {
                    note_expr(c, &mut gens);
                    coeff_dord = coeff_dord.max(c.dord());
                }
            }
        }
        let mut rhs_dord = None::<i64>;
        let mut rhs_deg = 0u32;
        for r in rhs {
            note_expr(r, &mut gens);
            rhs_dord = rhs_dord.max(r.dord());
            rhs_deg = rhs_deg.max(r.ansatz_degree());
        }
        for i in 0..ctx.nvars() {
            let u1 = Poly::monomial(Mono::from_pairs(vec![(Var::uvar(i, 1), 1)]), Rat::one());
            gens.add_pole(u1, 3);
        }
        let op_order = (0..op.nrows())
            .flat_map(|i| (0..op.ncols()).map(move |j| (i, j)))
            .filter_map(|(i, j)| op.at(i, j).order())
            .max()
            .unwrap_or(0);
        let dord = [
            rhs_dord.unwrap_or(i64::MIN).saturating_sub(op_order),
            coeff_dord.unwrap_or(i64::MIN),
            1,
        ]
        .into_iter()
        .max()
        .unwrap();
        Ansatz {
            dord,
            degree: rhs_deg.max(2),
            gens,
        }
    }

    /// One escalation step widens order and degree by one.
    pub fn escalate(&self) -> Ansatz {
        Ansatz {
            dord: self.dord + 1,
            degree: self.degree + 1,
            gens: self.gens.clone(),
        }
    }

    /// Jump to at least the given size, keeping the generator pool.
    pub fn widened_to(&self, dord: i64, degree: u32) -> Ansatz {
        Ansatz {
            dord: self.dord.max(dord),
            degree: self.degree.max(degree),
            gens: self.gens.clone(),
        }
    }

    /// Candidate monomials in tie-break order: increasing differential
    /// order, then total degree, then display form. The affine solver puts
    /// pivots on the earliest independent candidates, so this ordering
    /// makes the reported representative minimize (dord, degree, lex).
    pub fn monomials(&self, ctx: &Ctx) -> Vec<DiffExpr> {
        let mut cands = ansatz_monomials(ctx, self.dord, self.degree, &self.gens);
        cands.sort_by_cached_key(candidate_key);
        cands
    }
}

fn candidate_key(e: &DiffExpr) -> (i64, u32, String) {
    (
        e.dord().unwrap_or(i64::MIN),
        e.ansatz_degree(),
        e.to_string(),
    )
}

/// Affine solution set of one association solve: a particular witness plus
/// a basis of the operator kernel inside the ansatz space.
#[derive(Clone, Debug)]
pub struct AffineSet {
    pub particular: Vec<DiffExpr>,
    pub kernel: Vec<Vec<DiffExpr>>,
}

impl AffineSet {
    pub fn ncomp(&self) -> usize {
        self.particular.len()
    }
}

/// Solve op·F = rhs for F with unknown constant coefficients over the
/// ansatz. The kernel basis annihilates op exactly; failure means only
/// that no solution exists inside this ansatz.
pub fn solve_step(op: &MatOp, rhs: &[DiffExpr], ansatz: &Ansatz) -> Result<AffineSet, MagriError> {
    if op.nrows() != rhs.len() {
        return Err(MagriError::Shape(format!(
            "operator has {} rows, right-hand side has {} components",
            op.nrows(),
            rhs.len()
        )));
    }
    let ctx = op.ctx().clone();
    let ncomp = op.ncols();
    let scalars = ansatz.monomials(&ctx);
    // vector candidates e_j·m, grouped by monomial so the tie-break order
    // is preserved across components
    let mut images: Vec<Vec<DiffExpr>> = Vec::with_capacity(scalars.len() * ncomp);
    let mut tags: Vec<(usize, usize)> = Vec::with_capacity(scalars.len() * ncomp);
    for (mi, m) in scalars.iter().enumerate() {
        for j in 0..ncomp {
            let im: Vec<DiffExpr> = (0..op.nrows()).map(|i| op.at(i, j).apply(m)).collect();
            images.push(im);
            tags.push((mi, j));
        }
    }
    let sol = solve_linear_images(&images, rhs, &ctx).ok_or(MagriError::NotFoundWithinAnsatz {
        dord: ansatz.dord,
        degree: ansatz.degree,
        escalations: 0,
    })?;
    let assemble = |coeffs: &[crate::diffalg::RawExpr]| -> Vec<DiffExpr> {
        let mut out = vec![DiffExpr::zero(&ctx); ncomp];
        for (k, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                let (mi, j) = tags[k];
                out[j] = out[j].clone() + DiffExpr::new(c.clone(), &ctx) * scalars[mi].clone();
            }
        }
        out
    };
    let particular = assemble(&sol.particular);
    let kernel: Vec<Vec<DiffExpr>> = sol
        .kernel
        .iter()
        .map(|v| assemble(v))
        .filter(|v| v.iter().any(|e| !e.is_zero()))
        .collect();
    Ok(AffineSet { particular, kernel })
}

/// Solve with the escalation policy: try the starting ansatz, escalate by
/// one, then jump to the conservative size (rhs order plus operator order,
/// degree plus two) before giving up.
pub fn solve_step_escalating(
    op: &MatOp,
    rhs: &[DiffExpr],
    start: &Ansatz,
    escalations: u32,
) -> Result<(AffineSet, Ansatz), MagriError> {
    let mut ansatz = start.clone();
    let mut tried = 0u32;
    loop {
        match solve_step(op, rhs, &ansatz) {
            Ok(set) => return Ok((set, ansatz)),
            Err(MagriError::NotFoundWithinAnsatz { .. }) if tried < escalations => {
                tried += 1;
                ansatz = if tried < escalations {
                    ansatz.escalate()
                } else {
                    let op_order = (0..op.nrows())
                        .flat_map(|i| (0..op.ncols()).map(move |j| (i, j)))
                        .filter_map(|(i, j)| op.at(i, j).order())
                        .max()
                        .unwrap_or(0);
                    let rhs_dord = rhs.iter().filter_map(|r| r.dord()).max().unwrap_or(0);
                    let rhs_deg = rhs.iter().map(|r| r.ansatz_degree()).max().unwrap_or(0);
                    ansatz
                        .escalate()
                        .widened_to(rhs_dord + op_order, rhs_deg + 2)
                };
            }
            Err(MagriError::NotFoundWithinAnsatz { dord, degree, .. }) => {
                return Err(MagriError::NotFoundWithinAnsatz {
                    dord,
                    degree,
                    escalations: tried,
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// A single association question against one fraction.
pub struct AssociationProblem {
    pub pair: FractionPair,
    pub target: AssociationTarget,
}

pub enum AssociationTarget {
    /// Given ξ = δh/δu: solve den·F = ξ, the associated field is num·F.
    Gradient(Covector),
    /// Given P: solve num·F = P, the associated gradient is den·F.
    Field(VectorField),
}

/// Witness and induced image of a solved association.
pub struct AssociationOutcome {
    pub witness: AffineSet,
    /// Image of the particular witness under the complementary operator.
    pub image: Vec<DiffExpr>,
    /// Images of the kernel basis: the coset ambiguity of the answer.
    pub image_ambiguity: Vec<Vec<DiffExpr>>,
}

impl AssociationProblem {
    pub fn solve(&self, ansatz: &Ansatz) -> Result<AssociationOutcome, MagriError> {
        let (solve_op, emit_op, rhs) = match &self.target {
            AssociationTarget::Gradient(xi) => (&self.pair.b, &self.pair.a, xi),
            AssociationTarget::Field(p) => (&self.pair.a, &self.pair.b, p),
        };
        let witness = solve_step(solve_op, rhs, ansatz)?;
        let image = emit_op.apply(&witness.particular);
        let image_ambiguity = witness
            .kernel
            .iter()
            .map(|k| emit_op.apply(k))
            .filter(|v| v.iter().any(|e| !e.is_zero()))
            .collect();
        Ok(AssociationOutcome {
            witness,
            image,
            image_ambiguity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::{variational_derivative, AuxSpec, CtxBuilder};
    use crate::ore::PseudoDiffOp;
    use crate::parse::parse_expr;

    fn p(s: &str, ctx: &Ctx) -> DiffExpr {
        parse_expr(s, ctx).unwrap()
    }

    fn op(terms: Vec<(i64, &str)>, ctx: &Ctx) -> PseudoDiffOp {
        PseudoDiffOp::from_terms(
            terms.into_iter().map(|(n, s)| (n, p(s, ctx))),
            ctx,
        )
    }

    /// d∘(1/u'')∘d as a differential operator.
    fn liouville_den(ctx: &Ctx) -> MatOp {
        let inner = op(vec![(1, "1/u''")], ctx);
        MatOp::scalar(PseudoDiffOp::d_power(1, ctx).compose(&inner, None))
    }

    #[test]
    fn identity_operator_returns_rhs() {
        let ctx = CtxBuilder::new(["u"]).build().unwrap();
        let id = MatOp::identity(1, &ctx);
        let rhs = vec![p("u*u'' + u'^2", &ctx)];
        let ansatz = Ansatz::for_problem(&id, &rhs, &ctx);
        let set = solve_step(&id, &rhs, &ansatz).unwrap();
        assert_eq!(set.particular[0], rhs[0]);
        assert!(set.kernel.is_empty());
    }

    #[test]
    fn sqrt_seed_witness() {
        let ctx = CtxBuilder::new(["u"])
            .constants(["b2", "b3"])
            .aux(AuxSpec::Sqrt {
                name: "s".into(),
                arg: "b2 + b3*u'^2".into(),
            })
            .build()
            .unwrap();
        let b = liouville_den(&ctx);
        let xi = vec![variational_derivative(&p("s", &ctx), 0)];
        let ansatz = Ansatz::for_problem(&b, &xi, &ctx);
        let set = solve_step(&b, &xi, &ansatz).unwrap();
        // witness is -s up to the kernel of d∘(1/u'')∘d
        assert_eq!(set.particular[0], p("-s", &ctx));
        assert_eq!(set.kernel.len(), 2);
        let flat: Vec<&DiffExpr> = set.kernel.iter().map(|k| &k[0]).collect();
        assert!(flat.contains(&&p("1", &ctx)));
        assert!(flat.contains(&&p("u'", &ctx)));
        for k in &set.kernel {
            assert!(b.apply(&k.clone())[0].is_zero());
        }
    }

    #[test]
    fn inconsistent_within_ansatz_is_reported() {
        let ctx = CtxBuilder::new(["u"]).build().unwrap();
        // dF = u''^2 has no polynomial solution of low order
        let d = MatOp::scalar(PseudoDiffOp::d_power(1, &ctx));
        let rhs = vec![p("u''^2", &ctx)];
        let ansatz = Ansatz {
            dord: 2,
            degree: 2,
            gens: AnsatzGens::new(&ctx),
        };
        match solve_step(&d, &rhs, &ansatz) {
            Err(MagriError::NotFoundWithinAnsatz { .. }) => (),
            other => panic!("expected NotFoundWithinAnsatz, got {:?}", other.map(|s| s.particular)),
        }
    }

    #[test]
    fn association_problem_emits_field() {
        // H = A∘B⁻¹ with A = u'd + u''/2 frozen against the gradient of u^2/2
        let ctx = CtxBuilder::new(["u"]).build().unwrap();
        let a = MatOp::scalar(op(vec![(1, "u'"), (0, "u''/2")], &ctx));
        let b = MatOp::identity(1, &ctx);
        let pair = FractionPair::new(a, b);
        let problem = AssociationProblem {
            pair,
            target: AssociationTarget::Gradient(vec![p("u", &ctx)]),
        };
        let ansatz = Ansatz {
            dord: 1,
            degree: 2,
            gens: AnsatzGens::new(&ctx),
        };
        let out = problem.solve(&ansatz).unwrap();
        assert_eq!(out.witness.particular[0], p("u", &ctx));
        assert_eq!(out.image[0], p("u'^2 + u*u''/2", &ctx));
    }
}
