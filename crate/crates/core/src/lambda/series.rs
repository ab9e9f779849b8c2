//! Truncated expansions in two variables λ, μ with exponents unbounded
//! below. Entries below either floor are unknown; arithmetic tracks how
//! far the known rectangle shrinks.

use crate::diffalg::{Ctx, DiffExpr};
use crate::ore::PseudoDiffOp;
use crate::poly::binom;
use std::collections::BTreeMap;

/// Known coefficients of a expansion Σ c_{ab} λ^a μ^b on the rectangle
/// a ≥ lambda_floor, b ≥ mu_floor.
#[derive(Clone, Debug)]
pub struct DoubleSeries {
    coeffs: BTreeMap<(i64, i64), DiffExpr>,
    pub lambda_floor: i64,
    pub mu_floor: i64,
    ctx: Ctx,
}

impl DoubleSeries {
    pub fn zero(ctx: &Ctx, lambda_floor: i64, mu_floor: i64) -> DoubleSeries {
        DoubleSeries {
            coeffs: BTreeMap::new(),
            lambda_floor,
            mu_floor,
            ctx: ctx.clone(),
        }
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    fn insert_add(&mut self, a: i64, b: i64, val: DiffExpr) {
        if val.is_zero() || a < self.lambda_floor || b < self.mu_floor {
            return;
        }
        let ctx = self.ctx.clone();
        let cur = self
            .coeffs
            .entry((a, b))
            .or_insert_with(|| DiffExpr::zero(&ctx));
        *cur = &*cur + &val;
        if cur.is_zero() {
            self.coeffs.remove(&(a, b));
        }
    }

    pub fn term(&mut self, a: i64, b: i64, val: DiffExpr) {
        self.insert_add(a, b, val);
    }

    pub fn coeff(&self, a: i64, b: i64) -> DiffExpr {
        assert!(
            a >= self.lambda_floor && b >= self.mu_floor,
            "coefficient ({}, {}) below known rectangle ({}, {})",
            a,
            b,
            self.lambda_floor,
            self.mu_floor
        );
        self.coeffs
            .get(&(a, b))
            .cloned()
            .unwrap_or_else(|| DiffExpr::zero(&self.ctx))
    }

    pub fn lambda_max(&self) -> i64 {
        self.coeffs
            .keys()
            .map(|&(a, _)| a)
            .max()
            .unwrap_or(self.lambda_floor)
    }

    pub fn mu_max(&self) -> i64 {
        self.coeffs
            .keys()
            .map(|&(_, b)| b)
            .max()
            .unwrap_or(self.mu_floor)
    }

    pub fn add(&self, other: &DoubleSeries) -> DoubleSeries {
        let mut out = DoubleSeries::zero(
            &self.ctx,
            self.lambda_floor.max(other.lambda_floor),
            self.mu_floor.max(other.mu_floor),
        );
        for (&(a, b), v) in self.coeffs.iter().chain(other.coeffs.iter()) {
            out.insert_add(a, b, v.clone());
        }
        out
    }

    pub fn neg(&self) -> DoubleSeries {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = -v.clone();
        }
        out
    }

    pub fn sub(&self, other: &DoubleSeries) -> DoubleSeries {
        self.add(&other.neg())
    }

    pub fn mul_expr(&self, e: &DiffExpr) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.ctx, self.lambda_floor, self.mu_floor);
        for (&(a, b), v) in &self.coeffs {
            out.insert_add(a, b, v.clone() * e.clone());
        }
        out
    }

    /// Product of two truncated expansions. Unknown low-order parts of one
    /// factor contaminate the product up to the other factor's top degree.
    pub fn mul(&self, other: &DoubleSeries) -> DoubleSeries {
        let lf = (self.lambda_floor + other.lambda_max()).max(other.lambda_floor + self.lambda_max());
        let mf = (self.mu_floor + other.mu_max()).max(other.mu_floor + self.mu_max());
        let mut out = DoubleSeries::zero(&self.ctx, lf, mf);
        for (&(a1, b1), v1) in &self.coeffs {
            for (&(a2, b2), v2) in &other.coeffs {
                out.insert_add(a1 + a2, b1 + b2, v1.clone() * v2.clone());
            }
        }
        out
    }

    pub fn shift(&self, da: i64, db: i64) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.ctx, self.lambda_floor + da, self.mu_floor + db);
        for (&(a, b), v) in &self.coeffs {
            out.insert_add(a + da, b + db, v.clone());
        }
        out
    }

    pub fn swap_axes(&self) -> DoubleSeries {
        let mut out = DoubleSeries::zero(&self.ctx, self.mu_floor, self.lambda_floor);
        for (&(a, b), v) in &self.coeffs {
            out.insert_add(b, a, v.clone());
        }
        out
    }

    /// Substitute second variable = ν − first and expand with ν dominant:
    /// entry λ^p μ^q spreads over λ^{p+k} ν^{q−k}. The total degree p+q is
    /// preserved, so unknown input regions only touch output cells below
    /// the diagonal kept_target + nu_target; the asserts enforce that the
    /// requested rectangle clears it.
    pub fn eliminate_second_to_nu(&self, kept_target: i64, nu_target: i64) -> DoubleSeries {
        assert!(
            kept_target + nu_target >= self.lambda_floor + self.mu_max(),
            "rectangle ({}, {}) dips under the first-axis floor {}",
            kept_target,
            nu_target,
            self.lambda_floor
        );
        // unknown entries below the second-axis floor only sink: their
        // images have ν-exponent ≤ that floor
        assert!(
            nu_target >= self.mu_floor,
            "rectangle ({}, {}) dips under the second-axis floor {}",
            kept_target,
            nu_target,
            self.mu_floor
        );
        let mut out = DoubleSeries::zero(&self.ctx, kept_target, nu_target);
        for (&(p, q), v) in &self.coeffs {
            let mut k = 0i64;
            while q - k >= nu_target && (q < 0 || k <= q) {
                // below the rectangle the sum over k is incomplete; drop it
                if p + k >= kept_target {
                    let mut w = binom(q, k as u32);
                    if k % 2 != 0 {
                        w = -w;
                    }
                    out.insert_add(p + k, q - k, v.scale(&w));
                }
                k += 1;
            }
        }
        out
    }

    /// On axes (α, ν), substitute α = ν − β and expand with ν dominant,
    /// landing on axes (β, ν). Same diagonal bookkeeping as
    /// `eliminate_second_to_nu`: α^p ν^r spreads over β^k ν^{p−k+r}.
    pub fn exchange_first_against_nu(&self, beta_target: i64, nu_target: i64) -> DoubleSeries {
        assert!(
            beta_target + nu_target >= self.lambda_floor + self.mu_max(),
            "rectangle ({}, {}) dips under the first-axis floor {}",
            beta_target,
            nu_target,
            self.lambda_floor
        );
        assert!(
            beta_target + nu_target >= self.mu_floor + self.lambda_max(),
            "rectangle ({}, {}) dips under the second-axis floor {}",
            beta_target,
            nu_target,
            self.mu_floor
        );
        let mut out = DoubleSeries::zero(&self.ctx, beta_target, nu_target);
        for (&(p, r), v) in &self.coeffs {
            let mut k = 0i64;
            while p + r - k >= nu_target && (p < 0 || k <= p) {
                if k >= beta_target {
                    let mut w = binom(p, k as u32);
                    if k % 2 != 0 {
                        w = -w;
                    }
                    out.insert_add(k, p + r - k, v.scale(&w));
                }
                k += 1;
            }
        }
        out
    }

    pub fn is_zero_within(&self, lambda_min: i64, mu_min: i64) -> bool {
        assert!(lambda_min >= self.lambda_floor && mu_min >= self.mu_floor);
        self.coeffs
            .iter()
            .all(|(&(a, b), v)| a < lambda_min || b < mu_min || v.is_zero())
    }

    pub fn first_nonzero_within(&self, lambda_min: i64, mu_min: i64) -> Option<((i64, i64), DiffExpr)> {
        self.coeffs
            .iter()
            .find(|(&(a, b), v)| a >= lambda_min && b >= mu_min && !v.is_zero())
            .map(|(&k, v)| (k, v.clone()))
    }
}

/// Which variable an operator symbol is applied at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesVar {
    Lambda,
    Mu,
}

/// X(w+∂) F for a one-variable operator symbol X and a two-variable
/// expansion F, where w is λ or μ. Negative orders of X expand in the
/// domain |w| large: (w+∂)^r = Σ_k C(r,k) ∂^k w^{r−k}.
pub fn apply_symbol(op: &PseudoDiffOp, var: SeriesVar, f: &DoubleSeries) -> DoubleSeries {
    let (vf, vmax) = match var {
        SeriesVar::Lambda => (f.lambda_floor, f.lambda_max()),
        SeriesVar::Mu => (f.mu_floor, f.mu_max()),
    };
    // Contamination: unknown exponents of f below vf shift up by at most
    // the top order of X; a window floor on X cuts from below as well.
    let top = op.order().unwrap_or(0);
    let mut floor_out = vf + top.max(0);
    if let crate::ore::Window::Floor(w) = op.window() {
        floor_out = floor_out.max(w + vmax);
    }
    let (lf, mf) = match var {
        SeriesVar::Lambda => (floor_out.max(f.lambda_floor), f.mu_floor),
        SeriesVar::Mu => (f.lambda_floor, floor_out.max(f.mu_floor)),
    };
    let mut out = DoubleSeries::zero(f.ctx(), lf, mf);
    for (&r, x) in op.terms() {
        for (&(a, b), c) in &f.coeffs {
            let v_exp = match var {
                SeriesVar::Lambda => a,
                SeriesVar::Mu => b,
            };
            // k bounded by how far w^{r−k} may drop before leaving the rectangle
            let kmax = if r >= 0 {
                r
            } else {
                let fl = match var {
                    SeriesVar::Lambda => out.lambda_floor,
                    SeriesVar::Mu => out.mu_floor,
                };
                v_exp + r - fl
            };
            let mut k = 0i64;
            while k <= kmax {
                let w = binom(r, k as u32);
                let term = c.dn(k as usize).scale(&w) * x.clone();
                let (na, nb) = match var {
                    SeriesVar::Lambda => (a + r - k, b),
                    SeriesVar::Mu => (a, b + r - k),
                };
                out.insert_add(na, nb, term);
                k += 1;
            }
        }
    }
    out
}

/// (λ+μ+∂)^p F for p ≥ 0: trinomial expansion.
pub fn apply_sum_shift(p: u32, f: &DoubleSeries) -> DoubleSeries {
    let mut out = DoubleSeries::zero(f.ctx(), f.lambda_floor, f.mu_floor);
    for (&(a, b), c) in &f.coeffs {
        for i in 0..=p {
            for j in 0..=(p - i) {
                let w = binom(p as i64, i) * binom((p - i) as i64, j);
                out.insert_add(a + i as i64, b + j as i64, c.dn((p - i - j) as usize).scale(&w));
            }
        }
    }
    out
}

/// Z(λ+μ+∂) F for a one-variable symbol Z = Σ_w z_w ν^w and a
/// two-variable expansion F, with ∂ acting on everything to the right of
/// its coefficient. Negative powers of λ+μ+∂ expand geometrically in the
/// dominant variable: (λ+μ+∂)^w = Σ_j C(w,j) μ^{w−j} (λ+∂)^j with μ
/// dominant, mirrored otherwise. The asserts check that what the floors
/// of Z and F hide cannot reach the requested rectangle.
pub fn apply_symbol_at_sum(
    op: &PseudoDiffOp,
    f: &DoubleSeries,
    mu_dominant: bool,
    lambda_target: i64,
    mu_target: i64,
) -> DoubleSeries {
    let top = op.order().unwrap_or(0).max(0);
    let (dom_floor, dom_max, sub_floor, dom_target, sub_target) = if mu_dominant {
        (f.mu_floor, f.mu_max(), f.lambda_floor, mu_target, lambda_target)
    } else {
        (f.lambda_floor, f.lambda_max(), f.mu_floor, lambda_target, mu_target)
    };
    if let crate::ore::Window::Floor(w) = op.window() {
        assert!(
            w + dom_max <= dom_target,
            "symbol window {} cannot clear the rectangle ({}, {})",
            w,
            lambda_target,
            mu_target
        );
    }
    assert!(
        dom_floor + top <= dom_target,
        "dominant-axis floor {} cannot clear the rectangle ({}, {})",
        dom_floor,
        lambda_target,
        mu_target
    );
    // j is bounded by the power for w ≥ 0 and by how far the dominant
    // exponent may drop for w < 0, so the subordinate axis climbs at most
    // jmax above the known region
    let mut jmax = 0i64;
    for (&w, _) in op.terms() {
        let b = if w >= 0 { w } else { dom_max + w - dom_target };
        jmax = jmax.max(b);
    }
    if let crate::ore::Window::Floor(w) = op.window() {
        if w > 0 {
            jmax = jmax.max(w - 1);
        }
    }
    assert!(
        sub_floor + jmax <= sub_target,
        "subordinate-axis floor {} cannot clear the rectangle ({}, {})",
        sub_floor,
        lambda_target,
        mu_target
    );
    let mut out = DoubleSeries::zero(f.ctx(), lambda_target, mu_target);
    for (&w, z) in op.terms() {
        for (&(a, b), c) in &f.coeffs {
            let dom_exp = if mu_dominant { b } else { a };
            let mut jcap = dom_exp + w - dom_target;
            if w >= 0 {
                jcap = jcap.min(w);
            }
            let mut j = 0i64;
            while j <= jcap {
                let wj = binom(w, j as u32);
                for i in 0..=j {
                    let coef = wj.clone() * binom(j, i as u32);
                    let term = c.dn((j - i) as usize).scale(&coef) * z.clone();
                    let (na, nb) = if mu_dominant {
                        (a + i, b + w - j)
                    } else {
                        (a + w - j, b + i)
                    };
                    out.insert_add(na, nb, term);
                }
                j += 1;
            }
        }
    }
    out
}

/// (λ+μ)^r as a truncated expansion, geometric in the chosen domain:
/// dominant μ expands with descending μ-exponents, dominant λ mirrored.
pub fn sum_power(ctx: &Ctx, r: i64, mu_dominant: bool, floor: i64) -> DoubleSeries {
    let one = DiffExpr::one(ctx);
    if r >= 0 {
        let mut out = DoubleSeries::zero(ctx, floor, floor);
        for k in 0..=r {
            let (a, b) = if mu_dominant { (k, r - k) } else { (r - k, k) };
            out.insert_add(a, b, one.scale(&binom(r, k as u32)));
        }
        return out;
    }
    let (lf, mf) = if mu_dominant { (0, floor) } else { (floor, 0) };
    let mut out = DoubleSeries::zero(ctx, lf, mf);
    let mut k = 0i64;
    while r - k >= floor {
        let (a, b) = if mu_dominant { (k, r - k) } else { (r - k, k) };
        out.insert_add(a, b, one.scale(&binom(r, k as u32)));
        k += 1;
    }
    out
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
    fn symbol_application_negative_order() {
        let c = ctx();
        // (λ+∂)^{-1} u' = Σ_k (−1)^k u^{(k+1)} λ^{−1−k}
        let mut f = DoubleSeries::zero(&c, -6, 0);
        f.term(0, 0, p("u'", &c));
        let op = PseudoDiffOp::d_power(1, &c).invert(Some(-8)).unwrap();
        let g = apply_symbol(&op, SeriesVar::Lambda, &f);
        assert_eq!(g.coeff(-1, 0), p("u'", &c));
        assert_eq!(g.coeff(-2, 0), p("-u''", &c));
        assert_eq!(g.coeff(-3, 0), p("u'''", &c));
    }

    #[test]
    fn sum_power_routes() {
        let c = ctx();
        // ι with dominant μ: (λ+μ)^{-1} = Σ_k (−1)^k λ^k μ^{−1−k}
        let s = sum_power(&c, -1, true, -5);
        assert_eq!(s.coeff(0, -1), p("1", &c));
        assert_eq!(s.coeff(1, -2), p("-1", &c));
        assert_eq!(s.coeff(2, -3), p("1", &c));
        // positive power is route-independent
        let q = sum_power(&c, 2, true, -5);
        assert_eq!(q.coeff(1, 1), p("2", &c));
    }

    #[test]
    fn product_floor_contamination() {
        let c = ctx();
        let mut x = DoubleSeries::zero(&c, -3, 0);
        x.term(-1, 0, p("u", &c));
        x.term(-3, 0, p("u'", &c));
        let mut y = DoubleSeries::zero(&c, -2, 0);
        y.term(2, 0, p("1", &c));
        let z = x.mul(&y);
        // unknown part of x below −3 times λ^2 reaches λ^{−1}
        assert_eq!(z.lambda_floor, -1);
        assert_eq!(z.coeff(1, 0), p("u", &c));
        assert_eq!(z.coeff(-1, 0), p("u'", &c));
    }

    #[test]
    fn symbol_at_sum_positive_matches_trinomial() {
        let c = ctx();
        let mut f = DoubleSeries::zero(&c, -6, -6);
        f.term(0, 0, p("u", &c));
        f.term(-1, 1, p("u'", &c));
        let op = PseudoDiffOp::d_power(2, &c);
        let direct = apply_sum_shift(2, &f);
        for route in [true, false] {
            let g = apply_symbol_at_sum(&op, &f, route, -4, -4);
            for a in -4..4 {
                for b in -4..4 {
                    assert_eq!(g.coeff(a, b), direct.coeff(a, b));
                }
            }
        }
    }

    #[test]
    fn symbol_at_sum_negative_order() {
        let c = ctx();
        let mut f = DoubleSeries::zero(&c, -10, -10);
        f.term(0, 0, p("u'", &c));
        let op = PseudoDiffOp::d_power(1, &c).invert(Some(-8)).unwrap();
        // μ dominant: (λ+μ+∂)^{-1} u' = Σ_j C(-1,j) μ^{-1-j} (λ+∂)^j u'
        let g = apply_symbol_at_sum(&op, &f, true, -3, -3);
        assert_eq!(g.coeff(0, -1), p("u'", &c));
        assert_eq!(g.coeff(1, -2), p("-u'", &c));
        assert_eq!(g.coeff(0, -2), p("-u''", &c));
        assert_eq!(g.coeff(2, -3), p("u'", &c));
        assert_eq!(g.coeff(1, -3), p("2*u''", &c));
        assert_eq!(g.coeff(0, -3), p("u'''", &c));
        assert_eq!(g.coeff(-1, -1), p("0", &c));
        // λ dominant mirrors the roles
        let h = apply_symbol_at_sum(&op, &f, false, -3, -3);
        assert_eq!(h.coeff(-1, 0), p("u'", &c));
        assert_eq!(h.coeff(-2, 1), p("-u'", &c));
        assert_eq!(h.coeff(-2, 0), p("-u''", &c));
        assert_eq!(h.coeff(-3, 2), p("u'", &c));
    }

    #[test]
    fn trinomial_shift() {
        let c = ctx();
        let mut f = DoubleSeries::zero(&c, -4, -4);
        f.term(0, 0, p("u", &c));
        let g = apply_sum_shift(2, &f);
        assert_eq!(g.coeff(2, 0), p("u", &c));
        assert_eq!(g.coeff(1, 1), p("2*u", &c));
        assert_eq!(g.coeff(1, 0), p("2*u'", &c));
        assert_eq!(g.coeff(0, 0), p("u''", &c));
    }
}
