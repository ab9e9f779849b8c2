//! Scalar and matrix pseudodifferential operators with coefficients in an
//! algebra of differential functions.
//!
//! An operator is Σ a_n ∂^n with finitely many positive orders. Non-local
//! operators carry a window floor: coefficients below the floor are
//! unknown, and reading them is a hard error. Window floors propagate
//! through arithmetic so that every reported coefficient is exact.

mod euclid;
mod fraction;
mod matrix;

pub use euclid::*;
pub use fraction::*;
pub use matrix::*;

use crate::diffalg::{Ctx, DiffExpr};
use crate::poly::{binom, rat, Rat};
use std::collections::BTreeMap;
use std::fmt;

/// Validity window of an operator's coefficient list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    /// All coefficients are stored; the operator is a finite sum.
    Exact,
    /// Coefficients at orders ≥ floor are stored; lower ones are unknown.
    Floor(i64),
}

impl Window {
    pub fn floor(&self) -> Option<i64> {
        match self {
            Window::Exact => None,
            Window::Floor(w) => Some(*w),
        }
    }

    fn join(a: Window, b: Window) -> Window {
        match (a.floor(), b.floor()) {
            (None, None) => Window::Exact,
            (f, g) => Window::Floor(f.unwrap_or(i64::MIN).max(g.unwrap_or(i64::MIN))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OreError {
    #[error("coefficient at order {order} is below the window floor {floor}")]
    BelowWindow { order: i64, floor: i64 },
    #[error("operation needs a window floor but none was supplied")]
    NeedsWindow,
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Debug)]
pub struct PseudoDiffOp {
    coeffs: BTreeMap<i64, DiffExpr>,
    window: Window,
    ctx: Ctx,
}

impl PseudoDiffOp {
    pub fn zero(ctx: &Ctx) -> Self {
        PseudoDiffOp {
            coeffs: BTreeMap::new(),
            window: Window::Exact,
            ctx: ctx.clone(),
        }
    }

    pub fn identity(ctx: &Ctx) -> Self {
        Self::d_power(0, ctx)
    }

    /// ∂^n for any integer n.
    pub fn d_power(n: i64, ctx: &Ctx) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(n, DiffExpr::one(ctx));
        PseudoDiffOp {
            coeffs,
            window: Window::Exact,
            ctx: ctx.clone(),
        }
    }

    /// Multiplication by a function.
    pub fn from_expr(f: &DiffExpr) -> Self {
        Self::monomial(f, 0)
    }

    /// f ∂^n.
    pub fn monomial(f: &DiffExpr, n: i64) -> Self {
        let ctx = f.ctx().clone();
        let mut coeffs = BTreeMap::new();
        if !f.is_zero() {
            coeffs.insert(n, f.clone());
        }
        PseudoDiffOp {
            coeffs,
            window: Window::Exact,
            ctx,
        }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i64, DiffExpr)>, ctx: &Ctx) -> Self {
        let mut out = Self::zero(ctx);
        for (n, f) in terms {
            if !f.is_zero() {
                let cur = out.coeffs.entry(n).or_insert_with(|| DiffExpr::zero(ctx));
                *cur = &*cur + &f;
                if cur.is_zero() {
                    out.coeffs.remove(&n);
                }
            }
        }
        out
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Max order with a nonzero coefficient; None when no coefficient is
    /// stored (zero within the window).
    pub fn order(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn min_order(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn leading(&self) -> Option<&DiffExpr> {
        self.coeffs.values().next_back()
    }

    /// Whether every stored coefficient vanishes (exact zero only when the
    /// window is exact).
    pub fn is_zero_within_window(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.coeffs.is_empty() && self.window == Window::Exact
    }

    /// Purely differential: no negative orders (exact window required).
    pub fn is_differential(&self) -> bool {
        self.window == Window::Exact && self.min_order().map_or(true, |n| n >= 0)
    }

    /// Coefficient of ∂^n; reading below the window floor is an error.
    pub fn coeff(&self, n: i64) -> Result<DiffExpr, OreError> {
        if let Window::Floor(w) = self.window {
            if n < w {
                return Err(OreError::BelowWindow { order: n, floor: w });
            }
        }
        Ok(self
            .coeffs
            .get(&n)
            .cloned()
            .unwrap_or_else(|| DiffExpr::zero(&self.ctx)))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &DiffExpr)> {
        self.coeffs.iter()
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, f| !f.is_zero());
        if let Window::Floor(w) = self.window {
            self.coeffs.retain(|n, _| *n >= w);
        }
    }

    pub fn truncate(&self, floor: i64) -> Self {
        let window = match self.window {
            Window::Exact => Window::Floor(floor),
            Window::Floor(w) => Window::Floor(w.max(floor)),
        };
        let mut out = self.clone();
        out.window = window;
        out.prune();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let window = Window::join(self.window, other.window);
        let mut coeffs = self.coeffs.clone();
        for (n, f) in &other.coeffs {
            let cur = coeffs.entry(*n).or_insert_with(|| DiffExpr::zero(&self.ctx));
            *cur = &*cur + f;
        }
        let mut out = PseudoDiffOp {
            coeffs,
            window,
            ctx: self.ctx.clone(),
        };
        out.prune();
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for f in out.coeffs.values_mut() {
            *f = -f.clone();
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rat) -> Self {
        let mut out = self.clone();
        for f in out.coeffs.values_mut() {
            *f = f.scale(c);
        }
        out.prune();
        out
    }

    /// Multiply every coefficient by a function on the left (f ∘ A when f
    /// is a multiplication operator).
    pub fn left_mul_expr(&self, f: &DiffExpr) -> Self {
        let mut out = self.clone();
        for g in out.coeffs.values_mut() {
            *g = f.clone() * g.clone();
        }
        out.prune();
        out
    }

    /// Derivatives of f until they vanish, when f generates a terminating
    /// chain (an x-polynomial over the quasiconstants); None otherwise.
    fn terminating_derivatives(f: &DiffExpr) -> Option<Vec<DiffExpr>> {
        if f.dord().is_some() {
            return None;
        }
        let mut out = vec![f.clone()];
        let bound = f.raw().num().total_degree() as usize + 2;
        for _ in 0..bound {
            let next = out.last().unwrap().total_derivative();
            if next.is_zero() {
                return Some(out);
            }
            out.push(next);
        }
        None
    }

    /// Composition A ∘ B using a ∂^m ∘ b = Σ_k C(m,k) a b^(k) ∂^(m+n−k).
    /// `wmin` supplies the output floor when an infinite tail arises from
    /// exact operands; it is ignored otherwise.
    pub fn compose(&self, other: &Self, wmin: Option<i64>) -> Self {
        // contamination floors from windowed operands
        let mut floor: Option<i64> = None;
        let mut raise = |f: i64| floor = Some(floor.map_or(f, |g: i64| g.max(f)));
        if let (Window::Floor(w1), Some(n2)) = (self.window, other.order()) {
            raise(w1 + n2);
        }
        if let (Window::Floor(w1), None) = (self.window, other.order()) {
            // B zero within window: product zero within a floor as well
            raise(w1 + other.window.floor().unwrap_or(0));
        }
        if let (Window::Floor(w2), Some(n1)) = (other.window, self.order()) {
            raise(w2 + n1);
        }
        if let (Window::Floor(w2), None) = (other.window, self.order()) {
            raise(w2 + self.window.floor().unwrap_or(0));
        }
        // infinite tails from negative-order exact terms
        let mut needs_window = false;
        for (&m, _) in &self.coeffs {
            if m >= 0 {
                continue;
            }
            for (_, b) in &other.coeffs {
                if Self::terminating_derivatives(b).is_none() {
                    needs_window = true;
                }
            }
        }
        if needs_window {
            let w = wmin.expect("composition has an infinite tail; supply a window floor");
            raise(w);
        }
        let window = match floor {
            None => Window::Exact,
            Some(w) => Window::Floor(w),
        };

        let mut out = PseudoDiffOp {
            coeffs: BTreeMap::new(),
            window,
            ctx: self.ctx.clone(),
        };
        let floor = window.floor();
        for (&m, a) in &self.coeffs {
            for (&n, b) in &other.coeffs {
                // k bound: binomial vanishes past m for m ≥ 0; otherwise
                // the window floor or derivative termination cuts off
                let kmax: i64 = if m >= 0 {
                    m
                } else {
                    match floor {
                        Some(w) => m + n - w,
                        None => i64::MAX, // termination guaranteed below
                    }
                };
                let mut bk = b.clone();
                let mut k: i64 = 0;
                while k <= kmax {
                    if bk.is_zero() {
                        break;
                    }
                    let ord = m + n - k;
                    if floor.map_or(true, |w| ord >= w) {
                        let c = binom(m, k as u32);
                        let term = bk.scale(&c) * a.clone();
                        let cur = out
                            .coeffs
                            .entry(ord)
                            .or_insert_with(|| DiffExpr::zero(&self.ctx));
                        *cur = &*cur + &term;
                    }
                    bk = bk.total_derivative();
                    k += 1;
                }
            }
        }
        out.prune();
        out
    }

    /// Formal adjoint: (a ∂^m)* = (−∂)^m ∘ a.
    pub fn adjoint(&self, wmin: Option<i64>) -> Self {
        let mut floor = self.window.floor();
        let mut needs_window = false;
        for (&m, a) in &self.coeffs {
            if m < 0 && Self::terminating_derivatives(a).is_none() {
                needs_window = true;
            }
        }
        if needs_window {
            let w = wmin.expect("adjoint has an infinite tail; supply a window floor");
            floor = Some(floor.map_or(w, |f| f.max(w)));
        }
        let window = match floor {
            None => Window::Exact,
            Some(w) => Window::Floor(w),
        };
        let mut out = PseudoDiffOp {
            coeffs: BTreeMap::new(),
            window,
            ctx: self.ctx.clone(),
        };
        for (&m, a) in &self.coeffs {
            let sign = if m.rem_euclid(2) == 0 { rat(1) } else { rat(-1) };
            let kmax: i64 = if m >= 0 {
                m
            } else {
                match window.floor() {
                    Some(w) => m - w,
                    None => i64::MAX,
                }
            };
            let mut ak = a.clone();
            let mut k: i64 = 0;
            while k <= kmax {
                if ak.is_zero() {
                    break;
                }
                let ord = m - k;
                if window.floor().map_or(true, |w| ord >= w) {
                    let c = binom(m, k as u32) * sign.clone();
                    let term = ak.scale(&c);
                    let cur = out
                        .coeffs
                        .entry(ord)
                        .or_insert_with(|| DiffExpr::zero(&self.ctx));
                    *cur = &*cur + &term;
                }
                ak = ak.total_derivative();
                k += 1;
            }
        }
        out.prune();
        out
    }

    /// Apply a differential operator to a function.
    pub fn apply(&self, f: &DiffExpr) -> DiffExpr {
        assert!(
            self.is_differential(),
            "only differential operators act on functions"
        );
        let mut out = DiffExpr::zero(&self.ctx);
        for (&n, a) in &self.coeffs {
            out = out + a.clone() * f.dn(n as usize);
        }
        out
    }

    /// Inverse as a formal series. Exact when the operator is c ∂^N with a
    /// terminating chain for 1/c; otherwise windowed via the geometric
    /// series around the leading term.
    pub fn invert(&self, wmin: Option<i64>) -> Result<Self, OreError> {
        let lead_ord = match self.order() {
            Some(n) => n,
            None => return Err(OreError::Other("cannot invert zero operator".into())),
        };
        let lead = self.coeffs[&lead_ord].clone();
        let inv_lead = DiffExpr::one(&self.ctx) / lead.clone();
        // trustworthy floor induced by an input window, plus the request
        let induced = self.window.floor().map(|w| w - 2 * lead_ord);
        let floor = match (induced, wmin) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        if self.coeffs.len() == 1 && self.window == Window::Exact {
            let tail_finite = lead_ord <= 0 || Self::terminating_derivatives(&inv_lead).is_some();
            if !tail_finite && floor.is_none() {
                return Err(OreError::NeedsWindow);
            }
            return Ok(Self::d_power(-lead_ord, &self.ctx)
                .compose(&Self::from_expr(&inv_lead), floor));
        }
        let floor = floor.ok_or(OreError::NeedsWindow)?;
        // A = a_N ∂^N (1 + L) with L = (a_N ∂^N)^{-1}(A − a_N ∂^N), so
        // A^{-1} = (Σ (−L)^k) ∘ ∂^{-N} a_N^{-1}; ord L ≤ −1 truncates the
        // series at the floor.
        let series_floor = floor + lead_ord;
        let base =
            Self::d_power(-lead_ord, &self.ctx).compose(&Self::from_expr(&inv_lead), Some(floor));
        let rest = self.sub(&Self::monomial(&lead, lead_ord));
        let ell = base.compose(&rest, Some(series_floor)).truncate(series_floor);
        let mut series = Self::identity(&self.ctx).truncate(series_floor);
        let mut term = Self::identity(&self.ctx).truncate(series_floor);
        loop {
            term = ell
                .neg()
                .compose(&term, Some(series_floor))
                .truncate(series_floor);
            if term.is_zero_within_window() {
                break;
            }
            series = series.add(&term);
        }
        Ok(series.compose(&base, Some(floor)).truncate(floor))
    }

    /// Agreement on the common trustworthy region.
    pub fn agrees_with(&self, other: &Self) -> bool {
        match Window::join(self.window, other.window) {
            Window::Exact => self.sub(other).is_exact_zero(),
            Window::Floor(w) => self.sub(other).truncate(w).is_zero_within_window(),
        }
    }
}

impl fmt::Display for PseudoDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            write!(f, "0")?;
        } else {
            for (k, (n, c)) in self.coeffs.iter().rev().enumerate() {
                if k > 0 {
                    write!(f, " + ")?;
                }
                if *n == 0 {
                    write!(f, "({})", c)?;
                } else if *n == 1 {
                    write!(f, "({})*D", c)?;
                } else {
                    write!(f, "({})*D^{}", c, n)?;
                }
            }
        }
        if let Window::Floor(w) = self.window {
            write!(f, " + O(D^{})", w - 1)?;
        }
        Ok(())
    }
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
    fn compose_differential() {
        let c = ctx();
        // ∂ ∘ u = u ∂ + u'
        let a = PseudoDiffOp::d_power(1, &c);
        let b = PseudoDiffOp::from_expr(&p("u", &c));
        let ab = a.compose(&b, None);
        assert_eq!(ab.coeff(1).unwrap(), p("u", &c));
        assert_eq!(ab.coeff(0).unwrap(), p("u'", &c));
        assert_eq!(ab.window(), Window::Exact);
    }

    #[test]
    fn compose_window_rules() {
        let c = ctx();
        // ∂^{-1} ∘ u' is an infinite series: needs a window
        let dinv = PseudoDiffOp::d_power(-1, &c);
        let f = PseudoDiffOp::from_expr(&p("u'", &c));
        let s = dinv.compose(&f, Some(-4));
        assert_eq!(s.window(), Window::Floor(-4));
        // ∂^{-1} ∘ u' = u' ∂^{-1} − u'' ∂^{-2} + u''' ∂^{-3} − ...
        assert_eq!(s.coeff(-1).unwrap(), p("u'", &c));
        assert_eq!(s.coeff(-2).unwrap(), p("-u''", &c));
        assert_eq!(s.coeff(-3).unwrap(), p("u'''", &c));
        assert!(s.coeff(-5).is_err());
        // ∂^{-1} ∘ x stays exact: the chain terminates
        let sx = dinv.compose(&PseudoDiffOp::from_expr(&p("x", &c)), None);
        assert_eq!(sx.window(), Window::Exact);
        assert_eq!(sx.coeff(-1).unwrap(), p("x", &c));
        assert_eq!(sx.coeff(-2).unwrap(), p("-1", &c));
    }

    #[test]
    fn compose_associativity_windowed() {
        let c = ctx();
        let a = PseudoDiffOp::from_terms([(2, p("u", &c)), (-1, p("u'", &c))], &c);
        let b = PseudoDiffOp::from_terms([(1, p("u''", &c)), (0, p("x", &c))], &c);
        let d = PseudoDiffOp::from_terms([(0, p("u", &c)), (-2, p("1", &c))], &c);
        let w = Some(-6);
        let left = a.compose(&b, w).compose(&d, w);
        let right = a.compose(&b.compose(&d, w), w);
        assert!(left.agrees_with(&right));
    }

    #[test]
    fn adjoint_rules() {
        let c = ctx();
        // (u ∂)* = -∂ ∘ u = -u∂ - u'
        let a = PseudoDiffOp::monomial(&p("u", &c), 1);
        let ad = a.adjoint(None);
        assert_eq!(ad.coeff(1).unwrap(), p("-u", &c));
        assert_eq!(ad.coeff(0).unwrap(), p("-u'", &c));
        // involution on a windowed operator
        let s = PseudoDiffOp::d_power(-1, &c).compose(&PseudoDiffOp::from_expr(&p("u'", &c)), Some(-6));
        let back = s.adjoint(Some(-6)).adjoint(Some(-6));
        assert!(back.agrees_with(&s));
        // (AB)* = B* A*
        let b = PseudoDiffOp::from_terms([(2, p("u'", &c)), (0, p("u", &c))], &c);
        let lhs = a.compose(&b, None).adjoint(None);
        let rhs = b.adjoint(None).compose(&a.adjoint(None), None);
        assert!(lhs.agrees_with(&rhs));
    }

    #[test]
    fn invert_monomial_exactly() {
        let c = ctx();
        // ((1/u') ∂)^{-1} = ∂^{-1} ∘ u': exact via termination? u' chain
        // does not terminate, so the inverse is windowed, but composing
        // back must give the identity within the window.
        let a = PseudoDiffOp::monomial(&p("1/u'", &c), 1);
        let inv = a.invert(Some(-6)).unwrap();
        assert_eq!(inv.coeff(-1).unwrap(), p("u'", &c));
        let id = a.compose(&inv, Some(-6));
        assert!(id.agrees_with(&PseudoDiffOp::identity(&c).truncate(-6)));
        let id2 = inv.compose(&a, Some(-6));
        assert!(id2.agrees_with(&PseudoDiffOp::identity(&c).truncate(-6)));
    }

    #[test]
    fn invert_general() {
        let c = ctx();
        let a = PseudoDiffOp::from_terms([(2, p("u", &c)), (1, p("u'", &c)), (0, p("1", &c))], &c);
        let inv = a.invert(Some(-8)).unwrap();
        let id = a.compose(&inv, Some(-8));
        assert!(id.agrees_with(&PseudoDiffOp::identity(&c).truncate(-6)));
    }

    #[test]
    fn apply_differential() {
        let c = ctx();
        let a = PseudoDiffOp::from_terms([(2, p("1", &c)), (0, p("u", &c))], &c);
        assert_eq!(a.apply(&p("u", &c)), p("u'' + u^2", &c));
    }
}
