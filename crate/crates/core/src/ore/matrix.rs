//! Matrices of pseudodifferential operators.

use super::{right_divide, OreError, PseudoDiffOp};
use crate::diffalg::{Ctx, DiffExpr};

#[derive(Clone, Debug)]
pub struct MatOp {
    rows: usize,
    cols: usize,
    entries: Vec<PseudoDiffOp>,
    ctx: Ctx,
}

impl MatOp {
    pub fn zero(rows: usize, cols: usize, ctx: &Ctx) -> MatOp {
        MatOp {
            rows,
            cols,
            entries: vec![PseudoDiffOp::zero(ctx); rows * cols],
            ctx: ctx.clone(),
        }
    }

    pub fn identity(n: usize, ctx: &Ctx) -> MatOp {
        let mut m = MatOp::zero(n, n, ctx);
        for i in 0..n {
            *m.at_mut(i, i) = PseudoDiffOp::identity(ctx);
        }
        m
    }

    /// Scalar operator as a 1×1 matrix.
    pub fn scalar(op: PseudoDiffOp) -> MatOp {
        let ctx = op.ctx().clone();
        MatOp {
            rows: 1,
            cols: 1,
            entries: vec![op],
            ctx,
        }
    }

    pub fn from_rows(rows: Vec<Vec<PseudoDiffOp>>, ctx: &Ctx) -> MatOp {
        let r = rows.len();
        assert!(r > 0);
        let c = rows[0].len();
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        MatOp {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
            ctx: ctx.clone(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn at(&self, i: usize, j: usize) -> &PseudoDiffOp {
        &self.entries[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut PseudoDiffOp {
        &mut self.entries[i * self.cols + j]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_differential(&self) -> bool {
        self.entries.iter().all(|e| e.is_differential())
    }

    pub fn is_zero_within_window(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero_within_window())
    }

    pub fn is_exact_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_exact_zero())
    }

    pub fn add(&self, other: &MatOp) -> MatOp {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        MatOp {
            rows: self.rows,
            cols: self.cols,
            entries,
            ctx: self.ctx.clone(),
        }
    }

    pub fn sub(&self, other: &MatOp) -> MatOp {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MatOp {
        MatOp {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.neg()).collect(),
            ctx: self.ctx.clone(),
        }
    }

    pub fn compose(&self, other: &MatOp, wmin: Option<i64>) -> MatOp {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = MatOp::zero(self.rows, other.cols, &self.ctx);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = PseudoDiffOp::zero(&self.ctx);
                for k in 0..self.cols {
                    acc = acc.add(&self.at(i, k).compose(other.at(k, j), wmin));
                }
                *out.at_mut(i, j) = acc;
            }
        }
        out
    }

    /// Matrix adjoint: transpose of entrywise adjoints.
    pub fn adjoint(&self, wmin: Option<i64>) -> MatOp {
        let mut out = MatOp::zero(self.cols, self.rows, &self.ctx);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j).adjoint(wmin);
            }
        }
        out
    }

    pub fn truncate(&self, floor: i64) -> MatOp {
        MatOp {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.truncate(floor)).collect(),
            ctx: self.ctx.clone(),
        }
    }

    pub fn apply(&self, v: &[DiffExpr]) -> Vec<DiffExpr> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = DiffExpr::zero(&self.ctx);
                for j in 0..self.cols {
                    acc = acc + self.at(i, j).apply(&v[j]);
                }
                acc
            })
            .collect()
    }

    pub fn agrees_with(&self, other: &MatOp) -> bool {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .all(|(a, b)| a.agrees_with(b))
    }

    /// A + A* within the window; zero means skewadjoint.
    pub fn skew_defect(&self, wmin: Option<i64>) -> MatOp {
        assert!(self.is_square());
        self.add(&self.adjoint(wmin))
    }

    /// Inverse within a window floor (square matrices). Gauss-Jordan over
    /// the Ore ring using operator inverses of the pivots.
    pub fn invert(&self, wmin: Option<i64>) -> Result<MatOp, OreError> {
        assert!(self.is_square());
        let n = self.rows;
        if n == 1 {
            return Ok(MatOp::scalar(self.at(0, 0).invert(wmin)?));
        }
        let mut work = self.clone();
        let mut inv = MatOp::identity(n, &self.ctx);
        for col in 0..n {
            // choose the pivot of largest order for stability of windows
            let pivot = (col..n)
                .filter(|&r| !work.at(r, col).is_zero_within_window())
                .max_by_key(|&r| work.at(r, col).order().unwrap_or(i64::MIN));
            let pivot = pivot.ok_or_else(|| OreError::Other("singular matrix".into()))?;
            if pivot != col {
                for j in 0..n {
                    let a = work.at(pivot, j).clone();
                    let b = work.at(col, j).clone();
                    *work.at_mut(pivot, j) = b;
                    *work.at_mut(col, j) = a;
                    let a = inv.at(pivot, j).clone();
                    let b = inv.at(col, j).clone();
                    *inv.at_mut(pivot, j) = b;
                    *inv.at_mut(col, j) = a;
                }
            }
            let p_inv = work.at(col, col).invert(wmin)?;
            for j in 0..n {
                *work.at_mut(col, j) = p_inv.compose(work.at(col, j), wmin);
                *inv.at_mut(col, j) = p_inv.compose(inv.at(col, j), wmin);
            }
            for r in 0..n {
                if r == col || work.at(r, col).is_zero_within_window() {
                    continue;
                }
                let f = work.at(r, col).clone();
                for j in 0..n {
                    let w = f.compose(work.at(col, j), wmin);
                    *work.at_mut(r, j) = work.at(r, j).sub(&w);
                    let w = f.compose(inv.at(col, j), wmin);
                    *inv.at_mut(r, j) = inv.at(r, j).sub(&w);
                }
            }
        }
        Ok(inv)
    }
}

/// Dieudonné determinant data of a nondegenerate matrix: the product of
/// the leading coefficients after triangularization and the total order.
#[derive(Clone, Debug)]
pub enum DetResult {
    Zero,
    NonZero { c: DiffExpr, d: i64 },
}

/// Pivot choice: max order, tie-break smaller leading-coefficient dord,
/// then lower row.
fn pick_pivot(work: &MatOp, col: usize, from: usize) -> Option<usize> {
    let mut best: Option<(usize, i64, i64)> = None;
    for r in from..work.nrows() {
        let e = work.at(r, col);
        if e.is_exact_zero() {
            continue;
        }
        let ord = e.order().unwrap();
        let dord = e.leading().and_then(|l| l.dord()).unwrap_or(i64::MIN);
        let better = match best {
            None => true,
            Some((_, bo, bd)) => ord > bo || (ord == bo && dord < bd),
        };
        if better {
            best = Some((r, ord, dord));
        }
    }
    best.map(|(r, _, _)| r)
}

/// Row echelon form of a matrix of differential operators, with the sign
/// of the accumulated row swaps. Row operations are R_i ← R_i − Q∘R_p.
pub fn row_echelon(mat: &MatOp) -> (MatOp, i64) {
    assert!(mat.is_differential(), "row echelon needs differential entries");
    let mut work = mat.clone();
    let mut sign = 1i64;
    let n = work.nrows();
    let m = work.ncols();
    let mut row = 0usize;
    for col in 0..m {
        if row >= n {
            break;
        }
        if pick_pivot(&work, col, row).is_none() {
            continue;
        }
        // Euclid on the column: reduce larger orders against smaller until
        // one nonzero entry remains
        loop {
            let nonzero: Vec<usize> = (row..n)
                .filter(|&r| !work.at(r, col).is_exact_zero())
                .collect();
            if nonzero.len() <= 1 {
                break;
            }
            // divide everything by the entry of minimal order
            let min_row = *nonzero
                .iter()
                .min_by_key(|&&r| work.at(r, col).order().unwrap())
                .unwrap();
            for &r in &nonzero {
                if r == min_row {
                    continue;
                }
                let (q, _) = right_divide(work.at(r, col), work.at(min_row, col));
                if q.is_exact_zero() {
                    continue;
                }
                for j in 0..m {
                    let delta = q.compose(work.at(min_row, j), None);
                    *work.at_mut(r, j) = work.at(r, j).sub(&delta);
                }
            }
        }
        let last = (row..n).find(|&r| !work.at(r, col).is_exact_zero());
        if let Some(r) = last {
            // deterministic placement honoring the pivot rule among the
            // survivors (only one remains, so this is a plain swap)
            if r != row {
                sign = -sign;
                for j in 0..m {
                    let a = work.at(r, j).clone();
                    let b = work.at(row, j).clone();
                    *work.at_mut(r, j) = b;
                    *work.at_mut(row, j) = a;
                }
            }
            row += 1;
        }
    }
    (work, sign)
}

/// Dieudonné determinant through row echelon: c is the signed product of
/// the diagonal leading coefficients, d the sum of the diagonal orders.
pub fn dieudonne_det(mat: &MatOp) -> DetResult {
    assert!(mat.is_square());
    let (ech, sign) = row_echelon(mat);
    let n = mat.nrows();
    let mut c = DiffExpr::one(mat.ctx());
    let mut d = 0i64;
    for i in 0..n {
        let e = ech.at(i, i);
        if e.is_exact_zero() {
            return DetResult::Zero;
        }
        c = c * e.leading().unwrap().clone();
        d += e.order().unwrap();
    }
    if sign < 0 {
        c = -c;
    }
    DetResult::NonZero { c, d }
}

/// Nondegeneracy of a differential operator matrix: nonzero Dieudonné
/// determinant.
pub fn is_nondegenerate(mat: &MatOp) -> bool {
    matches!(dieudonne_det(mat), DetResult::NonZero { .. })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::CtxBuilder;
    use crate::ore::Window;

    fn ctx() -> Ctx {
        CtxBuilder::new(["u", "v"]).build().unwrap()
    }

    fn p(s: &str, c: &Ctx) -> DiffExpr {
        crate::parse::parse_expr(s, c).unwrap()
    }

    #[test]
    fn matrix_compose_adjoint() {
        let c = ctx();
        let d = PseudoDiffOp::d_power(1, &c);
        let one = PseudoDiffOp::identity(&c);
        let m = MatOp::from_rows(
            vec![
                vec![d.clone(), PseudoDiffOp::from_expr(&p("u", &c))],
                vec![PseudoDiffOp::zero(&c), one.clone()],
            ],
            &c,
        );
        let mm = m.compose(&m, None);
        assert_eq!(mm.at(0, 0).coeff(2).unwrap(), p("1", &c));
        assert_eq!(mm.at(0, 1).coeff(0).unwrap(), p("u' + u", &c));
        // (M*)* = M for differential matrices
        assert!(m.adjoint(None).adjoint(None).agrees_with(&m));
    }

    #[test]
    fn matrix_inverse_within_window() {
        let c = ctx();
        let m = MatOp::from_rows(
            vec![
                vec![PseudoDiffOp::identity(&c), PseudoDiffOp::zero(&c)],
                vec![
                    PseudoDiffOp::from_expr(&p("v/u", &c)),
                    PseudoDiffOp::from_expr(&p("1/u", &c))
                        .compose(&PseudoDiffOp::d_power(1, &c), None)
                        .compose(&PseudoDiffOp::from_expr(&p("u", &c)), None),
                ],
            ],
            &c,
        );
        let inv = m.invert(Some(-6)).unwrap();
        let id = m.compose(&inv, Some(-6));
        assert!(id.truncate(-4).agrees_with(&MatOp::identity(2, &c).truncate(-4)));
    }

    #[test]
    fn dieudonne_triangular() {
        let c = ctx();
        // [[∂, u],[0, (1/u)∂u]]: det c = 1, d = 2
        let m = MatOp::from_rows(
            vec![
                vec![PseudoDiffOp::d_power(1, &c), PseudoDiffOp::from_expr(&p("u", &c))],
                vec![
                    PseudoDiffOp::zero(&c),
                    PseudoDiffOp::from_expr(&p("1/u", &c))
                        .compose(&PseudoDiffOp::d_power(1, &c), None)
                        .compose(&PseudoDiffOp::from_expr(&p("u", &c)), None),
                ],
            ],
            &c,
        );
        match dieudonne_det(&m) {
            DetResult::NonZero { c: lead, d } => {
                assert_eq!(d, 2);
                assert_eq!(lead, p("1", &c));
            }
            DetResult::Zero => panic!("expected nonzero"),
        }
    }

    #[test]
    fn dieudonne_rank_deficient() {
        let c = ctx();
        let d = PseudoDiffOp::d_power(1, &c);
        // second row = u ∘ first row
        let r1 = vec![d.clone(), PseudoDiffOp::from_expr(&p("u'", &c))];
        let r2: Vec<PseudoDiffOp> = r1
            .iter()
            .map(|e| PseudoDiffOp::from_expr(&p("u", &c)).compose(e, None))
            .collect();
        let m = MatOp::from_rows(vec![r1, r2], &c);
        assert!(matches!(dieudonne_det(&m), DetResult::Zero));
        assert!(!is_nondegenerate(&m));
    }

    #[test]
    fn window_floor_propagates() {
        let c = ctx();
        let s = PseudoDiffOp::d_power(-1, &c)
            .compose(&PseudoDiffOp::from_expr(&p("u'", &c)), Some(-5));
        assert_eq!(s.window(), Window::Floor(-5));
        let m = MatOp::from_rows(vec![vec![s]], &c);
        let t = m.compose(&MatOp::identity(1, &c), Some(-5));
        assert_eq!(t.at(0, 0).window(), Window::Floor(-5));
    }
}
