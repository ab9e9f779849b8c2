//! Finite-dimensional mock of the ladder engine's linear algebra.
//!
//! Vector spaces U = ℚ^{du} and V = W = ℚ^d, a pairing (v|w) = vᵀMw, and
//! four maps A, C: U→W, B, D: U→V built so that A*∘B + B*∘A = 0 and
//! C*∘D + D*∘C = 0 hold exactly. Ladders built by alternating associations
//! must then pair to zero in every slot, and with surjective B and C the
//! orthogonality hypotheses hold trivially, so every ladder extends. This
//! is the unit-level oracle for the symbolic ladder logic.

use crate::poly::Rat;
use num::{One, Zero};

type QMat = Vec<Vec<Rat>>;
type QVec = Vec<Rat>;

fn zeros(r: usize, c: usize) -> QMat {
    vec![vec![Rat::zero(); c]; r]
}

fn mat_mul(a: &QMat, b: &QMat) -> QMat {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(r, c);
    for i in 0..r {
        for t in 0..k {
            if a[i][t].is_zero() {
                continue;
            }
            for j in 0..c {
                out[i][j] = &out[i][j] + &(&a[i][t] * &b[t][j]);
            }
        }
    }
    out
}

fn mat_vec(a: &QMat, v: &QVec) -> QVec {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(Rat::zero(), |acc, (x, y)| acc + x * y)
        })
        .collect()
}

fn transpose(a: &QMat) -> QMat {
    let (r, c) = (a.len(), a[0].len());
    let mut out = zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            out[j][i] = a[i][j].clone();
        }
    }
    out
}

fn mat_add(a: &QMat, b: &QMat) -> QMat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

fn is_zero_mat(a: &QMat) -> bool {
    a.iter().all(|r| r.iter().all(|x| x.is_zero()))
}

/// Row reduction of [A | rhs...]; returns (rref, pivot columns).
fn rref(mut a: QMat) -> (QMat, Vec<usize>) {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0usize;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = Rat::one() / a[r][c].clone();
        for j in 0..cols {
            a[r][j] = &a[r][j] * &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    a[i][j] = &a[i][j] - &(&f * &a[r][j]);
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    (a, pivots)
}

/// One solution of A x = b, or None when inconsistent.
fn solve(a: &QMat, b: &QVec) -> Option<QVec> {
    let rows = a.len();
    let cols = a[0].len();
    let mut aug = a.clone();
    for (i, row) in aug.iter_mut().enumerate() {
        row.push(b[i].clone());
    }
    let (red, pivots) = rref(aug);
    for row in &red {
        if row[..cols].iter().all(|x| x.is_zero()) && !row[cols].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rat::zero(); cols];
    for (r, &c) in pivots.iter().enumerate() {
        if c < cols {
            x[c] = red[r][cols].clone();
        }
    }
    Some(x)
}

/// Basis of the nullspace of A.
fn kernel(a: &QMat) -> Vec<QVec> {
    let cols = a[0].len();
    let (red, pivots) = rref(a.clone());
    let mut out = Vec::new();
    for free in 0..cols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![Rat::zero(); cols];
        v[free] = Rat::one();
        for (r, &c) in pivots.iter().enumerate() {
            v[c] = -red[r][free].clone();
        }
        out.push(v);
    }
    out
}

fn is_invertible(a: &QMat) -> bool {
    let n = a.len();
    let (_, pivots) = rref(a.clone());
    pivots.len() == n
}

fn rank(a: &QMat) -> usize {
    rref(a.clone()).1.len()
}

/// The mock model: maps from U = ℚ^{du} into V = W = ℚ^d and the pairing
/// matrix M. Adjoints are taken against the standard form on U, so
/// A* = AᵀMᵀ and B* = BᵀM.
pub struct MockModel {
    pub m: QMat,
    pub a: QMat,
    pub b: QMat,
    pub c: QMat,
    pub d: QMat,
}

/// Ladder data: v_{-1}, ..., v_N and w_0, ..., w_N.
pub struct MockLadder {
    pub v: Vec<QVec>,
    pub w: Vec<QVec>,
}

fn random_mat(r: usize, c: usize, rng: &mut impl FnMut() -> Rat) -> QMat {
    (0..r).map(|_| (0..c).map(|_| rng()).collect()).collect()
}

fn random_skew(n: usize, rng: &mut impl FnMut() -> Rat) -> QMat {
    let mut t = zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let x = rng();
            t[i][j] = x.clone();
            t[j][i] = -x;
        }
    }
    t
}

fn inverse(a: &QMat) -> QMat {
    let n = a.len();
    let mut aug = a.clone();
    for (i, row) in aug.iter_mut().enumerate() {
        for j in 0..n {
            row.push(if i == j { Rat::one() } else { Rat::zero() });
        }
    }
    let (red, pivots) = rref(aug);
    assert_eq!(pivots.len(), n, "inverse of singular matrix");
    red.into_iter().map(|row| row[n..].to_vec()).collect()
}

impl MockModel {
    /// Random instance satisfying both skew constraints: A = M⁻¹T_A B and
    /// C = M⁻¹T_C D for random invertible skew T_A, T_C (d must be even)
    /// and random surjective B, D.
    pub fn random(d: usize, du: usize, rng: &mut impl FnMut() -> Rat) -> MockModel {
        assert!(d % 2 == 0, "skew invertibility needs even dimension");
        assert!(du >= d);
        let m = loop {
            let m = random_mat(d, d, rng);
            if is_invertible(&m) {
                break m;
            }
        };
        let minv = inverse(&m);
        let full_rank = |rng: &mut dyn FnMut() -> Rat| loop {
            let b = random_mat(d, du, rng);
            if rank(&b) == d {
                break b;
            }
        };
        let b = full_rank(rng);
        let dmat = full_rank(rng);
        let skew_inv = |rng: &mut dyn FnMut() -> Rat| loop {
            let t = random_skew(d, rng);
            if is_invertible(&t) {
                break t;
            }
        };
        let ta = skew_inv(rng);
        let tc = skew_inv(rng);
        let a = mat_mul(&mat_mul(&minv, &ta), &b);
        let c = mat_mul(&mat_mul(&minv, &tc), &dmat);
        MockModel { m, a, b, c, d: dmat }
    }

    /// Negative control: the A-side built from a symmetric instead of a
    /// skew form, so A*∘B + B*∘A ≠ 0.
    pub fn random_violating(d: usize, du: usize, rng: &mut impl FnMut() -> Rat) -> MockModel {
        let mut model = MockModel::random(d, du, rng);
        let m = model.m.clone();
        let minv = inverse(&m);
        let sym = loop {
            let r = random_mat(d, d, rng);
            let s = mat_add(&r, &transpose(&r));
            if !is_zero_mat(&s) {
                break s;
            }
        };
        model.a = mat_mul(&mat_mul(&minv, &sym), &model.b);
        model
    }

    fn a_star_b_plus_b_star_a(&self, x: &QMat, y: &QMat) -> QMat {
        // X* = XᵀMᵀ for maps into W paired on the left, Y* = YᵀM into V
        let xs = mat_mul(&transpose(x), &transpose(&self.m));
        let ys = mat_mul(&transpose(y), &self.m);
        mat_add(&mat_mul(&xs, y), &mat_mul(&ys, x))
    }

    /// Both defining constraints, checked exactly.
    pub fn constraint_holds(&self) -> bool {
        is_zero_mat(&self.a_star_b_plus_b_star_a(&self.a, &self.b))
            && is_zero_mat(&self.a_star_b_plus_b_star_a(&self.c, &self.d))
    }

    /// Build a ladder of the given length by alternating associations,
    /// shifting each witness by a random kernel element to make the checks
    /// coset-independent. None when some linear system is inconsistent.
    pub fn ladder(
        &self,
        steps: usize,
        rng: &mut impl FnMut() -> Rat,
    ) -> Option<MockLadder> {
        let du = self.b[0].len();
        let mut u0: QVec = (0..du).map(|_| rng()).collect();
        let shift = |x: &mut QVec, ker: &[QVec], rng: &mut dyn FnMut() -> Rat| {
            for k in ker {
                let c = rng();
                for (xi, ki) in x.iter_mut().zip(k) {
                    *xi = &*xi + &(&c * ki);
                }
            }
        };
        shift(&mut u0, &kernel(&self.b), rng);
        let mut v = vec![mat_vec(&self.b, &u0)];
        let mut w = vec![mat_vec(&self.a, &u0)];
        let ker_c = kernel(&self.c);
        let ker_b = kernel(&self.b);
        for _ in 0..steps {
            let mut up = solve(&self.c, w.last().unwrap())?;
            shift(&mut up, &ker_c, rng);
            v.push(mat_vec(&self.d, &up));
            let mut un = solve(&self.b, v.last().unwrap())?;
            shift(&mut un, &ker_b, rng);
            w.push(mat_vec(&self.a, &un));
        }
        Some(MockLadder { v, w })
    }

    pub fn pairing(&self, v: &QVec, w: &QVec) -> Rat {
        mat_vec(&self.m, w)
            .iter()
            .zip(v)
            .fold(Rat::zero(), |acc, (x, y)| acc + x * y)
    }

    /// All cross pairings (v_m | w_n) of a ladder vanish.
    pub fn pairings_vanish(&self, l: &MockLadder) -> bool {
        l.v.iter()
            .all(|v| l.w.iter().all(|w| self.pairing(v, w).is_zero()))
    }

    /// Both orthogonality hypotheses hold when B and C are surjective.
    pub fn orthogonality_trivial(&self) -> bool {
        rank(&self.b) == self.b.len() && rank(&self.c) == self.c.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng_from_seed(seed: u64) -> impl FnMut() -> Rat {
        // splitmix-style generator, small values keep the arithmetic cheap
        let mut state = seed;
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let z = (state >> 33) as i64;
            Rat::from_integer(((z % 9) - 4).into())
        }
    }

    #[test]
    fn ladder_pairings_vanish_over_random_instances() {
        for seed in 0..12u64 {
            let mut rng = rng_from_seed(seed * 7 + 1);
            let model = MockModel::random(4, 6, &mut rng);
            assert!(model.constraint_holds());
            assert!(model.orthogonality_trivial());
            let ladder = model.ladder(5, &mut rng).expect("extension must succeed");
            assert_eq!(ladder.v.len(), 6);
            assert_eq!(ladder.w.len(), 6);
            assert!(model.pairings_vanish(&ladder));
        }
    }

    #[test]
    fn violating_instance_fails_the_pairing_check() {
        let mut failures = 0;
        for seed in 0..6u64 {
            let mut rng = rng_from_seed(seed * 13 + 5);
            let model = MockModel::random_violating(4, 6, &mut rng);
            assert!(!model.constraint_holds());
            if let Some(ladder) = model.ladder(3, &mut rng) {
                if !model.pairings_vanish(&ladder) {
                    failures += 1;
                }
            }
        }
        assert!(failures > 0, "no violating instance was detected");
    }
}
