//! Dense two-phase simplex with dual values and Farkas certificates.
//!
//! Problems are stated as `maximize c·x` subject to rows `a·x {<=, >=, =} b`,
//! with every variable nonnegative unless marked free. The dual returned for
//! an optimal problem follows the same convention: `minimize b·y` subject to
//! `Aᵀy >= c` (equality on free columns), `y >= 0` on `<=` rows, `y <= 0` on
//! `>=` rows and `y` free on equality rows.
//!
//! For an infeasible problem the returned ray `y` obeys the same row sign
//! rules, has `Aᵀy >= 0` (zero on free columns) and `b·y < 0`.

use crate::linalg::SquareMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    n_vars: usize,
    objective: Vec<T>,
    free: Vec<bool>,
    rows: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    /// Optimal dual values, or the Farkas ray when infeasible.
    pub duals: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> LinearProgram<T> {
    pub fn new(n_vars: usize) -> Self {
        Self { n_vars, objective: vec![T::zero(); n_vars], free: vec![false; n_vars], rows: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn rows(&self) -> &[Constraint<T>] {
        &self.rows
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn is_free(&self, j: usize) -> bool {
        self.free[j]
    }

    pub fn set_objective(&mut self, j: usize, c: T) {
        self.objective[j] = c;
    }

    pub fn set_free(&mut self, j: usize) {
        self.free[j] = true;
    }

    /// Adds a row and returns its index.
    pub fn add(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) -> usize {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.n_vars));
        self.rows.push(Constraint { coeffs, relation, rhs });
        self.rows.len() - 1
    }

    pub fn solve(&self) -> LpSolution<T> {
        Tableau::build(self).run(self)
    }

    /// Largest violation of the dual constraints and sign rules by `y`
    /// (used to check certificates independently of the solver).
    pub fn dual_violation(&self, y: &[T], ray: bool) -> T {
        let mut worst = T::zero();
        let mut aty = vec![T::zero(); self.n_vars];
        for (row, yi) in self.rows.iter().zip(y) {
            for &(j, a) in &row.coeffs {
                aty[j] = aty[j] + a * *yi;
            }
            let sign_bad = match row.relation {
                Relation::Le => -*yi,
                Relation::Ge => *yi,
                Relation::Eq => T::zero(),
            };
            worst = worst.max(sign_bad);
        }
        for j in 0..self.n_vars {
            let c = if ray { T::zero() } else { self.objective[j] };
            let slack = aty[j] - c;
            let bad = if self.free[j] { slack.abs() } else { -slack };
            worst = worst.max(bad);
        }
        worst
    }

    /// `b·y`.
    pub fn dual_objective(&self, y: &[T]) -> T {
        self.rows.iter().zip(y).map(|(r, yi)| r.rhs * *yi).sum()
    }

    /// Largest violation of the primal rows and bounds by `x`.
    pub fn primal_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (j, v) in x.iter().enumerate() {
            if !self.free[j] {
                worst = worst.max(-*v);
            }
        }
        for row in &self.rows {
            let lhs: T = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let bad = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(bad);
        }
        worst
    }
}

struct Tableau<T> {
    m: usize,
    ncols: usize,
    width: usize,
    t: Vec<T>,
    d: Vec<T>,
    basis: Vec<usize>,
    /// column of the initial identity basis for each row
    init_col: Vec<usize>,
    /// row sign applied during normalization
    sign: Vec<T>,
    first_art: usize,
    plus: Vec<usize>,
    minus: Vec<Option<usize>>,
    iterations: usize,
    max_iter: usize,
    /// The tableau as built, for recomputing the final basic solution.
    orig: Vec<T>,
}

const DEGENERATE_SWITCH: usize = 64;
/// Relative size of the right-hand side perturbation.
const PERTURBATION: f64 = 1e-11;

fn rhs_scale<T: Real>(lp: &LinearProgram<T>) -> T {
    lp.rows.iter().fold(T::one(), |acc, r| acc.max(r.rhs.abs()))
}

impl<T: Real> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let m = lp.rows.len();
        let b_scale = rhs_scale(lp);
        let mut plus = Vec::with_capacity(lp.n_vars);
        let mut minus = Vec::with_capacity(lp.n_vars);
        let mut col = 0;
        for j in 0..lp.n_vars {
            plus.push(col);
            col += 1;
            if lp.free[j] {
                minus.push(Some(col));
                col += 1;
            } else {
                minus.push(None);
            }
        }
        let n_struct = col;
        let mut sign = Vec::with_capacity(m);
        let mut rel = Vec::with_capacity(m);
        for row in &lp.rows {
            let flip = row.rhs < T::zero() || (row.rhs == T::zero() && row.relation == Relation::Ge);
            let s = if flip { -T::one() } else { T::one() };
            sign.push(s);
            rel.push(match (row.relation, flip) {
                (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
                (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
                (Relation::Eq, _) => Relation::Eq,
            });
        }
        let n_slack = rel.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = rel.iter().filter(|r| **r != Relation::Le).count();
        let first_art = n_struct + n_slack;
        let ncols = first_art + n_art;
        // working right-hand side, then the unperturbed one
        let width = ncols + 2;
        let mut t = vec![T::zero(); m * width];
        let mut basis = vec![0; m];
        let mut init_col = vec![0; m];
        let mut next_slack = n_struct;
        let mut next_art = first_art;
        for (i, row) in lp.rows.iter().enumerate() {
            let s = sign[i];
            for &(j, a) in &row.coeffs {
                t[i * width + plus[j]] = t[i * width + plus[j]] + s * a;
                if let Some(mc) = minus[j] {
                    t[i * width + mc] = t[i * width + mc] - s * a;
                }
            }
            // a tiny positive shift of every right-hand side breaks the ties
            // that make degenerate vertices cycle; it is removed at the end
            let shift = T::lit(PERTURBATION * (0.5 + 0.5 * (i as f64 * 0.618_033_988_75).fract()));
            t[i * width + ncols] = s * row.rhs + shift * b_scale;
            t[i * width + ncols + 1] = s * row.rhs;
            match rel[i] {
                Relation::Le => {
                    t[i * width + next_slack] = T::one();
                    basis[i] = next_slack;
                    init_col[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    t[i * width + next_slack] = -T::one();
                    next_slack += 1;
                    t[i * width + next_art] = T::one();
                    basis[i] = next_art;
                    init_col[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    t[i * width + next_art] = T::one();
                    basis[i] = next_art;
                    init_col[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let max_iter = 50 * (m + ncols) + 1000;
        Self {
            m,
            ncols,
            width,
            t: t.clone(),
            d: vec![T::zero(); width],
            basis,
            init_col,
            sign,
            first_art,
            plus,
            minus,
            iterations: 0,
            max_iter,
            orig: t,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.t[i * self.width + j]
    }

    fn price(&mut self, cost: &[T]) {
        let w = self.width;
        let mut d = vec![T::zero(); w];
        d[..self.ncols].copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.t[i * w..(i + 1) * w];
            for (dj, a) in d.iter_mut().zip(row) {
                *dj = *dj - cb * *a;
            }
        }
        self.d = d;
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let w = self.width;
        let p = self.at(r, s);
        for j in 0..w {
            self.t[r * w + j] = self.t[r * w + j] / p;
        }
        self.t[r * w + s] = T::one();
        let pivot_row: Vec<T> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + s];
            if f == T::zero() {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for (a, pr) in row.iter_mut().zip(&pivot_row) {
                *a = *a - f * *pr;
            }
            row[s] = T::zero();
        }
        let f = self.d[s];
        if f != T::zero() {
            for (dj, pr) in self.d.iter_mut().zip(&pivot_row) {
                *dj = *dj - f * *pr;
            }
            self.d[s] = T::zero();
        }
        self.basis[r] = s;
        self.iterations += 1;
    }

    /// Runs primal simplex on the current cost row; `allowed` is the column
    /// limit. Stops early once the objective reaches `floor`, the known lower
    /// bound of the phase-one sum of artificials.
    fn optimize(&mut self, allowed: usize, floor: Option<T>) -> LpStatus {
        let eps_cost = T::lit(1e-11);
        let eps_piv = T::lit(1e-12);
        let mut bland = false;
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.max_iter {
                return LpStatus::IterationLimit;
            }
            if floor.is_some_and(|f| -self.d[self.ncols] <= f) {
                return LpStatus::Optimal;
            }
            let mut enter = None;
            let mut best = -eps_cost;
            for j in 0..allowed {
                if self.d[j] < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = self.d[j];
                }
            }
            let Some(s) = enter else { return LpStatus::Optimal };
            let mut leave: Option<usize> = None;
            let mut best_ratio = T::infinity();
            for i in 0..self.m {
                let a = self.at(i, s);
                if a <= eps_piv {
                    continue;
                }
                let ratio = self.at(i, self.ncols).max(T::zero()) / a;
                let tie_tol = T::lit(1e-12) * (T::one() + best_ratio.abs().min(T::lit(1e12)));
                match leave {
                    None => {
                        leave = Some(i);
                        best_ratio = ratio;
                    }
                    Some(l) => {
                        if ratio < best_ratio - tie_tol {
                            leave = Some(i);
                            best_ratio = ratio;
                        } else if (ratio - best_ratio).abs() <= tie_tol {
                            let better = if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                a > self.at(l, s)
                            };
                            if better {
                                leave = Some(i);
                                best_ratio = best_ratio.min(ratio);
                            }
                        }
                    }
                }
            }
            let Some(r) = leave else { return LpStatus::Unbounded };
            if best_ratio <= T::lit(1e-14) {
                degenerate += 1;
                if degenerate > DEGENERATE_SWITCH {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, s);
        }
    }

    /// Dual simplex on the unperturbed right-hand side, starting from the
    /// optimal (hence dual feasible) basis of the perturbed problem.
    fn restore(&mut self, b_scale: T) -> LpStatus {
        let orig = self.ncols + 1;
        let tol = T::lit(1e-12) * b_scale;
        let eps_piv = T::lit(1e-12);
        loop {
            if self.iterations >= self.max_iter {
                return LpStatus::IterationLimit;
            }
            let mut leave = None;
            let mut worst = -tol;
            for i in 0..self.m {
                let v = self.at(i, orig);
                if v < worst {
                    worst = v;
                    leave = Some(i);
                }
            }
            let Some(r) = leave else { return LpStatus::Optimal };
            let mut enter = None;
            let mut best = T::infinity();
            for j in 0..self.first_art {
                let a = self.at(r, j);
                if a < -eps_piv {
                    let ratio = self.d[j].max(T::zero()) / -a;
                    if ratio < best {
                        best = ratio;
                        enter = Some(j);
                    }
                }
            }
            match enter {
                Some(s) => self.pivot(r, s),
                // only rounding keeps this row negative
                None if worst > -T::lit(1e-9) * b_scale => return LpStatus::Optimal,
                None => return LpStatus::Infeasible,
            }
        }
    }

    /// Basic values `B⁻¹b` and row prices `B⁻ᵀc_B` recomputed from the
    /// original columns, with one step of iterative refinement each.
    fn refine(&self, cost: &[T]) -> Option<(Vec<T>, Vec<T>)> {
        let m = self.m;
        let w = self.width;
        let mut b = SquareMatrix::zeros(m);
        let mut bt = SquareMatrix::zeros(m);
        for i in 0..m {
            for (k, &col) in self.basis.iter().enumerate() {
                let a = self.orig[i * w + col];
                b.set(i, k, a);
                bt.set(k, i, a);
            }
        }
        let rhs: Vec<T> = (0..m).map(|i| self.orig[i * w + self.ncols + 1]).collect();
        let cb: Vec<T> = self.basis.iter().map(|&c| cost[c]).collect();
        let solve = |mat: &SquareMatrix<T>, rhs: &[T]| -> Option<Vec<T>> {
            let lu = mat.lu()?;
            let mut x = lu.solve(rhs);
            let r: Vec<T> = mat.mul_vec(&x).iter().zip(rhs).map(|(ax, b)| *b - *ax).collect();
            for (xi, di) in x.iter_mut().zip(lu.solve(&r)) {
                *xi = *xi + di;
            }
            x.iter().all(|v| v.is_finite()).then_some(x)
        };
        Some((solve(&b, &rhs)?, solve(&bt, &cb)?))
    }

    fn row_duals(&self, cost: &[T]) -> Vec<T> {
        (0..self.m)
            .map(|i| {
                let c = self.init_col[i];
                cost[c] - self.d[c]
            })
            .collect()
    }

    fn run(mut self, lp: &LinearProgram<T>) -> LpSolution<T> {
        let n = lp.n_vars;
        let b_scale = rhs_scale(lp);
        if self.first_art < self.ncols {
            let mut c1 = vec![T::zero(); self.ncols];
            for c in c1.iter_mut().skip(self.first_art) {
                *c = T::one();
            }
            self.price(&c1);
            let st = self.optimize(self.ncols, Some(T::lit(1e-13) * b_scale));
            if st == LpStatus::IterationLimit {
                return self.failed(n, st);
            }
            let infeas = -self.d[self.ncols];
            if infeas > (T::lit(1e-9) + T::lit(PERTURBATION) * T::of_usize(self.m)) * b_scale {
                let y1 = self.row_duals(&c1);
                let duals = y1.iter().zip(&self.sign).map(|(y, s)| -*y * *s).collect();
                return LpSolution {
                    status: LpStatus::Infeasible,
                    x: vec![T::zero(); n],
                    objective: T::nan(),
                    duals,
                    iterations: self.iterations,
                };
            }
            // drive remaining artificials out of the basis
            for r in 0..self.m {
                if self.basis[r] < self.first_art {
                    continue;
                }
                let mut best = T::lit(1e-9);
                let mut col = None;
                for j in 0..self.first_art {
                    let a = self.at(r, j).abs();
                    if a > best {
                        best = a;
                        col = Some(j);
                    }
                }
                if let Some(j) = col {
                    self.pivot(r, j);
                }
            }
        }
        let mut c2 = vec![T::zero(); self.ncols];
        for j in 0..n {
            c2[self.plus[j]] = -lp.objective[j];
            if let Some(mc) = self.minus[j] {
                c2[mc] = lp.objective[j];
            }
        }
        self.price(&c2);
        let st = self.optimize(self.first_art, None);
        if st != LpStatus::Optimal {
            return self.failed(n, st);
        }
        let st = self.restore(b_scale);
        if st != LpStatus::Optimal {
            return self.failed(n, st);
        }
        let (basic, y) = self.refine(&c2).unwrap_or_else(|| {
            let basic = (0..self.m).map(|i| self.at(i, self.ncols + 1)).collect();
            let y = (0..self.m).map(|i| -self.d[self.init_col[i]]).collect();
            (basic, y)
        });
        let mut col_val = vec![T::zero(); self.ncols];
        for i in 0..self.m {
            col_val[self.basis[i]] = basic[i].max(T::zero());
        }
        let x: Vec<T> = (0..n)
            .map(|j| {
                let mut v = col_val[self.plus[j]];
                if let Some(mc) = self.minus[j] {
                    v = v - col_val[mc];
                }
                v
            })
            .collect();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| *c * *v).sum();
        let duals = (0..self.m).map(|i| -y[i] * self.sign[i]).collect();
        LpSolution { status: LpStatus::Optimal, x, objective, duals, iterations: self.iterations }
    }

    fn failed(&self, n: usize, status: LpStatus) -> LpSolution<T> {
        LpSolution {
            status,
            x: vec![T::zero(); n],
            objective: T::nan(),
            duals: vec![T::zero(); self.m],
            iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum_and_duals() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
        let mut lp = LinearProgram::<f64>::new(2);
        lp.set_objective(0, 3.0);
        lp.set_objective(1, 5.0);
        lp.add(vec![(0, 1.0)], Relation::Le, 4.0);
        lp.add(vec![(1, 2.0)], Relation::Le, 12.0);
        lp.add(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        assert!((lp.dual_objective(&s.duals) - 36.0).abs() < 1e-12);
        assert!(lp.dual_violation(&s.duals, false) < 1e-12);
        assert!((s.duals[1] - 1.5).abs() < 1e-12 && (s.duals[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ge_eq_and_free_columns() {
        // max -x - y with x + y >= 2, x - y = 1, y free  -> x = 1.5, y = 0.5
        let mut lp = LinearProgram::<f64>::new(2);
        lp.set_objective(0, -1.0);
        lp.set_objective(1, -1.0);
        lp.set_free(1);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 2.0);
        lp.add(vec![(0, 1.0), (1, -1.0)], Relation::Eq, 1.0);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 2.0).abs() < 1e-12);
        assert!(lp.primal_violation(&s.x) < 1e-12);
        assert!(lp.dual_violation(&s.duals, false) < 1e-12);
        assert!((lp.dual_objective(&s.duals) - s.objective).abs() < 1e-12);
    }

    #[test]
    fn infeasible_returns_farkas_ray() {
        // x + y <= 1, x + y >= 3
        let mut lp = LinearProgram::<f64>::new(2);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.0);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 3.0);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(lp.dual_violation(&s.duals, true) < 1e-12);
        assert!(lp.dual_objective(&s.duals) < -1e-9);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::<f64>::new(2);
        lp.set_objective(0, 1.0);
        lp.add(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        assert_eq!(lp.solve().status, LpStatus::Unbounded);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic Beale cycling example
        let mut lp = LinearProgram::<f64>::new(4);
        for (j, c) in [0.75, -150.0, 0.02, -6.0].into_iter().enumerate() {
            lp.set_objective(j, c);
        }
        lp.add(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
        lp.add(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
        lp.add(vec![(2, 1.0)], Relation::Le, 1.0);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.05).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let mut lp = LinearProgram::<f32>::new(1);
        lp.set_objective(0, 1.0);
        lp.add(vec![(0, 2.0)], Relation::Le, 3.0);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.5).abs() < 1e-6);
    }
}
