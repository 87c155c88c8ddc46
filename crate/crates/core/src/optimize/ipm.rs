//! Primal-dual interior point method for the tree-structured program
//!
//! ```text
//! min  -Σ_leaves P U(V¹_leaf) + Σ_n P_n ρ·u_n
//! s.t. V_n - V_parent - A_n u_n = x·[n is root]
//!      u_n ⪰ 0,  V_n ⪰ 0 where bounded
//! ```
//!
//! `u_n` holds the buys at node `n` (one entry per ordered pair), `A_n` maps
//! them to holdings changes, `V_n` is the post-trade position. Leaf trades
//! perform the terminal liquidation, so the payoff is `V¹_leaf`. Newton
//! systems are solved by eliminating the tree from the leaves upward.

use crate::linalg::{Lu, SquareMatrix};
use crate::market::BidAskMatrix;
use crate::scalar::Real;
use crate::scenario::{MarketScenario, Mode};

pub(crate) struct Problem<'a, T> {
    pub s: &'a MarketScenario<T>,
    pub pairs: Vec<(usize, usize)>,
    /// `bounded[n][i]`: whether `V_n^i ≥ 0` is imposed.
    pub bounded: Vec<Vec<bool>>,
    /// Volume weight per node and pair (already multiplied by `P_n`).
    pub rho: Vec<Vec<T>>,
    pub prob: Vec<T>,
    pub scale: T,
}

#[derive(Clone)]
pub(crate) struct Iterate<T> {
    pub u: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub y: Vec<Vec<T>>,
    pub zu: Vec<Vec<T>>,
    pub zv: Vec<Vec<T>>,
}

struct Residuals<T> {
    ru: Vec<Vec<T>>,
    rv: Vec<Vec<T>>,
    re: Vec<Vec<T>>,
}

/// Per-node KKT block in `(Δu, ΔV, Δy)`, factored, together with the
/// response of the solution to a unit change in the parent's `ΔV`.
struct NodeFactor<T> {
    lu: Lu<T>,
    sensitivity: Vec<Vec<T>>,
    n: SquareMatrix<T>,
}

/// Right-hand sides of the complementarity rows: `w z` should move to `t`.
struct Targets<T> {
    tu: Vec<Vec<T>>,
    tv: Vec<Vec<T>>,
}

pub(crate) struct Direction<T> {
    pub u: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub y: Vec<Vec<T>>,
    pub zu: Vec<Vec<T>>,
    pub zv: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Measures<T> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
    pub objective: T,
}

pub(crate) enum Outcome<T> {
    Converged { it: Iterate<T>, iterations: usize, measures: Measures<T> },
    Unbounded,
    Stalled { it: Iterate<T>, iterations: usize, measures: Measures<T> },
}

/// Price of one unit of asset `i` in units of asset 1 at the bid.
fn unit_value<T: Real>(m: &BidAskMatrix<T>, i: usize) -> T {
    m.get(i, 0).recip()
}

impl<'a, T: Real> Problem<'a, T> {
    pub fn new(s: &'a MarketScenario<T>, scale: T) -> Self {
        let d = s.dim();
        let tree = &s.tree;
        let pairs = crate::market::trade_pairs(d);
        let bounded = (0..tree.len())
            .map(|k| vec![s.mode == Mode::NoShort || tree.is_leaf(k); d])
            .collect();
        let prob: Vec<T> = (0..tree.len()).map(|k| tree.prob(k)).collect();
        let rho0 = T::lit(1e-10) * s.utility.d1(scale);
        let rho = (0..tree.len())
            .map(|k| pairs.iter().map(|&(_, j)| rho0 * prob[k] * unit_value(s.matrix(k), j)).collect())
            .collect();
        Self { s, pairs, bounded, rho, prob, scale }
    }

    fn d(&self) -> usize {
        self.s.dim()
    }

    fn len(&self) -> usize {
        self.s.tree.len()
    }

    /// `A_n u`.
    fn apply_a(&self, k: usize, u: &[T]) -> Vec<T> {
        let m = self.s.matrix(k);
        let mut out = vec![T::zero(); self.d()];
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            out[j] = out[j] + u[p];
            out[i] = out[i] - m.get(i, j) * u[p];
        }
        out
    }

    /// `A_nᵀ y`.
    fn apply_at(&self, k: usize, y: &[T]) -> Vec<T> {
        let m = self.s.matrix(k);
        self.pairs.iter().map(|&(i, j)| y[j] - m.get(i, j) * y[i]).collect()
    }

    pub fn initial(&self) -> Iterate<T> {
        let d = self.d();
        let s = self.scale;
        let mu0 = s * self.s.utility.d1(s);
        let mut it = Iterate { u: vec![], v: vec![], y: vec![], zu: vec![], zv: vec![] };
        for k in 0..self.len() {
            let m = self.s.matrix(k);
            let p = self.prob[k];
            let u: Vec<T> = self
                .pairs
                .iter()
                .map(|&(_, j)| T::lit(0.1) * s / (unit_value(m, j) * T::of_usize(d)))
                .collect();
            let v: Vec<T> = (0..d).map(|i| s / (unit_value(m, i) * T::of_usize(d))).collect();
            let y: Vec<T> = (0..d).map(|i| p * self.s.utility.d1(s) * unit_value(m, i)).collect();
            let zu = u.iter().map(|w| mu0 * p / *w).collect();
            let zv = (0..d)
                .map(|i| if self.bounded[k][i] { mu0 * p / v[i] } else { T::zero() })
                .collect();
            it.u.push(u);
            it.v.push(v);
            it.y.push(y);
            it.zu.push(zu);
            it.zv.push(zv);
        }
        it
    }

    fn residuals(&self, it: &Iterate<T>) -> Residuals<T> {
        let tree = &self.s.tree;
        let d = self.d();
        let n = self.len();
        let mut ru = Vec::with_capacity(n);
        let mut rv = Vec::with_capacity(n);
        let mut re = Vec::with_capacity(n);
        for k in 0..n {
            let aty = self.apply_at(k, &it.y[k]);
            ru.push((0..self.pairs.len()).map(|p| self.rho[k][p] - aty[p] - it.zu[k][p]).collect::<Vec<_>>());
            let mut r: Vec<T> = (0..d).map(|i| it.y[k][i] - it.zv[k][i]).collect();
            for &c in tree.children(k) {
                for i in 0..d {
                    r[i] = r[i] - it.y[c][i];
                }
            }
            if tree.is_leaf(k) {
                r[0] = r[0] - self.prob[k] * self.s.utility.d1(it.v[k][0]);
            }
            rv.push(r);
            let au = self.apply_a(k, &it.u[k]);
            let e: Vec<T> = (0..d)
                .map(|i| {
                    let prev = match tree.parent(k) {
                        Some(p) => it.v[p][i],
                        None => self.s.endowment[i],
                    };
                    it.v[k][i] - prev - au[i]
                })
                .collect();
            re.push(e);
        }
        Residuals { ru, rv, re }
    }

    pub fn objective(&self, it: &Iterate<T>) -> T {
        self.s
            .tree
            .leaves()
            .map(|k| self.prob[k] * self.s.utility.value(it.v[k][0]))
            .sum()
    }

    fn complementarity(&self, it: &Iterate<T>) -> (T, T) {
        let mut total = T::zero();
        let mut weight = T::zero();
        for k in 0..self.len() {
            for p in 0..self.pairs.len() {
                total = total + it.u[k][p] * it.zu[k][p];
                weight = weight + self.prob[k];
            }
            for i in 0..self.d() {
                if self.bounded[k][i] {
                    total = total + it.v[k][i] * it.zv[k][i];
                    weight = weight + self.prob[k];
                }
            }
        }
        (total, weight)
    }

    fn measures(&self, it: &Iterate<T>, r: &Residuals<T>) -> Measures<T> {
        let inf = |rows: &[Vec<T>], by_prob: bool| {
            rows.iter().enumerate().fold(T::zero(), |acc, (k, row)| {
                let w = if by_prob { self.prob[k] } else { T::one() };
                row.iter().fold(acc, |a, x| a.max(x.abs() / w))
            })
        };
        let xscale = self.s.endowment.iter().fold(self.scale, |a, x| a.max(x.abs()));
        let yscale = it
            .y
            .iter()
            .enumerate()
            .fold(T::zero(), |a, (k, row)| row.iter().fold(a, |b, x| b.max(x.abs() / self.prob[k])));
        let primal = inf(&r.re, false) / (T::one() + xscale);
        let dual = inf(&r.ru, true).max(inf(&r.rv, true)) / (T::one() + yscale);
        let (gap, _) = self.complementarity(it);
        Measures { primal, dual, gap, objective: self.objective(it) }
    }

    fn factor(&self, it: &Iterate<T>) -> Option<Vec<NodeFactor<T>>> {
        let tree = &self.s.tree;
        let d = self.d();
        let n = self.len();
        let np = self.pairs.len();
        let size = np + 2 * d;
        let (ov, oy) = (np, np + d);
        let mut fac: Vec<Option<NodeFactor<T>>> = (0..n).map(|_| None).collect();
        for k in (0..n).rev() {
            let m = self.s.matrix(k);
            let mut kkt = SquareMatrix::zeros(size);
            for (p, &(i, j)) in self.pairs.iter().enumerate() {
                kkt.set(p, p, it.zu[k][p] / it.u[k][p]);
                kkt.set(p, oy + j, -T::one());
                kkt.set(p, oy + i, m.get(i, j));
                kkt.set(oy + j, p, -T::one());
                kkt.set(oy + i, p, m.get(i, j));
            }
            for i in 0..d {
                if self.bounded[k][i] {
                    kkt.add_to(ov + i, ov + i, it.zv[k][i] / it.v[k][i]);
                }
                kkt.set(ov + i, oy + i, T::one());
                kkt.set(oy + i, ov + i, T::one());
            }
            if tree.is_leaf(k) {
                kkt.add_to(ov, ov, self.prob[k] * self.s.utility.neg_d2(it.v[k][0]));
            }
            for &c in tree.children(k) {
                let nc = &fac[c].as_ref().expect("children factored first").n;
                for a in 0..d {
                    for b in 0..d {
                        kkt.add_to(ov + a, ov + b, nc.get(a, b));
                    }
                }
            }
            let lu = kkt.lu()?;
            let mut sensitivity = Vec::with_capacity(d);
            let mut nmat = SquareMatrix::zeros(d);
            for c in 0..d {
                let mut rhs = vec![T::zero(); size];
                rhs[oy + c] = T::one();
                let sol = lu.solve(&rhs);
                for a in 0..d {
                    nmat.set(a, c, -sol[oy + a]);
                }
                sensitivity.push(sol);
            }
            fac[k] = Some(NodeFactor { lu, sensitivity, n: nmat });
        }
        Some(fac.into_iter().map(|f| f.expect("all factored")).collect())
    }

    fn solve_newton(&self, it: &Iterate<T>, fac: &[NodeFactor<T>], r: &Residuals<T>, t: &Targets<T>) -> Direction<T> {
        let tree = &self.s.tree;
        let d = self.d();
        let n = self.len();
        let np = self.pairs.len();
        let (ov, oy) = (np, np + d);
        // solution of each node's block with the parent's ΔV set to zero
        let mut base: Vec<Vec<T>> = vec![Vec::new(); n];
        for k in (0..n).rev() {
            let mut rhs = vec![T::zero(); np + 2 * d];
            for p in 0..np {
                rhs[p] = -r.ru[k][p] + t.tu[k][p] / it.u[k][p];
            }
            for i in 0..d {
                let mut v = -r.rv[k][i];
                if self.bounded[k][i] {
                    v = v + t.tv[k][i] / it.v[k][i];
                }
                for &c in tree.children(k) {
                    v = v + base[c][oy + i];
                }
                rhs[ov + i] = v;
                rhs[oy + i] = -r.re[k][i];
            }
            base[k] = fac[k].lu.solve(&rhs);
        }
        let mut dir = Direction {
            u: vec![Vec::new(); n],
            v: vec![Vec::new(); n],
            y: vec![Vec::new(); n],
            zu: vec![Vec::new(); n],
            zv: vec![Vec::new(); n],
        };
        for k in 0..n {
            let mut sol = base[k].clone();
            if let Some(p) = tree.parent(k) {
                for c in 0..d {
                    let dvp = dir.v[p][c];
                    for (x, s) in sol.iter_mut().zip(&fac[k].sensitivity[c]) {
                        *x = *x + dvp * *s;
                    }
                }
            }
            let du: Vec<T> = sol[..np].to_vec();
            let dv: Vec<T> = sol[ov..oy].to_vec();
            let dy: Vec<T> = sol[oy..].to_vec();
            let dzu = (0..np).map(|p| (t.tu[k][p] - it.zu[k][p] * du[p]) / it.u[k][p]).collect();
            let dzv = (0..d)
                .map(|i| {
                    if self.bounded[k][i] {
                        (t.tv[k][i] - it.zv[k][i] * dv[i]) / it.v[k][i]
                    } else {
                        T::zero()
                    }
                })
                .collect();
            dir.u[k] = du;
            dir.v[k] = dv;
            dir.y[k] = dy;
            dir.zu[k] = dzu;
            dir.zv[k] = dzv;
        }
        dir
    }

    /// Largest step in (0, 1] keeping bounded variables and their duals positive.
    fn max_step(&self, it: &Iterate<T>, dir: &Direction<T>) -> T {
        let mut alpha = T::one();
        let mut limit = |w: T, dw: T| {
            if dw < T::zero() {
                alpha = alpha.min(-w / dw);
            }
        };
        for k in 0..self.len() {
            for p in 0..self.pairs.len() {
                limit(it.u[k][p], dir.u[k][p]);
                limit(it.zu[k][p], dir.zu[k][p]);
            }
            for i in 0..self.d() {
                if self.bounded[k][i] {
                    limit(it.v[k][i], dir.v[k][i]);
                    limit(it.zv[k][i], dir.zv[k][i]);
                }
            }
        }
        alpha
    }

    fn step(&self, it: &Iterate<T>, dir: &Direction<T>, alpha: T) -> Iterate<T> {
        let mv = |a: &[Vec<T>], b: &[Vec<T>]| -> Vec<Vec<T>> {
            a.iter().zip(b).map(|(x, dx)| x.iter().zip(dx).map(|(w, dw)| *w + alpha * *dw).collect()).collect()
        };
        Iterate {
            u: mv(&it.u, &dir.u),
            v: mv(&it.v, &dir.v),
            y: mv(&it.y, &dir.y),
            zu: mv(&it.zu, &dir.zu),
            zv: mv(&it.zv, &dir.zv),
        }
    }

    fn targets(&self, it: &Iterate<T>, sigma_mu: T, affine: Option<&Direction<T>>) -> Targets<T> {
        let n = self.len();
        let mut tu = Vec::with_capacity(n);
        let mut tv = Vec::with_capacity(n);
        for k in 0..n {
            let p = self.prob[k];
            tu.push(
                (0..self.pairs.len())
                    .map(|q| {
                        let corr = affine.map_or(T::zero(), |a| a.u[k][q] * a.zu[k][q]);
                        sigma_mu * p - it.u[k][q] * it.zu[k][q] - corr
                    })
                    .collect(),
            );
            tv.push(
                (0..self.d())
                    .map(|i| {
                        if !self.bounded[k][i] {
                            return T::zero();
                        }
                        let corr = affine.map_or(T::zero(), |a| a.v[k][i] * a.zv[k][i]);
                        sigma_mu * p - it.v[k][i] * it.zv[k][i] - corr
                    })
                    .collect(),
            );
        }
        Targets { tu, tv }
    }

    fn too_large(&self, it: &Iterate<T>) -> bool {
        let cap = T::lit(1e12) * (T::one() + self.scale);
        let big = |rows: &[Vec<T>], k: usize| rows[k].iter().any(|x| !x.is_finite() || x.abs() * unit_value_floor(self.s.matrix(k)) > cap);
        (0..self.len()).any(|k| big(&it.u, k) || big(&it.v, k))
    }

    /// Mehrotra predictor-corrector iterations from `start`.
    pub fn run(&self, start: Iterate<T>, max_iter: usize, tol: T) -> Outcome<T> {
        let mut it = start;
        let mut measures = self.measures(&it, &self.residuals(&it));
        for iteration in 0..max_iter {
            let r = self.residuals(&it);
            measures = self.measures(&it, &r);
            if measures.primal <= tol && measures.dual <= tol && measures.gap <= tol * (T::one() + measures.objective.abs()) {
                return Outcome::Converged { it, iterations: iteration, measures };
            }
            if self.too_large(&it) {
                return Outcome::Unbounded;
            }
            let Some(fac) = self.factor(&it) else {
                return Outcome::Stalled { it, iterations: iteration, measures };
            };
            let (total, weight) = self.complementarity(&it);
            let mu = total / weight;
            let aff = self.solve_newton(&it, &fac, &r, &self.targets(&it, T::zero(), None));
            let alpha_aff = self.max_step(&it, &aff);
            let trial = self.step(&it, &aff, alpha_aff);
            let (total_aff, _) = self.complementarity(&trial);
            let sigma = (total_aff / weight / mu).powi(3).min(T::one());
            let dir = self.solve_newton(&it, &fac, &r, &self.targets(&it, sigma * mu, Some(&aff)));
            let alpha_max = self.max_step(&it, &dir);
            let alpha = (T::lit(0.995) * alpha_max).min(T::one());
            if !(alpha > T::lit(1e-14)) {
                return Outcome::Stalled { it, iterations: iteration, measures };
            }
            if std::env::var_os("SHADOWPRICE_TRACE").is_some() {
                eprintln!(
                    "{iteration:3} pr {:.2e} du {:.2e} gap {:.2e} obj {:.10} sigma {:.2e} a_aff {:.2e} a {:.2e}",
                    measures.primal.as_f64(),
                    measures.dual.as_f64(),
                    measures.gap.as_f64(),
                    measures.objective.as_f64(),
                    sigma.as_f64(),
                    alpha_aff.as_f64(),
                    alpha.as_f64()
                );
            }
            it = self.step(&it, &dir, alpha);
        }
        Outcome::Stalled { it, iterations: max_iter, measures }
    }
}

fn unit_value_floor<T: Real>(m: &BidAskMatrix<T>) -> T {
    (0..m.dim()).fold(T::infinity(), |a, i| a.min(unit_value(m, i)))
}
