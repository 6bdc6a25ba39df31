//! Revised primal simplex for `max c'x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible, so no phase one is needed. The basis inverse
//! is held densely and updated by elementary row operations; it is rebuilt
//! from scratch periodically and before the optimality certificate is
//! produced. Pricing is Dantzig's largest reduced cost with lowest-index
//! ties; after a run of degenerate pivots the solver switches to Bland's rule
//! until the objective moves again.

use crate::error::{Error, Result};

/// Sparse column: `(row, coefficient)` pairs.
pub type Column = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_switch: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            optimality_tol: 1e-9,
            pivot_tol: 1e-10,
            feasibility_tol: 1e-8,
            max_iterations: 0,
            degenerate_switch: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    /// Row duals, one per constraint.
    pub y: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

struct State<'a> {
    cost: &'a [f64],
    columns: &'a [Column],
    rhs: &'a [f64],
    m: usize,
    n: usize,
    /// Basic variable per row; indices `>= n` are slacks.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major dense basis inverse.
    binv: Vec<f64>,
    xb: Vec<f64>,
    y: Vec<f64>,
}

impl<'a> State<'a> {
    fn var_cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.cost[j]
        } else {
            0.0
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        if j < self.n {
            let ya: f64 = self.columns[j].iter().map(|&(i, a)| self.y[i] * a).sum();
            self.cost[j] - ya
        } else {
            -self.y[j - self.n]
        }
    }

    /// `B^{-1} a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        if j < self.n {
            for &(r, a) in &self.columns[j] {
                for i in 0..m {
                    out[i] += self.binv[i * m + r] * a;
                }
            }
        } else {
            let r = j - self.n;
            for i in 0..m {
                out[i] = self.binv[i * m + r];
            }
        }
        out
    }

    fn recompute_duals(&mut self) {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bv) in self.basis.iter().enumerate() {
            let c = self.var_cost(bv);
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &b) in y.iter_mut().zip(row) {
                    *yk += c * b;
                }
            }
        }
        self.y = y;
    }

    fn recompute_primal(&mut self) {
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(self.rhs).map(|(a, b)| a * b).sum();
        }
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (k, &bv) in self.basis.iter().enumerate() {
            if bv < self.n {
                for &(r, a) in &self.columns[bv] {
                    bmat[r * m + k] = a;
                }
            } else {
                bmat[(bv - self.n) * m + k] = 1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = bmat[col * m + col].abs();
            for r in col + 1..m {
                let v = bmat[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-13 {
                return Err(Error::Numerical("singular basis during refactorization".into()));
            }
            if piv != col {
                for k in 0..m {
                    bmat.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = bmat[col * m + col];
            for k in 0..m {
                bmat[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = bmat[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        bmat[r * m + k] -= f * bmat[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_primal();
        for x in self.xb.iter_mut() {
            if *x < 0.0 && *x > -1e-11 {
                *x = 0.0;
            }
        }
        self.recompute_duals();
        Ok(())
    }

    fn pivot(&mut self, row: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[row];
        let theta = self.xb[row] / ar;
        for i in 0..m {
            if i != row && alpha[i] != 0.0 {
                self.xb[i] -= theta * alpha[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-12 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[row] = theta;

        // dual update uses the old pivot row
        let dq = self.reduced_cost(entering);
        let pivot_row: Vec<f64> = self.binv[row * m..(row + 1) * m].iter().map(|v| v / ar).collect();
        for (yk, &p) in self.y.iter_mut().zip(&pivot_row) {
            *yk += dq * p;
        }
        for i in 0..m {
            if i == row || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            let dst = &mut self.binv[i * m..(i + 1) * m];
            for (d, &p) in dst.iter_mut().zip(&pivot_row) {
                *d -= f * p;
            }
        }
        self.binv[row * m..(row + 1) * m].copy_from_slice(&pivot_row);

        let leaving = self.basis[row];
        self.is_basic[leaving] = false;
        self.is_basic[entering] = true;
        self.basis[row] = entering;
    }
}

/// Solves `max c'x s.t. A x <= b, x >= 0` where `A` is given by sparse
/// columns and every `b_i >= 0`.
pub fn solve(
    cost: &[f64],
    columns: &[Column],
    rhs: &[f64],
    opts: &SimplexOptions,
) -> Result<SimplexSolution> {
    let n = cost.len();
    let m = rhs.len();
    assert_eq!(columns.len(), n, "one column per variable");
    if let Some(i) = rhs.iter().position(|&b| !(b >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "right-hand side {i} is {} but must be nonnegative",
            rhs[i]
        )));
    }
    if let Some(j) = columns.iter().position(|c| c.iter().any(|&(r, _)| r >= m)) {
        return Err(Error::InvalidParameter(format!("column {j} references a missing row")));
    }

    let max_iter = if opts.max_iterations == 0 {
        50 * (n + m) + 1000
    } else {
        opts.max_iterations
    };
    let refactor_every = (2 * m).max(200);
    let cscale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let opt_tol = opts.optimality_tol * cscale;

    let mut st = State {
        cost,
        columns,
        rhs,
        m,
        n,
        basis: (n..n + m).collect(),
        is_basic: (0..n + m).map(|j| j >= n).collect(),
        binv: {
            let mut v = vec![0.0; m * m];
            for i in 0..m {
                v[i * m + i] = 1.0;
            }
            v
        },
        xb: rhs.to_vec(),
        y: vec![0.0; m],
    };

    let mut iterations = 0;
    let mut since_refactor = 0;
    let mut degenerate_run = 0;
    let mut bland = false;

    loop {
        // pricing
        let mut entering = None;
        let mut best = opt_tol;
        for j in 0..n + m {
            if st.is_basic[j] {
                continue;
            }
            let d = st.reduced_cost(j);
            if d > best {
                entering = Some(j);
                if bland {
                    break;
                }
                best = d;
            }
        }
        let Some(q) = entering else {
            // verify on a fresh factorization before declaring optimality
            if since_refactor > 0 {
                st.refactor()?;
                since_refactor = 0;
                continue;
            }
            break;
        };

        if iterations >= max_iter {
            let primal: f64 = objective(&st);
            let dual: f64 = st.y.iter().zip(rhs).map(|(y, b)| y * b).sum();
            return Err(Error::IterationLimit {
                iterations,
                objective: primal,
                gap: (dual - primal).abs(),
            });
        }

        let alpha = st.ftran(q);
        // ratio test
        let mut row = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = alpha[i];
            if a > opts.pivot_tol {
                let ratio = st.xb[i].max(0.0) / a;
                let better = match row {
                    None => true,
                    Some(r) => {
                        if ratio < best_ratio - 1e-12 {
                            true
                        } else if ratio <= best_ratio + 1e-12 {
                            if bland {
                                st.basis[i] < st.basis[r]
                            } else {
                                a > alpha[r] || (a == alpha[r] && st.basis[i] < st.basis[r])
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    row = Some(i);
                    best_ratio = best_ratio.min(ratio);
                }
            }
        }
        let Some(r) = row else {
            return Err(Error::Numerical(format!("unbounded direction on variable {q}")));
        };

        if best_ratio <= 1e-12 {
            degenerate_run += 1;
            if degenerate_run >= opts.degenerate_switch {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }

        st.pivot(r, q, &alpha);
        iterations += 1;
        since_refactor += 1;
        if since_refactor >= refactor_every {
            st.refactor()?;
            since_refactor = 0;
        }
    }

    let mut x = vec![0.0; n];
    for (i, &bv) in st.basis.iter().enumerate() {
        if bv < n {
            x[bv] = st.xb[i].max(0.0);
        }
    }
    let y: Vec<f64> = st.y.iter().map(|&v| if v < 0.0 && v > -opt_tol { 0.0 } else { v }).collect();
    let primal_objective = x.iter().zip(cost).map(|(a, b)| a * b).sum();
    let dual_objective = y.iter().zip(rhs).map(|(a, b)| a * b).sum();
    Ok(SimplexSolution {
        x,
        y,
        primal_objective,
        dual_objective,
        iterations,
    })
}

fn objective(st: &State<'_>) -> f64 {
    st.basis
        .iter()
        .zip(&st.xb)
        .map(|(&bv, &x)| st.var_cost(bv) * x)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_lp() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let cost = [3.0, 5.0];
        let cols = vec![vec![(0, 1.0), (2, 3.0)], vec![(1, 2.0), (2, 2.0)]];
        let s = solve(&cost, &cols, &[4.0, 12.0, 18.0], &SimplexOptions::default()).unwrap();
        assert!((s.primal_objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.dual_objective - 36.0).abs() < 1e-9);
    }

    #[test]
    fn zero_rhs_is_degenerate_but_fine() {
        let cost = [1.0, 1.0];
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0)]];
        let s = solve(&cost, &cols, &[0.0, 5.0], &SimplexOptions::default()).unwrap();
        assert_eq!(s.primal_objective, 0.0);
    }

    #[test]
    fn negative_rhs_rejected() {
        assert!(solve(&[1.0], &[vec![(0, 1.0)]], &[-1.0], &SimplexOptions::default()).is_err());
    }

    #[test]
    fn iteration_limit_reports_bound() {
        let cost = [3.0, 5.0];
        let cols = vec![vec![(0, 1.0), (2, 3.0)], vec![(1, 2.0), (2, 2.0)]];
        let opts = SimplexOptions {
            max_iterations: 1,
            ..Default::default()
        };
        match solve(&cost, &cols, &[4.0, 12.0, 18.0], &opts) {
            Err(Error::IterationLimit { iterations, .. }) => assert_eq!(iterations, 1),
            other => panic!("{other:?}"),
        }
    }
}
