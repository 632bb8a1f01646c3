//! Soft-margin SVM trained by SMO, with Platt-scaled probabilities.
//!
//! The dual problem is
//!
//! ```text
//! min  1/2 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Working pairs are chosen with second-order information: `i` is the most
//! violating index from the "up" set, `j` the index from the "low" set that
//! gives the largest decrease of the objective for a two-variable step.
//! The solver stops once the maximal KKT violation falls below `tol`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training, LearnerError, Matrix, ProbabilisticClassifier};
use crate::model::Label;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma |x - z|^2)`; `gamma: None` picks `1 / (d * var(X))`.
    Rbf { gamma: Option<f64> },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Rbf { gamma: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: Kernel,
    pub tol: f64,
    /// `None` allows `max(10^7, 100 n)` iterations.
    pub max_iter: Option<usize>,
    /// Unused by the deterministic solver; kept so every learner is seeded alike.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: Kernel::default(),
            tol: 1e-3,
            max_iter: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum KernelFn {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelFn {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelFn::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelFn::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Solver diagnostics at termination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    /// `1/2 a'Qa - e'a` at the solution.
    pub objective: f64,
    /// Primal objective minus dual objective.
    pub duality_gap: f64,
    /// Largest KKT violation `max_up(-yG) - min_low(-yG)`.
    pub kkt_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    kernel: KernelFn,
    support: Matrix,
    /// `a_i y_i` for each support vector.
    coef: Vec<f64>,
    rho: f64,
    platt_a: f64,
    platt_b: f64,
    convergence: Convergence,
}

impl Svm {
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .support
            .iter_rows()
            .zip(&self.coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum();
        s - self.rho
    }

    pub fn convergence(&self) -> Convergence {
        self.convergence
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    pub fn platt(&self) -> (f64, f64) {
        (self.platt_a, self.platt_b)
    }
}

impl ProbabilisticClassifier for Svm {
    fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let p1 = sigmoid_predict(self.decision_value(x), self.platt_a, self.platt_b);
        [1.0 - p1, p1]
    }
}

fn resolve_kernel(kernel: Kernel, x: &Matrix) -> Result<KernelFn, LearnerError> {
    match kernel {
        Kernel::Linear => Ok(KernelFn::Linear),
        Kernel::Rbf { gamma: Some(g) } if g > 0.0 && g.is_finite() => Ok(KernelFn::Rbf { gamma: g }),
        Kernel::Rbf { gamma: Some(g) } => {
            Err(LearnerError::InvalidParameter(format!("gamma must be positive, got {g}")))
        }
        Kernel::Rbf { gamma: None } => {
            let n = (x.rows() * x.cols()) as f64;
            let all = || x.iter_rows().flatten();
            let mean = all().sum::<f64>() / n;
            let var = all().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let gamma = if var > 0.0 { 1.0 / (x.cols() as f64 * var) } else { 1.0 };
            Ok(KernelFn::Rbf { gamma })
        }
    }
}

struct Solver<'a> {
    k: &'a [f64],
    n: usize,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl Solver<'_> {
    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    fn upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Returns the working pair, or `None` with the KKT violation when optimal.
    fn select(&self, tol: f64) -> Result<(usize, usize), f64> {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..self.n {
            let v = -self.y[t] * self.grad[t];
            let in_up = if self.y[t] > 0.0 { !self.upper(t) } else { !self.lower(t) };
            if in_up && v >= gmax {
                gmax = v;
                gmax_idx = Some(t);
            }
        }
        let Some(i) = gmax_idx else {
            return Err(0.0);
        };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best_j = None;
        let mut obj_min = f64::INFINITY;
        let kii = self.kij(i, i);
        for j in 0..self.n {
            let in_low = if self.y[j] > 0.0 { !self.lower(j) } else { !self.upper(j) };
            if !in_low {
                continue;
            }
            let v = self.y[j] * self.grad[j];
            gmax2 = gmax2.max(v);
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let quad = kii + self.kij(j, j) - 2.0 * self.kij(i, j);
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    best_j = Some(j);
                }
            }
        }
        let violation = gmax + gmax2;
        match best_j {
            Some(j) if violation >= tol => Ok((i, j)),
            _ => Err(violation.max(0.0)),
        }
    }

    fn step(&mut self, i: usize, j: usize) {
        let (yi, yj, c) = (self.y[i], self.y[j], self.c);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qij = yi * yj * self.kij(i, j);
        let (qii, qjj) = (self.kij(i, i), self.kij(j, j));
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let (row_i, row_j) = (&self.k[i * self.n..(i + 1) * self.n], &self.k[j * self.n..(j + 1) * self.n]);
        for (t, g) in self.grad.iter_mut().enumerate() {
            *g += self.y[t] * (yi * row_i[t] * di + yj * row_j[t] * dj);
        }
    }

    fn rho(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut n_free, mut sum_free) = (0usize, 0.0);
        for t in 0..self.n {
            let yg = self.y[t] * self.grad[t];
            if self.upper(t) {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.lower(t) {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }

    /// `(dual objective, duality gap)` for the current iterate and `rho`.
    fn objective_and_gap(&self, rho: f64) -> (f64, f64) {
        let mut w2 = 0.0;
        let mut sum_alpha = 0.0;
        let mut hinge = 0.0;
        for t in 0..self.n {
            // sum_j a_j y_j K_tj, recovered from the gradient
            let s = self.y[t] * (self.grad[t] + 1.0);
            w2 += self.alpha[t] * self.y[t] * s;
            sum_alpha += self.alpha[t];
            hinge += (1.0 - self.y[t] * (s - rho)).max(0.0);
        }
        let objective = 0.5 * w2 - sum_alpha;
        let primal = 0.5 * w2 + self.c * hinge;
        (objective, primal + objective)
    }
}

pub fn train_svm(x: &Matrix, y: &[Label], params: &SvmParams) -> Result<Svm, LearnerError> {
    let counts = check_training(x, y)?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(LearnerError::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    let kernel = resolve_kernel(params.kernel, x)?;
    let n = x.rows();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = x.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.eval(xi, x.row(j));
        }
    });
    let ys: Vec<f64> = y.iter().map(|l| if *l == Label::Trusted { 1.0 } else { -1.0 }).collect();
    let mut solver = Solver {
        k: &k,
        n,
        y: &ys,
        c: params.c,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
    };
    let max_iter = params.max_iter.unwrap_or_else(|| (100 * n).max(10_000_000));
    let mut iterations = 0;
    let kkt_violation = loop {
        match solver.select(params.tol) {
            Err(v) => break v,
            Ok((i, j)) => {
                if iterations >= max_iter {
                    let rho = solver.rho();
                    let (_, gap) = solver.objective_and_gap(rho);
                    return Err(LearnerError::NotConverged { iterations, gap });
                }
                solver.step(i, j);
                iterations += 1;
            }
        }
    };
    let rho = solver.rho();
    let (objective, duality_gap) = solver.objective_and_gap(rho);

    let decisions: Vec<f64> = (0..n)
        .map(|t| ys[t] * (solver.grad[t] + 1.0) - rho)
        .collect();
    let (platt_a, platt_b) = sigmoid_train(&decisions, &ys, counts);

    let sv: Vec<usize> = (0..n).filter(|&t| solver.alpha[t] > 0.0).collect();
    let coef = sv.iter().map(|&t| solver.alpha[t] * ys[t]).collect();
    Ok(Svm {
        kernel,
        support: x.select_rows(&sv),
        coef,
        rho,
        platt_a,
        platt_b,
        convergence: Convergence {
            iterations,
            objective,
            duality_gap,
            kkt_violation,
        },
    })
}

/// `P(y = 1 | f) = 1 / (1 + exp(A f + B))`, evaluated without overflow.
pub fn sigmoid_predict(f: f64, a: f64, b: f64) -> f64 {
    let z = f * a + b;
    if z >= 0.0 {
        (-z).exp() / (1.0 + (-z).exp())
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Fits Platt's sigmoid by Newton's method with backtracking, using the
/// regularized targets `(n+ + 1)/(n+ + 2)` and `1/(n- + 2)`.
pub fn sigmoid_train(dec: &[f64], ys: &[f64], counts: [usize; 2]) -> (f64, f64) {
    let (prior0, prior1) = (counts[0] as f64, counts[1] as f64);
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = ys.iter().map(|&y| if y > 0.0 { hi } else { lo }).collect();
    let fval = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (max_iter, min_step, sigma, eps) = (100, 1e-10, 1e-12, 1e-5);
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut f = fval(a, b);
    for _ in 0..max_iter {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&d, &ti) in dec.iter().zip(&t) {
            let z = d * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += d * d * d2;
            h22 += d2;
            h21 += d * d2;
            let d1 = ti - p;
            g1 += d * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = fval(na, nb);
            if nf < f + 1e-4 * step * gd {
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::super::testdata::{accuracy, blobs};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circles(n: usize, seed: u64) -> (Matrix, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = Label::from_index(i % 2);
            let r = if label == Label::Trusted { 0.3 } else { 1.0 } + rng.random_range(-0.1..0.1);
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            rows.push(vec![r * th.cos(), r * th.sin()]);
            y.push(label);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn two_points() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let y = [Label::Untrusted, Label::Trusted];
        let m = train_svm(&x, &y, &SvmParams { kernel: Kernel::Linear, ..Default::default() }).unwrap();
        assert!(m.decision_value(&[1.0, 1.0]) > 0.0 && m.decision_value(&[0.0, 0.0]) < 0.0);
        assert!(m.predict_proba(&[1.0, 1.0])[1] > 0.5);
    }

    #[test]
    fn linear_blobs() {
        let (x, y) = blobs(200, 6.0, 7);
        let m = train_svm(&x, &y, &SvmParams { kernel: Kernel::Linear, ..Default::default() }).unwrap();
        assert!(accuracy(&m, &x, &y) >= 0.99);
    }

    #[test]
    fn circles_need_rbf() {
        let (x, y) = circles(200, 3);
        let rbf = train_svm(&x, &y, &SvmParams::default()).unwrap();
        assert!(accuracy(&rbf, &x, &y) >= 0.95);
        let lin = train_svm(&x, &y, &SvmParams { kernel: Kernel::Linear, ..Default::default() }).unwrap();
        assert!(accuracy(&lin, &x, &y) <= 0.6);
    }

    #[test]
    fn converged_solution_has_small_gap() {
        let (x, y) = blobs(300, 1.5, 4);
        for kernel in [Kernel::Linear, Kernel::default()] {
            let m = train_svm(&x, &y, &SvmParams { kernel, ..Default::default() }).unwrap();
            let c = m.convergence();
            assert!(c.kkt_violation < 1e-3);
            assert!(c.duality_gap >= -1e-9);
            assert!(c.duality_gap <= 1e-2 * c.objective.abs(), "{c:?}");
        }
    }

    #[test]
    fn iteration_cap_reports_gap() {
        let (x, y) = blobs(100, 0.5, 2);
        let err = train_svm(&x, &y, &SvmParams { max_iter: Some(2), ..Default::default() }).unwrap_err();
        match err {
            LearnerError::NotConverged { iterations, gap } => {
                assert_eq!(iterations, 2);
                assert!(gap > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn platt_is_monotone_in_decision_value() {
        let (x, y) = blobs(100, 2.0, 8);
        let m = train_svm(&x, &y, &SvmParams::default()).unwrap();
        let (a, _) = m.platt();
        assert!(a < 0.0);
    }
}
