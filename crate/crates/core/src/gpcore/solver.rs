//! Geometric programs in standard form and a log-space barrier solver.
//!
//! With `x = exp(y)` a monomial becomes affine in `y` and a posynomial
//! constraint `f(x) <= 1` becomes the convex log-sum-exp constraint
//! `log f(exp(y)) <= 0`. The transformed problem is solved with a primal
//! barrier method: damped Newton centering with backtracking, the barrier
//! weight grown by `mu` after every centering, and an auxiliary-slack phase I
//! when no strictly feasible start is supplied.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::poly::{Monomial, Posynomial};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    Minimize(Posynomial),
    /// Handled internally as minimising `1 / m`.
    Maximize(Monomial),
}

/// `objective` subject to `f_i(x) <= 1` and `h_j(x) = 1` over `x > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpProblem {
    pub variables: Vec<String>,
    pub objective: Objective,
    pub inequalities: Vec<Posynomial>,
    pub equalities: Vec<Monomial>,
}

impl GpProblem {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Checks the problem is a GP in standard form over the declared variables.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let dims = |what: &str, got: usize| -> Result<()> {
            if got == n {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{what} uses {got} variables, problem declares {n}")))
            }
        };
        match &self.objective {
            Objective::Minimize(p) => dims("objective", p.num_vars())?,
            Objective::Maximize(m) => {
                dims("objective", m.num_vars())?;
                if !m.is_proper() {
                    return Err(Error::Domain("maximised objective must be a monomial".into()));
                }
            }
        }
        for (i, p) in self.inequalities.iter().enumerate() {
            dims(&format!("inequality {i}"), p.num_vars())?;
        }
        for (i, m) in self.equalities.iter().enumerate() {
            dims(&format!("equality {i}"), m.num_vars())?;
            if !m.is_proper() {
                return Err(Error::Domain(format!("equality {i} is not a monomial")));
            }
        }
        Ok(())
    }

    /// Objective in canonical "minimise posynomial" form.
    pub fn canonical_objective(&self) -> Posynomial {
        match &self.objective {
            Objective::Minimize(p) => p.clone(),
            Objective::Maximize(m) => Posynomial::from(m.recip()),
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> Result<f64> {
        match &self.objective {
            Objective::Minimize(p) => p.eval(x),
            Objective::Maximize(m) => m.eval(x),
        }
    }

    /// Largest `f_i(x) - 1` and `|h_j(x) - 1|`; non-positive when feasible.
    pub fn max_violation(&self, x: &[f64]) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for p in &self.inequalities {
            worst = worst.max(p.eval(x)? - 1.0);
        }
        for m in &self.equalities {
            worst = worst.max((m.eval(x)? - 1.0).abs());
        }
        Ok(worst)
    }
}

impl fmt::Display for GpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variables: {}", self.variables.join(", "))?;
        match &self.objective {
            Objective::Minimize(p) => writeln!(f, "minimize {p}")?,
            Objective::Maximize(m) => writeln!(f, "maximize {m}")?,
        }
        for p in &self.inequalities {
            writeln!(f, "  {p} <= 1")?;
        }
        for m in &self.equalities {
            writeln!(f, "  {m} = 1")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpTolerances {
    /// Required margin for declaring phase I successful.
    pub feasibility: f64,
    /// Stationarity residual required for `Optimal`.
    pub kkt: f64,
    /// Stop once `m / t` falls below this.
    pub duality_gap: f64,
    /// Newton stop on `lambda^2 / 2`.
    pub newton: f64,
    pub mu: f64,
    pub t0: f64,
    pub max_newton: usize,
    pub max_outer: usize,
}

impl Default for GpTolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            kkt: 1e-6,
            duality_gap: 1e-8,
            newton: 1e-12,
            mu: 10.0,
            t0: 1.0,
            max_newton: 200,
            max_outer: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: GpStatus,
    /// Infinity norm of the log-space Lagrangian gradient.
    pub kkt_residual: f64,
    /// Multipliers of `log f_i <= 0`.
    pub inequality_duals: Vec<f64>,
    /// Multipliers of `log h_j = 0`.
    pub equality_duals: Vec<f64>,
    pub duality_gap: f64,
    pub newton_steps: usize,
    /// Newton decrements `lambda^2 / 2`, one list per phase-II centering.
    pub decrements: Vec<Vec<f64>>,
}

/// `log sum_i exp(a_i . y + b_i)`.
#[derive(Debug, Clone)]
struct LogSumExp {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl LogSumExp {
    fn from_posynomial(p: &Posynomial, extra: usize) -> Self {
        let n = p.num_vars();
        let terms = p.terms();
        let a = DMatrix::from_fn(terms.len(), n + extra, |i, j| {
            if j < n {
                terms[i].exponents[j]
            } else {
                0.0
            }
        });
        let b = DVector::from_iterator(terms.len(), terms.iter().map(|t| t.coeff.ln()));
        Self { a, b }
    }

    fn single(a: DVector<f64>, b: f64) -> Self {
        Self {
            a: DMatrix::from_row_slice(1, a.len(), a.as_slice()),
            b: DVector::from_element(1, b),
        }
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        let z = &self.a * y + &self.b;
        let zmax = z.max();
        zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln()
    }

    fn full(&self, y: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let z = &self.a * y + &self.b;
        let zmax = z.max();
        let e = z.map(|v| (v - zmax).exp());
        let s = e.sum();
        let w = e / s;
        let grad = self.a.tr_mul(&w);
        let weighted = DMatrix::from_fn(self.a.nrows(), self.a.ncols(), |i, j| w[i] * self.a[(i, j)]);
        let hess = self.a.tr_mul(&weighted) - &grad * grad.transpose();
        (zmax + s.ln(), grad, hess)
    }
}

struct Barrier<'a> {
    obj: &'a LogSumExp,
    cons: &'a [LogSumExp],
    eq_a: &'a DMatrix<f64>,
}

struct Centered {
    steps: usize,
    decrements: Vec<f64>,
    /// Multipliers of the equality rows, scaled by `1/t`.
    eq_duals: DVector<f64>,
    converged: bool,
}

impl Barrier<'_> {
    fn strictly_feasible(&self, y: &DVector<f64>) -> bool {
        self.cons.iter().all(|c| c.value(y) < 0.0)
    }

    fn phi(&self, y: &DVector<f64>, t: f64) -> f64 {
        let mut v = t * self.obj.value(y);
        for c in self.cons {
            let f = c.value(y);
            if f >= 0.0 {
                return f64::INFINITY;
            }
            v -= (-f).ln();
        }
        v
    }

    fn derivatives(&self, y: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let (_, g0, h0) = self.obj.full(y);
        let mut g = g0 * t;
        let mut h = h0 * t;
        for c in self.cons {
            let (f, gc, hc) = c.full(y);
            let inv = -1.0 / f;
            g += &gc * inv;
            h += hc * inv + (&gc * gc.transpose()) * (inv * inv);
        }
        (g, h)
    }

    /// Newton direction and equality multipliers from the KKT system.
    fn newton_step(&self, g: &DVector<f64>, h: &DMatrix<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = g.len();
        let p = self.eq_a.nrows();
        if p == 0 {
            if let Some(ch) = h.clone().cholesky() {
                return Some((-ch.solve(g), DVector::zeros(0)));
            }
            let scale = (h.trace() / n as f64).abs().max(1e-300);
            let reg = h + DMatrix::identity(n, n) * (1e-12 * scale);
            let lu = reg.lu();
            return lu.solve(&(-g)).map(|d| (d, DVector::zeros(0)));
        }
        let mut kkt = DMatrix::zeros(n + p, n + p);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        kkt.view_mut((n, 0), (p, n)).copy_from(self.eq_a);
        kkt.view_mut((0, n), (n, p)).copy_from(&self.eq_a.transpose());
        let mut rhs = DVector::zeros(n + p);
        rhs.rows_mut(0, n).copy_from(&(-g));
        let sol = kkt.lu().solve(&rhs)?;
        Some((sol.rows(0, n).into_owned(), sol.rows(n, p).into_owned()))
    }

    fn center(
        &self,
        y: &mut DVector<f64>,
        t: f64,
        tol: &GpTolerances,
        budget: usize,
        stop: &dyn Fn(&DVector<f64>) -> bool,
    ) -> Centered {
        const ALPHA: f64 = 0.01;
        const BETA: f64 = 0.5;
        let mut out = Centered {
            steps: 0,
            decrements: Vec::new(),
            eq_duals: DVector::zeros(self.eq_a.nrows()),
            converged: false,
        };
        while out.steps < budget {
            let (g, h) = self.derivatives(y, t);
            let Some((dy, w)) = self.newton_step(&g, &h) else {
                break;
            };
            out.eq_duals = w / t;
            let lambda2 = -g.dot(&dy);
            out.decrements.push(lambda2.max(0.0) / 2.0);
            if !(lambda2.is_finite()) || lambda2 / 2.0 <= tol.newton {
                out.converged = lambda2.is_finite();
                break;
            }
            if lambda2 / 2.0 < STALL && out.decrements.len() >= 2 && lambda2 / 2.0 >= out.decrements[out.decrements.len() - 2] {
                // rounding floor reached
                out.converged = true;
                break;
            }
            out.steps += 1;
            let phi0 = self.phi(y, t);
            let slope = g.dot(&dy);
            // full steps near the centre
            let pure = lambda2 / 2.0 < PURE_NEWTON;
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-20 {
                let cand = &*y + &dy * s;
                let phi = self.phi(&cand, t);
                if phi.is_finite() && (pure || phi <= phi0 + ALPHA * s * slope) {
                    *y = cand;
                    accepted = true;
                    break;
                }
                s *= BETA;
            }
            if accepted && stop(y) {
                out.converged = true;
                break;
            }
            if !accepted {
                out.converged = lambda2 / 2.0 <= tol.newton.sqrt();
                break;
            }
        }
        out
    }

    /// `t` whose central point is closest to `y`: least squares on
    /// `t grad f0 + grad barrier = 0`.
    fn path_parameter(&self, y: &DVector<f64>) -> f64 {
        let (_, g0, _) = self.obj.full(y);
        let mut gb = DVector::zeros(y.len());
        for c in self.cons {
            let (f, gc, _) = c.full(y);
            gb += gc / -f;
        }
        let t = -g0.dot(&gb) / g0.norm_squared();
        if t.is_finite() {
            t
        } else {
            0.0
        }
    }

    fn duals(&self, y: &DVector<f64>, t: f64) -> Vec<f64> {
        self.cons.iter().map(|c| 1.0 / (t * -c.value(y))).collect()
    }

    /// `grad f0 + sum lambda_i grad f_i + A^T nu`, infinity norm.
    fn stationarity(&self, y: &DVector<f64>, lambdas: &[f64], nu: &DVector<f64>) -> f64 {
        let (_, mut r, _) = self.obj.full(y);
        for (c, l) in self.cons.iter().zip(lambdas) {
            let (_, gc, _) = c.full(y);
            r += gc * *l;
        }
        if !nu.is_empty() {
            r += self.eq_a.tr_mul(nu);
        }
        r.amax()
    }

    /// Least-squares multipliers on the nearly active constraints, used when
    /// they are non-negative and fit better than the barrier estimates.
    fn refine_duals(&self, y: &DVector<f64>, gap: f64, lambdas: &mut Vec<f64>, nu: &mut DVector<f64>) {
        let active: Vec<usize> = (0..self.cons.len())
            .filter(|&i| -self.cons[i].value(y) <= gap.sqrt())
            .collect();
        let n = y.len();
        let p = self.eq_a.nrows();
        let cols = active.len() + p;
        if cols == 0 {
            return;
        }
        let mut a = DMatrix::zeros(n, cols);
        for (c, &i) in active.iter().enumerate() {
            let (_, g, _) = self.cons[i].full(y);
            a.set_column(c, &g);
        }
        for j in 0..p {
            a.set_column(active.len() + j, &self.eq_a.row(j).transpose());
        }
        let (_, g0, _) = self.obj.full(y);
        let Ok(sol) = a.svd(true, true).solve(&(-g0), 1e-12) else {
            return;
        };
        if sol.rows(0, active.len()).iter().any(|v| *v < 0.0) {
            return;
        }
        let mut cand = vec![0.0; self.cons.len()];
        for (c, &i) in active.iter().enumerate() {
            cand[i] = sol[c];
        }
        let cand_nu = sol.rows(active.len(), p).into_owned();
        if self.stationarity(y, &cand, &cand_nu) < self.stationarity(y, lambdas, nu) {
            *lambdas = cand;
            *nu = cand_nu;
        }
    }
}

fn log_point(x: &[f64]) -> Result<DVector<f64>> {
    if let Some(bad) = x.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!("start point must be positive, got {bad}")));
    }
    Ok(DVector::from_iterator(x.len(), x.iter().map(|v| v.ln())))
}

/// Minimum-norm solution of `A y = b`, or zeros when there are no equalities.
fn equality_start(a: &DMatrix<f64>, b: &DVector<f64>, n: usize) -> Option<DVector<f64>> {
    if a.nrows() == 0 {
        return Some(DVector::zeros(n));
    }
    let svd = a.clone().svd(true, true);
    let y = svd.solve(b, 1e-12).ok()?;
    ((a * &y - b).amax() <= 1e-9 * (1.0 + b.amax())).then_some(y)
}

/// Newton decrement `lambda^2 / 2` below which full steps are taken.
const PURE_NEWTON: f64 = 1e-3;

/// A decrement that stops shrinking below this is treated as converged.
const STALL: f64 = 1e-6;

/// Half-width, in log units, of the box phase I searches around its start.
const PHASE_ONE_BOX: f64 = 60.0;

enum PhaseOne {
    Feasible(DVector<f64>, usize),
    Infeasible(usize),
}

fn phase_one(
    cons: &[LogSumExp],
    eq_a: &DMatrix<f64>,
    eq_b: &DVector<f64>,
    start: Option<DVector<f64>>,
    tol: &GpTolerances,
) -> PhaseOne {
    let n = eq_a.ncols();
    let Some(y0) = start.or_else(|| equality_start(eq_a, eq_b, n)) else {
        return PhaseOne::Infeasible(0);
    };
    // variables (y, s): minimise s subject to F_i(y) - s <= 0 and s >= -1
    let mut aug_cons: Vec<LogSumExp> = cons
        .iter()
        .map(|c| {
            let mut a = c.a.clone().insert_column(n, 0.0);
            a.column_mut(n).fill(-1.0);
            LogSumExp { a, b: c.b.clone() }
        })
        .collect();
    let mut lower = DVector::zeros(n + 1);
    lower[n] = -1.0;
    aug_cons.push(LogSumExp::single(lower, -1.0));
    // box around the start
    for j in 0..n {
        let mut up = DVector::zeros(n + 1);
        up[j] = 1.0;
        aug_cons.push(LogSumExp::single(up.clone(), -(y0[j] + PHASE_ONE_BOX)));
        aug_cons.push(LogSumExp::single(-up, y0[j] - PHASE_ONE_BOX));
    }
    let mut obj_a = DVector::zeros(n + 1);
    obj_a[n] = 1.0;
    let obj = LogSumExp::single(obj_a, 0.0);
    let aug_eq = eq_a.clone().insert_column(n, 0.0);
    let barrier = Barrier {
        obj: &obj,
        cons: &aug_cons,
        eq_a: &aug_eq,
    };
    let max_f = |y: &DVector<f64>| cons.iter().map(|c| c.value(y)).fold(f64::NEG_INFINITY, f64::max);
    let worst = max_f(&y0);
    if worst < -tol.feasibility {
        return PhaseOne::Feasible(y0, 0);
    }
    let done = |z: &DVector<f64>| max_f(&z.rows(0, n).into_owned()) < -tol.feasibility;
    let mut z = y0.clone().insert_row(n, (worst + 1.0).max(0.0));
    let m = aug_cons.len() as f64;
    let mut t = tol.t0;
    let mut steps = 0;
    for _ in 0..tol.max_outer {
        let c = barrier.center(&mut z, t, tol, tol.max_newton, &done);
        steps += c.steps;
        let y = z.rows(0, n).into_owned();
        let worst = max_f(&y);
        if worst < -tol.feasibility {
            return PhaseOne::Feasible(y, steps);
        }
        // s(z) - m/t bounds the phase-I optimum from below
        let lower = z[n] - m / t;
        if c.converged && (lower > 0.0 || (m / t < tol.duality_gap && lower > -tol.feasibility)) {
            return PhaseOne::Infeasible(steps);
        }
        t *= tol.mu;
    }
    PhaseOne::Infeasible(steps)
}

/// Solves `p` from scratch.
pub fn solve_gp(p: &GpProblem, tol: &GpTolerances) -> Result<GpSolution> {
    solve_gp_from(p, tol, None)
}

/// Solves `p`, starting phase II at `start` when it is strictly feasible.
pub fn solve_gp_from(p: &GpProblem, tol: &GpTolerances, start: Option<&[f64]>) -> Result<GpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let obj = LogSumExp::from_posynomial(&p.canonical_objective(), 0);
    let cons: Vec<LogSumExp> = p.inequalities.iter().map(|q| LogSumExp::from_posynomial(q, 0)).collect();
    let eq_a = DMatrix::from_fn(p.equalities.len(), n, |i, j| p.equalities[i].exponents[j]);
    let eq_b = DVector::from_iterator(p.equalities.len(), p.equalities.iter().map(|m| -m.coeff.ln()));
    let barrier = Barrier {
        obj: &obj,
        cons: &cons,
        eq_a: &eq_a,
    };

    let start = start.map(log_point).transpose()?;
    let eq_ok = |y: &DVector<f64>| eq_a.nrows() == 0 || (&eq_a * y - &eq_b).amax() <= 1e-10;
    let mut steps = 0;
    let mut warm = false;
    let mut y = match start {
        Some(y) if barrier.strictly_feasible(&y) && eq_ok(&y) => {
            warm = true;
            y
        }
        other => match phase_one(&cons, &eq_a, &eq_b, other.filter(|y| eq_ok(y)), tol) {
            PhaseOne::Feasible(y, s) => {
                steps += s;
                y
            }
            PhaseOne::Infeasible(s) => {
                return Ok(GpSolution {
                    x: vec![f64::NAN; n],
                    objective: f64::NAN,
                    status: GpStatus::Infeasible,
                    kkt_residual: f64::INFINITY,
                    inequality_duals: vec![0.0; cons.len()],
                    equality_duals: vec![0.0; eq_a.nrows()],
                    duality_gap: f64::INFINITY,
                    newton_steps: s,
                    decrements: Vec::new(),
                })
            }
        },
    };

    let m = cons.len() as f64;
    let mut t = if cons.is_empty() {
        1.0
    } else if warm {
        barrier.path_parameter(&y).max(tol.t0)
    } else {
        tol.t0
    };
    let mut decrements = Vec::new();
    let mut converged = false;
    let mut eq_duals = DVector::zeros(eq_a.nrows());
    for _ in 0..tol.max_outer {
        let c = barrier.center(&mut y, t, tol, tol.max_newton, &|_| false);
        steps += c.steps;
        decrements.push(c.decrements);
        eq_duals = c.eq_duals;
        if !c.converged {
            break;
        }
        if m / t < tol.duality_gap {
            converged = true;
            break;
        }
        t *= tol.mu;
    }
    let mut duals = barrier.duals(&y, t);
    barrier.refine_duals(&y, m / t, &mut duals, &mut eq_duals);
    let kkt = barrier.stationarity(&y, &duals, &eq_duals);
    let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let status = if converged && kkt <= tol.kkt {
        GpStatus::Optimal
    } else {
        GpStatus::MaxIter
    };
    Ok(GpSolution {
        objective: p.objective_value(&x)?,
        x,
        status,
        kkt_residual: kkt,
        inequality_duals: duals,
        equality_duals: eq_duals.iter().copied().collect(),
        duality_gap: m / t,
        newton_steps: steps,
        decrements,
    })
}
