//! BFGS maximization with a strong-Wolfe line search.
//!
//! The solver minimizes the negated objective with the inverse-Hessian form of
//! BFGS (Nocedal & Wright, Alg. 6.1) and the bracketing/zoom line search of
//! Alg. 3.5/3.6. Every accepted step is recorded in an [`OptTrace`] together
//! with the number of objective and gradient evaluations spent on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::initializers::InitMethod;
use crate::pipeline::LabeledInstance;
use crate::simulator::{QaoaCircuit, QaoaParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_search_steps: usize,
    /// After an accepted Wolfe step, try the secant minimizer of the
    /// directional derivative once and keep it when it is better.
    pub refine_step: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search_steps: 20,
            refine_step: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1={} c2={}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.max_iterations == 0
            || self.max_line_search_steps == 0
            || self.gradient_tolerance.is_nan()
            || self.gradient_tolerance <= 0.0
        {
            return Err(Error::InvalidArgument(
                "optimizer limits and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub params: Vec<f64>,
    pub cost: f64,
    pub approx_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    /// Entry 0 is the starting point; one entry per accepted step after that.
    pub iterates: Vec<TraceEntry>,
    pub cost_evaluations: usize,
    pub gradient_evaluations: usize,
    pub converged: bool,
    pub termination: Termination,
}

impl OptTrace {
    /// Accepted steps, not counting the starting point.
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterates.iter().map(|e| e.cost)
    }

    pub fn cost_evals_per_iteration(&self) -> Option<f64> {
        (self.iterations() > 0).then(|| self.cost_evaluations as f64 / self.iterations() as f64)
    }

    /// Fills `approx_ratio` on every iterate from a known maximum cut.
    pub fn set_ratio_scale(&mut self, c_max: usize) {
        for e in &mut self.iterates {
            e.approx_ratio = Some(e.cost / c_max as f64);
        }
    }
}

/// A differentiable objective. Evaluation counts are kept by the solver.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;

    fn value_and_gradient(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }
}

/// Adapts a value closure and a gradient closure to [`Objective`].
pub struct FnObjective<F, G>(pub F, pub G);

impl<F, G> Objective for FnObjective<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.0)(x)
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        (self.1)(x)
    }
}

impl Objective for &QaoaCircuit {
    fn value(&mut self, x: &[f64]) -> f64 {
        match QaoaParams::from_slice(x) {
            Ok(p) => self.expectation(&p),
            Err(_) => f64::NAN,
        }
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        match QaoaParams::from_slice(x) {
            Ok(p) => QaoaCircuit::value_and_gradient(self, &p),
            Err(_) => (f64::NAN, vec![f64::NAN; x.len()]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub trace: OptTrace,
}

/// Maximizes `objective` from `init` using closures for the value and gradient.
pub fn bfgs_maximize<F, G>(objective: F, gradient: G, init: &[f64], cfg: &OptimizerConfig) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    bfgs_maximize_with(&mut FnObjective(objective, gradient), init, cfg)
}

/// Counting wrapper around the negated objective.
struct Negated<'a, O: ?Sized> {
    inner: &'a mut O,
    values: usize,
    gradients: usize,
}

impl<O: Objective + ?Sized> Negated<'_, O> {
    fn eval(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        self.values += 1;
        self.gradients += 1;
        let (f, g) = self.inner.value_and_gradient(x);
        (-f, g.into_iter().map(|v| -v).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn all_finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

struct Step {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
}

enum Search {
    Wolfe(Step),
    /// Sufficient decrease only; the curvature condition was never met.
    Armijo(Step),
    Failed,
    NonFinite,
}

/// Cubic-interpolated minimizer of phi on the interval spanned by `a` and `b`,
/// falling back to bisection when the cubic is degenerate or too close to an end.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mid = 0.5 * (a + b);
    if disc.is_nan() || disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    let (lo, hi) = (a.min(b), a.max(b));
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}

struct LineSearch<'c> {
    cfg: &'c OptimizerConfig,
    x: &'c [f64],
    d: &'c [f64],
    f0: f64,
    slope0: f64,
    evals: usize,
    best_armijo: Option<Step>,
}

impl LineSearch<'_> {
    fn trial<O: Objective + ?Sized>(&mut self, obj: &mut Negated<'_, O>, alpha: f64) -> Option<(Step, f64)> {
        self.evals += 1;
        let xt: Vec<f64> = self.x.iter().zip(self.d).map(|(x, d)| x + alpha * d).collect();
        let (f, g) = obj.eval(&xt);
        if !all_finite(f, &g) {
            return None;
        }
        let slope = dot(&g, self.d);
        Some((Step { alpha, f, g }, slope))
    }

    fn armijo(&self, alpha: f64, f: f64) -> bool {
        f <= self.f0 + self.cfg.wolfe_c1 * alpha * self.slope0
    }

    fn curvature(&self, slope: f64) -> bool {
        slope.abs() <= -self.cfg.wolfe_c2 * self.slope0
    }

    fn note_armijo(&mut self, step: &Step) {
        if self.armijo(step.alpha, step.f) && self.best_armijo.as_ref().is_none_or(|b| step.f < b.f) {
            self.best_armijo = Some(Step {
                alpha: step.alpha,
                f: step.f,
                g: step.g.clone(),
            });
        }
    }

    fn give_up(self) -> Search {
        match self.best_armijo {
            Some(s) if s.f < self.f0 => Search::Armijo(s),
            _ => Search::Failed,
        }
    }

    fn run<O: Objective + ?Sized>(mut self, obj: &mut Negated<'_, O>, alpha0: f64) -> Search {
        let (mut a_prev, mut f_prev, mut s_prev) = (0.0, self.f0, self.slope0);
        let mut alpha = alpha0;
        let mut first = true;
        while self.evals < self.cfg.max_line_search_steps {
            let Some((step, slope)) = self.trial(obj, alpha) else {
                return Search::NonFinite;
            };
            self.note_armijo(&step);
            if !self.armijo(alpha, step.f) || (!first && step.f >= f_prev) {
                return self.zoom(obj, (a_prev, f_prev, s_prev), (alpha, step.f, slope));
            }
            if self.curvature(slope) {
                return Search::Wolfe(step);
            }
            if slope >= 0.0 {
                return self.zoom(obj, (alpha, step.f, slope), (a_prev, f_prev, s_prev));
            }
            (a_prev, f_prev, s_prev) = (alpha, step.f, slope);
            alpha *= 2.0;
            first = false;
        }
        self.give_up()
    }

    fn zoom<O: Objective + ?Sized>(
        mut self,
        obj: &mut Negated<'_, O>,
        mut lo: (f64, f64, f64),
        mut hi: (f64, f64, f64),
    ) -> Search {
        while self.evals < self.cfg.max_line_search_steps {
            let alpha = cubic_min(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
            if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1.0) {
                break;
            }
            let Some((step, slope)) = self.trial(obj, alpha) else {
                return Search::NonFinite;
            };
            self.note_armijo(&step);
            if !self.armijo(alpha, step.f) || step.f >= lo.1 {
                hi = (alpha, step.f, slope);
            } else {
                if self.curvature(slope) {
                    return Search::Wolfe(step);
                }
                if slope * (hi.0 - lo.0) >= 0.0 {
                    hi = lo;
                }
                lo = (alpha, step.f, slope);
            }
        }
        self.give_up()
    }
}

/// One secant step on the directional derivative between 0 and the accepted
/// step. Exact along quadratic lines, which restores finite termination there.
fn refine<O: Objective + ?Sized>(
    obj: &mut Negated<'_, O>,
    x: &[f64],
    d: &[f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    step: Step,
) -> Step {
    let slope = dot(&step.g, d);
    if slope.abs() <= 1e-3 * slope0.abs() {
        return step;
    }
    let alpha = step.alpha * slope0 / (slope0 - slope);
    if !(alpha.is_finite() && alpha > 0.0) || (alpha - step.alpha).abs() <= 1e-12 * step.alpha {
        return step;
    }
    let xt: Vec<f64> = x.iter().zip(d).map(|(x, d)| x + alpha * d).collect();
    let (f, g) = obj.eval(&xt);
    if all_finite(f, &g) && f <= step.f && f <= f0 + c1 * alpha * slope0 {
        Step { alpha, f, g }
    } else {
        step
    }
}

/// Maximizes a general [`Objective`]; the returned point is the last (and best) iterate.
pub fn bfgs_maximize_with<O: Objective + ?Sized>(
    objective: &mut O,
    init: &[f64],
    cfg: &OptimizerConfig,
) -> Result<BfgsOutcome> {
    cfg.validate()?;
    if init.is_empty() || init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "initial point must be finite and non-empty".into(),
        ));
    }
    let dim = init.len();
    let mut neg = Negated {
        inner: objective,
        values: 0,
        gradients: 0,
    };
    let mut x = init.to_vec();
    let (mut f, mut g) = neg.eval(&x);
    let mut trace = OptTrace {
        iterates: vec![TraceEntry {
            params: x.clone(),
            cost: -f,
            approx_ratio: None,
        }],
        cost_evaluations: 0,
        gradient_evaluations: 0,
        converged: false,
        termination: Termination::MaxIterations,
    };
    let fail = |mut trace: OptTrace, neg: &Negated<'_, O>, message: &str| {
        trace.cost_evaluations = neg.values;
        trace.gradient_evaluations = neg.gradients;
        trace.termination = Termination::NumericalFailure;
        Error::NumericalFailure {
            message: message.to_string(),
            trace: Box::new(trace),
        }
    };
    if !all_finite(f, &g) {
        return Err(fail(
            trace,
            &neg,
            "objective or gradient not finite at the initial point",
        ));
    }

    // inverse Hessian approximation, row-major
    let identity = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        (0..dim).for_each(|i| h[i * dim + i] = 1.0);
    };
    let mut h = vec![0.0; dim * dim];
    identity(&mut h);
    let mut fresh = true;

    loop {
        if norm(&g) < cfg.gradient_tolerance {
            trace.converged = true;
            trace.termination = Termination::GradientTolerance;
            break;
        }
        if trace.iterations() >= cfg.max_iterations {
            trace.termination = Termination::MaxIterations;
            break;
        }

        let direction = |h: &[f64]| -> Vec<f64> { (0..dim).map(|i| -dot(&h[i * dim..(i + 1) * dim], &g)).collect() };
        let mut d = direction(&h);
        if dot(&d, &g) >= 0.0 {
            identity(&mut h);
            fresh = true;
            d = direction(&h);
        }

        let mut retried = fresh;
        let step = loop {
            let alpha0 = if fresh { (1.0 / norm(&g)).min(1.0) } else { 1.0 };
            let search = LineSearch {
                cfg,
                x: &x,
                d: &d,
                f0: f,
                slope0: dot(&g, &d),
                evals: 0,
                best_armijo: None,
            };
            match search.run(&mut neg, alpha0) {
                Search::Wolfe(s) | Search::Armijo(s) => break Some(s),
                Search::NonFinite => {
                    return Err(fail(trace, &neg, "objective or gradient not finite during line search"));
                }
                Search::Failed if !retried => {
                    log::debug!("line search failed; retrying along steepest descent");
                    identity(&mut h);
                    fresh = true;
                    retried = true;
                    d = direction(&h);
                }
                Search::Failed => break None,
            }
        };
        let Some(mut step) = step else {
            trace.termination = Termination::LineSearchFailure;
            break;
        };
        if cfg.refine_step {
            step = refine(&mut neg, &x, &d, f, dot(&g, &d), cfg.wolfe_c1, step);
        }

        let s: Vec<f64> = d.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        f = step.f;
        g = step.g;
        trace.iterates.push(TraceEntry {
            params: x.clone(),
            cost: -f,
            approx_ratio: None,
        });

        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if fresh {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut h, &s, &y, 1.0 / sy);
            fresh = false;
        }
    }

    trace.cost_evaluations = neg.values;
    trace.gradient_evaluations = neg.gradients;
    Ok(BfgsOutcome { value: -f, x, trace })
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], rho: f64) {
    let dim = s.len();
    let hy: Vec<f64> = (0..dim).map(|i| dot(&h[i * dim..(i + 1) * dim], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..dim {
        for j in 0..dim {
            h[i * dim + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Runs BFGS on a QAOA circuit, filling approximation ratios from `c_max`.
pub fn optimize_circuit(
    circuit: &QaoaCircuit,
    c_max: usize,
    init: &QaoaParams,
    cfg: &OptimizerConfig,
) -> Result<(QaoaParams, OptTrace)> {
    let mut obj = circuit;
    let mut out = bfgs_maximize_with(&mut obj, &init.to_vec(), cfg).map_err(|e| match e {
        Error::NumericalFailure { message, mut trace } => {
            trace.set_ratio_scale(c_max.max(1));
            Error::NumericalFailure { message, trace }
        }
        other => other,
    })?;
    out.trace.set_ratio_scale(c_max.max(1));
    Ok((QaoaParams::from_slice(&out.x)?, out.trace))
}

/// Optimizes one graph from `init` and packages the result as a labeled record.
pub fn optimize_instance(g: &Graph, init: &QaoaParams, cfg: &OptimizerConfig) -> Result<LabeledInstance> {
    let mut graph = g.clone();
    if graph.num_edges() == 0 {
        return Err(Error::UndefinedRatio {
            graph_id: graph.id.clone(),
        });
    }
    let c_max = graph.ensure_c_max()?;
    let circuit = QaoaCircuit::new(&graph)?;
    let (params, trace) = optimize_circuit(&circuit, c_max, init, cfg)?;
    let final_cost = trace.iterates.last().map(|e| e.cost).unwrap_or(f64::NAN);
    Ok(LabeledInstance {
        dataset_id: String::new(),
        instance_id: graph.id.clone(),
        p: params.p(),
        beta: params.beta,
        gamma: params.gamma,
        final_cost,
        approx_ratio: final_cost / c_max as f64,
        init_method: InitMethod::Custom,
        optimizer_iters: trace.iterations(),
        cost_evals: trace.cost_evaluations,
        grad_evals: trace.gradient_evaluations,
        converged: trace.converged,
        graph,
    })
}
