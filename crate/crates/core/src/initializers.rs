//! Starting points for QAOA optimization.
//!
//! Four strategies hand every graph the same vector (linear schedule, TQA with
//! a calibrated time step, batch-optimized parameters, averaged labels); the
//! neural predictor produces a vector per graph.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{encode_upper_triangle, Ensemble, Graph};
use crate::neuralnet::MlpModel;
use crate::optimizer::{bfgs_maximize_with, Objective, OptimizerConfig};
use crate::pipeline::LabeledInstance;
use crate::simulator::{QaoaCircuit, QaoaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Linear,
    Tqa,
    /// Per-graph TQA grid search, used when labeling datasets.
    FullTqa,
    Batches,
    Average,
    #[serde(rename = "nn")]
    NeuralNet,
    Custom,
}

impl InitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMethod::Linear => "linear",
            InitMethod::Tqa => "tqa",
            InitMethod::FullTqa => "full_tqa",
            InitMethod::Batches => "batches",
            InitMethod::Average => "average",
            InitMethod::NeuralNet => "nn",
            InitMethod::Custom => "custom",
        }
    }
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "linear" => InitMethod::Linear,
            "tqa" => InitMethod::Tqa,
            "full_tqa" => InitMethod::FullTqa,
            "batches" => InitMethod::Batches,
            "average" => InitMethod::Average,
            "nn" => InitMethod::NeuralNet,
            "custom" => InitMethod::Custom,
            other => return Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        })
    }
}

/// Linear ramp: beta falls from (pi/4)(1 - 1/p) to pi/(4p), gamma rises from
/// pi/p to pi(1 - 1/p). At p = 1 both endpoint pairs collapse, so the
/// midpoint (pi/8, pi/2) is used.
pub fn linear_init(p: usize) -> QaoaParams {
    assert!(p >= 1, "layer count must be positive");
    if p == 1 {
        return QaoaParams {
            beta: vec![PI / 8.0],
            gamma: vec![FRAC_PI_2],
        };
    }
    let pf = p as f64;
    // (p - 1) * (pi / p) rather than pi * (1 - 1/p): equal in exact arithmetic,
    // and it lands on the rounded value of 2 pi / 3 etc.
    let (b0, b1) = ((pf - 1.0) * (PI / (4.0 * pf)), PI / (4.0 * pf));
    let (g0, g1) = (PI / pf, (pf - 1.0) * (PI / pf));
    let lerp = |a: f64, b: f64, l: usize| match l {
        0 => a,
        l if l == p - 1 => b,
        l => (a * (p - 1 - l) as f64 + b * l as f64) / (pf - 1.0),
    };
    QaoaParams {
        beta: (0..p).map(|l| lerp(b0, b1, l)).collect(),
        gamma: (0..p).map(|l| lerp(g0, g1, l)).collect(),
    }
}

/// Trotterized-annealing schedule `beta_l = (1 - l/p) dt`, `gamma_l = (l/p) dt`, `l = 1..p`.
pub fn tqa_init(p: usize, dt: f64) -> QaoaParams {
    assert!(p >= 1, "layer count must be positive");
    let pf = p as f64;
    QaoaParams {
        beta: (1..=p).map(|l| (1.0 - l as f64 / pf) * dt).collect(),
        gamma: (1..=p).map(|l| l as f64 / pf * dt).collect(),
    }
}

/// `{0.1, 0.2, ..., 2.0}`
pub fn default_dt_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 10.0).collect()
}

/// Grid point with the highest zeroth-iteration cost; ties go to the smaller `dt`.
pub fn best_tqa_dt(circuit: &QaoaCircuit, p: usize, grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty dt grid".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &dt in grid {
        let cost = circuit.expectation(&tqa_init(p, dt));
        best = match best {
            Some((bdt, bc)) if bc > cost || (bc == cost && bdt <= dt) => Some((bdt, bc)),
            _ => Some((dt, cost)),
        };
    }
    Ok(best.expect("grid is non-empty"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDt {
    pub graph_id: String,
    pub dt: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TqaCalibration {
    pub dt_star: f64,
    pub per_graph_best: Vec<GraphDt>,
    pub grid: Vec<f64>,
    pub p: usize,
    pub ensemble: Ensemble,
}

/// Averages each training graph's best grid `dt` into a single shared `dt*`.
pub fn calibrate_tqa_dt(training: &[Graph], p: usize, grid: &[f64]) -> Result<TqaCalibration> {
    if training.is_empty() || grid.is_empty() || p == 0 {
        return Err(Error::InvalidArgument(
            "TQA calibration needs graphs, a dt grid and p >= 1".into(),
        ));
    }
    let per_graph_best = training
        .par_iter()
        .map(|g| {
            let circuit = QaoaCircuit::new(g)?;
            let (dt, cost) = best_tqa_dt(&circuit, p, grid)?;
            Ok(GraphDt {
                graph_id: g.id.clone(),
                dt,
                cost,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // sum sorted values so the mean is independent of training order
    let mut dts: Vec<f64> = per_graph_best.iter().map(|b| b.dt).collect();
    dts.sort_by(f64::total_cmp);
    let dt_star = dts.iter().sum::<f64>() / dts.len() as f64;
    Ok(TqaCalibration {
        dt_star,
        per_graph_best,
        grid: grid.to_vec(),
        p,
        ensemble: training[0].ensemble(),
    })
}

/// A parameter vector shared by every test graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedInit {
    pub params: QaoaParams,
    pub method: InitMethod,
    pub provenance: String,
}

struct BatchObjective {
    circuits: Vec<(QaoaCircuit, f64)>,
}

impl Objective for BatchObjective {
    fn value(&mut self, x: &[f64]) -> f64 {
        self.value_and_gradient(x).0
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        let Ok(params) = QaoaParams::from_slice(x) else {
            return (f64::NAN, vec![f64::NAN; x.len()]);
        };
        let terms: Vec<(f64, Vec<f64>)> = self
            .circuits
            .par_iter()
            .map(|(c, cmax)| {
                let (f, g) = c.value_and_gradient(&params);
                (f / cmax, g.into_iter().map(|v| v / cmax).collect())
            })
            .collect();
        let m = terms.len() as f64;
        let mut value = 0.0;
        let mut grad = vec![0.0; x.len()];
        for (f, g) in terms {
            value += f;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        (value / m, grad.into_iter().map(|v| v / m).collect())
    }
}

/// Batch-mean approximation ratio of `params` over `graphs`.
pub fn batch_mean_ratio(graphs: &[Graph], params: &QaoaParams) -> Result<f64> {
    let mut obj = batch_objective(graphs)?;
    Ok(obj.value(&params.to_vec()))
}

fn batch_objective(training: &[Graph]) -> Result<BatchObjective> {
    if training.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    let circuits = training
        .par_iter()
        .map(|g| {
            if g.num_edges() == 0 {
                return Err(Error::UndefinedRatio { graph_id: g.id.clone() });
            }
            let c = QaoaCircuit::new(g)?;
            let cmax = match g.c_max() {
                Some(c) => c,
                None => crate::graph::max_cut_bruteforce(g)?.c_max,
            };
            Ok((c, cmax as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchObjective { circuits })
}

/// One parameter vector maximizing the mean approximation ratio over a batch.
pub fn batches_fit(training: &[Graph], p: usize, cfg: &OptimizerConfig, start: &QaoaParams) -> Result<FixedInit> {
    if start.p() != p {
        return Err(Error::DimensionMismatch {
            what: "batch start parameters",
            expected: p,
            found: start.p(),
        });
    }
    let mut obj = batch_objective(training)?;
    let out = bfgs_maximize_with(&mut obj, &start.to_vec(), cfg)?;
    Ok(FixedInit {
        params: QaoaParams::from_slice(&out.x)?,
        method: InitMethod::Batches,
        provenance: format!(
            "batch-optimized over {} graphs, mean ratio {:.6} after {} iterations",
            training.len(),
            out.value,
            out.trace.iterations()
        ),
    })
}

/// Component-wise mean of optimized labels.
pub fn average_init(labeled: &[LabeledInstance]) -> Result<FixedInit> {
    let first = labeled
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot average an empty label set".into()))?;
    let p = first.p;
    if labeled.iter().any(|r| r.beta.len() != p || r.gamma.len() != p) {
        return Err(Error::InvalidArgument("labels have mixed layer counts".into()));
    }
    let m = labeled.len() as f64;
    let mean = |pick: fn(&LabeledInstance) -> &[f64]| -> Vec<f64> {
        (0..p)
            .map(|l| labeled.iter().map(|r| pick(r)[l]).sum::<f64>() / m)
            .collect()
    };
    Ok(FixedInit {
        params: QaoaParams {
            beta: mean(|r| &r.beta),
            gamma: mean(|r| &r.gamma),
        },
        method: InitMethod::Average,
        provenance: format!("mean of {} optimized labels", labeled.len()),
    })
}

/// Predicted parameters for `g`: first `p` outputs are beta, the rest gamma.
pub fn nn_init(model: &MlpModel, g: &Graph) -> Result<QaoaParams> {
    let expected = model.input_dim();
    let found = g.n() * (g.n() - 1) / 2;
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: "model input vs graph encoding",
            expected,
            found,
        });
    }
    let out = model.forward(&encode_upper_triangle(g))?;
    QaoaParams::from_slice(&out)
}

/// Reduces beta into [0, pi/2) and gamma into [0, 2 pi).
pub fn canonicalize(params: &QaoaParams) -> QaoaParams {
    let wrap = |x: f64, period: f64| {
        let r = x.rem_euclid(period);
        // rem_euclid can round up to exactly `period` for tiny negative inputs
        if r >= period {
            0.0
        } else {
            r
        }
    };
    QaoaParams {
        beta: params.beta.iter().map(|&b| wrap(b, FRAC_PI_2)).collect(),
        gamma: params.gamma.iter().map(|&g| wrap(g, 2.0 * PI)).collect(),
    }
}

/// An initialization strategy usable by the benchmark harness.
#[derive(Debug, Clone)]
pub enum Initializer {
    Linear,
    Tqa { dt: f64 },
    Fixed(FixedInit),
    Neural(Arc<MlpModel>),
}

impl Initializer {
    pub fn method(&self) -> InitMethod {
        match self {
            Initializer::Linear => InitMethod::Linear,
            Initializer::Tqa { .. } => InitMethod::Tqa,
            Initializer::Fixed(f) => f.method,
            Initializer::Neural(_) => InitMethod::NeuralNet,
        }
    }

    pub fn is_personalized(&self) -> bool {
        matches!(self, Initializer::Neural(_))
    }

    pub fn init(&self, g: &Graph, p: usize) -> Result<QaoaParams> {
        let params = match self {
            Initializer::Linear => linear_init(p),
            Initializer::Tqa { dt } => tqa_init(p, *dt),
            Initializer::Fixed(f) => f.params.clone(),
            Initializer::Neural(model) => nn_init(model, g)?,
        };
        if params.p() != p {
            return Err(Error::DimensionMismatch {
                what: "initializer layer count",
                expected: p,
                found: params.p(),
            });
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_er_random;
    use crate::neuralnet::MlpModel;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn linear_schedules() {
        let p2 = linear_init(2);
        assert_eq!(p2.beta, [FRAC_PI_8, FRAC_PI_8]);
        assert_eq!(p2.gamma, [FRAC_PI_2, FRAC_PI_2]);
        let p3 = linear_init(3);
        assert_eq!(p3.beta, [PI / 6.0, PI / 8.0, PI / 12.0]);
        assert_eq!(p3.gamma, [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0]);
        let p1 = linear_init(1);
        assert_eq!(p1.beta, vec![FRAC_PI_8]);
        assert_eq!(p1.gamma, vec![FRAC_PI_2]);
        for p in 2..9 {
            let l = linear_init(p);
            let pf = p as f64;
            assert_eq!(l.beta[0], (pf - 1.0) * (PI / (4.0 * pf)));
            assert_eq!(l.beta[p - 1], PI / (4.0 * pf));
            assert_eq!(l.gamma[0], PI / pf);
            assert_eq!(l.gamma[p - 1], (pf - 1.0) * (PI / pf));
            assert!((l.beta[0] - FRAC_PI_4 * (1.0 - 1.0 / pf)).abs() < 1e-15);
            assert!((l.gamma[p - 1] - PI * (1.0 - 1.0 / pf)).abs() < 1e-15);
        }
    }

    #[test]
    fn tqa_schedules() {
        let t = tqa_init(2, 0.8);
        assert_eq!((t.beta, t.gamma), (vec![0.4, 0.0], vec![0.4, 0.8]));
        let t = tqa_init(4, 1.0);
        assert_eq!(t.beta, vec![0.75, 0.5, 0.25, 0.0]);
        assert_eq!(t.gamma, vec![0.25, 0.5, 0.75, 1.0]);
        let t = tqa_init(1, 0.5);
        assert_eq!((t.beta, t.gamma), (vec![0.0], vec![0.5]));
        for p in 1..8 {
            for dt in [0.1, 0.73, 1.9] {
                let t = tqa_init(p, dt);
                assert_eq!(t.beta[p - 1], 0.0);
                assert_eq!(t.gamma[p - 1], dt);
            }
        }
    }

    fn graphs(count: u64, n: usize, seed: u64) -> Vec<Graph> {
        (0..count)
            .map(|i| {
                gen_er_random(n, 0.3, 0.9, seed * 1000 + i)
                    .unwrap()
                    .with_id(format!("g{i}"))
            })
            .filter(|g| g.num_edges() > 0)
            .collect()
    }

    #[test]
    fn calibration_basics() {
        let gs = graphs(6, 6, 1);
        let c = calibrate_tqa_dt(&gs, 2, &[0.7]).unwrap();
        assert!((c.dt_star - 0.7).abs() < 1e-15);
        let same = vec![gs[0].clone(); 4];
        let c = calibrate_tqa_dt(&same, 2, &default_dt_grid()).unwrap();
        assert!((c.dt_star - c.per_graph_best[0].dt).abs() < 1e-15);
        assert!(calibrate_tqa_dt(&[], 2, &[0.1]).is_err());
        assert!(calibrate_tqa_dt(&gs, 2, &[]).is_err());
    }

    #[test]
    fn calibration_matches_exhaustive_recomputation() {
        let gs = graphs(10, 8, 2);
        let grid = default_dt_grid();
        let c = calibrate_tqa_dt(&gs, 2, &grid).unwrap();
        let again = calibrate_tqa_dt(&gs, 2, &grid).unwrap();
        assert_eq!(c, again);
        assert!(c.dt_star >= 0.1 && c.dt_star <= 2.0);
        let mut reversed = gs.clone();
        reversed.reverse();
        assert_eq!(calibrate_tqa_dt(&reversed, 2, &grid).unwrap().dt_star, c.dt_star);
        let mut total = 0.0;
        for (g, best) in gs.iter().zip(&c.per_graph_best) {
            // independent argmax over the grid through the public cost routine
            let scores: Vec<f64> = grid
                .iter()
                .map(|&dt| crate::simulator::cost_expectation(g, &tqa_init(2, dt)).unwrap())
                .collect();
            let top = scores.iter().cloned().fold(f64::MIN, f64::max);
            let first = grid[scores.iter().position(|&s| s == top).unwrap()];
            assert_eq!(best.dt, first);
            assert!(grid.contains(&best.dt));
            total += first;
        }
        assert!((c.dt_star - total / gs.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn batches_single_graph_matches_instance_optimization() {
        let gs = graphs(3, 6, 3);
        let cfg = OptimizerConfig::default();
        let start = tqa_init(2, 0.9);
        let fit = batches_fit(&gs[..1], 2, &cfg, &start).unwrap();
        let rec = crate::optimizer::optimize_instance(&gs[0], &start, &cfg).unwrap();
        let f_batch = crate::simulator::cost_expectation(&gs[0], &fit.params).unwrap();
        assert!((f_batch - rec.final_cost).abs() < 1e-6);

        let doubled = vec![gs[0].clone(), gs[0].clone()];
        let fit2 = batches_fit(&doubled, 2, &cfg, &start).unwrap();
        let f2 = crate::simulator::cost_expectation(&gs[0], &fit2.params).unwrap();
        assert!((f2 - f_batch).abs() < 1e-6);
    }

    #[test]
    fn batches_ascend_and_reject_edgeless() {
        let gs = graphs(8, 7, 4);
        let start = tqa_init(2, 0.5);
        let fit = batches_fit(&gs, 2, &OptimizerConfig::default(), &start).unwrap();
        assert_eq!(fit.method, InitMethod::Batches);
        assert!(batch_mean_ratio(&gs, &fit.params).unwrap() >= batch_mean_ratio(&gs, &start).unwrap());
        let mut bad = gs.clone();
        bad.push(Graph::from_edges(7, []).unwrap().with_id("empty"));
        match batches_fit(&bad, 2, &OptimizerConfig::default(), &start) {
            Err(Error::UndefinedRatio { graph_id }) => assert_eq!(graph_id, "empty"),
            other => panic!("expected undefined ratio, got {other:?}"),
        }
    }

    fn label(beta: Vec<f64>, gamma: Vec<f64>) -> LabeledInstance {
        let mut r = LabeledInstance::example();
        r.p = beta.len();
        r.beta = beta;
        r.gamma = gamma;
        r
    }

    #[test]
    fn averaging() {
        let v = label(vec![0.3, 0.2], vec![0.9, 1.1]);
        let avg = average_init(&[v.clone(), v.clone(), v.clone()]).unwrap();
        assert!(close(&avg.params.beta, &v.beta) && close(&avg.params.gamma, &v.gamma));
        let avg = average_init(&[label(vec![0.1], vec![1.0]), label(vec![0.3], vec![2.0])]).unwrap();
        assert!((avg.params.beta[0] - 0.2).abs() < 1e-15);
        assert!((avg.params.gamma[0] - 1.5).abs() < 1e-15);
        assert!(average_init(&[]).is_err());
        assert!(average_init(&[label(vec![0.1], vec![1.0]), label(vec![0.1, 0.2], vec![1.0, 2.0])]).is_err());
    }

    #[test]
    fn neural_init_uses_output_bias_for_zero_weights() {
        let mut m = MlpModel::zeros(6, 100, 2);
        m.b2 = vec![0.1, 0.2, 0.3, 0.4];
        let a = nn_init(&m, &gen_er_random(4, 0.3, 0.9, 1).unwrap()).unwrap();
        let b = nn_init(&m, &gen_er_random(4, 0.3, 0.9, 2).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.beta, vec![0.1, 0.2]);
        assert_eq!(a.gamma, vec![0.3, 0.4]);
        assert!(matches!(
            nn_init(&m, &Graph::complete(5).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn canonical_domain() {
        let p = QaoaParams::new(vec![0.3], vec![1.0]).unwrap();
        assert_eq!(canonicalize(&p), p);
        let c = canonicalize(&QaoaParams::new(vec![FRAC_PI_2 + 0.1], vec![2.0 * PI + 0.5]).unwrap());
        assert!((c.beta[0] - 0.1).abs() < 1e-12 && (c.gamma[0] - 0.5).abs() < 1e-12);
        let neg = canonicalize(&QaoaParams::new(vec![-1e-18], vec![-7.0]).unwrap());
        assert!(neg.beta[0] >= 0.0 && neg.beta[0] < FRAC_PI_2);
        assert!(neg.gamma[0] >= 0.0 && neg.gamma[0] < 2.0 * PI);
    }

    #[test]
    fn canonicalization_preserves_cost_and_is_idempotent() {
        for seed in 0..20u64 {
            let g = gen_er_random(6, 0.3, 0.9, seed).unwrap();
            let x: Vec<f64> = (0..4)
                .map(|i| ((seed * 31 + i * 17) % 97) as f64 * 0.21 - 9.0)
                .collect();
            let p = QaoaParams::from_slice(&x).unwrap();
            let c = canonicalize(&p);
            assert_eq!(canonicalize(&c), c);
            let f = crate::simulator::cost_expectation(&g, &p).unwrap();
            let fc = crate::simulator::cost_expectation(&g, &c).unwrap();
            assert!((f - fc).abs() < 1e-10);
        }
    }

    #[test]
    fn method_tags_round_trip() {
        for m in [
            InitMethod::Linear,
            InitMethod::Tqa,
            InitMethod::FullTqa,
            InitMethod::Batches,
            InitMethod::Average,
            InitMethod::NeuralNet,
            InitMethod::Custom,
        ] {
            assert_eq!(m.as_str().parse::<InitMethod>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("random".parse::<InitMethod>().is_err());
    }
}
