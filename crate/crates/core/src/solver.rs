//! The optimization loop: shadow (or exact) cost estimates, Adam with
//! parameter-shift gradients or a Powell direction-set search, and the
//! trace-distance, `γ` and plateau terminators.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzCircuit, DEFAULT_INIT_SIGMA};
use crate::cost::{cost_from, termination_gamma, CostTermTable, Observables, PREPROCESS_TOL};
use crate::error::{invalid, Error, Result};
use crate::problems::LinearProblem;
use crate::shadow::{default_batches, shadow_size, BinnedShadow};
use crate::state::StateVector;

/// `sqrt(1 − |⟨a|b⟩|²)` for normalized pure states.
pub fn trace_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok((1.0 - fidelity(a, b)?).max(0.0).sqrt())
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Adam,
    Powell,
}

impl FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(Optimizer::Adam),
            "powell" => Ok(Optimizer::Powell),
            other => Err(invalid(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// How `μ` and `ω` are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Fresh classical shadow per evaluation.
    Shadow,
    /// Dense expectation values.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Terminator {
    /// Stop once the estimated cost drops to `γ(n, κ, eps)`.
    Gamma { eps: f64, kappa: f64 },
    /// Stop once the trace distance to the dense solution is `≤ eps`.
    TraceDistance { eps: f64 },
    /// Stop when the best recorded cost improves by less than `rel` over
    /// `window` iterations.
    CostPlateau { window: usize, rel: f64 },
}

/// Piecewise-constant shadow precision keyed by the first iteration of each stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule(Vec<(usize, f64)>);

impl EpsSchedule {
    pub fn constant(eps: f64) -> Result<Self> {
        Self::new(vec![(0, eps)])
    }

    pub fn new(mut stages: Vec<(usize, f64)>) -> Result<Self> {
        if stages.is_empty() {
            return Err(invalid("empty eps schedule"));
        }
        stages.sort_by_key(|s| s.0);
        if stages[0].0 != 0 {
            return Err(invalid("eps schedule must start at iteration 0"));
        }
        for w in stages.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid(format!("iteration {} appears twice in the schedule", w[0].0)));
            }
        }
        if let Some(&(_, e)) = stages.iter().find(|s| !(s.1 > 0.0 && s.1 <= 1.0)) {
            return Err(invalid(format!("eps {e} outside (0, 1]")));
        }
        Ok(EpsSchedule(stages))
    }

    pub fn at(&self, iteration: usize) -> f64 {
        self.0
            .iter()
            .rev()
            .find(|s| s.0 <= iteration)
            .map(|s| s.1)
            .unwrap_or(self.0[0].1)
    }

    pub fn stages(&self) -> &[(usize, f64)] {
        &self.0
    }
}

impl FromStr for EpsSchedule {
    type Err = Error;

    /// `0.01` or `0:0.1,250:0.01`.
    fn from_str(s: &str) -> Result<Self> {
        if !s.contains(':') {
            let e = s
                .trim()
                .parse::<f64>()
                .map_err(|e| invalid(format!("bad eps {s:?}: {e}")))?;
            return Self::constant(e);
        }
        let stages = s
            .split(',')
            .map(|part| {
                let (it, e) = part
                    .split_once(':')
                    .ok_or_else(|| invalid(format!("schedule stage {part:?} is not ITER:EPS")))?;
                let it = it.trim().parse::<usize>().map_err(|e| invalid(format!("stage {part:?}: {e}")))?;
                let e = e.trim().parse::<f64>().map_err(|e| invalid(format!("stage {part:?}: {e}")))?;
                Ok((it, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(stages)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub optimizer: Optimizer,
    pub schedule: EpsSchedule,
    pub shadow_constant: f64,
    pub learning_rate: f64,
    pub lr_floor: f64,
    /// Iterations without a 1% improvement of the best exact cost before
    /// the learning rate is divided by ten.
    pub lr_window: usize,
    pub max_iterations: usize,
    /// Cost-evaluation budget, gradients counting `2·param_count` each.
    pub max_evaluations: Option<usize>,
    pub termination: Terminator,
    pub cost_mode: EvalMode,
    pub gradient_mode: EvalMode,
    pub preprocess: bool,
    pub init_sigma: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            optimizer: Optimizer::Adam,
            schedule: EpsSchedule(vec![(0, 0.01)]),
            shadow_constant: 1.0,
            learning_rate: 0.1,
            lr_floor: 0.001,
            lr_window: 50,
            max_iterations: 1000,
            max_evaluations: None,
            termination: Terminator::TraceDistance { eps: 0.01 },
            cost_mode: EvalMode::Shadow,
            gradient_mode: EvalMode::Shadow,
            preprocess: true,
            init_sigma: DEFAULT_INIT_SIGMA,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.lr_floor > 0.0) || self.lr_floor > self.learning_rate {
            return Err(invalid(format!(
                "need 0 < lr_floor ≤ learning_rate, got {} and {}",
                self.lr_floor, self.learning_rate
            )));
        }
        if !(self.shadow_constant > 0.0) {
            return Err(invalid("shadow constant must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        match self.termination {
            Terminator::Gamma { eps, kappa } if !(eps > 0.0 && eps <= 1.0 && kappa >= 1.0) => {
                Err(invalid("gamma terminator needs eps in (0, 1] and kappa ≥ 1"))
            }
            Terminator::TraceDistance { eps } if !(eps > 0.0 && eps <= 1.0) => {
                Err(invalid("trace-distance terminator needs eps in (0, 1]"))
            }
            Terminator::CostPlateau { window, .. } if window == 0 => Err(invalid("plateau window must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub evaluations: usize,
    /// The cost the optimizer saw (an estimate in shadow mode).
    pub cost: f64,
    pub exact_cost: f64,
    pub eps_shadow: f64,
    pub budget: u64,
    pub cumulative_circuits: u128,
    pub trace_distance: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str =
        "iteration,evaluations,cost,exact_cost,eps_shadow,budget,cumulative_circuits,trace_distance";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:?},{:?},{:?},{},{},{:?}",
            self.iteration,
            self.evaluations,
            self.cost,
            self.exact_cost,
            self.eps_shadow,
            self.budget,
            self.cumulative_circuits,
            self.trace_distance
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub params: Vec<f64>,
    pub state: StateVector,
    pub trace: Vec<TraceRow>,
    pub trace_distance_final: f64,
    pub fidelity_final: f64,
    pub exact_cost_final: f64,
    pub iterations: usize,
    /// Cost evaluations including `2·param_count` per gradient.
    pub evaluations: usize,
    pub gradient_evaluations: usize,
    pub converged: bool,
    /// Set when the run ended on an error such as a vanishing estimated `ω`.
    pub failure: Option<String>,
}

impl SolveResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from(TraceRow::CSV_HEADER);
        s.push('\n');
        for r in &self.trace {
            s.push_str(&r.to_csv());
            s.push('\n');
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "params": self.params,
            "trace_distance": self.trace_distance_final,
            "fidelity": self.fidelity_final,
            "exact_cost": self.exact_cost_final,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "gradient_evaluations": self.gradient_evaluations,
            "cumulative_circuits": self.trace.last().map(|r| r.cumulative_circuits.to_string()),
            "converged": self.converged,
            "failure": self.failure,
        })
    }
}

/// The RNG for evaluation number `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `μ`/`ω` oracle over a fixed ansatz, exact or from fresh shadows.
pub struct Evaluator<'a> {
    obs: &'a Observables,
    circuit: &'a AnsatzCircuit,
    seed: u64,
    m: usize,
    k: usize,
    batches: usize,
    constant: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(obs: &'a Observables, circuit: &'a AnsatzCircuit, seed: u64, constant: f64) -> Result<Self> {
        if obs.n != circuit.num_qubits() {
            return Err(Error::Dimension {
                expected: obs.n,
                found: circuit.num_qubits(),
            });
        }
        let m = obs.estimated_count().max(2);
        Ok(Evaluator {
            obs,
            circuit,
            seed,
            m,
            k: obs.max_locality().max(1),
            batches: default_batches(m),
            constant,
        })
    }

    /// Snapshots per shadow at precision `eps`.
    pub fn budget(&self, eps: f64) -> Result<u64> {
        Ok(shadow_size(self.m, self.k, eps, self.constant)?.max(self.batches as u64))
    }

    /// Raw `(μ, ω)` at `params`; `stream` selects the shadow randomness.
    pub fn mu_omega(&self, params: &[f64], mode: EvalMode, eps: f64, stream: u64) -> Result<(f64, f64)> {
        let x = self.circuit.prepare_state(params)?;
        let values = match mode {
            EvalMode::Exact => self.obs.exact_values(&x)?,
            EvalMode::Shadow => {
                let mut rng = stream_rng(self.seed, stream);
                let shadow = BinnedShadow::sample(&x, self.budget(eps)?, self.batches, &mut rng)?;
                self.obs
                    .strings
                    .iter()
                    .map(|s| crate::shadow::PauliEstimator::estimate(&shadow, s))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(self.obs.combine(&values))
    }

    /// `C_L` at `params`, failing on a non-positive `ω`.
    pub fn cost(&self, params: &[f64], mode: EvalMode, eps: f64, stream: u64) -> Result<(f64, f64, f64)> {
        let (mu, omega) = self.mu_omega(params, mode, eps, stream)?;
        if omega <= 0.0 || !omega.is_finite() {
            return Err(Error::UnstableDenominator(omega));
        }
        Ok((cost_from(self.obs.n, mu, omega), mu, omega))
    }

    /// Parameter-shift gradient of `C_L` by the quotient rule. `(mu, omega)`
    /// are the values at `params`; shifted evaluations use streams
    /// `first_stream + 2j` and `first_stream + 2j + 1`.
    pub fn gradient(
        &self,
        params: &[f64],
        mu: f64,
        omega: f64,
        mode: EvalMode,
        eps: f64,
        first_stream: u64,
    ) -> Result<Vec<f64>> {
        if omega <= 0.0 {
            return Err(Error::UnstableDenominator(omega));
        }
        let n = self.obs.n as f64;
        let half_pi = std::f64::consts::FRAC_PI_2;
        (0..params.len())
            .into_par_iter()
            .map(|j| {
                let mut p = params.to_vec();
                p[j] = params[j] + half_pi;
                let (mu_p, om_p) = self.mu_omega(&p, mode, eps, first_stream + 2 * j as u64)?;
                p[j] = params[j] - half_pi;
                let (mu_m, om_m) = self.mu_omega(&p, mode, eps, first_stream + 2 * j as u64 + 1)?;
                let dmu = 0.5 * (mu_p - mu_m);
                let dom = 0.5 * (om_p - om_m);
                Ok(-(dmu * omega - mu * dom) / (2.0 * n * omega * omega))
            })
            .collect()
    }
}

/// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(dim: usize) -> Self {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// One Adam update from `state`, returning the new parameters.
pub fn adam_step(state: &mut Adam, params: &[f64], grad: &[f64], lr: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    state.step(&mut p, grad, lr);
    p
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowellConfig {
    /// Stop when a full sweep improves `f` by less than this relative amount.
    pub ftol: f64,
    /// Line-search bracket tolerance.
    pub xtol: f64,
    pub max_evaluations: usize,
    /// Re-evaluate `f` at the current point before each line search. Needed
    /// when `f` is noisy: a stale minimum of many noisy samples is biased low
    /// and would block every later step.
    pub refresh: bool,
}

impl Default for PowellConfig {
    fn default() -> Self {
        PowellConfig {
            ftol: 1e-10,
            xtol: 1e-3,
            max_evaluations: 5000,
            refresh: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowellStatus {
    Converged,
    Stopped,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowellOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evaluations: usize,
    pub status: PowellStatus,
}

struct Counted<'f> {
    f: &'f mut dyn FnMut(&[f64]) -> Result<f64>,
    evals: usize,
    max: usize,
}

impl Counted<'_> {
    fn call(&mut self, x: &[f64]) -> Result<f64> {
        if self.evals >= self.max {
            return Err(Error::BudgetExhausted(self.evals));
        }
        self.evals += 1;
        (self.f)(x)
    }

    fn along(&mut self, x: &[f64], d: &[f64], t: f64) -> Result<f64> {
        let p: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        self.call(&p)
    }
}

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

/// Bracket a minimum of `g(t)` starting from `t = 0, 1`.
fn bracket(g: &mut dyn FnMut(f64) -> Result<f64>, f0: f64) -> Result<(f64, f64, f64, f64, f64, f64)> {
    let (mut a, mut fa) = (0.0, f0);
    let (mut b, mut fb) = (1.0, g(1.0)?);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = g(c)?;
    let mut guard = 0;
    while fb > fc && guard < 50 {
        guard += 1;
        let (na, nfa) = (b, fb);
        b = c;
        fb = fc;
        a = na;
        fa = nfa;
        c = b + GOLD * (b - a);
        fc = g(c)?;
    }
    Ok((a, b, c, fa, fb, fc))
}

/// Brent minimization on a bracket `a < b < c` (in either order).
fn brent(
    g: &mut dyn FnMut(f64) -> Result<f64>,
    (a, b, c): (f64, f64, f64),
    fb: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..100 {
        let xm = 0.5 * (lo + hi);
        let tol1 = tol * x.abs() + 1e-11;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (lo - x) && p < q * (hi - x) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(u)?;
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

fn line_search(f: &mut Counted, x: &[f64], fx: f64, d: &[f64], xtol: f64) -> Result<(f64, f64)> {
    let mut g = |t: f64| f.along(x, d, t);
    let (a, b, c, _, fb, _) = bracket(&mut g, fx)?;
    let (t, ft) = brent(&mut g, (a, b, c), fb, xtol)?;
    if ft < fx {
        Ok((t, ft))
    } else {
        Ok((0.0, fx))
    }
}

/// Powell's direction-set minimization with Brent line searches.
/// `observe(x, fx)` runs after every line search and returns `true` to stop.
pub fn powell_minimize(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    cfg: &PowellConfig,
    observe: &mut dyn FnMut(&[f64], f64) -> Result<bool>,
) -> Result<PowellOutcome> {
    let dim = x0.len();
    let mut cf = Counted {
        f,
        evals: 0,
        max: cfg.max_evaluations,
    };
    let mut x = x0.to_vec();
    let mut status = PowellStatus::BudgetExhausted;
    let mut fx = match cf.call(&x) {
        Ok(v) => v,
        Err(Error::BudgetExhausted(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let mut dirs: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let result: Result<()> = (|| {
        if dim == 0 {
            status = PowellStatus::Converged;
            return Ok(());
        }
        loop {
            let x_start = x.clone();
            let f_start = fx;
            let mut biggest = 0.0;
            let mut big_idx = 0;
            for (i, d) in dirs.iter().enumerate() {
                if cfg.refresh {
                    fx = cf.call(&x)?;
                }
                let before = fx;
                let (t, ft) = line_search(&mut cf, &x, fx, d, cfg.xtol)?;
                for (xi, di) in x.iter_mut().zip(d) {
                    *xi += t * di;
                }
                fx = ft;
                if before - fx > biggest {
                    biggest = before - fx;
                    big_idx = i;
                }
                if observe(&x, fx)? {
                    status = PowellStatus::Stopped;
                    return Ok(());
                }
            }
            if 2.0 * (f_start - fx) <= cfg.ftol * (f_start.abs() + fx.abs()) + 1e-20 {
                status = PowellStatus::Converged;
                return Ok(());
            }
            let dir: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
            let ext: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
            let f_ext = cf.call(&ext)?;
            if f_start > f_ext {
                let t = 2.0 * (f_start + f_ext - 2.0 * fx) * (f_start - fx - biggest).powi(2)
                    - biggest * (f_start - f_ext).powi(2);
                if t < 0.0 {
                    let (s, fs) = line_search(&mut cf, &x, fx, &dir, cfg.xtol)?;
                    for (xi, di) in x.iter_mut().zip(&dir) {
                        *xi += s * di;
                    }
                    fx = fs;
                    dirs[big_idx] = dirs[dim - 1].clone();
                    dirs[dim - 1] = dir;
                    if observe(&x, fx)? {
                        status = PowellStatus::Stopped;
                        return Ok(());
                    }
                }
            }
        }
    })();
    match result {
        Ok(()) | Err(Error::BudgetExhausted(_)) => Ok(PowellOutcome {
            x,
            fx,
            evaluations: cf.evals,
            status,
        }),
        Err(e) => Err(e),
    }
}

/// [`powell_minimize`] without an observer; running out of evaluations is an error.
pub fn powell_search(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    cfg: &PowellConfig,
) -> Result<PowellOutcome> {
    let out = powell_minimize(f, x0, cfg, &mut |_, _| Ok(false))?;
    if out.status == PowellStatus::BudgetExhausted {
        return Err(Error::BudgetExhausted(out.evaluations));
    }
    Ok(out)
}

/// Builds the cost table used by [`solve`].
pub fn cost_table(problem: &LinearProblem, preprocess: bool) -> Result<CostTermTable> {
    if preprocess {
        CostTermTable::build_preprocessed(&problem.a, &problem.u, PREPROCESS_TOL)
    } else {
        CostTermTable::build(&problem.a, &problem.u)
    }
}

struct Run<'a> {
    problem: &'a LinearProblem,
    cfg: &'a SolverConfig,
    eval: Evaluator<'a>,
    obs: &'a Observables,
    circuit: &'a AnsatzCircuit,
    trace: Vec<TraceRow>,
    evaluations: usize,
    gradient_evaluations: usize,
    circuits: u128,
    stream: u64,
    best_cost: f64,
}

impl Run<'_> {
    fn eps(&self) -> f64 {
        self.cfg.schedule.at(self.trace.len())
    }

    fn next_streams(&mut self, count: u64) -> u64 {
        let s = self.stream;
        self.stream += count;
        s
    }

    fn charge(&mut self, evaluations: usize) -> Result<()> {
        self.evaluations += evaluations;
        self.circuits += evaluations as u128 * self.eval.budget(self.eps())? as u128;
        Ok(())
    }

    fn over_budget(&self) -> bool {
        self.cfg.max_evaluations.is_some_and(|m| self.evaluations >= m)
    }

    /// Appends a trace row and reports whether the terminator fired.
    fn record(&mut self, params: &[f64], cost: f64) -> Result<bool> {
        let x = self.circuit.prepare_state(params)?;
        let exact = self.obs.evaluate_exact(&x).map(|c| c.cost).unwrap_or(f64::NAN);
        let td = trace_distance(&x, &self.problem.exact_solution)?;
        let eps = self.eps();
        self.best_cost = self.best_cost.min(cost);
        self.trace.push(TraceRow {
            iteration: self.trace.len(),
            evaluations: self.evaluations,
            cost,
            exact_cost: exact,
            eps_shadow: eps,
            budget: self.eval.budget(eps)?,
            cumulative_circuits: self.circuits,
            trace_distance: td,
        });
        Ok(match self.cfg.termination {
            Terminator::TraceDistance { eps } => td <= eps,
            Terminator::Gamma { eps, kappa } => cost <= termination_gamma(self.obs.n, kappa, eps)?,
            Terminator::CostPlateau { window, rel } => {
                let len = self.trace.len();
                len > window && {
                    let old = self.trace[..len - window]
                        .iter()
                        .map(|r| r.cost)
                        .fold(f64::INFINITY, f64::min);
                    old - self.best_cost <= rel * old.abs()
                }
            }
        })
    }
}

/// Runs one seeded optimization of `problem` over `circuit`. Budget
/// exhaustion and estimator failures are reported in the result.
pub fn solve(problem: &LinearProblem, circuit: &AnsatzCircuit, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if circuit.num_qubits() != problem.num_qubits() {
        return Err(Error::Dimension {
            expected: problem.num_qubits(),
            found: circuit.num_qubits(),
        });
    }
    let table = cost_table(problem, cfg.preprocess)?;
    let obs = table.observables();
    solve_with(problem, circuit, cfg, &obs)
}

/// [`solve`] with a prebuilt observable set.
pub fn solve_with(
    problem: &LinearProblem,
    circuit: &AnsatzCircuit,
    cfg: &SolverConfig,
    obs: &Observables,
) -> Result<SolveResult> {
    cfg.validate()?;
    let mut init_rng = stream_rng(cfg.seed, 0);
    let params0 = circuit.init_params(&mut init_rng, cfg.init_sigma)?;
    let mut run = Run {
        problem,
        cfg,
        eval: Evaluator::new(obs, circuit, cfg.seed, cfg.shadow_constant)?,
        obs,
        circuit,
        trace: Vec::new(),
        evaluations: 0,
        gradient_evaluations: 0,
        circuits: 0,
        stream: 1,
        best_cost: f64::INFINITY,
    };
    let (params, converged, failure) = match cfg.optimizer {
        Optimizer::Adam => run_adam(&mut run, params0),
        Optimizer::Powell => run_powell(&mut run, params0),
    };
    let state = circuit.prepare_state(&params)?;
    let fid = fidelity(&state, &problem.exact_solution)?;
    let exact_cost_final = obs.evaluate_exact(&state).map(|c| c.cost).unwrap_or(f64::NAN);
    Ok(SolveResult {
        trace_distance_final: trace_distance(&state, &problem.exact_solution)?,
        fidelity_final: fid,
        exact_cost_final,
        params,
        state,
        iterations: run.trace.len(),
        evaluations: run.evaluations,
        gradient_evaluations: run.gradient_evaluations,
        converged,
        failure,
        trace: run.trace,
    })
}

fn run_adam(run: &mut Run, mut params: Vec<f64>) -> (Vec<f64>, bool, Option<String>) {
    let cfg = run.cfg;
    let mut adam = Adam::new(params.len());
    let mut lr = cfg.learning_rate;
    let mut window_start = 0usize;
    let mut window_best = f64::INFINITY;
    let mut best_exact = f64::INFINITY;
    let step = |run: &mut Run, params: &mut Vec<f64>, adam: &mut Adam, lr: f64| -> Result<bool> {
        let eps = run.eps();
        let s = run.next_streams(1);
        let (cost, mu, omega) = run.eval.cost(params, cfg.cost_mode, eps, s)?;
        run.charge(1)?;
        if run.record(params, cost)? {
            return Ok(true);
        }
        if run.over_budget() || run.trace.len() >= cfg.max_iterations {
            return Ok(false);
        }
        let (mu, omega) = if cfg.gradient_mode != cfg.cost_mode {
            let s = run.next_streams(1);
            run.eval.mu_omega(params, cfg.gradient_mode, eps, s)?
        } else {
            (mu, omega)
        };
        let s = run.next_streams(2 * params.len() as u64);
        let g = run.eval.gradient(params, mu, omega, cfg.gradient_mode, eps, s)?;
        let ge = 2 * params.len();
        run.gradient_evaluations += ge;
        run.charge(ge)?;
        adam.step(params, &g, lr);
        Ok(false)
    };
    loop {
        match step(run, &mut params, &mut adam, lr) {
            Ok(true) => return (params, true, None),
            Ok(false) => {}
            Err(e) => return (params, false, Some(e.to_string())),
        }
        if run.over_budget() || run.trace.len() >= cfg.max_iterations {
            return (params, false, None);
        }
        let it = run.trace.len();
        let exact = run.trace.last().map(|r| r.exact_cost).unwrap_or(f64::NAN);
        if exact.is_finite() {
            best_exact = best_exact.min(exact);
        }
        if it - window_start >= cfg.lr_window {
            if best_exact > window_best * 0.99 {
                lr = (lr / 10.0).max(cfg.lr_floor);
            }
            window_start = it;
            window_best = best_exact;
        } else if window_best.is_infinite() {
            window_best = best_exact;
        }
    }
}

fn run_powell(run: &mut Run, params: Vec<f64>) -> (Vec<f64>, bool, Option<String>) {
    let cfg = run.cfg;
    let noisy = cfg.cost_mode == EvalMode::Shadow;
    let mut x = params;
    let mut converged = false;
    let run_cell = std::cell::RefCell::new(run);
    loop {
        let remaining = {
            let r = run_cell.borrow();
            cfg.max_evaluations.map_or(usize::MAX, |m| m.saturating_sub(r.evaluations))
        };
        if remaining == 0 {
            return (x, converged, None);
        }
        let pc = PowellConfig {
            max_evaluations: remaining,
            refresh: noisy,
            ..PowellConfig::default()
        };
        let mut f = |p: &[f64]| -> Result<f64> {
            let mut r = run_cell.borrow_mut();
            let eps = r.eps();
            let s = r.next_streams(1);
            let (c, _, _) = r.eval.cost(p, cfg.cost_mode, eps, s)?;
            r.charge(1)?;
            Ok(c)
        };
        let mut last = x.clone();
        let mut observe = |p: &[f64], fx: f64| -> Result<bool> {
            let mut r = run_cell.borrow_mut();
            last = p.to_vec();
            if r.record(p, fx)? {
                converged = true;
                return Ok(true);
            }
            Ok(r.trace.len() >= cfg.max_iterations)
        };
        let out = powell_minimize(&mut f, &x, &pc, &mut observe);
        match out {
            Ok(o) => {
                x = if o.status == PowellStatus::BudgetExhausted { last } else { o.x };
                let r = run_cell.borrow();
                // a converged deterministic search would only repeat itself
                if converged
                    || !noisy
                    || o.status == PowellStatus::BudgetExhausted
                    || r.trace.len() >= cfg.max_iterations
                {
                    return (x, converged, None);
                }
            }
            Err(e) => return (last, false, Some(e.to_string())),
        }
    }
}
