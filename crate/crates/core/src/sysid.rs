//! Simulation and recursive least-squares estimation of the observation
//! matrix `C`, used to measure how well-conditioned the sample Grammian is
//! for a given realization.
//!
//! States follow `z_{t+1} = A·z_t + B·ε_t` from `z_0 = 0` with Gaussian
//! white `ε_t`, and observations are `y_t = C·z_t + v_t`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::givens::OpCounter;
use crate::hin::{AngleVector, HinOperator};
use crate::linalg::{
    cholesky_lower, frobenius_distance, inverse, solve_lower_transposed, solve_lower_triangular,
    Matrix,
};
use crate::pair::InputPair;

/// Recorded trajectory. `states[k]` is `z_{k+1} = A·z_k + B·inputs[k]`
/// (with `z_0 = 0`) and `observations[k]` is the matching `y_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub steps: usize,
    pub seed: u64,
    pub noise_std: f64,
    pub obs_noise_std: f64,
}

impl SimConfig {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            steps,
            seed,
            noise_std: 1.0,
            obs_noise_std: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        for (name, v) in [
            ("noise_std", self.noise_std),
            ("obs_noise_std", self.obs_noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// The two ways of advancing the state.
#[derive(Debug, Clone)]
pub enum Realization {
    /// Matrix-free Givens product.
    Implicit(HinOperator),
    /// Explicit `(A, B)`.
    Dense(InputPair),
}

impl Realization {
    pub fn n(&self) -> usize {
        match self {
            Realization::Implicit(op) => op.n(),
            Realization::Dense(p) => p.n(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Realization::Implicit(op) => op.d(),
            Realization::Dense(p) => p.d(),
        }
    }

    pub fn advance(&self, z: &[f64], eps: &[f64], counter: &mut OpCounter) -> Result<Vec<f64>> {
        match self {
            Realization::Implicit(op) => op.advance(z, eps, counter),
            Realization::Dense(p) => p.advance_dense(z, eps),
        }
    }
}

/// One simulated step: the new state, the input that produced it, and its observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub input: Vec<f64>,
    pub observation: Vec<f64>,
}

/// Streaming simulator. Input noise and observation noise come from two
/// independent ChaCha streams of the same seed, so enabling observation noise
/// leaves the input sequence unchanged.
pub struct Simulator<'a> {
    realization: &'a Realization,
    c: &'a Matrix,
    input_rng: ChaCha8Rng,
    obs_rng: ChaCha8Rng,
    input_noise: Normal<f64>,
    obs_noise: Normal<f64>,
    obs_enabled: bool,
    state: Vec<f64>,
    remaining: usize,
    counter: OpCounter,
}

impl<'a> Simulator<'a> {
    pub fn new(realization: &'a Realization, c: &'a Matrix, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if c.cols() != realization.n() {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, state dimension is {}",
                c.cols(),
                realization.n()
            )));
        }
        let input_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut obs_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        obs_rng.set_stream(1);
        let normal =
            |std: f64| Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()));
        Ok(Self {
            realization,
            c,
            input_rng,
            obs_rng,
            input_noise: normal(cfg.noise_std)?,
            obs_noise: normal(cfg.obs_noise_std)?,
            obs_enabled: cfg.obs_noise_std > 0.0,
            state: vec![0.0; realization.n()],
            remaining: cfg.steps,
            counter: OpCounter::new(),
        })
    }

    /// Operation counts of the state advances so far.
    pub fn counter(&self) -> OpCounter {
        self.counter
    }
}

impl Iterator for Simulator<'_> {
    type Item = Step;

    fn next(&mut self) -> Option<Step> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let d = self.realization.d();
        let input: Vec<f64> = (0..d)
            .map(|_| self.input_noise.sample(&mut self.input_rng))
            .collect();
        let state = self
            .realization
            .advance(&self.state, &input, &mut self.counter)
            .expect("dimensions validated at construction");
        let mut observation = self.c.matvec(&state).expect("C columns validated");
        if self.obs_enabled {
            for y in &mut observation {
                *y += self.obs_noise.sample(&mut self.obs_rng);
            }
        }
        self.state.clone_from(&state);
        Some(Step {
            state,
            input,
            observation,
        })
    }
}

fn collect_trace(sim: Simulator<'_>) -> SimTrace {
    let mut trace = SimTrace {
        states: Vec::new(),
        inputs: Vec::new(),
        observations: Vec::new(),
    };
    for step in sim {
        trace.states.push(step.state);
        trace.inputs.push(step.input);
        trace.observations.push(step.observation);
    }
    trace
}

/// Simulate the HIN realization given by `angles` with the matrix-free operator.
pub fn simulate(angles: &AngleVector, c: &Matrix, cfg: SimConfig) -> Result<SimTrace> {
    let real = Realization::Implicit(HinOperator::new(angles));
    Ok(collect_trace(Simulator::new(&real, c, cfg)?))
}

/// Simulate an explicit pair.
pub fn simulate_dense(pair: &InputPair, c: &Matrix, cfg: SimConfig) -> Result<SimTrace> {
    let real = Realization::Dense(pair.clone());
    Ok(collect_trace(Simulator::new(&real, c, cfg)?))
}

/// Running sample moments `P̂_t = (1/t)·Σ z_i·z_iᵀ` and `d̂_t = (1/t)·Σ z_i·y_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub t: usize,
    pub phat: Matrix,
    pub dhat: Matrix,
}

impl RlsState {
    pub fn new(n: usize, p: usize) -> Self {
        Self {
            t: 0,
            phat: Matrix::zeros(n, n),
            dhat: Matrix::zeros(n, p),
        }
    }

    pub fn update(&mut self, z: &[f64], y: &[f64]) {
        let (n, p) = (self.phat.rows(), self.dhat.cols());
        assert_eq!(z.len(), n, "state length");
        assert_eq!(y.len(), p, "observation length");
        self.t += 1;
        let w = 1.0 / self.t as f64;
        for i in 0..n {
            for j in 0..n {
                let v = self.phat[(i, j)];
                self.phat[(i, j)] = v + (z[i] * z[j] - v) * w;
            }
            for (j, &yj) in y.iter().enumerate() {
                let v = self.dhat[(i, j)];
                self.dhat[(i, j)] = v + (z[i] * yj - v) * w;
            }
        }
    }
}

pub fn rls_accumulate(trace: &SimTrace) -> Result<RlsState> {
    let (first_z, first_y) = match (trace.states.first(), trace.observations.first()) {
        (Some(z), Some(y)) => (z, y),
        _ => return Err(Error::InvalidArgument("empty trace".into())),
    };
    let mut state = RlsState::new(first_z.len(), first_y.len());
    for (z, y) in trace.states.iter().zip(&trace.observations) {
        if z.len() != first_z.len() || y.len() != first_y.len() {
            return Err(Error::DimensionMismatch("ragged trace".into()));
        }
        state.update(z, y);
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlsSolution {
    /// Estimated `C` (p×n).
    pub chat: Matrix,
    /// `(max L_ii / min L_ii)²` from the Cholesky factor of `P̂ + ridge·I`.
    pub cond_estimate: f64,
}

fn pivot_ratio(l: &Matrix) -> f64 {
    let diag = (0..l.rows()).map(|i| l[(i, i)]);
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    (hi / lo).powi(2)
}

/// Cholesky pivot-ratio surrogate for the condition number of an SPD matrix.
pub fn cond_surrogate(p: &Matrix) -> Result<f64> {
    Ok(pivot_ratio(&cholesky_lower(p)?))
}

/// Solve `(P̂ + ridge·I)·Ĉᵀ = d̂` through Cholesky.
pub fn rls_solve(state: &RlsState, ridge: f64) -> Result<RlsSolution> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge = {ridge} must be >= 0"
        )));
    }
    let n = state.phat.rows();
    let mut m = state.phat.clone();
    for i in 0..n {
        m[(i, i)] += ridge;
    }
    let l = cholesky_lower(&m).map_err(|e| match e {
        Error::NotPositiveDefinite { index, pivot } => Error::SingularGrammian { index, pivot },
        other => other,
    })?;
    let y = solve_lower_triangular(&l, &state.dhat)?;
    let x = solve_lower_transposed(&l, &y)?;
    Ok(RlsSolution {
        chat: x.transpose(),
        cond_estimate: pivot_ratio(&l),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    /// Similarity `T` for the comparison realization `(T⁻¹AT, T⁻¹B, C·T)`.
    pub comparison_transform: Option<Matrix>,
    /// Number of log-spaced checkpoints for the Grammian-deviation trajectory.
    pub checkpoints: usize,
    pub ridge: f64,
}

impl ExperimentConfig {
    pub fn new(sim: SimConfig) -> Self {
        Self {
            sim,
            comparison_transform: None,
            checkpoints: 8,
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSample {
    pub t: usize,
    /// `‖P̂_t/σ² − I‖_F`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub cond_estimate: f64,
    /// `‖Ĉ − C‖_F` against the true `C` of the branch's coordinates.
    pub c_error: f64,
    pub grammian_deviation: Vec<DeviationSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditioningReport {
    pub seed: u64,
    pub steps: usize,
    pub noise_std: f64,
    pub hin: BranchReport,
    pub comparison: Option<BranchReport>,
}

fn checkpoints(steps: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count.max(1)).map(|j| (steps >> j).max(1)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn run_branch(real: &Realization, c: &Matrix, cfg: &ExperimentConfig) -> Result<BranchReport> {
    let n = real.n();
    let sigma2 = if cfg.sim.noise_std > 0.0 {
        cfg.sim.noise_std * cfg.sim.noise_std
    } else {
        1.0
    };
    let marks = checkpoints(cfg.sim.steps, cfg.checkpoints);
    let mut next_mark = 0;
    let mut rls = RlsState::new(n, c.rows());
    let mut trajectory = Vec::with_capacity(marks.len());
    for step in Simulator::new(real, c, cfg.sim)? {
        rls.update(&step.state, &step.observation);
        if next_mark < marks.len() && rls.t == marks[next_mark] {
            let dev = frobenius_distance(&rls.phat.scale(1.0 / sigma2), &Matrix::identity(n))?;
            trajectory.push(DeviationSample {
                t: rls.t,
                deviation: dev,
            });
            next_mark += 1;
        }
    }
    let sol = rls_solve(&rls, cfg.ridge)?;
    Ok(BranchReport {
        cond_estimate: sol.cond_estimate,
        c_error: frobenius_distance(&sol.chat, c)?,
        grammian_deviation: trajectory,
    })
}

/// Run the same noise sequence through the HIN realization and, optionally,
/// a similarity-transformed realization of the same system.
pub fn conditioning_experiment(
    angles: &AngleVector,
    c: &Matrix,
    cfg: &ExperimentConfig,
) -> Result<ConditioningReport> {
    if c.cols() != angles.n() {
        return Err(Error::DimensionMismatch(format!(
            "C has {} columns, state dimension is {}",
            c.cols(),
            angles.n()
        )));
    }
    let hin = run_branch(&Realization::Implicit(HinOperator::new(angles)), c, cfg)?;
    let comparison = match &cfg.comparison_transform {
        None => None,
        Some(t) => {
            let t_inv = inverse(t)?;
            let pair = crate::hin::angles_to_hin(angles).into_input_pair();
            let transformed = pair.similarity(t, &t_inv)?;
            let c_t = c.matmul(t)?;
            Some(run_branch(&Realization::Dense(transformed), &c_t, cfg)?)
        }
    };
    Ok(ConditioningReport {
        seed: cfg.sim.seed,
        steps: cfg.sim.steps,
        noise_std: cfg.sim.noise_std,
        hin,
        comparison,
    })
}

/// Independent trials with seeds `seed, seed + 1, …`, run in parallel and
/// returned in trial order.
pub fn run_trials(
    angles: &AngleVector,
    c: &Matrix,
    cfg: &ExperimentConfig,
    trials: usize,
) -> Result<Vec<ConditioningReport>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut trial = cfg.clone();
            trial.sim.seed = cfg.sim.seed.wrapping_add(i);
            conditioning_experiment(angles, c, &trial)
        })
        .collect()
}
