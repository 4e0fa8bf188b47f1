//! Quantum-behaved particle swarm optimisation (QPSO) for derivative-free
//! minimisation over a box.
//!
//! Each particle is pulled toward a random convex combination of its personal
//! best and the global best, with a spread set by its distance to the mean of
//! all personal bests:
//!
//! ```text
//! p   = φ · pbest + (1 − φ) · gbest             φ ~ U(0, 1) per dimension
//! x'  = p ± β · |mbest − x| · ln(1/u)           u ~ U(0, 1), sign ~ coin flip
//! ```
//!
//! The contraction-expansion coefficient β is annealed linearly over the run.
//! Positions leaving the box are reflected back in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{log_marginal_likelihood, Input, KernelSpec, TrainingSet};
use crate::seeds::mix_seed;

/// Box bounds, one `(lower, upper)` pair per dimension. Callers pass
/// log-transformed hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidParameter("search space has no dimensions".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "dimension {i}: bounds ({lo}, {hi}) must be finite with lower < upper"
                )));
            }
        }
        Ok(Self {
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Folds `x` back into `[lower, upper]` by mirror reflection at the walls.
    pub fn reflect(&self, d: usize, x: f64) -> f64 {
        let (lo, hi) = (self.lower[d], self.upper[d]);
        if !x.is_finite() {
            return 0.5 * (lo + hi);
        }
        if (lo..=hi).contains(&x) {
            return x;
        }
        let width = hi - lo;
        let m = (x - lo).rem_euclid(2.0 * width);
        let y = if m <= width { lo + m } else { hi - (m - width) };
        y.clamp(lo, hi)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.gen::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmConfig {
    pub particle_count: usize,
    pub max_iterations: usize,
    /// β at the first iteration.
    pub beta_start: f64,
    /// β at the last iteration.
    pub beta_end: f64,
    pub seed: u64,
    /// Extra independent runs after the first; the best result is kept.
    pub restarts: usize,
    /// A run stops once the best value improves by less than
    /// `tolerance · (1 + |best|)` over `stall_iterations` iterations.
    pub tolerance: f64,
    pub stall_iterations: usize,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            particle_count: 30,
            max_iterations: 300,
            beta_start: 1.0,
            beta_end: 0.5,
            seed: 0,
            restarts: 3,
            tolerance: 1e-8,
            stall_iterations: 50,
        }
    }
}

impl SwarmConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.particle_count < 2 {
            return Err(Error::InvalidParameter("particle_count must be >= 2".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(self.beta_end > 0.0 && self.beta_start >= self.beta_end && self.beta_start.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "need beta_start >= beta_end > 0, got {} -> {}",
                self.beta_start, self.beta_end
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("tolerance must be non-negative".into()));
        }
        Ok(())
    }

    fn beta_at(&self, iteration: usize) -> f64 {
        if self.max_iterations <= 1 {
            return self.beta_start;
        }
        let t = iteration as f64 / (self.max_iterations - 1) as f64;
        self.beta_start + (self.beta_end - self.beta_start) * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_value: f64,
}

/// Swarm state between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub space: SearchSpace,
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    pub global_best_value: f64,
    /// Mean of the personal bests.
    pub mbest: Vec<f64>,
    pub evaluations: usize,
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

impl SwarmState {
    /// Builds a swarm from explicit starting positions and evaluates them.
    pub fn from_positions<F>(space: SearchSpace, positions: Vec<Vec<f64>>, objective: &F) -> Self
    where
        F: Fn(&[f64]) -> f64,
    {
        let particles: Vec<Particle> = positions
            .into_iter()
            .map(|p| {
                let value = sanitize(objective(&p));
                Particle {
                    best_position: p.clone(),
                    position: p,
                    best_value: value,
                }
            })
            .collect();
        let evaluations = particles.len();
        let mut state = Self {
            global_best: particles[0].best_position.clone(),
            global_best_value: particles[0].best_value,
            mbest: Vec::new(),
            space,
            particles,
            evaluations,
        };
        state.refresh_global();
        state.refresh_mbest();
        state
    }

    /// Uniform random swarm, optionally with the first particle at the centre.
    pub fn random<F, R>(
        space: SearchSpace,
        count: usize,
        include_center: bool,
        rng: &mut R,
        objective: &F,
    ) -> Self
    where
        F: Fn(&[f64]) -> f64,
        R: Rng,
    {
        let mut positions = Vec::with_capacity(count);
        if include_center {
            positions.push(space.center());
        }
        while positions.len() < count {
            positions.push(space.sample(rng));
        }
        Self::from_positions(space, positions, objective)
    }

    fn refresh_global(&mut self) {
        for p in &self.particles {
            if p.best_value < self.global_best_value {
                self.global_best_value = p.best_value;
                self.global_best = p.best_position.clone();
            }
        }
    }

    fn refresh_mbest(&mut self) {
        let n = self.particles.len() as f64;
        self.mbest = (0..self.space.dim())
            .map(|d| self.particles.iter().map(|p| p.best_position[d]).sum::<f64>() / n)
            .collect();
    }
}

/// One QPSO iteration. Bests change only on strict improvement.
pub fn qbps_step<F, R>(state: &mut SwarmState, objective: &F, beta: f64, rng: &mut R)
where
    F: Fn(&[f64]) -> f64,
    R: Rng,
{
    let dim = state.space.dim();
    for p in &mut state.particles {
        for d in 0..dim {
            let phi: f64 = rng.gen();
            let attractor = phi * p.best_position[d] + (1.0 - phi) * state.global_best[d];
            // 1 - U[0,1) lies in (0, 1], keeping ln(1/u) finite
            let u = 1.0 - rng.gen::<f64>();
            let spread = beta * (state.mbest[d] - p.position[d]).abs() * (1.0 / u).ln();
            let x = if rng.gen::<bool>() {
                attractor + spread
            } else {
                attractor - spread
            };
            p.position[d] = state.space.reflect(d, x);
        }
    }
    // evaluations are independent of each other; updates happen after all of them
    let values: Vec<f64> = state
        .particles
        .iter()
        .map(|p| sanitize(objective(&p.position)))
        .collect();
    state.evaluations += values.len();
    for (p, v) in state.particles.iter_mut().zip(values) {
        if v < p.best_value {
            p.best_value = v;
            p.best_position = p.position.clone();
        }
    }
    state.refresh_global();
    state.refresh_mbest();
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best-so-far objective after initialisation and after every iteration,
    /// across all restarts.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Minimises `objective` over `space`. Non-finite objective values count as
/// `+∞`.
pub fn optimize<F>(objective: F, space: &SearchSpace, config: &SwarmConfig) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::new();
    let mut evaluations = 0;

    for run in 0..=config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, run as u64));
        let mut state =
            SwarmState::random(space.clone(), config.particle_count, run == 0, &mut rng, &objective);
        let mut run_trace = vec![state.global_best_value];
        let carried = best.as_ref().map_or(f64::INFINITY, |b| b.1);
        trace.push(state.global_best_value.min(carried));

        for it in 0..config.max_iterations {
            qbps_step(&mut state, &objective, config.beta_at(it), &mut rng);
            run_trace.push(state.global_best_value);
            trace.push(state.global_best_value.min(carried));
            let k = run_trace.len() - 1;
            if k >= config.stall_iterations && config.stall_iterations > 0 {
                let then = run_trace[k - config.stall_iterations];
                let now = run_trace[k];
                if then.is_finite() && then - now <= config.tolerance * (1.0 + now.abs()) {
                    break;
                }
            }
        }
        evaluations += state.evaluations;
        if best.as_ref().map_or(true, |b| state.global_best_value < b.1) {
            best = Some((state.global_best.clone(), state.global_best_value));
        }
    }

    let (best, best_value) = best.expect("at least one run");
    if !best_value.is_finite() {
        return Err(Error::NoFeasiblePoint);
    }
    Ok(OptimizationResult {
        best,
        best_value,
        trace,
        evaluations,
    })
}

/// Writes the trace as `iteration,best_nlml` rows.
pub fn write_trace<W: std::io::Write>(writer: W, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "best_nlml"])?;
    for (i, v) in trace.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// How the observation-noise variance is treated during tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePrior {
    /// Searched in log space between the two (linear) bounds.
    Free { lower: f64, upper: f64 },
    Fixed(f64),
}

/// Outcome of [`tune_gp`].
#[derive(Debug, Clone)]
pub struct GpTuning {
    pub kernel: KernelSpec,
    pub noise_variance: f64,
    /// Negative log marginal likelihood at the optimum.
    pub nlml: f64,
    pub result: OptimizationResult,
}

/// Chooses kernel hyperparameters and noise variance by minimising the NLML.
///
/// `kernel_bounds` are linear-scale bounds for the entries of
/// [`KernelSpec::hyperparameters`]; the search runs over their logarithms.
pub fn tune_gp(
    template: &KernelSpec,
    inputs: &[Input],
    targets: &[f64],
    prior_mean: f64,
    kernel_bounds: &[(f64, f64)],
    noise: NoisePrior,
    config: &SwarmConfig,
) -> Result<GpTuning> {
    let n_kernel = template.hyperparameter_names().len();
    if kernel_bounds.len() != n_kernel {
        return Err(Error::DimensionMismatch(format!(
            "{} has {n_kernel} hyperparameters but {} bounds were given",
            template.name(),
            kernel_bounds.len()
        )));
    }
    let mut log_bounds = Vec::with_capacity(n_kernel + 1);
    for &(lo, hi) in kernel_bounds {
        if !(lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hyperparameter bounds must be positive, got ({lo}, {hi})"
            )));
        }
        log_bounds.push((lo.ln(), hi.ln()));
    }
    match noise {
        NoisePrior::Free { lower, upper } => {
            if !(lower > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "noise bounds must be positive, got ({lower}, {upper})"
                )));
            }
            log_bounds.push((lower.ln(), upper.ln()));
        }
        NoisePrior::Fixed(v) => {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "fixed noise variance must be positive, got {v}"
                )));
            }
        }
    }
    let space = SearchSpace::new(&log_bounds)?;
    // validates the data once up front so the objective only fails numerically
    TrainingSet::new(inputs.to_vec(), targets.to_vec(), 1.0)?;
    template.check(inputs)?;

    let decode = |theta: &[f64]| -> Result<(KernelSpec, f64)> {
        let values: Vec<f64> = theta[..n_kernel].iter().map(|v| v.exp()).collect();
        let kernel = template.with_hyperparameters(&values)?;
        let noise_variance = match noise {
            NoisePrior::Free { .. } => theta[n_kernel].exp(),
            NoisePrior::Fixed(v) => v,
        };
        Ok((kernel, noise_variance))
    };
    let objective = |theta: &[f64]| -> f64 {
        let Ok((kernel, noise_variance)) = decode(theta) else {
            return f64::INFINITY;
        };
        let Ok(training) = TrainingSet::new(inputs.to_vec(), targets.to_vec(), noise_variance) else {
            return f64::INFINITY;
        };
        match log_marginal_likelihood(&kernel, &training, prior_mean) {
            Ok(l) => -l,
            Err(_) => f64::INFINITY,
        }
    };
    let result = optimize(objective, &space, config)?;
    let (kernel, noise_variance) = decode(&result.best)?;
    Ok(GpTuning {
        kernel,
        noise_variance,
        nlml: result.best_value,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> f64 {
        (x[0] - 1.2).powi(2) + 3.0 * (x[1] + 0.7).powi(2) + 0.5 * (x[0] - 1.2) * (x[1] + 0.7)
    }

    fn space2() -> SearchSpace {
        SearchSpace::new(&[(-5.0, 5.0), (-5.0, 5.0)]).unwrap()
    }

    #[test]
    fn converges_on_quadratic() {
        let cfg = SwarmConfig {
            max_iterations: 200,
            restarts: 0,
            ..SwarmConfig::default()
        };
        let r = optimize(quadratic, &space2(), &cfg).unwrap();
        assert!((r.best[0] - 1.2).abs() < 1e-4 && (r.best[1] + 0.7).abs() < 1e-4, "{:?}", r.best);
        assert!(r.trace.len() <= 201);
    }

    #[test]
    fn trace_monotone_and_deterministic() {
        let cfg = SwarmConfig::default().with_seed(5);
        let a = optimize(quadratic, &space2(), &cfg).unwrap();
        let b = optimize(quadratic, &space2(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
        let c = optimize(quadratic, &space2(), &cfg.clone().with_seed(6)).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn optimum_at_centre_gives_flat_trace() {
        let r = optimize(|x: &[f64]| x[0] * x[0] + x[1] * x[1], &space2(), &SwarmConfig::default())
            .unwrap();
        assert!(r.trace.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn infeasible_everywhere_errors() {
        let cfg = SwarmConfig {
            max_iterations: 5,
            restarts: 0,
            ..SwarmConfig::default()
        };
        let r = optimize(|_: &[f64]| f64::NAN, &space2(), &cfg);
        assert_eq!(r, Err(Error::NoFeasiblePoint));
        // a partially feasible objective still works
        let r = optimize(
            |x: &[f64]| if x[0] > 0.0 { x[0] } else { f64::INFINITY },
            &space2(),
            &cfg,
        );
        assert!(r.is_ok());
    }

    #[test]
    fn degenerate_step_keeps_position() {
        let space = space2();
        let mut state = SwarmState::from_positions(space, vec![vec![0.3, -0.2]], &quadratic);
        let before = state.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        qbps_step(&mut state, &quadratic, 0.0, &mut rng);
        assert_eq!(state.particles[0].position, before.particles[0].position);
        assert_eq!(state.global_best_value, before.global_best_value);
    }

    #[test]
    fn step_invariants() {
        let space = SearchSpace::new(&[(-1.0, 1.0), (0.0, 3.0), (-2.0, -1.0)]).unwrap();
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.4).powi(2)).sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = SwarmState::random(space.clone(), 12, true, &mut rng, &f);
        for _ in 0..40 {
            let prev: Vec<f64> = state.particles.iter().map(|p| p.best_value).collect();
            let prev_global = state.global_best_value;
            qbps_step(&mut state, &f, 1.7, &mut rng);
            for (p, old) in state.particles.iter().zip(prev) {
                assert!(p.best_value <= old);
                assert!(space.contains(&p.position));
            }
            assert!(state.global_best_value <= prev_global);
            for d in 0..3 {
                let mean = state.particles.iter().map(|p| p.best_position[d]).sum::<f64>() / 12.0;
                assert!((state.mbest[d] - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reflection_stays_in_bounds() {
        let s = SearchSpace::new(&[(0.0, 1.0)]).unwrap();
        assert!((s.reflect(0, 1.25) - 0.75).abs() < 1e-15);
        assert!((s.reflect(0, -0.25) - 0.25).abs() < 1e-15);
        assert!((s.reflect(0, 2.25) - 0.25).abs() < 1e-15);
        assert_eq!(s.reflect(0, f64::NAN), 0.5);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(SearchSpace::new(&[(1.0, 1.0)]).is_err());
        assert!(SearchSpace::new(&[]).is_err());
        let bad = SwarmConfig {
            particle_count: 1,
            ..SwarmConfig::default()
        };
        assert!(optimize(quadratic, &space2(), &bad).is_err());
        let bad = SwarmConfig {
            beta_start: 0.4,
            ..SwarmConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trace_csv() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &[3.0, 2.5]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,best_nlml\n0,3\n1,2.5\n");
    }

    #[test]
    fn recovers_length_scale_from_gp_samples() {
        let xs: Vec<Input> = (0..40).map(|i| Input::Scalar(i as f64 * 0.25)).collect();
        let truth = KernelSpec::squared_exponential(1.0, 1.5);
        let noise: f64 = 0.01;
        let bounds = [(1e-2, 1e2), (1e-2, 1e2)];
        let cfg = SwarmConfig {
            particle_count: 20,
            max_iterations: 80,
            restarts: 1,
            ..SwarmConfig::default()
        };
        let mut hits = 0;
        for seed in 0..20 {
            let f = crate::gp::sample_prior(&truth, &xs, 1, 100 + seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = (0..xs.len())
                .map(|i| {
                    let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                    f[(0, i)] + noise.sqrt() * z
                })
                .collect();
            let t = tune_gp(
                &truth,
                &xs,
                &ys,
                0.0,
                &bounds,
                NoisePrior::Free { lower: 1e-6, upper: 1.0 },
                &cfg.clone().with_seed(seed),
            )
            .unwrap();
            let l = t.kernel.hyperparameters()[1];
            if (0.75..=3.0).contains(&l) {
                hits += 1;
            }
            assert!(t.result.trace.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!(hits >= 16, "recovered {hits}/20");
    }
}
