//! Gradient-descent baseline on the same ansatz, with bias-corrected
//! first and second moment estimates. Minimizes the raw cost expectation;
//! no landscape filter, no pruning, no finishing sweep.

use std::f64::consts::FRAC_PI_4;

use crate::ansatz::Ansatz;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::halfspace::HalfSpace;
use crate::hamiltonian::{energy, Convention, CostHamiltonian};
use crate::trajectory::{Phase, StopReason, Trajectory, TrajectoryMeta};
use crate::varit::make_record;

/// What the baseline minimizes. One choice today; the enum keeps the config
/// file forward-compatible.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Objective {
    #[default]
    RawEnergy,
}

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Denominator shift keeping early steps finite.
    pub eps_hat: f64,
    pub max_iterations: usize,
    pub objective: Objective,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
            max_iterations: 100,
            objective: Objective::RawEnergy,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !beta.is_finite() || !(0.0..1.0).contains(&beta) {
                return bad(format!("{name} = {beta} must be in [0, 1)"));
            }
        }
        if !self.eps_hat.is_finite() || self.eps_hat <= 0.0 {
            return bad(format!("denominator shift {} must be positive", self.eps_hat));
        }
        Ok(())
    }
}

/// d<H>/d theta_j for every angle from two preparations per angle at
/// theta_j +/- pi/4; the shift difference is the exact derivative because
/// each angle enters the energy through one harmonic. Reference
/// implementation.
pub fn gradient_by_shifts(ansatz: &Ansatz, h: &CostHamiltonian) -> Result<Vec<f64>> {
    (0..ansatz.n_params())
        .map(|j| {
            let plus = energy(&ansatz.prepare_shifted(j, FRAC_PI_4)?, h)?;
            let minus = energy(&ansatz.prepare_shifted(j, -FRAC_PI_4)?, h)?;
            Ok(plus - minus)
        })
        .collect()
}

/// Same gradient in one forward and one backward pass over the circuit, on
/// the mirror-reduced register. Valid when every gate is in the circuit, so
/// a pruning ansatz falls back to the shift rule.
pub fn gradient(ansatz: &Ansatz, h: &CostHamiltonian) -> Result<Vec<f64>> {
    if ansatz.active_gate_count() != ansatz.n_params() {
        return gradient_by_shifts(ansatz, h);
    }
    let hs = HalfSpace::new(ansatz);
    if h.diagonal.len() != hs.dim() << 1 {
        return Err(Error::DimensionMismatch {
            expected: hs.dim() << 1,
            actual: h.diagonal.len(),
        });
    }
    let diag = hs.compress_symmetric(&h.diagonal);
    let n_params = ansatz.n_params();
    let mut grad = vec![0.0; n_params];
    let mut forward = Vec::new();
    hs.prepare_into(ansatz, &mut forward);
    // Cost-weighted copy, progressively stripped of the gates behind it, so
    // at step j it holds (suffix after j)^T (diag * psi).
    let mut costate: Vec<f64> = forward.iter().zip(&diag).map(|(a, d)| a * d).collect();
    for j in (0..n_params).rev() {
        grad[j] = 4.0 * hs.generator_dot(j, &costate, &forward);
        if j > 0 {
            hs.apply_gate(j, -ansatz.theta()[j], &mut forward);
            hs.apply_gate(j, -ansatz.theta()[j], &mut costate);
        }
    }
    Ok(grad)
}

/// Runs the baseline for the full iteration budget. `seed` is carried into
/// the trajectory metadata only.
pub fn run(
    graph: &WeightedGraph,
    convention: Convention,
    config: &AdamConfig,
    seed: u64,
) -> Result<Trajectory> {
    config.validate()?;
    let h = CostHamiltonian::build(graph, convention)?;
    let mut ansatz = Ansatz::build(graph, 0.0)?;
    let degenerate = h.c_opt == 0.0;
    let n_params = ansatz.n_params();
    let mut first_moment = vec![0.0; n_params];
    let mut second_moment = vec![0.0; n_params];
    let mut records = Vec::with_capacity(config.max_iterations + 1);
    let hs = HalfSpace::new(&ansatz);
    let mut state = Vec::new();
    let mut half_probs = Vec::new();
    let mut probs = Vec::new();
    for iteration in 0..=config.max_iterations {
        hs.prepare_into(&ansatz, &mut state);
        half_probs.clear();
        half_probs.extend(state.iter().map(|r| r * r));
        hs.expand_pairwise(&half_probs, &mut probs);
        let e: f64 = probs.iter().zip(&h.diagonal).map(|(p, d)| p * d).sum();
        records.push(make_record(
            iteration,
            iteration as f64,
            Phase::Flow,
            e,
            &probs,
            &h,
            &ansatz,
        ));
        if iteration == config.max_iterations {
            break;
        }
        let grad = gradient(&ansatz, &h)?;
        let t = (iteration + 1) as f64;
        let bias1 = 1.0 - config.beta1.powf(t);
        let bias2 = 1.0 - config.beta2.powf(t);
        let theta: Vec<f64> = ansatz
            .theta()
            .iter()
            .enumerate()
            .map(|(j, &th)| {
                first_moment[j] = config.beta1 * first_moment[j] + (1.0 - config.beta1) * grad[j];
                second_moment[j] =
                    config.beta2 * second_moment[j] + (1.0 - config.beta2) * grad[j] * grad[j];
                let m_hat = first_moment[j] / bias1;
                let v_hat = second_moment[j] / bias2;
                th - config.learning_rate * m_hat / (v_hat.sqrt() + config.eps_hat)
            })
            .collect();
        ansatz.set_theta(&theta)?;
    }
    let success = !degenerate && records.last().unwrap().optimal_norm > 0.99;
    Ok(Trajectory {
        meta: TrajectoryMeta {
            n_qubits: h.n_qubits,
            edge_count: graph.edge_count(),
            seed,
            degenerate,
        },
        records,
        success,
        stop: StopReason::IterationLimit,
    })
}
