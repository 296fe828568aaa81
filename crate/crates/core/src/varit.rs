//! Variational imaginary-time flow for the ZY ansatz.
//!
//! Each iteration linearizes the response of every weighted cost term to
//! every angle (matrix G, via quarter-turn parameter shifts), pairs it with
//! the negative covariance of each term with the cost landscape (vector D),
//! solves G theta_dot = D by truncated pseudoinverse, and takes an Euler
//! step. The cost fed into D is optionally squashed through a logistic
//! filter scaled to the current spectral spread. Once enough probability
//! collects on the best sampled states, or the flow runs out of iterations
//! or spectral spread, one sequential per-angle minimization sweep finishes
//! the run.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};

use crate::ansatz::{Ansatz, RankOrder};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::halfspace::HalfSpace;
use crate::hamiltonian::{sigmoid_transform, Convention, CostHamiltonian, SpectralStats};
use crate::statevector::{walsh_transform, StateVector};
use crate::trajectory::{IterationRecord, Phase, StopReason, Trajectory, TrajectoryMeta};

/// Costs within this margin of the support minimum count as the same level
/// when deciding whether the flow has locked onto its best states.
const SUPPORT_LEVEL_TOL: f64 = 1e-9;

/// A per-angle sweep update is skipped when the response amplitude is below
/// this fraction of the energy scale, to keep round-off from wandering.
const SWEEP_NOISE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct VarItConfig {
    /// Euler step in imaginary time.
    pub dtau: f64,
    /// Singular values below this fraction of the largest are dropped.
    pub svd_cutoff_ratio: f64,
    /// Flow step budget; the sweep still runs when it is exhausted.
    pub max_iterations: usize,
    /// Probability mass on the lowest-cost support states that ends the flow.
    pub switch_threshold: f64,
    /// Probabilities below this (or below uniform) do not count as support.
    pub probability_floor: f64,
    pub use_sigmoid: bool,
    /// Pruning threshold for the ansatz; 0 keeps every gate.
    pub epsilon: f64,
    /// Halves the response matrix, matching conventions that put the factor
    /// of two on the other side of the linear system.
    pub halve_g: bool,
    pub rank_order: RankOrder,
}

impl Default for VarItConfig {
    fn default() -> Self {
        VarItConfig {
            dtau: 0.1,
            svd_cutoff_ratio: 0.01,
            max_iterations: 100,
            switch_threshold: 0.5,
            probability_floor: 1e-6,
            use_sigmoid: true,
            epsilon: 0.0,
            halve_g: false,
            rank_order: RankOrder::Descending,
        }
    }
}

impl VarItConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !self.dtau.is_finite() || self.dtau <= 0.0 {
            return bad(format!("step size {} must be positive", self.dtau));
        }
        if !self.svd_cutoff_ratio.is_finite() || !(0.0..1.0).contains(&self.svd_cutoff_ratio) {
            return bad(format!("cutoff ratio {} must be in [0, 1)", self.svd_cutoff_ratio));
        }
        if !self.switch_threshold.is_finite() || !(0.0..=1.0).contains(&self.switch_threshold) {
            return bad(format!("switch threshold {} must be in [0, 1]", self.switch_threshold));
        }
        if !self.probability_floor.is_finite() || self.probability_floor <= 0.0 {
            return bad(format!("probability floor {} must be positive", self.probability_floor));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return bad(format!("pruning threshold {} must be finite and >= 0", self.epsilon));
        }
        Ok(())
    }
}

/// Response of every weighted cost term to angle j, from two preparations
/// with gate j forced in at theta_j +/- pi/4. Reference implementation; the
/// flow assembles the same numbers in bulk.
pub fn response_column(
    ansatz: &Ansatz,
    h: &CostHamiltonian,
    j: usize,
    halve: bool,
) -> Result<Vec<f64>> {
    let plus = ansatz.prepare_shifted(j, FRAC_PI_4)?;
    let minus = ansatz.prepare_shifted(j, -FRAC_PI_4)?;
    let scale = if halve { 0.25 } else { 0.5 };
    h.terms
        .iter()
        .map(|&(u, v, coeff)| {
            Ok(scale * coeff * (plus.expect_zz(u, v)? - minus.expect_zz(u, v)?))
        })
        .collect()
}

/// Negative covariance of each weighted cost term with the (possibly
/// filtered) cost landscape in the given state. Reference implementation.
pub fn drive_vector(state: &StateVector, h: &CostHamiltonian, landscape: &[f64]) -> Result<Vec<f64>> {
    if landscape.len() != state.len() {
        return Err(Error::DimensionMismatch { expected: state.len(), actual: landscape.len() });
    }
    let mean_g = state.expect_diagonal(landscape)?;
    let mut out = Vec::with_capacity(h.terms.len());
    for &(u, v, coeff) in &h.terms {
        let mask = (1usize << u) | (1usize << v);
        let mut term_g = 0.0;
        let mut term_mean = 0.0;
        for (z, a) in state.amplitudes().iter().enumerate() {
            let p = a.norm_sqr();
            let signed = if (z & mask).count_ones() & 1 == 1 { -p } else { p };
            term_g += signed * landscape[z];
            term_mean += signed;
        }
        out.push(-coeff * (term_g - term_mean * mean_g));
    }
    Ok(out)
}

/// Solves G theta_dot = D through the pseudoinverse, zeroing every singular
/// value strictly below cutoff_ratio times the largest.
pub fn solve_linear_flow(g: &DMatrix<f64>, d: &DVector<f64>, cutoff_ratio: f64) -> DVector<f64> {
    let n_params = g.ncols();
    let svd = g.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max <= 0.0 {
        return DVector::zeros(n_params);
    }
    let cutoff = cutoff_ratio * sigma_max;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut projected = u.tr_mul(d);
    for (i, p) in projected.iter_mut().enumerate() {
        let sigma = svd.singular_values[i];
        if sigma >= cutoff && sigma > 0.0 {
            *p /= sigma;
        } else {
            *p = 0.0;
        }
    }
    v_t.tr_mul(&projected)
}

/// Probability mass sitting on the lowest-cost level of the support, where
/// support means basis states with probability at least `floor`.
pub fn switch_mass(probs: &[f64], diagonal: &[f64], floor: f64) -> f64 {
    debug_assert_eq!(probs.len(), diagonal.len());
    let mut level = f64::INFINITY;
    for (p, d) in probs.iter().zip(diagonal) {
        if *p >= floor && *d < level {
            level = *d;
        }
    }
    if !level.is_finite() {
        return 0.0;
    }
    probs
        .iter()
        .zip(diagonal)
        .filter(|(p, d)| **p >= floor && **d <= level + SUPPORT_LEVEL_TOL)
        .map(|(p, _)| *p)
        .sum()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SweepSummary {
    pub updated: usize,
    pub skipped: usize,
}

/// One sequential pass of exact single-angle minimization in gate order.
///
/// The restriction of the energy to one angle is A + B cos(2 delta)
/// + C sin(2 delta); the evaluations at delta = 0, +-pi/4 pin down B and C
/// and the angle moves straight to the minimum. Gates stay subject to
/// pruning except the one being varied, and each update feeds into the
/// evaluations after it.
///
/// The three evaluations share one preparation: with F the prepared state
/// (gate j forced in) and S its sibling with gate j's generator inserted,
/// E(+-pi/4) = (E(0) + <S|diag|S>)/2 +- <F|diag|S>.
pub fn jacobi_sweep(ansatz: &mut Ansatz, h: &CostHamiltonian) -> Result<SweepSummary> {
    let mut theta = ansatz.theta().to_vec();
    let mut summary = SweepSummary::default();
    let hs = HalfSpace::new(ansatz);
    if h.diagonal.len() != hs.dim() << 1 {
        return Err(Error::DimensionMismatch {
            expected: hs.dim() << 1,
            actual: h.diagonal.len(),
        });
    }
    let diag = hs.compress_symmetric(&h.diagonal);
    let mut prefix = Vec::new();
    let mut forced = Vec::new();
    let mut sibling = Vec::new();
    hs.fill_plus(&mut prefix);
    for j in 0..ansatz.n_params() {
        forced.clear();
        forced.extend_from_slice(&prefix);
        hs.apply_gate(j, theta[j], &mut forced);
        sibling.clear();
        sibling.extend_from_slice(&forced);
        hs.apply_generator(j, &mut sibling);
        hs.apply_active_suffix(ansatz, j + 1, &mut forced);
        hs.apply_active_suffix(ansatz, j + 1, &mut sibling);
        let mut e_mid = 0.0;
        let mut e_sibling = 0.0;
        let mut cross = 0.0;
        for ((&f, &s), &d) in forced.iter().zip(&sibling).zip(&diag) {
            e_mid += d * f * f;
            e_sibling += d * s * s;
            cross += d * f * s;
        }
        e_mid *= 2.0;
        e_sibling *= 2.0;
        cross *= 2.0;
        let level = 0.5 * (e_mid + e_sibling);
        let b = e_mid - level;
        let c = cross;
        if b.hypot(c) > SWEEP_NOISE_TOL * level.abs().max(1.0) {
            theta[j] += 0.5 * (-c).atan2(-b);
            summary.updated += 1;
        } else {
            summary.skipped += 1;
        }
        if ansatz.epsilon() == 0.0 || theta[j].abs() >= ansatz.epsilon() {
            hs.apply_gate(j, theta[j], &mut prefix);
        }
    }
    ansatz.set_theta(&theta)?;
    Ok(summary)
}

struct FlowScratch {
    hs: HalfSpace,
    state: Vec<f64>,
    half_probs: Vec<f64>,
    probs: Vec<f64>,
    prefix: Vec<f64>,
    work: Vec<f64>,
    forced: Vec<f64>,
    term_masks: Vec<usize>,
    half_masks: Vec<usize>,
}

impl FlowScratch {
    fn new(h: &CostHamiltonian, ansatz: &Ansatz) -> Self {
        let hs = HalfSpace::new(ansatz);
        let half_masks = h.terms.iter().map(|&(u, v, _)| hs.term_mask(u, v)).collect();
        FlowScratch {
            hs,
            state: Vec::new(),
            half_probs: Vec::new(),
            probs: Vec::new(),
            prefix: Vec::new(),
            work: Vec::new(),
            forced: Vec::new(),
            term_masks: h
                .terms
                .iter()
                .map(|&(u, v, _)| (1usize << u) | (1usize << v))
                .collect(),
            half_masks,
        }
    }
}

/// All response columns in one forward sweep over the mirror-reduced
/// register. Because a quarter-turn shift factors as exp(+-pi/4 K) =
/// (1 +- K)/sqrt(2), the difference of the two shifted probability vectors
/// collapses to 2 psi s_j, where s_j is the prepared state with gate j's
/// generator inserted after it. One suffix application and one transform
/// per column replace the two preparations of the definition.
fn response_matrix(ansatz: &Ansatz, h: &CostHamiltonian, halve: bool, s: &mut FlowScratch) -> DMatrix<f64> {
    let n_params = ansatz.n_params();
    // Compressed Walsh coefficients carry half the full-register sum.
    let scale = if halve { 1.0 } else { 2.0 };
    let mut g = DMatrix::zeros(h.terms.len(), n_params);
    s.hs.prepare_into(ansatz, &mut s.state);
    s.hs.fill_plus(&mut s.prefix);
    for j in 0..n_params {
        let active = ansatz.active()[j];
        if active {
            s.hs.apply_gate(j, ansatz.theta()[j], &mut s.prefix);
        }
        s.work.clear();
        s.work.extend_from_slice(&s.prefix);
        if !active {
            s.hs.apply_gate(j, ansatz.theta()[j], &mut s.work);
        }
        // A pruned gate is forced in for its own column, so the unshifted
        // factor is no longer the prepared state.
        let unshifted: &[f64] = if active {
            &s.state
        } else {
            s.forced.clear();
            s.forced.extend_from_slice(&s.work);
            s.hs.apply_active_suffix(ansatz, j + 1, &mut s.forced);
            &s.forced
        };
        s.hs.apply_generator(j, &mut s.work);
        s.hs.apply_active_suffix(ansatz, j + 1, &mut s.work);
        for (q, v) in s.work.iter_mut().zip(unshifted) {
            *q *= v;
        }
        walsh_transform(&mut s.work);
        for (t, (&(_, _, coeff), &mask)) in h.terms.iter().zip(&s.half_masks).enumerate() {
            g[(t, j)] = scale * coeff * s.work[mask];
        }
    }
    g
}

/// The drive vector from precomputed probabilities, using two transforms to
/// read off every term correlator at once.
fn drive_from_probs(probs: &[f64], landscape: &[f64], h: &CostHamiltonian, term_masks: &[usize]) -> DVector<f64> {
    let mut plain = probs.to_vec();
    let mut weighted: Vec<f64> = probs.iter().zip(landscape).map(|(p, g)| p * g).collect();
    walsh_transform(&mut plain);
    walsh_transform(&mut weighted);
    let mean_g = weighted[0];
    DVector::from_iterator(
        h.terms.len(),
        h.terms.iter().zip(term_masks).map(|(&(_, _, coeff), &mask)| {
            -coeff * (weighted[mask] - plain[mask] * mean_g)
        }),
    )
}

/// Runs the full optimizer on one instance. `seed` is carried into the
/// trajectory metadata only; the optimization itself is deterministic.
pub fn run(
    graph: &WeightedGraph,
    convention: Convention,
    config: &VarItConfig,
    seed: u64,
) -> Result<Trajectory> {
    config.validate()?;
    let h = CostHamiltonian::build(graph, convention)?;
    let mut ansatz = Ansatz::build_with_order(graph, config.epsilon, config.rank_order)?;
    let degenerate = h.c_opt == 0.0;
    let sigma_0 = if config.use_sigmoid { h.sigma_0()? } else { 0.0 };
    let dim = 1usize << h.n_qubits;
    let support_floor = config.probability_floor.min(1.0 / dim as f64);
    let mut scratch = FlowScratch::new(&h, &ansatz);
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut iteration = 0usize;
    let stop;
    loop {
        scratch.hs.prepare_into(&ansatz, &mut scratch.state);
        scratch.half_probs.clear();
        scratch.half_probs.extend(scratch.state.iter().map(|r| r * r));
        scratch.hs.expand_pairwise(&scratch.half_probs, &mut scratch.probs);
        let (e_raw, var_raw) = moments(&scratch.probs, &h.diagonal);
        records.push(make_record(
            iteration,
            iteration as f64 * config.dtau,
            Phase::Flow,
            e_raw,
            &scratch.probs,
            &h,
            &ansatz,
        ));
        if switch_mass(&scratch.probs, &h.diagonal, support_floor) >= config.switch_threshold {
            stop = StopReason::SupportReached;
            break;
        }
        if iteration >= config.max_iterations {
            stop = StopReason::IterationLimit;
            break;
        }
        let landscape: std::borrow::Cow<'_, [f64]> = if config.use_sigmoid {
            let sigma_tau = var_raw.sqrt();
            let stats = SpectralStats { e_tau: e_raw, sigma_tau, sigma_0 };
            match sigmoid_transform(&h.diagonal, &stats) {
                Ok(filtered) => filtered.into(),
                Err(Error::ConvergedSpectrum { .. }) => {
                    stop = StopReason::SpectrumCollapsed;
                    break;
                }
                Err(other) => return Err(other),
            }
        } else {
            (&h.diagonal[..]).into()
        };
        let g = response_matrix(&ansatz, &h, config.halve_g, &mut scratch);
        let d = drive_from_probs(&scratch.probs, &landscape, &h, &scratch.term_masks);
        let theta_dot = solve_linear_flow(&g, &d, config.svd_cutoff_ratio);
        let theta: Vec<f64> = ansatz
            .theta()
            .iter()
            .zip(theta_dot.iter())
            .map(|(t, dt)| t + config.dtau * dt)
            .collect();
        ansatz.set_theta(&theta)?;
        iteration += 1;
    }
    let tau_final = iteration as f64 * config.dtau;
    jacobi_sweep(&mut ansatz, &h)?;
    scratch.hs.prepare_into(&ansatz, &mut scratch.state);
    scratch.half_probs.clear();
    scratch.half_probs.extend(scratch.state.iter().map(|r| r * r));
    scratch.hs.expand_pairwise(&scratch.half_probs, &mut scratch.probs);
    let (e_final, _) = moments(&scratch.probs, &h.diagonal);
    records.push(make_record(
        iteration + 1,
        tau_final,
        Phase::Jacobi,
        e_final,
        &scratch.probs,
        &h,
        &ansatz,
    ));
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
        stop,
    })
}

fn moments(probs: &[f64], diagonal: &[f64]) -> (f64, f64) {
    let mut first = 0.0;
    let mut second = 0.0;
    for (p, d) in probs.iter().zip(diagonal) {
        first += p * d;
        second += p * d * d;
    }
    (first, (second - first * first).max(0.0))
}

pub(crate) fn make_record(
    iteration: usize,
    tau: f64,
    phase: Phase,
    e: f64,
    probs: &[f64],
    h: &CostHamiltonian,
    ansatz: &Ansatz,
) -> IterationRecord {
    let ar = if h.c_opt == 0.0 { f64::NAN } else { e / h.c_opt };
    let optimal_norm: f64 = h.optimal_set.iter().map(|&z| probs[z as usize]).sum();
    IterationRecord {
        iteration,
        tau,
        phase,
        energy: e,
        ar,
        ar_error: 1.0 - ar,
        optimal_norm,
        active_count: ansatz.active_gate_count(),
        entropy: None,
        theta: ansatz.theta().to_vec(),
    }
}
