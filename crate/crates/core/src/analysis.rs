//! Post-run analysis: correlation rounding of soft solutions, entanglement
//! accounting across a trajectory, and batch summaries.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{Ansatz, RankOrder};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::hamiltonian::Convention;
use crate::statevector::{walsh_transform, StateVector};
use crate::trajectory::{Phase, Trajectory};

/// Two-point correlation matrix with unit self-correlations removed:
/// entry (i, j) is -<Z_i Z_j> off the diagonal and 0 on it. For a basis
/// state with spins s this is I - s s^T, whose bottom eigenvector is s.
pub fn correlation_matrix(state: &StateVector) -> DMatrix<f64> {
    let n = state.n_qubits();
    let mut probs = Vec::new();
    state.probabilities_into(&mut probs);
    walsh_transform(&mut probs);
    let mut chi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let zz = probs[(1 << i) | (1 << j)];
            chi[(i, j)] = -zz;
            chi[(j, i)] = -zz;
        }
    }
    chi
}

/// Rounds a soft solution to a cut: every eigenvector of the correlation
/// matrix is sign-rounded into an assignment (nonnegative entries mean bit
/// 0), complements included, and the cheapest candidate wins.
///
/// A correlation-free state (the uniform start state, for example) rounds
/// to the all-equal assignment with an empty cut.
pub fn relaxed_round(
    state: &StateVector,
    graph: &WeightedGraph,
    convention: Convention,
) -> Result<(u64, f64)> {
    let n = state.n_qubits();
    if n != graph.n_vertices() {
        return Err(Error::DimensionMismatch { expected: graph.n_vertices(), actual: n });
    }
    let chi = correlation_matrix(state);
    let eigen = nalgebra::SymmetricEigen::new(chi);
    let full = (1u64 << n) - 1;
    let mut best: Option<(u64, f64)> = None;
    for col in 0..n {
        let v = eigen.eigenvectors.column(col);
        let mut z = 0u64;
        for (q, &entry) in v.iter().enumerate() {
            if entry < 0.0 {
                z |= 1 << q;
            }
        }
        for cand in [z, !z & full] {
            let cost = graph.cut_cost(cand, convention)?;
            if best.map(|(_, c)| cost < c).unwrap_or(true) {
                best = Some((cand, cost));
            }
        }
    }
    Ok(best.expect("at least one eigenvector"))
}

/// Half the qubits, drawn without replacement. Deterministic in the seed.
pub fn random_bipartition(n_qubits: usize, seed: u64) -> Result<Vec<usize>> {
    if n_qubits < 2 {
        return Err(Error::SizeOutOfRange { n: n_qubits, min: 2, max: usize::MAX });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qubits: Vec<usize> = (0..n_qubits).collect();
    qubits.shuffle(&mut rng);
    let mut subset: Vec<usize> = qubits.into_iter().take(n_qubits / 2).collect();
    subset.sort_unstable();
    Ok(subset)
}

/// Entanglement entropy of `subset` at every recorded angle snapshot,
/// replayed through a rebuilt circuit.
pub fn entropy_trace(
    t: &Trajectory,
    graph: &WeightedGraph,
    epsilon: f64,
    order: RankOrder,
    subset: &[usize],
) -> Result<Vec<f64>> {
    let mut ansatz = Ansatz::build_with_order(graph, epsilon, order)?;
    let mut out = Vec::with_capacity(t.records.len());
    for r in &t.records {
        if r.theta.len() != ansatz.n_params() {
            return Err(Error::ParameterCountMismatch {
                expected: ansatz.n_params(),
                actual: r.theta.len(),
            });
        }
        ansatz.set_theta(&r.theta)?;
        out.push(ansatz.prepare()?.entanglement_entropy(subset)?);
    }
    Ok(out)
}

/// Fills the entropy column of the records inside the peak window and
/// returns the maximum value written, if any. Records outside the window
/// keep whatever they held.
pub fn annotate_entropy(
    t: &mut Trajectory,
    graph: &WeightedGraph,
    epsilon: f64,
    order: RankOrder,
    subset: &[usize],
    threshold: f64,
) -> Result<Option<f64>> {
    let window = peak_window(t, threshold);
    let mut ansatz = Ansatz::build_with_order(graph, epsilon, order)?;
    let mut peak: Option<f64> = None;
    for r in &mut t.records[window] {
        if r.theta.len() != ansatz.n_params() {
            return Err(Error::ParameterCountMismatch {
                expected: ansatz.n_params(),
                actual: r.theta.len(),
            });
        }
        ansatz.set_theta(&r.theta)?;
        let s = ansatz.prepare()?.entanglement_entropy(subset)?;
        r.entropy = Some(s);
        peak = Some(peak.map_or(s, |p: f64| p.max(s)));
    }
    Ok(peak)
}

/// Record range to scan for the entanglement peak: flow snapshots up to and
/// including the first whose optimal-state mass reaches `threshold`.
pub fn peak_window(t: &Trajectory, threshold: f64) -> std::ops::Range<usize> {
    let mut end = 0;
    for (idx, r) in t.records.iter().enumerate() {
        if r.phase != Phase::Flow {
            break;
        }
        end = idx + 1;
        if r.optimal_norm >= threshold {
            break;
        }
    }
    0..end
}

#[derive(Clone, Copy, Debug)]
pub struct EntropyFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub points: usize,
}

/// Ordinary least squares for entropy against system size, with standard
/// errors from the residual variance.
pub fn volume_law_fit(points: &[(f64, f64)]) -> Result<EntropyFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidInput("all sizes equal, slope undefined".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let sigma_sqr = ssr / (nf - 2.0);
    Ok(EntropyFit {
        slope,
        intercept,
        slope_stderr: (sigma_sqr / sxx).sqrt(),
        intercept_stderr: (sigma_sqr * (1.0 / nf + mean_x * mean_x / sxx)).sqrt(),
        points: n,
    })
}

#[derive(Clone, Debug)]
pub struct BatchStats {
    pub runs: usize,
    pub successes: usize,
    pub success_fraction: f64,
    /// Final approximation ratios averaged over runs where they are defined.
    pub mean_final_ar: f64,
    /// Mean 1 - ar at each iteration index; shorter runs contribute their
    /// final value past their end.
    pub mean_ar_error: Vec<f64>,
    /// Standard error of the mean at each iteration index; zero for a
    /// single contributing run.
    pub sem_ar_error: Vec<f64>,
    /// Final active gate count over edge count, a circuit-depth proxy.
    pub mean_layer_equivalents: f64,
    pub max_layer_equivalents: f64,
    /// First record index where ar reached 1 - 1e-9, averaged over the runs
    /// that got there; NaN when none did.
    pub mean_iterations_to_converge: f64,
}

const CONVERGED_AR: f64 = 1.0 - 1e-9;

pub fn batch_stats(runs: &[Trajectory]) -> BatchStats {
    let n_runs = runs.len();
    let successes = runs.iter().filter(|t| t.success).count();
    let longest = runs.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let mut mean_ar_error = vec![0.0; longest];
    let mut second = vec![0.0; longest];
    let mut counts = vec![0usize; longest];
    for t in runs {
        let mut last = f64::NAN;
        for idx in 0..longest {
            let err = t.records.get(idx).map(|r| r.ar_error).unwrap_or(last);
            last = err;
            if err.is_finite() {
                mean_ar_error[idx] += err;
                second[idx] += err * err;
                counts[idx] += 1;
            }
        }
    }
    let mut sem_ar_error = vec![0.0; longest];
    for idx in 0..longest {
        let c = counts[idx];
        if c == 0 {
            mean_ar_error[idx] = f64::NAN;
            sem_ar_error[idx] = f64::NAN;
            continue;
        }
        let cf = c as f64;
        mean_ar_error[idx] /= cf;
        sem_ar_error[idx] = if c > 1 {
            let var = (second[idx] / cf - mean_ar_error[idx] * mean_ar_error[idx]).max(0.0);
            (var / (cf - 1.0)).sqrt()
        } else {
            0.0
        };
    }
    let finite_final: Vec<f64> = runs
        .iter()
        .map(|t| t.final_record().ar)
        .filter(|ar| ar.is_finite())
        .collect();
    let mean_final_ar = if finite_final.is_empty() {
        f64::NAN
    } else {
        finite_final.iter().sum::<f64>() / finite_final.len() as f64
    };
    let layers: Vec<f64> = runs
        .iter()
        .filter(|t| t.meta.edge_count > 0)
        .map(|t| t.final_record().active_count as f64 / t.meta.edge_count as f64)
        .collect();
    let (mean_layer_equivalents, max_layer_equivalents) = if layers.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            layers.iter().sum::<f64>() / layers.len() as f64,
            layers.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let convergence: Vec<f64> = runs
        .iter()
        .filter_map(|t| {
            t.records
                .iter()
                .position(|r| r.ar >= CONVERGED_AR)
                .map(|idx| idx as f64)
        })
        .collect();
    let mean_iterations_to_converge = if convergence.is_empty() {
        f64::NAN
    } else {
        convergence.iter().sum::<f64>() / convergence.len() as f64
    };
    BatchStats {
        runs: n_runs,
        successes,
        success_fraction: if n_runs == 0 { f64::NAN } else { successes as f64 / n_runs as f64 },
        mean_final_ar,
        mean_ar_error,
        sem_ar_error,
        mean_layer_equivalents,
        max_layer_equivalents,
        mean_iterations_to_converge,
    }
}
