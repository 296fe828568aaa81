//! Diagonal cost Hamiltonians for weighted MAXCUT, in both sign conventions,
//! plus the sigmoid spectral filter and an exact imaginary-time step used as
//! a reference evolution.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::statevector::StateVector;

/// Standard deviations below this floor mean the reachable spectrum has
/// collapsed to a point and the sigmoid argument would blow up.
pub const SIGMA_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// C(z) = sum_(u,v) w_uv z_u z_v with spins z in {+1, -1}.
    Physics,
    /// C(z) = -(total weight of cut edges); always <= 0.
    ComputerScience,
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convention::Physics => "physics",
            Convention::ComputerScience => "cs",
        })
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physics" => Ok(Convention::Physics),
            "cs" => Ok(Convention::ComputerScience),
            other => Err(Error::InvalidInput(format!("unknown convention '{other}'"))),
        }
    }
}

/// H_c = offset + sum_alpha coeff_alpha Z_i Z_j, materialized as a dense
/// diagonal over the 2^n computational basis states.
#[derive(Clone, Debug)]
pub struct CostHamiltonian {
    pub n_qubits: usize,
    pub convention: Convention,
    /// One (i, j, coefficient) entry per graph edge, in edge order.
    pub terms: Vec<(usize, usize, f64)>,
    pub offset: f64,
    pub diagonal: Vec<f64>,
    pub c_opt: f64,
    pub optimal_set: Vec<u64>,
}

/// Snapshot of the reachable cost spectrum in the current state.
#[derive(Clone, Copy, Debug)]
pub struct SpectralStats {
    pub e_tau: f64,
    pub sigma_tau: f64,
    pub sigma_0: f64,
}

impl CostHamiltonian {
    /// Builds the diagonal from the term list; the optimum comes from the
    /// independent exhaustive sweep over cut costs.
    ///
    /// Physics terms carry the edge weight directly. ComputerScience rewrites
    /// -w (1 - Z Z)/2 per edge into a w/2 coefficient plus a -w/2 offset.
    pub fn build(graph: &WeightedGraph, convention: Convention) -> Result<Self> {
        let n = graph.n_vertices();
        if n > crate::statevector::MAX_QUBITS {
            return Err(Error::SizeOutOfRange { n, min: 1, max: crate::statevector::MAX_QUBITS });
        }
        let (terms, offset) = match convention {
            Convention::Physics => {
                (graph.edges().iter().map(|&(u, v, w)| (u, v, w)).collect::<Vec<_>>(), 0.0)
            }
            Convention::ComputerScience => {
                let total: f64 = graph.edges().iter().map(|e| e.2).sum();
                (
                    graph.edges().iter().map(|&(u, v, w)| (u, v, w / 2.0)).collect::<Vec<_>>(),
                    -total / 2.0,
                )
            }
        };
        let dim = 1usize << n;
        let mut diagonal = vec![offset; dim];
        for &(i, j, coeff) in &terms {
            let mask = (1usize << i) | (1usize << j);
            for (z, d) in diagonal.iter_mut().enumerate() {
                if (z & mask).count_ones() & 1 == 1 {
                    *d -= coeff;
                } else {
                    *d += coeff;
                }
            }
        }
        let (c_opt, optimal_set) = graph.brute_force_optimum(convention)?;
        Ok(CostHamiltonian { n_qubits: n, convention, terms, offset, diagonal, c_opt, optimal_set })
    }

    /// Standard deviation of the cost in |+>^n, evaluated numerically.
    pub fn sigma_0(&self) -> Result<f64> {
        let plus = StateVector::plus_state(self.n_qubits)?;
        Ok(variance(&plus, self)?.sqrt())
    }
}

/// <H_c> in the given state.
pub fn energy(state: &StateVector, h: &CostHamiltonian) -> Result<f64> {
    state.expect_diagonal(&h.diagonal)
}

/// Cost variance <H^2> - <H>^2, with sub-1e-12 negative round-off clamped.
pub fn variance(state: &StateVector, h: &CostHamiltonian) -> Result<f64> {
    if h.diagonal.len() != state.len() {
        return Err(Error::DimensionMismatch { expected: state.len(), actual: h.diagonal.len() });
    }
    let mut first = 0.0;
    let mut second = 0.0;
    for (a, d) in state.amplitudes().iter().zip(&h.diagonal) {
        let p = a.norm_sqr();
        first += p * d;
        second += p * d * d;
    }
    let var = second - first * first;
    if var < 0.0 {
        debug_assert!(var > -1e-12 * second.max(1.0));
        return Ok(0.0);
    }
    Ok(var)
}

/// Energy divided by the optimal cost. With a negative optimum this lies in
/// [0, 1] for energies between 0 and c_opt, reaching 1 at the optimum.
pub fn approximation_ratio(e: f64, h: &CostHamiltonian) -> Result<f64> {
    if h.c_opt == 0.0 {
        return Err(Error::DegenerateOptimum);
    }
    Ok(e / h.c_opt)
}

/// Monotone logistic filter of the diagonal:
/// f(c) = 1 / (1 + exp(-sigma_0 (c - e_tau) / (4 sigma_tau^2))).
///
/// Squashes the reachable spectrum into (0, 1) around the current mean while
/// preserving the ordering of costs, so the minimizer set is unchanged.
pub fn sigmoid_transform(diagonal: &[f64], stats: &SpectralStats) -> Result<Vec<f64>> {
    if stats.sigma_tau < SIGMA_FLOOR {
        return Err(Error::ConvergedSpectrum { sigma: stats.sigma_tau });
    }
    let scale = stats.sigma_0 / (4.0 * stats.sigma_tau * stats.sigma_tau);
    Ok(diagonal.iter().map(|&c| logistic(scale * (c - stats.e_tau))).collect())
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One step of exact normalized imaginary-time evolution,
/// |psi> -> exp(-dtau H_c)|psi> / norm. The diagonal is shifted by c_opt
/// before exponentiating, which only changes the discarded global scale.
pub fn exact_imaginary_time_step(
    state: &mut StateVector,
    h: &CostHamiltonian,
    dtau: f64,
) -> Result<()> {
    if h.diagonal.len() != state.len() {
        return Err(Error::DimensionMismatch { expected: state.len(), actual: h.diagonal.len() });
    }
    let c_opt = h.c_opt;
    for (a, d) in state.amplitudes_mut().iter_mut().zip(&h.diagonal) {
        *a *= (-dtau * (d - c_opt)).exp();
    }
    let norm = state.norm_sqr();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidInput(format!("imaginary time step of {dtau} annihilated the state")));
    }
    state.renormalize();
    Ok(())
}
