//! Fully connected ZY rotation ansatz.
//!
//! One parameter per vertex pair. Vertices are ranked by total absolute
//! incident weight and each gate exp(i theta Z_r Y_q) puts the Z on the
//! higher-ranked vertex of its pair. Gates apply in lexicographic rank-pair
//! order starting from |+>^n. A nonzero pruning threshold freezes gates whose
//! angle is small out of the circuit while their parameters keep evolving.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::statevector::{zy_kernel_real, StateVector, MAX_QUBITS};

/// Which end of the vertex weight ordering gets rank 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankOrder {
    /// Rank 0 is the vertex with the largest total absolute incident weight.
    Descending,
    /// Reversed ordering, kept for comparison runs.
    Ascending,
}

impl std::fmt::Display for RankOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RankOrder::Descending => "descending",
            RankOrder::Ascending => "ascending",
        })
    }
}

impl std::str::FromStr for RankOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "descending" => Ok(RankOrder::Descending),
            "ascending" => Ok(RankOrder::Ascending),
            other => Err(Error::InvalidInput(format!("unknown rank order '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ansatz {
    n_qubits: usize,
    /// Rank pairs (r, q) with r < q, in application order.
    pairs: Vec<(usize, usize)>,
    /// Resolved (z_qubit, y_qubit) per gate.
    gate_qubits: Vec<(usize, usize)>,
    vertex_of_rank: Vec<usize>,
    theta: Vec<f64>,
    epsilon: f64,
    active: Vec<bool>,
}

impl Ansatz {
    pub fn build(graph: &WeightedGraph, epsilon: f64) -> Result<Self> {
        Self::build_with_order(graph, epsilon, RankOrder::Descending)
    }

    pub fn build_with_order(
        graph: &WeightedGraph,
        epsilon: f64,
        order: RankOrder,
    ) -> Result<Self> {
        let n = graph.n_vertices();
        if n < 1 || n > MAX_QUBITS {
            return Err(Error::SizeOutOfRange { n, min: 1, max: MAX_QUBITS });
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidInput(format!("pruning threshold {epsilon} must be finite and >= 0")));
        }
        let profile = graph.vertex_profile();
        let vertex_of_rank = match order {
            RankOrder::Descending => profile.order,
            RankOrder::Ascending => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| {
                    profile.rho[a].partial_cmp(&profile.rho[b]).unwrap().then(a.cmp(&b))
                });
                idx
            }
        };
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        let mut gate_qubits = Vec::with_capacity(pairs.capacity());
        for r in 0..n {
            for q in (r + 1)..n {
                pairs.push((r, q));
                gate_qubits.push((vertex_of_rank[r], vertex_of_rank[q]));
            }
        }
        let n_params = pairs.len();
        let active = vec![epsilon == 0.0; n_params];
        Ok(Ansatz {
            n_qubits: n,
            pairs,
            gate_qubits,
            vertex_of_rank,
            theta: vec![0.0; n_params],
            epsilon,
            active,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn gate_qubits(&self) -> &[(usize, usize)] {
        &self.gate_qubits
    }

    pub fn vertex_of_rank(&self) -> &[usize] {
        &self.vertex_of_rank
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn active_gate_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Replaces all angles and refreshes the pruning mask: with a nonzero
    /// threshold, gate j stays in the circuit iff |theta_j| >= threshold.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.pairs.len() {
            return Err(Error::ParameterCountMismatch {
                expected: self.pairs.len(),
                actual: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite angle".into()));
        }
        self.theta.copy_from_slice(theta);
        if self.epsilon > 0.0 {
            for (a, t) in self.active.iter_mut().zip(&self.theta) {
                *a = t.abs() >= self.epsilon;
            }
        }
        Ok(())
    }

    /// Runs the circuit, skipping pruned gates.
    pub fn prepare(&self) -> Result<StateVector> {
        let mut buf = Vec::new();
        self.prepare_real_into(&mut buf);
        Ok(StateVector::from_real_unchecked(self.n_qubits, &buf))
    }

    /// Runs the circuit with gate j forced into it at angle theta_j + delta,
    /// whether or not it is pruned. All other gates follow the pruning mask.
    pub fn prepare_shifted(&self, j: usize, delta: f64) -> Result<StateVector> {
        if j >= self.pairs.len() {
            return Err(Error::InvalidInput(format!(
                "gate index {j} out of range for {} parameters",
                self.pairs.len()
            )));
        }
        let mut buf = Vec::new();
        self.fill_plus_real(&mut buf);
        for k in 0..self.pairs.len() {
            if k == j {
                self.apply_gate_real(k, self.theta[k] + delta, &mut buf);
            } else if self.active[k] {
                self.apply_gate_real(k, self.theta[k], &mut buf);
            }
        }
        Ok(StateVector::from_real_unchecked(self.n_qubits, &buf))
    }

    pub(crate) fn fill_plus_real(&self, buf: &mut Vec<f64>) {
        let dim = 1usize << self.n_qubits;
        buf.clear();
        buf.resize(dim, 1.0 / (dim as f64).sqrt());
    }

    pub(crate) fn prepare_real_into(&self, buf: &mut Vec<f64>) {
        self.fill_plus_real(buf);
        for k in 0..self.pairs.len() {
            if self.active[k] {
                self.apply_gate_real(k, self.theta[k], buf);
            }
        }
    }

    pub(crate) fn apply_gate_real(&self, j: usize, angle: f64, buf: &mut [f64]) {
        let (z, y) = self.gate_qubits[j];
        zy_kernel_real(buf, z, y, angle);
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_nws, Ensemble};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weighted_triangle() -> WeightedGraph {
        WeightedGraph::new(3, vec![(0, 1, 1.0), (0, 2, 0.5), (1, 2, 2.0)], Ensemble::Custom, 0)
            .unwrap()
    }

    #[test]
    fn pair_layout_is_lexicographic() {
        let g = gen_nws(5, 0).unwrap();
        let a = Ansatz::build(&g, 0.0).unwrap();
        assert_eq!(a.n_params(), 10);
        assert_eq!(
            a.pairs(),
            &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
        );
    }

    #[test]
    fn ranking_resolves_gate_qubits() {
        // rho = (1.5, 3.0, 2.5) so ranks are vertices [1, 2, 0]; the first
        // gate puts Z on vertex 1 and Y on vertex 2.
        let a = Ansatz::build(&weighted_triangle(), 0.0).unwrap();
        assert_eq!(a.vertex_of_rank(), &[1, 2, 0]);
        assert_eq!(a.gate_qubits(), &[(1, 2), (1, 0), (2, 0)]);
    }

    #[test]
    fn ascending_order_reverses_distinct_ranks() {
        let a = Ansatz::build_with_order(&weighted_triangle(), 0.0, RankOrder::Ascending).unwrap();
        assert_eq!(a.vertex_of_rank(), &[0, 2, 1]);
    }

    #[test]
    fn zero_angles_prepare_plus_state() {
        let g = gen_nws(6, 1).unwrap();
        let a = Ansatz::build(&g, 0.0).unwrap();
        let psi = a.prepare().unwrap();
        for z in 0..64 {
            assert_abs_diff_eq!(psi.amplitude(z).re, 1.0 / 8.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn quarter_turn_correlates_gate_pair() {
        let g = WeightedGraph::new(2, vec![(0, 1, 1.0)], Ensemble::Custom, 0).unwrap();
        let mut a = Ansatz::build(&g, 0.0).unwrap();
        a.set_theta(&[std::f64::consts::FRAC_PI_4]).unwrap();
        let psi = a.prepare().unwrap();
        assert_abs_diff_eq!(psi.expect_zz(0, 1).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pruning_mask_follows_threshold() {
        let g = gen_nws(5, 2).unwrap();
        let mut a = Ansatz::build(&g, 0.1).unwrap();
        assert_eq!(a.active_gate_count(), 0);
        let mut theta = vec![0.05; 10];
        theta[3] = 0.5;
        theta[7] = -0.1;
        theta[9] = -2.0;
        a.set_theta(&theta).unwrap();
        let active: Vec<bool> = a.active().to_vec();
        let expected: Vec<bool> = theta.iter().map(|t| t.abs() >= 0.1).collect();
        assert_eq!(active, expected);
        assert_eq!(a.active_gate_count(), 3);
    }

    #[test]
    fn zero_threshold_keeps_every_gate_active() {
        let g = gen_nws(5, 2).unwrap();
        let mut a = Ansatz::build(&g, 0.0).unwrap();
        assert_eq!(a.active_gate_count(), 10);
        a.set_theta(&vec![0.0; 10]).unwrap();
        assert_eq!(a.active_gate_count(), 10);
    }

    #[test]
    fn pruned_circuit_equals_circuit_without_small_gates() {
        let g = gen_nws(6, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta: Vec<f64> = (0..15).map(|_| rng.random_range(-0.3..0.3)).collect();
        let mut pruned = Ansatz::build(&g, 0.15).unwrap();
        pruned.set_theta(&theta).unwrap();
        let mut manual = Ansatz::build(&g, 0.0).unwrap();
        let zeroed: Vec<f64> =
            theta.iter().map(|&t| if t.abs() >= 0.15 { t } else { 0.0 }).collect();
        manual.set_theta(&zeroed).unwrap();
        let a = pruned.prepare().unwrap();
        let b = manual.prepare().unwrap();
        for z in 0..64 {
            assert_abs_diff_eq!(a.amplitude(z).re, b.amplitude(z).re, epsilon = 1e-13);
        }
    }

    #[test]
    fn shifted_preparation_forces_pruned_gate_in() {
        let g = gen_nws(5, 4).unwrap();
        let mut a = Ansatz::build(&g, 0.2).unwrap();
        let mut theta = vec![0.0; 10];
        theta[2] = 0.1;
        a.set_theta(&theta).unwrap();
        assert_eq!(a.active_gate_count(), 0);
        let base = a.prepare().unwrap();
        let forced = a.prepare_shifted(2, 0.0).unwrap();
        let mut max_diff = 0.0f64;
        for z in 0..32 {
            max_diff = max_diff.max((base.amplitude(z).re - forced.amplitude(z).re).abs());
        }
        assert!(max_diff > 1e-3);
    }

    #[test]
    fn shifted_preparation_matches_manual_angle_change() {
        let g = gen_nws(5, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let theta: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = Ansatz::build(&g, 0.0).unwrap();
        a.set_theta(&theta).unwrap();
        for (j, delta) in [(0, 0.4), (4, -0.7), (9, std::f64::consts::FRAC_PI_4)] {
            let shifted = a.prepare_shifted(j, delta).unwrap();
            let mut manual_theta = theta.clone();
            manual_theta[j] += delta;
            let mut manual = Ansatz::build(&g, 0.0).unwrap();
            manual.set_theta(&manual_theta).unwrap();
            let reference = manual.prepare().unwrap();
            for z in 0..32 {
                assert_abs_diff_eq!(
                    shifted.amplitude(z).re,
                    reference.amplitude(z).re,
                    epsilon = 1e-13
                );
            }
        }
    }

    #[test]
    fn unshifted_forced_gate_equals_plain_preparation_when_active() {
        let g = gen_nws(5, 7).unwrap();
        let mut a = Ansatz::build(&g, 0.0).unwrap();
        let theta: Vec<f64> = (0..10).map(|k| 0.1 + 0.05 * k as f64).collect();
        a.set_theta(&theta).unwrap();
        let base = a.prepare().unwrap();
        let forced = a.prepare_shifted(3, 0.0).unwrap();
        for z in 0..32 {
            assert_eq!(base.amplitude(z).re.to_bits(), forced.amplitude(z).re.to_bits());
        }
    }

    #[test]
    fn amplitudes_are_symmetric_under_global_bit_flip() {
        // The circuit commutes with X on every qubit and the start state is
        // X-invariant, so amplitudes on complementary bitstrings match.
        let g = gen_nws(6, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut a = Ansatz::build(&g, 0.0).unwrap();
        let theta: Vec<f64> = (0..15).map(|_| rng.random_range(-1.5..1.5)).collect();
        a.set_theta(&theta).unwrap();
        let psi = a.prepare().unwrap();
        for z in 0..64usize {
            let zbar = !z & 63;
            assert_abs_diff_eq!(psi.amplitude(z).re, psi.amplitude(zbar).re, epsilon = 1e-12);
        }
    }

    #[test]
    fn staged_gate_walk_matches_full_preparation() {
        let g = gen_nws(5, 11).unwrap();
        let mut a = Ansatz::build(&g, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let theta: Vec<f64> = (0..10).map(|_| rng.random_range(-0.4..0.4)).collect();
        a.set_theta(&theta).unwrap();
        let mut full = Vec::new();
        a.prepare_real_into(&mut full);
        let mut staged = Vec::new();
        a.fill_plus_real(&mut staged);
        for k in 0..a.n_params() {
            if a.active()[k] {
                a.apply_gate_real(k, a.theta()[k], &mut staged);
            }
        }
        for (x, y) in staged.iter().zip(&full) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn input_guards() {
        let g = gen_nws(5, 0).unwrap();
        assert!(Ansatz::build(&g, -0.1).is_err());
        assert!(Ansatz::build(&g, f64::NAN).is_err());
        let mut a = Ansatz::build(&g, 0.0).unwrap();
        assert!(a.set_theta(&[0.0; 9]).is_err());
        assert!(a.set_theta(&[f64::NAN; 10]).is_err());
        assert!(a.prepare_shifted(10, 0.0).is_err());
    }
}
