//! Mirror-reduced register for the ZY circuit.
//!
//! Every state the circuit can reach satisfies psi(z) = psi(~z): the start
//! state |+>^n does, and conjugating Z x Y by X x X negates both factors, so
//! each gate commutes with flipping every bit. One amplitude per {z, ~z}
//! pair is therefore enough. The split bit is the rank-0 qubit, which no
//! gate touches with its Y factor, so gates never couple a representative
//! to the discarded half and the compressed kernels keep the plain pair
//! structure of the full-register ones.

use crate::ansatz::Ansatz;
use crate::statevector::{
    rotate_runs_real, swap_negate_runs, zy_generator_apply, zy_generator_dot, zy_kernel_real,
};

pub(crate) struct HalfSpace {
    n_qubits: usize,
    split: usize,
    dim: usize,
    full_mask: usize,
    /// Compressed z qubit per gate; None when the z qubit is the split bit,
    /// which is always clear on representatives so the sign is fixed.
    gate_z: Vec<Option<usize>>,
    gate_y: Vec<usize>,
}

impl HalfSpace {
    pub fn new(ansatz: &Ansatz) -> Self {
        let n = ansatz.n_qubits();
        let split = ansatz.vertex_of_rank()[0];
        let compress = |t: usize| t - usize::from(t > split);
        let mut gate_z = Vec::with_capacity(ansatz.n_params());
        let mut gate_y = Vec::with_capacity(ansatz.n_params());
        for &(zq, yq) in ansatz.gate_qubits() {
            debug_assert_ne!(yq, split, "rank-0 qubit is never a Y target");
            gate_z.push((zq != split).then(|| compress(zq)));
            gate_y.push(compress(yq));
        }
        HalfSpace {
            n_qubits: n,
            split,
            dim: 1usize << (n - 1),
            full_mask: (1usize << n) - 1,
            gate_z,
            gate_y,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Full-register index of representative idx (split bit clear).
    #[inline]
    pub fn expand_index(&self, idx: usize) -> usize {
        let below = idx & ((1usize << self.split) - 1);
        below | (idx >> self.split) << (self.split + 1)
    }

    /// Representative slot of a full-register index, flipping to the member
    /// of {z, ~z} whose split bit is clear.
    #[cfg(test)]
    fn compress_index(&self, z: usize) -> usize {
        let rep = if z >> self.split & 1 == 1 { z ^ self.full_mask } else { z };
        (rep & ((1usize << self.split) - 1)) | (rep >> (self.split + 1)) << self.split
    }

    /// Walsh index carrying the full-register correlator of bits u and v:
    /// the full coefficient at an even-weight mask is twice the compressed
    /// one, and a mask containing the split bit reads through the weight-1
    /// remainder because representatives hold that bit clear.
    pub fn term_mask(&self, u: usize, v: usize) -> usize {
        let bit = |t: usize| 1usize << (t - usize::from(t > self.split));
        if u == self.split {
            bit(v)
        } else if v == self.split {
            bit(u)
        } else {
            bit(u) | bit(v)
        }
    }

    /// Uniform start state; entries are true amplitudes, so the stored norm
    /// squared is one half.
    pub fn fill_plus(&self, buf: &mut Vec<f64>) {
        let amp = 0.5f64.powi(self.n_qubits as i32).sqrt();
        buf.clear();
        buf.resize(self.dim, amp);
    }

    pub fn apply_gate(&self, j: usize, theta: f64, buf: &mut [f64]) {
        match self.gate_z[j] {
            Some(z) => zy_kernel_real(buf, z, self.gate_y[j], theta),
            None => rotation_unsigned(buf, self.gate_y[j], theta),
        }
    }

    pub fn apply_generator(&self, j: usize, buf: &mut [f64]) {
        match self.gate_z[j] {
            Some(z) => zy_generator_apply(buf, z, self.gate_y[j]),
            None => generator_unsigned(buf, self.gate_y[j]),
        }
    }

    /// <a| K_j |b> for gate j's generator; doubling recovers the
    /// full-register inner product.
    pub fn generator_dot(&self, j: usize, a: &[f64], b: &[f64]) -> f64 {
        match self.gate_z[j] {
            Some(z) => zy_generator_dot(a, b, z, self.gate_y[j]),
            None => {
                let ymask = 1usize << self.gate_y[j];
                let mut acc = 0.0;
                let mut g = 0;
                while g < a.len() {
                    for k in g..g + ymask {
                        acc += a[k] * b[k + ymask] - a[k + ymask] * b[k];
                    }
                    g += 2 * ymask;
                }
                acc
            }
        }
    }

    pub fn apply_active_suffix(&self, ansatz: &Ansatz, from: usize, buf: &mut [f64]) {
        for j in from..ansatz.n_params() {
            if ansatz.active()[j] {
                self.apply_gate(j, ansatz.theta()[j], buf);
            }
        }
    }

    pub fn prepare_into(&self, ansatz: &Ansatz, buf: &mut Vec<f64>) {
        self.fill_plus(buf);
        self.apply_active_suffix(ansatz, 0, buf);
    }

    /// Writes each representative value to both members of its pair.
    pub fn expand_pairwise(&self, half: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(half.len(), self.dim);
        out.clear();
        out.resize(self.dim << 1, 0.0);
        for (idx, &v) in half.iter().enumerate() {
            let z = self.expand_index(idx);
            out[z] = v;
            out[z ^ self.full_mask] = v;
        }
    }

    /// Keeps the representative entry of each pair. Debug builds check the
    /// input really is pair-symmetric.
    pub fn compress_symmetric(&self, full: &[f64]) -> Vec<f64> {
        debug_assert_eq!(full.len(), self.dim << 1);
        (0..self.dim)
            .map(|idx| {
                let z = self.expand_index(idx);
                debug_assert_eq!(full[z].to_bits(), full[z ^ self.full_mask].to_bits());
                full[z]
            })
            .collect()
    }
}

fn rotation_unsigned(amps: &mut [f64], y_qubit: usize, theta: f64) {
    let (s, c) = theta.sin_cos();
    let ymask = 1usize << y_qubit;
    let mut g = 0;
    while g < amps.len() {
        let (lo, hi) = amps[g..g + 2 * ymask].split_at_mut(ymask);
        rotate_runs_real(lo, hi, c, s);
        g += 2 * ymask;
    }
}

fn generator_unsigned(amps: &mut [f64], y_qubit: usize) {
    let ymask = 1usize << y_qubit;
    let mut g = 0;
    while g < amps.len() {
        let (lo, hi) = amps[g..g + 2 * ymask].split_at_mut(ymask);
        swap_negate_runs(lo, hi, 1.0);
        g += 2 * ymask;
    }
}
