//! Dense statevector simulator.
//!
//! Basis indices are little endian: bit `q` of an index is the value of
//! qubit `q`, so index 5 = 0b101 means qubits 0 and 2 are set.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard cap on register width; 2^24 amplitudes is 256 MiB.
pub const MAX_QUBITS: usize = 24;

#[derive(Clone, Debug)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Uniform superposition |+>^n, the start state of every optimizer here.
    pub fn plus_state(n_qubits: usize) -> Result<Self> {
        if n_qubits < 1 || n_qubits > MAX_QUBITS {
            return Err(Error::SizeOutOfRange { n: n_qubits, min: 1, max: MAX_QUBITS });
        }
        let dim = 1usize << n_qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(StateVector { n_qubits, amps: vec![a; dim] })
    }

    /// Wraps raw amplitudes. The vector must have length 2^n and unit norm.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_qubits < 1 || n_qubits > MAX_QUBITS {
            return Err(Error::SizeOutOfRange { n: n_qubits, min: 1, max: MAX_QUBITS });
        }
        let dim = 1usize << n_qubits;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: amps.len() });
        }
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(StateVector { n_qubits, amps })
    }

    /// Lifts a real amplitude buffer produced by the internal f64 path back
    /// into a full state. The buffer is trusted to be normalized.
    pub(crate) fn from_real_unchecked(n_qubits: usize, reals: &[f64]) -> Self {
        debug_assert_eq!(reals.len(), 1usize << n_qubits);
        debug_assert!((reals.iter().map(|r| r * r).sum::<f64>() - 1.0).abs() < 1e-8);
        StateVector {
            n_qubits,
            amps: reals.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn renormalize(&mut self) {
        let inv = 1.0 / self.norm_sqr().sqrt();
        for a in &mut self.amps {
            *a *= inv;
        }
    }

    /// Applies exp(i theta Z_z Y_y) in place.
    ///
    /// The generator squares to the identity, so the gate is
    /// cos(theta) I + i sin(theta) Z_z Y_y; in the computational basis this is
    /// a real rotation between each pair of amplitudes that differ in the y
    /// bit, with the rotation sense set by the z bit.
    pub fn apply_zy(&mut self, z_qubit: usize, y_qubit: usize, theta: f64) -> Result<()> {
        let n = self.n_qubits;
        if z_qubit >= n {
            return Err(Error::QubitOutOfRange { q: z_qubit, n });
        }
        if y_qubit >= n {
            return Err(Error::QubitOutOfRange { q: y_qubit, n });
        }
        if z_qubit == y_qubit {
            return Err(Error::DegenerateQubitPair { q: z_qubit });
        }
        zy_kernel(&mut self.amps, z_qubit, y_qubit, theta);
        Ok(())
    }

    /// <psi| diag |psi> for a real diagonal operator.
    pub fn expect_diagonal(&self, diagonal: &[f64]) -> Result<f64> {
        if diagonal.len() != self.amps.len() {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), actual: diagonal.len() });
        }
        Ok(self
            .amps
            .iter()
            .zip(diagonal)
            .map(|(a, d)| a.norm_sqr() * d)
            .sum())
    }

    /// Two-point correlator <Z_i Z_j>.
    pub fn expect_zz(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n_qubits;
        if i >= n {
            return Err(Error::QubitOutOfRange { q: i, n });
        }
        if j >= n {
            return Err(Error::QubitOutOfRange { q: j, n });
        }
        let mask = (1usize << i) | (1usize << j);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(z, a)| {
                let sign = 1.0 - 2.0 * (((z & mask).count_ones() & 1) as f64);
                sign * a.norm_sqr()
            })
            .sum())
    }

    /// Probability mass on a set of basis states.
    pub fn subspace_norm(&self, basis_states: &[u64]) -> f64 {
        basis_states
            .iter()
            .map(|&z| {
                debug_assert!((z as usize) < self.amps.len());
                self.amps[z as usize].norm_sqr()
            })
            .sum()
    }

    /// Writes |amp|^2 into `buf`, resizing it as needed.
    pub fn probabilities_into(&self, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.amps.iter().map(|a| a.norm_sqr()));
    }

    /// Von Neumann entanglement entropy (natural log) of the reduced state on
    /// `subset`, from the Schmidt decomposition of the amplitude matrix.
    /// `subset` must be a proper nonempty subset of the qubits.
    pub fn entanglement_entropy(&self, subset: &[usize]) -> Result<f64> {
        let n = self.n_qubits;
        if subset.is_empty() || subset.len() >= n {
            return Err(Error::BadSubset);
        }
        let mut seen = 0usize;
        for &q in subset {
            if q >= n {
                return Err(Error::QubitOutOfRange { q, n });
            }
            if seen & (1 << q) != 0 {
                return Err(Error::BadSubset);
            }
            seen |= 1 << q;
        }
        let complement: Vec<usize> = (0..n).filter(|q| seen & (1 << q) == 0).collect();
        let rows = 1usize << subset.len();
        let cols = 1usize << complement.len();
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(rows, cols);
        for (z, &a) in self.amps.iter().enumerate() {
            let mut r = 0usize;
            for (t, &q) in subset.iter().enumerate() {
                r |= ((z >> q) & 1) << t;
            }
            let mut c = 0usize;
            for (t, &q) in complement.iter().enumerate() {
                c |= ((z >> q) & 1) << t;
            }
            m[(r, c)] = a;
        }
        let singular = m.singular_values();
        // Schmidt coefficients below 1e-12 carry ~1e-22 nats and are dropped.
        let mut s = 0.0;
        for &sv in singular.iter() {
            if sv >= 1e-12 {
                let p = sv * sv;
                s -= p * p.ln();
            }
        }
        Ok(s.max(0.0))
    }
}

/// In-place Walsh-Hadamard transform with the (-1)^(popcount(s & z)) kernel.
/// Applied to a probability vector it yields every Pauli-Z-string expectation
/// at once: out[s] = <prod_{q in s} Z_q>.
pub(crate) fn walsh_transform(buf: &mut [f64]) {
    let len = buf.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        let mut g = 0;
        while g < len {
            let (lo, hi) = buf[g..g + 2 * h].split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
            g += 2 * h;
        }
        h *= 2;
    }
}

pub(crate) fn zy_kernel(amps: &mut [Complex64], z_qubit: usize, y_qubit: usize, theta: f64) {
    let (s, c) = theta.sin_cos();
    let ymask = 1usize << y_qubit;
    let zmask = 1usize << z_qubit;
    let len = amps.len();
    if zmask > ymask {
        let mut g = 0;
        while g < len {
            let s_eff = if g & zmask != 0 { -s } else { s };
            let (lo, hi) = amps[g..g + 2 * ymask].split_at_mut(ymask);
            rotate_runs(lo, hi, c, s_eff);
            g += 2 * ymask;
        }
    } else {
        let mut g = 0;
        while g < len {
            let (lo, hi) = amps[g..g + 2 * ymask].split_at_mut(ymask);
            let mut sub = 0;
            while sub < ymask {
                let s_eff = if sub & zmask != 0 { -s } else { s };
                rotate_runs(&mut lo[sub..sub + zmask], &mut hi[sub..sub + zmask], c, s_eff);
                sub += zmask;
            }
            g += 2 * ymask;
        }
    }
}

/// Same gate on a purely real amplitude array. ZY circuits starting from |+>^n
/// stay real, so the optimizer hot loops run on f64 buffers; the arithmetic
/// here matches the real parts of `zy_kernel` operation for operation.
pub(crate) fn zy_kernel_real(amps: &mut [f64], z_qubit: usize, y_qubit: usize, theta: f64) {
    let (s, c) = theta.sin_cos();
    let ymask = 1usize << y_qubit;
    let zmask = 1usize << z_qubit;
    let len = amps.len();
    if zmask > ymask {
        let mut g = 0;
        while g < len {
            let s_eff = if g & zmask != 0 { -s } else { s };
            let (lo, hi) = amps[g..g + 2 * ymask].split_at_mut(ymask);
            rotate_runs_real(lo, hi, c, s_eff);
            g += 2 * ymask;
        }
    } else {
        let mut g = 0;
        while g < len {
            let (lo, hi) = amps[g..g + 2 * ymask].split_at_mut(ymask);
            let mut sub = 0;
            while sub < ymask {
                let s_eff = if sub & zmask != 0 { -s } else { s };
                rotate_runs_real(&mut lo[sub..sub + zmask], &mut hi[sub..sub + zmask], c, s_eff);
                sub += zmask;
            }
            g += 2 * ymask;
        }
    }
}

/// Applies the ZY gate generator K = i Z x Y in place on a real array:
/// (lo, hi) -> sign (hi, -lo) over y-bit pairs, sign from the z bit. This is
/// the gate at a quarter turn, kept separate so the turn is exact.
pub(crate) fn zy_generator_apply(amps: &mut [f64], z_qubit: usize, y_qubit: usize) {
    let ymask = 1usize << y_qubit;
    let zmask = 1usize << z_qubit;
    let len = amps.len();
    if zmask > ymask {
        let mut g = 0;
        while g < len {
            let sign = if g & zmask != 0 { -1.0 } else { 1.0 };
            let (lo, hi) = amps[g..g + 2 * ymask].split_at_mut(ymask);
            swap_negate_runs(lo, hi, sign);
            g += 2 * ymask;
        }
    } else {
        let mut g = 0;
        while g < len {
            let (lo, hi) = amps[g..g + 2 * ymask].split_at_mut(ymask);
            let mut sub = 0;
            while sub < ymask {
                let sign = if sub & zmask != 0 { -1.0 } else { 1.0 };
                swap_negate_runs(&mut lo[sub..sub + zmask], &mut hi[sub..sub + zmask], sign);
                sub += zmask;
            }
            g += 2 * ymask;
        }
    }
}

/// <a| d/dtheta exp(theta K) exp(-theta K) |b> for the ZY generator K, on
/// real amplitude arrays: sum over y-bit pairs of sign * (a_lo b_hi - a_hi b_lo)
/// with the sign taken from the z bit. Used by reverse-mode gradients.
pub(crate) fn zy_generator_dot(a: &[f64], b: &[f64], z_qubit: usize, y_qubit: usize) -> f64 {
    let ymask = 1usize << y_qubit;
    let zmask = 1usize << z_qubit;
    let len = a.len();
    debug_assert_eq!(len, b.len());
    let mut acc = 0.0;
    if zmask > ymask {
        let mut g = 0;
        while g < len {
            let sign = if g & zmask != 0 { -1.0 } else { 1.0 };
            let mut partial = 0.0;
            for k in g..g + ymask {
                partial += a[k] * b[k + ymask] - a[k + ymask] * b[k];
            }
            acc += sign * partial;
            g += 2 * ymask;
        }
    } else {
        let mut g = 0;
        while g < len {
            let mut sub = 0;
            while sub < ymask {
                let sign = if sub & zmask != 0 { -1.0 } else { 1.0 };
                let mut partial = 0.0;
                for k in g + sub..g + sub + zmask {
                    partial += a[k] * b[k + ymask] - a[k + ymask] * b[k];
                }
                acc += sign * partial;
                sub += zmask;
            }
            g += 2 * ymask;
        }
    }
    acc
}

/// new_lo = c lo + s hi, new_hi = c hi - s lo, elementwise on equal-length runs.
#[inline]
fn rotate_runs(lo: &mut [Complex64], hi: &mut [Complex64], c: f64, s: f64) {
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let va = *a;
        let vb = *b;
        *a = Complex64::new(c * va.re + s * vb.re, c * va.im + s * vb.im);
        *b = Complex64::new(c * vb.re - s * va.re, c * vb.im - s * va.im);
    }
}

#[inline]
pub(crate) fn rotate_runs_real(lo: &mut [f64], hi: &mut [f64], c: f64, s: f64) {
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let va = *a;
        let vb = *b;
        *a = c * va + s * vb;
        *b = c * vb - s * va;
    }
}

#[inline]
pub(crate) fn swap_negate_runs(lo: &mut [f64], hi: &mut [f64], sign: f64) {
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let va = *a;
        *a = sign * *b;
        *b = -sign * va;
    }
}
