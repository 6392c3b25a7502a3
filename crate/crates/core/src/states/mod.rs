//! Pure states to be stored, and how their amplitudes map onto registers.

mod io;
mod layout;

pub use io::{load_state_file, save_state_file, AmplitudeFile};
pub use layout::{EncodingMap, Layout, TensorFactor};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::numeric::norm_sqr;

/// Tolerance on `Σ|α_j|² = 1`.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Normalized pure state `Σ_j α_j |j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    label: String,
}

impl StateVector {
    /// Wraps already-normalized amplitudes.
    pub fn new(amplitudes: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::invalid(format!(
                "state dimension must be at least 2, got {}",
                amplitudes.len()
            )));
        }
        let norm = norm_sqr(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Validation(format!("state has squared norm {norm}, expected 1")));
        }
        Ok(Self {
            amplitudes,
            label: label.into(),
        })
    }

    /// Divides by the norm first.
    pub fn normalized(mut amplitudes: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        let norm = norm_sqr(&amplitudes).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Validation(format!("cannot normalize a vector of norm {norm}")));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Self::new(amplitudes, label)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `|α_j|²` for every `j`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        Error::check_dim(self.dim(), other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

fn real_state(values: Vec<f64>, label: String) -> Result<StateVector> {
    StateVector::new(values.into_iter().map(|x| Complex64::new(x, 0.0)).collect(), label)
}

fn register_dim(n_qubits: u32) -> Result<usize> {
    if n_qubits == 0 {
        return Err(Error::invalid("number of qubits must be positive"));
    }
    if n_qubits > 30 {
        return Err(Error::invalid(format!("{n_qubits} qubits is beyond the supported range")));
    }
    Ok(1usize << n_qubits)
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `n_qubits` qubits.
pub fn ghz_state(n_qubits: u32) -> Result<StateVector> {
    let dim = register_dim(n_qubits)?;
    let mut amps = vec![0.0; dim];
    amps[0] = std::f64::consts::FRAC_1_SQRT_2;
    amps[dim - 1] = std::f64::consts::FRAC_1_SQRT_2;
    real_state(amps, format!("ghz:{n_qubits}"))
}

/// Equal superposition of the single-excitation strings.
pub fn w_state(n_qubits: u32) -> Result<StateVector> {
    let dim = register_dim(n_qubits)?;
    let weight = 1.0 / (n_qubits as f64).sqrt();
    let mut amps = vec![0.0; dim];
    for i in 0..n_qubits {
        amps[1 << i] = weight;
    }
    real_state(amps, format!("w:{n_qubits}"))
}

pub fn equal_superposition_state(dim: usize) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::invalid(format!("dimension must be at least 2, got {dim}")));
    }
    let weight = 1.0 / (dim as f64).sqrt();
    real_state(vec![weight; dim], format!("equal:{dim}"))
}

/// Number state `|n⟩` in a `dim`-level space.
pub fn fock_state(dim: usize, n: usize) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::invalid(format!("dimension must be at least 2, got {dim}")));
    }
    if n >= dim {
        return Err(Error::invalid(format!("Fock level {n} does not fit in dimension {dim}")));
    }
    let mut amps = vec![0.0; dim];
    amps[n] = 1.0;
    real_state(amps, format!("fock:{dim}:{n}"))
}

/// Truncated displacement `exp(α(a† − a))|0⟩` with `a` the `dim`-level
/// annihilation operator. Differs from the infinite-space coherent state near
/// the truncation edge.
pub fn coherent_state(dim: usize, alpha: f64) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::invalid(format!("dimension must be at least 2, got {dim}")));
    }
    if !alpha.is_finite() {
        return Err(Error::invalid("coherent amplitude must be finite"));
    }
    // Real antisymmetric generator: G[k+1][k] = α√(k+1), G[k][k+1] = −α√(k+1).
    let mut generator = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim - 1 {
        let v = alpha * ((k + 1) as f64).sqrt();
        generator[(k + 1, k)] = v;
        generator[(k, k + 1)] = -v;
    }
    let displacement = expm(&generator)?;
    let column: Vec<Complex64> = displacement
        .column(0)
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    StateVector::normalized(column, format!("coherent:{dim}:{alpha}"))
}

/// Default displacement `α = √(dim/2)`.
pub fn default_coherent_alpha(dim: usize) -> f64 {
    (dim as f64 / 2.0).sqrt()
}

fn state_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn draw_box_amplitudes(rng: &mut ChaCha20Rng, dim: usize) -> Vec<Complex64> {
    (0..dim)
        .map(|_| {
            let re = rng.random_range(-0.5..=0.5);
            let im = rng.random_range(-0.5..=0.5);
            Complex64::new(re, im)
        })
        .collect()
}

/// Real and imaginary parts uniform on `[-0.5, 0.5]`, then normalized.
///
/// Draws come from ChaCha20 seeded with `seed` via `seed_from_u64`, real part
/// before imaginary part, index 0 first.
pub fn random_arbitrary_state(dim: usize, seed: u64) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::invalid(format!("dimension must be at least 2, got {dim}")));
    }
    let mut rng = state_rng(seed);
    let amps = draw_box_amplitudes(&mut rng, dim);
    StateVector::normalized(amps, format!("arb:{dim}:{seed}"))
}

/// Product of `n_qubits` independent random qubit states, each drawn as in
/// [`random_arbitrary_state`] from one shared stream (qubit 0 first).
pub fn random_unentangled_state(n_qubits: u32, seed: u64) -> Result<StateVector> {
    let dim = register_dim(n_qubits)?;
    let mut rng = state_rng(seed);
    let mut factors = Vec::with_capacity(n_qubits as usize);
    for _ in 0..n_qubits {
        let mut q = draw_box_amplitudes(&mut rng, 2);
        let norm = norm_sqr(&q).sqrt();
        q.iter_mut().for_each(|a| *a /= norm);
        factors.push(q);
    }
    let amps: Vec<Complex64> = (0..dim)
        .map(|j| {
            factors
                .iter()
                .enumerate()
                .map(|(i, q)| q[(j >> i) & 1])
                .product()
        })
        .collect();
    StateVector::normalized(amps, format!("unent:{n_qubits}:{seed}"))
}

/// Moves the largest-magnitude amplitudes to the lowest basis states.
///
/// Ties keep their original relative order. The returned permutation maps new
/// index to old index: `sorted[k] = original[perm[k]]`.
pub fn reorder_descending(state: &StateVector) -> (StateVector, Vec<usize>) {
    let mags: Vec<f64> = state.amplitudes.iter().map(|a| a.norm()).collect();
    let mut perm: Vec<usize> = (0..state.dim()).collect();
    perm.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    let amplitudes = perm.iter().map(|&old| state.amplitudes[old]).collect();
    let sorted = StateVector {
        amplitudes,
        label: format!("{}+sorted", state.label),
    };
    (sorted, perm)
}
