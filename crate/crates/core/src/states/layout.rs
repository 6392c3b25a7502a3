use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::StateVector;
use num_complex::Complex64;

/// One tensor factor of a register: a `radix`-level system whose digit in the
/// basis index `j` is `(j / stride) % radix`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorFactor {
    pub radix: usize,
    pub stride: usize,
}

impl TensorFactor {
    #[inline]
    pub fn digit(&self, j: usize) -> usize {
        (j / self.stride) % self.radix
    }
}

/// Physical register a state is stored in.
///
/// Basis index `j` is read as a radix-`d` number with the least significant
/// digit on site 0, so for qubits `j = 5` is qubit 0 and qubit 2 excited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum Layout {
    QubitRegister { n_qubits: u32 },
    SingleQudit { d: usize },
    QuditArray { count: u32, d_each: usize },
}

impl Layout {
    pub fn qubits(n_qubits: u32) -> Self {
        Layout::QubitRegister { n_qubits }
    }

    pub fn qudit(d: usize) -> Self {
        Layout::SingleQudit { d }
    }

    pub fn qudit_array(count: u32, d_each: usize) -> Self {
        Layout::QuditArray { count, d_each }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Layout::QubitRegister { n_qubits } => (1..=31).contains(&n_qubits),
            Layout::SingleQudit { d } => d >= 2,
            Layout::QuditArray { count, d_each } => {
                count >= 1 && d_each >= 2 && (d_each as u128).pow(count) <= 1u128 << 31
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("unusable layout {self:?}")))
        }
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        match *self {
            Layout::QubitRegister { n_qubits } => 1usize << n_qubits,
            Layout::SingleQudit { d } => d,
            Layout::QuditArray { count, d_each } => d_each.pow(count),
        }
    }

    pub fn sites(&self) -> Vec<TensorFactor> {
        match *self {
            Layout::QubitRegister { n_qubits } => (0..n_qubits)
                .map(|i| TensorFactor { radix: 2, stride: 1 << i })
                .collect(),
            Layout::SingleQudit { d } => vec![TensorFactor { radix: d, stride: 1 }],
            Layout::QuditArray { count, d_each } => (0..count)
                .map(|i| TensorFactor {
                    radix: d_each,
                    stride: d_each.pow(i),
                })
                .collect(),
        }
    }

    /// Digits of `j`, least significant site first.
    pub fn digits(&self, j: usize) -> Vec<usize> {
        self.sites().iter().map(|f| f.digit(j)).collect()
    }

    /// Total number of excitations in basis state `j`: the Hamming weight for
    /// qubits, `j` itself for a single qudit, the digit sum for an array.
    pub fn excitations(&self, j: usize) -> u64 {
        match *self {
            Layout::QubitRegister { .. } => (j as u64).count_ones() as u64,
            Layout::SingleQudit { .. } => j as u64,
            Layout::QuditArray { d_each, .. } => {
                let mut rest = j;
                let mut total = 0u64;
                while rest > 0 {
                    total += (rest % d_each) as u64;
                    rest /= d_each;
                }
                total
            }
        }
    }

    /// Smallest qubit register holding `dim` amplitudes.
    pub fn qubits_for(dim: usize) -> Self {
        let n = dim.next_power_of_two().trailing_zeros().max(1);
        Layout::QubitRegister { n_qubits: n }
    }
}

/// Placement of a state's amplitudes onto a layout. Index `j` of the state goes
/// to basis state `j` of the layout; unused basis states get zero amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingMap {
    layout: Layout,
    state_dim: usize,
}

impl EncodingMap {
    pub fn new(layout: Layout, state_dim: usize) -> Result<Self> {
        layout.validate()?;
        if layout.dim() < state_dim {
            return Err(Error::invalid(format!(
                "layout {layout:?} has dimension {} < state dimension {state_dim}",
                layout.dim()
            )));
        }
        Ok(Self { layout, state_dim })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Basis state of the layout holding amplitude `j`.
    pub fn target_index(&self, j: usize) -> usize {
        debug_assert!(j < self.state_dim);
        j
    }

    pub fn place(&self, state: &StateVector) -> Result<StateVector> {
        Error::check_dim(self.state_dim, state.dim())?;
        if self.layout.dim() == state.dim() {
            return Ok(state.clone());
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); self.layout.dim()];
        for (j, a) in state.amplitudes().iter().enumerate() {
            amps[self.target_index(j)] = *a;
        }
        StateVector::new(amps, state.label())
    }
}
