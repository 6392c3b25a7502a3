//! Memory architectures as Lindblad noise models.
//!
//! A [`NoiseModel`] compiles to a list of [`CollapseChannel`]s `(γ_i, C_i)`;
//! [`Lindbladian`] applies `Σ_i γ_i (C_i ρ C_i† − ½{C_i†C_i, ρ})` to a density
//! matrix without ever forming the superoperator.

pub(crate) mod density;
pub mod dense;
mod lindbladian;
mod sparse;

pub use density::{fidelity_against_pure, DensityMatrix};
pub use lindbladian::{apply_lindbladian, Lindbladian};
pub use sparse::CsrMatrix;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{Layout, TensorFactor};

/// Symbolic collapse operator on a `dim`-dimensional space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// Truncated annihilation operator acting on one tensor factor. For
    /// `radix = 2` this is the qubit lowering operator σ.
    Lowering { dim: usize, factor: TensorFactor },
    /// Number operator (`b†b`, or `σ†σ` for qubits) on one tensor factor.
    Number { dim: usize, factor: TensorFactor },
    Sparse { matrix: CsrMatrix },
}

impl OperatorSpec {
    pub fn site_lowering(n_qubits: u32, site: u32) -> Self {
        OperatorSpec::Lowering {
            dim: 1 << n_qubits,
            factor: TensorFactor {
                radix: 2,
                stride: 1 << site,
            },
        }
    }

    pub fn site_number(n_qubits: u32, site: u32) -> Self {
        OperatorSpec::Number {
            dim: 1 << n_qubits,
            factor: TensorFactor {
                radix: 2,
                stride: 1 << site,
            },
        }
    }

    pub fn qudit_lowering(d: usize) -> Self {
        OperatorSpec::Lowering {
            dim: d,
            factor: TensorFactor { radix: d, stride: 1 },
        }
    }

    pub fn qudit_number(d: usize) -> Self {
        OperatorSpec::Number {
            dim: d,
            factor: TensorFactor { radix: d, stride: 1 },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::Lowering { dim, .. } | OperatorSpec::Number { dim, .. } => *dim,
            OperatorSpec::Sparse { matrix } => matrix.nrows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::Lowering { dim, factor } | OperatorSpec::Number { dim, factor } => {
                let fits = factor.radix >= 2
                    && factor.stride >= 1
                    && factor
                        .stride
                        .checked_mul(factor.radix)
                        .is_some_and(|block| block <= *dim && dim % block == 0);
                if fits {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("tensor factor {factor:?} does not tile dimension {dim}")))
                }
            }
            OperatorSpec::Sparse { matrix } => {
                matrix.validate()?;
                if matrix.nrows() != matrix.ncols() {
                    return Err(Error::invalid("collapse operators must be square"));
                }
                Ok(())
            }
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            OperatorSpec::Sparse { matrix } => matrix.clone(),
            OperatorSpec::Lowering { dim, factor } => {
                let triplets: Vec<_> = (0..*dim)
                    .filter_map(|row| {
                        let digit = factor.digit(row);
                        (digit + 1 < factor.radix).then(|| {
                            (row, row + factor.stride, Complex64::new(((digit + 1) as f64).sqrt(), 0.0))
                        })
                    })
                    .collect();
                CsrMatrix::from_triplets(*dim, *dim, &triplets).expect("lowering entries in range")
            }
            OperatorSpec::Number { dim, factor } => {
                let triplets: Vec<_> = (0..*dim)
                    .filter_map(|j| {
                        let digit = factor.digit(j);
                        (digit > 0).then(|| (j, j, Complex64::new(digit as f64, 0.0)))
                    })
                    .collect();
                CsrMatrix::from_triplets(*dim, *dim, &triplets).expect("number entries in range")
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.to_csr().to_dense()
    }

    /// Diagonal of `C†C` when it is diagonal in the computational basis.
    pub fn jump_number_diagonal(&self) -> Option<Vec<f64>> {
        match self {
            OperatorSpec::Lowering { dim, factor } => {
                Some((0..*dim).map(|j| factor.digit(j) as f64).collect())
            }
            OperatorSpec::Number { dim, factor } => Some(
                (0..*dim)
                    .map(|j| {
                        let d = factor.digit(j) as f64;
                        d * d
                    })
                    .collect(),
            ),
            OperatorSpec::Sparse { matrix } => {
                let ctc = matrix.adjoint().matmul(matrix).ok()?;
                ctc.diagonal_if_diagonal()
                    .map(|d| d.into_iter().map(|z| z.re).collect())
            }
        }
    }
}

/// Truncated annihilation operator `b` of a `d`-level system:
/// `b[i][i+1] = √(i+1)` for zero-based rows `i < d − 1`.
pub fn annihilation_matrix(d: usize) -> Result<OperatorSpec> {
    if d < 2 {
        return Err(Error::invalid(format!("qudit dimension must be at least 2, got {d}")));
    }
    Ok(OperatorSpec::qudit_lowering(d))
}

/// One dissipator `γ L(C)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseChannel {
    pub rate: f64,
    pub operator: OperatorSpec,
}

impl CollapseChannel {
    pub fn new(rate: f64, operator: OperatorSpec) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::invalid(format!("noise rate must be finite and nonnegative, got {rate}")));
        }
        operator.validate()?;
        Ok(Self { rate, operator })
    }
}

/// Qubit-register rates: one shared value or one per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rates {
    Uniform(f64),
    PerSite(Vec<f64>),
}

impl Rates {
    pub fn for_site(&self, i: usize) -> f64 {
        match self {
            Rates::Uniform(g) => *g,
            Rates::PerSite(v) => v[i],
        }
    }
}

fn default_dephasing() -> bool {
    true
}

/// A memory architecture. JSON form:
/// `{"variant": "qubit_register", "n_q": 4, "gamma": 1.0, "dephasing": true}`,
/// `{"variant": "single_qudit", "d": 16, "gamma": 1.0}`,
/// `{"variant": "qudit_array", "count": 2, "d_each": 4, "gamma": 1.0}` or
/// `{"variant": "custom", "dim": 4, "channels": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Amplitude damping on every qubit, plus number-operator dephasing at the
    /// same per-qubit rate when `dephasing` is set.
    QubitRegister {
        n_q: u32,
        gamma: Rates,
        #[serde(default = "default_dephasing")]
        dephasing: bool,
    },
    /// One `d`-level system with amplitude damping.
    SingleQudit { d: usize, gamma: f64 },
    /// `count` qudits of `d_each` levels, each with its own amplitude damping.
    QuditArray { count: u32, d_each: usize, gamma: f64 },
    Custom { dim: usize, channels: Vec<CollapseChannel> },
}

impl NoiseModel {
    pub fn qubit_register(n_q: u32, gamma: f64, dephasing: bool) -> Self {
        NoiseModel::QubitRegister {
            n_q,
            gamma: Rates::Uniform(gamma),
            dephasing,
        }
    }

    pub fn disordered_qubit_register(rates: Vec<f64>, dephasing: bool) -> Self {
        NoiseModel::QubitRegister {
            n_q: rates.len() as u32,
            gamma: Rates::PerSite(rates),
            dephasing,
        }
    }

    pub fn single_qudit(d: usize, gamma: f64) -> Self {
        NoiseModel::SingleQudit { d, gamma }
    }

    pub fn qudit_array(count: u32, d_each: usize, gamma: f64) -> Self {
        NoiseModel::QuditArray { count, d_each, gamma }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: NoiseModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Format {
                path: path.to_path_buf(),
                message: j.to_string(),
            },
            other => other,
        })
    }

    /// Register geometry, for the structured variants.
    pub fn layout(&self) -> Option<Layout> {
        match *self {
            NoiseModel::QubitRegister { n_q, .. } => Some(Layout::qubits(n_q)),
            NoiseModel::SingleQudit { d, .. } => Some(Layout::qudit(d)),
            NoiseModel::QuditArray { count, d_each, .. } => Some(Layout::qudit_array(count, d_each)),
            NoiseModel::Custom { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseModel::Custom { dim, .. } => *dim,
            other => other.layout().expect("structured").dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_rate = |g: f64| {
            if g.is_finite() && g >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("noise rate must be finite and nonnegative, got {g}")))
            }
        };
        match self {
            NoiseModel::QubitRegister { n_q, gamma, .. } => {
                Layout::qubits(*n_q).validate()?;
                match gamma {
                    Rates::Uniform(g) => check_rate(*g)?,
                    Rates::PerSite(v) => {
                        if v.len() != *n_q as usize {
                            return Err(Error::invalid(format!(
                                "{} per-qubit rates given for {n_q} qubits",
                                v.len()
                            )));
                        }
                        v.iter().try_for_each(|&g| check_rate(g))?;
                    }
                }
            }
            NoiseModel::SingleQudit { gamma, .. } | NoiseModel::QuditArray { gamma, .. } => {
                self.layout().expect("structured").validate()?;
                check_rate(*gamma)?;
            }
            NoiseModel::Custom { dim, channels } => {
                if *dim < 2 {
                    return Err(Error::invalid("custom model dimension must be at least 2"));
                }
                for ch in channels {
                    check_rate(ch.rate)?;
                    ch.operator.validate()?;
                    Error::check_dim(*dim, ch.operator.dim())?;
                }
            }
        }
        Ok(())
    }

    /// Collapse channels in a fixed order: for qubit registers, qubit by
    /// qubit, lowering then dephasing.
    pub fn compile(&self) -> Vec<CollapseChannel> {
        match self {
            NoiseModel::QubitRegister { n_q, gamma, dephasing } => {
                let mut out = Vec::with_capacity(2 * *n_q as usize);
                for i in 0..*n_q {
                    let g = gamma.for_site(i as usize);
                    out.push(CollapseChannel {
                        rate: g,
                        operator: OperatorSpec::site_lowering(*n_q, i),
                    });
                    if *dephasing {
                        out.push(CollapseChannel {
                            rate: g,
                            operator: OperatorSpec::site_number(*n_q, i),
                        });
                    }
                }
                out
            }
            NoiseModel::SingleQudit { d, gamma } => vec![CollapseChannel {
                rate: *gamma,
                operator: OperatorSpec::qudit_lowering(*d),
            }],
            NoiseModel::QuditArray { count, d_each, gamma } => {
                let layout = Layout::qudit_array(*count, *d_each);
                layout
                    .sites()
                    .into_iter()
                    .map(|factor| CollapseChannel {
                        rate: *gamma,
                        operator: OperatorSpec::Lowering {
                            dim: layout.dim(),
                            factor,
                        },
                    })
                    .collect()
            }
            NoiseModel::Custom { channels, .. } => channels.clone(),
        }
    }

    /// Same architecture with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            NoiseModel::QubitRegister { gamma, .. } => match gamma {
                Rates::Uniform(g) => *g *= factor,
                Rates::PerSite(v) => v.iter_mut().for_each(|g| *g *= factor),
            },
            NoiseModel::SingleQudit { gamma, .. } | NoiseModel::QuditArray { gamma, .. } => *gamma *= factor,
            NoiseModel::Custom { channels, .. } => channels.iter_mut().for_each(|c| c.rate *= factor),
        }
        out
    }

    /// Smallest nonzero rate, if any channel is active.
    pub fn min_positive_rate(&self) -> Option<f64> {
        self.compile()
            .iter()
            .map(|c| c.rate)
            .filter(|&r| r > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Short description in the command-line model grammar.
    pub fn describe(&self) -> String {
        match self {
            NoiseModel::QubitRegister { n_q, gamma, dephasing } => {
                let base = if *dephasing { "qubit" } else { "qubit-ad" };
                match gamma {
                    Rates::Uniform(g) => format!("{base}:{n_q}@{g}"),
                    Rates::PerSite(_) => format!("{base}:{n_q}@disordered"),
                }
            }
            NoiseModel::SingleQudit { d, gamma } => format!("qudit:{d}@{gamma}"),
            NoiseModel::QuditArray { count, d_each, gamma } => format!("array:{count}:{d_each}@{gamma}"),
            NoiseModel::Custom { dim, channels } => format!("custom:{dim}[{}]", channels.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annihilation_examples() {
        let b2 = annihilation_matrix(2).unwrap().to_dense();
        assert_eq!(b2[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(b2.iter().filter(|z| z.norm() > 0.0).count(), 1);

        let b4 = annihilation_matrix(4).unwrap().to_dense();
        for i in 0..3 {
            assert_eq!(b4[(i, i + 1)].re, ((i + 1) as f64).sqrt());
        }
        assert!(b4.row(3).iter().all(|z| z.norm() == 0.0));
        let n = b4.adjoint() * &b4;
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { i as f64 } else { 0.0 };
                assert!((n[(i, j)].re - expected).abs() < 1e-14);
            }
        }
        assert!(annihilation_matrix(1).is_err());
    }

    #[test]
    fn channel_counts() {
        assert_eq!(NoiseModel::qubit_register(3, 1.0, true).compile().len(), 6);
        assert_eq!(NoiseModel::qubit_register(2, 1.0, false).compile().len(), 2);
        assert_eq!(NoiseModel::single_qudit(16, 1.0).compile().len(), 1);
        assert_eq!(NoiseModel::qudit_array(2, 4, 1.0).compile().len(), 2);
    }

    #[test]
    fn site_operators_are_tensor_factors() {
        // σ on qubit 1 of 2: |1x⟩ → |0x⟩, i.e. index j → j − 2 for bit 1 set.
        let s = OperatorSpec::site_lowering(2, 1).to_dense();
        assert_eq!(s[(0, 2)].re, 1.0);
        assert_eq!(s[(1, 3)].re, 1.0);
        assert_eq!(s.iter().filter(|z| z.norm() > 0.0).count(), 2);
    }

    #[test]
    fn array_lowering_uses_strides() {
        let op = &NoiseModel::qudit_array(2, 3, 1.0).compile()[1].operator;
        let m = op.to_dense();
        // Second qudit, digit 1 → 0: j = 3 → 0 with √1, j = 6 → 3 with √2.
        assert_eq!(m[(0, 3)].re, 1.0);
        assert!((m[(3, 6)].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let m = NoiseModel::from_json(r#"{"variant": "qubit_register", "n_q": 3, "gamma": [1, 2, 3]}"#).unwrap();
        assert_eq!(m, NoiseModel::disordered_qubit_register(vec![1.0, 2.0, 3.0], true));
        let q = NoiseModel::from_json(r#"{"variant": "single_qudit", "d": 8, "gamma": 0.5}"#).unwrap();
        assert_eq!(q.dim(), 8);
        let back = NoiseModel::from_json(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
        assert!(NoiseModel::from_json(r#"{"variant": "qubit_register", "n_q": 3, "gamma": [1, 2]}"#).is_err());
        assert!(NoiseModel::from_json(r#"{"variant": "single_qudit", "d": 8, "gamma": -1}"#).is_err());
    }

    #[test]
    fn number_channel_diagonal() {
        let d = OperatorSpec::qudit_number(4).jump_number_diagonal().unwrap();
        assert_eq!(d, vec![0.0, 1.0, 4.0, 9.0]);
        let sparse = OperatorSpec::Sparse {
            matrix: annihilation_matrix(4).unwrap().to_csr(),
        };
        let diag = sparse.jump_number_diagonal().unwrap();
        for (x, want) in diag.iter().zip([0.0, 1.0, 2.0, 3.0]) {
            assert!((x - want).abs() < 1e-15);
        }
    }
}
