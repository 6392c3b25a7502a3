use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{CollapseChannel, CsrMatrix, DensityMatrix, NoiseModel, OperatorSpec};

/// `C = diag(values)`, so `C ρ C†` scales `ρ_mn` by `values[m] * values[n]`.
#[derive(Debug, Clone)]
struct DiagonalJump {
    rate: f64,
    values: Vec<f64>,
}

/// Lowering on one tensor factor: `(C ρ C†)_mn = coef[m] coef[n] ρ_{m+s, n+s}`,
/// with `coef[j] = √(digit_j + 1)` where the digit can still be raised, else 0.
#[derive(Debug, Clone)]
struct LoweringJump {
    rate: f64,
    stride: usize,
    coef: Vec<f64>,
}

#[derive(Debug, Clone)]
struct GeneralChannel {
    rate: f64,
    op: CsrMatrix,
    /// `C†C`.
    number: CsrMatrix,
}

/// Compiled Lindblad generator `ρ ↦ Σ_i γ_i (C_i ρ C_i† − ½{C_i†C_i, ρ})`.
///
/// Structured channels are applied with strided row kernels; their `C†C`
/// parts are diagonal and folded into one decay vector. Custom channels go
/// through sparse-times-dense products.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    dim: usize,
    /// Diagonal of `Σ γ_i C_i†C_i` over structured channels.
    decay: Vec<f64>,
    diagonal: Vec<DiagonalJump>,
    lowering: Vec<LoweringJump>,
    general: Vec<GeneralChannel>,
}

impl Lindbladian {
    pub fn new(dim: usize, channels: &[CollapseChannel]) -> Result<Self> {
        let mut out = Self {
            dim,
            decay: vec![0.0; dim],
            diagonal: Vec::new(),
            lowering: Vec::new(),
            general: Vec::new(),
        };
        for ch in channels {
            if !(ch.rate.is_finite() && ch.rate >= 0.0) {
                return Err(Error::invalid(format!("bad channel rate {}", ch.rate)));
            }
            ch.operator.validate()?;
            Error::check_dim(dim, ch.operator.dim())?;
            if ch.rate == 0.0 {
                continue;
            }
            match &ch.operator {
                OperatorSpec::Lowering { factor, .. } => {
                    let coef = (0..dim)
                        .map(|j| {
                            let d = factor.digit(j);
                            if d + 1 < factor.radix {
                                ((d + 1) as f64).sqrt()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    for (j, x) in out.decay.iter_mut().enumerate() {
                        *x += ch.rate * factor.digit(j) as f64;
                    }
                    out.lowering.push(LoweringJump {
                        rate: ch.rate,
                        stride: factor.stride,
                        coef,
                    });
                }
                OperatorSpec::Number { factor, .. } => {
                    let values: Vec<f64> = (0..dim).map(|j| factor.digit(j) as f64).collect();
                    for (x, v) in out.decay.iter_mut().zip(&values) {
                        *x += ch.rate * v * v;
                    }
                    out.diagonal.push(DiagonalJump { rate: ch.rate, values });
                }
                OperatorSpec::Sparse { matrix } => {
                    let number = matrix.adjoint().matmul(matrix)?;
                    out.general.push(GeneralChannel {
                        rate: ch.rate,
                        op: matrix.clone(),
                        number,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn from_model(model: &NoiseModel) -> Result<Self> {
        model.validate()?;
        Self::new(model.dim(), &model.compile())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Diagonal of `Σ γ_i C_i†C_i` when every channel has diagonal `C†C`.
    pub fn decay_diagonal(&self) -> Option<Vec<f64>> {
        let mut decay = self.decay.clone();
        for g in &self.general {
            let diag = g.number.diagonal_if_diagonal()?;
            for (x, z) in decay.iter_mut().zip(diag) {
                *x += g.rate * z.re;
            }
        }
        Some(decay)
    }

    /// Upper bound on the fastest decay rate: the largest row sum of
    /// `|Σ γ_i C_i†C_i|`.
    pub fn fastest_rate(&self) -> f64 {
        let mut rows = self.decay.clone();
        for g in &self.general {
            for (m, r) in rows.iter_mut().enumerate() {
                *r += g.rate * g.number.row(m).map(|(_, v)| v.norm()).sum::<f64>();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.lowering.is_empty() && self.diagonal.is_empty() && self.general.is_empty()
    }

    /// Writes `L[ρ]` into `out`. Both slices are row-major `dim × dim`.
    pub fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim;
        assert_eq!(rho.len(), dim * dim);
        assert_eq!(out.len(), dim * dim);

        out.par_chunks_mut(dim)
            .enumerate()
            .for_each_init(
                || vec![0.0f64; dim],
                |factor, (m, out_row)| {
                    let rho_row = &rho[m * dim..(m + 1) * dim];
                    let dm = self.decay[m];
                    for (f, dn) in factor.iter_mut().zip(&self.decay) {
                        *f = -0.5 * (dm + dn);
                    }
                    for jump in &self.diagonal {
                        let vm = jump.values[m];
                        if vm != 0.0 {
                            let scale = jump.rate * vm;
                            for (f, vn) in factor.iter_mut().zip(&jump.values) {
                                *f += scale * vn;
                            }
                        }
                    }
                    for ((o, r), f) in out_row.iter_mut().zip(rho_row).zip(factor.iter()) {
                        *o = r * f;
                    }
                    for jump in &self.lowering {
                        let cm = jump.coef[m];
                        if cm == 0.0 {
                            continue;
                        }
                        let s = jump.stride;
                        let scale = jump.rate * cm;
                        let src = &rho[(m + s) * dim + s..(m + s + 1) * dim];
                        for ((o, r), cn) in out_row[..dim - s].iter_mut().zip(src).zip(&jump.coef) {
                            *o += r * (scale * cn);
                        }
                    }
                },
            );

        for ch in &self.general {
            apply_general(ch, dim, rho, out);
        }
    }

    pub fn apply_to(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Error::check_dim(self.dim, rho.dim())?;
        let mut out = DensityMatrix::zeros(self.dim);
        self.apply(rho.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Non-Hermitian wavefunction generator `−½ Σ γ_i C_i†C_i ψ`.
    pub fn apply_nh(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for ((o, p), d) in out.iter_mut().zip(psi).zip(&self.decay) {
            *o = p * (-0.5 * d);
        }
        for g in &self.general {
            let n_psi = g.number.mul_vec(psi);
            for (o, v) in out.iter_mut().zip(n_psi) {
                *o -= v * (0.5 * g.rate);
            }
        }
    }
}

fn apply_general(ch: &GeneralChannel, dim: usize, rho: &[Complex64], out: &mut [Complex64]) {
    let zero = Complex64::new(0.0, 0.0);
    // X = C ρ
    let mut x = vec![zero; dim * dim];
    x.par_chunks_mut(dim).enumerate().for_each(|(m, xrow)| {
        for (k, c) in ch.op.row(m) {
            let src = &rho[k * dim..(k + 1) * dim];
            for (xv, r) in xrow.iter_mut().zip(src) {
                *xv += c * r;
            }
        }
    });
    let g = ch.rate;
    out.par_chunks_mut(dim).enumerate().for_each(|(m, orow)| {
        let xrow = &x[m * dim..(m + 1) * dim];
        let rrow = &rho[m * dim..(m + 1) * dim];
        for (n, o) in orow.iter_mut().enumerate() {
            // (X C†)_mn and (ρ C†C)_mn, with C†C Hermitian.
            let jump: Complex64 = ch.op.row(n).map(|(k, c)| xrow[k] * c.conj()).sum();
            let right: Complex64 = ch.number.row(n).map(|(k, a)| rrow[k] * a.conj()).sum();
            *o += (jump - right * 0.5) * g;
        }
        for (k, a) in ch.number.row(m) {
            let src = &rho[k * dim..(k + 1) * dim];
            let scale = a * (-0.5 * g);
            for (o, r) in orow.iter_mut().zip(src) {
                *o += scale * r;
            }
        }
    });
}

/// `Σ_i γ_i (C_i ρ C_i† − ½{C_i†C_i, ρ})` for a channel list.
pub fn apply_lindbladian(channels: &[CollapseChannel], rho: &DensityMatrix) -> Result<DensityMatrix> {
    Lindbladian::new(rho.dim(), channels)?.apply_to(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::dense::lindbladian_dense;
    use crate::states::{fock_state, random_arbitrary_state};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_rates_give_zero() {
        let model = NoiseModel::qubit_register(3, 0.0, true);
        let rho = DensityMatrix::from_pure(&random_arbitrary_state(8, 1).unwrap());
        let out = apply_lindbladian(&model.compile(), &rho).unwrap();
        assert!(out.as_slice().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn excited_qubit_decays() {
        // ρ = |1⟩⟨1| under AD: γ(|0⟩⟨0| − |1⟩⟨1|).
        let model = NoiseModel::qubit_register(1, 1.0, false);
        let rho = DensityMatrix::from_pure(&fock_state(2, 1).unwrap());
        let out = apply_lindbladian(&model.compile(), &rho).unwrap();
        assert_eq!(out.get(0, 0), c(1.0));
        assert_eq!(out.get(1, 1), c(-1.0));
        assert_eq!(out.get(0, 1), c(0.0));
        // Dephasing leaves populations alone.
        let with_deph = NoiseModel::qubit_register(1, 1.0, true);
        let out2 = apply_lindbladian(&with_deph.compile(), &rho).unwrap();
        assert_eq!(out2, out);
    }

    #[test]
    fn qudit_top_population_rate() {
        let model = NoiseModel::single_qudit(4, 1.0);
        let rho = DensityMatrix::from_pure(&fock_state(4, 3).unwrap());
        let out = apply_lindbladian(&model.compile(), &rho).unwrap();
        assert!((out.get(3, 3).re + 3.0).abs() < 1e-15);
        assert!((out.get(2, 2).re - 3.0).abs() < 1e-15);
    }

    #[test]
    fn coherence_decay_rate() {
        // Top-row coherence ρ_{0,n} decays at nγ/2 with nothing feeding it.
        let d = 6;
        let model = NoiseModel::single_qudit(d, 0.7);
        for n in 1..d {
            let mut rho = DensityMatrix::zeros(d);
            rho.set(0, n, c(1.0));
            let out = apply_lindbladian(&model.compile(), &rho).unwrap();
            assert!((out.get(0, n).re + 0.7 * n as f64 / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn structured_matches_dense_reference() {
        let rho = DensityMatrix::from_pure(&random_arbitrary_state(16, 11).unwrap());
        let models = [
            NoiseModel::qubit_register(4, 1.3, true),
            NoiseModel::disordered_qubit_register(vec![0.1, 2.0, 0.0, 1.0], true),
            NoiseModel::qubit_register(4, 1.0, false),
            NoiseModel::single_qudit(16, 0.9),
            NoiseModel::qudit_array(2, 4, 1.1),
        ];
        for model in &models {
            let fast = apply_lindbladian(&model.compile(), &rho).unwrap();
            let slow = lindbladian_dense(&model.compile(), &rho).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-12, "{}", model.describe());
        }
    }

    #[test]
    fn sparse_channel_matches_dense_reference() {
        // Correlated two-qubit damping σ_0 σ_1 plus a non-diagonal Hermitian jump.
        let s0 = OperatorSpec::site_lowering(2, 0).to_dense();
        let s1 = OperatorSpec::site_lowering(2, 1).to_dense();
        let mut herm = nalgebra::DMatrix::<Complex64>::zeros(4, 4);
        herm[(0, 3)] = Complex64::new(0.3, 0.4);
        herm[(3, 0)] = Complex64::new(0.3, -0.4);
        herm[(1, 1)] = c(2.0);
        let channels = vec![
            CollapseChannel::new(0.8, OperatorSpec::Sparse { matrix: CsrMatrix::from_dense(&(&s0 * &s1)) }).unwrap(),
            CollapseChannel::new(0.5, OperatorSpec::Sparse { matrix: CsrMatrix::from_dense(&herm) }).unwrap(),
            CollapseChannel::new(1.0, OperatorSpec::site_lowering(2, 1)).unwrap(),
        ];
        let rho = DensityMatrix::from_pure(&random_arbitrary_state(4, 5).unwrap());
        let fast = apply_lindbladian(&channels, &rho).unwrap();
        let slow = lindbladian_dense(&channels, &rho).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-13);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let model = NoiseModel::single_qudit(4, 1.0);
        let rho = DensityMatrix::zeros(3);
        assert!(matches!(
            apply_lindbladian(&model.compile(), &rho),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nh_generator_is_half_decay() {
        let l = Lindbladian::from_model(&NoiseModel::qubit_register(2, 1.0, true)).unwrap();
        let psi = vec![c(1.0); 4];
        let mut out = vec![c(0.0); 4];
        l.apply_nh(&psi, &mut out);
        // Decay diag = 2γ w(j); NH rate = γ w(j).
        assert_eq!(out, vec![c(0.0), c(-1.0), c(-1.0), c(-2.0)]);
        assert_eq!(l.fastest_rate(), 4.0);
    }
}
