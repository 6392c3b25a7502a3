use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::states::StateVector;

/// Fidelity values this close outside `[0, 1]` are clamped.
pub const FIDELITY_CLAMP: f64 = 1e-10;

/// Row-major complex density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_raw(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        Error::check_dim(dim * dim, data.len())?;
        Ok(Self { dim, data })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &StateVector) -> Self {
        let dim = psi.dim();
        let a = psi.amplitudes();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        data.par_chunks_mut(dim).enumerate().for_each(|(m, row)| {
            let am = a[m];
            for (n, x) in row.iter_mut().enumerate() {
                *x = am * a[n].conj();
            }
        });
        Self { dim, data }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut rho = Self::zeros(dim);
        for m in 0..dim {
            rho.data[m * dim + m] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[m * self.dim + n]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, value: Complex64) {
        self.data[m * self.dim + n] = value;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<Complex64> {
        self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|m| self.get(m, m)).sum()
    }

    /// `max |ρ_mn − conj(ρ_nm)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..self.dim {
            for n in m..self.dim {
                worst = worst.max((self.get(m, n) - self.get(n, m).conj()).norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Smallest eigenvalue of the Hermitian part. Dense `O(dim³)`; meant for
    /// spot checks, not per-step use.
    pub fn min_eigenvalue(&self) -> f64 {
        let dense = self.to_dense();
        let herm = (&dense + dense.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `⟨ψ|ρ|ψ⟩` on raw row-major storage. Row partial sums are added in row order,
/// so the result does not depend on the thread count.
pub(crate) fn pure_overlap(psi: &[Complex64], rho: &[Complex64]) -> Complex64 {
    let dim = psi.len();
    let partials: Vec<Complex64> = rho
        .par_chunks(dim)
        .zip(psi.par_iter())
        .map(|(row, &pm)| {
            if pm == Complex64::new(0.0, 0.0) {
                return Complex64::new(0.0, 0.0);
            }
            let inner: Complex64 = row.iter().zip(psi).map(|(r, p)| r * p).sum();
            pm.conj() * inner
        })
        .collect();
    partials.into_iter().sum()
}

pub(crate) fn clamp_fidelity(f: f64) -> f64 {
    if (-FIDELITY_CLAMP..0.0).contains(&f) {
        0.0
    } else if f > 1.0 && f <= 1.0 + FIDELITY_CLAMP {
        1.0
    } else {
        f
    }
}

/// Fidelity of a mixed state against a pure target, `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_against_pure(target: &StateVector, rho: &DensityMatrix) -> Result<f64> {
    Error::check_dim(target.dim(), rho.dim())?;
    Ok(clamp_fidelity(pure_overlap(target.amplitudes(), rho.as_slice()).re))
}
