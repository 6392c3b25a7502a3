//! Dense reference implementation of the Lindblad generator.
//!
//! Forms every `C_i` as a full matrix and evaluates the dissipator with plain
//! matrix products. Cubic in the dimension; used to cross-check the
//! matrix-free kernels on small systems.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::{CollapseChannel, DensityMatrix};

pub fn lindbladian_dense(channels: &[CollapseChannel], rho: &DensityMatrix) -> Result<DensityMatrix> {
    let dim = rho.dim();
    let r = rho.to_dense();
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    for ch in channels {
        Error::check_dim(dim, ch.operator.dim())?;
        let c = ch.operator.to_dense();
        let cd = c.adjoint();
        let n = &cd * &c;
        let term = &c * &r * &cd - (&n * &r + &r * &n) * Complex64::new(0.5, 0.0);
        acc += term * Complex64::new(ch.rate, 0.0);
    }
    let data: Vec<Complex64> = (0..dim)
        .flat_map(|m| (0..dim).map(move |n| (m, n)))
        .map(|(m, n)| acc[(m, n)])
        .collect();
    DensityMatrix::from_raw(dim, data)
}
