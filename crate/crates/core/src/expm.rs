//! Dense matrix exponential by scaling and squaring with Padé approximants.
//!
//! Follows Higham, "The Scaling and Squaring Method for the Matrix
//! Exponential Revisited" (2005): the Padé degree is picked from the 1-norm
//! of the input among {3, 5, 7, 9, 13}; only degree 13 is combined with
//! scaling.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Maximum absolute column sum.
pub fn norm1<T>(a: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    a.column_iter()
        .map(|col| col.iter().map(|x| x.clone().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` for a square matrix.
pub fn expm<T>(a: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64>,
{
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if !a.iter().all(|x| x.clone().is_finite()) {
        return Err(Error::invalid("matrix exponential of a non-finite matrix"));
    }

    let norm = norm1(a);
    let ident = DMatrix::<T>::identity(n, n);

    let low_degree = [(THETA_3, &B3[..]), (THETA_5, &B5[..]), (THETA_7, &B7[..]), (THETA_9, &B9[..])];
    for (theta, coeffs) in low_degree {
        if norm <= theta {
            let (u, v) = pade_low(a, &ident, coeffs);
            return solve_pade(u, v);
        }
    }

    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scale(2f64.powi(-squarings));
    let (u, v) = pade13(&scaled, &ident);
    let mut result = solve_pade(u, v)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

fn real<T: ComplexField<RealField = f64>>(x: f64) -> T {
    T::from_real(x)
}

/// Odd/even split of the degree-m Padé numerator for m in {3, 5, 7, 9}.
fn pade_low<T>(a: &DMatrix<T>, ident: &DMatrix<T>, b: &[f64]) -> (DMatrix<T>, DMatrix<T>)
where
    T: ComplexField<RealField = f64>,
{
    let a2 = a * a;
    let mut powers = vec![ident.clone(), a2.clone()];
    while powers.len() < b.len() / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut odd = DMatrix::<T>::zeros(a.nrows(), a.ncols());
    let mut even = DMatrix::<T>::zeros(a.nrows(), a.ncols());
    for (k, p) in powers.iter().enumerate() {
        odd += p * real::<T>(b[2 * k + 1]);
        even += p * real::<T>(b[2 * k]);
    }
    (a * odd, even)
}

fn pade13<T>(a: &DMatrix<T>, ident: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>)
where
    T: ComplexField<RealField = f64>,
{
    let b = |k: usize| real::<T>(B13[k]);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = a * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + ident * b(1));

    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + ident * b(0);
    (u, v)
}

/// Solves `(V - U) X = (V + U)`.
fn solve_pade<T>(u: DMatrix<T>, v: DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64>,
{
    let numerator = &v + &u;
    let denominator = v - u;
    denominator
        .lu()
        .solve(&numerator)
        .ok_or_else(|| Error::Solver("singular Padé denominator in matrix exponential".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn rotation_generator() {
        // exp([[0,-x],[x,0]]) is a rotation by x.
        for &x in &[0.0, 1e-3, 0.3, 1.0, std::f64::consts::FRAC_PI_2, 7.5, 40.0] {
            let g = DMatrix::from_row_slice(2, 2, &[0.0, -x, x, 0.0]);
            let e = expm(&g).unwrap();
            assert_relative_eq!(e[(0, 0)], x.cos(), epsilon = 1e-13);
            assert_relative_eq!(e[(1, 0)], x.sin(), epsilon = 1e-13);
            assert_relative_eq!(e[(0, 1)], -x.sin(), epsilon = 1e-13);
        }
    }

    #[test]
    fn diagonal_complex() {
        let diag = [Complex64::new(-3.0, 2.0), Complex64::new(0.5, -1.0), Complex64::new(10.0, 0.0)];
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&diag));
        let e = expm(&a).unwrap();
        for (k, z) in diag.iter().enumerate() {
            assert!((e[(k, k)] - z.exp()).norm() < 1e-10 * z.exp().norm());
        }
    }

    #[test]
    fn nilpotent_is_finite_series() {
        // exp(N) = I + N + N^2/2 for N strictly upper triangular 3x3.
        let n = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 3.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0]);
        let expected = DMatrix::identity(3, 3) + &n + (&n * &n) * 0.5;
        let e = expm(&n).unwrap();
        assert_relative_eq!(e, expected, epsilon = 1e-12);
    }

    #[test]
    fn matches_nalgebra_builtin_across_degrees() {
        // Scales chosen to land in every Padé branch.
        let base = DMatrix::from_fn(6, 6, |i, j| {
            Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0)
        });
        let base_norm = norm1(&base);
        for target in [0.01, 0.2, 0.9, 2.0, 5.0, 50.0] {
            let a = base.scale(target / base_norm);
            let ours = expm(&a).unwrap();
            let reference = a.exp();
            let scale = reference.norm();
            assert!((&ours - &reference).norm() < 1e-11 * scale, "norm {target}");
        }
    }

    #[test]
    fn rejects_non_square() {
        let a = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(expm(&a), Err(Error::InvalidArgument(_))));
    }
}
