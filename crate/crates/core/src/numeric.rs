//! Small numeric helpers shared by several modules.

use num_complex::Complex64;

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sum of `|a_j|^2`.
pub fn norm_sqr(amplitudes: &[Complex64]) -> f64 {
    amplitudes
        .iter()
        .map(|a| a.norm_sqr())
        .collect::<KahanSum>()
        .value()
}

/// Number of set bits in `j`.
#[inline]
pub fn hamming_weight(j: u64) -> u32 {
    j.count_ones()
}
