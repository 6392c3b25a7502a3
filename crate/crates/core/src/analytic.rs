//! Non-Hermitian fidelity estimates, excitation moments and the performance
//! ratios built from them.
//!
//! Under the non-Hermitian generator `−½ D` with `D = Σ_i γ_i C_i†C_i`
//! diagonal, `√F(t) = Σ_j |α_j|² e^{−D_j t/2}`. Expanding in `t`,
//! `√F = Σ_k (−t/2)^k ⟨D^k⟩ / k!`, so the first-order lifetime is
//! proportional to `1/⟨D⟩` and the ratio of two lifetimes is `⟨D_b⟩/⟨D_a⟩`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::noise::{CollapseChannel, NoiseModel};
use crate::numeric::KahanSum;
use crate::states::{Layout, StateVector};

pub use crate::numeric::hamming_weight;

/// Largest dimension for which a non-diagonal `Σ γ C†C` is exponentiated densely.
pub const DENSE_NH_LIMIT: usize = 4096;

fn probabilities(state: &StateVector) -> impl Iterator<Item = f64> + '_ {
    state.amplitudes().iter().map(|a| a.norm_sqr())
}

fn sqrt_fidelity(state: &StateVector, decay: impl Fn(usize) -> f64, t: f64) -> f64 {
    probabilities(state)
        .enumerate()
        .map(|(j, p)| p * (-0.5 * decay(j) * t).exp())
        .collect::<KahanSum>()
        .value()
}

/// NH fidelity on a qubit register with amplitude damping and dephasing at
/// rate `gamma` on every qubit: `√F = Σ_j |α_j|² e^{−γ w(j) t}`.
pub fn nh_fidelity_qubit(state: &StateVector, gamma: f64, t: f64) -> Result<f64> {
    if !state.dim().is_power_of_two() {
        return Err(Error::invalid(format!("qubit register needs a power-of-two dimension, got {}", state.dim())));
    }
    let root = sqrt_fidelity(state, |j| 2.0 * gamma * hamming_weight(j as u64) as f64, t);
    Ok(root * root)
}

/// NH fidelity on a single qudit with amplitude damping at rate `gamma`:
/// `√F = Σ_j |α_j|² e^{−γ j t/2}`.
pub fn nh_fidelity_qudit(state: &StateVector, gamma: f64, t: f64) -> Result<f64> {
    let root = sqrt_fidelity(state, |j| gamma * j as f64, t);
    Ok(root * root)
}

/// Diagonal of `Σ_i γ_i C_i†C_i`, if every `C_i†C_i` is diagonal.
pub fn decay_diagonal(dim: usize, channels: &[CollapseChannel]) -> Option<Vec<f64>> {
    let mut decay = vec![0.0; dim];
    for ch in channels.iter().filter(|ch| ch.rate != 0.0) {
        let diag = ch.operator.jump_number_diagonal()?;
        for (x, v) in decay.iter_mut().zip(diag) {
            *x += ch.rate * v;
        }
    }
    Some(decay)
}

/// `|⟨ψ| e^{−t Σ γ_i C_i†C_i /2} |ψ⟩|²` for arbitrary channels.
pub fn nh_fidelity_general(channels: &[CollapseChannel], state: &StateVector, t: f64) -> Result<f64> {
    let dim = state.dim();
    for ch in channels {
        Error::check_dim(dim, ch.operator.dim())?;
    }
    if let Some(decay) = decay_diagonal(dim, channels) {
        let root = sqrt_fidelity(state, |j| decay[j], t);
        return Ok(root * root);
    }
    if dim > DENSE_NH_LIMIT {
        return Err(Error::Unsupported(format!(
            "non-diagonal decay operator at dimension {dim} (dense limit {DENSE_NH_LIMIT})"
        )));
    }
    let mut generator = DMatrix::<Complex64>::zeros(dim, dim);
    for ch in channels.iter().filter(|ch| ch.rate != 0.0) {
        let c = ch.operator.to_dense();
        generator += c.adjoint() * c * Complex64::new(-0.5 * ch.rate * t, 0.0);
    }
    let u = expm(&generator)?;
    let psi = DVector::from_column_slice(state.amplitudes());
    Ok(psi.dotc(&(u * &psi)).norm_sqr())
}

/// Moments `⟨N^k⟩`, `k = 1..=k_max`, of the excitation number of a layout,
/// in total and per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub layout: Layout,
    /// `total[k − 1] = Σ_j |α_j|² N_j^k`.
    pub total: Vec<f64>,
    /// `per_site[i][k − 1]` for the excitation number of site `i` alone.
    pub per_site: Vec<Vec<f64>>,
}

impl MomentSet {
    pub fn mean(&self) -> f64 {
        self.total[0]
    }

    pub fn k_max(&self) -> usize {
        self.total.len()
    }

    pub fn variance(&self) -> Option<f64> {
        (self.total.len() >= 2).then(|| self.total[1] - self.total[0] * self.total[0])
    }
}

fn power_moments(state: &StateVector, k_max: usize, value: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut acc = vec![KahanSum::new(); k_max];
    for (j, p) in probabilities(state).enumerate() {
        if p == 0.0 {
            continue;
        }
        let v = value(j);
        let mut pow = 1.0;
        for a in acc.iter_mut() {
            pow *= v;
            a.add(p * pow);
        }
    }
    acc.iter().map(KahanSum::value).collect()
}

pub fn moments(state: &StateVector, layout: &Layout, k_max: usize) -> Result<MomentSet> {
    layout.validate()?;
    Error::check_dim(layout.dim(), state.dim())?;
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let total = power_moments(state, k_max, |j| layout.excitations(j) as f64);
    let per_site = layout
        .sites()
        .iter()
        .map(|site| power_moments(state, k_max, |j| site.digit(j) as f64))
        .collect();
    Ok(MomentSet {
        layout: *layout,
        total,
        per_site,
    })
}

/// Moments `⟨D^k⟩` of a model's decay operator `D = Σ_i γ_i C_i†C_i`.
pub fn decay_moments(state: &StateVector, model: &NoiseModel, k_max: usize) -> Result<Vec<f64>> {
    model.validate()?;
    Error::check_dim(model.dim(), state.dim())?;
    let decay = decay_diagonal(model.dim(), &model.compile())
        .ok_or_else(|| Error::Unsupported(format!("decay operator of {} is not diagonal", model.describe())))?;
    Ok(power_moments(state, k_max, |j| decay[j]))
}

/// Predicted lifetime ratio `t_a/t_b` of a state stored in model `a` versus
/// model `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioPrediction {
    pub first_order: f64,
    pub second_order: Option<f64>,
    /// Target fidelity the second-order times were solved at.
    pub target_fidelity: Option<f64>,
    /// `⟨D_a⟩, ⟨D_a²⟩`.
    pub decay_moments_a: Vec<f64>,
    /// `⟨D_b⟩, ⟨D_b²⟩`.
    pub decay_moments_b: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn first_order_from(ma: &[f64], mb: &[f64]) -> Result<f64> {
    if ma[0] <= 0.0 {
        return Err(Error::UndefinedRatio("state does not decay in the first model (⟨D⟩ = 0)".into()));
    }
    Ok(mb[0] / ma[0])
}

/// `t_a/t_b ≈ ⟨D_b⟩/⟨D_a⟩`. For a dephased qubit register against a single
/// qudit this is `⟨n_d⟩/(2⟨n_b⟩)`.
pub fn ratio_first_order(state: &StateVector, model_a: &NoiseModel, model_b: &NoiseModel) -> Result<RatioPrediction> {
    let ma = decay_moments(state, model_a, 2)?;
    let mb = decay_moments(state, model_b, 2)?;
    Ok(RatioPrediction {
        first_order: first_order_from(&ma, &mb)?,
        second_order: None,
        target_fidelity: None,
        decay_moments_a: ma,
        decay_moments_b: mb,
        warning: None,
    })
}

/// `⟨n_d⟩/(2⟨n_b⟩)` from given qudit and qubit means.
pub fn qubit_qudit_ratio(n_d: f64, n_b: f64) -> Result<f64> {
    if n_b <= 0.0 {
        return Err(Error::UndefinedRatio("⟨n_b⟩ = 0".into()));
    }
    Ok(n_d / (2.0 * n_b))
}

/// Crossing time of the truncation `1 − t m1/2 + t² m2/8 = √F_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCrossing {
    pub t: f64,
    /// Set when the truncation never reaches `√F_t`; `t` is then its minimum.
    pub unreachable: bool,
}

pub fn second_order_time(m1: f64, m2: f64, target: f64) -> Result<QuadraticCrossing> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target fidelity must lie in (0, 1), got {target}")));
    }
    if m1 <= 0.0 {
        return Err(Error::UndefinedRatio("⟨D⟩ = 0".into()));
    }
    let s = target.sqrt();
    let a = 0.5 * m1;
    let b = 0.125 * m2;
    let q = |t: f64| 1.0 - a * t + b * t * t - s;
    let t1 = (1.0 - s) / a;
    let t_min = if b > 0.0 { a / (2.0 * b) } else { f64::INFINITY };
    let hi = t_min.min(10.0 * t1);
    if q(hi) > 0.0 {
        if hi == t_min {
            return Ok(QuadraticCrossing { t: t_min, unreachable: true });
        }
        return Err(Error::Solver(format!("no root of the quadratic truncation in [0, {hi:e}]")));
    }
    let t = find_root(q, 0.0, hi, 1e-12)?;
    Ok(QuadraticCrossing { t, unreachable: false })
}

/// Root of a continuous `f` with `f(lo) > 0 ≥ f(hi)`; Illinois regula falsi
/// with a bisection fallback, to relative width `rtol`.
fn find_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::Solver(format!("interval [{lo:e}, {hi:e}] does not bracket a root")));
    }
    let mut side = 0i8;
    for _ in 0..500 {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if fc < 0.0 {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        if b - a <= rtol * b {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::Solver("root finder did not converge".into()))
}

/// First- and second-order ratio predictions at target fidelity `target`. The
/// second-order lifetimes solve the quadratic truncation of the moment series
/// separately for each model.
pub fn ratio_second_order(
    state: &StateVector,
    model_a: &NoiseModel,
    model_b: &NoiseModel,
    target: f64,
) -> Result<RatioPrediction> {
    let mut pred = ratio_first_order(state, model_a, model_b)?;
    let (ma, mb) = (&pred.decay_moments_a, &pred.decay_moments_b);
    if mb[0] <= 0.0 {
        return Err(Error::UndefinedRatio("state does not decay in the second model (⟨D⟩ = 0)".into()));
    }
    let ta = second_order_time(ma[0], ma[1], target)?;
    let tb = second_order_time(mb[0], mb[1], target)?;
    let unreachable: Vec<&str> = [("a", ta), ("b", tb)]
        .iter()
        .filter(|(_, c)| c.unreachable)
        .map(|(name, _)| *name)
        .collect();
    if !unreachable.is_empty() {
        pred.warning = Some(format!(
            "quadratic truncation never reaches √F_t for model {}; its minimum was used",
            unreachable.join(" and ")
        ));
    }
    pred.second_order = Some(ta.t / tb.t);
    pred.target_fidelity = Some(target);
    Ok(pred)
}

/// `(2^n − 1)/(2n)`, the first-order GHZ ratio between a dephased qubit
/// register and a single qudit. Requires `n_q ≥ 1`.
pub fn ghz_ratio_closed_form(n_q: u32) -> f64 {
    assert!(n_q >= 1, "register needs at least one qubit");
    ((1u64 << n_q) - 1) as f64 / (2.0 * n_q as f64)
}

/// First-order `t_b/t_dis` of a uniform register at rate `gamma` against one
/// with per-qubit rates: `Σ_j γ_j ⟨n_j⟩ / (γ ⟨n_b⟩)`.
pub fn ratio_disordered(state: &StateVector, rates: &[f64], gamma: f64) -> Result<f64> {
    if !state.dim().is_power_of_two() || state.dim() != 1usize << rates.len() {
        return Err(Error::invalid(format!(
            "{} per-qubit rates do not match a state of dimension {}",
            rates.len(),
            state.dim()
        )));
    }
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("rates must be finite and nonnegative, gamma positive"));
    }
    let m = moments(state, &Layout::qubits(rates.len() as u32), 1)?;
    if m.mean() <= 0.0 {
        return Err(Error::UndefinedRatio("⟨n_b⟩ = 0".into()));
    }
    let weighted: KahanSum = rates.iter().zip(&m.per_site).map(|(g, n)| g * n[0]).collect();
    Ok(weighted.value() / (gamma * m.mean()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{CsrMatrix, OperatorSpec};
    use crate::states::{equal_superposition_state, fock_state, ghz_state, random_arbitrary_state, w_state};
    use proptest::prelude::*;

    fn qubit(n: u32) -> NoiseModel {
        NoiseModel::qubit_register(n, 1.0, true)
    }

    fn qudit(d: usize) -> NoiseModel {
        NoiseModel::single_qudit(d, 1.0)
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_weight(0), 0);
        assert_eq!(hamming_weight(5), 2);
        assert_eq!(hamming_weight((1 << 20) - 1), 20);
    }

    #[test]
    fn nh_closed_forms() {
        let psi = ghz_state(4).unwrap();
        for t in [0.0f64, 0.1, 0.5, 2.0] {
            let q = 0.5 * (1.0 + (-4.0 * t).exp());
            assert!((nh_fidelity_qubit(&psi, 1.0, t).unwrap() - q * q).abs() < 1e-15);
            let d = 0.5 * (1.0 + (-7.5 * t).exp());
            assert!((nh_fidelity_qudit(&psi, 1.0, t).unwrap() - d * d).abs() < 1e-15);
        }
        let fock = fock_state(16, 11).unwrap();
        let t = 0.3f64;
        assert!((nh_fidelity_qubit(&fock, 1.0, t).unwrap() - (-6.0 * t).exp()).abs() < 1e-15);
        assert!((nh_fidelity_qudit(&fock, 1.0, t).unwrap() - (-11.0 * t).exp()).abs() < 1e-15);
        assert!(nh_fidelity_qubit(&fock_state(6, 1).unwrap(), 1.0, t).is_err());
    }

    #[test]
    fn general_reduces_to_specializations() {
        let psi = random_arbitrary_state(32, 8).unwrap();
        for t in [0.05, 0.4] {
            let g = nh_fidelity_general(&qubit(5).compile(), &psi, t).unwrap();
            assert!((g - nh_fidelity_qubit(&psi, 1.0, t).unwrap()).abs() < 1e-12);
            let g = nh_fidelity_general(&qudit(32).compile(), &psi, t).unwrap();
            assert!((g - nh_fidelity_qudit(&psi, 1.0, t).unwrap()).abs() < 1e-12);
        }
        let frozen = nh_fidelity_general(&NoiseModel::single_qudit(32, 0.0).compile(), &psi, 3.0).unwrap();
        assert!((frozen - 1.0).abs() < 1e-14);
    }

    #[test]
    fn general_basis_sweep_matches_qubit_formula() {
        let channels = qubit(4).compile();
        for j in 0..16 {
            let psi = fock_state(16, j).unwrap();
            let a = nh_fidelity_general(&channels, &psi, 0.7).unwrap();
            let b = nh_fidelity_qubit(&psi, 1.0, 0.7).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn array_nh_factorizes_on_product_states() {
        // |a⟩ ⊗ |b⟩ on two 3-level qudits, each a superposition.
        let a = [0.6, 0.0, 0.8];
        let b = [0.0, 1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        let amps = (0..9).map(|j| Complex64::new(a[j % 3] * b[j / 3], 0.0)).collect();
        let psi = StateVector::new(amps, "product").unwrap();
        let t = 0.9;
        let factor = |c: &[f64; 3]| -> f64 {
            let r: f64 = c.iter().enumerate().map(|(n, x)| x * x * (-0.5 * n as f64 * t).exp()).sum();
            r * r
        };
        let f = nh_fidelity_general(&NoiseModel::qudit_array(2, 3, 1.0).compile(), &psi, t).unwrap();
        assert!((f - factor(&a) * factor(&b)).abs() < 1e-14);
    }

    #[test]
    fn general_dense_path() {
        let mut h = DMatrix::<Complex64>::zeros(2, 2);
        h[(0, 1)] = Complex64::new(1.0, 0.0);
        h[(1, 0)] = Complex64::new(1.0, 0.0);
        let ch = CollapseChannel::new(2.0, OperatorSpec::Sparse { matrix: CsrMatrix::from_dense(&h) }).unwrap();
        // C†C = I, so the fidelity is e^{−2t}.
        let psi = random_arbitrary_state(2, 3).unwrap();
        let f = nh_fidelity_general(&[ch], &psi, 0.25).unwrap();
        assert!((f - (-0.5f64).exp()).abs() < 1e-14);

        let mut x = DMatrix::<Complex64>::zeros(2, 2);
        x[(0, 0)] = Complex64::new(1.0, 0.0);
        x[(0, 1)] = Complex64::new(1.0, 0.0);
        let ch = CollapseChannel::new(1.0, OperatorSpec::Sparse { matrix: CsrMatrix::from_dense(&x) }).unwrap();
        let psi = fock_state(2, 0).unwrap();
        let f = nh_fidelity_general(&[ch], &psi, 1.0).unwrap();
        let oracle = (&x.adjoint() * &x * Complex64::new(-0.5, 0.0)).exp()[(0, 0)].norm_sqr();
        assert!((f - oracle).abs() < 1e-13);
    }

    #[test]
    fn moment_examples() {
        let ghz = ghz_state(10).unwrap();
        assert!((moments(&ghz, &Layout::qudit(1024), 1).unwrap().mean() - 511.5).abs() < 1e-12);
        assert!((moments(&ghz, &Layout::qubits(10), 1).unwrap().mean() - 5.0).abs() < 1e-14);
        let eq = equal_superposition_state(1024).unwrap();
        assert!((moments(&eq, &Layout::qudit(1024), 1).unwrap().mean() - 511.5).abs() < 1e-10);
        assert!((moments(&eq, &Layout::qubits(10), 1).unwrap().mean() - 5.0).abs() < 1e-12);
        let fock = fock_state(1024, 512).unwrap();
        assert_eq!(moments(&fock, &Layout::qudit(1024), 2).unwrap().total, vec![512.0, 262144.0]);
        assert_eq!(moments(&fock, &Layout::qubits(10), 1).unwrap().mean(), 1.0);
        let arr = moments(&fock_state(16, 7).unwrap(), &Layout::qudit_array(2, 4), 1).unwrap();
        assert_eq!(arr.mean(), 4.0);
        assert_eq!(arr.per_site, vec![vec![3.0], vec![1.0]]);
        assert!(moments(&fock, &Layout::qubits(9), 1).is_err());
    }

    #[test]
    fn first_order_examples() {
        let pred = |psi: &StateVector| ratio_first_order(psi, &qubit(10), &qudit(1024)).unwrap().first_order;
        assert!((pred(&ghz_state(10).unwrap()) - 1023.0 / 20.0).abs() < 1e-12);
        assert!((pred(&w_state(10).unwrap()) - 1023.0 / 20.0).abs() < 1e-12);
        assert_eq!(pred(&fock_state(1024, 512).unwrap()), 256.0);
        assert!(matches!(
            ratio_first_order(&fock_state(1024, 0).unwrap(), &qubit(10), &qudit(1024)),
            Err(Error::UndefinedRatio(_))
        ));
        // Without dephasing the factor of two disappears.
        let ad_only = NoiseModel::qubit_register(10, 1.0, false);
        let r = ratio_first_order(&ghz_state(10).unwrap(), &ad_only, &qudit(1024)).unwrap();
        assert!((r.first_order - 1023.0 / 10.0).abs() < 1e-12);
        assert!((qubit_qudit_ratio(8.16, 2.08).unwrap() - 1.96).abs() < 0.01);
    }

    #[test]
    fn ghz_closed_form_identity() {
        assert_eq!(ghz_ratio_closed_form(1), 0.5);
        assert_eq!(ghz_ratio_closed_form(4), 1.875);
        for n in 1..=12 {
            let psi = ghz_state(n).unwrap();
            let r = ratio_first_order(&psi, &qubit(n), &qudit(1 << n)).unwrap().first_order;
            assert!((r - ghz_ratio_closed_form(n)).abs() <= f64::EPSILON * r);
        }
    }

    #[test]
    fn second_order_matches_quadratic_formula() {
        for (m1, m2, ft) in [(3.0, 12.0, 0.75), (5.0, 40.0, 0.9), (1.0, 1.0, 0.5)] {
            let s: f64 = ft;
            let (a, b, c) = (m2 / 8.0, -m1 / 2.0, 1.0 - s.sqrt());
            let disc = b * b - 4.0 * a * c;
            let got = second_order_time(m1, m2, ft).unwrap();
            if disc >= 0.0 {
                let root = 2.0 * c / (-b + disc.sqrt());
                assert!(!got.unreachable);
                assert!((got.t - root).abs() < 1e-11 * root, "{m1} {m2} {ft}");
            } else {
                assert!(got.unreachable);
                assert!((got.t - m1 * 2.0 / m2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn second_order_fock_equals_first_order() {
        let psi = fock_state(64, 40).unwrap();
        let p = ratio_second_order(&psi, &qubit(6), &qudit(64), 0.75).unwrap();
        assert!((p.second_order.unwrap() - p.first_order).abs() < 1e-10 * p.first_order);
        assert!(p.warning.is_none());
    }

    #[test]
    fn second_order_approaches_first_order_near_unit_target() {
        let psi = random_arbitrary_state(64, 17).unwrap();
        let p = ratio_second_order(&psi, &qubit(6), &qudit(64), 0.99999).unwrap();
        assert!((p.second_order.unwrap() / p.first_order - 1.0).abs() < 1e-3);
    }

    #[test]
    fn disordered_examples() {
        let ghz = ghz_state(4).unwrap();
        assert!((ratio_disordered(&ghz, &[1.0; 4], 1.0).unwrap() - 1.0).abs() < 1e-15);
        let r = ratio_disordered(&ghz, &[1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        assert!((r - 10.0 / 4.0).abs() < 1e-14);
        // Qubit 2 is never excited in |0011⟩ + |0001⟩.
        let amps = (0..16)
            .map(|j| Complex64::new(if j == 3 || j == 1 { 0.5f64.sqrt() } else { 0.0 }, 0.0))
            .collect();
        let psi = StateVector::new(amps, "partial").unwrap();
        let base = ratio_disordered(&psi, &[1.0, 1.0, 1.0, 1.0], 1.0).unwrap();
        let bumped = ratio_disordered(&psi, &[1.0, 1.0, 2.0, 1.0], 1.0).unwrap();
        assert_eq!(base, bumped);
        assert!(ratio_disordered(&fock_state(16, 0).unwrap(), &[1.0; 4], 1.0).is_err());
        assert!(ratio_disordered(&ghz, &[1.0; 3], 1.0).is_err());
    }

    #[test]
    fn disordered_agrees_with_decay_moments() {
        let psi = random_arbitrary_state(16, 5).unwrap();
        let rates = vec![0.3, 1.7, 0.9, 2.2];
        let dis = NoiseModel::disordered_qubit_register(rates.clone(), true);
        let via_models = ratio_first_order(&psi, &qubit(4), &dis).unwrap().first_order;
        assert!((via_models - ratio_disordered(&psi, &rates, 1.0).unwrap()).abs() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn nh_unit_at_zero(seed in any::<u64>(), n in 1u32..7) {
            let psi = random_arbitrary_state(1 << n, seed).unwrap();
            prop_assert!((nh_fidelity_qubit(&psi, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((nh_fidelity_qudit(&psi, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn jensen(seed in any::<u64>(), n in 1u32..8) {
            let psi = random_arbitrary_state(1 << n, seed).unwrap();
            for layout in [Layout::qubits(n), Layout::qudit(1 << n)] {
                let m = moments(&psi, &layout, 3).unwrap();
                prop_assert!(m.total.iter().all(|&x| x >= 0.0));
                prop_assert!(m.variance().unwrap() >= -1e-12 * m.total[1]);
                for site in &m.per_site {
                    prop_assert!(site[1] >= site[0] * site[0] - 1e-12);
                }
            }
        }

        #[test]
        fn invariant_under_phase_and_equal_weight_swap(seed in any::<u64>(), phase in 0.0..std::f64::consts::TAU) {
            let psi = random_arbitrary_state(16, seed).unwrap();
            let base = ratio_first_order(&psi, &qubit(4), &qudit(16)).unwrap().first_order;
            let rot = Complex64::from_polar(1.0, phase);
            let rotated = StateVector::new(psi.amplitudes().iter().map(|a| a * rot).collect(), "phase").unwrap();
            let r = ratio_first_order(&rotated, &qubit(4), &qudit(16)).unwrap().first_order;
            prop_assert!((r - base).abs() < 1e-12 * base);
            // Indices 3 and 5 share Hamming weight 2.
            let mut amps = psi.amplitudes().to_vec();
            amps.swap(3, 5);
            let swapped = StateVector::new(amps, "swap").unwrap();
            let mb = moments(&swapped, &Layout::qubits(4), 2).unwrap();
            let ma = moments(&psi, &Layout::qubits(4), 2).unwrap();
            prop_assert!((mb.mean() - ma.mean()).abs() < 1e-12);
        }
    }
}
