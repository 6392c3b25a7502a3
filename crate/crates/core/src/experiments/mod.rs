//! Studies built on the propagator: lifetime ratios between memory models,
//! sweeps over register size and target fidelity, reordering gains and
//! non-Hermitian versus Lindblad comparisons.

mod output;
mod table;

pub use output::{write_jsonl, write_reports_csv, write_summary_csv};
pub use table::{run_table, Category, Profile, TableConfig, TableOutput};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ratio_second_order, RatioPrediction};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::propagate::{
    evolve_nh_on_grid, evolve_on_grid, time_to_fidelity, times_to_fidelities, CrossingResult, FidelityTrace,
    IntegratorConfig,
};
use crate::states::{ghz_state, reorder_descending, StateVector};

/// Largest register the GHZ sweep accepts.
pub const GHZ_SWEEP_MAX_QUBITS: u32 = 12;

/// Simulated and predicted lifetime ratio `t_a/t_b` of one state in two models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub state: String,
    pub model_a: String,
    pub model_b: String,
    pub target_fidelity: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub simulated_ratio: f64,
    pub predicted: RatioPrediction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RatioReport {
    fn assemble(
        state: &StateVector,
        model_a: &NoiseModel,
        model_b: &NoiseModel,
        a: &CrossingResult,
        b: &CrossingResult,
        predicted: RatioPrediction,
        config: &IntegratorConfig,
    ) -> Self {
        let mut warnings = Vec::new();
        for (name, c) in [("a", a), ("b", b)] {
            if c.nonmonotone {
                warnings.push(format!("fidelity rose before crossing in model {name}"));
            }
        }
        warnings.extend(predicted.warning.clone());
        Self {
            state: state.label().to_string(),
            model_a: model_a.describe(),
            model_b: model_b.describe(),
            target_fidelity: a.target,
            t_a: a.t_cross,
            t_b: b.t_cross,
            simulated_ratio: a.t_cross / b.t_cross,
            predicted,
            seed: None,
            config_digest: config.digest(),
            warnings,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Mean and sample standard deviation over a category of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub category: String,
    pub count: usize,
    pub simulated_mean: f64,
    pub simulated_std: Option<f64>,
    pub predicted_mean: f64,
    pub predicted_std: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

impl EnsembleSummary {
    pub fn from_reports(category: impl Into<String>, reports: &[RatioReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::invalid("cannot summarize an empty category"));
        }
        let sim: Vec<f64> = reports.iter().map(|r| r.simulated_ratio).collect();
        let pred: Vec<f64> = reports.iter().map(|r| r.predicted.first_order).collect();
        let (simulated_mean, simulated_std) = mean_std(&sim);
        let (predicted_mean, predicted_std) = mean_std(&pred);
        Ok(Self {
            category: category.into(),
            count: reports.len(),
            simulated_mean,
            simulated_std,
            predicted_mean,
            predicted_std,
        })
    }
}

/// Runs `f` over `items` on a pool of `threads` workers (the global pool when
/// `None`). Output order follows input order.
pub fn run_pool<T, R, F>(threads: Option<usize>, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match threads {
        None => Ok(items.par_iter().map(&f).collect()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(|| items.par_iter().map(&f).collect()))
        }
    }
}

/// Lifetime ratio `t_a/t_b` at every target fidelity, from one integration per model.
pub fn run_ratio_targets(
    state: &StateVector,
    model_a: &NoiseModel,
    model_b: &NoiseModel,
    targets: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<RatioReport>> {
    let (ca, cb) = rayon::join(
        || times_to_fidelities(model_a, state, targets, config),
        || times_to_fidelities(model_b, state, targets, config),
    );
    let (ca, cb) = (ca?, cb?);
    targets
        .iter()
        .zip(ca.iter().zip(&cb))
        .map(|(&ft, (a, b))| {
            let predicted = ratio_second_order(state, model_a, model_b, ft)?;
            Ok(RatioReport::assemble(state, model_a, model_b, a, b, predicted, config))
        })
        .collect()
}

pub fn run_ratio(
    state: &StateVector,
    model_a: &NoiseModel,
    model_b: &NoiseModel,
    target: f64,
    config: &IntegratorConfig,
) -> Result<RatioReport> {
    run_ratio_targets(state, model_a, model_b, &[target], config).map(|mut v| v.remove(0))
}

/// GHZ state of `n` qubits with the dephased register and the matching qudit,
/// both at unit rate.
pub fn ghz_pair(n_qubits: u32) -> Result<(StateVector, NoiseModel, NoiseModel)> {
    let psi = ghz_state(n_qubits)?;
    Ok((
        psi,
        NoiseModel::qubit_register(n_qubits, 1.0, true),
        NoiseModel::single_qudit(1 << n_qubits, 1.0),
    ))
}

/// Qubit-versus-qudit GHZ ratios; `predicted.first_order` is `(2^n − 1)/(2n)`.
pub fn run_ghz_sweep(
    n_qubits: &[u32],
    target: f64,
    config: &IntegratorConfig,
    threads: Option<usize>,
) -> Result<Vec<RatioReport>> {
    if let Some(&n) = n_qubits.iter().find(|&&n| n == 0 || n > GHZ_SWEEP_MAX_QUBITS) {
        return Err(Error::invalid(format!(
            "GHZ sweep supports 1..={GHZ_SWEEP_MAX_QUBITS} qubits, got {n}"
        )));
    }
    run_pool(threads, n_qubits, |&n| {
        let (psi, a, b) = ghz_pair(n)?;
        run_ratio(&psi, &a, &b, target, config)
    })?
    .into_iter()
    .collect()
}

/// One (state, model pair) of a target-fidelity sweep.
#[derive(Debug, Clone)]
pub struct SweepCase {
    pub state: StateVector,
    pub model_a: NoiseModel,
    pub model_b: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetGroup {
    pub target_fidelity: f64,
    pub reports: Vec<RatioReport>,
}

/// Ratio reports for every case at every target, grouped by target in the
/// order given.
pub fn run_ftar_sweep(
    cases: &[SweepCase],
    targets: &[f64],
    config: &IntegratorConfig,
    threads: Option<usize>,
) -> Result<Vec<TargetGroup>> {
    let per_case: Vec<Vec<RatioReport>> = run_pool(threads, cases, |c| {
        run_ratio_targets(&c.state, &c.model_a, &c.model_b, targets, config)
    })?
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(k, &ft)| TargetGroup {
            target_fidelity: ft,
            reports: per_case.iter().map(|r| r[k].clone()).collect(),
        })
        .collect())
}

/// Lifetime gain from storing amplitudes in descending magnitude order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReorderReport {
    pub state: String,
    pub model: String,
    pub target_fidelity: f64,
    pub t_unsorted: f64,
    /// `None` when the sorted state never reaches the target.
    pub t_sorted: Option<f64>,
    /// `t_sorted / t_unsorted`.
    pub gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentinel: Option<String>,
    pub permutation_is_identity: bool,
}

pub fn run_reorder(
    state: &StateVector,
    model: &NoiseModel,
    target: f64,
    config: &IntegratorConfig,
) -> Result<ReorderReport> {
    let (sorted, perm) = reorder_descending(state);
    let unsorted = time_to_fidelity(model, state, target, config)?;
    let (t_sorted, sentinel) = match time_to_fidelity(model, &sorted, target, config) {
        Ok(c) => (Some(c.t_cross), None),
        Err(Error::NoCrossing { horizon, last_fidelity, .. }) => (
            None,
            Some(format!(
                "no crossing within horizon t = {horizon:e} (fidelity still {last_fidelity})"
            )),
        ),
        Err(e) => return Err(e),
    };
    Ok(ReorderReport {
        state: state.label().to_string(),
        model: model.describe(),
        target_fidelity: target,
        t_unsorted: unsorted.t_cross,
        t_sorted,
        gain: t_sorted.map(|t| t / unsorted.t_cross),
        sentinel,
        permutation_is_identity: perm.iter().enumerate().all(|(k, &p)| k == p),
    })
}

/// Full and non-Hermitian fidelity traces on a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NhComparison {
    pub state: String,
    pub model: String,
    pub lindblad: FidelityTrace,
    pub nh: FidelityTrace,
}

impl NhComparison {
    /// Largest `|F_lindblad − F_nh|` over the grid.
    pub fn max_gap(&self) -> f64 {
        self.lindblad
            .fidelities()
            .zip(self.nh.fidelities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `t, lindblad, nh` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,lindblad,nh")?;
        for (a, b) in self.lindblad.samples.iter().zip(&self.nh.samples) {
            writeln!(w, "{:?},{:?},{:?}", a.t, a.fidelity, b.fidelity)?;
        }
        Ok(())
    }
}

/// Both traces sampled at `samples` evenly spaced times in `(0, t_end]`, plus `t = 0`.
pub fn run_nh_comparison(
    state: &StateVector,
    model: &NoiseModel,
    t_end: f64,
    samples: usize,
    config: &IntegratorConfig,
) -> Result<NhComparison> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample time"));
    }
    let grid: Vec<f64> = (1..=samples).map(|k| t_end * k as f64 / samples as f64).collect();
    let lindblad = evolve_on_grid(model, state, &grid, config)?;
    let nh = evolve_nh_on_grid(model, state, &grid, config)?;
    Ok(NhComparison {
        state: state.label().to_string(),
        model: model.describe(),
        lindblad,
        nh,
    })
}
