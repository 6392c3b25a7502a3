use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{run_pool, run_ratio, EnsembleSummary, RatioReport};
use crate::noise::NoiseModel;
use crate::propagate::IntegratorConfig;
use crate::states::{
    coherent_state, default_coherent_alpha, equal_superposition_state, fock_state, ghz_state, load_state_file,
    random_arbitrary_state, random_unentangled_state, w_state, StateVector,
};

/// Problem-size preset: `Ci` works on 6 qubits (dimension 64), `Paper` on 10
/// (dimension 1024).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Ci,
    Paper,
}

impl Profile {
    pub fn n_qubits(self) -> u32 {
        match self {
            Profile::Ci => 6,
            Profile::Paper => 10,
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ci" => Ok(Profile::Ci),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::invalid(format!("unknown profile {other:?}; expected ci or paper"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Ci => "ci",
            Profile::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Ghz,
    W,
    Equal,
    Fock,
    Coherent,
    Qaoa,
    Vqe,
    Arbitrary,
    Unentangled,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Ghz,
        Category::W,
        Category::Equal,
        Category::Fock,
        Category::Coherent,
        Category::Qaoa,
        Category::Vqe,
        Category::Arbitrary,
        Category::Unentangled,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::Ghz => "GHZ",
            Category::W => "W",
            Category::Equal => "Equal",
            Category::Fock => "Fock",
            Category::Coherent => "Coherent",
            Category::Qaoa => "QAOA",
            Category::Vqe => "VQE",
            Category::Arbitrary => "Arbitrary",
            Category::Unentangled => "Unentangled",
        }
    }

    fn file_prefix(self) -> Option<&'static str> {
        match self {
            Category::Qaoa => Some("qaoa_"),
            Category::Vqe => Some("vqe_"),
            _ => None,
        }
    }
}

/// Which states make up the table and how the ratios are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub n_qubits: u32,
    pub categories: Vec<Category>,
    /// Instances per random category.
    pub ensemble_size: usize,
    /// Arbitrary instance `i` uses seed `base_seed + i`; unentangled instance
    /// `i` uses `base_seed + UNENTANGLED_SEED_OFFSET + i`.
    pub base_seed: u64,
    /// Directory holding `qaoa_*.json` and `vqe_*.json` amplitude files.
    pub states_dir: Option<PathBuf>,
    pub target_fidelity: f64,
    pub integrator: IntegratorConfig,
}

pub const UNENTANGLED_SEED_OFFSET: u64 = 1 << 32;

impl TableConfig {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            n_qubits: profile.n_qubits(),
            categories: Category::ALL.to_vec(),
            ensemble_size: 10,
            base_seed: 0,
            states_dir: None,
            target_fidelity: 0.75,
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableOutput {
    pub rows: Vec<EnsembleSummary>,
    pub reports: Vec<RatioReport>,
    /// Categories or files that could not be run, with the reason.
    pub skipped: Vec<String>,
}

struct Job {
    category: Category,
    state: StateVector,
    seed: Option<u64>,
}

fn file_states(dir: Option<&Path>, prefix: &str, dim: usize, skipped: &mut Vec<String>) -> Vec<StateVector> {
    let Some(dir) = dir else {
        return Vec::new();
    };
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with(prefix))
            })
            .collect(),
        Err(e) => {
            skipped.push(format!("{}: {e}", dir.display()));
            return Vec::new();
        }
    };
    paths.sort();
    let mut states = Vec::new();
    for p in paths {
        match load_state_file(&p) {
            Ok(s) if s.dim() == dim => states.push(s),
            Ok(s) => skipped.push(format!("{}: dimension {} instead of {dim}", p.display(), s.dim())),
            Err(e) => skipped.push(format!("{}: {e}", p.display())),
        }
    }
    states
}

fn build_jobs(config: &TableConfig, skipped: &mut Vec<String>) -> Result<Vec<Job>> {
    let n = config.n_qubits;
    let dim = config.dim();
    let mut jobs = Vec::new();
    let single = |category, state| Job {
        category,
        state,
        seed: None,
    };
    for &cat in &config.categories {
        match cat {
            Category::Ghz => jobs.push(single(cat, ghz_state(n)?)),
            Category::W => jobs.push(single(cat, w_state(n)?)),
            Category::Equal => jobs.push(single(cat, equal_superposition_state(dim)?)),
            Category::Fock => jobs.push(single(cat, fock_state(dim, dim / 2)?)),
            Category::Coherent => jobs.push(single(cat, coherent_state(dim, default_coherent_alpha(dim))?)),
            Category::Qaoa | Category::Vqe => {
                let prefix = cat.file_prefix().expect("file category");
                let states = file_states(config.states_dir.as_deref(), prefix, dim, skipped);
                if states.is_empty() {
                    skipped.push(format!("{}: no {prefix}*.json amplitude files", cat.label()));
                }
                jobs.extend(states.into_iter().map(|s| single(cat, s)));
            }
            Category::Arbitrary => {
                for i in 0..config.ensemble_size as u64 {
                    let seed = config.base_seed.wrapping_add(i);
                    jobs.push(Job {
                        category: cat,
                        state: random_arbitrary_state(dim, seed)?,
                        seed: Some(seed),
                    });
                }
            }
            Category::Unentangled => {
                for i in 0..config.ensemble_size as u64 {
                    let seed = config.base_seed.wrapping_add(UNENTANGLED_SEED_OFFSET + i);
                    jobs.push(Job {
                        category: cat,
                        state: random_unentangled_state(n, seed)?,
                        seed: Some(seed),
                    });
                }
            }
        }
    }
    Ok(jobs)
}

/// Qubit-register versus single-qudit ratios for every catalog state, with a
/// summary row per category.
pub fn run_table(config: &TableConfig, threads: Option<usize>) -> Result<TableOutput> {
    config.integrator.validate()?;
    let mut skipped = Vec::new();
    let jobs = build_jobs(config, &mut skipped)?;
    let qubit = NoiseModel::qubit_register(config.n_qubits, 1.0, true);
    let qudit = NoiseModel::single_qudit(config.dim(), 1.0);
    let results = run_pool(threads, &jobs, |job| {
        run_ratio(&job.state, &qubit, &qudit, config.target_fidelity, &config.integrator)
            .map(|r| match job.seed {
                Some(s) => r.with_seed(s),
                None => r,
            })
    })?;

    let mut reports = Vec::with_capacity(jobs.len());
    for r in results {
        reports.push(r?);
    }
    let mut rows = Vec::new();
    for &cat in &config.categories {
        let members: Vec<RatioReport> = jobs
            .iter()
            .zip(&reports)
            .filter(|(j, _)| j.category == cat)
            .map(|(_, r)| r.clone())
            .collect();
        if !members.is_empty() {
            rows.push(EnsembleSummary::from_reports(cat.label(), &members)?);
        }
    }
    Ok(TableOutput { rows, reports, skipped })
}
