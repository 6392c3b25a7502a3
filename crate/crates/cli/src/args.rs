//! `name:params` grammar for states and noise models.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use qmemsim_core::states::{
    coherent_state, default_coherent_alpha, equal_superposition_state, fock_state, ghz_state, load_state_file,
    random_arbitrary_state, random_unentangled_state, w_state,
};
use qmemsim_core::{NoiseModel, StateVector};

pub const STATE_FORMS: &str = "ghz:N, w:N, equal:D, fock:D:N, coherent:D[:ALPHA], arb:D[:SEED], unent:N[:SEED], file:PATH";
pub const MODEL_FORMS: &str = "qubit:N, qubit-ad:N, qudit:D, array:C:D, file:PATH";

#[derive(Debug, Clone, PartialEq)]
pub enum StateArg {
    Ghz(u32),
    W(u32),
    Equal(usize),
    Fock(usize, usize),
    Coherent(usize, Option<f64>),
    Arbitrary(usize, Option<u64>),
    Unentangled(u32, Option<u64>),
    File(PathBuf),
}

fn field<T: FromStr>(raw: &str, what: &str) -> Result<T, String> {
    raw.parse().map_err(|_| format!("cannot read {what} from {raw:?}"))
}

fn split(s: &str) -> (&str, Vec<&str>) {
    let mut parts = s.split(':');
    let name = parts.next().unwrap_or_default();
    (name, parts.collect())
}

impl FromStr for StateArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(StateArg::File(path.into()));
        }
        let (name, p) = split(s);
        let arg = match (name, p.as_slice()) {
            ("ghz", [n]) => StateArg::Ghz(field(n, "qubit count")?),
            ("w", [n]) => StateArg::W(field(n, "qubit count")?),
            ("equal", [d]) => StateArg::Equal(field(d, "dimension")?),
            ("fock", [d, n]) => StateArg::Fock(field(d, "dimension")?, field(n, "level")?),
            ("coherent", [d]) => StateArg::Coherent(field(d, "dimension")?, None),
            ("coherent", [d, a]) => StateArg::Coherent(field(d, "dimension")?, Some(field(a, "alpha")?)),
            ("arb", [d]) => StateArg::Arbitrary(field(d, "dimension")?, None),
            ("arb", [d, seed]) => StateArg::Arbitrary(field(d, "dimension")?, Some(field(seed, "seed")?)),
            ("unent", [n]) => StateArg::Unentangled(field(n, "qubit count")?, None),
            ("unent", [n, seed]) => StateArg::Unentangled(field(n, "qubit count")?, Some(field(seed, "seed")?)),
            _ => return Err(format!("unrecognized state {s:?}; expected one of {STATE_FORMS}")),
        };
        Ok(arg)
    }
}

impl StateArg {
    /// Seed actually used, for random states.
    pub fn seed(&self, default_seed: u64) -> Option<u64> {
        match self {
            StateArg::Arbitrary(_, s) | StateArg::Unentangled(_, s) => Some(s.unwrap_or(default_seed)),
            _ => None,
        }
    }

    pub fn build(&self, default_seed: u64) -> qmemsim_core::Result<StateVector> {
        let seed = self.seed(default_seed).unwrap_or_default();
        match self {
            StateArg::Ghz(n) => ghz_state(*n),
            StateArg::W(n) => w_state(*n),
            StateArg::Equal(d) => equal_superposition_state(*d),
            StateArg::Fock(d, n) => fock_state(*d, *n),
            StateArg::Coherent(d, alpha) => coherent_state(*d, alpha.unwrap_or_else(|| default_coherent_alpha(*d))),
            StateArg::Arbitrary(d, _) => random_arbitrary_state(*d, seed),
            StateArg::Unentangled(n, _) => random_unentangled_state(*n, seed),
            StateArg::File(path) => load_state_file(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelArg {
    Qubits { n: u32, dephasing: bool },
    Qudit(usize),
    Array(u32, usize),
    File(PathBuf),
}

impl FromStr for ModelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(ModelArg::File(path.into()));
        }
        let (name, p) = split(s);
        let arg = match (name, p.as_slice()) {
            ("qubit", [n]) => ModelArg::Qubits {
                n: field(n, "qubit count")?,
                dephasing: true,
            },
            ("qubit-ad", [n]) => ModelArg::Qubits {
                n: field(n, "qubit count")?,
                dephasing: false,
            },
            ("qudit", [d]) => ModelArg::Qudit(field(d, "dimension")?),
            ("array", [c, d]) => ModelArg::Array(field(c, "qudit count")?, field(d, "levels")?),
            _ => return Err(format!("unrecognized model {s:?}; expected one of {MODEL_FORMS}")),
        };
        Ok(arg)
    }
}

impl ModelArg {
    /// Builds the model at rate `gamma`. File models carry their own rates.
    pub fn build(&self, gamma: f64) -> qmemsim_core::Result<NoiseModel> {
        let model = match self {
            ModelArg::Qubits { n, dephasing } => NoiseModel::qubit_register(*n, gamma, *dephasing),
            ModelArg::Qudit(d) => NoiseModel::single_qudit(*d, gamma),
            ModelArg::Array(c, d) => NoiseModel::qudit_array(*c, *d, gamma),
            ModelArg::File(path) => return NoiseModel::load(path),
        };
        model.validate()?;
        Ok(model)
    }
}

impl fmt::Display for StateArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateArg::Ghz(n) => write!(f, "ghz:{n}"),
            StateArg::W(n) => write!(f, "w:{n}"),
            StateArg::Equal(d) => write!(f, "equal:{d}"),
            StateArg::Fock(d, n) => write!(f, "fock:{d}:{n}"),
            StateArg::Coherent(d, None) => write!(f, "coherent:{d}"),
            StateArg::Coherent(d, Some(a)) => write!(f, "coherent:{d}:{a:?}"),
            StateArg::Arbitrary(d, None) => write!(f, "arb:{d}"),
            StateArg::Arbitrary(d, Some(s)) => write!(f, "arb:{d}:{s}"),
            StateArg::Unentangled(n, None) => write!(f, "unent:{n}"),
            StateArg::Unentangled(n, Some(s)) => write!(f, "unent:{n}:{s}"),
            StateArg::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl fmt::Display for ModelArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelArg::Qubits { n, dephasing: true } => write!(f, "qubit:{n}"),
            ModelArg::Qubits { n, dephasing: false } => write!(f, "qubit-ad:{n}"),
            ModelArg::Qudit(d) => write!(f, "qudit:{d}"),
            ModelArg::Array(c, d) => write!(f, "array:{c}:{d}"),
            ModelArg::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

macro_rules! serialize_as_text {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
    )*};
}

serialize_as_text!(StateArg, ModelArg);

/// Comma-separated target fidelities, e.g. `0.7,0.75,0.9`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Targets(pub Vec<f64>);

impl FromStr for Targets {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_list(s).map(Targets)
    }
}

/// Register sizes as an inclusive range `A..B` or a comma list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Qubits(pub Vec<u32>);

impl FromStr for Qubits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_qubit_list(s).map(Qubits)
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("cannot read {x:?} in list {s:?}")))
        .collect()
}

fn parse_qubit_list(s: &str) -> Result<Vec<u32>, String> {
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u32, u32) = (field(a, "range start")?, field(b.trim_start_matches('='), "range end")?);
            if a > b {
                return Err(format!("empty range {s:?}"));
            }
            Ok((a..=b).collect())
        }
        None => parse_list(s),
    }
}
