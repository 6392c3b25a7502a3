use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::norm_sqr;
use crate::states::StateVector;

/// Largest norm deviation that is silently renormalized on load.
pub const LOAD_NORM_TOLERANCE: f64 = 1e-6;

/// On-disk amplitude list: `{"dim": N, "amplitudes": [[re, im], ...], "label": "..."}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeFile {
    pub dim: usize,
    pub amplitudes: Vec<[f64; 2]>,
    #[serde(default)]
    pub label: String,
}

impl From<&StateVector> for AmplitudeFile {
    fn from(state: &StateVector) -> Self {
        Self {
            dim: state.dim(),
            amplitudes: state.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
            label: state.label().to_string(),
        }
    }
}

pub fn load_state_file(path: impl AsRef<Path>) -> Result<StateVector> {
    let path = path.as_ref();
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path)?;
    let file: AmplitudeFile = serde_json::from_str(&text).map_err(|e| format_err(e.to_string()))?;
    if file.amplitudes.len() != file.dim {
        return Err(format_err(format!(
            "dim is {} but {} amplitudes were given",
            file.dim,
            file.amplitudes.len()
        )));
    }
    if file.dim < 2 {
        return Err(format_err(format!("dim must be at least 2, got {}", file.dim)));
    }
    let amps: Vec<Complex64> = file
        .amplitudes
        .iter()
        .map(|&[re, im]| Complex64::new(re, im))
        .collect();
    let norm = norm_sqr(&amps).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() >= LOAD_NORM_TOLERANCE {
        return Err(Error::Validation(format!(
            "{}: amplitude norm {norm} deviates from 1 by more than {LOAD_NORM_TOLERANCE}",
            path.display()
        )));
    }
    StateVector::normalized(amps, format!("file:{}", path.display()))
}

pub fn save_state_file(state: &StateVector, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&AmplitudeFile::from(state))?;
    fs::write(path, text)?;
    Ok(())
}
