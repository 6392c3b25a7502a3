//! Time integration of the master equation and fidelity-crossing search.

mod dopri;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::noise::density::{clamp_fidelity, pure_overlap};
use crate::noise::{DensityMatrix, Lindbladian, NoiseModel};
use crate::states::StateVector;

use dopri::{Controller, Dopri5};

/// Crossing refinement stops once `|F(t*) − F_t|` is below this.
pub const CROSSING_TOLERANCE: f64 = 1e-12;
/// Bound guaranteed on every reported crossing.
pub const CROSSING_GUARANTEE: f64 = 1e-9;
/// Sample count of analytic non-Hermitian traces.
pub const NH_SAMPLES: usize = 257;

/// Settings of the adaptive Runge–Kutta integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Defaults to `1e-3` over the fastest decay rate of the generator.
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    /// Budget of attempted steps, accepted and rejected.
    pub max_steps: u64,
    /// Time after which a crossing search gives up. Defaults to `1e3` over the
    /// smallest nonzero rate.
    pub horizon: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: None,
            max_step: None,
            max_steps: 10_000_000,
            horizon: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.rtol) || !positive(self.atol) {
            return Err(Error::invalid("integrator tolerances must be positive"));
        }
        for (name, v) in [("initial step", self.initial_step), ("max step", self.max_step), ("horizon", self.horizon)] {
            if let Some(v) = v {
                if !positive(v) {
                    return Err(Error::invalid(format!("{name} must be positive")));
                }
            }
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max steps must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the JSON encoding, hex.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub fidelity: f64,
}

/// Fidelity against the initial state, sampled in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTrace {
    pub samples: Vec<TraceSample>,
    pub method: String,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub rhs_evaluations: u64,
    /// Largest `|Tr ρ − 1|` seen at an accepted step; zero for wavefunction runs.
    pub max_trace_deviation: f64,
    pub config: IntegratorConfig,
}

/// Everything in a trace except the samples, for the JSON sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct TraceMetadata<'a> {
    pub method: &'a str,
    pub samples: usize,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub rhs_evaluations: u64,
    pub max_trace_deviation: f64,
    pub config: &'a IntegratorConfig,
    pub config_digest: String,
}

impl FidelityTrace {
    fn new(method: &str, config: &IntegratorConfig) -> Self {
        Self {
            samples: Vec::new(),
            method: method.to_string(),
            steps_accepted: 0,
            steps_rejected: 0,
            rhs_evaluations: 0,
            max_trace_deviation: 0.0,
            config: config.clone(),
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn fidelities(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.fidelity)
    }

    pub fn last(&self) -> Option<TraceSample> {
        self.samples.last().copied()
    }

    /// CSV with header `t,fidelity`; values in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,fidelity")?;
        for s in &self.samples {
            writeln!(w, "{:?},{:?}", s.t, s.fidelity)?;
        }
        Ok(())
    }

    pub fn metadata(&self) -> TraceMetadata<'_> {
        TraceMetadata {
            method: &self.method,
            samples: self.samples.len(),
            steps_accepted: self.steps_accepted,
            steps_rejected: self.steps_rejected,
            rhs_evaluations: self.rhs_evaluations,
            max_trace_deviation: self.max_trace_deviation,
            config: &self.config,
            config_digest: self.config.digest(),
        }
    }
}

/// Where fidelity first fell to a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingResult {
    pub target: f64,
    pub t_cross: f64,
    pub fidelity_at_cross: f64,
    /// The accepted integration step that contains the crossing.
    pub bracket: (f64, f64),
    /// Set when fidelity rose at some accepted step before the crossing, so
    /// the monotone-decay assumption behind first-crossing detection failed.
    pub nonmonotone: bool,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
}

trait Flow: Sync {
    fn rhs(&self, y: &[Complex64], out: &mut [Complex64]);
    fn fidelity(&self, y: &[Complex64]) -> f64;
    fn trace_deviation(&self, _y: &[Complex64]) -> f64 {
        0.0
    }
}

struct LindbladFlow<'a> {
    generator: &'a Lindbladian,
    target: &'a [Complex64],
}

impl Flow for LindbladFlow<'_> {
    fn rhs(&self, y: &[Complex64], out: &mut [Complex64]) {
        self.generator.apply(y, out);
    }

    fn fidelity(&self, y: &[Complex64]) -> f64 {
        clamp_fidelity(pure_overlap(self.target, y).re)
    }

    fn trace_deviation(&self, y: &[Complex64]) -> f64 {
        let dim = self.target.len();
        let tr: f64 = (0..dim).map(|m| y[m * dim + m].re).sum();
        (tr - 1.0).abs()
    }
}

struct NhFlow<'a> {
    generator: &'a Lindbladian,
    target: &'a [Complex64],
}

impl Flow for NhFlow<'_> {
    fn rhs(&self, y: &[Complex64], out: &mut [Complex64]) {
        self.generator.apply_nh(y, out);
    }

    fn fidelity(&self, y: &[Complex64]) -> f64 {
        let overlap: Complex64 = self.target.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
        clamp_fidelity(overlap.norm_sqr())
    }
}

struct Driver<'a, F: Flow> {
    flow: &'a F,
    config: &'a IntegratorConfig,
    stepper: Dopri5,
    controller: Controller,
    t: f64,
    h: f64,
    h_floor: f64,
    y: Vec<Complex64>,
    y_prev: Vec<Complex64>,
    fidelity: f64,
    trace: FidelityTrace,
}

impl<'a, F: Flow> Driver<'a, F> {
    fn new(flow: &'a F, y0: Vec<Complex64>, config: &'a IntegratorConfig, h0: f64, method: &str) -> Self {
        let fidelity = flow.fidelity(&y0);
        let mut trace = FidelityTrace::new(method, config);
        trace.samples.push(TraceSample { t: 0.0, fidelity });
        trace.max_trace_deviation = flow.trace_deviation(&y0);
        Self {
            flow,
            config,
            stepper: Dopri5::new(y0.len()),
            controller: Controller::new(),
            t: 0.0,
            h: h0,
            h_floor: h0 * 1e-12,
            y_prev: y0.clone(),
            y: y0,
            fidelity,
            trace,
        }
    }

    fn sync_stats(&mut self) {
        self.trace.rhs_evaluations = self.stepper.rhs_evaluations;
    }

    fn partial_failure(&mut self, reason: String) -> Error {
        self.sync_stats();
        Error::IntegrationFailure {
            reason,
            partial: Box::new(self.trace.clone()),
        }
    }

    /// Takes one accepted step ending no later than `t_stop`; returns its size.
    fn step(&mut self, t_stop: f64) -> Result<f64> {
        let flow = self.flow;
        let rhs = |y: &[Complex64], out: &mut [Complex64]| flow.rhs(y, out);
        loop {
            if self.trace.steps_accepted + self.trace.steps_rejected >= self.config.max_steps {
                let reason = format!("step budget of {} exhausted at t = {:e}", self.config.max_steps, self.t);
                return Err(self.partial_failure(reason));
            }
            let remaining = t_stop - self.t;
            let mut h = self.h.min(self.config.max_step.unwrap_or(f64::INFINITY));
            let clipped = h >= remaining;
            if clipped {
                h = remaining;
            }
            if !clipped && h < self.h_floor.max(16.0 * f64::EPSILON * self.t.abs()) {
                return Err(Error::Stiffness { t: self.t, step: h });
            }
            let err = self
                .stepper
                .attempt(&rhs, &self.y, h, &mut self.y_prev, self.config.rtol, self.config.atol);
            if err <= 1.0 {
                self.stepper.accept();
                std::mem::swap(&mut self.y, &mut self.y_prev);
                self.t = if clipped { t_stop } else { self.t + h };
                let proposed = self.controller.accepted(h, err);
                self.h = if clipped { proposed.max(self.h) } else { proposed };
                self.fidelity = flow.fidelity(&self.y);
                self.trace.steps_accepted += 1;
                self.trace.max_trace_deviation = self.trace.max_trace_deviation.max(flow.trace_deviation(&self.y));
                return Ok(h);
            }
            self.trace.steps_rejected += 1;
            self.h = self.controller.rejected(h, err);
        }
    }

    fn record(&mut self) {
        self.trace.samples.push(TraceSample {
            t: self.t,
            fidelity: self.fidelity,
        });
    }

    /// Locates `F = target` inside the step just taken, from `t_left` with
    /// fidelity `f_left`, by re-integrating sub-steps from the saved state.
    fn refine_crossing(&mut self, t_left: f64, h_step: f64, f_left: f64, target: f64) -> (f64, f64) {
        let flow = self.flow;
        let rhs = |y: &[Complex64], out: &mut [Complex64]| flow.rhs(y, out);
        let mut k1 = vec![Complex64::new(0.0, 0.0); self.y.len()];
        let mut trial = k1.clone();
        flow.rhs(&self.y_prev, &mut k1);
        self.stepper.rhs_evaluations += 1;

        let (mut a, mut fa) = (0.0, f_left - target);
        let (mut b, mut fb) = (h_step, self.fidelity - target);
        if fa <= 0.0 {
            return (t_left, f_left);
        }
        let mut best = (b, fb);
        // Illinois variant of regula falsi; falls back to bisection when the
        // secant point leaves the bracket.
        let mut last_side = 0i8;
        for _ in 0..200 {
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            self.stepper.substep(&rhs, &self.y_prev, &k1, c, &mut trial);
            let fc = flow.fidelity(&trial) - target;
            if fc.abs() < best.1.abs() {
                best = (c, fc);
            }
            if fc.abs() < CROSSING_TOLERANCE {
                break;
            }
            if fc < 0.0 {
                b = c;
                fb = fc;
                if last_side == 1 {
                    fa *= 0.5;
                }
                last_side = 1;
            } else {
                a = c;
                fa = fc;
                if last_side == -1 {
                    fb *= 0.5;
                }
                last_side = -1;
            }
            if b - a <= 4.0 * f64::EPSILON * (t_left + b) {
                break;
            }
        }
        (t_left + best.0, target + best.1)
    }
}

fn initial_step(config: &IntegratorConfig, generator: &Lindbladian, span: f64) -> f64 {
    config.initial_step.unwrap_or_else(|| {
        let fastest = generator.fastest_rate();
        if fastest > 0.0 {
            (1e-3 / fastest).min(span)
        } else {
            span
        }
    })
}

fn prepare(model: &NoiseModel, psi0: &StateVector, config: &IntegratorConfig) -> Result<Lindbladian> {
    config.validate()?;
    model.validate()?;
    Error::check_dim(model.dim(), psi0.dim())?;
    Lindbladian::from_model(model)
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if times[0] < 0.0 || !times.iter().all(|t| t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("time grid must be finite, nonnegative and strictly increasing"));
    }
    Ok(())
}

fn check_t_end(t_end: f64) -> Result<()> {
    if t_end.is_finite() && t_end > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("end time must be positive, got {t_end}")))
    }
}

/// Integrates `dρ/dt = L[ρ]` from `|ψ0⟩⟨ψ0|`, returning fidelity at every
/// accepted step together with the final density matrix.
pub fn evolve_density(
    model: &NoiseModel,
    psi0: &StateVector,
    t_end: f64,
    config: &IntegratorConfig,
) -> Result<(FidelityTrace, DensityMatrix)> {
    check_t_end(t_end)?;
    let generator = prepare(model, psi0, config)?;
    let flow = LindbladFlow {
        generator: &generator,
        target: psi0.amplitudes(),
    };
    let rho0 = DensityMatrix::from_pure(psi0).into_raw();
    let h0 = initial_step(config, &generator, t_end);
    let mut driver = Driver::new(&flow, rho0, config, h0, "lindblad-dopri5");
    while driver.t < t_end {
        driver.step(t_end)?;
        driver.record();
    }
    driver.sync_stats();
    let rho = DensityMatrix::from_raw(psi0.dim(), driver.y)?;
    Ok((driver.trace, rho))
}

/// Integrates the master equation to `t_end`; fidelity at every accepted step.
pub fn evolve(model: &NoiseModel, psi0: &StateVector, t_end: f64, config: &IntegratorConfig) -> Result<FidelityTrace> {
    evolve_density(model, psi0, t_end, config).map(|(trace, _)| trace)
}

/// Like [`evolve`] but sampled exactly at `times` (steps are shortened to land
/// on every grid point). A leading `t = 0` is implied.
pub fn evolve_on_grid(
    model: &NoiseModel,
    psi0: &StateVector,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<FidelityTrace> {
    check_grid(times)?;
    let generator = prepare(model, psi0, config)?;
    let flow = LindbladFlow {
        generator: &generator,
        target: psi0.amplitudes(),
    };
    let rho0 = DensityMatrix::from_pure(psi0).into_raw();
    let h0 = initial_step(config, &generator, *times.last().unwrap());
    let mut driver = Driver::new(&flow, rho0, config, h0, "lindblad-dopri5");
    if times[0] == 0.0 {
        driver.trace.samples.clear();
    }
    for &t in times {
        while driver.t < t {
            driver.step(t)?;
        }
        driver.record();
    }
    driver.sync_stats();
    Ok(driver.trace)
}

/// First time fidelity drops to `target`.
pub fn time_to_fidelity(
    model: &NoiseModel,
    psi0: &StateVector,
    target: f64,
    config: &IntegratorConfig,
) -> Result<CrossingResult> {
    times_to_fidelities(model, psi0, &[target], config).map(|mut v| v.remove(0))
}

/// Crossing times for several targets from a single integration. Results are
/// in the order of `targets`.
pub fn times_to_fidelities(
    model: &NoiseModel,
    psi0: &StateVector,
    targets: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<CrossingResult>> {
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    for &f in targets {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid(format!("target fidelity must lie in (0, 1), got {f}")));
        }
    }
    let generator = prepare(model, psi0, config)?;
    let lowest = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let horizon = match config.horizon.or_else(|| model.min_positive_rate().map(|g| 1e3 / g)) {
        Some(h) if !generator.is_zero() => h,
        _ => {
            return Err(Error::NoCrossing {
                target: lowest,
                horizon: f64::INFINITY,
                last_fidelity: 1.0,
            })
        }
    };

    let flow = LindbladFlow {
        generator: &generator,
        target: psi0.amplitudes(),
    };
    let rho0 = DensityMatrix::from_pure(psi0).into_raw();
    let h0 = initial_step(config, &generator, horizon);
    let mut driver = Driver::new(&flow, rho0, config, h0, "lindblad-dopri5");

    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[b].total_cmp(&targets[a]));
    let mut results: Vec<Option<CrossingResult>> = vec![None; targets.len()];
    let mut next = 0;
    let mut nonmonotone = false;

    while next < order.len() {
        if driver.t >= horizon {
            return Err(Error::NoCrossing {
                target: targets[order[next]],
                horizon,
                last_fidelity: driver.fidelity,
            });
        }
        let (t_left, f_left) = (driver.t, driver.fidelity);
        let h = driver.step(horizon)?;
        if driver.fidelity > f_left + 1e-12 {
            nonmonotone = true;
        }
        while next < order.len() && driver.fidelity < targets[order[next]] {
            let idx = order[next];
            let (t_cross, f_cross) = driver.refine_crossing(t_left, h, f_left, targets[idx]);
            results[idx] = Some(CrossingResult {
                target: targets[idx],
                t_cross,
                fidelity_at_cross: f_cross,
                bracket: (t_left, t_left + h),
                nonmonotone,
                steps_accepted: driver.trace.steps_accepted,
                steps_rejected: driver.trace.steps_rejected,
            });
            next += 1;
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every target crossed")).collect())
}

/// `|⟨ψ0| e^{−tD/2} |ψ0⟩|²` for diagonal `D`.
fn nh_diagonal_fidelity(psi0: &StateVector, decay: &[f64], t: f64) -> f64 {
    let amp: f64 = psi0
        .amplitudes()
        .iter()
        .zip(decay)
        .map(|(a, d)| a.norm_sqr() * (-0.5 * d * t).exp())
        .sum();
    clamp_fidelity(amp * amp)
}

/// Non-Hermitian evolution `dψ/dt = −½ Σ γ_i C_i†C_i ψ` and its fidelity
/// `|⟨ψ(0)|ψ(t)⟩|²`. Exact on [`NH_SAMPLES`] evenly spaced times when every
/// `C†C` is diagonal; otherwise integrated with the same Runge–Kutta scheme.
pub fn evolve_nh(model: &NoiseModel, psi0: &StateVector, t_end: f64, config: &IntegratorConfig) -> Result<FidelityTrace> {
    check_t_end(t_end)?;
    let generator = prepare(model, psi0, config)?;
    if generator.decay_diagonal().is_some() {
        let grid: Vec<f64> = (0..NH_SAMPLES)
            .map(|k| t_end * k as f64 / (NH_SAMPLES - 1) as f64)
            .collect();
        return evolve_nh_on_grid(model, psi0, &grid, config);
    }
    let flow = NhFlow {
        generator: &generator,
        target: psi0.amplitudes(),
    };
    let h0 = initial_step(config, &generator, t_end);
    let mut driver = Driver::new(&flow, psi0.amplitudes().to_vec(), config, h0, "nh-dopri5");
    while driver.t < t_end {
        driver.step(t_end)?;
        driver.record();
    }
    driver.sync_stats();
    Ok(driver.trace)
}

pub fn evolve_nh_on_grid(
    model: &NoiseModel,
    psi0: &StateVector,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<FidelityTrace> {
    check_grid(times)?;
    let generator = prepare(model, psi0, config)?;
    if let Some(decay) = generator.decay_diagonal() {
        let mut trace = FidelityTrace::new("nh-analytic", config);
        if times[0] > 0.0 {
            trace.samples.push(TraceSample { t: 0.0, fidelity: 1.0 });
        }
        trace.samples.extend(times.iter().map(|&t| TraceSample {
            t,
            fidelity: nh_diagonal_fidelity(psi0, &decay, t),
        }));
        return Ok(trace);
    }
    let flow = NhFlow {
        generator: &generator,
        target: psi0.amplitudes(),
    };
    let h0 = initial_step(config, &generator, *times.last().unwrap());
    let mut driver = Driver::new(&flow, psi0.amplitudes().to_vec(), config, h0, "nh-dopri5");
    if times[0] == 0.0 {
        driver.trace.samples.clear();
    }
    for &t in times {
        while driver.t < t {
            driver.step(t)?;
        }
        driver.record();
    }
    driver.sync_stats();
    Ok(driver.trace)
}
