use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qmemsim_core::experiments::{
    ghz_pair, run_ftar_sweep, run_ghz_sweep, run_nh_comparison, run_ratio, run_reorder, run_table, write_jsonl,
    write_reports_csv, write_summary_csv, Profile, SweepCase, TableConfig, GHZ_SWEEP_MAX_QUBITS,
};
use qmemsim_core::propagate::{evolve, evolve_nh, evolve_nh_on_grid, evolve_on_grid, time_to_fidelity};
use qmemsim_core::{Error, NoiseModel};
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{Cli, Command, PROFILE_ENV};

/// Resolution order: environment, then flag, then `ci`.
fn resolve_profile(flag: Option<Profile>) -> Result<Profile> {
    match std::env::var(PROFILE_ENV) {
        Ok(v) if !v.is_empty() => Ok(v.parse::<Profile>().with_context(|| format!("{PROFILE_ENV}={v}"))?),
        _ => Ok(flag.unwrap_or(Profile::Ci)),
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    manifest: RunManifest,
}

impl Outputs<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.manifest.outputs.push(PathBuf::from(name));
        Ok(BufWriter::new(file))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let path = self.manifest.write(self.dir)?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

fn evenly_spaced(t_end: f64, samples: usize) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("--samples must be positive".into()).into());
    }
    Ok((1..=samples).map(|k| t_end * k as f64 / samples as f64).collect())
}

/// Dephased register versus single qudit for a state whose dimension is a power of two.
fn register_pair(dim: usize, gamma: f64) -> Result<(NoiseModel, NoiseModel)> {
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::InvalidArgument(format!("sweep states need a power-of-two dimension, got {dim}")).into());
    }
    let n = dim.trailing_zeros();
    Ok((
        NoiseModel::qubit_register(n, gamma, true),
        NoiseModel::single_qudit(dim, gamma),
    ))
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.integrator();
    config.validate()?;
    let subcommand = serde_json::to_value(&cli.command)?;
    let name = subcommand
        .as_object()
        .and_then(|o| o.keys().next().cloned())
        .unwrap_or_else(|| subcommand.as_str().unwrap_or_default().to_string());
    let parameters = json!({
        "command": subcommand,
        "gamma": cli.gamma,
        "seed": cli.seed,
        "jobs": cli.jobs,
        "integrator": config,
    });
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let mut out = Outputs {
        dir: &cli.out,
        manifest: RunManifest::new(&name, parameters, config.digest()),
    };

    match &cli.command {
        Command::Simulate {
            state,
            model,
            t_end,
            target,
            samples,
            nh,
        } => {
            let psi = state.build(cli.seed)?;
            out.manifest.seeds.extend(state.seed(cli.seed));
            let model = model.build(cli.gamma)?;
            let crossing = target.map(|ft| time_to_fidelity(&model, &psi, ft, &config)).transpose()?;
            let t_end = t_end.or(crossing.as_ref().map(|c| c.t_cross)).expect("clap requires a stop time");
            let trace = match (samples, nh) {
                (Some(k), false) => evolve_on_grid(&model, &psi, &evenly_spaced(t_end, *k)?, &config)?,
                (Some(k), true) => evolve_nh_on_grid(&model, &psi, &evenly_spaced(t_end, *k)?, &config)?,
                (None, false) => evolve(&model, &psi, t_end, &config)?,
                (None, true) => evolve_nh(&model, &psi, t_end, &config)?,
            };
            let mut w = out.create("trace.csv")?;
            trace.write_csv(&mut w)?;
            w.flush()?;
            out.json("trace_meta.json", &trace.metadata())?;
            if let Some(c) = &crossing {
                out.json("crossing.json", c)?;
                println!("t* = {:e} (F = {})", c.t_cross, c.fidelity_at_cross);
            }
            if let Some(last) = trace.last() {
                println!("F({:e}) = {} after {} steps", last.t, last.fidelity, trace.steps_accepted);
            }
        }
        Command::Ratio { state, a, b, ftarget } => {
            let psi = state.build(cli.seed)?;
            let seed = state.seed(cli.seed);
            out.manifest.seeds.extend(seed);
            let mut report = run_ratio(&psi, &a.build(cli.gamma)?, &b.build(cli.gamma)?, *ftarget, &config)?;
            if let Some(s) = seed {
                report = report.with_seed(s);
            }
            out.json("ratio.json", &report)?;
            println!(
                "{}: simulated {:.4}, predicted {:.4}{}",
                report.state,
                report.simulated_ratio,
                report.predicted.first_order,
                report
                    .predicted
                    .second_order
                    .map(|s| format!(" (second order {s:.4})"))
                    .unwrap_or_default()
            );
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Table {
            profile,
            states_dir,
            ensemble,
            ftarget,
        } => {
            let profile = resolve_profile(*profile)?;
            let table = TableConfig {
                ensemble_size: *ensemble,
                base_seed: cli.seed,
                states_dir: states_dir.clone(),
                target_fidelity: *ftarget,
                integrator: config.clone(),
                ..TableConfig::for_profile(profile)
            };
            let result = run_table(&table, cli.jobs)?;
            out.manifest.seeds.extend(result.reports.iter().filter_map(|r| r.seed));
            out.manifest.parameters["table"] = serde_json::to_value(&table)?;
            out.manifest.parameters["skipped"] = serde_json::to_value(&result.skipped)?;

            let mut w = out.create("table.csv")?;
            write_summary_csv(&result.rows, &mut w)?;
            w.flush()?;
            let mut w = out.create("reports.csv")?;
            write_reports_csv(&result.reports, &mut w)?;
            w.flush()?;
            let mut w = out.create("reports.jsonl")?;
            write_jsonl(&result.reports, &mut w)?;
            w.flush()?;

            write_summary_csv(&result.rows, std::io::stdout().lock())?;
            for s in &result.skipped {
                eprintln!("skipped: {s}");
            }
        }
        Command::Reorder { state, model, ftarget } => {
            let psi = state.build(cli.seed)?;
            out.manifest.seeds.extend(state.seed(cli.seed));
            let report = run_reorder(&psi, &model.build(cli.gamma)?, *ftarget, &config)?;
            out.json("reorder.json", &report)?;
            match (report.gain, &report.sentinel) {
                (Some(g), _) => println!("{}: t_sorted/t_unsorted = {g:.4}", report.state),
                (None, Some(s)) => println!("{}: sorted state {s}", report.state),
                (None, None) => unreachable!("reorder report has a gain or a sentinel"),
            }
        }
        Command::CompareNh {
            state,
            model,
            t_end,
            samples,
        } => {
            let psi = state.build(cli.seed)?;
            out.manifest.seeds.extend(state.seed(cli.seed));
            let cmp = run_nh_comparison(&psi, &model.build(cli.gamma)?, *t_end, *samples, &config)?;
            let mut w = out.create("nh_comparison.csv")?;
            cmp.write_csv(&mut w)?;
            w.flush()?;
            println!("max |F_lindblad − F_nh| = {:e}", cmp.max_gap());
        }
        Command::Sweep {
            ftargets,
            state,
            qubits,
            profile,
        } => {
            let cases: Vec<SweepCase> = if state.is_empty() {
                let ns = match qubits {
                    Some(ns) => ns.0.clone(),
                    None => (2..=resolve_profile(*profile)?.n_qubits()).collect(),
                };
                ns.iter()
                    .map(|&n| {
                        let (psi, _, _) = ghz_pair(n)?;
                        let (model_a, model_b) = register_pair(psi.dim(), cli.gamma)?;
                        Ok(SweepCase { state: psi, model_a, model_b })
                    })
                    .collect::<Result<_>>()?
            } else {
                if qubits.is_some() {
                    bail!(Error::InvalidArgument("give either --state or --qubits, not both".into()));
                }
                state
                    .iter()
                    .map(|s| {
                        let psi = s.build(cli.seed)?;
                        out.manifest.seeds.extend(s.seed(cli.seed));
                        let (model_a, model_b) = register_pair(psi.dim(), cli.gamma)?;
                        Ok(SweepCase { state: psi, model_a, model_b })
                    })
                    .collect::<Result<_>>()?
            };
            let groups = run_ftar_sweep(&cases, &ftargets.0, &config, cli.jobs)?;
            let mut w = out.create("sweep.jsonl")?;
            write_jsonl(&groups, &mut w)?;
            w.flush()?;
            let flat: Vec<_> = groups.iter().flat_map(|g| g.reports.iter().cloned()).collect();
            let mut w = out.create("sweep.csv")?;
            write_reports_csv(&flat, &mut w)?;
            w.flush()?;
            for g in &groups {
                let ratios: Vec<String> = g.reports.iter().map(|r| format!("{:.4}", r.simulated_ratio)).collect();
                println!("F_t = {}: {}", g.target_fidelity, ratios.join(" "));
            }
        }
        Command::GhzSweep {
            qubits,
            ftarget,
            profile,
        } => {
            let ns = match qubits {
                Some(ns) => ns.0.clone(),
                None => (1..=resolve_profile(*profile)?.n_qubits().min(GHZ_SWEEP_MAX_QUBITS)).collect(),
            };
            let reports = run_ghz_sweep(&ns, *ftarget, &config, cli.jobs)?;
            let mut w = out.create("ghz_sweep.csv")?;
            write_reports_csv(&reports, &mut w)?;
            w.flush()?;
            let mut w = out.create("ghz_sweep.jsonl")?;
            write_jsonl(&reports, &mut w)?;
            w.flush()?;
            for (n, r) in ns.iter().zip(&reports) {
                println!(
                    "n = {n:>2}: simulated {:.4}, predicted {:.4}",
                    r.simulated_ratio, r.predicted.first_order
                );
            }
        }
    }
    out.finish()
}
