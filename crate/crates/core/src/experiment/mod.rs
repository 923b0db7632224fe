//! Runs configured experiments and writes their artifacts.

mod config;
mod output;
mod presets;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{
    load_config, manufactured_control, parse_config, parse_override, resolve_spec, to_config_text, ExperimentSpec,
};
pub use output::{read_field_csv, read_signal_csv, FieldCsv, Metadata, RunArtifacts};
pub use presets::{preset, PRESETS};
/// Parsed config keys, before resolution against a preset.
pub use toml::Table as ConfigTable;

use crate::adam::{optimize_with, OptimizationOutcome, TraceRecord};
use crate::adjoint::{solve_backward, AdjointTrajectory};
use crate::cost::{
    assemble_gradient, evaluate_cost, gradient_max_norm, gradient_norm, perturbation_scan, tracking_misfit,
    ControlGradient,
};
use crate::discretization::SpaceTimeField;
use crate::error::{Error, Result};
use crate::problem::{ControlPair, ProblemSetup};
use crate::state::{solve_forward, StateTrajectory};

/// In-memory result of one experiment.
#[derive(Debug, Clone)]
pub struct RunData {
    pub spec: ExperimentSpec,
    pub setup: ProblemSetup,
    /// Absent when the spec disables optimization.
    pub outcome: Option<OptimizationOutcome>,
    /// Reported controls (lowest cost seen) and the fields they produce.
    pub controls: ControlPair,
    pub states: StateTrajectory,
    pub adjoints: AdjointTrajectory,
    pub cost: f64,
    pub gradient: ControlGradient,
    pub scan: Vec<(f64, f64)>,
    pub reference: Option<ControlPair>,
    pub wall_ms: f64,
}

impl RunData {
    pub fn last_record(&self) -> Option<&TraceRecord> {
        self.outcome.as_ref().map(|o| o.trace.last())
    }

    /// Cost and gradient norms of the last evaluated iterate.
    pub fn final_values(&self) -> (f64, f64, f64) {
        match self.last_record() {
            Some(r) => (r.cost, r.grad_norm_l2, r.grad_norm_max),
            None => (
                self.cost,
                gradient_norm(&self.gradient, &self.setup),
                gradient_max_norm(&self.gradient),
            ),
        }
    }
}

/// Runs `spec`, calling `observer` after each optimizer iteration.
pub fn run_experiment_with(spec: &ExperimentSpec, observer: impl FnMut(&TraceRecord)) -> Result<RunData> {
    let setup = spec.build_setup()?;
    let cfg = spec.adam_config();
    cfg.check()?;
    let started = Instant::now();
    let outcome = if spec.optimize {
        Some(optimize_with(&setup, &cfg, &ControlPair::zeros(&setup), observer)?)
    } else {
        None
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let controls = outcome
        .as_ref()
        .map_or_else(|| ControlPair::zeros(&setup), |o| o.best.clone());
    let states = solve_forward(&setup, &controls)?;
    let cost = evaluate_cost(&states, &controls, &setup)?;
    let adjoints = solve_backward(&setup, &controls, &states)?;
    let gradient = assemble_gradient(&states, &adjoints, &controls, &setup);
    let scan = perturbation_scan(
        &setup,
        &controls,
        &ControlPair::constant_direction(&setup),
        &spec.scan_amplitudes,
    )?;
    let reference = spec.reference_control(&setup);
    Ok(RunData {
        spec: spec.clone(),
        setup,
        outcome,
        controls,
        states,
        adjoints,
        cost,
        gradient,
        scan,
        reference,
        wall_ms,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunData> {
    run_experiment_with(spec, |_| {})
}

/// Writes every artifact of `data` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, data: &RunData) -> Result<RunArtifacts> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let art = RunArtifacts::in_dir(dir, data.reference.is_some());
    let setup = &data.setup;
    let centers = setup.sg.centers();
    let all_times: Vec<f64> = (0..=setup.steps()).map(|n| setup.tg.time(n)).collect();
    let step_times = &all_times[1..];
    let field = |times: &[f64], f: &SpaceTimeField| output::field_csv(times, centers, f);

    output::write_file(&art.state_u, &field(&all_times, &data.states.u))?;
    output::write_file(&art.state_v, &field(&all_times, &data.states.v))?;
    // the adjoint rows past step N are identically zero and are not written
    output::write_file(&art.adjoint_phi, &field(step_times, &data.adjoints.phi))?;
    output::write_file(&art.adjoint_psi, &field(step_times, &data.adjoints.psi))?;
    output::write_file(&art.control_f, &field(step_times, &data.controls.f))?;
    output::write_file(&art.control_g, &output::signal_csv(step_times, &data.controls.g))?;
    let last = data.outcome.as_ref().map_or(&data.controls, |o| &o.last);
    output::write_file(&art.control_f_last, &field(step_times, &last.f))?;
    output::write_file(&art.control_g_last, &output::signal_csv(step_times, &last.g))?;
    output::write_file(&art.target, &field(step_times, &setup.target))?;
    let records = data.outcome.as_ref().map_or(&[][..], |o| &o.trace.records[..]);
    output::write_file(&art.trace, &output::trace_csv(records))?;
    output::write_file(&art.scan, &output::scan_csv(&data.scan))?;
    if let (Some(path), Some(reference)) = (&art.reference_f, &data.reference) {
        output::write_file(path, &field(step_times, &reference.f))?;
    }
    output::write_file(&art.config, &to_config_text(&data.spec))?;

    let (final_cost, l2, max) = data.final_values();
    let iterations = records.len();
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        preset: data.spec.preset.clone(),
        optimized: data.outcome.is_some(),
        termination: data.outcome.as_ref().map(|o| o.trace.termination.to_string()),
        iterations,
        best_iter: data.outcome.as_ref().map(|o| o.trace.best_iter),
        initial_cost: records.first().map_or(data.cost, |r| r.cost),
        best_cost: data.cost,
        final_cost,
        final_grad_norm_l2: l2,
        final_grad_norm_max: max,
        tracking_misfit: tracking_misfit(&data.states, setup),
        wall_ms_total: data.wall_ms,
        wall_ms_per_iter: if iterations > 0 { data.wall_ms / iterations as f64 } else { 0.0 },
        spec: data.spec.clone(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    output::write_file(&art.metadata, &(json + "\n"))?;
    Ok(art)
}

/// Output directory of a spec: its `out` key, else `runs/<preset>`.
pub fn output_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.out.clone().unwrap_or_else(|| {
        Path::new("runs").join(spec.preset.as_deref().unwrap_or("custom"))
    })
}

pub fn run_preset(name: &str, overrides: toml::Table) -> Result<RunArtifacts> {
    let spec = resolve_spec(Some(name), overrides)?;
    let data = run_experiment(&spec)?;
    write_outputs(&output_dir(&spec), &data)
}

/// Reduced cost along the constant direction around the reported controls
/// of a finished run.
pub fn scan_run(dir: &Path, amplitudes: &[f64]) -> Result<Vec<(f64, f64)>> {
    let spec = load_config(&dir.join("config.toml"))?;
    let setup = spec.build_setup()?;
    let f = read_field_csv(&dir.join("control_f.csv"))?.values;
    let g = read_signal_csv(&dir.join("control_g.csv"))?;
    let controls = ControlPair { f, g };
    controls.check_shape(&setup)?;
    perturbation_scan(&setup, &controls, &ControlPair::constant_direction(&setup), amplitudes)
}

pub fn scan_csv(scan: &[(f64, f64)]) -> String {
    output::scan_csv(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adam::Termination;

    fn small(name: &str, max_iter: usize) -> ExperimentSpec {
        ExperimentSpec {
            cells: 12,
            steps: 6,
            max_iter,
            scan_amplitudes: vec![-0.05, 0.0, 0.05],
            ..preset(name).unwrap()
        }
    }

    #[test]
    fn artifacts_exist_and_trace_counts_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let data = run_experiment(&small("bdc_case4", 7)).unwrap();
        let art = write_outputs(dir.path(), &data).unwrap();
        for f in art.files() {
            assert!(f.exists(), "{}", f.display());
        }
        let trace = fs::read_to_string(&art.trace).unwrap();
        assert_eq!(trace.lines().count(), 1 + 7);
        let back = read_field_csv(&art.state_u).unwrap();
        assert_eq!(back.values, data.states.u);
        assert_eq!(back.times.len(), 7);
    }

    #[test]
    fn uncontrolled_preset_skips_optimizer() {
        let dir = tempfile::tempdir().unwrap();
        let data = run_experiment(&small("bdc_case0", 100)).unwrap();
        assert!(data.outcome.is_none());
        assert_eq!(data.controls, ControlPair::zeros(&data.setup));
        let art = write_outputs(dir.path(), &data).unwrap();
        assert_eq!(fs::read_to_string(&art.trace).unwrap().lines().count(), 1);
    }

    #[test]
    fn scan_of_written_run_matches_in_memory_scan() {
        let dir = tempfile::tempdir().unwrap();
        let data = run_experiment(&small("bbc_half", 5)).unwrap();
        write_outputs(dir.path(), &data).unwrap();
        let scan = scan_run(dir.path(), &data.spec.scan_amplitudes).unwrap();
        assert_eq!(scan, data.scan);
        assert_eq!(scan[1].1, data.cost);
    }

    #[test]
    fn reported_controls_have_lowest_cost() {
        let data = run_experiment(&small("rbc_full", 30)).unwrap();
        let o = data.outcome.as_ref().unwrap();
        assert_eq!(o.trace.termination, Termination::MaxIter);
        assert!(o.trace.records.iter().all(|r| r.cost >= data.cost));
        assert!(data.controls.g.values().iter().all(|g| g[0] >= 0.0 && g[1] >= 0.0));
    }

    #[test]
    fn reruns_write_identical_csvs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let spec = small("manufactured", 10);
        let art_a = write_outputs(a.path(), &run_experiment(&spec).unwrap()).unwrap();
        let art_b = write_outputs(b.path(), &run_experiment(&spec).unwrap()).unwrap();
        for (x, y) in art_a.csv_files().into_iter().zip(art_b.csv_files()) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
    }
}
