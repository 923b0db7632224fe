//! Experiment specifications and the strict key=value config format.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::presets;
use super::output::read_field_csv;
use crate::adam::{AdamConfig, StopNorm};
use crate::discretization::{
    build_grids, cell_averages, interval_to_mask, BoundaryMask, CellField, RegionMask, SpaceTimeField, SpatialGrid,
};
use crate::error::{Error, Result};
use crate::problem::{validate, BoundaryControlKind, ControlPair, CostWeights, PhysicalParams, ProblemSetup};
use crate::state::solve_forward;

/// Everything needed to reproduce one run. Omitted keys take the values of
/// the selected preset, or the defaults below when no preset is named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(rename = "L")]
    pub half_length: f64,
    #[serde(rename = "J")]
    pub cells: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    #[serde(rename = "Du")]
    pub du: f64,
    pub chi: f64,
    #[serde(rename = "Dv")]
    pub dv: f64,
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
    pub alpha_f: f64,
    pub alpha_g: f64,
    /// `[a, b]`, or `[]` for no distributed control.
    pub omega_c: Vec<f64>,
    pub omega_o: Vec<f64>,
    pub boundary: BoundaryControlKind,
    pub boundary_left: bool,
    pub boundary_right: bool,
    /// Initial profiles: `one_plus_cos`, `three_plus_cos`, `one_minus_cos`,
    /// `const:<c>` or `file:<path>` (one value per line).
    pub u0: String,
    pub v0: String,
    /// `const:<c>`, `manufactured`, or `file:<path>` in the state CSV layout.
    pub target: String,
    /// Skip the optimizer and report the uncontrolled trajectory.
    pub optimize: bool,
    pub adam_alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub stop_norm: StopNorm,
    pub scan_amplitudes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let phys = PhysicalParams::default();
        let adam = AdamConfig::default();
        Self {
            preset: None,
            half_length: 1.0,
            cells: 100,
            horizon: 0.05,
            steps: 100,
            du: phys.du,
            chi: phys.chi,
            dv: phys.dv,
            lambda: phys.lambda,
            mu: phys.mu,
            sigma: phys.sigma,
            alpha_f: 0.0,
            alpha_g: 0.0,
            omega_c: vec![-1.0, 1.0],
            omega_o: vec![-1.0, 1.0],
            boundary: BoundaryControlKind::None,
            boundary_left: false,
            boundary_right: false,
            u0: "one_plus_cos".into(),
            v0: "three_plus_cos".into(),
            target: "const:1".into(),
            optimize: true,
            adam_alpha: adam.alpha,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            tol: adam.tol,
            max_iter: adam.max_iter,
            stop_norm: adam.stop_norm,
            scan_amplitudes: (-10..=10).map(|i| i as f64 / 100.0).collect(),
            out: None,
        }
    }
}

/// The known distributed control behind the `manufactured` target.
pub fn manufactured_control(x: f64, t: f64) -> f64 {
    (3.0 * PI * x).cos() * (20.0 * PI * t).cos()
}

impl ExperimentSpec {
    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            alpha: self.adam_alpha,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            tol: self.tol,
            max_iter: self.max_iter,
            stop_norm: self.stop_norm,
        }
    }

    /// Builds and validates the discrete problem. For the manufactured
    /// target this includes the forward solve that generates it.
    pub fn build_setup(&self) -> Result<ProblemSetup> {
        let (sg, tg) = build_grids(self.half_length, self.cells, self.horizon, self.steps)?;
        let omega_c = match self.omega_c.as_slice() {
            [] => RegionMask::empty(&sg),
            [a, b] => interval_to_mask(*a, *b, &sg)?,
            _ => return Err(Error::Config("omega_c must be [a, b] or []".into())),
        };
        let omega_o = match self.omega_o.as_slice() {
            [a, b] => interval_to_mask(*a, *b, &sg)?,
            _ => return Err(Error::Config("omega_o must be [a, b]".into())),
        };
        let mut setup = ProblemSetup {
            u0: initial_profile(&self.u0, &sg)?,
            v0: initial_profile(&self.v0, &sg)?,
            omega_c,
            omega_o,
            target: SpaceTimeField::zeros(self.steps, self.cells),
            phys: PhysicalParams {
                du: self.du,
                chi: self.chi,
                dv: self.dv,
                lambda: self.lambda,
                mu: self.mu,
                sigma: self.sigma,
            },
            weights: CostWeights {
                alpha_f: self.alpha_f,
                alpha_g: self.alpha_g,
            },
            bmask: BoundaryMask {
                left: self.boundary_left,
                right: self.boundary_right,
            },
            bkind: self.boundary,
            sg,
            tg,
        };
        setup.target = self.target_field(&setup)?;
        validate(setup)
    }

    /// Reference control used to generate the manufactured target, if any.
    pub fn reference_control(&self, setup: &ProblemSetup) -> Option<ControlPair> {
        if self.target != "manufactured" {
            return None;
        }
        let centers = setup.sg.centers();
        let dt = setup.tg.dt();
        let f = SpaceTimeField::from_fn(setup.steps(), setup.cells(), |n, j| {
            manufactured_control(centers[j], (n as f64 + 0.5) * dt)
        });
        Some(ControlPair::masked(f, ControlPair::zeros(setup).g, setup))
    }

    fn target_field(&self, setup: &ProblemSetup) -> Result<SpaceTimeField> {
        let (steps, cells) = (setup.steps(), setup.cells());
        if let Some(reference) = self.reference_control(setup) {
            setup.check()?;
            let states = solve_forward(setup, &reference)?;
            return Ok(states.u.tail_rows(1));
        }
        if let Some(c) = self.target.strip_prefix("const:") {
            return Ok(SpaceTimeField::constant(steps, cells, parse_number(c, "target")?));
        }
        if let Some(path) = self.target.strip_prefix("file:") {
            let field = read_field_csv(Path::new(path))?.values;
            return match field.rows() {
                r if r == steps && field.cols() == cells => Ok(field),
                r if r == steps + 1 && field.cols() == cells => Ok(field.tail_rows(1)),
                _ => Err(Error::Config(format!(
                    "target file {path} is {}x{}, expected {steps}x{cells} or {}x{cells}",
                    field.rows(),
                    field.cols(),
                    steps + 1
                ))),
            };
        }
        Err(Error::Config(format!("unknown target selector '{}'", self.target)))
    }
}

fn parse_number(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: cannot parse '{text}' as a number")))
}

fn initial_profile(selector: &str, sg: &SpatialGrid) -> Result<CellField> {
    let analytic = |g: fn(f64) -> f64| cell_averages(g, sg).map_err(Error::from);
    match selector {
        "one_plus_cos" => analytic(|x| 1.0 + (PI * x).cos()),
        "three_plus_cos" => analytic(|x| 3.0 + (PI * x).cos()),
        "one_minus_cos" => analytic(|x| 1.0 - (PI * x).cos()),
        s => {
            if let Some(c) = s.strip_prefix("const:") {
                return Ok(CellField::constant(sg.cells(), parse_number(c, "initial profile")?));
            }
            if let Some(path) = s.strip_prefix("file:") {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let values = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(|l| parse_number(l, path))
                    .collect::<Result<Vec<_>>>()?;
                if values.len() != sg.cells() {
                    return Err(Error::Config(format!(
                        "{path} has {} values, expected {}",
                        values.len(),
                        sg.cells()
                    )));
                }
                return Ok(CellField(values));
            }
            Err(Error::Config(format!("unknown initial profile '{s}'")))
        }
    }
}

/// Parses config text, rejecting unknown keys and ill-typed values with
/// their location.
pub fn parse_config(text: &str, origin: &Path) -> Result<toml::Table> {
    let parse_err = |e: toml::de::Error| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    };
    toml::from_str::<ExperimentSpec>(text).map_err(parse_err)?;
    toml::from_str(text).map_err(parse_err)
}

/// Parses one `key=value` override. Values that are not valid TOML are
/// taken as strings, so `--set boundary=robin` works unquoted.
pub fn parse_override(assignment: &str) -> Result<(String, toml::Value)> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

/// Layers `overrides` on the named preset (or, failing that, on the preset
/// named inside the overrides, or the defaults).
pub fn resolve_spec(preset: Option<&str>, overrides: toml::Table) -> Result<ExperimentSpec> {
    let named = preset
        .map(str::to_string)
        .or_else(|| overrides.get("preset").and_then(|v| v.as_str()).map(str::to_string));
    let base = match &named {
        Some(name) => presets::preset(name)?,
        None => ExperimentSpec::default(),
    };
    let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
    for (key, value) in overrides {
        merged.insert(key, value);
    }
    if let Some(name) = named {
        merged.insert("preset".into(), toml::Value::String(name));
    }
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

/// Reads a config file and resolves it against its preset and the defaults.
pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    resolve_spec(None, parse_config(&text, path)?)
}

/// Serialized form written next to the run outputs; reloading it with
/// [`load_config`] reproduces the spec.
pub fn to_config_text(spec: &ExperimentSpec) -> String {
    toml::to_string(spec).expect("spec serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_tables() {
        let s = ExperimentSpec::default();
        assert_eq!((s.half_length, s.cells, s.horizon, s.steps), (1.0, 100, 0.05, 100));
        assert_eq!((s.du, s.dv, s.chi, s.lambda, s.mu), (0.1, 0.1, 1.0, 0.1, 1.0));
        assert_eq!((s.alpha_f, s.alpha_g), (0.0, 0.0));
        assert_eq!((s.adam_alpha, s.beta1, s.beta2, s.eps, s.tol), (0.1, 0.9, 0.999, 1e-8, 1e-4));
        assert_eq!(s.max_iter, 100_000);
        let setup = s.build_setup().unwrap();
        assert!((setup.sg.dx() - 0.02).abs() < 1e-15);
        assert!((setup.tg.dt() - 0.0005).abs() < 1e-15);
    }

    #[test]
    fn empty_config_with_preset() {
        let spec = resolve_spec(Some("bdc_case1"), parse_config("", Path::new("x")).unwrap()).unwrap();
        assert_eq!(spec.omega_c, vec![-1.0, 1.0]);
        assert_eq!(spec.omega_o, vec![-1.0, 1.0]);
        assert_eq!(spec.preset.as_deref(), Some("bdc_case1"));
    }

    #[test]
    fn config_overrides_preset() {
        let table = parse_config("preset = \"bdc_case5\"\nmax_iter = 200000\n", Path::new("c")).unwrap();
        let spec = resolve_spec(None, table).unwrap();
        assert_eq!(spec.max_iter, 200_000);
        assert_eq!(spec.omega_c, vec![-1.0, -0.2]);
        assert_eq!(spec.omega_o, vec![0.2, 1.0]);
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let err = parse_config("J = 10\nbogus = 3\n", Path::new("c.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 2"), "{msg}");
        assert!(err.is_input_error());
    }

    #[test]
    fn malformed_file_is_parse_error() {
        let err = parse_config("J = = 3", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn override_values() {
        assert_eq!(parse_override("J=20").unwrap(), ("J".into(), toml::Value::Integer(20)));
        assert_eq!(parse_override("boundary=robin").unwrap().1, toml::Value::String("robin".into()));
        assert_eq!(parse_override("omega_c = [-0.5, 0.5]").unwrap().1.as_array().unwrap().len(), 2);
        assert!(parse_override("nothing").is_err());
    }

    #[test]
    fn config_text_round_trips() {
        for name in presets::PRESETS {
            let spec = presets::preset(name).unwrap();
            let text = to_config_text(&spec);
            let back = resolve_spec(None, parse_config(&text, Path::new("r")).unwrap()).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn manufactured_target_matches_forward_solve() {
        let mut spec = presets::preset("manufactured").unwrap();
        spec.cells = 10;
        spec.steps = 8;
        let setup = spec.build_setup().unwrap();
        let reference = spec.reference_control(&setup).unwrap();
        let states = solve_forward(&setup, &reference).unwrap();
        assert_eq!(setup.target, states.u.tail_rows(1));
        assert!((reference.f.get(0, 0) - manufactured_control(-0.9, 0.05 / 16.0)).abs() < 1e-15);
    }

    #[test]
    fn bad_selectors() {
        let mut spec = ExperimentSpec { cells: 4, steps: 2, ..Default::default() };
        spec.u0 = "sine".into();
        assert!(matches!(spec.build_setup(), Err(Error::Config(_))));
        spec.u0 = "const:-1".into();
        assert!(matches!(spec.build_setup(), Err(Error::Validation(_))));
        spec.u0 = "const:1".into();
        spec.omega_o = vec![0.0];
        assert!(matches!(spec.build_setup(), Err(Error::Config(_))));
    }
}
