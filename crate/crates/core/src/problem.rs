//! Problem description: physics, cost weights, control placement and data.

use serde::{Deserialize, Serialize};

use crate::discretization::{
    BoundaryMask, BoundarySignal, CellField, RegionMask, SpaceTimeField, SpatialGrid, TimeGrid,
};
use crate::error::{Error, Result, ValidationError};

/// Coefficients of
/// `u_t − (Du u_x − χ u v_x)_x = 0`, `v_t − Dv v_xx + λ v − μ u = f v 1_Ωc`,
/// plus the Robin permeability σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub du: f64,
    pub chi: f64,
    pub dv: f64,
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            du: 0.1,
            chi: 1.0,
            dv: 0.1,
            lambda: 0.1,
            mu: 1.0,
            sigma: 1.0,
        }
    }
}

impl PhysicalParams {
    /// All coefficients equal to one.
    pub fn unit() -> Self {
        Self {
            du: 1.0,
            chi: 1.0,
            dv: 1.0,
            lambda: 1.0,
            mu: 1.0,
            sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostWeights {
    pub alpha_f: f64,
    pub alpha_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryControlKind {
    /// Zero chemical flux at both endpoints.
    #[default]
    None,
    /// Flux σ(g − v), implicit in v.
    Robin,
    /// Flux g·v with g₊ explicit and g₋ implicit in v.
    Bilinear,
}

impl std::str::FromStr for BoundaryControlKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "robin" => Ok(Self::Robin),
            "bilinear" => Ok(Self::Bilinear),
            other => Err(Error::Config(format!(
                "unknown boundary control kind `{other}` (expected none, robin or bilinear)"
            ))),
        }
    }
}

impl std::fmt::Display for BoundaryControlKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Robin => "robin",
            Self::Bilinear => "bilinear",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSetup {
    pub sg: SpatialGrid,
    pub tg: TimeGrid,
    pub phys: PhysicalParams,
    pub weights: CostWeights,
    /// Distributed control region; may be empty for boundary-only problems.
    pub omega_c: RegionMask,
    pub omega_o: RegionMask,
    pub bmask: BoundaryMask,
    pub bkind: BoundaryControlKind,
    pub u0: CellField,
    pub v0: CellField,
    /// Target cell density, one row per step `n = 1..=N`.
    pub target: SpaceTimeField,
}

impl ProblemSetup {
    pub fn cells(&self) -> usize {
        self.sg.cells()
    }

    pub fn steps(&self) -> usize {
        self.tg.steps()
    }

    /// Endpoints where a boundary flux enters the chemical equation.
    pub fn active_endpoints(&self) -> [bool; 2] {
        match self.bkind {
            BoundaryControlKind::None => [false, false],
            _ => self.bmask.flags(),
        }
    }

    /// Number of controlled endpoints, |∂Ω_c|.
    pub fn boundary_count(&self) -> usize {
        self.active_endpoints().iter().filter(|&&a| a).count()
    }

    pub fn check(&self) -> std::result::Result<(), ValidationError> {
        let j = self.cells();
        let n = self.steps();
        let p = &self.phys;
        if !(p.du > 0.0 && p.du.is_finite()) {
            return Err(ValidationError::NonPositiveCellDiffusion(p.du));
        }
        if !(p.dv > 0.0 && p.dv.is_finite()) {
            return Err(ValidationError::NonPositiveChemicalDiffusion(p.dv));
        }
        if !(p.chi >= 0.0 && p.chi.is_finite()) {
            return Err(ValidationError::InvalidChemotaxis(p.chi));
        }
        if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
            return Err(ValidationError::NegativeDegradation(p.lambda));
        }
        if !(p.mu >= 0.0 && p.mu.is_finite()) {
            return Err(ValidationError::NegativeProduction(p.mu));
        }
        if self.bkind == BoundaryControlKind::Robin && !(p.sigma > 0.0 && p.sigma.is_finite()) {
            return Err(ValidationError::NonPositivePermeability(p.sigma));
        }
        for (name, value) in [
            ("alpha_f", self.weights.alpha_f),
            ("alpha_g", self.weights.alpha_g),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ValidationError::NegativeWeight { name, value });
            }
        }
        for (what, len) in [
            ("u0", self.u0.len()),
            ("v0", self.v0.len()),
            ("observation mask", self.omega_o.members().len()),
            ("control mask", self.omega_c.members().len()),
        ] {
            if len != j {
                return Err(ValidationError::Length {
                    what,
                    got: len,
                    expected: j,
                });
            }
        }
        for (cell, (&u, &v)) in self.u0.iter().zip(self.v0.iter()).enumerate() {
            if !u.is_finite() || !v.is_finite() {
                return Err(ValidationError::NonFiniteInitialData { cell });
            }
            if u < 0.0 {
                return Err(ValidationError::NegativeInitialDensity { cell, value: u });
            }
            if v < 0.0 {
                return Err(ValidationError::NegativeInitialChemical { cell, value: v });
            }
        }
        if !(self.omega_o.measure() > 0.0) {
            return Err(ValidationError::EmptyObservation);
        }
        if self.bkind != BoundaryControlKind::None && self.bmask.count() == 0 {
            return Err(ValidationError::NoControlledEndpoint);
        }
        if self.target.shape() != (n, j) {
            return Err(ValidationError::Length {
                what: "target rows x cells",
                got: self.target.rows() * self.target.cols(),
                expected: n * j,
            });
        }
        for step in 0..n {
            for cell in 0..j {
                if self.omega_o.contains(cell) && !self.target.get(step, cell).is_finite() {
                    return Err(ValidationError::NonFiniteTarget {
                        step: step + 1,
                        cell,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Returns the setup unchanged when every invariant holds.
pub fn validate(setup: ProblemSetup) -> Result<ProblemSetup> {
    setup.check()?;
    Ok(setup)
}

/// Distributed control `f` (one row per step) and endpoint control `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair {
    pub f: SpaceTimeField,
    pub g: BoundarySignal,
}

impl ControlPair {
    pub fn zeros(setup: &ProblemSetup) -> Self {
        Self {
            f: SpaceTimeField::zeros(setup.steps(), setup.cells()),
            g: BoundarySignal::zeros(setup.steps()),
        }
    }

    /// Builds a control pair with every entry outside the control masks set
    /// to zero.
    pub fn masked(mut f: SpaceTimeField, mut g: BoundarySignal, setup: &ProblemSetup) -> Self {
        let active = setup.active_endpoints();
        for n in 0..f.rows() {
            for (j, x) in f.row_mut(n).iter_mut().enumerate() {
                if !setup.omega_c.contains(j) {
                    *x = 0.0;
                }
            }
        }
        for pair in g.values_mut() {
            for k in 0..2 {
                if !active[k] {
                    pair[k] = 0.0;
                }
            }
        }
        Self { f, g }
    }

    pub fn check_shape(&self, setup: &ProblemSetup) -> Result<()> {
        if self.f.shape() != (setup.steps(), setup.cells()) || self.g.steps() != setup.steps() {
            return Err(Error::Shape(format!(
                "controls ({:?}, {} boundary steps) do not match grid ({} steps, {} cells)",
                self.f.shape(),
                self.g.steps(),
                setup.steps(),
                setup.cells()
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            f: self.f.scaled(factor),
            g: self.g.scaled(factor),
        }
    }

    /// `self + factor·other`.
    pub fn axpy(&self, factor: f64, other: &Self) -> Self {
        Self {
            f: self.f.axpy(factor, &other.f),
            g: self.g.axpy(factor, &other.g),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.g.is_finite()
    }

    /// The direction equal to one on every controlled cell and endpoint.
    pub fn constant_direction(setup: &ProblemSetup) -> Self {
        Self::masked(
            SpaceTimeField::constant(setup.steps(), setup.cells(), 1.0),
            BoundarySignal::from_values(vec![[1.0; 2]; setup.steps()]),
            setup,
        )
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::discretization::{build_grids, cell_averages, interval_to_mask};
    use std::f64::consts::PI;

    pub(crate) fn table_setup() -> ProblemSetup {
        let (sg, tg) = build_grids(1.0, 100, 0.05, 100).unwrap();
        ProblemSetup {
            u0: cell_averages(|x| 1.0 + (PI * x).cos(), &sg).unwrap(),
            v0: cell_averages(|x| 3.0 + (PI * x).cos(), &sg).unwrap(),
            omega_c: RegionMask::full(&sg),
            omega_o: RegionMask::full(&sg),
            target: SpaceTimeField::constant(100, 100, 1.0),
            sg,
            tg,
            phys: PhysicalParams::default(),
            weights: CostWeights::default(),
            bmask: BoundaryMask::NONE,
            bkind: BoundaryControlKind::None,
        }
    }

    #[test]
    fn table_setup_is_accepted() {
        let s = table_setup();
        assert_eq!(validate(s.clone()).unwrap(), s);
    }

    #[test]
    fn validate_is_idempotent() {
        let once = validate(table_setup()).unwrap();
        let twice = validate(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn negative_initial_density() {
        let mut s = table_setup();
        s.u0[10] = -0.1;
        let err = validate(s).unwrap_err();
        assert!(err.to_string().contains("negative initial cell density"));
    }

    #[test]
    fn robin_needs_positive_permeability() {
        let mut s = table_setup();
        s.bkind = BoundaryControlKind::Robin;
        s.bmask = BoundaryMask::BOTH;
        s.phys.sigma = 0.0;
        let err = validate(s).unwrap_err();
        assert!(err.to_string().contains("permeability must be positive"));
    }

    #[test]
    fn each_invariant_has_its_own_error() {
        let cases: Vec<(Box<dyn Fn(&mut ProblemSetup)>, &str)> = vec![
            (Box::new(|s| s.phys.du = 0.0), "Du"),
            (Box::new(|s| s.phys.dv = -1.0), "Dv"),
            (Box::new(|s| s.phys.lambda = -0.1), "lambda"),
            (Box::new(|s| s.phys.mu = -0.1), "mu"),
            (Box::new(|s| s.weights.alpha_f = -1.0), "alpha_f"),
            (Box::new(|s| s.v0[3] = -1.0), "negative initial chemical"),
            (
                Box::new(|s| s.omega_o = RegionMask::empty(&s.sg)),
                "observation region is empty",
            ),
            (
                Box::new(|s| s.bkind = BoundaryControlKind::Bilinear),
                "no endpoint",
            ),
            (
                Box::new(|s| s.target.set(4, 50, f64::NAN)),
                "target state is not finite",
            ),
        ];
        for (mutate, needle) in cases {
            let mut s = table_setup();
            mutate(&mut s);
            let msg = validate(s).unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg:?} lacks {needle:?}");
        }
    }

    #[test]
    fn target_outside_observation_may_be_anything() {
        let mut s = table_setup();
        s.omega_o = interval_to_mask(-0.5, 0.5, &s.sg).unwrap();
        s.target.set(0, 0, f64::NAN);
        assert!(validate(s).is_ok());
    }

    #[test]
    fn masked_controls_vanish_off_masks() {
        let mut s = table_setup();
        s.omega_c = interval_to_mask(-0.5, 0.5, &s.sg).unwrap();
        s.bkind = BoundaryControlKind::Robin;
        s.bmask = BoundaryMask {
            left: true,
            right: false,
        };
        let c = ControlPair::constant_direction(&s);
        assert_eq!(c.f.get(0, 0), 0.0);
        assert_eq!(c.f.get(0, 50), 1.0);
        assert_eq!(c.g.at(3), [1.0, 0.0]);
    }
}
