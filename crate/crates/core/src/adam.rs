//! Adam descent on the reduced cost.
//!
//! Each iteration runs a forward solve, the adjoint solve and the gradient
//! assembly, checks the stopping rule, and then applies the bias-corrected
//! Adam update elementwise to `(f, g)`. Robin boundary controls are
//! projected onto `g ≥ 0` after every update.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::solve_backward;
use crate::cost::{assemble_gradient, evaluate_cost, gradient_max_norm, gradient_norm, ControlGradient};
use crate::error::{Error, Result, ValidationError};
use crate::problem::{BoundaryControlKind, ControlPair, ProblemSetup};
use crate::state::{solve_forward, StateTrajectory};

/// Norm compared against `tol` by the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopNorm {
    /// Discrete L²(t,x) ⊕ L²(t) norm.
    #[default]
    L2,
    /// Largest absolute gradient entry.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub stop_norm: StopNorm,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            tol: 1e-4,
            max_iter: 100_000,
            stop_norm: StopNorm::L2,
        }
    }
}

impl AdamConfig {
    pub fn check(&self) -> std::result::Result<(), ValidationError> {
        let bad = |name, value| Err(ValidationError::AdamParameter { name, value });
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", self.alpha);
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", self.beta1);
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", self.beta2);
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", self.eps);
        }
        if !(self.tol > 0.0) {
            return bad("tol", self.tol);
        }
        if self.max_iter < 1 {
            return bad("max_iter", self.max_iter as f64);
        }
        Ok(())
    }
}

/// Moment estimates; `k` counts completed updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ControlGradient,
    pub z: ControlGradient,
    pub k: u32,
}

impl AdamState {
    pub fn new(setup: &ProblemSetup) -> Self {
        Self {
            m: ControlGradient::zeros(setup),
            z: ControlGradient::zeros(setup),
            k: 0,
        }
    }
}

/// Update one block of parameters in place.
fn update_block(
    params: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    z: &mut [f64],
    cfg: &AdamConfig,
    bias1: f64,
    bias2: f64,
) {
    for (((x, &g), m), z) in params.iter_mut().zip(grad).zip(m.iter_mut()).zip(z.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *z = cfg.beta2 * *z + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let z_hat = *z / bias2;
        *x -= cfg.alpha * m_hat / (z_hat + cfg.eps).sqrt();
    }
}

/// In-place Adam update of `controls`.
pub fn adam_update(
    state: &mut AdamState,
    grad: &ControlGradient,
    controls: &mut ControlPair,
    cfg: &AdamConfig,
    bkind: BoundaryControlKind,
) {
    let k = state.k + 1;
    let bias1 = 1.0 - cfg.beta1.powi(k as i32);
    let bias2 = 1.0 - cfg.beta2.powi(k as i32);
    update_block(
        controls.f.as_mut_slice(),
        grad.wrt_f.as_slice(),
        state.m.wrt_f.as_mut_slice(),
        state.z.wrt_f.as_mut_slice(),
        cfg,
        bias1,
        bias2,
    );
    let mut g: Vec<f64> = controls.g.values().iter().flatten().copied().collect();
    let gg: Vec<f64> = grad.wrt_g.values().iter().flatten().copied().collect();
    let mut mg: Vec<f64> = state.m.wrt_g.values().iter().flatten().copied().collect();
    let mut zg: Vec<f64> = state.z.wrt_g.values().iter().flatten().copied().collect();
    update_block(&mut g, &gg, &mut mg, &mut zg, cfg, bias1, bias2);
    if bkind == BoundaryControlKind::Robin {
        for x in &mut g {
            *x = x.max(0.0);
        }
    }
    let unflatten = |flat: &[f64], target: &mut [[f64; 2]]| {
        for (pair, chunk) in target.iter_mut().zip(flat.chunks_exact(2)) {
            *pair = [chunk[0], chunk[1]];
        }
    };
    unflatten(&g, controls.g.values_mut());
    unflatten(&mg, state.m.wrt_g.values_mut());
    unflatten(&zg, state.z.wrt_g.values_mut());
    state.k = k;
}

/// One Adam step returning the new moments and controls.
pub fn adam_step(
    state: &AdamState,
    grad: &ControlGradient,
    controls: &ControlPair,
    cfg: &AdamConfig,
    bkind: BoundaryControlKind,
) -> (AdamState, ControlPair) {
    let mut state = state.clone();
    let mut controls = controls.clone();
    adam_update(&mut state, grad, &mut controls, cfg, bkind);
    (state, controls)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIter,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIter => "max_iter",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm_l2: f64,
    pub grad_norm_max: f64,
    pub wall_ms: f64,
    /// Evaluations at a non-differentiable point: zero control entries in
    /// the active regions plus equal chemical values in neighboring cells.
    pub kink_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    /// Iteration (1-based) of the lowest recorded cost.
    pub best_iter: usize,
}

impl OptimizationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn initial_cost(&self) -> f64 {
        self.records[0].cost
    }

    pub fn best_cost(&self) -> f64 {
        self.records[self.best_iter - 1].cost
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("at least one iteration")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationOutcome {
    /// Controls of the lowest recorded cost.
    pub best: ControlPair,
    /// Last evaluated iterate.
    pub last: ControlPair,
    pub trace: OptimizationTrace,
}

pub(crate) fn count_kinks(controls: &ControlPair, states: &StateTrajectory, setup: &ProblemSetup) -> usize {
    let mut hits = 0;
    for n in 0..setup.steps() {
        let row = controls.f.row(n);
        hits += (0..setup.cells())
            .filter(|&j| setup.omega_c.contains(j) && row[j] == 0.0)
            .count();
        let g = controls.g.at(n);
        let active = setup.active_endpoints();
        if setup.bkind == BoundaryControlKind::Bilinear {
            hits += (0..2).filter(|&k| active[k] && g[k] == 0.0).count();
        }
        let v = states.v.row(n + 1);
        hits += v.windows(2).filter(|w| w[0] == w[1]).count();
    }
    hits
}

pub fn optimize(setup: &ProblemSetup, cfg: &AdamConfig, initial: &ControlPair) -> Result<OptimizationOutcome> {
    optimize_with(setup, cfg, initial, |_| {})
}

/// [`optimize`] with a callback invoked after every recorded iteration.
pub fn optimize_with(
    setup: &ProblemSetup,
    cfg: &AdamConfig,
    initial: &ControlPair,
    mut observer: impl FnMut(&TraceRecord),
) -> Result<OptimizationOutcome> {
    cfg.check()?;
    setup.check()?;
    initial.check_shape(setup)?;
    let mut controls = initial.clone();
    let mut state = AdamState::new(setup);
    let mut records = Vec::new();
    let mut best = controls.clone();
    let mut best_iter = 1;
    let mut best_cost = f64::INFINITY;
    let started = Instant::now();
    let mut termination = Termination::MaxIter;

    for iter in 1..=cfg.max_iter {
        let wrap = |e| Error::Iteration {
            iter,
            source: Box::new(e),
        };
        let states = solve_forward(setup, &controls).map_err(wrap)?;
        let cost = evaluate_cost(&states, &controls, setup).map_err(wrap)?;
        let adjoints = solve_backward(setup, &controls, &states).map_err(wrap)?;
        let grad = assemble_gradient(&states, &adjoints, &controls, setup);
        let l2 = gradient_norm(&grad, setup);
        let max = gradient_max_norm(&grad);
        if !(l2.is_finite() && max.is_finite()) {
            return Err(wrap(Error::NonFinite("gradient".into())));
        }
        let record = TraceRecord {
            iter,
            cost,
            grad_norm_l2: l2,
            grad_norm_max: max,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            kink_hits: count_kinks(&controls, &states, setup),
        };
        observer(&record);
        records.push(record);
        if cost < best_cost {
            best_cost = cost;
            best_iter = iter;
            best.clone_from(&controls);
        }
        let stop_value = match cfg.stop_norm {
            StopNorm::L2 => l2,
            StopNorm::Max => max,
        };
        if stop_value <= cfg.tol {
            termination = Termination::Tolerance;
            break;
        }
        if iter == cfg.max_iter {
            break;
        }
        adam_update(&mut state, &grad, &mut controls, cfg, setup.bkind);
    }

    Ok(OptimizationOutcome {
        best,
        last: controls,
        trace: OptimizationTrace {
            records,
            termination,
            best_iter,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_grids, BoundaryMask, BoundarySignal, CellField, RegionMask, SpaceTimeField};
    use crate::problem::{CostWeights, PhysicalParams};
    use approx::assert_relative_eq;

    fn small_setup(bkind: BoundaryControlKind) -> ProblemSetup {
        let (sg, tg) = build_grids(1.0, 10, 0.05, 5).unwrap();
        ProblemSetup {
            u0: crate::discretization::cell_averages(|x| 1.0 - (std::f64::consts::PI * x).cos(), &sg).unwrap(),
            v0: crate::discretization::cell_averages(|x| 1.0 - (std::f64::consts::PI * x).cos(), &sg).unwrap(),
            omega_c: RegionMask::empty(&sg),
            omega_o: RegionMask::full(&sg),
            target: SpaceTimeField::constant(5, 10, 1.0),
            sg,
            tg,
            phys: PhysicalParams::default(),
            weights: CostWeights::default(),
            bmask: BoundaryMask::BOTH,
            bkind,
        }
    }

    fn constant_gradient(setup: &ProblemSetup, value: f64) -> ControlGradient {
        ControlGradient {
            wrt_f: SpaceTimeField::constant(setup.steps(), setup.cells(), value),
            wrt_g: BoundarySignal::from_values(vec![[value; 2]; setup.steps()]),
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let s = small_setup(BoundaryControlKind::Bilinear);
        let c = ControlPair::constant_direction(&s).scaled(0.4);
        let (state, next) = adam_step(&AdamState::new(&s), &ControlGradient::zeros(&s), &c, &AdamConfig::default(), s.bkind);
        assert_eq!(next, c);
        assert_eq!(state.m, ControlGradient::zeros(&s));
        assert_eq!(state.z, ControlGradient::zeros(&s));
        assert_eq!(state.k, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let s = small_setup(BoundaryControlKind::Bilinear);
        let c = ControlPair::zeros(&s);
        let cfg = AdamConfig::default();
        let (_, next) = adam_step(&AdamState::new(&s), &constant_gradient(&s, 2.0), &c, &cfg, s.bkind);
        let expected = -0.1 * 2.0 / (4.0f64 + 1e-8).sqrt();
        for &x in next.f.as_slice() {
            assert_relative_eq!(x, expected, max_relative = 1e-12);
            assert_relative_eq!(x, -0.1, max_relative = 1e-8);
        }
        for pair in next.g.values() {
            assert_relative_eq!(pair[0], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_betas_give_normalized_descent() {
        let s = small_setup(BoundaryControlKind::Bilinear);
        let cfg = AdamConfig {
            beta1: 0.0,
            beta2: 0.0,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(&s);
        let mut c = ControlPair::zeros(&s);
        for (i, g) in [0.3, -5.0, 1e-3].into_iter().enumerate() {
            let before = c.f.get(0, 0);
            adam_update(&mut state, &constant_gradient(&s, g), &mut c, &cfg, s.bkind);
            let step = c.f.get(0, 0) - before;
            assert_relative_eq!(step, -cfg.alpha * g / (g * g + cfg.eps).sqrt(), max_relative = 1e-12);
            assert_eq!(state.k as usize, i + 1);
        }
    }

    #[test]
    fn robin_projection() {
        let s = small_setup(BoundaryControlKind::Robin);
        let mut c = ControlPair::zeros(&s);
        c.g.values_mut()[0] = [-0.2, 0.5];
        // a positive gradient moves g down by ≈ α = 0.1, proposing −0.3
        let (_, next) = adam_step(&AdamState::new(&s), &constant_gradient(&s, 1.0), &c, &AdamConfig::default(), s.bkind);
        assert_eq!(next.g.at(0)[0], 0.0);
        assert_relative_eq!(next.g.at(0)[1], 0.4, max_relative = 1e-7);
    }

    #[test]
    fn already_optimal_stops_immediately() {
        let (sg, tg) = build_grids(1.0, 10, 0.05, 5).unwrap();
        let s = ProblemSetup {
            u0: CellField::constant(10, 1.0),
            v0: CellField::constant(10, 10.0),
            omega_c: RegionMask::full(&sg),
            omega_o: RegionMask::full(&sg),
            target: SpaceTimeField::constant(5, 10, 1.0),
            sg,
            tg,
            phys: PhysicalParams::default(),
            weights: CostWeights::default(),
            bmask: BoundaryMask::NONE,
            bkind: BoundaryControlKind::None,
        };
        let out = optimize(&s, &AdamConfig::default(), &ControlPair::zeros(&s)).unwrap();
        assert_eq!(out.trace.iterations(), 1);
        assert_eq!(out.trace.termination, Termination::Tolerance);
        assert!(out.trace.records[0].grad_norm_l2 < 1e-12);
    }

    #[test]
    fn robin_run_keeps_g_nonnegative_and_is_deterministic() {
        let s = small_setup(BoundaryControlKind::Robin);
        let cfg = AdamConfig {
            max_iter: 60,
            ..AdamConfig::default()
        };
        let mut seen = Vec::new();
        let out = optimize_with(&s, &cfg, &ControlPair::zeros(&s), |r| seen.push(r.cost)).unwrap();
        assert!(out.best.g.values().iter().flatten().all(|&g| g >= 0.0));
        assert!(out.last.g.values().iter().flatten().all(|&g| g >= 0.0));
        assert_eq!(seen.len(), out.trace.iterations());
        let again = optimize(&s, &cfg, &ControlPair::zeros(&s)).unwrap();
        let strip = |t: &OptimizationTrace| t.records.iter().map(|r| (r.cost, r.grad_norm_l2)).collect::<Vec<_>>();
        assert_eq!(strip(&out.trace), strip(&again.trace));
        assert_eq!(out.best, again.best);
        assert!(out.trace.best_cost() <= out.trace.initial_cost());
    }

    #[test]
    fn bad_config_rejected() {
        let s = small_setup(BoundaryControlKind::Robin);
        for cfg in [
            AdamConfig { alpha: 0.0, ..AdamConfig::default() },
            AdamConfig { beta1: 1.0, ..AdamConfig::default() },
            AdamConfig { max_iter: 0, ..AdamConfig::default() },
        ] {
            assert!(optimize(&s, &cfg, &ControlPair::zeros(&s)).is_err());
        }
    }
}
