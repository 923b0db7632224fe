//! Reduced cost, its adjoint gradient, norms and finite-difference oracles.
//!
//! ```text
//! J(u, f, g) = 1/(2T|Ωo|) ∑ dt dx (u − u_d)² 1_Ωo
//!            + α_f/(2T|Ωc|) ∑ dt dx f² 1_Ωc
//!            + α_g/(2T) ∑ dt g²            (controlled endpoints)
//! ```
//!
//! Gradients are identified through the discrete L² products
//! `∑ dt dx a b` (distributed part) and `∑ dt a b` (endpoint part).

use crate::adjoint::{solve_backward, AdjointTrajectory};
use crate::discretization::{BoundarySignal, SpaceTimeField};
use crate::error::{Error, Result};
use crate::problem::{ControlPair, ProblemSetup};
use crate::state::{bilinear_coupling, boundary_control_coupling, endpoint_cell, solve_forward, StateTrajectory};

/// Gradient of the reduced cost, same layout as [`ControlPair`].
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGradient {
    pub wrt_f: SpaceTimeField,
    pub wrt_g: BoundarySignal,
}

impl ControlGradient {
    pub fn zeros(setup: &ProblemSetup) -> Self {
        Self {
            wrt_f: SpaceTimeField::zeros(setup.steps(), setup.cells()),
            wrt_g: BoundarySignal::zeros(setup.steps()),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            wrt_f: self.wrt_f.scaled(factor),
            wrt_g: self.wrt_g.scaled(factor),
        }
    }

    /// `⟨grad, direction⟩` in the discrete L² products.
    pub fn pairing(&self, direction: &ControlPair, setup: &ProblemSetup) -> f64 {
        let dx = setup.sg.dx();
        let dt = setup.tg.dt();
        let distributed: f64 = self
            .wrt_f
            .as_slice()
            .iter()
            .zip(direction.f.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let boundary: f64 = self
            .wrt_g
            .values()
            .iter()
            .zip(direction.g.values())
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
            .sum();
        dt * dx * distributed + dt * boundary
    }
}

/// Tracking part of the cost, `1/(2T|Ωo|) ∑ dt dx (u − u_d)² 1_Ωo`.
pub fn tracking_misfit(states: &StateTrajectory, setup: &ProblemSetup) -> f64 {
    let mut sum = 0.0;
    for n in 1..=setup.steps() {
        let (u, target) = (states.u.row(n), setup.target.row(n - 1));
        for j in 0..setup.cells() {
            if setup.omega_o.contains(j) {
                let r = u[j] - target[j];
                sum += r * r;
            }
        }
    }
    setup.tg.dt() * setup.sg.dx() * sum / (2.0 * setup.tg.horizon() * setup.omega_o.measure())
}

pub fn evaluate_cost(states: &StateTrajectory, controls: &ControlPair, setup: &ProblemSetup) -> Result<f64> {
    let dt = setup.tg.dt();
    let dx = setup.sg.dx();
    let horizon = setup.tg.horizon();
    let mut cost = tracking_misfit(states, setup);
    if setup.weights.alpha_f > 0.0 && setup.omega_c.measure() > 0.0 {
        let mut sum = 0.0;
        for n in 0..setup.steps() {
            for (j, f) in controls.f.row(n).iter().enumerate() {
                if setup.omega_c.contains(j) {
                    sum += f * f;
                }
            }
        }
        cost += setup.weights.alpha_f * dt * dx * sum / (2.0 * horizon * setup.omega_c.measure());
    }
    if setup.weights.alpha_g > 0.0 {
        let active = setup.active_endpoints();
        let sum: f64 = controls
            .g
            .values()
            .iter()
            .map(|g| (0..2).filter(|&k| active[k]).map(|k| g[k] * g[k]).sum::<f64>())
            .sum();
        cost += setup.weights.alpha_g * dt * sum / (2.0 * horizon);
    }
    if cost.is_finite() {
        Ok(cost)
    } else {
        Err(Error::NonFinite("cost".into()))
    }
}

pub fn assemble_gradient(
    states: &StateTrajectory,
    adjoints: &AdjointTrajectory,
    controls: &ControlPair,
    setup: &ProblemSetup,
) -> ControlGradient {
    let mut grad = ControlGradient::zeros(setup);
    let horizon = setup.tg.horizon();
    let f_weight = if setup.omega_c.measure() > 0.0 {
        setup.weights.alpha_f / (horizon * setup.omega_c.measure())
    } else {
        0.0
    };
    let g_weight = setup.weights.alpha_g / horizon;
    let active = setup.active_endpoints();
    for n in 1..=setup.steps() {
        let (v_prev, v_new) = (states.v.row(n - 1), states.v.row(n));
        let psi = adjoints.psi_at(n);
        let f_n = controls.f.row(n - 1);
        let out = grad.wrt_f.row_mut(n - 1);
        for j in 0..setup.cells() {
            if setup.omega_c.contains(j) {
                out[j] = psi[j] * bilinear_coupling(f_n[j], v_prev[j], v_new[j]) + f_weight * f_n[j];
            }
        }
        let g_n = controls.g.at(n - 1);
        let out = &mut grad.wrt_g.values_mut()[n - 1];
        for k in 0..2 {
            if active[k] {
                let b = endpoint_cell(k, setup.cells());
                out[k] = psi[b] * boundary_control_coupling(k, g_n[k], v_prev, v_new, setup)
                    + g_weight * g_n[k];
            }
        }
    }
    grad
}

/// `sqrt(∑ dt dx (∂_f J)² + ∑ dt (∂_g J)²)`.
pub fn gradient_norm(grad: &ControlGradient, setup: &ProblemSetup) -> f64 {
    let dt = setup.tg.dt();
    let dx = setup.sg.dx();
    let active = setup.active_endpoints();
    let f_part: f64 = grad.wrt_f.as_slice().iter().map(|x| x * x).sum();
    let g_part: f64 = grad
        .wrt_g
        .values()
        .iter()
        .map(|g| (0..2).filter(|&k| active[k]).map(|k| g[k] * g[k]).sum::<f64>())
        .sum();
    (dt * dx * f_part + dt * g_part).sqrt()
}

/// Largest absolute gradient entry.
pub fn gradient_max_norm(grad: &ControlGradient) -> f64 {
    let g = grad.wrt_g.values().iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    grad.wrt_f.max_abs().max(g)
}

/// `J̃(f, g) = J(u(f, g), f, g)` by a full forward solve.
pub fn reduced_cost(setup: &ProblemSetup, controls: &ControlPair) -> Result<f64> {
    let states = solve_forward(setup, controls)?;
    evaluate_cost(&states, controls, setup)
}

/// Forward solve, cost, backward solve and gradient in one call.
pub fn cost_and_gradient(setup: &ProblemSetup, controls: &ControlPair) -> Result<(f64, ControlGradient)> {
    let states = solve_forward(setup, controls)?;
    let cost = evaluate_cost(&states, controls, setup)?;
    let adjoints = solve_backward(setup, controls, &states)?;
    Ok((cost, assemble_gradient(&states, &adjoints, controls, setup)))
}

/// Central difference `[J̃(c + hδ) − J̃(c − hδ)] / (2h)`.
pub fn fd_directional_derivative(
    setup: &ProblemSetup,
    controls: &ControlPair,
    direction: &ControlPair,
    h: f64,
) -> Result<f64> {
    let plus = reduced_cost(setup, &controls.axpy(h, direction))?;
    let minus = reduced_cost(setup, &controls.axpy(-h, direction))?;
    Ok((plus - minus) / (2.0 * h))
}

/// Reduced cost along `controls + s·direction` for each amplitude `s`.
pub fn perturbation_scan(
    setup: &ProblemSetup,
    controls: &ControlPair,
    direction: &ControlPair,
    amplitudes: &[f64],
) -> Result<Vec<(f64, f64)>> {
    amplitudes
        .iter()
        .map(|&s| {
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("scan amplitude {s}")));
            }
            Ok((s, reduced_cost(setup, &controls.axpy(s, direction))?))
        })
        .collect()
}
