//! Tangent (sensitivity) solver: derivative of the discrete states along a
//! control direction `(δf, δg)`.
//!
//! The linearized steps reuse the forward matrices. The chemical step gets
//! the forcing `dx [H(f)vⁿ⁻¹ + H(−f)vⁿ] δf 1_Ωc` plus `P_g δg` on controlled
//! endpoints; the density step gets the linearized chemotaxis flux applied
//! to `Vⁿ`. One solve per direction covers what would otherwise be one solve
//! per unit control entry.

use crate::discretization::SpaceTimeField;
use crate::error::{Error, Result};
use crate::problem::{BoundaryControlKind, ControlPair, ProblemSetup};
use crate::state::{
    apply_chemotaxis_derivative, bilinear_coupling, boundary_control_coupling, chemical_explicit_diag,
    chemical_matrix, chemotaxis_edge_weights, density_matrix, endpoint_cell, StateTrajectory,
};

/// Derivatives `(U, V)` on the time levels `n = 0..=N`; row 0 is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTrajectory {
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
}

pub fn solve_sensitivity(
    setup: &ProblemSetup,
    controls: &ControlPair,
    states: &StateTrajectory,
    direction: &ControlPair,
) -> Result<SensitivityTrajectory> {
    controls.check_shape(setup)?;
    direction.check_shape(setup)?;
    let steps = setup.steps();
    let cells = setup.cells();
    let dx = setup.sg.dx();
    let dt = setup.tg.dt();
    let p = &setup.phys;
    let active = setup.active_endpoints();
    let mut du = SpaceTimeField::zeros(steps + 1, cells);
    let mut dv = SpaceTimeField::zeros(steps + 1, cells);

    for n in 1..=steps {
        let f_n = controls.f.row(n - 1);
        let g_n = controls.g.at(n - 1);
        let v_prev = states.v.row(n - 1);
        let v_new = states.v.row(n);
        let explicit = chemical_explicit_diag(f_n, g_n, setup);
        let df = direction.f.row(n - 1);
        let mut rhs: Vec<f64> = (0..cells)
            .map(|j| {
                explicit[j] * dv.get(n - 1, j)
                    + dx * p.mu * du.get(n - 1, j)
                    + dx * setup.omega_c.indicator(j)
                        * bilinear_coupling(f_n[j], v_prev[j], v_new[j])
                        * df[j]
            })
            .collect();
        if setup.bkind != BoundaryControlKind::None {
            let dg = direction.g.at(n - 1);
            for k in 0..2 {
                if active[k] {
                    rhs[endpoint_cell(k, cells)] +=
                        boundary_control_coupling(k, g_n[k], v_prev, v_new, setup) * dg[k];
                }
            }
        }
        let v_sens = chemical_matrix(f_n, g_n, setup)
            .solve(&rhs)
            .map_err(|e| Error::at_step(n, e))?;

        let weights = chemotaxis_edge_weights(states.u.row(n), v_new);
        let cross = apply_chemotaxis_derivative(&weights, &v_sens, p.chi / dx);
        let rhs: Vec<f64> = (0..cells)
            .map(|j| dx / dt * du.get(n - 1, j) - cross[j])
            .collect();
        let u_sens = density_matrix(v_new, setup)
            .solve(&rhs)
            .map_err(|e| Error::at_step(n, e))?;
        dv.row_mut(n).copy_from_slice(&v_sens);
        du.row_mut(n).copy_from_slice(&u_sens);
    }
    Ok(SensitivityTrajectory { u: du, v: dv })
}

/// Derivative of the reduced cost along `direction`, by the chain rule
/// through the sensitivity trajectory.
pub fn directional_derivative_via_sensitivity(
    setup: &ProblemSetup,
    controls: &ControlPair,
    states: &StateTrajectory,
    direction: &ControlPair,
) -> Result<f64> {
    let sens = solve_sensitivity(setup, controls, states, direction)?;
    let dx = setup.sg.dx();
    let dt = setup.tg.dt();
    let horizon = setup.tg.horizon();
    let mut tracking = 0.0;
    let mut distributed = 0.0;
    let mut boundary = 0.0;
    for n in 1..=setup.steps() {
        for j in 0..setup.cells() {
            if setup.omega_o.contains(j) {
                tracking += (states.u.get(n, j) - setup.target.get(n - 1, j)) * sens.u.get(n, j);
            }
            if setup.omega_c.contains(j) {
                distributed += controls.f.get(n - 1, j) * direction.f.get(n - 1, j);
            }
        }
        let active = setup.active_endpoints();
        let (g, dg) = (controls.g.at(n - 1), direction.g.at(n - 1));
        for k in 0..2 {
            if active[k] {
                boundary += g[k] * dg[k];
            }
        }
    }
    let mut total = dt * dx * tracking / (horizon * setup.omega_o.measure());
    if setup.omega_c.measure() > 0.0 {
        total += setup.weights.alpha_f * dt * dx * distributed / (horizon * setup.omega_c.measure());
    }
    total += setup.weights.alpha_g * dt * boundary / horizon;
    Ok(total)
}
