//! Discrete adjoint solver, backward in time.
//!
//! The adjoint system is the exact transpose of the tangent system in
//! [`crate::sensitivity`], so the reduced-cost gradient it produces is exact
//! for the implemented scheme. For `n = N, …, 1`:
//!
//! ```text
//! Aᵤ(vⁿ)ᵀ φⁿ = dx/dt φⁿ⁺¹ + dx μ ψⁿ⁺¹ + dx (uⁿ − u_dⁿ) 1_Ωo / (T |Ωo|)
//! A_v(fⁿ, gⁿ) ψⁿ = Bⁿ⁺¹ ψⁿ⁺¹ − C(uⁿ, vⁿ) φⁿ
//! ```
//!
//! with `Bⁿ⁺¹ = dx/dt + dx (fⁿ⁺¹)₊ 1_Ωc + (gⁿ⁺¹)₊` (the last term on bilinear
//! endpoints only) and `C` the symmetric linearized chemotaxis operator.
//! The coupling `C φ` acts on every cell, not only on the control region.

use crate::discretization::{CellField, SpaceTimeField};
use crate::error::{Error, Result};
use crate::problem::{ControlPair, ProblemSetup};
use crate::state::{
    apply_chemotaxis_derivative, chemical_explicit_diag, chemical_matrix, chemotaxis_edge_weights,
    density_matrix, StateTrajectory,
};

/// Adjoint variables for `n = 1..=N+1`, stored in row `n − 1`; the last
/// row is the zero terminal slice.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub phi: SpaceTimeField,
    pub psi: SpaceTimeField,
}

impl AdjointTrajectory {
    pub fn phi_at(&self, n: usize) -> &[f64] {
        self.phi.row(n - 1)
    }

    pub fn psi_at(&self, n: usize) -> &[f64] {
        self.psi.row(n - 1)
    }
}

/// `dx (uⱼ − u_dⱼ) 1_Ωo / (T |Ωo|)`: the tracking source of the φ equation.
fn tracking_source(u_n: &[f64], target_n: &[f64], setup: &ProblemSetup) -> Vec<f64> {
    let scale = setup.sg.dx() / (setup.tg.horizon() * setup.omega_o.measure());
    (0..setup.cells())
        .map(|j| {
            if setup.omega_o.contains(j) {
                scale * (u_n[j] - target_n[j])
            } else {
                0.0
            }
        })
        .collect()
}

fn phi_solve(
    phi_next: &[f64],
    psi_next: &[f64],
    v_n: &[f64],
    source: &[f64],
    setup: &ProblemSetup,
) -> Result<CellField> {
    let dx = setup.sg.dx();
    let scale = dx / setup.tg.dt();
    let mu = setup.phys.mu;
    let rhs: Vec<f64> = (0..setup.cells())
        .map(|j| scale * phi_next[j] + dx * mu * psi_next[j] + source[j])
        .collect();
    density_matrix(v_n, setup).transpose().solve(&rhs).map(CellField)
}

#[allow(clippy::too_many_arguments)]
fn psi_solve(
    psi_next: &[f64],
    phi_n: &[f64],
    u_n: &[f64],
    v_n: &[f64],
    f_n: &[f64],
    g_n: [f64; 2],
    f_next: &[f64],
    g_next: [f64; 2],
    source: Option<&[f64]>,
    setup: &ProblemSetup,
) -> Result<CellField> {
    let explicit_next = chemical_explicit_diag(f_next, g_next, setup);
    let weights = chemotaxis_edge_weights(u_n, v_n);
    let coupling = apply_chemotaxis_derivative(&weights, phi_n, setup.phys.chi / setup.sg.dx());
    let rhs: Vec<f64> = (0..setup.cells())
        .map(|j| {
            explicit_next[j] * psi_next[j] - coupling[j] + source.map_or(0.0, |s| s[j])
        })
        .collect();
    // the chemical matrix is symmetric
    chemical_matrix(f_n, g_n, setup).solve(&rhs).map(CellField)
}

/// φⁿ from the step-(n+1) adjoints and the states of level `n`.
pub fn step_phi(
    phi_next: &[f64],
    psi_next: &[f64],
    u_n: &[f64],
    v_n: &[f64],
    target_n: &[f64],
    setup: &ProblemSetup,
) -> Result<CellField> {
    let source = tracking_source(u_n, target_n, setup);
    phi_solve(phi_next, psi_next, v_n, &source, setup)
}

/// ψⁿ given φⁿ. `f_next`/`g_next` are the controls of step `n + 1` (zero
/// at the final step).
#[allow(clippy::too_many_arguments)]
pub fn step_psi(
    psi_next: &[f64],
    phi_n: &[f64],
    u_n: &[f64],
    v_n: &[f64],
    f_n: &[f64],
    g_n: [f64; 2],
    f_next: &[f64],
    g_next: [f64; 2],
    setup: &ProblemSetup,
) -> Result<CellField> {
    psi_solve(psi_next, phi_n, u_n, v_n, f_n, g_n, f_next, g_next, None, setup)
}

/// Backward sweep with arbitrary sources: `u_source` row `n − 1` feeds the
/// φⁿ equation, `v_source` (if any) the ψⁿ equation. The tracking adjoint
/// is the special case `u_source = dx (u − u_d) 1_Ωo / (T|Ωo|)`.
pub(crate) fn solve_backward_with_sources(
    setup: &ProblemSetup,
    controls: &ControlPair,
    states: &StateTrajectory,
    u_source: &SpaceTimeField,
    v_source: Option<&SpaceTimeField>,
) -> Result<AdjointTrajectory> {
    controls.check_shape(setup)?;
    let steps = setup.steps();
    let cells = setup.cells();
    let mut phi = SpaceTimeField::zeros(steps + 1, cells);
    let mut psi = SpaceTimeField::zeros(steps + 1, cells);
    let zero_f = vec![0.0; cells];
    for n in (1..=steps).rev() {
        let (f_next, g_next) = if n < steps {
            (controls.f.row(n), controls.g.at(n))
        } else {
            (zero_f.as_slice(), [0.0; 2])
        };
        let phi_n = phi_solve(
            phi.row(n),
            psi.row(n),
            states.v.row(n),
            u_source.row(n - 1),
            setup,
        )
        .map_err(|e| Error::at_step(n, e))?;
        let psi_n = psi_solve(
            psi.row(n),
            &phi_n,
            states.u.row(n),
            states.v.row(n),
            controls.f.row(n - 1),
            controls.g.at(n - 1),
            f_next,
            g_next,
            v_source.map(|s| s.row(n - 1)),
            setup,
        )
        .map_err(|e| Error::at_step(n, e))?;
        phi.row_mut(n - 1).copy_from_slice(&phi_n);
        psi.row_mut(n - 1).copy_from_slice(&psi_n);
    }
    Ok(AdjointTrajectory { phi, psi })
}

pub fn solve_backward(
    setup: &ProblemSetup,
    controls: &ControlPair,
    states: &StateTrajectory,
) -> Result<AdjointTrajectory> {
    let steps = setup.steps();
    let mut source = SpaceTimeField::zeros(steps, setup.cells());
    for n in 1..=steps {
        let row = tracking_source(states.u.row(n), setup.target.row(n - 1), setup);
        source.row_mut(n - 1).copy_from_slice(&row);
    }
    solve_backward_with_sources(setup, controls, states, &source, None)
}
