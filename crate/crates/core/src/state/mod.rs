//! Forward scheme: semi-implicit in time, upwind finite volumes in space.
//!
//! Each step first solves the chemical `v` from
//!
//! ```text
//! dx (vⱼ − vⱼⁿ⁻¹)/dt + Dv ∑ₖ (vⱼ − vₖ)/dx + dx λ vⱼ − dx μ uⱼⁿ⁻¹
//!     = dx [(fⱼⁿ)₊ vⱼⁿ⁻¹ + (fⱼⁿ)₋ vⱼ] 1_Ωc + Pⱼ
//! ```
//!
//! and then the cell density `u` from
//!
//! ```text
//! dx (uⱼ − uⱼⁿ⁻¹)/dt + ∑ₖ { Du (uⱼ − uₖ)/dx + χ [(sⱼₖ)₊ uⱼ + (sⱼₖ)₋ uₖ] } = 0,
//! sⱼₖ = (vₖⁿ − vⱼⁿ)/dx,
//! ```
//!
//! where `k` runs over the adjacent cells of `j` and the boundary flux `P`
//! only enters the first and last cells on controlled endpoints. Both
//! matrices are M-matrices, so each step is a positivity-preserving
//! tridiagonal solve, and the `u` fluxes cancel pairwise (mass conservation).

mod tridiagonal;

pub use tridiagonal::{solve_tridiagonal, TridiagonalMatrix, TridiagonalSystem};

use crate::discretization::{CellField, SpaceTimeField};
use crate::error::{Error, Result};
use crate::problem::{BoundaryControlKind, ControlPair, ProblemSetup};

pub(crate) fn pos(x: f64) -> f64 {
    x.max(0.0)
}

pub(crate) fn neg(x: f64) -> f64 {
    x.min(0.0)
}

/// Heaviside function with H(0) = 1/2.
pub(crate) fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Cell index of the boundary endpoint `k` (0 = left, 1 = right).
pub(crate) fn endpoint_cell(k: usize, cells: usize) -> usize {
    if k == 0 {
        0
    } else {
        cells - 1
    }
}

/// Derivative of `f₊ vⁿ⁻¹ + f₋ vⁿ` with respect to `f` (H(0) = 1/2).
pub(crate) fn bilinear_coupling(control: f64, v_prev: f64, v_new: f64) -> f64 {
    heaviside(control) * v_prev + heaviside(-control) * v_new
}

/// Derivative `P_g` of the boundary flux of endpoint `k` with respect to `g_k`.
pub(crate) fn boundary_control_coupling(
    k: usize,
    g: f64,
    v_prev: &[f64],
    v_new: &[f64],
    setup: &ProblemSetup,
) -> f64 {
    let b = endpoint_cell(k, setup.cells());
    match setup.bkind {
        BoundaryControlKind::Robin => setup.phys.sigma,
        BoundaryControlKind::Bilinear => bilinear_coupling(g, v_prev[b], v_new[b]),
        BoundaryControlKind::None => 0.0,
    }
}

/// Edge weights `wⱼ = uⱼ H(vⱼ₊₁ − vⱼ) + uⱼ₊₁ H(vⱼ − vⱼ₊₁)` of the linearized
/// chemotaxis flux between cells `j` and `j + 1`.
pub(crate) fn chemotaxis_edge_weights(u: &[f64], v: &[f64]) -> Vec<f64> {
    (0..u.len().saturating_sub(1))
        .map(|j| {
            let s = v[j + 1] - v[j];
            u[j] * heaviside(s) + u[j + 1] * heaviside(-s)
        })
        .collect()
}

/// `(C x)ⱼ = χ/dx ∑ₖ wⱼₖ (xₖ − xⱼ)`: derivative of the chemotaxis flux with
/// respect to the chemical, applied to `x`. The operator is symmetric.
pub(crate) fn apply_chemotaxis_derivative(weights: &[f64], x: &[f64], chi_over_dx: f64) -> Vec<f64> {
    let cells = x.len();
    let mut out = vec![0.0; cells];
    for j in 0..cells.saturating_sub(1) {
        let flux = chi_over_dx * weights[j] * (x[j + 1] - x[j]);
        out[j] += flux;
        out[j + 1] -= flux;
    }
    out
}

/// States on the time levels `n = 0..=N` (row `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
}

impl StateTrajectory {
    pub fn steps(&self) -> usize {
        self.u.rows() - 1
    }

    /// `∑ⱼ dx uⱼⁿ`.
    pub fn mass(&self, n: usize, dx: f64) -> f64 {
        dx * self.u.row(n).iter().sum::<f64>()
    }
}

/// Matrix of the chemical equation at one step, for controls `f_n`, `g_n`.
pub(crate) fn chemical_matrix(f_n: &[f64], g_n: [f64; 2], setup: &ProblemSetup) -> TridiagonalMatrix {
    let cells = setup.cells();
    let dx = setup.sg.dx();
    let dt = setup.tg.dt();
    let p = &setup.phys;
    let couple = p.dv / dx;
    let mut m = TridiagonalMatrix::zeros(cells);
    for j in 0..cells {
        let mut d = dx / dt + dx * p.lambda - dx * neg(f_n[j]) * setup.omega_c.indicator(j);
        if j > 0 {
            m.lower[j] = -couple;
            d += couple;
        }
        if j + 1 < cells {
            m.upper[j] = -couple;
            d += couple;
        }
        m.diag[j] = d;
    }
    let active = setup.active_endpoints();
    for k in 0..2 {
        if !active[k] {
            continue;
        }
        let b = endpoint_cell(k, cells);
        match setup.bkind {
            BoundaryControlKind::Robin => m.diag[b] += p.sigma,
            BoundaryControlKind::Bilinear => m.diag[b] -= neg(g_n[k]),
            BoundaryControlKind::None => {}
        }
    }
    m
}

/// Diagonal of the explicit part of the chemical equation: the coefficient
/// of `vⱼⁿ⁻¹` on the right-hand side.
pub(crate) fn chemical_explicit_diag(f_n: &[f64], g_n: [f64; 2], setup: &ProblemSetup) -> Vec<f64> {
    let cells = setup.cells();
    let dx = setup.sg.dx();
    let dt = setup.tg.dt();
    let mut d: Vec<f64> = (0..cells)
        .map(|j| dx / dt + dx * pos(f_n[j]) * setup.omega_c.indicator(j))
        .collect();
    if setup.bkind == BoundaryControlKind::Bilinear {
        let active = setup.active_endpoints();
        for k in 0..2 {
            if active[k] {
                d[endpoint_cell(k, cells)] += pos(g_n[k]);
            }
        }
    }
    d
}

/// Matrix of the cell-density equation for the chemical profile `v_new`.
pub(crate) fn density_matrix(v_new: &[f64], setup: &ProblemSetup) -> TridiagonalMatrix {
    let cells = setup.cells();
    let dx = setup.sg.dx();
    let dt = setup.tg.dt();
    let p = &setup.phys;
    let diffusion = p.du / dx;
    let mut m = TridiagonalMatrix::zeros(cells);
    for j in 0..cells {
        let mut d = dx / dt;
        if j > 0 {
            let s = (v_new[j - 1] - v_new[j]) / dx;
            d += diffusion + p.chi * pos(s);
            m.lower[j] = -diffusion + p.chi * neg(s);
        }
        if j + 1 < cells {
            let s = (v_new[j + 1] - v_new[j]) / dx;
            d += diffusion + p.chi * pos(s);
            m.upper[j] = -diffusion + p.chi * neg(s);
        }
        m.diag[j] = d;
    }
    m
}

/// Boundary flux `P_k^n` at both endpoints (zero on uncontrolled ones),
/// given the chemical before and after the step.
pub fn boundary_flux(v_prev: &[f64], v_new: &[f64], g_n: [f64; 2], setup: &ProblemSetup) -> [f64; 2] {
    let cells = setup.cells();
    let active = setup.active_endpoints();
    let mut flux = [0.0; 2];
    for k in 0..2 {
        if !active[k] {
            continue;
        }
        let b = endpoint_cell(k, cells);
        flux[k] = match setup.bkind {
            BoundaryControlKind::Robin => setup.phys.sigma * (g_n[k] - v_new[b]),
            BoundaryControlKind::Bilinear => pos(g_n[k]) * v_prev[b] + neg(g_n[k]) * v_new[b],
            BoundaryControlKind::None => 0.0,
        };
    }
    flux
}

/// One chemical step: `vⁿ` from `uⁿ⁻¹`, `vⁿ⁻¹` and the controls of step `n`.
pub fn step_v(
    u_prev: &[f64],
    v_prev: &[f64],
    f_n: &[f64],
    g_n: [f64; 2],
    setup: &ProblemSetup,
) -> Result<CellField> {
    let cells = setup.cells();
    let dx = setup.sg.dx();
    let p = &setup.phys;
    let explicit = chemical_explicit_diag(f_n, g_n, setup);
    let mut rhs: Vec<f64> = (0..cells)
        .map(|j| explicit[j] * v_prev[j] + dx * p.mu * u_prev[j])
        .collect();
    if setup.bkind == BoundaryControlKind::Robin {
        let active = setup.active_endpoints();
        for k in 0..2 {
            if active[k] {
                rhs[endpoint_cell(k, cells)] += p.sigma * g_n[k];
            }
        }
    }
    chemical_matrix(f_n, g_n, setup).solve(&rhs).map(CellField)
}

/// One density step: `uⁿ` from `uⁿ⁻¹` and the new chemical `vⁿ`.
pub fn step_u(u_prev: &[f64], v_new: &[f64], setup: &ProblemSetup) -> Result<CellField> {
    let scale = setup.sg.dx() / setup.tg.dt();
    let rhs: Vec<f64> = u_prev.iter().map(|u| scale * u).collect();
    density_matrix(v_new, setup).solve(&rhs).map(CellField)
}

pub fn solve_forward(setup: &ProblemSetup, controls: &ControlPair) -> Result<StateTrajectory> {
    controls.check_shape(setup)?;
    let steps = setup.steps();
    let cells = setup.cells();
    let mut u = SpaceTimeField::zeros(steps + 1, cells);
    let mut v = SpaceTimeField::zeros(steps + 1, cells);
    u.row_mut(0).copy_from_slice(&setup.u0);
    v.row_mut(0).copy_from_slice(&setup.v0);
    for n in 1..=steps {
        let f_n = controls.f.row(n - 1);
        let g_n = controls.g.at(n - 1);
        let v_new = step_v(u.row(n - 1), v.row(n - 1), f_n, g_n, setup)
            .map_err(|e| Error::at_step(n, e))?;
        let u_new = step_u(u.row(n - 1), &v_new, setup).map_err(|e| Error::at_step(n, e))?;
        v.row_mut(n).copy_from_slice(&v_new);
        u.row_mut(n).copy_from_slice(&u_new);
    }
    Ok(StateTrajectory { u, v })
}
