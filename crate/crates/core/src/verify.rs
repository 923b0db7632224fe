//! Quick self-check of the discrete invariants and of the gradient on small
//! random instances. Backs the `verify` command of the CLI.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{cost_and_gradient, fd_directional_derivative};
use crate::discretization::{build_grids, interval_to_mask, BoundaryMask, BoundarySignal, CellField, SpaceTimeField};
use crate::error::Result;
use crate::problem::{validate, BoundaryControlKind, ControlPair, CostWeights, PhysicalParams, ProblemSetup};
use crate::sensitivity::directional_derivative_via_sensitivity;
use crate::state::{boundary_flux, solve_forward};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<24} worst {:.3e} (tolerance {:.0e})", self.name, self.worst, self.tolerance)
    }
}

/// Random instance with sign-changing controls. Robin boundary data stays
/// non-negative, which positivity requires.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    cells: usize,
    steps: usize,
    bkind: BoundaryControlKind,
) -> Result<(ProblemSetup, ControlPair)> {
    let (sg, tg) = build_grids(1.0, cells, rng.gen_range(0.01..0.1), steps)?;
    let a = rng.gen_range(-1.0..-0.2);
    let b = rng.gen_range(0.2..1.0);
    let setup = validate(ProblemSetup {
        u0: CellField((0..cells).map(|_| rng.gen_range(0.0..3.0)).collect()),
        v0: CellField((0..cells).map(|_| rng.gen_range(0.0..3.0)).collect()),
        omega_c: interval_to_mask(a, b, &sg)?,
        omega_o: interval_to_mask(-b, -a, &sg)?,
        target: SpaceTimeField::from_fn(steps, cells, |_, _| rng.gen_range(0.5..1.5)),
        sg,
        tg,
        phys: PhysicalParams {
            du: rng.gen_range(0.05..1.0),
            chi: rng.gen_range(0.0..5.0),
            dv: rng.gen_range(0.05..1.0),
            lambda: rng.gen_range(0.0..1.0),
            mu: rng.gen_range(0.0..2.0),
            sigma: rng.gen_range(0.1..2.0),
        },
        weights: CostWeights {
            alpha_f: rng.gen_range(0.0..1.0),
            alpha_g: rng.gen_range(0.0..1.0),
        },
        bmask: BoundaryMask::BOTH,
        bkind,
    })?;
    let f = SpaceTimeField::from_fn(steps, cells, |_, _| rng.gen_range(-5.0..5.0));
    let g = BoundarySignal::from_values(
        (0..steps)
            .map(|_| {
                let mut pair = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                if bkind == BoundaryControlKind::Robin {
                    pair = pair.map(f64::abs);
                }
                pair
            })
            .collect(),
    );
    let controls = ControlPair::masked(f, g, &setup);
    Ok((setup, controls))
}

fn check(name: &'static str, worst: f64, tolerance: f64, passed: bool) -> Check {
    Check {
        name,
        worst,
        tolerance,
        passed,
    }
}

pub fn run_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mass, mut lowest, mut balance) = (0.0f64, f64::INFINITY, 0.0f64);
    let (mut grad_err, mut dual_err) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let bkind = [BoundaryControlKind::Robin, BoundaryControlKind::Bilinear][i % 2];
        let cells = rng.gen_range(10..40);
        let steps = rng.gen_range(5..30);
        let (setup, controls) = random_instance(&mut rng, cells, steps, bkind)?;
        let states = solve_forward(&setup, &controls)?;
        let dx = setup.sg.dx();
        let dt = setup.tg.dt();
        let m0 = states.mass(0, dx);
        for n in 0..=steps {
            mass = mass.max((states.mass(n, dx) - m0).abs() / m0);
            lowest = lowest.min(states.u.row(n).iter().chain(states.v.row(n)).fold(f64::INFINITY, |a, &b| a.min(b)));
        }
        for n in 1..=steps {
            let (u_prev, v_prev, v_new) = (states.u.row(n - 1), states.v.row(n - 1), states.v.row(n));
            let f = controls.f.row(n - 1);
            let p = &setup.phys;
            let mut residual = 0.0;
            let mut scale = 0.0f64;
            for j in 0..cells {
                let c = setup.omega_c.indicator(j);
                let terms = [
                    (v_new[j] - v_prev[j]) / dt,
                    p.lambda * v_new[j],
                    -p.mu * u_prev[j],
                    -c * (f[j].max(0.0) * v_prev[j] + f[j].min(0.0) * v_new[j]),
                ];
                residual += dx * terms.iter().sum::<f64>();
                scale += dx * terms.iter().map(|t| t.abs()).sum::<f64>();
            }
            let flux = boundary_flux(v_prev, v_new, controls.g.at(n - 1), &setup);
            residual -= flux[0] + flux[1];
            scale += flux[0].abs() + flux[1].abs();
            balance = balance.max(residual.abs() / scale.max(1.0));
        }

        let (_, grad) = cost_and_gradient(&setup, &controls)?;
        let direction = ControlPair::masked(
            SpaceTimeField::from_fn(steps, cells, |_, _| rng.gen_range(-1.0..1.0)),
            BoundarySignal::from_values((0..steps).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()),
            &setup,
        );
        let exact = grad.pairing(&direction, &setup);
        let sens = directional_derivative_via_sensitivity(&setup, &controls, &states, &direction)?;
        dual_err = dual_err.max((sens - exact).abs() / exact.abs().max(1e-300));
        let fd = fd_directional_derivative(&setup, &controls, &direction, 1e-5)?;
        grad_err = grad_err.max((fd - exact).abs() / exact.abs().max(1e-300));
    }
    Ok(vec![
        check("mass conservation", mass, 1e-12, mass <= 1e-12),
        check("positivity", lowest, -1e-13, lowest >= -1e-13),
        check("chemical balance", balance, 1e-10, balance <= 1e-10),
        check("gradient vs differences", grad_err, 1e-5, grad_err <= 1e-5),
        check("sensitivity duality", dual_err, 1e-10, dual_err <= 1e-10),
    ])
}
