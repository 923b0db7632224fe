//! Named experiment presets.

use super::config::ExperimentSpec;
use crate::error::{Error, Result};
use crate::problem::BoundaryControlKind;

pub const PRESETS: [&str; 11] = [
    "manufactured",
    "bdc_case0",
    "bdc_case1",
    "bdc_case2",
    "bdc_case3",
    "bdc_case4",
    "bdc_case5",
    "bbc_full",
    "bbc_half",
    "rbc_full",
    "rbc_half",
];

fn distributed(name: &str, omega_c: [f64; 2], omega_o: [f64; 2]) -> ExperimentSpec {
    ExperimentSpec {
        preset: Some(name.into()),
        omega_c: omega_c.to_vec(),
        omega_o: omega_o.to_vec(),
        ..Default::default()
    }
}

fn boundary(name: &str, kind: BoundaryControlKind, omega_o: [f64; 2]) -> ExperimentSpec {
    ExperimentSpec {
        preset: Some(name.into()),
        omega_c: Vec::new(),
        omega_o: omega_o.to_vec(),
        boundary: kind,
        boundary_left: true,
        boundary_right: true,
        sigma: 1.0,
        u0: "one_minus_cos".into(),
        v0: "one_minus_cos".into(),
        ..Default::default()
    }
}

pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let whole = [-1.0, 1.0];
    let half = [-0.5, 0.5];
    Ok(match name {
        "manufactured" => ExperimentSpec {
            target: "manufactured".into(),
            ..distributed(name, whole, whole)
        },
        "bdc_case0" => ExperimentSpec {
            optimize: false,
            ..distributed(name, whole, whole)
        },
        "bdc_case1" => distributed(name, whole, whole),
        "bdc_case2" => distributed(name, half, whole),
        "bdc_case3" => distributed(name, whole, half),
        "bdc_case4" => distributed(name, [-1.0, 0.2], [-0.2, 1.0]),
        "bdc_case5" => distributed(name, [-1.0, -0.2], [0.2, 1.0]),
        "bbc_full" => boundary(name, BoundaryControlKind::Bilinear, whole),
        "bbc_half" => boundary(name, BoundaryControlKind::Bilinear, half),
        "rbc_full" => boundary(name, BoundaryControlKind::Robin, whole),
        "rbc_half" => boundary(name, BoundaryControlKind::Robin, half),
        _ => return Err(Error::UnknownPreset(name.into())),
    })
}
