//! Uniform grids, piecewise-constant fields and the discrete L² product.
//!
//! The space domain is Ω = (−L, L) cut into `J` cells of width `dx = 2L/J`;
//! the horizon [0, T] is cut into `N` steps of length `dt = T/N`. Every
//! state, adjoint and control variable is constant on each cell (and on each
//! time interval), so fields are plain arrays of cell values.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result, ValidationError};

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    half_length: f64,
    cells: usize,
    dx: f64,
    centers: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(half_length: f64, cells: usize) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(ValidationError::NonPositiveHalfLength(half_length).into());
        }
        if cells < 2 {
            return Err(ValidationError::TooFewCells(cells).into());
        }
        let dx = 2.0 * half_length / cells as f64;
        let centers = (0..cells)
            .map(|j| -half_length + dx * (j as f64 + 0.5))
            .collect();
        Ok(Self {
            half_length,
            cells,
            dx,
            centers,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ValidationError::NonPositiveHorizon(horizon).into());
        }
        if steps < 1 {
            return Err(ValidationError::TooFewSteps(steps).into());
        }
        Ok(Self {
            horizon,
            steps,
            dt: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// End time `t_n = n·dt` of step `n`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

pub fn build_grids(
    half_length: f64,
    cells: usize,
    horizon: f64,
    steps: usize,
) -> Result<(SpatialGrid, TimeGrid)> {
    Ok((
        SpatialGrid::new(half_length, cells)?,
        TimeGrid::new(horizon, steps)?,
    ))
}

/// One value per spatial cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField(pub Vec<f64>);

impl CellField {
    pub fn zeros(cells: usize) -> Self {
        Self(vec![0.0; cells])
    }

    pub fn constant(cells: usize, value: f64) -> Self {
        Self(vec![value; cells])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for CellField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for CellField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for CellField {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Row-major array of time slices, each slice holding one value per cell.
///
/// Controls and targets use one row per step `n = 1..=N` (row `n − 1`);
/// trajectories prepend or append a boundary slice and therefore carry
/// `N + 1` rows. The owner decides which convention applies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Shape(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        let n = rows.len();
        Ok(Self {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Fill entry `(i, j)` with `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// `self + factor·other`, shapes assumed equal.
    pub fn axpy(&self, factor: f64, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + factor * b)
                .collect(),
        }
    }

    /// Rows `from..self.rows()` as a new field.
    pub fn tail_rows(&self, from: usize) -> Self {
        Self {
            rows: self.rows - from,
            cols: self.cols,
            data: self.data[from * self.cols..].to_vec(),
        }
    }
}

/// Endpoint values per time step: column 0 is x = −L (cell 1), column 1 is
/// x = L (cell J).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySignal {
    values: Vec<[f64; 2]>,
}

impl BoundarySignal {
    pub fn zeros(steps: usize) -> Self {
        Self {
            values: vec![[0.0; 2]; steps],
        }
    }

    pub fn from_values(values: Vec<[f64; 2]>) -> Self {
        Self { values }
    }

    pub fn steps(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.values
    }

    pub fn at(&self, i: usize) -> [f64; 2] {
        self.values[i]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|x| x.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|[a, b]| [a * factor, b * factor])
                .collect(),
        }
    }

    pub fn axpy(&self, factor: f64, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| [a[0] + factor * b[0], a[1] + factor * b[1]])
                .collect(),
        }
    }
}

/// Cells belonging to a control or observation region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    member: Vec<bool>,
    measure: f64,
}

impl RegionMask {
    pub fn from_members(member: Vec<bool>, grid: &SpatialGrid) -> Result<Self> {
        if member.len() != grid.cells() {
            return Err(ValidationError::Length {
                what: "region mask",
                got: member.len(),
                expected: grid.cells(),
            }
            .into());
        }
        let count = member.iter().filter(|&&m| m).count();
        Ok(Self {
            member,
            measure: grid.dx() * count as f64,
        })
    }

    pub fn full(grid: &SpatialGrid) -> Self {
        Self {
            member: vec![true; grid.cells()],
            measure: grid.dx() * grid.cells() as f64,
        }
    }

    /// No cell selected (no distributed control).
    pub fn empty(grid: &SpatialGrid) -> Self {
        Self {
            member: vec![false; grid.cells()],
            measure: 0.0,
        }
    }

    pub fn members(&self) -> &[bool] {
        &self.member
    }

    pub fn contains(&self, j: usize) -> bool {
        self.member[j]
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// 1.0 inside the region, 0.0 outside.
    pub fn indicator(&self, j: usize) -> f64 {
        if self.member[j] {
            1.0
        } else {
            0.0
        }
    }
}

/// Controlled endpoints; `count` plays the role of |∂Ω_c|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundaryMask {
    pub left: bool,
    pub right: bool,
}

impl BoundaryMask {
    pub const NONE: Self = Self {
        left: false,
        right: false,
    };
    pub const BOTH: Self = Self {
        left: true,
        right: true,
    };

    pub fn count(&self) -> usize {
        self.left as usize + self.right as usize
    }

    /// Flags indexed like [`BoundarySignal`] columns.
    pub fn flags(&self) -> [bool; 2] {
        [self.left, self.right]
    }
}

/// Midpoint-rule cell averages of `sampler`.
pub fn cell_averages(sampler: impl Fn(f64) -> f64, grid: &SpatialGrid) -> Result<CellField> {
    grid.centers()
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let value = sampler(x);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(ValidationError::NonFiniteSample { cell: j }.into())
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(CellField)
}

/// Cells whose centers lie in the closed interval `[a, b]`.
pub fn interval_to_mask(a: f64, b: f64, grid: &SpatialGrid) -> Result<RegionMask> {
    if !(a < b) {
        return Err(ValidationError::EmptyInterval { a, b }.into());
    }
    let member: Vec<bool> = grid.centers().iter().map(|&x| a <= x && x <= b).collect();
    if !member.iter().any(|&m| m) {
        return Err(ValidationError::IntervalOutsideDomain { a, b }.into());
    }
    RegionMask::from_members(member, grid)
}

/// Discrete L² product ∑ₙ∑ⱼ dt·dx·aⱼⁿ·bⱼⁿ.
pub fn inner_product(
    a: &SpaceTimeField,
    b: &SpaceTimeField,
    tg: &TimeGrid,
    sg: &SpatialGrid,
) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "inner product of {:?} and {:?} fields",
            a.shape(),
            b.shape()
        )));
    }
    let sum: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
    Ok(tg.dt() * sg.dx() * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn table_grid() {
        let (sg, tg) = build_grids(1.0, 100, 0.05, 100).unwrap();
        assert_relative_eq!(sg.dx(), 0.02, max_relative = 1e-15);
        assert_relative_eq!(tg.dt(), 0.0005, max_relative = 1e-15);
        assert_relative_eq!(sg.dx() * 100.0, 2.0, max_relative = f64::EPSILON);
    }

    #[test]
    fn smallest_and_small_grids() {
        let (sg, tg) = build_grids(1.0, 2, 1.0, 1).unwrap();
        assert_eq!((sg.dx(), tg.dt()), (1.0, 1.0));
        let (sg, tg) = build_grids(0.5, 4, 2.0, 8).unwrap();
        assert_eq!((sg.dx(), tg.dt()), (0.25, 0.25));
        assert_eq!(sg.centers(), &[-0.375, -0.125, 0.125, 0.375]);
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(build_grids(0.0, 10, 1.0, 1).is_err());
        assert!(build_grids(1.0, 1, 1.0, 1).is_err());
        assert!(build_grids(1.0, 10, -1.0, 1).is_err());
        assert!(build_grids(1.0, 10, 1.0, 0).is_err());
        assert!(build_grids(f64::NAN, 10, 1.0, 1).is_err());
    }

    #[test]
    fn midpoint_averages() {
        let sg = SpatialGrid::new(1.0, 7).unwrap();
        assert!(cell_averages(|_| 1.0, &sg).unwrap().iter().all(|&v| v == 1.0));

        let sg = SpatialGrid::new(1.0, 2).unwrap();
        let f = cell_averages(|x| 1.0 + (std::f64::consts::PI * x).cos(), &sg).unwrap();
        assert_relative_eq!(f[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(f[1], 1.0, epsilon = 1e-15);

        let sg = SpatialGrid::new(1.0, 4).unwrap();
        assert_eq!(cell_averages(|x| x, &sg).unwrap().0, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn non_finite_sample_names_cell() {
        let sg = SpatialGrid::new(1.0, 4).unwrap();
        let err = cell_averages(|x| if x > 0.5 { f64::NAN } else { 0.0 }, &sg).unwrap_err();
        assert!(matches!(
            err,
            Error::Validation(ValidationError::NonFiniteSample { cell: 3 })
        ));
    }

    #[test]
    fn masks_from_intervals() {
        let sg = SpatialGrid::new(1.0, 100).unwrap();
        let all = interval_to_mask(-1.0, 1.0, &sg).unwrap();
        assert_eq!(all.count(), 100);
        assert_relative_eq!(all.measure(), 2.0, epsilon = 1e-14);

        let mid = interval_to_mask(-0.5, 0.5, &sg).unwrap();
        let idx: Vec<usize> = (0..100).filter(|&j| mid.contains(j)).collect();
        assert_eq!(idx.first(), Some(&25)); // cell 26 in 1-based numbering
        assert_eq!(idx.last(), Some(&74));
        assert_eq!(idx.len(), 50);
        assert_relative_eq!(mid.measure(), 1.0, epsilon = 1e-14);

        let right = interval_to_mask(0.2, 1.0, &sg).unwrap();
        assert_eq!((0..100).find(|&j| right.contains(j)), Some(60));
        assert_eq!(right.count(), 40);
        assert_relative_eq!(right.measure(), 0.8, epsilon = 1e-14);
    }

    #[test]
    fn disjoint_intervals_give_disjoint_masks() {
        let sg = SpatialGrid::new(1.0, 100).unwrap();
        let left = interval_to_mask(-1.0, -0.2, &sg).unwrap();
        let right = interval_to_mask(0.2, 1.0, &sg).unwrap();
        assert!((0..100).all(|j| !(left.contains(j) && right.contains(j))));
    }

    #[test]
    fn bad_intervals_rejected() {
        let sg = SpatialGrid::new(1.0, 10).unwrap();
        assert!(interval_to_mask(0.5, 0.5, &sg).is_err());
        assert!(interval_to_mask(2.0, 3.0, &sg).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let (sg, tg) = build_grids(1.0, 100, 0.05, 100).unwrap();
        let ones = SpaceTimeField::constant(100, 100, 1.0);
        assert_relative_eq!(inner_product(&ones, &ones, &tg, &sg).unwrap(), 0.1, max_relative = 1e-12);
        let zero = SpaceTimeField::zeros(100, 100);
        assert_eq!(inner_product(&ones, &zero, &tg, &sg).unwrap(), 0.0);
        let mut single = SpaceTimeField::zeros(100, 100);
        single.set(3, 7, 2.5);
        assert_relative_eq!(
            inner_product(&single, &single, &tg, &sg).unwrap(),
            tg.dt() * sg.dx() * 6.25,
            max_relative = 1e-15
        );
        assert!(inner_product(&ones, &SpaceTimeField::zeros(99, 100), &tg, &sg).is_err());
    }

    fn field(rows: usize, cols: usize) -> impl Strategy<Value = SpaceTimeField> {
        prop::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |v| SpaceTimeField::from_fn(rows, cols, |i, j| v[i * cols + j]))
    }

    proptest! {
        #[test]
        fn inner_product_is_symmetric_bilinear_positive(
            a in field(4, 6), b in field(4, 6), c in field(4, 6), s in -3.0f64..3.0
        ) {
            let (sg, tg) = build_grids(1.5, 6, 0.3, 4).unwrap();
            let ip = |x: &SpaceTimeField, y: &SpaceTimeField| inner_product(x, y, &tg, &sg).unwrap();
            prop_assert!((ip(&a, &b) - ip(&b, &a)).abs() <= 1e-12 * (1.0 + ip(&a, &b).abs()));
            let lhs = ip(&a.axpy(s, &c), &b);
            let rhs = ip(&a, &b) + s * ip(&c, &b);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            if a.max_abs() > 0.0 {
                prop_assert!(ip(&a, &a) > 0.0);
            }
        }

        #[test]
        fn constant_sampler_is_exact(c in -1e3f64..1e3, cells in 2usize..64) {
            let sg = SpatialGrid::new(1.0, cells).unwrap();
            prop_assert!(cell_averages(|_| c, &sg).unwrap().iter().all(|&v| v == c));
        }
    }
}
