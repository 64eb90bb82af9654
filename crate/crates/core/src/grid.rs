//! Uniform cell-centred grids on `[-L, L]^n`, grid functions and node sets.
//!
//! Nodes sit at cell centres `x_k = -L + (k + 1/2) h`, so the origin is never a
//! node when `N` is even. Everything outside the box is treated as zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on the box `[-half_width, half_width]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points_per_axis} must be a power of two >= 8"
            )));
        }
        Ok(Self { dim, half_width, points_per_axis })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Volume of one cell, `h^n`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of nodes, `N^n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Coordinate of node `k` along any axis.
    #[inline]
    pub fn axis_coord(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 0.5) * self.spacing()
    }

    /// Row-major multi-index of a linear node index (last axis fastest).
    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        match self.dim {
            1 => [idx, 0, 0],
            2 => [idx / n, idx % n, 0],
            _ => [idx / (n * n), (idx / n) % n, idx % n],
        }
    }

    #[inline]
    pub fn linear_index(&self, mi: [usize; 3]) -> usize {
        let n = self.points_per_axis;
        match self.dim {
            1 => mi[0],
            2 => mi[0] * n + mi[1],
            _ => (mi[0] * n + mi[1]) * n + mi[2],
        }
    }

    /// Coordinates of a node; unused trailing components are zero.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.axis_coord(mi[a]);
        }
        p
    }

    /// Node whose cell contains `x` (clamped into the box).
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let n = self.points_per_axis;
        let mut mi = [0usize; 3];
        for a in 0..self.dim {
            let k = ((x[a] + self.half_width) / h).floor();
            mi[a] = (k.max(0.0) as usize).min(n - 1);
        }
        self.linear_index(mi)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().take(self.dim).all(|c| c.abs() <= self.half_width)
    }

    /// Same box refined by a factor of two per axis.
    pub fn refined(&self) -> Self {
        Self { points_per_axis: self.points_per_axis * 2, ..*self }
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::IncompatibleGrids(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Euclidean distance between two points in the grid dimension.
#[inline]
pub fn distance(dim: usize, a: &[f64], b: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for i in 0..dim {
        let d = a[i] - b[i];
        d2 += d * d;
    }
    d2.sqrt()
}

/// Pairwise summation with a fixed block size; the reduction order depends
/// only on the slice length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Real-valued grid function. Values outside the box are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    nonneg: bool,
}

impl Field {
    /// Builds a field, rejecting non-finite values and length mismatches.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some((idx, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { idx, value });
        }
        let nonneg = values.iter().all(|&v| v >= 0.0);
        Ok(Self { grid, values, nonneg })
    }

    /// Like [`Field::new`] but additionally requires every value to be `>= 0`.
    pub fn nonnegative(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if let Some((idx, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::Negative { idx, value });
        }
        Self::new(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], nonneg: true }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()], nonneg: c >= 0.0 }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..grid.dim()])).collect();
        Self::new(grid, values)
    }

    pub fn indicator(mask: &Mask) -> Self {
        let values = mask.members().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        Self { grid: *mask.grid(), values, nonneg: true }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn abs(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.abs()).collect(), nonneg: true }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
            nonneg: self.nonneg && c >= 0.0,
        }
    }

    /// `|f|^t`, with `0^t = 0` for `t > 0`.
    pub fn abs_pow(&self, t: f64) -> Result<Self> {
        self.map(|v| if v == 0.0 { 0.0 } else { v.abs().powf(t) })
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Self::new(self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Smallest strictly positive value, if any.
    pub fn min_positive(&self) -> Option<f64> {
        self.values.iter().copied().filter(|&v| v > 0.0).reduce(f64::min)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `{x : f(x) > t}`.
    pub fn superlevel(&self, t: f64) -> Mask {
        Mask { grid: self.grid, members: self.values.iter().map(|&v| v > t).collect() }
    }

    /// `{x : f(x) != 0}`.
    pub fn support(&self) -> Mask {
        Mask { grid: self.grid, members: self.values.iter().map(|&v| v != 0.0).collect() }
    }

    /// Midpoint rule `h^n * sum(values)`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * pairwise_sum(&self.values)
    }

    /// `(integral |f|^t)^(1/t)` for finite `t >= 1`.
    pub fn lp_norm(&self, t: f64) -> f64 {
        let powered: Vec<f64> = self.values.iter().map(|v| v.abs().powf(t)).collect();
        (self.grid.cell_volume() * pairwise_sum(&powered)).powf(1.0 / t)
    }
}

/// Set of grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    grid: Grid,
    members: Vec<bool>,
}

impl Mask {
    pub fn new(grid: Grid, members: Vec<bool>) -> Result<Self> {
        if members.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} members, got {}",
                grid.len(),
                members.len()
            )));
        }
        Ok(Self { grid, members })
    }

    pub fn empty(grid: Grid) -> Self {
        Self { grid, members: vec![false; grid.len()] }
    }

    pub fn full(grid: Grid) -> Self {
        Self { grid, members: vec![true; grid.len()] }
    }

    /// Nodes satisfying a predicate on their coordinates.
    pub fn from_predicate(grid: Grid, pred: impl Fn(&[f64]) -> bool) -> Self {
        let members = (0..grid.len()).map(|i| pred(&grid.point(i)[..grid.dim()])).collect();
        Self { grid, members }
    }

    /// Closed ball `|x - center| <= radius`.
    pub fn ball(grid: Grid, center: &[f64], radius: f64) -> Self {
        let d = grid.dim();
        Self::from_predicate(grid, |x| distance(d, x, center) <= radius)
    }

    /// Closed cube `max_i |x_i - center_i| <= half_side`.
    pub fn cube(grid: Grid, center: &[f64], half_side: f64) -> Self {
        let d = grid.dim();
        Self::from_predicate(grid, |x| (0..d).all(|i| (x[i] - center[i]).abs() <= half_side))
    }

    /// Closed annulus `inner <= |x - center| <= outer`.
    pub fn annulus(grid: Grid, center: &[f64], inner: f64, outer: f64) -> Self {
        let d = grid.dim();
        Self::from_predicate(grid, |x| {
            let r = distance(d, x, center);
            r >= inner && r <= outer
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn members(&self) -> &[bool] {
        &self.members
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.members[idx]
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    /// Lebesgue measure of the union of member cells.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn complement(&self) -> Self {
        Self { grid: self.grid, members: self.members.iter().map(|m| !m).collect() }
    }

    pub fn union(&self, other: &Mask) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let members = self.members.iter().zip(&other.members).map(|(a, b)| *a || *b).collect();
        Ok(Self { grid: self.grid, members })
    }

    pub fn intersection(&self, other: &Mask) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let members = self.members.iter().zip(&other.members).map(|(a, b)| *a && *b).collect();
        Ok(Self { grid: self.grid, members })
    }

    pub fn is_subset(&self, other: &Mask) -> bool {
        self.grid == other.grid && self.members.iter().zip(&other.members).all(|(a, b)| !*a || *b)
    }

    /// Whether every member lies in the middle half `[-L/2, L/2]^n` of the box.
    pub fn in_middle_half(&self) -> bool {
        let lim = 0.5 * self.grid.half_width() + 1e-12;
        self.indices()
            .into_iter()
            .all(|i| self.grid.point(i)[..self.grid.dim()].iter().all(|c| c.abs() <= lim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, 1.0, n).unwrap()
    }

    /// Error-free transformation sum in double-double arithmetic.
    fn dd_sum(xs: &[f64]) -> f64 {
        let (mut hi, mut lo) = (0.0f64, 0.0f64);
        for &x in xs {
            let s = hi + x;
            let bp = s - hi;
            let err = (hi - (s - bp)) + (x - bp);
            hi = s;
            lo += err;
        }
        hi + lo
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 1.0, 16).is_err());
        assert!(Grid::new(4, 1.0, 16).is_err());
        assert!(Grid::new(1, -1.0, 16).is_err());
        assert!(Grid::new(1, 1.0, 12).is_err());
        assert!(Grid::new(1, 1.0, 4).is_err());
    }

    #[test]
    fn nodes_are_cell_centres() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.axis_coord(0), -0.875);
        assert_eq!(g.axis_coord(7), 0.875);
        for i in 0..g.len() {
            assert_eq!(g.linear_index(g.multi_index(i)), i);
            assert_eq!(g.cell_of(&g.point(i)), i);
        }
    }

    #[test]
    fn integrate_zero_and_box() {
        let g = grid1(64);
        assert_eq!(Field::zeros(g).integrate(), 0.0);
        let one = Field::indicator(&Mask::full(g));
        assert!((one.integrate() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn integrate_matches_extended_precision() {
        let g = Grid::new(2, 1.5, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..3.0)).collect();
        let f = Field::new(g, vals.clone()).unwrap();
        let oracle = g.cell_volume() * dd_sum(&vals);
        assert!((f.integrate() - oracle).abs() <= 1e-12 * oracle.abs());
    }

    #[test]
    fn lp_norm_cases() {
        let g = grid1(32);
        assert_eq!(Field::zeros(g).lp_norm(3.0), 0.0);
        let c = Field::constant(g, 1.5);
        for t in [1.0, 2.0, 3.5] {
            let expect = 1.5 * 2.0f64.powf(1.0 / t);
            assert!((c.lp_norm(t) - expect).abs() < 1e-12);
        }
        let f = Field::from_fn(g, |x| (3.0 * x[0]).sin()).unwrap();
        let sq = f.map(|v| v * v).unwrap().integrate().sqrt();
        assert!((f.lp_norm(2.0) - sq).abs() <= 1e-14);
    }

    #[test]
    fn field_rejects_non_finite_and_negative() {
        let g = grid1(8);
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(Field::new(g, v), Err(Error::NonFinite { idx: 3, .. })));
        let mut v = vec![0.0; 8];
        v[2] = -1.0;
        assert!(matches!(Field::nonnegative(g, v.clone()), Err(Error::Negative { idx: 2, .. })));
        assert!(!Field::new(g, v).unwrap().is_nonneg());
    }

    #[test]
    fn masks_shapes() {
        let g = Grid::new(1, 1.0, 256).unwrap();
        let b = Mask::ball(g, &[0.0], 0.25);
        assert_eq!(b.count(), 64);
        assert!(b.in_middle_half());
        assert!(!Mask::full(g).in_middle_half());
        let a = Mask::annulus(g, &[0.0], 0.1, 0.25);
        assert!(a.is_subset(&b));
        assert!(Mask::empty(g).is_empty());
    }

    fn arb_mask_pair() -> impl Strategy<Value = (Vec<bool>, Vec<bool>, Vec<bool>)> {
        (
            proptest::collection::vec(any::<bool>(), 16),
            proptest::collection::vec(any::<bool>(), 16),
            proptest::collection::vec(any::<bool>(), 16),
        )
    }

    proptest! {
        #[test]
        fn mask_boolean_algebra((a, b, c) in arb_mask_pair()) {
            let g = Grid::new(1, 1.0, 16).unwrap();
            let a = Mask::new(g, a).unwrap();
            let b = Mask::new(g, b).unwrap();
            let c = Mask::new(g, c).unwrap();
            // De Morgan
            prop_assert_eq!(a.union(&b).unwrap().complement(),
                a.complement().intersection(&b.complement()).unwrap());
            // distributivity
            prop_assert_eq!(a.intersection(&b.union(&c).unwrap()).unwrap(),
                a.intersection(&b).unwrap().union(&a.intersection(&c).unwrap()).unwrap());
            prop_assert_eq!(a.complement().complement(), a.clone());
            prop_assert!(a.union(&a.complement()).unwrap() == Mask::full(g));
            prop_assert!(a.intersection(&a.complement()).unwrap().is_empty());
        }

        #[test]
        fn integrate_linear_and_monotone(
            xs in proptest::collection::vec(0.0f64..5.0, 16),
            ys in proptest::collection::vec(0.0f64..5.0, 16),
            lam in -3.0f64..3.0,
        ) {
            let g = Grid::new(1, 2.0, 16).unwrap();
            let f = Field::new(g, xs.clone()).unwrap();
            let d = Field::new(g, ys.clone()).unwrap();
            let lin = f.scale(lam).add(&d).unwrap().integrate();
            let expect = lam * f.integrate() + d.integrate();
            prop_assert!((lin - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            let upper = f.add(&d).unwrap();
            prop_assert!(f.integrate() <= upper.integrate() + 1e-12);
        }

        #[test]
        fn lp_triangle(
            xs in proptest::collection::vec(-5.0f64..5.0, 32),
            ys in proptest::collection::vec(-5.0f64..5.0, 32),
            t in 1.0f64..6.0,
        ) {
            let g = Grid::new(1, 1.0, 32).unwrap();
            let f = Field::new(g, xs).unwrap();
            let d = Field::new(g, ys).unwrap();
            let lhs = f.add(&d).unwrap().lp_norm(t);
            prop_assert!(lhs <= f.lp_norm(t) + d.lp_norm(t) + 1e-10);
        }
    }
}
