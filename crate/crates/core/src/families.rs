//! Seeded test families of functions and measures.
//!
//! Samples are described in coordinates relative to the box half-width `L`
//! and rendered on demand, so one family can be evaluated on a sequence of
//! refined grids. Every support lies inside the middle half of the box.
//! Sample `i` of a family depends only on `(seed, i)`, never on `count`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::potential::{Atom, Measure};

/// Seed used by the verification suite unless overridden.
pub const DEFAULT_SEED: u64 = 20_240_917;
/// Default number of samples per family.
pub const DEFAULT_COUNT: usize = 32;

const GAUSS_SCALES: [f64; 3] = [0.05, 0.08, 0.12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    /// Balls, Gaussians, two-bump sums and anisotropic bumps in rotation.
    Mixed,
    Balls,
    Gaussians,
    TwoBump,
    Anisotropic,
    /// Clouds of 1 to 10 point masses.
    Atoms,
    /// Absolutely continuous measures with densities from `Mixed`.
    Densities,
}

impl FamilyName {
    pub const ALL: [FamilyName; 7] = [
        FamilyName::Mixed,
        FamilyName::Balls,
        FamilyName::Gaussians,
        FamilyName::TwoBump,
        FamilyName::Anisotropic,
        FamilyName::Atoms,
        FamilyName::Densities,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyName::Mixed => "mixed",
            FamilyName::Balls => "balls",
            FamilyName::Gaussians => "gaussians",
            FamilyName::TwoBump => "two-bump",
            FamilyName::Anisotropic => "anisotropic",
            FamilyName::Atoms => "atoms",
            FamilyName::Densities => "densities",
        }
    }

    pub fn is_measure(&self) -> bool {
        matches!(self, FamilyName::Atoms | FamilyName::Densities)
    }
}

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyName::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Grid-independent description of a nonnegative function. Lengths are in
/// units of the half-width `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Shape {
    Ball { center: [f64; 3], radius: f64, amplitude: f64 },
    /// Gaussian cut off at three standard deviations.
    Gaussian { center: [f64; 3], sigma: f64, amplitude: f64 },
    /// `(1 - rho^2)^2` bump with per-axis radii. In one dimension the two
    /// radii are used left and right of the center.
    Anisotropic { center: [f64; 3], radii: [f64; 3], amplitude: f64 },
    Sum { parts: Vec<Shape> },
}

impl Shape {
    /// Value at a point given in units of `L`.
    pub fn eval(&self, dim: usize, x: &[f64]) -> f64 {
        let dist2 = |c: &[f64; 3]| (0..dim).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>();
        match self {
            Shape::Ball { center, radius, amplitude } => {
                if dist2(center) <= radius * radius {
                    *amplitude
                } else {
                    0.0
                }
            }
            Shape::Gaussian { center, sigma, amplitude } => {
                let d2 = dist2(center);
                if d2 <= 9.0 * sigma * sigma {
                    amplitude * (-0.5 * d2 / (sigma * sigma)).exp()
                } else {
                    0.0
                }
            }
            Shape::Anisotropic { center, radii, amplitude } => {
                let rho2 = if dim == 1 {
                    let d = x[0] - center[0];
                    let w = if d < 0.0 { radii[0] } else { radii[1] };
                    (d / w).powi(2)
                } else {
                    (0..dim).map(|a| ((x[a] - center[a]) / radii[a]).powi(2)).sum()
                };
                if rho2 < 1.0 {
                    amplitude * (1.0 - rho2).powi(2)
                } else {
                    0.0
                }
            }
            Shape::Sum { parts } => parts.iter().map(|p| p.eval(dim, x)).sum(),
        }
    }

    fn anchor(&self) -> [f64; 3] {
        match self {
            Shape::Ball { center, .. } | Shape::Gaussian { center, .. } | Shape::Anisotropic { center, .. } => *center,
            Shape::Sum { parts } => parts[0].anchor(),
        }
    }

    fn peak(&self) -> f64 {
        match self {
            Shape::Ball { amplitude, .. } | Shape::Gaussian { amplitude, .. } | Shape::Anisotropic { amplitude, .. } => {
                *amplitude
            }
            Shape::Sum { parts } => parts[0].peak(),
        }
    }

    /// Samples the shape at the grid nodes. A shape narrower than the grid
    /// spacing is represented by its peak at the nearest node.
    pub fn render(&self, grid: &Grid) -> Field {
        let dim = grid.dim();
        let l = grid.half_width();
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                let rel = [p[0] / l, p[1] / l, p[2] / l];
                self.eval(dim, &rel)
            })
            .collect();
        let mut field = Field::nonnegative(*grid, values).expect("shapes are finite and nonnegative");
        if field.is_zero() {
            let c = self.anchor();
            let at = grid.cell_of(&[c[0] * l, c[1] * l, c[2] * l]);
            let mut v = vec![0.0; grid.len()];
            v[at] = self.peak();
            field = Field::nonnegative(*grid, v).expect("finite");
        }
        field
    }
}

/// Grid-independent description of one family member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Descriptor {
    Function { shape: Shape },
    /// Atoms with positions in units of `L`.
    Atoms { atoms: Vec<Atom> },
    Density { shape: Shape },
}

/// A rendered family member.
#[derive(Debug, Clone)]
pub enum Member {
    Function(Field),
    Measure(Measure),
}

impl Descriptor {
    pub fn render(&self, grid: &Grid) -> Result<Member> {
        let l = grid.half_width();
        Ok(match self {
            Descriptor::Function { shape } => Member::Function(shape.render(grid)),
            Descriptor::Density { shape } => Member::Measure(Measure::from_density(shape.render(grid))?),
            Descriptor::Atoms { atoms } => {
                let scaled = atoms
                    .iter()
                    .map(|a| Atom { position: a.position.map(|c| c * l), mass: a.mass })
                    .collect();
                Member::Measure(Measure::new(*grid, scaled, None)?)
            }
        })
    }

    pub fn shape(&self) -> Option<&Shape> {
        match self {
            Descriptor::Function { shape } | Descriptor::Density { shape } => Some(shape),
            Descriptor::Atoms { .. } => None,
        }
    }
}

fn point(rng: &mut ChaCha8Rng, dim: usize, bound: f64) -> [f64; 3] {
    let mut c = [0.0; 3];
    for v in c.iter_mut().take(dim) {
        *v = rng.gen_range(-bound..bound);
    }
    c
}

fn ball(rng: &mut ChaCha8Rng, dim: usize) -> Shape {
    let radius = rng.gen_range(0.1..0.25);
    let center = point(rng, dim, 0.2);
    Shape::Ball { center, radius, amplitude: rng.gen_range(0.5..2.0) }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Shape {
    let sigma = GAUSS_SCALES[rng.gen_range(0..GAUSS_SCALES.len())];
    let center = point(rng, dim, 0.12);
    Shape::Gaussian { center, sigma, amplitude: rng.gen_range(0.5..2.0) }
}

fn anisotropic(rng: &mut ChaCha8Rng, dim: usize) -> Shape {
    let center = point(rng, dim, 0.15);
    let mut radii = [1.0; 3];
    let count = if dim == 1 { 2 } else { dim };
    for r in radii.iter_mut().take(count) {
        *r = rng.gen_range(0.08..0.3);
    }
    Shape::Anisotropic { center, radii, amplitude: rng.gen_range(0.5..2.0) }
}

fn two_bump(rng: &mut ChaCha8Rng, dim: usize) -> Shape {
    let mut parts = Vec::with_capacity(2);
    for _ in 0..2 {
        let sigma = GAUSS_SCALES[rng.gen_range(0..GAUSS_SCALES.len())];
        let center = point(rng, dim, 0.12);
        parts.push(Shape::Gaussian { center, sigma, amplitude: rng.gen_range(0.5..2.0) });
    }
    Shape::Sum { parts }
}

fn atom_cloud(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Atom> {
    let k = rng.gen_range(1..=10);
    (0..k).map(|_| Atom { position: point(rng, dim, 0.4), mass: rng.gen_range(0.2..1.0) }).collect()
}

fn mixed(rng: &mut ChaCha8Rng, dim: usize, i: usize) -> Shape {
    match i % 4 {
        0 => ball(rng, dim),
        1 => gaussian(rng, dim),
        2 => two_bump(rng, dim),
        _ => anisotropic(rng, dim),
    }
}

/// Deterministic descriptors for the first `count` members of a family.
pub fn describe(name: FamilyName, seed: u64, count: usize, dim: usize) -> Result<Vec<Descriptor>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
    }
    Ok((0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            match name {
                FamilyName::Mixed => Descriptor::Function { shape: mixed(&mut rng, dim, i) },
                FamilyName::Balls => Descriptor::Function { shape: ball(&mut rng, dim) },
                FamilyName::Gaussians => Descriptor::Function { shape: gaussian(&mut rng, dim) },
                FamilyName::TwoBump => Descriptor::Function { shape: two_bump(&mut rng, dim) },
                FamilyName::Anisotropic => Descriptor::Function { shape: anisotropic(&mut rng, dim) },
                FamilyName::Atoms => Descriptor::Atoms { atoms: atom_cloud(&mut rng, dim) },
                FamilyName::Densities => Descriptor::Density { shape: mixed(&mut rng, dim, i) },
            }
        })
        .collect())
}

/// Renders a family on a grid.
pub fn family(name: &str, seed: u64, count: usize, grid: &Grid) -> Result<Vec<Member>> {
    let name: FamilyName = name.parse()?;
    describe(name, seed, count, grid.dim())?.iter().map(|d| d.render(grid)).collect()
}

/// Renders a function family; measure families are rejected.
pub fn functions(name: FamilyName, seed: u64, count: usize, grid: &Grid) -> Result<Vec<Field>> {
    if name.is_measure() {
        return Err(Error::UnknownFamily(format!("{name} is a measure family")));
    }
    describe(name, seed, count, grid.dim())?
        .iter()
        .map(|d| match d.render(grid)? {
            Member::Function(f) => Ok(f),
            Member::Measure(_) => unreachable!("function family"),
        })
        .collect()
}

/// Renders a measure family; function families are rejected.
pub fn measures(name: FamilyName, seed: u64, count: usize, grid: &Grid) -> Result<Vec<Measure>> {
    if !name.is_measure() {
        return Err(Error::UnknownFamily(format!("{name} is a function family")));
    }
    describe(name, seed, count, grid.dim())?
        .iter()
        .map(|d| match d.render(grid)? {
            Member::Measure(m) => Ok(m),
            Member::Function(_) => unreachable!("measure family"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bit_identical() {
        let g = Grid::new(2, 2.0, 32).unwrap();
        for name in FamilyName::ALL {
            let a = family(name.as_str(), 7, 6, &g).unwrap();
            let b = family(name.as_str(), 7, 6, &g).unwrap();
            for (x, y) in a.iter().zip(&b) {
                match (x, y) {
                    (Member::Function(x), Member::Function(y)) => assert_eq!(x.values(), y.values()),
                    (Member::Measure(x), Member::Measure(y)) => assert_eq!(x, y),
                    _ => panic!("member kinds differ"),
                }
            }
        }
    }

    #[test]
    fn empty_and_prefix() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        assert!(family("mixed", 1, 0, &g).unwrap().is_empty());
        let short = describe(FamilyName::Mixed, 3, 4, 1).unwrap();
        let long = describe(FamilyName::Mixed, 3, 9, 1).unwrap();
        assert_eq!(short[..], long[..4]);
        assert!(matches!(family("nope", 1, 1, &g), Err(Error::UnknownFamily(_))));
    }

    #[test]
    fn supports_in_middle_half() {
        for dim in [1, 2] {
            let g = Grid::new(dim, 2.0, if dim == 1 { 128 } else { 32 }).unwrap();
            for f in functions(FamilyName::Mixed, DEFAULT_SEED, DEFAULT_COUNT, &g).unwrap() {
                assert!(!f.is_zero());
                assert!(f.support().in_middle_half());
            }
            for m in measures(FamilyName::Atoms, DEFAULT_SEED, 16, &g).unwrap() {
                assert!((1..=10).contains(&m.atoms().len()));
                assert!(m.support().in_middle_half());
            }
        }
    }

    #[test]
    fn narrow_shape_keeps_its_peak() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let s = Shape::Gaussian { center: [0.01, 0.0, 0.0], sigma: 0.001, amplitude: 1.5 };
        let f = s.render(&g);
        assert_eq!(f.max(), 1.5);
        assert_eq!(f.support().count(), 1);
    }
}
