//! Riesz, Bessel and Wolff potentials of grid functions and measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolution::{convolve, Method};
use crate::error::{Error, Result};
use crate::grid::{distance, Field, Grid, Mask};
use crate::kernel::{unit_ball_volume, KernelTable};
use crate::params::KernelKind;
use crate::quad;

/// `I_alpha f` as a discrete convolution with the Riesz kernel table.
pub fn riesz_potential(f: &Field, alpha: f64, method: Method) -> Result<Field> {
    let table = KernelTable::riesz(*f.grid(), alpha)?;
    convolve(&table, f, method)
}

/// `G_alpha f` as a discrete convolution with the Bessel kernel table.
pub fn bessel_potential(f: &Field, alpha: f64, method: Method) -> Result<Field> {
    let table = KernelTable::bessel(*f.grid(), alpha)?;
    convolve(&table, f, method)
}

pub fn potential(f: &Field, alpha: f64, kind: KernelKind, method: Method) -> Result<Field> {
    match kind {
        KernelKind::Riesz => riesz_potential(f, alpha, method),
        KernelKind::Bessel => bessel_potential(f, alpha, method),
    }
}

/// Point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: [f64; 3],
    pub mass: f64,
}

/// Nonnegative measure made of point atoms and an optional density `f dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    grid: Grid,
    atoms: Vec<Atom>,
    density: Option<Field>,
}

impl Measure {
    pub fn new(grid: Grid, atoms: Vec<Atom>, density: Option<Field>) -> Result<Self> {
        for a in &atoms {
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::Domain(format!("atom mass {} must be positive", a.mass)));
            }
            if !grid.contains(&a.position) || a.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::Domain(format!("atom at {:?} lies outside the box", a.position)));
            }
        }
        if let Some(d) = &density {
            grid.check_same(d.grid())?;
            if let Some((idx, &value)) = d.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
                return Err(Error::Negative { idx, value });
            }
        }
        Ok(Self { grid, atoms, density })
    }

    pub fn zero(grid: Grid) -> Self {
        Self { grid, atoms: Vec::new(), density: None }
    }

    pub fn dirac(grid: Grid, position: [f64; 3], mass: f64) -> Result<Self> {
        Self::new(grid, vec![Atom { position, mass }], None)
    }

    pub fn from_density(density: Field) -> Result<Self> {
        Self::new(*density.grid(), Vec::new(), Some(density))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Field> {
        self.density.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.as_ref().map_or(true, |d| d.is_zero())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.density.as_ref().map_or(0.0, |d| d.integrate())
    }

    pub fn scale(&self, lambda: f64) -> Result<Self> {
        let atoms = self.atoms.iter().map(|a| Atom { position: a.position, mass: lambda * a.mass }).collect();
        Self::new(self.grid, atoms, self.density.as_ref().map(|d| d.scale(lambda)))
    }

    /// Grid node carrying each atom (the centre of the cell containing it).
    pub fn atom_nodes(&self) -> Vec<usize> {
        self.atoms.iter().map(|a| self.grid.cell_of(&a.position)).collect()
    }

    /// Nodes where the measure has mass.
    pub fn support(&self) -> Mask {
        let mut m = match &self.density {
            Some(d) => d.support(),
            None => Mask::empty(self.grid),
        };
        let mut members = m.members().to_vec();
        for i in self.atom_nodes() {
            members[i] = true;
        }
        m = Mask::new(self.grid, members).expect("same grid");
        m
    }

    /// `integral F dmu`, with atoms evaluated at their cell nodes.
    pub fn integrate(&self, field: &Field) -> Result<f64> {
        self.grid.check_same(field.grid())?;
        let mut total = 0.0;
        if let Some(d) = &self.density {
            total += d.zip_with(field, |a, b| a * b)?.integrate();
        }
        for (a, i) in self.atoms.iter().zip(self.atom_nodes()) {
            total += a.mass * field.values()[i];
        }
        Ok(total)
    }

    /// Mass carried by each node: `h^n` times the density plus the atoms of its cell.
    pub fn node_masses(&self) -> Vec<f64> {
        let hn = self.grid.cell_volume();
        let mut m = match &self.density {
            Some(d) => d.values().iter().map(|v| v * hn).collect(),
            None => vec![0.0; self.grid.len()],
        };
        for (a, i) in self.atoms.iter().zip(self.atom_nodes()) {
            m[i] += a.mass;
        }
        m
    }

    /// `mu(E)` for a node set, atoms attributed to their cell nodes.
    pub fn mass_of(&self, set: &Mask) -> Result<f64> {
        self.integrate(&Field::indicator(set))
    }

    /// Distances and masses as seen from `x`; the density cell containing `x`
    /// (when `x` is a node) is returned separately as its density value.
    fn shells(&self, x: &[f64], out: &mut Vec<(f64, f64)>) -> Result<f64> {
        out.clear();
        let n = self.grid.dim();
        let mut own = 0.0;
        for a in &self.atoms {
            let d = distance(n, x, &a.position);
            if d == 0.0 {
                return Err(Error::Domain(format!("Wolff potential is infinite at the atom {:?}", a.position)));
            }
            out.push((d, a.mass));
        }
        if let Some(dens) = &self.density {
            let hn = self.grid.cell_volume();
            for (j, &v) in dens.values().iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let y = self.grid.point(j);
                let d = distance(n, x, &y);
                if d == 0.0 {
                    own = v;
                } else {
                    out.push((d, v * hn));
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(own)
    }
}

/// Evaluates `int_0^R [mu(B_t(x)) / t^(n - alpha s)]^(1/(s-1)) dt/t` exactly for
/// the piecewise description of `t -> mu(B_t(x))`.
///
/// Point masses enter at their distance from `x`. A density value at `x`
/// itself is spread over the ball of one cell volume, so it contributes
/// `c t^n` for `t` below that ball's radius. Between mass jumps the integrand
/// is a power of `t` and is integrated in closed form.
pub fn wolff_at(mu: &Measure, x: &[f64], alpha: f64, s: f64, radius: Option<f64>) -> Result<f64> {
    let mut shells = Vec::new();
    wolff_with_buffer(mu, x, alpha, s, radius, &mut shells)
}

fn wolff_with_buffer(
    mu: &Measure,
    x: &[f64],
    alpha: f64,
    s: f64,
    radius: Option<f64>,
    shells: &mut Vec<(f64, f64)>,
) -> Result<f64> {
    let n = mu.grid.dim();
    let nf = n as f64;
    if !(s > 1.0 && alpha > 0.0 && alpha * s < nf) {
        return Err(Error::Domain(format!("Wolff potential needs s > 1 and 0 < alpha s < n, got {alpha}, {s}")));
    }
    let rmax = radius.unwrap_or(f64::INFINITY);
    if !(rmax > 0.0) {
        return Ok(0.0);
    }
    let own = mu.shells(x, shells)?;
    let e = 1.0 / (s - 1.0);
    let beta = (nf - alpha * s) / (s - 1.0);
    let gam = alpha * s / (s - 1.0);
    let rho = mu.grid.spacing() * unit_ball_volume(n).powf(-1.0 / nf);
    let c = own * unit_ball_volume(n);

    let mut total = 0.0;
    let mut mass = 0.0;
    let mut t = 0.0;
    let mut k = 0;
    // part of the integral where the own-cell ball is still filling up
    if c > 0.0 {
        let stop = rho.min(rmax);
        while t < stop {
            let next = if k < shells.len() { shells[k].0.min(stop) } else { stop };
            if next > t {
                if mass == 0.0 {
                    total += c.powf(e) * (next.powf(gam) - t.powf(gam)) / gam;
                } else {
                    let m0 = mass;
                    // substitute t = exp(v) on [ln t, ln next]
                    total += quad::integrate_adaptive(
                        |v| {
                            let tt = v.exp();
                            (c * tt.powf(nf) + m0).powf(e) * tt.powf(-beta)
                        },
                        t.ln(),
                        next.ln(),
                        1e-12,
                        0.0,
                    )?;
                }
                t = next;
            }
            while k < shells.len() && shells[k].0 <= t {
                mass += shells[k].1;
                k += 1;
            }
        }
        if t >= rmax {
            return Ok(total);
        }
        mass += c * rho.powf(nf);
    }
    loop {
        while k < shells.len() && shells[k].0 <= t {
            mass += shells[k].1;
            k += 1;
        }
        let next = if k < shells.len() { shells[k].0 } else { f64::INFINITY };
        let b = next.min(rmax);
        if mass > 0.0 && b > t {
            let upper = if b.is_finite() { b.powf(-beta) } else { 0.0 };
            total += mass.powf(e) * (t.powf(-beta) - upper) / beta;
        }
        if b >= rmax {
            break;
        }
        t = b;
    }
    Ok(total)
}

/// `W_{alpha,s}^R mu` at every grid node (`radius = None` for the full potential).
pub fn wolff_potential(mu: &Measure, alpha: f64, s: f64, radius: Option<f64>) -> Result<Field> {
    let grid = *mu.grid();
    let values = (0..grid.len())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| wolff_with_buffer(mu, &grid.point(i), alpha, s, radius, buf))
        .collect::<Result<Vec<_>>>()?;
    Field::nonnegative(grid, values)
}

/// Wolff potential of a unit point mass at distance `r`:
/// `((s - 1)/(n - alpha s)) r^(-(n - alpha s)/(s - 1))`.
pub fn wolff_dirac_closed_form(n: usize, alpha: f64, s: f64, r: f64) -> f64 {
    let beta = (n as f64 - alpha * s) / (s - 1.0);
    r.powf(-beta) / beta
}
