//! Riesz and Bessel kernel tables, Hardy–Littlewood maximal functions and
//! `A_1` characteristics of weights.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::KernelKind;
use crate::quad;

/// Normalising constant of the Riesz kernel,
/// `Gamma((n - alpha)/2) / (pi^(n/2) 2^alpha Gamma(alpha/2))`.
pub fn riesz_gamma(n: usize, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(alpha > 0.0 && alpha < nf) {
        return Err(Error::Domain(format!("riesz constant needs 0 < alpha < n, got n = {n}, alpha = {alpha}")));
    }
    Ok(gamma(0.5 * (nf - alpha)) / (PI.powf(0.5 * nf) * 2f64.powf(alpha) * gamma(0.5 * alpha)))
}

/// Surface area of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(0.5 * n as f64) / gamma(0.5 * n as f64),
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n) / n as f64
}

/// Radius of the ball whose volume equals one grid cell.
fn equal_volume_radius(n: usize, h: f64) -> f64 {
    h * unit_ball_volume(n).powf(-1.0 / n as f64)
}

/// Bessel kernel `G_alpha(r)` by adaptive quadrature of its heat-kernel
/// subordination integral, evaluated in the variable `u = ln(delta)`.
pub fn bessel_kernel_exact(n: usize, alpha: f64, r: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("bessel kernel needs alpha > 0 and r > 0, got {alpha}, {r}")));
    }
    let c = 0.5 * (alpha - n as f64);
    let a = PI * r * r;
    let b = 1.0 / (4.0 * PI);
    let phi = |u: f64| -a * (-u).exp() - b * u.exp() + c * u;
    let dphi = |u: f64| a * (-u).exp() - b * u.exp() + c;
    // phi is strictly concave; locate its maximum by bisection on phi'
    let (mut lo, mut hi) = (-50.0f64, 50.0f64);
    while dphi(lo) < 0.0 {
        lo -= 50.0;
    }
    while dphi(hi) > 0.0 {
        hi += 50.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dphi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    let u0 = 0.5 * (lo + hi);
    let peak = phi(u0);
    let cutoff = peak - 46.0;
    let mut step = 1.0;
    let mut left = u0 - step;
    while phi(left) > cutoff {
        step *= 2.0;
        left = u0 - step;
    }
    step = 1.0;
    let mut right = u0 + step;
    while phi(right) > cutoff {
        step *= 2.0;
        right = u0 + step;
    }
    let integral = quad::integrate_adaptive(|u| (phi(u) - peak).exp(), left, right, 1e-11, 0.0)?;
    let log_pref = -0.5 * alpha * (4.0 * PI).ln() - ln_gamma(0.5 * alpha);
    Ok((log_pref + peak).exp() * integral)
}

/// Log-spaced radial samples of the Bessel kernel with log–log linear
/// interpolation, which keeps the interpolant monotone.
#[derive(Debug, Clone)]
pub struct RadialCache {
    log_r: Vec<f64>,
    log_g: Vec<f64>,
}

impl RadialCache {
    pub const DEFAULT_POINTS: usize = 1024;

    pub fn bessel(n: usize, alpha: f64, r_min: f64, r_max: f64, points: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) || points < 2 {
            return Err(Error::Domain(format!("bad radial range [{r_min}, {r_max}] with {points} points")));
        }
        let (l0, l1) = (r_min.ln(), r_max.ln());
        let log_r: Vec<f64> = (0..points).map(|i| l0 + (l1 - l0) * i as f64 / (points - 1) as f64).collect();
        let log_g = log_r
            .par_iter()
            .map(|&lr| bessel_kernel_exact(n, alpha, lr.exp()).map(f64::ln))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { log_r, log_g })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let lr = r.ln();
        let m = self.log_r.len();
        let (l0, l1) = (self.log_r[0], self.log_r[m - 1]);
        let t = ((lr - l0) / (l1 - l0) * (m - 1) as f64).clamp(0.0, (m - 1) as f64);
        let i = (t.floor() as usize).min(m - 2);
        let w = (lr - self.log_r[i]) / (self.log_r[i + 1] - self.log_r[i]);
        (self.log_g[i] + w * (self.log_g[i + 1] - self.log_g[i])).exp()
    }

    pub fn len(&self) -> usize {
        self.log_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_r.is_empty()
    }

    /// `radius,value` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,value\n");
        for (lr, lg) in self.log_r.iter().zip(&self.log_g) {
            let _ = writeln!(out, "{:.17e},{:.17e}", lr.exp(), lg.exp());
        }
        out
    }
}

/// Kernel sampled at every lattice offset `z` with `|z_i| <= N - 1`, so that a
/// grid function can be convolved without wrap-around. Entry `z = 0` holds the
/// cell average of the singular kernel.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Grid,
    kind: KernelKind,
    alpha: f64,
    values: Vec<f64>,
    radial: Option<RadialCache>,
}

impl KernelTable {
    pub fn new(grid: Grid, kind: KernelKind, alpha: f64) -> Result<Self> {
        match kind {
            KernelKind::Riesz => Self::riesz(grid, alpha),
            KernelKind::Bessel => Self::bessel(grid, alpha),
        }
    }

    pub fn riesz(grid: Grid, alpha: f64) -> Result<Self> {
        let n = grid.dim();
        let gam = riesz_gamma(n, alpha)?;
        let h = grid.spacing();
        let rho = equal_volume_radius(n, h);
        let centre = gam * h.powi(-(n as i32)) * unit_sphere_area(n) * rho.powf(alpha) / alpha;
        let values = Self::fill(grid, |r| gam * r.powf(alpha - n as f64), centre);
        Ok(Self { grid, kind: KernelKind::Riesz, alpha, values, radial: None })
    }

    pub fn bessel(grid: Grid, alpha: f64) -> Result<Self> {
        let n = grid.dim();
        let h = grid.spacing();
        let r_max = (n as f64).sqrt() * (grid.points_per_axis() - 1) as f64 * h * 1.0001;
        let radial = RadialCache::bessel(n, alpha, 0.5 * h, r_max, RadialCache::DEFAULT_POINTS)?;
        let centre = Self::bessel_cell_average(n, alpha, h)?;
        let values = Self::fill(grid, |r| radial.eval(r), centre);
        Ok(Self { grid, kind: KernelKind::Bessel, alpha, values, radial: Some(radial) })
    }

    /// Cell average over the equal-volume ball: the Riesz part in closed form
    /// plus Gauss–Legendre quadrature of the bounded remainder.
    fn bessel_cell_average(n: usize, alpha: f64, h: f64) -> Result<f64> {
        let rho = equal_volume_radius(n, h);
        let sphere = unit_sphere_area(n);
        let cell = h.powi(-(n as i32));
        if alpha < n as f64 {
            let gam = riesz_gamma(n, alpha)?;
            let singular = gam * cell * sphere * rho.powf(alpha) / alpha;
            let (x, w) = quad::gauss_legendre(24);
            let mut rem = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let r = 0.5 * rho * (1.0 + xi);
                let g = bessel_kernel_exact(n, alpha, r)?;
                rem += wi * (g - gam * r.powf(alpha - n as f64)) * r.powi(n as i32 - 1);
            }
            Ok(singular + cell * sphere * 0.5 * rho * rem)
        } else {
            let (x, w) = quad::gauss_legendre(24);
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let r = 0.5 * rho * (1.0 + xi);
                acc += wi * bessel_kernel_exact(n, alpha, r)? * r.powi(n as i32 - 1);
            }
            Ok(cell * sphere * 0.5 * rho * acc)
        }
    }

    fn fill(grid: Grid, radial: impl Fn(f64) -> f64 + Sync, centre: f64) -> Vec<f64> {
        let n = grid.dim();
        let big_n = grid.points_per_axis() as isize;
        let m = (2 * big_n - 1) as usize;
        let h = grid.spacing();
        let total = m.pow(n as u32);
        (0..total)
            .into_par_iter()
            .map(|idx| {
                let d = Self::offset_of(n, m, idx, big_n);
                let r2: isize = d.iter().take(n).map(|c| c * c).sum();
                if r2 == 0 {
                    centre
                } else {
                    radial(h * (r2 as f64).sqrt())
                }
            })
            .collect()
    }

    fn offset_of(n: usize, m: usize, idx: usize, big_n: isize) -> [isize; 3] {
        let mut d = [0isize; 3];
        let mut rest = idx;
        for a in (0..n).rev() {
            d[a] = (rest % m) as isize - (big_n - 1);
            rest /= m;
        }
        d
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of offsets per axis, `2N - 1`.
    #[inline]
    pub fn extent(&self) -> usize {
        2 * self.grid.points_per_axis() - 1
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn radial_cache(&self) -> Option<&RadialCache> {
        self.radial.as_ref()
    }

    /// Kernel value at lattice offset `d` (components in `[-(N-1), N-1]`).
    #[inline]
    pub fn at(&self, d: [isize; 3]) -> f64 {
        let m = self.extent();
        let c = self.grid.points_per_axis() as isize - 1;
        let mut idx = 0usize;
        for &di in d.iter().take(self.grid.dim()) {
            idx = idx * m + (di + c) as usize;
        }
        self.values[idx]
    }
}

/// Radii `h/2, h, 2h, 4h, ...` up to the box diameter `2L` (or up to 1 when truncated).
pub fn maximal_radii(grid: &Grid, truncated: bool) -> Vec<f64> {
    let h = grid.spacing();
    let mut radii = vec![0.5 * h];
    let mut r = h;
    while r <= 2.0 * grid.half_width() * (1.0 + 1e-12) {
        if truncated && r > 1.0 {
            break;
        }
        radii.push(r);
        r *= 2.0;
    }
    radii
}

/// Discrete Hardy–Littlewood maximal function of `|w|` over [`maximal_radii`].
///
/// In one dimension ball averages use exact cell–ball overlap lengths; in two
/// and three dimensions they average the nodes whose centres lie in the ball.
/// Values outside the box count as zero in both cases.
pub fn maximal_function(w: &Field, truncated: bool) -> Field {
    let grid = *w.grid();
    let radii = maximal_radii(&grid, truncated);
    let vals: Vec<f64> = w.values().iter().map(|v| v.abs()).collect();
    let out: Vec<f64> = if grid.dim() == 1 {
        maximal_1d(&grid, &vals, &radii)
    } else {
        maximal_counting(&grid, &vals, &radii)
    };
    Field::nonnegative(grid, out).expect("maximal function of finite data is finite")
}

fn maximal_1d(grid: &Grid, vals: &[f64], radii: &[f64]) -> Vec<f64> {
    let n = grid.points_per_axis();
    let h = grid.spacing();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let wx = vals[i];
            let mut best = wx;
            for &r in radii {
                // ball [x - r, x + r] in cell units relative to the left edge of cell i
                let lo = i as f64 + 0.5 - r / h;
                let hi = i as f64 + 0.5 + r / h;
                let mut acc = 0.0;
                let mut inside = 0.0;
                let k0 = lo.floor().max(0.0) as usize;
                let k1 = (hi.ceil().min(n as f64)) as usize;
                for k in k0..k1 {
                    let ov = (hi.min(k as f64 + 1.0) - lo.max(k as f64)).max(0.0);
                    if ov > 0.0 {
                        acc += (vals[k] - wx) * ov;
                        inside += ov;
                    }
                }
                let outside = 2.0 * r / h - inside;
                let avg = wx + (acc - wx * outside.max(0.0)) / (2.0 * r / h);
                if avg > best {
                    best = avg;
                }
            }
            best
        })
        .collect()
}

fn maximal_counting(grid: &Grid, vals: &[f64], radii: &[f64]) -> Vec<f64> {
    let n = grid.dim();
    let big_n = grid.points_per_axis() as isize;
    let h = grid.spacing();
    let offsets_for = |r: f64| -> Vec<[isize; 3]> {
        let k = (r / h).floor() as isize;
        let lim = (r / h) * (r / h) * (1.0 + 1e-12);
        let mut out = Vec::new();
        let range = -k..=k;
        for a in range.clone() {
            for b in range.clone() {
                if n == 2 {
                    if (a * a + b * b) as f64 <= lim {
                        out.push([a, b, 0]);
                    }
                } else {
                    for c in range.clone() {
                        if (a * a + b * b + c * c) as f64 <= lim {
                            out.push([a, b, c]);
                        }
                    }
                }
            }
        }
        out
    };
    let offset_sets: Vec<Vec<[isize; 3]>> = radii.iter().map(|&r| offsets_for(r)).collect();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let mi = grid.multi_index(idx);
            let wx = vals[idx];
            let mut best = wx;
            for offs in &offset_sets {
                let mut acc = 0.0;
                for d in offs {
                    let mut inside = true;
                    let mut nb = [0usize; 3];
                    for a in 0..n {
                        let c = mi[a] as isize + d[a];
                        if c < 0 || c >= big_n {
                            inside = false;
                            break;
                        }
                        nb[a] = c as usize;
                    }
                    let v = if inside { vals[grid.linear_index(nb)] } else { 0.0 };
                    acc += v - wx;
                }
                let avg = wx + acc / offs.len() as f64;
                if avg > best {
                    best = avg;
                }
            }
            best
        })
        .collect()
}

/// `max_x M w(x) / w(x)` with `0/0 = 1` and `positive/0 = +inf`.
pub fn a1_constant(w: &Field, truncated: bool) -> f64 {
    let m = maximal_function(w, truncated);
    let mut best = 1.0f64;
    for (&mv, &wv) in m.values().iter().zip(w.values()) {
        let wv = wv.abs();
        let ratio = if wv == 0.0 {
            if mv == 0.0 {
                1.0
            } else {
                return f64::INFINITY;
            }
        } else {
            mv / wv
        };
        best = best.max(ratio);
    }
    best
}

/// The kernel table restricted to the box, as a weight centred at the origin
/// (the node nearest to it).
pub fn kernel_weight(table: &KernelTable) -> Field {
    let grid = *table.grid();
    let n = grid.dim();
    let big_n = grid.points_per_axis() as isize;
    let values = (0..grid.len())
        .map(|idx| {
            let mi = grid.multi_index(idx);
            let mut d = [0isize; 3];
            for a in 0..n {
                d[a] = mi[a] as isize - big_n / 2;
            }
            table.at(d)
        })
        .collect();
    Field::nonnegative(grid, values).expect("kernel values are finite and positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mask;
    use proptest::prelude::*;

    #[test]
    fn riesz_gamma_closed_forms() {
        let v = riesz_gamma(1, 0.5).unwrap();
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let v = riesz_gamma(2, 1.0).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-15);
        // Gamma(1/2)/(pi^(3/2) 4 Gamma(1)) = 1/(4 pi) exactly
        let v = riesz_gamma(3, 2.0).unwrap();
        assert!((v - 1.0 / (4.0 * PI)).abs() <= 1e-14 / (4.0 * PI));
        assert!(riesz_gamma(1, 1.0).is_err());
        assert!(riesz_gamma(2, 0.0).is_err());
    }

    #[test]
    fn riesz_gamma_against_half_integer_gammas() {
        // n = 3, alpha = 1: Gamma(1)/(pi^(3/2) 2 Gamma(1/2)) = 1/(2 pi^2)
        let v = riesz_gamma(3, 1.0).unwrap();
        assert!((v / (1.0 / (2.0 * PI * PI)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bessel_matches_closed_forms() {
        // n = 3, alpha = 2: e^{-r}/(4 pi r)
        for r in [0.01, 0.3, 1.0, 4.0, 12.0] {
            let g = bessel_kernel_exact(3, 2.0, r).unwrap();
            let e = (-r).exp() / (4.0 * PI * r);
            assert!((g / e - 1.0).abs() < 1e-9, "r = {r}: {g} vs {e}");
        }
        // n = 1, alpha = 2: e^{-|r|}/2
        for r in [0.05, 1.0, 7.0] {
            let g = bessel_kernel_exact(1, 2.0, r).unwrap();
            assert!((g / (0.5 * (-r).exp()) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bessel_small_argument_matches_riesz() {
        for (n, alpha) in [(2usize, 0.5), (3, 1.0), (1, 0.4)] {
            let r: f64 = if n == 1 { 1e-7 } else { 1e-3 };
            let g = bessel_kernel_exact(n, alpha, r).unwrap();
            let k = riesz_gamma(n, alpha).unwrap() * r.powf(alpha - n as f64);
            assert!((g / k - 1.0).abs() < 0.02, "n = {n}: ratio {}", g / k);
            assert!(g < k);
        }
    }

    #[test]
    fn riesz_table_shape_and_singular_cell() {
        let g = Grid::new(1, 1.0, 64).unwrap();
        let alpha = 0.4;
        let t = KernelTable::riesz(g, alpha).unwrap();
        let h = g.spacing();
        let gam = riesz_gamma(1, alpha).unwrap();
        let expect = gam / h * 2.0 * (0.5 * h).powf(alpha) / alpha;
        assert!((t.at([0, 0, 0]) - expect).abs() < 1e-12 * expect);
        assert!(t.values().iter().all(|&v| v > 0.0));
        for k in 0..63 {
            assert!(t.at([k, 0, 0]) > t.at([k + 1, 0, 0]));
            assert_eq!(t.at([k, 0, 0]), t.at([-k, 0, 0]));
        }
    }

    #[test]
    fn riesz_table_homogeneity() {
        let alpha = 0.7;
        let fine = KernelTable::riesz(Grid::new(2, 1.0, 16).unwrap(), alpha).unwrap();
        let coarse = KernelTable::riesz(Grid::new(2, 2.0, 16).unwrap(), alpha).unwrap();
        let f = 2f64.powf(alpha - 2.0);
        for (a, b) in fine.values().iter().zip(coarse.values()) {
            assert!((b / (f * a) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn bessel_table_unit_mass() {
        for (n, big_n, alpha) in [(1usize, 1024usize, 0.4), (2, 256, 0.8)] {
            let g = Grid::new(n, 8.0, big_n).unwrap();
            let t = KernelTable::bessel(g, alpha).unwrap();
            let mass: f64 = t.values().iter().sum::<f64>() * g.cell_volume();
            assert!((mass - 1.0).abs() < 0.01, "n = {n}: mass {mass}");
            assert!(t.values().iter().all(|&v| v > 0.0));
            let m = t.extent() as isize;
            for k in 0..(m / 2) {
                assert!(t.at([k, 0, 0]) >= t.at([k + 1, 0, 0]));
            }
        }
    }

    #[test]
    fn bessel_below_riesz() {
        let g = Grid::new(1, 4.0, 128).unwrap();
        let alpha = 0.45;
        let b = KernelTable::bessel(g, alpha).unwrap();
        let r = KernelTable::riesz(g, alpha).unwrap();
        for (x, y) in b.values().iter().zip(r.values()) {
            assert!(x < y);
        }
        // near the origin the ratio tends to one as h shrinks
        let g = Grid::new(2, 0.25, 64).unwrap();
        let b = KernelTable::bessel(g, 0.5).unwrap();
        let r = KernelTable::riesz(g, 0.5).unwrap();
        assert!((b.at([1, 0, 0]) / r.at([1, 0, 0]) - 1.0).abs() < 0.02);
        assert!((b.at([0, 0, 0]) / r.at([0, 0, 0]) - 1.0).abs() < 0.02);
    }

    #[test]
    fn radial_cache_csv() {
        let c = RadialCache::bessel(1, 0.5, 0.01, 4.0, 16).unwrap();
        let csv = c.to_csv();
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.starts_with("radius,value"));
        let mut prev = f64::INFINITY;
        for line in csv.lines().skip(1) {
            let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn maximal_of_constant_is_constant() {
        for (n, big_n) in [(1usize, 64usize), (2, 16)] {
            let g = Grid::new(n, 1.0, big_n).unwrap();
            let w = Field::constant(g, 2.5);
            let m = maximal_function(&w, false);
            assert!(m.values().iter().all(|&v| v == 2.5));
            assert_eq!(a1_constant(&w, false), 1.0);
            assert_eq!(a1_constant(&w, true), 1.0);
        }
    }

    /// Brute-force ball averages of a spike, computed from overlap lengths.
    #[test]
    fn maximal_of_spike() {
        let g = Grid::new(1, 1.0, 64).unwrap();
        let h = g.spacing();
        let k = 30usize;
        let mut v = vec![0.0; 64];
        v[k] = 1.0;
        let w = Field::new(g, v).unwrap();
        let m = maximal_function(&w, false);
        for i in 0..64usize {
            let x = g.axis_coord(i);
            let (a, b) = (g.axis_coord(k) - 0.5 * h, g.axis_coord(k) + 0.5 * h);
            let mut best = if i == k { 1.0 } else { 0.0 };
            for r in maximal_radii(&g, false) {
                let ov = ((x + r).min(b) - (x - r).max(a)).max(0.0);
                best = f64::max(best, ov / (2.0 * r));
            }
            assert!((m.values()[i] - best).abs() < 1e-13);
            let d = (i as f64 - k as f64).abs() * h;
            if i != k {
                // within a dyadic factor of h / (2 max(d, h))
                let approx = h / (2.0 * d.max(h));
                assert!(best <= approx * 1.0001 && best >= approx / 4.0);
            }
        }
    }

    #[test]
    fn a1_infinite_on_zero_node() {
        let g = Grid::new(1, 1.0, 16).unwrap();
        let mut v = vec![1.0; 16];
        v[5] = 0.0;
        assert_eq!(a1_constant(&Field::new(g, v).unwrap(), false), f64::INFINITY);
    }

    #[test]
    fn a1_of_riesz_kernel_refines() {
        let alpha = 0.4;
        let vals: Vec<f64> = [128usize, 256, 512]
            .iter()
            .map(|&nn| {
                let g = Grid::new(1, 1.0, nn).unwrap();
                a1_constant(&kernel_weight(&KernelTable::riesz(g, alpha).unwrap()), false)
            })
            .collect();
        assert!(vals.iter().all(|v| v.is_finite() && *v >= 1.0));
        for pair in vals.windows(2) {
            assert!((pair[1] / pair[0] - 1.0).abs() < 0.1, "{vals:?}");
        }
    }

    #[test]
    fn maximal_counting_two_dims() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        let mask = Mask::ball(g, &[0.2, -0.1], 0.3);
        let w = Field::indicator(&mask);
        let m = maximal_function(&w, false);
        let t = maximal_function(&w, true);
        for i in 0..g.len() {
            assert!(m.values()[i] >= w.values()[i]);
            assert!(t.values()[i] <= m.values()[i]);
        }
    }

    proptest! {
        #[test]
        fn maximal_dominates_and_a1_scale_free(
            vals in proptest::collection::vec(0.01f64..10.0, 32),
            lam in 0.1f64..50.0,
        ) {
            let g = Grid::new(1, 1.0, 32).unwrap();
            let w = Field::new(g, vals).unwrap();
            let m = maximal_function(&w, false);
            let mt = maximal_function(&w, true);
            for i in 0..32 {
                prop_assert!(m.values()[i] >= w.values()[i]);
                prop_assert!(mt.values()[i] <= m.values()[i]);
            }
            let a = a1_constant(&w, false);
            let b = a1_constant(&w.scale(lam), false);
            prop_assert!((a / b - 1.0).abs() < 1e-12);
        }
    }
}
