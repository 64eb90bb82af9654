//! Linear (non-periodic) convolution of grid functions with kernel tables.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::kernel::KernelTable;

/// Evaluation path for a discrete convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// `O(N^(2n))` summation over all node pairs.
    Direct,
    /// Zero-padded FFT on a `2N`-per-axis grid.
    Fast,
}

/// Applies `u(x) = h^n sum_y k(x - y) f(y)` for a fixed kernel table, caching
/// the padded kernel spectrum.
pub struct Convolver {
    table: KernelTable,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver").field("table", &self.table).finish_non_exhaustive()
    }
}

impl Convolver {
    pub fn new(table: KernelTable) -> Self {
        let grid = *table.grid();
        let p = 2 * grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(p);
        let inverse = planner.plan_fft_inverse(p);
        let big_n = grid.points_per_axis() as isize;
        let dim = grid.dim();
        let total = p.pow(dim as u32);
        // circulant embedding: offset d lives at index d mod 2N, index N unused
        let mut spectrum: Vec<Complex64> = (0..total)
            .map(|idx| {
                let mut rest = idx;
                let mut d = [0isize; 3];
                for a in (0..dim).rev() {
                    let c = (rest % p) as isize;
                    rest /= p;
                    d[a] = if c < big_n { c } else { c - p as isize };
                }
                if d.iter().take(dim).any(|&c| c == -big_n) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(table.at(d), 0.0)
                }
            })
            .collect();
        fft_nd(&mut spectrum, dim, p, &forward);
        Self { table, spectrum, forward, inverse }
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    pub fn grid(&self) -> &Grid {
        self.table.grid()
    }

    pub fn apply(&self, f: &Field, method: Method) -> Result<Field> {
        self.grid().check_same(f.grid())?;
        let values = match method {
            Method::Fast => self.apply_fast(f.values()),
            Method::Direct => self.apply_direct(f.values()),
        };
        finish(*self.grid(), values, f.is_nonneg())
    }

    /// FFT path on raw node values.
    pub fn apply_fast(&self, f: &[f64]) -> Vec<f64> {
        let grid = *self.grid();
        let dim = grid.dim();
        let n = grid.points_per_axis();
        let p = 2 * n;
        let total = p.pow(dim as u32);
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for (idx, &v) in f.iter().enumerate() {
            buf[padded_index(&grid, idx, p)] = Complex64::new(v, 0.0);
        }
        fft_nd(&mut buf, dim, p, &self.forward);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        fft_nd(&mut buf, dim, p, &self.inverse);
        let scale = grid.cell_volume() / total as f64;
        (0..grid.len()).map(|idx| buf[padded_index(&grid, idx, p)].re * scale).collect()
    }

    /// Direct summation on raw node values.
    pub fn apply_direct(&self, f: &[f64]) -> Vec<f64> {
        direct_sum(&self.table, f)
    }
}

fn direct_sum(table: &KernelTable, f: &[f64]) -> Vec<f64> {
    let grid = *table.grid();
    let dim = grid.dim();
    let hn = grid.cell_volume();
    let support: Vec<(usize, [usize; 3])> =
        f.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| (j, grid.multi_index(j))).collect();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mi = grid.multi_index(i);
            let mut acc = 0.0;
            for &(j, mj) in &support {
                let mut d = [0isize; 3];
                for a in 0..dim {
                    d[a] = mi[a] as isize - mj[a] as isize;
                }
                acc += table.at(d) * f[j];
            }
            acc * hn
        })
        .collect()
}

#[inline]
fn padded_index(grid: &Grid, idx: usize, p: usize) -> usize {
    let mi = grid.multi_index(idx);
    let mut out = 0;
    for &m in mi.iter().take(grid.dim()) {
        out = out * p + m;
    }
    out
}

/// In-place separable n-dimensional FFT on a row-major cube of side `p`.
fn fft_nd(buf: &mut [Complex64], dim: usize, p: usize, fft: &Arc<dyn Fft<f64>>) {
    // last axis: contiguous rows
    buf.par_chunks_mut(p).for_each(|row| fft.process(row));
    if dim == 1 {
        return;
    }
    let stride_axes: Vec<usize> = (0..dim - 1).map(|a| p.pow((dim - 1 - a) as u32)).collect();
    for &stride in &stride_axes {
        // lines along an axis with the given stride
        let block = stride * p;
        buf.par_chunks_mut(block).for_each(|chunk| {
            let mut line = vec![Complex64::new(0.0, 0.0); p];
            for offset in 0..stride {
                for k in 0..p {
                    line[k] = chunk[offset + k * stride];
                }
                fft.process(&mut line);
                for k in 0..p {
                    chunk[offset + k * stride] = line[k];
                }
            }
        });
    }
}

/// Convenience wrapper for one-off convolutions.
pub fn convolve(table: &KernelTable, f: &Field, method: Method) -> Result<Field> {
    table.grid().check_same(f.grid())?;
    match method {
        Method::Fast => Convolver::new(table.clone()).apply(f, Method::Fast),
        Method::Direct => {
            let values = direct_sum(table, f.values());
            finish(*table.grid(), values, f.is_nonneg())
        }
    }
}

fn finish(grid: Grid, values: Vec<f64>, nonneg: bool) -> Result<Field> {
    if nonneg {
        // round-off can leave tiny negatives far from the support
        Field::nonnegative(grid, values.into_iter().map(|v| v.max(0.0)).collect())
    } else {
        Field::new(grid, values)
    }
}
