//! Capacities of node sets, obstacle problems, Choquet integrals and the
//! `L^q(cap)` quasi-norms built on them.
//!
//! The program `min h^n sum f^s` subject to `(K f)(x) >= b(x)` on `E` and
//! `f >= 0` is solved through its concave dual
//!
//! ```text
//! D(lambda) = sum_E lambda b - (s - 1) h^n sum f_lambda^s,
//! f_lambda  = (K^T lambda / (s h^n))^(1/(s-1)),
//! ```
//!
//! maximised over `lambda >= 0` by projected Newton steps. Every iterate gives
//! a primal point `f_lambda / m` (rescaled to be exactly feasible) and a dual
//! value, so the reported gap is a certificate rather than an estimate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convolution::Convolver;
use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Field, Grid, Mask};
use crate::kernel::KernelTable;
use crate::params::{KernelKind, Params};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_BUDGET: usize = 20_000;
pub const DEFAULT_LEVELS: usize = 48;

/// Largest `|E|^2 N^n` for which Newton systems are formed and factorised densely.
const DENSE_WORK_LIMIT: f64 = 2.5e8;

/// Outcome of one capacity or obstacle solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityResult {
    /// `h^n sum f^s` for the returned feasible `f`.
    pub value: f64,
    /// Dual lower bound on the optimal value.
    pub lower: f64,
    #[serde(skip)]
    pub extremal: Option<Field>,
    /// `max_E (1 - K f / b)_+`.
    #[serde(rename = "residual")]
    pub feasibility_residual: f64,
    /// `value - lower`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The set reaches outside the middle half of the box, where truncating
    /// `f` to the box biases the capacity upward.
    pub near_boundary: bool,
    /// Dual multipliers per node (zero off the set).
    #[serde(skip)]
    pub multipliers: Vec<f64>,
}

impl CapacityResult {
    fn empty(grid: Grid) -> Self {
        Self {
            value: 0.0,
            lower: 0.0,
            extremal: Some(Field::zeros(grid)),
            feasibility_residual: 0.0,
            gap: 0.0,
            iterations: 0,
            converged: true,
            near_boundary: false,
            multipliers: vec![0.0; grid.len()],
        }
    }

    /// Turns a budget-limited result into [`Error::Budget`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Budget { iterations: self.iterations, value: self.value, gap: self.gap })
        }
    }

    pub fn extremal(&self) -> &Field {
        self.extremal.as_ref().expect("solver results always carry the extremal")
    }
}

/// Starting point for the dual iteration.
#[derive(Debug, Clone)]
pub enum Init {
    /// Multipliers proportional to the obstacle, optimally scaled.
    Scaled,
    /// Random positive multipliers from a seed, optimally scaled.
    Seeded(u64),
    /// Multipliers from an earlier solve (per node), optimally scaled.
    Warm(Vec<f64>),
}

/// Two-sided estimate of a variational quantity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
    /// Conditions that weaken the estimate, e.g. `heuristic-lower`.
    #[serde(rename = "heuristic_flags")]
    pub flags: Vec<String>,
    #[serde(skip)]
    pub witness: Option<Field>,
    #[serde(rename = "witness_ref", skip_serializing_if = "Option::is_none")]
    pub witness_ref: Option<String>,
}

impl NormEstimate {
    pub fn zero(grid: Grid) -> Self {
        Self { lower: 0.0, upper: 0.0, flags: Vec::new(), witness: Some(Field::zeros(grid)), witness_ref: None }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lower: c * self.lower,
            upper: c * self.upper,
            flags: self.flags.clone(),
            witness: self.witness.clone(),
            witness_ref: self.witness_ref.clone(),
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Solver bound to one grid, kernel and exponent `s`; reuse it across solves
/// to keep the kernel spectrum.
pub struct CapacitySolver {
    conv: Convolver,
    s: f64,
    tol: f64,
    budget: usize,
}

impl std::fmt::Debug for CapacitySolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CapacitySolver").field("s", &self.s).field("tol", &self.tol).finish_non_exhaustive()
    }
}

struct DualState {
    z: Vec<f64>,
    f: Vec<f64>,
    kf: Vec<f64>,
    grad: Vec<f64>,
    dual: f64,
    primal_sum: f64,
}

impl CapacitySolver {
    pub fn new(grid: Grid, params: &Params, kind: KernelKind, tol: f64) -> Result<Self> {
        params.validate(kind)?;
        if params.n != grid.dim() {
            return Err(Error::InvalidParams(format!("params n = {} but grid has dimension {}", params.n, grid.dim())));
        }
        let table = KernelTable::new(grid, kind, params.alpha)?;
        Self::from_table(table, params.s, tol)
    }

    pub fn from_table(table: KernelTable, s: f64, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParams(format!("tolerance {tol} must be positive")));
        }
        if !(s > 1.0) {
            return Err(Error::InvalidParams(format!("s = {s} must exceed 1")));
        }
        Ok(Self { conv: Convolver::new(table), s, tol, budget: DEFAULT_BUDGET })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.conv.grid()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn table(&self) -> &KernelTable {
        self.conv.table()
    }

    /// Applies the potential operator to raw node values.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.conv.apply_fast(f)
    }

    /// Applies the potential operator to a field.
    pub fn potential(&self, f: &Field) -> Result<Field> {
        self.conv.apply(f, crate::convolution::Method::Fast)
    }

    pub fn capacity(&self, set: &Mask) -> Result<CapacityResult> {
        self.capacity_with(set, Init::Scaled)
    }

    pub fn capacity_with(&self, set: &Mask, init: Init) -> Result<CapacityResult> {
        self.grid().check_same(set.grid())?;
        let b: Vec<f64> = set.members().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        self.obstacle(&b, init)
    }

    /// Minimises `h^n sum f^s` over `f >= 0` with `K f >= b` wherever `b > 0`.
    pub fn obstacle(&self, b: &[f64], init: Init) -> Result<CapacityResult> {
        let grid = *self.grid();
        if b.len() != grid.len() {
            return Err(Error::Format(format!("obstacle has {} values, grid {}", b.len(), grid.len())));
        }
        if let Some((idx, &value)) = b.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { idx, value });
        }
        let set: Vec<usize> = (0..b.len()).filter(|&i| b[i] > 0.0).collect();
        if set.is_empty() {
            return Ok(CapacityResult::empty(grid));
        }
        let be: Vec<f64> = set.iter().map(|&i| b[i]).collect();
        let mut lam: Vec<f64> = match init {
            Init::Scaled => be.clone(),
            Init::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                be.iter().map(|v| v * rng.gen_range(0.1..2.0)).collect()
            }
            Init::Warm(w) => {
                let l: Vec<f64> = set.iter().map(|&i| w.get(i).copied().unwrap_or(0.0).max(0.0)).collect();
                if l.iter().all(|&v| v == 0.0) {
                    be.clone()
                } else {
                    l
                }
            }
        };
        self.rescale(&mut lam, &set, &be);
        let near_boundary = {
            let members = (0..grid.len()).map(|i| b[i] > 0.0).collect();
            !Mask::new(grid, members)?.in_middle_half()
        };
        self.newton(&set, &be, lam, near_boundary)
    }

    fn embed(&self, set: &[usize], v: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid().len()];
        for (&i, &x) in set.iter().zip(v) {
            full[i] = x;
        }
        full
    }

    fn primal_from(&self, z: &[f64]) -> Vec<f64> {
        let c = self.s * self.grid().cell_volume();
        let e = 1.0 / (self.s - 1.0);
        z.iter().map(|&v| if v > 0.0 { (v / c).powf(e) } else { 0.0 }).collect()
    }

    fn state(&self, set: &[usize], be: &[f64], lam: &[f64]) -> DualState {
        let hn = self.grid().cell_volume();
        let z = self.apply(&self.embed(set, lam));
        let f = self.primal_from(&z);
        let kf_full = self.apply(&f);
        let kf: Vec<f64> = set.iter().map(|&i| kf_full[i]).collect();
        let grad: Vec<f64> = be.iter().zip(&kf).map(|(b, k)| b - k).collect();
        let fs: Vec<f64> = f.iter().map(|v| v.powf(self.s)).collect();
        let primal_sum = pairwise_sum(&fs);
        let lin: Vec<f64> = lam.iter().zip(be).map(|(l, b)| l * b).collect();
        let dual = pairwise_sum(&lin) - (self.s - 1.0) * hn * primal_sum;
        DualState { z, f, kf, grad, dual, primal_sum }
    }

    /// Replaces `lam` by the best positive multiple of itself.
    fn rescale(&self, lam: &mut [f64], set: &[usize], be: &[f64]) {
        let hn = self.grid().cell_volume();
        let z = self.apply(&self.embed(set, lam));
        let f = self.primal_from(&z);
        let a: f64 = lam.iter().zip(be).map(|(l, b)| l * b).sum();
        let fs: Vec<f64> = f.iter().map(|v| v.powf(self.s)).collect();
        let bsum = hn * pairwise_sum(&fs);
        if a > 0.0 && bsum > 0.0 {
            let c = (a / (self.s * bsum)).powf(self.s - 1.0);
            for l in lam.iter_mut() {
                *l *= c;
            }
        }
    }

    fn newton(&self, set: &[usize], be: &[f64], mut lam: Vec<f64>, near_boundary: bool) -> Result<CapacityResult> {
        let grid = *self.grid();
        let hn = grid.cell_volume();
        let m = set.len();
        let dense = (m * m) as f64 * grid.len() as f64 <= DENSE_WORK_LIMIT;
        let rows = if dense { Some(self.kernel_rows(set)) } else { None };
        let e = 1.0 / (self.s - 1.0);
        let stop = 1e-2 * self.tol;

        let mut st = self.state(set, be, &lam);
        let mut best_upper = f64::INFINITY;
        let mut best_f: Vec<f64> = Vec::new();
        let mut best_lower = f64::NEG_INFINITY;
        let mut best_lam = lam.clone();
        let mut work = 0usize;
        let mut iterations = 0usize;
        loop {
            // certificate from the current iterate
            let ratio = st.kf.iter().zip(be).map(|(k, b)| k / b).fold(f64::INFINITY, f64::min);
            if ratio > 0.0 && ratio.is_finite() {
                let upper = hn * st.primal_sum / ratio.powf(self.s);
                if upper < best_upper {
                    best_upper = upper;
                    best_f = st.f.iter().map(|v| v / ratio).collect();
                }
            }
            if st.dual > best_lower {
                best_lower = st.dual;
                best_lam = lam.clone();
            }
            let gap = best_upper - best_lower;
            if gap <= stop * best_upper || work >= self.budget {
                break;
            }
            iterations += 1;

            // free variables: not pinned at zero by a pushing gradient
            let lmax = lam.iter().copied().fold(0.0, f64::max);
            let eps = 1e-12 * lmax;
            let free: Vec<usize> = (0..m).filter(|&i| !(lam[i] <= eps && st.grad[i] < 0.0)).collect();
            let fprime: Vec<f64> = st
                .f
                .iter()
                .zip(&st.z)
                .map(|(f, z)| if *z > 0.0 { e * f / z } else { 0.0 })
                .collect();
            let gfree: Vec<f64> = free.iter().map(|&i| st.grad[i]).collect();
            let dfree = match &rows {
                Some(rows) => {
                    work += 1;
                    dense_direction(rows, &free, &fprime, &gfree)
                }
                None => {
                    let (d, used) = self.cg_direction(set, &free, &fprime, &gfree, self.budget.saturating_sub(work));
                    work += used.max(1);
                    d
                }
            };
            let mut dir = vec![0.0; m];
            for (k, &i) in free.iter().enumerate() {
                dir[i] = dfree[k];
            }
            for i in 0..m {
                if lam[i] <= eps && st.grad[i] < 0.0 {
                    dir[i] = -lam[i];
                }
            }
            // projected backtracking
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..50 {
                let trial: Vec<f64> = lam.iter().zip(&dir).map(|(l, d)| (l + step * d).max(0.0)).collect();
                if trial.iter().all(|&v| v == 0.0) {
                    step *= 0.5;
                    continue;
                }
                let ts = self.state(set, be, &trial);
                let pred: f64 = st.grad.iter().zip(trial.iter().zip(&lam)).map(|(g, (t, l))| g * (t - l)).sum();
                if ts.dual >= st.dual + 1e-4 * pred.max(0.0) && ts.dual.is_finite() {
                    accepted = Some((trial, ts));
                    break;
                }
                step *= 0.5;
            }
            work += 1;
            match accepted {
                Some((trial, ts)) => {
                    let improved = ts.dual > st.dual;
                    lam = trial;
                    st = ts;
                    if !improved {
                        break;
                    }
                }
                None => break,
            }
        }
        // final certificate for the last accepted iterate
        let ratio = st.kf.iter().zip(be).map(|(k, b)| k / b).fold(f64::INFINITY, f64::min);
        if ratio > 0.0 && ratio.is_finite() && hn * st.primal_sum / ratio.powf(self.s) < best_upper {
            best_f = st.f.iter().map(|v| v / ratio).collect();
        }
        if st.dual > best_lower {
            best_lower = st.dual;
            best_lam = lam.clone();
        }
        let extremal = Field::nonnegative(grid, best_f)?;
        let kf = self.apply(extremal.values());
        let residual = set.iter().zip(be).map(|(&i, b)| (1.0 - kf[i] / b).max(0.0)).fold(0.0, f64::max);
        let value = hn * pairwise_sum(&extremal.values().iter().map(|v| v.powf(self.s)).collect::<Vec<_>>());
        let lower = best_lower.max(0.0).min(value);
        let gap = value - lower;
        Ok(CapacityResult {
            value,
            lower,
            extremal: Some(extremal),
            feasibility_residual: residual,
            gap,
            iterations,
            converged: gap <= self.tol * value && residual <= self.tol,
            near_boundary,
            multipliers: self.embed(set, &best_lam),
        })
    }

    /// Rows `h^n k(x - y)` of the operator for the nodes `x` of the set.
    fn kernel_rows(&self, set: &[usize]) -> DMatrix<f64> {
        let grid = *self.grid();
        let hn = grid.cell_volume();
        let table = self.table();
        let dim = grid.dim();
        DMatrix::from_fn(set.len(), grid.len(), |r, c| {
            let mi = grid.multi_index(set[r]);
            let mj = grid.multi_index(c);
            let mut d = [0isize; 3];
            for a in 0..dim {
                d[a] = mi[a] as isize - mj[a] as isize;
            }
            hn * table.at(d)
        })
    }

    /// Conjugate gradients on `K_F diag(f') K_F^T d = g` with FFT products.
    fn cg_direction(&self, set: &[usize], free: &[usize], fprime: &[f64], g: &[f64], budget: usize) -> (Vec<f64>, usize) {
        let hv = |v: &[f64]| -> Vec<f64> {
            let mut lam = vec![0.0; set.len()];
            for (k, &i) in free.iter().enumerate() {
                lam[i] = v[k];
            }
            let z = self.apply(&self.embed(set, &lam));
            let w: Vec<f64> = z.iter().zip(fprime).map(|(a, b)| a * b).collect();
            let y = self.apply(&w);
            free.iter().map(|&i| y[set[i]]).collect()
        };
        let nf = free.len();
        let mut x = vec![0.0; nf];
        let mut r = g.to_vec();
        let mut p = r.clone();
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let mut rr = g2;
        let max_iter = nf.clamp(1, 400).min(budget.max(1));
        let mut used = 0;
        for _ in 0..max_iter {
            if rr <= 1e-20 * g2 {
                break;
            }
            let ap = hv(&p);
            used += 1;
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                break;
            }
            let a = rr / pap;
            for k in 0..nf {
                x[k] += a * p[k];
                r[k] -= a * ap[k];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..nf {
                p[k] = r[k] + beta * p[k];
            }
        }
        if used == 0 {
            return (g.to_vec(), 1);
        }
        (x, used)
    }
}

/// Newton direction from a Cholesky factorisation of `A diag(f') A^T`.
fn dense_direction(rows: &DMatrix<f64>, free: &[usize], fprime: &[f64], g: &[f64]) -> Vec<f64> {
    let nf = free.len();
    let ncol = rows.ncols();
    let sq: Vec<f64> = fprime.iter().map(|v| v.sqrt()).collect();
    let a = DMatrix::from_fn(nf, ncol, |r, c| rows[(free[r], c)] * sq[c]);
    let mut h = &a * a.transpose();
    let trace: f64 = (0..nf).map(|i| h[(i, i)]).sum();
    let ridge = 1e-14 * trace / nf as f64;
    for i in 0..nf {
        h[(i, i)] += ridge;
    }
    let rhs = DVector::from_column_slice(g);
    match h.clone().cholesky() {
        Some(ch) => ch.solve(&rhs).iter().copied().collect(),
        None => match h.lu().solve(&rhs) {
            Some(x) => x.iter().copied().collect(),
            None => g.to_vec(),
        },
    }
}

/// `cap(E)` for a node set.
pub fn capacity(set: &Mask, params: &Params, kind: KernelKind, tol: f64) -> Result<CapacityResult> {
    CapacitySolver::new(*set.grid(), params, kind, tol)?.capacity(set)
}

/// Capacities of the superlevel sets of `|g|`, as the step function
/// `t -> cap({|g| > t})`.
///
/// On a grid this function only changes at node values `v_0 < ... < v_{D-1}`:
/// on `[v_{k-1}, v_k)` the set is `{|g| >= v_k}`. The sets at the chosen
/// thresholds are solved; the steps in between are interpolated in node
/// count, linearly in `cap^(1/e)` with `e = 1 - alpha s / n`, the exponent
/// relating the capacity of a ball to its volume. With at least as many
/// levels as distinct values every step is solved and the integral is exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelProfile {
    /// Solved thresholds, increasing, ending at `max |g|`.
    pub thresholds: Vec<f64>,
    /// `cap({|g| > t_j})`; the last entry is the empty set.
    pub caps: Vec<f64>,
    /// `(v_k, c_k)`: the capacity is `c_k` on `[v_{k-1}, v_k)`, with `v_{-1} = 0`.
    pub steps: Vec<(f64, f64)>,
    /// `cap({|g| > 0})`.
    pub support_cap: f64,
    pub max_gap: f64,
    pub converged: bool,
}

impl LevelProfile {
    /// `int_0^inf cap({|g|^q > t}) dt`, reusing the sets of `|g|` with levels `v_k^q`.
    pub fn choquet_of_power(&self, q: f64) -> f64 {
        let mut prev = 0.0;
        let mut total = 0.0;
        for &(v, c) in &self.steps {
            let vq = v.powf(q);
            total += c * (vq - prev);
            prev = vq;
        }
        total
    }
}

/// Sorted distinct positive values of `g`.
fn distinct_values(g: &Field) -> Vec<f64> {
    let mut values: Vec<f64> = g.values().iter().copied().filter(|&v| v > 0.0).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// Indices into `values` of at most `m` thresholds, always including the
/// first value `>= t1` and the maximum: every index when they fit, otherwise
/// half log-spaced and half uniform targets snapped to node values, with any
/// remaining budget spent on splitting the widest index gaps.
fn choose_levels(values: &[f64], t1: f64, m: usize) -> Vec<usize> {
    let first = values.partition_point(|&v| v < t1);
    let top = values.len() - 1;
    if top + 1 - first <= m {
        return (first..=top).collect();
    }
    let gmax = values[top];
    let snap = |t: f64| values.partition_point(|&v| v < t).min(top);
    let half = m / 2;
    let mut idx = vec![first, top];
    for j in 1..half {
        let x = j as f64 / half as f64;
        idx.push(snap(t1 * (gmax / t1).powf(x)));
        idx.push(snap(t1 + (gmax - t1) * x));
    }
    idx.sort_unstable();
    idx.dedup();
    while idx.len() < m {
        let (k, w) = idx
            .windows(2)
            .enumerate()
            .map(|(k, w)| (k, w[1] - w[0]))
            .max_by_key(|&(k, w)| (w, std::cmp::Reverse(k)))
            .expect("two indices");
        if w < 2 {
            break;
        }
        idx.insert(k + 1, idx[k] + w / 2);
    }
    idx
}

/// Capacity profile of `|g|` used by every Choquet-type functional.
pub fn level_profile(solver: &CapacitySolver, g: &Field, levels: usize) -> Result<LevelProfile> {
    solver.grid().check_same(g.grid())?;
    let g = g.abs();
    let values = distinct_values(&g);
    let Some(&gmax) = values.last() else {
        return Ok(LevelProfile {
            thresholds: Vec::new(),
            caps: Vec::new(),
            steps: Vec::new(),
            support_cap: 0.0,
            max_gap: 0.0,
            converged: true,
        });
    };
    let support = g.support();
    let sup = solver.capacity(&support)?;
    let mut warm = sup.multipliers.clone();
    let mut max_gap = sup.gap;
    let mut converged = sup.converged;
    let idx = choose_levels(&values, values[0].max(gmax * 1e-8), levels.max(2));

    // known[k] = cap({|g| >= v_k}); index D stands for the empty set
    let d = values.len();
    let mut known: Vec<Option<f64>> = vec![None; d + 1];
    known[0] = Some(sup.value);
    known[d] = Some(0.0);
    let mut thresholds = Vec::with_capacity(idx.len());
    let mut caps = Vec::with_capacity(idx.len());
    for &i in &idx {
        let t = values[i];
        thresholds.push(t);
        if i == d - 1 {
            caps.push(0.0);
            continue;
        }
        let set = g.superlevel(t);
        let res = solver.capacity_with(&set, Init::Warm(warm.clone()))?;
        max_gap = max_gap.max(res.gap);
        converged &= res.converged;
        warm = res.multipliers.clone();
        caps.push(res.value);
        known[i + 1] = Some(res.value);
    }

    // node counts of {|g| >= v_k}
    let mut sorted: Vec<f64> = g.values().iter().copied().filter(|&v| v > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let count = |k: usize| -> f64 {
        if k == d {
            0.0
        } else {
            (sorted.len() - sorted.partition_point(|&v| v < values[k])) as f64
        }
    };
    let grid = solver.grid();
    let e = (1.0 - solver.table().alpha() * solver.s() / grid.dim() as f64).max(0.05);
    let mut steps = Vec::with_capacity(d);
    let mut a = 0;
    for k in 0..d {
        let c = match known[k] {
            Some(c) => {
                a = k;
                c
            }
            None => {
                let b = (k + 1..=d).find(|&j| known[j].is_some()).expect("the empty set is known");
                let (ca, cb) = (known[a].expect("known"), known[b].expect("known"));
                let (na, nb, n) = (count(a), count(b), count(k));
                let lam = (n - nb) / (na - nb);
                let ratio = if ca > 0.0 { (cb / ca).min(1.0) } else { 0.0 };
                ca * (lam + (1.0 - lam) * ratio.powf(1.0 / e)).powf(e)
            }
        };
        steps.push((values[k], c));
    }
    Ok(LevelProfile { thresholds, caps, steps, support_cap: sup.value, max_gap, converged })
}

/// `int_0^inf cap({|g| > t}) dt` by the layer-cake formula over a [`LevelProfile`].
pub fn choquet_integral(solver: &CapacitySolver, g: &Field, levels: usize) -> Result<f64> {
    let prof = level_profile(solver, g, levels)?;
    if !prof.converged {
        return Err(Error::Budget { iterations: 0, value: prof.choquet_of_power(1.0), gap: prof.max_gap });
    }
    Ok(prof.choquet_of_power(1.0))
}

/// `(int |u|^q dcap)^(1/q)`.
pub fn lq_cap_norm(solver: &CapacitySolver, u: &Field, q: f64, levels: usize) -> Result<f64> {
    let prof = level_profile(solver, u, levels)?;
    if !prof.converged {
        return Err(Error::Budget { iterations: 0, value: prof.choquet_of_power(q), gap: prof.max_gap });
    }
    Ok(prof.choquet_of_power(q).powf(1.0 / q))
}

/// `inf { ||f||_s^r : f >= 0, K f >= |u|^(1/r) }` with the optimal `f` as witness.
pub fn f_norm(solver: &CapacitySolver, u: &Field, r: f64) -> Result<(NormEstimate, CapacityResult)> {
    solver.grid().check_same(u.grid())?;
    if !(r > 0.0) {
        return Err(Error::InvalidParams(format!("r = {r} must be positive")));
    }
    let b: Vec<f64> = u.values().iter().map(|v| if *v == 0.0 { 0.0 } else { v.abs().powf(1.0 / r) }).collect();
    let res = solver.obstacle(&b, Init::Scaled)?;
    let e = r / solver.s();
    let mut flags = Vec::new();
    if !res.converged {
        flags.push("budget".to_string());
    }
    if res.near_boundary {
        flags.push("near-boundary".to_string());
    }
    let est = NormEstimate {
        lower: res.lower.powf(e),
        upper: res.value.powf(e),
        flags,
        witness: res.extremal.clone(),
        witness_ref: None,
    };
    Ok((est, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(alpha: f64, s: f64) -> Params {
        Params::new(1, alpha, s, 1.0, 2.0, 1.0, KernelKind::Riesz).unwrap()
    }

    fn solver(big_n: usize, alpha: f64, s: f64) -> CapacitySolver {
        let g = Grid::new(1, 1.0, big_n).unwrap();
        CapacitySolver::new(g, &params(alpha, s), KernelKind::Riesz, 1e-8).unwrap()
    }

    #[test]
    fn empty_set_has_zero_capacity() {
        let sv = solver(32, 0.4, 2.0);
        let r = sv.capacity(&Mask::empty(*sv.grid())).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.extremal().is_zero());
    }

    #[test]
    fn certificate_and_feasibility() {
        for s in [1.5, 2.0, 3.0] {
            let sv = solver(64, 0.3, s);
            let e = Mask::ball(*sv.grid(), &[0.1], 0.3);
            let r = sv.capacity(&e).unwrap();
            assert!(r.converged, "s = {s}: {r:?}");
            assert!(r.feasibility_residual <= 1e-12);
            assert!(r.lower <= r.value && r.gap <= 1e-8 * r.value);
            let kf = sv.apply(r.extremal().values());
            for i in e.indices() {
                assert!(kf[i] >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn initialisations_agree() {
        let sv = solver(64, 0.3, 2.5);
        let e = Mask::ball(*sv.grid(), &[0.0], 0.25);
        let a = sv.capacity_with(&e, Init::Scaled).unwrap();
        let b = sv.capacity_with(&e, Init::Seeded(99)).unwrap();
        let diff = a.extremal().zip_with(b.extremal(), |x, y| x - y).unwrap();
        assert!(diff.lp_norm(2.5) <= 10.0 * 1e-8);
    }

    #[test]
    fn obstacle_scaling() {
        let sv = solver(64, 0.4, 2.0);
        let e = Mask::ball(*sv.grid(), &[0.0], 0.25);
        let base = sv.capacity(&e).unwrap().value;
        let u = Field::indicator(&e).scale(3.0);
        let (est, _) = f_norm(&sv, &u, 1.0).unwrap();
        // ||f||_s^r with f scaled by 3 is 3 cap^(1/s)
        assert!((est.upper / (3.0 * base.sqrt()) - 1.0).abs() < 1e-6);
        let (zero, _) = f_norm(&sv, &Field::zeros(*sv.grid()), 1.0).unwrap();
        assert_eq!(zero.upper, 0.0);
    }

    #[test]
    fn choquet_of_indicator() {
        let sv = solver(64, 0.4, 2.0);
        let e = Mask::ball(*sv.grid(), &[0.0], 0.3);
        let cap = sv.capacity(&e).unwrap().value;
        for c in [1.0, 2.5] {
            let v = choquet_integral(&sv, &Field::indicator(&e).scale(c), DEFAULT_LEVELS).unwrap();
            assert!((v - c * cap).abs() <= 2.0 * 1e-8 * c * cap.max(1.0));
        }
        assert!((lq_cap_norm(&sv, &Field::indicator(&e), 2.0, 8).unwrap() - cap.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn choquet_two_level_decomposition() {
        let sv = solver(64, 0.4, 2.0);
        let g = *sv.grid();
        let a = Mask::ball(g, &[0.0], 0.15);
        let b = Mask::ball(g, &[0.05], 0.4);
        let u = Field::indicator(&a).add(&Field::indicator(&b)).unwrap();
        let exact = sv.capacity(&a).unwrap().value + sv.capacity(&b).unwrap().value;
        let v = choquet_integral(&sv, &u, DEFAULT_LEVELS).unwrap();
        assert!((v / exact - 1.0).abs() < 0.01, "{v} vs {exact}");
    }

    #[test]
    fn exact_layer_cake_when_levels_cover_values() {
        // three-valued function: the integral is a sum of three solved capacities
        let sv = solver(32, 0.4, 2.0);
        let g = *sv.grid();
        let a = Mask::ball(g, &[0.0], 0.1);
        let b = Mask::ball(g, &[0.0], 0.25);
        let c = Mask::ball(g, &[0.1], 0.4);
        let u = Field::indicator(&a).add(&Field::indicator(&b)).unwrap().add(&Field::indicator(&c)).unwrap();
        let oracle: f64 = [&a, &b, &c].iter().map(|m| sv.capacity(m).unwrap().value).sum::<f64>();
        let v = choquet_integral(&sv, &u, 8).unwrap();
        assert!((v / oracle - 1.0).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn doubling_levels_is_stable() {
        let sv = solver(128, 0.4, 2.0);
        let g = *sv.grid();
        let u = Field::from_fn(g, |x| (-(x[0] * x[0]) / 0.05).exp()).unwrap();
        let a = choquet_integral(&sv, &u, 24).unwrap();
        let b = choquet_integral(&sv, &u, 48).unwrap();
        assert!((a / b - 1.0).abs() < 0.01, "{a} vs {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn monotone_and_subadditive(c1 in -0.3f64..0.3, r1 in 0.05f64..0.2, c2 in -0.3f64..0.3, r2 in 0.05f64..0.2) {
            let sv = solver(32, 0.4, 2.0);
            let g = *sv.grid();
            let a = Mask::ball(g, &[c1], r1);
            let b = Mask::ball(g, &[c2], r2);
            let u = a.union(&b).unwrap();
            let tol = sv.tol();
            let ca = sv.capacity(&a).unwrap().value;
            let cb = sv.capacity(&b).unwrap().value;
            let cu = sv.capacity(&u).unwrap().value;
            prop_assert!(ca <= cu + 2.0 * tol * cu.max(1.0));
            prop_assert!(cb <= cu + 2.0 * tol * cu.max(1.0));
            prop_assert!(cu <= ca + cb + 4.0 * tol * cu.max(1.0));
        }

        #[test]
        fn chosen_levels_are_valid(mut vals in proptest::collection::vec(1e-6f64..10.0, 1..200), m in 2usize..40) {
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let t1 = vals[0].max(1e-8 * vals[vals.len() - 1]);
            let idx = choose_levels(&vals, t1, m);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(*idx.last().unwrap(), vals.len() - 1);
            prop_assert!(idx.len() <= m.max(2));
            prop_assert!(vals[idx[0]] >= t1);
        }
    }
}
