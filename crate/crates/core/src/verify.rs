//! Empirical constants for the capacitary inequalities.
//!
//! Each check evaluates both sides of one inequality on a seeded family and
//! reports the ratios. Nothing is compared with a numeric target: the
//! suite asserts finiteness, exact degenerate cases, homogeneity and
//! stability of the largest ratio under grid refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{f_norm, level_profile, CapacitySolver, DEFAULT_LEVELS, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::families::{functions, measures, FamilyName, DEFAULT_COUNT, DEFAULT_SEED};
use crate::grid::{Field, Grid, Mask};
use crate::params::{KernelKind, Params};
use crate::potential::{wolff_at, wolff_potential, Atom, Measure};
use crate::spaces::{NVariant, Spaces};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    /// Choquet integral of `(K f)^s` against `int f^s`.
    Csim,
    /// Choquet integral of `(K f)^q` against `int f^s (K f)^{q-s}`.
    Adams,
    /// `||K f||_{L^q(cap)}` against `(int f^s w^{q-s})^{1/s}`.
    Main2,
    /// `(K f)^t` against `K[f (K f)^{t-1}]`, pointwise.
    Ibp,
    /// Global maximum of a Wolff potential against its maximum on the support.
    Boundedness,
    /// Pairwise ratios of the four equivalent trace quantities.
    UpperTri,
    /// `cap({W > a t})` against `t^{1-s} mu({W > t})`.
    WolffWeak,
    /// `L^q(cap)` norm against the lambda and beta functionals.
    Newnorm2,
    /// `KV_q` against `O~_q`.
    KvEquiv,
    /// `int |f g|` against `||f||_M ||g||_N`.
    Main3,
    /// `L^{s/r}(cap)` norm of the iterated-potential weights.
    SecondTheorem,
    /// Obstacle norm against the `L^{s/r}(cap)` norm.
    FnormSandwich,
    /// `|E|^{1 - alpha s/n}` against `cap(E)`.
    Lebesgue,
}

impl InequalityId {
    pub const ALL: [InequalityId; 13] = [
        InequalityId::Csim,
        InequalityId::Adams,
        InequalityId::Main2,
        InequalityId::Ibp,
        InequalityId::Boundedness,
        InequalityId::UpperTri,
        InequalityId::WolffWeak,
        InequalityId::Newnorm2,
        InequalityId::KvEquiv,
        InequalityId::Main3,
        InequalityId::SecondTheorem,
        InequalityId::FnormSandwich,
        InequalityId::Lebesgue,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InequalityId::Csim => "csim",
            InequalityId::Adams => "adams",
            InequalityId::Main2 => "main2",
            InequalityId::Ibp => "ibp",
            InequalityId::Boundedness => "boundedness",
            InequalityId::UpperTri => "upper_tri",
            InequalityId::WolffWeak => "wolff_weak",
            InequalityId::Newnorm2 => "newnorm2",
            InequalityId::KvEquiv => "kv_equiv",
            InequalityId::Main3 => "main3",
            InequalityId::SecondTheorem => "secondtheorem",
            InequalityId::FnormSandwich => "fnorm_sandwich",
            InequalityId::Lebesgue => "lebesgue",
        }
    }
}

impl std::str::FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InequalityId::ALL
            .iter()
            .copied()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown check `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRatio {
    pub sample_id: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPoint {
    pub points_per_axis: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// Ratios `lhs / rhs` of one inequality over a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub inequality_id: InequalityId,
    /// Distinguishes reports of one check, e.g. `q=1.5` or `wolff_mu/wolff_cap`.
    pub label: String,
    pub params: Params,
    pub kind: KernelKind,
    pub family_seed: u64,
    pub grid: Grid,
    pub samples: Vec<SampleRatio>,
    /// Samples with `lhs = rhs = 0`.
    pub skipped: Vec<usize>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub refinement: Vec<RefinementPoint>,
}

impl ConstantReport {
    fn build(
        id: InequalityId,
        label: impl Into<String>,
        ctx: &Harness,
        pairs: Vec<(usize, f64, f64)>,
    ) -> Result<Self> {
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        for (sample_id, lhs, rhs) in pairs {
            if rhs == 0.0 {
                if lhs == 0.0 {
                    skipped.push(sample_id);
                    continue;
                }
                return Err(Error::Domain(format!(
                    "{} sample {sample_id}: lhs {lhs} with zero rhs",
                    id.as_str()
                )));
            }
            samples.push(SampleRatio { sample_id, lhs, rhs, ratio: lhs / rhs });
        }
        samples.sort_by_key(|s| s.sample_id);
        let max_ratio = samples.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
        let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
        let points_per_axis = ctx.grid.points_per_axis();
        Ok(Self {
            inequality_id: id,
            label: label.into(),
            params: ctx.params,
            kind: ctx.kind,
            family_seed: ctx.seed,
            grid: ctx.grid,
            samples,
            skipped,
            max_ratio,
            min_ratio,
            refinement: vec![RefinementPoint { points_per_axis, max_ratio, min_ratio }],
        })
    }

    /// All ratios finite and at least one sample evaluated.
    pub fn is_finite(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.ratio.is_finite() && s.ratio >= 0.0)
    }

    /// `max / min` ratio, the width of an equivalence band.
    pub fn band(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }

    /// Largest relative change of `max_ratio` between consecutive refinements.
    pub fn drift(&self) -> f64 {
        self.refinement.windows(2).map(|w| (w[1].max_ratio / w[0].max_ratio - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest relative change of `min_ratio` between consecutive refinements.
    pub fn min_drift(&self) -> f64 {
        self.refinement.windows(2).map(|w| (w[1].min_ratio / w[0].min_ratio - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `sample_id,lhs,rhs,ratio` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,lhs,rhs,ratio\n");
        for s in &self.samples {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", s.sample_id, s.lhs, s.rhs, s.ratio));
        }
        out
    }
}

/// Configuration shared by all checks.
#[derive(Debug, Clone)]
pub struct Harness {
    pub grid: Grid,
    pub params: Params,
    pub kind: KernelKind,
    pub seed: u64,
    pub count: usize,
    pub tol: f64,
    pub levels: usize,
}

impl Harness {
    /// `n = 1`, `alpha = 0.4`, `s = 2`, `q = 1.5`, `p = 2`, `r = 1` on `[-2, 2]`
    /// with 128 nodes.
    pub fn default_1d() -> Self {
        Self {
            grid: Grid::new(1, 2.0, 128).expect("valid grid"),
            params: Params::new(1, 0.4, 2.0, 1.5, 2.0, 1.0, KernelKind::Riesz).expect("valid params"),
            kind: KernelKind::Riesz,
            seed: DEFAULT_SEED,
            count: DEFAULT_COUNT,
            tol: DEFAULT_TOL,
            levels: DEFAULT_LEVELS,
        }
    }

    pub fn new(grid: Grid, params: Params, kind: KernelKind) -> Result<Self> {
        params.validate(kind)?;
        if params.n != grid.dim() {
            return Err(Error::InvalidParams(format!("params n = {} but grid has dimension {}", params.n, grid.dim())));
        }
        Ok(Self { grid, params, kind, ..Self::default_1d() })
    }

    pub fn with_grid(&self, points_per_axis: usize) -> Result<Self> {
        let grid = Grid::new(self.grid.dim(), self.grid.half_width(), points_per_axis)?;
        Ok(Self { grid, ..self.clone() })
    }

    pub fn with_params(&self, params: Params) -> Self {
        Self { params, ..self.clone() }
    }

    pub fn with_count(&self, count: usize) -> Self {
        Self { count, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn solver(&self) -> Result<CapacitySolver> {
        CapacitySolver::new(self.grid, &self.params, self.kind, self.tol)
    }

    pub fn spaces(&self) -> Result<Spaces> {
        Ok(Spaces::new(self.grid, &self.params, self.kind, self.tol)?.with_levels(self.levels))
    }

    pub fn functions(&self) -> Result<Vec<Field>> {
        functions(FamilyName::Mixed, self.seed, self.count, &self.grid)
    }

    fn scaled(fs: Vec<Field>, lambda: f64) -> Vec<Field> {
        fs.into_iter().map(|f| f.scale(lambda)).collect()
    }

    /// Adams-type ratios for `q >= 1` over `lambda` times the default family.
    pub fn check_adams(&self, q: f64, lambda: f64) -> Result<ConstantReport> {
        self.adams_like(InequalityId::Adams, q, lambda)
    }

    /// The `q = s` case of [`Harness::check_adams`].
    pub fn check_csim(&self, lambda: f64) -> Result<ConstantReport> {
        self.adams_like(InequalityId::Csim, self.params.s, lambda)
    }

    fn adams_like(&self, id: InequalityId, q: f64, lambda: f64) -> Result<ConstantReport> {
        if q < 1.0 {
            return Err(Error::InvalidParams(format!("q = {q} must be at least 1")));
        }
        let solver = self.solver()?;
        let s = self.params.s;
        let hn = self.grid.cell_volume();
        let fs = Self::scaled(self.functions()?, lambda);
        let pairs = fs
            .par_iter()
            .enumerate()
            .map(|(i, f)| -> Result<(usize, f64, f64)> {
                let kf = solver.potential(f)?;
                let prof = level_profile(&solver, &kf, self.levels)?;
                if !prof.converged {
                    return Err(Error::Budget { iterations: 0, value: prof.choquet_of_power(q), gap: prof.max_gap });
                }
                let lhs = prof.choquet_of_power(q);
                // the integrand vanishes where f does
                let rhs: f64 = f
                    .values()
                    .iter()
                    .zip(kf.values())
                    .map(|(&fv, &kv)| if fv == 0.0 { 0.0 } else { fv.powf(s) * kv.powf(q - s) })
                    .sum::<f64>()
                    * hn;
                Ok((i, lhs, rhs))
            })
            .collect::<Result<Vec<_>>>()?;
        ConstantReport::build(id, format!("q={q}"), self, pairs)
    }

    /// Weighted bound with either the normalised constant weight or the
    /// weight `(K phi)^{s/q}` built from the obstacle extremal of `f^{q/s}`.
    pub fn check_main2(&self, q: f64, weight: Main2Weight, lambda: f64) -> Result<ConstantReport> {
        let s = self.params.s;
        if !(q >= 1.0 && q < s) {
            return Err(Error::InvalidParams(format!("weighted bound needs 1 <= q < s, got {q}")));
        }
        let sp = self.spaces()?;
        let solver = sp.solver();
        let hn = self.grid.cell_volume();
        let box_norm = sp.cap_norm(&Field::constant(self.grid, 1.0), q)?;
        let fs = Self::scaled(self.functions()?, lambda);
        let pairs = fs
            .par_iter()
            .enumerate()
            .map(|(i, f)| -> Result<(usize, f64, f64)> {
                let kf = solver.potential(f)?;
                let lhs = sp.cap_norm(&kf, q)?;
                let w = match weight {
                    Main2Weight::Constant => Field::constant(self.grid, 1.0 / box_norm),
                    Main2Weight::Extremal => {
                        let (_, res) = f_norm(solver, f, s / q)?;
                        let w = solver.potential(res.extremal())?.map(|v| v.powf(s / q))?;
                        let nrm = sp.cap_norm(&w, q)?;
                        w.scale(1.0 / nrm)
                    }
                };
                let rhs = f
                    .values()
                    .iter()
                    .zip(w.values())
                    .map(|(&fv, &wv)| if fv == 0.0 { 0.0 } else { fv.powf(s) * wv.powf(q - s) })
                    .sum::<f64>()
                    * hn;
                Ok((i, lhs, rhs.powf(1.0 / s)))
            })
            .collect::<Result<Vec<_>>>()?;
        ConstantReport::build(InequalityId::Main2, format!("q={q},w={}", weight.as_str()), self, pairs)
    }

    /// Per sample, `max_x (K f)^t / K[f (K f)^{t-1}]`.
    pub fn check_ibp(&self, t: f64, lambda: f64) -> Result<ConstantReport> {
        if t < 1.0 {
            return Err(Error::InvalidParams(format!("t = {t} must be at least 1")));
        }
        let solver = self.solver()?;
        let fs = Self::scaled(self.functions()?, lambda);
        let pairs = fs
            .par_iter()
            .enumerate()
            .map(|(i, f)| -> Result<(usize, f64, f64)> {
                let kf = solver.potential(f)?;
                let inner = f.zip_with(&kf, |fv, kv| if fv == 0.0 { 0.0 } else { fv * kv.powf(t - 1.0) })?;
                let rhs = solver.potential(&inner)?;
                let mut best = (0.0, 0.0, 1.0);
                for (&k, &r) in kf.values().iter().zip(rhs.values()) {
                    let lhs = k.powf(t);
                    if r > 0.0 && lhs / r > best.0 {
                        best = (lhs / r, lhs, r);
                    }
                }
                Ok((i, best.1, best.2))
            })
            .collect::<Result<Vec<_>>>()?;
        ConstantReport::build(InequalityId::Ibp, format!("t={t}"), self, pairs)
    }

    /// `max W^R mu / (2^beta max_{supp mu} W^{2R} mu)` with `beta = (n - alpha s)/(s - 1)`.
    pub fn check_boundedness(&self, mus: &[Measure], radius: Option<f64>) -> Result<ConstantReport> {
        let (alpha, s) = (self.params.alpha, self.params.s);
        let factor = 2f64.powf(self.params.wolff_exponent());
        let pairs = mus
            .iter()
            .enumerate()
            .map(|(i, mu)| -> Result<(usize, f64, f64)> {
                let w = wolff_potential(mu, alpha, s, radius)?;
                let lhs = w.max();
                let wide = radius.map(|r| 2.0 * r);
                let mut sup = 0.0f64;
                for node in mu.support().indices() {
                    sup = sup.max(wolff_at(mu, &self.grid.point(node), alpha, s, wide)?);
                }
                Ok((i, lhs, factor * sup))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = match radius {
            Some(r) => format!("R={r}"),
            None => "R=inf".to_string(),
        };
        ConstantReport::build(InequalityId::Boundedness, label, self, pairs)
    }

    /// The four trace quantities of a measure for exponent `r < s`.
    pub fn trace_quantities(&self, sp: &Spaces, mu: &Measure, r: f64) -> Result<TraceQuantities> {
        let s = self.params.s;
        if !(r > 0.0 && r < s) {
            return Err(Error::InvalidParams(format!("trace quantities need 0 < r < s, got {r}")));
        }
        if mu.is_zero() {
            return Ok(TraceQuantities::default());
        }
        let masses = mu.node_masses();
        let (a1, h) = sp.trace_constant(&masses, r, &[])?;
        let sp_r = Spaces::new(self.grid, &self.params.with_r(r), self.kind, self.tol)?.with_levels(self.levels);
        let radius = match self.kind {
            KernelKind::Riesz => None,
            KernelKind::Bessel => Some(1.0),
        };
        let w = wolff_potential(mu, self.params.alpha, s, radius)?;
        let e = (s - 1.0) * r / (s - r);
        let wolff_mu = masses
            .iter()
            .zip(w.values())
            .map(|(m, wv)| if *m > 0.0 { m * wv.powf(e) } else { 0.0 })
            .sum::<f64>()
            .powf((s - r) / s);
        let ws = w.map(|v| v.powf(s - 1.0))?;
        let wolff_cap = sp.cap_norm(&ws, s / (s - r))?;
        // dual pairing: sampled u against their L^{s/r}(cap) norms
        let kh = sp.potential(&h)?;
        let us = [
            kh.map(|v| v.powf(r))?,
            w.map(|v| v.powf(e))?,
            Field::indicator(&mu.support()),
        ];
        let mut a2 = 0.0f64;
        for u in &us {
            let nrm = sp_r.cap_norm(u, s / r)?;
            if nrm > 0.0 {
                let pairing: f64 = masses.iter().zip(u.values()).map(|(m, v)| m * v).sum();
                a2 = a2.max(pairing / nrm);
            }
        }
        Ok(TraceQuantities { trace: a1, pairing: a2, wolff_mu, wolff_cap })
    }

    /// Pairwise ratios of the four trace quantities on density measures.
    pub fn check_upper_tri(&self, r: f64, lambda: f64) -> Result<Vec<ConstantReport>> {
        let sp = self.spaces()?;
        let mus: Vec<Measure> = measures(FamilyName::Densities, self.seed, self.count, &self.grid)?
            .into_iter()
            .map(|m| m.scale(lambda))
            .collect::<Result<_>>()?;
        let qs = mus
            .par_iter()
            .map(|mu| self.trace_quantities(&sp, mu, r))
            .collect::<Result<Vec<_>>>()?;
        let names = TraceQuantities::NAMES;
        let mut out = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                let pairs = qs.iter().enumerate().map(|(i, t)| (i, t.get(a), t.get(b))).collect();
                out.push(ConstantReport::build(
                    InequalityId::UpperTri,
                    format!("r={r},{}/{}", names[a], names[b]),
                    self,
                    pairs,
                )?);
            }
        }
        Ok(out)
    }

    /// Wolff-to-measure quantity of a unit point mass at `position`, numerically
    /// from the grid node carrying it and in closed form at that node.
    pub fn dirac_wolff_mu(&self, position: [f64; 3], r: f64) -> Result<(f64, f64)> {
        let s = self.params.s;
        let mu = Measure::dirac(self.grid, position, 1.0)?;
        let node = mu.atom_nodes()[0];
        let x = self.grid.point(node);
        let radius = match self.kind {
            KernelKind::Riesz => None,
            KernelKind::Bessel => Some(1.0),
        };
        let numeric = wolff_at(&mu, &x, self.params.alpha, s, radius)?;
        let d = crate::grid::distance(self.grid.dim(), &x, &position);
        let beta = self.params.wolff_exponent();
        let exact = match radius {
            None => d.powf(-beta) / beta,
            Some(rr) if d < rr => (d.powf(-beta) - rr.powf(-beta)) / beta,
            Some(_) => 0.0,
        };
        let e = (s - 1.0) * r / s;
        Ok((numeric.powf(e), exact.powf(e)))
    }

    /// `cap({W mu > a t})` and `t^{1-s} mu({W mu > t})`.
    pub fn wolff_weak(&self, mu: &Measure, t: f64, a: f64) -> Result<(f64, f64)> {
        let solver = self.solver()?;
        let w = wolff_potential(mu, self.params.alpha, self.params.s, None)?;
        Self::weak_pair(&solver, mu, &w, t, a, self.params.s)
    }

    fn weak_pair(solver: &CapacitySolver, mu: &Measure, w: &Field, t: f64, a: f64, s: f64) -> Result<(f64, f64)> {
        let lhs = solver.capacity(&w.superlevel(a * t))?.require_converged()?.value;
        let rhs = t.powf(1.0 - s) * mu.mass_of(&w.superlevel(t))?;
        Ok((lhs, rhs))
    }

    /// Sweeps `a in {2, 4, 8}` and the given levels `t` for one measure.
    pub fn check_wolff_weak(&self, mu: &Measure, ts: &[f64]) -> Result<ConstantReport> {
        let solver = self.solver()?;
        let w = wolff_potential(mu, self.params.alpha, self.params.s, None)?;
        let mut pairs = Vec::new();
        for (j, &t) in ts.iter().enumerate() {
            for (k, a) in [2.0, 4.0, 8.0].into_iter().enumerate() {
                let (lhs, rhs) = Self::weak_pair(&solver, mu, &w, t, a, self.params.s)?;
                pairs.push((3 * j + k, lhs, rhs));
            }
        }
        ConstantReport::build(InequalityId::WolffWeak, "a=2,4,8", self, pairs)
    }

    /// Three ratios `lambda/L^q(cap)`, `beta/L^q(cap)` and `beta/lambda`.
    pub fn check_newnorm2(&self, q: f64, lambda: f64) -> Result<Vec<ConstantReport>> {
        let sp = self.spaces()?;
        let us = Self::scaled(self.functions()?, lambda);
        let vals = us
            .par_iter()
            .map(|u| -> Result<[f64; 3]> {
                let l = sp.cap_norm(u, q)?;
                let (lam, beta, _) = sp.lambda_beta(u, q)?;
                Ok([l, lam.upper, beta.upper])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for (label, a, b) in [("lambda/lq_cap", 1, 0), ("beta/lq_cap", 2, 0), ("beta/lambda", 2, 1)] {
            let pairs = vals.iter().enumerate().map(|(i, v)| (i, v[a], v[b])).collect();
            out.push(ConstantReport::build(InequalityId::Newnorm2, format!("q={q},{label}"), self, pairs)?);
        }
        Ok(out)
    }

    /// `kv_norm / otilde_norm` upper estimates.
    pub fn check_kv_equiv(&self, q: f64, lambda: f64) -> Result<ConstantReport> {
        let sp = self.spaces()?;
        let gs = Self::scaled(self.functions()?, lambda);
        let pairs = gs
            .par_iter()
            .enumerate()
            .map(|(i, g)| -> Result<(usize, f64, f64)> {
                Ok((i, sp.kv_norm(g, q)?.upper, sp.otilde_norm(g, q)?.upper))
            })
            .collect::<Result<Vec<_>>>()?;
        ConstantReport::build(InequalityId::KvEquiv, format!("q={q}"), self, pairs)
    }

    /// `int |f g| / (||f||_M ||g||_N)` with the certified lower bound for `M`
    /// and the plain `N` upper bound; `g` comes from the family with seed + 1.
    pub fn check_main3(&self, lambda: f64) -> Result<ConstantReport> {
        let sp = self.spaces()?;
        let fs = Self::scaled(self.functions()?, lambda);
        let gs = Self::scaled(functions(FamilyName::Mixed, self.seed.wrapping_add(1), self.count, &self.grid)?, lambda);
        let pairs = fs
            .par_iter()
            .zip(gs.par_iter())
            .enumerate()
            .map(|(i, (f, g))| -> Result<(usize, f64, f64)> {
                let lhs = f.zip_with(g, |a, b| (a * b).abs())?.integrate();
                let m = sp.m_norm(f)?.lower;
                let n = sp.n_norm(g, NVariant::Plain)?.upper;
                Ok((i, lhs, m * n))
            })
            .collect::<Result<Vec<_>>>()?;
        ConstantReport::build(InequalityId::Main3, format!("p={},r={}", self.params.p, self.params.r), self, pairs)
    }

    /// `||w||_{L^{s/r}(cap)}` for the iterated-potential weights of unit-norm
    /// family members. Also returns the largest `A_1` characteristic seen.
    pub fn check_secondtheorem(&self) -> Result<(ConstantReport, f64)> {
        let sp = self.spaces()?;
        let hs = self.functions()?;
        let wits = hs.par_iter().map(|h| sp.secondtheorem_witness(h)).collect::<Result<Vec<_>>>()?;
        let a1 = wits.iter().map(|w| w.a1_value).fold(0.0, f64::max);
        let pairs = wits.iter().enumerate().map(|(i, w)| (i, w.lq_cap_norm_value, 1.0)).collect();
        Ok((ConstantReport::build(InequalityId::SecondTheorem, format!("r={}", self.params.r), self, pairs)?, a1))
    }

    /// Obstacle norm `F_r(u)` against `||u||_{L^{s/r}(cap)}`.
    pub fn check_fnorm_sandwich(&self, lambda: f64) -> Result<ConstantReport> {
        let sp = self.spaces()?;
        let r = self.params.r;
        let us = Self::scaled(self.functions()?, lambda);
        let pairs = us
            .par_iter()
            .enumerate()
            .map(|(i, u)| -> Result<(usize, f64, f64)> {
                let (est, _) = f_norm(sp.solver(), u, r)?;
                Ok((i, est.upper, sp.cap_norm(u, self.params.s / r)?))
            })
            .collect::<Result<Vec<_>>>()?;
        ConstantReport::build(InequalityId::FnormSandwich, format!("r={r}"), self, pairs)
    }

    /// `|E|^{1 - alpha s / n} / cap(E)` over the supports of the ball family.
    pub fn check_lebesgue(&self) -> Result<ConstantReport> {
        let solver = self.solver()?;
        let e = 1.0 - self.params.alpha * self.params.s / self.params.n as f64;
        let sets: Vec<Mask> =
            functions(FamilyName::Balls, self.seed, self.count, &self.grid)?.iter().map(|f| f.support()).collect();
        let pairs = sets
            .par_iter()
            .enumerate()
            .map(|(i, m)| -> Result<(usize, f64, f64)> {
                Ok((i, m.measure().powf(e), solver.capacity(m)?.require_converged()?.value))
            })
            .collect::<Result<Vec<_>>>()?;
        ConstantReport::build(InequalityId::Lebesgue, "balls", self, pairs)
    }

    /// Runs `check` on each resolution and attaches the refinement trend to
    /// the reports of the finest grid, matched by label.
    pub fn refine<F>(&self, points: &[usize], check: F) -> Result<Vec<ConstantReport>>
    where
        F: Fn(&Harness) -> Result<Vec<ConstantReport>>,
    {
        if points.is_empty() || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("refinement grids must be strictly increasing".into()));
        }
        let mut runs = Vec::with_capacity(points.len());
        for &n in points {
            runs.push(check(&self.with_grid(n)?)?);
        }
        let mut finest = runs.pop().expect("at least one grid");
        for rep in finest.iter_mut() {
            let mut trend = Vec::new();
            for run in &runs {
                let prev = run
                    .iter()
                    .find(|r| r.label == rep.label && r.inequality_id == rep.inequality_id)
                    .ok_or_else(|| Error::Domain(format!("report {} missing on a coarser grid", rep.label)))?;
                trend.push(prev.refinement[0].clone());
            }
            trend.append(&mut rep.refinement);
            rep.refinement = trend;
        }
        Ok(finest)
    }
}

/// Weight used by [`Harness::check_main2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Main2Weight {
    Constant,
    Extremal,
}

impl Main2Weight {
    pub fn as_str(&self) -> &'static str {
        match self {
            Main2Weight::Constant => "constant",
            Main2Weight::Extremal => "extremal",
        }
    }
}

/// Trace constant (lower bound), dual pairing constant (lower bound),
/// Wolff functional against the measure and Wolff functional against capacity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceQuantities {
    pub trace: f64,
    pub pairing: f64,
    pub wolff_mu: f64,
    pub wolff_cap: f64,
}

impl TraceQuantities {
    pub const NAMES: [&'static str; 4] = ["trace", "pairing", "wolff_mu", "wolff_cap"];

    pub fn get(&self, i: usize) -> f64 {
        [self.trace, self.pairing, self.wolff_mu, self.wolff_cap][i]
    }
}

/// Two equal atoms at distance `d` placed symmetrically about the origin.
pub fn two_atoms(grid: Grid, d: f64) -> Result<Measure> {
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    a[0] = -0.5 * d;
    b[0] = 0.5 * d;
    Measure::new(grid, vec![Atom { position: a, mass: 1.0 }, Atom { position: b, mass: 1.0 }], None)
}
