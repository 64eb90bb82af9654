//! Acceptance suite. Prints one pass/fail line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use capax::capacity::{choquet_integral, CapacitySolver, Init, DEFAULT_TOL};
use capax::convolution::Method;
use capax::families::{functions, FamilyName, DEFAULT_SEED};
use capax::kernel::a1_constant;
use capax::potential::{bessel_potential, riesz_potential, wolff_potential, Atom, Measure};
use capax::verify::{two_atoms, ConstantReport, Harness};
use capax::{Field, Grid, KernelKind, Mask, Params};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRIFT_LIMIT: f64 = 0.25;
const REFINE: [usize; 3] = [64, 128, 256];

#[derive(Default)]
struct Log {
    ok: bool,
    notes: Vec<String>,
}

impl Log {
    fn require(&mut self, cond: bool, note: impl Into<String>) {
        let note = note.into();
        if !cond {
            self.ok = false;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn params(n: usize, alpha: f64, s: f64) -> Params {
    Params::new(n, alpha, s, 1.5f64.min(s), 2.0, 1.0, KernelKind::Riesz).unwrap()
}

/// Finite ratios, nothing skipped, and both band edges within the drift limit.
fn require_stable(log: &mut Log, r: &ConstantReport) {
    let ok = r.is_finite() && r.skipped.is_empty() && r.drift() < DRIFT_LIMIT && r.min_drift() < DRIFT_LIMIT;
    log.require(
        ok,
        format!(
            "{} {}: max {:.4} drift {:.3}, min {:.4} drift {:.3}",
            r.inequality_id.as_str(),
            r.label,
            r.max_ratio,
            r.drift(),
            r.min_ratio,
            r.min_drift()
        ),
    );
}

fn same_samples(a: &ConstantReport, b: &ConstantReport) -> bool {
    a.samples.len() == b.samples.len()
        && a.samples.iter().zip(&b.samples).all(|(x, y)| {
            x.sample_id == y.sample_id && x.lhs.to_bits() == y.lhs.to_bits() && x.rhs.to_bits() == y.rhs.to_bits()
        })
}

fn max_ratio_change(a: &ConstantReport, b: &ConstantReport) -> f64 {
    a.samples.iter().zip(&b.samples).map(|(x, y)| rel(x.ratio, y.ratio)).fold(0.0, f64::max)
}

// 1 ------------------------------------------------------------------------

fn convolution_oracle(log: &mut Log) {
    let g = Grid::new(2, 1.0, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = Field::new(g, (0..g.len()).map(|_| rng.gen::<f64>()).collect()).unwrap();
    let signed = Field::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    type Pot = fn(&Field, f64, Method) -> capax::Result<Field>;
    for (name, pot) in [("riesz", riesz_potential as Pot), ("bessel", bessel_potential as Pot)] {
        let fast = pot(&f, 0.7, Method::Fast).unwrap();
        let direct = pot(&f, 0.7, Method::Direct).unwrap();
        let dev = fast.values().iter().zip(direct.values()).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);
        log.require(dev <= 1e-10, format!("{name} nonnegative {dev:.1e}"));
        let fast = pot(&signed, 0.7, Method::Fast).unwrap();
        let direct = pot(&signed, 0.7, Method::Direct).unwrap();
        let scale = direct.abs().max();
        let dev = fast.values().iter().zip(direct.values()).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max);
        log.require(dev <= 1e-10, format!("{name} signed {dev:.1e}"));
    }
}

// 2 ------------------------------------------------------------------------

fn closed_forms(log: &mut Log) {
    // gamma(1, 1/2) = 1/sqrt(2 pi) with sphere area 2; gamma(2, 1) = 1/(2 pi)
    // with circumference 2 pi.
    let radius: f64 = 0.5;
    for (n, alpha, gamma_sigma, limit) in
        [(1, 0.5, 2.0 / (2.0 * std::f64::consts::PI).sqrt(), 0.02), (2, 1.0, 1.0, 0.03)]
    {
        let g = Grid::new(n, 2.0, 256).unwrap();
        let f = Field::indicator(&Mask::ball(g, &[0.0; 3], radius));
        let u = riesz_potential(&f, alpha, Method::Fast).unwrap();
        let h = g.spacing();
        let centre: Vec<f64> =
            (0..g.len()).filter(|&i| (0..n).all(|d| g.point(i)[d].abs() < h)).map(|i| u.values()[i]).collect();
        let numeric = centre.iter().sum::<f64>() / centre.len() as f64;
        let exact = gamma_sigma * radius.powf(alpha) / alpha;
        let e = rel(numeric, exact);
        log.require(e <= limit, format!("ball n={n}: {e:.4} (limit {limit})"));
    }
    for (n, points) in [(1, &REFINE[..]), (2, &[32, 64][..])] {
        let (alpha, s) = (0.4, 2.0);
        let beta = (n as f64 - alpha * s) / (s - 1.0);
        for &np in points {
            let g = Grid::new(n, 2.0, np).unwrap();
            let w = wolff_potential(&Measure::dirac(g, [0.0; 3], 1.0).unwrap(), alpha, s, None).unwrap();
            let mut worst = 0.0f64;
            for i in 0..g.len() {
                let x = g.point(i);
                let d = (0..n).map(|k| x[k] * x[k]).sum::<f64>().sqrt();
                if d >= 2.0 * g.spacing() {
                    worst = worst.max(rel(w.values()[i], d.powf(-beta) / beta));
                }
            }
            log.require(worst <= 0.03, format!("dirac wolff n={n} N={np}: {worst:.1e}"));
        }
    }
}

// 3 ------------------------------------------------------------------------

/// Primal-dual interior point for `min x^T Q x / 2` subject to `G x >= b`.
fn qp_interior_point(q: &DMatrix<f64>, g: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (n, m) = (q.nrows(), g.nrows());
    let mut x = DVector::from_element(n, 1.0);
    let mut w = DVector::from_element(m, 1.0);
    let mut z = DVector::from_element(m, 1.0);
    for _ in 0..200 {
        let mu = w.dot(&z) / m as f64;
        let rd = q * &x - g.transpose() * &z;
        let rp = g * &x - &w - b;
        if mu < 1e-15 && rd.amax() < 1e-13 && rp.amax() < 1e-13 {
            break;
        }
        let sigma = 0.1;
        let rc = w.component_mul(&z).add_scalar(-sigma * mu);
        let d = z.component_div(&w);
        let mut lhs = q.clone();
        lhs += g.transpose() * DMatrix::from_diagonal(&d) * g;
        let rhs = -&rd - g.transpose() * (rc.component_div(&w) + d.component_mul(&rp));
        let dx = lhs.cholesky().expect("positive definite").solve(&rhs);
        let dw = g * &dx + &rp;
        let dz = -(rc + z.component_mul(&dw)).component_div(&w);
        let mut step: f64 = 1.0;
        for (v, dv) in w.iter().zip(dw.iter()).chain(z.iter().zip(dz.iter())) {
            if *dv < 0.0 {
                step = step.min(-0.99 * v / dv);
            }
        }
        x += step * dx;
        w += step * dw;
        z += step * dz;
    }
    x
}

fn capacity_program(log: &mut Log) {
    let (alpha, s) = (0.4, 2.0);
    let p = params(1, alpha, s);
    let grid = Grid::new(1, 2.0, 64).unwrap();
    let set = Mask::cube(grid, &[0.0], 0.25);
    let lib = CapacitySolver::new(grid, &p, KernelKind::Riesz, DEFAULT_TOL).unwrap().capacity(&set).unwrap();

    // kernel matrix from the closed forms: gamma |x - y|^(alpha - 1) off the
    // diagonal, the exact cell average on it
    let gamma = statrs::function::gamma::gamma((1.0 - alpha) / 2.0)
        / (std::f64::consts::PI.sqrt() * 2f64.powf(alpha) * statrs::function::gamma::gamma(alpha / 2.0));
    let h = grid.spacing();
    let nodes = grid.len();
    let xs: Vec<f64> = (0..nodes).map(|i| grid.point(i)[0]).collect();
    let rows = set.indices();
    let mut gm = DMatrix::zeros(rows.len() + nodes, nodes);
    for (r, &i) in rows.iter().enumerate() {
        for j in 0..nodes {
            let k = if i == j {
                gamma * 2.0 * (h / 2.0).powf(alpha) / alpha / h
            } else {
                gamma * (xs[i] - xs[j]).abs().powf(alpha - 1.0)
            };
            gm[(r, j)] = h * k;
        }
    }
    for j in 0..nodes {
        gm[(rows.len() + j, j)] = 1.0;
    }
    let b = DVector::from_fn(rows.len() + nodes, |i, _| if i < rows.len() { 1.0 } else { 0.0 });
    let q = DMatrix::from_diagonal_element(nodes, nodes, 2.0 * h);
    let x = qp_interior_point(&q, &gm, &b);
    let oracle = h * x.dot(&x);
    let e = rel(lib.value, oracle);
    log.require(e <= 1e-6, format!("interior-point oracle {oracle:.10} vs {:.10}: {e:.1e}", lib.value));

    // dilation on matched grids
    for (n, np) in [(1, 128), (2, 32)] {
        let p = params(n, alpha, s);
        let cap_at = |lam: f64| {
            let g = Grid::new(n, 2.0 * lam, np).unwrap();
            let set = Mask::ball(g, &[0.0; 3], 0.25 * lam);
            CapacitySolver::new(g, &p, KernelKind::Riesz, DEFAULT_TOL).unwrap().capacity(&set).unwrap().value
        };
        let base = cap_at(1.0);
        for lam in [0.5, 2.0] {
            let e = rel(cap_at(lam), lam.powf(n as f64 - alpha * s) * base);
            log.require(e <= 0.03, format!("dilation n={n} lambda={lam}: {e:.1e}"));
        }
    }

    // monotonicity and subadditivity on family supports
    let grid = Grid::new(1, 2.0, 128).unwrap();
    let solver = CapacitySolver::new(grid, &p, KernelKind::Riesz, DEFAULT_TOL).unwrap();
    let cap = |m: &Mask| solver.capacity(m).unwrap().value;
    let sets: Vec<Mask> =
        functions(FamilyName::Mixed, DEFAULT_SEED, 8, &grid).unwrap().iter().map(|f| f.support()).collect();
    let (mut mono, mut sub) = (0.0f64, 0.0f64);
    let mut ok = true;
    for i in 0..sets.len() {
        let (a, b) = (&sets[i], &sets[(i + 1) % sets.len()]);
        let (ca, cb) = (cap(a), cap(b));
        let cu = cap(&a.union(b).unwrap());
        let ci = cap(&a.intersection(b).unwrap());
        let slack = DEFAULT_TOL * cu.max(1.0);
        ok &= ca <= cu + 2.0 * slack && cb <= cu + 2.0 * slack && ci <= ca + 2.0 * slack;
        ok &= cu <= ca + cb + 4.0 * slack;
        mono = mono.max((ca.max(cb) - cu) / cu).max((ci - ca) / ca);
        sub = sub.max((cu - ca - cb) / cu);
    }
    log.require(ok, format!("monotone (worst excess {mono:.1e}), subadditive (worst excess {sub:.1e})"));

    // uniqueness of the extremal across starting points
    for (alpha, s) in [(0.4, 2.0), (0.3, 3.0)] {
        let p = params(1, alpha, s);
        let solver = CapacitySolver::new(grid, &p, KernelKind::Riesz, DEFAULT_TOL).unwrap();
        let set = Mask::ball(grid, &[0.1], 0.3).union(&Mask::ball(grid, &[-0.5], 0.1)).unwrap();
        let runs: Vec<Field> = [Init::Scaled, Init::Seeded(1), Init::Seeded(2)]
            .into_iter()
            .map(|init| solver.capacity_with(&set, init).unwrap().extremal().clone())
            .collect();
        let worst = runs[1..]
            .iter()
            .map(|f| f.zip_with(&runs[0], |a, b| a - b).unwrap().lp_norm(s))
            .fold(0.0, f64::max);
        log.require(worst <= 10.0 * DEFAULT_TOL, format!("extremal spread s={s}: {worst:.1e}"));
    }
}

// 4 ------------------------------------------------------------------------

fn choquet_layer_cake(log: &mut Log) {
    let p = params(1, 0.4, 2.0);
    let grid = Grid::new(1, 2.0, 128).unwrap();
    let solver = CapacitySolver::new(grid, &p, KernelKind::Riesz, DEFAULT_TOL).unwrap();
    let mut worst = 0.0f64;
    let mut sets = vec![Mask::ball(grid, &[0.0], 0.25)];
    sets.extend(functions(FamilyName::Mixed, DEFAULT_SEED, 4, &grid).unwrap().iter().map(|f| f.support()));
    for set in &sets {
        let cap = solver.capacity(set).unwrap().value;
        for c in [0.5, 1.0, 3.0] {
            let v = choquet_integral(&solver, &Field::indicator(set).scale(c), 48).unwrap();
            worst = worst.max(rel(v, c * cap));
        }
    }
    log.require(worst <= 2.0 * DEFAULT_TOL, format!("indicator layer cake {worst:.1e}"));

    let mut worst = 0.0f64;
    for f in functions(FamilyName::Mixed, DEFAULT_SEED, 8, &grid).unwrap() {
        let kf2 = solver.potential(&f).unwrap().map(|v| v * v).unwrap();
        for g in [&f, &kf2] {
            let a = choquet_integral(&solver, g, 48).unwrap();
            let b = choquet_integral(&solver, g, 96).unwrap();
            worst = worst.max(rel(a, b));
        }
    }
    log.require(worst <= 0.005, format!("level doubling {worst:.1e}"));
}

// 5 ------------------------------------------------------------------------

fn csim_adams(log: &mut Log) {
    let h = Harness::default_1d();
    let s = h.params.s;
    let csim = h.check_csim(1.0).unwrap();
    let adams = h.check_adams(s, 1.0).unwrap();
    log.require(csim.samples.len() == 32 && same_samples(&csim, &adams), "adams(q=s) bit-equal to csim");
    let scaled = h.check_csim(2.0).unwrap();
    let change = max_ratio_change(&csim, &scaled);
    log.require(change <= 1e-9, format!("scale invariance {change:.1e}"));
    for q in [1.0, s, s + 1.0] {
        let r = h.refine(&REFINE, |hh| Ok(vec![hh.check_adams(q, 1.0)?])).unwrap();
        require_stable(log, &r[0]);
    }
}

// 6 ------------------------------------------------------------------------

fn ibp(log: &mut Log) {
    let h = Harness::default_1d();
    let one = h.check_ibp(1.0, 1.0).unwrap();
    log.require(!one.samples.is_empty() && one.samples.iter().all(|s| s.ratio == 1.0), "t=1 ratios exactly 1");
    for t in [1.5, 2.0, 3.0] {
        let r = h.refine(&REFINE, |hh| Ok(vec![hh.check_ibp(t, 1.0)?])).unwrap();
        require_stable(log, &r[0]);
    }
}

// 7 ------------------------------------------------------------------------

fn boundedness(log: &mut Log) {
    let h = Harness::default_1d();
    let factor = 2f64.powf(h.params.wolff_exponent());
    let grid = h.grid;

    let singles: Vec<Measure> =
        [0.013, -0.3, 0.77].iter().map(|&x| Measure::dirac(grid, [x, 0.0, 0.0], 1.0).unwrap()).collect();
    for radius in [None, Some(0.5)] {
        let r = h.check_boundedness(&singles, radius).unwrap();
        let exact = r.samples.iter().all(|s| s.lhs <= s.rhs / factor * (1.0 + 1e-12));
        log.require(exact && r.max_ratio <= 1.0, format!("single atom {}: max {:.4}", r.label, r.max_ratio));
    }

    let pairs: Vec<Measure> = [0.05, 0.2, 0.5, 1.0].iter().map(|&d| two_atoms(grid, d).unwrap()).collect();
    for radius in [None, Some(0.5)] {
        let r = h.check_boundedness(&pairs, radius).unwrap();
        log.require(r.is_finite() && r.max_ratio <= factor, format!("two atoms {}: max {:.4}", r.label, r.max_ratio));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let clouds: Vec<Vec<Atom>> = (0..8)
        .map(|_| {
            (0..10)
                .map(|_| Atom { position: [rng.gen_range(-0.5..0.5), 0.0, 0.0], mass: rng.gen_range(0.2..1.0) })
                .collect()
        })
        .collect();
    for radius in [None, Some(0.5)] {
        let r = h
            .refine(&REFINE, |hh| {
                let mus: Vec<Measure> =
                    clouds.iter().map(|a| Measure::new(hh.grid, a.clone(), None).unwrap()).collect();
                Ok(vec![hh.check_boundedness(&mus, radius)?])
            })
            .unwrap();
        let r = &r[0];
        log.require(
            r.is_finite() && r.refinement.iter().all(|p| p.max_ratio <= factor) && r.drift() < DRIFT_LIMIT,
            format!("10 atoms {}: max {:.4}, drift {:.3}", r.label, r.max_ratio, r.drift()),
        );
    }
}

// 8 ------------------------------------------------------------------------

fn upper_triangle(log: &mut Log) {
    let h = Harness::default_1d().with_count(16);
    let s = h.params.s;
    for r in [s / 2.0, 2.0 * s / 3.0] {
        let reports = h.refine(&REFINE, |hh| hh.check_upper_tri(r, 1.0)).unwrap();
        for rep in &reports {
            let positive = rep.samples.iter().all(|x| x.lhs > 0.0 && x.lhs.is_finite() && x.rhs.is_finite());
            log.require(positive, format!("{}: all quantities finite and positive", rep.label));
            require_stable(log, rep);
        }
        for np in [128, 256] {
            let (numeric, exact) = h.with_grid(np).unwrap().dirac_wolff_mu([0.013, 0.0, 0.0], r).unwrap();
            let e = rel(numeric, exact);
            log.require(e <= 0.02, format!("dirac r={r:.3} N={np}: {e:.1e}"));
        }
    }
}

// 9 ------------------------------------------------------------------------

fn norm_bands(log: &mut Log) {
    let h = Harness::default_1d();
    let s = h.params.s;
    for q in [1.0, (1.0 + s) / 2.0] {
        let reports = h
            .refine(&REFINE, |hh| {
                let mut v = hh.check_newnorm2(q, 1.0)?;
                v.push(hh.check_kv_equiv(q, 1.0)?);
                Ok(v)
            })
            .unwrap();
        for rep in &reports {
            require_stable(log, rep);
        }
        let mut base = h.check_newnorm2(q, 1.0).unwrap();
        base.push(h.check_kv_equiv(q, 1.0).unwrap());
        let mut scaled = h.check_newnorm2(q, 4.0).unwrap();
        scaled.push(h.check_kv_equiv(q, 4.0).unwrap());
        let change = base.iter().zip(&scaled).map(|(a, b)| max_ratio_change(a, b)).fold(0.0, f64::max);
        log.require(change <= 1e-12, format!("q={q} homogeneity {change:.1e}"));
    }
}

// 10 -----------------------------------------------------------------------

fn weights(log: &mut Log) {
    let mut exact = true;
    for (n, np) in [(1, 64), (2, 32)] {
        let g = Grid::new(n, 2.0, np).unwrap();
        for truncated in [false, true] {
            exact &= a1_constant(&Field::constant(g, 3.7), truncated) == 1.0;
        }
    }
    log.require(exact, "a1 of constants exactly 1");

    let base = Harness::default_1d();
    for r in [1.0, 1.5] {
        let h = base.with_params(base.params.with_r(r));
        let rep = h.refine(&REFINE, |hh| Ok(vec![hh.check_secondtheorem()?.0])).unwrap();
        let rep = &rep[0];
        log.require(
            rep.is_finite() && rep.drift() < DRIFT_LIMIT,
            format!("witness norms r={r}: c = {:.4}, drift {:.3}", rep.max_ratio, rep.drift()),
        );
        // independent re-validation with twice the levels
        let sp = h.spaces().unwrap();
        let fine = h.spaces().unwrap().with_levels(2 * h.levels);
        let mut worst = 0.0f64;
        for f in functions(FamilyName::Mixed, h.seed, 6, &h.grid).unwrap() {
            let w = sp.secondtheorem_witness(&f).unwrap();
            let again = fine.cap_norm(&w.weight, h.params.s / r).unwrap();
            worst = worst.max(again / rep.max_ratio);
        }
        log.require(worst <= 1.01, format!("re-validated witness norm / c = {worst:.4}"));
    }
}

// 11 -----------------------------------------------------------------------

fn capax(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_capax")).args(args).current_dir(dir).output().expect("run capax")
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = std::fs::read(&path).unwrap();
        if name.ends_with(".manifest.json") {
            // wall time is the only field allowed to differ
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_seconds");
            v["config"].as_object_mut().unwrap().remove("threads");
            v["config_file"] = serde_json::Value::Null;
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

fn determinism(log: &mut Log) {
    let runs: [&[&str]; 9] = [
        &["capacity", "--set", "ball:0.25", "--N", "256", "--output", "cap.json", "--extremal", "ext.bin"],
        &["potential", "--family", "gaussians", "--index", "2", "--n", "2", "--N", "32", "--output", "pot.bin"],
        &["potential", "--set", "cube:0.3", "--kind", "bessel", "--alpha", "0.45", "--output", "bes.json"],
        &["wolff", "--family", "atoms", "--index", "3", "--radius", "0.5", "--output", "w.json"],
        &["choquet", "--set", "ball:0.25+annulus:0.4:0.5", "--t", "2", "--output", "ch.json"],
        &["norm", "--norm", "otilde", "--family", "mixed", "--index", "1", "--output", "no.json"],
        &["verify", "--check", "adams", "--q", "1", "--count", "8", "--refine", "64,128", "--output", "ad.json"],
        &["verify", "--check", "upper_tri", "--count", "4", "--output", "ut.json"],
        &["report", "--count", "4", "--N", "64", "--output", "rep.json"],
    ];
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut all_ok = true;
    for (k, dir) in dirs.iter().enumerate() {
        for args in runs {
            let mut args = args.to_vec();
            if k == 1 {
                args.extend(["--threads", "3"]);
            }
            let out = capax(dir.path(), &args);
            all_ok &= out.status.success();
        }
    }
    log.require(all_ok, "all runs exit 0");
    let (a, b) = (snapshot(dirs[0].path()), snapshot(dirs[1].path()));
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    log.require(
        a.len() == b.len() && a.len() == 23 && differing.is_empty(),
        format!("{} files byte-identical across runs and thread counts {:?}", a.len(), differing),
    );

    // a config file gives the same bytes as the equivalent flags, and flags win
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "check = ibp\nt = 1\ncount = 100\noutput = viacfg.json\n").unwrap();
    let via_cfg = capax(dir.path(), &["verify", "--config", "run.cfg", "--count", "4"]);
    let via_flags = capax(dir.path(), &["verify", "--check", "ibp", "--t", "1", "--count", "4", "--output", "flags.json"]);
    let same = via_cfg.status.success()
        && via_flags.status.success()
        && std::fs::read(dir.path().join("viacfg.json")).unwrap() == std::fs::read(dir.path().join("flags.json")).unwrap();
    log.require(same, "config file and flags agree");

    // the CLI reports exactly what the library computes
    let text = std::fs::read_to_string(dirs[0].path().join("cap.json")).unwrap();
    let cli: f64 = serde_json::from_str::<serde_json::Value>(&text).unwrap()["value"].as_f64().unwrap();
    let grid = Grid::new(1, 2.0, 256).unwrap();
    let lib = CapacitySolver::new(grid, &params(1, 0.4, 2.0), KernelKind::Riesz, DEFAULT_TOL)
        .unwrap()
        .capacity(&Mask::ball(grid, &[0.0], 0.25))
        .unwrap()
        .value;
    log.require(cli.to_bits() == lib.to_bits(), format!("CLI capacity equals library call ({cli})"));

    let bad = capax(dir.path(), &["capacity", "--set", "ball:0.25", "--alpha", "0.6"]);
    log.require(bad.status.code() == Some(1), "invalid exponents exit 1");
}

fn main() {
    let criteria: [(&str, fn(&mut Log)); 11] = [
        ("convolution oracle", convolution_oracle),
        ("closed-form potentials", closed_forms),
        ("capacity program", capacity_program),
        ("choquet layer cake", choquet_layer_cake),
        ("csim and adams", csim_adams),
        ("integration by parts", ibp),
        ("boundedness principle", boundedness),
        ("upper triangle", upper_triangle),
        ("norm equivalence bands", norm_bands),
        ("weight machinery", weights),
        ("cli determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let mut log = Log { ok: true, notes: Vec::new() };
        if let Err(e) = catch_unwind(AssertUnwindSafe(|| run(&mut log))) {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            log.require(false, format!("panicked: {}", msg.unwrap_or_default()));
        }
        if !log.ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name} ({:.1}s): {}",
            i + 1,
            if log.ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            log.notes.join("; ")
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
