//! Dispatch of each subcommand to the library.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use capax::capacity::{choquet_integral, f_norm, CapacitySolver, NormEstimate};
use capax::families::{functions, measures, FamilyName};
use capax::io::{read_field, read_mask, write_field};
use capax::potential::{potential, wolff_potential, Measure};
use capax::spaces::{NVariant, Spaces, DEFAULT_CANDIDATES, FLAG_BUDGET};
use capax::verify::{ConstantReport, Harness, InequalityId, Main2Weight};
use capax::{convolution::Method, Error, Field, Mask};
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_set, Command, InputError, RunConfig};

/// Why a run did not finish cleanly.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or input files (exit 1).
    Input(String),
    /// A solver ran out of iterations and no result could be written (exit 2).
    Budget(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget { .. } => Failure::Budget(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

/// Completed run; `degraded` results were written but carry budget flags.
pub struct Outcome {
    pub degraded: bool,
}

type Res<T> = Result<T, Failure>;

fn input_err<T>(msg: impl Into<String>) -> Res<T> {
    Err(Failure::Input(msg.into()))
}

fn to_json<T: Serialize>(v: &T) -> Res<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: &Path, text: &str) -> Res<()> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

/// `results.json` -> `results.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

pub fn run(cfg: &RunConfig) -> Res<Outcome> {
    let start = Instant::now();
    let (summary, degraded) = match cfg.command {
        Command::Capacity => capacity(cfg)?,
        Command::Potential => potential_cmd(cfg)?,
        Command::Wolff => wolff(cfg)?,
        Command::Choquet => choquet(cfg)?,
        Command::Norm => norm(cfg)?,
        Command::Verify => verify(cfg)?,
        Command::Report => report(cfg)?,
    };
    print!("{summary}");
    if let Some(out) = &cfg.output {
        let manifest = json!({
            "command": cfg.command.as_str(),
            "config": cfg,
            "config_file": cfg.to_kv(),
            "family_seed": cfg.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "degraded": degraded,
            "wall_time_seconds": start.elapsed().as_secs_f64(),
        });
        write_text(&sibling(out, "manifest.json"), &to_json(&manifest)?)?;
    }
    Ok(Outcome { degraded })
}

fn mask_input(cfg: &RunConfig) -> Res<Mask> {
    match (&cfg.set, &cfg.input) {
        (Some(spec), None) => Ok(parse_set(spec, cfg.grid)?),
        (None, Some(path)) => {
            let m = read_mask(path)?;
            if *m.grid() != cfg.grid {
                return input_err(format!("{} is on {:?}, expected {:?}", path.display(), m.grid(), cfg.grid));
            }
            Ok(m)
        }
        (Some(_), Some(_)) => input_err("give either --set or --input, not both"),
        (None, None) => input_err("a set is required: --set SPEC or --input MASK"),
    }
}

fn family_name(cfg: &RunConfig) -> Res<Option<FamilyName>> {
    cfg.family.as_deref().map(|f| f.parse::<FamilyName>().map_err(Failure::from)).transpose()
}

/// Function from `--input`, the indicator of `--set`, or member `--index` of
/// a function `--family`.
fn field_input(cfg: &RunConfig) -> Res<Field> {
    let sources = [cfg.input.is_some(), cfg.set.is_some(), cfg.family.is_some()].iter().filter(|b| **b).count();
    if sources != 1 {
        return input_err("give exactly one of --input, --set or --family");
    }
    if let Some(path) = &cfg.input {
        let f = read_field(path)?;
        if *f.grid() != cfg.grid {
            return input_err(format!("{} is on {:?}, expected {:?}", path.display(), f.grid(), cfg.grid));
        }
        return Ok(f);
    }
    if let Some(spec) = &cfg.set {
        return Ok(Field::indicator(&parse_set(spec, cfg.grid)?));
    }
    let name = family_name(cfg)?.expect("family given");
    if name.is_measure() {
        return input_err(format!("family `{name}` holds measures, not functions"));
    }
    let mut fs = functions(name, cfg.seed, cfg.index + 1, &cfg.grid)?;
    Ok(fs.pop().expect("index + 1 members"))
}

/// Measure from a density file, a set (uniform density) or a family member.
fn measure_input(cfg: &RunConfig) -> Res<Measure> {
    match family_name(cfg)? {
        Some(name) if name.is_measure() => {
            if cfg.input.is_some() || cfg.set.is_some() {
                return input_err("give exactly one of --input, --set or --family");
            }
            let mut ms = measures(name, cfg.seed, cfg.index + 1, &cfg.grid)?;
            Ok(ms.pop().expect("index + 1 members"))
        }
        _ => {
            let f = field_input(cfg)?;
            if !f.is_nonneg() {
                return input_err("a measure density must be nonnegative");
            }
            Ok(Measure::from_density(f)?)
        }
    }
}

fn solver(cfg: &RunConfig) -> Res<CapacitySolver> {
    Ok(CapacitySolver::new(cfg.grid, &cfg.params, cfg.kind, cfg.tol)?)
}

fn capacity(cfg: &RunConfig) -> Res<(String, bool)> {
    let set = mask_input(cfg)?;
    let res = solver(cfg)?.capacity(&set)?;
    if let Some(out) = &cfg.output {
        write_text(out, &to_json(&res)?)?;
    }
    if let Some(path) = &cfg.extremal {
        write_field(path, res.extremal())?;
    }
    let mut s = format!(
        "capacity {:.10e}  (dual bound {:.10e}, gap {:.3e}, residual {:.3e}, {} iterations, {} nodes)\n",
        res.value,
        res.lower,
        res.gap,
        res.feasibility_residual,
        res.iterations,
        set.count()
    );
    if res.near_boundary {
        s.push_str("warning: set leaves the middle half of the box; value is biased upward\n");
    }
    if !res.converged {
        s.push_str("warning: iteration budget exhausted\n");
    }
    Ok((s, !res.converged))
}

fn potential_cmd(cfg: &RunConfig) -> Res<(String, bool)> {
    let f = field_input(cfg)?;
    let u = potential(&f, cfg.params.alpha, cfg.kind, Method::Fast)?;
    if let Some(out) = &cfg.output {
        write_field(out, &u)?;
    }
    Ok((format!("{} potential: max {:.10e}, integral {:.10e}\n", cfg.kind, u.max(), u.integrate()), false))
}

fn wolff(cfg: &RunConfig) -> Res<(String, bool)> {
    let mu = measure_input(cfg)?;
    let w = wolff_potential(&mu, cfg.params.alpha, cfg.params.s, cfg.radius)?;
    if let Some(out) = &cfg.output {
        write_field(out, &w)?;
    }
    let radius = cfg.radius.map_or("inf".to_string(), |r| r.to_string());
    Ok((format!("wolff potential (R = {radius}): max {:.10e}, mass {:.10e}\n", w.max(), mu.total_mass()), false))
}

fn choquet(cfg: &RunConfig) -> Res<(String, bool)> {
    let g = field_input(cfg)?.abs();
    let t = cfg.t.unwrap_or(1.0);
    if !(t > 0.0) {
        return input_err("--t must be positive");
    }
    let gt = g.abs_pow(t)?;
    let value = choquet_integral(&solver(cfg)?, &gt, cfg.levels)?;
    if let Some(out) = &cfg.output {
        write_text(out, &to_json(&json!({ "choquet": value, "t": t, "levels": cfg.levels }))?)?;
    }
    Ok((format!("choquet integral of |g|^{t}: {value:.10e}\n"), false))
}

fn spaces(cfg: &RunConfig) -> Res<Spaces> {
    Ok(Spaces::new(cfg.grid, &cfg.params, cfg.kind, cfg.tol)?
        .with_levels(cfg.levels)
        .with_candidates(cfg.seed, DEFAULT_CANDIDATES)?)
}

/// Norm names accepted by `--norm`.
pub const NORMS: [&str; 9] = ["lq-cap", "f", "m", "otilde", "kv", "n", "n-a1", "lambda", "beta"];

fn norm(cfg: &RunConfig) -> Res<(String, bool)> {
    let which = cfg.norm.as_deref().ok_or_else(|| Failure::Input(format!("--norm is required ({})", NORMS.join(", "))))?;
    let u = field_input(cfg)?;
    let q = cfg.params.q;
    let needs_q_below_s = matches!(which, "otilde" | "kv" | "lambda" | "beta");
    if needs_q_below_s && q >= cfg.params.s {
        return input_err(format!("--norm {which} needs q < s"));
    }
    let sp = spaces(cfg)?;
    let est = match which {
        "lq-cap" => {
            let v = sp.cap_norm(&u, q)?;
            NormEstimate { lower: v, upper: v, flags: Vec::new(), witness: None, witness_ref: None }
        }
        "f" => f_norm(sp.solver(), &u, cfg.params.r)?.0,
        "m" => sp.m_norm(&u)?,
        "otilde" => sp.otilde_norm(&u, q)?,
        "kv" => sp.kv_norm(&u, q)?,
        "n" => sp.n_norm(&u, NVariant::Plain)?,
        "n-a1" => sp.n_norm(&u, NVariant::A1Quasicontinuous)?,
        "lambda" | "beta" => {
            let (lam, beta, _) = sp.lambda_beta(&u, q)?;
            if which == "lambda" {
                lam
            } else {
                beta
            }
        }
        other => return input_err(format!("unknown norm `{other}` ({})", NORMS.join(", "))),
    };
    let mut est = est;
    if let (Some(out), Some(w)) = (&cfg.output, &est.witness) {
        let path = sibling(out, "witness.json");
        write_field(&path, w)?;
        est.witness_ref = path.file_name().map(|n| n.to_string_lossy().into_owned());
    }
    if let Some(out) = &cfg.output {
        write_text(out, &to_json(&est)?)?;
    }
    let mut s = format!("{which} norm: lower {:.10e}, upper {:.10e}\n", est.lower, est.upper);
    if !est.flags.is_empty() {
        let _ = writeln!(s, "flags: {}", est.flags.join(", "));
    }
    Ok((s, est.has_flag(FLAG_BUDGET)))
}

fn harness(cfg: &RunConfig) -> Res<Harness> {
    let mut h = Harness::new(cfg.grid, cfg.params, cfg.kind)?;
    h.seed = cfg.seed;
    h.count = cfg.count;
    h.tol = cfg.tol;
    h.levels = cfg.levels;
    Ok(h)
}

fn atom_family(h: &Harness, cfg: &RunConfig) -> Res<Vec<Measure>> {
    let name = family_name(cfg)?.unwrap_or(FamilyName::Atoms);
    if !name.is_measure() {
        return input_err(format!("family `{name}` holds functions, not measures"));
    }
    Ok(measures(name, h.seed, h.count, &h.grid)?)
}

fn run_check(h: &Harness, cfg: &RunConfig, id: InequalityId) -> Res<Vec<ConstantReport>> {
    let q = h.params.q;
    Ok(match id {
        InequalityId::Csim => vec![h.check_csim(1.0)?],
        InequalityId::Adams => vec![h.check_adams(q, 1.0)?],
        InequalityId::Main2 => vec![
            h.check_main2(q, Main2Weight::Constant, 1.0)?,
            h.check_main2(q, Main2Weight::Extremal, 1.0)?,
        ],
        InequalityId::Ibp => vec![h.check_ibp(cfg.t.unwrap_or(2.0), 1.0)?],
        InequalityId::Boundedness => vec![h.check_boundedness(&atom_family(h, cfg)?, cfg.radius)?],
        InequalityId::UpperTri => h.check_upper_tri(h.params.r, 1.0)?,
        InequalityId::WolffWeak => {
            let mu = atom_family(h, cfg)?
                .into_iter()
                .nth(cfg.index)
                .ok_or_else(|| Failure::Input(format!("--index {} beyond --count {}", cfg.index, h.count)))?;
            let top = wolff_potential(&mu, h.params.alpha, h.params.s, None)?.max();
            vec![h.check_wolff_weak(&mu, &[top / 64.0, top / 32.0, top / 16.0])?]
        }
        InequalityId::Newnorm2 => h.check_newnorm2(q, 1.0)?,
        InequalityId::KvEquiv => vec![h.check_kv_equiv(q, 1.0)?],
        InequalityId::Main3 => vec![h.check_main3(1.0)?],
        InequalityId::SecondTheorem => vec![h.check_secondtheorem()?.0],
        InequalityId::FnormSandwich => vec![h.check_fnorm_sandwich(1.0)?],
        InequalityId::Lebesgue => vec![h.check_lebesgue()?],
    })
}

fn run_refined(cfg: &RunConfig, id: InequalityId) -> Res<Vec<ConstantReport>> {
    let h = harness(cfg)?;
    match &cfg.refine {
        None => run_check(&h, cfg, id),
        Some(points) => {
            // keep the original failure so budget exhaustion still maps to exit 2
            let err = RefCell::new(None);
            let out = h.refine(points, |hh| {
                run_check(hh, cfg, id).map_err(|e| {
                    let msg = match &e {
                        Failure::Input(m) | Failure::Budget(m) => m.clone(),
                    };
                    *err.borrow_mut() = Some(e);
                    Error::Domain(msg)
                })
            });
            match (out, err.into_inner()) {
                (Ok(r), _) => Ok(r),
                (Err(_), Some(e)) => Err(e),
                (Err(e), None) => Err(e.into()),
            }
        }
    }
}

fn summary_table(reports: &[ConstantReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = write!(
            s,
            "{:<15} {:<28} samples {:>3}  max {:.6e}  min {:.6e}",
            r.inequality_id.as_str(),
            r.label,
            r.samples.len(),
            r.max_ratio,
            r.min_ratio
        );
        if r.refinement.len() > 1 {
            let _ = write!(s, "  drift {:.4}", r.drift());
        }
        s.push('\n');
    }
    s
}

fn write_reports(cfg: &RunConfig, reports: &[ConstantReport]) -> Res<()> {
    if let Some(out) = &cfg.output {
        write_text(out, &to_json(&reports)?)?;
        let mut csv = String::from("inequality_id,label,sample_id,lhs,rhs,ratio\n");
        for r in reports {
            for smp in &r.samples {
                let _ = writeln!(
                    csv,
                    "{},\"{}\",{},{:e},{:e},{:e}",
                    r.inequality_id.as_str(),
                    r.label,
                    smp.sample_id,
                    smp.lhs,
                    smp.rhs,
                    smp.ratio
                );
            }
        }
        write_text(&sibling(out, "csv"), &csv)?;
    }
    Ok(())
}

fn verify(cfg: &RunConfig) -> Res<(String, bool)> {
    let name = cfg.check.as_deref().ok_or_else(|| {
        let ids: Vec<&str> = InequalityId::ALL.iter().map(|i| i.as_str()).collect();
        Failure::Input(format!("--check is required ({})", ids.join(", ")))
    })?;
    let id: InequalityId = name.parse()?;
    let reports = run_refined(cfg, id)?;
    write_reports(cfg, &reports)?;
    Ok((summary_table(&reports), false))
}

/// Checks run by `report`, skipping those the exponents do not admit.
fn suite(cfg: &RunConfig) -> Vec<(InequalityId, RunConfig)> {
    let p = cfg.params;
    let mut out = vec![(InequalityId::Csim, cfg.clone())];
    let with_q = |q: f64| RunConfig { params: p.with_q(q), ..cfg.clone() };
    out.push((InequalityId::Adams, with_q(1.0)));
    out.push((InequalityId::Ibp, RunConfig { t: Some(cfg.t.unwrap_or(2.0)), ..cfg.clone() }));
    out.push((InequalityId::Boundedness, RunConfig { family: None, ..cfg.clone() }));
    out.push((InequalityId::UpperTri, RunConfig { params: p.with_r(p.s / 2.0), ..cfg.clone() }));
    if p.q < p.s {
        out.push((InequalityId::Main2, cfg.clone()));
        out.push((InequalityId::Newnorm2, cfg.clone()));
        out.push((InequalityId::KvEquiv, cfg.clone()));
    }
    out.push((InequalityId::Main3, cfg.clone()));
    out.push((InequalityId::SecondTheorem, cfg.clone()));
    out.push((InequalityId::FnormSandwich, cfg.clone()));
    out.push((InequalityId::Lebesgue, cfg.clone()));
    out
}

fn report(cfg: &RunConfig) -> Res<(String, bool)> {
    let mut reports = Vec::new();
    for (id, sub) in suite(cfg) {
        reports.extend(run_refined(&sub, id)?);
    }
    write_reports(cfg, &reports)?;
    Ok((summary_table(&reports), false))
}
