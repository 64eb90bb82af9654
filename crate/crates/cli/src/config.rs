//! Run configuration: flags, `key=value` config files and set specs.
//!
//! Flags and config files share one key namespace (the long flag names), so a
//! resolved [`RunConfig`] can be written back as a config file and re-read.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use capax::capacity::{DEFAULT_LEVELS, DEFAULT_TOL};
use capax::families::{DEFAULT_COUNT, DEFAULT_SEED};
use capax::{Grid, KernelKind, Mask, Params};
use serde::Serialize;

/// Keys accepted in config files, in the order they are written back.
pub const KEYS: [&str; 25] = [
    "n", "alpha", "s", "q", "p", "r", "N", "L", "kind", "tol", "seed", "levels", "threads", "count", "family",
    "index", "set", "input", "output", "extremal", "check", "norm", "t", "radius", "refine",
];

/// Invalid user input; maps to exit status 1.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Capacity,
    Potential,
    Wolff,
    Choquet,
    Norm,
    Verify,
    Report,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Capacity => "capacity",
            Command::Potential => "potential",
            Command::Wolff => "wolff",
            Command::Choquet => "choquet",
            Command::Norm => "norm",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    pub grid: Grid,
    pub kind: KernelKind,
    pub tol: f64,
    pub seed: u64,
    pub levels: usize,
    pub threads: Option<usize>,
    pub count: usize,
    pub family: Option<String>,
    pub index: usize,
    pub set: Option<String>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub extremal: Option<PathBuf>,
    pub check: Option<String>,
    pub norm: Option<String>,
    pub t: Option<f64>,
    pub radius: Option<f64>,
    pub refine: Option<Vec<usize>>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, InputError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| InputError(format!("config line {}: expected key=value, got `{line}`", lineno + 1)))?;
        let key = k.trim();
        if !KEYS.contains(&key) {
            return Err(InputError(format!("config line {}: unknown key `{key}`", lineno + 1)));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, InputError>
where
    T::Err: fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| InputError(format!("--{key} `{v}`: {e}"))))
        .transpose()
}

fn get_or<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, InputError>
where
    T::Err: fmt::Display,
{
    Ok(get(map, key)?.unwrap_or(default))
}

impl RunConfig {
    /// Resolves settings from merged key/value pairs, validating exponents and
    /// the grid before anything is computed.
    pub fn from_map(command: Command, map: &BTreeMap<String, String>) -> Result<Self, InputError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(InputError(format!("unknown key `{k}`")));
        }
        let kind: KernelKind = get_or(map, "kind", KernelKind::Riesz)?;
        let n: usize = get_or(map, "n", 1)?;
        let params = Params::new(
            n,
            get_or(map, "alpha", 0.4)?,
            get_or(map, "s", 2.0)?,
            get_or(map, "q", 1.5)?,
            get_or(map, "p", 2.0)?,
            get_or(map, "r", 1.0)?,
            kind,
        )
        .map_err(|e| InputError(e.to_string()))?;
        let grid = Grid::new(n, get_or(map, "L", 2.0)?, get_or(map, "N", 128)?).map_err(|e| InputError(e.to_string()))?;
        let tol: f64 = get_or(map, "tol", DEFAULT_TOL)?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(InputError(format!("--tol {tol} must be positive")));
        }
        let levels: usize = get_or(map, "levels", DEFAULT_LEVELS)?;
        if levels < 2 {
            return Err(InputError(format!("--levels {levels} must be at least 2")));
        }
        let threads: Option<usize> = get(map, "threads")?;
        if threads == Some(0) {
            return Err(InputError("--threads must be positive".into()));
        }
        let refine = match map.get("refine") {
            None => None,
            Some(v) => Some(
                v.split(',')
                    .map(|x| x.trim().parse::<usize>().map_err(|e| InputError(format!("--refine `{v}`: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        let radius: Option<f64> = match map.get("radius").map(String::as_str) {
            None | Some("inf") => None,
            Some(v) => Some(v.parse().map_err(|e| InputError(format!("--radius `{v}`: {e}")))?),
        };
        if radius.is_some_and(|r| !(r > 0.0)) {
            return Err(InputError("--radius must be positive".into()));
        }
        Ok(Self {
            command,
            params,
            grid,
            kind,
            tol,
            seed: get_or(map, "seed", DEFAULT_SEED)?,
            levels,
            threads,
            count: get_or(map, "count", DEFAULT_COUNT)?,
            family: get(map, "family")?,
            index: get_or(map, "index", 0)?,
            set: get(map, "set")?,
            input: get(map, "input")?,
            output: get(map, "output")?,
            extremal: get(map, "extremal")?,
            check: get(map, "check")?,
            norm: get(map, "norm")?,
            t: get(map, "t")?,
            radius,
            refine,
        })
    }

    /// Writes the settings back as `key = value` lines.
    pub fn to_kv(&self) -> String {
        let p = &self.params;
        let mut pairs: Vec<(&str, String)> = vec![
            ("n", p.n.to_string()),
            ("alpha", p.alpha.to_string()),
            ("s", p.s.to_string()),
            ("q", p.q.to_string()),
            ("p", p.p.to_string()),
            ("r", p.r.to_string()),
            ("N", self.grid.points_per_axis().to_string()),
            ("L", self.grid.half_width().to_string()),
            ("kind", self.kind.to_string()),
            ("tol", self.tol.to_string()),
            ("seed", self.seed.to_string()),
            ("levels", self.levels.to_string()),
            ("count", self.count.to_string()),
            ("index", self.index.to_string()),
        ];
        let opt = |v: &Option<String>| v.clone();
        let path = |v: &Option<PathBuf>| v.as_ref().map(|x| x.display().to_string());
        for (k, v) in [
            ("threads", self.threads.map(|t| t.to_string())),
            ("family", opt(&self.family)),
            ("set", opt(&self.set)),
            ("input", path(&self.input)),
            ("output", path(&self.output)),
            ("extremal", path(&self.extremal)),
            ("check", opt(&self.check)),
            ("norm", opt(&self.norm)),
            ("t", self.t.map(|t| t.to_string())),
            ("radius", self.radius.map(|r| r.to_string())),
            ("refine", self.refine.as_ref().map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))),
        ] {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        }
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Builds a mask from `ball:R`, `cube:a` (half side `a`), `annulus:r1:r2`, or a
/// `+`-joined union of these, all centred at the origin.
pub fn parse_set(spec: &str, grid: Grid) -> Result<Mask, InputError> {
    let origin = [0.0; 3];
    let mut out = Mask::empty(grid);
    for part in spec.split('+') {
        let fields: Vec<&str> = part.trim().split(':').collect();
        let num = |i: usize| -> Result<f64, InputError> {
            let v = fields.get(i).ok_or_else(|| InputError(format!("set `{part}`: missing parameter")))?;
            let x: f64 = v.parse().map_err(|e| InputError(format!("set `{part}`: {e}")))?;
            if x.is_finite() && x >= 0.0 {
                Ok(x)
            } else {
                Err(InputError(format!("set `{part}`: {x} must be a nonnegative number")))
            }
        };
        let (arity, mask) = match fields[0] {
            "ball" => (2, Mask::ball(grid, &origin, num(1)?)),
            "cube" => (2, Mask::cube(grid, &origin, num(1)?)),
            "annulus" => {
                let (a, b) = (num(1)?, num(2)?);
                if a > b {
                    return Err(InputError(format!("set `{part}`: inner radius exceeds outer")));
                }
                (3, Mask::annulus(grid, &origin, a, b))
            }
            other => return Err(InputError(format!("unknown set shape `{other}`"))),
        };
        if fields.len() != arity {
            return Err(InputError(format!("set `{part}`: expected {} parameters", arity - 1)));
        }
        out = out.union(&mask).expect("same grid");
    }
    Ok(out)
}
