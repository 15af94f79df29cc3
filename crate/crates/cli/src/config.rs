//! Flat `key = value` experiment configuration. Values from a config file
//! are overridden by command-line flags; every parse error names its key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use gamma_kitaev::gap_search::{default_grid, linear_grid, log_grid, merge_grids, AnnealSchedule, GaConfig};
use gamma_kitaev::lattice::LatticeGeometry;

pub const KEYS: &[&str] = &[
    "model",
    "size",
    "J",
    "gamma",
    "gamma-log",
    "seed",
    "threads",
    "out",
    "nv",
    "population",
    "runs",
    "generations",
    "mutation",
    "crossover",
    "elitism",
    "tournament",
    "steps",
    "t-initial",
    "t-final",
    "cells",
    "restriction",
    "sector",
    "defects",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    SkLadder,
    Bilayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub geom: LatticeGeometry,
    /// Bilayer couplings; the ladder reads the first two as `Jx, Jy`.
    pub j: Vec<f64>,
    pub gammas: Vec<f64>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub nv: usize,
    pub ga: GaConfig,
    pub anneal: AnnealSchedule,
    pub cells: usize,
    pub restriction: String,
    pub sector: Option<String>,
    pub defects: Option<Vec<String>>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(&format!("line {}", lineno + 1), "expected key = value"))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(ConfigError::new(k, "unknown key"));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError> {
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|_| ConfigError::new(key, format!("cannot parse {v:?}"))))
        .transpose()
}

pub fn parse_size(v: &str) -> Result<LatticeGeometry, ConfigError> {
    let (a, b) = v.split_once(['x', 'X']).ok_or_else(|| ConfigError::new("size", "expected WxH"))?;
    let nx = a.trim().parse().map_err(|_| ConfigError::new("size", format!("bad width {a:?}")))?;
    let ny = b.trim().parse().map_err(|_| ConfigError::new("size", format!("bad height {b:?}")))?;
    LatticeGeometry::new(nx, ny).map_err(|e| ConfigError::new("size", e.to_string()))
}

pub fn parse_couplings(v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| ConfigError::new("J", format!("bad coupling {t:?}"))))
        .collect()
}

/// `start:stop:step`, or a single value.
pub fn parse_linear(field: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = v.split(':').collect();
    let p = |t: &str| t.trim().parse::<f64>().map_err(|_| ConfigError::new(field, format!("bad number {t:?}")));
    match parts.len() {
        1 => Ok(vec![p(parts[0])?]),
        3 => linear_grid(p(parts[0])?, p(parts[1])?, p(parts[2])?).map_err(|e| ConfigError::new(field, e.to_string())),
        _ => Err(ConfigError::new(field, "expected start:stop:step or a single value")),
    }
}

/// `start:stop:count`, log-spaced.
pub fn parse_log(field: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() != 3 {
        return Err(ConfigError::new(field, "expected start:stop:count"));
    }
    let p = |t: &str| t.trim().parse::<f64>().map_err(|_| ConfigError::new(field, format!("bad number {t:?}")));
    let count = parts[2].trim().parse::<usize>().map_err(|_| ConfigError::new(field, "bad point count"))?;
    log_grid(p(parts[0])?, p(parts[1])?, count).map_err(|e| ConfigError::new(field, e.to_string()))
}

/// Splits a defect list on commas outside `{…}`.
pub fn split_names(v: &str) -> Vec<String> {
    let (mut out, mut cur, mut depth) = (Vec::new(), String::new(), 0i32);
    for c in v.chars() {
        match c {
            '{' => depth += 1,
            '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur);
    out.into_iter().map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

impl ExperimentConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let model = match map.get("model").map(String::as_str) {
            None | Some("bilayer") => Model::Bilayer,
            Some("sk-ladder") => Model::SkLadder,
            Some(other) => return Err(ConfigError::new("model", format!("unknown model {other:?}"))),
        };
        let geom = parse_size(map.get("size").map(String::as_str).unwrap_or("2x2"))?;
        let default_j = if model == Model::SkLadder { "1,1" } else { "1,1,1,1" };
        let j = parse_couplings(map.get("J").map(String::as_str).unwrap_or(default_j))?;
        let want = if model == Model::SkLadder { 2 } else { 4 };
        if j.len() != want {
            return Err(ConfigError::new("J", format!("expected {want} couplings, got {}", j.len())));
        }
        let mut parts = Vec::new();
        if let Some(v) = map.get("gamma") {
            parts.push(parse_linear("gamma", v)?);
        }
        if let Some(v) = map.get("gamma-log") {
            parts.push(parse_log("gamma-log", v)?);
        }
        let gammas = if parts.is_empty() { default_grid() } else { merge_grids(&parts) };
        if gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(ConfigError::new("gamma", "values must be finite and nonnegative"));
        }
        let seed = num(map, "seed")?.unwrap_or(0);
        let threads: Option<usize> = num(map, "threads")?;
        if threads == Some(0) {
            return Err(ConfigError::new("threads", "must be at least 1"));
        }
        let defaults = GaConfig::default();
        let ga = GaConfig {
            population_size: num(map, "population")?.unwrap_or(defaults.population_size),
            runs: num(map, "runs")?.unwrap_or(defaults.runs),
            generations: num(map, "generations")?.unwrap_or(defaults.generations),
            mutation_rate: num(map, "mutation")?,
            crossover_rate: num(map, "crossover")?.unwrap_or(defaults.crossover_rate),
            elitism: num(map, "elitism")?.unwrap_or(defaults.elitism),
            tournament_size: num(map, "tournament")?.unwrap_or(defaults.tournament_size),
            seed,
        };
        ga.validate().map_err(|e| ConfigError::new("ga", e.to_string()))?;
        let sa = AnnealSchedule::default();
        let anneal = AnnealSchedule {
            t_initial: num(map, "t-initial")?.unwrap_or(sa.t_initial),
            t_final: num(map, "t-final")?.unwrap_or(sa.t_final),
            steps: num(map, "steps")?.unwrap_or(sa.steps),
            seed,
        };
        if !(anneal.t_initial > 0.0 && anneal.t_final > 0.0 && anneal.steps > 0) {
            return Err(ConfigError::new("steps", "annealing needs positive temperatures and steps"));
        }
        let cells = num(map, "cells")?.unwrap_or(2);
        if cells == 0 {
            return Err(ConfigError::new("cells", "must be at least 1"));
        }
        let restriction = map.get("restriction").cloned().unwrap_or_else(|| "all".into());
        if !["all", "single", "uniform"].contains(&restriction.as_str()) {
            return Err(ConfigError::new("restriction", "expected all, single or uniform"));
        }
        let defects = map.get("defects").map(|v| split_names(v));
        Ok(Self {
            model,
            geom,
            j,
            gammas,
            seed,
            threads,
            out: PathBuf::from(map.get("out").map(String::as_str).unwrap_or(".")),
            nv: num(map, "nv")?.unwrap_or(2),
            ga,
            anneal,
            cells,
            restriction,
            sector: map.get("sector").cloned(),
            defects,
        })
    }

    pub fn couplings(&self) -> [f64; 4] {
        [self.j[0], self.j[1], self.j[2], self.j[3]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_map(&BTreeMap::new()).unwrap();
        assert_eq!(c.geom.n(), 4);
        assert_eq!(c.j, vec![1.0; 4]);
        assert_eq!(c.ga.population_size, 100);
    }

    #[test]
    fn errors_name_the_field() {
        for (k, v) in [("size", "3x2"), ("J", "1,2"), ("gamma", "0:1"), ("seed", "x"), ("gamma-log", "1:0.5:3")] {
            let e = ExperimentConfig::from_map(&map(&[(k, v)])).unwrap_err();
            assert_eq!(e.field, k, "{e}");
        }
    }

    #[test]
    fn kv_file() {
        let m = parse_kv("# comment\nsize = 4x4\nJ=3,4,1,2  # trailing\n").unwrap();
        let c = ExperimentConfig::from_map(&m).unwrap();
        assert_eq!(c.geom.n(), 16);
        assert_eq!(c.j, vec![3.0, 4.0, 1.0, 2.0]);
        assert_eq!(parse_kv("bogus = 1").unwrap_err().field, "bogus");
    }

    #[test]
    fn names_keep_coordinates() {
        assert_eq!(split_names("Phi+_{1,3}, Wx,Omega-_{4,4}"), vec!["Phi+_{1,3}", "Wx", "Omega-_{4,4}"]);
    }

    #[test]
    fn grids_merge() {
        let c = ExperimentConfig::from_map(&map(&[("gamma", "0.1:0.3:0.1"), ("gamma-log", "1:100:3")])).unwrap();
        assert_eq!(c.gammas.len(), 6);
    }
}
