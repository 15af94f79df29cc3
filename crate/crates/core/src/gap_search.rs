//! Liouvillian gap `g(γ)`: the smallest nonzero relaxation rate over all
//! gauge sectors, found by exhaustion, defect-limited enumeration,
//! simulated annealing or a genetic algorithm.

use std::collections::BTreeSet;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{defect_vocabulary, CanonicalGauge, FluxData, SectorId};
use crate::lattice::LatticeGeometry;
use crate::spectrum::{CouplingParams, SectorEvaluator};

/// Relative tolerance for counting sectors that share the minimal rate.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Largest sector-bit count accepted by [`exhaustive_sweep`].
pub const MAX_EXHAUSTIVE_BITS: usize = 16;
/// Largest number of candidate defect sets for [`nv_limited_search`].
pub const MAX_NV_CANDIDATES: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GapPoint {
    pub gamma: f64,
    /// Infinite when no evaluated sector has a nonzero mode.
    pub gap: f64,
    /// Smallest sector (in [`SectorId`] order) attaining the gap exactly.
    pub argmin: Option<SectorId>,
    /// Number of evaluated sectors within [`DEGENERACY_TOL`] of the gap.
    pub degeneracy: usize,
    /// Eigenvalue `E` of `W` realising the gap in the argmin sector.
    pub mode: Option<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCurve {
    pub points: Vec<GapPoint>,
    /// Midpoints between neighbouring γ values whose argmin sectors differ.
    pub boundaries: Vec<f64>,
}

impl GapCurve {
    pub fn from_points(points: Vec<GapPoint>) -> Self {
        let boundaries = regime_boundaries(&points);
        Self { points, boundaries }
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gamma).collect()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gap).collect()
    }

    /// CSV with columns `gamma,gap,argmin_sector_hex,degeneracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,gap,argmin_sector_hex,degeneracy\n");
        for p in &self.points {
            let hex = p.argmin.as_ref().map(|s| s.to_hex()).unwrap_or_default();
            out.push_str(&format!("{:.16e},{:.16e},{},{}\n", p.gamma, p.gap, hex, p.degeneracy));
        }
        out
    }
}

pub fn regime_boundaries(points: &[GapPoint]) -> Vec<f64> {
    points
        .windows(2)
        .filter(|w| w[0].argmin.is_some() && w[1].argmin.is_some() && w[0].argmin != w[1].argmin)
        .map(|w| 0.5 * (w[0].gamma + w[1].gamma))
        .collect()
}

fn check_grid(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::Param("empty gamma grid".into()));
    }
    if gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::Param("gamma values must be finite and nonnegative".into()));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Param("gamma values must be strictly increasing".into()));
    }
    Ok(())
}

/// Reduces per-sector `(rate, mode)` results to a gap point.
fn reduce(gamma: f64, results: Vec<(SectorId, f64, Option<C64>)>) -> GapPoint {
    let gap = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    if !gap.is_finite() {
        return GapPoint { gamma, gap, argmin: None, degeneracy: 0, mode: None };
    }
    let tol = DEGENERACY_TOL * gap.max(f64::MIN_POSITIVE);
    let degeneracy = results.iter().filter(|r| (r.1 - gap).abs() <= tol).count();
    let first = results.iter().filter(|r| r.1 == gap).min_by(|a, b| a.0.cmp(&b.0)).unwrap();
    GapPoint { gamma, gap, argmin: Some(first.0.clone()), degeneracy, mode: first.2 }
}

/// Evaluates the gap of every sector in `pool` at each γ.
pub fn evaluate_pool(geom: LatticeGeometry, j: [f64; 4], pool: &[SectorId], gammas: &[f64]) -> Result<GapCurve> {
    check_grid(gammas)?;
    if pool.is_empty() {
        return Err(Error::Param("empty sector pool".into()));
    }
    let base = SectorEvaluator::new(CanonicalGauge::new(geom), CouplingParams::new(j, gammas[0])?);
    let mut points = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let ev = base.with_gamma(gamma);
        let results: Result<Vec<_>> = pool
            .par_iter()
            .map(|s| ev.gap(s).map(|r| (s.clone(), r.min_nonzero_rate, r.min_mode)))
            .collect();
        points.push(reduce(gamma, results?));
    }
    Ok(GapCurve::from_points(points))
}

/// Exact gap over all `2^{3N+1}` sectors.
pub fn exhaustive_sweep(geom: LatticeGeometry, j: [f64; 4], gammas: &[f64]) -> Result<GapCurve> {
    let bits = geom.sector_bits();
    if bits > MAX_EXHAUSTIVE_BITS {
        return Err(Error::Guard(format!("{bits} sector bits exceeds the exhaustive limit of {MAX_EXHAUSTIVE_BITS}")));
    }
    let pool: Vec<SectorId> = (0..1u64 << bits).map(|i| SectorId::from_index(bits, i)).collect();
    evaluate_pool(geom, j, &pool, gammas)
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Sectors whose independent flux data differ from `reference` in at most
/// `nv` entries. Defect sets that violate the flux constraints are skipped.
pub fn nv_candidates(geom: LatticeGeometry, nv: usize, reference: &FluxData) -> Result<Vec<SectorId>> {
    let vocab = defect_vocabulary(&geom).len();
    let total: u64 = (0..=nv.min(vocab) as u64).map(|k| binomial(vocab as u64, k)).fold(0, u64::saturating_add);
    if total > MAX_NV_CANDIDATES {
        return Err(Error::Guard(format!("{total} defect sets exceeds {MAX_NV_CANDIDATES}")));
    }
    let canonical = CanonicalGauge::new(geom);
    let base = reference.independent();
    let mut out = BTreeSet::new();
    let mut chosen: Vec<usize> = Vec::with_capacity(nv);
    fn recurse(
        start: usize,
        left: usize,
        chosen: &mut Vec<usize>,
        base: &[i8],
        geom: LatticeGeometry,
        canonical: &CanonicalGauge,
        out: &mut BTreeSet<SectorId>,
    ) -> Result<()> {
        let mut v = base.to_vec();
        for &k in chosen.iter() {
            v[k] = -v[k];
        }
        if let Ok(f) = FluxData::from_independent(geom, &v) {
            out.insert(canonical.sector_from_fluxes(&f)?);
        }
        if left == 0 {
            return Ok(());
        }
        for k in start..base.len() {
            chosen.push(k);
            recurse(k + 1, left - 1, chosen, base, geom, canonical, out)?;
            chosen.pop();
        }
        Ok(())
    }
    recurse(0, nv.min(vocab), &mut chosen, &base, geom, &canonical, &mut out)?;
    Ok(out.into_iter().collect())
}

pub fn nv_limited_search(
    geom: LatticeGeometry,
    j: [f64; 4],
    gammas: &[f64],
    nv: usize,
    reference: &FluxData,
) -> Result<GapCurve> {
    let pool = nv_candidates(geom, nv, reference)?;
    evaluate_pool(geom, j, &pool, gammas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub runs: usize,
    pub generations: usize,
    /// Per-bit flip probability; `None` means `2 / (3N+1)`.
    pub mutation_rate: Option<f64>,
    pub crossover_rate: f64,
    pub elitism: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            runs: 10,
            generations: 200,
            mutation_rate: None,
            crossover_rate: 0.7,
            elitism: 2,
            tournament_size: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Param("population_size must be at least 2".into()));
        }
        if self.runs == 0 || self.generations == 0 || self.tournament_size == 0 {
            return Err(Error::Param("runs, generations and tournament_size must be positive".into()));
        }
        if self.elitism > self.population_size {
            return Err(Error::Param("elitism exceeds population_size".into()));
        }
        let probs = [self.crossover_rate, self.mutation_rate.unwrap_or(0.0)];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Param("rates must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub gamma: f64,
    pub seed: u64,
    pub run: usize,
    /// Best fitness after each generation (or annealing step).
    pub trace: Vec<f64>,
    pub best_sector: String,
    pub best_gap: f64,
}

impl RunRecord {
    pub fn sector(&self, bits: usize) -> Result<SectorId> {
        SectorId::from_hex(bits, &self.best_sector)
    }
}

fn fitness(ev: &SectorEvaluator, s: &SectorId) -> Result<f64> {
    Ok(ev.gap(s)?.min_nonzero_rate)
}

fn rank(pop: &mut [(SectorId, f64)]) {
    pop.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
}

/// Independent runs of a bit-string genetic algorithm over sector ids.
/// Run `k` draws from a stream seeded with `seed + k`; fitness evaluation is
/// parallel but does not touch the random stream.
pub fn genetic_algorithm(ev: &SectorEvaluator, cfg: &GaConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let bits = ev.canonical.geometry().sector_bits();
    let mutation = cfg.mutation_rate.unwrap_or(2.0 / bits as f64);
    let evaluate = |genomes: Vec<SectorId>| -> Result<Vec<(SectorId, f64)>> {
        genomes.into_par_iter().map(|s| fitness(ev, &s).map(|f| (s, f))).collect()
    };
    let mut records = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let seed = cfg.seed.wrapping_add(run as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let initial = (0..cfg.population_size).map(|_| SectorId::random(bits, &mut rng)).collect();
        let mut pop = evaluate(initial)?;
        rank(&mut pop);
        let mut trace = Vec::with_capacity(cfg.generations);
        for _ in 0..cfg.generations {
            let mut children: Vec<SectorId> = Vec::with_capacity(cfg.population_size);
            while children.len() + cfg.elitism < cfg.population_size {
                let a = tournament(&pop, cfg.tournament_size, &mut rng);
                let b = tournament(&pop, cfg.tournament_size, &mut rng);
                let mut child = pop[a].0.clone();
                if rng.gen::<f64>() < cfg.crossover_rate {
                    for i in 0..bits {
                        if rng.gen::<bool>() {
                            child.set(i, pop[b].0.get(i));
                        }
                    }
                }
                for i in 0..bits {
                    if rng.gen::<f64>() < mutation {
                        child.flip(i);
                    }
                }
                children.push(child);
            }
            let mut next: Vec<(SectorId, f64)> = pop[..cfg.elitism].to_vec();
            next.extend(evaluate(children)?);
            rank(&mut next);
            pop = next;
            trace.push(pop[0].1);
        }
        records.push(RunRecord {
            method: "ga".into(),
            gamma: ev.params.gamma,
            seed,
            run,
            trace,
            best_sector: pop[0].0.to_hex(),
            best_gap: pop[0].1,
        });
    }
    Ok(records)
}

/// Index of the fittest of `size` uniformly drawn members of a ranked population.
fn tournament<R: Rng>(pop: &[(SectorId, f64)], size: usize, rng: &mut R) -> usize {
    (0..size).map(|_| rng.gen_range(0..pop.len())).min().unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t_initial: f64,
    pub t_final: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { t_initial: 2.0, t_final: 1e-3, steps: 4000, seed: 0 }
    }
}

/// Single-bit-flip Metropolis search with geometric cooling. A zero initial
/// temperature gives greedy descent.
pub fn simulated_annealing(ev: &SectorEvaluator, schedule: &AnnealSchedule) -> Result<RunRecord> {
    if schedule.steps == 0 || schedule.t_initial < 0.0 || schedule.t_final < 0.0 {
        return Err(Error::Param("annealing needs positive steps and nonnegative temperatures".into()));
    }
    let bits = ev.canonical.geometry().sector_bits();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut current = SectorId::random(bits, &mut rng);
    let mut f_cur = fitness(ev, &current)?;
    let (mut best, mut f_best) = (current.clone(), f_cur);
    let mut trace = Vec::with_capacity(schedule.steps);
    let ratio = if schedule.t_initial > 0.0 { schedule.t_final / schedule.t_initial } else { 0.0 };
    for step in 0..schedule.steps {
        let frac = if schedule.steps > 1 { step as f64 / (schedule.steps - 1) as f64 } else { 1.0 };
        let t = schedule.t_initial * ratio.powf(frac);
        let mut cand = current.clone();
        cand.flip(rng.gen_range(0..bits));
        let f_new = fitness(ev, &cand)?;
        let u: f64 = rng.gen();
        let accept = if !f_cur.is_finite() {
            true
        } else if !f_new.is_finite() {
            false
        } else {
            let d = f_new - f_cur;
            d <= 0.0 || (t > 0.0 && u < (-d / t).exp())
        };
        if accept {
            current = cand;
            f_cur = f_new;
            if f_cur < f_best || (f_cur == f_best && current < best) {
                best = current.clone();
                f_best = f_cur;
            }
        }
        trace.push(f_best);
    }
    Ok(RunRecord {
        method: "sa".into(),
        gamma: ev.params.gamma,
        seed: schedule.seed,
        run: 0,
        trace,
        best_sector: best.to_hex(),
        best_gap: f_best,
    })
}

/// Collects the best sector of every record and evaluates the pool on the grid.
pub fn pooled_ga_curve(geom: LatticeGeometry, j: [f64; 4], records: &[RunRecord], gammas: &[f64]) -> Result<GapCurve> {
    let bits = geom.sector_bits();
    let pool: BTreeSet<SectorId> = records.iter().map(|r| r.sector(bits)).collect::<Result<_>>()?;
    let pool: Vec<SectorId> = pool.into_iter().collect();
    evaluate_pool(geom, j, &pool, gammas)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticFit {
    /// `g ≈ a γ` through the origin for small γ.
    pub small_gamma_slope: f64,
    /// `g ≈ C γ^p` for large γ.
    pub large_gamma_exponent: f64,
    pub large_gamma_coefficient: f64,
}

/// Least-squares slope through the origin over points with `0 < γ ≤ max_gamma`.
pub fn fit_small_gamma_slope(gammas: &[f64], gaps: &[f64], max_gamma: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> =
        gammas.iter().zip(gaps).filter(|(g, v)| **g > 0.0 && **g <= max_gamma && v.is_finite()).map(|(g, v)| (*g, *v)).collect();
    if pts.len() < 2 {
        return Err(Error::Param(format!("need at least two points with gamma <= {max_gamma}")));
    }
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    Ok(sxy / sxx)
}

/// Log-log least squares over points with `γ ≥ min_gamma`; returns `(p, C)`.
pub fn fit_power_law(gammas: &[f64], gaps: &[f64], min_gamma: f64) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = gammas
        .iter()
        .zip(gaps)
        .filter(|(g, v)| **g >= min_gamma && v.is_finite() && **v > 0.0)
        .map(|(g, v)| (g.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Param(format!("need at least two positive points with gamma >= {min_gamma}")));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Param("power-law fit needs distinct gamma values".into()));
    }
    let p = sxy / sxx;
    Ok((p, (my - p * mx).exp()))
}

pub fn fit_asymptotics(curve: &GapCurve) -> Result<AsymptoticFit> {
    let (g, v) = (curve.gammas(), curve.gaps());
    let small_gamma_slope = fit_small_gamma_slope(&g, &v, 0.1)?;
    let (large_gamma_exponent, large_gamma_coefficient) = fit_power_law(&g, &v, 5.0)?;
    Ok(AsymptoticFit { small_gamma_slope, large_gamma_exponent, large_gamma_coefficient })
}

/// `start, start+step, …` up to `stop` inclusive (within half a step).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step <= 0.0 || stop < start {
        return Err(Error::Param("linear grid needs step > 0 and stop >= start".into()));
    }
    let n = ((stop - start) / step + 0.5).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// `count` log-spaced points from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if start <= 0.0 || stop <= start || count < 2 {
        return Err(Error::Param("log grid needs 0 < start < stop and at least two points".into()));
    }
    let (a, b) = (start.ln(), stop.ln());
    Ok((0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect())
}

/// Merges grids into one strictly increasing list.
pub fn merge_grids(parts: &[Vec<f64>]) -> Vec<f64> {
    let mut all: Vec<f64> = parts.iter().flatten().cloned().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    all
}

/// 0.01 to 1.01 in steps of 0.05, then a log-spaced tail to 20.
pub fn default_grid() -> Vec<f64> {
    merge_grids(&[linear_grid(0.01, 1.01, 0.05).unwrap(), log_grid(1.01, 20.0, 12).unwrap()])
}
