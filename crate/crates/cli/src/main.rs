use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;

use gamma_kitaev::ed;
use gamma_kitaev::gap_search::{
    exhaustive_sweep, fit_asymptotics, genetic_algorithm, nv_limited_search, pooled_ga_curve, simulated_annealing,
    GapCurve, RunRecord,
};
use gamma_kitaev::gauge::{defect_names, fluxes_from_defects, CanonicalGauge, FluxData, SectorId};
use gamma_kitaev::ladder::ladder_full_spectrum;
use gamma_kitaev::perturbation::{
    master_closed_form_spectrum, min_nonzero_s, translation_invariant_master_matrix, QRestriction,
};
use gamma_kitaev::spectrum::{CouplingParams, SectorEvaluator};

mod config;

use config::{parse_kv, ConfigError, ExperimentConfig, Model};

#[derive(Parser, Debug)]
#[command(name = "gkit", version, about = "Liouvillian gap experiments for the dissipative Dirac-matrix Kitaev bilayer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exhaustive scan over every gauge sector.
    Sweep(Common),
    /// Scan over sectors with at most `--nv` defects relative to the fiducial NESS.
    Nv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nv: Option<String>,
    },
    /// Genetic algorithm at every γ, pooled into one curve.
    Ga {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ga: GaArgs,
    },
    /// Simulated annealing at every γ, pooled into one curve.
    Sa {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<String>,
        #[arg(long)]
        steps: Option<String>,
        #[arg(long = "t-initial")]
        t_initial: Option<String>,
        #[arg(long = "t-final")]
        t_final: Option<String>,
    },
    /// Perturbative limits: master-matrix spectrum and the large-γ `s` eigenvalue.
    Perturb {
        #[command(flatten)]
        common: Common,
        /// Print only the smallest nonzero `s` over all label configurations.
        #[arg(long = "min-s")]
        min_s: bool,
        /// all, single or uniform.
        #[arg(long)]
        restriction: Option<String>,
    },
    /// Exact diagonalisation cross-check against the sector spectra.
    EdCheck {
        #[command(flatten)]
        common: Common,
        /// sk-ladder or bilayer.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        cells: Option<String>,
    },
    /// Defect list of a sector relative to the fiducial NESS.
    Report {
        #[command(flatten)]
        common: Common,
        /// Sector id in hex.
        #[arg(long)]
        sector: Option<String>,
        /// Comma-separated defect names; parsed back and re-listed.
        #[arg(long)]
        defects: Option<String>,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat key=value file; flags override its entries.
    #[arg(long)]
    config: Option<String>,
    /// Lattice WxH, both even.
    #[arg(long)]
    size: Option<String>,
    /// Couplings J1,J2,J3,J4 (Jx,Jy for the ladder).
    #[arg(long = "J")]
    j: Option<String>,
    /// start:stop:step or a single value.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// start:stop:count, log-spaced and merged with --gamma.
    #[arg(long = "gamma-log")]
    gamma_log: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug, Default)]
struct GaArgs {
    #[arg(long)]
    population: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    generations: Option<String>,
    #[arg(long)]
    mutation: Option<String>,
    #[arg(long)]
    crossover: Option<String>,
    #[arg(long)]
    elitism: Option<String>,
    #[arg(long)]
    tournament: Option<String>,
}

enum Failure {
    Config(ConfigError),
    Solver(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<gamma_kitaev::Error> for Failure {
    fn from(e: gamma_kitaev::Error) -> Self {
        Failure::Solver(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Solver(format!("i/o: {e}"))
    }
}

fn set(map: &mut BTreeMap<String, String>, key: &str, v: &Option<String>) {
    if let Some(v) = v {
        map.insert(key.to_string(), v.clone());
    }
}

fn merged(common: &Common, extra: &[(&str, &Option<String>)]) -> Result<BTreeMap<String, String>, Failure> {
    let mut map = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError { field: "config".into(), message: format!("{path}: {e}") })?;
            parse_kv(&text)?
        }
        None => BTreeMap::new(),
    };
    set(&mut map, "size", &common.size);
    set(&mut map, "J", &common.j);
    set(&mut map, "gamma", &common.gamma);
    set(&mut map, "gamma-log", &common.gamma_log);
    set(&mut map, "seed", &common.seed);
    set(&mut map, "threads", &common.threads);
    set(&mut map, "out", &common.out);
    for (k, v) in extra {
        set(&mut map, k, v);
    }
    Ok(map)
}

fn prepare(map: &BTreeMap<String, String>) -> Result<ExperimentConfig, Failure> {
    let cfg = ExperimentConfig::from_map(map)?;
    if let Some(n) = cfg.threads {
        // A second call in the same process fails harmlessly; the first cap stands.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), body)?;
    Ok(())
}

fn defect_line(f: &FluxData) -> String {
    let names = defect_names(f);
    if names.is_empty() {
        "none".into()
    } else {
        names.join(", ")
    }
}

fn defects_report(cfg: &ExperimentConfig, curve: &GapCurve) -> Result<String, Failure> {
    let cg = CanonicalGauge::new(cfg.geom);
    let mut out = String::from("# gamma sector defects (+1 entries relative to the all -1 NESS)\n");
    for p in &curve.points {
        match &p.argmin {
            Some(s) => {
                let f = cg.fluxes_from_sector(s)?;
                out.push_str(&format!("{:.16e} {} {}\n", p.gamma, s.to_hex(), defect_line(&f)));
            }
            None => out.push_str(&format!("{:.16e} - -\n", p.gamma)),
        }
    }
    Ok(out)
}

fn emit_curve(cfg: &ExperimentConfig, curve: &GapCurve) -> Result<(), Failure> {
    write(&cfg.out, "gap_curve.csv", &curve.to_csv())?;
    write(&cfg.out, "defects.txt", &defects_report(cfg, curve)?)?;
    let degs: Vec<usize> = curve.points.iter().map(|p| p.degeneracy).collect();
    println!(
        "{} points, degeneracy {}..{}, regime boundaries {:?}",
        curve.points.len(),
        degs.iter().min().unwrap_or(&0),
        degs.iter().max().unwrap_or(&0),
        curve.boundaries
    );
    let mut last = None;
    for p in &curve.points {
        if last != Some(p.degeneracy) {
            println!("  gamma >= {:.6}: degeneracy {}", p.gamma, p.degeneracy);
            last = Some(p.degeneracy);
        }
    }
    if let Ok(fit) = fit_asymptotics(curve) {
        println!(
            "  small-gamma slope {:.6}, large-gamma exponent {:.6}",
            fit.small_gamma_slope, fit.large_gamma_exponent
        );
    }
    println!("wrote {}", cfg.out.join("gap_curve.csv").display());
    Ok(())
}

fn emit_runs(cfg: &ExperimentConfig, records: &[RunRecord]) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(records).map_err(|e| Failure::Solver(e.to_string()))?;
    write(&cfg.out, "runs.json", &(json + "\n"))
}

fn bilayer_only(cfg: &ExperimentConfig) -> Result<(), Failure> {
    if cfg.model != Model::Bilayer {
        return Err(ConfigError { field: "model".into(), message: "this subcommand needs the bilayer".into() }.into());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep(common) => {
            let cfg = prepare(&merged(&common, &[])?)?;
            bilayer_only(&cfg)?;
            let curve = exhaustive_sweep(cfg.geom, cfg.couplings(), &cfg.gammas)?;
            emit_curve(&cfg, &curve)
        }
        Command::Nv { common, nv } => {
            let cfg = prepare(&merged(&common, &[("nv", &nv)])?)?;
            bilayer_only(&cfg)?;
            let reference = FluxData::fiducial(cfg.geom);
            let curve = nv_limited_search(cfg.geom, cfg.couplings(), &cfg.gammas, cfg.nv, &reference)?;
            emit_curve(&cfg, &curve)
        }
        Command::Ga { common, ga } => {
            let extra = [
                ("population", &ga.population),
                ("runs", &ga.runs),
                ("generations", &ga.generations),
                ("mutation", &ga.mutation),
                ("crossover", &ga.crossover),
                ("elitism", &ga.elitism),
                ("tournament", &ga.tournament),
            ];
            let cfg = prepare(&merged(&common, &extra)?)?;
            bilayer_only(&cfg)?;
            let base = SectorEvaluator::new(CanonicalGauge::new(cfg.geom), CouplingParams::new(cfg.couplings(), 0.0)?);
            let mut records = Vec::new();
            for &g in &cfg.gammas {
                records.extend(genetic_algorithm(&base.with_gamma(g), &cfg.ga)?);
            }
            emit_runs(&cfg, &records)?;
            let curve = pooled_ga_curve(cfg.geom, cfg.couplings(), &records, &cfg.gammas)?;
            emit_curve(&cfg, &curve)
        }
        Command::Sa { common, runs, steps, t_initial, t_final } => {
            let extra = [("runs", &runs), ("steps", &steps), ("t-initial", &t_initial), ("t-final", &t_final)];
            let cfg = prepare(&merged(&common, &extra)?)?;
            bilayer_only(&cfg)?;
            let base = SectorEvaluator::new(CanonicalGauge::new(cfg.geom), CouplingParams::new(cfg.couplings(), 0.0)?);
            let mut records = Vec::new();
            for &g in &cfg.gammas {
                for run in 0..cfg.ga.runs {
                    let mut schedule = cfg.anneal;
                    schedule.seed = cfg.seed.wrapping_add(run as u64);
                    let mut rec = simulated_annealing(&base.with_gamma(g), &schedule)?;
                    rec.run = run;
                    records.push(rec);
                }
            }
            emit_runs(&cfg, &records)?;
            let curve = pooled_ga_curve(cfg.geom, cfg.couplings(), &records, &cfg.gammas)?;
            emit_curve(&cfg, &curve)
        }
        Command::Perturb { common, min_s, restriction } => {
            let cfg = prepare(&merged(&common, &[("restriction", &restriction)])?)?;
            let r = match cfg.restriction.as_str() {
                "single" => QRestriction::SingleSiteDefects,
                "uniform" => QRestriction::Uniform,
                _ => QRestriction::All,
            };
            if min_s {
                match min_nonzero_s(&cfg.geom, r)? {
                    Some(s) => println!("{s}"),
                    None => println!("none"),
                }
                return Ok(());
            }
            let cells = cfg.geom.n_cells();
            let mut numeric = translation_invariant_master_matrix(cells)?.eigenvalues()?;
            let mut closed = master_closed_form_spectrum(cells);
            numeric.sort_by(f64::total_cmp);
            closed.sort_by(f64::total_cmp);
            let dev = numeric.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let next = closed.iter().rev().find(|x| x.abs() > 1e-9).copied();
            println!("translation-invariant master matrix: {} eigenvalues, max deviation from closed form {dev:.3e}", numeric.len());
            if let Some(x) = next {
                println!("largest nonzero eigenvalue {x}");
            }
            match min_nonzero_s(&cfg.geom, r) {
                Ok(Some(s)) => println!("min nonzero s ({}) = {s}", cfg.restriction),
                Ok(None) => println!("min nonzero s ({}) = none", cfg.restriction),
                Err(e) => println!("min nonzero s skipped: {e}"),
            }
            Ok(())
        }
        Command::EdCheck { common, model, cells } => {
            let mut map = merged(&common, &[("model", &model), ("cells", &cells)])?;
            if !map.contains_key("gamma") && !map.contains_key("gamma-log") {
                map.insert("gamma".into(), "0:1:0.5".into());
            }
            let cfg = prepare(&map)?;
            match cfg.model {
                Model::SkLadder => ed_check_ladder(&cfg),
                Model::Bilayer => ed_check_bilayer(&cfg),
            }
        }
        Command::Report { common, sector, defects } => {
            let cfg = prepare(&merged(&common, &[("sector", &sector), ("defects", &defects)])?)?;
            let f = match (&cfg.sector, &cfg.defects) {
                (Some(hex), None) => {
                    let cg = CanonicalGauge::new(cfg.geom);
                    let s = SectorId::from_hex(cfg.geom.sector_bits(), hex)
                        .map_err(|e| ConfigError { field: "sector".into(), message: e.to_string() })?;
                    cg.fluxes_from_sector(&s)?
                }
                (None, Some(names)) => {
                    let names: Vec<&str> = names.iter().map(String::as_str).collect();
                    fluxes_from_defects(cfg.geom, &names)
                        .map_err(|e| ConfigError { field: "defects".into(), message: e.to_string() })?
                }
                _ => {
                    return Err(ConfigError { field: "sector".into(), message: "give exactly one of --sector or --defects".into() }
                        .into())
                }
            };
            let cg = CanonicalGauge::new(cfg.geom);
            let line = format!("{} {}\n", cg.sector_from_fluxes(&f)?.to_hex(), defect_line(&f));
            print!("{line}");
            write(&cfg.out, "defects.txt", &line)
        }
    }
}

fn ed_check_ladder(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let (jx, jy) = (cfg.j[0], cfg.j[1]);
    for &g in &cfg.gammas {
        let gen = ed::sk_generator(cfg.cells, jx, jy, g)?;
        let dense = gen.dense_eigenvalues()?;
        let sectors = ladder_full_spectrum(cfg.cells, jx, jy, g)?;
        let dist = ed::multiset_distance(&dense, &sectors)?;
        let clusters = ed::compare_by_clusters(&dense, &sectors, 1e-3);
        let moments = ed::moment_crosscheck(&gen, &sectors, &[1, 2, 3])?;
        let worst = moments.iter().map(|m| m.relative_error()).fold(0.0, f64::max);
        println!(
            "jx={jx} jy={jy} gamma={g}: dim {}, multiset distance {dist:.3e}, cluster-mean distance {:.3e} ({} unmatched), moment rel. error {worst:.3e}",
            dense.len(),
            clusters.max_mean_distance,
            clusters.unmatched
        );
    }
    Ok(())
}

fn ed_check_bilayer(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let ops = gamma_kitaev::clifford::build_model_operators(cfg.geom, cfg.couplings())?;
    let projectors: Vec<_> = (0..ops.projector_count()).map(|i| ops.projector(i).matrix).collect();
    let cg = CanonicalGauge::new(cfg.geom);
    for &g in &cfg.gammas {
        let gen = ed::bilayer_generator(&ops, g)?;
        let ev = SectorEvaluator::new(cg.clone(), CouplingParams::new(cfg.couplings(), g)?);
        let bits = cfg.geom.sector_bits();
        let mut spectrum: Vec<C64> = Vec::new();
        for idx in 0..1u64 << bits {
            spectrum.extend(ev.spectrum(&SectorId::from_index(bits, idx))?.full_spectrum.unwrap_or_default());
        }
        let moments = ed::moment_crosscheck(&gen, &spectrum, &[1, 2, 3])?;
        let worst = moments.iter().map(|m| m.relative_error()).fold(0.0, f64::max);
        let ann = ed::check_ness_annihilation(&gen, &projectors)?;
        println!(
            "gamma={g}: dim {}, moment rel. error (m=1..3) {worst:.3e}, {} projectors, max residual {:.3e}",
            gen.dim(),
            projectors.len(),
            ann.max_residual()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
