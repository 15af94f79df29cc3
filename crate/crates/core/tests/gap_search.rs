use gamma_kitaev::gap_search::*;
use gamma_kitaev::gauge::{CanonicalGauge, FluxData, SectorId};
use gamma_kitaev::lattice::LatticeGeometry;
use gamma_kitaev::spectrum::{CouplingParams, SectorEvaluator};

const J1: [f64; 4] = [1.0; 4];
const J3412: [f64; 4] = [3.0, 4.0, 1.0, 2.0];

fn g22() -> LatticeGeometry {
    LatticeGeometry::new(2, 2).unwrap()
}

fn evaluator(j: [f64; 4], gamma: f64) -> SectorEvaluator {
    SectorEvaluator::new(CanonicalGauge::new(g22()), CouplingParams::new(j, gamma).unwrap())
}

#[test]
fn unitary_point_has_zero_gap() {
    let c = exhaustive_sweep(g22(), J1, &[0.0]).unwrap();
    assert!(c.points[0].gap.abs() < 1e-12);
}

#[test]
fn argmin_reproduces_the_gap() {
    let gammas = [0.05, 0.5, 2.0, 9.0];
    for j in [J1, J3412] {
        let c = exhaustive_sweep(g22(), j, &gammas).unwrap();
        for p in &c.points {
            let s = p.argmin.as_ref().unwrap();
            let g = evaluator(j, p.gamma).spectrum(s).unwrap().min_nonzero_rate;
            assert!((g - p.gap).abs() <= 1e-12 * p.gap.max(1.0));
            assert!(p.gap > 0.0 && p.degeneracy >= 1);
            let mode = p.mode.unwrap();
            assert!((-mode.im - p.gap).abs() <= 1e-10);
        }
    }
}

#[test]
fn nv_zero_is_the_reference() {
    let geom = g22();
    let f = FluxData::fiducial(geom);
    let pool = nv_candidates(geom, 0, &f).unwrap();
    assert_eq!(pool, vec![CanonicalGauge::new(geom).sector_from_fluxes(&f).unwrap()]);
}

#[test]
fn nv_search_is_monotone_and_reaches_the_exhaustive_gap() {
    let geom = g22();
    let gammas = [0.1, 1.0, 6.0];
    let f = FluxData::fiducial(geom);
    let exact = exhaustive_sweep(geom, J3412, &gammas).unwrap();
    let mut last_len = 0;
    let mut last: Option<Vec<f64>> = None;
    for nv in 0..=14 {
        let pool = nv_candidates(geom, nv, &f).unwrap();
        assert!(pool.len() >= last_len);
        last_len = pool.len();
        let c = evaluate_pool(geom, J3412, &pool, &gammas).unwrap();
        if let Some(prev) = &last {
            for (a, b) in c.gaps().iter().zip(prev) {
                assert!(*a <= *b);
            }
        }
        last = Some(c.gaps());
        if nv == 14 {
            assert_eq!(pool.len(), 1 << 13);
            assert_eq!(c.gaps(), exact.gaps());
        }
    }
}

#[test]
fn genetic_algorithm_finds_the_minimum() {
    let gamma = 0.7;
    let best = exhaustive_sweep(g22(), J1, &[gamma]).unwrap().points[0].gap;
    let ev = evaluator(J1, gamma);
    let cfg = GaConfig { population_size: 40, runs: 3, generations: 40, seed: 5, ..GaConfig::default() };
    let runs = genetic_algorithm(&ev, &cfg).unwrap();
    assert_eq!(runs.len(), 3);
    for r in &runs {
        assert_eq!(r.trace.len(), 40);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.best_gap >= best - 1e-12);
        let g = ev.gap(&r.sector(13).unwrap()).unwrap().min_nonzero_rate;
        assert!((g - r.best_gap).abs() < 1e-12);
    }
    let pooled = runs.iter().map(|r| r.best_gap).fold(f64::INFINITY, f64::min);
    assert!((pooled - best).abs() <= 1e-12 * best.max(1.0));
    assert_eq!(runs, genetic_algorithm(&ev, &cfg).unwrap());
}

#[test]
fn ga_config_validation() {
    let ev = evaluator(J1, 1.0);
    for cfg in [
        GaConfig { population_size: 1, ..GaConfig::default() },
        GaConfig { runs: 0, ..GaConfig::default() },
        GaConfig { elitism: 200, ..GaConfig::default() },
        GaConfig { crossover_rate: 1.5, ..GaConfig::default() },
        GaConfig { mutation_rate: Some(-0.1), ..GaConfig::default() },
    ] {
        assert!(genetic_algorithm(&ev, &cfg).is_err());
    }
}

#[test]
fn annealing_finds_the_minimum_and_is_deterministic() {
    let gamma = 0.1;
    let best = exhaustive_sweep(g22(), J1, &[gamma]).unwrap().points[0].gap;
    let ev = evaluator(J1, gamma);
    let sched = AnnealSchedule { seed: 9, ..AnnealSchedule::default() };
    let found = (0..4)
        .map(|k| simulated_annealing(&ev, &AnnealSchedule { seed: 9 + k, ..sched }).unwrap())
        .inspect(|r| {
            assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
            assert!(r.best_gap >= best);
        })
        .map(|r| r.best_gap)
        .fold(f64::INFINITY, f64::min);
    assert!((found - best).abs() <= 1e-12 * best.max(1.0), "{found} vs {best}");
    assert_eq!(simulated_annealing(&ev, &sched).unwrap(), simulated_annealing(&ev, &sched).unwrap());
}

#[test]
fn annealing_never_undercuts_the_exhaustive_gap() {
    let gamma = 2.0;
    let best = exhaustive_sweep(g22(), J3412, &[gamma]).unwrap().points[0].gap;
    let ev = evaluator(J3412, gamma);
    for seed in 0..3 {
        let r = simulated_annealing(&ev, &AnnealSchedule { steps: 500, seed, ..AnnealSchedule::default() }).unwrap();
        assert!(r.best_gap >= best);
        assert_eq!(r.trace.len(), 500);
    }
}

#[test]
fn zero_temperature_annealing_never_goes_uphill() {
    let ev = evaluator(J1, 0.4);
    let r = simulated_annealing(&ev, &AnnealSchedule { t_initial: 0.0, t_final: 0.0, steps: 200, seed: 1 }).unwrap();
    assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(simulated_annealing(&ev, &AnnealSchedule { steps: 0, ..AnnealSchedule::default() }).is_err());
}

#[test]
fn pooled_argmins_reproduce_the_exhaustive_curve() {
    let gammas = [0.1, 0.9, 4.0];
    let exact = exhaustive_sweep(g22(), J1, &gammas).unwrap();
    let records: Vec<RunRecord> = exact
        .points
        .iter()
        .map(|p| RunRecord {
            method: "ga".into(),
            gamma: p.gamma,
            seed: 0,
            run: 0,
            trace: vec![p.gap],
            best_sector: p.argmin.as_ref().unwrap().to_hex(),
            best_gap: p.gap,
        })
        .collect();
    let pooled = pooled_ga_curve(g22(), J1, &records, &gammas).unwrap();
    assert_eq!(pooled.gaps(), exact.gaps());
}

#[test]
fn exhaustive_guard() {
    assert!(exhaustive_sweep(LatticeGeometry::new(4, 4).unwrap(), J1, &[1.0]).is_err());
    assert!(exhaustive_sweep(g22(), J1, &[]).is_err());
    assert!(exhaustive_sweep(g22(), J1, &[1.0, 0.5]).is_err());
    assert!(evaluate_pool(g22(), J1, &[], &[1.0]).is_err());
}

#[test]
fn csv_layout() {
    let c = evaluate_pool(g22(), J1, &[SectorId::zeros(13)], &[0.5, 1.0]).unwrap();
    let csv = c.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "gamma,gap,argmin_sector_hex,degeneracy");
    assert_eq!(lines.len(), 3);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[0].parse::<f64>().unwrap(), 0.5);
    assert_eq!(fields[2], "0000");
    assert_eq!(fields[3], "1");
    assert!(c.boundaries.is_empty());
}

#[test]
fn fits_recover_synthetic_laws() {
    let g = log_grid(0.001, 0.1, 10).unwrap();
    let v: Vec<f64> = g.iter().map(|x| 0.8 * x).collect();
    assert!((fit_small_gamma_slope(&g, &v, 0.1).unwrap() - 0.8).abs() < 1e-12);
    let g = log_grid(5.0, 50.0, 10).unwrap();
    let v: Vec<f64> = g.iter().map(|x| 3.0 / x).collect();
    let (p, c) = fit_power_law(&g, &v, 5.0).unwrap();
    assert!((p + 1.0).abs() < 1e-12 && (c - 3.0).abs() < 1e-10);
    assert!(fit_small_gamma_slope(&[1.0, 2.0], &[1.0, 2.0], 0.1).is_err());
    assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0], 5.0).is_err());
}

#[test]
fn grids() {
    assert_eq!(linear_grid(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert!(linear_grid(1.0, 0.0, 0.1).is_err());
    let l = log_grid(1.0, 100.0, 3).unwrap();
    assert!((l[1] - 10.0).abs() < 1e-12 && (l[2] - 100.0).abs() < 1e-12);
    assert_eq!(merge_grids(&[vec![1.0, 2.0], vec![2.0, 0.5]]), vec![0.5, 1.0, 2.0]);
    let d = default_grid();
    assert!(d.windows(2).all(|w| w[1] > w[0]));
    assert!((d[0] - 0.01).abs() < 1e-12 && (d.last().unwrap() - 20.0).abs() < 1e-9);
}
