//! The five experiment kinds.
//!
//! Grids inside an experiment (N values, preparation points, robustness
//! variants) run point by point; a failed point is reported in the manifest
//! and the remaining points are still written.

use gkp_floquet::floquet::{self, FloquetReport, StateMetrics};
use gkp_floquet::metrics::{self, LogicalTarget};
use gkp_floquet::model::ModelParams;
use gkp_floquet::noise::{ensemble_prepare, NoiseConfig};
use gkp_floquet::prep::{prepare, RampSchedule};
use gkp_floquet::workbench::Workbench;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Kind, WhichState};
use crate::output::{PointStatus, Table};
use crate::Failure;

/// Everything a run writes besides metadata.
pub struct Outcome {
    pub tables: Vec<Table>,
    pub results: serde_json::Value,
    pub summary: String,
    /// Empty for single-point experiments.
    pub points: Vec<PointStatus>,
}

pub fn run(cfg: &ExperimentConfig, hash: &str) -> Result<Outcome, Failure> {
    match cfg.kind {
        Kind::FloquetScan => floquet_scan(cfg, hash),
        Kind::NSweep => n_sweep(cfg, hash),
        Kind::PrepSweep => prep_sweep(cfg, hash),
        Kind::RobustnessSweep => robustness_sweep(cfg, hash),
        Kind::WignerDump => wigner_dump(cfg, hash),
    }
}

fn analyze(cfg: &ExperimentConfig, params: ModelParams) -> Result<FloquetReport, Failure> {
    let bench = Workbench::new(params, cfg.dim)?;
    let integrator = if params.n_harmonics == cfg.model.n_harmonics {
        cfg.integrator()
    } else {
        floquet::IntegratorConfig::for_harmonics(params.n_harmonics)
    };
    Ok(floquet::analyze(&bench, integrator)?)
}

fn db_of(m: &StateMetrics) -> (f64, f64) {
    m.squeezing.map_or((f64::NAN, f64::NAN), |s| (s.db_x, s.db_p))
}

#[derive(Serialize)]
struct StateRow<'a> {
    config_hash: &'a str,
    index: usize,
    quasienergy: f64,
    db_x: f64,
    db_p: f64,
    fidelity_plus: f64,
    fidelity_minus: f64,
    rotation: f64,
    mean_photon_number: f64,
    role: &'static str,
}

fn floquet_scan(cfg: &ExperimentConfig, hash: &str) -> Result<Outcome, Failure> {
    let report = analyze(cfg, cfg.model)?;
    let pair = report.pair;
    let rows: Vec<StateRow> = report
        .metrics
        .iter()
        .map(|m| {
            let (db_x, db_p) = db_of(m);
            let role = if m.index == pair.plus.index {
                "psi_plus"
            } else if m.index == pair.minus.index {
                "psi_minus"
            } else {
                ""
            };
            StateRow {
                config_hash: hash,
                index: m.index,
                quasienergy: m.quasienergy,
                db_x,
                db_p,
                fidelity_plus: m.fidelity_plus,
                fidelity_minus: m.fidelity_minus,
                rotation: m.rotation,
                mean_photon_number: m.mean_photon_number,
                role,
            }
        })
        .collect();
    let summary = format!(
        "Floquet pair at N = {}: psi_plus {:.3} dB, 1-F {:.3e}; psi_minus {:.3} dB, 1-F {:.3e}\n",
        cfg.model.n_harmonics,
        db_of(&pair.plus).0,
        1.0 - pair.plus.fidelity_plus,
        db_of(&pair.minus).0,
        1.0 - pair.minus.fidelity_minus
    );
    Ok(Outcome {
        tables: vec![Table::from_rows("floquet_states", &rows)?],
        results: json!({
            "config_hash": hash,
            "pair": pair,
            "eig_residual": report.solution.eig_residual,
            "integrator": report.integrator,
        }),
        summary,
        points: Vec::new(),
    })
}

#[derive(Serialize)]
struct PairRow<'a> {
    config_hash: &'a str,
    n_harmonics: usize,
    plus_db_x: f64,
    plus_db_p: f64,
    plus_infidelity: f64,
    minus_db_x: f64,
    minus_db_p: f64,
    minus_infidelity: f64,
    plus_quasienergy: f64,
    minus_quasienergy: f64,
}

fn n_sweep(cfg: &ExperimentConfig, hash: &str) -> Result<Outcome, Failure> {
    let results: Vec<Result<FloquetReport, Failure>> =
        cfg.n_sweep.n_values.par_iter().map(|&n| analyze(cfg, ModelParams { n_harmonics: n, ..cfg.model })).collect();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut summary = String::new();
    for (&n, r) in cfg.n_sweep.n_values.iter().zip(&results) {
        points.push(PointStatus::new(format!("n_harmonics={n}"), r));
        let Ok(report) = r else { continue };
        let (p, m) = (&report.pair.plus, &report.pair.minus);
        let row = PairRow {
            config_hash: hash,
            n_harmonics: n,
            plus_db_x: db_of(p).0,
            plus_db_p: db_of(p).1,
            plus_infidelity: 1.0 - p.fidelity_plus,
            minus_db_x: db_of(m).0,
            minus_db_p: db_of(m).1,
            minus_infidelity: 1.0 - m.fidelity_minus,
            plus_quasienergy: p.quasienergy,
            minus_quasienergy: m.quasienergy,
        };
        summary += &format!(
            "N = {n}: psi_plus {:.3} dB (1-F {:.2e}), psi_minus {:.3} dB (1-F {:.2e})\n",
            row.plus_db_x, row.plus_infidelity, row.minus_db_x, row.minus_infidelity
        );
        rows.push(row);
    }
    Ok(Outcome {
        tables: vec![Table::from_rows("n_sweep", &rows)?],
        results: json!({ "config_hash": hash, "n_values": cfg.n_sweep.n_values }),
        summary,
        points,
    })
}

#[derive(Serialize)]
struct PrepRow<'a> {
    config_hash: &'a str,
    t_f: f64,
    quality_factor: f64,
    flux_noise: bool,
    n_trajectories: usize,
    db_x: f64,
    db_x_se: f64,
    db_p: f64,
    db_p_se: f64,
    infidelity: f64,
    infidelity_se: f64,
    mean_jumps: f64,
}

#[derive(Serialize)]
struct TimelineRow<'a> {
    config_hash: &'a str,
    t_f: f64,
    quality_factor: f64,
    flux_noise: bool,
    t_periods: f64,
    omega: f64,
    db_x: f64,
    db_x_se: f64,
    db_p: f64,
    db_p_se: f64,
    fidelity: f64,
    fidelity_se: f64,
    mean_photon_number: f64,
    mean_photon_number_se: f64,
}

struct PrepPoint {
    t_f: f64,
    quality_factor: f64,
    flux: bool,
}

fn prep_point<'a>(
    cfg: &ExperimentConfig,
    hash: &'a str,
    pt: &PrepPoint,
) -> Result<(PrepRow<'a>, Vec<TimelineRow<'a>>), Failure> {
    let bench = Workbench::new(cfg.model, cfg.dim)?;
    let initial = bench.space().fock(0)?;
    let schedule = RampSchedule { t_f: pt.t_f, ..cfg.ramp };
    let quality_factor = pt.quality_factor.is_finite().then_some(pt.quality_factor);
    let flux_noise = pt.flux.then(|| cfg.noise.flux_noise.unwrap_or_default());
    let target = LogicalTarget::HPlus;
    if quality_factor.is_none() && flux_noise.is_none() {
        let run = prepare(&bench, &initial, &schedule, &cfg.prep, target)?;
        let timeline = run
            .timeline
            .iter()
            .map(|r| TimelineRow {
                config_hash: hash,
                t_f: pt.t_f,
                quality_factor: pt.quality_factor,
                flux_noise: pt.flux,
                t_periods: r.t_periods,
                omega: r.omega,
                db_x: r.db_x,
                db_x_se: 0.0,
                db_p: r.db_p,
                db_p_se: 0.0,
                fidelity: r.fidelity,
                fidelity_se: 0.0,
                mean_photon_number: r.mean_photon_number,
                mean_photon_number_se: 0.0,
            })
            .collect();
        let row = PrepRow {
            config_hash: hash,
            t_f: pt.t_f,
            quality_factor: pt.quality_factor,
            flux_noise: false,
            n_trajectories: 1,
            db_x: run.squeezing.db_x,
            db_x_se: 0.0,
            db_p: run.squeezing.db_p,
            db_p_se: 0.0,
            infidelity: run.infidelity(),
            infidelity_se: 0.0,
            mean_jumps: 0.0,
        };
        return Ok((row, timeline));
    }
    let noise = NoiseConfig { quality_factor, flux_noise, ..cfg.noise };
    let run = ensemble_prepare(&bench, &initial, &schedule, &cfg.prep, &noise, target)?;
    let (db_x_se, db_p_se, infidelity_se) = run.final_errors();
    let jumps: usize = run.trajectories.iter().map(|t| t.jump_times.len()).sum();
    let timeline = run
        .timeline
        .iter()
        .map(|r| TimelineRow {
            config_hash: hash,
            t_f: pt.t_f,
            quality_factor: pt.quality_factor,
            flux_noise: pt.flux,
            t_periods: r.t_periods,
            omega: r.omega,
            db_x: r.db_x,
            db_x_se: r.db_x_se,
            db_p: r.db_p,
            db_p_se: r.db_p_se,
            fidelity: r.fidelity,
            fidelity_se: r.fidelity_se,
            mean_photon_number: r.mean_photon_number,
            mean_photon_number_se: r.mean_photon_number_se,
        })
        .collect();
    let row = PrepRow {
        config_hash: hash,
        t_f: pt.t_f,
        quality_factor: pt.quality_factor,
        flux_noise: pt.flux,
        n_trajectories: noise.n_trajectories,
        db_x: run.squeezing.db_x,
        db_x_se,
        db_p: run.squeezing.db_p,
        db_p_se,
        infidelity: run.infidelity(),
        infidelity_se,
        mean_jumps: jumps as f64 / noise.n_trajectories as f64,
    };
    Ok((row, timeline))
}

fn prep_sweep(cfg: &ExperimentConfig, hash: &str) -> Result<Outcome, Failure> {
    let s = &cfg.prep_sweep;
    let mut grid = Vec::new();
    for &quality_factor in &s.quality_factors {
        for &flux in &s.flux_noise {
            for &t_f in &s.t_f {
                grid.push(PrepPoint { t_f, quality_factor, flux });
            }
        }
    }
    // Points run one after another; each ensemble is parallel inside.
    let results: Vec<_> = grid.iter().map(|pt| prep_point(cfg, hash, pt)).collect();
    let mut rows = Vec::new();
    let mut timeline = Vec::new();
    let mut points = Vec::new();
    let mut summary = String::new();
    for (pt, r) in grid.iter().zip(results) {
        let label = format!("t_f={} quality_factor={} flux_noise={}", pt.t_f, pt.quality_factor, pt.flux);
        points.push(PointStatus::new(label.clone(), &r));
        if let Ok((row, tl)) = r {
            summary += &format!("{label}: {:.3} dB, 1-F {:.3e}\n", row.db_x, row.infidelity);
            rows.push(row);
            timeline.extend(tl);
        }
    }
    let flux = cfg.noise.flux_noise.unwrap_or_default();
    Ok(Outcome {
        tables: vec![Table::from_rows("prep_sweep", &rows)?, Table::from_rows("prep_timeline", &timeline)?],
        results: json!({
            "config_hash": hash,
            "ramp": cfg.ramp,
            "prep": cfg.prep,
            "n_trajectories": cfg.noise.n_trajectories,
            "flux_noise": flux,
        }),
        summary,
        points,
    })
}

#[derive(Serialize)]
struct RobustRow<'a> {
    config_hash: &'a str,
    axis: &'static str,
    value: f64,
    db_x: f64,
    infidelity: f64,
    db_drop: f64,
    infidelity_rise: f64,
    within_bounds: bool,
}

/// Bounds of the robustness statement: at most 0.7 dB and 4e-3 worse.
pub const MAX_DB_DROP: f64 = 0.7;
pub const MAX_INFIDELITY_RISE: f64 = 4e-3;

fn robustness_sweep(cfg: &ExperimentConfig, hash: &str) -> Result<Outcome, Failure> {
    let base = analyze(cfg, cfg.model)?;
    let (db0, inf0) = (db_of(&base.pair.plus).0, 1.0 - base.pair.plus.fidelity_plus);
    let mut variants: Vec<(&'static str, f64, ModelParams)> = Vec::new();
    for &z in &cfg.robustness.impedance_ratio {
        variants.push(("impedance_ratio", z, ModelParams { impedance_ratio: z, ..cfg.model }));
    }
    for &d in &cfg.robustness.ej_asymmetry {
        variants.push(("ej_asymmetry", d, ModelParams { ej_asymmetry: d, ..cfg.model }));
    }
    let results: Vec<_> = variants
        .par_iter()
        .map(|(_, _, p)| p.validate().map_err(Failure::from).and_then(|_| analyze(cfg, *p)))
        .collect();
    let mut rows = vec![RobustRow {
        config_hash: hash,
        axis: "baseline",
        value: 0.0,
        db_x: db0,
        infidelity: inf0,
        db_drop: 0.0,
        infidelity_rise: 0.0,
        within_bounds: true,
    }];
    let mut points = Vec::new();
    let mut summary = format!("baseline: {db0:.3} dB, 1-F {inf0:.3e}\n");
    for ((axis, value, _), r) in variants.iter().zip(&results) {
        points.push(PointStatus::new(format!("{axis}={value}"), r));
        let Ok(report) = r else { continue };
        let (db, inf) = (db_of(&report.pair.plus).0, 1.0 - report.pair.plus.fidelity_plus);
        let (db_drop, infidelity_rise) = (db0 - db, inf - inf0);
        let within_bounds = db_drop <= MAX_DB_DROP && infidelity_rise <= MAX_INFIDELITY_RISE;
        summary += &format!(
            "{axis} = {value}: {db:.3} dB (drop {db_drop:.3}), 1-F {inf:.3e} (rise {infidelity_rise:.2e}){}\n",
            if within_bounds { "" } else { "  OUTSIDE BOUNDS" }
        );
        rows.push(RobustRow {
            config_hash: hash,
            axis,
            value: *value,
            db_x: db,
            infidelity: inf,
            db_drop,
            infidelity_rise,
            within_bounds,
        });
    }
    Ok(Outcome {
        tables: vec![Table::from_rows("robustness", &rows)?],
        results: json!({
            "config_hash": hash,
            "max_db_drop": MAX_DB_DROP,
            "max_infidelity_rise": MAX_INFIDELITY_RISE,
        }),
        summary,
        points,
    })
}

#[derive(Serialize)]
struct WignerRow<'a> {
    config_hash: &'a str,
    x: f64,
    p: f64,
    w: f64,
}

#[derive(Serialize)]
struct MarginalRow<'a> {
    config_hash: &'a str,
    q: f64,
    position_density: f64,
    momentum_density: f64,
}

/// Local maxima above a tenth of the global maximum.
fn peaks(q: &[f64], density: &[f64]) -> Vec<f64> {
    let top = density.iter().cloned().fold(0.0, f64::max);
    (1..density.len() - 1)
        .filter(|&i| density[i] > density[i - 1] && density[i] >= density[i + 1] && density[i] > 0.1 * top)
        .map(|i| q[i])
        .collect()
}

fn wigner_dump(cfg: &ExperimentConfig, hash: &str) -> Result<Outcome, Failure> {
    let report = analyze(cfg, cfg.model)?;
    let state = match cfg.wigner.state {
        WhichState::Plus => report.plus_state(),
        WhichState::Minus => report.minus_state(),
    };
    let bench = Workbench::new(cfg.model, cfg.dim)?;
    let (extent, n) = (cfg.wigner.extent, cfg.wigner.points);
    let grid: Vec<f64> = (0..n).map(|i| -extent + 2.0 * extent * i as f64 / (n - 1) as f64).collect();
    let w = metrics::wigner(bench.space(), &state, &grid, &grid)?;
    let mut rows = Vec::with_capacity(n * n);
    for (i, &x) in grid.iter().enumerate() {
        for (j, &p) in grid.iter().enumerate() {
            rows.push(WignerRow { config_hash: hash, x, p, w: w[[i, j]] });
        }
    }
    // Marginals on a finer grid so the peak spacing is resolved.
    let fine_n = 20 * n;
    let fine: Vec<f64> = (0..fine_n).map(|i| -extent + 2.0 * extent * i as f64 / (fine_n - 1) as f64).collect();
    let (px, pp) = metrics::marginals(&state, &fine, &fine)?;
    let marginal_rows: Vec<MarginalRow> = fine
        .iter()
        .zip(px.iter().zip(&pp))
        .map(|(&q, (&a, &b))| MarginalRow { config_hash: hash, q, position_density: a, momentum_density: b })
        .collect();
    let x_peaks = peaks(&fine, &px);
    let spacing = if x_peaks.len() > 1 {
        (x_peaks[x_peaks.len() - 1] - x_peaks[0]) / (x_peaks.len() - 1) as f64
    } else {
        f64::NAN
    };
    let summary = format!(
        "Wigner function of psi_{:?} on {n}x{n} points; position peaks at {:?}, mean spacing {spacing:.4} (sqrt(pi) = {:.4})\n",
        cfg.wigner.state,
        x_peaks.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>(),
        std::f64::consts::PI.sqrt()
    );
    Ok(Outcome {
        tables: vec![Table::from_rows("wigner", &rows)?, Table::from_rows("marginals", &marginal_rows)?],
        results: json!({
            "config_hash": hash,
            "state": cfg.wigner.state,
            "position_peaks": x_peaks,
            "mean_peak_spacing": spacing,
        }),
        summary,
        points: Vec::new(),
    })
}
