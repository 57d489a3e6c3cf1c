//! Command dispatch. Every command renders its artifacts to strings first and only
//! then writes them, so a failing command leaves no partial files behind.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nanonmr_core::error::Error as CoreError;
use nanonmr_core::estimation::{fisher_direct_fn, fisher_evap_closed, fisher_ratios, fit_simple_model, g_simple_model, FisherSetup, SimpleModelParams};
use nanonmr_core::evaporating::{build_mode_table, evaporation_rate, mode_dominance, tau_dominant_approx, EvapModeTable, RunnerUp, Truncation};
use nanonmr_core::freediff::g_free_at;
use nanonmr_core::geometry::B_RMS_SQUARED_HALF_SPACE;
use nanonmr_core::montecarlo::{simulate_correlation, z_scores, MCConfig, MCResult, WallModel};
use nanonmr_core::series::log_grid;
use nanonmr_core::sticky::{plateau_ideal, plateau_ratio, plateau_sticky, sticky_series};
use nanonmr_core::{CorrelationSeries, CylinderGeometry, FluidParams, ModelTag, SeriesPoint};
use serde_json::Value;

use crate::config::{Command, Format, MapBlock, RunConfig};
use crate::output::{gnuplot_compare, gnuplot_map, num, render_series, render_table, Provenance, Table};

/// One rendered output; `path = None` means standard output.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub contents: String,
}

pub fn run_command(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let prov = Provenance::new(&cfg.config_hash);
    let fmt = cfg.output.format;
    let main_path = cfg.output.path.clone();
    if cfg.output.gnuplot && main_path.is_none() {
        bail!("output.gnuplot needs output.path");
    }
    let mut out = Vec::new();
    match cfg.command {
        Command::Correlate => {
            let series = correlate(cfg)?;
            out.push(Artifact { path: main_path, contents: render_series(&series, fmt, &prov)? });
        }
        Command::Eigen => {
            out.push(Artifact { path: main_path, contents: render_table(&eigen(cfg)?, fmt, &prov)? });
        }
        Command::PlateauMap => {
            let table = plateau_map(cfg)?;
            out.push(Artifact { path: main_path.clone(), contents: render_table(&table, fmt, &prov)? });
            if let Some(p) = gnuplot_for(cfg, &main_path) {
                out.push(Artifact { path: Some(p), contents: gnuplot_map(&file_name(&main_path), "sticky/ideal plateau ratio", 5, Some(1.0)) });
            }
        }
        Command::DominanceMap => {
            let table = dominance_map(cfg)?;
            out.push(Artifact { path: main_path.clone(), contents: render_table(&table, fmt, &prov)? });
            if let Some(p) = gnuplot_for(cfg, &main_path) {
                out.push(Artifact { path: Some(p), contents: gnuplot_map(&file_name(&main_path), "tau00 vs (tau_ev/d)(V/S): relative difference", 7, None) });
            }
        }
        Command::Fisher => {
            out.push(Artifact { path: main_path, contents: render_table(&fisher(cfg)?, fmt, &prov)? });
        }
        Command::Fit => {
            out.push(Artifact { path: main_path, contents: render_table(&fit(cfg)?, fmt, &prov)? });
        }
        Command::Mc => {
            let mc = monte_carlo(cfg)?;
            out.push(Artifact { path: main_path.clone(), contents: render_series(&mc.correlation, fmt, &prov)? });
            if let Some(p) = &main_path {
                let mut t = Table::new("mc-survival", &["t_over_TD", "surviving", "err"]).meta("model", cfg.model).meta("seed", cfg.seed);
                for s in &mc.survival {
                    t.push(vec![num(s.t), num(s.g), num(s.err)]);
                }
                out.push(Artifact { path: Some(sibling(p, "survival")), contents: render_table(&t, fmt, &prov)? });
            }
        }
        Command::Compare => {
            let table = compare(cfg)?;
            out.push(Artifact { path: main_path.clone(), contents: render_table(&table, fmt, &prov)? });
            if let Some(p) = gnuplot_for(cfg, &main_path) {
                out.push(Artifact { path: Some(p), contents: gnuplot_compare(&file_name(&main_path), &format!("{} analytic vs Monte Carlo", cfg.model)) });
            }
        }
    }
    Ok(out)
}

fn file_name(p: &Option<PathBuf>) -> String {
    p.as_ref().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sibling(p: &Path, tag: &str) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = p.extension().map(|s| format!(".{}", s.to_string_lossy())).unwrap_or_default();
    p.with_file_name(format!("{stem}.{tag}{ext}"))
}

fn gnuplot_for(cfg: &RunConfig, main: &Option<PathBuf>) -> Option<PathBuf> {
    match (cfg.output.gnuplot, cfg.output.format, main) {
        (true, Format::Csv, Some(p)) => Some(p.with_extension("gp")),
        _ => None,
    }
}

fn times(cfg: &RunConfig) -> Result<Vec<f64>> {
    Ok(log_grid(cfg.grid.min, cfg.grid.max, cfg.grid.per_decade)?)
}

fn tau_of(cfg: &RunConfig) -> f64 {
    match cfg.model {
        ModelTag::Evaporating => cfg.fluid.tau_ev.unwrap_or(f64::INFINITY),
        _ => f64::INFINITY,
    }
}

fn mode_table(cfg: &RunConfig, t_min: Option<f64>) -> Result<EvapModeTable> {
    let tau = tau_of(cfg);
    let trunc = match (cfg.truncation, t_min) {
        (Some(t), _) => t,
        (None, Some(t)) => Truncation::resolving(&cfg.geometry, tau, t)?,
        (None, None) => Truncation::slowest(&cfg.geometry, tau)?,
    };
    Ok(build_mode_table(&cfg.geometry, tau, trunc, cfg.mode_nodes)?)
}

fn analytic_series(cfg: &RunConfig, times: &[f64]) -> Result<CorrelationSeries> {
    let geom = cfg.geometry;
    Ok(match cfg.model {
        ModelTag::Sticky => sticky_series(&geom, times, &cfg.quadrature)?,
        ModelTag::Reflective | ModelTag::Evaporating => {
            let table = mode_table(cfg, Some(times[0]))?;
            let points = times.iter().map(|&t| SeriesPoint { t, g: table.correlation(t), err: table.correlation_error(t) }).collect();
            CorrelationSeries::new(cfg.model, geom, cfg.fluid, points)?
        }
        ModelTag::Free => {
            let points = times.iter().map(|&t| SeriesPoint { t, g: B_RMS_SQUARED_HALF_SPACE * g_free_at(t), err: 0.0 }).collect();
            CorrelationSeries::new(ModelTag::Free, geom, FluidParams::default(), points)?
        }
        other => bail!("no analytic curve for model `{other}`"),
    })
}

fn correlate(cfg: &RunConfig) -> Result<CorrelationSeries> {
    analytic_series(cfg, &times(cfg)?)
}

fn eigen(cfg: &RunConfig) -> Result<Table> {
    let table = mode_table(cfg, None)?;
    let mut t = Table::new("eigen", &["m", "parity", "p", "eta", "beta", "tau", "weight", "survival"])
        .meta("model", cfg.model)
        .meta("R", crate::output::fmt_num(cfg.geometry.radius))
        .meta("L", crate::output::fmt_num(cfg.geometry.height))
        .meta("tau_ev", crate::output::fmt_num(table.tau_ev))
        .meta("M", table.truncation.m)
        .meta("P", table.truncation.p)
        .meta("tau00", crate::output::fmt_num(table.tau00()))
        .meta("total_weight", crate::output::fmt_num(table.total_weight()))
        .meta("weight_error", crate::output::fmt_num(table.weight_error));
    for m in &table.modes {
        t.push(vec![
            Value::from(m.m),
            Value::from(m.parity.sign().to_string()),
            Value::from(m.p),
            num(m.eta),
            num(m.beta),
            num(m.tau),
            num(m.weight),
            num(m.survival),
        ]);
    }
    Ok(t)
}

fn log_axis(a: f64, b: f64, n: usize) -> Vec<f64> {
    if a == b {
        return vec![a];
    }
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

fn map_grid(map: &Option<MapBlock>) -> Result<Vec<CylinderGeometry>> {
    let m = map.as_ref().ok_or_else(|| anyhow!("map block missing"))?;
    let mut out = Vec::new();
    for r in log_axis(m.r_min, m.r_max, m.points) {
        for l in log_axis(m.l_min, m.l_max, m.points) {
            out.push(CylinderGeometry::new(r, l, 1.0)?);
        }
    }
    Ok(out)
}

fn plateau_map(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new("plateau-map", &["R_over_d", "L_over_d", "plateau_ideal", "plateau_sticky", "ratio"]);
    if let Some(d) = cfg.normalization.d_m {
        t = t.meta("d_m", crate::output::fmt_num(d));
    }
    for g in map_grid(&cfg.map)? {
        let ratio = match plateau_ratio(&g) {
            Ok(r) => r,
            Err(CoreError::UndefinedRatio) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        t.push(vec![num(g.radius), num(g.height), num(plateau_ideal(&g)), num(plateau_sticky(&g)), num(ratio)]);
    }
    Ok(t)
}

fn dominance_map(cfg: &RunConfig) -> Result<Table> {
    let tau = cfg.fluid.tau_ev.ok_or_else(|| anyhow!("dominance-map needs tau_ev"))?;
    let mut t = Table::new("dominance-map", &["R_over_d", "L_over_d", "eta0_R", "eta0_L", "tau00", "tau_approx", "rel_diff", "gap", "runner_up"])
        .meta("tau_ev", crate::output::fmt_num(tau));
    for g in map_grid(&cfg.map)? {
        let eta0 = evaporation_rate(&g, tau)?;
        let dom = mode_dominance(&g, tau)?;
        let approx = tau_dominant_approx(&g, tau);
        let runner = match dom.runner_up {
            RunnerUp::Radial => "radial",
            RunnerUp::OddAxial => "odd-axial",
        };
        t.push(vec![
            num(g.radius),
            num(g.height),
            num(eta0 * g.radius),
            num(eta0 * g.height),
            num(dom.tau00),
            num(approx),
            num((dom.tau00 - approx) / approx),
            num(dom.gap),
            Value::from(runner),
        ]);
    }
    Ok(t)
}

fn fisher(cfg: &RunConfig) -> Result<Table> {
    let f = &cfg.fisher;
    let setup = FisherSetup::new(f.delta, f.total_time, f.shot_time, f.phi_rms)?;
    let fluid = if cfg.model == ModelTag::Evaporating { cfg.fluid } else { FluidParams::default() };
    let params = SimpleModelParams::from_geometry(&cfg.geometry, &fluid, &cfg.quadrature)?;
    let direct = fisher_direct_fn(&setup, |t| g_simple_model(t, &params));
    let closed = fisher_evap_closed(&setup, &params);
    let ratios = fisher_ratios(&setup, &cfg.geometry, &fluid)?;
    let mut t = Table::new("fisher", &["quantity", "value"])
        .meta("model", cfg.model)
        .meta("delta", crate::output::fmt_num(f.delta))
        .meta("T", crate::output::fmt_num(f.total_time))
        .meta("shot", crate::output::fmt_num(f.shot_time));
    let mut row = |k: &str, v: Value| t.push(vec![Value::from(k), v]);
    row("B_rms2", num(params.b_rms2));
    row("tau_V", num(params.tau_v));
    row("plateau", num(params.plateau));
    row("tau_ev_eff", num(params.tau_ev_eff));
    row("direct", num(direct));
    row("closed_full", num(closed.full));
    row("closed_printed", num(closed.printed));
    row("closed_dominant", num(closed.dominant));
    row("regime_many_periods", Value::from(closed.regime.many_periods));
    row("regime_slow_frequency", Value::from(closed.regime.slow_frequency));
    row("regime_long_experiment", Value::from(closed.regime.long_experiment));
    row("regime_tails_settled", Value::from(closed.regime.tails_settled));
    row("sticky_over_free", num(ratios.sticky_over_free));
    row("sticky_ratio_valid", Value::from(ratios.sticky_valid));
    row("evap_over_free", ratios.evap_over_free.map_or(Value::from("none"), num));
    row("evap_ratio_valid", Value::from(ratios.evap_valid));
    Ok(t)
}

fn fit(cfg: &RunConfig) -> Result<Table> {
    let input = cfg.input.as_ref().ok_or_else(|| anyhow!("fit needs `input`"))?;
    let series = crate::output::read_series(input)?;
    let r = fit_simple_model(&series).with_context(|| format!("fitting {}", input.display()))?;
    let mut t = Table::new("fit", &["quantity", "value"]).meta("input_model", series.model);
    let mut row = |k: &str, v: Value| t.push(vec![Value::from(k), v]);
    row("B_rms2", num(r.params.b_rms2));
    row("tau_V", num(r.params.tau_v));
    row("plateau", num(r.params.plateau));
    row("tau_ev_eff", num(r.params.tau_ev_eff));
    row("residual_norm", num(r.residual_norm));
    for (name, s) in ["sigma_ln_B_rms2", "sigma_ln_tau_V", "sigma_ln_plateau", "sigma_ln_tau_ev_eff"].iter().zip(r.sensitivity) {
        row(name, num(s));
    }
    row("iterations", Value::from(r.iterations));
    Ok(t)
}

fn wall_of(model: ModelTag) -> Result<WallModel> {
    Ok(match model {
        ModelTag::Free => WallModel::Free,
        ModelTag::Reflective => WallModel::Reflective,
        ModelTag::Sticky => WallModel::Sticky,
        ModelTag::Evaporating => WallModel::Evaporating,
        other => bail!("no Monte Carlo wall for model `{other}`"),
    })
}

/// Grid times snapped to whole steps, duplicates removed.
fn step_times(cfg: &RunConfig) -> Result<Vec<f64>> {
    let dt = cfg.mc.dt;
    let mut steps: Vec<u64> = times(cfg)?.iter().map(|t| ((t / dt).round() as u64).max(1)).collect();
    steps.dedup();
    Ok(steps.into_iter().map(|s| s as f64 * dt).collect())
}

fn monte_carlo(cfg: &RunConfig) -> Result<MCResult> {
    let mc = MCConfig {
        particles: cfg.mc.particles,
        realizations: cfg.mc.realizations,
        dt: cfg.mc.dt,
        times: step_times(cfg)?,
        wall: wall_of(cfg.model)?,
        seed: cfg.seed,
    };
    Ok(simulate_correlation(&mc, &cfg.geometry, &cfg.fluid)?)
}

fn compare(cfg: &RunConfig) -> Result<Table> {
    let mc = monte_carlo(cfg)?;
    let analytic = analytic_series(cfg, &mc.correlation.times())?;
    let z = z_scores(mc.correlation.points(), analytic.points())?;
    let max_z = z.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut t = Table::new("compare", &["t_over_TD", "G_analytic", "err_analytic", "G_mc", "err_mc", "z"])
        .meta("model", cfg.model)
        .meta("seed", cfg.seed)
        .meta("max_abs_z", crate::output::fmt_num(max_z))
        .meta("within_3_sigma", max_z < 3.0);
    for ((a, m), z) in analytic.points().iter().zip(mc.correlation.points()).zip(&z) {
        t.push(vec![num(a.t), num(a.g), num(a.err), num(m.g), num(m.err), num(*z)]);
    }
    Ok(t)
}
