//! One function per subcommand: resolve config plus flag overrides, run the
//! core routines, write side tables, and assemble the result document.

use std::path::PathBuf;

use serde_json::{json, Value};

use senbd::{
    aic_table, branching, build_s_matrix, classify_stationarity, correlation, export_network,
    fit, impact_analysis, rank_sectors, simulate_with, Bounds, EventSeries, Family, FitConfig,
    FitResult, ModelSpec, Shape,
};

use crate::config::{OffspringKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{ingest_csv, write_series_csv};
use crate::output::{cell, compact, document, emit, num, num_matrix, num_vec, write_table};

fn echo(run_seed: Option<u64>, sections: &[(&str, Value)]) -> Value {
    let mut map = serde_json::Map::new();
    if let Some(seed) = run_seed {
        map.insert("run".into(), json!({ "seed": seed }));
    }
    for (name, value) in sections {
        map.insert((*name).into(), compact(value.clone()));
    }
    Value::Object(map)
}

fn spec_json(spec: &ModelSpec, names: &[String]) -> Value {
    let s = build_s_matrix(spec).expect("validated spec");
    let dim = spec.dimension();
    let reproduction: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| s.entry(i, j)).collect())
        .collect();
    json!({
        "family": spec.family().name(),
        "sector_names": names,
        "baseline_mean": num_vec(spec.baseline_mean()),
        "dispersion_shape": spec
            .dispersion_shape()
            .iter()
            .map(|k| match k {
                Shape::Finite(v) => num(*v),
                Shape::Infinite => json!("inf"),
            })
            .collect::<Vec<_>>(),
        "decay": num_vec(spec.decay()),
        "reproduction": num_matrix(&reproduction),
    })
}

fn series_names(series: &EventSeries) -> &[String] {
    series.sector_names()
}

pub struct SimulateArgs {
    pub horizon: Option<usize>,
    pub series_out: Option<PathBuf>,
    pub allow_nonstationary: bool,
}

pub fn simulate_cmd(
    config: &RunConfig,
    seed_flag: Option<u64>,
    output: Option<&PathBuf>,
    args: SimulateArgs,
) -> CliResult<()> {
    let section = config
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::config("missing [simulate] section"))?;
    let model = config.model()?;
    let spec = model.build()?;
    let names = model.names();
    let seed = config.seed(seed_flag)?;
    let horizon = args.horizon.unwrap_or(section.horizon);
    let allow = args.allow_nonstationary || section.allow_nonstationary;
    let series_out = args.series_out.or_else(|| section.series_output.clone());

    let report = classify_stationarity(&build_s_matrix(&spec)?)?;
    if !allow && !report.steady {
        return Err(senbd::Error::Nonstationary { rho: report.rho }.into());
    }
    let series = simulate_with(&spec, horizon, seed, true)?;
    if let Some(path) = &series_out {
        let named = EventSeries::new(
            (0..series.num_periods()).map(|t| series.row(t).to_vec()).collect(),
            series.dim(),
            Some(names.clone()),
            None,
        )?;
        write_series_csv(path, &named)?;
    }

    let dim = series.dim();
    let totals: Vec<u64> = (0..dim).map(|d| series.column(d).sum()).collect();
    let means: Vec<f64> = totals
        .iter()
        .map(|&s| if horizon == 0 { 0.0 } else { s as f64 / horizon as f64 })
        .collect();
    let results = json!({
        "horizon": horizon,
        "dim": dim,
        "spectral_radius": num(report.rho),
        "steady": report.steady,
        "near_critical": report.near_critical,
        "total_counts": totals,
        "sample_means": num_vec(&means),
        "series_output": series_out.as_ref().map(|p| p.display().to_string()),
        "model": spec_json(&spec, &names),
    });
    let doc = document(
        "simulate",
        echo(
            Some(seed),
            &[
                ("model", serde_json::to_value(model).unwrap()),
                (
                    "simulate",
                    json!({
                        "horizon": horizon,
                        "allow_nonstationary": allow,
                        "series_output": series_out.as_ref().map(|p| p.display().to_string()),
                    }),
                ),
            ],
        ),
        results,
    );
    emit(&doc, output)
}

pub struct SynthArgs {
    pub horizon: Option<usize>,
    pub data_out: Option<PathBuf>,
    pub allow_nonstationary: bool,
}

pub fn synth_cmd(
    config: &RunConfig,
    seed_flag: Option<u64>,
    output: Option<&PathBuf>,
    args: SynthArgs,
) -> CliResult<()> {
    let section = config
        .synth
        .as_ref()
        .ok_or_else(|| CliError::config("missing [synth] section"))?;
    let model = config.model()?;
    let spec = model.build()?;
    let names = model.names();
    let seed = config.seed(seed_flag)?;
    let horizon = args.horizon.unwrap_or(section.horizon);
    let allow = args.allow_nonstationary || section.allow_nonstationary;
    let path = args.data_out.unwrap_or_else(|| section.output.clone());

    let report = classify_stationarity(&build_s_matrix(&spec)?)?;
    if !allow && !report.steady {
        return Err(senbd::Error::Nonstationary { rho: report.rho }.into());
    }
    let series = simulate_with(&spec, horizon, seed, true)?;
    let named = EventSeries::new(
        (0..series.num_periods()).map(|t| series.row(t).to_vec()).collect(),
        series.dim(),
        Some(names.clone()),
        None,
    )?;
    write_series_csv(&path, &named)?;

    let results = json!({
        "output": path.display().to_string(),
        "horizon": horizon,
        "dim": series.dim(),
        "spectral_radius": num(report.rho),
        "model": spec_json(&spec, &names),
    });
    let doc = document(
        "synth",
        echo(
            Some(seed),
            &[
                ("model", serde_json::to_value(model).unwrap()),
                (
                    "synth",
                    json!({
                        "horizon": horizon,
                        "allow_nonstationary": allow,
                        "output": path.display().to_string(),
                    }),
                ),
            ],
        ),
        results,
    );
    emit(&doc, output)
}

fn fit_config_from(
    family: Family,
    edge_selection: senbd::EdgeSelection,
    multistart: usize,
    tolerance: f64,
    max_iterations: usize,
    bounds_section: &crate::config::BoundsSection,
    seed: u64,
) -> FitConfig {
    let mut fc = FitConfig::new(family);
    fc.edge_selection = edge_selection;
    fc.multistart = multistart;
    fc.tolerance = tolerance;
    fc.max_iterations = max_iterations;
    fc.seed = seed;
    let mut bounds = Bounds::default();
    bounds_section.apply(&mut bounds);
    fc.bounds = bounds;
    fc
}

fn fit_result_json(result: &FitResult, names: &[String]) -> Value {
    json!({
        "log_likelihood": num(result.log_likelihood),
        "aic": num(result.aic),
        "n_params": result.n_params,
        "converged": result.converged,
        "active_edges": result.active_edges,
        "starts_summary": num_vec(&result.starts_summary),
        "warnings": result.warnings,
        "estimate": spec_json(&result.spec, names),
    })
}

pub fn fit_cmd(
    config: &RunConfig,
    seed_flag: Option<u64>,
    output: Option<&PathBuf>,
    input_flag: Option<PathBuf>,
) -> CliResult<()> {
    let section = config
        .fit
        .as_ref()
        .ok_or_else(|| CliError::config("missing [fit] section"))?;
    let seed = config.seed(seed_flag)?;
    let input = input_flag.unwrap_or_else(|| section.input.clone());
    let series = ingest_csv(&input)?;
    let fc = fit_config_from(
        section.family,
        section.edge_selection,
        section.multistart,
        section.tolerance,
        section.max_iterations,
        &section.bounds,
        seed,
    );
    let result = fit(&series, &fc)?;
    let results = fit_result_json(&result, series_names(&series));
    let doc = document(
        "fit",
        echo(
            Some(seed),
            &[(
                "fit",
                json!({
                    "input": input.display().to_string(),
                    "family": section.family.name(),
                    "edge_selection": serde_json::to_value(section.edge_selection).unwrap(),
                    "multistart": section.multistart,
                    "tolerance": section.tolerance,
                    "max_iterations": section.max_iterations,
                    "bounds": serde_json::to_value(&section.bounds).unwrap(),
                }),
            )],
        ),
        results,
    );
    emit(&doc, output)
}

pub fn aic_table_cmd(
    config: &RunConfig,
    seed_flag: Option<u64>,
    output: Option<&PathBuf>,
    input_flag: Option<PathBuf>,
    table_out: Option<PathBuf>,
) -> CliResult<()> {
    let section = config
        .aic_table
        .as_ref()
        .ok_or_else(|| CliError::config("missing [aic_table] section"))?;
    let seed = config.seed(seed_flag)?;
    let input = input_flag.unwrap_or_else(|| section.input.clone());
    let table_path = table_out.or_else(|| section.output.clone());
    let series = ingest_csv(&input)?;
    let families = section
        .families
        .clone()
        .unwrap_or_else(|| Family::COMPARISON.to_vec());
    let configs: Vec<FitConfig> = families
        .iter()
        .map(|&family| {
            fit_config_from(
                family,
                section.edge_selection,
                section.multistart,
                section.tolerance,
                section.max_iterations,
                &section.bounds,
                seed,
            )
        })
        .collect();
    let rows = aic_table(&series, &configs);

    let mut csv_rows = Vec::with_capacity(rows.len());
    let mut json_rows = Vec::with_capacity(rows.len());
    for row in &rows {
        match &row.result {
            Ok(r) => {
                csv_rows.push(format!(
                    "{},{},{},{},ok",
                    row.family,
                    cell(r.aic),
                    cell(r.log_likelihood),
                    r.n_params
                ));
                json_rows.push(json!({
                    "family": row.family.name(),
                    "status": "ok",
                    "aic": num(r.aic),
                    "log_likelihood": num(r.log_likelihood),
                    "n_params": r.n_params,
                    "converged": r.converged,
                }));
            }
            Err(e) => {
                csv_rows.push(format!("{},,,,{}", row.family, e.category()));
                json_rows.push(json!({
                    "family": row.family.name(),
                    "status": e.category(),
                    "message": e.to_string(),
                }));
            }
        }
    }
    if let Some(path) = &table_path {
        write_table(path, "family,aic,log_likelihood,n_params,status", &csv_rows)?;
    }

    let doc = document(
        "aic-table",
        echo(
            Some(seed),
            &[(
                "aic_table",
                json!({
                    "input": input.display().to_string(),
                    "families": families.iter().map(|f| f.name()).collect::<Vec<_>>(),
                    "edge_selection": serde_json::to_value(section.edge_selection).unwrap(),
                    "multistart": section.multistart,
                    "tolerance": section.tolerance,
                    "max_iterations": section.max_iterations,
                    "output": table_path.as_ref().map(|p| p.display().to_string()),
                }),
            )],
        ),
        json!({ "rows": json_rows }),
    );
    emit(&doc, output)
}

pub struct ImpactArgs {
    pub source: Option<usize>,
    pub horizon: Option<usize>,
    pub impact_out: Option<PathBuf>,
    pub trajectory_out: Option<PathBuf>,
}

pub fn impact_cmd(config: &RunConfig, output: Option<&PathBuf>, args: ImpactArgs) -> CliResult<()> {
    let section = config.impact.as_ref();
    let model = config.model()?;
    let spec = model.build()?;
    let names = model.names();
    let source = args.source.or_else(|| section.and_then(|s| s.source));
    let horizon = args.horizon.or_else(|| section.and_then(|s| s.horizon));
    let impact_out = args
        .impact_out
        .or_else(|| section.and_then(|s| s.output.clone()));
    let trajectory_out = args
        .trajectory_out
        .or_else(|| section.and_then(|s| s.trajectory_output.clone()));

    if let Some(s) = source {
        if s >= spec.dimension() {
            return Err(CliError::config(format!(
                "source line {s} out of range for dimension {}",
                spec.dimension()
            )));
        }
    }
    let analysis = impact_analysis(&spec, horizon)?;
    let ranking = rank_sectors(&analysis);
    let selected: Vec<usize> = match source {
        Some(s) => vec![s],
        None => (0..spec.dimension()).collect(),
    };

    if let Some(path) = &impact_out {
        let mut rows = Vec::new();
        for &src in &selected {
            for (target, &value) in analysis.per_source[src].iter().enumerate() {
                rows.push(format!("{},{},{}", names[src], names[target], cell(value)));
            }
            rows.push(format!("{},total,{}", names[src], cell(analysis.totals[src])));
        }
        write_table(path, "source,target,value", &rows)?;
    }
    if let (Some(path), Some(trajectories)) = (&trajectory_out, &analysis.trajectories) {
        let mut rows = Vec::new();
        for &src in &selected {
            for (idx, wave) in trajectories[src].iter().enumerate() {
                for (target, &value) in wave.iter().enumerate() {
                    rows.push(format!(
                        "{},{},{},{}",
                        idx + 1,
                        names[src],
                        names[target],
                        cell(value)
                    ));
                }
            }
        }
        write_table(path, "t,source,target,value", &rows)?;
    }

    let results = json!({
        "per_source": num_matrix(&analysis.per_source),
        "totals": num_vec(&analysis.totals),
        "average_total": num(analysis.average_total),
        "ranking": ranking
            .iter()
            .map(|&(line, total)| json!({
                "line": line,
                "name": names[line],
                "total": num(total),
            }))
            .collect::<Vec<_>>(),
        "source": source,
        "horizon": horizon,
        "model": spec_json(&spec, &names),
    });
    let doc = document(
        "impact",
        echo(
            None,
            &[
                ("model", serde_json::to_value(model).unwrap()),
                (
                    "impact",
                    json!({
                        "source": source,
                        "horizon": horizon,
                        "output": impact_out.as_ref().map(|p| p.display().to_string()),
                        "trajectory_output": trajectory_out.as_ref().map(|p| p.display().to_string()),
                    }),
                ),
            ],
        ),
        results,
    );
    emit(&doc, output)
}

pub fn network_cmd(
    config: &RunConfig,
    output: Option<&PathBuf>,
    threshold_flag: Option<f64>,
    edges_out: Option<PathBuf>,
) -> CliResult<()> {
    let section = config.network.as_ref();
    let model = config.model()?;
    let spec = model.build()?;
    let names = model.names();
    let threshold = threshold_flag
        .or_else(|| section.map(|s| s.threshold))
        .unwrap_or(0.0);
    let edges_out = edges_out.or_else(|| section.and_then(|s| s.output.clone()));

    let s = build_s_matrix(&spec)?;
    let report = classify_stationarity(&s)?;
    let edges = export_network(&s, &names, threshold)?;
    if let Some(path) = &edges_out {
        let rows: Vec<String> = edges
            .iter()
            .map(|e| format!("{},{},{}", e.source, e.target, cell(e.weight)))
            .collect();
        write_table(path, "source,target,weight", &rows)?;
    }

    let results = json!({
        "spectral_radius": num(report.rho),
        "steady": report.steady,
        "near_critical": report.near_critical,
        "threshold": num(threshold),
        "edge_count": edges.len(),
        "edges": edges
            .iter()
            .map(|e| json!({
                "source": e.source,
                "target": e.target,
                "weight": num(e.weight),
            }))
            .collect::<Vec<_>>(),
        "model": spec_json(&spec, &names),
    });
    let doc = document(
        "network",
        echo(
            None,
            &[
                ("model", serde_json::to_value(model).unwrap()),
                (
                    "network",
                    json!({
                        "threshold": threshold,
                        "output": edges_out.as_ref().map(|p| p.display().to_string()),
                    }),
                ),
            ],
        ),
        results,
    );
    emit(&doc, output)
}

pub fn corr_cmd(
    config: &RunConfig,
    output: Option<&PathBuf>,
    input_flag: Option<PathBuf>,
    corr_out: Option<PathBuf>,
) -> CliResult<()> {
    let section = config
        .corr
        .as_ref()
        .ok_or_else(|| CliError::config("missing [corr] section"))?;
    let input = input_flag.or_else(|| section.input.clone());
    let corr_out = corr_out.or_else(|| section.output.clone());
    if input.is_none() && section.kernel.is_none() {
        return Err(CliError::config(
            "corr needs an input panel, a [corr.kernel] section, or both",
        ));
    }
    let max_lag = section.max_lag;

    // Empirical column.
    let empirical: Option<Vec<f64>> = match &input {
        Some(path) => {
            let series = ingest_csv(path)?;
            let dim = series.dim();
            if section.line_i >= dim || section.line_j >= dim {
                return Err(CliError::config(format!(
                    "line indices ({}, {}) out of range for dimension {dim}",
                    section.line_i, section.line_j
                )));
            }
            let covs = correlation::empirical_autocovariance(&series, max_lag)?;
            Some(
                covs.iter()
                    .map(|m| m[(section.line_i, section.line_j)])
                    .collect(),
            )
        }
        None => None,
    };

    // Theoretical columns from the kernel parameters.
    let mut closed_form: Option<Vec<f64>> = None;
    let mut integral: Option<Vec<f64>> = None;
    let mut residual: Option<f64> = None;
    if let Some(kernel) = &section.kernel {
        let spec = correlation::CorrelationSpec::new(
            kernel.amplitude,
            kernel.rate,
            kernel.overdispersion,
            kernel.baseline,
        )?;
        closed_form = Some(
            (0..=max_lag)
                .map(|lag| correlation::autocovariance_closed_form(&spec, lag as f64))
                .collect::<Result<_, _>>()?,
        );
        let sys = correlation::CorrelationSystem::single(&spec)?;
        let t_max = section
            .t_max
            .unwrap_or_else(|| spec.default_horizon())
            .max(max_lag as f64 + 1.0);
        let grid = correlation::covariance_integral_solve(&sys, section.step, t_max)?;
        residual = Some(correlation::integral_equation_residual(&sys, &grid));
        let per_lag = (1.0 / section.step).round() as usize;
        integral = Some(
            (0..=max_lag)
                .map(|lag| {
                    let idx = (lag * per_lag).min(grid.num_points() - 1);
                    grid.value(0, 0, idx)
                })
                .collect(),
        );
    }

    if let Some(path) = &corr_out {
        let mut rows = Vec::with_capacity(max_lag + 1);
        for lag in 0..=max_lag {
            let get = |col: &Option<Vec<f64>>| -> String {
                col.as_ref().map(|v| cell(v[lag])).unwrap_or_default()
            };
            rows.push(format!(
                "{lag},{},{},{}",
                get(&empirical),
                get(&closed_form),
                get(&integral)
            ));
        }
        write_table(path, "lag,empirical,closed_form,integral_equation", &rows)?;
    }

    let results = json!({
        "max_lag": max_lag,
        "line_i": section.line_i,
        "line_j": section.line_j,
        "empirical": empirical.as_deref().map(num_vec),
        "closed_form": closed_form.as_deref().map(num_vec),
        "integral_equation": integral.as_deref().map(num_vec),
        "solver_residual": residual.map(num),
        "output": corr_out.as_ref().map(|p| p.display().to_string()),
    });
    let doc = document(
        "corr",
        echo(None, &[("corr", serde_json::to_value(section).unwrap())]),
        results,
    );
    emit(&doc, output)
}

pub fn branching_cmd(
    config: &RunConfig,
    seed_flag: Option<u64>,
    output: Option<&PathBuf>,
    curve_out: Option<PathBuf>,
) -> CliResult<()> {
    let section = config
        .branching
        .as_ref()
        .ok_or_else(|| CliError::config("missing [branching] section"))?;
    let curve_out = curve_out.or_else(|| section.output.clone());
    let law = match section.kind {
        OffspringKind::Poisson => branching::OffspringLaw::poisson(section.mean)?,
        OffspringKind::Nbd => {
            let shape = section.shape.ok_or_else(|| {
                CliError::config("nbd offspring law needs a shape")
            })?;
            branching::OffspringLaw::nbd(shape, section.mean / shape)?
        }
    };

    let extinction = branching::extinction_probability(&law);
    let progeny = branching::total_progeny_mean(&law).ok();
    let survival = branching::survival_curve(&law, &section.epsilons)?;
    let mc = if section.trees > 0 {
        let seed = config.seed(seed_flag)?;
        let fraction = branching::simulate_extinction_fraction(&law, section.trees, seed)?;
        Some(json!({
            "trees": section.trees,
            "extinct_fraction": num(fraction),
        }))
    } else {
        None
    };

    if let Some(path) = &curve_out {
        let rows: Vec<String> = section
            .epsilons
            .iter()
            .zip(&survival)
            .map(|(&eps, &s)| format!("{},{}", cell(eps), cell(s)))
            .collect();
        write_table(path, "epsilon,survival", &rows)?;
    }

    let results = json!({
        "offspring_mean": num(law.mean()),
        "extinction_probability": num(extinction),
        "total_progeny_mean": progeny.map(num),
        "survival": section
            .epsilons
            .iter()
            .zip(&survival)
            .map(|(&eps, &s)| json!({ "epsilon": num(eps), "survival": num(s) }))
            .collect::<Vec<_>>(),
        "monte_carlo": mc,
        "output": curve_out.as_ref().map(|p| p.display().to_string()),
    });
    let doc = document(
        "branching",
        echo(
            config.run.seed.or(seed_flag),
            &[("branching", serde_json::to_value(section).unwrap())],
        ),
        results,
    );
    emit(&doc, output)
}
