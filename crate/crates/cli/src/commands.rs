//! Subcommand implementations. Every command is a pure function of the
//! resolved configuration, its input files, and the seed: reruns write
//! byte-identical outputs (logs carry no timestamps).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sae_core::data::{load_population, load_survey};
use sae_core::diagnostics::ignorability_panel;
use sae_core::estimators::estimate_all_areas;
use sae_core::oracle::mc::{run_consistency, ConsistencyConfig};
use sae_core::oracle::{error_correlation, fit_metrics, DiscretePopulation};
use sae_core::rng::stream_seed;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::svg::scatter_svg;

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_file(out: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    fs::write(&path, content)?;
    Ok(path)
}

fn area_file_name(prefix: &str, area: &str) -> String {
    // keep file names safe regardless of area labels
    let safe: String = area
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{prefix}{safe}.csv")
}

fn run_log(cfg: &RunConfig, sections: &[(&str, &[String])]) -> String {
    let mut log = String::from("# resolved configuration\n");
    log.push_str(&cfg.echo());
    for (title, lines) in sections {
        let _ = write!(log, "\n# {title}\n");
        if lines.is_empty() {
            log.push_str("(none)\n");
        } else {
            for line in lines.iter() {
                let _ = writeln!(log, "- {line}");
            }
        }
    }
    log
}

/// Run the full weighting pipeline over every area and write the
/// results CSV (plus optional per-area weight files).
pub fn cmd_estimate(cfg: &RunConfig, out: &Path, _svg: bool) -> Result<(), CliError> {
    ensure_out_dir(out)?;
    let schema = cfg.covariate_schema()?;
    let survey_path = cfg
        .paths
        .survey
        .as_ref()
        .ok_or_else(|| CliError::Config("no survey path configured".into()))?;
    let population_path = cfg
        .paths
        .population
        .as_ref()
        .ok_or_else(|| CliError::Config("no population path configured".into()))?;
    let survey = load_survey(survey_path, &schema)?;
    let table = load_population(population_path, &schema)?;

    let est_cfg = cfg.estimator_config();
    let all = estimate_all_areas(&survey, &table, &est_cfg)?;

    if all.outcomes.iter().all(|o| o.synthetic.is_err()) {
        let first = all
            .outcomes
            .iter()
            .find_map(|o| o.synthetic.as_ref().err())
            .expect("at least one error");
        return Err(CliError::Numeric(format!(
            "no area could be estimated; first failure: {first}"
        )));
    }

    write_file(out, "results.csv", &all.to_csv_string())?;
    if est_cfg.keep_weights {
        for outcome in &all.outcomes {
            if let Some(w) = &outcome.weights {
                write_file(
                    out,
                    &area_file_name("weights_", &outcome.area),
                    &w.to_csv_string(),
                )?;
            }
        }
    }

    let mut issues: Vec<String> = all.warnings.clone();
    for outcome in &all.outcomes {
        if let Err(e) = &outcome.direct {
            issues.push(format!("area '{}' direct estimate: {e}", outcome.area));
        }
        if let Err(e) = &outcome.synthetic {
            issues.push(format!("area '{}' synthetic estimate: {e}", outcome.area));
        }
    }
    write_file(out, "run_log.txt", &run_log(cfg, &[("warnings", &issues)]))?;
    Ok(())
}

/// Run the per-area ignorability regressions and write the panel CSV.
pub fn cmd_diagnose(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_out_dir(out)?;
    let schema = cfg.covariate_schema()?;
    let survey_path = cfg
        .paths
        .survey
        .as_ref()
        .ok_or_else(|| CliError::Config("no survey path configured".into()))?;
    let survey = load_survey(survey_path, &schema)?;
    let diag_cfg = cfg.diagnostics_config();
    let panel = ignorability_panel(&survey, &diag_cfg)?;

    write_file(out, "diagnostics.csv", &panel.to_csv_string(diag_cfg.alpha))?;

    let mut issues: Vec<String> = panel
        .errors
        .iter()
        .map(|(area, e)| format!("area '{area}': {e}"))
        .collect();
    for r in &panel.results {
        for col in &r.dropped {
            issues.push(format!(
                "area '{}': dropped collinear column '{col}'",
                r.area
            ));
        }
    }
    issues.push(
        "note: a conventional test that fails to reject zero is not by itself evidence \
         that pooling is safe; consult the equivalence column"
            .to_string(),
    );
    write_file(out, "run_log.txt", &run_log(cfg, &[("notes", &issues)]))?;
    Ok(())
}

/// Generate a synthetic population, verify the identification numbers
/// exactly, then sample and estimate.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path, svg: bool) -> Result<(), CliError> {
    ensure_out_dir(out)?;
    let sim = cfg
        .simulation
        .clone()
        .ok_or_else(|| CliError::Config("missing [simulation] section".into()))?;
    let spec = cfg.population_spec()?;
    let pop = DiscretePopulation::generate(&spec, sim.population_seed)?;
    let table = pop.population_table();

    write_file(out, "spec_echo.toml", &cfg.echo())?;

    let truth = pop.true_area_means()?;
    let mut truth_csv = String::from("area,tau\n");
    for (j, tau) in truth.iter().enumerate() {
        let _ = writeln!(truth_csv, "{},{}", pop.area_label(j), tau);
    }
    write_file(out, "truth.csv", &truth_csv)?;

    let ident = pop.evaluate_identification()?;
    let parts = pop.evaluate_decomposition()?;
    let mut ident_csv = String::from(
        "area,tau,identification,residual,direct_term,indirect_term,decomposition_residual\n",
    );
    for j in 0..truth.len() {
        let (d, i) = parts[j];
        let _ = writeln!(
            ident_csv,
            "{},{},{},{},{},{},{}",
            pop.area_label(j),
            truth[j],
            ident[j],
            truth[j] - ident[j],
            d,
            i,
            d + i - ident[j]
        );
    }
    write_file(out, "identification.csv", &ident_csv)?;

    let est_cfg = cfg.estimator_config();
    let sample = pop.draw_sample(sim.n, stream_seed(cfg.seed, "simulate/sample"))?;
    let all = estimate_all_areas(&sample, &table, &est_cfg)?;
    write_file(out, "estimates.csv", &all.to_csv_string())?;

    // fit metrics per method against the truth
    let mut metrics_csv = String::from("method,rmse,mae,mean_error,correlation\n");
    let synthetic: Vec<f64> = all
        .outcomes
        .iter()
        .filter_map(|o| o.synthetic.as_ref().ok().map(|r| r.estimate))
        .collect();
    if synthetic.len() == truth.len() {
        let m = fit_metrics(&synthetic, &truth)?;
        let corr = m.correlation.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(
            metrics_csv,
            "synthetic,{},{},{},{corr}",
            m.rmse, m.mae, m.mean_error
        );
    }
    let direct_pairs: Vec<(f64, f64)> = all
        .outcomes
        .iter()
        .zip(&truth)
        .filter_map(|(o, t)| o.direct.as_ref().ok().map(|r| (r.estimate, *t)))
        .collect();
    if direct_pairs.len() >= 2 {
        let d_est: Vec<f64> = direct_pairs.iter().map(|p| p.0).collect();
        let d_truth: Vec<f64> = direct_pairs.iter().map(|p| p.1).collect();
        let m = fit_metrics(&d_est, &d_truth)?;
        let corr = m.correlation.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(
            metrics_csv,
            "direct,{},{},{},{corr}",
            m.rmse, m.mae, m.mean_error
        );
    }
    write_file(out, "metrics.csv", &metrics_csv)?;

    if svg && synthetic.len() == truth.len() {
        write_file(
            out,
            "scatter.svg",
            &scatter_svg(&truth, &synthetic, "synthetic estimates vs truth"),
        )
        .map(|_| ())?;
    }

    if !sim.n_sweep.is_empty() {
        let mc_cfg = ConsistencyConfig {
            sample_sizes: sim.n_sweep.clone(),
            replicates: sim.replicates,
            seed: cfg.seed,
            estimator: est_cfg.clone(),
        };
        let report = run_consistency(&pop, &mc_cfg)?;
        let mut sweep_csv = String::from("n,replicate,rmse\n");
        for size in &report.sizes {
            for (rep, rmse) in size.rmse.iter().enumerate() {
                let _ = writeln!(sweep_csv, "{},{},{}", size.n, rep, rmse);
            }
        }
        write_file(out, "consistency.csv", &sweep_csv)?;
        let mut summary_csv = String::from("n,median_rmse,median_abs_bias\n");
        for size in &report.sizes {
            let _ = writeln!(
                summary_csv,
                "{},{},{}",
                size.n, size.median_rmse, size.median_abs_bias
            );
        }
        write_file(out, "consistency_summary.csv", &summary_csv)?;
    }

    write_file(out, "run_log.txt", &run_log(cfg, &[("warnings", &all.warnings)]))?;
    Ok(())
}

fn read_keyed_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>), CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(e.to_string()))?
        .clone();
    if headers.len() < 2 || headers.get(0) != Some("area") {
        return Err(CliError::Data(format!(
            "{} must start with an 'area' column followed by value columns",
            path.display()
        )));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let mut keys = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        let area = record.get(0).unwrap_or("").to_string();
        if area.is_empty() {
            return Err(CliError::Data(format!("empty area at data row {}", i + 1)));
        }
        let mut values = Vec::with_capacity(names.len());
        for k in 0..names.len() {
            let raw = record.get(k + 1).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| {
                CliError::Data(format!(
                    "value '{raw}' in column '{}' at data row {} is not a number",
                    names[k],
                    i + 1
                ))
            })?;
            values.push(v);
        }
        keys.push(area);
        rows.push(values);
    }
    Ok((names, keys, rows))
}

/// Score one or more estimate columns against a truth file sharing the
/// same area keys; emits the four fit metrics per set and the pairwise
/// error-correlation matrix.
pub fn cmd_validate(
    estimates_path: &Path,
    truth_path: &Path,
    out: &Path,
    svg: bool,
) -> Result<(), CliError> {
    ensure_out_dir(out)?;
    let (set_names, est_keys, est_rows) = read_keyed_csv(estimates_path)?;
    let (truth_cols, truth_keys, truth_rows) = read_keyed_csv(truth_path)?;
    if truth_cols.len() != 1 {
        return Err(CliError::Data(
            "truth file must have exactly one value column".into(),
        ));
    }
    let mut truth_map = std::collections::BTreeMap::new();
    for (k, row) in truth_keys.iter().zip(&truth_rows) {
        truth_map.insert(k.clone(), row[0]);
    }
    if est_keys.len() != truth_keys.len() {
        return Err(CliError::Data(format!(
            "area key mismatch: {} estimate rows vs {} truth rows",
            est_keys.len(),
            truth_keys.len()
        )));
    }
    let mut truth = Vec::with_capacity(est_keys.len());
    for key in &est_keys {
        match truth_map.get(key) {
            Some(v) => truth.push(*v),
            None => {
                return Err(CliError::Data(format!(
                    "area '{key}' missing from the truth file"
                )))
            }
        }
    }

    let sets: Vec<Vec<f64>> = (0..set_names.len())
        .map(|k| est_rows.iter().map(|row| row[k]).collect())
        .collect();

    let mut metrics_csv = String::from("set,rmse,mae,mean_error,correlation\n");
    for (name, est) in set_names.iter().zip(&sets) {
        let m = fit_metrics(est, &truth)?;
        let corr = m.correlation.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(metrics_csv, "{name},{},{},{},{corr}", m.rmse, m.mae, m.mean_error);
    }
    write_file(out, "metrics.csv", &metrics_csv)?;

    let mut corr_csv = String::from("set");
    for name in &set_names {
        let _ = write!(corr_csv, ",{name}");
    }
    corr_csv.push('\n');
    for (a, name) in set_names.iter().enumerate() {
        let _ = write!(corr_csv, "{name}");
        for b in 0..set_names.len() {
            match error_correlation(&sets[a], &sets[b], &truth) {
                Ok(c) => {
                    let _ = write!(corr_csv, ",{c}");
                }
                Err(_) => corr_csv.push(','),
            }
        }
        corr_csv.push('\n');
    }
    write_file(out, "error_correlation.csv", &corr_csv)?;

    if svg {
        for (name, est) in set_names.iter().zip(&sets) {
            write_file(
                out,
                &area_file_name("scatter_", name).replace(".csv", ".svg"),
                &scatter_svg(&truth, est, &format!("{name} vs truth")),
            )?;
        }
    }
    Ok(())
}
