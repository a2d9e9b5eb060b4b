//! Running a configured experiment across strategies and writing its
//! curve, summary, reference and log files.

use crate::config::ExperimentSpec;
use crate::data::{fmt_real, Dataset};
use crate::engine::{full_reference, run_experiment, samples_to_best, ConvergenceCurve, Experiment};
use crate::error::{Error, Result};
use crate::strategy::StrategyKind;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Mean-R² table: `labeled_count`, one column per curve, then `reference`.
pub fn emit_curves<W: Write>(curves: &[&ConvergenceCurve], reference: f64, mut w: W) -> Result<()> {
    let first = curves.first().ok_or_else(|| Error::Numerical("emit_curves: no curves".into()))?;
    let grid: Vec<usize> = first.points.iter().map(|p| p.labeled_count).collect();
    for c in curves {
        if c.points.iter().map(|p| p.labeled_count).ne(grid.iter().copied()) {
            return Err(Error::Numerical(format!(
                "emit_curves: {} has a different labeled-count grid from {}",
                c.strategy, first.strategy
            )));
        }
    }
    let mut out = String::from("labeled_count");
    for c in curves {
        out.push(',');
        out.push_str(c.strategy.name());
    }
    out.push_str(",reference\n");
    for (i, n) in grid.iter().enumerate() {
        out.push_str(&n.to_string());
        for c in curves {
            out.push(',');
            out.push_str(&fmt_real(c.points[i].r_squared));
        }
        out.push(',');
        out.push_str(&fmt_real(reference));
        out.push('\n');
    }
    w.write_all(out.as_bytes()).map_err(io_err("curves"))
}

/// Per-iteration detail for one strategy: mean metrics, timings and each
/// replicate's R².
pub fn emit_curve_detail<W: Write>(exp: &Experiment, mut w: W) -> Result<()> {
    let mut out = String::from("labeled_count,r2_mean,r2_sd,rmse_mean,wall_time_s,query_time_s");
    for c in &exp.curves {
        out.push_str(&format!(",r2_rep{}", c.replicate));
    }
    out.push('\n');
    let k = exp.curves.len() as f64;
    for (i, p) in exp.mean_curve.points.iter().enumerate() {
        let var = exp.curves.iter().map(|c| (c.points[i].r_squared - p.r_squared).powi(2)).sum::<f64>() / k;
        let cells = [p.r_squared, var.sqrt(), p.rmse, p.wall_time_s, p.query_time_s];
        out.push_str(&p.labeled_count.to_string());
        for v in cells.iter().copied().chain(exp.curves.iter().map(|c| c.points[i].r_squared)) {
            out.push(',');
            out.push_str(&fmt_real(v));
        }
        out.push('\n');
    }
    w.write_all(out.as_bytes()).map_err(io_err("curve detail"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: StrategyKind,
    pub samples_to_best: usize,
    pub best_r2: f64,
    pub time_to_best_s: f64,
    pub total_time_s: f64,
    pub query_time_s: f64,
}

/// One row per mean curve, ordered by `samples_to_best`, ties by name.
pub fn summarize(curves: &[&ConvergenceCurve]) -> Result<Vec<SummaryRow>> {
    let mut rows = curves
        .iter()
        .map(|c| {
            let (n, r2, t) = samples_to_best(c)?;
            Ok(SummaryRow {
                strategy: c.strategy,
                samples_to_best: n,
                best_r2: r2,
                time_to_best_s: t,
                total_time_s: c.total_time_s(),
                query_time_s: c.total_query_time_s(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.samples_to_best.cmp(&b.samples_to_best).then(a.strategy.name().cmp(b.strategy.name())));
    Ok(rows)
}

pub fn emit_summary<W: Write>(curves: &[&ConvergenceCurve], mut w: W) -> Result<()> {
    let mut out = String::from("strategy,samples_to_best,best_r2,time_to_best_s,total_time_s,query_time_s\n");
    for r in summarize(curves)? {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.strategy,
            r.samples_to_best,
            fmt_real(r.best_r2),
            fmt_real(r.time_to_best_s),
            fmt_real(r.total_time_s),
            fmt_real(r.query_time_s)
        ));
    }
    w.write_all(out.as_bytes()).map_err(io_err("summary"))
}

pub fn emit_reference<W: Write>(regressor: &str, target: &str, n_learning: usize, r2: f64, rmse: f64, mut w: W) -> Result<()> {
    let out = format!(
        "regressor,target,n_learning,r2,rmse\n{regressor},{target},{n_learning},{},{}\n",
        fmt_real(r2),
        fmt_real(rmse)
    );
    w.write_all(out.as_bytes()).map_err(io_err("reference"))
}

fn io_err(what: &'static str) -> impl Fn(std::io::Error) -> Error {
    move |e| Error::Io {
        path: what.into(),
        source: e,
    }
}

/// Everything produced by a run, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub experiments: Vec<Experiment>,
    pub reference: (f64, f64),
    pub n_learning: usize,
    /// Data-preparation warnings followed by strategy and model warnings.
    pub log: Vec<String>,
}

/// Runs every configured strategy on the same learning/validation split.
pub fn run_spec(spec: &ExperimentSpec, learning: &Dataset, validation: &Dataset, prep_warnings: &[String]) -> Result<RunOutput> {
    let kinds = spec.strategies().map_err(crate::error::usage)?;
    let mut log_lines: Vec<String> = prep_warnings.iter().map(|w| format!("data: {w}")).collect();
    let first = spec.al_config(kinds[0]);
    let reference = full_reference(learning, validation, &first)?;
    log::info!("full reference R2 = {:.4}", reference.0);
    let mut experiments = Vec::with_capacity(kinds.len());
    for kind in kinds {
        log::info!("running {kind}");
        let exp = run_experiment(&spec.al_config(kind), learning, validation)?;
        for c in &exp.curves {
            for w in &c.warnings {
                log_lines.push(format!(
                    "strategy={} replicate={} seed={} iteration={}: {}",
                    c.strategy, c.replicate, c.seed, w.iteration, w.message
                ));
            }
        }
        experiments.push(exp);
    }
    Ok(RunOutput {
        experiments,
        reference,
        n_learning: learning.n_samples(),
        log: log_lines,
    })
}

/// Writes the output files of a run and returns their paths.
pub fn write_outputs(spec: &ExperimentSpec, run: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let reg = spec.experiment.regressor.name();
    let target = &spec.experiment.target;
    let mut written = Vec::new();
    let mut create = |name: String| -> Result<(std::io::BufWriter<std::fs::File>, PathBuf)> {
        let path = dir.join(name);
        let f = std::fs::File::create(&path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        written.push(path.clone());
        Ok((std::io::BufWriter::new(f), path))
    };
    let means: Vec<&ConvergenceCurve> = run.experiments.iter().map(|e| &e.mean_curve).collect();
    let (f, _) = create(format!("curves_{reg}_{target}.csv"))?;
    emit_curves(&means, run.reference.0, f)?;
    for exp in &run.experiments {
        let (f, _) = create(format!("curve_{}_{reg}_{target}.csv", exp.mean_curve.strategy))?;
        emit_curve_detail(exp, f)?;
    }
    let (f, _) = create(format!("summary_{reg}_{target}.csv"))?;
    emit_summary(&means, f)?;
    let (f, _) = create(format!("reference_{reg}_{target}.csv"))?;
    emit_reference(reg, target, run.n_learning, run.reference.0, run.reference.1, f)?;
    let (mut f, path) = create("run.log".into())?;
    for line in &run.log {
        writeln!(f, "{line}").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    f.flush().map_err(io_err("run.log"))?;
    Ok(written)
}
