//! Command-line driver: trains prediction models, replays predictions, runs
//! planner comparisons and parameter sweeps, and writes JSON, CSV and SVG
//! artifacts.

pub mod output;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use intentplan::prediction::{load_model, predict_motion, save_model, MotionModel};
use intentplan::rng::{derive_seed, stream};
use intentplan::sim::{
    eval_prediction, human_script, metrics_report, noisy_params, run_scenario, scenario_dataset, train_scenario_model,
    HumanPlayback, Metrics, ModelKind, RunOptions, RunTrace, Scenario,
};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use output::{csv_bytes, emit_csv, write_atomic, write_json};
use svg::{line_chart, Labels, Series};

#[derive(Parser, Debug)]
#[command(name = "intentplan", version, about = "Intention-aware planning: training, prediction, simulation and sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario description in JSON.
    #[arg(long, value_name = "PATH", required_unless_present = "scenario", conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    /// Built-in scenario: blocking, far-human or arrangement.
    #[arg(long, value_name = "NAME")]
    pub scenario: Option<String>,
    /// Run seed; for `train` it replaces the scenario's training seed.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory, created when missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Prediction model archive written by `train`; trained on the fly when
    /// absent.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train the scenario's prediction model and write `model.json`.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Replay the scenario's person and write the prediction issued at every
    /// frame to `predictions.json`.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Predictor variant: iplanner or iplanner-ni.
        #[arg(long, value_name = "LIST", default_value = "iplanner-ni")]
        models: ModelList,
        /// Also write `predictions.csv`.
        #[arg(long)]
        csv: bool,
    },
    /// Run the scenario with each planner; write `trace.json` and
    /// `metrics.csv`.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "LIST", default_value = "itomp,iplanner,iplanner-ni")]
        models: ModelList,
        /// Record wall-clock prediction times (makes outputs
        /// non-reproducible).
        #[arg(long)]
        timing: bool,
        /// Also write one clearance plot per planner.
        #[arg(long)]
        svg: bool,
    },
    /// Score prediction quality on held-out demonstrations with noisy
    /// observations; write `eval.json`.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "LIST", default_value = "iplanner,iplanner-ni")]
        models: ModelList,
        /// Observation noise levels (m), as `noise=V1,V2,...`.
        #[arg(long, value_name = "NAME=V1,V2,...", default_value = "noise=0")]
        param: Param,
        /// Frames between evaluated windows.
        #[arg(long, default_value_t = 5)]
        stride: usize,
        /// Also write `eval.csv`.
        #[arg(long)]
        csv: bool,
        /// Also write precision and accuracy curves.
        #[arg(long)]
        svg: bool,
    },
    /// Run the scenario once per parameter value and planner; write
    /// `metrics.csv`, one trace per run and `sweep.svg`.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "LIST", default_value = "itomp,iplanner,iplanner-ni")]
        models: ModelList,
        /// Swept parameter: noise, speed, delta, start_time, n_starts,
        /// iterations or seed.
        #[arg(long, value_name = "NAME=V1,V2,...")]
        param: Param,
        /// Metric plotted against the parameter.
        #[arg(long, default_value = "min_distance_m")]
        metric: String,
        /// Record wall-clock prediction times (makes outputs
        /// non-reproducible).
        #[arg(long)]
        timing: bool,
    },
}

/// Comma-separated planner ids.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelList(pub Vec<ModelKind>);

impl FromStr for ModelList {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let kinds = s
            .split(',')
            .map(|k| k.trim().parse::<ModelKind>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if kinds.is_empty() {
            return Err("no models given".into());
        }
        Ok(ModelList(kinds))
    }
}

/// `NAME=V1,V2,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub values: Vec<f64>,
}

impl FromStr for Param {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, list) = s.split_once('=').ok_or_else(|| format!("expected NAME=V1,V2,..., got '{s}'"))?;
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad value '{v}': {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if name.trim().is_empty() || values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(format!("expected NAME=V1,V2,... with finite values, got '{s}'"));
        }
        Ok(Param { name: name.trim().into(), values })
    }
}

/// Scenario after applying `name = value`; `seed` is returned separately.
pub fn apply_param(scn: &Scenario, name: &str, value: f64, seed: u64) -> Result<(Scenario, u64)> {
    let mut s = scn.clone();
    let mut seed = seed;
    let count = |v: f64| -> Result<usize> {
        ensure!(v >= 0.0 && v.fract() == 0.0, "{name} must be a non-negative integer, got {v}");
        Ok(v as usize)
    };
    match name {
        "noise" => s.human.noise = value,
        "speed" => s.human.speed = value,
        "start_time" => s.human.start_time = value,
        "delta" => s.planner.delta = value,
        "n_starts" => s.planner.n_starts = count(value)?,
        "iterations" => s.planner.iterations = count(value)?,
        "seed" => seed = count(value)? as u64,
        _ => bail!("unknown sweep parameter '{name}'"),
    }
    s.validate().with_context(|| format!("{name}={value}"))?;
    Ok((s, seed))
}

pub fn load_scenario(c: &Common) -> Result<Scenario> {
    let scn = match (&c.config, &c.scenario) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str::<Scenario>(&text).with_context(|| format!("invalid scenario in {}", p.display()))?
        }
        (None, Some(name)) => match name.as_str() {
            "blocking" => Scenario::blocking(),
            "far-human" => Scenario::far_human(),
            "arrangement" => Scenario::arrangement(),
            _ => bail!("unknown built-in scenario '{name}'"),
        },
        (None, None) => bail!("either --config or --scenario is required"),
    };
    scn.validate()?;
    Ok(scn)
}

fn model_for(scn: &Scenario, c: &Common) -> Result<MotionModel> {
    match &c.model {
        Some(p) => {
            let f = fs::File::open(p).with_context(|| format!("cannot open model {}", p.display()))?;
            let m = load_model(std::io::BufReader::new(f)).with_context(|| format!("invalid model {}", p.display()))?;
            ensure!(
                m.config.hash() == scn.prediction.predictor.hash(),
                "model {} was trained with a different predictor configuration",
                p.display()
            );
            Ok(m)
        }
        None => {
            let t = Instant::now();
            let m = train_scenario_model(scn)?;
            info!("trained prediction model in {:.1?}", t.elapsed());
            Ok(m)
        }
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_svg(path: &Path, series: &[Series], labels: &Labels) -> Result<()> {
    write_atomic(path, line_chart(series, labels)?.as_bytes())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common } => train(&common),
        Command::Predict { common, models, csv } => predict(&common, &models, csv),
        Command::Simulate { common, models, timing, svg } => simulate(&common, &models, timing, svg),
        Command::Eval { common, models, param, stride, csv, svg } => eval(&common, &models, &param, stride, csv, svg),
        Command::Sweep { common, models, param, metric, timing } => sweep(&common, &models, &param, &metric, timing),
    }
}

fn train(c: &Common) -> Result<()> {
    let mut scn = load_scenario(c)?;
    if let Some(s) = c.seed {
        scn.prediction.train_seed = s;
    }
    let model = train_scenario_model(&scn)?;
    let mut bytes = Vec::new();
    save_model(&model, &mut bytes)?;
    prepare_out(&c.out)?;
    write_atomic(&c.out.join("model.json"), &bytes)
}

#[derive(Serialize)]
struct PredictionRow {
    time: f64,
    action: usize,
    dominant: usize,
    dominant_weight: f64,
    fallback: bool,
    weights: Vec<f64>,
}

#[derive(Serialize)]
struct PredictionCsvRow {
    time: f64,
    action: usize,
    dominant: usize,
    dominant_weight: f64,
}

fn predict(c: &Common, models: &ModelList, csv: bool) -> Result<()> {
    let scn = load_scenario(c)?;
    let [kind] = models.0[..] else { bail!("predict takes exactly one model") };
    ensure!(kind.uses_prediction(), "{kind} does not predict");
    let model = model_for(&scn, c)?;
    let seed = c.seed.unwrap_or(0);
    let noisy = noisy_params(&scn, kind)?;
    let n_p = model.config.n_p;
    let pb = HumanPlayback::new(&scn, &human_script(&scn, seed)?, seed, scn.planner.max_time + 5.0, n_p + 2)?;
    let mut rows = Vec::new();
    for k in n_p + 1..pb.truth.len() {
        let time = pb.frame_time(k);
        if time > pb.end_time {
            break;
        }
        let p = predict_motion(&model, &pb.window_features(k, n_p)?, &pb.progress(k), &noisy)?;
        let (dominant, dominant_weight) = p.dominant();
        rows.push(PredictionRow { time, action: pb.action(k), dominant, dominant_weight, fallback: p.fallback, weights: p.weights });
    }
    prepare_out(&c.out)?;
    write_json(&c.out.join("predictions.json"), &rows)?;
    if csv {
        let flat: Vec<PredictionCsvRow> = rows
            .iter()
            .map(|r| PredictionCsvRow { time: r.time, action: r.action, dominant: r.dominant, dominant_weight: r.dominant_weight })
            .collect();
        write_atomic(
            &c.out.join("predictions.csv"),
            &csv_bytes(&["time", "action", "dominant", "dominant_weight"], &flat)?,
        )?;
    }
    Ok(())
}

fn predictor_needed(models: &ModelList) -> bool {
    models.0.iter().any(|k| k.uses_prediction())
}

fn simulate(c: &Common, models: &ModelList, timing: bool, svg: bool) -> Result<()> {
    let scn = load_scenario(c)?;
    let model = if predictor_needed(models) { Some(model_for(&scn, c)?) } else { None };
    let seed = c.seed.unwrap_or(0);
    let traces: Vec<RunTrace> = models
        .0
        .iter()
        .map(|&k| {
            let t = Instant::now();
            let tr = run_scenario(&scn, model.as_ref(), k, seed, RunOptions { timing })?;
            info!("{k} finished in {:.1?}", t.elapsed());
            Ok(tr)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Metrics> = traces.iter().map(metrics_report).collect::<intentplan::Result<_>>()?;
    prepare_out(&c.out)?;
    write_json(&c.out.join("trace.json"), &traces)?;
    emit_csv(&rows, &c.out.join("metrics.csv"))?;
    if svg {
        for tr in &traces {
            let points = tr.steps.iter().map(|s| (s.sim_time, s.min_distance)).collect();
            let labels = Labels {
                title: format!("{} clearance, seed {}", scn.name, seed),
                x: "time (s)".into(),
                y: "min distance (m)".into(),
            };
            let series = [Series { label: tr.model.label().into(), points }];
            write_svg(&c.out.join(format!("clearance-{}.svg", tr.model.id())), &series, &labels)?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
struct EvalRow {
    noise: f64,
    model: String,
    windows: usize,
    confident: usize,
    correct: usize,
    classification_precision: f64,
    regression_precision: f64,
    regression_accuracy: f64,
}

fn eval(c: &Common, models: &ModelList, param: &Param, stride: usize, csv: bool, svg: bool) -> Result<()> {
    let scn = load_scenario(c)?;
    ensure!(param.name == "noise", "eval sweeps only 'noise', got '{}'", param.name);
    ensure!(param.values.iter().all(|v| *v >= 0.0), "noise levels must be non-negative");
    if let Some(k) = models.0.iter().find(|k| !k.uses_prediction()) {
        bail!("{k} does not predict");
    }
    let model = model_for(&scn, c)?;
    let seed = c.seed.unwrap_or(0);
    let test = scenario_dataset(&scn, derive_seed(seed, stream::DATA, 0x74657374))?;
    let jobs: Vec<(f64, ModelKind)> = param.values.iter().flat_map(|&v| models.0.iter().map(move |&k| (v, k))).collect();
    let rows: Vec<EvalRow> = jobs
        .par_iter()
        .map(|&(noise, kind)| {
            let mut s = scn.clone();
            s.human.noise = noise;
            let e = eval_prediction(&model, &test, noise, &noisy_params(&s, kind)?, stride, seed)?;
            Ok(EvalRow {
                noise,
                model: kind.id().into(),
                windows: e.windows,
                confident: e.confident,
                correct: e.correct,
                classification_precision: e.classification_precision,
                regression_precision: e.regression_precision,
                regression_accuracy: e.regression_accuracy,
            })
        })
        .collect::<Result<_>>()?;
    prepare_out(&c.out)?;
    write_json(&c.out.join("eval.json"), &rows)?;
    if csv {
        let header = [
            "noise",
            "model",
            "windows",
            "confident",
            "correct",
            "classification_precision",
            "regression_precision",
            "regression_accuracy",
        ];
        write_atomic(&c.out.join("eval.csv"), &csv_bytes(&header, &rows)?)?;
    }
    if svg {
        let series = |f: fn(&EvalRow) -> f64| -> Vec<Series> {
            models
                .0
                .iter()
                .map(|k| Series {
                    label: k.label().into(),
                    points: rows.iter().filter(|r| r.model == k.id()).map(|r| (r.noise, f(r))).collect(),
                })
                .collect()
        };
        let labels = |title: &str, y: &str| Labels { title: title.into(), x: "observation noise (m)".into(), y: y.into() };
        write_svg(
            &c.out.join("eval-classification.svg"),
            &series(|r| r.classification_precision),
            &labels("Classification precision", "precision"),
        )?;
        write_svg(
            &c.out.join("eval-accuracy.svg"),
            &series(|r| r.regression_accuracy),
            &labels("Regression accuracy", "integrated covariance determinant"),
        )?;
    }
    Ok(())
}

fn metric_value(m: &Metrics, name: &str) -> Result<f64> {
    Ok(match name {
        "prediction_ms" => m.prediction_ms.context("prediction_ms is only recorded with --timing")?,
        "mhd_m" => m.mhd_m,
        "smoothness" => m.smoothness,
        "jerkiness" => m.jerkiness,
        "min_distance_m" => m.min_distance_m,
        "efficiency" => m.efficiency,
        _ => bail!("unknown metric '{name}'"),
    })
}

fn sweep(c: &Common, models: &ModelList, param: &Param, metric: &str, timing: bool) -> Result<()> {
    let scn = load_scenario(c)?;
    let base_seed = c.seed.unwrap_or(0);
    let runs: Vec<(f64, ModelKind, Scenario, u64)> = param
        .values
        .iter()
        .map(|&v| apply_param(&scn, &param.name, v, base_seed).map(|(s, seed)| (v, s, seed)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flat_map(|(v, s, seed)| models.0.iter().map(move |&k| (v, k, s.clone(), seed)))
        .collect();
    let model = if predictor_needed(models) { Some(model_for(&scn, c)?) } else { None };
    prepare_out(&c.out)?;
    let run_dir = c.out.join("runs");
    prepare_out(&run_dir)?;
    let rows: Vec<Metrics> = runs
        .par_iter()
        .map(|(v, k, s, seed)| {
            let tr = run_scenario(s, model.as_ref(), *k, *seed, RunOptions { timing })?;
            let tag = format!("{}={}", param.name, v);
            write_json(&run_dir.join(format!("{}-{tag}.json", k.id())), &tr)?;
            let mut m = metrics_report(&tr)?;
            m.scenario = format!("{}@{tag}", m.scenario);
            Ok(m)
        })
        .collect::<Result<_>>()?;
    emit_csv(&rows, &c.out.join("metrics.csv"))?;
    let series = models
        .0
        .iter()
        .map(|k| {
            let points = param
                .values
                .iter()
                .zip(rows.iter().filter(|m| m.model == k.id()))
                .map(|(&v, m)| Ok((v, metric_value(m, metric)?)))
                .collect::<Result<_>>()?;
            Ok(Series { label: k.label().into(), points })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = Labels { title: format!("{} sweep of {}", scn.name, param.name), x: param.name.clone(), y: metric.into() };
    write_svg(&c.out.join("sweep.svg"), &series, &labels)
}
