//! `esig`: generate synthetic corpora, train and cross-validate classifiers,
//! and label load series week by week.

mod failure;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use esig_core::domain::{read_series_csv, write_series_csv, Dataset, ProcessElectricityMap, Stage};
use esig_core::eval::{cross_validate, hierarchical_label, DEFAULT_TRIALS};
use esig_core::models::{self, Family, ModelArtifact, TrainConfig};
use esig_core::synthgen::{generate_corpus, GenConfig};
use serde::de::DeserializeOwned;

use failure::{usage, Classify, Failure, Kind};
use manifest::Run;

#[derive(Parser)]
#[command(name = "esig", version, about = "Energy-signature analysis of factory load data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Mlp,
    Cnn,
    Pcalr,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Mlp => Family::Mlp,
            FamilyArg::Cnn => Family::Cnn,
            FamilyArg::Pcalr => Family::Pcalr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Weekly,
    Daily,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Weekly => Stage::Weekly,
            StageArg::Daily => Stage::Daily,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus: per-line series CSVs plus weekly
    /// and daily datasets.
    Gen {
        /// JSON generator config; omitted fields take defaults.
        #[arg(long)]
        gen_config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on a whole dataset.
    Train {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long)]
        dataset: PathBuf,
        /// JSON training config; omitted fields take defaults.
        #[arg(long)]
        train_config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated 75/25 hold-out evaluation.
    Eval {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        train_config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TRIALS as u64, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// Trial t uses seed base-seed + t.
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every week of a series and drill into the days of weeks that
    /// are not normal.
    Label {
        #[arg(long)]
        weekly_model: PathBuf,
        #[arg(long)]
        daily_model: PathBuf,
        /// `timestamp,line_id,kw` CSV.
        #[arg(long)]
        series: PathBuf,
        /// Line to label when the CSV holds several.
        #[arg(long)]
        line: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_json<T: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<T, Failure> {
    serde_json::from_slice(bytes)
        .map_err(esig_core::Error::from)
        .or_usage(format!("cannot parse {}", path.display()))
}

fn load_config<T: DeserializeOwned + Default>(run: &mut Run, name: &str, path: Option<&Path>) -> Result<T, Failure> {
    match path {
        Some(p) => {
            run.arg(name, p.display());
            let bytes = run.read_input(p)?;
            parse_json(&bytes, p)
        }
        None => Ok(T::default()),
    }
}

fn load_dataset(run: &mut Run, path: &Path, stage: Stage) -> Result<Dataset, Failure> {
    run.arg("dataset", path.display());
    let bytes = run.read_input(path)?;
    let text = String::from_utf8(bytes).map_err(|_| usage(format!("{} is not UTF-8", path.display())))?;
    let ds = Dataset::from_json(&text).context(format!("invalid dataset {}", path.display()))?;
    if ds.stage != stage {
        return Err(usage(format!(
            "{} holds a {} dataset but --stage is {stage}",
            path.display(),
            ds.stage
        )));
    }
    Ok(ds)
}

fn load_model(run: &mut Run, name: &str, path: &Path) -> Result<ModelArtifact, Failure> {
    run.arg(name, path.display());
    let bytes = run.read_input(path)?;
    let text = String::from_utf8(bytes).map_err(|_| usage(format!("{} is not UTF-8", path.display())))?;
    ModelArtifact::from_json(&text).or_usage(format!("invalid model {}", path.display()))
}

fn pretty<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn gen(gen_config: Option<PathBuf>, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let mut run = Run::new("gen", out)?;
    let mut cfg: GenConfig = load_config(&mut run, "gen-config", gen_config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run.seed("seed", cfg.seed);
    let corpus = generate_corpus(&cfg, &ProcessElectricityMap::default()).context("generation failed")?;

    run.write("gen_config.json", &pretty(&cfg))?;
    for s in &corpus.series {
        let mut csv = Vec::new();
        write_series_csv(&mut csv, std::slice::from_ref(s)).or_internal("writing series")?;
        run.write(&format!("series/{}.csv", s.line_id), &csv)?;
    }
    run.write("weekly.json", corpus.weekly.to_json().or_internal("encoding dataset")?.as_bytes())?;
    run.write("daily.json", corpus.daily.to_json().or_internal("encoding dataset")?.as_bytes())?;
    run.finish()?;
    println!(
        "generated {} lines × {} weeks: {} weekly rows, {} daily rows",
        corpus.series.len(),
        cfg.weeks,
        corpus.weekly.len(),
        corpus.daily.len()
    );
    Ok(())
}

fn train(
    family: Family,
    stage: Stage,
    dataset: &Path,
    train_config: Option<PathBuf>,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), Failure> {
    let mut run = Run::new("train", out)?;
    run.arg("family", family);
    run.arg("stage", stage);
    let mut cfg: TrainConfig = load_config(&mut run, "train-config", train_config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run.seed("seed", cfg.seed);
    let ds = load_dataset(&mut run, dataset, stage)?;
    let artifact = models::train(family, stage, &ds, &cfg).context("training failed")?;
    artifact.validate().or_internal("trained model failed validation")?;
    run.write("model.json", artifact.to_json().or_internal("encoding model")?.as_bytes())?;
    run.finish()?;
    println!("trained {family} {stage} model on {} rows", ds.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    family: Family,
    stage: Stage,
    dataset: &Path,
    train_config: Option<PathBuf>,
    trials: usize,
    base_seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    let mut run = Run::new("eval", out)?;
    run.arg("family", family);
    run.arg("stage", stage);
    run.arg("trials", trials);
    run.seed("base-seed", base_seed);
    let cfg: TrainConfig = load_config(&mut run, "train-config", train_config.as_deref())?;
    let ds = load_dataset(&mut run, dataset, stage)?;
    let report = cross_validate(family, stage, &ds, trials, base_seed, &cfg).context("evaluation failed")?;
    if report.accuracies.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Failure {
            kind: Kind::Internal,
            error: anyhow::anyhow!("accuracy outside [0, 1]"),
        });
    }
    run.write("cv_report.json", &pretty(&report))?;
    run.write("trials.csv", report.trials_csv().as_bytes())?;
    run.finish()?;
    println!("{}", report.summary());
    Ok(())
}

fn label(
    weekly_model: &Path,
    daily_model: &Path,
    series: &Path,
    line: Option<String>,
    out: &Path,
) -> Result<(), Failure> {
    let mut run = Run::new("label", out)?;
    let weekly = load_model(&mut run, "weekly-model", weekly_model)?;
    let daily = load_model(&mut run, "daily-model", daily_model)?;
    run.arg("series", series.display());
    let bytes = run.read_input(series)?;
    let all = read_series_csv(bytes.as_slice()).or_usage(format!("cannot read series {}", series.display()))?;
    let chosen = match line {
        Some(id) => {
            run.arg("line", &id);
            all.into_iter()
                .find(|s| s.line_id == id)
                .ok_or_else(|| usage(format!("line {id} not found in {}", series.display())))?
        }
        None if all.len() == 1 => all.into_iter().next().expect("one series"),
        None => {
            let ids: Vec<String> = all.iter().map(|s| s.line_id.clone()).collect();
            return Err(usage(format!(
                "{} holds several lines ({}); choose one with --line",
                series.display(),
                ids.join(", ")
            )));
        }
    };
    let report = hierarchical_label(&weekly, &daily, &chosen).context("labeling failed")?;
    if report.flagged().any(|w| w.days.len() != 7) {
        return Err(Failure {
            kind: Kind::Internal,
            error: anyhow::anyhow!("flagged week without seven day entries"),
        });
    }
    run.write("diagnostics.json", &pretty(&report))?;
    run.finish()?;
    print!("{}", report.table());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { gen_config, seed, out } => gen(gen_config, seed, &out),
        Command::Train {
            family,
            stage,
            dataset,
            train_config,
            seed,
            out,
        } => train(family.into(), stage.into(), &dataset, train_config, seed, &out),
        Command::Eval {
            family,
            stage,
            dataset,
            train_config,
            trials,
            base_seed,
            out,
        } => {
            let trials = usize::try_from(trials).map_err(|_| usage("--trials is too large"))?;
            eval(family.into(), stage.into(), &dataset, train_config, trials, base_seed, &out)
        }
        Command::Label {
            weekly_model,
            daily_model,
            series,
            line,
            out,
        } => label(&weekly_model, &daily_model, &series, line, &out),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {f}");
            f.kind.exit_code()
        }
        Err(_) => Kind::Internal.exit_code(),
    }
}
