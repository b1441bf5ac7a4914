//! `gad`: generate datasets, run repeated trials, tune, and sweep layers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gad_core::datagen::{self, GenSpec, Mechanism};
use gad_core::dataset::{import_text, load_dataset, save_dataset, TextSources};
use gad_core::protocol::{
    random_search, run_trials, BenchReport, Config, Family, ParamValue, RunOptions, Setting,
};
use gad_core::{GadError, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "gad",
    version,
    about = "Graph anomaly detection with tree ensembles"
)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "GAD_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Gen(GenArgs),
    /// Repeated train/evaluate trials for one configuration.
    Run(RunArgs),
    /// Random hyperparameter search on a fixed split.
    Tune(TuneArgs),
    /// Run trials for L = 0..=4 and emit a CSV table.
    SweepLayers(SweepArgs),
    /// Import plain edge, feature and label files into a dataset directory.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_mechanism)]
    mechanism: Mechanism,
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    avg_degree: f64,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    anomaly_ratio: f64,
    /// Probability of flipping each label.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Model family: rf, xgb, rf-graph, xgb-graph, knn, na, or <family>+na.
    #[arg(long)]
    model: String,
    /// full, semi, or split:<name> for a split stored with the dataset.
    #[arg(long, default_value = "full")]
    setting: String,
    /// train,val,test fractions for the full setting.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    ratios: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Aggregate along edge direction on directed graphs.
    #[arg(long)]
    keep_directed: bool,
    /// Record wall-clock and peak memory in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct OverrideArgs {
    /// JSON object of configuration values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// key=value configuration override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    overrides: OverrideArgs,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// JSON report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a one-row CSV summary.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// JSON report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    overrides: OverrideArgs,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// CSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    name: String,
    #[arg(long)]
    directed: bool,
    #[arg(long)]
    out: PathBuf,
}

fn parse_mechanism(s: &str) -> std::result::Result<Mechanism, String> {
    s.parse().map_err(|e: GadError| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(GadError::InvalidParameter(
                "--workers must be at least 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| GadError::InvalidParameter(e.to_string()))?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Tune(a) => cmd_tune(a),
        Command::SweepLayers(a) => cmd_sweep_layers(a),
        Command::Convert(a) => cmd_convert(a),
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let spec = GenSpec {
        num_nodes: a.nodes,
        avg_degree: a.avg_degree,
        dim: a.dim,
        anomaly_ratio: a.anomaly_ratio,
        mechanism: a.mechanism,
        noise: a.noise,
        seed: a.seed,
    };
    let dataset = datagen::generate(&spec)?;
    save_dataset(&dataset, &a.out)?;
    println!("{}", dataset.summary());
    Ok(())
}

fn cmd_convert(a: ConvertArgs) -> Result<()> {
    let sources = TextSources {
        edges: &a.edges,
        features: &a.features,
        labels: &a.labels,
    };
    let dataset = import_text(&sources, &a.name, a.directed)?;
    save_dataset(&dataset, &a.out)?;
    println!("{}", dataset.summary());
    Ok(())
}

struct Prepared {
    family: Family,
    setting: Setting,
    options: RunOptions,
    dataset: gad_core::dataset::Dataset,
}

fn prepare(a: &DataArgs) -> Result<Prepared> {
    let family: Family = a.model.parse()?;
    let setting = parse_setting(&a.setting, a.ratios.as_deref())?;
    let dataset = load_dataset(&a.data)?;
    Ok(Prepared {
        family,
        setting,
        options: RunOptions {
            keep_directed: a.keep_directed,
            record_timings: a.timings,
        },
        dataset,
    })
}

fn parse_setting(s: &str, ratios: Option<&[f64]>) -> Result<Setting> {
    if ratios.is_some() && s != "full" {
        return Err(GadError::InvalidParameter(
            "--ratios applies only to --setting full".into(),
        ));
    }
    match s {
        "full" => Ok(match ratios {
            Some(&[train, val, test]) => Setting::Full { train, val, test },
            _ => Setting::full(),
        }),
        "semi" => Ok(Setting::semi()),
        _ => match s.strip_prefix("split:") {
            Some(name) if !name.is_empty() => Ok(Setting::Named {
                name: name.to_string(),
            }),
            _ => Err(GadError::InvalidParameter(format!(
                "setting must be full, semi or split:<name>, got `{s}`"
            ))),
        },
    }
}

fn build_config(family: &Family, o: &OverrideArgs) -> Result<Config> {
    let mut config = match &o.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| GadError::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text)?
        }
        None => Config::default(),
    };
    for assignment in &o.overrides {
        config.set_from_str(family, assignment)?;
    }
    family.validate(&config)?;
    Ok(config)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| GadError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes pretty JSON to `out`, or to stdout when absent. Returns whether
/// stdout stayed free for human-readable lines.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<bool> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => {
            write_text(path, &text)?;
            Ok(true)
        }
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| GadError::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })?;
            Ok(false)
        }
    }
}

fn say(to_stdout: bool, line: &str) {
    if to_stdout {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

/// Six significant digits, shortest decimal form.
fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    rounded.to_string()
}

fn csv_row(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let p = prepare(&a.data)?;
    let config = build_config(&p.family, &a.overrides)?;
    let report = run_trials(
        &p.family,
        &config,
        &p.dataset,
        &p.setting,
        a.repeats,
        a.data.seed,
        p.options,
    )?;
    let free = emit_json(&report, a.out.as_deref())?;
    if let Some(csv) = &a.csv {
        write_text(csv, &run_csv(&report))?;
    }
    let g = &report.aggregate;
    say(
        free,
        &format!(
            "{} {} repeats={} auroc={}±{} auprc={}±{} rec@k={}±{}",
            report.dataset,
            report.family,
            report.n_repeats,
            sig6(g.auroc.mean),
            sig6(g.auroc.std),
            sig6(g.auprc.mean),
            sig6(g.auprc.std),
            sig6(g.rec_at_k.mean),
            sig6(g.rec_at_k.std)
        ),
    );
    Ok(())
}

fn run_csv(r: &BenchReport) -> String {
    let g = &r.aggregate;
    let header = "dataset,family,repeats,mean_auroc,std_auroc,mean_auprc,std_auprc,mean_rec_at_k,std_rec_at_k";
    let row = [
        r.dataset.clone(),
        r.family.to_string(),
        r.n_repeats.to_string(),
        sig6(g.auroc.mean),
        sig6(g.auroc.std),
        sig6(g.auprc.mean),
        sig6(g.auprc.std),
        sig6(g.rec_at_k.mean),
        sig6(g.rec_at_k.std),
    ];
    format!("{header}\n{}", csv_row(&row))
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let p = prepare(&a.data)?;
    let report = random_search(
        &p.family,
        &p.dataset,
        &p.setting,
        a.trials,
        a.data.seed,
        p.options,
    )?;
    let free = emit_json(&report, a.out.as_deref())?;
    say(
        free,
        &format!(
            "best trial {} of {}: val auprc={} test auroc={} auprc={} rec@k={}",
            report.best_trial,
            report.n_trials,
            sig6(report.best_val.auprc),
            sig6(report.best_test.auroc),
            sig6(report.best_test.auprc),
            sig6(report.best_test.rec_at_k)
        ),
    );
    say(
        free,
        &format!("config: {}", report.best_config.to_assignments().join(" ")),
    );
    Ok(())
}

fn cmd_sweep_layers(a: SweepArgs) -> Result<()> {
    let p = prepare(&a.data)?;
    if !p.family.base.uses_graph() {
        return Err(GadError::InvalidParameter(format!(
            "sweep-layers needs rf-graph or xgb-graph, got {}",
            p.family
        )));
    }
    let base = build_config(&p.family, &a.overrides)?;
    let mut csv = String::from("L,mean_auprc,std_auprc,mean_auroc,mean_rec_at_k\n");
    for layers in 0..=4i64 {
        let mut config = base.clone();
        config.insert("L", ParamValue::Int(layers));
        let r = run_trials(
            &p.family,
            &config,
            &p.dataset,
            &p.setting,
            a.repeats,
            a.data.seed,
            p.options,
        )?;
        let g = &r.aggregate;
        csv.push_str(&csv_row(&[
            layers.to_string(),
            sig6(g.auprc.mean),
            sig6(g.auprc.std),
            sig6(g.auroc.mean),
            sig6(g.rec_at_k.mean),
        ]));
    }
    match &a.out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.417177179), "0.417177");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(123456789.0), "123457000");
        assert_eq!(sig6(0.000123456789), "0.000123457");
    }

    #[test]
    fn settings() {
        assert_eq!(parse_setting("semi", None).unwrap(), Setting::semi());
        assert_eq!(
            parse_setting("full", Some(&[0.7, 0.15, 0.15])).unwrap(),
            Setting::Full {
                train: 0.7,
                val: 0.15,
                test: 0.15
            }
        );
        assert_eq!(
            parse_setting("split:official", None).unwrap(),
            Setting::Named {
                name: "official".into()
            }
        );
        assert!(parse_setting("half", None).is_err());
        assert!(parse_setting("semi", Some(&[0.5, 0.25, 0.25])).is_err());
    }
}
