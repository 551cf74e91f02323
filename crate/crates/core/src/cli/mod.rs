//! Command-line front end. `main.rs` only forwards to [`run`].

pub mod config;
pub mod manifest;
pub mod svg;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::checkpoint;
use crate::data::{parse_delimited, standardize, write_delimited, LabeledDataset, Standardizer};
use crate::error::{Error, Result};
use crate::metrics::{run_experiment, ExperimentConfig, ExperimentReport, Method, RepeatOutcome};
use crate::neighbors::relabel;
use crate::rng::RngStream;
use crate::sampler::{
    group_adaptive_filter, oversample, smote_cls_pipeline, Ablation, Augmented, FilterReport, LatentExport, Provenance,
    Strategy,
};
use crate::simgen::{generate, NoiseRejection, Origin, SimSpec};

use config::{parse_config, Overrides, Settings};
use manifest::{FileDigest, RunManifest, MANIFEST_FORMAT, PREPROCESSING};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    /// Tables were written but some strategy failed on some repeat.
    pub const PARTIAL: i32 = 3;
}

#[derive(Parser, Debug)]
#[command(
    name = "smote-cls",
    version,
    about = "Latent-filtered SMOTE oversampling and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the two-cluster benchmark with injected label noise.
    Simulate(SimulateArgs),
    /// Oversample one dataset and write the augmented rows.
    Augment(AugmentArgs),
    /// Repeated-split evaluation of several strategies on one or more datasets.
    Benchmark(BenchmarkArgs),
    /// Evaluate the full pipeline against its three ablations.
    Ablate(AblateArgs),
    /// Write the latent embedding with densities and filter decisions.
    LatentExport(LatentArgs),
    /// Re-run a manifest and check that every output is byte-identical.
    Replay(ReplayArgs),
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| format!("{e} (or `base`)"))
}

#[derive(Args, Debug, Clone, Default)]
pub struct SettingsArgs {
    /// Key-value settings file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target minor/major ratio after oversampling.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Neighbors for the difficulty relabeling and borderline detection.
    #[arg(long)]
    pub k_knn: Option<usize>,
    #[arg(long)]
    pub k_smote: Option<usize>,
    #[arg(long)]
    pub k_enn: Option<usize>,
    /// Retained density quantile for easy minors.
    #[arg(long)]
    pub q_easy: Option<f64>,
    /// Retained density quantile for hard minors.
    #[arg(long)]
    pub q_hard: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// KL weighting: `batch` (one KL term per minibatch) or `sample` (per row).
    #[arg(long, value_parser = ["batch", "sample"])]
    pub kl_reduction: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Latent width, or `auto`.
    #[arg(long, value_name = "N|auto")]
    pub latent_dim: Option<String>,
    /// Frozen classifier used to weight the encoder heads.
    #[arg(long, value_parser = ["forest", "mlp"])]
    pub f_eta: Option<String>,
    #[arg(long, value_parser = ["default", "wide", "axis-aligned", "collapsed"])]
    pub prior_preset: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// Label cell value of the minor class.
    #[arg(long)]
    pub positive_label: Option<String>,
}

impl SettingsArgs {
    fn resolve(&self) -> Result<Settings> {
        let cfg = match &self.config {
            // a bad config file is a usage error, like a bad flag
            Some(p) => parse_config(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)
                .map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?,
            None => Default::default(),
        };
        let o = Overrides {
            seed: self.seed,
            rho: self.rho,
            k_knn: self.k_knn,
            k_smote: self.k_smote,
            k_enn: self.k_enn,
            q_easy: self.q_easy,
            q_hard: self.q_hard,
            beta: self.beta,
            kl_reduction: self.kl_reduction.clone(),
            epochs: self.epochs,
            batch: self.batch,
            learning_rate: self.learning_rate,
            latent_dim: self.latent_dim.clone(),
            f_eta: self.f_eta.clone(),
            prior_preset: self.prior_preset.clone(),
            label_column: self.label_column.clone(),
            positive_label: self.positive_label.clone(),
        };
        Settings::resolve(&o, &cfg)
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 80)]
    pub n_g1: usize,
    #[arg(long, default_value_t = 20)]
    pub n_g2: usize,
    #[arg(long, default_value_t = 1500)]
    pub n_major: usize,
    #[arg(long, default_value_t = 50)]
    pub n_noise: usize,
    /// Draw noise as new uniform points instead of relabeling majors.
    #[arg(long)]
    pub fresh_noise: bool,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the trained model (latent-filter strategies only).
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// One or more datasets, reported in the given order.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub input: Vec<PathBuf>,
    #[arg(long, value_parser = parse_method, value_delimiter = ',', default_value = "base,smote,smote_cls")]
    pub strategies: Vec<Method>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Args, Debug)]
pub struct LatentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline variant; one of the smote_cls tokens.
    #[arg(long, value_parser = parse_strategy, default_value = "smote_cls")]
    pub strategy: Strategy,
    /// Embed with a saved model instead of training one.
    #[arg(long)]
    pub load_model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// What a command did, for the manifest.
struct Run {
    command: &'static str,
    argv: Vec<String>,
    settings: Settings,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest: PathBuf,
    partial: bool,
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Columns the loader drops before parsing: ground truth from `simulate`
/// and the tag column written by `augment`.
const SIDE_COLUMNS: [&str; 2] = ["origin", "provenance"];

/// Loads a dataset, splitting off the simulated ground truth if present.
pub fn read_input(path: &Path, settings: &Settings) -> Result<(LabeledDataset, Option<Vec<Origin>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (text, origin) = strip_side_columns(&text)?;
    let data = parse_delimited(&text, &settings.label_column, &settings.positive_label)?;
    if let Some(o) = &origin {
        if o.len() != data.len() {
            return Err(Error::invalid("origin column length disagrees with data rows"));
        }
    }
    Ok((data, origin))
}

fn strip_side_columns(text: &str) -> Result<(String, Option<Vec<Origin>>)> {
    let header = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let names: Vec<&str> = header.split(delimiter as char).map(str::trim).collect();
    if !names.iter().any(|n| SIDE_COLUMNS.contains(n)) {
        return Ok((text.to_string(), None));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(parse_err)?.clone();
    let keep: Vec<usize> = (0..headers.len())
        .filter(|&j| !SIDE_COLUMNS.contains(&&headers[j]))
        .collect();
    let origin_col = headers.iter().position(|h| h == "origin");
    let mut out = csv::WriterBuilder::new().delimiter(delimiter).from_writer(vec![]);
    let io = |e: csv::Error| Error::invalid(e.to_string());
    out.write_record(keep.iter().map(|&j| &headers[j])).map_err(io)?;
    let mut origin = vec![];
    for rec in reader.records() {
        let rec = rec.map_err(parse_err)?;
        if rec.len() != headers.len() {
            continue;
        }
        if let Some(c) = origin_col {
            origin.push(rec[c].parse::<Origin>()?);
        }
        out.write_record(keep.iter().map(|&j| &rec[j])).map_err(io)?;
    }
    let bytes = out.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((text, origin_col.map(|_| origin)))
}

fn provenance_tag(p: &Provenance) -> String {
    match p {
        Provenance::Original(_) => "original".into(),
        Provenance::Interpolated(_) => "interpolated".into(),
        Provenance::Decoded => "decoded".into(),
    }
}

fn augmented_bytes(aug: &Augmented, scaler: &Standardizer) -> Result<Vec<u8>> {
    let mut out = aug.data.clone();
    out.features = scaler.inverse_transform(&aug.data.features);
    let tags: Vec<String> = aug.provenance.iter().map(provenance_tag).collect();
    let mut buf = vec![];
    write_delimited(&mut buf, &out, &[("provenance", &tags)]).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(buf)
}

fn filter_bytes(report: &FilterReport) -> Vec<u8> {
    let mut s = String::from("row,group,density,threshold,kept\n");
    for e in &report.entries {
        let t = report.thresholds[usize::from(e.group == crate::neighbors::PseudoLabel::HardMinor)];
        s.push_str(&format!("{},{},{},{},{}\n", e.index, e.group, e.density, t, e.kept));
    }
    s.into_bytes()
}

fn latent_bytes(export: &LatentExport, data: &LabeledDataset) -> Vec<u8> {
    let h = export.z.cols();
    let mut s: String = (1..=h).map(|j| format!("z_{j},")).collect();
    s.push_str("y,y_pseudo,density,kept\n");
    for i in 0..export.z.rows() {
        for v in export.z.row(i) {
            s.push_str(&format!("{v},"));
        }
        let density = export.density[i].map(|d| d.to_string()).unwrap_or_default();
        let kept = export.kept[i].map(|k| k.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{density},{kept}\n", data.tokens[i], export.pseudo[i]));
    }
    s.into_bytes()
}

fn print_rejection(label: &str, origin: &[Origin], kept: impl Fn(usize) -> Option<bool>) -> NoiseRejection {
    let r = NoiseRejection::measure(origin, kept);
    println!(
        "{label}noise excluded {:.1}%, G1 retained {:.1}%, G2 retained {:.1}%",
        100.0 * r.noise_excluded,
        100.0 * r.g1_retained,
        100.0 * r.g2_retained
    );
    r
}

fn ablation_of(strategy: Strategy) -> Result<Ablation> {
    match strategy {
        Strategy::SmoteCls(a) => Ok(a),
        other => Err(Error::invalid(format!(
            "`{other}` has no latent filter; use a smote_cls variant"
        ))),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Run> {
    let spec = SimSpec {
        n_g1: a.n_g1,
        n_g2: a.n_g2,
        n_major: a.n_major,
        n_noise: a.n_noise,
        fresh_noise: a.fresh_noise,
        ..SimSpec::default()
    };
    spec.validate()?;
    let sim = generate(&spec, RngStream::new(a.seed, 0))?;
    let tags: Vec<String> = sim.origin.iter().map(|o| o.to_string()).collect();
    let mut buf = vec![];
    write_delimited(&mut buf, &sim.data, &[("origin", &tags)]).map_err(|e| Error::io(&a.out, e))?;
    write_file(&a.out, &buf)?;
    println!(
        "wrote {} rows ({} minor, {} major) to {}",
        sim.data.len(),
        sim.data.count(crate::data::Label::Minor),
        sim.data.count(crate::data::Label::Major),
        a.out.display()
    );
    let mut argv = vec!["simulate".to_string(), "--out".into(), path_str(&a.out)];
    for (k, v) in [
        ("--seed", a.seed.to_string()),
        ("--n-g1", a.n_g1.to_string()),
        ("--n-g2", a.n_g2.to_string()),
        ("--n-major", a.n_major.to_string()),
        ("--n-noise", a.n_noise.to_string()),
    ] {
        argv.extend([k.to_string(), v]);
    }
    if a.fresh_noise {
        argv.push("--fresh-noise".into());
    }
    Ok(Run {
        command: "simulate",
        argv,
        settings: Settings {
            seed: a.seed,
            ..Settings::default()
        },
        inputs: vec![],
        outputs: vec![a.out.clone()],
        manifest: a.manifest.clone().unwrap_or_else(|| sibling(&a.out, ".manifest.json")),
        partial: false,
    })
}

fn cmd_augment(a: &AugmentArgs) -> Result<Run> {
    let settings = a.settings.resolve()?;
    let config = settings.oversample(a.strategy)?;
    if a.save_model.is_some() && !matches!(a.strategy, Strategy::SmoteCls(_)) {
        return Err(Error::invalid("--save-model needs a smote_cls variant"));
    }
    let (data, origin) = read_input(&a.input, &settings)?;
    let (std_data, scaler) = standardize(&data)?;
    let rng = RngStream::new(settings.seed, 0);
    let mut outputs = vec![];
    let mut inputs = vec![a.input.clone()];
    let aug = match a.strategy {
        Strategy::SmoteCls(ablation) => {
            let run = smote_cls_pipeline(&std_data, &config, ablation, rng.named(a.strategy.as_str()))?;
            if let Some(p) = &a.save_model {
                write_file(p, &checkpoint::encode(&run.model))?;
                outputs.push(p.clone());
            }
            run.augmented
        }
        _ => oversample(&std_data, &config, rng)?,
    };
    write_file(&a.out, &augmented_bytes(&aug, &scaler)?)?;
    outputs.insert(0, a.out.clone());
    let minor = aug.data.count(crate::data::Label::Minor);
    println!(
        "{}: {} rows ({} minor, {} major), {} synthetic",
        a.strategy,
        aug.data.len(),
        minor,
        aug.data.len() - minor,
        aug.synthetic_count()
    );
    if let Some(report) = &aug.filter {
        let p = with_ext(&a.out, "filter.csv");
        write_file(&p, &filter_bytes(report))?;
        outputs.push(p);
        if let Some(o) = &origin {
            print_rejection("", o, |i| report.entry(i).map(|e| e.kept));
        }
    }
    if let Some(latent) = &aug.latent {
        let p = with_ext(&a.out, "latent.csv");
        write_file(&p, &latent_bytes(latent, &data))?;
        outputs.push(p);
        let p = with_ext(&a.out, "latent.svg");
        write_file(
            &p,
            svg::latent_scatter(latent, &format!("{} latent space", a.strategy)).as_bytes(),
        )?;
        outputs.push(p);
    }
    inputs.extend(a.settings.config.clone());
    let mut argv = vec![
        "augment".to_string(),
        "--input".into(),
        path_str(&a.input),
        "--strategy".into(),
        a.strategy.to_string(),
        "--out".into(),
        path_str(&a.out),
    ];
    if let Some(p) = &a.save_model {
        argv.extend(["--save-model".into(), path_str(p)]);
    }
    argv.extend(settings.to_flags());
    Ok(Run {
        command: "augment",
        argv,
        settings,
        inputs,
        outputs,
        manifest: a.manifest.clone().unwrap_or_else(|| sibling(&a.out, ".manifest.json")),
        partial: false,
    })
}

fn experiment_config(settings: &Settings, repeats: usize) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        repeats,
        seed: settings.seed,
        oversample: settings.oversample(Strategy::Smote)?,
        ..ExperimentConfig::default()
    })
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path_str(path), |s| s.to_string_lossy().into_owned())
}

fn write_tables(dir: &Path, stem: &str, reports: &[ExperimentReport]) -> Result<Vec<PathBuf>> {
    let mut csv = String::new();
    let mut txt = String::new();
    for (i, r) in reports.iter().enumerate() {
        let table = r.to_delimited();
        // one header for the whole file
        csv.push_str(if i == 0 {
            &table
        } else {
            table.split_once('\n').map_or("", |(_, rest)| rest)
        });
        if i > 0 {
            txt.push('\n');
        }
        txt.push_str(&r.to_aligned());
    }
    let (c, t) = (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.txt")));
    write_file(&c, csv.as_bytes())?;
    write_file(&t, txt.as_bytes())?;
    print!("{txt}");
    Ok(vec![c, t])
}

/// Prints one line per method that failed on some repeat; true if any did.
fn warn_failures(report: &ExperimentReport) -> bool {
    let mut any = false;
    for m in &report.rows {
        let reasons: Vec<&str> = m
            .repeats
            .iter()
            .filter_map(|r| match r {
                RepeatOutcome::Failed(why) => Some(why.as_str()),
                RepeatOutcome::Scored(_) => None,
            })
            .collect();
        if let Some(first) = reasons.first() {
            any = true;
            eprintln!(
                "warning: {}: {} failed on {} of {} repeats ({first})",
                report.dataset,
                m.method.label(),
                reasons.len(),
                m.repeats.len()
            );
        }
    }
    any
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<Run> {
    let settings = a.settings.resolve()?;
    let cfg = experiment_config(&settings, a.repeats)?;
    let mut reports = vec![];
    for path in &a.input {
        let (data, _) = read_input(path, &settings)?;
        reports.push(run_experiment(&dataset_name(path), &data, &a.strategies, &cfg)?);
    }
    let outputs = write_tables(&a.out, "benchmark", &reports)?;
    // every report warns, so no short-circuit
    let warned: Vec<bool> = reports.iter().map(warn_failures).collect();
    let partial = warned.contains(&true);
    let mut argv = vec!["benchmark".to_string(), "--input".into()];
    argv.push(a.input.iter().map(|p| path_str(p)).collect::<Vec<_>>().join(","));
    argv.extend([
        "--strategies".into(),
        a.strategies.iter().map(|m| m.label()).collect::<Vec<_>>().join(","),
        "--repeats".into(),
        a.repeats.to_string(),
        "--out".into(),
        path_str(&a.out),
    ]);
    argv.extend(settings.to_flags());
    let mut inputs = a.input.clone();
    inputs.extend(a.settings.config.clone());
    Ok(Run {
        command: "benchmark",
        argv,
        settings,
        inputs,
        outputs,
        manifest: a.manifest.clone().unwrap_or_else(|| a.out.join("manifest.json")),
        partial,
    })
}

fn cmd_ablate(a: &AblateArgs) -> Result<Run> {
    let settings = a.settings.resolve()?;
    let cfg = experiment_config(&settings, a.repeats)?;
    let (data, origin) = read_input(&a.input, &settings)?;
    let methods: Vec<Method> = Ablation::ALL
        .iter()
        .map(|&ab| Method::Oversample(Strategy::SmoteCls(ab)))
        .collect();
    let report = run_experiment(&dataset_name(&a.input), &data, &methods, &cfg)?;
    let mut outputs = write_tables(&a.out, "ablate", std::slice::from_ref(&report))?;
    if let Some(origin) = &origin {
        // filter decisions on the whole simulated set, one model per variant
        let (std_data, _) = standardize(&data)?;
        let mut s = String::from("variant,noise_excluded,g1_retained,g2_retained\n");
        for ab in Ablation::ALL {
            let strategy = Strategy::SmoteCls(ab);
            let run = smote_cls_pipeline(
                &std_data,
                &settings.oversample(strategy)?,
                ab,
                RngStream::new(settings.seed, 0).named(strategy.as_str()),
            )?;
            let r = print_rejection(&format!("{:>8}: ", ab.label()), origin, |i| {
                run.report.entry(i).map(|e| e.kept)
            });
            s.push_str(&format!(
                "{},{},{},{}\n",
                strategy, r.noise_excluded, r.g1_retained, r.g2_retained
            ));
        }
        let p = a.out.join("ablate_noise.csv");
        write_file(&p, s.as_bytes())?;
        outputs.push(p);
    }
    let partial = warn_failures(&report);
    let mut argv = vec![
        "ablate".to_string(),
        "--input".into(),
        path_str(&a.input),
        "--repeats".into(),
        a.repeats.to_string(),
        "--out".into(),
        path_str(&a.out),
    ];
    argv.extend(settings.to_flags());
    let mut inputs = vec![a.input.clone()];
    inputs.extend(a.settings.config.clone());
    Ok(Run {
        command: "ablate",
        argv,
        settings,
        inputs,
        outputs,
        manifest: a.manifest.clone().unwrap_or_else(|| a.out.join("manifest.json")),
        partial,
    })
}

fn cmd_latent(a: &LatentArgs) -> Result<Run> {
    let settings = a.settings.resolve()?;
    let ablation = ablation_of(a.strategy)?;
    let config = settings.oversample(a.strategy)?;
    let (data, origin) = read_input(&a.input, &settings)?;
    let (std_data, _) = standardize(&data)?;
    let mut inputs = vec![a.input.clone()];
    let (export, report) = match &a.load_model {
        Some(p) => {
            inputs.push(p.clone());
            let model = checkpoint::decode(&fs::read(p).map_err(|e| Error::io(p, e))?)?;
            if model.input_dim() != std_data.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.input_dim(),
                    got: std_data.dim(),
                });
            }
            let pseudo = relabel(&std_data, settings.k_knn)?;
            let z = model.embed(&std_data.features)?.z;
            let minors = pseudo.minor_indices();
            let groups: Vec<_> = minors.iter().map(|&i| pseudo.pseudo_labels[i]).collect();
            let filter = crate::sampler::FilterConfig {
                adaptive: config.filter.adaptive && ablation.adaptive(),
                ..config.filter
            };
            let report = group_adaptive_filter(&z.select_rows(&minors), &minors, &groups, &filter)?;
            (LatentExport::new(z, &pseudo, Some(&report)), report)
        }
        None => {
            let run = smote_cls_pipeline(
                &std_data,
                &config,
                ablation,
                RngStream::new(settings.seed, 0).named(a.strategy.as_str()),
            )?;
            let export = run.augmented.latent.expect("pipeline exports its embedding");
            (export, run.report)
        }
    };
    write_file(&a.out, &latent_bytes(&export, &data))?;
    let svg_path = with_ext(&a.out, "svg");
    write_file(
        &svg_path,
        svg::latent_scatter(&export, &format!("{} latent space", a.strategy)).as_bytes(),
    )?;
    let kept = report.retained().len();
    println!("{} of {} minor rows kept", kept, report.entries.len());
    if let Some(o) = &origin {
        print_rejection("", o, |i| report.entry(i).map(|e| e.kept));
    }
    let mut argv = vec![
        "latent-export".to_string(),
        "--input".into(),
        path_str(&a.input),
        "--out".into(),
        path_str(&a.out),
        "--strategy".into(),
        a.strategy.to_string(),
    ];
    if let Some(p) = &a.load_model {
        argv.extend(["--load-model".into(), path_str(p)]);
    }
    argv.extend(settings.to_flags());
    inputs.extend(a.settings.config.clone());
    Ok(Run {
        command: "latent-export",
        argv,
        settings,
        inputs,
        outputs: vec![a.out.clone(), svg_path],
        manifest: a.manifest.clone().unwrap_or_else(|| sibling(&a.out, ".manifest.json")),
        partial: false,
    })
}

fn execute(command: &Command) -> Result<Run> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::LatentExport(a) => cmd_latent(a),
        Command::Replay(_) => Err(Error::invalid("replay cannot be nested")),
    }
}

fn write_manifest(run: &Run, started: Instant) -> Result<()> {
    let digests = |ps: &[PathBuf]| ps.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>>>();
    let m = RunManifest {
        format: MANIFEST_FORMAT,
        command: run.command.into(),
        argv: run.argv.clone(),
        seed: run.settings.seed,
        settings: run.settings.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        preprocessing: PREPROCESSING.into(),
        inputs: digests(&run.inputs)?,
        outputs: digests(&run.outputs)?,
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    write_file(&run.manifest, m.to_json().as_bytes())
}

fn replay(path: &Path) -> Result<i32> {
    let m = RunManifest::load(path)?;
    for d in &m.inputs {
        let now = FileDigest::of(Path::new(&d.path))?;
        if now.sha256 != d.sha256 {
            return Err(Error::invalid(format!(
                "input {} changed since the recorded run",
                d.path
            )));
        }
    }
    let argv = std::iter::once("smote-cls".to_string()).chain(m.argv.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::invalid(format!("manifest arguments: {e}")))?;
    let run = execute(&cli.command)?;
    let mut mismatched = 0;
    for d in &m.outputs {
        let now = FileDigest::of(Path::new(&d.path))?;
        if now.sha256 != d.sha256 {
            eprintln!("mismatch: {}", d.path);
            mismatched += 1;
        }
    }
    if mismatched > 0 {
        return Err(Error::Degenerate(format!(
            "{mismatched} of {} outputs differ",
            m.outputs.len()
        )));
    }
    println!("replay ok: {} outputs identical", m.outputs.len());
    Ok(if run.partial { exit::PARTIAL } else { exit::OK })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => exit::USAGE,
        _ => exit::FAILURE,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let started = Instant::now();
    let result = match &cli.command {
        Command::Replay(r) => replay(&r.manifest),
        other => execute(other).and_then(|run| {
            write_manifest(&run, started)?;
            Ok(if run.partial { exit::PARTIAL } else { exit::OK })
        }),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn side_columns_are_split_off() {
        let text = "x1,x2,class,origin\n0.1,0.2,positive,G1\n0.3,0.4,negative,major\n";
        let (clean, origin) = strip_side_columns(text).unwrap();
        assert_eq!(clean, "x1,x2,class\n0.1,0.2,positive\n0.3,0.4,negative\n");
        assert_eq!(origin, Some(vec![Origin::G1, Origin::Major]));
        let plain = "a,class\n1,positive\n";
        assert_eq!(strip_side_columns(plain).unwrap(), (plain.to_string(), None));
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "smote-cls",
            "augment",
            "--input",
            "a.csv",
            "--strategy",
            "smote_cls_wo_af",
            "--out",
            "b.csv",
            "--q-easy",
            "0.8",
        ])
        .unwrap();
        match cli.command {
            Command::Augment(a) => {
                assert_eq!(a.strategy, Strategy::SmoteCls(Ablation::WithoutAdaptive));
                assert_eq!(a.settings.q_easy, Some(0.8));
            }
            _ => panic!("wrong command"),
        }
        let err = Cli::try_parse_from([
            "smote-cls",
            "augment",
            "--input",
            "a",
            "--strategy",
            "adasyn",
            "--out",
            "b",
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), exit::USAGE);
        assert!(err.to_string().contains("kmsmote"));
    }

    #[test]
    fn resolved_flags_round_trip() {
        let s = Settings {
            latent_dim: Some(3),
            q_hard: 0.55,
            ..Settings::default()
        };
        let mut argv = vec!["smote-cls", "latent-export", "--input", "a", "--out", "b"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        argv.extend(s.to_flags());
        let Command::LatentExport(a) = Cli::try_parse_from(argv).unwrap().command else {
            panic!("wrong command")
        };
        assert_eq!(a.settings.resolve().unwrap(), s);
    }
}
