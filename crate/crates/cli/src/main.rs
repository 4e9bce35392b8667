use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tagan_core::checkpoint::Checkpoint;
use tagan_core::config::{RunConfig, Variant};
use tagan_core::corpus::{load_segments, load_wav, synthesize_corpus, frame_labels, Manifest, Split, SyntheticSpec};
use tagan_core::metrics::{format_probabilities, labels_to_segments, write_segments, MetricsReport};
use tagan_core::pipeline::{self, Dataset, Detector, Predictor, ABLATION_HEADER};
use tagan_core::training::LOSS_LOG_HEADER;

#[derive(Parser)]
#[command(name = "tagan", version, about = "Adversarial speech activity detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus.
    SynthCorpus {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model on the train split of a manifest.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_checkpoint: PathBuf,
        /// Defaults to the checkpoint path with a `.losses.tsv` suffix.
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Score a checkpoint on one split of a manifest.
    Evaluate {
        #[arg(long, required_unless_present = "stub")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long, value_enum, default_value_t = Metric::Both)]
        metric: Metric,
        /// Replace the model with a fixed predictor.
        #[arg(long, value_enum)]
        stub: Option<Stub>,
    },
    /// Label a single WAV file.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out_segments: PathBuf,
        #[arg(long)]
        dump_probs: Option<PathBuf>,
        #[arg(long)]
        dump_embeddings: Option<PathBuf>,
        /// Segment file whose labels are appended to the embedding dump.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Train and score ablation variants over seeds and window sizes.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "1,2,3,4,5,6,7,8,9,10,11,12,13,proposed")]
        variants: String,
        #[arg(long, value_delimiter = ',', default_value = "7")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        window_sizes: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure prediction speed on synthetic audio.
    Bench {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        seconds: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Score a checkpoint on the test split of another corpus.
    CrossEval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest_other: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Both)]
        metric: Metric,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Metric {
    Fer,
    Dcf,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stub {
    Oracle,
    AllSpeech,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn print_metrics(report: &MetricsReport, utterances: usize, metric: Metric) {
    let mut header = vec!["utterances", "frames", "errors"];
    let mut row = vec![
        utterances.to_string(),
        report.total_frames().to_string(),
        report.error_frames().to_string(),
    ];
    if metric != Metric::Dcf {
        header.push("fer");
        row.push(format!("{:.6}", report.fer));
    }
    if metric != Metric::Fer {
        header.extend(["p_miss", "p_fa", "dcf"]);
        row.extend([report.p_miss, report.p_fa, report.dcf].map(|v| format!("{v:.6}")));
    }
    println!("{}", header.join("\t"));
    println!("{}", row.join("\t"));
}

fn evaluate_split(detector: Option<&Detector>, stub: Option<Stub>, manifest: &Path, split: Split, metric: Metric) -> Result<()> {
    let m = Manifest::load(manifest)?;
    let config = detector.map(|d| d.checkpoint.config.clone()).unwrap_or_default();
    let data = Dataset::load(&m, &pipeline::extractor_for(&config)?)?;
    let predictor = match (stub, detector) {
        (Some(Stub::Oracle), _) => Predictor::Oracle,
        (Some(Stub::AllSpeech), _) => Predictor::AllSpeech,
        (None, Some(d)) => Predictor::Model(d),
        (None, None) => bail!("a checkpoint or --stub is required"),
    };
    let utterances = data.split(split);
    let eval = pipeline::evaluate(&predictor, utterances)
        .with_context(|| format!("evaluating the {} split", split.as_str()))?;
    print_metrics(&eval.overall, utterances.len(), metric);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthCorpus { spec, out, seed } => {
            let mut s = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str::<SyntheticSpec>(&text)
                        .map_err(|e| tagan_core::Error::Config(e.to_string()))?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let m = synthesize_corpus(&s, &out)?;
            println!("wrote {} clips to {}", m.entries.len(), out.join("manifest.tsv").display());
        }
        Command::Train {
            config,
            manifest,
            out_checkpoint,
            loss_log,
        } => {
            let cfg = load_config(config.as_deref())?;
            let m = Manifest::load(&manifest)?;
            let data = Dataset::load(&m, &pipeline::extractor_for(&cfg)?)?;
            let log_path = loss_log.unwrap_or_else(|| {
                let mut p = out_checkpoint.clone().into_os_string();
                p.push(".losses.tsv");
                PathBuf::from(p)
            });
            let mut log = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
            writeln!(log, "{LOSS_LOG_HEADER}")?;
            let mut write_err = None;
            let outcome = pipeline::train(&cfg, &data, |r| {
                if let Err(e) = writeln!(log, "{}", r.to_row()) {
                    write_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = write_err {
                return Err(e).with_context(|| format!("writing {}", log_path.display()));
            }
            outcome.checkpoint.save(&out_checkpoint)?;
            if let Some(last) = outcome.reports.last() {
                println!("{LOSS_LOG_HEADER}");
                println!("{}", last.to_row());
            }
        }
        Command::Evaluate {
            checkpoint,
            manifest,
            split,
            metric,
            stub,
        } => {
            let detector = match (&checkpoint, stub) {
                (Some(p), None) => Some(Detector::new(Checkpoint::load(p)?)?),
                _ => None,
            };
            evaluate_split(detector.as_ref(), stub, &manifest, split.into(), metric)?;
        }
        Command::Predict {
            checkpoint,
            wav,
            out_segments,
            dump_probs,
            dump_embeddings,
            reference,
            threshold,
        } => {
            let detector = Detector::new(Checkpoint::load(&checkpoint)?)?;
            let clip = load_wav(&wav)?;
            let out = detector.run(&clip)?;
            let track = out.track.clone().with_threshold(threshold);
            let spec = detector.checkpoint.config.frame;
            write_segments(&out_segments, &labels_to_segments(&track.labels(), &spec))?;
            if let Some(p) = dump_probs {
                fs::write(&p, format_probabilities(&track)).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = dump_embeddings {
                let labels = match reference {
                    Some(r) => Some(frame_labels(&load_segments(&r)?, track.len(), &spec)),
                    None => None,
                };
                let text = pipeline::dump_embeddings(&clip, &detector, labels.as_deref())?;
                fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            println!("{} frames, {} segments", track.len(), labels_to_segments(&track.labels(), &spec).len());
        }
        Command::Ablate {
            config,
            manifest,
            variants,
            seeds,
            window_sizes,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let variants = Variant::parse_list(&variants)?;
            if variants.is_empty() || seeds.is_empty() {
                bail!(tagan_core::Error::Config("need at least one variant and one seed".into()));
            }
            let windows = window_sizes.unwrap_or_else(|| vec![cfg.train.window]);
            let m = Manifest::load(&manifest)?;
            let data = Dataset::load(&m, &pipeline::extractor_for(&cfg)?)?;
            let results = pipeline::ablate(&cfg, &data, &variants, &seeds, &windows, |r| {
                eprintln!("{}", r.to_row());
            })?;
            let mut table = format!("{ABLATION_HEADER}\n");
            for r in &results {
                table.push_str(&r.to_row());
                table.push('\n');
            }
            match out {
                Some(p) => fs::write(&p, &table).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{table}"),
            }
        }
        Command::Bench {
            checkpoint,
            seconds,
            seed,
        } => {
            if !(seconds > 0.0) {
                bail!(tagan_core::Error::Config("--seconds must be positive".into()));
            }
            let detector = Detector::new(Checkpoint::load(&checkpoint)?)?;
            let r = pipeline::bench(&detector, seconds, seed)?;
            println!("seconds\telapsed_secs\treal_time_factor\tparameters\tclosed_form_parameters");
            println!(
                "{:.2}\t{:.4}\t{:.2}\t{}\t{}",
                r.seconds, r.elapsed_secs, r.real_time_factor, r.parameters, r.closed_form_parameters
            );
        }
        Command::CrossEval {
            checkpoint,
            manifest_other,
            metric,
        } => {
            let detector = Detector::new(Checkpoint::load(&checkpoint)?)?;
            evaluate_split(Some(&detector), None, &manifest_other, Split::Test, metric)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<tagan_core::Error>() {
        Some(e) if e.is_numerical() => 3,
        Some(tagan_core::Error::UnknownVariant(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
