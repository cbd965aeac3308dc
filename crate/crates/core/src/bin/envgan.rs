use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use envgan::augment::SchemeKind;
use envgan::config::PipelineConfig;
use envgan::pipeline::{exit_code, selftest, Pipeline, Scheme};
use envgan::Result;

#[derive(Parser)]
#[command(name = "envgan", version, about = "Environmental sound augmentation and classification pipeline")]
struct Cli {
    /// Config file, or `paper` / `desk` for the bundled profiles.
    #[arg(long, global = true, default_value = "paper")]
    config: String,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override one config key, e.g. `--set gan.epochs=20`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a metadata CSV against the audio files and store the manifest.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compute and cache log-mel features for every clip present.
    Preprocess,
    /// Write the classical augmentations of every clip.
    Augment {
        #[arg(long)]
        scheme: String,
    },
    /// Train the per-class GAN (all classes if `--class` is omitted).
    GanTrain {
        #[arg(long)]
        class: Option<String>,
    },
    GanGenerate {
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Keep generated clips that are not near-copies of a training clip.
    GanFilter {
        #[arg(long)]
        class: Option<String>,
    },
    /// Train one classifier per test fold.
    ClfTrain {
        #[arg(long, default_value = "baseline")]
        scheme: String,
        #[arg(long, value_delimiter = ',')]
        folds: Option<Vec<u8>>,
    },
    /// Score the fold classifiers and write the summary row.
    Evaluate {
        #[arg(long, default_value = "baseline")]
        scheme: String,
        #[arg(long, value_delimiter = ',')]
        folds: Option<Vec<u8>>,
    },
    /// Combine evaluated schemes and write difference matrices.
    Report,
    /// Gradient checks and architecture shape conformance.
    Selftest,
}

fn classes(p: &Pipeline, class: &Option<String>) -> Result<Vec<String>> {
    match class {
        Some(c) => Ok(vec![c.clone()]),
        None => Ok(p.manifest()?.class_names()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| envgan::Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let p = Pipeline::new(cfg, &cli.out);
    let folds = |f: &Option<Vec<u8>>| f.clone().unwrap_or_else(|| p.cfg.folds.clone());
    let fold_text = |f: &[u8]| f.iter().map(u8::to_string).collect::<Vec<_>>().join(",");
    match &cli.command {
        Command::Ingest { data, manifest } => {
            let m = p.ingest(data, manifest)?;
            p.write_header("ingest", &[("data", data.display().to_string()), ("manifest", manifest.display().to_string())])?;
            println!("ingested {} clips in {} classes", m.rows.len(), m.n_classes());
        }
        Command::Preprocess => {
            let n = p.preprocess()?;
            p.write_header("preprocess", &[])?;
            println!("features ready for {n} clips");
        }
        Command::Augment { scheme } => {
            let kind = SchemeKind::parse(scheme)?;
            let n = p.augment(kind)?;
            p.write_header("augment", &[("scheme", kind.to_string())])?;
            println!("{kind}: wrote {n} clips");
        }
        Command::GanTrain { class } => {
            for c in classes(&p, class)? {
                let log = p.gan_train(&c)?;
                if let Some(last) = log.last() {
                    println!(
                        "{c}: {} epochs, critic loss {:.4}, wasserstein {:.4}",
                        last.epoch, last.critic_loss, last.wasserstein
                    );
                }
            }
            p.write_header("gan-train", &[("class", class.clone().unwrap_or_else(|| "all".into()))])?;
        }
        Command::GanGenerate { class, count } => {
            let n = count.unwrap_or(p.cfg.generate_count);
            for c in classes(&p, class)? {
                let files = p.gan_generate(&c, n)?;
                println!("{c}: generated {}", files.len());
            }
            p.write_header(
                "gan-generate",
                &[("class", class.clone().unwrap_or_else(|| "all".into())), ("count", n.to_string())],
            )?;
        }
        Command::GanFilter { class } => {
            for c in classes(&p, class)? {
                let o = p.gan_filter(&c)?;
                println!("{c}: accepted {}, rejected {}", o.accepted.len(), o.rejected.len());
            }
            p.write_header("gan-filter", &[("class", class.clone().unwrap_or_else(|| "all".into()))])?;
        }
        Command::ClfTrain { scheme, folds: f } => {
            let scheme = Scheme::parse(scheme)?;
            let f = folds(f);
            for (fold, log) in p.clf_train(scheme, &f)? {
                if let Some(last) = log.last() {
                    println!("fold {fold}: loss {:.4}, training accuracy {:.3}", last.loss, last.accuracy);
                }
            }
            p.write_header("clf-train", &[("scheme", scheme.as_str().into()), ("folds", fold_text(&f))])?;
        }
        Command::Evaluate { scheme, folds: f } => {
            let scheme = Scheme::parse(scheme)?;
            let f = folds(f);
            let (row, _) = p.evaluate(scheme, &f)?;
            p.write_header("evaluate", &[("scheme", scheme.as_str().into()), ("folds", fold_text(&f))])?;
            println!("{}\n{row}", envgan::metrics::SUMMARY_HEADER);
        }
        Command::Report => {
            print!("{}", p.report()?);
            p.write_header("report", &[])?;
        }
        Command::Selftest => {
            for line in selftest()? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
