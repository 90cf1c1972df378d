use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use solrec::app::{
    build_models, build_pipeline, load_config, model_settings, parse_n_values, PipelineSources,
};
use solrec::service::{self, AppState, DEFAULT_CACHE_ENTRIES};
use solrec_core::classifier::{
    classifier_metrics, classify, load_training_jsonl, train_linear_head, ClassifierFile,
    TrainParams,
};
use solrec_core::eval::{
    evaluate_pipeline, load_annotations, load_dataset, load_rubric, write_trace, EvalOptions,
};
use solrec_core::feedback::FeedbackStore;
use solrec_core::retrieval::ingest_corpus;
use solrec_core::{RecommendationStatus, SupportCase};

#[derive(Parser)]
#[command(
    name = "solrec",
    version,
    about = "Solution recommendations for IT support cases"
)]
struct Cli {
    /// `key = value` pipeline config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Model backend name; otherwise taken from MOCK_MODELS.
    #[arg(long, global = true)]
    backend: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    #[arg(long, env = "INDEX_PATH")]
    index: PathBuf,
    #[arg(long, env = "CLASSIFIER_PATH")]
    classifier: PathBuf,
    /// Product alias table (JSON object of name to alias list).
    #[arg(long)]
    aliases: Option<PathBuf>,
}

impl PipelineArgs {
    fn sources(&self) -> PipelineSources {
        PipelineSources {
            index: self.index.clone(),
            classifier: self.classifier.clone(),
            aliases: self.aliases.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Embed a JSONL corpus into an index file.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "FEEDBACK_PATH", default_value = "feedback.jsonl")]
        feedback: PathBuf,
        #[arg(long, env = "SILENT_MODE", value_parser = parse_flag, default_value = "0")]
        silent: bool,
        #[arg(long, default_value_t = DEFAULT_CACHE_ENTRIES)]
        cache_entries: usize,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Resolve one case from a JSON file and print the recommendation.
    Resolve {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Score the pipeline against an annotated dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "1,3,5,10")]
        n: String,
        #[arg(long)]
        report: PathBuf,
        /// Per-case JSONL trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// JSONL of triply annotated items for agreement proportions.
        #[arg(long)]
        agreement: Option<PathBuf>,
        /// JSON array of rubric scores.
        #[arg(long)]
        rubric: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Fit the single-turn classifier head.
    TrainClassifier {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = TrainParams::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainParams::default().learning_rate)]
        learning_rate: f64,
        #[arg(long, default_value_t = TrainParams::default().l2)]
        l2: f64,
    },
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "" | "0" | "false" | "no" | "off" => Ok(false),
        other => Err(format!("expected a boolean, got '{other}'")),
    }
}

fn read_case(path: &Path) -> Result<SupportCase> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing case {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = load_config(cli.config.as_deref())?;
    let settings = model_settings(&config, cli.backend.as_deref());
    match cli.command {
        Command::Ingest { corpus, out } => {
            let models = build_models(&settings)?;
            let index = ingest_corpus(&corpus, models.base.as_ref())?;
            index.save(&out)?;
            eprintln!(
                "indexed {} documents in {} collections with {}",
                index.doc_count(),
                index.collections.len(),
                index.embedder_id
            );
        }
        Command::Serve {
            port,
            host,
            feedback,
            silent,
            cache_entries,
            pipeline,
        } => {
            let p = build_pipeline(config, build_models(&settings)?, &pipeline.sources())?;
            let store = FeedbackStore::open(&feedback)
                .with_context(|| format!("opening {}", feedback.display()))?;
            let addr: SocketAddr = format!("{host}:{port}").parse().context("listen address")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(
                AppState::new(p, store, cache_entries, silent),
                addr,
            ))?;
        }
        Command::Resolve { case, pipeline } => {
            let p = build_pipeline(config, build_models(&settings)?, &pipeline.sources())?;
            let rec = p.recommend(&read_case(&case)?)?;
            println!("{}", serde_json::to_string_pretty(&rec)?);
            if rec.status == RecommendationStatus::NotSingleTurn {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Evaluate {
            dataset,
            n,
            report,
            trace,
            agreement,
            rubric,
            workers,
            pipeline,
        } => {
            let p = build_pipeline(config, build_models(&settings)?, &pipeline.sources())?;
            let options = EvalOptions {
                n_values: parse_n_values(&n)?,
                workers,
                rubric_scores: rubric.as_deref().map(load_rubric).transpose()?,
                annotations: agreement.as_deref().map(load_annotations).transpose()?,
            };
            let data = load_dataset(&dataset)?;
            let (rep, rows) = evaluate_pipeline(&data, &p, &options)?;
            std::fs::write(&report, rep.to_json())
                .with_context(|| format!("writing {}", report.display()))?;
            if let Some(t) = trace {
                write_trace(&rows, BufWriter::new(File::create(&t)?))?;
            }
            eprintln!("evaluated {} cases ({} failures)", rep.cases, rep.failures);
        }
        Command::TrainClassifier {
            data,
            out,
            epochs,
            learning_rate,
            l2,
        } => {
            let models = build_models(&settings)?;
            let rows = load_training_jsonl(&data)?;
            let params = TrainParams {
                epochs,
                learning_rate,
                l2,
            };
            let model = train_linear_head(&rows, models.base.as_ref(), &params)?;
            let preds = rows
                .iter()
                .map(|r| {
                    Ok(classify(
                        model.probability(&models.base.embed(&r.text)?)?,
                        config.single_turn_threshold,
                    ))
                })
                .collect::<solrec_core::Result<Vec<_>>>()?;
            let labels: Vec<_> = rows.iter().map(|r| r.label).collect();
            let m = classifier_metrics(&preds, &labels)?;
            ClassifierFile::new(model, config.single_turn_threshold).save(&out)?;
            eprintln!(
                "trained on {} rows: precision {:.3} recall {:.3} f1 {:.3} at threshold {}",
                rows.len(),
                m.precision,
                m.recall,
                m.f1,
                config.single_turn_threshold
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
