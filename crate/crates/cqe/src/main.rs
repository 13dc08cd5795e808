use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cqe::config::{AppConfig, CountSource};
use cqe::engine::{EngineConfig, EngineMode};
use cqe::formats::{self, CorpusFormat};
use cqe::service::{render_table, ChooseRequest, ExpandRequest, Service};
use cqe_core::eval::{aggregate_uer, compare_report};
use cqe_core::pool::CandidateSource;

/// Concept-distance query expansion with a collaborative query pool.
#[derive(Debug, Parser)]
#[command(name = "cqe", version, arg_required_else_help = true)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a corpus index and write it as JSON.
    Index {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<CorpusFormat>,
    },
    /// Print ranked expansion candidates for a query.
    Expand {
        query: String,
        #[command(flatten)]
        sources: SourceArgs,
        #[arg(long)]
        limit: Option<usize>,
        /// Only use these candidate sources (repeatable).
        #[arg(long = "source", value_parser = parse_source)]
        source_filter: Vec<CandidateSource>,
        /// Print the response as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Record that a term was chosen for a query.
    Choose {
        query: String,
        term: String,
        #[command(flatten)]
        sources: SourceArgs,
    },
    /// Compare system rankings with the aggregated voter ranking.
    Eval {
        /// Voter rankings, one JSON object per line.
        #[arg(long)]
        uer: PathBuf,
        /// System rankings, one term per line; named after the file stem.
        #[arg(long, num_args = 0..)]
        systems: Vec<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[command(flatten)]
        sources: SourceArgs,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Manage replay fixtures.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

#[derive(Debug, Subcommand)]
enum FixturesCommand {
    /// Run an expansion against the live engine, appending every count and
    /// suggestion it fetches to the fixture files.
    Record {
        query: String,
        #[command(flatten)]
        sources: SourceArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Provider {
    Replay,
    Live,
    LiveWithCache,
    /// Count co-occurrences in the local corpus.
    Corpus,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// TOML configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where hit counts come from.
    #[arg(long, value_enum)]
    provider: Option<Provider>,
    /// Engine fixture directory.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Lexical graph file.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Corpus directory, record file or saved index.
    #[arg(long, alias = "index")]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    corpus_format: Option<CorpusFormat>,
    /// Query-pool file; in memory when omitted.
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Search endpoint for live modes.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    suggest_endpoint: Option<String>,
    /// Estimated number of documents the engine indexes.
    #[arg(long)]
    m_estimate: Option<u64>,
}

fn parse_source(s: &str) -> Result<CandidateSource, String> {
    CandidateSource::parse(s).ok_or_else(|| {
        let names: Vec<&str> = CandidateSource::ALL.iter().map(|c| c.as_str()).collect();
        format!("unknown source {s:?}; expected one of {}", names.join(", "))
    })
}

impl SourceArgs {
    fn app_config(&self) -> Result<AppConfig> {
        let mut cfg = match &self.config {
            Some(path) => AppConfig::load(path)?,
            None => AppConfig::default(),
        };
        if let Some(p) = &self.graph {
            cfg.graph = Some(p.clone());
        }
        if let Some(p) = &self.pool {
            cfg.pool = Some(p.clone());
        }
        if let Some(p) = &self.corpus {
            cfg.corpus = Some(p.clone());
            if self.config.is_none() && self.provider.is_none() && self.fixtures.is_none() {
                cfg.counts = Some(CountSource::Corpus);
            }
        }
        if self.corpus_format.is_some() {
            cfg.corpus_format = self.corpus_format;
        }

        let engine_flags = self.fixtures.is_some()
            || self.endpoint.is_some()
            || self.suggest_endpoint.is_some()
            || self.m_estimate.is_some();
        let mode = match self.provider {
            Some(Provider::Corpus) => {
                cfg.counts = Some(CountSource::Corpus);
                None
            }
            Some(Provider::Replay) => Some(EngineMode::Replay),
            Some(Provider::Live) => Some(EngineMode::Live),
            Some(Provider::LiveWithCache) => Some(EngineMode::LiveWithCache),
            None => None,
        };
        if mode.is_some() || engine_flags {
            let engine = cfg.engine.get_or_insert_with(EngineConfig::default);
            if let Some(mode) = mode {
                engine.mode = mode;
                cfg.counts = Some(CountSource::Engine);
            }
            if let Some(p) = &self.fixtures {
                engine.fixtures = p.clone();
            }
            if let Some(e) = &self.endpoint {
                engine.endpoint = e.clone();
            }
            if let Some(e) = &self.suggest_endpoint {
                engine.suggest_endpoint = Some(e.clone());
            }
            if let Some(m) = self.m_estimate {
                engine.m_estimate = m;
            }
        }
        Ok(cfg.with_env_overrides())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index { corpus, out, format } => {
            let index = formats::load_corpus(&corpus, format)?;
            formats::save_index(&index, &out)?;
            println!(
                "indexed {} documents, {} terms -> {}",
                index.num_docs(),
                index.vocabulary().count(),
                out.display()
            );
        }
        Command::Expand {
            query,
            sources,
            limit,
            source_filter,
            json,
        } => {
            let service = Service::build(&sources.app_config()?)?;
            let req = ExpandRequest {
                query,
                source_filter: (!source_filter.is_empty()).then_some(source_filter),
                limit,
            };
            let resp = service.expand(&req)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&resp)?);
            } else {
                print!("{}", render_table(&resp));
            }
        }
        Command::Choose { query, term, sources } => {
            let cfg = sources.app_config()?;
            if cfg.pool.is_none() {
                bail!("choose needs a pool file (--pool or `pool` in the config)");
            }
            let service = Service::build(&cfg)?;
            let record = service.choose(&ChooseRequest { query, term })?;
            println!("{}", serde_json::to_string(&record)?);
        }
        Command::Eval { uer, systems, json } => {
            let votes = formats::load_votes(&uer)?;
            let truth = aggregate_uer(&votes).with_context(|| format!("aggregating {}", uer.display()))?;
            let systems = systems
                .iter()
                .map(|p| formats::load_system(p))
                .collect::<Result<Vec<_>>>()?;
            let report = compare_report(&truth, &systems)?;
            print!("{}", report.render_text());
            if let Some(out) = json {
                let doc = serde_json::json!({ "uer": truth, "report": report });
                formats::write_atomic(&out, serde_json::to_string_pretty(&doc)?.as_bytes())?;
            }
        }
        Command::Serve { sources, listen } => {
            let cfg = sources.app_config()?;
            let listen = listen.unwrap_or_else(|| cfg.listen.clone());
            let service = Arc::new(Service::build(&cfg)?);
            cqe::server::serve(service, &listen)?;
        }
        Command::Fixtures {
            command: FixturesCommand::Record { query, sources },
        } => {
            let mut cfg = sources.app_config()?;
            let engine = cfg.engine.get_or_insert_with(EngineConfig::default);
            engine.mode = EngineMode::LiveWithCache;
            let dir = engine.fixtures.clone();
            cfg.counts = Some(CountSource::Engine);
            let service = Service::build(&cfg)?;
            let resp = service.expand(&ExpandRequest::new(query))?;
            let requests = service.engine().map_or(0, |e| e.request_count());
            println!(
                "recorded {} candidates for {:?} into {} ({} engine requests)",
                resp.candidates.len(),
                resp.matched_query,
                dir.display(),
                requests
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
