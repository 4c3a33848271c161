//! Command-line front end.
//!
//! Settings come from flags and, optionally, a `key=value` config file given
//! with `--config`. Keys are the long flag names without dashes prefix
//! (`docs`, `topics`, `qrels`, `key-mode`, ...); flags win over the file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::pipeline::{self, Outcome, PipelineConfig, PipelineError};

#[derive(Debug, Parser)]
#[command(
    name = "bradfordize",
    version,
    about = "Bradfordizing re-ranking and zone evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge per-database document files into one deduplicated corpus.
    Merge(Flags),
    /// Re-rank each topic's result set by source productivity and extract the core.
    Bradfordize(Flags),
    /// Write the Bradford zone partition of each topic.
    Zones(Flags),
    /// Scattering profiles, log-log plot data and zone means.
    Analyze(Flags),
    /// Per-zone precision, improvements and significance tests.
    Eval(Flags),
    /// Significance tests only, from the pipeline or from a pairs file.
    Stats(Flags),
}

#[derive(Debug, Args, Default, Clone)]
pub struct Flags {
    /// key=value settings file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Document file of one database, as DB=PATH (repeatable).
    #[arg(long = "docs", value_name = "DB=PATH")]
    pub docs: Vec<String>,
    #[arg(long)]
    pub topics: Option<PathBuf>,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// TREC run file giving each topic's result list (defaults to the judged pool).
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// journal | publisher | auto
    #[arg(long = "key-mode")]
    pub key_mode: Option<String>,
    /// strict | snap
    #[arg(long = "zone-mode")]
    pub zone_mode: Option<String>,
    #[arg(long)]
    pub zones: Option<String>,
    /// nonrelevant | exclude
    #[arg(long)]
    pub unjudged: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<String>,
    /// Restrict to one topic number.
    #[arg(long)]
    pub topic: Option<String>,
    /// CSV of `a,b` precision pairs for `stats`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
}

fn config_error(message: impl Into<String>) -> PipelineError {
    PipelineError::Config(message.into())
}

fn parse_docs_spec(spec: &str, base: Option<&Path>) -> Result<(String, PathBuf), PipelineError> {
    let (db, path) = spec
        .split_once('=')
        .filter(|(db, path)| !db.trim().is_empty() && !path.trim().is_empty())
        .ok_or_else(|| config_error(format!("--docs expects DB=PATH, got {spec:?}")))?;
    let path = PathBuf::from(path.trim());
    let path = match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    };
    Ok((db.trim().to_string(), path))
}

/// Reads a `key=value` file into flags. Relative paths resolve against the file's directory.
pub fn read_config_file(path: &Path) -> Result<Flags, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let dir = path.parent().map(Path::to_path_buf);
    let resolve = |v: &str| {
        let p = PathBuf::from(v);
        match &dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p,
        }
    };
    let mut flags = Flags::default();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            config_error(format!(
                "{}:{}: expected key=value",
                path.display(),
                idx + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let value_string = Some(value.to_string());
        match key {
            "docs" => {
                let (db, p) = parse_docs_spec(value, dir.as_deref())?;
                flags.docs.push(format!("{db}={}", p.display()));
            }
            "topics" => flags.topics = Some(resolve(value)),
            "qrels" => flags.qrels = Some(resolve(value)),
            "run" => flags.run = Some(resolve(value)),
            "pairs" => flags.pairs = Some(resolve(value)),
            "out" => flags.out = Some(resolve(value)),
            "key-mode" => flags.key_mode = value_string,
            "zone-mode" => flags.zone_mode = value_string,
            "zones" => flags.zones = value_string,
            "unjudged" => flags.unjudged = value_string,
            "alpha" => flags.alpha = value_string,
            "workers" => flags.workers = value_string,
            "topic" => flags.topic = value_string,
            other => {
                return Err(config_error(format!(
                    "{}:{}: unknown key {other:?}",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok(flags)
}

fn parse_value<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<T, PipelineError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| config_error(format!("--{flag} {raw:?}: {e}")))
}

impl Flags {
    /// Flags set here take precedence over `file`.
    fn over(self, file: Flags) -> Flags {
        Flags {
            config: None,
            docs: if self.docs.is_empty() {
                file.docs
            } else {
                self.docs
            },
            topics: self.topics.or(file.topics),
            qrels: self.qrels.or(file.qrels),
            run: self.run.or(file.run),
            key_mode: self.key_mode.or(file.key_mode),
            zone_mode: self.zone_mode.or(file.zone_mode),
            zones: self.zones.or(file.zones),
            unjudged: self.unjudged.or(file.unjudged),
            alpha: self.alpha.or(file.alpha),
            out: self.out.or(file.out),
            workers: self.workers.or(file.workers),
            topic: self.topic.or(file.topic),
            pairs: self.pairs.or(file.pairs),
        }
    }

    pub fn into_config(self) -> Result<PipelineConfig, PipelineError> {
        let flags = match &self.config {
            Some(path) => {
                let file = read_config_file(path)?;
                self.over(file)
            }
            None => self,
        };
        let defaults = PipelineConfig::default();
        Ok(PipelineConfig {
            document_files: flags
                .docs
                .iter()
                .map(|s| parse_docs_spec(s, None))
                .collect::<Result<_, _>>()?,
            topic_file: flags.topics,
            qrels_file: flags.qrels,
            run_file: flags.run,
            key_mode: match &flags.key_mode {
                Some(v) => parse_value("key-mode", v)?,
                None => defaults.key_mode,
            },
            zone_mode: match &flags.zone_mode {
                Some(v) => parse_value("zone-mode", v)?,
                None => defaults.zone_mode,
            },
            num_zones: match &flags.zones {
                Some(v) => parse_value("zones", v)?,
                None => defaults.num_zones,
            },
            unjudged_policy: match &flags.unjudged {
                Some(v) => parse_value("unjudged", v)?,
                None => defaults.unjudged_policy,
            },
            alpha: match &flags.alpha {
                Some(v) => parse_value("alpha", v)?,
                None => defaults.alpha,
            },
            output_dir: flags.out.unwrap_or(defaults.output_dir),
            workers: match &flags.workers {
                Some(v) => parse_value("workers", v)?,
                None => defaults.workers,
            },
            topic: flags
                .topic
                .as_deref()
                .map(|v| parse_value("topic", v))
                .transpose()?,
            pairs_file: flags.pairs,
        })
    }
}

pub fn execute(command: Command) -> Result<Outcome, PipelineError> {
    match command {
        Command::Merge(f) => pipeline::cmd_merge(&f.into_config()?),
        Command::Bradfordize(f) => pipeline::cmd_bradfordize(&f.into_config()?),
        Command::Zones(f) => pipeline::cmd_zones(&f.into_config()?),
        Command::Analyze(f) => pipeline::cmd_analyze(&f.into_config()?),
        Command::Eval(f) => pipeline::cmd_eval(&f.into_config()?),
        Command::Stats(f) => pipeline::cmd_stats(&f.into_config()?),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
