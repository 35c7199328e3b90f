//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data, 3 I/O.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cpnet::node_importance;
use crate::error::{Error, Result};
use crate::eval::{rank, Projector, Ranking};
use crate::kb::{build_knowledge_base_traced, ingest_tabular, Dataset, IngestOptions, KbConfig, KnowledgeBase};
use crate::query::{parse_query, CompiledQuery};
use crate::ucp::{check_dominance, UtilityMode};
use crate::FORMAT_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fuzzy-prefs",
    version,
    about = "Preference-based retrieval over fuzzy knowledge bases"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Knowledge-base operations
    #[command(subcommand)]
    Kb(KbCommand),
    /// Query operations
    #[command(subcommand)]
    Query(QueryCommand),
    /// Rank the records of a table against a compiled query
    Eval(EvalArgs),
    /// Print a knowledge base or compiled query in readable form
    Inspect(InspectArgs),
}

#[derive(Debug, Subcommand)]
pub enum KbCommand {
    /// Segment every attribute of a table into fuzzy regions
    Build(KbBuildArgs),
}

#[derive(Debug, Subcommand)]
pub enum QueryCommand {
    /// Compile a preference query against a knowledge base
    Compile(QueryCompileArgs),
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Field delimiter
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,
    /// The first row is data, not attribute names
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct KbBuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Default number of fuzzy regions per attribute
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Default labels, comma separated, lowest region first
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    /// Per-attribute region count, as NAME=COUNT
    #[arg(long = "attr-clusters", value_parser = parse_attr_count)]
    pub attr_clusters: Vec<(String, usize)>,
    /// Per-attribute labels, as NAME=L1,L2,...
    #[arg(long = "attr-labels", value_parser = parse_attr_labels)]
    pub attr_labels: Vec<(String, Vec<String>)>,
    #[arg(long, default_value_t = 2.0)]
    pub fuzzifier: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[command(flatten)]
    pub table: TableArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Dominance,
    MembershipScale,
}

#[derive(Debug, Args)]
pub struct QueryCompileArgs {
    #[arg(long)]
    pub kb: PathBuf,
    /// Query source file
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of terms; overrides the query's own `terms`
    #[arg(long)]
    pub terms: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Dominance)]
    pub utility_mode: ModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub kb: PathBuf,
    /// Compiled query document
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    #[command(flatten)]
    pub table: TableArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub file: PathBuf,
}

fn parse_delimiter(s: &str) -> std::result::Result<u8, String> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character, got {s:?}")),
    }
}

fn split_pair(s: &str) -> std::result::Result<(&str, &str), String> {
    s.split_once('=')
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))
}

fn parse_attr_count(s: &str) -> std::result::Result<(String, usize), String> {
    let (name, count) = split_pair(s)?;
    let count = count.parse().map_err(|_| format!("invalid count {count:?}"))?;
    Ok((name.to_owned(), count))
}

fn parse_attr_labels(s: &str) -> std::result::Result<(String, Vec<String>), String> {
    let (name, labels) = split_pair(s)?;
    Ok((name.to_owned(), labels.split(',').map(str::to_owned).collect()))
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Kb(KbCommand::Build(args)) => cmd_kb_build(&args, err),
        Command::Query(QueryCommand::Compile(args)) => cmd_query_compile(&args),
        Command::Eval(args) => cmd_eval(&args, out, err),
        Command::Inspect(args) => cmd_inspect(&args, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Io(_) => EXIT_IO,
                _ => EXIT_DATA,
            }
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_table(path: &Path, table: &TableArgs, allow_missing: bool) -> Result<Dataset> {
    let text = read_text(path)?;
    ingest_tabular(
        text.as_bytes(),
        IngestOptions {
            has_header: !table.no_header,
            delimiter: table.delimiter,
            allow_missing,
        },
    )
    .map_err(|e| match e {
        // data coordinates are zero-based; a header shifts the file line by one
        Error::Parse { row, column, message } => Error::Parse {
            row,
            column,
            message: format!(
                "{message} ({}: line {})",
                path.display(),
                row + 1 + usize::from(!table.no_header)
            ),
        },
        other => other,
    })
}

pub fn cmd_kb_build(args: &KbBuildArgs, err: &mut dyn Write) -> Result<()> {
    let dataset = read_table(&args.input, &args.table, false)?;
    let config = KbConfig {
        default_clusters: args
            .clusters
            .or(args.labels.as_ref().map(Vec::len))
            .unwrap_or(KbConfig::default().default_clusters),
        default_labels: args.labels.clone(),
        clusters: args.attr_clusters.iter().cloned().collect::<BTreeMap<_, _>>(),
        labels: args.attr_labels.iter().cloned().collect::<BTreeMap<_, _>>(),
        fuzzifier: args.fuzzifier,
        seed: args.seed,
        tol: args.tol,
        max_iter: args.max_iter,
        source: Some(args.input.display().to_string()),
    };
    if let Some(labels) = &config.default_labels {
        if labels.len() != config.default_clusters {
            return Err(Error::Config(format!(
                "{} labels given for {} clusters",
                labels.len(),
                config.default_clusters
            )));
        }
    }
    let (kb, fits) = build_knowledge_base_traced(&dataset, &config)?;
    write_text(&args.out, &kb.to_json()?)?;
    for ((model, _), fit) in kb.entries().iter().zip(&fits) {
        let centroids: Vec<String> = model
            .labels
            .iter()
            .zip(&model.centroids)
            .map(|(l, c)| format!("{l}={c:.6}"))
            .collect();
        let _ = writeln!(
            err,
            "{}: {} [{} iterations{}]",
            model.attribute,
            centroids.join(" "),
            fit.iterations,
            if fit.converged { "" } else { ", not converged" }
        );
    }
    Ok(())
}

pub fn cmd_query_compile(args: &QueryCompileArgs) -> Result<()> {
    let kb = KnowledgeBase::from_json(&read_text(&args.kb)?)?;
    let source = read_text(&args.query)?;
    let spec = parse_query(&source).map_err(|e| match e {
        Error::Syntax { .. } | Error::Semantic { .. } => Error::Document(format!("{}:{e}", args.query.display())),
        other => other,
    })?;
    let mode = match args.utility_mode {
        ModeArg::Dominance => UtilityMode::Dominance,
        ModeArg::MembershipScale => UtilityMode::MembershipScale,
    };
    let compiled = CompiledQuery::compile(spec, &kb, args.terms, mode)?;
    write_text(&args.out, &compiled.to_json()?)
}

#[derive(Serialize)]
struct RankingDocument<'a> {
    format_version: u32,
    #[serde(flatten)]
    ranking: &'a Ranking,
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let kb = KnowledgeBase::from_json(&read_text(&args.kb)?)?;
    let compiled = CompiledQuery::from_json(&read_text(&args.query)?)?;
    let dataset = read_table(&args.data, &args.table, true)?;
    Projector::new(&kb, &compiled.query, dataset.attributes())?;
    let ranking = rank(&kb, &compiled.query, &dataset, args.top)?;
    for f in &ranking.failures {
        let _ = writeln!(err, "record {}: {}", f.record_index, f.error);
    }
    let text = match args.format {
        Format::Tsv => format_tsv(&ranking, compiled.query.terms.len()),
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&RankingDocument {
                format_version: FORMAT_VERSION,
                ranking: &ranking,
            })?;
            text.push('\n');
            text
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Columns: record_index, eval, s_1..s_T, flags. Scores at six decimals.
pub fn format_tsv(ranking: &Ranking, term_count: usize) -> String {
    let mut text = String::from("record_index\teval");
    for k in 1..=term_count {
        let _ = write!(text, "\ts_{k}");
    }
    text.push_str("\tflags\n");
    for r in &ranking.results {
        let _ = write!(text, "{}\t{:.6}", r.record_index, r.eval);
        for s in &r.term_scores {
            let _ = write!(text, "\t{s:.6}");
        }
        if r.missing.is_empty() {
            text.push_str("\t-\n");
        } else {
            let _ = writeln!(text, "\tmissing:{}", r.missing.join(","));
        }
    }
    text
}

pub fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let text = read_text(&args.file)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let report = if value.get("attributes").is_some() {
        describe_kb(&KnowledgeBase::from_json(&text)?)
    } else if value.get("terms").is_some() {
        describe_query(&CompiledQuery::from_json(&text)?)?
    } else {
        return Err(Error::Document("neither a knowledge base nor a compiled query".into()));
    };
    out.write_all(report.as_bytes())?;
    Ok(())
}

fn describe_kb(kb: &KnowledgeBase) -> String {
    let mut s = String::new();
    let p = kb.provenance();
    let _ = writeln!(
        s,
        "knowledge base: {} attributes (source {}, seed {}, m={})",
        kb.entries().len(),
        p.source.as_deref().unwrap_or("-"),
        p.seed,
        p.fuzzifier
    );
    for (model, matrix) in kb.entries() {
        let _ = writeln!(
            s,
            "\nattribute {} ({} regions, {} records)",
            model.attribute,
            model.centroids.len(),
            matrix.values.len()
        );
        for (j, (label, c)) in model.labels.iter().zip(&model.centroids).enumerate() {
            let mass: f64 = matrix.values.iter().map(|row| row[j]).sum();
            let _ = writeln!(s, "  {label:<12} centroid {c:>14.6}  membership mass {mass:.3}");
        }
    }
    s
}

fn describe_query(compiled: &CompiledQuery) -> Result<String> {
    let q = &compiled.query;
    let net = q.net();
    let mut s = String::new();
    let _ = writeln!(s, "variables:");
    for (var, binding) in net.nodes().iter().zip(&q.bindings) {
        let _ = writeln!(
            s,
            "  {} (attr {}): {}",
            var.name,
            binding.attribute,
            var.domain.join(", ")
        );
    }
    let _ = writeln!(s, "edges:");
    for (p, c) in net.edges() {
        let _ = writeln!(s, "  {} -> {}", net.nodes()[p].name, net.nodes()[c].name);
    }
    let _ = writeln!(s, "importance:");
    for (name, g) in node_importance(net)?.iter() {
        let _ = writeln!(s, "  {name}: G={g}");
    }
    let _ = writeln!(
        s,
        "utilities (mode {}, max total {}):",
        q.ucp.mode(),
        q.ucp.max_total_utility()
    );
    for (i, (table, spans)) in q.ucp.utilities().iter().zip(q.ucp.spans()).enumerate() {
        let var = &net.nodes()[i];
        let _ = writeln!(
            s,
            "  {}: step {}, minspan {}, maxspan {}",
            var.name, table.step, spans.minspan, spans.maxspan
        );
        for row in net.table(i) {
            let utilities = &table.rows[net.context_index(i, &row.context)];
            let cells: Vec<String> = row
                .order
                .iter()
                .map(|&v| format!("{}={}", var.domain[v], utilities[v]))
                .collect();
            let _ = writeln!(
                s,
                "    [{}] {}",
                net.describe_context(i, &row.context),
                cells.join(" > ")
            );
        }
    }
    let _ = writeln!(s, "dominance: {}", check_dominance(&q.ucp));
    let _ = writeln!(s, "terms:");
    for (k, t) in q.terms.iter().enumerate() {
        let values: Vec<String> = t
            .assignment
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{}={}", net.nodes()[i].name, q.label(i, v)))
            .collect();
        let _ = writeln!(s, "  {}. U={:.6}  {}", k + 1, t.importance, values.join(", "));
    }
    Ok(s)
}
