use std::fs;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use heapscope_core::algebra::{CompareError, TypeGroups};
use heapscope_core::diagnostics::{diagnose, ByteEstimator};
use heapscope_core::export::{export_dgml, export_graphml, export_reduced_dgml, Decorations, StyleConfig};
use heapscope_core::fixtures::{build_fixture, Fixture};
use heapscope_core::reduction::reduce;
use heapscope_core::{
    check_embedding, compare, merge, parse_snapshot, AbstractGraph, AbstractionOptions, ConcreteHeap, EmbeddingMap, MergeMode,
    ObjId,
};
use serde_json::json;
use thiserror::Error;

use crate::store::SessionStore;
use crate::{abstract_canonical, content_hash, report_json, server};

pub const EXIT_OK: u8 = 0;
/// `compare`: incomparable; `check`: not a concretization.
pub const EXIT_NO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "heapscope", version, about = "Summarize heap snapshots into abstract heap graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Dgml,
    Graphml,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Abstract a heapsnap-1 snapshot into an ahg-1 graph.
    Abstract {
        snapshot: PathBuf,
        /// Graph output (default: standard output).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        dgml: Option<PathBuf>,
        /// Format of the --dgml file.
        #[arg(long, value_enum, default_value = "dgml")]
        format: ExportFormat,
        /// Write the object-to-node map here.
        #[arg(long)]
        mu: Option<PathBuf>,
        /// Object ids kept as singleton nodes.
        #[arg(long, value_delimiter = ',')]
        interesting: Vec<u64>,
        /// Color the DGML by heat and diagnostic findings.
        #[arg(long)]
        heat: bool,
    },
    /// Collapse a graph to its dominator overview.
    Reduce {
        graph: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Emit DGML instead of JSON; to the given file if one is named.
        #[arg(long, num_args = 0..=1)]
        dgml: Option<Option<PathBuf>>,
    },
    /// Exit 0 if the first graph is below the second, 1 with a diff otherwise.
    Compare { left: PathBuf, right: PathBuf },
    /// Upper approximation of two graphs.
    Merge {
        left: PathBuf,
        right: PathBuf,
        /// Widen growing cardinalities, taking the left graph as the earlier one.
        #[arg(long)]
        widen: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Snapshot whose type table also allows merging same-structure nodes.
        #[arg(long)]
        types: Option<PathBuf>,
    },
    /// Memory diagnostics report.
    Diagnose {
        snapshot: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        dgml: Option<PathBuf>,
    },
    /// Exit 0 if the snapshot is a concretization of the graph under the map.
    Check { snapshot: PathBuf, graph: PathBuf, mu: PathBuf },
    /// Serve snapshots over HTTP.
    Serve {
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Write a built-in heap, e.g. `exprtree`, `list:100`, `facegrid:180,4`.
    Fixture {
        spec: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input { .. } | CliError::Io(_) => EXIT_INPUT,
        }
    }
}

fn input_err(path: &Path, e: impl ToString) -> CliError {
    CliError::Input { path: path.to_path_buf(), msg: e.to_string() }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| input_err(path, e))
}

fn load_heap(path: &Path) -> Result<ConcreteHeap, CliError> {
    parse_snapshot(&read(path)?).map_err(|e| input_err(path, e))
}

fn load_graph(path: &Path) -> Result<AbstractGraph, CliError> {
    AbstractGraph::from_ahg_json(&read(path)?).map_err(|e| input_err(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| input_err(path, e))
}

/// To `path`, or to `out` when there is none.
fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    match cli.command {
        Command::Abstract { snapshot, output, dgml, format, mu, interesting, heat } => {
            let h = load_heap(&snapshot)?;
            let opts = AbstractionOptions {
                interesting_objects: interesting.into_iter().map(ObjId).collect(),
                ..Default::default()
            };
            let (g, m) = abstract_canonical(&h, &opts).map_err(|e| CliError::Usage(e.to_string()))?;
            if let Some(path) = dgml {
                let text = match format {
                    ExportFormat::Graphml => export_graphml(&g),
                    ExportFormat::Dgml => {
                        let diag = heat.then(|| diagnose(&h, &g, &m, &ByteEstimator::default()));
                        let deco = Decorations::from_heap(&h, &g, &m, diag.as_ref());
                        let st = StyleConfig { heat, diagnostics: heat, ..Default::default() };
                        export_dgml(&g, &deco, &st)
                    }
                };
                write_file(&path, &text)?;
            }
            if let Some(path) = mu {
                write_file(&path, &m.to_json())?;
            }
            emit(output.as_deref(), &g.to_ahg_json(), out)?;
            Ok(EXIT_OK)
        }
        Command::Reduce { graph, output, dgml } => {
            let g = load_graph(&graph)?;
            let r = reduce(&g);
            match dgml {
                Some(path) => {
                    let text = export_reduced_dgml(&r, &Decorations::default(), &StyleConfig::default());
                    emit(path.as_deref(), &text, out)?;
                    if let Some(p) = output {
                        write_file(&p, &pretty(&r.to_json()))?;
                    }
                }
                None => emit(output.as_deref(), &pretty(&r.to_json()), out)?,
            }
            Ok(EXIT_OK)
        }
        Command::Compare { left, right } => {
            let (g1, g2) = (load_graph(&left)?, load_graph(&right)?);
            let res = compare(&g1, &g2).map_err(|e| match e {
                CompareError::AmbiguousMatch { graph, .. } => input_err(if graph == 1 { &left } else { &right }, e),
            })?;
            out.write_all(pretty(&res.to_json()).as_bytes())?;
            Ok(if res.is_leq() { EXIT_OK } else { EXIT_NO })
        }
        Command::Merge { left, right, widen, output, types } => {
            let (g1, g2) = (load_graph(&left)?, load_graph(&right)?);
            let groups = match types {
                Some(p) => Some(TypeGroups::from_types(load_heap(&p)?.types())),
                None => None,
            };
            let mode = if widen { MergeMode::Widen } else { MergeMode::Join };
            let m = merge(&g1, &g2, mode, groups.as_ref());
            emit(output.as_deref(), &m.graph.to_ahg_json(), out)?;
            Ok(EXIT_OK)
        }
        Command::Diagnose { snapshot, report, dgml } => {
            let bytes = read(&snapshot)?;
            let h = parse_snapshot(&bytes).map_err(|e| input_err(&snapshot, e))?;
            let (g, m) = abstract_canonical(&h, &AbstractionOptions::default()).map_err(|e| input_err(&snapshot, e))?;
            let d = diagnose(&h, &g, &m, &ByteEstimator::default());
            if let Some(path) = dgml {
                let deco = Decorations::from_heap(&h, &g, &m, Some(&d));
                let st = StyleConfig { heat: true, diagnostics: true, ..Default::default() };
                write_file(&path, &export_dgml(&g, &deco, &st))?;
            }
            emit(report.as_deref(), &pretty(&report_json(&content_hash(&bytes), &d)), out)?;
            Ok(EXIT_OK)
        }
        Command::Check { snapshot, graph, mu } => {
            let h = load_heap(&snapshot)?;
            let g = load_graph(&graph)?;
            let m = EmbeddingMap::from_json(&read(&mu)?).map_err(|e| input_err(&mu, e))?;
            let report = check_embedding(&h, &g, &m).map_err(|e| input_err(&mu, e))?;
            let violations: Vec<_> = report
                .violations
                .iter()
                .map(|v| json!({ "predicate": v.predicate(), "message": v.to_string() }))
                .collect();
            out.write_all(pretty(&json!({ "member": report.passed(), "violations": violations })).as_bytes())?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_NO })
        }
        Command::Serve { snapshots, port, host } => {
            let store = Arc::new(SessionStore::new());
            for p in &snapshots {
                let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
                store.register(&name, &read(p)?).map_err(|e| input_err(p, e))?;
            }
            server::serve(SocketAddr::new(host, port), store)?;
            Ok(EXIT_OK)
        }
        Command::Fixture { spec, output } => {
            let fx: Fixture = spec.parse().map_err(|e: heapscope_core::fixtures::FixtureError| CliError::Usage(e.to_string()))?;
            let h = build_fixture(&fx).map_err(|e| CliError::Usage(e.to_string()))?;
            emit(output.as_deref(), &h.to_snapshot_json(), out)?;
            Ok(EXIT_OK)
        }
    }
}
