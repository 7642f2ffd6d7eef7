//! `ifm`: validate, analyze, trace and serve information flow models.

mod exit;

use std::io::{IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ifm_client::IfmClient;
use ifm_core::analysis::{
    trace_paths, Mode, Origin, PathStatus, PathTrace, Verdict, DEFAULT_MAX_PATHS,
};
use ifm_core::dsl::{parse_model, Diagnostic, SourceModel};
use ifm_core::model::{expand_configurations, FeatureTag, SiteId};
use ifm_core::reporting::{
    build_report, build_whatif, export_json, import_json, model_document, render_csv, render_dot,
    render_markdown, to_json, ReportDocument, WhatIfDocument, WhatIfRequest,
};
use serde_json::json;

use exit::{classify, Usage};

#[derive(Parser)]
#[command(name = "ifm", version, about = "Information flow model analysis")]
struct Cli {
    /// Query a running `ifm serve` instead of reading a model file.
    #[arg(long, global = true, value_name = "URL")]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextOrJson {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(alias = "optimistic")]
    Opt,
    #[value(alias = "pessimistic")]
    Pess,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a model; prints diagnostics.
    Validate {
        path: PathBuf,
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
    /// Assess every outcome in every configuration.
    Analyze {
        path: Option<PathBuf>,
        #[arg(long)]
        outcomes: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        /// `all` or one configuration name such as `R0=absent`.
        #[arg(long, default_value = "all")]
        config: String,
        /// Outcome whose open paths are marked in DOT output.
        #[arg(long)]
        highlight: Option<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
        max_paths: usize,
    },
    /// List the paths a tag takes from an origin to a site.
    Trace {
        path: PathBuf,
        /// Seeded site or introducing channel; `site:` or `channel:` prefixes disambiguate.
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        tag: String,
        #[arg(long, value_enum, default_value = "opt")]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
        max: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: TextOrJson,
    },
    /// Apply hypothetical edits and report which verdicts change.
    Whatif {
        path: Option<PathBuf>,
        #[arg(long = "edit", value_name = "SPEC")]
        edits: Vec<String>,
        #[arg(long)]
        outcomes: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: TextOrJson,
        #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
        max_paths: usize,
    },
    /// Print the topology document served at /api/v1/model.
    Model {
        path: Option<PathBuf>,
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
    /// Serve the JSON API for one model.
    Serve {
        path: PathBuf,
        #[arg(long)]
        outcomes: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
        max_paths: usize,
    },
}

fn color() -> bool {
    std::env::var_os("IFM_NO_COLOR").is_none() && std::io::stderr().is_terminal()
}

fn print_diagnostics(diags: &[Diagnostic]) {
    let colored = color();
    for d in diags {
        if colored {
            eprintln!("{}", d.render_colored());
        } else {
            eprintln!("{d}");
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path, outcomes: Option<&Path>) -> Result<SourceModel> {
    let text = read(path)?;
    let mut m = parse_model(&text, &path.to_string_lossy())?;
    if let Some(o) = outcomes {
        m.attach_outcomes(&read(o)?, &o.to_string_lossy())?;
    }
    Ok(m)
}

fn emit(bytes: &[u8], output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => {
            std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn require(path: Option<PathBuf>) -> Result<PathBuf> {
    path.ok_or_else(|| Usage("a model path is required without --server".into()).into())
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

fn findings(doc: &ReportDocument) -> u8 {
    if doc.assessments.has_invalid_configuration() {
        3
    } else if doc.assessments.worst().is_some_and(|v| v > Verdict::Closed) {
        1
    } else {
        0
    }
}

fn validate(path: &Path, outcomes: Option<&Path>) -> Result<u8> {
    let m = load(path, outcomes)?;
    let mut diags = m.validation_diagnostics();
    if diags.is_empty() {
        let file = path.to_string_lossy();
        for cfg in expand_configurations(&m.network) {
            for v in &cfg.report.violations {
                diags.push(Diagnostic::error(
                    &file,
                    ifm_core::dsl::Span { line: 1, col: 1 },
                    v.code(),
                    format!("configuration {}: {v}", cfg.name()),
                ));
            }
        }
    }
    print_diagnostics(&diags);
    if diags.is_empty() {
        println!(
            "{}: ok ({} sites, {} channels, {} configurations)",
            path.display(),
            m.network.sites.len(),
            m.network.channels.len(),
            expand_configurations(&m.network).len()
        );
        Ok(0)
    } else {
        Ok(3)
    }
}

struct AnalyzeArgs {
    format: Format,
    config: String,
    highlight: Option<String>,
    output: Option<PathBuf>,
    max_paths: usize,
}

fn analyze(
    server: Option<&str>,
    path: Option<PathBuf>,
    outcomes: Option<PathBuf>,
    a: AnalyzeArgs,
) -> Result<u8> {
    let config = (a.config != "all").then_some(a.config.as_str());
    let (doc, json) = match server {
        Some(url) => {
            let bytes = runtime()?.block_on(IfmClient::new(url).assessments(config))?;
            (import_json(&bytes)?, bytes)
        }
        None => {
            let m = load(&require(path)?, outcomes.as_deref())?;
            let doc = build_report(&m, config, a.max_paths)?;
            let bytes = export_json(&doc);
            (doc, bytes)
        }
    };
    if a.highlight.is_some() && !matches!(a.format, Format::Dot) {
        bail!(Usage("--highlight applies to --format dot".into()));
    }
    let bytes = match a.format {
        Format::Json => json,
        Format::Md => render_markdown(&doc).into_bytes(),
        Format::Csv => render_csv(&doc).into_bytes(),
        Format::Dot => render_dot(&doc, a.highlight.as_deref())?.into_bytes(),
    };
    emit(&bytes, a.output.as_deref())?;
    Ok(findings(&doc))
}

fn hop_line(p: &ifm_core::analysis::ImpactPath) -> String {
    let mut s = p.channel_ids().join(" -> ");
    let tag = if p.chain.is_empty() {
        p.tag.to_string()
    } else {
        let chain: Vec<&str> = p.chain.iter().map(|t| t.as_str()).collect();
        format!("{} (from {})", p.tag, chain.join(" -> "))
    };
    s.push_str(&format!("  [{tag}]"));
    if !p.blockers.is_empty() {
        let b: Vec<String> = p.blockers.iter().map(ToString::to_string).collect();
        s.push_str(&format!("  conditional on {}", b.join(", ")));
    }
    s
}

struct TraceArgs {
    from: String,
    to: String,
    tag: String,
    mode: ModeArg,
    max: usize,
    format: TextOrJson,
}

fn trace(path: &Path, a: TraceArgs) -> Result<u8> {
    let m = load(path, None)?;
    let origin = Origin::resolve(&m.network, &a.from)?;
    let target = SiteId::from(a.to.as_str());
    if !m.network.sites.contains_key(&target) {
        bail!(Usage(format!("unknown site `{}`", a.to)));
    }
    let tag = FeatureTag::from(a.tag.as_str());
    if !m.network.tag_universe().contains(&tag) {
        bail!(Usage(format!("unknown feature tag `{}`", a.tag)));
    }
    let mode = match a.mode {
        ModeArg::Opt => Mode::Optimistic,
        ModeArg::Pess => Mode::Pessimistic,
    };
    let mut rows = Vec::new();
    for cfg in expand_configurations(&m.network) {
        let present = match &origin {
            Origin::Site(s) => cfg.network.sites.contains_key(s),
            Origin::Channel(c) => cfg.network.channels.contains_key(c),
        } && cfg.network.sites.contains_key(&target);
        let result = if !cfg.is_valid() || !present {
            PathTrace::default()
        } else {
            trace_paths(&cfg.network, &origin, &target, &tag, mode, a.max)?
        };
        rows.push((cfg.name(), cfg.is_valid(), result));
    }
    match a.format {
        TextOrJson::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(name, valid, t)| json!({"configuration": name, "valid": valid, "trace": t}))
                .collect();
            emit(&to_json(&v), None)?;
        }
        TextOrJson::Text => {
            let mut out = String::new();
            for (name, valid, t) in &rows {
                out.push_str(&format!("{name}:"));
                if !valid {
                    out.push_str(" invalid configuration\n");
                    continue;
                }
                if t.paths.is_empty() {
                    out.push_str(" no paths\n");
                    continue;
                }
                out.push('\n');
                for p in &t.paths {
                    out.push_str(&format!("  {}\n", hop_line(p)));
                }
                if t.truncated {
                    out.push_str(&format!("  (truncated at {})\n", a.max));
                }
            }
            emit(out.as_bytes(), None)?;
        }
    }
    Ok(0)
}

fn status(s: PathStatus) -> &'static str {
    match s {
        PathStatus::Open => "OPEN",
        PathStatus::Conditional => "CONDITIONAL",
        PathStatus::Absent => "ABSENT",
    }
}

fn render_whatif(doc: &WhatIfDocument) -> String {
    let mut out = String::new();
    let edits: Vec<String> = doc.edits.iter().map(ToString::to_string).collect();
    out.push_str(&format!(
        "edits: {}\n",
        if edits.is_empty() {
            "none".into()
        } else {
            edits.join(", ")
        }
    ));
    if doc.delta.is_empty() {
        out.push_str("no changes\n");
        return out;
    }
    let v = |x: Option<Verdict>| x.map_or("invalid".to_string(), |v| v.to_string());
    for c in &doc.delta.changes {
        out.push_str(&format!(
            "{}  {}  {} -> {}\n",
            c.configuration,
            c.outcome,
            v(c.before),
            v(c.after)
        ));
        for p in &c.paths {
            let ids: Vec<&str> = p.hops.iter().map(|h| h.channel.as_str()).collect();
            out.push_str(&format!(
                "    {} [{}]  {} -> {}\n",
                ids.join(" -> "),
                p.tag,
                status(p.before),
                status(p.after)
            ));
        }
    }
    out
}

struct WhatIfArgs {
    edits: Vec<String>,
    format: TextOrJson,
    max_paths: usize,
}

fn whatif(
    server: Option<&str>,
    path: Option<PathBuf>,
    outcomes: Option<PathBuf>,
    a: WhatIfArgs,
) -> Result<u8> {
    let (doc, bytes) = match server {
        Some(url) => {
            let bytes = runtime()?.block_on(IfmClient::new(url).whatif(&a.edits))?;
            let doc: WhatIfDocument = serde_json::from_slice(&bytes)?;
            (doc, bytes)
        }
        None => {
            let m = load(&require(path)?, outcomes.as_deref())?;
            let req = WhatIfRequest { edits: a.edits };
            let edits = req.parse().map_err(exit::InvalidEdits)?;
            let doc = build_whatif(&m, &edits, a.max_paths)?;
            let bytes = to_json(&doc);
            (doc, bytes)
        }
    };
    match a.format {
        TextOrJson::Json => emit(&bytes, None)?,
        TextOrJson::Text => emit(render_whatif(&doc).as_bytes(), None)?,
    }
    let worse = doc
        .delta
        .changes
        .iter()
        .any(|c| c.after.is_some() && c.after > c.before);
    Ok(u8::from(worse))
}

fn model(server: Option<&str>, path: Option<PathBuf>, outcomes: Option<PathBuf>) -> Result<u8> {
    let bytes = match server {
        Some(url) => runtime()?.block_on(IfmClient::new(url).model())?,
        None => to_json(&model_document(&load(
            &require(path)?,
            outcomes.as_deref(),
        )?)),
    };
    emit(&bytes, None)?;
    Ok(0)
}

fn serve(
    path: &Path,
    outcomes: Option<&Path>,
    bind: &str,
    port: u16,
    max_paths: usize,
) -> Result<u8> {
    let m = load(path, outcomes)?;
    let addr: SocketAddr = format!("{bind}:{port}")
        .parse()
        .map_err(|_| Usage(format!("invalid bind address `{bind}:{port}`")))?;
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))?;
        eprintln!(
            "serving {} on http://{}",
            path.display(),
            listener.local_addr()?
        );
        ifm_server::serve(listener, ifm_server::AppState::new(m, max_paths)).await?;
        Ok(0)
    })
}

fn run(cli: Cli) -> Result<u8> {
    let server = cli.server.as_deref();
    match cli.command {
        Command::Validate { path, outcomes } => validate(&path, outcomes.as_deref()),
        Command::Analyze {
            path,
            outcomes,
            format,
            config,
            highlight,
            output,
            max_paths,
        } => analyze(
            server,
            path,
            outcomes,
            AnalyzeArgs {
                format,
                config,
                highlight,
                output,
                max_paths,
            },
        ),
        Command::Trace {
            path,
            from,
            to,
            tag,
            mode,
            max,
            format,
        } => trace(
            &path,
            TraceArgs {
                from,
                to,
                tag,
                mode,
                max,
                format,
            },
        ),
        Command::Whatif {
            path,
            edits,
            outcomes,
            format,
            max_paths,
        } => whatif(
            server,
            path,
            outcomes,
            WhatIfArgs {
                edits,
                format,
                max_paths,
            },
        ),
        Command::Model { path, outcomes } => model(server, path, outcomes),
        Command::Serve {
            path,
            outcomes,
            port,
            bind,
            max_paths,
        } => serve(&path, outcomes.as_deref(), &bind, port, max_paths),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let (code, diags) = classify(&e);
            if diags.is_empty() {
                eprintln!("error: {e:#}");
                if let Some(c) = e.downcast_ref::<ifm_client::ClientError>() {
                    for line in c.diagnostics() {
                        eprintln!("  {line}");
                    }
                }
            } else {
                print_diagnostics(&diags);
            }
            ExitCode::from(code)
        }
    }
}
