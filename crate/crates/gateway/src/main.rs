use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use geoagent_core::eval::CreditMode;
use geoagent_core::llm::BackendConfig;
use geoagent_core::model::{mime_for_extension, Session};
use geoagent_core::planner::StreamEvent;
use geoagent_core::react::{ActionInput, InputValue};
use geoagent_gateway::cli::{format_event, run_eval, run_native_tool, write_single_output, FileArg};
use geoagent_gateway::config::load_registry;
use geoagent_gateway::{Engine, GatewayConfig};
use tokio::io::{AsyncBufReadExt, BufReader};

#[derive(Parser)]
#[command(name = "geoagent", version, about = "Remote sensing question answering with tool-using language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        engine: EngineArgs,
        /// Address to listen on, overriding the config file.
        #[arg(long)]
        listen: Option<SocketAddr>,
    },
    /// Talk to the agent in the terminal. `/upload <path>` adds an image, `/quit` leaves.
    Chat {
        #[command(flatten)]
        engine: EngineArgs,
        /// Images to upload before the first message.
        #[arg(long = "image")]
        images: Vec<PathBuf>,
    },
    /// Score a labelled query set.
    Eval {
        #[command(flatten)]
        engine: EngineArgs,
        /// JSONL file of {id, query, essential_task, image?}.
        #[arg(long)]
        dataset: PathBuf,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Whether a tool counts when merely requested or only when it ran.
        #[arg(long, default_value = "executed")]
        credit: CreditMode,
    },
    /// Run a native tool on local files.
    Tool {
        /// Directory with tool specs.
        #[arg(long, default_value = "config/tools", global = true)]
        tools: PathBuf,
        #[command(subcommand)]
        tool: ToolCommand,
    },
}

#[derive(Args)]
struct EngineArgs {
    /// Gateway config file (YAML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// `openai:<model>` or `mock:<script.yaml>`.
    #[arg(long)]
    backend: Option<String>,
    /// Fixture manifest; starts an in-process tool server for remote tools.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Endpoint for remote tools.
    #[arg(long)]
    tool_endpoint: Option<String>,
    /// Directory with tool specs.
    #[arg(long)]
    tools: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
}

impl EngineArgs {
    fn config(&self) -> anyhow::Result<GatewayConfig> {
        let mut cfg = match &self.config {
            Some(p) => GatewayConfig::load(p)?,
            None => GatewayConfig::default(),
        };
        if let Some(b) = &self.backend {
            cfg.backend = BackendConfig::parse(b)?;
        }
        if let Some(f) = &self.fixtures {
            cfg.fixtures = Some(f.clone());
        }
        if let Some(e) = &self.tool_endpoint {
            cfg.tool_endpoint = Some(e.clone());
        }
        if let Some(t) = &self.tools {
            cfg.tools_dir = t.clone();
        }
        if let Some(n) = self.max_steps {
            cfg.limits.max_steps = n;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum ToolCommand {
    /// Canny edge detection.
    Canny {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        low: Option<f64>,
        #[arg(long)]
        high: Option<f64>,
    },
    /// Outline one class of a label mask as simplified polygons.
    Polygonize {
        /// Label mask (PNG).
        #[arg(long = "in")]
        input: PathBuf,
        /// Palette JSON; defaults to `<mask>.palette.json`.
        #[arg(long)]
        palette: Option<PathBuf>,
        #[arg(long)]
        category: String,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count detections, optionally by category and inside a region.
    Count {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        category: Option<String>,
        #[arg(long)]
        region_mask: Option<PathBuf>,
        #[arg(long)]
        palette: Option<PathBuf>,
        #[arg(long)]
        region_class: Option<String>,
        #[arg(long)]
        region_polygons: Option<PathBuf>,
        /// Inline polygon `x,y; x,y; ...`.
        #[arg(long)]
        region: Option<String>,
        /// Write the result JSON here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn number(input: &mut ActionInput, key: &str, v: Option<f64>) {
    if let Some(v) = v {
        input.insert(key.into(), InputValue::from(v));
    }
}

fn text(input: &mut ActionInput, key: &str, v: Option<String>) {
    if let Some(v) = v {
        input.insert(key.into(), InputValue::Str(v));
    }
}

async fn tool(tools: &Path, cmd: ToolCommand) -> anyhow::Result<()> {
    let registry = load_registry(tools)?;
    let mut params = ActionInput::new();
    let (name, files, out, single) = match cmd {
        ToolCommand::Canny {
            input,
            out,
            sigma,
            low,
            high,
        } => {
            number(&mut params, "sigma", sigma);
            number(&mut params, "low_threshold", low);
            number(&mut params, "high_threshold", high);
            ("edge_detection", vec![FileArg::new("image", input)], Some(out), true)
        }
        ToolCommand::Polygonize {
            input,
            palette,
            category,
            epsilon,
            out,
        } => {
            text(&mut params, "category", Some(category));
            number(&mut params, "epsilon", epsilon);
            (
                "polygonization",
                vec![FileArg::new("mask", input).with_palette(palette)],
                Some(out),
                true,
            )
        }
        ToolCommand::Count {
            detections,
            category,
            region_mask,
            palette,
            region_class,
            region_polygons,
            region,
            out,
        } => {
            text(&mut params, "category", category);
            text(&mut params, "region_class", region_class);
            text(&mut params, "region", region);
            let mut files = vec![FileArg::new("detections", detections)];
            if let Some(m) = region_mask {
                files.push(FileArg::new("region_mask", m).with_palette(palette));
            }
            if let Some(p) = region_polygons {
                files.push(FileArg::new("region_polygons", p));
            }
            ("object_counting", files, out, false)
        }
    };
    let result = run_native_tool(&registry, name, &files, params).await?;
    let summary = serde_json::to_string_pretty(&result.outputs)?;
    match (out, single) {
        (Some(path), true) => write_single_output(&result, &path)?,
        (Some(path), false) => std::fs::write(&path, &summary).with_context(|| path.display().to_string())?,
        (None, _) => {}
    }
    println!("{summary}");
    Ok(())
}

async fn eval(engine: EngineArgs, dataset: PathBuf, out: Option<PathBuf>, credit: CreditMode) -> anyhow::Result<()> {
    let cfg = engine.config()?;
    let engine = Engine::start(&cfg).await?;
    let output = run_eval(&engine.planner, &dataset, credit).await?;
    print!("{}", output.report.to_table());
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&output)?;
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

async fn upload(engine: &Engine, session: &mut Session, path: &Path) -> anyhow::Result<()> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mime = path
        .extension()
        .and_then(|e| e.to_str())
        .and_then(|e| mime_for_extension(&e.to_ascii_lowercase()))
        .context("expected a .png or .jpg image")?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("image");
    let (file, caption) = engine.planner.ingest_image(session, name, mime, bytes).await?;
    println!("uploaded {} ({caption})", file.name);
    Ok(())
}

async fn chat(args: EngineArgs, images: Vec<PathBuf>) -> anyhow::Result<()> {
    let cfg = args.config()?;
    let engine = Engine::start(&cfg).await?;
    let mut session = Session::new("terminal");
    for p in &images {
        upload(&engine, &mut session, p).await?;
    }
    let mut lines = BufReader::new(tokio::io::stdin()).lines();
    loop {
        print!("> ");
        std::io::stdout().flush()?;
        let Some(line) = lines.next_line().await? else { break };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "/quit" {
            break;
        }
        if let Some(path) = line.strip_prefix("/upload") {
            if let Err(e) = upload(&engine, &mut session, Path::new(path.trim())).await {
                eprintln!("upload failed: {e:#}");
            }
            continue;
        }
        let sink = |e: StreamEvent| println!("{}", format_event(&e));
        engine.planner.run_plan(&mut session, line, &sink).await;
    }
    Ok(())
}

fn init_logging(default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { engine, listen } => {
            init_logging("info");
            match engine.config() {
                Ok(mut cfg) => {
                    if let Some(l) = listen {
                        cfg.listen = l;
                    }
                    geoagent_gateway::serve(cfg).await
                }
                Err(e) => Err(e),
            }
        }
        Command::Chat { engine, images } => {
            init_logging("warn");
            chat(engine, images).await
        }
        Command::Eval {
            engine,
            dataset,
            out,
            credit,
        } => {
            init_logging("warn");
            eval(engine, dataset, out, credit).await
        }
        Command::Tool { tools, tool: cmd } => {
            init_logging("warn");
            tool(&tools, cmd).await
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
