use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use bimcp::harness::{self, AgentKind, LlmConfig, McpClient, RunOptions, TestCase};
use bimcp::schemas::ModelRef;
use bimcp::stack::{Stack, StackOptions};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "harness", about = "Run evaluation cases against an MCP endpoint")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Agent {
    Scripted,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more cases and write metrics and tables.
    Run {
        #[arg(long, required = true, num_args = 1..)]
        case: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = Agent::Scripted)]
        agent: Agent,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Run repetitions concurrently.
        #[arg(long)]
        parallel: bool,
        /// Start a private store, executor and MCP server instead of using MCP_URL.
        #[arg(long)]
        local: bool,
    },
    /// Check a stored model (bucket/key@version) or a local IFC file against a case.
    Check {
        #[arg(long)]
        model: String,
        #[arg(long)]
        case: PathBuf,
    },
}

async fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run { case, reps, agent, out, parallel, local } => {
            let cases: Vec<TestCase> =
                case.iter().map(TestCase::load).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            let agent = match agent {
                Agent::Scripted => AgentKind::Scripted,
                Agent::Llm => AgentKind::Llm(LlmConfig::from_env()?),
            };
            let store_dir = tempfile_dir(&out)?;
            let stack = if local {
                let mut opts = StackOptions::new(&store_dir);
                opts.deterministic = matches!(std::env::var("TEST_DETERMINISTIC").as_deref(), Ok("1" | "true" | "yes"));
                Some(Stack::start(opts).await.map_err(|e| format!("cannot start local services: {e}"))?)
            } else {
                None
            };
            let client = Arc::new(match &stack {
                Some(s) => McpClient::new(s.mcp_url()),
                None => McpClient::from_env(),
            });
            let opts = RunOptions { reps, parallel };
            let mut reports = Vec::new();
            for c in &cases {
                let r = harness::run_case(client.clone(), c, &agent, &opts)
                    .await
                    .map_err(|e| format!("{}: {e} (MCP endpoint {})", c.id, client.url()))?;
                reports.push(r);
            }
            harness::write_results(&out, &reports).map_err(|e| e.to_string())?;
            let summaries: Vec<_> = reports.iter().map(|r| r.summary.clone()).collect();
            print!("{}", harness::render_tables(&summaries).text);
            println!("results written to {}", out.display());
            if let Some(s) = stack {
                s.shutdown().await;
            }
            Ok(reports.iter().all(|r| r.summary.failed_runs == 0))
        }
        Command::Check { model, case } => {
            let case = TestCase::load(&case).map_err(|e| e.to_string())?;
            let bytes = if std::path::Path::new(&model).exists() {
                std::fs::read(&model).map_err(|e| format!("{model}: {e}"))?
            } else {
                let r = ModelRef::parse_shorthand(&model)
                    .ok_or_else(|| format!("{model} is neither a file nor bucket/key@versionId"))?;
                McpClient::from_env().fetch_model("harness-check", &r).await.map_err(|e| e.to_string())?
            };
            let text = String::from_utf8(bytes).map_err(|e| format!("model is not UTF-8: {e}"))?;
            let m = bimcp::ifc::parse(&text).map_err(|e| format!("cannot parse model: {e}"))?;
            let report = harness::check_rules(&m, &case.rules);
            println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize"));
            println!("review level (automated): {}", harness::review_level(Some(&m)));
            Ok(report.all_passed())
        }
    }
}

fn tempfile_dir(out: &std::path::Path) -> Result<PathBuf, String> {
    let dir = out.join("store");
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(dir)
}

#[tokio::main]
async fn main() -> ExitCode {
    match run(Cli::parse()).await {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("harness: {e}");
            ExitCode::from(2)
        }
    }
}
