//! Repetition runner: clean session per run, agent loop, model checks.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::agent::{self, AgentRun, LlmConfig, LlmError};
use super::case::TestCase;
use super::client::{ClientError, McpClient};
use super::metrics::{render_tables, summarize, CaseSummary, RunMetrics};
use super::rules::{check_rules, percent, review_level, RuleReport};
use crate::ifc;
use crate::schemas::{sha256_hex, Status};

#[derive(Debug, Clone)]
pub enum AgentKind {
    Scripted,
    Llm(LlmConfig),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub reps: usize,
    pub parallel: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("case {0} has no scripted trace")]
    NoTrace(String),
    #[error("store prefix for session {0} is not empty")]
    DirtyPrefix(String),
    #[error("cannot write results: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub transcript: AgentRun,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<RuleReport>,
    /// Why the final model could not be checked, if it could not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseReport {
    pub summary: CaseSummary,
    pub runs: Vec<RunOutcome>,
}

fn session_for(case: &TestCase, rep: usize) -> String {
    let id: String = case.id.chars().take(32).collect();
    format!("{id}-r{rep}-{}", ulid::Ulid::new().to_string().to_lowercase())
}

/// One repetition in a fresh session.
pub async fn run_once(
    client: &McpClient,
    case: &TestCase,
    agent: &AgentKind,
    rep: usize,
) -> Result<RunOutcome, HarnessError> {
    let started = Instant::now();
    let session = session_for(case, rep);
    let eval = format!("eval-{session}");
    let key = crate::mcp::session::session_key(&session);
    let listed = client.call_tool(&eval, "list_model_versions", &json!({"key": key})).await?;
    let versions = listed.logical_result.as_ref().and_then(|l| l["versions"].as_array()).map(Vec::len);
    if versions != Some(0) {
        return Err(HarnessError::DirtyPrefix(session));
    }

    let run = match agent {
        AgentKind::Scripted => {
            if case.trace.is_empty() {
                return Err(HarnessError::NoTrace(case.id.clone()));
            }
            agent::run_scripted(client, &session, &case.trace).await?
        }
        AgentKind::Llm(cfg) => agent::run_react(cfg, client, &session, &case.prompt).await?,
    };

    let ok = run.calls.iter().filter(|c| c.status == Status::Ok).count();
    let unexpected = run.calls.iter().filter(|c| c.expected.is_some_and(|e| e != c.status)).count();

    let mut produced = Vec::new();
    let mut seen = BTreeSet::new();
    for c in run.calls.iter().filter(|c| c.moved_model()) {
        if let Some(r) = &c.file_ref {
            if seen.insert(r.to_string()) {
                produced.push(r.clone());
            }
        }
    }
    let mut schema_ok = 0;
    let mut final_bytes = None;
    let mut model_error = None;
    for (i, r) in produced.iter().enumerate() {
        let bytes = match client.fetch_model(&eval, r).await {
            Ok(b) => b,
            Err(e @ ClientError::Unreachable { .. }) => return Err(e.into()),
            Err(e) => {
                model_error = Some(format!("cannot fetch {r}: {e}"));
                continue;
            }
        };
        let parsed = std::str::from_utf8(&bytes).ok().and_then(|t| ifc::parse(t).ok());
        if parsed.as_ref().is_some_and(|m| ifc::schema_check(m).passed) {
            schema_ok += 1;
        }
        if i + 1 == produced.len() {
            final_bytes = Some((bytes, parsed));
        }
    }
    let final_model = run.calls.iter().rev().find(|c| c.moved_model()).and_then(|c| c.file_ref.clone());
    let (rules, level, sha) = match &final_bytes {
        Some((bytes, Some(m))) => (Some(check_rules(m, &case.rules)), review_level(Some(m)), Some(sha256_hex(bytes))),
        Some((bytes, None)) => {
            model_error.get_or_insert_with(|| "final model does not parse".into());
            (None, 1, Some(sha256_hex(bytes)))
        }
        None => {
            model_error.get_or_insert_with(|| "the run produced no model".into());
            (None, 1, None)
        }
    };

    let metrics = RunMetrics {
        case_id: case.id.clone(),
        repetition: rep,
        session_id: session,
        steps: run.calls.len() + 1,
        tool_calls: run.calls.len(),
        tool_success_rate: percent(ok, run.calls.len()),
        rule_pass_rate: rules.as_ref().map(|r| r.rule_pass_rate).unwrap_or(0.0),
        schema_pass_rate: percent(schema_ok, produced.len()),
        review_level: level,
        tokens_total: run.tokens_total,
        wall_ms: started.elapsed().as_millis() as u64,
        final_model,
        final_sha256: sha,
        unexpected_status: unexpected,
        failure: run.failure.clone(),
    };
    Ok(RunOutcome { metrics, transcript: run, rules, model_error })
}

/// Runs `reps` repetitions of one case.
pub async fn run_case(
    client: Arc<McpClient>,
    case: &TestCase,
    agent: &AgentKind,
    opts: &RunOptions,
) -> Result<CaseReport, HarnessError> {
    client.initialize().await?;
    let reps = opts.reps.max(1);
    let mut runs = Vec::with_capacity(reps);
    if opts.parallel {
        let mut set = tokio::task::JoinSet::new();
        for rep in 1..=reps {
            let (client, case, agent) = (client.clone(), case.clone(), agent.clone());
            set.spawn(async move { run_once(&client, &case, &agent, rep).await });
        }
        while let Some(r) = set.join_next().await {
            runs.push(r.expect("repetition task panicked")?);
        }
        runs.sort_by_key(|r: &RunOutcome| r.metrics.repetition);
    } else {
        for rep in 1..=reps {
            runs.push(run_once(&client, case, agent, rep).await?);
        }
    }
    let metrics: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    Ok(CaseReport { summary: summarize(&case.id, case.comparable, &metrics), runs })
}

/// Writes per-case run files, the summary and both tables under `dir`.
pub fn write_results(dir: &Path, reports: &[CaseReport]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir.join("runs"))?;
    for r in reports {
        let path = dir.join("runs").join(format!("{}.json", r.summary.case_id));
        std::fs::write(path, serde_json::to_vec_pretty(r).expect("reports serialize"))?;
    }
    let summaries: Vec<CaseSummary> = reports.iter().map(|r| r.summary.clone()).collect();
    std::fs::write(dir.join("summary.json"), serde_json::to_vec_pretty(&summaries).expect("summaries serialize"))?;
    let tables = render_tables(&summaries);
    std::fs::write(dir.join("tables.txt"), &tables.text)?;
    std::fs::write(dir.join("agent_metrics.csv"), &tables.agent_csv)?;
    std::fs::write(dir.join("model_metrics.csv"), &tables.model_csv)?;
    Ok(())
}
