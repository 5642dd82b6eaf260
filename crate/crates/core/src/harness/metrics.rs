//! Per-run metrics, averages and the two result tables.

use serde::{Deserialize, Serialize};

use crate::schemas::ModelRef;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunMetrics {
    pub case_id: String,
    pub repetition: usize,
    pub session_id: String,
    /// Reasoning iterations: one per tool call plus the closing answer.
    pub steps: usize,
    pub tool_calls: usize,
    pub tool_success_rate: f64,
    /// Mean per-rule pass rate of the final model ("Model Success").
    pub rule_pass_rate: f64,
    /// Share of ok create/modify results whose model passes schema_check.
    pub schema_pass_rate: f64,
    pub review_level: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_total: Option<u64>,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_model: Option<ModelRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_sha256: Option<String>,
    /// Trace steps whose status differed from the expected one.
    #[serde(default)]
    pub unexpected_status: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseSummary {
    pub case_id: String,
    pub comparable: bool,
    pub runs: usize,
    pub steps: f64,
    pub tool_calls: f64,
    pub tool_success_rate: f64,
    pub tokens_k: Option<f64>,
    pub review_level: f64,
    pub rule_pass_rate: f64,
    pub schema_pass_rate: f64,
    /// True when every run produced the same final model bytes.
    pub identical_models: bool,
    pub failed_runs: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn summarize(case_id: &str, comparable: bool, runs: &[RunMetrics]) -> CaseSummary {
    let tokens: Vec<f64> = runs.iter().filter_map(|r| r.tokens_total).map(|t| t as f64 / 1000.0).collect();
    let first = runs.first().and_then(|r| r.final_sha256.as_ref());
    CaseSummary {
        case_id: case_id.to_string(),
        comparable,
        runs: runs.len(),
        steps: mean(runs.iter().map(|r| r.steps as f64)),
        tool_calls: mean(runs.iter().map(|r| r.tool_calls as f64)),
        tool_success_rate: mean(runs.iter().map(|r| r.tool_success_rate)),
        tokens_k: (!tokens.is_empty()).then(|| mean(tokens.iter().copied())),
        review_level: mean(runs.iter().map(|r| r.review_level as f64)),
        rule_pass_rate: mean(runs.iter().map(|r| r.rule_pass_rate)),
        schema_pass_rate: mean(runs.iter().map(|r| r.schema_pass_rate)),
        identical_models: first.is_some() && runs.iter().all(|r| r.final_sha256.as_ref() == first),
        failed_runs: runs.iter().filter(|r| r.failure.is_some()).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    pub text: String,
    pub agent_csv: String,
    pub model_csv: String,
}

const AGENT_HEADER: [&str; 5] =
    ["Test Case", "Steps", "Tool Calls", "Tool-Success Rate (%)", "Tokens Total per Run (K)"];
const MODEL_HEADER: [&str; 4] = ["Test Case", "Review Level (auto, 1-3)", "Model Success (%)", "IFC Schema (%)"];

fn label(s: &CaseSummary) -> String {
    if s.comparable {
        s.case_id.clone()
    } else {
        format!("{}*", s.case_id)
    }
}

fn agent_row(s: &CaseSummary) -> Vec<String> {
    vec![
        label(s),
        format!("{:.1}", s.steps),
        format!("{:.1}", s.tool_calls),
        format!("{:.1}", s.tool_success_rate),
        s.tokens_k.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into()),
    ]
}

fn model_row(s: &CaseSummary) -> Vec<String> {
    vec![
        label(s),
        format!("{:.1}", s.review_level),
        format!("{:.1}", s.rule_pass_rate),
        format!("{:.1}", s.schema_pass_rate),
    ]
}

fn aligned(title: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
    let mut out = format!("{title}\n{rule}\n{}\n{rule}\n", line(header.iter().map(|h| h.to_string()).collect()));
    for r in rows {
        out.push_str(&line(r.clone()));
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Agent and model metric tables, as aligned text and as CSV.
pub fn render_tables(summaries: &[CaseSummary]) -> Tables {
    let agent: Vec<Vec<String>> = summaries.iter().map(agent_row).collect();
    let model: Vec<Vec<String>> = summaries.iter().map(model_row).collect();
    let runs = summaries.iter().map(|s| s.runs).max().unwrap_or(0);
    let mut text = aligned("Agent Metrics", &AGENT_HEADER, &agent);
    text.push('\n');
    text.push_str(&aligned("Model Metrics", &MODEL_HEADER, &model));
    text.push_str(&format!("Values are averages over up to {runs} runs per case.\n"));
    if summaries.iter().any(|s| !s.comparable) {
        text.push_str("* re-authored case, not comparable with external figures.\n");
    }
    Tables { text, agent_csv: csv(&AGENT_HEADER, &agent), model_csv: csv(&MODEL_HEADER, &model) }
}
