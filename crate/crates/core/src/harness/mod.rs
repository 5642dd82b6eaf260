//! Scenario-based evaluation over the MCP endpoint.

pub mod agent;
pub mod case;
pub mod client;
pub mod metrics;
pub mod rules;
pub mod runner;

pub use agent::{AgentRun, CallRecord, LlmConfig};
pub use case::{Check, Rule, TestCase, TraceStep};
pub use client::McpClient;
pub use metrics::{render_tables, summarize, CaseSummary, RunMetrics, Tables};
pub use rules::{check_rules, review_level, RuleReport};
pub use runner::{run_case, run_once, write_results, AgentKind, CaseReport, HarnessError, RunOptions};
