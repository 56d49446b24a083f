//! Acceptance criteria: pass/fail judgement over protocol reports.

use std::fmt;

use serde::{Deserialize, Serialize};

use grounded_core::world::WorldError;

use crate::checks::{self, CheckResult};
use crate::report::{GroupSummary, TrialReport};
use crate::{run_category, Category, HarnessConfig};

pub const ACCEPTANCE_VERSION: u32 = 1;

/// Per-response ceiling for internal (non-arm) processing.
pub const MAX_RESPONSE_MS: f64 = 1100.0;
pub const COLOR_RUNTIME_MS: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Criterion { name: name.into(), passed, detail }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark}  {}: {}", self.name, self.detail)
    }
}

fn summary<'a>(report: &'a TrialReport, group: &str) -> Option<&'a GroupSummary> {
    report.summary.get(group)
}

fn missing(name: &str, group: &str) -> Criterion {
    Criterion::new(name, false, format!("no {group} results in report"))
}

/// Criteria that a single category report decides.
pub fn judge(report: &TrialReport) -> Vec<Criterion> {
    let runs = report.runs.len() as u32;
    let mut out = Vec::new();
    match report.category.as_str() {
        "nouns" => {
            let wall: f64 = report.runs.iter().map(|r| r.wall_ms).sum();
            let color = summary(report, "color");
            out.push(match color {
                Some(c) => Criterion::new(
                    "color learning",
                    c.converged_runs == runs && c.avg_examples <= 1.5 && wall < COLOR_RUNTIME_MS,
                    format!(
                        "{:.2} examples/color (<= 1.5), {}/{runs} converged, {:.2} s for all noun runs (< 10 s)",
                        c.avg_examples,
                        c.converged_runs,
                        wall / 1e3
                    ),
                ),
                None => missing("color learning", "color"),
            });
            out.push(match summary(report, "size") {
                Some(s) => Criterion::new(
                    "size learning",
                    s.converged_runs == runs && s.avg_examples <= 2.5,
                    format!("{:.2} examples/size (<= 2.5), {}/{runs} converged", s.avg_examples, s.converged_runs),
                ),
                None => missing("size learning", "size"),
            });
            out.push(match (summary(report, "shape"), color) {
                (Some(s), Some(c)) => Criterion::new(
                    "shape learning",
                    s.converged_runs == runs && s.avg_examples > 3.0 * c.avg_examples && s.final_accuracy >= 0.95,
                    format!(
                        "{:.2} examples/shape (> 3 x {:.2}), accuracy {:.1}% (>= 95%), {}/{runs} converged",
                        s.avg_examples,
                        c.avg_examples,
                        s.final_accuracy * 100.0,
                        s.converged_runs
                    ),
                ),
                _ => missing("shape learning", "shape"),
            });
        }
        "prepositions" => out.push(match summary(report, "prepositions") {
            Some(p) => {
                let near = p.per_concept.get("near").copied().unwrap_or(0.0);
                let behind = p.per_concept.get("behind").copied().unwrap_or(0.0);
                Criterion::new(
                    "prepositions",
                    p.final_accuracy >= 0.93 && p.avg_examples <= 5.0 && near > behind && behind == 1.0,
                    format!(
                        "accuracy {:.1}% (>= 93%), {:.2} examples/prep (<= 5), near {near:.2} > behind {behind:.2} (= 1)",
                        p.final_accuracy * 100.0,
                        p.avg_examples
                    ),
                )
            }
            None => missing("prepositions", "prepositions"),
        }),
        "verbs" => {
            let checks: Vec<_> = report.runs.iter().filter_map(|r| r.verbs.as_ref()).collect();
            out.push(match summary(report, "verbs") {
                Some(v) => Criterion::new(
                    "verb learning",
                    v.avg_examples <= 2.0,
                    format!("{:.2} examples/template (<= 2)", v.avg_examples),
                ),
                None => missing("verb learning", "verbs"),
            });
            let sweep_ok = !checks.is_empty()
                && checks.iter().all(|c| c.right_of_examples <= 2 && c.sweep_total == 64 && c.sweep_passed == 64);
            let worst = checks.iter().map(|c| c.sweep_passed).min().unwrap_or(0);
            let most = checks.iter().map(|c| c.right_of_examples).max().unwrap_or(0);
            out.push(Criterion::new(
                "move X right of Y generalization",
                sweep_ok,
                format!("taught from at most {most} examples (<= 2), worst run {worst}/64 instantiations correct"),
            ));
            let injected: u32 = checks.iter().map(|c| c.injected_actions).sum();
            let leaked: u32 = checks.iter().map(|c| c.rules_with_pointing + c.superfluous_executed).sum();
            out.push(Criterion::new(
                "superfluous actions excluded",
                !checks.is_empty() && injected > 0 && leaked == 0,
                format!("{injected} injected, {leaked} in compiled rules or executed by them"),
            ));
        }
        "combined" => {
            let first_min = report.runs.iter().filter_map(|r| r.commands.first()).map(|c| c.agent_initiated).min();
            out.push(Criterion::new(
                "combined curve: first command",
                first_min.is_some_and(|n| n >= 10) && report.runs.iter().all(|r| !r.commands.is_empty()),
                format!("fewest agent-initiated interactions on the first command: {} (>= 10)", first_min.unwrap_or(0)),
            ));
            let tails: Vec<Vec<u32>> = report
                .runs
                .iter()
                .map(|r| r.commands.iter().rev().take(3).rev().map(|c| c.instructor_utterances).collect())
                .collect();
            let settled = !tails.is_empty() && tails.iter().all(|t| t.len() == 3 && t.iter().all(|n| *n == 1));
            out.push(Criterion::new(
                "combined curve: last three commands",
                settled,
                format!("instructor utterances per run {tails:?} (each exactly 1)"),
            ));
        }
        other => out.push(Criterion::new("category", false, format!("unknown category {other:?}"))),
    }
    out
}

/// Slowest single agent response across the reports.
pub fn reactivity(reports: &[TrialReport]) -> Criterion {
    let count: u64 = reports.iter().map(|r| r.latency.count).sum();
    let max = reports.iter().map(|r| r.latency.max_ms).fold(0.0, f64::max);
    Criterion::new(
        "reactivity",
        count > 0 && max < MAX_RESPONSE_MS,
        format!("slowest of {count} responses took {max:.1} ms (< {MAX_RESPONSE_MS} ms)"),
    )
}

fn from_check(c: &CheckResult) -> Criterion {
    let detail = match &c.failure {
        None => format!("{} cases", c.cases),
        Some(f) => f.clone(),
    };
    Criterion::new(&format!("property suite: {}", c.name), c.passed(), detail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub version: u32,
    pub seed: u64,
    pub criteria: Vec<Criterion>,
    pub reports: Vec<TrialReport>,
}

impl AcceptanceReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

/// Every category at `runs` runs, reactivity over all of them, and the
/// property suites.
pub fn run(cfg: &HarnessConfig, seed: u64, runs: u32) -> Result<AcceptanceReport, WorldError> {
    let mut criteria = Vec::new();
    let mut reports = Vec::new();
    for category in Category::ALL {
        let r = run_category(category, cfg, seed, runs)?;
        criteria.extend(judge(&r));
        reports.push(r);
    }
    criteria.push(reactivity(&reports));
    criteria.extend(checks::all(seed).iter().map(from_check));
    Ok(AcceptanceReport { version: ACCEPTANCE_VERSION, seed, criteria, reports })
}
