//! Trial reports: what each protocol run measured.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::session::Latency;

/// Report file format version.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConceptStats {
    pub examples: u32,
    pub passed: u32,
    pub failed: u32,
}

/// One family of concepts (colors, prepositions, verb templates, ...) in one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupRun {
    pub concepts: BTreeMap<String, ConceptStats>,
    pub trials: u32,
    pub converged: bool,
    /// Correct fraction on the evaluation pass that follows training.
    pub final_accuracy: f64,
}

impl GroupRun {
    pub fn concept(&mut self, name: &str) -> &mut ConceptStats {
        self.concepts.entry(name.to_string()).or_default()
    }

    pub fn avg_examples(&self) -> f64 {
        if self.concepts.is_empty() {
            return 0.0;
        }
        let total: u32 = self.concepts.values().map(|c| c.examples).sum();
        f64::from(total) / self.concepts.len() as f64
    }

    pub fn examples_of(&self, name: &str) -> u32 {
        self.concepts.get(name).map_or(0, |c| c.examples)
    }
}

/// Interaction counts for one command of the combined curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandStats {
    pub command: String,
    pub agent_initiated: u32,
    pub instructor_utterances: u32,
    pub goal_reached: bool,
}

/// Checks specific to the verb category.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerbChecks {
    /// Examples the "move ... right of" template took before the sweep.
    pub right_of_examples: u32,
    pub sweep_passed: u32,
    pub sweep_total: u32,
    pub injected_actions: u32,
    /// Autonomous executions that contained a pointing action.
    pub superfluous_executed: u32,
    pub rules_with_pointing: u32,
    pub test_passed: u32,
    pub test_total: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub groups: BTreeMap<String, GroupRun>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub commands: Vec<CommandStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbs: Option<VerbChecks>,
    pub latency: Latency,
    pub wall_ms: f64,
    /// Protocol problems, e.g. a question the instructor could not answer.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub avg_examples: f64,
    pub final_accuracy: f64,
    pub converged_runs: u32,
    /// Mean examples per concept name, across runs.
    pub per_concept: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub version: u32,
    pub category: String,
    pub seed: u64,
    pub runs: Vec<RunReport>,
    pub summary: BTreeMap<String, GroupSummary>,
    pub latency: Latency,
}

impl TrialReport {
    pub fn new(category: &str, seed: u64, runs: Vec<RunReport>) -> Self {
        let mut summary = BTreeMap::new();
        let mut latency = Latency::default();
        for r in &runs {
            latency.merge(&r.latency);
        }
        let names: std::collections::BTreeSet<&String> = runs.iter().flat_map(|r| r.groups.keys()).collect();
        for name in names {
            let groups: Vec<&GroupRun> = runs.iter().filter_map(|r| r.groups.get(name)).collect();
            let n = groups.len() as f64;
            let mut per_concept: BTreeMap<String, f64> = BTreeMap::new();
            for g in &groups {
                for (c, s) in &g.concepts {
                    *per_concept.entry(c.clone()).or_default() += f64::from(s.examples) / n;
                }
            }
            summary.insert(
                name.clone(),
                GroupSummary {
                    avg_examples: groups.iter().map(|g| g.avg_examples()).sum::<f64>() / n,
                    final_accuracy: groups.iter().map(|g| g.final_accuracy).sum::<f64>() / n,
                    converged_runs: groups.iter().filter(|g| g.converged).count() as u32,
                    per_concept,
                },
            );
        }
        TrialReport { version: REPORT_VERSION, category: category.into(), seed, runs, summary, latency }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_averages_over_runs() {
        let mut a = GroupRun::default();
        a.concept("red").examples = 1;
        a.concept("blue").examples = 3;
        a.final_accuracy = 1.0;
        a.converged = true;
        let mut b = GroupRun::default();
        b.concept("red").examples = 2;
        b.concept("blue").examples = 2;
        b.final_accuracy = 0.5;
        let run = |g: GroupRun| RunReport { groups: [("color".to_string(), g)].into(), ..RunReport::default() };
        let r = TrialReport::new("nouns", 1, vec![run(a), run(b)]);
        let s = &r.summary["color"];
        assert_eq!(s.avg_examples, 2.0);
        assert_eq!(s.final_accuracy, 0.75);
        assert_eq!(s.converged_runs, 1);
        assert_eq!(s.per_concept["red"], 1.5);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<TrialReport>(&json).unwrap(), r);
    }
}
