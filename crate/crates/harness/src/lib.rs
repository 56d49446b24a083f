//! Scripted instructor and evaluation protocols for the grounded agent.
//!
//! Each category runs the interleaved protocol: every example is first used
//! as a test, and only failed or unknown examples are taught. Trials repeat
//! until two in a row are perfect or the trial cap is reached.

pub mod acceptance;
pub mod checks;
pub mod combined;
pub mod config;
pub mod fixtures;
pub mod instructor;
pub mod nouns;
pub mod oracle;
pub mod preps;
pub mod report;
pub mod scenario;
pub mod session;
pub mod verbs;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use grounded_core::perception::PropertyKind;
use grounded_core::world::WorldError;

pub use config::HarnessConfig;
pub use report::{RunReport, TrialReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Nouns,
    Prepositions,
    Verbs,
    Combined,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Nouns, Category::Prepositions, Category::Verbs, Category::Combined];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Nouns => "nouns",
            Category::Prepositions => "prepositions",
            Category::Verbs => "verbs",
            Category::Combined => "combined",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// Seed of run `i` of a multi-run report.
pub fn run_seed(seed: u64, i: u32) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(u64::from(i))
}

/// One run of a category.
pub fn run_once(category: Category, cfg: &HarnessConfig, seed: u64) -> Result<RunReport, WorldError> {
    let start = Instant::now();
    let mut report = RunReport { seed, ..RunReport::default() };
    match category {
        Category::Nouns => {
            for (i, kind) in PropertyKind::ALL.into_iter().enumerate() {
                let g = nouns::run_property(kind, cfg, seed.wrapping_add(i as u64 * 7919), &mut report.latency)?;
                report.groups.insert(kind.as_str().to_string(), g);
            }
        }
        Category::Prepositions => {
            report.groups.insert("prepositions".into(), preps::run(cfg, seed, &mut report.latency));
        }
        Category::Verbs => {
            let v = verbs::run(cfg, seed, &mut report.latency);
            report.groups.insert("verbs".into(), v.group);
            report.verbs = Some(v.checks);
        }
        Category::Combined => {
            let c = combined::run(cfg, seed, &mut report.latency);
            report.groups.insert("combined".into(), c.group);
            report.commands = c.commands;
            report.notes = c.notes;
        }
    }
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// `runs` independent runs, averaged into one report.
pub fn run_category(category: Category, cfg: &HarnessConfig, seed: u64, runs: u32) -> Result<TrialReport, WorldError> {
    let reports = (0..runs)
        .map(|i| run_once(category, cfg, run_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialReport::new(category.as_str(), seed, reports))
}
