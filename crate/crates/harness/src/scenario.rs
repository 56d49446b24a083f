//! Scenario files: a fixed utterance/click script replayed against a fresh
//! agent, with expectations checked after every step and at the end.
//!
//! A run stops at the first expectation that does not hold.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use grounded_core::agent::{Agent, AgentConfig, Input, Output};
use grounded_core::dialog::{LearningKind, TranscriptLine};
use grounded_core::language::TemplateId;
use grounded_core::world::{generate_scene, LocationName, ObjectId, SceneSpec, WorldError};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario is not valid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported scenario version {0}")]
    Version(u32),
    #[error("scene: {0}")]
    Scene(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub scene: SceneSpec,
    #[serde(default)]
    pub scene_seed: u64,
    #[serde(default = "default_agent_seed")]
    pub agent_seed: u64,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub steps: Vec<Step>,
    #[serde(default)]
    pub expect_final: FinalExpect,
}

fn default_agent_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub say: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub click: Option<ObjectId>,
    #[serde(default)]
    pub expect: StepExpect,
}

/// Checks on the outputs of one step. Absent fields are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepExpect {
    /// Segment of the agent's last utterance.
    pub segment: Option<String>,
    /// Template of the agent's last utterance.
    pub template: Option<TemplateId>,
    /// Open segments after the step, bottom first.
    pub stack: Option<Vec<String>>,
    /// Learning kinds that must occur in the step, in order, with repeats.
    pub learning: Option<Vec<LearningKind>>,
    /// Segments of the primitive actions executed in the step.
    pub actions: Option<Vec<String>>,
    /// No agent-initiated word segment (`O...`) shows up in the step.
    pub no_word_segments: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinalExpect {
    pub stack_empty: Option<bool>,
    pub inside: Vec<Placement>,
    /// Learning events that must have happened somewhere in the run.
    pub learned: Vec<LearnedExpect>,
    pub transcript_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub object: ObjectId,
    pub location: LocationName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedExpect {
    pub kind: LearningKind,
    /// Substring of the event detail.
    #[serde(default)]
    pub detail: String,
}

/// Where a run diverged from its script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// Step index, or `None` for the final-state checks.
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub name: String,
    pub steps_run: usize,
    pub outputs: Vec<Vec<Output>>,
    pub transcript: Vec<TranscriptLine>,
    pub divergence: Option<Divergence>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        if s.version != SCENARIO_VERSION {
            return Err(ScenarioError::Version(s.version));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn run(&self) -> Result<ScenarioRun, ScenarioError> {
        let mut world = generate_scene(&self.scene, self.scene_seed)?;
        let mut agent = Agent::new(self.agent.clone(), self.agent_seed);
        let mut run = ScenarioRun {
            name: self.name.clone(),
            steps_run: 0,
            outputs: Vec::new(),
            transcript: Vec::new(),
            divergence: None,
        };
        let mut all = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            let input = Input { text: step.say.clone(), selection: step.click };
            let out = agent.cycle(&mut world, input);
            run.steps_run += 1;
            let stack = agent.stack.ids();
            let failed = check_step(&step.expect, &out, &stack);
            all.extend(out.iter().cloned());
            run.outputs.push(out);
            if let Some(message) = failed {
                run.divergence = Some(Divergence { step: Some(i), message: format!("{:?}: {message}", step.say) });
                run.transcript = agent.transcript.clone();
                return Ok(run);
            }
        }
        run.transcript = agent.transcript.clone();
        let e = &self.expect_final;
        let mut failed = None;
        if let Some(want) = e.stack_empty {
            if agent.stack.is_empty() != want {
                failed = Some(format!("stack is {:?}", agent.stack.ids()));
            }
        }
        for p in &e.inside {
            if failed.is_some() {
                break;
            }
            let region = world.location(p.location).map(|l| l.region);
            let pose = world.object(p.object).map(|o| o.pose);
            let ok = matches!((region, pose), (Some(r), Some(pose)) if r.contains(pose[0], pose[1]));
            if !ok {
                failed = Some(format!("{} is not in the {}", p.object, p.location.as_str()));
            }
        }
        for l in &e.learned {
            if failed.is_some() {
                break;
            }
            let seen = all.iter().any(|o| {
                matches!(o, Output::Learning { kind, detail, .. } if *kind == l.kind && detail.contains(&l.detail))
            });
            if !seen {
                failed = Some(format!("no {:?} learning event matching {:?}", l.kind, l.detail));
            }
        }
        if let (None, Some(n)) = (&failed, e.transcript_len) {
            if run.transcript.len() != n {
                failed = Some(format!("transcript has {} lines, expected {n}", run.transcript.len()));
            }
        }
        run.divergence = failed.map(|message| Divergence { step: None, message });
        Ok(run)
    }
}

fn check_step(e: &StepExpect, out: &[Output], stack: &[String]) -> Option<String> {
    let last = out.iter().rev().find_map(|o| match o {
        Output::Utterance { segment, template, .. } => Some((segment.clone(), *template)),
        _ => None,
    });
    if let Some(want) = &e.segment {
        let got = last.as_ref().and_then(|l| l.0.clone());
        if got.as_ref() != Some(want) {
            return Some(format!("last utterance segment {got:?}, expected {want:?}"));
        }
    }
    if let Some(want) = e.template {
        let got = last.as_ref().map(|l| l.1);
        if got != Some(want) {
            return Some(format!("last utterance template {got:?}, expected {want:?}"));
        }
    }
    if let Some(want) = &e.stack {
        if stack != want.as_slice() {
            return Some(format!("stack {stack:?}, expected {want:?}"));
        }
    }
    if let Some(want) = &e.learning {
        let got: Vec<LearningKind> = out
            .iter()
            .filter_map(|o| match o {
                Output::Learning { kind, .. } => Some(*kind),
                _ => None,
            })
            .collect();
        if &got != want {
            return Some(format!("learning {got:?}, expected {want:?}"));
        }
    }
    if let Some(want) = &e.actions {
        let got: Vec<String> = out
            .iter()
            .filter_map(|o| match o {
                Output::Action { segment, .. } => Some(segment.clone().unwrap_or_default()),
                _ => None,
            })
            .collect();
        if &got != want {
            return Some(format!("action segments {got:?}, expected {want:?}"));
        }
    }
    if e.no_word_segments {
        let word = out.iter().find_map(|o| match o {
            Output::Utterance { segment: Some(s), .. } | Output::Action { segment: Some(s), .. }
                if s.starts_with('O') =>
            {
                Some(s.clone())
            }
            Output::Learning { segment, .. } if segment.starts_with('O') => Some(segment.clone()),
            _ => None,
        });
        if let Some(s) = word {
            return Some(format!("agent opened word segment {s}"));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use grounded_core::world::{Palette, PaletteColor, PaletteShape, PaletteSize, Workspace, SCENE_SPEC_VERSION};

    fn empty() -> Scenario {
        Scenario {
            version: SCENARIO_VERSION,
            name: "empty".into(),
            scene: SceneSpec {
                version: SCENE_SPEC_VERSION,
                workspace: Workspace::default(),
                palette: Palette {
                    colors: vec![PaletteColor { name: "red".into(), rgb: [0.9, 0.1, 0.1] }],
                    sizes: vec![PaletteSize { name: "small".into(), scale: 0.05 }],
                    shapes: vec![PaletteShape { name: "square".into(), descriptor: [0.5; 3], spread: [0.0; 3] }],
                },
                objects: Vec::new(),
                seed: 0,
            },
            scene_seed: 0,
            agent_seed: 7,
            agent: AgentConfig::default(),
            steps: Vec::new(),
            expect_final: FinalExpect::default(),
        }
    }

    #[test]
    fn empty_script_gives_empty_transcript() {
        let run = empty().run().unwrap();
        assert!(run.passed());
        assert!(run.transcript.is_empty());
        assert_eq!(run.steps_run, 0);
    }

    #[test]
    fn first_divergence_stops_the_run() {
        let mut s = empty();
        for text in ["Hello there", "Pick up the blue block"] {
            s.steps.push(Step {
                say: text.into(),
                click: None,
                expect: StepExpect { template: Some(TemplateId::Answer), ..StepExpect::default() },
            });
        }
        let run = s.run().unwrap();
        assert_eq!(run.steps_run, 1);
        assert_eq!(run.divergence.unwrap().step, Some(0));
    }

    #[test]
    fn rejects_other_versions() {
        let mut v = serde_json::to_value(empty()).unwrap();
        v["version"] = 2.into();
        assert!(matches!(Scenario::from_json(&v.to_string()), Err(ScenarioError::Version(2))));
    }
}
