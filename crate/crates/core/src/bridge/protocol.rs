//! Message types and the observation layout.

use serde::{Deserialize, Serialize};

use crate::actions::{ActionSpace, ContinuousAction, Decision, DiscreteAction};
use crate::features::{AGENT_FEATURES, DYNAMIC_FEATURES};
use crate::rewards::{Fill, RewardBreakdown};
use crate::sim::{EpisodeConfig, Observation, StepInfo};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Observation as a JSON array of numbers.
    #[default]
    Text,
    /// Outcomes as binary frames with an f32 observation tail.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationToggles {
    pub lob_window: bool,
    pub dynamic_state: bool,
    pub agent_state: bool,
}

impl Default for ObservationToggles {
    fn default() -> Self {
        Self {
            lob_window: true,
            dynamic_state: true,
            agent_state: true,
        }
    }
}

impl ObservationToggles {
    pub fn any(&self) -> bool {
        self.lob_window || self.dynamic_state || self.agent_state
    }

    /// Turns off the named groups (`lob`, `dynamic`, `agent`, or the full
    /// group names), comma separated.
    pub fn ablate(mut self, groups: &str) -> Result<Self, String> {
        for g in groups.split(',').map(str::trim).filter(|g| !g.is_empty()) {
            match g {
                "lob" | "lob_window" => self.lob_window = false,
                "dynamic" | "dynamic_state" => self.dynamic_state = false,
                "agent" | "agent_state" => self.agent_state = false,
                other => return Err(format!("unknown observation group {other:?}")),
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub observation: ObservationToggles,
    pub action_space: ActionSpace,
    pub episode: EpisodeConfig,
    pub version: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            observation: ObservationToggles::default(),
            action_space: ActionSpace::Discrete,
            episode: EpisodeConfig::default(),
            version: PROTOCOL_VERSION,
        }
    }
}

/// Action on the wire: an integer for the discrete space, a pair of unit
/// floats for the continuous one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireAction {
    Discrete(u8),
    Continuous([f64; 2]),
}

impl WireAction {
    pub fn to_decision(self, space: ActionSpace) -> Result<Decision, String> {
        match (self, space) {
            (WireAction::Discrete(i), ActionSpace::Discrete) => DiscreteAction::new(i)
                .map(Decision::Discrete)
                .ok_or_else(|| format!("discrete action {i} out of range")),
            (WireAction::Continuous([a1, a2]), ActionSpace::Continuous) => {
                if a1.is_finite() && a2.is_finite() {
                    Ok(Decision::Continuous(ContinuousAction::new(a1, a2)))
                } else {
                    Err("continuous action must be finite".into())
                }
            }
            _ => Err(format!("action does not match the {space:?} action space")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        version: u32,
        #[serde(default)]
        encoding: Encoding,
    },
    Configure {
        #[serde(default)]
        config: SessionConfig,
    },
    Reset {
        #[serde(default)]
        episode: Option<u64>,
    },
    Step {
        action: WireAction,
    },
    Bye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeBody {
    pub episode: u64,
    /// Empty in binary frames, where values travel in the f32 tail.
    #[serde(default)]
    pub observation: Vec<f64>,
    pub reward: RewardBreakdown,
    pub fills: Vec<Fill>,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        version: u32,
        encoding: Encoding,
        server: String,
    },
    Configure {
        config: SessionConfig,
        layout: ObservationLayout,
        data: String,
    },
    Outcome(OutcomeBody),
    Error {
        code: String,
        message: String,
    },
    Bye,
}

impl ServerMessage {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutGroup {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub shape: Vec<usize>,
}

/// Position of each enabled group in the flat observation vector. Groups
/// appear in the fixed order LOB window, dynamic state, agent state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub total: usize,
    pub groups: Vec<LayoutGroup>,
}

/// Flat vector split back into its groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationParts {
    pub lob_window: Option<Vec<f64>>,
    pub dynamic_state: Option<Vec<f64>>,
    pub agent_state: Option<Vec<f64>>,
}

impl ObservationLayout {
    pub fn new(toggles: &ObservationToggles, window: usize, levels: usize) -> Self {
        let mut groups = Vec::new();
        let mut offset = 0;
        let mut add = |name: &str, shape: Vec<usize>| {
            let len = shape.iter().product();
            groups.push(LayoutGroup {
                name: name.into(),
                offset,
                len,
                shape,
            });
            offset += len;
        };
        if toggles.lob_window {
            add("lob_window", vec![window, 4 * levels]);
        }
        if toggles.dynamic_state {
            add("dynamic_state", vec![DYNAMIC_FEATURES]);
        }
        if toggles.agent_state {
            add("agent_state", vec![AGENT_FEATURES]);
        }
        Self { total: offset, groups }
    }

    pub fn group(&self, name: &str) -> Option<&LayoutGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Concatenates the enabled groups of `obs`.
    pub fn encode(&self, obs: &Observation) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total);
        for g in &self.groups {
            match g.name.as_str() {
                "lob_window" => match &obs.window {
                    Some(w) => out.extend_from_slice(&w.data),
                    None => out.resize(out.len() + g.len, 0.0),
                },
                "dynamic_state" => obs.dynamic.write_into(&mut out),
                "agent_state" => obs.agent.write_into(&mut out),
                _ => unreachable!("layout groups are fixed"),
            }
        }
        debug_assert_eq!(out.len(), self.total);
        out
    }

    pub fn decode(&self, values: &[f64]) -> Result<ObservationParts, String> {
        if values.len() != self.total {
            return Err(format!("observation has {} values, layout expects {}", values.len(), self.total));
        }
        let mut parts = ObservationParts::default();
        for g in &self.groups {
            let v = values[g.offset..g.offset + g.len].to_vec();
            match g.name.as_str() {
                "lob_window" => parts.lob_window = Some(v),
                "dynamic_state" => parts.dynamic_state = Some(v),
                "agent_state" => parts.agent_state = Some(v),
                other => return Err(format!("unknown group {other}")),
            }
        }
        Ok(parts)
    }
}
