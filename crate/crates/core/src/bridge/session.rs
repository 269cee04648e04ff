//! Per-connection protocol state machine.

use std::sync::Arc;

use crate::sim::{episode_seed, DataSource, SimError, Simulator, StepOutcome};

use super::protocol::{
    ClientMessage, Encoding, ObservationLayout, OutcomeBody, ServerMessage, SessionConfig, PROTOCOL_VERSION,
};
use super::wire::encode_binary;

/// A response and whether the session ends after it.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub message: ServerMessage,
    pub close: bool,
}

impl Reply {
    fn send(message: ServerMessage) -> Self {
        Self { message, close: false }
    }

    fn error(code: &str, message: impl Into<String>) -> Self {
        Self::send(ServerMessage::error(code, message))
    }
}

/// Gives each session its own slice of the data: a distinct synthetic seed,
/// or a distinct starting episode on a recorded stream.
pub fn session_source(base: &DataSource, session: u64) -> (DataSource, u64) {
    match base {
        DataSource::Synthetic { config, prefix } => {
            let mut config = config.clone();
            config.seed = episode_seed(config.seed ^ 0x5E55_1011, session);
            (DataSource::Synthetic { config, prefix: *prefix }, 0)
        }
        DataSource::Events { .. } => (base.clone(), session),
    }
}

fn describe(source: &DataSource) -> String {
    match source {
        DataSource::Synthetic { config, .. } => format!("synthetic seed={}", config.seed),
        DataSource::Events { events, .. } => format!("events n={}", events.len()),
    }
}

pub struct Session {
    source: DataSource,
    first_episode: u64,
    greeted: bool,
    encoding: Encoding,
    config: SessionConfig,
    layout: ObservationLayout,
    sim: Option<Simulator>,
    episodes_started: u64,
    episode: u64,
}

impl Session {
    pub fn new(base: &Arc<DataSource>, defaults: SessionConfig, index: u64) -> Self {
        let (source, first_episode) = session_source(base, index);
        let layout = ObservationLayout::new(&defaults.observation, defaults.episode.window, defaults.episode.levels);
        Self {
            source,
            first_episode,
            greeted: false,
            encoding: Encoding::Text,
            config: defaults,
            layout,
            sim: None,
            episodes_started: 0,
            episode: 0,
        }
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn layout(&self) -> &ObservationLayout {
        &self.layout
    }

    fn episode_index(&self, requested: Option<u64>) -> u64 {
        let k = requested.unwrap_or(self.first_episode + self.episodes_started);
        match self.source.capacity(&self.config.episode) {
            Some(cap) if cap > 0 => k % cap,
            _ => k,
        }
    }

    fn outcome(&self, out: StepOutcome) -> Reply {
        Reply::send(ServerMessage::Outcome(OutcomeBody {
            episode: self.episode,
            observation: self.layout.encode(&out.observation),
            reward: out.reward,
            fills: out.fills,
            done: out.done,
            info: out.info,
        }))
    }

    fn sim_error(e: SimError) -> Reply {
        let code = match e {
            SimError::NotReset => "NotReset",
            SimError::EpisodeFinished => "EpisodeFinished",
            SimError::StreamExhausted { .. } => "StreamExhausted",
            SimError::InvalidConfig(_) => "InvalidConfig",
            _ => "SimulationError",
        };
        Reply::error(code, e.to_string())
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Reply {
        match msg {
            ClientMessage::Hello { version, encoding } => {
                if version != PROTOCOL_VERSION {
                    return Reply::error(
                        "UnsupportedVersion",
                        format!("server speaks version {PROTOCOL_VERSION}, client asked for {version}"),
                    );
                }
                self.greeted = true;
                self.encoding = encoding;
                Reply::send(ServerMessage::Hello {
                    version: PROTOCOL_VERSION,
                    encoding,
                    server: format!("mmlab {}", env!("CARGO_PKG_VERSION")),
                })
            }
            _ if !self.greeted => Reply::error("NotGreeted", "send hello first"),
            ClientMessage::Configure { config } => {
                if config.version != PROTOCOL_VERSION {
                    return Reply::error("UnsupportedVersion", format!("config version {}", config.version));
                }
                if !config.observation.any() {
                    return Reply::error("InvalidConfig", "at least one observation group must be enabled");
                }
                let mut episode = config.episode;
                episode.lob_window = config.observation.lob_window;
                episode.action_space = config.action_space;
                if let Err(e) = episode.validate() {
                    return Self::sim_error(e);
                }
                self.config = SessionConfig { episode, ..config };
                self.layout = ObservationLayout::new(&self.config.observation, episode.window, episode.levels);
                self.sim = None;
                Reply::send(ServerMessage::Configure {
                    config: self.config.clone(),
                    layout: self.layout.clone(),
                    data: describe(&self.source),
                })
            }
            ClientMessage::Reset { episode } => {
                let k = self.episode_index(episode);
                let mut episode_cfg = self.config.episode;
                episode_cfg.lob_window = self.config.observation.lob_window;
                let plan = match self.source.episode(k, &episode_cfg) {
                    Ok(p) => p,
                    Err(e) => return Self::sim_error(e),
                };
                if self.sim.is_none() {
                    match Simulator::new(episode_cfg) {
                        Ok(s) => self.sim = Some(s),
                        Err(e) => return Self::sim_error(e),
                    }
                }
                let sim = self.sim.as_mut().expect("just created");
                match sim.reset(&plan) {
                    Ok(out) => {
                        self.episode = k;
                        self.episodes_started += 1;
                        self.outcome(out)
                    }
                    Err(e) => {
                        self.sim = None;
                        Self::sim_error(e)
                    }
                }
            }
            ClientMessage::Step { action } => {
                let Some(sim) = self.sim.as_mut() else {
                    return Reply::error("NotReset", "reset before stepping");
                };
                let decision = match action.to_decision(self.config.action_space) {
                    Ok(d) => d,
                    Err(e) => return Reply::error("InvalidAction", e),
                };
                match sim.step(&decision) {
                    Ok(out) => self.outcome(out),
                    Err(e) => Self::sim_error(e),
                }
            }
            ClientMessage::Bye => Reply {
                message: ServerMessage::Bye,
                close: true,
            },
        }
    }

    /// Parses a request payload; malformed input yields an error reply and
    /// leaves the session usable.
    pub fn handle_payload(&mut self, payload: &[u8]) -> Reply {
        match serde_json::from_slice::<ClientMessage>(payload) {
            Ok(msg) => self.handle(msg),
            Err(e) => Reply::error("MalformedMessage", e.to_string()),
        }
    }

    /// Serializes a reply in the negotiated encoding.
    pub fn encode_reply(&self, reply: &Reply) -> Vec<u8> {
        match (&reply.message, self.encoding) {
            (ServerMessage::Outcome(body), Encoding::Binary) => {
                let values: Vec<f32> = body.observation.iter().map(|&v| v as f32).collect();
                let header = ServerMessage::Outcome(OutcomeBody {
                    observation: Vec::new(),
                    ..body.clone()
                });
                encode_binary(&serde_json::to_vec(&header).expect("serializable"), &values)
            }
            (m, _) => serde_json::to_vec(m).expect("serializable"),
        }
    }
}
