//! One live session: agent, world and outbound message log, owned by a
//! single task that drains the input queue in order.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, oneshot, watch};

use grounded_core::agent::{Agent, AgentConfig, AgentError, Input, Knowledge, SaveFile};
use grounded_core::dialog::{Segment, TranscriptLine};
use grounded_core::language::tokenize;
use grounded_core::memory::Episode;
use grounded_core::world::{generate_scene, ObjectId, Scene, SceneSpec, Workspace, WorldError};

use crate::message::{Body, Envelope, ErrorCode};

pub const SESSION_SAVE_VERSION: u32 = 1;
const QUEUE_DEPTH: usize = 256;
const STREAM_DEPTH: usize = 1024;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session is closed")]
    SessionClosed,
    #[error("no object {0} in the scene")]
    UnknownObject(ObjectId),
    #[error("unsupported session save version {0}")]
    Version(u32),
    #[error("scene: {0}")]
    Scene(#[from] WorldError),
    #[error("agent state: {0}")]
    Agent(#[from] AgentError),
}

/// Everything needed to continue a session elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSave {
    pub version: u32,
    pub agent: SaveFile,
    pub config: AgentConfig,
    pub scene: Scene,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<ObjectId>,
}

/// How a new session starts. All fields optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NewSession {
    pub scene: Option<SceneSpec>,
    pub scene_seed: u64,
    pub agent_seed: u64,
    pub agent: AgentConfig,
    /// Continue from a save instead; the other fields are then ignored.
    pub save: Option<SessionSave>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotKind {
    Scene,
    Stack,
    Semantic,
    Episodic,
    Transcript,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackView {
    /// Open segment ids, bottom first.
    pub open: Vec<String>,
    pub segments: Vec<Segment>,
}

/// Copies of the inspectable state, taken after the last completed input.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    /// Server seq of the last frame emitted before the copy was taken.
    pub seq: u64,
    pub scene: Scene,
    pub stack: StackView,
    pub semantic: Knowledge,
    pub episodic: Vec<Episode>,
    pub transcript: Vec<TranscriptLine>,
}

impl Snapshots {
    pub fn document(&self, kind: SnapshotKind) -> serde_json::Value {
        let doc = match kind {
            SnapshotKind::Scene => serde_json::to_value(&self.scene),
            SnapshotKind::Stack => serde_json::to_value(&self.stack),
            SnapshotKind::Semantic => serde_json::to_value(&self.semantic),
            SnapshotKind::Episodic => serde_json::to_value(&self.episodic),
            SnapshotKind::Transcript => serde_json::to_value(&self.transcript),
        };
        let doc = doc.expect("state types serialize to JSON");
        serde_json::json!({ "seq": self.seq, "kind": kind, "document": doc })
    }
}

enum Command {
    Utterance { reply_to: u64, text: String },
    Click { reply_to: u64, object: ObjectId, done: oneshot::Sender<Result<(), SessionError>> },
    Save { done: oneshot::Sender<SessionSave> },
    Load { save: Box<SessionSave>, done: oneshot::Sender<Result<(), SessionError>> },
    Close,
}

/// Outbound frames: the full log for replay plus a live feed.
#[derive(Default)]
struct Stream {
    log: Vec<Envelope>,
}

/// Cheap to clone; all clones talk to the same session task.
#[derive(Clone)]
pub struct SessionHandle {
    input: mpsc::Sender<Command>,
    snapshots: watch::Receiver<Arc<Snapshots>>,
    stream: Arc<Mutex<Stream>>,
    live: broadcast::Sender<Envelope>,
    connection: Arc<watch::Sender<u64>>,
}

struct Actor {
    agent: Agent,
    scene: Scene,
    selection: Option<ObjectId>,
    stream: Arc<Mutex<Stream>>,
    live: broadcast::Sender<Envelope>,
    snapshots: watch::Sender<Arc<Snapshots>>,
}

fn deictic(text: &str) -> bool {
    tokenize(text).iter().any(|t| t == "this" || t == "that")
}

impl Actor {
    fn emit(&self, bodies: impl IntoIterator<Item = Body>) -> u64 {
        // the lock orders appends against replay-then-subscribe in `attach`
        let mut stream = self.stream.lock().expect("stream lock");
        for body in bodies {
            let e = Envelope::new(stream.log.len() as u64 + 1, body);
            stream.log.push(e.clone());
            let _ = self.live.send(e);
        }
        stream.log.len() as u64
    }

    fn publish(&self, seq: u64) {
        let snap = Snapshots {
            seq,
            scene: self.scene.clone(),
            stack: StackView { open: self.agent.stack.ids(), segments: self.agent.stack.open().to_vec() },
            semantic: self.agent.knowledge.clone(),
            episodic: self.agent.episodic.episodes().to_vec(),
            transcript: self.agent.transcript.clone(),
        };
        self.snapshots.send_replace(Arc::new(snap));
    }

    fn scene_update(&self) -> Body {
        Body::SceneUpdate { scene: Box::new(self.scene.clone()) }
    }

    fn utterance(&mut self, reply_to: u64, text: String) -> u64 {
        if text.trim().is_empty() {
            return self.emit([Body::Ack { reply_to, selection: None }]);
        }
        let selection = if deictic(&text) { self.selection.take() } else { None };
        let outputs = self.agent.cycle(&mut self.scene, Input { text, selection });
        let acted = outputs.iter().any(|o| matches!(o, grounded_core::agent::Output::Action { .. }));
        let mut bodies = vec![Body::Ack { reply_to, selection }];
        bodies.extend(outputs.into_iter().map(Body::from));
        if acted {
            bodies.push(self.scene_update());
        }
        self.emit(bodies)
    }

    fn click(&mut self, reply_to: u64, object: ObjectId) -> (u64, Result<(), SessionError>) {
        if self.scene.object(object).is_none() {
            let err = SessionError::UnknownObject(object);
            let seq = self.emit([Body::Error {
                reply_to: Some(reply_to),
                code: ErrorCode::UnknownObject,
                message: err.to_string(),
            }]);
            return (seq, Err(err));
        }
        self.selection = Some(object);
        (self.emit([Body::Ack { reply_to, selection: Some(object) }]), Ok(()))
    }

    fn save(&self) -> SessionSave {
        SessionSave {
            version: SESSION_SAVE_VERSION,
            agent: self.agent.save(true),
            config: self.agent.config.clone(),
            scene: self.scene.clone(),
            selection: self.selection,
        }
    }

    fn load(&mut self, save: SessionSave) -> Result<u64, SessionError> {
        check_save(&save)?;
        self.agent = Agent::from_save(save.agent, save.config);
        self.scene = save.scene;
        self.selection = save.selection;
        Ok(self.emit([self.scene_update()]))
    }

    async fn run(mut self, mut input: mpsc::Receiver<Command>) {
        while let Some(cmd) = input.recv().await {
            let seq = match cmd {
                Command::Utterance { reply_to, text } => self.utterance(reply_to, text),
                Command::Click { reply_to, object, done } => {
                    let (seq, r) = self.click(reply_to, object);
                    let _ = done.send(r);
                    seq
                }
                Command::Save { done } => {
                    let _ = done.send(self.save());
                    continue;
                }
                Command::Load { save, done } => match self.load(*save) {
                    Ok(seq) => {
                        self.publish(seq);
                        let _ = done.send(Ok(()));
                        continue;
                    }
                    Err(e) => {
                        let _ = done.send(Err(e));
                        continue;
                    }
                },
                Command::Close => break,
            };
            self.publish(seq);
        }
    }
}

fn check_save(save: &SessionSave) -> Result<(), SessionError> {
    if save.version != SESSION_SAVE_VERSION {
        return Err(SessionError::Version(save.version));
    }
    if save.agent.version != grounded_core::agent::SAVE_VERSION {
        return Err(AgentError::Version(save.agent.version).into());
    }
    Ok(())
}

impl SessionHandle {
    /// Starts the session task. Must be called inside a tokio runtime.
    pub fn spawn(new: NewSession) -> Result<Self, SessionError> {
        let (agent, scene, selection) = match new.save {
            Some(save) => {
                check_save(&save)?;
                (Agent::from_save(save.agent, save.config), save.scene, save.selection)
            }
            None => {
                let scene = match &new.scene {
                    Some(spec) => generate_scene(spec, new.scene_seed)?,
                    None => Scene::empty(Workspace::default()),
                };
                (Agent::new(new.agent, new.agent_seed), scene, None)
            }
        };
        let (input_tx, input_rx) = mpsc::channel(QUEUE_DEPTH);
        let (live, _) = broadcast::channel(STREAM_DEPTH);
        let stream = Arc::new(Mutex::new(Stream::default()));
        let placeholder = Snapshots {
            seq: 0,
            scene: scene.clone(),
            stack: StackView { open: Vec::new(), segments: Vec::new() },
            semantic: agent.knowledge.clone(),
            episodic: Vec::new(),
            transcript: Vec::new(),
        };
        let (snap_tx, snap_rx) = watch::channel(Arc::new(placeholder));
        let actor = Actor { agent, scene, selection, stream: stream.clone(), live: live.clone(), snapshots: snap_tx };
        // the client renders the table from the first frame
        let seq = actor.emit([actor.scene_update()]);
        actor.publish(seq);
        tokio::spawn(actor.run(input_rx));
        Ok(SessionHandle {
            input: input_tx,
            snapshots: snap_rx,
            stream,
            live,
            connection: Arc::new(watch::channel(0).0),
        })
    }

    pub fn is_closed(&self) -> bool {
        self.input.is_closed()
    }

    /// Resolves once the session task has stopped.
    pub async fn closed(&self) {
        self.input.closed().await
    }

    async fn send(&self, cmd: Command) -> Result<(), SessionError> {
        self.input.send(cmd).await.map_err(|_| SessionError::SessionClosed)
    }

    /// Queues an utterance. Its ack and the agent's moves arrive on the stream.
    pub async fn utterance(&self, reply_to: u64, text: &str) -> Result<(), SessionError> {
        self.send(Command::Utterance { reply_to, text: text.to_string() }).await
    }

    /// Queues a click and waits for it to be applied. The newest click
    /// replaces any selection not yet consumed.
    pub async fn click(&self, reply_to: u64, object: ObjectId) -> Result<(), SessionError> {
        let (done, rx) = oneshot::channel();
        self.send(Command::Click { reply_to, object, done }).await?;
        rx.await.map_err(|_| SessionError::SessionClosed)?
    }

    pub async fn save(&self) -> Result<SessionSave, SessionError> {
        let (done, rx) = oneshot::channel();
        self.send(Command::Save { done }).await?;
        rx.await.map_err(|_| SessionError::SessionClosed)
    }

    pub async fn load(&self, save: SessionSave) -> Result<(), SessionError> {
        let (done, rx) = oneshot::channel();
        self.send(Command::Load { save: Box::new(save), done }).await?;
        rx.await.map_err(|_| SessionError::SessionClosed)?
    }

    /// Stops the session. Queued inputs ahead of the close are still processed.
    pub async fn close(&self) {
        let _ = self.input.send(Command::Close).await;
        self.input.closed().await;
    }

    /// State as of the last completed input.
    pub fn snapshots(&self) -> Result<Arc<Snapshots>, SessionError> {
        if self.is_closed() {
            return Err(SessionError::SessionClosed);
        }
        Ok(self.snapshots.borrow().clone())
    }

    /// Resolves once every input queued so far has been processed.
    pub async fn settle(&self) -> Result<Arc<Snapshots>, SessionError> {
        self.save().await?;
        self.snapshots()
    }

    /// Frames with `seq > since`, plus a receiver for everything after them.
    pub fn attach(&self, since: u64) -> (Vec<Envelope>, broadcast::Receiver<Envelope>) {
        let stream = self.stream.lock().expect("stream lock");
        let rx = self.live.subscribe();
        let backlog = stream.log.iter().skip(since as usize).cloned().collect();
        (backlog, rx)
    }

    /// Frames with `seq > since` from the log.
    pub fn replay(&self, since: u64) -> Vec<Envelope> {
        self.stream.lock().expect("stream lock").log.iter().skip(since as usize).cloned().collect()
    }

    /// Registers a new instructor connection and returns a receiver that
    /// changes when a later connection takes over.
    pub fn connect(&self) -> (u64, watch::Receiver<u64>) {
        let mut id = 0;
        self.connection.send_modify(|c| {
            *c += 1;
            id = *c;
        });
        (id, self.connection.subscribe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deixis_is_a_whole_word() {
        assert!(deictic("This is orange"));
        assert!(deictic("put that in the pantry"));
        assert!(!deictic("Thistle is red"));
        assert!(!deictic("Pick up the red triangle"));
    }
}
