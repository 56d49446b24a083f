//! Wire messages exchanged over the session channel.
//!
//! Every frame is one UTF-8 JSON object `{v, type, seq, payload}`. Client
//! frames carry a client-chosen `seq` that the server echoes in its ack;
//! server frames are numbered 1, 2, 3, ... per session with no gaps.

use serde::{Deserialize, Serialize};

use grounded_core::agent::Output;
use grounded_core::dialog::LearningKind;
use grounded_core::language::TemplateId;
use grounded_core::world::{ObjectId, PrimitiveAction, Scene};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

impl Envelope {
    pub fn new(seq: u64, body: Body) -> Self {
        Envelope { v: PROTOCOL_VERSION, seq, body }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Body {
    // instructor to agent
    Utterance {
        text: String,
    },
    Click {
        object: ObjectId,
    },
    // agent to instructor
    AgentUtterance {
        #[serde(default)]
        segment: Option<String>,
        template: TemplateId,
        text: String,
    },
    AgentAction {
        #[serde(default)]
        segment: Option<String>,
        action: PrimitiveAction,
    },
    SceneUpdate {
        scene: Box<Scene>,
    },
    LearningEvent {
        segment: String,
        kind: LearningKind,
        detail: String,
    },
    Ack {
        /// `seq` of the client frame being acknowledged.
        reply_to: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        selection: Option<ObjectId>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reply_to: Option<u64>,
        code: ErrorCode,
        message: String,
    },
}

impl Body {
    pub fn is_client(&self) -> bool {
        matches!(self, Body::Utterance { .. } | Body::Click { .. })
    }
}

impl From<Output> for Body {
    fn from(o: Output) -> Self {
        match o {
            Output::Utterance { segment, template, text } => Body::AgentUtterance { segment, template, text },
            Output::Action { segment, action } => Body::AgentAction { segment, action },
            Output::Learning { segment, kind, detail } => Body::LearningEvent { segment, kind, detail },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownObject,
    SessionClosed,
    BadMessage,
    Version,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_frames_parse() {
        let e: Envelope = serde_json::from_str(r#"{"v":1,"type":"click","seq":4,"payload":{"object":"o3"}}"#).unwrap();
        assert_eq!(e.seq, 4);
        assert_eq!(e.body, Body::Click { object: ObjectId(3) });
        let e: Envelope =
            serde_json::from_str(r#"{"v":1,"type":"utterance","seq":5,"payload":{"text":"This is orange"}}"#).unwrap();
        assert!(e.body.is_client());
    }

    #[test]
    fn ack_layout() {
        let e = Envelope::new(9, Body::Ack { reply_to: 4, selection: None });
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"v":1,"seq":9,"type":"ack","payload":{"reply_to":4}}"#);
    }
}
