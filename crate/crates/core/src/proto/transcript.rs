//! JSON renderings of a run.

use serde_json::json;
use sha2::{Digest, Sha256};

use super::message::Message;
use super::RunVerdict;

pub const VERDICT_SCHEMA: &str = "cvdb.verdict.v1";

/// One JSON object per message, in send order, each line newline-terminated.
pub fn transcript_jsonl(messages: &[Message]) -> String {
    let mut out = String::new();
    for m in messages {
        out.push_str(&serde_json::to_string(m).expect("messages serialize"));
        out.push('\n');
    }
    out
}

/// SHA-256 of the JSON-lines transcript, hex encoded.
pub fn transcript_digest(messages: &[Message]) -> String {
    hex::encode(Sha256::digest(transcript_jsonl(messages).as_bytes()))
}

pub fn verdict_json(verdict: &RunVerdict) -> String {
    let mut value = serde_json::to_value(verdict).expect("verdicts serialize");
    value["schema"] = json!(VERDICT_SCHEMA);
    value["transcript_sha256"] = json!(transcript_digest(&verdict.transcript));
    value["detectable_broadcast"] = json!(super::check_detectable_broadcast(verdict));
    serde_json::to_string_pretty(&value).expect("values serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto::{MessageKind, PlayerId};

    #[test]
    fn jsonl_lines() {
        let m = Message { round: 2, sender: PlayerId::S, receiver: PlayerId::R1, kind: MessageKind::Flag { value: true } };
        let text = transcript_jsonl(&[m.clone(), m]);
        assert_eq!(text.lines().count(), 2);
        let first = text.lines().next().unwrap();
        assert_eq!(first, r#"{"round":2,"sender":"S","receiver":"R1","kind":"flag","payload":{"value":true}}"#);
        let back: Message = serde_json::from_str(first).unwrap();
        assert_eq!(back.round, 2);
    }
}
