//! Synchronous pairwise channels.
//!
//! Messages sent in a round become readable from the next round on, and
//! only by their addressee.

use std::collections::VecDeque;

use super::message::{Message, MessageKind};
use super::PlayerId;

#[derive(Debug, Default)]
pub struct Network {
    round: u32,
    inboxes: [VecDeque<Message>; 3],
    transcript: Option<Vec<Message>>,
    /// `(reader, addressee)` for every delivered message.
    access: Vec<(PlayerId, PlayerId)>,
}

impl Network {
    pub fn new(record: bool) -> Self {
        Self { transcript: record.then(Vec::new), ..Self::default() }
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn next_round(&mut self) {
        self.round += 1;
    }

    pub fn send(&mut self, sender: PlayerId, receiver: PlayerId, kind: MessageKind) {
        assert_ne!(sender, receiver, "players do not message themselves");
        let msg = Message { round: self.round, sender, receiver, kind };
        if let Some(t) = &mut self.transcript {
            t.push(msg.clone());
        }
        self.inboxes[receiver.index()].push_back(msg);
    }

    /// Drains the messages to `reader` sent in earlier rounds, in arrival order.
    pub fn receive(&mut self, reader: PlayerId) -> Vec<Message> {
        let inbox = &mut self.inboxes[reader.index()];
        let ready = inbox.iter().take_while(|m| m.round < self.round).count();
        let msgs: Vec<Message> = inbox.drain(..ready).collect();
        self.access.extend(msgs.iter().map(|m| (reader, m.receiver)));
        msgs
    }

    pub fn access_log(&self) -> &[(PlayerId, PlayerId)] {
        &self.access
    }

    pub fn take_transcript(&mut self) -> Vec<Message> {
        self.transcript.take().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delivers_only_to_addressee() {
        let mut net = Network::new(true);
        net.send(PlayerId::S, PlayerId::R0, MessageKind::Flag { value: true });
        net.send(PlayerId::R1, PlayerId::S, MessageKind::Flag { value: false });
        assert!(net.receive(PlayerId::R0).is_empty(), "same-round delivery");
        net.next_round();
        assert!(net.receive(PlayerId::R1).is_empty());
        let got = net.receive(PlayerId::R0);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].sender, PlayerId::S);
        assert_eq!(net.receive(PlayerId::S).len(), 1);
        assert!(net.access_log().iter().all(|(r, a)| r == a));
        assert_eq!(net.take_transcript().len(), 2);
    }
}
