//! Message channels between the two agents.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};

use super::{Envelope, FistaError};

/// Ordered, reliable, bidirectional channel to exactly one peer.
pub trait Transport {
    fn send(&mut self, msg: &Envelope) -> Result<(), FistaError>;
    fn recv(&mut self) -> Result<Envelope, FistaError>;
}

/// In-memory endpoint backed by a pair of bounded channels.
#[derive(Debug)]
pub struct ChannelTransport {
    tx: SyncSender<Envelope>,
    rx: Receiver<Envelope>,
}

impl ChannelTransport {
    /// Two connected endpoints. Each direction buffers a single message,
    /// which is all the lockstep protocol ever has in flight.
    pub fn pair() -> (ChannelTransport, ChannelTransport) {
        let (a_tx, b_rx) = sync_channel(1);
        let (b_tx, a_rx) = sync_channel(1);
        (ChannelTransport { tx: a_tx, rx: a_rx }, ChannelTransport { tx: b_tx, rx: b_rx })
    }
}

impl Transport for ChannelTransport {
    fn send(&mut self, msg: &Envelope) -> Result<(), FistaError> {
        self.tx.send(*msg).map_err(|_| FistaError::ConnectionLost)
    }

    fn recv(&mut self) -> Result<Envelope, FistaError> {
        self.rx.recv().map_err(|_| FistaError::ConnectionLost)
    }
}
