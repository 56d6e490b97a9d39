//! The component contract every channel implements and the upward
//! interfaces a channel uses to talk to its host.
//!
//! All transports expose the same four operations; applications never
//! see a transport-specific surface. Implementations drive their own
//! background I/O and report inbound traffic through the shared
//! callback, which feeds the host's single incoming queue.

use alloc::sync::Arc;

use crate::message::{ChannelId, Message};
use crate::status::Status;

/// One communication component.
///
/// Lifecycle is `New -> Created -> Destroyed`, forward-only. Operations
/// called outside their valid state return [`Status::CLOSED`] and have
/// no side effects. All methods may be called from any thread;
/// `create` is expected to be called once.
pub trait Channel: Send + Sync {
    /// Acquires transport resources and starts the background I/O
    /// driver. Returns a negative code if the socket cannot be bound or
    /// connected; the component stays destroyable either way.
    fn create(&self) -> Status;

    /// Releases sockets, stops drivers, and discards the outgoing
    /// queue. Idempotent: repeated calls return [`Status::OK`].
    fn destroy(&self) -> Status;

    /// Reports connection health without blocking on I/O.
    fn status(&self) -> Status;

    /// Appends one `Data` message to the bounded outgoing queue and
    /// returns immediately; a background writer drains the queue to the
    /// wire in FIFO order. When the queue is full the message is
    /// dropped and counted instead of blocking the caller.
    fn add_message(&self, msg: Message);

    /// Outgoing-queue counters. Channels without an outgoing queue
    /// (servers) report zeros.
    fn stats(&self) -> ChannelStats {
        ChannelStats::default()
    }
}

/// Snapshot of a channel's outgoing-queue state.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ChannelStats {
    /// Messages queued or currently being written to the wire.
    pub pending: usize,
    /// Queue capacity in messages.
    pub capacity: usize,
    /// Messages dropped because the queue was full.
    pub dropped: u64,
}

/// Upward path for inbound traffic. Every channel of one handler shares
/// the same callback target.
pub trait ChannelCallback: Send + Sync {
    /// Appends `msg` to the host's single incoming queue in arrival
    /// order. Non-blocking. Returns [`Status::CLOSED`] (and discards
    /// the message) once the host has shut down.
    fn on_channel_message(&self, msg: Message) -> Status;
}

/// Everything a channel may ask of the platform that hosts it.
///
/// Server channels spawn one child channel per remote peer; the host
/// hands out the IDs and tracks the children so that outbound routing
/// reaches them.
pub trait ChannelHost: ChannelCallback {
    /// Allocates a fresh channel ID from the host's counter.
    fn allocate_id(&self) -> ChannelId;

    /// Registers a child channel under `id` so messages can be routed
    /// to it. Returns [`Status::CLOSED`] if the host is shutting down,
    /// in which case the caller should discard the child.
    fn adopt_child(&self, id: ChannelId, child: Arc<dyn Channel>) -> Status;

    /// Removes a dead child from the host's routing table.
    fn release_child(&self, id: ChannelId);
}
