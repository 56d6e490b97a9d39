use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroU64;

use crate::endpoint::Endpoint;
use crate::status::Status;

/// Identifier of one live channel within a handler.
///
/// IDs start at 1 and are never reused for the lifetime of the handler;
/// 0 is reserved as "no channel" and is not representable here.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ChannelId(NonZeroU64);

impl ChannelId {
    /// Returns `None` for the reserved value 0.
    pub fn new(value: u64) -> Option<ChannelId> {
        NonZeroU64::new(value).map(ChannelId)
    }

    pub fn get(self) -> u64 {
        self.0.get()
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Classifies what a [`Message`] carries.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum MessageKind {
    /// Opaque payload bytes moving through a channel.
    Data,
    /// A new connection (or emulated connection) came up. Empty payload.
    Connected,
    /// A connection went away. Empty payload.
    Disconnected,
    /// A channel-level failure; the status field carries the code.
    Error,
}

/// The unit routed through the platform: a channel ID, a kind, and an
/// opaque payload.
///
/// Payload bytes are never inspected or transformed by the platform;
/// what a producer sends is what the consumer reads.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Message {
    pub channel_id: ChannelId,
    pub kind: MessageKind,
    pub payload: Vec<u8>,
    /// Peer address, set on `Connected` notifications.
    pub remote: Option<Endpoint>,
    /// Failure code, set on `Error` notifications.
    pub status: Option<Status>,
}

impl Message {
    pub fn data(channel_id: ChannelId, payload: impl Into<Vec<u8>>) -> Message {
        Message {
            channel_id,
            kind: MessageKind::Data,
            payload: payload.into(),
            remote: None,
            status: None,
        }
    }

    pub fn connected(channel_id: ChannelId, remote: Endpoint) -> Message {
        Message {
            channel_id,
            kind: MessageKind::Connected,
            payload: Vec::new(),
            remote: Some(remote),
            status: None,
        }
    }

    pub fn disconnected(channel_id: ChannelId) -> Message {
        Message {
            channel_id,
            kind: MessageKind::Disconnected,
            payload: Vec::new(),
            remote: None,
            status: None,
        }
    }

    pub fn error(channel_id: ChannelId, status: Status) -> Message {
        Message {
            channel_id,
            kind: MessageKind::Error,
            payload: Vec::new(),
            remote: None,
            status: Some(status),
        }
    }
}
