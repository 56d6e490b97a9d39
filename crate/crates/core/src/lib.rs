//! Transport-neutral core of the channel platform: the vocabulary
//! shared by every component (IDs, messages, status codes, creation
//! descriptors), the component contract channels implement, the factory
//! registry that resolves channel types, and the pure wire codecs
//! (base64, the raw-data SOAP envelope, HTTP/1.1 framing, UDP
//! connection emulation).
//!
//! Everything here is I/O-free and usable without `std`; the companion
//! `chanplat` crate supplies the sockets, threads, and CLI.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod base64;
mod config;
mod endpoint;
pub mod http;
mod message;
pub mod peer;
mod registry;
pub mod soap;
pub mod spi;
mod status;

pub use config::{
    options, ChannelInfo, ChannelType, DEFAULT_HTTP_PATH, DEFAULT_IDLE_TIMEOUT_SECS,
    DEFAULT_QUEUE_CAPACITY, DEFAULT_READ_BUFFER, DEFAULT_SOAP_REPLY_WAIT_MS, DEFAULT_SOAP_URN,
};
pub use endpoint::Endpoint;
pub use message::{ChannelId, Message, MessageKind};
pub use registry::{ChannelFactory, FactoryRegistry};
pub use spi::{Channel, ChannelCallback, ChannelHost, ChannelStats};
pub use status::Status;

/// Largest payload a single UDP datagram can carry (IPv4 limit).
pub const MAX_UDP_PAYLOAD: usize = 65_507;
