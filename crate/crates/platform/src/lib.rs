//! The channel platform runtime: a thread-safe [`ChannelHandler`]
//! facade over pluggable channel components, with TCP, UDP
//! (connection-emulating), and SOAP-over-HTTP transports built in, plus
//! the `channelctl` streaming CLI.
//!
//! Applications create channels by type token through the handler, send
//! `Data` messages to channel IDs, and poll one shared queue for
//! everything the channels receive — switching an application between
//! transports is a matter of changing the type token in its
//! [`ChannelInfo`].

pub mod cli;
mod handler;
mod outgoing;
mod soap;
mod tcp;
mod transport;
mod udp;

pub use chanplat_core::{
    options, Channel, ChannelCallback, ChannelFactory, ChannelHost, ChannelId, ChannelInfo,
    ChannelStats, ChannelType, Endpoint, FactoryRegistry, Message, MessageKind, Status,
    MAX_UDP_PAYLOAD,
};
pub use handler::ChannelHandler;

/// A registry with the six built-in channel types pre-registered.
pub fn builtin_registry() -> FactoryRegistry {
    let mut registry = FactoryRegistry::new();
    tcp::register(&mut registry);
    udp::register(&mut registry);
    soap::register(&mut registry);
    registry
}
