//! Bits shared by the socket-backed transports.

use std::net::SocketAddr;

use chanplat_core::Endpoint;

/// Component lifecycle. Forward-only: `New -> Creating -> Created ->
/// Destroyed`, with `Creating` covering the window in which `create`
/// still holds no lock so a concurrent destroy lands correctly.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Life {
    New,
    Creating,
    Created,
    Destroyed,
}

pub(crate) fn endpoint_from_addr(addr: SocketAddr) -> Endpoint {
    Endpoint::new(addr.ip().to_string(), addr.port()).expect("socket addrs are valid endpoints")
}

/// `(host, port)` pair suitable for `ToSocketAddrs`.
pub(crate) fn addr_pair(endpoint: &Endpoint) -> (String, u16) {
    (endpoint.host().to_string(), endpoint.port())
}
