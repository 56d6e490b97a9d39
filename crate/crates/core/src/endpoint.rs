use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::status::Status;

/// A network address as host text plus a TCP/UDP port.
///
/// The host may be an IPv4/IPv6 literal or a DNS name; it is kept as
/// text and resolved only by the transport that uses it. Port 0 is
/// rejected: it never names a reachable peer and bind addresses must
/// be explicit.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Endpoint {
    host: String,
    port: u16,
}

impl Endpoint {
    pub fn new(host: impl Into<String>, port: u16) -> Result<Endpoint, Status> {
        let host = host.into();
        if host.is_empty() || port == 0 {
            return Err(Status::BAD_INFO);
        }
        Ok(Endpoint { host, port })
    }

    /// Parses `host:port`, with IPv6 hosts in brackets: `[::1]:8080`.
    pub fn parse(text: &str) -> Result<Endpoint, Status> {
        let (host, port_text) = if let Some(rest) = text.strip_prefix('[') {
            let end = rest.find(']').ok_or(Status::BAD_INFO)?;
            let host = &rest[..end];
            let tail = &rest[end + 1..];
            let port = tail.strip_prefix(':').ok_or(Status::BAD_INFO)?;
            (host, port)
        } else {
            let idx = text.rfind(':').ok_or(Status::BAD_INFO)?;
            let host = &text[..idx];
            // An unbracketed host containing ':' is an ambiguous IPv6 form.
            if host.contains(':') {
                return Err(Status::BAD_INFO);
            }
            (host, &text[idx + 1..])
        };
        let port: u16 = port_text.parse().map_err(|_| Status::BAD_INFO)?;
        Endpoint::new(host, port)
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn port(&self) -> u16 {
        self.port
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.host.contains(':') {
            write!(f, "[{}]:{}", self.host, self.port)
        } else {
            write!(f, "{}:{}", self.host, self.port)
        }
    }
}

impl FromStr for Endpoint {
    type Err = Status;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Endpoint::parse(s)
    }
}
