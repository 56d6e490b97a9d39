use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::endpoint::Endpoint;
use crate::status::Status;

/// Names one kind of channel component.
///
/// The six built-in tokens cover the stock transports; anything else is
/// carried verbatim and resolved against the factory registry, so new
/// component types need no change here.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum ChannelType {
    TcpServer,
    TcpClient,
    UdpServer,
    UdpClient,
    SoapServer,
    SoapClient,
    Other(String),
}

impl ChannelType {
    pub const BUILTIN: [ChannelType; 6] = [
        ChannelType::TcpServer,
        ChannelType::TcpClient,
        ChannelType::UdpServer,
        ChannelType::UdpClient,
        ChannelType::SoapServer,
        ChannelType::SoapClient,
    ];

    pub fn name(&self) -> &str {
        match self {
            ChannelType::TcpServer => "tcp-server",
            ChannelType::TcpClient => "tcp-client",
            ChannelType::UdpServer => "udp-server",
            ChannelType::UdpClient => "udp-client",
            ChannelType::SoapServer => "soap-server",
            ChannelType::SoapClient => "soap-client",
            ChannelType::Other(name) => name,
        }
    }

    /// Server-flavored types bind and accept; client-flavored connect.
    pub fn is_server(&self) -> bool {
        matches!(
            self,
            ChannelType::TcpServer | ChannelType::UdpServer | ChannelType::SoapServer
        )
    }

    pub fn is_client(&self) -> bool {
        matches!(
            self,
            ChannelType::TcpClient | ChannelType::UdpClient | ChannelType::SoapClient
        )
    }
}

impl FromStr for ChannelType {
    type Err = Status;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(Status::BAD_INFO);
        }
        Ok(match s {
            "tcp-server" => ChannelType::TcpServer,
            "tcp-client" => ChannelType::TcpClient,
            "udp-server" => ChannelType::UdpServer,
            "udp-client" => ChannelType::UdpClient,
            "soap-server" => ChannelType::SoapServer,
            "soap-client" => ChannelType::SoapClient,
            other => ChannelType::Other(other.to_owned()),
        })
    }
}

impl fmt::Display for ChannelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Option keys understood by the stock transports. Anything else in a
/// [`ChannelInfo`] is rejected at channel creation.
pub mod options {
    /// Outgoing queue capacity in messages (default 1024).
    pub const QUEUE_CAPACITY: &str = "queue_capacity";
    /// Seconds a UDP peer may stay silent before its emulated
    /// connection is dropped; 0 disables expiry (default 60).
    pub const IDLE_TIMEOUT: &str = "idle_timeout";
    /// Application namespace URN placed on the SOAP envelope.
    pub const SOAP_URN: &str = "soap_urn";
    /// Request path for SOAP-over-HTTP exchanges (default "/").
    pub const HTTP_PATH: &str = "http_path";
    /// Milliseconds a SOAP server waits for the application to queue a
    /// reply before answering with an empty data element (default 100).
    pub const SOAP_REPLY_WAIT: &str = "soap_reply_wait";
    /// TCP read buffer size in bytes (default 65536).
    pub const READ_BUFFER: &str = "read_buffer";
    /// Whether to set TCP_NODELAY on stream sockets (default true).
    pub const TCP_NODELAY: &str = "tcp_nodelay";

    pub const KNOWN: [&str; 7] = [
        QUEUE_CAPACITY,
        IDLE_TIMEOUT,
        SOAP_URN,
        HTTP_PATH,
        SOAP_REPLY_WAIT,
        READ_BUFFER,
        TCP_NODELAY,
    ];
}

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;
pub const DEFAULT_IDLE_TIMEOUT_SECS: u64 = 60;
pub const DEFAULT_SOAP_URN: &str = "urn:simple-calc";
pub const DEFAULT_HTTP_PATH: &str = "/";
pub const DEFAULT_SOAP_REPLY_WAIT_MS: u64 = 100;
pub const DEFAULT_READ_BUFFER: usize = 64 * 1024;

/// Creation descriptor for one channel: the component type, the bind or
/// connect address, and free-form `key=value` options.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChannelInfo {
    pub channel_type: ChannelType,
    pub endpoint: Endpoint,
    options: BTreeMap<String, String>,
}

impl ChannelInfo {
    pub fn new(channel_type: ChannelType, endpoint: Endpoint) -> ChannelInfo {
        ChannelInfo {
            channel_type,
            endpoint,
            options: BTreeMap::new(),
        }
    }

    pub fn with_option(mut self, key: impl Into<String>, value: impl Into<String>) -> ChannelInfo {
        self.options.insert(key.into(), value.into());
        self
    }

    pub fn set_option(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.options.insert(key.into(), value.into());
    }

    pub fn option(&self, key: &str) -> Option<&str> {
        self.options.get(key).map(String::as_str)
    }

    pub fn has_option(&self, key: &str) -> bool {
        self.options.contains_key(key)
    }

    /// Checks option keys against the known set and option values for
    /// parseability. Custom channel types skip the key check since their
    /// components define their own options.
    pub fn validate(&self) -> Result<(), Status> {
        if matches!(self.channel_type, ChannelType::Other(_)) {
            return Ok(());
        }
        for key in self.options.keys() {
            if !options::KNOWN.contains(&key.as_str()) {
                return Err(Status::BAD_INFO);
            }
        }
        self.queue_capacity()?;
        self.idle_timeout_secs()?;
        self.soap_reply_wait_ms()?;
        self.read_buffer()?;
        self.tcp_nodelay()?;
        if !self.http_path().starts_with('/') {
            return Err(Status::BAD_INFO);
        }
        Ok(())
    }

    pub fn queue_capacity(&self) -> Result<usize, Status> {
        match self.option(options::QUEUE_CAPACITY) {
            None => Ok(DEFAULT_QUEUE_CAPACITY),
            Some(v) => match v.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(Status::BAD_INFO),
            },
        }
    }

    pub fn idle_timeout_secs(&self) -> Result<u64, Status> {
        match self.option(options::IDLE_TIMEOUT) {
            None => Ok(DEFAULT_IDLE_TIMEOUT_SECS),
            Some(v) => v.parse::<u64>().map_err(|_| Status::BAD_INFO),
        }
    }

    pub fn soap_urn(&self) -> &str {
        self.option(options::SOAP_URN).unwrap_or(DEFAULT_SOAP_URN)
    }

    pub fn http_path(&self) -> &str {
        self.option(options::HTTP_PATH).unwrap_or(DEFAULT_HTTP_PATH)
    }

    pub fn soap_reply_wait_ms(&self) -> Result<u64, Status> {
        match self.option(options::SOAP_REPLY_WAIT) {
            None => Ok(DEFAULT_SOAP_REPLY_WAIT_MS),
            Some(v) => v.parse::<u64>().map_err(|_| Status::BAD_INFO),
        }
    }

    pub fn read_buffer(&self) -> Result<usize, Status> {
        match self.option(options::READ_BUFFER) {
            None => Ok(DEFAULT_READ_BUFFER),
            Some(v) => match v.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(Status::BAD_INFO),
            },
        }
    }

    pub fn tcp_nodelay(&self) -> Result<bool, Status> {
        match self.option(options::TCP_NODELAY) {
            None => Ok(true),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(_) => Err(Status::BAD_INFO),
        }
    }
}
