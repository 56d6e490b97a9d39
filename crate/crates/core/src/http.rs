//! Minimal HTTP/1.1 message framing for the SOAP-over-HTTP transport:
//! POST requests and fixed-length responses, parsed incrementally so a
//! connection can feed bytes in arbitrary chunks.
//!
//! Bodies are delimited by `Content-Length` only. Chunked transfer
//! encoding is reported as [`ParseError::UnsupportedChunked`] so a
//! server can answer 501 instead of silently desynchronizing.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::status::Status;

/// Parsed start line.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StartLine {
    Request {
        method: String,
        target: String,
        version: String,
    },
    Response {
        version: String,
        status: u16,
        reason: String,
    },
}

/// One HTTP message: start line, headers, body.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HttpMessage {
    pub start: StartLine,
    headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpMessage {
    /// Case-insensitive header lookup; first match wins.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn headers(&self) -> &[(String, String)] {
        &self.headers
    }

    pub fn is_request(&self) -> bool {
        matches!(self.start, StartLine::Request { .. })
    }

    pub fn method(&self) -> Option<&str> {
        match &self.start {
            StartLine::Request { method, .. } => Some(method),
            StartLine::Response { .. } => None,
        }
    }

    pub fn target(&self) -> Option<&str> {
        match &self.start {
            StartLine::Request { target, .. } => Some(target),
            StartLine::Response { .. } => None,
        }
    }

    pub fn response_status(&self) -> Option<u16> {
        match &self.start {
            StartLine::Response { status, .. } => Some(*status),
            StartLine::Request { .. } => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParseError {
    /// Broken start line, header syntax, or length field.
    Malformed,
    /// `Transfer-Encoding: chunked` was announced.
    UnsupportedChunked,
    /// Headers or declared body exceed the sanity limits.
    TooLarge,
}

impl ParseError {
    pub fn status(self) -> Status {
        Status::PROTO_ERR
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Malformed => f.write_str("malformed HTTP message"),
            ParseError::UnsupportedChunked => f.write_str("chunked transfer encoding unsupported"),
            ParseError::TooLarge => f.write_str("HTTP message exceeds size limits"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

const MAX_HEADER_BYTES: usize = 64 * 1024;
const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

enum ParseState {
    Headers,
    Body { message: HttpMessage, remaining: usize },
}

/// Incremental parser for one direction of a connection.
///
/// Feed bytes as they arrive, then drain completed messages with
/// [`next_message`](HttpParser::next_message). Surplus bytes stay
/// buffered, so pipelined sequential messages parse naturally. The
/// result never depends on how the byte stream was chunked.
pub struct HttpParser {
    buffer: Vec<u8>,
    state: ParseState,
}

impl Default for HttpParser {
    fn default() -> Self {
        HttpParser::new()
    }
}

impl HttpParser {
    pub fn new() -> HttpParser {
        HttpParser {
            buffer: Vec::new(),
            state: ParseState::Headers,
        }
    }

    pub fn feed(&mut self, bytes: &[u8]) {
        self.buffer.extend_from_slice(bytes);
    }

    /// Returns the next complete message, or `None` when more bytes are
    /// needed. After an error the parser is poisoned; callers should
    /// drop the connection.
    pub fn next_message(&mut self) -> Result<Option<HttpMessage>, ParseError> {
        loop {
            match &mut self.state {
                ParseState::Headers => {
                    self.skip_leading_crlf();
                    let Some(header_end) = find_double_crlf(&self.buffer) else {
                        if self.buffer.len() > MAX_HEADER_BYTES {
                            return Err(ParseError::TooLarge);
                        }
                        return Ok(None);
                    };
                    let head = &self.buffer[..header_end];
                    if head.len() > MAX_HEADER_BYTES {
                        return Err(ParseError::TooLarge);
                    }
                    let message = parse_head(head)?;
                    let remaining = body_length(&message)?;
                    self.buffer.drain(..header_end + 4);
                    self.state = ParseState::Body { message, remaining };
                }
                ParseState::Body { remaining, .. } => {
                    if self.buffer.len() < *remaining {
                        return Ok(None);
                    }
                    let needed = *remaining;
                    let body: Vec<u8> = self.buffer.drain(..needed).collect();
                    let state = core::mem::replace(&mut self.state, ParseState::Headers);
                    let ParseState::Body { mut message, .. } = state else {
                        unreachable!()
                    };
                    message.body = body;
                    return Ok(Some(message));
                }
            }
        }
    }

    fn skip_leading_crlf(&mut self) {
        let mut n = 0;
        while self.buffer[n..].starts_with(b"\r\n") {
            n += 2;
        }
        if n > 0 {
            self.buffer.drain(..n);
        }
    }
}

fn find_double_crlf(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn parse_head(head: &[u8]) -> Result<HttpMessage, ParseError> {
    let text = core::str::from_utf8(head).map_err(|_| ParseError::Malformed)?;
    let mut lines = text.split("\r\n");
    let start_line = lines.next().ok_or(ParseError::Malformed)?;
    let start = parse_start_line(start_line)?;

    let mut headers = Vec::new();
    for line in lines {
        let (name, value) = line.split_once(':').ok_or(ParseError::Malformed)?;
        if name.is_empty() || name.contains(' ') {
            return Err(ParseError::Malformed);
        }
        headers.push((name.to_string(), value.trim().to_string()));
    }
    Ok(HttpMessage {
        start,
        headers,
        body: Vec::new(),
    })
}

fn parse_start_line(line: &str) -> Result<StartLine, ParseError> {
    if let Some(rest) = line.strip_prefix("HTTP/") {
        // Response: HTTP/1.1 200 OK
        let mut parts = rest.splitn(3, ' ');
        let version = parts.next().ok_or(ParseError::Malformed)?;
        let status: u16 = parts
            .next()
            .ok_or(ParseError::Malformed)?
            .parse()
            .map_err(|_| ParseError::Malformed)?;
        let reason = parts.next().unwrap_or("");
        if version.is_empty() || !(100..=599).contains(&status) {
            return Err(ParseError::Malformed);
        }
        return Ok(StartLine::Response {
            version: version.to_string(),
            status,
            reason: reason.to_string(),
        });
    }
    // Request: POST /path HTTP/1.1
    let mut parts = line.split(' ');
    let method = parts.next().ok_or(ParseError::Malformed)?;
    let target = parts.next().ok_or(ParseError::Malformed)?;
    let version = parts.next().ok_or(ParseError::Malformed)?;
    if parts.next().is_some()
        || method.is_empty()
        || target.is_empty()
        || !method.bytes().all(|b| b.is_ascii_uppercase())
        || !version.starts_with("HTTP/")
    {
        return Err(ParseError::Malformed);
    }
    Ok(StartLine::Request {
        method: method.to_string(),
        target: target.to_string(),
        version: version.to_string(),
    })
}

fn body_length(message: &HttpMessage) -> Result<usize, ParseError> {
    if let Some(te) = message.header("Transfer-Encoding") {
        if te.to_ascii_lowercase().contains("chunked") {
            return Err(ParseError::UnsupportedChunked);
        }
        return Err(ParseError::Malformed);
    }
    match message.header("Content-Length") {
        None => Ok(0),
        Some(v) => {
            let n: usize = v.parse().map_err(|_| ParseError::Malformed)?;
            if n > MAX_BODY_BYTES {
                return Err(ParseError::TooLarge);
            }
            Ok(n)
        }
    }
}

/// Frames a SOAP POST request. `Content-Length` always equals the body
/// length; header order is fixed so emission is deterministic.
pub fn frame_request(body: &[u8], host: &str, path: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 160);
    out.extend_from_slice(b"POST ");
    out.extend_from_slice(path.as_bytes());
    out.extend_from_slice(b" HTTP/1.1\r\nHost: ");
    out.extend_from_slice(host.as_bytes());
    out.extend_from_slice(b"\r\nContent-Type: text/xml; charset=utf-8\r\nSOAPAction: \"\"\r\nContent-Length: ");
    out.extend_from_slice(body.len().to_string().as_bytes());
    out.extend_from_slice(b"\r\n\r\n");
    out.extend_from_slice(body);
    out
}

/// Frames a response with a fixed header set.
pub fn frame_response(status: u16, reason: &str, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 128);
    out.extend_from_slice(b"HTTP/1.1 ");
    out.extend_from_slice(status.to_string().as_bytes());
    out.push(b' ');
    out.extend_from_slice(reason.as_bytes());
    out.extend_from_slice(b"\r\nContent-Type: text/xml; charset=utf-8\r\nContent-Length: ");
    out.extend_from_slice(body.len().to_string().as_bytes());
    out.extend_from_slice(b"\r\n\r\n");
    out.extend_from_slice(body);
    out
}
