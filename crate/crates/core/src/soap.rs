//! The raw-data SOAP envelope: binary payloads travel base64-encoded
//! inside `Envelope/Body/rawDataMessage/data`.
//!
//! Emission is a fixed byte template so that the same payload always
//! serializes to the same bytes. Parsing is deliberately lenient:
//! element lookup goes by local name, so any namespace prefix and any
//! application URN are accepted, and extra elements or attributes are
//! ignored. Anything structurally broken maps to [`Status::PROTO_ERR`].

use alloc::string::String;
use alloc::vec::Vec;

use crate::base64;
use crate::status::Status;

pub const SOAP_ENV_NS: &str = "http://schemas.xmlsoap.org/soap/envelope/";
pub const SOAP_ENC_NS: &str = "http://schemas.xmlsoap.org/soap/encoding/";
pub const XSI_NS: &str = "http://www.w3.org/1999/XMLSchema-instance";
pub const XSD_NS: &str = "http://www.w3.org/1999/XMLSchema";

/// Serializes `payload` into the raw-data envelope under the
/// application namespace `urn`.
pub fn encode_raw_data_envelope(payload: &[u8], urn: &str) -> Vec<u8> {
    let b64 = base64::encode(payload);
    let mut out = String::with_capacity(b64.len() + 512);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<SOAP-ENV:Envelope");
    out.push_str(" xmlns:SOAP-ENV=\"");
    out.push_str(SOAP_ENV_NS);
    out.push_str("\" xmlns:SOAP-ENC=\"");
    out.push_str(SOAP_ENC_NS);
    out.push_str("\" xmlns:xsi=\"");
    out.push_str(XSI_NS);
    out.push_str("\" xmlns:xsd=\"");
    out.push_str(XSD_NS);
    out.push_str("\" xmlns:ns=\"");
    push_escaped(&mut out, urn);
    out.push_str("\">\n");
    out.push_str("<SOAP-ENV:Body SOAP-ENV:encodingStyle=\"");
    out.push_str(SOAP_ENC_NS);
    out.push_str("\">\n");
    out.push_str("<ns:rawDataMessage>\n");
    out.push_str("<data xsi:type=\"xsd:base64Binary\">");
    out.push_str(&b64);
    out.push_str("</data>\n");
    out.push_str("</ns:rawDataMessage>\n");
    out.push_str("</SOAP-ENV:Body>\n");
    out.push_str("</SOAP-ENV:Envelope>\n");
    out.into_bytes()
}

/// Extracts the payload from a raw-data envelope.
pub fn decode_raw_data_envelope(document: &[u8]) -> Result<Vec<u8>, Status> {
    let text = core::str::from_utf8(document).map_err(|_| Status::PROTO_ERR)?;
    let data_text = find_raw_data_text(text)?;
    base64::decode(&data_text)
}

/// A minimal SOAP 1.1 Fault document for error responses.
pub fn encode_fault(fault_string: &str) -> Vec<u8> {
    let mut out = String::with_capacity(fault_string.len() + 320);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<SOAP-ENV:Envelope xmlns:SOAP-ENV=\"");
    out.push_str(SOAP_ENV_NS);
    out.push_str("\">\n<SOAP-ENV:Body>\n<SOAP-ENV:Fault>\n");
    out.push_str("<faultcode>SOAP-ENV:Client</faultcode>\n");
    out.push_str("<faultstring>");
    push_escaped(&mut out, fault_string);
    out.push_str("</faultstring>\n");
    out.push_str("</SOAP-ENV:Fault>\n</SOAP-ENV:Body>\n</SOAP-ENV:Envelope>\n");
    out.into_bytes()
}

fn push_escaped(out: &mut String, text: &str) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            other => out.push(other),
        }
    }
}

/// Walks the document and returns the text content of the first
/// `data` element sitting on the `Envelope/Body/rawDataMessage/data`
/// local-name chain, where `Envelope` is the document root.
fn find_raw_data_text(text: &str) -> Result<String, Status> {
    const CHAIN: [&str; 4] = ["Envelope", "Body", "rawDataMessage", "data"];

    let mut scanner = xml::Scanner::new(text);
    let mut stack: Vec<&str> = Vec::new();
    let mut found: Option<String> = None;
    // Accumulates direct text of the data element currently open.
    let mut pending: Option<String> = None;

    while let Some(event) = scanner.next_event()? {
        match event {
            xml::Event::Start(name) => {
                let local = xml::local_name(name);
                if stack.is_empty() && local != CHAIN[0] {
                    return Err(Status::PROTO_ERR);
                }
                stack.push(local);
                if found.is_none() && pending.is_none() && on_chain(&stack, &CHAIN) {
                    pending = Some(String::new());
                }
            }
            xml::Event::SelfClosing(name) => {
                let local = xml::local_name(name);
                if stack.is_empty() && local != CHAIN[0] {
                    return Err(Status::PROTO_ERR);
                }
                stack.push(local);
                if found.is_none() && pending.is_none() && on_chain(&stack, &CHAIN) {
                    // <data/> means an empty payload.
                    found = Some(String::new());
                }
                stack.pop();
            }
            xml::Event::End(name) => {
                let local = xml::local_name(name);
                let closing_data = on_chain(&stack, &CHAIN);
                match stack.pop() {
                    Some(open) if open == local => {}
                    _ => return Err(Status::PROTO_ERR),
                }
                if closing_data {
                    if let Some(text) = pending.take() {
                        if found.is_none() {
                            found = Some(text);
                        }
                    }
                }
            }
            xml::Event::Text(t) => {
                if on_chain(&stack, &CHAIN) {
                    if let Some(slot) = pending.as_mut() {
                        slot.push_str(t);
                    }
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(Status::PROTO_ERR);
    }
    found.ok_or(Status::PROTO_ERR)
}

fn on_chain(stack: &[&str], chain: &[&str]) -> bool {
    stack.len() == chain.len() && stack.iter().zip(chain).all(|(a, b)| a == b)
}

mod xml {
    //! Just enough of an XML pull scanner for envelope parsing:
    //! elements, text, comments, CDATA, and processing instructions.
    //! Attributes are validated for quoting and otherwise skipped.

    use crate::status::Status;

    pub enum Event<'a> {
        Start(&'a str),
        End(&'a str),
        SelfClosing(&'a str),
        Text(&'a str),
    }

    pub fn local_name(name: &str) -> &str {
        match name.rfind(':') {
            Some(idx) => &name[idx + 1..],
            None => name,
        }
    }

    pub struct Scanner<'a> {
        text: &'a str,
        pos: usize,
        seen_root: bool,
    }

    impl<'a> Scanner<'a> {
        pub fn new(text: &'a str) -> Scanner<'a> {
            Scanner {
                text,
                pos: 0,
                seen_root: false,
            }
        }

        pub fn next_event(&mut self) -> Result<Option<Event<'a>>, Status> {
            loop {
                let rest = &self.text[self.pos..];
                if rest.is_empty() {
                    return Ok(None);
                }
                if let Some(tail) = rest.strip_prefix("<?") {
                    let end = tail.find("?>").ok_or(Status::PROTO_ERR)?;
                    self.pos += 2 + end + 2;
                    continue;
                }
                if let Some(tail) = rest.strip_prefix("<!--") {
                    let end = tail.find("-->").ok_or(Status::PROTO_ERR)?;
                    self.pos += 4 + end + 3;
                    continue;
                }
                if let Some(tail) = rest.strip_prefix("<![CDATA[") {
                    let end = tail.find("]]>").ok_or(Status::PROTO_ERR)?;
                    let text = &tail[..end];
                    self.pos += 9 + end + 3;
                    return Ok(Some(Event::Text(text)));
                }
                if let Some(tail) = rest.strip_prefix("<!") {
                    // DOCTYPE and friends; skipped without nesting.
                    let end = tail.find('>').ok_or(Status::PROTO_ERR)?;
                    self.pos += 2 + end + 1;
                    continue;
                }
                if let Some(tail) = rest.strip_prefix("</") {
                    let end = tail.find('>').ok_or(Status::PROTO_ERR)?;
                    let name = tail[..end].trim();
                    if name.is_empty() {
                        return Err(Status::PROTO_ERR);
                    }
                    self.pos += 2 + end + 1;
                    return Ok(Some(Event::End(name)));
                }
                if let Some(tail) = rest.strip_prefix('<') {
                    return self.element(tail).map(Some);
                }
                // Text run up to the next tag.
                let end = rest.find('<').unwrap_or(rest.len());
                let text = &rest[..end];
                self.pos += end;
                if text.trim().is_empty() {
                    continue;
                }
                if !self.seen_root {
                    return Err(Status::PROTO_ERR);
                }
                return Ok(Some(Event::Text(text)));
            }
        }

        /// Parses an open tag starting after `<`, honoring quoted
        /// attribute values that may contain `>`.
        fn element(&mut self, tail: &'a str) -> Result<Event<'a>, Status> {
            let bytes = tail.as_bytes();
            let name_end = bytes
                .iter()
                .position(|&b| b.is_ascii_whitespace() || b == b'>' || b == b'/')
                .ok_or(Status::PROTO_ERR)?;
            let name = &tail[..name_end];
            if name.is_empty() {
                return Err(Status::PROTO_ERR);
            }
            let mut i = name_end;
            let mut quote: Option<u8> = None;
            while i < bytes.len() {
                let b = bytes[i];
                match quote {
                    Some(q) => {
                        if b == q {
                            quote = None;
                        }
                    }
                    None => match b {
                        b'"' | b'\'' => quote = Some(b),
                        b'>' => {
                            let self_closing = i > 0 && bytes[i - 1] == b'/';
                            // pos currently sits at '<'.
                            self.pos += 1 + i + 1;
                            self.seen_root = true;
                            return Ok(if self_closing {
                                Event::SelfClosing(name)
                            } else {
                                Event::Start(name)
                            });
                        }
                        _ => {}
                    },
                }
                i += 1;
            }
            Err(Status::PROTO_ERR)
        }
    }
}
