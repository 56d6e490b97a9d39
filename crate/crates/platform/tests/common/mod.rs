//! Helpers shared by the integration suites.

#![allow(dead_code)]

use std::net::{TcpListener, UdpSocket};
use std::time::{Duration, Instant};

use chanplat::{ChannelHandler, ChannelInfo, ChannelType, Endpoint, Message, MessageKind};

/// A currently-free loopback TCP port. Racy in principle; fine for
/// loopback tests that bind immediately after.
pub fn free_tcp_port() -> u16 {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    listener.local_addr().unwrap().port()
}

pub fn free_udp_port() -> u16 {
    let socket = UdpSocket::bind("127.0.0.1:0").unwrap();
    socket.local_addr().unwrap().port()
}

pub fn local(port: u16) -> Endpoint {
    Endpoint::new("127.0.0.1", port).unwrap()
}

pub fn info(channel_type: ChannelType, port: u16) -> ChannelInfo {
    ChannelInfo::new(channel_type, local(port))
}

/// Polls `f` until it yields a value or `timeout` passes.
pub fn wait_for<T>(timeout: Duration, mut f: impl FnMut() -> Option<T>) -> T {
    let deadline = Instant::now() + timeout;
    loop {
        if let Some(v) = f() {
            return v;
        }
        assert!(Instant::now() < deadline, "timed out waiting for condition");
        std::thread::sleep(Duration::from_millis(5));
    }
}

/// Waits for the next message matching `pred`, failing on timeout.
/// Non-matching messages are dropped.
pub fn await_message(
    handler: &ChannelHandler,
    timeout: Duration,
    mut pred: impl FnMut(&Message) -> bool,
) -> Message {
    let deadline = Instant::now() + timeout;
    loop {
        let now = Instant::now();
        assert!(now < deadline, "timed out waiting for message");
        if let Ok(Some(msg)) = handler.wait_message(deadline - now) {
            if pred(&msg) {
                return msg;
            }
        }
    }
}

pub fn await_kind(handler: &ChannelHandler, kind: MessageKind, timeout: Duration) -> Message {
    await_message(handler, timeout, |m| m.kind == kind)
}

/// Collects the concatenated payload of `Data` messages for `id` until
/// `total` bytes arrived or the channel disconnects.
pub fn collect_data(
    handler: &ChannelHandler,
    id: chanplat::ChannelId,
    total: usize,
    timeout: Duration,
) -> Vec<u8> {
    let deadline = Instant::now() + timeout;
    let mut out = Vec::with_capacity(total);
    while out.len() < total {
        let now = Instant::now();
        assert!(now < deadline, "timed out collecting data ({}/{total})", out.len());
        if let Ok(Some(msg)) = handler.wait_message(deadline - now) {
            if msg.channel_id == id && msg.kind == MessageKind::Data {
                out.extend_from_slice(&msg.payload);
            }
        }
    }
    out
}
