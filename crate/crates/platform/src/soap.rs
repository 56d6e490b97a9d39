//! SOAP channels: binary payloads ride base64-encoded raw-data
//! envelopes over HTTP/1.1 POST exchanges on persistent connections.
//!
//! The client serializes requests per channel and maps each response
//! envelope back to a `Data` message. The server spawns one child
//! channel per accepted connection (as the TCP server does); a request
//! enqueues its payload as `Data` on the child, and the response
//! carries whatever the application has queued on that child by the end
//! of the request's handling turn, or an empty data element otherwise.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::thread::JoinHandle;
use std::time::Duration;

use chanplat_core::http::{frame_request, frame_response, HttpMessage, HttpParser, ParseError};
use chanplat_core::{
    soap, Channel, ChannelHost, ChannelId, ChannelInfo, ChannelStats, FactoryRegistry, Message,
    MessageKind, Status,
};

use crate::outgoing::OutgoingQueue;
use crate::transport::{addr_pair, endpoint_from_addr, Life};

const ACCEPT_POLL: Duration = Duration::from_millis(10);
const IO_CHUNK: usize = 16 * 1024;

pub(crate) fn register(registry: &mut FactoryRegistry) {
    registry.register(
        "soap-client",
        Arc::new(|info, id, host| Ok(SoapClientChannel::build(info, id, host)? as Arc<dyn Channel>)),
    );
    registry.register(
        "soap-server",
        Arc::new(|info, id, host| Ok(SoapServerChannel::build(info, id, host)? as Arc<dyn Channel>)),
    );
}

/// Client channel: one persistent connection, one in-flight request at
/// a time, responses decoded back into the incoming queue.
pub(crate) struct SoapClientChannel {
    me: Weak<SoapClientChannel>,
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    life: Mutex<Life>,
    stream: Mutex<Option<Arc<TcpStream>>>,
    outgoing: OutgoingQueue,
    healthy: AtomicBool,
    disconnect_sent: AtomicBool,
    worker: Mutex<Option<JoinHandle<()>>>,
    target: (String, u16),
    host_header: String,
    path: String,
    urn: String,
}

impl SoapClientChannel {
    pub(crate) fn build(
        info: &ChannelInfo,
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
    ) -> Result<Arc<SoapClientChannel>, Status> {
        let capacity = info.queue_capacity()?;
        let path = info.http_path().to_string();
        let urn = info.soap_urn().to_string();
        let host_header = info.endpoint.to_string();
        let target = addr_pair(&info.endpoint);
        Ok(Arc::new_cyclic(|me| SoapClientChannel {
            me: me.clone(),
            id,
            host,
            life: Mutex::new(Life::New),
            stream: Mutex::new(None),
            outgoing: OutgoingQueue::new(capacity),
            healthy: AtomicBool::new(false),
            disconnect_sent: AtomicBool::new(false),
            worker: Mutex::new(None),
            target,
            host_header,
            path,
            urn,
        }))
    }

    /// Pops payloads and runs one POST round trip per payload. A
    /// payload counts as pending until its response has been read, so a
    /// drained queue means every request was answered.
    fn worker_loop(&self, stream: Arc<TcpStream>) {
        let mut parser = HttpParser::new();
        let mut buf = vec![0u8; IO_CHUNK];
        while let Some(payload) = self.outgoing.pop_blocking() {
            let envelope = soap::encode_raw_data_envelope(&payload, &self.urn);
            let request = frame_request(&envelope, &self.host_header, &self.path);
            if (&*stream).write_all(&request).is_err() {
                self.outgoing.complete();
                self.transport_failed();
                break;
            }
            let response = loop {
                match parser.next_message() {
                    Ok(Some(msg)) => break Some(msg),
                    Ok(None) => match (&*stream).read(&mut buf) {
                        Ok(0) | Err(_) => break None,
                        Ok(n) => parser.feed(&buf[..n]),
                    },
                    Err(_) => break None,
                }
            };
            self.outgoing.complete();
            match response {
                None => {
                    self.transport_failed();
                    break;
                }
                Some(resp) => self.handle_response(resp),
            }
        }
    }

    fn handle_response(&self, response: HttpMessage) {
        let code = response.response_status().unwrap_or(0);
        if code >= 400 {
            // The exchange failed but the connection is intact; the
            // channel stays usable.
            self.host
                .on_channel_message(Message::error(self.id, Status::PROTO_ERR));
            return;
        }
        if response.body.is_empty() {
            return;
        }
        match soap::decode_raw_data_envelope(&response.body) {
            Ok(payload) => {
                self.host
                    .on_channel_message(Message::data(self.id, payload));
            }
            Err(status) => {
                self.host.on_channel_message(Message::error(self.id, status));
            }
        }
    }

    fn transport_failed(&self) {
        self.healthy.store(false, Ordering::Release);
        if *self.life.lock().unwrap() == Life::Destroyed {
            // Normal teardown; destroy() emits the disconnect.
            return;
        }
        self.host
            .on_channel_message(Message::error(self.id, Status::SOCKET_ERR));
        if !self.disconnect_sent.swap(true, Ordering::AcqRel) {
            self.host.on_channel_message(Message::disconnected(self.id));
        }
        self.outgoing.stop();
    }
}

impl Channel for SoapClientChannel {
    fn create(&self) -> Status {
        {
            let mut life = self.life.lock().unwrap();
            if *life != Life::New {
                return Status::CLOSED;
            }
            *life = Life::Creating;
        }
        let stream = match TcpStream::connect(self.target.clone()) {
            Ok(s) => s,
            Err(_) => {
                *self.life.lock().unwrap() = Life::Destroyed;
                return Status::SOCKET_ERR;
            }
        };
        let _ = stream.set_nodelay(true);
        let stream = Arc::new(stream);
        {
            let mut life = self.life.lock().unwrap();
            if *life == Life::Destroyed {
                let _ = stream.shutdown(Shutdown::Both);
                return Status::CLOSED;
            }
            *self.stream.lock().unwrap() = Some(Arc::clone(&stream));
            self.healthy.store(true, Ordering::Release);
            *life = Life::Created;
        }
        let me = self.me.upgrade().expect("channels live in an Arc");
        let worker = std::thread::spawn(move || me.worker_loop(Arc::clone(&stream)));
        *self.worker.lock().unwrap() = Some(worker);
        Status::OK
    }

    fn destroy(&self) -> Status {
        let was_created = {
            let mut life = self.life.lock().unwrap();
            if *life == Life::Destroyed {
                return Status::OK;
            }
            let was = *life == Life::Created;
            *life = Life::Destroyed;
            was
        };
        self.outgoing.stop();
        if let Some(stream) = self.stream.lock().unwrap().as_ref() {
            let _ = stream.shutdown(Shutdown::Both);
        }
        if let Some(t) = self.worker.lock().unwrap().take() {
            let _ = t.join();
        }
        self.healthy.store(false, Ordering::Release);
        if was_created && !self.disconnect_sent.swap(true, Ordering::AcqRel) {
            self.host.on_channel_message(Message::disconnected(self.id));
        }
        Status::OK
    }

    fn status(&self) -> Status {
        match *self.life.lock().unwrap() {
            Life::New | Life::Creating | Life::Destroyed => Status::CLOSED,
            Life::Created => {
                if self.healthy.load(Ordering::Acquire) {
                    Status::OK
                } else {
                    Status::SOCKET_ERR
                }
            }
        }
    }

    fn add_message(&self, msg: Message) {
        if msg.kind != MessageKind::Data {
            return;
        }
        if *self.life.lock().unwrap() == Life::Destroyed {
            return;
        }
        self.outgoing.push(msg.payload);
    }

    fn stats(&self) -> ChannelStats {
        self.outgoing.stats()
    }
}

struct SoapServerShared {
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    life: Mutex<Life>,
    listener: Mutex<Option<TcpListener>>,
    children: Mutex<HashMap<u64, Arc<SoapChildChannel>>>,
    stop: AtomicBool,
    accept_thread: Mutex<Option<JoinHandle<()>>>,
    bind_to: (String, u16),
    queue_capacity: usize,
    urn: String,
    path: String,
    reply_wait: Duration,
}

/// Accepting SOAP channel; each connection becomes a child channel.
pub(crate) struct SoapServerChannel {
    shared: Arc<SoapServerShared>,
}

impl SoapServerChannel {
    pub(crate) fn build(
        info: &ChannelInfo,
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
    ) -> Result<Arc<SoapServerChannel>, Status> {
        Ok(Arc::new(SoapServerChannel {
            shared: Arc::new(SoapServerShared {
                id,
                host,
                life: Mutex::new(Life::New),
                listener: Mutex::new(None),
                children: Mutex::new(HashMap::new()),
                stop: AtomicBool::new(false),
                accept_thread: Mutex::new(None),
                bind_to: addr_pair(&info.endpoint),
                queue_capacity: info.queue_capacity()?,
                urn: info.soap_urn().to_string(),
                path: info.http_path().to_string(),
                reply_wait: Duration::from_millis(info.soap_reply_wait_ms()?),
            }),
        }))
    }
}

impl SoapServerShared {
    fn accept_loop(self: Arc<Self>, listener: TcpListener) {
        while !self.stop.load(Ordering::Acquire) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    if self.stop.load(Ordering::Acquire) {
                        break;
                    }
                    self.handle_accept(stream, peer);
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    std::thread::sleep(ACCEPT_POLL);
                }
                Err(_) => {
                    self.host
                        .on_channel_message(Message::error(self.id, Status::SOCKET_ERR));
                    std::thread::sleep(ACCEPT_POLL);
                }
            }
        }
    }

    fn handle_accept(self: &Arc<Self>, stream: TcpStream, peer: std::net::SocketAddr) {
        let _ = stream.set_nonblocking(false);
        let _ = stream.set_nodelay(true);
        let child_id = self.host.allocate_id();
        let child = SoapChildChannel::build(stream, child_id, self);
        if self
            .host
            .adopt_child(child_id, Arc::clone(&child) as Arc<dyn Channel>)
            .is_error()
        {
            return;
        }
        self.children
            .lock()
            .unwrap()
            .insert(child_id.get(), Arc::clone(&child));
        self.host
            .on_channel_message(Message::connected(child_id, endpoint_from_addr(peer)));
        child.create();
    }
}

impl Channel for SoapServerChannel {
    fn create(&self) -> Status {
        {
            let mut life = self.shared.life.lock().unwrap();
            if *life != Life::New {
                return Status::CLOSED;
            }
            *life = Life::Creating;
        }
        let listener = match TcpListener::bind(self.shared.bind_to.clone())
            .and_then(|l| l.set_nonblocking(true).map(|_| l))
        {
            Ok(l) => l,
            Err(_) => {
                *self.shared.life.lock().unwrap() = Life::Destroyed;
                return Status::SOCKET_ERR;
            }
        };
        let accept_listener = match listener.try_clone() {
            Ok(l) => l,
            Err(_) => {
                *self.shared.life.lock().unwrap() = Life::Destroyed;
                return Status::SOCKET_ERR;
            }
        };
        *self.shared.listener.lock().unwrap() = Some(listener);
        let thread = {
            let shared = Arc::clone(&self.shared);
            std::thread::spawn(move || shared.accept_loop(accept_listener))
        };
        *self.shared.accept_thread.lock().unwrap() = Some(thread);
        *self.shared.life.lock().unwrap() = Life::Created;
        Status::OK
    }

    fn destroy(&self) -> Status {
        {
            let mut life = self.shared.life.lock().unwrap();
            if *life == Life::Destroyed {
                return Status::OK;
            }
            *life = Life::Destroyed;
        }
        self.shared.stop.store(true, Ordering::Release);
        if let Some(t) = self.shared.accept_thread.lock().unwrap().take() {
            let _ = t.join();
        }
        self.shared.listener.lock().unwrap().take();
        let children: Vec<Arc<SoapChildChannel>> = {
            let mut map = self.shared.children.lock().unwrap();
            map.drain().map(|(_, c)| c).collect()
        };
        for child in children {
            child.destroy();
        }
        Status::OK
    }

    fn status(&self) -> Status {
        match *self.shared.life.lock().unwrap() {
            Life::New | Life::Creating | Life::Destroyed => Status::CLOSED,
            Life::Created => Status::OK,
        }
    }

    fn add_message(&self, _msg: Message) {}
}

/// One accepted SOAP connection. Its outgoing queue holds the reply
/// payloads the application wants carried in response envelopes.
struct SoapChildChannel {
    me: Weak<SoapChildChannel>,
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    life: Mutex<Life>,
    stream: Mutex<Option<Arc<TcpStream>>>,
    outgoing: OutgoingQueue,
    healthy: AtomicBool,
    disconnect_sent: AtomicBool,
    conn_thread: Mutex<Option<JoinHandle<()>>>,
    parent: Weak<SoapServerShared>,
    urn: String,
    path: String,
    reply_wait: Duration,
}

impl SoapChildChannel {
    fn build(
        stream: TcpStream,
        id: ChannelId,
        parent: &Arc<SoapServerShared>,
    ) -> Arc<SoapChildChannel> {
        Arc::new_cyclic(|me| SoapChildChannel {
            me: me.clone(),
            id,
            host: Arc::clone(&parent.host),
            life: Mutex::new(Life::New),
            stream: Mutex::new(Some(Arc::new(stream))),
            outgoing: OutgoingQueue::new(parent.queue_capacity),
            healthy: AtomicBool::new(false),
            disconnect_sent: AtomicBool::new(false),
            conn_thread: Mutex::new(None),
            parent: Arc::downgrade(parent),
            urn: parent.urn.clone(),
            path: parent.path.clone(),
            reply_wait: parent.reply_wait,
        })
    }

    /// Reads requests off the connection, strictly sequentially, and
    /// writes one response each.
    fn conn_loop(&self, stream: Arc<TcpStream>) {
        let mut parser = HttpParser::new();
        let mut buf = vec![0u8; IO_CHUNK];
        'conn: loop {
            let request = loop {
                match parser.next_message() {
                    Ok(Some(msg)) => break msg,
                    Ok(None) => match (&*stream).read(&mut buf) {
                        Ok(0) | Err(_) => break 'conn,
                        Ok(n) => parser.feed(&buf[..n]),
                    },
                    Err(ParseError::UnsupportedChunked) => {
                        let _ = (&*stream)
                            .write_all(&frame_response(501, "Not Implemented", b""));
                        break 'conn;
                    }
                    Err(_) => {
                        // Framing is broken; answer once and hang up.
                        let _ = (&*stream).write_all(&frame_response(
                            400,
                            "Bad Request",
                            &soap::encode_fault("malformed HTTP request"),
                        ));
                        break 'conn;
                    }
                }
            };
            let response = self.dispatch(&request);
            if (&*stream).write_all(&response).is_err() {
                break;
            }
        }
        self.connection_down();
    }

    fn dispatch(&self, request: &HttpMessage) -> Vec<u8> {
        if request.method() != Some("POST") {
            return frame_response(405, "Method Not Allowed", b"");
        }
        if request.target() != Some(self.path.as_str()) {
            return frame_response(404, "Not Found", b"");
        }
        match soap::decode_raw_data_envelope(&request.body) {
            Err(_) => frame_response(
                400,
                "Bad Request",
                &soap::encode_fault("request body is not a raw data envelope"),
            ),
            Ok(payload) => {
                self.host
                    .on_channel_message(Message::data(self.id, payload));
                // Carry whatever the application queues on this child
                // within the handling turn; otherwise an empty payload.
                let reply = self.outgoing.pop_timeout(self.reply_wait);
                if reply.is_some() {
                    self.outgoing.complete();
                }
                let body =
                    soap::encode_raw_data_envelope(&reply.unwrap_or_default(), &self.urn);
                frame_response(200, "OK", &body)
            }
        }
    }

    fn connection_down(&self) {
        self.healthy.store(false, Ordering::Release);
        if !self.disconnect_sent.swap(true, Ordering::AcqRel) {
            self.host.on_channel_message(Message::disconnected(self.id));
        }
        self.host.release_child(self.id);
        if let Some(parent) = self.parent.upgrade() {
            parent.children.lock().unwrap().remove(&self.id.get());
        }
        self.outgoing.stop();
        if let Some(stream) = self.stream.lock().unwrap().as_ref() {
            let _ = stream.shutdown(Shutdown::Both);
        }
    }
}

impl Channel for SoapChildChannel {
    fn create(&self) -> Status {
        let stream = {
            let mut life = self.life.lock().unwrap();
            if *life != Life::New {
                return Status::CLOSED;
            }
            *life = Life::Created;
            self.healthy.store(true, Ordering::Release);
            Arc::clone(self.stream.lock().unwrap().as_ref().expect("adopted"))
        };
        let me = self.me.upgrade().expect("channels live in an Arc");
        let thread = std::thread::spawn(move || me.conn_loop(Arc::clone(&stream)));
        *self.conn_thread.lock().unwrap() = Some(thread);
        Status::OK
    }

    fn destroy(&self) -> Status {
        {
            let mut life = self.life.lock().unwrap();
            if *life == Life::Destroyed {
                return Status::OK;
            }
            *life = Life::Destroyed;
        }
        self.outgoing.stop();
        if let Some(stream) = self.stream.lock().unwrap().as_ref() {
            let _ = stream.shutdown(Shutdown::Both);
        }
        if let Some(t) = self.conn_thread.lock().unwrap().take() {
            let _ = t.join();
        }
        self.healthy.store(false, Ordering::Release);
        Status::OK
    }

    fn status(&self) -> Status {
        match *self.life.lock().unwrap() {
            Life::New | Life::Creating | Life::Destroyed => Status::CLOSED,
            Life::Created => {
                if self.healthy.load(Ordering::Acquire) {
                    Status::OK
                } else {
                    Status::SOCKET_ERR
                }
            }
        }
    }

    fn add_message(&self, msg: Message) {
        if msg.kind != MessageKind::Data {
            return;
        }
        if *self.life.lock().unwrap() == Life::Destroyed {
            return;
        }
        self.outgoing.push(msg.payload);
    }

    fn stats(&self) -> ChannelStats {
        self.outgoing.stats()
    }
}
