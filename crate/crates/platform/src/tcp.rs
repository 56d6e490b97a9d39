//! TCP stream channels: a connecting client channel and an accepting
//! server channel that spawns one child channel per connection.
//!
//! Data keeps stream semantics end to end: reads become `Data` messages
//! whose boundaries mean nothing, writes are drained FIFO with no
//! framing added, so the wire carries exactly the concatenation of the
//! enqueued payloads.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::thread::JoinHandle;
use std::time::Duration;

use chanplat_core::{
    Channel, ChannelHost, ChannelId, ChannelInfo, ChannelStats, FactoryRegistry, Message,
    MessageKind, Status,
};

use crate::outgoing::OutgoingQueue;
use crate::transport::{addr_pair, endpoint_from_addr, Life};

const ACCEPT_POLL: Duration = Duration::from_millis(10);

pub(crate) fn register(registry: &mut FactoryRegistry) {
    registry.register(
        "tcp-client",
        Arc::new(|info, id, host| Ok(StreamChannel::connector(info, id, host)? as Arc<dyn Channel>)),
    );
    registry.register(
        "tcp-server",
        Arc::new(|info, id, host| Ok(TcpServerChannel::build(info, id, host)? as Arc<dyn Channel>)),
    );
}

/// One TCP connection driven as a channel: either a client that
/// connects at `create`, or a server-side child adopted from `accept`.
pub(crate) struct StreamChannel {
    me: Weak<StreamChannel>,
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    life: Mutex<Life>,
    stream: Mutex<Option<Arc<TcpStream>>>,
    outgoing: OutgoingQueue,
    healthy: AtomicBool,
    disconnect_sent: AtomicBool,
    threads: Mutex<Vec<JoinHandle<()>>>,
    /// Connect target; `None` for adopted connections.
    connect_to: Option<(String, u16)>,
    /// Children unregister themselves from the handler when they die;
    /// clients stay registered until the application destroys them.
    release_on_exit: bool,
    parent: Option<Weak<ServerShared>>,
    read_buffer: usize,
    nodelay: bool,
}

impl StreamChannel {
    pub(crate) fn connector(
        info: &ChannelInfo,
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
    ) -> Result<Arc<StreamChannel>, Status> {
        let capacity = info.queue_capacity()?;
        let read_buffer = info.read_buffer()?;
        let nodelay = info.tcp_nodelay()?;
        let connect_to = Some(addr_pair(&info.endpoint));
        Ok(Arc::new_cyclic(|me| StreamChannel {
            me: me.clone(),
            id,
            host,
            life: Mutex::new(Life::New),
            stream: Mutex::new(None),
            outgoing: OutgoingQueue::new(capacity),
            healthy: AtomicBool::new(false),
            disconnect_sent: AtomicBool::new(false),
            threads: Mutex::new(Vec::new()),
            connect_to,
            release_on_exit: false,
            parent: None,
            read_buffer,
            nodelay,
        }))
    }

    fn adopted(
        stream: TcpStream,
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
        parent: &Arc<ServerShared>,
    ) -> Arc<StreamChannel> {
        Arc::new_cyclic(|me| StreamChannel {
            me: me.clone(),
            id,
            host,
            life: Mutex::new(Life::New),
            stream: Mutex::new(Some(Arc::new(stream))),
            outgoing: OutgoingQueue::new(parent.queue_capacity),
            healthy: AtomicBool::new(false),
            disconnect_sent: AtomicBool::new(false),
            threads: Mutex::new(Vec::new()),
            connect_to: None,
            release_on_exit: true,
            parent: Some(Arc::downgrade(parent)),
            read_buffer: parent.read_buffer,
            nodelay: parent.nodelay,
        })
    }

    fn arc(&self) -> Arc<StreamChannel> {
        self.me.upgrade().expect("channels live in an Arc")
    }

    fn spawn_drivers(&self, stream: Arc<TcpStream>) {
        let mut threads = self.threads.lock().unwrap();
        let reader = {
            let me = self.arc();
            let stream = Arc::clone(&stream);
            std::thread::spawn(move || me.read_loop(&stream))
        };
        let writer = {
            let me = self.arc();
            std::thread::spawn(move || me.write_loop(&stream))
        };
        threads.push(reader);
        threads.push(writer);
    }

    fn read_loop(&self, stream: &TcpStream) {
        let mut stream = stream;
        let mut buf = vec![0u8; self.read_buffer];
        loop {
            match stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    self.host
                        .on_channel_message(Message::data(self.id, buf[..n].to_vec()));
                }
            }
        }
        self.connection_down();
    }

    fn write_loop(&self, stream: &TcpStream) {
        let mut stream = stream;
        while let Some(payload) = self.outgoing.pop_blocking() {
            let result = if payload.is_empty() {
                Ok(())
            } else {
                stream.write_all(&payload)
            };
            self.outgoing.complete();
            if result.is_err() {
                // The reader usually notices too; the flag keeps the
                // notification single.
                self.connection_down();
                break;
            }
        }
    }

    /// Teardown when the connection dies under us: mark unhealthy,
    /// notify once (after the reader's final data delivery), drop the
    /// handler registration for children, stop the queue.
    fn connection_down(&self) {
        self.healthy.store(false, Ordering::Release);
        if !self.disconnect_sent.swap(true, Ordering::AcqRel) {
            self.host.on_channel_message(Message::disconnected(self.id));
        }
        if self.release_on_exit {
            self.host.release_child(self.id);
            if let Some(parent) = self.parent.as_ref().and_then(Weak::upgrade) {
                parent.children.lock().unwrap().remove(&self.id.get());
            }
        }
        self.outgoing.stop();
        if let Some(stream) = self.stream.lock().unwrap().as_ref() {
            let _ = stream.shutdown(Shutdown::Both);
        }
    }

    /// `create` for adopted connections; the socket already exists.
    fn start_adopted(&self) -> Status {
        let stream = {
            let mut life = self.life.lock().unwrap();
            if *life != Life::New {
                return Status::CLOSED;
            }
            *life = Life::Created;
            self.healthy.store(true, Ordering::Release);
            Arc::clone(self.stream.lock().unwrap().as_ref().expect("adopted"))
        };
        self.spawn_drivers(stream);
        Status::OK
    }

    fn start_connector(&self) -> Status {
        {
            let mut life = self.life.lock().unwrap();
            if *life != Life::New {
                return Status::CLOSED;
            }
            *life = Life::Creating;
        }
        let target = self.connect_to.clone().expect("connector");
        let stream = match TcpStream::connect(target) {
            Ok(s) => s,
            Err(_) => {
                *self.life.lock().unwrap() = Life::Destroyed;
                return Status::SOCKET_ERR;
            }
        };
        let _ = stream.set_nodelay(self.nodelay);
        let stream = Arc::new(stream);
        {
            let mut life = self.life.lock().unwrap();
            if *life == Life::Destroyed {
                // Destroyed while connecting; do not come back up.
                let _ = stream.shutdown(Shutdown::Both);
                return Status::CLOSED;
            }
            *self.stream.lock().unwrap() = Some(Arc::clone(&stream));
            self.healthy.store(true, Ordering::Release);
            *life = Life::Created;
        }
        self.spawn_drivers(stream);
        Status::OK
    }
}

impl Channel for StreamChannel {
    fn create(&self) -> Status {
        if self.connect_to.is_none() {
            self.start_adopted()
        } else {
            self.start_connector()
        }
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
        // The reader emits the disconnect notification on its way out,
        // after its last data delivery; joining makes destroy return
        // only once that happened.
        let threads: Vec<JoinHandle<()>> = self.threads.lock().unwrap().drain(..).collect();
        for t in threads {
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
        // Accept before the drivers start: an application may react to
        // a child's Connected notification while its reader is still
        // being brought up. Only the terminal state refuses.
        if *self.life.lock().unwrap() == Life::Destroyed {
            return;
        }
        self.outgoing.push(msg.payload);
    }

    fn stats(&self) -> ChannelStats {
        self.outgoing.stats()
    }
}

struct ServerShared {
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    life: Mutex<Life>,
    listener: Mutex<Option<TcpListener>>,
    children: Mutex<HashMap<u64, Arc<StreamChannel>>>,
    stop: AtomicBool,
    accept_thread: Mutex<Option<JoinHandle<()>>>,
    bind_to: (String, u16),
    queue_capacity: usize,
    read_buffer: usize,
    nodelay: bool,
}

/// Listening channel: accepts connections and hands each one to a fresh
/// child [`StreamChannel`] with its own ID.
pub(crate) struct TcpServerChannel {
    shared: Arc<ServerShared>,
}

impl TcpServerChannel {
    pub(crate) fn build(
        info: &ChannelInfo,
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
    ) -> Result<Arc<TcpServerChannel>, Status> {
        Ok(Arc::new(TcpServerChannel {
            shared: Arc::new(ServerShared {
                id,
                host,
                life: Mutex::new(Life::New),
                listener: Mutex::new(None),
                children: Mutex::new(HashMap::new()),
                stop: AtomicBool::new(false),
                accept_thread: Mutex::new(None),
                bind_to: addr_pair(&info.endpoint),
                queue_capacity: info.queue_capacity()?,
                read_buffer: info.read_buffer()?,
                nodelay: info.tcp_nodelay()?,
            }),
        }))
    }
}

impl ServerShared {
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
                    // Keep listening; the application decides what to do.
                    self.host
                        .on_channel_message(Message::error(self.id, Status::SOCKET_ERR));
                    std::thread::sleep(ACCEPT_POLL);
                }
            }
        }
    }

    fn handle_accept(self: &Arc<Self>, stream: TcpStream, peer: std::net::SocketAddr) {
        let _ = stream.set_nonblocking(false);
        let child_id = self.host.allocate_id();
        let child = StreamChannel::adopted(stream, child_id, Arc::clone(&self.host), self);
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
        // Connected must hit the queue before any data from this peer,
        // so the reader starts only afterwards.
        self.host
            .on_channel_message(Message::connected(child_id, endpoint_from_addr(peer)));
        child.start_adopted();
    }
}

impl Channel for TcpServerChannel {
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
        // Listener first so no new connection races teardown.
        self.shared.stop.store(true, Ordering::Release);
        if let Some(t) = self.shared.accept_thread.lock().unwrap().take() {
            let _ = t.join();
        }
        self.shared.listener.lock().unwrap().take();
        let children: Vec<Arc<StreamChannel>> = {
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

    /// Listening channels have no outgoing stream; sends route to the
    /// per-connection children instead.
    fn add_message(&self, _msg: Message) {}
}
