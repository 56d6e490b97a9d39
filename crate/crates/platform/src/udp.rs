//! UDP channels with connection emulation.
//!
//! The client channel pins one remote endpoint at creation. The server
//! channel demultiplexes datagrams by source `(IP, port)`: the first
//! datagram from a new source spawns a child channel (fresh ID,
//! `Connected` notification, then the datagram as `Data`), later ones
//! route to the existing child, and peers silent past the idle timeout
//! are expired with a `Disconnected` notification. One datagram is one
//! `Data` message; boundaries are preserved in both directions.

use std::collections::HashMap;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chanplat_core::peer::{PeerLookup, PeerTable};
use chanplat_core::{
    Channel, ChannelHost, ChannelId, ChannelInfo, ChannelStats, FactoryRegistry, Message,
    MessageKind, Status, MAX_UDP_PAYLOAD,
};

use crate::outgoing::OutgoingQueue;
use crate::transport::{addr_pair, endpoint_from_addr, Life};

const RECV_POLL: Duration = Duration::from_millis(20);

pub(crate) fn register(registry: &mut FactoryRegistry) {
    registry.register(
        "udp-client",
        Arc::new(|info, id, host| Ok(UdpClientChannel::build(info, id, host)? as Arc<dyn Channel>)),
    );
    registry.register(
        "udp-server",
        Arc::new(|info, id, host| Ok(UdpServerChannel::build(info, id, host)? as Arc<dyn Channel>)),
    );
}

fn resolve(target: &(String, u16)) -> Result<SocketAddr, Status> {
    (target.0.as_str(), target.1)
        .to_socket_addrs()
        .ok()
        .and_then(|mut addrs| addrs.next())
        .ok_or(Status::BAD_INFO)
}

/// Sends one datagram per queued payload, refusing payloads no datagram
/// can carry.
fn drain_to_datagrams(
    queue: &OutgoingQueue,
    socket: &UdpSocket,
    remote: Option<SocketAddr>,
    id: ChannelId,
    host: &Arc<dyn ChannelHost>,
) {
    while let Some(payload) = queue.pop_blocking() {
        let result = if payload.len() > MAX_UDP_PAYLOAD {
            Err(())
        } else {
            let sent = match remote {
                Some(addr) => socket.send_to(&payload, addr),
                None => socket.send(&payload),
            };
            sent.map(|_| ()).map_err(|_| ())
        };
        queue.complete();
        if result.is_err() {
            host.on_channel_message(Message::error(id, Status::SOCKET_ERR));
        }
    }
}

/// Datagram channel talking to one fixed remote endpoint.
pub(crate) struct UdpClientChannel {
    me: Weak<UdpClientChannel>,
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    life: Mutex<Life>,
    socket: Mutex<Option<Arc<UdpSocket>>>,
    outgoing: OutgoingQueue,
    stop: AtomicBool,
    disconnect_sent: AtomicBool,
    threads: Mutex<Vec<JoinHandle<()>>>,
    remote: (String, u16),
}

impl UdpClientChannel {
    pub(crate) fn build(
        info: &ChannelInfo,
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
    ) -> Result<Arc<UdpClientChannel>, Status> {
        let capacity = info.queue_capacity()?;
        let remote = addr_pair(&info.endpoint);
        Ok(Arc::new_cyclic(|me| UdpClientChannel {
            me: me.clone(),
            id,
            host,
            life: Mutex::new(Life::New),
            socket: Mutex::new(None),
            outgoing: OutgoingQueue::new(capacity),
            stop: AtomicBool::new(false),
            disconnect_sent: AtomicBool::new(false),
            threads: Mutex::new(Vec::new()),
            remote,
        }))
    }

    fn read_loop(&self, socket: &UdpSocket) {
        let mut buf = vec![0u8; 64 * 1024];
        while !self.stop.load(Ordering::Acquire) {
            match socket.recv(&mut buf) {
                Ok(n) => {
                    self.host
                        .on_channel_message(Message::data(self.id, buf[..n].to_vec()));
                }
                Err(e)
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut => {}
                // ICMP unreachable and friends; stay up, UDP has no
                // connection to lose.
                Err(_) => std::thread::sleep(RECV_POLL),
            }
        }
    }
}

impl Channel for UdpClientChannel {
    fn create(&self) -> Status {
        {
            let mut life = self.life.lock().unwrap();
            if *life != Life::New {
                return Status::CLOSED;
            }
            *life = Life::Creating;
        }
        let fail = |life: &Mutex<Life>| {
            *life.lock().unwrap() = Life::Destroyed;
            Status::SOCKET_ERR
        };
        let Ok(remote) = resolve(&self.remote) else {
            return fail(&self.life);
        };
        let bind_addr: SocketAddr = if remote.is_ipv4() {
            "0.0.0.0:0".parse().unwrap()
        } else {
            "[::]:0".parse().unwrap()
        };
        let socket = match UdpSocket::bind(bind_addr)
            .and_then(|s| s.connect(remote).map(|_| s))
            .and_then(|s| s.set_read_timeout(Some(RECV_POLL)).map(|_| s))
        {
            Ok(s) => s,
            Err(_) => return fail(&self.life),
        };
        let socket = Arc::new(socket);
        {
            let mut life = self.life.lock().unwrap();
            if *life == Life::Destroyed {
                return Status::CLOSED;
            }
            *self.socket.lock().unwrap() = Some(Arc::clone(&socket));
            *life = Life::Created;
        }
        let me = self.me.upgrade().expect("channels live in an Arc");
        let reader = {
            let me = Arc::clone(&me);
            let socket = Arc::clone(&socket);
            std::thread::spawn(move || me.read_loop(&socket))
        };
        let writer = std::thread::spawn(move || {
            drain_to_datagrams(&me.outgoing, &socket, None, me.id, &me.host);
        });
        let mut threads = self.threads.lock().unwrap();
        threads.push(reader);
        threads.push(writer);
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
        self.stop.store(true, Ordering::Release);
        self.outgoing.stop();
        let threads: Vec<JoinHandle<()>> = self.threads.lock().unwrap().drain(..).collect();
        for t in threads {
            let _ = t.join();
        }
        self.socket.lock().unwrap().take();
        if was_created && !self.disconnect_sent.swap(true, Ordering::AcqRel) {
            self.host.on_channel_message(Message::disconnected(self.id));
        }
        Status::OK
    }

    fn status(&self) -> Status {
        match *self.life.lock().unwrap() {
            Life::Created => Status::OK,
            _ => Status::CLOSED,
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

struct UdpServerShared {
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    life: Mutex<Life>,
    socket: Mutex<Option<Arc<UdpSocket>>>,
    peers: Mutex<PeerState>,
    stop: AtomicBool,
    recv_thread: Mutex<Option<JoinHandle<()>>>,
    bind_to: (String, u16),
    idle_timeout_ms: u64,
    queue_capacity: usize,
    epoch: Instant,
}

struct PeerState {
    table: PeerTable,
    children: HashMap<u64, Arc<UdpPeerChannel>>,
}

/// Datagram server channel: one shared socket, one child channel per
/// distinct source endpoint.
pub(crate) struct UdpServerChannel {
    shared: Arc<UdpServerShared>,
}

impl UdpServerChannel {
    pub(crate) fn build(
        info: &ChannelInfo,
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
    ) -> Result<Arc<UdpServerChannel>, Status> {
        Ok(Arc::new(UdpServerChannel {
            shared: Arc::new(UdpServerShared {
                id,
                host,
                life: Mutex::new(Life::New),
                socket: Mutex::new(None),
                peers: Mutex::new(PeerState {
                    table: PeerTable::new(),
                    children: HashMap::new(),
                }),
                stop: AtomicBool::new(false),
                recv_thread: Mutex::new(None),
                bind_to: addr_pair(&info.endpoint),
                idle_timeout_ms: info.idle_timeout_secs()?.saturating_mul(1000),
                queue_capacity: info.queue_capacity()?,
                epoch: Instant::now(),
            }),
        }))
    }
}

impl UdpServerShared {
    fn now_ms(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    fn recv_loop(self: Arc<Self>, socket: Arc<UdpSocket>) {
        let mut buf = vec![0u8; 64 * 1024];
        while !self.stop.load(Ordering::Acquire) {
            match socket.recv_from(&mut buf) {
                Ok((n, src)) => self.demux(&buf[..n], src, &socket),
                Err(e)
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut => {}
                Err(_) => {
                    self.host
                        .on_channel_message(Message::error(self.id, Status::SOCKET_ERR));
                    std::thread::sleep(RECV_POLL);
                }
            }
            self.sweep();
        }
    }

    fn demux(self: &Arc<Self>, payload: &[u8], src: SocketAddr, socket: &Arc<UdpSocket>) {
        let source = endpoint_from_addr(src);
        let now = self.now_ms();
        let (child_id, new_child) = {
            let mut peers = self.peers.lock().unwrap();
            match peers.table.observe(&source, now, || self.host.allocate_id()) {
                PeerLookup::Known(id) => (id, None),
                PeerLookup::New(id) => {
                    let child = UdpPeerChannel::build(
                        id,
                        Arc::clone(&self.host),
                        Arc::clone(socket),
                        src,
                        self.queue_capacity,
                        Arc::downgrade(self),
                    );
                    peers.children.insert(id.get(), Arc::clone(&child));
                    (id, Some(child))
                }
            }
        };
        if let Some(child) = new_child {
            if self
                .host
                .adopt_child(child_id, Arc::clone(&child) as Arc<dyn Channel>)
                .is_error()
            {
                let mut peers = self.peers.lock().unwrap();
                peers.table.remove_by_id(child_id);
                peers.children.remove(&child_id.get());
                return;
            }
            // New connection: notify the upper layers, then deliver the
            // datagram itself as ordinary data.
            self.host
                .on_channel_message(Message::connected(child_id, source));
            child.create();
        }
        self.host
            .on_channel_message(Message::data(child_id, payload.to_vec()));
    }

    fn sweep(self: &Arc<Self>) {
        if self.idle_timeout_ms == 0 {
            return;
        }
        let now = self.now_ms();
        let expired: Vec<Arc<UdpPeerChannel>> = {
            let mut peers = self.peers.lock().unwrap();
            let gone = peers.table.sweep(self.idle_timeout_ms, now);
            gone.iter()
                .filter_map(|(_, id)| peers.children.remove(&id.get()))
                .collect()
        };
        for child in expired {
            child.destroy();
        }
    }
}

impl Channel for UdpServerChannel {
    fn create(&self) -> Status {
        {
            let mut life = self.shared.life.lock().unwrap();
            if *life != Life::New {
                return Status::CLOSED;
            }
            *life = Life::Creating;
        }
        let socket = match UdpSocket::bind(self.shared.bind_to.clone())
            .and_then(|s| s.set_read_timeout(Some(RECV_POLL)).map(|_| s))
        {
            Ok(s) => s,
            Err(_) => {
                *self.shared.life.lock().unwrap() = Life::Destroyed;
                return Status::SOCKET_ERR;
            }
        };
        let socket = Arc::new(socket);
        *self.shared.socket.lock().unwrap() = Some(Arc::clone(&socket));
        let thread = {
            let shared = Arc::clone(&self.shared);
            std::thread::spawn(move || shared.recv_loop(socket))
        };
        *self.shared.recv_thread.lock().unwrap() = Some(thread);
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
        if let Some(t) = self.shared.recv_thread.lock().unwrap().take() {
            let _ = t.join();
        }
        let children: Vec<Arc<UdpPeerChannel>> = {
            let mut peers = self.shared.peers.lock().unwrap();
            peers.table.drain();
            peers.children.drain().map(|(_, c)| c).collect()
        };
        for child in children {
            child.destroy();
        }
        self.shared.socket.lock().unwrap().take();
        Status::OK
    }

    fn status(&self) -> Status {
        match *self.shared.life.lock().unwrap() {
            Life::New | Life::Creating | Life::Destroyed => Status::CLOSED,
            Life::Created => Status::OK,
        }
    }

    /// Server channels have no peer of their own; sends route to the
    /// per-source children.
    fn add_message(&self, _msg: Message) {}
}

/// Emulated connection to one datagram source, sharing the server's
/// socket so replies leave from the port the peer already knows.
struct UdpPeerChannel {
    me: Weak<UdpPeerChannel>,
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    life: Mutex<Life>,
    socket: Arc<UdpSocket>,
    remote: SocketAddr,
    outgoing: OutgoingQueue,
    disconnect_sent: AtomicBool,
    writer: Mutex<Option<JoinHandle<()>>>,
    parent: Weak<UdpServerShared>,
}

impl UdpPeerChannel {
    fn build(
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
        socket: Arc<UdpSocket>,
        remote: SocketAddr,
        queue_capacity: usize,
        parent: Weak<UdpServerShared>,
    ) -> Arc<UdpPeerChannel> {
        Arc::new_cyclic(|me| UdpPeerChannel {
            me: me.clone(),
            id,
            host,
            life: Mutex::new(Life::New),
            socket,
            remote,
            outgoing: OutgoingQueue::new(queue_capacity),
            disconnect_sent: AtomicBool::new(false),
            writer: Mutex::new(None),
            parent,
        })
    }
}

impl Channel for UdpPeerChannel {
    fn create(&self) -> Status {
        {
            let mut life = self.life.lock().unwrap();
            if *life != Life::New {
                return Status::CLOSED;
            }
            *life = Life::Created;
        }
        let me = self.me.upgrade().expect("channels live in an Arc");
        let writer = std::thread::spawn(move || {
            drain_to_datagrams(&me.outgoing, &me.socket, Some(me.remote), me.id, &me.host);
        });
        *self.writer.lock().unwrap() = Some(writer);
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
        if let Some(t) = self.writer.lock().unwrap().take() {
            let _ = t.join();
        }
        if let Some(parent) = self.parent.upgrade() {
            let mut peers = parent.peers.lock().unwrap();
            peers.table.remove_by_id(self.id);
            peers.children.remove(&self.id.get());
        }
        self.host.release_child(self.id);
        if was_created && !self.disconnect_sent.swap(true, Ordering::AcqRel) {
            self.host.on_channel_message(Message::disconnected(self.id));
        }
        Status::OK
    }

    fn status(&self) -> Status {
        match *self.life.lock().unwrap() {
            Life::Created => Status::OK,
            _ => Status::CLOSED,
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
