//! The platform facade: channel lifecycle by ID, outbound routing, and
//! the single polled queue all inbound traffic funnels into.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock, Weak};
use std::time::{Duration, Instant};

use chanplat_core::{
    Channel, ChannelCallback, ChannelFactory, ChannelHost, ChannelId, ChannelInfo, ChannelStats,
    FactoryRegistry, Message, MessageKind, Status,
};

/// Owns every live channel, allocates their IDs, and queues everything
/// they receive.
///
/// All operations are safe to call from any thread; clones share the
/// same handler. Messages are handed to exactly one `get_message`
/// caller, in arrival order, with per-channel FIFO preserved.
#[derive(Clone)]
pub struct ChannelHandler {
    shared: Arc<Shared>,
}

struct Shared {
    registry: RwLock<FactoryRegistry>,
    channels: Mutex<HashMap<u64, Arc<dyn Channel>>>,
    incoming: Mutex<VecDeque<Message>>,
    arrived: Condvar,
    next_id: AtomicU64,
    open: AtomicBool,
    incoming_limit: Option<usize>,
    incoming_dropped: AtomicU64,
    host: Mutex<Option<Arc<HostHandle>>>,
}

/// The upward interface handed to channel components. Holds the handler
/// weakly so a dropped handler cannot be kept alive by its channels.
struct HostHandle {
    shared: Weak<Shared>,
}

impl ChannelHandler {
    /// A handler with the six built-in channel types registered and an
    /// unbounded incoming queue.
    pub fn new() -> ChannelHandler {
        ChannelHandler::build(crate::builtin_registry(), None)
    }

    /// Like [`new`](ChannelHandler::new) but drops inbound messages
    /// beyond `limit` instead of queueing them (counted, not reported).
    pub fn with_incoming_limit(limit: usize) -> ChannelHandler {
        ChannelHandler::build(crate::builtin_registry(), Some(limit))
    }

    /// A handler over a caller-assembled registry.
    pub fn with_registry(registry: FactoryRegistry) -> ChannelHandler {
        ChannelHandler::build(registry, None)
    }

    fn build(registry: FactoryRegistry, incoming_limit: Option<usize>) -> ChannelHandler {
        let shared = Arc::new(Shared {
            registry: RwLock::new(registry),
            channels: Mutex::new(HashMap::new()),
            incoming: Mutex::new(VecDeque::new()),
            arrived: Condvar::new(),
            next_id: AtomicU64::new(1),
            open: AtomicBool::new(true),
            incoming_limit,
            incoming_dropped: AtomicU64::new(0),
            host: Mutex::new(None),
        });
        let host = Arc::new(HostHandle {
            shared: Arc::downgrade(&shared),
        });
        *shared.host.lock().unwrap() = Some(host);
        ChannelHandler { shared }
    }

    /// Registers an additional channel component type. Built-in and
    /// previously registered names are rejected with `BAD_INFO`.
    pub fn register_channel_type(&self, type_name: &str, factory: Arc<ChannelFactory>) -> Status {
        self.shared
            .registry
            .write()
            .unwrap()
            .register(type_name, factory)
    }

    /// Creates a channel from `info`: resolves the factory, allocates a
    /// fresh ID, constructs the component, and starts it. The ID is
    /// never reused, even if a later channel fails to create.
    pub fn create_channel(&self, info: &ChannelInfo) -> Result<ChannelId, Status> {
        if !self.shared.open.load(Ordering::Acquire) {
            return Err(Status::CLOSED);
        }
        info.validate()?;
        let factory = self
            .shared
            .registry
            .read()
            .unwrap()
            .factory(info.channel_type.name())
            .ok_or(Status::BAD_INFO)?;
        let host = self.shared.host();
        let id = self.shared.allocate_id();
        let channel = factory(info, id, host)?;
        let status = channel.create();
        if status.is_error() {
            channel.destroy();
            return Err(status);
        }
        let mut channels = self.shared.channels.lock().unwrap();
        if !self.shared.open.load(Ordering::Acquire) {
            drop(channels);
            channel.destroy();
            return Err(Status::CLOSED);
        }
        channels.insert(id.get(), channel);
        Ok(id)
    }

    /// Destroys the channel registered under `id`. A server channel
    /// takes its child channels down with it, each emitting one
    /// `Disconnected` notification.
    pub fn destroy_channel(&self, id: ChannelId) -> Result<(), Status> {
        let channel = self
            .shared
            .channels
            .lock()
            .unwrap()
            .remove(&id.get())
            .ok_or(Status::NOT_FOUND)?;
        let status = channel.destroy();
        if status.is_error() {
            return Err(status);
        }
        Ok(())
    }

    /// Routes one `Data` message to the channel named by its
    /// `channel_id`. Delivery is asynchronous; success means queued.
    pub fn send_to_channel(&self, msg: Message) -> Result<(), Status> {
        if !self.shared.open.load(Ordering::Acquire) {
            return Err(Status::CLOSED);
        }
        if msg.kind != MessageKind::Data {
            return Err(Status::BAD_INFO);
        }
        let channel = self
            .shared
            .channels
            .lock()
            .unwrap()
            .get(&msg.channel_id.get())
            .cloned()
            .ok_or(Status::NOT_FOUND)?;
        channel.add_message(msg);
        Ok(())
    }

    /// Non-blocking poll of the incoming queue. `Ok(None)` is the
    /// no-messages case; after shutdown the queue keeps draining until
    /// empty and then reports `CLOSED`.
    pub fn get_message(&self) -> Result<Option<Message>, Status> {
        let mut queue = self.shared.incoming.lock().unwrap();
        match queue.pop_front() {
            Some(msg) => Ok(Some(msg)),
            None if self.shared.open.load(Ordering::Acquire) => Ok(None),
            None => Err(Status::CLOSED),
        }
    }

    /// Bounded-wait variant of [`get_message`](ChannelHandler::get_message)
    /// so pollers need not spin.
    pub fn wait_message(&self, timeout: Duration) -> Result<Option<Message>, Status> {
        let deadline = Instant::now() + timeout;
        let mut queue = self.shared.incoming.lock().unwrap();
        loop {
            if let Some(msg) = queue.pop_front() {
                return Ok(Some(msg));
            }
            if !self.shared.open.load(Ordering::Acquire) {
                return Err(Status::CLOSED);
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(None);
            }
            let (guard, _) = self
                .shared
                .arrived
                .wait_timeout(queue, deadline - now)
                .unwrap();
            queue = guard;
        }
    }

    /// Outgoing-queue counters of one live channel.
    pub fn channel_stats(&self, id: ChannelId) -> Result<ChannelStats, Status> {
        let channel = self
            .shared
            .channels
            .lock()
            .unwrap()
            .get(&id.get())
            .cloned()
            .ok_or(Status::NOT_FOUND)?;
        Ok(channel.stats())
    }

    /// Number of live channels, children included.
    pub fn channel_count(&self) -> usize {
        self.shared.channels.lock().unwrap().len()
    }

    /// Destroys every channel and marks the handler terminal.
    /// Idempotent; individual close failures are logged, not returned.
    pub fn shutdown(&self) -> Result<(), Status> {
        self.shared.shutdown();
        Ok(())
    }
}

impl Default for ChannelHandler {
    fn default() -> Self {
        ChannelHandler::new()
    }
}

impl Shared {
    fn host(&self) -> Arc<HostHandle> {
        self.host.lock().unwrap().clone().expect("set at build")
    }

    fn allocate_id(&self) -> ChannelId {
        let value = self.next_id.fetch_add(1, Ordering::Relaxed);
        ChannelId::new(value).expect("counter starts at 1")
    }

    fn enqueue(&self, msg: Message) -> Status {
        let mut queue = self.incoming.lock().unwrap();
        if !self.open.load(Ordering::Acquire) {
            return Status::CLOSED;
        }
        if let Some(limit) = self.incoming_limit {
            if queue.len() >= limit {
                self.incoming_dropped.fetch_add(1, Ordering::Relaxed);
                return Status::OK;
            }
        }
        queue.push_back(msg);
        drop(queue);
        self.arrived.notify_one();
        Status::OK
    }

    fn shutdown(&self) {
        {
            // Serialize against enqueue so no message slips past the
            // closed flag.
            let _queue = self.incoming.lock().unwrap();
            if !self.open.swap(false, Ordering::AcqRel) {
                return;
            }
        }
        self.arrived.notify_all();
        let drained: Vec<Arc<dyn Channel>> = {
            let mut channels = self.channels.lock().unwrap();
            channels.drain().map(|(_, c)| c).collect()
        };
        for channel in drained {
            let status = channel.destroy();
            if status.is_error() {
                log::warn!("channel close failed during shutdown: {status}");
            }
        }
    }
}

impl Drop for Shared {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl ChannelCallback for HostHandle {
    fn on_channel_message(&self, msg: Message) -> Status {
        match self.shared.upgrade() {
            Some(shared) => shared.enqueue(msg),
            None => Status::CLOSED,
        }
    }
}

impl ChannelHost for HostHandle {
    fn allocate_id(&self) -> ChannelId {
        match self.shared.upgrade() {
            Some(shared) => shared.allocate_id(),
            // Handler is gone; adoption will fail and the child will be
            // discarded, so any ID serves.
            None => ChannelId::new(u64::MAX).unwrap(),
        }
    }

    fn adopt_child(&self, id: ChannelId, child: Arc<dyn Channel>) -> Status {
        let Some(shared) = self.shared.upgrade() else {
            return Status::CLOSED;
        };
        let mut channels = shared.channels.lock().unwrap();
        if !shared.open.load(Ordering::Acquire) {
            return Status::CLOSED;
        }
        channels.insert(id.get(), child);
        Status::OK
    }

    fn release_child(&self, id: ChannelId) {
        if let Some(shared) = self.shared.upgrade() {
            shared.channels.lock().unwrap().remove(&id.get());
        }
    }
}
