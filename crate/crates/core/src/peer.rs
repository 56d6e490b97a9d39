//! Connection emulation for datagram transports.
//!
//! A UDP server treats each distinct source `(IP, port)` pair as a
//! virtual connection: the first datagram from an unknown source opens
//! one (new child channel, `Connected` notification), later datagrams
//! route to the existing child, and sources silent past the idle
//! timeout are expired. Time is passed in explicitly so the logic is
//! deterministic under a test clock.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::endpoint::Endpoint;
use crate::message::ChannelId;

/// Maps datagram source endpoints to child channel IDs and tracks when
/// each peer was last heard from.
#[derive(Default)]
pub struct PeerTable {
    by_endpoint: BTreeMap<Endpoint, PeerEntry>,
}

struct PeerEntry {
    id: ChannelId,
    last_seen_ms: u64,
}

/// Outcome of routing one datagram source.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum PeerLookup {
    /// Source already known; datagram belongs to this child.
    Known(ChannelId),
    /// Source first seen now; a child was registered under this ID.
    New(ChannelId),
}

impl PeerLookup {
    pub fn id(&self) -> ChannelId {
        match *self {
            PeerLookup::Known(id) | PeerLookup::New(id) => id,
        }
    }
}

impl PeerTable {
    pub fn new() -> PeerTable {
        PeerTable::default()
    }

    /// Routes one datagram source, refreshing its idle timestamp. For
    /// unknown sources `allocate` supplies the child ID to register.
    pub fn observe(
        &mut self,
        source: &Endpoint,
        now_ms: u64,
        allocate: impl FnOnce() -> ChannelId,
    ) -> PeerLookup {
        if let Some(entry) = self.by_endpoint.get_mut(source) {
            entry.last_seen_ms = now_ms;
            return PeerLookup::Known(entry.id);
        }
        let id = allocate();
        self.by_endpoint.insert(
            source.clone(),
            PeerEntry {
                id,
                last_seen_ms: now_ms,
            },
        );
        PeerLookup::New(id)
    }

    /// Removes and returns every peer idle for longer than
    /// `idle_timeout_ms`. A timeout of 0 disables expiry.
    pub fn sweep(&mut self, idle_timeout_ms: u64, now_ms: u64) -> Vec<(Endpoint, ChannelId)> {
        if idle_timeout_ms == 0 {
            return Vec::new();
        }
        let expired: Vec<Endpoint> = self
            .by_endpoint
            .iter()
            .filter(|(_, e)| now_ms.saturating_sub(e.last_seen_ms) > idle_timeout_ms)
            .map(|(ep, _)| ep.clone())
            .collect();
        expired
            .into_iter()
            .map(|ep| {
                let entry = self.by_endpoint.remove(&ep).expect("collected above");
                (ep, entry.id)
            })
            .collect()
    }

    /// Forgets one peer by endpoint, returning its child ID.
    pub fn remove(&mut self, source: &Endpoint) -> Option<ChannelId> {
        self.by_endpoint.remove(source).map(|e| e.id)
    }

    /// Forgets one peer by child ID, returning its endpoint. Safe to
    /// call when the endpoint has since been re-assigned a fresh ID:
    /// only the exact ID's entry is touched.
    pub fn remove_by_id(&mut self, id: ChannelId) -> Option<Endpoint> {
        let endpoint = self.endpoint_of(id)?.clone();
        self.by_endpoint.remove(&endpoint);
        Some(endpoint)
    }

    pub fn endpoint_of(&self, id: ChannelId) -> Option<&Endpoint> {
        self.by_endpoint
            .iter()
            .find(|(_, e)| e.id == id)
            .map(|(ep, _)| ep)
    }

    pub fn len(&self) -> usize {
        self.by_endpoint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_endpoint.is_empty()
    }

    /// Drains the whole table, e.g. on server destruction.
    pub fn drain(&mut self) -> Vec<(Endpoint, ChannelId)> {
        let mut out = Vec::with_capacity(self.by_endpoint.len());
        while let Some((ep, entry)) = self.by_endpoint.pop_first() {
            out.push((ep, entry.id));
        }
        out
    }
}
