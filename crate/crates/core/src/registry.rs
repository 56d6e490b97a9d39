//! The factory registry that maps channel-type names to component
//! constructors. Registration replaces dynamic component loading: a
//! process registers each channel component once, after which any
//! [`ChannelInfo`] naming that type resolves to it.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::config::ChannelInfo;
use crate::message::ChannelId;
use crate::spi::{Channel, ChannelHost};
use crate::status::Status;

/// Builds one channel component in its initial (not yet created) state.
/// Factories must not perform I/O; `Channel::create` does that.
pub type ChannelFactory =
    dyn Fn(&ChannelInfo, ChannelId, Arc<dyn ChannelHost>) -> Result<Arc<dyn Channel>, Status>
        + Send
        + Sync;

#[derive(Default)]
pub struct FactoryRegistry {
    entries: BTreeMap<String, Arc<ChannelFactory>>,
}

impl FactoryRegistry {
    pub fn new() -> FactoryRegistry {
        FactoryRegistry::default()
    }

    /// Registers `factory` under `type_name`. Duplicate names are
    /// rejected with [`Status::BAD_INFO`] so a component cannot be
    /// silently replaced.
    pub fn register(&mut self, type_name: &str, factory: Arc<ChannelFactory>) -> Status {
        if type_name.is_empty() || self.entries.contains_key(type_name) {
            return Status::BAD_INFO;
        }
        self.entries.insert(type_name.to_owned(), factory);
        Status::OK
    }

    pub fn contains(&self, type_name: &str) -> bool {
        self.entries.contains_key(type_name)
    }

    pub fn factory(&self, type_name: &str) -> Option<Arc<ChannelFactory>> {
        self.entries.get(type_name).cloned()
    }

    pub fn type_names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    /// Resolves the factory for `info.channel_type` and constructs the
    /// component. Unknown types yield [`Status::BAD_INFO`].
    pub fn build(
        &self,
        info: &ChannelInfo,
        id: ChannelId,
        host: Arc<dyn ChannelHost>,
    ) -> Result<Arc<dyn Channel>, Status> {
        let factory = self
            .entries
            .get(info.channel_type.name())
            .ok_or(Status::BAD_INFO)?;
        factory(info, id, host)
    }
}
