use std::sync::{Arc, Mutex, PoisonError, RwLock};

use super::SocialGraph;

/// Copy-on-write holder for a shared graph.
///
/// Readers take cheap immutable snapshots. Mutations are serialized through a
/// single writer lock and published atomically; a failed mutation leaves the
/// published graph untouched.
#[derive(Debug)]
pub struct GraphStore {
    current: RwLock<Arc<SocialGraph>>,
    writer: Mutex<()>,
}

impl GraphStore {
    pub fn new(graph: SocialGraph) -> Self {
        Self {
            current: RwLock::new(Arc::new(graph)),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<SocialGraph> {
        self.current
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .clone()
    }

    pub fn update<T, E>(&self, f: impl FnOnce(&mut SocialGraph) -> Result<T, E>) -> Result<T, E> {
        let _guard = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let mut working = (*self.snapshot()).clone();
        let out = f(&mut working)?;
        *self.current.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(working);
        Ok(out)
    }
}
