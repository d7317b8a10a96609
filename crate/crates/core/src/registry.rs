//! Name-keyed registries of interchangeable algorithm variants.
//!
//! Each family (fully-entangled-fraction solvers, port measurements,
//! controller optimizers) defines its own trait with [`Strategy`] as a
//! supertrait; a [`Registry`] holds boxed implementations in registration
//! order and resolves them by name at runtime.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub trait Strategy: Send + Sync {
    /// Stable identifier used on the command line and in run records.
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str {
        ""
    }
}

pub struct Registry<S: ?Sized> {
    entries: Vec<Arc<S>>,
}

impl<S: ?Sized + Strategy> Registry<S> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Later registrations under an existing name replace the earlier entry.
    pub fn register(&mut self, strategy: Arc<S>) -> &mut Self {
        let name = strategy.name();
        match self.entries.iter().position(|s| s.name() == name) {
            Some(i) => self.entries[i] = strategy,
            None => self.entries.push(strategy),
        }
        self
    }

    pub fn with(mut self, strategy: Arc<S>) -> Self {
        self.register(strategy);
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<S>> {
        self.entries
            .iter()
            .find(|s| s.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<S>> {
        self.entries.iter()
    }
}

impl<S: ?Sized + Strategy> Default for Registry<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: ?Sized + Strategy> fmt::Debug for Registry<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("entries", &self.names())
            .finish()
    }
}
