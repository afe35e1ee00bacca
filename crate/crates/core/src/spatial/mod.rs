//! Spatial index and persistent object identity.

mod persistence;
mod rtree;

pub use persistence::{
    entry_for, persistence_update, IdAllocator, PersistenceConfig, PersistenceTracker,
    DEFAULT_MAX_DISTANCE,
};
pub use rtree::{distance, Aabb, FanOut, IndexEntry, IndexError, NearestQuery, RStarTree};
