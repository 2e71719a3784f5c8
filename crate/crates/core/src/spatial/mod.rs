//! Exact nearest-neighbour search.

mod kdtree;

pub use kdtree::KdTree;
