//! Epoch schedules, with or without hierarchical (per-group) batching.

use alloc::vec::Vec;

use crate::flowgraph::Grouping;
use crate::rng::SeedRng;

/// One optimisation step's worth of samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    /// `Some(g)` restricts the node set to group `g`.
    pub group: Option<usize>,
    /// Window start days.
    pub windows: Vec<usize>,
}

/// Build one epoch. With `use_hn` every batch covers a single group:
/// windows are shuffled within each group, chunked, and the resulting
/// group-batches shuffled. Otherwise windows are shuffled and chunked over
/// the full graph.
pub fn cluster_batches(windows: &[usize], grouping: &Grouping, rng: &mut SeedRng, use_hn: bool, batch_size: usize) -> Vec<Batch> {
    let batch_size = batch_size.max(1);
    if !use_hn {
        let mut w = windows.to_vec();
        rng.shuffle(&mut w);
        return w
            .chunks(batch_size)
            .map(|c| Batch {
                group: None,
                windows: c.to_vec(),
            })
            .collect();
    }
    let mut batches = Vec::new();
    for g in 0..grouping.n_groups() {
        let mut w = windows.to_vec();
        rng.shuffle(&mut w);
        batches.extend(w.chunks(batch_size).map(|c| Batch {
            group: Some(g),
            windows: c.to_vec(),
        }));
    }
    rng.shuffle(&mut batches);
    batches
}
