//! The four ablation arms over a base configuration.

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    /// Distance adjacency, no hierarchical batching, no embeddings.
    Vanilla,
    /// Distance adjacency with hierarchical batching.
    Hn,
    /// Causal graph without hierarchical batching.
    Rg,
    /// Causal graph with hierarchical batching.
    Csf,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Vanilla, Arm::Hn, Arm::Rg, Arm::Csf];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Vanilla => "Vanilla",
            Arm::Hn => "+HN",
            Arm::Rg => "+RG",
            Arm::Csf => "+HN+RG",
        }
    }

    /// `base` with this arm's switches. Arms other than Vanilla keep the
    /// base embedding setting.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        let (rg, hn) = match self {
            Arm::Vanilla => {
                c.use_embeddings = false;
                (false, false)
            }
            Arm::Hn => (false, true),
            Arm::Rg => (true, false),
            Arm::Csf => (true, true),
        };
        c.use_rg = rg;
        c.use_hn = hn;
        c
    }
}
