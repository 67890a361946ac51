use serde::{Deserialize, Serialize};

use crate::rng::{streams, SeedStream};

/// Component visiting order within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrderPolicy {
    /// `0, 1, ..., m-1` every epoch.
    Cyclic,
    /// A fresh uniform permutation each epoch.
    ShuffledPerEpoch { seed: u64 },
    /// `m` independent uniform indices each epoch (with replacement).
    Iid { seed: u64 },
}

impl OrderPolicy {
    pub fn sampler(&self, m: usize) -> OrderSampler {
        let rng = match *self {
            OrderPolicy::Cyclic => None,
            OrderPolicy::ShuffledPerEpoch { seed } | OrderPolicy::Iid { seed } => {
                Some(SeedStream::new(seed, streams::ORDER))
            }
        };
        OrderSampler {
            policy: *self,
            rng,
            buf: (0..m).collect(),
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, OrderPolicy::Iid { .. })
    }
}

/// Stateful per-epoch order generator.
pub struct OrderSampler {
    policy: OrderPolicy,
    rng: Option<SeedStream>,
    buf: Vec<usize>,
}

impl OrderSampler {
    pub fn next_epoch(&mut self) -> &[usize] {
        let m = self.buf.len();
        match self.policy {
            OrderPolicy::Cyclic => {}
            OrderPolicy::ShuffledPerEpoch { .. } => {
                let rng = self.rng.as_mut().expect("seeded policy");
                for (i, v) in self.buf.iter_mut().enumerate() {
                    *v = i;
                }
                rng.shuffle(&mut self.buf);
            }
            OrderPolicy::Iid { .. } => {
                let rng = self.rng.as_mut().expect("seeded policy");
                for v in self.buf.iter_mut() {
                    *v = rng.index(m);
                }
            }
        }
        &self.buf
    }
}
