// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic inputs. Render times are log-normal; nothing here is
//! calibrated to any particular hardware.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::{FrameTrace, Mobility, SceneDescription, SceneObject};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    /// Median render time in ms.
    pub median_ms: f64,
    /// Log-space standard deviation.
    pub sigma: f64,
    pub frames: usize,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self { median_ms: 12.0, sigma: 0.35, frames: 600 }
    }
}

/// Same seed, same trace.
pub fn lognormal_trace(params: TraceParams, seed: u64) -> FrameTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = LogNormal::new(params.median_ms.ln(), params.sigma).expect("sigma must be finite and non-negative");
    let times = (0..params.frames.max(1)).map(|_| dist.sample(&mut rng).max(1e-3)).collect();
    FrameTrace::new(times).expect("log-normal samples are positive")
}

/// Random scene with `objects` entries drawn from `materials` materials;
/// each object is static with probability `p_static`.
pub fn random_scene(objects: usize, materials: usize, p_static: f64, seed: u64) -> SceneDescription {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let materials = materials.max(1);
    SceneDescription(
        (0..objects)
            .map(|i| {
                let m = rng.random_range(0..materials);
                let mobility =
                    if rng.random_bool(p_static.clamp(0.0, 1.0)) { Mobility::Static } else { Mobility::Dynamic };
                SceneObject::new(format!("obj-{i}"), format!("mat-{m}"), mobility)
            })
            .collect(),
    )
}
