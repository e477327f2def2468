//! Variance-preserving v-prediction diffusion: schedule, forward process,
//! prompt guidance and the masked sampler.

mod guidance;
mod sampler;
mod schedule;

pub use guidance::{apg_combine, GuidanceConfig};
pub use sampler::{sample, sample_with, GenerationRequest, SamplerConfig, Solver};
pub use schedule::{
    forward_diffuse, forward_diffuse_at, make_schedule, recover_noise, recover_x0, v_target,
    v_target_at, NoiseLevel, NoiseSchedule,
};
