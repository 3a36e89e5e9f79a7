//! Latent containers, noise schedules and the forward corruption process.
//!
//! Timesteps are 1-based: `t = 1..=T` index noisy states and `t = 0` is the
//! clean sample, for which `alpha_bar = 1`.

mod latent;
mod rng;
mod schedule;

pub use latent::LatentVideo;
pub use rng::NoiseRng;
pub(crate) use rng::mix_seed;
pub use schedule::{build_schedule, q_sample, BetaKind, NoiseSchedule, ScheduleParams};
