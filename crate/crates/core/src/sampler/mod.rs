//! Informative pixel sampling.
//!
//! Each frame gets a Canny edge-strength map. Training batches mix pixels
//! drawn from the edge neighborhoods with uniformly drawn pixels; the mix and
//! the edge threshold follow [`SamplingSchedule`].

pub mod batch;
pub mod canny;
pub mod mask;
pub mod schedule;

pub use batch::{InformativeSampler, PixelBatch, PixelSample, Provenance};
pub use canny::{texture_intensity, texture_intensity_rgb, to_gray, CannyConfig, TextureIntensityMap};
pub use mask::{informative_mask, max_filter};
pub use schedule::{percentile_of_nonzero, SamplingSchedule, ScheduleState, ThresholdLevel};
