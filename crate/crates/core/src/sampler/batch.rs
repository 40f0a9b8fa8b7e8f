use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::canny::{texture_intensity_rgb, CannyConfig, TextureIntensityMap};
use super::mask::max_filter;
use super::schedule::{percentile_of_nonzero, SamplingSchedule, ThresholdLevel};
use crate::dataset::Dataset;
use crate::render::{mix_seed, PixelId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Canny,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelSample {
    pub pixel: PixelId,
    pub color: [f64; 3],
    pub prior: [f64; 3],
    pub prior_valid: bool,
    pub provenance: Provenance,
    /// Strongest edge intensity within the dilation radius.
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelBatch {
    pub pixels: Vec<PixelSample>,
    /// Threshold in force for each view.
    pub thresholds: Vec<f64>,
    pub r: f64,
    pub level: ThresholdLevel,
}

impl PixelBatch {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.pixels.iter().filter(|s| s.provenance == p).count()
    }
}

/// Per-frame edge maps, thresholds and informative pixel lists.
#[derive(Debug, Clone)]
pub struct InformativeSampler {
    pub schedule: SamplingSchedule,
    pub maps: Vec<TextureIntensityMap>,
    /// Max-filtered intensity per frame.
    pub dilated: Vec<Vec<f64>>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    /// `(view, pixel index)` of every informative pixel at each level.
    pool_high: Vec<(u32, u32)>,
    pool_low: Vec<(u32, u32)>,
}

impl InformativeSampler {
    pub fn new(dataset: &Dataset, schedule: SamplingSchedule, canny: &CannyConfig) -> Self {
        let (w, h) = (dataset.width, dataset.height);
        let maps: Vec<TextureIntensityMap> = dataset
            .frames
            .par_iter()
            .map(|f| texture_intensity_rgb(&f.image, w, h, canny))
            .collect();
        let dilated: Vec<Vec<f64>> = maps.iter().map(|m| max_filter(m, schedule.dilation)).collect();
        let high: Vec<f64> = maps
            .iter()
            .map(|m| percentile_of_nonzero(&m.data, schedule.high_percentile))
            .collect();
        let low: Vec<f64> = maps
            .iter()
            .map(|m| percentile_of_nonzero(&m.data, schedule.low_percentile))
            .collect();
        let pool = |th: &[f64]| -> Vec<(u32, u32)> {
            dilated
                .iter()
                .enumerate()
                .flat_map(|(v, d)| {
                    let t = th[v];
                    d.iter()
                        .enumerate()
                        .filter(move |(_, x)| **x > 0.0 && **x >= t)
                        .map(move |(i, _)| (v as u32, i as u32))
                })
                .collect()
        };
        let pool_high = pool(&high);
        let pool_low = pool(&low);
        Self {
            schedule,
            maps,
            dilated,
            high,
            low,
            pool_high,
            pool_low,
        }
    }

    pub fn pool_size(&self, level: ThresholdLevel) -> usize {
        match level {
            ThresholdLevel::High => self.pool_high.len(),
            ThresholdLevel::Low => self.pool_low.len(),
        }
    }

    /// Draws the batch for iteration `iter`: `round(r * n)` pixels from the
    /// informative pool without replacement (fewer if the pool is smaller),
    /// and the rest uniformly from all pixels without replacement.
    pub fn sample_batch(&self, dataset: &Dataset, iter: usize, seed: u64) -> PixelBatch {
        let st = self.schedule.eval(iter);
        let n = self.schedule.n_sample;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[iter as u64]));
        let pool = match st.level {
            ThresholdLevel::High => &self.pool_high,
            ThresholdLevel::Low => &self.pool_low,
        };
        let quota = ((st.r * n as f64).round() as usize).min(n);
        let take = quota.min(pool.len());
        let w = dataset.width;
        let per_view = w * dataset.height;
        let make = |view: usize, idx: usize, provenance: Provenance| {
            let f = &dataset.frames[view];
            PixelSample {
                pixel: PixelId {
                    view,
                    row: idx / w,
                    col: idx % w,
                },
                color: f.image[idx],
                prior: f.prior[idx],
                prior_valid: f.prior_valid[idx],
                provenance,
                intensity: self.dilated[view][idx],
            }
        };
        let mut pixels = Vec::with_capacity(n);
        if take > 0 {
            for k in index::sample(&mut rng, pool.len(), take) {
                let (v, i) = pool[k];
                pixels.push(make(v as usize, i as usize, Provenance::Canny));
            }
        }
        let total = per_view * dataset.frames.len();
        let rest = n - take;
        if rest > 0 && total > 0 {
            let picks: Vec<usize> = if rest <= total {
                index::sample(&mut rng, total, rest).into_vec()
            } else {
                use rand::Rng;
                (0..rest).map(|_| rng.random_range(0..total)).collect()
            };
            for k in picks {
                pixels.push(make(k / per_view, k % per_view, Provenance::Random));
            }
        }
        let thresholds = match st.level {
            ThresholdLevel::High => self.high.clone(),
            ThresholdLevel::Low => self.low.clone(),
        };
        PixelBatch {
            pixels,
            thresholds,
            r: st.r,
            level: st.level,
        }
    }
}
