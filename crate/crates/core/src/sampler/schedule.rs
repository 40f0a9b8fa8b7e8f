use serde::{Deserialize, Serialize};

/// Which per-frame intensity threshold is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdLevel {
    High,
    Low,
}

/// Evolution of the informative-pixel share `r` and threshold `l_i`.
///
/// `r` is zero in stage one, ramps linearly to `r_max` over the first half of
/// stage two and then stays there. The threshold starts at the high level
/// (strongest edges only) and drops to the low level at the midpoint of the
/// ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSchedule {
    /// Batch size. Inside a training config this and the stage lengths are
    /// copied from the top-level fields and not read from text.
    #[serde(skip)]
    pub n_sample: usize,
    pub r_max: f64,
    pub dilation: usize,
    /// Percentile of each frame's nonzero intensities used as the high level.
    pub high_percentile: f64,
    pub low_percentile: f64,
    #[serde(skip)]
    pub stage1_iters: usize,
    #[serde(skip)]
    pub stage2_iters: usize,
}

impl Default for SamplingSchedule {
    fn default() -> Self {
        Self {
            n_sample: 1024,
            r_max: 0.5,
            dilation: 2,
            high_percentile: 95.0,
            low_percentile: 80.0,
            stage1_iters: 2000,
            stage2_iters: 8000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub r: f64,
    pub level: ThresholdLevel,
}

impl SamplingSchedule {
    fn ramp(&self) -> f64 {
        (self.stage2_iters as f64 / 2.0).max(1.0)
    }

    pub fn eval(&self, iter: usize) -> ScheduleState {
        if iter < self.stage1_iters {
            return ScheduleState {
                r: 0.0,
                level: ThresholdLevel::High,
            };
        }
        let progress = ((iter - self.stage1_iters) as f64 / self.ramp()).min(1.0);
        ScheduleState {
            r: self.r_max * progress,
            level: if progress >= 0.5 {
                ThresholdLevel::Low
            } else {
                ThresholdLevel::High
            },
        }
    }

    /// First iteration at which the threshold is low.
    pub fn ramp_midpoint(&self) -> usize {
        self.stage1_iters + (0.5 * self.ramp()).ceil() as usize
    }

    pub fn total_iters(&self) -> usize {
        self.stage1_iters + self.stage2_iters
    }
}

/// Nearest-rank percentile of the strictly positive values.
pub fn percentile_of_nonzero(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    if v.is_empty() {
        return f64::INFINITY;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> SamplingSchedule {
        SamplingSchedule {
            stage1_iters: 100,
            stage2_iters: 400,
            ..Default::default()
        }
    }

    #[test]
    fn start() {
        assert_eq!(sched().eval(0), ScheduleState { r: 0.0, level: ThresholdLevel::High });
        assert_eq!(sched().eval(99).r, 0.0);
    }

    #[test]
    fn ramp_midpoint_and_end() {
        let s = sched();
        // Ramp covers iterations 100..300; its midpoint is 200.
        let mid = s.eval(200);
        assert!((mid.r - 0.25).abs() < 1e-12);
        assert_eq!(mid.level, ThresholdLevel::Low);
        assert_eq!(s.eval(199).level, ThresholdLevel::High);
        assert_eq!(s.ramp_midpoint(), 200);
        assert_eq!(s.eval(s.total_iters()), ScheduleState { r: 0.5, level: ThresholdLevel::Low });
    }

    #[test]
    fn non_decreasing_in_stage_two() {
        let s = sched();
        let r: Vec<f64> = (0..600).map(|i| s.eval(i).r).collect();
        assert!(r.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn percentile() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0, 0.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(percentile_of_nonzero(&v, 80.0), 8.0);
        assert_eq!(percentile_of_nonzero(&v, 100.0), 10.0);
        assert_eq!(percentile_of_nonzero(&[0.0; 4], 50.0), f64::INFINITY);
    }
}
