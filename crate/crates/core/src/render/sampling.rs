//! Sample placement along rays: stratified uniform samples refined by
//! hierarchical importance rounds driven by the current signed distances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::alpha::alpha_from_sdf;
use super::ray::Ray;
use crate::scene::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub n_uniform: usize,
    /// Total importance samples, split evenly over `rounds`.
    pub n_importance: usize,
    pub rounds: usize,
    /// Sharpness used for round `k` is `base_tau * 2^k`.
    pub base_tau: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_uniform: 64,
            n_importance: 32,
            rounds: 2,
            base_tau: 64.0,
        }
    }
}

/// Mixes a seed with further words into a well-spread 64-bit value.
pub fn mix_seed(seed: u64, words: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    words
        .iter()
        .fold(splitmix(seed), |z, w| splitmix(z.rotate_left(17) ^ splitmix(*w)))
}

/// `n` samples, one per equal stratum of `[near, far]`: jittered when `rng`
/// is given, stratum midpoints otherwise.
pub fn stratified(ray: &Ray, n: usize, rng: Option<&mut ChaCha8Rng>) -> Vec<f64> {
    let step = (ray.far - ray.near) / n as f64;
    match rng {
        Some(rng) => (0..n)
            .map(|i| ray.near + (i as f64 + rng.random::<f64>()) * step)
            .collect(),
        None => (0..n).map(|i| ray.near + (i as f64 + 0.5) * step).collect(),
    }
}

/// Inverse-CDF draw of `n` positions from the piecewise-constant density
/// over intervals `[t_i, t_{i+1}]` with mass `w_i`.
fn sample_pdf(t: &[f64], w: &[f64], n: usize, rng: Option<&mut ChaCha8Rng>) -> Vec<f64> {
    let mass: Vec<f64> = w.iter().map(|v| v.max(0.0) + 1e-5).collect();
    let total: f64 = mass.iter().sum();
    let mut cdf = Vec::with_capacity(mass.len() + 1);
    cdf.push(0.0);
    for m in &mass {
        cdf.push(cdf.last().unwrap() + m / total);
    }
    let us: Vec<f64> = match rng {
        Some(rng) => (0..n).map(|j| (j as f64 + rng.random::<f64>()) / n as f64).collect(),
        None => (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect(),
    };
    let mut out = Vec::with_capacity(n);
    let mut bin = 0;
    for u in us {
        while bin + 1 < mass.len() && cdf[bin + 1] < u {
            bin += 1;
        }
        let frac = ((u - cdf[bin]) / (cdf[bin + 1] - cdf[bin])).clamp(0.0, 1.0);
        out.push(t[bin] + frac * (t[bin + 1] - t[bin]));
    }
    out
}

/// Merges `(t, s)` pairs, keeping `t` strictly increasing.
fn merge(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut all = a;
    all.extend(b);
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    all.dedup_by(|x, y| x.0 <= y.0);
    all
}

/// Sample distances for every ray. `sdf` evaluates a batch of points.
/// Each ray draws from its own seed; `None` places samples deterministically.
pub fn sample_rays<F>(rays: &[Ray], cfg: &SamplingConfig, seeds: Option<&[u64]>, sdf: F) -> Vec<Vec<f64>>
where
    F: Fn(&[Vec3]) -> Vec<f64>,
{
    let mut rngs: Option<Vec<ChaCha8Rng>> =
        seeds.map(|s| s.iter().map(|v| ChaCha8Rng::seed_from_u64(*v)).collect());
    let n_uniform = cfg.n_uniform.max(2);
    let ts: Vec<Vec<f64>> = rays
        .iter()
        .enumerate()
        .map(|(i, r)| stratified(r, n_uniform, rngs.as_mut().map(|v| &mut v[i])))
        .collect();
    if cfg.n_importance == 0 || cfg.rounds == 0 {
        return ts;
    }
    let eval = |ts: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let pts: Vec<Vec3> = rays
            .iter()
            .zip(ts)
            .flat_map(|(r, t)| t.iter().map(move |t| r.at(*t)))
            .collect();
        let s = sdf(&pts);
        let mut k = 0;
        ts.iter()
            .map(|t| {
                let v = s[k..k + t.len()].to_vec();
                k += t.len();
                v
            })
            .collect()
    };
    let s0 = eval(&ts);
    let mut cur: Vec<Vec<(f64, f64)>> = ts
        .into_iter()
        .zip(s0)
        .map(|(t, s)| t.into_iter().zip(s).collect())
        .collect();
    let per_round = cfg.n_importance / cfg.rounds;
    for round in 0..cfg.rounds {
        let n = if round + 1 == cfg.rounds {
            cfg.n_importance - per_round * (cfg.rounds - 1)
        } else {
            per_round
        };
        if n == 0 {
            continue;
        }
        let tau = cfg.base_tau * (1u64 << round) as f64;
        let new_t: Vec<Vec<f64>> = cur
            .iter()
            .enumerate()
            .map(|(i, ts)| {
                let t: Vec<f64> = ts.iter().map(|p| p.0).collect();
                let mut trans = 1.0;
                let w: Vec<f64> = ts
                    .windows(2)
                    .map(|p| {
                        let a = alpha_from_sdf(p[0].1, p[1].1, tau);
                        let w = trans * a;
                        trans *= 1.0 - a;
                        w
                    })
                    .collect();
                sample_pdf(&t, &w, n, rngs.as_mut().map(|v| &mut v[i]))
            })
            .collect();
        let new_s = eval(&new_t);
        cur = cur
            .into_iter()
            .zip(new_t.into_iter().zip(new_s))
            .map(|(old, (t, s))| merge(old, t.into_iter().zip(s).collect()))
            .collect();
    }
    cur.into_iter()
        .map(|v| v.into_iter().map(|p| p.0).collect())
        .collect()
}

/// Samples for a single ray.
pub fn sample_points<F>(ray: &Ray, n_uniform: usize, n_importance: usize, seed: u64, sdf: F) -> Vec<f64>
where
    F: Fn(&[Vec3]) -> Vec<f64>,
{
    let cfg = SamplingConfig {
        n_uniform,
        n_importance,
        ..SamplingConfig::default()
    };
    sample_rays(std::slice::from_ref(ray), &cfg, Some(&[seed]), sdf).remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::ray::PixelId;

    fn ray() -> Ray {
        Ray {
            origin: Vec3::new(0.0, 0.0, 2.0),
            dir: Vec3::new(0.0, 0.0, -1.0),
            near: 0.5,
            far: 3.5,
            pixel: PixelId::default(),
        }
    }

    fn sphere(p: &[Vec3]) -> Vec<f64> {
        p.iter().map(|x| x.norm() - 0.5).collect()
    }

    #[test]
    fn uniform_only_respects_strata() {
        let r = ray();
        let t = sample_points(&r, 16, 0, 3, sphere);
        assert_eq!(t.len(), 16);
        let step = (r.far - r.near) / 16.0;
        for (i, v) in t.iter().enumerate() {
            let lo = r.near + i as f64 * step;
            assert!(*v >= lo && *v < lo + step);
        }
    }

    #[test]
    fn sorted_strictly_and_deterministic() {
        let t = sample_points(&ray(), 32, 16, 11, sphere);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t, sample_points(&ray(), 32, 16, 11, sphere));
        assert_ne!(t, sample_points(&ray(), 32, 16, 12, sphere));
    }

    #[test]
    fn importance_concentrates_at_surface() {
        // Surface at t = 1.5 along this ray.
        let t = sample_points(&ray(), 16, 32, 0, sphere);
        let near_surface = t.iter().filter(|v| (*v - 1.5).abs() < 0.1).count();
        assert!(near_surface >= 16, "{near_surface}");
    }

    #[test]
    fn deterministic_without_seed() {
        let cfg = SamplingConfig {
            n_uniform: 8,
            n_importance: 8,
            ..Default::default()
        };
        let a = sample_rays(&[ray()], &cfg, None, sphere);
        assert_eq!(a, sample_rays(&[ray()], &cfg, None, sphere));
    }

    #[test]
    fn mix_seed_spreads() {
        assert_ne!(mix_seed(0, &[1]), mix_seed(0, &[2]));
        assert_ne!(mix_seed(1, &[0]), mix_seed(0, &[1]));
    }
}
