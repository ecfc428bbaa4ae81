use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mask::TokenMask;
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingPolicy {
    /// Highest probability; ties go to the lowest token id.
    Greedy,
    Temperature { t: f64, seed: u64 },
    TopK { k: usize, seed: u64 },
}

impl SamplingPolicy {
    /// Parses `greedy`, `temperature:<t>` or `top-k:<k>`.
    pub fn parse(spec: &str, seed: u64) -> Result<Self, String> {
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "greedy" if arg.is_empty() => Ok(SamplingPolicy::Greedy),
            "temperature" => match arg.parse::<f64>() {
                Ok(t) if t > 0.0 && t.is_finite() => Ok(SamplingPolicy::Temperature { t, seed }),
                _ => Err(format!("temperature must be a positive number, got `{arg}`")),
            },
            "top-k" => match arg.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(SamplingPolicy::TopK { k, seed }),
                _ => Err(format!("top-k needs k >= 1, got `{arg}`")),
            },
            _ => Err(format!("unknown policy `{spec}` (expected greedy, temperature:<t> or top-k:<k>)")),
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            SamplingPolicy::Greedy => SamplingPolicy::Greedy,
            SamplingPolicy::Temperature { t, .. } => SamplingPolicy::Temperature { t, seed },
            SamplingPolicy::TopK { k, .. } => SamplingPolicy::TopK { k, seed },
        }
    }
}

impl fmt::Display for SamplingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingPolicy::Greedy => f.write_str("greedy"),
            SamplingPolicy::Temperature { t, .. } => write!(f, "temperature:{t}"),
            SamplingPolicy::TopK { k, .. } => write!(f, "top-k:{k}"),
        }
    }
}

/// Draws tokens from masked distributions according to a policy. The seed
/// fixes the whole random stream.
#[derive(Debug, Clone)]
pub struct Sampler {
    policy: SamplingPolicy,
    rng: ChaCha8Rng,
    scratch: Vec<(f64, TokenId)>,
}

impl Sampler {
    pub fn new(policy: SamplingPolicy) -> Self {
        let seed = match policy {
            SamplingPolicy::Greedy => 0,
            SamplingPolicy::Temperature { seed, .. } | SamplingPolicy::TopK { seed, .. } => seed,
        };
        Sampler { policy, rng: ChaCha8Rng::seed_from_u64(seed), scratch: Vec::new() }
    }

    pub fn policy(&self) -> SamplingPolicy {
        self.policy
    }

    /// Picks a token from `dist`, considering only members of `mask`.
    /// `mask` must be non-empty.
    pub fn sample(&mut self, dist: &[f64], mask: &TokenMask) -> TokenId {
        debug_assert!(!mask.is_empty());
        match self.policy {
            SamplingPolicy::Greedy => argmax(dist, mask),
            SamplingPolicy::Temperature { t, .. } => {
                self.scratch.clear();
                let mut total = 0.0;
                for i in mask.iter() {
                    let w = if t == 1.0 { dist[i] } else { dist[i].powf(1.0 / t) };
                    total += w;
                    self.scratch.push((w, i as TokenId));
                }
                if total.is_nan() || total <= 0.0 {
                    return argmax(dist, mask);
                }
                self.draw(total)
            }
            SamplingPolicy::TopK { k, .. } => {
                self.scratch.clear();
                self.scratch.extend(mask.iter().map(|i| (dist[i], i as TokenId)));
                self.scratch.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                self.scratch.truncate(k);
                let total: f64 = self.scratch.iter().map(|w| w.0).sum();
                if total.is_nan() || total <= 0.0 {
                    return argmax(dist, mask);
                }
                self.draw(total)
            }
        }
    }

    fn draw(&mut self, total: f64) -> TokenId {
        let mut r = self.rng.random::<f64>() * total;
        let mut last = self.scratch[0].1;
        for &(w, tok) in &self.scratch {
            if w <= 0.0 {
                continue;
            }
            last = tok;
            if r < w {
                return tok;
            }
            r -= w;
        }
        last
    }
}

fn argmax(dist: &[f64], mask: &TokenMask) -> TokenId {
    let mut best: Option<(f64, usize)> = None;
    mask.for_each_range(|r| {
        let start = r.start;
        let slice = &dist[r];
        let mut lanes = [f64::NEG_INFINITY; 8];
        let chunks = slice.chunks_exact(8);
        for (l, &x) in lanes.iter_mut().zip(chunks.remainder()) {
            *l = x;
        }
        for c in chunks {
            for i in 0..8 {
                lanes[i] = if c[i] > lanes[i] { c[i] } else { lanes[i] };
            }
        }
        let top = lanes.iter().copied().fold(f64::NEG_INFINITY, |a, b| if b > a { b } else { a });
        if best.is_none_or(|(p, _)| top > p) {
            // Lowest index holding the maximum; NaN entries never win.
            match slice.iter().position(|&x| x == top) {
                Some(i) => best = Some((top, start + i)),
                None if best.is_none() => best = Some((slice[0], start)),
                None => {}
            }
        }
    });
    best.expect("non-empty mask").1 as TokenId
}
