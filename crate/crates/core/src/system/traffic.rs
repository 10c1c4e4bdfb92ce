//! URLLC arrival process and eMBB user geometry.

use crate::rng::substream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

/// Arrivals are thinned from a fixed-rate base process so that, on the same
/// seed, the arrivals at a lower rate are a subset of those at a higher one.
const BASE_RATE_PER_MS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UrllcArrival {
    pub id: u32,
    pub time_us: f64,
    pub geometry_db: f64,
}

/// Poisson URLLC arrivals, generated slot by slot.
pub struct ArrivalProcess {
    rng: ChaCha8Rng,
    keep: f64,
    gap: Option<Exp<f64>>,
    next_us: f64,
    next_id: u32,
    geometry_db: [f64; 2],
}

impl ArrivalProcess {
    pub fn new(seed: u64, rate_per_ms: f64, geometry_db: [f64; 2]) -> Self {
        let base = BASE_RATE_PER_MS.max(rate_per_ms);
        let mut rng = substream(seed, &[0x4152_5249]);
        let gap = (rate_per_ms > 0.0).then(|| Exp::new(base / 1000.0).expect("positive rate"));
        let next_us = gap.as_ref().map_or(f64::INFINITY, |g| g.sample(&mut rng));
        Self {
            rng,
            keep: rate_per_ms / base,
            gap,
            next_us,
            next_id: 0,
            geometry_db,
        }
    }

    /// All arrivals with time in `[start_us, end_us)`, in time order. Calls
    /// must cover consecutive windows.
    pub fn arrivals_until(&mut self, end_us: f64) -> Vec<UrllcArrival> {
        let mut out = Vec::new();
        let Some(gap) = self.gap else {
            return out;
        };
        while self.next_us < end_us {
            let t = self.next_us;
            let u: f64 = self.rng.random();
            let g: f64 = self.rng.random();
            if u < self.keep {
                out.push(UrllcArrival {
                    id: self.next_id,
                    time_us: t,
                    geometry_db: self.geometry_db[0] + g * (self.geometry_db[1] - self.geometry_db[0]),
                });
                self.next_id += 1;
            }
            self.next_us = t + gap.sample(&mut self.rng);
        }
        out
    }
}

/// Mean SNR per eMBB user, uniform in dB over `range`.
pub fn draw_geometries(seed: u64, n_users: usize, range: [f64; 2]) -> Vec<f64> {
    let mut rng = substream(seed, &[0x4745_4F4D]);
    (0..n_users)
        .map(|_| range[0] + rng.random::<f64>() * (range[1] - range[0]))
        .collect()
}
