use rand::Rng;

use crate::optics::DelayGrid;

/// How the density continues past the sampled range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Edges {
    /// The last cell joins back to the first sample.
    Periodic,
    /// Nothing outside the first and last sample.
    Bounded,
}

/// Draws times from a piecewise-linear density given by grid samples.
#[derive(Debug, Clone)]
pub(crate) struct ProfileSampler {
    dt: f64,
    /// Start time and end values of each linear cell.
    cells: Vec<(f64, f64, f64)>,
    cdf: Vec<f64>,
}

impl ProfileSampler {
    pub fn new(samples: &[f64], dt: f64, edges: Edges) -> Self {
        let n = samples.len();
        let mut cells = Vec::with_capacity(n + 1);
        match edges {
            Edges::Periodic => {
                for i in 0..n {
                    cells.push((i as f64 * dt, samples[i], samples[(i + 1) % n]));
                }
            }
            Edges::Bounded => {
                for i in 0..n.saturating_sub(1) {
                    cells.push((i as f64 * dt, samples[i], samples[i + 1]));
                }
            }
        }
        let mut acc = 0.0;
        let cdf = cells
            .iter()
            .map(|&(_, a, b)| {
                acc += 0.5 * (a.max(0.0) + b.max(0.0));
                acc
            })
            .collect();
        Self { dt, cells, cdf }
    }

    pub fn total(&self) -> f64 {
        self.cdf.last().copied().unwrap_or(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = self.total();
        let target = rng.gen::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= target).min(self.cells.len() - 1);
        let (t0, a, b) = self.cells[k];
        let (a, b) = (a.max(0.0), b.max(0.0));
        let u: f64 = rng.gen();
        let x = if (b - a).abs() < 1e-12 * (a + b).max(1e-300) {
            u
        } else {
            ((a * a + u * (b * b - a * a)).max(0.0).sqrt() - a) / (b - a)
        };
        t0 + x * self.dt
    }
}

/// Exact draws of `(u, delta)` from a bilinear [`DelayGrid`] density.
#[derive(Debug, Clone)]
pub(crate) struct DelaySampler {
    origin: f64,
    dt: f64,
    marginal: Vec<f64>,
    u: ProfileSampler,
    rows: Vec<ProfileSampler>,
}

impl DelaySampler {
    pub fn new(kernel: &DelayGrid) -> Self {
        let g = kernel.grid();
        let rows: Vec<ProfileSampler> = (0..g.len)
            .map(|i| ProfileSampler::new(kernel.row(i), g.dt, Edges::Bounded))
            .collect();
        let marginal: Vec<f64> = rows.iter().map(|r| r.total()).collect();
        Self {
            origin: kernel.delay_origin(),
            dt: g.dt,
            u: ProfileSampler::new(&marginal, g.dt, Edges::Periodic),
            marginal,
            rows,
        }
    }

    /// The marginal in `u` interpolates the row masses linearly, and the
    /// delay comes from one of the two bracketing rows in proportion to its
    /// share at `u`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let n = self.rows.len();
        let u = self.u.sample(rng);
        let x = u / self.dt;
        let i = (x.floor() as usize).min(n - 1);
        let f = x - i as f64;
        let j = (i + 1) % n;
        let (wi, wj) = ((1.0 - f) * self.marginal[i], f * self.marginal[j]);
        let row = if rng.gen::<f64>() * (wi + wj) < wi { i } else { j };
        (u, self.origin + self.rows[row].sample(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn ramp_density_has_the_right_mean() {
        // rises to 3 at t = 3, then falls back to 0 at t = 4: mean 7/3
        let s = ProfileSampler::new(&[0.0, 1.0, 2.0, 3.0], 1.0, Edges::Periodic);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 7.0 / 3.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn bounded_ramp_has_mean_two_thirds() {
        let s = ProfileSampler::new(&[0.0, 0.5, 1.0], 1.0, Edges::Bounded);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 4.0 / 3.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn cascade_delays_follow_the_exciton_lifetime() {
        use crate::optics::{SourceModel, SourceParams};
        let src = SourceModel::build(&SourceParams::default()).unwrap();
        let s = DelaySampler::new(&src.cascade);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let (mut mu, mut md) = (0.0, 0.0);
        for _ in 0..n {
            let (u, d) = s.sample(&mut rng);
            mu += u;
            md += d;
        }
        let b = src.profile_b.samples();
        let dt = src.grid().dt;
        let b_mean = b.iter().enumerate().map(|(i, v)| i as f64 * dt * v).sum::<f64>() / b.iter().sum::<f64>();
        assert!((md / n as f64 - 600.0).abs() < 6.0, "{}", md / n as f64);
        assert!((mu / n as f64 - b_mean).abs() < 5.0);
    }

    #[test]
    fn periodic_samples_stay_in_the_period() {
        let s = ProfileSampler::new(&[1.0, 0.0, 0.0, 5.0], 2.0, Edges::Periodic);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let t = s.sample(&mut rng);
            assert!((0.0..8.0).contains(&t));
            assert!(!(2.5..3.5).contains(&t));
        }
    }
}
