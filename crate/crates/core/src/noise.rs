//! Brownian increments on uniform grids.
//!
//! Every increment array is tied to a `(seed, stream)` pair. The generator is
//! ChaCha8 seeded from the 64-bit seed; the stream number selects an
//! independent ChaCha stream, so Monte Carlo sample `i` always draws from
//! stream `i` regardless of how samples are scheduled across threads.
//! Standard normals come from `rand_distr::StandardNormal` (ziggurat).
//!
//! Strong-error experiments generate increments once on the finest grid
//! and obtain coarser paths with [`WienerIncrements::coarsen`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Uniform grid `t0 < t0 + h < ... < t_end` with `n_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidGrid("grid needs at least one step".into()));
        }
        if !(t0.is_finite() && t_end.is_finite()) || t_end <= t0 {
            return Err(Error::InvalidGrid(format!(
                "end time {t_end} must exceed start time {t0}"
            )));
        }
        Ok(Self { t0, t_end, n_steps })
    }

    /// Grid on `[t0, t_end]` with step `h`; `(t_end - t0) / h` must be an
    /// integer up to a relative tolerance of 1e-9.
    pub fn with_step(t0: f64, t_end: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("step {h} must be positive")));
        }
        let ratio = (t_end - t0) / h;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "step {h} does not divide the interval [{t0}, {t_end}]"
            )));
        }
        Self::new(t0, t_end, n as usize)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    /// Time of grid node `j` (`0 ..= n_steps`).
    pub fn time(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.t_end
        } else {
            self.t0 + j as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|j| self.time(j))
    }

    /// Grid with `factor` times fewer steps over the same interval.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::InvalidGrid(format!(
                "factor {factor} does not divide {} steps",
                self.n_steps
            )));
        }
        Self::new(self.t0, self.t_end, self.n_steps / factor)
    }
}

/// Clamping of standardized increments to `[-A_h, A_h]`, `A_h = sqrt(2 k |ln h|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    k: f64,
    enabled: bool,
}

impl TruncationPolicy {
    pub fn new(k: f64) -> Result<Self> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncation strength k = {k} must be >= 1"
            )));
        }
        Ok(Self { k, enabled: true })
    }

    pub fn disabled() -> Self {
        Self {
            k: 1.0,
            enabled: false,
        }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// `A_h`; only defined for `0 < h < 1`.
    pub fn bound(&self, h: f64) -> Result<f64> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation needs 0 < h < 1, got h = {h}"
            )));
        }
        Ok((2.0 * self.k * h.ln().abs()).sqrt())
    }

    /// Truncates the raw increment `dw = sqrt(h) xi`.
    pub fn apply_increment(&self, dw: f64, h: f64) -> Result<f64> {
        if !self.enabled {
            return Ok(dw);
        }
        let sqrt_h = h.sqrt();
        Ok(sqrt_h * truncate(dw / sqrt_h, h, self)?)
    }
}

impl Default for TruncationPolicy {
    /// `k = 4`, enabled.
    fn default() -> Self {
        Self {
            k: 4.0,
            enabled: true,
        }
    }
}

/// Clamps a standard-normal draw to `[-A_h, A_h]`; identity when the policy
/// is disabled.
pub fn truncate(xi: f64, h: f64, policy: &TruncationPolicy) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step {h} must be positive")));
    }
    if !policy.enabled {
        return Ok(xi);
    }
    let a = policy.bound(h)?;
    Ok(xi.clamp(-a, a))
}

/// Per-step Brownian increments, stored step-major (`n_steps x m`).
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    grid: TimeGrid,
    dims: usize,
    values: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl WienerIncrements {
    /// Wraps externally supplied increments.
    pub fn from_values(grid: TimeGrid, dims: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps() * dims {
            return Err(Error::InvalidParameter(format!(
                "expected {} increments, got {}",
                grid.n_steps() * dims,
                values.len()
            )));
        }
        Ok(Self {
            grid,
            dims,
            values,
            seed: 0,
            stream: 0,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Increments of step `j` (one per channel).
    pub fn step(&self, j: usize) -> &[f64] {
        &self.values[j * self.dims..(j + 1) * self.dims]
    }

    /// `W(t_end) - W(t0)` per channel, summed left to right.
    pub fn total(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dims];
        for step in self.values.chunks_exact(self.dims) {
            for (a, v) in acc.iter_mut().zip(step) {
                *a += v;
            }
        }
        acc
    }

    /// Sums `factor` consecutive increments (left to right) into one.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let mut values = vec![0.0; grid.n_steps() * self.dims];
        for (j, block) in self.values.chunks_exact(factor * self.dims).enumerate() {
            let out = &mut values[j * self.dims..(j + 1) * self.dims];
            for step in block.chunks_exact(self.dims) {
                for (o, v) in out.iter_mut().zip(step) {
                    *o += v;
                }
            }
        }
        Ok(Self {
            grid,
            dims: self.dims,
            values,
            seed: self.seed,
            stream: self.stream,
        })
    }

    /// Applies the truncation policy to every increment.
    pub fn truncated(&self, policy: &TruncationPolicy) -> Result<Self> {
        let h = self.grid.step();
        let values = self
            .values
            .iter()
            .map(|&dw| policy.apply_increment(dw, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            values,
            ..self.clone()
        })
    }
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent `N(0, h)` increments for `m` channels from stream 0 of `seed`.
pub fn sample_increments(grid: TimeGrid, m: usize, seed: u64) -> Result<WienerIncrements> {
    sample_increments_stream(grid, m, seed, 0)
}

/// As [`sample_increments`], drawing from an explicit stream.
pub fn sample_increments_stream(
    grid: TimeGrid,
    m: usize,
    seed: u64,
    stream: u64,
) -> Result<WienerIncrements> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "need at least one noise channel".into(),
        ));
    }
    let mut rng = stream_rng(seed, stream);
    let sqrt_h = grid.step().sqrt();
    let values = (0..grid.n_steps() * m)
        .map(|_| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            sqrt_h * xi
        })
        .collect();
    Ok(WienerIncrements {
        grid,
        dims: m,
        values,
        seed,
        stream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_grid_rejected() {
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::with_step(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn grid_with_step() {
        let g = TimeGrid::with_step(0.0, 10.0, 0.01).unwrap();
        assert_eq!(g.n_steps(), 1000);
        assert_eq!(g.time(1000), 10.0);
        assert!((g.step() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let a = sample_increments(g, 2, 42).unwrap();
        let b = sample_increments(g, 2, 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_increments_stream(g, 2, 42, 1).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn increment_moments() {
        // 1e5 draws at h = 0.01: std of the sample mean is ~3e-4, of the
        // sample variance ~4.5e-5.
        let g = TimeGrid::new(0.0, 1000.0, 100_000).unwrap();
        let w = sample_increments(g, 1, 7).unwrap();
        let n = w.values().len() as f64;
        let mean = w.values().iter().sum::<f64>() / n;
        let var = w.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 0.01).abs() < 5e-4, "var {var}");
    }

    #[test]
    fn truncation_examples() {
        let p = TruncationPolicy::new(4.0).unwrap();
        assert_eq!(truncate(0.3, 0.01, &p).unwrap(), 0.3);
        let a = (2.0 * 4.0 * 0.01f64.ln().abs()).sqrt();
        assert!((a - 6.0697).abs() < 1e-4);
        assert_eq!(truncate(10.0, 0.01, &p).unwrap(), a);
        assert_eq!(truncate(-10.0, 0.01, &p).unwrap(), -a);
        assert!(truncate(1.0, 1.0, &p).is_err());
        assert!(truncate(1.0, 2.0, &p).is_err());
        assert_eq!(truncate(10.0, 0.01, &TruncationPolicy::disabled()).unwrap(), 10.0);
        assert!(TruncationPolicy::new(0.5).is_err());
    }

    #[test]
    fn coarsen_examples() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let w = WienerIncrements::from_values(g, 1, vec![0.25, -0.5]).unwrap();
        assert_eq!(w.coarsen(1).unwrap(), w);
        let c = w.coarsen(2).unwrap();
        assert_eq!(c.values(), &[-0.25]);
        assert!(w.coarsen(3).is_err());
    }

    #[test]
    fn coarsened_variance() {
        let g = TimeGrid::new(0.0, 1000.0, 1_000_000).unwrap();
        let fine = sample_increments(g, 1, 11).unwrap();
        let coarse = fine.coarsen(10).unwrap();
        let v = coarse.values();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1e-2).abs() < 5e-4, "var {var}");
    }

    proptest! {
        #[test]
        fn truncation_is_bounded(xi in -1e3f64..1e3, h in 1e-6f64..0.9, k in 1.0f64..10.0) {
            let p = TruncationPolicy::new(k).unwrap();
            let z = truncate(xi, h, &p).unwrap();
            prop_assert!(z.abs() <= p.bound(h).unwrap());
        }

        #[test]
        fn coarsening_telescopes(seed in any::<u64>(), factor in prop::sample::select(vec![1usize, 2, 4, 5, 10])) {
            let g = TimeGrid::new(0.0, 1.0, 20).unwrap();
            let fine = sample_increments(g, 2, seed).unwrap();
            let coarse = fine.coarsen(factor).unwrap();
            // Both totals sum the same fine values left to right within each
            // coarse block; compare against block-wise summation.
            let mut expected = vec![0.0; 2];
            for block in fine.values().chunks_exact(2 * factor) {
                let mut part = [0.0; 2];
                for s in block.chunks_exact(2) {
                    part[0] += s[0];
                    part[1] += s[1];
                }
                expected[0] += part[0];
                expected[1] += part[1];
            }
            prop_assert_eq!(coarse.total(), expected);
            let diff: f64 = coarse.total().iter().zip(fine.total()).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(diff < 1e-13);
        }
    }
}
