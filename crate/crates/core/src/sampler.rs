//! Time grids and exact Gaussian path sampling.
//!
//! Every family is sampled exactly from its kernel by a Cholesky factor of the
//! covariance matrix on the grid (with a small diagonal jitter ladder for the
//! smooth, nearly singular kernels). Fractional Brownian motion on a uniform
//! grid additionally has an `O(n log n)` circulant-embedding path built on its
//! stationary increments.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::{cholesky_in_place, cholesky_in_place_scratch};
use faer::{Mat, Par};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernels::{covariance_matrix, ProcessSpec};

/// Largest dyadic level accepted for dense (Cholesky) sampling.
pub const DENSE_LEVEL_CAP: u32 = 16;
/// Largest dyadic level accepted by the circulant fBm sampler.
pub const FFT_LEVEL_CAP: u32 = 22;
/// Relative diagonal inflations tried, in order, before giving up on Cholesky.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// A partition `0 = t_0 < t_1 < … < t_n = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    horizon: f64,
    norm: f64,
    uniform: bool,
}

impl Grid {
    /// Builds a grid from explicit points. The first point must be 0.
    pub fn from_points(points: Vec<f64>) -> Result<Grid> {
        if points.len() < 2 {
            return Err(Error::domain("a grid needs at least two points"));
        }
        if points[0] != 0.0 {
            return Err(Error::domain(format!(
                "a grid must start at 0 (got {})",
                points[0]
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("grid points must be finite"));
        }
        let mut norm = 0.0f64;
        let mut min_step = f64::INFINITY;
        for w in points.windows(2) {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::domain("grid points must be strictly increasing"));
            }
            norm = norm.max(step);
            min_step = min_step.min(step);
        }
        let horizon = *points.last().unwrap();
        let uniform = norm - min_step <= 1e-12 * horizon;
        Ok(Grid {
            points,
            horizon,
            norm,
            uniform,
        })
    }

    /// `{0, T/n, 2T/n, …, T}`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Grid> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!(
                "horizon must be positive (got {horizon})"
            )));
        }
        if n == 0 {
            return Err(Error::domain("a uniform grid needs n >= 1 intervals"));
        }
        let nf = n as f64;
        let mut points: Vec<f64> = (0..=n).map(|k| k as f64 * horizon / nf).collect();
        points[n] = horizon;
        Ok(Grid {
            points,
            horizon,
            norm: horizon / nf,
            uniform: true,
        })
    }

    /// Uniform grid with `2^level` intervals, subject to [`DENSE_LEVEL_CAP`].
    pub fn dyadic(horizon: f64, level: u32) -> Result<Grid> {
        Grid::dyadic_capped(horizon, level, DENSE_LEVEL_CAP)
    }

    pub fn dyadic_capped(horizon: f64, level: u32, cap: u32) -> Result<Grid> {
        if level == 0 || level > cap {
            return Err(Error::domain(format!(
                "dyadic level must be in 1..={cap} (got {level})"
            )));
        }
        Grid::uniform(horizon, 1usize << level)
    }

    /// The half-integer grid `{0, ½, 1, …, n}`.
    pub fn half_integer(n: usize) -> Result<Grid> {
        Grid::uniform(n as f64, 2 * n)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Largest spacing `|π|`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `Some(n)` when the grid is uniform with `2^n` intervals.
    pub fn dyadic_level(&self) -> Option<u32> {
        let m = self.intervals();
        (self.uniform && m.is_power_of_two()).then(|| m.trailing_zeros())
    }

    /// Interval lengths `t_k − t_{k−1}`.
    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| w[1] - w[0])
    }
}

pub fn uniform_grid(horizon: f64, n: usize) -> Result<Grid> {
    Grid::uniform(horizon, n)
}

pub fn dyadic_grid(horizon: f64, level: u32) -> Result<Grid> {
    Grid::dyadic(horizon, level)
}

/// One realized path on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    grid: Arc<Grid>,
    values: Vec<f64>,
    spec: ProcessSpec,
    seed: u64,
}

impl PathSample {
    pub fn new(
        grid: impl Into<Arc<Grid>>,
        values: Vec<f64>,
        spec: ProcessSpec,
        seed: u64,
    ) -> Result<Self> {
        let grid = grid.into();
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "path has {} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::domain("paths start at zero"));
        }
        Ok(PathSample {
            grid,
            values,
            spec,
            seed,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Increments `X(t_k) − X(t_{k−1})`.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// The same path observed at every `step`-th grid point.
    ///
    /// On a dyadic grid of level `n`, `step = 2^j` gives an exact path on the
    /// dyadic grid of level `n − j`.
    pub fn subsample(&self, step: usize) -> Result<PathSample> {
        let intervals = self.grid.intervals();
        if step == 0 || !intervals.is_multiple_of(step) {
            return Err(Error::domain(format!(
                "step {step} does not divide the {intervals} grid intervals"
            )));
        }
        let points: Vec<f64> = self.grid.points().iter().step_by(step).copied().collect();
        let values: Vec<f64> = self.values.iter().step_by(step).copied().collect();
        PathSample::new(Grid::from_points(points)?, values, self.spec, self.seed)
    }
}

/// Standard normal variates from a seeded ChaCha20 block stream through the
/// inverse normal CDF. The same seed yields the same sequence on every platform.
pub struct NormalStream {
    rng: ChaCha20Rng,
    normal: Normal,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: ChaCha20Rng::seed_from_u64(seed),
            normal: Normal::standard(),
        }
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        self.normal.inverse_cdf(u)
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_normal();
        }
    }
}

/// Exact sampler from a Cholesky factor of the covariance on `grid \ {0}`.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    spec: ProcessSpec,
    grid: Arc<Grid>,
    factor: Mat<f64>,
    jitter: f64,
}

impl CholeskySampler {
    pub fn new(spec: ProcessSpec, grid: impl Into<Arc<Grid>>) -> Result<Self> {
        let grid = grid.into();
        let matrix = covariance_matrix(&spec, &grid.points()[1..])?;
        let (factor, jitter) = factor_with_jitter(&matrix)?;
        Ok(CholeskySampler {
            spec,
            grid,
            factor,
            jitter,
        })
    }

    /// Relative diagonal jitter that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn sample(&self, seed: u64) -> PathSample {
        let m = self.factor.nrows();
        let mut z = vec![0.0; m];
        NormalStream::new(seed).fill(&mut z);
        let mut values = vec![0.0; m + 1];
        let out = &mut values[1..];
        for (j, &zj) in z.iter().enumerate() {
            let col = &self.factor.col_as_slice(j)[j..];
            for (x, &l) in out[j..].iter_mut().zip(col) {
                *x += l * zj;
            }
        }
        PathSample {
            grid: Arc::clone(&self.grid),
            values,
            spec: self.spec,
            seed,
        }
    }
}

/// Lower Cholesky factor of `matrix`, walking [`JITTER_LADDER`].
pub fn factor_with_jitter(matrix: &Mat<f64>) -> Result<(Mat<f64>, f64)> {
    let n = matrix.nrows();
    let max_diag = (0..n).map(|i| matrix[(i, i)]).fold(0.0f64, f64::max);
    let mut mem = MemBuffer::new(cholesky_in_place_scratch::<f64>(
        n,
        Par::Seq,
        Default::default(),
    ));
    let mut last_pivot = 0;
    for &eps in &JITTER_LADDER {
        let mut work = matrix.clone();
        for i in 0..n {
            work[(i, i)] += eps * max_diag;
        }
        let stack = MemStack::new(&mut mem);
        match cholesky_in_place(
            work.as_mut(),
            Default::default(),
            Par::Seq,
            stack,
            Default::default(),
        ) {
            Ok(_) => {
                for j in 1..n {
                    for i in 0..j {
                        work[(i, j)] = 0.0;
                    }
                }
                if eps > 0.0 {
                    log::debug!("cholesky succeeded with relative jitter {eps:e}");
                }
                return Ok((work, eps));
            }
            Err(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => {
                last_pivot = index;
            }
        }
    }
    Err(Error::NotPositiveDefinite {
        jitter: *JITTER_LADDER.last().unwrap(),
        pivot: last_pivot,
    })
}

/// Draws one exact path of `spec` on `grid`.
pub fn sample_path(spec: &ProcessSpec, grid: &Grid, seed: u64) -> Result<PathSample> {
    Ok(CholeskySampler::new(*spec, grid.clone())?.sample(seed))
}

/// Circulant-embedding sampler for fractional Brownian motion on a uniform grid.
#[derive(Clone)]
pub struct CirculantFbm {
    hurst: f64,
    grid: Arc<Grid>,
    /// `sqrt(λ_k / M)` for the embedding eigenvalues `λ`.
    scales: Vec<f64>,
    fft: Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for CirculantFbm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantFbm")
            .field("hurst", &self.hurst)
            .field("intervals", &self.grid.intervals())
            .finish()
    }
}

impl CirculantFbm {
    /// Embeds the autocovariance of `steps` unit-spaced fractional Gaussian noise
    /// increments into a circulant of size `2·steps`.
    pub fn new(hurst: f64, steps: usize, horizon: f64) -> Result<Self> {
        ProcessSpec::fbm(hurst).validate()?;
        let grid = Grid::uniform(horizon, steps)?;
        let two_h = 2.0 * hurst;
        let acov = |k: f64| {
            0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
        };

        let m = 2 * steps;
        let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
        for k in 0..=steps {
            row.push(Complex::new(acov(k as f64), 0.0));
        }
        for k in (1..steps).rev() {
            row.push(Complex::new(acov(k as f64), 0.0));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);

        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < -1e-9 * max {
            return Err(Error::EmbeddingNotNonnegative { min, max });
        }
        let scales = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(CirculantFbm {
            hurst,
            grid: Arc::new(grid),
            scales,
            fft,
        })
    }

    /// Sampler on the dyadic grid of `[0, T]` with `2^level` intervals.
    pub fn dyadic(hurst: f64, level: u32, horizon: f64) -> Result<Self> {
        if level == 0 || level > FFT_LEVEL_CAP {
            return Err(Error::domain(format!(
                "circulant level must be in 1..={FFT_LEVEL_CAP} (got {level})"
            )));
        }
        CirculantFbm::new(hurst, 1usize << level, horizon)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn sample(&self, seed: u64) -> PathSample {
        let steps = self.grid.intervals();
        let mut stream = NormalStream::new(seed);
        let mut buf: Vec<Complex<f64>> = self
            .scales
            .iter()
            .map(|&s| {
                let re = stream.next_normal();
                let im = stream.next_normal();
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);

        // Unit-spaced noise rescaled to the grid step by self-similarity.
        let scale = (self.grid.horizon() / steps as f64).powf(self.hurst);
        let mut values = Vec::with_capacity(steps + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for c in &buf[..steps] {
            acc += c.re * scale;
            values.push(acc);
        }
        PathSample {
            grid: Arc::clone(&self.grid),
            values,
            spec: ProcessSpec::fbm(self.hurst),
            seed,
        }
    }
}

pub fn sample_fbm_circulant(hurst: f64, level: u32, horizon: f64, seed: u64) -> Result<PathSample> {
    Ok(CirculantFbm::dyadic(hurst, level, horizon)?.sample(seed))
}

/// Reusable sampler: circulant embedding for fBm on uniform grids, Cholesky otherwise.
#[derive(Debug, Clone)]
pub enum Sampler {
    Cholesky(CholeskySampler),
    Circulant(CirculantFbm),
}

impl Sampler {
    pub fn new(spec: ProcessSpec, grid: Grid) -> Result<Self> {
        spec.validate()?;
        if let ProcessSpec::Fbm { hurst } = spec {
            if grid.is_uniform() {
                match CirculantFbm::new(hurst, grid.intervals(), grid.horizon()) {
                    Ok(c) => return Ok(Sampler::Circulant(c)),
                    Err(Error::EmbeddingNotNonnegative { min, max }) => {
                        log::warn!("circulant embedding failed (min eigenvalue {min:e}, max {max:e}); using cholesky");
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(Sampler::Cholesky(CholeskySampler::new(spec, grid)?))
    }

    /// Dense sampler regardless of family.
    pub fn cholesky(spec: ProcessSpec, grid: Grid) -> Result<Self> {
        Ok(Sampler::Cholesky(CholeskySampler::new(spec, grid)?))
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Sampler::Cholesky(c) => c.grid(),
            Sampler::Circulant(c) => c.grid(),
        }
    }

    pub fn sample(&self, seed: u64) -> PathSample {
        match self {
            Sampler::Cholesky(c) => c.sample(seed),
            Sampler::Circulant(c) => c.sample(seed),
        }
    }

    /// Paths for seeds `base_seed, base_seed + 1, …`, ordered by index.
    pub fn sample_batch(&self, base_seed: u64, count: usize) -> Vec<PathSample> {
        (0..count as u64)
            .map(|i| self.sample(base_seed.wrapping_add(i)))
            .collect()
    }
}

/// Finite-range proxy for `|π_n| = o((log n)^{−γ})`.
///
/// `norms[i]` is the norm of partition number `first_index + i`. The proxy
/// looks at `p_n = |π_n| (log n)^γ` from its peak onward: it holds when `p_n`
/// never increases after the peak and the final value is at most half the peak.
/// Advisory only; a finite sequence cannot certify a limit.
pub fn check_partition_schedule(first_index: usize, norms: &[f64], gamma: f64) -> Result<bool> {
    if norms.is_empty() {
        return Err(Error::domain("empty partition schedule"));
    }
    if first_index < 2 {
        return Err(Error::domain("partition index must start at 2 (log 1 = 0)"));
    }
    if norms.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain("partition norms must be positive"));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "gamma must be finite and >= 1 (got {gamma})"
        )));
    }
    let products: Vec<f64> = norms
        .iter()
        .enumerate()
        .map(|(i, &norm)| norm * ((first_index + i) as f64).ln().powf(gamma))
        .collect();
    let (peak_at, peak) =
        products
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| {
                if p > best.1 {
                    (i, p)
                } else {
                    best
                }
            });
    let tail = &products[peak_at..];
    let settles = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(settles && *tail.last().unwrap() <= 0.5 * peak)
}

/// Norms of the uniform refinements `m = 2, …, n` leading up to a grid with
/// `n` intervals, scaled so the last one equals the grid's own norm.
pub fn refinement_schedule(grid: &Grid) -> (usize, Vec<f64>) {
    let n = grid.intervals();
    let scale = grid.norm() * n as f64;
    (2, (2..=n.max(2)).map(|m| scale / m as f64).collect())
}
