//! Driving randomness: uniform time grids, Wiener increments and
//! non-centered Poisson jump events.
//!
//! A [`NoiseRealization`] freezes one sample of the pair `(w, nu)`: the
//! `n_steps x m` table of Wiener increments `dW[k][j] ~ N(0, h)` and the list
//! of jump events, each an atom `(time, mark)` of the Poisson measure.  Every
//! integrator and evaluator in the crate consumes the same realization, so
//! coupled computations (path vs. Jacobian vs. kernel vs. field) see exactly
//! the same randomness.
//!
//! Integrals against the jump measure are finite sums over the event atoms;
//! the mark measure is a finite list of mark values with per-mark Poisson
//! intensities.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};

/// Uniform grid on `[t0, t_end]` with `n_steps` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Build a uniform grid; `t_end > t0` and `n_steps >= 1`.
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > t0) {
            return Err(Error::InvalidArgument(format!(
                "time span must be positive, got [{t0}, {t_end}]"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
        }
        Ok(Self { t0, t_end, n_steps })
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

    /// Step size `(t_end - t0) / n_steps`.
    pub fn h(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    /// Node time `t0 + k h`, computed directly so nodes carry no cumulative
    /// rounding drift.
    pub fn node(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h()
    }

    /// All `n_steps + 1` node times.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }

    /// Index of the step whose half-open interval `(node(k), node(k+1)]`
    /// contains `t`; times at or before `t0` map to step 0.
    pub fn step_containing(&self, t: f64) -> usize {
        let r = (t - self.t0) / self.h();
        let k = r.ceil() as isize - 1;
        (k.max(0) as usize).min(self.n_steps - 1)
    }

    /// Grid with the same span and `n_steps * factor` steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            t0: self.t0,
            t_end: self.t_end,
            n_steps: self.n_steps * factor,
        }
    }
}

/// Build a uniform time grid (free-function form of [`TimeGrid::new`]).
pub fn build_grid(t0: f64, t_end: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(t0, t_end, n_steps)
}

/// Finite mark space: mark values with per-mark Poisson intensities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkSpace {
    marks: Vec<f64>,
    rates: Vec<f64>,
}

impl MarkSpace {
    /// Marks with their intensities; every rate must be positive.
    pub fn new(marks: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if marks.len() != rates.len() {
            return Err(Error::InvalidArgument(format!(
                "marks ({}) and rates ({}) must have the same length",
                marks.len(),
                rates.len()
            )));
        }
        if rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument(
                "all mark rates must be positive and finite".into(),
            ));
        }
        Ok(Self { marks, rates })
    }

    /// Empty mark space: no jumps ever.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn mark(&self, index: usize) -> f64 {
        self.marks[index]
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn rate(&self, index: usize) -> f64 {
        self.rates[index]
    }

    /// Total intensity over all marks.
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// One atom of the Poisson measure: an event time and the index of its mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark_index: usize,
}

/// One frozen sample of the driving noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    grid: TimeGrid,
    m: usize,
    /// Row-major `n_steps x m` Wiener increments.
    dw: Vec<f64>,
    events: Vec<JumpEvent>,
    seed: u64,
}

impl NoiseRealization {
    /// Assemble a realization from explicit parts (used by tests and by
    /// couplings that construct increments directly).  Validates shapes and
    /// event ordering.
    pub fn from_parts(
        grid: TimeGrid,
        m: usize,
        dw: Vec<f64>,
        events: Vec<JumpEvent>,
        seed: u64,
    ) -> Result<Self> {
        if dw.len() != grid.n_steps() * m {
            return Err(Error::DimensionMismatch(format!(
                "dW has {} entries, expected n_steps * m = {}",
                dw.len(),
                grid.n_steps() * m
            )));
        }
        for pair in events.windows(2) {
            if !(pair[0].time < pair[1].time) {
                return Err(Error::InvalidArgument(
                    "event times must be strictly increasing".into(),
                ));
            }
        }
        if events
            .iter()
            .any(|e| !(e.time > grid.t0() && e.time <= grid.t_end()))
        {
            return Err(Error::InvalidArgument(
                "event times must lie in (t0, t_end]".into(),
            ));
        }
        Ok(Self {
            grid,
            m,
            dw,
            events,
            seed,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn wiener_dim(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Increment of Wiener component `j` over step `k`.
    pub fn dw(&self, k: usize, j: usize) -> f64 {
        self.dw[k * self.m + j]
    }

    /// All `m` increments of step `k`.
    pub fn dw_row(&self, k: usize) -> &[f64] {
        &self.dw[k * self.m..(k + 1) * self.m]
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    /// Event indices grouped by the step containing their time.
    pub fn events_by_step(&self) -> Vec<Vec<usize>> {
        let mut by_step = vec![Vec::new(); self.grid.n_steps()];
        for (i, ev) in self.events.iter().enumerate() {
            by_step[self.grid.step_containing(ev.time)].push(i);
        }
        by_step
    }

    /// Total Wiener increment per component.
    pub fn total_increment(&self) -> Vec<f64> {
        let mut tot = vec![0.0; self.m];
        for k in 0..self.grid.n_steps() {
            for j in 0..self.m {
                tot[j] += self.dw(k, j);
            }
        }
        tot
    }
}

// Sub-stream tags for the per-realization generator.
const STREAM_WIENER: u64 = 1;
const STREAM_POISSON: u64 = 2;
const STREAM_REFINE: u64 = 3;

// splitmix64; decorrelates the per-purpose sub-seeds.
fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, tag: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, tag));
    rng.set_stream(tag);
    rng
}

/// Sample one realization of the driving noise on `grid`.
///
/// Wiener increments are i.i.d. `N(0, h)`.  For each mark `j` the event
/// times form a Poisson process of rate `lambda_j` on `(t0, t_end]`
/// (a `Poisson(lambda_j (t_end - t0))` count with uniform times), merged over
/// marks and sorted.  Identical `(grid, m, ms, seed)` yield a bit-identical
/// realization.
pub fn sample_noise(grid: &TimeGrid, m: usize, ms: &MarkSpace, seed: u64) -> NoiseRealization {
    let n = grid.n_steps();
    let h = grid.h();

    let mut dw = vec![0.0; n * m];
    if m > 0 {
        let mut rng = stream_rng(seed, STREAM_WIENER);
        let normal = Normal::new(0.0, h.sqrt()).expect("positive step size");
        for v in dw.iter_mut() {
            *v = normal.sample(&mut rng);
        }
    }

    let mut events = Vec::new();
    if !ms.is_empty() {
        let mut rng = stream_rng(seed, STREAM_POISSON);
        let span = grid.t_end() - grid.t0();
        for j in 0..ms.len() {
            let count_dist = Poisson::new(ms.rate(j) * span).expect("positive rate");
            let count = count_dist.sample(&mut rng) as u64;
            for _ in 0..count {
                // (t0, t_end]: flip the half-open side of gen's [0, 1).
                let u: f64 = 1.0 - rng.gen::<f64>();
                events.push(JumpEvent {
                    time: grid.t0() + u * span,
                    mark_index: j,
                });
            }
        }
        events.sort_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.mark_index.cmp(&b.mark_index))
        });
        // Ties have probability zero but would break downstream ordering
        // invariants; nudge any duplicate time up by one ulp.
        for i in 1..events.len() {
            if events[i].time <= events[i - 1].time {
                events[i].time = next_up(events[i - 1].time);
            }
        }
    }

    NoiseRealization {
        grid: grid.clone(),
        m,
        dw,
        events,
        seed,
    }
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

/// Brownian-bridge refinement: a realization on `n_steps * factor` steps
/// whose fine increments sum block-wise to the coarse increments and whose
/// event list is unchanged.  Deterministic given the input realization.
pub fn refine_noise(noise: &NoiseRealization, factor: usize) -> Result<NoiseRealization> {
    if factor < 2 {
        return Err(Error::InvalidArgument(
            "refinement factor must be >= 2".into(),
        ));
    }
    let coarse = noise.grid();
    let fine = coarse.refined(factor);
    let n = coarse.n_steps();
    let m = noise.wiener_dim();
    let hf = fine.h();

    let mut rng = stream_rng(
        mix_seed(noise.seed, factor as u64),
        STREAM_REFINE,
    );
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut dw = vec![0.0; n * factor * m];
    for k in 0..n {
        for j in 0..m {
            // Split the coarse increment over `factor` sub-steps: sample each
            // sub-increment conditionally on the remaining total, and assign
            // the remainder to the last sub-step so block sums telescope.
            let mut remaining = noise.dw(k, j);
            let mut span = factor as f64 * hf;
            for s in 0..factor - 1 {
                let mean = remaining * hf / span;
                let var = hf * (span - hf) / span;
                let d = mean + var.sqrt() * normal.sample(&mut rng);
                dw[(k * factor + s) * m + j] = d;
                remaining -= d;
                span -= hf;
            }
            dw[(k * factor + factor - 1) * m + j] = remaining;
        }
    }

    Ok(NoiseRealization {
        grid: fine,
        m,
        dw,
        events: noise.events.clone(),
        seed: noise.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_nodes_are_exact() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        let g1 = build_grid(0.0, 1.0, 1).unwrap();
        assert_eq!(g1.nodes(), vec![0.0, 1.0]);
        assert_eq!(g1.h(), 1.0);

        let g10 = build_grid(2.0, 3.0, 10).unwrap();
        assert_relative_eq!(g10.h(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(g10.node(7), 2.7, epsilon = 1e-15);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(build_grid(1.0, 1.0, 4).is_err());
        assert!(build_grid(2.0, 1.0, 4).is_err());
        assert!(build_grid(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn step_containing_covers_the_span() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.step_containing(0.1), 0);
        assert_eq!(g.step_containing(0.25), 0);
        assert_eq!(g.step_containing(0.2500001), 1);
        assert_eq!(g.step_containing(1.0), 3);
    }

    #[test]
    fn empty_noise_has_no_entries() {
        let g = build_grid(0.0, 1.0, 8).unwrap();
        let noise = sample_noise(&g, 0, &MarkSpace::empty(), 7);
        assert_eq!(noise.wiener_dim(), 0);
        assert!(noise.events().is_empty());
        assert!(noise.dw_row(0).is_empty());
    }

    #[test]
    fn wiener_increment_variance_matches_step() {
        let g = build_grid(0.0, 1.0, 1 << 16).unwrap();
        let noise = sample_noise(&g, 1, &MarkSpace::empty(), 42);
        let n = g.n_steps();
        let mean: f64 = (0..n).map(|k| noise.dw(k, 0)).sum::<f64>() / n as f64;
        let var: f64 =
            (0..n).map(|k| (noise.dw(k, 0) - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let h = g.h();
        assert!(
            (var - h).abs() <= 0.05 * h,
            "sample variance {var:e} vs step {h:e}"
        );
    }

    #[test]
    fn poisson_event_count_matches_rate() {
        let g = build_grid(0.0, 1.0, 16).unwrap();
        let ms = MarkSpace::new(vec![1.0], vec![2.0]).unwrap();
        let trials = 10_000usize;
        let mut counts = Vec::with_capacity(trials);
        for seed in 0..trials as u64 {
            counts.push(sample_noise(&g, 0, &ms, seed).events().len() as f64);
        }
        let mean = counts.iter().sum::<f64>() / trials as f64;
        // Poisson(2): std error of the mean is sqrt(2 / trials).
        let se = (2.0f64 / trials as f64).sqrt();
        assert!(
            (mean - 2.0).abs() <= 3.0 * se,
            "mean event count {mean} vs 2.0 +- {:.4}",
            3.0 * se
        );
    }

    #[test]
    fn sampling_is_reproducible() {
        let g = build_grid(0.0, 2.0, 32).unwrap();
        let ms = MarkSpace::new(vec![0.5, -1.0], vec![1.5, 0.5]).unwrap();
        let a = sample_noise(&g, 2, &ms, 99);
        let b = sample_noise(&g, 2, &ms, 99);
        assert_eq!(a, b);
        let c = sample_noise(&g, 2, &ms, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn events_are_sorted_and_inside_span() {
        let g = build_grid(1.0, 3.0, 8).unwrap();
        let ms = MarkSpace::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let noise = sample_noise(&g, 1, &ms, 5);
        for pair in noise.events().windows(2) {
            assert!(pair[0].time < pair[1].time);
        }
        for ev in noise.events() {
            assert!(ev.time > 1.0 && ev.time <= 3.0);
        }
    }

    #[test]
    fn refine_blocks_sum_to_coarse() {
        let g = build_grid(0.0, 1.0, 16).unwrap();
        let ms = MarkSpace::new(vec![1.0], vec![2.0]).unwrap();
        let coarse = sample_noise(&g, 2, &ms, 11);
        for factor in [2usize, 3, 4] {
            let fine = refine_noise(&coarse, factor).unwrap();
            assert_eq!(fine.grid().n_steps(), 16 * factor);
            assert_eq!(fine.events(), coarse.events());
            for k in 0..16 {
                for j in 0..2 {
                    let block: f64 = (0..factor).map(|s| fine.dw(k * factor + s, j)).sum();
                    assert_relative_eq!(block, coarse.dw(k, j), epsilon = 1e-12, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn refine_twice_matches_once_at_block_level() {
        let g = build_grid(0.0, 1.0, 8).unwrap();
        let coarse = sample_noise(&g, 1, &MarkSpace::empty(), 3);
        let twice = refine_noise(&refine_noise(&coarse, 2).unwrap(), 2).unwrap();
        let once = refine_noise(&coarse, 4).unwrap();
        assert_eq!(twice.grid(), once.grid());
        for k in 0..8 {
            let a: f64 = (0..4).map(|s| twice.dw(k * 4 + s, 0)).sum();
            let b: f64 = (0..4).map(|s| once.dw(k * 4 + s, 0)).sum();
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn refine_rejects_factor_below_two() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        let noise = sample_noise(&g, 1, &MarkSpace::empty(), 1);
        assert!(refine_noise(&noise, 1).is_err());
    }

    #[test]
    fn from_parts_validates_events() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        let bad = NoiseRealization::from_parts(
            g.clone(),
            0,
            vec![],
            vec![
                JumpEvent { time: 0.7, mark_index: 0 },
                JumpEvent { time: 0.3, mark_index: 0 },
            ],
            0,
        );
        assert!(bad.is_err());
        let outside = NoiseRealization::from_parts(
            g,
            0,
            vec![],
            vec![JumpEvent { time: 1.5, mark_index: 0 }],
            0,
        );
        assert!(outside.is_err());
    }
}
