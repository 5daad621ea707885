//! Pathwise Euler integration of the state equation and of scalar random
//! fields, both driven by one shared [`NoiseRealization`].
//!
//! The stepping rule is explicit Euler–Maruyama with end-of-step jump
//! application: over step `k`,
//!
//! ```text
//! x <- x + a(t_k, x) h + b(t_k, x) dW_k,      then per event in step k:
//! x <- x + g(t_k, x, mark)
//! ```
//!
//! No higher-order scheme is offered; the crate verifies formulas, and Euler
//! keeps every term of those formulas recognizable in code.  Paths abort
//! loudly (instead of stiffening silently) when a state leaves `|x| <= 1e8`
//! or stops being finite.

use crate::error::{Error, Result};
use crate::noise::{NoiseRealization, TimeGrid};
use crate::system::{ScalarFieldProcess, Scenario};
use nalgebra::DVector;

/// States outside this bound (max norm) abort the path.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// A simulated solution path.
#[derive(Debug, Clone)]
pub struct Path {
    grid: TimeGrid,
    states: Vec<DVector<f64>>,
    /// Indices into the realization's event list, grouped by step.
    applied_events: Vec<Vec<usize>>,
}

impl Path {
    pub(crate) fn from_raw(
        grid: TimeGrid,
        states: Vec<DVector<f64>>,
        applied_events: Vec<Vec<usize>>,
    ) -> Self {
        Self {
            grid,
            states,
            applied_events,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn state(&self, node: usize) -> &DVector<f64> {
        &self.states[node]
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn terminal(&self) -> &DVector<f64> {
        self.states.last().expect("paths have n_steps + 1 states")
    }

    pub fn applied_events(&self) -> &[Vec<usize>] {
        &self.applied_events
    }
}

/// A scalar field evolved at fixed sample points.
#[derive(Debug, Clone)]
pub struct FieldTrace {
    grid: TimeGrid,
    sample_points: Vec<DVector<f64>>,
    /// `values[node][point]`.
    values: Vec<Vec<f64>>,
}

impl FieldTrace {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sample_points(&self) -> &[DVector<f64>] {
        &self.sample_points
    }

    pub fn value(&self, node: usize, point: usize) -> f64 {
        self.values[node][point]
    }

    pub fn values_at_node(&self, node: usize) -> &[f64] {
        &self.values[node]
    }
}

pub(crate) fn check_dims(s: &Scenario, x0: &DVector<f64>, noise: &NoiseRealization) -> Result<()> {
    if x0.len() != s.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {}, scenario `{}` expects {}",
            x0.len(),
            s.name,
            s.state_dim()
        )));
    }
    if noise.wiener_dim() != s.wiener_dim() {
        return Err(Error::DimensionMismatch(format!(
            "noise has {} Wiener components, scenario `{}` expects {}",
            noise.wiener_dim(),
            s.name,
            s.wiener_dim()
        )));
    }
    for ev in noise.events() {
        if ev.mark_index >= s.mark_space.len() {
            return Err(Error::DimensionMismatch(format!(
                "event mark index {} out of range for scenario `{}` ({} marks)",
                ev.mark_index,
                s.name,
                s.mark_space.len()
            )));
        }
    }
    Ok(())
}

/// Drift/diffusion part of one Euler step, shared by the path, Jacobian and
/// formula evaluators so coupled computations are bit-identical.
pub(crate) fn step_continuous(
    s: &Scenario,
    t: f64,
    x: &DVector<f64>,
    h: f64,
    dw: &[f64],
) -> DVector<f64> {
    let mut next = x + s.coeffs.drift(t, x) * h;
    if s.wiener_dim() > 0 {
        let b = s.coeffs.diffusion(t, x);
        for (k, dwk) in dw.iter().enumerate() {
            next += b.column(k) * *dwk;
        }
    }
    next
}

pub(crate) fn finite_or_diverged(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DivergedPath {
            step,
            what: "non-finite component".into(),
        });
    }
    if x.amax() > DIVERGENCE_LIMIT {
        return Err(Error::DivergedPath {
            step,
            what: format!("|x| exceeded {DIVERGENCE_LIMIT:e}"),
        });
    }
    Ok(())
}

/// Simulate the state equation from `x0` under `noise`.
pub fn simulate_path(s: &Scenario, x0: &DVector<f64>, noise: &NoiseRealization) -> Result<Path> {
    check_dims(s, x0, noise)?;
    let grid = noise.grid().clone();
    let n = grid.n_steps();
    let h = grid.h();
    let by_step = noise.events_by_step();

    let mut states = Vec::with_capacity(n + 1);
    states.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..n {
        let t = grid.node(k);
        x = step_continuous(s, t, &x, h, noise.dw_row(k));
        for &ev in &by_step[k] {
            let mark = s.mark_space.mark(noise.events()[ev].mark_index);
            x += s.coeffs.jump(t, &x, mark);
        }
        finite_or_diverged(&x, k)?;
        states.push(x.clone());
    }

    Ok(Path::from_raw(grid, states, by_step))
}

/// Evolve the scalar field `dz = Pi dt + D_k dw_k + G dnu` at fixed sample
/// points, all under the same realization.
///
/// `z0` evaluates the initial field.  Each point evolves independently; the
/// per-step update is `z += Pi h; z += D_k dW_k; z += G` per event, in that
/// order (the Itô–Wentzell evaluator mirrors the same order so degenerate
/// configurations agree exactly).
pub fn evolve_scalar_field<F: Fn(&DVector<f64>) -> f64>(
    p: &ScalarFieldProcess,
    z0: F,
    pts: &[DVector<f64>],
    marks: &[f64],
    noise: &NoiseRealization,
) -> Result<FieldTrace> {
    if p.m != noise.wiener_dim() {
        return Err(Error::DimensionMismatch(format!(
            "field process has {} Wiener components, noise has {}",
            p.m,
            noise.wiener_dim()
        )));
    }
    for ev in noise.events() {
        if ev.mark_index >= marks.len() {
            return Err(Error::DimensionMismatch(
                "event mark index out of range for the supplied mark list".into(),
            ));
        }
    }
    let grid = noise.grid().clone();
    let n = grid.n_steps();
    let h = grid.h();
    let by_step = noise.events_by_step();

    let mut current: Vec<f64> = pts.iter().map(|x| z0(x)).collect();
    let mut values = Vec::with_capacity(n + 1);
    values.push(current.clone());
    for k in 0..n {
        let t = grid.node(k);
        let dw = noise.dw_row(k);
        for (z, x) in current.iter_mut().zip(pts) {
            let mut inc = (p.pi)(t, x) * h;
            for (j, dwj) in dw.iter().enumerate() {
                inc += (p.d)(t, x, j) * *dwj;
            }
            for &ev in &by_step[k] {
                inc += (p.g)(t, x, marks[noise.events()[ev].mark_index]);
            }
            *z += inc;
            if !z.is_finite() {
                return Err(Error::DivergedField { step: k });
            }
        }
        values.push(current.clone());
    }

    Ok(FieldTrace {
        grid,
        sample_points: pts.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_grid, sample_noise, JumpEvent, MarkSpace, NoiseRealization};
    use crate::system::{self, CoefficientField, DomainBox, ScenarioParams};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use std::sync::Arc;

    fn custom_1d(
        a: f64,
        b: f64,
        g: f64,
        marks: MarkSpace,
    ) -> Scenario {
        Scenario {
            name: "custom1d".into(),
            coeffs: CoefficientField::new(
                1,
                1,
                Arc::new(move |_, _| DVector::from_element(1, a)),
                Arc::new(move |_, _| DMatrix::from_element(1, 1, b)),
                Arc::new(move |_, _, _| DVector::from_element(1, g)),
            ),
            mark_space: marks,
            domain_box: DomainBox::centered(1, 1e6),
            known_integrals: vec![],
            notes: String::new(),
        }
    }

    #[test]
    fn freeze_paths_are_constant() {
        let s = system::get_scenario("freeze").unwrap();
        let grid = build_grid(0.0, 1.0, 64).unwrap();
        let noise = sample_noise(&grid, 1, &s.mark_space, 9);
        let x0 = DVector::from_vec(vec![2.5]);
        let path = simulate_path(&s, &x0, &noise).unwrap();
        for st in path.states() {
            assert_eq!(st[0], 2.5);
        }
    }

    #[test]
    fn constant_drift_is_exact() {
        let s = custom_1d(1.0, 0.0, 0.0, MarkSpace::empty());
        for n in [4usize, 7, 64] {
            let grid = build_grid(0.0, 1.0, n).unwrap();
            let noise = sample_noise(&grid, 1, &MarkSpace::empty(), 0);
            let path = simulate_path(&s, &DVector::zeros(1), &noise).unwrap();
            assert_relative_eq!(path.terminal()[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pure_jump_counting_is_exact() {
        let s = custom_1d(0.0, 0.0, 1.0, MarkSpace::new(vec![0.0], vec![1.0]).unwrap());
        let grid = build_grid(0.0, 1.0, 10).unwrap();
        let noise = NoiseRealization::from_parts(
            grid,
            1,
            vec![0.0; 10],
            vec![
                JumpEvent { time: 0.3, mark_index: 0 },
                JumpEvent { time: 0.7, mark_index: 0 },
            ],
            0,
        )
        .unwrap();
        let path = simulate_path(&s, &DVector::zeros(1), &noise).unwrap();
        assert_eq!(path.terminal()[0], 2.0);
        let events: usize = path.applied_events().iter().map(|e| e.len()).sum();
        assert_eq!(events, 2);
    }

    #[test]
    fn deterministic_ou_converges_first_order() {
        let mut params = ScenarioParams::new();
        params.insert("sigma".into(), 0.0);
        params.insert("lambda".into(), 0.0);
        let s = system::build_scenario("ou1d", &params).unwrap();
        let exact = (-1.0f64).exp();
        for lvl in 6..=10 {
            let n = 1usize << lvl;
            let grid = build_grid(0.0, 1.0, n).unwrap();
            let noise = sample_noise(&grid, 1, &MarkSpace::empty(), 0);
            let path = simulate_path(&s, &DVector::from_element(1, 1.0), &noise).unwrap();
            let err = (path.terminal()[0] - exact).abs();
            assert!(
                err <= 1.5 * grid.h(),
                "h = {:e}: error {err:e} above 1.5 h",
                grid.h()
            );
        }
    }

    #[test]
    fn coupled_runs_are_bit_identical() {
        let s = system::get_scenario("rot2d").unwrap();
        let grid = build_grid(0.0, 1.0, 128).unwrap();
        let noise = sample_noise(&grid, 1, &s.mark_space, 17);
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let a = simulate_path(&s, &x0, &noise).unwrap();
        let b = simulate_path(&s, &x0, &noise).unwrap();
        for (sa, sb) in a.states().iter().zip(b.states()) {
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let s = Scenario {
            name: "explode".into(),
            coeffs: CoefficientField::new(
                1,
                1,
                Arc::new(|_, x: &DVector<f64>| DVector::from_element(1, x[0] * x[0])),
                Arc::new(|_, _| DMatrix::zeros(1, 1)),
                Arc::new(|_, _, _| DVector::zeros(1)),
            ),
            mark_space: MarkSpace::empty(),
            domain_box: DomainBox::centered(1, 1e9),
            known_integrals: vec![],
            notes: String::new(),
        };
        let grid = build_grid(0.0, 1.0, 10).unwrap();
        let noise = sample_noise(&grid, 1, &MarkSpace::empty(), 0);
        let err = simulate_path(&s, &DVector::from_element(1, 100.0), &noise).unwrap_err();
        match err {
            Error::DivergedPath { step, .. } => assert!(step < 10),
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn zero_field_process_is_constant() {
        let p = ScalarFieldProcess::zero(1);
        let grid = build_grid(0.0, 1.0, 32).unwrap();
        let noise = sample_noise(&grid, 1, &MarkSpace::empty(), 4);
        let pts = vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![2.0])];
        let trace = evolve_scalar_field(&p, |x| x[0] * x[0], &pts, &[], &noise).unwrap();
        for k in 0..=32 {
            assert_eq!(trace.value(k, 0), 0.0);
            assert_eq!(trace.value(k, 1), 4.0);
        }
    }

    #[test]
    fn unit_drift_field_adds_time() {
        let p = ScalarFieldProcess {
            m: 1,
            pi: Arc::new(|_, _| 1.0),
            d: Arc::new(|_, _, _| 0.0),
            g: Arc::new(|_, _, _| 0.0),
            d_grad: None,
        };
        let grid = build_grid(0.0, 1.0, 64).unwrap();
        let noise = sample_noise(&grid, 1, &MarkSpace::empty(), 4);
        let pts = vec![DVector::from_vec(vec![0.5])];
        let trace = evolve_scalar_field(&p, |x| x[0], &pts, &[], &noise).unwrap();
        assert_relative_eq!(trace.value(64, 0), 0.5 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn additive_noise_field_is_point_independent() {
        let p = ScalarFieldProcess {
            m: 1,
            pi: Arc::new(|_, _| 0.0),
            d: Arc::new(|_, _, _| 1.0),
            g: Arc::new(|_, _, _| 0.0),
            d_grad: None,
        };
        let grid = build_grid(0.0, 1.0, 128).unwrap();
        let noise = sample_noise(&grid, 1, &MarkSpace::empty(), 21);
        let pts = vec![
            DVector::from_vec(vec![-1.0]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![3.0]),
        ];
        let trace = evolve_scalar_field(&p, |x| x[0], &pts, &[], &noise).unwrap();
        let total = noise.total_increment()[0];
        for i in 0..pts.len() {
            let gain = trace.value(128, i) - trace.value(0, i);
            assert_relative_eq!(gain, total, epsilon = 1e-12);
        }
    }
}
