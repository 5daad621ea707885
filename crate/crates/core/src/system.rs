//! SDE scenarios: the coefficient triple `(a, b, g)` with first spatial
//! derivatives, plus a registry of named, code-defined systems.
//!
//! The state equation is
//!
//! ```text
//! dx_i = a_i(t, x) dt + sum_k b_ik(t, x) dw_k + jump terms g_i(t, x; mark)
//! ```
//!
//! Coefficients are registered in code (closures), not parsed from config:
//! arbitrary user functions cannot round-trip a text format, and a compiled
//! registry keeps them differentiable.  Analytic spatial derivatives are
//! optional; central finite differences with per-axis step
//! `1e-5 * max(1, |x_j|)` substitute transparently when they are absent.
//!
//! All checks live on a bounded `domain_box`: linear coefficients are not
//! globally bounded, so the smoothness assumptions are enforced only there.

use crate::error::{Error, Result};
use crate::fd;
use crate::noise::MarkSpace;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::sync::Arc;

pub type VecFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatFn = Arc<dyn Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type JumpFn = Arc<dyn Fn(f64, &DVector<f64>, f64) -> DVector<f64> + Send + Sync>;
pub type JumpJacFn = Arc<dyn Fn(f64, &DVector<f64>, f64) -> DMatrix<f64> + Send + Sync>;
/// Per-Wiener-component diffusion derivative: `(t, x, k) -> d b_{.k} / d x`.
pub type DiffusionJacFn = Arc<dyn Fn(f64, &DVector<f64>, usize) -> DMatrix<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>;

/// Coefficients of one scenario with optional analytic derivatives.
#[derive(Clone)]
pub struct CoefficientField {
    n: usize,
    m: usize,
    drift: VecFn,
    diffusion: MatFn,
    jump: JumpFn,
    drift_jac: Option<MatFn>,
    diffusion_jac: Option<DiffusionJacFn>,
    jump_jac: Option<JumpJacFn>,
}

impl CoefficientField {
    pub fn new(n: usize, m: usize, drift: VecFn, diffusion: MatFn, jump: JumpFn) -> Self {
        Self {
            n,
            m,
            drift,
            diffusion,
            jump,
            drift_jac: None,
            diffusion_jac: None,
            jump_jac: None,
        }
    }

    pub fn with_drift_jacobian(mut self, jac: MatFn) -> Self {
        self.drift_jac = Some(jac);
        self
    }

    pub fn with_diffusion_jacobian(mut self, jac: DiffusionJacFn) -> Self {
        self.diffusion_jac = Some(jac);
        self
    }

    pub fn with_jump_jacobian(mut self, jac: JumpJacFn) -> Self {
        self.jump_jac = Some(jac);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn wiener_dim(&self) -> usize {
        self.m
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.drift_jac.is_some() && self.diffusion_jac.is_some() && self.jump_jac.is_some()
    }

    pub fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(t, x)
    }

    /// `n x m` diffusion matrix.
    pub fn diffusion(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        (self.diffusion)(t, x)
    }

    pub fn jump(&self, t: f64, x: &DVector<f64>, mark: f64) -> DVector<f64> {
        (self.jump)(t, x, mark)
    }

    /// `d a_i / d x_j`, analytic or central finite difference.
    pub fn drift_jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.drift_jac {
            Some(j) => j(t, x),
            None => fd::jacobian_central(|p| (self.drift)(t, p), x),
        }
    }

    /// `d b_{i,k} / d x_j` for Wiener component `k`.
    pub fn diffusion_jacobian(&self, t: f64, x: &DVector<f64>, k: usize) -> DMatrix<f64> {
        match &self.diffusion_jac {
            Some(j) => j(t, x, k),
            None => fd::jacobian_central(|p| (self.diffusion)(t, p).column(k).into_owned(), x),
        }
    }

    /// `d g_i / d x_j` at mark value `mark`.
    pub fn jump_jacobian(&self, t: f64, x: &DVector<f64>, mark: f64) -> DMatrix<f64> {
        match &self.jump_jac {
            Some(j) => j(t, x, mark),
            None => fd::jacobian_central(|p| (self.jump)(t, p, mark), x),
        }
    }
}

/// Axis-aligned box used for lattice checks and domain guards.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(
                "domain box bounds must have equal length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidArgument(
                "domain box must have positive extent on every axis".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[-r, r]^n`.
    pub fn centered(n: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; n],
            hi: vec![r; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Uniform lattice with `points_per_axis` nodes per axis (including the
    /// endpoints), `points_per_axis^n` points in total.
    pub fn lattice(&self, points_per_axis: usize) -> Vec<DVector<f64>> {
        assert!(points_per_axis >= 2);
        let n = self.dim();
        let total = points_per_axis.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut idx = flat;
            let mut p = DVector::zeros(n);
            for a in 0..n {
                let i = idx % points_per_axis;
                idx /= points_per_axis;
                let f = i as f64 / (points_per_axis - 1) as f64;
                p[a] = self.lo[a] + f * (self.hi[a] - self.lo[a]);
            }
            out.push(p);
        }
        out
    }
}

/// A named SDE system: coefficients, mark space, domain box and associated
/// metadata.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub coeffs: CoefficientField,
    pub mark_space: MarkSpace,
    pub domain_box: DomainBox,
    pub known_integrals: Vec<String>,
    pub notes: String,
}

impl Scenario {
    pub fn state_dim(&self) -> usize {
        self.coeffs.state_dim()
    }

    pub fn wiener_dim(&self) -> usize {
        self.coeffs.wiener_dim()
    }
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("n", &self.state_dim())
            .field("m", &self.wiener_dim())
            .field("marks", &self.mark_space.len())
            .finish()
    }
}

/// A scalar random field process `dz = Pi dt + D_k dw_k + G nu(dt, dmark)`;
/// the coefficients live on the state space of an owning scenario.
#[derive(Clone)]
pub struct ScalarFieldProcess {
    pub m: usize,
    /// Drift `Pi(t, x)`.
    pub pi: ScalarFn,
    /// Wiener coefficients `D_k(t, x)`, `k = 0..m`.
    pub d: Arc<dyn Fn(f64, &DVector<f64>, usize) -> f64 + Send + Sync>,
    /// Jump coefficient `G(t, x, mark)`.
    pub g: Arc<dyn Fn(f64, &DVector<f64>, f64) -> f64 + Send + Sync>,
    /// Optional analytic `d D_k / d x_i` as `(t, x, k) -> gradient`.
    pub d_grad: Option<Arc<dyn Fn(f64, &DVector<f64>, usize) -> DVector<f64> + Send + Sync>>,
}

impl ScalarFieldProcess {
    /// The zero process: `Pi = D = G = 0`.
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            pi: Arc::new(|_, _| 0.0),
            d: Arc::new(|_, _, _| 0.0),
            g: Arc::new(|_, _, _| 0.0),
            d_grad: None,
        }
    }

    /// `d D_k / d x`, analytic or two-point central difference.
    pub fn d_gradient(&self, t: f64, x: &DVector<f64>, k: usize) -> DVector<f64> {
        match &self.d_grad {
            Some(g) => g(t, x, k),
            None => {
                let n = x.len();
                let mut grad = DVector::zeros(n);
                for i in 0..n {
                    let di = fd::coeff_step(x[i]);
                    let mut xp = x.clone();
                    xp[i] += di;
                    let mut xm = x.clone();
                    xm[i] -= di;
                    grad[i] = ((self.d)(t, &xp, k) - (self.d)(t, &xm, k)) / (2.0 * di);
                }
                grad
            }
        }
    }
}

/// Central difference `(f(x + delta e_j) - f(x - delta e_j)) / (2 delta)` of a
/// scalar evaluator.
pub fn fd_derivative<F: Fn(f64, &DVector<f64>) -> f64>(
    f: F,
    t: f64,
    x: &DVector<f64>,
    direction: usize,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(
            "finite-difference step must be positive".into(),
        ));
    }
    if direction >= x.len() {
        return Err(Error::InvalidArgument(format!(
            "direction {direction} out of bounds for dimension {}",
            x.len()
        )));
    }
    let mut xp = x.clone();
    xp[direction] += delta;
    let mut xm = x.clone();
    xm[direction] -= delta;
    Ok((f(t, &xp) - f(t, &xm)) / (2.0 * delta))
}

/// Worst analytic-vs-finite-difference discrepancy of one coefficient.
#[derive(Debug, Clone)]
pub struct DerivativeCheck {
    pub coefficient: String,
    pub max_error: f64,
    pub at_point: Vec<f64>,
    pub pass: bool,
}

/// Outcome of [`validate_scenario`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub scenario: String,
    pub tolerance: f64,
    pub checks: Vec<DerivativeCheck>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_error).fold(0.0, f64::max)
    }
}

/// Compare analytic coefficient derivatives against central differences with
/// step `delta` over `points`, at `t = 0`.
pub fn validate_scenario(
    s: &Scenario,
    points: &[DVector<f64>],
    delta: f64,
    tol: f64,
) -> Result<ValidationReport> {
    if !s.coeffs.has_analytic_derivatives() {
        return Err(Error::InvalidArgument(format!(
            "scenario `{}` has no analytic derivatives to validate",
            s.name
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(
            "finite-difference step must be positive".into(),
        ));
    }
    let n = s.state_dim();
    let m = s.wiener_dim();
    let t = 0.0;

    let mut checks = Vec::new();
    let mut check = |name: String,
                     analytic: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
                     value: &dyn Fn(&DVector<f64>) -> DVector<f64>| {
        let mut worst = 0.0f64;
        let mut where_ = vec![0.0; n];
        for x in points {
            let a = analytic(x);
            for j in 0..n {
                let mut xp = x.clone();
                xp[j] += delta;
                let mut xm = x.clone();
                xm[j] -= delta;
                let col = (value(&xp) - value(&xm)) / (2.0 * delta);
                for i in 0..a.nrows() {
                    let err = (a[(i, j)] - col[i]).abs();
                    if err > worst {
                        worst = err;
                        where_ = x.iter().copied().collect();
                    }
                }
            }
        }
        checks.push(DerivativeCheck {
            coefficient: name,
            max_error: worst,
            at_point: where_,
            pass: worst <= tol,
        });
    };

    check(
        "drift".into(),
        &|x| s.coeffs.drift_jacobian(t, x),
        &|x| s.coeffs.drift(t, x),
    );
    for k in 0..m {
        check(
            format!("diffusion[{k}]"),
            &|x| s.coeffs.diffusion_jacobian(t, x, k),
            &|x| s.coeffs.diffusion(t, x).column(k).into_owned(),
        );
    }
    for (idx, &mark) in s.mark_space.marks().iter().enumerate() {
        check(
            format!("jump[mark {idx}]"),
            &|x| s.coeffs.jump_jacobian(t, x, mark),
            &|x| s.coeffs.jump(t, x, mark),
        );
    }

    Ok(ValidationReport {
        scenario: s.name.clone(),
        tolerance: tol,
        checks,
    })
}

/// Overridable per-scenario parameters (`sigma`, `lambda`, ...).
pub type ScenarioParams = BTreeMap<String, f64>;

const SCENARIO_NAMES: &[&str] = &["freeze", "rot2d", "ou1d"];

fn param(params: &ScenarioParams, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn reject_unknown(params: &ScenarioParams, accepted: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !accepted.contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown scenario parameter `{key}`; accepted: {accepted:?}"
            )));
        }
    }
    Ok(())
}

/// Names of all registered scenarios.
pub fn scenario_names() -> Vec<&'static str> {
    SCENARIO_NAMES.to_vec()
}

/// Look up a registered scenario with default parameters.
pub fn get_scenario(name: &str) -> Result<Scenario> {
    build_scenario(name, &ScenarioParams::new())
}

/// Look up a registered scenario, overriding its parameters.
pub fn build_scenario(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    match name {
        "freeze" => {
            reject_unknown(params, &[])?;
            Ok(freeze())
        }
        "rot2d" => {
            reject_unknown(params, &["mark_angle", "jump_rate", "drift_eps"])?;
            Ok(rot2d(
                param(params, "mark_angle", std::f64::consts::FRAC_PI_6),
                param(params, "jump_rate", 1.0),
                param(params, "drift_eps", 0.0),
            ))
        }
        "ou1d" => {
            reject_unknown(params, &["sigma", "jump_size", "lambda"])?;
            Ok(ou1d(
                param(params, "sigma", 0.5),
                param(params, "jump_size", 1.0),
                param(params, "lambda", 1.0),
            ))
        }
        _ => Err(Error::UnknownScenario {
            name: name.to_string(),
            available: SCENARIO_NAMES.join(", "),
        }),
    }
}

/// Zero system: `a = b = g = 0` in one dimension.  Every path is constant.
pub fn freeze() -> Scenario {
    let n = 1;
    let m = 1;
    Scenario {
        name: "freeze".into(),
        coeffs: CoefficientField::new(
            n,
            m,
            Arc::new(move |_, _| DVector::zeros(1)),
            Arc::new(move |_, _| DMatrix::zeros(1, 1)),
            Arc::new(move |_, _, _| DVector::zeros(1)),
        )
        .with_drift_jacobian(Arc::new(|_, _| DMatrix::zeros(1, 1)))
        .with_diffusion_jacobian(Arc::new(|_, _, _| DMatrix::zeros(1, 1)))
        .with_jump_jacobian(Arc::new(|_, _, _| DMatrix::zeros(1, 1))),
        mark_space: MarkSpace::empty(),
        domain_box: DomainBox::centered(1, 10.0),
        known_integrals: vec![],
        notes: "zero system; paths, Jacobians and kernels are constant".into(),
    }
}

/// Planar rotation system: drift `(-x1/2, -x2/2)` (plus an optional
/// perturbation `(eps, 0)`), one Wiener component with diffusion column
/// `(-x2, x1)`, and jumps that rotate the state by the mark angle.
/// `u = x1^2 + x2^2` is a first integral of the unperturbed system.
pub fn rot2d(mark_angle: f64, jump_rate: f64, drift_eps: f64) -> Scenario {
    let mark_space = if jump_rate > 0.0 {
        MarkSpace::new(vec![mark_angle], vec![jump_rate]).expect("positive rate")
    } else {
        MarkSpace::empty()
    };
    Scenario {
        name: "rot2d".into(),
        coeffs: CoefficientField::new(
            2,
            1,
            Arc::new(move |_, x: &DVector<f64>| {
                DVector::from_vec(vec![-0.5 * x[0] + drift_eps, -0.5 * x[1]])
            }),
            Arc::new(|_, x: &DVector<f64>| DMatrix::from_column_slice(2, 1, &[-x[1], x[0]])),
            Arc::new(|_, x: &DVector<f64>, mark: f64| {
                let (s, c) = mark.sin_cos();
                DVector::from_vec(vec![c * x[0] - s * x[1] - x[0], s * x[0] + c * x[1] - x[1]])
            }),
        )
        .with_drift_jacobian(Arc::new(|_, _| {
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -0.5])
        }))
        .with_diffusion_jacobian(Arc::new(|_, _, _| {
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
        }))
        .with_jump_jacobian(Arc::new(|_, _, mark: f64| {
            let (s, c) = mark.sin_cos();
            DMatrix::from_row_slice(2, 2, &[c - 1.0, -s, s, c - 1.0])
        })),
        mark_space,
        domain_box: DomainBox::centered(2, 2.0),
        known_integrals: vec!["r2".into()],
        notes: "rotational flow; |x|^2 is conserved along every path".into(),
    }
}

/// Ornstein-Uhlenbeck with additive noise and constant jumps:
/// `dx = -x dt + sigma dw + jump_size * mark * dnu`, one mark `1.0` of rate
/// `lambda` (no marks when `lambda = 0`).
pub fn ou1d(sigma: f64, jump_size: f64, lambda: f64) -> Scenario {
    let mark_space = if lambda > 0.0 {
        MarkSpace::new(vec![1.0], vec![lambda]).expect("positive rate")
    } else {
        MarkSpace::empty()
    };
    Scenario {
        name: "ou1d".into(),
        coeffs: CoefficientField::new(
            1,
            1,
            Arc::new(|_, x: &DVector<f64>| DVector::from_vec(vec![-x[0]])),
            Arc::new(move |_, _| DMatrix::from_element(1, 1, sigma)),
            Arc::new(move |_, _, mark: f64| DVector::from_element(1, jump_size * mark)),
        )
        .with_drift_jacobian(Arc::new(|_, _| DMatrix::from_element(1, 1, -1.0)))
        .with_diffusion_jacobian(Arc::new(|_, _, _| DMatrix::zeros(1, 1)))
        .with_jump_jacobian(Arc::new(|_, _, _| DMatrix::zeros(1, 1))),
        mark_space,
        domain_box: DomainBox::centered(1, 6.0),
        known_integrals: vec![],
        notes: "mean-reverting linear system with a known closed-form solution".into(),
    }
}

/// The scalar field process registered for convergence studies on `rot2d`:
/// `Pi = 0`, `D_1(t, x) = x1`, `G = 0`, initial field `z0(x) = x1`.
///
/// The state-dependent Wiener coefficient makes the composite and
/// field-then-evaluate routes differ at a measurable Euler order; a constant
/// `D` would make both routes agree to rounding at any step size.
pub fn rot2d_z_process() -> (ScalarFieldProcess, Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>)
{
    let process = ScalarFieldProcess {
        m: 1,
        pi: Arc::new(|_, _| 0.0),
        d: Arc::new(|_, x: &DVector<f64>, _| x[0]),
        g: Arc::new(|_, _, _| 0.0),
        d_grad: Some(Arc::new(|_, x: &DVector<f64>, _| {
            let mut g = DVector::zeros(x.len());
            g[0] = 1.0;
            g
        })),
    };
    (process, Arc::new(|x: &DVector<f64>| x[0]))
}
