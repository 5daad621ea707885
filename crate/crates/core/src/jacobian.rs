//! The variational (Jacobian) flow coupled to a path, and an independent
//! bump-and-rerun finite-difference oracle for it.
//!
//! `J(t)` is the derivative of the flow map `x(0) -> x(t)`.  It starts at the
//! identity and evolves by the linearized dynamics: per Euler step
//!
//! ```text
//! J <- J + [da/dx h + sum_k db_k/dx dW_k] J,
//! ```
//!
//! and per jump event `J <- (I + dg/dx(t, x-, mark)) J` at the pre-jump
//! state.  This is exactly the derivative of the discrete Euler map, so the
//! finite-difference oracle (re-running the integrator from bumped initial
//! conditions on the same realization) must agree up to the bump's truncation
//! error.  The determinant is recomputed from the stored matrix by LU at
//! every node rather than evolved by its own equation, which would compound a
//! second discretization error.

use crate::error::{Error, Result};
use crate::integrate::{self, Path};
use crate::noise::{NoiseRealization, TimeGrid};
use crate::system::Scenario;
use nalgebra::{DMatrix, DVector};

/// `|det J|` below this threshold marks the matrix as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Jacobian matrices along a path, with their determinants.
#[derive(Debug, Clone)]
pub struct JacobianState {
    grid: TimeGrid,
    matrices: Vec<DMatrix<f64>>,
    dets: Vec<f64>,
    degenerate_steps: Vec<usize>,
}

impl JacobianState {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn matrix(&self, node: usize) -> &DMatrix<f64> {
        &self.matrices[node]
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        self.matrices.last().expect("at least the initial node")
    }

    pub fn det(&self, node: usize) -> f64 {
        self.dets[node]
    }

    pub fn dets(&self) -> &[f64] {
        &self.dets
    }

    /// Nodes at which `|det J|` fell below [`DEGENERACY_THRESHOLD`];
    /// the computation continues through them.
    pub fn degenerate_steps(&self) -> &[usize] {
        &self.degenerate_steps
    }
}

/// Simulate the path together with its variational flow.
pub fn simulate_jacobian(
    s: &Scenario,
    x0: &DVector<f64>,
    noise: &NoiseRealization,
) -> Result<(Path, JacobianState)> {
    integrate::check_dims(s, x0, noise)?;
    let grid = noise.grid().clone();
    let n_steps = grid.n_steps();
    let h = grid.h();
    let n = s.state_dim();
    let by_step = noise.events_by_step();

    let mut x = x0.clone();
    let mut jac = DMatrix::<f64>::identity(n, n);

    let mut states = Vec::with_capacity(n_steps + 1);
    let mut matrices = Vec::with_capacity(n_steps + 1);
    let mut dets = Vec::with_capacity(n_steps + 1);
    let mut degenerate = Vec::new();
    states.push(x.clone());
    matrices.push(jac.clone());
    dets.push(1.0);

    for k in 0..n_steps {
        let t = grid.node(k);
        // Linearized step factor at the pre-step state.
        let mut factor = DMatrix::<f64>::identity(n, n) + s.coeffs.drift_jacobian(t, &x) * h;
        for (j, dwj) in noise.dw_row(k).iter().enumerate() {
            factor += s.coeffs.diffusion_jacobian(t, &x, j) * *dwj;
        }
        jac = &factor * &jac;
        x = integrate::step_continuous(s, t, &x, h, noise.dw_row(k));

        for &ev in &by_step[k] {
            let mark = s.mark_space.mark(noise.events()[ev].mark_index);
            let jump_factor =
                DMatrix::<f64>::identity(n, n) + s.coeffs.jump_jacobian(t, &x, mark);
            jac = &jump_factor * &jac;
            x += s.coeffs.jump(t, &x, mark);
        }

        integrate::finite_or_diverged(&x, k)?;
        let det = jac.clone().lu().determinant();
        if det.abs() < DEGENERACY_THRESHOLD {
            degenerate.push(k);
        }
        states.push(x.clone());
        matrices.push(jac.clone());
        dets.push(det);
    }

    let path = Path::from_raw(grid.clone(), states, by_step);
    Ok((
        path,
        JacobianState {
            grid,
            matrices,
            dets,
            degenerate_steps: degenerate,
        },
    ))
}

/// Central-difference approximation of the terminal Jacobian: column `j` is
/// `(x(T; x0 + d e_j) - x(T; x0 - d e_j)) / (2 d)`, all paths on the same
/// realization.
pub fn jacobian_fd_oracle(
    s: &Scenario,
    x0: &DVector<f64>,
    noise: &NoiseRealization,
    bump: f64,
) -> Result<DMatrix<f64>> {
    if !(bump > 0.0) {
        return Err(Error::InvalidArgument("bump size must be positive".into()));
    }
    let n = s.state_dim();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x0.clone();
        xp[j] += bump;
        let mut xm = x0.clone();
        xm[j] -= bump;
        let tp = integrate::simulate_path(s, &xp, noise)
            .map_err(|e| Error::OracleFailure(Box::new(e)))?;
        let tm = integrate::simulate_path(s, &xm, noise)
            .map_err(|e| Error::OracleFailure(Box::new(e)))?;
        let col = (tp.terminal() - tm.terminal()) / (2.0 * bump);
        jac.set_column(j, &col);
    }
    Ok(jac)
}
