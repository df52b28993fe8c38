use nalgebra::{DMatrix, DVector};

use super::{MpcError, QpProblem};
use crate::plant::LtiModel;

/// Minimum eigenvalue enforced on the input weight so the QP minimizer is
/// unique.
pub const QP_INPUT_WEIGHT_FLOOR: f64 = 1e-9;
/// Ratio of the quadratic slack regularizer to the linear slack weight;
/// keeps the condensed Hessian positive definite without materially
/// changing the L1 penalty.
pub const SLACK_QUAD_RATIO: f64 = 1e-4;

/// Horizon-N optimal control problem: weighted output tracking and input
/// cost over the model dynamics, with hard input bounds and softened
/// output bounds.
#[derive(Debug, Clone)]
pub struct OcpSpec {
    pub model: LtiModel,
    pub horizon: usize,
    /// Output-tracking weight, p x p PSD.
    pub q_output: DMatrix<f64>,
    /// Input weight, m x m, strictly PD after construction.
    pub q_input: DMatrix<f64>,
    /// Reference window, one p-vector per horizon step.
    pub reference: Vec<DVector<f64>>,
    pub u_lower: DVector<f64>,
    pub u_upper: DVector<f64>,
    pub y_lower: DVector<f64>,
    pub y_upper: DVector<f64>,
    pub x0: DVector<f64>,
    /// Linear penalty on output-constraint violations.
    pub slack_weight: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn build_ocp(
    model: LtiModel,
    horizon: usize,
    q_output: DMatrix<f64>,
    q_input: DMatrix<f64>,
    reference: Vec<DVector<f64>>,
    u_box: (DVector<f64>, DVector<f64>),
    y_box: (DVector<f64>, DVector<f64>),
    x0: DVector<f64>,
    slack_weight: f64,
) -> Result<OcpSpec, MpcError> {
    let n = model.n_states();
    let m = model.n_inputs();
    let p = model.n_outputs();
    if horizon < 1 {
        return Err(MpcError::InvalidSpec("horizon must be at least 1".into()));
    }
    check_square("Q", &q_output, p)?;
    check_square("Q'", &q_input, m)?;
    let q_min = min_sym_eig(&q_output);
    if q_min < -1e-9 {
        return Err(MpcError::InvalidSpec(format!(
            "output weight must be PSD, min eigenvalue {q_min:.3e}"
        )));
    }
    let qp_min = min_sym_eig(&q_input);
    if qp_min < -1e-9 {
        return Err(MpcError::InvalidSpec(format!(
            "input weight must be PSD, min eigenvalue {qp_min:.3e}"
        )));
    }
    // Jitter the input weight up to the floor so the minimizer is unique.
    let mut q_input = q_input;
    if qp_min < QP_INPUT_WEIGHT_FLOOR {
        let bump = QP_INPUT_WEIGHT_FLOOR - qp_min.min(0.0);
        for i in 0..m {
            q_input[(i, i)] += bump;
        }
    }
    if reference.len() != horizon {
        return Err(MpcError::DimensionMismatch(format!(
            "reference length {} != horizon {horizon}",
            reference.len()
        )));
    }
    if reference.iter().any(|r| r.len() != p) {
        return Err(MpcError::DimensionMismatch(
            "reference entries must match the output dimension".into(),
        ));
    }
    let (u_lower, u_upper) = u_box;
    let (y_lower, y_upper) = y_box;
    check_box("input", &u_lower, &u_upper, m)?;
    check_box("output", &y_lower, &y_upper, p)?;
    if x0.len() != n {
        return Err(MpcError::DimensionMismatch(format!(
            "x0 length {} != state dimension {n}",
            x0.len()
        )));
    }
    if !(slack_weight >= 0.0) || !slack_weight.is_finite() {
        return Err(MpcError::InvalidSpec(format!(
            "slack weight must be finite and nonnegative, got {slack_weight}"
        )));
    }
    Ok(OcpSpec {
        model,
        horizon,
        q_output,
        q_input,
        reference,
        u_lower,
        u_upper,
        y_lower,
        y_upper,
        x0,
        slack_weight,
    })
}

fn check_square(name: &str, m: &DMatrix<f64>, dim: usize) -> Result<(), MpcError> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(MpcError::DimensionMismatch(format!(
            "{name} must be {dim}x{dim}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if (m - m.transpose()).amax() > 1e-9 {
        return Err(MpcError::InvalidSpec(format!("{name} must be symmetric")));
    }
    Ok(())
}

fn check_box(
    name: &str,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    dim: usize,
) -> Result<(), MpcError> {
    if lower.len() != dim || upper.len() != dim {
        return Err(MpcError::DimensionMismatch(format!(
            "{name} bounds must have length {dim}"
        )));
    }
    for i in 0..dim {
        if lower[i] > upper[i] {
            return Err(MpcError::InvalidSpec(format!(
                "{name} bound {i} crosses: {} > {}",
                lower[i], upper[i]
            )));
        }
    }
    Ok(())
}

fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    ((m + m.transpose()) * 0.5)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Prediction matrices for the condensed form: `y = gamma x0 + phi u` with
/// `u` the stacked input sequence.
pub(crate) fn prediction_matrices(model: &LtiModel, horizon: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = model.n_states();
    let m = model.n_inputs();
    let p = model.n_outputs();
    let mut gamma = DMatrix::<f64>::zeros(horizon * p, n);
    let mut phi = DMatrix::<f64>::zeros(horizon * p, horizon * m);

    // Powers of A computed incrementally: a_pow[k] = A^k.
    let mut a_pow = DMatrix::<f64>::identity(n, n);
    let mut c_a_pows = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        c_a_pows.push(&model.c * &a_pow);
        a_pow = &a_pow * &model.a;
    }
    for k in 0..horizon {
        gamma
            .view_mut((k * p, 0), (p, n))
            .copy_from(&c_a_pows[k]);
        for j in 0..=k {
            let block = if j == k {
                model.d.clone()
            } else {
                &c_a_pows[k - 1 - j] * &model.b
            };
            phi.view_mut((k * p, j * m), (p, m)).copy_from(&block);
        }
    }
    (gamma, phi)
}

/// Rows of the condensed constraint matrix, in order: hard input boxes,
/// softened output lower bounds, softened output upper bounds, slack
/// nonnegativity. Each finite output bound row gets its own slack.
pub(crate) struct CondensedLayout {
    pub n_u: usize,
    pub n_slacks: usize,
    /// (constraint row, gamma row, bound value, is_lower) for rows whose
    /// bounds shift with `gamma x0`.
    pub output_rows: Vec<(usize, usize, f64, bool)>,
}

pub(crate) fn condense_with_layout(ocp: &OcpSpec) -> (QpProblem, CondensedLayout) {
    let horizon = ocp.horizon;
    let m = ocp.model.n_inputs();
    let p = ocp.model.n_outputs();
    let n_u = horizon * m;

    let (gamma, phi) = prediction_matrices(&ocp.model, horizon);
    let q_bar = block_diag(&ocp.q_output, horizon);
    let qp_bar = block_diag(&ocp.q_input, horizon);

    // Count softened rows: one per finite output bound per step.
    let mut lower_outputs = Vec::new();
    let mut upper_outputs = Vec::new();
    for k in 0..horizon {
        for i in 0..p {
            if ocp.y_lower[i].is_finite() {
                lower_outputs.push((k, i));
            }
            if ocp.y_upper[i].is_finite() {
                upper_outputs.push((k, i));
            }
        }
    }
    let n_slacks = lower_outputs.len() + upper_outputs.len();
    let n_z = n_u + n_slacks;
    let n_rows = n_u + n_slacks + n_slacks; // boxes + output rows + slack rows

    let mut h = DMatrix::<f64>::zeros(n_z, n_z);
    // Hessian of the cost, i.e. twice the quadratic-form matrix.
    let h_uu = phi.transpose() * &q_bar * &phi + &qp_bar;
    h.view_mut((0, 0), (n_u, n_u))
        .copy_from(&(&h_uu + h_uu.transpose()));
    let slack_quad = 2.0 * (ocp.slack_weight * SLACK_QUAD_RATIO).max(QP_INPUT_WEIGHT_FLOOR);
    for s in 0..n_slacks {
        h[(n_u + s, n_u + s)] = slack_quad;
    }

    let r_stack = stack_vectors(&ocp.reference);
    let offset = &gamma * &ocp.x0 - &r_stack;
    let mut f = DVector::<f64>::zeros(n_z);
    let f_u = phi.transpose() * &q_bar * offset * 2.0;
    f.rows_mut(0, n_u).copy_from(&f_u);
    for s in 0..n_slacks {
        f[n_u + s] = ocp.slack_weight;
    }

    let mut a = DMatrix::<f64>::zeros(n_rows, n_z);
    let mut lower = DVector::<f64>::from_element(n_rows, f64::NEG_INFINITY);
    let mut upper = DVector::<f64>::from_element(n_rows, f64::INFINITY);

    // Hard input boxes.
    for k in 0..horizon {
        for i in 0..m {
            let row = k * m + i;
            a[(row, row)] = 1.0;
            lower[row] = ocp.u_lower[i];
            upper[row] = ocp.u_upper[i];
        }
    }

    let gamma_x0 = &gamma * &ocp.x0;
    let mut output_rows = Vec::with_capacity(n_slacks);
    let mut row = n_u;
    let mut slack = n_u;
    for &(k, i) in &lower_outputs {
        let g_row = k * p + i;
        for j in 0..n_u {
            a[(row, j)] = phi[(g_row, j)];
        }
        a[(row, slack)] = 1.0; // y_k + s >= lo
        lower[row] = ocp.y_lower[i] - gamma_x0[g_row];
        output_rows.push((row, g_row, ocp.y_lower[i], true));
        row += 1;
        slack += 1;
    }
    for &(k, i) in &upper_outputs {
        let g_row = k * p + i;
        for j in 0..n_u {
            a[(row, j)] = phi[(g_row, j)];
        }
        a[(row, slack)] = -1.0; // y_k - s <= hi
        upper[row] = ocp.y_upper[i] - gamma_x0[g_row];
        output_rows.push((row, g_row, ocp.y_upper[i], false));
        row += 1;
        slack += 1;
    }
    // Slack nonnegativity.
    for s in 0..n_slacks {
        a[(row, n_u + s)] = 1.0;
        lower[row] = 0.0;
        row += 1;
    }
    debug_assert_eq!(row, n_rows);

    (
        QpProblem {
            h,
            f,
            a,
            lower,
            upper,
            n_slacks,
        },
        CondensedLayout {
            n_u,
            n_slacks,
            output_rows,
        },
    )
}

/// Eliminates the states from an [`OcpSpec`] and returns the dense QP over
/// stacked inputs and output-constraint slacks.
pub fn condense(ocp: &OcpSpec) -> QpProblem {
    condense_with_layout(ocp).0
}

pub(crate) fn block_diag(block: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let r = block.nrows();
    let c = block.ncols();
    let mut out = DMatrix::<f64>::zeros(r * count, c * count);
    for k in 0..count {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

pub(crate) fn stack_vectors(vs: &[DVector<f64>]) -> DVector<f64> {
    let total: usize = vs.iter().map(|v| v.len()).sum();
    let mut out = DVector::<f64>::zeros(total);
    let mut at = 0;
    for v in vs {
        out.rows_mut(at, v.len()).copy_from(v);
        at += v.len();
    }
    out
}
