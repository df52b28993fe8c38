use nalgebra::{DMatrix, DVector};

use super::signal::SignalMatrix;
use super::SmmpcError;
use crate::mpc::{AdmmSettings, AdmmWorkspace, QpSolution, QpStatus};

/// Absolute ridge floor keeping the combination-vector Hessian positive
/// definite even with `lambda_g = 0`.
const G_RIDGE_FLOOR: f64 = 1e-9;

/// Weights and bounds for one data-driven controller.
#[derive(Debug, Clone)]
pub struct SmmpcConfig {
    pub t_ini: usize,
    pub horizon: usize,
    /// Output-tracking weight, p x p PSD.
    pub q_output: DMatrix<f64>,
    /// Input weight, m x m PSD.
    pub q_input: DMatrix<f64>,
    /// Ridge on the column-combination vector.
    pub lambda_g: f64,
    /// Weight on the past-output misfit. `f64::INFINITY` turns the misfit
    /// into a hard equality (noiseless-data mode).
    pub lambda_y: f64,
    /// Assumed output-noise variance. Informational unless the config was
    /// built through [`SmmpcConfig::with_noise_variance`], which sets
    /// `lambda_y = 1 / noise_variance`.
    pub noise_variance: f64,
    pub u_lower: DVector<f64>,
    pub u_upper: DVector<f64>,
}

impl SmmpcConfig {
    /// Maximum-likelihood weighting for a given output-noise variance.
    pub fn with_noise_variance(mut self, variance: f64) -> Self {
        self.noise_variance = variance;
        self.lambda_y = if variance > 0.0 { 1.0 / variance } else { f64::INFINITY };
        self
    }

    fn validate(&self, sm: &SignalMatrix) -> Result<(), SmmpcError> {
        if self.t_ini != sm.t_ini || self.horizon != sm.horizon {
            return Err(SmmpcError::DimensionMismatch(format!(
                "config window ({}, {}) != signal matrix window ({}, {})",
                self.t_ini, self.horizon, sm.t_ini, sm.horizon
            )));
        }
        if self.t_ini < 1 {
            return Err(SmmpcError::InvalidConfig("t_ini must be at least 1".into()));
        }
        if !(self.lambda_g >= 0.0) {
            return Err(SmmpcError::InvalidConfig(format!(
                "lambda_g must be nonnegative, got {}",
                self.lambda_g
            )));
        }
        if !(self.lambda_y > 0.0) {
            return Err(SmmpcError::InvalidConfig(format!(
                "lambda_y must be positive, got {}",
                self.lambda_y
            )));
        }
        let p = sm.n_outputs;
        let m = sm.n_inputs;
        if self.q_output.nrows() != p || self.q_output.ncols() != p {
            return Err(SmmpcError::DimensionMismatch(format!(
                "output weight must be {p}x{p}"
            )));
        }
        if self.q_input.nrows() != m || self.q_input.ncols() != m {
            return Err(SmmpcError::DimensionMismatch(format!(
                "input weight must be {m}x{m}"
            )));
        }
        if self.u_lower.len() != m || self.u_upper.len() != m {
            return Err(SmmpcError::DimensionMismatch(format!(
                "input bounds must have length {m}"
            )));
        }
        for i in 0..m {
            if self.u_lower[i] > self.u_upper[i] {
                return Err(SmmpcError::InvalidConfig(format!(
                    "input bound {i} crosses: {} > {}",
                    self.u_lower[i], self.u_upper[i]
                )));
            }
        }
        Ok(())
    }
}

/// Result of one data-driven control step.
#[derive(Debug, Clone)]
pub struct SmmpcStep {
    pub u0: DVector<f64>,
    pub planned_inputs: Vec<DVector<f64>>,
    pub predicted_outputs: Vec<DVector<f64>>,
    pub solution: QpSolution,
    pub g_norm: f64,
    /// `||Y_p g - y_ini||` at the solution (zero in hard-equality mode up
    /// to solver tolerance).
    pub past_residual: f64,
}

enum PastOutputMode {
    Soft(f64),
    Hard,
}

/// Data-driven receding-horizon controller. The quadratic form over the
/// combination vector and the constraint structure are assembled and
/// factored once; each step refreshes the linear term and the equality
/// right-hand sides.
pub struct SmmpcController {
    sm: SignalMatrix,
    cfg: SmmpcConfig,
    workspace: AdmmWorkspace,
    n_rows: usize,
    /// Row offsets: past inputs start at 0, optional past outputs next,
    /// future-input box rows last.
    y_past_row: Option<usize>,
    u_future_row: usize,
    /// Linear-term maps, precomputed: `f = f_y_map y_ini + f_r_map r - 0`.
    f_y_map: Option<DMatrix<f64>>,
    f_r_map: DMatrix<f64>,
    u_past_svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl SmmpcController {
    pub fn new(
        sm: SignalMatrix,
        cfg: SmmpcConfig,
        settings: AdmmSettings,
    ) -> Result<Self, SmmpcError> {
        cfg.validate(&sm)?;
        let l = sm.n_cols;
        let m = sm.n_inputs;
        let t_ini = sm.t_ini;
        let horizon = sm.horizon;
        let mode = if cfg.lambda_y.is_finite() {
            PastOutputMode::Soft(cfg.lambda_y)
        } else {
            PastOutputMode::Hard
        };

        let q_bar = block_diag(&cfg.q_output, horizon);
        let qp_bar = block_diag(&cfg.q_input, horizon);
        let mut h = sm.y_future.transpose() * &q_bar * &sm.y_future
            + sm.u_future.transpose() * &qp_bar * &sm.u_future;
        if let PastOutputMode::Soft(w) = mode {
            h += sm.y_past.transpose() * &sm.y_past * w;
        }
        // Hessian convention: twice the quadratic-form matrix.
        h = &h + h.transpose();
        let ridge = cfg.lambda_g.max(G_RIDGE_FLOOR);
        for i in 0..l {
            h[(i, i)] += 2.0 * ridge;
        }

        let n_eq_u = t_ini * m;
        let n_eq_y = match mode {
            PastOutputMode::Hard => t_ini * sm.n_outputs,
            PastOutputMode::Soft(_) => 0,
        };
        let n_box = horizon * m;
        let n_rows = n_eq_u + n_eq_y + n_box;
        let mut a = DMatrix::<f64>::zeros(n_rows, l);
        a.view_mut((0, 0), (n_eq_u, l)).copy_from(&sm.u_past);
        let y_past_row = if n_eq_y > 0 {
            a.view_mut((n_eq_u, 0), (n_eq_y, l)).copy_from(&sm.y_past);
            Some(n_eq_u)
        } else {
            None
        };
        let u_future_row = n_eq_u + n_eq_y;
        a.view_mut((u_future_row, 0), (n_box, l))
            .copy_from(&sm.u_future);

        // Template bounds fix the equality rows for the workspace.
        let mut lower = DVector::<f64>::zeros(n_rows);
        let mut upper = DVector::<f64>::zeros(n_rows);
        for k in 0..horizon {
            for i in 0..m {
                lower[u_future_row + k * m + i] = cfg.u_lower[i];
                upper[u_future_row + k * m + i] = cfg.u_upper[i];
            }
        }

        let f_template = DVector::<f64>::zeros(l);
        let workspace = AdmmWorkspace::new(&h, &a, &f_template, &lower, &upper, &settings)
            .map_err(|e| SmmpcError::Solver(e.to_string()))?;

        let f_y_map = match mode {
            PastOutputMode::Soft(w) => Some(sm.y_past.transpose() * (-2.0 * w)),
            PastOutputMode::Hard => None,
        };
        let f_r_map = sm.y_future.transpose() * &q_bar * -2.0;
        let u_past_svd = sm.u_past.clone().svd(true, true);

        Ok(Self {
            sm,
            cfg,
            workspace,
            n_rows,
            y_past_row,
            u_future_row,
            f_y_map,
            f_r_map,
            u_past_svd,
        })
    }

    pub fn signal_matrix(&self) -> &SignalMatrix {
        &self.sm
    }

    pub fn config(&self) -> &SmmpcConfig {
        &self.cfg
    }

    /// One control step from the last `t_ini` measured inputs/outputs
    /// toward the reference window (padded by holding its last value).
    pub fn step(
        &self,
        u_ini: &[DVector<f64>],
        y_ini: &[DVector<f64>],
        r_window: &[DVector<f64>],
    ) -> Result<SmmpcStep, SmmpcError> {
        let m = self.sm.n_inputs;
        let p = self.sm.n_outputs;
        let t_ini = self.sm.t_ini;
        let horizon = self.sm.horizon;
        check_window("u_ini", u_ini, t_ini, m)?;
        check_window("y_ini", y_ini, t_ini, p)?;
        if r_window.is_empty() || r_window.len() > horizon {
            return Err(SmmpcError::DimensionMismatch(format!(
                "reference window length {} outside 1..={horizon}",
                r_window.len()
            )));
        }
        let mut reference = r_window.to_vec();
        while reference.len() < horizon {
            reference.push(reference.last().expect("non-empty").clone());
        }

        let u_ini_stack = stack(u_ini);
        let y_ini_stack = stack(y_ini);
        let r_stack = stack(&reference);

        // The hard past-input equations must be solvable before the QP
        // sees them.
        let g_ls = self
            .u_past_svd
            .solve(&u_ini_stack, 1e-12)
            .map_err(|e| SmmpcError::Solver(e.to_string()))?;
        let residual = (&self.sm.u_past * &g_ls - &u_ini_stack).amax();
        if residual > 1e-6 * u_ini_stack.amax().max(1.0) {
            return Err(SmmpcError::InconsistentPast {
                residual,
                input_rank: self.sm.input_rank,
                input_rows: t_ini * m,
            });
        }

        let l = self.sm.n_cols;
        let mut f = &self.f_r_map * &r_stack;
        if let Some(map) = &self.f_y_map {
            f += map * &y_ini_stack;
        }
        debug_assert_eq!(f.len(), l);

        let mut lower = DVector::<f64>::zeros(self.n_rows);
        let mut upper = DVector::<f64>::zeros(self.n_rows);
        lower.rows_mut(0, t_ini * m).copy_from(&u_ini_stack);
        upper.rows_mut(0, t_ini * m).copy_from(&u_ini_stack);
        if let Some(row) = self.y_past_row {
            lower.rows_mut(row, t_ini * p).copy_from(&y_ini_stack);
            upper.rows_mut(row, t_ini * p).copy_from(&y_ini_stack);
        }
        for k in 0..horizon {
            for i in 0..m {
                lower[self.u_future_row + k * m + i] = self.cfg.u_lower[i];
                upper[self.u_future_row + k * m + i] = self.cfg.u_upper[i];
            }
        }

        let solution = self
            .workspace
            .solve(&f, &lower, &upper)
            .map_err(|e| SmmpcError::Solver(e.to_string()))?;
        if solution.status == QpStatus::Infeasible {
            return Err(SmmpcError::Solver("combination QP infeasible".into()));
        }

        let g = &solution.z;
        let u_f = &self.sm.u_future * g;
        let y_f = &self.sm.y_future * g;
        let planned_inputs: Vec<DVector<f64>> = (0..horizon)
            .map(|k| {
                DVector::from_fn(m, |i, _| {
                    u_f[k * m + i].clamp(self.cfg.u_lower[i], self.cfg.u_upper[i])
                })
            })
            .collect();
        let predicted_outputs: Vec<DVector<f64>> = (0..horizon)
            .map(|k| DVector::from_fn(p, |i, _| y_f[k * p + i]))
            .collect();
        let past_residual = (&self.sm.y_past * g - &y_ini_stack).amax();
        let g_norm = g.norm();
        Ok(SmmpcStep {
            u0: planned_inputs[0].clone(),
            planned_inputs,
            predicted_outputs,
            solution,
            g_norm,
            past_residual,
        })
    }
}

/// Open-loop N-step output prediction with the future inputs pinned to a
/// given sequence; used for validation and tuning rather than control.
pub fn predict_outputs(
    sm: &SignalMatrix,
    cfg: &SmmpcConfig,
    u_ini: &[DVector<f64>],
    y_ini: &[DVector<f64>],
    u_future: &[DVector<f64>],
    settings: &AdmmSettings,
) -> Result<Vec<DVector<f64>>, SmmpcError> {
    let predictor = SmmPredictor::new(sm, cfg, settings)?;
    predictor.predict(u_ini, y_ini, u_future)
}

/// Prediction-error statistics of [`predict_outputs`] over every window of
/// a held-out trajectory.
#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub n_windows: usize,
    pub mean_error: f64,
    pub rmse: f64,
}

/// Slides a `t_ini + horizon` window over held-out data (stride 1) and
/// scores the N-step predictions against the recorded outputs.
pub fn cross_validate(
    sm: &SignalMatrix,
    cfg: &SmmpcConfig,
    u_held: &DMatrix<f64>,
    y_held: &DMatrix<f64>,
    settings: &AdmmSettings,
) -> Result<CrossValidation, SmmpcError> {
    let t = u_held.ncols();
    if y_held.ncols() != t {
        return Err(SmmpcError::DimensionMismatch(
            "held-out inputs and outputs must have equal length".into(),
        ));
    }
    let window = cfg.t_ini + cfg.horizon;
    if t < window {
        return Err(SmmpcError::InsufficientData(format!(
            "held-out data needs at least {window} steps, got {t}"
        )));
    }
    let predictor = SmmPredictor::new(sm, cfg, settings)?;
    let p = sm.n_outputs;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    let n_windows = t - window + 1;
    for j in 0..n_windows {
        let u_ini: Vec<DVector<f64>> = (0..cfg.t_ini)
            .map(|k| u_held.column(j + k).into_owned())
            .collect();
        let y_ini: Vec<DVector<f64>> = (0..cfg.t_ini)
            .map(|k| y_held.column(j + k).into_owned())
            .collect();
        let u_f: Vec<DVector<f64>> = (0..cfg.horizon)
            .map(|k| u_held.column(j + cfg.t_ini + k).into_owned())
            .collect();
        let predicted = predictor.predict(&u_ini, &y_ini, &u_f)?;
        for k in 0..cfg.horizon {
            let actual = y_held.column(j + cfg.t_ini + k);
            for i in 0..p {
                let err = predicted[k][i] - actual[i];
                sum += err;
                sum_sq += err * err;
                count += 1;
            }
        }
    }
    Ok(CrossValidation {
        n_windows,
        mean_error: sum / count as f64,
        rmse: (sum_sq / count as f64).sqrt(),
    })
}

struct SmmPredictor<'a> {
    sm: &'a SignalMatrix,
    lambda_y: Option<f64>,
    workspace: AdmmWorkspace,
    f_y_map: Option<DMatrix<f64>>,
    n_rows: usize,
    y_past_row: Option<usize>,
    u_future_row: usize,
}

impl<'a> SmmPredictor<'a> {
    fn new(
        sm: &'a SignalMatrix,
        cfg: &SmmpcConfig,
        settings: &AdmmSettings,
    ) -> Result<Self, SmmpcError> {
        cfg.validate(sm)?;
        let l = sm.n_cols;
        let m = sm.n_inputs;
        let p = sm.n_outputs;
        let lambda_y = cfg.lambda_y.is_finite().then_some(cfg.lambda_y);

        let mut h = DMatrix::<f64>::zeros(l, l);
        if let Some(w) = lambda_y {
            h += sm.y_past.transpose() * &sm.y_past * (2.0 * w);
        }
        let ridge = cfg.lambda_g.max(G_RIDGE_FLOOR);
        for i in 0..l {
            h[(i, i)] += 2.0 * ridge;
        }

        let n_eq_u = sm.t_ini * m;
        let n_eq_y = if lambda_y.is_none() { sm.t_ini * p } else { 0 };
        let n_eq_uf = sm.horizon * m;
        let n_rows = n_eq_u + n_eq_y + n_eq_uf;
        let mut a = DMatrix::<f64>::zeros(n_rows, l);
        a.view_mut((0, 0), (n_eq_u, l)).copy_from(&sm.u_past);
        let y_past_row = if n_eq_y > 0 {
            a.view_mut((n_eq_u, 0), (n_eq_y, l)).copy_from(&sm.y_past);
            Some(n_eq_u)
        } else {
            None
        };
        let u_future_row = n_eq_u + n_eq_y;
        a.view_mut((u_future_row, 0), (n_eq_uf, l))
            .copy_from(&sm.u_future);

        // All rows are equalities here.
        let lower = DVector::<f64>::zeros(n_rows);
        let upper = DVector::<f64>::zeros(n_rows);
        let workspace = AdmmWorkspace::new(&h, &a, &DVector::zeros(l), &lower, &upper, settings)
            .map_err(|e| SmmpcError::Solver(e.to_string()))?;
        let f_y_map = lambda_y.map(|w| sm.y_past.transpose() * (-2.0 * w));
        Ok(Self {
            sm,
            lambda_y,
            workspace,
            f_y_map,
            n_rows,
            y_past_row,
            u_future_row,
        })
    }

    fn predict(
        &self,
        u_ini: &[DVector<f64>],
        y_ini: &[DVector<f64>],
        u_future: &[DVector<f64>],
    ) -> Result<Vec<DVector<f64>>, SmmpcError> {
        let m = self.sm.n_inputs;
        let p = self.sm.n_outputs;
        check_window("u_ini", u_ini, self.sm.t_ini, m)?;
        check_window("y_ini", y_ini, self.sm.t_ini, p)?;
        check_window("u_future", u_future, self.sm.horizon, m)?;
        let u_ini_stack = stack(u_ini);
        let y_ini_stack = stack(y_ini);
        let u_f_stack = stack(u_future);

        let f = match &self.f_y_map {
            Some(map) => map * &y_ini_stack,
            None => DVector::zeros(self.sm.n_cols),
        };
        let mut lower = DVector::<f64>::zeros(self.n_rows);
        lower
            .rows_mut(0, u_ini_stack.len())
            .copy_from(&u_ini_stack);
        if let Some(row) = self.y_past_row {
            lower.rows_mut(row, y_ini_stack.len()).copy_from(&y_ini_stack);
        }
        lower
            .rows_mut(self.u_future_row, u_f_stack.len())
            .copy_from(&u_f_stack);
        let upper = lower.clone();

        let solution = self
            .workspace
            .solve(&f, &lower, &upper)
            .map_err(|e| SmmpcError::Solver(e.to_string()))?;
        if solution.status != QpStatus::Optimal && self.lambda_y.is_none() {
            return Err(SmmpcError::Solver(format!(
                "prediction solve did not converge (status {:?})",
                solution.status
            )));
        }
        let y_f = &self.sm.y_future * &solution.z;
        Ok((0..self.sm.horizon)
            .map(|k| DVector::from_fn(p, |i, _| y_f[k * p + i]))
            .collect())
    }
}

fn check_window(
    name: &str,
    window: &[DVector<f64>],
    len: usize,
    width: usize,
) -> Result<(), SmmpcError> {
    if window.len() != len {
        return Err(SmmpcError::DimensionMismatch(format!(
            "{name} must have {len} entries, got {}",
            window.len()
        )));
    }
    if window.iter().any(|v| v.len() != width) {
        return Err(SmmpcError::DimensionMismatch(format!(
            "{name} entries must have length {width}"
        )));
    }
    Ok(())
}

fn stack(vs: &[DVector<f64>]) -> DVector<f64> {
    let total: usize = vs.iter().map(|v| v.len()).sum();
    let mut out = DVector::<f64>::zeros(total);
    let mut at = 0;
    for v in vs {
        out.rows_mut(at, v.len()).copy_from(v);
        at += v.len();
    }
    out
}

fn block_diag(block: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let r = block.nrows();
    let c = block.ncols();
    let mut out = DMatrix::<f64>::zeros(r * count, c * count);
    for k in 0..count {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::LtiModel;
    use crate::smmpc::build_signal_matrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn integrator() -> LtiModel {
        LtiModel::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            1.0,
        )
        .unwrap()
    }

    fn record(model: &LtiModel, inputs: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let ins: Vec<DVector<f64>> = inputs.iter().map(|&u| DVector::from_element(1, u)).collect();
        let traj = model
            .simulate(&DVector::zeros(model.n_states()), &ins, None)
            .unwrap();
        let t = inputs.len();
        (
            DMatrix::from_fn(1, t, |_, c| traj.inputs[c][0]),
            DMatrix::from_fn(1, t, |_, c| traj.outputs[c][0]),
        )
    }

    fn base_config(t_ini: usize, horizon: usize) -> SmmpcConfig {
        SmmpcConfig {
            t_ini,
            horizon,
            q_output: DMatrix::identity(1, 1),
            q_input: DMatrix::from_element(1, 1, 1e-4),
            lambda_g: 0.0,
            lambda_y: f64::INFINITY,
            noise_variance: 0.0,
            u_lower: DVector::from_element(1, -5.0),
            u_upper: DVector::from_element(1, 5.0),
        }
    }

    /// Fundamental-lemma exactness: with rich noiseless data the predicted
    /// future outputs equal the true response of the plant to the planned
    /// inputs from the state implied by the past window.
    #[test]
    fn noiseless_step_predictions_match_simulation() {
        let model = integrator();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let inputs: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (u, y) = record(&model, &inputs);
        let t_ini = 2;
        let horizon = 5;
        let sm = build_signal_matrix(&u, &y, t_ini, horizon).unwrap();
        assert!(sm.pe_ok(1));
        let cfg = base_config(t_ini, horizon);
        let ctrl = SmmpcController::new(sm, cfg, AdmmSettings::default()).unwrap();

        // Fresh initial window not present in the data.
        let u_ini = vec![DVector::from_element(1, 0.3), DVector::from_element(1, -0.1)];
        let x0 = DVector::zeros(1);
        let warm = model.simulate(&x0, &u_ini, None).unwrap();
        let y_ini: Vec<DVector<f64>> = warm.outputs.clone();
        let x_now = warm.states.last().unwrap().clone();

        let r: Vec<DVector<f64>> = (0..horizon)
            .map(|k| DVector::from_element(1, 0.2 * k as f64))
            .collect();
        let step = ctrl.step(&u_ini, &y_ini, &r).unwrap();

        let rollout = model.simulate(&x_now, &step.planned_inputs, None).unwrap();
        for k in 0..horizon {
            assert!(
                (step.predicted_outputs[k][0] - rollout.outputs[k][0]).abs() <= 1e-6,
                "step {k}: predicted {} vs simulated {}",
                step.predicted_outputs[k][0],
                rollout.outputs[k][0]
            );
        }
    }

    #[test]
    fn zero_problem_returns_zero_input() {
        let model = integrator();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (u, y) = record(&model, &inputs);
        let sm = build_signal_matrix(&u, &y, 2, 4).unwrap();
        let cfg = base_config(2, 4);
        let ctrl = SmmpcController::new(sm, cfg, AdmmSettings::default()).unwrap();
        let zeros1 = vec![DVector::zeros(1); 2];
        let r = vec![DVector::zeros(1); 4];
        let step = ctrl.step(&zeros1, &zeros1, &r).unwrap();
        assert!(step.u0[0].abs() <= 1e-6);
    }

    #[test]
    fn inconsistent_past_inputs_error_out() {
        // Constant-zero input data cannot reproduce a nonzero past input.
        let u = DMatrix::zeros(1, 30);
        let y = DMatrix::zeros(1, 30);
        let sm = build_signal_matrix(&u, &y, 2, 4).unwrap();
        assert!(sm.pe_warning);
        let cfg = base_config(2, 4);
        let ctrl = SmmpcController::new(sm, cfg, AdmmSettings::default()).unwrap();
        let u_ini = vec![DVector::from_element(1, 1.0); 2];
        let y_ini = vec![DVector::zeros(1); 2];
        let r = vec![DVector::zeros(1); 4];
        let err = ctrl.step(&u_ini, &y_ini, &r);
        assert!(matches!(err, Err(SmmpcError::InconsistentPast { .. })));
    }

    #[test]
    fn in_class_cross_validation_is_exact() {
        let model = integrator();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let train: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let held: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (u, y) = record(&model, &train);
        let (u_h, y_h) = record(&model, &held);
        let sm = build_signal_matrix(&u, &y, 2, 4).unwrap();
        let cfg = base_config(2, 4);
        let cv = cross_validate(&sm, &cfg, &u_h, &y_h, &AdmmSettings::default()).unwrap();
        assert!(cv.rmse <= 1e-6, "rmse {}", cv.rmse);
        assert_eq!(cv.n_windows, 30 - 6 + 1);
    }

    /// Scaling all data, initial outputs and references by a factor scales
    /// the predictions by the same factor when the ridge vanishes.
    #[test]
    fn predictions_are_homogeneous_in_the_data() {
        let model = integrator();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inputs: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (u, y) = record(&model, &inputs);
        let scale = 7.5;
        let cfg = base_config(2, 4);
        let sm1 = build_signal_matrix(&u, &y, 2, 4).unwrap();
        let sm2 = build_signal_matrix(&(&u * scale), &(&y * scale), 2, 4).unwrap();

        let u_ini = vec![DVector::from_element(1, 0.4), DVector::from_element(1, -0.2)];
        let y_ini = vec![DVector::from_element(1, 0.1), DVector::from_element(1, 0.5)];
        let u_f = vec![DVector::from_element(1, 0.3); 4];
        let scale_all = |w: &[DVector<f64>]| -> Vec<DVector<f64>> {
            w.iter().map(|v| v * scale).collect()
        };
        let p1 = predict_outputs(&sm1, &cfg, &u_ini, &y_ini, &u_f, &AdmmSettings::default()).unwrap();
        let p2 = predict_outputs(
            &sm2,
            &cfg,
            &scale_all(&u_ini),
            &scale_all(&y_ini),
            &scale_all(&u_f),
            &AdmmSettings::default(),
        )
        .unwrap();
        for k in 0..4 {
            let rel = (p2[k][0] - scale * p1[k][0]).abs() / (scale * p1[k][0]).abs().max(1e-9);
            assert!(rel <= 1e-6, "step {k}: {} vs {}", p2[k][0], scale * p1[k][0]);
        }
    }

    #[test]
    fn identical_inputs_give_identical_steps() {
        let model = integrator();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let inputs: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (u, y) = record(&model, &inputs);
        let sm = build_signal_matrix(&u, &y, 2, 4).unwrap();
        let cfg = base_config(2, 4).with_noise_variance(1e-4);
        let ctrl = SmmpcController::new(sm, cfg, AdmmSettings::default()).unwrap();
        let u_ini = vec![DVector::from_element(1, 0.2); 2];
        let y_warm = vec![DVector::from_element(1, 0.1), DVector::from_element(1, 0.3)];
        let r = vec![DVector::from_element(1, 1.0); 4];
        let a = ctrl.step(&u_ini, &y_warm, &r).unwrap();
        let b = ctrl.step(&u_ini, &y_warm, &r).unwrap();
        assert_eq!(a.u0[0].to_bits(), b.u0[0].to_bits());
        assert_eq!(a.solution.iterations, b.solution.iterations);
    }
}
