use nalgebra::DMatrix;

use super::SmmpcError;

/// Past/future partitioned Hankel blocks built from one offline
/// input/output trajectory. Signals are stored with one column per time
/// step (`m x T` inputs, `p x T` outputs); Hankel column `j` is the
/// length-`t_ini + horizon` window starting at step `j`.
#[derive(Debug, Clone)]
pub struct SignalMatrix {
    pub u_past: DMatrix<f64>,
    pub y_past: DMatrix<f64>,
    pub u_future: DMatrix<f64>,
    pub y_future: DMatrix<f64>,
    pub t_ini: usize,
    pub horizon: usize,
    /// Number of Hankel columns, `T - t_ini - horizon + 1`.
    pub n_cols: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// Rank of the input Hankel block of order `t_ini + horizon`.
    pub input_rank: usize,
    /// Rank of the stacked `[U_p; U_f; Y_p; Y_f]` matrix. For noiseless
    /// data from a minimal n-state LTI plant with rich enough inputs this
    /// equals `m (t_ini + horizon) + n`.
    pub stacked_rank: usize,
    /// Set when the input block is row-rank deficient, i.e. the inputs
    /// are not persistently exciting of order `t_ini + horizon`.
    pub pe_warning: bool,
}

impl SignalMatrix {
    /// Expected stacked rank for an `n`-state plant when the exactness
    /// property holds.
    pub fn expected_stacked_rank(&self, n_states: usize) -> usize {
        self.n_inputs * (self.t_ini + self.horizon) + n_states
    }

    /// Whether the stacked rank matches the exactness precondition for an
    /// `n`-state plant.
    pub fn pe_ok(&self, n_states: usize) -> bool {
        self.stacked_rank == self.expected_stacked_rank(n_states)
    }
}

fn hankel_block(data: &DMatrix<f64>, start: usize, depth: usize, n_cols: usize) -> DMatrix<f64> {
    let width = data.nrows();
    DMatrix::from_fn(depth * width, n_cols, |r, c| {
        let step = start + c + r / width;
        data[(r % width, step)]
    })
}

fn rank_of(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let max_sv = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    if max_sv == 0.0 {
        return 0;
    }
    let tol = max_sv * (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * 8.0;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Builds the partitioned signal matrix from `m x T` inputs and `p x T`
/// outputs. Fails when the trajectory is shorter than one window; a
/// persistency-of-excitation shortfall only sets [`SignalMatrix::pe_warning`].
pub fn build_signal_matrix(
    u_data: &DMatrix<f64>,
    y_data: &DMatrix<f64>,
    t_ini: usize,
    horizon: usize,
) -> Result<SignalMatrix, SmmpcError> {
    if t_ini < 1 || horizon < 1 {
        return Err(SmmpcError::InvalidConfig(
            "t_ini and horizon must both be at least 1".into(),
        ));
    }
    let t = u_data.ncols();
    if y_data.ncols() != t {
        return Err(SmmpcError::DimensionMismatch(format!(
            "inputs have {t} steps but outputs have {}",
            y_data.ncols()
        )));
    }
    let m = u_data.nrows();
    let p = y_data.nrows();
    if m == 0 || p == 0 {
        return Err(SmmpcError::DimensionMismatch(
            "inputs and outputs must have at least one channel".into(),
        ));
    }
    let window = t_ini + horizon;
    if t < window {
        return Err(SmmpcError::InsufficientData(format!(
            "need at least {window} steps, got {t}"
        )));
    }
    let n_cols = t - window + 1;

    let u_past = hankel_block(u_data, 0, t_ini, n_cols);
    let u_future = hankel_block(u_data, t_ini, horizon, n_cols);
    let y_past = hankel_block(y_data, 0, t_ini, n_cols);
    let y_future = hankel_block(y_data, t_ini, horizon, n_cols);

    let input_stack = hankel_block(u_data, 0, window, n_cols);
    let input_rank = rank_of(&input_stack);
    let mut stacked = DMatrix::<f64>::zeros((m + p) * window, n_cols);
    stacked
        .view_mut((0, 0), (t_ini * m, n_cols))
        .copy_from(&u_past);
    stacked
        .view_mut((t_ini * m, 0), (horizon * m, n_cols))
        .copy_from(&u_future);
    stacked
        .view_mut((window * m, 0), (t_ini * p, n_cols))
        .copy_from(&y_past);
    stacked
        .view_mut((window * m + t_ini * p, 0), (horizon * p, n_cols))
        .copy_from(&y_future);
    let stacked_rank = rank_of(&stacked);

    let pe_warning = input_rank < (m * window).min(n_cols);

    Ok(SignalMatrix {
        u_past,
        y_past,
        u_future,
        y_future,
        t_ini,
        horizon,
        n_cols,
        n_inputs: m,
        n_outputs: p,
        input_rank,
        stacked_rank,
        pe_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::LtiModel;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_data_gives_one_column() {
        let u = DMatrix::from_fn(1, 6, |_, c| c as f64);
        let y = DMatrix::from_fn(1, 6, |_, c| 10.0 * c as f64);
        let sm = build_signal_matrix(&u, &y, 2, 4).unwrap();
        assert_eq!(sm.n_cols, 1);
        assert_eq!(sm.u_past.ncols(), 1);
        assert_eq!(sm.u_past[(0, 0)], 0.0);
        assert_eq!(sm.u_future[(3, 0)], 5.0);
    }

    #[test]
    fn first_column_is_the_first_window() {
        let t = 12;
        let u = DMatrix::from_fn(1, t, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let y = DMatrix::from_fn(1, t, |_, c| 0.5f64.powi(c as i32));
        let sm = build_signal_matrix(&u, &y, 3, 4).unwrap();
        for r in 0..3 {
            assert_eq!(sm.u_past[(r, 0)], u[(0, r)]);
            assert_eq!(sm.y_past[(r, 0)], y[(0, r)]);
        }
        for r in 0..4 {
            assert_eq!(sm.u_future[(r, 0)], u[(0, 3 + r)]);
            assert_eq!(sm.y_future[(r, 0)], y[(0, 3 + r)]);
        }
        // Hankel shift structure between neighboring columns.
        for c in 1..sm.n_cols {
            for r in 0..2 {
                assert_eq!(sm.u_past[(r + 1, c - 1)], sm.u_past[(r, c)]);
            }
        }
    }

    #[test]
    fn too_short_data_is_rejected() {
        let u = DMatrix::zeros(1, 5);
        let y = DMatrix::zeros(1, 5);
        assert!(matches!(
            build_signal_matrix(&u, &y, 2, 4),
            Err(SmmpcError::InsufficientData(_))
        ));
    }

    #[test]
    fn stacked_rank_matches_theory_on_random_plant() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let model = LtiModel::new(
            DMatrix::from_row_slice(2, 2, &[0.8, 0.2, -0.1, 0.7]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, -0.3]),
            DMatrix::zeros(1, 1),
            1.0,
        )
        .unwrap();
        let t = 200;
        let inputs: Vec<DVector<f64>> = (0..t)
            .map(|_| DVector::from_element(1, rng.random_range(-1.0..1.0)))
            .collect();
        let traj = model
            .simulate(&DVector::zeros(2), &inputs, None)
            .unwrap();
        let u = DMatrix::from_fn(1, t, |_, c| traj.inputs[c][0]);
        let y = DMatrix::from_fn(1, t, |_, c| traj.outputs[c][0]);
        let sm = build_signal_matrix(&u, &y, 4, 8).unwrap();
        assert_eq!(sm.stacked_rank, sm.expected_stacked_rank(2)); // 12 + 2
        assert!(sm.pe_ok(2));
        assert!(!sm.pe_warning);
        assert_eq!(sm.input_rank, 12);
    }

    #[test]
    fn constant_input_trips_pe_warning() {
        let u = DMatrix::from_element(1, 50, 1.0);
        let y = DMatrix::from_element(1, 50, 2.0);
        let sm = build_signal_matrix(&u, &y, 3, 5).unwrap();
        assert!(sm.pe_warning);
        assert_eq!(sm.input_rank, 1);
    }
}
