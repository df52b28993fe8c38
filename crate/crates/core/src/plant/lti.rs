use nalgebra::{DMatrix, DVector};

use super::ModelError;

/// Discrete-time state-space model `x_{k+1} = A x_k + B u_k`,
/// `y_k = C x_k + D u_k`, sampled every `dt_s` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dt_s: f64,
}

impl LtiModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        dt_s: f64,
    ) -> Result<Self, ModelError> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let m = b.ncols();
        let p = c.nrows();
        if b.nrows() != n || m == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "B must be {}x(m>=1), got {}x{}",
                n,
                b.nrows(),
                m
            )));
        }
        if c.ncols() != n || p == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "C must be (p>=1)x{}, got {}x{}",
                n,
                p,
                c.ncols()
            )));
        }
        if d.nrows() != p || d.ncols() != m {
            return Err(ModelError::DimensionMismatch(format!(
                "D must be {}x{}, got {}x{}",
                p,
                m,
                d.nrows(),
                d.ncols()
            )));
        }
        if !(dt_s > 0.0) || !dt_s.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "sampling period must be positive and finite, got {dt_s}"
            )));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::InvalidParameter(format!(
                    "{name} contains non-finite entries"
                )));
            }
        }
        Ok(Self { a, b, c, d, dt_s })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `y = C x + D u`.
    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dims(x, u)?;
        Ok(&self.c * x + &self.d * u)
    }

    /// One plant step: `x_next = A x + B u + disturbance`, `y = C x + D u`.
    ///
    /// The optional disturbance is an additive state offset (length n).
    pub fn step(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        disturbance: Option<&DVector<f64>>,
    ) -> Result<(DVector<f64>, DVector<f64>), ModelError> {
        self.check_dims(x, u)?;
        let mut x_next = &self.a * x + &self.b * u;
        if let Some(d) = disturbance {
            if d.len() != self.n_states() {
                return Err(ModelError::DimensionMismatch(format!(
                    "disturbance length {} != state dimension {}",
                    d.len(),
                    self.n_states()
                )));
            }
            x_next += d;
        }
        let y = &self.c * x + &self.d * u;
        Ok((x_next, y))
    }

    /// Applies an input sequence from `x0`, recording states and outputs.
    pub fn simulate(
        &self,
        x0: &DVector<f64>,
        inputs: &[DVector<f64>],
        disturbances: Option<&[DVector<f64>]>,
    ) -> Result<Trajectory, ModelError> {
        if let Some(d) = disturbances {
            if d.len() != inputs.len() {
                return Err(ModelError::DimensionMismatch(format!(
                    "{} disturbances for {} inputs",
                    d.len(),
                    inputs.len()
                )));
            }
        }
        let mut states = Vec::with_capacity(inputs.len() + 1);
        let mut outputs = Vec::with_capacity(inputs.len());
        states.push(x0.clone());
        let mut x = x0.clone();
        for (k, u) in inputs.iter().enumerate() {
            let dist = disturbances.map(|d| &d[k]);
            let (x_next, y) = self.step(&x, u, dist)?;
            outputs.push(y);
            states.push(x_next.clone());
            x = x_next;
        }
        Ok(Trajectory {
            inputs: inputs.to_vec(),
            states,
            outputs,
        })
    }

    fn check_dims(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<(), ModelError> {
        if x.len() != self.n_states() {
            return Err(ModelError::DimensionMismatch(format!(
                "state length {} != {}",
                x.len(),
                self.n_states()
            )));
        }
        if u.len() != self.n_inputs() {
            return Err(ModelError::DimensionMismatch(format!(
                "input length {} != {}",
                u.len(),
                self.n_inputs()
            )));
        }
        Ok(())
    }
}

/// A simulated closed- or open-loop run: `states` has one more entry than
/// `inputs`, `outputs[k]` corresponds to `(states[k], inputs[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub inputs: Vec<DVector<f64>>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Number of applied inputs (steps).
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Exact zero-order-hold discretization of `dx/dt = A_c x + B_c u` with the
/// input held constant over each `dt_s` interval.
///
/// Computed from the exponential of the augmented matrix
/// `[[A_c, B_c], [0, 0]] * dt`, whose top blocks are the discrete `(A, B)`.
pub fn discretize_zoh(
    a_cont: &DMatrix<f64>,
    b_cont: &DMatrix<f64>,
    dt_s: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ModelError> {
    let n = a_cont.nrows();
    if a_cont.ncols() != n {
        return Err(ModelError::DimensionMismatch(
            "continuous A must be square".into(),
        ));
    }
    if b_cont.nrows() != n {
        return Err(ModelError::DimensionMismatch(
            "continuous B row count must match A".into(),
        ));
    }
    if !(dt_s > 0.0) || !dt_s.is_finite() {
        return Err(ModelError::InvalidParameter(format!(
            "sampling period must be positive and finite, got {dt_s}"
        )));
    }
    if a_cont.iter().chain(b_cont.iter()).any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidParameter(
            "continuous-time matrices contain non-finite entries".into(),
        ));
    }
    let m = b_cont.ncols();
    let dim = n + m;
    let mut aug = DMatrix::<f64>::zeros(dim, dim);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a_cont * dt_s));
    aug.view_mut((0, n), (n, m)).copy_from(&(b_cont * dt_s));
    let exp = expm(&aug);
    let a_d = exp.view((0, 0), (n, n)).into_owned();
    let b_d = exp.view((0, n), (n, m)).into_owned();
    Ok((a_d, b_d))
}

/// Matrix exponential by scaling-and-squaring with a truncated Taylor
/// series; the series is summed until terms fall below 1e-16 relative.
fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.amax();
    // Scale so the series argument has infinity norm <= 0.5.
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings as i32);

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=64 {
        term = (&term * &scaled) / k as f64;
        sum += &term;
        if term.amax() <= 1e-16 * sum.amax() {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
