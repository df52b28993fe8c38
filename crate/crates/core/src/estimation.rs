//! Kalman filtering with the Joseph-form measurement update.
//!
//! The filter is a value type: `predict` and `update_joseph` return new
//! filters instead of mutating, so a control loop owns exactly one live
//! instance at a time. The covariance is re-symmetrized after every
//! operation and the Joseph form keeps it positive semidefinite even for
//! suboptimal gains.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::plant::LtiModel;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("covariance must be symmetric PSD: {0}")]
    InvalidCovariance(String),
    #[error("innovation covariance numerically singular (condition estimate {condition:.3e})")]
    SingularInnovation { condition: f64 },
}

/// Maximum allowed asymmetry after re-symmetrization checks.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KalmanFilter {
    /// Prediction model; `A`, `B` drive the time update and `C` is the
    /// measurement map (outputs are assumed to have no feedthrough).
    pub model: LtiModel,
    pub q_proc: DMatrix<f64>,
    pub r_meas: DMatrix<f64>,
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    /// Gain from the most recent measurement update, if any.
    pub gain: Option<DMatrix<f64>>,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_sym_psd(name: &str, m: &DMatrix<f64>, dim: usize) -> Result<(), EstimationError> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(EstimationError::DimensionMismatch(format!(
            "{name} must be {dim}x{dim}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(EstimationError::InvalidCovariance(format!(
            "{name} asymmetry {asym:.3e}"
        )));
    }
    let min_eig = symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < -SYMMETRY_TOL {
        return Err(EstimationError::InvalidCovariance(format!(
            "{name} min eigenvalue {min_eig:.3e}"
        )));
    }
    Ok(())
}

impl KalmanFilter {
    pub fn new(
        model: LtiModel,
        q_proc: DMatrix<f64>,
        r_meas: DMatrix<f64>,
        x0: DVector<f64>,
        p0: DMatrix<f64>,
    ) -> Result<Self, EstimationError> {
        let n = model.n_states();
        let p_dim = model.n_outputs();
        check_sym_psd("Q", &q_proc, n)?;
        check_sym_psd("R", &r_meas, p_dim)?;
        check_sym_psd("P0", &p0, n)?;
        if x0.len() != n {
            return Err(EstimationError::DimensionMismatch(format!(
                "x0 length {} != state dimension {n}",
                x0.len()
            )));
        }
        Ok(Self {
            model,
            q_proc,
            r_meas,
            x_hat: x0,
            p: symmetrize(&p0),
            gain: None,
        })
    }

    /// Time update: `x <- A x + B u`, `P <- A P A' + Q`.
    pub fn predict(&self, u: &DVector<f64>) -> Result<Self, EstimationError> {
        if u.len() != self.model.n_inputs() {
            return Err(EstimationError::DimensionMismatch(format!(
                "input length {} != {}",
                u.len(),
                self.model.n_inputs()
            )));
        }
        let x_hat = &self.model.a * &self.x_hat + &self.model.b * u;
        let p = symmetrize(&(&self.model.a * &self.p * self.model.a.transpose() + &self.q_proc));
        Ok(Self {
            x_hat,
            p,
            ..self.clone()
        })
    }

    /// Optimal gain `K = P H' S^-1` with `S = H P H' + R`, computed by a
    /// Cholesky solve of `S` (with a symmetric eigen-solve fallback for
    /// borderline-indefinite `S`); `S` is never inverted explicitly.
    pub fn gain(&self) -> Result<DMatrix<f64>, EstimationError> {
        let h = &self.model.c;
        let s = symmetrize(&(h * &self.p * h.transpose() + &self.r_meas));
        let ph_t = &self.p * h.transpose();
        // K = P H' S^-1  <=>  S K' = H P'.
        let rhs = ph_t.transpose();
        if let Some(chol) = s.clone().cholesky() {
            return Ok(chol.solve(&rhs).transpose());
        }
        let eig = s.symmetric_eigen();
        let max_abs = eig.eigenvalues.amax();
        let min_abs = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        if max_abs <= 0.0 || min_abs <= max_abs * 1e-14 {
            return Err(EstimationError::SingularInnovation {
                condition: if min_abs > 0.0 { max_abs / min_abs } else { f64::INFINITY },
            });
        }
        let inv_vals = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&l| 1.0 / l),
        );
        let solved =
            &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose() * rhs;
        Ok(solved.transpose())
    }

    /// Measurement update with the optimal gain and the Joseph covariance
    /// form `P <- (I - K H) P (I - K H)' + K R K'`.
    pub fn update_joseph(&self, y_meas: &DVector<f64>) -> Result<Self, EstimationError> {
        let gain = self.gain()?;
        self.update_joseph_with_gain(y_meas, &gain)
    }

    /// Joseph-form update with a caller-supplied gain. The Joseph form
    /// preserves positive semidefiniteness for any gain, optimal or not.
    pub fn update_joseph_with_gain(
        &self,
        y_meas: &DVector<f64>,
        gain: &DMatrix<f64>,
    ) -> Result<Self, EstimationError> {
        let n = self.model.n_states();
        let p_dim = self.model.n_outputs();
        if y_meas.len() != p_dim {
            return Err(EstimationError::DimensionMismatch(format!(
                "measurement length {} != {p_dim}",
                y_meas.len()
            )));
        }
        if gain.nrows() != n || gain.ncols() != p_dim {
            return Err(EstimationError::DimensionMismatch(format!(
                "gain must be {n}x{p_dim}, got {}x{}",
                gain.nrows(),
                gain.ncols()
            )));
        }
        let h = &self.model.c;
        let innovation = y_meas - h * &self.x_hat;
        let x_hat = &self.x_hat + gain * innovation;
        let i_kh = DMatrix::<f64>::identity(n, n) - gain * h;
        let p = symmetrize(
            &(&i_kh * &self.p * i_kh.transpose() + gain * &self.r_meas * gain.transpose()),
        );
        Ok(Self {
            x_hat,
            p,
            gain: Some(gain.clone()),
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model_from(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> LtiModel {
        let m = b.ncols();
        let p = c.nrows();
        LtiModel::new(a, b, c, DMatrix::zeros(p, m), 1.0).unwrap()
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() * scale + DMatrix::<f64>::identity(n, n) * 1e-3 * scale
    }

    fn min_eig(m: &DMatrix<f64>) -> f64 {
        ((m + m.transpose()) * 0.5)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    #[test]
    fn identity_propagation_keeps_state_and_covariance() {
        let model = model_from(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
        );
        let kf = KalmanFilter::new(
            model,
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::identity(2, 2) * 3.0,
        )
        .unwrap();
        let next = kf.predict(&DVector::zeros(1)).unwrap();
        assert_eq!(next.x_hat, kf.x_hat);
        assert_eq!(next.p, kf.p);
    }

    #[test]
    fn memoryless_system_resets_covariance_to_q() {
        let model = model_from(
            DMatrix::zeros(3, 3),
            DMatrix::zeros(3, 1),
            DMatrix::identity(3, 3),
        );
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, 2.0]));
        let kf = KalmanFilter::new(
            model,
            q.clone(),
            DMatrix::identity(3, 3),
            DVector::zeros(3),
            DMatrix::identity(3, 3) * 7.0,
        )
        .unwrap();
        let next = kf.predict(&DVector::zeros(1)).unwrap();
        assert_eq!(next.p, q);
    }

    /// Twenty predicts against a recurrence recomputed with plain loops.
    #[test]
    fn predict_matches_direct_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
        let b = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let model = model_from(a.clone(), b.clone(), DMatrix::identity(n, n));
        let q = random_psd(&mut rng, n, 0.1);
        let p0 = random_psd(&mut rng, n, 1.0);
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mut kf = KalmanFilter::new(
            model,
            q.clone(),
            DMatrix::identity(n, n),
            x0.clone(),
            p0.clone(),
        )
        .unwrap();

        let mut x_ref = x0;
        let mut p_ref = p0;
        for _ in 0..20 {
            let u = DVector::from_fn(1, |_, _| rng.random_range(-1.0..1.0));
            kf = kf.predict(&u).unwrap();
            x_ref = &a * &x_ref + &b * &u;
            p_ref = &a * &p_ref * a.transpose() + &q;
            p_ref = (&p_ref + p_ref.transpose()) * 0.5;
            assert!((&kf.x_hat - &x_ref).amax() <= 1e-10);
            assert!((&kf.p - &p_ref).amax() <= 1e-10);
        }
    }

    #[test]
    fn huge_measurement_noise_kills_the_gain() {
        let model = model_from(
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 1),
            DMatrix::identity(3, 3),
        );
        let kf = KalmanFilter::new(
            model,
            DMatrix::zeros(3, 3),
            DMatrix::identity(3, 3) * 1e12,
            DVector::zeros(3),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let k = kf.gain().unwrap();
        assert!(k.amax() <= 1e-9);
    }

    #[test]
    fn perfect_measurement_gives_identity_gain() {
        let model = model_from(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
        );
        let kf = KalmanFilter::new(
            model,
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let k = kf.gain().unwrap();
        assert!((k - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-12);
    }

    /// `K S = P H'` must hold as a residual without forming `S^-1`.
    #[test]
    fn gain_satisfies_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.random_range(2..=5);
            let p_dim = rng.random_range(1..=n);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
            let h = DMatrix::from_fn(p_dim, n, |_, _| rng.random_range(-1.0..1.0));
            let model = model_from(a, DMatrix::zeros(n, 1), h.clone());
            let p = random_psd(&mut rng, n, 1.0);
            let r = random_psd(&mut rng, p_dim, 0.1);
            let kf = KalmanFilter::new(model, DMatrix::zeros(n, n), r.clone(), DVector::zeros(n), p.clone())
                .unwrap();
            let k = kf.gain().unwrap();
            let s = &h * &p * h.transpose() + &r;
            assert!((&k * s - p * h.transpose()).amax() <= 1e-9);
        }
    }

    #[test]
    fn zero_gain_update_changes_nothing() {
        let model = model_from(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
        );
        let kf = KalmanFilter::new(
            model,
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::identity(2, 2) * 4.0,
        )
        .unwrap();
        let updated = kf
            .update_joseph_with_gain(&DVector::from_vec(vec![9.0, -9.0]), &DMatrix::zeros(2, 2))
            .unwrap();
        assert_eq!(updated.x_hat, kf.x_hat);
        assert_eq!(updated.p, kf.p);
    }

    /// At the optimal gain the Joseph form equals the short form
    /// `(I - K H) P`; with a perturbed gain only the Joseph form is
    /// guaranteed to stay PSD.
    #[test]
    fn joseph_equals_short_form_at_optimal_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let n = 4;
            let p_dim = 2;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
            let h = DMatrix::from_fn(p_dim, n, |_, _| rng.random_range(-1.0..1.0));
            let model = model_from(a, DMatrix::zeros(n, 1), h.clone());
            let p = random_psd(&mut rng, n, 1.0);
            let r = random_psd(&mut rng, p_dim, 0.05);
            let kf = KalmanFilter::new(
                model,
                DMatrix::zeros(n, n),
                r,
                DVector::zeros(n),
                p.clone(),
            )
            .unwrap();
            let k = kf.gain().unwrap();
            let y = DVector::from_fn(p_dim, |_, _| rng.random_range(-1.0..1.0));
            let updated = kf.update_joseph(&y).unwrap();
            let short = (DMatrix::<f64>::identity(n, n) - &k * &h) * &p;
            assert!((&updated.p - (&short + short.transpose()) * 0.5).amax() <= 1e-9);
            // trace(P+) <= trace(P-) at the optimal gain.
            assert!(updated.p.trace() <= p.trace() + 1e-12);
        }
    }

    #[test]
    fn joseph_stays_psd_under_perturbed_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let n = 4;
            let h = DMatrix::<f64>::identity(n, n);
            let model = model_from(DMatrix::identity(n, n), DMatrix::zeros(n, 1), h);
            let p = random_psd(&mut rng, n, 1.0);
            let kf = KalmanFilter::new(
                model,
                DMatrix::zeros(n, n),
                DMatrix::identity(n, n) * 1e-8,
                DVector::zeros(n),
                p,
            )
            .unwrap();
            let k = kf.gain().unwrap() * 1.1;
            let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let updated = kf.update_joseph_with_gain(&y, &k).unwrap();
            assert!(min_eig(&updated.p) >= -1e-9);
            let asym = (&updated.p - updated.p.transpose()).amax();
            assert!(asym <= 1e-9);
        }
    }

    /// With near-zero noise the estimate locks onto a noiseless simulated
    /// plant after a handful of measurements.
    #[test]
    fn estimator_converges_on_noiseless_plant() {
        let a = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.0, 0.0, 0.8, 0.2, 0.05, 0.0, 0.95]);
        let b = DMatrix::from_row_slice(3, 1, &[0.1, 0.0, 0.2]);
        let h = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.5]);
        let model = model_from(a.clone(), b.clone(), h);
        let mut kf = KalmanFilter::new(
            model.clone(),
            DMatrix::zeros(3, 3),
            DMatrix::identity(1, 1) * 1e-10,
            DVector::zeros(3),
            DMatrix::identity(3, 3) * 1e4,
        )
        .unwrap();
        let mut x = DVector::from_vec(vec![2.0, -1.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for step in 0..8 {
            let y = model.output(&x, &DVector::zeros(1)).unwrap();
            kf = kf.update_joseph(&y).unwrap();
            if step >= 3 {
                assert!(
                    (&kf.x_hat - &x).amax() <= 1e-6,
                    "estimate off by {} at step {step}",
                    (&kf.x_hat - &x).amax()
                );
            }
            let u = DVector::from_fn(1, |_, _| rng.random_range(-1.0..1.0));
            let (x_next, _) = model.step(&x, &u, None).unwrap();
            kf = kf.predict(&u).unwrap();
            x = x_next;
        }
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let model = model_from(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
        );
        let mut q = DMatrix::zeros(2, 2);
        q[(0, 1)] = 1.0;
        let err = KalmanFilter::new(
            model,
            q,
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
        );
        assert!(matches!(err, Err(EstimationError::InvalidCovariance(_))));
    }
}
