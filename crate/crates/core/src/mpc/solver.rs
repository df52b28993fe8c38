use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::MpcError;

/// Operator-splitting solver parameters.
#[derive(Debug, Clone)]
pub struct AdmmSettings {
    /// Step-size for the constraint splitting; adapted at runtime when
    /// `adaptive_rho` is set.
    pub rho: f64,
    /// Primal regularization of the KKT system.
    pub sigma: f64,
    /// Over-relaxation factor.
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub adaptive_rho: bool,
    /// Ruiz equilibration sweeps applied to the problem data.
    pub scaling_iters: usize,
    /// Attempt an exact active-set solve after convergence.
    pub polish: bool,
    /// Extra weight applied to rows with equal lower and upper bound.
    pub eq_rho_scale: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 4000,
            adaptive_rho: true,
            scaling_iters: 10,
            polish: true,
            eq_rho_scale: 1e3,
        }
    }
}

/// Dense QP `min 0.5 z'Hz + f'z  s.t.  lower <= A z <= upper`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Trailing decision variables that are constraint-softening slacks
    /// (zero when the problem has none).
    pub n_slacks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Constraint-row duals; positive at upper bounds, negative at lower.
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub polished: bool,
}

const MIN_SCALE: f64 = 1e-6;
const MAX_SCALE: f64 = 1e6;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const ADAPT_INTERVAL: usize = 50;
const POLISH_DELTA: f64 = 1e-8;

/// Reusable solver state for a fixed `(H, A)` pair: equilibration and the
/// initial KKT factorization are computed once and shared by every solve.
/// Linear terms and bounds may change between solves.
pub struct AdmmWorkspace {
    n: usize,
    m: usize,
    h_s: DMatrix<f64>,
    a_s: DMatrix<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    cost_scale: f64,
    /// Per-row multiplier on rho (1, or `eq_rho_scale` for equality rows).
    rho_base: DVector<f64>,
    factor: Cholesky<f64, Dyn>,
    factor_rho: f64,
    settings: AdmmSettings,
}

impl AdmmWorkspace {
    /// `lower`/`upper` here only fix which rows are equalities; the values
    /// passed to [`AdmmWorkspace::solve`] are the ones used.
    pub fn new(
        h: &DMatrix<f64>,
        a: &DMatrix<f64>,
        f_template: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
        settings: &AdmmSettings,
    ) -> Result<Self, MpcError> {
        let n = h.nrows();
        let m = a.nrows();
        if h.ncols() != n || n == 0 {
            return Err(MpcError::DimensionMismatch(format!(
                "H must be square and non-empty, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if a.ncols() != n || m == 0 {
            return Err(MpcError::DimensionMismatch(format!(
                "A must be {}-column with at least one row, got {}x{}",
                n,
                a.nrows(),
                a.ncols()
            )));
        }
        if f_template.len() != n || lower.len() != m || upper.len() != m {
            return Err(MpcError::DimensionMismatch(
                "f/lower/upper lengths must match H and A".into(),
            ));
        }

        let mut h_s = (h + h.transpose()) * 0.5;
        let mut a_s = a.clone();
        let mut f_s = f_template.clone();
        let mut d = DVector::from_element(n, 1.0);
        let mut e = DVector::from_element(m, 1.0);
        let mut cost_scale = 1.0;

        // Modified Ruiz equilibration on [[H, A'], [A, 0]] plus cost
        // normalization, as in operator-splitting QP solvers.
        for _ in 0..settings.scaling_iters {
            let mut delta = DVector::from_element(n, 1.0);
            for j in 0..n {
                let col_h = h_s.column(j).amax();
                let col_a = a_s.column(j).amax();
                let norm = col_h.max(col_a);
                delta[j] = clamp_scale(1.0 / norm.max(1e-12).sqrt());
            }
            let mut eps = DVector::from_element(m, 1.0);
            for i in 0..m {
                let norm = a_s.row(i).amax();
                eps[i] = clamp_scale(1.0 / norm.max(1e-12).sqrt());
            }
            for i in 0..n {
                for j in 0..n {
                    h_s[(i, j)] *= delta[i] * delta[j];
                }
            }
            for i in 0..m {
                for j in 0..n {
                    a_s[(i, j)] *= eps[i] * delta[j];
                }
            }
            for j in 0..n {
                f_s[j] *= delta[j];
                d[j] *= delta[j];
            }
            for i in 0..m {
                e[i] *= eps[i];
            }

            let mean_col: f64 =
                (0..n).map(|j| h_s.column(j).amax()).sum::<f64>() / n as f64;
            let gamma = clamp_scale(1.0 / mean_col.max(f_s.amax()).max(1e-12));
            h_s *= gamma;
            f_s *= gamma;
            cost_scale *= gamma;
        }

        let rho_base = DVector::from_fn(m, |i, _| {
            if lower[i].is_finite() && lower[i] == upper[i] {
                settings.eq_rho_scale
            } else {
                1.0
            }
        });

        let factor = factorize(&h_s, &a_s, &rho_base, settings.rho, settings.sigma)?;
        Ok(Self {
            n,
            m,
            h_s,
            a_s,
            d,
            e,
            cost_scale,
            rho_base,
            factor,
            factor_rho: settings.rho,
            settings: settings.clone(),
        })
    }

    pub fn settings(&self) -> &AdmmSettings {
        &self.settings
    }

    pub fn solve(
        &self,
        f: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
    ) -> Result<QpSolution, MpcError> {
        let (n, m) = (self.n, self.m);
        if f.len() != n || lower.len() != m || upper.len() != m {
            return Err(MpcError::DimensionMismatch(
                "f/lower/upper lengths must match the workspace".into(),
            ));
        }
        if (0..m).any(|i| lower[i] > upper[i]) {
            return Ok(QpSolution {
                z: DVector::zeros(n),
                y: DVector::zeros(m),
                status: QpStatus::Infeasible,
                iterations: 0,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
                objective: f64::INFINITY,
                polished: false,
            });
        }

        let s = &self.settings;
        let f_s = DVector::from_fn(n, |j, _| f[j] * self.d[j] * self.cost_scale);
        let l_s = DVector::from_fn(m, |i, _| lower[i] * self.e[i]);
        let u_s = DVector::from_fn(m, |i, _| upper[i] * self.e[i]);

        let mut rho = s.rho;
        let mut local_factor: Option<Cholesky<f64, Dyn>> = None;

        let mut x = DVector::<f64>::zeros(n);
        let mut z = DVector::<f64>::zeros(m);
        let mut y = DVector::<f64>::zeros(m);
        let mut ax = DVector::<f64>::zeros(m);

        let mut iterations = 0;
        // Checkpoint tolerances start at the configured relative level and
        // tighten whenever a checkpoint fails certification; large penalty
        // weights otherwise inflate the relative dual scale so much that
        // early iterates pass it while still far from optimal.
        let mut eps_rel_work = s.eps_rel;
        let mut r_prim = f64::INFINITY;
        let mut r_dual = f64::INFINITY;
        let mut best: Option<QpSolution> = None;

        loop {
            let mut hit_checkpoint = false;
            let mut ax_n = 0.0_f64;
            let mut z_n = 0.0_f64;
            let mut hx_n = 0.0_f64;

            while iterations < s.max_iter {
                iterations += 1;
                let factor = local_factor.as_ref().unwrap_or(&self.factor);

                // x~ update: (H + sigma I + A'RA) x~ = sigma x - f + A'(Rz - y)
                let rz_minus_y =
                    DVector::from_fn(m, |i, _| rho * self.rho_base[i] * z[i] - y[i]);
                let rhs = &x * s.sigma - &f_s + self.a_s.transpose() * rz_minus_y;
                let x_tilde = factor.solve(&rhs);
                let z_tilde = &self.a_s * &x_tilde;

                let x_next = &x_tilde * s.alpha + &x * (1.0 - s.alpha);
                let ax_next = &z_tilde * s.alpha + &ax * (1.0 - s.alpha);
                let mut z_next = DVector::<f64>::zeros(m);
                let mut y_next = DVector::<f64>::zeros(m);
                for i in 0..m {
                    let rho_i = rho * self.rho_base[i];
                    let v = s.alpha * z_tilde[i] + (1.0 - s.alpha) * z[i] + y[i] / rho_i;
                    let clamped = v.clamp(l_s[i], u_s[i]);
                    z_next[i] = clamped;
                    y_next[i] =
                        y[i] + rho_i * (s.alpha * z_tilde[i] + (1.0 - s.alpha) * z[i] - clamped);
                }

                x = x_next;
                z = z_next;
                y = y_next;
                ax = ax_next;

                // Unscaled residuals and norms.
                let hx = &self.h_s * &x;
                let aty = self.a_s.transpose() * &y;
                r_prim = unscale_rows_max(&(&ax - &z), &self.e);
                ax_n = unscale_rows_max(&ax, &self.e);
                z_n = unscale_rows_max(&z, &self.e);
                r_dual = unscale_cols_max(&(&hx + &f_s + &aty), &self.d) / self.cost_scale;
                hx_n = unscale_cols_max(&hx, &self.d) / self.cost_scale;
                let aty_n = unscale_cols_max(&aty, &self.d) / self.cost_scale;
                let f_n = unscale_cols_max(&f_s, &self.d) / self.cost_scale;

                let eps_prim = s.eps_abs + eps_rel_work * ax_n.max(z_n);
                let eps_dual = s.eps_abs + eps_rel_work * hx_n.max(aty_n).max(f_n);
                if r_prim <= eps_prim && r_dual <= eps_dual {
                    hit_checkpoint = true;
                    break;
                }

                if s.adaptive_rho && iterations % ADAPT_INTERVAL == 0 {
                    let prim_rel = r_prim / ax_n.max(z_n).max(1e-12);
                    let dual_rel = r_dual / hx_n.max(aty_n).max(f_n).max(1e-12);
                    let ratio = (prim_rel / dual_rel.max(1e-18)).sqrt();
                    let rho_new = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
                    if rho_new > 5.0 * rho || rho_new < rho / 5.0 {
                        rho = rho_new;
                        if (rho_new - self.factor_rho).abs() < f64::EPSILON {
                            local_factor = None;
                        } else {
                            local_factor = Some(factorize(
                                &self.h_s,
                                &self.a_s,
                                &self.rho_base,
                                rho,
                                s.sigma,
                            )?);
                        }
                    }
                }
            }

            // Certification: the dual test is scaled by the solution's own
            // gradient magnitude, not by the (possibly penalty-dominated)
            // linear term.
            let cert_prim = s.eps_abs + s.eps_rel * ax_n.max(z_n);
            let cert_dual = s.eps_abs + s.eps_rel * hx_n;

            let plain = self.finish(&x, &z, &y, f, r_prim, r_dual, true, iterations);
            if s.polish {
                for candidate_set in [
                    self.active_by_dual_sign(&l_s, &u_s, &y),
                    self.active_by_distance(&l_s, &u_s, &z, r_prim),
                ] {
                    if let Some(polished) =
                        self.try_polish(&f_s, &l_s, &u_s, &candidate_set, f)
                    {
                        if polished.primal_residual <= cert_prim
                            && polished.dual_residual <= cert_dual
                        {
                            return Ok(QpSolution {
                                iterations,
                                ..polished
                            });
                        }
                        if best.as_ref().map_or(true, |b| {
                            polished.primal_residual + polished.dual_residual
                                < b.primal_residual + b.dual_residual
                        }) {
                            best = Some(QpSolution {
                                iterations,
                                ..polished
                            });
                        }
                    }
                }
            }
            if r_prim <= cert_prim && r_dual <= cert_dual {
                return Ok(plain);
            }
            if best.as_ref().map_or(true, |b| {
                plain.primal_residual + plain.dual_residual
                    < b.primal_residual + b.dual_residual
            }) {
                best = Some(plain);
            }

            if iterations >= s.max_iter || !hit_checkpoint {
                let mut fallback = best.expect("at least one candidate recorded");
                fallback.status = QpStatus::MaxIterations;
                fallback.iterations = iterations;
                return Ok(fallback);
            }
            eps_rel_work *= 1e-2;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        x_s: &DVector<f64>,
        _z_s: &DVector<f64>,
        y_s: &DVector<f64>,
        f: &DVector<f64>,
        r_prim: f64,
        r_dual: f64,
        converged: bool,
        iterations: usize,
    ) -> QpSolution {
        let z = DVector::from_fn(self.n, |j, _| x_s[j] * self.d[j]);
        let y = DVector::from_fn(self.m, |i, _| y_s[i] * self.e[i] / self.cost_scale);
        let h_unscaled_quad = {
            // 0.5 z'Hz with H recovered by unscaling the stored copy.
            let mut acc = 0.0;
            for i in 0..self.n {
                for j in 0..self.n {
                    let h_ij = self.h_s[(i, j)] / (self.d[i] * self.d[j] * self.cost_scale);
                    acc += 0.5 * z[i] * h_ij * z[j];
                }
            }
            acc
        };
        let objective = h_unscaled_quad + f.dot(&z);
        QpSolution {
            z,
            y,
            status: if converged {
                QpStatus::Optimal
            } else {
                QpStatus::MaxIterations
            },
            iterations,
            primal_residual: r_prim,
            dual_residual: r_dual,
            objective,
            polished: false,
        }
    }

    /// Active rows guessed from the dual signs (equality rows always).
    fn active_by_dual_sign(
        &self,
        l_s: &DVector<f64>,
        u_s: &DVector<f64>,
        y_s: &DVector<f64>,
    ) -> Vec<(usize, f64)> {
        let mut active = Vec::new();
        for i in 0..self.m {
            if self.rho_base[i] > 1.0 {
                active.push((i, l_s[i]));
            } else if y_s[i] < 0.0 && l_s[i].is_finite() {
                active.push((i, l_s[i]));
            } else if y_s[i] > 0.0 && u_s[i].is_finite() {
                active.push((i, u_s[i]));
            }
        }
        active
    }

    /// Active rows guessed from proximity of `z` to its bounds, with the
    /// tolerance tied to the achieved primal residual.
    fn active_by_distance(
        &self,
        l_s: &DVector<f64>,
        u_s: &DVector<f64>,
        z_s: &DVector<f64>,
        r_prim: f64,
    ) -> Vec<(usize, f64)> {
        let mut active = Vec::new();
        for i in 0..self.m {
            if self.rho_base[i] > 1.0 {
                active.push((i, l_s[i]));
                continue;
            }
            let tol = (1e-7_f64).max(10.0 * r_prim * self.e[i]);
            let lo_gap = if l_s[i].is_finite() {
                z_s[i] - l_s[i]
            } else {
                f64::INFINITY
            };
            let hi_gap = if u_s[i].is_finite() {
                u_s[i] - z_s[i]
            } else {
                f64::INFINITY
            };
            if lo_gap <= tol && lo_gap <= hi_gap {
                active.push((i, l_s[i]));
            } else if hi_gap <= tol {
                active.push((i, u_s[i]));
            }
        }
        active
    }

    /// Active-set refinement: the guessed active rows are pinned to their
    /// bound and the reduced, lightly regularized KKT system is solved
    /// directly with iterative refinement. The candidate is only kept
    /// when it beats the iterate's residuals.
    fn try_polish(
        &self,
        f_s: &DVector<f64>,
        l_s: &DVector<f64>,
        u_s: &DVector<f64>,
        active: &[(usize, f64)],
        f: &DVector<f64>,
    ) -> Option<QpSolution> {
        let (n, m) = (self.n, self.m);
        let n_act = active.len();
        let dim = n + n_act;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.h_s);
        for j in 0..n {
            kkt[(j, j)] += POLISH_DELTA;
        }
        for (row, &(i, _)) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + row, j)] = self.a_s[(i, j)];
                kkt[(j, n + row)] = self.a_s[(i, j)];
            }
            kkt[(n + row, n + row)] = -POLISH_DELTA;
        }
        let mut rhs = DVector::<f64>::zeros(dim);
        for j in 0..n {
            rhs[j] = -f_s[j];
        }
        for (row, &(_, bound)) in active.iter().enumerate() {
            rhs[n + row] = bound;
        }
        let lu = kkt.clone().full_piv_lu();
        let mut sol = lu.solve(&rhs)?;
        // Refine against the unregularized KKT operator.
        for _ in 0..4 {
            let mut resid = rhs.clone();
            // resid -= K0 * sol, where K0 drops the +/- delta terms.
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.h_s[(i, j)] * sol[j];
                }
                for (row, &(r, _)) in active.iter().enumerate() {
                    acc += self.a_s[(r, i)] * sol[n + row];
                }
                resid[i] -= acc;
            }
            for (row, &(r, _)) in active.iter().enumerate() {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.a_s[(r, j)] * sol[j];
                }
                resid[n + row] -= acc;
            }
            let correction = lu.solve(&resid)?;
            sol += correction;
        }

        let x_pol = DVector::from_fn(n, |j, _| sol[j]);
        let mut y_pol = DVector::<f64>::zeros(m);
        for (row, &(i, _)) in active.iter().enumerate() {
            y_pol[i] = sol[n + row];
        }
        // A wrong active-set guess can satisfy stationarity and primal
        // feasibility with multipliers of the wrong sign; such a point is
        // not the QP optimum and must be rejected.
        let sign_tol = 1e-7 * (1.0 + y_pol.amax());
        for &(i, bound) in active {
            if self.rho_base[i] > 1.0 {
                continue;
            }
            let at_lower = bound == l_s[i];
            if at_lower && y_pol[i] > sign_tol {
                return None;
            }
            if !at_lower && y_pol[i] < -sign_tol {
                return None;
            }
        }
        let ax = &self.a_s * &x_pol;

        // Residuals of the polished candidate, unscaled.
        let mut prim = 0.0_f64;
        for i in 0..m {
            let viol = (l_s[i] - ax[i]).max(ax[i] - u_s[i]).max(0.0);
            prim = prim.max(viol / self.e[i]);
        }
        let station = &self.h_s * &x_pol + f_s + self.a_s.transpose() * &y_pol;
        let dual = unscale_cols_max(&station, &self.d) / self.cost_scale;

        let mut candidate = self.finish(&x_pol, &ax, &y_pol, f, prim, dual, true, 0);
        candidate.polished = true;
        Some(candidate)
    }
}

fn clamp_scale(s: f64) -> f64 {
    s.clamp(MIN_SCALE, MAX_SCALE)
}

fn unscale_rows_max(v: &DVector<f64>, e: &DVector<f64>) -> f64 {
    let mut acc = 0.0_f64;
    for i in 0..v.len() {
        acc = acc.max((v[i] / e[i]).abs());
    }
    acc
}

fn unscale_cols_max(v: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let mut acc = 0.0_f64;
    for i in 0..v.len() {
        acc = acc.max((v[i] / d[i]).abs());
    }
    acc
}

fn factorize(
    h_s: &DMatrix<f64>,
    a_s: &DMatrix<f64>,
    rho_base: &DVector<f64>,
    rho: f64,
    sigma: f64,
) -> Result<Cholesky<f64, Dyn>, MpcError> {
    let n = h_s.nrows();
    let mut kkt = h_s.clone();
    for j in 0..n {
        kkt[(j, j)] += sigma;
    }
    let mut scaled_a = a_s.clone();
    for i in 0..a_s.nrows() {
        let w = (rho * rho_base[i]).sqrt();
        for j in 0..n {
            scaled_a[(i, j)] *= w;
        }
    }
    kkt += scaled_a.transpose() * scaled_a;
    Cholesky::new(kkt).ok_or_else(|| {
        MpcError::InvalidSpec("KKT matrix is not positive definite; H must be PSD".into())
    })
}

/// One-shot solve of a [`QpProblem`]. Deterministic: identical inputs and
/// settings give bit-identical iterates and solutions.
pub fn solve_qp(qp: &QpProblem, settings: &AdmmSettings) -> Result<QpSolution, MpcError> {
    let ws = AdmmWorkspace::new(&qp.h, &qp.a, &qp.f, &qp.lower, &qp.upper, settings)?;
    ws.solve(&qp.f, &qp.lower, &qp.upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn box_qp(h: DMatrix<f64>, f: DVector<f64>, lo: f64, hi: f64) -> QpProblem {
        let n = h.nrows();
        QpProblem {
            a: DMatrix::identity(n, n),
            lower: DVector::from_element(n, lo),
            upper: DVector::from_element(n, hi),
            h,
            f,
            n_slacks: 0,
        }
    }

    #[test]
    fn unconstrained_quadratic_hits_minimizer() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let qp = box_qp(
            DMatrix::identity(3, 3),
            -c.clone(),
            f64::NEG_INFINITY,
            f64::INFINITY,
        );
        let sol = solve_qp(&qp, &AdmmSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z - c).amax() <= 1e-6);
    }

    #[test]
    fn clipped_minimizer_sits_on_bounds() {
        let qp = box_qp(
            DMatrix::identity(4, 4),
            DVector::from_element(4, -2.0),
            0.0,
            1.0,
        );
        let sol = solve_qp(&qp, &AdmmSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        for i in 0..4 {
            assert_abs_diff_eq!(sol.z[i], 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn crossing_bounds_reports_infeasible() {
        let mut qp = box_qp(DMatrix::identity(2, 2), DVector::zeros(2), 0.0, 1.0);
        qp.lower[1] = 2.0;
        let sol = solve_qp(&qp, &AdmmSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn equality_rows_are_enforced() {
        // min 0.5||z||^2 s.t. z0 + z1 = 2, -1 <= z <= 3; optimum (1, 1).
        let mut a = DMatrix::zeros(3, 2);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(2, 1)] = 1.0;
        let qp = QpProblem {
            h: DMatrix::identity(2, 2),
            f: DVector::zeros(2),
            a,
            lower: DVector::from_vec(vec![2.0, -1.0, -1.0]),
            upper: DVector::from_vec(vec![2.0, 3.0, 3.0]),
            n_slacks: 0,
        };
        let sol = solve_qp(&qp, &AdmmSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.z[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.z[1], 1.0, epsilon = 1e-6);
    }

    /// Projected gradient descent with a fixed 1/L step; independent of
    /// the ADMM path.
    fn pgd_oracle(
        h: &DMatrix<f64>,
        f: &DVector<f64>,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
        tol: f64,
    ) -> DVector<f64> {
        let lipschitz = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0_f64, |a, &b| a.max(b));
        let step = 1.0 / lipschitz;
        let n = h.nrows();
        let mut z = DVector::<f64>::zeros(n);
        for _ in 0..200_000 {
            let grad = h * &z + f;
            let mut next = &z - &grad * step;
            for i in 0..n {
                next[i] = next[i].clamp(lo[i], hi[i]);
            }
            let gap = (&next - &z).amax();
            z = next;
            if gap <= tol {
                break;
            }
        }
        z
    }

    #[test]
    fn matches_projected_gradient_on_random_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let n = rng.random_range(2..=12);
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let h = &m * m.transpose() + DMatrix::<f64>::identity(n, n) * 0.5;
            let f = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let lo = DVector::from_fn(n, |_, _| rng.random_range(-1.0..0.0));
            let hi = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
            let qp = QpProblem {
                h: h.clone(),
                f: f.clone(),
                a: DMatrix::identity(n, n),
                lower: lo.clone(),
                upper: hi.clone(),
                n_slacks: 0,
            };
            let sol = solve_qp(&qp, &AdmmSettings::default()).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal);
            let z_ref = pgd_oracle(&h, &f, &lo, &hi, 1e-12);
            let obj_ref = 0.5 * z_ref.dot(&(&h * &z_ref)) + f.dot(&z_ref);
            assert!(
                (sol.objective - obj_ref).abs() <= 1e-7,
                "objective gap {}",
                (sol.objective - obj_ref).abs()
            );
        }
    }

    #[test]
    fn identical_inputs_give_identical_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = &m * m.transpose() + DMatrix::<f64>::identity(n, n);
        let qp = QpProblem {
            h,
            f: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            a: DMatrix::identity(n, n),
            lower: DVector::from_element(n, -0.5),
            upper: DVector::from_element(n, 0.5),
            n_slacks: 0,
        };
        let s = AdmmSettings::default();
        let a = solve_qp(&qp, &s).unwrap();
        let b = solve_qp(&qp, &s).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.z.as_slice(), b.z.as_slice());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    /// Stationarity and feasibility certify every optimal solution.
    #[test]
    fn kkt_residuals_hold_at_reported_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let n = rng.random_range(2..=10);
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let h = &m * m.transpose() + DMatrix::<f64>::identity(n, n) * 0.3;
            let f = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let qp = QpProblem {
                h: h.clone(),
                f: f.clone(),
                a: DMatrix::identity(n, n),
                lower: DVector::from_element(n, -0.7),
                upper: DVector::from_element(n, 0.7),
                n_slacks: 0,
            };
            let sol = solve_qp(&qp, &AdmmSettings::default()).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal);
            let stationarity = (&h * &sol.z + &f + qp.a.transpose() * &sol.y).amax();
            assert!(stationarity <= 1e-6, "stationarity {stationarity}");
            for i in 0..n {
                assert!(sol.z[i] >= qp.lower[i] - 1e-6);
                assert!(sol.z[i] <= qp.upper[i] + 1e-6);
            }
        }
    }
}
