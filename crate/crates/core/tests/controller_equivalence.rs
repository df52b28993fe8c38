//! Closed-loop agreement between the model-based and data-driven
//! controllers on a noiseless battery-style plant: with exact offline data
//! and vanishing regularization the two input sequences coincide.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use loopbench_core::mpc::{AdmmSettings, MpcController};
use loopbench_core::plant::{build_battery_model, BatteryParams};
use loopbench_core::smmpc::{build_signal_matrix, SmmpcConfig, SmmpcController};

#[test]
fn smmpc_tracks_mpc_on_noiseless_battery_loop() {
    let params = BatteryParams {
        charge_efficiency: 1.0,
        discharge_efficiency: 1.0,
        ..BatteryParams::default()
    };
    let dt = 900.0;
    let model = build_battery_model(&params, dt).unwrap();
    let horizon = 8;
    let t_ini = 2;

    let u_lo = DVector::from_element(1, params.power_min_w);
    let u_hi = DVector::from_element(1, params.power_max_w);
    let q = DMatrix::identity(1, 1);
    // Tiny input weight, expressed per normalized input so both
    // controllers see the same objective.
    let qp_scalar = 1e-8 / (params.power_max_w * params.power_max_w);
    let qp = DMatrix::from_element(1, 1, qp_scalar);

    let settings = AdmmSettings {
        eps_abs: 1e-9,
        eps_rel: 1e-9,
        ..AdmmSettings::default()
    };

    // Offline excitation data from the same plant.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let t_data = 120;
    let inputs: Vec<DVector<f64>> = (0..t_data)
        .map(|_| DVector::from_element(1, rng.random_range(-8000.0..8000.0)))
        .collect();
    let traj = model
        .simulate(&DVector::from_element(1, 50.0), &inputs, None)
        .unwrap();
    let u_data = DMatrix::from_fn(1, t_data, |_, c| traj.inputs[c][0]);
    let y_data = DMatrix::from_fn(1, t_data, |_, c| traj.outputs[c][0]);
    let sm = build_signal_matrix(&u_data, &y_data, t_ini, horizon).unwrap();
    assert!(sm.pe_ok(1));

    let cfg = SmmpcConfig {
        t_ini,
        horizon,
        q_output: q.clone(),
        q_input: qp.clone(),
        lambda_g: 0.0,
        lambda_y: f64::INFINITY,
        noise_variance: 0.0,
        u_lower: u_lo,
        u_upper: u_hi,
    };
    let smm = SmmpcController::new(sm, cfg, settings).unwrap();

    // Shared sinusoidal SOC reference.
    let steps = 30;
    let reference: Vec<DVector<f64>> = (0..steps + horizon)
        .map(|k| {
            DVector::from_element(
                1,
                50.0 + 15.0 * (2.0 * std::f64::consts::PI * k as f64 / 96.0).sin(),
            )
        })
        .collect();

    let run = |use_smm: bool| -> Vec<f64> {
        let mut soc = DVector::from_element(1, 50.0);
        let mut u_hist: Vec<DVector<f64>> = vec![DVector::zeros(1); t_ini];
        let mut y_hist: Vec<DVector<f64>> = vec![soc.clone(); t_ini];
        let mut applied = Vec::new();
        let mut mpc_local = MpcController::new(
            model.clone(),
            horizon,
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, qp_scalar),
            (
                DVector::from_element(1, params.power_min_w),
                DVector::from_element(1, params.power_max_w),
            ),
            (
                DVector::from_element(1, f64::NEG_INFINITY),
                DVector::from_element(1, f64::INFINITY),
            ),
            1e4,
            AdmmSettings {
                eps_abs: 1e-9,
                eps_rel: 1e-9,
                ..AdmmSettings::default()
            },
        )
        .unwrap();
        for k in 0..steps {
            let window: Vec<DVector<f64>> =
                reference[k..k + horizon].iter().cloned().collect();
            let u = if use_smm {
                smm.step(&u_hist, &y_hist, &window).unwrap().u0
            } else {
                mpc_local.step(&soc, &window).unwrap().u0
            };
            let (next, y) = model.step(&soc, &u, None).unwrap();
            u_hist.push(u.clone());
            u_hist.remove(0);
            y_hist.push(y.clone());
            y_hist.remove(0);
            applied.push(u[0]);
            soc = next;
        }
        applied
    };

    let u_mpc = run(false);
    let u_smm = run(true);
    for k in 0..steps {
        assert!(
            (u_mpc[k] - u_smm[k]).abs() <= 1e-3 * params.power_max_w.max(1.0),
            "step {k}: mpc {} vs smmpc {}",
            u_mpc[k],
            u_smm[k]
        );
    }
}
