//! End-to-end reconstruction checks at a reduced scale: training descends,
//! reconstructions land near the truth, and both routes are deterministic.

use eispinr::inversion::{bp_reconstruct, render, train, TrainContext};
use eispinr::metrics::evaluate;
use eispinr::physics::simulate_measurements;
use eispinr::scenes::{Cylinder, Scene};
use eispinr::system::{streams, Rng, SystemConfig};

/// Small but physical: 12x12 inversion grid, 24x24 generation grid.
fn small_config() -> SystemConfig {
    let mut c = SystemConfig::desk_preset();
    c.grid_m = 12;
    c.grid_gen = 24;
    c.n_tx = 6;
    c.n_rx = 12;
    c.omega = 3;
    c.hidden_width = 48;
    c.iters = 300;
    c.noise_level = 0.02;
    c
}

fn small_scene() -> Scene {
    Scene::Cylinders {
        cylinders: vec![Cylinder {
            x: -0.1,
            y: 0.2,
            radius: 0.45,
            eps: 1.35,
        }],
    }
}

fn simulate(c: &SystemConfig) -> eispinr::physics::MeasurementSet {
    simulate_measurements(&small_scene(), c, &mut Rng::with_stream(c.seed, streams::NOISE))
        .unwrap()
}

#[test]
fn training_descends_and_reconstructs_the_scene() {
    let c = small_config();
    let meas = simulate(&c);
    let truth = meas.ground_truth.clone().unwrap();

    let (ckpt, report) = train(&meas, &c, 0).unwrap();
    let h = &report.history;
    assert_eq!(h.len(), c.iters);

    // Smoothed data loss falls over training.
    let window = 50;
    let head: f64 = h[..window].iter().map(|l| l.data).sum::<f64>() / window as f64;
    let tail: f64 =
        h[h.len() - window..].iter().map(|l| l.data).sum::<f64>() / window as f64;
    assert!(
        tail < head,
        "data loss did not descend: first {head:.3e}, last {tail:.3e}"
    );

    // The reconstruction is meaningfully better than an empty map.
    let rec = render(&ckpt, c.grid_gen).unwrap();
    let inr = evaluate(&rec.eps_grid, rec.resolution, &truth, c.grid_gen).unwrap();
    let empty = vec![1.0; truth.len()];
    let baseline = evaluate(&empty, c.grid_gen, &truth, c.grid_gen).unwrap();
    assert!(
        inr.rrmse < baseline.rrmse,
        "trained {} vs background-only {}",
        inr.rrmse,
        baseline.rrmse
    );

    // Every iteration recorded finite, non-negative components.
    for l in h {
        assert!(l.total.is_finite() && l.data >= 0.0 && l.state >= 0.0 && l.tv >= 0.0);
    }
    assert_eq!(report.iter_seconds.len(), c.iters);
    assert!(report.iter_seconds.iter().all(|&s| s >= 0.0));
}

#[test]
fn training_is_deterministic_in_the_seed() {
    let mut c = small_config();
    c.iters = 40;
    let meas = simulate(&c);
    let (a, ra) = train(&meas, &c, 5).unwrap();
    let (b, rb) = train(&meas, &c, 5).unwrap();
    assert_eq!(a.f_net.data(), b.f_net.data());
    assert_eq!(
        a.h_net.as_ref().unwrap().data(),
        b.h_net.as_ref().unwrap().data()
    );
    let totals_a: Vec<f64> = ra.history.iter().map(|l| l.total).collect();
    let totals_b: Vec<f64> = rb.history.iter().map(|l| l.total).collect();
    assert_eq!(totals_a, totals_b);

    let (c2, _) = train(&meas, &c, 6).unwrap();
    assert_ne!(a.f_net.data(), c2.f_net.data(), "seeds must differ");
}

#[test]
fn bp_baseline_recovers_a_coarse_cylinder() {
    let c = small_config();
    let meas = simulate(&c);
    let truth = meas.ground_truth.clone().unwrap();
    let rec = bp_reconstruct(&meas, &c).unwrap();
    assert_eq!(rec.resolution, c.grid_m);
    assert!(rec.eps_grid.iter().all(|&e| e >= 1.0));
    let report = evaluate(&rec.eps_grid, rec.resolution, &truth, c.grid_gen).unwrap();
    assert!(
        report.rrmse <= 0.15,
        "BP quality collapsed: rrmse {}",
        report.rrmse
    );
}

#[test]
fn losses_at_truth_currents_are_near_zero() {
    // Solving the forward problem on the inversion grid and plugging the
    // exact contrast and currents into the loss context gives residuals at
    // solver precision, tying the training objective to the simulator.
    use eispinr::inversion::{data_loss, predict_current, predict_scattered, state_loss};
    use eispinr::physics::{build_greens, forward_solve, incident_fields};
    use eispinr::scenes::rasterize;
    use eispinr::system::{grid_centers, ring_positions};

    let c = small_config();
    let grid = grid_centers(c.grid_m, c.roi_side);
    let rx = ring_positions(c.n_rx, c.ring_radius, c.rx_phase);
    let tx = ring_positions(c.n_tx, c.ring_radius, c.tx_phase);
    let greens = build_greens(&c, &grid, &rx).unwrap();
    let e_i = incident_fields(&c, &tx, &grid.centers).unwrap();
    let xi: Vec<f64> = rasterize(&small_scene(), c.grid_m, c.roi_side)
        .iter()
        .map(|e| e - 1.0)
        .collect();
    let (_, j, e_s) = forward_solve(&greens, &xi, &e_i).unwrap();

    let e_hat = predict_scattered(&j, &greens.g_s).unwrap();
    assert!(data_loss(&e_hat, &e_s).unwrap() <= 1e-9);
    let j_hat = predict_current(&xi, &e_i, &greens.g_d, &j).unwrap();
    assert!(state_loss(&j_hat, &j, &xi, &e_i, c.delta).unwrap() <= 1e-9);
}

#[test]
fn geometry_mismatch_is_rejected_up_front() {
    let c = small_config();
    let meas = simulate(&c);
    let mut other = c.clone();
    other.n_tx = 5;
    assert!(TrainContext::new(&meas, &other).is_err());
    assert!(train(&meas, &other, 0).is_err());
    assert!(bp_reconstruct(&meas, &other).is_err());

    // Hyperparameter changes are allowed; geometry is what must match.
    let mut hyper = c.clone();
    hyper.iters = 3;
    hyper.lambda_tv = 0.5;
    assert!(TrainContext::new(&meas, &hyper).is_ok());
}

#[test]
fn rendering_respects_resolution_and_floor() {
    let mut c = small_config();
    c.iters = 30;
    let meas = simulate(&c);
    let (ckpt, _) = train(&meas, &c, 1).unwrap();
    for res in [2usize, 12, 50] {
        let rec = render(&ckpt, res).unwrap();
        assert_eq!(rec.eps_grid.len(), res * res);
        assert!(rec.eps_grid.iter().all(|&e| e >= 1.0));
    }
    assert!(render(&ckpt, 1).is_err(), "degenerate grid must be refused");
}
