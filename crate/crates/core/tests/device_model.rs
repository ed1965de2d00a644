use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinqubit::device::*;

fn sweep() -> Vec<f64> {
    (0..12).map(|k| 0.02 * k as f64).collect()
}

#[test]
fn exchange_spans_the_measured_range() {
    let m = DeviceModel::reference();
    assert!(exchange(&m, 0.0) < 100e3);
    let top = m.barrier_for_exchange(20e6);
    assert!((exchange(&m, top) - 20e6).abs() < 1e-3);
    assert!(top > 0.2 && top < 0.3);
}

#[test]
fn conditional_splittings_equal_exchange_on_fifty_voltages() {
    let m = DeviceModel::reference();
    for k in 0..50 {
        let v = -0.05 + 0.3 * k as f64 / 49.0;
        let c = conditional_frequencies(&m, v).unwrap();
        let j = exchange(&m, v);
        let d1 = c.f_q1_given_q2_0 - c.f_q1_given_q2_1;
        let d2 = c.f_q2_given_q1_0 - c.f_q2_given_q1_1;
        assert!((d1 - d2).abs() / j < 1e-6);
        assert!((d1.abs() - j).abs() / j < 1e-6, "v={v} d={d1} J={j}");
    }
}

#[test]
fn q2_mean_frequency_follows_field_shift() {
    let m = DeviceModel::reference();
    let mean = |v: f64| {
        let c = conditional_frequencies(&m, v).unwrap();
        (c.f_q2_given_q1_0 + c.f_q2_given_q1_1) / 2.0
    };
    let v = 0.15;
    let shift = mean(v) - mean(0.0);
    // field shift plus the second-order exchange pull, written out independently
    let pull = |v: f64| {
        let delta = (11.993e9 - 2.91e6 * v.powf(1.2)) - (11.890e9 + 67.2e6 * v.powf(1.2));
        let j = 58.8e3 * (2.0 * 12.1 * v).exp();
        (delta - (delta * delta + j * j).sqrt()) / 2.0
    };
    let expected = 67.2e6 * v.powf(1.2) + pull(v) - pull(0.0);
    assert!((shift - expected).abs() < 1e-3, "{shift} vs {expected}");
    assert!((shift - 67.2e6 * v.powf(1.2)).abs() < 20e3);
}

#[test]
fn single_source_dephasing_is_closed_form() {
    let mut m = DeviceModel::reference();
    m.j_res = 1e-6;
    m.delta_vb = 0.0;
    m.delta_fq2 = 0.0;
    let t = dephasing_times(&m, 0.0).unwrap();
    let want = 1.0 / (2f64.sqrt() * std::f64::consts::PI * 11e3);
    assert!((t.t2_q1_given_q2_0 / want - 1.0).abs() < 1e-6);
    assert!((t.t2_q1_given_q2_1 / want - 1.0).abs() < 1e-6);
}

#[test]
fn dephasing_shortens_as_exchange_grows() {
    let m = DeviceModel::reference();
    let mut prev = f64::INFINITY;
    for k in 0..10 {
        let v = 0.05 + 0.02 * k as f64;
        let t = dephasing_times(&m, v).unwrap();
        let t2 = t.t2_q1_given_q2_1;
        assert!(t2 < prev);
        prev = t2;
    }
}

#[test]
fn barrier_noise_dominated_by_exchange_slope_at_10_mhz() {
    let mut m = DeviceModel::reference();
    m.delta_fq1 = 0.0;
    m.delta_fq2 = 0.0;
    let v = m.barrier_for_exchange(10e6);
    let d = transition_sensitivities(&m, v, DV_STEP, DF_STEP).unwrap();
    let dj = 2.0 * m.alpha * 10e6;
    // conditional transitions move by ±dJ/2 plus the common field shift
    let spread = (d[1][0] - d[0][0]).abs();
    assert!((spread - dj).abs() / dj < 1e-4, "{spread} vs {dj}");
}

#[test]
fn sensitivities_pass_richardson_check() {
    let m = DeviceModel::reference();
    for v in [0.05, 0.15, 0.22] {
        let h = transition_sensitivities(&m, v, 2.0 * DV_STEP, 2.0 * DF_STEP).unwrap();
        let h2 = transition_sensitivities(&m, v, DV_STEP, DF_STEP).unwrap();
        let h4 = transition_sensitivities(&m, v, DV_STEP / 2.0, DF_STEP / 2.0).unwrap();
        for k in 0..4 {
            // error ratio of consecutive halvings approaches 4 for central differences
            let e1 = h[k][0] - h2[k][0];
            let e2 = h2[k][0] - h4[k][0];
            let rich = h2[k][0] + (h2[k][0] - h[k][0]) / 3.0;
            assert!((h2[k][0] - rich).abs() <= 0.05 * rich.abs(), "v={v} k={k}");
            if e2.abs() > 1e-3 * h2[k][0].abs() * 1e-6 {
                let ratio = e1 / e2;
                assert!((ratio - 4.0).abs() < 0.2 * 4.0 || e1.abs() < 1e-6 * h2[k][0].abs(), "ratio {ratio}");
            }
        }
    }
}

#[test]
fn exact_round_trip_of_exchange_fit() {
    let truth = DeviceModel::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = synthesize_frequency_data(&truth, &sweep(), 0.0, &mut rng).unwrap();
    let opts = FitOptions { bootstrap_resamples: 10, ..Default::default() };
    let fit = fit_exchange_model(&data, &opts).unwrap();
    let m = &fit.model;
    for (got, want) in [
        (m.alpha, truth.alpha),
        (m.beta1, truth.beta1),
        (m.beta2, truth.beta2),
        (m.gamma, truth.gamma),
        (m.j_res, truth.j_res),
        (m.f_q1, truth.f_q1),
        (m.f_q2, truth.f_q2),
    ] {
        assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn too_few_points_are_rejected() {
    let truth = DeviceModel::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = synthesize_frequency_data(&truth, &sweep()[..5], 0.0, &mut rng).unwrap();
    assert!(fit_exchange_model(&data, &FitOptions::default()).is_err());
}

#[test]
fn bootstrap_interval_covers_alpha() {
    let truth = DeviceModel::reference();
    let mut covered = 0;
    let reps = 50;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
        let data = synthesize_frequency_data(&truth, &sweep(), 10e3, &mut rng).unwrap();
        let opts = FitOptions { seed: rep, ..Default::default() };
        let fit = fit_exchange_model(&data, &opts).unwrap();
        if fit.intervals[0].contains(truth.alpha) {
            covered += 1;
        }
    }
    assert!(covered as f64 >= 0.9 * reps as f64, "coverage {covered}/{reps}");
}

fn t2_data(m: &DeviceModel) -> Vec<(f64, DephasingTimes)> {
    sweep().into_iter().map(|v| (v, dephasing_times(m, v).unwrap())).collect()
}

#[test]
fn exact_round_trip_of_noise_fit() {
    let truth = DeviceModel::reference();
    let opts = FitOptions { bootstrap_resamples: 10, ..Default::default() };
    let fit = fit_noise_model(&truth, &t2_data(&truth), None, &opts).unwrap();
    assert!((fit.delta_vb / 0.4e-3 - 1.0).abs() < 1e-6);
    assert!((fit.delta_fq1 / 11e3 - 1.0).abs() < 1e-6);
    assert!((fit.delta_fq2 / 24e3 - 1.0).abs() < 1e-6);
}

#[test]
fn noise_fit_converges_from_perturbed_starts() {
    let truth = DeviceModel::reference();
    let data = t2_data(&truth);
    let opts = FitOptions { bootstrap_resamples: 5, ..Default::default() };
    for factor in [0.5, 2.0] {
        let start = [0.4e-3 * factor, 11e3 * factor, 24e3 * factor];
        let fit = fit_noise_model(&truth, &data, Some(start), &opts).unwrap();
        assert!((fit.delta_vb / 0.4e-3 - 1.0).abs() < 1e-6, "{factor}");
        assert!((fit.delta_fq1 / 11e3 - 1.0).abs() < 1e-6, "{factor}");
        assert!((fit.delta_fq2 / 24e3 - 1.0).abs() < 1e-6, "{factor}");
    }
}

proptest! {
    #[test]
    fn exchange_is_log_linear(v in -0.2f64..0.4, dv in 1e-3f64..0.1) {
        let m = DeviceModel::reference();
        let slope = (exchange(&m, v + dv).ln() - exchange(&m, v).ln()) / dv;
        prop_assert!((slope - 2.0 * m.alpha).abs() < 1e-8);
    }

    #[test]
    fn splitting_identity_holds(v in -0.1f64..0.3, alpha in 5.0f64..20.0) {
        let mut m = DeviceModel::reference();
        m.alpha = alpha;
        let c = conditional_frequencies(&m, v).unwrap();
        let j = exchange(&m, v);
        let d1 = c.f_q1_given_q2_1 - c.f_q1_given_q2_0;
        let d2 = c.f_q2_given_q1_1 - c.f_q2_given_q1_0;
        prop_assert!((d1 - d2).abs() / j < 1e-6);
    }
}
