use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use redqkd_core::channel::*;
use redqkd_core::decoy::*;
use redqkd_core::inputs::ProtocolInputs;
use redqkd_core::stats::rounds_for_blocksize;

fn mdi_inputs(params: &ChannelParams, m: u64) -> ProtocolInputs {
    let mut inputs = ProtocolInputs {
        lambda: 0.3,
        mu: 0.35,
        nu: 0.08,
        omega: 1e-3,
        q_z: 0.6,
        p_mu: 0.3,
        p_nu: 0.4,
        p_omega: 0.3,
        m,
        n: 0,
        e_tol: 0.0,
        f_ec: 1.16,
    };
    let g = mdi_gain_and_error(params, &inputs).g_zz;
    inputs.n = rounds_for_blocksize(m as f64, g, 1e-6).unwrap() as u64;
    inputs
}

fn bb84_inputs(params: &ChannelParams, m: u64) -> ProtocolInputs {
    let mut inputs = ProtocolInputs {
        lambda: 0.0,
        mu: 0.5,
        nu: 0.12,
        omega: 1e-3,
        q_z: 0.7,
        p_mu: 0.6,
        p_nu: 0.25,
        p_omega: 0.15,
        m,
        n: 0,
        e_tol: 0.0,
        f_ec: 1.16,
    };
    let g: f64 = bb84_gain_and_error(params, &inputs).g_zz.iter().sum();
    inputs.n = rounds_for_blocksize(m as f64, g, 1e-6).unwrap() as u64;
    inputs
}

/// Expected number of single-photon X-basis successes from the (1,1) yield.
fn expected_s11x(params: &ChannelParams, inputs: &ProtocolInputs) -> (f64, f64) {
    let model = MdiModel::new(params);
    let (mut y11, mut e11) = (0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            let probs = mdi_fock_outcomes(&model, Basis::X, Basis::X, i, j, 1, 1);
            y11 += probs.iter().sum::<f64>() / 4.0;
            // psi+ (events 0, 1) is an error when i != j, psi- when i == j.
            e11 += if i == j { probs[2] + probs[3] } else { probs[0] + probs[1] } / 4.0;
        }
    }
    let n = inputs.n as f64;
    (n * tau(inputs, 1, 1) * y11, n * tau(inputs, 1, 1) * e11)
}

#[test]
fn empty_data_gives_zero_bounds() {
    let params = ChannelParams::reference_defaults(0.0);
    let inputs = mdi_inputs(&params, 10_000);
    let obs = MdiObservables::default();
    let budgets = MdiBudgets::common(1e-10);
    assert_eq!(mdi_s11x_lower(&obs, &inputs, &budgets.eps_ab).unwrap(), 0.0);
    let pe = mdi_pe(&obs, &inputs, &budgets).unwrap();
    assert_eq!(pe.n11z_l, 0.0);
    assert_eq!(pe.phi11z_u, None);
    assert_eq!(pe.entropy_bound(), None);

    let pe = bb84_pe(&Bb84Observables::default(), &bb84_inputs(&params, 10_000), &Bb84Budgets::common(1e-10)).unwrap();
    assert_eq!((pe.n1z_l, pe.s1x_l, pe.e1x_u), (0.0, 0.0, 0.0));
    assert_eq!(pe.entropy_bound(), None);
}

#[test]
fn no_errors_and_no_deviation_give_zero_error_bound() {
    let params = ChannelParams::reference_defaults(5.0);
    let inputs = mdi_inputs(&params, 10_000);
    let (mut obs, _) = mdi_expected_observables(&params, &inputs, inputs.n);
    obs.x_errors = [[0.0; 3]; 3];
    assert_eq!(mdi_e11x_upper(&obs, &inputs, &[[1.0; 3]; 3]).unwrap(), 0.0);

    let inputs = bb84_inputs(&params, 10_000);
    let mut obs = bb84_expected_observables(&params, &inputs, inputs.n, inputs.m);
    obs.x_errors = [obs.x_errors[0], 0.0, 0.0];
    let pe = bb84_pe(&obs, &inputs, &Bb84Budgets::common(1.0)).unwrap();
    assert_eq!(pe.e1x_u, 0.0);
}

#[test]
fn zero_deviation_transfer_is_proportional_scaling() {
    let params = ChannelParams::reference_defaults(3.0);
    let inputs = mdi_inputs(&params, 50_000);
    let (obs, _) = mdi_expected_observables(&params, &inputs, inputs.n);
    let budgets = MdiBudgets::common(1.0);
    let pe = mdi_pe(&obs, &inputs, &budgets).unwrap();
    let n = inputs.n as f64;
    let p1 = |a: f64| a * (-a).exp();
    let n11z = (n * inputs.q_z.powi(2) * p1(inputs.lambda).powi(2)).floor();
    let mix = inputs.p_mu * p1(inputs.mu) + inputs.p_nu * p1(inputs.nu) + inputs.p_omega * p1(inputs.omega);
    let n11x = (n * inputs.q_x().powi(2) * mix * mix).ceil();
    let s11z = (n11z * pe.s11x_l / n11x).floor();
    assert_eq!(pe.s11z_l, s11z);
    assert_eq!(pe.n11z_l, (inputs.m as f64 * s11z / obs.z_size).floor());
    assert!(pe.s11x_l > 0.0);
}

#[test]
fn yield_candidates_are_lower_bounds_on_expectations() {
    // With exact expected observables and no statistical deviation, every
    // candidate must stay below the true single-photon count.
    for loss in [0.0, 10.0, 20.0] {
        let params = ChannelParams::reference_defaults(loss);
        let inputs = mdi_inputs(&params, 100_000);
        let (obs, _) = mdi_expected_observables(&params, &inputs, inputs.n);
        let (s11x, e11x) = expected_s11x(&params, &inputs);
        for c in mdi_candidates(&obs, &inputs, &[[1.0; 3]; 3]).unwrap() {
            if let Some(v) = c.value {
                assert!(v <= s11x * (1.0 + 1e-9), "{loss} dB {:?}/{:?}: {v} > {s11x}", c.v, c.v_prime);
            }
        }
        let e11x_u = mdi_e11x_upper(&obs, &inputs, &[[1.0; 3]; 3]).unwrap();
        assert!(e11x_u >= e11x * (1.0 - 1e-9), "{loss} dB: {e11x_u} < {e11x}");
    }
}

#[test]
fn yield_bound_tightness_regression() {
    // Slack of the analytic bound with realistic budgets: at least half of
    // the true single-photon count is certified at 0 and 10 dB (about 0.92
    // to 0.94 at the time of writing).
    for loss in [0.0, 10.0] {
        let params = ChannelParams::reference_defaults(loss);
        let mut inputs = mdi_inputs(&params, 1_000_000);
        // Intensities from a coarse grid search over the test-basis settings.
        (inputs.mu, inputs.nu, inputs.q_z, inputs.p_mu, inputs.p_nu, inputs.p_omega) = (0.2, 0.05, 0.1, 0.2, 0.6, 0.2);
        inputs.n = rounds_for_blocksize(1e6, mdi_gain_and_error(&params, &inputs).g_zz, 1e-6).unwrap() as u64;
        let (obs, _) = mdi_expected_observables(&params, &inputs, inputs.n);
        let (s11x, _) = expected_s11x(&params, &inputs);
        let bound = mdi_s11x_lower(&obs, &inputs, &MdiBudgets::common(1e-8 / 48.0).eps_ab).unwrap();
        assert!(bound <= s11x && bound >= 0.5 * s11x, "{loss} dB: {bound} vs {s11x}");
    }
}

#[test]
fn error_bound_grows_with_observed_errors() {
    let params = ChannelParams::reference_defaults(6.0);
    let inputs = mdi_inputs(&params, 100_000);
    let (mut obs, _) = mdi_expected_observables(&params, &inputs, inputs.n);
    let eps = MdiBudgets::common(1e-9).eps_ab_err;
    let mut prev = mdi_e11x_upper(&obs, &inputs, &eps).unwrap();
    for _ in 0..20 {
        obs.x_errors[0][0] *= 1.05;
        let next = mdi_e11x_upper(&obs, &inputs, &eps).unwrap();
        assert!(next >= prev);
        prev = next;
    }
}

#[test]
fn budget_bookkeeping_matches_term_counts() {
    let g = 1e-10;
    let b = MdiBudgets::common(g);
    assert!((b.smooth() - MdiBudgets::TERMS as f64 * g).abs() < 1e-24);
    assert_eq!(2 * MdiBudgets::TERMS + 2, 48);
    let b = Bb84Budgets::common(g);
    assert!((b.smooth() - 9.0 * g).abs() < 1e-24);
    assert_eq!(2 * Bb84Budgets::TERMS + 2, 20);
}

#[test]
fn intensity_order_is_enforced() {
    let params = ChannelParams::reference_defaults(0.0);
    let mut inputs = bb84_inputs(&params, 1000);
    inputs.mu = 0.1;
    inputs.nu = 0.12;
    assert!(matches!(
        bb84_pe(&Bb84Observables::default(), &inputs, &Bb84Budgets::common(1e-9)),
        Err(DecoyError::IntensityOrder(_))
    ));
    assert!(mdi_pe(&MdiObservables::default(), &inputs, &MdiBudgets::common(1e-9)).is_err());
}

struct Violations {
    s11x: usize,
    e11x: usize,
    n11z: usize,
    phi: usize,
}

fn mdi_validity(loss: f64, gamma: f64, runs: u64) -> Violations {
    let params = ChannelParams::reference_defaults(loss);
    let inputs = mdi_inputs(&params, 20_000);
    let budgets = MdiBudgets::common(gamma);
    let mut v = Violations { s11x: 0, e11x: 0, n11z: 0, phi: 0 };
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (obs, truth) = mdi_tagged_run(&params, &inputs, inputs.n, inputs.m, &mut rng).expect("block filled");
        let pe = mdi_pe(&obs, &inputs, &budgets).unwrap();
        v.s11x += (pe.s11x_l > truth.s11x as f64) as usize;
        v.e11x += (pe.e11x_u < truth.e11x as f64) as usize;
        v.n11z += (pe.n11z_l > truth.n11z as f64) as usize;
        if let Some(phi) = pe.phi11z_u {
            v.phi += (truth.n11z > 0 && phi < truth.e11z as f64 / truth.n11z as f64) as usize;
        }
    }
    v
}

#[test]
fn mdi_bounds_hold_in_tagged_simulation() {
    // Realistic budget: no violation expected at all.
    for loss in [0.0, 10.0] {
        let v = mdi_validity(loss, 1e-8 / 48.0, 200);
        assert_eq!((v.s11x, v.e11x, v.n11z, v.phi), (0, 0, 0, 0), "{loss} dB");
    }
    // Loose budget: violations allowed up to twice the nominal rate.
    let gamma = 1e-3;
    let runs = 1000;
    let cap = |terms: f64| (2.0 * terms * gamma * runs as f64).floor() as usize;
    for loss in [0.0, 10.0] {
        let v = mdi_validity(loss, gamma, runs);
        assert!(v.s11x <= cap(9.0), "{loss} dB S11X: {}", v.s11x);
        assert!(v.e11x <= cap(9.0), "{loss} dB E11X: {}", v.e11x);
        assert!(v.n11z <= cap(13.0), "{loss} dB n11Z: {}", v.n11z);
        assert!(v.phi <= cap(23.0), "{loss} dB phi: {}", v.phi);
    }
}

fn bb84_validity(loss: f64, gamma: f64, runs: u64) -> [usize; 4] {
    let params = ChannelParams::reference_defaults(loss);
    let inputs = bb84_inputs(&params, 20_000);
    let budgets = Bb84Budgets::common(gamma);
    let mut v = [0; 4];
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000_000 + seed);
        let (obs, truth) = bb84_tagged_run(&params, &inputs, inputs.n, inputs.m, &mut rng).expect("block filled");
        let pe = bb84_pe(&obs, &inputs, &budgets).unwrap();
        v[0] += (pe.n1z_l > truth.n1z as f64) as usize;
        v[1] += (pe.s1x_l > truth.s1x as f64) as usize;
        v[2] += (pe.e1x_u < truth.e1x as f64) as usize;
        if let Some(phi) = pe.phi1z_u {
            v[3] += (truth.n1z > 0 && phi < truth.e1z as f64 / truth.n1z as f64) as usize;
        }
    }
    v
}

#[test]
fn bb84_bounds_hold_in_tagged_simulation() {
    for loss in [0.0, 10.0] {
        assert_eq!(bb84_validity(loss, 1e-8 / 20.0, 200), [0; 4], "{loss} dB");
    }
    let gamma = 1e-3;
    let runs = 1000;
    let cap = |terms: f64| (2.0 * terms * gamma * runs as f64).floor() as usize;
    for loss in [0.0, 10.0] {
        let v = bb84_validity(loss, gamma, runs);
        assert!(v[0] <= cap(3.0) && v[1] <= cap(3.0) && v[2] <= cap(2.0) && v[3] <= cap(9.0), "{loss} dB: {v:?}");
    }
}
