use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use redqkd_core::channel::*;
use redqkd_core::inputs::ProtocolInputs;

fn inputs() -> ProtocolInputs {
    ProtocolInputs {
        lambda: 0.3,
        mu: 0.4,
        nu: 0.1,
        omega: 1e-3,
        q_z: 0.8,
        p_mu: 0.3,
        p_nu: 0.3,
        p_omega: 0.4,
        m: 1000,
        n: 100_000,
        e_tol: 0.02,
        f_ec: 1.16,
    }
}

/// Composite Simpson rule for the phase average, with many panels.
fn i0_by_simpson(x: f64) -> f64 {
    let n = 20_000;
    let h = std::f64::consts::TAU / n as f64;
    let f = |g: f64| (x * g.cos()).exp();
    let mut s = f(0.0) + f(std::f64::consts::TAU);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0 / std::f64::consts::TAU
}

#[test]
fn i0_sym_matches_direct_quadrature() {
    assert_eq!(i0_sym(0.0), 1.0);
    for x in [0.1, 1.0, 3.7, 9.99, 10.0, 15.0, 40.0, 120.0] {
        let got = i0_sym(x);
        let want = i0_by_simpson(x);
        assert!((got - want).abs() <= 1e-10 * want, "x={x}: {got} vs {want}");
        assert_eq!(got, i0_sym(-x));
    }
}

#[test]
fn vacuum_inputs_give_dark_count_coincidences_only() {
    let mut params = ChannelParams::reference_defaults(10.0);
    params.p_d = 0.0;
    let model = MdiModel::new(&params);
    for (ba, bb) in [(Basis::Z, Basis::Z), (Basis::X, Basis::X), (Basis::Z, Basis::X)] {
        assert_eq!(model.success_probs(0.0, 0.0, ba, bb, 0, 1), [0.0; 4]);
    }
    params.p_d = 0.013;
    let model = MdiModel::new(&params);
    let want = (1.0 - params.p_d).powi(2) * params.p_d.powi(2);
    for p in model.success_probs(0.0, 0.0, Basis::X, Basis::X, 1, 0) {
        assert!((p - want).abs() < 1e-15, "{p} vs {want}");
    }
}

#[test]
fn mirrored_arms_give_the_same_total_success() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let mut params = ChannelParams::reference_defaults(rng.random_range(0.0..40.0));
        params.delta_a = rng.random_range(0.0..0.3);
        params.delta_b = rng.random_range(0.0..0.3);
        params.p_d = rng.random_range(0.0..1e-3);
        let (alpha, beta) = (rng.random_range(0.0..1.2), rng.random_range(0.0..1.2));
        let basis = if rng.random_bool(0.5) { Basis::Z } else { Basis::X };
        let (i, j) = (rng.random_range(0..2), rng.random_range(0..2));
        let mut mirrored = params.clone();
        std::mem::swap(&mut mirrored.delta_a, &mut mirrored.delta_b);
        let a: f64 = MdiModel::new(&params).success_probs(alpha, beta, basis, basis, i, j).iter().sum();
        let b: f64 = MdiModel::new(&mirrored).success_probs(beta, alpha, basis, basis, j, i).iter().sum();
        assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{a} vs {b}");
    }
}

#[test]
fn photon_number_decomposition_reproduces_coherent_model() {
    let params = ChannelParams::reference_defaults(7.0);
    let model = MdiModel::new(&params);
    for (a, b) in [(0.3f64, 0.3f64), (0.4, 0.1), (0.9, 0.02)] {
        let cutoff = poisson_cutoff(a.max(b), 1e-15);
        for (ba, bb) in [(Basis::Z, Basis::Z), (Basis::X, Basis::X), (Basis::X, Basis::Z)] {
            for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                let direct = model.success_probs(f64::sqrt(a), f64::sqrt(b), ba, bb, i, j);
                let mut mixed = [0.0; 4];
                for n in 0..=cutoff {
                    for m in 0..=cutoff {
                        let w = poisson(a, n) * poisson(b, m);
                        let fock = mdi_fock_outcomes(&model, ba, bb, i, j, n, m);
                        for e in 0..4 {
                            mixed[e] += w * fock[e];
                        }
                    }
                }
                for e in 0..4 {
                    assert!((direct[e] - mixed[e]).abs() < 1e-12, "{direct:?} vs {mixed:?}");
                }
            }
        }
    }
}

/// Phase-randomized coherent pulses: draw the relative phase, then
/// independent Poisson photon numbers per detector and threshold clicks.
fn mdi_photon_mc(model: &MdiModel, a: f64, b: f64, basis: Basis, samples: u64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut succ, mut err) = (0u64, 0u64);
    for _ in 0..samples {
        let (i, j) = (rng.random_range(0..2), rng.random_range(0..2));
        let (x, y) = model.couplings(basis, basis, i, j);
        let gamma = rng.random_range(0.0..std::f64::consts::TAU);
        let mut clicks = [false; 4];
        for w in 0..4 {
            let re = x[w] * a.sqrt() + y[w] * b.sqrt() * gamma.cos();
            let im = y[w] * b.sqrt() * gamma.sin();
            let mean = re * re + im * im;
            let photons = if mean > 0.0 { Poisson::new(mean).unwrap().sample(rng) } else { 0.0 };
            clicks[w] = photons > 0.0 || rng.random_bool(model.p_d);
        }
        let fired: Vec<usize> = (0..4).filter(|&w| clicks[w]).collect();
        if fired.len() != 2 {
            continue;
        }
        let Some(event) = SUCCESS_EVENTS.iter().position(|&(u, v)| u == fired[0] && v == fired[1] || u == fired[1] && v == fired[0]) else {
            continue;
        };
        succ += 1;
        let flip = basis == Basis::Z || event >= 2;
        if (j ^ flip as usize) != i {
            err += 1;
        }
    }
    (succ as f64 / samples as f64, err as f64 / samples as f64)
}

fn within_3_sigma(mc: f64, p: f64, samples: u64) -> bool {
    let sigma = (p * (1.0 - p) / samples as f64).sqrt();
    (mc - p).abs() <= 3.0 * sigma.max(1.0 / samples as f64)
}

#[test]
fn mdi_gains_match_photon_statistics_simulation() {
    let samples = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let points = [
        (0.0, 0.4, 0.4, Basis::X, 7.2e-8),
        (3.0, 0.3, 0.3, Basis::Z, 7.2e-8),
        (6.0, 0.4, 0.1, Basis::X, 1e-3),
        (10.0, 0.8, 0.8, Basis::Z, 1e-2),
        (2.0, 0.1, 0.4, Basis::X, 5e-3),
    ];
    for (loss, a, b, basis, pd) in points {
        let mut params = ChannelParams::reference_defaults(loss);
        params.p_d = pd;
        let model = MdiModel::new(&params);
        let (q, qe) = model.gain_and_error(a, b, basis);
        let (mq, mqe) = mdi_photon_mc(&model, a, b, basis, samples, &mut rng);
        assert!(within_3_sigma(mq, q, samples), "gain at {loss} dB: mc {mq} vs {q}");
        assert!(within_3_sigma(mqe, qe, samples), "error at {loss} dB: mc {mqe} vs {qe}");
    }
}

#[test]
fn aligned_noiseless_key_basis_has_no_errors() {
    let mut params = ChannelParams::reference_defaults(4.0);
    params.delta_a = 0.0;
    params.delta_b = 0.0;
    params.p_d = 0.0;
    let g = mdi_gain_and_error(&params, &inputs());
    assert!(g.e_zz < 1e-12);
    // X-basis errors come only from which Bell state heralds: multi-photon
    // pairs herald the wrong one. Photon simulation agrees.
    let model = MdiModel::new(&params);
    let samples = 1_000_000;
    let (q, qe) = model.gain_and_error(0.4, 0.4, Basis::X);
    let (mq, mqe) = mdi_photon_mc(&model, 0.4, 0.4, Basis::X, samples, &mut ChaCha8Rng::seed_from_u64(5));
    assert!(qe > 0.0);
    assert!(within_3_sigma(mq, q, samples) && within_3_sigma(mqe, qe, samples));
}

#[test]
fn key_basis_gain_decreases_with_loss() {
    let mut prev = f64::INFINITY;
    for step in 0..=60 {
        let g = mdi_gain_and_error(&ChannelParams::reference_defaults(step as f64), &inputs()).g_zz;
        assert!(g < prev, "{step} dB");
        prev = g;
    }
    let mut params = ChannelParams::reference_defaults(600.0);
    params.p_d = 0.0;
    let g = mdi_gain_and_error(&params, &inputs());
    assert!(g.g_zz < 1e-50 && g.g_xx.iter().flatten().all(|&x| x < 1e-50));
}

#[test]
fn expected_observables_follow_gains() {
    let params = ChannelParams::reference_defaults(12.0);
    let inp = inputs();
    let g = mdi_gain_and_error(&params, &inp);
    let (obs, sizes) = mdi_expected_observables(&params, &inp, 1_000_000);
    assert!((obs.z_size - g.g_zz * 1e6).abs() < 1e-6);
    for a in 0..3 {
        for b in 0..3 {
            assert!(obs.x_errors[a][b] <= obs.x_sizes[a][b]);
            assert!((obs.x_errors[a][b] - g.e_xx[a][b] * g.g_xx[a][b] * 1e6).abs() < 1e-6);
        }
    }
    let sum_xx: f64 = g.g_xx.iter().flatten().sum();
    assert!((sizes.bits_x - (sum_xx + g.g_xz.iter().sum::<f64>()) * 1e6).abs() < 1e-6);
    assert!((sizes.bits_z - (g.g_zz + g.g_zx.iter().sum::<f64>()) * 1e6).abs() < 1e-6);
    let (zero, zero_sizes) = mdi_expected_observables(&params, &inp, 0);
    assert_eq!(zero, MdiObservables::default());
    assert_eq!(zero_sizes, MdiMessageSizes::default());
}

/// Standard deviation of the mean of `seeds` draws of a binomial count
/// with `trials` trials and mean `expect`. Error counts drawn conditionally
/// on a binomial set size are themselves binomial over all rounds.
fn binomial_sd_of_mean(expect: f64, trials: f64, seeds: usize) -> f64 {
    (expect * (1.0 - expect / trials) / seeds as f64).sqrt()
}

#[test]
fn sampled_mdi_observables_average_to_expectations() {
    let params = ChannelParams::reference_defaults(8.0);
    let inp = inputs();
    let n = 200_000;
    let (want, _) = mdi_expected_observables(&params, &inp, n);
    let seeds = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let samples: Vec<MdiObservables> = (0..seeds).map(|_| mdi_sample_observables(&params, &inp, n, &mut rng)).collect();
    let check = |get: &dyn Fn(&MdiObservables) -> f64, expect: f64| {
        let mean = samples.iter().map(get).sum::<f64>() / seeds as f64;
        assert!((mean - expect).abs() <= 3.0 * binomial_sd_of_mean(expect, n as f64, seeds), "{mean} vs {expect}");
    };
    check(&|o| o.z_size, want.z_size);
    for a in 0..3 {
        for b in 0..3 {
            check(&|o| o.x_sizes[a][b], want.x_sizes[a][b]);
            check(&|o| o.x_errors[a][b], want.x_errors[a][b]);
        }
    }
}

#[test]
fn bb84_limits() {
    let mut params = ChannelParams::reference_defaults(5.0);
    params.p_d = 0.0;
    let model = Bb84Model::new(&params);
    assert_eq!(model.gain(0.0), 0.0);
    params.delta_a = 0.0;
    let model = Bb84Model::new(&params);
    for a in [0.01, 0.5, 3.0] {
        assert!(model.error_rate(a).abs() < 1e-15);
    }
    let bright = Bb84Model::new(&params.with_loss(0.0));
    assert!((bright.gain(200.0) - 1.0).abs() < 1e-12 && bright.error_rate(200.0) < 1e-12);
}

/// Photon-by-photon simulation of the BB84 receiver with random assignment
/// of double clicks.
fn bb84_photon_mc(model: &Bb84Model, a: f64, samples: u64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let c = model.delta.cos();
    let (mut det, mut err) = (0u64, 0u64);
    let source = Poisson::new(a).unwrap();
    for _ in 0..samples {
        let n = source.sample(rng) as u64;
        let (mut right, mut wrong) = (rng.random_bool(model.p_d), rng.random_bool(model.p_d));
        for _ in 0..n {
            if rng.random_bool(model.eta) {
                if rng.random_bool(c * c) {
                    right = true;
                } else {
                    wrong = true;
                }
            }
        }
        match (right, wrong) {
            (false, false) => {}
            (true, false) => det += 1,
            (false, true) => {
                det += 1;
                err += 1;
            }
            (true, true) => {
                det += 1;
                if rng.random_bool(0.5) {
                    err += 1;
                }
            }
        }
    }
    (det as f64 / samples as f64, err as f64 / samples as f64)
}

#[test]
fn bb84_model_matches_photon_simulation() {
    let samples = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (loss, a, pd, delta) in [(0.0, 0.5, 7.2e-8, 0.08), (3.0, 0.1, 1e-3, 0.08), (1.0, 2.0, 1e-2, 0.3), (10.0, 0.6, 5e-3, 0.5), (0.5, 1.0, 0.05, 0.2)] {
        let mut params = ChannelParams::reference_defaults(loss);
        params.p_d = pd;
        params.delta_a = delta;
        let model = Bb84Model::new(&params);
        let (q, e) = (model.gain(a), model.error_rate(a));
        let (mq, mqe) = bb84_photon_mc(&model, a, samples, &mut rng);
        assert!(within_3_sigma(mq, q, samples), "gain {mq} vs {q}");
        assert!(within_3_sigma(mqe, q * e, samples), "error {mqe} vs {}", q * e);
    }
}

#[test]
fn bb84_photon_number_decomposition() {
    let params = ChannelParams::reference_defaults(2.0);
    let model = Bb84Model::new(&params);
    for a in [0.01, 0.3, 0.8] {
        let (mut q, mut qe) = (0.0, 0.0);
        for n in 0..=poisson_cutoff(a, 1e-16) {
            let f = bb84_fock_clicks(&model, n);
            q += poisson(a, n) * f.detection();
            qe += poisson(a, n) * f.error();
        }
        assert!((q - model.gain(a)).abs() < 1e-13);
        assert!((qe - model.gain(a) * model.error_rate(a)).abs() < 1e-13);
    }
}

#[test]
fn bb84_expected_observables_follow_gains() {
    let params = ChannelParams::reference_defaults(9.0);
    let mut inp = inputs();
    let g = bb84_gain_and_error(&params, &inp);
    let obs = bb84_expected_observables(&params, &inp, 1_000_000, 5000);
    assert!((obs.z_prime.iter().sum::<f64>() - 5000.0).abs() < 1e-9);
    for a in 0..3 {
        assert!((obs.x_errors[a] - g.e[a] * g.g_xx[a] * 1e6).abs() < 1e-6);
        assert!((obs.x_sizes[a] - g.g_xx[a] * 1e6).abs() < 1e-6);
    }
    let e_z = (0..3).map(|a| g.e[a] * g.g_zz[a]).sum::<f64>() / g.g_zz.iter().sum::<f64>();
    assert!((g.e_z - e_z).abs() < 1e-15);
    // Equal intensities and weights give equal gains.
    inp.mu = 0.2;
    inp.nu = 0.2;
    inp.omega = 0.2;
    inp.p_mu = 1.0 / 3.0;
    inp.p_nu = 1.0 / 3.0;
    inp.p_omega = 1.0 / 3.0;
    let obs = bb84_expected_observables(&params, &inp, 1_000_000, 3000);
    for a in 0..3 {
        assert!((obs.z_prime[a] - 1000.0).abs() < 1e-9);
    }
}

#[test]
fn sampled_bb84_observables_average_to_expectations() {
    let params = ChannelParams::reference_defaults(6.0);
    let inp = inputs();
    let (n, m) = (100_000, 2000);
    let want = bb84_expected_observables(&params, &inp, n, m);
    let seeds = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples: Vec<Bb84Observables> = (0..seeds).map(|_| bb84_sample_observables(&params, &inp, n, m, &mut rng)).collect();
    for a in 0..3 {
        for (k, (get, expect)) in [
            (Box::new(move |o: &Bb84Observables| o.z_prime[a]) as Box<dyn Fn(&Bb84Observables) -> f64>, want.z_prime[a]),
            (Box::new(move |o: &Bb84Observables| o.x_sizes[a]), want.x_sizes[a]),
            (Box::new(move |o: &Bb84Observables| o.x_errors[a]), want.x_errors[a]),
        ]
        .into_iter()
        .enumerate()
        {
            let mean = samples.iter().map(&get).sum::<f64>() / seeds as f64;
            let trials = if k == 0 { m as f64 } else { n as f64 };
            assert!((mean - expect).abs() <= 3.0 * binomial_sd_of_mean(expect, trials, seeds), "{mean} vs {expect}");
        }
    }
    for o in &samples {
        assert_eq!(o.z_prime.iter().sum::<f64>(), m as f64);
    }
}

#[test]
fn tagged_runs_are_consistent_with_the_models() {
    let params = ChannelParams::reference_defaults(4.0);
    let inp = inputs();
    let n = 400_000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let model = MdiModel::new(&params);
    // Expected single-photon X successes from the (1,1) yield.
    let mut y11 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            y11 += mdi_fock_outcomes(&model, Basis::X, Basis::X, i, j, 1, 1).iter().sum::<f64>() / 4.0;
        }
    }
    let p1 = |a: f64| a * (-a).exp();
    let tau11: f64 = (0..3)
        .flat_map(|a| (0..3).map(move |b| (a, b)))
        .map(|(a, b)| inp.q_x().powi(2) * inp.decoy_probs()[a] * inp.decoy_probs()[b] * p1(inp.decoys()[a]) * p1(inp.decoys()[b]))
        .sum();
    let runs = 300;
    let mut s11x = 0.0;
    for _ in 0..runs {
        let (obs, truth) = mdi_tagged_run(&params, &inp, n, 1000, &mut rng).expect("enough key-basis detections");
        assert!(truth.s11x as f64 <= obs.x_sizes.iter().flatten().sum::<f64>());
        assert!(truth.n11z <= 1000 && truth.e11z <= truth.n11z && truth.s11z <= obs.z_size as u64);
        s11x += truth.s11x as f64;
    }
    let mean = s11x / runs as f64;
    let expect = n as f64 * tau11 * y11;
    assert!((mean - expect).abs() < 4.0 * (expect / runs as f64).sqrt(), "{mean} vs {expect}");

    let (obs, truth) = bb84_tagged_run(&params, &inp, n, 3000, &mut rng).unwrap();
    assert_eq!(obs.z_prime.iter().sum::<f64>(), 3000.0);
    assert!(truth.n1z <= 3000 && truth.e1x <= truth.s1x);
}

#[test]
fn round_sampler_reproduces_gains_and_error_rates() {
    let params = ChannelParams::reference_defaults(2.0);
    let inp = inputs();
    let n = 400_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = mdi_gain_and_error(&params, &inp);
    let rounds = sample_mdi_rounds(&params, &inp, n, &mut rng);
    let z: Vec<&MdiRound> = rounds.iter().filter(|r| r.alice == Setting::Z(0) && r.bob == Setting::Z(0)).collect();
    let want = g.g_zz * n as f64;
    assert!((z.len() as f64 - want).abs() < 4.0 * want.sqrt());
    let errors = z.iter().filter(|r| r.alice_bit != r.bob_bit).count() as f64;
    let want_err = g.e_zz * z.len() as f64;
    assert!((errors - want_err).abs() < 4.0 * want_err.sqrt() + 1.0, "{errors} vs {want_err}");

    let b = bb84_gain_and_error(&params, &inp);
    let rounds = sample_bb84_rounds(&params, &inp, n, &mut rng);
    let z = rounds.iter().filter(|r| r.alice.basis() == Basis::Z && r.bob_basis == Basis::Z).count() as f64;
    let want: f64 = b.g_zz.iter().sum::<f64>() * n as f64;
    assert!((z - want).abs() < 4.0 * want.sqrt());
}

proptest! {
    #[test]
    fn probabilities_stay_in_unit_interval(
        loss in 0.0f64..80.0, pd in 0.0f64..0.1, da in 0.0f64..0.8, db in 0.0f64..0.8,
        a in 0.0f64..3.0, b in 0.0f64..3.0, i in 0usize..2, j in 0usize..2, x in proptest::bool::ANY,
    ) {
        let mut params = ChannelParams::reference_defaults(loss);
        params.p_d = pd;
        params.delta_a = da;
        params.delta_b = db;
        let basis = if x { Basis::X } else { Basis::Z };
        let probs = MdiModel::new(&params).success_probs(a.sqrt(), b.sqrt(), basis, basis, i, j);
        prop_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(probs.iter().sum::<f64>() <= 1.0 + 1e-12);
        let bb = Bb84Model::new(&params);
        prop_assert!((0.0..=1.0).contains(&bb.gain(a)) && (0.0..=1.0).contains(&bb.error_rate(a)));
    }

    #[test]
    fn i0_sym_is_even_and_at_least_one(x in -200.0f64..200.0) {
        prop_assert_eq!(i0_sym(x), i0_sym(-x));
        prop_assert!(i0_sym(x) >= 1.0);
    }
}
