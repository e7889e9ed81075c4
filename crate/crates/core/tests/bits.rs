use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redqkd_core::bits::{auth_tag, auth_verify, tag_len, AuthError, BitString, KeyPool, ToeplitzHash};

fn bits(s: &str) -> BitString {
    BitString::from_binary(s).unwrap()
}

/// Textbook matrix-vector product with `T[i][j] = seed[n - 1 + i - j]`.
fn naive_toeplitz(seed: &[bool], m: &[bool], out_len: usize) -> Vec<bool> {
    let n = m.len();
    (0..out_len)
        .map(|i| (0..n).fold(false, |acc, j| acc ^ (seed[n - 1 + i - j] & m[j])))
        .collect()
}

#[test]
fn xor_examples() {
    assert_eq!(bits("1010").xor(&bits("1010")), bits("0000"));
    assert_eq!(bits("1010").xor(&bits("0000")), bits("1010"));
    assert_eq!(bits("11").xor(&bits("1010")), bits("0110"));
}

#[test]
fn hex_round_trip_and_format() {
    let s = bits("1000000011");
    // Bit 0 is the low bit of byte 0.
    assert_eq!(s.to_hex(), "10:0103");
    assert_eq!(BitString::from_hex("10:0103").unwrap(), s);
    assert_eq!(BitString::new().to_hex(), "0:");
    assert!(BitString::from_hex("3:ff").is_err());
    assert!(BitString::from_hex("nonsense").is_err());
}

#[test]
fn append_and_slice_cross_word_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let a = BitString::random(rng.random_range(0..150), &mut rng);
        let b = BitString::random(rng.random_range(0..150), &mut rng);
        let mut joined = a.clone();
        joined.append(&b);
        let expect: Vec<bool> = a.iter().chain(b.iter()).collect();
        assert_eq!(joined, BitString::from_bools(&expect));
        assert_eq!(joined.slice(a.len(), b.len()), b);
    }
}

#[test]
fn toeplitz_matches_naive_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..300 {
        let n = rng.random_range(1..200);
        let k = rng.random_range(1..90);
        let seed = BitString::random(n + k - 1, &mut rng);
        let m = BitString::random(n, &mut rng);
        let h = ToeplitzHash::new(seed.clone(), n, k).unwrap();
        let want = naive_toeplitz(&seed.iter().collect::<Vec<_>>(), &m.iter().collect::<Vec<_>>(), k);
        assert_eq!(h.apply(&m).unwrap(), BitString::from_bools(&want));
    }
}

#[test]
fn toeplitz_rejects_bad_lengths() {
    assert!(ToeplitzHash::new(BitString::zeros(5), 4, 3).is_err());
    let h = ToeplitzHash::new(BitString::zeros(6), 4, 3).unwrap();
    assert!(h.apply(&BitString::zeros(5)).is_err());
    assert_eq!(h.apply(&BitString::zeros(4)).unwrap(), BitString::zeros(3));
}

#[test]
fn toeplitz_is_linear_exhaustively_for_short_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=10usize {
        let k = 7;
        let h = ToeplitzHash::new(BitString::random(n + k - 1, &mut rng), n, k).unwrap();
        let unit: Vec<BitString> = (0..n)
            .map(|j| {
                let mut e = BitString::zeros(n);
                e.set(j, true);
                h.apply(&e).unwrap()
            })
            .collect();
        for v in 0..(1u64 << n) {
            let m = BitString::from_u64(v, n);
            let sum = (0..n).filter(|&j| m.get(j)).fold(BitString::zeros(k), |acc, j| acc.xor(&unit[j]));
            assert_eq!(h.apply(&m).unwrap(), sum);
        }
    }
}

#[test]
fn toeplitz_collision_rate_near_two_to_minus_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, k, trials) = (40, 6, 100_000);
    let a = BitString::random(n, &mut rng);
    let mut b = a.clone();
    b.flip(3);
    b.flip(17);
    let collisions = (0..trials)
        .filter(|_| {
            let h = ToeplitzHash::new(BitString::random(n + k - 1, &mut rng), n, k).unwrap();
            h.apply(&a).unwrap() == h.apply(&b).unwrap()
        })
        .count();
    let rate = collisions as f64 / trials as f64;
    assert!(rate <= 2.0 * 2f64.powi(-(k as i32)), "collision rate {rate}");
}

#[test]
fn sharewise_hash_equals_hash_of_xor() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, k) = (97, 33);
    let h = ToeplitzHash::new(BitString::random(n + k - 1, &mut rng), n, k).unwrap();
    for q in 1..8 {
        let shares: Vec<BitString> = (0..q).map(|_| BitString::random(n, &mut rng)).collect();
        let whole = shares.iter().fold(BitString::zeros(n), |acc, s| acc.xor(s));
        let per_share = shares.iter().fold(BitString::zeros(k), |acc, s| acc.xor(&h.apply(s).unwrap()));
        assert_eq!(h.apply(&whole).unwrap(), per_share);
    }
}

#[test]
fn tag_length_examples() {
    assert_eq!(tag_len(1 << 19, 2f64.powi(-20)), 40);
    // Zero-length messages count as one bit.
    assert_eq!(tag_len(0, 2f64.powi(-20)), tag_len(1, 2f64.powi(-20)));
    // Doubling the message adds one bit.
    assert_eq!(tag_len(1 << 20, 2f64.powi(-20)), 41);
}

#[test]
fn auth_round_trip_consumes_k_net_bits() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pool_bits = BitString::random(4000, &mut rng);
    let (mut alice, mut bob) = (KeyPool::new(pool_bits.clone()), KeyPool::new(pool_bits));
    for len in [0usize, 1, 10, 500, 3000] {
        let m = BitString::random(len, &mut rng);
        let before = alice.remaining();
        let (tag, consumed) = auth_tag(&mut alice, &m, 1e-6).unwrap();
        assert_eq!(consumed, tag_len(len, 1e-6));
        assert_eq!(tag.tag.len(), consumed);
        assert_eq!(before - alice.remaining(), consumed);
        assert!(auth_verify(&mut bob, &m, &tag));
    }
    assert_eq!(alice, bob);
}

#[test]
fn pool_exhaustion_is_a_distinct_error() {
    let k = tag_len(100, 1e-3);
    let mut pool = KeyPool::new(BitString::zeros(3 * k - 1));
    let err = auth_tag(&mut pool, &BitString::zeros(100), 1e-3).unwrap_err();
    assert_eq!(err, AuthError::PoolExhausted { needed: 3 * k, available: 3 * k - 1 });
    let mut exact = KeyPool::new(BitString::zeros(3 * k));
    assert!(auth_tag(&mut exact, &BitString::zeros(100), 1e-3).is_ok());
}

#[test]
fn desynchronized_pool_rejects() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pool_bits = BitString::random(2000, &mut rng);
    let (mut alice, mut bob) = (KeyPool::new(pool_bits.clone()), KeyPool::new(pool_bits));
    let m1 = BitString::random(64, &mut rng);
    let m2 = BitString::random(64, &mut rng);
    let _ = auth_tag(&mut alice, &m1, 1e-4).unwrap();
    let (tag2, _) = auth_tag(&mut alice, &m2, 1e-4).unwrap();
    // Bob never saw the first message.
    assert!(!auth_verify(&mut bob, &m2, &tag2));
}

#[test]
fn single_bit_forgeries_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gamma = 2f64.powi(-10);
    let trials = 100_000;
    let mut accepted = 0usize;
    for _ in 0..trials {
        let pool_bits = BitString::random(200, &mut rng);
        let (mut alice, mut bob) = (KeyPool::new(pool_bits.clone()), KeyPool::new(pool_bits));
        let m = BitString::random(64, &mut rng);
        let (tag, _) = auth_tag(&mut alice, &m, gamma).unwrap();
        let mut forged = m.clone();
        forged.flip(rng.random_range(0..64));
        if auth_verify(&mut bob, &forged, &tag) {
            accepted += 1;
        }
    }
    assert!(accepted as f64 / trials as f64 <= 2.0 * gamma, "accepted {accepted}");
}

#[test]
fn arbitrary_forgeries_rejected_at_rate_below_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gamma = 2f64.powi(-6);
    let trials = 100_000;
    let mut accepted = 0usize;
    for _ in 0..trials {
        let pool_bits = BitString::random(100, &mut rng);
        let (mut alice, mut bob) = (KeyPool::new(pool_bits.clone()), KeyPool::new(pool_bits));
        let m = BitString::random(16, &mut rng);
        let (mut tag, _) = auth_tag(&mut alice, &m, gamma).unwrap();
        let forged = m.xor(&BitString::random(16, &mut rng));
        if forged == m {
            continue;
        }
        // The forger also guesses a tag offset.
        tag.tag = tag.tag.xor(&BitString::random(tag.tag.len(), &mut rng));
        if auth_verify(&mut bob, &forged, &tag) {
            accepted += 1;
        }
    }
    assert!(accepted as f64 / trials as f64 <= 2.0 * gamma, "accepted {accepted}");
}

proptest! {
    #[test]
    fn xor_is_self_inverse_on_the_first_operand(a in proptest::collection::vec(any::<bool>(), 0..300),
                                                b in proptest::collection::vec(any::<bool>(), 0..300)) {
        let (a, b) = (BitString::from_bools(&a), BitString::from_bools(&b));
        let back = a.xor(&b).xor(&b);
        prop_assert_eq!(back.len(), a.len().max(b.len()));
        prop_assert_eq!(back.slice(0, a.len()), a.clone());
        prop_assert_eq!(back.count_ones(), a.count_ones());
    }

    #[test]
    fn hex_round_trips(v in proptest::collection::vec(any::<bool>(), 0..300)) {
        let s = BitString::from_bools(&v);
        prop_assert_eq!(BitString::from_hex(&s.to_hex()).unwrap(), s);
    }

    #[test]
    fn toeplitz_linear_on_random_pairs(seed in any::<u64>(), n in 1usize..300, k in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = ToeplitzHash::new(BitString::random(n + k - 1, &mut rng), n, k).unwrap();
        let a = BitString::random(n, &mut rng);
        let b = BitString::random(n, &mut rng);
        prop_assert_eq!(h.apply(&a.xor(&b)).unwrap(), h.apply(&a).unwrap().xor(&h.apply(&b).unwrap()));
    }
}
