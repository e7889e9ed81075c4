//! Polynomials over GF(2) of degree at most 127, bit `d` holding the
//! coefficient of `x^d`.

pub fn degree(p: u128) -> Option<u32> {
    (p != 0).then(|| 127 - p.leading_zeros())
}

/// `a * b mod p` for `a`, `b` already reduced and `deg p = k`.
pub fn mulmod(a: u128, b: u128, p: u128, k: u32) -> u128 {
    let top = 1u128 << k;
    let mut r = 0u128;
    for bit in (0..k).rev() {
        r <<= 1;
        if r & top != 0 {
            r ^= p;
        }
        if (b >> bit) & 1 == 1 {
            r ^= a;
        }
    }
    r
}

/// Interleaves zeros between the bits of `x`: the square of `x` over GF(2).
fn spread(x: u64) -> u128 {
    let mut x = x as u128;
    x = (x | (x << 32)) & 0x0000_0000_FFFF_FFFF_0000_0000_FFFF_FFFF;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF_0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF_00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F_0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333_3333_3333_3333_3333;
    (x | (x << 1)) & 0x5555_5555_5555_5555_5555_5555_5555_5555
}

/// `a^2 mod p` for `a` reduced and `deg p = k`.
pub fn sqrmod(a: u128, p: u128, k: u32) -> u128 {
    if k > 64 {
        return mulmod(a, a, p, k);
    }
    let mut r = spread(a as u64);
    while let Some(d) = degree(r) {
        if d < k {
            break;
        }
        r ^= p << (d - k);
    }
    r
}

pub fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let db = degree(b).unwrap();
        while let Some(da) = degree(a) {
            if da < db {
                break;
            }
            a ^= b << (da - db);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a
}

/// Ben-Or test: `p` of degree `k` is irreducible iff
/// `gcd(p, x^(2^i) - x) = 1` for every `i <= k/2`.
pub fn is_irreducible(p: u128) -> bool {
    let Some(k) = degree(p) else { return false };
    if k == 0 {
        return false;
    }
    if p & 1 == 0 {
        return k == 1;
    }
    let x = 2u128;
    let mut power = x;
    for _ in 0..k / 2 {
        power = sqrmod(power, p, k);
        if gcd(p, power ^ x) != 1 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_irreducibles_match_known_counts() {
        // Number of irreducible polynomials of degree n over GF(2): 2, 1, 2, 3, 6, 9, 18.
        let counts: Vec<usize> = (1..=7u32)
            .map(|n| ((1u128 << n)..(1u128 << (n + 1))).filter(|&p| is_irreducible(p)).count())
            .collect();
        assert_eq!(counts, vec![2, 1, 2, 3, 6, 9, 18]);
    }

    #[test]
    fn squaring_matches_multiplication() {
        let p = (1u128 << 61) | 0b100111;
        let mut a = 0x1234_5678_9abc_def1u128 & ((1 << 61) - 1);
        for _ in 0..50 {
            assert_eq!(sqrmod(a, p, 61), mulmod(a, a, p, 61));
            a = mulmod(a, 0x2b, p, 61);
        }
    }

    #[test]
    fn gcd_of_product_recovers_factor() {
        // (x^2 + x + 1)(x^3 + x + 1) = x^5 + x^4 + 1
        assert_eq!(gcd(0b110001, 0b111), 0b111);
        assert_eq!(gcd(0b110001, 0b1011), 0b1011);
    }
}
