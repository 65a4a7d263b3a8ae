//! Arithmetic in GF(2^n) for n ≤ 64.
//!
//! Each width uses a fixed low-weight irreducible polynomial (the first
//! trinomial, else the first pentanomial, in lexicographic order of the
//! middle exponents). Only the low `n` coefficients are stored.

use crate::error::{Error, Result};

const POLY_LOW: [u64; 64] = [
    0x1, // n = 1
    0x3, // n = 2
    0x3, // n = 3
    0x3, // n = 4
    0x5, // n = 5
    0x3, // n = 6
    0x3, // n = 7
    0x87, // n = 8
    0x3, // n = 9
    0x9, // n = 10
    0x5, // n = 11
    0x9, // n = 12
    0x27, // n = 13
    0x21, // n = 14
    0x3, // n = 15
    0x47, // n = 16
    0x9, // n = 17
    0x9, // n = 18
    0x27, // n = 19
    0x9, // n = 20
    0x5, // n = 21
    0x3, // n = 22
    0x21, // n = 23
    0x87, // n = 24
    0x9, // n = 25
    0x47, // n = 26
    0x27, // n = 27
    0x3, // n = 28
    0x5, // n = 29
    0x3, // n = 30
    0x9, // n = 31
    0x400007, // n = 32
    0x401, // n = 33
    0x81, // n = 34
    0x5, // n = 35
    0x201, // n = 36
    0x207, // n = 37
    0x87, // n = 38
    0x11, // n = 39
    0x8000007, // n = 40
    0x9, // n = 41
    0x81, // n = 42
    0x1007, // n = 43
    0x21, // n = 44
    0x20007, // n = 45
    0x3, // n = 46
    0x21, // n = 47
    0x20007, // n = 48
    0x201, // n = 49
    0x207, // n = 50
    0x10000007, // n = 51
    0x9, // n = 52
    0x47, // n = 53
    0x201, // n = 54
    0x81, // n = 55
    0x200007, // n = 56
    0x11, // n = 57
    0x80001, // n = 58
    0x1000007, // n = 59
    0x3, // n = 60
    0x27, // n = 61
    0x20000001, // n = 62
    0x3, // n = 63
    0x807, // n = 64
];

/// The field GF(2^n), elements stored in the low `n` bits of a `u64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gf2 {
    n: u32,
    poly_low: u64,
    mask: u64,
}

impl Gf2 {
    pub fn new(n: u32) -> Result<Self> {
        if !(1..=64).contains(&n) {
            return Err(Error::UnsupportedWidth(n));
        }
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Ok(Self { n, poly_low: POLY_LOW[n as usize - 1], mask })
    }

    pub fn width(&self) -> u32 {
        self.n
    }

    /// Low coefficients of the modulus; the `x^n` term is implicit.
    pub fn modulus_low(&self) -> u64 {
        self.poly_low
    }

    /// Shift-and-add multiplication with reduction at every step.
    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        let top = self.n - 1;
        let mut r = 0u64;
        let mut i = self.n;
        while i > 0 {
            i -= 1;
            let carry = (r >> top) & 1;
            r = ((r << 1) & self.mask) ^ (self.poly_low & carry.wrapping_neg());
            r ^= a & ((b >> i) & 1).wrapping_neg();
        }
        r
    }

    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut base = a;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
}

/// Product in GF(2^n) under the tabulated modulus.
pub fn gf2_mul(n: u32, a: u64, b: u64) -> Result<u64> {
    let f = Gf2::new(n)?;
    if (a | b) & !f.mask != 0 {
        return Err(Error::Range(format!("operands exceed {n} bits")));
    }
    Ok(f.mul(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ben-Or irreducibility test on polynomials over GF(2) as u128 bit vectors.
    fn irreducible(n: u32, low: u64) -> bool {
        let f: u128 = (1u128 << n) | low as u128;
        let modf = |mut a: u128| {
            while a != 0 && 127 - a.leading_zeros() >= n {
                a ^= f << (127 - a.leading_zeros() - n);
            }
            a
        };
        let mulmod = |a: u128, b: u128| {
            let (mut r, mut a, mut b) = (0u128, a, b);
            while b != 0 {
                if b & 1 == 1 {
                    r ^= a;
                }
                b >>= 1;
                a = modf(a << 1);
            }
            r
        };
        let gcd = |mut a: u128, mut b: u128| {
            while b != 0 {
                let mut r = a;
                while r != 0 && 127 - r.leading_zeros() >= 127 - b.leading_zeros() {
                    r ^= b << ((127 - r.leading_zeros()) - (127 - b.leading_zeros()));
                }
                a = b;
                b = r;
            }
            a
        };
        let mut t: u128 = 2;
        for _ in 1..=n / 2 {
            t = mulmod(t, t);
            if gcd(f, t ^ 2) != 1 {
                return false;
            }
        }
        true
    }

    #[test]
    fn every_tabulated_modulus_is_irreducible() {
        for n in 1..=64 {
            assert!(irreducible(n, POLY_LOW[n as usize - 1]), "n = {n}");
        }
        // x^4 + x^2 + 1 = (x^2 + x + 1)^2 is the classic reducible case.
        assert!(!irreducible(4, 0b101));
    }

    #[test]
    fn small_products() {
        assert_eq!(gf2_mul(3, 0b010, 0b100).unwrap(), 0b011);
        for n in [1, 3, 8, 17, 64] {
            let f = Gf2::new(n).unwrap();
            let a = 0x9e37_79b9_7f4a_7c15 & f.mask;
            assert_eq!(f.mul(a, 1), a);
            assert_eq!(f.mul(a, 0), 0);
        }
        assert!(gf2_mul(0, 1, 1).is_err());
        assert!(gf2_mul(65, 1, 1).is_err());
        assert!(gf2_mul(3, 8, 1).is_err());
    }

    #[test]
    fn multiplicative_group_has_full_order() {
        // Nonzero elements form a group of order 2^n − 1 under an irreducible modulus.
        for n in 2..=12 {
            let f = Gf2::new(n).unwrap();
            let order = (1u64 << n) - 1;
            for a in 1..=order.min(50) {
                assert_eq!(f.pow(a, order), 1, "n = {n}, a = {a}");
            }
        }
    }
}
