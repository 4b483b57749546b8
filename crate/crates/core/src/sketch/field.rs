//! Arithmetic modulo the Mersenne prime 2^61 - 1.

pub const P: u64 = (1 << 61) - 1;

#[inline]
pub fn reduce(x: u128) -> u64 {
    let lo = (x as u64) & P;
    let mid = ((x >> 61) as u64) & P;
    let top = (x >> 122) as u64;
    let mut r = lo + mid + top;
    while r >= P {
        r -= P;
    }
    r
}

#[inline]
pub fn add(a: u64, b: u64) -> u64 {
    let r = a + b;
    if r >= P {
        r - P
    } else {
        r
    }
}

#[inline]
pub fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + P - b
    }
}

#[inline]
pub fn mul(a: u64, b: u64) -> u64 {
    reduce(a as u128 * b as u128)
}

pub fn pow(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            r = mul(r, b);
        }
        b = mul(b, b);
        e >>= 1;
    }
    r
}

pub fn inv(a: u64) -> u64 {
    pow(a, P - 2)
}

/// Signed integer as a field element.
#[inline]
pub fn from_i64(v: i64) -> u64 {
    if v >= 0 {
        reduce(v as u128)
    } else {
        sub(0, reduce(v.unsigned_abs() as u128))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_signs() {
        for a in [1u64, 2, 12345, P - 1] {
            assert_eq!(mul(a, inv(a)), 1);
        }
        assert_eq!(add(from_i64(-5), 5), 0);
        assert_eq!(reduce(u128::MAX) as u128, u128::MAX % P as u128);
    }
}
