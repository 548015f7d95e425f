//! Float helpers that work without `std`.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Squared Euclidean distance, accumulated in four interleaved lanes.
#[cfg(test)]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist_within(a, b, f64::INFINITY).unwrap_or(f64::INFINITY)
}

/// [`sq_dist`], or `None` once the running sum exceeds `bound`. Partial
/// sums never exceed the full sum, so `None` implies `sq_dist > bound`.
#[inline(always)]
pub(crate) fn sq_dist_within(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..8 {
            let d = x[j] - y[j];
            acc[j % 4] += d * d;
        }
        if (acc[0] + acc[1]) + (acc[2] + acc[3]) > bound {
            return None;
        }
    }
    for (j, (x, y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        let d = x - y;
        acc[j % 4] += d * d;
    }
    let s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    (s <= bound).then_some(s)
}

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-dependent hash of a word sequence.
pub(crate) fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x243F_6A88_85A3_08D3, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Maps a hash to a uniform value in [0, 1).
#[inline]
pub(crate) fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
