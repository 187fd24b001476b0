//! Deterministic point sampling: Halton sequences and seeded directions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// k-th element of the van der Corput sequence in the given base.
pub fn van_der_corput(mut k: usize, base: usize) -> f64 {
    let mut q = 0.0;
    let mut bk = 1.0 / base as f64;
    while k > 0 {
        q += (k % base) as f64 * bk;
        k /= base;
        bk /= base as f64;
    }
    q
}

const HALTON_BASES: [usize; 6] = [2, 3, 5, 7, 11, 13];

/// k-th Halton point in [0,1)^dim.
pub fn halton(k: usize, dim: usize) -> Vec<f64> {
    assert!(dim <= HALTON_BASES.len());
    (0..dim).map(|d| van_der_corput(k + 1, HALTON_BASES[d])).collect()
}

/// Low-discrepancy samples of the coordinate ball |x| < rho.
pub fn halton_ball(dim: usize, rho: f64, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count {
        let u = halton(k, dim);
        k += 1;
        let x: Vec<f64> = u.iter().map(|&ui| (2.0 * ui - 1.0) * rho).collect();
        if x.iter().map(|v| v * v).sum::<f64>() < rho * rho {
            out.push(x);
        }
    }
    out
}

/// Seeded uniform directions on the unit sphere of R^dim.
pub fn seeded_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            out.push(v.iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Seeded points in the box [-half, half]^dim.
pub fn seeded_box(dim: usize, half: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-half..half)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_in_unit_box_and_deterministic() {
        for k in 0..50 {
            let p = halton(k, 3);
            assert!(p.iter().all(|&x| (0.0..1.0).contains(&x)));
            assert_eq!(p, halton(k, 3));
        }
    }

    #[test]
    fn directions_are_unit() {
        for v in seeded_directions(3, 20, 7) {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
