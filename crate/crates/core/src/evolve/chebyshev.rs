//! Chebyshev expansion of `exp(-i tau A) v` for a Hermitian `A` with known
//! spectral bounds.

use num_complex::Complex64;

/// Terms beyond the argument whose Bessel weight falls below this are dropped.
const TRUNCATION: f64 = 1e-16;

/// `J_0(x) .. J_kmax(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 sum_k J_2k = 1`.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = kmax.max(ax as usize) + 1;
    let mut start = top + (160.0 * top as f64).sqrt() as usize + 16;
    start += start % 2;
    let (mut next, mut cur) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        if k - 1 <= kmax {
            out[k - 1] = cur;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += cur;
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// Number of expansion terms needed for argument `z = tau * halfwidth`.
fn term_count(z: f64) -> (usize, Vec<f64>) {
    let guess = (1.5 * z + 10.0 * z.cbrt() + 40.0) as usize;
    let j = bessel_j_sequence(z, guess);
    let mut k = j.len() - 1;
    while k > 0 && (k as f64) > z && j[k].abs() < TRUNCATION && j[k - 1].abs() < TRUNCATION {
        k -= 1;
    }
    (k + 1, j)
}

/// Scratch buffers reused across exponentials.
pub struct Workspace {
    t_prev: Vec<Complex64>,
    t_cur: Vec<Complex64>,
    t_next: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Workspace { t_prev: z.clone(), t_cur: z.clone(), t_next: z.clone(), acc: z }
    }
}

/// Replace `v` by `exp(-i tau A) v`, where `apply(x, out)` writes `A x` and
/// the spectrum of `A` lies in `[lo, hi]`.
pub fn expm_apply<F>(apply: F, lo: f64, hi: f64, tau: f64, v: &mut [Complex64], ws: &mut Workspace)
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let center = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    let global = Complex64::from_polar(1.0, -tau * center);
    if half <= 0.0 || tau == 0.0 {
        v.iter_mut().for_each(|a| *a *= global);
        return;
    }
    let (terms, j) = term_count(tau * half);
    let scaled = |x: &[Complex64], out: &mut [Complex64]| {
        apply(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = (*o - center * xi) / half;
        }
    };
    let minus_i = Complex64::new(0.0, -1.0);

    ws.t_prev.copy_from_slice(v);
    for (a, x) in ws.acc.iter_mut().zip(v.iter()) {
        *a = j[0] * x;
    }
    if terms > 1 {
        scaled(&ws.t_prev, &mut ws.t_cur);
        let w = 2.0 * j[1] * minus_i;
        for (a, x) in ws.acc.iter_mut().zip(&ws.t_cur) {
            *a += w * x;
        }
    }
    let mut phase = minus_i;
    for (k, &jk) in j.iter().enumerate().take(terms).skip(2) {
        scaled(&ws.t_cur, &mut ws.t_next);
        for (n, p) in ws.t_next.iter_mut().zip(&ws.t_prev) {
            *n = 2.0 * *n - p;
        }
        phase *= minus_i;
        let w = 2.0 * jk * phase;
        for (a, x) in ws.acc.iter_mut().zip(&ws.t_next) {
            *a += w * x;
        }
        std::mem::swap(&mut ws.t_prev, &mut ws.t_cur);
        std::mem::swap(&mut ws.t_cur, &mut ws.t_next);
        debug_assert!(k < j.len());
    }
    for (o, a) in v.iter_mut().zip(&ws.acc) {
        *o = global * a;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        let j = bessel_j_sequence(1.0, 5);
        assert!((j[0] - 0.7651976865579666).abs() < 1e-15);
        assert!((j[1] - 0.4400505857449335).abs() < 1e-15);
        let j = bessel_j_sequence(10.0, 5);
        assert!((j[0] - -0.2459357644513483).abs() < 1e-14);
        assert!((j[5] - -0.2340615281867936).abs() < 1e-14);
    }

    #[test]
    fn bessel_large_argument_sum_rule() {
        for &x in &[0.3, 7.5, 63.0, 400.0] {
            let j = bessel_j_sequence(x, 2 * x as usize + 60);
            let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-12, "x = {x}: {s}");
        }
    }

    #[test]
    fn negative_argument_flips_odd_orders() {
        let a = bessel_j_sequence(3.0, 6);
        let b = bessel_j_sequence(-3.0, 6);
        for k in 0..=6 {
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            assert!((a[k] * sign - b[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_exponential_is_exact() {
        let d = [-3.0, 0.5, 2.0, 7.0];
        let apply = |x: &[Complex64], out: &mut [Complex64]| {
            for i in 0..4 {
                out[i] = d[i] * x[i];
            }
        };
        let mut v: Vec<Complex64> = (0..4).map(|i| Complex64::new(1.0 + i as f64, -0.5)).collect();
        let orig = v.clone();
        let mut ws = Workspace::new(4);
        expm_apply(apply, -3.0, 7.0, 1.7, &mut v, &mut ws);
        for i in 0..4 {
            let want = orig[i] * Complex64::from_polar(1.0, -1.7 * d[i]);
            assert!((v[i] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn two_level_rotation() {
        // A = X, exp(-i tau X)|0> = cos tau |0> - i sin tau |1>
        let apply = |x: &[Complex64], out: &mut [Complex64]| {
            out[0] = x[1];
            out[1] = x[0];
        };
        let tau = 2.3;
        let mut v = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let mut ws = Workspace::new(2);
        expm_apply(apply, -1.0, 1.0, tau, &mut v, &mut ws);
        assert!((v[0] - Complex64::new(tau.cos(), 0.0)).norm() < 1e-14);
        assert!((v[1] - Complex64::new(0.0, -tau.sin())).norm() < 1e-14);
    }
}
