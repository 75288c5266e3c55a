//! Riccati–Bessel and Riccati–Hankel functions.
//!
//! `ĵ_K(x) = x j_K(x)`, `ŷ_K(x) = x y_K(x)` with `ŷ_0 = −cos x`, and
//! `ĥ±_K = ĵ_K ± i ŷ_K`, so `ĥ±_0(x) = ∓i e^{±ix}`.

use num_complex::Complex64;

use crate::error::{Error, Result};

const RESCALE: f64 = 1e200;

/// `ĵ_l(x)` for `l = 0..=k`.
pub fn riccati_j_table(k: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    out[0] = x.sin();
    if k == 0 {
        return out;
    }
    if x > k as f64 {
        out[1] = x.sin() / x - x.cos();
        for l in 1..k {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return out;
    }
    // Miller: run down from well above max(k, x) and normalize at the end
    let start = k + 20 + (40.0 * (k as f64 + x)).sqrt() as usize;
    let mut above = 0.0;
    let mut cur = 1e-300;
    let mut tail: Vec<f64> = vec![0.0; k + 1];
    for l in (1..=start).rev() {
        let below = (2 * l + 1) as f64 / x * cur - above;
        above = cur;
        cur = below;
        // l−1 now holds `cur`
        if l - 1 <= k {
            tail[l - 1] = cur;
        }
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            above /= RESCALE;
            for v in tail.iter_mut().skip(l - 1) {
                *v /= RESCALE;
            }
        }
    }
    // normalize with whichever of ĵ_0, ĵ_1 is better conditioned
    let j0 = x.sin();
    let j1 = x.sin() / x - x.cos();
    let factor = if j0.abs() >= j1.abs() || k == 0 {
        j0 / tail[0]
    } else {
        j1 / tail[1]
    };
    for (o, t) in out.iter_mut().zip(&tail) {
        *o = t * factor;
    }
    out
}

/// `ŷ_l(x)` for `l = 0..=k`, by upward recurrence.
pub fn riccati_y_table(k: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    out[0] = -x.cos();
    if k >= 1 {
        out[1] = -x.cos() / x - x.sin();
    }
    for l in 1..k {
        out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
    }
    out
}

fn check(x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("Riccati–Hankel argument must be positive, got {x}")));
    }
    Ok(())
}

/// `(ĥ⁺_K(x), ĥ⁻_K(x))`
pub fn riccati_hankel(k: u32, x: f64) -> Result<(Complex64, Complex64)> {
    check(x)?;
    let k = k as usize;
    let j = riccati_j_table(k, x)[k];
    let y = riccati_y_table(k, x)[k];
    Ok((Complex64::new(j, y), Complex64::new(j, -y)))
}

/// `(ĵ, ĵ', ŷ, ŷ')` at order K.
pub fn riccati_bessel_with_derivatives(k: u32, x: f64) -> Result<[f64; 4]> {
    check(x)?;
    let k = k as usize;
    if k == 0 {
        return Ok([x.sin(), x.cos(), -x.cos(), x.sin()]);
    }
    let j = riccati_j_table(k, x);
    let y = riccati_y_table(k, x);
    let kf = k as f64;
    Ok([j[k], j[k - 1] - kf / x * j[k], y[k], y[k - 1] - kf / x * y[k]])
}

/// `ĥ⁺_K(x)` and its derivative.
pub fn riccati_hankel_plus_with_derivative(k: u32, x: f64) -> Result<(Complex64, Complex64)> {
    let [j, jp, y, yp] = riccati_bessel_with_derivatives(k, x)?;
    Ok((Complex64::new(j, y), Complex64::new(jp, yp)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn k0_closed_form() {
        let (hp, hm) = riccati_hankel(0, FRAC_PI_2).unwrap();
        assert!((hp - Complex64::new(1.0, 0.0)).norm() < 1e-16);
        for &x in &[0.1, 1.0, 7.3, 55.0] {
            let (hp, hm2) = riccati_hankel(0, x).unwrap();
            let want = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, x);
            assert!((hp - want).norm() < 1e-15);
            assert!((hm2 - want.conj()).norm() < 1e-15);
        }
        assert!((hm - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(riccati_hankel(1, 0.0).is_err());
    }

    #[test]
    fn downward_and_upward_agree_where_both_work() {
        let x = 30.0;
        let up = riccati_j_table(20, x);
        let down = riccati_j_table(40, x);
        for l in 0..=20 {
            assert!((up[l] - down[l]).abs() < 1e-13, "{l}");
        }
    }

    /// Double-double number, enough to keep the alternating finite sum exact.
    #[derive(Clone, Copy)]
    struct Dd(f64, f64);

    impl Dd {
        fn add(self, o: Dd) -> Dd {
            let s = self.0 + o.0;
            let bb = s - self.0;
            let err = (self.0 - (s - bb)) + (o.0 - bb);
            let lo = err + self.1 + o.1;
            let hi = s + lo;
            Dd(hi, lo - (hi - s))
        }
        fn mul_f64(self, b: f64) -> Dd {
            let p = self.0 * b;
            let err = self.0.mul_add(b, -p);
            let lo = err + self.1 * b;
            let hi = p + lo;
            Dd(hi, lo - (hi - p))
        }
        fn div_f64(self, b: f64) -> Dd {
            let q = self.0 / b;
            let r = self.add(Dd(-q * b, -(q.mul_add(b, -(q * b)))));
            let q2 = r.0 / b;
            Dd(q, 0.0).add(Dd(q2, 0.0))
        }
        fn neg(self) -> Dd {
            Dd(-self.0, -self.1)
        }
    }

    /// ĥ⁺_n(x) = (−i)^{n+1} e^{ix} Σ_k (n+k)!/(k!(n−k)!) (i/2x)^k, summed in
    /// double-double.
    fn finite_sum(n: u32, x: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let mut term = Dd(1.0, 0.0);
        let (mut re, mut im) = (Dd(0.0, 0.0), Dd(0.0, 0.0));
        for k in 0..=n {
            match k % 4 {
                0 => re = re.add(term),
                1 => im = im.add(term),
                2 => re = re.add(term.neg()),
                _ => im = im.add(term.neg()),
            }
            let kf = k as f64;
            term = term
                .mul_f64(n as f64 + kf + 1.0)
                .mul_f64(n as f64 - kf)
                .div_f64((kf + 1.0) * 2.0 * x);
        }
        (-i).powu(n + 1) * Complex64::from_polar(1.0, x) * Complex64::new(re.0 + re.1, im.0 + im.1)
    }

    /// ĵ_n(x) = x^{n+1}/(2n+1)!! Σ_k (−x²/2)^k / (k! (2n+3)(2n+5)…(2n+2k+1))
    fn power_series_j(n: u32, x: f64) -> f64 {
        let mut lead = x;
        for m in 1..=n {
            lead *= x / (2 * m + 1) as f64;
        }
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -0.5 * x * x / (k as f64 * (2 * n + 2 * k + 1) as f64);
            sum += term;
        }
        lead * sum
    }

    #[test]
    fn matches_finite_sum_oracle() {
        for n in 0..=50u32 {
            for &x in &[0.7, 1.0, 2.5, 6.0, 13.0, 40.0, 75.0, 140.0] {
                let (hp, _) = riccati_hankel(n, x).unwrap();
                let want = finite_sum(n, x);
                assert!((hp - want).norm() <= 1e-12 * want.norm(), "n={n} x={x}: {hp} vs {want}");
            }
        }
    }

    #[test]
    fn regular_part_matches_power_series() {
        for n in 0..=50u32 {
            for &x in &[0.05, 0.3, 1.0, 2.0] {
                let j = riccati_j_table(n as usize, x)[n as usize];
                let want = power_series_j(n, x);
                assert!((j - want).abs() <= 1e-12 * want.abs(), "n={n} x={x}: {j} vs {want}");
            }
        }
    }

    #[test]
    fn wronskian_is_minus_two_i() {
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..400 {
            let k = (next() * 50.0) as u32;
            let x = 0.5 + next() * 100.0;
            let [j, jp, y, yp] = riccati_bessel_with_derivatives(k, x).unwrap();
            let (hp, hpp) = (Complex64::new(j, y), Complex64::new(jp, yp));
            let (hm, hmp) = (Complex64::new(j, -y), Complex64::new(jp, -yp));
            let w = hp * hmp - hm * hpp;
            let scale = (hp.norm() * hmp.norm()).max(1.0);
            assert!((w - Complex64::new(0.0, -2.0)).norm() < 1e-10 * scale, "K={k} x={x}: {w}");
        }
    }
}
