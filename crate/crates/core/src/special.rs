//! Special functions: log-gamma and its first two derivatives, the standard normal
//! CDF, and Gauss-Hermite quadrature against a Gaussian weight.

use std::f64::consts::PI;
use std::sync::OnceLock;

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS_COEF: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    4.652_362_892_704_858e-5,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_88e-3,
    0.217_439_618_115_212_64e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln |Gamma(x)|` via the Lanczos approximation (g = 607/128, 15 terms).
///
/// Relative error stays below 1e-13 on [0.1, 1e7] away from the zeros at 1 and 2,
/// where the absolute error is below 1e-15. Returns `+inf` at non-positive integers.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        // Reflection.
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + sum.ln()
}

/// Digamma `psi(x) = d/dx ln Gamma(x)` for `x > 0`.
pub fn digamma(mut x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    acc + x.ln() - 0.5 * inv - series
}

/// Trigamma `psi'(x)` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli-number expansion: 1/x + 1/2x^2 + sum B_2k / x^(2k+1).
    let series = inv
        * (1.0
            + inv2
                * (1.0 / 6.0
                    - inv2
                        * (1.0 / 30.0
                            - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * 691.0 / 2730.0))))));
    acc + series + 0.5 * inv2
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Gauss-Hermite rule for expectations under the standard normal:
/// `E[f(Z)] ~ sum_k weights[k] * f(nodes[k])`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Computes an `n`-point rule by Newton iteration on orthonormal Hermite polynomials.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        // Physicists' weight exp(-x^2) to the standard normal density.
        let nodes: Vec<f64> = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights: Vec<f64> = w.iter().rev().map(|v| v / PI.sqrt()).collect();
        GaussHermite { nodes, weights }
    }

    /// The shared 16-point rule.
    pub fn sixteen() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(16))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(X)]` for `X ~ N(mean, sd^2)`.
    pub fn expectation(&self, mean: f64, sd: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(mean + sd * z))
            .sum()
    }
}
