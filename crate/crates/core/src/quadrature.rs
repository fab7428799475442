//! Adaptive quadrature used by the bath and oracle modules.
//!
//! Finite intervals use globally adaptive Gauss–Kronrod (7/15). Tails to
//! infinity are handled either by an algebraic map onto a finite interval
//! (non-oscillatory integrands) or by summing half-period panels of an
//! oscillatory integrand and accelerating the partial sums with Wynn's
//! epsilon algorithm.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not reach tolerance: value {value}, error estimate {error:.3e}")]
    NotConverged { value: C64, error: f64 },
    #[error("integral diverges: {0}")]
    Divergent(String),
}

/// Integral value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
}

impl Estimate {
    pub fn zero() -> Self {
        Self { value: C64::new(0.0, 0.0), error: 0.0 }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate { value: self.value + rhs.value, error: self.error + rhs.error }
    }
}

impl std::ops::Sub for Estimate {
    type Output = Estimate;
    fn sub(self, rhs: Estimate) -> Estimate {
        Estimate { value: self.value - rhs.value, error: self.error + rhs.error }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;
const MAX_PANELS: usize = 20_000;
const WYNN_WINDOW: usize = 21;

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Estimate { value, error }
}

struct Segment {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]` to an
/// absolute error `tol`.
pub fn integrate<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64) -> Result<Estimate, QuadError> {
    if a == b {
        return Ok(Estimate::zero());
    }
    let first = gk15(f, a, b);
    if !first.value.re.is_finite() || !first.value.im.is_finite() {
        return Err(QuadError::Divergent(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    let mut total = first;
    heap.push(Segment { a, b, est: first });
    while total.error > tol {
        if heap.len() >= MAX_SEGMENTS {
            return Err(QuadError::NotConverged { value: total.value, error: total.error });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            return Err(QuadError::NotConverged { value: total.value, error: total.error });
        }
        let left = gk15(f, worst.a, mid);
        let right = gk15(f, mid, worst.b);
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        heap.push(Segment { a: worst.a, b: mid, est: left });
        heap.push(Segment { a: mid, b: worst.b, est: right });
        if total.error <= tol {
            // incremental sums drift; confirm against the segment list
            total.error = heap.iter().map(|s| s.est.error).sum();
            total.value = heap.iter().map(|s| s.est.value).sum();
        }
    }
    if !total.value.re.is_finite() || !total.value.im.is_finite() {
        return Err(QuadError::Divergent("non-finite integral".into()));
    }
    Ok(total)
}

/// [`integrate`] over `pieces` equal subintervals, each with an equal share
/// of the tolerance. Used for integrands with many oscillations on `[a, b]`.
pub fn integrate_split<F: Fn(f64) -> C64>(
    f: &F,
    a: f64,
    b: f64,
    pieces: usize,
    tol: f64,
) -> Result<Estimate, QuadError> {
    let pieces = pieces.max(1);
    let width = (b - a) / pieces as f64;
    let share = tol / pieces as f64;
    let mut total = Estimate::zero();
    for k in 0..pieces {
        let lo = a + k as f64 * width;
        let hi = if k + 1 == pieces { b } else { lo + width };
        total = total + integrate(f, lo, hi, share)?;
    }
    Ok(total)
}

/// ∫_a^∞ f(x) dx for a non-oscillatory integrand decaying faster than 1/x,
/// via x = a + scale·(1-u)/u.
pub fn integrate_to_infinity<F: Fn(f64) -> C64>(
    f: &F,
    a: f64,
    scale: f64,
    tol: f64,
) -> Result<Estimate, QuadError> {
    let mapped = |u: f64| {
        let x = a + scale * (1.0 - u) / u;
        f(x) * (scale / (u * u))
    };
    integrate(&mapped, 0.0, 1.0, tol)
}

/// Wynn epsilon extrapolation of the limit of `sums`.
fn wynn_epsilon(sums: &[f64]) -> f64 {
    let n = sums.len();
    if n < 3 {
        return *sums.last().unwrap_or(&0.0);
    }
    // prev = column k-1, cur = column k
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = sums.to_vec();
    let mut best = *sums.last().unwrap();
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 {
                return best;
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        k += 1;
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            let candidate = *cur.last().unwrap();
            if candidate.is_finite() {
                best = candidate;
            } else {
                return best;
            }
        }
    }
    best
}

/// ∫_a^∞ f(x) dx for an integrand that oscillates with angular frequency
/// `omega` under a smooth, eventually monotone envelope.
pub fn integrate_oscillatory_tail<F: Fn(f64) -> C64>(
    f: &F,
    a: f64,
    omega: f64,
    tol: f64,
) -> Result<Estimate, QuadError> {
    assert!(omega > 0.0, "oscillatory tail needs a positive frequency");
    let panel = std::f64::consts::PI / omega;
    let panel_tol = tol * 1e-2;
    let mut partial_re = Vec::new();
    let mut partial_im = Vec::new();
    let mut running = C64::new(0.0, 0.0);
    let mut panel_error = 0.0;
    let mut history: Vec<C64> = Vec::new();
    for k in 0..MAX_PANELS {
        let lo = a + k as f64 * panel;
        let est = integrate(f, lo, lo + panel, panel_tol)?;
        running += est.value;
        panel_error += est.error;
        partial_re.push(running.re);
        partial_im.push(running.im);
        let start = partial_re.len().saturating_sub(WYNN_WINDOW);
        let extrapolated = C64::new(
            wynn_epsilon(&partial_re[start..]),
            wynn_epsilon(&partial_im[start..]),
        );
        history.push(extrapolated);
        let h = history.len();
        if h >= 8 {
            let d1 = (history[h - 1] - history[h - 2]).norm();
            let d2 = (history[h - 1] - history[h - 3]).norm();
            // a vanishing panel (integrand identically zero) is also converged
            if d1 + d2 < tol || (est.value.norm() == 0.0 && est.error == 0.0) {
                return Ok(Estimate { value: extrapolated, error: d1 + d2 + panel_error });
            }
        }
    }
    let value = *history.last().unwrap();
    Err(QuadError::NotConverged { value, error: f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn real<F: Fn(f64) -> f64>(f: F) -> impl Fn(f64) -> C64 {
        move |x| C64::new(f(x), 0.0)
    }

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(&real(|x| 3.0 * x * x - x + 2.0), -1.0, 2.0, 1e-12).unwrap();
        assert!((est.value.re - 13.5).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_converges() {
        // ∫ 1/(x^2 + eps^2) over [-1, 1] = 2 atan(1/eps)/eps
        let eps = 1e-3;
        let est = integrate(&real(|x| 1.0 / (x * x + eps * eps)), -1.0, 1.0, 1e-9).unwrap();
        let exact = 2.0 * (1.0 / eps).atan() / eps;
        assert!((est.value.re - exact).abs() < 1e-8);
    }

    #[test]
    fn infinite_tail_map() {
        // ∫_1^∞ dx/x^2 = 1
        let est = integrate_to_infinity(&real(|x| 1.0 / (x * x)), 1.0, 1.0, 1e-12).unwrap();
        assert!((est.value.re - 1.0).abs() < 1e-11);
    }

    #[test]
    fn divergent_tail_is_reported() {
        let res = integrate_to_infinity(&real(|x| 1.0 / x), 1.0, 1.0, 1e-10);
        assert!(res.is_err());
    }

    #[test]
    fn oscillatory_tail_dirichlet() {
        // ∫_0^∞ sin x / x dx = π/2; integrand regular at zero via sinc
        let sinc = |x: f64| if x.abs() < 1e-8 { 1.0 } else { x.sin() / x };
        let est = integrate_oscillatory_tail(&real(sinc), 0.0, 1.0, 1e-10).unwrap();
        assert!((est.value.re - PI / 2.0).abs() < 1e-9, "{}", est.value.re);
    }

    #[test]
    fn oscillatory_tail_lorentzian_fourier() {
        // ∫_0^∞ cos(ωt)/(1+ω^2) dω = (π/2) e^{-t}
        let t = 0.7;
        let est = integrate_oscillatory_tail(&real(|w| (w * t).cos() / (1.0 + w * w)), 0.0, t, 1e-11)
            .unwrap();
        assert!((est.value.re - PI / 2.0 * (-t).exp()).abs() < 1e-10);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let sums: Vec<f64> = (1..=15)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        assert!((wynn_epsilon(&sums) - 2f64.ln()).abs() < 1e-10);
    }
}
