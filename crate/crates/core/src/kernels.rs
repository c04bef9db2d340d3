//! Covariance kernels of the four self-similar Gaussian families and the
//! kernel-level quantities derived from them.
//!
//! | family   | kernel `C(s, t)`                                              |
//! |----------|---------------------------------------------------------------|
//! | fBm      | `½ (s^{2H} + t^{2H} − |t−s|^{2H})`                             |
//! | bifBm    | `2^{−K} ((t^{2H} + s^{2H})^K − |t−s|^{2HK})`                   |
//! | trifBm   | `t^{2HK} + s^{2HK} − (t^{2H} + s^{2H})^K`                      |
//! | n-th fBm | `(−1)^n c/2 [|t−s|^{2H} − Σ_j (−1)^j (2H choose j)(t^j s^{2H−j} + s^j t^{2H−j})]` |
//!
//! with `c = 1 / (Γ(2H+1) |sin πH|)` for the n-th order family.

use std::f64::consts::PI;
use std::fmt;

use faer::Mat;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numeric::{aitken, generalized_binomial};

/// A process family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessSpec {
    Fbm { hurst: f64 },
    BifBm { hurst: f64, k: f64 },
    TrifBm { hurst: f64, k: f64 },
    NthFbm { order: u32, hurst: f64 },
}

impl ProcessSpec {
    pub fn fbm(hurst: f64) -> Self {
        ProcessSpec::Fbm { hurst }
    }

    pub fn bifbm(hurst: f64, k: f64) -> Self {
        ProcessSpec::BifBm { hurst, k }
    }

    pub fn trifbm(hurst: f64, k: f64) -> Self {
        ProcessSpec::TrifBm { hurst, k }
    }

    pub fn nth_fbm(order: u32, hurst: f64) -> Self {
        ProcessSpec::NthFbm { order, hurst }
    }

    pub fn hurst(&self) -> f64 {
        match *self {
            ProcessSpec::Fbm { hurst }
            | ProcessSpec::BifBm { hurst, .. }
            | ProcessSpec::TrifBm { hurst, .. }
            | ProcessSpec::NthFbm { hurst, .. } => hurst,
        }
    }

    /// Second index `K`, if the family has one.
    pub fn k(&self) -> Option<f64> {
        match *self {
            ProcessSpec::BifBm { k, .. } | ProcessSpec::TrifBm { k, .. } => Some(k),
            _ => None,
        }
    }

    pub fn order(&self) -> Option<u32> {
        match *self {
            ProcessSpec::NthFbm { order, .. } => Some(order),
            _ => None,
        }
    }

    /// Self-similarity index: `HK` for the two-parameter families, `H` otherwise.
    pub fn self_similarity(&self) -> f64 {
        self.hurst() * self.k().unwrap_or(1.0)
    }

    pub fn family(&self) -> &'static str {
        match self {
            ProcessSpec::Fbm { .. } => "fbm",
            ProcessSpec::BifBm { .. } => "bifbm",
            ProcessSpec::TrifBm { .. } => "trifbm",
            ProcessSpec::NthFbm { .. } => "nfbm",
        }
    }

    /// Checks the admissible parameter region of the family.
    pub fn validate(&self) -> Result<()> {
        let h = self.hurst();
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be finite (got {x})")))
            }
        };
        finite(h, "H")?;
        if let Some(k) = self.k() {
            finite(k, "K")?;
        }
        match *self {
            ProcessSpec::Fbm { hurst } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return Err(Error::param(format!(
                        "fbm requires 0 < H < 1 (got H = {hurst})"
                    )));
                }
            }
            ProcessSpec::BifBm { hurst, k } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return Err(Error::param(format!(
                        "bifbm requires 0 < H < 1 (got H = {hurst})"
                    )));
                }
                if k > 0.0 && k <= 1.0 {
                    return Ok(());
                }
                if k > 1.0 && k < 2.0 {
                    if hurst * k < 1.0 {
                        return Ok(());
                    }
                    return Err(Error::param(format!(
                        "bifbm with 1 < K < 2 requires H*K < 1 (got H*K = {})",
                        hurst * k
                    )));
                }
                return Err(Error::param(format!(
                    "bifbm requires 0 < K < 2 (got K = {k})"
                )));
            }
            ProcessSpec::TrifBm { hurst, k } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return Err(Error::param(format!(
                        "trifbm requires 0 < H < 1 (got H = {hurst})"
                    )));
                }
                if k == 1.0 {
                    return Err(Error::param(
                        "trifbm requires 0 < K < 1 (K = 1 gives the identically zero kernel)",
                    ));
                }
                if !(k > 0.0 && k < 1.0) {
                    return Err(Error::param(format!(
                        "trifbm requires 0 < K < 1 (got K = {k})"
                    )));
                }
            }
            ProcessSpec::NthFbm { order, hurst } => {
                if order == 0 {
                    return Err(Error::param("nfbm requires order n >= 1"));
                }
                let n = f64::from(order);
                if !(hurst > n - 1.0 && hurst < n) {
                    return Err(Error::param(format!(
                        "nfbm of order {order} requires {} < H < {order} (got H = {hurst})",
                        order - 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Raw kernel value, without validation or domain checks.
    ///
    /// Points at the origin return exactly zero for every family.
    pub fn kernel(&self, s: f64, t: f64) -> f64 {
        match *self {
            ProcessSpec::Fbm { hurst } => {
                let e = 2.0 * hurst;
                0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e))
            }
            ProcessSpec::BifBm { hurst, k } => {
                if s == 0.0 || t == 0.0 {
                    return 0.0;
                }
                let e = 2.0 * hurst;
                ((t.powf(e) + s.powf(e)).powf(k) - (t - s).abs().powf(e * k)) * 2f64.powf(-k)
            }
            ProcessSpec::TrifBm { hurst, k } => {
                if s == 0.0 || t == 0.0 {
                    return 0.0;
                }
                let e = 2.0 * hurst;
                t.powf(e * k) + s.powf(e * k) - (t.powf(e) + s.powf(e)).powf(k)
            }
            ProcessSpec::NthFbm { order, hurst } => nth_order_kernel(order, hurst, s, t),
        }
    }

    /// Validated kernel evaluation.
    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        self.validate()?;
        if !(s >= 0.0 && t >= 0.0) {
            return Err(Error::domain(format!(
                "covariance needs s, t >= 0 (got s = {s}, t = {t})"
            )));
        }
        Ok(self.kernel(s, t))
    }

    /// `E (X_t − X_s)^2` from the kernel.
    pub fn increment_variance(&self, s: f64, t: f64) -> f64 {
        self.kernel(t, t) + self.kernel(s, s) - 2.0 * self.kernel(s, t)
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProcessSpec::Fbm { hurst } => write!(f, "fbm(H={hurst})"),
            ProcessSpec::BifBm { hurst, k } => write!(f, "bifbm(H={hurst}, K={k})"),
            ProcessSpec::TrifBm { hurst, k } => write!(f, "trifbm(H={hurst}, K={k})"),
            ProcessSpec::NthFbm { order, hurst } => write!(f, "nfbm(n={order}, H={hurst})"),
        }
    }
}

/// Normalizing constant `1 / (Γ(2H+1) |sin πH|)` of the n-th order kernel.
pub fn nth_order_constant(hurst: f64) -> f64 {
    1.0 / (gamma(2.0 * hurst + 1.0) * (PI * hurst).sin().abs())
}

fn nth_order_kernel(order: u32, hurst: f64, s: f64, t: f64) -> f64 {
    // Each term t^j s^{2H-j} vanishes as s -> 0 because j <= n-1 < 2H.
    if s == 0.0 || t == 0.0 {
        return 0.0;
    }
    let e = 2.0 * hurst;
    let mut poly = 0.0;
    for j in 0..order {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let jf = f64::from(j);
        poly += sign
            * generalized_binomial(e, j)
            * (t.powf(jf) * s.powf(e - jf) + s.powf(jf) * t.powf(e - jf));
    }
    let outer = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    outer * 0.5 * nth_order_constant(hurst) * ((t - s).abs().powf(e) - poly)
}

/// Covariance matrix of the process at strictly positive, strictly increasing times.
///
/// Only the upper triangle is evaluated; the lower triangle is its mirror, so
/// the result is exactly symmetric.
pub fn covariance_matrix(spec: &ProcessSpec, times: &[f64]) -> Result<Mat<f64>> {
    spec.validate()?;
    if let Some(bad) = times.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::domain(format!(
            "covariance matrix needs strictly positive finite times (got {bad})"
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(
            "covariance matrix needs strictly increasing times",
        ));
    }
    let n = times.len();
    let mut m = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let c = spec.kernel(times[i], times[j]);
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    Ok(m)
}

/// Exponent `γ` of the partition-norm condition for the weighted quadratic
/// variation of a bifractional Brownian motion.
///
/// `K ≤ 1` (including the fBm boundary `K = 1`) uses `max(1/(2−2HK), 1)`;
/// `1 < K < 2` uses `1/(min(1, 2H) + 1 − 2HK)`.
pub fn gamma_exponent(hurst: f64, k: f64) -> Result<f64> {
    ProcessSpec::bifbm(hurst, k).validate()?;
    let hk = hurst * k;
    if k <= 1.0 {
        Ok((1.0 / (2.0 - 2.0 * hk)).max(1.0))
    } else {
        Ok(1.0 / ((2.0 * hurst).min(1.0) + 1.0 - 2.0 * hk))
    }
}

/// Default step schedule for the one-sided difference quotients.
pub const DEFAULT_H_SCHEDULE: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

/// Numerical estimate of the derivative jump `f_r(t) = D⁻(t) − D⁺(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEstimate {
    pub t: f64,
    /// Best estimate of `f_r(t)`; extrapolated along the schedule when the
    /// estimates converge geometrically, otherwise the finest-step value.
    pub jump: f64,
    /// `D⁻` and `D⁺` difference quotients at the finest step.
    pub d_minus: f64,
    pub d_plus: f64,
    /// `D⁻ − D⁺` at each step of the schedule.
    pub estimates: Vec<f64>,
    pub converged: bool,
}

/// Estimates `f_r(t)` from one-sided difference quotients
/// `[r(t,t) − r(s,t)] / (t − s)` with `s = t ∓ h` along `schedule`.
///
/// The estimate is flagged divergent when `|D⁻ − D⁺|` grows by more than a
/// factor of two at every refinement step.
pub fn baxter_jump(
    spec: &ProcessSpec,
    t: f64,
    schedule: &[f64],
    horizon: f64,
) -> Result<JumpEstimate> {
    spec.validate()?;
    if schedule.is_empty() {
        return Err(Error::domain("empty step schedule"));
    }
    if schedule.iter().any(|&h| !(h > 0.0)) || schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain(
            "step schedule must be positive and strictly decreasing",
        ));
    }
    let h_max = schedule[0];
    if !(t - h_max > 0.0 && t + h_max < horizon) {
        return Err(Error::domain(format!(
            "t ± h leaves (0, {horizon}) at t = {t}, h = {h_max}"
        )));
    }

    let r_tt = spec.kernel(t, t);
    let quotients = |h: f64| {
        let d_minus = (r_tt - spec.kernel(t - h, t)) / h;
        let d_plus = (r_tt - spec.kernel(t + h, t)) / -h;
        (d_minus, d_plus)
    };
    let estimates: Vec<f64> = schedule
        .iter()
        .map(|&h| {
            let (dm, dp) = quotients(h);
            dm - dp
        })
        .collect();

    let diverged =
        estimates.len() >= 2 && estimates.windows(2).all(|w| w[1].abs() > 2.0 * w[0].abs());
    let h_min = *schedule.last().unwrap();
    let (d_minus, d_plus) = quotients(h_min);
    let last = *estimates.last().unwrap();

    let jump = if !diverged && estimates.len() >= 3 {
        let n = estimates.len();
        // Cancellation error of the difference quotients at the finest step.
        let noise = 8.0 * f64::EPSILON * r_tt.abs().max(1.0) / h_min;
        aitken(
            estimates[n - 3],
            estimates[n - 2],
            estimates[n - 1],
            100.0 * noise,
        )
        .unwrap_or(last)
    } else {
        last
    };

    Ok(JumpEstimate {
        t,
        jump,
        d_minus,
        d_plus,
        estimates,
        converged: !diverged,
    })
}

/// Midpoint-rule integral of `f_r` over `[a, b]`.
pub fn baxter_integral(spec: &ProcessSpec, a: f64, b: f64) -> Result<f64> {
    baxter_integral_with(spec, a, b, 256, &DEFAULT_H_SCHEDULE)
}

pub fn baxter_integral_with(
    spec: &ProcessSpec,
    a: f64,
    b: f64,
    panels: usize,
    schedule: &[f64],
) -> Result<f64> {
    if !(a > 0.0 && b > a) {
        return Err(Error::domain(format!(
            "integral needs 0 < a < b (got a = {a}, b = {b})"
        )));
    }
    if panels < 256 {
        return Err(Error::domain(format!(
            "at least 256 panels required (got {panels})"
        )));
    }
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let t = a + (i as f64 + 0.5) * width;
        let est = baxter_jump(spec, t, schedule, f64::INFINITY)?;
        if !est.converged {
            return Err(Error::DivergentJump { t });
        }
        total += est.jump;
    }
    Ok(total * width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn probe_times() -> Vec<f64> {
        (1..=32).map(|i| i as f64 / 32.0).collect()
    }

    #[test]
    fn validation_examples() {
        assert!(ProcessSpec::bifbm(0.6, 0.5).validate().is_ok());
        assert!(ProcessSpec::bifbm(0.4, 1.5).validate().is_ok());
        let err = ProcessSpec::bifbm(0.8, 1.5).validate().unwrap_err();
        assert!(matches!(&err, Error::ParameterOutOfRange(m) if m.contains("H*K < 1")));
        let err = ProcessSpec::trifbm(0.5, 1.0).validate().unwrap_err();
        assert!(matches!(&err, Error::ParameterOutOfRange(m) if m.contains("zero kernel")));
        assert!(ProcessSpec::fbm(1.0).validate().is_err());
        assert!(ProcessSpec::fbm(f64::NAN).validate().is_err());
        assert!(ProcessSpec::bifbm(0.5, 2.0).validate().is_err());
        assert!(ProcessSpec::nth_fbm(2, 1.5).validate().is_ok());
        assert!(ProcessSpec::nth_fbm(2, 0.5).validate().is_err());
        assert!(ProcessSpec::nth_fbm(0, 0.5).validate().is_err());
    }

    #[test]
    fn covariance_examples() {
        let bm = ProcessSpec::fbm(0.5);
        assert_relative_eq!(bm.covariance(0.3, 0.7).unwrap(), 0.3, epsilon = 1e-15);
        let tri = ProcessSpec::trifbm(0.5, 0.5);
        assert_relative_eq!(
            tri.covariance(1.0, 1.0).unwrap(),
            0.585_786_437_626_904_9,
            epsilon = 1e-15
        );
        for &(h, k) in &[(0.3, 0.5), (0.6, 0.9), (0.4, 1.5)] {
            assert_relative_eq!(
                ProcessSpec::bifbm(h, k).covariance(1.0, 1.0).unwrap(),
                1.0,
                epsilon = 1e-14
            );
        }
        assert!(matches!(bm.covariance(-0.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(
            ProcessSpec::fbm(1.2).covariance(0.1, 0.5),
            Err(Error::ParameterOutOfRange(_))
        ));
    }

    #[test]
    fn bifbm_with_unit_k_is_fbm() {
        let fbm = ProcessSpec::fbm(0.7);
        let bif = ProcessSpec::bifbm(0.7, 1.0);
        for &s in &probe_times() {
            for &t in &probe_times() {
                assert!((bif.kernel(s, t) - fbm.kernel(s, t)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn trifbm_unit_k_degenerates_to_zero() {
        let raw = ProcessSpec::trifbm(0.6, 1.0);
        for &s in &probe_times() {
            for &t in &probe_times() {
                assert_eq!(raw.kernel(s, t), 0.0);
            }
        }
    }

    #[test]
    fn kernels_vanish_at_origin() {
        let specs = [
            ProcessSpec::fbm(0.3),
            ProcessSpec::bifbm(0.6, 0.5),
            ProcessSpec::bifbm(0.4, 1.5),
            ProcessSpec::trifbm(0.5, 0.8),
            ProcessSpec::nth_fbm(2, 1.5),
        ];
        for spec in &specs {
            for &t in &probe_times() {
                assert_eq!(spec.covariance(0.0, t).unwrap(), 0.0, "{spec}");
                assert_eq!(spec.covariance(t, 0.0).unwrap(), 0.0, "{spec}");
            }
        }
    }

    #[test]
    fn bifbm_formula_cancels_at_origin() {
        // The unguarded formula leaves (t^{2H})^K - t^{2HK}, which must be roundoff.
        for &(h, k) in &[(0.6, 0.5), (0.3, 0.9), (0.4, 1.5)] {
            for &t in &probe_times() {
                let e = 2.0 * h;
                let residual = (t.powf(e)).powf(k) - t.powf(e * k);
                assert!(residual.abs() <= 1e-12 * t.powf(e * k));
            }
        }
    }

    #[test]
    fn nth_order_limit_at_origin() {
        // Numeric limit sweep s -> 0 supports defining C(0, t) = 0.
        for &(n, h) in &[(1u32, 0.7), (2, 1.3), (2, 1.8), (3, 2.5)] {
            let spec = ProcessSpec::nth_fbm(n, h);
            let vals: Vec<f64> = (2..=8)
                .map(|p| spec.kernel(10f64.powi(-p), 0.8).abs())
                .collect();
            // Strictly shrinking until it reaches the roundoff floor.
            assert!(
                vals.windows(2).all(|w| w[1] < w[0] || w[1] < 1e-15),
                "{spec}: {vals:?}"
            );
            assert!(vals[6] < 1e-6, "{spec}: {vals:?}");
        }
    }

    #[test]
    fn nth_order_first_order_is_scaled_fbm() {
        for &h in &[0.2, 0.5, 0.8] {
            let scale = nth_order_constant(h);
            let nth = ProcessSpec::nth_fbm(1, h);
            let fbm = ProcessSpec::fbm(h);
            for &s in &probe_times() {
                for &t in &probe_times() {
                    assert_relative_eq!(
                        nth.kernel(s, t),
                        scale * fbm.kernel(s, t),
                        epsilon = 1e-13
                    );
                }
            }
        }
        // Brownian point: Γ(2) sin(π/2) = 1.
        assert_relative_eq!(nth_order_constant(0.5), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nth_order_second_order_diagonal() {
        // C(t,t) = c (2H - 1) t^{2H} for n = 2.
        let h = 1.5;
        let spec = ProcessSpec::nth_fbm(2, h);
        let t: f64 = 0.7;
        let expected = nth_order_constant(h) * (2.0 * h - 1.0) * t.powf(2.0 * h);
        assert_relative_eq!(spec.kernel(t, t), expected, max_relative = 1e-12);
    }

    #[test]
    fn covariance_matrix_examples() {
        let m = covariance_matrix(&ProcessSpec::fbm(0.5), &[0.5, 1.0]).unwrap();
        assert_eq!(m[(0, 0)], 0.5);
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(m[(1, 0)], 0.5);
        assert_eq!(m[(1, 1)], 1.0);
        let spec = ProcessSpec::trifbm(0.6, 0.5);
        let one = covariance_matrix(&spec, &[1.0]).unwrap();
        assert_eq!(one[(0, 0)], spec.covariance(1.0, 1.0).unwrap());
        assert!(matches!(
            covariance_matrix(&spec, &[0.0, 1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            covariance_matrix(&spec, &[0.5, 0.5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gamma_exponent_examples() {
        assert_relative_eq!(gamma_exponent(0.6, 0.5).unwrap(), 1.0);
        assert_relative_eq!(
            gamma_exponent(0.9, 0.9).unwrap(),
            1.0 / 0.38,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            gamma_exponent(0.9, 0.9).unwrap(),
            2.631_578_9,
            epsilon = 1e-7
        );
        assert_relative_eq!(
            gamma_exponent(0.4, 1.5).unwrap(),
            1.666_666_7,
            epsilon = 1e-7
        );
        // K = 1 boundary takes the first branch.
        assert_relative_eq!(
            gamma_exponent(0.8, 1.0).unwrap(),
            1.0 / (2.0 - 1.6),
            epsilon = 1e-12
        );
        assert!(gamma_exponent(0.8, 1.5).is_err());
    }

    #[test]
    fn jump_examples() {
        let bm = baxter_jump(&ProcessSpec::fbm(0.5), 0.5, &DEFAULT_H_SCHEDULE, 1.0).unwrap();
        assert!(bm.converged);
        assert!((bm.jump - 1.0).abs() < 1e-6, "{bm:?}");
        assert!((bm.d_minus - 1.0).abs() < 1e-6 && bm.d_plus.abs() < 1e-6);

        let smooth = baxter_jump(&ProcessSpec::fbm(0.7), 0.5, &DEFAULT_H_SCHEDULE, 1.0).unwrap();
        assert!(smooth.converged);
        assert!(smooth.jump.abs() < 1e-3, "{smooth:?}");

        let rough = baxter_jump(&ProcessSpec::fbm(0.3), 0.5, &DEFAULT_H_SCHEDULE, 1.0).unwrap();
        assert!(!rough.converged);

        assert!(matches!(
            baxter_jump(&ProcessSpec::fbm(0.5), 0.005, &DEFAULT_H_SCHEDULE, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            baxter_jump(&ProcessSpec::fbm(0.5), 0.995, &DEFAULT_H_SCHEDULE, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(baxter_jump(&ProcessSpec::fbm(0.5), 0.5, &[1e-3, 1e-2], 1.0).is_err());
    }

    #[test]
    fn integral_examples() {
        let bm = baxter_integral(&ProcessSpec::fbm(0.5), 0.01, 1.01).unwrap();
        assert!((bm - 1.0).abs() < 1e-3, "{bm}");
        let smooth = baxter_integral(&ProcessSpec::fbm(0.7), 0.1, 1.1).unwrap();
        assert!(smooth.abs() < 1e-3, "{smooth}");
        assert!(matches!(
            baxter_integral(&ProcessSpec::fbm(0.3), 0.1, 1.1),
            Err(Error::DivergentJump { .. })
        ));
        assert!(baxter_integral(&ProcessSpec::fbm(0.5), 0.5, 0.2).is_err());
    }

    fn min_eigenvalue(spec: ProcessSpec, n: usize) -> (f64, f64) {
        let times: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let m = covariance_matrix(&spec, &times).unwrap();
        let eig = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    #[test]
    fn covariance_matrices_are_psd() {
        let specs = [
            ProcessSpec::fbm(0.1),
            ProcessSpec::fbm(0.5),
            ProcessSpec::fbm(0.9),
            ProcessSpec::bifbm(0.6, 0.5),
            ProcessSpec::bifbm(0.4, 1.5),
            ProcessSpec::bifbm(0.2, 1.0),
            ProcessSpec::trifbm(0.5, 0.8),
            ProcessSpec::trifbm(0.4, 0.5),
            ProcessSpec::trifbm(0.9, 0.3),
            ProcessSpec::nth_fbm(1, 0.7),
            ProcessSpec::nth_fbm(2, 1.3),
            ProcessSpec::nth_fbm(3, 2.6),
        ];
        for spec in specs {
            for n in [16, 64, 128] {
                let (min, max) = min_eigenvalue(spec, n);
                let diag = (1..=n)
                    .map(|i| spec.kernel(i as f64 / n as f64, i as f64 / n as f64))
                    .fold(0.0, f64::max);
                assert!(
                    min >= -1e-9 * diag,
                    "{spec} n={n}: min eigenvalue {min}, max {max}"
                );
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn kernels_are_symmetric(s in 0.0f64..2.0, t in 0.0f64..2.0, h in 0.05f64..0.95, k in 0.05f64..0.95) {
            for spec in [
                ProcessSpec::fbm(h),
                ProcessSpec::bifbm(h, k),
                ProcessSpec::bifbm(h, 1.0 + k / 2.0),
                ProcessSpec::trifbm(h, k),
                ProcessSpec::nth_fbm(2, 1.0 + h),
            ] {
                if spec.validate().is_ok() {
                    proptest::prop_assert_eq!(spec.covariance(s, t).unwrap(), spec.covariance(t, s).unwrap());
                }
            }
        }

        #[test]
        fn bifbm_increment_variance_bounds(
            s in 0.001f64..1.0,
            t in 0.001f64..1.0,
            h in 0.05f64..0.95,
            k in 0.05f64..1.0,
        ) {
            let spec = ProcessSpec::bifbm(h, k);
            let v = spec.increment_variance(s, t);
            let d = (t - s).abs().powf(2.0 * h * k);
            let slack = 1e-12 * (1.0 + spec.kernel(s, s) + spec.kernel(t, t));
            proptest::prop_assert!(v >= 2f64.powf(-k) * d - slack, "{v} < lower bound");
            proptest::prop_assert!(v <= 2f64.powf(1.0 - k) * d + slack, "{v} > upper bound");
        }
    }
}
