//! Model parameters and covariance kernels of fractional Brownian motion and
//! the fractional Ornstein-Uhlenbeck process.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quad::{FixedPowerRule, PowerWeightRule, QuadGrid};

/// Default Gauss-Legendre order for each one-dimensional kernel integral.
pub const DEFAULT_GL_ORDER: usize = 64;

/// Constants of the signal/observation system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Hurst exponent in (0, 1).
    pub hurst: f64,
    /// Drift coefficient of the signal (1/time).
    pub drift: f64,
    /// Observation gain, nonzero.
    pub gain: f64,
    /// Observation horizon, positive.
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(hurst: f64, drift: f64, gain: f64, horizon: f64) -> Result<Self> {
        let p = Self { hurst, drift, gain, horizon };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with unit gain and horizon.
    pub fn unit(hurst: f64, drift: f64) -> Result<Self> {
        Self::new(hurst, drift, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return domain(format!("Hurst exponent {} must lie in (0, 1)", self.hurst));
        }
        if !self.drift.is_finite() {
            return domain("drift must be finite");
        }
        if !(self.gain != 0.0 && self.gain.is_finite()) {
            return domain("observation gain must be nonzero and finite");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return domain(format!("horizon {} must be positive", self.horizon));
        }
        Ok(())
    }

    /// Exponent of the singular kernel, 2 - 2H.
    pub fn alpha(&self) -> f64 {
        2.0 - 2.0 * self.hurst
    }

    /// Drift of the equivalent problem rescaled to the unit interval.
    pub fn unit_drift(&self) -> f64 {
        self.drift * self.horizon
    }

    /// The same process rescaled to the unit interval (drift times horizon,
    /// unit horizon, same gain).
    pub fn rescaled(&self) -> Self {
        Self { drift: self.unit_drift(), horizon: 1.0, ..*self }
    }

    /// Factor T^{2H} relating the kernel on [0, T] to the rescaled kernel.
    pub fn covariance_scale(&self) -> f64 {
        self.horizon.powf(2.0 * self.hurst)
    }

    /// Factor μ²T^{2H+1} multiplying the rescaled operator in the
    /// Wiener-Hopf equation.
    pub fn signal_to_noise_scale(&self) -> f64 {
        self.gain * self.gain * self.horizon.powf(2.0 * self.hurst + 1.0)
    }
}

/// Covariance of fractional Brownian motion, ½(s^{2H} + t^{2H} - |s-t|^{2H}).
pub fn fbm_cov(s: f64, t: f64, hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return domain(format!("Hurst exponent {hurst} must lie in (0, 1)"));
    }
    if !(s >= 0.0 && t >= 0.0) {
        return domain("covariance arguments must be non-negative times");
    }
    Ok(fbm_cov_unchecked(s, t, 2.0 * hurst))
}

#[inline]
fn fbm_cov_unchecked(s: f64, t: f64, two_h: f64) -> f64 {
    0.5 * (s.powf(two_h) + t.powf(two_h) - (s - t).abs().powf(two_h))
}

/// expm1(x) / x, continuous at 0.
#[inline]
fn expm1_ratio(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

/// Per-time quantities reused by every kernel entry involving that time.
#[derive(Debug, Clone, Copy)]
struct TimeTerms {
    /// t^{2H}
    power: f64,
    /// ∫₀ᵗ e^{β(t-v)} dv
    drift_mass: f64,
    /// ∫₀ᵗ e^{β(t-v)} v^{2H} dv
    drift_moment: f64,
}

/// Evaluator of the fOU covariance E X_s X_t for X_t = β∫₀ᵗX + B^H_t.
///
/// The kernel is R + β(G(s,t) + G(t,s)) + β²J with R the fBm covariance. The
/// single and double drift integrals of R are reduced analytically to
/// one-dimensional integrals of the form ∫ x^{2H} g(x) dx with smooth g,
/// which are computed with a graded Gauss-Legendre rule. The representation
/// needs only continuity of R and so holds for every H in (0, 1).
#[derive(Debug, Clone)]
pub struct FouKernel {
    two_h: f64,
    drift: f64,
    rule: FixedPowerRule,
}

impl FouKernel {
    pub fn new(hurst: f64, drift: f64, gl_order: usize) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return domain(format!("Hurst exponent {hurst} must lie in (0, 1)"));
        }
        if gl_order < 2 {
            return domain("Gauss-Legendre order must be at least 2");
        }
        if !drift.is_finite() {
            return domain("drift must be finite");
        }
        Ok(Self { two_h: 2.0 * hurst, drift, rule: FixedPowerRule::new(gl_order, 4.0, 2.0 * hurst) })
    }

    pub fn hurst(&self) -> f64 {
        0.5 * self.two_h
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// ∫₀ᴸ x^{2H} f(x) dx.
    fn weighted(&self, len: f64, f: impl FnMut(f64) -> f64) -> f64 {
        self.rule.integrate(len, f)
    }

    /// ∫_lo^hi x^{2H} f(x) dx, by direct Gauss-Legendre when the panel is
    /// far from the origin and by difference of origin-anchored integrals
    /// otherwise.
    fn weighted_panel(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if lo >= hi - lo {
            let two_h = self.two_h;
            self.rule.integrate_plain(lo, hi, |x| x.powf(two_h) * f(x))
        } else {
            self.weighted(hi, &mut f) - self.weighted(lo, &mut f)
        }
    }

    fn time_terms(&self, t: f64) -> TimeTerms {
        let b = self.drift;
        TimeTerms {
            power: t.powf(self.two_h),
            drift_mass: t * expm1_ratio(b * t),
            drift_moment: self.weighted(t, |v| (b * (t - v)).exp()),
        }
    }

    /// ∫₀ʸ e^{β(y-v)} |x-v|^{2H} dv.
    fn shifted_moment(&self, x: f64, y: f64) -> f64 {
        let b = self.drift;
        if x <= y {
            self.weighted(x, |d| (b * (y - x + d)).exp())
                + self.weighted(y - x, |d| (b * (y - x - d)).exp())
        } else {
            self.weighted_panel(x - y, x, |d| (b * (y - x + d)).exp())
        }
    }

    /// ∫₀ˢ∫₀ᵗ e^{β(s-u)+β(t-v)} |u-v|^{2H} dv du for s ≤ t.
    fn double_moment(&self, s: f64, t: f64) -> f64 {
        let b = self.drift;
        let gap = t - s;
        let near = |w: f64| (b * (gap + w)).exp() * (s - w) * expm1_ratio(2.0 * b * (s - w));
        let mid_mass = s * expm1_ratio(2.0 * b * s);
        let mid = |x: f64| (b * (gap - x)).exp() * mid_mass;
        let far = |x: f64| (b * (x - gap)).exp() * (t - x) * expm1_ratio(2.0 * b * (t - x));
        self.weighted(s, near) + self.weighted(gap, mid) + self.weighted_panel(gap, t, far)
    }

    fn eval_terms(&self, s: f64, t: f64, ts: &TimeTerms, tt: &TimeTerms) -> f64 {
        let r = 0.5 * (ts.power + tt.power - (t - s).abs().powf(self.two_h));
        if self.drift == 0.0 {
            return r;
        }
        let b = self.drift;
        let g_st = 0.5 * (ts.power * tt.drift_mass + tt.drift_moment - self.shifted_moment(s, t));
        let g_ts = 0.5 * (tt.power * ts.drift_mass + ts.drift_moment - self.shifted_moment(t, s));
        let j = 0.5
            * (ts.drift_moment * tt.drift_mass + ts.drift_mass * tt.drift_moment
                - self.double_moment(s, t));
        r + b * (g_st + g_ts) + b * b * j
    }

    /// Kernel value; symmetric in its arguments by construction.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        if self.drift == 0.0 {
            return fbm_cov_unchecked(s, t, self.two_h);
        }
        self.eval_terms(s, t, &self.time_terms(s), &self.time_terms(t))
    }

    /// Kernel values K(x, t_j) for a fixed x against many points.
    pub fn row(&self, x: f64, points: &[f64]) -> Vec<f64> {
        let tx = self.time_terms(x);
        points
            .par_iter()
            .map(|&t| {
                let tt = self.time_terms(t);
                if x <= t {
                    self.eval_terms(x, t, &tx, &tt)
                } else {
                    self.eval_terms(t, x, &tt, &tx)
                }
            })
            .collect()
    }
}

/// fOU covariance E X_s X_t on [0, T] for the given parameters.
pub fn fou_cov(s: f64, t: f64, p: &ModelParams, gl_order: usize) -> Result<f64> {
    p.validate()?;
    if !(s >= 0.0 && t >= 0.0) {
        return domain("covariance arguments must be non-negative times");
    }
    if s > p.horizon * (1.0 + 1e-12) || t > p.horizon * (1.0 + 1e-12) {
        return domain(format!("times ({s}, {t}) exceed the horizon {}", p.horizon));
    }
    Ok(FouKernel::new(p.hurst, p.drift, gl_order)?.eval(s, t))
}

/// Constant (1 - α/2)(1 - α) of the singular kernel c|u-v|^{-α}.
pub fn singular_kernel_constant(alpha: f64) -> f64 {
    (1.0 - 0.5 * alpha) * (1.0 - alpha)
}

/// Quadrature settings for [`fou_cov_singular`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularQuadSpec {
    /// Number of geometrically shrinking panels toward each singular point.
    pub panels: usize,
    /// Ratio between consecutive panel widths.
    pub ratio: f64,
    /// Gauss-Legendre order per panel.
    pub order: usize,
}

impl Default for SingularQuadSpec {
    fn default() -> Self {
        Self { panels: 16, ratio: 0.5, order: 24 }
    }
}

/// fOU covariance for H > 1/2 from the double integral of the weakly
/// singular kernel c_α|u-v|^{-α} against the drift factors.
pub fn fou_cov_singular(s: f64, t: f64, p: &ModelParams, spec: SingularQuadSpec) -> Result<f64> {
    p.validate()?;
    if p.hurst <= 0.5 {
        return domain("the singular representation requires H > 1/2");
    }
    if !(s >= 0.0 && t >= 0.0) {
        return domain("covariance arguments must be non-negative times");
    }
    if spec.panels < 1 || !(spec.ratio > 0.0 && spec.ratio < 1.0) || spec.order < 2 {
        return domain("singular quadrature needs panels >= 1, ratio in (0,1), order >= 2");
    }
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    let alpha = p.alpha();
    let b = p.drift;
    // Grading exponent that turns d^{-α} dd into a smooth measure.
    let rule = PowerWeightRule::new(spec.order, 1.0 / (1.0 - alpha));
    let weighted_panel = |lo: f64, hi: f64, g: &dyn Fn(f64) -> f64| -> f64 {
        if hi <= lo {
            0.0
        } else if lo >= hi - lo {
            rule.integrate_plain(lo, hi, |d| d.powf(-alpha) * g(d))
        } else {
            rule.integrate(hi, -alpha, g) - rule.integrate(lo, -alpha, g)
        }
    };
    // ∫₀ˢ e^{β(s-u)} |u-v|^{-α} du
    let inner = |v: f64| -> f64 {
        if v <= s {
            rule.integrate(v, -alpha, |d| (b * (s - v + d)).exp())
                + rule.integrate(s - v, -alpha, |d| (b * (s - v - d)).exp())
        } else {
            weighted_panel(v - s, v, &|d| (b * (s - v + d)).exp())
        }
    };
    let outer = |v: f64| (b * (t - v)).exp() * inner(v);
    let mut total = graded_segment(&outer, 0.0, s, alpha, spec);
    if t > s {
        total += graded_segment(&outer, s, t, alpha, spec);
    }
    Ok(singular_kernel_constant(alpha) * total)
}

/// Integral of f over [a, b] where f behaves like |x - e|^{1-α} near both
/// endpoints e. Each half is split into geometrically shrinking panels and
/// the innermost panel uses the substitution x = e + δ y^{1/(1-α)}.
fn graded_segment(f: &dyn Fn(f64) -> f64, a: f64, b: f64, alpha: f64, spec: SingularQuadSpec) -> f64 {
    if b <= a {
        return 0.0;
    }
    let plain = PowerWeightRule::new(spec.order, 1.0);
    let graded = PowerWeightRule::new(spec.order, 1.0 / (1.0 - alpha));
    let half = 0.5 * (b - a);
    let mut total = 0.0;
    for (anchor, dir) in [(a, 1.0), (b, -1.0)] {
        let mut outer_w = half;
        for _ in 0..spec.panels {
            let inner_w = outer_w * spec.ratio;
            total += plain.integrate_plain(inner_w, outer_w, |d| f(anchor + dir * d));
            outer_w = inner_w;
        }
        total += graded.integrate(outer_w, 0.0, |d| f(anchor + dir * d));
    }
    total
}

/// Symmetric matrix of kernel values on a unit-interval grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    /// Row-major n×n values.
    pub values: Vec<f64>,
    pub grid: QuadGrid,
}

impl CovMatrix {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    pub fn trace_integral(&self) -> f64 {
        (0..self.dim()).map(|i| self.grid.weights[i] * self.get(i, i)).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Kernel matrix K_ij = K(t_i T, t_j T) on a unit-interval grid.
pub fn cov_matrix(grid: &QuadGrid, p: &ModelParams) -> Result<CovMatrix> {
    cov_matrix_with_order(grid, p, DEFAULT_GL_ORDER)
}

pub fn cov_matrix_with_order(grid: &QuadGrid, p: &ModelParams, gl_order: usize) -> Result<CovMatrix> {
    p.validate()?;
    grid.validate()?;
    if grid.domain != crate::quad::GridDomain::UnitInterval {
        return domain("covariance matrix needs a unit-interval grid");
    }
    let kernel = FouKernel::new(p.hurst, p.drift, gl_order)?;
    let times: Vec<f64> = grid.nodes.iter().map(|x| x * p.horizon).collect();
    Ok(CovMatrix { values: kernel_matrix(&kernel, &times), grid: grid.clone() })
}

/// Row-major symmetric matrix of kernel values; each entry is computed once
/// on the upper triangle and mirrored.
pub(crate) fn kernel_matrix(kernel: &FouKernel, times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let terms: Vec<TimeTerms> = if kernel.drift == 0.0 {
        Vec::new()
    } else {
        times.par_iter().map(|&t| kernel.time_terms(t)).collect()
    };
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in i..n {
            row[j] = if kernel.drift == 0.0 {
                fbm_cov_unchecked(times[i], times[j], kernel.two_h)
            } else {
                kernel.eval_terms(times[i], times[j], &terms[i], &terms[j])
            };
        }
    });
    for i in 0..n {
        for j in 0..i {
            values[i * n + j] = values[j * n + i];
        }
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tolerance};
    use proptest::prelude::*;

    /// Independent oracle: the defining drift integrals of R evaluated by
    /// nested adaptive quadrature.
    fn brute_force(s: f64, t: f64, hurst: f64, b: f64) -> f64 {
        let tol = Tolerance::new(1e-14, 1e-12);
        let r = |u: f64, v: f64| fbm_cov_unchecked(u, v, 2.0 * hurst);
        let split = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, at: f64| -> f64 {
            if at > lo && at < hi {
                integrate(f, lo, at, tol).unwrap().0 + integrate(f, at, hi, tol).unwrap().0
            } else {
                integrate(f, lo, hi, tol).unwrap().0
            }
        };
        let g1 = split(&|v| (b * (t - v)).exp() * r(s, v), 0.0, t, s);
        let g2 = split(&|u| (b * (s - u)).exp() * r(u, t), 0.0, s, t);
        let inner = |u: f64| split(&|v| (b * (t - v)).exp() * r(u, v), 0.0, t, u);
        let j = split(&|u| (b * (s - u)).exp() * inner(u), 0.0, s, t);
        r(s, t) + b * g1 + b * g2 + b * b * j
    }

    #[test]
    fn fbm_examples() {
        assert_eq!(fbm_cov(0.5, 1.0, 0.5).unwrap(), 0.5);
        assert!((fbm_cov(1.0, 2.0, 0.75).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((fbm_cov(0.7, 0.7, 0.3).unwrap() - 0.7f64.powf(0.6)).abs() < 1e-15);
        assert!(fbm_cov(0.5, 0.5, 1.0).is_err());
        assert!(fbm_cov(-0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn ou_variance_closed_form() {
        let p = ModelParams::unit(0.5, 1.0).unwrap();
        let v = fou_cov(1.0, 1.0, &p, 64).unwrap();
        let exact = (std::f64::consts::E.powi(2) - 1.0) / 2.0;
        assert!((v - exact).abs() < 1e-12 * exact, "{v} vs {exact}");
    }

    #[test]
    fn ou_covariance_closed_form() {
        for &b in &[1.0, -1.0, 2.5] {
            let p = ModelParams::unit(0.5, b).unwrap();
            for &(s, t) in &[(0.3, 0.8), (0.9, 0.2), (0.5, 0.5), (1e-3, 1.0)] {
                let m = f64::min(s, t);
                let exact = (b * (s + t)).exp() * (1.0 - (-2.0 * b * m).exp()) / (2.0 * b);
                let v = fou_cov(s, t, &p, 64).unwrap();
                assert!((v - exact).abs() < 1e-10 * exact.abs(), "b={b} {s},{t}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn matches_nested_quadrature() {
        for &h in &[0.3, 0.7] {
            for &(s, t) in &[(0.3, 0.8), (0.8, 0.3), (0.5, 0.5), (0.01, 0.011)] {
                let k = FouKernel::new(h, -1.0, 64).unwrap().eval(s, t);
                let o = brute_force(s, t, h, -1.0);
                assert!((k - o).abs() < 1e-9 * o.abs(), "H={h} ({s},{t}): {k} vs {o}");
            }
        }
        let k = FouKernel::new(0.7, -1.0, 64).unwrap().eval(0.3, 0.8);
        assert!((k - 0.139_630_813_004).abs() < 1e-11);
    }

    #[test]
    fn singular_representation_agrees() {
        let p = ModelParams::unit(0.75, 0.0).unwrap();
        let v = fou_cov_singular(1.0, 1.0, &p, SingularQuadSpec::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
        assert_eq!(singular_kernel_constant(0.5), 0.375);
        for &h in &[0.6, 0.75, 0.9] {
            let p = ModelParams::unit(h, -1.0).unwrap();
            for &(s, t) in &[(0.3, 0.8), (1.0, 1.0), (0.7, 0.2)] {
                let a = fou_cov_singular(s, t, &p, SingularQuadSpec::default()).unwrap();
                let b = fou_cov(s, t, &p, 64).unwrap();
                assert!((a - b).abs() < 1e-4 * b.abs(), "H={h} ({s},{t}): {a} vs {b}");
            }
        }
        assert!(fou_cov_singular(0.3, 0.4, &ModelParams::unit(0.5, 0.0).unwrap(), SingularQuadSpec::default()).is_err());
    }

    #[test]
    fn small_matrices() {
        let grid = QuadGrid::unit_gauss_legendre(2).unwrap();
        let m = cov_matrix(&grid, &ModelParams::unit(0.5, 0.0).unwrap()).unwrap();
        let (t1, t2) = (grid.nodes[0], grid.nodes[1]);
        assert_eq!(m.values, vec![t1, t1, t1, t2]);
        let grid = QuadGrid::unit_gauss_legendre(40).unwrap();
        let m = cov_matrix(&grid, &ModelParams::unit(0.3, -1.5).unwrap()).unwrap();
        assert_eq!(m.max_asymmetry(), 0.0);
        assert!((0..40).all(|i| m.get(i, i) > 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ModelParams::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.5, 0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(0.5, 0.0, 1.0, -1.0).is_err());
        let p = ModelParams::unit(0.5, 0.0).unwrap();
        assert!(fou_cov(0.1, 0.2, &p, 1).is_err());
        assert!(fou_cov(0.1, 2.0, &p, 8).is_err());
        assert_eq!(p.alpha(), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kernel_is_symmetric(h in 0.05f64..0.95, b in -3.0f64..3.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
            let k = FouKernel::new(h, b, 32).unwrap();
            prop_assert_eq!(k.eval(s, t), k.eval(t, s));
        }

        #[test]
        fn zero_drift_is_fbm(h in 0.05f64..0.95, s in 0.0f64..2.0, t in 0.0f64..2.0) {
            let p = ModelParams::new(h, 0.0, 1.0, 2.0).unwrap();
            let a = fou_cov(s, t, &p, 64).unwrap();
            let b = fbm_cov(s, t, h).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn scaling_law(h in 0.1f64..0.9, b in -2.0f64..2.0, s in 0.01f64..1.0, t in 0.01f64..1.0, horizon in 0.2f64..3.0) {
            let k_big = FouKernel::new(h, b, 64).unwrap().eval(s * horizon, t * horizon);
            let k_unit = FouKernel::new(h, b * horizon, 64).unwrap().eval(s, t);
            let scaled = horizon.powf(2.0 * h) * k_unit;
            prop_assert!((k_big - scaled).abs() <= 1e-6 * scaled.abs(), "{} vs {}", k_big, scaled);
        }
    }
}
