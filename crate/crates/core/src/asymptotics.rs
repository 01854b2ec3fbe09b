//! First-order spectral asymptotics and the special functions behind them:
//! the phase θ of the boundary problem, the constant b_α, the canonical
//! factor X, the weight h and the boundary-layer density ρ₀.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::model::ModelParams;
use crate::quad::{integrate_semi_axis, QuadGrid, Tolerance};
use crate::spectral_oracle::{EigenPair, PhiSource, Spectrum, SpectrumDiagnostics, SpectrumMethod};

/// Closed form b_α = sin(π(1-α)/(2(3-α))) / sin(π/(3-α)).
pub fn b_alpha_closed(alpha: f64) -> f64 {
    let w = PI / (3.0 - alpha);
    (0.5 * w * (1.0 - alpha)).sin() / w.sin()
}

/// Phase shift ¼(H-½)(H-3/2)/(H+½).
pub fn eta_h(hurst: f64) -> f64 {
    0.25 * (hurst - 0.5) * (hurst - 1.5) / (hurst + 0.5)
}

/// Two-term frequency (n-½)π - (H-½)²/(H+½)·π/2.
pub fn nu_first_order(n: usize, hurst: f64) -> f64 {
    (n as f64 - 0.5) * PI - (hurst - 0.5).powi(2) / (hurst + 0.5) * 0.5 * PI
}

/// sin(πH)Γ(2H+1), the leading constant of the eigenvalue law.
pub fn lambda_constant(hurst: f64) -> f64 {
    (PI * hurst).sin() * statrs::function::gamma::gamma(2.0 * hurst + 1.0)
}

/// Eigenvalue associated with a frequency: sin(πH)Γ(2H+1)ν^{1-2H}/(ν²+β²).
pub fn lambda_from_nu(nu: f64, hurst: f64, beta: f64) -> f64 {
    lambda_constant(hurst) * nu.powf(1.0 - 2.0 * hurst) / (nu * nu + beta * beta)
}

/// ∫₀¹φ_n = -√((3-α)/(1+b_α²))/ν_n with ν_n from [`nu_first_order`].
pub fn phi_integral_first_order(n: usize, hurst: f64) -> f64 {
    let alpha = 2.0 - 2.0 * hurst;
    let b = b_alpha_closed(alpha);
    -((3.0 - alpha) / (1.0 + b * b)).sqrt() / nu_first_order(n, hurst)
}

/// Phase θ(u; ν) of the boundary-value problem, in the variable scaled by
/// the frequency: θ = atan2(sin φ, B(u)) with φ = (1-α)π/2 and
/// B(u) = (u² - r²)/(1 + r²)·u^{1-α} + cos φ, r = β/ν.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaProfile {
    pub alpha: f64,
    /// Drift-to-frequency ratio r = β/ν.
    pub ratio: f64,
    sin_phase: f64,
    cos_phase: f64,
}

impl ThetaProfile {
    pub fn new(alpha: f64, ratio: f64) -> Self {
        let phase = 0.5 * (1.0 - alpha) * PI;
        Self { alpha, ratio, sin_phase: phase.sin(), cos_phase: phase.cos() }
    }

    /// The ν → ∞ limit (r = 0).
    pub fn limit(alpha: f64) -> Self {
        Self::new(alpha, 0.0)
    }

    pub fn for_frequency(alpha: f64, beta: f64, nu: f64) -> Self {
        Self::new(alpha, beta / nu)
    }

    /// (1-α)π/2, the value of θ at 0+.
    pub fn phase(&self) -> f64 {
        0.5 * (1.0 - self.alpha) * PI
    }

    fn denominator(&self, u: f64) -> f64 {
        let r2 = self.ratio * self.ratio;
        (u * u - r2) / (1.0 + r2) * u.powf(1.0 - self.alpha) + self.cos_phase
    }

    pub fn theta(&self, u: f64) -> f64 {
        self.sin_phase.atan2(self.denominator(u))
    }

    /// Odd extension θ(-u) = -θ(u).
    pub fn theta_signed(&self, u: f64) -> f64 {
        if u >= 0.0 {
            self.theta(u)
        } else {
            -self.theta(-u)
        }
    }

    /// θ'(u), differentiated analytically.
    pub fn theta_prime(&self, u: f64) -> f64 {
        let a = self.alpha;
        let r2 = self.ratio * self.ratio;
        let b = self.denominator(u);
        let db = ((3.0 - a) * u.powf(2.0 - a) - (1.0 - a) * r2 * u.powf(-a)) / (1.0 + r2);
        -self.sin_phase * db / (self.sin_phase * self.sin_phase + b * b)
    }

    /// γ(u) = |(u² - r²)/(1 + r²) + u^{α-1}e^{iφ}|.
    pub fn gamma(&self, u: f64) -> f64 {
        let b = self.denominator(u);
        u.powf(self.alpha - 1.0) * (b * b + self.sin_phase * self.sin_phase).sqrt()
    }

    /// sin θ(u) / γ(u), computed without cancellation.
    pub fn sin_over_gamma(&self, u: f64) -> f64 {
        let b = self.denominator(u);
        self.sin_phase * u.powf(1.0 - self.alpha) / (b * b + self.sin_phase * self.sin_phase)
    }

    /// Smallest value of the arctangent denominator on u > 0.
    pub fn min_denominator(&self) -> f64 {
        let a = self.alpha;
        if a >= 1.0 || self.ratio == 0.0 {
            return self.cos_phase;
        }
        let r2 = self.ratio * self.ratio;
        let u = ((1.0 - a) * r2 / (3.0 - a)).sqrt();
        self.denominator(u)
    }

    /// Points where the integrands built from θ change character.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![1.0];
        let r = self.ratio.abs();
        if r > 0.0 {
            pts.push(r);
            pts.push(((1.0 - self.alpha).abs() * r * r / (3.0 - self.alpha)).sqrt());
        }
        pts
    }
}

/// θ₀(u) = θ(u; ∞).
pub fn theta0(u: f64, alpha: f64) -> Result<f64> {
    if !(u > 0.0) {
        return domain("θ is evaluated on u > 0");
    }
    Ok(ThetaProfile::limit(alpha).theta(u))
}

/// θ(u; ν) for the given profile.
pub fn theta(u: f64, profile: &ThetaProfile) -> Result<f64> {
    if !(u > 0.0) {
        return domain("θ is evaluated on u > 0");
    }
    Ok(profile.theta(u))
}

fn special_tol() -> Tolerance {
    Tolerance::new(1e-15, 1e-13)
}

/// b_α(β, ν) = (1/π)∫₀^∞ θ(u; ν) du.
pub fn b_alpha_numeric(beta: f64, nu: f64, alpha: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return domain("frequency must be positive");
    }
    let profile = ThetaProfile::for_frequency(alpha, beta, nu);
    b_alpha_profile(&profile)
}

pub(crate) fn b_alpha_profile(profile: &ThetaProfile) -> Result<f64> {
    if alpha_is_one(profile.alpha) {
        return Ok(0.0);
    }
    if profile.min_denominator() <= 0.05 * profile.cos_phase.abs() {
        return domain(format!(
            "frequency too small: the phase denominator is not bounded away from zero (ratio {})",
            profile.ratio
        ));
    }
    let v = integrate_semi_axis(|u| profile.theta(u), &profile.breakpoints(), special_tol())?;
    Ok(v / PI)
}

fn alpha_is_one(alpha: f64) -> bool {
    (alpha - 1.0).abs() < 1e-15
}

/// Canonical factor X(z) = exp((1/π)∫₀^∞ θ(t)/(t - z) dt) for z off the
/// cut [0, ∞).
pub fn x_cauchy(z: Complex64, profile: &ThetaProfile) -> Result<Complex64> {
    if z.im == 0.0 && z.re >= 0.0 {
        return domain(format!("X is not defined on the cut: z = {z}"));
    }
    if alpha_is_one(profile.alpha) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut pts = profile.breakpoints();
    if z.re > 0.0 {
        let d = z.im.abs();
        pts.extend([z.re, z.re - d, z.re + d, z.re - 10.0 * d, z.re + 10.0 * d]);
    }
    pts.push(z.norm());
    let v = if z.im == 0.0 {
        Complex64::new(integrate_semi_axis(|t| profile.theta(t) / (t - z.re), &pts, special_tol())?, 0.0)
    } else {
        integrate_semi_axis(|t| profile.theta(t) / (t - z), &pts, special_tol())?
    };
    Ok((v / PI).exp())
}

/// X(-u) for u > 0 (real-valued).
pub fn x_negative(u: f64, profile: &ThetaProfile) -> Result<f64> {
    if !(u > 0.0) {
        return domain("X(-u) needs u > 0");
    }
    if alpha_is_one(profile.alpha) {
        return Ok(1.0);
    }
    let mut pts = profile.breakpoints();
    pts.push(u);
    let v = integrate_semi_axis(|t| profile.theta(t) / (t + u), &pts, special_tol())?;
    Ok((v / PI).exp())
}

/// Quadrature strategy for the logarithmic integral in [`h_weight`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogIntegral {
    /// Integrate θ'(s) log|(t+s)/(t-s)| directly, splitting at s = t.
    SplitAtSingularity,
    /// Integrate by parts to -2t∫(θ(s) - θ(t))/(t² - s²) ds, whose
    /// integrand is bounded.
    ByParts,
}

/// h(t) = exp(-(1/π)∫₀^∞ θ'(s) log|(t+s)/(t-s)| ds)·sin θ(t).
pub fn h_weight(t: f64, profile: &ThetaProfile) -> Result<f64> {
    h_weight_with(t, profile, LogIntegral::SplitAtSingularity)
}

pub fn h_weight_with(t: f64, profile: &ThetaProfile, method: LogIntegral) -> Result<f64> {
    if !(t > 0.0) {
        return domain("h is evaluated on t > 0");
    }
    if alpha_is_one(profile.alpha) {
        return Ok(0.0);
    }
    let mut pts = profile.breakpoints();
    pts.extend([0.5 * t, t, 2.0 * t]);
    let integral = match method {
        LogIntegral::SplitAtSingularity => integrate_semi_axis(
            |s| {
                let l = ((t + s) / (t - s)).abs().ln();
                if l.is_finite() {
                    profile.theta_prime(s) * l
                } else {
                    0.0
                }
            },
            &pts,
            special_tol(),
        )?,
        LogIntegral::ByParts => {
            let th_t = profile.theta(t);
            let slope = profile.theta_prime(t);
            -2.0 * t
                * integrate_semi_axis(
                    |s| {
                        let d = t - s;
                        if d.abs() <= 1e-7 * t {
                            // Removable point: (θ(s) - θ(t))/(t - s) → -θ'(t).
                            -slope / (t + s)
                        } else {
                            (profile.theta(s) - th_t) / (d * (t + s))
                        }
                    },
                    &pts,
                    special_tol(),
                )?
        }
    };
    Ok((-integral / PI).exp() * profile.theta(t).sin())
}

/// γ₀(u) = |u + u^{α-2}e^{i(1-α)π/2}|.
pub fn gamma0(u: f64, alpha: f64) -> f64 {
    let phase = 0.5 * (1.0 - alpha) * PI;
    let w = u.powf(alpha - 2.0);
    ((u + w * phase.cos()).powi(2) + (w * phase.sin()).powi(2)).sqrt()
}

/// Boundary-layer density ρ₀(u) = sin θ₀(u)/γ₀(u)·X₀(-u).
pub fn rho0(u: f64, alpha: f64) -> Result<f64> {
    if !(u > 0.0) {
        return domain("ρ₀ is evaluated on u > 0");
    }
    if alpha_is_one(alpha) {
        return Ok(0.0);
    }
    let profile = ThetaProfile::limit(alpha);
    Ok(profile.theta(u).sin() / gamma0(u, alpha) * x_negative(u, &profile)?)
}

/// X₀(i), the ν → ∞ limit of the canonical factor at i.
pub fn x0_at_i(alpha: f64) -> Result<Complex64> {
    x_cauchy(Complex64::new(0.0, 1.0), &ThetaProfile::limit(alpha))
}

/// Constants derived from α, with the numeric b_α when a frequency is given.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpecialConstants {
    pub b_alpha: f64,
    pub b_alpha_nu: Option<f64>,
    pub eta_h: f64,
    pub x0_at_i: Complex64,
}

pub fn special_constants(hurst: f64, beta_nu: Option<(f64, f64)>) -> Result<SpecialConstants> {
    let alpha = 2.0 - 2.0 * hurst;
    Ok(SpecialConstants {
        b_alpha: b_alpha_closed(alpha),
        b_alpha_nu: match beta_nu {
            Some((b, nu)) => Some(b_alpha_numeric(b, nu, alpha)?),
            None => None,
        },
        eta_h: eta_h(hurst),
        x0_at_i: x0_at_i(alpha)?,
    })
}

/// Tabulated boundary-layer densities for the first-order eigenfunctions
/// √2 sin(ν_n x + πη_H) - ∫₀^∞[e^{-xν_n u}f₀(u) + (-1)ⁿe^{-(1-x)ν_n u}f₁(u)]du
/// with f₀ = -(√(3-α)/π)ρ₀(u)(u - b_α)/√(1+b_α²) and f₁ = (√(3-α)/π)ρ₀(u).
#[derive(Debug, Clone)]
pub struct FirstOrderModel {
    pub hurst: f64,
    pub alpha: f64,
    pub b_alpha: f64,
    phase: f64,
    layer_grid: QuadGrid,
    left_density: Vec<f64>,
    right_density: Vec<f64>,
}

impl FirstOrderModel {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return domain(format!("Hurst exponent {hurst} must lie in (0, 1)"));
        }
        let alpha = 2.0 - 2.0 * hurst;
        let b = b_alpha_closed(alpha);
        let layer_grid = QuadGrid::log_spaced(1e-10, 1e6, 32, 16)?;
        let rho: Vec<f64> = layer_grid
            .nodes
            .par_iter()
            .map(|&u| rho0(u, alpha))
            .collect::<Result<_>>()?;
        let c = (3.0 - alpha).sqrt() / PI;
        let norm = (1.0 + b * b).sqrt();
        let left_density = rho
            .iter()
            .zip(&layer_grid.nodes)
            .zip(&layer_grid.weights)
            .map(|((r, u), w)| -c * r * (u - b) / norm * w)
            .collect();
        let right_density =
            rho.iter().zip(&layer_grid.weights).map(|(r, w)| c * r * w).collect();
        Ok(Self {
            hurst,
            alpha,
            b_alpha: b,
            phase: PI * eta_h(hurst),
            layer_grid,
            left_density,
            right_density,
        })
    }

    /// First-order eigenfunction in its natural sign (positive integral).
    pub fn phi(&self, x: f64, n: usize) -> f64 {
        let nu = nu_first_order(n, self.hurst);
        let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut layer = 0.0;
        for ((u, f0), f1) in self.layer_grid.nodes.iter().zip(&self.left_density).zip(&self.right_density) {
            layer += (-x * nu * u).exp() * f0 + parity * (-(1.0 - x) * nu * u).exp() * f1;
        }
        SQRT_2 * (nu * x + self.phase).sin() - layer
    }
}

/// First-order eigenfunction value at x in [0, 1].
pub fn phi_first_order(x: f64, n: usize, hurst: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || n == 0 {
        return domain("need x in [0, 1] and n >= 1");
    }
    Ok(FirstOrderModel::new(hurst)?.phi(x, n))
}

/// Spectrum from the first-order formulas for the operator of `params`
/// rescaled to [0, 1]. Eigenfunctions are sampled on `grid` when given and
/// follow the negative-integral sign convention.
pub fn first_order_spectrum(params: &ModelParams, n_max: usize, grid: Option<&QuadGrid>) -> Result<Spectrum> {
    params.validate()?;
    let unit = params.rescaled();
    let model = Arc::new(FirstOrderModel::new(unit.hurst)?);
    let pairs = (1..=n_max)
        .map(|n| {
            let nu = nu_first_order(n, unit.hurst);
            let phi = grid
                .map(|g| g.nodes.iter().map(|&x| -model.phi(x, n)).collect())
                .unwrap_or_default();
            EigenPair {
                n,
                lambda: lambda_from_nu(nu, unit.hurst, unit.drift),
                nu: Some(nu),
                phi,
                phi1: -model.phi(1.0, n),
                phi_integral: phi_integral_first_order(n, unit.hurst),
            }
        })
        .collect();
    Ok(Spectrum {
        method: SpectrumMethod::FirstOrder,
        pairs,
        params: unit,
        grid: grid.cloned(),
        source: PhiSource::FirstOrder(model),
        diagnostics: SpectrumDiagnostics::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_constants() {
        assert_eq!(b_alpha_closed(1.0), 0.0);
        assert!((b_alpha_closed(1e-12) - 1.0 / 3f64.sqrt()).abs() < 1e-11);
        assert!((b_alpha_closed(0.6) - 0.267_949).abs() < 1e-6);
        assert_eq!(eta_h(0.5), 0.0);
        assert!((eta_h(0.75) + 0.0375).abs() < 1e-15);
        assert!((eta_h(0.25) - 0.104_167).abs() < 1e-6);
        assert_eq!(nu_first_order(3, 0.5), 2.5 * PI);
        assert!((nu_first_order(1, 0.7) - 1.518_436).abs() < 1e-6);
        assert!((nu_first_order(5, 0.25) - 14.006_267).abs() < 1e-6);
        assert!((lambda_from_nu(3.0, 0.5, 0.0) - 1.0 / 9.0).abs() < 1e-15);
        assert!((lambda_from_nu(1.518_437, 0.7, -1.0) - 0.257_23).abs() < 1e-5);
        let nu = 1e6;
        let c = lambda_from_nu(nu, 0.7, 2.0) * nu.powf(2.4);
        assert!((c / lambda_constant(0.7) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phase_identity() {
        // πη_H equals the phase atan(b_α) - (H - ½)π/2 rewritten.
        for h in [0.55, 0.7, 0.9] {
            let alpha = 2.0 - 2.0 * h;
            assert!((b_alpha_closed(alpha).atan() - (h - 0.5) * PI / (2.0 * h + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn theta_limits() {
        let p = ThetaProfile::limit(0.5);
        assert!((p.theta(1e-14) - 0.25 * PI).abs() < 1e-8);
        assert!((p.theta(1.0) - PI / 8.0).abs() < 1e-15);
        assert!(p.theta(1e8) < 1e-10);
        assert!(theta(-1.0, &p).is_err());
        assert_eq!(p.theta_signed(-2.0), -p.theta(2.0));
        // θ₀ decreasing and positive
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let u = 1e-3 * 1.1f64.powi(k);
            let v = p.theta(u);
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn theta_derivative_is_exact() {
        let p = ThetaProfile::new(0.4, 0.3);
        for u in [0.05, 0.3, 1.0, 7.0] {
            let h = 1e-6 * u;
            let fd = (p.theta(u + h) - p.theta(u - h)) / (2.0 * h);
            assert!((fd - p.theta_prime(u)).abs() < 1e-7 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn theta_ratio_envelope() {
        // |θ(u;ν) - θ₀(u)| / r² stays bounded by a fixed multiple of
        // min(u^{1-α}, u^{α-3}) as r shrinks.
        let alpha = 0.4;
        let p0 = ThetaProfile::limit(alpha);
        let envelope = |u: f64| u.powf(1.0 - alpha).min(u.powf(alpha - 3.0));
        let mut scaled = Vec::new();
        for r in [0.1, 0.03, 0.01] {
            let p = ThetaProfile::new(alpha, r);
            let worst = (0..400)
                .map(|k| 1e-4 * 1.05f64.powi(k))
                .map(|u| (p.theta(u) - p0.theta(u)).abs() / (r * r * envelope(u)))
                .fold(0.0, f64::max);
            scaled.push(worst);
        }
        assert!(scaled.iter().all(|c| *c < 5.0), "{scaled:?}");
    }

    #[test]
    fn b_alpha_numeric_matches_closed_form() {
        for alpha in [0.2, 0.5, 0.8] {
            for nu in [5.0, 50.0] {
                let v = b_alpha_numeric(0.0, nu, alpha).unwrap();
                assert!((v - b_alpha_closed(alpha)).abs() < 1e-10, "alpha={alpha}: {v}");
            }
        }
        assert_eq!(b_alpha_numeric(0.7, 20.0, 1.0).unwrap(), 0.0);
        let v = b_alpha_numeric(1.0, 100.0, 0.6).unwrap();
        assert!((v - 0.267_949).abs() <= 1e-3);
    }

    #[test]
    fn x0_limit_values() {
        for alpha in [0.2, 0.5, 0.8] {
            let x = x0_at_i(alpha).unwrap();
            assert!((x.norm() - ((3.0 - alpha) / 2.0).sqrt()).abs() < 1e-9);
            assert!((x.arg() - (1.0 - alpha) * PI / 8.0).abs() < 1e-9);
        }
        let p = ThetaProfile::limit(1.0);
        assert_eq!(x_cauchy(Complex64::new(0.0, 1.0), &p).unwrap(), Complex64::new(1.0, 0.0));
        assert!(x_cauchy(Complex64::new(2.0, 0.0), &p).is_err());
    }

    #[test]
    fn x_boundary_jump() {
        let p = ThetaProfile::new(0.5, 0.05);
        for t in [0.3, 1.0, 4.0] {
            let d = 1e-7;
            let up = x_cauchy(Complex64::new(t, d), &p).unwrap();
            let down = x_cauchy(Complex64::new(t, -d), &p).unwrap();
            let target = Complex64::from_polar(1.0, 2.0 * p.theta(t));
            assert!((up / down - target).norm() < 1e-4, "t={t}");
        }
    }

    #[test]
    fn x_far_field() {
        let p = ThetaProfile::new(0.6, 0.02);
        let b = b_alpha_profile(&p).unwrap();
        let z = Complex64::new(-1e7, 0.0);
        let x = x_cauchy(z, &p).unwrap();
        assert!(((z * (1.0 - x)).re - b).abs() < 1e-4);
        assert!((x_negative(1e7, &p).unwrap() - x.re).abs() < 1e-14);
    }

    #[test]
    fn h_weight_two_strategies() {
        let p = ThetaProfile::limit(0.5);
        let a = h_weight_with(1.0, &p, LogIntegral::SplitAtSingularity).unwrap();
        let b = h_weight_with(1.0, &p, LogIntegral::ByParts).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        let p = ThetaProfile::new(0.3, 0.2);
        for t in [1e-6, 0.1, 0.2, 3.0, 100.0] {
            let a = h_weight_with(t, &p, LogIntegral::SplitAtSingularity).unwrap();
            let b = h_weight_with(t, &p, LogIntegral::ByParts).unwrap();
            assert!((a - b).abs() < 1e-9, "t={t}: {a} vs {b}");
        }
        let h0 = h_weight(1e-12, &ThetaProfile::limit(0.4)).unwrap();
        assert!((h0 - (0.3 * PI).sin()).abs() < 1e-5);
        assert_eq!(h_weight(1.0, &ThetaProfile::limit(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn rho0_behaviour() {
        assert_eq!(rho0(0.5, 1.0).unwrap(), 0.0);
        let alpha = 0.6;
        let s = (0.5 * (1.0 - alpha) * PI).sin();
        let tail: Vec<f64> = [1e3, 1e4, 1e5]
            .iter()
            .map(|&u: &f64| rho0(u, alpha).unwrap() * u.powf(3.0 - alpha) / s)
            .collect();
        assert!(tail.iter().all(|v| v.is_finite() && v.abs() < 1.0), "{tail:?}");
        let m = FirstOrderModel::new(0.7).unwrap();
        assert!(m.right_density.iter().sum::<f64>().is_finite());
    }

    #[test]
    fn first_order_eigenfunctions() {
        let m = FirstOrderModel::new(0.5).unwrap();
        for n in [1, 4] {
            for x in [0.0, 0.3, 1.0] {
                let exact = SQRT_2 * ((n as f64 - 0.5) * PI * x).sin();
                assert!((m.phi(x, n) - exact).abs() < 1e-14);
            }
        }
        let m = FirstOrderModel::new(0.7).unwrap();
        let target = (2.0 * 0.7 + 1.0f64).sqrt();
        for n in [30, 31] {
            let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((m.phi(1.0, n) + parity * target).abs() < 0.05 * target);
        }
        assert!((phi_integral_first_order(1, 0.5) + 2.0 * SQRT_2 / PI).abs() < 1e-15);
        let a = phi_integral_first_order(10, 0.7) * nu_first_order(10, 0.7);
        let b = phi_integral_first_order(40, 0.7) * nu_first_order(40, 0.7);
        assert!((a - b).abs() < 1e-14);
    }
}
