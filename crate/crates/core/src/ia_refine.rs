//! Refined eigenpairs from the integro-algebraic system: the auxiliary
//! integral equations are solved by fixed-point iteration, the frequency
//! condition Im{ξ η̄} = 0 is solved by bracketed root finding, and the
//! eigenfunction is recovered by Laplace inversion.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use std::sync::Arc;

use crate::asymptotics::{
    b_alpha_profile, h_weight, lambda_from_nu, nu_first_order, x_cauchy, x_negative, FirstOrderModel, ThetaProfile,
};
use crate::error_analysis::EigenSource;
use crate::error::{domain, Error, Result};
use crate::model::{ModelParams, DEFAULT_GL_ORDER};
use crate::quad::QuadGrid;
use crate::roots::brent;
use crate::spectral_oracle::{fix_sign, nystrom_extend, oracle_spectrum, EigenPair, Spectrum, SpectrumMethod};

/// Numerical settings of the refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IaConfig {
    /// Upper end of the exponential variable u = νs; e^{-u_max} is negligible.
    pub u_max: f64,
    /// Number of geometrically graded panels toward u = 0.
    pub levels: usize,
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Sup-norm stopping threshold of the fixed-point iteration.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Smallest admissible frequency.
    pub nu_min: f64,
    /// Half-width of the root bracket around the first-order frequency.
    pub bracket: f64,
    /// Smallest index refined.
    pub n_min: usize,
    /// Root tolerance in ν.
    pub nu_tol: f64,
    /// Panels of the log-spaced grid used for the boundary-layer integrals.
    pub layer_panels: usize,
}

impl Default for IaConfig {
    fn default() -> Self {
        Self {
            u_max: 40.0,
            levels: 40,
            order: 16,
            fp_tol: 1e-12,
            fp_max_iter: 200,
            nu_min: 1.0,
            bracket: 0.3,
            n_min: 3,
            nu_tol: 1e-13,
            layer_panels: 40,
        }
    }
}

/// Discretized solutions of the four auxiliary equations
/// p(t) = ±(1/π)∫₀^∞ h_β(s)e^{-νs}/(s+t) p(s) ds + t^j.
#[derive(Debug, Clone)]
pub struct PSolution {
    pub nu: f64,
    /// Nodes in the variable s = u/ν with quadrature weights.
    pub grid: QuadGrid,
    /// Kernel weights (1/π) w_j h_β(s_j) e^{-ν s_j}.
    pub kernel_weights: Vec<f64>,
    pub p0_plus: Vec<f64>,
    pub p0_minus: Vec<f64>,
    pub p1_plus: Vec<f64>,
    pub p1_minus: Vec<f64>,
    /// Largest fixed-point iteration count among the four equations.
    pub iterations: usize,
    /// Largest ratio of successive iterate changes (weighted L²).
    pub contraction_ratio: f64,
}

impl PSolution {
    fn samples(&self, plus: bool, power: u32) -> &[f64] {
        match (plus, power) {
            (true, 0) => &self.p0_plus,
            (false, 0) => &self.p0_minus,
            (true, _) => &self.p1_plus,
            (false, _) => &self.p1_minus,
        }
    }

    /// Extension of p^±_j to z off the negative real axis.
    pub fn eval(&self, plus: bool, power: u32, z: Complex64) -> Complex64 {
        let sign = if plus { 1.0 } else { -1.0 };
        let p = self.samples(plus, power);
        let mut acc = Complex64::new(0.0, 0.0);
        for ((s, w), v) in self.grid.nodes.iter().zip(&self.kernel_weights).zip(p) {
            acc += w * v / (s + z);
        }
        sign * acc + z.powu(power)
    }

    /// p^±_j at a real point t ≥ 0.
    pub fn eval_real(&self, plus: bool, power: u32, t: f64) -> f64 {
        let sign = if plus { 1.0 } else { -1.0 };
        let p = self.samples(plus, power);
        let acc: f64 = self
            .grid
            .nodes
            .iter()
            .zip(&self.kernel_weights)
            .zip(p)
            .map(|((s, w), v)| w * v / (s + t))
            .sum();
        sign * acc + t.powi(power as i32)
    }

    /// a_±(z) = p⁺₀(z) ± p⁻₀(z).
    pub fn a(&self, plus: bool, z: Complex64) -> Complex64 {
        let m = if plus { 1.0 } else { -1.0 };
        self.eval(true, 0, z) + m * self.eval(false, 0, z)
    }

    /// b_±(z) = p⁺₁(z) ± p⁻₁(z).
    pub fn b(&self, plus: bool, z: Complex64) -> Complex64 {
        let m = if plus { 1.0 } else { -1.0 };
        self.eval(true, 1, z) + m * self.eval(false, 1, z)
    }

    fn a_real(&self, plus: bool, t: f64) -> f64 {
        let m = if plus { 1.0 } else { -1.0 };
        self.eval_real(true, 0, t) + m * self.eval_real(false, 0, t)
    }

    fn b_real(&self, plus: bool, t: f64) -> f64 {
        let m = if plus { 1.0 } else { -1.0 };
        self.eval_real(true, 1, t) + m * self.eval_real(false, 1, t)
    }

    /// Estimate of the L²(ℝ₊) norm of the integral operator by power
    /// iteration on its symmetrized discretization.
    pub fn operator_norm(&self) -> f64 {
        let n = self.grid.len();
        let s = &self.grid.nodes;
        let sw: Vec<f64> = self.grid.weights.iter().map(|w| w.sqrt()).collect();
        let g: Vec<f64> = self
            .kernel_weights
            .iter()
            .zip(&self.grid.weights)
            .map(|(k, w)| k / w)
            .collect();
        let m = |i: usize, j: usize| sw[i] * sw[j] * g[j] / (s[i] + s[j]);
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut est = 0.0;
        for _ in 0..100 {
            let mv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m(i, j) * v[j]).sum()).collect();
            let mtmv: Vec<f64> = (0..n).map(|j| (0..n).map(|i| m(i, j) * mv[i]).sum()).collect();
            let norm = mtmv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm.sqrt();
            v = mtmv.iter().map(|x| x / norm).collect();
            if (next - est).abs() <= 1e-10 * next {
                return next;
            }
            est = next;
        }
        est
    }
}

fn check_params(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if params.hurst < 0.5 {
        return domain("the integro-algebraic refinement covers H in [1/2, 1) only");
    }
    Ok(params.alpha())
}

/// Solve the four auxiliary integral equations at frequency ν for the
/// operator of `params` on the unit interval.
pub fn solve_p(nu: f64, params: &ModelParams, cfg: &IaConfig) -> Result<PSolution> {
    let alpha = check_params(params)?;
    if !(nu >= cfg.nu_min) {
        return domain(format!("frequency {nu} is below the minimum {}", cfg.nu_min));
    }
    let profile = ThetaProfile::for_frequency(alpha, params.drift, nu);
    let ugrid = QuadGrid::semi_axis_graded(cfg.u_max, cfg.levels, cfg.order)?;
    let grid = QuadGrid {
        nodes: ugrid.nodes.iter().map(|u| u / nu).collect(),
        weights: ugrid.weights.iter().map(|w| w / nu).collect(),
        domain: ugrid.domain,
    };
    let h: Vec<f64> = grid.nodes.par_iter().map(|&s| h_weight(s, &profile)).collect::<Result<_>>()?;
    let kernel_weights: Vec<f64> = h
        .iter()
        .zip(&grid.weights)
        .zip(&ugrid.nodes)
        .map(|((h, w), u)| w * h * (-u).exp() / PI)
        .collect();

    let mut iterations = 0;
    let mut contraction_ratio: f64 = 0.0;
    let mut solve = |sign: f64, power: i32| -> Result<Vec<f64>> {
        let s = &grid.nodes;
        let rhs: Vec<f64> = s.iter().map(|t| t.powi(power)).collect();
        let mut p = rhs.clone();
        let mut prev_change: Option<f64> = None;
        for it in 1..=cfg.fp_max_iter {
            let next: Vec<f64> = (0..s.len())
                .map(|i| {
                    let acc: f64 = (0..s.len()).map(|j| kernel_weights[j] * p[j] / (s[i] + s[j])).sum();
                    sign * acc + rhs[i]
                })
                .collect();
            let sup = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let l2 = next
                .iter()
                .zip(&p)
                .zip(&grid.weights)
                .map(|((a, b), w)| w * (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            p = next;
            if let Some(prev) = prev_change {
                if prev > 1e-13 {
                    let ratio = l2 / prev;
                    if ratio >= 1.0 {
                        return Err(Error::NotContracting { nu, ratio });
                    }
                    contraction_ratio = contraction_ratio.max(ratio);
                }
            }
            prev_change = Some(l2);
            if sup < cfg.fp_tol {
                iterations = iterations.max(it);
                return Ok(p);
            }
        }
        Err(Error::IterationCap { iterations: cfg.fp_max_iter, change: prev_change.unwrap_or(f64::NAN) })
    };
    let p0_plus = solve(1.0, 0)?;
    let p0_minus = solve(-1.0, 0)?;
    let p1_plus = solve(1.0, 1)?;
    let p1_minus = solve(-1.0, 1)?;
    Ok(PSolution {
        nu,
        grid,
        kernel_weights,
        p0_plus,
        p0_minus,
        p1_plus,
        p1_minus,
        iterations,
        contraction_ratio,
    })
}

/// Values entering the frequency condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbXi {
    pub a_plus_mi: Complex64,
    pub a_minus_mi: Complex64,
    pub a_plus_i: Complex64,
    pub a_minus_i: Complex64,
    pub b_plus_mi: Complex64,
    pub b_minus_i: Complex64,
    pub x_beta_i: Complex64,
    pub b_alpha_nu: f64,
    pub xi: Complex64,
    pub eta: Complex64,
}

impl AbXi {
    /// Im{ξ η̄}, whose zeros are the admissible frequencies.
    pub fn condition(&self) -> f64 {
        (self.xi * self.eta.conj()).im
    }
}

/// Evaluate a_±, b_± at ±i, X_β(i; ν), ξ and η.
pub fn evaluate_abxi(sol: &PSolution, params: &ModelParams) -> Result<AbXi> {
    let alpha = check_params(params)?;
    let nu = sol.nu;
    let profile = ThetaProfile::for_frequency(alpha, params.drift, nu);
    let i = Complex64::new(0.0, 1.0);
    let r = params.drift / nu;
    let b_alpha_nu = b_alpha_profile(&profile)?;
    let x_beta_i = x_cauchy(i, &profile)?;
    let a_plus_mi = sol.a(true, -i);
    let a_minus_mi = sol.a(false, -i);
    let a_plus_i = sol.a(true, i);
    let a_minus_i = sol.a(false, i);
    let b_plus_mi = sol.b(true, -i);
    let b_minus_i = sol.b(false, i);
    let shift = r - b_alpha_nu;
    let e_plus = Complex64::from_polar(1.0, 0.5 * nu);
    let e_minus = e_plus.conj();
    let xi = e_plus * x_beta_i * (b_plus_mi + shift * a_plus_mi)
        + e_minus * x_beta_i.conj() * (b_minus_i + shift * a_minus_i);
    let eta = e_plus * x_beta_i * a_minus_mi + e_minus * x_beta_i.conj() * a_plus_i;
    Ok(AbXi { a_plus_mi, a_minus_mi, a_plus_i, a_minus_i, b_plus_mi, b_minus_i, x_beta_i, b_alpha_nu, xi, eta })
}

/// Im{ξ(ν) η̄(ν)} with a fresh solve of the auxiliary equations.
pub fn frequency_condition(nu: f64, params: &ModelParams, cfg: &IaConfig) -> Result<f64> {
    let sol = solve_p(nu, params, cfg)?;
    Ok(evaluate_abxi(&sol, params)?.condition())
}

/// Outcome of refining one eigenpair.
#[derive(Debug, Clone)]
pub struct IARefinement {
    pub n: usize,
    pub nu: f64,
    pub solution: PSolution,
    pub values: AbXi,
    /// |Im{ξ η̄}| at the root.
    pub residual: f64,
    /// |ξ η̄| at the root, for scaling the residual.
    pub scale: f64,
    pub fp_iterations: usize,
    pub contraction_ratio: f64,
}

impl IARefinement {
    pub fn lambda(&self, params: &ModelParams) -> f64 {
        lambda_from_nu(self.nu, params.hurst, params.drift)
    }
}

/// Refined frequency of the n-th eigenpair: the root of Im{ξ η̄} within
/// the configured bracket around the first-order frequency.
pub fn find_nu(n: usize, params: &ModelParams, cfg: &IaConfig) -> Result<IARefinement> {
    check_params(params)?;
    if n < cfg.n_min {
        return domain(format!("index {n} is below the refinement minimum {}", cfg.n_min));
    }
    let guess = nu_first_order(n, params.hurst);
    let lo = (guess - cfg.bracket).max(cfg.nu_min);
    let hi = guess + cfg.bracket;
    let nu = brent(|v| frequency_condition(v, params, cfg), lo, hi, cfg.nu_tol)?;
    let solution = solve_p(nu, params, cfg)?;
    let values = evaluate_abxi(&solution, params)?;
    let prod = values.xi * values.eta.conj();
    Ok(IARefinement {
        n,
        nu,
        residual: prod.im.abs(),
        scale: prod.norm(),
        fp_iterations: solution.iterations,
        contraction_ratio: solution.contraction_ratio,
        solution,
        values,
    })
}

/// Eigenfunction assembled from a refinement by Laplace inversion, up to
/// a constant factor: a residue term oscillating like e^{iνx} plus boundary
/// layers from the cut.
#[derive(Debug, Clone)]
pub struct RefinedShape {
    nu: f64,
    residue_coeff: Complex64,
    layer_nodes: Vec<f64>,
    /// (1/π) w sinθ/γ (u + r) Φ̃₁(-u)
    right_density: Vec<f64>,
    /// (1/π) w sinθ/γ (u - r) Φ̃₀(-u)
    left_density: Vec<f64>,
    /// ξ/η at the root (real).
    pub ratio: f64,
    drift_ratio: f64,
    /// Overall factor applied to every value.
    scale: f64,
}

impl RefinedShape {
    pub fn new(refinement: &IARefinement, params: &ModelParams, cfg: &IaConfig) -> Result<Self> {
        let alpha = check_params(params)?;
        let nu = refinement.nu;
        let r = params.drift / nu;
        let profile = ThetaProfile::for_frequency(alpha, params.drift, nu);
        let sol = &refinement.solution;
        let v = &refinement.values;
        let ratio = (v.xi / v.eta).re;
        let shift = r - v.b_alpha_nu;
        let i = Complex64::new(0.0, 1.0);
        let phi0_i =
            v.x_beta_i * (sol.b(true, -i) + shift * sol.a(true, -i) - ratio * sol.a(false, -i));
        let denom = 2.0 / (r * r + 1.0) - alpha + 1.0;
        let residue_coeff = -2.0 * phi0_i * Complex64::new(1.0, -r) / denom;

        let grid = QuadGrid::log_spaced(1e-12, 1e8, cfg.layer_panels, 16)?;
        let (right_density, left_density): (Vec<f64>, Vec<f64>) = if (alpha - 1.0).abs() < 1e-15 {
            (vec![0.0; grid.len()], vec![0.0; grid.len()])
        } else {
            let dens: Vec<(f64, f64)> = grid
                .nodes
                .par_iter()
                .zip(&grid.weights)
                .map(|(&u, &w)| {
                    let x = x_negative(u, &profile)?;
                    let phi0 = x * (sol.b_real(true, u) + shift * sol.a_real(true, u) - ratio * sol.a_real(false, u));
                    let phi1 = x * (sol.b_real(false, u) + shift * sol.a_real(false, u) - ratio * sol.a_real(true, u));
                    let c = w * profile.sin_over_gamma(u) / PI;
                    Ok((c * (u + r) * phi1, c * (u - r) * phi0))
                })
                .collect::<Result<_>>()?;
            dens.into_iter().unzip()
        };
        Ok(Self { nu, residue_coeff, layer_nodes: grid.nodes, right_density, left_density, ratio, drift_ratio: r, scale: 1.0 })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let osc = (Complex64::from_polar(1.0, self.nu * x) * self.residue_coeff).re;
        let mut layer = 0.0;
        for ((u, fr), fl) in self.layer_nodes.iter().zip(&self.right_density).zip(&self.left_density) {
            layer += (-(1.0 - x) * u * self.nu).exp() * fr - (-u * self.nu * x).exp() * fl;
        }
        self.scale * (osc + layer)
    }

    /// φ(1) = -2(ξ/η)(1 + (β/ν)²), on the scale of [`RefinedShape::eval`].
    pub fn endpoint_formula(&self) -> f64 {
        -2.0 * self.scale * self.ratio * (1.0 + self.drift_ratio * self.drift_ratio)
    }
}

/// Refined eigenpair with the data behind it.
#[derive(Debug, Clone)]
pub struct RefinedPair {
    pub pair: EigenPair,
    pub refinement: IARefinement,
    /// Normalized, sign-fixed eigenfunction, evaluable anywhere on [0, 1].
    pub shape: RefinedShape,
    /// φ(1) from the closed expression in ξ/η, on the same normalization.
    pub phi1_formula: f64,
}

/// Refined eigenpair n: refined frequency, eigenvalue from the frequency
/// and the eigenfunction sampled on `grid`, unit-normalized and sign-fixed.
pub fn refined_eigenpair(n: usize, params: &ModelParams, grid: &QuadGrid, cfg: &IaConfig) -> Result<RefinedPair> {
    let unit = params.rescaled();
    let refinement = find_nu(n, &unit, cfg)?;
    let mut shape = RefinedShape::new(&refinement, &unit, cfg)?;
    let mut phi: Vec<f64> = grid.nodes.iter().map(|&x| shape.eval(x)).collect();
    let norm = grid.weights.iter().zip(&phi).map(|(w, v)| w * v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Normalization);
    }
    phi.iter_mut().for_each(|v| *v /= norm);
    let mut phi1 = shape.eval(1.0) / norm;
    let mut integral = grid.integrate(&phi);
    let before = phi1;
    fix_sign(n, &mut phi, &mut phi1, &mut integral);
    let sign = if phi1 == before { 1.0 } else { -1.0 };
    shape.scale *= sign / norm;
    let pair = EigenPair {
        n,
        lambda: refinement.lambda(&unit),
        nu: Some(refinement.nu),
        phi,
        phi1,
        phi_integral: integral,
    };
    let phi1_formula = shape.endpoint_formula();
    Ok(RefinedPair { pair, refinement, shape, phi1_formula })
}

/// Spectrum for error series: Nyström pairs below `n_min`, refined pairs
/// n_min..=n_refined and first-order pairs beyond, up to `total`. The low
/// pairs come from an oracle on `grid` (a unit Gauss-Legendre grid) and are
/// extended off the nodes, so every eigenfunction is evaluated exactly at
/// the requested point.
#[derive(Debug, Clone)]
pub struct HybridSpectrum {
    pub params: ModelParams,
    pub refined: Vec<RefinedPair>,
    pub n_min: usize,
    low: Option<Spectrum>,
    lambdas: Vec<f64>,
    first: Arc<FirstOrderModel>,
}

impl HybridSpectrum {
    pub fn new(params: &ModelParams, n_refined: usize, total: usize, grid: &QuadGrid, cfg: &IaConfig) -> Result<Self> {
        let unit = params.rescaled();
        check_params(&unit)?;
        if total < n_refined || n_refined < cfg.n_min {
            return domain("need n_min <= n_refined <= total");
        }
        let low = if cfg.n_min > 1 {
            Some(oracle_spectrum(&unit, grid.len(), cfg.n_min - 1, DEFAULT_GL_ORDER)?)
        } else {
            None
        };
        let refined: Vec<RefinedPair> = (cfg.n_min..=n_refined)
            .into_par_iter()
            .map(|n| refined_eigenpair(n, &unit, grid, cfg))
            .collect::<Result<_>>()?;
        let first = Arc::new(FirstOrderModel::new(unit.hurst)?);
        let mut lambdas: Vec<f64> = low.as_ref().map_or_else(Vec::new, Spectrum::lambdas);
        lambdas.extend(refined.iter().map(|r| r.pair.lambda));
        lambdas.extend((n_refined + 1..=total).map(|n| lambda_from_nu(nu_first_order(n, unit.hurst), unit.hurst, unit.drift)));
        Ok(Self { params: unit, refined, n_min: cfg.n_min, low, lambdas, first })
    }
}

impl EigenSource for HybridSpectrum {
    fn method(&self) -> SpectrumMethod {
        SpectrumMethod::Refined
    }
    fn eigenvalues(&self) -> Vec<f64> {
        self.lambdas.clone()
    }
    fn count(&self) -> usize {
        self.lambdas.len()
    }
    fn values_at(&self, u: f64) -> Result<(f64, Vec<f64>)> {
        if !(0.0..=1.0).contains(&u) {
            return domain(format!("scaled time {u} outside [0, 1]"));
        }
        let mut values = match &self.low {
            Some(low) => nystrom_extend(low, u)?,
            None => Vec::new(),
        };
        values.extend(self.refined.iter().map(|r| r.shape.eval(u)));
        let start = values.len() + 1;
        values.par_extend((start..=self.lambdas.len()).into_par_iter().map(|n| -self.first.phi(u, n)));
        Ok((u, values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> IaConfig {
        IaConfig { levels: 30, order: 12, layer_panels: 24, ..IaConfig::default() }
    }

    #[test]
    fn degenerate_case_is_exact() {
        let p = ModelParams::unit(0.5, 0.0).unwrap();
        let sol = solve_p(7.0, &p, &quick()).unwrap();
        let i = Complex64::new(0.0, 1.0);
        assert!((sol.a(true, -i) - 2.0).norm() < 1e-14);
        assert!(sol.a(false, i).norm() < 1e-14);
        assert!((sol.b(true, -i) + 2.0 * i).norm() < 1e-14);
        let v = evaluate_abxi(&sol, &p).unwrap();
        assert!((v.condition() + 4.0 * 7f64.cos()).abs() < 1e-12);
        let r = find_nu(4, &p, &quick()).unwrap();
        assert!(r.nu.cos().abs() < 1e-12);
        assert!((r.nu - 3.5 * PI).abs() < 1e-10);
    }

    #[test]
    fn classical_ou_roots() {
        for beta in [1.0, -1.0, 2.0] {
            let p = ModelParams::unit(0.5, beta).unwrap();
            let r = find_nu(5, &p, &quick()).unwrap();
            // tan ν = ν/β
            assert!((r.nu * r.nu.cos() - beta * r.nu.sin()).abs() < 1e-10, "beta={beta}");
            let grid = QuadGrid::unit_gauss_legendre(64).unwrap();
            let rp = refined_eigenpair(5, &p, &grid, &quick()).unwrap();
            let c = (0.5 - (2.0 * r.nu).sin() / (4.0 * r.nu)).sqrt();
            for (x, v) in grid.nodes.iter().zip(&rp.pair.phi) {
                assert!((v + (r.nu * x).sin() / c).abs() < 1e-10);
                assert!((rp.shape.eval(*x) - v).abs() < 1e-12);
            }
            assert!((rp.phi1_formula - rp.pair.phi1).abs() < 1e-10);
        }
    }

    #[test]
    fn contraction_and_estimates() {
        let p = ModelParams::unit(0.7, 0.0).unwrap();
        let sol = solve_p(20.0, &p, &quick()).unwrap();
        assert!(sol.contraction_ratio < 1.0);
        let norm = sol.operator_norm();
        assert!(norm > 0.0 && norm < 1.0, "{norm}");
        let i = Complex64::new(0.0, 1.0);
        let a = sol.a(true, -i);
        let b = sol.b(true, -i);
        assert!((a - 2.0).norm() * 20.0 < 5.0, "{a}");
        assert!((b + 2.0 * i).norm() * 400.0 < 50.0, "{b}");
    }

    #[test]
    fn rejects_rough_case() {
        let p = ModelParams::unit(0.3, 0.0).unwrap();
        assert!(solve_p(10.0, &p, &quick()).is_err());
        let p = ModelParams::unit(0.7, 0.0).unwrap();
        assert!(solve_p(0.5, &p, &quick()).is_err());
        assert!(find_nu(2, &p, &quick()).is_err());
    }

    #[test]
    fn hybrid_series_matches_oracle() {
        use crate::error_analysis::mse_series;
        let p = ModelParams::unit(0.7, -1.0).unwrap();
        let grid = QuadGrid::unit_gauss_legendre(200).unwrap();
        let hybrid = HybridSpectrum::new(&p, 6, 2000, &grid, &quick()).unwrap();
        assert_eq!(hybrid.count(), 2000);
        assert_eq!(hybrid.refined.len(), 4);
        let lambdas = hybrid.eigenvalues();
        assert!(lambdas.windows(2).all(|w| w[1] < w[0]));
        let (_, at) = hybrid.values_at(0.3).unwrap();
        assert_eq!(at[3], hybrid.refined[1].shape.eval(0.3));

        let oracle = crate::spectral_oracle::oracle_spectrum(&p, 400, 400, 32).unwrap();
        for u in [1.0, oracle.grid.as_ref().unwrap().nodes[200]] {
            let a = mse_series(u, 1e-2, &p, &hybrid).unwrap().value;
            let b = mse_series(u, 1e-2, &p, &oracle).unwrap().value;
            assert!((a / b - 1.0).abs() < 2e-3, "u = {u}: {a} vs {b}");
        }
    }
}
