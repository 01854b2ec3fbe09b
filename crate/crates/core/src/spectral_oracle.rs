//! Reference spectra: Nyström eigen-decomposition of the covariance operator
//! on [0, 1] and the exact spectrum of the classical OU process.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asymptotics::FirstOrderModel;
use crate::error::{domain, Error, Result};
use crate::model::{cov_matrix_with_order, CovMatrix, FouKernel, ModelParams, DEFAULT_GL_ORDER};
use crate::quad::QuadGrid;
use crate::roots::bisect;

/// How a spectrum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    Oracle,
    ClosedFormOu,
    FirstOrder,
    Refined,
}

impl SpectrumMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumMethod::Oracle => "oracle",
            SpectrumMethod::ClosedFormOu => "closed_form_ou",
            SpectrumMethod::FirstOrder => "first_order",
            SpectrumMethod::Refined => "refined",
        }
    }
}

impl std::str::FromStr for SpectrumMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "closed_form_ou" | "closed-form-ou" => Ok(Self::ClosedFormOu),
            "first_order" | "first-order" => Ok(Self::FirstOrder),
            "refined" => Ok(Self::Refined),
            other => domain(format!("unknown spectrum method '{other}'")),
        }
    }
}

/// One eigenvalue with its unit-norm eigenfunction.
///
/// Sign convention: the eigenfunction has negative integral over [0, 1];
/// if the integral vanishes, φ(1)(-1)ⁿ is made negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// 1-based index in order of decreasing eigenvalue.
    pub n: usize,
    pub lambda: f64,
    /// Oscillation frequency, when the method provides one.
    pub nu: Option<f64>,
    /// Samples on the spectrum's grid (empty when not sampled).
    pub phi: Vec<f64>,
    /// Value at the right endpoint.
    pub phi1: f64,
    /// ∫₀¹ φ(x) dx.
    pub phi_integral: f64,
}

/// Closed-form shape of a classical OU eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OuMode {
    /// sin(νx)
    Trig(f64),
    /// x, present when the drift equals 1.
    Linear,
    /// sinh(κx), present when the drift exceeds 1.
    Hyperbolic(f64),
}

impl OuMode {
    fn raw(&self, x: f64) -> f64 {
        match *self {
            OuMode::Trig(nu) => (nu * x).sin(),
            OuMode::Linear => x,
            OuMode::Hyperbolic(k) => (k * x).sinh(),
        }
    }

    fn norm(&self) -> f64 {
        match *self {
            OuMode::Trig(nu) => (0.5 - (2.0 * nu).sin() / (4.0 * nu)).sqrt(),
            OuMode::Linear => (1.0f64 / 3.0).sqrt(),
            OuMode::Hyperbolic(k) => ((2.0 * k).sinh() / (4.0 * k) - 0.5).sqrt(),
        }
    }

    fn raw_integral(&self) -> f64 {
        match *self {
            OuMode::Trig(nu) => (1.0 - nu.cos()) / nu,
            OuMode::Linear => 0.5,
            OuMode::Hyperbolic(k) => (k.cosh() - 1.0) / k,
        }
    }

    /// Unit-norm eigenfunction value obeying the sign convention (all
    /// shapes have positive raw integral, so the sign is negative).
    pub fn eval(&self, x: f64) -> f64 {
        -self.raw(x) / self.norm()
    }
}

/// Where eigenfunction values at arbitrary points come from.
#[derive(Debug, Clone)]
pub enum PhiSource {
    /// Nyström extension through the kernel on the stored grid.
    Nystrom { kernel: FouKernel, horizon: f64 },
    /// Exact classical OU modes, one per pair.
    OuModes(Vec<OuMode>),
    /// Closed-form first-order formula.
    FirstOrder(Arc<FirstOrderModel>),
    /// Only grid samples and the endpoint value are available.
    Sampled,
}

/// Diagnostics recorded while computing a spectrum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDiagnostics {
    /// Smallest eigenvalue of the full discretized operator.
    pub min_eigenvalue: Option<f64>,
    /// Trace ∫K(t,t)dt of the discretized operator.
    pub trace: Option<f64>,
    /// Number of eigenvalues below -1e-10 * trace.
    pub negative_count: usize,
    /// Indices n with λ_n == λ_{n+1} among the leading pairs.
    pub ties: Vec<usize>,
    /// Pairs whose sign was fixed by the endpoint rule.
    pub endpoint_sign_fixes: Vec<usize>,
    /// Pairs taken from another method because this one does not cover them.
    pub substituted: Vec<usize>,
}

/// Ordered eigenpairs of the covariance operator on the unit interval.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub method: SpectrumMethod,
    pub pairs: Vec<EigenPair>,
    /// Parameters of the operator, already rescaled to the unit interval.
    pub params: ModelParams,
    pub grid: Option<QuadGrid>,
    pub source: PhiSource,
    pub diagnostics: SpectrumDiagnostics,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    /// Check ordering, positivity and contiguous indexing.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.pairs.iter().enumerate() {
            if p.n != i + 1 {
                return domain("eigenpair indices must be contiguous from 1");
            }
            if !(p.lambda > 0.0) {
                return domain(format!("eigenvalue {} of pair {} is not positive", p.lambda, p.n));
            }
        }
        if self.pairs.windows(2).any(|w| w[1].lambda > w[0].lambda) {
            return domain("eigenvalues must be non-increasing");
        }
        Ok(())
    }

    /// Values φ_n(x) for every pair.
    pub fn eval_all(&self, x: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&x) {
            return domain(format!("evaluation point {x} outside [0, 1]"));
        }
        match &self.source {
            PhiSource::Nystrom { .. } => nystrom_extend(self, x),
            PhiSource::OuModes(modes) => Ok(modes.iter().map(|m| m.eval(x)).collect()),
            PhiSource::FirstOrder(model) => Ok(self
                .pairs
                .iter()
                .map(|p| -model.phi(x, p.n))
                .collect()),
            PhiSource::Sampled => {
                if x == 1.0 {
                    return Ok(self.pairs.iter().map(|p| p.phi1).collect());
                }
                let grid = self.grid.as_ref().ok_or_else(|| {
                    Error::Domain("sampled spectrum has no grid".into())
                })?;
                let i = grid.nearest(x);
                if (grid.nodes[i] - x).abs() > 1e-12 {
                    return domain(format!("point {x} is not a grid node of a sampled spectrum"));
                }
                Ok(self.pairs.iter().map(|p| p.phi[i]).collect())
            }
        }
    }
}

/// Enforce the sign convention on samples and associated scalars.
/// Returns true when the endpoint tie rule decided.
pub fn fix_sign(n: usize, phi: &mut [f64], phi1: &mut f64, integral: &mut f64) -> bool {
    const TIE: f64 = 1e-12;
    let flip;
    let tie = integral.abs() <= TIE;
    if !tie {
        flip = *integral > 0.0;
    } else {
        let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
        flip = *phi1 * parity > 0.0;
    }
    if flip {
        phi.iter_mut().for_each(|v| *v = -*v);
        *phi1 = -*phi1;
        *integral = -*integral;
    }
    tie
}

/// Nyström eigenpairs of a covariance matrix: the leading `n_max`
/// eigenvectors of W^{1/2} K W^{1/2}, mapped back by W^{-1/2}, normalized in
/// the weighted L² norm and sign-fixed, with φ(1) from the Nyström extension.
pub fn nystrom_eigs(cov: &CovMatrix, params: &ModelParams, n_max: usize) -> Result<Spectrum> {
    nystrom_eigs_with_order(cov, params, n_max, DEFAULT_GL_ORDER)
}

pub fn nystrom_eigs_with_order(
    cov: &CovMatrix,
    params: &ModelParams,
    n_max: usize,
    gl_order: usize,
) -> Result<Spectrum> {
    let grid = &cov.grid;
    let n = grid.len();
    if n_max == 0 || n_max > n {
        return domain(format!("n_max = {n_max} must lie in 1..={n}"));
    }
    if grid.weights.iter().any(|w| !(*w > 0.0)) {
        return domain("grid weights must be positive");
    }
    let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let b = faer::Mat::<f64>::from_fn(n, n, |i, j| sw[i] * cov.get(i, j) * sw[j]);
    faer::set_global_parallelism(faer::Par::Seq);
    let evd = b
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let trace = cov.trace_integral();
    let min_eigenvalue = s[0];
    let negative_count = (0..n).filter(|&k| s[k] < -1e-10 * trace.abs()).count();

    let kernel = FouKernel::new(params.hurst, params.drift, gl_order)?;
    let times: Vec<f64> = grid.nodes.iter().map(|x| x * params.horizon).collect();
    let end_row = kernel.row(params.horizon, &times);

    let mut pairs = Vec::with_capacity(n_max);
    let mut diagnostics = SpectrumDiagnostics {
        min_eigenvalue: Some(min_eigenvalue),
        trace: Some(trace),
        negative_count,
        ..Default::default()
    };
    for k in 0..n_max {
        let col = n - 1 - k;
        let lambda = s[col];
        if !(lambda > 0.0) {
            return Err(Error::Eigen(format!(
                "eigenvalue {} = {lambda:.3e} is not positive; reduce n_max",
                k + 1
            )));
        }
        let mut phi: Vec<f64> = (0..n).map(|i| u[(i, col)] / sw[i]).collect();
        let norm = grid
            .weights
            .iter()
            .zip(&phi)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt();
        phi.iter_mut().for_each(|v| *v /= norm);
        let mut integral = grid.integrate(&phi);
        let mut phi1 = (0..n).map(|j| grid.weights[j] * end_row[j] * phi[j]).sum::<f64>() / lambda;
        if fix_sign(k + 1, &mut phi, &mut phi1, &mut integral) {
            diagnostics.endpoint_sign_fixes.push(k + 1);
        }
        pairs.push(EigenPair { n: k + 1, lambda, nu: None, phi, phi1, phi_integral: integral });
    }
    diagnostics.ties = pairs
        .windows(2)
        .filter(|w| w[0].lambda == w[1].lambda)
        .map(|w| w[0].n)
        .collect();
    Ok(Spectrum {
        method: SpectrumMethod::Oracle,
        pairs,
        params: *params,
        grid: Some(grid.clone()),
        source: PhiSource::Nystrom { kernel, horizon: params.horizon },
        diagnostics,
    })
}

/// Nyström oracle for the operator of `params` rescaled to [0, 1], on an
/// `n_grid`-point Gauss-Legendre grid.
pub fn oracle_spectrum(params: &ModelParams, n_grid: usize, n_max: usize, gl_order: usize) -> Result<Spectrum> {
    let unit = params.rescaled();
    let grid = QuadGrid::unit_gauss_legendre(n_grid)?;
    let cov = cov_matrix_with_order(&grid, &unit, gl_order)?;
    nystrom_eigs_with_order(&cov, &unit, n_max, gl_order)
}

/// Richardson extrapolation of Nyström eigenvalues from grids of size N and
/// 2N, assuming the error decays like N^{-rate}.
pub fn richardson_eigenvalues(coarse: &[f64], fine: &[f64], rate: f64) -> Vec<f64> {
    let f = 2f64.powf(rate);
    coarse.iter().zip(fine).map(|(c, h)| (f * h - c) / (f - 1.0)).collect()
}

/// Convergence rate of Gauss-Legendre Nyström eigenvalues for a kernel
/// whose diagonal singularity is |s-t|^{2H}.
pub fn nystrom_error_rate(hurst: f64) -> f64 {
    2.0 * hurst + 1.0
}

/// Nyström extension φ_n(x) = (1/λ_n) ∫ K(x, y) φ_n(y) dy for all pairs.
/// Exact at grid nodes up to the eigensolver residual.
pub fn nystrom_extend(spec: &Spectrum, x: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("extension point {x} outside [0, 1]"));
    }
    let (kernel, horizon) = match &spec.source {
        PhiSource::Nystrom { kernel, horizon } => (kernel, *horizon),
        _ => return domain("Nyström extension needs an oracle spectrum"),
    };
    let grid = spec
        .grid
        .as_ref()
        .ok_or_else(|| Error::Domain("oracle spectrum has no grid".into()))?;
    let times: Vec<f64> = grid.nodes.iter().map(|t| t * horizon).collect();
    let row = kernel.row(x * horizon, &times);
    let weighted: Vec<f64> = row.iter().zip(&grid.weights).map(|(k, w)| k * w).collect();
    Ok(spec
        .pairs
        .iter()
        .map(|p| weighted.iter().zip(&p.phi).map(|(a, b)| a * b).sum::<f64>() / p.lambda)
        .collect())
}

/// Exact spectrum of the classical (H = 1/2) OU covariance on [0, 1].
///
/// Oscillatory modes sin(νx) solve tan ν = ν/β, one per tangent branch;
/// drift in (0, 1) adds a root below π/2, drift 1 a linear mode and drift
/// above 1 a hyperbolic mode tanh κ = κ/β.
pub fn ou_closed_form_eigs(beta: f64, n_max: usize) -> Result<Spectrum> {
    if !beta.is_finite() {
        return domain("drift must be finite");
    }
    if n_max == 0 {
        return domain("n_max must be positive");
    }
    const DELTA: f64 = 1e-9;
    let mut modes: Vec<(f64, OuMode)> = Vec::with_capacity(n_max + 1);
    if beta > 0.0 && beta < 1.0 {
        let nu = bisect(|v| v / beta - v.tan(), DELTA, FRAC_PI_2 - DELTA, 1e-15)?;
        modes.push((1.0 / (nu * nu + beta * beta), OuMode::Trig(nu)));
    } else if beta == 1.0 {
        modes.push((1.0, OuMode::Linear));
    } else if beta > 1.0 {
        let k = bisect(|k| k / beta - k.tanh(), DELTA, beta, 1e-15)?;
        modes.push((1.0 / (beta * beta - k * k), OuMode::Hyperbolic(k)));
    }
    let mut branch = 1usize;
    while modes.len() < n_max {
        let nu = if beta == 0.0 {
            (branch as f64 - 0.5) * PI
        } else {
            let c = branch as f64 * PI;
            let (lo, hi) = (c - FRAC_PI_2 + DELTA, c + FRAC_PI_2 - DELTA);
            // ν cos ν - β sin ν has no poles and the same roots on the branch.
            let g = |v: f64| v * v.cos() - beta * v.sin();
            bisect(g, lo, hi, 1e-15 * c)?
        };
        modes.push((1.0 / (nu * nu + beta * beta), OuMode::Trig(nu)));
        branch += 1;
    }
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));
    modes.truncate(n_max);
    let pairs = modes
        .iter()
        .enumerate()
        .map(|(i, (lambda, mode))| EigenPair {
            n: i + 1,
            lambda: *lambda,
            nu: match mode {
                OuMode::Trig(nu) => Some(*nu),
                _ => None,
            },
            phi: Vec::new(),
            phi1: mode.eval(1.0),
            phi_integral: -mode.raw_integral() / mode.norm(),
        })
        .collect();
    Ok(Spectrum {
        method: SpectrumMethod::ClosedFormOu,
        pairs,
        params: ModelParams::unit(0.5, beta)?,
        grid: None,
        source: PhiSource::OuModes(modes.into_iter().map(|m| m.1).collect()),
        diagnostics: SpectrumDiagnostics::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_spectrum() {
        let spec = oracle_spectrum(&ModelParams::unit(0.5, 0.0).unwrap(), 400, 12, 32).unwrap();
        spec.validate().unwrap();
        for p in spec.pairs.iter().take(10) {
            let exact = ((p.n as f64 - 0.5) * PI).powi(-2);
            assert!((p.lambda / exact - 1.0).abs() < 1e-3, "n={} {} {}", p.n, p.lambda, exact);
            assert!((p.phi1.abs() - 2f64.sqrt()).abs() < 1e-3);
            assert!(p.phi_integral < 0.0);
        }
    }

    #[test]
    fn orthonormal_and_exact_at_nodes() {
        let spec = oracle_spectrum(&ModelParams::unit(0.7, -1.0).unwrap(), 200, 15, 32).unwrap();
        let grid = spec.grid.as_ref().unwrap();
        for a in &spec.pairs {
            for b in &spec.pairs {
                let ip: f64 = (0..grid.len()).map(|i| grid.weights[i] * a.phi[i] * b.phi[i]).sum();
                let target = if a.n == b.n { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 1e-10);
            }
        }
        let x = grid.nodes[17];
        let ext = nystrom_extend(&spec, x).unwrap();
        for (p, v) in spec.pairs.iter().zip(ext) {
            assert!((p.phi[17] - v).abs() < 1e-10);
        }
        assert!(spec.diagnostics.min_eigenvalue.unwrap() >= -1e-10 * spec.diagnostics.trace.unwrap());
    }

    #[test]
    fn closed_form_examples() {
        let s = ou_closed_form_eigs(0.0, 3).unwrap();
        assert!((s.pairs[0].nu.unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((s.pairs[0].lambda - 4.0 / (PI * PI)).abs() < 1e-15);
        let s = ou_closed_form_eigs(1.0, 3).unwrap();
        assert!(s.pairs[0].nu.is_none() && s.pairs[0].lambda == 1.0);
        let nu = s.pairs[1].nu.unwrap();
        assert!((nu - 4.493_409_457_909_064).abs() < 1e-12);
        assert!((s.pairs[1].lambda - 1.0 / (nu * nu + 1.0)).abs() < 1e-15);
        for beta in [-2.0, -1.0, 0.3, 1.0, 2.0] {
            let s = ou_closed_form_eigs(beta, 200).unwrap();
            s.validate().unwrap();
            let last = s.pairs.last().unwrap();
            let k = last.nu.unwrap() / PI - 0.5;
            assert!((k - k.round()).abs() < 0.01, "beta={beta}: {k}");
        }
    }

    #[test]
    fn closed_form_matches_nystrom() {
        for beta in [1.0, 0.4, 2.0, -1.0] {
            let exact = ou_closed_form_eigs(beta, 10).unwrap();
            let nys = oracle_spectrum(&ModelParams::unit(0.5, beta).unwrap(), 400, 10, 32).unwrap();
            let grid = nys.grid.as_ref().unwrap();
            for (a, b) in exact.pairs.iter().zip(&nys.pairs) {
                assert!((a.lambda / b.lambda - 1.0).abs() < 1e-3, "beta={beta} n={}", a.n);
                assert!((a.phi1 - b.phi1).abs() < 1e-3, "beta={beta} n={}", a.n);
                assert!((a.phi_integral - b.phi_integral).abs() < 1e-4);
                let modes = match &exact.source {
                    PhiSource::OuModes(m) => m,
                    _ => unreachable!(),
                };
                let i = grid.nearest(0.37);
                assert!((modes[a.n - 1].eval(grid.nodes[i]) - b.phi[i]).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn richardson_removes_leading_error() {
        let exact = [1.0, 0.5];
        let coarse = [1.0 + 8e-3, 0.5 + 4e-3];
        let fine = [1.0 + 1e-3, 0.5 + 5e-4];
        let r = richardson_eigenvalues(&coarse, &fine, 3.0);
        assert!((r[0] - exact[0]).abs() < 1e-15 && (r[1] - exact[1]).abs() < 1e-15);
    }

    #[test]
    fn sign_tie_rule() {
        let mut phi = vec![1.0];
        let (mut p1, mut int) = (1.0, 0.0);
        assert!(fix_sign(2, &mut phi, &mut p1, &mut int));
        assert_eq!(p1, -1.0);
        let (mut p1, mut int) = (1.0, 0.3);
        assert!(!fix_sign(1, &mut phi, &mut p1, &mut int));
        assert_eq!(int, -0.3);
    }
}
