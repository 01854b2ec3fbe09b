//! Small-noise filtering and interpolation error: eigen-series, direct
//! solution of the discretized Wiener-Hopf equation, the leading-order
//! asymptote and ε-sweeps comparing them.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{lambda_constant, lambda_from_nu, nu_first_order};
use crate::error::{domain, Error, Result};
use crate::model::{CovMatrix, FouKernel, ModelParams, DEFAULT_GL_ORDER};
use crate::spectral_oracle::{PhiSource, Spectrum, SpectrumMethod};

/// Whether the estimation time is inside the interval or at its end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Interior,
    Endpoint,
}

impl Position {
    /// Classify a scaled time u = t/T; u = 0 has no asymptote.
    pub fn of(u: f64) -> Option<Self> {
        if u >= 1.0 {
            Some(Self::Endpoint)
        } else if u > 0.0 {
            Some(Self::Interior)
        } else {
            None
        }
    }
}

/// Exponent 2H/(2H+1) of the error decay in ε.
pub fn asymptotic_exponent(hurst: f64) -> f64 {
    2.0 * hurst / (2.0 * hurst + 1.0)
}

/// Constant (sin(πH)Γ(2H+1))^{1/(2H+1)} / sin(π/(2H+1)) of the endpoint law.
pub fn asymptotic_constant(hurst: f64) -> f64 {
    let q = 2.0 * hurst + 1.0;
    lambda_constant(hurst).powf(1.0 / q) / (PI / q).sin()
}

/// Leading-order error: the endpoint law, divided by 2H+1 inside.
pub fn mse_asymptotic(position: Position, eps: f64, params: &ModelParams) -> f64 {
    let h = params.hurst;
    let endpoint = (eps / (params.gain * params.gain)).powf(asymptotic_exponent(h)) * asymptotic_constant(h);
    match position {
        Position::Endpoint => endpoint,
        Position::Interior => endpoint / (2.0 * h + 1.0),
    }
}

/// Σ εT^{2H} λ_n φ_n(u)² / (ε + μ²T^{2H+1} λ_n): the error written in
/// terms of the unit-interval eigenpairs.
pub fn mse_series_terms(lambdas: &[f64], phi_u: &[f64], eps: f64, params: &ModelParams) -> f64 {
    let scale = params.covariance_scale();
    let snr = params.signal_to_noise_scale();
    lambdas
        .iter()
        .zip(phi_u)
        .map(|(l, p)| eps * scale * l * p * p / (eps + snr * l))
        .sum()
}

/// Series value with an estimate of the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    /// Scaled time actually used (interior points of sampled spectra are
    /// moved to the nearest grid node).
    pub u: f64,
    pub value: f64,
    pub tail_bound: f64,
    /// Contribution bound of the first excluded term.
    pub next_term: f64,
}

/// Eigenvalues beyond the computed ones, from the leading-order law.
fn tail_lambda(n: usize, params: &ModelParams) -> f64 {
    lambda_from_nu(nu_first_order(n, params.hurst), params.hurst, params.unit_drift())
}

/// Bound on φ_n(u)² used for excluded terms.
fn phi_square_bound(hurst: f64) -> f64 {
    (2.0 * hurst + 1.0).max(2.0)
}

/// Estimated contribution of the terms n > `len` and of the term n = len+1.
pub fn tail_estimate(len: usize, eps: f64, params: &ModelParams) -> (f64, f64) {
    let scale = params.covariance_scale();
    let snr = params.signal_to_noise_scale();
    let c = phi_square_bound(params.hurst);
    let term = |n: usize| {
        let l = tail_lambda(n, params);
        eps * scale * c * l / (eps + snr * l)
    };
    let next = term(len + 1);
    let last = 64 * (len + 1);
    let mut sum: f64 = (len + 1..=last).map(term).sum();
    // Beyond `last`, λ_n ≈ C (nπ)^{-(2H+1)} and each term is at most scale·c·λ_n.
    let q = 2.0 * params.hurst + 1.0;
    sum += scale * c * lambda_constant(params.hurst) * PI.powf(-q) * (last as f64).powf(1.0 - q) / (q - 1.0);
    (sum, next)
}

/// Anything that supplies eigenvalues and eigenfunction values for the
/// error series.
pub trait EigenSource {
    fn method(&self) -> SpectrumMethod;
    fn eigenvalues(&self) -> Vec<f64>;
    fn count(&self) -> usize;
    /// Eigenfunction values at u, with the point actually used.
    fn values_at(&self, u: f64) -> Result<(f64, Vec<f64>)>;
}

impl EigenSource for Spectrum {
    fn method(&self) -> SpectrumMethod {
        self.method
    }
    fn eigenvalues(&self) -> Vec<f64> {
        self.lambdas()
    }
    fn count(&self) -> usize {
        self.len()
    }
    fn values_at(&self, u: f64) -> Result<(f64, Vec<f64>)> {
        phi_values(self, u)
    }
}

/// Eigenfunction values at u. Interior points of grid-based spectra snap to
/// the nearest node; u = 1 uses the endpoint values.
pub fn phi_values(spec: &Spectrum, u: f64) -> Result<(f64, Vec<f64>)> {
    if !(u >= 0.0 && u <= 1.0) {
        return domain(format!("scaled time {u} outside [0, 1]"));
    }
    if u == 1.0 {
        return Ok((1.0, spec.pairs.iter().map(|p| p.phi1).collect()));
    }
    match (&spec.source, &spec.grid) {
        (PhiSource::Nystrom { .. } | PhiSource::Sampled, Some(grid)) => {
            let i = grid.nearest(u);
            Ok((grid.nodes[i], spec.pairs.iter().map(|p| p.phi[i]).collect()))
        }
        _ => Ok((u, spec.eval_all(u)?)),
    }
}

/// Error at scaled time u from the eigen-series of `spec`.
pub fn mse_series<S: EigenSource + ?Sized>(u: f64, eps: f64, params: &ModelParams, spec: &S) -> Result<SeriesValue> {
    params.validate()?;
    if !(eps > 0.0) {
        return domain(format!("noise level {eps} must be positive"));
    }
    if spec.count() == 0 {
        return domain("empty spectrum");
    }
    let (u_used, phi) = spec.values_at(u)?;
    let value = mse_series_terms(&spec.eigenvalues(), &phi, eps, params);
    let (tail_bound, next_term) = tail_estimate(spec.count(), eps, params);
    Ok(SeriesValue { u: u_used, value, tail_bound, next_term })
}

/// Refuse a series value whose first excluded term is not negligible.
pub fn check_truncation(series: &SeriesValue, eps: f64, available: usize) -> Result<()> {
    if series.next_term >= 1e-3 * series.value {
        return Err(Error::Truncation(format!(
            "noise level {eps:e} needs more than the {available} available eigenpairs \
             (first excluded term {:.3e} vs error {:.3e})",
            series.next_term, series.value
        )));
    }
    Ok(())
}

/// Number of terms that contribute at noise level ε, (μ²T^{2H+1}/ε)^{1/(2H+1)}.
pub fn effective_terms(eps: f64, params: &ModelParams) -> f64 {
    (params.signal_to_noise_scale() / eps).powf(1.0 / (2.0 * params.hurst + 1.0))
}

/// Errors at several scaled times from the discretized equation
/// εh(r,v) + μ²T^{2H+1}∫K(r,s)h(s,v)ds = μ²T^{2H}K(r,v) on the grid of
/// `cov` (which must hold the unit-interval kernel). Interior points snap to
/// grid nodes; u = 1 is reached through the equation itself.
pub fn mse_wiener_hopf_many(us: &[f64], eps: f64, params: &ModelParams, cov: &CovMatrix) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    if !(eps > 0.0) {
        return domain(format!("noise level {eps} must be positive"));
    }
    if us.iter().any(|u| !(*u > 0.0 && *u <= 1.0)) {
        return domain("scaled times must lie in (0, 1]");
    }
    let grid = &cov.grid;
    let n = grid.len();
    let snr = params.signal_to_noise_scale();
    let scale = params.covariance_scale();
    let mu2 = params.gain * params.gain;
    let unit = params.rescaled();
    let kernel = FouKernel::new(unit.hurst, unit.drift, DEFAULT_GL_ORDER)?;
    let end_row = if us.iter().any(|u| *u == 1.0) { Some(kernel.row(1.0, &grid.nodes)) } else { None };

    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| {
        let d = if i == j { eps } else { 0.0 };
        d + snr * cov.get(i, j) * grid.weights[j]
    });
    let targets: Vec<(f64, Option<usize>)> = us
        .iter()
        .map(|&u| if u == 1.0 { (1.0, None) } else { let i = grid.nearest(u); (grid.nodes[i], Some(i)) })
        .collect();
    let rhs = faer::Mat::<f64>::from_fn(n, targets.len(), |i, k| {
        let kv = match targets[k].1 {
            Some(j) => cov.get(i, j),
            None => end_row.as_ref().map(|r| r[i]).unwrap_or(0.0),
        };
        mu2 * scale * kv
    });
    faer::set_global_parallelism(faer::Par::Seq);
    let lu = a.partial_piv_lu();
    let sol = faer::linalg::solvers::Solve::solve(&lu, &rhs);
    let mut out = Vec::with_capacity(targets.len());
    for (k, (u_used, idx)) in targets.iter().enumerate() {
        let h_uu = match idx {
            Some(j) => sol[(*j, k)],
            None => {
                let r = end_row.as_ref().expect("row computed for u = 1");
                let integral: f64 = (0..n).map(|j| grid.weights[j] * r[j] * sol[(j, k)]).sum();
                (mu2 * scale * kernel.eval(1.0, 1.0) - snr * integral) / eps
            }
        };
        if !h_uu.is_finite() {
            return Err(Error::Singular(format!("non-finite solution at noise level {eps:e}")));
        }
        out.push((*u_used, eps / mu2 * h_uu));
    }
    Ok(out)
}

/// Error at one scaled time from the discretized Wiener-Hopf equation.
pub fn mse_wiener_hopf(u: f64, eps: f64, params: &ModelParams, cov: &CovMatrix) -> Result<f64> {
    Ok(mse_wiener_hopf_many(&[u], eps, params, cov)?[0].1)
}

/// One (ε, u) entry of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRow {
    pub eps: f64,
    pub u: f64,
    pub u_used: f64,
    pub p_series: f64,
    pub tail_bound: f64,
    pub p_wiener_hopf: Option<f64>,
    pub p_asymptotic: Option<f64>,
    pub ratio: Option<f64>,
    /// P(u) - P(1)/(2H+1) for interior u.
    pub i2: Option<f64>,
    pub i2_over_eps: Option<f64>,
    /// |I₂| relative to ε^{2H/(2H+1)}.
    pub i2_scaled: Option<f64>,
}

/// Result of an ε-sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseReport {
    pub params: ModelParams,
    pub eps_values: Vec<f64>,
    pub u_points: Vec<f64>,
    pub spectrum_method: SpectrumMethod,
    pub truncation: usize,
    pub exponent: f64,
    pub constant: f64,
    /// Rows in ε-major order.
    pub rows: Vec<MseRow>,
    /// P nondecreasing in ε at every u.
    pub monotone_in_eps: bool,
    /// P below the prior variance at every entry.
    pub below_prior: bool,
}

impl MseReport {
    pub fn row(&self, eps_index: usize, u_index: usize) -> &MseRow {
        &self.rows[eps_index * self.u_points.len() + u_index]
    }

    /// Ratios P/asymptote at one u along the sweep.
    pub fn ratios_at(&self, u_index: usize) -> Vec<Option<f64>> {
        (0..self.eps_values.len()).map(|e| self.row(e, u_index).ratio).collect()
    }
}

/// Sweep ε over a decreasing grid at several scaled times, comparing the
/// eigen-series with the asymptote and, when `cov` is given, with the
/// direct solve on the same grid.
pub fn convergence_study<S: EigenSource + Sync + ?Sized>(
    params: &ModelParams,
    eps_grid: &[f64],
    u_points: &[f64],
    spec: &S,
    cov: Option<&CovMatrix>,
) -> Result<MseReport> {
    params.validate()?;
    if eps_grid.is_empty() || u_points.is_empty() {
        return domain("noise and time lists must be non-empty");
    }
    if eps_grid.iter().any(|e| !(*e > 0.0)) {
        return domain("noise levels must be positive");
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return domain("noise levels must be strictly decreasing");
    }
    if u_points.iter().any(|u| !(*u > 0.0 && *u <= 1.0)) {
        return domain("scaled times must lie in (0, 1]");
    }
    let h = params.hurst;
    let lambdas = spec.eigenvalues();
    let phis: Vec<(f64, Vec<f64>)> = u_points.iter().map(|&u| spec.values_at(u)).collect::<Result<_>>()?;
    let (_, phi_end) = spec.values_at(1.0)?;
    let unit = params.rescaled();
    let kernel = FouKernel::new(unit.hurst, unit.drift, DEFAULT_GL_ORDER)?;
    let prior: Vec<f64> = phis.iter().map(|(u, _)| params.covariance_scale() * kernel.eval(*u, *u)).collect();

    let per_eps: Vec<Vec<MseRow>> = eps_grid
        .par_iter()
        .map(|&eps| -> Result<Vec<MseRow>> {
            let (tail_bound, next_term) = tail_estimate(spec.count(), eps, params);
            let p_end = mse_series_terms(&lambdas, &phi_end, eps, params);
            let wh = match cov {
                Some(c) => Some(mse_wiener_hopf_many(u_points, eps, params, c)?),
                None => None,
            };
            let mut rows = Vec::with_capacity(u_points.len());
            for (k, &u) in u_points.iter().enumerate() {
                let (u_used, phi) = &phis[k];
                let value = mse_series_terms(&lambdas, phi, eps, params);
                check_truncation(&SeriesValue { u: *u_used, value, tail_bound, next_term }, eps, spec.count())?;
                let position = Position::of(*u_used);
                let p_asym = position.map(|pos| mse_asymptotic(pos, eps, params));
                let interior = position == Some(Position::Interior);
                let i2 = interior.then(|| value - p_end / (2.0 * h + 1.0));
                rows.push(MseRow {
                    eps,
                    u,
                    u_used: *u_used,
                    p_series: value,
                    tail_bound,
                    p_wiener_hopf: wh.as_ref().map(|w| w[k].1),
                    p_asymptotic: p_asym,
                    ratio: p_asym.map(|a| value / a),
                    i2,
                    i2_over_eps: i2.map(|v| v / eps),
                    i2_scaled: i2.map(|v| v.abs() / eps.powf(asymptotic_exponent(h))),
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let nu = u_points.len();
    let rows: Vec<MseRow> = per_eps.into_iter().flatten().collect();
    let monotone_in_eps = (0..nu).all(|k| {
        (1..eps_grid.len()).all(|e| rows[e * nu + k].p_series <= rows[(e - 1) * nu + k].p_series)
    });
    let below_prior = rows
        .iter()
        .enumerate()
        .all(|(i, r)| r.p_series >= 0.0 && r.p_series <= prior[i % nu] * (1.0 + 1e-9));
    Ok(MseReport {
        params: *params,
        eps_values: eps_grid.to_vec(),
        u_points: u_points.to_vec(),
        spectrum_method: spec.method(),
        truncation: spec.count(),
        exponent: asymptotic_exponent(h),
        constant: asymptotic_constant(h),
        rows,
        monotone_in_eps,
        below_prior,
    })
}

/// Whether a sequence moves toward 1 in |x - 1|, allowing a relative slack
/// on each step.
pub fn trends_to_one(ratios: &[f64], slack: f64) -> bool {
    ratios.windows(2).all(|w| (w[1] - 1.0).abs() <= (w[0] - 1.0).abs() * (1.0 + slack) + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cov_matrix;
    use crate::quad::QuadGrid;
    use crate::spectral_oracle::{nystrom_eigs, ou_closed_form_eigs};
    use proptest::prelude::*;

    #[test]
    fn asymptote_values() {
        let p = ModelParams::unit(0.5, 0.0).unwrap();
        assert!((asymptotic_constant(0.5) - 1.0).abs() < 1e-14);
        assert!((mse_asymptotic(Position::Endpoint, 1e-4, &p) - 1e-2).abs() < 1e-15);
        assert!((mse_asymptotic(Position::Interior, 1e-4, &p) - 5e-3).abs() < 1e-15);
        let p = ModelParams::unit(0.7, -1.0).unwrap();
        assert!((asymptotic_constant(0.7) - 1.0374).abs() < 1e-4);
        assert!((mse_asymptotic(Position::Endpoint, 1e-6, &p) - 3.281e-4).abs() < 1e-7);
        assert_eq!(Position::of(0.0), None);
    }

    #[test]
    fn brownian_endpoint_and_interior() {
        let p = ModelParams::unit(0.5, 0.0).unwrap();
        let spec = ou_closed_form_eigs(0.0, 20_000).unwrap();
        let end = mse_series(1.0, 1e-4, &p, &spec).unwrap();
        assert!((end.value / 1e-2 - 1.0).abs() < 0.05, "{}", end.value);
        check_truncation(&end, 1e-4, spec.len()).unwrap();
        let mid = mse_series(0.5, 1e-4, &p, &spec).unwrap();
        assert!((mid.value / 5e-3 - 1.0).abs() < 0.05);
    }

    #[test]
    fn truncation_is_refused() {
        let p = ModelParams::unit(0.5, 0.0).unwrap();
        let spec = ou_closed_form_eigs(0.0, 10).unwrap();
        let v = mse_series(1.0, 1e-8, &p, &spec).unwrap();
        assert!(matches!(check_truncation(&v, 1e-8, 10), Err(Error::Truncation(_))));
    }

    #[test]
    fn series_equals_direct_solve() {
        for (h, b) in [(0.7, -1.0), (0.3, 0.5)] {
            let p = ModelParams::new(h, b, 1.5, 2.0).unwrap();
            let unit = p.rescaled();
            let grid = QuadGrid::unit_gauss_legendre(120).unwrap();
            let cov = cov_matrix(&grid, &unit).unwrap();
            let spec = nystrom_eigs(&cov, &unit, 120).unwrap();
            for eps in [1e-2, 1e-4] {
                let wh = mse_wiener_hopf_many(&[0.3, 0.5, 0.8], eps, &p, &cov).unwrap();
                for (u, direct) in wh {
                    let s = mse_series(u, eps, &p, &spec).unwrap();
                    assert_eq!(s.u, u);
                    assert!((s.value / direct - 1.0).abs() < 1e-9, "H={h} eps={eps} u={u}: {} vs {direct}", s.value);
                }
            }
        }
    }

    #[test]
    fn classical_interior_half() {
        let p = ModelParams::unit(0.5, 1.0).unwrap();
        let grid = QuadGrid::unit_gauss_legendre(400).unwrap();
        let cov = cov_matrix(&grid, &p).unwrap();
        let v = mse_wiener_hopf(0.5, 1e-4, &p, &cov).unwrap();
        assert!((v / 1e-2 - 0.5).abs() < 0.01, "{v}");
        let p = ModelParams::unit(0.5, 0.0).unwrap();
        let cov = cov_matrix(&grid, &p).unwrap();
        let v = mse_wiener_hopf(1.0, 1e-4, &p, &cov).unwrap();
        assert!((v / 1e-2 - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn leading_term_does_not_depend_on_horizon() {
        let ratio = |horizon: f64| -> Vec<f64> {
            let p = ModelParams::new(0.7, -1.0, 1.0, horizon).unwrap();
            let spec = crate::spectral_oracle::oracle_spectrum(&p, 400, 400, 32).unwrap();
            let r = convergence_study(&p, &[1e-4], &[0.5, 1.0], &spec, None).unwrap();
            r.rows.iter().map(|row| row.ratio.unwrap()).collect()
        };
        for (a, b) in ratio(1.0).iter().zip(ratio(2.0)) {
            assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn sweep_report() {
        let p = ModelParams::unit(0.5, 0.0).unwrap();
        let spec = ou_closed_form_eigs(0.0, 5000).unwrap();
        let r = convergence_study(&p, &[1e-2, 1e-3, 1e-4], &[0.5, 1.0], &spec, None).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert!(r.monotone_in_eps && r.below_prior);
        for k in 0..2 {
            assert!(r.ratios_at(k).iter().all(|x| (x.unwrap() - 1.0).abs() < 0.01));
        }
        assert!(trends_to_one(&[1.3, 0.9, 1.05], 0.0));
        assert!(!trends_to_one(&[1.05, 0.9], 0.0));
        assert!(r.row(2, 0).i2_over_eps.unwrap().abs() < 10.0);
        assert!(convergence_study(&p, &[1e-3, 1e-2], &[0.5], &spec, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn error_grows_with_noise(e1 in -8.0f64..0.0, de in 0.01f64..3.0, u in 0.05f64..1.0) {
            let p = ModelParams::unit(0.5, 0.7).unwrap();
            let spec = ou_closed_form_eigs(0.7, 400).unwrap();
            let lo = mse_series(u, 10f64.powf(e1), &p, &spec).unwrap().value;
            let hi = mse_series(u, 10f64.powf(e1 + de), &p, &spec).unwrap().value;
            prop_assert!(lo <= hi);
            prop_assert!(lo >= 0.0);
        }
    }
}
