//! Acceptance checks: each compares one computed quantity with an
//! independent reference at a fixed tolerance and reports pass or fail.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::asymptotics::{b_alpha_closed, b_alpha_numeric, lambda_from_nu, nu_first_order, x0_at_i};
use crate::error::Result;
use crate::error_analysis::{convergence_study, mse_wiener_hopf_many, mse_series};
use crate::ia_refine::{find_nu, refined_eigenpair, IaConfig};
use crate::model::{cov_matrix_with_order, fou_cov, ModelParams};
use crate::quad::QuadGrid;
use crate::spectral_oracle::{
    nystrom_eigs_with_order, nystrom_error_rate, oracle_spectrum, ou_closed_form_eigs, richardson_eigenvalues,
    Spectrum,
};

/// Sizes and switches of the suite.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationConfig {
    /// Skip the expensive checks (large grids and the refined solver).
    pub quick: bool,
    /// Grid of the eigenvalue comparisons; Richardson uses half of it too.
    pub oracle_grid: usize,
    /// Grid of the H = 1/2 spectra.
    pub classical_grid: usize,
    /// Grid and number of eigenpairs of the fractional error sweep.
    pub mse_grid: usize,
    /// Companion grid for extrapolating the sweep.
    pub mse_coarse_grid: usize,
    /// Grid of the series versus direct-solve identity.
    pub identity_grid: usize,
    /// Closed-form modes for the classical error check.
    pub classical_terms: usize,
    pub gl_order: usize,
    pub ia: IaConfig,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            quick: false,
            oracle_grid: 2000,
            classical_grid: 1000,
            mse_grid: 3000,
            mse_coarse_grid: 2000,
            identity_grid: 400,
            classical_terms: 200_000,
            gl_order: crate::model::DEFAULT_GL_ORDER,
            ia: IaConfig::default(),
        }
    }
}

impl ValidationConfig {
    pub fn quick() -> Self {
        Self { quick: true, ..Self::default() }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
    pub seconds: f64,
}

/// Checks that run in quick mode.
pub const QUICK_CHECKS: [u32; 5] = [1, 2, 7, 8, 10];

/// Total runtime budget of the full suite, in seconds.
pub const SUITE_BUDGET_SECONDS: f64 = 900.0;

pub const CHECK_NAMES: [&str; 10] = [
    "Brownian spectrum",
    "classical OU spectrum",
    "first-order eigenvalues",
    "endpoint law",
    "degenerate integro-algebraic case",
    "refinement dominance",
    "special constants",
    "series versus direct solve",
    "error asymptotics",
    "property suites",
];

struct Outcome {
    passed: bool,
    detail: String,
    metrics: BTreeMap<String, f64>,
}

impl Outcome {
    fn new() -> Self {
        Self { passed: true, detail: String::new(), metrics: BTreeMap::new() }
    }

    fn require(&mut self, ok: bool, what: impl AsRef<str>) {
        if !ok {
            self.passed = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(what.as_ref());
        }
    }

    fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }
}

/// Oracle spectra shared between checks.
#[derive(Default)]
struct OracleCache {
    spectra: HashMap<(u64, u64, usize, usize), Arc<Spectrum>>,
}

impl OracleCache {
    fn get(&mut self, hurst: f64, beta: f64, grid: usize, n_max: usize, gl_order: usize) -> Result<Arc<Spectrum>> {
        let key = (hurst.to_bits(), beta.to_bits(), grid, n_max);
        if let Some(s) = self.spectra.get(&key) {
            return Ok(s.clone());
        }
        let p = ModelParams::unit(hurst, beta)?;
        let s = Arc::new(oracle_spectrum(&p, grid, n_max, gl_order)?);
        self.spectra.insert(key, s.clone());
        Ok(s)
    }

    /// Richardson-extrapolated eigenvalues from grids N/2 and N.
    fn extrapolated(&mut self, hurst: f64, beta: f64, grid: usize, n_max: usize, gl_order: usize) -> Result<Vec<f64>> {
        let coarse = self.get(hurst, beta, grid / 2, n_max, gl_order)?;
        let fine = self.get(hurst, beta, grid, n_max, gl_order)?;
        Ok(richardson_eigenvalues(&coarse.lambdas(), &fine.lambdas(), nystrom_error_rate(hurst)))
    }
}

/// Least-squares slope of log y against log x.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn check_brownian(cfg: &ValidationConfig, out: &mut Outcome) -> Result<()> {
    let start = Instant::now();
    let p = ModelParams::unit(0.5, 0.0)?;
    let s = oracle_spectrum(&p, cfg.classical_grid, 10, cfg.gl_order)?;
    let worst = s
        .pairs
        .iter()
        .map(|e| {
            let nu = (e.n as f64 - 0.5) * PI;
            (e.lambda * nu * nu - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    out.metric("max_rel_error", worst);
    out.metric("seconds", secs);
    out.require(worst < 1e-3, format!("relative error {worst:.3e} >= 1e-3"));
    out.require(secs < 60.0, format!("runtime {secs:.1} s >= 60 s"));
    Ok(())
}

fn check_classical_ou(cfg: &ValidationConfig, out: &mut Outcome) -> Result<()> {
    let p = ModelParams::unit(0.5, 1.0)?;
    let s = oracle_spectrum(&p, cfg.classical_grid, 10, cfg.gl_order)?;
    let exact = ou_closed_form_eigs(1.0, 10)?;
    let worst = s
        .pairs
        .iter()
        .zip(&exact.pairs)
        .map(|(a, b)| (a.lambda / b.lambda - 1.0).abs())
        .fold(0.0, f64::max);
    out.metric("max_rel_error", worst);
    out.require(worst < 1e-3, format!("relative error {worst:.3e} >= 1e-3"));
    Ok(())
}

const EIGEN_SETS: [(f64, f64); 8] =
    [(0.3, 0.0), (0.3, -1.0), (0.6, 0.0), (0.6, -1.0), (0.7, 0.0), (0.7, -1.0), (0.8, 0.0), (0.8, -1.0)];

fn check_first_order(cfg: &ValidationConfig, cache: &mut OracleCache, out: &mut Outcome) -> Result<()> {
    let ns: Vec<usize> = (5..=30).collect();
    for (h, b) in EIGEN_SETS {
        let reference = cache.extrapolated(h, b, cfg.oracle_grid, 30, cfg.gl_order)?;
        let plain = cache.get(h, b, cfg.oracle_grid, 30, cfg.gl_order)?;
        let err = |n: usize, r: f64| (lambda_from_nu(nu_first_order(n, h), h, b) / r - 1.0).abs();
        let e20 = err(20, reference[19]);
        let errs: Vec<f64> = ns.iter().map(|&n| err(n, reference[n - 1])).collect();
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let slope = log_log_slope(&xs, &errs);
        let tag = format!("H{h}_b{b}");
        out.metric(format!("{tag}_err20"), e20);
        out.metric(format!("{tag}_err20_plain"), err(20, plain.pairs[19].lambda));
        out.metric(format!("{tag}_slope"), slope);
        out.require(e20 <= 0.05, format!("{tag}: error {e20:.3e} at n=20 exceeds 5%"));
        out.require(slope < 0.0, format!("{tag}: error trend slope {slope:.3} is not decreasing"));
    }
    Ok(())
}

fn check_endpoint(cfg: &ValidationConfig, cache: &mut OracleCache, out: &mut Outcome) -> Result<()> {
    for (h, b) in EIGEN_SETS {
        let s = cache.get(h, b, cfg.oracle_grid, 30, cfg.gl_order)?;
        let rel = s.pairs[19].phi1.powi(2) / (2.0 * h + 1.0) - 1.0;
        let tag = format!("H{h}_b{b}");
        out.metric(format!("{tag}_rel"), rel);
        out.require(rel.abs() <= 0.1, format!("{tag}: phi(1)^2 off by {:.3e}", rel));
    }
    Ok(())
}

fn check_degenerate(cfg: &ValidationConfig, out: &mut Outcome) -> Result<()> {
    let p = ModelParams::unit(0.5, 0.0)?;
    let mut worst_cos = 0.0f64;
    let mut worst_lambda = 0.0f64;
    let mut worst_index = 0.0f64;
    for n in cfg.ia.n_min..=30 {
        let r = find_nu(n, &p, &cfg.ia)?;
        let expected = (n as f64 - 0.5) * PI;
        worst_cos = worst_cos.max(r.nu.cos().abs());
        worst_lambda = worst_lambda.max((r.lambda(&p) * expected * expected - 1.0).abs());
        worst_index = worst_index.max((r.nu - expected).abs());
    }
    out.metric("max_abs_cos", worst_cos);
    out.metric("max_rel_lambda_error", worst_lambda);
    out.metric("max_frequency_error", worst_index);
    out.require(worst_cos <= 1e-8, format!("|cos nu| = {worst_cos:.3e} > 1e-8"));
    out.require(worst_lambda <= 1e-8, format!("eigenvalue error {worst_lambda:.3e} > 1e-8"));
    Ok(())
}

fn check_dominance(cfg: &ValidationConfig, cache: &mut OracleCache, out: &mut Outcome) -> Result<()> {
    let (h, b) = (0.7, -1.0);
    let p = ModelParams::unit(h, b)?;
    let reference = cache.extrapolated(h, b, cfg.oracle_grid, 30, cfg.gl_order)?;
    let plain = cache.get(h, b, cfg.oracle_grid, 30, cfg.gl_order)?;
    let grid = plain.grid.clone().expect("oracle spectra carry a grid");
    let mut losses = Vec::new();
    let mut worst_refined = 0.0f64;
    let mut best_first = f64::INFINITY;
    for n in 5..=30 {
        let pair = refined_eigenpair(n, &p, &grid, &cfg.ia)?.pair;
        let first = lambda_from_nu(nu_first_order(n, h), h, b);
        let e_ref = (pair.lambda / reference[n - 1] - 1.0).abs();
        let e_first = (first / reference[n - 1] - 1.0).abs();
        worst_refined = worst_refined.max(e_ref);
        best_first = best_first.min(e_first);
        if !(e_ref < e_first) {
            losses.push(n);
        }
        if n == 10 {
            let d = |phi: &[f64]| -> f64 {
                grid.weights
                    .iter()
                    .zip(phi)
                    .zip(&plain.pairs[9].phi)
                    .map(|((w, a), o)| w * (a - o) * (a - o))
                    .sum::<f64>()
                    .sqrt()
            };
            out.metric("n10_phi_distance_refined", d(&pair.phi));
        }
    }
    out.metric("max_rel_error_refined", worst_refined);
    out.metric("min_rel_error_first_order", best_first);
    out.require(losses.is_empty(), format!("refined not closer at n = {losses:?}"));
    Ok(())
}

fn check_constants(out: &mut Outcome) -> Result<()> {
    for alpha in [0.2, 0.5, 0.8] {
        for nu in [10.0, 1000.0] {
            let d = (b_alpha_numeric(0.0, nu, alpha)? - b_alpha_closed(alpha)).abs();
            out.metric(format!("b_alpha_{alpha}_nu{nu}"), d);
            out.require(d <= 1e-6, format!("b_alpha mismatch {d:.3e} at alpha={alpha}"));
        }
        let x = x0_at_i(alpha)?;
        let dm = (x.norm() - ((3.0 - alpha) / 2.0).sqrt()).abs();
        let da = (x.arg() - (1.0 - alpha) * PI / 8.0).abs();
        out.metric(format!("x0_modulus_{alpha}"), dm);
        out.metric(format!("x0_arg_{alpha}"), da);
        out.require(dm <= 1e-4 && da <= 1e-4, format!("X0(i) mismatch at alpha={alpha}: {dm:.3e}, {da:.3e}"));
    }
    Ok(())
}

fn check_identity(cfg: &ValidationConfig, out: &mut Outcome) -> Result<()> {
    let p = ModelParams::unit(0.7, -1.0)?;
    let grid = QuadGrid::unit_gauss_legendre(cfg.identity_grid)?;
    let cov = cov_matrix_with_order(&grid, &p, cfg.gl_order)?;
    let spec = nystrom_eigs_with_order(&cov, &p, cfg.identity_grid, cfg.gl_order)?;
    let us = [0.25, 0.5, 0.75];
    let mut worst = 0.0f64;
    for eps in [1e-2, 1e-3, 1e-4] {
        for (u, direct) in mse_wiener_hopf_many(&us, eps, &p, &cov)? {
            let series = mse_series(u, eps, &p, &spec)?.value;
            worst = worst.max((series / direct - 1.0).abs());
        }
    }
    out.metric("max_rel_difference", worst);
    out.require(worst <= 1e-6, format!("series and direct solve differ by {worst:.3e}"));
    Ok(())
}

const SWEEP: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

fn check_asymptotics(cfg: &ValidationConfig, out: &mut Outcome) -> Result<()> {
    // Classical case with the exact spectrum.
    let p = ModelParams::unit(0.5, 0.0)?;
    let spec = ou_closed_form_eigs(0.0, cfg.classical_terms)?;
    let r = convergence_study(&p, &[1e-6], &[0.5, 1.0], &spec, None)?;
    for (k, u) in [0.5, 1.0].iter().enumerate() {
        let ratio = r.row(0, k).ratio.unwrap_or(f64::NAN);
        out.metric(format!("classical_ratio_u{u}"), ratio);
        out.require((ratio - 1.0).abs() <= 0.02, format!("classical ratio {ratio:.5} at u={u} outside 2%"));
    }

    // Fractional case with the Nyström spectrum (all eigenpairs of the grid).
    let p = ModelParams::unit(0.7, -1.0)?;
    let us = [0.5, 1.0];
    let fine = oracle_spectrum(&p, cfg.mse_grid, cfg.mse_grid, cfg.gl_order)?;
    let fine_report = convergence_study(&p, &SWEEP, &us, &fine, None)?;
    drop(fine);
    let coarse = oracle_spectrum(&p, cfg.mse_coarse_grid, cfg.mse_coarse_grid, cfg.gl_order)?;
    let coarse_report = convergence_study(&p, &SWEEP, &us, &coarse, None)?;
    drop(coarse);
    let rate = nystrom_error_rate(p.hurst);
    let f = (cfg.mse_grid as f64 / cfg.mse_coarse_grid as f64).powf(rate);
    for (k, u) in us.iter().enumerate() {
        let raw: Vec<f64> = fine_report.ratios_at(k).into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
        let rough: Vec<f64> = coarse_report.ratios_at(k).into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
        let extrapolated: Vec<f64> = raw.iter().zip(&rough).map(|(a, c)| (f * a - c) / (f - 1.0)).collect();
        let last = *raw.last().expect("non-empty sweep");
        for (e, (a, x)) in SWEEP.iter().zip(raw.iter().zip(&extrapolated)) {
            out.metric(format!("ratio_u{u}_eps{e:e}"), *a);
            out.metric(format!("ratio_extrapolated_u{u}_eps{e:e}"), *x);
        }
        out.require((last - 1.0).abs() <= 0.1, format!("ratio {last:.5} at u={u}, eps=1e-6 outside 10%"));
        let monotone = extrapolated.windows(2).all(|w| (w[1] - 1.0).abs() <= (w[0] - 1.0).abs());
        out.require(monotone, format!("ratios at u={u} do not move monotonically toward 1: {extrapolated:?}"));
    }
    for e in 0..SWEEP.len() {
        if let Some(v) = fine_report.row(e, 0).i2_over_eps {
            out.metric(format!("i2_over_eps_eps{:e}", SWEEP[e]), v);
        }
    }
    out.require(fine_report.monotone_in_eps && fine_report.below_prior, "error not monotone in eps or above prior");
    Ok(())
}

/// Points spread over the unit cube by an additive recurrence.
fn spread(k: usize, dim: usize) -> f64 {
    const STEPS: [f64; 5] = [0.618_033_988_749_895, 0.414_213_562_373_095, 0.732_050_807_568_877, 0.236_067_977_499_79, 0.645_751_311_064_591];
    ((k as f64 + 1.0) * STEPS[dim % STEPS.len()]).fract()
}

fn fingerprint(s: &Spectrum) -> String {
    let mut out = String::new();
    for p in &s.pairs {
        out.push_str(&format!("{:.16e} {:.16e}", p.lambda, p.phi1));
        for v in &p.phi {
            out.push_str(&format!(" {v:.16e}"));
        }
        out.push('\n');
    }
    out
}

fn check_properties(cfg: &ValidationConfig, out: &mut Outcome) -> Result<()> {
    // Kernel symmetry and positive semidefiniteness.
    let p = ModelParams::unit(0.7, -1.0)?;
    let grid = QuadGrid::unit_gauss_legendre(200)?;
    let cov = cov_matrix_with_order(&grid, &p, cfg.gl_order)?;
    let spec = nystrom_eigs_with_order(&cov, &p, 30, cfg.gl_order)?;
    let asym = cov.max_asymmetry();
    let min_ratio = spec.diagnostics.min_eigenvalue.unwrap_or(f64::NAN) / spec.diagnostics.trace.unwrap_or(f64::NAN);
    out.metric("max_asymmetry", asym);
    out.metric("min_eigenvalue_over_trace", min_ratio);
    out.require(asym <= 1e-12, format!("kernel asymmetry {asym:.3e}"));
    out.require(min_ratio >= -1e-10, format!("negative eigenvalue ratio {min_ratio:.3e}"));

    // Scaling law across the parameter box.
    let mut worst_scaling = 0.0f64;
    for k in 0..40 {
        let h = 0.05 + 0.9 * spread(k, 0);
        let beta = -2.0 + 4.0 * spread(k, 1);
        let horizon = 0.5 + 2.5 * spread(k, 2);
        let (s, t) = (spread(k, 3), spread(k, 4));
        let big = ModelParams::new(h, beta, 1.0, horizon)?;
        let lhs = fou_cov(s * horizon, t * horizon, &big, cfg.gl_order)?;
        let rhs = big.covariance_scale() * fou_cov(s, t, &big.rescaled(), cfg.gl_order)?;
        worst_scaling = worst_scaling.max((lhs / rhs - 1.0).abs());
    }
    out.metric("max_scaling_error", worst_scaling);
    out.require(worst_scaling <= 1e-6, format!("scaling law error {worst_scaling:.3e}"));

    // Weighted orthonormality of oracle eigenfunctions.
    let big = oracle_spectrum(&p, 1000, 30, cfg.gl_order)?;
    let g = big.grid.as_ref().expect("oracle grid");
    let mut worst_ortho = 0.0f64;
    for a in &big.pairs {
        for b in &big.pairs {
            let ip: f64 = g.weights.iter().zip(&a.phi).zip(&b.phi).map(|((w, x), y)| w * x * y).sum();
            let target = if a.n == b.n { 1.0 } else { 0.0 };
            worst_ortho = worst_ortho.max((ip - target).abs());
        }
    }
    out.metric("max_orthonormality_defect", worst_ortho);
    out.require(worst_ortho <= 1e-8, format!("orthonormality defect {worst_ortho:.3e}"));

    // Error monotone in the noise level.
    let full = oracle_spectrum(&p, 400, 400, cfg.gl_order)?;
    let r = convergence_study(&p, &[1e-1, 1e-2, 1e-3, 1e-4], &[0.25, 0.5, 1.0], &full, None)?;
    out.require(r.monotone_in_eps, "error not monotone in eps");
    out.require(r.below_prior, "error above the prior variance");

    // Determinism, including invariance to the worker count.
    let run = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Domain(e.to_string()))?;
        pool.install(|| oracle_spectrum(&p, 150, 8, cfg.gl_order).map(|s| fingerprint(&s)))
    };
    let a = run(1)?;
    let b = run(3)?;
    let c = run(1)?;
    out.require(a == b && a == c, "repeated runs are not byte-identical");
    Ok(())
}

/// Run the selected checks (all when `ids` is None, the quick subset in
/// quick mode). Errors inside a check make it fail with the message.
pub fn run_checks(cfg: &ValidationConfig, ids: Option<&[u32]>) -> Vec<CheckResult> {
    let suite_start = Instant::now();
    let selected: Vec<u32> = match ids {
        Some(list) => list.to_vec(),
        None if cfg.quick => QUICK_CHECKS.to_vec(),
        None => (1..=10).collect(),
    };
    let mut cache = OracleCache::default();
    let mut results = Vec::new();
    for id in selected {
        let start = Instant::now();
        let mut out = Outcome::new();
        let status = match id {
            1 => check_brownian(cfg, &mut out),
            2 => check_classical_ou(cfg, &mut out),
            3 => check_first_order(cfg, &mut cache, &mut out),
            4 => check_endpoint(cfg, &mut cache, &mut out),
            5 => check_degenerate(cfg, &mut out),
            6 => check_dominance(cfg, &mut cache, &mut out),
            7 => check_constants(&mut out),
            8 => check_identity(cfg, &mut out),
            9 => check_asymptotics(cfg, &mut out),
            10 => check_properties(cfg, &mut out),
            _ => {
                out.require(false, format!("unknown check {id}"));
                Ok(())
            }
        };
        if let Err(e) = status {
            out.require(false, format!("{} failure: {e}", e.stage()));
        }
        results.push(CheckResult {
            id,
            name: (id as usize).checked_sub(1).and_then(|i| CHECK_NAMES.get(i)).unwrap_or(&"unknown").to_string(),
            passed: out.passed,
            detail: if out.passed { "ok".into() } else { out.detail },
            metrics: out.metrics,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    // The asymptotics check carries the budget of the whole suite.
    let total = suite_start.elapsed().as_secs_f64();
    if let Some(r) = results.iter_mut().find(|r| r.id == 9) {
        r.metrics.insert("suite_seconds".into(), total);
        if total > SUITE_BUDGET_SECONDS {
            r.passed = false;
            r.detail = format!("suite runtime {total:.0} s exceeds {SUITE_BUDGET_SECONDS} s");
        }
    }
    results
}
