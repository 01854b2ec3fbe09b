//! The four subcommands. Each returns the rendered output.

use fracspec::asymptotics::{
    first_order_spectrum, gamma0, h_weight, lambda_from_nu, nu_first_order, rho0, special_constants, theta,
    theta0, x_cauchy, x_negative, ThetaProfile,
};
use fracspec::error_analysis::{convergence_study, EigenSource, MseReport};
use fracspec::ia_refine::{refined_eigenpair, HybridSpectrum, IaConfig, RefinedPair};
use fracspec::model::{cov_matrix_with_order, ModelParams};
use fracspec::Complex64;
use fracspec::quad::QuadGrid;
use fracspec::report::{document, Cell, Table};
use fracspec::spectral_oracle::{oracle_spectrum, SpectrumMethod};
use fracspec::validation::{run_checks, CheckResult, ValidationConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::CliError;

const DEFAULT_EIGS: usize = 30;
/// Series length for spectra that are not tied to a grid.
const DEFAULT_SERIES_TERMS: usize = 20_000;
/// Highest index solved by the refined solver inside a series.
const REFINED_SERIES_PAIRS: usize = 30;

fn params(c: &RunConfig) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(c.hurst, c.beta, c.mu, c.horizon)?)
}

fn ia_config(c: &RunConfig) -> IaConfig {
    IaConfig { levels: c.n_semi, ..IaConfig::default() }
}

fn check_sizes(c: &RunConfig) -> Result<(), CliError> {
    if c.n_unit < 2 || c.gl_order < 2 || c.n_semi == 0 {
        return Err(CliError::Usage("grid, gl_order and n_semi must be at least 2, 2 and 1".into()));
    }
    Ok(())
}

fn header(t: &mut Table, command: &str, c: &RunConfig) {
    t.comment(format!("fracspec {} {command}", env!("CARGO_PKG_VERSION")));
    t.comment(format!(
        "hurst = {:?}, beta = {:?}, mu = {:?}, horizon = {:?}",
        c.hurst, c.beta, c.mu, c.horizon
    ));
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn emit_table(c: &RunConfig, t: &Table) -> Result<String, CliError> {
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(t.to_csv()),
        Format::Json => document(c, t).map_err(json_err),
    }
}

pub fn eigs(c: &RunConfig) -> Result<String, CliError> {
    check_sizes(c)?;
    let p = params(c)?;
    let n_max = c.n_max.unwrap_or(DEFAULT_EIGS);
    if n_max == 0 || n_max > c.n_unit {
        return Err(CliError::Usage(format!("n_max must lie in 1..={}", c.n_unit)));
    }
    let unit = p.rescaled();
    let oracle = oracle_spectrum(&p, c.n_unit, n_max, c.gl_order)?;
    let first = first_order_spectrum(&p, n_max, None)?;
    let refine = c.hurst >= 0.5 && !c.no_refine;
    let ia = ia_config(c);
    let refined: Vec<Option<RefinedPair>> = if refine {
        let grid = oracle.grid.as_ref().expect("oracle spectra carry their grid");
        (1..=n_max)
            .into_par_iter()
            .map(|n| (n >= ia.n_min).then(|| refined_eigenpair(n, &unit, grid, &ia)).transpose())
            .collect::<Result<_, _>>()?
    } else {
        vec![None; n_max]
    };

    let mut t = Table::new(&[
        "n",
        "lambda_oracle",
        "lambda_first_order",
        "lambda_refined",
        "nu_first_order",
        "nu_refined",
        "phi1_oracle",
        "phi1_first_order",
        "phi1_refined",
        "rel_err_first_order",
        "rel_err_refined",
    ]);
    header(&mut t, "eigs", c);
    t.comment(format!("oracle grid = {}, gl_order = {}", c.n_unit, c.gl_order));
    t.comment("eigenvalues of the operator rescaled to [0, 1]; on [0, T] multiply by T^(2H+1)");
    t.comment("rel_err = lambda / lambda_oracle - 1");
    if c.hurst < 0.5 {
        t.comment("note: the refined solver covers H >= 1/2 only; refined columns omitted");
    } else if c.no_refine {
        t.comment("note: refined columns omitted on request");
    } else {
        t.comment(format!("refined from n = {}", ia.n_min));
    }
    for ((o, f), r) in oracle.pairs.iter().zip(&first.pairs).zip(&refined) {
        let nu_first = nu_first_order(o.n, unit.hurst);
        let lambda_first = lambda_from_nu(nu_first, unit.hurst, unit.drift);
        let rp = r.as_ref().map(|r| &r.pair);
        t.push(vec![
            o.n.into(),
            o.lambda.into(),
            lambda_first.into(),
            rp.map(|r| r.lambda).into(),
            nu_first.into(),
            rp.and_then(|r| r.nu).into(),
            o.phi1.into(),
            f.phi1.into(),
            rp.map(|r| r.phi1).into(),
            (lambda_first / o.lambda - 1.0).into(),
            rp.map(|r| r.lambda / o.lambda - 1.0).into(),
        ]);
    }
    t.drop_empty_columns();
    emit_table(c, &t)
}

fn mse_report(c: &RunConfig, p: &ModelParams, eps: &[f64]) -> Result<MseReport, CliError> {
    let cov = if c.wiener_hopf {
        let grid = QuadGrid::unit_gauss_legendre(c.n_unit)?;
        Some(cov_matrix_with_order(&grid, &p.rescaled(), c.gl_order)?)
    } else {
        None
    };
    let report = match c.spectrum {
        SpectrumMethod::Oracle => {
            let n = c.n_max.unwrap_or(c.n_unit);
            if n == 0 || n > c.n_unit {
                return Err(CliError::Usage(format!("n_max must lie in 1..={}", c.n_unit)));
            }
            let spec = oracle_spectrum(p, c.n_unit, n, c.gl_order)?;
            convergence_study(p, eps, &c.u, &spec, cov.as_ref())?
        }
        SpectrumMethod::FirstOrder => {
            let spec = first_order_spectrum(p, c.n_max.unwrap_or(DEFAULT_SERIES_TERMS), None)?;
            convergence_study(p, eps, &c.u, &spec, cov.as_ref())?
        }
        SpectrumMethod::Refined => {
            let total = c.n_max.unwrap_or(DEFAULT_SERIES_TERMS);
            let grid = QuadGrid::unit_gauss_legendre(c.n_unit)?;
            let spec = HybridSpectrum::new(p, REFINED_SERIES_PAIRS.min(total), total, &grid, &ia_config(c))?;
            convergence_study(p, eps, &c.u, &spec as &(dyn EigenSource + Sync), cov.as_ref())?
        }
        SpectrumMethod::ClosedFormOu => {
            return Err(CliError::Usage("spectrum must be oracle, first_order or refined".into()));
        }
    };
    Ok(report)
}

pub fn mse(c: &RunConfig) -> Result<String, CliError> {
    check_sizes(c)?;
    let p = params(c)?;
    if c.eps.is_empty() || c.u.is_empty() {
        return Err(CliError::Usage("eps and u lists must be non-empty".into()));
    }
    let mut eps = c.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let report = mse_report(c, &p, &eps)?;
    if c.format == Some(Format::Json) {
        return document(c, &report).map_err(json_err);
    }

    let mut t = Table::new(&[
        "eps",
        "u",
        "u_used",
        "p_series",
        "tail_bound",
        "p_wiener_hopf",
        "p_asymptotic",
        "ratio",
        "i2",
        "i2_over_eps",
        "i2_scaled",
    ]);
    header(&mut t, "mse", c);
    t.comment(format!("spectrum = {}, pairs = {}", report.spectrum_method.as_str(), report.truncation));
    t.comment("asymptote: endpoint constant * (eps/mu^2)^exponent, interior the same divided by 2H+1");
    t.comment(format!("exponent = {:.16e}", report.exponent));
    t.comment(format!("constant = {:.16e}", report.constant));
    t.comment(format!("monotone_in_eps = {}, below_prior = {}", report.monotone_in_eps, report.below_prior));
    for r in &report.rows {
        t.push(vec![
            r.eps.into(),
            r.u.into(),
            r.u_used.into(),
            r.p_series.into(),
            r.tail_bound.into(),
            r.p_wiener_hopf.into(),
            r.p_asymptotic.into(),
            r.ratio.into(),
            r.i2.into(),
            r.i2_over_eps.into(),
            r.i2_scaled.into(),
        ]);
    }
    if !c.wiener_hopf {
        let j = 5;
        t.columns.remove(j);
        for row in &mut t.rows {
            row.remove(j);
        }
    }
    Ok(t.to_csv())
}

fn default_points() -> Vec<f64> {
    (0..=24).map(|k| 10f64.powf(-3.0 + k as f64 / 4.0)).collect()
}

#[derive(Serialize)]
struct SpecialRow {
    u: f64,
    theta0: f64,
    theta: f64,
    sin_over_gamma: f64,
    gamma0: f64,
    x_negative: f64,
    x_cauchy_re: f64,
    x_cauchy_im: f64,
    h: f64,
    rho0: f64,
}

pub fn special(c: &RunConfig) -> Result<String, CliError> {
    let p = params(c)?;
    let alpha = p.alpha();
    let drift = p.unit_drift();
    if let Some(nu) = c.nu {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(CliError::Usage(format!("frequency {nu} must be positive")));
        }
    }
    let profile = match c.nu {
        Some(nu) => ThetaProfile::for_frequency(alpha, drift, nu),
        None => ThetaProfile::limit(alpha),
    };
    let points = if c.points.is_empty() { default_points() } else { c.points.clone() };
    let rows: Vec<SpecialRow> = points
        .par_iter()
        .map(|&u| -> fracspec::Result<SpecialRow> {
            let xc = x_cauchy(Complex64::new(0.0, u), &profile)?;
            Ok(SpecialRow {
                u,
                theta0: theta0(u, alpha)?,
                theta: theta(u, &profile)?,
                sin_over_gamma: profile.sin_over_gamma(u),
                gamma0: gamma0(u, alpha),
                x_negative: x_negative(u, &profile)?,
                x_cauchy_re: xc.re,
                x_cauchy_im: xc.im,
                h: h_weight(u, &profile)?,
                rho0: rho0(u, alpha)?,
            })
        })
        .collect::<fracspec::Result<_>>()?;
    let k = special_constants(c.hurst, c.nu.map(|nu| (drift, nu)))?;

    let mut t = Table::new(&[
        "u",
        "theta0",
        "theta",
        "sin_over_gamma",
        "gamma0",
        "x_negative",
        "x_cauchy_re",
        "x_cauchy_im",
        "h",
        "rho0",
    ]);
    header(&mut t, "special", c);
    t.comment(format!("alpha = {:.16e}", alpha));
    match c.nu {
        Some(nu) => t.comment(format!("profile at frequency nu = {nu:?}, scaled drift = {drift:?}")),
        None => t.comment("profile of the infinite-frequency limit"),
    }
    t.comment("x_negative = X(-u), x_cauchy = X(i u), h and theta use the profile; theta0, gamma0, rho0 the limit");
    t.comment(format!("b_alpha = {:.16e}", k.b_alpha));
    if let Some(b) = k.b_alpha_nu {
        t.comment(format!("b_alpha_numeric = {b:.16e}"));
    }
    t.comment(format!("eta_h = {:.16e}", k.eta_h));
    t.comment(format!("x0_at_i = {:.16e} + {:.16e} i", k.x0_at_i.re, k.x0_at_i.im));
    t.comment(format!("|x0_at_i| = {:.16e}, arg = {:.16e}", k.x0_at_i.norm(), k.x0_at_i.arg()));
    for r in &rows {
        t.push(vec![
            r.u.into(),
            r.theta0.into(),
            r.theta.into(),
            r.sin_over_gamma.into(),
            r.gamma0.into(),
            r.x_negative.into(),
            r.x_cauchy_re.into(),
            r.x_cauchy_im.into(),
            r.h.into(),
            r.rho0.into(),
        ]);
    }
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(t.to_csv()),
        Format::Json => {
            #[derive(Serialize)]
            struct Results<'a> {
                constants: fracspec::asymptotics::SpecialConstants,
                rows: &'a [SpecialRow],
            }
            document(c, &Results { constants: k, rows: &rows }).map_err(json_err)
        }
    }
}

/// Rendered verdicts and the overall outcome.
pub fn validate(c: &RunConfig) -> Result<(String, Result<(), CliError>), CliError> {
    let vcfg = ValidationConfig { quick: c.quick, gl_order: c.gl_order, ..ValidationConfig::default() };
    if let Some(bad) = c.checks.iter().find(|&&id| !(1..=10).contains(&id)) {
        return Err(CliError::Usage(format!("unknown check {bad}; checks are numbered 1 to 10")));
    }
    let ids = (!c.checks.is_empty()).then_some(c.checks.as_slice());
    let results = run_checks(&vcfg, ids);
    for r in &results {
        eprintln!(
            "check {:>2} {:<34} {} ({:.1} s) {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.seconds,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let text = match c.format.unwrap_or(Format::Json) {
        Format::Json => document(c, &results).map_err(json_err)?,
        Format::Csv => verdict_table(c, &results).to_csv(),
    };
    let outcome = if failed == 0 { Ok(()) } else { Err(CliError::Validation { failed, total: results.len() }) };
    Ok((text, outcome))
}

fn verdict_table(c: &RunConfig, results: &[CheckResult]) -> Table {
    let mut t = Table::new(&["id", "name", "passed", "seconds", "detail"]);
    header(&mut t, "validate", c);
    t.comment("seconds are wall-clock timings and vary between runs");
    for r in results {
        t.push(vec![
            Cell::Int(r.id as i64),
            r.name.as_str().into(),
            if r.passed { "true" } else { "false" }.into(),
            r.seconds.into(),
            r.detail.as_str().into(),
        ]);
    }
    t
}
