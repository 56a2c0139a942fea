use std::fs;

use rayon::prelude::*;
use sfd_core::fpe::{self, DiffusionVariant, FpeConfig};
use sfd_core::fraccalc::ConvMethod;
use sfd_core::gle::{self, AsymptoticLaw, CaseTag, GleParams, LawForm, Regime};
use sfd_core::mlf::{ml_eval, ml_kernel, MlOrder};
use sfd_core::msd_models::{self as models, MsdCurve, PhysicalChannel};
use sfd_core::simulate::{self, SimConfig};

use crate::output::Report;
use crate::params::Params;
use crate::CliError;

/// Main report plus named sibling files.
pub struct Outputs {
    pub main: Report,
    pub extra: Vec<(String, Report)>,
}

impl From<Report> for Outputs {
    fn from(main: Report) -> Self {
        Self { main, extra: Vec::new() }
    }
}

pub fn run(p: &Params) -> Result<Outputs, CliError> {
    match p.command {
        "ml" => ml(p).map(Into::into),
        "gle-msd" => gle_msd(p).map(Into::into),
        "models" => models_cmd(p).map(Into::into),
        "calibrate" => calibrate(p).map(Into::into),
        "regimes" => regimes(p).map(Into::into),
        "simulate" => simulate_cmd(p).map(Into::into),
        "fpe" => fpe_cmd(p),
        other => unreachable!("{other}"),
    }
}

fn time_grid(p: &Params) -> Result<Vec<f64>, CliError> {
    Ok(models::log_grid(p.f64("t-min")?, p.f64("t-max")?, p.usize("per-decade")?)?)
}

fn ml(p: &Params) -> Result<Report, CliError> {
    let order = MlOrder::new(p.f64("alpha")?, p.f64("beta")?)?;
    let mut z = p.list("z")?;
    if z.is_empty() {
        let (lo, hi, n) = (p.f64("z-min")?, p.f64("z-max")?, p.usize("n")?);
        if n == 0 {
            return Err(CliError::Usage("n must be positive".into()));
        }
        z = (0..n)
            .map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect();
    }
    let e = z.iter().map(|&z| ml_eval(order, z)).collect::<Result<Vec<_>, _>>()?;
    Ok(Report::default().column("z", z).column("E", e))
}

pub fn gle_params(p: &Params) -> Result<GleParams, CliError> {
    let (gamma, l1, l2, kt) = (p.f64("gamma")?, p.f64("lambda1")?, p.f64("lambda2")?, p.f64("kT")?);
    let mut g = if p.bool("overdamped")? {
        GleParams::overdamped(gamma, l1, l2, kt)?
    } else {
        GleParams::new(p.f64("alpha")?, gamma, l1, l2, kt)?
    };
    let a = p.f64_or_auto("force")?.unwrap_or(g.force_amp());
    g = g.with_force(a, p.f64("kappa")?)?;
    if let Some(v0) = p.f64_or_auto("v0")? {
        g = g.with_v0(v0)?;
    }
    Ok(g.with_x0(p.f64("x0")?)?)
}

fn auto_case(g: &GleParams) -> CaseTag {
    if g.overdamped {
        CaseTag::Case3a
    } else if g.lambda2 == 0.0 {
        CaseTag::Case1
    } else if g.lambda1 == 0.0 {
        CaseTag::Case3b
    } else {
        CaseTag::Case3
    }
}

fn law_note(l: &AsymptoticLaw) -> String {
    let regime = match l.regime {
        Regime::Short => "short",
        Regime::Long => "long",
    };
    let form = match l.form {
        LawForm::Power => "power",
        LawForm::Log => "log",
        LawForm::Constant => "constant",
    };
    let pre = l.prefactor.map_or("unknown".into(), crate::output::fmt);
    format!(
        "law regime={regime} form={form} exponent={} prefactor={pre} condition={}",
        crate::output::fmt(l.exponent),
        l.condition
    )
}

fn gle_msd(p: &Params) -> Result<Report, CliError> {
    let g = gle_params(p)?;
    let times = time_grid(p)?;
    let curve = gle::msd_curve(&g, &times)?;
    let (case, explicit) = match p.choice("case", &["auto", "1", "2", "3", "3a", "3b"])? {
        "auto" => (auto_case(&g), false),
        "1" => (CaseTag::Case1, true),
        "2" => (CaseTag::Case2 { noise_exponent: p.f64("noise-exponent")? }, true),
        "3" => (CaseTag::Case3, true),
        "3a" => (CaseTag::Case3a, true),
        _ => (CaseTag::Case3b, true),
    };
    let mut report = Report::default().note(format!("route={:?}", g.route()).to_lowercase());
    let laws = match gle::asymptotic_laws(&g, case) {
        Ok(l) => l,
        Err(e) if explicit => return Err(e.into()),
        Err(e) => {
            report = report.note(format!("no asymptotic laws: {e}"));
            Vec::new()
        }
    };
    let column = |regime: Regime| -> Vec<f64> {
        let law = laws.iter().find(|l| l.regime == regime);
        times
            .iter()
            .map(|&t| law.and_then(|l| l.eval(t)).unwrap_or(f64::NAN))
            .collect()
    };
    let (short, long) = (column(Regime::Short), column(Regime::Long));
    for l in &laws {
        report = report.note(law_note(l));
    }
    Ok(report
        .column("t", curve.times)
        .column("msd", curve.values)
        .column("short_law", short)
        .column("long_law", long))
}

fn exponent_column(c: &MsdCurve) -> Result<Vec<f64>, CliError> {
    Ok(models::exponent_profile(c)?.into_iter().map(|(_, s)| s).collect())
}

fn models_cmd(p: &Params) -> Result<Report, CliError> {
    let times = time_grid(p)?;
    let figure = p.usize("figure")?;
    let curve = |tag: &str, f: &(dyn Fn(f64) -> sfd_core::Result<f64> + Sync)| -> Result<MsdCurve, CliError> {
        let v = times.par_iter().map(|&t| f(t)).collect::<sfd_core::Result<Vec<_>>>()?;
        Ok(MsdCurve::new(times.clone(), v, None, tag)?)
    };
    let figure_curve = match figure {
        0 => None,
        1 => {
            let order = MlOrder::new(0.5, 2.0)?;
            Some(curve("figure-1", &|t| Ok(2.0 * ml_kernel(order, 1.0, 1.0, t)?))?)
        }
        2 | 3 => Some(curve("figure-3", &|t| models::three_regime_msd(1.0, 1.0, t))?),
        n => return Err(CliError::Usage(format!("figure must be 0 to 3, got {n}"))),
    };
    if let Some(c) = figure_curve {
        let e = exponent_column(&c)?;
        return Ok(Report::default()
            .column("t", c.times)
            .column("msd", c.values)
            .column("exponent", e));
    }
    let ch = PhysicalChannel::new(p.f64("l")?, p.f64("theta")?, p.f64("tau")?)?;
    let (kt, beta, l2) = (p.f64("kT")?, p.f64("beta")?, p.f64("lambda2")?);
    let (d0, f) = (ch.d0(), ch.mobility());
    let brandani = curve("brandani", &|t| models::brandani_msd(&ch, t))?;
    let lin = curve("lin", &|t| models::lin_msd(d0, f, t))?;
    let family = curve("ml-family", &|t| models::ml_family_msd(&ch, beta, kt, t))?;
    let literal = curve("ml-family-paper", &|t| {
        models::ml_family_msd_with(&ch, beta, kt, models::LambdaVariant::PaperLiteral, t)
    })?;
    let three = curve("three-regime", &|t| models::three_regime_msd(kt, l2, t))?;
    Ok(Report::default()
        .scalar("D0", d0)
        .scalar("F", f)
        .column("t", times.clone())
        .column("brandani", brandani.values)
        .column("lin", lin.values)
        .column("ml_family", family.values)
        .column("ml_family_paper", literal.values)
        .column("three_regime", three.values))
}

fn calibrate(p: &Params) -> Result<Report, CliError> {
    p.choice("format", &["json"])?;
    let ch = PhysicalChannel::new(p.f64("l")?, p.f64("theta")?, p.f64("tau")?)?;
    let c = models::calibrate_family(&ch, p.f64("beta")?, p.f64("kT")?)?;
    Ok(Report::default()
        .scalar("D0", ch.d0())
        .scalar("F", ch.mobility())
        .scalar("zeta", c.zeta_prime)
        .scalar("lambda", c.lambda_matched)
        .scalar("lambda_paper", c.lambda_paper)
        .scalar("crossover_time", ch.crossover_time()))
}

/// First column `t`, value column by name (default: the second one).
fn read_curve(path: &str, column: &str) -> Result<MsdCurve, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Usage(format!("{path}: no header row")))?
        .split(',')
        .map(str::trim)
        .collect();
    if header.first() != Some(&"t") || header.len() < 2 {
        return Err(CliError::Usage(format!("{path}: first column must be t")));
    }
    let idx = if column.is_empty() {
        1
    } else {
        header
            .iter()
            .position(|h| *h == column)
            .ok_or_else(|| CliError::Usage(format!("{path}: no column '{column}'")))?
    };
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let num = |j: usize| cells.get(j).and_then(|c| c.trim().parse::<f64>().ok());
        match (num(0), num(idx)) {
            (Some(a), Some(b)) => {
                t.push(a);
                v.push(b);
            }
            _ => return Err(CliError::Usage(format!("{path}: bad data row {}", i + 1))),
        }
    }
    Ok(MsdCurve::new(t, v, None, header[idx])?)
}

fn regimes(p: &Params) -> Result<Report, CliError> {
    let curve = read_curve(p.raw("input"), p.raw("column"))?;
    let targets = p.list("targets")?;
    let intervals = models::regime_boundaries(&curve, &targets, p.f64("tol")?)?;
    let e = exponent_column(&curve)?;
    let mut r = Report::default();
    for i in &intervals {
        r = r.note(format!(
            "interval exponent={} t_enter={} t_exit={}",
            crate::output::fmt(i.exponent),
            crate::output::fmt(i.t_enter),
            crate::output::fmt(i.t_exit)
        ));
    }
    r.arrays = vec![
        ("interval_exponent".into(), intervals.iter().map(|i| i.exponent).collect()),
        ("interval_t_enter".into(), intervals.iter().map(|i| i.t_enter).collect()),
        ("interval_t_exit".into(), intervals.iter().map(|i| i.t_exit).collect()),
    ];
    Ok(r.column("t", curve.times).column("exponent", e))
}

fn simulate_cmd(p: &Params) -> Result<Report, CliError> {
    let g = gle_params(p)?;
    let mut cfg = SimConfig::new(p.f64("dt")?, p.usize("n-steps")?, p.usize("n-paths")?, p.u64("seed")?);
    cfg.method = match p.choice("method", &["auto", "fft", "direct"])? {
        "fft" => ConvMethod::Fft,
        "direct" => ConvMethod::Direct,
        _ => ConvMethod::Auto,
    };
    let stride = p.usize("stride")?;
    if stride == 0 {
        return Err(CliError::Usage("stride must be positive".into()));
    }
    let e = simulate::simulate_paths_with(&g, &cfg)?;
    let c = simulate::ensemble_msd(&e)?;
    let se = c.stderr.clone().unwrap_or_default();
    let keep: Vec<usize> = (0..c.len()).filter(|i| (i + 1) % stride == 0).collect();
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let times = pick(&c.times);
    let mut r = Report::default()
        .column("t", times.clone())
        .column("msd", pick(&c.values))
        .column("stderr", pick(&se));
    if p.bool("reference")? {
        let reference = times
            .par_iter()
            .map(|&t| gle::msd(&g, t))
            .collect::<sfd_core::Result<Vec<_>>>()?;
        let within = keep
            .iter()
            .zip(&reference)
            .filter(|(&i, a)| (c.values[i] - **a).abs() <= 3.0 * se[i])
            .count();
        r = r
            .scalar("within_3se_fraction", within as f64 / keep.len().max(1) as f64)
            .column("analytic", reference);
    }
    Ok(r)
}

fn fpe_cmd(p: &Params) -> Result<Outputs, CliError> {
    let variant = match p.choice("variant", &["matched", "paper"])? {
        "paper" => DiffusionVariant::Paper,
        _ => DiffusionVariant::Matched,
    };
    let (d0, f, sigma0) = (p.f64("D0")?, p.f64("F")?, p.f64("sigma0")?);
    let mut times = p.list("t")?;
    if times.is_empty() {
        times = time_grid(p)?;
    }
    let t_end = *times.last().ok_or_else(|| CliError::Usage("no output times".into()))?;
    let half_width = match p.f64_or_auto("half-width")? {
        Some(l) => l,
        None => {
            let s = fpe::effective_time(d0, f, t_end, variant)?;
            fpe::suggested_half_width((sigma0 * sigma0 + 2.0 * s).sqrt())
        }
    };
    let nx = match p.raw("nx") {
        "auto" => (2.0 * half_width / (sigma0 / 40.0)).ceil() as usize,
        _ => p.usize("nx")?,
    };
    let mut cfg = FpeConfig::new(d0, f, half_width, nx, variant);
    cfg.sigma0 = sigma0;
    cfg.step_eps = p.f64("step-eps")?;
    let sol = fpe::solve_fpe_with(&cfg, &times)?;
    let var = fpe::solution_variance(&sol)?;
    let predicted: Vec<f64> = sol.effective_time.iter().map(|s| sigma0 * sigma0 + 2.0 * s).collect();
    let max_error = (0..times.len())
        .map(|k| {
            sol.density[k]
                .iter()
                .zip(sol.analytic_density(k))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let main = Report::default()
        .scalar("half_width", half_width)
        .scalar("nx", nx as f64)
        .scalar("dx", cfg.dx())
        .scalar("steps", sol.steps as f64)
        .scalar("max_error", max_error)
        .column("t", times.clone())
        .column("variance", var.values)
        .column("predicted", predicted)
        .column("mass", sol.mass.clone());
    let mut extra = Vec::new();
    if p.bool("snapshots")? {
        for (k, w) in sol.density.iter().enumerate() {
            let r = Report::default()
                .scalar("t", times[k])
                .column("x", sol.x_grid.clone())
                .column("W", w.clone());
            extra.push((format!("density-{}", k + 1), r));
        }
    }
    Ok(Outputs { main, extra })
}
