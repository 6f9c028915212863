//! Pipelines behind each subcommand.

use std::fs;
use std::str::FromStr;

use log::info;
use rayon::prelude::*;
use serde_json::{json, Value};

use torsionlab::asymmetry::{fraenkel, AsymmetryConfig};
use torsionlab::brownian::{self, WosConfig};
use torsionlab::certify::{self, Analysis, Certificate, CertifyConfig, Solver};
use torsionlab::geometry::parse_domain_spec;
use torsionlab::level::{self, Exponent};
use torsionlab::stable::{self, CalibrationConfig, FractionalConfig, SampleGrid};
use torsionlab::Domain;

use crate::report::{csv_field, Report, Series};
use crate::{num, CliError, Command, RunRequest, Theorem};

/// Validated inputs of a request; `inputs` is the cache-key material.
pub struct Prepared {
    pub inputs: Value,
    domain: Option<Domain>,
    point: Option<Vec<f64>>,
    p: Option<Exponent>,
    eps: Vec<f64>,
}

pub fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    let v: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if (1..=3).contains(&v.len()) && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(CliError::Validation(format!("--point expects X,Y[,Z], got `{s}`"))),
    }
}

pub fn parse_eps_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|e| e.is_finite() && *e >= 0.0)
                .ok_or_else(|| CliError::Validation(format!("bad eps value `{t}`")))
        })
        .collect()
}

fn load_domain(req: &RunRequest) -> Result<Domain, CliError> {
    let path = req
        .options
        .domain
        .as_ref()
        .ok_or_else(|| CliError::Validation(format!("{} needs --domain PATH", req.command.name())))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read domain file {}: {e}", path.display())))?;
    Ok(parse_domain_spec(&text)?)
}

pub fn prepare(req: &RunRequest) -> Result<Prepared, CliError> {
    let o = &req.options;
    let needs_domain = !matches!(req.command, Command::Sweep | Command::Calibrate);
    let domain = if needs_domain || (req.command == Command::Calibrate && o.domain.is_some()) {
        Some(load_domain(req)?)
    } else {
        None
    };
    let point = o.point.as_deref().map(parse_point).transpose()?;
    if let (Some(d), Some(x)) = (&domain, &point) {
        d.check_dim(x)?;
    }
    let p = o.p.as_deref().map(Exponent::from_str).transpose()?;
    let eps = if req.command == Command::Sweep {
        let e = parse_eps_list(&o.eps)?;
        if e.is_empty() {
            return Err(CliError::Validation("empty sweep: --eps lists no values".into()));
        }
        e
    } else {
        Vec::new()
    };
    if req.command == Command::Certify && o.theorem.is_none() {
        return Err(CliError::Validation("certify needs --theorem {1,2,3,psz}".into()));
    }
    if let Some(a) = o.alpha {
        stable::check_order(a)?;
    }
    if !(o.beta_n > 0.0) || !(o.theta > 0.0 && o.theta <= 1.0) {
        return Err(CliError::Validation("--beta-n must be > 0 and --theta in (0, 1]".into()));
    }
    let inputs = json!({
        "domain": domain.as_ref().map(|d| d.spec_json()),
        "theorem": o.theorem.map(Theorem::label),
        "p": p.map(|p| p.to_string()),
        "alpha": o.alpha,
        "point": point,
        "grid_res": o.grid_res,
        "wos_paths": o.wos_paths,
        "wos_eps": o.wos_eps,
        "beta_n": o.beta_n,
        "theta": o.theta,
        "seed": o.seed,
        "eps": eps,
        "amplitude": o.amplitude,
        "sample_res": o.sample_res,
        "dt": o.dt,
        "dim": o.dim,
    });
    Ok(Prepared {
        inputs,
        domain,
        point,
        p,
        eps,
    })
}

pub fn execute(req: &RunRequest, prep: &Prepared) -> Result<Report, CliError> {
    match req.command {
        Command::Torsion => torsion(req, prep),
        Command::Asymmetry => asymmetry(prep),
        Command::Deficit => deficit(req, prep),
        Command::Certify => certify_one(req, prep),
        Command::Sweep => sweep(req, prep),
        Command::Calibrate => calibrate(req, prep),
    }
}

fn domain(prep: &Prepared) -> &Domain {
    prep.domain.as_ref().expect("prepare loaded the domain")
}

fn certify_config(req: &RunRequest) -> CertifyConfig {
    CertifyConfig {
        resolution: req.options.grid_res,
        beta_n: req.options.beta_n,
        theta: req.options.theta,
        seed: req.options.seed,
        ..CertifyConfig::default()
    }
}

fn wos_config(req: &RunRequest) -> WosConfig {
    let mut c = WosConfig {
        seed: req.options.seed,
        boundary_eps: req.options.wos_eps,
        ..WosConfig::default()
    };
    if let Some(k) = req.options.wos_paths {
        c.paths = k;
    }
    c
}

fn mu_series(field: &torsionlab::ScalarField) -> Result<Series, CliError> {
    let mu = level::distribution_function(field, certify::NORM_SLICES)?;
    let top = mu.max_level();
    let points = (0..=256)
        .map(|k| {
            let t = top * k as f64 / 256.0;
            [t, mu.eval(t)]
        })
        .collect();
    Ok(Series {
        name: "mu".into(),
        x_label: "t".into(),
        y_label: "mu(t)".into(),
        points,
    })
}

fn torsion(req: &RunRequest, prep: &Prepared) -> Result<Report, CliError> {
    let d = domain(prep);
    let field = brownian::grid_torsion(d, req.options.grid_res)?;
    let rigidity = brownian::torsional_rigidity(&field)?;
    let mut j = json!({
        "domain": d.spec_json(),
        "resolution": req.options.grid_res,
        "volume": num(d.measure()?),
        "rigidity": num(rigidity),
        "max": num(field.max()),
    });
    if let Some(x) = &prep.point {
        let mut at = json!({ "x": x, "grid": num(field.interpolate(x)?) });
        if let Some(c) = brownian::closed_form_lifetime(d, x) {
            at["closed_form"] = num(c);
        }
        if req.options.wos_paths.is_some() {
            let est = brownian::wos_lifetime(d, x, &wos_config(req))?;
            at["wos"] = json!({ "mean": num(est.mean), "stderr": num(est.stderr), "warning": est.warning });
        }
        j["point"] = at;
    }
    Ok(Report {
        json: j,
        csv: field.to_csv(),
        series: vec![mu_series(&field)?],
    })
}

fn asymmetry(prep: &Prepared) -> Result<Report, CliError> {
    let d = domain(prep);
    let r = fraenkel(d, &AsymmetryConfig::default())?;
    let center: Vec<String> = r.center.iter().map(|c| c.to_string()).collect();
    let csv = format!(
        "domain,A,center,method,evaluations\n{},{},{},{},{}\n",
        d.kind(),
        r.a,
        csv_field(&center.join(" ")),
        csv_field(&r.method),
        r.evaluations
    );
    Ok(Report {
        json: json!({ "domain": d.spec_json(), "result": r }),
        csv,
        series: Vec::new(),
    })
}

fn deficit(req: &RunRequest, prep: &Prepared) -> Result<Report, CliError> {
    let d = domain(prep);
    let header = "domain,kind,p,x,value,sigma\n";
    if let Some(x) = &prep.point {
        let (solver, name) = if req.options.wos_paths.is_some() {
            (Solver::WalkOnSpheres(wos_config(req)), "wos")
        } else if brownian::closed_form_lifetime(d, x).is_some() {
            (Solver::ClosedForm, "closed_form")
        } else {
            (
                Solver::Grid {
                    resolution: req.options.grid_res,
                },
                "grid",
            )
        };
        let r = certify::deficit_point(d, x, &solver)?;
        let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        return Ok(Report {
            json: json!({ "domain": d.spec_json(), "x": x, "solver": name, "deficit": r }),
            csv: format!("{header}{},point,,{},{},{}\n", d.kind(), csv_field(&xs.join(" ")), r.value, r.sigma),
            series: Vec::new(),
        });
    }
    let p = prep.p.unwrap_or(Exponent::Infinity);
    let r = certify::deficit_lp(d, p, req.options.grid_res)?;
    Ok(Report {
        json: json!({ "domain": d.spec_json(), "resolution": req.options.grid_res, "deficit": r }),
        csv: format!("{header}{},lp,{p},,{},\n", d.kind(), r.value),
        series: Vec::new(),
    })
}

const CERT_HEADER: &str = "domain,eps,theorem,p,alpha,x,lhs,rhs,margin,sigma,passed\n";

fn cert_row(c: &Certificate, eps: Option<f64>) -> String {
    let get = |k: &str| c.params.get(k).map(|v| v.to_string().trim_matches('"').to_string()).unwrap_or_default();
    let x = c
        .params
        .get("x")
        .and_then(Value::as_array)
        .map(|a| a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    let kind = c.domain.get("kind").and_then(Value::as_str).unwrap_or("");
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}\n",
        kind,
        eps.map(|e| e.to_string()).unwrap_or_default(),
        c.theorem,
        get("p"),
        get("alpha"),
        csv_field(&x),
        c.lhs,
        c.rhs,
        c.margin,
        c.sigma,
        c.passed
    )
}

/// Ball amplitude from `--amplitude` or by calibration.
fn amplitude(req: &RunRequest, n: usize, alpha: f64) -> Result<(f64, Value), CliError> {
    if let Some(a) = req.options.amplitude {
        return Ok((a, json!({ "source": "given", "value": num(a) })));
    }
    let cal = CalibrationConfig {
        dt: req.options.dt,
        seed: req.options.seed,
        ..CalibrationConfig::default()
    };
    info!("calibrating ball amplitude (n = {n}, alpha = {alpha})");
    let est = stable::calibrate_ball_amplitude(n, alpha, &cal)?;
    Ok((
        est.mean,
        json!({
            "source": "calibrated",
            "value": num(est.mean),
            "stderr": num(est.stderr),
            "paths": cal.paths,
            "dt": cal.dt,
        }),
    ))
}

fn thm3(req: &RunRequest, d: &Domain, alpha: f64, amp: f64, cfg: &CertifyConfig) -> Result<Certificate, CliError> {
    let unit = certify::normalize_volume(d)?;
    let mut frac = FractionalConfig::new(d.dim(), alpha, amp)?
        .with_paths(req.options.wos_paths.unwrap_or(1024))
        .with_seed(req.options.seed);
    frac.boundary_eps = req.options.wos_eps;
    let sample = SampleGrid {
        resolution: req.options.sample_res,
        jitter: true,
    };
    Ok(certify::certify_thm3(&unit, &frac, &sample, cfg)?)
}

fn default_point(d: &Domain) -> Result<Vec<f64>, CliError> {
    let c = d.bbox().center();
    if d.is_inside(&c) {
        Ok(c)
    } else {
        Err(CliError::Validation(
            "bounding-box center is outside the domain; pass --point".into(),
        ))
    }
}

fn certify_one(req: &RunRequest, prep: &Prepared) -> Result<Report, CliError> {
    let d = domain(prep);
    let cfg = certify_config(req);
    let alpha = req.options.alpha.unwrap_or(1.0);
    let mut extra = Value::Null;
    let cert = match req.options.theorem.expect("checked in prepare") {
        Theorem::One => {
            let x = match &prep.point {
                Some(x) => x.clone(),
                None => default_point(d)?,
            };
            certify::certify_thm1(d, &x, &cfg)?
        }
        Theorem::Two => certify::certify_thm2(d, prep.p.unwrap_or(Exponent::Infinity), &cfg)?,
        Theorem::Three => {
            let (amp, info) = amplitude(req, d.dim(), alpha)?;
            extra = info;
            thm3(req, d, alpha, amp, &cfg)?
        }
        Theorem::Psz => certify::check_psz(d, alpha, &cfg)?,
    };
    let mut j = serde_json::to_value(&cert).expect("certificates serialize");
    if !extra.is_null() {
        j["amplitude"] = extra;
    }
    Ok(Report {
        json: j,
        csv: format!("{CERT_HEADER}{}", cert_row(&cert, None)),
        series: Vec::new(),
    })
}

fn sweep(req: &RunRequest, prep: &Prepared) -> Result<Report, CliError> {
    let cfg = certify_config(req);
    let theorems = match req.options.theorem {
        Some(t) => vec![t],
        None => vec![Theorem::One, Theorem::Two, Theorem::Three, Theorem::Psz],
    };
    let ps = match prep.p {
        Some(p) => vec![p],
        None => vec![Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity],
    };
    let alpha = req.options.alpha.unwrap_or(1.0);
    let amp = if theorems.contains(&Theorem::Three) {
        Some(amplitude(req, 2, alpha)?)
    } else {
        None
    };
    let per_eps: Vec<Vec<Certificate>> = prep
        .eps
        .par_iter()
        .map(|&e| -> Result<Vec<Certificate>, CliError> {
            let d = Domain::ellipse_eps(e)?;
            let mut out = Vec::new();
            let needs_analysis = theorems.iter().any(|t| matches!(t, Theorem::One | Theorem::Two));
            let an = if needs_analysis { Some(Analysis::new(&d, &cfg)?) } else { None };
            for t in &theorems {
                match t {
                    Theorem::One => {
                        let x = prep.point.clone().unwrap_or_else(|| vec![0.0, 0.0]);
                        out.push(certify::certify_thm1_with(an.as_ref().unwrap(), &x, &cfg)?);
                    }
                    Theorem::Two => {
                        for &p in &ps {
                            out.push(certify::certify_thm2_with(an.as_ref().unwrap(), p, &cfg)?);
                        }
                    }
                    Theorem::Three => {
                        let (a, _) = amp.as_ref().expect("calibrated above");
                        out.push(thm3(req, &d, alpha, *a, &cfg)?);
                    }
                    Theorem::Psz => out.push(certify::check_psz(&d, alpha, &cfg)?),
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;

    let mut csv = String::from(CERT_HEADER);
    let mut rows = Vec::new();
    let mut series: Vec<Series> = Vec::new();
    let mut push = |name: String, y_label: &str, x: f64, y: f64| {
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push([x, y]),
            None => series.push(Series {
                name,
                x_label: "eps".into(),
                y_label: y_label.into(),
                points: vec![[x, y]],
            }),
        }
    };
    for (&e, certs) in prep.eps.iter().zip(&per_eps) {
        for c in certs {
            csv.push_str(&cert_row(c, Some(e)));
            let mut v = serde_json::to_value(c).expect("certificates serialize");
            v["eps"] = num(e);
            rows.push(v);
            if c.theorem == "2" {
                let p = c.params.get("p").and_then(Value::as_str).unwrap_or("");
                push(format!("delta_p{p}"), &format!("delta_{p}"), e, c.lhs);
            }
        }
        if let Some(a) = certs
            .iter()
            .find_map(|c| c.intermediates.get("A").and_then(Value::as_f64))
        {
            push("asymmetry".into(), "A", e, a);
        }
    }
    let mut j = json!({ "eps": prep.eps, "certificates": rows });
    if let Some((_, info)) = amp {
        j["amplitude"] = info;
    }
    Ok(Report { json: j, csv, series })
}

fn calibrate(req: &RunRequest, prep: &Prepared) -> Result<Report, CliError> {
    let n = prep.domain.as_ref().map_or(req.options.dim, Domain::dim);
    let alpha = req.options.alpha.unwrap_or(1.0);
    let cal = CalibrationConfig {
        paths: req.options.wos_paths.unwrap_or(CalibrationConfig::default().paths),
        dt: req.options.dt,
        seed: req.options.seed,
        ..CalibrationConfig::default()
    };
    let est = stable::calibrate_ball_amplitude(n, alpha, &cal)?;
    let a = stable::a_n_alpha(n, alpha)?;
    let mut j = json!({
        "n": n,
        "alpha": alpha,
        "amplitude": num(est.mean),
        "stderr": num(est.stderr),
        "samples": est.samples,
        "warning": est.warning,
        "A_n_alpha": num(a),
        "paths": cal.paths,
        "dt": cal.dt,
        "seed": cal.seed,
    });
    if alpha == 2.0 {
        j["brownian_reference"] = num(1.0 / (2.0 * n as f64));
    }
    Ok(Report {
        json: j,
        csv: format!(
            "n,alpha,amplitude,stderr,samples\n{n},{alpha},{},{},{}\n",
            est.mean, est.stderr, est.samples
        ),
        series: Vec::new(),
    })
}
