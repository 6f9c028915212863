//! Certificates for the quantitative lifetime inequalities.
//!
//! Each certificate pairs a computed left side with a right side assembled
//! from the theorem constants and the intermediate quantities it depends on
//! (torsion values, distribution function, asymmetry, t*), so that the right
//! side can be recomputed from the record alone.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::asymmetry::{fraenkel, AsymmetryConfig};
use crate::brownian::{self, closed_form_lifetime, McEstimate, PathConfig, WosConfig};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{unit_ball_volume, Domain};
use crate::level::{self, Exponent};
use crate::stable::{self, CalibrationConfig, FractionalConfig, SampleGrid};

/// Conservative default for the quantitative isoperimetric constant β_n.
pub const DEFAULT_BETA_N: f64 = 0.1;
/// Level-set threshold θ in t* = sup{t : μ(t) > |D|(1 - θA)}.
pub const DEFAULT_THETA: f64 = 0.25;
/// Relative discretization error charged to grid quantities; from the
/// convergence study (ellipse ε = 1: 2.3e-5 sup error at res 256, 5.9e-6 at
/// 512) with a wide safety factor.
pub const GRID_REL_ERROR: f64 = 1e-3;

/// Constants of Theorems 1 and 2.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub n: usize,
    pub omega_n: f64,
    pub beta_n: f64,
    /// Fractional isoperimetric constant B_{n,α}, when configured.
    pub b_n_alpha: Option<f64>,
    /// `C_n = β_n ω_n^{1/n}`.
    pub c_n: f64,
    /// `C̃_n = C_n / (2n ω_n^{2/n})`.
    pub c_tilde_n: f64,
    pub p: Exponent,
    /// `C_{n,p}` for the requested finite p (None for p = ∞).
    pub c_n_p: Option<f64>,
    /// `C_{n,∞} = min{2β_n ω_n^{-1/n}, n} / (32n²)`.
    pub c_n_inf: f64,
}

impl Constants {
    /// The constant of Theorem 2 for the configured exponent.
    pub fn theorem2(&self) -> f64 {
        self.c_n_p.unwrap_or(self.c_n_inf)
    }
}

/// Evaluates the constants for dimension n, exponent p and β_n.
///
/// `C_{n,p} = min{p, 8C̃_n} / (2^{4(p+1)} n^{2p} ω_n^{2p/n} ‖u_B‖_p^p)` with
/// the norm taken over the ball of unit volume.
pub fn constants(n: usize, p: Exponent, beta_n: f64, b_n_alpha: Option<f64>) -> Result<Constants> {
    if n < 2 {
        return Err(Error::invalid(format!("constants need n >= 2, got {n}")));
    }
    if !(beta_n > 0.0) || !beta_n.is_finite() {
        return Err(Error::invalid(format!("beta_n must be positive, got {beta_n}")));
    }
    if let Some(b) = b_n_alpha {
        if !(b > 0.0) {
            return Err(Error::invalid("B_{n,alpha} must be positive"));
        }
    }
    let nf = n as f64;
    let omega = unit_ball_volume(n);
    let c_n = beta_n * omega.powf(1.0 / nf);
    let c_tilde_n = c_n / (2.0 * nf * omega.powf(2.0 / nf));
    let c_n_inf = (2.0 * beta_n * omega.powf(-1.0 / nf)).min(nf) / (32.0 * nf * nf);
    let c_n_p = match p {
        Exponent::Infinity => None,
        Exponent::Finite(q) => {
            if !(q >= 1.0) {
                return Err(Error::invalid(format!("p must be >= 1, got {q}")));
            }
            let norm = level::ball_lp_norm_pow(n, 1.0, q)?;
            Some(
                q.min(8.0 * c_tilde_n)
                    / (2f64.powf(4.0 * (q + 1.0))
                        * nf.powf(2.0 * q)
                        * omega.powf(2.0 * q / nf)
                        * norm),
            )
        }
    };
    Ok(Constants {
        n,
        omega_n: omega,
        beta_n,
        b_n_alpha,
        c_n,
        c_tilde_n,
        p,
        c_n_p,
        c_n_inf,
    })
}

/// How u_D(x) is evaluated.
#[derive(Clone, Debug)]
pub enum Solver {
    /// Closed form (balls, ellipses); a validation error otherwise.
    ClosedForm,
    /// Grid Poisson solve with this many cells across the bounding box.
    Grid { resolution: usize },
    WalkOnSpheres(WosConfig),
}

/// δ(x, D) with the torsion values it came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Deficit {
    pub value: f64,
    pub sigma: f64,
    pub u: f64,
    pub u_ball: f64,
}

/// `δ(x, D) = 1 - u_D(x)/u_B(0)` with B the equal-volume ball.
pub fn deficit_point(domain: &Domain, x: &[f64], solver: &Solver) -> Result<Deficit> {
    domain.check_dim(x)?;
    if !domain.is_inside(x) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let u_ball = brownian::ball_center_lifetime(domain)?;
    let (u, sigma_u) = match solver {
        Solver::ClosedForm => (
            closed_form_lifetime(domain, x).ok_or_else(|| {
                Error::invalid(format!("no closed form for a {} domain", domain.kind()))
            })?,
            0.0,
        ),
        Solver::Grid { resolution } => {
            let field = brownian::grid_torsion(domain, *resolution)?;
            let u = field.interpolate(x)?;
            (u, GRID_REL_ERROR * u)
        }
        Solver::WalkOnSpheres(cfg) => {
            let est = brownian::wos_lifetime(domain, x, cfg)?;
            (est.mean, est.stderr)
        }
    };
    Ok(Deficit {
        value: 1.0 - u / u_ball,
        sigma: sigma_u / u_ball,
        u,
        u_ball,
    })
}

/// δ_p(D) with the two norms it compares.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeficitLp {
    pub p: Exponent,
    pub value: f64,
    pub norm_domain: f64,
    pub norm_ball: f64,
}

/// Slices of the distribution function used for layer-cake norms.
pub const NORM_SLICES: usize = 4096;

/// `δ_p(D) = 1 - (‖u_D‖_p/‖u_B‖_p)^{κ(p)}` from the grid torsion field.
pub fn deficit_lp(domain: &Domain, p: Exponent, resolution: usize) -> Result<DeficitLp> {
    let field = brownian::grid_torsion(domain, resolution)?;
    deficit_lp_of(&field, domain.measure()?, p)
}

fn deficit_lp_of(field: &ScalarField, volume: f64, p: Exponent) -> Result<DeficitLp> {
    let mu = level::distribution_function(field, NORM_SLICES)?;
    let norm_domain = level::lp_norm(&mu, p)?;
    let norm_ball = level::ball_lp_norm(field.dim(), volume, p)?;
    Ok(DeficitLp {
        p,
        value: 1.0 - (norm_domain / norm_ball).powf(p.kappa()),
        norm_domain,
        norm_ball,
    })
}

/// Settings shared by the certificate pipelines.
#[derive(Clone, Debug)]
pub struct CertifyConfig {
    pub resolution: usize,
    pub slices: usize,
    pub beta_n: f64,
    pub theta: f64,
    pub asymmetry: AsymmetryConfig,
    pub seed: u64,
    pub grid_rel_error: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            resolution: 256,
            slices: NORM_SLICES,
            beta_n: DEFAULT_BETA_N,
            theta: DEFAULT_THETA,
            asymmetry: AsymmetryConfig::default(),
            seed: 0,
            grid_rel_error: GRID_REL_ERROR,
        }
    }
}

impl CertifyConfig {
    fn config_json(&self) -> Value {
        json!({
            "resolution": self.resolution,
            "slices": self.slices,
            "beta_n": self.beta_n,
            "theta": self.theta,
            "asymmetry_angles": self.asymmetry.angles,
            "asymmetry_grid_res": self.asymmetry.grid_res,
            "grid_rel_error": self.grid_rel_error,
        })
    }
}

/// One theorem check. `margin = lhs - rhs`; `sigma` is its uncertainty.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub theorem: String,
    pub domain: Value,
    pub params: Map<String, Value>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub sigma: f64,
    pub passed: bool,
    pub intermediates: Map<String, Value>,
    pub config: Value,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Certificate {
    /// `margin + 3σ ≥ 0`.
    pub fn holds_within(&self, k: f64) -> bool {
        self.margin + k * self.sigma >= 0.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn put(map: &mut Map<String, Value>, key: &str, v: f64) {
    map.insert(key.to_string(), num(v));
}

/// Field, distribution function, asymmetry and t* of one domain, shared by
/// several certificates.
pub struct Analysis {
    pub domain: Domain,
    pub field: ScalarField,
    pub mu: level::DistributionFunction,
    pub volume: f64,
    pub asymmetry: f64,
    pub t_star: f64,
}

impl Analysis {
    pub fn new(domain: &Domain, cfg: &CertifyConfig) -> Result<Self> {
        let field = brownian::grid_torsion(domain, cfg.resolution)?;
        let mu = level::distribution_function(&field, cfg.slices)?;
        let volume = domain.measure()?;
        let asymmetry = fraenkel(domain, &cfg.asymmetry)?.a;
        let t_star = if asymmetry > 0.0 {
            level::t_star(&mu, asymmetry, cfg.theta)?
        } else {
            0.0
        };
        Ok(Self {
            domain: domain.clone(),
            field,
            mu,
            volume,
            asymmetry,
            t_star,
        })
    }
}

/// Theorem 1 at one point:
/// `δ(x,D) ≥ |D|^{-2/n}(μ(u(x))^{2/n} + C_n (u(x) ∧ t*) A²)`.
///
/// With A(D) = 0 the reduced form without the asymmetry term is certified.
pub fn certify_thm1(domain: &Domain, x: &[f64], cfg: &CertifyConfig) -> Result<Certificate> {
    let an = Analysis::new(domain, cfg)?;
    certify_thm1_with(&an, x, cfg)
}

/// Theorem 1 at several points of one domain, sharing the analysis.
pub fn certify_thm1_points(domain: &Domain, points: &[Vec<f64>], cfg: &CertifyConfig) -> Result<Vec<Certificate>> {
    let an = Analysis::new(domain, cfg)?;
    points.iter().map(|x| certify_thm1_with(&an, x, cfg)).collect()
}

pub fn certify_thm1_with(an: &Analysis, x: &[f64], cfg: &CertifyConfig) -> Result<Certificate> {
    let domain = &an.domain;
    domain.check_dim(x)?;
    if !domain.is_inside(x) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let n = domain.dim();
    let nf = n as f64;
    let k = constants(n, Exponent::Infinity, cfg.beta_n, None)?;
    let u_ball = brownian::ball_center_lifetime(domain)?;
    let u = an.field.interpolate(x)?;
    let lhs = 1.0 - u / u_ball;
    let mu_x = level::smoothed_measure(&an.field, u).min(an.volume);
    let scale = an.volume.powf(-2.0 / nf);
    let first = scale * mu_x.powf(2.0 / nf);
    let reduced = an.asymmetry <= 0.0;
    let second = if reduced {
        0.0
    } else {
        scale * k.c_n * u.min(an.t_star) * an.asymmetry.powi(2)
    };
    let rhs = first + second;
    let sigma = cfg.grid_rel_error * lhs.abs().max(rhs.abs()).max(u / u_ball);
    let mut params = Map::new();
    params.insert("x".into(), json!(x));
    put(&mut params, "beta_n", cfg.beta_n);
    put(&mut params, "theta", cfg.theta);
    let mut im = Map::new();
    put(&mut im, "u_D(x)", u);
    put(&mut im, "u_B(0)", u_ball);
    put(&mut im, "mu(u_D(x))", mu_x);
    put(&mut im, "volume", an.volume);
    put(&mut im, "A", an.asymmetry);
    put(&mut im, "t_star", an.t_star);
    put(&mut im, "C_n", k.c_n);
    put(&mut im, "rhs_level_term", first);
    put(&mut im, "rhs_asymmetry_term", second);
    let margin = lhs - rhs;
    Ok(Certificate {
        theorem: "1".into(),
        domain: domain.spec_json(),
        params,
        lhs,
        rhs,
        margin,
        sigma,
        passed: margin + 3.0 * sigma >= 0.0,
        intermediates: im,
        config: cfg.config_json(),
        seed: cfg.seed,
        note: reduced.then(|| "A(D) = 0: reduced inequality without the asymmetry term".into()),
    })
}

/// Theorem 2: `δ_p(D) ≥ C_{n,p} A(D)^{2+κ(p)}`; for p = 1 also the
/// Saint-Venant form `T(B) - T(D) ≥ C_{n,1} T(B) A³`.
pub fn certify_thm2(domain: &Domain, p: Exponent, cfg: &CertifyConfig) -> Result<Certificate> {
    let an = Analysis::new(domain, cfg)?;
    certify_thm2_with(&an, p, cfg)
}

pub fn certify_thm2_with(an: &Analysis, p: Exponent, cfg: &CertifyConfig) -> Result<Certificate> {
    let domain = &an.domain;
    let n = domain.dim();
    let k = constants(n, p, cfg.beta_n, None)?;
    let d = deficit_lp_of(&an.field, an.volume, p)?;
    let exponent = rhs_exponent(p);
    let c = k.theorem2();
    let a = an.asymmetry;
    let lhs = d.value;
    let rhs = c * a.powf(exponent);
    // relative grid error in the norm ratio becomes κ·err in δ_p
    let sigma = cfg.grid_rel_error * p.kappa() * (1.0 - lhs).abs();
    let margin = lhs - rhs;
    let mut passed = margin + 3.0 * sigma >= 0.0;
    let mut params = Map::new();
    params.insert("p".into(), json!(p.to_string()));
    put(&mut params, "beta_n", cfg.beta_n);
    let mut im = Map::new();
    put(&mut im, "norm_D", d.norm_domain);
    put(&mut im, "norm_B", d.norm_ball);
    put(&mut im, "A", a);
    put(&mut im, "t_star", an.t_star);
    put(&mut im, "volume", an.volume);
    put(&mut im, "C_np", c);
    put(&mut im, "rhs_exponent", exponent);
    if let Exponent::Finite(q) = p {
        if q == 1.0 {
            let t_b = d.norm_ball;
            let t_d = d.norm_domain;
            let sv_lhs = t_b - t_d;
            let sv_rhs = c * t_b * a.powi(3);
            let sv_sigma = cfg.grid_rel_error * t_d;
            put(&mut im, "saint_venant_lhs", sv_lhs);
            put(&mut im, "saint_venant_rhs", sv_rhs);
            put(&mut im, "saint_venant_margin", sv_lhs - sv_rhs);
            put(&mut im, "saint_venant_sigma", sv_sigma);
            passed &= sv_lhs - sv_rhs + 3.0 * sv_sigma >= 0.0;
        }
    }
    Ok(Certificate {
        theorem: "2".into(),
        domain: domain.spec_json(),
        params,
        lhs,
        rhs,
        margin,
        sigma,
        passed,
        intermediates: im,
        config: cfg.config_json(),
        seed: cfg.seed,
        note: None,
    })
}

/// Exponent of A(D) on the right of Theorem 2: `2 + κ(p)`.
pub fn rhs_exponent(p: Exponent) -> f64 {
    2.0 + p.kappa()
}

/// Rescales a domain about the origin to unit volume.
pub fn normalize_volume(domain: &Domain) -> Result<Domain> {
    let v = domain.measure()?;
    domain.scale(v.powf(-1.0 / domain.dim() as f64))
}

/// Theorem 3 as a measured ratio `ρ = (T_α(B) - T_α(D)) / A^{2+2/α}`.
///
/// The theorem's constant is unspecified, so the certificate passes when
/// `T_α(B) - T_α(D) > 3σ` (hence ρ > 0 with 3σ confidence). For a ball the
/// difference must vanish within 3σ instead.
pub fn certify_thm3(
    domain: &Domain,
    frac: &FractionalConfig,
    sample: &SampleGrid,
    cfg: &CertifyConfig,
) -> Result<Certificate> {
    let v = domain.measure()?;
    if (v - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "Theorem 3 needs |D| = 1, got {v}; rescale with normalize_volume"
        )));
    }
    if frac.is_brownian() {
        return Err(Error::invalid("Theorem 3 needs 0 < alpha < 2"));
    }
    let n = domain.dim();
    let radius = domain.equivalent_ball()?.radius;
    let t_b = stable::ball_fractional_rigidity(frac, radius)?;
    let t_d = stable::fractional_rigidity(domain, frac, sample)?;
    let a = if domain.is_ball() { 0.0 } else { fraenkel(domain, &cfg.asymmetry)?.a };
    let exponent = 2.0 + 2.0 / frac.alpha;
    let diff = t_b - t_d.mean;
    let sigma = t_d.stderr;
    let ratio = if a > 0.0 { diff / a.powf(exponent) } else { f64::NAN };
    let passed = if a > 0.0 {
        diff > 3.0 * sigma
    } else {
        diff.abs() <= 3.0 * sigma
    };
    let mut params = Map::new();
    put(&mut params, "alpha", frac.alpha);
    put(&mut params, "amplitude", frac.amplitude);
    let mut im = Map::new();
    put(&mut im, "T_alpha_B", t_b);
    put(&mut im, "T_alpha_D", t_d.mean);
    put(&mut im, "T_alpha_D_stderr", t_d.stderr);
    put(&mut im, "A", a);
    put(&mut im, "ratio", ratio);
    put(&mut im, "rhs_exponent", exponent);
    put(&mut im, "A_n_alpha", frac.a_n_alpha);
    put(&mut im, "dimension", n as f64);
    let config = json!({
        "paths_per_cell": frac.paths,
        "sample_resolution": sample.resolution,
        "jitter": sample.jitter,
        "asymmetry_angles": cfg.asymmetry.angles,
    });
    Ok(Certificate {
        theorem: "3".into(),
        domain: domain.spec_json(),
        params,
        lhs: diff,
        rhs: 0.0,
        margin: diff,
        sigma,
        passed,
        intermediates: im,
        config,
        seed: frac.seed,
        note: Some("constant unspecified; ratio reported".into()),
    })
}

/// Fractional Pólya–Szegő with remainder:
/// `[u]_{α,1} ≥ [u*]_{α,1} + C A^{2/α} max{t*|D|^{1/r}, ‖u ∧ t*‖_r}`,
/// r = 2n/(2n - α), on the grid torsion field. The constant is unspecified;
/// the implied ratio is reported and the gap must be positive.
pub fn check_psz(domain: &Domain, alpha: f64, cfg: &CertifyConfig) -> Result<Certificate> {
    let an = Analysis::new(domain, cfg)?;
    let n = domain.dim();
    let nf = n as f64;
    let star = level::rearrangement(&an.field)?.to_field()?;
    let cutoff = 2.0 * star_diameter(&an.field, &star);
    let su = stable::fractional_seminorm(&an.field, alpha, 1, Some(cutoff))?;
    let ss = stable::fractional_seminorm(&star, alpha, 1, Some(cutoff))?;
    let gap = su.value - ss.value;
    let r = 2.0 * nf / (2.0 * nf - alpha);
    let cand_level = an.t_star * an.volume.powf(1.0 / r);
    let cand_norm = level::truncated_norm(&an.field, an.t_star, r);
    let (selected, which) = if cand_norm > cand_level {
        (cand_norm, "truncated_norm")
    } else {
        (cand_level, "t_star_level")
    };
    let a = an.asymmetry;
    let remainder = a.powf(2.0 / alpha) * selected;
    let ratio = if remainder > 0.0 { gap / remainder } else { f64::NAN };
    // both seminorms share lattice and cutoff, so most discretization error
    // cancels in the gap; sigma is reported but the pass rule is gap > 0
    let sigma = cfg.grid_rel_error * ss.value;
    let radial = a <= 0.0;
    let passed = if radial {
        gap.abs() <= 0.05 * ss.value
    } else {
        gap > 0.0
    };
    let mut params = Map::new();
    put(&mut params, "alpha", alpha);
    put(&mut params, "theta", cfg.theta);
    let mut im = Map::new();
    put(&mut im, "seminorm_u", su.value);
    put(&mut im, "seminorm_u_star", ss.value);
    put(&mut im, "A", a);
    put(&mut im, "t_star", an.t_star);
    put(&mut im, "r", r);
    put(&mut im, "remainder_t_star_level", cand_level);
    put(&mut im, "remainder_truncated_norm", cand_norm);
    im.insert("remainder_selected".into(), json!(which));
    put(&mut im, "ratio", ratio);
    put(&mut im, "cutoff", cutoff);
    put(&mut im, "shell_radius", su.shell_radius);
    im.insert("shell_model".into(), json!(su.shell_model));
    Ok(Certificate {
        theorem: "psz".into(),
        domain: domain.spec_json(),
        params,
        lhs: su.value,
        rhs: ss.value,
        margin: gap,
        sigma,
        passed,
        intermediates: im,
        config: cfg.config_json(),
        seed: cfg.seed,
        note: Some("constant unspecified; ratio reported".into()),
    })
}

fn star_diameter(a: &ScalarField, b: &ScalarField) -> f64 {
    let diag = |f: &ScalarField| {
        f.grid
            .extents
            .iter()
            .map(|&e| (e as f64 * f.grid.h).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    diag(a).max(diag(b))
}

/// Least-squares fits over the ellipse family with semi-axes (1, 1+ε).
#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub p: Exponent,
    pub eps: Vec<f64>,
    pub deficits: Vec<f64>,
    pub asymmetries: Vec<f64>,
    /// Slope and intercept of log δ_p against log ε.
    pub deficit_slope: f64,
    pub deficit_intercept: f64,
    /// Slope and intercept of A against ε.
    pub asymmetry_slope: f64,
    pub asymmetry_intercept: f64,
    /// δ_p / ε^{2.5}, to show that exponents below 2 fail as ε → 0.
    pub sub_quadratic_ratios: Vec<f64>,
}

/// Fits δ_p(ε) and A(ε) over the given ε values (at least 4, all in (0, 0.3]).
pub fn ellipse_asymptotics(
    eps: &[f64],
    p: Exponent,
    resolution: usize,
    asym: &AsymmetryConfig,
) -> Result<FitReport> {
    if eps.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 eps values, got {}", eps.len())));
    }
    if let Some(e) = eps.iter().find(|&&e| !(e > 0.0 && e <= 0.3)) {
        return Err(Error::invalid(format!("eps values must lie in (0, 0.3], got {e}")));
    }
    let mut deficits = Vec::with_capacity(eps.len());
    let mut asymmetries = Vec::with_capacity(eps.len());
    for &e in eps {
        let d = Domain::ellipse_eps(e)?;
        deficits.push(deficit_lp(&d, p, resolution)?.value);
        asymmetries.push(fraenkel(&d, asym)?.a);
    }
    if let Some(d) = deficits.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::Numeric(format!("non-positive deficit {d} cannot be log-fitted")));
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = deficits.iter().map(|d| d.ln()).collect();
    let (deficit_slope, deficit_intercept) = least_squares(&lx, &ly);
    let (asymmetry_slope, asymmetry_intercept) = least_squares(eps, &asymmetries);
    let sub_quadratic_ratios = eps.iter().zip(&deficits).map(|(e, d)| d / e.powf(2.5)).collect();
    Ok(FitReport {
        p,
        eps: eps.to_vec(),
        deficits,
        asymmetries,
        deficit_slope,
        deficit_intercept,
        asymmetry_slope,
        asymmetry_intercept,
        sub_quadratic_ratios,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Relative defects of the scaling identities δ(x,D) = δ(rx,rD),
/// μ_{rD}(r²t) = r^n μ_D(t) and t*(rD) = r² t*(D).
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub r: f64,
    pub deficit: f64,
    pub distribution: f64,
    pub t_star: f64,
    pub max: f64,
}

/// Runs the pipelines on D and rD. Balls and ellipses use closed-form
/// torsion for the deficit identity, everything else the grid.
pub fn scaling_check(domain: &Domain, r: f64, x: &[f64], cfg: &CertifyConfig) -> Result<ScalingReport> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("scale must be positive, got {r}")));
    }
    domain.check_dim(x)?;
    if !domain.is_inside(x) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let scaled = domain.scale(r)?;
    let rx: Vec<f64> = x.iter().map(|v| v * r).collect();
    let n = domain.dim() as f64;
    let solver = if closed_form_lifetime(domain, x).is_some() {
        Solver::ClosedForm
    } else {
        Solver::Grid {
            resolution: cfg.resolution,
        }
    };
    let d0 = deficit_point(domain, x, &solver)?.value;
    let d1 = deficit_point(&scaled, &rx, &solver)?.value;
    let deficit = rel(d1, d0);

    let f0 = brownian::grid_torsion(domain, cfg.resolution)?;
    let f1 = brownian::grid_torsion(&scaled, cfg.resolution)?;
    let m0 = level::distribution_function(&f0, cfg.slices)?;
    let m1 = level::distribution_function(&f1, cfg.slices)?;
    let top = m0.max_level();
    let mut distribution: f64 = 0.0;
    for k in 1..10 {
        let t = top * k as f64 / 10.0;
        distribution = distribution.max(rel(m1.eval(r * r * t), r.powf(n) * m0.eval(t)));
    }
    let a = fraenkel(domain, &cfg.asymmetry)?.a;
    let t_star = if a > 0.0 {
        let s0 = level::t_star(&m0, a, cfg.theta)?;
        let s1 = level::t_star(&m1, a, cfg.theta)?;
        rel(s1, r * r * s0)
    } else {
        0.0
    };
    Ok(ScalingReport {
        r,
        deficit,
        distribution,
        t_star,
        max: deficit.max(distribution).max(t_star),
    })
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// The super-level set {u > t} of a grid field as a domain (multilinear
/// interpolation of the cell values).
pub fn level_set_domain(field: &ScalarField, t: f64) -> Result<Domain> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("level must be non-negative, got {t}")));
    }
    if field.max() <= t {
        return Err(Error::DegenerateSampling(format!("level set {{u > {t}}} is empty")));
    }
    let g = &field.grid;
    let lo: Vec<f64> = g.origin.iter().map(|o| o - g.h).collect();
    let hi: Vec<f64> = g
        .origin
        .iter()
        .zip(&g.extents)
        .map(|(o, &e)| o + e as f64 * g.h)
        .collect();
    let f = Arc::new(field.clone());
    let inside = Arc::new(move |x: &[f64]| f.interpolate(x).is_ok_and(|v| v > t));
    Domain::implicit(format!("level set u > {t}"), inside, lo, hi, None)
}

/// Transfer of asymmetry at one sampled level below t*.
#[derive(Clone, Debug, Serialize)]
pub struct TransferRow {
    pub t: f64,
    /// |D ∖ D_t| / |D|.
    pub lost_fraction: f64,
    pub a_level: f64,
    /// A(D)/2.
    pub bound: f64,
    pub holds: bool,
}

/// Checks A(D_t) ≥ A(D)/2 - tol at `samples` levels t in (0, t*).
pub fn transfer_check(domain: &Domain, cfg: &CertifyConfig, samples: usize, tol: f64) -> Result<Vec<TransferRow>> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sampled level"));
    }
    let an = Analysis::new(domain, cfg)?;
    if !(an.asymmetry > 0.0) {
        return Err(Error::invalid("transfer of asymmetry needs A(D) > 0"));
    }
    let mut asym = cfg.asymmetry.clone();
    asym.force_grid = true;
    let bound = 0.5 * an.asymmetry;
    let mut rows = Vec::with_capacity(samples);
    for k in 1..=samples {
        let t = an.t_star * k as f64 / (samples + 1) as f64;
        let level = level_set_domain(&an.field, t)?;
        let a_level = fraenkel(&level, &asym)?.a;
        let lost_fraction = 1.0 - an.mu.eval(t) / an.mu.total;
        rows.push(TransferRow {
            t,
            lost_fraction,
            a_level,
            bound,
            holds: a_level >= bound - tol,
        });
    }
    Ok(rows)
}

/// One Monte Carlo check of a base inequality `ball ≥ domain`.
#[derive(Clone, Debug, Serialize)]
pub struct BaseCheck {
    pub inequality: String,
    pub alpha: f64,
    pub x: Vec<f64>,
    pub ball: f64,
    pub domain: f64,
    pub sigma: f64,
    pub holds: bool,
}

fn base_row(name: &str, alpha: f64, x: &[f64], ball: &McEstimate, dom: &McEstimate) -> BaseCheck {
    let sigma = (ball.stderr.powi(2) + dom.stderr.powi(2)).sqrt();
    BaseCheck {
        inequality: name.into(),
        alpha,
        x: x.to_vec(),
        ball: ball.mean,
        domain: dom.mean,
        sigma,
        holds: ball.mean - dom.mean + 3.0 * sigma >= 0.0,
    }
}

/// Brownian base inequalities at x: u_B(0) ≥ u_D(x), E^0 τ_B^p ≥ E^x τ_D^p for
/// p ∈ {1, 2}, and P^0(τ_B > t) ≥ P^x(τ_D > t) at each time. Ball and domain
/// are simulated with the same time step so discretization bias cancels.
pub fn brownian_base_checks(domain: &Domain, x: &[f64], times: &[f64], path: &PathConfig) -> Result<Vec<BaseCheck>> {
    let ball = domain.equivalent_ball()?.to_domain();
    let origin = vec![0.0; domain.dim()];
    let mut rows = Vec::new();
    let eli_b = McEstimate::exact(brownian::ball_center_lifetime(domain)?);
    let wos = WosConfig {
        paths: path.paths,
        seed: path.seed,
        ..WosConfig::default()
    };
    let eli_d = brownian::wos_lifetime(domain, x, &wos)?;
    rows.push(base_row("ELI", 2.0, x, &eli_b, &eli_d));
    for p in [1.0, 2.0] {
        let b = brownian::exit_moment_mc(&ball, &origin, p, path)?;
        let d = brownian::exit_moment_mc(domain, x, p, path)?;
        rows.push(base_row(&format!("moment p={p}"), 2.0, x, &b, &d));
    }
    for &t in times {
        let b = brownian::survival_mc(&ball, &origin, t, path)?;
        let d = brownian::survival_mc(domain, x, t, path)?;
        rows.push(base_row(&format!("survival t={t}"), 2.0, x, &b, &d));
    }
    Ok(rows)
}

/// Stable base inequalities at x for 0 < α < 2, from direct path simulation
/// of both the equal-volume ball (from its center) and D (from x), plus the
/// walk-on-spheres ELI check against the ball formula.
pub fn stable_base_checks(
    domain: &Domain,
    x: &[f64],
    frac: &FractionalConfig,
    cal: &CalibrationConfig,
    times: &[f64],
) -> Result<Vec<BaseCheck>> {
    let alpha = frac.alpha;
    let eq = domain.equivalent_ball()?;
    let ball = eq.to_domain();
    let origin = vec![0.0; domain.dim()];
    let mut rows = Vec::new();
    let eli_b = McEstimate::exact(stable::stable_ball_lifetime(frac, eq.radius, &origin, domain.dim())?);
    let eli_d = stable::stable_wos_lifetime(domain, x, frac)?;
    rows.push(base_row("ELI", alpha, x, &eli_b, &eli_d));
    let tb = stable::stable_path_exit_times(&ball, &origin, alpha, cal)?;
    let td = stable::stable_path_exit_times(domain, x, alpha, cal)?;
    let moment = |ts: &[Option<f64>], p: f64| {
        let v: Vec<f64> = ts.iter().map(|t| t.unwrap_or(cal.t_max).powf(p)).collect();
        McEstimate::from_samples(&v)
    };
    for p in [1.0, 2.0] {
        rows.push(base_row(&format!("moment p={p}"), alpha, x, &moment(&tb, p), &moment(&td, p)));
    }
    let survival = |ts: &[Option<f64>], t: f64| {
        let v: Vec<f64> = ts
            .iter()
            .map(|s| if s.is_none_or(|s| s > t) { 1.0 } else { 0.0 })
            .collect();
        McEstimate::from_samples(&v)
    };
    for &t in times {
        rows.push(base_row(&format!("survival t={t}"), alpha, x, &survival(&tb, t), &survival(&td, t)));
    }
    Ok(rows)
}

/// δ_∞ of the ellipse with semi-axes (1, 1+ε): `ε²/(1 + (1+ε)²)`.
pub fn ellipse_deficit_inf(eps: f64) -> f64 {
    eps * eps / (1.0 + (1.0 + eps).powi(2))
}

/// δ_p of the same ellipse for finite p: `1 - (1 - δ_∞)^p`.
pub fn ellipse_deficit_p(eps: f64, p: f64) -> f64 {
    1.0 - (1.0 - ellipse_deficit_inf(eps)).powf(p)
}

/// Unit-area ellipse with semi-axes proportional to (1, 1+ε).
pub fn unit_area_ellipse(eps: f64) -> Result<Domain> {
    Domain::ellipse_eps(eps)?.scale(1.0 / (PI * (1.0 + eps)).sqrt())
}
