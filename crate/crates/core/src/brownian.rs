//! Expected lifetimes of Brownian motion with generator Δ.
//!
//! With this normalization the coordinates have variance `2t` and the
//! expected exit time u(x) = E^x[τ_D] solves `-Δu = 1` in D with u = 0
//! outside. For a ball of radius R in R^n, u(x) = (R² - |x|²)/(2n).

use log::{debug, warn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};
use crate::geometry::{Domain, Shape};
use crate::par;
use crate::rng::{self, MeanVar};

/// `(R² - |x|²) / (2n)`.
pub fn ball_lifetime(r: f64, x: &[f64], n: usize) -> Result<f64> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x.len(),
        });
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    let x2: f64 = x.iter().map(|v| v * v).sum();
    if x2 > r * r * (1.0 + 1e-12) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    Ok(((r * r - x2) / (2.0 * n as f64)).max(0.0))
}

/// Torsion function of the ellipse with semi-axes `(1, 1 + eps)`; zero outside.
pub fn ellipse_lifetime(eps: f64, x: &[f64; 2]) -> f64 {
    ellipse_lifetime_axes([1.0, 1.0 + eps], x)
}

/// Torsion function of the origin-centered ellipse with semi-axes `(a, b)`.
pub fn ellipse_lifetime_axes(semi: [f64; 2], x: &[f64; 2]) -> f64 {
    let (a2, b2) = (semi[0] * semi[0], semi[1] * semi[1]);
    let q = 1.0 - x[0] * x[0] / a2 - x[1] * x[1] / b2;
    if q <= 0.0 {
        0.0
    } else {
        a2 * b2 / (2.0 * (a2 + b2)) * q
    }
}

/// Closed-form torsion for balls and axis-aligned ellipses, `None` otherwise.
pub fn closed_form_lifetime(domain: &Domain, x: &[f64]) -> Option<f64> {
    match domain.shape() {
        Shape::Ball { center, radius } => {
            let rel: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
            Some(ball_lifetime(*radius, &rel, domain.dim()).unwrap_or(0.0))
        }
        Shape::Ellipse { center, semi_axes } => Some(ellipse_lifetime_axes(
            *semi_axes,
            &[x[0] - center[0], x[1] - center[1]],
        )),
        _ => None,
    }
}

/// Walk-on-spheres settings.
#[derive(Clone, Debug)]
pub struct WosConfig {
    pub paths: usize,
    /// Absorption distance; `None` means `1e-4 * diameter` of the bounding box.
    pub boundary_eps: Option<f64>,
    pub max_steps: usize,
    pub seed: u64,
    /// Pair each path with its mirror image (negated jump directions).
    pub antithetic: bool,
}

impl Default for WosConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            boundary_eps: None,
            max_steps: 100_000,
            seed: 0,
            antithetic: false,
        }
    }
}

impl WosConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::invalid("paths must be >= 1"));
        }
        if let Some(e) = self.boundary_eps {
            if !(e > 0.0) {
                return Err(Error::invalid("boundary_eps must be positive"));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be >= 1"));
        }
        Ok(())
    }

    pub fn eps_for(&self, domain: &Domain) -> f64 {
        self.boundary_eps
            .unwrap_or_else(|| 1e-4 * domain.bbox().diagonal())
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Set when a diagnostic threshold was crossed (truncated or censored paths).
    pub warning: Option<String>,
}

impl McEstimate {
    pub(crate) fn from_samples(samples: &[f64]) -> Self {
        let mv = MeanVar::from_slice(samples);
        Self {
            mean: mv.mean(),
            stderr: mv.stderr(),
            samples: samples.len(),
            warning: None,
        }
    }

    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            samples: 0,
            warning: None,
        }
    }
}

/// Walk on spheres for `-Δu = 1`: each inscribed ball of radius r adds
/// `r²/(2n)` and the walker moves to a uniform point on its sphere.
pub fn wos_lifetime(domain: &Domain, x: &[f64], cfg: &WosConfig) -> Result<McEstimate> {
    cfg.validate()?;
    domain.check_dim(x)?;
    if !domain.is_inside(x) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let eps = cfg.eps_for(domain);
    let results = par::map_ordered(cfg.paths, |k| {
        let mut rng = rng::stream(cfg.seed, k as u64);
        let mut dirs = Vec::new();
        let (a, ta) = forward_walk(domain, x, &mut dirs, eps, cfg.max_steps, &mut rng);
        if cfg.antithetic {
            // the mirror walk replays the same directions with opposite sign;
            // if it outlives the recorded directions it continues freshly.
            let (b, tb) = mirror_walk(domain, x, &dirs, eps, cfg.max_steps, &mut rng);
            (0.5 * (a + b), ta || tb)
        } else {
            (a, ta)
        }
    });
    let samples: Vec<f64> = results.iter().map(|r| r.0).collect();
    let truncated = results.iter().filter(|r| r.1).count();
    let mut est = McEstimate::from_samples(&samples);
    if truncated as f64 > 0.01 * cfg.paths as f64 {
        let msg = format!(
            "{truncated} of {} walks hit max_steps={}",
            cfg.paths, cfg.max_steps
        );
        warn!("{msg}");
        est.warning = Some(msg);
    }
    Ok(est)
}

/// One walk; the jump directions are recorded for an antithetic partner.
fn forward_walk(
    domain: &Domain,
    x: &[f64],
    dirs: &mut Vec<f64>,
    eps: f64,
    max_steps: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (f64, bool) {
    let n = domain.dim();
    let two_n = 2.0 * n as f64;
    let mut p = x.to_vec();
    let mut acc = 0.0;
    let mut dir = vec![0.0; n];
    for _ in 0..max_steps {
        let r = domain.distance_bound(&p);
        if r < eps {
            return (acc, false);
        }
        acc += r * r / two_n;
        rng::sphere_direction(rng, &mut dir);
        dirs.extend_from_slice(&dir);
        for k in 0..n {
            p[k] += r * dir[k];
        }
        if !domain.is_inside(&p) {
            // rounding can push a walker onto the far side of a flat edge
            return (acc, false);
        }
    }
    (acc, true)
}

fn mirror_walk(
    domain: &Domain,
    x: &[f64],
    dirs: &[f64],
    eps: f64,
    max_steps: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (f64, bool) {
    let n = domain.dim();
    let two_n = 2.0 * n as f64;
    let mut p = x.to_vec();
    let mut acc = 0.0;
    let mut dir = vec![0.0; n];
    for step in 0..max_steps {
        let r = domain.distance_bound(&p);
        if r < eps {
            return (acc, false);
        }
        acc += r * r / two_n;
        if (step + 1) * n <= dirs.len() {
            for k in 0..n {
                dir[k] = -dirs[step * n + k];
            }
        } else {
            rng::sphere_direction(rng, &mut dir);
        }
        for k in 0..n {
            p[k] += r * dir[k];
        }
        if !domain.is_inside(&p) {
            return (acc, false);
        }
    }
    (acc, true)
}

/// Assembled finite-difference Dirichlet Laplacian on the inside cells of a grid.
///
/// Interior links use the standard stencil. A link from an inside cell to an
/// outside one is cut where the segment leaves the domain, at fraction θ of
/// the cell spacing, and the zero boundary value is imposed there; this adds
/// `1/(θh²)` to the diagonal and keeps the matrix symmetric.
pub struct PoissonSystem {
    pub grid: GridSpec,
    pub mask: Vec<bool>,
    /// Flat grid index of each unknown.
    cells: Vec<usize>,
    diag: Vec<f64>,
    nbr_start: Vec<usize>,
    nbr: Vec<u32>,
    inv_h2: f64,
}

/// Smallest admissible cut fraction; keeps the diagonal bounded.
const MIN_CUT_FRACTION: f64 = 1e-3;

impl PoissonSystem {
    pub fn assemble(domain: &Domain, grid: GridSpec) -> Result<Self> {
        let mask = grid.mask(domain)?;
        let cells: Vec<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
        if cells.is_empty() {
            return Err(Error::DegenerateSampling(
                "no grid cell lies inside the domain".into(),
            ));
        }
        let mut compact = vec![u32::MAX; grid.len()];
        for (c, &i) in cells.iter().enumerate() {
            compact[i] = c as u32;
        }
        let n = grid.dim();
        let h = grid.h;
        let inv_h2 = 1.0 / (h * h);
        let rows = par::map_ordered(cells.len(), |c| {
            let idx = cells[c];
            let mut x = [0.0; 8];
            grid.center_of(idx, &mut x[..n]);
            let mut d = 0.0;
            let mut nb = Vec::with_capacity(2 * n);
            for k in 0..n {
                for dir in [-1isize, 1] {
                    match grid.neighbor(idx, k, dir) {
                        Some(j) if mask[j] => {
                            d += inv_h2;
                            nb.push(compact[j]);
                        }
                        _ => {
                            let mut v = [0.0; 8];
                            v[k] = dir as f64 * h;
                            let theta = domain
                                .exit_fraction(&x[..n], &v[..n])
                                .max(MIN_CUT_FRACTION);
                            d += inv_h2 / theta;
                        }
                    }
                }
            }
            (d, nb)
        });
        let mut diag = Vec::with_capacity(cells.len());
        let mut nbr_start = Vec::with_capacity(cells.len() + 1);
        let mut nbr = Vec::with_capacity(cells.len() * 2 * n);
        nbr_start.push(0);
        for (d, nb) in rows {
            diag.push(d);
            nbr.extend(nb);
            nbr_start.push(nbr.len());
        }
        Ok(Self {
            grid,
            mask,
            cells,
            diag,
            nbr_start,
            nbr,
            inv_h2,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.cells.len()
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for c in 0..self.cells.len() {
            let mut s = self.diag[c] * u[c];
            for &j in &self.nbr[self.nbr_start[c]..self.nbr_start[c + 1]] {
                s -= self.inv_h2 * u[j as usize];
            }
            out[c] = s;
        }
    }

    /// Solves `-Δv = f` with zero boundary values by Jacobi-preconditioned
    /// conjugate gradients, to relative residual `tol`. `rhs` is indexed by
    /// flat grid cell; values outside the mask are ignored.
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<ScalarField> {
        if rhs.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                actual: rhs.len(),
            });
        }
        let m = self.cells.len();
        let b: Vec<f64> = self.cells.iter().map(|&i| rhs[i]).collect();
        let bnorm = dot(&b, &b).sqrt();
        let mut x = vec![0.0; m];
        if bnorm == 0.0 {
            return Ok(ScalarField::zeros(self.grid.clone(), self.mask.clone()));
        }
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; m];
        let mut rz = dot(&r, &z);
        let cap = 20 * self.grid.extents.iter().sum::<usize>() + 1000;
        let mut iters = 0;
        let mut rnorm = bnorm;
        while rnorm > tol * bnorm {
            if iters >= cap {
                return Err(Error::Solver(format!(
                    "conjugate gradients did not converge in {cap} iterations (relative residual {:.3e})",
                    rnorm / bnorm
                )));
            }
            self.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..m {
                z[i] = r[i] / self.diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..m {
                p[i] = z[i] + beta * p[i];
            }
            rnorm = dot(&r, &r).sqrt();
            iters += 1;
        }
        debug!("cg converged in {iters} iterations, residual {:.3e}", rnorm / bnorm);
        let mut values = vec![0.0; self.grid.len()];
        for (c, &i) in self.cells.iter().enumerate() {
            values[i] = x[c];
        }
        ScalarField::new(self.grid.clone(), values, self.mask.clone())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative residual target for the grid solver.
pub const GRID_TOLERANCE: f64 = 1e-10;

/// Torsion function on a grid with `resolution` cells across the longest
/// side of the bounding box.
pub fn grid_torsion(domain: &Domain, resolution: usize) -> Result<ScalarField> {
    if resolution < 16 {
        return Err(Error::invalid(format!(
            "grid resolution must be >= 16, got {resolution}"
        )));
    }
    let grid = GridSpec::covering(domain, resolution)?;
    let sys = PoissonSystem::assemble(domain, grid)?;
    let rhs = vec![1.0; sys.grid.len()];
    sys.solve(&rhs, GRID_TOLERANCE)
}

/// Second exit-time moment E^x[τ²] = v(x) where `-Δv = 2u` and u is the torsion.
pub fn grid_second_moment(domain: &Domain, resolution: usize) -> Result<ScalarField> {
    let u = grid_torsion(domain, resolution)?;
    let sys = PoissonSystem::assemble(domain, u.grid.clone())?;
    let rhs: Vec<f64> = u.values.iter().map(|v| 2.0 * v).collect();
    sys.solve(&rhs, GRID_TOLERANCE)
}

/// `h^n * sum(values)`.
pub fn torsional_rigidity(field: &ScalarField) -> Result<f64> {
    field.validate()?;
    Ok(field.integral())
}

/// `2‖v‖₁ - ‖∇v‖²₂` with forward differences. Never exceeds T(D) up to
/// discretization error.
pub fn variational_bound(field: &ScalarField, test: &ScalarField) -> Result<f64> {
    test.validate()?;
    if field.grid != test.grid {
        return Err(Error::invalid("test field lives on a different grid"));
    }
    if test
        .values
        .iter()
        .zip(&field.mask)
        .any(|(&v, &m)| !m && v != 0.0)
    {
        return Err(Error::invalid("test field does not vanish outside the domain mask"));
    }
    Ok(2.0 * test.integral() - test.dirichlet_energy())
}

/// Euler–Maruyama settings.
#[derive(Clone, Debug)]
pub struct PathConfig {
    pub dt: f64,
    pub paths: usize,
    pub t_max: f64,
    pub seed: u64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            paths: 10_000,
            t_max: 20.0,
            seed: 0,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_max > 0.0) {
            return Err(Error::invalid("dt and t_max must be positive"));
        }
        if self.paths == 0 {
            return Err(Error::invalid("paths must be >= 1"));
        }
        Ok(())
    }
}

/// One simulated path: exit time (or the horizon) and whether it exited.
#[derive(Clone, Copy, Debug)]
pub struct PathOutcome {
    pub time: f64,
    pub exited: bool,
}

/// Simulates paths from `x` until exit or `horizon`.
///
/// Between grid times the path may leave and re-enter; this is accounted for
/// by killing with the Brownian-bridge crossing probability `exp(-d0 d1 / Δt)`
/// (half-space approximation, d0/d1 the boundary distances at both ends).
/// A path whose endpoint is outside exits at the crossing point on the
/// straight segment, interpolated linearly in time.
pub fn simulate_exit_times(
    domain: &Domain,
    x: &[f64],
    cfg: &PathConfig,
    horizon: f64,
) -> Result<Vec<PathOutcome>> {
    cfg.validate()?;
    domain.check_dim(x)?;
    if !domain.is_inside(x) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let n = domain.dim();
    let sd = (2.0 * cfg.dt).sqrt();
    let bridge = !matches!(domain.shape(), Shape::Implicit(_));
    Ok(par::map_ordered(cfg.paths, |k| {
        let mut rng = rng::stream(cfg.seed, k as u64);
        let mut p = x.to_vec();
        let mut q = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut t = 0.0;
        while t < horizon {
            let dt = cfg.dt.min(horizon - t);
            let s = if dt < cfg.dt { (2.0 * dt).sqrt() } else { sd };
            rng::fill_normal(&mut rng, &mut g);
            for i in 0..n {
                q[i] = p[i] + s * g[i];
            }
            if !domain.is_inside(&q) {
                let v: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
                let f = domain.exit_fraction(&p, &v);
                return PathOutcome {
                    time: t + f * dt,
                    exited: true,
                };
            }
            if bridge {
                let d0 = domain.distance_bound(&p);
                if d0 < 6.0 * s {
                    let d1 = domain.distance_bound(&q);
                    let kill = (-d0 * d1 / dt).exp();
                    if rng.random::<f64>() < kill {
                        return PathOutcome {
                            time: t + 0.5 * dt,
                            exited: true,
                        };
                    }
                }
            }
            std::mem::swap(&mut p, &mut q);
            t += dt;
        }
        PathOutcome {
            time: horizon,
            exited: false,
        }
    }))
}

/// True when `x` is outside the open domain but touches its closure.
fn on_boundary(domain: &Domain, x: &[f64]) -> bool {
    let n = domain.dim();
    let delta = 1e-9 * domain.bbox().diagonal();
    let mut y = x.to_vec();
    for k in 0..n {
        for s in [-1.0, 1.0] {
            y[k] = x[k] + s * delta;
            if domain.is_inside(&y) {
                return true;
            }
            y[k] = x[k];
        }
    }
    false
}

/// E^x[τ^p] by path simulation. Points on the boundary exit at once (value 0).
pub fn exit_moment_mc(domain: &Domain, x: &[f64], p: f64, cfg: &PathConfig) -> Result<McEstimate> {
    if !(p > 0.0) {
        return Err(Error::invalid(format!("moment order must be positive, got {p}")));
    }
    domain.check_dim(x)?;
    if !domain.is_inside(x) {
        if on_boundary(domain, x) {
            return Ok(McEstimate::exact(0.0));
        }
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let outcomes = simulate_exit_times(domain, x, cfg, cfg.t_max)?;
    let samples: Vec<f64> = outcomes.iter().map(|o| o.time.powf(p)).collect();
    let alive = outcomes.iter().filter(|o| !o.exited).count();
    let mut est = McEstimate::from_samples(&samples);
    if alive as f64 > 1e-3 * cfg.paths as f64 {
        let msg = format!("{alive} of {} paths still alive at t_max={}", cfg.paths, cfg.t_max);
        warn!("{msg}");
        est.warning = Some(msg);
    }
    Ok(est)
}

/// P^x(τ > t) by path simulation, with binomial standard error.
pub fn survival_mc(domain: &Domain, x: &[f64], t: f64, cfg: &PathConfig) -> Result<McEstimate> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be non-negative, got {t}")));
    }
    domain.check_dim(x)?;
    if !domain.is_inside(x) {
        if on_boundary(domain, x) {
            return Ok(McEstimate::exact(0.0));
        }
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    if t == 0.0 {
        return Ok(McEstimate::exact(1.0));
    }
    let outcomes = simulate_exit_times(domain, x, cfg, t)?;
    let alive = outcomes.iter().filter(|o| !o.exited).count();
    let m = outcomes.len() as f64;
    let p = alive as f64 / m;
    Ok(McEstimate {
        mean: p,
        stderr: (p * (1.0 - p) / m).sqrt(),
        samples: outcomes.len(),
        warning: None,
    })
}

/// Radius of the ball with the same volume as `domain`.
pub fn equivalent_radius(domain: &Domain) -> Result<f64> {
    Ok(domain.equivalent_ball()?.radius)
}

/// u_B(0) for the equal-volume ball.
pub fn ball_center_lifetime(domain: &Domain) -> Result<f64> {
    let r = equivalent_radius(domain)?;
    Ok(r * r / (2.0 * domain.dim() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_lifetime_examples() {
        assert_eq!(ball_lifetime(1.0, &[0.0, 0.0], 2).unwrap(), 0.25);
        assert_eq!(ball_lifetime(1.0, &[1.0, 0.0], 2).unwrap(), 0.0);
        assert!((ball_lifetime(2.0, &[1.0, 0.0, 0.0], 3).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            ball_lifetime(1.0, &[1.5, 0.0], 2),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn ellipse_lifetime_examples() {
        assert_eq!(ellipse_lifetime(0.0, &[0.0, 0.0]), 0.25);
        assert!((ellipse_lifetime(1.0, &[0.0, 0.0]) - 0.4).abs() < 1e-15);
        assert_eq!(ellipse_lifetime(1.0, &[1.0, 0.0]), 0.0);
        assert_eq!(ellipse_lifetime(1.0, &[3.0, 0.0]), 0.0);
    }

    #[test]
    fn ellipse_formula_solves_poisson() {
        // -Δu = 2c(1/a² + 1/b²) with c = a²b²/(2(a²+b²)) equals 1
        let (a, b) = (1.3_f64, 0.7_f64);
        let c = a * a * b * b / (2.0 * (a * a + b * b));
        assert!((2.0 * c * (1.0 / (a * a) + 1.0 / (b * b)) - 1.0).abs() < 1e-14);
        let h = 1e-4;
        let x = [0.2, -0.1];
        let f = |p: [f64; 2]| ellipse_lifetime_axes([a, b], &p);
        let lap = (f([x[0] + h, x[1]]) + f([x[0] - h, x[1]]) + f([x[0], x[1] + h])
            + f([x[0], x[1] - h])
            - 4.0 * f(x))
            / (h * h);
        assert!((lap + 1.0).abs() < 1e-5, "{lap}");
    }

    #[test]
    fn wos_disk_center() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let cfg = WosConfig {
            paths: 20_000,
            seed: 11,
            ..Default::default()
        };
        let e = wos_lifetime(&d, &[0.0, 0.0], &cfg).unwrap();
        assert!((e.mean - 0.25).abs() < 3.0 * e.stderr + 1e-3, "{e:?}");
        assert!(e.warning.is_none());
    }

    #[test]
    fn wos_is_deterministic_and_thread_independent() {
        let d = Domain::ellipse_eps(0.5).unwrap();
        let cfg = WosConfig {
            paths: 2000,
            seed: 5,
            ..Default::default()
        };
        let a = wos_lifetime(&d, &[0.1, 0.2], &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| wos_lifetime(&d, &[0.1, 0.2], &cfg).unwrap());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn wos_absorbs_immediately_near_boundary() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let cfg = WosConfig {
            paths: 10,
            boundary_eps: Some(1e-3),
            ..Default::default()
        };
        let e = wos_lifetime(&d, &[0.9999, 0.0], &cfg).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn wos_antithetic_is_unbiased() {
        let d = Domain::rectangle(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let cfg = WosConfig {
            paths: 10_000,
            seed: 2,
            antithetic: true,
            ..Default::default()
        };
        let a = wos_lifetime(&d, &[0.5, 0.5], &cfg).unwrap();
        // unit square center: 0.0736713532814...
        assert!((a.mean - 0.073_671_353).abs() < 3.0 * a.stderr + 2e-3, "{a:?}");
    }

    #[test]
    fn grid_disk_and_rigidity() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let f = grid_torsion(&d, 128).unwrap();
        assert!((f.max() - 0.25).abs() < 1e-3, "{}", f.max());
        let t = torsional_rigidity(&f).unwrap();
        assert!((t - PI / 8.0).abs() < 0.01 * PI / 8.0, "{t}");
        let vb = variational_bound(&f, &f).unwrap();
        assert!((vb - t).abs() < 0.02 * t, "{vb} vs {t}");
        let half = variational_bound(&f, &f.scaled(0.5)).unwrap();
        assert!((half - 0.75 * t).abs() < 0.02 * t);
    }

    #[test]
    fn grid_rejects_coarse_or_empty() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        assert!(grid_torsion(&d, 8).is_err());
        let grid = GridSpec {
            origin: vec![5.0, 5.0],
            h: 0.1,
            extents: vec![4, 4],
        };
        assert!(matches!(
            PoissonSystem::assemble(&d, grid),
            Err(Error::DegenerateSampling(_))
        ));
    }

    #[test]
    fn moment_and_survival_basics() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let cfg = PathConfig {
            dt: 1e-3,
            paths: 4000,
            t_max: 10.0,
            seed: 3,
        };
        let m = exit_moment_mc(&d, &[0.0, 0.0], 1.0, &cfg).unwrap();
        assert!((m.mean - 0.25).abs() < 3.0 * m.stderr + 5e-3, "{m:?}");
        assert_eq!(exit_moment_mc(&d, &[1.0, 0.0], 1.0, &cfg).unwrap().mean, 0.0);
        assert!(exit_moment_mc(&d, &[2.0, 0.0], 1.0, &cfg).is_err());
        assert_eq!(survival_mc(&d, &[0.0, 0.0], 0.0, &cfg).unwrap().mean, 1.0);
        let late = survival_mc(&d, &[0.0, 0.0], 5.0, &cfg).unwrap();
        assert!(late.mean <= 0.01);
    }
}
