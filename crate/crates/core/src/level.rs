//! Super-level sets of torsion fields: distribution functions, thresholds,
//! layer-cake norms, ball closed forms and symmetric decreasing rearrangement.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};
use crate::geometry::unit_ball_volume;

/// Integrability exponent `p` in `[1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn finite(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("exponent must be >= 1, got {p}")));
        }
        Ok(Exponent::Finite(p))
    }

    /// κ(p): p for finite p, 1 for p = ∞.
    pub fn kappa(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => 1.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::parse("p", format!("expected a number or `inf`, got `{other}`")))?;
                Exponent::finite(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

/// Piecewise-linear table of t ↦ μ(t) = |{u > t}|.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionFunction {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    /// μ(0), the masked volume.
    pub total: f64,
}

impl DistributionFunction {
    /// Builds a table from explicit samples; checks monotonicity.
    pub fn from_table(breakpoints: Vec<f64>, values: Vec<f64>, total: f64) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::invalid("breakpoints and values must be non-empty and equally long"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("distribution values must be non-increasing"));
        }
        Ok(Self {
            breakpoints,
            values,
            total,
        })
    }

    /// μ(t) by linear interpolation; 0 beyond the last breakpoint.
    pub fn eval(&self, t: f64) -> f64 {
        let b = &self.breakpoints;
        if t <= b[0] {
            return self.values[0];
        }
        let last = b.len() - 1;
        if t >= b[last] {
            return if t == b[last] { self.values[last] } else { 0.0 };
        }
        let i = b.partition_point(|&s| s <= t);
        let (t0, t1) = (b[i - 1], b[i]);
        let (m0, m1) = (self.values[i - 1], self.values[i]);
        m0 + (m1 - m0) * (t - t0) / (t1 - t0)
    }

    pub fn max_level(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Two-column CSV `t,mu`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mu\n");
        for (t, m) in self.breakpoints.iter().zip(&self.values) {
            s.push_str(&format!("{t},{m}\n"));
        }
        s
    }
}

/// Inside values sorted ascending, for exact super-level counts.
fn sorted_inside(field: &ScalarField) -> Vec<f64> {
    let mut v: Vec<f64> = field
        .values
        .iter()
        .zip(&field.mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// μ at `slices` uniformly spaced levels from 0 to the field maximum.
/// Cells count when their value is strictly above the level.
pub fn distribution_function(field: &ScalarField, slices: usize) -> Result<DistributionFunction> {
    if slices < 2 {
        return Err(Error::invalid(format!("need at least 2 slices, got {slices}")));
    }
    let sorted = sorted_inside(field);
    if sorted.is_empty() {
        return Err(Error::DegenerateSampling("field has no inside cells".into()));
    }
    let cell = field.grid.cell_volume();
    let total = sorted.len() as f64 * cell;
    let max = sorted.last().copied().unwrap().max(0.0);
    if max == 0.0 {
        return Ok(DistributionFunction {
            breakpoints: vec![0.0],
            values: vec![total],
            total,
        });
    }
    let mut breakpoints = Vec::with_capacity(slices);
    let mut values = Vec::with_capacity(slices);
    for i in 0..slices {
        let t = max * i as f64 / (slices - 1) as f64;
        let above = sorted.len() - sorted.partition_point(|&v| v <= t);
        breakpoints.push(t);
        values.push(if i == 0 { total } else { above as f64 * cell });
    }
    Ok(DistributionFunction {
        breakpoints,
        values,
        total,
    })
}

/// μ_B(t) for the origin-centered ball of volume `v` in R^n.
pub fn ball_distribution(n: usize, v: f64, t: f64) -> f64 {
    let w = unit_ball_volume(n);
    let nf = n as f64;
    let s = 1.0 - 2.0 * nf * w.powf(2.0 / nf) * v.powf(-2.0 / nf) * t.max(0.0);
    if s <= 0.0 {
        0.0
    } else {
        v * s.powf(nf / 2.0)
    }
}

/// sup{t > 0 : μ(t) > |D|(1 - θA)} on the interpolated table.
pub fn t_star(mu: &DistributionFunction, a: f64, theta: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid(format!(
            "t* needs positive asymmetry, got {a}"
        )));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(format!("theta must lie in (0,1), got {theta}")));
    }
    let level = mu.total * (1.0 - theta * a);
    let b = &mu.breakpoints;
    let v = &mu.values;
    if b.len() == 1 {
        return Ok(0.0);
    }
    let i = v.partition_point(|&m| m > level);
    if i == 0 {
        return Ok(0.0);
    }
    if i == v.len() {
        return Ok(b[b.len() - 1]);
    }
    let (m0, m1) = (v[i - 1], v[i]);
    if m0 == m1 {
        return Ok(b[i - 1]);
    }
    Ok(b[i - 1] + (m0 - level) / (m0 - m1) * (b[i] - b[i - 1]))
}

/// t₀ with μ_B(2t₀) = 1 - A/8 for |B| = 1.
pub fn t_zero(n: usize, a: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 2.0) {
        return Err(Error::invalid(format!("asymmetry must lie in (0,2], got {a}")));
    }
    let nf = n as f64;
    let w2 = unit_ball_volume(n).powf(2.0 / nf);
    let t0 = (1.0 - (1.0 - a / 8.0).powf(2.0 / nf)) / (4.0 * nf * w2);
    let lower = a / (16.0 * nf * nf * w2);
    if t0 < lower * (1.0 - 1e-12) {
        return Err(Error::Numeric(format!("t0={t0} below its lower bound {lower}")));
    }
    Ok(t0)
}

/// ‖u‖_p from the layer-cake integral ∫ p t^{p-1} μ(t) dt (trapezoid rule);
/// the top breakpoint for p = ∞.
pub fn lp_norm(mu: &DistributionFunction, p: Exponent) -> Result<f64> {
    match p {
        Exponent::Infinity => {
            let top = mu.max_level();
            Ok(if mu.eval(0.0) > 0.0 { top } else { 0.0 })
        }
        Exponent::Finite(p) => {
            if !(p >= 1.0) {
                return Err(Error::invalid(format!("exponent must be >= 1, got {p}")));
            }
            Ok(layer_cake(mu, p).powf(1.0 / p))
        }
    }
}

/// ∫₀^∞ p t^{p-1} μ(t) dt, i.e. ‖u‖_p^p.
pub fn layer_cake(mu: &DistributionFunction, p: f64) -> f64 {
    let b = &mu.breakpoints;
    let v = &mu.values;
    let f = |i: usize| p * b[i].powf(p - 1.0) * v[i];
    let mut acc = 0.0;
    for i in 1..b.len() {
        acc += 0.5 * (f(i - 1) + f(i)) * (b[i] - b[i - 1]);
    }
    acc
}

/// ‖u_B‖_p^p for the ball of volume `v` in R^n, finite p ≥ 1:
/// `(n/2) B(p+1, n/2) / ((2n)^p ω_n^{2p/n})` at unit volume, times `v^{1+2p/n}`.
pub fn ball_lp_norm_pow(n: usize, v: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("exponent must be finite and >= 1, got {p}")));
    }
    if !(v > 0.0) {
        return Err(Error::invalid("volume must be positive"));
    }
    let nf = n as f64;
    let w = unit_ball_volume(n);
    let unit = 0.5 * nf * beta(p + 1.0, nf / 2.0) / ((2.0 * nf).powf(p) * w.powf(2.0 * p / nf));
    Ok(unit * v.powf(1.0 + 2.0 * p / nf))
}

/// ‖u_B‖_p for the ball of volume `v`; for p = ∞ the center value R²/(2n).
pub fn ball_lp_norm(n: usize, v: f64, p: Exponent) -> Result<f64> {
    match p {
        Exponent::Infinity => {
            let nf = n as f64;
            Ok((v / unit_ball_volume(n)).powf(2.0 / nf) / (2.0 * nf))
        }
        Exponent::Finite(q) => Ok(ball_lp_norm_pow(n, v, q)?.powf(1.0 / q)),
    }
}

/// Non-increasing radial profile equimeasurable with a grid field.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub n: usize,
    /// Outer radius of shell k: the ball of volume (k+1)h^n.
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub h: f64,
}

impl RadialProfile {
    /// Value at radius r; zero beyond the support.
    pub fn value_at(&self, r: f64) -> f64 {
        let k = self.radii.partition_point(|&s| s < r);
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// Rasterizes the profile onto a square grid of spacing h centered at the
    /// origin: the k-th closest cell to the origin receives the k-th largest
    /// value, so the result is an exact permutation of the source values.
    pub fn to_field(&self) -> Result<ScalarField> {
        let m = self.values.len();
        let outer = self.radii.last().copied().unwrap_or(0.0);
        let half = (outer / self.h).ceil() as usize + 2;
        let grid = GridSpec {
            origin: vec![-(half as f64) * self.h; self.n],
            h: self.h,
            extents: vec![2 * half + 1; self.n],
        };
        let mut order: Vec<(f64, usize)> = (0..grid.len())
            .map(|i| {
                let c = grid.center(i);
                (c.iter().map(|v| v * v).sum::<f64>(), i)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut values = vec![0.0; grid.len()];
        let mut mask = vec![false; grid.len()];
        for (k, &(_, i)) in order.iter().take(m).enumerate() {
            values[i] = self.values[k];
            mask[i] = true;
        }
        ScalarField::new(grid, values, mask)
    }
}

/// Symmetric decreasing rearrangement as a radial profile.
pub fn rearrangement(field: &ScalarField) -> Result<RadialProfile> {
    let mut vals = sorted_inside(field);
    if vals.is_empty() {
        return Err(Error::DegenerateSampling("field has no inside cells".into()));
    }
    vals.reverse();
    let n = field.dim();
    let cell = field.grid.cell_volume();
    let w = unit_ball_volume(n);
    let radii = (0..vals.len())
        .map(|k| ((k + 1) as f64 * cell / w).powf(1.0 / n as f64))
        .collect();
    Ok(RadialProfile {
        n,
        radii,
        values: vals,
        h: field.h(),
    })
}

/// Max relative defect of μ(t) = -dE/dt, E(t) = ∫_{u>t} |∇u|², over the
/// middle 80% of `levels` uniformly spaced levels (central differences).
///
/// Both μ and E use the sub-cell coverage of a field that is linear inside
/// each cell (gradient from central differences), which removes the
/// lattice-counting noise of hard cell counts.
pub fn energy_derivative_check(field: &ScalarField, levels: usize) -> Result<f64> {
    if levels < 8 {
        return Err(Error::invalid(format!("need at least 8 levels, got {levels}")));
    }
    let g = &field.grid;
    let cells = coverage_model(field);
    let max = cells.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let min = cells.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    if cells.is_empty() || !(max > 0.0) || max == min {
        return Err(Error::DegenerateSampling(
            "field is constant; level sets are degenerate".into(),
        ));
    }
    let cell = g.cell_volume();
    let above = |t: f64| {
        let mut mu = 0.0;
        let mut e = 0.0;
        for &(u, g2, ab) in &cells {
            let f = fraction_above(t - u, ab);
            mu += f;
            e += f * g2;
        }
        (mu * cell, e * cell)
    };
    let dt = max / levels as f64;
    let mut worst: f64 = 0.0;
    for j in 1..levels {
        let t = j as f64 * dt;
        if t < 0.1 * max || t > 0.9 * max {
            continue;
        }
        let (mu_lo, e_lo) = above(t - dt);
        let (mu_hi, e_hi) = above(t + dt);
        let (mu, _) = above(t);
        let deriv = (e_lo - e_hi) / (2.0 * dt);
        // trapezoid-weighted average of μ across the difference window
        let mu_avg = 0.25 * mu_lo + 0.5 * mu + 0.25 * mu_hi;
        if mu_avg > 0.0 {
            worst = worst.max((deriv - mu_avg).abs() / mu_avg);
        }
    }
    Ok(worst)
}

/// Per inside cell: value, squared gradient and the value spread of the
/// cell-wise linear model.
fn coverage_model(field: &ScalarField) -> Vec<(f64, f64, [f64; 2])> {
    let n = field.dim();
    let g = &field.grid;
    (0..g.len())
        .filter(|&i| field.mask[i])
        .map(|i| {
            let mut half = [0.0f64; 8];
            let mut g2 = 0.0;
            for k in 0..n {
                let a = g.neighbor(i, k, 1).map_or(0.0, |j| field.values[j]);
                let b = g.neighbor(i, k, -1).map_or(0.0, |j| field.values[j]);
                let d = (a - b) / (2.0 * g.h);
                g2 += d * d;
                half[k] = 0.5 * g.h * d.abs();
            }
            (field.values[i], g2, spread(&half[..n]))
        })
        .collect()
}

/// μ(t) = |{u > t}| under the sub-cell coverage model of
/// [`energy_derivative_check`]; smooth in t, unlike cell counts.
pub fn smoothed_measure(field: &ScalarField, t: f64) -> f64 {
    let cells = coverage_model(field);
    let covered: f64 = cells.iter().map(|&(u, _, ab)| fraction_above(t - u, ab)).sum();
    covered * field.grid.cell_volume()
}

/// Half-widths of the value spread of a linear function over one cell,
/// reduced to the two-uniform form used by [`fraction_above`].
fn spread(half: &[f64]) -> [f64; 2] {
    match half.len() {
        1 => [half[0], 0.0],
        2 => {
            let (a, b) = (half[0].max(half[1]), half[0].min(half[1]));
            [a, b]
        }
        _ => {
            // variance-matched uniform for higher dimensions
            [half.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0]
        }
    }
}

/// P(U_a + U_b > s) for independent U_a ~ U(-a, a), U_b ~ U(-b, b), a ≥ b.
fn fraction_above(s: f64, ab: [f64; 2]) -> f64 {
    let [a, b] = ab;
    if s < 0.0 {
        return 1.0 - fraction_above(-s, ab);
    }
    if a + b == 0.0 {
        return 0.0;
    }
    if s >= a + b {
        return 0.0;
    }
    if b <= 1e-12 * a {
        return (a - s) / (2.0 * a);
    }
    if s <= a - b {
        (a - s) / (2.0 * a)
    } else {
        (a + b - s).powi(2) / (8.0 * a * b)
    }
}

/// ∫₀^{t*} μ(t)^{1/r} dt on the table (trapezoid rule).
pub fn mazya_integral(mu: &DistributionFunction, t_star: f64, r: f64) -> f64 {
    if t_star <= 0.0 {
        return 0.0;
    }
    let steps = 4096;
    let dt = t_star / steps as f64;
    let f = |t: f64| mu.eval(t).max(0.0).powf(1.0 / r);
    let mut acc = 0.5 * (f(0.0) + f(t_star));
    for i in 1..steps {
        acc += f(i as f64 * dt);
    }
    acc * dt
}

/// ‖min(u, s)‖_r over the grid.
pub fn truncated_norm(field: &ScalarField, s: f64, r: f64) -> f64 {
    let cell = field.grid.cell_volume();
    let sum: f64 = field
        .values
        .iter()
        .zip(&field.mask)
        .filter(|(_, &m)| m)
        .map(|(&u, _)| u.min(s).max(0.0).powf(r))
        .sum();
    (sum * cell).powf(1.0 / r)
}

/// Largest violation of the pointwise comparison
/// u(x) ≤ u_B(0)(1 - (μ(u(x))/|D|)^{2/n}) over grid cells, in units of the
/// level spacing `max/slices` (non-positive means it holds everywhere).
pub fn talenti_violation(field: &ScalarField, volume: f64, slices: usize) -> Result<f64> {
    let mu = distribution_function(field, slices)?;
    let n = field.dim();
    let nf = n as f64;
    let ub0 = (volume / unit_ball_volume(n)).powf(2.0 / nf) / (2.0 * nf);
    let spacing = mu.max_level() / (slices - 1) as f64;
    let mut worst = f64::NEG_INFINITY;
    for (&u, &m) in field.values.iter().zip(&field.mask) {
        if !m {
            continue;
        }
        let bound = ub0 * (1.0 - (mu.eval(u) / volume).powf(2.0 / nf));
        worst = worst.max((u - bound) / spacing);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::grid_torsion;
    use crate::geometry::Domain;
    use std::f64::consts::PI;

    #[test]
    fn ball_distribution_examples() {
        assert_eq!(ball_distribution(2, 1.0, 0.0), 1.0);
        assert!((ball_distribution(2, 1.0, 1.0 / (8.0 * PI)) - 0.5).abs() < 1e-15);
        assert_eq!(ball_distribution(2, 1.0, 1.0 / (4.0 * PI)), 0.0);
    }

    #[test]
    fn t_star_on_linear_table() {
        let mu = DistributionFunction::from_table(vec![0.0, 1.0], vec![1.0, 0.0], 1.0).unwrap();
        assert!((t_star(&mu, 0.4, 0.25).unwrap() - 0.1).abs() < 1e-15);
        assert!(t_star(&mu, 0.0, 0.25).is_err());
        assert!(t_star(&mu, 0.4, 1.0).is_err());
    }

    #[test]
    fn t_zero_examples() {
        let t = t_zero(2, 0.8).unwrap();
        assert!((t - 1.0 / (80.0 * PI)).abs() < 1e-15);
        assert!(t_zero(2, 0.0).is_err());
        assert!(t_zero(2, 2.5).is_err());
        assert!(t_zero(2, 1e-9).unwrap() < 1e-9);
    }

    #[test]
    fn ball_norm_examples() {
        assert!((ball_lp_norm_pow(2, PI, 1.0).unwrap() - PI / 8.0).abs() < 1e-14);
        assert!((ball_lp_norm_pow(2, PI, 2.0).unwrap() - PI / 48.0).abs() < 1e-14);
        assert!((ball_lp_norm_pow(2, 1.0, 1.0).unwrap() - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert!((ball_lp_norm(2, PI, Exponent::Infinity).unwrap() - 0.25).abs() < 1e-15);
        assert!(ball_lp_norm_pow(2, 1.0, 0.5).is_err());
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert_eq!("2".parse::<Exponent>().unwrap(), Exponent::Finite(2.0));
        assert!("0.5".parse::<Exponent>().is_err());
        assert!("abc".parse::<Exponent>().is_err());
        assert_eq!(Exponent::Infinity.kappa(), 1.0);
        assert_eq!(Exponent::Finite(3.0).kappa(), 3.0);
    }

    #[test]
    fn disk_field_norms_and_distribution() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let f = grid_torsion(&d, 128).unwrap();
        let mu = distribution_function(&f, 1024).unwrap();
        assert_eq!(mu.values[0], f.mask_volume());
        let l1 = lp_norm(&mu, Exponent::Finite(1.0)).unwrap();
        assert!((l1 - PI / 8.0).abs() < 0.01 * PI / 8.0, "{l1}");
        let linf = lp_norm(&mu, Exponent::Infinity).unwrap();
        assert!((linf - 0.25).abs() < 1e-2);
        let sup = mu
            .breakpoints
            .iter()
            .map(|&t| (mu.eval(t) - ball_distribution(2, PI, t)).abs() / PI)
            .fold(0.0, f64::max);
        assert!(sup < 0.02, "{sup}");
    }

    #[test]
    fn zero_field_distribution() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let g = GridSpec::covering(&d, 32).unwrap();
        let m = g.mask(&d).unwrap();
        let f = ScalarField::zeros(g, m);
        let mu = distribution_function(&f, 16).unwrap();
        assert_eq!(mu.eval(0.0), f.mask_volume());
        assert_eq!(mu.eval(1e-9), 0.0);
        assert_eq!(lp_norm(&mu, Exponent::Finite(2.0)).unwrap(), 0.0);
        assert!(energy_derivative_check(&f, 16).is_err());
    }

    #[test]
    fn fraction_above_matches_quadrature() {
        for &(a, b) in &[(1.0, 0.5), (0.7, 0.7), (1.0, 0.0), (2.0, 1e-3)] {
            for &s in &[-1.2, -0.4, 0.0, 0.3, 0.6, 1.1, 2.5] {
                let m = 2000;
                let mut hits = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let x = -a + (i as f64 + 0.5) * 2.0 * a / m as f64;
                        let y = -b + (j as f64 + 0.5) * 2.0 * b / m as f64;
                        if x + y > s {
                            hits += 1.0;
                        }
                    }
                }
                let want = hits / (m * m) as f64;
                let got = fraction_above(s, [a, b]);
                assert!((got - want).abs() < 2e-3, "a={a} b={b} s={s}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn energy_identity_on_disk() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let f = grid_torsion(&d, 128).unwrap();
        assert!(energy_derivative_check(&f, 32).unwrap() < 0.05);
        assert!(energy_derivative_check(&f, 4).is_err());
    }

    #[test]
    fn rearrangement_is_equimeasurable() {
        let d = Domain::ellipse_eps(1.0).unwrap();
        let f = grid_torsion(&d, 64).unwrap();
        let prof = rearrangement(&f).unwrap();
        assert!(prof.values.windows(2).all(|w| w[0] >= w[1]));
        let g = prof.to_field().unwrap();
        let a = distribution_function(&f, 64).unwrap();
        let b = distribution_function(&g, 64).unwrap();
        assert_eq!(a.breakpoints, b.breakpoints);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= f.grid.cell_volume() * 1.000001);
        }
    }
}
