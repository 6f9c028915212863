//! Fraenkel asymmetry A(D) = inf_c |D Δ B_c| / |D| over balls B_c of the same
//! volume as D.
//!
//! Uses |D Δ B| = |D| + |B| - 2|D ∩ B| = 2(|D| - |D ∩ B|), so only the
//! intersection is measured. Planar convex domains get a polar quadrature of
//! the intersection about the ball center; everything else is counted on a
//! grid.

use std::f64::consts::TAU;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, Domain, Shape};
use crate::par;

#[derive(Clone, Debug)]
pub struct AsymmetryConfig {
    /// Angles for the polar quadrature (planar convex domains).
    pub angles: usize,
    /// Cells across the longest side for grid counting.
    pub grid_res: usize,
    /// Lattice step is `diameter / lattice_div`.
    pub lattice_div: usize,
    /// Number of best lattice points refined by simplex descent.
    pub starts: usize,
    pub max_iterations: usize,
    /// Force grid counting even when the quadrature applies.
    pub force_grid: bool,
}

impl Default for AsymmetryConfig {
    fn default() -> Self {
        Self {
            angles: 4096,
            grid_res: 512,
            lattice_div: 32,
            starts: 3,
            max_iterations: 400,
            force_grid: false,
        }
    }
}

/// One stage of the minimization, kept for reproducibility.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TraceStage {
    pub stage: String,
    pub start: Vec<f64>,
    pub best_center: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AsymmetryResult {
    /// Best value found; an upper bound on A(D).
    #[serde(rename = "A")]
    pub a: f64,
    pub center: Vec<f64>,
    pub evaluations: usize,
    pub method: String,
    pub trace: Vec<TraceStage>,
    pub warning: Option<String>,
}

/// Evaluates |D Δ B_c|/|D| for many centers with shared precomputation.
pub struct SymdiffEvaluator<'a> {
    domain: &'a Domain,
    volume: f64,
    radius: f64,
    mode: Mode,
}

enum Mode {
    Polar { dirs: Vec<[f64; 2]> },
    Grid { points: Vec<f64>, cell: f64 },
}

impl<'a> SymdiffEvaluator<'a> {
    pub fn new(domain: &'a Domain, cfg: &AsymmetryConfig) -> Result<Self> {
        let n = domain.dim();
        let polar = n == 2 && domain.is_convex() && !cfg.force_grid;
        if polar {
            let volume = domain.measure()?;
            let dirs = (0..cfg.angles)
                .map(|k| {
                    let a = TAU * k as f64 / cfg.angles as f64;
                    [a.cos(), a.sin()]
                })
                .collect();
            return Ok(Self {
                domain,
                volume,
                radius: (volume / unit_ball_volume(n)).powf(1.0 / n as f64),
                mode: Mode::Polar { dirs },
            });
        }
        if cfg.grid_res < 2 {
            return Err(Error::DegenerateSampling("grid resolution below 2".into()));
        }
        let bb = domain.bbox();
        let h = bb.longest_side() / cfg.grid_res as f64;
        let counts: Vec<usize> = (0..n).map(|k| (bb.side(k) / h).ceil() as usize).collect();
        let total: usize = counts.iter().product();
        let inside = par::map_ordered(total, |idx| {
            let mut x = [0.0; 8];
            let mut rem = idx;
            for k in 0..n {
                x[k] = bb.lo[k] + ((rem % counts[k]) as f64 + 0.5) * h;
                rem /= counts[k];
            }
            domain.is_inside(&x[..n]).then(|| x[..n].to_vec())
        });
        let points: Vec<f64> = inside.into_iter().flatten().flatten().collect();
        if points.is_empty() {
            return Err(Error::DegenerateSampling(
                "no grid cell falls inside the domain".into(),
            ));
        }
        let cell = h.powi(n as i32);
        // counted volume keeps the fraction self-consistent with the counting
        let volume = match domain.volume_hint() {
            Some(v) => v,
            None => (points.len() / n) as f64 * cell,
        };
        Ok(Self {
            domain,
            volume,
            radius: (volume / unit_ball_volume(n)).powf(1.0 / n as f64),
            mode: Mode::Grid { points, cell },
        })
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn method(&self) -> &'static str {
        match self.mode {
            Mode::Polar { .. } => "polar-quadrature",
            Mode::Grid { .. } => "grid-count",
        }
    }

    /// |D ∩ B_c|.
    pub fn intersection(&self, c: &[f64]) -> f64 {
        let r = self.radius;
        match &self.mode {
            Mode::Polar { dirs } => {
                let mut acc = 0.0;
                for d in dirs {
                    if let Some((t0, t1)) = self.domain.ray_chord(c, d) {
                        let hi = t1.min(r);
                        if hi > t0 {
                            acc += 0.5 * (hi * hi - t0 * t0);
                        }
                    }
                }
                acc * TAU / dirs.len() as f64
            }
            Mode::Grid { points, cell } => {
                let n = c.len();
                let r2 = r * r;
                let hits = points
                    .chunks_exact(n)
                    .filter(|p| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < r2)
                    .count();
                hits as f64 * cell
            }
        }
    }

    pub fn fraction(&self, c: &[f64]) -> f64 {
        (2.0 * (1.0 - self.intersection(c) / self.volume)).clamp(0.0, 2.0)
    }
}

/// |D Δ (c + B)| / |D| with B the equal-volume ball.
pub fn symdiff_fraction(domain: &Domain, c: &[f64], cfg: &AsymmetryConfig) -> Result<f64> {
    domain.check_dim(c)?;
    Ok(SymdiffEvaluator::new(domain, cfg)?.fraction(c))
}

/// Two-stage minimization of the symmetric difference over the ball center:
/// a lattice over the bounding box, then simplex descent from the best few
/// lattice points.
pub fn fraenkel(domain: &Domain, cfg: &AsymmetryConfig) -> Result<AsymmetryResult> {
    if let Shape::Ball { center, .. } = domain.shape() {
        return Ok(AsymmetryResult {
            a: 0.0,
            center: center.clone(),
            evaluations: 0,
            method: "ball".into(),
            trace: Vec::new(),
            warning: None,
        });
    }
    let n = domain.dim();
    let eval = SymdiffEvaluator::new(domain, cfg)?;
    let bb = domain.bbox();
    let step = bb.diagonal() / cfg.lattice_div.max(1) as f64;
    let counts: Vec<usize> = (0..n)
        .map(|k| (bb.side(k) / step).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let lattice: Vec<Vec<f64>> = (0..total)
        .map(|idx| {
            let mut rem = idx;
            (0..n)
                .map(|k| {
                    let i = rem % counts[k];
                    rem /= counts[k];
                    // lattice centered in the box
                    let span = (counts[k] - 1) as f64 * step;
                    bb.lo[k] + 0.5 * (bb.side(k) - span) + i as f64 * step
                })
                .collect()
        })
        .collect();
    let values = par::map_ordered(total, |i| eval.fraction(&lattice[i]));
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut evaluations = total;
    let mut trace = vec![TraceStage {
        stage: "lattice".into(),
        start: Vec::new(),
        best_center: lattice[order[0]].clone(),
        best_value: values[order[0]],
        evaluations: total,
    }];
    let mut best_c = lattice[order[0]].clone();
    let mut best_v = values[order[0]];
    let mut warning = None;
    for &i in order.iter().take(cfg.starts.max(1)) {
        let res = nelder_mead(|c| eval.fraction(c), &lattice[i], step, cfg.max_iterations);
        evaluations += res.evaluations;
        if !res.converged {
            warning = Some(format!(
                "simplex descent from {:?} stopped after {} iterations",
                lattice[i], cfg.max_iterations
            ));
        }
        trace.push(TraceStage {
            stage: "simplex".into(),
            start: lattice[i].clone(),
            best_center: res.x.clone(),
            best_value: res.value,
            evaluations: res.evaluations,
        });
        if res.value < best_v {
            best_v = res.value;
            best_c = res.x;
        }
    }
    let mut method = format!("lattice+simplex/{}", eval.method());
    if let Shape::Ellipse { center, .. } = domain.shape() {
        // centrally symmetric: the center of symmetry is the optimum
        let c = center.to_vec();
        let v = eval.fraction(&c);
        evaluations += 1;
        trace.push(TraceStage {
            stage: "symmetry-center".into(),
            start: c.clone(),
            best_center: c.clone(),
            best_value: v,
            evaluations: 1,
        });
        if best_v < v - 1e-6 {
            let msg = format!("optimizer beat the symmetry center: {best_v} < {v}");
            warn!("{msg}");
            warning = Some(msg);
        } else {
            best_v = v;
            best_c = c;
        }
        method = format!("symmetry-center/{}", eval.method());
    }
    if let Some(w) = &warning {
        warn!("{w}");
    }
    Ok(AsymmetryResult {
        a: best_v,
        center: best_c,
        evaluations,
        method,
        trace,
        warning,
    })
}

/// Minimum of the symmetric-difference fraction over every lattice point with
/// spacing `step` in the bounding box (validation oracle for [`fraenkel`]).
pub fn exhaustive_scan(domain: &Domain, step: f64, cfg: &AsymmetryConfig) -> Result<(f64, Vec<f64>)> {
    if !(step > 0.0) {
        return Err(Error::invalid("scan step must be positive"));
    }
    let n = domain.dim();
    let eval = SymdiffEvaluator::new(domain, cfg)?;
    let bb = domain.bbox();
    let counts: Vec<usize> = (0..n).map(|k| (bb.side(k) / step).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let point = |idx: usize| -> Vec<f64> {
        let mut rem = idx;
        (0..n)
            .map(|k| {
                let i = rem % counts[k];
                rem /= counts[k];
                bb.lo[k] + i as f64 * step
            })
            .collect()
    };
    let values = par::map_ordered(total, |i| eval.fraction(&point(i)));
    let (best, v) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .unwrap();
    Ok((*v, point(best)))
}

/// Lemma-style transfer bound (1 - 2k) A for sets differing by at most
/// k A |D| in volume.
pub fn transfer_lower_bound(a: f64, k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 0.5) {
        return Err(Error::invalid(format!("k must lie in (0, 1/2), got {k}")));
    }
    Ok((1.0 - 2.0 * k) * a)
}

struct SimplexResult {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
}

/// Nelder–Mead with standard coefficients.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], size: f64, max_iter: usize) -> SimplexResult {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for k in 0..n {
        let mut p = x0.to_vec();
        p[k] += size;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let xtol = 1e-7 * size.max(1e-300);
    let mut converged = false;
    for _ in 0..max_iter {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < xtol || (vals[n] - vals[0]).abs() < 1e-12 && spread < 1e-3 * size {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = (0..n).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
                    vals[i] = f(&p);
                    pts[i] = p;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    SimplexResult {
        x: pts[best].clone(),
        value: vals[best],
        evaluations: evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn ball_cases() {
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let cfg = AsymmetryConfig::default();
        assert!(symdiff_fraction(&d, &[0.0, 0.0], &cfg).unwrap() < 1e-9);
        assert!((symdiff_fraction(&d, &[2.0, 0.0], &cfg).unwrap() - 2.0).abs() < 1e-12);
        let r = fraenkel(&d, &cfg).unwrap();
        assert_eq!(r.a, 0.0);
    }

    #[test]
    fn polar_matches_lens_area() {
        // two unit disks at distance d overlap in 2 acos(d/2) - (d/2) sqrt(4 - d²)
        let d = Domain::centered_ball(2, 1.0).unwrap();
        let cfg = AsymmetryConfig::default();
        let e = SymdiffEvaluator::new(&d, &cfg).unwrap();
        for &s in &[0.3, 1.0, 1.7] {
            let lens = 2.0 * (s / 2.0f64).acos() - (s / 2.0) * (4.0 - s * s).sqrt();
            assert!((e.intersection(&[s, 0.0]) - lens).abs() < 1e-5, "{s}");
        }
    }

    /// |D Δ B|/|D| for the centered disk, by dense midpoint quadrature of
    /// the polar radii r(θ) = (cos²θ + sin²θ/(1+ε)²)^{-1/2}.
    fn ellipse_oracle(eps: f64) -> f64 {
        let m = 200_000;
        let r2 = 1.0 + eps;
        let mut inter = 0.0;
        for k in 0..m {
            let t = TAU * (k as f64 + 0.5) / m as f64;
            let re2 = 1.0 / (t.cos().powi(2) + t.sin().powi(2) / (1.0 + eps).powi(2));
            inter += 0.5 * re2.min(r2);
        }
        inter *= TAU / m as f64;
        2.0 * (1.0 - inter / (PI * (1.0 + eps)))
    }

    #[test]
    fn ellipse_small_eps() {
        let d = Domain::ellipse_eps(0.1).unwrap();
        let r = fraenkel(&d, &AsymmetryConfig::default()).unwrap();
        let want = ellipse_oracle(0.1);
        assert!((r.a - want).abs() < 1e-5, "{} vs {want}", r.a);
        // leading order is 2ε/π under the |DΔB|/|D| normalization
        assert!((r.a - 0.2 / PI).abs() < 0.1 * 0.2 / PI);
        assert!(r.warning.is_none(), "{:?}", r.warning);
        assert!(r.center.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn transfer_examples() {
        assert!((transfer_lower_bound(0.4, 0.25).unwrap() - 0.2).abs() < 1e-15);
        assert!((transfer_lower_bound(0.4, 1e-12).unwrap() - 0.4).abs() < 1e-10);
        assert!(transfer_lower_bound(0.4, 0.5).is_err());
        assert!(transfer_lower_bound(0.4, 0.0).is_err());
    }

    #[test]
    fn grid_mode_matches_polar() {
        let d = Domain::ellipse_eps(0.4).unwrap();
        let polar = symdiff_fraction(&d, &[0.1, 0.05], &AsymmetryConfig::default()).unwrap();
        let grid = symdiff_fraction(
            &d,
            &[0.1, 0.05],
            &AsymmetryConfig {
                force_grid: true,
                grid_res: 1024,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((polar - grid).abs() < 2e-3, "{polar} vs {grid}");
    }

    #[test]
    fn nonconvex_union_of_disks() {
        let inside: crate::geometry::InsideFn = Arc::new(|x: &[f64]| {
            (x[0] + 2.0).powi(2) + x[1] * x[1] < 1.0 || (x[0] - 2.0).powi(2) + x[1] * x[1] < 1.0
        });
        let d = Domain::implicit("two disks", inside, vec![-3.0, -1.0], vec![3.0, 1.0], Some(2.0 * PI))
            .unwrap();
        let cfg = AsymmetryConfig {
            grid_res: 256,
            ..Default::default()
        };
        let r = fraenkel(&d, &cfg).unwrap();
        assert!((r.a - 1.0).abs() < 0.02, "{r:?}");
    }
}
