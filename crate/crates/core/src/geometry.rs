//! Bounded domains in R^n: membership, volume, distance to the boundary,
//! dilation, and the equal-volume ball.
//!
//! Every [`Domain`] is immutable once built. Analytic kinds (ball, ellipse,
//! rectangle, polygon, stadium) carry an exact volume; implicit domains are
//! described by an inside-predicate plus a bounding box and fall back to
//! grid quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Points within this distance of a polygon edge count as outside.
const POLYGON_EDGE_TOL: f64 = 1e-12;

/// Number of probe directions used for implicit-domain distance bounds.
const IMPLICIT_DIRECTIONS: usize = 64;

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// Radius of the ball in R^n with volume `v`.
pub fn equivalent_ball_radius(v: f64, n: usize) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("volume must be positive, got {v}")));
    }
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    Ok((v / unit_ball_volume(n)).powf(1.0 / n as f64))
}

/// A ball with the same volume as some source domain.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalentBall {
    pub radius: f64,
    pub center: Vec<f64>,
    pub n: usize,
}

impl EquivalentBall {
    pub fn for_volume(v: f64, n: usize) -> Result<Self> {
        Ok(Self {
            radius: equivalent_ball_radius(v, n)?,
            center: vec![0.0; n],
            n,
        })
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.n) * self.radius.powi(self.n as i32)
    }

    /// The ball as a [`Domain`].
    pub fn to_domain(&self) -> Domain {
        Domain::ball(self.center.clone(), self.radius).expect("equivalent ball is valid")
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn longest_side(&self) -> f64 {
        (0..self.dim()).map(|k| self.side(k)).fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.side(k).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Surface measure of the box, used as a crude perimeter bound.
    pub fn surface(&self) -> f64 {
        let n = self.dim();
        if n == 1 {
            return 2.0;
        }
        (0..n)
            .map(|k| {
                2.0 * (0..n)
                    .filter(|&j| j != k)
                    .map(|j| self.side(j))
                    .product::<f64>()
            })
            .sum()
    }

    fn inflated(&self, pad: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|v| v - pad).collect(),
            hi: self.hi.iter().map(|v| v + pad).collect(),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64, g: impl Fn(usize, f64) -> f64) -> Self {
        let a: Vec<f64> = self.lo.iter().enumerate().map(|(k, &v)| g(k, f(v))).collect();
        let b: Vec<f64> = self.hi.iter().enumerate().map(|(k, &v)| g(k, f(v))).collect();
        Self {
            lo: a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect(),
            hi: a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        }
    }
}

/// Inside-predicate for implicit domains.
pub type InsideFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Predicate-backed region. Points are mapped back through `x = (y - offset) / scale`
/// before the predicate is evaluated so that dilation and translation stay cheap.
#[derive(Clone)]
pub struct ImplicitRegion {
    inside: InsideFn,
    scale: f64,
    offset: Vec<f64>,
    label: String,
}

impl ImplicitRegion {
    fn test(&self, y: &[f64]) -> bool {
        let mut x = [0.0; 8];
        let n = y.len();
        if n > x.len() {
            let v: Vec<f64> = y
                .iter()
                .zip(&self.offset)
                .map(|(a, o)| (a - o) / self.scale)
                .collect();
            return (self.inside)(&v);
        }
        for k in 0..n {
            x[k] = (y[k] - self.offset[k]) / self.scale;
        }
        (self.inside)(&x[..n])
    }
}

#[derive(Clone)]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned ellipse in the plane.
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    Rectangle { lo: Vec<f64>, hi: Vec<f64> },
    Polygon { vertices: Vec<[f64; 2]> },
    /// Capsule: all points within `radius` of the segment `a`–`b`.
    Stadium { a: Vec<f64>, b: Vec<f64>, radius: f64 },
    Implicit(ImplicitRegion),
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Ball { center, radius } => f
                .debug_struct("Ball")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Shape::Ellipse { center, semi_axes } => f
                .debug_struct("Ellipse")
                .field("center", center)
                .field("semi_axes", semi_axes)
                .finish(),
            Shape::Rectangle { lo, hi } => f
                .debug_struct("Rectangle")
                .field("lo", lo)
                .field("hi", hi)
                .finish(),
            Shape::Polygon { vertices } => {
                f.debug_struct("Polygon").field("vertices", vertices).finish()
            }
            Shape::Stadium { a, b, radius } => f
                .debug_struct("Stadium")
                .field("a", a)
                .field("b", b)
                .field("radius", radius)
                .finish(),
            Shape::Implicit(r) => f
                .debug_struct("Implicit")
                .field("label", &r.label)
                .field("scale", &r.scale)
                .field("offset", &r.offset)
                .finish(),
        }
    }
}

/// Volume with an error estimate; `exact` is set for closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeEstimate {
    pub value: f64,
    pub error: f64,
    pub exact: bool,
}

/// Grid quadrature settings for volumes of domains without a closed form.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    /// Cells along the longest side of the bounding box.
    pub cells_per_axis: usize,
    /// Ignore closed forms and count cells anyway.
    pub force_grid: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            cells_per_axis: 1024,
            force_grid: false,
        }
    }
}

/// A bounded open region in R^n.
#[derive(Clone, Debug)]
pub struct Domain {
    shape: Shape,
    dim: usize,
    volume_hint: Option<f64>,
    bbox: BoundingBox,
}

fn check_finite(field: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::parse(field, "non-finite number"))
    }
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(Error::invalid("ball dimension must be at least 1"));
        }
        check_finite("center", &center)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let bbox = BoundingBox {
            lo: center.iter().map(|c| c - radius).collect(),
            hi: center.iter().map(|c| c + radius).collect(),
        };
        Ok(Self {
            volume_hint: Some(unit_ball_volume(n) * radius.powi(n as i32)),
            shape: Shape::Ball { center, radius },
            dim: n,
            bbox,
        })
    }

    /// Ball of radius `radius` about the origin of R^n.
    pub fn centered_ball(n: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; n], radius)
    }

    pub fn ellipse(center: [f64; 2], semi_axes: [f64; 2]) -> Result<Self> {
        check_finite("center", &center)?;
        if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0)
            || !semi_axes.iter().all(|a| a.is_finite())
        {
            return Err(Error::invalid(format!(
                "ellipse semi-axes must be positive, got {semi_axes:?}"
            )));
        }
        let bbox = BoundingBox {
            lo: vec![center[0] - semi_axes[0], center[1] - semi_axes[1]],
            hi: vec![center[0] + semi_axes[0], center[1] + semi_axes[1]],
        };
        Ok(Self {
            volume_hint: Some(PI * semi_axes[0] * semi_axes[1]),
            shape: Shape::Ellipse { center, semi_axes },
            dim: 2,
            bbox,
        })
    }

    /// The ellipse family with semi-axes `(1, 1 + eps)` centered at the origin.
    pub fn ellipse_eps(eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("eps must be non-negative, got {eps}")));
        }
        Self::ellipse([0.0, 0.0], [1.0, 1.0 + eps])
    }

    pub fn rectangle(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::invalid("rectangle dimension must be at least 1"));
        }
        check_finite("corners", &lo)?;
        check_finite("corners", &hi)?;
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::invalid("rectangle corners must satisfy lo < hi"));
        }
        let vol = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        Ok(Self {
            dim: lo.len(),
            volume_hint: Some(vol),
            bbox: BoundingBox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            shape: Shape::Rectangle { lo, hi },
        })
    }

    /// Simple polygon (non-self-intersecting), vertices in either orientation.
    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("polygon needs at least 3 vertices"));
        }
        for v in &vertices {
            check_finite("vertices", v)?;
        }
        let area = shoelace(&vertices).abs();
        if !(area > 0.0) {
            return Err(Error::invalid("polygon has zero area"));
        }
        let mut lo = vec![f64::INFINITY; 2];
        let mut hi = vec![f64::NEG_INFINITY; 2];
        for v in &vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Ok(Self {
            dim: 2,
            volume_hint: Some(area),
            bbox: BoundingBox { lo, hi },
            shape: Shape::Polygon { vertices },
        })
    }

    pub fn stadium(a: Vec<f64>, b: Vec<f64>, radius: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        let n = a.len();
        if n == 0 {
            return Err(Error::invalid("stadium dimension must be at least 1"));
        }
        check_finite("capsule", &a)?;
        check_finite("capsule", &b)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!(
                "capsule radius must be positive, got {radius}"
            )));
        }
        let len = dist(&a, &b);
        let vol = unit_ball_volume(n) * radius.powi(n as i32)
            + if n > 1 {
                unit_ball_volume(n - 1) * radius.powi(n as i32 - 1) * len
            } else {
                len
            };
        let lo = a.iter().zip(&b).map(|(x, y)| x.min(*y) - radius).collect();
        let hi = a.iter().zip(&b).map(|(x, y)| x.max(*y) + radius).collect();
        Ok(Self {
            dim: n,
            volume_hint: Some(vol),
            bbox: BoundingBox { lo, hi },
            shape: Shape::Stadium { a, b, radius },
        })
    }

    /// Predicate-backed domain. The box must strictly contain the region; it is
    /// padded slightly so that the containment is strict.
    pub fn implicit(
        label: impl Into<String>,
        inside: InsideFn,
        lo: Vec<f64>,
        hi: Vec<f64>,
        volume_hint: Option<f64>,
    ) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::invalid("implicit domain dimension must be at least 1"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::invalid("bounding box must satisfy lo < hi"));
        }
        if let Some(v) = volume_hint {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid("volume hint must be positive"));
            }
        }
        let n = lo.len();
        let bbox = BoundingBox { lo, hi };
        let pad = 1e-9 * bbox.diagonal();
        Ok(Self {
            dim: n,
            volume_hint,
            bbox: bbox.inflated(pad),
            shape: Shape::Implicit(ImplicitRegion {
                inside,
                scale: 1.0,
                offset: vec![0.0; n],
                label: label.into(),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn volume_hint(&self) -> Option<f64> {
        self.volume_hint
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Ball { .. } => "ball",
            Shape::Ellipse { .. } => "ellipse",
            Shape::Rectangle { .. } => "rectangle",
            Shape::Polygon { .. } => "polygon",
            Shape::Stadium { .. } => "stadium",
            Shape::Implicit(_) => "implicit",
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
            || matches!(self.shape, Shape::Ellipse { semi_axes, .. } if semi_axes[0] == semi_axes[1])
    }

    /// Checked membership test for the open region.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.is_inside(x))
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Membership without the dimension check (hot loops).
    #[inline]
    pub fn is_inside(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        match &self.shape {
            Shape::Ball { center, radius } => dist2(x, center) < radius * radius,
            Shape::Ellipse { center, semi_axes } => {
                let u = (x[0] - center[0]) / semi_axes[0];
                let v = (x[1] - center[1]) / semi_axes[1];
                u * u + v * v < 1.0
            }
            Shape::Rectangle { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v > a && v < b)
            }
            Shape::Polygon { vertices } => polygon_contains(vertices, [x[0], x[1]]),
            Shape::Stadium { a, b, radius } => segment_distance(x, a, b) < *radius,
            Shape::Implicit(r) => r.test(x),
        }
    }

    /// Exact volume for analytic kinds, otherwise a midpoint-grid estimate.
    pub fn volume(&self, cfg: &QuadratureConfig) -> Result<VolumeEstimate> {
        match (self.volume_hint, cfg.force_grid) {
            (Some(v), false) => Ok(VolumeEstimate {
                value: v,
                error: 0.0,
                exact: true,
            }),
            _ => self.volume_grid(self.bbox.longest_side() / cfg.cells_per_axis as f64),
        }
    }

    /// Volume by counting cell centers of a lattice with spacing `h` over the
    /// bounding box. The error estimate is `(box surface) * h`.
    pub fn volume_grid(&self, h: f64) -> Result<VolumeEstimate> {
        if !(h > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        let n = self.dim;
        let counts: Vec<usize> = (0..n)
            .map(|k| (self.bbox.side(k) / h).ceil().max(1.0) as usize)
            .collect();
        let total: usize = counts.iter().product();
        let lo = self.bbox.lo.clone();
        let inside = crate::par::count_parallel(total, |idx| {
            let mut x = [0.0; 8];
            let mut rem = idx;
            for k in 0..n {
                let i = rem % counts[k];
                rem /= counts[k];
                x[k] = lo[k] + (i as f64 + 0.5) * h;
            }
            self.is_inside(&x[..n])
        });
        if inside == 0 {
            return Err(Error::DegenerateSampling(format!(
                "no grid cell of size {h} falls inside the domain"
            )));
        }
        Ok(VolumeEstimate {
            value: inside as f64 * h.powi(n as i32),
            error: self.bbox.surface() * h,
            exact: false,
        })
    }

    /// Volume as a plain number: the closed form when available, otherwise a
    /// default-resolution grid estimate.
    pub fn measure(&self) -> Result<f64> {
        Ok(self.volume(&QuadratureConfig::default())?.value)
    }

    pub fn equivalent_ball(&self) -> Result<EquivalentBall> {
        EquivalentBall::for_volume(self.measure()?, self.dim)
    }

    /// Lower bound on the distance from an interior point to the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if !self.is_inside(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        Ok(self.distance_bound(x))
    }

    /// Distance bound for a point already known to be inside.
    pub fn distance_bound(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Ball { center, radius } => (radius - dist(x, center)).max(0.0),
            Shape::Ellipse { center, semi_axes } => {
                ellipse_distance(semi_axes, [x[0] - center[0], x[1] - center[1]])
            }
            Shape::Rectangle { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            Shape::Polygon { vertices } => {
                let p = [x[0], x[1]];
                let mut best = f64::INFINITY;
                for i in 0..vertices.len() {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % vertices.len()];
                    best = best.min(segment_distance(&p, &a, &b));
                }
                best
            }
            Shape::Stadium { a, b, radius } => (radius - segment_distance(x, a, b)).max(0.0),
            Shape::Implicit(_) => self.implicit_distance(x),
        }
    }

    /// Radial march plus bisection along fixed directions; the minimum hit
    /// distance is halved.
    fn implicit_distance(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let reach = self.bbox.diagonal();
        let step = reach / 128.0;
        let mut best = f64::INFINITY;
        let mut p = vec![0.0; n];
        for dir in probe_directions(n) {
            let mut t = 0.0;
            let mut hit = reach;
            while t < reach {
                let next = t + step;
                for k in 0..n {
                    p[k] = x[k] + next * dir[k];
                }
                if !self.is_inside(&p) {
                    let (mut a, mut b) = (t, next);
                    for _ in 0..40 {
                        let m = 0.5 * (a + b);
                        for k in 0..n {
                            p[k] = x[k] + m * dir[k];
                        }
                        if self.is_inside(&p) {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    hit = a;
                    break;
                }
                t = next;
            }
            best = best.min(hit);
        }
        0.5 * best
    }

    /// Dilation about the origin: `rD = { r y : y in D }`.
    pub fn scale(&self, r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("scale factor must be positive, got {r}")));
        }
        let n = self.dim;
        let shape = match &self.shape {
            Shape::Ball { center, radius } => Shape::Ball {
                center: center.iter().map(|c| c * r).collect(),
                radius: radius * r,
            },
            Shape::Ellipse { center, semi_axes } => Shape::Ellipse {
                center: [center[0] * r, center[1] * r],
                semi_axes: [semi_axes[0] * r, semi_axes[1] * r],
            },
            Shape::Rectangle { lo, hi } => Shape::Rectangle {
                lo: lo.iter().map(|v| v * r).collect(),
                hi: hi.iter().map(|v| v * r).collect(),
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|v| [v[0] * r, v[1] * r]).collect(),
            },
            Shape::Stadium { a, b, radius } => Shape::Stadium {
                a: a.iter().map(|v| v * r).collect(),
                b: b.iter().map(|v| v * r).collect(),
                radius: radius * r,
            },
            Shape::Implicit(reg) => Shape::Implicit(ImplicitRegion {
                inside: reg.inside.clone(),
                scale: reg.scale * r,
                offset: reg.offset.iter().map(|v| v * r).collect(),
                label: reg.label.clone(),
            }),
        };
        Ok(Self {
            shape,
            dim: n,
            volume_hint: self.volume_hint.map(|v| v * r.powi(n as i32)),
            bbox: self.bbox.map(|v| v * r, |_, v| v),
        })
    }

    /// Translation by `v`.
    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        self.check_dim(v)?;
        let shift = |p: &[f64]| -> Vec<f64> { p.iter().zip(v).map(|(a, b)| a + b).collect() };
        let shape = match &self.shape {
            Shape::Ball { center, radius } => Shape::Ball {
                center: shift(center),
                radius: *radius,
            },
            Shape::Ellipse { center, semi_axes } => Shape::Ellipse {
                center: [center[0] + v[0], center[1] + v[1]],
                semi_axes: *semi_axes,
            },
            Shape::Rectangle { lo, hi } => Shape::Rectangle {
                lo: shift(lo),
                hi: shift(hi),
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|p| [p[0] + v[0], p[1] + v[1]]).collect(),
            },
            Shape::Stadium { a, b, radius } => Shape::Stadium {
                a: shift(a),
                b: shift(b),
                radius: *radius,
            },
            Shape::Implicit(reg) => Shape::Implicit(ImplicitRegion {
                inside: reg.inside.clone(),
                scale: reg.scale,
                offset: shift(&reg.offset),
                label: reg.label.clone(),
            }),
        };
        Ok(Self {
            shape,
            dim: self.dim,
            volume_hint: self.volume_hint,
            bbox: self.bbox.map(|x| x, |k, x| x + v[k]),
        })
    }

    /// True when the region is known to be convex.
    pub fn is_convex(&self) -> bool {
        match &self.shape {
            Shape::Polygon { vertices } => polygon_is_convex(vertices),
            Shape::Implicit(_) => false,
            _ => true,
        }
    }

    /// Parameter interval `{t >= 0 : o + t d in D}` for convex domains, or
    /// `None` when the ray misses. `d` must be a unit vector.
    pub fn ray_chord(&self, o: &[f64], d: &[f64]) -> Option<(f64, f64)> {
        let iv = match &self.shape {
            Shape::Ball { center, radius } => sphere_chord(o, d, center, *radius),
            Shape::Ellipse { center, semi_axes } => {
                let ou = [(o[0] - center[0]) / semi_axes[0], (o[1] - center[1]) / semi_axes[1]];
                let du = [d[0] / semi_axes[0], d[1] / semi_axes[1]];
                quadratic_chord(&ou, &du, 1.0)
            }
            Shape::Rectangle { lo, hi } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 0..o.len() {
                    if d[k].abs() < 1e-300 {
                        if !(o[k] > lo[k] && o[k] < hi[k]) {
                            return None;
                        }
                    } else {
                        let a = (lo[k] - o[k]) / d[k];
                        let b = (hi[k] - o[k]) / d[k];
                        t0 = t0.max(a.min(b));
                        t1 = t1.min(a.max(b));
                    }
                }
                if t1 > t0 {
                    Some((t0, t1))
                } else {
                    None
                }
            }
            Shape::Polygon { vertices } => {
                if !polygon_is_convex(vertices) {
                    return None;
                }
                convex_polygon_chord(vertices, [o[0], o[1]], [d[0], d[1]])
            }
            Shape::Stadium { a, b, radius } => capsule_chord(o, d, a, b, *radius),
            Shape::Implicit(_) => None,
        }?;
        let (t0, t1) = (iv.0.max(0.0), iv.1);
        if t1 > t0 {
            Some((t0, t1))
        } else {
            None
        }
    }

    /// Fraction in `(0, 1]` of the segment `x -> x + v` at which the segment
    /// first leaves the domain, assuming `x` is inside.
    pub(crate) fn exit_fraction(&self, x: &[f64], v: &[f64]) -> f64 {
        let n = self.dim;
        let mut p = [0.0; 8];
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..48 {
            let m = 0.5 * (a + b);
            for k in 0..n {
                p[k] = x[k] + m * v[k];
            }
            if self.is_inside(&p[..n]) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Canonical JSON description of the shape (used for reports and cache keys).
    pub fn spec_json(&self) -> Value {
        match &self.shape {
            Shape::Ball { center, radius } => json!({
                "kind": "ball", "n": self.dim, "radius": radius, "center": center
            }),
            Shape::Ellipse { center, semi_axes } => json!({
                "kind": "ellipse", "n": 2, "semi_axes": semi_axes, "center": center
            }),
            Shape::Rectangle { lo, hi } => json!({
                "kind": "rectangle", "n": self.dim, "corners": [lo, hi]
            }),
            Shape::Polygon { vertices } => json!({
                "kind": "polygon", "n": 2, "vertices": vertices
            }),
            Shape::Stadium { a, b, radius } => json!({
                "kind": "stadium", "n": self.dim,
                "capsule": {"a": a, "b": b, "radius": radius}
            }),
            Shape::Implicit(reg) => json!({
                "kind": "implicit", "n": self.dim, "label": reg.label,
                "scale": reg.scale, "offset": reg.offset,
                "bbox": [self.bbox.lo, self.bbox.hi],
                "volume_hint": self.volume_hint,
            }),
        }
    }
}

/// Parses a domain-spec JSON document.
///
/// Recognized kinds: `ball` (`n`, `radius`, optional `center`), `ellipse`
/// (`eps` or `semi_axes`, optional `center`), `rectangle` (`corners`),
/// `polygon` (`vertices`) and `stadium` (`capsule: {a, b, radius}`).
pub fn parse_domain_spec(text: &str) -> Result<Domain> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::parse("<document>", e.to_string()))?;
    domain_from_value(&value)
}

pub fn domain_from_value(value: &Value) -> Result<Domain> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse("<document>", "expected a JSON object"))?;
    let kind = obj
        .get("kind")
        .ok_or_else(|| Error::parse("kind", "missing"))?
        .as_str()
        .ok_or_else(|| Error::parse("kind", "expected a string"))?;
    let n = match obj.get("n") {
        None => None,
        Some(v) => {
            let n = v
                .as_i64()
                .ok_or_else(|| Error::parse("n", "expected an integer"))?;
            if n < 1 {
                return Err(Error::invalid(format!("dimension n must be >= 1, got {n}")));
            }
            Some(n as usize)
        }
    };
    let check_n = |actual: usize| -> Result<()> {
        match n {
            Some(m) if m != actual => Err(Error::DimensionMismatch {
                expected: m,
                actual,
            }),
            _ => Ok(()),
        }
    };
    match kind {
        "ball" => {
            let radius = number(obj, "radius")?;
            let center = match obj.get("center") {
                Some(c) => point(c, "center")?,
                None => vec![0.0; n.ok_or_else(|| Error::parse("n", "missing"))?],
            };
            check_n(center.len())?;
            Domain::ball(center, radius)
        }
        "ellipse" => {
            check_n(2)?;
            let semi = match (obj.get("eps"), obj.get("semi_axes")) {
                (Some(_), Some(_)) => {
                    return Err(Error::parse("eps", "give either eps or semi_axes, not both"))
                }
                (Some(_), None) => {
                    let eps = number(obj, "eps")?;
                    if eps < 0.0 {
                        return Err(Error::invalid(format!("eps must be >= 0, got {eps}")));
                    }
                    [1.0, 1.0 + eps]
                }
                (None, Some(v)) => {
                    let p = point(v, "semi_axes")?;
                    if p.len() != 2 {
                        return Err(Error::parse("semi_axes", "expected two numbers"));
                    }
                    [p[0], p[1]]
                }
                (None, None) => return Err(Error::parse("eps", "missing")),
            };
            let center = match obj.get("center") {
                Some(c) => {
                    let p = point(c, "center")?;
                    if p.len() != 2 {
                        return Err(Error::parse("center", "expected two numbers"));
                    }
                    [p[0], p[1]]
                }
                None => [0.0, 0.0],
            };
            Domain::ellipse(center, semi)
        }
        "rectangle" => {
            let corners = obj
                .get("corners")
                .ok_or_else(|| Error::parse("corners", "missing"))?
                .as_array()
                .ok_or_else(|| Error::parse("corners", "expected [[lo...],[hi...]]"))?;
            if corners.len() != 2 {
                return Err(Error::parse("corners", "expected exactly two corners"));
            }
            let lo = point(&corners[0], "corners")?;
            let hi = point(&corners[1], "corners")?;
            check_n(lo.len())?;
            Domain::rectangle(lo, hi)
        }
        "polygon" => {
            check_n(2)?;
            let verts = obj
                .get("vertices")
                .ok_or_else(|| Error::parse("vertices", "missing"))?
                .as_array()
                .ok_or_else(|| Error::parse("vertices", "expected a list of points"))?;
            let mut out = Vec::with_capacity(verts.len());
            for v in verts {
                let p = point(v, "vertices")?;
                if p.len() != 2 {
                    return Err(Error::parse("vertices", "each vertex needs two coordinates"));
                }
                out.push([p[0], p[1]]);
            }
            Domain::polygon(out)
        }
        "stadium" => {
            let cap = obj
                .get("capsule")
                .ok_or_else(|| Error::parse("capsule", "missing"))?
                .as_object()
                .ok_or_else(|| Error::parse("capsule", "expected an object"))?;
            let a = point(
                cap.get("a").ok_or_else(|| Error::parse("capsule.a", "missing"))?,
                "capsule.a",
            )?;
            let b = point(
                cap.get("b").ok_or_else(|| Error::parse("capsule.b", "missing"))?,
                "capsule.b",
            )?;
            let radius = number(cap, "radius").map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse("capsule.radius", message),
                other => other,
            })?;
            check_n(a.len())?;
            Domain::stadium(a, b, radius)
        }
        other => Err(Error::parse("kind", format!("unknown domain kind `{other}`"))),
    }
}

fn number(obj: &Map<String, Value>, key: &str) -> Result<f64> {
    let v = obj
        .get(key)
        .ok_or_else(|| Error::parse(key, "missing"))?
        .as_f64()
        .ok_or_else(|| Error::parse(key, "expected a number"))?;
    if !v.is_finite() {
        return Err(Error::parse(key, "non-finite number"));
    }
    Ok(v)
}

fn point(v: &Value, field: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::parse(field, "expected a list of numbers"))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .filter(|f| f.is_finite())
                .ok_or_else(|| Error::parse(field, "expected a finite number"))
        })
        .collect()
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Distance from `p` to the segment `a`–`b` in any dimension.
fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for k in 0..p.len() {
        let ab = b[k] - a[k];
        ab2 += ab * ab;
        ap_ab += (p[k] - a[k]) * ab;
    }
    let t = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let mut d2 = 0.0;
    for k in 0..p.len() {
        let q = a[k] + t * (b[k] - a[k]);
        d2 += (p[k] - q) * (p[k] - q);
    }
    d2.sqrt()
}

fn shoelace(v: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        let a = v[i];
        let b = v[(i + 1) % v.len()];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

fn polygon_contains(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut winding = 0i32;
    for i in 0..v.len() {
        let a = v[i];
        let b = v[(i + 1) % v.len()];
        if segment_distance(&p, &a, &b) < POLYGON_EDGE_TOL {
            return false;
        }
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                winding += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

fn polygon_is_convex(v: &[[f64; 2]]) -> bool {
    let m = v.len();
    let mut sign = 0.0f64;
    for i in 0..m {
        let a = v[i];
        let b = v[(i + 1) % m];
        let c = v[(i + 2) % m];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross.abs() < 1e-15 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}

fn convex_polygon_chord(v: &[[f64; 2]], o: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
    let orient = shoelace(v).signum();
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..v.len() {
        let a = v[i];
        let b = v[(i + 1) % v.len()];
        // inward normal
        let nrm = [-(b[1] - a[1]) * orient, (b[0] - a[0]) * orient];
        let num = nrm[0] * (o[0] - a[0]) + nrm[1] * (o[1] - a[1]);
        let den = nrm[0] * d[0] + nrm[1] * d[1];
        if den.abs() < 1e-300 {
            if num <= 0.0 {
                return None;
            }
        } else {
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t1 > t0 {
        Some((t0, t1))
    } else {
        None
    }
}

/// Roots of `|o + t d|^2 = r2` as an interval.
fn quadratic_chord(o: &[f64], d: &[f64], r2: f64) -> Option<(f64, f64)> {
    let a: f64 = d.iter().map(|x| x * x).sum();
    let b: f64 = 2.0 * o.iter().zip(d).map(|(x, y)| x * y).sum::<f64>();
    let c: f64 = o.iter().map(|x| x * x).sum::<f64>() - r2;
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 || a <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    // numerically stable root pair
    let q = -0.5 * (b + b.signum() * s);
    let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (-s / (2.0 * a), s / (2.0 * a)) };
    Some((r1.min(r2), r1.max(r2)))
}

fn sphere_chord(o: &[f64], d: &[f64], c: &[f64], r: f64) -> Option<(f64, f64)> {
    let rel: Vec<f64> = o.iter().zip(c).map(|(a, b)| a - b).collect();
    quadratic_chord(&rel, d, r * r)
}

fn capsule_chord(o: &[f64], d: &[f64], a: &[f64], b: &[f64], r: f64) -> Option<(f64, f64)> {
    let n = o.len();
    let axis: Vec<f64> = (0..n).map(|k| b[k] - a[k]).collect();
    let len = norm(&axis);
    let mut pieces = Vec::with_capacity(3);
    pieces.extend(sphere_chord(o, d, a, r));
    pieces.extend(sphere_chord(o, d, b, r));
    if len > 0.0 {
        let e: Vec<f64> = axis.iter().map(|v| v / len).collect();
        let oa: Vec<f64> = (0..n).map(|k| o[k] - a[k]).collect();
        let s0: f64 = oa.iter().zip(&e).map(|(x, y)| x * y).sum();
        let sd: f64 = d.iter().zip(&e).map(|(x, y)| x * y).sum();
        let perp_o: Vec<f64> = (0..n).map(|k| oa[k] - s0 * e[k]).collect();
        let perp_d: Vec<f64> = (0..n).map(|k| d[k] - sd * e[k]).collect();
        let cyl = if norm(&perp_d) < 1e-300 {
            if norm(&perp_o) < r {
                Some((f64::NEG_INFINITY, f64::INFINITY))
            } else {
                None
            }
        } else {
            quadratic_chord(&perp_o, &perp_d, r * r)
        };
        if let Some((c0, c1)) = cyl {
            let (s_lo, s_hi) = if sd.abs() < 1e-300 {
                if s0 >= 0.0 && s0 <= len {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (1.0, -1.0)
                }
            } else {
                let p = (0.0 - s0) / sd;
                let q = (len - s0) / sd;
                (p.min(q), p.max(q))
            };
            let lo = c0.max(s_lo);
            let hi = c1.min(s_hi);
            if hi > lo {
                pieces.push((lo, hi));
            }
        }
    }
    if pieces.is_empty() {
        return None;
    }
    let lo = pieces.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pieces.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

/// Exact distance from an interior point (relative to the center) to the
/// boundary of an axis-aligned ellipse, by bisection on the Lagrange
/// multiplier of the nearest-point problem.
fn ellipse_distance(semi_axes: &[f64; 2], rel: [f64; 2]) -> f64 {
    let (e0, e1, y0, y1) = if semi_axes[0] >= semi_axes[1] {
        (semi_axes[0], semi_axes[1], rel[0].abs(), rel[1].abs())
    } else {
        (semi_axes[1], semi_axes[0], rel[1].abs(), rel[0].abs())
    };
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1) * (e0 / e1);
            let sbar = ellipse_root(r0, z0, z1, g);
            let x0 = r0 * y0 / (sbar + r0);
            let x1 = y1 / (sbar + 1.0);
            ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt()
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            ((x0 - y0).powi(2) + x1 * x1).sqrt()
        } else {
            (y0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g0: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g0 < 0.0 { 0.0 } else { (n0 * n0 + z1 * z1).sqrt() - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Fixed, deterministic probe directions on the unit sphere.
fn probe_directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..IMPLICIT_DIRECTIONS)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / IMPLICIT_DIRECTIONS as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci sphere
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..IMPLICIT_DIRECTIONS)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / IMPLICIT_DIRECTIONS as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut dirs = Vec::new();
            for k in 0..n {
                for s in [-1.0, 1.0] {
                    let mut d = vec![0.0; n];
                    d[k] = s;
                    dirs.push(d);
                }
            }
            // diagonal directions
            for mask in 0..(1usize << n.min(6)) {
                let d: Vec<f64> = (0..n)
                    .map(|k| if (mask >> (k % 6)) & 1 == 1 { 1.0 } else { -1.0 })
                    .collect();
                let len = norm(&d);
                dirs.push(d.iter().map(|v| v / len).collect());
            }
            dirs
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn disk() -> Domain {
        Domain::centered_ball(2, 1.0).unwrap()
    }

    #[test]
    fn parse_examples() {
        let d = parse_domain_spec(r#"{"kind":"ball","n":2,"radius":1.0}"#).unwrap();
        assert_relative_eq!(d.measure().unwrap(), PI, max_relative = 1e-15);
        let e = parse_domain_spec(r#"{"kind":"ellipse","eps":1.0}"#).unwrap();
        assert_relative_eq!(e.measure().unwrap(), 2.0 * PI, max_relative = 1e-15);
        match e.shape() {
            Shape::Ellipse { semi_axes, .. } => assert_eq!(*semi_axes, [1.0, 2.0]),
            other => panic!("unexpected shape {other:?}"),
        }
        let err = parse_domain_spec(r#"{"kind":"ball","n":2,"radius":-1}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = parse_domain_spec(r#"{"kind":"ball","n":2}"#).unwrap_err();
        assert!(matches!(&err, Error::Parse { field, .. } if field == "radius"), "{err}");
        let err = parse_domain_spec(r#"{"kind":"ball","n":0,"radius":1}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = parse_domain_spec(r#"{"kind":"torus"}"#).unwrap_err();
        assert!(matches!(&err, Error::Parse { field, .. } if field == "kind"));
        let err = parse_domain_spec(r#"{"kind":"polygon","vertices":[[0,0],[1,0]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = parse_domain_spec(r#"{"kind":"stadium","capsule":{"a":[0,0],"b":[1,0]}}"#)
            .unwrap_err();
        assert!(matches!(&err, Error::Parse { field, .. } if field == "capsule.radius"));
        let s = parse_domain_spec(
            r#"{"kind":"stadium","capsule":{"a":[0,0],"b":[2,0],"radius":0.5}}"#,
        )
        .unwrap();
        assert_relative_eq!(s.measure().unwrap(), PI * 0.25 + 2.0, max_relative = 1e-14);
        let r = parse_domain_spec(r#"{"kind":"rectangle","corners":[[0,0],[1,2]]}"#).unwrap();
        assert_relative_eq!(r.measure().unwrap(), 2.0);
    }

    #[test]
    fn contains_examples() {
        let d = disk();
        assert!(d.contains(&[0.0, 0.0]).unwrap());
        assert!(!d.contains(&[2.0, 0.0]).unwrap());
        assert!(matches!(
            d.contains(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let e = Domain::ellipse_eps(1.0).unwrap();
        // 0 + 1.5^2 / 4 < 1
        assert!(e.contains(&[0.0, 1.5]).unwrap());
        assert!(!e.contains(&[0.0, 2.0]).unwrap());
    }

    #[test]
    fn polygon_edges_are_outside() {
        let sq = Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(sq.contains(&[0.5, 0.5]).unwrap());
        assert!(!sq.contains(&[0.5, 0.0]).unwrap());
        assert!(!sq.contains(&[1.0, 0.3]).unwrap());
        assert!(!sq.contains(&[1.5, 0.3]).unwrap());
        // non-convex L shape
        let l = Domain::polygon(vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ])
        .unwrap();
        assert!(l.contains(&[0.5, 1.5]).unwrap());
        assert!(!l.contains(&[1.5, 1.5]).unwrap());
        assert!(!l.is_convex());
        assert_relative_eq!(l.measure().unwrap(), 3.0);
    }

    #[test]
    fn volume_examples() {
        assert_relative_eq!(disk().measure().unwrap(), PI);
        let e = Domain::ellipse_eps(0.5).unwrap();
        assert_relative_eq!(e.measure().unwrap(), 1.5 * PI, max_relative = 1e-15);
        let sq = Domain::rectangle(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let est = sq.volume_grid(1e-3).unwrap();
        assert!(!est.exact);
        assert!((est.value - 1.0).abs() <= 1e-2, "{est:?}");
        let err = disk().volume_grid(10.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateSampling(_)));
    }

    #[test]
    fn equivalent_radius_examples() {
        assert_relative_eq!(equivalent_ball_radius(PI, 2).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            equivalent_ball_radius(1.0, 2).unwrap(),
            0.564_189_583_547_756_3,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            equivalent_ball_radius(4.0 * PI / 3.0, 3).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert!(equivalent_ball_radius(0.0, 2).is_err());
        let b = EquivalentBall::for_volume(2.5, 3).unwrap();
        assert_relative_eq!(b.volume(), 2.5, max_relative = 1e-10);
    }

    #[test]
    fn distance_examples() {
        assert_relative_eq!(disk().boundary_distance(&[0.0, 0.0]).unwrap(), 1.0);
        let sq = Domain::rectangle(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(sq.boundary_distance(&[0.25, 0.5]).unwrap(), 0.25);
        let e = Domain::ellipse_eps(1.0).unwrap();
        let d = e.boundary_distance(&[0.0, 0.0]).unwrap();
        assert!((0.5..=1.0).contains(&d), "{d}");
        assert_relative_eq!(d, 1.0, max_relative = 1e-12);
        assert!(matches!(
            disk().boundary_distance(&[3.0, 0.0]),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn ellipse_distance_matches_dense_boundary_scan() {
        let e = Domain::ellipse([0.0, 0.0], [1.0, 1.6]).unwrap();
        let pts = [[0.3, 0.2], [-0.7, 0.1], [0.05, -1.4], [0.9, 0.0], [0.0, 0.0], [-0.2, 1.5]];
        for p in pts {
            let scan = (0..200_000)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / 200_000.0;
                    ((t.cos() - p[0]).powi(2) + (1.6 * t.sin() - p[1]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            let d = e.boundary_distance(&p).unwrap();
            assert!((d - scan).abs() < 1e-6, "{p:?}: {d} vs {scan}");
        }
    }

    #[test]
    fn implicit_distance_is_conservative() {
        let inside: InsideFn = Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0);
        let d = Domain::implicit("disk", inside, vec![-1.0, -1.0], vec![1.0, 1.0], Some(PI))
            .unwrap();
        let b = d.boundary_distance(&[0.3, 0.0]).unwrap();
        assert!((0.35 - 1e-9..=0.7).contains(&b), "{b}");
    }

    #[test]
    fn scale_examples() {
        let d = disk().scale(2.0).unwrap();
        match d.shape() {
            Shape::Ball { radius, .. } => assert_eq!(*radius, 2.0),
            _ => unreachable!(),
        }
        let e = Domain::ellipse_eps(1.0).unwrap().scale(0.5).unwrap();
        match e.shape() {
            Shape::Ellipse { semi_axes, .. } => assert_eq!(*semi_axes, [0.5, 1.0]),
            _ => unreachable!(),
        }
        let p = Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
            .unwrap()
            .scale(3.0)
            .unwrap();
        match p.shape() {
            Shape::Polygon { vertices } => {
                assert_eq!(vertices, &vec![[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
            }
            _ => unreachable!(),
        }
        assert!(disk().scale(0.0).is_err());
        assert!(disk().scale(-1.0).is_err());
    }

    #[test]
    fn ray_chords_agree_with_bisection() {
        let shapes = vec![
            disk(),
            Domain::ellipse_eps(0.7).unwrap(),
            Domain::rectangle(vec![-1.0, -0.5], vec![1.0, 0.5]).unwrap(),
            Domain::polygon(vec![[-1.0, -1.0], [1.0, -1.0], [0.0, 1.0]]).unwrap(),
            Domain::stadium(vec![-0.5, 0.0], vec![0.5, 0.0], 0.4).unwrap(),
        ];
        for d in shapes {
            for k in 0..16 {
                let a = 2.0 * PI * (k as f64 + 0.3) / 16.0;
                let dir = [a.cos(), a.sin()];
                let o = [0.05, -0.02];
                let (t0, t1) = d.ray_chord(&o, &dir).expect("origin inside");
                assert_eq!(t0, 0.0);
                let v = [dir[0] * 10.0, dir[1] * 10.0];
                let t = d.exit_fraction(&o, &v) * 10.0;
                assert!((t - t1).abs() < 1e-9, "{} dir {k}: {t} vs {t1}", d.kind());
                // from outside
                let far = [o[0] - 5.0 * dir[0], o[1] - 5.0 * dir[1]];
                let (s0, s1) = d.ray_chord(&far, &dir).expect("ray hits");
                assert!((s1 - 5.0 - t1).abs() < 1e-9);
                assert!(s0 > 0.0 && s0 < 5.0);
            }
        }
    }
}
