//! Regular-grid scalar fields with an inside mask.
//!
//! Cell centers sit at `origin + i * h` (axis 0 varies fastest in the flat
//! index). Values outside the mask are zero.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::par;

/// Cell layout of a regular grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Center of cell `(0, ..., 0)`.
    pub origin: Vec<f64>,
    pub h: f64,
    pub extents: Vec<usize>,
}

impl GridSpec {
    /// Grid with `res` cells across the longest side of the domain's bounding
    /// box. The box center is a cell center and one layer of padding surrounds
    /// the box, so every boundary-adjacent interior cell has outside neighbors.
    pub fn covering(domain: &Domain, res: usize) -> Result<Self> {
        if res < 2 {
            return Err(Error::invalid(format!("grid resolution must be >= 2, got {res}")));
        }
        let bb = domain.bbox();
        let h = bb.longest_side() / res as f64;
        let center = bb.center();
        let mut origin = Vec::with_capacity(bb.dim());
        let mut extents = Vec::with_capacity(bb.dim());
        for k in 0..bb.dim() {
            let half = (bb.side(k) / (2.0 * h)).ceil() as usize + 1;
            origin.push(center[k] - half as f64 * h);
            extents.push(2 * half + 1);
        }
        Ok(Self { origin, h, extents })
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Stride of axis `k` in the flat index.
    pub fn stride(&self, k: usize) -> usize {
        self.extents[..k].iter().product()
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for (k, e) in self.extents.iter().enumerate() {
            out[k] = idx % e;
            idx /= e;
        }
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for k in (0..self.dim()).rev() {
            idx = idx * self.extents[k] + multi[k];
        }
        idx
    }

    pub fn center_of(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for k in 0..self.dim() {
            let i = rem % self.extents[k];
            rem /= self.extents[k];
            out[k] = self.origin[k] + i as f64 * self.h;
        }
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.center_of(idx, &mut x);
        x
    }

    /// Cell-center membership mask for `domain`.
    pub fn mask(&self, domain: &Domain) -> Result<Vec<bool>> {
        domain.check_dim(&self.origin)?;
        let n = self.dim();
        Ok(par::map_ordered(self.len(), |idx| {
            let mut x = [0.0; 8];
            self.center_of(idx, &mut x[..n]);
            domain.is_inside(&x[..n])
        }))
    }

    /// Neighbor of `idx` along axis `k` in direction `dir` (±1), if on the grid.
    #[inline]
    pub fn neighbor(&self, idx: usize, k: usize, dir: isize) -> Option<usize> {
        let stride = self.stride(k);
        let i = (idx / stride) % self.extents[k];
        if dir < 0 {
            (i > 0).then(|| idx - stride)
        } else {
            (i + 1 < self.extents[k]).then(|| idx + stride)
        }
    }
}

/// Values on a grid, zero outside the mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let f = Self { grid, values, mask };
        f.validate()?;
        Ok(f)
    }

    pub fn zeros(grid: GridSpec, mask: Vec<bool>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values, mask }
    }

    /// Samples `f` at inside cell centers.
    pub fn from_fn(grid: GridSpec, mask: Vec<bool>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let n = grid.dim();
        let values = par::map_ordered(grid.len(), |idx| {
            if mask[idx] {
                let mut x = [0.0; 8];
                grid.center_of(idx, &mut x[..n]);
                f(&x[..n])
            } else {
                0.0
            }
        });
        Self { grid, values, mask }
    }

    /// Indicator of the mask.
    pub fn indicator(grid: GridSpec, mask: Vec<bool>) -> Self {
        let values = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        Self { grid, values, mask }
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.grid.len();
        if self.values.len() != len || self.mask.len() != len {
            return Err(Error::invalid(format!(
                "field has {} values and {} mask flags for a grid of {} cells",
                self.values.len(),
                self.mask.len(),
                len
            )));
        }
        if !(self.grid.h > 0.0) {
            return Err(Error::invalid("cell size must be positive"));
        }
        for (v, &m) in self.values.iter().zip(&self.mask) {
            if !v.is_finite() {
                return Err(Error::Numeric("non-finite field value".into()));
            }
            if !m && *v != 0.0 {
                return Err(Error::invalid("field is non-zero outside its mask"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn inside_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Volume covered by the mask.
    pub fn mask_volume(&self) -> f64 {
        self.inside_count() as f64 * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `h^n * sum(values)`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            mask: self.mask.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&self.mask)
                .map(|(&v, &m)| if m { f(v) } else { 0.0 })
                .collect(),
            mask: self.mask.clone(),
        }
    }

    pub fn same_layout(&self, other: &ScalarField) -> bool {
        self.grid == other.grid && self.mask == other.mask
    }

    /// Multilinear interpolation of cell-center values; zero off the grid.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let s = (x[k] - self.grid.origin[k]) / self.grid.h;
            if s < 0.0 || s > (self.grid.extents[k] - 1) as f64 {
                return Ok(0.0);
            }
            let i = (s.floor() as usize).min(self.grid.extents[k].saturating_sub(2));
            base[k] = i;
            frac[k] = s - i as f64;
        }
        let mut acc = 0.0;
        let mut corner = vec![0usize; n];
        for c in 0..(1usize << n) {
            let mut w = 1.0;
            for k in 0..n {
                let bit = (c >> k) & 1;
                corner[k] = (base[k] + bit).min(self.grid.extents[k] - 1);
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                acc += w * self.values[self.grid.flat_index(&corner)];
            }
        }
        Ok(acc)
    }

    /// Value at the cell whose center is nearest to `x`.
    pub fn nearest(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let mut multi = vec![0usize; n];
        for k in 0..n {
            let s = ((x[k] - self.grid.origin[k]) / self.grid.h).round();
            if s < 0.0 || s >= self.grid.extents[k] as f64 {
                return Ok(0.0);
            }
            multi[k] = s as usize;
        }
        Ok(self.values[self.grid.flat_index(&multi)])
    }

    /// `sum |∇⁺u|² h^n` with forward differences; values beyond the grid are zero.
    pub fn dirichlet_energy(&self) -> f64 {
        let g = &self.grid;
        let h2 = g.h * g.h;
        let mut acc = 0.0;
        for idx in 0..g.len() {
            let u = self.values[idx];
            for k in 0..g.dim() {
                let v = g.neighbor(idx, k, 1).map_or(0.0, |j| self.values[j]);
                acc += (v - u) * (v - u) / h2;
            }
            // the left edge difference for cells on the first layer
            for k in 0..g.dim() {
                if g.neighbor(idx, k, -1).is_none() {
                    acc += u * u / h2;
                }
            }
        }
        acc * g.cell_volume()
    }

    /// Central-difference gradient magnitude at every cell (zero beyond the grid).
    pub fn gradient_norms(&self) -> Vec<f64> {
        let g = &self.grid;
        par::map_ordered(g.len(), |idx| {
            let mut s = 0.0;
            for k in 0..g.dim() {
                let a = g.neighbor(idx, k, 1).map_or(0.0, |j| self.values[j]);
                let b = g.neighbor(idx, k, -1).map_or(0.0, |j| self.values[j]);
                let d = (a - b) / (2.0 * g.h);
                s += d * d;
            }
            s.sqrt()
        })
    }

    /// CSV with a `# h=...` comment header, then `x0,..,x{n-1},inside,value`.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# h={} extents={} origin={}",
            self.grid.h,
            join(&self.grid.extents),
            join(&self.grid.origin)
        );
        for k in 0..n {
            let _ = write!(out, "x{k},");
        }
        out.push_str("inside,value\n");
        let mut x = vec![0.0; n];
        for idx in 0..self.grid.len() {
            self.grid.center_of(idx, &mut x);
            for v in &x {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{},{}", u8::from(self.mask[idx]), self.values[idx]);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("csv", "empty document"))?;
        let meta = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::parse("csv", "missing `# h=...` header"))?;
        let mut h = None;
        let mut extents = None;
        let mut origin = None;
        for part in meta.split_whitespace() {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::parse("csv", format!("bad header item `{part}`")))?;
            match key {
                "h" => h = Some(parse_f64("h", val)?),
                "extents" => {
                    extents = Some(
                        val.split(';')
                            .map(|s| s.parse::<usize>().map_err(|e| Error::parse("extents", e.to_string())))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "origin" => {
                    origin = Some(val.split(';').map(|s| parse_f64("origin", s)).collect::<Result<Vec<_>>>()?)
                }
                _ => {}
            }
        }
        let grid = GridSpec {
            origin: origin.ok_or_else(|| Error::parse("origin", "missing"))?,
            h: h.ok_or_else(|| Error::parse("h", "missing"))?,
            extents: extents.ok_or_else(|| Error::parse("extents", "missing"))?,
        };
        if grid.origin.len() != grid.extents.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.extents.len(),
                actual: grid.origin.len(),
            });
        }
        let n = grid.dim();
        lines.next(); // column names
        let mut values = Vec::with_capacity(grid.len());
        let mut mask = Vec::with_capacity(grid.len());
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != n + 2 {
                return Err(Error::parse("csv", format!("expected {} columns, got {}", n + 2, cols.len())));
            }
            mask.push(match cols[n] {
                "1" => true,
                "0" => false,
                other => return Err(Error::parse("inside", format!("expected 0 or 1, got `{other}`"))),
            });
            values.push(parse_f64("value", cols[n + 1])?);
        }
        Self::new(grid, values, mask)
    }

    /// Compact JSON: grid header, run-length encoded mask (runs alternate
    /// starting with outside) and a space-separated stream of inside values.
    pub fn to_json(&self) -> String {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0usize;
        for &m in &self.mask {
            if m == current {
                len += 1;
            } else {
                runs.push(len);
                current = m;
                len = 1;
            }
        }
        runs.push(len);
        let mut stream = String::new();
        for (v, &m) in self.values.iter().zip(&self.mask) {
            if m {
                if !stream.is_empty() {
                    stream.push(' ');
                }
                let _ = write!(stream, "{v}");
            }
        }
        serde_json::json!({
            "grid": self.grid,
            "mask_rle": runs,
            "values": stream,
        })
        .to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            grid: GridSpec,
            mask_rle: Vec<usize>,
            values: String,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::parse("field json", e.to_string()))?;
        let mut mask = Vec::with_capacity(doc.grid.len());
        let mut flag = false;
        for run in doc.mask_rle {
            mask.extend(std::iter::repeat_n(flag, run));
            flag = !flag;
        }
        if mask.len() != doc.grid.len() {
            return Err(Error::parse("mask_rle", "run lengths do not cover the grid"));
        }
        let mut stream = doc.values.split_whitespace();
        let mut values = Vec::with_capacity(mask.len());
        for &m in &mask {
            if m {
                let tok = stream
                    .next()
                    .ok_or_else(|| Error::parse("values", "too few values"))?;
                values.push(parse_f64("values", tok)?);
            } else {
                values.push(0.0);
            }
        }
        if stream.next().is_some() {
            return Err(Error::parse("values", "too many values"));
        }
        Self::new(doc.grid, values, mask)
    }
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn parse_f64(field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::parse(field, format!("`{s}`: {e}")))
}
