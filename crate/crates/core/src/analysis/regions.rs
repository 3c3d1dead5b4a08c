use serde::Serialize;

use super::multilinear::MultilinearPoly;
use crate::error::{Error, Result};

/// Largest `|f − poly|` at which a point still belongs to the poly's region.
pub const VALUE_TOLERANCE: f64 = 1e-9;
/// Largest coefficient difference at which two local fits count as the same.
pub const COEFF_TOLERANCE: f64 = 1e-7;
/// Width at which boundary bisection stops.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;
/// Distance from a grid node at which one-dimensional cells are sampled.
const NODE_OFFSET: f64 = 1e-7;

/// One region of a piecewise multilinear function found by a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub label: usize,
    /// The function inside the region, in global coordinates.
    pub poly: MultilinearPoly,
    /// `[lo, hi]` for one-dimensional scans.
    pub interval: Option<[f64; 2]>,
    /// Scan cells (`[i]` or `[i, j]`) lying wholly inside the region.
    pub cells: Vec<Vec<usize>>,
    /// Largest `|f − poly|` at the check points of the region.
    pub residual: f64,
    /// Largest second difference along each axis at the check points.
    pub second_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub dims: usize,
    pub resolution: usize,
    pub regions: Vec<Region>,
    /// Located boundary points (one coordinate per dimension).
    pub boundaries: Vec<Vec<f64>>,
    /// Cells that contain a boundary.
    pub boundary_cells: Vec<Vec<usize>>,
}

impl RegionReport {
    /// Number of regions.
    pub fn granularity(&self) -> usize {
        self.regions.len()
    }

    pub fn max_residual(&self) -> f64 {
        self.regions.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn max_second_difference(&self) -> f64 {
        self.regions.iter().map(|r| r.second_difference).fold(0.0, f64::max)
    }
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= COEFF_TOLERANCE)
}

fn line_through(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<f64> {
    let b = (y1 - y0) / (x1 - x0);
    vec![y0 - b * x0, b]
}

fn eval_poly(c: &[f64], x: &[f64]) -> f64 {
    match x {
        [x] => c[0] + c[1] * x,
        [x, y] => c[0] + c[1] * x + c[2] * y + c[3] * x * y,
        _ => unreachable!("scans are one- or two-dimensional"),
    }
}

/// Bisects on `[lo, hi]` for the point where `inside` stops holding, given
/// `inside(lo)` and `!inside(hi)`. Returns the bracket.
fn bisect(mut lo: f64, mut hi: f64, inside: impl Fn(f64) -> Result<bool>) -> Result<(f64, f64)> {
    while hi - lo > BOUNDARY_TOLERANCE {
        let m = 0.5 * (lo + hi);
        if inside(m)? {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok((lo, hi))
}

/// Scans a function of one or two inputs on `[0,1]^dims` for regions in
/// which it is multilinear. Each scan cell gets a local fit from its
/// corners; cells whose interior disagrees with that fit contain a boundary,
/// which is located by bisection. Cells with equal fits share a region.
/// In one dimension, a value at `x = 0` or `x = 1` that differs from the
/// neighbouring region is taken as an isolated point, not a region.
pub fn scan_regions(f: impl Fn(&[f64]) -> Result<f64>, dims: usize, resolution: usize) -> Result<RegionReport> {
    if resolution < 2 {
        return Err(Error::invalid("scan", "resolution must be at least 2"));
    }
    match dims {
        1 => scan_1d(&|x| f(&[x]), resolution),
        2 => scan_2d(&f, resolution),
        _ => Err(Error::invalid("scan", format!("scans cover 1 or 2 inputs, not {dims}"))),
    }
}

fn scan_1d(f: &impl Fn(f64) -> Result<f64>, res: usize) -> Result<RegionReport> {
    let h = 1.0 / res as f64;
    let xs: Vec<f64> = (0..=res).map(|j| j as f64 * h).collect();
    let mut fits = Vec::with_capacity(res);
    for j in 0..res {
        // Fit from just inside the cell, so a value isolated on a grid node
        // lands between two clean cells.
        let (a, b) = (xs[j] + NODE_OFFSET, xs[j + 1] - NODE_OFFSET);
        let line = line_through(a, f(a)?, b, f(b)?);
        let mut clean = true;
        for t in [0.25, 0.5, 0.75] {
            let x = xs[j] + t * h;
            if (f(x)? - eval_poly(&line, &[x])).abs() > VALUE_TOLERANCE {
                clean = false;
                break;
            }
        }
        fits.push(clean.then_some(line));
    }
    let matches = |c: &[f64], x: f64| -> Result<bool> { Ok((f(x)? - eval_poly(c, &[x])).abs() <= VALUE_TOLERANCE) };
    // Fit through two points of (a, b] and check a third.
    let fit_between = |a: f64, b: f64| -> Result<Option<Vec<f64>>> {
        let (p, q) = (a + (b - a) * 0.5, b);
        let line = line_through(p, f(p)?, q, f(q)?);
        Ok(matches(&line, a + (b - a) * 0.75)?.then_some(line))
    };

    let mut spans: Vec<(f64, f64, Vec<f64>, Vec<usize>)> = Vec::new();
    let mut boundaries = Vec::new();
    let mut boundary_cells = Vec::new();
    let mut current: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    let coarse = |j: usize| Error::TooCoarse(format!("cell [{}, {}] holds more than one boundary", j as f64 * h, (j + 1) as f64 * h));
    for j in 0..res {
        if let Some(p) = &fits[j] {
            match &mut current {
                None => current = Some((xs[j], p.clone(), vec![j])),
                Some((_, q, cells)) if same(q, p) => cells.push(j),
                Some(_) => {
                    let (lo, q, cells) = current.take().expect("checked");
                    spans.push((lo, xs[j], q, cells));
                    boundaries.push(vec![xs[j]]);
                    current = Some((xs[j], p.clone(), vec![j]));
                }
            }
            continue;
        }
        boundary_cells.push(vec![j]);
        let right = if j + 1 < res {
            Some(fits[j + 1].clone().ok_or_else(|| coarse(j))?)
        } else {
            None
        };
        let (b, left, right) = match (&current, right) {
            (Some((_, left, _)), right) => {
                let left = left.clone();
                let (lo, hi) = if matches(&left, xs[j] + NODE_OFFSET)? {
                    bisect(xs[j], xs[j + 1], |x| matches(&left, x))?
                } else {
                    (xs[j], xs[j])
                };
                let right = match right {
                    Some(r) => r,
                    // A jump at x = 1 itself is an isolated endpoint value, not a region.
                    None if hi >= 1.0 - BOUNDARY_TOLERANCE => {
                        if let Some((_, _, cells)) = &mut current {
                            cells.push(j);
                        }
                        continue;
                    }
                    None => fit_between(hi, xs[j + 1])?.ok_or_else(|| coarse(j))?,
                };
                for k in 1..=4 {
                    let x = hi + (xs[j + 1] - hi) * k as f64 / 5.0;
                    if !matches(&right, x)? {
                        return Err(coarse(j));
                    }
                }
                (0.5 * (lo + hi), left, right)
            }
            (None, Some(right)) => {
                let (lo, hi) = bisect(xs[j], xs[j + 1], |x| Ok(!matches(&right, x)?))?;
                if j == 0 && lo <= BOUNDARY_TOLERANCE {
                    // Same for a jump at x = 0.
                    current = Some((0.0, right, vec![j]));
                    continue;
                }
                let left = fit_between_rev(f, xs[j], lo)?.ok_or_else(|| coarse(j))?;
                (0.5 * (lo + hi), left, right)
            }
            (None, None) => return Err(coarse(j)),
        };
        if same(&left, &right) {
            if current.is_none() {
                current = Some((xs[j], left, vec![]));
            }
            continue;
        }
        let (lo, _, cells) = current.take().unwrap_or((xs[j], left.clone(), vec![]));
        spans.push((lo, b, left, cells));
        boundaries.push(vec![b]);
        current = Some((b, right, vec![]));
    }
    if let Some((lo, q, cells)) = current {
        spans.push((lo, 1.0, q, cells));
    }

    let mut regions = Vec::with_capacity(spans.len());
    for (label, (lo, hi, coeffs, cells)) in spans.into_iter().enumerate() {
        let margin = (10.0 * BOUNDARY_TOLERANCE).min((hi - lo) / 4.0);
        let (a, b) = (lo + margin, hi - margin);
        let pts: Vec<f64> = (0..=10).map(|k| a + (b - a) * k as f64 / 10.0).collect();
        let vals = pts.iter().map(|x| f(*x)).collect::<Result<Vec<_>>>()?;
        let residual = pts
            .iter()
            .zip(&vals)
            .map(|(x, v)| (v - eval_poly(&coeffs, &[*x])).abs())
            .fold(0.0, f64::max);
        let second_difference = vals
            .windows(3)
            .map(|w| (w[0] - 2.0 * w[1] + w[2]).abs())
            .fold(0.0, f64::max);
        regions.push(Region {
            label,
            poly: MultilinearPoly { inputs: 1, coeffs },
            interval: Some([lo, hi]),
            cells: cells.into_iter().map(|c| vec![c]).collect(),
            residual,
            second_difference,
        });
    }
    Ok(RegionReport {
        dims: 1,
        resolution: res,
        regions,
        boundaries,
        boundary_cells,
    })
}

/// Line through two points of `[a, b)` checked at a third; used left of a boundary.
fn fit_between_rev(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<Option<Vec<f64>>> {
    let (p, q) = (a, a + (b - a) * 0.5);
    let line = line_through(p, f(p)?, q, f(q)?);
    let x = a + (b - a) * 0.25;
    Ok(((f(x)? - eval_poly(&line, &[x])).abs() <= VALUE_TOLERANCE).then_some(line))
}

fn scan_2d(f: &impl Fn(&[f64]) -> Result<f64>, res: usize) -> Result<RegionReport> {
    let h = 1.0 / res as f64;
    let at = |i: usize| i as f64 * h;
    let mut fv = vec![vec![0.0; res + 1]; res + 1];
    for (i, col) in fv.iter_mut().enumerate() {
        for (j, v) in col.iter_mut().enumerate() {
            *v = f(&[at(i), at(j)])?;
        }
    }
    let interior = [(0.25, 0.25), (0.75, 0.25), (0.5, 0.5), (0.25, 0.75), (0.75, 0.75)];
    // Cell (i, j) spans [x_i, x_{i+1}] × [y_j, y_{j+1}].
    let mut labels: Vec<Vec<Option<usize>>> = vec![vec![None; res]; res];
    let mut polys: Vec<Vec<f64>> = Vec::new();
    let mut boundary_cells = Vec::new();
    for i in 0..res {
        for j in 0..res {
            let (x0, y0) = (at(i), at(j));
            let (f00, f10, f01, f11) = (fv[i][j], fv[i + 1][j], fv[i][j + 1], fv[i + 1][j + 1]);
            let d = (f11 - f10 - f01 + f00) / (h * h);
            let b = (f10 - f00) / h - d * y0;
            let c = (f01 - f00) / h - d * x0;
            let a = f00 - b * x0 - c * y0 - d * x0 * y0;
            let coeffs = vec![a, b, c, d];
            let mut clean = true;
            for (u, v) in interior {
                let p = [x0 + u * h, y0 + v * h];
                if (f(&p)? - eval_poly(&coeffs, &p)).abs() > VALUE_TOLERANCE {
                    clean = false;
                    break;
                }
            }
            if !clean {
                boundary_cells.push(vec![i, j]);
                continue;
            }
            let label = match polys.iter().position(|p| same(p, &coeffs)) {
                Some(l) => l,
                None => {
                    polys.push(coeffs);
                    polys.len() - 1
                }
            };
            labels[i][j] = Some(label);
        }
    }

    let mut boundaries = Vec::new();
    // Walk every row and column of cells through their centers.
    for axis in 0..2 {
        for line in 0..res {
            let cell = |k: usize| if axis == 0 { labels[k][line] } else { labels[line][k] };
            let point = |t: f64| {
                let other = at(line) + 0.5 * h;
                if axis == 0 {
                    [t, other]
                } else {
                    [other, t]
                }
            };
            let matches = |l: usize, t: f64| -> Result<bool> {
                let p = point(t);
                Ok((f(&p)? - eval_poly(&polys[l], &p)).abs() <= VALUE_TOLERANCE)
            };
            let mut prev: Option<(usize, usize)> = None;
            for k in 0..res {
                let Some(l) = cell(k) else { continue };
                if let Some((k0, l0)) = prev {
                    if l0 != l {
                        let (from, to) = (at(k0) + 0.5 * h, at(k) + 0.5 * h);
                        let (lo, hi) = bisect(from, to, |t| matches(l0, t))?;
                        for s in 1..=4 {
                            let t = hi + (to - hi) * s as f64 / 4.0;
                            if !matches(l, t)? {
                                return Err(Error::TooCoarse(format!(
                                    "more than one boundary between cell centers {:?} and {:?}",
                                    point(from),
                                    point(to)
                                )));
                            }
                        }
                        boundaries.push(point(0.5 * (lo + hi)).to_vec());
                    }
                }
                prev = Some((k, l));
            }
        }
    }

    let mut regions = Vec::with_capacity(polys.len());
    for (label, coeffs) in polys.into_iter().enumerate() {
        let mut cells = Vec::new();
        let mut residual: f64 = 0.0;
        let mut second: f64 = 0.0;
        for i in 0..res {
            for j in 0..res {
                if labels[i][j] != Some(label) {
                    continue;
                }
                cells.push(vec![i, j]);
                let (x0, y0) = (at(i), at(j));
                let g = |u: f64, v: f64| f(&[x0 + u * h, y0 + v * h]);
                for (u, v) in interior {
                    let p = [x0 + u * h, y0 + v * h];
                    residual = residual.max((f(&p)? - eval_poly(&coeffs, &p)).abs());
                }
                let row = (g(0.25, 0.5)? - 2.0 * g(0.5, 0.5)? + g(0.75, 0.5)?).abs();
                let col = (g(0.5, 0.25)? - 2.0 * g(0.5, 0.5)? + g(0.5, 0.75)?).abs();
                second = second.max(row).max(col);
            }
        }
        regions.push(Region {
            label,
            poly: MultilinearPoly { inputs: 2, coeffs },
            interval: None,
            cells,
            residual,
            second_difference: second,
        });
    }
    Ok(RegionReport {
        dims: 2,
        resolution: res,
        regions,
        boundaries,
        boundary_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_one_region() {
        let r = scan_regions(|x| Ok(0.2 + 0.5 * x[0]), 1, 16).unwrap();
        assert_eq!(r.granularity(), 1);
        assert!(r.boundaries.is_empty());
        assert!(r.max_residual() < 1e-12);
    }

    #[test]
    fn jump_inside_a_cell() {
        let f = |x: &[f64]| Ok(if x[0] >= 0.3141 { 0.9 - 0.2 * x[0] } else { 0.1 + 0.3 * x[0] });
        let r = scan_regions(f, 1, 16).unwrap();
        assert_eq!(r.granularity(), 2);
        assert!((r.boundaries[0][0] - 0.3141).abs() < 1e-6);
        assert!(r.max_second_difference() < 1e-12);
    }

    #[test]
    fn kink_on_a_grid_node() {
        let f = |x: &[f64]| Ok((x[0] - 0.5).abs());
        let r = scan_regions(f, 1, 8).unwrap();
        assert_eq!(r.granularity(), 2);
        assert_eq!(r.boundaries, vec![vec![0.5]]);
    }

    #[test]
    fn jump_in_the_first_and_last_cells() {
        let f = |x: &[f64]| Ok(if x[0] < 0.01 { 0.5 } else if x[0] < 0.99 { x[0] } else { 0.0 });
        let r = scan_regions(f, 1, 10).unwrap();
        assert_eq!(r.granularity(), 3);
        assert!((r.boundaries[0][0] - 0.01).abs() < 1e-6);
        assert!((r.boundaries[1][0] - 0.99).abs() < 1e-6);
    }

    #[test]
    fn two_boundaries_in_one_cell_are_too_coarse() {
        let f = |x: &[f64]| Ok(if x[0] > 0.52 && x[0] < 0.6 { 1.0 } else { 0.0 });
        assert!(matches!(scan_regions(f, 1, 8), Err(Error::TooCoarse(_))));
    }

    #[test]
    fn two_dimensional_step() {
        let f = |x: &[f64]| Ok(if x[0] + x[1] >= 0.9 { 0.1 * x[0] * x[1] } else { 0.5 });
        let r = scan_regions(f, 2, 16).unwrap();
        assert_eq!(r.granularity(), 2);
        assert!(r.max_residual() < 1e-12);
        for b in &r.boundaries {
            assert!((b[0] + b[1] - 0.9).abs() < 1e-5, "{b:?}");
        }
        assert!(!r.boundary_cells.is_empty());
    }
}
