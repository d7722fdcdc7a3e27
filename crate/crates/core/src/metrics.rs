//! Error and quality measures: manifold distance, convergence tables, and
//! per-step area and energy series.

use rayon::prelude::*;

use crate::curve::{CurveState, Vec2};
use crate::error::{Error, Result};
use crate::stepper::StepDiagnostics;

/// Rows of the rasterized fallback.
pub const RASTER_ROWS: usize = 4096;
/// Scanlines per raster row.
pub const RASTER_SUBLINES: usize = 8;

#[inline]
fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| cross(poly[i], poly[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

fn orientation(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(b - a, c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Whether a closed polygon has two non-adjacent edges that touch. Edges are
/// swept in order of their left end so only overlapping x-ranges are tested.
pub fn is_self_intersecting(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return true;
    }
    let mut edges: Vec<(f64, f64, usize)> = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            (a.x.min(b.x), a.x.max(b.x), i)
        })
        .collect();
    edges.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.2.cmp(&q.2)));
    let mut active: Vec<(f64, usize)> = Vec::new();
    for &(lo, hi, i) in &edges {
        active.retain(|&(end, _)| end >= lo);
        for &(_, j) in &active {
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                // neighbours may only share their common vertex
                let (s, t) = if (i + 1) % n == j { (i, j) } else { (j, i) };
                let (a, b, c) = (poly[s], poly[t], poly[(t + 1) % n]);
                if n > 3 && orientation(a, b, c) == 0.0 && (c - b).dot(&(a - b)) > 0.0 {
                    return true;
                }
                continue;
            }
            if segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return true;
            }
        }
        active.push((hi, i));
    }
    false
}

/// Winding number of `poly` around `p`.
fn winding(poly: &[Vec2], p: Vec2) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a.y <= p.y {
            if b.y > p.y && orientation(a, b, p) > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && orientation(a, b, p) < 0.0 {
            w -= 1;
        }
    }
    w
}

enum EdgeRelation {
    Inside,
    Outside,
    SameDirection,
    OppositeDirection,
}

/// Signed contribution `1/2 sum cross(p, q)` of the part of `poly`'s boundary
/// lying inside `other`. `owner` decides who keeps shared, equally directed
/// boundary pieces.
fn clipped_boundary_integral(poly: &[Vec2], other: &[Vec2], owner: bool, eps: f64) -> f64 {
    let n = poly.len();
    let m = other.len();
    let mut total = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let r = q - p;
        let rr = r.norm_squared();
        let rlen = rr.sqrt();
        let mut cuts = vec![0.0, 1.0];
        for j in 0..m {
            let (c, d) = (other[j], other[(j + 1) % m]);
            let s = d - c;
            let denom = cross(r, s);
            let qp = c - p;
            if denom.abs() > eps * rlen * s.norm() {
                let t = cross(qp, s) / denom;
                let u = cross(qp, r) / denom;
                if (-1e-12..=1.0 + 1e-12).contains(&u) && t > 0.0 && t < 1.0 {
                    cuts.push(t);
                }
            } else if (cross(qp, r) / rlen).abs() <= eps {
                for end in [c, d] {
                    let t = (end - p).dot(&r) / rr;
                    if t > 0.0 && t < 1.0 {
                        cuts.push(t);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() * rlen <= eps);
        for w in cuts.windows(2) {
            let a = p + r * w[0];
            let b = p + r * w[1];
            if (b - a).norm() <= eps {
                continue;
            }
            let mid = (a + b) * 0.5;
            let relation = classify(mid, r, other, eps);
            let keep = match relation {
                EdgeRelation::Inside => true,
                EdgeRelation::SameDirection => owner,
                EdgeRelation::Outside | EdgeRelation::OppositeDirection => false,
            };
            if keep {
                total += 0.5 * cross(a, b);
            }
        }
    }
    total
}

fn classify(mid: Vec2, dir: Vec2, other: &[Vec2], eps: f64) -> EdgeRelation {
    let m = other.len();
    for j in 0..m {
        let (c, d) = (other[j], other[(j + 1) % m]);
        let s = d - c;
        let len = s.norm();
        let t = (mid - c).dot(&s) / (len * len);
        if !(-1e-12..=1.0 + 1e-12).contains(&t) {
            continue;
        }
        if (cross(s, mid - c) / len).abs() <= eps {
            return if dir.dot(&s) > 0.0 {
                EdgeRelation::SameDirection
            } else {
                EdgeRelation::OppositeDirection
            };
        }
    }
    if winding(other, mid) != 0 {
        EdgeRelation::Inside
    } else {
        EdgeRelation::Outside
    }
}

/// Area of the intersection of two simple counterclockwise polygons.
pub fn intersection_area(p: &[Vec2], q: &[Vec2]) -> f64 {
    let scale = bounding_extent(p, q);
    let eps = 1e-12 * scale;
    clipped_boundary_integral(p, q, true, eps) + clipped_boundary_integral(q, p, false, eps)
}

fn bounding_extent(p: &[Vec2], q: &[Vec2]) -> f64 {
    let (lo, hi) = bounds(p.iter().chain(q));
    (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE)
}

fn bounds<'a>(points: impl Iterator<Item = &'a Vec2>) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Even-odd crossings of a horizontal line with a polygon, sorted.
fn crossings(poly: &[Vec2], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y <= y) != (b.y <= y) {
            out.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
    }
    out.sort_by(f64::total_cmp);
}

/// Length of the symmetric difference of two unions of intervals given as
/// sorted even-length breakpoint lists.
fn xor_length(a: &[f64], b: &[f64]) -> f64 {
    let mut events: Vec<f64> = a.iter().chain(b).copied().collect();
    events.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut ia = 0;
    let mut ib = 0;
    for w in events.windows(2) {
        let x = w[0];
        while ia < a.len() && a[ia] <= x {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= x {
            ib += 1;
        }
        if (ia % 2 == 1) != (ib % 2 == 1) {
            total += w[1] - w[0];
        }
    }
    total
}

/// Symmetric-difference area on `rows` horizontal strips over the common
/// bounding square. Each strip is cut at the vertex heights it contains and
/// every piece is sampled on `sublines` scanlines, each measured exactly.
pub fn rasterized_distance(p: &[Vec2], q: &[Vec2], rows: usize, sublines: usize) -> f64 {
    let (lo, hi) = bounds(p.iter().chain(q));
    let side = (hi.x - lo.x).max(hi.y - lo.y);
    let dy = side / rows as f64;
    let mut heights: Vec<f64> = p.iter().chain(q).map(|v| v.y).collect();
    heights.sort_by(f64::total_cmp);
    heights.dedup();
    let mut xa = Vec::new();
    let mut xb = Vec::new();
    let mut cuts = Vec::new();
    let mut next_height = 0;
    let mut total = 0.0;
    for k in 0..rows {
        let y0 = lo.y + k as f64 * dy;
        let y1 = if k + 1 == rows { lo.y + side } else { y0 + dy };
        cuts.clear();
        cuts.push(y0);
        while next_height < heights.len() && heights[next_height] < y1 {
            if heights[next_height] > y0 {
                cuts.push(heights[next_height]);
            }
            next_height += 1;
        }
        cuts.push(y1);
        for w in cuts.windows(2) {
            let h = (w[1] - w[0]) / sublines as f64;
            for s in 0..sublines {
                let y = w[0] + (s as f64 + 0.5) * h;
                crossings(p, y, &mut xa);
                crossings(q, y, &mut xb);
                total += xor_length(&xa, &xb) * h;
            }
        }
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceReport {
    pub distance: f64,
    /// True when exact clipping was inconsistent and the raster result is used.
    pub rasterized: bool,
}

/// `|O1| + |O2| - 2 |O1 n O2|`, with the regions enclosed by the curves (open
/// curves closed along the substrate).
pub fn manifold_distance_report(a: &CurveState, b: &CurveState) -> Result<DistanceReport> {
    let p = a.region_polygon();
    let q = b.region_polygon();
    for (which, poly) in [(1, &p), (2, &q)] {
        if is_self_intersecting(poly) {
            return Err(Error::SelfIntersecting { which });
        }
    }
    let area_p = signed_area(&p);
    let area_q = signed_area(&q);
    let inter = intersection_area(&p, &q);
    let tol = 1e-9 * bounding_extent(&p, &q).powi(2);
    if inter >= -tol && inter <= area_p.min(area_q) + tol {
        let distance = (area_p + area_q - 2.0 * inter).max(0.0);
        return Ok(DistanceReport {
            distance,
            rasterized: false,
        });
    }
    Ok(DistanceReport {
        distance: rasterized_distance(&p, &q, RASTER_ROWS, RASTER_SUBLINES),
        rasterized: true,
    })
}

pub fn manifold_distance(a: &CurveState, b: &CurveState) -> Result<f64> {
    Ok(manifold_distance_report(a, b)?.distance)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub dt: f64,
    pub error: f64,
    /// `log2(e_{2 dt} / e_dt)`; absent on the first row.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub label: String,
    pub t_final: f64,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }
}

/// Checks that `dts` halves at every step.
pub fn check_halving(dts: &[f64]) -> Result<()> {
    if dts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two time steps, got {}",
            dts.len()
        )));
    }
    for w in dts.windows(2) {
        if !(w[1] > 0.0) || ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "time steps must halve: {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Errors between final curves of consecutive step sizes and their orders.
pub fn error_table_from_finals(
    label: &str,
    t_final: f64,
    dts: &[f64],
    finals: &[CurveState],
) -> Result<ErrorTable> {
    let mut rows: Vec<ErrorRow> = Vec::new();
    for i in 0..finals.len() - 1 {
        let error = manifold_distance(&finals[i], &finals[i + 1])?;
        let order = rows.last().map(|prev| (prev.error / error).log2());
        rows.push(ErrorRow {
            dt: dts[i],
            error,
            order,
        });
    }
    Ok(ErrorTable {
        label: label.to_string(),
        t_final,
        rows,
    })
}

/// Runs `runner(dt)` for every step size in parallel and tabulates
/// `e_dt = M(X_dt, X_{dt/2})` with consecutive log2 orders.
pub fn convergence_table<F>(label: &str, t_final: f64, dts: &[f64], runner: F) -> Result<ErrorTable>
where
    F: Fn(f64) -> Result<CurveState> + Sync,
{
    check_halving(dts)?;
    let finals: Vec<CurveState> = dts
        .par_iter()
        .map(|&dt| runner(dt))
        .collect::<Result<_>>()?;
    error_table_from_finals(label, t_final, dts, &finals)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AreaLoss {
    /// `(A^m - A^0) / A^0`.
    pub relative: Vec<f64>,
    /// `|A^m - A^0|`.
    pub absolute: Vec<f64>,
}

pub fn area_loss_series(records: &[StepDiagnostics]) -> Result<AreaLoss> {
    let a0 = records
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?
        .area;
    if a0 == 0.0 {
        return Err(Error::ZeroInitialArea);
    }
    Ok(AreaLoss {
        relative: records.iter().map(|d| (d.area - a0) / a0).collect(),
        absolute: records.iter().map(|d| (d.area - a0).abs()).collect(),
    })
}

pub fn energy_gap_series(records: &[StepDiagnostics]) -> Vec<f64> {
    records.iter().map(|d| (d.aux - d.energy).abs()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{initial_shape, Shape, Topology};
    use std::f64::consts::PI;

    fn square(offset: Vec2) -> CurveState {
        CurveState::new(
            vec![
                Vec2::new(0.0, 0.0) + offset,
                Vec2::new(1.0, 0.0) + offset,
                Vec2::new(1.0, 1.0) + offset,
                Vec2::new(0.0, 1.0) + offset,
            ],
            Topology::Closed,
        )
        .unwrap()
    }

    #[test]
    fn identical_curves() {
        let e = initial_shape(&Shape::Ellipse { a: 2.0, b: 1.0 }, 50).unwrap();
        assert!(manifold_distance(&e, &e).unwrap().abs() < 1e-12);
    }

    #[test]
    fn offset_squares() {
        let d = manifold_distance(&square(Vec2::zeros()), &square(Vec2::new(0.5, 0.0))).unwrap();
        assert!((d - 1.0).abs() < 1e-14, "{d}");
        let d = manifold_distance(&square(Vec2::zeros()), &square(Vec2::new(0.5, 0.25))).unwrap();
        assert!((d - 2.0 * (1.0 - 0.375)).abs() < 1e-14, "{d}");
        let d = manifold_distance(&square(Vec2::zeros()), &square(Vec2::new(3.0, 0.0))).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn concentric_circles() {
        let a = initial_shape(&Shape::Ellipse { a: 1.0, b: 1.0 }, 4000).unwrap();
        let b = initial_shape(&Shape::Ellipse { a: 2.0, b: 2.0 }, 4000).unwrap();
        assert!((manifold_distance(&a, &b).unwrap() - 3.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn self_intersection_detected() {
        let bow = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(is_self_intersecting(&bow));
        let bow = CurveState::new(bow, Topology::Closed).unwrap();
        assert!(matches!(
            manifold_distance(&square(Vec2::zeros()), &bow),
            Err(Error::SelfIntersecting { which: 2 })
        ));
        assert!(!is_self_intersecting(square(Vec2::zeros()).nodes()));
    }

    #[test]
    fn raster_agrees_with_clipping() {
        let a = square(Vec2::zeros());
        let b = initial_shape(&Shape::Ellipse { a: 0.7, b: 0.4 }, 37)
            .unwrap()
            .translated(Vec2::new(0.6, 0.5));
        let exact = manifold_distance(&a, &b).unwrap();
        let raster = rasterized_distance(a.nodes(), b.nodes(), 512, 4);
        assert!((exact - raster).abs() < 1e-4, "{exact} vs {raster}");
    }

    #[test]
    fn open_curves_close_along_the_substrate() {
        let a = initial_shape(
            &Shape::SubstrateRectangle {
                width: 2.0,
                height: 1.0,
            },
            12,
        )
        .unwrap();
        let b = initial_shape(
            &Shape::SubstrateRectangle {
                width: 2.0,
                height: 2.0,
            },
            12,
        )
        .unwrap();
        assert!((manifold_distance(&a, &b).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn halving_is_enforced() {
        assert!(check_halving(&[0.1, 0.05, 0.025]).is_ok());
        assert!(check_halving(&[0.1]).is_err());
        assert!(check_halving(&[0.1, 0.04]).is_err());
    }

    #[test]
    fn duplicate_runs_have_zero_error() {
        let e = initial_shape(&Shape::Ellipse { a: 2.0, b: 1.0 }, 30).unwrap();
        let table = convergence_table("dup", 1.0, &[0.1, 0.05, 0.025], |_| Ok(e.clone())).unwrap();
        assert!(table.rows.iter().all(|r| r.error.abs() < 1e-12));
    }

    #[test]
    fn translation_flow_order() {
        // exact flow is a rigid translation; the "numerical" result carries
        // an O(dt^k) offset
        let base = initial_shape(&Shape::Ellipse { a: 1.0, b: 1.0 }, 256).unwrap();
        for k in [1, 2] {
            let runner = |dt: f64| Ok(base.translated(Vec2::new(0.3 + dt.powi(k), 0.0)));
            let dts = [0.1, 0.05, 0.025, 0.0125];
            let table = convergence_table("translate", 1.0, &dts, runner).unwrap();
            for order in table.orders() {
                assert!((order - k as f64).abs() < 0.05, "order {order} for k = {k}");
            }
        }
    }
}
