//! Polygonal curves and their discrete geometry.
//!
//! A curve with `N` segments is stored node by node. Closed curves keep `N`
//! nodes (the closing node is node 0 again) and are oriented counterclockwise;
//! open curves sitting on the substrate `y = 0` keep `N + 1` nodes ordered from
//! the left contact point to the right one.
//!
//! Segment `k` runs from node `k` to node `k + 1` (taken modulo `N` for closed
//! curves). Normals always point out of the enclosed region: `n = -tau^perp`
//! for closed curves and `n = tau^perp` for open curves, where
//! `(a, b)^perp = (-b, a)`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Relative threshold below which a segment counts as degenerate.
pub const DEGENERATE_RELATIVE: f64 = 1e-14;

#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Topology {
    Closed,
    OpenOnSubstrate,
}

impl Topology {
    /// Sign `s` such that the outward normal is `s * tau^perp`.
    pub fn normal_sign(self) -> f64 {
        match self {
            Topology::Closed => -1.0,
            Topology::OpenOnSubstrate => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Topology::Closed => "closed",
            Topology::OpenOnSubstrate => "open",
        }
    }
}

/// One time level of a polygonal curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveState {
    nodes: Vec<Vec2>,
    topology: Topology,
}

impl CurveState {
    /// Builds a curve and checks its invariants.
    pub fn new(nodes: Vec<Vec2>, topology: Topology) -> Result<Self> {
        let curve = CurveState { nodes, topology };
        curve.validate()?;
        Ok(curve)
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<Vec2>, topology: Topology) -> Self {
        CurveState { nodes, topology }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.segment_count();
        if n < 3 {
            return Err(Error::InvalidCurve(format!(
                "a curve needs at least 3 segments, got {n}"
            )));
        }
        if self
            .nodes
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::InvalidCurve("non-finite node coordinate".into()));
        }
        if self.topology == Topology::OpenOnSubstrate {
            let first = self.nodes[0];
            let last = self.nodes[n];
            if first.y != 0.0 || last.y != 0.0 {
                return Err(Error::InvalidCurve(format!(
                    "open curve endpoints must lie on y = 0 (got {} and {})",
                    first.y, last.y
                )));
            }
            if first.x >= last.x {
                return Err(Error::InvalidCurve(format!(
                    "open curve must run left to right (x_0 = {}, x_N = {})",
                    first.x, last.x
                )));
            }
        }
        self.check_segments()
    }

    fn check_segments(&self) -> Result<()> {
        let lengths: Vec<f64> = (0..self.segment_count())
            .map(|k| self.segment_vector(k).norm())
            .collect();
        let total: f64 = lengths.iter().sum();
        let threshold = DEGENERATE_RELATIVE * total;
        match lengths.iter().enumerate().find(|(_, &l)| !(l > threshold)) {
            Some((index, &length)) => Err(Error::DegenerateSegment { index, length }),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Vec2> {
        self.nodes
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_closed(&self) -> bool {
        self.topology == Topology::Closed
    }

    /// Number of segments `N`.
    pub fn segment_count(&self) -> usize {
        match self.topology {
            Topology::Closed => self.nodes.len(),
            Topology::OpenOnSubstrate => self.nodes.len().saturating_sub(1),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node indices `(start, end)` of segment `k`.
    #[inline]
    pub fn segment_nodes(&self, k: usize) -> (usize, usize) {
        let end = if k + 1 == self.nodes.len() { 0 } else { k + 1 };
        (k, end)
    }

    #[inline]
    pub fn segment_vector(&self, k: usize) -> Vec2 {
        let (a, b) = self.segment_nodes(k);
        self.nodes[b] - self.nodes[a]
    }

    pub fn translated(&self, shift: Vec2) -> Self {
        CurveState {
            nodes: self.nodes.iter().map(|p| p + shift).collect(),
            topology: self.topology,
        }
    }

    /// Rotation about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        CurveState {
            nodes: self
                .nodes
                .iter()
                .map(|p| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y))
                .collect(),
            topology: self.topology,
        }
    }

    /// Scaling about the origin; one multiplication per coordinate.
    pub fn scaled(&self, factor: f64) -> Self {
        CurveState {
            nodes: self.nodes.iter().map(|p| p * factor).collect(),
            topology: self.topology,
        }
    }

    /// Left and right contact points for open curves.
    pub fn contact_points(&self) -> Option<(f64, f64)> {
        match self.topology {
            Topology::Closed => None,
            Topology::OpenOnSubstrate => {
                Some((self.nodes[0].x, self.nodes[self.nodes.len() - 1].x))
            }
        }
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.nodes {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Closed polygon enclosing the region: the curve itself, or the open
    /// curve closed along the substrate. Counterclockwise orientation.
    pub fn region_polygon(&self) -> Vec<Vec2> {
        match self.topology {
            Topology::Closed => self.nodes.clone(),
            // left-to-right over the film is clockwise once closed
            Topology::OpenOnSubstrate => self.nodes.iter().rev().copied().collect(),
        }
    }

    /// Centroid of the enclosed region.
    pub fn centroid(&self) -> Vec2 {
        let poly = self.region_polygon();
        let n = poly.len();
        let mut a2 = 0.0;
        let mut c = Vec2::zeros();
        for i in 0..n {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            a2 += cross;
            c += (p + q) * cross;
        }
        c / (3.0 * a2)
    }

    /// Coefficient of variation of node distances from the region centroid.
    pub fn radius_variation(&self) -> f64 {
        let c = self.centroid();
        let radii: Vec<f64> = self.nodes.iter().map(|p| (p - c).norm()).collect();
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        let var = radii.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / radii.len() as f64;
        var.sqrt() / mean
    }

    /// Writes the curve as CSV: a header comment followed by `x,y` lines with
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, time: f64, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# topology={} N={} t={}",
            self.topology.label(),
            self.segment_count(),
            fmt_f64(time)
        )?;
        for p in &self.nodes {
            writeln!(out, "{},{}", fmt_f64(p.x), fmt_f64(p.y))?;
        }
        Ok(())
    }

    /// Reads a curve written by [`CurveState::write_csv`]; returns it with its time.
    pub fn read_csv<R: BufRead>(input: R) -> Result<(CurveState, f64)> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty curve file".into()))??;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse(format!("missing header line: {header}")))?;
        let mut topology = None;
        let mut count = None;
        let mut time = 0.0;
        for token in header.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header token {token}")))?;
            match key {
                "topology" => {
                    topology = Some(match value {
                        "closed" => Topology::Closed,
                        "open" => Topology::OpenOnSubstrate,
                        other => return Err(Error::Parse(format!("unknown topology {other}"))),
                    })
                }
                "N" => {
                    count = Some(
                        value
                            .parse::<usize>()
                            .map_err(|e| Error::Parse(format!("bad N: {e}")))?,
                    )
                }
                "t" => time = parse_f64(value)?,
                _ => {}
            }
        }
        let topology = topology.ok_or_else(|| Error::Parse("header lacks topology".into()))?;
        let mut nodes = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (x, y) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected x,y", lineno + 2)))?;
            nodes.push(Vec2::new(parse_f64(x.trim())?, parse_f64(y.trim())?));
        }
        let curve = CurveState::new(nodes, topology)?;
        if let Some(n) = count {
            if n != curve.segment_count() {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: curve.segment_count(),
                });
            }
        }
        Ok((curve, time))
    }
}

/// Formats with 17 significant digits so the value re-parses bit-identically.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

/// Per-segment geometry of a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentFrame {
    pub topology: Topology,
    pub lengths: Vec<f64>,
    pub tangents: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    /// Inclination `atan2(tau_y, tau_x)` in `(-pi, pi]`.
    pub angles: Vec<f64>,
}

impl SegmentFrame {
    pub fn segment_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn node_count(&self) -> usize {
        match self.topology {
            Topology::Closed => self.lengths.len(),
            Topology::OpenOnSubstrate => self.lengths.len() + 1,
        }
    }

    /// Node indices of segment `k`.
    #[inline]
    pub fn segment_nodes(&self, k: usize) -> (usize, usize) {
        let end = if k + 1 == self.node_count() { 0 } else { k + 1 };
        (k, end)
    }

    pub fn perimeter(&self) -> f64 {
        self.lengths.iter().sum()
    }
}

pub fn segment_frame(curve: &CurveState) -> Result<SegmentFrame> {
    let n = curve.segment_count();
    let sign = curve.topology().normal_sign();
    let mut lengths = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    for k in 0..n {
        let h = curve.segment_vector(k);
        let len = h.norm();
        let tau = h / len;
        let mut theta = tau.y.atan2(tau.x);
        if theta <= -PI {
            theta += 2.0 * PI;
        }
        lengths.push(len);
        tangents.push(tau);
        normals.push(perp(tau) * sign);
        angles.push(theta);
    }
    let total: f64 = lengths.iter().sum();
    if let Some((index, &length)) = lengths
        .iter()
        .enumerate()
        .find(|(_, &l)| !(l > DEGENERATE_RELATIVE * total))
    {
        return Err(Error::DegenerateSegment { index, length });
    }
    Ok(SegmentFrame {
        topology: curve.topology(),
        lengths,
        tangents,
        normals,
        angles,
    })
}

pub fn perimeter(curve: &CurveState) -> f64 {
    (0..curve.segment_count())
        .map(|k| curve.segment_vector(k).norm())
        .sum()
}

/// Signed enclosed area. Positive for counterclockwise closed curves and for
/// open curves lying above the substrate (the return path along `y = 0`
/// contributes nothing).
pub fn enclosed_area(curve: &CurveState) -> f64 {
    let nodes = curve.nodes();
    let mut trapezoids = 0.0;
    for k in 0..curve.segment_count() {
        let (a, b) = curve.segment_nodes(k);
        trapezoids += (nodes[b].x - nodes[a].x) * (nodes[a].y + nodes[b].y);
    }
    // the trapezoid sum is positive for clockwise traversal
    match curve.topology() {
        Topology::Closed => -0.5 * trapezoids,
        Topology::OpenOnSubstrate => 0.5 * trapezoids,
    }
}

/// Largest over smallest segment length.
pub fn mesh_ratio(curve: &CurveState) -> Result<f64> {
    let frame = segment_frame(curve)?;
    Ok(frame_mesh_ratio(&frame))
}

pub(crate) fn frame_mesh_ratio(frame: &SegmentFrame) -> f64 {
    let max = frame.lengths.iter().copied().fold(0.0, f64::max);
    let min = frame.lengths.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// A piecewise-linear nodal field or a piecewise-constant segment field.
#[derive(Clone, Copy, Debug)]
pub enum Field<'a> {
    NodalScalar(&'a [f64]),
    NodalVector(&'a [Vec2]),
    SegmentScalar(&'a [f64]),
    SegmentVector(&'a [Vec2]),
}

#[derive(Clone, Copy)]
enum Value {
    Scalar(f64),
    Vector(Vec2),
}

impl Field<'_> {
    fn len(&self) -> usize {
        match self {
            Field::NodalScalar(v) | Field::SegmentScalar(v) => v.len(),
            Field::NodalVector(v) | Field::SegmentVector(v) => v.len(),
        }
    }

    fn is_nodal(&self) -> bool {
        matches!(self, Field::NodalScalar(_) | Field::NodalVector(_))
    }

    fn is_vector(&self) -> bool {
        matches!(self, Field::NodalVector(_) | Field::SegmentVector(_))
    }

    /// One-sided value on segment `segment` at node `node`.
    fn at(&self, segment: usize, node: usize) -> Value {
        match self {
            Field::NodalScalar(v) => Value::Scalar(v[node]),
            Field::NodalVector(v) => Value::Vector(v[node]),
            Field::SegmentScalar(v) => Value::Scalar(v[segment]),
            Field::SegmentVector(v) => Value::Vector(v[segment]),
        }
    }
}

fn dot(u: Value, v: Value) -> f64 {
    match (u, v) {
        (Value::Scalar(a), Value::Scalar(b)) => a * b,
        (Value::Vector(a), Value::Vector(b)) => a.dot(&b),
        _ => unreachable!("checked by lumped_inner"),
    }
}

/// Mass-lumped inner product `1/2 sum_j |h_j| [(u.v)(rho_j^-) + (u.v)(rho_{j-1}^+)]`.
pub fn lumped_inner(u: Field<'_>, v: Field<'_>, frame: &SegmentFrame) -> Result<f64> {
    for f in [&u, &v] {
        let expected = if f.is_nodal() {
            frame.node_count()
        } else {
            frame.segment_count()
        };
        if f.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: f.len(),
            });
        }
    }
    if u.is_vector() != v.is_vector() {
        return Err(Error::DimensionMismatch {
            expected: if u.is_vector() { 2 } else { 1 },
            found: if v.is_vector() { 2 } else { 1 },
        });
    }
    let mut sum = 0.0;
    for (k, &len) in frame.lengths.iter().enumerate() {
        let (a, b) = frame.segment_nodes(k);
        sum += 0.5 * len * (dot(u.at(k, b), v.at(k, b)) + dot(u.at(k, a), v.at(k, a)));
    }
    Ok(sum)
}

/// `sum_j (u_j - u_{j-1}) (v_j - v_{j-1}) / |h_j|`, the lumped pairing of
/// arclength derivatives of two nodal fields.
pub fn stiffness_pairing(u: &[f64], v: &[f64], frame: &SegmentFrame) -> Result<f64> {
    let nodes = frame.node_count();
    for f in [u, v] {
        if f.len() != nodes {
            return Err(Error::DimensionMismatch {
                expected: nodes,
                found: f.len(),
            });
        }
    }
    let mut sum = 0.0;
    for (k, &len) in frame.lengths.iter().enumerate() {
        if !(len > 0.0) {
            return Err(Error::DegenerateSegment {
                index: k,
                length: len,
            });
        }
        let (a, b) = frame.segment_nodes(k);
        sum += (u[b] - u[a]) * (v[b] - v[a]) / len;
    }
    Ok(sum)
}

/// Initial curve descriptions. All shapes are centred on the origin
/// horizontally; closed shapes are also centred vertically.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// `x^2/a^2 + y^2/b^2 = 1`, nodes at uniform parameter angles.
    Ellipse { a: f64, b: f64 },
    /// Upper half of the ellipse as an open curve on the substrate.
    SemiEllipse { a: f64, b: f64 },
    /// Closed axis-aligned rectangle.
    Rectangle { width: f64, height: f64 },
    /// Three sides of a rectangle standing on the substrate.
    SubstrateRectangle { width: f64, height: f64 },
    Custom {
        nodes: Vec<Vec2>,
        topology: Topology,
    },
}

impl Shape {
    pub fn topology(&self) -> Topology {
        match self {
            Shape::Ellipse { .. } | Shape::Rectangle { .. } => Topology::Closed,
            Shape::SemiEllipse { .. } | Shape::SubstrateRectangle { .. } => {
                Topology::OpenOnSubstrate
            }
            Shape::Custom { topology, .. } => *topology,
        }
    }
}

/// `(cos, sin)` of `2 pi j / n`, exact at quarter turns.
fn unit_circle_point(j: usize, n: usize) -> (f64, f64) {
    let j = j % n;
    if (4 * j).is_multiple_of(n) {
        return match 4 * j / n {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let angle = 2.0 * PI * j as f64 / n as f64;
    (angle.cos(), angle.sin())
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::BadShapeParams(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

/// Splits `n` segments over edges proportionally to their lengths, with at
/// least one segment per edge (largest-remainder rounding).
fn distribute(n: usize, edges: &[f64]) -> Vec<usize> {
    let total: f64 = edges.iter().sum();
    let spare = n - edges.len();
    let ideal: Vec<f64> = edges.iter().map(|e| spare as f64 * e / total).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let mut left = spare - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = ideal[i] - ideal[i].floor();
        let rj = ideal[j] - ideal[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts.iter().map(|c| c + 1).collect()
}

fn walk_polyline(corners: &[Vec2], counts: &[usize], include_last: bool) -> Vec<Vec2> {
    let mut nodes = Vec::new();
    for (e, &count) in counts.iter().enumerate() {
        let p = corners[e];
        let q = corners[e + 1];
        for i in 0..count {
            nodes.push(p + (q - p) * (i as f64 / count as f64));
        }
    }
    if include_last {
        nodes.push(*corners.last().unwrap());
    }
    nodes
}

/// Builds the initial curve with `n` segments.
pub fn initial_shape(shape: &Shape, n: usize) -> Result<CurveState> {
    match shape {
        Shape::Ellipse { a, b } => {
            check_positive("a", *a)?;
            check_positive("b", *b)?;
            if n < 3 {
                return Err(Error::BadShapeParams(format!("need N >= 3, got {n}")));
            }
            let nodes = (0..n)
                .map(|j| {
                    let (c, s) = unit_circle_point(j, n);
                    Vec2::new(a * c, b * s)
                })
                .collect();
            CurveState::new(nodes, Topology::Closed)
        }
        Shape::SemiEllipse { a, b } => {
            check_positive("a", *a)?;
            check_positive("b", *b)?;
            if n < 2 {
                return Err(Error::BadShapeParams(format!("need N >= 2, got {n}")));
            }
            // parameter angle runs from pi down to 0: left to right
            let nodes: Vec<Vec2> = (0..=n)
                .map(|j| {
                    let (c, s) = unit_circle_point(n - j, 2 * n);
                    let y = if j == 0 || j == n { 0.0 } else { b * s };
                    Vec2::new(a * c, y)
                })
                .collect();
            if n < 3 {
                // too coarse for the solver but still a valid sampling
                return Ok(CurveState::from_nodes_unchecked(
                    nodes,
                    Topology::OpenOnSubstrate,
                ));
            }
            CurveState::new(nodes, Topology::OpenOnSubstrate)
        }
        Shape::Rectangle { width, height } => {
            check_positive("width", *width)?;
            check_positive("height", *height)?;
            if n < 4 {
                return Err(Error::BadShapeParams(format!(
                    "a rectangle needs N >= 4, got {n}"
                )));
            }
            let (w, h) = (0.5 * width, 0.5 * height);
            let corners = [
                Vec2::new(-w, -h),
                Vec2::new(w, -h),
                Vec2::new(w, h),
                Vec2::new(-w, h),
                Vec2::new(-w, -h),
            ];
            let counts = distribute(n, &[*width, *height, *width, *height]);
            CurveState::new(walk_polyline(&corners, &counts, false), Topology::Closed)
        }
        Shape::SubstrateRectangle { width, height } => {
            check_positive("width", *width)?;
            check_positive("height", *height)?;
            if n < 3 {
                return Err(Error::BadShapeParams(format!(
                    "an open rectangle needs N >= 3, got {n}"
                )));
            }
            let w = 0.5 * width;
            let corners = [
                Vec2::new(-w, 0.0),
                Vec2::new(-w, *height),
                Vec2::new(w, *height),
                Vec2::new(w, 0.0),
            ];
            let counts = distribute(n, &[*height, *width, *height]);
            CurveState::new(
                walk_polyline(&corners, &counts, true),
                Topology::OpenOnSubstrate,
            )
        }
        Shape::Custom { nodes, topology } => CurveState::new(nodes.clone(), *topology),
    }
}
