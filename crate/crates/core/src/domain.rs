//! Bounded domains: membership, boundary projection, normals and (in 2-D) an
//! arclength parametrization of the boundary.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Disc,
    PaperComposite,
    ImplicitLevelSet,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::Interval => "interval",
            DomainKind::Disc => "disc",
            DomainKind::PaperComposite => "paper-composite",
            DomainKind::ImplicitLevelSet => "implicit-levelset",
        };
        f.write_str(s)
    }
}

/// How the boundary of a domain can be traversed.
pub enum BoundaryRep<'a> {
    /// 0-dimensional boundary (1-D domains).
    Points(Vec<f64>),
    /// Closed planar curve with arclength parametrization.
    Curve(&'a BoundaryCurve),
    /// No parametrization available (user level sets, d >= 3).
    Unavailable,
}

pub trait Domain: Send + Sync {
    fn dim(&self) -> usize;
    fn kind(&self) -> DomainKind;
    /// Open-set membership.
    fn contains(&self, x: &[f64]) -> bool;
    /// Negative inside, positive outside, zero on the boundary.
    fn signed_distance(&self, x: &[f64]) -> f64;
    /// Unit outward normal at a boundary point.
    fn outward_normal(&self, x: &[f64]) -> Vec<f64>;
    fn boundary(&self) -> BoundaryRep<'_>;
    /// Axis-aligned box containing the closure.
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>);
    fn is_convex(&self) -> bool;

    /// First crossing of the segment `[inside, outside]` with the boundary.
    ///
    /// Returns the segment fraction and the crossing point. The default
    /// bisects against `contains` until the bracket is below 1e-12 in length.
    fn segment_exit(&self, inside: &[f64], outside: &[f64]) -> (f64, Vec<f64>) {
        bisect_exit(|x| self.contains(x), inside, outside)
    }

    fn project_boundary(&self, inside: &[f64], outside: &[f64]) -> Vec<f64> {
        self.segment_exit(inside, outside).1
    }

    fn on_boundary(&self, x: &[f64], tol: f64) -> bool {
        self.signed_distance(x).abs() <= tol
    }
}

pub(crate) fn bisect_exit(contains: impl Fn(&[f64]) -> bool, inside: &[f64], outside: &[f64]) -> (f64, Vec<f64>) {
    let len = inside.iter().zip(outside).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut buf = inside.to_vec();
    let at = |s: f64, buf: &mut Vec<f64>| {
        for ((o, a), b) in buf.iter_mut().zip(inside).zip(outside) {
            *o = a + s * (b - a);
        }
    };
    while (hi - lo) * len > 1e-12 && hi - lo > f64::EPSILON {
        let mid = 0.5 * (lo + hi);
        at(mid, &mut buf);
        if contains(&buf) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    at(s, &mut buf);
    (s, buf)
}

/// One smooth piece of a closed boundary curve, traversed counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Segment { a: [f64; 2], b: [f64; 2] },
    Arc { center: [f64; 2], radius: f64, theta0: f64, theta1: f64 },
}

impl Piece {
    pub fn length(&self) -> f64 {
        match *self {
            Piece::Segment { a, b } => ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt(),
            Piece::Arc { radius, theta0, theta1, .. } => radius * (theta1 - theta0),
        }
    }

    fn point(&self, t: f64) -> [f64; 2] {
        match *self {
            Piece::Segment { a, b } => {
                let u = t / self.length();
                [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
            }
            Piece::Arc { center, radius, theta0, .. } => {
                let th = theta0 + t / radius;
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
        }
    }

    fn tangent(&self, t: f64) -> [f64; 2] {
        match *self {
            Piece::Segment { a, b } => {
                let l = self.length();
                [(b[0] - a[0]) / l, (b[1] - a[1]) / l]
            }
            Piece::Arc { radius, theta0, .. } => {
                let th = theta0 + t / radius;
                [-th.sin(), th.cos()]
            }
        }
    }

    fn curvature_vector(&self, t: f64) -> [f64; 2] {
        match *self {
            Piece::Segment { .. } => [0.0, 0.0],
            Piece::Arc { radius, theta0, .. } => {
                let th = theta0 + t / radius;
                [-th.cos() / radius, -th.sin() / radius]
            }
        }
    }

    /// Closest local parameter and distance to `p`.
    fn locate(&self, p: [f64; 2]) -> (f64, f64) {
        match *self {
            Piece::Segment { a, b } => {
                let l = self.length();
                let d = [(b[0] - a[0]) / l, (b[1] - a[1]) / l];
                let t = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]).clamp(0.0, l);
                let q = self.point(t);
                (t, ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
            }
            Piece::Arc { center, radius, theta0, theta1 } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let mut th = dy.atan2(dx);
                while th < theta0 {
                    th += 2.0 * PI;
                }
                while th > theta0 + 2.0 * PI {
                    th -= 2.0 * PI;
                }
                if th <= theta1 {
                    let r = (dx * dx + dy * dy).sqrt();
                    ((th - theta0) * radius, (r - radius).abs())
                } else {
                    let l = self.length();
                    let d_end = dist(p, self.point(l));
                    let d_start = dist(p, self.point(0.0));
                    if d_end < d_start {
                        (l, d_end)
                    } else {
                        (0.0, d_start)
                    }
                }
            }
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Closed, counterclockwise, piecewise-smooth planar curve parametrized by
/// arclength `s` in `[0, length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pieces: Vec<Piece>,
    starts: Vec<f64>,
    length: f64,
}

impl BoundaryCurve {
    pub fn new(pieces: Vec<Piece>) -> Self {
        let mut starts = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for p in &pieces {
            starts.push(acc);
            acc += p.length();
        }
        Self { pieces, starts, length: acc }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Arclength positions where pieces join.
    pub fn knots(&self) -> &[f64] {
        &self.starts
    }

    pub fn wrap(&self, s: f64) -> f64 {
        s.rem_euclid(self.length)
    }

    fn piece_at(&self, s: f64) -> (usize, f64) {
        let s = self.wrap(s);
        let k = match self.starts.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        (k, s - self.starts[k])
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        let (k, t) = self.piece_at(s);
        self.pieces[k].point(t)
    }

    pub fn tangent(&self, s: f64) -> [f64; 2] {
        let (k, t) = self.piece_at(s);
        self.pieces[k].tangent(t)
    }

    /// Outward unit normal (tangent rotated clockwise).
    pub fn normal(&self, s: f64) -> [f64; 2] {
        let t = self.tangent(s);
        [t[1], -t[0]]
    }

    /// Second arclength derivative of the curve.
    pub fn curvature_vector(&self, s: f64) -> [f64; 2] {
        let (k, t) = self.piece_at(s);
        self.pieces[k].curvature_vector(t)
    }

    /// Arclength of the curve point nearest to `p`, and the distance to it.
    pub fn locate(&self, p: [f64; 2]) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for (piece, start) in self.pieces.iter().zip(&self.starts) {
            let (t, d) = piece.locate(p);
            if d < best.1 {
                best = (self.wrap(start + t), d);
            }
        }
        best
    }

    /// Signed arclength difference `b - a` along the shorter way around.
    pub fn arc_delta(&self, a: f64, b: f64) -> f64 {
        let d = (b - a).rem_euclid(self.length);
        if d > 0.5 * self.length {
            d - self.length
        } else {
            d
        }
    }
}

/// Open interval `(z1, z2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub z1: f64,
    pub z2: f64,
}

impl Domain for Interval {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> DomainKind {
        DomainKind::Interval
    }
    fn contains(&self, x: &[f64]) -> bool {
        x[0] > self.z1 && x[0] < self.z2
    }
    fn signed_distance(&self, x: &[f64]) -> f64 {
        (self.z1 - x[0]).max(x[0] - self.z2)
    }
    fn outward_normal(&self, x: &[f64]) -> Vec<f64> {
        if (x[0] - self.z1).abs() <= (x[0] - self.z2).abs() {
            vec![-1.0]
        } else {
            vec![1.0]
        }
    }
    fn boundary(&self) -> BoundaryRep<'_> {
        BoundaryRep::Points(vec![self.z1, self.z2])
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![self.z1], vec![self.z2])
    }
    fn is_convex(&self) -> bool {
        true
    }
    fn segment_exit(&self, inside: &[f64], outside: &[f64]) -> (f64, Vec<f64>) {
        let z = if outside[0] <= self.z1 { self.z1 } else { self.z2 };
        let s = ((z - inside[0]) / (outside[0] - inside[0])).clamp(0.0, 1.0);
        (s, vec![z])
    }
}

/// Open disc.
#[derive(Debug, Clone, PartialEq)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
    curve: BoundaryCurve,
}

impl Disc {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        let curve = BoundaryCurve::new(vec![Piece::Arc { center, radius, theta0: 0.0, theta1: 2.0 * PI }]);
        Self { center, radius, curve }
    }
}

impl Domain for Disc {
    fn dim(&self) -> usize {
        2
    }
    fn kind(&self) -> DomainKind {
        DomainKind::Disc
    }
    fn contains(&self, x: &[f64]) -> bool {
        (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2) < self.radius * self.radius
    }
    fn signed_distance(&self, x: &[f64]) -> f64 {
        ((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)).sqrt() - self.radius
    }
    fn outward_normal(&self, x: &[f64]) -> Vec<f64> {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let r = (dx * dx + dy * dy).sqrt();
        vec![dx / r, dy / r]
    }
    fn boundary(&self) -> BoundaryRep<'_> {
        BoundaryRep::Curve(&self.curve)
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let [cx, cy] = self.center;
        let r = self.radius;
        (vec![cx - r, cy - r], vec![cx + r, cy + r])
    }
    fn is_convex(&self) -> bool {
        true
    }
    fn segment_exit(&self, inside: &[f64], outside: &[f64]) -> (f64, Vec<f64>) {
        let p = [inside[0] - self.center[0], inside[1] - self.center[1]];
        let d = [outside[0] - inside[0], outside[1] - inside[1]];
        let a = d[0] * d[0] + d[1] * d[1];
        let b = 2.0 * (p[0] * d[0] + p[1] * d[1]);
        let c = p[0] * p[0] + p[1] * p[1] - self.radius * self.radius;
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let s = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
        let q = [p[0] + s * d[0], p[1] + s * d[1]];
        let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
        let k = self.radius / r;
        (s, vec![self.center[0] + k * q[0], self.center[1] + k * q[1]])
    }
}

/// `(-1,1)^2` united with the two unit discs centred at `(0, 1)` and
/// `(0, -1)`: a stadium whose boundary is two vertical segments and two
/// half-circles.
///
/// Arclength origin is the corner `(1, -1)`; the curve runs up the right
/// segment, over the upper cap, down the left segment and under the lower cap.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperComposite {
    curve: BoundaryCurve,
}

impl PaperComposite {
    pub fn new() -> Self {
        let curve = BoundaryCurve::new(vec![
            Piece::Segment { a: [1.0, -1.0], b: [1.0, 1.0] },
            Piece::Arc { center: [0.0, 1.0], radius: 1.0, theta0: 0.0, theta1: PI },
            Piece::Segment { a: [-1.0, 1.0], b: [-1.0, -1.0] },
            Piece::Arc { center: [0.0, -1.0], radius: 1.0, theta0: PI, theta1: 2.0 * PI },
        ]);
        Self { curve }
    }

    /// Arclength interval covering the right segment `x = 1`.
    pub fn right_segment(&self) -> (f64, f64) {
        (0.0, 2.0)
    }

    /// Arclength interval covering the left segment `x = -1`.
    pub fn left_segment(&self) -> (f64, f64) {
        (2.0 + PI, 4.0 + PI)
    }
}

impl Default for PaperComposite {
    fn default() -> Self {
        Self::new()
    }
}

impl Domain for PaperComposite {
    fn dim(&self) -> usize {
        2
    }
    fn kind(&self) -> DomainKind {
        DomainKind::PaperComposite
    }
    fn contains(&self, x: &[f64]) -> bool {
        let (px, py) = (x[0], x[1]);
        (px.abs() < 1.0 && py.abs() < 1.0) || px * px + (py - 1.0).powi(2) < 1.0 || px * px + (py + 1.0).powi(2) < 1.0
    }
    fn signed_distance(&self, x: &[f64]) -> f64 {
        let d = self.curve.locate([x[0], x[1]]).1;
        if self.contains(x) {
            -d
        } else {
            d
        }
    }
    fn outward_normal(&self, x: &[f64]) -> Vec<f64> {
        let s = self.curve.locate([x[0], x[1]]).0;
        self.curve.normal(s).to_vec()
    }
    fn boundary(&self) -> BoundaryRep<'_> {
        BoundaryRep::Curve(&self.curve)
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-1.0, -2.0], vec![1.0, 2.0])
    }
    fn is_convex(&self) -> bool {
        true
    }
}

type LevelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type LevelGrad = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// `{ x : phi(x) < 0 }` for a user-supplied level-set function.
#[derive(Clone)]
pub struct LevelSetDomain {
    dim: usize,
    phi: LevelFn,
    grad_phi: LevelGrad,
    lower: Vec<f64>,
    upper: Vec<f64>,
    convex: bool,
}

impl LevelSetDomain {
    pub fn new(
        dim: usize,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad_phi: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        bounding_box: (Vec<f64>, Vec<f64>),
        convex: bool,
    ) -> Self {
        Self {
            dim,
            phi: Arc::new(phi),
            grad_phi: Arc::new(grad_phi),
            lower: bounding_box.0,
            upper: bounding_box.1,
            convex,
        }
    }
}

impl fmt::Debug for LevelSetDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetDomain").field("dim", &self.dim).finish()
    }
}

impl Domain for LevelSetDomain {
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> DomainKind {
        DomainKind::ImplicitLevelSet
    }
    fn contains(&self, x: &[f64]) -> bool {
        (self.phi)(x) < 0.0
    }
    fn signed_distance(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim];
        (self.grad_phi)(x, &mut g);
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        (self.phi)(x) / n.max(f64::MIN_POSITIVE)
    }
    fn outward_normal(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        (self.grad_phi)(x, &mut g);
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        g.iter().map(|v| v / n).collect()
    }
    fn boundary(&self) -> BoundaryRep<'_> {
        BoundaryRep::Unavailable
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }
    fn is_convex(&self) -> bool {
        self.convex
    }
}
