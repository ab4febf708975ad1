//! Agmon distance for the degenerate metric `g² |dx|²`, where `g = |∇f|` in
//! the interior and `g = |∇_T f|` on the boundary.
//!
//! Upper bounds come from shortest paths on an [`AgmonMesh`]; lower bounds
//! from the energy inequality `d_a(x, y) >= |f(x) − f(y)|` and from the
//! annulus bound `α · inf g`. In 1-D the distance is computed exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::domain::{BoundaryCurve, BoundaryRep};
use crate::landscape::{basin_label_arclength, check_hypotheses, CriticalInventory, Landscape, LandscapeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgmonError {
    #[error("point {0:?} lies outside the closed domain")]
    PointOutsideDomain(Vec<f64>),
    #[error("mesh is disconnected between the requested points (resolution too coarse?)")]
    Disconnected,
    #[error("invalid resolution {0}")]
    InvalidResolution(f64),
    #[error("annulus {r_inner}..{r_outer} contains no sample of the closed domain")]
    EmptyAnnulus { r_inner: f64, r_outer: f64 },
    #[error("geodesic gap alpha = {0} is not positive")]
    AlphaNonPositive(f64),
    #[error("invalid annulus: {0}")]
    InvalidAnnulus(String),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
}

pub type Result<T> = std::result::Result<T, AgmonError>;

/// Edge weighting of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `∫ g` along each edge.
    Agmon,
    /// Euclidean length (weight ≡ 1).
    Euclidean,
}

/// Graph discretization of the closed domain.
///
/// Interior nodes sit on the lattice `resolution · Z^d` (anchored at the
/// origin, so refinement by halving is nested). In 2-D every lattice node is
/// joined to the lattice nodes at offsets `(i, j)` with `gcd(|i|, |j|) = 1`
/// and `max(|i|, |j|) <= 3`; boundary nodes form a closed chain along the
/// arclength and are joined by ladder edges to lattice nodes within
/// `2 · resolution`.
#[derive(Debug, Clone)]
pub struct AgmonMesh {
    dim: usize,
    resolution: f64,
    metric: Metric,
    coords: Vec<f64>,
    /// Arclength of boundary nodes (2-D) or `Some(endpoint)` in 1-D.
    boundary: Vec<Option<f64>>,
    /// `g` at each node; tangential at boundary nodes.
    g: Vec<f64>,
    /// `|∇f|` at each node.
    g_full: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    /// Boundary node ids sorted by arclength (2-D).
    chain: Vec<usize>,
    lattice_origin: Vec<i64>,
    lattice_shape: Vec<usize>,
    lattice_index: Vec<u32>,
}

const NONE: u32 = u32::MAX;
const BOUNDARY_TOL: f64 = 1e-9;

fn simpson(a: f64, m: f64, b: f64, len: f64) -> f64 {
    len * (a + 4.0 * m + b) / 6.0
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

fn grad_norm(landscape: &Landscape, x: &[f64]) -> f64 {
    landscape.grad(x).iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn tangential_g(landscape: &Landscape, curve: &BoundaryCurve, s: f64) -> f64 {
    let p = curve.point(s);
    let t = curve.tangent(s);
    let g = landscape.grad(&p);
    (g[0] * t[0] + g[1] * t[1]).abs()
}

/// `∫ g` along the boundary arc from `s0` to `s0 + ds` (Simpson, `panels` panels).
fn arc_integral(landscape: &Landscape, curve: &BoundaryCurve, s0: f64, ds: f64, panels: usize) -> f64 {
    let h = ds / panels as f64;
    (0..panels)
        .map(|k| {
            let a = s0 + k as f64 * h;
            simpson(
                tangential_g(landscape, curve, a),
                tangential_g(landscape, curve, a + 0.5 * h),
                tangential_g(landscape, curve, a + h),
                h.abs(),
            )
        })
        .sum()
}

/// `∫ |∇f|` along the straight segment `[a, b]` (Simpson, `panels` panels).
fn segment_integral(landscape: &Landscape, a: &[f64], b: &[f64], panels: usize) -> f64 {
    let len = dist(a, b);
    if len == 0.0 {
        return 0.0;
    }
    let at = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    let h = 1.0 / panels as f64;
    (0..panels)
        .map(|k| {
            let t = k as f64 * h;
            simpson(
                grad_norm(landscape, &at(t)),
                grad_norm(landscape, &at(t + 0.5 * h)),
                grad_norm(landscape, &at(t + h)),
                len * h,
            )
        })
        .sum()
}

struct Builder {
    adj: Vec<Vec<(u32, f64)>>,
}

impl Builder {
    fn add(&mut self, a: usize, b: usize, w: f64) {
        self.adj[a].push((b as u32, w));
        self.adj[b].push((a as u32, w));
    }
}

impl AgmonMesh {
    pub fn build(landscape: &Landscape, resolution: f64) -> Result<Self> {
        Self::build_with(landscape, resolution, Metric::Agmon)
    }

    pub fn build_with(landscape: &Landscape, resolution: f64, metric: Metric) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(AgmonError::InvalidResolution(resolution));
        }
        match landscape.dim() {
            1 => Self::build_1d(landscape, resolution, metric),
            2 => Self::build_2d(landscape, resolution, metric),
            d => Err(AgmonError::UnsupportedDimension(d)),
        }
    }

    fn empty(dim: usize, resolution: f64, metric: Metric) -> Self {
        Self {
            dim,
            resolution,
            metric,
            coords: Vec::new(),
            boundary: Vec::new(),
            g: Vec::new(),
            g_full: Vec::new(),
            offsets: Vec::new(),
            targets: Vec::new(),
            weights: Vec::new(),
            chain: Vec::new(),
            lattice_origin: Vec::new(),
            lattice_shape: Vec::new(),
            lattice_index: Vec::new(),
        }
    }

    fn push_node(&mut self, landscape: &Landscape, x: &[f64], boundary: Option<f64>, g_boundary: Option<f64>) -> usize {
        let id = self.g.len();
        self.coords.extend_from_slice(x);
        let full = grad_norm(landscape, x);
        self.g_full.push(full);
        self.g.push(g_boundary.unwrap_or(full));
        self.boundary.push(boundary);
        id
    }

    fn finish(&mut self, b: Builder) {
        self.offsets = Vec::with_capacity(b.adj.len() + 1);
        self.offsets.push(0);
        for list in &b.adj {
            self.targets.extend(list.iter().map(|e| e.0));
            self.weights.extend(list.iter().map(|e| e.1));
            self.offsets.push(self.targets.len());
        }
    }

    fn edge_weight(&self, landscape: &Landscape, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.node(a), self.node(b));
        let len = dist(pa, pb);
        match self.metric {
            Metric::Euclidean => len,
            Metric::Agmon => {
                let mid: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| 0.5 * (x + y)).collect();
                simpson(self.g_full[a], grad_norm(landscape, &mid), self.g_full[b], len)
            }
        }
    }

    fn build_1d(landscape: &Landscape, res: f64, metric: Metric) -> Result<Self> {
        let BoundaryRep::Points(ends) = landscape.domain().boundary() else {
            return Err(AgmonError::UnsupportedDimension(1));
        };
        let (z1, z2) = (ends[0].min(ends[1]), ends[0].max(ends[1]));
        let mut mesh = Self::empty(1, res, metric);
        mesh.push_node(landscape, &[z1], Some(z1), Some(0.0));
        let (i0, i1) = ((z1 / res).floor() as i64, (z2 / res).ceil() as i64);
        for i in i0..=i1 {
            let x = i as f64 * res;
            if x - z1 > 0.2 * res && z2 - x > 0.2 * res {
                mesh.push_node(landscape, &[x], None, None);
            }
        }
        mesh.push_node(landscape, &[z2], Some(z2), Some(0.0));
        let n = mesh.g.len();
        let mut b = Builder { adj: vec![Vec::new(); n] };
        for k in 0..n - 1 {
            let w = mesh.edge_weight(landscape, k, k + 1);
            b.add(k, k + 1, w);
        }
        mesh.finish(b);
        Ok(mesh)
    }

    fn build_2d(landscape: &Landscape, res: f64, metric: Metric) -> Result<Self> {
        let domain = landscape.domain();
        let BoundaryRep::Curve(curve) = domain.boundary() else {
            return Err(AgmonError::Landscape(LandscapeError::BoundaryUnavailable));
        };
        let (lo, hi) = domain.bounding_box();
        let mut mesh = Self::empty(2, res, metric);
        let origin: Vec<i64> = lo.iter().map(|v| (v / res).floor() as i64 - 1).collect();
        let shape: Vec<usize> =
            hi.iter().zip(&origin).map(|(v, o)| ((v / res).ceil() as i64 + 1 - o + 1) as usize).collect();
        let mut index = vec![NONE; shape[0] * shape[1]];
        for j in 0..shape[1] {
            for i in 0..shape[0] {
                let x = [(origin[0] + i as i64) as f64 * res, (origin[1] + j as i64) as f64 * res];
                if domain.signed_distance(&x) < -0.2 * res {
                    index[j * shape[0] + i] = mesh.push_node(landscape, &x, None, None) as u32;
                }
            }
        }
        let n_lattice = mesh.g.len();
        // boundary chain at arclength multiples of `res` within each piece, plus knots
        for (k, piece) in curve.pieces().iter().enumerate() {
            let start = curve.knots()[k];
            let len = piece.length();
            let mut t = 0.0;
            let mut step = 0usize;
            while t < len - 0.1 * res {
                let s = start + t;
                let p = curve.point(s);
                let gt = match metric {
                    Metric::Agmon => tangential_g(landscape, curve, s),
                    Metric::Euclidean => 1.0,
                };
                let id = mesh.push_node(landscape, &p, Some(s), Some(gt));
                mesh.chain.push(id);
                step += 1;
                t = step as f64 * res;
            }
        }
        mesh.lattice_origin = origin;
        mesh.lattice_shape = shape;
        mesh.lattice_index = index;

        let n = mesh.g.len();
        let mut b = Builder { adj: vec![Vec::new(); n] };
        let convex = domain.is_convex();
        let segment_inside = |p: &[f64], q: &[f64]| -> bool {
            convex
                || (1..8).all(|k| {
                    let t = k as f64 / 8.0;
                    domain.signed_distance(&[p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]) <= 1e-12
                })
        };
        let mut dirs = Vec::new();
        for dj in 0..=3i64 {
            for di in -3..=3i64 {
                if (dj > 0 || di > 0) && gcd(di, dj) == 1 {
                    dirs.push((di, dj));
                }
            }
        }
        for a in 0..n_lattice {
            let (ia, ja) = mesh.lattice_coords(a);
            for &(di, dj) in &dirs {
                if let Some(bn) = mesh.lattice_node(ia + di, ja + dj) {
                    if segment_inside(mesh.node(a), mesh.node(bn)) {
                        let w = mesh.edge_weight(landscape, a, bn);
                        b.add(a, bn, w);
                    }
                }
            }
        }
        // chain edges along the boundary
        let m = mesh.chain.len();
        for k in 0..m {
            let (a, c) = (mesh.chain[k], mesh.chain[(k + 1) % m]);
            let (sa, sc) = (mesh.boundary[a].unwrap(), mesh.boundary[c].unwrap());
            let ds = curve.arc_delta(sa, sc);
            let w = match metric {
                Metric::Agmon => simpson(mesh.g[a], tangential_g(landscape, curve, sa + 0.5 * ds), mesh.g[c], ds.abs()),
                Metric::Euclidean => ds.abs(),
            };
            b.add(a, c, w);
        }
        // ladder edges
        let reach = 2i64;
        for k in 0..m {
            let a = mesh.chain[k];
            let p = mesh.node(a).to_vec();
            let (ic, jc) = ((p[0] / res).round() as i64, (p[1] / res).round() as i64);
            for dj in -reach - 1..=reach + 1 {
                for di in -reach - 1..=reach + 1 {
                    let Some(q) = mesh.lattice_node(ic + di, jc + dj) else { continue };
                    if dist(&p, mesh.node(q)) <= 2.0 * res + 1e-12 && segment_inside(&p, mesh.node(q)) {
                        let w = mesh.edge_weight(landscape, a, q);
                        b.add(a, q, w);
                    }
                }
            }
        }
        mesh.finish(b);
        Ok(mesh)
    }

    fn lattice_coords(&self, id: usize) -> (i64, i64) {
        let p = self.node(id);
        ((p[0] / self.resolution).round() as i64, (p[1] / self.resolution).round() as i64)
    }

    fn lattice_node(&self, i: i64, j: i64) -> Option<usize> {
        let (ri, rj) = (i - self.lattice_origin[0], j - self.lattice_origin[1]);
        if ri < 0 || rj < 0 || ri as usize >= self.lattice_shape[0] || rj as usize >= self.lattice_shape[1] {
            return None;
        }
        let v = self.lattice_index[rj as usize * self.lattice_shape[0] + ri as usize];
        (v != NONE).then_some(v as usize)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn node(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn is_boundary(&self, id: usize) -> bool {
        self.boundary[id].is_some()
    }

    pub fn boundary_arclength(&self, id: usize) -> Option<f64> {
        self.boundary[id]
    }

    pub fn g(&self, id: usize) -> f64 {
        self.g[id]
    }

    pub fn max_g(&self) -> f64 {
        self.g_full.iter().chain(&self.g).copied().fold(0.0, f64::max)
    }

    pub fn edges(&self, id: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[id]..self.offsets[id + 1];
        self.targets[r.clone()].iter().map(|&t| t as usize).zip(self.weights[r].iter().copied())
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_boundary(i))
    }

    /// Nearest node to `x` and the cost of the connecting piece.
    ///
    /// Boundary points snap along the boundary to a chain node (tangential
    /// weight); interior points snap by a straight segment.
    pub fn snap(&self, landscape: &Landscape, x: &[f64]) -> Result<(usize, f64)> {
        let domain = landscape.domain();
        let sd = domain.signed_distance(x);
        if sd > BOUNDARY_TOL || x.len() != self.dim {
            return Err(AgmonError::PointOutsideDomain(x.to_vec()));
        }
        if self.dim == 2 && sd.abs() <= BOUNDARY_TOL {
            if let BoundaryRep::Curve(curve) = domain.boundary() {
                let (s, _) = curve.locate([x[0], x[1]]);
                let (best, ds) = self
                    .chain
                    .iter()
                    .map(|&id| (id, curve.arc_delta(s, self.boundary[id].unwrap())))
                    .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .ok_or(AgmonError::Disconnected)?;
                let cost = match self.metric {
                    Metric::Agmon => arc_integral(landscape, curve, s, ds, 4),
                    Metric::Euclidean => ds.abs(),
                };
                return Ok((best, cost));
            }
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut consider = |id: usize| {
            let d = dist(self.node(id), x);
            if d < best.1 {
                best = (id, d);
            }
        };
        if self.dim == 2 {
            let (ic, jc) = ((x[0] / self.resolution).round() as i64, (x[1] / self.resolution).round() as i64);
            for dj in -2..=2 {
                for di in -2..=2 {
                    if let Some(id) = self.lattice_node(ic + di, jc + dj) {
                        consider(id);
                    }
                }
            }
            for &id in &self.chain {
                consider(id);
            }
        } else {
            for id in 0..self.len() {
                consider(id);
            }
        }
        if best.0 == usize::MAX {
            return Err(AgmonError::Disconnected);
        }
        let cost = match self.metric {
            Metric::Agmon => segment_integral(landscape, x, self.node(best.0), 4),
            Metric::Euclidean => best.1,
        };
        Ok((best.0, cost))
    }

    /// Multi-source Dijkstra. Returns distances and predecessor ids.
    pub fn shortest_paths(&self, sources: &[(usize, f64)]) -> (Vec<f64>, Vec<u32>) {
        let n = self.len();
        let mut d = vec![f64::INFINITY; n];
        let mut prev = vec![NONE; n];
        let mut heap = BinaryHeap::new();
        for &(s, d0) in sources {
            if d0 < d[s] {
                d[s] = d0;
                heap.push(HeapItem(d0, s));
            }
        }
        while let Some(HeapItem(du, u)) = heap.pop() {
            if du > d[u] {
                continue;
            }
            for (v, w) in self.edges(u) {
                let nd = du + w;
                if nd < d[v] {
                    d[v] = nd;
                    prev[v] = u as u32;
                    heap.push(HeapItem(nd, v));
                }
            }
        }
        (d, prev)
    }

    /// Upper bound on `d_a(x, y)` with its witness path.
    pub fn distance(&self, landscape: &Landscape, x: &[f64], y: &[f64]) -> Result<DistanceBound> {
        let (sx, cx) = self.snap(landscape, x)?;
        let (sy, cy) = self.snap(landscape, y)?;
        let (d, prev) = self.shortest_paths(&[(sx, 0.0)]);
        if !d[sy].is_finite() {
            return Err(AgmonError::Disconnected);
        }
        let mut ids = vec![sy];
        while *ids.last().unwrap() != sx {
            ids.push(prev[*ids.last().unwrap()] as usize);
        }
        ids.reverse();
        let mut witness = vec![x.to_vec()];
        witness.extend(ids.iter().map(|&i| self.node(i).to_vec()));
        witness.push(y.to_vec());
        let witness_length = witness.windows(2).map(|w| dist(&w[0], &w[1])).sum();
        Ok(DistanceBound {
            lower: (landscape.f(x) - landscape.f(y)).abs(),
            upper: cx + d[sy] + cy,
            witness,
            witness_nodes: ids,
            witness_length,
            snap_error: cx + cy,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapItem(f64, usize);

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Two-sided bound on `d_a(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBound {
    /// `|f(x) − f(y)|`.
    pub lower: f64,
    /// Length of the witness path (snap pieces included).
    pub upper: f64,
    /// `x`, the mesh nodes visited, `y`.
    pub witness: Vec<Vec<f64>>,
    pub witness_nodes: Vec<usize>,
    /// Euclidean length of the witness.
    pub witness_length: f64,
    /// Agmon length of the two snap pieces (included in `upper`).
    pub snap_error: f64,
}

/// Upper bound on `d_a(x, y)` from a freshly built mesh.
pub fn distance_upper(landscape: &Landscape, x: &[f64], y: &[f64], resolution: f64) -> Result<DistanceBound> {
    if x == y {
        return Ok(DistanceBound {
            lower: 0.0,
            upper: 0.0,
            witness: vec![x.to_vec(), y.to_vec()],
            witness_nodes: Vec::new(),
            witness_length: 0.0,
            snap_error: 0.0,
        });
    }
    AgmonMesh::build(landscape, resolution)?.distance(landscape, x, y)
}

/// Agmon length of a polyline, trapezoid rule per segment.
///
/// A segment whose endpoints and midpoint all lie on the boundary is a
/// boundary segment and uses `|∇_T f|`; all others use `|∇f|`.
pub fn path_length(landscape: &Landscape, path: &[Vec<f64>]) -> Result<f64> {
    let domain = landscape.domain();
    for p in path {
        if p.len() != landscape.dim() || domain.signed_distance(p) > BOUNDARY_TOL {
            return Err(AgmonError::PointOutsideDomain(p.clone()));
        }
    }
    let g_at = |p: &[f64], boundary: bool| -> f64 {
        if boundary {
            let n = domain.outward_normal(p);
            let g = landscape.grad(p);
            let dn: f64 = g.iter().zip(&n).map(|(a, b)| a * b).sum();
            (g.iter().map(|v| v * v).sum::<f64>() - dn * dn).max(0.0).sqrt()
        } else {
            grad_norm(landscape, p)
        }
    };
    let mut total = 0.0;
    for w in path.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let len = dist(a, b);
        if len == 0.0 {
            continue;
        }
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        if domain.signed_distance(&mid) > BOUNDARY_TOL {
            return Err(AgmonError::PointOutsideDomain(mid));
        }
        let on = |p: &[f64]| domain.on_boundary(p, BOUNDARY_TOL);
        let boundary = landscape.dim() > 1 && on(a) && on(b) && on(&mid);
        total += 0.5 * len * (g_at(a, boundary) + g_at(b, boundary));
    }
    Ok(total)
}

/// Exact 1-D distance `∫_x^y |f'|`, summing `|Δf|` between consecutive
/// zeros of `f'`.
pub fn distance_1d_exact(landscape: &Landscape, x: f64, y: f64) -> f64 {
    let (a, b) = (x.min(y), x.max(y));
    if a == b {
        return 0.0;
    }
    let fp = |t: f64| landscape.grad(&[t])[0];
    let n = 4096;
    let h = (b - a) / n as f64;
    let mut points = vec![a];
    for k in 0..n {
        let (l, r) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let (fl, fr) = (fp(l), fp(r));
        if fl == 0.0 && k > 0 {
            points.push(l);
        } else if fl * fr < 0.0 {
            let (mut lo, mut hi) = (l, r);
            for _ in 0..100 {
                let m = 0.5 * (lo + hi);
                if fp(m) * fl > 0.0 {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            points.push(0.5 * (lo + hi));
        }
    }
    points.push(b);
    points.windows(2).map(|w| (landscape.f(&[w[1]]) - landscape.f(&[w[0]])).abs()).sum()
}

/// Result of the annulus lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusBound {
    pub alpha: f64,
    pub inf_g: f64,
    /// Point of the sampled annulus where `g` is smallest.
    pub argmin: Vec<f64>,
    /// `alpha · inf_g`.
    pub bound: f64,
}

/// Options for [`lower_bound_annulus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusOptions {
    pub radial_samples: usize,
    pub angular_samples: usize,
    pub boundary_samples: usize,
    /// Mesh resolution for the geodesic gap on non-convex domains.
    pub resolution: f64,
}

impl Default for AnnulusOptions {
    fn default() -> Self {
        Self { radial_samples: 65, angular_samples: 1440, boundary_samples: 100_000, resolution: 0.02 }
    }
}

/// `α · inf g` over `W' \ W`, with `W = B̄(z, r_inner) ∩ Ω̄` and
/// `W' = B̄(z, r_outer) ∩ Ω̄`; a lower bound on `d_a(z, y)` for every `y`
/// outside `W'`. Points of `b_set`, if given, must lie outside `W'`.
pub fn lower_bound_annulus(
    landscape: &Landscape,
    z: &[f64],
    r_inner: f64,
    r_outer: f64,
    b_set: Option<&[Vec<f64>]>,
    opts: &AnnulusOptions,
) -> Result<AnnulusBound> {
    if !(r_inner >= 0.0 && r_outer > r_inner) {
        return Err(AgmonError::InvalidAnnulus(format!("need 0 <= r_inner < r_outer, got {r_inner}, {r_outer}")));
    }
    if let Some(bs) = b_set {
        if let Some(p) = bs.iter().find(|p| dist(p, z) <= r_outer) {
            return Err(AgmonError::InvalidAnnulus(format!("point {p:?} of B lies in the outer ball")));
        }
    }
    let domain = landscape.domain();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |g: f64, p: Vec<f64>| {
        if best.as_ref().is_none_or(|b| g < b.0) {
            best = Some((g, p));
        }
    };
    let nr = opts.radial_samples.max(2);
    let radius = |k: usize| r_inner + (r_outer - r_inner) * k as f64 / (nr - 1) as f64;
    match domain.boundary() {
        BoundaryRep::Points(ends) => {
            for k in 0..nr {
                for sign in [-1.0, 1.0] {
                    let p = [z[0] + sign * radius(k)];
                    if domain.contains(&p) {
                        consider(grad_norm(landscape, &p), p.to_vec());
                    }
                }
            }
            for e in ends {
                let r = (e - z[0]).abs();
                if r >= r_inner && r <= r_outer {
                    consider(0.0, vec![e]);
                }
            }
        }
        BoundaryRep::Curve(curve) => {
            let na = opts.angular_samples.max(4);
            for k in 0..nr {
                let r = radius(k);
                for j in 0..na {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / na as f64;
                    let p = [z[0] + r * th.cos(), z[1] + r * th.sin()];
                    if domain.contains(&p) {
                        consider(grad_norm(landscape, &p), p.to_vec());
                    }
                }
            }
            // boundary samples plus the exact crossings with both circles
            let nb = opts.boundary_samples.max(16);
            let hs = curve.length() / nb as f64;
            let rel = |s: f64, r: f64| dist(&curve.point(s), z) - r;
            for k in 0..nb {
                let s = k as f64 * hs;
                let r = dist(&curve.point(s), z);
                if r >= r_inner && r <= r_outer {
                    consider(tangential_g(landscape, curve, s), curve.point(s).to_vec());
                }
                for rc in [r_inner, r_outer] {
                    let (a, b) = (rel(s, rc), rel(s + hs, rc));
                    if a == 0.0 || a * b < 0.0 {
                        let (mut lo, mut hi) = (s, s + hs);
                        for _ in 0..80 {
                            let m = 0.5 * (lo + hi);
                            if rel(m, rc) * a > 0.0 {
                                lo = m;
                            } else {
                                hi = m;
                            }
                        }
                        let sc = if a == 0.0 { s } else { 0.5 * (lo + hi) };
                        consider(tangential_g(landscape, curve, sc), curve.point(sc).to_vec());
                    }
                }
            }
        }
        BoundaryRep::Unavailable => return Err(AgmonError::Landscape(LandscapeError::BoundaryUnavailable)),
    }
    let (inf_g, argmin) = best.ok_or(AgmonError::EmptyAnnulus { r_inner, r_outer })?;
    let alpha = if domain.is_convex() {
        r_outer - r_inner
    } else {
        geodesic_gap(landscape, z, r_inner, r_outer, opts.resolution)?
    };
    if !(alpha > 0.0) {
        return Err(AgmonError::AlphaNonPositive(alpha));
    }
    Ok(AnnulusBound { alpha, inf_g, argmin, bound: alpha * inf_g })
}

/// Geodesic Euclidean gap between `W` and the complement of `W'`, from a
/// unit-weight mesh; the mesh value is discounted by its metrication error
/// (≤ 1.4 %) and two snap lengths, and never taken below `r_outer − r_inner`.
fn geodesic_gap(landscape: &Landscape, z: &[f64], r_inner: f64, r_outer: f64, res: f64) -> Result<f64> {
    let mesh = AgmonMesh::build_with(landscape, res, Metric::Euclidean)?;
    let sources: Vec<(usize, f64)> =
        (0..mesh.len()).filter(|&i| dist(mesh.node(i), z) <= r_inner).map(|i| (i, 0.0)).collect();
    let euclid = r_outer - r_inner;
    if sources.is_empty() {
        return Ok(euclid);
    }
    let (d, _) = mesh.shortest_paths(&sources);
    let graph =
        (0..mesh.len()).filter(|&i| dist(mesh.node(i), z) > r_outer).map(|i| d[i]).fold(f64::INFINITY, f64::min);
    if !graph.is_finite() {
        return Ok(euclid);
    }
    Ok(euclid.max(graph / 1.014 - 2.0 * res))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypo1Method {
    Annulus,
    AgmonZ1,
    Dijkstra,
}

impl std::str::FromStr for Hypo1Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "annulus" => Ok(Self::Annulus),
            "agmonz1" => Ok(Self::AgmonZ1),
            "dijkstra" => Ok(Self::Dijkstra),
            other => Err(format!("unknown method `{other}` (annulus, agmonz1, dijkstra)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fail => "fail",
        })
    }
}

/// Nature of the reported `bound` on `inf_{B_{z_i}^c} d_a(·, z_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Lower,
    /// The infimum strictly exceeds `bound`.
    StrictLower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypo1Entry {
    pub i: usize,
    pub threshold: f64,
    pub bound: f64,
    pub kind: BoundKind,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypo1Options {
    pub r_inner: f64,
    pub r_outer: f64,
    pub resolution: f64,
    pub annulus: AnnulusOptions,
}

impl Default for Hypo1Options {
    fn default() -> Self {
        Self { r_inner: 1.0 / 3.0, r_outer: 2.0 / 3.0, resolution: 0.02, annulus: AnnulusOptions::default() }
    }
}

const INCONCLUSIVE_BAND: f64 = 1e-6;

fn verdict_for(bound: f64, kind: BoundKind, threshold: f64) -> Verdict {
    match kind {
        BoundKind::StrictLower if bound >= threshold => Verdict::Pass,
        BoundKind::StrictLower | BoundKind::Lower => {
            if bound > threshold + INCONCLUSIVE_BAND {
                Verdict::Pass
            } else if bound > threshold {
                Verdict::Inconclusive
            } else {
                Verdict::Fail
            }
        }
        BoundKind::Upper => {
            if bound < threshold {
                Verdict::Fail
            } else if bound <= threshold + INCONCLUSIVE_BAND {
                Verdict::Inconclusive
            } else {
                Verdict::Pass
            }
        }
    }
}

/// `max[f(z_n) − f(z_i), f(z_i) − f(z_1)]`.
pub fn hypo1_threshold(inventory: &CriticalInventory, i: usize) -> f64 {
    let fi = inventory.minimum(i).map(|m| m.f_z).unwrap_or(f64::NAN);
    (inventory.f_zn() - fi).max(fi - inventory.f_z1())
}

/// Basin labels of boundary samples: `(point, arclength, label)`; samples on
/// basin boundaries get `None`.
fn labelled_boundary(
    landscape: &Landscape,
    inventory: &CriticalInventory,
    n: usize,
) -> Vec<(Vec<f64>, f64, Option<usize>)> {
    match landscape.domain().boundary() {
        BoundaryRep::Points(_) => {
            inventory.boundary_minima.iter().map(|m| (m.z.clone(), 0.0, Some(m.basin_id))).collect()
        }
        BoundaryRep::Curve(curve) => {
            let h = curve.length() / n as f64;
            (0..n)
                .map(|k| {
                    let s = k as f64 * h;
                    (curve.point(s).to_vec(), s, basin_label_arclength(landscape, inventory, curve, s).ok())
                })
                .collect()
        }
        BoundaryRep::Unavailable => Vec::new(),
    }
}

/// Checks the separation hypothesis for every boundary minimum.
pub fn check_hypo1(
    landscape: &Landscape,
    inventory: &CriticalInventory,
    method: Hypo1Method,
    opts: &Hypo1Options,
) -> Result<Vec<Hypo1Entry>> {
    let samples = labelled_boundary(landscape, inventory, 2048);
    let mut mesh: Option<AgmonMesh> = None;
    let mut out = Vec::new();
    for m in &inventory.boundary_minima {
        let i = m.basin_id;
        let threshold = hypo1_threshold(inventory, i);
        let outside: Vec<Vec<f64>> = samples.iter().filter(|s| s.2 != Some(i)).map(|s| s.0.clone()).collect();
        if outside.is_empty() {
            out.push(Hypo1Entry {
                i,
                threshold,
                bound: f64::INFINITY,
                kind: BoundKind::Lower,
                verdict: Verdict::Pass,
                detail: "basin covers the whole boundary".into(),
            });
            continue;
        }
        let entry = match method {
            Hypo1Method::AgmonZ1 if i == 1 => match agmonz1_applies(landscape, inventory, &samples) {
                Ok(()) => Hypo1Entry {
                    i,
                    threshold,
                    bound: threshold,
                    kind: BoundKind::StrictLower,
                    verdict: Verdict::Pass,
                    detail: "two boundary minima, z_2 the unique minimum of f on the complement of B_{z_1}".into(),
                },
                Err(why) => {
                    let mut e = annulus_entry(landscape, m, i, threshold, &outside, opts)?;
                    e.detail = format!("two-minimum criterion not applicable ({why}); {}", e.detail);
                    e
                }
            },
            Hypo1Method::Annulus | Hypo1Method::AgmonZ1 => annulus_entry(landscape, m, i, threshold, &outside, opts)?,
            Hypo1Method::Dijkstra => {
                if mesh.is_none() {
                    mesh = Some(AgmonMesh::build(landscape, opts.resolution)?);
                }
                let mesh = mesh.as_ref().unwrap();
                let (src, c0) = mesh.snap(landscape, &m.z)?;
                let (d, _) = mesh.shortest_paths(&[(src, c0)]);
                let mut best = (f64::INFINITY, None);
                for id in mesh.boundary_nodes() {
                    let label = nearest_label(&samples, mesh.node(id));
                    if label != Some(i) && d[id] < best.0 {
                        best = (d[id], Some(id));
                    }
                }
                let (bound, at) = best;
                Hypo1Entry {
                    i,
                    threshold,
                    bound,
                    kind: BoundKind::Upper,
                    verdict: verdict_for(bound, BoundKind::Upper, threshold),
                    detail: format!(
                        "mesh shortest path (resolution {}) to {:?}",
                        opts.resolution,
                        at.map(|id| mesh.node(id).to_vec())
                    ),
                }
            }
        };
        out.push(entry);
    }
    Ok(out)
}

fn nearest_label(samples: &[(Vec<f64>, f64, Option<usize>)], p: &[f64]) -> Option<usize> {
    samples.iter().min_by(|a, b| dist(&a.0, p).total_cmp(&dist(&b.0, p))).and_then(|s| s.2)
}

fn annulus_entry(
    landscape: &Landscape,
    m: &crate::landscape::BoundaryMinimum,
    i: usize,
    threshold: f64,
    outside: &[Vec<f64>],
    opts: &Hypo1Options,
) -> Result<Hypo1Entry> {
    let a = lower_bound_annulus(landscape, &m.z, opts.r_inner, opts.r_outer, Some(outside), &opts.annulus)?;
    Ok(Hypo1Entry {
        i,
        threshold,
        bound: a.bound,
        kind: BoundKind::Lower,
        verdict: verdict_for(a.bound, BoundKind::Lower, threshold),
        detail: format!(
            "annulus {}..{}: alpha = {:.6}, inf g = {:.6} at {:?}",
            opts.r_inner, opts.r_outer, a.alpha, a.inf_g, a.argmin
        ),
    })
}

fn agmonz1_applies(
    landscape: &Landscape,
    inventory: &CriticalInventory,
    samples: &[(Vec<f64>, f64, Option<usize>)],
) -> std::result::Result<(), String> {
    if inventory.n() != 2 {
        return Err(format!("{} boundary minima", inventory.n()));
    }
    let report = check_hypotheses(landscape, 10_000);
    if !report.h1.pass {
        return Err(format!("H1 fails: {}", report.h1.detail));
    }
    if !report.h3.pass {
        return Err(format!("H3 fails: {}", report.h3.detail));
    }
    let z2 = &inventory.boundary_minima[1];
    // away from z_2, f on the complement of B_{z_1} must stay above f(z_2)
    let spacing = samples.windows(2).map(|w| dist(&w[0].0, &w[1].0)).fold(0.0, f64::max);
    for (p, _, label) in samples {
        if *label != Some(1) && dist(p, &z2.z) > 4.0 * spacing && landscape.f(p) <= z2.f_z {
            return Err(format!("f({p:?}) <= f(z_2) on the complement of B_{{z_1}}"));
        }
    }
    Ok(())
}

/// `f(z_1) − f(x_0) − (f(z_n) − f(z_1))`; the hypothesis holds when positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypo2Report {
    pub margin: f64,
    pub holds: bool,
}

pub fn check_hypo2(inventory: &CriticalInventory) -> Hypo2Report {
    let margin = (inventory.f_z1() - inventory.f_x0) - (inventory.f_zn() - inventory.f_z1());
    Hypo2Report { margin, holds: margin > 0.0 }
}
