//! Length-metric-space primitives: extended distances, polylines and their
//! lengths, graph approximations of induced length metrics, shortest-path and
//! geodesic tests, and the geodesic-containment test for convex subsets.
//!
//! Curves are represented by their samples. The length of a [`Polyline`] is
//! the sum of the distances between consecutive points; this equals the length
//! of the underlying curve when every segment is a shortest path and is a lower
//! bound otherwise. Inserting points never decreases it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::Add;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance for algebraic identities on exact flat models.
pub const EPS_METRIC: f64 = 1e-9;

/// A nonnegative real number or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps IEEE infinities and NaN to [`ExtReal::Infinite`].
    pub fn from_f64(x: f64) -> Self {
        if x.is_finite() {
            ExtReal::Finite(x)
        } else {
            ExtReal::Infinite
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinite => None,
        }
    }

    /// Panics on `+∞`; for distances known to be finite.
    pub fn unwrap_finite(self) -> f64 {
        self.finite().expect("distance is infinite")
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::Infinite) => Some(Ordering::Less),
            (ExtReal::Infinite, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::Infinite, ExtReal::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::from_f64(a + b),
            _ => ExtReal::Infinite,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => serializer.serialize_f64(*x),
            ExtReal::Infinite => serializer.serialize_str("inf"),
        }
    }
}

/// A set with a (possibly infinite-valued) distance function.
pub trait MetricSpace {
    type Point: Clone;

    fn dist(&self, a: &Self::Point, b: &Self::Point) -> ExtReal;
}

impl<M: MetricSpace + ?Sized> MetricSpace for &M {
    type Point = M::Point;

    fn dist(&self, a: &Self::Point, b: &Self::Point) -> ExtReal {
        (**self).dist(a, b)
    }
}

/// Euclidean space of any dimension; points of different dimension are at
/// infinite distance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Euclidean;

impl MetricSpace for Euclidean {
    type Point = DVector<f64>;

    fn dist(&self, a: &DVector<f64>, b: &DVector<f64>) -> ExtReal {
        if a.len() != b.len() {
            return ExtReal::Infinite;
        }
        ExtReal::from_f64((a - b).norm())
    }
}

/// A finite sequence of at least two points, the sampled form of a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline<P> {
    points: Vec<P>,
}

impl<P: Clone> Polyline<P> {
    pub fn new(points: Vec<P>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::input(format!(
                "a polyline needs at least 2 points, got {}",
                points.len()
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn into_points(self) -> Vec<P> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> &P {
        &self.points[0]
    }

    pub fn last(&self) -> &P {
        &self.points[self.points.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    /// `self` followed by `other`; `other` should start where `self` ends.
    /// The junction point is kept once.
    pub fn concat(&self, other: &Self) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points[1..]);
        Self { points }
    }

    /// Inserts `p` before position `index` (`index` in `1..len`).
    pub fn insert(&mut self, index: usize, p: P) {
        self.points.insert(index, p);
    }

    /// The sub-polyline of `len` consecutive points starting at `start`.
    pub fn window(&self, start: usize, len: usize) -> Option<Self> {
        if len < 2 || start + len > self.points.len() {
            return None;
        }
        Some(Self {
            points: self.points[start..start + len].to_vec(),
        })
    }
}

/// Sum of distances between consecutive points.
pub fn polyline_length<S: MetricSpace>(space: &S, c: &Polyline<S::Point>) -> ExtReal {
    c.points
        .windows(2)
        .fold(ExtReal::ZERO, |acc, w| acc + space.dist(&w[0], &w[1]))
}

/// True when the polyline is (up to `tol`) as short as the distance between its
/// endpoints.
pub fn is_shortest_path<S: MetricSpace>(space: &S, c: &Polyline<S::Point>, tol: f64) -> bool {
    match (polyline_length(space, c), space.dist(c.first(), c.last())) {
        (ExtReal::Finite(len), ExtReal::Finite(d)) => len <= d + tol,
        _ => false,
    }
}

/// Local minimality: every run of `window` consecutive points (or the whole
/// polyline, if shorter) is a shortest path within `tol`.
pub fn is_geodesic<S: MetricSpace>(
    space: &S,
    c: &Polyline<S::Point>,
    window: usize,
    tol: f64,
) -> Result<bool> {
    if window < 2 {
        return Err(Error::input(format!("window must be >= 2, got {window}")));
    }
    let w = window.min(c.len());
    Ok((0..=c.len() - w).all(|start| {
        let sub = c.window(start, w).expect("window within bounds");
        is_shortest_path(space, &sub, tol)
    }))
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Undirected weighted graph in adjacency-list form.
#[derive(Clone, Debug, Default)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut g = Self::new(n);
        for (a, b, w) in edges {
            g.add_edge(a, b, w);
        }
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        self.adj[a].push((b, w));
        if a != b {
            self.adj[b].push((a, w));
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adj[node]
    }

    /// Dijkstra from `source`. Nodes farther than `cutoff` (if given) are
    /// reported as `+∞`. Edges with non-finite weight are ignored.
    pub fn distances_from(&self, source: usize, cutoff: Option<f64>) -> Vec<ExtReal> {
        self.distances_from_set(&[source], cutoff)
    }

    /// Dijkstra from the nearest of several sources.
    pub fn distances_from_set(&self, sources: &[usize], cutoff: Option<f64>) -> Vec<ExtReal> {
        let n = self.adj.len();
        let mut best = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &source in sources {
            best[source] = 0.0;
            heap.push(HeapEntry {
                dist: 0.0,
                node: source,
            });
        }
        while let Some(HeapEntry { dist, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            for &(next, w) in &self.adj[node] {
                if !w.is_finite() {
                    continue;
                }
                let cand = dist + w;
                if cutoff.is_some_and(|c| cand > c) {
                    continue;
                }
                if cand < best[next] {
                    best[next] = cand;
                    heap.push(HeapEntry {
                        dist: cand,
                        node: next,
                    });
                }
            }
        }
        best.into_iter()
            .zip(done)
            .map(|(d, reached)| {
                if reached {
                    ExtReal::Finite(d)
                } else {
                    ExtReal::Infinite
                }
            })
            .collect()
    }
}

/// Graph approximation of the induced length metric between `samples[x]` and
/// `samples[y]`: the shortest path in the sample graph with edge weights given
/// by the ambient distance. Different graph components are at `+∞`.
pub fn induced_length_metric<S: MetricSpace>(
    space: &S,
    samples: &[S::Point],
    adjacency: &[(usize, usize)],
    x: usize,
    y: usize,
) -> Result<ExtReal> {
    let n = samples.len();
    if x >= n || y >= n {
        return Err(Error::input(format!(
            "sample index out of range: ({x}, {y}) with {n} samples"
        )));
    }
    let mut graph = WeightedGraph::new(n);
    for &(a, b) in adjacency {
        if a >= n || b >= n {
            return Err(Error::input(format!("edge ({a}, {b}) out of range")));
        }
        if let ExtReal::Finite(w) = space.dist(&samples[a], &samples[b]) {
            graph.add_edge(a, b, w);
        }
    }
    Ok(graph.distances_from(x, None)[y])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityMode {
    /// Some shortest path between each pair stays in the set.
    Convex,
    /// Some geodesic (not necessarily shortest) between each pair stays in the set.
    Weak,
}

/// Which oracle path was accepted for a pair, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct PairChoice {
    pub i: usize,
    pub j: usize,
    pub path_index: Option<usize>,
    /// Largest waypoint distance from the set along the best candidate path.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct ConvexityReport<P> {
    pub is_convex: bool,
    pub witness_pair: Option<(P, P)>,
    pub witness_indices: Option<(usize, usize)>,
    pub max_gap: f64,
    pub pairs_checked: usize,
    pub choices: Vec<PairChoice>,
}

/// Geodesic-containment test on a finite sample of a subset.
///
/// For each pair of samples the oracle supplies candidate paths (all
/// minimizing paths, and for [`ConvexityMode::Weak`] possibly longer
/// geodesics). A pair passes when some admissible candidate has every waypoint
/// within `tol` of the sample set. In [`ConvexityMode::Convex`] only candidates
/// that are shortest paths (within `tol`) are admissible.
pub fn check_convex_subset<S, F>(
    space: &S,
    subset: &[S::Point],
    oracle: F,
    tol: f64,
    mode: ConvexityMode,
) -> Result<ConvexityReport<S::Point>>
where
    S: MetricSpace + Sync,
    S::Point: Send + Sync,
    F: Fn(&S::Point, &S::Point) -> Vec<Polyline<S::Point>> + Sync,
{
    let n = subset.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();

    let gap_to_set = |p: &S::Point| -> f64 {
        subset
            .iter()
            .map(|s| space.dist(p, s))
            .fold(ExtReal::Infinite, ExtReal::min)
            .finite()
            .unwrap_or(f64::INFINITY)
    };

    let choices: Vec<Result<PairChoice>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let paths = oracle(&subset[i], &subset[j]);
            if paths.is_empty() {
                return Err(Error::NoGeodesic);
            }
            let mut best_gap = f64::INFINITY;
            let mut accepted = None;
            for (k, path) in paths.iter().enumerate() {
                if mode == ConvexityMode::Convex && !is_shortest_path(space, path, tol) {
                    continue;
                }
                let mut gap: f64 = 0.0;
                for p in path.points() {
                    gap = gap.max(gap_to_set(p));
                    if gap > tol && gap >= best_gap {
                        break;
                    }
                }
                best_gap = best_gap.min(gap);
                if gap <= tol {
                    accepted = Some(k);
                    break;
                }
            }
            Ok(PairChoice {
                i,
                j,
                path_index: accepted,
                gap: best_gap,
            })
        })
        .collect();
    let choices = choices.into_iter().collect::<Result<Vec<_>>>()?;

    let failed = choices.iter().find(|c| c.path_index.is_none());
    let max_gap = choices.iter().map(|c| c.gap).fold(0.0, f64::max);
    Ok(ConvexityReport {
        is_convex: failed.is_none(),
        witness_pair: failed.map(|c| (subset[c.i].clone(), subset[c.j].clone())),
        witness_indices: failed.map(|c| (c.i, c.j)),
        max_gap,
        pairs_checked: pairs.len(),
        choices,
    })
}

/// Straight segment oracle for Euclidean subsets; waypoint spacing at most `step`.
pub fn euclidean_segment(a: &DVector<f64>, b: &DVector<f64>, step: f64) -> Polyline<DVector<f64>> {
    let len = (b - a).norm();
    let steps = ((len / step).ceil() as usize).max(1);
    let points = (0..=steps)
        .map(|s| {
            let t = s as f64 / steps as f64;
            a + (b - a) * t
        })
        .collect();
    Polyline { points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::{ClosedSubgroup, Cylinder};
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn circle() -> Cylinder {
        Cylinder::new(ClosedSubgroup::lattice(vec![v(&[2.0 * PI])]).unwrap()).unwrap()
    }

    #[test]
    fn segment_and_square_lengths() {
        let seg = Polyline::new(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])]).unwrap();
        assert_eq!(polyline_length(&Euclidean, &seg), ExtReal::Finite(1.0));
        let square = Polyline::new(vec![
            v(&[0.0, 0.0]),
            v(&[1.0, 0.0]),
            v(&[1.0, 1.0]),
            v(&[0.0, 1.0]),
            v(&[0.0, 0.0]),
        ])
        .unwrap();
        assert_eq!(polyline_length(&Euclidean, &square), ExtReal::Finite(4.0));
    }

    #[test]
    fn circle_loop_is_long_but_closed() {
        let c = circle();
        let pts: Vec<_> = [0.0, PI, 2.0 * PI]
            .iter()
            .map(|&x| c.project(&v(&[x])).unwrap())
            .collect();
        let loop_ = Polyline::new(pts).unwrap();
        let len = polyline_length(&c, &loop_).unwrap_finite();
        assert!((len - 2.0 * PI).abs() < EPS_METRIC);
        assert!(c.dist(loop_.first(), loop_.last()).unwrap_finite() < EPS_METRIC);
        assert!(!is_shortest_path(&c, &loop_, 1e-6));
    }

    #[test]
    fn too_short_polyline_rejected() {
        assert!(Polyline::new(vec![v(&[0.0])]).is_err());
    }

    #[test]
    fn infinite_segment_gives_infinite_length() {
        let c = Polyline::new(vec![v(&[0.0]), v(&[0.0, 1.0])]).unwrap();
        assert_eq!(polyline_length(&Euclidean, &c), ExtReal::Infinite);
    }

    #[test]
    fn shortest_path_and_geodesic_examples() {
        let straight =
            Polyline::new(vec![v(&[0.0, 0.0]), v(&[0.5, 0.5]), v(&[1.0, 1.0])]).unwrap();
        assert!(is_shortest_path(&Euclidean, &straight, 1e-12));
        assert!(is_geodesic(&Euclidean, &straight, 3, 1e-12).unwrap());

        let reversal =
            Polyline::new(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.5, 0.0])]).unwrap();
        assert!(!is_geodesic(&Euclidean, &reversal, 3, 1e-9).unwrap());
        assert!(is_geodesic(&Euclidean, &reversal, 1, 1e-9).is_err());
    }

    #[test]
    fn half_circle_is_shortest_full_loop_is_geodesic() {
        let c = circle();
        let step = PI / 8.0;
        let half: Vec<_> = (0..=8)
            .map(|i| c.project(&v(&[i as f64 * step])).unwrap())
            .collect();
        let half = Polyline::new(half).unwrap();
        assert!(is_shortest_path(&c, &half, step));

        let full: Vec<_> = (0..=16)
            .map(|i| c.project(&v(&[i as f64 * step])).unwrap())
            .collect();
        let full = Polyline::new(full).unwrap();
        assert!(!is_shortest_path(&c, &full, step));
        // 8 points span 7π/8 < π
        assert!(is_geodesic(&c, &full, 8, 1e-9).unwrap());
    }

    #[test]
    fn dijkstra_on_path_graph() {
        let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 5.0)]);
        let d = g.distances_from(0, None);
        assert_eq!(d[2], ExtReal::Finite(3.0));
        assert_eq!(d[3], ExtReal::Infinite);
        let d = g.distances_from(0, Some(2.0));
        assert_eq!(d[2], ExtReal::Infinite);
    }

    #[test]
    fn induced_metric_rejects_unknown_points() {
        let samples = vec![v(&[0.0]), v(&[1.0])];
        assert!(induced_length_metric(&Euclidean, &samples, &[(0, 1)], 0, 2).is_err());
    }

    #[test]
    fn disconnected_samples_are_infinitely_far() {
        let samples = vec![v(&[0.0]), v(&[0.1]), v(&[5.0]), v(&[5.1])];
        let d = induced_length_metric(&Euclidean, &samples, &[(0, 1), (2, 3)], 0, 3).unwrap();
        assert_eq!(d, ExtReal::Infinite);
    }

    #[test]
    fn convex_disk_grid_matches_euclidean() {
        let n = 21;
        let h = 2.0 / (n - 1) as f64;
        let mut idx = vec![None; n * n];
        let mut samples = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let p = v(&[-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
                if p.norm() <= 1.0 + 1e-12 {
                    idx[i * n + j] = Some(samples.len());
                    samples.push(p);
                }
            }
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let Some(a) = idx[i * n + j] else { continue };
                for (di, dj) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                        continue;
                    }
                    if let Some(b) = idx[ii as usize * n + jj as usize] {
                        edges.push((a, b));
                    }
                }
            }
        }
        let x = idx[10 * n].unwrap(); // (-1, 0)
        let y = idx[10 * n + 20].unwrap(); // (1, 0)
        let d = induced_length_metric(&Euclidean, &samples, &edges, x, y)
            .unwrap()
            .unwrap_finite();
        assert!((d - 2.0).abs() <= 2.0 * h);
        // property (ii): never below the ambient distance
        let z = idx[3 * n + 15].unwrap();
        let dz = induced_length_metric(&Euclidean, &samples, &edges, x, z)
            .unwrap()
            .unwrap_finite();
        assert!(dz >= (&samples[x] - &samples[z]).norm() - EPS_METRIC);
        assert!(dz <= (&samples[x] - &samples[z]).norm() * 1.1 + 2.0 * h);
    }

    fn segment_oracle(step: f64) -> impl Fn(&DVector<f64>, &DVector<f64>) -> Vec<Polyline<DVector<f64>>> + Sync {
        move |a, b| vec![euclidean_segment(a, b, step)]
    }

    fn disk_samples(center: [f64; 2], r: f64, h: f64) -> Vec<DVector<f64>> {
        let m = (r / h).ceil() as i64;
        let mut out = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                let p = v(&[i as f64 * h, j as f64 * h]);
                if p.norm() <= r {
                    out.push(p + v(&center));
                }
            }
        }
        out
    }

    #[test]
    fn ball_is_convex_two_balls_are_not() {
        let h = 0.1;
        let ball = disk_samples([0.0, 0.0], 0.5, h);
        let rep = check_convex_subset(&Euclidean, &ball, segment_oracle(h / 2.0), 2.0 * h, ConvexityMode::Convex)
            .unwrap();
        assert!(rep.is_convex);

        let mut two = disk_samples([0.0, 0.0], 0.3, h);
        two.extend(disk_samples([2.0, 0.0], 0.3, h));
        let rep = check_convex_subset(&Euclidean, &two, segment_oracle(h / 2.0), 2.0 * h, ConvexityMode::Convex)
            .unwrap();
        assert!(!rep.is_convex);
        let (a, b) = rep.witness_pair.unwrap();
        assert!((a[0] < 1.0) != (b[0] < 1.0), "witness should straddle the gap");
    }

    #[test]
    fn whole_circle_is_convex_in_itself() {
        let c = circle();
        let samples: Vec<_> = (0..32)
            .map(|i| c.project(&v(&[i as f64 * PI / 16.0])).unwrap())
            .collect();
        let oracle = |p: &_, q: &_| c.minimizing_geodesics(p, q, 1e-7, PI / 64.0);
        let rep = check_convex_subset(&c, &samples, oracle, PI / 8.0, ConvexityMode::Convex).unwrap();
        assert!(rep.is_convex);
    }

    #[test]
    fn empty_oracle_is_an_error() {
        let samples = vec![v(&[0.0]), v(&[1.0])];
        let res = check_convex_subset(&Euclidean, &samples, |_, _| Vec::new(), 0.1, ConvexityMode::Convex);
        assert!(matches!(res, Err(Error::NoGeodesic)));
    }
}
