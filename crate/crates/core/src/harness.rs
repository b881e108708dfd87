//! Empirical local-to-global checks on sampled maps into flat cylinders.
//!
//! A [`SampledMap`] is a graph on domain samples together with values in a
//! cylinder (Euclidean targets are the cylinder with trivial group). The
//! harness builds the space of fiber components, the induced length metric on
//! it, and tests the local hypotheses and global conclusions of the
//! local-to-global principle on the samples.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::warn;
use nalgebra::DVector;
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::{Cylinder, CylinderIndex, CylinderPoint, DEFAULT_EPS_GAP};
use crate::error::{check_dim, Error, Result};
use crate::metric::{
    check_convex_subset, ConvexityMode, ConvexityReport, ExtReal, PairChoice, Polyline, WeightedGraph,
    EPS_METRIC,
};

/// Default radius of the graph balls `U_x`.
pub const DEFAULT_RADIUS_HOPS: usize = 2;
/// Fraction of nearby target samples that `f(U_x)` must cover.
pub const DEFAULT_LOI_COVERAGE: f64 = 0.95;
/// Lattice box searched beyond the minimizing lift for weak convexity.
pub const DEFAULT_WEAK_BOX: i64 = 3;
/// Endpoints used for global convexity checks before subsampling.
pub const DEFAULT_MAX_ENDPOINTS: usize = 400;

#[derive(Clone, Debug)]
pub struct SampledMap {
    domain_points: Vec<DVector<f64>>,
    neighbors: Vec<Vec<usize>>,
    values: Vec<CylinderPoint>,
    target: Cylinder,
    boundary: Vec<bool>,
}

impl SampledMap {
    /// Values are re-projected to canonical representatives. Edges are
    /// symmetrised; self-loops and duplicates are dropped. Points whose degree
    /// is below the maximum degree are flagged as boundary until
    /// [`SampledMap::with_boundary`] says otherwise.
    pub fn new(
        domain_points: Vec<DVector<f64>>,
        edges: &[(usize, usize)],
        values: Vec<CylinderPoint>,
        target: Cylinder,
    ) -> Result<Self> {
        let n = domain_points.len();
        check_dim(n, values.len())?;
        if n == 0 {
            return Err(Error::input("sampled map has no points"));
        }
        let values = values
            .iter()
            .map(|v| target.project(v.rep()))
            .collect::<Result<Vec<_>>>()?;
        let mut neighbors = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::input(format!("edge ({a}, {b}) references a missing point")));
            }
            if a != b {
                neighbors[a].insert(b);
                neighbors[b].insert(a);
            }
        }
        let neighbors: Vec<Vec<usize>> = neighbors.into_iter().map(|s| s.into_iter().collect()).collect();
        let max_deg = neighbors.iter().map(Vec::len).max().unwrap_or(0);
        let boundary = neighbors.iter().map(|nb| nb.len() < max_deg).collect();
        Ok(Self {
            domain_points,
            neighbors,
            values,
            target,
            boundary,
        })
    }

    /// Euclidean-valued map.
    pub fn euclidean(domain_points: Vec<DVector<f64>>, edges: &[(usize, usize)], values: Vec<DVector<f64>>) -> Result<Self> {
        let dim = values
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::input("sampled map has no points"))?;
        let target = Cylinder::euclidean(dim);
        let values = values
            .into_iter()
            .map(|v| target.project(&v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain_points, edges, values, target)
    }

    pub fn with_boundary(mut self, boundary: Vec<bool>) -> Result<Self> {
        check_dim(self.len(), boundary.len())?;
        self.boundary = boundary;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn domain_points(&self) -> &[DVector<f64>] {
        &self.domain_points
    }

    pub fn values(&self) -> &[CylinderPoint] {
        &self.values
    }

    pub fn target(&self) -> &Cylinder {
        &self.target
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    /// Edges with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, nb)| nb.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn image_distance(&self, a: usize, b: usize) -> f64 {
        self.target.distance(&self.values[a], &self.values[b])
    }

    pub fn image_edge_lengths(&self) -> Vec<f64> {
        self.edges().map(|(a, b)| self.image_distance(a, b)).collect()
    }

    pub fn is_connected(&self) -> bool {
        self.hop_distances(0, usize::MAX).iter().all(|d| d.is_some())
    }

    /// Domain graph with edge weights `d_Y(f(a), f(b))`.
    pub fn image_graph(&self) -> WeightedGraph {
        WeightedGraph::from_edges(self.len(), self.edges().map(|(a, b)| (a, b, self.image_distance(a, b))))
    }

    fn hop_distances(&self, source: usize, max_hops: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(a) = queue.pop_front() {
            let d = dist[a].expect("queued nodes have a distance");
            if d == max_hops {
                continue;
            }
            for &b in &self.neighbors[a] {
                if dist[b].is_none() {
                    dist[b] = Some(d + 1);
                    queue.push_back(b);
                }
            }
        }
        dist
    }

    /// `U_x` (points within `hops` edges, including `x`) and its outer sphere.
    pub fn graph_ball(&self, x: usize, hops: usize) -> (Vec<usize>, Vec<usize>) {
        let mut dist: BTreeMap<usize, usize> = BTreeMap::from([(x, 0)]);
        let mut frontier = vec![x];
        for h in 1..=hops {
            let mut next = Vec::new();
            for &a in &frontier {
                for &b in &self.neighbors[a] {
                    if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(b) {
                        e.insert(h);
                        next.push(b);
                    }
                }
            }
            frontier = next;
        }
        let ball: Vec<usize> = dist.keys().copied().collect();
        let sphere = dist.iter().filter(|(_, &d)| d == hops).map(|(&i, _)| i).collect();
        (ball, sphere)
    }

    /// Points within `hops` edges of a boundary point.
    pub fn near_boundary(&self, hops: usize) -> Vec<bool> {
        let mut near = vec![false; self.len()];
        let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
        for (i, &b) in self.boundary.iter().enumerate() {
            if b {
                near[i] = true;
                queue.push_back((i, 0));
            }
        }
        while let Some((a, d)) = queue.pop_front() {
            if d == hops {
                continue;
            }
            for &b in &self.neighbors[a] {
                if !near[b] {
                    near[b] = true;
                    queue.push_back((b, d + 1));
                }
            }
        }
        near
    }

    /// Noise floor based default: a tenth of the smallest image edge length
    /// above `EPS_METRIC`.
    pub fn default_eps_fiber(&self) -> f64 {
        let min = self
            .image_edge_lengths()
            .into_iter()
            .filter(|&l| l > EPS_METRIC)
            .fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            0.1 * min
        } else {
            EPS_METRIC
        }
    }

    pub fn max_image_edge(&self) -> f64 {
        self.image_edge_lengths().into_iter().fold(0.0, f64::max)
    }
}

/// Fiber components of a sampled map and the graph between them.
#[derive(Clone, Debug, Serialize)]
pub struct FiberQuotient {
    pub eps_fiber: f64,
    /// Point index → fiber bucket.
    pub fiber_key: Vec<usize>,
    /// Point index → component label.
    pub component_id: Vec<usize>,
    /// Component label → fiber bucket.
    pub component_bucket: Vec<usize>,
    /// Component label → member points.
    pub members: Vec<Vec<usize>>,
    pub bucket_count: usize,
    /// `(a, b, w)` with `a < b`: touching components and the smallest image
    /// distance across the cut.
    pub quotient_edges: Vec<(usize, usize, f64)>,
    /// Within-bucket edges longer than `eps_fiber`, cut rather than merged.
    pub cut_edges: usize,
    pub warnings: Vec<String>,
}

impl FiberQuotient {
    pub fn component_count(&self) -> usize {
        self.members.len()
    }

    /// Value of the first member; all members agree up to `eps_fiber` chains.
    pub fn component_value<'a>(&self, map: &'a SampledMap, c: usize) -> &'a CylinderPoint {
        &map.values()[self.members[c][0]]
    }
}

fn labels(uf: UnionFind<usize>, n: usize) -> (Vec<usize>, usize) {
    let roots = uf.into_labeling();
    let mut relabel = BTreeMap::new();
    let mut out = Vec::with_capacity(n);
    for r in roots {
        let next = relabel.len();
        out.push(*relabel.entry(r).or_insert(next));
    }
    (out, relabel.len())
}

/// Buckets values by single linkage at `eps_fiber`, then labels the
/// connected components of each bucket's subgraph. An edge between two
/// points of one bucket joins them only if its own image length is at most
/// `eps_fiber`.
pub fn build_fiber_quotient(map: &SampledMap, eps_fiber: f64, max_components: Option<usize>) -> Result<FiberQuotient> {
    if !(eps_fiber > 0.0 && eps_fiber.is_finite()) {
        return Err(Error::input(format!("eps_fiber must be positive, got {eps_fiber}")));
    }
    let n = map.len();
    let values = map.values();
    let index = CylinderIndex::new(map.target(), values, eps_fiber);
    let mut buckets = UnionFind::new(n);
    for i in 0..n {
        for j in index.within(&values[i], eps_fiber) {
            buckets.union(i, j);
        }
    }
    let (fiber_key, bucket_count) = labels(buckets, n);

    let mut comps = UnionFind::new(n);
    let mut cut_edges = 0;
    for (a, b) in map.edges() {
        if fiber_key[a] == fiber_key[b] {
            if map.image_distance(a, b) <= eps_fiber {
                comps.union(a, b);
            } else {
                cut_edges += 1;
            }
        }
    }
    let (component_id, count) = labels(comps, n);
    let mut members = vec![Vec::new(); count];
    let mut component_bucket = vec![0; count];
    for i in 0..n {
        members[component_id[i]].push(i);
        component_bucket[component_id[i]] = fiber_key[i];
    }
    let mut cut: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (a, b) in map.edges() {
        let (ca, cb) = (component_id[a], component_id[b]);
        if ca != cb {
            let key = (ca.min(cb), ca.max(cb));
            let w = map.image_distance(a, b);
            cut.entry(key).and_modify(|x| *x = x.min(w)).or_insert(w);
        }
    }
    let mut warnings = Vec::new();
    if cut_edges > 0 {
        warnings.push(format!(
            "{cut_edges} within-fiber edges longer than eps_fiber were cut; components kept separate"
        ));
    }
    if let Some(bound) = max_components {
        if count > bound {
            warnings.push(format!("fiber fragmentation: {count} components exceed the bound {bound}"));
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(FiberQuotient {
        eps_fiber,
        fiber_key,
        component_id,
        component_bucket,
        members,
        bucket_count,
        quotient_edges: cut.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
        cut_edges,
        warnings,
    })
}

/// Distances `d̃(a, ·)` from component `a` to every component.
pub fn dtilde_from(graph: &WeightedGraph, q: &FiberQuotient, a: usize, cutoff: Option<f64>) -> Vec<ExtReal> {
    let point_dist = graph.distances_from_set(&q.members[a], cutoff);
    let mut out = vec![ExtReal::Infinite; q.component_count()];
    for (i, d) in point_dist.into_iter().enumerate() {
        let c = q.component_id[i];
        out[c] = out[c].min(d);
    }
    out
}

/// Infimum of image lengths of graph paths between the two components.
pub fn dtilde(map: &SampledMap, q: &FiberQuotient, a: usize, b: usize) -> ExtReal {
    dtilde_from(&map.image_graph(), q, a, None)[b]
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Witness {
    /// Two components of one fiber meet the same neighbourhood.
    Lfc { bucket: usize, components: (usize, usize) },
    /// A nearby image sample not reached by `f(U_x)`.
    Loi { uncovered: CylinderPoint, coverage: f64, rho: f64 },
    /// A pair in `f(U_x)` whose minimizing geodesics leave it.
    Lcd { pair: (CylinderPoint, CylinderPoint), gap: f64, tol: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct PointConditions {
    pub index: usize,
    pub skipped: bool,
    pub lfc: bool,
    pub loi: bool,
    pub lcd: bool,
    pub radius_hops: usize,
    pub rho: f64,
    pub coverage: f64,
    pub witnesses: Vec<Witness>,
}

impl PointConditions {
    pub fn all(&self) -> bool {
        self.lfc && self.loi && self.lcd
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalConditionsReport {
    pub radius_hops: usize,
    pub coverage_threshold: f64,
    pub points: Vec<PointConditions>,
    pub warnings: Vec<String>,
}

/// Pass counts over a set of points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PassCounts {
    pub checked: usize,
    pub lfc: usize,
    pub loi: usize,
    pub lcd: usize,
    pub all: usize,
}

impl PassCounts {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.all as f64 / self.checked as f64
        }
    }
}

impl LocalConditionsReport {
    pub fn counts_where(&self, keep: impl Fn(usize) -> bool) -> PassCounts {
        let mut c = PassCounts::default();
        for p in self.points.iter().filter(|p| !p.skipped && keep(p.index)) {
            c.checked += 1;
            c.lfc += p.lfc as usize;
            c.loi += p.loi as usize;
            c.lcd += p.lcd as usize;
            c.all += p.all() as usize;
        }
        c
    }

    pub fn counts(&self) -> PassCounts {
        self.counts_where(|_| true)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PointConditions> {
        self.points.iter().filter(|p| !p.skipped && !p.all())
    }
}

#[derive(Clone, Debug)]
pub struct LocalOptions {
    pub radius_hops: usize,
    pub coverage_threshold: f64,
    /// LCD tolerance as a multiple of the longest image edge inside `U_x`.
    pub lcd_factor: f64,
    pub eps_gap: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            radius_hops: DEFAULT_RADIUS_HOPS,
            coverage_threshold: DEFAULT_LOI_COVERAGE,
            lcd_factor: 2.0,
            eps_gap: DEFAULT_EPS_GAP,
        }
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs[xs.len() / 2])
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
struct LcdKey {
    buckets: Vec<usize>,
    tol_bits: u64,
}

/// Checks (LFC), (LOI) and (LCD) on the graph ball around every point.
pub fn check_local_conditions(map: &SampledMap, q: &FiberQuotient, opts: &LocalOptions) -> Result<LocalConditionsReport> {
    if opts.radius_hops < 1 {
        return Err(Error::input("radius_hops must be at least 1"));
    }
    let target = map.target();
    let values = map.values();
    let edge_lengths = map.image_edge_lengths();
    let positive: Vec<f64> = edge_lengths.iter().copied().filter(|&l| l > EPS_METRIC).collect();
    let fallback_rho = median(positive.clone()).unwrap_or(EPS_METRIC);
    let index = CylinderIndex::new(target, values, fallback_rho.max(q.eps_fiber));

    let staged: Vec<(PointConditions, LcdKey, Vec<usize>)> = (0..map.len())
        .into_par_iter()
        .map(|x| -> Result<(PointConditions, LcdKey, Vec<usize>)> {
            let mut pc = PointConditions {
                index: x,
                skipped: false,
                lfc: true,
                loi: true,
                lcd: true,
                radius_hops: opts.radius_hops,
                rho: 0.0,
                coverage: 1.0,
                witnesses: Vec::new(),
            };
            if map.neighbors(x).is_empty() {
                pc.skipped = true;
                return Ok((pc, LcdKey::default(), Vec::new()));
            }
            let (ball, sphere) = map.graph_ball(x, opts.radius_hops);

            // LFC: one component per bucket inside U_x
            let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
            for &p in &ball {
                let (b, c) = (q.fiber_key[p], q.component_id[p]);
                match seen.get(&b) {
                    Some(&c0) if c0 != c => {
                        if pc.lfc {
                            pc.witnesses.push(Witness::Lfc {
                                bucket: b,
                                components: (c0.min(c), c0.max(c)),
                            });
                        }
                        pc.lfc = false;
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(b, c);
                    }
                }
            }

            // LOI: coverage of the relative ball of radius rho around f(x)
            let own = q.fiber_key[x];
            let clearance = sphere
                .iter()
                .filter(|&&s| q.fiber_key[s] != own)
                .map(|&s| target.distance(&values[x], &values[s]))
                .fold(f64::INFINITY, f64::min);
            let rho = if clearance.is_finite() { 0.5 * clearance } else { fallback_rho };
            pc.rho = rho;
            let covered: BTreeSet<usize> = ball.iter().map(|&p| q.fiber_key[p]).collect();
            let nearby: BTreeMap<usize, usize> = index
                .within(&values[x], rho)
                .into_iter()
                .map(|i| (q.fiber_key[i], i))
                .rev()
                .collect();
            let hit = nearby.keys().filter(|b| covered.contains(b)).count();
            pc.coverage = if nearby.is_empty() { 1.0 } else { hit as f64 / nearby.len() as f64 };
            if pc.coverage < opts.coverage_threshold {
                pc.loi = false;
                let (_, &i) = nearby
                    .iter()
                    .find(|(b, _)| !covered.contains(b))
                    .expect("coverage below one has an uncovered bucket");
                pc.witnesses.push(Witness::Loi {
                    uncovered: values[i].clone(),
                    coverage: pc.coverage,
                    rho,
                });
            }

            // LCD input: f(U_x) as fiber buckets; evaluated once per distinct set below
            let mut reps: BTreeMap<usize, usize> = BTreeMap::new();
            for &p in &ball {
                reps.entry(q.fiber_key[p]).or_insert(p);
            }
            let in_ball: BTreeSet<usize> = ball.iter().copied().collect();
            let longest = ball
                .iter()
                .flat_map(|&a| map.neighbors(a).iter().filter(|b| in_ball.contains(b)).map(move |&b| (a, b)))
                .map(|(a, b)| map.image_distance(a, b))
                .fold(0.0, f64::max);
            let tol = (opts.lcd_factor * longest).max(EPS_METRIC);
            Ok((pc, LcdKey { buckets: reps.keys().copied().collect(), tol_bits: tol.to_bits() }, reps.into_values().collect()))
        })
        .collect::<Result<_>>()?;

    let mut jobs: BTreeMap<LcdKey, Vec<usize>> = BTreeMap::new();
    for (_, key, reps) in &staged {
        jobs.entry(key.clone()).or_insert_with(|| reps.clone());
    }
    let jobs: Vec<(LcdKey, Vec<usize>)> = jobs.into_iter().collect();
    let verdicts: Vec<Option<Witness>> = jobs
        .par_iter()
        .map(|(key, reps)| -> Result<Option<Witness>> {
            if reps.len() < 2 {
                return Ok(None);
            }
            let tol = f64::from_bits(key.tol_bits);
            let subset: Vec<CylinderPoint> = reps.iter().map(|&p| values[p].clone()).collect();
            let step = (0.5 * tol).max(EPS_METRIC);
            let report = check_convex_subset(
                target,
                &subset,
                |a: &CylinderPoint, b: &CylinderPoint| target.minimizing_geodesics(a, b, opts.eps_gap, step),
                tol,
                ConvexityMode::Convex,
            )?;
            Ok((!report.is_convex).then(|| Witness::Lcd {
                pair: report.witness_pair.expect("failed check has a witness"),
                gap: report.max_gap,
                tol,
            }))
        })
        .collect::<Result<_>>()?;
    let lookup: BTreeMap<&LcdKey, &Option<Witness>> = jobs.iter().map(|(k, _)| k).zip(verdicts.iter()).collect();
    let points: Vec<PointConditions> = staged
        .into_iter()
        .map(|(mut pc, key, _)| {
            if !pc.skipped {
                if let Some(w) = lookup[&key] {
                    pc.lcd = false;
                    pc.witnesses.push(w.clone());
                }
            }
            pc
        })
        .collect();
    let skipped = points.iter().filter(|p| p.skipped).count();
    let mut warnings = Vec::new();
    if skipped > 0 {
        warnings.push(format!("{skipped} isolated points skipped"));
        warn!("{skipped} isolated points skipped");
    }
    Ok(LocalConditionsReport {
        radius_hops: opts.radius_hops,
        coverage_threshold: opts.coverage_threshold,
        points,
        warnings,
    })
}

/// One representative value per fiber bucket.
pub fn bucket_values(map: &SampledMap, q: &FiberQuotient) -> Vec<CylinderPoint> {
    let mut reps: Vec<Option<usize>> = vec![None; q.bucket_count];
    for (i, &b) in q.fiber_key.iter().enumerate() {
        reps[b].get_or_insert(i);
    }
    reps.into_iter()
        .map(|i| map.values()[i.expect("every bucket has a member")].clone())
        .collect()
}

/// Geodesic containment for a point set in a cylinder: endpoints are pairs of
/// `endpoints`, containment is measured against `set` through a hash grid.
/// `Weak` also tries lifts with coefficients within `weak_box` of the
/// minimizer, shortest first.
pub fn cylinder_convexity(
    cyl: &Cylinder,
    endpoints: &[CylinderPoint],
    set: &[CylinderPoint],
    tol: f64,
    mode: ConvexityMode,
    eps_gap: f64,
    weak_box: i64,
) -> Result<ConvexityReport<CylinderPoint>> {
    if !(tol > 0.0) {
        return Err(Error::input("convexity tolerance must be positive"));
    }
    let index = CylinderIndex::new(cyl, set, tol);
    let gap_to_set = |p: &CylinderPoint| -> f64 {
        index
            .nearest(p, tol)
            .unwrap_or_else(|| set.iter().map(|s| cyl.distance(p, s)).fold(f64::INFINITY, f64::min))
    };
    let n = endpoints.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let step = 0.5 * tol;
    let choices: Vec<PairChoice> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (p, r) = (&endpoints[i], &endpoints[j]);
            let mut lifts = cyl.enumerate_minimizing_lifts(p, r, eps_gap);
            if mode == ConvexityMode::Weak {
                let known: BTreeSet<Vec<i64>> = lifts.iter().map(|l| l.lattice_coeffs.clone()).collect();
                lifts.extend(
                    cyl.lifts_in_box(p, r, weak_box)
                        .into_iter()
                        .filter(|l| !known.contains(&l.lattice_coeffs)),
                );
            }
            let mut best = f64::INFINITY;
            let mut accepted = None;
            for (k, lift) in lifts.iter().enumerate() {
                let steps = Cylinder::steps_for(lift.norm, step);
                let mut gap: f64 = 0.0;
                for s in 0..=steps {
                    let t = s as f64 / steps as f64;
                    let w = cyl.project_unchecked(&(p.rep() + &lift.displacement * t));
                    gap = gap.max(gap_to_set(&w));
                    if gap > tol {
                        break;
                    }
                }
                best = best.min(gap);
                if gap <= tol {
                    accepted = Some(k);
                    break;
                }
            }
            PairChoice {
                i,
                j,
                path_index: accepted,
                gap: best,
            }
        })
        .collect();
    let failed = choices.iter().find(|c| c.path_index.is_none());
    Ok(ConvexityReport {
        is_convex: failed.is_none(),
        witness_pair: failed.map(|c| (endpoints[c.i].clone(), endpoints[c.j].clone())),
        witness_indices: failed.map(|c| (c.i, c.j)),
        max_gap: choices.iter().map(|c| c.gap).fold(0.0, f64::max),
        pairs_checked: pairs.len(),
        choices,
    })
}

/// Deterministic stride subsample keeping at most `max` points.
pub fn subsample<T: Clone>(xs: &[T], max: usize) -> Vec<T> {
    if xs.len() <= max || max == 0 {
        return xs.to_vec();
    }
    (0..max).map(|i| xs[i * xs.len() / max].clone()).collect()
}

/// Weak convexity of the sampled image: some geodesic (shortest first, then
/// longer lifts) between each pair of image samples stays within `tol` of
/// the image.
pub fn verify_weak_convexity(map: &SampledMap, q: &FiberQuotient, tol: f64, eps_gap: f64, weak_box: i64) -> Result<ConvexityReport<CylinderPoint>> {
    let set = bucket_values(map, q);
    let endpoints = subsample(&set, DEFAULT_MAX_ENDPOINTS);
    cylinder_convexity(map.target(), &endpoints, &set, tol, ConvexityMode::Weak, eps_gap, weak_box)
}

/// Convexity of the sampled image (shortest paths only).
pub fn verify_convexity(map: &SampledMap, q: &FiberQuotient, tol: f64, eps_gap: f64) -> Result<ConvexityReport<CylinderPoint>> {
    let set = bucket_values(map, q);
    let endpoints = subsample(&set, DEFAULT_MAX_ENDPOINTS);
    cylinder_convexity(map.target(), &endpoints, &set, tol, ConvexityMode::Convex, eps_gap, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberHistogram {
    /// Components per fiber bucket.
    pub components_per_fiber: Vec<usize>,
    /// Number of components → number of buckets with that count.
    pub histogram: BTreeMap<usize, usize>,
    /// Buckets with more than one component.
    pub flagged: Vec<usize>,
    pub all_connected: bool,
}

pub fn fiber_connectivity_report(q: &FiberQuotient) -> FiberHistogram {
    let mut per = vec![0usize; q.bucket_count];
    for &b in &q.component_bucket {
        per[b] += 1;
    }
    let mut histogram = BTreeMap::new();
    for &c in &per {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let flagged: Vec<usize> = per.iter().enumerate().filter(|(_, &c)| c > 1).map(|(b, _)| b).collect();
    FiberHistogram {
        all_connected: flagged.is_empty(),
        components_per_fiber: per,
        histogram,
        flagged,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IsometryReport {
    pub pairs_checked: usize,
    pub max_defect: f64,
    pub worst_pair: Option<(usize, usize)>,
}

/// `|d̃(a, b) − d_Y(f̃(a), f̃(b))|` over component pairs that meet a common
/// graph ball on which all three local conditions hold.
pub fn local_isometry_defect(map: &SampledMap, q: &FiberQuotient, local: &LocalConditionsReport) -> IsometryReport {
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for p in local.points.iter().filter(|p| !p.skipped && p.all()) {
        let (ball, _) = map.graph_ball(p.index, local.radius_hops);
        let comps: BTreeSet<usize> = ball.iter().map(|&i| q.component_id[i]).collect();
        let comps: Vec<usize> = comps.into_iter().collect();
        for (i, &a) in comps.iter().enumerate() {
            for &b in &comps[i + 1..] {
                pairs.insert((a, b));
            }
        }
    }
    let graph = map.image_graph();
    let cutoff = 2.0 * local.radius_hops as f64 * map.max_image_edge() + EPS_METRIC;
    let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in &pairs {
        by_source.entry(a).or_default().push(b);
    }
    let results: Vec<(f64, (usize, usize))> = by_source
        .par_iter()
        .flat_map_iter(|(&a, bs)| {
            let d = dtilde_from(&graph, q, a, Some(cutoff));
            let va = q.component_value(map, a).clone();
            bs.iter()
                .map(|&b| {
                    let dy = map.target().distance(&va, q.component_value(map, b));
                    let defect = match d[b] {
                        ExtReal::Finite(dt) => (dt - dy).abs(),
                        ExtReal::Infinite => f64::INFINITY,
                    };
                    (defect, (a, b))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let worst = results.iter().max_by(|x, y| x.0.total_cmp(&y.0));
    IsometryReport {
        pairs_checked: results.len(),
        max_defect: worst.map_or(0.0, |w| w.0),
        worst_pair: worst.map(|w| w.1),
    }
}

/// Polylines kept for plotting: image samples and the geodesics accepted for
/// a few convexity pairs.
pub fn witness_geodesics(
    cyl: &Cylinder,
    endpoints: &[CylinderPoint],
    report: &ConvexityReport<CylinderPoint>,
    eps_gap: f64,
    max_step: f64,
    weak_box: i64,
    limit: usize,
) -> Vec<Polyline<CylinderPoint>> {
    let mut out = Vec::new();
    if let Some((a, b)) = &report.witness_pair {
        out.extend(cyl.minimizing_geodesics(a, b, eps_gap, max_step));
    }
    for c in report.choices.iter().filter(|c| c.path_index.is_some()).take(limit) {
        let (p, r) = (&endpoints[c.i], &endpoints[c.j]);
        let mut lifts = cyl.enumerate_minimizing_lifts(p, r, eps_gap);
        let known: BTreeSet<Vec<i64>> = lifts.iter().map(|l| l.lattice_coeffs.clone()).collect();
        lifts.extend(cyl.lifts_in_box(p, r, weak_box).into_iter().filter(|l| !known.contains(&l.lattice_coeffs)));
        if let Some(l) = c.path_index.and_then(|k| lifts.get(k)) {
            if let Ok(poly) = cyl.geodesic_polyline(p, l, Cylinder::steps_for(l.norm, max_step)) {
                out.push(poly);
            }
        }
    }
    out
}
