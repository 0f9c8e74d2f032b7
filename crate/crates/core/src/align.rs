//! The warping step: optimal re-parametrization of a polygon towards a
//! target SRV function, and the elastic distance built on it.
//!
//! Stage A runs a dynamic program over a lattice of target parameters
//! (uniform) times observed parameters (each polygon segment subdivided so
//! vertices lie on the lattice). Stage B moves the vertex timestamps
//! continuously, one at a time, by golden-section search. Inside a segment
//! the best piecewise-linear warping with knots on the target lattice is known
//! in closed form, so Stage B optimizes over a class containing every Stage A
//! path.

use crate::curve::Curve;
use crate::error::{ElasticError, Result};
use crate::poly::{merge_breaks, PiecewisePoly};
use crate::scalar::{dot, Scalar};
use crate::srv::{srv_transform, SrvFunction};
use crate::warping::Warping;

/// Tuning of the warping step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    /// Number of lattice points on the target parameter axis.
    pub grid_size: usize,
    /// Largest number of lattice steps along either axis in one DP edge.
    pub band: usize,
    /// Relative improvement per refinement sweep below which Stage B stops.
    pub tol: f64,
    pub max_sweeps: usize,
    /// With a hint, skip the global lattice search and start from the hint
    /// and the vertex-placement program only.
    pub warm_start: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { grid_size: 200, band: 6, tol: 1e-8, max_sweeps: 50, warm_start: true }
    }
}

/// Outcome of aligning one observed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult<T> {
    pub warping: Warping<T>,
    /// `‖target − (q∘γ)√γ̇‖`.
    pub residual: T,
    /// Refinement sweeps performed.
    pub iterations: usize,
    /// The target vanishes, so every warping is optimal; identity returned.
    pub degenerate_target: bool,
    /// `(q∘γ)√γ̇` for the returned warping.
    pub warped: SrvFunction<T>,
}

/// Aligns `observed` to `target`, starting from scratch.
pub fn align_to_target<T: Scalar>(
    observed: &Curve<T>,
    target: &SrvFunction<T>,
    config: &AlignConfig,
) -> Result<AlignmentResult<T>> {
    align_with_hint(observed, target, config, None)
}

/// Like [`align_to_target`], but also considers `hint` (typically the
/// previous warping of the same curve). The result is never worse than the
/// hint or the identity.
pub fn align_with_hint<T: Scalar>(
    observed: &Curve<T>,
    target: &SrvFunction<T>,
    config: &AlignConfig,
    hint: Option<&Warping<T>>,
) -> Result<AlignmentResult<T>> {
    let edges = band_edges(config.band.max(1));
    align_impl(observed, target, config, hint, &edges)
}

/// Elastic distance: the smaller of aligning `b` to `a` and `a` to `b`.
/// Closed curves are compared with their given starting points.
pub fn elastic_distance<T: Scalar>(a: &Curve<T>, b: &Curve<T>, config: &AlignConfig) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(ElasticError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let ab = align_to_target(b, &srv_transform(a), config)?.residual;
    let ba = align_to_target(a, &srv_transform(b), config)?.residual;
    Ok(ab.min(ba))
}

/// Distance from a curve to the class of an SRV function (one-sided).
pub fn distance_to_srv<T: Scalar>(curve: &Curve<T>, srv: &SrvFunction<T>, config: &AlignConfig) -> Result<T> {
    Ok(align_to_target(curve, srv, config)?.residual)
}

/// Exhaustive variant of [`elastic_distance`]: the lattice program uses every
/// monotone edge instead of a band. Intended as a test oracle; `n_grid` is
/// limited to 60.
pub fn brute_force_distance<T: Scalar>(a: &Curve<T>, b: &Curve<T>, n_grid: usize) -> Result<T> {
    if n_grid > 60 {
        return Err(ElasticError::GridTooLarge(n_grid));
    }
    if a.dim() != b.dim() {
        return Err(ElasticError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let config = AlignConfig { grid_size: n_grid.max(2), band: n_grid, ..AlignConfig::default() };
    let edges = full_edges(n_grid.max(2) * 2);
    let ab = align_impl(b, &srv_transform(a), &config, None, &edges)?.residual;
    let ba = align_impl(a, &srv_transform(b), &config, None, &edges)?.residual;
    Ok(ab.min(ba))
}

/// Sweeps every start gets before the best one is refined further.
const SCREEN_SWEEPS: usize = 3;

/// Edges `(a, b)` ordered so that steps closer to the diagonal come first.
fn band_edges(band: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> =
        (1..=band).flat_map(|a| (1..=band).map(move |b| (a, b))).collect();
    edges.sort_by_key(|&(a, b)| (a.abs_diff(b), a + b, a));
    edges
}

fn full_edges(limit: usize) -> Vec<(usize, usize)> {
    band_edges(limit)
}

/// Everything needed to score warpings of one polygon against one target.
struct Problem<'a, T> {
    dim: usize,
    target_norm_sq: T,
    prim: PiecewisePoly<T>,
    target_breaks: &'a [T],
    times: &'a [T],
    /// Observed SRV value per segment.
    q: Vec<T>,
    /// `Δy / √‖Δy‖` per segment (SRV value times `√Δt`).
    u: Vec<T>,
    obs_norm_sq: T,
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(observed: &'a Curve<T>, target: &'a SrvFunction<T>) -> Self {
        let srv = srv_transform(observed);
        let q = srv.values().expect("polygon SRV is piecewise constant").to_vec();
        let d = observed.dim();
        let times = observed.times();
        let mut u = q.clone();
        let mut obs_norm_sq = T::zero();
        for l in 0..observed.num_segments() {
            let dt = times[l + 1] - times[l];
            let root = dt.sqrt();
            let ql = &q[l * d..(l + 1) * d];
            obs_norm_sq += dot(ql, ql) * dt;
            u[l * d..(l + 1) * d].iter_mut().for_each(|x| *x *= root);
        }
        Self {
            dim: d,
            target_norm_sq: target.norm_sq(),
            prim: target.as_poly().antiderivative(),
            target_breaks: target.breaks(),
            times,
            q,
            u,
            obs_norm_sq,
        }
    }

    fn segments(&self) -> usize {
        self.times.len() - 1
    }

    fn ql(&self, l: usize) -> &[T] {
        &self.q[l * self.dim..(l + 1) * self.dim]
    }

    fn ul(&self, l: usize) -> &[T] {
        &self.u[l * self.dim..(l + 1) * self.dim]
    }

    fn prim_at(&self, s: T, buf: &mut [T]) {
        self.prim.eval_into(s, buf);
    }

    /// `⟨target, (q∘γ)√γ̇⟩` for a piecewise-linear warping.
    fn score(&self, w: &Warping<T>) -> T {
        let mut cuts: Vec<T> = w.knots().iter().map(|k| k.0).collect();
        cuts.extend(self.times.iter().map(|&t| w.inverse_eval(t)));
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        cuts.dedup();
        let d = self.dim;
        let (mut pa, mut pb) = (vec![T::zero(); d], vec![T::zero(); d]);
        let mut total = T::zero();
        self.prim_at(cuts[0], &mut pa);
        for win in cuts.windows(2) {
            let (a, b) = (win[0], win[1]);
            self.prim_at(b, &mut pb);
            let (ta, tb) = (w.eval(a), w.eval(b));
            if b > a && tb > ta {
                let seg = crate::curve::segment_at(self.times, (ta + tb) * T::lit(0.5));
                let ql = self.ql(seg);
                let inc: T = (0..d).map(|i| ql[i] * (pb[i] - pa[i])).sum();
                total += ((tb - ta) / (b - a)).sqrt() * inc;
            }
            std::mem::swap(&mut pa, &mut pb);
        }
        total
    }

    fn residual(&self, score: T) -> T {
        (self.target_norm_sq + self.obs_norm_sq - T::lit(2.0) * score).max(T::zero()).sqrt()
    }
}

struct Lattice<T> {
    s: Vec<T>,
    /// `P(s_i)` for all lattice points, `d` values each.
    prim: Vec<T>,
}

impl<T: Scalar> Lattice<T> {
    fn uniform(problem: &Problem<'_, T>, n: usize) -> Self {
        let last = T::from_usize_lossy(n - 1);
        let mut s: Vec<T> = (0..n).map(|i| T::from_usize_lossy(i) / last).collect();
        s[n - 1] = T::one();
        Self::from_points(problem, s)
    }

    /// The uniform lattice refined by the target's breakpoints, so the target
    /// is smooth between neighbouring points.
    fn refined(problem: &Problem<'_, T>, uniform: &Self) -> Self {
        let s = merge_breaks(&uniform.s, problem.target_breaks);
        if s.len() == uniform.s.len() {
            return Self { s: uniform.s.clone(), prim: uniform.prim.clone() };
        }
        Self::from_points(problem, s)
    }

    fn from_points(problem: &Problem<'_, T>, s: Vec<T>) -> Self {
        let d = problem.dim;
        let mut prim = vec![T::zero(); s.len() * d];
        for (i, &si) in s.iter().enumerate() {
            problem.prim_at(si, &mut prim[i * d..(i + 1) * d]);
        }
        Self { s, prim }
    }

    fn n(&self) -> usize {
        self.s.len()
    }

    fn p(&self, i: usize, d: usize) -> &[T] {
        &self.prim[i * d..(i + 1) * d]
    }

    /// Index `k` with `s[k] <= x < s[k+1]` (clamped to the last interval).
    fn interval(&self, x: T) -> usize {
        let n = self.n();
        self.s.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2)
    }
}

fn align_impl<T: Scalar>(
    observed: &Curve<T>,
    target: &SrvFunction<T>,
    config: &AlignConfig,
    hint: Option<&Warping<T>>,
    edges: &[(usize, usize)],
) -> Result<AlignmentResult<T>> {
    if observed.dim() != target.dim() {
        return Err(ElasticError::DimensionMismatch { expected: target.dim(), found: observed.dim() });
    }
    let problem = Problem::new(observed, target);
    let srv = srv_transform(observed);
    let identity = Warping::identity();
    if problem.target_norm_sq <= T::lit(1e-24) {
        log::warn!("alignment target vanishes; returning the identity warping");
        let residual = problem.residual(T::zero());
        return Ok(AlignmentResult { warping: identity, residual, iterations: 0, degenerate_target: true, warped: srv });
    }
    let lattice = Lattice::uniform(&problem, config.grid_size.max(2));
    let fine = Lattice::refined(&problem, &lattice);
    let refiner = Refiner::new(&problem, &fine);

    let mut starts: Vec<Vec<T>> = Vec::new();
    if !(config.warm_start && hint.is_some()) {
        match lattice_path(&problem, &lattice, edges) {
            Some(path) => starts.push(vertex_positions(&path, problem.times)),
            None => starts.push(problem.times.to_vec()),
        }
        if let Some(pos) = refiner.placement_dp(&lattice) {
            starts.push(pos);
        }
    }
    if let Some(h) = hint {
        starts.push(problem.times.iter().map(|&t| h.inverse_eval(t)).collect());
    }
    // screen every start briefly, then refine the most promising one fully
    let screen = SCREEN_SWEEPS.min(config.max_sweeps);
    let mut best: Option<(T, Vec<T>, usize)> = None;
    for start in starts {
        let (value, pos, sweeps) = refiner.refine(start, config.tol, screen);
        if best.as_ref().map_or(true, |b| value > b.0) {
            best = Some((value, pos, sweeps));
        }
    }
    let (_, positions, screened) = best.expect("at least one start");
    let (_, mut positions, more) = if screened == screen {
        refiner.refine(positions, config.tol, config.max_sweeps - screen)
    } else {
        (T::zero(), positions, 0)
    };
    let sweeps = screened + more;
    separate(&mut positions);
    let refined = refiner.build_warping(&positions);

    let mut candidates: Vec<Warping<T>> = vec![refined, identity];
    if let Some(h) = hint {
        candidates.push(h.clone());
    }
    let (score, warping) = candidates
        .into_iter()
        .map(|w| (problem.score(&w), w))
        .fold(None::<(T, Warping<T>)>, |acc, (s, w)| match acc {
            Some((bs, bw)) if !(s > bs) => Some((bs, bw)),
            _ => Some((s, w)),
        })
        .expect("non-empty");
    let warped = srv.warp(&warping)?;
    Ok(AlignmentResult {
        residual: problem.residual(score),
        warping,
        iterations: sweeps,
        degenerate_target: false,
        warped,
    })
}

/// Stage A. Returns the knots `(s, t)` of the best lattice path.
fn lattice_path<T: Scalar>(problem: &Problem<'_, T>, lattice: &Lattice<T>, edges: &[(usize, usize)]) -> Option<Vec<(T, T)>> {
    let d = problem.dim;
    let ns = lattice.n();
    // observed axis: subdivide each segment proportionally to its duration
    let times = problem.times;
    let mut t = vec![T::zero()];
    let mut seg = Vec::new();
    let mut vertex = vec![false];
    for l in 0..problem.segments() {
        let dt = times[l + 1] - times[l];
        let pieces = (dt * T::from_usize_lossy(ns - 1)).round().to_usize().unwrap_or(1).max(1);
        for k in 1..=pieces {
            let tk = if k == pieces { times[l + 1] } else { times[l] + dt * T::from_usize_lossy(k) / T::from_usize_lossy(pieces) };
            t.push(tk);
            seg.push(l);
            vertex.push(k == pieces);
        }
    }
    let nt = t.len();
    let segs = problem.segments();
    // ⟨q_l, P(s_i)⟩
    let mut a_tab = vec![T::zero(); ns * segs];
    for i in 0..ns {
        for l in 0..segs {
            a_tab[i * segs + l] = dot(problem.ql(l), lattice.p(i, d));
        }
    }
    let neg = T::neg_infinity();
    let max_a = edges.iter().map(|e| e.0).max().unwrap_or(1);
    let max_b = edges.iter().map(|e| e.1).max().unwrap_or(1);
    // 1/√Δs and √Δt per (end point, step)
    let mut inv_root_ds = vec![T::zero(); ns * (max_a + 1)];
    for i in 0..ns {
        for a in 1..=max_a.min(i) {
            inv_root_ds[i * (max_a + 1) + a] = (lattice.s[i] - lattice.s[i - a]).sqrt().recip();
        }
    }
    let mut root_dt = vec![T::zero(); nt * (max_b + 1)];
    for j in 0..nt {
        for b in 1..=max_b.min(j) {
            root_dt[j * (max_b + 1) + b] = (t[j] - t[j - b]).sqrt();
        }
    }
    // first vertex node strictly after each node
    let mut next_vertex = vec![nt; nt];
    for c in (0..nt - 1).rev() {
        next_vertex[c] = if vertex[c + 1] { c + 1 } else { next_vertex[c + 1] };
    }
    let mut best = vec![neg; ns * nt];
    let mut pred = vec![u32::MAX; ns * nt];
    best[0] = T::zero();
    let mut buf = vec![T::zero(); d];
    for i in 1..ns {
        for j in 1..nt {
            let mut top = neg;
            let mut arg = u32::MAX;
            for (e, &(a, b)) in edges.iter().enumerate() {
                if a > i || b > j {
                    continue;
                }
                let (i0, j0) = (i - a, j - b);
                let base = best[i0 * nt + j0];
                if base == neg {
                    continue;
                }
                let mut inner = a_tab[i * segs + seg[j - 1]] - a_tab[i0 * segs + seg[j0]];
                let mut c = next_vertex[j0];
                if c < j {
                    let ds = lattice.s[i] - lattice.s[i0];
                    let dt = t[j] - t[j0];
                    while c < j {
                        let sigma = lattice.s[i0] + (t[c] - t[j0]) / dt * ds;
                        problem.prim_at(sigma, &mut buf);
                        let (qa, qb) = (problem.ql(seg[c - 1]), problem.ql(seg[c]));
                        inner += (0..d).map(|k| (qa[k] - qb[k]) * buf[k]).sum::<T>();
                        c = next_vertex[c];
                    }
                }
                let cand = base + root_dt[j * (max_b + 1) + b] * inv_root_ds[i * (max_a + 1) + a] * inner;
                if cand > top {
                    top = cand;
                    arg = e as u32;
                }
            }
            best[i * nt + j] = top;
            pred[i * nt + j] = arg;
        }
    }
    if best[ns * nt - 1] == neg {
        return None;
    }
    let mut path = vec![(T::one(), T::one())];
    let (mut i, mut j) = (ns - 1, nt - 1);
    while i > 0 || j > 0 {
        let (a, b) = edges[pred[i * nt + j] as usize];
        i -= a;
        j -= b;
        path.push((lattice.s[i], t[j]));
    }
    path.reverse();
    path[0] = (T::zero(), T::zero());
    Some(path)
}

/// Parameters on the target axis where a lattice path passes the vertex
/// timestamps.
fn vertex_positions<T: Scalar>(path: &[(T, T)], times: &[T]) -> Vec<T> {
    let w = Warping::new(path.to_vec()).expect("lattice paths are strictly monotone");
    let mut pos: Vec<T> = times.iter().map(|&t| w.inverse_eval(t)).collect();
    pos[0] = T::zero();
    *pos.last_mut().unwrap() = T::one();
    pos
}

/// Stage B: continuous refinement of vertex positions.
struct Refiner<'a, 'p, T> {
    problem: &'a Problem<'p, T>,
    lattice: &'a Lattice<T>,
    /// Per segment, prefix sums over lattice intervals of `⟨u_l, ΔP⟩₊² / h`.
    prefix: Vec<T>,
}

impl<'a, 'p, T: Scalar> Refiner<'a, 'p, T> {
    fn new(problem: &'a Problem<'p, T>, lattice: &'a Lattice<T>) -> Self {
        let n = lattice.n();
        let d = problem.dim;
        let segs = problem.segments();
        let mut prefix = vec![T::zero(); segs * n];
        for l in 0..segs {
            let ul = problem.ul(l);
            let row = &mut prefix[l * n..(l + 1) * n];
            let mut prev = dot(ul, lattice.p(0, d));
            for k in 0..n - 1 {
                let next = dot(ul, lattice.p(k + 1, d));
                let f = (next - prev).max(T::zero());
                let h = lattice.s[k + 1] - lattice.s[k];
                row[k + 1] = row[k] + f * f / h;
                prev = next;
            }
        }
        Self { problem, lattice, prefix }
    }

    /// Best placement of every vertex on the uniform lattice, with the exact
    /// within-segment optimum as edge value.
    fn placement_dp(&self, uniform: &Lattice<T>) -> Option<Vec<T>> {
        let segs = self.problem.segments();
        let n = uniform.n();
        let fine = self.lattice.n();
        let idx: Vec<usize> = uniform.s.iter().map(|&x| self.lattice.s.partition_point(|&v| v < x)).collect();
        let neg = T::neg_infinity();
        let mut value = vec![neg; n];
        value[0] = T::zero();
        let mut pred = vec![0u32; segs * n];
        for l in 0..segs {
            let row = &self.prefix[l * fine..(l + 1) * fine];
            let mut next = vec![neg; n];
            // segments may collapse onto a single lattice point
            for j in 0..n {
                let pj = row[idx[j]];
                let (mut top, mut arg) = (neg, 0);
                for i in 0..=j {
                    if value[i] == neg {
                        continue;
                    }
                    let cand = value[i] + (pj - row[idx[i]]).max(T::zero()).sqrt();
                    if cand > top {
                        top = cand;
                        arg = i;
                    }
                }
                next[j] = top;
                pred[l * n + j] = arg as u32;
            }
            value = next;
        }
        if value[n - 1] == neg {
            return None;
        }
        let mut pos = vec![T::one(); segs + 1];
        let mut j = n - 1;
        for l in (0..segs).rev() {
            j = pred[l * n + j] as usize;
            pos[l] = uniform.s[j];
        }
        pos[0] = T::zero();
        Some(pos)
    }

    fn piece(&self, l: usize, a: T, b: T) -> T {
        if !(b > a) {
            return T::zero();
        }
        let f = self.correlation(l, a, b).max(T::zero());
        f * f / (b - a)
    }

    /// Sum of `⟨u_l, ΔP⟩₊² / h` over the pieces of `[a, b]` cut at lattice points.
    fn energy(&self, l: usize, a: T, b: T) -> T {
        if !(b > a) {
            return T::zero();
        }
        let n = self.lattice.n();
        let ia = self.lattice.interval(a);
        let ib = self.lattice.interval(b);
        if ia == ib {
            return self.piece(l, a, b);
        }
        let s = &self.lattice.s;
        let row = &self.prefix[l * n..(l + 1) * n];
        let inner = (row[ib] - row[ia + 1]).max(T::zero());
        self.piece(l, a, s[ia + 1]) + inner + self.piece(l, s[ib], b)
    }

    /// Best score of segment `l` placed on `[a, b]`. Without any positively
    /// correlated piece the whole duration goes to the least negative one.
    fn value(&self, l: usize, a: T, b: T) -> T {
        let e = self.energy(l, a, b);
        if e > T::zero() || !(b > a) {
            return e.sqrt();
        }
        self.cuts(a, b)
            .windows(2)
            .map(|w| self.correlation(l, w[0], w[1]) / (w[1] - w[0]).sqrt())
            .fold(T::neg_infinity(), T::max)
    }

    /// `[a, b]` cut at the lattice points inside it.
    fn cuts(&self, a: T, b: T) -> Vec<T> {
        let mut cuts = vec![a];
        if b > a {
            let ia = self.lattice.interval(a);
            cuts.extend(self.lattice.s[ia + 1..].iter().copied().take_while(|&s| s < b).filter(|&s| s > a));
        }
        cuts.push(b);
        cuts
    }

    /// `⟨u_l, P(b) − P(a)⟩`.
    fn correlation(&self, l: usize, a: T, b: T) -> T {
        let d = self.problem.dim;
        let ul = self.problem.ul(l);
        let inc = |pa: &mut [T], pb: &mut [T]| {
            self.problem.prim_at(a, pa);
            self.problem.prim_at(b, pb);
            (0..d).map(|i| ul[i] * (pb[i] - pa[i])).sum()
        };
        // hot path: avoid heap buffers for the usual planar and spatial curves
        if d <= 4 {
            let (mut pa, mut pb) = ([T::zero(); 4], [T::zero(); 4]);
            inc(&mut pa[..d], &mut pb[..d])
        } else {
            inc(&mut vec![T::zero(); d], &mut vec![T::zero(); d])
        }
    }

    fn total(&self, pos: &[T]) -> T {
        (0..pos.len() - 1).map(|l| self.value(l, pos[l], pos[l + 1])).sum()
    }

    /// Coordinate ascent on the interior vertex positions, with an
    /// extrapolation step along the last sweep's displacement.
    fn refine(&self, mut pos: Vec<T>, tol: f64, max_sweeps: usize) -> (T, Vec<T>, usize) {
        let last = pos.len() - 1;
        let mut total = self.total(&pos);
        let tol = T::lit(tol);
        let margin = T::lit(1e-12);
        let mut sweeps = 0;
        if last < 2 {
            return (total, pos, 0);
        }
        while sweeps < max_sweeps {
            sweeps += 1;
            let before = total;
            let previous = pos.clone();
            for l in 1..last {
                let (lo, hi) = (pos[l - 1], pos[l + 1]);
                let f = |x: T| self.value(l - 1, lo, x) + self.value(l, x, hi);
                let current = f(pos[l]);
                let (mut bx, mut bv) = (pos[l], current);
                let (a, b) = (lo + margin * (hi - lo), hi - margin * (hi - lo));
                if b > a {
                    // coarse scan over grid points, then polish around the best
                    let grid = &self.lattice.s;
                    let first = grid.partition_point(|&v| v <= a);
                    let stop = grid.partition_point(|&v| v < b);
                    let mut left = a;
                    let mut right = b;
                    for x in std::iter::once(a).chain(grid[first..stop].iter().copied()).chain(std::iter::once(b)) {
                        let v = f(x);
                        if v > bv {
                            bx = x;
                            bv = v;
                        }
                    }
                    if bx != pos[l] || stop > first {
                        let k = grid.partition_point(|&v| v < bx);
                        if k > 0 {
                            left = grid[k - 1].max(a);
                        }
                        let k2 = grid.partition_point(|&v| v <= bx);
                        if k2 < grid.len() {
                            right = grid[k2].min(b);
                        }
                    }
                    if right > left {
                        let x = golden_max(&f, left, right);
                        let v = f(x);
                        if v > bv {
                            bx = x;
                            bv = v;
                        }
                    }
                }
                if bv > current {
                    pos[l] = bx;
                }
            }
            total = self.total(&pos);
            if !(total - before > tol * total.abs().max(T::epsilon())) {
                break;
            }
            let mut step = T::one();
            loop {
                let candidate = extrapolate(&previous, &pos, step);
                let value = self.total(&candidate);
                if !(value > total) {
                    break;
                }
                pos = candidate;
                total = value;
                step = step + step;
            }
        }
        (total, pos, sweeps)
    }

    /// Piecewise-linear warping realizing the optimal within-segment slopes
    /// for the given vertex positions.
    fn build_warping(&self, pos: &[T]) -> Warping<T> {
        let times = self.problem.times;
        let floor = T::epsilon() * T::lit(64.0);
        let mut knots: Vec<(T, T)> = vec![(T::zero(), T::zero())];
        for l in 0..pos.len() - 1 {
            let (a, b) = (pos[l], pos[l + 1]);
            let (t0, t1) = (times[l], times[l + 1]);
            let cuts = self.cuts(a, b);
            let pieces = cuts.len() - 1;
            let mut weights: Vec<T> = cuts.windows(2).map(|w| self.piece(l, w[0], w[1])).collect();
            let mut total: T = weights.iter().copied().sum();
            if !(total > T::zero()) {
                // everything on the least negatively correlated piece
                let best = cuts
                    .windows(2)
                    .map(|w| self.correlation(l, w[0], w[1]) / (w[1] - w[0]).max(T::min_positive_value()).sqrt())
                    .enumerate()
                    .fold((0, T::neg_infinity()), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc })
                    .0;
                weights.iter_mut().enumerate().for_each(|(k, w)| *w = if k == best { T::one() } else { T::zero() });
                total = T::one();
            }
            let dt = t1 - t0;
            let mut inc: Vec<T> = weights.iter().map(|&w| dt * w / total).collect();
            if dt > floor * T::from_usize_lossy(2 * pieces) {
                let low = inc.iter().filter(|&&x| x < floor).count();
                if low > 0 {
                    let rest: T = inc.iter().copied().filter(|&x| x >= floor).sum();
                    let scale = (dt - floor * T::from_usize_lossy(low)) / rest;
                    inc.iter_mut().for_each(|x| *x = if *x < floor { floor } else { *x * scale });
                }
            }
            let mut t = t0;
            for (k, w) in cuts.windows(2).enumerate() {
                t = if k + 1 == pieces { t1 } else { t + inc[k] };
                knots.push((w[1], t));
            }
        }
        // drop knots that rounding left non-increasing
        let mut clean: Vec<(T, T)> = Vec::with_capacity(knots.len());
        for k in knots {
            if clean.last().map_or(true, |&(s, t)| k.0 > s && k.1 > t) {
                clean.push(k);
            }
        }
        let n = clean.len();
        if n < 2 || clean[n - 1] != (T::one(), T::one()) {
            if n >= 2 && clean[n - 1].0 < T::one() && clean[n - 1].1 < T::one() {
                clean.push((T::one(), T::one()));
            } else if n >= 2 {
                clean[n - 1] = (T::one(), T::one());
                // the replaced knot may now break monotonicity
                while clean.len() > 2 {
                    let m = clean.len();
                    if clean[m - 2].0 < T::one() && clean[m - 2].1 < T::one() {
                        break;
                    }
                    clean.remove(m - 2);
                }
            } else {
                return Warping::identity();
            }
        }
        Warping::new(clean).unwrap_or_else(|_| Warping::identity())
    }
}

/// Spreads coincident vertex positions by a tiny gap so the warping stays
/// strictly increasing.
/// `to + step·(to − from)`, clamped to a monotone sequence in `[0, 1]`
/// with fixed ends.
fn extrapolate<T: Scalar>(from: &[T], to: &[T], step: T) -> Vec<T> {
    let last = to.len() - 1;
    let mut out = to.to_vec();
    for l in 1..last {
        let x = to[l] + step * (to[l] - from[l]);
        out[l] = x.max(out[l - 1]).min(T::one());
    }
    out
}

fn separate<T: Scalar>(pos: &mut [T]) {
    let gap = (T::epsilon().sqrt() * T::lit(0.01)).min(T::epsilon() * T::lit(1024.0));
    let n = pos.len();
    for l in 1..n - 1 {
        if pos[l] < pos[l - 1] + gap {
            pos[l] = pos[l - 1] + gap;
        }
    }
    for l in (1..n - 1).rev() {
        if pos[l] > pos[l + 1] - gap {
            pos[l] = pos[l + 1] - gap;
        }
    }
}

fn golden_max<T: Scalar>(f: &impl Fn(T) -> T, mut a: T, mut b: T) -> T {
    let r = T::lit(0.618_033_988_749_894_8);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let stop = T::lit(1e-13);
    for _ in 0..200 {
        if !(b - a > stop) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(points: &[[f64; 2]]) -> Curve<f64> {
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        Curve::polygon(&flat, 2, false).unwrap()
    }

    #[test]
    fn self_alignment_is_identity() {
        let c = poly(&[[0.0, 0.0], [1.0, 0.3], [1.4, 1.2], [0.7, 2.0]]);
        let r = align_to_target(&c, &srv_transform(&c), &AlignConfig::default()).unwrap();
        assert!(r.residual < 1e-8, "{}", r.residual);
    }

    #[test]
    fn orthogonal_segments() {
        let a = poly(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = poly(&[[0.0, 0.0], [0.0, 1.0]]);
        let d = elastic_distance(&a, &b, &AlignConfig::default()).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-9, "{d}");
    }

    #[test]
    fn edge_order_prefers_diagonal() {
        let e = band_edges(3);
        assert_eq!(e[0], (1, 1));
        assert_eq!(e[1], (2, 2));
        assert_eq!(e[3], (1, 2));
    }

    #[test]
    fn brute_force_limit() {
        let a = poly(&[[0.0, 0.0], [1.0, 0.0]]);
        assert_eq!(brute_force_distance(&a, &a, 61), Err(ElasticError::GridTooLarge(61)));
    }

    #[test]
    fn refined_total_matches_exact_score() {
        use crate::model::fit_l2_model;
        use crate::simulate::{generate_scenario, Scenario, ScenarioSpec};
        let spec = ScenarioSpec::<f64> { seed: 0, n: 4, ..ScenarioSpec::new(Scenario::One) };
        let data = generate_scenario(&spec).unwrap();
        let basis = Scenario::One.fit_config().basis;
        let srvs: Vec<_> = data.train.curves().iter().map(srv_transform).collect();
        let model = fit_l2_model(&srvs, data.train.covariates(), data.train.covariate_names(), basis).unwrap();
        for (c, x) in data.train.curves().iter().zip(data.train.covariates()) {
            let target = model.alignment_target(x, 201).unwrap();
            let problem = Problem::new(c, &target);
            let lattice = Lattice::uniform(&problem, 100);
            let fine = Lattice::refined(&problem, &lattice);
            let refiner = Refiner::new(&problem, &fine);
            let path = lattice_path(&problem, &lattice, &band_edges(6)).unwrap();
            let starts = [vertex_positions(&path, problem.times), refiner.placement_dp(&lattice).unwrap()];
            for start in starts {
                let (total, mut pos, _) = refiner.refine(start, 1e-8, 50);
                separate(&mut pos);
                let exact = problem.score(&refiner.build_warping(&pos));
                assert!((total - exact).abs() < 1e-7 * exact.abs().max(1.0), "{total} vs {exact}");
            }
        }
    }
}
