//! Sample functionals on the copula scale: rank correlations, empirical
//! level-set boundaries, the copula diagonal, and the Hausdorff distance
//! between polygonal chains.

use crate::error::{Error, Result};
use crate::sample::{ranks_average_ties, SampleMatrix};
use std::collections::HashMap;

/// Ordered polyline with vertices in the unit square.
///
/// `closed` adds the segment from the last vertex back to the first when the
/// chain is treated as a set of segments (e.g. by [`hausdorff_distance`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonChain {
    vertices: Vec<[f64; 2]>,
    closed: bool,
}

impl PolygonChain {
    pub fn new(vertices: Vec<[f64; 2]>, closed: bool) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::invalid(
                "a polygon chain needs at least two vertices",
            ));
        }
        for v in &vertices {
            if !(v[0].is_finite() && v[1].is_finite())
                || !(0.0..=1.0).contains(&v[0])
                || !(0.0..=1.0).contains(&v[1])
            {
                return Err(Error::invalid(format!(
                    "polygon vertex ({}, {}) outside the unit square",
                    v[0], v[1]
                )));
            }
        }
        Ok(Self { vertices, closed })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        let n = self.vertices.len();
        let mut segs = Vec::with_capacity(n);
        for w in self.vertices.windows(2) {
            segs.push((w[0], w[1]));
        }
        if self.closed && n > 2 {
            segs.push((self.vertices[n - 1], self.vertices[0]));
        }
        segs
    }
}

/// Copula diagonal values `C(u, ..., u)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCurve {
    pub u_grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Kendall's tau of a bivariate sample: (concordant - discordant) pairs over
/// all pairs, with tied pairs counting as neither.
///
/// Uses the O(n^2) pair scan for small samples and a merge-sort inversion
/// count (with exact tie corrections) beyond 5000 rows; both paths return
/// identical values.
pub fn sample_tau(data: &SampleMatrix) -> Result<f64> {
    if data.dim() != 2 {
        return Err(Error::unsupported(
            "Kendall's tau requires exactly two columns",
        ));
    }
    let n = data.n();
    if n < 2 {
        return Err(Error::invalid("Kendall's tau needs at least two rows"));
    }
    let xs = data.column(0);
    let ys = data.column(1);
    let num = if n > 5000 {
        merge_c_minus_d(&xs, &ys)
    } else {
        pairwise_c_minus_d(&xs, &ys)
    };
    let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    Ok(num as f64 / pairs)
}

fn pairwise_c_minus_d(x: &[f64], y: &[f64]) -> i64 {
    let mut s = 0i64;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx != 0.0 && dy != 0.0 {
                s += if (dx > 0.0) == (dy > 0.0) { 1 } else { -1 };
            }
        }
    }
    s
}

/// Concordant minus discordant pairs in O(n log n): sort by (x, y), count
/// strict y-inversions by merge sort, and correct for ties via
/// `pairs - t_x - t_y + t_xy - 2 * inversions`.
fn merge_c_minus_d(x: &[f64], y: &[f64]) -> i64 {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&i, &j| x[i].total_cmp(&x[j]).then(y[i].total_cmp(&y[j])));

    let mut t_x = 0i64;
    let mut t_xy = 0i64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let g = (j - i) as i64;
        t_x += g * (g - 1) / 2;
        let mut a = i;
        while a < j {
            let mut b = a + 1;
            while b < j && y[idx[b]] == y[idx[a]] {
                b += 1;
            }
            let gg = (b - a) as i64;
            t_xy += gg * (gg - 1) / 2;
            a = b;
        }
        i = j;
    }

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let inversions = count_inversions(&mut ys);

    // ys is sorted after the merge pass; read the y tie counts off it.
    let mut t_y = 0i64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let g = (j - i) as i64;
        t_y += g * (g - 1) / 2;
        i = j;
    }

    let pairs = n as i64 * (n as i64 - 1) / 2;
    pairs - t_x - t_y + t_xy - 2 * inversions
}

fn count_inversions(v: &mut [f64]) -> i64 {
    let mut buf = v.to_vec();
    merge_count(v, &mut buf)
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (a, b) = v.split_at_mut(mid);
        let (ba, bb) = buf.split_at_mut(mid);
        merge_count(a, ba) + merge_count(b, bb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            // v[j] precedes every remaining left element it is smaller than
            inv += (mid - i) as i64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = v[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    inv
}

/// Spearman's rho of a bivariate sample: the Pearson correlation of the
/// within-column ranks (average ranks on ties).
pub fn sample_rho_s(data: &SampleMatrix) -> Result<f64> {
    if data.dim() != 2 {
        return Err(Error::unsupported(
            "Spearman's rho requires exactly two columns",
        ));
    }
    if data.n() < 2 {
        return Err(Error::invalid("Spearman's rho needs at least two rows"));
    }
    let rx = ranks_average_ties(&data.column(0));
    let ry = ranks_average_ties(&data.column(1));
    pearson(&rx, &ry)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Degenerate(
            "correlation undefined for a constant column".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Boundary of the empirical copula's sublevel set `{C_n <= t}`.
///
/// Evaluates the empirical copula exactly on a `(grid_n+1)^2` lattice,
/// extracts the `t`-contour by marching squares with linear edge
/// interpolation (saddle cells resolved by the cell-center value), clamps
/// coordinates below `t` up to `t`, and anchors the chain at `(t, 1)` and
/// `(1, t)`.
pub fn estimate_level_boundary(
    data_u: &SampleMatrix,
    t: f64,
    grid_n: usize,
) -> Result<PolygonChain> {
    if data_u.dim() != 2 {
        return Err(Error::unsupported(
            "level-set boundaries are implemented for two columns",
        ));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("level must lie in (0,1), got {t}")));
    }
    if grid_n < 2 {
        return Err(Error::invalid("contour grid needs at least 2 cells per axis"));
    }
    if !data_u.all_in_closed_unit_cube() {
        return Err(Error::invalid(
            "level-set input must lie in the unit square",
        ));
    }

    let g = grid_n;
    let n = data_u.n();
    let stride = g + 1;
    // Exact lattice values of C_n: a point contributes to node (a, b) iff
    // x <= a/g and y <= b/g, i.e. for all a >= ceil(x*g); accumulate bin
    // counts at the smallest covering node, then cumulate along both axes.
    let mut grid = vec![0.0f64; stride * stride];
    for i in 0..n {
        let a = ((data_u.get(i, 0) * g as f64).ceil() as usize).min(g);
        let b = ((data_u.get(i, 1) * g as f64).ceil() as usize).min(g);
        grid[a * stride + b] += 1.0;
    }
    for a in 0..stride {
        for b in 1..stride {
            grid[a * stride + b] += grid[a * stride + b - 1];
        }
    }
    for b in 0..stride {
        for a in 1..stride {
            grid[a * stride + b] += grid[(a - 1) * stride + b];
        }
    }
    for v in &mut grid {
        *v /= n as f64;
    }

    let f = |a: usize, b: usize| grid[a * stride + b];
    let above = |a: usize, b: usize| f(a, b) > t;

    // Crossing points, computed once per lattice edge so that adjacent cells
    // share bitwise-identical vertices. Node ids: vertical edge (a, b) spans
    // (a,b)-(a,b+1); horizontal edge (a, b) spans (a,b)-(a+1,b).
    let vert_id = |a: usize, b: usize| a * g + b;
    let horiz_id = |a: usize, b: usize| stride * g + a * stride + b;
    let mut cross: HashMap<usize, [f64; 2]> = HashMap::new();
    for a in 0..stride {
        for b in 0..g {
            if above(a, b) != above(a, b + 1) {
                let (f0, f1) = (f(a, b), f(a, b + 1));
                let s = (t - f0) / (f1 - f0);
                cross.insert(vert_id(a, b), [a as f64 / g as f64, (b as f64 + s) / g as f64]);
            }
        }
    }
    for a in 0..g {
        for b in 0..stride {
            if above(a, b) != above(a + 1, b) {
                let (f0, f1) = (f(a, b), f(a + 1, b));
                let s = (t - f0) / (f1 - f0);
                cross.insert(horiz_id(a, b), [(a as f64 + s) / g as f64, b as f64 / g as f64]);
            }
        }
    }

    // Marching squares: per cell, connect the crossed edges (2 of them), or
    // split the ambiguous 4-crossing saddle by the cell-center value.
    let mut segments: Vec<(usize, usize)> = Vec::new();
    for a in 0..g {
        for b in 0..g {
            let bottom = (horiz_id(a, b), above(a, b) != above(a + 1, b));
            let right = (vert_id(a + 1, b), above(a + 1, b) != above(a + 1, b + 1));
            let top = (horiz_id(a, b + 1), above(a, b + 1) != above(a + 1, b + 1));
            let left = (vert_id(a, b), above(a, b) != above(a, b + 1));
            let crossed: Vec<usize> = [bottom, right, top, left]
                .iter()
                .filter(|e| e.1)
                .map(|e| e.0)
                .collect();
            match crossed.len() {
                0 => {}
                2 => segments.push((crossed[0], crossed[1])),
                4 => {
                    let center =
                        (f(a, b) + f(a + 1, b) + f(a, b + 1) + f(a + 1, b + 1)) / 4.0;
                    if above(a, b) == (center > t) {
                        segments.push((bottom.0, right.0));
                        segments.push((top.0, left.0));
                    } else {
                        segments.push((bottom.0, left.0));
                        segments.push((right.0, top.0));
                    }
                }
                _ => unreachable!("marching squares cell with odd crossing count"),
            }
        }
    }
    if segments.is_empty() {
        return Err(Error::EmptyContour { level: t });
    }

    let chain = assemble_longest_chain(&segments);
    let mut vertices: Vec<[f64; 2]> = chain
        .into_iter()
        .map(|id| cross[&id])
        .map(|[u, v]| [u.max(t), v.max(t)])
        .collect();
    if vertices.first().unwrap()[1] < vertices.last().unwrap()[1] {
        vertices.reverse();
    }
    vertices.insert(0, [t, 1.0]);
    vertices.push([1.0, t]);
    PolygonChain::new(vertices, false)
}

/// Orders marching-squares segments into node chains and returns the longest.
fn assemble_longest_chain(segments: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(p, q) in segments {
        adj.entry(p).or_default().push(q);
        adj.entry(q).or_default().push(p);
    }
    let mut used: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut best: Vec<usize> = Vec::new();
    let mut starts: Vec<usize> = adj
        .iter()
        .filter(|(_, nb)| nb.len() == 1)
        .map(|(&id, _)| id)
        .collect();
    if starts.is_empty() {
        // Closed loop; start anywhere.
        starts = adj.keys().copied().collect();
    }
    starts.sort_unstable();
    for start in starts {
        let mut chain = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().copied().find(|&nb| {
                nb != prev
                    && !used
                        .get(&cur)
                        .map(|v| v.contains(&nb))
                        .unwrap_or(false)
            });
            match next {
                Some(nb) => {
                    used.entry(cur).or_default().push(nb);
                    used.entry(nb).or_default().push(cur);
                    chain.push(nb);
                    prev = cur;
                    cur = nb;
                    if cur == start {
                        break;
                    }
                }
                None => break,
            }
        }
        if chain.len() > best.len() {
            best = chain;
        }
    }
    best
}

/// Hausdorff distance between two chains: the larger directed distance,
/// where each directed pass takes the farthest vertex-to-chain distance and
/// chains are measured as unions of closed segments.
///
/// The directed pass uses an early-break scan (a vertex whose distance to
/// some segment is already below the running maximum cannot raise it),
/// resuming at the segment that last broke; the result is bitwise identical
/// to the brute-force double loop.
pub fn hausdorff_distance(a: &PolygonChain, b: &PolygonChain) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

fn directed_hausdorff(a: &PolygonChain, b: &PolygonChain) -> f64 {
    let segs = b.segments();
    let mut cmax = 0.0f64;
    let mut start = 0usize;
    for p in a.vertices() {
        let mut cmin = f64::INFINITY;
        let mut broke = false;
        for k in 0..segs.len() {
            let idx = (start + k) % segs.len();
            let d = point_segment_distance(*p, segs[idx].0, segs[idx].1);
            if d <= cmax {
                start = idx;
                broke = true;
                break;
            }
            if d < cmin {
                cmin = d;
            }
        }
        if !broke && cmin > cmax {
            cmax = cmin;
        }
    }
    cmax
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let ex = a[0] + t * dx - p[0];
    let ey = a[1] + t * dy - p[1];
    (ex * ex + ey * ey).sqrt()
}

/// Empirical copula diagonal `u -> C_n(u, ..., u)` on a grid.
pub fn empirical_diagonal(data_u: &SampleMatrix, u_grid: &[f64]) -> Result<DiagonalCurve> {
    let d = data_u.dim();
    if d < 2 {
        return Err(Error::unsupported(
            "the copula diagonal needs at least two columns",
        ));
    }
    if u_grid.is_empty() {
        return Err(Error::invalid("empty diagonal grid"));
    }
    for w in u_grid.windows(2) {
        if w[1] < w[0] {
            return Err(Error::invalid("diagonal grid must be sorted ascending"));
        }
    }
    if u_grid.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::invalid("diagonal grid values must lie in [0,1]"));
    }
    let n = data_u.n();
    let mut values = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        let mut count = 0usize;
        for i in 0..n {
            if (0..d).all(|j| data_u.get(i, j) <= u) {
                count += 1;
            }
        }
        values.push(count as f64 / n as f64);
    }
    Ok(DiagonalCurve {
        u_grid: u_grid.to_vec(),
        values,
    })
}
