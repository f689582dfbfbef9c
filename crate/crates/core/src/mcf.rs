//! Level-set mean curvature flow, the sign map it induces, nodal curves and
//! the masks that keep comparisons away from the interface.
//!
//! The level-set equation is `dw/dsigma = Δw - (∇w ⊗ ∇w : ∇²w) / |∇w|²`,
//! regularised by adding `delta_reg²` to the denominator and stepped
//! explicitly with central differences on the periodic grid.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};

/// `w` at logical time `sigma`, with its regularisation.
#[derive(Debug, Clone)]
pub struct LevelSetState {
    pub w: Field,
    pub sigma: f64,
    pub regularization: f64,
}

impl LevelSetState {
    /// Regularisation defaults to `factor * max |∇w|`.
    pub fn new(w: Field, sigma: f64, factor: f64) -> Result<Self> {
        if !(sigma >= 1.0) {
            return Err(invalid("sigma", format!("level-set time starts at 1, got {sigma}")));
        }
        if let Some(index) = w.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let regularization = factor * max_gradient(&w);
        Ok(Self {
            w,
            sigma,
            regularization,
        })
    }
}

/// Largest stable explicit step, `h² / (4d)`.
pub fn stability_limit(grid: &Grid) -> f64 {
    grid.spacing().powi(2) / (4.0 * grid.dim() as f64)
}

/// Periodic neighbour tables `(plus, minus)` for each axis.
fn neighbours(grid: &Grid) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n = grid.points_per_axis();
    let d = grid.dim();
    (0..d)
        .map(|axis| {
            let stride = n.pow((d - 1 - axis) as u32);
            let step = |p: usize, fwd: bool| {
                let j = (p / stride) % n;
                let base = p - j * stride;
                let k = if fwd { (j + 1) % n } else { (j + n - 1) % n };
                base + k * stride
            };
            let len = grid.len();
            ((0..len).map(|p| step(p, true)).collect(), (0..len).map(|p| step(p, false)).collect())
        })
        .collect()
}

fn max_gradient(w: &Field) -> f64 {
    let grid = w.grid();
    let nb = neighbours(grid);
    let v = w.values();
    let h2 = 2.0 * grid.spacing();
    (0..v.len())
        .map(|p| {
            nb.iter()
                .map(|(plus, minus)| ((v[plus[p]] - v[minus[p]]) / h2).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Explicit level-set stepper with cached neighbour tables.
struct LevelSetStepper {
    nb: Vec<(Vec<usize>, Vec<usize>)>,
    h: f64,
    limit: f64,
}

impl LevelSetStepper {
    fn new(grid: &Grid) -> Self {
        Self {
            nb: neighbours(grid),
            h: grid.spacing(),
            limit: stability_limit(grid),
        }
    }

    fn step(&self, v: &[f64], dsigma: f64, reg: f64, out: &mut Vec<f64>) {
        let d = self.nb.len();
        let (h, reg2) = (self.h, reg * reg);
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        out.clear();
        out.extend(v.iter().enumerate().map(|(p, &c)| {
            let mut lap = 0.0;
            for i in 0..d {
                let (pi, mi) = (&self.nb[i].0, &self.nb[i].1);
                grad[i] = (v[pi[p]] - v[mi[p]]) / (2.0 * h);
                let wii = (v[pi[p]] - 2.0 * c + v[mi[p]]) / (h * h);
                hess[i * d + i] = wii;
                lap += wii;
                for j in 0..i {
                    let (pj, mj) = (&self.nb[j].0, &self.nb[j].1);
                    let wij = (v[pj[pi[p]]] - v[mj[pi[p]]] - v[pj[mi[p]]] + v[mj[mi[p]]]) / (4.0 * h * h);
                    hess[i * d + j] = wij;
                    hess[j * d + i] = wij;
                }
            }
            let norm2: f64 = grad.iter().map(|g| g * g).sum();
            let denom = norm2 + reg2;
            let mut quad = 0.0;
            if denom > 0.0 {
                for i in 0..d {
                    for j in 0..d {
                        quad += grad[i] * grad[j] * hess[i * d + j];
                    }
                }
                quad /= denom;
            }
            c + dsigma * (lap - quad)
        }));
    }
}

/// One explicit step of the regularised level-set operator.
pub fn levelset_step(state: &LevelSetState, dsigma: f64) -> Result<LevelSetState> {
    let stepper = LevelSetStepper::new(state.w.grid());
    check_dsigma(dsigma, stepper.limit)?;
    let mut out = Vec::new();
    stepper.step(state.w.values(), dsigma, state.regularization, &mut out);
    Ok(LevelSetState {
        w: Field::new(state.w.grid().clone(), out, state.sigma + dsigma)?,
        sigma: state.sigma + dsigma,
        regularization: state.regularization,
    })
}

fn check_dsigma(dsigma: f64, limit: f64) -> Result<()> {
    if !(dsigma > 0.0 && dsigma <= limit * (1.0 + 1e-12)) {
        return Err(invalid(
            "dsigma",
            format!("must lie in (0, h^2/(4d) = {limit}], got {dsigma}"),
        ));
    }
    Ok(())
}

/// Level-set run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetConfig {
    /// Step size; defaults to the stability limit.
    pub dsigma: Option<f64>,
    /// Redistance every this many steps (0 disables). Only in d = 2.
    pub redistance_every: usize,
    /// `delta_reg = factor * max |∇w|`.
    pub regularization_factor: f64,
}

impl Default for LevelSetConfig {
    fn default() -> Self {
        Self {
            dsigma: None,
            redistance_every: 50,
            regularization_factor: 1e-8,
        }
    }
}

/// Width of the band kept by redistancing, in cells.
const REDISTANCE_CELLS: f64 = 6.0;

/// Evolve `w1` (taken at `sigma = 1`) and return `w` at each requested
/// `sigma`, stored in the field's time slot.
pub fn evolve_levelset(w1: &Field, sigmas: &[f64], cfg: &LevelSetConfig) -> Result<Vec<Field>> {
    if sigmas.iter().any(|s| !(*s >= 1.0 && s.is_finite())) {
        return Err(invalid("sigma_list", "values must be finite and >= 1"));
    }
    if sigmas.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("sigma_list", "values must be non-decreasing"));
    }
    let grid = w1.grid().clone();
    let stepper = LevelSetStepper::new(&grid);
    let dsigma = cfg.dsigma.unwrap_or(stepper.limit);
    check_dsigma(dsigma, stepper.limit)?;
    let redistance = cfg.redistance_every > 0 && grid.dim() == 2;
    let cap = REDISTANCE_CELLS * grid.spacing();

    let mut state = LevelSetState::new(w1.clone(), 1.0, cfg.regularization_factor)?;
    let mut v = state.w.values().to_vec();
    let mut next = Vec::with_capacity(v.len());
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(sigmas.len());
    for &target in sigmas {
        while state.sigma < target - 1e-12 {
            let h = dsigma.min(target - state.sigma);
            stepper.step(&v, h, state.regularization, &mut next);
            std::mem::swap(&mut v, &mut next);
            state.sigma = if target - state.sigma <= dsigma { target } else { state.sigma + h };
            steps += 1;
            if redistance && steps % cfg.redistance_every == 0 {
                let f = Field::from_parts(grid.clone(), v, state.sigma);
                let r = redistance_field(&f, cap)?;
                state.regularization = cfg.regularization_factor * max_gradient(&r);
                v = r.into_values();
            }
        }
        if let Some(index) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        out.push(Field::from_parts(grid.clone(), v.clone(), target));
    }
    Ok(out)
}

/// `sgn` with `sgn(0) = 0`.
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Pointwise sign of a field.
pub fn sign_field(f: &Field) -> Field {
    Field::from_parts(f.grid().clone(), f.values().iter().map(|&x| sgn(x)).collect(), f.time())
}

/// `v(f; sigma, ·) = sgn w(sigma, ·)` with `w(1) = clamp(f, -1, 1)`.
pub fn sign_map(f: &Field, sigmas: &[f64], cfg: &LevelSetConfig) -> Result<Vec<Field>> {
    let w1 = f.map(|x| x.clamp(-1.0, 1.0))?;
    Ok(evolve_levelset(&w1, sigmas, cfg)?.iter().map(sign_field).collect())
}

/// A closed chain of vertices on the torus. Consecutive vertices are
/// unwrapped, so a curve winding around the torus ends one period away from
/// its start.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub vertices: Vec<[f64; 2]>,
}

impl Polyline {
    /// Shoelace area (signed).
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }

    /// Length including the closing segment (wrapped).
    pub fn length(&self, grid: &Grid) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                grid.wrap_displacement(b[0] - a[0]).hypot(grid.wrap_displacement(b[1] - a[1]))
            })
            .sum()
    }

    /// Mean vertex position, unwrapped.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.vertices.len() as f64;
        let s = self.vertices.iter().fold([0.0, 0.0], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
        [s[0] / n, s[1] / n]
    }
}

/// Zero set of a 2-d field as closed polylines.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalSet {
    pub curves: Vec<Polyline>,
}

impl NodalSet {
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn total_length(&self, grid: &Grid) -> f64 {
        self.curves.iter().fold(0.0, |acc, c| acc + c.length(grid))
    }

    /// All segments, closing segments included.
    pub fn segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        let mut out = Vec::new();
        for c in &self.curves {
            let n = c.vertices.len();
            for i in 0..n {
                out.push((c.vertices[i], c.vertices[(i + 1) % n]));
            }
        }
        out
    }

    /// CSV with header `curve_id,vertex_index,x,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["curve_id", "vertex_index", "x", "y"]).map_err(csv_err)?;
        for (id, c) in self.curves.iter().enumerate() {
            for (k, v) in c.vertices.iter().enumerate() {
                wr.serialize((id, k, v[0], v[1])).map_err(csv_err)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Edge of the periodic lattice: `(i, j, axis)` joins `(i, j)` to the next
/// point along `axis`.
type EdgeKey = (usize, usize, u8);

/// Marching squares at level 0. A point counts as positive when its value is
/// `> 0`. Saddle cells join the two corners whose sign matches the cell
/// average.
pub fn extract_nodal(f: &Field) -> Result<NodalSet> {
    let grid = f.grid();
    if grid.dim() != 2 {
        return Err(invalid("field", format!("nodal extraction needs d = 2, got {}", grid.dim())));
    }
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let v = f.values();
    let at = |i: usize, j: usize| v[(i % n) * n + j % n];

    let mut points: HashMap<EdgeKey, [f64; 2]> = HashMap::new();
    let mut crossing = |key: EdgeKey| -> EdgeKey {
        points.entry(key).or_insert_with(|| {
            let (i, j, axis) = key;
            let (a, b) = if axis == 0 { (at(i, j), at(i + 1, j)) } else { (at(i, j), at(i, j + 1)) };
            let t = a / (a - b);
            let (x, y) = (grid.coordinate(i), grid.coordinate(j));
            if axis == 0 {
                [x + t * h, y]
            } else {
                [x, y + t * h]
            }
        });
        key
    };
    let mut adj: HashMap<EdgeKey, Vec<EdgeKey>> = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let pos = c.map(|x| x > 0.0);
            // Edges: 0 bottom (a-b), 1 right (b-c), 2 top (d-c), 3 left (a-d).
            let keys = [(i, j, 0u8), ((i + 1) % n, j, 1u8), (i, (j + 1) % n, 0u8), (i, j, 1u8)];
            let crosses = [pos[0] != pos[1], pos[1] != pos[2], pos[2] != pos[3], pos[3] != pos[0]];
            let hit: Vec<usize> = (0..4).filter(|&e| crosses[e]).collect();
            let pairs: Vec<(usize, usize)> = match hit.len() {
                0 => vec![],
                2 => vec![(hit[0], hit[1])],
                _ => {
                    let centre = c.iter().sum::<f64>() / 4.0 > 0.0;
                    if centre == pos[0] {
                        // a and c connected: cut off b and d
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
            };
            for (e1, e2) in pairs {
                let (k1, k2) = (crossing(keys[e1]), crossing(keys[e2]));
                adj.entry(k1).or_default().push(k2);
                adj.entry(k2).or_default().push(k1);
            }
        }
    }

    let mut keys: Vec<EdgeKey> = adj.keys().copied().collect();
    keys.sort_unstable();
    let mut used: HashMap<EdgeKey, bool> = HashMap::new();
    let mut curves = Vec::new();
    for start in keys {
        if used.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        used.insert(start, true);
        let mut prev = start;
        let mut cur = adj[&start][0];
        while cur != start {
            chain.push(cur);
            used.insert(cur, true);
            let nbrs = &adj[&cur];
            let next = if nbrs[0] == prev && nbrs.len() > 1 { nbrs[1] } else { nbrs[0] };
            prev = cur;
            cur = next;
        }
        let mut vertices = Vec::with_capacity(chain.len());
        let mut last = points[&chain[0]];
        for k in chain {
            let p = points[&k];
            let q = [
                last[0] + grid.wrap_displacement(p[0] - last[0]),
                last[1] + grid.wrap_displacement(p[1] - last[1]),
            ];
            vertices.push(q);
            last = q;
        }
        curves.push(Polyline { vertices });
    }
    Ok(NodalSet { curves })
}

fn segment_distance(grid: &Grid, p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ap = [grid.wrap_displacement(p[0] - a[0]), grid.wrap_displacement(p[1] - a[1])];
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

/// Torus distance from every grid point to the nodal set, exact below `cap`
/// and clamped to `cap` above it. Empty sets give `+inf`.
pub fn distance_field(grid: &Grid, nodal: &NodalSet, cap: f64) -> Result<Vec<f64>> {
    if grid.dim() != 2 {
        return Err(invalid("grid", "distance fields need d = 2"));
    }
    if !(cap > 0.0) {
        return Err(invalid("cap", format!("must be positive, got {cap}")));
    }
    let segs = nodal.segments();
    if segs.is_empty() {
        return Ok(vec![f64::INFINITY; grid.len()]);
    }
    let l = grid.extent();
    let size = cap + 2.0 * grid.spacing();
    let nb = ((l / size).floor() as usize).max(1);
    let bucket_of = |x: f64| (((x / l + 0.5).rem_euclid(1.0) * nb as f64) as usize).min(nb - 1);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nb * nb];
    for (s, (a, b)) in segs.iter().enumerate() {
        let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        buckets[bucket_of(m[0]) * nb + bucket_of(m[1])].push(s);
    }
    let reach: Vec<usize> = if nb < 3 { (0..nb).collect() } else { vec![nb - 1, 0, 1] };
    Ok((0..grid.len())
        .map(|p| {
            let x = grid.position(p);
            let pt = [x[0], x[1]];
            let (bi, bj) = (bucket_of(pt[0]), bucket_of(pt[1]));
            let mut best = cap;
            for &di in &reach {
                for &dj in &reach {
                    let (ci, cj) = if nb < 3 { (di, dj) } else { ((bi + di) % nb, (bj + dj) % nb) };
                    for &s in &buckets[ci * nb + cj] {
                        best = best.min(segment_distance(grid, pt, segs[s].0, segs[s].1));
                    }
                }
            }
            best
        })
        .collect())
}

/// Replace `w` by its signed distance to its own zero set, capped at `cap`.
pub fn redistance_field(w: &Field, cap: f64) -> Result<Field> {
    let nodal = extract_nodal(w)?;
    let dist = distance_field(w.grid(), &nodal, cap)?;
    let v = w.values().iter().zip(&dist).map(|(&x, &d)| sgn(x) * d.min(cap)).collect();
    Field::new(w.grid().clone(), v, w.time())
}

/// Spatial mask `K_delta^1 = {|x| <= 1/delta, d(x, Gamma_1) >= delta}`.
pub fn k_delta1_mask(grid: &Grid, gamma1: &NodalSet, delta: f64) -> Result<Vec<bool>> {
    check_delta(delta)?;
    let dist = distance_field(grid, gamma1, delta)?;
    Ok((0..grid.len())
        .map(|p| norm(&grid.position(p)) <= 1.0 / delta && dist[p] >= delta)
        .collect())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Space-time masks `K_delta` sampled at a list of `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskKDelta {
    pub delta: f64,
    pub sigmas: Vec<f64>,
    /// `masks[k][p]`: grid point `p` at `sigmas[k]`.
    pub masks: Vec<Vec<bool>>,
}

impl MaskKDelta {
    pub fn count(&self, k: usize) -> usize {
        self.masks[k].iter().filter(|&&b| b).count()
    }
}

/// `K_delta = {|(sigma, x)| <= 1/delta, sigma > 1 + delta, dist((sigma, x), Gamma) >= delta}`,
/// where `Gamma` is the space-time interface sampled by `trajectory`. The
/// trajectory should be sampled finely in `sigma` (spacing well below
/// `delta`) for the distance to be meaningful.
pub fn k_delta_masks(
    grid: &Grid,
    trajectory: &[(f64, NodalSet)],
    delta: f64,
    sigmas: &[f64],
) -> Result<MaskKDelta> {
    check_delta(delta)?;
    let dists: Vec<Vec<f64>> = trajectory
        .iter()
        .map(|(_, g)| distance_field(grid, g, delta))
        .collect::<Result<_>>()?;
    let masks = sigmas
        .iter()
        .map(|&s| {
            (0..grid.len())
                .map(|p| {
                    let x = grid.position(p);
                    let z = (s * s + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
                    if !(z <= 1.0 / delta && s > 1.0 + delta) {
                        return false;
                    }
                    trajectory.iter().zip(&dists).all(|((s2, _), d)| {
                        let dt = s - s2;
                        dt.abs() >= delta || (dt * dt + d[p] * d[p]).sqrt() >= delta
                    })
                })
                .collect()
        })
        .collect();
    Ok(MaskKDelta {
        delta,
        sigmas: sigmas.to_vec(),
        masks,
    })
}

/// Radius at time `sigma` of a circle of radius `r0` moving by curvature in
/// the plane, `sqrt(r0² - 2 sigma)`; `None` once it has vanished.
pub fn circle_oracle(r0: f64, sigma: f64) -> Result<Option<f64>> {
    if !(r0 > 0.0) {
        return Err(invalid("R0", format!("must be positive, got {r0}")));
    }
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", format!("must be >= 0, got {sigma}")));
    }
    let r2 = r0 * r0 - 2.0 * sigma;
    Ok(if r2 > 0.0 { Some(r2.sqrt()) } else { None })
}

/// Points with `|w| < h`, in units of interface cells (`length / h`).
/// Smooth fronts give about 2; a fattened zero set gives much more.
pub fn fattening_ratio(w: &Field, nodal: &NodalSet) -> f64 {
    let h = w.grid().spacing();
    let band = w.values().iter().filter(|x| x.abs() < h).count() as f64;
    let cells = nodal.total_length(w.grid()) / h;
    if cells == 0.0 {
        if band == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        band / cells
    }
}

/// Equivalent radius `sqrt(|area| / pi)` of the largest curve.
pub fn equivalent_radius(nodal: &NodalSet) -> Option<f64> {
    nodal
        .curves
        .iter()
        .map(|c| (c.area().abs() / std::f64::consts::PI).sqrt())
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cone(grid: &Grid, r0: f64, centre: [f64; 2]) -> Field {
        Field::from_fn(grid, 1.0, |x| {
            r0 - (grid.wrap_displacement(x[0] - centre[0])).hypot(grid.wrap_displacement(x[1] - centre[1]))
        })
        .unwrap()
    }

    #[test]
    fn constants_are_fixed() {
        let g = Grid::new(2, 16, 3.2).unwrap();
        let s = LevelSetState::new(Field::constant(&g, 0.7, 1.0), 1.0, 1e-8).unwrap();
        let next = levelset_step(&s, stability_limit(&g)).unwrap();
        assert!(next.w.values().iter().all(|&v| v == 0.7));
        assert!(levelset_step(&s, 1.01 * stability_limit(&g)).is_err());
        assert!(LevelSetState::new(Field::constant(&g, 0.7, 1.0), 0.5, 1e-8).is_err());
    }

    #[test]
    fn rotation_symmetry() {
        let g = Grid::new(2, 32, 6.4).unwrap();
        let w = Field::from_fn(&g, 1.0, |x| 2.0 - (x[0] * x[0] + x[1] * x[1] + 0.3 * x[0] * x[0] * x[1] * x[1]).sqrt())
            .unwrap();
        let mut s = LevelSetState::new(w, 1.0, 1e-8).unwrap();
        for _ in 0..20 {
            s = levelset_step(&s, stability_limit(&g)).unwrap();
        }
        let n = 32;
        let v = s.w.values();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                // 90 degree rotation about index n/2
                let (ri, rj) = ((n + n - j) % n, i);
                worst = worst.max((v[i * n + j] - v[ri * n + rj]).abs());
            }
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn circle_oracle_examples() {
        assert_eq!(circle_oracle(2.0, 0.0).unwrap(), Some(2.0));
        assert!((circle_oracle(2.0, 1.5).unwrap().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(circle_oracle(2.0, 2.0).unwrap(), None);
        assert!(circle_oracle(0.0, 1.0).is_err());
    }

    #[test]
    fn nodal_circle() {
        let g = Grid::new(2, 128, 6.4).unwrap();
        let r = 1.7;
        let f = Field::from_fn(&g, 0.0, |x| x[0] * x[0] + x[1] * x[1] - r * r).unwrap();
        let set = extract_nodal(&f).unwrap();
        assert_eq!(set.len(), 1);
        for v in &set.curves[0].vertices {
            assert!((v[0].hypot(v[1]) - r).abs() <= g.spacing());
        }
        assert!((equivalent_radius(&set).unwrap() - r).abs() < 0.01);
        assert!(extract_nodal(&Field::constant(&g, 1.0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn nodal_set_across_the_seam_and_winding() {
        let g = Grid::new(2, 64, 6.4).unwrap();
        // Circle centred on the corner of the periodic box.
        let f = cone(&g, 1.0, [3.2, 3.2]);
        let set = extract_nodal(&f).unwrap();
        assert_eq!(set.len(), 1);
        assert!((equivalent_radius(&set).unwrap() - 1.0).abs() < 0.02);
        // Two straight fronts winding around the torus.
        let stripes = Field::from_fn(&g, 0.0, |x| (x[0] * std::f64::consts::PI / 3.2).cos()).unwrap();
        let set = extract_nodal(&stripes).unwrap();
        assert_eq!(set.len(), 2);
        assert!((set.total_length(&g) - 12.8).abs() < 1e-9);
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("curve_id,vertex_index,x,y\n"));
        assert_eq!(text.lines().count(), 1 + 128);
    }

    #[test]
    fn saddle_rule_is_deterministic() {
        let g = Grid::new(2, 32, 6.4).unwrap();
        let f = Field::from_fn(&g, 0.0, |x| x[0] * x[1] + 0.01).unwrap();
        let a = extract_nodal(&f).unwrap();
        let b = extract_nodal(&f).unwrap();
        assert_eq!(a, b);
        for c in &a.curves {
            assert!(c.vertices.len() >= 3);
        }
    }

    #[test]
    fn shrinking_circle_follows_the_oracle() {
        let g = Grid::new(2, 128, 12.8).unwrap();
        let h = g.spacing();
        let r0 = 5.0;
        let sigmas = [2.0, 4.0, 7.0, 1.0 + 0.8 * 12.5];
        let ws = evolve_levelset(&cone(&g, r0, [0.0, 0.0]), &sigmas, &LevelSetConfig::default()).unwrap();
        for (w, s) in ws.iter().zip(sigmas) {
            let exact = circle_oracle(r0, s - 1.0).unwrap().unwrap();
            let got = equivalent_radius(&extract_nodal(w).unwrap()).unwrap();
            assert!((got - exact).abs() <= 2.0 * h, "sigma {s}: {got} vs {exact}");
        }
    }

    #[test]
    fn nested_circles_stay_nested() {
        let g = Grid::new(2, 64, 6.4).unwrap();
        let h = g.spacing();
        let sigmas = [1.5, 2.0, 2.5];
        let cfg = LevelSetConfig::default();
        let inner = evolve_levelset(&cone(&g, 1.5, [0.3, 0.0]), &sigmas, &cfg).unwrap();
        let outer = evolve_levelset(&cone(&g, 2.2, [0.0, 0.0]), &sigmas, &cfg).unwrap();
        for (a, b) in inner.iter().zip(&outer) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!(!(*x > h && *y <= 0.0));
            }
        }
    }

    #[test]
    fn concentric_annulus_inner_circle_vanishes() {
        let g = Grid::new(2, 64, 6.4).unwrap();
        let f = Field::from_fn(&g, 0.0, |x| {
            let r = x[0].hypot(x[1]);
            (r - 1.0) * (2.5 - r)
        })
        .unwrap();
        // Inner circle of radius 1 vanishes after sigma - 1 = 0.5.
        let v = sign_map(&f, &[1.0, 1.7], &LevelSetConfig::default()).unwrap();
        assert_eq!(v[0].values(), sign_field(&f).values());
        let centre = g.flatten(&[32, 32]);
        assert_eq!(v[0].values()[centre], -1.0);
        assert_eq!(v[1].values()[centre], 1.0);
    }

    #[test]
    fn single_signed_data_stays_single_signed() {
        let g = Grid::new(2, 32, 6.4).unwrap();
        let f = Field::from_fn(&g, 0.0, |x| 1.5 + x[0].sin() * x[1].cos()).unwrap();
        for v in sign_map(&f, &[1.0, 1.3], &LevelSetConfig::default()).unwrap() {
            assert!(v.values().iter().all(|&s| s == 1.0));
        }
    }

    #[test]
    fn sign_map_is_invariant_under_positive_reweighting() {
        let g = Grid::new(2, 64, 6.4).unwrap();
        let f = Field::from_fn(&g, 0.0, |x| (1.3 * x[0]).sin() + (0.9 * x[1]).cos() * 0.8 + 0.2).unwrap();
        let wgt = Field::from_fn(&g, 0.0, |x| 1.0 + 0.6 * (x[0] + 2.0 * x[1]).sin()).unwrap();
        let fg = Field::new(g.clone(), f.values().iter().zip(wgt.values()).map(|(a, b)| a * b).collect(), 0.0).unwrap();
        let cfg = LevelSetConfig::default();
        let sigmas = [1.2, 1.5];
        let (a, b) = (sign_map(&f, &sigmas, &cfg).unwrap(), sign_map(&fg, &sigmas, &cfg).unwrap());
        for (x, y) in a.iter().zip(&b) {
            let dist = distance_field(&g, &extract_nodal(x).unwrap(), 1.0).unwrap();
            for p in 0..g.len() {
                if dist[p] > 1.5 * g.spacing() {
                    assert_eq!(x.values()[p], y.values()[p]);
                }
            }
        }
    }

    #[test]
    fn no_fattening_for_smooth_curves() {
        let g = Grid::new(2, 64, 6.4).unwrap();
        let f = Field::from_fn(&g, 0.0, |x| (1.3 * x[0]).sin() + (0.9 * x[1]).cos() * 0.8 + 0.2).unwrap();
        let ws = evolve_levelset(&f.map(|x| x.clamp(-1.0, 1.0)).unwrap(), &[1.3], &LevelSetConfig::default()).unwrap();
        let r = fattening_ratio(&ws[0], &extract_nodal(&ws[0]).unwrap());
        assert!(r < 3.0, "{r}");
    }

    #[test]
    fn masks() {
        let g = Grid::new(2, 64, 6.4).unwrap();
        let empty = NodalSet { curves: vec![] };
        let k1 = k_delta1_mask(&g, &empty, 0.5).unwrap();
        for p in 0..g.len() {
            assert_eq!(k1[p], norm(&g.position(p)) <= 2.0);
        }
        let m = k_delta_masks(&g, &[(1.0, empty.clone()), (2.0, empty)], 0.5, &[1.2, 1.6]).unwrap();
        assert_eq!(m.count(0), 0);
        let inside = (0..g.len()).filter(|&p| 2.56 + norm(&g.position(p)).powi(2) <= 4.0).count();
        assert_eq!(m.count(1), inside);

        // Static unit circle: K^1 is the complement of the annulus 0.5 < r < 1.5.
        let unit = extract_nodal(&cone(&g, 1.0, [0.0, 0.0])).unwrap();
        let k1 = k_delta1_mask(&g, &unit, 0.5).unwrap();
        let h = g.spacing();
        for p in 0..g.len() {
            let r = norm(&g.position(p));
            if (r - 1.0).abs() < 0.5 - h {
                assert!(!k1[p]);
            }
            if (r - 1.0).abs() > 0.5 + h && r <= 2.0 {
                assert!(k1[p]);
            }
        }
        assert!(k_delta1_mask(&g, &unit, 1.0).is_err());
    }

    #[test]
    fn point_on_the_interface_is_excluded() {
        let g = Grid::new(2, 64, 6.4).unwrap();
        let line = Field::from_fn(&g, 0.0, |x| x[0] - 0.0).unwrap();
        let set = extract_nodal(&line).unwrap();
        let m = k_delta_masks(&g, &[(1.5, set)], 0.2, &[1.5]).unwrap();
        let on = g.flatten(&[32, 10]);
        assert!(g.position(on)[0].abs() < 1e-12);
        assert!(!m.masks[0][on]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn nodal_curves_are_closed_and_on_the_zero_set(seed in 0u64..1000) {
            let g = Grid::new(2, 32, 6.4).unwrap();
            let f = crate::spectral::gaussian_filter(&crate::random::sample_white_noise(&g, seed), 1.0, 0.3).unwrap();
            let set = extract_nodal(&f).unwrap();
            for c in &set.curves {
                prop_assert!(c.vertices.len() >= 3);
                for v in &c.vertices {
                    let val = f.interpolate(&[g.wrap_displacement(v[0]), g.wrap_displacement(v[1])]);
                    prop_assert!(val.abs() <= 0.25 * f.max_abs() + 1e-12);
                }
            }
        }
    }
}
