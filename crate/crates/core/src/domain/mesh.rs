//! Finite-volume meshes: radial shells, axisymmetric (r, θ) cells and
//! uniform tensor grids.
//!
//! Every mesh assembles the symmetric stiffness matrix `A` of `−Δ` (interior
//! couplings only) together with a lumped mass vector and a list of boundary
//! links. A link `(node, coef, point)` contributes `coef·(u_node − g(point))`
//! to the flux balance of `node`, so that `A u − Σ coef·g` is the weak form of
//! `−Δu` for a function with boundary values `g`.

use super::{DomainKind, DomainModel};
use crate::bubbles::sphere_area;
use crate::error::{invalid, Error, Result};
use crate::linalg::Csr;
use crate::quadrature::{integrate, QuadOptions};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// A refinement focus: spacing grows linearly away from `at` starting at `core`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Focus {
    pub at: f64,
    pub core: f64,
}

impl Focus {
    pub fn new(at: f64, core: f64) -> Self {
        Focus { at, core }
    }
}

/// Discretization recipe.
#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    /// Radial shells on a ball, graded toward the center and the wall.
    Radial { cells: usize, core: f64, wall: f64 },
    /// Cells in `(|x|, angle from the x₁ axis)` for data symmetric about the
    /// x₁ axis on a ball.
    Axisymmetric { radial_cells: usize, angular_cells: usize, radial_foci: Vec<Focus>, angular_foci: Vec<Focus> },
    /// Uniform tensor grid with `points_per_axis` interior points per axis.
    Tensor { points_per_axis: usize },
}

/// Symmetry assumed by a discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// Functions of `|x|` only.
    Radial,
    /// Functions of `(x₁, |x'|)`.
    Axial,
    /// No symmetry assumed.
    Full,
}

impl GridSpec {
    pub fn radial(cells: usize) -> Self {
        GridSpec::Radial { cells, core: 1e-6, wall: 1e-4 }
    }

    pub fn tensor(points_per_axis: usize) -> Self {
        GridSpec::Tensor { points_per_axis }
    }

    /// Axisymmetric grid refined around the on-axis point `x₁ = center` at
    /// length scale `scale`, and at the wall.
    pub fn axisymmetric_around(center: f64, scale: f64, radial_cells: usize, angular_cells: usize) -> Self {
        let c = center.abs();
        let mut radial_foci = vec![Focus::new(1.0, 1e-4)];
        let mut angular_foci = Vec::new();
        if c < 1e-12 {
            radial_foci.push(Focus::new(0.0, (scale * 1e-3).min(1e-5)));
        } else {
            radial_foci.push(Focus::new(c, scale * 0.05));
            radial_foci.push(Focus::new(0.0, 0.05 * c));
            let at = if center > 0.0 { 0.0 } else { PI };
            angular_foci.push(Focus::new(at, 0.05 * scale / c));
        }
        GridSpec::Axisymmetric { radial_cells, angular_cells, radial_foci, angular_foci }
    }

    pub fn symmetry(&self) -> Symmetry {
        match self {
            GridSpec::Radial { .. } => Symmetry::Radial,
            GridSpec::Axisymmetric { .. } => Symmetry::Axial,
            GridSpec::Tensor { .. } => Symmetry::Full,
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            GridSpec::Radial { .. } => "radial_1d",
            GridSpec::Axisymmetric { .. } => "axisym_2d",
            GridSpec::Tensor { .. } => "tensor_nd",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            GridSpec::Radial { cells, core, wall } => *cells >= 16 && *core > 0.0 && *wall > 0.0,
            GridSpec::Axisymmetric { radial_cells, angular_cells, radial_foci, angular_foci } => {
                *radial_cells >= 16
                    && *angular_cells >= 16
                    && radial_foci.iter().chain(angular_foci).all(|f| f.core > 0.0 && f.at.is_finite())
            }
            GridSpec::Tensor { points_per_axis } => *points_per_axis >= 16,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("grid '{self}' needs at least 16 points per axis and positive spacings")))
        }
    }
}

fn fmt_foci(f: &[Focus]) -> String {
    f.iter().map(|x| format!("{}@{}", x.at, x.core)).collect::<Vec<_>>().join("|")
}

fn parse_foci(s: &str) -> Option<Vec<Focus>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split('|')
        .map(|p| {
            let (a, c) = p.split_once('@')?;
            Some(Focus::new(a.parse().ok()?, c.parse().ok()?))
        })
        .collect()
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Radial { cells, core, wall } => write!(f, "radial:cells={cells}:core={core}:wall={wall}"),
            GridSpec::Axisymmetric { radial_cells, angular_cells, radial_foci, angular_foci } => write!(
                f,
                "axisym:nr={radial_cells}:nt={angular_cells}:rf={}:tf={}",
                fmt_foci(radial_foci),
                fmt_foci(angular_foci)
            ),
            GridSpec::Tensor { points_per_axis } => write!(f, "tensor:ppa={points_per_axis}"),
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cannot parse grid '{s}'"));
        let (mode, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(':').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            kv.insert(k, v);
        }
        let num = |k: &str| -> Result<usize> { kv.get(k).ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let real = |k: &str, default: f64| -> Result<f64> {
            kv.get(k).map_or(Ok(default), |v| v.parse().map_err(|_| bad()))
        };
        let g = match mode {
            "radial" | "radial_1d" => {
                GridSpec::Radial { cells: num("cells")?, core: real("core", 1e-6)?, wall: real("wall", 1e-4)? }
            }
            "axisym" | "axisym_2d" => GridSpec::Axisymmetric {
                radial_cells: num("nr")?,
                angular_cells: num("nt")?,
                radial_foci: parse_foci(kv.get("rf").copied().unwrap_or("")).ok_or_else(bad)?,
                angular_foci: parse_foci(kv.get("tf").copied().unwrap_or("")).ok_or_else(bad)?,
            },
            "tensor" | "tensor_nd" => GridSpec::Tensor { points_per_axis: num("ppa")? },
            _ => return Err(bad()),
        };
        g.validate()?;
        Ok(g)
    }
}

/// Cell faces on `[a, b]` whose spacing follows
/// `h(t) = min(cap, minₖ(coreₖ + |t − atₖ|·growth))`, rescaled to `cells` cells.
pub fn graded_faces(a: f64, b: f64, foci: &[Focus], cap: f64, cells: usize) -> Vec<f64> {
    const GROWTH: f64 = 0.25;
    let h = |t: f64| foci.iter().fold(cap, |m, f| m.min(f.core + GROWTH * (t - f.at).abs()));
    // March with sub-steps much smaller than the local spacing, accumulating
    // the stretched coordinate Φ(t) = ∫ dt / h.
    let mut ts = vec![a];
    let mut phi = vec![0.0];
    let mut t = a;
    while t < b {
        let step = (h(t) / 32.0).min(b - t);
        let t2 = if b - t - step < 1e-3 * step { b } else { t + step };
        let dphi = 0.5 * (t2 - t) * (1.0 / h(t) + 1.0 / h(t2));
        phi.push(phi.last().unwrap() + dphi);
        ts.push(t2);
        t = t2;
    }
    let total = *phi.last().unwrap();
    let mut faces = Vec::with_capacity(cells + 1);
    faces.push(a);
    let mut j = 0;
    for k in 1..cells {
        let target = total * k as f64 / cells as f64;
        while phi[j + 1] < target {
            j += 1;
        }
        let w = (target - phi[j]) / (phi[j + 1] - phi[j]);
        faces.push(ts[j] + w * (ts[j + 1] - ts[j]));
    }
    faces.push(b);
    faces
}

#[derive(Clone, Debug)]
enum Layout {
    Radial { faces: Vec<f64>, nodes: Vec<f64> },
    Axial { r_faces: Vec<f64>, r_nodes: Vec<f64>, t_faces: Vec<f64>, t_nodes: Vec<f64> },
    Tensor { dims: usize, npa: usize, lo: Vec<f64>, h: Vec<f64>, index: Vec<usize> },
}

/// A discretization of a domain.
#[derive(Clone, Debug)]
pub struct Mesh {
    domain: DomainModel,
    grid: GridSpec,
    coords: Vec<f64>,
    mass: Vec<f64>,
    stiffness: Csr,
    link_node: Vec<usize>,
    link_coef: Vec<f64>,
    link_point: Vec<f64>,
    layout: Layout,
}

const OUTSIDE: usize = usize::MAX;

impl Mesh {
    pub fn build(domain: &DomainModel, grid: &GridSpec) -> Result<Arc<Mesh>> {
        grid.validate()?;
        let m = match (grid, domain.kind()) {
            (GridSpec::Radial { cells, core, wall }, DomainKind::Ball { radius }) => {
                build_radial(domain, grid, *radius, *cells, *core, *wall)
            }
            (GridSpec::Axisymmetric { radial_cells, angular_cells, radial_foci, angular_foci }, DomainKind::Ball { radius }) => {
                if domain.n() < 3 {
                    return Err(invalid("axisymmetric grids need n ≥ 3"));
                }
                build_axial(domain, grid, *radius, *radial_cells, *angular_cells, radial_foci, angular_foci)?
            }
            (GridSpec::Tensor { points_per_axis }, _) => {
                if domain.n() > 3 {
                    return Err(Error::Unsupported("tensor grids are limited to n ≤ 3".into()));
                }
                build_tensor(domain, grid, *points_per_axis)
            }
            _ => return Err(Error::Unsupported(format!("grid {} on a {}", grid.mode_name(), domain.kind_name()))),
        };
        Ok(Arc::new(m))
    }

    pub fn domain(&self) -> &DomainModel {
        &self.domain
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.grid.symmetry()
    }

    /// Node coordinates in ℝⁿ (representative point for symmetric meshes).
    pub fn node(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.coords[i * n..(i + 1) * n]
    }

    /// Lumped mass (cell volume in ℝⁿ) per node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &Csr {
        &self.stiffness
    }

    /// Sample a function at the nodes.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.node(i))).collect()
    }

    /// Boundary contribution `Σ coef·g(point)` per node.
    pub fn boundary_load(&self, g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let n = self.n();
        let mut b = vec![0.0; self.len()];
        for (k, (&node, &c)) in self.link_node.iter().zip(&self.link_coef).enumerate() {
            b[node] += c * g(&self.link_point[k * n..(k + 1) * n]);
        }
        b
    }

    /// Weak `−Δu` of interior values `u` extended by boundary values `g`.
    pub fn weak_laplacian(&self, u: &[f64], g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.stiffness.apply(u, &mut out);
        for (o, b) in out.iter_mut().zip(self.boundary_load(g)) {
            *o -= b;
        }
        out
    }

    /// Whether the mesh can represent data centered at `xi`.
    pub fn supports_center(&self, xi: &[f64]) -> bool {
        match self.symmetry() {
            Symmetry::Full => true,
            Symmetry::Radial => xi.iter().all(|v| *v == 0.0),
            Symmetry::Axial => xi[1..].iter().all(|v| *v == 0.0),
        }
    }

    /// Local cell size around `x`.
    pub fn local_spacing(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.layout {
            Layout::Radial { faces, .. } => {
                let i = locate(faces, r);
                faces[i + 1] - faces[i]
            }
            Layout::Axial { r_faces, t_faces, .. } => {
                let i = locate(r_faces, r);
                let th = if r > 0.0 { (x[0] / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
                let j = locate(t_faces, th);
                (r_faces[i + 1] - r_faces[i]).max(r * (t_faces[j + 1] - t_faces[j]))
            }
            Layout::Tensor { h, .. } => h.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Evaluate the field with interior values `u` and boundary values `g` at `x`.
    pub fn interpolate(&self, u: &[f64], x: &[f64], g: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        if self.domain.signed_distance(x) < -1e-12 {
            return Err(Error::OutsideDomain);
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(match &self.layout {
            Layout::Radial { nodes, .. } => {
                let radius = self.domain.ball_radius().expect("ball");
                let mut bp = vec![0.0; self.n()];
                bp[0] = radius;
                radial_interp(nodes, u, r, radius, g(&bp))
            }
            Layout::Axial { r_nodes, t_nodes, .. } => {
                let radius = self.domain.ball_radius().expect("ball");
                let th = if r > 0.0 { (x[0] / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
                let nt = t_nodes.len();
                let ring = |i: usize| -> f64 { angular_interp(t_nodes, &u[i * nt..(i + 1) * nt], th) };
                let nr = r_nodes.len();
                if r <= r_nodes[0] {
                    ring(0)
                } else if r >= r_nodes[nr - 1] {
                    let mut bp = vec![0.0; self.n()];
                    bp[0] = radius * th.cos();
                    bp[1] = radius * th.sin();
                    let w = (r - r_nodes[nr - 1]) / (radius - r_nodes[nr - 1]);
                    (1.0 - w) * ring(nr - 1) + w * g(&bp)
                } else {
                    let i = locate(r_nodes, r);
                    let w = (r - r_nodes[i]) / (r_nodes[i + 1] - r_nodes[i]);
                    (1.0 - w) * ring(i) + w * ring(i + 1)
                }
            }
            Layout::Tensor { dims, npa, lo, h, index } => {
                let d = *dims;
                let npa = *npa as isize;
                let mut base = vec![0isize; d];
                let mut frac = vec![0.0; d];
                for a in 0..d {
                    let s = (x[a] - lo[a]) / h[a] - 1.0;
                    let b = (s.floor() as isize).clamp(-1, npa - 1);
                    base[a] = b;
                    frac[a] = (s - b as f64).clamp(0.0, 1.0);
                }
                let mut acc = 0.0;
                for corner in 0..(1usize << d) {
                    let mut w = 1.0;
                    let mut p = vec![0.0; d];
                    let mut flat = 0usize;
                    let mut inside = true;
                    for a in 0..d {
                        let bit = ((corner >> a) & 1) as isize;
                        let idx = base[a] + bit;
                        w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                        p[a] = lo[a] + (idx + 1) as f64 * h[a];
                        if idx < 0 || idx >= npa {
                            inside = false;
                        } else {
                            flat = flat * npa as usize + idx as usize;
                        }
                    }
                    if w == 0.0 {
                        continue;
                    }
                    let v = if inside && index[flat] != OUTSIDE {
                        u[index[flat]]
                    } else {
                        g(&self.project_to_boundary(&p))
                    };
                    acc += w * v;
                }
                acc
            }
        })
    }

    fn project_to_boundary(&self, p: &[f64]) -> Vec<f64> {
        match self.domain.kind() {
            DomainKind::Ball { radius } => {
                let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r == 0.0 {
                    let mut q = vec![0.0; p.len()];
                    q[0] = *radius;
                    q
                } else {
                    p.iter().map(|v| v * radius / r).collect()
                }
            }
            DomainKind::Box { extents } => {
                p.iter().zip(extents).map(|(&v, &(a, b))| v.clamp(a, b)).collect()
            }
        }
    }
}

/// Index `i` with `xs[i] ≤ t < xs[i+1]`, clamped to valid cells.
fn locate(xs: &[f64], t: f64) -> usize {
    let k = xs.partition_point(|v| *v <= t);
    k.saturating_sub(1).min(xs.len() - 2)
}

fn radial_interp(nodes: &[f64], u: &[f64], r: f64, radius: f64, gb: f64) -> f64 {
    let m = nodes.len();
    if r <= nodes[0] {
        // Even extension: u ≈ A + B r².
        let (r0, r1) = (nodes[0], nodes[1]);
        let b = (u[1] - u[0]) / (r1 * r1 - r0 * r0);
        return u[0] + b * (r * r - r0 * r0);
    }
    if r >= nodes[m - 1] {
        let w = (r - nodes[m - 1]) / (radius - nodes[m - 1]);
        return (1.0 - w) * u[m - 1] + w * gb;
    }
    let i = locate(nodes, r);
    let w = (r - nodes[i]) / (nodes[i + 1] - nodes[i]);
    (1.0 - w) * u[i] + w * u[i + 1]
}

fn angular_interp(t: &[f64], u: &[f64], th: f64) -> f64 {
    let m = t.len();
    if th <= t[0] {
        let b = (u[1] - u[0]) / (t[1] * t[1] - t[0] * t[0]);
        return u[0] + b * (th * th - t[0] * t[0]);
    }
    if th >= t[m - 1] {
        let (s0, s1) = (PI - t[m - 1], PI - t[m - 2]);
        let s = PI - th;
        let b = (u[m - 2] - u[m - 1]) / (s1 * s1 - s0 * s0);
        return u[m - 1] + b * (s * s - s0 * s0);
    }
    let i = locate(t, th);
    let w = (th - t[i]) / (t[i + 1] - t[i]);
    (1.0 - w) * u[i] + w * u[i + 1]
}

struct Assembly {
    trip: Vec<(usize, usize, f64)>,
    link_node: Vec<usize>,
    link_coef: Vec<f64>,
    link_point: Vec<f64>,
}

impl Assembly {
    fn new() -> Self {
        Assembly { trip: Vec::new(), link_node: Vec::new(), link_coef: Vec::new(), link_point: Vec::new() }
    }
    fn couple(&mut self, i: usize, j: usize, c: f64) {
        self.trip.push((i, i, c));
        self.trip.push((j, j, c));
        self.trip.push((i, j, -c));
        self.trip.push((j, i, -c));
    }
    fn wall(&mut self, i: usize, c: f64, point: &[f64]) {
        self.trip.push((i, i, c));
        self.link_node.push(i);
        self.link_coef.push(c);
        self.link_point.extend_from_slice(point);
    }
}

fn build_radial(domain: &DomainModel, grid: &GridSpec, radius: f64, cells: usize, core: f64, wall: f64) -> Mesh {
    let n = domain.n();
    let s = sphere_area(n);
    let nf = n as f64;
    let faces = graded_faces(
        0.0,
        radius,
        &[Focus::new(0.0, core * radius), Focus::new(radius, wall * radius)],
        radius / 12.0,
        cells,
    );
    let nodes: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mass: Vec<f64> = faces.windows(2).map(|w| s * (w[1].powf(nf) - w[0].powf(nf)) / nf).collect();
    let mut asm = Assembly::new();
    for i in 0..cells - 1 {
        asm.couple(i, i + 1, s * faces[i + 1].powf(nf - 1.0) / (nodes[i + 1] - nodes[i]));
    }
    let mut bp = vec![0.0; n];
    bp[0] = radius;
    asm.wall(cells - 1, s * radius.powf(nf - 1.0) / (radius - nodes[cells - 1]), &bp);
    let mut coords = vec![0.0; cells * n];
    for (i, r) in nodes.iter().enumerate() {
        coords[i * n] = *r;
    }
    Mesh {
        domain: domain.clone(),
        grid: grid.clone(),
        coords,
        mass,
        stiffness: Csr::from_triplets(cells, asm.trip),
        link_node: asm.link_node,
        link_coef: asm.link_coef,
        link_point: asm.link_point,
        layout: Layout::Radial { faces, nodes },
    }
}

fn build_axial(
    domain: &DomainModel,
    grid: &GridSpec,
    radius: f64,
    nr: usize,
    nt: usize,
    radial_foci: &[Focus],
    angular_foci: &[Focus],
) -> Result<Mesh> {
    let n = domain.n();
    let nf = n as f64;
    let sa = sphere_area(n - 1);
    let rf: Vec<Focus> = radial_foci.iter().map(|f| Focus::new(f.at * radius, f.core * radius)).collect();
    let r_faces = graded_faces(0.0, radius, &rf, radius / 10.0, nr);
    let t_faces = graded_faces(0.0, PI, angular_foci, PI / 12.0, nt);
    let r_nodes: Vec<f64> = r_faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let t_nodes: Vec<f64> = t_faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let sin_pow = |t: f64| t.sin().max(0.0).powf(nf - 2.0);
    let mut wt = Vec::with_capacity(nt);
    for w in t_faces.windows(2) {
        let v = if n == 3 {
            w[0].cos() - w[1].cos()
        } else {
            integrate(sin_pow, w[0], w[1], QuadOptions::rel(1e-13))?.value
        };
        wt.push(v);
    }
    let er: Vec<f64> = r_faces.windows(2).map(|w| (w[1].powf(nf - 2.0) - w[0].powf(nf - 2.0)) / (nf - 2.0)).collect();
    let len = nr * nt;
    let idx = |i: usize, j: usize| i * nt + j;
    let mut mass = vec![0.0; len];
    let mut coords = vec![0.0; len * n];
    let mut asm = Assembly::new();
    for i in 0..nr {
        let shell = (r_faces[i + 1].powf(nf) - r_faces[i].powf(nf)) / nf;
        for j in 0..nt {
            let k = idx(i, j);
            mass[k] = sa * shell * wt[j];
            coords[k * n] = r_nodes[i] * t_nodes[j].cos();
            coords[k * n + 1] = r_nodes[i] * t_nodes[j].sin();
            if i + 1 < nr {
                asm.couple(k, idx(i + 1, j), sa * r_faces[i + 1].powf(nf - 1.0) * wt[j] / (r_nodes[i + 1] - r_nodes[i]));
            } else {
                let mut bp = vec![0.0; n];
                bp[0] = radius * t_nodes[j].cos();
                bp[1] = radius * t_nodes[j].sin();
                asm.wall(k, sa * radius.powf(nf - 1.0) * wt[j] / (radius - r_nodes[i]), &bp);
            }
            if j + 1 < nt {
                asm.couple(k, idx(i, j + 1), sa * er[i] * sin_pow(t_faces[j + 1]) / (t_nodes[j + 1] - t_nodes[j]));
            }
        }
    }
    Ok(Mesh {
        domain: domain.clone(),
        grid: grid.clone(),
        coords,
        mass,
        stiffness: Csr::from_triplets(len, asm.trip),
        link_node: asm.link_node,
        link_coef: asm.link_coef,
        link_point: asm.link_point,
        layout: Layout::Axial { r_faces, r_nodes, t_faces, t_nodes },
    })
}

fn build_tensor(domain: &DomainModel, grid: &GridSpec, npa: usize) -> Mesh {
    let d = domain.n();
    let (lo, hi): (Vec<f64>, Vec<f64>) = match domain.kind() {
        DomainKind::Ball { radius } => (vec![-radius; d], vec![*radius; d]),
        DomainKind::Box { extents } => extents.iter().copied().unzip(),
    };
    let h: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / (npa + 1) as f64).collect();
    let total = npa.pow(d as u32);
    let unflat = |mut f: usize| -> Vec<usize> {
        let mut m = vec![0; d];
        for a in (0..d).rev() {
            m[a] = f % npa;
            f /= npa;
        }
        m
    };
    let point = |m: &[usize]| -> Vec<f64> { (0..d).map(|a| lo[a] + (m[a] + 1) as f64 * h[a]).collect() };
    let ball = domain.ball_radius();
    let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
    let mut index = vec![OUTSIDE; total];
    let mut count = 0;
    for (f, slot) in index.iter_mut().enumerate() {
        let p = point(&unflat(f));
        if domain.signed_distance(&p) > 1e-9 * hmin {
            *slot = count;
            count += 1;
        }
    }
    let vol: f64 = h.iter().product();
    let mut coords = vec![0.0; count * d];
    let mut mass = vec![vol; count];
    let mut asm = Assembly::new();
    for f in 0..total {
        let k = index[f];
        if k == OUTSIDE {
            continue;
        }
        let m = unflat(f);
        let p = point(&m);
        coords[k * d..(k + 1) * d].copy_from_slice(&p);
        for a in 0..d {
            let area = vol / h[a];
            for dir in [-1isize, 1] {
                let j = m[a] as isize + dir;
                let neighbor = if j >= 0 && (j as usize) < npa {
                    let mut m2 = m.clone();
                    m2[a] = j as usize;
                    let f2 = m2.iter().fold(0, |acc, v| acc * npa + v);
                    index[f2]
                } else {
                    OUTSIDE
                };
                if neighbor != OUTSIDE {
                    if dir == 1 {
                        asm.couple(k, neighbor, area / h[a]);
                    }
                    continue;
                }
                // Boundary crossing along the axis at fraction θ of a cell.
                let s = dir as f64;
                let t = match ball {
                    Some(rad) => {
                        let r2: f64 = p.iter().map(|v| v * v).sum();
                        -s * p[a] + (p[a] * p[a] - (r2 - rad * rad)).sqrt()
                    }
                    None => h[a],
                };
                let theta = (t / h[a]).clamp(1e-3, 1.0);
                let mut bp = p.clone();
                bp[a] += s * t;
                asm.wall(k, area / (theta * h[a]), &bp);
            }
        }
        if ball.is_some() {
            // Lumped mass of cut cells is left at the full cell volume.
            mass[k] = vol;
        }
    }
    Mesh {
        domain: domain.clone(),
        grid: grid.clone(),
        coords,
        mass,
        stiffness: Csr::from_triplets(count, asm.trip),
        link_node: asm.link_node,
        link_coef: asm.link_coef,
        link_point: asm.link_point,
        layout: Layout::Tensor { dims: d, npa, lo, h, index },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_faces_are_monotone_and_refined() {
        let f = graded_faces(0.0, 1.0, &[Focus::new(0.0, 1e-6), Focus::new(1.0, 1e-4)], 0.1, 200);
        assert_eq!(f.len(), 201);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert!(f[1] < 1e-4);
        assert!(1.0 - f[199] < 1e-3);
    }

    #[test]
    fn grid_spec_roundtrip() {
        for g in [
            GridSpec::radial(400),
            GridSpec::tensor(32),
            GridSpec::axisymmetric_around(0.5, 0.1, 120, 60),
        ] {
            let back: GridSpec = g.to_string().parse().unwrap();
            assert_eq!(back, g);
        }
        assert!("tensor:ppa=8".parse::<GridSpec>().is_err());
        assert!("hex:ppa=8".parse::<GridSpec>().is_err());
    }

    #[test]
    fn volumes_add_up() {
        for n in [3, 4, 5] {
            let d = DomainModel::unit_ball(n).unwrap();
            let vol = sphere_area(n) / n as f64;
            let m = Mesh::build(&d, &GridSpec::radial(100)).unwrap();
            let total: f64 = m.mass().iter().sum();
            assert!((total - vol).abs() < 1e-12 * vol);
            let m = Mesh::build(&d, &GridSpec::axisymmetric_around(0.3, 0.1, 40, 30)).unwrap();
            let total: f64 = m.mass().iter().sum();
            assert!((total - vol).abs() < 1e-10 * vol, "n={n} {total} {vol}");
        }
    }

    #[test]
    fn constants_are_in_the_kernel() {
        // A constant extended by the same boundary constant has zero Laplacian.
        let ball = DomainModel::unit_ball(3).unwrap();
        let cube = DomainModel::unit_cube(3).unwrap();
        for (d, g) in [
            (&ball, GridSpec::radial(64)),
            (&ball, GridSpec::axisymmetric_around(0.0, 0.1, 32, 24)),
            (&ball, GridSpec::tensor(16)),
            (&cube, GridSpec::tensor(16)),
        ] {
            let m = Mesh::build(d, &g).unwrap();
            let u = vec![2.5; m.len()];
            let r = m.weak_laplacian(&u, |_| 2.5);
            let scale: f64 = m.stiffness().diagonal().iter().fold(0.0, |a, b| a.max(*b));
            assert!(r.iter().all(|v| v.abs() < 1e-11 * scale), "{g}");
        }
    }

    #[test]
    fn interpolation_reproduces_nodes_and_boundary() {
        let d = DomainModel::unit_ball(3).unwrap();
        let m = Mesh::build(&d, &GridSpec::axisymmetric_around(0.4, 0.1, 40, 32)).unwrap();
        let f = |x: &[f64]| 1.0 + x[0] + 0.5 * (x[1] * x[1] + x[2] * x[2]);
        let u = m.sample(f);
        for i in (0..m.len()).step_by(97) {
            let v = m.interpolate(&u, m.node(i), &f).unwrap();
            assert!((v - u[i]).abs() < 1e-12);
        }
        let v = m.interpolate(&u, &[0.0, 1.0, 0.0], &f).unwrap();
        assert!((v - f(&[0.0, 1.0, 0.0])).abs() < 1e-12);
        assert!(m.interpolate(&u, &[2.0, 0.0, 0.0], &f).is_err());
    }
}
