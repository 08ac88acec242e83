//! Parameter-plane sweeps, boundary extraction and scaling-collapse data.
//!
//! Sweep coordinates are reduced: ω in units of Ω and g in units of g_s,
//! with Ω = 1. Cells are stored row-major with the x axis varying fastest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::observables::{analyze, GroundStateAnalysis};
use crate::{Error, ModelParams, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    G,
    Lambda,
    Chi,
    Omega,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::G => "g",
            Param::Lambda => "lambda",
            Param::Chi => "chi",
            Param::Omega => "omega",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "g" => Ok(Param::G),
            "lambda" => Ok(Param::Lambda),
            "chi" => Ok(Param::Chi),
            "omega" => Ok(Param::Omega),
            other => Err(Error::InvalidGrid(format!("unknown parameter '{other}'"))),
        }
    }
}

/// Parameters in reduced units: `omega` = ω/Ω, `g` = g/g_s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub omega: f64,
    pub g: f64,
    pub lambda: f64,
    pub chi: f64,
}

impl ReducedParams {
    pub fn to_params(&self) -> Result<ModelParams> {
        ModelParams::scaled(self.omega, self.g, self.lambda, self.chi)
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::G => self.g,
            Param::Lambda => self.lambda,
            Param::Chi => self.chi,
            Param::Omega => self.omega,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::G => self.g = v,
            Param::Lambda => self.lambda = v,
            Param::Chi => self.chi = v,
            Param::Omega => self.omega = v,
        }
    }

    fn lerp(&self, other: &ReducedParams, t: f64) -> ReducedParams {
        let l = |a: f64, b: f64| a + t * (b - a);
        ReducedParams {
            omega: l(self.omega, other.omega),
            g: l(self.g, other.g),
            lambda: l(self.lambda, other.lambda),
            chi: l(self.chi, other.chi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub param: Param,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisSpec {
    pub fn new(param: Param, min: f64, max: f64, steps: usize) -> Self {
        AxisSpec {
            param,
            min,
            max,
            steps,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.steps {
            return self.max;
        }
        self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }
}

/// Parses `param:min:max:steps`.
impl FromStr for AxisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidGrid(format!(
                "axis '{s}' is not of the form param:min:max:steps"
            )));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidGrid(format!("'{t}' is not a number")))
        };
        let steps = parts[3]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidGrid(format!("'{}' is not a step count", parts[3])))?;
        Ok(AxisSpec::new(
            parts[0].parse()?,
            num(parts[1])?,
            num(parts[2])?,
            steps,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_axis: AxisSpec,
    pub y_axis: AxisSpec,
    /// Values of the parameters not swept.
    pub fixed: ReducedParams,
    /// Truncation convergence tolerance in units of Ω.
    pub tol: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for a in [&self.x_axis, &self.y_axis] {
            if a.steps < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {} needs at least 2 steps",
                    a.param
                )));
            }
            if !(a.min.is_finite() && a.max.is_finite() && a.max > a.min) {
                return Err(Error::InvalidGrid(format!(
                    "axis {} range [{}, {}] is empty",
                    a.param, a.min, a.max
                )));
            }
        }
        if self.x_axis.param == self.y_axis.param {
            return Err(Error::InvalidGrid(
                "both axes sweep the same parameter".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "tolerance {} must be positive",
                self.tol
            )));
        }
        for ix in [0, self.x_axis.steps - 1] {
            for iy in [0, self.y_axis.steps - 1] {
                self.point(ix, iy).to_params()?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x_axis.steps * self.y_axis.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, ix: usize, iy: usize) -> ReducedParams {
        let mut p = self.fixed;
        p.set(self.x_axis.param, self.x_axis.value(ix));
        p.set(self.y_axis.param, self.y_axis.value(iy));
        p
    }

    fn coords(&self, p: &ReducedParams) -> [f64; 2] {
        [p.get(self.x_axis.param), p.get(self.y_axis.param)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub analysis: Option<GroundStateAnalysis>,
    /// Set when the analysis failed; the cell is then ignored by boundary detection.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    GapMin,
    ParityFlip,
    NodeJumpWithParity,
    NodeJumpWithoutParity,
    SxSign,
    ZetaOne,
    SecondOrderOnset,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 7] = [
        BoundaryKind::GapMin,
        BoundaryKind::ParityFlip,
        BoundaryKind::NodeJumpWithParity,
        BoundaryKind::NodeJumpWithoutParity,
        BoundaryKind::SxSign,
        BoundaryKind::ZetaOne,
        BoundaryKind::SecondOrderOnset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::GapMin => "gap_min",
            BoundaryKind::ParityFlip => "parity_flip",
            BoundaryKind::NodeJumpWithParity => "node_jump_with_parity",
            BoundaryKind::NodeJumpWithoutParity => "node_jump_without_parity",
            BoundaryKind::SxSign => "sx_sign",
            BoundaryKind::ZetaOne => "zeta_one",
            BoundaryKind::SecondOrderOnset => "second_order_onset",
        }
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundaryKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidGrid(format!("unknown boundary kind '{s}'")))
    }
}

/// A boundary polyline in (x-axis, y-axis) parameter coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub kind: BoundaryKind,
    pub points: Vec<[f64; 2]>,
}

/// A point where a conventional and an unconventional node boundary meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub x: f64,
    pub y: f64,
    /// False when the line fit failed and the point is the centre of the
    /// junction squares.
    pub fitted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOptions {
    /// Threshold on ⟨x²⟩/x_s² that locates the second-order onset.
    pub onset_threshold: f64,
    /// Largest gap, in units of Ω, still reported as a gap minimum.
    pub gap_ceiling: f64,
    pub bisection_steps: usize,
    pub kinds: Vec<BoundaryKind>,
    pub parallelism: usize,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions {
            onset_threshold: 0.1,
            gap_ceiling: 0.02,
            bisection_steps: 20,
            kinds: BoundaryKind::ALL.to_vec(),
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub spec: GridSpec,
    pub cells: Vec<Cell>,
    pub boundaries: Vec<Boundary>,
    pub junctions: Vec<Junction>,
    pub boundary_options: Option<BoundaryOptions>,
}

impl PhaseDiagram {
    pub fn cell(&self, ix: usize, iy: usize) -> &Cell {
        &self.cells[iy * self.spec.x_axis.steps + ix]
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.analysis.is_none()).count()
    }

    pub fn boundaries_of(&self, kind: BoundaryKind) -> impl Iterator<Item = &Boundary> {
        self.boundaries.iter().filter(move |b| b.kind == kind)
    }
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))
}

fn analyze_reduced(p: &ReducedParams, tol: f64) -> Result<GroundStateAnalysis> {
    analyze(&p.to_params()?, tol)
}

/// Runs [`analyze`] on every cell. The result does not depend on
/// `parallelism`: cells are keyed by index.
pub fn run_sweep(spec: &GridSpec, parallelism: usize) -> Result<PhaseDiagram> {
    spec.validate()?;
    let nx = spec.x_axis.steps;
    let cells = pool(parallelism)?.install(|| {
        (0..spec.len())
            .into_par_iter()
            .map(|k| {
                let (ix, iy) = (k % nx, k / nx);
                let p = spec.point(ix, iy);
                let [x, y] = spec.coords(&p);
                let (analysis, error) = match analyze_reduced(&p, spec.tol) {
                    Ok(a) => (Some(a), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                Cell {
                    ix,
                    iy,
                    x,
                    y,
                    analysis,
                    error,
                }
            })
            .collect()
    });
    Ok(PhaseDiagram {
        spec: *spec,
        cells,
        boundaries: Vec::new(),
        junctions: Vec::new(),
        boundary_options: None,
    })
}

/// One-parameter scan. Cells have `iy = 0` and `y = 0`.
pub fn run_scan(
    axis: &AxisSpec,
    fixed: ReducedParams,
    tol: f64,
    parallelism: usize,
) -> Result<Vec<Cell>> {
    if axis.steps < 2 || !(axis.max > axis.min) {
        return Err(Error::InvalidGrid(format!(
            "axis {} needs at least 2 steps on a nonempty range",
            axis.param
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let point = |i: usize| {
        let mut p = fixed;
        p.set(axis.param, axis.value(i));
        p
    };
    point(0).to_params()?;
    point(axis.steps - 1).to_params()?;
    Ok(pool(parallelism)?.install(|| {
        (0..axis.steps)
            .into_par_iter()
            .map(|ix| {
                let p = point(ix);
                let (analysis, error) = match analyze_reduced(&p, tol) {
                    Ok(a) => (Some(a), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                Cell {
                    ix,
                    iy: 0,
                    x: p.get(axis.param),
                    y: 0.0,
                    analysis,
                    error,
                }
            })
            .collect()
    }))
}

/// Edge between two neighbouring cells: horizontal edges join (ix, iy) and
/// (ix+1, iy), vertical ones (ix, iy) and (ix, iy+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Edge {
    ix: usize,
    iy: usize,
    vertical: bool,
}

impl Edge {
    fn far(&self) -> (usize, usize) {
        if self.vertical {
            (self.ix, self.iy + 1)
        } else {
            (self.ix + 1, self.iy)
        }
    }
}

fn sx_sign(a: &GroundStateAnalysis) -> i64 {
    if a.mean_sx >= 0.0 {
        1
    } else {
        -1
    }
}

fn order_parameter(a: &GroundStateAnalysis) -> f64 {
    // ⟨x²⟩/x_s² with x_s² = Ω/2ω
    a.mean_x2 * 2.0 * a.params.omega / a.params.splitting
}

/// Discrete label used to refine a boundary of the given kind.
fn label(kind: BoundaryKind, a: &GroundStateAnalysis) -> i64 {
    match kind {
        BoundaryKind::ParityFlip => a.parity as i64,
        BoundaryKind::NodeJumpWithParity | BoundaryKind::NodeJumpWithoutParity => a.n_z as i64,
        BoundaryKind::SxSign => sx_sign(a),
        _ => 0,
    }
}

fn discrete_kinds(a: &GroundStateAnalysis, b: &GroundStateAnalysis) -> Vec<BoundaryKind> {
    let mut out = Vec::new();
    let parity = a.parity != b.parity;
    if parity {
        out.push(BoundaryKind::ParityFlip);
    }
    if a.n_z != b.n_z {
        out.push(if parity {
            BoundaryKind::NodeJumpWithParity
        } else {
            BoundaryKind::NodeJumpWithoutParity
        });
    }
    if sx_sign(a) != sx_sign(b) {
        out.push(BoundaryKind::SxSign);
    }
    out
}

/// Bisection on a discrete label between two parameter points whose labels
/// differ; returns the fractional position of the change.
fn bisect_label(
    kind: BoundaryKind,
    pa: &ReducedParams,
    pb: &ReducedParams,
    la: i64,
    steps: usize,
    tol: f64,
) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        match analyze_reduced(&pa.lerp(pb, mid), tol) {
            Ok(a) if label(kind, &a) == la => lo = mid,
            Ok(_) => hi = mid,
            Err(_) => break,
        }
    }
    0.5 * (lo + hi)
}

/// Fractional position of the gap minimum from a V-shaped fit
/// Δ = k|s − s*| through samples at −1 and +1 (in units of the spacing).
fn v_minimum(left: f64, right: f64) -> f64 {
    if left + right <= 0.0 {
        return 0.0;
    }
    ((left - right) / (left + right)).clamp(-0.5, 0.5)
}

struct EdgeJob {
    edge: Edge,
    kind: BoundaryKind,
}

/// Adds boundary polylines and quadruple junctions to a completed sweep.
pub fn detect_boundaries(
    mut diagram: PhaseDiagram,
    opts: &BoundaryOptions,
) -> Result<PhaseDiagram> {
    let spec = diagram.spec;
    let (nx, ny) = (spec.x_axis.steps, spec.y_axis.steps);
    let wanted: BTreeSet<BoundaryKind> = opts.kinds.iter().copied().collect();
    let ok = |ix: usize, iy: usize| diagram.cell(ix, iy).analysis.as_ref();

    let mut edges = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            if ix + 1 < nx {
                edges.push(Edge {
                    ix,
                    iy,
                    vertical: false,
                });
            }
            if iy + 1 < ny {
                edges.push(Edge {
                    ix,
                    iy,
                    vertical: true,
                });
            }
        }
    }

    // Discrete labels need fresh evaluations; collect them as jobs.
    let mut jobs = Vec::new();
    let mut points: BTreeMap<(BoundaryKind, Edge), [f64; 2]> = BTreeMap::new();
    for &edge in &edges {
        let (fx, fy) = edge.far();
        let (Some(a), Some(b)) = (ok(edge.ix, edge.iy), ok(fx, fy)) else {
            continue;
        };
        for kind in discrete_kinds(a, b) {
            if wanted.contains(&kind) {
                jobs.push(EdgeJob { edge, kind });
            }
        }
        let pa = spec.point(edge.ix, edge.iy);
        let pb = spec.point(fx, fy);
        let at = |t: f64| spec.coords(&pa.lerp(&pb, t));
        if wanted.contains(&BoundaryKind::ZetaOne) {
            if let (Some(za), Some(zb)) = (a.zeta, b.zeta) {
                if (za - 1.0).signum() != (zb - 1.0).signum() {
                    points.insert((BoundaryKind::ZetaOne, edge), at((1.0 - za) / (zb - za)));
                }
            }
        }
        if wanted.contains(&BoundaryKind::SecondOrderOnset) {
            let (qa, qb) = (order_parameter(a), order_parameter(b));
            let th = opts.onset_threshold;
            if (qa - th).signum() != (qb - th).signum() {
                // Cross the threshold, then extrapolate the local slope back to q = 0.
                let t_cross = (th - qa) / (qb - qa);
                let t_onset = t_cross - th / (qb - qa);
                points.insert((BoundaryKind::SecondOrderOnset, edge), at(t_onset));
            }
        }
    }

    if wanted.contains(&BoundaryKind::GapMin) {
        for vertical in [false, true] {
            let (n_line, n_along) = if vertical { (nx, ny) } else { (ny, nx) };
            for line in 0..n_line {
                let idx = |k: usize| if vertical { (line, k) } else { (k, line) };
                for k in 1..n_along.saturating_sub(1) {
                    let trio: Vec<_> = [k - 1, k, k + 1]
                        .iter()
                        .map(|&j| {
                            let (ix, iy) = idx(j);
                            ok(ix, iy).map(|a| a.gap)
                        })
                        .collect();
                    let (Some(l), Some(m), Some(r)) = (trio[0], trio[1], trio[2]) else {
                        continue;
                    };
                    if !(m < opts.gap_ceiling && m <= l && m < r) {
                        continue;
                    }
                    let s = v_minimum(l, r);
                    let (from, to) = if s >= 0.0 { (k, k + 1) } else { (k - 1, k) };
                    let (ix, iy) = idx(from);
                    let edge = Edge { ix, iy, vertical };
                    let (pa, pb) = (spec.point(ix, iy), {
                        let (jx, jy) = idx(to);
                        spec.point(jx, jy)
                    });
                    let t = if s >= 0.0 { s } else { 1.0 + s };
                    points.insert((BoundaryKind::GapMin, edge), spec.coords(&pa.lerp(&pb, t)));
                }
            }
        }
    }

    let refined: Vec<((BoundaryKind, Edge), [f64; 2])> = pool(opts.parallelism)?.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (fx, fy) = job.edge.far();
                let pa = spec.point(job.edge.ix, job.edge.iy);
                let pb = spec.point(fx, fy);
                let la = label(
                    job.kind,
                    diagram
                        .cell(job.edge.ix, job.edge.iy)
                        .analysis
                        .as_ref()
                        .unwrap(),
                );
                let t = bisect_label(job.kind, &pa, &pb, la, opts.bisection_steps, spec.tol);
                ((job.kind, job.edge), spec.coords(&pa.lerp(&pb, t)))
            })
            .collect()
    });
    points.extend(refined);

    let mut boundaries = Vec::new();
    for kind in BoundaryKind::ALL {
        if wanted.contains(&kind) {
            boundaries.extend(chain(kind, &points, nx, ny));
        }
    }
    diagram.boundaries = boundaries;
    diagram.junctions = if wanted.contains(&BoundaryKind::NodeJumpWithParity)
        && wanted.contains(&BoundaryKind::NodeJumpWithoutParity)
    {
        find_junctions(&diagram, &points)
    } else {
        Vec::new()
    };
    diagram.boundary_options = Some(opts.clone());
    Ok(diagram)
}

/// Marching-squares chaining: two points of one kind on the edges of the
/// same grid square are joined, then segments are walked into polylines.
fn chain(
    kind: BoundaryKind,
    points: &BTreeMap<(BoundaryKind, Edge), [f64; 2]>,
    nx: usize,
    ny: usize,
) -> Vec<Boundary> {
    let ids: BTreeMap<Edge, usize> = points
        .keys()
        .filter(|(k, _)| *k == kind)
        .enumerate()
        .map(|(i, (_, e))| (*e, i))
        .collect();
    if ids.is_empty() {
        return Vec::new();
    }
    let coord: Vec<[f64; 2]> = ids.keys().map(|e| points[&(kind, *e)]).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); coord.len()];
    let dist = |a: usize, b: usize| {
        let (p, q) = (coord[a], coord[b]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    };
    for sy in 0..ny.saturating_sub(1) {
        for sx in 0..nx.saturating_sub(1) {
            let around: Vec<usize> = [
                Edge {
                    ix: sx,
                    iy: sy,
                    vertical: false,
                },
                Edge {
                    ix: sx + 1,
                    iy: sy,
                    vertical: true,
                },
                Edge {
                    ix: sx,
                    iy: sy + 1,
                    vertical: false,
                },
                Edge {
                    ix: sx,
                    iy: sy,
                    vertical: true,
                },
            ]
            .iter()
            .filter_map(|e| ids.get(e).copied())
            .collect();
            let pairs: Vec<(usize, usize)> = match around.len() {
                2 => vec![(around[0], around[1])],
                3 => {
                    let cands = [(0, 1), (1, 2), (0, 2)];
                    let best = cands
                        .iter()
                        .min_by(|a, b| {
                            dist(around[a.0], around[a.1])
                                .total_cmp(&dist(around[b.0], around[b.1]))
                        })
                        .unwrap();
                    vec![(around[best.0], around[best.1])]
                }
                4 => {
                    let a = dist(around[0], around[1]) + dist(around[2], around[3]);
                    let b = dist(around[0], around[3]) + dist(around[1], around[2]);
                    if a <= b {
                        vec![(around[0], around[1]), (around[2], around[3])]
                    } else {
                        vec![(around[0], around[3]), (around[1], around[2])]
                    }
                }
                _ => Vec::new(),
            };
            for (a, b) in pairs {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }

    let mut seen = vec![false; coord.len()];
    let mut out = Vec::new();
    let walk = |start: usize, seen: &mut Vec<bool>| {
        let mut line = vec![coord[start]];
        seen[start] = true;
        let mut cur = start;
        while let Some(&next) = adj[cur].iter().find(|&&n| !seen[n]) {
            seen[next] = true;
            line.push(coord[next]);
            cur = next;
        }
        if adj[cur].contains(&start) && line.len() > 2 {
            line.push(coord[start]);
        }
        Boundary { kind, points: line }
    };
    for i in 0..coord.len() {
        if !seen[i] && adj[i].len() != 2 {
            out.push(walk(i, &mut seen));
        }
    }
    for i in 0..coord.len() {
        if !seen[i] {
            out.push(walk(i, &mut seen));
        }
    }
    out
}

fn phase_label(a: &GroundStateAnalysis) -> (i32, usize) {
    (a.parity, a.n_z)
}

/// A square holds a junction when its corners carry both a node change with
/// a parity flip and one without.
fn is_junction(labels: &[(i32, usize); 4]) -> bool {
    let mut with = false;
    let mut without = false;
    for i in 0..4 {
        for j in i + 1..4 {
            let (a, b) = (labels[i], labels[j]);
            if a.1 != b.1 {
                if a.0 != b.0 {
                    with = true;
                } else {
                    without = true;
                }
            }
        }
    }
    let distinct: BTreeSet<_> = labels.iter().collect();
    with && without && distinct.len() >= 3
}

/// Least-squares line through points: centroid and unit direction.
fn fit_line(pts: &[[f64; 2]]) -> Option<([f64; 2], [f64; 2])> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(([cx, cy], [theta.cos(), theta.sin()]))
}

fn intersect(a: ([f64; 2], [f64; 2]), b: ([f64; 2], [f64; 2])) -> Option<[f64; 2]> {
    let ((p, d), (q, e)) = (a, b);
    let det = d[0] * e[1] - d[1] * e[0];
    if det.abs() < 1e-6 {
        return None;
    }
    let t = ((q[0] - p[0]) * e[1] - (q[1] - p[1]) * e[0]) / det;
    Some([p[0] + t * d[0], p[1] + t * d[1]])
}

/// Quadruple junctions. Grid squares whose corner labels contain both a node
/// change with a parity flip and one without are clustered; around each
/// cluster straight lines are fitted through the refined points of the two
/// node-boundary kinds and intersected.
fn find_junctions(
    diagram: &PhaseDiagram,
    points: &BTreeMap<(BoundaryKind, Edge), [f64; 2]>,
) -> Vec<Junction> {
    const RADIUS: f64 = 3.0;
    let spec = diagram.spec;
    let (nx, ny) = (spec.x_axis.steps, spec.y_axis.steps);
    let hx = (spec.x_axis.max - spec.x_axis.min) / (nx - 1) as f64;
    let hy = (spec.y_axis.max - spec.y_axis.min) / (ny - 1) as f64;
    let to_unit = |p: [f64; 2]| [(p[0] - spec.x_axis.min) / hx, (p[1] - spec.y_axis.min) / hy];
    let from_unit = |u: [f64; 2]| [spec.x_axis.min + u[0] * hx, spec.y_axis.min + u[1] * hy];
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);

    let mut clusters: Vec<Vec<[f64; 2]>> = Vec::new();
    for sy in 0..ny.saturating_sub(1) {
        for sx in 0..nx.saturating_sub(1) {
            let corners = [(sx, sy), (sx + 1, sy), (sx + 1, sy + 1), (sx, sy + 1)];
            let labels: Option<Vec<_>> = corners
                .iter()
                .map(|&(i, j)| diagram.cell(i, j).analysis.as_ref().map(phase_label))
                .collect();
            let Some(labels) = labels else { continue };
            if !is_junction(&[labels[0], labels[1], labels[2], labels[3]]) {
                continue;
            }
            let centre = [sx as f64 + 0.5, sy as f64 + 0.5];
            match clusters
                .iter_mut()
                .find(|c| c.iter().any(|&m| dist(m, centre) <= 2.0))
            {
                Some(c) => c.push(centre),
                None => clusters.push(vec![centre]),
            }
        }
    }

    let near = |kind: BoundaryKind, c: [f64; 2]| -> Vec<[f64; 2]> {
        points
            .iter()
            .filter(|((k, _), _)| *k == kind)
            .map(|(_, p)| to_unit(*p))
            .filter(|u| dist(*u, c) <= RADIUS)
            .collect()
    };
    clusters
        .iter()
        .map(|members| {
            let n = members.len() as f64;
            let c = [
                members.iter().map(|m| m[0]).sum::<f64>() / n,
                members.iter().map(|m| m[1]).sum::<f64>() / n,
            ];
            let with = fit_line(&near(BoundaryKind::NodeJumpWithParity, c));
            let without = fit_line(&near(BoundaryKind::NodeJumpWithoutParity, c));
            let (u, fitted) = match (with, without) {
                (Some(a), Some(b)) => match intersect(a, b) {
                    Some(u) if dist(u, c) <= RADIUS => (u, true),
                    _ => (c, false),
                },
                _ => (c, false),
            };
            let [x, y] = from_unit(u);
            Junction { x, y, fitted }
        })
        .collect()
}

/// Which scaling relation a collapse dataset tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseLaw {
    /// ⟨x²⟩/x_s² against g/g_c^{λ,χ}; the λ = 0 reference is the halved form.
    X2,
    /// ⟨σx⟩ against g/g_c^{λ,χ}.
    Sx,
    /// (⟨x²⟩+⟨p²⟩)/x_s² against g/g_c^{λ,χ}, valid for every λ.
    Unified,
    /// (1−χ)⟨x²⟩/(2x_s²) against the local distance dḡ.
    LocalX2,
    /// ⟨σx⟩ against the local distance dḡ.
    LocalSx,
    /// Ratio of the two sides of the global ⟨σx⟩ relation against g/g_c^{λ,χ}.
    GlobalSx,
}

impl CollapseLaw {
    pub const ALL: [CollapseLaw; 6] = [
        CollapseLaw::X2,
        CollapseLaw::Sx,
        CollapseLaw::Unified,
        CollapseLaw::LocalX2,
        CollapseLaw::LocalSx,
        CollapseLaw::GlobalSx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CollapseLaw::X2 => "x2",
            CollapseLaw::Sx => "sx",
            CollapseLaw::Unified => "unified",
            CollapseLaw::LocalX2 => "local_x2",
            CollapseLaw::LocalSx => "local_sx",
            CollapseLaw::GlobalSx => "global_sx",
        }
    }

    fn is_local(self) -> bool {
        matches!(self, CollapseLaw::LocalX2 | CollapseLaw::LocalSx)
    }
}

impl FromStr for CollapseLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CollapseLaw::ALL
            .into_iter()
            .find(|l| l.name() == s.trim())
            .ok_or_else(|| Error::Domain(format!("unknown scaling law '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseCurve {
    pub lambda: f64,
    pub chi: f64,
    /// `None` where the analysis failed.
    pub scaled_y: Vec<Option<f64>>,
    pub analytic: Vec<f64>,
    pub parity: Vec<Option<i32>>,
    /// Parity flips between consecutive samples, i.e. ground-state level crossings.
    pub discontinuities: usize,
    pub max_analytic_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseDataset {
    pub law: CollapseLaw,
    pub omega: f64,
    pub scaled_x: Vec<f64>,
    pub curves: Vec<CollapseCurve>,
    /// Largest spread across curves at a common abscissa.
    pub max_pairwise_dev: f64,
    pub max_analytic_dev: f64,
}

/// Coupling g/g_s for a law abscissa.
fn coupling_for(law: CollapseLaw, x: f64, lambda: f64, chi: f64) -> Result<f64> {
    let gc = analytic::g_critical(lambda, chi)
        .ok_or_else(|| Error::Domain(format!("no critical coupling at chi = {chi}")))?;
    Ok(if law.is_local() {
        gc * (1.0 + x * (1.0 + chi) / (1.0 - chi))
    } else {
        gc * x
    })
}

fn law_values(law: CollapseLaw, a: &GroundStateAnalysis, g: f64, x: f64) -> Result<(f64, f64)> {
    let (lambda, chi) = (a.params.lambda, a.params.chi);
    let x_s2 = a.params.splitting / (2.0 * a.params.omega);
    let gb = analytic::gbar_lambda(g, lambda);
    let s = analytic::scaling_laws(gb, chi)?;
    Ok(match law {
        CollapseLaw::X2 => {
            let reference = if lambda == 0.0 {
                2.0 * s.x2_jc
            } else {
                2.0 * s.x2_scaled
            };
            (a.mean_x2 / x_s2, reference)
        }
        CollapseLaw::Sx => (a.mean_sx, s.sx),
        CollapseLaw::Unified => ((a.mean_x2 + a.mean_p2) / x_s2, s.x2p2_unified),
        CollapseLaw::LocalX2 => (
            (1.0 - chi) * a.mean_x2 / (2.0 * x_s2),
            analytic::local_expansion(x).0,
        ),
        CollapseLaw::LocalSx => (a.mean_sx, analytic::local_expansion(x).1),
        CollapseLaw::GlobalSx => {
            let lhs = (chi * a.mean_sx + 1.0).powi(2) / (1.0 - chi * chi);
            (lhs / s.global_rhs, 1.0)
        }
    })
}

/// Numerical curves of one scaling law for several (λ, χ) sets, sampled on a
/// shared abscissa. `range` is in the law's abscissa: g/g_c^{λ,χ}, or dḡ for
/// the local laws. `omega` is ω/Ω.
pub fn build_collapse(
    law: CollapseLaw,
    sets: &[(f64, f64)],
    range: (f64, f64),
    points: usize,
    omega: f64,
    tol: f64,
    parallelism: usize,
) -> Result<CollapseDataset> {
    if points < 2 || !(range.1 > range.0) {
        return Err(Error::InvalidGrid(format!(
            "collapse needs at least 2 points on a nonempty range, got {points} on {range:?}"
        )));
    }
    let xs = AxisSpec::new(Param::G, range.0, range.1, points).values();
    let mut jobs = Vec::new();
    for (c, &(lambda, chi)) in sets.iter().enumerate() {
        for (k, &x) in xs.iter().enumerate() {
            let g = coupling_for(law, x, lambda, chi)?;
            ModelParams::scaled(omega, g, lambda, chi)?;
            jobs.push((c, k, x, g, lambda, chi));
        }
    }
    let results: Vec<Option<(f64, f64, i32)>> = pool(parallelism)?.install(|| {
        jobs.par_iter()
            .map(|&(_, _, x, g, lambda, chi)| {
                let p = ReducedParams {
                    omega,
                    g,
                    lambda,
                    chi,
                };
                let a = analyze_reduced(&p, tol).ok()?;
                let (y, reference) = law_values(law, &a, g, x).ok()?;
                Some((y, reference, a.parity))
            })
            .collect()
    });

    let mut curves: Vec<CollapseCurve> = sets
        .iter()
        .map(|&(lambda, chi)| CollapseCurve {
            lambda,
            chi,
            scaled_y: vec![None; points],
            analytic: vec![f64::NAN; points],
            parity: vec![None; points],
            discontinuities: 0,
            max_analytic_dev: 0.0,
        })
        .collect();
    for (job, res) in jobs.iter().zip(results) {
        let (c, k, x, g, lambda, chi) = *job;
        let curve = &mut curves[c];
        let gb = analytic::gbar_lambda(g, lambda);
        let s = analytic::scaling_laws(gb, chi)?;
        curve.analytic[k] = match law {
            CollapseLaw::X2 if lambda == 0.0 => 2.0 * s.x2_jc,
            CollapseLaw::X2 => 2.0 * s.x2_scaled,
            CollapseLaw::Sx => s.sx,
            CollapseLaw::Unified => s.x2p2_unified,
            CollapseLaw::LocalX2 => analytic::local_expansion(x).0,
            CollapseLaw::LocalSx => analytic::local_expansion(x).1,
            CollapseLaw::GlobalSx => 1.0,
        };
        if let Some((y, _, parity)) = res {
            curve.scaled_y[k] = Some(y);
            curve.parity[k] = Some(parity);
        }
    }
    for curve in &mut curves {
        curve.discontinuities = curve
            .parity
            .windows(2)
            .filter(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a != b))
            .count();
        curve.max_analytic_dev = curve
            .scaled_y
            .iter()
            .zip(&curve.analytic)
            .filter_map(|(y, r)| y.map(|y| (y - r).abs()))
            .fold(0.0, f64::max);
    }
    let max_pairwise_dev = (0..points)
        .map(|k| {
            let ys: Vec<f64> = curves.iter().filter_map(|c| c.scaled_y[k]).collect();
            let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if ys.len() >= 2 {
                hi - lo
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let max_analytic_dev = curves
        .iter()
        .map(|c| c.max_analytic_dev)
        .fold(0.0, f64::max);
    Ok(CollapseDataset {
        law,
        omega,
        scaled_x: xs,
        curves,
        max_pairwise_dev,
        max_analytic_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> GridSpec {
        GridSpec {
            x_axis: AxisSpec::new(Param::G, 0.0, 0.01, 2),
            y_axis: AxisSpec::new(Param::Lambda, 0.2, 0.6, 2),
            fixed: ReducedParams {
                omega: 0.5,
                g: 0.0,
                lambda: 0.0,
                chi: 0.2,
            },
            tol: 1e-10,
        }
    }

    #[test]
    fn axis_parsing_and_values() {
        let a: AxisSpec = "lambda:0:1:5".parse().unwrap();
        assert_eq!(a.param, Param::Lambda);
        assert_eq!(a.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!("lambda:0:1".parse::<AxisSpec>().is_err());
        assert!("mu:0:1:3".parse::<AxisSpec>().is_err());
        assert!("g:0:x:3".parse::<AxisSpec>().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = small_spec();
        assert!(s.validate().is_ok());
        s.y_axis.param = Param::G;
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.x_axis.steps = 1;
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.fixed.chi = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn weak_coupling_cells_are_trivial() {
        let d = run_sweep(&small_spec(), 2).unwrap();
        assert_eq!(d.cells.len(), 4);
        for c in &d.cells {
            let a = c.analysis.as_ref().unwrap();
            assert_eq!((a.parity, a.n_z), (-1, 0));
        }
        let d = detect_boundaries(d, &BoundaryOptions::default()).unwrap();
        assert!(d.boundaries.is_empty());
    }

    #[test]
    fn scan_matches_sweep_row() {
        let spec = small_spec();
        let d = run_sweep(&spec, 1).unwrap();
        let mut fixed = spec.fixed;
        fixed.lambda = spec.y_axis.min;
        let cells = run_scan(&spec.x_axis, fixed, spec.tol, 2).unwrap();
        assert_eq!(cells.len(), 2);
        for c in &cells {
            assert_eq!(c.analysis, d.cell(c.ix, 0).analysis);
        }
        assert!(run_scan(&AxisSpec::new(Param::G, 1.0, 1.0, 3), fixed, 1e-10, 1).is_err());
    }

    #[test]
    fn failed_cells_are_flagged_not_fatal() {
        let mut s = small_spec();
        s.y_axis = AxisSpec::new(Param::Chi, 0.5, 1.0, 2);
        s.x_axis = AxisSpec::new(Param::G, 0.5, 1.0, 2);
        let d = run_sweep(&s, 1).unwrap();
        assert_eq!(d.failed_cells(), 2);
        assert!(d
            .cells
            .iter()
            .filter(|c| c.error.is_some())
            .all(|c| c.y == 1.0));
        detect_boundaries(d, &BoundaryOptions::default()).unwrap();
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let s = GridSpec {
            x_axis: AxisSpec::new(Param::G, 1.0, 3.0, 5),
            y_axis: AxisSpec::new(Param::Lambda, 0.0, 0.8, 3),
            ..small_spec()
        };
        let a = run_sweep(&s, 1).unwrap();
        let b = run_sweep(&s, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn v_fit_locates_symmetric_minimum() {
        assert_eq!(v_minimum(1.0, 1.0), 0.0);
        // true minimum at +0.25: samples 1.25 and 0.75
        assert!((v_minimum(1.25, 0.75) - 0.25).abs() < 1e-12);
        assert!((v_minimum(0.75, 1.25) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn chaining_joins_points_through_squares() {
        let mut pts = BTreeMap::new();
        let k = BoundaryKind::ParityFlip;
        // a vertical line crossing three horizontal edges in column 0
        for iy in 0..3 {
            pts.insert(
                (
                    k,
                    Edge {
                        ix: 0,
                        iy,
                        vertical: false,
                    },
                ),
                [0.5, iy as f64],
            );
        }
        let lines = chain(k, &pts, 2, 3);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].points.len(), 3);
    }

    #[test]
    fn junction_pattern() {
        assert!(is_junction(&[(1, 1), (-1, 0), (1, 0), (-1, 1)]));
        assert!(is_junction(&[(1, 1), (-1, 0), (-1, 0), (-1, 1)]));
        assert!(!is_junction(&[(1, 1), (-1, 0), (-1, 0), (1, 1)]));
        assert!(!is_junction(&[(1, 1), (1, 0), (1, 0), (1, 1)]));
    }

    #[test]
    fn fitted_lines_intersect() {
        let a = fit_line(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let b = fit_line(&[[0.0, 2.0], [2.0, 0.0]]).unwrap();
        let p = intersect(a, b).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        assert!(intersect(a, a).is_none());
        assert!(fit_line(&[[1.0, 1.0]]).is_none());
    }

    #[test]
    fn collapse_shares_abscissa() {
        let c = build_collapse(
            CollapseLaw::Sx,
            &[(0.5, 0.2), (1.0, 0.2)],
            (1.1, 1.5),
            3,
            0.5,
            1e-10,
            2,
        )
        .unwrap();
        assert_eq!(c.scaled_x.len(), 3);
        for curve in &c.curves {
            assert_eq!(curve.scaled_y.len(), 3);
            assert!(curve.scaled_y.iter().all(|y| y.is_some()));
        }
        assert!("local_sx".parse::<CollapseLaw>().is_ok());
        assert!("eq99".parse::<CollapseLaw>().is_err());
    }
}
