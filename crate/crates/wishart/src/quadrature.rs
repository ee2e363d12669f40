//! Panel quadrature with endpoint-singularity substitutions, adaptive
//! bisection and error estimation.
//!
//! Inverse-square-root endpoints are removed by the substitution
//! r = endpoint +/- t^2 before any panels are laid down; errors are estimated
//! by comparing one panel against its two-panel bisection. Refinement is
//! depth-first with a fixed combination order, so results are bit-identical
//! across thread counts.

use std::ops::{Add, Sub};
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Result, WishartError};
use crate::exec;

/// Scalars a quadrature can accumulate: the reals and the complex plane.
pub trait QuadValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + 'static
{
    fn zero() -> Self;
    fn scale(self, k: f64) -> Self;
    fn norm(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

/// Tolerances and refinement limits for the adaptive panels.
#[derive(Debug, Clone)]
pub struct QuadratureConfig {
    /// Absolute tolerance on the integral value.
    pub abs_tol: f64,
    /// Relative tolerance; the effective tolerance is
    /// max(abs_tol, rel_tol * |rough estimate|), whichever is looser.
    pub rel_tol: f64,
    /// Maximum bisection depth below the initial panels.
    pub max_levels: u32,
    /// Gauss-Legendre node count per panel.
    pub panel_order: usize,
    /// Uniform subdivision applied before adaptive refinement starts.
    pub initial_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-6,
            rel_tol: 1e-4,
            max_levels: 12,
            panel_order: 16,
            initial_panels: 8,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) {
        assert!(self.abs_tol > 0.0 && self.rel_tol > 0.0, "tolerances must be positive");
        assert!(self.panel_order >= 4, "panel order must be at least 4");
        assert!(self.max_levels >= 1, "at least one refinement level required");
        assert!(self.initial_panels >= 1);
    }

    pub fn with_tols(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

/// Integral value with an absolute error bound and the evaluation count.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T = f64> {
    pub value: T,
    pub err_estimate: f64,
    pub evaluations: u64,
}

// ------------------------------------------------------------------
// Gauss-Legendre rules
// ------------------------------------------------------------------

/// Nodes and weights on [-1, 1], computed by Newton iteration on the
/// Legendre recurrence and cached per order.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn compute(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = (order + 1) / 2;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                // Legendre P_order(x) and derivative by upward recurrence.
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=order {
                    let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = pk;
                }
                pp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / pp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * pp * pp);
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn of_order(order: usize) -> &'static GaussLegendre {
        static CACHE: OnceLock<Mutex<Vec<(usize, &'static GaussLegendre)>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = cache.lock().unwrap();
        if let Some(&(_, rule)) = guard.iter().find(|(o, _)| *o == order) {
            return rule;
        }
        let rule: &'static GaussLegendre = Box::leak(Box::new(Self::compute(order)));
        guard.push((order, rule));
        rule
    }

    /// One panel over [a, b].
    fn panel<T: QuadValue, F: Fn(f64) -> T>(&self, f: &F, a: f64, b: f64) -> T {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = T::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(c + h * x).scale(w);
        }
        acc.scale(h)
    }

    /// Tensor-product panel over a rectangle.
    fn panel2<T: QuadValue, F: Fn(f64, f64) -> T>(
        &self,
        f: &F,
        ax: (f64, f64),
        bx: (f64, f64),
    ) -> T {
        let ca = 0.5 * (ax.0 + ax.1);
        let ha = 0.5 * (ax.1 - ax.0);
        let cb = 0.5 * (bx.0 + bx.1);
        let hb = 0.5 * (bx.1 - bx.0);
        let mut acc = T::zero();
        for (&xa, &wa) in self.nodes.iter().zip(&self.weights) {
            let ra = ca + ha * xa;
            let mut inner = T::zero();
            for (&xb, &wb) in self.nodes.iter().zip(&self.weights) {
                inner = inner + f(ra, cb + hb * xb).scale(wb);
            }
            acc = acc + inner.scale(wa);
        }
        acc.scale(ha * hb)
    }
}

// ------------------------------------------------------------------
// 1D adaptive integration
// ------------------------------------------------------------------

const PAR_DEPTH: u32 = 3;

fn adapt_1d<T: QuadValue, F: Fn(f64) -> T + Sync>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    tol: f64,
    level: u32,
    max_levels: u32,
) -> (T, f64, u64) {
    let coarse = rule.panel(f, a, b);
    let mid = 0.5 * (a + b);
    let (fl, fr) = if level < PAR_DEPTH {
        exec::join(|| rule.panel(f, a, mid), || rule.panel(f, mid, b))
    } else {
        (rule.panel(f, a, mid), rule.panel(f, mid, b))
    };
    let fine = fl + fr;
    let err = (fine - coarse).norm();
    let evals = 3 * rule.nodes.len() as u64;
    if err <= tol || level >= max_levels {
        return (fine, err, evals);
    }
    let ((vl, el, cl), (vr, er, cr)) = if level < PAR_DEPTH {
        exec::join(
            || adapt_1d(f, rule, a, mid, 0.5 * tol, level + 1, max_levels),
            || adapt_1d(f, rule, mid, b, 0.5 * tol, level + 1, max_levels),
        )
    } else {
        (
            adapt_1d(f, rule, a, mid, 0.5 * tol, level + 1, max_levels),
            adapt_1d(f, rule, mid, b, 0.5 * tol, level + 1, max_levels),
        )
    };
    (vl + vr, el + er, evals + cl + cr)
}

/// A segment of the original interval together with the substitution that
/// removed its endpoint singularity.
enum Segment<'f, T> {
    Plain {
        a: f64,
        b: f64,
        f: &'f (dyn Fn(f64) -> T + Sync),
    },
    /// r = origin + dir * t^2, t in [0, t_max]; integrand gains 2t |dir|.
    Sqrt {
        origin: f64,
        dir: f64,
        t_max: f64,
        f: &'f (dyn Fn(f64) -> T + Sync),
    },
}

impl<T: QuadValue> Segment<'_, T> {
    fn integrate(
        &self,
        rule: &GaussLegendre,
        tol: f64,
        config: &QuadratureConfig,
    ) -> (T, f64, u64) {
        let (lo, hi): (f64, f64) = match self {
            Segment::Plain { a, b, .. } => (*a, *b),
            Segment::Sqrt { t_max, .. } => (0.0, *t_max),
        };
        let eval = |t: f64| -> T {
            match self {
                Segment::Plain { f, .. } => f(t),
                Segment::Sqrt { origin, dir, f, .. } => {
                    f(origin + dir * t * t).scale(2.0 * t)
                }
            }
        };
        let n = config.initial_panels;
        let width = (hi - lo) / n as f64;
        let parts = exec::map_indexed(n, |i| {
            let a = lo + i as f64 * width;
            let b = if i + 1 == n { hi } else { lo + (i + 1) as f64 * width };
            adapt_1d(&eval, rule, a, b, tol / n as f64, 0, config.max_levels)
        });
        let mut value = T::zero();
        let mut err = 0.0;
        let mut evals = 0;
        for (v, e, c) in parts {
            value = value + v;
            err += e;
            evals += c;
        }
        (value, err, evals)
    }
}

fn split_segments<'f, T: QuadValue>(
    f: &'f (dyn Fn(f64) -> T + Sync),
    (a, b): (f64, f64),
    (sing_a, sing_b): (bool, bool),
) -> Vec<Segment<'f, T>> {
    assert!(a < b, "interval must be nonempty");
    assert!(a.is_finite() && b.is_finite(), "semi-infinite intervals must be pre-truncated");
    match (sing_a, sing_b) {
        (false, false) => vec![Segment::Plain { a, b, f }],
        (true, false) => vec![Segment::Sqrt { origin: a, dir: 1.0, t_max: (b - a).sqrt(), f }],
        (false, true) => vec![Segment::Sqrt { origin: b, dir: -1.0, t_max: (b - a).sqrt(), f }],
        (true, true) => {
            let m = 0.5 * (a + b);
            vec![
                Segment::Sqrt { origin: a, dir: 1.0, t_max: (m - a).sqrt(), f },
                Segment::Sqrt { origin: b, dir: -1.0, t_max: (b - m).sqrt(), f },
            ]
        }
    }
}

/// Adaptive integral of `f` over a finite interval. Endpoints flagged in
/// `singular_endpoints` are treated as inverse-square-root singularities.
pub fn integrate_1d<T: QuadValue>(
    f: impl Fn(f64) -> T + Sync,
    interval: (f64, f64),
    singular_endpoints: (bool, bool),
    config: &QuadratureConfig,
) -> Result<QuadResult<T>> {
    config.validate();
    let rule = GaussLegendre::of_order(config.panel_order);
    let segments = split_segments(&f, interval, singular_endpoints);

    let mut rough = 0.0;
    for seg in &segments {
        let (v, _, _) = match seg {
            Segment::Plain { a, b, .. } => (rule.panel(&f, *a, *b), 0.0, 0),
            Segment::Sqrt { origin, dir, t_max, .. } => (
                rule.panel(&|t: f64| f(origin + dir * t * t).scale(2.0 * t), 0.0, *t_max),
                0.0,
                0,
            ),
        };
        rough += v.norm();
    }
    let tol = config.abs_tol.max(config.rel_tol * rough);

    let mut value = T::zero();
    let mut err = 0.0;
    let mut evals = 0;
    let share = tol / segments.len() as f64;
    for seg in &segments {
        let (v, e, c) = seg.integrate(rule, share, config);
        value = value + v;
        err += e;
        evals += c;
    }
    let final_tol = config.abs_tol.max(config.rel_tol * value.norm());
    if err > final_tol.max(tol) {
        return Err(WishartError::QuadratureNonConvergence {
            err,
            tol: final_tol.max(tol),
            levels: config.max_levels,
        });
    }
    Ok(QuadResult { value, err_estimate: err, evaluations: evals })
}

// ------------------------------------------------------------------
// Vector-valued 1D integration (shared singular factor, many numerators)
// ------------------------------------------------------------------

pub(crate) struct MultiResult {
    pub values: Vec<f64>,
    pub errs: Vec<f64>,
    pub evaluations: u64,
}

struct VecAcc {
    values: Vec<f64>,
    errs: Vec<f64>,
    evals: u64,
}

fn panel_multi<F: Fn(f64, &mut [f64]) + Sync>(
    f: &F,
    rule: &GaussLegendre,
    dim: usize,
    a: f64,
    b: f64,
    out: &mut [f64],
    scratch: &mut [f64],
) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    out.iter_mut().for_each(|v| *v = 0.0);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        f(c + h * x, scratch);
        for d in 0..dim {
            out[d] += w * scratch[d];
        }
    }
    for v in out.iter_mut() {
        *v *= h;
    }
}

#[allow(clippy::too_many_arguments)]
fn adapt_multi<F: Fn(f64, &mut [f64]) + Sync>(
    f: &F,
    rule: &GaussLegendre,
    dim: usize,
    a: f64,
    b: f64,
    tols: &[f64],
    control: &[bool],
    level: u32,
    max_levels: u32,
) -> VecAcc {
    let mut coarse = vec![0.0; dim];
    let mut left = vec![0.0; dim];
    let mut right = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mid = 0.5 * (a + b);
    panel_multi(f, rule, dim, a, b, &mut coarse, &mut scratch);
    panel_multi(f, rule, dim, a, mid, &mut left, &mut scratch);
    panel_multi(f, rule, dim, mid, b, &mut right, &mut scratch);
    let evals = 3 * rule.nodes.len() as u64;
    let mut needs_refine = false;
    let mut errs = vec![0.0; dim];
    for d in 0..dim {
        errs[d] = (left[d] + right[d] - coarse[d]).abs();
        if control[d] && errs[d] > tols[d] {
            needs_refine = true;
        }
    }
    if !needs_refine || level >= max_levels {
        let values = left.iter().zip(&right).map(|(l, r)| l + r).collect();
        return VecAcc { values, errs, evals };
    }
    let half: Vec<f64> = tols.iter().map(|t| 0.5 * t).collect();
    let (la, ra) = if level < PAR_DEPTH {
        exec::join(
            || adapt_multi(f, rule, dim, a, mid, &half, control, level + 1, max_levels),
            || adapt_multi(f, rule, dim, mid, b, &half, control, level + 1, max_levels),
        )
    } else {
        (
            adapt_multi(f, rule, dim, a, mid, &half, control, level + 1, max_levels),
            adapt_multi(f, rule, dim, mid, b, &half, control, level + 1, max_levels),
        )
    };
    let values = la.values.iter().zip(&ra.values).map(|(l, r)| l + r).collect();
    let errs = la.errs.iter().zip(&ra.errs).map(|(l, r)| l + r).collect();
    VecAcc { values, errs, evals: evals + la.evals + ra.evals }
}

/// Integrates `dim` components sharing one evaluation sweep. Components not
/// flagged in `control` are accumulated but do not drive refinement.
pub(crate) fn integrate_1d_multi<F: Fn(f64, &mut [f64]) + Sync>(
    f: F,
    dim: usize,
    interval: (f64, f64),
    singular_endpoints: (bool, bool),
    control: &[bool],
    config: &QuadratureConfig,
) -> MultiResult {
    config.validate();
    let rule = GaussLegendre::of_order(config.panel_order);
    let (a, b) = interval;
    assert!(a < b && a.is_finite() && b.is_finite());

    // Substituted evaluators per segment, expressed over a parameter range.
    type SegFn<'s> = Box<dyn Fn(f64, &mut [f64]) + Sync + 's>;
    let f = &f;
    let mut segs: Vec<(f64, f64, SegFn)> = Vec::new();
    match singular_endpoints {
        (false, false) => segs.push((a, b, Box::new(|r, out: &mut [f64]| f(r, out)))),
        (true, false) => segs.push((
            0.0,
            (b - a).sqrt(),
            Box::new(|t, out: &mut [f64]| {
                f(a + t * t, out);
                out.iter_mut().for_each(|v| *v *= 2.0 * t);
            }),
        )),
        (false, true) => segs.push((
            0.0,
            (b - a).sqrt(),
            Box::new(|t, out: &mut [f64]| {
                f(b - t * t, out);
                out.iter_mut().for_each(|v| *v *= 2.0 * t);
            }),
        )),
        (true, true) => {
            let m = 0.5 * (a + b);
            segs.push((
                0.0,
                (m - a).sqrt(),
                Box::new(move |t, out: &mut [f64]| {
                    f(a + t * t, out);
                    out.iter_mut().for_each(|v| *v *= 2.0 * t);
                }),
            ));
            segs.push((
                0.0,
                (b - m).sqrt(),
                Box::new(move |t, out: &mut [f64]| {
                    f(b - t * t, out);
                    out.iter_mut().for_each(|v| *v *= 2.0 * t);
                }),
            ));
        }
    }

    // Rough per-component scale from single panels over each segment.
    let mut rough = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    for (lo, hi, g) in &segs {
        panel_multi(g, rule, dim, *lo, *hi, &mut tmp, &mut scratch);
        for d in 0..dim {
            rough[d] += tmp[d].abs();
        }
    }
    let seg_share = segs.len() as f64;
    let tols: Vec<f64> = rough
        .iter()
        .map(|&r| config.abs_tol.max(config.rel_tol * r) / seg_share)
        .collect();

    let mut values = vec![0.0; dim];
    let mut errs = vec![0.0; dim];
    let mut evals = 0;
    for (lo, hi, g) in &segs {
        let n = config.initial_panels;
        let width = (hi - lo) / n as f64;
        let tshare: Vec<f64> = tols.iter().map(|t| t / n as f64).collect();
        let parts = exec::map_indexed(n, |i| {
            let pa = lo + i as f64 * width;
            let pb = if i + 1 == n { *hi } else { lo + (i + 1) as f64 * width };
            adapt_multi(g, rule, dim, pa, pb, &tshare, control, 0, config.max_levels)
        });
        for part in parts {
            for d in 0..dim {
                values[d] += part.values[d];
                errs[d] += part.errs[d];
            }
            evals += part.evals;
        }
    }
    MultiResult { values, errs, evaluations: evals }
}

// ------------------------------------------------------------------
// 2D adaptive integration over cell pairs
// ------------------------------------------------------------------

fn adapt_2d<T: QuadValue, F: Fn(f64, f64) -> T + Sync>(
    f: &F,
    rule: &GaussLegendre,
    ax: (f64, f64),
    bx: (f64, f64),
    tol: f64,
    level: u32,
    max_levels: u32,
) -> (T, f64, u64) {
    let coarse = rule.panel2(f, ax, bx);
    let ma = 0.5 * (ax.0 + ax.1);
    let mb = 0.5 * (bx.0 + bx.1);
    let quads = [
        ((ax.0, ma), (bx.0, mb)),
        ((ma, ax.1), (bx.0, mb)),
        ((ax.0, ma), (mb, bx.1)),
        ((ma, ax.1), (mb, bx.1)),
    ];
    let fines = if level < 2 {
        let (a, b) = exec::join(
            || [rule.panel2(f, quads[0].0, quads[0].1), rule.panel2(f, quads[1].0, quads[1].1)],
            || [rule.panel2(f, quads[2].0, quads[2].1), rule.panel2(f, quads[3].0, quads[3].1)],
        );
        [a[0], a[1], b[0], b[1]]
    } else {
        [
            rule.panel2(f, quads[0].0, quads[0].1),
            rule.panel2(f, quads[1].0, quads[1].1),
            rule.panel2(f, quads[2].0, quads[2].1),
            rule.panel2(f, quads[3].0, quads[3].1),
        ]
    };
    let fine = fines[0] + fines[1] + fines[2] + fines[3];
    let err = (fine - coarse).norm();
    let n2 = (rule.nodes.len() * rule.nodes.len()) as u64;
    let evals = 5 * n2;
    if err <= tol || level >= max_levels {
        return (fine, err, evals);
    }
    let mut value = T::zero();
    let mut errsum = 0.0;
    let mut count = evals;
    let parts = if level < 2 {
        let (a, b) = exec::join(
            || {
                [
                    adapt_2d(f, rule, quads[0].0, quads[0].1, 0.25 * tol, level + 1, max_levels),
                    adapt_2d(f, rule, quads[1].0, quads[1].1, 0.25 * tol, level + 1, max_levels),
                ]
            },
            || {
                [
                    adapt_2d(f, rule, quads[2].0, quads[2].1, 0.25 * tol, level + 1, max_levels),
                    adapt_2d(f, rule, quads[3].0, quads[3].1, 0.25 * tol, level + 1, max_levels),
                ]
            },
        );
        vec![a[0], a[1], b[0], b[1]]
    } else {
        quads
            .iter()
            .map(|&(qa, qb)| adapt_2d(f, rule, qa, qb, 0.25 * tol, level + 1, max_levels))
            .collect()
    };
    for (v, e, c) in parts {
        value = value + v;
        errsum += e;
        count += c;
    }
    (value, errsum, count)
}

/// Patches a rectangle decomposition may produce: plain rectangles and
/// diagonal triangles of a square, mapped onto rectangles.
enum Patch {
    Rect { ax: (f64, f64), bx: (f64, f64) },
    /// Lower triangle a <= r_a <= r_b <= b of the square [a,b]^2,
    /// parameterized as r_a = a + t (r_b - a), (t, r_b) in [0,1] x [a,b].
    LowerTriangle { a: f64, b: f64 },
    UpperTriangle { a: f64, b: f64 },
}

fn integrate_patch<T: QuadValue, F: Fn(f64, f64) -> T + Sync>(
    f: &F,
    patch: &Patch,
    rule: &GaussLegendre,
    tol: f64,
    config: &QuadratureConfig,
) -> (T, f64, u64) {
    match patch {
        Patch::Rect { ax, bx } => adapt_2d(f, rule, *ax, *bx, tol, 0, config.max_levels),
        Patch::LowerTriangle { a, b } => {
            let g = |t: f64, rb: f64| f(a + t * (rb - a), rb).scale(rb - a);
            adapt_2d(&g, rule, (0.0, 1.0), (*a, *b), tol, 0, config.max_levels)
        }
        Patch::UpperTriangle { a, b } => {
            let g = |t: f64, ra: f64| f(ra, a + t * (ra - a)).scale(ra - a);
            adapt_2d(&g, rule, (0.0, 1.0), (*a, *b), tol, 0, config.max_levels)
        }
    }
}

/// Tensor-product adaptive integral over `cell_a` x `cell_b`. With
/// `diagonal_split`, any overlap of the two cells is cut along r_a = r_b so
/// that integrands with a kink on the diagonal stay smooth per patch.
pub fn integrate_2d_cell<T: QuadValue>(
    f: impl Fn(f64, f64) -> T + Sync,
    cell_a: (f64, f64),
    cell_b: (f64, f64),
    diagonal_split: bool,
    config: &QuadratureConfig,
) -> Result<QuadResult<T>> {
    config.validate();
    assert!(cell_a.0 < cell_a.1 && cell_b.0 < cell_b.1);
    assert!(
        cell_a.0.is_finite() && cell_a.1.is_finite() && cell_b.0.is_finite() && cell_b.1.is_finite()
    );
    let rule = GaussLegendre::of_order(config.panel_order);

    let mut patches: Vec<Patch> = Vec::new();
    let c0 = cell_a.0.max(cell_b.0);
    let c1 = cell_a.1.min(cell_b.1);
    if diagonal_split && c0 < c1 {
        let cuts_a = split_interval(cell_a, c0, c1);
        let cuts_b = split_interval(cell_b, c0, c1);
        for &sa in &cuts_a {
            for &sb in &cuts_b {
                if sa == (c0, c1) && sb == (c0, c1) {
                    patches.push(Patch::LowerTriangle { a: c0, b: c1 });
                    patches.push(Patch::UpperTriangle { a: c0, b: c1 });
                } else {
                    patches.push(Patch::Rect { ax: sa, bx: sb });
                }
            }
        }
    } else {
        patches.push(Patch::Rect { ax: cell_a, bx: cell_b });
    }

    let mut rough = 0.0;
    for patch in &patches {
        let (v, _, _) = match patch {
            Patch::Rect { ax, bx } => (rule.panel2(&f, *ax, *bx), 0.0, 0u64),
            Patch::LowerTriangle { a, b } => {
                let g = |t: f64, rb: f64| f(a + t * (rb - a), rb).scale(rb - a);
                (rule.panel2(&g, (0.0, 1.0), (*a, *b)), 0.0, 0)
            }
            Patch::UpperTriangle { a, b } => {
                let g = |t: f64, ra: f64| f(ra, a + t * (ra - a)).scale(ra - a);
                (rule.panel2(&g, (0.0, 1.0), (*a, *b)), 0.0, 0)
            }
        };
        rough += v.norm();
    }
    let tol = config.abs_tol.max(config.rel_tol * rough);
    let share = tol / patches.len() as f64;

    let mut value = T::zero();
    let mut err = 0.0;
    let mut evals = 0;
    for patch in &patches {
        let (v, e, c) = integrate_patch(&f, patch, rule, share, config);
        value = value + v;
        err += e;
        evals += c;
    }
    let final_tol = config.abs_tol.max(config.rel_tol * value.norm());
    if err > final_tol.max(tol) {
        return Err(WishartError::QuadratureNonConvergence {
            err,
            tol: final_tol.max(tol),
            levels: config.max_levels,
        });
    }
    Ok(QuadResult { value, err_estimate: err, evaluations: evals })
}

fn split_interval(cell: (f64, f64), c0: f64, c1: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![cell.0];
    for &c in &[c0, c1] {
        if c > cell.0 && c < cell.1 {
            pts.push(c);
        }
    }
    pts.push(cell.1);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

// ------------------------------------------------------------------
// Principal-value window (partial-integration identity)
// ------------------------------------------------------------------

/// Regularized value of (1/2) * lim_{eps->0} int g(r) / (r - i eps)^{3/2} dr
/// over the window [center - delta_minus, center + delta_plus], computed as
/// the partial-integration form
///     -g(r)/sqrt(r) |_{-dm}^{+dp}  +  int g'(r)/sqrt(r) dr ,
/// with the branch sqrt(r - i0) = -i sqrt(|r|) on the negative side.
/// The derivative is taken by central differences with step
/// 1e-5 * window width.
pub fn principal_value_window(
    g: impl Fn(f64) -> f64 + Sync,
    center: f64,
    delta_minus: f64,
    delta_plus: f64,
    config: &QuadratureConfig,
) -> Result<QuadResult<Complex64>> {
    config.validate();
    assert!(delta_plus > 0.0 && delta_minus > 0.0);
    let width = delta_minus + delta_plus;
    let h = 1e-5 * width;
    let gp = |r: f64| (g(r + h) - g(r - h)) / (2.0 * h);

    // boundary term: -g(c+dp)/sqrt(dp) + i g(c-dm)/sqrt(dm)
    let boundary = Complex64::new(
        -g(center + delta_plus) / delta_plus.sqrt(),
        g(center - delta_minus) / delta_minus.sqrt(),
    );

    let upper = integrate_1d(
        |t: f64| gp(center + t),
        (0.0, delta_plus),
        (true, false),
        config,
    )?;
    let lower = integrate_1d(
        |t: f64| gp(center - t),
        (0.0, delta_minus),
        (true, false),
        config,
    )?;

    // int_0^{dp} g'(c+t)/sqrt(t) dt + i * int_0^{dm} g'(c-t)/sqrt(t) dt,
    // where the sqrt substitution is already folded into integrate_1d.
    let value = boundary + Complex64::new(upper.value, lower.value);
    Ok(QuadResult {
        value,
        err_estimate: upper.err_estimate + lower.err_estimate,
        evaluations: upper.evaluations + lower.evaluations + 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_sqrt_endpoint() {
        let cfg = QuadratureConfig::with_tols(1e-12, 1e-12);
        let r = integrate_1d(|x: f64| 1.0 / x.sqrt(), (0.0, 1.0), (true, false), &cfg).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn polynomial_exactness() {
        let cfg = QuadratureConfig::with_tols(1e-13, 1e-13);
        let r = integrate_1d(|x: f64| 3.0 * x * x, (0.0, 1.0), (false, false), &cfg).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
        // degree 2*16 - 1 on a single panel
        let rule = GaussLegendre::of_order(16);
        let v = rule.panel(&|x: f64| x.powi(31), 0.0, 1.0);
        assert_relative_eq!(v, 1.0 / 32.0, epsilon = 1e-13);
    }

    #[test]
    fn truncated_gamma_integral() {
        // int_0^inf r^5 e^{-r/2} dr = 2^6 * 5!; truncation mirrors the
        // weight-based cutoff used by the density modules.
        let k = 5;
        let rmax = 2.0 * (20.0 + 5.0 * (20.0f64).ln());
        let cfg = QuadratureConfig::with_tols(1e-12, 1e-12);
        let r = integrate_1d(
            |x: f64| x.powi(k) * (-x / 2.0).exp(),
            (0.0, rmax),
            (false, false),
            &cfg,
        )
        .unwrap();
        let exact = 2.0f64.powi(k + 1) * 120.0;
        assert_relative_eq!(r.value / exact, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn two_dim_kink_and_separable() {
        let cfg = QuadratureConfig::with_tols(1e-12, 1e-12);
        let r = integrate_2d_cell(
            |a: f64, b: f64| (a - b).abs(),
            (0.0, 1.0),
            (0.0, 1.0),
            true,
            &cfg,
        )
        .unwrap();
        assert_relative_eq!(r.value, 1.0 / 3.0, epsilon = 1e-10);

        let cfg2 = QuadratureConfig { max_levels: 20, ..QuadratureConfig::with_tols(1e-10, 1e-10) };
        let r = integrate_2d_cell(
            |a: f64, b: f64| 1.0 / (a * b).sqrt(),
            (1e-12, 1.0),
            (1e-12, 1.0),
            false,
            &cfg2,
        )
        .unwrap();
        assert_relative_eq!(r.value, 4.0, epsilon = 1e-7);
    }

    #[test]
    fn separable_product_matches_1d_product() {
        let cfg = QuadratureConfig::with_tols(1e-12, 1e-12);
        let fa = |x: f64| (1.3 * x).sin() + 1.5;
        let fb = |x: f64| (-0.7 * x).exp();
        let ia = integrate_1d(fa, (0.2, 1.7), (false, false), &cfg).unwrap();
        let ib = integrate_1d(fb, (0.5, 2.1), (false, false), &cfg).unwrap();
        let i2 = integrate_2d_cell(
            |a, b| fa(a) * fb(b),
            (0.2, 1.7),
            (0.5, 2.1),
            false,
            &cfg,
        )
        .unwrap();
        assert_relative_eq!(i2.value, ia.value * ib.value, epsilon = 1e-10);
    }

    #[test]
    fn pv_window_constant_and_linear() {
        let cfg = QuadratureConfig::with_tols(1e-12, 1e-10);
        let dp = 0.8;
        let dm = 0.5;
        let r = principal_value_window(|_| 1.0, 0.0, dm, dp, &cfg).unwrap();
        let expect = Complex64::new(-1.0 / dp.sqrt(), 1.0 / dm.sqrt());
        assert!((r.value - expect).norm() < 1e-8);

        let r = principal_value_window(|x| x, 0.0, dm, dp, &cfg).unwrap();
        let expect = Complex64::new(dp.sqrt(), dm.sqrt());
        assert!((r.value - expect).norm() < 1e-8, "{:?} vs {expect}", r.value);
    }

    #[test]
    fn pv_window_matches_eps_shifted_quadrature() {
        // Deterministic "random" polynomial coefficients.
        let coeffs = [0.4, -1.2, 0.7, 0.3, -0.5];
        let g = |r: f64| {
            let mut acc = 0.0;
            let mut p = 1.0;
            for &c in &coeffs {
                acc += c * p;
                p *= r;
            }
            acc
        };
        let center = 0.3;
        let dm = 0.45;
        let dp = 0.6;
        let cfg = QuadratureConfig::with_tols(1e-11, 1e-11);
        let pv = principal_value_window(|r| g(r - center), center, dm, dp, &cfg).unwrap();

        let eps = 1e-6;
        let direct_cfg = QuadratureConfig {
            max_levels: 48,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            ..QuadratureConfig::default()
        };
        let direct = integrate_1d(
            |r: f64| {
                let z = Complex64::new(r, -eps);
                g(r) * 0.5 / z.powf(1.5)
            },
            (-dm, dp),
            (false, false),
            &direct_cfg,
        )
        .unwrap();
        assert!(
            (pv.value - direct.value).norm() < 1e-6,
            "pv {:?} direct {:?}",
            pv.value,
            direct.value
        );
    }

    #[test]
    fn pv_window_is_linear_in_g() {
        let cfg = QuadratureConfig::with_tols(1e-11, 1e-11);
        let g1 = |r: f64| 0.3 + r * r;
        let g2 = |r: f64| (r * 1.1).cos();
        let a = principal_value_window(g1, 0.0, 0.4, 0.4, &cfg).unwrap().value;
        let b = principal_value_window(g2, 0.0, 0.4, 0.4, &cfg).unwrap().value;
        let ab = principal_value_window(|r| 2.0 * g1(r) - 0.5 * g2(r), 0.0, 0.4, 0.4, &cfg)
            .unwrap()
            .value;
        assert!((ab - (a * 2.0 - b * 0.5)).norm() < 1e-8);
    }

    #[test]
    fn refinement_monotonicity() {
        let f = |x: f64| 1.0 / (1e-3 + (x - 0.37).powi(2));
        let mut prev = f64::INFINITY;
        for levels in [2u32, 4, 6, 8, 10] {
            let cfg = QuadratureConfig {
                max_levels: levels,
                abs_tol: 1e-13,
                rel_tol: 1e-13,
                ..QuadratureConfig::default()
            };
            let r = match integrate_1d(f, (0.0, 1.0), (false, false), &cfg) {
                Ok(r) => r.err_estimate,
                Err(WishartError::QuadratureNonConvergence { err, .. }) => err,
                Err(e) => panic!("{e}"),
            };
            assert!(r <= prev * (1.0 + 1e-12), "level {levels}: {r} > {prev}");
            prev = r;
        }
    }

    #[test]
    fn nonconvergence_is_reported() {
        let cfg = QuadratureConfig {
            max_levels: 2,
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            initial_panels: 1,
            ..QuadratureConfig::default()
        };
        let res = integrate_1d(|x: f64| (1.0 / (1e-7 + x * x)).sin(), (0.0, 1.0), (false, false), &cfg);
        assert!(matches!(res, Err(WishartError::QuadratureNonConvergence { .. })));
    }
}
