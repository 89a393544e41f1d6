//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct LbfgsOptions {
    pub history: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_bracket: usize,
    pub max_zoom: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { history: 10, max_iters: 200, rel_tol: 1e-9, c1: 1e-4, c2: 0.9, max_bracket: 40, max_zoom: 30 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: usize,
    pub message: Option<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `-H·g` by the two-loop recursion.
fn direction(g: &[f64], memory: &VecDeque<Pair>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alpha = vec![0.0; memory.len()];
    for (i, p) in memory.iter().enumerate().rev() {
        alpha[i] = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(qv, yv)| *qv -= alpha[i] * yv);
    }
    if let Some(last) = memory.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (i, p) in memory.iter().enumerate() {
        let beta = p.rho * dot(&p.y, &q);
        q.iter_mut().zip(&p.s).for_each(|(qv, sv)| *qv += (alpha[i] - beta) * sv);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[derive(Clone)]
struct Point {
    alpha: f64,
    f: f64,
    dphi: f64,
    g: Vec<f64>,
    x: Vec<f64>,
}

struct Search<'a, F> {
    eval: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>> Search<'_, F> {
    /// `None` means the trial point was not finite; it is treated as an
    /// infinitely high cost.
    fn probe(&mut self, alpha: f64) -> Result<Option<Point>> {
        let x: Vec<f64> = self.x.iter().zip(self.d).map(|(xv, dv)| xv + alpha * dv).collect();
        self.evaluations += 1;
        match (self.eval)(&x) {
            Ok((f, g)) if f.is_finite() => {
                let dphi = dot(&g, self.d);
                Ok(Some(Point { alpha, f, dphi, g, x }))
            }
            Ok(_) | Err(Error::Numeric(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Minimiser of the cubic through two points with slopes, or `None` when the
/// cubic has no real minimiser.
fn cubic_min(a: &Point, b: &Point) -> Option<f64> {
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dphi * b.dphi;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    t.is_finite().then_some(t)
}

enum Hi {
    Point(Point),
    Infinite(f64),
}

impl Hi {
    fn alpha(&self) -> f64 {
        match self {
            Hi::Point(p) => p.alpha,
            Hi::Infinite(a) => *a,
        }
    }
}

fn zoom<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>>(
    search: &mut Search<'_, F>,
    f0: f64,
    dphi0: f64,
    mut lo: Point,
    mut hi: Hi,
    opts: &LbfgsOptions,
) -> Result<Option<Point>> {
    for _ in 0..opts.max_zoom {
        let (a_lo, a_hi) = (lo.alpha, hi.alpha());
        let (left, right) = (a_lo.min(a_hi), a_lo.max(a_hi));
        let width = right - left;
        if width <= 1e-16 * right.abs().max(1.0) {
            break;
        }
        let guess = match &hi {
            Hi::Point(p) => cubic_min(&lo, p),
            Hi::Infinite(_) => None,
        };
        let alpha = match guess {
            Some(a) if a > left + 0.1 * width && a < right - 0.1 * width => a,
            _ => 0.5 * (a_lo + a_hi),
        };
        let Some(p) = search.probe(alpha)? else {
            hi = Hi::Infinite(alpha);
            continue;
        };
        if p.f > f0 + opts.c1 * alpha * dphi0 || p.f >= lo.f {
            hi = Hi::Point(p);
        } else {
            if p.dphi.abs() <= -opts.c2 * dphi0 {
                return Ok(Some(p));
            }
            if p.dphi * (a_hi - a_lo) >= 0.0 {
                hi = Hi::Point(lo);
            }
            lo = p;
        }
    }
    // Best sufficient-decrease point found, if it moved at all.
    Ok((lo.alpha > 0.0 && lo.f < f0).then_some(lo))
}

fn line_search<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>>(
    search: &mut Search<'_, F>,
    f0: f64,
    g0: &[f64],
    alpha0: f64,
    opts: &LbfgsOptions,
) -> Result<Option<Point>> {
    let dphi0 = dot(g0, search.d);
    let mut prev = Point { alpha: 0.0, f: f0, dphi: dphi0, g: g0.to_vec(), x: search.x.to_vec() };
    let mut alpha = alpha0;
    for i in 0..opts.max_bracket {
        let Some(p) = search.probe(alpha)? else {
            return zoom(search, f0, dphi0, prev, Hi::Infinite(alpha), opts);
        };
        if p.f > f0 + opts.c1 * alpha * dphi0 || (i > 0 && p.f >= prev.f) {
            return zoom(search, f0, dphi0, prev, Hi::Point(p), opts);
        }
        if p.dphi.abs() <= -opts.c2 * dphi0 {
            return Ok(Some(p));
        }
        if p.dphi >= 0.0 {
            return zoom(search, f0, dphi0, p, Hi::Point(prev), opts);
        }
        prev = p;
        alpha *= 4.0;
    }
    Ok((prev.alpha > 0.0).then_some(prev))
}

/// Minimises `eval` from `x0`. Errors from the first evaluation are returned;
/// non-finite trial points during line search shrink the step instead.
pub(crate) fn minimize<F>(x0: Vec<f64>, mut eval: F, opts: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut f, mut g) = eval(&x0)?;
    if !f.is_finite() {
        return Err(Error::Numeric(format!("initial cost is {f}")));
    }
    let mut x = x0;
    let mut out = LbfgsOutcome {
        x: Vec::new(),
        cost_history: vec![f],
        iterations: 0,
        converged: false,
        evaluations: 1,
        message: None,
    };
    let mut memory: VecDeque<Pair> = VecDeque::with_capacity(opts.history);
    while out.iterations < opts.max_iters {
        let gnorm = norm(&g);
        if gnorm == 0.0 || f == 0.0 {
            out.converged = true;
            break;
        }
        let mut d = direction(&g, &memory);
        if dot(&d, &g) >= 0.0 {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if memory.is_empty() { 1.0 / norm(&d) } else { 1.0 };
        let mut search = Search { eval: &mut eval, x: &x, d: &d, evaluations: 0 };
        let accepted = line_search(&mut search, f, &g, alpha0, opts)?;
        out.evaluations += search.evaluations;
        let Some(p) = accepted else {
            if !memory.is_empty() {
                memory.clear();
                continue;
            }
            out.message = Some(format!("line search failed at iteration {}", out.iterations));
            break;
        };
        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if memory.len() == opts.history {
                memory.pop_front();
            }
            memory.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        let decrease = (f - p.f) / f.abs().max(f64::MIN_POSITIVE);
        x = p.x;
        f = p.f;
        g = p.g;
        out.cost_history.push(f);
        out.iterations += 1;
        if decrease < opts.rel_tol {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    Ok(out)
}
