//! Smallest enclosing balls under L1, with centers restricted to a feasible set.
//!
//! `phi` maps R^m into R^(2^m) so that L1 distances become L∞ distances: the
//! coordinate for bitstring `b` (first coordinate most significant) is
//! `sum_i (-1)^{b_i} x_i`.

use crate::error::{Error, Result};
use crate::feasibility::FeasibleSet;
use crate::lp::{self, LpProblem, Relation, VarId};
use crate::optimizer::{clean_row, Diagnostics, Method, RowStrategy};
use crate::qif::{l1_distance, Channel};

/// Largest dimension accepted by [`embed_phi`].
pub const EMBED_CAP: usize = 20;
/// Largest dimension accepted by [`seb_l1_embedding`].
pub const EMBEDDING_LP_CAP: usize = 12;
/// Allowed excess over the L1 distance of the nearest feasible point when
/// choosing among projections.
const PROJECTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SebMethod {
    ExactLp,
    EmbeddingLp,
    Approx(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SebSolution {
    pub center: Vec<f64>,
    /// Largest L1 distance from `center` to a point.
    pub radius: f64,
    pub method: SebMethod,
    /// Lowest index of a point at distance `radius`.
    pub farthest_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBounds {
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
}

/// Euclidean core-set center with its radii in both metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxBall {
    pub center: Vec<f64>,
    pub l2_radius: f64,
    pub l1_radius: f64,
}

fn check_points<R: AsRef<[f64]>>(points: &[R]) -> Result<usize> {
    let m = points.first().ok_or(Error::EmptySet)?.as_ref().len();
    for p in points {
        if p.as_ref().len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: p.as_ref().len(),
            });
        }
    }
    Ok(m)
}

/// Farthest point from `center` under `dist`; ties go to the lowest index.
fn farthest<R: AsRef<[f64]>>(points: &[R], center: &[f64], dist: impl Fn(&[f64], &[f64]) -> f64) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = dist(p.as_ref(), center);
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn solution<R: AsRef<[f64]>>(points: &[R], center: Vec<f64>, method: SebMethod) -> SebSolution {
    let (farthest_index, radius) = farthest(points, &center, l1);
    SebSolution {
        center,
        radius,
        method,
        farthest_index,
    }
}

/// The L∞ ball: midpoint of the component-wise extrema.
pub fn seb_linf_direct<R: AsRef<[f64]>>(points: &[R]) -> Result<(Vec<f64>, f64)> {
    let m = check_points(points)?;
    let mut top = vec![f64::NEG_INFINITY; m];
    let mut bottom = vec![f64::INFINITY; m];
    for p in points {
        for (i, &x) in p.as_ref().iter().enumerate() {
            top[i] = top[i].max(x);
            bottom[i] = bottom[i].min(x);
        }
    }
    let center = top.iter().zip(&bottom).map(|(t, b)| 0.5 * (t + b)).collect();
    let radius = top
        .iter()
        .zip(&bottom)
        .map(|(t, b)| 0.5 * (t - b))
        .fold(0.0, f64::max);
    Ok((center, radius))
}

pub fn embed_phi(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() > EMBED_CAP {
        return Err(Error::DimensionCap {
            found: x.len(),
            cap: EMBED_CAP,
        });
    }
    let mut out = Vec::with_capacity(1 << x.len());
    out.push(0.0);
    for &xi in x {
        out = out.iter().flat_map(|&v| [v + xi, v - xi]).collect();
    }
    Ok(out)
}

/// Sign of coordinate `i` in column `b` of the embedding for dimension `m`.
fn phi_sign(m: usize, b: usize, i: usize) -> f64 {
    if (b >> (m - 1 - i)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Component-wise extrema of the embedded points, in one pass.
pub fn embedding_bounds<R: AsRef<[f64]>>(points: &[R]) -> Result<EmbeddingBounds> {
    let m = check_points(points)?;
    if m > EMBED_CAP {
        return Err(Error::DimensionCap { found: m, cap: EMBED_CAP });
    }
    let mut top = vec![f64::NEG_INFINITY; 1 << m];
    let mut bottom = vec![f64::INFINITY; 1 << m];
    for p in points {
        for (b, v) in embed_phi(p.as_ref())?.into_iter().enumerate() {
            top[b] = top[b].max(v);
            bottom[b] = bottom[b].min(v);
        }
    }
    Ok(EmbeddingBounds { top, bottom })
}

/// Over the full simplex some optimal center lies between the component-wise
/// minima and maxima of the points, so the box is added without changing the
/// optimum. It pins the returned center to that solution.
fn box_unconstrained_center<R: AsRef<[f64]>>(lp: &mut LpProblem, q: &[VarId], points: &[R], feasible: &FeasibleSet) {
    if !matches!(feasible, FeasibleSet::FullSimplex) {
        return;
    }
    for (i, &v) in q.iter().enumerate() {
        let column = points.iter().map(|p| p.as_ref()[i]);
        let top = column.clone().fold(f64::NEG_INFINITY, f64::max);
        let bottom = column.fold(f64::INFINITY, f64::min);
        lp.add_constraint([(v, 1.0)], Relation::Le, top);
        lp.add_constraint([(v, 1.0)], Relation::Ge, bottom);
    }
}

/// SEB through the L∞ embedding: an LP with `2 * 2^m` constraints whose size
/// does not depend on the number of points.
pub fn seb_l1_embedding<R: AsRef<[f64]>>(points: &[R], feasible: &FeasibleSet) -> Result<SebSolution> {
    let m = check_points(points)?;
    if m > EMBEDDING_LP_CAP {
        return Err(Error::DimensionCap {
            found: m,
            cap: EMBEDDING_LP_CAP,
        });
    }
    let bounds = embedding_bounds(points)?;
    let mut lp = LpProblem::new();
    let q = feasible.emit(&mut lp, m)?;
    box_unconstrained_center(&mut lp, &q, points, feasible);
    let z = lp.add_nonneg_var("z");
    lp.set_objective(z, 1.0);
    for b in 0..1usize << m {
        let signs: Vec<f64> = (0..m).map(|i| phi_sign(m, b, i)).collect();
        // z >= top_b - (q phi)_b  and  z >= (q phi)_b - bottom_b
        lp.add_constraint(
            [(z, 1.0)].into_iter().chain(q.iter().zip(&signs).map(|(&v, &c)| (v, c))),
            Relation::Ge,
            bounds.top[b],
        );
        lp.add_constraint(
            [(z, 1.0)].into_iter().chain(q.iter().zip(&signs).map(|(&v, &c)| (v, -c))),
            Relation::Ge,
            -bounds.bottom[b],
        );
    }
    let sol = lp::solve(&lp)?.into_optimal()?;
    let center = clean_row(q.iter().map(|&v| sol.value(v)).collect());
    Ok(solution(points, center, SebMethod::EmbeddingLp))
}

/// SEB through the auxiliary-variable LP with `O(n m)` variables.
///
/// Since `q >= 0`, `|q_i - y_i| = q_i` wherever `y_i = 0`, so only the support
/// of each point needs auxiliary variables:
/// `||q - y||_1 = 1 + sum_{i in supp y} (w_{y,i} - q_i)`.
pub fn seb_l1_exact<R: AsRef<[f64]>>(points: &[R], feasible: &FeasibleSet) -> Result<SebSolution> {
    let m = check_points(points)?;
    let mut distinct: Vec<&[f64]> = Vec::new();
    for p in points {
        if !distinct.contains(&p.as_ref()) {
            distinct.push(p.as_ref());
        }
    }
    let mut lp = LpProblem::new();
    let q = feasible.emit(&mut lp, m)?;
    box_unconstrained_center(&mut lp, &q, points, feasible);
    let z = add_radius_constraints(&mut lp, &q, &distinct);
    lp.set_objective(z, 1.0);
    let sol = lp::solve(&lp)?.into_optimal()?;
    let center = clean_row(q.iter().map(|&v| sol.value(v)).collect());
    Ok(solution(points, center, SebMethod::ExactLp))
}

/// Adds a variable bounding the L1 distance from the distribution `q` to
/// every point, with auxiliary variables on the points' supports only.
pub(crate) fn add_radius_constraints<R: AsRef<[f64]>>(lp: &mut LpProblem, q: &[VarId], points: &[R]) -> VarId {
    let z = lp.add_nonneg_var("z");
    for (k, y) in points.iter().enumerate() {
        let mut terms = vec![(z, 1.0)];
        for (i, &yi) in y.as_ref().iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let w = lp.add_nonneg_var(format!("w{k}_{i}"));
            lp.add_constraint([(w, 1.0), (q[i], -1.0)], Relation::Ge, -yi);
            lp.add_constraint([(w, 1.0), (q[i], 1.0)], Relation::Ge, yi);
            terms.push((w, -1.0));
            terms.push((q[i], 1.0));
        }
        lp.add_constraint(terms, Relation::Ge, 1.0);
    }
    z
}

/// Core-set iteration for the Euclidean SEB: start at the first point and
/// move toward the current farthest point with step `1/(k+1)` for
/// `ceil(1/eps^2)` rounds.
pub fn seb_l2_approx<R: AsRef<[f64]>>(points: &[R], eps: f64) -> Result<ApproxBall> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    check_points(points)?;
    let rounds = (1.0 / (eps * eps)).ceil() as usize;
    let mut center = points[0].as_ref().to_vec();
    for k in 1..=rounds {
        let (i, d) = farthest(points, &center, l2);
        if d == 0.0 {
            break;
        }
        let step = 1.0 / (k as f64 + 1.0);
        for (c, p) in center.iter_mut().zip(points[i].as_ref()) {
            *c += (p - *c) * step;
        }
    }
    Ok(ApproxBall {
        l2_radius: farthest(points, &center, l2).1,
        l1_radius: farthest(points, &center, l1).1,
        center,
    })
}

/// Euclidean core-set center projected onto `feasible` in L1; the radius is
/// recomputed in L1 at the projected center.
pub fn seb_l1_approx<R: AsRef<[f64]>>(points: &[R], feasible: &FeasibleSet, eps: f64) -> Result<SebSolution> {
    let ball = seb_l2_approx(points, eps)?;
    let center = if feasible.contains(&ball.center) {
        ball.center
    } else {
        project_to_feasible(&ball.center, feasible)?
    };
    Ok(solution(points, center, SebMethod::Approx(eps)))
}

/// The point of `feasible` closest to `c` in L1.
pub fn project_to_feasible(c: &[f64], feasible: &FeasibleSet) -> Result<Vec<f64>> {
    let m = c.len();
    let mut lp = LpProblem::new();
    let q = feasible.emit(&mut lp, m)?;
    let mut d = Vec::with_capacity(m);
    for (i, &ci) in c.iter().enumerate() {
        let di = lp.add_nonneg_var(format!("d{i}"));
        lp.set_objective(di, 1.0);
        lp.add_constraint([(di, 1.0), (q[i], -1.0)], Relation::Ge, -ci);
        lp.add_constraint([(di, 1.0), (q[i], 1.0)], Relation::Ge, ci);
        d.push(di);
    }
    let sol = lp::solve(&lp)?.into_optimal()?;
    // L1 projections are rarely unique; among them take one whose largest
    // coordinate change is smallest, so moved mass is spread thinly.
    let nearest = sol.objective_value;
    for &di in &d {
        lp.set_objective(di, 0.0);
    }
    lp.add_constraint(d.iter().map(|&di| (di, 1.0)), Relation::Le, nearest + PROJECTION_SLACK);
    let t = lp.add_nonneg_var("t");
    lp.set_objective(t, 1.0);
    for &di in &d {
        lp.add_constraint([(t, 1.0), (di, -1.0)], Relation::Ge, 0.0);
    }
    let spread = lp::solve(&lp)?;
    let sol = if spread.is_optimal() { spread } else { sol };
    Ok(clean_row(q.iter().map(|&v| sol.value(v)).collect()))
}

pub fn seb<R: AsRef<[f64]>>(points: &[R], feasible: &FeasibleSet, method: SebMethod) -> Result<SebSolution> {
    match method {
        SebMethod::ExactLp => seb_l1_exact(points, feasible),
        SebMethod::EmbeddingLp => seb_l1_embedding(points, feasible),
        SebMethod::Approx(eps) => seb_l1_approx(points, feasible, eps),
    }
}

/// The SEB center of the other rows as the designable row; its
/// s-distinguishing gain capacity is `1 + radius / 2`.
pub fn capacity_optimal_sdist(
    channel: &Channel,
    s: usize,
    feasible: &FeasibleSet,
    method: SebMethod,
) -> Result<RowStrategy> {
    channel.check_secret(s)?;
    let others = channel.other_rows(s);
    let sol = seb(&others, feasible, method)?;
    Ok(RowStrategy {
        method: Method::Seb(method),
        diagnostics: Diagnostics {
            objective: Some(1.0 + 0.5 * sol.radius),
            status: match method {
                SebMethod::Approx(_) => None,
                _ => Some(lp::LpStatus::Optimal),
            },
            projected: false,
            note: None,
        },
        q: sol.center,
    })
}

/// Largest L1 distance from `q` to the points; handy for oracles.
pub fn max_l1_distance<R: AsRef<[f64]>>(points: &[R], q: &[f64]) -> Result<f64> {
    let mut best = 0.0f64;
    for p in points {
        best = best.max(l1_distance(p.as_ref(), q)?);
    }
    Ok(best)
}
