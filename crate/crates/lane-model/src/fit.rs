//! Maximization step: equality-constrained Gauss-Newton fit of all lines.
//!
//! Continuity inside a line is handled by elimination: per line only the
//! first segment's four coefficients and each further segment's cubic
//! coefficient are free (M + 3 parameters for M segments), and the remaining
//! coefficients follow from the C2-continuity substitutions at the knots.
//! Parallelism between adjacent lines of a group is kept as explicit
//! slope-equality constraint rows solved through a KKT system. Temporal
//! smoothing enters as pseudo-measurements at the predicted control points,
//! weighted by the previous frame's information propagated through the
//! odometry transform.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2, RowDVector, Vector2};

use crate::config::FitConfig;
use crate::error::{Error, Result};
use crate::scalar::{real, to_f64, Real};
use crate::types::{
    slope_from_heading, Correspondences, Deriv, Feature, LaneModel, Line, LineId, OdometryDelta,
    Segment,
};

/// Condition-number threshold above which the KKT solve is considered
/// ill-conditioned and damping kicks in.
const ILL_CONDITION: f64 = 1e12;

/// Linear map from a line's reduced parameters to each segment's four
/// coefficients, for a fixed knot vector.
///
/// Reduced layout: (c0^1, c1^1, c2^1, c3^1, c3^2, ..., c3^M). Segment m+1 is
/// the unique C2-continuous continuation of segment m with the given cubic
/// coefficient, via the substitutions at knot s (between segments m and m+1):
///   c2' = c2 + 3 (c3 - c3') s
///   c1' = c1 + 2 (c2 - c2') s + 3 (c3 - c3') s^2
///   c0' = c0 + (c1 - c1') s + (c2 - c2') s^2 + (c3 - c3') s^3
#[derive(Debug, Clone)]
pub struct LineBasis<T> {
    knots: Vec<T>,
    tmats: Vec<DMatrix<T>>,
}

impl<T: Real> LineBasis<T> {
    /// Builds the expansion matrices for a strictly increasing knot vector.
    pub fn new(knots: Vec<T>) -> Self {
        assert!(knots.len() >= 2, "a line needs at least one segment");
        let segments = knots.len() - 1;
        let dim = segments + 3;
        let mut tmats = Vec::with_capacity(segments);
        let mut first = DMatrix::<T>::zeros(4, dim);
        for i in 0..4 {
            first[(i, i)] = T::one();
        }
        tmats.push(first);
        for seg in 1..segments {
            let s = knots[seg];
            let s2 = s * s;
            let s3 = s2 * s;
            let prev = tmats[seg - 1].clone();
            let mut sel = RowDVector::<T>::zeros(dim);
            sel[seg + 3] = T::one();
            let p0 = prev.row(0).clone_owned();
            let p1 = prev.row(1).clone_owned();
            let p2 = prev.row(2).clone_owned();
            let p3 = prev.row(3).clone_owned();
            let d3 = &p3 - &sel; // c3^m - c3^{m+1}, as a row functional
            let r2 = &p2 + &d3 * (real::<T>(3.0) * s);
            let r1 = &p1 + (&p2 - &r2) * (real::<T>(2.0) * s) + &d3 * (real::<T>(3.0) * s2);
            let r0 = &p0 + (&p1 - &r1) * s + (&p2 - &r2) * s2 + &d3 * s3;
            let mut t = DMatrix::<T>::zeros(4, dim);
            t.row_mut(0).copy_from(&r0);
            t.row_mut(1).copy_from(&r1);
            t.row_mut(2).copy_from(&r2);
            t.row_mut(3).copy_from(&sel);
            tmats.push(t);
        }
        Self { knots, tmats }
    }

    /// Number of reduced parameters: M + 3.
    pub fn dim(&self) -> usize {
        self.tmats.len() + 3
    }

    pub fn segment_count(&self) -> usize {
        self.tmats.len()
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    fn segment_index(&self, x: T) -> usize {
        let mut i = 0;
        while i + 1 < self.tmats.len() && x >= self.knots[i + 1] {
            i += 1;
        }
        i
    }

    fn weighted_row(&self, x: T, w: [T; 4]) -> DVector<T> {
        let t = &self.tmats[self.segment_index(x)];
        let wv = nalgebra::Vector4::new(w[0], w[1], w[2], w[3]);
        t.tr_mul(&wv).column(0).clone_owned()
    }

    /// Gradient of f(x) w.r.t. the reduced parameters.
    pub fn value_row(&self, x: T) -> DVector<T> {
        self.weighted_row(x, [T::one(), x, x * x, x * x * x])
    }

    /// Gradient of f'(x) w.r.t. the reduced parameters.
    pub fn slope_row(&self, x: T) -> DVector<T> {
        self.weighted_row(
            x,
            [
                T::zero(),
                T::one(),
                real::<T>(2.0) * x,
                real::<T>(3.0) * x * x,
            ],
        )
    }

    /// Expands reduced parameters into per-segment coefficients.
    pub fn expand(&self, reduced: &DVector<T>) -> Vec<[T; 4]> {
        self.tmats
            .iter()
            .map(|t| {
                let c = t * reduced;
                [c[0], c[1], c[2], c[3]]
            })
            .collect()
    }

    /// Recovers reduced parameters from a line's segments (exact for a line
    /// that is C2 on these knots, the least-squares-irrelevant projection
    /// otherwise).
    pub fn reduce(&self, line: &Line<T>) -> DVector<T> {
        let mut p = DVector::<T>::zeros(self.dim());
        for i in 0..4 {
            p[i] = line.segments[0].coeffs[i];
        }
        for m in 1..self.segment_count() {
            p[m + 3] = line.segments[m].coeffs[3];
        }
        p
    }
}

/// Previous-frame information for one line, in that frame's coordinates.
#[derive(Debug, Clone)]
pub struct PriorBlock<T> {
    /// Distinct knots the information matrix is parameterized over.
    pub knots: Vec<T>,
    /// Final system matrix block of the previous fit (measurements plus
    /// temporal terms, undamped).
    pub info: DMatrix<T>,
}

/// Temporal prior handed to the fit: the predicted model supplies the anchor
/// poses, the blocks supply their weights, and `delta` maps the block
/// coordinates (previous frame) into the current frame.
#[derive(Debug, Clone)]
pub struct FitPrior<T> {
    pub predicted: LaneModel<T>,
    pub blocks: BTreeMap<LineId, PriorBlock<T>>,
    pub delta: OdometryDelta<T>,
}

/// Outcome bookkeeping for one fit.
#[derive(Debug, Clone)]
pub struct FitReport<T> {
    pub iterations: usize,
    pub converged: bool,
    pub initial_cost: T,
    pub final_cost: T,
    /// Cost after each accepted step (starting with the initial cost);
    /// non-increasing by construction of the step control.
    pub cost_trace: Vec<T>,
    /// Largest |f'_i - f'_j| over all parallelism constraint points.
    pub max_constraint_residual: T,
    /// Per-line posterior information for the next frame's temporal prior.
    pub posterior: BTreeMap<LineId, PriorBlock<T>>,
    /// Lines skipped by the identifiability guard (kept their shape).
    pub excluded: Vec<LineId>,
}

struct LineSlot<T> {
    id: LineId,
    line_index: usize,
    offset: usize,
    basis: LineBasis<T>,
}

/// One 2-row measurement block tied to a single line.
struct Term<T> {
    slot: usize,
    jac: DMatrix<T>, // 2 x dim of the slot
    omega: Matrix2<T>,
    obs: Vector2<T>,
}

/// One slope-equality constraint row between two slots.
struct ConstraintRow<T> {
    left: usize,
    right: usize,
    row_left: DVector<T>,
    row_right: DVector<T>,
}

/// Assembled quadratic subproblem in the stacked reduced parameters.
pub struct Problem<T> {
    slots: Vec<LineSlot<T>>,
    terms: Vec<Term<T>>,
    constraints: Vec<ConstraintRow<T>>,
    dim: usize,
    excluded: Vec<LineId>,
}

impl<T: Real> Problem<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    fn slot_params(&self, params: &DVector<T>, slot: usize) -> DVector<T> {
        let s = &self.slots[slot];
        params.rows(s.offset, s.basis.dim()).clone_owned()
    }

    fn cost(&self, params: &DVector<T>) -> T {
        let mut cost = T::zero();
        for t in &self.terms {
            let p = self.slot_params(params, t.slot);
            let e = &t.jac * &p - t.obs;
            cost += (t.omega * e).dot(&e);
        }
        cost
    }

    fn hessian_and_gradient(&self, params: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        let mut h = DMatrix::<T>::zeros(self.dim, self.dim);
        let mut b = DVector::<T>::zeros(self.dim);
        for t in &self.terms {
            let s = &self.slots[t.slot];
            let p = self.slot_params(params, t.slot);
            let e = &t.jac * &p - t.obs;
            let jtw = t.jac.tr_mul(&t.omega);
            let hb = &jtw * &t.jac;
            let gb = &jtw * &e;
            let d = s.basis.dim();
            for i in 0..d {
                b[s.offset + i] += gb[i];
                for j in 0..d {
                    h[(s.offset + i, s.offset + j)] += hb[(i, j)];
                }
            }
        }
        (h, b)
    }

    fn constraint_system(&self, params: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        let m = self.constraints.len();
        let mut k = DMatrix::<T>::zeros(m, self.dim);
        let mut g = DVector::<T>::zeros(m);
        for (r, c) in self.constraints.iter().enumerate() {
            let ls = &self.slots[c.left];
            let rs = &self.slots[c.right];
            for i in 0..c.row_left.len() {
                k[(r, ls.offset + i)] += c.row_left[i];
            }
            for i in 0..c.row_right.len() {
                k[(r, rs.offset + i)] -= c.row_right[i];
            }
            g[r] = c.row_left.dot(&self.slot_params(params, c.left))
                - c.row_right.dot(&self.slot_params(params, c.right));
        }
        (k, g)
    }

    /// Stacks each included line's current reduced parameters.
    fn initial_params(&self, model: &LaneModel<T>) -> DVector<T> {
        let mut p = DVector::<T>::zeros(self.dim);
        for s in &self.slots {
            let reduced = s.basis.reduce(&model.lines[s.line_index]);
            p.rows_mut(s.offset, s.basis.dim()).copy_from(&reduced);
        }
        p
    }
}

/// Weight of the temporal pseudo-measurement at one predicted control point:
/// the previous information propagated through the rigid transform, plus
/// odometry noise. Falls back to a weak weight if the previous information
/// cannot be inverted.
fn anchor_omega<T: Real>(
    block: &PriorBlock<T>,
    prev_basis: &LineBasis<T>,
    delta: &OdometryDelta<T>,
    anchor_x: T,
    anchor_y: T,
    anchor_slope: T,
    cfg: &FitConfig<T>,
) -> Matrix2<T> {
    let (x_prev, _) = delta.inverse_transform_point(anchor_x, anchor_y);
    let s_val = prev_basis.value_row(x_prev);
    let s_slo = prev_basis.slope_row(x_prev);
    let dim = prev_basis.dim();
    let mut s = DMatrix::<T>::zeros(2, dim);
    s.row_mut(0).copy_from(&s_val.transpose());
    s.row_mut(1).copy_from(&s_slo.transpose());

    // Marginal covariance of (value, slope) at x_prev under the previous fit.
    let mut info = block.info.clone();
    let mut cov_prev: Option<Matrix2<T>> = None;
    let jitter_base = {
        let mut tr = T::zero();
        for i in 0..dim {
            tr += info[(i, i)];
        }
        (tr / real::<T>(dim as f64)).max(T::one()) * real::<T>(1e-12)
    };
    for attempt in 0..4 {
        if attempt > 0 {
            let j = jitter_base * real::<T>(1e3f64.powi(attempt));
            for i in 0..dim {
                info[(i, i)] += j;
            }
        }
        if let Some(x) = info.clone().lu().solve(&s.transpose()) {
            let c = &s * &x;
            let m = Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]);
            if m[(0, 0)].is_finite() && m[(1, 1)].is_finite() {
                cov_prev = Some(m);
                break;
            }
        }
    }
    let cov_prev =
        cov_prev.unwrap_or_else(|| Matrix2::from_diagonal(&Vector2::new(real(1e6), real(1e6))));

    // First-order propagation through the frame change: lateral scales with
    // cos(dpsi); the slope is a Moebius map with derivative
    // 1 / (cos(dpsi) + m sin(dpsi))^2 at the previous slope m.
    let (sn, cs) = (delta.dpsi.sin(), delta.dpsi.cos());
    let m_prev = slope_from_heading(anchor_slope.atan() + delta.dpsi);
    let denom = cs + m_prev * sn;
    let a = Matrix2::from_diagonal(&Vector2::new(cs, T::one() / (denom * denom)));
    let mut c = a * cov_prev * a.transpose();
    c[(0, 0)] += cfg.odo_sigma_y * cfg.odo_sigma_y;
    c[(1, 1)] += cfg.odo_sigma_theta * cfg.odo_sigma_theta;
    c.try_inverse()
        .unwrap_or_else(|| Matrix2::from_diagonal(&Vector2::new(real(1e-6), real(1e-6))))
}

/// Assembles the quadratic subproblem for the current correspondences.
///
/// A line enters the fit when it has at least M + 3 associated features or a
/// temporal prior (identifiability guard); other lines keep their shape.
/// Parallelism adds M + 2 slope-equality rows per adjacent pair of a group:
/// the shared knots plus the midpoint of the first segment, skipping points
/// beyond either member's own coverage.
pub fn build_problem<T: Real>(
    model: &LaneModel<T>,
    corr: &Correspondences,
    features: &[Feature<T>],
    prior: Option<&FitPrior<T>>,
    cfg: &FitConfig<T>,
) -> Problem<T> {
    let mut slots: Vec<LineSlot<T>> = Vec::new();
    let mut excluded = Vec::new();
    let mut offset = 0;
    for (line_index, line) in model.lines.iter().enumerate() {
        let basis = LineBasis::new(line.distinct_knots());
        let has_prior = prior
            .map(|p| p.blocks.contains_key(&line.id) && p.predicted.line_by_id(line.id).is_some())
            .unwrap_or(false);
        if corr.feature_count(line.id) >= basis.dim() || has_prior {
            let dim = basis.dim();
            slots.push(LineSlot {
                id: line.id,
                line_index,
                offset,
                basis,
            });
            offset += dim;
        } else {
            excluded.push(line.id);
        }
    }
    let slot_of = |id: LineId| slots.iter().position(|s| s.id == id);

    let mut terms = Vec::new();
    // Feature terms: residual (f(x) - y, f'(x) - tan theta), weighted by the
    // inverse (y, theta) covariance diagonal.
    for &(fi, id, _) in &corr.pairs {
        let Some(slot) = slot_of(id) else { continue };
        let f = &features[fi];
        let basis = &slots[slot].basis;
        let mut jac = DMatrix::<T>::zeros(2, basis.dim());
        jac.row_mut(0).copy_from(&basis.value_row(f.x).transpose());
        jac.row_mut(1).copy_from(&basis.slope_row(f.x).transpose());
        let omega = Matrix2::from_diagonal(&Vector2::new(
            T::one() / f.cov[(1, 1)],
            T::one() / f.cov[(2, 2)],
        ));
        terms.push(Term {
            slot,
            jac,
            omega,
            obs: Vector2::new(f.y, slope_from_heading(f.theta)),
        });
    }

    // Temporal terms: one pseudo-measurement per predicted control point.
    if let Some(prior) = prior {
        for slot_idx in 0..slots.len() {
            let id = slots[slot_idx].id;
            let (Some(block), Some(pred)) =
                (prior.blocks.get(&id), prior.predicted.line_by_id(id))
            else {
                continue;
            };
            let prev_basis = LineBasis::new(block.knots.clone());
            for &sx in &pred.distinct_knots() {
                let sy = pred.eval(sx, Deriv::Value);
                let sm = pred.eval(sx, Deriv::Slope);
                let omega = anchor_omega(block, &prev_basis, &prior.delta, sx, sy, sm, cfg);
                let basis = &slots[slot_idx].basis;
                let mut jac = DMatrix::<T>::zeros(2, basis.dim());
                jac.row_mut(0).copy_from(&basis.value_row(sx).transpose());
                jac.row_mut(1).copy_from(&basis.slope_row(sx).transpose());
                terms.push(Term {
                    slot: slot_idx,
                    jac,
                    omega,
                    obs: Vector2::new(sy, sm),
                });
            }
        }
    }

    // Parallelism rows per adjacent pair: shared knots plus the first
    // segment's midpoint ("three for the first segment and one per
    // additional segment").
    let mut constraints = Vec::new();
    for group in &model.parallel_groups {
        for pair in group.windows(2) {
            let (Some(ls), Some(rs)) = (slot_of(pair[0]), slot_of(pair[1])) else {
                continue;
            };
            let group_knots = if slots[ls].basis.knots().last() >= slots[rs].basis.knots().last() {
                slots[ls].basis.knots().to_vec()
            } else {
                slots[rs].basis.knots().to_vec()
            };
            let cover = slots[ls]
                .basis
                .knots()
                .last()
                .copied()
                .unwrap()
                .min(slots[rs].basis.knots().last().copied().unwrap());
            let mut points = Vec::with_capacity(group_knots.len() + 1);
            points.push(group_knots[0]);
            points.push((group_knots[0] + group_knots[1]) / real::<T>(2.0));
            points.extend_from_slice(&group_knots[1..]);
            let eps = real::<T>(1e-9);
            for &x in &points {
                if x > cover + eps {
                    continue;
                }
                constraints.push(ConstraintRow {
                    left: ls,
                    right: rs,
                    row_left: slots[ls].basis.slope_row(x),
                    row_right: slots[rs].basis.slope_row(x),
                });
            }
        }
    }

    Problem {
        dim: offset,
        slots,
        terms,
        constraints,
        excluded,
    }
}

/// Solves the damped KKT system
///   [ H + mu I  -K^T ] [ delta  ]   [ -b ]
///   [   -K        0  ] [ lambda ] = [  g ]
/// escalating mu while the system is singular or ill-conditioned. Returns the
/// primal step and the damping that was used.
///
/// The system is symmetrically equilibrated (Ruiz scaling) before the
/// condition estimate so that the benign scale disparity of a global-x
/// monomial basis is not mistaken for degeneracy; the scaling leaves the
/// solution unchanged.
pub fn solve_constrained<T: Real>(
    h: &DMatrix<T>,
    b: &DVector<T>,
    k: &DMatrix<T>,
    g: &DVector<T>,
    mu_start: T,
    cfg: &FitConfig<T>,
) -> Result<(DVector<T>, T)> {
    let n = h.nrows();
    let m = k.nrows();
    let mut mu = mu_start;
    loop {
        let mut a = DMatrix::<T>::zeros(n + m, n + m);
        a.view_mut((0, 0), (n, n)).copy_from(h);
        for i in 0..n {
            a[(i, i)] += mu;
        }
        if m > 0 {
            a.view_mut((0, n), (n, m)).copy_from(&-k.transpose());
            a.view_mut((n, 0), (m, n)).copy_from(&-k);
        }
        let mut rhs = DVector::<T>::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&-b);
        if m > 0 {
            rhs.rows_mut(n, m).copy_from(g);
        }

        // Ruiz equilibration: d_i <- d_i / sqrt(||row_i||_inf), applied
        // symmetrically until row norms settle near one.
        let total = n + m;
        let mut scale = DVector::<T>::from_element(total, T::one());
        let mut scaled = a.clone();
        for _ in 0..3 {
            let mut step = DVector::<T>::from_element(total, T::one());
            for i in 0..total {
                let r = scaled.row(i).amax();
                if r > T::zero() && r.is_finite() {
                    step[i] = T::one() / r.sqrt();
                }
            }
            for i in 0..total {
                for j in 0..total {
                    scaled[(i, j)] *= step[i] * step[j];
                }
            }
            for i in 0..total {
                scale[i] *= step[i];
            }
        }

        let sv = scaled.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let well_conditioned =
            smin > T::zero() && smax / smin <= real::<T>(ILL_CONDITION) && smax.is_finite();
        if well_conditioned {
            let scaled_rhs = DVector::<T>::from_fn(total, |i, _| rhs[i] * scale[i]);
            if let Some(z) = scaled.full_piv_lu().solve(&scaled_rhs) {
                let sol = DVector::<T>::from_fn(n, |i, _| z[i] * scale[i]);
                return Ok((sol, mu));
            }
        }
        mu = if mu == T::zero() {
            cfg.damping_init
        } else {
            mu * real::<T>(10.0)
        };
        if mu > cfg.damping_max {
            return Err(Error::FitSingular {
                max_damping: to_f64(cfg.damping_max),
            });
        }
    }
}

/// Runs the constrained Gauss-Newton loop and writes the fitted coefficients
/// back into a copy of the model. Excluded lines keep their shape (projected
/// onto the C2 basis so the model invariants hold).
pub fn fit<T: Real>(
    model: &LaneModel<T>,
    corr: &Correspondences,
    features: &[Feature<T>],
    prior: Option<&FitPrior<T>>,
    cfg: &FitConfig<T>,
) -> Result<(LaneModel<T>, FitReport<T>)> {
    let problem = build_problem(model, corr, features, prior, cfg);
    let mut out = model.clone();

    // Keep every line representable in the reduced basis, fitted or not.
    for line in &mut out.lines {
        let basis = LineBasis::new(line.distinct_knots());
        write_back(line, &basis, &basis.reduce(line));
    }

    if problem.dim == 0 {
        let report = FitReport {
            iterations: 0,
            converged: true,
            initial_cost: T::zero(),
            final_cost: T::zero(),
            cost_trace: Vec::new(),
            max_constraint_residual: T::zero(),
            posterior: BTreeMap::new(),
            excluded: problem.excluded,
        };
        return Ok((out, report));
    }

    let mut params = problem.initial_params(model);
    let initial_cost = problem.cost(&params);
    let mut cost_trace = vec![initial_cost];
    let mut cost = initial_cost;
    let mut converged = false;
    let mut iterations = 0;
    let mut mu = T::zero();

    while iterations < cfg.max_iters {
        iterations += 1;
        let (h, b) = problem.hessian_and_gradient(&params);
        let (k, g) = problem.constraint_system(&params);
        let mut accepted = false;
        loop {
            let (delta, used_mu) = solve_constrained(&h, &b, &k, &g, mu, cfg)?;
            let candidate = &params + &delta;
            let cand_cost = problem.cost(&candidate);
            if cand_cost <= cost * (T::one() + real::<T>(1e-12)) + real::<T>(1e-15) {
                params = candidate;
                cost = cand_cost;
                cost_trace.push(cand_cost);
                mu = T::zero();
                accepted = true;
                if delta.amax() < cfg.step_tol {
                    converged = true;
                }
                break;
            }
            // Cost went up: damp harder and re-solve the same linearization.
            mu = if used_mu == T::zero() {
                cfg.damping_init
            } else {
                used_mu * real::<T>(10.0)
            };
            if mu > cfg.damping_max {
                break;
            }
        }
        if !accepted || converged {
            break;
        }
    }

    // Write back fitted coefficients and collect the posterior information.
    let mut posterior = BTreeMap::new();
    let (h_final, _) = problem.hessian_and_gradient(&params);
    for s in &problem.slots {
        let reduced = params.rows(s.offset, s.basis.dim()).clone_owned();
        write_back(&mut out.lines[s.line_index], &s.basis, &reduced);
        posterior.insert(
            s.id,
            PriorBlock {
                knots: s.basis.knots().to_vec(),
                info: h_final
                    .view((s.offset, s.offset), (s.basis.dim(), s.basis.dim()))
                    .clone_owned(),
            },
        );
    }

    let (_, g_final) = problem.constraint_system(&params);
    let max_constraint_residual = g_final.amax();
    let report = FitReport {
        iterations,
        converged,
        initial_cost,
        final_cost: cost,
        cost_trace,
        max_constraint_residual,
        posterior,
        excluded: problem.excluded,
    };
    Ok((out, report))
}

fn write_back<T: Real>(line: &mut Line<T>, basis: &LineBasis<T>, reduced: &DVector<T>) {
    let coeffs = basis.expand(reduced);
    let knots = basis.knots();
    line.segments = coeffs
        .into_iter()
        .enumerate()
        .map(|(i, c)| Segment::new(knots[i], knots[i + 1], c))
        .collect();
}
