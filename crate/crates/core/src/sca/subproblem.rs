//! Smooth convex subproblems and their interior-point solver.
//!
//! A [`SubproblemSpec`] maximizes a concave [`Func`] subject to convex
//! `Func ≤ 0` inequalities and linear equalities. Each `Func` is a sum of
//! small [`Piece`]s over a few variables plus a sparse linear part, which is
//! all the trajectory, power and energy subproblems need.
//!
//! The solver is a primal-dual interior-point method that keeps the
//! inequalities strictly feasible. Inequalities whose support is large (the
//! max-min epigraph rows and the energy budget) are *lifted*: instead of
//! adding their dense rank-one curvature `(λ/−f)·∇f∇fᵀ` to the Hessian, each
//! gets its own row in the quasi-definite KKT matrix with diagonal `f/λ`. Variables are
//! ordered by stage (time slot), then lifted rows, then variables marked
//! [`OrderKey::Last`] (epigraph and phase-I slacks), so the LDLᵀ factor stays
//! banded.

use std::f64::consts::LN_2;

use serde::Serialize;

use super::ldl::{LdlFactor, UpperCsc};
use crate::scalar::Vec2;

/// Inequalities with more non-`Last` variables than this are lifted.
const LIFT_THRESHOLD: usize = 16;

/// `numerator / (offset + coeffs·x_local)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvTerm {
    pub numerator: f64,
    pub offset: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    /// `½ xᵀQx + gᵀx + c` over `idx` (`q` row-major).
    Quadratic {
        idx: Vec<usize>,
        q: Vec<f64>,
        g: Vec<f64>,
        c: f64,
    },
    /// `weight·‖(x_i, x_j)‖³`.
    NormCubed { idx: [usize; 2], weight: f64 },
    /// `weight / sqrt(x_i)`, domain `x_i > 0`.
    InvSqrt { idx: usize, weight: f64 },
    /// `weight·log2(1 + Σ_j a_j / e_j(x))`, domain `e_j > 0`.
    LogSumInv {
        idx: Vec<usize>,
        terms: Vec<InvTerm>,
        weight: f64,
    },
    /// `−weight·log2(offset + coeffs·x)`, domain argument `> 0`.
    NegLog2Affine {
        idx: Vec<usize>,
        coeffs: Vec<f64>,
        offset: f64,
        weight: f64,
    },
}

impl Piece {
    /// `weight·‖Σ_i c_i·(x_{i0}, x_{i1}) + offset‖²`.
    pub fn norm_sq_affine(pairs: &[([usize; 2], f64)], offset: Vec2<f64>, weight: f64) -> Self {
        let mut idx = Vec::with_capacity(2 * pairs.len());
        let mut coef = Vec::with_capacity(2 * pairs.len());
        for &(p, c) in pairs {
            idx.extend_from_slice(&p);
            coef.push(c);
        }
        let n = idx.len();
        let mut q = vec![0.0; n * n];
        let mut g = vec![0.0; n];
        for (a, &ca) in coef.iter().enumerate() {
            for (b, &cb) in coef.iter().enumerate() {
                for axis in 0..2 {
                    q[(2 * a + axis) * n + 2 * b + axis] = 2.0 * weight * ca * cb;
                }
            }
            g[2 * a] = 2.0 * weight * ca * offset.x;
            g[2 * a + 1] = 2.0 * weight * ca * offset.y;
        }
        Piece::Quadratic {
            idx,
            q,
            g,
            c: weight * offset.norm_sq(),
        }
    }

    fn indices(&self) -> Vec<usize> {
        match self {
            Piece::Quadratic { idx, .. } | Piece::LogSumInv { idx, .. } | Piece::NegLog2Affine { idx, .. } => {
                idx.clone()
            }
            Piece::NormCubed { idx, .. } => idx.to_vec(),
            Piece::InvSqrt { idx, .. } => vec![*idx],
        }
    }

    /// Value, and optionally gradient/Hessian contributions in global indices.
    fn eval(&self, x: &[f64], mut out: Option<&mut Derivs>) -> Option<f64> {
        match self {
            Piece::Quadratic { idx, q, g, c } => {
                let n = idx.len();
                let mut val = *c;
                for a in 0..n {
                    let xa = x[idx[a]];
                    let mut qa = 0.0;
                    for b in 0..n {
                        qa += q[a * n + b] * x[idx[b]];
                    }
                    val += xa * (0.5 * qa + g[a]);
                    if let Some(d) = out.as_deref_mut() {
                        d.grad.push((idx[a], qa + g[a]));
                        for b in 0..n {
                            if q[a * n + b] != 0.0 {
                                d.hess.push((idx[a], idx[b], q[a * n + b]));
                            }
                        }
                    }
                }
                Some(val)
            }
            Piece::NormCubed { idx, weight } => {
                let (u, v) = (x[idx[0]], x[idx[1]]);
                let r = u.hypot(v);
                if let Some(d) = out {
                    d.grad.push((idx[0], 3.0 * weight * r * u));
                    d.grad.push((idx[1], 3.0 * weight * r * v));
                    if r > 0.0 {
                        let k = 3.0 * weight;
                        d.hess.push((idx[0], idx[0], k * (r + u * u / r)));
                        d.hess.push((idx[1], idx[1], k * (r + v * v / r)));
                        d.hess.push((idx[0], idx[1], k * u * v / r));
                        d.hess.push((idx[1], idx[0], k * u * v / r));
                    }
                }
                Some(weight * r * r * r)
            }
            Piece::InvSqrt { idx, weight } => {
                let t = x[*idx];
                if !(t > 0.0) {
                    return None;
                }
                let s = t.sqrt();
                if let Some(d) = out {
                    d.grad.push((*idx, -0.5 * weight / (t * s)));
                    d.hess.push((*idx, *idx, 0.75 * weight / (t * t * s)));
                }
                Some(weight / s)
            }
            Piece::LogSumInv { idx, terms, weight } => {
                let n = idx.len();
                let mut total = 0.0;
                let mut es = Vec::with_capacity(terms.len());
                for t in terms {
                    let e = t.offset + (0..n).map(|a| t.coeffs[a] * x[idx[a]]).sum::<f64>();
                    if !(e > 0.0) {
                        return None;
                    }
                    total += t.numerator / e;
                    es.push(e);
                }
                if let Some(d) = out {
                    let one_u = 1.0 + total;
                    let mut grad_u = vec![0.0; n];
                    let mut hess_u = vec![0.0; n * n];
                    for (t, &e) in terms.iter().zip(&es) {
                        let g1 = -t.numerator / (e * e);
                        let h1 = 2.0 * t.numerator / (e * e * e);
                        for a in 0..n {
                            grad_u[a] += g1 * t.coeffs[a];
                            for b in 0..n {
                                hess_u[a * n + b] += h1 * t.coeffs[a] * t.coeffs[b];
                            }
                        }
                    }
                    let k = weight / LN_2;
                    for a in 0..n {
                        d.grad.push((idx[a], k * grad_u[a] / one_u));
                        for b in 0..n {
                            let h = k * (hess_u[a * n + b] / one_u - grad_u[a] * grad_u[b] / (one_u * one_u));
                            if h != 0.0 {
                                d.hess.push((idx[a], idx[b], h));
                            }
                        }
                    }
                }
                Some(weight * total.ln_1p() / LN_2)
            }
            Piece::NegLog2Affine {
                idx,
                coeffs,
                offset,
                weight,
            } => {
                let n = idx.len();
                let z = offset + (0..n).map(|a| coeffs[a] * x[idx[a]]).sum::<f64>();
                if !(z > 0.0) {
                    return None;
                }
                if let Some(d) = out {
                    let k = weight / LN_2;
                    for a in 0..n {
                        d.grad.push((idx[a], -k * coeffs[a] / z));
                        for b in 0..n {
                            let h = k * coeffs[a] * coeffs[b] / (z * z);
                            if h != 0.0 {
                                d.hess.push((idx[a], idx[b], h));
                            }
                        }
                    }
                }
                Some(-weight * z.ln() / LN_2)
            }
        }
    }
}

#[derive(Debug, Default)]
struct Derivs {
    grad: Vec<(usize, f64)>,
    hess: Vec<(usize, usize, f64)>,
}

impl Derivs {
    fn clear(&mut self) {
        self.grad.clear();
        self.hess.clear();
    }

    fn merged_grad(&mut self) -> Vec<(usize, f64)> {
        self.grad.sort_unstable_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.grad.len());
        for &(i, v) in &self.grad {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        out
    }
}

/// Sum of pieces, a sparse linear part and a constant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Func {
    pub pieces: Vec<Piece>,
    pub linear: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Func {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_constant(constant: f64) -> Self {
        Self {
            constant,
            ..Self::default()
        }
    }

    pub fn push(&mut self, p: Piece) -> &mut Self {
        self.pieces.push(p);
        self
    }

    pub fn add_linear(&mut self, i: usize, c: f64) -> &mut Self {
        self.linear.push((i, c));
        self
    }

    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.constant;
        for &(i, c) in &self.linear {
            v += c * x[i];
        }
        for p in &self.pieces {
            v += p.eval(x, None)?;
        }
        v.is_finite().then_some(v)
    }

    fn eval_derivs(&self, x: &[f64], d: &mut Derivs) -> Option<f64> {
        d.clear();
        let mut v = self.constant;
        for &(i, c) in &self.linear {
            v += c * x[i];
            d.grad.push((i, c));
        }
        for p in &self.pieces {
            v += p.eval(x, Some(d))?;
        }
        v.is_finite().then_some(v)
    }

    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.linear.iter().map(|e| e.0).collect();
        for p in &self.pieces {
            s.extend(p.indices());
        }
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearEq {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
    pub stage: u32,
}

impl LinearEq {
    fn residual(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() - self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum OrderKey {
    Stage(u32),
    /// Eliminated after the lifted rows (epigraph variables).
    Last,
}

/// Maximize `objective` subject to `inequalities[i](x) ≤ 0` and
/// `equalities`.
#[derive(Debug, Clone, Default)]
pub struct SubproblemSpec {
    pub num_vars: usize,
    pub order: Vec<OrderKey>,
    pub objective: Func,
    pub inequalities: Vec<Func>,
    pub equalities: Vec<LinearEq>,
}

impl SubproblemSpec {
    pub fn new(order: Vec<OrderKey>) -> Self {
        Self {
            num_vars: order.len(),
            order,
            ..Self::default()
        }
    }

    pub fn max_violation(&self, x: &[f64]) -> Option<f64> {
        let mut v = 0.0f64;
        for f in &self.inequalities {
            v = v.max(f.eval(x)?);
        }
        for e in &self.equalities {
            v = v.max(e.residual(x).abs());
        }
        Some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol_kkt: f64,
    pub tol_feas: f64,
    /// Absolute duality-gap target of the barrier path (objective units).
    pub tol_gap: f64,
    pub max_newton: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-6,
            tol_feas: 1e-8,
            tol_gap: 1e-9,
            max_newton: 600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubproblemStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubproblemSolution {
    pub point: Vec<f64>,
    pub objective: f64,
    pub stationarity: f64,
    pub max_violation: f64,
    pub status: SubproblemStatus,
    pub newton_iterations: usize,
}

/// Solve `spec` from `warm_start`. Never returns a point worse than a
/// feasible warm start.
pub fn solve_convex_subproblem(spec: &SubproblemSpec, warm_start: &[f64], tol: &Tolerances) -> SubproblemSolution {
    assert_eq!(warm_start.len(), spec.num_vars, "warm start length");
    let infeasible = |x: &[f64], viol: f64| SubproblemSolution {
        point: x.to_vec(),
        objective: spec.objective.eval(x).unwrap_or(f64::NAN),
        stationarity: f64::INFINITY,
        max_violation: viol,
        status: SubproblemStatus::Infeasible,
        newton_iterations: 0,
    };
    let Some(viol0) = spec.max_violation(warm_start) else {
        return infeasible(warm_start, f64::INFINITY);
    };
    let Some(obj0) = spec.objective.eval(warm_start) else {
        return infeasible(warm_start, viol0);
    };
    let warm_ok = viol0 <= tol.tol_feas;
    let warm_solution = |status, iters| SubproblemSolution {
        point: warm_start.to_vec(),
        objective: obj0,
        stationarity: f64::INFINITY,
        max_violation: viol0,
        status,
        newton_iterations: iters,
    };

    let strict = spec
        .inequalities
        .iter()
        .all(|f| f.eval(warm_start).is_some_and(|v| v < 0.0));
    let mut budget = tol.max_newton;
    let mut x = warm_start.to_vec();
    if !strict {
        match phase_one(spec, warm_start, &mut budget) {
            Some(p) => x = p,
            None if warm_ok => return warm_solution(SubproblemStatus::MaxIter, tol.max_newton - budget),
            None => return infeasible(warm_start, viol0),
        }
    }

    let mut kkt = Kkt::new(spec);
    let outcome = kkt.run(&mut x, tol, &mut budget, |_| false);
    let used = tol.max_newton - budget;
    let objective = spec.objective.eval(&x).unwrap_or(f64::NEG_INFINITY);
    let violation = spec.max_violation(&x).unwrap_or(f64::INFINITY);
    if warm_ok && !(objective >= obj0) {
        return warm_solution(SubproblemStatus::MaxIter, used);
    }
    let stationarity = outcome.stationarity / (1.0 + objective.abs());
    let status = if stationarity <= tol.tol_kkt && violation <= tol.tol_feas {
        SubproblemStatus::Optimal
    } else {
        SubproblemStatus::MaxIter
    };
    SubproblemSolution {
        point: x,
        objective,
        stationarity,
        max_violation: violation,
        status,
        newton_iterations: used,
    }
}

/// Find a strictly feasible point by minimizing a common slack `s` over
/// `f_i(x) ≤ s`.
fn phase_one(spec: &SubproblemSpec, x0: &[f64], budget: &mut usize) -> Option<Vec<f64>> {
    let n = spec.num_vars;
    let mut aug = SubproblemSpec {
        num_vars: n + 1,
        order: spec.order.iter().copied().chain([OrderKey::Last]).collect(),
        objective: Func::new(),
        inequalities: spec.inequalities.clone(),
        equalities: spec.equalities.clone(),
    };
    aug.objective.add_linear(n, -1.0);
    for f in &mut aug.inequalities {
        f.add_linear(n, -1.0);
    }
    let smax = spec
        .inequalities
        .iter()
        .map(|f| f.eval(x0))
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))?;
    let mut x: Vec<f64> = x0.iter().copied().chain([smax + 1e-3 * (1.0 + smax.abs())]).collect();
    // stop once comfortably inside; a thinner interior is still accepted below
    let target = -1e-3 * (1.0 + smax.abs());
    let tol = Tolerances {
        tol_gap: 1e-12,
        ..Tolerances::default()
    };
    let mut kkt = Kkt::new(&aug);
    kkt.run(&mut x, &tol, budget, |x| x[n] < target);
    if x[n] < 0.0 {
        x.truncate(n);
        Some(x)
    } else {
        None
    }
}

struct Outcome {
    stationarity: f64,
}

/// KKT assembly and primal-dual path following for one spec.
struct Kkt<'a> {
    spec: &'a SubproblemSpec,
    lifted: Vec<bool>,
    /// Position of each variable in the KKT ordering.
    var_pos: Vec<usize>,
    eq_pos: Vec<usize>,
    /// KKT row of each lifted inequality (`usize::MAX` when local).
    lift_pos: Vec<usize>,
    dim: usize,
    scratch: Derivs,
}

/// Residuals of the perturbed KKT conditions at one primal-dual point.
struct Residuals {
    dual: Vec<f64>,
    cent: Vec<f64>,
    pri: Vec<f64>,
}

impl Residuals {
    fn norm(&self) -> f64 {
        self.dual
            .iter()
            .chain(&self.cent)
            .chain(&self.pri)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl<'a> Kkt<'a> {
    fn new(spec: &'a SubproblemSpec) -> Self {
        let last: Vec<bool> = spec.order.iter().map(|k| *k == OrderKey::Last).collect();
        let lifted: Vec<bool> = spec
            .inequalities
            .iter()
            .map(|f| f.support().iter().filter(|&&i| !last[i]).count() > LIFT_THRESHOLD)
            .collect();
        // (group, stage, kind, index)
        let mut keys: Vec<(u8, u32, u8, usize)> = Vec::new();
        for (i, k) in spec.order.iter().enumerate() {
            keys.push(match k {
                OrderKey::Stage(s) => (0, *s, 0, i),
                OrderKey::Last => (2, 0, 0, i),
            });
        }
        for (j, e) in spec.equalities.iter().enumerate() {
            keys.push((0, e.stage, 1, j));
        }
        for (c, &l) in lifted.iter().enumerate() {
            if l {
                keys.push((1, 0, 2, c));
            }
        }
        keys.sort_unstable();
        let mut var_pos = vec![0; spec.num_vars];
        let mut eq_pos = vec![0; spec.equalities.len()];
        let mut lift_pos = vec![usize::MAX; spec.inequalities.len()];
        for (pos, &(group, _, kind, idx)) in keys.iter().enumerate() {
            match (group, kind) {
                (1, _) => lift_pos[idx] = pos,
                (_, 1) => eq_pos[idx] = pos,
                _ => var_pos[idx] = pos,
            }
        }
        Self {
            spec,
            lifted,
            var_pos,
            eq_pos,
            lift_pos,
            dim: keys.len(),
            scratch: Derivs::default(),
        }
    }

    /// Constraint values, `None` outside the domain or the strict interior.
    fn strictly_feasible(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.spec.objective.eval(x)?;
        let mut out = Vec::with_capacity(self.spec.inequalities.len());
        for f in &self.spec.inequalities {
            let v = f.eval(x)?;
            if !(v < 0.0) {
                return None;
            }
            out.push(v);
        }
        Some(out)
    }

    /// Residuals for minimizing `−objective`.
    fn residuals(&mut self, x: &[f64], lambda: &[f64], nu: &[f64], t: f64) -> Option<Residuals> {
        let spec = self.spec;
        let mut dual = vec![0.0; spec.num_vars];
        spec.objective.eval_derivs(x, &mut self.scratch)?;
        for &(i, g) in &self.scratch.grad {
            dual[i] -= g;
        }
        let mut cent = Vec::with_capacity(lambda.len());
        for (c, f) in spec.inequalities.iter().enumerate() {
            let fi = f.eval_derivs(x, &mut self.scratch)?;
            if !(fi < 0.0) {
                return None;
            }
            for &(i, g) in &self.scratch.grad {
                dual[i] += lambda[c] * g;
            }
            cent.push(-lambda[c] * fi - 1.0 / t);
        }
        let mut pri = Vec::with_capacity(nu.len());
        for (j, e) in spec.equalities.iter().enumerate() {
            for &(i, c) in &e.terms {
                dual[i] += c * nu[j];
            }
            pri.push(e.residual(x));
        }
        Some(Residuals { dual, cent, pri })
    }

    /// Primal-dual Newton direction. Returns `(dx, dlambda, nu_plus)`.
    fn direction(&mut self, x: &[f64], lambda: &[f64], t: f64) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let spec = self.spec;
        let n = spec.num_vars;
        let mut rhs_x = vec![0.0; n];
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        let mut hdiag = vec![0.0; n];

        spec.objective.eval_derivs(x, &mut self.scratch)?;
        for &(i, g) in &self.scratch.grad {
            rhs_x[i] += g;
        }
        for &(i, j, h) in &self.scratch.hess {
            if i <= j {
                trip.push((self.var_pos[i], self.var_pos[j], -h));
            }
            if i == j {
                hdiag[i] -= h;
            }
        }
        let mut cons: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(spec.inequalities.len());
        for (c, f) in spec.inequalities.iter().enumerate() {
            let fi = f.eval_derivs(x, &mut self.scratch)?;
            if !(fi < 0.0) {
                return None;
            }
            let lam = lambda[c];
            for &(i, j, h) in &self.scratch.hess {
                if i <= j {
                    trip.push((self.var_pos[i], self.var_pos[j], lam * h));
                }
                if i == j {
                    hdiag[i] += lam * h;
                }
            }
            let g = self.scratch.merged_grad();
            for &(i, gi) in &g {
                rhs_x[i] -= gi / (t * -fi);
            }
            if self.lifted[c] {
                let row = self.lift_pos[c];
                for &(i, gi) in &g {
                    trip.push((self.var_pos[i], row, gi));
                }
                trip.push((row, row, fi / lam));
            } else {
                let w = lam / -fi;
                for (a, &(i, gi)) in g.iter().enumerate() {
                    hdiag[i] += w * gi * gi;
                    for &(j, gj) in &g[a..] {
                        trip.push((self.var_pos[i], self.var_pos[j], w * gi * gj));
                    }
                }
            }
            cons.push((fi, g));
        }
        let mut diag_reg: Vec<(usize, f64)> = Vec::new();
        // keep the equality regularization well below the Schur complement
        // A·H⁻¹·Aᵀ, which shrinks as the barrier curvature grows
        let hmax = hdiag.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (j, e) in spec.equalities.iter().enumerate() {
            for &(i, c) in &e.terms {
                trip.push((self.var_pos[i], self.eq_pos[j], c));
            }
            diag_reg.push((self.eq_pos[j], -1e-10 / hmax));
        }
        for i in 0..n {
            diag_reg.push((self.var_pos[i], 1e-11 * (1.0 + hdiag[i].abs())));
        }
        for &(p, r) in &diag_reg {
            trip.push((p, p, r));
        }
        let kkt = UpperCsc::from_triplets(self.dim, &mut trip);
        let factor = LdlFactor::factor(&kkt).ok()?;

        let mut rhs = vec![0.0; self.dim];
        for i in 0..n {
            rhs[self.var_pos[i]] = rhs_x[i];
        }
        for (j, e) in spec.equalities.iter().enumerate() {
            rhs[self.eq_pos[j]] = -e.residual(x);
        }
        let mut sol = rhs.clone();
        factor.solve_in_place(&mut sol);
        // iterative refinement against the unregularized matrix
        let scale = inf_norm(&rhs).max(1e-300);
        for _ in 0..8 {
            let mut r = kkt.sym_mul(&sol);
            for &(p, reg) in &diag_reg {
                r[p] -= reg * sol[p];
            }
            let mut res: Vec<f64> = rhs.iter().zip(&r).map(|(a, b)| a - b).collect();
            if inf_norm(&res) <= 1e-15 * scale {
                break;
            }
            factor.solve_in_place(&mut res);
            for (s, d) in sol.iter_mut().zip(&res) {
                *s += d;
            }
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dx: Vec<f64> = (0..n).map(|i| sol[self.var_pos[i]]).collect();
        let dlambda = cons
            .iter()
            .zip(lambda)
            .map(|((fi, g), &lam)| {
                let gdx: f64 = g.iter().map(|&(i, gi)| gi * dx[i]).sum();
                -lam + (1.0 / t + lam * gdx) / -fi
            })
            .collect();
        let nu_plus = (0..spec.equalities.len()).map(|j| sol[self.eq_pos[j]]).collect();
        Some((dx, dlambda, nu_plus))
    }
    /// Primal-dual interior-point iterations from the strictly feasible `x`.
    /// The barrier parameter `t` is raised only once the iterate is centred.
    /// `early_stop` is checked after every step.
    fn run(
        &mut self,
        x: &mut Vec<f64>,
        tol: &Tolerances,
        budget: &mut usize,
        early_stop: impl Fn(&[f64]) -> bool,
    ) -> Outcome {
        const MU: f64 = 20.0;
        let spec = self.spec;
        let m = spec.inequalities.len();
        let Some(f0) = self.strictly_feasible(x) else {
            return Outcome {
                stationarity: f64::INFINITY,
            };
        };
        let obj0 = spec.objective.eval(x).unwrap_or(0.0);
        let mut t = m.max(1) as f64 / (0.1 * (1.0 + obj0.abs()));
        let mut lambda: Vec<f64> = f0.iter().map(|fi| 1.0 / (t * -fi)).collect();
        let mut nu = vec![0.0; spec.equalities.len()];
        let mut stationarity = f64::INFINITY;
        while *budget > 0 {
            let Some(res) = self.residuals(x, &lambda, &nu, t) else {
                break;
            };
            let Some((dx, dlambda, nu_plus)) = self.direction(x, &lambda, t) else {
                break;
            };
            let gap = m as f64 / t;
            let obj = spec.objective.eval(x).unwrap_or(0.0);
            let dual_inf = inf_norm(&res.dual);
            stationarity = dual_inf.max(gap);
            // squared Newton decrement estimate
            let dec: f64 = res.dual.iter().zip(&dx).map(|(r, d)| r * d).sum::<f64>().abs();
            let centred = dec <= 0.25 * gap.max(1e-14 * (1.0 + obj.abs())) && inf_norm(&res.cent) <= 0.5 / t;
            let pri_ok = inf_norm(&res.pri) <= 1e-10 * (1.0 + inf_norm(x));
            if centred && pri_ok {
                if gap <= tol.tol_gap || m == 0 {
                    break;
                }
                t *= MU;
                continue;
            }
            *budget -= 1;
            let dnu: Vec<f64> = nu_plus.iter().zip(&nu).map(|(a, b)| a - b).collect();
            let mut step = dlambda
                .iter()
                .zip(&lambda)
                .filter(|(d, _)| **d < 0.0)
                .map(|(d, l)| -l / d)
                .fold(1.0f64, |a, b| a.min(0.99 * b));
            let norm0 = res.norm();
            let mut accepted = None;
            let mut trial = x.clone();
            for _ in 0..80 {
                for i in 0..x.len() {
                    trial[i] = x[i] + step * dx[i];
                }
                if self.strictly_feasible(&trial).is_some() {
                    let lam: Vec<f64> = lambda.iter().zip(&dlambda).map(|(l, d)| l + step * d).collect();
                    let nu1: Vec<f64> = nu.iter().zip(&dnu).map(|(a, d)| a + step * d).collect();
                    if let Some(r1) = self.residuals(&trial, &lam, &nu1, t) {
                        if r1.norm() <= (1.0 - 0.01 * step) * norm0 {
                            accepted = Some((lam, nu1));
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            let Some((lam, nu1)) = accepted else {
                break;
            };
            std::mem::swap(x, &mut trial);
            lambda = lam;
            nu = nu1;
            if early_stop(x) {
                break;
            }
        }
        Outcome { stationarity }
    }
}
