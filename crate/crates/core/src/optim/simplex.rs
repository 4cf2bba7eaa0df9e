//! Dense bounded-variable revised simplex.
//!
//! Two-phase method over the equality form [A_in I; A_eq 0]·[x; s] = b with
//! per-variable bounds (possibly infinite). The basis inverse is kept as a
//! dense LU factorization plus a product-form eta file, refactorized
//! periodically. Pricing is Dantzig with a Bland fallback after a run of
//! degenerate pivots. Everything is deterministic: ties break by index.

use crate::error::{Error, Result};
use crate::mat::{dot, norm_inf, Mat};

/// Primal feasibility tolerance (constraint and bound violations).
pub const TOL_FEAS: f64 = 1e-8;
/// Objective optimality tolerance.
pub const TOL_OPT: f64 = 1e-7;

const TOL_PIVOT: f64 = 1e-9;
const TOL_ETA: f64 = 1e-7;
const REFACTOR_EVERY: usize = 64;
const DEGEN_LIMIT: usize = 40;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Minimized objective c'x over the structural variables.
    pub cost: Vec<f64>,
    /// A_in x <= b_in.
    pub ineq: Option<(Mat, Vec<f64>)>,
    /// A_eq x = b_eq.
    pub eq: Option<(Mat, Vec<f64>)>,
    /// Per-variable (lo, hi); entries may be -inf/+inf.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (meaningful when status is Optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers, inequality rows first then equality rows. At an
    /// optimum the inequality multipliers are <= 0 for this <=-row, min-cost
    /// convention.
    pub duals: Vec<f64>,
    /// Max violation of dual feasibility, complementary slackness, and the
    /// normalized duality gap at the reported optimum.
    pub dual_residual: f64,
}

impl LinearProgram {
    fn validate(&self) -> Result<()> {
        let n = self.cost.len();
        if n == 0 {
            return Err(Error::InvalidParams("LP has no variables".into()));
        }
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch("LP bounds length"));
        }
        if let Some((a, b)) = &self.ineq {
            if a.cols() != n || a.rows() != b.len() {
                return Err(Error::DimensionMismatch("LP inequality block"));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams("inequality rhs not finite".into()));
            }
        }
        if let Some((a, b)) = &self.eq {
            if a.cols() != n || a.rows() != b.len() {
                return Err(Error::DimensionMismatch("LP equality block"));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams("equality rhs not finite".into()));
            }
        }
        if self.cost.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("objective not finite".into()));
        }
        for &(lo, hi) in &self.bounds {
            if lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidParams("NaN bound".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLo,
    AtHi,
    /// Nonbasic free variable parked at zero.
    FreeZero,
}

struct LuFactors {
    m: usize,
    /// Combined L (unit lower, below diagonal) and U (upper incl. diagonal).
    lu: Mat,
    /// Row permutation: pivot row chosen at elimination step k.
    perm: Vec<usize>,
}

impl LuFactors {
    fn factorize(cols: &Mat, basic: &[usize]) -> Result<LuFactors> {
        let m = basic.len();
        let mut lu = Mat::zeros(m, m);
        for (k, &j) in basic.iter().enumerate() {
            lu.col_mut(k).copy_from_slice(cols.col(j));
        }
        let mut perm = Vec::with_capacity(m);
        let mut active: Vec<usize> = (0..m).collect();
        for k in 0..m {
            // partial pivot over remaining rows
            let (mut best_r, mut best) = (k, -1.0);
            for t in k..m {
                let v = lu.get(active[t], k).abs();
                if v > best {
                    best = v;
                    best_r = t;
                }
            }
            if best < 1e-12 {
                return Err(Error::NumericalFailure("singular basis"));
            }
            active.swap(k, best_r);
            let pr = active[k];
            perm.push(pr);
            let piv = lu.get(pr, k);
            for t in (k + 1)..m {
                let r = active[t];
                let factor = lu.get(r, k) / piv;
                lu.set(r, k, factor);
                if factor != 0.0 {
                    for c in (k + 1)..m {
                        let v = lu.get(r, c) - factor * lu.get(pr, c);
                        lu.set(r, c, v);
                    }
                }
            }
        }
        Ok(LuFactors { m, lu, perm })
    }

    /// Solves B z = v.
    fn solve(&self, v: &mut Vec<f64>) {
        let m = self.m;
        // forward: L y = P v, unit diagonal
        let mut y = vec![0.0; m];
        for k in 0..m {
            let mut acc = v[self.perm[k]];
            for c in 0..k {
                acc -= self.lu.get(self.perm[k], c) * y[c];
            }
            y[k] = acc;
        }
        // backward: U z = y
        for k in (0..m).rev() {
            let mut acc = y[k];
            for c in (k + 1)..m {
                acc -= self.lu.get(self.perm[k], c) * v[c];
            }
            v[k] = acc / self.lu.get(self.perm[k], k);
        }
    }

    /// Solves B' z = v.
    fn solve_transpose(&self, v: &mut Vec<f64>) {
        let m = self.m;
        // forward: U' y = v
        let mut y = vec![0.0; m];
        for k in 0..m {
            let mut acc = v[k];
            for c in 0..k {
                acc -= self.lu.get(self.perm[c], k) * y[c];
            }
            y[k] = acc / self.lu.get(self.perm[k], k);
        }
        // backward: L' w = y, then undo the permutation
        let mut w = vec![0.0; m];
        for k in (0..m).rev() {
            let mut acc = y[k];
            for c in (k + 1)..m {
                acc -= self.lu.get(self.perm[c], k) * w[c];
            }
            w[k] = acc;
        }
        for k in 0..m {
            v[self.perm[k]] = w[k];
        }
    }
}

/// One product-form update: basis column `row` was replaced, direction `w`.
struct Eta {
    row: usize,
    w: Vec<f64>,
}

struct Solver {
    m: usize,
    n: usize,
    n_struct: usize,
    n_ineq: usize,
    cols: Mat,
    lo: Vec<f64>,
    hi: Vec<f64>,
    b: Vec<f64>,
    basic: Vec<usize>,
    state: Vec<VarState>,
    xb: Vec<f64>,
    lu: LuFactors,
    etas: Vec<Eta>,
}

impl Solver {
    fn ftran(&self, v: &mut Vec<f64>) {
        self.lu.solve(v);
        for eta in &self.etas {
            let zr = v[eta.row] / eta.w[eta.row];
            for i in 0..self.m {
                if i != eta.row {
                    v[i] -= eta.w[i] * zr;
                }
            }
            v[eta.row] = zr;
        }
    }

    fn btran(&self, v: &mut Vec<f64>) {
        for eta in self.etas.iter().rev() {
            let mut acc = v[eta.row];
            for i in 0..self.m {
                if i != eta.row {
                    acc -= eta.w[i] * v[i];
                }
            }
            v[eta.row] = acc / eta.w[eta.row];
        }
        self.lu.solve_transpose(v);
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLo => self.lo[j],
            VarState::AtHi => self.hi[j],
            VarState::FreeZero => 0.0,
            VarState::Basic(r) => self.xb[r],
        }
    }

    /// Recomputes xb = B^-1 (b - N x_N) from scratch.
    fn refresh_xb(&mut self) {
        let mut r = self.b.clone();
        for j in 0..self.n {
            if let VarState::Basic(_) = self.state[j] {
                continue;
            }
            let xj = self.nonbasic_value(j);
            if xj != 0.0 {
                let col = self.cols.col(j);
                for i in 0..self.m {
                    r[i] -= col[i] * xj;
                }
            }
        }
        self.ftran(&mut r);
        self.xb = r;
    }

    fn refactorize(&mut self) -> Result<()> {
        self.lu = LuFactors::factorize(&self.cols, &self.basic)?;
        self.etas.clear();
        self.refresh_xb();
        Ok(())
    }

    /// Runs simplex iterations for the given cost vector until optimal.
    fn optimize(&mut self, cost: &[f64], iter_cap: usize) -> Result<LpStatus> {
        let cost_scale = 1.0 + norm_inf(cost);
        let tol_d = 1e-9 * cost_scale;
        let mut bland = false;
        let mut degen_run = 0usize;
        let mut y = vec![0.0; self.m];
        for _iter in 0..iter_cap {
            // multipliers y = B^-T c_B
            for i in 0..self.m {
                y[i] = cost[self.basic[i]];
            }
            self.btran(&mut y);

            // pricing
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.n {
                let st = self.state[j];
                if matches!(st, VarState::Basic(_)) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = cost[j] - dot(self.cols.col(j), &y);
                let eligible = match st {
                    VarState::AtLo => d < -tol_d,
                    VarState::AtHi => d > tol_d,
                    VarState::FreeZero => d.abs() > tol_d,
                    VarState::Basic(_) => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    enter = Some((j, d));
                    break;
                }
                match enter {
                    Some((_, dz)) if d.abs() <= dz.abs() => {}
                    _ => enter = Some((j, d)),
                }
            }
            let (q, dq) = match enter {
                Some(e) => e,
                None => return Ok(LpStatus::Optimal),
            };

            // direction of increase for the entering variable
            let sigma = match self.state[q] {
                VarState::AtLo => 1.0,
                VarState::AtHi => -1.0,
                VarState::FreeZero => {
                    if dq < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                VarState::Basic(_) => unreachable!(),
            };
            let mut w = self.cols.col(q).to_vec();
            self.ftran(&mut w);

            // ratio test: basic variables block, or the entering variable's
            // own opposite bound (bound flip)
            let t_flip = self.hi[q] - self.lo[q];
            let mut t_best = f64::INFINITY;
            let mut leave: Option<usize> = None; // row index
            for i in 0..self.m {
                let wi = sigma * w[i];
                if wi.abs() <= TOL_PIVOT {
                    continue;
                }
                let bi = self.basic[i];
                let ratio = if wi > 0.0 {
                    if self.lo[bi].is_finite() {
                        ((self.xb[i] - self.lo[bi]) / wi).max(0.0)
                    } else {
                        continue;
                    }
                } else {
                    if self.hi[bi].is_finite() {
                        ((self.xb[i] - self.hi[bi]) / wi).max(0.0)
                    } else {
                        continue;
                    }
                };
                let better = match leave {
                    None => ratio < t_best - 1e-12,
                    Some(r_prev) => {
                        if ratio < t_best - 1e-12 {
                            true
                        } else if ratio <= t_best + 1e-12 {
                            if bland {
                                self.basic[i] < self.basic[r_prev]
                            } else {
                                w[i].abs() > w[r_prev].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    t_best = ratio.min(t_best);
                    leave = Some(i);
                }
            }

            if t_flip.is_finite() && t_flip <= t_best {
                // bound flip, no basis change
                for i in 0..self.m {
                    self.xb[i] -= sigma * t_flip * w[i];
                }
                self.state[q] = if sigma > 0.0 { VarState::AtHi } else { VarState::AtLo };
                if t_flip <= 1e-10 {
                    degen_run += 1;
                } else {
                    degen_run = 0;
                    bland = false;
                }
                if degen_run > DEGEN_LIMIT {
                    bland = true;
                }
                continue;
            }

            let r = match leave {
                Some(r) => r,
                None => return Ok(LpStatus::Unbounded),
            };

            if w[r].abs() < TOL_ETA {
                // unreliable pivot through the eta file: refactorize and retry
                if !self.etas.is_empty() {
                    self.refactorize()?;
                    continue;
                }
                if w[r].abs() < 1e-11 {
                    return Err(Error::NumericalFailure("pivot too small"));
                }
            }

            // pivot: entering takes row r
            let entering_start = self.nonbasic_value(q);
            for i in 0..self.m {
                self.xb[i] -= sigma * t_best * w[i];
            }
            let leaving = self.basic[r];
            let wl = sigma * w[r];
            self.state[leaving] = if wl > 0.0 { VarState::AtLo } else { VarState::AtHi };
            // snap the leaving variable exactly onto its bound
            self.basic[r] = q;
            self.state[q] = VarState::Basic(r);
            self.xb[r] = entering_start + sigma * t_best;
            self.etas.push(Eta { row: r, w });
            if self.etas.len() >= REFACTOR_EVERY {
                self.refactorize()?;
            }
            if t_best <= 1e-10 {
                degen_run += 1;
            } else {
                degen_run = 0;
                bland = false;
            }
            if degen_run > DEGEN_LIMIT {
                bland = true;
            }
        }
        Err(Error::NumericalFailure("simplex iteration limit"))
    }
}

/// Solves the linear program. Status Infeasible/Unbounded is reported in the
/// solution rather than as an error; `Err` is reserved for numerical failure
/// and malformed input.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n_struct = lp.cost.len();
    for &(lo, hi) in &lp.bounds {
        if lo > hi {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; n_struct],
                objective: f64::NAN,
                duals: Vec::new(),
                dual_residual: f64::NAN,
            });
        }
    }

    let (m_in, m_eq) = (
        lp.ineq.as_ref().map_or(0, |(a, _)| a.rows()),
        lp.eq.as_ref().map_or(0, |(a, _)| a.rows()),
    );
    let m = m_in + m_eq;
    let n = n_struct + m_in + m; // structural, slack, artificial

    // stacked constraint columns
    let mut cols = Mat::zeros(m, n);
    if let Some((a, _)) = &lp.ineq {
        for j in 0..n_struct {
            cols.col_mut(j)[..m_in].copy_from_slice(a.col(j));
        }
    }
    if let Some((a, _)) = &lp.eq {
        for j in 0..n_struct {
            cols.col_mut(j)[m_in..].copy_from_slice(a.col(j));
        }
    }
    for i in 0..m_in {
        cols.set(i, n_struct + i, 1.0);
    }
    let mut b = Vec::with_capacity(m);
    if let Some((_, bi)) = &lp.ineq {
        b.extend_from_slice(bi);
    }
    if let Some((_, be)) = &lp.eq {
        b.extend_from_slice(be);
    }

    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for &(l, h) in &lp.bounds {
        lo.push(l);
        hi.push(h);
    }
    lo.extend(std::iter::repeat(0.0).take(m_in));
    hi.extend(std::iter::repeat(f64::INFINITY).take(m_in));
    // artificial bounds are fixed below once the start basis is known
    lo.extend(std::iter::repeat(0.0).take(m));
    hi.extend(std::iter::repeat(0.0).take(m));

    // nonbasic start for structural variables
    let mut state = vec![VarState::AtLo; n];
    for j in 0..n_struct {
        state[j] = if lo[j].is_finite() {
            VarState::AtLo
        } else if hi[j].is_finite() {
            VarState::AtHi
        } else {
            VarState::FreeZero
        };
    }
    for j in n_struct..n {
        state[j] = VarState::AtLo;
    }

    // residuals decide the start basis: slack where feasible, else artificial
    let mut resid = b.clone();
    for j in 0..n_struct {
        let xj = match state[j] {
            VarState::AtLo => lo[j],
            VarState::AtHi => hi[j],
            _ => 0.0,
        };
        if xj != 0.0 {
            let col = cols.col(j);
            for i in 0..m {
                resid[i] -= col[i] * xj;
            }
        }
    }
    let mut basic = Vec::with_capacity(m);
    let mut any_artificial = false;
    for i in 0..m {
        let slack_ok = i < m_in && resid[i] >= 0.0;
        if slack_ok {
            basic.push(n_struct + i);
        } else {
            let aj = n_struct + m_in + i;
            let sign = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
            cols.set(i, aj, sign);
            hi[aj] = f64::INFINITY;
            basic.push(aj);
            any_artificial = true;
        }
    }
    for (r, &j) in basic.iter().enumerate() {
        state[j] = VarState::Basic(r);
    }

    let lu = LuFactors::factorize(&cols, &basic)?;
    let mut solver = Solver {
        m,
        n,
        n_struct,
        n_ineq: m_in,
        cols,
        lo,
        hi,
        b,
        basic,
        state,
        xb: Vec::new(),
        lu,
        etas: Vec::new(),
    };
    solver.refresh_xb();

    let iter_cap = 10 * (m + n) + 10_000;

    if any_artificial {
        let mut phase1 = vec![0.0; n];
        for j in (n_struct + m_in)..n {
            if solver.hi[j].is_infinite() {
                phase1[j] = 1.0;
            }
        }
        match solver.optimize(&phase1, iter_cap)? {
            LpStatus::Optimal => {}
            // phase-1 objective is bounded below by zero
            _ => return Err(Error::NumericalFailure("phase 1 unbounded")),
        }
        let obj1: f64 = solver
            .basic
            .iter()
            .enumerate()
            .filter(|(_, &j)| j >= n_struct + m_in)
            .map(|(r, _)| solver.xb[r].abs())
            .sum();
        if obj1 > TOL_FEAS * (1.0 + norm_inf(&solver.b)) {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; n_struct],
                objective: f64::NAN,
                duals: Vec::new(),
                dual_residual: f64::NAN,
            });
        }
        // freeze artificials at zero; drive basic ones out where possible
        for j in (n_struct + m_in)..n {
            solver.hi[j] = 0.0;
        }
        drive_out_artificials(&mut solver)?;
    }

    let mut phase2 = vec![0.0; n];
    phase2[..n_struct].copy_from_slice(&lp.cost);
    let status = solver.optimize(&phase2, iter_cap)?;

    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            x: vec![0.0; n_struct],
            objective: f64::NEG_INFINITY,
            duals: Vec::new(),
            dual_residual: f64::NAN,
        });
    }

    // assemble the structural solution
    let mut x = vec![0.0; n_struct];
    for j in 0..n_struct {
        let v = solver.nonbasic_value(j);
        x[j] = v.clamp(
            if lp.bounds[j].0.is_finite() { lp.bounds[j].0 } else { v },
            if lp.bounds[j].1.is_finite() { lp.bounds[j].1 } else { v },
        );
    }
    let objective = dot(&lp.cost, &x);

    // dual certificate
    let mut y = vec![0.0; m];
    for i in 0..m {
        y[i] = phase2[solver.basic[i]];
    }
    solver.btran(&mut y);
    let mut resid = 0.0_f64;
    let mut gap_terms = dot(&y, &solver.b);
    for j in 0..n {
        if solver.lo[j] == solver.hi[j] && j >= n_struct {
            continue; // frozen artificials
        }
        let d = phase2[j] - dot(solver.cols.col(j), &y);
        match solver.state[j] {
            VarState::Basic(_) => resid = resid.max(d.abs()),
            VarState::AtLo => {
                resid = resid.max(-d);
                if solver.lo[j] != 0.0 {
                    gap_terms += d * solver.lo[j];
                }
            }
            VarState::AtHi => {
                resid = resid.max(d);
                if solver.hi[j] != 0.0 {
                    gap_terms += d * solver.hi[j];
                }
            }
            VarState::FreeZero => resid = resid.max(d.abs()),
        }
    }
    let full_obj: f64 = (0..n)
        .map(|j| phase2[j] * solver.nonbasic_value(j))
        .sum();
    resid = resid.max((full_obj - gap_terms).abs() / (1.0 + full_obj.abs()));

    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        duals: y,
        dual_residual: resid / (1.0 + norm_inf(&lp.cost)),
    })
}

/// After phase 1, pivots basic artificials (at value zero) out of the basis
/// where a usable pivot exists; rows with none are redundant and keep their
/// frozen artificial harmlessly.
fn drive_out_artificials(s: &mut Solver) -> Result<()> {
    let art_start = s.n_struct + s.n_ineq;
    for r in 0..s.m {
        if s.basic[r] < art_start {
            continue;
        }
        // row r of B^-1
        let mut er = vec![0.0; s.m];
        er[r] = 1.0;
        s.btran(&mut er);
        let mut found = None;
        for j in 0..art_start {
            if matches!(s.state[j], VarState::Basic(_)) || s.lo[j] == s.hi[j] {
                continue;
            }
            let alpha = dot(s.cols.col(j), &er);
            if alpha.abs() > 1e-7 {
                found = Some(j);
                break;
            }
        }
        let Some(q) = found else { continue };
        let mut w = s.cols.col(q).to_vec();
        s.ftran(&mut w);
        let art = s.basic[r];
        let xq = s.nonbasic_value(q);
        s.state[art] = VarState::AtLo;
        s.basic[r] = q;
        s.state[q] = VarState::Basic(r);
        s.xb[r] = xq; // degenerate swap: artificial was at zero
        s.etas.push(Eta { row: r, w });
        if s.etas.len() >= REFACTOR_EVERY {
            s.refactorize()?;
        }
    }
    Ok(())
}
