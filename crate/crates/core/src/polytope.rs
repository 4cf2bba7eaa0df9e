//! Halfspace representations of resource feasible sets.
//!
//! A resource is described by per-step power bounds, cumulative-energy
//! bounds, optional ramp limits, and optional linear state dynamics; each of
//! these turns into rows of A p <= b over the power trajectory p. Rows with
//! an infinite right-hand side are dropped at construction, and every
//! constructor probes feasibility with one LP so emptiness surfaces early.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::optim::{solve_lp, LinearProgram, LpStatus, TOL_FEAS};

/// Power and cumulative-energy description of one resource.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeParams {
    #[serde(rename = "N")]
    pub n: usize,
    /// Step duration in hours.
    pub t_s: f64,
    /// Per-step power bounds (kW).
    pub p_lo: Vec<f64>,
    pub p_hi: Vec<f64>,
    /// Cumulative energy bounds (kWh), one per step.
    pub e_lo: Vec<f64>,
    pub e_hi: Vec<f64>,
    /// Initial energy level (kWh).
    pub e0: f64,
}

/// Ramp-rate bounds between consecutive steps (kW/h), N-1 pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RampParams {
    pub r_lo: Vec<f64>,
    pub r_hi: Vec<f64>,
}

/// Linear state dynamics x_{k+1} = A_k x_k + B_k u_k + C_k p_k with per-step
/// state bounds. C_k multiplies the scalar power draw of step k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateModel {
    #[serde(rename = "A_k")]
    pub a_k: Vec<Mat>,
    #[serde(rename = "B_k")]
    pub b_k: Vec<Mat>,
    #[serde(rename = "C_k")]
    pub c_k: Vec<Vec<f64>>,
    pub u_k: Vec<Vec<f64>>,
    pub x1: Vec<f64>,
    /// Bounds on x_{k+1} for each rolled-out step; entries may be infinite.
    pub x_lo: Vec<Vec<f64>>,
    pub x_hi: Vec<Vec<f64>>,
}

/// A p <= b over power trajectories of length N.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HPolytope {
    #[serde(rename = "A")]
    pub a: Mat,
    pub b: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Accumulates finite rows, silently dropping infinite right-hand sides.
struct RowBuf {
    n: usize,
    rows: Vec<f64>,
    b: Vec<f64>,
}

impl RowBuf {
    fn new(n: usize) -> RowBuf {
        RowBuf { n, rows: Vec::new(), b: Vec::new() }
    }

    fn push(&mut self, coeffs: &[f64], rhs: f64) {
        if rhs.is_infinite() && rhs > 0.0 {
            return;
        }
        debug_assert!(rhs.is_finite(), "negative-infinite rhs makes the set empty");
        debug_assert_eq!(coeffs.len(), self.n);
        self.rows.extend_from_slice(coeffs);
        self.b.push(rhs);
    }

    fn into_polytope(self) -> Result<HPolytope> {
        let m = self.b.len();
        let p = HPolytope { a: Mat::from_row_major(m, self.n, &self.rows), b: self.b, n: self.n };
        probe_nonempty(&p)?;
        Ok(p)
    }
}

fn probe_nonempty(p: &HPolytope) -> Result<()> {
    if p.b.is_empty() {
        return Ok(());
    }
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let lp = LinearProgram {
        cost: vec![0.0; p.n],
        ineq: Some((p.a.clone(), p.b.clone())),
        eq: None,
        bounds: vec![free; p.n],
    };
    match solve_lp(&lp)?.status {
        LpStatus::Infeasible => Err(Error::EmptyPolytope),
        _ => Ok(()),
    }
}

impl PeParams {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("horizon must be at least 1".into()));
        }
        if self.t_s <= 0.0 || !self.t_s.is_finite() {
            return Err(Error::InvalidParams("step duration must be positive".into()));
        }
        if !self.e0.is_finite() {
            return Err(Error::InvalidParams("initial energy must be finite".into()));
        }
        for (name, v) in [
            ("p_lo", &self.p_lo),
            ("p_hi", &self.p_hi),
            ("e_lo", &self.e_lo),
            ("e_hi", &self.e_hi),
        ] {
            if v.len() != self.n {
                return Err(Error::InvalidParams(format!("{name} length != N")));
            }
        }
        for k in 0..self.n {
            if self.p_lo[k] > self.p_hi[k] || self.e_lo[k] > self.e_hi[k] {
                return Err(Error::InvalidParams(format!("crossed bounds at step {}", k + 1)));
            }
        }
        Ok(())
    }
}

/// Builds the power/energy polytope: per-step power bounds plus cumulative
/// energy bounds e_lo[k] - e0 <= t_s * sum_{i<=k} p_i <= e_hi[k] - e0. With
/// all bounds finite this is 4N rows; the final energy pair is kept even
/// when redundant.
pub fn build_pe_polytope(params: &PeParams) -> Result<HPolytope> {
    params.validate()?;
    let n = params.n;
    let mut buf = RowBuf::new(n);
    let mut row = vec![0.0; n];
    for k in 0..n {
        row[k] = 1.0;
        buf.push(&row, params.p_hi[k]);
        row[k] = -1.0;
        buf.push(&row, -params.p_lo[k]);
        row[k] = 0.0;
    }
    for k in 0..n {
        for i in 0..=k {
            row[i] = params.t_s;
        }
        buf.push(&row, params.e_hi[k] - params.e0);
        for i in 0..=k {
            row[i] = -params.t_s;
        }
        buf.push(&row, -(params.e_lo[k] - params.e0));
        for i in 0..=k {
            row[i] = 0.0;
        }
    }
    buf.into_polytope()
}

/// Appends ramp rows r_lo[k] <= (p_{k+1} - p_k)/t_s <= r_hi[k]. Infinite
/// bounds add no rows; with every bound infinite P is returned unchanged.
pub fn add_ramp_constraints(p: &HPolytope, ramp: &RampParams, t_s: f64) -> Result<HPolytope> {
    let n = p.n;
    if ramp.r_lo.len() != n - 1 || ramp.r_hi.len() != n - 1 {
        return Err(Error::DimensionMismatch("ramp bounds need N-1 pairs"));
    }
    if t_s <= 0.0 {
        return Err(Error::InvalidParams("step duration must be positive".into()));
    }
    for k in 0..n - 1 {
        if ramp.r_lo[k] > ramp.r_hi[k] {
            return Err(Error::InvalidParams(format!("crossed ramp bounds at step {}", k + 2)));
        }
    }
    let mut buf = RowBuf::new(n);
    buf.rows = p.a.to_row_major();
    buf.b = p.b.clone();
    let mut row = vec![0.0; n];
    for k in 0..n - 1 {
        row[k] = -1.0;
        row[k + 1] = 1.0;
        buf.push(&row, ramp.r_hi[k] * t_s);
        row[k] = 1.0;
        row[k + 1] = -1.0;
        buf.push(&row, -ramp.r_lo[k] * t_s);
        row[k] = 0.0;
        row[k + 1] = 0.0;
    }
    buf.into_polytope()
}

/// Eliminates the state by forward rollout and appends the induced rows in p.
/// Step k of the model bounds x_{k+1}; the model may span fewer steps than N.
pub fn add_state_constraints(p: &HPolytope, model: &StateModel) -> Result<HPolytope> {
    let steps = model.a_k.len();
    if steps == 0 || steps > p.n {
        return Err(Error::DimensionMismatch("state model spans 1..N steps"));
    }
    let same = [model.b_k.len(), model.c_k.len(), model.u_k.len(), model.x_lo.len(), model.x_hi.len()];
    if same.iter().any(|&l| l != steps) {
        return Err(Error::DimensionMismatch("state model field lengths differ"));
    }
    let s = model.x1.len();
    let mut buf = RowBuf::new(p.n);
    buf.rows = p.a.to_row_major();
    buf.b = p.b.clone();

    // x_{k+1} = const + coeff * p, rolled forward one step at a time
    let mut cur_const = model.x1.clone();
    let mut cur_coeff = Mat::zeros(s, p.n);
    for k in 0..steps {
        let a = &model.a_k[k];
        if a.rows() != s || a.cols() != s {
            return Err(Error::DimensionMismatch("A_k must be state x state"));
        }
        if model.c_k[k].len() != s {
            return Err(Error::DimensionMismatch("C_k must have state dimension"));
        }
        let bu = if model.u_k[k].is_empty() {
            vec![0.0; s]
        } else {
            if model.b_k[k].rows() != s || model.b_k[k].cols() != model.u_k[k].len() {
                return Err(Error::DimensionMismatch("B_k u_k dimensions"));
            }
            model.b_k[k].matvec(&model.u_k[k])
        };
        let mut next_const = a.matvec(&cur_const);
        for i in 0..s {
            next_const[i] += bu[i];
        }
        let mut next_coeff = a.matmul(&cur_coeff);
        for i in 0..s {
            let v = next_coeff.get(i, k) + model.c_k[k][i];
            next_coeff.set(i, k, v);
        }
        cur_const = next_const;
        cur_coeff = next_coeff;

        if model.x_lo[k].len() != s || model.x_hi[k].len() != s {
            return Err(Error::DimensionMismatch("state bounds must have state dimension"));
        }
        for i in 0..s {
            let coeffs = cur_coeff.row(i);
            buf.push(&coeffs, model.x_hi[k][i] - cur_const[i]);
            let neg: Vec<f64> = coeffs.iter().map(|v| -v).collect();
            buf.push(&neg, cur_const[i] - model.x_lo[k][i]);
        }
    }
    buf.into_polytope()
}

/// True iff A p <= b within the feasibility tolerance.
pub fn contains(p: &HPolytope, point: &[f64]) -> bool {
    debug_assert_eq!(point.len(), p.n);
    (0..p.b.len()).all(|i| p.a.row_dot(i, point) <= p.b[i] + TOL_FEAS)
}

/// Width of P along the unit direction f: max f'p - min f'p, by two LPs.
pub fn support_width(p: &HPolytope, f: &[f64]) -> Result<f64> {
    let free = vec![(f64::NEG_INFINITY, f64::INFINITY); p.n];
    let ineq = Some((p.a.clone(), p.b.clone()));
    let neg: Vec<f64> = f.iter().map(|v| -v).collect();
    let hi = solve_lp(&LinearProgram { cost: neg, ineq: ineq.clone(), eq: None, bounds: free.clone() })?;
    let lo = solve_lp(&LinearProgram { cost: f.to_vec(), ineq, eq: None, bounds: free })?;
    for sol in [&hi, &lo] {
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => return Err(Error::Unbounded),
            LpStatus::Infeasible => return Err(Error::EmptyPolytope),
        }
    }
    // hi.objective = -(max f'p), lo.objective = min f'p
    Ok((-hi.objective - lo.objective).max(0.0))
}

/// Largest axis-aligned cube inside P: maximize r over A c + |A| r 1 <= b.
pub fn max_inscribed_cube(p: &HPolytope) -> Result<(Vec<f64>, f64)> {
    let n = p.n;
    let m = p.b.len();
    let mut rows = Vec::with_capacity(m * (n + 1));
    for i in 0..m {
        let mut abs_sum = 0.0;
        for j in 0..n {
            let v = p.a.get(i, j);
            rows.push(v);
            abs_sum += v.abs();
        }
        rows.push(abs_sum);
    }
    let mut cost = vec![0.0; n + 1];
    cost[n] = -1.0;
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n + 1];
    bounds[n] = (0.0, f64::INFINITY);
    let sol = solve_lp(&LinearProgram {
        cost,
        ineq: Some((Mat::from_row_major(m, n + 1, &rows), p.b.clone())),
        eq: None,
        bounds,
    })?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.x[..n].to_vec(), sol.x[n])),
        LpStatus::Infeasible => Err(Error::EmptyPolytope),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// Largest-edge-sum axis-aligned box nested between the given cube and P:
/// maximize sum(hi - lo) over lo <= cube_lo, hi >= cube_hi and the
/// box-in-polytope rows A (hi+lo)/2 + |A| (hi-lo)/2 <= b.
pub fn max_inscribed_box(p: &HPolytope, center: &[f64], half_edge: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.n;
    let m = p.b.len();
    // variables: lo_1..lo_n, hi_1..hi_n
    let mut rows = Vec::with_capacity(m * 2 * n);
    for i in 0..m {
        for j in 0..n {
            let v = p.a.get(i, j);
            rows.push((v - v.abs()) / 2.0);
        }
        for j in 0..n {
            let v = p.a.get(i, j);
            rows.push((v + v.abs()) / 2.0);
        }
    }
    let mut cost = Vec::with_capacity(2 * n);
    cost.extend(std::iter::repeat(1.0).take(n));
    cost.extend(std::iter::repeat(-1.0).take(n));
    let mut bounds = Vec::with_capacity(2 * n);
    for j in 0..n {
        bounds.push((f64::NEG_INFINITY, center[j] - half_edge));
    }
    for j in 0..n {
        bounds.push((center[j] + half_edge, f64::INFINITY));
    }
    let sol = solve_lp(&LinearProgram {
        cost,
        ineq: Some((Mat::from_row_major(m, 2 * n, &rows), p.b.clone())),
        eq: None,
        bounds,
    })?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.x[..n].to_vec(), sol.x[n..].to_vec())),
        LpStatus::Infeasible => Err(Error::EmptyPolytope),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}
