//! Piecewise-linear convex costs in generator coordinates and their
//! closed-form aggregation.
//!
//! Each system carries one convex PWL component per generator, already
//! shifted by the energy price so that "cost" means flexibility cost minus
//! energy revenue. Aggregation concatenates the segments of all systems per
//! generator and sorts by slope; by convexity the sorted list is exactly the
//! infimal convolution, so evaluating the aggregate is a prefix lookup and
//! no optimization is needed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::dot;
use crate::zonotope::Zonotope;

/// One convex piecewise-linear function on [-betabar, betabar], stored as
/// segment lengths and ascending slopes from the left endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PwlComponent {
    pub lengths: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Domain half-width; always sum(lengths)/2.
    pub betabar: f64,
    /// Function value at -betabar.
    pub left_value: f64,
}

impl PwlComponent {
    pub fn new(lengths: Vec<f64>, slopes: Vec<f64>, left_value: f64) -> Result<PwlComponent> {
        if lengths.is_empty() || lengths.len() != slopes.len() {
            return Err(Error::InvalidParams("segment lists empty or mismatched".into()));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParams("segment lengths must be positive".into()));
        }
        for (t, w) in slopes.windows(2).enumerate() {
            if w[1] < w[0] - 1e-12 {
                return Err(Error::NonConvexInput(t + 1));
            }
        }
        if slopes.iter().any(|s| !s.is_finite()) || !left_value.is_finite() {
            return Err(Error::InvalidParams("non-finite cost data".into()));
        }
        let betabar = lengths.iter().sum::<f64>() / 2.0;
        Ok(PwlComponent { lengths, slopes, betabar, left_value })
    }

    /// Single-segment linear cost slope*x on [-betabar, betabar].
    pub fn linear(slope: f64, betabar: f64) -> PwlComponent {
        // zero half-width still needs a positive segment; use a point domain
        // guard of 0 length is invalid, so clamp to a tiny symmetric domain
        let b = betabar.max(0.0);
        let len = (2.0 * b).max(f64::MIN_POSITIVE);
        PwlComponent { lengths: vec![len], slopes: vec![slope], betabar: b, left_value: -slope * b }
    }

    /// Value at x (clamped into the domain within tolerance by the caller).
    pub fn eval(&self, x: f64) -> f64 {
        let mut pos = (x + self.betabar).clamp(0.0, 2.0 * self.betabar);
        let mut acc = self.left_value;
        for (l, q) in self.lengths.iter().zip(&self.slopes) {
            let take = pos.min(*l);
            acc += take * q;
            pos -= take;
            if pos <= 0.0 {
                break;
            }
        }
        acc
    }

    /// Adds a constant to every slope, keeping convexity; the left value
    /// moves with the shifted function.
    fn slope_shifted(&self, delta: f64) -> PwlComponent {
        PwlComponent {
            lengths: self.lengths.clone(),
            slopes: self.slopes.iter().map(|q| q + delta).collect(),
            betabar: self.betabar,
            left_value: self.left_value + delta * (-self.betabar),
        }
    }
}

/// All generator components of one system plus its fixed cost term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemCost {
    pub components: Vec<PwlComponent>,
    /// -t_s * v' c: the energy revenue of the center trajectory.
    pub t_fix: f64,
}

impl SystemCost {
    /// Direct evaluation sum of components plus the fixed term.
    pub fn eval(&self, beta: &[f64]) -> f64 {
        debug_assert_eq!(beta.len(), self.components.len());
        self.t_fix + self.components.iter().zip(beta).map(|(c, &b)| c.eval(b)).sum::<f64>()
    }
}

/// Shifts the flexibility costs into net costs under the energy price v:
/// component i's slopes drop by t_s * v' g_i and the center revenue becomes
/// the fixed term.
pub fn build_system_cost(
    flex: &[PwlComponent],
    v: &[f64],
    z: &Zonotope,
    t_s: f64,
) -> Result<SystemCost> {
    let tables = z.tables();
    let g = &tables.g;
    if flex.len() != g.cols() {
        return Err(Error::DimensionMismatch("one flex component per generator"));
    }
    if v.len() != z.n {
        return Err(Error::DimensionMismatch("price vector vs horizon"));
    }
    let mut components = Vec::with_capacity(flex.len());
    for (i, comp) in flex.iter().enumerate() {
        if (comp.betabar - z.betabar[i]).abs() > 1e-6 * (1.0 + z.betabar[i]) {
            return Err(Error::InvalidParams(format!(
                "flex component {i} domain does not match the zonotope bound"
            )));
        }
        for (t, w) in comp.slopes.windows(2).enumerate() {
            if w[1] < w[0] - 1e-12 {
                return Err(Error::NonConvexInput(t + 1));
            }
        }
        components.push(comp.slope_shifted(-t_s * dot(v, g.col(i))));
    }
    Ok(SystemCost { components, t_fix: -t_s * dot(v, &z.c) })
}

/// One merged segment with the system (0-based) it came from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AggSegment {
    pub len: f64,
    pub slope: f64,
    pub owner: usize,
}

/// Slope-sorted merged cost, one segment list per generator, plus prefix
/// sums for constant-time evaluation.
#[derive(Debug, Clone)]
pub struct AggregateCost {
    pub lists: Vec<Vec<AggSegment>>,
    /// Sum of the per-system fixed terms.
    pub t_fix_agg: f64,
    /// Per generator: sum of the left-endpoint values of all systems.
    pub anchors: Vec<f64>,
    /// Per generator: sum of the per-system half-widths.
    pub betabar_agg: Vec<f64>,
    /// prefix_len[i][m] = total length of the first m segments.
    prefix_len: Vec<Vec<f64>>,
    /// prefix_lq[i][m] = integral of the first m segments.
    prefix_lq: Vec<Vec<f64>>,
}

fn build_prefixes(lists: &[Vec<AggSegment>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut plen = Vec::with_capacity(lists.len());
    let mut plq = Vec::with_capacity(lists.len());
    for list in lists {
        let mut cl = Vec::with_capacity(list.len() + 1);
        let mut cq = Vec::with_capacity(list.len() + 1);
        cl.push(0.0);
        cq.push(0.0);
        for s in list {
            cl.push(cl.last().unwrap() + s.len);
            cq.push(cq.last().unwrap() + s.len * s.slope);
        }
        plen.push(cl);
        plq.push(cq);
    }
    (plen, plq)
}

/// Concatenates and slope-sorts the segments of all systems per generator.
/// Ties break by system index, then original segment order, which pins down
/// the later distribution step.
pub fn merge_aggregate_cost(costs: &[SystemCost], betabars: &[Vec<f64>]) -> Result<AggregateCost> {
    let first = costs.first().ok_or(Error::InvalidParams("no systems to merge".into()))?;
    let g = first.components.len();
    if betabars.len() != costs.len() {
        return Err(Error::DimensionMismatch("one betabar vector per system"));
    }
    for (j, (sc, bb)) in costs.iter().zip(betabars).enumerate() {
        if sc.components.len() != g || bb.len() != g {
            return Err(Error::DimensionMismatch("generator counts differ across systems"));
        }
        for (i, comp) in sc.components.iter().enumerate() {
            if (comp.betabar - bb[i]).abs() > 1e-6 * (1.0 + bb[i]) {
                return Err(Error::InvalidParams(format!(
                    "system {j} component {i} domain mismatch"
                )));
            }
        }
    }

    let lists: Vec<Vec<AggSegment>> = (0..g)
        .into_par_iter()
        .map(|i| {
            let mut segs: Vec<(AggSegment, usize)> = Vec::new();
            for (j, sc) in costs.iter().enumerate() {
                let comp = &sc.components[i];
                for (t, (&l, &q)) in comp.lengths.iter().zip(&comp.slopes).enumerate() {
                    segs.push((AggSegment { len: l, slope: q, owner: j }, t));
                }
            }
            segs.sort_by(|a, b| {
                a.0.slope
                    .partial_cmp(&b.0.slope)
                    .unwrap()
                    .then(a.0.owner.cmp(&b.0.owner))
                    .then(a.1.cmp(&b.1))
            });
            segs.into_iter().map(|(s, _)| s).collect()
        })
        .collect();

    // merged convexity is the whole point of the sort; assert it
    for list in &lists {
        debug_assert!(list.windows(2).all(|w| w[1].slope >= w[0].slope));
    }

    let anchors: Vec<f64> = (0..g)
        .map(|i| costs.iter().map(|sc| sc.components[i].left_value).sum())
        .collect();
    let betabar_agg: Vec<f64> = (0..g)
        .map(|i| betabars.iter().map(|bb| bb[i]).sum())
        .collect();
    let t_fix_agg = costs.iter().map(|sc| sc.t_fix).sum();
    let (prefix_len, prefix_lq) = build_prefixes(&lists);
    Ok(AggregateCost { lists, t_fix_agg, anchors, betabar_agg, prefix_len, prefix_lq })
}

impl AggregateCost {
    pub fn gen_count(&self) -> usize {
        self.lists.len()
    }

    /// Mean aggregate half-width, the default subgradient step numerator.
    pub fn mean_betabar(&self) -> f64 {
        self.betabar_agg.iter().sum::<f64>() / self.betabar_agg.len() as f64
    }

    /// Segment index containing the given fill position, right-continuous at
    /// breakpoints and clamped to the last segment at the right boundary.
    fn segment_at(&self, i: usize, pos: f64) -> usize {
        let pl = &self.prefix_len[i];
        let m = pl.partition_point(|&v| v <= pos) - 1;
        m.min(self.lists[i].len() - 1)
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.lists.len() {
            return Err(Error::DimensionMismatch("beta length vs generator count"));
        }
        for (i, (&b, &bb)) in beta.iter().zip(&self.betabar_agg).enumerate() {
            if b.abs() > bb + 1e-9 {
                return Err(Error::BetaOutOfRange(i));
            }
        }
        Ok(())
    }

    /// Adds a constant per-generator slope shift and a fixed-term offset,
    /// preserving segment order (a uniform shift cannot reorder slopes).
    pub fn price_shifted(&self, slope_shift: &[f64], t_fix_add: f64) -> AggregateCost {
        debug_assert_eq!(slope_shift.len(), self.lists.len());
        let lists: Vec<Vec<AggSegment>> = self
            .lists
            .iter()
            .zip(slope_shift)
            .map(|(list, &d)| {
                list.iter().map(|s| AggSegment { len: s.len, slope: s.slope + d, owner: s.owner }).collect()
            })
            .collect();
        let anchors: Vec<f64> = self
            .anchors
            .iter()
            .zip(slope_shift)
            .zip(&self.betabar_agg)
            .map(|((&k, &d), &bb)| k - d * bb)
            .collect();
        let (prefix_len, prefix_lq) = build_prefixes(&lists);
        AggregateCost {
            lists,
            t_fix_agg: self.t_fix_agg + t_fix_add,
            anchors,
            betabar_agg: self.betabar_agg.clone(),
            prefix_len,
            prefix_lq,
        }
    }
}

/// Aggregate cost at beta: fixed term, anchors, and the per-generator
/// integral of the merged slopes from the left endpoint.
pub fn eval_aggregate(ac: &AggregateCost, beta: &[f64]) -> Result<f64> {
    ac.check_beta(beta)?;
    let mut w = ac.t_fix_agg + ac.anchors.iter().sum::<f64>();
    for i in 0..ac.lists.len() {
        let pos = (ac.betabar_agg[i] + beta[i]).clamp(0.0, 2.0 * ac.betabar_agg[i]);
        let m = ac.segment_at(i, pos);
        w += ac.prefix_lq[i][m] + (pos - ac.prefix_len[i][m]) * ac.lists[i][m].slope;
    }
    Ok(w)
}

/// Right slope of the segment containing each beta component.
pub fn subgradient_at(ac: &AggregateCost, beta: &[f64]) -> Vec<f64> {
    debug_assert_eq!(beta.len(), ac.lists.len());
    (0..ac.lists.len())
        .map(|i| {
            let pos = (ac.betabar_agg[i] + beta[i]).clamp(0.0, 2.0 * ac.betabar_agg[i]);
            ac.lists[i][ac.segment_at(i, pos)].slope
        })
        .collect()
}

/// Fused value and subgradient, one prefix lookup per generator.
pub fn eval_with_subgradient(ac: &AggregateCost, beta: &[f64]) -> Result<(f64, Vec<f64>)> {
    ac.check_beta(beta)?;
    let mut w = ac.t_fix_agg + ac.anchors.iter().sum::<f64>();
    let mut grad = Vec::with_capacity(ac.lists.len());
    for i in 0..ac.lists.len() {
        let pos = (ac.betabar_agg[i] + beta[i]).clamp(0.0, 2.0 * ac.betabar_agg[i]);
        let m = ac.segment_at(i, pos);
        w += ac.prefix_lq[i][m] + (pos - ac.prefix_len[i][m]) * ac.lists[i][m].slope;
        grad.push(ac.lists[i][m].slope);
    }
    Ok((w, grad))
}

/// Exact epigraph-LP value of the cheapest split of beta across systems,
/// used as an independent oracle for the merge.
pub fn aggregate_lp_oracle(costs: &[SystemCost], beta: &[f64]) -> Result<f64> {
    use crate::mat::Mat;
    use crate::optim::{solve_lp, LinearProgram, LpStatus};

    let j_count = costs.len();
    let g = costs[0].components.len();
    if beta.len() != g {
        return Err(Error::DimensionMismatch("beta length vs generator count"));
    }
    // variables: beta_i^(j) (j major) then one epigraph t per (j, i)
    let nb = j_count * g;
    let nv = 2 * nb;
    let mut bounds = Vec::with_capacity(nv);
    for sc in costs {
        for comp in &sc.components {
            bounds.push((-comp.betabar, comp.betabar));
        }
    }
    bounds.extend(std::iter::repeat((f64::NEG_INFINITY, f64::INFINITY)).take(nb));

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (j, sc) in costs.iter().enumerate() {
        for (i, comp) in sc.components.iter().enumerate() {
            // affine pieces: value(x) = v_t + q_t (x - x_t) on segment t
            let mut x_start = -comp.betabar;
            let mut v_start = comp.left_value;
            for (&l, &q) in comp.lengths.iter().zip(&comp.slopes) {
                // t_{j,i} >= q x + (v_start - q x_start)
                let mut row = vec![0.0; nv];
                row[j * g + i] = q;
                row[nb + j * g + i] = -1.0;
                rows.extend_from_slice(&row);
                rhs.push(-(v_start - q * x_start));
                x_start += l;
                v_start += l * q;
            }
        }
    }
    let m_in = rhs.len();
    let mut eq_rows = Vec::with_capacity(g * nv);
    for i in 0..g {
        let mut row = vec![0.0; nv];
        for j in 0..j_count {
            row[j * g + i] = 1.0;
        }
        eq_rows.extend_from_slice(&row);
    }
    let mut cost = vec![0.0; nv];
    for c in cost.iter_mut().skip(nb) {
        *c = 1.0;
    }
    let sol = solve_lp(&LinearProgram {
        cost,
        ineq: Some((Mat::from_row_major(m_in, nv, &rows), rhs)),
        eq: Some((Mat::from_row_major(g, nv, &eq_rows), beta.to_vec())),
        bounds,
    })?;
    match sol.status {
        LpStatus::Optimal => {
            Ok(sol.objective + costs.iter().map(|sc| sc.t_fix).sum::<f64>())
        }
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}
