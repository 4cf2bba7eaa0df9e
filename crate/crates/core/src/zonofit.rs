//! Fitting a zonotope inside a polytope.
//!
//! The fit maximizes a width-weighted sum of the generator bounds subject to
//! zonotope-in-polytope rows. Directions where the polytope itself has
//! (near-)zero width are dropped from the weights and from the quality
//! average; they are already matched perfectly by a flat zonotope. A
//! degeneracy guard keeps every retained direction's zonotope width at least
//! as large as the width of the largest inscribed axis-aligned box, which
//! stops the LP from collapsing thin directions entirely in exchange for
//! volume elsewhere.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::optim::{solve_lp, LinearProgram, LpStatus};
use crate::polytope::{max_inscribed_box, max_inscribed_cube, support_width, HPolytope};
use crate::zonotope::{family_tables, is_inside_polytope, FacetNormals, Family, Zonotope};

/// Per-direction widths of a polytope along the facet-normal family.
#[derive(Debug, Clone)]
pub struct WidthProfile {
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Enforce minimum widths from the largest inscribed box (default on).
    pub guard_degeneracy: bool,
    /// Directions with polytope width at or below this are dropped from the
    /// objective and the quality average.
    pub weight_floor: f64,
}

impl Default for FitOptions {
    fn default() -> FitOptions {
        FitOptions { guard_degeneracy: true, weight_floor: 1e-9 }
    }
}

/// Widths along every column of F, one LP pair per direction.
pub fn polytope_widths(p: &HPolytope, f: &FacetNormals) -> Result<WidthProfile> {
    let q = f.f.cols();
    let deltas: Result<Vec<f64>> =
        (0..q).into_par_iter().map(|t| support_width(p, f.f.col(t))).collect();
    Ok(WidthProfile { deltas: deltas? })
}

/// Inner approximation with the power/energy generator family.
pub fn fit_zonotope(p: &HPolytope, widths: &WidthProfile, opts: &FitOptions) -> Result<Zonotope> {
    fit_family(p, widths, opts, Family::Pe)
}

/// Inner approximation with the plain box family. Objective weights come
/// from the axis directions only; quality is still scored over the full
/// direction family.
pub fn fit_box(p: &HPolytope, widths: &WidthProfile, opts: &FitOptions) -> Result<Zonotope> {
    fit_family(p, widths, opts, Family::Box)
}

fn fit_family(
    p: &HPolytope,
    widths: &WidthProfile,
    opts: &FitOptions,
    family: Family,
) -> Result<Zonotope> {
    let n = p.n;
    let tables = family_tables(family, n);
    let g = &tables.g;
    let abs_ftg = &tables.abs_ftg;
    let q = abs_ftg.rows();
    let ng = g.cols();
    if widths.deltas.len() != q {
        return Err(Error::DimensionMismatch("width profile vs facet normals"));
    }
    if opts.weight_floor <= 0.0 {
        return Err(Error::InvalidParams("weight floor must be positive".into()));
    }

    // objective weights over retained directions; box weights use only the
    // axis directions (the box family's own facet normals)
    let weight_dirs: Vec<usize> = match family {
        Family::Pe => (0..q).filter(|&t| widths.deltas[t] > opts.weight_floor).collect(),
        Family::Box => (0..n).filter(|&t| widths.deltas[t] > opts.weight_floor).collect(),
    };
    let mut w = vec![0.0; ng];
    if !weight_dirs.is_empty() {
        let scale = 2.0 / weight_dirs.len() as f64;
        for &t in &weight_dirs {
            for k in 0..ng {
                w[k] += scale * abs_ftg.get(t, k) / widths.deltas[t];
            }
        }
    }

    // variables: center (free), betabar (>= 0)
    let nv = n + ng;
    let m = p.b.len();
    let guard_rows = if opts.guard_degeneracy { q } else { 0 };
    let mut rows = Vec::with_capacity((m + guard_rows) * nv);
    let mut rhs = Vec::with_capacity(m + guard_rows);
    for i in 0..m {
        let row = p.a.row(i);
        rows.extend_from_slice(&row);
        let ag = g.tr_matvec(&row);
        for v in &ag {
            rows.push(v.abs());
        }
        rhs.push(p.b[i]);
    }
    if opts.guard_degeneracy {
        // minimum widths from the largest inscribed axis-aligned box:
        // (|F'G| betabar)_t >= |f_t|' half for every direction
        let (center, r) = max_inscribed_cube(p)?;
        let (lo, hi) = max_inscribed_box(p, &center, r)?;
        let half: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / 2.0).collect();
        for t in 0..q {
            let fcol = tables.f.col(t);
            let floor: f64 = fcol.iter().zip(&half).map(|(f, h)| f.abs() * h).sum();
            rows.extend(std::iter::repeat(0.0).take(n));
            for k in 0..ng {
                rows.push(-abs_ftg.get(t, k));
            }
            rhs.push(-floor);
        }
    }

    let mut cost = vec![0.0; nv];
    for k in 0..ng {
        cost[n + k] = -w[k];
    }
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); nv];
    for b in bounds.iter_mut().skip(n) {
        *b = (0.0, f64::INFINITY);
    }
    let sol = solve_lp(&LinearProgram {
        cost,
        ineq: Some((Mat::from_row_major(m + guard_rows, nv, &rows), rhs)),
        eq: None,
        bounds,
    })?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::EmptyPolytope),
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    let c = sol.x[..n].to_vec();
    let betabar: Vec<f64> = sol.x[n..].iter().map(|&b| b.max(0.0)).collect();
    let z = Zonotope { family, n, c, betabar };
    assert!(is_inside_polytope(&z, p), "fitted zonotope escaped the polytope");
    Ok(z)
}

/// Mean width ratio over retained directions (those with positive polytope
/// width): (1/q') sum of Delta_Z / Delta_P with Delta_Z = 2 |F'G| betabar.
pub fn approximation_quality(z: &Zonotope, widths: &WidthProfile) -> f64 {
    let floor = FitOptions::default().weight_floor;
    let dz = z.tables().abs_ftg.matvec(&z.betabar);
    let mut kept = 0usize;
    let mut acc = 0.0;
    for (t, &dp) in widths.deltas.iter().enumerate() {
        if dp > floor {
            kept += 1;
            acc += 2.0 * dz[t] / dp;
        }
    }
    if kept == 0 {
        // every direction degenerate: the point is matched perfectly
        return 1.0;
    }
    acc / kept as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Mat;
    use crate::zonotope::facet_normals;

    fn box_polytope(lo: &[f64], hi: &[f64]) -> HPolytope {
        let n = lo.len();
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for k in 0..n {
            let mut r = vec![0.0; n];
            r[k] = 1.0;
            rows.extend_from_slice(&r);
            b.push(hi[k]);
            r[k] = -1.0;
            rows.extend_from_slice(&r);
            b.push(-lo[k]);
        }
        HPolytope { a: Mat::from_row_major(b.len(), n, &rows), b, n }
    }

    fn pentagon() -> HPolytope {
        // vertices (1,0),(5,0),(5,4),(0,4),(0,1)
        let rows = [
            [0.0, -1.0, 0.0],
            [1.0, 0.0, 5.0],
            [0.0, 1.0, 4.0],
            [-1.0, 0.0, 0.0],
            [-1.0, -1.0, -1.0],
        ];
        HPolytope {
            a: Mat::from_row_major(5, 2, &rows.iter().flat_map(|r| [r[0], r[1]]).collect::<Vec<_>>()),
            b: rows.iter().map(|r| r[2]).collect(),
            n: 2,
        }
    }

    #[test]
    fn widths_of_box_and_point() {
        let f = facet_normals(2);
        let w = polytope_widths(&box_polytope(&[0.0, 0.0], &[5.0, 4.0]), &f).unwrap();
        assert!((w.deltas[0] - 5.0).abs() < 1e-7);
        assert!((w.deltas[1] - 4.0).abs() < 1e-7);
        assert!((w.deltas[2] - 9.0 / 2f64.sqrt()).abs() < 1e-7);

        let point = polytope_widths(&box_polytope(&[1.0, 2.0], &[1.0, 2.0]), &f).unwrap();
        assert!(point.deltas.iter().all(|d| d.abs() < 1e-8));
    }

    #[test]
    fn pentagon_widths() {
        let f = facet_normals(2);
        let w = polytope_widths(&pentagon(), &f).unwrap();
        assert!((w.deltas[0] - 5.0).abs() < 1e-7);
        assert!((w.deltas[1] - 4.0).abs() < 1e-7);
        assert!((w.deltas[2] - 8.0 / 2f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn box_is_recovered_exactly() {
        let p = box_polytope(&[0.0, 0.0], &[5.0, 4.0]);
        let f = facet_normals(2);
        let w = polytope_widths(&p, &f).unwrap();
        let opts = FitOptions::default();
        let z = fit_zonotope(&p, &w, &opts).unwrap();
        let lam = approximation_quality(&z, &w);
        assert!((lam - 1.0).abs() < 1e-6, "pe fit quality {lam}");

        let zb = fit_box(&p, &w, &opts).unwrap();
        let lam_b = approximation_quality(&zb, &w);
        assert!((lam_b - 1.0).abs() < 1e-6, "box fit quality {lam_b}");
        assert!((zb.c[0] - 2.5).abs() < 1e-6 && (zb.c[1] - 2.0).abs() < 1e-6);
        assert!((zb.betabar[0] - 2.5).abs() < 1e-6 && (zb.betabar[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn point_fit_is_point() {
        let p = box_polytope(&[1.0, -2.0], &[1.0, -2.0]);
        let f = facet_normals(2);
        let w = polytope_widths(&p, &f).unwrap();
        let z = fit_box(&p, &w, &FitOptions::default()).unwrap();
        assert!((z.c[0] - 1.0).abs() < 1e-7 && (z.c[1] + 2.0).abs() < 1e-7);
        assert!(z.betabar.iter().all(|b| b.abs() < 1e-8));
        assert!((approximation_quality(&z, &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn guard_keeps_all_directions_positive() {
        let p = pentagon();
        let f = facet_normals(2);
        let w = polytope_widths(&p, &f).unwrap();
        let z = fit_zonotope(&p, &w, &FitOptions::default()).unwrap();
        let dz = z.tables().abs_ftg.matvec(&z.betabar);
        for (t, v) in dz.iter().enumerate() {
            assert!(2.0 * v > 1e-6, "direction {t} collapsed");
        }
        assert!(is_inside_polytope(&z, &p));
    }

    #[test]
    fn quality_scales_linearly_in_betabar() {
        let p = pentagon();
        let f = facet_normals(2);
        let w = polytope_widths(&p, &f).unwrap();
        let z = fit_zonotope(&p, &w, &FitOptions::default()).unwrap();
        let lam = approximation_quality(&z, &w);
        for lambda in [0.25, 0.5, 0.75] {
            let scaled = Zonotope {
                family: z.family,
                n: z.n,
                c: z.c.clone(),
                betabar: z.betabar.iter().map(|b| b * lambda).collect(),
            };
            let got = approximation_quality(&scaled, &w);
            assert!((got - lambda * lam).abs() < 1e-12);
        }
    }

    #[test]
    fn quality_extremes() {
        let f = facet_normals(2);
        // betabar = 0 scores 0
        let z0 = Zonotope::new(Family::Pe, vec![0.0, 0.0], vec![0.0; 3]).unwrap();
        let w = WidthProfile { deltas: vec![2.0, 2.0, 2.0] };
        assert_eq!(approximation_quality(&z0, &w), 0.0);
        // widths matched exactly score 1
        let z = Zonotope::new(Family::Box, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let dz = z.tables().abs_ftg.matvec(&z.betabar);
        let w_match = WidthProfile { deltas: dz.iter().map(|v| 2.0 * v).collect() };
        assert!((approximation_quality(&z, &w_match) - 1.0).abs() < 1e-12);
        let _ = f;
    }
}
