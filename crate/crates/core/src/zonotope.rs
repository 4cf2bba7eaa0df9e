//! The structured zonotope family used for inner approximation.
//!
//! A zonotope is (generator family, center, bound vector). Two families
//! exist: the power/energy family with N axis generators plus N-1 normalized
//! difference generators, and the plain box family (identity generators).
//! For the power/energy family the facet normals are exactly the normalized
//! consecutive-sum directions, which makes the q-inequality membership test
//! exact and keeps Minkowski sums closed form.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::optim::TOL_FEAS;
use crate::polytope::HPolytope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pe,
    Box,
}

impl Family {
    /// Number of generators at horizon n.
    pub fn gen_count(self, n: usize) -> usize {
        match self {
            Family::Pe => 2 * n - 1,
            Family::Box => n,
        }
    }
}

/// Generator matrix of the power/energy family.
#[derive(Debug, Clone)]
pub struct PeGenerators {
    pub n: usize,
    /// N x (2N-1), unit columns: axis generators then difference generators.
    pub g: Mat,
}

/// Facet-normal directions: all normalized consecutive index sums.
#[derive(Debug, Clone)]
pub struct FacetNormals {
    pub n: usize,
    /// N x q with q = N(N+1)/2, ordered by span length then start index, so
    /// the first N columns are the axis directions.
    pub f: Mat,
}

/// Immutable per-(family, horizon) tables shared across threads.
pub struct FamilyTables {
    pub family: Family,
    pub n: usize,
    /// N x g generator matrix.
    pub g: Mat,
    /// N x q facet normals (same directions for both families).
    pub f: Mat,
    /// q x g elementwise |F' G|.
    pub abs_ftg: Mat,
}

pub fn pe_generators(n: usize) -> PeGenerators {
    assert!(n >= 1);
    let mut g = Mat::zeros(n, 2 * n - 1);
    for i in 0..n {
        g.set(i, i, 1.0);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n - 1 {
        g.set(j, n + j, -s);
        g.set(j + 1, n + j, s);
    }
    PeGenerators { n, g }
}

pub fn facet_normals(n: usize) -> FacetNormals {
    assert!(n >= 1);
    let q = n * (n + 1) / 2;
    let mut f = Mat::zeros(n, q);
    let mut col = 0;
    for span in 1..=n {
        let scale = 1.0 / (span as f64).sqrt();
        for start in 0..=(n - span) {
            for i in start..start + span {
                f.set(i, col, scale);
            }
            col += 1;
        }
    }
    debug_assert_eq!(col, q);
    FacetNormals { n, f }
}

fn build_tables(family: Family, n: usize) -> FamilyTables {
    let g = match family {
        Family::Pe => pe_generators(n).g,
        Family::Box => {
            let mut m = Mat::zeros(n, n);
            for i in 0..n {
                m.set(i, i, 1.0);
            }
            m
        }
    };
    let f = facet_normals(n).f;
    let abs_ftg = f.tr_matmul(&g).abs();
    FamilyTables { family, n, g, f, abs_ftg }
}

/// Returns the cached tables for (family, n), building them on first use.
pub fn family_tables(family: Family, n: usize) -> Arc<FamilyTables> {
    static CACHE: OnceLock<Mutex<HashMap<(Family, usize), Arc<FamilyTables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("family table cache poisoned");
    map.entry((family, n)).or_insert_with(|| Arc::new(build_tables(family, n))).clone()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    pub family: Family,
    #[serde(rename = "N")]
    pub n: usize,
    /// Center trajectory (kW per step).
    pub c: Vec<f64>,
    /// Generator bounds, length matching the family's generator count.
    pub betabar: Vec<f64>,
}

impl Zonotope {
    pub fn new(family: Family, c: Vec<f64>, betabar: Vec<f64>) -> Result<Zonotope> {
        let n = c.len();
        if n == 0 {
            return Err(Error::InvalidParams("zonotope needs dimension >= 1".into()));
        }
        if betabar.len() != family.gen_count(n) {
            return Err(Error::DimensionMismatch("betabar length vs generator count"));
        }
        if let Some(i) = betabar.iter().position(|&b| b < 0.0 || !b.is_finite()) {
            return Err(Error::NegativeBeta(i));
        }
        Ok(Zonotope { family, n, c, betabar })
    }

    pub fn tables(&self) -> Arc<FamilyTables> {
        family_tables(self.family, self.n)
    }

    /// p = c + G beta.
    pub fn realize(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.betabar.len() {
            return Err(Error::DimensionMismatch("beta length vs generator count"));
        }
        if let Some(i) =
            (0..beta.len()).find(|&i| beta[i].abs() > self.betabar[i] + TOL_FEAS)
        {
            return Err(Error::BetaOutOfRange(i));
        }
        let mut p = self.tables().g.matvec(beta);
        for (pi, ci) in p.iter_mut().zip(&self.c) {
            *pi += ci;
        }
        Ok(p)
    }
}

/// Index of the first violated facet inequality, or None when p is a member.
/// The test |F'(p-c)| <= |F'G| betabar is exact for both families.
pub fn violated_facet(z: &Zonotope, p: &[f64]) -> Option<usize> {
    debug_assert_eq!(p.len(), z.n);
    let t = z.tables();
    let diff: Vec<f64> = p.iter().zip(&z.c).map(|(a, b)| a - b).collect();
    let lhs = t.f.tr_matvec(&diff);
    let rhs = t.abs_ftg.matvec(&z.betabar);
    (0..lhs.len()).find(|&i| lhs[i].abs() > rhs[i] + TOL_FEAS)
}

pub fn contains_point(z: &Zonotope, p: &[f64]) -> bool {
    violated_facet(z, p).is_none()
}

/// True iff A c + |A G| betabar <= b within tolerance, which certifies that
/// the whole zonotope lies inside the polytope.
pub fn is_inside_polytope(z: &Zonotope, p: &HPolytope) -> bool {
    debug_assert_eq!(z.n, p.n);
    let t = z.tables();
    for i in 0..p.b.len() {
        let row = p.a.row(i);
        let mut lhs = 0.0;
        for (j, &cj) in z.c.iter().enumerate() {
            lhs += row[j] * cj;
        }
        let ag = t.g.tr_matvec(&row);
        for (k, &v) in ag.iter().enumerate() {
            lhs += v.abs() * z.betabar[k];
        }
        if lhs > p.b[i] + TOL_FEAS {
            return false;
        }
    }
    true
}

/// Exact Minkowski sum: centers and bounds add componentwise.
pub fn minkowski_sum(zs: &[Zonotope]) -> Result<Zonotope> {
    let first = zs.first().ok_or(Error::InvalidParams("empty zonotope list".into()))?;
    let mut c = vec![0.0; first.n];
    let mut betabar = vec![0.0; first.betabar.len()];
    for z in zs {
        if z.family != first.family || z.n != first.n {
            return Err(Error::FamilyMismatch);
        }
        for (acc, v) in c.iter_mut().zip(&z.c) {
            *acc += v;
        }
        for (acc, v) in betabar.iter_mut().zip(&z.betabar) {
            *acc += v;
        }
    }
    Ok(Zonotope { family: first.family, n: first.n, c, betabar })
}

/// Adjusts an aggregate for members joining and leaving without resumming
/// the whole population.
pub fn update_aggregate(zagg: &Zonotope, add: &[Zonotope], remove: &[Zonotope]) -> Result<Zonotope> {
    let mut c = zagg.c.clone();
    let mut betabar = zagg.betabar.clone();
    for (z, sign) in add.iter().map(|z| (z, 1.0)).chain(remove.iter().map(|z| (z, -1.0))) {
        if z.family != zagg.family || z.n != zagg.n {
            return Err(Error::FamilyMismatch);
        }
        for (acc, v) in c.iter_mut().zip(&z.c) {
            *acc += sign * v;
        }
        for (acc, v) in betabar.iter_mut().zip(&z.betabar) {
            *acc += sign * v;
        }
    }
    for (i, b) in betabar.iter_mut().enumerate() {
        if *b < -TOL_FEAS {
            return Err(Error::NegativeBeta(i));
        }
        *b = b.max(0.0);
    }
    Ok(Zonotope { family: zagg.family, n: zagg.n, c, betabar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{solve_lp, LinearProgram, LpStatus};
    use crate::rng::FlexRng;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn generators_smallest_horizons() {
        let g1 = pe_generators(1);
        assert_eq!(g1.g.rows(), 1);
        assert_eq!(g1.g.cols(), 1);
        assert_eq!(g1.g.get(0, 0), 1.0);

        let g2 = pe_generators(2);
        assert_eq!(g2.g.cols(), 3);
        assert_eq!(g2.g.col(0), &[1.0, 0.0]);
        assert_eq!(g2.g.col(1), &[0.0, 1.0]);
        assert!((g2.g.get(0, 2) + S).abs() < 1e-15 && (g2.g.get(1, 2) - S).abs() < 1e-15);

        let g3 = pe_generators(3);
        assert_eq!(g3.g.cols(), 5);
        let last = g3.g.col(4);
        assert!(last[0].abs() < 1e-15 && (last[1] + S).abs() < 1e-15 && (last[2] - S).abs() < 1e-15);
    }

    #[test]
    fn generator_columns_unit_norm() {
        for n in 1..=8 {
            let g = pe_generators(n).g;
            for c in 0..g.cols() {
                let norm: f64 = g.col(c).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn facet_normal_family() {
        let f1 = facet_normals(1);
        assert_eq!(f1.f.cols(), 1);
        assert_eq!(f1.f.get(0, 0), 1.0);

        let f2 = facet_normals(2);
        assert_eq!(f2.f.cols(), 3);
        assert_eq!(f2.f.col(0), &[1.0, 0.0]);
        assert_eq!(f2.f.col(1), &[0.0, 1.0]);
        assert!((f2.f.get(0, 2) - S).abs() < 1e-15 && (f2.f.get(1, 2) - S).abs() < 1e-15);

        assert_eq!(facet_normals(4).f.cols(), 10);

        // unit norm, pairwise distinct, axis directions first
        for n in 1..=7 {
            let f = facet_normals(n).f;
            assert_eq!(f.cols(), n * (n + 1) / 2);
            for c in 0..f.cols() {
                let norm: f64 = f.col(c).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
                for c2 in 0..c {
                    let same = f.col(c).iter().zip(f.col(c2)).all(|(a, b)| (a - b).abs() < 1e-12);
                    assert!(!same, "duplicate facet normals {c2} and {c}");
                }
            }
            for i in 0..n {
                assert_eq!(f.get(i, i), 1.0);
            }
        }
    }

    #[test]
    fn membership_examples() {
        let z = Zonotope::new(Family::Pe, vec![0.0, 0.0], vec![1.0, 1.0, 2f64.sqrt()]).unwrap();
        assert!(contains_point(&z, &[0.0, 0.0]));
        assert!(contains_point(&z, &[2.0, -2.0]));
        assert!(!contains_point(&z, &[2.0, 2.0]));
        // the violated direction is the full-span sum (1,1)/sqrt(2)
        assert_eq!(violated_facet(&z, &[2.0, 2.0]), Some(2));
    }

    /// LP membership oracle: feasibility of G beta = p - c, |beta| <= betabar.
    fn member_lp(z: &Zonotope, p: &[f64]) -> bool {
        let t = z.tables();
        let d: Vec<f64> = p.iter().zip(&z.c).map(|(a, b)| a - b).collect();
        let bounds: Vec<(f64, f64)> = z.betabar.iter().map(|&b| (-b, b)).collect();
        let sol = solve_lp(&LinearProgram {
            cost: vec![0.0; z.betabar.len()],
            ineq: None,
            eq: Some((t.g.clone(), d)),
            bounds,
        })
        .unwrap();
        sol.status == LpStatus::Optimal
    }

    #[test]
    fn membership_matches_lp_oracle() {
        let mut rng = FlexRng::new(11, 0);
        for n in 2..=4 {
            let g = 2 * n - 1;
            let c: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let betabar: Vec<f64> = (0..g).map(|_| rng.uniform(0.1, 1.5)).collect();
            let z = Zonotope::new(Family::Pe, c, betabar).unwrap();
            let mut both = 0;
            for _ in 0..300 {
                let p: Vec<f64> = (0..n).map(|_| rng.uniform(-4.0, 4.0)).collect();
                let quick = contains_point(&z, &p);
                let exact = member_lp(&z, &p);
                // skip disputes within LP tolerance of the boundary
                if quick != exact {
                    let scaled: Vec<f64> =
                        p.iter().zip(&z.c).map(|(v, c)| c + (v - c) * 0.999).collect();
                    assert_eq!(contains_point(&z, &scaled), member_lp(&z, &scaled));
                } else {
                    both += 1;
                }
            }
            assert!(both > 250, "too many boundary disputes: {both}");
        }
    }

    #[test]
    fn box_family_membership_is_interval_test() {
        let z = Zonotope::new(Family::Box, vec![1.0, -1.0], vec![0.5, 2.0]).unwrap();
        assert!(contains_point(&z, &[1.5, 1.0]));
        assert!(!contains_point(&z, &[1.6, 0.0]));
        assert!(!contains_point(&z, &[1.0, 1.1]));
    }

    #[test]
    fn inclusion_in_polytope() {
        let params = crate::polytope::PeParams {
            n: 2,
            t_s: 1.0,
            p_lo: vec![-3.0, -3.0],
            p_hi: vec![3.0, 3.0],
            e_lo: vec![0.0, 0.0],
            e_hi: vec![20.0, 20.0],
            e0: 10.0,
        };
        let p = crate::polytope::build_pe_polytope(&params).unwrap();
        let degenerate = Zonotope::new(Family::Pe, vec![0.5, -0.5], vec![0.0; 3]).unwrap();
        assert!(is_inside_polytope(&degenerate, &p));
        let too_big = Zonotope::new(Family::Pe, vec![0.0, 0.0], vec![4.0, 4.0, 0.0]).unwrap();
        assert!(!is_inside_polytope(&too_big, &p));
        // box-family zonotope equal to the power box: equality rows hold
        let power_box = Zonotope::new(Family::Box, vec![0.0, 0.0], vec![3.0, 3.0]).unwrap();
        let box_only = crate::polytope::build_pe_polytope(&crate::polytope::PeParams {
            e_lo: vec![-1e9, -1e9],
            e_hi: vec![1e9, 1e9],
            ..params
        })
        .unwrap();
        assert!(is_inside_polytope(&power_box, &box_only));
    }

    #[test]
    fn minkowski_formula() {
        let z1 = Zonotope::new(Family::Pe, vec![1.0, 2.0], vec![1.0, 1.0, 0.0]).unwrap();
        let z2 = Zonotope::new(Family::Pe, vec![-1.0, 0.0], vec![0.0, 2.0, 1.0]).unwrap();
        let sum = minkowski_sum(&[z1.clone(), z2]).unwrap();
        assert_eq!(sum.c, vec![0.0, 2.0]);
        assert_eq!(sum.betabar, vec![1.0, 3.0, 1.0]);
        // single element is the identity
        let one = minkowski_sum(&[z1.clone()]).unwrap();
        assert_eq!(one, z1);
    }

    #[test]
    fn family_mismatch_rejected() {
        let z1 = Zonotope::new(Family::Pe, vec![0.0, 0.0], vec![1.0; 3]).unwrap();
        let z2 = Zonotope::new(Family::Box, vec![0.0, 0.0], vec![1.0; 2]).unwrap();
        assert!(matches!(minkowski_sum(&[z1, z2]), Err(Error::FamilyMismatch)));
    }

    #[test]
    fn churn_matches_scratch_sum() {
        let mut rng = FlexRng::new(21, 0);
        let n = 3;
        let make = |rng: &mut FlexRng| {
            let c: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let bb: Vec<f64> = (0..2 * n - 1).map(|_| rng.uniform(0.0, 1.0)).collect();
            Zonotope::new(Family::Pe, c, bb).unwrap()
        };
        let mut members: Vec<Zonotope> = (0..20).map(|_| make(&mut rng)).collect();
        let mut agg = minkowski_sum(&members).unwrap();
        for step in 0..100 {
            if step % 3 == 0 && members.len() > 2 {
                let idx = rng.below(members.len());
                let gone = members.remove(idx);
                agg = update_aggregate(&agg, &[], &[gone]).unwrap();
            } else {
                let z = make(&mut rng);
                agg = update_aggregate(&agg, std::slice::from_ref(&z), &[]).unwrap();
                members.push(z);
            }
        }
        let scratch = minkowski_sum(&members).unwrap();
        for i in 0..n {
            assert!((agg.c[i] - scratch.c[i]).abs() < 1e-12);
        }
        for i in 0..2 * n - 1 {
            assert!((agg.betabar[i] - scratch.betabar[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn add_remove_round_trip() {
        let base = Zonotope::new(Family::Pe, vec![0.25, -0.5], vec![1.5, 0.75, 0.25]).unwrap();
        let extra = Zonotope::new(Family::Pe, vec![1.0, 2.0], vec![0.5, 0.5, 0.5]).unwrap();
        let grown = update_aggregate(&base, std::slice::from_ref(&extra), &[]).unwrap();
        let back = update_aggregate(&grown, &[], &[extra]).unwrap();
        assert_eq!(back, base);
    }

    #[test]
    fn removal_past_zero_rejected() {
        let base = Zonotope::new(Family::Pe, vec![0.0, 0.0], vec![1.0, 1.0, 1.0]).unwrap();
        let big = Zonotope::new(Family::Pe, vec![0.0, 0.0], vec![2.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            update_aggregate(&base, &[], &[big]),
            Err(Error::NegativeBeta(0))
        ));
    }

    #[test]
    fn realize_basics() {
        let z = Zonotope::new(Family::Pe, vec![1.0, -1.0], vec![1.0, 2.0, 0.5]).unwrap();
        assert_eq!(z.realize(&[0.0, 0.0, 0.0]).unwrap(), vec![1.0, -1.0]);
        // full axis deflection, no difference component
        let p = z.realize(&[1.0, 2.0, 0.0]).unwrap();
        assert_eq!(p, vec![2.0, 1.0]);
        assert!(matches!(z.realize(&[1.2, 0.0, 0.0]), Err(Error::BetaOutOfRange(0))));
        // random members are contained
        let mut rng = FlexRng::new(5, 0);
        for _ in 0..200 {
            let beta: Vec<f64> =
                z.betabar.iter().map(|&b| rng.uniform(-1.0, 1.0) * b).collect();
            let p = z.realize(&beta).unwrap();
            assert!(contains_point(&z, &p));
        }
    }

    #[test]
    fn zonotope_json_shape() {
        let z = Zonotope::new(Family::Pe, vec![0.0, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        let s = serde_json::to_string(&z).unwrap();
        assert!(s.contains("\"family\":\"pe\"") && s.contains("\"N\":2"));
        let back: Zonotope = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
    }
}
