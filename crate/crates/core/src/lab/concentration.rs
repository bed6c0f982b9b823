use serde::Serialize;

use crate::error::Result;
use crate::estimators::{check_budget, ColRowDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub size: usize,
    /// Mass of the `size` most probable pairs.
    pub mass: f64,
    /// `size / k`.
    pub reference: f64,
    /// `(1 - mass) / (k - size)`; absent at `size = k`.
    pub objective: Option<f64>,
    /// `mass > size / k`.
    pub above: bool,
}

/// Cumulative top mass against the `|C| / k` line for `|C| = 0..=k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationCurve {
    pub k: usize,
    pub points: Vec<CurvePoint>,
    /// Smallest `|C| ≥ 1` whose point lies above the line.
    pub first_above: Option<usize>,
    /// Largest `|C|` whose point lies above the line.
    pub largest_above: Option<usize>,
}

pub fn concentration_curve(p: &ColRowDistribution, k: usize) -> Result<ConcentrationCurve> {
    check_budget(k, p.len())?;
    let probs = p.probs();
    let ranked = p.ranked_indices();
    let mut points = Vec::with_capacity(k + 1);
    let mut mass = 0.0;
    for size in 0..=k {
        if size > 0 {
            mass += probs[ranked[size - 1]];
        }
        let reference = size as f64 / k as f64;
        points.push(CurvePoint {
            size,
            mass,
            reference,
            objective: (size < k).then(|| (1.0 - mass) / (k - size) as f64),
            above: mass > reference,
        });
    }
    let first_above = points.iter().skip(1).find(|q| q.above).map(|q| q.size);
    let largest_above = points.iter().rev().find(|q| q.above).map(|q| q.size);
    Ok(ConcentrationCurve {
        k,
        points,
        first_above,
        largest_above,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::variance_condition_holds;

    #[test]
    fn uniform_stays_below_the_line() {
        let p = ColRowDistribution::uniform(20).unwrap();
        let c = concentration_curve(&p, 8).unwrap();
        assert_eq!(c.points.len(), 9);
        assert!(c.points[1..8].iter().all(|q| q.mass < q.reference));
        assert_eq!(c.first_above, None);
    }

    #[test]
    fn point_mass_jumps_at_one() {
        let p = ColRowDistribution::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let c = concentration_curve(&p, 3).unwrap();
        assert_eq!(c.points[1].mass, 1.0);
        assert_eq!(c.first_above, Some(1));
        assert_eq!(c.largest_above, Some(2));
    }

    #[test]
    fn power_law_crosses_at_one() {
        let p = ColRowDistribution::power_law(100, 2.0).unwrap();
        let c = concentration_curve(&p, 30).unwrap();
        assert_eq!(c.first_above, Some(1));
        let s: f64 = (1..=100).map(|i| 1.0 / (i * i) as f64).sum();
        assert!((c.points[1].mass - 1.0 / s).abs() < 1e-12);
        for w in c.points.windows(3) {
            assert!(w[1].mass >= w[0].mass);
            assert!(w[1].mass - w[0].mass >= w[2].mass - w[1].mass - 1e-15);
        }
        let last = c.points.last().unwrap();
        assert!((last.mass - p.top_mass(30)).abs() < 1e-15);
    }

    #[test]
    fn above_matches_variance_condition() {
        let p = ColRowDistribution::power_law(50, 1.0).unwrap();
        let c = concentration_curve(&p, 10).unwrap();
        for q in &c.points {
            assert_eq!(q.above, variance_condition_holds(&p, 10, q.size).unwrap());
        }
    }
}
