//! Barrier-time gradient reduction.

use crate::error::Result;
use crate::nn::GradVector;
use crate::scalar::Scalar;

/// Mean of the per-worker averaged gradients, over the workers that
/// contributed (`Some`). Reduction runs in ascending worker order. Returns
/// `None` when nobody contributed.
pub fn aggregate<S: Scalar>(per_worker: &[Option<GradVector<S>>]) -> Result<Option<GradVector<S>>> {
    let mut total: Option<GradVector<S>> = None;
    for g in per_worker.iter().flatten() {
        let mean = GradVector::from_sum(g.mean(), 1);
        match total.as_mut() {
            None => total = Some(mean),
            Some(t) => t.absorb(&mean)?,
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_contributions_average_to_themselves() {
        let g = GradVector::from_sum(vec![0.3f64, -1.7, 2.5], 1);
        let agg = aggregate(&[Some(g.clone()), Some(g.clone()), Some(g.clone())]).unwrap().unwrap();
        assert_eq!(agg.count(), 3);
        for (a, b) in agg.mean().iter().zip(g.mean()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn divides_by_contributors_not_workers() {
        let g = GradVector::from_sum(vec![4.0f64, 8.0], 2); // mean [2, 4]
        let agg = aggregate(&[None, Some(g), None]).unwrap().unwrap();
        assert_eq!(agg.mean(), vec![2.0, 4.0]);
        assert!(aggregate::<f64>(&[None, None]).unwrap().is_none());
    }

    #[test]
    fn mismatched_lengths_fail() {
        let a = GradVector::from_sum(vec![1.0f64], 1);
        let b = GradVector::from_sum(vec![1.0f64, 2.0], 1);
        assert!(aggregate(&[Some(a), Some(b)]).is_err());
    }
}
