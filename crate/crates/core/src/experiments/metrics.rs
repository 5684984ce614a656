//! Trajectory error metric and affine calibration of learned potentials.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `(1/(d·N))·Σ_i Σ_j √(Σ_k (x_kj − x̂_kj)² / Σ_k x_kj²)` over `N`
/// trajectories of `d` states.
pub fn rel_l2_error(truth: &[Array2<f64>], pred: &[Array2<f64>]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no trajectories to compare".into()));
    }
    let d = truth[0].ncols();
    let mut total = 0.0;
    for (i, (x, y)) in truth.iter().zip(pred).enumerate() {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        if x.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.ncols() });
        }
        for j in 0..d {
            let (mut num, mut den) = (0.0, 0.0);
            for (a, b) in x.column(j).iter().zip(y.column(j)) {
                num += (a - b) * (a - b);
                den += a * a;
            }
            if den == 0.0 {
                return Err(Error::ZeroReference { trajectory: i, state: j });
            }
            total += (num / den).sqrt();
        }
    }
    Ok(total / (d * truth.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scale: f64,
    pub offset: f64,
    pub calibrated: Vec<f64>,
}

/// Least-squares `a·learned + b ≈ truth`. With `anchor = (k, v)` the offset
/// is pinned so that sample `k` maps exactly to `v` and only the scale is
/// fitted.
pub fn calibrate_affine(learned: &[f64], truth: &[f64], anchor: Option<(usize, f64)>) -> Result<Calibration> {
    if learned.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: learned.len(), got: truth.len() });
    }
    if learned.len() < 2 {
        return Err(Error::InvalidArgument("calibration needs at least two samples".into()));
    }
    let (scale, offset) = match anchor {
        None => {
            let n = learned.len() as f64;
            let ml = learned.iter().sum::<f64>() / n;
            let mt = truth.iter().sum::<f64>() / n;
            let sxx: f64 = learned.iter().map(|l| (l - ml) * (l - ml)).sum();
            let sxy: f64 = learned.iter().zip(truth).map(|(l, t)| (l - ml) * (t - mt)).sum();
            if sxx == 0.0 {
                return Err(Error::DegenerateFit);
            }
            let a = sxy / sxx;
            (a, mt - a * ml)
        }
        Some((k, v)) => {
            let lk = *learned
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("anchor index {k} out of range")))?;
            let sxx: f64 = learned.iter().map(|l| (l - lk) * (l - lk)).sum();
            let sxy: f64 = learned.iter().zip(truth).map(|(l, t)| (l - lk) * (t - v)).sum();
            if sxx == 0.0 {
                return Err(Error::DegenerateFit);
            }
            let a = sxy / sxx;
            (a, v - a * lk)
        }
    };
    let mut calibrated: Vec<f64> = learned.iter().map(|l| scale * l + offset).collect();
    if let Some((k, v)) = anchor {
        calibrated[k] = v;
    }
    Ok(Calibration { scale, offset, calibrated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn rel_l2_examples() {
        let x = vec![array![[1.0, 2.0], [3.0, -1.0]]];
        assert_eq!(rel_l2_error(&x, &x).unwrap(), 0.0);
        let twice = vec![x[0].mapv(|v| 2.0 * v)];
        assert!((rel_l2_error(&x, &twice).unwrap() - 1.0).abs() < 1e-15);
        let t = vec![array![[3.0], [4.0]]];
        let p = vec![array![[3.0], [0.0]]];
        assert!((rel_l2_error(&t, &p).unwrap() - 0.8).abs() < 1e-15);
        let z = vec![array![[0.0], [0.0]]];
        assert_eq!(rel_l2_error(&z, &t), Err(Error::ZeroReference { trajectory: 0, state: 0 }));
    }

    #[test]
    fn calibration_examples() {
        let truth = [0.5, 1.0, -2.0, 4.0];
        let c = calibrate_affine(&truth, &truth, None).unwrap();
        assert!((c.scale - 1.0).abs() < 1e-15 && c.offset.abs() < 1e-15);
        let learned: Vec<f64> = truth.iter().map(|t| 2.0 * t + 3.0).collect();
        let c = calibrate_affine(&learned, &truth, None).unwrap();
        assert!((c.scale - 0.5).abs() < 1e-14 && (c.offset + 1.5).abs() < 1e-14);
        let noisy = [1.0, 2.5, 2.0, 7.0];
        let c = calibrate_affine(&noisy, &truth, Some((0, truth[0]))).unwrap();
        assert_eq!(c.calibrated[0], truth[0]);
        assert_eq!(calibrate_affine(&[1.0, 1.0], &[0.0, 1.0], None), Err(Error::DegenerateFit));
    }

    proptest! {
        #[test]
        fn calibration_inverts_affine_maps(
            truth in prop::collection::vec(-10.0f64..10.0, 3..20),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -10.0f64..10.0,
        ) {
            let spread = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - truth.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-3);
            let learned: Vec<f64> = truth.iter().map(|t| a * t + b).collect();
            for anchor in [None, Some((0, truth[0]))] {
                let c = calibrate_affine(&learned, &truth, anchor).unwrap();
                for (x, y) in c.calibrated.iter().zip(&truth) {
                    prop_assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()));
                }
            }
        }

        #[test]
        fn rel_l2_is_permutation_invariant(seed in 0u64..1000, n in 2usize..6) {
            let mk = |s: u64| Array2::from_shape_fn((5, 2), |(k, j)| 1.0 + ((s * 31 + k as u64 * 7 + j as u64 * 3) % 11) as f64);
            let truth: Vec<_> = (0..n as u64).map(|i| mk(seed + i)).collect();
            let pred: Vec<_> = (0..n as u64).map(|i| mk(seed + 100 + i)).collect();
            let a = rel_l2_error(&truth, &pred).unwrap();
            let rt: Vec<_> = truth.iter().rev().cloned().collect();
            let rp: Vec<_> = pred.iter().rev().cloned().collect();
            let b = rel_l2_error(&rt, &rp).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a.max(1.0));
        }
    }
}
