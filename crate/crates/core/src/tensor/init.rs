use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Tensor, TensorError};

/// Glorot/Xavier uniform initialization of a `[fan_in, fan_out]` weight:
/// values drawn from `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
/// The result is gradient-tracked.
pub fn xavier_uniform<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Result<Tensor, TensorError> {
    if shape.len() != 2 {
        return Err(TensorError::InvalidShape {
            kernel: "xavier_uniform",
            expected: "[fan_in, fan_out]",
            shape: shape.to_vec(),
        });
    }
    if shape.contains(&0) {
        return Err(TensorError::ZeroDimension(shape.to_vec()));
    }
    let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite positive bound");
    let values = (0..shape[0] * shape[1]).map(|_| dist.sample(rng)).collect();
    Ok(Tensor::new(shape, values)?.tracked())
}

/// A gradient-tracked bias vector filled with `value`.
pub fn bias(len: usize, value: f64) -> Result<Tensor, TensorError> {
    Ok(Tensor::new(&[len], vec![value; len])?.tracked())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_values() {
        let a = xavier_uniform(&[7, 5], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = xavier_uniform(&[7, 5], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.is_tracked());
    }

    #[test]
    fn values_respect_bound_and_center() {
        let t = xavier_uniform(&[100, 100], &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let bound = (6.0f64 / 200.0).sqrt();
        assert!((bound - 0.1732).abs() < 1e-4);
        assert!(t.values().iter().all(|v| v.abs() <= bound));
        let mean = t.values().iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(xavier_uniform(&[0, 4], &mut rng).is_err());
        assert!(xavier_uniform(&[4], &mut rng).is_err());
        assert!(xavier_uniform(&[2, 2, 2], &mut rng).is_err());
    }
}
