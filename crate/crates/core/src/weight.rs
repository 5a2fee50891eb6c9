//! Monte Carlo event weight normalization.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WeightError {
    #[error("sum of generator weights is zero; cannot normalize")]
    ZeroSumOfWeights,
}

/// Scales a generator weight to the expected yield at the given integrated
/// luminosity: `gen_weight * cross_section_pb * luminosity_invpb / sum_of_weights`.
///
/// Evaluated left to right, so scaling the cross section by a power of two
/// scales the result exactly.
pub fn normalize_weight(
    gen_weight: f64,
    cross_section_pb: f64,
    luminosity_invpb: f64,
    sum_of_weights: f64,
) -> Result<f64, WeightError> {
    if sum_of_weights == 0.0 {
        return Err(WeightError::ZeroSumOfWeights);
    }
    Ok(gen_weight * cross_section_pb * luminosity_invpb / sum_of_weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_arithmetic() {
        assert_eq!(normalize_weight(1.0, 1.0, 1.0, 1.0), Ok(1.0));
        assert_eq!(normalize_weight(2.0, 50.0, 1000.0, 10000.0), Ok(10.0));
    }

    #[test]
    fn zero_sum_rejected() {
        assert_eq!(normalize_weight(1.0, 1.0, 1.0, 0.0), Err(WeightError::ZeroSumOfWeights));
        assert_eq!(
            normalize_weight(1.0, 1.0, 1.0, -0.0),
            Err(WeightError::ZeroSumOfWeights)
        );
    }

    #[test]
    fn negative_weights_pass_through() {
        assert_eq!(normalize_weight(-1.0, 2.0, 3.0, 6.0), Ok(-1.0));
    }
}
