use super::MoeaError;
use crate::scalar::Scalar;

/// Area dominated by `points` and bounded by `reference`, both objectives
/// minimized. Dominated points are allowed and contribute nothing.
pub fn hypervolume_2d<T: Scalar>(points: &[[T; 2]], reference: [T; 2]) -> Result<T, MoeaError> {
    if let Some(p) = points.iter().find(|p| p[0] > reference[0] || p[1] > reference[1]) {
        return Err(MoeaError::BeyondReference {
            point: [p[0].as_f64(), p[1].as_f64()],
            reference: [reference[0].as_f64(), reference[1].as_f64()],
        });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].order(&b[0]).then(a[1].order(&b[1])));
    let mut area = T::zero();
    let mut ceiling = reference[1];
    for p in sorted {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures() {
        assert_eq!(hypervolume_2d(&[[0.5, 0.5]], [1.0, 1.0]).unwrap(), 0.25);
        assert_eq!(hypervolume_2d::<f64>(&[], [1.0, 1.0]).unwrap(), 0.0);
        // Each point lies on an edge of the reference box.
        assert_eq!(hypervolume_2d(&[[0.0, 1.0], [1.0, 0.0]], [1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(hypervolume_2d(&[[0.0, 0.5], [0.5, 0.0]], [1.0, 1.0]).unwrap(), 0.75);
        assert_eq!(hypervolume_2d(&[[0.0, 0.0], [0.5, 0.5]], [1.0, 1.0]).unwrap(), 1.0);
        assert!(hypervolume_2d(&[[1.5, 0.0]], [1.0, 1.0]).is_err());
    }
}
