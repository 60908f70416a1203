//! Local cubic Lagrange interpolation on sorted, possibly non-uniform samples.

use nalgebra::DVector;

/// Interpolates the samples at `t` with the cubic through the four samples
/// nearest to `t`. Falls back to lower degree when fewer samples exist.
/// Outside the sampled range the end stencils extrapolate.
pub fn cubic(times: &[f64], values: &[DVector<f64>], t: f64) -> DVector<f64> {
    debug_assert_eq!(times.len(), values.len());
    let n = times.len();
    assert!(n > 0, "cubic interpolation needs at least one sample");
    if n == 1 {
        return values[0].clone();
    }
    // exact hits return the stored sample unchanged
    let pos = times.partition_point(|&x| x < t);
    if pos < n && times[pos] == t {
        return values[pos].clone();
    }
    let width = n.min(4);
    let lo = pos.saturating_sub(2).min(n - width);
    let stencil = lo..lo + width;

    let mut out = DVector::zeros(values[0].len());
    for i in stencil.clone() {
        let mut w = 1.0;
        for j in stencil.clone() {
            if i != j {
                w *= (t - times[j]) / (times[i] - times[j]);
            }
        }
        out.axpy(w, &values[i], 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let times: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 + 0.013 * (i % 3) as f64).collect();
        let vals: Vec<_> = times.iter().map(|&t| DVector::from_element(1, f(t))).collect();
        for &t in &[0.0, 0.05, 0.33, 0.71, 0.83] {
            assert!((cubic(&times, &vals, t)[0] - f(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_sample_is_returned() {
        let times = vec![0.0, 1.0, 2.0];
        let vals: Vec<_> = times.iter().map(|&t| DVector::from_element(2, t * 3.0)).collect();
        assert_eq!(cubic(&times, &vals, 1.0), vals[1]);
    }
}
