//! Time quadrature shared by the heat harness and the energy budget.

/// Weights `(w0, w1)`, in units of the step, of the exponential trapezoid
///
/// ```text
/// ∫_0^h e^{-a(h-τ)} g(τ) dτ ≈ h (w0 g(0) + w1 g(h)),   z = a h
/// w0 = (1 - (1+z) e^{-z}) / z²,   w1 = (z - 1 + e^{-z}) / z²
/// ```
///
/// exact for `g` linear in `τ`. Both tend to 1/2 as `z → 0`.
pub fn exp_trapezoid_weights(z: f64) -> (f64, f64) {
    if z < 0.5 {
        // Σ_j (-z)^j (j+1)/(j+2)!  and  Σ_j (-z)^j /(j+2)!
        let mut w0 = 0.0;
        let mut w1 = 0.0;
        let mut term = 0.5; // (-z)^j / (j+2)!
        for j in 0..24 {
            w0 += (j + 1) as f64 * term;
            w1 += term;
            term *= -z / (j + 3) as f64;
        }
        (w0, w1)
    } else {
        let e = (-z).exp();
        let z2 = z * z;
        ((1.0 - (1.0 + z) * e) / z2, (z - 1.0 + e) / z2)
    }
}

/// Composite trapezoid rule over possibly uneven sample times.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(times.len(), values.len());
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
