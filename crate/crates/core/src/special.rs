//! Gamma function with exact values at small positive integers.

/// `Γ(x)` for `x > 0`.
///
/// Small positive integers return the exact factorial so that quantities
/// built from `Γ(1)`, `Γ(2)`, ... reduce exactly in the Brownian case.
pub fn gamma(x: f64) -> f64 {
    if x > 0.0 && x <= 20.0 && x.fract() == 0.0 {
        return (1..x as u64).map(|k| k as f64).product();
    }
    statrs::function::gamma::gamma(x)
}
