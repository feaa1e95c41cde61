//! Independent quadrature used as a test oracle.

/// Tanh-sinh quadrature of `g` over `(a, b)`; tolerant of endpoint singularities.
pub(crate) fn tanh_sinh(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / 64.0;
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for k in -448i32..=448 {
        let t = k as f64 * h;
        let u = 0.5 * std::f64::consts::PI * t.sinh();
        let w = 0.5 * std::f64::consts::PI * t.cosh() / u.cosh().powi(2);
        // 1 + x and 1 - x for x = tanh(u), without cancellation
        let point =
            if u < 0.0 { a + half * 2.0 / (1.0 + (-2.0 * u).exp()) } else { b - half * 2.0 / (1.0 + (2.0 * u).exp()) };
        if point <= a || point >= b || w == 0.0 {
            continue;
        }
        let v = g(point);
        if v.is_finite() {
            acc += w * v;
        }
    }
    acc * h * half
}
