//! Adaptive Gauss–Kronrod quadrature (G7/K15) with panel bisection to a
//! fixed absolute tolerance. All kernel and density normalizations in
//! the crate run through this routine.

/// 15-point Kronrod abscissae on [-1, 1] (symmetric; nonnegative half).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss weights for the embedded 7-point rule (odd Kronrod nodes).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = WGK[7] * f(c);
    let mut gauss = WG[3] * f(c);
    for i in 0..7 {
        let dx = h * XGK[i];
        let fsum = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    (value, err)
}

/// Integrates `f` over `[a, b]` by adaptive bisection to absolute
/// tolerance `tol` per panel stack.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (value, err) = gk15(&f, lo, hi);
        if err <= t || depth >= 40 {
            total += value;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t, depth + 1));
            stack.push((mid, hi, 0.5 * t, depth + 1));
        }
    }
    total
}

/// Integrates a nonnegative decaying integrand over `[a, inf)`: scans
/// right from the integrand's peak and truncates once values fall below
/// `1e-16` of the running peak.
pub fn integrate_to_decay<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: f64) -> f64 {
    let mut peak = f(a).abs();
    let mut hi = a;
    let step = scale.max(1e-12);
    loop {
        let next = hi + step;
        let v = f(next).abs();
        peak = peak.max(v);
        hi = next;
        if v < 1e-16 * peak && hi > a + 4.0 * step {
            break;
        }
        if hi > a + 1e6 * step {
            break;
        }
    }
    integrate(f, a, hi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_exact() {
        let got = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert_abs_diff_eq!(got, 8.0, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_mass() {
        let got = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -10.0,
            10.0,
            1e-10,
        );
        assert_abs_diff_eq!(got, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn decaying_tail() {
        let got = integrate_to_decay(|x| (-x).exp(), 0.0, 1.0, 1e-10);
        assert_abs_diff_eq!(got, 1.0, epsilon = 1e-8);
    }
}
