//! Fixed-order Gauss–Legendre rules on `[0, 1]`.

use crate::scalar::Scalar;

const GL3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 0.277_777_777_777_777_8),
    (0.5, 0.444_444_444_444_444_4),
    (0.887_298_334_620_741_7, 0.277_777_777_777_777_8),
];

const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_004, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_45, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_45),
    (0.769_234_655_052_841_6, 0.239_314_335_249_683_23),
    (0.953_089_922_969_332, 0.118_463_442_528_094_54),
];

/// Nodes and weights on `[a, b]`; exact for polynomials up to degree 5.
pub(crate) fn gauss3<T: Scalar>(a: T, b: T) -> [(T, T); 3] {
    map_rule(&GL3, a, b)
}

/// Nodes and weights on `[a, b]`; exact for polynomials up to degree 9.
pub(crate) fn gauss5<T: Scalar>(a: T, b: T) -> [(T, T); 5] {
    map_rule(&GL5, a, b)
}

fn map_rule<T: Scalar, const N: usize>(rule: &[(f64, f64); N], a: T, b: T) -> [(T, T); N] {
    let h = b - a;
    let mut out = [(T::zero(), T::zero()); N];
    for (o, &(x, w)) in out.iter_mut().zip(rule) {
        *o = (a + h * T::lit(x), h * T::lit(w));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_low_degree() {
        let s: f64 = gauss3(0.0f64, 2.0).iter().map(|&(x, w)| w * x.powi(5)).sum();
        assert!((s - 64.0 / 6.0).abs() < 1e-12);
        let s: f64 = gauss5(-1.0f64, 1.0).iter().map(|&(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }
}
