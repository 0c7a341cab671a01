//! Quadrature rules on the reference triangle `{(ξ, η): ξ, η ≥ 0, ξ + η ≤ 1}`
//! and the unit interval.

use std::sync::OnceLock;

/// Number of points of the triangle rule.
pub const NQ: usize = 12;

/// Number of points of the edge rule.
pub const NQ_EDGE: usize = 4;

/// Degree-6 symmetric 12-point rule (Dunavant). Weights sum to one and are
/// multiplied by the element area.
pub fn triangle_rule() -> &'static [([f64; 2], f64); NQ] {
    static RULE: OnceLock<[([f64; 2], f64); NQ]> = OnceLock::new();
    RULE.get_or_init(|| {
        let wa = 0.050_844_906_370_206_79;
        let a = 0.063_089_014_491_502_21;
        let wb = 0.116_786_275_726_379_29;
        let b = 0.249_286_745_170_910_46;
        let wc = 0.082_851_075_618_373_63;
        let c1 = 0.053_145_049_844_816_98;
        let c2 = 0.310_352_451_033_784_34;
        let mut out = [([0.0; 2], 0.0); NQ];
        let mut k = 0;
        let mut push = |l: [f64; 3], w: f64| {
            // (ξ, η) = (λ1, λ2)
            out[k] = ([l[1], l[2]], w);
            k += 1;
        };
        for (p, w) in [(a, wa), (b, wb)] {
            let q = 1.0 - 2.0 * p;
            push([q, p, p], w);
            push([p, q, p], w);
            push([p, p, q], w);
        }
        let c3 = 1.0 - c1 - c2;
        for l in [
            [c1, c2, c3],
            [c1, c3, c2],
            [c2, c1, c3],
            [c2, c3, c1],
            [c3, c1, c2],
            [c3, c2, c1],
        ] {
            push(l, wc);
        }
        out
    })
}

/// 4-point Gauss–Legendre rule on `[0, 1]`; weights sum to one.
pub fn edge_rule() -> &'static [(f64, f64); NQ_EDGE] {
    static RULE: OnceLock<[(f64, f64); NQ_EDGE]> = OnceLock::new();
    RULE.get_or_init(|| {
        let x1 = (3.0 / 7.0 - 2.0 / 7.0 * (6.0_f64 / 5.0).sqrt()).sqrt();
        let x2 = (3.0 / 7.0 + 2.0 / 7.0 * (6.0_f64 / 5.0).sqrt()).sqrt();
        let w1 = (18.0 + 30.0_f64.sqrt()) / 36.0;
        let w2 = (18.0 - 30.0_f64.sqrt()) / 36.0;
        let map = |x: f64| 0.5 * (1.0 + x);
        [
            (map(-x2), 0.5 * w2),
            (map(-x1), 0.5 * w1),
            (map(x1), 0.5 * w1),
            (map(x2), 0.5 * w2),
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(f: impl Fn(f64, f64) -> f64) -> f64 {
        // reference triangle area is 1/2
        triangle_rule().iter().map(|&(p, w)| w * f(p[0], p[1])).sum::<f64>() * 0.5
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rule_is_exact_to_degree_six() {
        // ∫ ξ^i η^j = i! j! / (i + j + 2)!
        for i in 0..=6u32 {
            for j in 0..=(6 - i) {
                let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                let got = integrate(|x, y| x.powi(i as i32) * y.powi(j as i32));
                assert!((got - exact).abs() < 1e-15, "{i} {j}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn edge_rule_is_exact_to_degree_seven() {
        for k in 0..=7 {
            let got: f64 = edge_rule().iter().map(|&(s, w)| w * s.powi(k)).sum();
            assert!((got - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
