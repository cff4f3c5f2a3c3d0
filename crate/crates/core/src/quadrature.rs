//! Quadrature rules on the reference triangle.

/// A point in barycentric coordinates together with its weight relative to
/// the triangle area (weights sum to 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const A1: f64 = 0.108_103_018_168_070;
const B1: f64 = 0.445_948_490_915_965;
const W1: f64 = 0.223_381_589_678_011;
const A2: f64 = 0.816_847_572_980_459;
const B2: f64 = 0.091_576_213_509_771;
const W2: f64 = 0.109_951_743_655_322;

/// Six-point rule exact for polynomials of degree 4 (Dunavant).
pub fn triangle_degree4() -> Vec<QuadPoint> {
    vec![
        QuadPoint { bary: [A1, B1, B1], weight: W1 },
        QuadPoint { bary: [B1, A1, B1], weight: W1 },
        QuadPoint { bary: [B1, B1, A1], weight: W1 },
        QuadPoint { bary: [A2, B2, B2], weight: W2 },
        QuadPoint { bary: [B2, A2, B2], weight: W2 },
        QuadPoint { bary: [B2, B2, A2], weight: W2 },
    ]
}

/// Seven-point rule exact for degree 5 (Radon). Used by test oracles so that
/// they do not share the production rule.
pub fn triangle_degree5() -> Vec<QuadPoint> {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    let b1 = 1.0 - 2.0 * a1;
    let b2 = 1.0 - 2.0 * a2;
    vec![
        QuadPoint { bary: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], weight: 9.0 / 40.0 },
        QuadPoint { bary: [b1, a1, a1], weight: w1 },
        QuadPoint { bary: [a1, b1, a1], weight: w1 },
        QuadPoint { bary: [a1, a1, b1], weight: w1 },
        QuadPoint { bary: [b2, a2, a2], weight: w2 },
        QuadPoint { bary: [a2, b2, a2], weight: w2 },
        QuadPoint { bary: [a2, a2, b2], weight: w2 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    // Exact integral of l0^a l1^b l2^c over a unit-area triangle:
    // 2 a! b! c! / (a+b+c+2)!
    fn monomial_exact(a: u32, b: u32, c: u32) -> f64 {
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        2.0 * f(a) * f(b) * f(c) / f(a + b + c + 2)
    }

    fn check(rule: &[QuadPoint], degree: u32) {
        let wsum: f64 = rule.iter().map(|p| p.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-14);
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                let c = degree - a - b;
                let got: f64 = rule
                    .iter()
                    .map(|p| {
                        p.weight
                            * p.bary[0].powi(a as i32)
                            * p.bary[1].powi(b as i32)
                            * p.bary[2].powi(c as i32)
                    })
                    .sum();
                let want = monomial_exact(a, b, c);
                assert!((got - want).abs() < 1e-13, "{a} {b} {c}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn degree4_rule_is_exact() {
        for d in 0..=4 {
            check(&triangle_degree4(), d);
        }
    }

    #[test]
    fn degree5_rule_is_exact() {
        for d in 0..=5 {
            check(&triangle_degree5(), d);
        }
    }
}
