//! Angular momentum coupling coefficients.
//!
//! Arguments are passed as twice their physical value so half-integer
//! quantum numbers stay exact.

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn triangle(tj1: i32, tj2: i32, tj: i32) -> bool {
    tj >= (tj1 - tj2).abs() && tj <= tj1 + tj2 && (tj1 + tj2 + tj) % 2 == 0
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | j m>` (Condon-Shortley phase).
///
/// All six arguments are doubled. Returns zero for any combination that
/// violates the triangle rule, projection bounds or `m = m1 + m2`.
pub fn clebsch_gordan(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> f64 {
    if tm != tm1 + tm2 || !triangle(tj1, tj2, tj) {
        return 0.0;
    }
    if tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return 0.0;
    }
    if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj + tm) % 2 != 0 {
        return 0.0;
    }
    // halve everything; the parity checks above guarantee integers
    let h = |x: i32| x / 2;
    let (a, b, c) = (tj1, tj2, tj);
    let pre = ((c + 1) as f64
        * factorial(h(c + a - b))
        * factorial(h(c - a + b))
        * factorial(h(a + b - c))
        / factorial(h(a + b + c) + 1))
    .sqrt();
    let proj = (factorial(h(c + tm))
        * factorial(h(c - tm))
        * factorial(h(a - tm1))
        * factorial(h(a + tm1))
        * factorial(h(b - tm2))
        * factorial(h(b + tm2)))
    .sqrt();

    let mut sum = 0.0;
    let kmax = h(a + b - c).min(h(a - tm1)).min(h(b + tm2));
    for k in 0..=kmax {
        let d4 = h(c - b + tm1) + k;
        let d5 = h(c - a - tm2) + k;
        if d4 < 0 || d5 < 0 {
            continue;
        }
        let denom = factorial(k)
            * factorial(h(a + b - c) - k)
            * factorial(h(a - tm1) - k)
            * factorial(h(b + tm2) - k)
            * factorial(d4)
            * factorial(d5);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    pre * proj * sum
}

/// Doubled projections `2j, 2j-2, ..., -2j` in descending order.
pub fn projections(tj: i32) -> impl Iterator<Item = i32> {
    (0..=tj).map(move |k| tj - 2 * k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_values() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((clebsch_gordan(1, 1, 1, -1, 2, 0) - s).abs() < 1e-14);
        assert!((clebsch_gordan(1, -1, 1, 1, 2, 0) - s).abs() < 1e-14);
        assert!((clebsch_gordan(1, 1, 1, -1, 0, 0) - s).abs() < 1e-14);
        assert!((clebsch_gordan(1, -1, 1, 1, 0, 0) + s).abs() < 1e-14);
        assert!((clebsch_gordan(2, 2, 2, -2, 0, 0) - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((clebsch_gordan(3, 3, 2, 2, 5, 5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn selection_rules_give_zero() {
        assert_eq!(clebsch_gordan(1, 1, 2, 0, 3, -1), 0.0);
        assert_eq!(clebsch_gordan(1, 1, 2, 0, 7, 1), 0.0);
        assert_eq!(clebsch_gordan(1, 3, 2, 0, 3, 3), 0.0);
    }

    /// Closed form for a sigma-minus step J -> J+1 from projection m.
    #[test]
    fn stretched_ladder_closed_form() {
        for tj in [1, 3] {
            for tm in projections(tj) {
                let cg = clebsch_gordan(tj, tm, 2, -2, tj + 2, tm - 2);
                let j = tj as f64 / 2.0;
                let m = tm as f64 / 2.0;
                let expect = (j - m + 1.0) * (j - m + 2.0) / ((2.0 * j + 1.0) * (2.0 * j + 2.0));
                assert!((cg * cg - expect).abs() < 1e-13, "j={j} m={m}");
            }
        }
    }

    #[test]
    fn orthonormal_over_uncoupled_pairs() {
        for (tj1, tj2) in [(1i32, 2i32), (3, 2), (5, 3), (2, 2)] {
            let tjs: Vec<i32> = ((tj1 - tj2).abs()..=tj1 + tj2).step_by(2).collect();
            for &ja in &tjs {
                for &jb in &tjs {
                    for tm in projections(ja.min(jb)) {
                        let mut s = 0.0;
                        for tm1 in projections(tj1) {
                            let tm2 = tm - tm1;
                            s += clebsch_gordan(tj1, tm1, tj2, tm2, ja, tm)
                                * clebsch_gordan(tj1, tm1, tj2, tm2, jb, tm);
                        }
                        let expect = if ja == jb { 1.0 } else { 0.0 };
                        assert!((s - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
