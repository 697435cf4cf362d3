//! Bundled example groups used by the test suite, the verification runner
//! and the CLI documentation.
//!
//! `group_a` is a real rank-2 group in normalized marking position:
//! generator 1 is z -> z/25 (attractive 0, repulsive infinity), generator 2
//! has attractive fixed point 1, repulsive 3 and multiplier 1/30. Its
//! circles are exact: the second pair is the image under the generator of
//! the circle |z - 3| = 2/5, so the pairing condition holds to working
//! precision.
//!
//! `group_b` is a real rank-2 group with finite fixed points (-2, -4) and
//! (2, 4) and multipliers 1/40 and 1/35; its isometric circles are disjoint,
//! so no explicit circles are carried.

use rug::{Complex, Float, Rational};

use crate::moebius::{Circle, CirclePair, MarkedSchottkyGroup, MoebiusMap, PointP1};
use crate::prec::complex_from_rationals;

fn rat(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn circle(prec: u32, cn: i64, cd: i64, rn: i64, rd: i64) -> Circle {
    Circle::new(
        complex_from_rationals(&rat(cn, cd), &Rational::new(), prec),
        Float::with_val(prec, rat(rn, rd)),
    )
}

/// Real rank-2 group in normalized marking position, with exact circles.
pub fn group_a(prec: u32) -> MarkedSchottkyGroup {
    let g1 = MoebiusMap::from_int_entries(1, 0, 0, 25, prec).unwrap();
    let g2 = MoebiusMap::from_int_entries(27, -87, 29, -89, prec).unwrap();
    let pairs = vec![
        CirclePair {
            plus: Circle::new_unbounded(
                complex_from_rationals(&Rational::new(), &Rational::new(), prec),
                Float::with_val(prec, 8),
            ),
            minus: circle(prec, 0, 1, 8, 25),
        },
        CirclePair {
            plus: circle(prec, 3, 1, 2, 5),
            minus: circle(prec, 59, 68, 25, 68),
        },
    ];
    MarkedSchottkyGroup::new(vec![g1, g2], Some(pairs), prec).unwrap()
}

/// Real rank-2 group with finite fixed points and disjoint isometric circles.
pub fn group_b(prec: u32) -> MarkedSchottkyGroup {
    let g1 = MoebiusMap::from_int_entries(-76, -312, 39, 158, prec).unwrap();
    let g2 = MoebiusMap::from_int_entries(66, -272, 34, -138, prec).unwrap();
    MarkedSchottkyGroup::new(vec![g1, g2], None, prec).unwrap()
}

/// Rank-1 group with fixed points +-1 and multiplier 1/25; the circle pair
/// is exact (the minus circle is the exact image of |z + 1| = 1/2).
pub fn rank1_group(prec: u32) -> MarkedSchottkyGroup {
    let g = MoebiusMap::from_int_entries(26, 24, 24, 26, prec).unwrap();
    let pairs = vec![CirclePair {
        plus: circle(prec, -1, 1, 1, 2),
        minus: circle(prec, 8, 7, 5, 14),
    }];
    MarkedSchottkyGroup::new(vec![g], Some(pairs), prec).unwrap()
}

/// Rank-2 group with one nonreal generator, for error-path tests.
pub fn nonreal_group(prec: u32) -> MarkedSchottkyGroup {
    let i_pt = PointP1::Finite(complex_from_rationals(&Rational::new(), &rat(1, 1), prec));
    let mi_pt = PointP1::Finite(complex_from_rationals(&Rational::new(), &rat(-1, 1), prec));
    let q = Complex::with_val(prec, (Float::with_val(prec, rat(1, 25)), 0));
    let g1 = MoebiusMap::from_fixed_points(&i_pt, &mi_pt, &q, prec).unwrap();
    let g2 = MoebiusMap::from_int_entries(66, -272, 34, -138, prec).unwrap();
    MarkedSchottkyGroup::new(vec![g1, g2], None, prec).unwrap()
}

/// The fixed-point data of `group_a` with both multipliers replaced by `t`.
pub fn tiny_group(prec: u32, t: f64) -> MarkedSchottkyGroup {
    let tq = Complex::with_val(prec, (t, 0));
    let zero = PointP1::Finite(complex_from_rationals(&Rational::new(), &Rational::new(), prec));
    let one = PointP1::Finite(complex_from_rationals(&rat(1, 1), &Rational::new(), prec));
    let three = PointP1::Finite(complex_from_rationals(&rat(3, 1), &Rational::new(), prec));
    let g1 = MoebiusMap::from_fixed_points(&zero, &PointP1::Infinity, &tq, prec).unwrap();
    let g2 = MoebiusMap::from_fixed_points(&one, &three, &tq, prec).unwrap();
    MarkedSchottkyGroup::new(vec![g1, g2], None, prec).unwrap()
}

/// JSON group-spec document for `group_a`, as accepted by the CLI.
pub fn group_a_json(precision_bits: u32) -> String {
    format!(
        r#"{{
  "rank": 2,
  "precision_bits": {precision_bits},
  "generators": [
    [["1", "0"], ["0", "0"], ["0", "0"], ["25", "0"]],
    [["27", "0"], ["-87", "0"], ["29", "0"], ["-89", "0"]]
  ],
  "circles": [
    {{"index": 1, "center": ["0", "0"], "radius": "8", "unbounded": true}},
    {{"index": -1, "center": ["0", "0"], "radius": "8/25"}},
    {{"index": 2, "center": ["3", "0"], "radius": "2/5"}},
    {{"index": -2, "center": ["59/68", "0"], "radius": "25/68"}}
  ]
}}
"#
    )
}

/// JSON group-spec document for `group_b`.
pub fn group_b_json(precision_bits: u32) -> String {
    format!(
        r#"{{
  "rank": 2,
  "precision_bits": {precision_bits},
  "generators": [
    [["-76", "0"], ["-312", "0"], ["39", "0"], ["158", "0"]],
    [["66", "0"], ["-272", "0"], ["34", "0"], ["-138", "0"]]
  ]
}}
"#
    )
}

/// A group spec with a nonreal generator entry.
pub fn nonreal_group_json(precision_bits: u32) -> String {
    format!(
        r#"{{
  "rank": 2,
  "precision_bits": {precision_bits},
  "generators": [
    [["1.04", "0.2"], ["0", "0"], ["0", "0"], ["25", "0"]],
    [["66", "0"], ["-272", "0"], ["34", "0"], ["-138", "0"]]
  ]
}}
"#
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::validate_schottky;
    use crate::prec::{cabs, csub};

    const P: u32 = 128;

    #[test]
    fn bundled_groups_are_valid() {
        for group in [group_a(P), group_b(P), rank1_group(P)] {
            let cert = validate_schottky(&group).unwrap();
            assert!(cert.margin > 0);
        }
        assert!(!nonreal_group(P).is_real());
        assert!(group_a(P).is_real());
        assert!(group_b(P).is_real());
    }

    #[test]
    fn group_a_is_normalized() {
        let g = group_a(P);
        let fp1 = g.generator(0).fixed_points().unwrap();
        assert!(cabs(fp1.attractive.finite().unwrap()).is_zero());
        assert!(fp1.repulsive.is_infinity());
        let fp2 = g.generator(1).fixed_points().unwrap();
        let a2 = fp2.attractive.finite().unwrap();
        assert!(cabs(&csub(a2, &Complex::with_val(P, (1, 0)))) < Float::with_val(P, 1e-30));
        let q1 = g.generator(0).multiplier().unwrap();
        let q2 = g.generator(1).multiplier().unwrap();
        assert!((q1.real().to_f64() - 0.04).abs() < 1e-30);
        assert!((q2.real().to_f64() - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn bundled_groups_carry_exact_entries() {
        let g = group_a(P);
        assert!(g.generator(0).exact_entries().is_some());
    }
}
