//! Exact truncated power series over the integers and rationals, the
//! divisor-sum series feeding the Tate curve `y^2 + xy = x^3 + a4 x + a6`,
//! and the telescoping product identity
//! `(1-y)^2 ... (1-y^{k-1})^2 prod_m (1-y^{k+m})^2 = prod_m (1-y^{1+m})^2`.
//!
//! Arithmetic is exact through the truncation order; multiplication simply
//! drops higher terms. The Weierstrass relation is verified at rational
//! specializations z0 of the uniformizing coordinate, where every summand of
//! the classical series for X and Y expands exactly in powers of q.

use rug::ops::Pow;
use rug::{Complete, Integer, Rational};

use crate::error::{Error, Result};

/// Truncated power series with exact integer coefficients c_0..c_N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZSeries {
    coeffs: Vec<Integer>,
}

impl ZSeries {
    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![Integer::new(); order + 1] }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = Integer::from(1);
        s
    }

    pub fn from_coeffs(coeffs: Vec<Integer>) -> Self {
        assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> &Integer {
        &self.coeffs[n]
    }

    pub fn coeffs(&self) -> &[Integer] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, n: usize, v: Integer) {
        self.coeffs[n] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0)
    }

    pub fn first_nonzero_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| *c != 0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        let coeffs = (0..=n)
            .map(|i| (&self.coeffs[i] + &o.coeffs[i]).complete())
            .collect();
        Self { coeffs }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        let coeffs = (0..=n)
            .map(|i| (&self.coeffs[i] - &o.coeffs[i]).complete())
            .collect();
        Self { coeffs }
    }

    pub fn neg(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| (-c).complete()).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        let mut coeffs = vec![Integer::new(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(n + 1) {
            if *a == 0 {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate().take(n + 1 - i) {
                coeffs[i + j] += (a * b).complete();
            }
        }
        Self { coeffs }
    }

    pub fn scale(&self, k: i64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| (c * k).complete()).collect() }
    }

    /// Exact division by an integer; fails if any coefficient is not
    /// divisible.
    pub fn div_exact(&self, k: i64) -> Result<Self> {
        let kk = Integer::from(k);
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (n, c) in self.coeffs.iter().enumerate() {
            let (q, r) = c.clone().div_rem(kk.clone());
            if r != 0 {
                return Err(Error::IntegralityViolation { order: n });
            }
            coeffs.push(q);
        }
        Ok(Self { coeffs })
    }

    pub fn to_q(&self) -> QSeries {
        QSeries {
            coeffs: self.coeffs.iter().map(|c| Rational::from(c)).collect(),
        }
    }
}

/// Truncated power series with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSeries {
    coeffs: Vec<Rational>,
}

impl QSeries {
    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![Rational::new(); order + 1] }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = Rational::from(1);
        s
    }

    pub fn constant(c: Rational, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> &Rational {
        &self.coeffs[n]
    }

    pub fn set_coeff(&mut self, n: usize, v: Rational) {
        self.coeffs[n] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0)
    }

    pub fn first_nonzero_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| *c != 0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        let coeffs = (0..=n)
            .map(|i| (&self.coeffs[i] + &o.coeffs[i]).complete())
            .collect();
        Self { coeffs }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        let coeffs = (0..=n)
            .map(|i| (&self.coeffs[i] - &o.coeffs[i]).complete())
            .collect();
        Self { coeffs }
    }

    pub fn neg(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| (-c).complete()).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        let mut coeffs = vec![Rational::new(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(n + 1) {
            if *a == 0 {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate().take(n + 1 - i) {
                coeffs[i + j] += (a * b).complete();
            }
        }
        Self { coeffs }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self { coeffs: self.coeffs.iter().map(|x| (x * c).complete()).collect() }
    }

    /// Multiplicative inverse; the constant term must be nonzero.
    pub fn inverse(&self) -> Result<Self> {
        if self.coeffs[0] == 0 {
            return Err(Error::InvalidParameter(
                "series with zero constant term is not invertible".into(),
            ));
        }
        let n = self.order();
        let mut inv = vec![Rational::new(); n + 1];
        inv[0] = Rational::from(1) / self.coeffs[0].clone();
        for m in 1..=n {
            let mut acc = Rational::new();
            for j in 0..m {
                acc += (&self.coeffs[m - j] * &inv[j]).complete();
            }
            inv[m] = -acc / self.coeffs[0].clone();
        }
        Ok(Self { coeffs: inv })
    }
}

/// The odd divisor-power sums: coefficient of q^n is `sum_{d|n} d^k`.
pub fn sk_series(k: u32, order: usize) -> Result<ZSeries> {
    if !matches!(k, 1 | 3 | 5) {
        return Err(Error::InvalidParameter(format!("k = {k} not in {{1, 3, 5}}")));
    }
    if order < 1 {
        return Err(Error::InvalidParameter("order must be at least 1".into()));
    }
    let mut s = ZSeries::zero(order);
    for d in 1..=order {
        let dk = Integer::from(d).pow(k);
        let mut m = d;
        while m <= order {
            s.coeffs[m] += &dk;
            m += d;
        }
    }
    Ok(s)
}

/// The coefficient series of the cubic: `a4 = -5 s3` and
/// `a6 = -(5 s3 + 7 s5)/12`, the division being exact at every order.
pub fn a4_a6_series(order: usize) -> Result<(ZSeries, ZSeries)> {
    let s3 = sk_series(3, order)?;
    let s5 = sk_series(5, order)?;
    let a4 = s3.scale(-5);
    let a6 = s3.scale(5).add(&s5.scale(7)).neg().div_exact(12)?;
    Ok((a4, a6))
}

/// X(z0) and Y(z0) as exact q-series at a rational point z0 of the
/// multiplicative group, z0 not 0 or 1.
pub fn xy_series(z0: &Rational, order: usize) -> Result<(QSeries, QSeries)> {
    if *z0 == 0 || *z0 == 1 {
        return Err(Error::PoleAtZ0(z0.to_string()));
    }
    let one_minus = Rational::from(1) - z0;
    // constant terms z0/(1-z0)^2 and z0^2/(1-z0)^3
    let om2 = (&one_minus * &one_minus).complete();
    let om3 = (&om2 * &one_minus).complete();
    let x0 = (z0 / &om2).complete();
    let y0 = (z0 * z0).complete() / om3;

    // powers z0^d and z0^-d, 1 <= d <= order
    let mut pow = Vec::with_capacity(order + 1);
    let mut ipow = Vec::with_capacity(order + 1);
    pow.push(Rational::from(1));
    ipow.push(Rational::from(1));
    let z0_inv = z0.clone().recip();
    for d in 1..=order {
        pow.push((&pow[d - 1] * z0).complete());
        ipow.push((&ipow[d - 1] * &z0_inv).complete());
    }

    let mut x = QSeries::zero(order);
    let mut y = QSeries::zero(order);
    x.coeffs[0] = x0;
    y.coeffs[0] = y0;
    for d in 1..=order {
        // q^n z / (1-q^n z)^2 expands to sum_d d z^d q^(nd); the n <= -1 part
        // of the bilateral sum contributes d z^-d q^(nd), and for Y the cube
        // flips the sign of the z^-d terms
        let dd = Rational::from(d);
        let x_term = ((&pow[d] + &ipow[d]).complete() - Rational::from(2)) * &dd;
        let d1 = Rational::from((d * (d - 1)) as u64) / Rational::from(2);
        let d2 = Rational::from((d * (d + 1)) as u64) / Rational::from(2);
        let y_term =
            (&pow[d] * &d1).complete() - (&ipow[d] * &d2).complete() + dd.clone();
        let mut m = d;
        while m <= order {
            x.coeffs[m] += &x_term;
            y.coeffs[m] += &y_term;
            m += d;
        }
    }
    Ok((x, y))
}

/// Residual of `Y^2 + XY - X^3 - a4 X - a6` at the rational point z0,
/// through the given order; identically zero when the curve relation holds.
pub fn weierstrass_check(z0: &Rational, order: usize) -> Result<QSeries> {
    let (x, y) = xy_series(z0, order)?;
    let (a4, a6) = a4_a6_series(order)?;
    let a4 = a4.to_q();
    let a6 = a6.to_q();
    let y2 = y.mul(&y);
    let xy = x.mul(&y);
    let x3 = x.mul(&x).mul(&x);
    let res = y2.add(&xy).sub(&x3).sub(&a4.mul(&x)).sub(&a6);
    Ok(res)
}

/// Difference of the two sides of the telescoping identity through the given
/// order; identically zero for every k >= 2.
pub fn telescoping_check(k: usize, order: usize) -> Result<ZSeries> {
    if k < 2 {
        return Err(Error::InvalidParameter("telescoping check needs k >= 2".into()));
    }
    let one_minus_pow_sq = |j: usize, acc: &ZSeries| -> ZSeries {
        // acc * (1 - y^j)^2, truncated
        let mut f = ZSeries::one(order);
        if j <= order {
            f.coeffs[j] = Integer::from(-1);
        }
        acc.mul(&f).mul(&f)
    };
    let mut lhs = ZSeries::one(order);
    for j in 1..k {
        lhs = one_minus_pow_sq(j, &lhs);
    }
    for j in k..=order {
        lhs = one_minus_pow_sq(j, &lhs);
    }
    let mut rhs = ZSeries::one(order);
    for j in 1..=order {
        rhs = one_minus_pow_sq(j, &rhs);
    }
    Ok(lhs.sub(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn divisor_sums() {
        let s1 = sk_series(1, 6).unwrap();
        let expect: Vec<i64> = vec![0, 1, 3, 4, 7, 6, 12];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(*s1.coeff(n), *e);
        }
        assert_eq!(*sk_series(3, 2).unwrap().coeff(2), 9);
        assert_eq!(*sk_series(5, 2).unwrap().coeff(2), 33);
        assert!(sk_series(2, 5).is_err());
    }

    #[test]
    fn a4_a6_values() {
        let (a4, a6) = a4_a6_series(10).unwrap();
        assert_eq!(*a4.coeff(1), -5);
        assert_eq!(*a6.coeff(1), -1);
        assert_eq!(*a6.coeff(2), -23);
    }

    #[test]
    fn nodal_cubic_at_constant_term() {
        // at q^0: X = z0/(1-z0)^2, Y = z0^2/(1-z0)^3 satisfy y^2 + xy = x^3
        let z0 = Rational::from(2);
        let (x, y) = xy_series(&z0, 1).unwrap();
        let x0 = x.coeff(0).clone();
        let y0 = y.coeff(0).clone();
        let lhs = y0.clone() * y0.clone() + x0.clone() * y0;
        let rhs = x0.clone() * x0.clone() * x0;
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn weierstrass_residual_vanishes() {
        for z0 in [Rational::from(2), Rational::from(-3), Rational::from((5, 7))] {
            let res = weierstrass_check(&z0, 15).unwrap();
            assert!(res.is_zero(), "residual {:?} at z0 = {z0}", res.first_nonzero_order());
        }
    }

    #[test]
    fn weierstrass_rejects_poles() {
        assert!(matches!(
            weierstrass_check(&Rational::from(0), 5),
            Err(Error::PoleAtZ0(_))
        ));
        assert!(matches!(
            weierstrass_check(&Rational::from(1), 5),
            Err(Error::PoleAtZ0(_))
        ));
    }

    #[test]
    fn telescoping_vanishes() {
        for k in [2, 3, 5] {
            let res = telescoping_check(k, 25).unwrap();
            assert!(res.is_zero());
        }
    }

    #[test]
    fn telescoping_low_order_by_hand() {
        // both sides reduce to prod (1 - y^m)^2 = 1 - 2y - y^2 + 2y^3 + ...
        let k = 2;
        let res = telescoping_check(k, 3).unwrap();
        assert!(res.is_zero());
        let mut rhs = ZSeries::one(3);
        for j in 1..=3 {
            let mut f = ZSeries::one(3);
            f.set_coeff(j, Integer::from(-1));
            rhs = rhs.mul(&f).mul(&f);
        }
        let expect: Vec<i64> = vec![1, -2, -1, 2];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(*rhs.coeff(n), *e);
        }
    }

    #[test]
    fn integrality_violation_is_reported() {
        let s = ZSeries::from_coeffs(vec![Integer::from(3), Integer::from(5)]);
        assert!(matches!(
            s.div_exact(3),
            Err(Error::IntegralityViolation { order: 1 })
        ));
    }

    fn arb_zseries(order: usize) -> impl Strategy<Value = ZSeries> {
        proptest::collection::vec(-50i64..50, order + 1)
            .prop_map(|v| ZSeries::from_coeffs(v.into_iter().map(Integer::from).collect()))
    }

    proptest! {
        #[test]
        fn zseries_ring_axioms(a in arb_zseries(8), b in arb_zseries(8), c in arb_zseries(8)) {
            let ab_c = a.mul(&b).mul(&c);
            let a_bc = a.mul(&b.mul(&c));
            prop_assert_eq!(&ab_c, &a_bc);
            let dist = a.mul(&b.add(&c));
            let dist2 = a.mul(&b).add(&a.mul(&c));
            prop_assert_eq!(&dist, &dist2);
            prop_assert_eq!(&a.mul(&b), &b.mul(&a));
        }

        #[test]
        fn qseries_inverse_is_two_sided(v in proptest::collection::vec((-20i64..20, 1i64..20), 7)) {
            let mut coeffs: Vec<Rational> = v.into_iter().map(|(n, d)| Rational::from((n, d))).collect();
            if coeffs[0] == 0 {
                coeffs[0] = Rational::from(1);
            }
            let s = QSeries { coeffs };
            let inv = s.inverse().unwrap();
            prop_assert_eq!(s.mul(&inv), QSeries::one(s.order()));
        }
    }
}
