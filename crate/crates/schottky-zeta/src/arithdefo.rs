//! Truncated multivariate power series in the deformation parameters
//! y_1..y_g with exact rational coefficients, and the universal multiplier
//! expansions of the deformation-family generators
//!
//! ```text
//! phi_i = (x_i  x_-i; 1  1) (y_i  0; 0  1) (x_i  x_-i; 1  1)^-1
//! ```
//!
//! normalized so that x_1 = 0, x_-1 = infinity, x_2 = 1 and phi_1 =
//! diag(1, y_1). The remaining x's are specialized to exact rationals, so
//! all coefficients live in Q. The multiplier of a word w is the branch of
//!
//! ```text
//! det q^2 - (tr^2 - 2 det) q + det = 0
//! ```
//!
//! with q = 0 mod (y_1..y_g), computed by the y-adically contracting
//! iteration q <- det (q^2 + 1) / (tr^2 - 2 det) started at 0.

use std::collections::BTreeMap;

use rug::{Complete, Integer, Rational};

use crate::error::{Error, Result};
use crate::tate::ZSeries;
use crate::words::{Letter, Word};

/// Exponent vector, one entry per deformation variable.
pub type Exps = Vec<u32>;

/// Multivariate power series truncated at a total-degree cap, with exact
/// rational coefficients. Only nonzero monomials are stored; the map order
/// makes iteration deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiSeries {
    vars: usize,
    cap: u32,
    terms: BTreeMap<Exps, Rational>,
}

impl MultiSeries {
    pub fn zero(vars: usize, cap: u32) -> Self {
        Self { vars, cap, terms: BTreeMap::new() }
    }

    pub fn constant(c: Rational, vars: usize, cap: u32) -> Self {
        let mut s = Self::zero(vars, cap);
        if c != 0 {
            s.terms.insert(vec![0; vars], c);
        }
        s
    }

    pub fn one(vars: usize, cap: u32) -> Self {
        Self::constant(Rational::from(1), vars, cap)
    }

    /// The variable y_i (1-based).
    pub fn variable(i: usize, vars: usize, cap: u32) -> Self {
        assert!(i >= 1 && i <= vars);
        let mut s = Self::zero(vars, cap);
        if cap >= 1 {
            let mut e = vec![0; vars];
            e[i - 1] = 1;
            s.terms.insert(e, Rational::from(1));
        }
        s
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exps, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u32]) -> Rational {
        self.terms.get(exps).cloned().unwrap_or_default()
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&vec![0; self.vars])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smallest total degree of a nonzero monomial.
    pub fn min_total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).min()
    }

    fn insert(&mut self, exps: Exps, c: Rational) {
        if c == 0 {
            return;
        }
        if exps.iter().sum::<u32>() > self.cap {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0 {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.vars, o.vars);
        let cap = self.cap.min(o.cap);
        let mut out = Self::zero(self.vars, cap);
        for (e, c) in &self.terms {
            out.insert(e.clone(), c.clone());
        }
        for (e, c) in &o.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero(self.vars, self.cap);
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), (-c).complete());
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.vars, o.vars);
        let cap = self.cap.min(o.cap);
        let mut out = Self::zero(self.vars, cap);
        for (ea, ca) in &self.terms {
            let da: u32 = ea.iter().sum();
            if da > cap {
                continue;
            }
            for (eb, cb) in &o.terms {
                let db: u32 = eb.iter().sum();
                if da + db > cap {
                    continue;
                }
                let exps: Exps = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.insert(exps, (ca * cb).complete());
            }
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if *c == 0 {
            return Self::zero(self.vars, self.cap);
        }
        let mut out = Self::zero(self.vars, self.cap);
        for (e, v) in &self.terms {
            out.terms.insert(e.clone(), (v * c).complete());
        }
        out
    }

    /// Multiplicative inverse; needs a nonzero constant term.
    pub fn inverse(&self) -> Result<Self> {
        let c0 = self.constant_term();
        if c0 == 0 {
            return Err(Error::NonInvertibleLeadingTerm);
        }
        // write self = c0 (1 - n) and expand the geometric series in n,
        // which has positive minimal degree
        let n = Self::constant(c0.clone(), self.vars, self.cap)
            .sub(self)
            .scale(&c0.clone().recip());
        let mut acc = Self::one(self.vars, self.cap);
        let mut pow = Self::one(self.vars, self.cap);
        for _ in 0..self.cap {
            pow = pow.mul(&n);
            if pow.is_zero() {
                break;
            }
            acc = acc.add(&pow);
        }
        Ok(acc.scale(&c0.recip()))
    }

    /// Quotient self / a, exact through the cap; `a` needs a nonzero
    /// constant term. Eliminates the minimal remaining monomial in graded
    /// order, one sparse update per quotient term.
    pub fn div(&self, a: &Self) -> Result<Self> {
        let a0 = a.constant_term();
        if a0 == 0 {
            return Err(Error::NonInvertibleLeadingTerm);
        }
        let cap = self.cap.min(a.cap);
        let mut rem = self.clone();
        rem.cap = cap;
        let mut out = Self::zero(self.vars, cap);
        loop {
            let Some((gamma, coef)) = rem
                .terms
                .iter()
                .min_by_key(|(e, _)| (e.iter().sum::<u32>(), (*e).clone()))
                .map(|(e, c)| (e.clone(), c.clone()))
            else {
                break;
            };
            let t = coef / a0.clone();
            // rem -= t x^gamma * a
            for (e, c) in &a.terms {
                let exps: Exps = gamma.iter().zip(e).map(|(x, y)| x + y).collect();
                rem.insert(exps, -(c * &t).complete());
            }
            out.terms.insert(gamma, t);
        }
        Ok(out)
    }

    /// Substitute values for a subset of the variables and re-truncate. The
    /// result keeps the original variable slots; substituted slots no longer
    /// occur. Exact when every substituted value is zero; otherwise the
    /// monomials already dropped at the cap are missing from the result.
    pub fn specialize(&self, assignment: &[Option<Rational>]) -> Self {
        assert_eq!(assignment.len(), self.vars);
        let mut out = Self::zero(self.vars, self.cap);
        'term: for (e, c) in &self.terms {
            let mut coeff = c.clone();
            let mut exps = e.clone();
            for (i, a) in assignment.iter().enumerate() {
                if let Some(v) = a {
                    if e[i] > 0 {
                        if *v == 0 {
                            continue 'term;
                        }
                        let mut p = Rational::from(1);
                        for _ in 0..e[i] {
                            p *= v;
                        }
                        coeff *= p;
                        exps[i] = 0;
                    }
                }
            }
            out.insert(exps, coeff);
        }
        out
    }

    /// Evaluate at exact rational values of all variables.
    pub fn eval(&self, values: &[Rational]) -> Rational {
        assert_eq!(values.len(), self.vars);
        let mut acc = Rational::new();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (i, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    term *= &values[i];
                }
            }
            acc += term;
        }
        acc
    }

    /// View a series in the single variable y_1 as a univariate integer
    /// series, if all coefficients are integers and no other variable occurs.
    pub fn to_zseries_in_y1(&self, order: usize) -> Option<ZSeries> {
        let mut z = ZSeries::zero(order);
        for (e, c) in &self.terms {
            if e[1..].iter().any(|&x| x > 0) {
                return None;
            }
            if c.denom() != &1 {
                return None;
            }
            let deg = e[0] as usize;
            if deg <= order {
                z.set_coeff(deg, c.numer().clone());
            }
        }
        Some(z)
    }
}

/// 2x2 matrix with series entries, row major.
#[derive(Debug, Clone)]
pub struct SeriesMat(pub [MultiSeries; 4]);

impl SeriesMat {
    pub fn mul(&self, o: &Self) -> Self {
        let [a, b, c, d] = &self.0;
        let [e, f, g, h] = &o.0;
        SeriesMat([
            a.mul(e).add(&b.mul(g)),
            a.mul(f).add(&b.mul(h)),
            c.mul(e).add(&d.mul(g)),
            c.mul(f).add(&d.mul(h)),
        ])
    }

    pub fn adjugate(&self) -> Self {
        let [a, b, c, d] = &self.0;
        SeriesMat([d.clone(), b.neg(), c.neg(), a.clone()])
    }

    pub fn det(&self) -> MultiSeries {
        let [a, b, c, d] = &self.0;
        a.mul(d).sub(&b.mul(c))
    }

    pub fn trace(&self) -> MultiSeries {
        let [a, _, _, d] = &self.0;
        a.add(d)
    }
}

/// Rational values for the free fixed-point slots, with x_1 = 0,
/// x_2 = 1 and x_-1 = infinity built in; a degree cap for all series.
#[derive(Debug, Clone)]
pub struct ArithConfig {
    g: usize,
    cap: u32,
    /// x_-2, then (x_3, x_-3), ..., (x_g, x_-g)
    x: BTreeMap<i32, Rational>,
}

impl ArithConfig {
    /// `x_rest` must supply x_-2 and x_{+-i} for 3 <= i <= g (nothing for
    /// g = 1). All x values, together with 0 and 1, must be pairwise
    /// distinct.
    pub fn new(g: usize, x_rest: &[(i32, Rational)], cap: u32) -> Result<Self> {
        if g == 0 {
            return Err(Error::InvalidParameter("rank must be at least 1".into()));
        }
        let mut x = BTreeMap::new();
        x.insert(1, Rational::new());
        if g >= 2 {
            x.insert(2, Rational::from(1));
        }
        for (idx, v) in x_rest {
            x.insert(*idx, v.clone());
        }
        let mut required: Vec<i32> = Vec::new();
        if g >= 2 {
            required.push(-2);
        }
        for i in 3..=g as i32 {
            required.push(i);
            required.push(-i);
        }
        for r in &required {
            if !x.contains_key(r) {
                return Err(Error::InvalidParameter(format!("missing x value for index {r}")));
            }
        }
        let vals: Vec<&Rational> = x.values().collect();
        for i in 0..vals.len() {
            for j in (i + 1)..vals.len() {
                if vals[i] == vals[j] {
                    return Err(Error::CoincidentFixedPoints);
                }
            }
        }
        Ok(Self { g, cap, x })
    }

    pub fn rank(&self) -> usize {
        self.g
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn x_value(&self, idx: i32) -> Option<&Rational> {
        self.x.get(&idx)
    }
}

/// Polynomial-entry generator matrices, scaled so det(phi_i) = y_i exactly.
pub fn phi_generators(cfg: &ArithConfig) -> Result<Vec<SeriesMat>> {
    let g = cfg.rank();
    let cap = cfg.cap();
    let mut out = Vec::with_capacity(g);
    // phi_1 = diag(1, y_1)
    out.push(SeriesMat([
        MultiSeries::one(g, cap),
        MultiSeries::zero(g, cap),
        MultiSeries::zero(g, cap),
        MultiSeries::variable(1, g, cap),
    ]));
    for i in 2..=g {
        let xi = cfg
            .x_value(i as i32)
            .ok_or_else(|| Error::InvalidParameter(format!("missing x value for index {i}")))?
            .clone();
        let xmi = cfg
            .x_value(-(i as i32))
            .ok_or_else(|| Error::InvalidParameter(format!("missing x value for index -{i}")))?
            .clone();
        let diff = (&xi - &xmi).complete();
        if diff == 0 {
            return Err(Error::CoincidentFixedPoints);
        }
        let inv_diff = diff.recip();
        let y = MultiSeries::variable(i, g, cap);
        let c = |r: &Rational| MultiSeries::constant(r.clone(), g, cap);
        let prod = (&xi * &xmi).complete();
        // (x_i x_-i; 1 1) diag(y_i, 1) adj(x_i x_-i; 1 1), divided by x_i - x_-i
        let a = y.scale(&xi).sub(&c(&xmi));
        let b = c(&prod).sub(&y.scale(&prod));
        let cc = y.sub(&MultiSeries::one(g, cap));
        let d = c(&xi).sub(&y.scale(&xmi));
        out.push(SeriesMat([
            a.scale(&inv_diff),
            b.scale(&inv_diff),
            cc.scale(&inv_diff),
            d.scale(&inv_diff),
        ]));
    }
    Ok(out)
}

/// The word matrix over the deformation ring; inverse letters are realized
/// by adjugates, so entries stay polynomial and det(word) = prod y_{|l|}.
pub fn word_matrix(w: &Word, cfg: &ArithConfig) -> Result<SeriesMat> {
    let gens = phi_generators(cfg)?;
    if w.rank() > cfg.rank() {
        return Err(Error::RankMismatch { rank: cfg.rank(), letter: w.rank() as i32 });
    }
    let g = cfg.rank();
    let cap = cfg.cap();
    let mut m = SeriesMat([
        MultiSeries::one(g, cap),
        MultiSeries::zero(g, cap),
        MultiSeries::zero(g, cap),
        MultiSeries::one(g, cap),
    ]);
    for &l in w.letters() {
        let base = &gens[(l.unsigned_abs() - 1) as usize];
        if l > 0 {
            m = m.mul(base);
        } else {
            m = m.mul(&base.adjugate());
        }
    }
    Ok(m)
}

/// det(word) as a monomial: prod over letters of y_{|l|}.
pub fn word_det_monomial(w: &Word, cfg: &ArithConfig) -> MultiSeries {
    let g = cfg.rank();
    let mut exps = vec![0u32; g];
    for &l in w.letters() {
        exps[(l.unsigned_abs() - 1) as usize] += 1;
    }
    let mut s = MultiSeries::zero(g, cfg.cap());
    if exps.iter().sum::<u32>() <= cfg.cap() {
        s.insert(exps, Rational::from(1));
    }
    s
}

/// Universal multiplier expansion of a cyclically reduced word: the root
/// with q = 0 mod (y) of `det q^2 - (tr^2 - 2 det) q + det = 0`, truncated
/// at the configured degree cap.
pub fn word_multiplier_series(w: &Word, cfg: &ArithConfig) -> Result<MultiSeries> {
    if w.is_empty() {
        return Err(Error::EmptyWord);
    }
    if !w.is_cyclically_reduced() {
        return Err(Error::InvalidParameter(
            "multiplier series needs a cyclically reduced word".into(),
        ));
    }
    let m = word_matrix(w, cfg)?;
    let det = word_det_monomial(w, cfg);
    multiplier_from_trace(&m.trace(), &det)
}

/// The y-adically contracting iteration `q <- det (q^2 + 1) / (tr^2 - 2 det)`
/// from q = 0; each round is exact through the degree cap and gains at least
/// one y-order, so it stabilizes after at most cap + 1 rounds.
fn multiplier_from_trace(tr: &MultiSeries, det: &MultiSeries) -> Result<MultiSeries> {
    let g = tr.vars();
    let cap = tr.cap();
    let a = tr.mul(tr).sub(&det.scale(&Rational::from(2)));
    if a.constant_term() == 0 {
        return Err(Error::NonInvertibleLeadingTerm);
    }
    let one = MultiSeries::one(g, cap);
    let mut q = MultiSeries::zero(g, cap);
    for _ in 0..=cap + 1 {
        let next = det.mul(&q.mul(&q).add(&one)).div(&a)?;
        if next == q {
            return Ok(q);
        }
        q = next;
    }
    Ok(q)
}

fn product_over_shifts(q: &MultiSeries, start_exp: u32, acc: &mut MultiSeries) {
    // multiply acc by prod_{m >= 0} (1 - q^(start_exp + m)); powers above the
    // cap contribute nothing because q has positive minimal degree
    let cap = acc.cap();
    let ord = match q.min_total_degree() {
        Some(d) if d > 0 => d,
        _ => return,
    };
    let one = MultiSeries::one(q.vars(), cap);
    let mut power = one.clone();
    for _ in 0..start_exp.saturating_sub(1) {
        power = power.mul(q);
    }
    let mut e = start_exp;
    while e * ord <= cap {
        power = power.mul(q);
        *acc = acc.mul(&one.sub(&power));
        e += 1;
    }
}

/// Universal expansion of the product over primitive conjugacy classes of
/// `prod_m (1 - q_w^(1+m))`, truncated at the cap. Classes longer than the
/// cap cannot contribute because each letter adds at least one y-degree.
pub fn f1_series(cfg: &ArithConfig) -> Result<MultiSeries> {
    series_product(cfg, 1, false)
}

/// The k-shifted product with its marking prefactor
/// `(1-q_1)^2 ... (1-q_1^(k-1))^2 (1-q_2^(k-1)) prod_class prod_m (1-q^(k+m))`.
pub fn fk_series(cfg: &ArithConfig, k: u32) -> Result<MultiSeries> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    series_product(cfg, k, true)
}

fn series_product(cfg: &ArithConfig, k: u32, prefactor: bool) -> Result<MultiSeries> {
    let g = cfg.rank();
    let cap = cfg.cap();
    let one = MultiSeries::one(g, cap);
    let mut acc = one.clone();
    if prefactor {
        if g < 2 {
            return Err(Error::InvalidParameter("the k-shifted product needs rank >= 2".into()));
        }
        let q1 = MultiSeries::variable(1, g, cap);
        let q2 = word_multiplier_series(&Word::new(vec![2], g)?, cfg)?;
        let mut p1 = one.clone();
        for j in 1..k {
            let mut pw = one.clone();
            for _ in 0..j {
                pw = pw.mul(&q1);
            }
            let f = one.sub(&pw);
            p1 = p1.mul(&f).mul(&f);
        }
        let mut q2p = one.clone();
        for _ in 0..(k - 1) {
            q2p = q2p.mul(&q2);
        }
        acc = p1.mul(&one.sub(&q2p));
    }
    // depth-first enumeration of canonical primitive class representatives,
    // sharing prefix matrix products; exact arithmetic makes the
    // accumulation order immaterial
    let gens = phi_generators(cfg)?;
    let adjs: Vec<SeriesMat> = gens.iter().map(|m| m.adjugate()).collect();
    let letters: Vec<Letter> = (1..=g as i32).flat_map(|i| [i, -i]).collect();
    let mut state = DfsState {
        cfg,
        gens: &gens,
        adjs: &adjs,
        letters: &letters,
        k,
        buf: Vec::with_capacity(cap as usize),
        mats: Vec::with_capacity(cap as usize),
        acc,
    };
    for &first in &letters {
        state.push_letter(first)?;
        state.recurse()?;
        state.pop_letter();
    }
    Ok(state.acc)
}

struct DfsState<'a> {
    cfg: &'a ArithConfig,
    gens: &'a [SeriesMat],
    adjs: &'a [SeriesMat],
    letters: &'a [Letter],
    k: u32,
    buf: Vec<Letter>,
    mats: Vec<SeriesMat>,
    acc: MultiSeries,
}

impl<'a> DfsState<'a> {
    fn push_letter(&mut self, l: Letter) -> Result<()> {
        let base = if l > 0 {
            &self.gens[(l - 1) as usize]
        } else {
            &self.adjs[(-l - 1) as usize]
        };
        let m = match self.mats.last() {
            Some(prev) => prev.mul(base),
            None => base.clone(),
        };
        self.buf.push(l);
        self.mats.push(m);
        Ok(())
    }

    fn pop_letter(&mut self) {
        self.buf.pop();
        self.mats.pop();
    }

    fn recurse(&mut self) -> Result<()> {
        let cap = self.cfg.cap();
        let len = self.buf.len();
        let first = self.buf[0];
        let last = *self.buf.last().unwrap();
        if (len < 2 || first != -last) && crate::words::is_canonical_primitive(&self.buf) {
            let word = Word::new(self.buf.clone(), self.cfg.rank())?;
            let det = word_det_monomial(&word, self.cfg);
            let q = multiplier_from_trace(&self.mats.last().unwrap().trace(), &det)?;
            product_over_shifts(&q, self.k, &mut self.acc);
        }
        if len as u32 >= cap {
            return Ok(());
        }
        let first_rank = crate::words::letter_rank(first);
        let prev = last;
        for &l in self.letters {
            if crate::words::letter_rank(l) < first_rank || l == -prev {
                continue;
            }
            self.push_letter(l)?;
            self.recurse()?;
            self.pop_letter();
        }
        Ok(())
    }
}


/// Per-prime primitivity report for a series with rational coefficients.
#[derive(Debug, Clone)]
pub struct PrimeReport {
    pub prime: u64,
    /// every coefficient is p-integral
    pub p_integral: bool,
    /// some coefficient is a p-adic unit (requires p_integral)
    pub has_unit_coefficient: bool,
}

/// For each prime: is the series p-integral, and does some coefficient stay
/// nonzero mod p. A series that fails `p_integral` is reported, not rejected.
pub fn primitivity_check(s: &MultiSeries, primes: &[u64]) -> Vec<PrimeReport> {
    primes
        .iter()
        .map(|&p| {
            let pi = Integer::from(p);
            let mut integral = true;
            let mut unit = false;
            for (_, c) in s.terms() {
                if c.denom().is_divisible(&pi) {
                    integral = false;
                    break;
                }
                if !c.numer().is_divisible(&pi) {
                    unit = true;
                }
            }
            PrimeReport {
                prime: p,
                p_integral: integral,
                has_unit_coefficient: integral && unit,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::{MarkedSchottkyGroup, MoebiusMap, PointP1};
    use crate::prec::{cabs, csub, complex_from_rationals};
    use crate::words::evaluate;
    use rug::Float;

    const P: u32 = 128;

    fn cfg_g2(xm2: (i64, i64), cap: u32) -> ArithConfig {
        ArithConfig::new(2, &[(-2, Rational::from(xm2))], cap).unwrap()
    }

    fn word(ls: &[i32]) -> Word {
        Word::new(ls.to_vec(), 2).unwrap()
    }

    #[test]
    fn phi_one_is_diagonal_and_dets_are_monomials() {
        let cfg = cfg_g2((3, 1), 6);
        let gens = phi_generators(&cfg).unwrap();
        let [a, b, c, d] = &gens[0].0;
        assert_eq!(*a, MultiSeries::one(2, 6));
        assert!(b.is_zero() && c.is_zero());
        assert_eq!(*d, MultiSeries::variable(1, 2, 6));
        for (i, m) in gens.iter().enumerate() {
            let det = m.det();
            let expect = MultiSeries::variable(i + 1, 2, 6);
            assert_eq!(det, expect);
        }
    }

    #[test]
    fn coincident_x_values_rejected() {
        assert!(matches!(
            ArithConfig::new(2, &[(-2, Rational::from(1))], 5),
            Err(Error::CoincidentFixedPoints)
        ));
    }

    #[test]
    fn multiplier_of_single_letters() {
        let cfg = cfg_g2((3, 1), 8);
        let q1 = word_multiplier_series(&word(&[1]), &cfg).unwrap();
        assert_eq!(q1, MultiSeries::variable(1, 2, 8));
        let q1i = word_multiplier_series(&word(&[-1]), &cfg).unwrap();
        assert_eq!(q1i, MultiSeries::variable(1, 2, 8));
        let q2 = word_multiplier_series(&word(&[2]), &cfg).unwrap();
        // lowest term is exactly y_2
        assert_eq!(q2.coeff(&[0, 1]), Rational::from(1));
        assert_eq!(q2.min_total_degree(), Some(1));
    }

    #[test]
    fn multiplier_satisfies_its_quadratic_exactly() {
        let cfg = cfg_g2((3, 1), 7);
        for w in [word(&[1, 2]), word(&[1, -2]), word(&[1, 1, 2]), word(&[2]), word(&[1, 2, -1, 2])] {
            let q = word_multiplier_series(&w, &cfg).unwrap();
            let m = word_matrix(&w, &cfg).unwrap();
            let det = word_det_monomial(&w, &cfg);
            let tr = m.trace();
            let a = tr.mul(&tr).sub(&det.scale(&Rational::from(2)));
            let res = det.mul(&q.mul(&q)).sub(&a.mul(&q)).add(&det);
            assert!(res.is_zero(), "nonzero quadratic residual for {:?}", w.letters());
        }
    }

    #[test]
    fn divisibility_by_letter_monomial() {
        // every monomial of q_w is divisible by prod_j y_{|sigma(j)|}
        for xm2 in [(3i64, 1i64), (-2, 1), (5, 2)] {
            let cfg = cfg_g2(xm2, 8);
            for w in [
                word(&[1, 2]),
                word(&[1, -2]),
                word(&[1, 1, 2]),
                word(&[1, 2, 2]),
                word(&[1, 2, -1, 2]),
                word(&[2, 2, 1, 1]),
            ] {
                let q = word_multiplier_series(&w, &cfg).unwrap();
                let mut need = vec![0u32; 2];
                for &l in w.letters() {
                    need[(l.unsigned_abs() - 1) as usize] += 1;
                }
                assert!(!q.is_zero());
                for (e, _) in q.terms() {
                    assert!(
                        e.iter().zip(&need).all(|(have, want)| have >= want),
                        "monomial {e:?} of word {:?} misses {need:?}",
                        w.letters()
                    );
                }
            }
        }
    }

    #[test]
    fn lowest_term_of_two_letter_word() {
        let cfg = cfg_g2((3, 1), 6);
        let q = word_multiplier_series(&word(&[1, 2]), &cfg).unwrap();
        let c = q.coeff(&[1, 1]);
        assert!(c != 0, "lowest coefficient of q_(1 2) must be nonzero");
        assert_eq!(q.min_total_degree(), Some(2));
    }

    #[test]
    fn numeric_specialization_matches_matrix_multiplier() {
        // substitute small rationals for the y's and compare against the
        // floating multiplier of the specialized matrix word
        let cfg = cfg_g2((3, 1), 10);
        let y = [Rational::from((1, 10000)), Rational::from((1, 16384))];
        // specialized group: fixed points (0, inf), (1, 3), multipliers y
        let g1 = MoebiusMap::from_fixed_points(
            &PointP1::Finite(complex_from_rationals(&Rational::new(), &Rational::new(), P)),
            &PointP1::Infinity,
            &complex_from_rationals(&y[0], &Rational::new(), P),
            P,
        )
        .unwrap();
        let g2 = MoebiusMap::from_fixed_points(
            &PointP1::Finite(complex_from_rationals(&Rational::from(1), &Rational::new(), P)),
            &PointP1::Finite(complex_from_rationals(&Rational::from(3), &Rational::new(), P)),
            &complex_from_rationals(&y[1], &Rational::new(), P),
            P,
        )
        .unwrap();
        let group = MarkedSchottkyGroup::new(vec![g1, g2], None, P).unwrap();
        for w in [word(&[1]), word(&[2]), word(&[1, 2]), word(&[1, -2]), word(&[1, 1, 2])] {
            let q_series = word_multiplier_series(&w, &cfg).unwrap();
            let q_rat = q_series.eval(&y);
            let q_val = complex_from_rationals(&q_rat, &Rational::new(), P);
            let q_mat = evaluate(&w, &group).unwrap().multiplier().unwrap();
            let err = cabs(&csub(&q_val, &q_mat));
            assert!(err < Float::with_val(P, 1e-20), "error {err} for {:?}", w.letters());
        }
    }

    #[test]
    fn f1_specializes_to_the_squared_euler_product() {
        let cap = 8;
        let cfg = cfg_g2((3, 1), cap);
        let f1 = f1_series(&cfg).unwrap();
        assert_eq!(f1.constant_term(), Rational::from(1));
        let spec = f1.specialize(&[None, Some(Rational::new())]);
        // independent construction of prod (1 - y^(1+m))^2
        let mut expect = ZSeries::one(cap as usize);
        for j in 1..=cap as usize {
            let mut f = ZSeries::one(cap as usize);
            f.set_coeff(j, Integer::from(-1));
            expect = expect.mul(&f).mul(&f);
        }
        let got = spec.to_zseries_in_y1(cap as usize).unwrap();
        assert_eq!(got, expect);
        // g = 1 analogue comes out the same
        let cfg1 = ArithConfig::new(1, &[], cap).unwrap();
        let f1_rank1 = f1_series(&cfg1).unwrap();
        let z1 = f1_rank1.to_zseries_in_y1(cap as usize).unwrap();
        assert_eq!(z1, expect);
    }

    #[test]
    fn fk_specializes_to_telescoped_product() {
        let cap = 7;
        let cfg = cfg_g2((3, 1), cap);
        for k in [2u32, 3] {
            let fk = fk_series(&cfg, k).unwrap();
            let spec = fk.specialize(&[None, Some(Rational::new())]);
            let got = spec.to_zseries_in_y1(cap as usize).unwrap();
            // telescoping: the specialized product equals prod (1-y^(1+m))^2
            let mut expect = ZSeries::one(cap as usize);
            for j in 1..=cap as usize {
                let mut f = ZSeries::one(cap as usize);
                f.set_coeff(j, Integer::from(-1));
                expect = expect.mul(&f).mul(&f);
            }
            assert_eq!(got, expect, "k = {k}");
        }
    }

    #[test]
    fn specialize_then_product_equals_product_of_surviving_classes() {
        let cap = 8;
        let cfg = cfg_g2((3, 1), cap);
        let f1 = f1_series(&cfg).unwrap();
        let spec = f1.specialize(&[None, Some(Rational::new())]);
        // recompute over the classes that survive y_2 = 0: words in letters +-1
        let mut acc = MultiSeries::one(2, cap);
        for w in [word(&[1]), word(&[-1])] {
            let q = word_multiplier_series(&w, &cfg).unwrap();
            product_over_shifts(&q, 1, &mut acc);
        }
        assert_eq!(spec, acc);
    }

    #[test]
    fn series_products_match_numeric_products_on_group_a() {
        // group_a has the normalized fixed-point data (0, inf), (1, 3), so
        // evaluating the deformation-ring products at y = (1/25, 1/30) must
        // reproduce the numeric products to the series truncation error
        // the degree-8 truncation drops terms ~ (7/25)^9 on group_a
        let cap = 8;
        let cfg = cfg_g2((3, 1), cap);
        let y = [Rational::from((1, 25)), Rational::from((1, 30))];
        let group = crate::samples::group_a(P);
        let f1_num = crate::products::f1(&group, 12, 400).unwrap();
        let f1_val = f1_series(&cfg).unwrap().eval(&y);
        let diff = (Float::with_val(P, &f1_val) - f1_num.value.real().clone()).abs();
        assert!(diff.to_f64() < 1e-4, "f1 mismatch {}", diff.to_f64());
        for k in [2u32, 3] {
            let fk_num = crate::products::fk(&group, k, 12, 400).unwrap();
            let fk_val = fk_series(&cfg, k).unwrap().eval(&y);
            let diff = (Float::with_val(P, &fk_val) - fk_num.value.real().clone()).abs();
            assert!(diff.to_f64() < 1e-4, "fk mismatch at k={k}: {}", diff.to_f64());
        }
        // a small-multiplier group at the same fixed points pins the
        // cross-check far below the truncation noise
        let cap = 6;
        let cfg = cfg_g2((3, 1), cap);
        let y = [Rational::from((1, 1000)), Rational::from((1, 1024))];
        let q1 = complex_from_rationals(&y[0], &Rational::new(), P);
        let q2 = complex_from_rationals(&y[1], &Rational::new(), P);
        let zero = PointP1::Finite(complex_from_rationals(&Rational::new(), &Rational::new(), P));
        let one_pt = PointP1::Finite(complex_from_rationals(&Rational::from(1), &Rational::new(), P));
        let three = PointP1::Finite(complex_from_rationals(&Rational::from(3), &Rational::new(), P));
        let g1 = MoebiusMap::from_fixed_points(&zero, &PointP1::Infinity, &q1, P).unwrap();
        let g2 = MoebiusMap::from_fixed_points(&one_pt, &three, &q2, P).unwrap();
        let tight = MarkedSchottkyGroup::new(vec![g1, g2], None, P).unwrap();
        let f1_num = crate::products::f1(&tight, 8, 400).unwrap();
        let f1_val = f1_series(&cfg).unwrap().eval(&y);
        let diff = (Float::with_val(P, &f1_val) - f1_num.value.real().clone()).abs();
        assert!(diff.to_f64() < 1e-12, "tight f1 mismatch {}", diff.to_f64());
        for k in [2u32, 3] {
            let fk_num = crate::products::fk(&tight, k, 8, 400).unwrap();
            let fk_val = fk_series(&cfg, k).unwrap().eval(&y);
            let diff = (Float::with_val(P, &fk_val) - fk_num.value.real().clone()).abs();
            assert!(diff.to_f64() < 1e-12, "tight fk mismatch at k={k}: {}", diff.to_f64());
        }
    }

    #[test]
    fn primitivity_reports() {
        let cap = 8;
        let mut euler_sq = MultiSeries::one(1, cap);
        let y = MultiSeries::variable(1, 1, cap);
        product_over_shifts(&y, 1, &mut euler_sq);
        let euler_sq = euler_sq.mul(&euler_sq);
        for r in primitivity_check(&euler_sq, &[2, 3, 5, 7, 11]) {
            assert!(r.p_integral && r.has_unit_coefficient, "prime {}", r.prime);
        }
        let doubled = euler_sq.scale(&Rational::from(2));
        let r2 = &primitivity_check(&doubled, &[2])[0];
        assert!(r2.p_integral && !r2.has_unit_coefficient);
        let halved = euler_sq.scale(&Rational::from((1, 2)));
        let r3 = &primitivity_check(&halved, &[2])[0];
        assert!(!r3.p_integral);
    }

    #[test]
    fn inverse_round_trip() {
        let cfg = cfg_g2((3, 1), 6);
        let gens = phi_generators(&cfg).unwrap();
        let tr = gens[1].trace();
        let a = tr.mul(&tr);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), MultiSeries::one(2, 6));
    }
}
