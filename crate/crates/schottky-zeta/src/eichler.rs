//! Eichler cocycles with polynomial values of degree <= 2k-2, weight-2k
//! Poincaré series, the contour pairing between k-differentials and
//! cocycles, and the construction of the pairing-normalized basis of
//! holomorphic k-differentials.
//!
//! The group acts on polynomials by `(f . d)(z) = f(d z) d'(z)^(1-k)`, which
//! preserves degree <= 2k-2; cocycles extend from generator values through
//! `xi(g d) = xi(g) . d + xi(d)`. Only generator values enter the pairing,
//! so the choice of extension convention is immaterial there; the extension
//! is still exercised by the crossed-homomorphism tests.

use rayon::prelude::*;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::moebius::{validate_schottky, MarkedSchottkyGroup, MoebiusMap, SchottkyCertificate};
use crate::periods::oriented_contour_integral;
use crate::prec::{cabs, cadd, cdiv, cmul, cneg, complex_one, complex_zero, csub, exp2_neg, norm_sqr, CompensatedComplex};
use crate::words::{Letter, Word};

/// Dimension of the space of holomorphic k-differentials in genus g >= 2.
pub fn dimension(g: usize, k: u32) -> usize {
    (2 * k as usize - 1) * (g - 1)
}

/// Complex polynomial, dense coefficients from degree 0 upward.
#[derive(Debug, Clone)]
pub struct Poly {
    pub coeffs: Vec<Complex>,
}

impl Poly {
    pub fn zero(deg: usize, prec: u32) -> Self {
        Self { coeffs: vec![complex_zero(prec); deg + 1] }
    }

    /// z^j within degree bound `deg`.
    pub fn monomial(j: usize, deg: usize, prec: u32) -> Self {
        let mut p = Self::zero(deg, prec);
        p.coeffs[j] = complex_one(prec);
        p
    }

    /// (z - a)^j expanded within degree bound `deg`.
    pub fn shifted_power(a: &Complex, j: usize, deg: usize, prec: u32) -> Self {
        let mut p = Self::zero(deg, prec);
        p.coeffs[0] = complex_one(prec);
        for _ in 0..j {
            // multiply by (z - a)
            let mut next = vec![complex_zero(prec); deg + 1];
            for (i, c) in p.coeffs.iter().enumerate() {
                if i + 1 <= deg {
                    next[i + 1] = cadd(&next[i + 1], c);
                }
                next[i] = csub(&next[i], &cmul(a, c));
            }
            p.coeffs = next;
        }
        p
    }

    pub fn eval(&self, z: &Complex) -> Complex {
        let prec = z.prec().0;
        let mut acc = complex_zero(prec);
        for c in self.coeffs.iter().rev() {
            acc = cadd(&cmul(&acc, z), c);
        }
        acc
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let prec = self.coeffs[0].prec().0;
        let mut coeffs = vec![complex_zero(prec); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[i] = cadd(&coeffs[i], c);
        }
        for (i, c) in o.coeffs.iter().enumerate() {
            coeffs[i] = cadd(&coeffs[i], c);
        }
        Self { coeffs }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&Complex::with_val(self.coeffs[0].prec().0, (-1, 0))))
    }

    pub fn scale(&self, c: &Complex) -> Self {
        Self { coeffs: self.coeffs.iter().map(|x| cmul(x, c)).collect() }
    }

    pub fn max_coeff_abs(&self) -> Float {
        let prec = self.coeffs[0].prec().0;
        self.coeffs
            .iter()
            .map(cabs)
            .fold(Float::with_val(prec, 0), |a, b| if b > a { b } else { a })
    }
}

fn cpow(z: &Complex, n: u32) -> Complex {
    let prec = z.prec().0;
    let mut acc = complex_one(prec);
    for _ in 0..n {
        acc = cmul(&acc, z);
    }
    acc
}

/// The weight-(2-2k) right action `(f . d)(z) = f(d z) d'(z)^(1-k)`
/// on polynomials of degree <= 2k-2.
pub fn poly_action(f: &Poly, map: &MoebiusMap, k: u32) -> Poly {
    let prec = map.precision();
    let deg = (2 * k - 2) as usize;
    let [a, b, c, d] = map.entries();
    // (az + b)^j and (cz + d)^(deg - j) as coefficient arrays
    let lin = |p: &Complex, q: &Complex| -> Vec<Vec<Complex>> {
        // powers of (p z + q) from 0 to deg
        let mut pows: Vec<Vec<Complex>> = Vec::with_capacity(deg + 2);
        pows.push(vec![complex_one(prec)]);
        for j in 1..=deg {
            let prev = &pows[j - 1];
            let mut cur = vec![complex_zero(prec); j + 1];
            for (i, x) in prev.iter().enumerate() {
                cur[i + 1] = cadd(&cur[i + 1], &cmul(x, p));
                cur[i] = cadd(&cur[i], &cmul(x, q));
            }
            pows.push(cur);
        }
        pows
    };
    let num_pows = lin(a, b);
    let den_pows = lin(c, d);
    let det = map.determinant();
    let det_factor = cdiv(&complex_one(prec), &cpow(&det, k - 1));
    let mut out = Poly::zero(deg, prec);
    for (j, fj) in f.coeffs.iter().enumerate() {
        if norm_sqr(fj).is_zero() {
            continue;
        }
        let pn = &num_pows[j];
        let pd = &den_pows[deg - j];
        for (i1, x) in pn.iter().enumerate() {
            for (i2, y) in pd.iter().enumerate() {
                let add = cmul(&cmul(fj, &cmul(x, y)), &det_factor);
                out.coeffs[i1 + i2] = cadd(&out.coeffs[i1 + i2], &add);
            }
        }
    }
    out
}

/// A cocycle given by its polynomial values on the marked generators.
#[derive(Debug, Clone)]
pub struct Cocycle {
    pub k: u32,
    pub values: Vec<Poly>,
    prec: u32,
}

impl Cocycle {
    pub fn new(k: u32, values: Vec<Poly>, prec: u32) -> Self {
        Self { k, values, prec }
    }

    pub fn value_on_generator(&self, i: usize) -> &Poly {
        &self.values[i]
    }

    fn value_on_letter(&self, l: Letter, group: &MarkedSchottkyGroup) -> Poly {
        let idx = (l.unsigned_abs() - 1) as usize;
        if l > 0 {
            self.values[idx].clone()
        } else {
            // xi(g^-1) = -xi(g) . g^-1
            let inv = group.generator(idx).inverse();
            poly_action(&self.values[idx], &inv, self.k)
                .scale(&Complex::with_val(self.prec, (-1, 0)))
        }
    }

    /// Extend to an arbitrary word by `xi(g d) = xi(g) . d + xi(d)`.
    pub fn value_on_word(&self, w: &Word, group: &MarkedSchottkyGroup) -> Result<Poly> {
        if w.rank() > group.rank() {
            return Err(Error::RankMismatch { rank: group.rank(), letter: w.rank() as i32 });
        }
        let deg = (2 * self.k - 2) as usize;
        let mut acc = Poly::zero(deg, self.prec);
        for &l in w.letters() {
            let idx = (l.unsigned_abs() - 1) as usize;
            let gen = group.generator(idx);
            let step = if l > 0 { gen.clone() } else { gen.inverse() };
            acc = poly_action(&acc, &step, self.k).add(&self.value_on_letter(l, group));
        }
        Ok(acc)
    }
}

/// The coboundary of a polynomial: `(dv)(g) = v . g - v`.
pub fn coboundary(v: &Poly, group: &MarkedSchottkyGroup, k: u32) -> Cocycle {
    let values = group
        .generators()
        .iter()
        .map(|g| poly_action(v, g, k).sub(v))
        .collect();
    Cocycle::new(k, values, group.precision())
}

/// Verify that the group is in normalized marking position.
fn assert_normalized(group: &MarkedSchottkyGroup) -> Result<()> {
    if group.rank() < 2 {
        return Err(Error::NotNormalized("rank must be at least 2".into()));
    }
    let prec = group.precision();
    let tol = exp2_neg(prec / 2, prec);
    let fp1 = group.generator(0).fixed_points()?;
    let fp2 = group.generator(1).fixed_points()?;
    let ok1 = match (&fp1.attractive, &fp1.repulsive) {
        (crate::moebius::PointP1::Finite(z), crate::moebius::PointP1::Infinity) => cabs(z) < tol,
        _ => false,
    };
    let ok2 = match &fp2.attractive {
        crate::moebius::PointP1::Finite(z) => {
            cabs(&csub(z, &complex_one(prec))) < tol
        }
        _ => false,
    };
    if !(ok1 && ok2) {
        return Err(Error::NotNormalized(
            "generator 1 must fix (0, infinity) and generator 2 must attract to 1".into(),
        ));
    }
    Ok(())
}

/// The (2k-1)(g-1) standard cocycles of a normalized marked group, in the
/// order: index (1, k-1); (2, 1)..(2, 2k-2); then (i, 0)..(i, 2k-2) for
/// 3 <= i <= g. The (2, j) values are powers of (z - 1), all others powers
/// of z, supported on the matching generator.
pub fn standard_cocycles(group: &MarkedSchottkyGroup, k: u32) -> Result<Vec<Cocycle>> {
    assert_normalized(group)?;
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    let prec = group.precision();
    let g = group.rank();
    let deg = (2 * k - 2) as usize;
    let zero_values = |_: usize| -> Vec<Poly> { vec![Poly::zero(deg, prec); g] };
    let mut out = Vec::with_capacity(dimension(g, k));
    let mut vals = zero_values(0);
    vals[0] = Poly::monomial((k - 1) as usize, deg, prec);
    out.push(Cocycle::new(k, vals, prec));
    let one = complex_one(prec);
    for j in 1..=(2 * k - 2) as usize {
        let mut vals = zero_values(0);
        vals[1] = Poly::shifted_power(&one, j, deg, prec);
        out.push(Cocycle::new(k, vals, prec));
    }
    for i in 3..=g {
        for j in 0..=(2 * k - 2) as usize {
            let mut vals = zero_values(0);
            vals[i - 1] = Poly::monomial(j, deg, prec);
            out.push(Cocycle::new(k, vals, prec));
        }
    }
    debug_assert_eq!(out.len(), dimension(g, k));
    Ok(out)
}

/// Seed of a Poincaré series: a rational function `prod (z - p)^(-j)` given
/// by its poles with orders.
#[derive(Debug, Clone)]
pub struct SeedSpec {
    pub poles: Vec<(Complex, u32)>,
}

impl SeedSpec {
    pub fn single(p: Complex, order: u32) -> Self {
        Self { poles: vec![(p, order)] }
    }

    pub fn total_order(&self) -> u32 {
        self.poles.iter().map(|(_, j)| j).sum()
    }
}

/// Evaluator for the weight-2k Poincaré series of a rational seed, truncated
/// at word length max_len (including the identity word).
#[derive(Debug, Clone)]
pub struct KDifferential {
    pub k: u32,
    pub seed: SeedSpec,
    pub max_len: usize,
    prec: u32,
    /// (matrix entries, det^k) per group word
    terms: Vec<([Complex; 4], Complex)>,
}

impl KDifferential {
    pub fn eval(&self, z: &Complex) -> Complex {
        let prec = self.prec;
        let two_k = 2 * self.k;
        let total: u32 = self.seed.total_order();
        let mut acc = CompensatedComplex::new(prec);
        for (m, det_k) in &self.terms {
            let u = cadd(&cmul(&m[0], z), &m[1]);
            let v = cadd(&cmul(&m[2], z), &m[3]);
            // f(u/v) (det / v^2)^k  =  det^k / ( prod (u - p v)^j * v^(2k - total) )
            let mut den = if two_k >= total {
                cpow(&v, two_k - total)
            } else {
                cdiv(&complex_one(prec), &cpow(&v, total - two_k))
            };
            for (p, j) in &self.seed.poles {
                den = cmul(&den, &cpow(&csub(&u, &cmul(p, &v)), *j));
            }
            acc.add(&cdiv(det_k, &den));
        }
        acc.value()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Largest automorphy defect `|psi(g z) g'(z)^k - psi(z)|` over the given
    /// sample points and all marked generators.
    pub fn automorphy_residual(
        &self,
        group: &MarkedSchottkyGroup,
        samples: &[Complex],
    ) -> Result<Float> {
        let prec = self.prec;
        let mut worst = Float::with_val(prec, 0);
        for gen in group.generators() {
            for z in samples {
                let gz = match gen.apply(z) {
                    crate::moebius::PointP1::Finite(w) => w,
                    crate::moebius::PointP1::Infinity => continue,
                };
                let dpow = cpow(&gen.derivative_at(z), self.k);
                let lhs = cmul(&self.eval(&gz), &dpow);
                let res = cabs(&csub(&lhs, &self.eval(z)));
                if res > worst {
                    worst = res;
                }
            }
        }
        Ok(worst)
    }
}

/// Build the Poincaré-series evaluator. Every pole must lie strictly inside
/// one of the certificate circles; the rank must be at least 2.
pub fn poincare_kdiff(
    group: &MarkedSchottkyGroup,
    k: u32,
    seed: SeedSpec,
    max_len: usize,
) -> Result<KDifferential> {
    if group.rank() < 2 {
        return Err(Error::InvalidParameter(
            "the space of holomorphic k-differentials is trivial in rank 1".into(),
        ));
    }
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    let total = seed.total_order();
    if total < 2 || total > 2 * k {
        return Err(Error::InvalidParameter(format!(
            "total pole order {total} outside 2..=2k"
        )));
    }
    // when a generator fixes infinity, infinity is a limit point and the
    // series over its powers decays like |q|^(n (total - k)); reject seeds
    // that would make that subfamily diverge
    let infinity_is_limit = group.generators().iter().any(|g| {
        matches!(g.apply_point(&crate::moebius::PointP1::Infinity), crate::moebius::PointP1::Infinity)
    });
    if infinity_is_limit && total < k + 1 {
        return Err(Error::InvalidParameter(format!(
            "seed decays like 1/z^{total} at infinity, but infinity is a limit point; \
             a total pole order of at least k+1 = {} is needed for convergence",
            k + 1
        )));
    }
    let cert = certificate(group)?;
    for (p, _) in &seed.poles {
        let inside = cert
            .pairs
            .iter()
            .flat_map(|pair| [&pair.plus, &pair.minus])
            .any(|c| c.disk_depth(p) > 0);
        if !inside {
            return Err(Error::PoleInDomain);
        }
    }
    let prec = group.precision();
    let rank = group.rank();
    let mut mats: Vec<([Complex; 4], Complex)> = Vec::new();
    for g in group.generators() {
        let [a, b, c, d] = g.entries();
        mats.push(([a.clone(), b.clone(), c.clone(), d.clone()], g.determinant()));
    }
    for g in group.generators() {
        let [a, b, c, d] = g.entries();
        mats.push(([d.clone(), -b.clone(), -c.clone(), a.clone()], g.determinant()));
    }
    let mat_index = |l: Letter| -> usize {
        if l > 0 {
            (l - 1) as usize
        } else {
            rank + (-l - 1) as usize
        }
    };
    let letters: Vec<Letter> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
    let mut terms: Vec<([Complex; 4], Complex)> = Vec::new();
    let ident = [
        complex_one(prec),
        complex_zero(prec),
        complex_zero(prec),
        complex_one(prec),
    ];
    terms.push((ident.clone(), complex_one(prec)));
    // all reduced words of length 1..=max_len, depth first
    fn walk(
        depth: usize,
        prev: Letter,
        m: &[Complex; 4],
        det: &Complex,
        k: u32,
        max_len: usize,
        letters: &[Letter],
        mats: &[([Complex; 4], Complex)],
        mat_index: &dyn Fn(Letter) -> usize,
        out: &mut Vec<([Complex; 4], Complex)>,
    ) {
        for &l in letters {
            if depth > 0 && l == -prev {
                continue;
            }
            let (gm, gd) = &mats[mat_index(l)];
            let prod = [
                cadd(&cmul(&m[0], &gm[0]), &cmul(&m[1], &gm[2])),
                cadd(&cmul(&m[0], &gm[1]), &cmul(&m[1], &gm[3])),
                cadd(&cmul(&m[2], &gm[0]), &cmul(&m[3], &gm[2])),
                cadd(&cmul(&m[2], &gm[1]), &cmul(&m[3], &gm[3])),
            ];
            let pd = cmul(det, gd);
            out.push((prod.clone(), cpow(&pd, k)));
            if depth + 1 < max_len {
                walk(depth + 1, l, &prod, &pd, k, max_len, letters, mats, mat_index, out);
            }
        }
    }
    if max_len >= 1 {
        walk(
            0,
            0,
            &ident,
            &complex_one(prec),
            k,
            max_len,
            &letters,
            &mats,
            &mat_index,
            &mut terms,
        );
    }
    // stored det^k for the identity as well
    terms[0].1 = complex_one(prec);
    Ok(KDifferential { k, seed, max_len, prec, terms })
}

fn certificate(group: &MarkedSchottkyGroup) -> Result<SchottkyCertificate> {
    validate_schottky(group).map_err(|_| Error::CertificateRequired)
}

/// The pairing `(1/2 pi i) sum_i contour_(C_i) psi . xi(gen_i) dz` over the
/// plus circles, positively oriented as the boundary of the common exterior.
pub fn pairing(
    group: &MarkedSchottkyGroup,
    psi: &KDifferential,
    xi: &Cocycle,
    nodes: usize,
) -> Result<Complex> {
    pairing_fn(group, &|z: &Complex| psi.eval(z), xi, nodes)
}

pub fn pairing_fn<F>(
    group: &MarkedSchottkyGroup,
    psi: &F,
    xi: &Cocycle,
    nodes: usize,
) -> Result<Complex>
where
    F: Fn(&Complex) -> Complex + Sync,
{
    let cert = certificate(group)?;
    let prec = group.precision();
    let two_pi_i =
        Complex::with_val(prec, (0, Float::with_val(prec, rug::float::Constant::Pi) * 2u32));
    let mut acc = CompensatedComplex::new(prec);
    for (i, pair) in cert.pairs.iter().enumerate() {
        let poly = xi.value_on_generator(i);
        if poly.max_coeff_abs().is_zero() {
            continue;
        }
        let v = oriented_contour_integral(
            |z| cmul(&psi(z), &poly.eval(z)),
            &pair.plus,
            nodes,
        );
        acc.add(&v);
    }
    Ok(cdiv(&acc.value(), &two_pi_i))
}

/// All pairings `P[s][t] = pairing(psi_s, xi_t)` in one pass: per circle and
/// node, every differential is evaluated once and every cocycle polynomial
/// once, then all products are accumulated in index order.
pub fn pairing_matrix(
    group: &MarkedSchottkyGroup,
    psis: &[KDifferential],
    cocycles: &[Cocycle],
    nodes: usize,
) -> Result<Vec<Vec<Complex>>> {
    let cert = certificate(group)?;
    let prec = group.precision();
    let s = psis.len();
    let n = cocycles.len();
    // differentials built over the same group, weight and cutoff share their
    // word table; evaluate u, v once per word and node for all of them
    let shared = !psis.is_empty()
        && psis
            .iter()
            .all(|p| p.k == psis[0].k && p.max_len == psis[0].max_len);
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let mut acc: Vec<Vec<CompensatedComplex>> =
        (0..s).map(|_| (0..n).map(|_| CompensatedComplex::new(prec)).collect()).collect();
    for (i, pair) in cert.pairs.iter().enumerate() {
        let polys: Vec<Option<&Poly>> = cocycles
            .iter()
            .map(|xi| {
                let p = xi.value_on_generator(i);
                if p.max_coeff_abs().is_zero() {
                    None
                } else {
                    Some(p)
                }
            })
            .collect();
        if polys.iter().all(Option::is_none) {
            continue;
        }
        let circle = &pair.plus;
        let orient = circle.orientation_sign();
        // per node: all seed evaluations and all polynomial values
        let node_vals: Vec<(Vec<Complex>, Vec<Option<Complex>>)> = (0..nodes)
            .into_par_iter()
            .map(|kn| {
                let theta = two_pi.clone() * Float::with_val(prec, kn as u32)
                    / Float::with_val(prec, nodes as u32);
                let (sn, cs) = theta.sin_cos(Float::new(prec));
                let dir = Complex::with_val(prec, (cs, sn));
                let z = cadd(
                    &circle.center,
                    &cmul(&dir, &Complex::with_val(prec, (circle.radius.clone(), 0))),
                );
                let tangent =
                    cmul(&Complex::with_val(prec, (0, circle.radius.clone())), &dir);
                let raw = if shared {
                    eval_shared(psis, &z, prec)
                } else {
                    psis.iter().map(|psi| psi.eval(&z)).collect()
                };
                let seed_vals: Vec<Complex> =
                    raw.into_iter().map(|v| cmul(&v, &tangent)).collect();
                let poly_vals: Vec<Option<Complex>> =
                    polys.iter().map(|p| p.map(|poly| poly.eval(&z))).collect();
                (seed_vals, poly_vals)
            })
            .collect();
        let h = two_pi.clone() / Float::with_val(prec, nodes as u32);
        let step = Complex::with_val(prec, (if orient >= 0 { h.clone() } else { -h }, 0));
        for (seed_vals, poly_vals) in &node_vals {
            for (si, sv) in seed_vals.iter().enumerate() {
                for (ti, pv) in poly_vals.iter().enumerate() {
                    if let Some(pv) = pv {
                        acc[si][ti].add(&cmul(&cmul(sv, pv), &step));
                    }
                }
            }
        }
    }
    let two_pi_i = Complex::with_val(prec, (0, two_pi));
    Ok(acc
        .into_iter()
        .map(|row| row.into_iter().map(|a| cdiv(&a.value(), &two_pi_i)).collect())
        .collect())
}

/// Evaluate several same-shape differentials at once, computing the word
/// data u = az+b, v = cz+d and the powers of v only once per word.
fn eval_shared(psis: &[KDifferential], z: &Complex, prec: u32) -> Vec<Complex> {
    let k = psis[0].k;
    let two_k = (2 * k) as usize;
    let mut accs: Vec<CompensatedComplex> =
        (0..psis.len()).map(|_| CompensatedComplex::new(prec)).collect();
    for (ti, (m, det_k)) in psis[0].terms.iter().enumerate() {
        let u = cadd(&cmul(&m[0], z), &m[1]);
        let v = cadd(&cmul(&m[2], z), &m[3]);
        let mut v_pows: Vec<Complex> = Vec::with_capacity(two_k + 1);
        v_pows.push(complex_one(prec));
        for j in 1..=two_k {
            let next = cmul(&v_pows[j - 1], &v);
            v_pows.push(next);
        }
        for (si, psi) in psis.iter().enumerate() {
            let det_k_s = &psi.terms[ti].1;
            let total = psi.seed.total_order() as usize;
            let mut den = v_pows[two_k - total].clone();
            for (p, j) in &psi.seed.poles {
                let lin = csub(&u, &cmul(p, &v));
                for _ in 0..*j {
                    den = cmul(&den, &lin);
                }
            }
            let _ = det_k;
            accs[si].add(&cdiv(det_k_s, &den));
        }
    }
    accs.into_iter().map(|a| a.value()).collect()
}

/// Seed pole pool: finite fixed points of the generators and of short words,
/// deterministic order.
fn limit_point_pool(group: &MarkedSchottkyGroup, want: usize) -> Result<Vec<Complex>> {
    let prec = group.precision();
    let mut pool: Vec<Complex> = Vec::new();
    let push = |p: &crate::moebius::PointP1, pool: &mut Vec<Complex>| {
        if let crate::moebius::PointP1::Finite(z) = p {
            let dup = pool
                .iter()
                .any(|q| cabs(&csub(q, z)) < exp2_neg(prec / 3, prec));
            if !dup {
                pool.push(z.clone());
            }
        }
    };
    for len in 1..=3usize {
        for class in crate::words::enumerate_classes(group.rank(), len) {
            if class.word.len() != len {
                continue;
            }
            let m = crate::words::evaluate(&class.word, group)?;
            if let Ok(fp) = m.fixed_points() {
                push(&fp.attractive, &mut pool);
                push(&fp.repulsive, &mut pool);
            }
            if pool.len() >= want {
                return Ok(pool);
            }
        }
    }
    Ok(pool)
}

/// Default seeds: products of k+1 simple poles at distinct fixed points of
/// short words. Poles of order <= k-1 keep the series absolutely
/// convergent; total order k+1 gives decay 1/z^(k+1) toward the repulsive
/// fixed point of generator 1 at infinity.
pub fn default_seeds(group: &MarkedSchottkyGroup, k: u32) -> Result<Vec<SeedSpec>> {
    let n = dimension(group.rank(), k);
    let per = (k + 1) as usize;
    let pool = limit_point_pool(group, per + 5)?;
    if pool.len() < per {
        return Err(Error::RankDeficientSeeds { rank: pool.len(), needed: per });
    }
    let mut seeds = Vec::new();
    // lexicographic (k+1)-subsets of the pool
    let mut idx: Vec<usize> = (0..per).collect();
    loop {
        seeds.push(SeedSpec {
            poles: idx.iter().map(|&i| (pool[i].clone(), 1u32)).collect(),
        });
        if seeds.len() >= 2 * n {
            break;
        }
        // advance the combination
        let mut pos = per;
        loop {
            if pos == 0 {
                return Ok(seeds);
            }
            pos -= 1;
            if idx[pos] + 1 <= pool.len() - (per - pos) {
                idx[pos] += 1;
                for t in (pos + 1)..per {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
    Ok(seeds)
}

/// Pairing-normalized basis: coefficient rows over the seed differentials,
/// the freshly recomputed Gram matrix against the standard cocycles, its
/// deviation from the identity, and the condition number of the seed system.
#[derive(Debug)]
pub struct NormalizedBasis {
    pub k: u32,
    pub seeds: Vec<KDifferential>,
    pub coefficients: Vec<Vec<Complex>>,
    pub gram: Vec<Vec<Complex>>,
    pub gram_residual: Float,
    pub condition: Float,
}

impl NormalizedBasis {
    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }

    /// Evaluate basis element t at a point.
    pub fn eval(&self, t: usize, z: &Complex) -> Complex {
        let prec = z.prec().0;
        let mut acc = complex_zero(prec);
        for (c, seed) in self.coefficients[t].iter().zip(&self.seeds) {
            if norm_sqr(c).is_zero() {
                continue;
            }
            acc = cadd(&acc, &cmul(c, &seed.eval(z)));
        }
        acc
    }
}

/// Solve for combinations of the seed differentials dual to the standard
/// cocycles, so the Gram matrix is the identity. Least-squares via
/// Householder QR of the seed-vs-cocycle pairing matrix; the Gram matrix is
/// then recomputed by fresh contour integration of the combined evaluators.
pub fn normalized_basis(
    group: &MarkedSchottkyGroup,
    k: u32,
    seeds: Vec<SeedSpec>,
    max_len: usize,
    nodes: usize,
) -> Result<NormalizedBasis> {
    let cocycles = standard_cocycles(group, k)?;
    let n = cocycles.len();
    if seeds.len() < n {
        return Err(Error::RankDeficientSeeds { rank: seeds.len(), needed: n });
    }
    let prec = group.precision();
    let kdiffs: Vec<KDifferential> = seeds
        .into_iter()
        .map(|s| poincare_kdiff(group, k, s, max_len))
        .collect::<Result<_>>()?;
    let p = pairing_matrix(group, &kdiffs, &cocycles, nodes)?;
    let (coeffs, condition) = left_inverse_qr(&p, prec)?;
    // fresh Gram: re-pair the seeds at a different node count, so the check
    // sees the quadrature and not just the algebra of the solve
    let check_nodes = nodes + nodes / 2 + 1;
    let p_check = pairing_matrix(group, &kdiffs, &cocycles, check_nodes)?;
    let mut gram = vec![vec![complex_zero(prec); n]; n];
    let mut residual = Float::with_val(prec, 0);
    for t in 0..n {
        for m in 0..n {
            let mut acc = CompensatedComplex::new(prec);
            for (s_idx, c) in coeffs[t].iter().enumerate() {
                if norm_sqr(c).is_zero() {
                    continue;
                }
                acc.add(&cmul(c, &p_check[s_idx][m]));
            }
            let v = acc.value();
            let target = Complex::with_val(prec, (if t == m { 1 } else { 0 }, 0));
            let dev = cabs(&csub(&v, &target));
            if dev > residual {
                residual = dev;
            }
            gram[t][m] = v;
        }
    }
    Ok(NormalizedBasis {
        k,
        seeds: kdiffs,
        coefficients: coeffs,
        gram,
        gram_residual: residual,
        condition,
    })
}

/// X with X P = I_n for a full-column-rank S x n matrix P, via Householder
/// QR; returns (X as n rows of length S, condition estimate from the R
/// diagonal).
fn left_inverse_qr(p: &[Vec<Complex>], prec: u32) -> Result<(Vec<Vec<Complex>>, Float)> {
    let s = p.len();
    let n = p[0].len();
    // working copy of P (S x n) and accumulated Q^H applied to the identity
    let mut r: Vec<Vec<Complex>> = p.to_vec();
    // qh: S x S, starts as identity; we apply reflectors to it on the left
    let mut qh: Vec<Vec<Complex>> = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| Complex::with_val(prec, (i32::from(i == j), 0)))
                .collect()
        })
        .collect();
    for col in 0..n {
        // build the Householder vector for column col below row col
        let mut norm2 = Float::with_val(prec, 0);
        for row in col..s {
            norm2 += norm_sqr(&r[row][col]);
        }
        let norm = norm2.sqrt();
        if norm.is_zero() {
            return Err(Error::RankDeficientSeeds { rank: col, needed: n });
        }
        let alpha = {
            // alpha = -sign(r[col][col]) * norm, with complex phase
            let x = &r[col][col];
            let xa = cabs(x);
            if xa.is_zero() {
                Complex::with_val(prec, (-norm.clone(), 0))
            } else {
                cneg(&cmul(
                    &cdiv(x, &Complex::with_val(prec, (xa, 0))),
                    &Complex::with_val(prec, (norm.clone(), 0)),
                ))
            }
        };
        let mut v: Vec<Complex> = (col..s).map(|row| r[row][col].clone()).collect();
        v[0] = csub(&v[0], &alpha);
        let mut vn2 = Float::with_val(prec, 0);
        for x in &v {
            vn2 += norm_sqr(x);
        }
        if vn2.is_zero() {
            continue;
        }
        let vn2c = Complex::with_val(prec, (vn2, 0));
        // apply H = I - 2 v v^H / |v|^2 to R and to qh
        for target_col in col..n {
            let mut dot = complex_zero(prec);
            for (off, vv) in v.iter().enumerate() {
                dot = cadd(&dot, &cmul(&vv.clone().conj(), &r[col + off][target_col]));
            }
            let f = cdiv(&cmul(&Complex::with_val(prec, (2, 0)), &dot), &vn2c);
            for (off, vv) in v.iter().enumerate() {
                r[col + off][target_col] =
                    csub(&r[col + off][target_col], &cmul(&f, vv));
            }
        }
        for target_col in 0..s {
            let mut dot = complex_zero(prec);
            for (off, vv) in v.iter().enumerate() {
                dot = cadd(&dot, &cmul(&vv.clone().conj(), &qh[col + off][target_col]));
            }
            let f = cdiv(&cmul(&Complex::with_val(prec, (2, 0)), &dot), &vn2c);
            for (off, vv) in v.iter().enumerate() {
                qh[col + off][target_col] =
                    csub(&qh[col + off][target_col], &cmul(&f, vv));
            }
        }
    }
    let mut rmax = Float::with_val(prec, 0);
    let mut rmin: Option<Float> = None;
    for i in 0..n {
        let d = cabs(&r[i][i]);
        if d > rmax {
            rmax = d.clone();
        }
        rmin = Some(match rmin {
            None => d,
            Some(m) => {
                if d < m {
                    d
                } else {
                    m
                }
            }
        });
    }
    let rmin = rmin.unwrap();
    if rmin.is_zero() || rmin.clone() / rmax.clone() < exp2_neg(prec / 2, prec) {
        return Err(Error::RankDeficientSeeds { rank: n - 1, needed: n });
    }
    let condition = rmax / rmin;
    // back substitution: X = R^-1 Q^H restricted to the top n rows
    let mut x = vec![vec![complex_zero(prec); s]; n];
    for rhs in 0..s {
        for i in (0..n).rev() {
            let mut acc = qh[i][rhs].clone();
            for j in (i + 1)..n {
                acc = csub(&acc, &cmul(&r[i][j], &x[j][rhs]));
            }
            x[i][rhs] = cdiv(&acc, &r[i][i]);
        }
    }
    Ok((x, condition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prec::complex_from_f64;
    use crate::samples;

    const P: u32 = 128;

    #[test]
    fn standard_cocycle_shape() {
        let group = samples::group_a(P);
        let cs = standard_cocycles(&group, 2).unwrap();
        assert_eq!(cs.len(), 3);
        // xi_{1,1}(gen_2) = 0, xi_{1,1}(gen_1) = z
        assert!(cs[0].value_on_generator(1).max_coeff_abs().is_zero());
        let z = complex_from_f64(0.7, 0.2, P);
        let val = cs[0].value_on_generator(0).eval(&z);
        assert!(cabs(&csub(&val, &z)) < Float::with_val(P, 1e-30));
        // xi_{2,2}(gen_2) = (z-1)^2
        let v22 = cs[2].value_on_generator(1).eval(&z);
        let zm1 = csub(&z, &complex_one(P));
        assert!(cabs(&csub(&v22, &cmul(&zm1, &zm1))) < Float::with_val(P, 1e-30));
        // non-normalized groups are rejected
        assert!(matches!(
            standard_cocycles(&samples::group_b(P), 2),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn cocycle_word_extension_is_consistent() {
        let group = samples::group_a(P);
        let cs = standard_cocycles(&group, 2).unwrap();
        let xi = &cs[1];
        // xi(uv) = xi(u) . v + xi(v) with u = (1, 2), v = (2, 1)
        let u = Word::new(vec![1, 2], 2).unwrap();
        let v = Word::new(vec![2, 1], 2).unwrap();
        let uv = Word::new(vec![1, 2, 2, 1], 2).unwrap();
        let whole = xi.value_on_word(&uv, &group).unwrap();
        let mv = crate::words::evaluate(&v, &group).unwrap();
        let split = poly_action(&xi.value_on_word(&u, &group).unwrap(), &mv, 2)
            .add(&xi.value_on_word(&v, &group).unwrap());
        let z = complex_from_f64(0.4, -0.3, P);
        assert!(cabs(&csub(&whole.eval(&z), &split.eval(&z))) < Float::with_val(P, 1e-25));
        // xi(g g^-1) = 0
        let trivial = xi
            .value_on_word(&Word::new(vec![2, -2], 2).unwrap(), &group)
            .unwrap();
        assert!(trivial.max_coeff_abs() < Float::with_val(P, 1e-28));
    }

    #[test]
    fn poincare_rejects_rank_one_and_domain_poles() {
        let r1 = samples::rank1_group(P);
        let seed = SeedSpec::single(complex_from_f64(1.0, 0.0, P), 2);
        assert!(matches!(
            poincare_kdiff(&r1, 2, seed, 3),
            Err(Error::InvalidParameter(_))
        ));
        let group = samples::group_a(P);
        // a point of the common exterior is rejected
        let outside = SeedSpec::single(complex_from_f64(-2.0, 2.0, P), 3);
        assert!(matches!(
            poincare_kdiff(&group, 2, outside, 3),
            Err(Error::PoleInDomain)
        ));
    }

    #[test]
    fn automorphy_residual_shrinks() {
        // infinity is an ordinary point of group_b, so a single low-order
        // ordinary pole inside an isometric circle converges
        let group = samples::group_b(P);
        let seed = SeedSpec::single(complex_from_f64(-4.2, 0.1, P), 2);
        let samples_z: Vec<Complex> = vec![
            complex_from_f64(0.0, 1.5, P),
            complex_from_f64(-0.5, -1.0, P),
            complex_from_f64(5.5, 0.5, P),
        ];
        let mut prev: Option<Float> = None;
        for len in [2usize, 4, 6] {
            let psi = poincare_kdiff(&group, 2, seed.clone(), len).unwrap();
            let res = psi.automorphy_residual(&group, &samples_z).unwrap();
            if let Some(p) = prev {
                assert!(res < p, "residual must shrink with the cutoff");
            }
            prev = Some(res);
        }
        assert!(prev.unwrap().to_f64() < 1e-6);
    }

    #[test]
    fn slow_seeds_rejected_when_infinity_is_a_limit_point() {
        let group = samples::group_a(P);
        let seed = SeedSpec::single(complex_from_f64(0.87, 0.0, P), 2);
        assert!(matches!(
            poincare_kdiff(&group, 2, seed, 3),
            Err(Error::InvalidParameter(_))
        ));
        // order k+1 at the same ordinary pole converges and is accepted
        let ok = SeedSpec::single(complex_from_f64(0.87, 0.0, P), 3);
        assert!(poincare_kdiff(&group, 2, ok, 3).is_ok());
    }

    #[test]
    fn kdiff_shell_convergence_at_sample_points() {
        let group = samples::group_a(P);
        let seed = SeedSpec {
            poles: vec![
                (complex_from_f64(0.0, 0.0, P), 1),
                (complex_from_f64(1.0, 0.0, P), 1),
                (complex_from_f64(3.0, 0.0, P), 1),
            ],
        };
        let z = complex_from_f64(-1.5, 0.8, P);
        let mut prev: Option<Complex> = None;
        let mut deltas = Vec::new();
        for len in [2usize, 3, 4, 5] {
            let psi = poincare_kdiff(&group, 2, seed.clone(), len).unwrap();
            let v = psi.eval(&z);
            if let Some(p) = prev {
                deltas.push(cabs(&csub(&v, &p)));
            }
            prev = Some(v);
        }
        for w in deltas.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn pairing_bilinearity_and_node_stability() {
        let group = samples::group_a(P);
        let cs = standard_cocycles(&group, 2).unwrap();
        let seed = SeedSpec {
            poles: vec![
                (complex_from_f64(0.0, 0.0, P), 1),
                (complex_from_f64(1.0, 0.0, P), 1),
                (complex_from_f64(3.0, 0.0, P), 1),
            ],
        };
        let psi = poincare_kdiff(&group, 2, seed, 5).unwrap();
        let v1 = pairing(&group, &psi, &cs[0], 256).unwrap();
        // scaling the differential scales the pairing
        let alpha = complex_from_f64(2.5, -1.0, P);
        let scaled = pairing_fn(&group, &|z: &Complex| cmul(&alpha, &psi.eval(z)), &cs[0], 256)
            .unwrap();
        assert!(cabs(&csub(&scaled, &cmul(&alpha, &v1))) < Float::with_val(P, 1e-25));
        // node doubling stability
        let v2 = pairing(&group, &psi, &cs[0], 512).unwrap();
        assert!(cabs(&csub(&v1, &v2)) < Float::with_val(P, 1e-8));
        // the rescaling used for natural bases is pure linearity
        let pi = Float::with_val(P, rug::float::Constant::Pi);
        let minus_inv_pi = Complex::with_val(P, (-(Float::with_val(P, 1) / pi), 0));
        let r = pairing_fn(
            &group,
            &|z: &Complex| cmul(&minus_inv_pi, &psi.eval(z)),
            &cs[0],
            256,
        )
        .unwrap();
        assert!(cabs(&csub(&r, &cmul(&minus_inv_pi, &v1))) < Float::with_val(P, 1e-25));
    }

    #[test]
    fn coboundaries_pair_to_zero() {
        let group = samples::group_a(P);
        let k = 2;
        // a holomorphic differential from fixed-point poles
        let seed = SeedSpec {
            poles: vec![
                (complex_from_f64(0.0, 0.0, P), 1),
                (complex_from_f64(1.0, 0.0, P), 1),
                (complex_from_f64(3.0, 0.0, P), 1),
            ],
        };
        let psi = poincare_kdiff(&group, k, seed, 6).unwrap();
        let v = Poly {
            coeffs: vec![
                complex_from_f64(0.3, 0.1, P),
                complex_from_f64(-1.2, 0.4, P),
                complex_from_f64(0.0, 0.9, P),
            ],
        };
        let db = coboundary(&v, &group, k);
        let paired = pairing(&group, &psi, &db, 384).unwrap();
        assert!(cabs(&paired).to_f64() < 1e-6, "coboundary pairing {}", cabs(&paired).to_f64());
    }

    #[test]
    fn normalized_basis_gram_is_identity() {
        let group = samples::group_a(P);
        let seeds = default_seeds(&group, 2).unwrap();
        assert!(seeds.len() >= 3);
        let basis = normalized_basis(&group, 2, seeds, 5, 256).unwrap();
        assert_eq!(basis.dimension(), 3);
        assert!(
            basis.gram_residual.to_f64() < 1e-5,
            "gram residual {}",
            basis.gram_residual.to_f64()
        );
        assert!(basis.condition.to_f64() < 1e8);
    }

    #[test]
    fn seed_rescaling_leaves_basis_unchanged() {
        // relabeling/permuting the seed set changes the least-squares system
        // but not the basis functions it produces
        let group = samples::group_a(P);
        let seeds = default_seeds(&group, 2).unwrap();
        let n = 3;
        let basis_a = normalized_basis(&group, 2, seeds.clone(), 4, 192).unwrap();
        let mut permuted = seeds;
        permuted.rotate_left(2);
        let basis_b = normalized_basis(&group, 2, permuted, 4, 192).unwrap();
        let z = complex_from_f64(-1.1, 0.9, P);
        for t in 0..n {
            let a = basis_a.eval(t, &z);
            let b = basis_b.eval(t, &z);
            assert!(cabs(&csub(&a, &b)) < Float::with_val(P, 1e-20));
        }
    }

    #[test]
    fn rank_deficient_seeds_detected() {
        let group = samples::group_a(P);
        let p = complex_from_f64(0.87, 0.0, P);
        // three identical seeds cannot span a 3-dimensional space
        let seeds = vec![
            SeedSpec::single(p.clone(), 3),
            SeedSpec::single(p.clone(), 3),
            SeedSpec::single(p, 3),
        ];
        assert!(matches!(
            normalized_basis(&group, 2, seeds, 4, 128),
            Err(Error::RankDeficientSeeds { .. })
        ));
    }
}
