//! Möbius-transformation arithmetic at arbitrary precision: composition,
//! fixed points, multipliers, marking normalization and Schottky-circle
//! validation.
//!
//! A map is stored as a projective 2x2 complex matrix. When a map is built
//! from rational data it also carries the exact Gaussian-rational quadruple,
//! which survives composition and inversion, so word evaluation over rational
//! groups is exact; numeric quantities (fixed points, multipliers) are then
//! extracted at the working precision in one rounding step.
//!
//! The multiplier is computed from the trace relation
//! `q + 1/q + 2 = tr^2 / det` rather than from eigenvectors; this stays
//! accurate for multipliers many orders of magnitude below 1.

use rug::{Complete, Complex, Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::prec::{
    cabs, cadd, cdiv, cmul, cneg, complex_from_rationals, complex_one, complex_zero, csub,
    exp2_neg, fmul, norm_sqr, GaussRational,
};

/// A point of the Riemann sphere.
#[derive(Debug, Clone, PartialEq)]
pub enum PointP1 {
    Finite(Complex),
    Infinity,
}

impl PointP1 {
    pub fn finite(&self) -> Option<&Complex> {
        match self {
            PointP1::Finite(z) => Some(z),
            PointP1::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, PointP1::Infinity)
    }
}

pub type ExactEntries = [GaussRational; 4];

/// Projective 2x2 complex matrix acting on the Riemann sphere.
#[derive(Debug, Clone)]
pub struct MoebiusMap {
    a: Complex,
    b: Complex,
    c: Complex,
    d: Complex,
    exact: Option<Box<ExactEntries>>,
    prec: u32,
}

/// Attractive / repulsive fixed points of a loxodromic map.
#[derive(Debug, Clone)]
pub struct FixedPointPair {
    pub attractive: PointP1,
    pub repulsive: PointP1,
}

impl MoebiusMap {
    pub fn new(a: Complex, b: Complex, c: Complex, d: Complex, prec: u32) -> Result<Self> {
        let m = Self { a, b, c, d, exact: None, prec };
        m.check_nondegenerate()?;
        Ok(m)
    }

    pub fn from_exact(entries: ExactEntries, prec: u32) -> Result<Self> {
        let [ea, eb, ec, ed] = &entries;
        let det = ea.mul(ed).sub(&eb.mul(ec));
        if det.is_zero() {
            return Err(Error::DegenerateMap);
        }
        Ok(Self {
            a: ea.to_complex(prec),
            b: eb.to_complex(prec),
            c: ec.to_complex(prec),
            d: ed.to_complex(prec),
            exact: Some(Box::new(entries)),
            prec,
        })
    }

    pub fn from_int_entries(a: i64, b: i64, c: i64, d: i64, prec: u32) -> Result<Self> {
        Self::from_exact(
            [
                GaussRational::from_int(a),
                GaussRational::from_int(b),
                GaussRational::from_int(c),
                GaussRational::from_int(d),
            ],
            prec,
        )
    }

    pub fn identity(prec: u32) -> Self {
        Self::from_int_entries(1, 0, 0, 1, prec).expect("identity is nondegenerate")
    }

    /// Loxodromic map with prescribed fixed points and multiplier `q`,
    /// `0 < |q| < 1`.
    pub fn from_fixed_points(
        attractive: &PointP1,
        repulsive: &PointP1,
        q: &Complex,
        prec: u32,
    ) -> Result<Self> {
        let one = complex_one(prec);
        match (attractive, repulsive) {
            (PointP1::Finite(al), PointP1::Finite(be)) => {
                if norm_sqr(&csub(al, be)).is_zero() {
                    return Err(Error::CoincidentFixedPoints);
                }
                // conjugate w -> q w by the map sending (0, infinity) to (alpha, beta)
                let a = csub(al, &cmul(be, q));
                let b = cmul(&cmul(al, be), &csub(q, &one));
                let c = csub(&one, q);
                let d = csub(&cmul(al, q), be);
                Self::new(a, b, c, d, prec)
            }
            (PointP1::Finite(al), PointP1::Infinity) => {
                // z -> q z + alpha (1 - q)
                let b = cmul(al, &csub(&one, q));
                Self::new(q.clone(), b, complex_zero(prec), one.clone(), prec)
            }
            (PointP1::Infinity, PointP1::Finite(be)) => {
                // z -> z/q - beta (1 - q)/q
                let b = cmul(be, &csub(q, &one));
                Self::new(one.clone(), b, complex_zero(prec), q.clone(), prec)
            }
            (PointP1::Infinity, PointP1::Infinity) => Err(Error::CoincidentFixedPoints),
        }
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn entries(&self) -> [&Complex; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn exact_entries(&self) -> Option<&ExactEntries> {
        self.exact.as_deref()
    }

    fn check_nondegenerate(&self) -> Result<()> {
        let det = self.determinant();
        let scale = self.scale_sqr();
        // |det|^2 below 2^-(2P-16) * scale^2 counts as degenerate
        let tol = exp2_neg(2 * self.prec - 16, self.prec);
        if norm_sqr(&det) <= tol * fmul(&scale, &scale) {
            return Err(Error::DegenerateMap);
        }
        Ok(())
    }

    fn scale_sqr(&self) -> Float {
        let mut s = norm_sqr(&self.a);
        for z in [&self.b, &self.c, &self.d] {
            let n = norm_sqr(z);
            if n > s {
                s = n;
            }
        }
        s
    }

    pub fn determinant(&self) -> Complex {
        csub(&cmul(&self.a, &self.d), &cmul(&self.b, &self.c))
    }

    pub fn trace(&self) -> Complex {
        cadd(&self.a, &self.d)
    }

    /// tr^2 / det, the conjugation invariant behind fixed-point and
    /// multiplier classification.
    pub fn trace_invariant(&self) -> Complex {
        if let Some(exact) = &self.exact {
            let [ea, eb, ec, ed] = exact.as_ref();
            let tr = ea.add(ed);
            let det = ea.mul(ed).sub(&eb.mul(ec));
            let tr2 = tr.mul(&tr);
            // exact complex division tr2 / det
            let den = (&det.re * &det.re).complete() + (&det.im * &det.im).complete();
            let re = ((&tr2.re * &det.re).complete() + (&tr2.im * &det.im).complete()) / den.clone();
            let im = ((&tr2.im * &det.re).complete() - (&tr2.re * &det.im).complete()) / den;
            return complex_from_rationals(&re, &im, self.prec);
        }
        let tr = self.trace();
        cdiv(&cmul(&tr, &tr), &self.determinant())
    }

    /// Matrix product, projectively normalized: in floating mode the
    /// largest-magnitude entry is scaled to 1; in exact mode the quadruple is
    /// content-reduced.
    pub fn compose(&self, other: &Self) -> Self {
        let prec = self.prec;
        if let (Some(x), Some(y)) = (&self.exact, &other.exact) {
            let [xa, xb, xc, xd] = x.as_ref();
            let [ya, yb, yc, yd] = y.as_ref();
            let entries = [
                xa.mul(ya).add(&xb.mul(yc)),
                xa.mul(yb).add(&xb.mul(yd)),
                xc.mul(ya).add(&xd.mul(yc)),
                xc.mul(yb).add(&xd.mul(yd)),
            ];
            let entries = content_reduce(entries);
            let [ea, eb, ec, ed] = &entries;
            return Self {
                a: ea.to_complex(prec),
                b: eb.to_complex(prec),
                c: ec.to_complex(prec),
                d: ed.to_complex(prec),
                exact: Some(Box::new(entries)),
                prec,
            };
        }
        let a = cadd(&cmul(&self.a, &other.a), &cmul(&self.b, &other.c));
        let b = cadd(&cmul(&self.a, &other.b), &cmul(&self.b, &other.d));
        let c = cadd(&cmul(&self.c, &other.a), &cmul(&self.d, &other.c));
        let d = cadd(&cmul(&self.c, &other.b), &cmul(&self.d, &other.d));
        let mut m = Self { a, b, c, d, exact: None, prec };
        m.normalize_floating();
        m
    }

    /// Adjugate, i.e. the inverse up to the determinant factor.
    pub fn inverse(&self) -> Self {
        let prec = self.prec;
        if let Some(x) = &self.exact {
            let [xa, xb, xc, xd] = x.as_ref();
            let entries = content_reduce([xd.clone(), xb.neg(), xc.neg(), xa.clone()]);
            let [ea, eb, ec, ed] = &entries;
            return Self {
                a: ea.to_complex(prec),
                b: eb.to_complex(prec),
                c: ec.to_complex(prec),
                d: ed.to_complex(prec),
                exact: Some(Box::new(entries)),
                prec,
            };
        }
        Self {
            a: self.d.clone(),
            b: cneg(&self.b),
            c: cneg(&self.c),
            d: self.a.clone(),
            exact: None,
            prec,
        }
    }

    fn normalize_floating(&mut self) {
        let norms = [
            norm_sqr(&self.a),
            norm_sqr(&self.b),
            norm_sqr(&self.c),
            norm_sqr(&self.d),
        ];
        let mut k = 0;
        for (i, n) in norms.iter().enumerate().skip(1) {
            if *n > norms[k] {
                k = i;
            }
        }
        let pivot = [&self.a, &self.b, &self.c, &self.d][k].clone();
        self.a /= &pivot;
        self.b /= &pivot;
        self.c /= &pivot;
        self.d /= &pivot;
    }

    pub fn apply(&self, z: &Complex) -> PointP1 {
        let den = cadd(&cmul(&self.c, z), &self.d);
        if norm_sqr(&den).is_zero() {
            return PointP1::Infinity;
        }
        let num = cadd(&cmul(&self.a, z), &self.b);
        PointP1::Finite(num / den)
    }

    pub fn apply_point(&self, p: &PointP1) -> PointP1 {
        match p {
            PointP1::Finite(z) => self.apply(z),
            PointP1::Infinity => {
                if norm_sqr(&self.c).is_zero() {
                    PointP1::Infinity
                } else {
                    PointP1::Finite(cdiv(&self.a, &self.c))
                }
            }
        }
    }

    /// (az+b)/(cz+d) assuming the denominator does not vanish.
    pub fn apply_finite(&self, z: &Complex) -> Complex {
        let den = cadd(&cmul(&self.c, z), &self.d);
        let num = cadd(&cmul(&self.a, z), &self.b);
        num / den
    }

    /// Derivative det/(cz+d)^2 at a finite point.
    pub fn derivative_at(&self, z: &Complex) -> Complex {
        let den = cadd(&cmul(&self.c, z), &self.d);
        let den2 = cmul(&den, &den);
        self.determinant() / den2
    }

    /// The root with |q| < 1 of `q + 1/q + 2 = tr^2/det`.
    pub fn multiplier(&self) -> Result<Complex> {
        multiplier_from_trace_invariant(&self.trace_invariant(), self.prec)
    }

    pub fn is_loxodromic(&self) -> bool {
        self.multiplier().is_ok()
    }

    /// Fixed points as roots of `c z^2 + (d-a) z - b = 0`, the attractive one
    /// labeled by |derivative| < 1.
    pub fn fixed_points(&self) -> Result<FixedPointPair> {
        self.multiplier()?; // loxodromy gate
        let prec = self.prec;
        if norm_sqr(&self.c).is_zero() {
            // affine: fixed points b/(d-a) and infinity
            let da = csub(&self.d, &self.a);
            if norm_sqr(&da).is_zero() {
                return Err(Error::ParabolicOrElliptic);
            }
            let z = cdiv(&self.b, &da);
            // derivative at the finite point is a/d
            let lam = cdiv(&self.a, &self.d);
            if norm_sqr(&lam) < 1u32 {
                return Ok(FixedPointPair {
                    attractive: PointP1::Finite(z),
                    repulsive: PointP1::Infinity,
                });
            }
            return Ok(FixedPointPair {
                attractive: PointP1::Infinity,
                repulsive: PointP1::Finite(z),
            });
        }
        let amd = csub(&self.a, &self.d);
        let four = Complex::with_val(prec, (4, 0));
        let disc = cadd(&cmul(&amd, &amd), &cmul(&four, &cmul(&self.b, &self.c)));
        let s = disc.sqrt();
        let dot = fmul(amd.real(), s.real()) + fmul(amd.imag(), s.imag());
        let s = if dot < 0 { cneg(&s) } else { s };
        let two_c = cmul(&self.c, &Complex::with_val(prec, (2, 0)));
        let z1 = cdiv(&cadd(&amd, &s), &two_c);
        let z2 = if norm_sqr(&z1).is_zero() {
            cdiv(&csub(&amd, &s), &two_c)
        } else {
            // product of the roots is -b/c
            cdiv(&cdiv(&cneg(&self.b), &self.c), &z1)
        };
        let d1 = norm_sqr(&self.derivative_at(&z1));
        let d2 = norm_sqr(&self.derivative_at(&z2));
        if d1 < d2 {
            Ok(FixedPointPair {
                attractive: PointP1::Finite(z1),
                repulsive: PointP1::Finite(z2),
            })
        } else {
            Ok(FixedPointPair {
                attractive: PointP1::Finite(z2),
                repulsive: PointP1::Finite(z1),
            })
        }
    }

    /// Projective equality to within `tol` (relative, against the pivot
    /// entry of `self`).
    pub fn projectively_eq(&self, other: &Self, tol: &Float) -> bool {
        let norms = [
            norm_sqr(&self.a),
            norm_sqr(&self.b),
            norm_sqr(&self.c),
            norm_sqr(&self.d),
        ];
        let mut k = 0;
        for (i, n) in norms.iter().enumerate().skip(1) {
            if *n > norms[k] {
                k = i;
            }
        }
        let se = self.entries();
        let oe = other.entries();
        if norm_sqr(oe[k]).is_zero() {
            return false;
        }
        let lam = cdiv(oe[k], se[k]);
        let scale = norm_sqr(oe[k]);
        for i in 0..4 {
            let diff = csub(oe[i], &cmul(se[i], &lam));
            if norm_sqr(&diff) > fmul(tol, tol) * scale.clone() {
                return false;
            }
        }
        true
    }
}

/// Solve `q + 1/q + 2 = t` for the root with |q| < 1, rejecting values whose
/// modulus is within the half-precision guard band of the unit circle.
pub fn multiplier_from_trace_invariant(t: &Complex, prec: u32) -> Result<Complex> {
    // q^2 - (t - 2) q + 1 = 0
    let two = Complex::with_val(prec, (2, 0));
    let tm2 = csub(t, &two);
    let disc = csub(&cmul(&tm2, &tm2), &Complex::with_val(prec, (4, 0)));
    let s = disc.sqrt();
    // align the branch with tm2 so q_big = (tm2 + s)/2 has no cancellation
    let dot = fmul(tm2.real(), s.real()) + fmul(tm2.imag(), s.imag());
    let s = if dot < 0 { cneg(&s) } else { s };
    let q_big = cadd(&tm2, &s) / two;
    if norm_sqr(&q_big).is_zero() {
        return Err(Error::ParabolicOrElliptic);
    }
    let q = cdiv(&complex_one(prec), &q_big);
    let q = if norm_sqr(&q) <= norm_sqr(&q_big) { q } else { q_big };
    let qabs = cabs(&q);
    let guard = exp2_neg(prec / 2, prec);
    if (qabs - Float::with_val(prec, 1)).abs() < guard {
        return Err(Error::ParabolicOrElliptic);
    }
    Ok(q)
}

/// Clear denominators and divide by the integer content, entrywise over the
/// real and imaginary parts.
fn content_reduce(entries: ExactEntries) -> ExactEntries {
    let mut lcm = Integer::from(1);
    for e in &entries {
        lcm.lcm_mut(e.re.denom());
        lcm.lcm_mut(e.im.denom());
    }
    let mut gcd = Integer::new();
    let scaled: Vec<(Integer, Integer)> = entries
        .iter()
        .map(|e| {
            let re = (&e.re * &lcm).complete().into_numer_denom().0;
            let im = (&e.im * &lcm).complete().into_numer_denom().0;
            gcd.gcd_mut(&re);
            gcd.gcd_mut(&im);
            (re, im)
        })
        .collect();
    if gcd == 0 {
        gcd = Integer::from(1);
    }
    let mut it = scaled.into_iter().map(|(re, im)| {
        GaussRational::new(
            Rational::from((re, gcd.clone())),
            Rational::from((im, gcd.clone())),
        )
    });
    [
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    ]
}

/// Oriented circle on the sphere. `unbounded` marks a circle whose paired
/// disk is the exterior side together with the point at infinity; at most one
/// circle of a valid configuration is unbounded.
#[derive(Debug, Clone)]
pub struct Circle {
    pub center: Complex,
    pub radius: Float,
    pub unbounded: bool,
}

impl Circle {
    pub fn new(center: Complex, radius: Float) -> Self {
        Self { center, radius, unbounded: false }
    }

    pub fn new_unbounded(center: Complex, radius: Float) -> Self {
        Self { center, radius, unbounded: true }
    }

    pub fn point_at(&self, angle: &Float) -> Complex {
        let prec = self.radius.prec();
        let (s, c) = angle.clone().sin_cos(Float::new(prec));
        let dir = Complex::with_val(prec, (c, s));
        cadd(&self.center, &(dir * self.radius.clone()))
    }

    /// Signed distance of `z` into the paired disk: positive inside.
    pub fn disk_depth(&self, z: &Complex) -> Float {
        let d = cabs(&csub(z, &self.center));
        if self.unbounded {
            d - self.radius.clone()
        } else {
            self.radius.clone() - d
        }
    }

    pub fn disk_contains(&self, z: &Complex) -> bool {
        self.disk_depth(z) >= 0
    }

    pub fn disk_contains_point(&self, p: &PointP1) -> bool {
        match p {
            PointP1::Finite(z) => self.disk_contains(z),
            PointP1::Infinity => self.unbounded,
        }
    }

    /// Gap between the paired disks; positive means disjoint closures.
    pub fn gap(&self, other: &Circle) -> Float {
        let d = cabs(&csub(&self.center, &other.center));
        match (self.unbounded, other.unbounded) {
            (false, false) => d - self.radius.clone() - other.radius.clone(),
            (true, false) => self.radius.clone() - d - other.radius.clone(),
            (false, true) => other.radius.clone() - d - self.radius.clone(),
            // two sphere disks containing infinity always intersect
            (true, true) => Float::with_val(self.radius.prec(), -1),
        }
    }

    /// Orientation factor turning a counterclockwise contour integral into
    /// the positively-oriented boundary integral of the common exterior.
    pub fn orientation_sign(&self) -> i32 {
        if self.unbounded {
            1
        } else {
            -1
        }
    }
}

/// Image of a circle under a Möbius map, with the disk side tracked. Fails
/// if the circle passes through the pole of the map.
pub fn map_circle(m: &MoebiusMap, circle: &Circle) -> Result<Circle> {
    let prec = m.precision();
    let [a, _b, c, d] = m.entries();
    if norm_sqr(c).is_zero() {
        // affine map: center maps to center, radius scales by |a/d|
        let lam = cdiv(a, d);
        let center = m.apply_finite(&circle.center);
        let radius = cabs(&lam) * circle.radius.clone();
        return Ok(Circle { center, radius, unbounded: circle.unbounded });
    }
    let pole = cneg(&cdiv(d, c));
    let off = csub(&pole, &circle.center);
    let off_abs = cabs(&off);
    let boundary_dist = (off_abs - &circle.radius).abs();
    let tol = exp2_neg(prec / 2, prec);
    if boundary_dist < tol * circle.radius.clone() {
        return Err(Error::DegenerateMarking(
            "circle passes through the pole of the conjugating map".into(),
        ));
    }
    // the inverse point of the pole maps to the new center; when the pole is
    // the center itself the inverse point is infinity
    let inv = if norm_sqr(&off).is_zero() {
        PointP1::Infinity
    } else {
        let r2 = fmul(&circle.radius, &circle.radius);
        let r2c = Complex::with_val(prec, (r2, Float::new(prec)));
        PointP1::Finite(cadd(&circle.center, &cdiv(&r2c, &off.conj())))
    };
    let center = match m.apply_point(&inv) {
        PointP1::Finite(z) => z,
        PointP1::Infinity => {
            return Err(Error::DegenerateMarking(
                "image circle is centered at infinity".into(),
            ))
        }
    };
    let rad_c = Complex::with_val(prec, (circle.radius.clone(), Float::new(prec)));
    let bp = cadd(&circle.center, &rad_c);
    let image_bp = m.apply_finite(&bp);
    let radius = cabs(&csub(&image_bp, &center));
    let pole_in_disk = circle.disk_contains(&pole);
    Ok(Circle { center, radius, unbounded: pole_in_disk })
}

/// g generators plus (optionally) 2g paired circles and a precision policy.
#[derive(Debug, Clone)]
pub struct MarkedSchottkyGroup {
    generators: Vec<MoebiusMap>,
    circles: Option<Vec<CirclePair>>,
    precision: u32,
}

/// The two circles attached to one generator: the generator maps the
/// complement of the disk of `plus` onto the open disk of `minus`. The
/// repulsive fixed point sits in the disk of `plus`, the attractive one in
/// the disk of `minus`.
#[derive(Debug, Clone)]
pub struct CirclePair {
    pub plus: Circle,
    pub minus: Circle,
}

impl MarkedSchottkyGroup {
    pub fn new(
        generators: Vec<MoebiusMap>,
        circles: Option<Vec<CirclePair>>,
        precision: u32,
    ) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidParameter("rank must be at least 1".into()));
        }
        if let Some(cs) = &circles {
            if cs.len() != generators.len() {
                return Err(Error::InvalidParameter(format!(
                    "expected {} circle pairs, got {}",
                    generators.len(),
                    cs.len()
                )));
            }
        }
        for (i, g) in generators.iter().enumerate() {
            g.multiplier().map_err(|_| {
                Error::InvalidParameter(format!("generator {} is not loxodromic", i + 1))
            })?;
        }
        Ok(Self { generators, circles, precision })
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn generator(&self, i: usize) -> &MoebiusMap {
        &self.generators[i]
    }

    pub fn generators(&self) -> &[MoebiusMap] {
        &self.generators
    }

    pub fn circles(&self) -> Option<&[CirclePair]> {
        self.circles.as_deref()
    }

    pub fn with_circles(mut self, circles: Option<Vec<CirclePair>>) -> Self {
        self.circles = circles;
        self
    }

    pub fn generator_multipliers(&self) -> Result<Vec<Complex>> {
        self.generators.iter().map(|g| g.multiplier()).collect()
    }

    /// True when every entry of every generator is real to within the
    /// half-precision guard band.
    pub fn is_real(&self) -> bool {
        let guard = exp2_neg(self.precision / 2, self.precision);
        self.generators.iter().all(|g| {
            let scale = g
                .entries()
                .iter()
                .map(|z| cabs(z))
                .fold(Float::with_val(self.precision, 0), |acc, x| if x > acc { x } else { acc });
            g.entries()
                .iter()
                .all(|z| z.imag().clone().abs() <= fmul(&guard, &scale))
        })
    }
}

/// Validated fundamental-domain data: the paired circles, the smallest gap
/// between disk closures, and the largest boundary-mapping residual observed
/// at the sampled points.
#[derive(Debug, Clone)]
pub struct SchottkyCertificate {
    pub pairs: Vec<CirclePair>,
    pub margin: Float,
    pub mapping_residual: Float,
}

const MAPPING_SAMPLES: u32 = 16;

/// Check (or construct, from isometric circles) a classical fundamental
/// domain for the marked group. A failed certificate does not prove the
/// group is not Schottky; products and zeta values need only multipliers.
pub fn validate_schottky(group: &MarkedSchottkyGroup) -> Result<SchottkyCertificate> {
    let prec = group.precision();
    let pairs: Vec<CirclePair> = match group.circles() {
        Some(cs) => cs.to_vec(),
        None => group
            .generators()
            .iter()
            .enumerate()
            .map(|(i, g)| {
                isometric_pair(g).map_err(|e| match e {
                    Error::NotClassicalSchottky(msg) => {
                        Error::NotClassicalSchottky(format!("generator {}: {msg}", i + 1))
                    }
                    other => other,
                })
            })
            .collect::<Result<_>>()?,
    };

    let mut all: Vec<&Circle> = Vec::with_capacity(2 * pairs.len());
    for p in &pairs {
        all.push(&p.plus);
        all.push(&p.minus);
    }
    if all.iter().filter(|c| c.unbounded).count() > 1 {
        return Err(Error::NotClassicalSchottky(
            "more than one circle claims the unbounded side".into(),
        ));
    }
    let mut margin: Option<Float> = None;
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            let gap = all[i].gap(all[j]);
            if gap <= 0 {
                return Err(Error::NotClassicalSchottky(format!(
                    "disks {i} and {j} overlap (gap {:.3e})",
                    gap.to_f64()
                )));
            }
            margin = Some(match margin {
                None => gap,
                Some(m) => {
                    if gap < m {
                        gap
                    } else {
                        m
                    }
                }
            });
        }
    }
    let margin = margin.unwrap_or_else(|| Float::with_val(prec, 1));

    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let mut residual = Float::with_val(prec, 0);
    for (i, g) in group.generators().iter().enumerate() {
        let pair = &pairs[i];
        for k in 0..MAPPING_SAMPLES {
            let angle = Float::with_val(prec, 2 * k + 1) / Float::with_val(prec, MAPPING_SAMPLES)
                * pi.clone();
            let z = pair.plus.point_at(&angle);
            let w = match g.apply(&z) {
                PointP1::Finite(w) => w,
                PointP1::Infinity => {
                    return Err(Error::NotClassicalSchottky(format!(
                        "generator {} sends a boundary sample of its plus circle to infinity",
                        i + 1
                    )))
                }
            };
            let dist = cabs(&csub(&w, &pair.minus.center));
            let res = (dist - &pair.minus.radius).abs() / pair.minus.radius.clone();
            if res > residual {
                residual = res;
            }
        }
        // orientation: a point of the common exterior just off the plus
        // circle must land strictly inside the minus disk
        let step = {
            let half = margin.clone() / 2u32;
            let tenth = pair.plus.radius.clone() / 10u32;
            if half < tenth {
                half
            } else {
                tenth
            }
        };
        let rad = if pair.plus.unbounded {
            pair.plus.radius.clone() - step
        } else {
            pair.plus.radius.clone() + step
        };
        let probe = Circle {
            center: pair.plus.center.clone(),
            radius: rad,
            unbounded: pair.plus.unbounded,
        };
        let z_out = probe.point_at(&Float::with_val(prec, 0.37));
        match g.apply(&z_out) {
            PointP1::Finite(w) if pair.minus.disk_contains(&w) => {}
            _ => {
                return Err(Error::NotClassicalSchottky(format!(
                    "generator {} does not map the exterior of its plus circle into its minus disk",
                    i + 1
                )))
            }
        }
    }

    let tol = Float::with_val(prec, 1e-10);
    if residual > tol {
        return Err(Error::NotClassicalSchottky(format!(
            "circle pairing residual {:.3e} exceeds tolerance",
            residual.to_f64()
        )));
    }
    Ok(SchottkyCertificate { pairs, margin, mapping_residual: residual })
}

/// Isometric circles |cz + d| = sqrt|det| of a map and its inverse.
pub fn isometric_pair(g: &MoebiusMap) -> Result<CirclePair> {
    let [a, _b, c, d] = g.entries();
    if norm_sqr(c).is_zero() {
        return Err(Error::NotClassicalSchottky(
            "map fixes infinity, isometric circles do not exist; supply circles explicitly".into(),
        ));
    }
    let radius = (norm_sqr(&g.determinant()).sqrt() / norm_sqr(c)).sqrt();
    let center_plus = cneg(&cdiv(d, c));
    let center_minus = cdiv(a, c);
    Ok(CirclePair {
        plus: Circle::new(center_plus, radius.clone()),
        minus: Circle::new(center_minus, radius),
    })
}

/// Conjugate the marked group so that generator 1 has attractive fixed point
/// 0 and repulsive fixed point infinity, and generator 2 has attractive fixed
/// point 1. Multipliers are unchanged.
pub fn normalize_marking(group: &MarkedSchottkyGroup) -> Result<MarkedSchottkyGroup> {
    if group.rank() < 2 {
        return Err(Error::DegenerateMarking("normalized marking needs rank >= 2".into()));
    }
    let prec = group.precision();
    let fp1 = group.generator(0).fixed_points()?;
    let fp2 = group.generator(1).fixed_points()?;
    let a1 = fp1.attractive;
    let b1 = fp1.repulsive;
    let a2 = fp2.attractive;
    let t = marking_map(&a1, &b1, &a2, prec)?;
    let t_inv = t.inverse();
    let gens: Vec<MoebiusMap> = group
        .generators()
        .iter()
        .map(|g| t.compose(g).compose(&t_inv))
        .collect();
    let circles = match group.circles() {
        Some(pairs) => Some(
            pairs
                .iter()
                .map(|p| {
                    Ok(CirclePair {
                        plus: map_circle(&t, &p.plus)?,
                        minus: map_circle(&t, &p.minus)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    MarkedSchottkyGroup::new(gens, circles, prec)
}

/// The Möbius map sending (p, q, r) to (0, infinity, 1).
fn marking_map(p: &PointP1, q: &PointP1, r: &PointP1, prec: u32) -> Result<MoebiusMap> {
    let distinct = |x: &PointP1, y: &PointP1| -> bool {
        match (x, y) {
            (PointP1::Infinity, PointP1::Infinity) => false,
            (PointP1::Finite(a), PointP1::Finite(b)) => !norm_sqr(&csub(a, b)).is_zero(),
            _ => true,
        }
    };
    if !(distinct(p, q) && distinct(p, r) && distinct(q, r)) {
        return Err(Error::DegenerateMarking("marking fixed points coincide".into()));
    }
    let one = complex_one(prec);
    let m = match (p, q, r) {
        (PointP1::Finite(p), PointP1::Finite(q), PointP1::Finite(r)) => {
            let rq = csub(r, q);
            let rp = csub(r, p);
            MoebiusMap::new(rq.clone(), cneg(&cmul(p, &rq)), rp.clone(), cneg(&cmul(q, &rp)), prec)?
        }
        (PointP1::Finite(p), PointP1::Infinity, PointP1::Finite(r)) => {
            let rp = csub(r, p);
            MoebiusMap::new(one.clone(), cneg(p), complex_zero(prec), rp, prec)?
        }
        (PointP1::Infinity, PointP1::Finite(q), PointP1::Finite(r)) => {
            let rq = csub(r, q);
            MoebiusMap::new(complex_zero(prec), rq, one.clone(), cneg(q), prec)?
        }
        (PointP1::Finite(p), PointP1::Finite(q), PointP1::Infinity) => {
            MoebiusMap::new(one.clone(), cneg(p), one.clone(), cneg(q), prec)?
        }
        _ => unreachable!("at most one of three distinct points is infinity in each arm"),
    };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prec::complex_from_f64;

    const P: u32 = 128;

    fn tol() -> Float {
        Float::with_val(P, 1e-30)
    }

    fn cdist(a: &Complex, b: &Complex) -> Float {
        cabs(&csub(a, b))
    }

    #[test]
    fn compose_identity_and_diagonals() {
        let m = MoebiusMap::from_int_entries(3, 1, 2, 5, P).unwrap();
        let id = MoebiusMap::identity(P);
        assert!(id.compose(&m).projectively_eq(&m, &tol()));
        assert!(m.compose(&id).projectively_eq(&m, &tol()));

        let half = GaussRational::new(Rational::from((1, 2)), Rational::new());
        let d = MoebiusMap::from_exact(
            [GaussRational::from_int(2), GaussRational::zero(), GaussRational::zero(), half],
            P,
        )
        .unwrap();
        let dd = d.compose(&d);
        let expect = MoebiusMap::from_int_entries(16, 0, 0, 1, P).unwrap();
        assert!(dd.projectively_eq(&expect, &tol()));
    }

    #[test]
    fn inverse_composes_to_identity() {
        let m = MoebiusMap::from_int_entries(7, -3, 2, 1, P).unwrap();
        let prod = m.compose(&m.inverse());
        assert!(prod.projectively_eq(&MoebiusMap::identity(P), &tol()));
        assert!(prod.exact_entries().is_some());
    }

    #[test]
    fn multiplier_of_diagonal_map() {
        // z -> 0.04 z
        let m = MoebiusMap::from_int_entries(1, 0, 0, 25, P).unwrap();
        let q = m.multiplier().unwrap();
        let expect = Complex::with_val(P, (Float::with_val(P, 1) / 25u32, 0));
        assert!(cdist(&q, &expect) < tol());
    }

    #[test]
    fn multiplier_trace_three() {
        // tr = 3, det = 1: q = (7 - 3 sqrt 5)/2, cross-checked against the
        // eigenvalue ratio of lambda^2 - 3 lambda + 1 = 0
        let m = MoebiusMap::from_int_entries(2, 1, 1, 1, P).unwrap();
        let q = m.multiplier().unwrap();
        let s5 = Float::with_val(P, 5).sqrt();
        let expect = (Float::with_val(P, 7) - Float::with_val(P, 3) * s5.clone()) / 2u32;
        assert!((q.real().clone() - &expect).abs() < tol());
        assert!(q.imag().clone().abs() < tol());
        assert!((q.real().to_f64() - 0.1458980).abs() < 1e-6);
        let lam_small = (Float::with_val(P, 3) - s5.clone()) / 2u32;
        let lam_big = (Float::with_val(P, 3) + s5) / 2u32;
        let ratio = lam_small / lam_big;
        assert!((q.real().clone() - &ratio).abs() < tol());
    }

    #[test]
    fn multiplier_conjugation_invariant() {
        let m = MoebiusMap::from_int_entries(5, 1, 2, 1, P).unwrap();
        for p in [
            MoebiusMap::from_int_entries(1, 2, 3, 7, P).unwrap(),
            MoebiusMap::from_int_entries(-2, 1, 1, 4, P).unwrap(),
            MoebiusMap::from_int_entries(0, 1, -1, 5, P).unwrap(),
        ] {
            let conj = p.compose(&m).compose(&p.inverse());
            let q0 = m.multiplier().unwrap();
            let q1 = conj.multiplier().unwrap();
            assert!(cdist(&q0, &q1) < tol());
        }
    }

    #[test]
    fn multiplier_inverse_and_power_law() {
        let m = MoebiusMap::from_int_entries(5, 1, 2, 1, P).unwrap();
        let q = m.multiplier().unwrap();
        let qi = m.inverse().multiplier().unwrap();
        assert!(cdist(&q, &qi) < tol());
        let mut pow = m.clone();
        let mut qn = q.clone();
        for _ in 2..=5 {
            pow = pow.compose(&m);
            qn = cmul(&qn, &q);
            let qp = pow.multiplier().unwrap();
            assert!(cdist(&qp, &qn) < Float::with_val(P, 1e-28));
        }
    }

    #[test]
    fn parabolic_is_rejected() {
        let m = MoebiusMap::from_int_entries(1, 1, 0, 1, P).unwrap();
        assert!(matches!(m.multiplier(), Err(Error::ParabolicOrElliptic)));
        assert!(matches!(m.fixed_points(), Err(Error::ParabolicOrElliptic)));
    }

    #[test]
    fn projective_scaling_leaves_invariants() {
        let m = MoebiusMap::from_int_entries(5, 1, 2, 1, P).unwrap();
        let lam = complex_from_f64(2.0, 1.0, P);
        let scaled = MoebiusMap::new(
            cmul(m.entries()[0], &lam),
            cmul(m.entries()[1], &lam),
            cmul(m.entries()[2], &lam),
            cmul(m.entries()[3], &lam),
            P,
        )
        .unwrap();
        let q0 = m.multiplier().unwrap();
        let q1 = scaled.multiplier().unwrap();
        assert!(cdist(&q0, &q1) < tol());
    }

    #[test]
    fn fixed_points_of_affine_map() {
        // z -> z/4: attractive 0, repulsive infinity
        let m = MoebiusMap::from_int_entries(1, 0, 0, 4, P).unwrap();
        let fp = m.fixed_points().unwrap();
        match (&fp.attractive, &fp.repulsive) {
            (PointP1::Finite(z), PointP1::Infinity) => {
                assert!(cabs(z) < tol());
            }
            other => panic!("unexpected fixed points {other:?}"),
        }
    }

    #[test]
    fn fixed_points_match_power_iteration() {
        let m = MoebiusMap::from_int_entries(5, 1, 2, 1, P).unwrap();
        let fp = m.fixed_points().unwrap();
        let att = fp.attractive.finite().unwrap().clone();
        let mut z = complex_from_f64(0.3, 0.7, P);
        for _ in 0..200 {
            z = m.apply_finite(&z);
        }
        assert!(cdist(&z, &att) < Float::with_val(P, 1e-25));
        // attractive(P m P^-1) = P(attractive(m))
        let p = MoebiusMap::from_int_entries(1, 2, 3, 7, P).unwrap();
        let conj = p.compose(&m).compose(&p.inverse());
        let att_conj = conj.fixed_points().unwrap().attractive;
        let mapped = p.apply(&att);
        match (&att_conj, &mapped) {
            (PointP1::Finite(x), PointP1::Finite(y)) => {
                assert!(cdist(x, y) < Float::with_val(P, 1e-25));
            }
            other => panic!("unexpected points {other:?}"),
        }
    }

    #[test]
    fn from_fixed_points_round_trips() {
        let q = Complex::with_val(P, (Float::with_val(P, 1) / 30u32, 0));
        let att = PointP1::Finite(complex_from_f64(1.0, 0.0, P));
        let rep = PointP1::Finite(complex_from_f64(3.0, 0.0, P));
        let m = MoebiusMap::from_fixed_points(&att, &rep, &q, P).unwrap();
        let got_q = m.multiplier().unwrap();
        assert!(cdist(&got_q, &q) < tol());
        let fp = m.fixed_points().unwrap();
        let a = fp.attractive.finite().unwrap();
        let b = fp.repulsive.finite().unwrap();
        assert!((a.real().clone() - Float::with_val(P, 1)).abs() < tol());
        assert!((b.real().clone() - Float::with_val(P, 3)).abs() < tol());
    }

    #[test]
    fn normalize_marking_places_fixed_points() {
        // fixed points (-2, -4) and (2, 4)
        let g1 = MoebiusMap::from_int_entries(-76, -312, 39, 158, P).unwrap();
        let g2 = MoebiusMap::from_int_entries(66, -272, 34, -138, P).unwrap();
        let group = MarkedSchottkyGroup::new(vec![g1, g2], None, P).unwrap();
        let norm = normalize_marking(&group).unwrap();
        let fp1 = norm.generator(0).fixed_points().unwrap();
        let fp2 = norm.generator(1).fixed_points().unwrap();
        assert!(cabs(fp1.attractive.finite().unwrap()) < Float::with_val(P, 1e-30));
        assert!(fp1.repulsive.is_infinity());
        let a2 = fp2.attractive.finite().unwrap();
        assert!(cdist(a2, &complex_one(P)) < Float::with_val(P, 1e-28));
        for i in 0..2 {
            let q0 = group.generator(i).multiplier().unwrap();
            let q1 = norm.generator(i).multiplier().unwrap();
            assert!(cdist(&q0, &q1) < Float::with_val(P, 1e-28));
        }
        // idempotence up to projective equality of the generators
        let again = normalize_marking(&norm).unwrap();
        for i in 0..2 {
            assert!(again
                .generator(i)
                .projectively_eq(norm.generator(i), &Float::with_val(P, 1e-25)));
        }
    }

    #[test]
    fn validate_isometric_circles() {
        // well separated fixed points, small multipliers
        let g1 = MoebiusMap::from_int_entries(-76, -312, 39, 158, P).unwrap();
        let g2 = MoebiusMap::from_int_entries(66, -272, 34, -138, P).unwrap();
        let group = MarkedSchottkyGroup::new(vec![g1, g2], None, P).unwrap();
        let cert = validate_schottky(&group).unwrap();
        assert!(cert.margin > 0);
        assert_eq!(cert.pairs.len(), 2);
        assert!(cert.mapping_residual < Float::with_val(P, 1e-20));
        // repulsive fixed point lies in the plus disk
        for (i, pair) in cert.pairs.iter().enumerate() {
            let fp = group.generator(i).fixed_points().unwrap();
            assert!(pair.plus.disk_contains_point(&fp.repulsive));
            assert!(pair.minus.disk_contains_point(&fp.attractive));
        }
    }

    #[test]
    fn overlapping_circles_rejected() {
        let g1 = MoebiusMap::from_int_entries(1, 0, 0, 25, P).unwrap();
        let pair = CirclePair {
            plus: Circle::new_unbounded(complex_zero(P), Float::with_val(P, 5)),
            minus: Circle::new(complex_zero(P), Float::with_val(P, 5) / 25u32),
        };
        // wrong minus radius: the boundary image lands on |z| = 0.2, not 4
        let bad_pair = CirclePair {
            plus: Circle::new_unbounded(complex_zero(P), Float::with_val(P, 5)),
            minus: Circle::new(complex_zero(P), Float::with_val(P, 4)),
        };
        let group = MarkedSchottkyGroup::new(vec![g1.clone()], Some(vec![bad_pair]), P).unwrap();
        assert!(matches!(validate_schottky(&group), Err(Error::NotClassicalSchottky(_))));
        let good = MarkedSchottkyGroup::new(vec![g1], Some(vec![pair]), P).unwrap();
        let cert = validate_schottky(&good).unwrap();
        assert!(cert.margin > 0);
    }

    #[test]
    fn map_circle_tracks_disk_side() {
        // z -> 1/z sends the disk-interior circle |z-3|=1 to a bounded circle
        let inv = MoebiusMap::from_int_entries(0, 1, 1, 0, P).unwrap();
        let c = Circle::new(complex_from_f64(3.0, 0.0, P), Float::with_val(P, 1));
        let img = map_circle(&inv, &c).unwrap();
        assert!(!img.unbounded);
        // image of |z|=2 with the pole 0 inside becomes the unbounded side
        let c2 = Circle::new(complex_zero(P), Float::with_val(P, 2));
        let img2 = map_circle(&inv, &c2).unwrap();
        assert!(img2.unbounded);
        assert!((img2.radius.to_f64() - 0.5).abs() < 1e-20);
    }
}
