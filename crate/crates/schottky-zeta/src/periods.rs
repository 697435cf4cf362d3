//! Normalized holomorphic 1-forms as pole-pair series over coset
//! representatives, circle-contour quadrature, the normalization check
//! `(1/2 pi i) contour_j omega_i = delta_ij`, and the period matrix from
//! path integrals between paired circles.
//!
//! Contour integrals on circles use the trapezoid rule, which is spectrally
//! accurate for integrands analytic near the circle; open paths use
//! composite 16-point Gauss-Legendre panels. All "contour" integrals are
//! taken with the positively-oriented boundary of the common exterior:
//! counterclockwise on the unbounded-side circle, clockwise on the others.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::moebius::{
    validate_schottky, Circle, MarkedSchottkyGroup, PointP1, SchottkyCertificate,
};
use crate::prec::{cabs, cadd, cdiv, cmul, csub, fmul, norm_sqr, CompensatedComplex};
use crate::words::Letter;

/// Pole pairs sharing a reduced-word prefix of this length are aggregated
/// into one multipole cluster; shorter representatives are summed directly.
const CLUSTER_DEPTH: usize = 4;

/// Expansion is used only when the evaluation point is at least this many
/// cluster radii away; otherwise the cluster's terms are recomputed and
/// summed directly.
const CLUSTER_SAFETY: u32 = 256;

/// One prefix cluster of pole pairs, compressed to the moments
/// `M_m = sum (p - c)^m - (p' - c)^m`, so the cluster contributes
/// `sum_m M_m / (z - c)^(m+1)`. For prefixes mapping into the unbounded
/// disk the same data is stored in the inverted coordinate 1/z: the pair sum
/// satisfies `pair(z) = -zeta^2 pair_inv(zeta)` with `zeta = 1/z` exactly.
#[derive(Debug, Clone)]
struct PoleCluster {
    prefix: Vec<Letter>,
    inverted: bool,
    center: Complex,
    radius: Float,
    count: usize,
    moments: Vec<Complex>,
}

/// Evaluator for the 1-form attached to marked generator `index` (1-based):
/// the sum over coset representatives (reduced words not ending in the
/// generator or its inverse) of `1/(z - rep(a)) - 1/(z - rep(b))`, where a, b
/// are the attractive and repulsive fixed points of the generator. Deep
/// coset terms are held as multipole clusters with truncation kept below
/// 2^-(prec+32), so evaluation matches the plain sum to working precision.
#[derive(Debug, Clone)]
pub struct DifferentialEvaluator {
    pub index: usize,
    pub max_len: usize,
    prec: u32,
    /// finite pole pairs of the shallow representatives: (p - p', p + p', p p')
    direct: Vec<(Complex, Complex, Complex)>,
    /// lone finite poles whose partner is at infinity: (sign, p)
    singles: Vec<(i32, Complex)>,
    clusters: Vec<PoleCluster>,
    term_count: usize,
    rebuild: RebuildData,
}

/// Everything needed to re-enumerate one cluster subtree exactly when an
/// evaluation point sits too close to it.
#[derive(Debug, Clone)]
struct RebuildData {
    mats: Vec<[Complex; 4]>,
    rank: usize,
    letters: Vec<Letter>,
    banned: Letter,
    fp_a: PointP1,
    fp_b: PointP1,
}

impl DifferentialEvaluator {
    pub fn eval(&self, z: &Complex) -> Complex {
        let prec = self.prec;
        let z2 = cmul(z, z);
        let mut acc = Complex::with_val(prec, (0, 0));
        for (d, s, m) in &self.direct {
            let den = cadd(&csub(&z2, &cmul(s, z)), m);
            acc += cdiv(d, &den);
        }
        for (sign, p) in &self.singles {
            acc += cdiv(&Complex::with_val(prec, (*sign, 0)), &csub(z, p));
        }
        let one = Complex::with_val(prec, (1, 0));
        for cl in &self.clusters {
            if cl.count == 0 {
                continue;
            }
            let (coord, post): (Complex, Option<Complex>) = if cl.inverted {
                let zeta = cdiv(&one, z);
                let neg_zeta2 = -cmul(&zeta, &zeta);
                (zeta, Some(neg_zeta2))
            } else {
                (z.clone(), None)
            };
            let base = csub(&coord, &cl.center);
            let dist = cabs(&base);
            if dist <= cl.radius.clone() * CLUSTER_SAFETY {
                acc += self.rebuild_cluster(cl, z);
                continue;
            }
            // terms until the geometric tail drops below 2^-(prec+40),
            // including the cluster population in the bound
            let t = (cl.radius.clone() / dist).to_f64();
            let needed = if t <= 0.0 {
                1
            } else {
                let bits = (self.prec as f64 + 40.0) * std::f64::consts::LN_2
                    + ((cl.count + 2) as f64).ln();
                ((bits / -t.ln()).ceil() as usize + 1).min(cl.moments.len())
            };
            let w = cdiv(&one, &base);
            let mut pw = w.clone();
            let mut s = Complex::with_val(prec, (0, 0));
            for m in 0..needed {
                s += cmul(&cl.moments[m], &pw);
                pw = cmul(&pw, &w);
            }
            match post {
                Some(f) => acc += cmul(&f, &s),
                None => acc += s,
            }
        }
        acc
    }

    /// Exact direct sum over the subtree of one cluster prefix.
    fn rebuild_cluster(&self, cl: &PoleCluster, z: &Complex) -> Complex {
        let prec = self.prec;
        let rb = &self.rebuild;
        let ctx = WalkCtx {
            mats: &rb.mats,
            rank: rb.rank,
            letters: &rb.letters,
            banned: rb.banned,
            max_len: self.max_len,
            fp_a: &rb.fp_a,
            fp_b: &rb.fp_b,
        };
        let mut m = rb.mats[ctx.mat_index(cl.prefix[0])].clone();
        for &l in &cl.prefix[1..] {
            m = mat4_mul(&m, &rb.mats[ctx.mat_index(l)]);
        }
        let mut acc = Complex::with_val(prec, (0, 0));
        let mut buf = cl.prefix.clone();
        walk_extend(&ctx, &mut buf, &m, &mut |_, pa, pb| {
            if let PointP1::Finite(p) = pa {
                acc += cdiv(&Complex::with_val(prec, (1, 0)), &csub(z, &p));
            }
            if let PointP1::Finite(p) = pb {
                acc += cdiv(&Complex::with_val(prec, (-1, 0)), &csub(z, &p));
            }
        });
        acc
    }

    pub fn term_count(&self) -> usize {
        self.term_count
    }
}

struct WalkCtx<'a> {
    mats: &'a [[Complex; 4]],
    rank: usize,
    letters: &'a [Letter],
    banned: Letter,
    max_len: usize,
    fp_a: &'a PointP1,
    fp_b: &'a PointP1,
}

impl WalkCtx<'_> {
    fn mat_index(&self, l: Letter) -> usize {
        if l > 0 {
            (l - 1) as usize
        } else {
            self.rank + (-l - 1) as usize
        }
    }
}

fn apply_mat4(m: &[Complex; 4], p: &PointP1) -> PointP1 {
    match p {
        PointP1::Finite(z) => {
            let den = cadd(&cmul(&m[2], z), &m[3]);
            if norm_sqr(&den).is_zero() {
                PointP1::Infinity
            } else {
                PointP1::Finite(cdiv(&cadd(&cmul(&m[0], z), &m[1]), &den))
            }
        }
        PointP1::Infinity => {
            if norm_sqr(&m[2]).is_zero() {
                PointP1::Infinity
            } else {
                PointP1::Finite(cdiv(&m[0], &m[2]))
            }
        }
    }
}

/// Depth-first over reduced-word extensions of `buf`, emitting the
/// fixed-point images of every extension whose last letter is not banned.
/// `buf` carries the full word so far; `m` is its matrix.
fn walk_extend(
    ctx: &WalkCtx<'_>,
    buf: &mut Vec<Letter>,
    m: &[Complex; 4],
    emit: &mut dyn FnMut(&[Letter], PointP1, PointP1),
) {
    let prev = buf.last().copied().unwrap_or(0);
    for &l in ctx.letters {
        if prev != 0 && l == -prev {
            continue;
        }
        let prod = mat4_mul(m, &ctx.mats[ctx.mat_index(l)]);
        buf.push(l);
        if l != ctx.banned && l != -ctx.banned {
            emit(buf, apply_mat4(&prod, ctx.fp_a), apply_mat4(&prod, ctx.fp_b));
        }
        if buf.len() < ctx.max_len {
            walk_extend(ctx, buf, &prod, emit);
        }
        buf.pop();
    }
}

/// Coset images of the two fixed points of generator `index`, over all
/// reduced words of length <= max_len whose last letter is not the generator
/// or its inverse (the identity included).
pub fn omega(
    group: &MarkedSchottkyGroup,
    index: usize,
    max_len: usize,
) -> Result<DifferentialEvaluator> {
    if index < 1 || index > group.rank() {
        return Err(Error::InvalidParameter(format!(
            "generator index {index} out of range 1..={}",
            group.rank()
        )));
    }
    // circles are what the later integration needs; fail early without them
    let cert = certificate(group)?;
    let prec = group.precision();
    let fp = group.generator(index - 1).fixed_points()?;
    let rank = group.rank();

    let mut mats: Vec<[Complex; 4]> = Vec::new();
    for g in group.generators() {
        let [a, b, c, d] = g.entries();
        mats.push([a.clone(), b.clone(), c.clone(), d.clone()]);
    }
    for g in group.generators() {
        let [a, b, c, d] = g.entries();
        mats.push([d.clone(), -b.clone(), -c.clone(), a.clone()]);
    }
    let letters: Vec<Letter> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
    let banned = index as i32;
    // a representative starting with letter l maps everything into the disk
    // paired against l; clusters under an unbounded disk are stored in the
    // inverted coordinate
    let first_letter_unbounded = |l: Letter| -> bool {
        if l > 0 {
            cert.pairs[(l - 1) as usize].minus.unbounded
        } else {
            cert.pairs[(-l - 1) as usize].plus.unbounded
        }
    };
    let moment_count = ((prec as usize + 58) / 8 + 4).max(12);

    let mut direct: Vec<(Complex, Complex, Complex)> = Vec::new();
    let mut singles: Vec<(i32, Complex)> = Vec::new();
    let mut cluster_map: std::collections::BTreeMap<Vec<Letter>, PoleCluster> =
        std::collections::BTreeMap::new();
    let mut term_count = 0usize;

    let push_direct = |pa: PointP1, pb: PointP1,
                           singles: &mut Vec<(i32, Complex)>,
                           direct: &mut Vec<(Complex, Complex, Complex)>| {
        match (pa, pb) {
            (PointP1::Finite(p), PointP1::Finite(q)) => {
                direct.push((csub(&p, &q), cadd(&p, &q), cmul(&p, &q)));
            }
            (PointP1::Finite(p), PointP1::Infinity) => singles.push((1, p)),
            (PointP1::Infinity, PointP1::Finite(q)) => singles.push((-1, q)),
            (PointP1::Infinity, PointP1::Infinity) => {}
        }
    };

    // identity representative
    push_direct(fp.attractive.clone(), fp.repulsive.clone(), &mut singles, &mut direct);
    term_count += 1;

    if max_len >= 1 {
        let ident = [
            Complex::with_val(prec, (1, 0)),
            Complex::with_val(prec, (0, 0)),
            Complex::with_val(prec, (0, 0)),
            Complex::with_val(prec, (1, 0)),
        ];
        let ctx = WalkCtx {
            mats: &mats,
            rank,
            letters: &letters,
            banned,
            max_len,
            fp_a: &fp.attractive,
            fp_b: &fp.repulsive,
        };
        let one = Complex::with_val(prec, (1, 0));
        let mut buf: Vec<Letter> = Vec::with_capacity(max_len);
        walk_extend(&ctx, &mut buf, &ident, &mut |word, pa, pb| {
            term_count += 1;
            if word.len() <= CLUSTER_DEPTH {
                push_direct(pa, pb, &mut singles, &mut direct);
                return;
            }
            let key: Vec<Letter> = word[..CLUSTER_DEPTH].to_vec();
            let inverted = first_letter_unbounded(key[0]);
            let cl = cluster_map.entry(key.clone()).or_insert_with(|| PoleCluster {
                prefix: key,
                inverted,
                center: Complex::with_val(prec, (0, 0)),
                radius: Float::with_val(prec, 0),
                count: 0,
                moments: vec![Complex::with_val(prec, (0, 0)); moment_count],
            });
            let side = |p: PointP1, sign: i32, cl: &mut PoleCluster| {
                let q = match (&p, cl.inverted) {
                    (PointP1::Finite(v), false) => v.clone(),
                    (PointP1::Finite(v), true) => cdiv(&one, v),
                    (PointP1::Infinity, true) => Complex::with_val(prec, (0, 0)),
                    (PointP1::Infinity, false) => {
                        return;
                    }
                };
                if cl.count == 0 && sign > 0 {
                    cl.center = q.clone();
                }
                let u = csub(&q, &cl.center);
                let ua = cabs(&u);
                if ua > cl.radius {
                    cl.radius = ua;
                }
                let sgn = Complex::with_val(prec, (sign, 0));
                let mut pw = sgn;
                for m in 0..cl.moments.len() {
                    cl.moments[m] += &pw;
                    pw = cmul(&pw, &u);
                }
            };
            side(pa, 1, cl);
            side(pb, -1, cl);
            cl.count += 1;
        });
    }
    let clusters: Vec<PoleCluster> = cluster_map.into_values().collect();
    Ok(DifferentialEvaluator {
        index,
        max_len,
        prec,
        direct,
        singles,
        clusters,
        term_count,
        rebuild: RebuildData {
            mats,
            rank,
            letters,
            banned,
            fp_a: fp.attractive,
            fp_b: fp.repulsive,
        },
    })
}

fn mat4_mul(x: &[Complex; 4], y: &[Complex; 4]) -> [Complex; 4] {
    [
        cadd(&cmul(&x[0], &y[0]), &cmul(&x[1], &y[2])),
        cadd(&cmul(&x[0], &y[1]), &cmul(&x[1], &y[3])),
        cadd(&cmul(&x[2], &y[0]), &cmul(&x[3], &y[2])),
        cadd(&cmul(&x[2], &y[1]), &cmul(&x[3], &y[3])),
    ]
}

fn certificate(group: &MarkedSchottkyGroup) -> Result<SchottkyCertificate> {
    validate_schottky(group).map_err(|_| Error::CertificateRequired)
}

/// Counterclockwise trapezoid-rule contour integral over a circle,
/// spectrally accurate for integrands analytic near the circle. Node values
/// are computed in parallel but reduced in index order, so the result does
/// not depend on the thread count.
pub fn contour_integral<F>(f: F, circle: &Circle, nodes: usize) -> Complex
where
    F: Fn(&Complex) -> Complex + Sync,
{
    let prec = circle.radius.prec();
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let values: Vec<Complex> = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let theta = two_pi.clone() * Float::with_val(prec, k as u32)
                / Float::with_val(prec, nodes as u32);
            let (s, c) = theta.sin_cos(Float::new(prec));
            let dir = Complex::with_val(prec, (c, s));
            let z = cadd(&circle.center, &cmul(&dir, &Complex::with_val(prec, (circle.radius.clone(), 0))));
            // f(z) * i r e^{i theta}
            let tangent = cmul(&Complex::with_val(prec, (0, circle.radius.clone())), &dir);
            cmul(&f(&z), &tangent)
        })
        .collect();
    let mut acc = CompensatedComplex::new(prec);
    for v in &values {
        acc.add(v);
    }
    let h = two_pi / Float::with_val(prec, nodes as u32);
    cmul(&acc.value(), &Complex::with_val(prec, (h, 0)))
}

/// The circle integral oriented as the positive boundary of the common
/// exterior domain.
pub fn oriented_contour_integral<F>(f: F, circle: &Circle, nodes: usize) -> Complex
where
    F: Fn(&Complex) -> Complex + Sync,
{
    let v = contour_integral(f, circle, nodes);
    if circle.orientation_sign() >= 0 {
        v
    } else {
        -v
    }
}

/// The matrix `M_ij = (1/2 pi i) contour_j omega_i` and its maximum
/// deviation from the identity.
#[derive(Debug, Clone)]
pub struct NormalizationReport {
    pub matrix: Vec<Vec<Complex>>,
    pub max_deviation: Float,
    pub max_len: usize,
    pub nodes: usize,
}

pub fn check_normalization(
    group: &MarkedSchottkyGroup,
    max_len: usize,
    nodes: usize,
) -> Result<NormalizationReport> {
    let cert = certificate(group)?;
    let prec = group.precision();
    let g = group.rank();
    let evals: Vec<DifferentialEvaluator> = (1..=g)
        .map(|i| omega(group, i, max_len))
        .collect::<Result<_>>()?;
    let two_pi_i = Complex::with_val(prec, (0, Float::with_val(prec, rug::float::Constant::Pi) * 2u32));
    let mut matrix = Vec::with_capacity(g);
    let mut max_dev = Float::with_val(prec, 0);
    for ev in &evals {
        let mut row = Vec::with_capacity(g);
        for (j, pair) in cert.pairs.iter().enumerate() {
            let total = oriented_contour_integral(|z| ev.eval(z), &pair.plus, nodes);
            let entry = cdiv(&total, &two_pi_i);
            let target = if ev.index == j + 1 { 1 } else { 0 };
            let dev = cabs(&csub(&entry, &Complex::with_val(prec, (target, 0))));
            if dev > max_dev {
                max_dev = dev.clone();
            }
            row.push(entry);
        }
        matrix.push(row);
    }
    Ok(NormalizationReport { matrix, max_deviation: max_dev, max_len, nodes })
}

/// Symmetrized period matrix with the observed asymmetry.
#[derive(Debug, Clone)]
pub struct PeriodMatrix {
    pub tau: Vec<Vec<Complex>>,
    pub asymmetry: Float,
    pub max_len: usize,
    pub nodes: usize,
}

impl PeriodMatrix {
    /// Positive definiteness of Im(tau) via leading principal minors.
    pub fn im_positive_definite(&self) -> bool {
        let g = self.tau.len();
        let prec = self.asymmetry.prec();
        // build Im(tau) as Float matrix and run a tiny Cholesky
        let mut a: Vec<Vec<Float>> = (0..g)
            .map(|i| (0..g).map(|j| self.tau[i][j].imag().clone()).collect())
            .collect();
        for k in 0..g {
            if !(a[k][k].clone() > 0) {
                return false;
            }
            let pivot = a[k][k].clone();
            for i in (k + 1)..g {
                let f = a[i][k].clone() / pivot.clone();
                for j in k..g {
                    let d = fmul(&f, &a[k][j]);
                    a[i][j] -= d;
                }
            }
            let _ = prec;
        }
        true
    }
}

/// Straight-line path checked against all circles; the endpoints are allowed
/// to touch their own circles.
fn segment_is_clear(
    a: &Complex,
    b: &Complex,
    circles: &[&Circle],
    start_circle: usize,
    end_circle: usize,
) -> bool {
    let prec = a.prec().0;
    let samples = 96u32;
    for t in 1..samples {
        let tf = Float::with_val(prec, t) / Float::with_val(prec, samples);
        let z = cadd(a, &cmul(&csub(b, a), &Complex::with_val(prec, (tf.clone(), 0))));
        for (ci, c) in circles.iter().enumerate() {
            let mut allow = -c.radius.clone() / 1000u32;
            let near_start = ci == start_circle && t <= samples / 8;
            let near_end = ci == end_circle && t >= samples - samples / 8;
            if near_start || near_end {
                allow = c.radius.clone() / 100u32;
            }
            if c.disk_depth(&z) > allow {
                return false;
            }
        }
    }
    true
}

/// 16-point Gauss-Legendre nodes and weights on [-1, 1] at the working
/// precision, by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre_16(prec: u32) -> Vec<(Float, Float)> {
    let n = 16u32;
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let mut out = Vec::with_capacity(n as usize);
    for k in 1..=n {
        // Chebyshev-style initial guess
        let mut x = Float::with_val(
            prec,
            (pi.clone() * (Float::with_val(prec, 4 * k - 1)) / Float::with_val(prec, 4 * n + 2))
                .cos(),
        );
        for _ in 0..200 {
            // evaluate P_n and P_n' by the three-term recurrence
            let (p, dp) = legendre(&x, n, prec);
            let step = p.clone() / dp.clone();
            x -= step.clone();
            if step.abs() < Float::with_val(prec, Float::with_val(prec, 2).pow(-(prec as i32) + 4))
            {
                break;
            }
        }
        let (_, dp) = legendre(&x, n, prec);
        let w = Float::with_val(prec, 2)
            / ((Float::with_val(prec, 1) - fmul(&x, &x)) * fmul(&dp, &dp));
        out.push((-x, w));
    }
    out
}

fn legendre(x: &Float, n: u32, prec: u32) -> (Float, Float) {
    let mut p0 = Float::with_val(prec, 1);
    let mut p1 = x.clone();
    for m in 2..=n {
        let mf = Float::with_val(prec, m);
        let p2 = (fmul(x, &p1) * (Float::with_val(prec, 2 * m - 1)) - p0.clone() * (mf.clone() - 1u32))
            / mf;
        p0 = p1;
        p1 = p2;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    let num = (fmul(x, &p1) - p0) * Float::with_val(prec, n);
    let den = fmul(x, x) - Float::with_val(prec, 1);
    (p1.clone(), num / den)
}

/// Composite Gauss-Legendre integral of f along the segment [a, b].
fn segment_integral<F>(f: &F, a: &Complex, b: &Complex, panels: usize, prec: u32) -> Complex
where
    F: Fn(&Complex) -> Complex + Sync,
{
    let gl = gauss_legendre_16(prec);
    let d = csub(b, a);
    let jobs: Vec<(usize, usize)> = (0..panels)
        .flat_map(|p| (0..gl.len()).map(move |k| (p, k)))
        .collect();
    let values: Vec<Complex> = jobs
        .par_iter()
        .map(|(p, k)| {
            let (x, w) = &gl[*k];
            // map [-1,1] to [p/panels, (p+1)/panels]
            let lo = Float::with_val(prec, *p as u32) / Float::with_val(prec, panels as u32);
            let width = Float::with_val(prec, 1) / Float::with_val(prec, panels as u32);
            let t = lo + width.clone() * (x.clone() + 1u32) / 2u32;
            let z = cadd(a, &cmul(&d, &Complex::with_val(prec, (t, 0))));
            let scale = width * w.clone() / 2u32;
            cmul(&f(&z), &Complex::with_val(prec, (scale, 0)))
        })
        .collect();
    let mut acc = CompensatedComplex::new(prec);
    for v in &values {
        acc.add(v);
    }
    cmul(&acc.value(), &d)
}

/// tau_ij = (1/2 pi i) * integral of omega_i from a base point on circle j
/// to its generator image on the paired circle, along a straight path in the
/// closure of the common exterior.
pub fn period_matrix(
    group: &MarkedSchottkyGroup,
    max_len: usize,
    nodes: usize,
) -> Result<PeriodMatrix> {
    let cert = certificate(group)?;
    let prec = group.precision();
    let g = group.rank();
    let evals: Vec<DifferentialEvaluator> = (1..=g)
        .map(|i| omega(group, i, max_len))
        .collect::<Result<_>>()?;
    let circles: Vec<&Circle> = cert.pairs.iter().flat_map(|p| [&p.plus, &p.minus]).collect();
    let two_pi_i = Complex::with_val(prec, (0, Float::with_val(prec, rug::float::Constant::Pi) * 2u32));
    let panels = (nodes / 16).max(4);

    let mut raw = vec![vec![Complex::with_val(prec, (0, 0)); g]; g];
    for j in 0..g {
        let plus = &cert.pairs[j].plus;
        let start_idx = 2 * j;
        let end_idx = 2 * j + 1;
        // pick the first base angle whose straight path stays clear
        let mut chosen: Option<(Complex, Complex)> = None;
        'angles: for k in 0..32u32 {
            let ang = Float::with_val(prec, rug::float::Constant::Pi) * 2u32
                * Float::with_val(prec, k)
                / Float::with_val(prec, 32);
            let z0 = plus.point_at(&ang);
            let w = match group.generator(j).apply(&z0) {
                PointP1::Finite(w) => w,
                PointP1::Infinity => continue 'angles,
            };
            if segment_is_clear(&z0, &w, &circles, start_idx, end_idx) {
                chosen = Some((z0, w));
                break 'angles;
            }
        }
        let (z0, w) = chosen.ok_or(Error::PathCrossesCircle)?;
        for i in 0..g {
            let ev = &evals[i];
            let total = segment_integral(&|z: &Complex| ev.eval(z), &z0, &w, panels, prec);
            raw[i][j] = cdiv(&total, &two_pi_i);
        }
    }
    let mut asym = Float::with_val(prec, 0);
    let mut tau = vec![vec![Complex::with_val(prec, (0, 0)); g]; g];
    for i in 0..g {
        for j in 0..g {
            let s = cadd(&raw[i][j], &raw[j][i]);
            tau[i][j] = cdiv(&s, &Complex::with_val(prec, (2, 0)));
            let d = cabs(&csub(&raw[i][j], &raw[j][i]));
            if d > asym {
                asym = d;
            }
        }
    }
    Ok(PeriodMatrix { tau, asymmetry: asym, max_len, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prec::{complex_from_f64, complex_one};
    use crate::samples;

    const P: u32 = 128;

    #[test]
    fn trapezoid_reference_integrals() {
        let unit = Circle::new(Complex::with_val(P, (0, 0)), Float::with_val(P, 1));
        let v = contour_integral(|z| cdiv(&complex_one(P), z), &unit, 64);
        let two_pi = Float::with_val(P, rug::float::Constant::Pi) * 2u32;
        assert!(v.real().clone().abs() < Float::with_val(P, 1e-35));
        assert!((v.imag().clone() - &two_pi).abs() < Float::with_val(P, 1e-35));
        let w = contour_integral(|z| z.clone(), &unit, 64);
        assert!(cabs(&w) < Float::with_val(P, 1e-35));
    }

    #[test]
    fn trapezoid_node_doubling() {
        // analytic test function with a pole at 0.3 inside |z| = 1
        let unit = Circle::new(Complex::with_val(P, (0, 0)), Float::with_val(P, 1));
        let p = complex_from_f64(0.3, 0.1, P);
        let f = |z: &Complex| cdiv(&z.clone().exp(), &csub(z, &p));
        let a = contour_integral(f, &unit, 1024);
        let b = contour_integral(f, &unit, 2048);
        assert!(cabs(&csub(&a, &b)) < Float::with_val(P, 1e-12));
    }

    #[test]
    fn quadrature_matches_residue_counts() {
        // sum of 1/(z - p) terms: the oriented integral counts poles in the
        // paired disk with orientation sign
        let c = Circle::new(complex_from_f64(1.0, 0.0, P), Float::with_val(P, 0.5));
        let inside = complex_from_f64(1.2, 0.1, P);
        let outside = complex_from_f64(3.0, 0.0, P);
        let f = |z: &Complex| {
            cadd(
                &cdiv(&complex_one(P), &csub(z, &inside)),
                &cdiv(&complex_one(P), &csub(z, &outside)),
            )
        };
        let v = oriented_contour_integral(f, &c, 256);
        let two_pi = Float::with_val(P, rug::float::Constant::Pi) * 2u32;
        // bounded circle: boundary of the exterior runs clockwise
        assert!((v.imag().clone() + &two_pi).abs() < Float::with_val(P, 1e-25));
    }

    #[test]
    fn rank1_omega_is_exact_pair() {
        let group = samples::rank1_group(P);
        let ev = omega(&group, 1, 6).unwrap();
        // single coset: exactly one pole pair at the fixed points +-1
        assert_eq!(ev.term_count(), 1);
        let z = complex_from_f64(0.2, 0.3, P);
        let direct = csub(
            &cdiv(&complex_one(P), &csub(&z, &complex_from_f64(1.0, 0.0, P))),
            &cdiv(&complex_one(P), &csub(&z, &complex_from_f64(-1.0, 0.0, P))),
        );
        assert!(cabs(&csub(&ev.eval(&z), &direct)) < Float::with_val(P, 1e-35));
    }

    #[test]
    fn rank1_normalization_is_identity() {
        let group = samples::rank1_group(P);
        let rep = check_normalization(&group, 4, 256).unwrap();
        assert!(rep.max_deviation.to_f64() < 1e-25);
    }

    #[test]
    fn group_a_normalization_small_truncation() {
        let group = samples::group_a(P);
        let rep = check_normalization(&group, 4, 512).unwrap();
        assert!(rep.max_deviation.to_f64() < 1e-6, "dev {}", rep.max_deviation.to_f64());
        // deeper truncation never hurts
        let rep2 = check_normalization(&group, 6, 512).unwrap();
        assert!(rep2.max_deviation <= rep.max_deviation.clone() + Float::with_val(P, 1e-12));
    }

    #[test]
    fn omega_shell_convergence() {
        let group = samples::group_a(P);
        let z = complex_from_f64(-2.0, 1.5, P);
        let mut prev: Option<Complex> = None;
        let mut deltas = Vec::new();
        for len in [2usize, 3, 4, 5] {
            let ev = omega(&group, 2, len).unwrap();
            let v = ev.eval(&z);
            assert!(v.real().clone().is_finite());
            if let Some(p) = prev {
                deltas.push(cabs(&csub(&v, &p)));
            }
            prev = Some(v);
        }
        for w in deltas.windows(2) {
            assert!(w[1] < w[0], "shell increments must decay");
        }
    }

    #[test]
    fn certificate_is_required() {
        // a group whose first generator fixes infinity and has no circles
        let g1 = crate::moebius::MoebiusMap::from_int_entries(1, 0, 0, 25, P).unwrap();
        let g2 = crate::moebius::MoebiusMap::from_int_entries(66, -272, 34, -138, P).unwrap();
        let group = MarkedSchottkyGroup::new(vec![g1, g2], None, P).unwrap();
        assert!(matches!(omega(&group, 1, 3), Err(Error::CertificateRequired)));
    }

    #[test]
    fn rank1_period_matches_multiplier() {
        let group = samples::rank1_group(P);
        let pm = period_matrix(&group, 4, 1024).unwrap();
        let q = group.generator(0).multiplier().unwrap();
        let two_pi_i = Complex::with_val(P, (0, Float::with_val(P, rug::float::Constant::Pi) * 2u32));
        let e = cmul(&two_pi_i, &pm.tau[0][0]).exp();
        assert!(cabs(&csub(&e, &q)) < Float::with_val(P, 1e-10), "exp(2 pi i tau) = {e}");
        assert!(pm.im_positive_definite());
    }

    #[test]
    fn group_a_period_matrix_symmetric_posdef() {
        let group = samples::group_a(P);
        let pm = period_matrix(&group, 7, 768).unwrap();
        assert!(pm.asymmetry.to_f64() < 1e-6, "asymmetry {}", pm.asymmetry.to_f64());
        assert!(pm.im_positive_definite());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre_16(P);
        // integral of x^8 over [-1,1] = 2/9
        let mut acc = Float::with_val(P, 0);
        for (x, w) in &gl {
            acc += w.clone() * x.clone().pow(8);
        }
        assert!((acc - Float::with_val(P, 2) / 9u32).abs() < Float::with_val(P, 1e-35));
    }
}
