//! Infinite products over primitive conjugacy classes: the eta-like products
//! F_1 and F_k, the Ruelle zeta function and its modified values, the ratio
//! identity linking them, degenerating families, and the closed-form
//! constants built from zeta'(-1).
//!
//! Products are accumulated in log space, shell by shell in word length,
//! with compensated summation in canonical class order; the result is
//! exponentiated once. The reported tail estimate combines a geometric fit
//! of the last two shells with the exponent-cutoff remainder.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Complete, Complex, Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::moebius::{
    multiplier_from_trace_invariant, validate_schottky, Circle, MarkedSchottkyGroup, MoebiusMap,
    PointP1,
};
use crate::prec::{
    cabs, cadd, cdiv, cmul, complex_one, complex_zero, csub, exp2_neg, fmul,
    CompensatedComplex,
};
use crate::words::{letter_rank, Letter};

/// One word-length shell of a truncated product, on the log scale.
#[derive(Debug, Clone)]
pub struct ShellRow {
    pub length: usize,
    pub class_count: usize,
    /// sum of log factors contributed by classes of this length
    pub log_contribution: Complex,
    /// running log total including the prefactor
    pub cumulative: Complex,
}

/// A truncated product value with its truncation parameters, per-shell
/// breakdown and a heuristic tail estimate (absolute, on the value scale).
#[derive(Debug, Clone)]
pub struct TruncatedValue {
    pub value: Complex,
    pub max_len: usize,
    pub m_max: usize,
    pub tail_estimate: Float,
    pub shells: Vec<ShellRow>,
    pub warnings: Vec<String>,
}

/// All primitive conjugacy classes of the group with representative length
/// <= max_len, in canonical (length, lexicographic) order, each with its
/// multiplier. Enumeration is sharded across prefixes and re-sorted before
/// any floating-point use, so results are independent of thread count.
#[derive(Debug, Clone)]
pub struct ClassMultipliers {
    prec: u32,
    max_len: usize,
    /// (length, q, |q|) in canonical order
    entries: Vec<(u32, Complex, Float)>,
    q_top: Float,
}

struct Shard {
    prefix: Vec<Letter>,
    target_min: usize,
}

impl ClassMultipliers {
    pub fn compute(group: &MarkedSchottkyGroup, max_len: usize) -> Result<Self> {
        let prec = group.precision();
        let rank = group.rank();
        // floating generator entries and their inverses, paired with exact
        // complex determinants
        let mut mats: Vec<[Complex; 4]> = Vec::new();
        let mut dets: Vec<Complex> = Vec::new();
        for g in group.generators() {
            let [a, b, c, d] = g.entries();
            mats.push([a.clone(), b.clone(), c.clone(), d.clone()]);
            dets.push(g.determinant());
        }
        for g in group.generators() {
            let [a, b, c, d] = g.entries();
            // adjugate
            mats.push([d.clone(), -b.clone(), -c.clone(), a.clone()]);
            dets.push(g.determinant());
        }
        let mat_index = |l: Letter| -> usize {
            if l > 0 {
                (l - 1) as usize
            } else {
                rank + (-l - 1) as usize
            }
        };

        let letters: Vec<Letter> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
        // shard the enumeration by (first, second) letter prefix
        let mut shards: Vec<Shard> = Vec::new();
        for &f in &letters {
            shards.push(Shard { prefix: vec![f], target_min: 1 });
            for &s in &letters {
                if s == -f || letter_rank(s) < letter_rank(f) {
                    continue;
                }
                shards.push(Shard { prefix: vec![f, s], target_min: 2 });
            }
        }

        let results: Result<Vec<Vec<(Vec<Letter>, Complex)>>> = shards
            .par_iter()
            .map(|shard| -> Result<Vec<(Vec<Letter>, Complex)>> {
                let mut out = Vec::new();
                if shard.prefix.len() > max_len {
                    return Ok(out);
                }
                let mut buf = shard.prefix.clone();
                let mut stack: Vec<([Complex; 4], Complex)> = Vec::new();
                for &l in &shard.prefix {
                    let m = &mats[mat_index(l)];
                    let dm = &dets[mat_index(l)];
                    let (top, dtop) = match stack.last() {
                        Some((p, dp)) => (mat_mul(p, m), cmul(dp, dm)),
                        None => (m.clone(), dm.clone()),
                    };
                    stack.push((top, dtop));
                }
                // only pure depth-1 shards harvest length-1 words; depth-2
                // shards own everything below their two-letter prefix
                let harvest_here = shard.prefix.len() >= shard.target_min
                    && (shard.prefix.len() > 1 || shard.target_min == 1);
                if harvest_here && shard.prefix.len() == 1 {
                    harvest(&buf, &stack, prec, &mut out)?;
                }
                if shard.prefix.len() == 2 {
                    harvest(&buf, &stack, prec, &mut out)?;
                }
                if shard.prefix.len() == 1 {
                    return Ok(out);
                }
                dfs(
                    &mut buf, &mut stack, max_len, &letters, &mats, &dets, &mat_index, prec,
                    &mut out,
                )?;
                Ok(out)
            })
            .collect();
        let mut entries_raw: Vec<(Vec<Letter>, Complex)> = Vec::new();
        for v in results? {
            entries_raw.extend(v);
        }
        // canonical (length, lexicographic) order
        entries_raw.sort_by(|a, b| {
            a.0.len().cmp(&b.0.len()).then_with(|| {
                for (x, y) in a.0.iter().zip(&b.0) {
                    let o = letter_rank(*x).cmp(&letter_rank(*y));
                    if o != std::cmp::Ordering::Equal {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            })
        });
        let mut q_top = Float::with_val(prec, 0);
        let entries: Vec<(u32, Complex, Float)> = entries_raw
            .into_iter()
            .map(|(w, q)| {
                let qa = cabs(&q);
                if qa > q_top {
                    q_top = qa.clone();
                }
                (w.len() as u32, q, qa)
            })
            .collect();
        Ok(Self { prec, max_len, entries, q_top })
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest class multiplier modulus seen.
    pub fn q_top(&self) -> &Float {
        &self.q_top
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Complex, &Float)> {
        self.entries.iter().map(|(l, q, qa)| (*l as usize, q, qa))
    }

    /// Exponent cutoff making |q_top|^(m_max) smaller than 2^-prec.
    pub fn default_m_max(&self) -> usize {
        default_m_max(&self.q_top, self.prec)
    }

    /// All multipliers real and strictly inside (0, 1), to the guard band.
    pub fn assert_real_multipliers(&self) -> Result<()> {
        let guard = exp2_neg(self.prec / 2, self.prec);
        for (_, q, _) in &self.entries {
            if q.imag().clone().abs() > guard {
                return Err(Error::NotRealGroup(format!(
                    "class multiplier {} has a nonreal part",
                    q
                )));
            }
            if !(q.real().clone() > 0 && q.real().clone() < 1) {
                return Err(Error::NotRealGroup(format!(
                    "class multiplier {} is not in (0, 1)",
                    q
                )));
            }
        }
        Ok(())
    }
}

pub fn default_m_max(q_top: &Float, prec: u32) -> usize {
    if !(q_top.clone() > 0) {
        return 1;
    }
    let ln_q = q_top.clone().ln();
    if ln_q >= 0 {
        return 1;
    }
    let bits = Float::with_val(prec, prec + 2) * Float::with_val(prec, 2).ln();
    let m = (bits / -ln_q).ceil().to_f64() as usize;
    m.max(1)
}

fn mat_mul(x: &[Complex; 4], y: &[Complex; 4]) -> [Complex; 4] {
    [
        cadd(&cmul(&x[0], &y[0]), &cmul(&x[1], &y[2])),
        cadd(&cmul(&x[0], &y[1]), &cmul(&x[1], &y[3])),
        cadd(&cmul(&x[2], &y[0]), &cmul(&x[3], &y[2])),
        cadd(&cmul(&x[2], &y[1]), &cmul(&x[3], &y[3])),
    ]
}

fn harvest(
    buf: &[Letter],
    stack: &[([Complex; 4], Complex)],
    prec: u32,
    out: &mut Vec<(Vec<Letter>, Complex)>,
) -> Result<()> {
    let len = buf.len();
    let first = buf[0];
    let last = buf[len - 1];
    if len >= 2 && first == -last {
        return Ok(());
    }
    if !crate::words::is_canonical_primitive(buf) {
        return Ok(());
    }
    let (m, det) = stack.last().unwrap();
    let tr = cadd(&m[0], &m[3]);
    let t = cdiv(&cmul(&tr, &tr), det);
    let q = multiplier_from_trace_invariant(&t, prec)
        .map_err(|_| Error::MultiplierOnUnitCircle)?;
    out.push((buf.to_vec(), q));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    buf: &mut Vec<Letter>,
    stack: &mut Vec<([Complex; 4], Complex)>,
    max_len: usize,
    letters: &[Letter],
    mats: &[[Complex; 4]],
    dets: &[Complex],
    mat_index: &dyn Fn(Letter) -> usize,
    prec: u32,
    out: &mut Vec<(Vec<Letter>, Complex)>,
) -> Result<()> {
    if buf.len() >= max_len {
        return Ok(());
    }
    let first_rank = letter_rank(buf[0]);
    let prev = *buf.last().unwrap();
    for &l in letters {
        if letter_rank(l) < first_rank || l == -prev {
            continue;
        }
        let m = &mats[mat_index(l)];
        let dm = &dets[mat_index(l)];
        let (p, dp) = stack.last().unwrap();
        stack.push((mat_mul(p, m), cmul(dp, dm)));
        buf.push(l);
        harvest(buf, stack, prec, out)?;
        dfs(buf, stack, max_len, letters, mats, dets, mat_index, prec, out)?;
        buf.pop();
        stack.pop();
    }
    Ok(())
}

/// log(1 - q^e) summed for e = start..start+m_max, with terms below the
/// deterministic cutoff dropped, plus the tail bound for m > m_max.
fn class_log_factor(
    q: &Complex,
    q_abs: &Float,
    start: u32,
    m_max: usize,
    prec: u32,
    m_tail: &mut Float,
) -> Complex {
    let one = complex_one(prec);
    let cutoff = exp2_neg(prec + 40, prec);
    let mut acc = CompensatedComplex::new(prec);
    let mut power = Complex::with_val(prec, (1, 0));
    for _ in 0..start.saturating_sub(1) {
        power = cmul(&power, q);
    }
    let mut pa = Float::with_val(prec, 1);
    for _ in 0..start.saturating_sub(1) {
        pa = fmul(&pa, q_abs);
    }
    for _ in 0..=m_max {
        power = cmul(&power, q);
        pa = fmul(&pa, q_abs);
        if pa < cutoff {
            break;
        }
        let f = csub(&one, &power);
        acc.add(&f.ln());
    }
    // remaining |log(1-q^e)| <= |q|^(start+m_max+1)/(1-|q|)
    let rem = fmul(&pa, q_abs) / (Float::with_val(prec, 1) - q_abs.clone());
    *m_tail += rem.abs();
    acc.value()
}

struct ProductSpec<'a> {
    cm: &'a ClassMultipliers,
    max_len: usize,
    m_max: usize,
    exp_start: u32,
    prefactor_log: Complex,
}

fn eval_product(spec: ProductSpec<'_>, warnings: Vec<String>) -> Result<TruncatedValue> {
    let prec = spec.cm.precision();
    if spec.max_len > spec.cm.max_len() {
        return Err(Error::InvalidParameter(format!(
            "max_len {} exceeds the enumerated cutoff {}",
            spec.max_len,
            spec.cm.max_len()
        )));
    }
    let mut shells: Vec<ShellRow> = Vec::new();
    let mut total = CompensatedComplex::new(prec);
    total.add(&spec.prefactor_log);
    let mut m_tail = Float::with_val(prec, 0);
    let mut idx = 0usize;
    let entries: Vec<(usize, &Complex, &Float)> = spec.cm.iter().collect();
    for len in 1..=spec.max_len {
        let mut shell_acc = CompensatedComplex::new(prec);
        let mut count = 0usize;
        while idx < entries.len() && entries[idx].0 == len {
            let (_, q, qa) = entries[idx];
            let lf = class_log_factor(q, qa, spec.exp_start, spec.m_max, prec, &mut m_tail);
            shell_acc.add(&lf);
            total.add(&lf);
            count += 1;
            idx += 1;
        }
        shells.push(ShellRow {
            length: len,
            class_count: count,
            log_contribution: shell_acc.value(),
            cumulative: total.value(),
        });
    }
    // divergence heuristic: shell magnitudes must not grow over three
    // consecutive populated shells
    let mags: Vec<Float> = shells
        .iter()
        .filter(|s| s.class_count > 0)
        .map(|s| cabs(&s.log_contribution))
        .collect();
    let mut grow = 0usize;
    for w in mags.windows(2) {
        if w[1] > w[0] && !w[0].is_zero() {
            grow += 1;
            if grow >= 3 {
                return Err(Error::DivergenceSuspected { shells: 3 });
            }
        } else {
            grow = 0;
        }
    }
    let value = total.value().exp();
    let shell_tail = match mags.len() {
        0 => Float::with_val(prec, 0),
        1 => mags[0].clone(),
        n => {
            let last = &mags[n - 1];
            let prev = &mags[n - 2];
            if prev.is_zero() || last.is_zero() {
                last.clone()
            } else {
                let r = (last.clone() / prev).min(&Float::with_val(prec, 0.99));
                last.clone() * r.clone() / (Float::with_val(prec, 1) - r)
            }
        }
    };
    let tail_estimate = cabs(&value) * (shell_tail + m_tail);
    Ok(TruncatedValue {
        value,
        max_len: spec.max_len,
        m_max: spec.m_max,
        tail_estimate,
        shells,
        warnings,
    })
}

/// prod over classes of prod_{m=0..m_max} (1 - q^(1+m)), classes truncated
/// at word length max_len.
pub fn f1(group: &MarkedSchottkyGroup, max_len: usize, m_max: usize) -> Result<TruncatedValue> {
    let cm = ClassMultipliers::compute(group, max_len)?;
    f1_from(&cm, max_len, m_max)
}

pub fn f1_from(cm: &ClassMultipliers, max_len: usize, m_max: usize) -> Result<TruncatedValue> {
    eval_product(
        ProductSpec {
            cm,
            max_len,
            m_max,
            exp_start: 1,
            prefactor_log: complex_zero(cm.precision()),
        },
        Vec::new(),
    )
}

/// The k-shifted product with marking prefactor
/// `(1-q_1)^2 ... (1-q_1^(k-1))^2 (1-q_2^(k-1)) prod prod (1 - q^(k+m))`,
/// q_1, q_2 the multipliers of the first two marked generators.
pub fn fk(
    group: &MarkedSchottkyGroup,
    k: u32,
    max_len: usize,
    m_max: usize,
) -> Result<TruncatedValue> {
    let cm = ClassMultipliers::compute(group, max_len)?;
    fk_from(&cm, group, k, max_len, m_max)
}

pub fn fk_from(
    cm: &ClassMultipliers,
    group: &MarkedSchottkyGroup,
    k: u32,
    max_len: usize,
    m_max: usize,
) -> Result<TruncatedValue> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    if group.rank() < 2 {
        return Err(Error::NotNormalized(
            "the k-shifted product needs a marked group of rank >= 2".into(),
        ));
    }
    let prec = group.precision();
    let q1 = group.generator(0).multiplier()?;
    let q2 = group.generator(1).multiplier()?;
    let one = complex_one(prec);
    let mut pre = CompensatedComplex::new(prec);
    let mut p = one.clone();
    for _ in 1..k {
        p = cmul(&p, &q1);
        let lf = csub(&one, &p).ln();
        pre.add(&lf);
        pre.add(&lf);
    }
    let mut p2 = one.clone();
    for _ in 1..k {
        p2 = cmul(&p2, &q2);
    }
    pre.add(&csub(&one, &p2).ln());
    eval_product(
        ProductSpec {
            cm,
            max_len,
            m_max,
            exp_start: k,
            prefactor_log: pre.value(),
        },
        Vec::new(),
    )
}

/// prod over classes of (1 - |q|^s)^(-1), truncated at max_len. Absolutely
/// convergent for Re(s) >= 2; a warning string is attached below that.
pub fn ruelle_zeta(
    group: &MarkedSchottkyGroup,
    s: &Complex,
    max_len: usize,
) -> Result<TruncatedValue> {
    let cm = ClassMultipliers::compute(group, max_len)?;
    ruelle_zeta_from(&cm, s, max_len)
}

pub fn ruelle_zeta_from(
    cm: &ClassMultipliers,
    s: &Complex,
    max_len: usize,
) -> Result<TruncatedValue> {
    let prec = cm.precision();
    let mut warnings = Vec::new();
    if s.real().clone() < 2 {
        warnings.push(format!(
            "Re(s) = {} is below the absolute-convergence bound 2; values are heuristic",
            s.real().to_f64()
        ));
    }
    zeta_like(cm, s, max_len, complex_zero(prec), warnings)
}

fn zeta_like(
    cm: &ClassMultipliers,
    s: &Complex,
    max_len: usize,
    prefactor_log: Complex,
    warnings: Vec<String>,
) -> Result<TruncatedValue> {
    let prec = cm.precision();
    if max_len > cm.max_len() {
        return Err(Error::InvalidParameter(format!(
            "max_len {} exceeds the enumerated cutoff {}",
            max_len,
            cm.max_len()
        )));
    }
    let one = complex_one(prec);
    let mut shells: Vec<ShellRow> = Vec::new();
    let mut total = CompensatedComplex::new(prec);
    total.add(&prefactor_log);
    let entries: Vec<(usize, &Complex, &Float)> = cm.iter().collect();
    let mut idx = 0usize;
    for len in 1..=max_len {
        let mut shell_acc = CompensatedComplex::new(prec);
        let mut count = 0usize;
        while idx < entries.len() && entries[idx].0 == len {
            let (_, _, qa) = entries[idx];
            // |q|^s = exp(s ln|q|)
            let lnq = Complex::with_val(prec, (qa.clone().ln(), Float::new(prec)));
            let pw = cmul(s, &lnq).exp();
            let lf = -csub(&one, &pw).ln();
            shell_acc.add(&lf);
            total.add(&lf);
            count += 1;
            idx += 1;
        }
        shells.push(ShellRow {
            length: len,
            class_count: count,
            log_contribution: shell_acc.value(),
            cumulative: total.value(),
        });
    }
    let mags: Vec<Float> = shells
        .iter()
        .filter(|s| s.class_count > 0)
        .map(|s| cabs(&s.log_contribution))
        .collect();
    let mut grow = 0usize;
    for w in mags.windows(2) {
        if w[1] > w[0] && !w[0].is_zero() {
            grow += 1;
            if grow >= 3 {
                return Err(Error::DivergenceSuspected { shells: 3 });
            }
        } else {
            grow = 0;
        }
    }
    let value = total.value().exp();
    let shell_tail = match mags.len() {
        0 => Float::with_val(prec, 0),
        1 => mags[0].clone(),
        n => {
            let last = &mags[n - 1];
            let prev = &mags[n - 2];
            if prev.is_zero() || last.is_zero() {
                last.clone()
            } else {
                let r = (last.clone() / prev).min(&Float::with_val(prec, 0.99));
                last.clone() * r.clone() / (Float::with_val(prec, 1) - r)
            }
        }
    };
    let tail_estimate = cabs(&value) * shell_tail;
    Ok(TruncatedValue {
        value,
        max_len,
        m_max: 0,
        tail_estimate,
        shells,
        warnings,
    })
}

/// Z(k) times the marking correction `(1-q_1^k)^2 (1-q_2^k)/(1-q_2^(k-1))`.
pub fn modified_ruelle(
    group: &MarkedSchottkyGroup,
    k: u32,
    max_len: usize,
) -> Result<TruncatedValue> {
    let cm = ClassMultipliers::compute(group, max_len)?;
    modified_ruelle_from(&cm, group, k, max_len)
}

pub fn modified_ruelle_from(
    cm: &ClassMultipliers,
    group: &MarkedSchottkyGroup,
    k: u32,
    max_len: usize,
) -> Result<TruncatedValue> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    if group.rank() < 2 {
        return Err(Error::NotNormalized(
            "the modified zeta value needs a marked group of rank >= 2".into(),
        ));
    }
    let prec = group.precision();
    let q1 = group.generator(0).multiplier()?;
    let q2 = group.generator(1).multiplier()?;
    let one = complex_one(prec);
    let powk = |q: &Complex, e: u32| -> Complex {
        let mut p = one.clone();
        for _ in 0..e {
            p = cmul(&p, q);
        }
        p
    };
    let mut pre = CompensatedComplex::new(prec);
    let l1 = csub(&one, &powk(&q1, k)).ln();
    pre.add(&l1);
    pre.add(&l1);
    pre.add(&csub(&one, &powk(&q2, k)).ln());
    let den = csub(&one, &powk(&q2, k - 1)).ln();
    pre.add(&-den);
    let s = Complex::with_val(prec, (k, 0));
    zeta_like(cm, &s, max_len, pre.value(), Vec::new())
}

/// Outcome of the matched-truncation ratio check
/// modified_zeta(k) * F_k = F_{k+1}.
#[derive(Debug, Clone)]
pub struct RatioIdentityReport {
    pub residual: Float,
    pub combined_tail: Float,
    pub modified_zeta: TruncatedValue,
    pub f_k: TruncatedValue,
    pub f_k_plus_1: TruncatedValue,
}

/// |modified_zeta(k) * F_k - F_{k+1}| on a real marked group, every factor
/// truncated at the same max_len with the exponent cutoff tied to max_len so
/// the residual shrinks as the truncation deepens.
pub fn check_ratio_identity(
    group: &MarkedSchottkyGroup,
    k: u32,
    max_len: usize,
) -> Result<RatioIdentityReport> {
    if !group.is_real() {
        return Err(Error::NotRealGroup("a generator has nonreal entries".into()));
    }
    let cm = ClassMultipliers::compute(group, max_len)?;
    check_ratio_identity_from(&cm, group, k, max_len)
}

pub fn check_ratio_identity_from(
    cm: &ClassMultipliers,
    group: &MarkedSchottkyGroup,
    k: u32,
    max_len: usize,
) -> Result<RatioIdentityReport> {
    if !group.is_real() {
        return Err(Error::NotRealGroup("a generator has nonreal entries".into()));
    }
    cm.assert_real_multipliers()?;
    let m_max = max_len;
    let f_k = fk_from(cm, group, k, max_len, m_max)?;
    let f_k1 = fk_from(cm, group, k + 1, max_len, m_max)?;
    let zt = modified_ruelle_from(cm, group, k, max_len)?;
    let lhs = cmul(&zt.value, &f_k.value);
    let residual = cabs(&csub(&lhs, &f_k1.value));
    let combined_tail = cabs(&zt.value) * f_k.tail_estimate.clone()
        + cabs(&f_k.value) * zt.tail_estimate.clone()
        + f_k1.tail_estimate.clone();
    Ok(RatioIdentityReport {
        residual,
        combined_tail,
        modified_zeta: zt,
        f_k: f_k,
        f_k_plus_1: f_k1,
    })
}

/// The degenerating family: for slot = 0 the last generator is replaced by a
/// map with the same fixed points and multiplier t; for slot = i > 0 the tail
/// generators are bracketed by the two pinching maps through base points
/// outside all circles.
pub fn degenerate_family(
    group: &MarkedSchottkyGroup,
    slot: usize,
    t: &Complex,
) -> Result<MarkedSchottkyGroup> {
    let prec = group.precision();
    let g = group.rank();
    let ta = cabs(t);
    if ta.is_zero() || ta >= 1 {
        return Err(Error::InvalidParameter(
            "the pinching parameter must satisfy 0 < |t| < 1".into(),
        ));
    }
    if slot > g / 2 {
        return Err(Error::InvalidParameter(format!(
            "slot must lie in 0..={}",
            g / 2
        )));
    }
    if slot == 0 {
        let fp = group.generator(g - 1).fixed_points()?;
        let replaced = MoebiusMap::from_fixed_points(&fp.attractive, &fp.repulsive, t, prec)?;
        let mut gens: Vec<MoebiusMap> = group.generators().to_vec();
        gens[g - 1] = replaced;
        return MarkedSchottkyGroup::new(gens, None, prec);
    }
    let (a, a_prime) = pinch_base_points(group)?;
    let mu = MoebiusMap::from_fixed_points(
        &PointP1::Finite(a.clone()),
        &PointP1::Finite(a_prime.clone()),
        t,
        prec,
    )?;
    let mu_prime = MoebiusMap::from_fixed_points(
        &PointP1::Finite(a_prime),
        &PointP1::Finite(a),
        t,
        prec,
    )?;
    let mut gens: Vec<MoebiusMap> = Vec::with_capacity(g);
    for (i, gen) in group.generators().iter().enumerate() {
        if i < slot {
            gens.push(gen.clone());
        } else {
            gens.push(mu_prime.compose(gen).compose(&mu));
        }
    }
    MarkedSchottkyGroup::new(gens, None, prec)
}

/// Two deterministic real base points in the common exterior of the circles.
fn pinch_base_points(group: &MarkedSchottkyGroup) -> Result<(Complex, Complex)> {
    let prec = group.precision();
    let cert = validate_schottky(group)?;
    let circles: Vec<&Circle> = cert
        .pairs
        .iter()
        .flat_map(|p| [&p.plus, &p.minus])
        .collect();
    // candidate radii and angles over the bounded extent
    let mut extent = Float::with_val(prec, 1);
    for c in &circles {
        if !c.unbounded {
            let e = cabs(&c.center) + c.radius.clone();
            if e > extent {
                extent = e;
            }
        }
    }
    let unbounded_radius = circles
        .iter()
        .find(|c| c.unbounded)
        .map(|c| c.radius.clone() - cabs(&c.center));
    let pi2 = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let mut found: Vec<Complex> = Vec::new();
    'outer: for rs in 1..=24u32 {
        // radii sweep from just outside the bounded disks inward/outward
        let r = match &unbounded_radius {
            Some(ru) => {
                // between extent and ru
                let t = Float::with_val(prec, rs) / 25u32;
                extent.clone() + (ru.clone() - extent.clone()) * t
            }
            None => extent.clone() * (Float::with_val(prec, 1) + Float::with_val(prec, rs) / 8u32),
        };
        for as_ in 0..16u32 {
            let ang = pi2.clone() * Float::with_val(prec, as_) / 16u32;
            let (s, c) = ang.sin_cos(Float::new(prec));
            let z = Complex::with_val(prec, (c * r.clone(), s * r.clone()));
            let inside_any = circles.iter().any(|cc| cc.disk_depth(&z) > -cc.radius.clone() / 4u32);
            if !inside_any {
                found.push(z);
                if found.len() == 2 {
                    break 'outer;
                }
            }
        }
    }
    if found.len() < 2 {
        return Err(Error::InvalidParameter(
            "no base points clear of the circles were found".into(),
        ));
    }
    let b = found.pop().unwrap();
    let a = found.pop().unwrap();
    Ok((a, b))
}

/// The closed-form constants at genus g and weight k.
#[derive(Debug, Clone)]
pub struct ConstantsBundle {
    pub g: u32,
    pub k: u32,
    pub d_k: Integer,
    pub c_g: Float,
    pub c_g_k: Float,
    pub a_g: Float,
    pub zeta_prime_minus1: Float,
}

/// d_k = 6k^2 - 6k + 1 exactly; c_g, c_{g;k} and the Deligne-type constant
/// a(g) evaluated from zeta'(-1) = 1/12 - log A, A computed from the
/// Euler-Maclaurin expansion of the hyperfactorial.
pub fn constants(g: u32, k: u32, prec: u32) -> Result<ConstantsBundle> {
    if g < 2 || k < 2 {
        return Err(Error::InvalidParameter("constants need g >= 2 and k >= 2".into()));
    }
    let wp = prec + 64;
    let zp = zeta_prime_minus1(wp);
    let d_k = Integer::from(6u32) * Integer::from(k) * Integer::from(k)
        - Integer::from(6u32) * Integer::from(k)
        + 1u32;
    let gm1 = Float::with_val(wp, g - 1);
    let two_pi = Float::with_val(wp, rug::float::Constant::Pi) * 2u32;
    let c_g = two_pi.pow(2 * g as i32)
        * ((gm1.clone() * (Float::with_val(wp, 24) * zp.clone() + 1u32)) / 6u32).exp();
    let c_g_k = ((gm1.clone()
        * (Float::with_val(wp, 24) * zp.clone() + Float::with_val(wp, 2) * Float::with_val(wp, &d_k)
            - 1u32))
        / 6u32)
        .exp();
    let a_g = Float::with_val(wp, 2 * g as i32 - 2)
        * (Float::with_val(wp, -12) * zp.clone() + Float::with_val(wp, 0.5));
    Ok(ConstantsBundle {
        g,
        k,
        d_k,
        c_g: Float::with_val(prec, c_g),
        c_g_k: Float::with_val(prec, c_g_k),
        a_g: Float::with_val(prec, a_g),
        zeta_prime_minus1: Float::with_val(prec, zp),
    })
}

/// Exact Bernoulli numbers B_0..B_n by the defining recurrence.
pub fn bernoulli(n: usize) -> Vec<Rational> {
    let mut b: Vec<Rational> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m == 0 {
            b.push(Rational::from(1));
            continue;
        }
        // sum_{j=0..m} C(m+1, j) B_j = 0
        let mut acc = Rational::new();
        for (j, bj) in b.iter().enumerate() {
            let c = Integer::from(m as u32 + 1).binomial(j as u32);
            acc += (bj * &Rational::from(c)).complete();
        }
        b.push(-acc / Rational::from(m as u32 + 1));
    }
    b
}

/// zeta'(-1) = 1/12 - log A with log A from the asymptotic expansion
/// `log H(n) = log A + (n^2/2 + n/2 + 1/12) log n - n^2/4
///  - sum_j B_{2j} / ((2j)(2j-1)(2j-2) n^(2j-2))`
/// of the hyperfactorial H(n) = prod k^k.
pub fn zeta_prime_minus1(prec: u32) -> Float {
    let wp = prec + 32;
    const J: usize = 20;
    let bern = bernoulli(2 * J + 2);
    // grow n until the first dropped correction term is negligible
    let mut n: u64 = 512;
    loop {
        let err = Float::with_val(wp, &bern[2 * J + 2]).abs()
            / Float::with_val(wp, (2 * J + 2) as u32)
            / Float::with_val(wp, n).pow(2 * J as i32);
        if err < exp2_neg(prec + 16, wp) || n >= 1 << 22 {
            break;
        }
        n *= 2;
    }
    let nf = Float::with_val(wp, n);
    let mut log_h = Float::with_val(wp, 0);
    for k in 1..=n {
        log_h += Float::with_val(wp, k) * Float::with_val(wp, k).ln();
    }
    let ln_n = nf.clone().ln();
    let main = (nf.clone() * nf.clone() / 2u32 + nf.clone() / 2u32
        + Float::with_val(wp, Rational::from((1, 12))))
        * ln_n
        - nf.clone() * nf.clone() / 4u32;
    let mut corr = Float::with_val(wp, 0);
    for j in 2..=J {
        let denom = Float::with_val(wp, (2 * j * (2 * j - 1) * (2 * j - 2)) as u64)
            * nf.clone().pow(2 * j as i32 - 2);
        corr += Float::with_val(wp, &bern[2 * j]) / denom;
    }
    let log_a = log_h - main + corr;
    Float::with_val(prec, Float::with_val(wp, Rational::from((1, 12))) - log_a)
}
