//! First-passage-time moments of the Ornstein-Uhlenbeck process with a
//! constant upper boundary.
//!
//! For the unit process `dx = -x dt + √2 dw` the moments of the hitting time
//! of `S` from `x0 < S` follow from the functions
//!
//! ```text
//! φ_k(z) = 2^-k Σ_{n≥1} (√2 z)^n Γ(n/2) ρ(n,k) / n!
//! ```
//!
//! with `ρ(n,1) = 1`, `ρ(n,2) = 2[ψ(n/2) - ψ(1)]` and
//! `ρ(n,3) = 3[(ψ(n/2) - ψ(1))² + ψ'(n/2) - ψ'(1)]`.
//! The series is entire but violently non-monotone: at `z = -30` the largest
//! term is near `1e195` while the sum is about `-4`. All summation therefore
//! happens in MPFR at a precision chosen from an `f64` envelope of the term
//! magnitudes.
//!
//! The same engine evaluates `E[Π φ_ki(X)]` for a random boundary `X`: the
//! (Cauchy-product) coefficients are paired with raw moments of `X` instead of
//! powers of `z`. A point boundary is just the constant law, so both paths
//! share every line of summation code.

use crate::error::{Error, Result};
use crate::threshold::{ln_abs_float, MomentCache, ThresholdDist};
use rug::float::Constant;
use rug::{Assign, Float};
use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::{Arc, Mutex, OnceLock};

/// Default hard cap on the length of a single φ series.
pub const DEFAULT_MAX_TERMS: usize = 6000;

/// Largest `|z|` accepted by point evaluations under default control.
pub const DEFAULT_DOMAIN_LIMIT: f64 = 40.0;

/// Truncation policy for the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Stop once three consecutive term bounds fall below `rel_tol * |sum|`.
    pub rel_tol: f64,
    /// Hard cap on the number of terms of a single φ series; Cauchy products
    /// of `r` factors may use `r` times as many.
    pub max_terms: usize,
    /// Point evaluations with `|z|` above this are refused.
    pub domain_limit: f64,
    rho2_factor: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            rel_tol: 1e-16,
            max_terms: DEFAULT_MAX_TERMS,
            domain_limit: DEFAULT_DOMAIN_LIMIT,
            rho2_factor: 1.0,
        }
    }
}

impl SeriesControl {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        let ctl = SeriesControl {
            rel_tol,
            max_terms,
            ..Default::default()
        };
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-3) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must lie in (0, 1e-3), got {}",
                self.rel_tol
            )));
        }
        if self.max_terms < 50 {
            return Err(Error::InvalidParameter(format!(
                "max_terms must be at least 50, got {}",
                self.max_terms
            )));
        }
        Ok(())
    }

    /// Test hook: scales every `ρ(n,2)` by `factor`.
    #[doc(hidden)]
    pub fn with_corrupted_rho2(mut self, factor: f64) -> Self {
        self.rho2_factor = factor;
        self
    }
}

/// Parameters of `dx = (μ - x)/θ dt + σ dw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl OuParams {
    pub fn new(mu: f64, theta: f64, sigma: f64) -> Result<Self> {
        if !(theta > 0.0) || !(sigma > 0.0) || !mu.is_finite() || !theta.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "OU parameters need theta > 0 and sigma > 0, got ({mu}, {theta}, {sigma})"
            )));
        }
        Ok(OuParams { mu, theta, sigma })
    }

    /// The space scale `α = √(2 / (θ σ²))` mapping onto the unit process.
    pub fn alpha(&self) -> f64 {
        (2.0 / (self.theta * self.sigma * self.sigma)).sqrt()
    }
}

/// `φ_k(z)` for `k ∈ {1, 2, 3}`.
///
/// ```
/// use imt_neuron::series::{phi_k, SeriesControl};
/// let ctl = SeriesControl::default();
/// assert_eq!(phi_k(0.0, 1, &ctl).unwrap(), 0.0);
/// // φ1'(0) = √(π/2), so φ1 is close to that slope near the origin.
/// let slope = phi_k(1e-6, 1, &ctl).unwrap() / 1e-6;
/// assert!((slope - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-5);
/// ```
pub fn phi_k(z: f64, k: u8, ctl: &SeriesControl) -> Result<f64> {
    Ok(phi_k_exact(z, k, ctl)?.to_f64())
}

fn check_order(k: u8) -> Result<()> {
    if (1..=3).contains(&k) {
        Ok(())
    } else {
        Err(Error::Domain(format!("phi order must be 1, 2 or 3, got {k}")))
    }
}

fn check_point(z: f64, ctl: &SeriesControl) -> Result<()> {
    if !z.is_finite() || z.abs() > ctl.domain_limit {
        return Err(Error::Domain(format!(
            "|z| = {} exceeds the series domain limit {}",
            z.abs(),
            ctl.domain_limit
        )));
    }
    Ok(())
}

pub(crate) fn phi_k_exact(z: f64, k: u8, ctl: &SeriesControl) -> Result<Float> {
    check_order(k)?;
    check_point(z, ctl)?;
    ctl.validate()?;
    let mut moments = MomentCache::new(ThresholdDist::Constant { value: z });
    expectation(&[k], &mut moments, ctl)
}

/// The `m`-th moment, `m ∈ {1, 2, 3}`, of the first-passage time of the unit
/// OU process (`μ = 0`, `θ = 1`, `σ = √2`) from `x0` to `S`.
///
/// ```
/// use imt_neuron::series::{tau_m_unit, SeriesControl};
/// let ctl = SeriesControl::default();
/// let t1 = tau_m_unit(1.5, -1.0, 1, &ctl).unwrap();
/// let t2 = tau_m_unit(1.5, -1.0, 2, &ctl).unwrap();
/// assert!((t1 - 5.516_781_878_707_372).abs() < 1e-9);
/// assert!(t2 >= t1 * t1);
/// ```
pub fn tau_m_unit(s: f64, x0: f64, m: u8, ctl: &SeriesControl) -> Result<f64> {
    Ok(tau_m_unit_exact(s, x0, m, ctl)?.to_f64())
}

pub(crate) fn tau_m_unit_exact(s: f64, x0: f64, m: u8, ctl: &SeriesControl) -> Result<Float> {
    check_order(m)?;
    if x0 > s {
        return Err(Error::Ordering { s, x0 });
    }
    if x0 == s {
        return Ok(Float::with_val(64, 0));
    }
    let at_s: Vec<Float> = (1..=m).map(|k| phi_k_exact(s, k, ctl)).collect::<Result<_>>()?;
    let at_x0: Vec<Float> = (1..=m).map(|k| phi_k_exact(x0, k, ctl)).collect::<Result<_>>()?;
    let p = working_prec(at_s.iter().chain(&at_x0));
    let boundary = BoundaryPhis {
        e1: at_s[0].clone(),
        e11: at_s.get(1).map(|_| Float::with_val(p, &at_s[0] * &at_s[0])),
        e2: at_s.get(1).cloned(),
        e111: at_s.get(2).map(|_| Float::with_val(p, &at_s[0] * &at_s[0]) * &at_s[0]),
        e12: at_s.get(2).map(|_| Float::with_val(p, &at_s[0] * &at_s[1])),
        e3: at_s.get(2).cloned(),
    };
    Ok(assemble(&boundary, &at_x0, m, p))
}

/// The scaling law: `τ_m(S, x0) = θ^m τ̃_m(αS, αx0)` for an OU process with
/// `μ = 0`. Callers translate coordinates first.
pub fn tau_m_scaled(s: f64, x0: f64, m: u8, ou: &OuParams, ctl: &SeriesControl) -> Result<f64> {
    if ou.mu != 0.0 {
        return Err(Error::Domain("tau_m_scaled expects mu = 0; translate coordinates first".into()));
    }
    let alpha = ou.alpha();
    Ok(ou.theta.powi(i32::from(m)) * tau_m_unit(alpha * s, alpha * x0, m, ctl)?)
}

/// Expectations over the boundary law of the φ products entering the
/// first three hitting-time moments.
pub(crate) struct BoundaryPhis {
    pub e1: Float,
    pub e11: Option<Float>,
    pub e2: Option<Float>,
    pub e111: Option<Float>,
    pub e12: Option<Float>,
    pub e3: Option<Float>,
}

/// Tower-rule assembly of `E[τ̃_m]` from boundary expectations and the φ
/// values at the start point.
///
/// With `a` for boundary terms and `b` for start-point terms:
/// `τ̃1 = a1 - b1`,
/// `τ̃2 = 2a11 - a2 - 2a1b1 + b2`,
/// `τ̃3 = 6a111 - 6a12 + a3 - 6a11b1 + 3a2b1 + 3a1b2 - b3`.
pub(crate) fn assemble(a: &BoundaryPhis, b: &[Float], m: u8, p: u32) -> Float {
    let f = |x: &Float| Float::with_val(p, x);
    let need = |x: &Option<Float>| f(x.as_ref().expect("boundary term computed for this order"));
    match m {
        1 => f(&a.e1) - &b[0],
        2 => {
            let mut t = need(&a.e11) * 2u32;
            t -= need(&a.e2);
            t -= f(&a.e1) * &b[0] * 2u32;
            t += &b[1];
            t
        }
        _ => {
            let mut t = need(&a.e111) * 6u32;
            t -= need(&a.e12) * 6u32;
            t += need(&a.e3);
            t -= need(&a.e11) * &b[0] * 6u32;
            t += need(&a.e2) * &b[0] * 3u32;
            t += f(&a.e1) * &b[1] * 3u32;
            t -= &b[2];
            t
        }
    }
}

pub(crate) fn working_prec<'a>(values: impl IntoIterator<Item = &'a Float>) -> u32 {
    values.into_iter().map(Float::prec).max().unwrap_or(64) + 64
}

// ---------------------------------------------------------------------------
// Coefficient tables

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct SeriesKey {
    // Sorted φ orders whose product is expanded; order 0 is the constant 1.
    factors: Vec<u8>,
    rho2_bits: u64,
}

impl SeriesKey {
    fn new(factors: &[u8], ctl: &SeriesControl) -> Self {
        let mut factors = factors.to_vec();
        factors.sort_unstable();
        let rho2_bits = if factors.contains(&2) {
            ctl.rho2_factor.to_bits()
        } else {
            1f64.to_bits()
        };
        SeriesKey { factors, rho2_bits }
    }

    fn rho2_factor(&self) -> f64 {
        f64::from_bits(self.rho2_bits)
    }

    /// Splits a product into its last factor and the remaining product.
    fn split(&self) -> (SeriesKey, SeriesKey) {
        let (last, rest) = self.factors.split_last().expect("product has factors");
        (
            SeriesKey { factors: rest.to_vec(), rho2_bits: self.rho2_bits },
            SeriesKey { factors: vec![*last], rho2_bits: self.rho2_bits },
        )
    }
}

#[derive(Debug)]
struct CoefTable {
    prec: u32,
    coefs: Vec<Float>,
}

#[derive(Default)]
struct Tables {
    coefs: HashMap<SeriesKey, Arc<CoefTable>>,
    envelopes: HashMap<SeriesKey, Arc<Vec<f64>>>,
}

fn tables() -> &'static Mutex<Tables> {
    static TABLES: OnceLock<Mutex<Tables>> = OnceLock::new();
    TABLES.get_or_init(Default::default)
}

/// Coefficients `0..len` of the series for `key` at precision `>= prec`.
fn coefficients(key: &SeriesKey, prec: u32, len: usize) -> Arc<CoefTable> {
    let cached = tables().lock().expect("coefficient cache poisoned").coefs.get(key).cloned();
    if let Some(t) = &cached {
        if t.prec >= prec && t.coefs.len() >= len {
            return Arc::clone(t);
        }
    }
    // Grow length and precision geometrically, each only when it falls
    // short, so that sweeps rebuild a table O(log) times.
    let table = match cached {
        Some(t) if t.prec >= prec => extend_table(key, &t, len.max(t.coefs.len() * 3 / 2)),
        Some(t) => build_table(key, prec.max(t.prec + t.prec / 4), len.max(t.coefs.len())),
        None => build_table(key, prec, len),
    };
    let table = Arc::new(table);
    tables()
        .lock()
        .expect("coefficient cache poisoned")
        .coefs
        .insert(key.clone(), Arc::clone(&table));
    table
}

fn build_table(key: &SeriesKey, prec: u32, len: usize) -> CoefTable {
    let empty = CoefTable { prec, coefs: Vec::new() };
    extend_table(key, &empty, len)
}

fn extend_table(key: &SeriesKey, base: &CoefTable, len: usize) -> CoefTable {
    let p = base.prec;
    let mut coefs = base.coefs.clone();
    match key.factors.len() {
        1 => {
            // Cheap to rebuild from scratch; the recurrences run from n = 1.
            coefs = phi_coefficients(key.factors[0], key.rho2_factor(), p, len.max(coefs.len()));
        }
        _ => {
            let (rest, last) = key.split();
            let a = coefficients(&rest, p, len);
            let b = coefficients(&last, p, len);
            let mut term = Float::new(p);
            while coefs.len() < len {
                let n = coefs.len();
                let mut acc = Float::with_val(p, 0);
                for i in 0..=n {
                    let (x, y) = (&a.coefs[i], &b.coefs[n - i]);
                    if x.is_zero() || y.is_zero() {
                        continue;
                    }
                    term.assign(x * y);
                    acc += &term;
                }
                coefs.push(acc);
            }
        }
    }
    CoefTable { prec: p, coefs }
}

/// `a_n = 2^-k g_n ρ(n,k)` for `n < len`, where `g_n = (√2)^n Γ(n/2) / n!`.
fn phi_coefficients(k: u8, rho2_factor: f64, prec: u32, len: usize) -> Vec<Float> {
    if k == 0 {
        return (0..len).map(|n| Float::with_val(prec, u32::from(n == 0))).collect();
    }
    // Carry a few guard bits for the O(n) rounding of the recurrences.
    let p = prec + 32;
    let mut out = Vec::with_capacity(len);
    out.push(Float::with_val(prec, 0));
    // Two interleaved recurrences, one for odd n and one for even n.
    let two_pi = Float::with_val(p, Constant::Pi) * 2u32;
    let mut g = [two_pi.sqrt(), Float::with_val(p, 1)];
    let ln2 = Float::with_val(p, Constant::Log2);
    let mut delta = [Float::with_val(p, &ln2 * -2i32), Float::with_val(p, 0)];
    let pi2 = Float::with_val(p, Constant::Pi).square();
    let mut omega = [pi2 / 3u32, Float::with_val(p, 0)];
    let rho2 = Float::with_val(p, rho2_factor);
    for n in 1..len {
        let slot = (n + 1) % 2;
        let coef = match k {
            1 => Float::with_val(p, &g[slot] / 2u32),
            2 => Float::with_val(p, &g[slot] * &delta[slot]) * &rho2 / 2u32,
            _ => {
                let mut r = Float::with_val(p, delta[slot].square_ref());
                r += &omega[slot];
                Float::with_val(p, &g[slot] * &r) * 3u32 / 8u32
            }
        };
        out.push(Float::with_val(prec, &coef));
        // Advance the slot from n to n + 2.
        let nu = n as u32;
        g[slot] *= nu;
        g[slot] /= (nu + 1) * (nu + 2);
        delta[slot] += Float::with_val(p, 2u32) / nu;
        omega[slot] -= Float::with_val(p, 4u32) / (u64::from(nu) * u64::from(nu)) as f64;
    }
    out
}

/// Upper bounds on `ln |a_n|` for `n = 0..=order`, in `f64`.
fn envelope(key: &SeriesKey, order: usize) -> Arc<Vec<f64>> {
    if let Some(e) = tables().lock().expect("coefficient cache poisoned").envelopes.get(key) {
        if e.len() > order {
            return Arc::clone(e);
        }
    }
    let len = order + 1;
    let env = match key.factors.len() {
        1 => phi_envelope(key.factors[0], key.rho2_factor(), len),
        _ => {
            let (rest, last) = key.split();
            log_convolve(&envelope(&rest, order), &envelope(&last, order), len)
        }
    };
    let env = Arc::new(env);
    tables()
        .lock()
        .expect("coefficient cache poisoned")
        .envelopes
        .insert(key.clone(), Arc::clone(&env));
    env
}

fn phi_envelope(k: u8, rho2_factor: f64, len: usize) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; len];
    if k == 0 {
        out[0] = 0.0;
        return out;
    }
    let mut ln_g = [0.5 * (2.0 * std::f64::consts::PI).ln(), 0.0];
    let mut delta = [-2.0 * LN_2, 0.0];
    let mut omega = [std::f64::consts::PI.powi(2) / 3.0, 0.0];
    let scale = rho2_factor.abs();
    for (n, slot_out) in out.iter_mut().enumerate().skip(1) {
        let slot = (n + 1) % 2;
        let rho = match k {
            1 => 1.0,
            2 => 2.0 * delta[slot].abs() * scale,
            _ => 3.0 * (delta[slot] * delta[slot] + omega[slot]).abs(),
        };
        // Pad by a relative 1e-9 to absorb rounding in the f64 recurrences.
        *slot_out = ln_g[slot] + rho.ln() - f64::from(k) * LN_2 + 1e-9 * n as f64;
        let nf = n as f64;
        ln_g[slot] += nf.ln() - (nf + 1.0).ln() - (nf + 2.0).ln();
        delta[slot] += 2.0 / nf;
        omega[slot] -= 4.0 / (nf * nf);
    }
    out
}

/// `ln Σ_i exp(a_i + b_{n-i})`, an upper bound on the log-magnitude of the
/// Cauchy-product coefficients.
fn log_convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let peak = (0..=n).map(|i| a[i] + b[n - i]).fold(f64::NEG_INFINITY, f64::max);
            if peak == f64::NEG_INFINITY {
                return peak;
            }
            let sum: f64 = (0..=n)
                .map(|i| a[i] + b[n - i] - peak)
                .filter(|&d| d > -60.0)
                .map(f64::exp)
                .sum();
            peak + sum.ln()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Summation

/// `E[Π_i φ_{k_i}(X)]` with `X` distributed as the law behind `moments`.
///
/// A constant law evaluates the plain product of φ values at that point.
pub(crate) fn expectation(factors: &[u8], moments: &mut MomentCache, ctl: &SeriesControl) -> Result<Float> {
    if factors.is_empty() || factors.iter().any(|&k| k > 3) {
        return Err(Error::Domain(format!("unsupported phi product {factors:?}")));
    }
    let finite = moments.dist().phi_product_finite(factors.len());
    if !finite {
        return Err(Error::Diverged);
    }
    let key = SeriesKey::new(factors, ctl);
    let cap = ctl.max_terms * factors.len().max(1);
    let env_c = envelope(&key, cap);
    let env_m = moments.ln_abs_bounds(cap);
    let bound: Vec<f64> = (0..=cap).map(|n| env_c[n] + env_m[n]).collect();
    if bound.iter().any(|b| b.is_nan() || *b == f64::INFINITY) {
        return Err(Error::SeriesDidNotConverge { terms: 0 });
    }
    let (peak_n, peak) = bound
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (n, &b)| if b > acc.1 { (n, b) } else { acc });
    if peak == f64::NEG_INFINITY {
        // Every term vanishes, e.g. a point boundary at the origin.
        return Ok(Float::with_val(64, 0));
    }
    if peak_n + 50 > cap {
        return Err(Error::SeriesDidNotConverge { terms: cap });
    }

    let guard = 96 + (cap as f64).log2().ceil() as u32;
    let mut prec = guard + (peak.max(0.0) / LN_2).ceil() as u32;
    for _ in 0..4 {
        // Terms needed before the bound has dropped 2^-(prec - 40) below its peak.
        let drop = f64::from(prec.saturating_sub(40)) * LN_2;
        let len = (peak_n..=cap.saturating_sub(2))
            .find(|&n| bound[n..n + 3].iter().all(|&b| b < peak - drop))
            .map_or(cap, |n| n + 4)
            .min(cap)
            + 1;
        let coefs = coefficients(&key, prec, len);
        moments.ensure(prec, len - 1);
        let ln_tol = ctl.rel_tol.ln();
        let mut sum = Float::with_val(prec, 0);
        let mut term = Float::new(prec);
        let mut ln_max_term = f64::NEG_INFINITY;
        let mut quiet = 0;
        let mut finished = None;
        for n in 1..len {
            let c = &coefs.coefs[n];
            if !c.is_zero() {
                term.assign(c * moments.get(n));
                ln_max_term = ln_max_term.max(ln_abs_float(&term));
                sum += &term;
            }
            let ln_sum = ln_abs_float(&sum);
            if n >= peak_n && bound[n] <= ln_tol + ln_sum {
                quiet += 1;
                if quiet == 3 {
                    finished = Some(n);
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        let ln_sum = ln_abs_float(&sum);
        let lost_bits = if sum.is_zero() {
            f64::from(prec)
        } else {
            (ln_max_term - ln_sum) / LN_2
        };
        if lost_bits > f64::from(prec) - 80.0 && !(sum.is_zero() && ln_max_term == f64::NEG_INFINITY) {
            prec = guard + lost_bits.max(0.0).ceil() as u32 + 64;
            if sum.is_zero() {
                prec *= 2;
            }
            continue;
        }
        return match finished {
            Some(_) => Ok(sum),
            None if len > cap => Err(Error::SeriesDidNotConverge { terms: cap }),
            None => Err(Error::SeriesDidNotConverge { terms: len }),
        };
    }
    Err(Error::SeriesDidNotConverge { terms: cap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    #[test]
    fn control_validation() {
        assert!(SeriesControl::new(1e-3, 100).is_err());
        assert!(SeriesControl::new(1e-8, 49).is_err());
        assert!(SeriesControl::new(1e-8, 50).is_ok());
    }

    #[test]
    fn phi_vanishes_at_origin() {
        for k in 1..=3 {
            assert_eq!(phi_k(0.0, k, &ctl()).unwrap(), 0.0);
        }
    }

    #[test]
    fn bad_orders_and_points_are_rejected() {
        assert!(matches!(phi_k(1.0, 0, &ctl()), Err(Error::Domain(_))));
        assert!(matches!(phi_k(1.0, 4, &ctl()), Err(Error::Domain(_))));
        assert!(matches!(phi_k(40.5, 1, &ctl()), Err(Error::Domain(_))));
        assert!(phi_k(-40.0, 1, &ctl()).is_ok());
    }

    #[test]
    fn odd_part_two_ways() {
        // φ1(z) - φ1(-z) keeps only the odd terms 2 a_n z^n.
        let z: f64 = 1.0;
        let direct = phi_k(z, 1, &ctl()).unwrap() - phi_k(-z, 1, &ctl()).unwrap();
        let coefs = phi_coefficients(1, 1.0, 128, 80);
        let odd: f64 = (1..80).step_by(2).map(|n| 2.0 * coefs[n].to_f64() * z.powi(n as i32)).sum();
        assert!((direct - odd).abs() < 1e-15 * odd.abs());
    }

    #[test]
    fn frozen_reference_values() {
        // Independent fine-grid integration of the moment ODEs T_m'' - x T_m' = -m T_{m-1}.
        let c = ctl();
        let t1 = tau_m_unit(1.5, -1.0, 1, &c).unwrap();
        let t2 = tau_m_unit(1.5, -1.0, 2, &c).unwrap();
        let t3 = tau_m_unit(1.5, -1.0, 3, &c).unwrap();
        assert!((t1 / 5.516_781_878_707_372 - 1.0).abs() < 1e-10, "{t1}");
        assert!((t2 / 53.627_490_424_848_15 - 1.0).abs() < 1e-10, "{t2}");
        assert!((t3 / 772.113_192_114_564_4 - 1.0).abs() < 1e-10, "{t3}");
    }

    #[test]
    fn far_negative_start_is_stable() {
        // Terms reach ~1e195 but the function grows only logarithmically.
        let a = phi_k(-30.0, 1, &ctl()).unwrap();
        let b = phi_k(-31.0, 1, &ctl()).unwrap();
        assert!(a < 0.0 && b < a);
        assert!((a - b) < 0.1);
    }

    #[test]
    fn equal_endpoints_give_zero() {
        for m in 1..=3 {
            assert_eq!(tau_m_unit(0.7, 0.7, m, &ctl()).unwrap(), 0.0);
        }
        assert!(matches!(tau_m_unit(0.0, 1.0, 1, &ctl()), Err(Error::Ordering { .. })));
    }

    #[test]
    fn scaled_requires_centred_process() {
        let ou = OuParams::new(0.1, 1.0, 1.0).unwrap();
        assert!(tau_m_scaled(1.0, 0.0, 1, &ou, &ctl()).is_err());
    }

    #[test]
    fn product_with_one_is_identity() {
        // Order 0 is the constant series 1; multiplying by it must be exact.
        for d in [
            ThresholdDist::Gaussian { mean: 0.8, std: 0.3 },
            ThresholdDist::exp_power_with_std(-1.2, 0.4, 3.0).unwrap(),
        ] {
            for k in 1..=2 {
                let mut m = MomentCache::new(d.clone());
                let plain = expectation(&[k], &mut m, &ctl()).unwrap().to_f64();
                let with_one = expectation(&[0, k], &mut m, &ctl()).unwrap().to_f64();
                assert!((plain - with_one).abs() <= 1e-15 * plain.abs(), "{plain} vs {with_one}");
            }
        }
    }

    #[test]
    fn constant_product_equals_product_of_points() {
        let s = 1.3;
        let mut m = MomentCache::new(ThresholdDist::Constant { value: s });
        let e11 = expectation(&[1, 1], &mut m, &ctl()).unwrap().to_f64();
        let e12 = expectation(&[1, 2], &mut m, &ctl()).unwrap().to_f64();
        let p1 = phi_k(s, 1, &ctl()).unwrap();
        let p2 = phi_k(s, 2, &ctl()).unwrap();
        assert!((e11 / (p1 * p1) - 1.0).abs() < 1e-14);
        assert!((e12 / (p1 * p2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn heavy_gaussian_boundary_diverges() {
        // E[φ1(X)^2] needs α·std < 1/√2.
        let ok = ThresholdDist::Gaussian { mean: 1.0, std: 0.6 };
        let bad = ThresholdDist::Gaussian { mean: 1.0, std: 0.75 };
        assert!(expectation(&[1, 1], &mut MomentCache::new(ok), &ctl()).is_ok());
        assert!(matches!(
            expectation(&[1, 1], &mut MomentCache::new(bad), &ctl()),
            Err(Error::Diverged)
        ));
    }
}
