//! Random-matrix machinery behind the walk.
//!
//! Each site contributes
//!
//! ```text
//!       | a b 0 |          | a+b  b |
//!   A = | a b 1 |      B = |  1   0 |      a = ω(-1)/ω(1), b = ω(-2)/ω(1)
//!       | a b 0 |
//! ```
//!
//! `A` is the offspring mean matrix of the branching process; `B` is the
//! classical companion matrix of the (2,1) walk. Their products share the
//! top Lyapunov exponent, whose sign decides recurrence. The geometric sums
//! of `A`-products parameterize the exact law of the branching process, its
//! limit law and the walk's speed.
//!
//! All products are accumulated as vector-matrix updates, never as full
//! matrix products.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::bpire::GenVector;
use crate::env::{Family, ParamPoint, SiteLaw, SiteSampler};
use crate::error::{Error, Result};
use crate::numeric::{fmt_sig, ln_multinomial, mean_stderr, count_log};
use crate::seeding::{domain, substream};
use crate::walk::SiteRange;

pub type Mat3 = [[f64; 3]; 3];
pub type Mat2 = [[f64; 2]; 2];

/// Step weights `(2, 1, 2)` of the three excursion types.
pub const STEP_WEIGHTS: [f64; 3] = [2.0, 1.0, 2.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatView {
    pub a3: Mat3,
    pub b2: Mat2,
}

pub fn site_matrices(site: &SiteLaw) -> MatView {
    let (a, b) = (site.a(), site.b());
    MatView {
        a3: [[a, b, 0.0], [a, b, 1.0], [a, b, 0.0]],
        b2: [[a + b, b], [1.0, 0.0]],
    }
}

/// Row vector times `A`, using the repeated-row structure.
fn row_times_a(v: [f64; 3], a: f64, b: f64) -> [f64; 3] {
    let s = v[0] + v[1] + v[2];
    [a * s, b * s, v[1]]
}

/// `A` times a column vector.
fn a_times_col(a: f64, b: f64, c: [f64; 3]) -> [f64; 3] {
    let top = a * c[0] + b * c[1];
    [top, top + c[2], top]
}

fn row_times_b(v: [f64; 2], a: f64, b: f64) -> [f64; 2] {
    [v[0] * (a + b) + v[1], v[0] * b]
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn check_ratios(site: &SiteLaw) -> Result<(f64, f64)> {
    let (a, b) = (site.a(), site.b());
    if a.is_finite() && b.is_finite() {
        Ok((a, b))
    } else {
        Err(Error::Overflow(format!(
            "site ratios a = {a}, b = {b} overflow; restrict the box away from ω(1) = 0"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    A,
    B,
}

/// Top Lyapunov exponent estimate. `gamma = -inf` marks a product that
/// collapsed to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovEstimate {
    pub gamma: f64,
    pub stderr: f64,
}

const BATCHES: u64 = 100;

/// Renormalized product estimate of the top Lyapunov exponent of the
/// i.i.d. products `A_0 A_1 ⋯` (or `B_0 B_1 ⋯`). The standard error comes
/// from 100 batch means of the log-norm increments.
pub fn lyapunov<R: Rng + ?Sized>(
    family: &Family,
    theta: &ParamPoint,
    steps: u64,
    which: Which,
    rng: &mut R,
) -> Result<LyapunovEstimate> {
    if steps < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "lyapunov needs at least 10^4 steps, got {steps}"
        )));
    }
    let sampler = family.sampler(theta)?;
    let mut v3 = [1.0 / 3.0; 3];
    let mut v2 = [0.5; 2];
    let mut batch_means = Vec::with_capacity(BATCHES as usize);
    let mut total = 0.0;
    for batch in 0..BATCHES {
        let start = batch * steps / BATCHES;
        let end = (batch + 1) * steps / BATCHES;
        let mut acc = 0.0;
        for _ in start..end {
            let (a, b) = check_ratios(&sampler.sample(rng))?;
            let norm = match which {
                Which::A => {
                    let w = row_times_a(v3, a, b);
                    let s = l1(&w);
                    if s > 0.0 {
                        v3 = w.map(|x| x / s);
                    }
                    s
                }
                Which::B => {
                    let w = row_times_b(v2, a, b);
                    let s = l1(&w);
                    if s > 0.0 {
                        v2 = w.map(|x| x / s);
                    }
                    s
                }
            };
            if norm == 0.0 {
                return Ok(LyapunovEstimate {
                    gamma: f64::NEG_INFINITY,
                    stderr: 0.0,
                });
            }
            if !norm.is_finite() {
                return Err(Error::Overflow("product norm overflowed".into()));
            }
            acc += norm.ln();
        }
        total += acc;
        batch_means.push(acc / (end - start) as f64);
    }
    let (_, stderr) = mean_stderr(&batch_means);
    Ok(LyapunovEstimate {
        gamma: total / steps as f64,
        stderr,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    TransientRight,
    RecurrentBand,
    TransientLeft,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::TransientRight => "transient-right",
            Regime::RecurrentBand => "recurrent-band",
            Regime::TransientLeft => "transient-left",
        }
    }
}

/// Sign test at three standard errors; anything straddling zero is inconclusive.
pub fn classify(est: &LyapunovEstimate) -> Regime {
    if est.gamma + 3.0 * est.stderr < 0.0 {
        Regime::TransientRight
    } else if est.gamma - 3.0 * est.stderr > 0.0 {
        Regime::TransientLeft
    } else {
        Regime::RecurrentBand
    }
}

/// `(e1 A_0⋯A_{k-1} e2ᵗ, e1 B_0⋯B_{k-1} e2ᵗ)`.
pub fn ab_bridge(sites: &[SiteLaw]) -> (f64, f64) {
    let mut va = [1.0, 0.0, 0.0];
    let mut vb = [1.0, 0.0];
    for s in sites {
        va = row_times_a(va, s.a(), s.b());
        vb = row_times_b(vb, s.a(), s.b());
    }
    (va[1], vb[1])
}

/// Both corner entries agree to `1e-10` relative.
pub fn ab_bridge_check(sites: &[SiteLaw]) -> bool {
    if sites.is_empty() {
        return false;
    }
    let (x, y) = ab_bridge(sites);
    let scale = x.abs().max(y.abs());
    scale == 0.0 || (x - y).abs() <= 1e-10 * scale
}

/// Which product ordering the S-sums use.
///
/// The forward sums give the quenched law of `Z_n`, and their infinite
/// version gives the invariant law. The reversed sums have the same mean
/// but a different law, so they do not describe `Z_n` in distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// `S_n^i = Σ_j e1 A_j A_{j+1} ⋯ A_n e_iᵗ`, the quenched parameters of `Z_n`.
    Forward,
    /// `S̃_n^i = Σ_j e1 A_1 A_2 ⋯ A_j e_iᵗ`.
    Reversed,
}

/// The sums `(s1, s2, s3)`; `total = 1 + s1 + s2 + s3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SSums {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl SSums {
    pub fn total(&self) -> f64 {
        1.0 + self.s1 + self.s2 + self.s3
    }

    /// `(s1, s2, s3) / total`
    pub fn ratios(&self) -> [f64; 3] {
        let t = self.total();
        [self.s1 / t, self.s2 / t, self.s3 / t]
    }

    /// Multivariate geometric law with these parameters:
    /// `(a+b+c)!/(a!b!c!) p1^a p2^b p3^c / total`.
    pub fn pmf(&self, v: GenVector) -> f64 {
        let [p1, p2, p3] = self.ratios();
        let ln = ln_multinomial(&[v.z1, v.z2, v.z3])
            + count_log(v.z1, p1)
            + count_log(v.z2, p2)
            + count_log(v.z3, p3)
            - self.total().ln();
        ln.exp()
    }

    /// Fills `out[k]` with the pmf at `vectors[k]` in the enumeration order
    /// of [`vectors_up_to`], using multiplicative recursions.
    fn pmf_table(&self, v_max: u64, out: &mut [f64]) {
        let [p1, p2, p3] = self.ratios();
        let mut k = 0;
        let mut base_c = 1.0 / self.total();
        for c in 0..=v_max {
            if c > 0 {
                base_c *= p3;
            }
            let mut base_bc = base_c;
            for b in 0..=(v_max - c) {
                if b > 0 {
                    base_bc *= (b + c) as f64 / b as f64 * p2;
                }
                let mut p = base_bc;
                for a in 0..=(v_max - b - c) {
                    if a > 0 {
                        p *= (a + b + c) as f64 / a as f64 * p1;
                    }
                    out[k] = p;
                    k += 1;
                }
            }
        }
    }
}

/// All vectors with `z1 + z2 + z3 ≤ v_max`, `z3` outermost and `z1` innermost.
pub fn vectors_up_to(v_max: u64) -> Vec<GenVector> {
    let mut out = Vec::new();
    for c in 0..=v_max {
        for b in 0..=(v_max - c) {
            for a in 0..=(v_max - b - c) {
                out.push(GenVector::new(a, b, c));
            }
        }
    }
    out
}

/// S-sums of the environment `ω_1..ω_n` in O(n) vector-matrix work.
pub fn s_sums(sites: &[SiteLaw], orientation: Orientation) -> Result<SSums> {
    if sites.is_empty() {
        return Err(Error::InvalidArgument("s_sums needs n ≥ 1 sites".into()));
    }
    let mut acc = [0.0; 3];
    match orientation {
        Orientation::Forward => {
            // H_k = (H_{k-1} + e1) A_k, so H_n = Σ_j e1 A_j ⋯ A_n.
            for s in sites {
                let (a, b) = check_ratios(s)?;
                acc = row_times_a([acc[0] + 1.0, acc[1], acc[2]], a, b);
            }
        }
        Orientation::Reversed => {
            let mut prod = [1.0, 0.0, 0.0];
            for s in sites {
                let (a, b) = check_ratios(s)?;
                prod = row_times_a(prod, a, b);
                for i in 0..3 {
                    acc[i] += prod[i];
                }
            }
        }
    }
    if acc.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("S-sums overflowed".into()));
    }
    Ok(SSums {
        s1: acc[0],
        s2: acc[1],
        s3: acc[2],
    })
}

/// Quenched `P_ω(Z_n = v)` for the environment `ω_1..ω_n`.
pub fn zn_pmf(sites: &[SiteLaw], v: GenVector) -> Result<f64> {
    Ok(s_sums(sites, Orientation::Forward)?.pmf(v))
}

/// Defaults for the infinite-sum truncations.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const DEFAULT_K_CAP: u64 = 100_000;
pub const DEFAULT_V_MAX: u64 = 80;

/// Infinite S-sums for one fresh environment, truncated when the running
/// product drops below `tail_tol` in ℓ1 or after `k_cap` terms. Returns the
/// sums and whether the cap was hit.
///
/// * [`Orientation::Forward`]: `Ŝ^i = Σ_{k≥1} e1 A_k A_{k-1} ⋯ A_1 e_iᵗ`, the
///   limit in law of the forward sums `S_n`, hence of the quenched
///   parameters of `Z_n`.
/// * [`Orientation::Reversed`]: `Σ_{k≥1} e1 A_1 A_2 ⋯ A_k e_iᵗ`, the almost
///   sure limit of `S̃_n`. Its law differs from the forward limit because the
///   matrices do not commute, although both have the same mean.
pub fn s_hat<R: Rng + ?Sized>(
    sampler: &SiteSampler,
    orientation: Orientation,
    tail_tol: f64,
    k_cap: u64,
    rng: &mut R,
) -> Result<(SSums, bool)> {
    let mut acc = [0.0; 3];
    let mut capped = true;
    match orientation {
        Orientation::Forward => {
            // P_k = A_k P_{k-1} stored by rows; the first row is the summand.
            let mut p = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            for _ in 0..k_cap {
                let (a, b) = check_ratios(&sampler.sample(rng))?;
                let top: [f64; 3] = std::array::from_fn(|j| a * p[0][j] + b * p[1][j]);
                let mid: [f64; 3] = std::array::from_fn(|j| top[j] + p[2][j]);
                p = [top, mid, top];
                for i in 0..3 {
                    acc[i] += top[i];
                }
                let norm = l1(&top) + l1(&mid) + l1(&top);
                if !norm.is_finite() || acc.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Overflow("Ŝ partial sums overflowed".into()));
                }
                if norm < tail_tol {
                    capped = false;
                    break;
                }
            }
        }
        Orientation::Reversed => {
            let mut prod = [1.0, 0.0, 0.0];
            for _ in 0..k_cap {
                let (a, b) = check_ratios(&sampler.sample(rng))?;
                prod = row_times_a(prod, a, b);
                for i in 0..3 {
                    acc[i] += prod[i];
                }
                let norm = l1(&prod);
                if !norm.is_finite() || acc.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Overflow("Ŝ partial sums overflowed".into()));
                }
                if norm < tail_tol {
                    capped = false;
                    break;
                }
            }
        }
    }
    Ok((
        SSums {
            s1: acc[0],
            s2: acc[1],
            s3: acc[2],
        },
        capped,
    ))
}

/// `Ŝ` for a constant environment: `e1 A (I - A)^{-1}`, finite when the
/// spectral radius of `A` is below one.
pub fn s_hat_constant(site: &SiteLaw) -> Result<SSums> {
    let (a, b) = (site.a(), site.b());
    // e1 A = (a, b, 0); solve x (I - A) = (a, b, 0) for the row vector x.
    // Columns of (I - A): x1 (1-a) - x2 a - x3 a = a, -x1 b + x2 (1-b) - x3 b = b, -x2 + x3 = 0.
    // With x3 = x2 and s = x1 + 2 x2: x1 - a s = a, x2 - b s = b... solve directly.
    let m = [
        [1.0 - a, -b, 0.0],
        [-a, 1.0 - b, -1.0],
        [-a, -b, 1.0],
    ];
    let x = solve_row(m, [a, b, 0.0])?;
    Ok(SSums {
        s1: x[0],
        s2: x[1],
        s3: x[2],
    })
}

/// `π(ω) = 1 + e1 A (I - A)^{-1} (2,1,2)ᵗ` for a constant environment.
pub fn pi_constant(site: &SiteLaw) -> Result<f64> {
    let s = s_hat_constant(site)?;
    if s.s1 < 0.0 || s.s2 < 0.0 || s.s3 < 0.0 {
        return Err(Error::NonBallistic(
            "constant environment has spectral radius ≥ 1".into(),
        ));
    }
    Ok(1.0 + s.s1 * STEP_WEIGHTS[0] + s.s2 * STEP_WEIGHTS[1] + s.s3 * STEP_WEIGHTS[2])
}

/// Solves the row system `x M = rhs` by Gaussian elimination with partial pivoting.
fn solve_row(m: Mat3, rhs: [f64; 3]) -> Result<[f64; 3]> {
    // x M = rhs  <=>  Mᵗ xᵗ = rhsᵗ
    let mut t = [[0.0; 4]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
        t[i][3] = rhs[i];
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&p, &q| t[p][col].abs().total_cmp(&t[q][col].abs()))
            .expect("nonempty");
        if t[piv][col].abs() < 1e-300 {
            return Err(Error::NonBallistic("I - A is singular".into()));
        }
        t.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = t[r][col] / t[col][col];
                for c in col..4 {
                    t[r][c] -= f * t[col][c];
                }
            }
        }
    }
    Ok([t[0][3] / t[0][0], t[1][3] / t[1][1], t[2][3] / t[2][2]])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantOptions {
    pub env_samples: u64,
    pub orientation: Orientation,
    pub tail_tol: f64,
    pub k_cap: u64,
    pub v_max: u64,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        Self {
            env_samples: 10_000,
            orientation: Orientation::Forward,
            tail_tol: DEFAULT_TAIL_TOL,
            k_cap: DEFAULT_K_CAP,
            v_max: DEFAULT_V_MAX,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantEntry {
    pub v: GenVector,
    pub prob: f64,
    pub stderr: f64,
}

/// Monte Carlo table of the limit law `π_θ` on `|v| ≤ v_max`.
#[derive(Clone, Debug)]
pub struct InvariantTable {
    pub entries: Vec<InvariantEntry>,
    pub env_samples: u64,
    pub cap_hits: u64,
}

impl InvariantTable {
    /// More than 1% of environments hit the truncation cap.
    pub fn suspect(&self) -> bool {
        self.cap_hits * 100 > self.env_samples
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.prob).sum()
    }

    pub fn prob(&self, v: GenVector) -> f64 {
        self.entries
            .iter()
            .find(|e| e.v == v)
            .map_or(0.0, |e| e.prob)
    }

    /// Rows sorted by `(z1, z2, z3)`.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut rows = self.entries.clone();
        rows.sort_by_key(|e| e.v);
        writeln!(out, "z1\tz2\tz3\tprob\tstderr")?;
        for e in rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.v.z1,
                e.v.z2,
                e.v.z3,
                fmt_sig(e.prob),
                fmt_sig(e.stderr)
            )?;
        }
        Ok(())
    }
}

const ENV_CHUNK: u64 = 500;

/// Averages the multivariate geometric law with parameters `Ŝ` over
/// `env_samples` environments from `ν_θ`. With the default forward
/// orientation `Ŝ` is built from descending products `A_k ⋯ A_1`.
pub fn invariant_dist(
    family: &Family,
    theta: &ParamPoint,
    opts: InvariantOptions,
    seed: u64,
) -> Result<InvariantTable> {
    let sampler = family.sampler(theta)?;
    averaged_geometric_table(opts.env_samples, opts.v_max, seed, domain::INVARIANT, |rng| {
        s_hat(&sampler, opts.orientation, opts.tail_tol, opts.k_cap, rng)
    })
}

/// Averages the quenched law of `Z_n` over environments `ω_1..ω_n` from `ν_θ`,
/// using the requested orientation of the S-sums.
pub fn annealed_zn_table(
    family: &Family,
    theta: &ParamPoint,
    n: usize,
    orientation: Orientation,
    env_samples: u64,
    v_max: u64,
    seed: u64,
) -> Result<InvariantTable> {
    let sampler = family.sampler(theta)?;
    averaged_geometric_table(env_samples, v_max, seed, domain::ENVIRONMENT, |rng| {
        let sites: Vec<SiteLaw> = (0..n).map(|_| sampler.sample(rng)).collect();
        Ok((s_sums(&sites, orientation)?, false))
    })
}

fn averaged_geometric_table<F>(
    env_samples: u64,
    v_max: u64,
    seed: u64,
    dom: u64,
    draw: F,
) -> Result<InvariantTable>
where
    F: Fn(&mut crate::seeding::SimRng) -> Result<(SSums, bool)> + Sync,
{
    if env_samples < 2 {
        return Err(Error::InvalidArgument("need at least two environments".into()));
    }
    let vectors = vectors_up_to(v_max);
    let len = vectors.len();
    let chunks = env_samples.div_ceil(ENV_CHUNK);
    let parts: Vec<(Vec<f64>, Vec<f64>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let mut rng = substream(seed, dom, c);
            let mut sum = vec![0.0; len];
            let mut sum_sq = vec![0.0; len];
            let mut buf = vec![0.0; len];
            let mut caps = 0;
            for _ in (c * ENV_CHUNK)..((c + 1) * ENV_CHUNK).min(env_samples) {
                let (sums, capped) = draw(&mut rng)?;
                caps += u64::from(capped);
                sums.pmf_table(v_max, &mut buf);
                for ((s, q), p) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&buf) {
                    *s += p;
                    *q += p * p;
                }
            }
            Ok((sum, sum_sq, caps))
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; len];
    let mut sum_sq = vec![0.0; len];
    let mut cap_hits = 0;
    for (s, q, c) in parts {
        for i in 0..len {
            sum[i] += s[i];
            sum_sq[i] += q[i];
        }
        cap_hits += c;
    }
    let m = env_samples as f64;
    let entries = vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let mean = sum[i] / m;
            let var = ((sum_sq[i] - m * mean * mean) / (m - 1.0)).max(0.0);
            InvariantEntry {
                v,
                prob: mean,
                stderr: (var / m).sqrt(),
            }
        })
        .collect();
    Ok(InvariantTable {
        entries,
        env_samples,
        cap_hits,
    })
}

/// `π(ω) = 1 + Σ_{k≥1} e1 A_k⋯A_1 (2,1,2)ᵗ` for one fresh environment.
/// Returns the truncated sum and whether the cap was hit.
pub fn pi_omega<R: Rng + ?Sized>(
    sampler: &SiteSampler,
    tail_tol: f64,
    k_cap: u64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let mut col = STEP_WEIGHTS;
    let mut total = 1.0;
    for _ in 0..k_cap {
        let (a, b) = check_ratios(&sampler.sample(rng))?;
        col = a_times_col(a, b, col);
        total += col[0];
        let norm = l1(&col);
        if !norm.is_finite() || !total.is_finite() {
            return Err(Error::Overflow("π(ω) partial sums overflowed".into()));
        }
        if norm < tail_tol {
            return Ok((total, false));
        }
    }
    Ok((total, true))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedEstimate {
    pub speed: f64,
    pub stderr: f64,
    /// Monte Carlo mean of `π(ω)`, the expected time to advance one site.
    pub mean_pi: f64,
    pub pi_stderr: f64,
}

/// `1 / E π(ω)` by Monte Carlo over `env_samples` environments, with a
/// delta-method standard error.
pub fn speed(
    family: &Family,
    theta: &ParamPoint,
    env_samples: u64,
    tail_tol: f64,
    k_cap: u64,
    seed: u64,
) -> Result<SpeedEstimate> {
    let sampler = family.sampler(theta)?;
    let chunks = env_samples.div_ceil(ENV_CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let mut rng = substream(seed, domain::SPEED, c);
            let mut out = Vec::with_capacity(ENV_CHUNK as usize);
            for _ in (c * ENV_CHUNK)..((c + 1) * ENV_CHUNK).min(env_samples) {
                let (pi, capped) = pi_omega(&sampler, tail_tol, k_cap, &mut rng)?;
                if capped {
                    return Err(Error::NonBallistic(format!(
                        "π(ω) partial sums still above {tail_tol} after {k_cap} terms"
                    )));
                }
                out.push(pi);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let pis: Vec<f64> = parts.into_iter().flatten().collect();
    let (mean_pi, pi_stderr) = mean_stderr(&pis);
    Ok(SpeedEstimate {
        speed: 1.0 / mean_pi,
        stderr: pi_stderr / (mean_pi * mean_pi),
        mean_pi,
        pi_stderr,
    })
}

/// Quenched `E_ω T_n = n + Σ_{i=0}^{n-1} Σ_{k ≤ i} e1 A_i ⋯ A_k (2,1,2)ᵗ`,
/// with the inner sums starting at `env.first()` instead of `-∞`.
pub fn expected_hitting(env: &SiteRange, n: u64) -> Result<f64> {
    let n_i = n as i64;
    if env.first() > 0 || env.last() < n_i - 1 {
        return Err(Error::InvalidArgument(format!(
            "environment [{}, {}] must cover [0, {}]",
            env.first(),
            env.last(),
            n_i - 1
        )));
    }
    // G_i = A_i (w + G_{i-1}), G_i = Σ_{k ≤ i} A_i ⋯ A_k w
    let mut g = [0.0; 3];
    let mut total = n as f64;
    for i in env.first()..n_i {
        let site = env.get(i).expect("covered");
        let (a, b) = check_ratios(site)?;
        g = a_times_col(a, b, [g[0] + STEP_WEIGHTS[0], g[1] + STEP_WEIGHTS[1], g[2] + STEP_WEIGHTS[2]]);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow("expected hitting time overflowed".into()));
        }
        if i >= 0 {
            total += g[0];
        }
    }
    Ok(total)
}
