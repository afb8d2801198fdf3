//! The criterion function `l_n(θ)` and the annealed transition kernel.
//!
//! For a walk observed up to its first visit to `n`, with `L_x = (l1, l2)`
//! the left-jump counts at `x`,
//!
//! ```text
//!   l_n(θ) = Σ_{x=0}^{n-1} φ_θ(L_x, L_{x+1}, L_{x+2})
//!   φ_θ(y1, y2, y3) = ln ∬ a1^{y1.l1} a2^{y1.l2} (1 - a1 - a2)^{y2.l1 + y2.l2 + y3.l2 + 1} dν_θ
//! ```
//!
//! The same number is a functional of the branching process read from the
//! path: `l_n(θ) = Σ_k φ̃_θ(Z_k, Z_{k+1})` with
//! `φ̃_θ(z, z') = ln ∬ a1^{z'1} a2^{z'2} (1 - a1 - a2)^{|z| + 1} dν_θ`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bpire::{next_generation, GenVector};
use crate::env::{Family, Moments, ParamPoint};
use crate::error::{Error, Result};
use crate::numeric::{ln_factorial, tv_truncated, EmpiricalLaw, NeumaierSum, TvReport};
use crate::seeding::{domain, substream};
use crate::walk::{CountsFile, WalkRecord};

/// Left-jump counts `(l1, l2)` at one site.
pub type Pair = (u64, u64);

/// Per-site pairs `L_0..L_{n+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountsView {
    n: u64,
    pairs: Vec<Pair>,
}

impl CountsView {
    /// `pairs[x]` is `L_x`; missing trailing entries up to `n + 1` are zero
    /// and entries beyond `n + 1` are dropped.
    pub fn new(n: u64, mut pairs: Vec<Pair>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("counts need a target n ≥ 1".into()));
        }
        pairs.resize((n + 2) as usize, (0, 0));
        Ok(Self { n, pairs })
    }

    pub fn from_record(rec: &WalkRecord) -> Result<Self> {
        let n = rec.target();
        let pairs = (0..=(n as i64 + 1))
            .map(|x| {
                let c = rec.counts(x);
                (c.l1, c.l2)
            })
            .collect();
        Self::new(n, pairs)
    }

    pub fn from_counts_file(file: &CountsFile) -> Result<Self> {
        Self::from_record(&file.record)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn pair(&self, x: u64) -> Pair {
        self.pairs[x as usize]
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// Swaps the `l1` and `l2` columns.
    pub fn swapped(&self) -> Self {
        Self {
            n: self.n,
            pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect(),
        }
    }

    /// The exponent triple `(y1, y2, r)` of the `x`-th term.
    fn triple(&self, x: usize) -> (u64, u64, u64) {
        let (l1, l2) = self.pairs[x];
        let (m1, m2) = self.pairs[x + 1];
        let (_, k2) = self.pairs[x + 2];
        (l1, l2, m1 + m2 + k2 + 1)
    }
}

/// `φ_θ(y1, y2, y3)`.
pub fn phi(family: &Family, theta: &ParamPoint, y1: Pair, y2: Pair, y3: Pair) -> Result<f64> {
    family.log_moment(theta, y1.0, y1.1, y2.0 + y2.1 + y3.1 + 1)
}

/// `l_n(θ)`, summed with compensation. Returns `-inf` as soon as one term is
/// `-inf`.
pub fn loglik(counts: &CountsView, family: &Family, theta: &ParamPoint) -> Result<f64> {
    let m = family.moments(theta)?;
    let mut sum = NeumaierSum::new();
    for x in 0..counts.n as usize {
        let (y1, y2, r) = counts.triple(x);
        let term = m.log_moment(y1, y2, r);
        if term == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        sum.add(term);
    }
    Ok(sum.value())
}

/// `φ̃_θ(z_prev, z_next)`.
pub fn phi_tilde(family: &Family, theta: &ParamPoint, z_prev: GenVector, z_next: GenVector) -> Result<f64> {
    family.log_moment(theta, z_next.z1, z_next.z2, z_prev.total() + 1)
}

/// `Σ_k φ̃_θ(Z_k, Z_{k+1})` over consecutive pairs of the trajectory.
pub fn loglik_via_z(z_traj: &[GenVector], family: &Family, theta: &ParamPoint) -> Result<f64> {
    let m = family.moments(theta)?;
    let mut sum = NeumaierSum::new();
    for w in z_traj.windows(2) {
        let term = m.log_moment(w[1].z1, w[1].z2, w[0].total() + 1);
        if term == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        sum.add(term);
    }
    Ok(sum.value())
}

/// The counts collapsed to distinct exponent triples `(y1, y2, r)` with
/// multiplicities, sorted, so `l_n` costs one moment per distinct triple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SufficientStats {
    n: u64,
    triples: Vec<((u64, u64, u64), u64)>,
}

impl SufficientStats {
    pub fn new(counts: &CountsView) -> Self {
        let mut h: BTreeMap<(u64, u64, u64), u64> = BTreeMap::new();
        for x in 0..counts.n as usize {
            *h.entry(counts.triple(x)).or_insert(0) += 1;
        }
        Self {
            n: counts.n,
            triples: h.into_iter().collect(),
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn distinct(&self) -> usize {
        self.triples.len()
    }

    /// `l_n(θ)` from the histogram.
    pub fn loglik(&self, moments: &Moments) -> f64 {
        let mut sum = NeumaierSum::new();
        for &((y1, y2, r), mult) in &self.triples {
            let term = moments.log_moment(y1, y2, r);
            if term == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            sum.add(term * mult as f64);
        }
        sum.value()
    }
}

/// Annealed one-generation transition probability `Q_θ(x, y)`. Zero unless
/// `y.z3 = x.z2`, since each type-2 parent leaves exactly one type-3 child.
pub fn kernel_q(family: &Family, theta: &ParamPoint, x: GenVector, y: GenVector) -> Result<f64> {
    let m = family.moments(theta)?;
    Ok(kernel_q_with(&m, x, y))
}

fn kernel_q_with(m: &Moments, x: GenVector, y: GenVector) -> f64 {
    if y.z3 != x.z2 {
        return 0.0;
    }
    let size = x.total();
    let ln = ln_factorial(size + y.z1 + y.z2) - ln_factorial(y.z1) - ln_factorial(y.z2) - ln_factorial(size)
        + m.log_moment(y.z1, y.z2, size + 1);
    ln.exp()
}

/// `Σ_{y1 + y2 ≤ max_total} Q_θ(x, (y1, y2, x.z2))`.
pub fn kernel_row_sum(family: &Family, theta: &ParamPoint, x: GenVector, max_total: u64) -> Result<f64> {
    let m = family.moments(theta)?;
    let mut sum = NeumaierSum::new();
    for t in 0..=max_total {
        for y1 in 0..=t {
            sum.add(kernel_q_with(&m, x, GenVector::new(y1, t - y1, x.z2)));
        }
    }
    Ok(sum.value())
}

const KERNEL_CHUNK: u64 = 10_000;

/// Samples `Z_1` given `Z_0 = x` by drawing a fresh site from `ν_θ` and the
/// offspring of every parent, then compares with `Q_θ(x, ·)` in total variation.
pub fn kernel_one_step_check(
    family: &Family,
    theta: &ParamPoint,
    x: GenVector,
    samples: u64,
    seed: u64,
) -> Result<TvReport> {
    let sampler = family.sampler(theta)?;
    let m = family.moments(theta)?;
    let chunks = samples.div_ceil(KERNEL_CHUNK);
    let parts: Vec<EmpiricalLaw<GenVector>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, domain::KERNEL, c);
            let mut law = EmpiricalLaw::new();
            for _ in (c * KERNEL_CHUNK)..((c + 1) * KERNEL_CHUNK).min(samples) {
                let site = sampler.sample(&mut rng);
                law.push(next_generation(&site, x, &mut rng));
            }
            law
        })
        .collect();
    let mut law = EmpiricalLaw::new();
    for p in &parts {
        law.merge(p);
    }
    let empirical = law.to_probs();
    let max_total = empirical.keys().map(|v| v.z1 + v.z2).max().unwrap_or(0) + 50;
    let mut exact = BTreeMap::new();
    for t in 0..=max_total {
        for y1 in 0..=t {
            let y = GenVector::new(y1, t - y1, x.z2);
            exact.insert(y, kernel_q_with(&m, x, y));
        }
    }
    Ok(tv_truncated(&empirical, &exact, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpire::{extract_u, simulate_z};
    use crate::env::{Interval, SiteLaw};
    use crate::numeric::mean_stderr;
    use crate::seeding::master;
    use crate::walk::simulate_to;
    use proptest::prelude::*;

    fn point() -> (Family, ParamPoint) {
        (Family::default_point(), ParamPoint::new(vec![0.2, 0.1]))
    }

    fn dir111() -> (Family, ParamPoint) {
        (Family::default_dirichlet(), ParamPoint::new(vec![1.0, 1.0, 1.0]))
    }

    fn dir116() -> (Family, ParamPoint) {
        (Family::default_dirichlet(), ParamPoint::new(vec![1.0, 1.0, 6.0]))
    }

    #[test]
    fn phi_examples() {
        let (f, t) = dir111();
        let v = phi(&f, &t, (0, 0), (0, 0), (0, 0)).unwrap();
        assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        let (f, t) = point();
        let v = phi(&f, &t, (0, 0), (0, 0), (0, 0)).unwrap();
        assert!((v - 0.7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loglik_examples() {
        let zero = CountsView::new(5, vec![]).unwrap();
        let (f, t) = point();
        assert!((loglik(&zero, &f, &t).unwrap() - 5.0 * 0.7f64.ln()).abs() < 1e-12);
        let (f, t) = dir111();
        assert!((loglik(&zero, &f, &t).unwrap() - 5.0 * (1.0f64 / 3.0).ln()).abs() < 1e-12);

        let hand = CountsView::new(2, vec![(0, 0), (0, 1), (0, 0)]).unwrap();
        let (f, t) = point();
        let expect = 3.0 * 0.7f64.ln() + 0.1f64.ln();
        assert!((loglik(&hand, &f, &t).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn hand_path_counts_match_view() {
        let rec = WalkRecord::from_path(vec![0, 1, -1, 0, 1, 2], 2).unwrap();
        let view = CountsView::from_record(&rec).unwrap();
        assert_eq!(view.pairs(), &[(0, 0), (0, 1), (0, 0), (0, 0)]);
    }

    #[test]
    fn loglik_neg_infinity_short_circuits() {
        let fam = Family::point(vec![Interval::new(0.0, 0.4); 2]).unwrap();
        let t = ParamPoint::new(vec![0.0, 0.1]);
        let counts = CountsView::new(3, vec![(1, 0)]).unwrap();
        assert_eq!(loglik(&counts, &fam, &t).unwrap(), f64::NEG_INFINITY);
        let stats = SufficientStats::new(&counts);
        assert_eq!(stats.loglik(&fam.moments(&t).unwrap()), f64::NEG_INFINITY);
    }

    #[test]
    fn loglik_ignores_sites_beyond_n_plus_one() {
        let (f, t) = dir116();
        let base = CountsView::new(3, vec![(1, 0), (0, 2), (3, 1), (0, 1), (0, 4)]).unwrap();
        let mut extended = base.pairs().to_vec();
        extended.extend([(7, 7), (9, 9)]);
        let other = CountsView::new(3, extended).unwrap();
        assert_eq!(loglik(&base, &f, &t).unwrap(), loglik(&other, &f, &t).unwrap());
    }

    #[test]
    fn loglik_rejects_theta_outside_box() {
        let (f, _) = point();
        let counts = CountsView::new(3, vec![]).unwrap();
        assert!(loglik(&counts, &f, &ParamPoint::new(vec![0.9, 0.1])).is_err());
    }

    #[test]
    fn via_z_examples() {
        let (f, t) = point();
        let traj = vec![GenVector::ZERO; 7];
        assert!((loglik_via_z(&traj, &f, &t).unwrap() - 6.0 * 0.7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_identity_on_walks() {
        let cases = [point(), dir116(), (Family::default_mixture(), ParamPoint::new(vec![0.5]))];
        for (i, (f, t)) in cases.iter().enumerate() {
            for k in 0..30 {
                let rec = simulate_to(f, t, 40, 40_000, &mut substream(11, i as u64, k)).unwrap();
                let counts = CountsView::from_record(&rec).unwrap();
                let mut traj = extract_u(&rec).generations();
                traj.truncate(rec.target() as usize + 1);
                let direct = loglik(&counts, f, t).unwrap();
                let via = loglik_via_z(&traj, f, t).unwrap();
                assert!((direct - via).abs() <= 1e-10 * direct.abs().max(1.0), "{direct} {via}");
                let stats = SufficientStats::new(&counts).loglik(&f.moments(t).unwrap());
                assert!((direct - stats).abs() <= 1e-10 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn loglik_means_agree_in_distribution() {
        let (f, t) = dir116();
        let n = 20;
        let sampler = f.sampler(&t).unwrap();
        let walks: Vec<f64> = (0..1000)
            .map(|k| {
                let rec = simulate_to(&f, &t, n, 1000 * n, &mut substream(12, 0, k)).unwrap();
                loglik(&CountsView::from_record(&rec).unwrap(), &f, &t).unwrap()
            })
            .collect();
        let zs: Vec<f64> = (0..1000)
            .map(|k| {
                let mut rng = substream(12, 1, k);
                let sites: Vec<SiteLaw> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
                loglik_via_z(&simulate_z(&sites, &mut rng), &f, &t).unwrap()
            })
            .collect();
        let (m1, s1) = mean_stderr(&walks);
        let (m2, s2) = mean_stderr(&zs);
        assert!((m1 - m2).abs() <= 3.0 * (s1 * s1 + s2 * s2).sqrt(), "{m1} ± {s1} vs {m2} ± {s2}");
    }

    #[test]
    fn kernel_examples() {
        let (f, t) = point();
        let q = kernel_q(&f, &t, GenVector::ZERO, GenVector::ZERO).unwrap();
        assert!((q - 0.7).abs() < 1e-12);
        assert_eq!(kernel_q(&f, &t, GenVector::new(0, 1, 0), GenVector::new(0, 0, 0)).unwrap(), 0.0);
        let (f, t) = dir116();
        assert_eq!(kernel_q(&f, &t, GenVector::new(1, 1, 0), GenVector::new(2, 1, 0)).unwrap(), 0.0);
        let s = kernel_row_sum(&f, &t, GenVector::new(1, 1, 0), 500).unwrap();
        assert!(s >= 1.0 - 1e-6 && s <= 1.0 + 1e-9, "{s}");
    }

    #[test]
    fn kernel_matches_offspring_for_point_family() {
        let (f, t) = point();
        let site = SiteLaw::new(0.1, 0.2, 0.7).unwrap();
        for y in [GenVector::new(1, 0, 0), GenVector::new(0, 1, 0), GenVector::new(2, 1, 0)] {
            let q = kernel_q(&f, &t, GenVector::ZERO, y).unwrap();
            let p = crate::bpire::offspring_pmf(&site, crate::bpire::ParentType::One, y);
            assert!((q - p).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_one_step_simulation() {
        let (f, t) = dir116();
        let r = kernel_one_step_check(&f, &t, GenVector::new(2, 1, 1), 100_000, 3).unwrap();
        assert!(r.tv < 0.02, "{}", r.tv);
        let f = Family::default_mixture();
        let r = kernel_one_step_check(&f, &ParamPoint::new(vec![0.5]), GenVector::new(1, 0, 2), 100_000, 4).unwrap();
        assert!(r.tv < 0.02, "{}", r.tv);
    }

    #[test]
    fn counts_file_round_trip_keeps_loglik() {
        let (f, t) = dir116();
        let rec = simulate_to(&f, &t, 60, 60_000, &mut master(9)).unwrap();
        let mut buf = Vec::new();
        rec.write_counts(9, &mut buf).unwrap();
        let file = crate::walk::read_counts(&buf[..]).unwrap();
        let a = loglik(&CountsView::from_record(&rec).unwrap(), &f, &t).unwrap();
        let b = loglik(&CountsView::from_counts_file(&file).unwrap(), &f, &t).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn phi_is_monotone_in_counts(
            y in proptest::collection::vec(0u64..6, 6),
            bump in 0usize..6,
            t1 in 0.2f64..5.0, t2 in 0.2f64..5.0, t3 in 0.2f64..5.0,
        ) {
            let f = Family::default_dirichlet();
            let t = ParamPoint::new(vec![t1, t2, t3]);
            let base = phi(&f, &t, (y[0], y[1]), (y[2], y[3]), (y[4], y[5])).unwrap();
            let mut z = y.clone();
            z[bump] += 1;
            let bigger = phi(&f, &t, (z[0], z[1]), (z[2], z[3]), (z[4], z[5])).unwrap();
            prop_assert!(base <= 0.0);
            prop_assert!(bigger <= base + 1e-12);
        }

        #[test]
        fn stats_and_direct_loglik_agree(
            pairs in proptest::collection::vec((0u64..4, 0u64..3), 3..40),
            w in 0.01f64..0.99,
        ) {
            let n = pairs.len() as u64 - 2;
            let counts = CountsView::new(n, pairs).unwrap();
            let f = Family::default_mixture();
            let t = ParamPoint::new(vec![w]);
            let a = loglik(&counts, &f, &t).unwrap();
            let b = SufficientStats::new(&counts).loglik(&f.moments(&t).unwrap());
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }
}
