//! Parametric environment families `ν_θ` and their moment integrals.
//!
//! A site law puts mass on the jumps `-2`, `-1` and `+1`. Every likelihood
//! quantity in the crate reduces to the moment integral
//!
//! ```text
//! M_θ(y1, y2, r) = ∫∫ a1^y1 · a2^y2 · (1 - a1 - a2)^r dν_θ(a1, a2)
//! ```
//!
//! where `a1 = ω(-1)` and `a2 = ω(-2)`. [`Family::log_moment`] returns
//! `ln M_θ`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::numeric::{count_log, ln_gamma, log_add_exp};

const SUM_TOL: f64 = 1e-12;

/// Jump law at one site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteLaw {
    w_m2: f64,
    w_m1: f64,
    w_p1: f64,
}

impl Default for SiteLaw {
    fn default() -> Self {
        Self::right_only()
    }
}

impl SiteLaw {
    /// Probabilities of the jumps `-2`, `-1`, `+1`.
    pub fn new(w_m2: f64, w_m1: f64, w_p1: f64) -> Result<Self> {
        for (name, w) in [("w_m2", w_m2), ("w_m1", w_m1), ("w_p1", w_p1)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidSite(format!("{name} = {w} not in [0, 1]")));
            }
        }
        if (w_m2 + w_m1 + w_p1 - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidSite(format!(
                "probabilities sum to {}",
                w_m2 + w_m1 + w_p1
            )));
        }
        if w_p1 <= 0.0 {
            return Err(Error::InvalidSite("w_p1 must be positive".into()));
        }
        Ok(Self { w_m2, w_m1, w_p1 })
    }

    /// Site law from its left probabilities `(ω(-1), ω(-2))`.
    pub fn from_left(w_m1: f64, w_m2: f64) -> Result<Self> {
        Self::new(w_m2, w_m1, 1.0 - w_m1 - w_m2)
    }

    /// Deterministic right step.
    pub fn right_only() -> Self {
        Self {
            w_m2: 0.0,
            w_m1: 0.0,
            w_p1: 1.0,
        }
    }

    pub fn w_m2(&self) -> f64 {
        self.w_m2
    }

    pub fn w_m1(&self) -> f64 {
        self.w_m1
    }

    pub fn w_p1(&self) -> f64 {
        self.w_p1
    }

    /// `ω(-1) / ω(1)`
    pub fn a(&self) -> f64 {
        self.w_m1 / self.w_p1
    }

    /// `ω(-2) / ω(1)`
    pub fn b(&self) -> f64 {
        self.w_m2 / self.w_p1
    }

    pub fn ln_moment(&self, y1: u64, y2: u64, r: u64) -> f64 {
        count_log(y1, self.w_m1) + count_log(y2, self.w_m2) + count_log(r, self.w_p1)
    }
}

/// A point `θ` of the parameter box.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &ParamPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for ParamPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Closed interval `[lo, hi]` for one coordinate of `Θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FamilyKind {
    /// Dirichlet(θ1, θ2, θ3) on `(ω(-1), ω(-2), ω(1))`.
    Dirichlet,
    /// Point mass at `ω(-1) = θ1`, `ω(-2) = θ2`.
    Point,
    /// `θ·δ_{atoms[0]} + (1 - θ)·δ_{atoms[1]}`.
    FiniteMixture { atoms: [SiteLaw; 2] },
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Dirichlet => "dirichlet",
            FamilyKind::Point => "point",
            FamilyKind::FiniteMixture { .. } => "finite-mixture",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FamilyKind::Dirichlet => 3,
            FamilyKind::Point => 2,
            FamilyKind::FiniteMixture { .. } => 1,
        }
    }
}

/// Admissible box for dirichlet coordinates: all log-moments stay finite and
/// the density is continuous in `θ`.
pub const DIRICHLET_RANGE: Interval = Interval { lo: 0.1, hi: 20.0 };
/// Mixture weights keep both atoms present, so distinct weights give distinct laws.
pub const MIXTURE_RANGE: Interval = Interval { lo: 0.01, hi: 0.99 };

/// A parametric environment family together with its compact box `Θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    kind: FamilyKind,
    bounds: Vec<Interval>,
}

impl Family {
    pub fn new(kind: FamilyKind, bounds: Vec<Interval>) -> Result<Self> {
        if bounds.len() != kind.dim() {
            return Err(Error::InvalidFamily(format!(
                "{} needs {} box coordinates, got {}",
                kind.name(),
                kind.dim(),
                bounds.len()
            )));
        }
        for (i, iv) in bounds.iter().enumerate() {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.lo >= iv.hi {
                return Err(Error::InvalidFamily(format!(
                    "box coordinate {i} must satisfy finite lo < hi, got [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
        }
        match &kind {
            FamilyKind::Dirichlet => {
                for iv in &bounds {
                    if iv.lo < DIRICHLET_RANGE.lo || iv.hi > DIRICHLET_RANGE.hi {
                        return Err(Error::InvalidFamily(format!(
                            "dirichlet box [{}, {}] must lie inside [{}, {}]",
                            iv.lo, iv.hi, DIRICHLET_RANGE.lo, DIRICHLET_RANGE.hi
                        )));
                    }
                }
            }
            FamilyKind::Point => {
                if bounds.iter().any(|iv| iv.lo < 0.0) {
                    return Err(Error::InvalidFamily(
                        "point box coordinates must be nonnegative".into(),
                    ));
                }
                if bounds[0].hi + bounds[1].hi >= 1.0 {
                    return Err(Error::InvalidFamily(
                        "point box must keep ω(-1) + ω(-2) < 1".into(),
                    ));
                }
            }
            FamilyKind::FiniteMixture { atoms } => {
                let iv = bounds[0];
                if iv.lo < MIXTURE_RANGE.lo || iv.hi > MIXTURE_RANGE.hi {
                    return Err(Error::InvalidFamily(format!(
                        "mixture box [{}, {}] must lie inside [{}, {}]",
                        iv.lo, iv.hi, MIXTURE_RANGE.lo, MIXTURE_RANGE.hi
                    )));
                }
                if atoms[0] == atoms[1] {
                    return Err(Error::InvalidFamily(
                        "mixture atoms must differ, otherwise θ is not identifiable".into(),
                    ));
                }
            }
        }
        Ok(Self { kind, bounds })
    }

    pub fn dirichlet(bounds: Vec<Interval>) -> Result<Self> {
        Self::new(FamilyKind::Dirichlet, bounds)
    }

    pub fn point(bounds: Vec<Interval>) -> Result<Self> {
        Self::new(FamilyKind::Point, bounds)
    }

    pub fn finite_mixture(atoms: [SiteLaw; 2], bound: Interval) -> Result<Self> {
        Self::new(FamilyKind::FiniteMixture { atoms }, vec![bound])
    }

    /// Dirichlet family on the full admissible box `[0.1, 20]^3`.
    pub fn default_dirichlet() -> Self {
        Self::dirichlet(vec![DIRICHLET_RANGE; 3]).expect("default box is valid")
    }

    /// Point family on `[0.01, 0.45]^2`.
    pub fn default_point() -> Self {
        Self::point(vec![Interval::new(0.01, 0.45); 2]).expect("default box is valid")
    }

    /// Mixture of `(0.1, 0.2, 0.7)` and `(0.02, 0.08, 0.9)` on `[0.01, 0.99]`.
    pub fn default_mixture() -> Self {
        Self::finite_mixture(Self::default_atoms(), MIXTURE_RANGE).expect("default box is valid")
    }

    pub fn default_atoms() -> [SiteLaw; 2] {
        [
            SiteLaw::new(0.1, 0.2, 0.7).expect("valid"),
            SiteLaw::new(0.02, 0.08, 0.9).expect("valid"),
        ]
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn contains(&self, theta: &ParamPoint) -> bool {
        theta.dim() == self.dim()
            && theta
                .coords()
                .iter()
                .zip(&self.bounds)
                .all(|(&x, iv)| iv.contains(x))
    }

    pub fn check(&self, theta: &ParamPoint) -> Result<()> {
        if theta.dim() != self.dim() {
            return Err(Error::ParamDomain {
                theta: theta.coords().to_vec(),
                reason: format!("{} expects {} coordinates", self.kind.name(), self.dim()),
            });
        }
        if !self.contains(theta) {
            return Err(Error::ParamDomain {
                theta: theta.coords().to_vec(),
                reason: format!("box is {:?}", self.bounds),
            });
        }
        Ok(())
    }

    /// Validated sampler for `ν_θ`.
    pub fn sampler(&self, theta: &ParamPoint) -> Result<SiteSampler> {
        self.check(theta)?;
        let c = theta.coords();
        Ok(match &self.kind {
            FamilyKind::Dirichlet => {
                let g = |shape: f64| {
                    Gamma::new(shape, 1.0).map_err(|e| Error::ParamDomain {
                        theta: c.to_vec(),
                        reason: e.to_string(),
                    })
                };
                SiteSampler::Dirichlet {
                    left1: g(c[0])?,
                    left2: g(c[1])?,
                    right: g(c[2])?,
                }
            }
            FamilyKind::Point => SiteSampler::Point(SiteLaw::from_left(c[0], c[1])?),
            FamilyKind::FiniteMixture { atoms } => SiteSampler::Mixture {
                weight: c[0],
                atoms: *atoms,
            },
        })
    }

    /// One i.i.d. draw from `ν_θ`.
    pub fn sample_site<R: Rng + ?Sized>(&self, theta: &ParamPoint, rng: &mut R) -> Result<SiteLaw> {
        Ok(self.sampler(theta)?.sample(rng))
    }

    /// Validated evaluator of `ln M_θ`.
    pub fn moments(&self, theta: &ParamPoint) -> Result<Moments> {
        self.check(theta)?;
        let c = theta.coords();
        Ok(match &self.kind {
            FamilyKind::Dirichlet => {
                let alpha = [c[0], c[1], c[2]];
                let total: f64 = alpha.iter().sum();
                let ln_norm = ln_gamma(total) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>();
                Moments::Dirichlet {
                    alpha,
                    total,
                    ln_norm,
                }
            }
            FamilyKind::Point => Moments::Point(SiteLaw::from_left(c[0], c[1])?),
            FamilyKind::FiniteMixture { atoms } => Moments::Mixture {
                ln_weights: [c[0].ln(), (1.0 - c[0]).ln()],
                atoms: *atoms,
            },
        })
    }

    /// `ln ∫∫ a1^y1 a2^y2 (1 - a1 - a2)^r dν_θ`.
    pub fn log_moment(&self, theta: &ParamPoint, y1: u64, y2: u64, r: u64) -> Result<f64> {
        Ok(self.moments(theta)?.log_moment(y1, y2, r))
    }
}

/// Sampler for `ν_θ` with the parameter already validated.
#[derive(Clone, Debug)]
pub enum SiteSampler {
    Dirichlet {
        left1: Gamma<f64>,
        left2: Gamma<f64>,
        right: Gamma<f64>,
    },
    Point(SiteLaw),
    Mixture {
        weight: f64,
        atoms: [SiteLaw; 2],
    },
}

impl SiteSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SiteLaw {
        match self {
            SiteSampler::Dirichlet { left1, left2, right } => loop {
                let g1 = left1.sample(rng);
                let g2 = left2.sample(rng);
                let g3 = right.sample(rng);
                let s = g1 + g2 + g3;
                // A zero right weight only arises from gamma underflow; redraw.
                if g3 > 0.0 && s.is_finite() {
                    let w_p1 = g3 / s;
                    let w_m1 = g1 / s;
                    let w_m2 = 1.0 - w_p1 - w_m1;
                    if let Ok(site) = SiteLaw::new(w_m2.max(0.0), w_m1, w_p1) {
                        return site;
                    }
                }
            },
            SiteSampler::Point(site) => *site,
            SiteSampler::Mixture { weight, atoms } => {
                if rng.random::<f64>() < *weight {
                    atoms[0]
                } else {
                    atoms[1]
                }
            }
        }
    }
}

/// Evaluator of `ln M_θ(y1, y2, r)` with per-θ constants precomputed.
#[derive(Clone, Debug)]
pub enum Moments {
    Dirichlet {
        alpha: [f64; 3],
        total: f64,
        ln_norm: f64,
    },
    Point(SiteLaw),
    Mixture {
        ln_weights: [f64; 2],
        atoms: [SiteLaw; 2],
    },
}

impl Moments {
    pub fn log_moment(&self, y1: u64, y2: u64, r: u64) -> f64 {
        match self {
            Moments::Dirichlet {
                alpha,
                total,
                ln_norm,
            } => {
                let counts = [y1, y2, r];
                let added = (y1 + y2 + r) as f64;
                let mut acc = *ln_norm - ln_gamma(total + added);
                for (a, &c) in alpha.iter().zip(&counts) {
                    acc += ln_gamma(a + c as f64);
                }
                // Exact zero for the empty moment.
                if added == 0.0 {
                    0.0
                } else {
                    acc
                }
            }
            Moments::Point(site) => site.ln_moment(y1, y2, r),
            Moments::Mixture { ln_weights, atoms } => log_add_exp(
                ln_weights[0] + atoms[0].ln_moment(y1, y2, r),
                ln_weights[1] + atoms[1].ln_moment(y1, y2, r),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_stderr;
    use crate::seeding::master;
    use proptest::prelude::*;

    fn theta(v: &[f64]) -> ParamPoint {
        ParamPoint::new(v.to_vec())
    }

    /// Tensor-product trapezoid rule on the simplex after the map
    /// `a1 = u`, `a2 = (1 - u) v`. The Dirichlet density and the moment
    /// integrand both factor in `(u, v)`, so the 2-D rule is the product of
    /// two 1-D rules. The normalizing constant is integrated the same way,
    /// so no gamma function is involved.
    fn quadrature_moment(alpha: [f64; 3], y: [u64; 3], intervals: usize) -> f64 {
        let p1 = alpha[0] - 1.0;
        let p2 = alpha[1] - 1.0;
        let p3 = alpha[2] - 1.0;
        // density ∝ u^p1 (1-u)^(p2+p3+1) · v^p2 (1-v)^p3
        let trap = |f: &dyn Fn(f64) -> f64| {
            let h = 1.0 / intervals as f64;
            let mut s = 0.5 * (f(0.0) + f(1.0));
            for i in 1..intervals {
                s += f(i as f64 * h);
            }
            s * h
        };
        let pw = |x: f64, e: f64| if e == 0.0 { 1.0 } else { x.powf(e) };
        let (y1, y2, r) = (y[0] as f64, y[1] as f64, y[2] as f64);
        let num_u = trap(&|u| pw(u, p1 + y1) * pw(1.0 - u, p2 + p3 + 1.0 + y2 + r));
        let num_v = trap(&|v| pw(v, p2 + y2) * pw(1.0 - v, p3 + r));
        let den_u = trap(&|u| pw(u, p1) * pw(1.0 - u, p2 + p3 + 1.0));
        let den_v = trap(&|v| pw(v, p2) * pw(1.0 - v, p3));
        (num_u * num_v / (den_u * den_v)).ln()
    }

    #[test]
    fn site_law_validation() {
        assert!(SiteLaw::new(0.1, 0.2, 0.7).is_ok());
        assert!(SiteLaw::new(0.5, 0.5, 0.0).is_err());
        assert!(SiteLaw::new(0.2, 0.2, 0.7).is_err());
        assert!(SiteLaw::new(-0.1, 0.4, 0.7).is_err());
        let s = SiteLaw::new(0.1, 0.2, 0.7).unwrap();
        assert!((s.a() - 2.0 / 7.0).abs() < 1e-15);
        assert!((s.b() - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn family_validation() {
        assert!(Family::dirichlet(vec![Interval::new(0.05, 2.0); 3]).is_err());
        assert!(Family::dirichlet(vec![Interval::new(1.0, 1.0); 3]).is_err());
        assert!(Family::point(vec![Interval::new(0.0, 0.6); 2]).is_err());
        assert!(Family::point(vec![Interval::new(0.0, 0.4); 2]).is_ok());
        let atoms = Family::default_atoms();
        assert!(Family::finite_mixture(atoms, Interval::new(0.0, 1.0)).is_err());
        assert!(Family::finite_mixture([atoms[0], atoms[0]], MIXTURE_RANGE).is_err());
        let fam = Family::default_point();
        assert!(matches!(
            fam.log_moment(&theta(&[0.5, 0.1]), 0, 0, 0),
            Err(Error::ParamDomain { .. })
        ));
        assert!(fam.sample_site(&theta(&[0.2]), &mut master(0)).is_err());
    }

    #[test]
    fn point_family_returns_the_same_site() {
        let fam = Family::default_point();
        let mut rng = master(1);
        for _ in 0..10 {
            let s = fam.sample_site(&theta(&[0.2, 0.1]), &mut rng).unwrap();
            assert_eq!((s.w_m2(), s.w_m1()), (0.1, 0.2));
            assert!((s.w_p1() - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn dirichlet_first_moment_by_sampling() {
        let fam = Family::default_dirichlet();
        let sampler = fam.sampler(&theta(&[1.0, 1.0, 1.0])).unwrap();
        let mut rng = master(2);
        let xs: Vec<f64> = (0..100_000).map(|_| sampler.sample(&mut rng).w_m1()).collect();
        let (m, se) = mean_stderr(&xs);
        assert!((m - 1.0 / 3.0).abs() < 3.0 * se, "mean {m} se {se}");
        // Same first moment by quadrature.
        let q = quadrature_moment([1.0, 1.0, 1.0], [1, 0, 0], 2000).exp();
        assert!((q - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn mixture_weight_by_sampling() {
        let fam = Family::default_mixture();
        let atoms = Family::default_atoms();
        let sampler = fam.sampler(&theta(&[0.5])).unwrap();
        let mut rng = master(3);
        let n = 100_000;
        let hits = (0..n).filter(|_| sampler.sample(&mut rng) == atoms[0]).count();
        let p = hits as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * se, "p = {p}");
    }

    #[test]
    fn log_moment_examples() {
        let d = Family::default_dirichlet();
        let one = theta(&[1.0, 1.0, 1.0]);
        assert_eq!(d.log_moment(&one, 0, 0, 0).unwrap(), 0.0);
        assert!((d.log_moment(&one, 1, 0, 0).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        let p = Family::default_point();
        let expect = 0.2f64.ln() + 0.1f64.ln() + 2.0 * 0.7f64.ln();
        assert!((p.log_moment(&theta(&[0.2, 0.1]), 1, 1, 2).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn point_with_zero_coordinate_gives_neg_infinity() {
        let p = Family::point(vec![Interval::new(0.0, 0.4); 2]).unwrap();
        let t = theta(&[0.0, 0.1]);
        assert_eq!(p.log_moment(&t, 1, 0, 0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(p.log_moment(&t, 0, 1, 1).unwrap(), 0.1f64.ln() + 0.9f64.ln());
    }

    #[test]
    fn dirichlet_closed_form_matches_quadrature_grid() {
        // 20 cases: shapes ≥ 1.5 (or exactly 1) keep the trapezoid rule accurate.
        let alphas = [
            [1.0, 1.0, 1.0],
            [2.0, 1.5, 3.0],
            [1.5, 2.5, 6.0],
            [3.0, 2.0, 4.5],
        ];
        let ys = [[0, 0, 1], [1, 0, 0], [2, 1, 3], [0, 3, 1], [1, 1, 5]];
        let fam = Family::default_dirichlet();
        for a in alphas {
            for y in ys {
                let closed = fam.log_moment(&theta(&a), y[0], y[1], y[2]).unwrap();
                let quad = quadrature_moment(a, y, 200_000);
                assert!(
                    (closed - quad).abs() < 1e-6,
                    "alpha {a:?} y {y:?}: {closed} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn every_family_integrates_to_one() {
        let cases = [
            (Family::default_dirichlet(), theta(&[0.3, 7.0, 12.0])),
            (Family::default_point(), theta(&[0.33, 0.02])),
            (Family::default_mixture(), theta(&[0.71])),
        ];
        for (fam, t) in cases {
            let m = fam.log_moment(&t, 0, 0, 0).unwrap();
            assert!((m.exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_log_moment() {
        let cases = [
            (Family::default_dirichlet(), theta(&[1.0, 2.0, 6.0])),
            (Family::default_mixture(), theta(&[0.3])),
        ];
        let mut rng = master(4);
        for (fam, t) in cases {
            let sampler = fam.sampler(&t).unwrap();
            for (y1, y2, r) in [(1, 0, 2), (0, 2, 1), (2, 1, 0)] {
                let xs: Vec<f64> = (0..50_000)
                    .map(|_| sampler.sample(&mut rng).ln_moment(y1, y2, r).exp())
                    .collect();
                let (m, se) = mean_stderr(&xs);
                let exact = fam.log_moment(&t, y1, y2, r).unwrap().exp();
                assert!((m - exact).abs() < 4.0 * se, "{:?}: {m} vs {exact}", fam.kind());
            }
        }
    }

    proptest! {
        #[test]
        fn log_moment_is_monotone(
            a1 in 0.1f64..20.0, a2 in 0.1f64..20.0, a3 in 0.1f64..20.0,
            y1 in 0u64..30, y2 in 0u64..30, r in 0u64..30,
        ) {
            let fam = Family::default_dirichlet();
            let t = theta(&[a1, a2, a3]);
            let base = fam.log_moment(&t, y1, y2, r).unwrap();
            prop_assert!(base <= 1e-12);
            prop_assert!(fam.log_moment(&t, y1 + 1, y2, r).unwrap() <= base + 1e-12);
            prop_assert!(fam.log_moment(&t, y1, y2 + 1, r).unwrap() <= base + 1e-12);
            prop_assert!(fam.log_moment(&t, y1, y2, r + 1).unwrap() <= base + 1e-12);
        }

        #[test]
        fn mixture_log_moment_is_monotone(w in 0.01f64..0.99, y1 in 0u64..20, y2 in 0u64..20, r in 0u64..20) {
            let fam = Family::default_mixture();
            let t = theta(&[w]);
            let base = fam.log_moment(&t, y1, y2, r).unwrap();
            prop_assert!(fam.log_moment(&t, y1 + 1, y2, r).unwrap() <= base + 1e-12);
            prop_assert!(fam.log_moment(&t, y1, y2 + 1, r).unwrap() <= base + 1e-12);
            prop_assert!(fam.log_moment(&t, y1, y2, r + 1).unwrap() <= base + 1e-12);
        }
    }
}
