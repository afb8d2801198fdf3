//! The 3-type branching process with immigration read off a walk path.
//!
//! Individuals are excursions. Looking down from the target, generation `k`
//! of the process is the vector `U_{n-k}` of left jumps grouped by site:
//! type 1 counts `i → i-1`, type 2 counts `i → i-2` and type 3 counts
//! `i+1 → i-1`. Every generation receives one type-1 immigrant. Offspring
//! laws are linear fractional: a parent keeps drawing jumps from the site
//! law, counting `-1` and `-2` outcomes, until the first `+1`. A type-2 parent
//! additionally leaves exactly one type-3 child.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::env::{Family, ParamPoint, SiteLaw};
use crate::error::Result;
use crate::numeric::{count_log, ln_factorial, tv_truncated, EmpiricalLaw, TvReport};
use crate::seeding::{domain, substream};
use crate::sites::SiteTable;
use crate::walk::{self, step, Jump, WalkOptions, WalkRecord};

/// Generation counts `(z1, z2, z3)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GenVector {
    pub z1: u64,
    pub z2: u64,
    pub z3: u64,
}

impl GenVector {
    pub const ZERO: GenVector = GenVector { z1: 0, z2: 0, z3: 0 };

    pub fn new(z1: u64, z2: u64, z3: u64) -> Self {
        Self { z1, z2, z3 }
    }

    /// `z1 + z2 + z3`
    pub fn total(&self) -> u64 {
        self.z1 + self.z2 + self.z3
    }

    /// Steps spent by the excursions: `2·z1 + z2 + 2·z3`.
    pub fn steps(&self) -> u64 {
        2 * self.z1 + self.z2 + 2 * self.z3
    }
}

impl std::ops::AddAssign for GenVector {
    fn add_assign(&mut self, o: Self) {
        self.z1 += o.z1;
        self.z2 += o.z2;
        self.z3 += o.z3;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParentType {
    One,
    Two,
    Three,
}

impl ParentType {
    pub const ALL: [ParentType; 3] = [ParentType::One, ParentType::Two, ParentType::Three];

    pub fn index(self) -> usize {
        match self {
            ParentType::One => 0,
            ParentType::Two => 1,
            ParentType::Three => 2,
        }
    }
}

/// Offspring of one parent living at a site with law `site`.
pub fn offspring_sample<R: Rng + ?Sized>(site: &SiteLaw, parent: ParentType, rng: &mut R) -> GenVector {
    let mut v = GenVector {
        z3: u64::from(parent == ParentType::Two),
        ..GenVector::ZERO
    };
    loop {
        match step(site, rng) {
            Jump::Left1 => v.z1 += 1,
            Jump::Left2 => v.z2 += 1,
            Jump::Right => return v,
        }
    }
}

/// `(a+b)!/(a!b!) ω(-1)^a ω(-2)^b ω(1)` on the admissible type-3 entry, else 0.
pub fn offspring_pmf(site: &SiteLaw, parent: ParentType, v: GenVector) -> f64 {
    let want_z3 = u64::from(parent == ParentType::Two);
    if v.z3 != want_z3 {
        return 0.0;
    }
    let ln_coef = ln_factorial(v.z1 + v.z2) - ln_factorial(v.z1) - ln_factorial(v.z2);
    (ln_coef + count_log(v.z1, site.w_m1()) + count_log(v.z2, site.w_m2()) + site.w_p1().ln()).exp()
}

/// The U-process of a complete walk record, indexed by site.
#[derive(Clone, Debug, PartialEq)]
pub struct UProcess {
    target: u64,
    min_site: i64,
    by_site: SiteTable<GenVector>,
}

impl UProcess {
    pub fn target(&self) -> u64 {
        self.target
    }

    pub fn min_site(&self) -> i64 {
        self.min_site
    }

    /// `U_i`, zero outside the visited range.
    pub fn at(&self, site: i64) -> GenVector {
        self.by_site.get_or_default(site)
    }

    /// `U_n, U_{n-1}, ..., U_0`: the first `n` generations in branching order.
    pub fn generations(&self) -> Vec<GenVector> {
        (0..=self.target as i64).rev().map(|i| self.at(i)).collect()
    }

    /// `U_{-1}, U_{-2}, ...` down to the lowest visited site.
    pub fn negative_tail(&self) -> Vec<(i64, GenVector)> {
        (self.min_site..0).rev().map(|i| (i, self.at(i))).collect()
    }

    pub fn write_generations<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "generation\tz1\tz2\tz3")?;
        for (k, v) in self.generations().iter().enumerate() {
            writeln!(out, "{k}\t{}\t{}\t{}", v.z1, v.z2, v.z3)?;
        }
        Ok(())
    }
}

/// Reads `U` off the walk counts: `U_{i,1} = l1(i)`, `U_{i,2} = l2(i)`,
/// `U_{i,3} = l2(i+1)`.
pub fn extract_u(rec: &WalkRecord) -> UProcess {
    let n = rec.target() as i64;
    let mut by_site = SiteTable::new();
    for i in rec.min_site()..=n {
        let here = rec.counts(i);
        let above = if i + 1 >= n { 0 } else { rec.counts(i + 1).l2 };
        let here = if i >= n { Default::default() } else { here };
        *by_site.get_mut(i) = GenVector::new(here.l1, here.l2, above);
    }
    UProcess {
        target: rec.target(),
        min_site: rec.min_site(),
        by_site,
    }
}

/// Reads `U` directly from path steps, independent of the count tables.
pub fn extract_u_from_path(path: &[i64], target: u64) -> UProcess {
    let mut by_site: SiteTable<GenVector> = SiteTable::new();
    for w in path.windows(2) {
        let (from, to) = (w[0], w[1]);
        match to - from {
            -1 => by_site.get_mut(from).z1 += 1,
            -2 => {
                by_site.get_mut(from).z2 += 1;
                by_site.get_mut(from - 1).z3 += 1;
            }
            _ => {}
        }
    }
    UProcess {
        target,
        min_site: path.iter().copied().min().unwrap_or(0),
        by_site,
    }
}

/// Checks `T_n = n + Σ_k U_k · (2, 1, 2)` over all visited sites `k < n`.
pub fn tn_identity(rec: &WalkRecord) -> bool {
    if !rec.is_complete() {
        return false;
    }
    let u = extract_u(rec);
    let n = rec.target() as i64;
    let extra: u64 = (u.min_site()..n).map(|k| u.at(k).steps()).sum();
    rec.t_n() == rec.target() + extra
}

/// `Z_0 = 0, Z_1, ..., Z_n` in the quenched environment `ω_1..ω_n`.
pub fn simulate_z<R: Rng + ?Sized>(sites: &[SiteLaw], rng: &mut R) -> Vec<GenVector> {
    let mut traj = Vec::with_capacity(sites.len() + 1);
    let mut z = GenVector::ZERO;
    traj.push(z);
    for site in sites {
        z = next_generation(site, z, rng);
        traj.push(z);
    }
    traj
}

/// One generation step: `1 + z1` type-1 parents, `z2` type-2 and `z3` type-3.
pub fn next_generation<R: Rng + ?Sized>(site: &SiteLaw, prev: GenVector, rng: &mut R) -> GenVector {
    let mut next = GenVector::ZERO;
    for _ in 0..(1 + prev.z1) {
        next += offspring_sample(site, ParentType::One, rng);
    }
    for _ in 0..prev.z2 {
        next += offspring_sample(site, ParentType::Two, rng);
    }
    for _ in 0..prev.z3 {
        next += offspring_sample(site, ParentType::Three, rng);
    }
    next
}

/// Empirical mass below this is dropped from total-variation comparisons.
pub const TV_CUTOFF: f64 = 1e-4;

const CHUNK: u64 = 1_000;

/// Per-generation comparison of the U-process and the Z-process laws.
#[derive(Clone, Debug)]
pub struct UzReport {
    /// Entry `k` compares `U_{n-k}` with `Z_k`.
    pub per_generation: Vec<TvReport>,
}

impl UzReport {
    pub fn max_tv(&self) -> f64 {
        self.per_generation.iter().map(|r| r.tv).fold(0.0, f64::max)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "generation\ttv\ttruncated_mass")?;
        for (k, r) in self.per_generation.iter().enumerate() {
            writeln!(
                out,
                "{k}\t{}\t{}",
                crate::numeric::fmt_sig(r.tv),
                crate::numeric::fmt_sig(r.truncated_mass)
            )?;
        }
        Ok(())
    }
}

/// Simulates `replicates` walks to `n` and `replicates` Z-trajectories of
/// length `n` in fresh environments, then compares the laws generation by
/// generation.
pub fn u_z_distribution_check(
    family: &Family,
    theta: &ParamPoint,
    n: u64,
    replicates: u64,
    seed: u64,
) -> Result<UzReport> {
    let sampler = family.sampler(theta)?;
    let width = (n + 1) as usize;
    let chunks = replicates.div_ceil(CHUNK);
    let empty = || vec![EmpiricalLaw::<GenVector>::new(); width];

    let walk_laws: Vec<Vec<EmpiricalLaw<GenVector>>> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let mut laws = empty();
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(replicates) {
                let mut rng = substream(seed, domain::WALK, i);
                let mut env = walk::LazyEnvironment::new(family, theta)?;
                let rec = walk::simulate_in(&mut env, n, WalkOptions::for_target(n), &mut rng)?;
                for (k, g) in extract_u(&rec).generations().into_iter().enumerate() {
                    laws[k].push(g);
                }
            }
            Ok(laws)
        })
        .collect::<Result<_>>()?;

    let z_laws: Vec<Vec<EmpiricalLaw<GenVector>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut laws = empty();
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(replicates) {
                let mut rng = substream(seed, domain::BRANCHING, i);
                let sites: Vec<SiteLaw> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
                for (k, g) in simulate_z(&sites, &mut rng).into_iter().enumerate() {
                    laws[k].push(g);
                }
            }
            laws
        })
        .collect();

    let merge = |parts: Vec<Vec<EmpiricalLaw<GenVector>>>| {
        let mut total = empty();
        for part in parts {
            for (t, p) in total.iter_mut().zip(&part) {
                t.merge(p);
            }
        }
        total
    };
    let u_total = merge(walk_laws);
    let z_total = merge(z_laws);
    let per_generation = u_total
        .iter()
        .zip(&z_total)
        .map(|(u, z)| tv_truncated(&u.to_probs(), &z.to_probs(), TV_CUTOFF))
        .collect();
    Ok(UzReport { per_generation })
}

/// Empirical law of offspring counts, for tests and diagnostics.
pub fn offspring_histogram<R: Rng + ?Sized>(
    site: &SiteLaw,
    parent: ParentType,
    draws: u64,
    rng: &mut R,
) -> BTreeMap<GenVector, u64> {
    let mut h = BTreeMap::new();
    for _ in 0..draws {
        *h.entry(offspring_sample(site, parent, rng)).or_insert(0) += 1;
    }
    h
}
