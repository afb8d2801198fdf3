//! Quenched simulation of the (2,1) walk and the jump counts it leaves behind.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::env::{Family, ParamPoint, SiteLaw, SiteSampler};
use crate::error::{Error, Result};
use crate::sites::SiteTable;

/// Paths longer than this are not retained; counts are kept regardless.
pub const DEFAULT_PATH_CAP: u64 = 10_000_000;
/// Default step budget is this many steps per unit of target distance.
pub const DEFAULT_CAP_FACTOR: u64 = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Jump {
    Left2,
    Left1,
    Right,
}

impl Jump {
    pub fn offset(self) -> i64 {
        match self {
            Jump::Left2 => -2,
            Jump::Left1 => -1,
            Jump::Right => 1,
        }
    }
}

/// One quenched step from a site with law `site`.
pub fn step<R: Rng + ?Sized>(site: &SiteLaw, rng: &mut R) -> Jump {
    let u: f64 = rng.random();
    if u < site.w_m2() {
        Jump::Left2
    } else if u < site.w_m2() + site.w_m1() {
        Jump::Left1
    } else {
        Jump::Right
    }
}

/// Departures from one site: `l1` jumps to `x-1`, `l2` to `x-2`, `r` to `x+1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct JumpCounts {
    pub l1: u64,
    pub l2: u64,
    pub r: u64,
}

impl JumpCounts {
    fn record(&mut self, jump: Jump) {
        match jump {
            Jump::Left2 => self.l2 += 1,
            Jump::Left1 => self.l1 += 1,
            Jump::Right => self.r += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.l1 + self.l2 + self.r
    }
}

/// Source of site laws for a simulation. Each site is asked once; the
/// walker memoizes the answer.
pub trait Environment {
    fn draw<R: Rng + ?Sized>(&mut self, site: i64, rng: &mut R) -> Result<SiteLaw>;
}

/// i.i.d. environment drawn from `ν_θ` on first visit.
#[derive(Clone, Debug)]
pub struct LazyEnvironment {
    sampler: SiteSampler,
}

impl LazyEnvironment {
    pub fn new(family: &Family, theta: &ParamPoint) -> Result<Self> {
        Ok(Self {
            sampler: family.sampler(theta)?,
        })
    }
}

impl Environment for LazyEnvironment {
    fn draw<R: Rng + ?Sized>(&mut self, _site: i64, rng: &mut R) -> Result<SiteLaw> {
        Ok(self.sampler.sample(rng))
    }
}

/// A fixed environment on a finite window of sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteRange {
    first: i64,
    laws: Vec<SiteLaw>,
}

impl SiteRange {
    pub fn new(first: i64, laws: Vec<SiteLaw>) -> Self {
        Self { first, laws }
    }

    /// Same law on every site of `first..=last`.
    pub fn constant(first: i64, last: i64, law: SiteLaw) -> Self {
        Self::new(first, vec![law; (last - first + 1).max(0) as usize])
    }

    /// i.i.d. draws from `ν_θ` on `first..=last`, in increasing site order.
    pub fn sample<R: Rng + ?Sized>(
        family: &Family,
        theta: &ParamPoint,
        first: i64,
        last: i64,
        rng: &mut R,
    ) -> Result<Self> {
        let sampler = family.sampler(theta)?;
        let laws = (first..=last).map(|_| sampler.sample(rng)).collect();
        Ok(Self::new(first, laws))
    }

    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn last(&self) -> i64 {
        self.first + self.laws.len() as i64 - 1
    }

    pub fn get(&self, site: i64) -> Option<&SiteLaw> {
        let idx = site.checked_sub(self.first)?;
        if idx < 0 {
            return None;
        }
        self.laws.get(idx as usize)
    }

    pub fn laws(&self) -> &[SiteLaw] {
        &self.laws
    }
}

impl Environment for SiteRange {
    fn draw<R: Rng + ?Sized>(&mut self, site: i64, _rng: &mut R) -> Result<SiteLaw> {
        self.get(site).copied().ok_or(Error::OutsideEnvironment(site))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct WalkOptions {
    pub step_cap: u64,
    pub path_cap: u64,
}

impl WalkOptions {
    pub fn for_target(target: u64) -> Self {
        Self {
            step_cap: DEFAULT_CAP_FACTOR.saturating_mul(target),
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

/// A walk observed up to the first hitting time `t_n` of `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkRecord {
    target: u64,
    t_n: u64,
    complete: bool,
    min_site: i64,
    path: Option<Vec<i64>>,
    env_used: SiteTable<Option<SiteLaw>>,
    counts: SiteTable<JumpCounts>,
}

impl WalkRecord {
    pub fn target(&self) -> u64 {
        self.target
    }

    /// Steps taken; the first hitting time of the target for complete records.
    pub fn t_n(&self) -> u64 {
        self.t_n
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Lowest site visited.
    pub fn min_site(&self) -> i64 {
        self.min_site
    }

    /// Positions `X_0..X_{t_n}`, unless the path exceeded the retention cap.
    pub fn path(&self) -> Option<&[i64]> {
        self.path.as_deref()
    }

    /// Law of every site the walk departed from.
    pub fn env_law(&self, site: i64) -> Option<SiteLaw> {
        self.env_used.get(site).copied().flatten()
    }

    pub fn env_used(&self) -> impl Iterator<Item = (i64, SiteLaw)> + '_ {
        self.env_used
            .iter()
            .filter_map(|(x, law)| law.map(|l| (x, l)))
    }

    /// Departure counts at `site` (zero for sites never left).
    pub fn counts(&self, site: i64) -> JumpCounts {
        self.counts.get_or_default(site)
    }

    pub fn count_table(&self) -> &SiteTable<JumpCounts> {
        &self.counts
    }

    /// Builds a complete record from stored counts, e.g. read back from a file.
    pub fn from_counts(target: u64, t_n: u64, min_site: i64, counts: SiteTable<JumpCounts>) -> Self {
        Self {
            target,
            t_n,
            complete: true,
            min_site,
            path: None,
            env_used: SiteTable::new(),
            counts,
        }
    }

    /// Builds a record from an explicit path ending at its first visit to `target`.
    pub fn from_path(path: Vec<i64>, target: u64) -> Result<Self> {
        validate_path(&path, target)?;
        let counts = tally_path(&path);
        Ok(Self {
            target,
            t_n: (path.len() - 1) as u64,
            complete: true,
            min_site: path.iter().copied().min().unwrap_or(0),
            path: Some(path),
            env_used: SiteTable::new(),
            counts,
        })
    }

    /// Writes the columnar counts file: a header block with `n`, `t_n`,
    /// `seed`, then one `site l1 l2 r` row per site of the visited range.
    pub fn write_counts<W: Write>(&self, seed: u64, mut out: W) -> Result<()> {
        writeln!(out, "n\tt_n\tseed")?;
        writeln!(out, "{}\t{}\t{}", self.target, self.t_n, seed)?;
        writeln!(out, "site\tl1\tl2\tr")?;
        for x in self.min_site..=self.target as i64 {
            let c = self.counts(x);
            writeln!(out, "{x}\t{}\t{}\t{}", c.l1, c.l2, c.r)?;
        }
        Ok(())
    }

    /// Writes `step position` rows. Fails when the path was not retained.
    pub fn write_path<W: Write>(&self, mut out: W) -> Result<()> {
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("path was not retained".into()))?;
        writeln!(out, "step\tposition")?;
        for (t, x) in path.iter().enumerate() {
            writeln!(out, "{t}\t{x}")?;
        }
        Ok(())
    }
}

/// Contents of a counts file.
#[derive(Clone, Debug, PartialEq)]
pub struct CountsFile {
    pub seed: u64,
    pub record: WalkRecord,
}

fn parse_field<T: std::str::FromStr>(s: Option<&str>, line: usize) -> Result<T> {
    s.and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("counts file line {line}: bad field")))
}

pub fn read_counts<R: BufRead>(input: R) -> Result<CountsFile> {
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(Error::Parse(format!("counts file ended before {what}"))),
        }
    };
    let (_, h) = next("header")?;
    if h.trim() != "n\tt_n\tseed" {
        return Err(Error::Parse("counts file must start with `n\tt_n\tseed`".into()));
    }
    let (ln, meta) = next("metadata")?;
    let mut f = meta.split('\t');
    let target: u64 = parse_field(f.next(), ln)?;
    let t_n: u64 = parse_field(f.next(), ln)?;
    let seed: u64 = parse_field(f.next(), ln)?;
    let (_, cols) = next("column header")?;
    if cols.trim() != "site\tl1\tl2\tr" {
        return Err(Error::Parse("expected `site\tl1\tl2\tr` column header".into()));
    }
    let mut counts = SiteTable::new();
    let mut min_site = i64::MAX;
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let x: i64 = parse_field(f.next(), i + 1)?;
        let c = JumpCounts {
            l1: parse_field(f.next(), i + 1)?,
            l2: parse_field(f.next(), i + 1)?,
            r: parse_field(f.next(), i + 1)?,
        };
        min_site = min_site.min(x);
        *counts.get_mut(x) = c;
    }
    if min_site == i64::MAX {
        min_site = 0;
    }
    Ok(CountsFile {
        seed,
        record: WalkRecord::from_counts(target, t_n, min_site, counts),
    })
}

pub fn read_path<R: BufRead>(input: R) -> Result<Vec<i64>> {
    let mut path = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "step\tposition" {
                return Err(Error::Parse("path file must start with `step\tposition`".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let _: u64 = parse_field(f.next(), i + 1)?;
        path.push(parse_field(f.next(), i + 1)?);
    }
    Ok(path)
}

fn validate_path(path: &[i64], target: u64) -> Result<()> {
    let n = target as i64;
    if path.first() != Some(&0) {
        return Err(Error::InvalidArgument("path must start at 0".into()));
    }
    if path.last() != Some(&n) {
        return Err(Error::InvalidArgument(format!("path must end at target {n}")));
    }
    for w in path.windows(2) {
        if !matches!(w[1] - w[0], -2 | -1 | 1) {
            return Err(Error::InvalidArgument(format!(
                "illegal jump {} -> {}",
                w[0], w[1]
            )));
        }
    }
    if path[..path.len() - 1].iter().any(|&x| x >= n) {
        return Err(Error::InvalidArgument(
            "path visits the target before its last step".into(),
        ));
    }
    Ok(())
}

/// Departure counts recomputed from a path.
pub fn tally_path(path: &[i64]) -> SiteTable<JumpCounts> {
    let mut counts: SiteTable<JumpCounts> = SiteTable::new();
    for w in path.windows(2) {
        let jump = match w[1] - w[0] {
            -2 => Jump::Left2,
            -1 => Jump::Left1,
            1 => Jump::Right,
            d => panic!("illegal jump {d}"),
        };
        counts.get_mut(w[0]).record(jump);
    }
    counts
}

/// Runs the walk in `env` until it first hits `target`.
pub fn simulate_in<E: Environment, R: Rng + ?Sized>(
    env: &mut E,
    target: u64,
    opts: WalkOptions,
    rng: &mut R,
) -> Result<WalkRecord> {
    if target < 1 {
        return Err(Error::InvalidArgument("target must be at least 1".into()));
    }
    if opts.step_cap < target {
        return Err(Error::InvalidArgument(format!(
            "step cap {} below target {target}",
            opts.step_cap
        )));
    }
    let n = target as i64;
    let mut rec = WalkRecord {
        target,
        t_n: 0,
        complete: false,
        min_site: 0,
        path: Some(vec![0]),
        env_used: SiteTable::new(),
        counts: SiteTable::new(),
    };
    let mut x = 0i64;
    while x != n {
        if rec.t_n >= opts.step_cap {
            return Err(Error::BudgetExceeded {
                cap: opts.step_cap,
                target,
                partial: Box::new(rec),
            });
        }
        let law = match *rec.env_used.get_mut(x) {
            Some(law) => law,
            None => {
                let law = env.draw(x, rng)?;
                *rec.env_used.get_mut(x) = Some(law);
                law
            }
        };
        let jump = step(&law, rng);
        rec.counts.get_mut(x).record(jump);
        x += jump.offset();
        rec.t_n += 1;
        rec.min_site = rec.min_site.min(x);
        if let Some(p) = rec.path.as_mut() {
            if rec.t_n > opts.path_cap {
                rec.path = None;
            } else {
                p.push(x);
            }
        }
    }
    rec.complete = true;
    Ok(rec)
}

/// Walk in a fresh i.i.d. environment from `ν_θ` until it first hits `target`.
pub fn simulate_to<R: Rng + ?Sized>(
    family: &Family,
    theta: &ParamPoint,
    target: u64,
    step_cap: u64,
    rng: &mut R,
) -> Result<WalkRecord> {
    let mut env = LazyEnvironment::new(family, theta)?;
    let opts = WalkOptions {
        step_cap,
        ..WalkOptions::for_target(target)
    };
    simulate_in(&mut env, target, opts, rng)
}

/// Position `X_t` after `steps` steps in a fresh environment.
pub fn run_steps<R: Rng + ?Sized>(
    family: &Family,
    theta: &ParamPoint,
    steps: u64,
    rng: &mut R,
) -> Result<i64> {
    let sampler = family.sampler(theta)?;
    let mut env: SiteTable<Option<SiteLaw>> = SiteTable::new();
    let mut x = 0i64;
    for _ in 0..steps {
        let slot = env.get_mut(x);
        let law = *slot.get_or_insert_with(|| sampler.sample(rng));
        x += step(&law, rng).offset();
    }
    Ok(x)
}

/// Checks `R_x = L_{x+1,1} + L_{x+1,2} + L_{x+2,2} + 1` for `0 ≤ x < n`.
pub fn count_identity_check(rec: &WalkRecord) -> bool {
    if !rec.is_complete() {
        return false;
    }
    let n = rec.target() as i64;
    let c = |x: i64| {
        if x >= n {
            JumpCounts::default()
        } else {
            rec.counts(x)
        }
    };
    (0..n).all(|x| c(x).r == c(x + 1).l1 + c(x + 1).l2 + c(x + 2).l2 + 1)
}
