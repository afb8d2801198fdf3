//! Plain-text run configuration.
//!
//! One `section.key = value` per line, `#` starts a comment. Unknown keys,
//! repeated keys and malformed values are rejected; `run.seed` is required.
//!
//! ```text
//! family.kind  = dirichlet            # dirichlet | point | finite-mixture
//! family.box   = 0.1:20, 0.1:20, 0.1:20
//! family.atoms = 0.1 0.2 0.7; 0.02 0.08 0.9   # ω(-2) ω(-1) ω(1) per atom
//! family.theta = 1, 1, 6
//! run.seed     = 42
//! run.threads  = auto
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::env::{Family, FamilyKind, Interval, ParamPoint, SiteLaw};
use crate::error::{Error, Result};
use crate::estimate::{ConsistencyOptions, MleOptions};
use crate::spectral::{InvariantOptions, Orientation, Which, DEFAULT_K_CAP, DEFAULT_TAIL_TOL};
use crate::bpire::GenVector;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "family.kind",
    "family.box",
    "family.atoms",
    "family.theta",
    "run.seed",
    "run.threads",
    "walk.n",
    "walk.step_cap",
    "estimate.grid_points",
    "estimate.refine",
    "estimate.max_iter",
    "estimate.simplex_tol",
    "lyapunov.steps",
    "lyapunov.which",
    "spectral.env_samples",
    "spectral.orientation",
    "spectral.tail_tol",
    "spectral.k_cap",
    "spectral.v_max",
    "bpire.n",
    "bpire.replicates",
    "kernel.x",
    "kernel.samples",
    "kernel.max_total",
    "consistency.n_list",
    "consistency.replicates",
    "consistency.lyapunov_steps",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Count(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub family: Family,
    pub theta: Option<ParamPoint>,
    pub seed: u64,
    pub threads: Threads,
    pub walk_n: u64,
    pub step_cap: Option<u64>,
    pub mle: MleOptions,
    pub lyapunov_steps: u64,
    pub lyapunov_which: Which,
    pub invariant: InvariantOptions,
    pub bpire_n: u64,
    pub bpire_replicates: u64,
    pub kernel_x: GenVector,
    pub kernel_samples: u64,
    pub kernel_max_total: u64,
    pub consistency: ConsistencyOptions,
}

impl RunConfig {
    /// The true parameter, required by simulation commands.
    pub fn theta(&self) -> Result<&ParamPoint> {
        self.theta
            .as_ref()
            .ok_or_else(|| Error::Config("family.theta is required for this command".into()))
    }

    pub fn tail_tol(&self) -> f64 {
        self.invariant.tail_tol
    }

    pub fn k_cap(&self) -> u64 {
        self.invariant.k_cap
    }
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| config_err(key, format!("cannot parse {:?}", s.trim())))
}

fn list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',').map(|p| num(key, p)).collect()
}

fn positive(key: &str, v: u64) -> Result<u64> {
    if v == 0 {
        Err(config_err(key, "must be positive"))
    } else {
        Ok(v)
    }
}

/// Raw key-value pairs in file order, with duplicates and unknown keys rejected.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `section.key = value`", lineno + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: key {key:?} repeated", lineno + 1)));
        }
    }
    Ok(out)
}

fn parse_box(key: &str, s: &str) -> Result<Vec<Interval>> {
    s.split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| config_err(key, "expected lo:hi per coordinate"))?;
            Ok(Interval::new(num(key, lo)?, num(key, hi)?))
        })
        .collect()
}

fn parse_atoms(key: &str, s: &str) -> Result<[SiteLaw; 2]> {
    let atoms: Vec<SiteLaw> = s
        .split(';')
        .map(|part| {
            let w: Vec<f64> = part.split_whitespace().map(|x| num(key, x)).collect::<Result<_>>()?;
            if w.len() != 3 {
                return Err(config_err(key, "each atom needs three weights ω(-2) ω(-1) ω(1)"));
            }
            SiteLaw::new(w[0], w[1], w[2]).map_err(|e| config_err(key, e))
        })
        .collect::<Result<_>>()?;
    atoms
        .try_into()
        .map_err(|_| config_err(key, "exactly two atoms separated by `;`"))
}

fn parse_family(kv: &BTreeMap<String, String>) -> Result<Family> {
    let kind = kv.get("family.kind").map(String::as_str).unwrap_or("dirichlet");
    let bounds = kv.get("family.box").map(|s| parse_box("family.box", s)).transpose()?;
    let atoms = kv.get("family.atoms").map(|s| parse_atoms("family.atoms", s)).transpose()?;
    if atoms.is_some() && kind != "finite-mixture" {
        return Err(config_err("family.atoms", "only valid with kind = finite-mixture"));
    }
    let family = match kind {
        "dirichlet" => match bounds {
            Some(b) => Family::dirichlet(b)?,
            None => Family::default_dirichlet(),
        },
        "point" => match bounds {
            Some(b) => Family::point(b)?,
            None => Family::default_point(),
        },
        "finite-mixture" => {
            let atoms = atoms.unwrap_or_else(Family::default_atoms);
            let b = bounds.unwrap_or_else(|| Family::default_mixture().bounds().to_vec());
            Family::new(FamilyKind::FiniteMixture { atoms }, b)?
        }
        other => return Err(config_err("family.kind", format!("unknown family {other:?}"))),
    };
    Ok(family)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_pairs(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str);
        let family = parse_family(&kv)?;
        let theta = get("family.theta")
            .map(|s| list::<f64>("family.theta", s).map(ParamPoint::new))
            .transpose()?;
        if let Some(t) = &theta {
            family.check(t)?;
        }
        let seed = num("run.seed", get("run.seed").ok_or_else(|| Error::Config("run.seed is required".into()))?)?;
        let threads = match get("run.threads") {
            None | Some("auto") => Threads::Auto,
            Some(s) => Threads::Count(positive("run.threads", num("run.threads", s)?)? as usize),
        };
        let opt_u64 = |k: &str, default: u64| -> Result<u64> { get(k).map_or(Ok(default), |s| num(k, s)) };
        let opt_f64 = |k: &str, default: f64| -> Result<f64> { get(k).map_or(Ok(default), |s| num(k, s)) };

        let mle_default = MleOptions::default();
        let mle = MleOptions {
            grid_points: opt_u64("estimate.grid_points", mle_default.grid_points as u64)? as usize,
            refine: get("estimate.refine").map_or(Ok(mle_default.refine), |s| num("estimate.refine", s))?,
            max_iter: opt_u64("estimate.max_iter", mle_default.max_iter as u64)? as usize,
            simplex_tol: opt_f64("estimate.simplex_tol", mle_default.simplex_tol)?,
        };
        if mle.grid_points < 5 {
            return Err(config_err("estimate.grid_points", "must be at least 5"));
        }
        let lyapunov_which = match get("lyapunov.which").unwrap_or("A") {
            "A" | "a" => Which::A,
            "B" | "b" => Which::B,
            other => return Err(config_err("lyapunov.which", format!("expected A or B, got {other:?}"))),
        };
        let inv_default = InvariantOptions::default();
        let invariant = InvariantOptions {
            env_samples: positive("spectral.env_samples", opt_u64("spectral.env_samples", inv_default.env_samples)?)?,
            orientation: match get("spectral.orientation").unwrap_or("forward") {
                "forward" => Orientation::Forward,
                "reversed" => Orientation::Reversed,
                other => {
                    return Err(config_err(
                        "spectral.orientation",
                        format!("expected forward or reversed, got {other:?}"),
                    ))
                }
            },
            tail_tol: opt_f64("spectral.tail_tol", DEFAULT_TAIL_TOL)?,
            k_cap: positive("spectral.k_cap", opt_u64("spectral.k_cap", DEFAULT_K_CAP)?)?,
            v_max: opt_u64("spectral.v_max", inv_default.v_max)?,
        };
        if !(invariant.tail_tol > 0.0) {
            return Err(config_err("spectral.tail_tol", "must be positive"));
        }
        let kernel_x = match get("kernel.x") {
            None => GenVector::new(1, 1, 0),
            Some(s) => {
                let v: Vec<u64> = list("kernel.x", s)?;
                if v.len() != 3 {
                    return Err(config_err("kernel.x", "expected three counts"));
                }
                GenVector::new(v[0], v[1], v[2])
            }
        };
        let cons_default = ConsistencyOptions::default();
        let consistency = ConsistencyOptions {
            n_list: get("consistency.n_list").map_or(Ok(cons_default.n_list), |s| list("consistency.n_list", s))?,
            replicates: positive("consistency.replicates", opt_u64("consistency.replicates", cons_default.replicates)?)?,
            mle,
            lyapunov_steps: opt_u64("consistency.lyapunov_steps", cons_default.lyapunov_steps)?,
        };
        Ok(Self {
            family,
            theta,
            seed,
            threads,
            walk_n: positive("walk.n", opt_u64("walk.n", 1_000)?)?,
            step_cap: get("walk.step_cap").map(|s| num("walk.step_cap", s)).transpose()?,
            mle,
            lyapunov_steps: opt_u64("lyapunov.steps", 1_000_000)?,
            lyapunov_which,
            invariant,
            bpire_n: positive("bpire.n", opt_u64("bpire.n", 6)?)?,
            bpire_replicates: positive("bpire.replicates", opt_u64("bpire.replicates", 100_000)?)?,
            kernel_x,
            kernel_samples: positive("kernel.samples", opt_u64("kernel.samples", 100_000)?)?,
            kernel_max_total: opt_u64("kernel.max_total", 500)?,
            consistency,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse("run.seed = 7\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.family, Family::default_dirichlet());
        assert_eq!(c.threads, Threads::Auto);
        assert!(c.theta().is_err());
        assert_eq!(c.mle, MleOptions::default());
        assert_eq!(c.invariant.orientation, Orientation::Forward);
    }

    #[test]
    fn orientation_key() {
        let c = RunConfig::parse("run.seed = 1\nspectral.orientation = reversed\n").unwrap();
        assert_eq!(c.invariant.orientation, Orientation::Reversed);
        assert!(RunConfig::parse("run.seed = 1\nspectral.orientation = up\n").is_err());
    }

    #[test]
    fn full_family_section() {
        let text = "
            # mixture experiment
            family.kind = finite-mixture
            family.box = 0.05:0.95
            family.atoms = 0.1 0.2 0.7 ; 0.02 0.08 0.9
            family.theta = 0.5   # true weight
            run.seed = 1
            run.threads = 3
            consistency.n_list = 100, 1000
            kernel.x = 2,1,0
            estimate.refine = false
        ";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.family, Family::finite_mixture(Family::default_atoms(), Interval::new(0.05, 0.95)).unwrap());
        assert_eq!(c.theta().unwrap().coords(), &[0.5]);
        assert_eq!(c.threads, Threads::Count(3));
        assert_eq!(c.consistency.n_list, vec![100, 1000]);
        assert_eq!(c.kernel_x, GenVector::new(2, 1, 0));
        assert!(!c.mle.refine);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "",
            "run.seed = x",
            "run.seed = 1\nrun.sed = 2",
            "run.seed = 1\nrun.seed = 2",
            "run.seed = 1\nfamily.kind = gaussian",
            "run.seed = 1\nfamily.kind = point\nfamily.theta = 0.6, 0.3",
            "run.seed = 1\nfamily.box = 0.01:30, 0.1:20, 0.1:20",
            "run.seed = 1\nfamily.atoms = 0.1 0.2 0.7",
            "run.seed = 1\nfamily.kind = finite-mixture\nfamily.atoms = 0.1 0.2 0.7",
            "run.seed = 1\nestimate.grid_points = 3",
            "run.seed = 1\nrun.threads = 0",
            "run.seed = 1\nnot a pair",
        ] {
            let err = RunConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text:?}: {err}");
        }
    }
}
