//! The M-estimator `θ̂_n ∈ argmax_{θ ∈ Θ} l_n(θ)` and consistency experiments.
//!
//! The maximizer is found in two stages: the criterion is evaluated on a
//! regular grid over the box, then a Nelder–Mead simplex started at the best
//! grid point refines it with every vertex clamped to the box. Grid points
//! are enumerated lexicographically with the first coordinate slowest, so
//! the first maximum found is the lexicographically smallest one.

use std::io::Write;

use rayon::prelude::*;

use crate::env::{Family, Interval, ParamPoint};
use crate::error::{Error, Result};
use crate::likelihood::{CountsView, SufficientStats};
use crate::numeric::{fmt_sig, quantile_sorted};
use crate::seeding::{domain, substream};
use crate::spectral::{classify, lyapunov, Regime, Which};
use crate::walk::simulate_to;

/// Grid values within this distance of the maximum count as ties.
pub const TIE_TOL: f64 = 1e-9;
pub const DEFAULT_GRID_POINTS: usize = 21;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_SIMPLEX_TOL: f64 = 1e-5;

/// Regular grid over a box.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(bounds: &[Interval], points_per_dim: usize) -> Result<Self> {
        if points_per_dim < 5 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 5 points per dimension, got {points_per_dim}"
            )));
        }
        let axes = bounds
            .iter()
            .map(|iv| {
                let step = iv.width() / (points_per_dim - 1) as f64;
                (0..points_per_dim)
                    .map(|i| {
                        if i + 1 == points_per_dim {
                            iv.hi
                        } else {
                            iv.lo + step * i as f64
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacing along each coordinate.
    pub fn steps(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[1] - a[0]).collect()
    }

    /// The `idx`-th point in lexicographic order.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let mut out = vec![0.0; self.dim()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = axis[rem % axis.len()];
            rem /= axis.len();
        }
        out
    }
}

/// Criterion `l_n(θ)` evaluated from sufficient statistics.
fn criterion(stats: &SufficientStats, family: &Family, theta: &[f64]) -> Result<f64> {
    let m = family.moments(&ParamPoint::new(theta.to_vec()))?;
    Ok(stats.loglik(&m))
}

fn grid_values(stats: &SufficientStats, family: &Family, grid: &Grid) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| criterion(stats, family, &grid.point(i)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    pub grid_points: usize,
    pub refine: bool,
    pub max_iter: usize,
    pub simplex_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            refine: true,
            max_iter: DEFAULT_MAX_ITER,
            simplex_tol: DEFAULT_SIMPLEX_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub theta_hat: ParamPoint,
    pub loglik_at_hat: f64,
    pub grid_resolution: Vec<f64>,
    pub refine_iterations: usize,
    /// Grid points within [`TIE_TOL`] of the grid maximum, lexicographic order.
    pub ties: Vec<ParamPoint>,
}

impl EstimateResult {
    /// One `theta_hat` row followed by one `tie` row per tied grid point.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.theta_hat.dim();
        let header: Vec<String> = (1..=d).map(|i| format!("theta_{i}")).collect();
        writeln!(out, "row\t{}\tloglik\trefine_iterations", header.join("\t"))?;
        let coords = |p: &ParamPoint| p.coords().iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join("\t");
        writeln!(
            out,
            "theta_hat\t{}\t{}\t{}",
            coords(&self.theta_hat),
            fmt_sig(self.loglik_at_hat),
            self.refine_iterations
        )?;
        let steps = self.grid_resolution.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join("\t");
        writeln!(out, "grid_step\t{steps}\t\t")?;
        for t in &self.ties {
            writeln!(out, "tie\t{}\t\t", coords(t))?;
        }
        Ok(())
    }
}

/// Maximizes `l_n` over the family's box.
pub fn mle(counts: &CountsView, family: &Family, opts: &MleOptions) -> Result<EstimateResult> {
    let stats = SufficientStats::new(counts);
    mle_stats(&stats, family, opts)
}

pub fn mle_stats(stats: &SufficientStats, family: &Family, opts: &MleOptions) -> Result<EstimateResult> {
    let grid = Grid::new(family.bounds(), opts.grid_points)?;
    let values = grid_values(stats, family, &grid)?;
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY || best.is_nan() {
        return Err(Error::DegenerateData(
            "the criterion is -inf at every grid point".into(),
        ));
    }
    let tie_idx: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= best - TIE_TOL).collect();
    let start = grid.point(tie_idx[0]);
    let start_value = values[tie_idx[0]];
    let ties = tie_idx.iter().map(|&i| ParamPoint::new(grid.point(i))).collect();
    let steps = grid.steps();

    let (theta_hat, loglik_at_hat, refine_iterations) = if opts.refine {
        let f = |x: &[f64]| criterion(stats, family, x).unwrap_or(f64::NEG_INFINITY);
        let r = nelder_mead_max(f, &start, start_value, &steps, family.bounds(), opts.max_iter, opts.simplex_tol);
        if r.value > start_value {
            (r.x, r.value, r.iterations)
        } else {
            (start, start_value, r.iterations)
        }
    } else {
        (start, start_value, 0)
    };
    Ok(EstimateResult {
        theta_hat: ParamPoint::new(theta_hat),
        loglik_at_hat,
        grid_resolution: steps,
        refine_iterations,
        ties,
    })
}

/// Result of a simplex search.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Nelder–Mead maximization inside a box. The initial simplex is `start`
/// plus one step along each coordinate (backwards at the upper bound); every
/// trial point is clamped to the box.
pub fn nelder_mead_max<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    start_value: f64,
    steps: &[f64],
    bounds: &[Interval],
    max_iter: usize,
    tol: f64,
) -> SimplexResult {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;
    let d = start.len();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.iter().zip(bounds).map(|(&v, iv)| iv.clamp(v)).collect() };
    // Costs are negated values; -inf values become +inf costs.
    let cost = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), -start_value)];
    for k in 0..d {
        let mut x = start.to_vec();
        let up = x[k] + steps[k];
        x[k] = if up > bounds[k].hi { x[k] - steps[k] } else { up };
        let x = clamp(x);
        let c = cost(&x);
        simplex.push((x, c));
    }
    let diameter_ok = |s: &[(Vec<f64>, f64)]| {
        (0..d).all(|k| {
            let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| {
                (lo.min(x[k]), hi.max(x[k]))
            });
            hi - lo < tol
        })
    };
    let mut iterations = 0;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter_ok(&simplex) {
            break;
        }
        iterations += 1;
        let worst = simplex[d].clone();
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(x, _)| x[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64, from: &[f64]| -> Vec<f64> {
            clamp((0..d).map(|k| centroid[k] + t * (from[k] - centroid[k])).collect())
        };
        let xr = along(-REFLECT, &worst.0);
        let fr = cost(&xr);
        if fr < simplex[0].1 {
            let xe = along(-REFLECT * EXPAND, &worst.0);
            let fe = cost(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(-REFLECT * CONTRACT, &worst.0);
            let fc = cost(&xc);
            (xc, fc)
        } else {
            let xc = along(CONTRACT, &worst.0);
            let fc = cost(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[d] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let x = clamp((0..d).map(|k| best[k] + SHRINK * (v.0[k] - best[k])).collect());
            let c = cost(&x);
            *v = (x, c);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, c) = simplex.swap_remove(0);
    SimplexResult {
        x,
        value: -c,
        iterations,
    }
}

/// `l_n(θ) / n` over the full grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub points: Vec<(ParamPoint, f64)>,
}

impl Profile {
    /// First grid point attaining the maximum.
    pub fn argmax(&self) -> Option<&ParamPoint> {
        let best = self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        self.points.iter().find(|p| p.1 == best).map(|p| &p.0)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.points.first().map_or(0, |p| p.0.dim());
        let header: Vec<String> = (1..=d).map(|i| format!("theta_{i}")).collect();
        writeln!(out, "{}\tnormalized_loglik", header.join("\t"))?;
        for (t, v) in &self.points {
            let coords: Vec<String> = t.coords().iter().map(|&x| fmt_sig(x)).collect();
            writeln!(out, "{}\t{}", coords.join("\t"), fmt_sig(*v))?;
        }
        Ok(())
    }
}

pub fn profile(counts: &CountsView, family: &Family, grid_points: usize) -> Result<Profile> {
    let stats = SufficientStats::new(counts);
    let grid = Grid::new(family.bounds(), grid_points)?;
    let values = grid_values(&stats, family, &grid)?;
    if values.iter().all(|&v| v == f64::NEG_INFINITY) {
        return Err(Error::DegenerateData(
            "the criterion is -inf at every grid point".into(),
        ));
    }
    let n = counts.n() as f64;
    Ok(Profile {
        points: values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (ParamPoint::new(grid.point(i)), v / n))
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyOptions {
    pub n_list: Vec<u64>,
    pub replicates: u64,
    pub mle: MleOptions,
    pub lyapunov_steps: u64,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            n_list: vec![1_000, 10_000],
            replicates: 20,
            mle: MleOptions::default(),
            lyapunov_steps: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub n: u64,
    pub replicate: u64,
    pub theta_hat: ParamPoint,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSummary {
    pub n: u64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyTable {
    pub theta_star: ParamPoint,
    pub gamma_a: f64,
    pub gamma_a_stderr: f64,
    pub rows: Vec<ErrorRow>,
    pub summary: Vec<ErrorSummary>,
}

impl ConsistencyTable {
    /// Median error never increases along the `n` list.
    pub fn medians_non_increasing(&self) -> bool {
        self.summary.windows(2).all(|w| w[1].median <= w[0].median)
    }

    pub fn medians_strictly_decreasing(&self) -> bool {
        self.summary.windows(2).all(|w| w[1].median < w[0].median)
    }

    /// One row per `(n, replicate)`.
    pub fn write_errors<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.theta_star.dim();
        let header: Vec<String> = (1..=d).map(|i| format!("theta_hat_{i}")).collect();
        writeln!(out, "n\treplicate\t{}\terror", header.join("\t"))?;
        for r in &self.rows {
            let coords: Vec<String> = r.theta_hat.coords().iter().map(|&x| fmt_sig(x)).collect();
            writeln!(out, "{}\t{}\t{}\t{}", r.n, r.replicate, coords.join("\t"), fmt_sig(r.error))?;
        }
        Ok(())
    }

    /// Median and quartiles per `n`.
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n\tq1\tmedian\tq3")?;
        for s in &self.summary {
            writeln!(out, "{}\t{}\t{}\t{}", s.n, fmt_sig(s.q1), fmt_sig(s.median), fmt_sig(s.q3))?;
        }
        Ok(())
    }
}

/// Simulates `replicates` walks per `n`, estimates `θ` from each and records
/// the Euclidean error. Refuses to run unless `θ*` is transient to the right.
pub fn consistency_experiment(
    family: &Family,
    theta_star: &ParamPoint,
    opts: &ConsistencyOptions,
    seed: u64,
) -> Result<ConsistencyTable> {
    family.check(theta_star)?;
    if opts.n_list.is_empty() || opts.replicates == 0 {
        return Err(Error::InvalidArgument(
            "consistency needs a nonempty n list and at least one replicate".into(),
        ));
    }
    let mut rng = substream(seed, domain::LYAPUNOV, 0);
    let gamma = lyapunov(family, theta_star, opts.lyapunov_steps, Which::A, &mut rng)?;
    if classify(&gamma) != Regime::TransientRight {
        return Err(Error::Config(format!(
            "θ* = {:?} is not transient to the right: γ̂_A = {} ± {}",
            theta_star.coords(),
            gamma.gamma,
            gamma.stderr
        )));
    }
    let jobs: Vec<(usize, u64)> = (0..opts.n_list.len())
        .flat_map(|i| (0..opts.replicates).map(move |r| (i, r)))
        .collect();
    let rows: Vec<ErrorRow> = jobs
        .par_iter()
        .map(|&(i, r)| -> Result<ErrorRow> {
            let n = opts.n_list[i];
            let mut rng = substream(seed, domain::CONSISTENCY, ((i as u64) << 32) | r);
            let rec = simulate_to(family, theta_star, n, n.saturating_mul(1000), &mut rng)?;
            let est = mle(&CountsView::from_record(&rec)?, family, &opts.mle)?;
            Ok(ErrorRow {
                n,
                replicate: r,
                error: est.theta_hat.distance(theta_star),
                theta_hat: est.theta_hat,
            })
        })
        .collect::<Result<_>>()?;
    let summary = opts
        .n_list
        .iter()
        .map(|&n| {
            let mut e: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.error).collect();
            e.sort_by(f64::total_cmp);
            ErrorSummary {
                n,
                q1: quantile_sorted(&e, 0.25),
                median: quantile_sorted(&e, 0.5),
                q3: quantile_sorted(&e, 0.75),
            }
        })
        .collect();
    Ok(ConsistencyTable {
        theta_star: theta_star.clone(),
        gamma_a: gamma.gamma,
        gamma_a_stderr: gamma.stderr,
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::loglik;
    use crate::seeding::master;
    use proptest::prelude::*;

    fn point_star() -> ParamPoint {
        ParamPoint::new(vec![0.2, 0.1])
    }

    #[test]
    fn grid_enumerates_lexicographically() {
        let g = Grid::new(&[Interval::new(0.0, 1.0), Interval::new(10.0, 14.0)], 5).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.point(0), vec![0.0, 10.0]);
        assert_eq!(g.point(1), vec![0.0, 11.0]);
        assert_eq!(g.point(5), vec![0.25, 10.0]);
        assert_eq!(g.point(24), vec![1.0, 14.0]);
        assert_eq!(g.steps(), vec![0.25, 1.0]);
        assert!(Grid::new(&[Interval::new(0.0, 1.0)], 4).is_err());
    }

    #[test]
    fn nelder_mead_finds_quadratic_max() {
        let bounds = [Interval::new(-5.0, 5.0), Interval::new(-5.0, 5.0)];
        let f = |x: &[f64]| -((x[0] - 1.3).powi(2) + 2.0 * (x[1] + 0.7).powi(2));
        let r = nelder_mead_max(f, &[0.0, 0.0], f(&[0.0, 0.0]), &[0.5, 0.5], &bounds, 500, 1e-8);
        assert!((r.x[0] - 1.3).abs() < 1e-4 && (r.x[1] + 0.7).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn nelder_mead_stays_in_box() {
        let bounds = [Interval::new(0.0, 1.0)];
        let f = |x: &[f64]| x[0] * 10.0;
        let r = nelder_mead_max(f, &[1.0], 10.0, &[0.1], &bounds, 200, 1e-9);
        assert!(r.x[0] <= 1.0 && r.x[0] >= 0.0);
        assert!((r.value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn mle_point_family_recovers_theta() {
        let fam = Family::default_point();
        let rec = simulate_to(&fam, &point_star(), 10_000, 10_000_000, &mut master(21)).unwrap();
        let counts = CountsView::from_record(&rec).unwrap();
        let est = mle(&counts, &fam, &MleOptions::default()).unwrap();
        let steps = est.grid_resolution.clone();
        for k in 0..2 {
            assert!((est.theta_hat.coords()[k] - point_star().coords()[k]).abs() <= steps[k]);
        }
        let grid = Grid::new(fam.bounds(), 21).unwrap();
        for i in 0..grid.len() {
            let v = loglik(&counts, &fam, &ParamPoint::new(grid.point(i))).unwrap();
            assert!(est.loglik_at_hat >= v - 1e-9);
        }
        assert!(fam.contains(&est.theta_hat));
    }

    #[test]
    fn mle_point_family_matches_jump_frequencies() {
        // With a point family the criterion is a multinomial log-likelihood,
        // so the unconstrained maximizer is the empirical frequency.
        let fam = Family::default_point();
        let rec = simulate_to(&fam, &point_star(), 5_000, 5_000_000, &mut master(22)).unwrap();
        let counts = CountsView::from_record(&rec).unwrap();
        let (mut l1, mut l2, mut r) = (0u64, 0u64, 0u64);
        for x in 0..counts.n() as usize {
            let (a, b) = counts.pairs()[x];
            let (c, d) = counts.pairs()[x + 1];
            let e = counts.pairs()[x + 2].1;
            l1 += a;
            l2 += b;
            r += c + d + e + 1;
        }
        let tot = (l1 + l2 + r) as f64;
        let est = mle(&counts, &fam, &MleOptions::default()).unwrap();
        assert!((est.theta_hat.coords()[0] - l1 as f64 / tot).abs() < 1e-4);
        assert!((est.theta_hat.coords()[1] - l2 as f64 / tot).abs() < 1e-4);
    }

    #[test]
    fn mle_all_zero_counts_hits_corner() {
        let fam = Family::default_point();
        let counts = CountsView::new(50, vec![]).unwrap();
        let est = mle(&counts, &fam, &MleOptions::default()).unwrap();
        assert_eq!(est.theta_hat.coords(), &[0.01, 0.01]);
        assert_eq!(est.ties.len(), 1);
    }

    #[test]
    fn mle_degenerate_data() {
        use crate::env::SiteLaw;
        let atoms = [SiteLaw::new(0.2, 0.0, 0.8).unwrap(), SiteLaw::new(0.1, 0.0, 0.9).unwrap()];
        let fam = Family::finite_mixture(atoms, Interval::new(0.1, 0.9)).unwrap();
        let counts = CountsView::new(3, vec![(1, 0)]).unwrap();
        let err = mle(&counts, &fam, &MleOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)));
        assert!(profile(&counts, &fam, 11).is_err());
    }

    #[test]
    fn mle_avoids_neg_infinity_edge() {
        let fam = Family::point(vec![Interval::new(0.0, 0.4), Interval::new(0.0, 0.3)]).unwrap();
        let counts = CountsView::new(2, vec![(1, 0)]).unwrap();
        let est = mle(&counts, &fam, &MleOptions::default()).unwrap();
        assert!(est.theta_hat.coords()[0] > 0.0);
        assert!(est.loglik_at_hat.is_finite());
    }

    #[test]
    fn mle_symmetry_under_column_swap() {
        // The r-exponent reads l2 at x + 2 but not l1, so sites from 2 on carry
        // equal columns and the swap only acts on the y1 exponents.
        let mut pairs = vec![(9u64, 1u64), (6, 0)];
        pairs.extend((0..40u64).map(|x| ((x * 7) % 3, (x * 7) % 3)));
        let counts = CountsView::new(40, pairs).unwrap();
        let fam = Family::dirichlet(vec![Interval::new(0.5, 8.0), Interval::new(0.5, 8.0), Interval::new(1.0, 12.0)]).unwrap();
        let opts = MleOptions {
            grid_points: 11,
            refine: false,
            ..Default::default()
        };
        let a = mle(&counts, &fam, &opts).unwrap();
        let b = mle(&counts.swapped(), &fam, &opts).unwrap();
        assert_ne!(a.theta_hat.coords()[0], a.theta_hat.coords()[1]);
        let swap = |p: &ParamPoint| {
            let c = p.coords();
            vec![c[1], c[0], c[2]]
        };
        let mut ta: Vec<Vec<f64>> = a.ties.iter().map(swap).collect();
        let mut tb: Vec<Vec<f64>> = b.ties.iter().map(|p| p.coords().to_vec()).collect();
        ta.sort_by(|x, y| x.partial_cmp(y).unwrap());
        tb.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(ta, tb);
        assert_eq!(swap(&a.theta_hat), b.theta_hat.coords());
        let ra = mle(&counts, &fam, &MleOptions::default()).unwrap();
        let rb = mle(&counts.swapped(), &fam, &MleOptions::default()).unwrap();
        for (x, y) in swap(&ra.theta_hat).iter().zip(rb.theta_hat.coords()) {
            assert!((x - y).abs() < 1e-3, "{ra:?} {rb:?}");
        }
    }

    #[test]
    fn refinement_never_loses_to_grid() {
        let fam = Family::default_dirichlet();
        let t = ParamPoint::new(vec![1.0, 1.0, 6.0]);
        let rec = simulate_to(&fam, &t, 2_000, 2_000_000, &mut master(24)).unwrap();
        let counts = CountsView::from_record(&rec).unwrap();
        let coarse = MleOptions {
            grid_points: 9,
            refine: false,
            ..Default::default()
        };
        let g = mle(&counts, &fam, &coarse).unwrap();
        let r = mle(&counts, &fam, &MleOptions { refine: true, ..coarse }).unwrap();
        assert!(r.loglik_at_hat >= g.loglik_at_hat);
        assert!(r.refine_iterations > 0);
        assert!(fam.contains(&r.theta_hat));
    }

    #[test]
    fn mle_is_deterministic_across_thread_counts() {
        let fam = Family::default_mixture();
        let rec = simulate_to(&fam, &ParamPoint::new(vec![0.5]), 3_000, 3_000_000, &mut master(25)).unwrap();
        let counts = CountsView::from_record(&rec).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mle(&counts, &fam, &MleOptions::default()).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn profile_matches_mle_grid_stage() {
        let fam = Family::default_mixture();
        let rec = simulate_to(&fam, &ParamPoint::new(vec![0.5]), 2_000, 2_000_000, &mut master(26)).unwrap();
        let counts = CountsView::from_record(&rec).unwrap();
        let p = profile(&counts, &fam, 21).unwrap();
        let est = mle(
            &counts,
            &fam,
            &MleOptions {
                refine: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(p.argmax(), Some(&est.theta_hat));
        assert_eq!(p.points.len(), 21);
    }

    #[test]
    fn profiles_of_independent_walks_agree() {
        // Each normalized profile fluctuates with standard deviation about
        // 0.07 at θ* and 0.15 at the box corner for n = 10^4.
        let fam = Family::default_point();
        let prof = |seed| {
            let rec = simulate_to(&fam, &point_star(), 10_000, 10_000_000, &mut master(seed)).unwrap();
            profile(&CountsView::from_record(&rec).unwrap(), &fam, 11).unwrap()
        };
        let (a, b) = (prof(27), prof(28));
        for (x, y) in a.points.iter().zip(&b.points) {
            assert!((x.1 - y.1).abs() < 0.9, "{x:?} {y:?}");
        }
    }

    #[test]
    fn profile_spread_shrinks_with_n() {
        let fam = Family::default_mixture();
        let star = ParamPoint::new(vec![0.5]);
        let spread = |n: u64| {
            let vals: Vec<f64> = (0..10)
                .map(|r| {
                    let rec = simulate_to(&fam, &star, n, 1000 * n, &mut substream(29, n, r)).unwrap();
                    let p = profile(&CountsView::from_record(&rec).unwrap(), &fam, 11).unwrap();
                    p.points[5].1
                })
                .collect();
            vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min)
        };
        assert!(spread(10_000) < spread(100));
    }

    #[test]
    fn consistency_rejects_non_ballistic_theta() {
        let fam = Family::point(vec![Interval::new(0.01, 0.6), Interval::new(0.01, 0.35)]).unwrap();
        let err = consistency_experiment(&fam, &ParamPoint::new(vec![0.5, 0.3]), &ConsistencyOptions::default(), 0)
            .unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("γ̂_A")), "{err}");
    }

    #[test]
    fn consistency_small_run() {
        let fam = Family::default_point();
        let opts = ConsistencyOptions {
            n_list: vec![200, 5_000],
            replicates: 8,
            ..Default::default()
        };
        let t = consistency_experiment(&fam, &point_star(), &opts, 5).unwrap();
        assert_eq!(t.rows.len(), 16);
        assert!(t.gamma_a < 0.0);
        assert!(t.medians_strictly_decreasing(), "{:?}", t.summary);
        let again = consistency_experiment(&fam, &point_star(), &opts, 5).unwrap();
        assert_eq!(t, again);
        let mut buf = Vec::new();
        t.write_errors(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 17);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn mle_stays_in_box_and_beats_grid(
            pairs in proptest::collection::vec((0u64..3, 0u64..2), 4..30),
            lo in 0.01f64..0.3, width in 0.05f64..0.6,
        ) {
            let hi = (lo + width).min(0.99);
            let fam = Family::finite_mixture(Family::default_atoms(), Interval::new(lo, hi)).unwrap();
            let n = pairs.len() as u64 - 2;
            let counts = CountsView::new(n, pairs).unwrap();
            let est = mle(&counts, &fam, &MleOptions::default()).unwrap();
            prop_assert!(fam.contains(&est.theta_hat));
            let grid = Grid::new(fam.bounds(), 21).unwrap();
            for i in 0..grid.len() {
                let v = loglik(&counts, &fam, &ParamPoint::new(grid.point(i))).unwrap();
                prop_assert!(est.loglik_at_hat >= v - 1e-9);
            }
        }
    }
}
