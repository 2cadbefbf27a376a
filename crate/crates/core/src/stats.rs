//! Monte Carlo quantile estimation for the boundary diameter, the
//! compact-set-with-function comparison machinery, and the report
//! operations built on them (comparability, Holder fit, positive
//! definiteness floor, midpoint defect).

use crate::carpet::{
    boundary_diameter, rasterize_carpet, BoxGraph, CarpetError, CarpetMask, UNREACHED,
};
use crate::geom::Rect;
use crate::levy::LevyError;
use crate::rng::{self, RunRng};
use crate::soup::{sample_cle_ensemble, SoupConfig, SoupError};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error(transparent)]
    Sample(#[from] SoupError),
    #[error(transparent)]
    Carpet(#[from] CarpetError),
    #[error(transparent)]
    Fit(#[from] LevyError),
    #[error("replica slot {0} found no valid ensemble within its attempt budget")]
    ReplicaBudgetExhausted(usize),
    #[error("need at least {min} replicas, got {got}")]
    TooFewReplicas { min: usize, got: usize },
    #[error("point set must be nonempty")]
    EmptyPointSet,
    #[error("need at least {min} pairs, got {got}")]
    InsufficientPairs { min: usize, got: usize },
    #[error("separations span {got} dyadic scales, need {min}")]
    TooFewScales { min: usize, got: usize },
    #[error("probabilities must lie in (0, 1), got {0}")]
    BadProbability(f64),
    #[error("eps list must be positive and strictly increasing")]
    BadEpsList,
    #[error("table lacks an (eps, m0*eps) column pair")]
    MissingEpsPairs,
    #[error("no sampled pair has separation at least {0}")]
    NoPairsBeyondSeparation(f64),
}

/// Lower-midpoint empirical quantile: order statistic `ceil(p * R)` of the
/// `R` sorted values (1-indexed). Deterministic, no interpolation.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!(p > 0.0 && p < 1.0);
    let r = sorted.len();
    let k = libm::ceil(p * r as f64) as usize;
    sorted[k.clamp(1, r) - 1]
}

/// Two-sample Kolmogorov-Smirnov statistic; both slices must be sorted.
pub fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut ks: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        ks = ks.max(libm::fabs(fa - fb));
    }
    ks
}

// ---------------------------------------------------------------------------
// Quantile tables

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub kappa: f64,
    /// Increasing neighborhood radii (domain units).
    pub eps_list: Vec<f64>,
    /// Probabilities in (0, 1).
    pub p_list: Vec<f64>,
    /// `q_hat[p_index][eps_index]`, in area units.
    pub q_hat: Vec<Vec<f64>>,
    /// Median row (p = 1/2) per eps.
    pub m_hat: Vec<f64>,
    pub replica_count: usize,
    /// Bootstrap 95% halfwidths, same shape as `q_hat`.
    pub halfwidths: Vec<Vec<f64>>,
}

impl QuantileTable {
    /// Exact by construction: order statistics of one sorted sample are
    /// monotone in p.
    pub fn monotone_in_p(&self) -> bool {
        (0..self.eps_list.len()).all(|e| {
            self.q_hat
                .windows(2)
                .all(|rows| rows[1][e] >= rows[0][e])
        })
    }

    /// Monotonicity in eps for the box-count evaluator, allowing the
    /// documented one-discretization-step slack (`eps^2` per column).
    pub fn eps_monotonicity_violations(&self) -> usize {
        let mut violations = 0;
        for row in &self.q_hat {
            for e in 1..self.eps_list.len() {
                let slack = self.eps_list[e] * self.eps_list[e];
                if row[e] < row[e - 1] - slack {
                    violations += 1;
                }
            }
        }
        violations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub soup: SoupConfig,
    pub raster_n: usize,
    /// The mask covers the fixed square `[-bbox_half, bbox_half]^2`, so
    /// the cell size is known before sampling.
    pub bbox_half: f64,
    pub eps_list: Vec<f64>,
    pub p_list: Vec<f64>,
    pub replicas: usize,
    pub net_count: usize,
    pub bootstrap_resamples: usize,
}

impl QuantileConfig {
    pub fn cell_size(&self) -> f64 {
        2.0 * self.bbox_half / self.raster_n as f64
    }

    pub fn bbox(&self) -> Rect {
        Rect::centered_square(self.bbox_half)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        self.soup.validate()?;
        if self.eps_list.is_empty()
            || self.eps_list.windows(2).any(|w| w[1] <= w[0])
            || self.eps_list[0] <= 0.0
        {
            return Err(StatsError::BadEpsList);
        }
        let min_eps = 4.0 * self.cell_size();
        if self.eps_list[0] < min_eps {
            return Err(StatsError::Carpet(CarpetError::EpsTooSmall {
                eps: self.eps_list[0],
                min_eps,
            }));
        }
        for &p in &self.p_list {
            if !(p > 0.0 && p < 1.0) {
                return Err(StatsError::BadProbability(p));
            }
        }
        Ok(())
    }
}

/// Attempt budget per replica slot; the global cap is therefore 10x the
/// replica count.
pub const REPLICA_ATTEMPTS: u64 = 10;

/// Boundary diameters (one per eps) for one replica slot. Each attempt
/// derives its own soup seed from the master seed, the replica tag, and
/// `slot * REPLICA_ATTEMPTS + attempt`, so scheduling cannot change what
/// any slot samples. Replicas without a domain loop, with a snapping
/// failure, or with a partially disconnected boundary net are discarded
/// and the slot resamples.
pub fn replica_diameters(cfg: &QuantileConfig, slot: usize) -> Result<Vec<f64>, StatsError> {
    for attempt in 0..REPLICA_ATTEMPTS {
        let index = slot as u64 * REPLICA_ATTEMPTS + attempt;
        let seed = derive_seed(cfg.soup.seed, rng::tags::REPLICA, index);
        let mut soup = cfg.soup.clone();
        soup.seed = seed;
        let ensemble = match sample_cle_ensemble(&soup, cfg.raster_n) {
            Ok(e) => e,
            Err(SoupError::NoDomainLoop) => continue,
            Err(e) => return Err(e.into()),
        };
        let mask = rasterize_carpet(&ensemble, cfg.raster_n, cfg.bbox())?;
        let mut diameters = Vec::with_capacity(cfg.eps_list.len());
        let mut valid = true;
        for &eps in &cfg.eps_list {
            let graph = BoxGraph::build(&mask, eps)?;
            match boundary_diameter(&graph, cfg.net_count) {
                Ok(d) if d.disconnected_pairs == 0 => diameters.push(d.max_area),
                Ok(_) | Err(CarpetError::DegenerateNet)
                | Err(CarpetError::BoundaryNetUnreachable) => {
                    valid = false;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if valid {
            return Ok(diameters);
        }
    }
    Err(StatsError::ReplicaBudgetExhausted(slot))
}

fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    rng::mix(rng::mix(master ^ rng::mix(tag)) ^ rng::mix(index))
}

/// Builds the table from per-replica diameter rows (one row per replica,
/// one column per eps). The bootstrap resamples whole replicas.
pub fn assemble_quantile_table(
    kappa: f64,
    eps_list: &[f64],
    p_list: &[f64],
    rows: &[Vec<f64>],
    bootstrap_resamples: usize,
    seed: u64,
) -> QuantileTable {
    let replicas = rows.len();
    let n_eps = eps_list.len();
    let mut columns: Vec<Vec<f64>> = (0..n_eps)
        .map(|e| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[e]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            col
        })
        .collect();
    let q_hat: Vec<Vec<f64>> = p_list
        .iter()
        .map(|&p| columns.iter().map(|col| empirical_quantile(col, p)).collect())
        .collect();
    let m_hat: Vec<f64> = columns
        .iter()
        .map(|col| empirical_quantile(col, 0.5))
        .collect();

    // Percentile-bootstrap halfwidths over whole-replica resamples.
    let mut boot: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_eps]; p_list.len()];
    for b in 0..bootstrap_resamples {
        let mut rng = RunRng::from_stream(seed, rng::tags::BOOTSTRAP, b as u64);
        let picks: Vec<usize> = (0..replicas).map(|_| rng.index(replicas)).collect();
        for e in 0..n_eps {
            let mut col: Vec<f64> = picks.iter().map(|&i| rows[i][e]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (pi, &p) in p_list.iter().enumerate() {
                boot[pi][e].push(empirical_quantile(&col, p));
            }
        }
    }
    let halfwidths: Vec<Vec<f64>> = boot
        .iter_mut()
        .map(|per_eps| {
            per_eps
                .iter_mut()
                .map(|vals| {
                    if vals.is_empty() {
                        0.0
                    } else {
                        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        let lo = empirical_quantile(vals, 0.025);
                        let hi = empirical_quantile(vals, 0.975);
                        (hi - lo) / 2.0
                    }
                })
                .collect()
        })
        .collect();

    for col in &mut columns {
        col.clear();
    }
    QuantileTable {
        kappa,
        eps_list: eps_list.to_vec(),
        p_list: p_list.to_vec(),
        q_hat,
        m_hat,
        replica_count: replicas,
        halfwidths,
    }
}

/// Production estimator: samples `replicas` valid ensembles and tabulates
/// the boundary-diameter quantiles. Sequential; drivers that parallelize
/// call [`replica_diameters`] per slot and then [`assemble_quantile_table`].
pub fn estimate_quantiles(cfg: &QuantileConfig) -> Result<QuantileTable, StatsError> {
    cfg.validate()?;
    if cfg.replicas < 50 {
        return Err(StatsError::TooFewReplicas {
            min: 50,
            got: cfg.replicas,
        });
    }
    let rows: Vec<Vec<f64>> = (0..cfg.replicas)
        .map(|slot| replica_diameters(cfg, slot))
        .collect::<Result<_, _>>()?;
    Ok(assemble_quantile_table(
        cfg.soup.kappa,
        &cfg.eps_list,
        &cfg.p_list,
        &rows,
        cfg.bootstrap_resamples,
        cfg.soup.seed,
    ))
}

/// Test hook: tabulates injected diameter rows directly.
pub fn estimate_quantiles_from_rows(
    kappa: f64,
    eps_list: &[f64],
    p_list: &[f64],
    rows: &[Vec<f64>],
    bootstrap_resamples: usize,
    seed: u64,
) -> Result<QuantileTable, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::TooFewReplicas { min: 1, got: 0 });
    }
    Ok(assemble_quantile_table(
        kappa,
        eps_list,
        p_list,
        rows,
        bootstrap_resamples,
        seed,
    ))
}

// ---------------------------------------------------------------------------
// Comparability

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub m0: f64,
    pub band: f64,
    /// `(p, eps, q(p, m0 eps) / q(p, eps))`.
    pub ratios: Vec<(f64, f64, f64)>,
    /// Across-eps spread `max R / min R`.
    pub spread: f64,
    pub degenerate: bool,
    pub pass: bool,
}

/// Ratio report for `q(p, m0 eps) / q(p, eps)` over every eps whose
/// `m0`-multiple is also a table column. Passing means the spread of the
/// ratios stays within `band` and no quantile is degenerate.
pub fn comparability_report(
    table: &QuantileTable,
    m0: f64,
    band: f64,
) -> Result<ComparabilityReport, StatsError> {
    let mut ratios = Vec::new();
    let mut degenerate = false;
    for (e, &eps) in table.eps_list.iter().enumerate() {
        let target = m0 * eps;
        let partner = table
            .eps_list
            .iter()
            .position(|&e2| libm::fabs(e2 - target) <= 1e-9 * target);
        let Some(e2) = partner else { continue };
        for (pi, &p) in table.p_list.iter().enumerate() {
            let den = table.q_hat[pi][e];
            let num = table.q_hat[pi][e2];
            if !(den > 0.0) || !num.is_finite() || !(num > 0.0) {
                degenerate = true;
                ratios.push((p, eps, f64::NAN));
            } else {
                ratios.push((p, eps, num / den));
            }
        }
    }
    if ratios.is_empty() {
        return Err(StatsError::MissingEpsPairs);
    }
    let finite: Vec<f64> = ratios
        .iter()
        .map(|r| r.2)
        .filter(|v| v.is_finite())
        .collect();
    let spread = if degenerate || finite.is_empty() {
        f64::INFINITY
    } else {
        let max = finite.iter().cloned().fold(f64::MIN, f64::max);
        let min = finite.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    };
    Ok(ComparabilityReport {
        m0,
        band,
        ratios,
        spread,
        degenerate,
        pass: !degenerate && spread <= band,
    })
}

// ---------------------------------------------------------------------------
// Metric samples over R^4

/// A finite set `K` of carpet point pairs with normalized distances: one
/// discretized element of the comparison space of compact subsets of R^4
/// with functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    /// `(z.x, z.y, w.x, w.y)` per pair.
    pub points: Vec<[f64; 4]>,
    /// Normalized distances `d_eps / m_hat`, nonnegative.
    pub values: Vec<f64>,
}

impl MetricSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean separation of the two plane points of pair `i`.
    pub fn separation(&self, i: usize) -> f64 {
        let p = self.points[i];
        let dx = p[0] - p[2];
        let dy = p[1] - p[3];
        libm::sqrt(dx * dx + dy * dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample {
    pub sample: MetricSample,
    /// Disconnected pairs met while sampling; excluded from the set.
    pub infinite_pairs: usize,
}

/// Samples `pair_count` uniform carpet-cell pairs and records their
/// normalized box-count distances `d_eps / m_hat`. Disconnected pairs are
/// counted and left out of the sample.
pub fn normalized_metric_sample(
    mask: &CarpetMask,
    graph: &BoxGraph<'_>,
    m_hat: f64,
    pair_count: usize,
    master_seed: u64,
    stream_index: u64,
) -> Result<NormalizedSample, StatsError> {
    assert!(m_hat > 0.0, "normalizer must be positive");
    let carpet: Vec<(usize, usize)> = {
        let mut cells = Vec::new();
        for j in 0..mask.n() {
            for i in 0..mask.n() {
                if mask.is_carpet(i, j) {
                    cells.push((i, j));
                }
            }
        }
        cells
    };
    if carpet.is_empty() {
        return Err(StatsError::EmptyPointSet);
    }
    let mut rng = RunRng::from_stream(master_seed, rng::tags::PAIRS, stream_index);
    let mut points = Vec::with_capacity(pair_count);
    let mut values = Vec::with_capacity(pair_count);
    let mut infinite = 0usize;
    for _ in 0..pair_count {
        let zc = carpet[rng.index(carpet.len())];
        let wc = carpet[rng.index(carpet.len())];
        match graph.chem_dist_cells(zc, wc, false) {
            Ok(cost) => {
                let z = mask.cell_center(zc.0, zc.1);
                let w = mask.cell_center(wc.0, wc.1);
                points.push([z.x, z.y, w.x, w.y]);
                values.push(cost.area_estimate / m_hat);
            }
            Err(CarpetError::Disconnected) => infinite += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(NormalizedSample {
        sample: MetricSample { points, values },
        infinite_pairs: infinite,
    })
}

fn dist4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut acc = 0.0;
    for k in 0..4 {
        let d = a[k] - b[k];
        acc += d * d;
    }
    libm::sqrt(acc)
}

/// Exact Hausdorff distance between finite subsets of R^4, by the
/// quadratic sup-inf scan (this is the reference evaluator; tests
/// cross-check it against an accelerated variant).
pub fn hausdorff_distance(k: &[[f64; 4]], l: &[[f64; 4]]) -> Result<f64, StatsError> {
    if k.is_empty() || l.is_empty() {
        return Err(StatsError::EmptyPointSet);
    }
    let one_sided = |from: &[[f64; 4]], to: &[[f64; 4]]| -> f64 {
        from.iter()
            .map(|a| {
                to.iter()
                    .map(|b| dist4(a, b))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(one_sided(k, l).max(one_sided(l, k)))
}

/// Metric on samples: the function-comparison pseudometric (sup of
/// `|f(z) - g(w)|` over cross pairs within Hausdorff range) plus the
/// Hausdorff distance itself.
pub fn dn_distance(a: &MetricSample, b: &MetricSample) -> Result<f64, StatsError> {
    let dh = hausdorff_distance(&a.points, &b.points)?;
    let mut sup: f64 = 0.0;
    let mut any = false;
    for (za, &fa) in a.points.iter().zip(&a.values) {
        for (wb, &gb) in b.points.iter().zip(&b.values) {
            if dist4(za, wb) <= dh {
                any = true;
                sup = sup.max(libm::fabs(fa - gb));
            }
        }
    }
    // By definition of the Hausdorff distance over finite sets, some pair
    // is within range.
    debug_assert!(any, "no pair within Hausdorff range");
    Ok(sup + dh)
}

// ---------------------------------------------------------------------------
// Holder fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub slope: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    /// `(geometric mean separation, geometric mean value)` per dyadic bin.
    pub bins: Vec<(f64, f64)>,
    pub pairs_used: usize,
}

/// Regresses `log(value)` on `log(separation)` over pairs binned by dyadic
/// separation scale. Needs at least 200 positive-value pairs spanning at
/// least 3 dyadic scales.
pub fn holder_fit(pairs: &[(f64, f64)]) -> Result<HolderFit, StatsError> {
    let usable: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|&(sep, val)| sep > 0.0 && val > 0.0)
        .collect();
    if usable.len() < 200 {
        return Err(StatsError::InsufficientPairs {
            min: 200,
            got: usable.len(),
        });
    }
    let mut bins: alloc::collections::BTreeMap<i32, (f64, f64, usize)> =
        alloc::collections::BTreeMap::new();
    for (sep, val) in &usable {
        let key = libm::floor(libm::log2(*sep)) as i32;
        let entry = bins.entry(key).or_insert((0.0, 0.0, 0));
        entry.0 += libm::log(*sep);
        entry.1 += libm::log(*val);
        entry.2 += 1;
    }
    if bins.len() < 3 {
        return Err(StatsError::TooFewScales {
            min: 3,
            got: bins.len(),
        });
    }
    let pts: Vec<(f64, f64)> = bins
        .values()
        .map(|&(sx, sy, c)| (sx / c as f64, sy / c as f64))
        .collect();
    let (slope, stderr) = ols(&pts).ok_or(StatsError::TooFewScales { min: 3, got: 2 })?;
    Ok(HolderFit {
        slope,
        stderr,
        ci95: (slope - 1.96 * stderr, slope + 1.96 * stderr),
        bins: pts
            .iter()
            .map(|&(x, y)| (libm::exp(x), libm::exp(y)))
            .collect(),
        pairs_used: usable.len(),
    })
}

fn ols(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 3 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let ss: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - icept - slope * p.0;
            e * e
        })
        .sum();
    Some((slope, libm::sqrt(ss / (n - 2.0) / sxx)))
}

// ---------------------------------------------------------------------------
// Geodesic midpoint defect

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// Relative midpoint defects of the evaluated pairs.
    pub defects: Vec<f64>,
    pub median: f64,
    /// Same-box pairs: midpoint defect has no meaning at distance zero.
    pub excluded_same_box: usize,
    pub disconnected: usize,
}

/// For each pair, the best achievable midpoint discrepancy
/// `min_u max(|d(z,u) - d/2|, |d(u,w) - d/2|) / d` over carpet boxes `u`,
/// measured in the edge metric (box count minus one).
pub fn geodesic_midpoint_defect(
    graph: &BoxGraph<'_>,
    pairs: &[([f64; 2], [f64; 2])],
) -> Result<DefectReport, StatsError> {
    let mut defects = Vec::new();
    let mut excluded = 0usize;
    let mut disconnected = 0usize;
    for &(z, w) in pairs {
        let zc = match graph.snap(crate::geom::Point::new(z[0], z[1])) {
            Ok(c) => c,
            Err(_) => {
                disconnected += 1;
                continue;
            }
        };
        let wc = match graph.snap(crate::geom::Point::new(w[0], w[1])) {
            Ok(c) => c,
            Err(_) => {
                disconnected += 1;
                continue;
            }
        };
        let zb = graph.box_of_cell(zc.0, zc.1);
        let wb = graph.box_of_cell(wc.0, wc.1);
        let dz = graph.bfs(zb);
        let (bw, _) = graph.dims();
        let d = dz[wb.1 * bw + wb.0];
        if d == UNREACHED {
            disconnected += 1;
            continue;
        }
        if d == 0 {
            excluded += 1;
            continue;
        }
        let dw = graph.bfs(wb);
        let total = d as f64;
        let mut best = f64::INFINITY;
        for idx in 0..dz.len() {
            if dz[idx] == UNREACHED || dw[idx] == UNREACHED {
                continue;
            }
            let a = libm::fabs(dz[idx] as f64 - total / 2.0);
            let b = libm::fabs(dw[idx] as f64 - total / 2.0);
            best = best.min(a.max(b));
        }
        defects.push(best / total);
    }
    let median = if defects.is_empty() {
        f64::NAN
    } else {
        let mut sorted = defects.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        empirical_quantile(&sorted, 0.5)
    };
    Ok(DefectReport {
        defects,
        median,
        excluded_same_box: excluded,
        disconnected,
    })
}

// ---------------------------------------------------------------------------
// Positive definiteness floor

/// Minimum normalized distance over sampled pairs with plane separation at
/// least `r`.
pub fn posdef_floor(samples: &[MetricSample], r: f64) -> Result<f64, StatsError> {
    let mut floor = f64::INFINITY;
    let mut any = false;
    for s in samples {
        for i in 0..s.len() {
            if s.separation(i) >= r {
                any = true;
                floor = floor.min(s.values[i]);
            }
        }
    }
    if !any {
        return Err(StatsError::NoPairsBeyondSeparation(r));
    }
    Ok(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carpet::{chem_dist, BoxGraph, CarpetMask};
    use crate::geom::{circle_loop, Point};
    use crate::manifest::RunManifest;
    use crate::soup::LoopEnsemble;

    #[test]
    fn quantile_convention_lower_midpoint() {
        let sorted: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        assert_eq!(empirical_quantile(&sorted, 0.5), 50.0);
        assert_eq!(empirical_quantile(&sorted, 0.25), 25.0);
        assert_eq!(empirical_quantile(&sorted, 0.999), 100.0);
    }

    #[test]
    fn injected_constant_diameters() {
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![7.5, 7.5]).collect();
        let table = estimate_quantiles_from_rows(
            3.0,
            &[0.1, 0.2],
            &[0.25, 0.5, 0.75],
            &rows,
            50,
            42,
        )
        .unwrap();
        for row in &table.q_hat {
            for &v in row {
                assert_eq!(v, 7.5);
            }
        }
        assert_eq!(table.m_hat, vec![7.5, 7.5]);
        assert!(table.monotone_in_p());
        assert_eq!(table.eps_monotonicity_violations(), 0);
        for row in &table.halfwidths {
            for &hw in row {
                assert_eq!(hw, 0.0);
            }
        }
    }

    #[test]
    fn injected_range_median_is_fifty() {
        let rows: Vec<Vec<f64>> = (1..=100).map(|k| vec![k as f64]).collect();
        let table =
            estimate_quantiles_from_rows(3.0, &[0.1], &[0.5], &rows, 10, 1).unwrap();
        assert_eq!(table.q_hat[0][0], 50.0);
    }

    #[test]
    fn bootstrap_halfwidth_shrinks_with_replicas() {
        // Same spread, 4x the replicas: the halfwidth should shrink by
        // roughly a factor 2 (within a generous 30% band).
        let mut rng = RunRng::from_stream(5, rng::tags::SELFTEST, 0);
        let small: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![10.0 + rng.normal_pair().0])
            .collect();
        let large: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![10.0 + rng.normal_pair().0])
            .collect();
        let t_small =
            estimate_quantiles_from_rows(3.0, &[0.1], &[0.5], &small, 200, 9).unwrap();
        let t_large =
            estimate_quantiles_from_rows(3.0, &[0.1], &[0.5], &large, 200, 9).unwrap();
        let ratio = t_small.halfwidths[0][0] / t_large.halfwidths[0][0];
        assert!(
            (ratio - 2.0).abs() <= 0.6,
            "halfwidth ratio {ratio} not near 2"
        );
    }

    #[test]
    fn comparability_of_synthetic_linear_table() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|k| {
                let noise = 1.0 + 0.001 * (k as f64);
                vec![0.1 * noise, 0.2 * noise, 0.4 * noise]
            })
            .collect();
        let table = estimate_quantiles_from_rows(
            3.0,
            &[0.1, 0.2, 0.4],
            &[0.25, 0.5, 0.75],
            &rows,
            10,
            3,
        )
        .unwrap();
        let report = comparability_report(&table, 2.0, 64.0).unwrap();
        assert!(!report.degenerate);
        assert!((report.spread - 1.0).abs() < 1e-9);
        for &(_, _, r) in &report.ratios {
            assert!((r - 2.0).abs() < 1e-9);
        }
        assert!(report.pass);
    }

    #[test]
    fn comparability_flags_zero_quantile() {
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![0.0, 1.0]).collect();
        let table =
            estimate_quantiles_from_rows(3.0, &[0.1, 0.2], &[0.5], &rows, 10, 3).unwrap();
        let report = comparability_report(&table, 2.0, 64.0).unwrap();
        assert!(report.degenerate);
        assert!(!report.pass);
    }

    #[test]
    fn hausdorff_basics_and_symmetry() {
        let k = [[0.0, 0.0, 0.0, 0.0]];
        let l = [[3.0, 0.0, 0.0, 0.0]];
        assert_eq!(hausdorff_distance(&k, &k).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&k, &l).unwrap(), 3.0);
        assert_eq!(hausdorff_distance(&l, &k).unwrap(), 3.0);
        assert!(hausdorff_distance(&[], &k).is_err());
    }

    #[test]
    fn dn_distance_identity_and_shift() {
        let mut rng = RunRng::from_stream(6, rng::tags::SELFTEST, 0);
        let points: Vec<[f64; 4]> = (0..50)
            .map(|_| [rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()])
            .collect();
        let values: Vec<f64> = (0..50).map(|_| rng.uniform()).collect();
        let a = MetricSample {
            points: points.clone(),
            values: values.clone(),
        };
        assert_eq!(dn_distance(&a, &a).unwrap(), 0.0);
        let shifted = MetricSample {
            points,
            values: values.iter().map(|v| v + 0.75).collect(),
        };
        let d = dn_distance(&a, &shifted).unwrap();
        assert!((d - 0.75).abs() < 1e-12, "constant shift gives {d}");
    }

    #[test]
    fn holder_fit_recovers_planted_exponents() {
        let mut rng = RunRng::from_stream(7, rng::tags::SELFTEST, 0);
        for target in [1.0, 0.5] {
            let pairs: Vec<(f64, f64)> = (0..10_000)
                .map(|_| {
                    let sep = libm::pow(2.0, rng.range(-6.0, 0.0));
                    (sep, libm::pow(sep, target))
                })
                .collect();
            let fit = holder_fit(&pairs).unwrap();
            assert!(
                (fit.slope - target).abs() < 0.01,
                "slope {} vs {target}",
                fit.slope
            );
        }
    }

    #[test]
    fn holder_fit_rejects_degenerate_scales() {
        let pairs: Vec<(f64, f64)> = (0..300).map(|_| (0.25, 0.5)).collect();
        assert!(matches!(
            holder_fit(&pairs),
            Err(StatsError::TooFewScales { .. })
        ));
    }

    #[test]
    fn normalized_sample_conventions() {
        let mask = CarpetMask::full_square(256, 1.0, Point::new(0.0, 0.0));
        let graph = BoxGraph::build(&mask, 0.1).unwrap();
        let m_hat = chem_dist(
            &mask,
            0.1,
            Point::new(0.05, 0.05),
            Point::new(0.95, 0.05),
            false,
        )
        .unwrap()
        .area_estimate;
        let out = normalized_metric_sample(&mask, &graph, m_hat, 200, 1, 0).unwrap();
        assert_eq!(out.infinite_pairs, 0);
        assert_eq!(out.sample.len(), 200);
        // Doubling the normalizer halves every value.
        let out2 = normalized_metric_sample(&mask, &graph, 2.0 * m_hat, 200, 1, 0).unwrap();
        for (v1, v2) in out.sample.values.iter().zip(&out2.sample.values) {
            assert!((v1 / v2 - 2.0).abs() < 1e-12);
        }
        // The normalizing pair itself evaluates to 1.
        let cost = chem_dist(
            &mask,
            0.1,
            Point::new(0.05, 0.05),
            Point::new(0.95, 0.05),
            false,
        )
        .unwrap();
        assert!((cost.area_estimate / m_hat - 1.0).abs() < 1e-12);
        // Degenerate pair convention: same point costs one box.
        let cost = chem_dist(
            &mask,
            0.1,
            Point::new(0.5, 0.5),
            Point::new(0.5, 0.5),
            false,
        )
        .unwrap();
        assert!((cost.area_estimate / m_hat - 0.01 / m_hat).abs() < 1e-12);
    }

    #[test]
    fn midpoint_defect_small_on_full_grid() {
        let mask = CarpetMask::full_square(256, 1.0, Point::new(0.0, 0.0));
        let graph = BoxGraph::build(&mask, 0.1).unwrap();
        let pairs = [
            ([0.05f64, 0.05f64], [0.95f64, 0.05f64]),
            ([0.05, 0.05], [0.95, 0.95]),
            ([0.05, 0.95], [0.95, 0.05]),
        ];
        let report = geodesic_midpoint_defect(&graph, &pairs).unwrap();
        assert_eq!(report.disconnected, 0);
        for &d in &report.defects {
            // Manhattan grids have exact or near-exact midpoints.
            assert!(d <= 1.0 / 9.0 + 1e-12, "defect {d}");
        }
        // A same-box pair is excluded, not scored.
        let report = geodesic_midpoint_defect(&graph, &[([0.51, 0.51], [0.53, 0.51])]).unwrap();
        assert_eq!(report.excluded_same_box, 1);
        assert!(report.defects.is_empty());
    }

    #[test]
    fn posdef_floor_flags_zero_and_positive_casesable() {
        let sample = MetricSample {
            points: vec![
                [0.0, 0.0, 0.5, 0.0],
                [0.0, 0.0, 0.9, 0.0],
            ],
            values: vec![0.0, 2.0],
        };
        // A zero at separation >= r is reported as floor 0.
        assert_eq!(posdef_floor(&[sample.clone()], 0.4).unwrap(), 0.0);
        // Restricting to longer separations skips the zero pair.
        assert_eq!(posdef_floor(&[sample.clone()], 0.8).unwrap(), 2.0);
        assert!(matches!(
            posdef_floor(&[sample], 5.0),
            Err(StatsError::NoPairsBeyondSeparation(_))
        ));
    }

    #[test]
    fn replica_pipeline_produces_consistent_table() {
        let mut soup = SoupConfig::new(3.0, 97).unwrap();
        soup.min_duration = 8e-4;
        soup.bridge_steps = 24;
        let cfg = QuantileConfig {
            soup,
            raster_n: 256,
            bbox_half: 1.0,
            eps_list: vec![8.0 * 2.0 / 256.0, 16.0 * 2.0 / 256.0],
            p_list: vec![0.25, 0.5, 0.75],
            replicas: 4,
            net_count: 8,
            bootstrap_resamples: 20,
        };
        cfg.validate().unwrap();
        let rows: Vec<Vec<f64>> = (0..cfg.replicas)
            .map(|slot| replica_diameters(&cfg, slot).unwrap())
            .collect();
        let table = assemble_quantile_table(
            cfg.soup.kappa,
            &cfg.eps_list,
            &cfg.p_list,
            &rows,
            cfg.bootstrap_resamples,
            cfg.soup.seed,
        );
        assert!(table.monotone_in_p());
        for row in &table.q_hat {
            for &v in row {
                assert!(v.is_finite() && v > 0.0);
            }
        }
        // Deterministic under recomputation.
        let rows2: Vec<Vec<f64>> = (0..cfg.replicas)
            .map(|slot| replica_diameters(&cfg, slot).unwrap())
            .collect();
        assert_eq!(rows, rows2);
    }

    #[test]
    fn ks_statistic_of_identical_samples_is_zero() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_statistic_sorted(&a, &a), 0.0);
        let b = [10.0, 20.0, 30.0, 40.0];
        assert_eq!(ks_statistic_sorted(&a, &b), 1.0);
    }

    #[allow(dead_code)]
    fn ensemble_stub() -> LoopEnsemble {
        LoopEnsemble {
            cle_loops: Vec::new(),
            domain_loop: Some(circle_loop(Point::new(0.0, 0.0), 1.0, 64)),
            manifest: RunManifest::new("t", 0, 0, "t"),
        }
    }
}
