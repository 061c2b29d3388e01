//! The analysis pipeline: log-density deciles, lower-tail thresholds,
//! population-adjusted densities, desert labeling, and the deprivation
//! comparison.
//!
//! Ordering conventions used throughout:
//!
//! * Tract-aligned vectors follow input tract order.
//! * Segments ("deciles", whatever `k` is) are 1-based, ascending in log
//!   population density.
//! * Desert labeling ranks by adjusted density ascending with ties broken
//!   by geoid ascending, so results never depend on input shuffling.

use std::collections::{HashMap, HashSet};

use crate::config::radius_index;
use crate::error::{Error, Result};
use crate::ingest::{LogPopDensity, TractRecord};
use crate::spatial::{circle_area_sq_miles, DensityProfile};
use crate::stats::{self, WelchResult};

// ── segmentation ──

/// Per-segment descriptive row (sizes and shares are cumulative from the
/// sparsest segment up).
#[derive(Debug, Clone)]
pub struct BinStats {
    pub size: usize,
    pub cum_pct_tracts: f64,
    pub cum_pct_area: f64,
    pub cum_pct_population: f64,
    /// Lower log-density bound: the observed minimum for segment 1
    /// (absorbing the zero-population sentinel), the cut point otherwise.
    pub log_density_lo: f64,
    /// Upper log-density bound: the observed maximum for the top segment,
    /// the cut point otherwise.
    pub log_density_hi: f64,
}

/// Equal-width segmentation of tracts by log population density.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub k: usize,
    /// k - 1 ascending interior cut points.
    pub cut_points: Vec<f64>,
    /// 1-based segment of each tract, aligned with the input order.
    pub decile_by_tract: Vec<usize>,
    /// Tract indices per segment (index 0 holds segment 1), input order.
    pub members: Vec<Vec<usize>>,
    pub bin_stats: Vec<BinStats>,
    geoid_to_decile: HashMap<String, usize>,
}

impl Segmentation {
    /// Segment of a tract by geoid, if known.
    pub fn decile_of(&self, geoid: &str) -> Option<usize> {
        self.geoid_to_decile.get(geoid).copied()
    }
}

/// Split tracts into `k` equal-width bins of log population density.
///
/// Cut points divide `[min, max]` of the unclamped values; the first bin is
/// unbounded below so sentinel (zero-population) tracts land there. Bin `d`
/// covers `(cut[d-1], cut[d]]`.
pub fn segment_deciles(
    tracts: &[TractRecord],
    log_densities: &[LogPopDensity],
    k: usize,
) -> Result<Segmentation> {
    assert_eq!(
        tracts.len(),
        log_densities.len(),
        "tracts and log densities must be aligned"
    );
    assert!(k >= 2, "need at least two segments");
    if tracts.len() < k {
        return Err(Error::InsufficientData {
            need: k,
            have: tracts.len(),
            context: "segment_deciles",
        });
    }

    let mut unclamped: Vec<f64> = log_densities
        .iter()
        .filter(|d| !d.clamped)
        .map(|d| d.value)
        .collect();
    if unclamped.is_empty() {
        return Err(Error::AllClamped);
    }
    unclamped.sort_unstable_by(f64::total_cmp);
    let distinct = 1 + unclamped.windows(2).filter(|w| w[0] != w[1]).count();
    if k > distinct {
        return Err(Error::TooFewDistinct { k, distinct });
    }
    let lo = unclamped[0];
    let hi = *unclamped.last().unwrap();

    let cut_points: Vec<f64> = (1..k)
        .map(|j| lo + (hi - lo) * j as f64 / k as f64)
        .collect();

    let mut decile_by_tract = Vec::with_capacity(tracts.len());
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut geoid_to_decile = HashMap::with_capacity(tracts.len());
    for (i, d) in log_densities.iter().enumerate() {
        // bin = 1 + number of cuts strictly below the value; the first bin
        // is unbounded below, the top bin runs to the observed maximum
        let bin = 1 + cut_points.partition_point(|&c| c < d.value);
        decile_by_tract.push(bin);
        members[bin - 1].push(i);
        geoid_to_decile.insert(tracts[i].geoid.clone(), bin);
    }

    let total_tracts = tracts.len() as f64;
    let total_area: f64 = tracts.iter().map(|t| t.land_area_sqmi).sum();
    let total_pop: f64 = tracts.iter().map(|t| t.population).sum();
    let observed_min = log_densities
        .iter()
        .map(|d| d.value)
        .fold(f64::INFINITY, f64::min);

    let mut bin_stats = Vec::with_capacity(k);
    let mut cum_tracts = 0.0;
    let mut cum_area = 0.0;
    let mut cum_pop = 0.0;
    for d in 1..=k {
        let idxs = &members[d - 1];
        cum_tracts += idxs.len() as f64;
        cum_area += idxs.iter().map(|&i| tracts[i].land_area_sqmi).sum::<f64>();
        cum_pop += idxs.iter().map(|&i| tracts[i].population).sum::<f64>();
        bin_stats.push(BinStats {
            size: idxs.len(),
            cum_pct_tracts: 100.0 * cum_tracts / total_tracts,
            cum_pct_area: if total_area > 0.0 {
                100.0 * cum_area / total_area
            } else {
                f64::NAN
            },
            cum_pct_population: if total_pop > 0.0 {
                100.0 * cum_pop / total_pop
            } else {
                f64::NAN
            },
            log_density_lo: if d == 1 { observed_min } else { cut_points[d - 2] },
            log_density_hi: if d == k { hi } else { cut_points[d - 1] },
        });
    }

    Ok(Segmentation {
        k,
        cut_points,
        decile_by_tract,
        members,
        bin_stats,
        geoid_to_decile,
    })
}

// ── threshold table ──

/// Lower-tail summary for one (segment, radius) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCell {
    pub pct_zero: f64,
    /// One value per requested probability, ascending with it.
    pub quantiles: Vec<f64>,
}

/// Percent-zero and lower-tail density quantiles per segment and radius,
/// plus the all-tracts row. `None` cells mark empty segments.
#[derive(Debug, Clone)]
pub struct ThresholdTable {
    pub radii: Vec<f64>,
    pub probs: Vec<f64>,
    /// Per radius, over every tract.
    pub all: Vec<ThresholdCell>,
    /// `by_decile[d-1][r]` is the cell for segment `d` at `radii[r]`.
    pub by_decile: Vec<Vec<Option<ThresholdCell>>>,
}

fn cell_for(values: &[f64], probs: &[f64]) -> Result<ThresholdCell> {
    let quantiles = probs
        .iter()
        .map(|&p| stats::quantile(values, p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ThresholdCell {
        pct_zero: stats::pct_zero(values)?,
        quantiles,
    })
}

/// Build the threshold table at the given radii (each must be on the
/// profile schedule).
pub fn threshold_table(
    profiles: &[DensityProfile],
    seg: &Segmentation,
    schedule: &[f64],
    radii: &[f64],
    probs: &[f64],
) -> Result<ThresholdTable> {
    assert_eq!(
        profiles.len(),
        seg.decile_by_tract.len(),
        "profiles and segmentation must be aligned"
    );
    if profiles.is_empty() {
        return Err(Error::EmptyInput("threshold_table"));
    }
    let radius_cols: Vec<usize> = radii
        .iter()
        .map(|&r| radius_index(schedule, r).ok_or(Error::RadiusNotInSchedule(r)))
        .collect::<Result<Vec<usize>>>()?;

    let mut all = Vec::with_capacity(radii.len());
    for &col in &radius_cols {
        let values: Vec<f64> = profiles.iter().map(|p| p.densities[col]).collect();
        all.push(cell_for(&values, probs)?);
    }

    let mut by_decile = Vec::with_capacity(seg.k);
    for d in 1..=seg.k {
        let idxs = &seg.members[d - 1];
        let mut row = Vec::with_capacity(radii.len());
        for &col in &radius_cols {
            if idxs.is_empty() {
                row.push(None);
            } else {
                let values: Vec<f64> =
                    idxs.iter().map(|&i| profiles[i].densities[col]).collect();
                row.push(Some(cell_for(&values, probs)?));
            }
        }
        by_decile.push(row);
    }

    Ok(ThresholdTable {
        radii: radii.to_vec(),
        probs: probs.to_vec(),
        all,
        by_decile,
    })
}

// ── adjusted density ──

/// Why a segment was left out of the adjustment.
#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    /// Fewer than three tracts.
    TooSmall(usize),
    /// All tracts share one log density, so the regressor is constant.
    ConstantRegressor,
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkipReason::TooSmall(n) => write!(f, "only {n} tracts"),
            SkipReason::ConstantRegressor => write!(f, "constant log density"),
        }
    }
}

/// Slope diagnostics for one segment's regression.
#[derive(Debug, Clone)]
pub struct DecileFit {
    pub decile: usize,
    pub n: usize,
    pub slope: f64,
    pub slope_t: f64,
    pub slope_p: f64,
}

/// Population-adjusted densities at one radius: the residual of density on
/// log population density, fit separately within each segment.
#[derive(Debug, Clone)]
pub struct AdjustedDensity {
    pub radius: f64,
    /// Aligned with input tracts; `None` where the segment was skipped.
    pub values: Vec<Option<f64>>,
    /// Per segment (index 0 = segment 1); `None` where skipped.
    pub fits: Vec<Option<DecileFit>>,
    pub skipped: Vec<(usize, SkipReason)>,
}

/// Regress density at `radius` on log population density within each
/// segment and keep the residuals. Degenerate segments are skipped with a
/// warning and their tracts stay unadjusted.
pub fn adjust_density(
    profiles: &[DensityProfile],
    seg: &Segmentation,
    log_densities: &[LogPopDensity],
    schedule: &[f64],
    radius: f64,
) -> Result<AdjustedDensity> {
    assert_eq!(profiles.len(), seg.decile_by_tract.len());
    assert_eq!(profiles.len(), log_densities.len());
    let col = radius_index(schedule, radius).ok_or(Error::RadiusNotInSchedule(radius))?;

    let mut values: Vec<Option<f64>> = vec![None; profiles.len()];
    let mut fits: Vec<Option<DecileFit>> = Vec::with_capacity(seg.k);
    let mut skipped = Vec::new();
    for d in 1..=seg.k {
        let idxs = &seg.members[d - 1];
        let x: Vec<f64> = idxs.iter().map(|&i| log_densities[i].value).collect();
        let y: Vec<f64> = idxs.iter().map(|&i| profiles[i].densities[col]).collect();
        match stats::ols_fit(&x, &y) {
            Ok(fit) => {
                for (&i, r) in idxs.iter().zip(&fit.residuals) {
                    values[i] = Some(*r);
                }
                fits.push(Some(DecileFit {
                    decile: d,
                    n: fit.n,
                    slope: fit.slope,
                    slope_t: fit.slope_t,
                    slope_p: fit.slope_p(),
                }));
            }
            Err(Error::InsufficientData { have, .. }) => {
                log::warn!("segment {d} skipped at {radius} mi: only {have} tracts");
                skipped.push((d, SkipReason::TooSmall(have)));
                fits.push(None);
            }
            Err(Error::DegenerateRegressor) => {
                log::warn!("segment {d} skipped at {radius} mi: constant log density");
                skipped.push((d, SkipReason::ConstantRegressor));
                fits.push(None);
            }
            Err(e) => return Err(e),
        }
    }

    Ok(AdjustedDensity {
        radius,
        values,
        fits,
        skipped,
    })
}

// ── desert labeling ──

/// Desert labels at one radius.
#[derive(Debug, Clone)]
pub struct DesertLabeling {
    pub radius: f64,
    pub fraction: f64,
    /// Aligned with input tracts; unadjusted tracts are never deserts.
    pub is_desert: Vec<bool>,
    /// Labeled tract indices per segment, in (adjusted, geoid) order.
    pub desert_by_decile: Vec<Vec<usize>>,
}

/// Ceiling of `fraction * n` under real arithmetic. The tiny back-off
/// undoes binary representation error in decimal fractions (0.05 * 100
/// floats a hair above 5 and must still ceil to 5, not 6).
fn desert_count(fraction: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    (fraction * n as f64 - 1e-9).ceil() as usize
}

/// Label the lowest `ceil(fraction * n_d)` tracts of each segment by
/// adjusted density as deserts, ties broken by ascending geoid.
pub fn classify_deserts(
    adjusted: &AdjustedDensity,
    seg: &Segmentation,
    tracts: &[TractRecord],
    fraction: f64,
) -> DesertLabeling {
    assert!(
        fraction > 0.0 && fraction < 1.0,
        "desert fraction must lie strictly between 0 and 1"
    );
    assert_eq!(adjusted.values.len(), tracts.len());

    let mut is_desert = vec![false; tracts.len()];
    let mut desert_by_decile = Vec::with_capacity(seg.k);
    for d in 1..=seg.k {
        let mut ranked: Vec<(f64, &str, usize)> = seg.members[d - 1]
            .iter()
            .filter_map(|&i| adjusted.values[i].map(|v| (v, tracts[i].geoid.as_str(), i)))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let count = desert_count(fraction, ranked.len());
        let chosen: Vec<usize> = ranked[..count].iter().map(|&(_, _, i)| i).collect();
        for &i in &chosen {
            is_desert[i] = true;
        }
        desert_by_decile.push(chosen);
    }

    DesertLabeling {
        radius: adjusted.radius,
        fraction,
        is_desert,
        desert_by_decile,
    }
}

// ── deprivation comparison ──

/// Which tracts a comparison row covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    Decile(usize),
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::All => write!(f, "all"),
            Scope::Decile(d) => write!(f, "{d}"),
        }
    }
}

/// Deprivation summary for one side of the desert split.
#[derive(Debug, Clone, Copy)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

fn group_stats(values: &[f64]) -> Option<GroupStats> {
    if values.is_empty() {
        return None;
    }
    Some(GroupStats {
        n: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// One row of the desert-vs-rest deprivation comparison.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub scope: Scope,
    pub radius: f64,
    /// Spearman correlation between adjusted and unadjusted density.
    pub spearman_rho: Option<f64>,
    /// Welch's t of desert deprivation against the rest.
    pub welch: Option<WelchResult>,
    /// Positive desert excess significant at the configured level.
    pub significant: bool,
    pub desert: Option<GroupStats>,
    pub rest: Option<GroupStats>,
    /// Set when the row could not be fully computed.
    pub note: Option<String>,
}

fn build_row(
    scope: Scope,
    radius: f64,
    adjusted: &[f64],
    unadjusted: &[f64],
    desert_depr: &[f64],
    rest_depr: &[f64],
    alpha: f64,
) -> ComparisonRow {
    let mut note: Option<String> = None;

    let spearman_rho = match stats::spearman(adjusted, unadjusted) {
        Ok(rho) => Some(rho),
        Err(e) => {
            note = Some(format!("spearman unavailable: {e}"));
            None
        }
    };

    let (welch, significant) = match stats::welch_t(desert_depr, rest_depr) {
        Ok(w) => {
            let sig = w.t > 0.0 && w.p_two_sided < alpha;
            (Some(w), sig)
        }
        Err(Error::ZeroVariance) => {
            let mean_a = desert_depr.iter().sum::<f64>() / desert_depr.len() as f64;
            let mean_b = rest_depr.iter().sum::<f64>() / rest_depr.len() as f64;
            if mean_a == mean_b {
                // flat deprivation on both sides: difference is exactly zero
                (
                    Some(WelchResult {
                        t: 0.0,
                        df: f64::NAN,
                        p_two_sided: 1.0,
                        mean_a,
                        mean_b,
                    }),
                    false,
                )
            } else {
                note.get_or_insert_with(|| {
                    "welch unavailable: zero variance in both groups".into()
                });
                (None, false)
            }
        }
        Err(e) => {
            note.get_or_insert_with(|| format!("welch unavailable: {e}"));
            (None, false)
        }
    };

    ComparisonRow {
        scope,
        radius,
        spearman_rho,
        welch,
        significant,
        desert: group_stats(desert_depr),
        rest: group_stats(rest_depr),
        note,
    }
}

/// Compare desert against non-desert deprivation within each segment and
/// pooled over all segments, at the labeling's radius.
///
/// Rows whose desert group is too small are flagged, never fabricated.
pub fn compare_deprivation(
    tracts: &[TractRecord],
    profiles: &[DensityProfile],
    seg: &Segmentation,
    adjusted: &AdjustedDensity,
    labels: &DesertLabeling,
    schedule: &[f64],
    alpha: f64,
) -> Result<Vec<ComparisonRow>> {
    assert_eq!(tracts.len(), profiles.len());
    assert_eq!(tracts.len(), adjusted.values.len());
    assert_eq!(tracts.len(), labels.is_desert.len());
    let col =
        radius_index(schedule, adjusted.radius).ok_or(Error::RadiusNotInSchedule(adjusted.radius))?;

    let mut rows = Vec::with_capacity(seg.k + 1);

    let collect_arrays = |idxs: &mut dyn Iterator<Item = usize>| {
        let mut adj = Vec::new();
        let mut unadj = Vec::new();
        let mut desert = Vec::new();
        let mut rest = Vec::new();
        for i in idxs {
            let Some(a) = adjusted.values[i] else { continue };
            adj.push(a);
            unadj.push(profiles[i].densities[col]);
            if labels.is_desert[i] {
                desert.push(tracts[i].deprivation);
            } else {
                rest.push(tracts[i].deprivation);
            }
        }
        (adj, unadj, desert, rest)
    };

    let (adj, unadj, desert, rest) = collect_arrays(&mut (0..tracts.len()));
    rows.push(build_row(
        Scope::All,
        adjusted.radius,
        &adj,
        &unadj,
        &desert,
        &rest,
        alpha,
    ));

    for d in 1..=seg.k {
        let (adj, unadj, desert, rest) =
            collect_arrays(&mut seg.members[d - 1].iter().copied());
        if adj.is_empty() {
            rows.push(ComparisonRow {
                scope: Scope::Decile(d),
                radius: adjusted.radius,
                spearman_rho: None,
                welch: None,
                significant: false,
                desert: None,
                rest: None,
                note: Some("segment skipped or empty".into()),
            });
            continue;
        }
        rows.push(build_row(
            Scope::Decile(d),
            adjusted.radius,
            &adj,
            &unadj,
            &desert,
            &rest,
            alpha,
        ));
    }

    Ok(rows)
}

// ── subset quantiles ──

/// Density quantiles for a named subset of tracts.
#[derive(Debug, Clone)]
pub struct SubsetTable {
    pub n: usize,
    pub radii: Vec<f64>,
    pub probs: Vec<f64>,
    /// `quantiles[r][p]` = quantile of density at `radii[r]`, `probs[p]`.
    pub quantiles: Vec<Vec<f64>>,
}

/// Quantiles of density over the tracts named in `geoids`, at each radius
/// and probability.
pub fn subset_quantiles(
    profiles: &[DensityProfile],
    geoids: &HashSet<String>,
    schedule: &[f64],
    radii: &[f64],
    probs: &[f64],
) -> Result<SubsetTable> {
    let cols: Vec<usize> = radii
        .iter()
        .map(|&r| radius_index(schedule, r).ok_or(Error::RadiusNotInSchedule(r)))
        .collect::<Result<Vec<usize>>>()?;
    let picked: Vec<&DensityProfile> = profiles
        .iter()
        .filter(|p| geoids.contains(&p.geoid))
        .collect();
    if picked.is_empty() {
        return Err(Error::NoMatchingGeoids);
    }
    let mut quantiles = Vec::with_capacity(radii.len());
    for &col in &cols {
        let values: Vec<f64> = picked.iter().map(|p| p.densities[col]).collect();
        quantiles.push(
            probs
                .iter()
                .map(|&p| stats::quantile(&values, p))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(SubsetTable {
        n: picked.len(),
        radii: radii.to_vec(),
        probs: probs.to_vec(),
        quantiles,
    })
}

// ── area-type summary ──

/// Maps a band of segments at one radius to a named area type.
#[derive(Debug, Clone)]
pub struct AreaTypeRule {
    pub label: String,
    pub decile_lo: usize,
    pub decile_hi: usize,
    pub radius: f64,
}

/// The default mapping: densest segments summarized at short range,
/// sparsest at long range.
pub fn default_type_rules() -> Vec<AreaTypeRule> {
    let rule = |label: &str, lo: usize, hi: usize, radius: f64| AreaTypeRule {
        label: label.into(),
        decile_lo: lo,
        decile_hi: hi,
        radius,
    };
    vec![
        rule("Urban", 8, 9, 2.0),
        rule("Less Urban", 6, 7, 5.0),
        rule("Rural", 4, 5, 20.0),
        rule("Very Rural", 1, 3, 20.0),
    ]
}

/// One area-type summary row.
#[derive(Debug, Clone)]
pub struct TypeRow {
    pub label: String,
    pub decile_lo: usize,
    pub decile_hi: usize,
    pub radius: f64,
    pub density_min: f64,
    pub density_max: f64,
    /// Threshold densities converted to whole banks inside the circle.
    pub banks_min: u64,
    pub banks_max: u64,
    pub note: Option<String>,
}

/// Summarize threshold quantiles into density and implied-bank ranges per
/// area type. The implied count is `density * pi r^2`, rounded to nearest.
pub fn summarize_types(
    table: &ThresholdTable,
    rules: &[AreaTypeRule],
) -> Result<Vec<TypeRow>> {
    let mut rows = Vec::with_capacity(rules.len());
    for rule in rules {
        let col = radius_index(&table.radii, rule.radius)
            .ok_or(Error::RadiusNotInSchedule(rule.radius))?;
        let mut qs: Vec<f64> = Vec::new();
        for d in rule.decile_lo..=rule.decile_hi.min(table.by_decile.len()) {
            if let Some(cell) = &table.by_decile[d - 1][col] {
                qs.extend(&cell.quantiles);
            }
        }
        if qs.is_empty() {
            rows.push(TypeRow {
                label: rule.label.clone(),
                decile_lo: rule.decile_lo,
                decile_hi: rule.decile_hi,
                radius: rule.radius,
                density_min: f64::NAN,
                density_max: f64::NAN,
                banks_min: 0,
                banks_max: 0,
                note: Some("no populated segments in range".into()),
            });
            continue;
        }
        let density_min = qs.iter().cloned().fold(f64::INFINITY, f64::min);
        let density_max = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let area = circle_area_sq_miles(rule.radius);
        rows.push(TypeRow {
            label: rule.label.clone(),
            decile_lo: rule.decile_lo,
            decile_hi: rule.decile_hi,
            radius: rule.radius,
            density_min,
            density_max,
            banks_min: (density_min * area).round() as u64,
            banks_max: (density_max * area).round() as u64,
            note: None,
        });
    }
    Ok(rows)
}
