//! Runs the full analysis and serializes the results.
//!
//! Every output file opens with (or, for GeoJSON, embeds) the run
//! fingerprint: a SHA-256 over the canonical configuration and the input
//! digests. Two runs with the same fingerprint inputs produce
//! byte-identical files; numbers are printed with the shortest
//! representation that round-trips, so nothing is lost to formatting.

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{radius_index, RunConfig, Settings, SUBSET_PROBS, SUBSET_RADII, SUMMARY_RADII};
use crate::error::{Error, Result};
use crate::ingest::{log_pop_density, BankPoint, LogPopDensity, TractRecord};
use crate::pipeline::{
    adjust_density, classify_deserts, compare_deprivation, default_type_rules, segment_deciles,
    subset_quantiles, summarize_types, threshold_table, AdjustedDensity, ComparisonRow,
    DesertLabeling, Scope, Segmentation, SubsetTable, ThresholdTable, TypeRow,
};
use crate::spatial::{circle_area_sq_miles, density_profile, profile_tracts, DensityProfile, GeoIndex};
use crate::stats;

/// Parsed inputs plus provenance, ready for [`analyze`].
pub struct AnalysisData {
    pub banks: Vec<BankPoint>,
    pub tracts: Vec<TractRecord>,
    pub dropped_banks: usize,
    pub dropped_tracts: usize,
    /// (label, sha256-hex) per input file, in a fixed order.
    pub digests: Vec<(String, String)>,
    /// Optional geoid filter for the subset quantile table.
    pub subset_geoids: Option<HashSet<String>>,
}

/// Everything computed at one headline radius.
pub struct RadiusAnalysis {
    pub radius: f64,
    pub adjusted: AdjustedDensity,
    pub labels: DesertLabeling,
    pub comparison: Vec<ComparisonRow>,
}

/// Descriptive statistics; one row per statistic, one column per summary
/// radius plus a final deprivation column. NaN cells print as NA.
pub struct SummaryStats {
    pub radii: Vec<f64>,
    pub rows: Vec<(String, Vec<f64>)>,
}

/// Quantiles of density across the whole radius schedule.
pub struct CurveTable {
    pub probs: Vec<f64>,
    pub radii: Vec<f64>,
    /// `rows[r][p]`, aligned with `radii` and `probs`.
    pub rows: Vec<Vec<f64>>,
}

/// The complete analysis, ready to serialize.
pub struct ReportBundle {
    pub config: RunConfig,
    pub fingerprint: String,
    pub n_banks: usize,
    pub dropped_banks: usize,
    pub dropped_tracts: usize,
    pub tracts: Vec<TractRecord>,
    pub log_densities: Vec<LogPopDensity>,
    pub profiles: Vec<DensityProfile>,
    pub seg: Segmentation,
    pub summary: SummaryStats,
    pub thresholds: ThresholdTable,
    pub per_radius: Vec<RadiusAnalysis>,
    pub type_summary: Option<Vec<TypeRow>>,
    pub curves: CurveTable,
    pub subset: Option<SubsetTable>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Run fingerprint: canonical configuration plus labeled input digests.
pub fn run_fingerprint(settings: &Settings, digests: &[(String, String)]) -> String {
    let mut payload = settings
        .run
        .canonical_string(&settings.bank_schema, &settings.tract_schema);
    for (label, digest) in digests {
        payload.push_str(&format!("{label}_sha256={digest}\n"));
    }
    sha256_hex(payload.as_bytes())
}

fn summary_stats(
    profiles: &[DensityProfile],
    tracts: &[TractRecord],
    schedule: &[f64],
) -> Result<SummaryStats> {
    let radii: Vec<f64> = SUMMARY_RADII
        .iter()
        .copied()
        .filter(|&r| radius_index(schedule, r).is_some())
        .collect();
    let cols: Vec<usize> = radii
        .iter()
        .map(|&r| radius_index(schedule, r).unwrap())
        .collect();

    let mut columns: Vec<Vec<f64>> = cols
        .iter()
        .map(|&c| profiles.iter().map(|p| p.densities[c]).collect())
        .collect();
    columns.push(tracts.iter().map(|t| t.deprivation).collect());

    type StatFn = fn(&[f64]) -> Result<f64>;
    let stat_rows: [(&str, StatFn); 6] = [
        ("min", |v| stats::quantile(v, 0.0)),
        ("q1", |v| stats::quantile(v, 0.25)),
        ("median", |v| stats::quantile(v, 0.5)),
        ("mean", |v| Ok(v.iter().sum::<f64>() / v.len() as f64)),
        ("q3", |v| stats::quantile(v, 0.75)),
        ("max", |v| stats::quantile(v, 1.0)),
    ];
    let mut rows = Vec::new();
    for (name, f) in stat_rows {
        let mut cells = Vec::with_capacity(columns.len());
        for col in &columns {
            cells.push(f(col)?);
        }
        rows.push((name.to_string(), cells));
    }
    // circle areas give the density columns scale; meaningless for
    // deprivation, so that cell stays NA
    let mut area_cells: Vec<f64> = radii.iter().map(|&r| circle_area_sq_miles(r)).collect();
    area_cells.push(f64::NAN);
    rows.push(("circle_area_sqmi".to_string(), area_cells));

    Ok(SummaryStats { radii, rows })
}

/// Run the whole pipeline under `settings`.
pub fn analyze(settings: &Settings, data: AnalysisData) -> Result<ReportBundle> {
    settings.run.validate()?;
    let cfg = &settings.run;
    if data.tracts.is_empty() {
        return Err(Error::EmptyInput("tracts"));
    }

    let log_densities: Vec<LogPopDensity> = data
        .tracts
        .iter()
        .map(|t| log_pop_density(t.population, t.land_area_sqmi))
        .collect();

    let max_radius = *cfg.radius_schedule.last().unwrap();
    let index = GeoIndex::build(&data.banks, max_radius);
    let profiles: Vec<DensityProfile> = profile_tracts(&index, &data.tracts, &cfg.radius_schedule)
        .iter()
        .map(|c| density_profile(c, &cfg.radius_schedule))
        .collect();

    let seg = segment_deciles(&data.tracts, &log_densities, cfg.segment_count)?;
    let thresholds = threshold_table(
        &profiles,
        &seg,
        &cfg.radius_schedule,
        &cfg.headline_radii,
        &cfg.quantile_probs,
    )?;

    let mut per_radius = Vec::with_capacity(cfg.headline_radii.len());
    for &radius in &cfg.headline_radii {
        let adjusted = adjust_density(&profiles, &seg, &log_densities, &cfg.radius_schedule, radius)?;
        let labels = classify_deserts(&adjusted, &seg, &data.tracts, cfg.desert_fraction);
        let comparison = compare_deprivation(
            &data.tracts,
            &profiles,
            &seg,
            &adjusted,
            &labels,
            &cfg.radius_schedule,
            cfg.significance_level,
        )?;
        per_radius.push(RadiusAnalysis {
            radius,
            adjusted,
            labels,
            comparison,
        });
    }

    // the default area-type mapping needs its radii among the headline
    // set; with a custom configuration that may not hold, so skip rather
    // than fail the run
    let type_summary = match summarize_types(&thresholds, &default_type_rules()) {
        Ok(rows) => Some(rows),
        Err(Error::RadiusNotInSchedule(r)) => {
            log::warn!("area-type summary skipped: {r} mi not among headline radii");
            None
        }
        Err(e) => return Err(e),
    };

    let mut curve_probs: Vec<f64> = cfg.quantile_probs.clone();
    if !curve_probs.contains(&0.5) {
        curve_probs.push(0.5);
    }
    curve_probs.sort_by(f64::total_cmp);
    let mut curve_rows = Vec::with_capacity(cfg.radius_schedule.len());
    for col in 0..cfg.radius_schedule.len() {
        let values: Vec<f64> = profiles.iter().map(|p| p.densities[col]).collect();
        curve_rows.push(
            curve_probs
                .iter()
                .map(|&p| stats::quantile(&values, p))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let curves = CurveTable {
        probs: curve_probs,
        radii: cfg.radius_schedule.clone(),
        rows: curve_rows,
    };

    let subset = match &data.subset_geoids {
        None => None,
        Some(geoids) => {
            let radii: Vec<f64> = SUBSET_RADII
                .iter()
                .copied()
                .filter(|&r| radius_index(&cfg.radius_schedule, r).is_some())
                .collect();
            Some(subset_quantiles(
                &profiles,
                geoids,
                &cfg.radius_schedule,
                &radii,
                &SUBSET_PROBS,
            )?)
        }
    };

    let summary = summary_stats(&profiles, &data.tracts, &cfg.radius_schedule)?;
    let fingerprint = run_fingerprint(settings, &data.digests);

    Ok(ReportBundle {
        config: cfg.clone(),
        fingerprint,
        n_banks: data.banks.len(),
        dropped_banks: data.dropped_banks,
        dropped_tracts: data.dropped_tracts,
        tracts: data.tracts,
        log_densities,
        profiles,
        seg,
        summary,
        thresholds,
        per_radius,
        type_summary,
        curves,
        subset,
    })
}

// ── serialization ──

fn cell(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        v.to_string()
    }
}

fn opt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => cell(v),
        None => "NA".to_string(),
    }
}

/// "2" for 2.0, "2.5" for 2.5 — used in column names and GeoJSON keys.
fn radius_label(r: f64) -> String {
    r.to_string()
}

/// "q5" for 0.05, "q50" for 0.5.
fn prob_label(p: f64) -> String {
    format!("q{}", 100.0 * p)
}

fn fingerprinted_csv(fingerprint: &str) -> csv::Writer<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "# fingerprint={fingerprint}").expect("vec write");
    csv::Writer::from_writer(buf)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv flush: {e}")))
}

fn summary_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let mut w = fingerprinted_csv(&b.fingerprint);
    let mut header = vec!["statistic".to_string()];
    header.extend(
        b.summary
            .radii
            .iter()
            .map(|&r| format!("density_{}mi", radius_label(r))),
    );
    header.push("deprivation".to_string());
    w.write_record(&header)?;
    for (name, cells) in &b.summary.rows {
        let mut rec = vec![name.clone()];
        rec.extend(cells.iter().map(|&v| cell(v)));
        w.write_record(&rec)?;
    }
    finish_csv(w)
}

fn segments_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let mut w = fingerprinted_csv(&b.fingerprint);
    w.write_record([
        "segment",
        "size",
        "cum_pct_tracts",
        "cum_pct_area",
        "cum_pct_population",
        "log_density_lo",
        "log_density_hi",
    ])?;
    for (d, s) in b.seg.bin_stats.iter().enumerate() {
        w.write_record(&[
            (d + 1).to_string(),
            s.size.to_string(),
            cell(s.cum_pct_tracts),
            cell(s.cum_pct_area),
            cell(s.cum_pct_population),
            cell(s.log_density_lo),
            cell(s.log_density_hi),
        ])?;
    }
    finish_csv(w)
}

fn thresholds_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let t = &b.thresholds;
    let mut w = fingerprinted_csv(&b.fingerprint);
    let mut header = vec!["scope".to_string(), "radius".to_string(), "n".to_string(), "pct_zero".to_string()];
    header.extend(t.probs.iter().map(|&p| prob_label(p)));
    header.push("flag".to_string());
    w.write_record(&header)?;

    let n_all = b.tracts.len();
    for (col, &radius) in t.radii.iter().enumerate() {
        let c = &t.all[col];
        let mut rec = vec![
            "all".to_string(),
            radius.to_string(),
            n_all.to_string(),
            cell(c.pct_zero),
        ];
        rec.extend(c.quantiles.iter().map(|&q| cell(q)));
        rec.push(String::new());
        w.write_record(&rec)?;
    }
    for (d, row) in t.by_decile.iter().enumerate() {
        for (col, &radius) in t.radii.iter().enumerate() {
            let n = b.seg.bin_stats[d].size;
            let mut rec = vec![(d + 1).to_string(), radius.to_string(), n.to_string()];
            match &row[col] {
                Some(c) => {
                    rec.push(cell(c.pct_zero));
                    rec.extend(c.quantiles.iter().map(|&q| cell(q)));
                    rec.push(String::new());
                }
                None => {
                    rec.push("NA".to_string());
                    rec.extend(t.probs.iter().map(|_| "NA".to_string()));
                    rec.push("empty".to_string());
                }
            }
            w.write_record(&rec)?;
        }
    }
    finish_csv(w)
}

fn comparison_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let mut w = fingerprinted_csv(&b.fingerprint);
    w.write_record([
        "radius",
        "scope",
        "n_desert",
        "n_rest",
        "desert_mean",
        "desert_min",
        "desert_max",
        "rest_mean",
        "rest_min",
        "rest_max",
        "spearman_rho",
        "welch_t",
        "welch_df",
        "welch_p",
        "significant",
        "note",
    ])?;
    for ra in &b.per_radius {
        for row in &ra.comparison {
            let (nd, dmean, dmin, dmax) = match row.desert {
                Some(g) => (g.n.to_string(), cell(g.mean), cell(g.min), cell(g.max)),
                None => ("0".into(), "NA".into(), "NA".into(), "NA".into()),
            };
            let (nr, rmean, rmin, rmax) = match row.rest {
                Some(g) => (g.n.to_string(), cell(g.mean), cell(g.min), cell(g.max)),
                None => ("0".into(), "NA".into(), "NA".into(), "NA".into()),
            };
            let (wt, wdf, wp) = match row.welch {
                Some(wr) => (cell(wr.t), cell(wr.df), cell(wr.p_two_sided)),
                None => ("NA".into(), "NA".into(), "NA".into()),
            };
            w.write_record(&[
                row.radius.to_string(),
                row.scope.to_string(),
                nd,
                nr,
                dmean,
                dmin,
                dmax,
                rmean,
                rmin,
                rmax,
                opt_cell(row.spearman_rho),
                wt,
                wdf,
                wp,
                row.significant.to_string(),
                row.note.clone().unwrap_or_default(),
            ])?;
        }
    }
    finish_csv(w)
}

fn type_summary_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let mut w = fingerprinted_csv(&b.fingerprint);
    w.write_record([
        "area_type",
        "segment_lo",
        "segment_hi",
        "radius",
        "density_min",
        "density_max",
        "banks_min",
        "banks_max",
        "note",
    ])?;
    if let Some(rows) = &b.type_summary {
        for r in rows {
            w.write_record(&[
                r.label.clone(),
                r.decile_lo.to_string(),
                r.decile_hi.to_string(),
                r.radius.to_string(),
                cell(r.density_min),
                cell(r.density_max),
                r.banks_min.to_string(),
                r.banks_max.to_string(),
                r.note.clone().unwrap_or_default(),
            ])?;
        }
    }
    finish_csv(w)
}

fn curves_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let mut w = fingerprinted_csv(&b.fingerprint);
    let mut header = vec!["radius".to_string()];
    header.extend(b.curves.probs.iter().map(|&p| prob_label(p)));
    w.write_record(&header)?;
    for (row, &radius) in b.curves.rows.iter().zip(&b.curves.radii) {
        let mut rec = vec![radius.to_string()];
        rec.extend(row.iter().map(|&v| cell(v)));
        w.write_record(&rec)?;
    }
    finish_csv(w)
}

fn subset_csv(b: &ReportBundle, s: &SubsetTable) -> Result<Vec<u8>> {
    let mut w = fingerprinted_csv(&b.fingerprint);
    let mut header = vec!["radius".to_string(), "n".to_string()];
    header.extend(s.probs.iter().map(|&p| prob_label(p)));
    w.write_record(&header)?;
    for (row, &radius) in s.quantiles.iter().zip(&s.radii) {
        let mut rec = vec![radius.to_string(), s.n.to_string()];
        rec.extend(row.iter().map(|&v| cell(v)));
        w.write_record(&rec)?;
    }
    finish_csv(w)
}

fn deserts_geojson(b: &ReportBundle) -> Result<Vec<u8>> {
    let headline_cols: Vec<usize> = b
        .per_radius
        .iter()
        .map(|ra| {
            radius_index(&b.config.radius_schedule, ra.radius)
                .ok_or(Error::RadiusNotInSchedule(ra.radius))
        })
        .collect::<Result<Vec<usize>>>()?;

    let mut features = Vec::with_capacity(b.tracts.len());
    for (i, t) in b.tracts.iter().enumerate() {
        let mut props = serde_json::Map::new();
        props.insert("geoid".into(), json!(t.geoid));
        props.insert("segment".into(), json!(b.seg.decile_by_tract[i]));
        props.insert("deprivation".into(), json!(t.deprivation));
        props.insert("log_pop_density".into(), json!(b.log_densities[i].value));
        for (ra, &col) in b.per_radius.iter().zip(&headline_cols) {
            let label = radius_label(ra.radius);
            props.insert(
                format!("density_{label}mi"),
                json!(b.profiles[i].densities[col]),
            );
            props.insert(
                format!("adjusted_{label}mi"),
                match ra.adjusted.values[i] {
                    Some(v) => json!(v),
                    None => Value::Null,
                },
            );
            props.insert(format!("desert_{label}mi"), json!(ra.labels.is_desert[i]));
        }
        features.push(json!({
            "type": "Feature",
            // GeoJSON positions are [longitude, latitude]
            "geometry": { "type": "Point", "coordinates": [t.lon, t.lat] },
            "properties": Value::Object(props),
        }));
    }
    let doc = json!({
        "type": "FeatureCollection",
        "fingerprint": b.fingerprint,
        "features": features,
    });
    let mut out = serde_json::to_vec(&doc).map_err(|e| Error::Config(format!("geojson: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

fn markdown_report(b: &ReportBundle) -> String {
    let mut md = String::new();
    md.push_str("# Bank branch density report\n\n");
    md.push_str(&format!("fingerprint: `{}`\n\n", b.fingerprint));

    md.push_str("## Inputs\n\n");
    md.push_str(&format!(
        "- banks: {} ({} rows dropped)\n",
        b.n_banks, b.dropped_banks
    ));
    md.push_str(&format!(
        "- tracts: {} ({} rows dropped)\n",
        b.tracts.len(),
        b.dropped_tracts
    ));
    let sched = &b.config.radius_schedule;
    md.push_str(&format!(
        "- radius schedule: {} steps from {} to {} miles\n",
        sched.len(),
        radius_label(sched[0]),
        radius_label(*sched.last().unwrap())
    ));
    md.push_str(&format!(
        "- segments: {} bins of log population density\n",
        b.seg.k
    ));
    md.push_str(&format!(
        "- desert fraction: {} per segment, significance level {}\n\n",
        b.config.desert_fraction, b.config.significance_level
    ));

    md.push_str("## Log-density segments\n\n");
    md.push_str("| segment | size | cum % tracts | cum % area | cum % population | log density |\n");
    md.push_str("|--:|--:|--:|--:|--:|:--|\n");
    for (d, s) in b.seg.bin_stats.iter().enumerate() {
        md.push_str(&format!(
            "| {} | {} | {:.1} | {:.1} | {:.1} | {:.2} to {:.2} |\n",
            d + 1,
            s.size,
            s.cum_pct_tracts,
            s.cum_pct_area,
            s.cum_pct_population,
            s.log_density_lo,
            s.log_density_hi
        ));
    }
    md.push('\n');

    md.push_str("## Lower-tail density thresholds (banks per sq mi, all tracts)\n\n");
    md.push_str("| radius (mi) | % zero |");
    for &p in &b.thresholds.probs {
        md.push_str(&format!(" {} |", prob_label(p)));
    }
    md.push('\n');
    md.push_str("|--:|--:|");
    for _ in &b.thresholds.probs {
        md.push_str("--:|");
    }
    md.push('\n');
    for (col, &r) in b.thresholds.radii.iter().enumerate() {
        let c = &b.thresholds.all[col];
        md.push_str(&format!("| {} | {:.1} |", radius_label(r), c.pct_zero));
        for &q in &c.quantiles {
            md.push_str(&format!(" {q} |"));
        }
        md.push('\n');
    }
    md.push('\n');

    md.push_str("## Deserts and deprivation\n\n");
    for ra in &b.per_radius {
        let n_deserts: usize = ra.labels.desert_by_decile.iter().map(Vec::len).sum();
        let significant: Vec<String> = ra
            .comparison
            .iter()
            .filter(|row| row.significant && row.scope != Scope::All)
            .map(|row| row.scope.to_string())
            .collect();
        let all_sig = ra
            .comparison
            .iter()
            .any(|row| row.scope == Scope::All && row.significant);
        md.push_str(&format!(
            "- {} mi: {} desert tracts; deprivation significantly higher {} (segments: {})\n",
            radius_label(ra.radius),
            n_deserts,
            if all_sig { "overall" } else { "in no overall test" },
            if significant.is_empty() {
                "none".to_string()
            } else {
                significant.join(", ")
            }
        ));
    }
    md.push('\n');

    if let Some(rows) = &b.type_summary {
        md.push_str("## Area types\n\n");
        md.push_str("| type | segments | radius (mi) | density range | implied banks |\n");
        md.push_str("|:--|:--|--:|:--|:--|\n");
        for r in rows {
            if r.note.is_some() {
                md.push_str(&format!(
                    "| {} | {}-{} | {} | NA | NA |\n",
                    r.label,
                    r.decile_lo,
                    r.decile_hi,
                    radius_label(r.radius)
                ));
            } else {
                md.push_str(&format!(
                    "| {} | {}-{} | {} | {:.3} to {:.3} | {} to {} |\n",
                    r.label,
                    r.decile_lo,
                    r.decile_hi,
                    radius_label(r.radius),
                    r.density_min,
                    r.density_max,
                    r.banks_min,
                    r.banks_max
                ));
            }
        }
        md.push('\n');
    }

    md
}

/// Write every output file into `dir`, returning the paths written.
pub fn write_outputs(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    emit("summary.csv", summary_csv(bundle)?)?;
    emit("segments.csv", segments_csv(bundle)?)?;
    emit("thresholds.csv", thresholds_csv(bundle)?)?;
    emit("comparison.csv", comparison_csv(bundle)?)?;
    emit("type_summary.csv", type_summary_csv(bundle)?)?;
    emit("curves.csv", curves_csv(bundle)?)?;
    emit("deserts.geojson", deserts_geojson(bundle)?)?;
    emit("report.md", markdown_report(bundle).into_bytes())?;
    if let Some(s) = &bundle.subset {
        emit("subset.csv", subset_csv(bundle, s)?)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, LandscapeSpec};

    fn small_landscape(seed: u64) -> AnalysisData {
        let l = generate(&LandscapeSpec {
            seed,
            lat_min: 39.0,
            lat_max: 40.0,
            lon_min: -90.0,
            lon_max: -89.0,
            n_clusters: 8,
            n_tracts: 300,
            ..LandscapeSpec::default()
        })
        .unwrap();
        AnalysisData {
            banks: l.banks,
            tracts: l.tracts,
            dropped_banks: 0,
            dropped_tracts: 0,
            digests: vec![("banks".into(), "aa".into()), ("tracts".into(), "bb".into())],
            subset_geoids: None,
        }
    }

    fn settings() -> Settings {
        Settings::default()
    }

    #[test]
    fn bundle_has_consistent_shapes() {
        let b = analyze(&settings(), small_landscape(3)).unwrap();
        assert_eq!(b.tracts.len(), 300);
        assert_eq!(b.profiles.len(), 300);
        assert_eq!(b.seg.decile_by_tract.len(), 300);
        assert_eq!(b.per_radius.len(), b.config.headline_radii.len());
        for ra in &b.per_radius {
            assert_eq!(ra.adjusted.values.len(), 300);
            assert_eq!(ra.labels.is_desert.len(), 300);
            assert_eq!(ra.comparison.len(), b.seg.k + 1);
        }
        assert_eq!(b.curves.radii.len(), b.config.radius_schedule.len());
        assert_eq!(b.curves.probs, vec![0.05, 0.10, 0.5]);
        assert_eq!(b.fingerprint.len(), 64);
    }

    #[test]
    fn all_output_files_carry_the_fingerprint() {
        let b = analyze(&settings(), small_landscape(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = write_outputs(&b, dir.path()).unwrap();
        let names: Vec<&str> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap())
            .collect();
        assert_eq!(
            names,
            vec![
                "summary.csv",
                "segments.csv",
                "thresholds.csv",
                "comparison.csv",
                "type_summary.csv",
                "curves.csv",
                "deserts.geojson",
                "report.md",
            ]
        );
        for path in &written {
            let text = fs::read_to_string(path).unwrap();
            if path.extension().unwrap() == "csv" {
                assert!(
                    text.starts_with(&format!("# fingerprint={}\n", b.fingerprint)),
                    "{path:?}"
                );
            } else {
                assert!(text.contains(&b.fingerprint), "{path:?}");
            }
        }
    }

    #[test]
    fn outputs_are_byte_identical_across_runs() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = analyze(&settings(), small_landscape(5)).unwrap();
        let b = analyze(&settings(), small_landscape(5)).unwrap();
        let written_a = write_outputs(&a, dir_a.path()).unwrap();
        let written_b = write_outputs(&b, dir_b.path()).unwrap();
        for (pa, pb) in written_a.iter().zip(&written_b) {
            let ba = fs::read(pa).unwrap();
            let bb = fs::read(pb).unwrap();
            assert_eq!(ba, bb, "{pa:?} differs");
        }
    }

    #[test]
    fn fingerprint_tracks_config_and_inputs() {
        let base = run_fingerprint(&settings(), &[("banks".into(), "aa".into())]);
        let same = run_fingerprint(&settings(), &[("banks".into(), "aa".into())]);
        assert_eq!(base, same);
        let other_digest = run_fingerprint(&settings(), &[("banks".into(), "ab".into())]);
        assert_ne!(base, other_digest);
        let mut tweaked = settings();
        tweaked.run.desert_fraction = 0.06;
        let other_cfg = run_fingerprint(&tweaked, &[("banks".into(), "aa".into())]);
        assert_ne!(base, other_cfg);
    }

    #[test]
    fn geojson_is_valid_and_puts_longitude_first() {
        let b = analyze(&settings(), small_landscape(6)).unwrap();
        let doc: Value = serde_json::from_slice(&deserts_geojson(&b).unwrap()).unwrap();
        assert_eq!(doc["type"], "FeatureCollection");
        assert_eq!(doc["fingerprint"], json!(b.fingerprint));
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 300);
        let f = &features[0];
        assert_eq!(f["geometry"]["type"], "Point");
        let coords = f["geometry"]["coordinates"].as_array().unwrap();
        assert_eq!(coords[0].as_f64().unwrap(), b.tracts[0].lon);
        assert_eq!(coords[1].as_f64().unwrap(), b.tracts[0].lat);
        let props = f["properties"].as_object().unwrap();
        assert_eq!(props["geoid"], json!(b.tracts[0].geoid));
        for ra in &b.per_radius {
            let label = radius_label(ra.radius);
            assert!(props.contains_key(&format!("density_{label}mi")));
            assert!(props.contains_key(&format!("adjusted_{label}mi")));
            assert!(props.contains_key(&format!("desert_{label}mi")));
        }
        // desert share over all features matches the labeling
        for ra in &b.per_radius {
            let key = format!("desert_{}mi", radius_label(ra.radius));
            let marked = features
                .iter()
                .filter(|f| f["properties"][&key] == json!(true))
                .count();
            let want: usize = ra.labels.desert_by_decile.iter().map(Vec::len).sum();
            assert_eq!(marked, want);
        }
    }

    #[test]
    fn csv_numbers_round_trip() {
        let b = analyze(&settings(), small_landscape(7)).unwrap();
        let bytes = thresholds_csv(&b).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        lines.next(); // fingerprint comment
        let body = lines.collect::<Vec<_>>().join("\n");
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let headers = rdr.headers().unwrap().clone();
        let pct_col = headers.iter().position(|h| h == "pct_zero").unwrap();
        let scope_col = headers.iter().position(|h| h == "scope").unwrap();
        let radius_col = headers.iter().position(|h| h == "radius").unwrap();
        let mut seen_all = 0;
        for rec in rdr.records() {
            let rec = rec.unwrap();
            if &rec[scope_col] == "all" {
                let radius: f64 = rec[radius_col].parse().unwrap();
                let col = b
                    .thresholds
                    .radii
                    .iter()
                    .position(|&r| r == radius)
                    .unwrap();
                let got: f64 = rec[pct_col].parse().unwrap();
                // shortest round-trip printing means exact recovery
                assert_eq!(got, b.thresholds.all[col].pct_zero);
                seen_all += 1;
            }
        }
        assert_eq!(seen_all, b.thresholds.radii.len());
    }

    #[test]
    fn bankless_run_reports_total_absence() {
        let mut data = small_landscape(8);
        data.banks.clear();
        let b = analyze(&settings(), data).unwrap();
        for c in &b.thresholds.all {
            assert_eq!(c.pct_zero, 100.0);
            assert!(c.quantiles.iter().all(|&q| q == 0.0));
        }
        // density is identically zero, so every residual is exactly zero
        for ra in &b.per_radius {
            for v in &ra.adjusted.values {
                assert_eq!(*v, Some(0.0));
            }
        }
        let max_density = b
            .summary
            .rows
            .iter()
            .find(|(name, _)| name == "max")
            .map(|(_, cells)| cells[..cells.len() - 1].to_vec())
            .unwrap();
        assert!(max_density.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subset_table_written_when_requested() {
        let mut data = small_landscape(9);
        data.subset_geoids = Some(
            data.tracts
                .iter()
                .take(25)
                .map(|t| t.geoid.clone())
                .collect(),
        );
        let b = analyze(&settings(), data).unwrap();
        let s = b.subset.as_ref().unwrap();
        assert_eq!(s.n, 25);
        assert_eq!(s.radii, SUBSET_RADII.to_vec());
        let dir = tempfile::tempdir().unwrap();
        let written = write_outputs(&b, dir.path()).unwrap();
        assert!(written.iter().any(|p| p.ends_with("subset.csv")));
    }

    #[test]
    fn markdown_mentions_every_segment_and_radius() {
        let b = analyze(&settings(), small_landscape(10)).unwrap();
        let md = markdown_report(&b);
        for d in 1..=b.seg.k {
            assert!(md.contains(&format!("| {d} |")), "segment {d}");
        }
        for ra in &b.per_radius {
            assert!(md.contains(&format!("- {} mi:", radius_label(ra.radius))));
        }
        assert!(md.contains("Area types"));
    }
}
