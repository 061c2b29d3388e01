//! Great-circle distance, the uniform grid index, and radial counting.
//!
//! The index is a lat/lon grid in degrees. Cells are sized so that the
//! largest supported query radius spans at most one cell of latitude
//! (`cell_size_deg >= max_radius / 69`), so a query only ever inspects the
//! 3-row band around its center; the column span widens by `1 / cos(lat)`
//! to match longitude convergence. Candidates from those cells are filtered
//! by exact haversine distance, so grid geometry can only cost time, never
//! correctness.
//!
//! A multi-radius query gathers every distance within the largest radius
//! once, sorts, and resolves each radius by binary search. Points exactly
//! on a radius count as inside (`distance <= r`).

use std::collections::HashMap;

use rayon::prelude::*;

use crate::ingest::{BankPoint, TractRecord};

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

/// Conservative miles per degree of latitude, used only to size grid cells
/// and bounding spans. The true figure is ~69.09; using 69 keeps every
/// reach estimate slightly generous.
pub const MILES_PER_LAT_DEG: f64 = 69.0;

/// Great-circle distance in miles between two (lat, lon) pairs in degrees.
pub fn haversine_miles(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let dlat = (lat2 - lat1).to_radians();
    let dlon = (lon2 - lon1).to_radians();
    let a = (0.5 * dlat).sin().powi(2)
        + lat1.to_radians().cos() * lat2.to_radians().cos() * (0.5 * dlon).sin().powi(2);
    // rounding can push `a` a hair past 1 for near-antipodal pairs
    2.0 * EARTH_RADIUS_MILES * a.sqrt().min(1.0).asin()
}

/// Area of a circle of radius `r` miles, in square miles.
pub fn circle_area_sq_miles(r: f64) -> f64 {
    std::f64::consts::PI * r * r
}

/// Uniform grid index over bank points.
pub struct GeoIndex {
    points: Vec<(f64, f64)>,
    cell_size_deg: f64,
    max_radius_miles: f64,
    cells: HashMap<(i32, i32), Vec<u32>>,
}

impl GeoIndex {
    /// Build an index able to answer queries up to `max_radius_miles`.
    pub fn build(points: &[BankPoint], max_radius_miles: f64) -> GeoIndex {
        assert!(
            max_radius_miles > 0.0 && max_radius_miles.is_finite(),
            "max query radius must be positive"
        );
        let cell_size_deg = max_radius_miles / MILES_PER_LAT_DEG;
        let mut cells: HashMap<(i32, i32), Vec<u32>> = HashMap::new();
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.lat, p.lon)).collect();
        for (i, &(lat, lon)) in pts.iter().enumerate() {
            let key = cell_key(lat, lon, cell_size_deg);
            cells.entry(key).or_default().push(i as u32);
        }
        GeoIndex {
            points: pts,
            cell_size_deg,
            max_radius_miles,
            cells,
        }
    }

    /// Number of indexed points.
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Largest query radius this index was built for.
    pub fn max_radius_miles(&self) -> f64 {
        self.max_radius_miles
    }

    /// Sorted distances (miles) of every indexed point within `radius` of
    /// the center.
    pub fn distances_within(&self, lat: f64, lon: f64, radius: f64) -> Vec<f64> {
        assert!(
            radius <= self.max_radius_miles + 1e-9,
            "query radius {radius} exceeds index limit {}",
            self.max_radius_miles
        );
        let s = self.cell_size_deg;
        let lat_reach_deg = radius / MILES_PER_LAT_DEG;
        // widest longitude convergence over the latitude band the circle
        // can touch; ingest caps |lat| at 72 so the cosine stays sane
        let worst_lat = (lat.abs() + lat_reach_deg).min(89.0);
        let lon_reach_deg = lat_reach_deg / worst_lat.to_radians().cos();
        let row_span = (lat_reach_deg / s).ceil() as i32;
        let col_span = ((lon_reach_deg / s).ceil() as i32).min((360.0 / s).ceil() as i32);

        let (row0, col0) = cell_key(lat, lon, s);
        let mut dists = Vec::new();
        for row in (row0 - row_span)..=(row0 + row_span) {
            for col in (col0 - col_span)..=(col0 + col_span) {
                if let Some(bucket) = self.cells.get(&(row, col)) {
                    for &i in bucket {
                        let (plat, plon) = self.points[i as usize];
                        let d = haversine_miles(lat, lon, plat, plon);
                        if d <= radius {
                            dists.push(d);
                        }
                    }
                }
            }
        }
        dists.sort_unstable_by(f64::total_cmp);
        dists
    }

    /// Counts of indexed points within each radius of an ascending
    /// schedule. Boundary is inclusive: a point at exactly `r` counts.
    pub fn count_within(&self, lat: f64, lon: f64, radii: &[f64]) -> Vec<u32> {
        debug_assert!(
            radii.windows(2).all(|w| w[0] < w[1]),
            "radius schedule must be strictly ascending"
        );
        let Some(&r_max) = radii.last() else {
            return Vec::new();
        };
        let dists = self.distances_within(lat, lon, r_max);
        radii
            .iter()
            .map(|&r| dists.partition_point(|&d| d <= r) as u32)
            .collect()
    }
}

fn cell_key(lat: f64, lon: f64, cell_size_deg: f64) -> (i32, i32) {
    (
        (lat / cell_size_deg).floor() as i32,
        (lon / cell_size_deg).floor() as i32,
    )
}

/// Bank counts around one tract centroid, one entry per schedule radius.
#[derive(Debug, Clone, PartialEq)]
pub struct CountProfile {
    pub geoid: String,
    pub counts: Vec<u32>,
}

/// Bank densities (banks per square mile) around one tract centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub geoid: String,
    pub densities: Vec<f64>,
}

/// Convert a count profile to densities: `count / (pi r^2)` at each radius.
pub fn density_profile(profile: &CountProfile, radii: &[f64]) -> DensityProfile {
    assert_eq!(
        profile.counts.len(),
        radii.len(),
        "count profile does not match the radius schedule"
    );
    DensityProfile {
        geoid: profile.geoid.clone(),
        densities: profile
            .counts
            .iter()
            .zip(radii)
            .map(|(&c, &r)| c as f64 / circle_area_sq_miles(r))
            .collect(),
    }
}

/// Count profiles for every tract centroid, in tract order. Queries run in
/// parallel; the output is position-for-position identical regardless of
/// thread count.
pub fn profile_tracts(
    index: &GeoIndex,
    tracts: &[TractRecord],
    radii: &[f64],
) -> Vec<CountProfile> {
    tracts
        .par_iter()
        .map(|t| CountProfile {
            geoid: t.geoid.clone(),
            counts: index.count_within(t.lat, t.lon, radii),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn bank(id: &str, lat: f64, lon: f64) -> BankPoint {
        BankPoint {
            id: id.into(),
            lat,
            lon,
        }
    }

    fn quarter_mile_schedule() -> Vec<f64> {
        (1..=80).map(|i| i as f64 * 0.25).collect()
    }

    /// Naive all-pairs counting, the independent oracle for the index.
    fn brute_counts(
        banks: &[BankPoint],
        lat: f64,
        lon: f64,
        radii: &[f64],
    ) -> Vec<u32> {
        radii
            .iter()
            .map(|&r| {
                banks
                    .iter()
                    .filter(|b| haversine_miles(lat, lon, b.lat, b.lon) <= r)
                    .count() as u32
            })
            .collect()
    }

    fn seeded_banks(rng: &mut ChaCha8Rng, n: usize, bbox: (f64, f64, f64, f64)) -> Vec<BankPoint> {
        (0..n)
            .map(|i| {
                bank(
                    &format!("b{i}"),
                    rng.random_range(bbox.0..bbox.1),
                    rng.random_range(bbox.2..bbox.3),
                )
            })
            .collect()
    }

    // ── haversine ──

    #[test]
    fn distance_to_self_is_zero() {
        assert_eq!(haversine_miles(41.88, -87.63, 41.88, -87.63), 0.0);
    }

    #[test]
    fn distance_is_symmetric() {
        let d1 = haversine_miles(41.88, -87.63, 40.71, -74.0);
        let d2 = haversine_miles(40.71, -74.0, 41.88, -87.63);
        assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn one_degree_of_latitude() {
        // closed form: R * pi / 180
        let want = EARTH_RADIUS_MILES * std::f64::consts::PI / 180.0;
        let got = haversine_miles(0.0, 0.0, 1.0, 0.0);
        assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
        assert!((got - 69.09).abs() < 0.005);
    }

    #[test]
    fn antipodal_points_on_equator() {
        // closed form: half the circumference, pi * R
        let want = std::f64::consts::PI * EARTH_RADIUS_MILES;
        let got = haversine_miles(0.0, 0.0, 0.0, 180.0);
        assert!((got - want).abs() < 1e-6, "got {got}, want {want}");
        assert!((got - 12436.8).abs() < 0.05);
    }

    // ── index ──

    #[test]
    fn empty_index_counts_zero_everywhere() {
        let idx = GeoIndex::build(&[], 20.0);
        assert_eq!(idx.point_count(), 0);
        let counts = idx.count_within(41.0, -87.0, &quarter_mile_schedule());
        assert!(counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn whole_domain_query_recovers_every_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let banks = seeded_banks(&mut rng, 88_000, (30.0, 40.0, -100.0, -90.0));
        let idx = GeoIndex::build(&banks, 1000.0);
        let counts = idx.count_within(35.0, -95.0, &[1000.0]);
        assert_eq!(counts, vec![88_000]);
    }

    #[test]
    fn boundary_point_is_inclusive() {
        // place one point east of the center and query at exactly its distance
        let center = (41.0, -87.0);
        let p = bank("p", 41.0, -87.0 + 0.03);
        let d = haversine_miles(center.0, center.1, p.lat, p.lon);
        let idx = GeoIndex::build(&[p], 5.0);
        let counts = idx.count_within(center.0, center.1, &[d / 2.0, d, 5.0]);
        assert_eq!(counts, vec![0, 1, 1]);
    }

    #[test]
    fn straddling_a_cell_boundary_loses_nothing() {
        // 20-mile cells are ~0.29 degrees; put points just either side of a
        // boundary and the center right on it
        let s = 20.0 / MILES_PER_LAT_DEG;
        let banks = vec![
            bank("w", 41.0, s * 10.0 - 1e-4),
            bank("e", 41.0, s * 10.0 + 1e-4),
        ];
        let idx = GeoIndex::build(&banks, 20.0);
        let counts = idx.count_within(41.0, s * 10.0, &[1.0]);
        assert_eq!(counts, vec![2]);
    }

    #[test]
    fn matches_brute_force_on_seeded_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let banks = seeded_banks(&mut rng, 2000, (38.0, 42.0, -90.0, -84.0));
        let idx = GeoIndex::build(&banks, 20.0);
        let schedule = quarter_mile_schedule();
        for _ in 0..100 {
            let lat = rng.random_range(38.0..42.0);
            let lon = rng.random_range(-90.0..-84.0);
            let got = idx.count_within(lat, lon, &schedule);
            let want = brute_counts(&banks, lat, lon, &schedule);
            assert_eq!(got, want, "center ({lat}, {lon})");
        }
    }

    #[test]
    fn high_latitude_convergence_still_exact() {
        // near the 72-degree cap the column span has to widen; check against
        // brute force there
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let banks = seeded_banks(&mut rng, 1500, (68.0, 71.9, -160.0, -150.0));
        let idx = GeoIndex::build(&banks, 20.0);
        let schedule = quarter_mile_schedule();
        for _ in 0..50 {
            let lat = rng.random_range(68.0..71.9);
            let lon = rng.random_range(-160.0..-150.0);
            assert_eq!(
                idx.count_within(lat, lon, &schedule),
                brute_counts(&banks, lat, lon, &schedule)
            );
        }
    }

    // ── densities ──

    #[test]
    fn twenty_banks_in_two_miles() {
        let cp = CountProfile {
            geoid: "t".into(),
            counts: vec![20],
        };
        let dp = density_profile(&cp, &[2.0]);
        assert!((dp.densities[0] - 1.59).abs() < 0.005, "{}", dp.densities[0]);
    }

    #[test]
    // the targets are published reference values, not stand-ins for pi
    #[allow(clippy::approx_constant)]
    fn circle_areas_at_headline_radii() {
        let want = [3.14, 12.57, 78.54, 314.16, 1256.64];
        for (r, w) in [1.0, 2.0, 5.0, 10.0, 20.0].iter().zip(want) {
            assert!(
                (circle_area_sq_miles(*r) - w).abs() < 0.005,
                "radius {r}"
            );
        }
    }

    #[test]
    fn zero_counts_give_zero_density() {
        let cp = CountProfile {
            geoid: "t".into(),
            counts: vec![0, 0, 0],
        };
        let dp = density_profile(&cp, &[1.0, 2.0, 5.0]);
        assert_eq!(dp.densities, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn fixed_count_density_scales_inverse_square() {
        let cp = CountProfile {
            geoid: "t".into(),
            counts: vec![5, 5],
        };
        let dp = density_profile(&cp, &[5.0, 10.0]);
        let ratio = dp.densities[0] / dp.densities[1];
        assert!((ratio - 4.0).abs() < 1e-12, "ratio {ratio}");
    }

    #[test]
    fn profiles_follow_tract_order() {
        let banks = vec![bank("b", 41.0, -87.0)];
        let idx = GeoIndex::build(&banks, 20.0);
        let tracts = vec![
            TractRecord {
                geoid: "t2".into(),
                lat: 41.0,
                lon: -87.0,
                population: 10.0,
                land_area_sqmi: 1.0,
                deprivation: 0.0,
            },
            TractRecord {
                geoid: "t1".into(),
                lat: 45.0,
                lon: -95.0,
                population: 10.0,
                land_area_sqmi: 1.0,
                deprivation: 0.0,
            },
        ];
        let profiles = profile_tracts(&idx, &tracts, &[2.0, 20.0]);
        assert_eq!(profiles[0].geoid, "t2");
        assert_eq!(profiles[0].counts, vec![1, 1]);
        assert_eq!(profiles[1].geoid, "t1");
        assert_eq!(profiles[1].counts, vec![0, 0]);
    }

    // ── properties ──

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn counts_are_nondecreasing_in_radius(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(0..300usize);
            let banks = seeded_banks(&mut rng, n, (40.0, 41.0, -89.0, -88.0));
            let idx = GeoIndex::build(&banks, 20.0);
            let lat = rng.random_range(40.0..41.0);
            let lon = rng.random_range(-89.0..-88.0);
            let counts = idx.count_within(lat, lon, &quarter_mile_schedule());
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn counts_match_brute_force(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7_000_000));
            let n = rng.random_range(0..250usize);
            let banks = seeded_banks(&mut rng, n, (35.0, 37.0, -110.0, -107.0));
            let idx = GeoIndex::build(&banks, 20.0);
            let radii = [0.25, 1.0, 2.0, 5.0, 12.75, 20.0];
            for _ in 0..10 {
                let lat = rng.random_range(35.0..37.0);
                let lon = rng.random_range(-110.0..-107.0);
                prop_assert_eq!(
                    idx.count_within(lat, lon, &radii),
                    brute_counts(&banks, lat, lon, &radii)
                );
            }
        }

        #[test]
        fn counts_are_translation_invariant_in_longitude(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(9_000_000));
            let n = rng.random_range(1..200usize);
            let banks = seeded_banks(&mut rng, n, (44.0, 45.5, -93.0, -91.5));
            let shift = 41.25;
            let shifted: Vec<BankPoint> = banks
                .iter()
                .map(|b| bank(&b.id, b.lat, b.lon + shift))
                .collect();
            let idx_a = GeoIndex::build(&banks, 20.0);
            let idx_b = GeoIndex::build(&shifted, 20.0);
            let radii = [0.5, 3.0, 20.0];
            for _ in 0..5 {
                let lat = rng.random_range(44.0..45.5);
                let lon = rng.random_range(-93.0..-91.5);
                prop_assert_eq!(
                    idx_a.count_within(lat, lon, &radii),
                    idx_b.count_within(lat, lon + shift, &radii)
                );
            }
        }
    }
}
