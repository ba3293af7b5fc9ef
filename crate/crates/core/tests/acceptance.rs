//! Acceptance suite. Each criterion is its own test and prints one
//! `[PASS]` / `[FAIL]` line; run with `--nocapture` to see them.

use std::time::{Duration, Instant};

use grf_risk::eval::{confusion, metrics, sweep_localization, ConfusionMatrix};
use grf_risk::geo::{
    buffer_aggregate, make_grid, AggregateMode, BBox, GeoLayer, GeoPoint, IdwInterpolator,
};
use grf_risk::grf::fit_grf;
use grf_risk::pipeline::{
    run_all, synth_regions, write_city, CityParams, PipelineConfig, RegionsParams,
};
use grf_risk::preprocess::{
    interpolate, mann_whitney_u, select_features, smote_rows, vif, FeatureMatrix, FeatureStats,
    MwuMethod, SelectionThresholds, SeverityGroup, VIF_CAP,
};
use grf_risk::protocol::TrainProtocol;
use grf_risk::{Coord, ForestParams, GrfHyperParams, GrfModel, LabeledSample, SpatialIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2}: {name} ({detail})");
}

fn trained_model(seed: u64) -> (GrfModel, Vec<LabeledSample>) {
    let data = synth_regions(
        &RegionsParams {
            n: 300,
            ..Default::default()
        },
        seed,
    )
    .unwrap();
    let samples = data.table.samples();
    let hyper = GrfHyperParams::new(
        30,
        0.5,
        ForestParams {
            b_trees: 25,
            seed,
            ..Default::default()
        },
    );
    (fit_grf(&samples, &hyper, seed).unwrap(), samples)
}

fn random_queries(model: &GrfModel, n: usize, seed: u64) -> Vec<(Vec<f64>, Coord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = model.feature_count();
    (0..n)
        .map(|_| {
            let x = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let c = Coord::new(
                rng.random_range(-1500.0..11500.0),
                rng.random_range(-1500.0..1500.0),
            );
            (x, c)
        })
        .collect()
}

/// Lowest-index anchor at minimal distance, by linear scan.
fn brute_nearest(points: &[Coord], q: Coord) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.dist_sq(&q) < points[best].dist_sq(&q) {
            best = i;
        }
    }
    best
}

#[test]
fn c01_degenerate_weights_match_component_forests() {
    let t = Instant::now();
    let (model, _) = trained_model(11);
    let anchors: Vec<Coord> = model.anchors().collect();
    let queries = random_queries(&model, 500, 5);
    let mut mismatches = 0;
    for (x, c) in &queries {
        let global = model.global_forest.predict_proba(x).unwrap();
        let local = model.local_forests[brute_nearest(&anchors, *c)]
            .forest
            .predict_proba(x)
            .unwrap();
        let at0 = model.predict_with_weight(x, *c, 0.0).unwrap();
        let at1 = model.predict_with_weight(x, *c, 1.0).unwrap();
        if at0.to_bits() != global.to_bits() || at1.to_bits() != local.to_bits() {
            mismatches += 1;
        }
    }
    let elapsed = t.elapsed();
    let ok = mismatches == 0 && elapsed < Duration::from_secs(10);
    report(
        1,
        "a=0 equals global forest, a=1 equals nearest local forest, bitwise",
        ok,
        &format!("{mismatches} mismatches over 500 queries, {elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn c02_blend_is_affine_in_weight() {
    let (model, _) = trained_model(12);
    let mut worst = 0.0f64;
    for (x, c) in random_queries(&model, 100, 6) {
        let y0 = model.predict_with_weight(&x, c, 0.0).unwrap();
        let y1 = model.predict_with_weight(&x, c, 1.0).unwrap();
        for k in 1..=9 {
            let a = k as f64 / 10.0;
            let y = model.predict_with_weight(&x, c, a).unwrap();
            worst = worst.max((y - (a * y1 + (1.0 - a) * y0)).abs());
        }
    }
    let ok = worst <= 1e-12;
    report(
        2,
        "output(a) = a*output(1) + (1-a)*output(0)",
        ok,
        &format!("max deviation {worst:e}"),
    );
    assert!(ok);
}

#[test]
fn c03_interior_localization_optimum() {
    let t = Instant::now();
    let a_values = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let data = synth_regions(&RegionsParams::default(), seed).unwrap();
        let ones = data.table.labels.iter().filter(|&&l| l == 1).count();
        assert_eq!(data.table.len(), 600);
        assert_eq!(data.table.feature_names.len(), 10);
        assert_eq!(ones, 102);
        let hyper = GrfHyperParams::new(
            40,
            0.5,
            ForestParams {
                b_trees: 100,
                seed,
                ..Default::default()
            },
        );
        let sweep = sweep_localization(
            &data.table.samples(),
            &hyper,
            &a_values,
            seed,
            &TrainProtocol::default(),
        )
        .unwrap();
        let acc: Vec<f64> = sweep.rows.iter().map(|r| r.accuracy.unwrap()).collect();
        let best = acc.iter().copied().fold(f64::MIN, f64::max);
        let win = acc[1..4].contains(&best) && best > acc[0] && best > acc[4];
        wins += usize::from(win);
        lines.push(format!(
            "seed {seed}: {acc:.3?} {}",
            if win { "interior" } else { "edge" }
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    let elapsed = t.elapsed();
    let ok = wins >= 8 && elapsed < Duration::from_secs(300);
    report(
        3,
        "best accuracy strictly inside (0,1) in at least 8 of 10 seeds",
        ok,
        &format!("{wins}/10 seeds, {elapsed:.1?}"),
    );
    assert!(ok);
}

#[test]
fn c04_smote_rows_lie_on_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let minority: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..6).map(|_| rng.random_range(-50.0..50.0)).collect())
        .collect();
    let rows = smote_rows(&minority, 5, 10_000, 99).unwrap();
    let again = smote_rows(&minority, 5, 10_000, 99).unwrap();
    let mut violations = 0;
    for r in &rows {
        let (x, xn) = (&minority[r.base], &minority[r.neighbor]);
        for j in 0..x.len() {
            let (lo, hi) = (x[j].min(xn[j]), x[j].max(xn[j]));
            if !(lo <= r.values[j] && r.values[j] <= hi) {
                violations += 1;
            }
        }
    }
    let mut endpoint_errors = 0;
    for i in 0..minority.len() {
        let j = (i + 1) % minority.len();
        if interpolate(&minority[i], &minority[j], 0.0) != minority[i] {
            endpoint_errors += 1;
        }
        if interpolate(&minority[i], &minority[j], 1.0) != minority[j] {
            endpoint_errors += 1;
        }
    }
    let ok = rows.len() == 10_000 && violations == 0 && endpoint_errors == 0 && rows == again;
    report(
        4,
        "10,000 synthetic rows inside their segments, exact endpoints, seeded",
        ok,
        &format!("{violations} bound violations, {endpoint_errors} endpoint errors"),
    );
    assert!(ok);
}

fn binom(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Two-sided exact p by enumerating which pooled ranks belong to sample A.
fn enumerated_p(na: usize, nb: usize, u_obs: f64) -> f64 {
    let n = na + nb;
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        let u = (rank_sum - na * (na + 1) / 2) as f64;
        total += 1;
        if u <= u_obs {
            le += 1;
        }
        if u >= u_obs {
            ge += 1;
        }
    }
    assert_eq!(total, binom(n, na));
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

#[test]
fn c05_mann_whitney_exact_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut cases, mut worst) = (0, 0.0f64);
    for na in 1..10 {
        for nb in 1..=(10 - na) {
            for _ in 0..20 {
                let mut pool: Vec<f64> = (0..na + nb)
                    .map(|i| i as f64 + rng.random::<f64>() * 0.5)
                    .collect();
                pool.shuffle(&mut rng);
                let (a, b) = pool.split_at(na);
                let r = mann_whitney_u(a, b).unwrap();
                assert_eq!(r.method, MwuMethod::Exact);
                worst = worst.max((r.p_two_sided - enumerated_p(na, nb, r.u)).abs());
                cases += 1;
            }
        }
    }
    let same = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
    let p_same = mann_whitney_u(&same, &same).unwrap().p_two_sided;
    let ok = worst <= 1e-12 && p_same == 1.0;
    report(
        5,
        "exact MWU p equals full enumeration for n_a+n_b <= 10; identical samples give p=1",
        ok,
        &format!("{cases} cases, max |dp| {worst:e}, identical p {p_same}"),
    );
    assert!(ok);
}

/// VIF_j from the normal equations `[1 X_-j]' [1 X_-j] b = [1 X_-j]' x_j`,
/// solved by Gauss-Jordan elimination with partial pivoting.
fn normal_equations_vif(rows: &[Vec<f64>], j: usize) -> f64 {
    let n = rows.len();
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut d = vec![1.0];
            d.extend(
                r.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &v)| v),
            );
            d
        })
        .collect();
    let q = design[0].len();
    let mut m = vec![vec![0.0; q + 1]; q];
    for (d, r) in design.iter().zip(rows) {
        for a in 0..q {
            for b in 0..q {
                m[a][b] += d[a] * d[b];
            }
            m[a][q] += d[a] * r[j];
        }
    }
    for col in 0..q {
        let piv = (col..q)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..q {
            if r != col {
                let f = m[r][col];
                for c in 0..=q {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..q).map(|r| m[r][q]).collect();
    let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (d, r) in design.iter().zip(rows) {
        let fit: f64 = d.iter().zip(&beta).map(|(a, b)| a * b).sum();
        ss_res += (r[j] - fit).powi(2);
        ss_tot += (r[j] - mean).powi(2);
    }
    1.0 / (ss_res / ss_tot)
}

#[test]
fn c06_vif_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let base: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
                // mild correlation so VIFs are not all near 1
                (0..8).map(|k| base[k] + 0.6 * base[(k + 1) % 8]).collect()
            })
            .collect();
        let got = vif(&FeatureMatrix::unnamed(rows.clone()).unwrap()).unwrap();
        for (j, g) in got.iter().enumerate() {
            let want = normal_equations_vif(&rows, j);
            worst = worst.max((g - want).abs() / want);
        }
    }
    // Walsh columns: mean zero and mutually orthogonal.
    let walsh: Vec<Vec<f64>> = (0..256u32)
        .map(|i| {
            (0..8)
                .map(|k| {
                    if (i & (1 << k)).count_ones() % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect();
    let ortho = vif(&FeatureMatrix::unnamed(walsh).unwrap()).unwrap();
    let ortho_dev = ortho.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let dup: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let a: f64 = rng.random_range(0.0..1.0);
            vec![a, rng.random_range(0.0..1.0), a]
        })
        .collect();
    let dup_v = vif(&FeatureMatrix::unnamed(dup).unwrap()).unwrap();
    let ok = worst <= 1e-6 && ortho_dev <= 1e-9 && dup_v[0] == VIF_CAP && dup_v[2] == VIF_CAP;
    report(
        6,
        "VIF equals normal-equations oracle; orthogonal design 1; duplicate column capped",
        ok,
        &format!(
            "max rel err {worst:e}, orthogonal dev {ortho_dev:e}, duplicate {:e}",
            dup_v[0]
        ),
    );
    assert!(ok);
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[test]
fn c07_metric_identities_exhaustive() {
    let mut failures = 0;
    for tp in 0..=5u64 {
        for fp in 0..=5u64 {
            for tn in 0..=5u64 {
                for fn_ in 0..=5u64 {
                    let mut preds = Vec::new();
                    let mut labels = Vec::new();
                    for (count, p, l) in
                        [(tp, 0.9, 1u8), (fp, 0.5, 0), (tn, 0.1, 0), (fn_, 0.49, 1)]
                    {
                        preds.extend(std::iter::repeat_n(p, count as usize));
                        labels.extend(std::iter::repeat_n(l, count as usize));
                    }
                    let cm = if preds.is_empty() {
                        ConfusionMatrix::default()
                    } else {
                        confusion(&preds, &labels, 0.5).unwrap()
                    };
                    let m = metrics(&cm);
                    let expect_cm = ConfusionMatrix { tp, fp, tn, fn_ };
                    if cm != expect_cm
                        || m.recall != ratio(tp, tp + fn_)
                        || m.precision != ratio(tp, tp + fp)
                        || m.accuracy != ratio(tp + tn, tp + fp + tn + fn_)
                    {
                        failures += 1;
                    }
                }
            }
        }
    }
    let ok = failures == 0;
    report(
        7,
        "recall, precision, accuracy over all counts in [0,5]^4",
        ok,
        &format!("{failures} of 1296 wrong"),
    );
    assert!(ok);
}

#[test]
fn c08_spatial_operations_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts: Vec<Coord> = (0..10_000)
        .map(|_| Coord::new(rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0)))
        .collect();
    let features: Vec<GeoPoint> = pts
        .iter()
        .map(|c| GeoPoint {
            coord: *c,
            weight: rng.random_bool(0.8).then(|| rng.random_range(0.0..10.0)),
            category: None,
        })
        .collect();
    let layer = GeoLayer::new("pts", features.clone()).unwrap();
    let centers: Vec<Coord> = (0..300)
        .map(|_| {
            Coord::new(
                rng.random_range(-200.0..5200.0),
                rng.random_range(-200.0..5200.0),
            )
        })
        .collect();
    let radius = 400.0;
    let mut buffer_bad = 0;
    for mode in [
        AggregateMode::Count,
        AggregateMode::WeightSum,
        AggregateMode::WeightMean,
    ] {
        let got = buffer_aggregate(&layer, &centers, radius, mode).unwrap();
        for (c, g) in centers.iter().zip(&got) {
            let hits: Vec<&GeoPoint> = features
                .iter()
                .filter(|f| f.coord.dist(c) <= radius)
                .collect();
            let sum: f64 = hits.iter().map(|f| f.weight.unwrap_or(1.0)).sum();
            let want = match mode {
                AggregateMode::Count => hits.len() as f64,
                AggregateMode::WeightSum => sum,
                AggregateMode::WeightMean if hits.is_empty() => 0.0,
                AggregateMode::WeightMean => sum / hits.len() as f64,
            };
            if g.value != want || g.empty != hits.is_empty() {
                buffer_bad += 1;
            }
        }
    }
    let index = SpatialIndex::new(pts.clone());
    let mut knn_bad = 0;
    for (qi, q) in centers.iter().enumerate() {
        let k = [1, 5, 17, 64][qi % 4];
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| {
            pts[a]
                .dist_sq(q)
                .total_cmp(&pts[b].dist_sq(q))
                .then(a.cmp(&b))
        });
        if index.knn(*q, k).unwrap() != order[..k] {
            knn_bad += 1;
        }
    }
    let samples: Vec<(Coord, f64)> = pts[..2000]
        .iter()
        .map(|&c| (c, rng.random_range(0.0..1.0)))
        .collect();
    let idw = IdwInterpolator::new(&samples, 2.0, Some(12)).unwrap();
    let idw_bad = samples
        .iter()
        .filter(|(c, v)| idw.interpolate(*c).unwrap() != *v)
        .count();
    let mut grid_bad = 0;
    for _ in 0..100 {
        let (u0, v0) = (rng.random_range(-1e4..1e4), rng.random_range(-1e4..1e4));
        let (du, dv) = (rng.random_range(1.0..3000.0), rng.random_range(1.0..3000.0));
        let s = rng.random_range(10.0..400.0);
        let g = make_grid(&BBox::new(u0, v0, u0 + du, v0 + dv), s).unwrap();
        let want = ((du / s + 1.0).floor() * (dv / s + 1.0).floor()) as usize;
        if g.cells.len() != want {
            grid_bad += 1;
        }
    }
    let ok = buffer_bad == 0 && knn_bad == 0 && idw_bad == 0 && grid_bad == 0;
    report(
        8,
        "buffer, knn, IDW at samples and grid counts match direct computation",
        ok,
        &format!("buffer {buffer_bad}, knn {knn_bad}, idw {idw_bad}, grid {grid_bad} mismatches"),
    );
    assert!(ok);
}

/// Published feature rows: name, U, p, VIF, significant group, published selection mark.
const PUBLISHED_ROWS: [(&str, f64, f64, f64, &str, bool); 45] = [
    ("POI Sust", 17527.5, 0.41, 52.08, "", false),
    ("POI Edu", 17999.5, 0.27, 5.67, "", true),
    ("POI Trans", 17358.5, 0.47, 11.07, "", false),
    ("POI Fin", 17288.0, 0.49, 18.62, "", false),
    ("POI Health", 17403.5, 0.45, 7.46, "", true),
    ("POI EAC", 18092.0, 0.24, 10.03, "", true),
    ("POI Pub", 17723.0, 0.35, 16.32, "", false),
    ("POI Faci", 17288.5, 0.43, 6.49, "", true),
    ("POI Waste", 17728.0, 0.35, 6.96, "", true),
    ("POI Other", 19352.5, 0.04, 8.46, "high", true),
    ("Mean BFP", 17493.0, 0.42, 7.12, "", true),
    ("Shop Acc", 17533.0, 0.41, 17.21, "", false),
    ("Shop Admin", 17367.0, 0.47, 31.80, "", false),
    ("Shop AER", 17552.5, 0.40, 30.23, "", false),
    ("Shop Cert", 17648.0, 0.37, 38.56, "", false),
    ("Shop Const", 18016.5, 0.26, 27.22, "", false),
    ("Shop Fin", 17723.0, 0.35, 78.86, "", false),
    ("Shop Food", 18148.5, 0.23, 40.78, "", false),
    ("Shop Info", 17919.0, 0.29, 47.91, "", false),
    ("Shop Insu", 17780.5, 0.33, 32.92, "", false),
    ("Shop Manu", 17665.5, 0.37, 8.58, "", true),
    ("Shop PEH", 18168.0, 0.22, 10.36, "", false),
    ("Shop PST", 17786.5, 0.33, 376.38, "", false),
    ("Shop RERL", 18582.0, 0.13, 10.31, "high", true),
    ("Shop Retail", 17351.0, 0.47, 30.96, "", false),
    ("Shop Trans", 17917.5, 0.29, 12.46, "", false),
    ("Shop Util", 19014.0, 0.07, 4.63, "low", true),
    ("Shop Whole", 18334.5, 0.19, 15.54, "high", true),
    ("Shop Multi", 17407.0, 0.45, 54.54, "", false),
    ("Shop Other", 17633.5, 0.38, 349.26, "", false),
    ("LU Resident", 17733.5, 0.35, 8.11, "", true),
    ("LU MixRes", 18688.5, 0.12, 12.57, "high", true),
    ("LU Mixed", 18393.0, 0.17, 2.97, "low", true),
    ("LU CIE", 17604.0, 0.39, 1.78, "", true),
    ("LU PDR", 17750.5, 0.34, 4.69, "", true),
    ("LU Medi", 17947.0, 0.28, 1.70, "", true),
    ("LU Visit", 18286.0, 0.20, 4.96, "", true),
    ("LU MIPS", 17448.0, 0.44, 12.22, "", false),
    ("LU RetailEnt", 17905.0, 0.30, 7.16, "", true),
    ("LU Openspace", 18087.0, 0.25, 1.41, "", true),
    ("LU Vacant", 18548.5, 0.14, 2.40, "low", true),
    ("LU Other", 17838.5, 0.32, 1.42, "", true),
    ("Parking Meters", 17540.5, 0.41, 26.16, "", false),
    ("Intersections", 18758.0, 0.11, 13.56, "low", true),
    ("MTA Stops", 17632.0, 0.38, 14.79, "", true),
];

#[test]
fn c09_published_selection_rows_replay() {
    let stats: Vec<FeatureStats> = PUBLISHED_ROWS
        .iter()
        .map(|&(name, u, p, v, group, _)| FeatureStats {
            feature: name.to_string(),
            u_statistic: u,
            p_value: p,
            greater_in: SeverityGroup::parse(group).unwrap_or(SeverityGroup::None),
            vif: v,
        })
        .collect();
    let report_rows = select_features(&stats, &SelectionThresholds::default()).rows;
    let mismatched: Vec<String> = report_rows
        .iter()
        .zip(PUBLISHED_ROWS.iter())
        .filter(|(r, row)| r.selected != row.5)
        .map(|(r, row)| {
            format!(
                "{} p={} VIF={} published {} rule {}",
                r.feature, row.2, row.3, row.5, r.selected
            )
        })
        .collect();
    for m in &mismatched {
        println!("    mismatch: {m}");
    }
    let ok = mismatched.is_empty();
    report(
        9,
        "selection rule reproduces all 45 published selection marks",
        ok,
        &format!("{} of 45 rows differ", mismatched.len()),
    );
    assert!(ok, "published marks not reproduced: {mismatched:?}");
}

fn read_all(paths: &[std::path::PathBuf]) -> Vec<Vec<u8>> {
    paths.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn c10_pipeline_runs_are_byte_identical() {
    let params = CityParams::default();
    assert_eq!(params.n_events, 500);
    assert_eq!((params.b_trees, params.bandwidth_n), (100, 100));
    let mut outputs = Vec::new();
    let mut times = Vec::new();
    let mut n_features = 0;
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let files = write_city(dir.path(), &params, 2024).unwrap();
        let config = PipelineConfig::load(&files.config_path).unwrap();
        n_features = config.feature_columns().len();
        let t = Instant::now();
        let artifacts = run_all(&config).unwrap();
        times.push(t.elapsed());
        outputs.push(read_all(&artifacts.files));
    }
    let identical = outputs[0] == outputs[1];
    let slowest = times.iter().max().copied().unwrap();
    let ok = identical && slowest < Duration::from_secs(60) && n_features == 24;
    report(
        10,
        "two full runs with the same config and seed give identical bytes",
        ok,
        &format!(
            "{} artifacts identical: {identical}, {n_features} features, slowest run {slowest:.1?}",
            outputs[0].len()
        ),
    );
    assert!(ok);
}
