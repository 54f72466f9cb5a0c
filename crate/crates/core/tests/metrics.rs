use csf_core::metrics::*;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn nse_examples() {
    let y = [1.0, 2.0, 3.0];
    assert_eq!(nse(&y, &y).unwrap(), 1.0);
    assert!(close(nse(&y, &[2.0, 2.0, 2.0]).unwrap(), 0.0));
    assert!(close(nse(&y, &[1.0, 2.0, 4.0]).unwrap(), 0.5));
    assert_eq!(nse(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricError::ConstantObserved));
    assert_eq!(nse(&y, &[1.0]), Err(MetricError::LengthMismatch(3, 1)));
}

#[test]
fn kge_examples() {
    let y = [1.0, 2.0, 3.0];
    assert!(close(kge(&y, &y).unwrap(), 1.0));
    let p = kge_parts(&y, &[2.0, 4.0, 6.0], KgeVariability::CvRatio).unwrap();
    assert!(close(p.r, 1.0) && close(p.beta, 2.0) && close(p.gamma, 1.0));
    assert!(close(p.kge, 0.0));
    let shifted = kge_parts(&y, &[3.0, 4.0, 5.0], KgeVariability::CvRatio).unwrap();
    assert!(close(shifted.r, 1.0) && shifted.gamma < 1.0 && shifted.kge < 1.0);
    let s = kge_parts(&y, &[2.0, 4.0, 6.0], KgeVariability::StdRatio).unwrap();
    assert!(close(s.gamma, 2.0));
    assert_eq!(kge(&[-1.0, 1.0], &[1.0, 2.0]), Err(MetricError::ZeroMeanObserved));
}

#[test]
fn ve_examples() {
    let y = [1.0, 2.0, 3.0];
    assert_eq!(volumetric_efficiency(&y, &y).unwrap(), 1.0);
    assert!(close(volumetric_efficiency(&y, &[1.0, 2.0, 4.0]).unwrap(), 1.0 - 1.0 / 6.0));
    assert!(close(volumetric_efficiency(&y, &[2.0, 4.0, 6.0]).unwrap(), 0.0));
    assert_eq!(volumetric_efficiency(&[0.0, 0.0], &[1.0, 1.0]), Err(MetricError::ZeroVolume));
}

#[test]
fn rho_examples() {
    let y = [1.0, 2.0, 3.0];
    assert!(close(pearson_rho(&y, &[10.0, 13.0, 16.0]).unwrap(), 1.0));
    assert!(close(pearson_rho(&y, &[-1.0, -2.0, -3.0]).unwrap(), -1.0));
    assert!(close(pearson_rho(&y, &[1.0, 3.0, 2.0]).unwrap(), 0.5));
    assert_eq!(pearson_rho(&y, &[1.0, 1.0, 1.0]), Err(MetricError::ConstantSeries));
}

/// Independent neighbour enumeration: all pairwise distances sorted by
/// (distance, index), self excluded.
fn brute_alignment(z: &[f64], r: &[f64], k: usize) -> f64 {
    let n = z.len();
    let sets = |xs: &[f64], i: usize| {
        let mut d: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| ((xs[i] - xs[j]).abs(), j)).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d.iter().take(k).map(|p| p.1).collect::<Vec<_>>()
    };
    (0..n)
        .map(|i| {
            let (a, b) = (sets(z, i), sets(r, i));
            a.iter().filter(|j| b.contains(j)).count() as f64 / k as f64
        })
        .sum::<f64>()
        / n as f64
}

fn col(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

#[test]
fn knn_examples() {
    let r = [0.3, 1.7, -2.0, 5.5, 0.9];
    assert_eq!(knn_alignment(&col(&r), &r, 2).unwrap(), 1.0);

    // pairs {0,1},{2,3} in Z but {0,2},{1,3} in R
    assert_eq!(knn_alignment(&col(&[0.0, 1.0, 10.0, 11.0]), &[0.0, 10.0, 1.0, 11.0], 1).unwrap(), 0.0);

    let z = [0.0, 1.0, 2.0, 10.0];
    let r = [0.0, 1.0, 10.0, 2.0];
    let got = knn_alignment(&col(&z), &r, 2).unwrap();
    assert_eq!(got, brute_alignment(&z, &r, 2));
    assert_eq!(got, 0.5);

    assert_eq!(knn_alignment(&col(&z), &r, 4), Err(MetricError::KTooLarge { k: 4, n: 4 }));
}

#[test]
fn report_examples() {
    let ids = vec!["a".to_string()];
    let y = vec![vec![1.0, 3.0, 2.0, 5.0]];
    let r = build_report(&ids, &y, &y, "short", None).unwrap();
    assert_eq!(r.mean, MeanMetrics { nse: 1.0, kge: 1.0, ve: 1.0, rho: 1.0 });
    let json = serde_json::to_string(&r).unwrap();
    assert_eq!(serde_json::from_str::<MetricsReport>(&json).unwrap(), r);

    let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let obs = vec![vec![1.0, 2.0, 3.0]; 3];
    let pred = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 4.0], vec![2.0, 2.0, 2.0]];
    let r = build_report(&ids, &obs, &pred, "short", None).unwrap();
    let hand = (r.stations[0].nse + r.stations[1].nse + r.stations[2].nse) / 3.0;
    assert!(close(r.mean.nse, hand));
    assert!(close(r.mean.nse, 0.5));
    assert!(build_report(&ids, &obs[..2], &pred, "short", None).is_err());
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..50.0, 3..40)
}

proptest! {
    #[test]
    fn scores_hit_one_only_on_exact_match(y in series(), i in 0usize..40, delta in 0.01f64..5.0) {
        prop_assume!(y.iter().any(|v| (v - y[0]).abs() > 1e-6));
        prop_assert!(close(nse(&y, &y).unwrap(), 1.0));
        prop_assert!(close(kge(&y, &y).unwrap(), 1.0));
        prop_assert!(close(volumetric_efficiency(&y, &y).unwrap(), 1.0));
        let mut p = y.clone();
        let i = i % y.len();
        p[i] += delta;
        prop_assert!(nse(&y, &p).unwrap() < 1.0 - TOL);
        prop_assert!(kge(&y, &p).unwrap() < 1.0 - TOL);
        prop_assert!(volumetric_efficiency(&y, &p).unwrap() < 1.0 - TOL);
    }

    #[test]
    fn rho_is_affine_invariant_nse_is_not(y in series(), p in series(), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let n = y.len().min(p.len());
        let (y, p) = (&y[..n], &p[..n]);
        prop_assume!(y.iter().any(|v| (v - y[0]).abs() > 1e-3) && p.iter().any(|v| (v - p[0]).abs() > 1e-3));
        let base = pearson_rho(y, p).unwrap();
        let moved: Vec<f64> = p.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson_rho(y, &moved).unwrap() - base).abs() < 1e-9);
        let y_moved: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson_rho(&y_moved, p).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn knn_is_invariant_to_rigid_motion_and_relabelling(
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 6..20),
        theta in 0.0f64..std::f64::consts::TAU,
        shift in -5.0f64..5.0,
        seed in 0u64..1000,
    ) {
        let z: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
        let r: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let k = 3;
        let base = knn_alignment(&z, &r, k).unwrap();
        let (c, s) = (theta.cos(), theta.sin());
        let rotated: Vec<Vec<f64>> = z.iter().map(|p| vec![c * p[0] - s * p[1] + shift, s * p[0] + c * p[1] - shift]).collect();
        let r2: Vec<f64> = r.iter().map(|v| v + shift).collect();
        // rounding can reorder near-ties; continuous random data has none at this scale
        prop_assert!((knn_alignment(&rotated, &r2, k).unwrap() - base).abs() < 1e-12);

        let mut perm: Vec<usize> = (0..z.len()).collect();
        csf_core::SeedRng::new(seed).shuffle(&mut perm);
        let zp: Vec<Vec<f64>> = perm.iter().map(|&i| z[i].clone()).collect();
        let rp: Vec<f64> = perm.iter().map(|&i| r[i]).collect();
        prop_assert!((knn_alignment(&zp, &rp, k).unwrap() - base).abs() < 1e-12);
    }
}

#[test]
fn nse_not_affine_invariant() {
    let y = [1.0, 2.0, 3.0, 5.0];
    let p = [1.1, 2.1, 2.9, 4.8];
    let moved: Vec<f64> = p.iter().map(|v| 2.0 * v + 1.0).collect();
    assert!((nse(&y, &p).unwrap() - nse(&y, &moved).unwrap()).abs() > 0.1);
    assert!((pearson_rho(&y, &p).unwrap() - pearson_rho(&y, &moved).unwrap()).abs() < 1e-12);
}
