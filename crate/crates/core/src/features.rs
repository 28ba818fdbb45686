//! Clip-level features from a statistics trajectory, plus a k-nearest
//! neighbour classifier with leave-one-out evaluation.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::EventClass;
use crate::stats::StatsVector;

pub const FEATURE_LEN: usize = 15;
pub const DEFAULT_K: usize = 5;
const STD_FLOOR: f64 = 1e-12;

/// `[mean, variance, range]` for each of `P_m, P_s, P_d, U_m, U_s`, in that
/// order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector([f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_LEN]) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64; FEATURE_LEN] {
        &self.0
    }

    pub fn mean(&self, element: usize) -> f64 {
        self.0[3 * element]
    }

    pub fn variance(&self, element: usize) -> f64 {
        self.0[3 * element + 1]
    }

    pub fn range(&self, element: usize) -> f64 {
        self.0[3 * element + 2]
    }

    fn distance_sq(&self, other: &FeatureVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub label: EventClass,
    pub features: FeatureVector,
    pub seed: u64,
}

/// Mean, population variance and max - min of every statistics element.
pub fn extract_features(trajectory: &[StatsVector]) -> Result<FeatureVector> {
    if trajectory.len() < 2 {
        return Err(Error::input(format!(
            "feature extraction needs at least 2 frames, got {}",
            trajectory.len()
        )));
    }
    let n = trajectory.len() as f64;
    let mut out = [0.0; FEATURE_LEN];
    for element in 0..StatsVector::LEN {
        let series = trajectory.iter().map(|s| s.to_array()[element]);
        let mean = series.clone().sum::<f64>() / n;
        let var = series.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let (lo, hi) = series.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        out[3 * element] = mean;
        out[3 * element + 1] = var;
        out[3 * element + 2] = hi - lo;
    }
    Ok(FeatureVector(out))
}

/// Per-dimension standardisation fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    mean: [f64; FEATURE_LEN],
    std: [f64; FEATURE_LEN],
}

impl ZScore {
    pub fn fit<'a>(data: impl IntoIterator<Item = &'a FeatureVector>) -> Result<Self> {
        let data: Vec<&FeatureVector> = data.into_iter().collect();
        if data.is_empty() {
            return Err(Error::input("cannot fit normalisation on an empty dataset"));
        }
        let n = data.len() as f64;
        let mut mean = [0.0; FEATURE_LEN];
        let mut std = [0.0; FEATURE_LEN];
        for d in 0..FEATURE_LEN {
            mean[d] = data.iter().map(|f| f.0[d]).sum::<f64>() / n;
            let var = data.iter().map(|f| (f.0[d] - mean[d]).powi(2)).sum::<f64>() / n;
            std[d] = var.sqrt().max(STD_FLOOR);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, f: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_LEN];
        for d in 0..FEATURE_LEN {
            out[d] = (f.0[d] - self.mean[d]) / self.std[d];
        }
        FeatureVector(out)
    }
}

/// Majority vote among the `k` nearest training points (Euclidean).
///
/// Vote ties go to the class with the smallest summed distance over its
/// voters, then to the earlier class in [`EventClass::ALL`]. Equidistant
/// neighbours are ranked by training order.
pub fn knn_classify(train: &[EventRecord], query: &FeatureVector, k: usize) -> Result<EventClass> {
    if train.is_empty() {
        return Err(Error::input("k-NN training set is empty"));
    }
    if k == 0 || k > train.len() {
        return Err(Error::config(format!(
            "k = {k} must be in 1..={}",
            train.len()
        )));
    }
    let mut dist: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, r)| (r.features.distance_sq(query), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut votes = [0usize; 4];
    let mut summed = [0.0f64; 4];
    for &(d2, i) in &dist[..k] {
        let c = train[i].label.index();
        votes[c] += 1;
        summed[c] += d2.sqrt();
    }
    let best = EventClass::ALL
        .into_iter()
        .filter(|c| votes[c.index()] > 0)
        .min_by(|a, b| {
            votes[b.index()]
                .cmp(&votes[a.index()])
                .then(summed[a.index()].total_cmp(&summed[b.index()]))
                .then(a.index().cmp(&b.index()))
        })
        .expect("k >= 1 gives at least one vote");
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted, in [`EventClass::ALL`] order.
    pub confusion: [[usize; 4]; 4],
    pub k: usize,
}

impl LooReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Aligned plain-text table.
    pub fn confusion_table(&self) -> String {
        let names: Vec<&str> = EventClass::ALL.iter().map(|c| c.as_str()).collect();
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0);
        let mut s = String::new();
        let _ = write!(s, "{:width$}", "true \\ pred");
        for n in &names {
            let _ = write!(s, "  {n:>width$}");
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{:width$}", names[i]);
            for v in row {
                let _ = write!(s, "  {v:>width$}");
            }
            s.push('\n');
        }
        s
    }

    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("true");
        for c in EventClass::ALL {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            s.push_str(EventClass::ALL[i].as_str());
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Leave-one-out k-NN. Each fold fits its own z-score on the training part.
pub fn evaluate_loo(dataset: &[EventRecord], k: usize) -> Result<LooReport> {
    for c in EventClass::ALL {
        let n = dataset.iter().filter(|r| r.label == c).count();
        if n < 2 {
            return Err(Error::input(format!(
                "class {c} has {n} records; leave-one-out needs at least 2 per class"
            )));
        }
    }
    let predictions = (0..dataset.len())
        .into_par_iter()
        .map(|held_out| {
            let train: Vec<EventRecord> = dataset
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held_out)
                .map(|(_, r)| *r)
                .collect();
            let norm = ZScore::fit(train.iter().map(|r| &r.features))?;
            let train: Vec<EventRecord> = train
                .into_iter()
                .map(|r| EventRecord {
                    features: norm.apply(&r.features),
                    ..r
                })
                .collect();
            let query = norm.apply(&dataset[held_out].features);
            knn_classify(&train, &query, k)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = [[0usize; 4]; 4];
    for (r, p) in dataset.iter().zip(&predictions) {
        confusion[r.label.index()][p.index()] += 1;
    }
    let correct: usize = (0..4).map(|i| confusion[i][i]).sum();
    Ok(LooReport {
        accuracy: correct as f64 / dataset.len() as f64,
        confusion,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn traj(rows: &[[f64; 5]]) -> Vec<StatsVector> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| StatsVector::from_array(i as u64, *r))
            .collect()
    }

    fn rec(label: EventClass, v: [f64; FEATURE_LEN]) -> EventRecord {
        EventRecord {
            label,
            features: FeatureVector::new(v),
            seed: 0,
        }
    }

    fn clusters(rng: &mut ChaCha8Rng, per_class: usize, spread: f64) -> Vec<EventRecord> {
        let mut out = Vec::new();
        for c in EventClass::ALL {
            let mut center = [0.0; FEATURE_LEN];
            center[c.index()] = 10.0;
            for _ in 0..per_class {
                let mut v = center;
                for x in v.iter_mut() {
                    *x += spread * rng.sample::<f64, _>(StandardNormal);
                }
                out.push(rec(c, v));
            }
        }
        out
    }

    #[test]
    fn constant_trajectory() {
        let f = extract_features(&traj(&[[0.5, 0.3, 0.2, 0.01, 0.0]; 10])).unwrap();
        for e in 0..5 {
            assert!(f.variance(e) < 1e-30);
            assert_eq!(f.range(e), 0.0);
        }
        assert!((f.mean(0) - 0.5).abs() < 1e-15);
        assert_eq!(f.values().len(), 15);
    }

    #[test]
    fn two_frame_trajectory() {
        let f = extract_features(&traj(&[[0.2, 0.8, 0.0, 0.0, 0.0], [0.6, 0.4, 0.0, 0.0, 0.0]])).unwrap();
        assert!((f.mean(0) - 0.4).abs() < 1e-15);
        assert!((f.variance(0) - 0.04).abs() < 1e-15);
        assert!((f.range(0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn short_trajectories_rejected() {
        assert!(extract_features(&[]).is_err());
        assert!(extract_features(&traj(&[[1.0, 0.0, 0.0, 0.0, 0.0]])).is_err());
    }

    #[test]
    fn zscore_examples() {
        let same = vec![FeatureVector::new([3.0; FEATURE_LEN]); 4];
        let z = ZScore::fit(&same).unwrap();
        assert!(same.iter().all(|f| z.apply(f).values().iter().all(|&v| v == 0.0)));

        let mut a = [0.0; FEATURE_LEN];
        let mut b = [0.0; FEATURE_LEN];
        a[0] = 0.0;
        b[0] = 2.0;
        let pair = [FeatureVector::new(a), FeatureVector::new(b)];
        let z = ZScore::fit(&pair).unwrap();
        assert_eq!(z.apply(&pair[0]).values()[0], -1.0);
        assert_eq!(z.apply(&pair[1]).values()[0], 1.0);
        assert!(ZScore::fit(&[]).is_err());
    }

    #[test]
    fn zscore_centres_training_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<FeatureVector> = (0..30)
            .map(|_| {
                let mut v = [0.0; FEATURE_LEN];
                v.iter_mut().for_each(|x| *x = rng.gen_range(-5.0..20.0));
                FeatureVector::new(v)
            })
            .collect();
        let z = ZScore::fit(&data).unwrap();
        for d in 0..FEATURE_LEN {
            let m: f64 = data.iter().map(|f| z.apply(f).values()[d]).sum::<f64>() / 30.0;
            assert!(m.abs() < 1e-9);
        }
    }

    #[test]
    fn exact_match_with_k1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let train = clusters(&mut rng, 5, 1.0);
        for r in &train {
            assert_eq!(knn_classify(&train, &r.features, 1).unwrap(), r.label);
        }
    }

    #[test]
    fn full_k_tie_breaks_on_distance_then_order() {
        // one point per class on the axes, query at the origin: all tie
        let mut train = Vec::new();
        for c in EventClass::ALL {
            let mut v = [0.0; FEATURE_LEN];
            v[c.index()] = 1.0;
            train.push(rec(c, v));
        }
        let origin = FeatureVector::new([0.0; FEATURE_LEN]);
        assert_eq!(knn_classify(&train, &origin, 4).unwrap(), EventClass::SteadyState);
        // pulling the query towards repositioning breaks the distance tie
        let mut q = [0.0; FEATURE_LEN];
        q[3] = 0.1;
        assert_eq!(
            knn_classify(&train, &FeatureVector::new(q), 4).unwrap(),
            EventClass::Repositioning
        );
    }

    #[test]
    fn knn_errors() {
        let q = FeatureVector::new([0.0; FEATURE_LEN]);
        assert!(matches!(knn_classify(&[], &q, 1), Err(Error::Input(_))));
        let train = vec![rec(EventClass::DoubleTalk, [0.0; FEATURE_LEN])];
        assert!(knn_classify(&train, &q, 2).is_err());
        assert!(knn_classify(&train, &q, 0).is_err());
    }

    #[test]
    fn separable_clusters_are_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // centroid spacing 10*sqrt(2), within-cluster std 1
        let data = clusters(&mut rng, 20, 1.0);
        let report = evaluate_loo(&data, DEFAULT_K).unwrap();
        assert_eq!(report.accuracy, 1.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(report.confusion[i][j], if i == j { 20 } else { 0 });
            }
        }
        assert_eq!(report.total(), data.len());
    }

    #[test]
    fn permuted_labels_give_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = clusters(&mut rng, 20, 1.0);
        let mut accs = Vec::new();
        for _ in 0..100 {
            let mut labels: Vec<EventClass> = data.iter().map(|r| r.label).collect();
            labels.shuffle(&mut rng);
            let shuffled: Vec<EventRecord> = data
                .iter()
                .zip(labels)
                .map(|(r, l)| EventRecord { label: l, ..*r })
                .collect();
            accs.push(evaluate_loo(&shuffled, DEFAULT_K).unwrap().accuracy);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 0.25).abs() <= 0.15, "{mean}");
        assert!(accs.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn loo_needs_two_per_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut data = clusters(&mut rng, 3, 1.0);
        data.retain(|r| r.label != EventClass::Repositioning);
        assert!(evaluate_loo(&data, 1).is_err());
        data.push(rec(EventClass::Repositioning, [0.0; FEATURE_LEN]));
        assert!(evaluate_loo(&data, 1).is_err());
    }

    #[test]
    fn report_formats() {
        let r = LooReport {
            accuracy: 0.5,
            confusion: [[1, 0, 0, 0], [0, 2, 0, 0], [0, 0, 3, 1], [0, 0, 0, 4]],
            k: 5,
        };
        let csv = r.confusion_csv();
        assert!(csv.starts_with("true,steady_state,double_talk,echo_path_change,repositioning\n"));
        assert!(csv.contains("echo_path_change,0,0,3,1\n"));
        let table = r.confusion_table();
        assert_eq!(table.lines().count(), 5);
        let widths: Vec<usize> = table.lines().map(|l| l.len()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]));
    }

    fn rotation(seed: u64) -> Vec<[f64; FEATURE_LEN]> {
        // Gram-Schmidt on a random matrix
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q: Vec<[f64; FEATURE_LEN]> = Vec::new();
        while q.len() < FEATURE_LEN {
            let mut v = [0.0; FEATURE_LEN];
            v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            for b in &q {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            q.push(v);
        }
        q
    }

    fn rotate(q: &[[f64; FEATURE_LEN]], f: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_LEN];
        for (o, row) in out.iter_mut().zip(q) {
            *o = row.iter().zip(f.values()).map(|(a, b)| a * b).sum();
        }
        FeatureVector::new(out)
    }

    proptest! {
        #[test]
        fn shuffling_frames_keeps_features(seed in any::<u64>(), len in 2usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<[f64; 5]> = (0..len).map(|_| {
                let mut r = [0.0; 5];
                r.iter_mut().for_each(|x| *x = rng.gen_range(0.0..1.0));
                r
            }).collect();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rng);
            let a = extract_features(&traj(&rows)).unwrap();
            let b = extract_features(&traj(&shuffled)).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn scaling_an_element_scales_its_features(seed in any::<u64>(), scale in 0.01f64..10.0, element in 0usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<[f64; 5]> = (0..40).map(|_| {
                let mut r = [0.0; 5];
                r.iter_mut().for_each(|x| *x = rng.gen_range(0.0..1.0));
                r
            }).collect();
            let scaled: Vec<[f64; 5]> = rows.iter().map(|r| {
                let mut r = *r;
                r[element] *= scale;
                r
            }).collect();
            let a = extract_features(&traj(&rows)).unwrap();
            let b = extract_features(&traj(&scaled)).unwrap();
            prop_assert!((b.mean(element) - scale * a.mean(element)).abs() <= 1e-9 * scale);
            prop_assert!((b.range(element) - scale * a.range(element)).abs() <= 1e-9 * scale);
            prop_assert!((b.variance(element) - scale * scale * a.variance(element)).abs() <= 1e-9 * scale * scale);
        }

        #[test]
        fn knn_is_rotation_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let train = clusters(&mut rng, 6, 4.0);
            let q = rotation(seed ^ 0xABCD);
            let rotated: Vec<EventRecord> = train.iter().map(|r| EventRecord { features: rotate(&q, &r.features), ..*r }).collect();
            for _ in 0..10 {
                let mut v = [0.0; FEATURE_LEN];
                v.iter_mut().for_each(|x| *x = rng.gen_range(-2.0..12.0));
                let query = FeatureVector::new(v);
                prop_assert_eq!(
                    knn_classify(&train, &query, 5).unwrap(),
                    knn_classify(&rotated, &rotate(&q, &query), 5).unwrap()
                );
            }
        }
    }
}
