use std::collections::HashSet;

use distillery::rng::RngStream;
use distillery::synthetic::{
    generate, read_dump, replay_label, write_dump, Generated, Hyperplane, SyntheticExperiment, SyntheticSpec,
};

const ALL: [SyntheticExperiment; 4] = [
    SyntheticExperiment::CleanLabels,
    SyntheticExperiment::CleanFeatures,
    SyntheticExperiment::RelevantFeatures,
    SyntheticExperiment::SampleRelevantFeatures,
];

fn make(experiment: SyntheticExperiment, seed: u64, n_test: usize) -> (Generated, Hyperplane) {
    let root = RngStream::new(seed, 0);
    let mut spec = SyntheticSpec::new(experiment, root.fork_named("data"));
    spec.n_test = n_test;
    let alpha = Hyperplane::draw(spec.d, &root.fork_named("alpha"));
    (generate(&spec, &alpha).unwrap(), alpha)
}

fn label(y: &Option<Vec<f64>>) -> usize {
    usize::from(y.as_ref().unwrap()[1] > 0.5)
}

#[test]
fn labels_replay_from_latent_quantities() {
    for e in ALL {
        for seed in 0..5 {
            let (g, alpha) = make(e, seed, 2_000);
            let mismatches = (0..g.dataset.len())
                .filter(|&i| replay_label(&g, &alpha, e, i) != label(&g.dataset.examples()[i].y))
                .count();
            assert_eq!(mismatches, 0, "experiment {} seed {seed}", e.number());
        }
    }
}

#[test]
fn same_stream_same_data() {
    for e in ALL {
        let (a, _) = make(e, 7, 500);
        let (b, _) = make(e, 7, 500);
        assert_eq!(a, b);
        let (c, _) = make(e, 8, 500);
        assert_ne!(a.dataset, c.dataset);
    }
}

#[test]
fn split_sizes() {
    let (g, _) = make(SyntheticExperiment::CleanLabels, 0, 10_000);
    let (train, test) = g.train_test();
    assert_eq!((train.len(), test.len()), (200, 10_000));
    assert_eq!(train.header().d, 50);
}

#[test]
fn generated_data_survives_the_dump() {
    for e in ALL {
        let (g, _) = make(e, 3, 50);
        let mut buf = Vec::new();
        write_dump(&g.dataset, &mut buf).unwrap();
        let back = read_dump(buf.as_slice()).unwrap();
        assert_eq!(back, g.dataset);
    }
}

// With margin m ~ N(0, s^2) and unit label noise, a flip happens with
// probability arccos(s / sqrt(s^2 + 1)) / pi = atan(1 / s) / pi.
#[test]
fn label_noise_flip_rate_matches_closed_form() {
    let (g, alpha) = make(SyntheticExperiment::CleanLabels, 11, 100_000);
    let s = alpha.alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    let expected = (1.0 / s).atan() / std::f64::consts::PI;
    let flips = g
        .dataset
        .examples()
        .iter()
        .filter(|t| usize::from(t.x_star.as_ref().unwrap()[0] > 0.0) != label(&t.y))
        .count();
    let rate = flips as f64 / g.dataset.len() as f64;
    assert!((rate - expected).abs() < 0.01, "flip rate {rate}, expected {expected}");
}

#[test]
fn label_noise_can_be_switched_off() {
    let root = RngStream::new(2, 0);
    let mut spec = SyntheticSpec::new(SyntheticExperiment::CleanLabels, root.fork_named("data"));
    spec.label_noise = false;
    let alpha = Hyperplane::draw(spec.d, &root.fork_named("alpha"));
    let g = generate(&spec, &alpha).unwrap();
    assert!(g
        .dataset
        .examples()
        .iter()
        .all(|t| usize::from(t.x_star.as_ref().unwrap()[0] > 0.0) == label(&t.y)));
}

#[test]
fn noisy_features_have_variance_two_and_independent_noise() {
    let (g, _) = make(SyntheticExperiment::CleanFeatures, 5, 100_000);
    let n = g.dataset.len() as f64;
    let d = g.dataset.header().d;
    for j in 0..d {
        let col: Vec<f64> = g.dataset.examples().iter().map(|t| t.x.as_ref().unwrap()[j]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 2.0).abs() < 0.05, "coordinate {j} variance {var}");
    }
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (t, eps) in g.dataset.examples().iter().zip(&g.noise) {
        for (a, b) in t.x_star.as_ref().unwrap().iter().zip(eps) {
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
    }
    let corr = sxy / (sxx * syy).sqrt();
    assert!(corr.abs() < 0.01, "pooled correlation {corr}");
}

#[test]
fn shared_subset_ignores_other_coordinates() {
    let (g, alpha) = make(SyntheticExperiment::RelevantFeatures, 4, 1_000);
    let subset = &g.relevant[0];
    assert!(g.relevant.iter().all(|r| r == subset));
    assert_eq!(subset.len(), 3);
    let mut rng = RngStream::new(99, 0).generator();
    let changed: Vec<_> = g
        .dataset
        .examples()
        .iter()
        .map(|t| {
            let mut t = t.clone();
            let x = t.x.as_mut().unwrap();
            for (j, v) in x.iter_mut().enumerate() {
                if !subset.contains(&j) {
                    *v = distillery::rng::standard_normal(&mut rng) * 100.0;
                }
            }
            t
        })
        .collect();
    let mutated = Generated {
        dataset: g.dataset.with_examples(changed).unwrap(),
        ..g.clone()
    };
    for i in 0..g.dataset.len() {
        assert_eq!(
            replay_label(&mutated, &alpha, SyntheticExperiment::RelevantFeatures, i),
            label(&g.dataset.examples()[i].y)
        );
    }
}

#[test]
fn per_example_subsets_vary_and_classes_balance() {
    let (g, _) = make(SyntheticExperiment::SampleRelevantFeatures, 6, 100_000);
    let distinct: HashSet<&Vec<usize>> = g.relevant.iter().take(100).collect();
    assert!(distinct.len() >= 2);
    for (t, j) in g.dataset.examples().iter().zip(&g.relevant).take(1_000) {
        let x = t.x.as_ref().unwrap();
        let xs = t.x_star.as_ref().unwrap();
        for k in 0..x.len() {
            let expected = if j.contains(&k) { x[k] } else { 0.0 };
            assert_eq!(xs[k], expected);
        }
    }
    let positive = g.dataset.examples().iter().filter(|t| label(&t.y) == 1).count();
    let frac = positive as f64 / g.dataset.len() as f64;
    assert!(frac > 0.48 && frac < 0.52, "positive fraction {frac}");
}

#[test]
fn spec_mismatch_is_rejected() {
    let root = RngStream::new(0, 0);
    let mut spec = SyntheticSpec::new(SyntheticExperiment::RelevantFeatures, root);
    spec.relevant = 51;
    let alpha = Hyperplane::draw(50, &root);
    assert!(generate(&spec, &alpha).is_err());
    let spec = SyntheticSpec::new(SyntheticExperiment::CleanLabels, root);
    assert!(generate(&spec, &Hyperplane::draw(10, &root)).is_err());
}
