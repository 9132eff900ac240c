use alpr::baselines::fit_nc;
use alpr::classify::Classifier;
use alpr::data::validate;
use alpr::synthetic::{generate, split, ThreeRingSpec};

fn clean(seed: u64) -> ThreeRingSpec {
    ThreeRingSpec {
        samples_per_class: 200,
        noise_amplitude: 0.0,
        radial_sigma: 0.0,
        seed,
    }
}

#[test]
fn clean_rings_are_separable_by_radius() {
    let data = generate(&clean(3)).unwrap();
    let radius = |j: usize| data.sample(j).rows(0, 2).norm();
    for c in 1..=3 {
        for &j in data.class_members(c) {
            assert!((radius(j) - c as f64).abs() < 1e-12);
        }
    }
    let (train, test) = split(&data, 150, 3).unwrap();
    assert_eq!(fit_nc(&train).accuracy(&test).unwrap(), 1.0);
}

#[test]
fn generated_data_validates() {
    for spec in [ThreeRingSpec::th1(0), ThreeRingSpec::th2(5), clean(1)] {
        let data = generate(&spec).unwrap();
        validate(data.features(), data.labels(), data.class_count()).unwrap();
        assert_eq!(data.class_sizes(), vec![spec.samples_per_class; 3]);
    }
}

#[test]
fn split_partitions_the_data() {
    let data = generate(&ThreeRingSpec::th1(2)).unwrap();
    let (train, test) = split(&data, 300, 8).unwrap();
    assert_eq!(train.class_sizes(), vec![300; 3]);
    assert_eq!(test.class_sizes(), vec![700; 3]);
    // every original column appears exactly once across the two halves
    let mut seen: Vec<Vec<u64>> = train
        .features()
        .column_iter()
        .chain(test.features().column_iter())
        .map(|c| c.iter().map(|v| v.to_bits()).collect())
        .collect();
    let mut all: Vec<Vec<u64>> = data
        .features()
        .column_iter()
        .map(|c| c.iter().map(|v| v.to_bits()).collect())
        .collect();
    seen.sort();
    all.sort();
    assert_eq!(seen, all);

    let (again, _) = split(&data, 300, 8).unwrap();
    assert_eq!(again.features(), train.features());
}
