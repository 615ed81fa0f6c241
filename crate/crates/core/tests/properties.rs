use num_complex::Complex64;
use proptest::prelude::*;
use zeromode::classifier::{model_from_json, model_to_json, ClassifierConfig, Model, Provenance};
use zeromode::data::{
    add_noise, parse_optdigits, read_split_manifest, subset_and_split, write_split_manifest, Dataset, Image, NoiseSpec,
    SplitTag, Task, IMAGE_PIXELS,
};
use zeromode::encoding::{encode, EncodingMode, TransformMatrix};
use zeromode::lattice::{build_hamiltonian, ArrayParams, PumpPattern};
use zeromode::spectrum::{eigendecompose, eigenvalues_gauge, nhph_defect, Spectrum};
use zeromode::threshold::{threshold_scale, ThresholdMethod};
use zeromode::training::{cost_from_gaps, ImageGap, Metrics};

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=6, 1usize..=6)
}

fn pump(rows: usize, cols: usize) -> impl Strategy<Value = PumpPattern> {
    prop::collection::vec(0.0f64..1.0, rows * cols).prop_map(move |g| PumpPattern::new(rows, cols, g).unwrap())
}

fn shaped_pump() -> impl Strategy<Value = (ArrayParams, PumpPattern)> {
    shape().prop_flat_map(|(r, c)| (Just(ArrayParams::new(r, c, 1.0, 1.0, 0.2).unwrap()), pump(r, c)))
}

fn image() -> impl Strategy<Value = Image> {
    prop::collection::vec(0u8..=16, IMAGE_PIXELS)
        .prop_map(|px| Image::new(0, 0, px.into_iter().map(f64::from).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hamiltonian_structure((params, p) in shaped_pump()) {
        let h = build_hamiltonian(&p, &params).unwrap();
        let n = h.dim();
        for i in 0..n {
            let d = h.get(i, i);
            prop_assert_eq!(d, Complex64::new(0.0, p.gains()[i] - 0.2));
            for j in 0..n {
                if i == j {
                    continue;
                }
                let z = h.get(i, j);
                prop_assert_eq!(z.im, 0.0);
                prop_assert_eq!(z, h.get(j, i));
                let (ri, ci) = (i / params.cols, i % params.cols);
                let (rj, cj) = (j / params.cols, j % params.cols);
                let neighbours = ri.abs_diff(rj) + ci.abs_diff(cj) == 1;
                prop_assert_eq!(z.re != 0.0, neighbours);
            }
        }
    }

    #[test]
    fn pairing_and_trace((params, p) in shaped_pump()) {
        let h = build_hamiltonian(&p, &params).unwrap();
        let n = h.dim() as f64;
        for spec in [eigendecompose(&h).unwrap(), Spectrum::from_eigenvalues(eigenvalues_gauge(&h).unwrap())] {
            prop_assert!(nhph_defect(&spec) <= 1e-8);
            let sum: Complex64 = spec.eigenvalues().iter().sum();
            prop_assert!((sum - h.trace()).norm() <= 1e-10 * n);
        }
    }

    #[test]
    fn threshold_scale_covariance((params, p) in shaped_pump(), c in 0.05f64..20.0) {
        prop_assume!(p.max_gain() > 1e-3);
        let a = threshold_scale(&p, &params, ThresholdMethod::ExactMax).unwrap();
        let b = threshold_scale(&p.scaled(c), &params, ThresholdMethod::ExactMax).unwrap();
        prop_assert!((b.alpha * c - a.alpha).abs() <= 1e-9 * a.alpha, "{} vs {}", b.alpha * c, a.alpha);
        prop_assert!(a.spectrum.max_imag().abs() <= 1e-9);
    }

    #[test]
    fn encoding_is_nonnegative_and_scale_covariant(img in image(), entries in prop::collection::vec(-1.0f64..1.0, 64), c in -5.0f64..5.0) {
        let m = TransformMatrix::new(EncodingMode::Matrix8, &ArrayParams::standard(), entries).unwrap();
        let p = encode(&img, &m).unwrap();
        prop_assert!(p.gains().iter().all(|&g| g >= 0.0));
        let q = encode(&img, &m.scaled(c)).unwrap();
        for (a, b) in p.gains().iter().zip(q.gains()) {
            prop_assert!((a * c.abs() - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let flipped = encode(&img, &m.scaled(-1.0)).unwrap();
        prop_assert_eq!(flipped.gains(), p.gains());
    }

    #[test]
    fn cost_bounds_antisymmetry_and_monotonicity(
        raw in prop::collection::vec((-1.0f64..1.0, any::<bool>()), 1..40),
        bump in 0.0f64..0.5,
        pick in any::<prop::sample::Index>(),
    ) {
        let gaps: Vec<ImageGap> = raw.iter().enumerate().map(|(id, &(gap, positive))| ImageGap { id, gap, positive }).collect();
        let c = cost_from_gaps(&gaps, 4.0);
        prop_assert!(c.abs() <= gaps.len() as f64);
        let flipped: Vec<ImageGap> = gaps.iter().map(|g| ImageGap { positive: !g.positive, ..*g }).collect();
        prop_assert_eq!(cost_from_gaps(&flipped, 4.0), -c);
        let k = pick.index(gaps.len());
        let mut moved = gaps.clone();
        moved[k].gap += if moved[k].positive { bump } else { -bump };
        prop_assert!(cost_from_gaps(&moved, 4.0) <= c + 1e-12);
    }

    #[test]
    fn metrics_identities(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
        let m = Metrics::tally(pairs.iter().copied());
        prop_assert_eq!(m.total(), pairs.len());
        prop_assert_eq!(m.accuracy, (m.tp + m.tn) as f64 / m.total() as f64);
        prop_assert_eq!(m.precision.is_none(), m.tp + m.fp == 0);
        prop_assert_eq!(m.recall.is_none(), m.tp + m.fn_ == 0);
        for v in [m.precision, m.recall].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn noise_is_seeded_and_bounded(img in image(), level in 0.0f64..2.0, seed in any::<u64>()) {
        let spec = NoiseSpec::new(level, seed);
        let a = add_noise(&img, &spec);
        prop_assert_eq!(&a, &add_noise(&img, &spec));
        let top = level * img.max_pixel();
        for (x, y) in img.pixels().iter().zip(a.pixels()) {
            prop_assert!(*y >= *x && *y <= x + top);
        }
        let clean = add_noise(&img, &NoiseSpec::new(0.0, seed));
        prop_assert_eq!(clean.pixels(), img.pixels());
    }

    #[test]
    fn optdigits_rows_round_trip(rows in prop::collection::vec((prop::collection::vec(0u8..=16, 64), 0u8..=9), 1..12)) {
        let text: String = rows
            .iter()
            .map(|(px, label)| {
                let mut fields: Vec<String> = px.iter().map(u8::to_string).collect();
                fields.push(label.to_string());
                fields.join(",") + "\n"
            })
            .collect();
        let ds = parse_optdigits(&text).unwrap();
        prop_assert_eq!(ds.len(), rows.len());
        for (k, (px, label)) in rows.iter().enumerate() {
            let img = ds.get(k).unwrap();
            prop_assert_eq!(img.label(), *label);
            prop_assert!(img.pixels().iter().zip(px).all(|(a, b)| *a == f64::from(*b)));
        }
        let again = parse_optdigits(&text).unwrap();
        prop_assert_eq!(again.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn split_partitions_and_round_trips(seed in any::<u64>(), half in 2usize..20, frac in 0.2f64..0.9) {
        let images: Vec<Image> = (0..60)
            .map(|id| Image::new(id, (id % 3) as u8, vec![(id % 17) as f64; IMAGE_PIXELS].iter().map(|v| v.min(16.0)).collect()).unwrap())
            .collect();
        let data = Dataset::new(images, SplitTag::All).unwrap();
        let (train, test) = subset_and_split(&data, Task::OneVsOne { other_digit: 1 }, 0, 2 * half, frac, seed).unwrap();
        let mut all: Vec<usize> = train.ids().into_iter().chain(test.ids()).collect();
        prop_assert_eq!(all.len(), 2 * half);
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), 2 * half);
        let zeros = train.images().iter().filter(|i| i.label() == 0).count() as f64;
        let target = train.len() as f64 / 2.0;
        prop_assert!((zeros - target).abs() <= 1.0);
        let mut buf = Vec::new();
        write_split_manifest(&mut buf, &train, &test).unwrap();
        let m = read_split_manifest(buf.as_slice()).unwrap();
        prop_assert_eq!(m.ids(SplitTag::Train), train.ids());
        prop_assert_eq!(m.ids(SplitTag::Test), test.ids());
    }

    #[test]
    fn model_json_round_trip_is_bit_exact(entries in prop::collection::vec(-1.0f64..1.0, 64), delta in 0.0f64..1.0, cost in -300.0f64..300.0) {
        let array = ArrayParams::standard();
        let config = ClassifierConfig {
            delta,
            target_digit: 0,
            task: Task::OneVsAll,
            threshold_method: ThresholdMethod::Lse { beta: 200.0 },
            encoding_mode: EncodingMode::Matrix8,
        };
        let provenance = Provenance { seed: 1, budget: 2, final_cost: cost, dataset_sha: "x".into() };
        let model = Model::new(TransformMatrix::new(EncodingMode::Matrix8, &array, entries).unwrap(), array, config, provenance).unwrap();
        let back = model_from_json(&model_to_json(&model)).unwrap();
        prop_assert_eq!(back, model);
    }
}
