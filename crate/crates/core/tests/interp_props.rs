use flowstyle_core::flow::FlowField;
use flowstyle_core::interp::{interpolate_sequence, warp, FrameSequence, IndexedFlow, KeyLayout};
use flowstyle_core::tensor::Tensor3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_governing(keys: &[usize], p: usize) -> Option<usize> {
    let mut best = None;
    for (q, &k) in keys.iter().enumerate() {
        if k < p {
            best = Some(q);
        }
    }
    best
}

fn layout_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (1usize..40).prop_flat_map(|len| {
        (Just(len), prop::collection::btree_set(1..len.max(2), 0..len.min(8)))
            .prop_map(|(len, rest)| {
                let mut keys = vec![0];
                keys.extend(rest.into_iter().filter(|&k| k < len));
                (len, keys)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn governing_key_matches_brute_force((len, keys) in layout_strategy()) {
        let layout = KeyLayout::new(len, keys.clone()).unwrap();
        for p in 0..len {
            prop_assert_eq!(layout.governing_key(p), brute_governing(&keys, p));
        }
    }

    #[test]
    fn sequence_assigns_every_intermediate((len, keys) in layout_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = KeyLayout::new(len, keys.clone()).unwrap();
        // each stylized key is a distinct constant so the source is readable
        let stylized: Vec<Tensor3> = (0..keys.len())
            .map(|q| Tensor3::filled(3, 4, 3, q as f64 / keys.len() as f64))
            .collect();
        let flows: Vec<IndexedFlow> = layout
            .intermediate_indices()
            .into_iter()
            .map(|index| IndexedFlow {
                index,
                flow: FlowField::constant(3, 4, rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            })
            .collect();
        let out = interpolate_sequence(&stylized, &flows, &layout).unwrap();
        let expected: Vec<usize> = (0..len).filter(|p| !keys.contains(p)).collect();
        prop_assert_eq!(out.iter().map(|f| f.index).collect::<Vec<_>>(), expected);
        for f in &out {
            let q = brute_governing(&keys, f.index).unwrap();
            prop_assert_eq!(f.source_key, keys[q]);
            prop_assert_eq!(&f.frame, &stylized[q]);
        }
    }

    #[test]
    fn warp_stays_in_unit_range(seed in any::<u64>(), h in 1usize..8, w in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let key = Tensor3::from_fn(h, w, 3, |_, _, _| rng.random::<f64>());
        let dx = (0..h * w).map(|_| rng.random_range(-10.0..10.0)).collect();
        let dy = (0..h * w).map(|_| rng.random_range(-10.0..10.0)).collect();
        let out = warp(&FlowField::new(h, w, dx, dy).unwrap(), &key).unwrap();
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_flow_warp_is_identity(seed in any::<u64>(), h in 1usize..10, w in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let key = Tensor3::from_fn(h, w, 3, |_, _, _| rng.random::<f64>());
        prop_assert_eq!(warp(&FlowField::zeros(h, w), &key).unwrap(), key);
    }

    /// Integer flows reduce to clamped re-indexing.
    #[test]
    fn integer_flow_is_clamped_shift(seed in any::<u64>(), h in 1usize..8, w in 1usize..8, sx in -3i64..4, sy in -3i64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let key = Tensor3::from_fn(h, w, 2, |_, _, _| rng.random::<f64>());
        let out = warp(&FlowField::constant(h, w, sx as f64, sy as f64), &key).unwrap();
        for y in 0..h {
            for x in 0..w {
                let yy = (y as i64 + sy).clamp(0, h as i64 - 1) as usize;
                let xx = (x as i64 + sx).clamp(0, w as i64 - 1) as usize;
                for c in 0..2 {
                    prop_assert_eq!(out.get(y, x, c), key.get(yy, xx, c));
                }
            }
        }
    }
}

#[test]
fn column_ramp_shifts_left() {
    let key = Tensor3::from_fn(3, 5, 1, |_, x, _| x as f64 / 4.0);
    let out = warp(&FlowField::constant(3, 5, 1.0, 0.0), &key).unwrap();
    for y in 0..3 {
        let row: Vec<f64> = (0..5).map(|x| out.get(y, x, 0)).collect();
        assert_eq!(row, vec![0.25, 0.5, 0.75, 1.0, 1.0]);
    }
}

#[test]
fn five_frames_two_keys() {
    let layout = KeyLayout::new(5, vec![0, 4]).unwrap();
    let keys = [Tensor3::filled(2, 2, 3, 0.2), Tensor3::filled(2, 2, 3, 0.8)];
    let flows: Vec<_> = (1..4)
        .map(|index| IndexedFlow {
            index,
            flow: FlowField::zeros(2, 2),
        })
        .collect();
    let out = interpolate_sequence(&keys, &flows, &layout).unwrap();
    assert_eq!(out.len(), 3);
    assert!(out.iter().all(|f| f.source_key == 0 && f.frame == keys[0]));
}

#[test]
fn all_keys_gives_no_intermediates() {
    let layout = KeyLayout::new(3, vec![0, 1, 2]).unwrap();
    let keys = vec![Tensor3::zeros(2, 2, 3); 3];
    assert!(interpolate_sequence(&keys, &[], &layout).unwrap().is_empty());
}

#[test]
fn missing_flow_and_leading_intermediate_are_errors() {
    let layout = KeyLayout::new(4, vec![0, 2]).unwrap();
    let keys = vec![Tensor3::zeros(2, 2, 3); 2];
    let one = vec![IndexedFlow {
        index: 1,
        flow: FlowField::zeros(2, 2),
    }];
    assert!(interpolate_sequence(&keys, &one, &layout).is_err());

    let late = KeyLayout::new(3, vec![1]).unwrap();
    let flows: Vec<_> = [0, 2]
        .into_iter()
        .map(|index| IndexedFlow {
            index,
            flow: FlowField::zeros(2, 2),
        })
        .collect();
    assert!(interpolate_sequence(&keys[..1], &flows, &late).is_err());
    assert!(FrameSequence::new(vec![Tensor3::zeros(2, 2, 3); 3], vec![1]).is_err());
}

#[test]
fn warp_dimension_mismatch() {
    assert!(warp(&FlowField::zeros(3, 3), &Tensor3::zeros(3, 4, 3)).is_err());
}
