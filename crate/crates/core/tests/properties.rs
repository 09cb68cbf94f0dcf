use geneo_pocket::geneo::*;
use geneo_pocket::grid::*;
use geneo_pocket::ingest::*;
use geneo_pocket::potentials::{compute_stack, ChannelId, PotentialConfig, CHANNEL_COUNT};
use geneo_pocket::stats::*;
use geneo_pocket::train::{decode, encode};
use proptest::prelude::*;

fn cube(n: usize) -> GridSpec {
    GridSpec::new([0.0; 3], 1.0, [n; 3]).unwrap()
}

fn arb_dims() -> impl Strategy<Value = [usize; 3]> {
    [1usize..7, 1usize..7, 1usize..7]
}

fn arb_field(dims: [usize; 3]) -> impl Strategy<Value = ScalarField3D> {
    let len: usize = dims.iter().product();
    prop::collection::vec(0.0f64..=1.0, len)
        .prop_map(move |v| ScalarField3D::new(GridSpec::new([0.0; 3], 1.0, dims).unwrap(), v).unwrap())
}

fn arb_cube_field() -> impl Strategy<Value = ScalarField3D> {
    (1usize..8).prop_flat_map(|n| arb_field([n; 3]))
}

fn arb_rotation() -> impl Strategy<Value = Rotation> {
    (0usize..24).prop_map(|i| Rotation::all()[i])
}

fn arb_mask(n: usize) -> impl Strategy<Value = VoxelMask> {
    prop::collection::vec(any::<bool>(), n * n * n).prop_map(move |bits| {
        VoxelMask::from_linear(cube(n), bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)).unwrap()
    })
}

fn arb_simplex() -> impl Strategy<Value = [f64; CHANNEL_COUNT]> {
    prop::array::uniform8(0.01f64..1.0).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.map(|x| x / s)
    })
}

fn arb_params() -> impl Strategy<Value = GeneoParams> {
    (prop::array::uniform8(0.3f64..8.0), arb_simplex(), 0.02f64..0.98)
        .prop_map(|(sigma, alpha, theta)| GeneoParams::normalized(sigma, alpha, theta).unwrap())
}

fn small_protein(seed: u64) -> AtomicStructure {
    synth_protein(seed, 40, &PocketSpec::default(), &GridConfig::default()).unwrap().structure.snapped()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_center_map_inverts(dims in arb_dims(), origin in prop::array::uniform3(-50.0f64..50.0), spacing in 0.25f64..3.0) {
        let spec = GridSpec::new(origin, spacing, dims).unwrap();
        for l in 0..spec.len() {
            let idx = spec.unlinear(l);
            prop_assert_eq!(spec.linear(idx), l);
            prop_assert_eq!(spec.voxel_containing(spec.voxel_center(idx)), Some(idx));
        }
    }

    #[test]
    fn rotation_preserves_mask_size(n in 1usize..6, r in arb_rotation(), seed in any::<u64>()) {
        let mask = VoxelMask::from_linear(cube(n), (0..n * n * n).filter(|i| (seed >> (i % 64)) & 1 == 1)).unwrap();
        let moved = rotate_mask(&mask, r).unwrap();
        prop_assert_eq!(moved.len(), mask.len());
        prop_assert_eq!(rotate_mask(&moved, r.inverse()).unwrap(), mask);
    }

    #[test]
    fn rotations_compose(f in arb_cube_field(), r1 in arb_rotation(), r2 in arb_rotation()) {
        let stepwise = rotate_field(&rotate_field(&f, r1).unwrap(), r2).unwrap();
        prop_assert_eq!(stepwise, rotate_field(&f, r2.compose(&r1)).unwrap());
    }

    #[test]
    fn same_axis_quarter_turns_add(axis in 0usize..3, a in 0i32..4, b in 0i32..4, f in arb_cube_field()) {
        let q1 = QuarterTurn::new(Axis::ALL[axis], a);
        let q2 = QuarterTurn::new(Axis::ALL[axis], b);
        let both = q1.compose(&q2).unwrap();
        prop_assert_eq!(both.quarter_count() as i32, (a + b) % 4);
        let stepwise = rotate_field(&rotate_field(&f, q1).unwrap(), q2).unwrap();
        prop_assert_eq!(stepwise, rotate_field(&f, both).unwrap());
        prop_assert_eq!(rotate_field(&rotate_field(&f, q1).unwrap(), q1.inverse()).unwrap(), f);
    }

    #[test]
    fn overlap_numerator_is_symmetric((a, b) in (1usize..5).prop_flat_map(|n| (arb_mask(n), arb_mask(n)))) {
        prop_assert_eq!(a.intersection_count(&b), b.intersection_count(&a));
        match overlap_fraction(&a, &b) {
            Ok(o) => {
                prop_assert!((0.0..=1.0).contains(&o));
                let count = o * a.len() as f64;
                prop_assert!((count - count.round()).abs() < 1e-9);
            }
            Err(_) => prop_assert!(a.is_empty()),
        }
    }

    #[test]
    fn unit_output_in_unit_interval(f in arb_cube_field(), sigma in 0.3f64..7.0) {
        let out = apply_unit(&GeneoUnit { channel: ChannelId::Distance, sigma }, &f).unwrap();
        let (lo, hi) = out.min_max();
        prop_assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn unit_commutes_with_rotation(f in arb_cube_field(), sigma in 0.3f64..7.0, r in arb_rotation()) {
        let unit = GeneoUnit { channel: ChannelId::Gravitational, sigma };
        let a = apply_unit(&unit, &rotate_field(&f, r).unwrap()).unwrap();
        let b = rotate_field(&apply_unit(&unit, &f).unwrap(), r).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unit_is_non_expansive(
        (f, g) in arb_dims().prop_flat_map(|d| (arb_field(d), arb_field(d))),
        sigma in 0.3f64..7.0,
    ) {
        let unit = GeneoUnit { channel: ChannelId::Lipophilic, sigma };
        let uf = apply_unit(&unit, &f).unwrap();
        let ug = apply_unit(&unit, &g).unwrap();
        prop_assert!(uf.sup_distance(&ug).unwrap() <= f.sup_distance(&g).unwrap() + 1e-12);
    }

    #[test]
    fn convex_combination_is_non_expansive(
        (fs, gs) in arb_dims().prop_flat_map(|d| (prop::collection::vec(arb_field(d), 8), prop::collection::vec(arb_field(d), 8))),
        params in arb_params(),
    ) {
        let mut uf = Vec::new();
        let mut ug = Vec::new();
        let mut input_gap: f64 = 0.0;
        for c in 0..CHANNEL_COUNT {
            let unit = GeneoUnit { channel: ChannelId::from_index(c).unwrap(), sigma: params.sigma()[c] };
            uf.push(apply_unit(&unit, &fs[c]).unwrap());
            ug.push(apply_unit(&unit, &gs[c]).unwrap());
            input_gap = input_gap.max(fs[c].sup_distance(&gs[c]).unwrap());
        }
        let a = combine(&uf, params.alpha()).unwrap();
        let b = combine(&ug, params.alpha()).unwrap();
        prop_assert!(a.sup_distance(&b).unwrap() <= input_gap + 1e-12);
        let (lo, hi) = a.min_max();
        prop_assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn normalization_lands_in_unit_interval(dims in arb_dims(), values in prop::collection::vec(-1e3f64..1e3, 216)) {
        let len: usize = dims.iter().product();
        let f = ScalarField3D::new(GridSpec::new([0.0; 3], 1.0, dims).unwrap(), values[..len].to_vec()).unwrap();
        let (lo, hi) = normalize_unit(&f).min_max();
        prop_assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn pockets_partition_the_global_mask(psi in arb_cube_field(), theta in 0.01f64..0.99, full in any::<bool>()) {
        let connectivity = if full { Connectivity::TwentySix } else { Connectivity::Six };
        let components = threshold_components(&psi, theta, connectivity);
        let pred = score_and_rank(&psi, components).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in &pred.pockets {
            prop_assert!((0.0..=1.0).contains(&p.score));
            for &m in p.mask.members() {
                prop_assert!(seen.insert(m), "pockets overlap at {}", m);
            }
        }
        let global: std::collections::HashSet<usize> = pred.global_mask.members().iter().copied().collect();
        prop_assert_eq!(seen, global);
        let expected: std::collections::HashSet<usize> =
            (0..psi.values().len()).filter(|&l| psi.values()[l] > theta).collect();
        prop_assert_eq!(pred.global_mask.len(), expected.len());
        for w in pred.pockets.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn params_keep_their_constraints(params in arb_params()) {
        let alpha = params.alpha();
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(alpha.iter().all(|&a| a >= 0.0));
        prop_assert!(params.sigma().iter().all(|&s| s > 0.0));
        prop_assert!(params.theta() > 0.0 && params.theta() < 1.0);
        prop_assert_eq!(params.to_vec().len(), 17);
        prop_assert_eq!(GeneoParams::parse(&params.to_file_string()).unwrap(), params);
    }

    #[test]
    fn reparameterization_round_trips(params in arb_params()) {
        let back = decode(&encode(&params)).unwrap();
        for (a, b) in back.to_vec().iter().zip(params.to_vec()) {
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn wald_reconstructs(n in 1usize..5000, frac in 0.0f64..=1.0) {
        let successes = (frac * n as f64).floor() as usize;
        let est = ProportionEstimate::from_counts("m", 1, 0.5, n, successes).unwrap();
        let p = est.p_hat.unwrap();
        let w = wald(p, n, 0.99).unwrap();
        prop_assert!((est.se.unwrap() - w.se).abs() <= 1e-12);
        prop_assert!((est.ci_low.unwrap() - w.ci_low).abs() <= 1e-12);
        prop_assert!((est.ci_high.unwrap() - w.ci_high).abs() <= 1e-12);
        prop_assert!(est.ci_low.unwrap() <= p && p <= est.ci_high.unwrap());
        let width = est.ci_high.unwrap() - est.ci_low.unwrap();
        prop_assert!((width - 2.0 * wald_z(0.99) * w.se).abs() <= 1e-12);
    }

    #[test]
    fn proportion_ignores_order(
        overlaps in prop::collection::vec(prop::option::of(0.0f64..=1.0), 1..60),
        tau in 0.05f64..=1.0,
        shift in any::<usize>(),
    ) {
        let mut shuffled = overlaps.clone();
        let len = shuffled.len();
        shuffled.rotate_left(shift % len);
        shuffled.reverse();
        let a = proportion("m", 1, &overlaps, tau).unwrap();
        let b = proportion("m", 1, &shuffled, tau).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.n_nonmissing, overlaps.iter().flatten().count());
    }

    #[test]
    fn welch_tail_mirrors(
        a in prop::collection::vec(0.0f64..1.0, 2..40),
        b in prop::collection::vec(0.0f64..1.0, 2..40),
    ) {
        let ab = mean_overlap_test(&a, &b).unwrap();
        let ba = mean_overlap_test(&b, &a).unwrap();
        prop_assert_eq!(ab.diff, ab.mean_a - ab.mean_b);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        prop_assert_eq!(ab.code.as_str(), significance_code(ab.p_value));
        if ab.t.is_some() {
            prop_assert!((ab.p_value + ba.p_value - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn five_number_is_ordered(values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let s = FiveNumber::of(&values).unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn synthetic_fixtures_are_pure(seed in any::<u64>(), frames in 2usize..6, step in 0.0f64..1.0) {
        let grid = GridConfig::default();
        let a = synth_protein(seed, 40, &PocketSpec::default(), &grid).unwrap();
        let b = synth_protein(seed, 40, &PocketSpec::default(), &grid).unwrap();
        prop_assert_eq!(&a.structure, &b.structure);
        prop_assert_eq!(&a.ligand, &b.ligand);
        let t1 = synth_trajectory(&a.structure, seed ^ 1, frames, step).unwrap();
        let t2 = synth_trajectory(&a.structure, seed ^ 1, frames, step).unwrap();
        prop_assert_eq!(&t1, &t2);
        prop_assert_eq!(t1.len(), frames);
        let elements: Vec<&str> = a.structure.atoms().iter().map(|x| x.element.as_str()).collect();
        for f in t1.frames() {
            let e: Vec<&str> = f.atoms().iter().map(|x| x.element.as_str()).collect();
            prop_assert_eq!(&e, &elements);
            let d = rmsd(&a.structure, f).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, rmsd(f, &a.structure).unwrap());
        }
        prop_assert_eq!(parse_trajectory(&write_trajectory(&t1)).unwrap(), t1);
    }

    #[test]
    fn stack_follows_rotation(seed in any::<u64>(), r in arb_rotation()) {
        let s = small_protein(seed);
        let spec = GridConfig::default().grid_for(&s).unwrap();
        let cfg = PotentialConfig::default();
        let stack = compute_stack(&s, &spec, &cfg).unwrap();
        let moved = compute_stack(&s.rotated(r, spec.center()), &spec, &cfg).unwrap();
        for c in 0..CHANNEL_COUNT {
            prop_assert!(stack.channels()[c].values().iter().all(|v| v.is_finite()));
            prop_assert_eq!(&moved.channels()[c], &rotate_field(&stack.channels()[c], r).unwrap());
        }
    }

    #[test]
    fn stack_ignores_joint_translation(seed in any::<u64>(), shift in prop::array::uniform3(-20i32..20)) {
        let s = small_protein(seed);
        let spec = GridConfig::default().grid_for(&s).unwrap();
        let d = shift.map(|x| x as f64 * spec.spacing());
        let o = spec.origin();
        let shifted = GridSpec::new([o[0] + d[0], o[1] + d[1], o[2] + d[2]], spec.spacing(), spec.dims()).unwrap();
        let cfg = PotentialConfig::default();
        let a = compute_stack(&s, &spec, &cfg).unwrap();
        let b = compute_stack(&s.translated(d), &shifted, &cfg).unwrap();
        for c in 0..CHANNEL_COUNT {
            prop_assert_eq!(a.channels()[c].values(), b.channels()[c].values());
        }
    }

    #[test]
    fn prediction_is_equivariant_and_repeatable(seed in any::<u64>(), r in arb_rotation(), params in arb_params()) {
        let s = small_protein(seed);
        let config = DetectorConfig::default();
        let spec = config.grid.grid_for(&s).unwrap();
        let a = predict_on(&s, &spec, &params, &config).unwrap();
        prop_assert_eq!(&a, &predict_on(&s, &spec, &params, &config).unwrap());
        let (lo, hi) = a.psi.min_max();
        prop_assert!(lo >= 0.0 && hi <= 1.0);
        let moved = predict_on(&s.rotated(r, spec.center()), &spec, &params, &config).unwrap();
        prop_assert_eq!(&moved.global_mask, &rotate_mask(&a.global_mask, r).unwrap());
        prop_assert_eq!(moved.pockets.len(), a.pockets.len());
    }
}
