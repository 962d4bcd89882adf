use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use dilate_core::channel::{
    kraus_from_choi, kraus_to_superop, reshuffle, reshuffle_matrix, trace_distance_matrices,
    DensityMatrix, KrausSet,
};
use dilate_core::dilation::{dilate, DilationOptions};
use dilate_core::generators::{
    evolve_state_master, presets, propagate_channel, LindbladSpec, PropagationOptions, TimeGrid,
    TimeProfile,
};
use dilate_core::linalg::{c, hermitian_part, max_abs, polar_unitary, CMatrix};
use dilate_core::verify::{compare_paths, evolve_dilated, EvolveOptions, SampledPath};

fn matrix_from(values: &[f64], d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| {
        c(values[2 * (i * d + j)], values[2 * (i * d + j) + 1])
    })
}

fn state_from(values: &[f64], d: usize) -> CMatrix {
    let g = matrix_from(values, d);
    let m = &g * g.adjoint();
    let tr = m.trace();
    m / tr
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reshuffle_is_an_involution(values in prop::collection::vec(-1.0f64..1.0, 2 * 81)) {
        for d in [2usize, 3] {
            let m = matrix_from(&values, d * d);
            let back = reshuffle_matrix(&reshuffle_matrix(&m, d), d);
            prop_assert!(max_abs(&(back - &m)) < 1e-15);
        }
    }

    #[test]
    fn trace_distance_is_a_bounded_metric(
        a in prop::collection::vec(-1.0f64..1.0, 18),
        b in prop::collection::vec(-1.0f64..1.0, 18),
        e in prop::collection::vec(-1.0f64..1.0, 18),
    ) {
        let (x, y, z) = (state_from(&a, 3), state_from(&b, 3), state_from(&e, 3));
        let xy = trace_distance_matrices(&x, &y);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&xy));
        prop_assert!((xy - trace_distance_matrices(&y, &x)).abs() < 1e-12);
        prop_assert!(trace_distance_matrices(&x, &x) < 1e-12);
        prop_assert!(xy <= trace_distance_matrices(&x, &z) + trace_distance_matrices(&z, &y) + 1e-12);
    }

    #[test]
    fn kraus_round_trip_through_the_choi_matrix(seed in any::<u64>(), rank in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2;
        // An isometry from d to d·rank gives a valid Kraus set.
        let v = polar_unitary(&gaussian_matrix(&mut rng, d * rank, d));
        let ops: Vec<CMatrix> = (0..rank).map(|k| v.rows(k * d, d).into_owned()).collect();
        let set = KrausSet::new(ops).unwrap();
        prop_assert!(set.completeness_residual() < 1e-12);
        let s = kraus_to_superop(&set);
        let rebuilt = kraus_to_superop(&kraus_from_choi(&reshuffle(&s), 1e-12));
        prop_assert!(max_abs(&(rebuilt.matrix() - s.matrix())) < 1e-12);
    }
}

#[test]
fn rk4_state_integration_is_fourth_order() {
    let spec = presets::amplitude_damping(1.0, 3.0);
    let rho = DensityMatrix::pure(&dilate_core::linalg::CVector::from_vec(vec![
        c(0.6, 0.0),
        c(0.0, 0.8),
    ]));
    let end = |steps: usize| {
        let g = TimeGrid::new(0.0, 2.0, steps).unwrap();
        evolve_state_master(&spec, &rho, &g)
            .unwrap()
            .states
            .pop()
            .unwrap()
    };
    let reference = end(4000);
    let error = |steps: usize| max_abs(&(end(steps) - &reference));
    let ratio = error(40) / error(80);
    assert!(
        (ratio.log2() - 4.0).abs() < 0.3,
        "observed order {}",
        ratio.log2()
    );
}

#[test]
fn random_lindblad_families_survive_the_pipeline_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let d = 2;
        let h = hermitian_part(&gaussian_matrix(&mut rng, d, d));
        let mut spec = LindbladSpec::empty(d)
            .with_hamiltonian(h, TimeProfile::constant(1.0))
            .unwrap();
        for _ in 0..2 {
            let l = gaussian_matrix(&mut rng, d, d) * c(0.5, 0.0);
            spec = spec.with_jump(l, TimeProfile::constant(1.0)).unwrap();
        }
        let grid = TimeGrid::new(0.0, 1.0, 2000).unwrap();
        let family = propagate_channel(&spec, &grid, PropagationOptions::default()).unwrap();
        let dil = dilate(&family, &DilationOptions::default()).unwrap();
        for n in 0..grid.len() {
            let sum: f64 = (0..dil.track.rank()).map(|k| dil.track.lambda(k, n)).sum();
            assert!((sum - d as f64).abs() < 1e-8);
        }
        assert!(dil.track.min_eigenvalue() > -1e-10);

        let start = 20;
        let tail = grid.tail_from(start).unwrap();
        let rho = DensityMatrix::new(
            state_from(&[0.3, 0.1, -0.7, 0.2, 0.5, -0.4, 0.9, 0.05], d),
            1e-12,
        )
        .unwrap();
        let opts = EvolveOptions {
            initial_unitary: Some(dil.path.unitaries[start].clone()),
            ..Default::default()
        };
        let sim = evolve_dilated(&SampledPath::new(&dil.path), &rho, &tail, &opts).unwrap();
        let oracle = evolve_state_master(&spec, &rho, &tail).unwrap();
        let report = compare_paths(&sim.reduced, &oracle, 0.0, 1e-6).unwrap();
        assert!(
            report.passed,
            "max trace distance {:e} at t = {}",
            report.max_distance, report.argmax_t
        );
    }
}
