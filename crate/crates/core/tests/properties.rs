use proptest::prelude::*;
use slopesense::experiments::{
    run_array_trials, shmoo, ArrayConfig, FlavorMix, Knob, Pattern, Scheme, ShmooSpec, SimParams,
};
use slopesense::variation::{ChipSample, SeedTree};

fn lo(n_bits: u64) -> ArrayConfig {
    ArrayConfig { n_bits, flavor: FlavorMix::Lo, pattern: Pattern::Random }
}

fn fails(scheme: Scheme, p: &SimParams, tree: &SeedTree, n_bits: u64) -> u64 {
    run_array_trials(&lo(n_bits), scheme, p, tree, &ChipSample::nominal()).unwrap().fails()
}

#[test]
fn failures_do_not_grow_with_tmr() {
    let tree = SeedTree::new(3);
    // a stressed slope corner so the slope count is not trivially zero
    let slope_base = Knob::FClk.apply(&SimParams::default(), 500.0).unwrap();
    for (scheme, base) in [(Scheme::Conv, SimParams::default()), (Scheme::SlopeDouble, slope_base)] {
        let counts: Vec<u64> = [60.0, 80.0, 100.0, 120.0]
            .iter()
            .map(|&t| fails(scheme, &Knob::Tmr.apply(&base, t).unwrap(), &tree, 4096))
            .collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{scheme:?}: {counts:?}");
        assert!(counts[0] > 0, "{scheme:?}: {counts:?}");
    }
}

#[test]
fn shmoo_cells_do_not_depend_on_the_rest_of_the_grid() {
    let tree = SeedTree::new(5);
    let params = SimParams::default();
    let full = ShmooSpec {
        vdd_values: vec![0.9, 1.0, 1.1],
        f_values: vec![100.0, 300.0, 500.0],
        n_chips: 3,
        n_bits: 512,
        ..ShmooSpec::default()
    };
    let sub = ShmooSpec { vdd_values: vec![1.1, 0.9], f_values: vec![500.0], ..full.clone() };
    let g = shmoo(&full, &lo(512), &params, &tree).unwrap();
    let s = shmoo(&sub, &lo(512), &params, &tree).unwrap();
    assert_eq!(s.fail_chips[0][0], g.fail_chips[2][2]);
    assert_eq!(s.fail_chips[1][0], g.fail_chips[0][2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn results_do_not_depend_on_pool_size(
        seed in any::<u64>(),
        threads in 2usize..9,
        scheme_idx in 0usize..3,
        f_clk in 100.0f64..500.0,
    ) {
        let scheme = [Scheme::Conv, Scheme::SlopeSingle, Scheme::SlopeDouble][scheme_idx];
        let tree = SeedTree::new(seed);
        let p = Knob::FClk.apply(&SimParams::default(), f_clk).unwrap();
        let array = ArrayConfig { n_bits: 600, flavor: FlavorMix::Both, pattern: Pattern::Random };
        let in_pool = |n: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| run_array_trials(&array, scheme, &p, &tree, &ChipSample::nominal()).unwrap())
        };
        prop_assert_eq!(in_pool(1), in_pool(threads));
    }
}
