use urllc_core::fading::{empirical_energy_cdf, EnsembleSpec};
use urllc_core::oracle::{estimate_outage, LinkSpec};
use urllc_core::protocol::{ProtocolConfig, Scheme, UncertaintyBudget};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let cfg = ProtocolConfig::new(Scheme::XorCow, 6).with_repetitions(2, 1);
    let b = UncertaintyBudget::new(0.01, 1e-3, 1e-3);
    let run = |threads| pool(threads).install(|| estimate_outage(&cfg, LinkSpec::SnrDb(2.0), &b, 50_000, 9).unwrap());
    assert_eq!(run(1), run(3));
}

#[test]
fn energy_samples_do_not_depend_on_thread_count() {
    let spec = EnsembleSpec { n_scatterers: 7, master_seed: 5, ..EnsembleSpec::default() };
    let run = |threads| pool(threads).install(|| empirical_energy_cdf(&spec, 20_000).unwrap());
    assert_eq!(run(1), run(4));
}

#[test]
fn different_seeds_differ() {
    let cfg = ProtocolConfig::new(Scheme::OccupyCow, 5);
    let a = estimate_outage(&cfg, LinkSpec::Probability(0.3), &UncertaintyBudget::ZERO, 20_000, 1).unwrap();
    let b = estimate_outage(&cfg, LinkSpec::Probability(0.3), &UncertaintyBudget::ZERO, 20_000, 2).unwrap();
    assert_ne!(a.failures, b.failures);
}
