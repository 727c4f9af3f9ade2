use urllc_core::fading::{energy_bandwidth, psd_estimate, EnsembleSpec, PsdOptions};

fn spectrum(seed: u64) -> urllc_core::fading::Spectrum {
    let spec = EnsembleSpec {
        master_seed: seed,
        room_width: 40.0,
        room_height: 40.0,
        ..EnsembleSpec::default()
    };
    let opts = PsdOptions {
        duration: 1.5,
        sample_rate: 4000.0,
        n_traces: 50,
        segment_len: None,
    };
    psd_estimate(&spec, 10.0, &opts).unwrap()
}

#[test]
fn doppler_band_holds_the_energy() {
    let s = spectrum(21);
    let edge = 1.0 / EnsembleSpec::default().wavelength();
    let bin = s.frequencies[1] - s.frequencies[0];
    // Hann main lobe spreads each line over two bins on either side
    let inside: f64 = s
        .frequencies
        .iter()
        .zip(&s.power_density)
        .filter(|(&f, _)| f <= edge + 2.0 * bin)
        .map(|(_, &p)| p * bin)
        .sum();
    let total: f64 = s.power_density.iter().map(|p| p * bin).sum();
    assert!(inside / total >= 0.99, "in-band fraction {}", inside / total);
}

#[test]
fn bandwidths_are_ordered_and_near_the_edge() {
    let s = spectrum(22);
    let edge = 1.0 / EnsembleSpec::default().wavelength();
    let b: Vec<f64> = [0.9, 0.99, 0.999].iter().map(|&f| energy_bandwidth(&s, f).unwrap()).collect();
    assert!(b[0] <= b[1] && b[1] <= b[2]);
    assert!(b[1] > 0.8 * edge && b[1] < 1.2 * edge, "99% bandwidth {} vs edge {edge}", b[1]);
}
