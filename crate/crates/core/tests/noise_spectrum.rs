use ecg_synth::noise::{generate_noise, periodogram, NoiseSpec};

fn mean_periodogram(spec: &NoiseSpec, seeds: u64) -> Vec<f64> {
    let mut acc = vec![0.0; spec.n_samples / 2 + 1];
    for seed in 0..seeds {
        let x = generate_noise(spec, seed).unwrap();
        for (a, p) in acc.iter_mut().zip(periodogram(&x)) {
            *a += p;
        }
    }
    acc.iter().map(|a| a / seeds as f64).collect()
}

// 4000 realizations keep the per-bin standard error near 1.6%, so a 10%
// bin-wise tolerance is a real test of the scaling rather than of luck.
#[test]
fn empirical_psd_matches_analytic_bin_wise() {
    for (rho, alpha, sigma2) in [
        (1.0, 1.0, 0.0),
        (4e-3 * 0.67f64.powi(2), 0.67, 0.17e-3f64.powi(2)),
        (0.0, 0.0, 2.0),
    ] {
        let spec = NoiseSpec {
            rho,
            alpha,
            sigma2,
            n_samples: 2048,
            fs: 250.0,
        };
        let emp = mean_periodogram(&spec, 4000);
        let freqs = spec.frequencies();
        let analytic: Vec<f64> = freqs.iter().map(|&f| spec.psd(f)).collect();
        let floor = analytic[1..].iter().cloned().fold(f64::INFINITY, f64::min);
        let mut checked = 0;
        for k in 1..analytic.len() {
            if analytic[k] > 10.0 * floor || rho == 0.0 {
                checked += 1;
                let rel = emp[k] / analytic[k] - 1.0;
                assert!(
                    rel.abs() < 0.10,
                    "rho={rho} alpha={alpha}: bin {k} ({} Hz) off by {rel}",
                    freqs[k]
                );
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn brown_noise_increments_are_white() {
    let spec = NoiseSpec {
        rho: 1.0,
        alpha: 2.0,
        sigma2: 0.0,
        n_samples: 1 << 14,
        fs: 250.0,
    };
    let mut acc = vec![0.0; (spec.n_samples - 1) / 2 + 1];
    for seed in 0..100 {
        let x = generate_noise(&spec, seed).unwrap();
        let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        for (a, p) in acc.iter_mut().zip(periodogram(&dx)) {
            *a += p;
        }
    }
    let m = spec.n_samples - 1;
    let (lx, ly): (Vec<f64>, Vec<f64>) = (1..acc.len())
        .map(|k| (k as f64 * spec.fs / m as f64, acc[k]))
        .filter(|(f, _)| (0.1..=10.0).contains(f))
        .map(|(f, p)| (f.log10(), p.log10()))
        .unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(slope.abs() <= 0.15, "increment slope {slope}");
}

#[test]
fn output_mean_is_small() {
    let spec = NoiseSpec {
        rho: 0.0,
        alpha: 0.0,
        sigma2: 1.0,
        n_samples: 10_000,
        fs: 250.0,
    };
    for seed in 0..20 {
        let x = generate_noise(&spec, seed).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt());
    }
}
