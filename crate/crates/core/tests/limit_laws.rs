use rayon::prelude::*;
use stable_carma::carma_model::ParamFamily;
use stable_carma::limit_diagnostics::acvf_limit_params;
use stable_carma::pathsim::{euler_maruyama, exact_recursion, SimConfig};
use stable_carma::stable_levy::{RngStream, StableParams};

fn quantile(v: &mut [f64], p: f64) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[(p * (v.len() - 1) as f64).round() as usize]
}

#[test]
fn ou_marginal_tail_index() {
    // every Euler step is observed
    let h = 0.01;
    let spec = ParamFamily::ou().spec(&[-1.0], h).unwrap();
    let noise = StableParams::symmetric(1.5, 1.0).unwrap();
    let cfg = SimConfig::new(1_000_000)
        .with_step(h)
        .with_delta(h)
        .with_burn_in(50.0);
    let y = euler_maruyama(&spec, &noise, &cfg, &mut RngStream::new(31, 0))
        .unwrap()
        .values;
    let mut a: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let ratio = quantile(&mut a, 0.999) / quantile(&mut a, 0.99);
    let expect = 10f64.powf(1.0 / 1.5);
    assert!((ratio / expect - 1.0).abs() < 0.25, "{ratio} vs {expect}");
}

#[test]
fn ou_lag_zero_acvf_matches_limit_quartiles() {
    let (alpha, n) = (1.5, 5000usize);
    let fam = ParamFamily::ou();
    let spec = fam.spec(&[-1.0], 1.0).unwrap();
    let noise = StableParams::symmetric(alpha, 1.0).unwrap();
    let cfg = SimConfig::new(n).with_burn_in(50.0);
    let mut stats: Vec<f64> = (0..4000u64)
        .into_par_iter()
        .map(|r| {
            let y = exact_recursion(&spec, &noise, &cfg, &mut RngStream::new(32, r))
                .unwrap()
                .values;
            (n as f64).powf(-2.0 / alpha) * y.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    let s = acvf_limit_params(&fam, &[-1.0], alpha, 1.0, 1.0, 0)
        .unwrap()
        .params()
        .unwrap()
        .sampler();
    let mut rng = RngStream::new(32, 1 << 40);
    let mut draws: Vec<f64> = (0..200_000).map(|_| s.draw(&mut rng)).collect();
    for p in [0.25, 0.5, 0.75] {
        let (e, l) = (quantile(&mut stats, p), quantile(&mut draws, p));
        assert!((e / l - 1.0).abs() < 0.08, "p={p}: {e} vs {l}");
    }
}
