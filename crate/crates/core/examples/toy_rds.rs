//! The affine toy system x -> x/2 + b, b uniform on {0, 1}: its law converges
//! to Uniform[0, 2] at rate 2^-n in W1.

use mixlab::mixing::{fit_decay_above, wasserstein1_to_uniform};
use mixlab::rds::{attainable_probe, ensemble_paths, iterate, ToyAffineRds};
use mixlab::runner::{toy_limits, toy_null_floor};

fn main() -> mixlab::Result<()> {
    let toy = ToyAffineRds::default();
    println!("path from 0 with noise 1,0,1: {:?}", iterate(&toy, &0.0, &[1.0, 0.0, 1.0]));
    println!("attainable set at depth 2: {:?}", attainable_probe(&toy, &[0.0], 2, 64, 0)?.points);

    let ens = ensemble_paths(&toy, &0.0, 12, 10_000, 1);
    let w1: Vec<f64> = ens.iter().map(|e| wasserstein1_to_uniform(e, 0.0, 2.0)).collect::<mixlab::Result<_>>()?;
    let (floor, _) = toy_null_floor(10_000, 20, 2)?;
    for (n, w) in w1.iter().enumerate() {
        println!("n {n:>2}  W1 {w:.5}  2^-n {:.5}", 0.5f64.powi(n as i32));
    }
    let t: Vec<f64> = (0..w1.len()).map(|n| n as f64).collect();
    let fit = fit_decay_above(&t, &w1, 2.0 * floor)?;
    println!("fitted rate {:.4}  (ln 2 = {:.4})", fit.rate, std::f64::consts::LN_2);

    let lim = toy_limits(&toy, 500, 200, 3)?;
    println!("time average {:.4} +- {:.4}, CLT variance {:.3}, KS p {:.3}", lim.mean, lim.se, lim.sigma2, lim.ks_p);
    Ok(())
}
