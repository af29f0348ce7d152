//! Maximal coupling of shifted noise and the extension chain on the diagonal.

use mixlab::config::ExperimentConfig;
use mixlab::coupling::{calibrate_delta, maximal_coupling, run_extension, tv_coordinate};
use mixlab::mixing::random_state;
use mixlab::noise::DensityKind;
use mixlab::rng::stream;

fn main() -> mixlab::Result<()> {
    let dens = DensityKind::Epanechnikov;
    let h = 0.2;
    let mut rng = stream(1, 0);
    let n = 20_000;
    let miss = (0..n).filter(|_| !maximal_coupling(dens, h, &mut rng).2).count();
    println!("shift {h}: TV {:.5} (closed form {:.5}), mismatch frequency {:.5}", tv_coordinate(dens, h), 0.75 * h - h.powi(3) / 16.0, miss as f64 / n as f64);

    let cfg = ExperimentConfig::parse("[domain]\nmodes = 16\n", &[])?;
    let setup = cfg.coupling_setup()?;
    let d = setup.domain().clone();
    let x = random_state(&d, 1.0, 1.0, &mut stream(2, 0));
    let dir = random_state(&d, 1.0, 1.0, &mut stream(3, 0));
    let delta = calibrate_delta(&setup, &x, &dir, 0.25)?;
    println!("diagonal radius delta = {delta:.3e}");

    let y = x.add(&dir.scaled(0.5 * delta / d.h_norm(&dir)));
    let run = run_extension(&setup, &x, &y, 6, delta, &mut stream(4, 0))?;
    for r in &run.records {
        println!("n {}  gap {:.3e}  {}  identical {}", r.n, r.gap, r.branch.name(), r.identical_shift);
    }
    println!("tau {:?}  sigma {:?}", run.tau, run.sigma);
    Ok(())
}
