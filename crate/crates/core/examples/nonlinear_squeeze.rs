//! Squeezing two nearby solutions of the cubic equation with a control built
//! from the linearization around one of them.

use mixlab::config::ExperimentConfig;
use mixlab::control::{calibrate_squeeze_radius, squeeze};
use mixlab::mixing::random_state;
use mixlab::rng::stream;

fn main() -> mixlab::Result<()> {
    let cfg = ExperimentConfig::parse("[domain]\nmodes = 16\n", &[])?;
    let sys = cfg.control_system()?;
    let nl = sys.model.with_cubic(true);
    let noise = cfg.noise_spec()?;
    let d = sys.domain().clone();

    let mut rng = stream(2, 0);
    let uhat0 = random_state(&d, 1.0, 1.0, &mut rng);
    let (_, h) = noise.sample_noise(&d, sys.n_steps(), &mut rng);
    let dir = random_state(&d, 1.0, 1.0, &mut rng);

    let cal = calibrate_squeeze_radius(&sys, &nl, &[(uhat0.clone(), h.clone())], std::slice::from_ref(&dir), 0.25, 10.0, 0.5, 10)?;
    println!("edge {:.3}  d = {:.3}  worst ratio at edge {:.4}", cal.edge, cal.d, cal.worst_ratio);

    for frac in [0.01, 0.1, 0.5, 1.0] {
        let u0 = uhat0.add(&dir.scaled(frac * cal.d / d.h_norm(&dir)));
        let r = squeeze(&sys, &nl, &u0, &uhat0, &h, cal.d)?;
        println!("gap {:.3e} -> {:.3e}  ratio {:.4}  cost {:.3e}", r.input_gap, r.output_gap, r.ratio, r.cost);
    }
    Ok(())
}
