//! Damped cubic wave with a forcing: energy flux balance under step refinement
//! and unforced energy decay.

use mixlab::mixing::{fit_exponential_decay, random_state};
use mixlab::rng::stream;
use mixlab::spectral::{Domain, Profile, Side, Strip};
use mixlab::wave::{ForceSignal, SolverConfig, WaveModel};
use std::f64::consts::PI;

fn main() -> mixlab::Result<()> {
    let d = Domain::interval(PI, 16, 4)?;
    let a = Profile::Strip(Strip { amplitude: 1.0, axis: 0, side: Side::High, width: 0.4 * PI, transition: 0.1 * PI });
    let mut rng = stream(3, 0);
    let u0 = random_state(&d, 1.0, 1.0, &mut rng);

    let mut prev: Option<f64> = None;
    for dt in [0.02, 0.01, 0.005] {
        let model = WaveModel::new(d.clone(), a.clone(), SolverConfig::new(dt))?;
        let n = model.steps_for(2.0);
        let f = ForceSignal::from_fn(dt, n, |t| {
            let mut g = d.zeros();
            g.coeffs[0] = (3.0 * t).sin();
            g.coeffs[1] = 0.5 * t.cos();
            g
        });
        let traj = model.evolve(&u0, &f)?;
        let r = model.flux_residual(&traj, Some(&f));
        match prev {
            Some(p) => println!("dt {dt:<6} flux residual {r:.3e}  order {:.2}", (p / r).log2()),
            None => println!("dt {dt:<6} flux residual {r:.3e}"),
        }
        prev = Some(r);
    }

    let model = WaveModel::new(d.clone(), a, SolverConfig::new(0.01))?;
    let traj = model.evolve_free(&u0, 20.0)?;
    let (t, e): (Vec<f64>, Vec<f64>) = traj.times.iter().zip(&traj.states).step_by(100).map(|(t, s)| (*t, model.energy(s))).unzip();
    let fit = fit_exponential_decay(&t, &e)?;
    println!("unforced energy decay rate {:.4} (residual {:.2e})", fit.rate, fit.residual);
    Ok(())
}
