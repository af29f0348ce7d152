//! Ensemble of noisy wave chains: W1 distances of observables to the
//! long-run law and the fitted mixing rate.

use mixlab::config::ExperimentConfig;
use mixlab::mixing::{mixing_rate, random_state, ObservableSpec};
use mixlab::rng::stream;
use mixlab::spectral::PhaseState;

fn main() -> mixlab::Result<()> {
    let cfg = ExperimentConfig::parse("[domain]\nmodes = 8\n[noise]\nn = 4\nhorizon = 5\n[control]\nn = 4\n", &[])?;
    let chain = cfg.chain()?;
    let d = chain.domain().clone();
    let (members, steps) = (64, 12);

    let x0 = random_state(&d, 3.0, 1.0, &mut stream(1, 0));
    let a = chain.ensemble(&vec![x0; members], steps, 10)?;
    let b = chain.ensemble(&vec![d.zero_state(); members], steps, 11)?;
    let ens: Vec<Vec<PhaseState>> = (0..=steps).map(|k| a.iter().map(|r| r.states[k].clone()).collect()).collect();
    let reference: Vec<PhaseState> = b.iter().flat_map(|r| r.states[steps / 2..].iter().cloned()).collect();

    let obs = ObservableSpec::wave_default(&d, 3.0);
    for rep in mixing_rate(&ens, &obs, &reference, 7)? {
        let head: Vec<String> = rep.distances.iter().take(6).map(|x| format!("{x:.3}")).collect();
        let rate = rep.fit.map_or("-".to_string(), |f| format!("{:.3}", f.rate));
        println!("{:<13} W1 [{}] floor {:.3} rate {rate}", rep.observable, head.join(" "), rep.floor);
    }
    Ok(())
}
