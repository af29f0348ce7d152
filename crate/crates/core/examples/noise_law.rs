//! Degenerate bounded noise: amplitude rules, the amplitude bound and draws.

use mixlab::noise::{alpha_t, DensityKind, NoiseSpec};
use mixlab::rng::stream;
use mixlab::spectral::{Domain, Profile, Side, Strip};
use std::f64::consts::PI;

fn main() -> mixlab::Result<()> {
    let d = Domain::interval(PI, 16, 4)?;
    let chi = Profile::Strip(Strip { amplitude: 1.0, axis: 0, side: Side::High, width: 0.3 * PI, transition: 0.1 * PI });
    let (b0, t) = (1.0, 15.0);
    for (name, spec) in [
        ("geometric", NoiseSpec::geometric(&d, b0, t, 4, 0.9, DensityKind::Epanechnikov, chi.clone())?),
        ("flat", NoiseSpec::flat(&d, b0, t, 4, 0.9, DensityKind::RaisedCosine, chi.clone())?),
    ] {
        let (sum, ok) = spec.check_amplitude_constraint(&d, b0);
        println!("{name:<9} b_11 = {:.4}  amplitude sum {sum:.4} (bound {:.4}) ok={ok}", spec.amplitudes[0][0], b0 * t.sqrt());
    }

    let too_big = NoiseSpec::explicit(t, vec![vec![5.0]], DensityKind::Epanechnikov, chi.clone());
    println!("explicit b_11 = 5: {}", too_big.validate(&d, b0).unwrap_err());

    let spec = NoiseSpec::geometric(&d, b0, t, 4, 0.9, DensityKind::Epanechnikov, chi)?;
    let mut rng = stream(11, 0);
    let (draw, signal) = spec.sample_noise(&d, 1500, &mut rng);
    println!("theta row 0: {:?}", draw.theta[0]);
    println!("sup_t ||eta(t)||_L2 = {:.4}   support radius {:.4}", signal.sup_l2(), spec.support_radius(&d));
    println!("alpha_2^T at t = 0, T/2, T: {:.4} {:.4} {:.4}", alpha_t(2, 0.0, t), alpha_t(2, t / 2.0, t), alpha_t(2, t, t));
    Ok(())
}
