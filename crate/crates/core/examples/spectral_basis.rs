//! Sine basis on (0, π): grid round trips, Sobolev norms and the energy.

use mixlab::spectral::{Domain, PhaseState, SpectralField};

fn main() -> mixlab::Result<()> {
    let d = Domain::interval(std::f64::consts::PI, 16, 4)?;
    println!("modes {}  grid points {}  lambda_max {}", d.n_modes(), d.grid_len(), d.lambda_max());

    // u = e_1 + e_3 / 9
    let mut u = d.zeros();
    u.coeffs[0] = 1.0;
    u.coeffs[2] = 1.0 / 9.0;
    let back = d.to_spectral(&d.to_grid(&u)?)?;
    let err = u.coeffs.iter().zip(&back.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("grid round trip error {err:.2e}");

    for s in [0.0, 0.5, 1.0, 4.0 / 7.0] {
        println!("||u||_H^{s:.3} = {:.6}", d.sobolev_norm(&u, s));
    }

    // u³ through the grid; odd products stay in the sine span
    let cube = d.multiply_fields(&d.multiply_fields(&u, &u)?, &u)?;
    println!("first coefficients of u^3: {:?}", &cube.coeffs[..5]);

    let state = PhaseState::new(u, SpectralField::from_vec(vec![0.5; 16]));
    println!("H norm {:.6}  energy {:.6}  quartic {:.6}", d.h_norm(&state), d.energy(&state), d.quartic(&state.u));
    Ok(())
}
