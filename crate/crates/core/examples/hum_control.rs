//! Observability Gramian, least-norm (HUM) control and the contraction
//! control for the linearized damped wave.

use mixlab::config::ExperimentConfig;
use mixlab::mixing::random_state;
use mixlab::rng::stream;

fn main() -> mixlab::Result<()> {
    let cfg = ExperimentConfig::parse("[domain]\nmodes = 16\n", &[])?;
    let sys = cfg.control_system()?;
    let gram = sys.assemble_gramian(None)?;
    println!("T = {}  m = {}  N = {}  Gramian {}x{}", sys.horizon, sys.cut.m, sys.cut.n, gram.dim(), gram.dim());
    println!("observability min eigenvalue {:.3e}", gram.observability_min_eig());

    for i in 0..4 {
        let v0 = random_state(sys.domain(), 1.0, 1.0, &mut stream(5, i));
        let hum = sys.hum_min_norm_control(&gram, None, &v0)?;
        let c = sys.contractibility_control(&gram, None, &v0)?;
        println!(
            "v0 #{i}: HUM residual {:.1e} cost {:.3e} | contraction ratio {:.4} (free {:.4})",
            hum.residual, hum.cost, c.ratio, c.free_ratio
        );
    }
    Ok(())
}
