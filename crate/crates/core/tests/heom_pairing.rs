//! Link-pairing and convergence checks of the hierarchy against the exact
//! pure-dephasing solution.

use num_complex::Complex64 as C64;
use zeno_core::bath::SpectralDensity;
use zeno_core::heom::{build_zero_t_generator, evolve_sampled, HeomOptions, HierarchyState, LinkConvention};
use zeno_core::linalg::{DensityMatrix, StateVector};
use zeno_core::models::{biased_qubit, biased_qutrit, su2_coherent_state};
use zeno_core::oracle::DephasingKernel;
use zeno_core::zeno::{scan, tau_grid, BathSpec, SolverSettings, StepSize};

/// Worst |ρ_{+1,0}(t) − oracle| for a qutrit with a shifted Lorentzian.
fn qutrit_element_error(convention: LinkConvention) -> f64 {
    let eps = 1.0;
    let j = SpectralDensity::lorentzian(0.2, 0.8, 1.5).unwrap();
    let model = biased_qutrit(eps, 0.0);
    let psi = su2_coherent_state(2, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
    let rho0 = DensityMatrix::from_pure(&psi);
    let gen = build_zero_t_generator(&model, &j, 10, convention, HeomOptions::default()).unwrap();
    let times: Vec<f64> = (1..=12).map(|k| 0.5 * k as f64).collect();
    let traj = evolve_sampled(&gen, &HierarchyState::new(&gen, &rho0).unwrap(), &times, gen.suggested_dt()).unwrap();
    let kernel = DephasingKernel::new(j);
    let start = rho0.matrix().get(0, 1);
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let exact: C64 = start * kernel.element(eps, t, 1.0, 0.0).unwrap();
            (traj.reduced(k).unwrap().matrix().get(0, 1) - exact).norm()
        })
        .fold(0.0, f64::max)
}

#[test]
fn derived_pairing_reproduces_shifted_dephasing() {
    let err = qutrit_element_error(LinkConvention::Derived);
    assert!(err < 1e-5, "derived pairing error {err:.3e}");
}

#[test]
fn swapped_pairing_misses_shifted_dephasing() {
    let err = qutrit_element_error(LinkConvention::SwappedPairing);
    assert!(err > 1e-3, "swapped pairing unexpectedly close: {err:.3e}");
}

#[test]
fn mis_signed_links_miss_dephasing() {
    let err = qutrit_element_error(LinkConvention::MisSigned);
    assert!(err > 1e-3, "mis-signed links unexpectedly close: {err:.3e}");
}

fn dephasing_qubit_and_plus() -> (zeno_core::models::ModelSpec, StateVector) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (biased_qubit(1.0, 0.0), StateVector::new(vec![C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap())
}

#[test]
fn scan_is_invariant_under_step_halving() {
    let (model, psi) = dephasing_qubit_and_plus();
    let bath = BathSpec::lorentzian(SpectralDensity::lorentzian(0.5, 0.5, 0.0).unwrap());
    let grid = tau_grid(0.05, 20.0, 25, false).unwrap();
    let base = SolverSettings { dt: StepSize::Fixed(0.02), ..SolverSettings::default() };
    let half = SolverSettings { dt: StepSize::Fixed(0.01), ..base };
    let a = scan(&model, &bath, &psi, &grid, &base).unwrap();
    let b = scan(&model, &bath, &psi, &grid, &half).unwrap();
    for (ga, gb) in a.gamma.iter().zip(&b.gamma) {
        assert!((ga - gb).abs() < 1e-4, "{ga} vs {gb}");
    }
}

#[test]
fn error_does_not_grow_with_depth() {
    let (model, psi) = dephasing_qubit_and_plus();
    let j = SpectralDensity::lorentzian(0.5, 0.05, 0.0).unwrap();
    let kernel = DephasingKernel::new(j);
    let bath = BathSpec::lorentzian(j);
    let grid = tau_grid(0.5, 10.0, 20, false).unwrap();
    let mut previous = f64::INFINITY;
    for depth in [2usize, 4, 6, 8] {
        // one depth only: start = max = depth with an infinite tolerance
        let settings = SolverSettings { l_start: depth, l_max: depth, conv_tol: f64::INFINITY, ..Default::default() };
        let run = scan(&model, &bath, &psi, &grid, &settings).unwrap();
        let err = grid
            .iter()
            .zip(&run.gamma)
            .map(|(&tau, g)| (g - kernel.qubit_gamma(tau).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err <= previous, "L={depth}: error {err:.3e} above {previous:.3e}");
        previous = err;
    }
}

#[test]
fn markovian_coherence_rate() {
    let g0 = 0.5;
    let j = SpectralDensity::lorentzian(g0, 100.0 * g0, 0.0).unwrap();
    let (model, psi) = dephasing_qubit_and_plus();
    let gen = build_zero_t_generator(&model, &j, 4, LinkConvention::Derived, HeomOptions::default()).unwrap();
    let times: Vec<f64> = (0..=20).map(|k| 1.0 + 0.2 * k as f64).collect();
    let rho0 = DensityMatrix::from_pure(&psi);
    let traj = evolve_sampled(&gen, &HierarchyState::new(&gen, &rho0).unwrap(), &times, gen.suggested_dt()).unwrap();
    let logs: Vec<f64> = (0..times.len()).map(|k| traj.reduced(k).unwrap().matrix().get(0, 1).norm().ln()).collect();
    let n = times.len() as f64;
    let (mt, ml) = (times.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let cov: f64 = times.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let var: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let rate = -cov / var;
    assert!((rate / (2.0 * g0) - 1.0).abs() < 0.02, "rate {rate}");
}
