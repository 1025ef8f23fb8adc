mod common;

use common::random_instance;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdot_core::diagnostics::{
    annulus_density, cheeger_constant, cheeger_constant_sampled, graph_from_hessian, rate_analysis_residuals,
    second_eigenvalue, verify_cheeger_inequality, RadialProfile, WeightedGraph,
};
use sdot_core::functional::eval_hessian;
use sdot_core::oracle::{mc_masses, RngSpec};
use sdot_core::{Point, TargetMeasure};

/// Recursive subset enumeration, written independently of the bitmask loop.
fn brute_cheeger(w: &DMatrix<f64>) -> f64 {
    fn rec(w: &DMatrix<f64>, k: usize, side: &mut Vec<bool>, best: &mut f64) {
        let n = w.nrows();
        if k == n {
            let inside = side.iter().filter(|&&s| s).count();
            if inside == 0 || inside == n {
                return;
            }
            let mut cut = 0.0;
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..n {
                let d: f64 = w.row(i).sum();
                if side[i] {
                    a += d;
                } else {
                    b += d;
                }
                for j in 0..n {
                    if side[i] && !side[j] {
                        cut += w[(i, j)];
                    }
                }
            }
            let r = if cut == 0.0 { 0.0 } else { cut / a.min(b) };
            *best = best.min(r);
            return;
        }
        for s in [false, true] {
            side.push(s);
            rec(w, k + 1, side, best);
            side.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(w, 0, &mut Vec::new(), &mut best);
    best
}

fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let x = rng.random_range(0.01..2.0);
                w[(i, j)] = x;
                w[(j, i)] = x;
            }
        }
    }
    w
}

#[test]
fn cheeger_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let p = rng.random_range(0.2..1.0);
        let w = random_graph(&mut rng, n, p);
        let g = WeightedGraph::new(w.clone()).unwrap();
        let exact = cheeger_constant(&g).unwrap();
        let brute = brute_cheeger(&w);
        assert!((exact - brute).abs() <= 1e-12 * brute.max(1.0), "{exact} vs {brute}");
        let report = verify_cheeger_inequality(&g).unwrap();
        assert!(report.holds, "{report:?}");
        assert!(cheeger_constant_sampled(&g, 3, 200) >= exact - 1e-15);
    }
}

#[test]
fn lambda2_vanishes_exactly_on_disconnected_graphs() {
    let mut w = DMatrix::zeros(4, 4);
    w[(0, 1)] = 1.0;
    w[(1, 0)] = 1.0;
    w[(2, 3)] = 0.5;
    w[(3, 2)] = 0.5;
    let g = WeightedGraph::new(w).unwrap();
    assert_eq!(cheeger_constant(&g).unwrap(), 0.0);
    assert!(second_eigenvalue(&g.laplacian()).abs() < 1e-14);
}

#[test]
fn cheeger_inequality_on_hessian_graphs() {
    for seed in 0..15 {
        let n = 4 + (seed as usize % 9);
        let inst = random_instance(400 + seed, n, 0.01);
        let h = eval_hessian(&inst.density, &inst.targets, &inst.psi).unwrap();
        let g = graph_from_hessian(&h);
        let report = verify_cheeger_inequality(&g).unwrap();
        assert!(report.holds, "seed {seed}: {report:?}");
        assert!(report.lambda2 > 0.0, "seed {seed}: {report:?}");
    }
}

#[test]
fn annulus_density_has_unit_mass_and_a_hole() {
    let d = annulus_density(1.0, 2.0, &RadialProfile::Tent, 64).unwrap();
    assert!((d.mass(d.hull()) - 1.0).abs() < 1e-12);
    assert_eq!(d.value_at(Point::new(0.3, -0.4)).unwrap(), 0.0);
    assert!(d.value_at(Point::new(1.5, 0.0)).unwrap() > 0.0);

    // Monte Carlo over the bounding square of the disc
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 400_000;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..n {
        let x = Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let v = 16.0 * d.value_at(x).unwrap_or(0.0);
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let stderr = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - 1.0).abs() < 4.0 * stderr, "{mean} ± {stderr}");

    // one site takes everything, and Monte Carlo agrees trivially
    let t = TargetMeasure::uniform(vec![Point::new(0.0, 0.0)]).unwrap();
    let est = mc_masses(&d, &t, &[0.0], RngSpec { seed: 1, sample_count: 1000 });
    assert_eq!(est.estimates, vec![1.0]);
}

#[test]
fn annulus_radial_marginal_follows_profile() {
    let d = annulus_density(1.0, 2.0, &RadialProfile::Tent, 128).unwrap();
    // the tent puts mass 1/2 on each side of the mid radius
    let inner = sdot_core::ConvexPolygon::regular(Point::zeros(), 1.5, 128).unwrap();
    let m = d.mass(&inner);
    assert!((m - 0.5).abs() < 0.02, "{m}");
}

#[test]
fn annulus_rejects_bad_input() {
    assert!(annulus_density(0.0, 2.0, &RadialProfile::Tent, 64).is_err());
    assert!(annulus_density(2.0, 1.0, &RadialProfile::Tent, 64).is_err());
    let convex = RadialProfile::Tabulated(vec![(1.0, 0.0), (1.5, 0.1), (2.0, 1.0)]);
    assert!(annulus_density(1.0, 2.0, &convex, 64).is_err());
    let jump = RadialProfile::Tabulated(vec![(1.0, 0.5), (2.0, 0.5)]);
    assert!(annulus_density(1.0, 2.0, &jump, 64).is_err());
    let ok = RadialProfile::Tabulated(vec![(1.0, 0.0), (1.5, 1.0), (2.0, 1.2)]);
    assert!(annulus_density(1.0, 2.0, &ok, 64).is_ok());
}

#[test]
fn rate_analysis_on_synthetic_sequences() {
    let quadratic = [1e-1, 1e-2, 1e-4, 1e-8];
    assert!(rate_analysis_residuals(&quadratic).unwrap().quadratic_tail_detected);
    let linear = [1.0, 0.5, 0.25, 0.125];
    let a = rate_analysis_residuals(&linear).unwrap();
    assert!(!a.quadratic_tail_detected);
    assert!((a.linear_phase_ratio - 0.5).abs() < 1e-15);
    assert!(rate_analysis_residuals(&[1.0, 0.5]).is_err());
}
