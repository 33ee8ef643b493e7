use proptest::prelude::*;

use seglink::stats::{normalize, pdf_intersections, t_statistic, tv_distance, LutConfig, NormalParams, TvLut};

fn normal() -> impl Strategy<Value = NormalParams> {
    (-50.0..50.0f64, 0.05..20.0f64).prop_map(|(mu, sigma)| NormalParams::new(mu, sigma))
}

fn lut() -> &'static TvLut {
    static LUT: std::sync::OnceLock<TvLut> = std::sync::OnceLock::new();
    LUT.get_or_init(|| TvLut::build(LutConfig::default()).unwrap())
}

proptest! {
    #[test]
    fn tv_is_symmetric_and_bounded(a in normal(), b in normal()) {
        let ab = tv_distance(a, b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - tv_distance(b, a)).abs() <= 1e-12);
    }

    #[test]
    fn tv_is_zero_only_for_identical(a in normal(), db in 1e-3..5.0f64) {
        prop_assert_eq!(tv_distance(a, a), 0.0);
        let moved = NormalParams::new(a.mu + db * a.sigma, a.sigma);
        prop_assert!(tv_distance(a, moved) > 0.0);
    }

    #[test]
    fn tv_is_invariant_under_affine_maps(a in normal(), b in normal(), shift in -100.0..100.0f64, scale in 0.1..10.0f64) {
        let map = |p: NormalParams| NormalParams::new(p.mu * scale + shift, p.sigma * scale);
        prop_assert!((tv_distance(a, b) - tv_distance(map(a), map(b))).abs() <= 1e-9);
        let (n, m) = (normalize(a, b), normalize(map(a), map(b)));
        prop_assert!((n.mu_prime - m.mu_prime).abs() <= 1e-9 * n.mu_prime.max(1.0));
        prop_assert!((n.sigma_prime - m.sigma_prime).abs() <= 1e-9 * n.sigma_prime);
    }

    #[test]
    fn normalize_is_symmetric_and_reduces_exactly(a in normal(), b in normal()) {
        let n = normalize(a, b);
        prop_assert_eq!(n, normalize(b, a));
        prop_assert!(n.sigma_prime >= 1.0);
        let reduced = tv_distance(NormalParams::new(0.0, 1.0), NormalParams::new(n.mu_prime, n.sigma_prime));
        prop_assert!((reduced - tv_distance(a, b)).abs() <= 1e-9);
    }

    #[test]
    fn crossings_are_where_densities_meet(a in normal(), b in normal()) {
        let (x1, x2) = pdf_intersections(a, b);
        prop_assert!(x1 <= x2);
        for x in [x1, x2] {
            let (fa, fb) = (a.pdf(x), b.pdf(x));
            // Meaningful only where the densities are not both negligible.
            if fa.max(fb) > 1e-12 {
                prop_assert!((fa - fb).abs() <= 1e-6 * fa.max(fb), "{x}: {fa} vs {fb}");
            }
        }
    }

    #[test]
    fn lut_tracks_exact_distance(mu in 0.0..8.0f64, sigma in 1.0..8.0f64) {
        let exact = tv_distance(NormalParams::new(0.0, 1.0), NormalParams::new(mu, sigma));
        let p = normalize(NormalParams::new(0.0, 1.0), NormalParams::new(mu, sigma));
        prop_assert!((lut().lookup(p) - exact).abs() <= 1e-3);
    }

    #[test]
    fn t_statistic_is_antisymmetric(a in normal(), b in normal(), m in 2usize..64) {
        let t = t_statistic(a, b, m).unwrap();
        prop_assert!((t + t_statistic(b, a, m).unwrap()).abs() <= 1e-9 * t.abs().max(1.0));
    }
}

#[test]
fn lut_clamps_outside_its_range() {
    let far = tv_distance(NormalParams::new(0.0, 1.0), NormalParams::new(8.0, 1.0));
    let got = lut().distance(NormalParams::new(0.0, 1.0), NormalParams::new(100.0, 1.0));
    assert!((got - far).abs() < 1e-12);
}

#[test]
fn t_statistic_rejects_degenerate_input() {
    let p = NormalParams::new(1.0, 1.0);
    assert!(t_statistic(p, p, 1).is_err());
}
