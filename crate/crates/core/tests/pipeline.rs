use salmanip_core::image::rgb_to_lab;
use salmanip_core::patchdb::Thresholds;
use salmanip_core::pipeline::run_manipulation_observed;
use salmanip_core::saliency::{ContrastParams, SaliencyConfig};
use salmanip_core::synthetic::scene;
use salmanip_core::{
    compute_saliency, contrast_psi, run_manipulation, Error, ManipulationConfig, Mask, Mode, RgbImage, Termination,
};

fn small_cfg() -> ManipulationConfig {
    ManipulationConfig { max_db_iterations: 12, ..ManipulationConfig::default() }
}

#[test]
fn trace_bookkeeping() {
    let sc = scene(2, 56);
    for mode in [Mode::Enhance, Mode::Attenuate, Mode::Declutter] {
        let mut seen = Vec::new();
        let out = run_manipulation_observed(&sc.image, &sc.region, mode, &small_cfg(), &mut |e| seen.push(*e)).unwrap();
        let r = &out.report;
        assert_eq!(seen, r.trace);
        assert_eq!(r.trace[0].iteration, 0);
        assert_eq!(r.trace[0].psi, r.initial_psi);
        for w in r.trace.windows(2) {
            assert_eq!(w[1].iteration, w[0].iteration + 1);
            assert!(w[1].tau_plus >= w[0].tau_plus);
            assert!(w[1].tau_minus <= w[0].tau_minus);
        }
        for t in &r.trace {
            assert!((0.0..=1.0).contains(&t.tau_plus) && (0.0..=1.0).contains(&t.tau_minus));
            assert!((t.e_sal - (t.psi - 0.6).abs()).abs() < 1e-15);
        }
        assert!(r.final_psi.is_finite());
        if r.termination == Termination::Converged {
            assert!((r.final_psi - 0.6).abs() < 0.05);
        }
        assert_eq!(out.image.dimensions(), sc.image.dimensions());
    }
}

#[test]
fn same_seed_same_result() {
    let sc = scene(5, 48);
    let cfg = small_cfg();
    let (a, ra) = run_manipulation(&sc.image, &sc.region, Mode::Enhance, &cfg).unwrap();
    let (b, rb) = run_manipulation(&sc.image, &sc.region, Mode::Enhance, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(ra.same_outcome(&rb));
}

#[test]
fn keep_pixels_deviate_less() {
    let sc = scene(4, 56);
    let (_, r) = run_manipulation(&sc.image, &sc.region, Mode::Attenuate, &small_cfg()).unwrap();
    let dev = r.keep_deviation.expect("attenuate has keep pixels");
    assert!(dev.keep < dev.non_keep, "{dev:?}");
}

#[test]
fn already_at_target_returns_input() {
    let inside = |x: usize, y: usize| (20..30).contains(&x) && (20..30).contains(&y);
    let img = RgbImage::from_fn(50, 50, |x, y| if inside(x, y) { [220, 30, 30] } else { [100, 100, 100] });
    let region = Mask::from_fn(50, 50, inside);
    let s = compute_saliency(&rgb_to_lab(&img), &SaliencyConfig::default()).unwrap();
    let psi = contrast_psi(&s, &region, &ContrastParams::default()).unwrap();
    let cfg = ManipulationConfig { delta_s: psi, ..ManipulationConfig::default() };
    let (out, r) = run_manipulation(&img, &region, Mode::Enhance, &cfg).unwrap();
    assert_eq!(out, img);
    assert_eq!(r.termination, Termination::Converged);
    assert_eq!(r.trace.len(), 1);
}

#[test]
fn pinned_extreme_thresholds_leave_image_unchanged() {
    let sc = scene(7, 64);
    let cfg = ManipulationConfig {
        pinned_thresholds: Some(Thresholds::new(0.0, 1.0)),
        coarse_width: 30,
        ..ManipulationConfig::default()
    };
    let (out, r) = run_manipulation(&sc.image, &sc.region, Mode::Enhance, &cfg).unwrap();
    assert!(r.levels.len() > 1);
    for (a, b) in out.data().iter().zip(sc.image.data()) {
        assert!((*a as i16 - *b as i16).abs() <= 1);
    }
}

#[test]
fn input_errors() {
    let sc = scene(1, 40);
    let cfg = ManipulationConfig::default();
    let bad_mask = Mask::from_fn(30, 40, |x, _| x < 10);
    assert!(matches!(
        run_manipulation(&sc.image, &bad_mask, Mode::Enhance, &cfg),
        Err(Error::DimensionMismatch { .. })
    ));
    let empty = Mask::from_fn(40, 40, |_, _| false);
    let e = run_manipulation(&sc.image, &empty, Mode::Enhance, &cfg).unwrap_err();
    assert!(e.to_string().contains("degenerate region"), "{e}");
    let full = Mask::from_fn(40, 40, |_, _| true);
    assert!(run_manipulation(&sc.image, &full, Mode::Declutter, &cfg).is_err());
    let cfg = ManipulationConfig { delta_s: 1.5, ..ManipulationConfig::default() };
    let e = run_manipulation(&sc.image, &sc.region, Mode::Enhance, &cfg).unwrap_err();
    assert!(e.to_string().contains("delta-s must be in [0,1]"));
}

#[test]
fn report_round_trips_through_json() {
    let sc = scene(3, 40);
    let (_, r) = run_manipulation(&sc.image, &sc.region, Mode::Declutter, &small_cfg()).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    let back: salmanip_core::RunReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    assert!(json.contains(&format!("\"termination\":\"{}\"", r.termination.as_str())));
}
