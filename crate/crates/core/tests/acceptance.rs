//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use optcap::capacity::{capacity_equal, capacity_thermal, optimal_capacity, PhotonBudget};
use optcap::geometry::{
    fresnel_free_space, fresnel_lens, hole_stage_fresnel, mixed_regime_check, ratio_r1, ratio_r2,
    DEFAULT_MIXED_MARGIN,
};
use optcap::kernels::KernelSpec;
use optcap::mathfn::g;
use optcap::scenarios::{
    gain_g1, gain_g2, gain_g3, screen_negligibility, thermal_gain_for, GainKind, GainSettings,
    NumericalSettings,
};
use optcap::spectra::grid::GridOrder;
use optcap::spectra::{Channel, ConvergenceOptions};
use optcap::{ModeSpectrum, OpticalGeometry, Scenario};

const LAMBDA: f64 = 1e-6;
const D_O: f64 = 100.0;
const LD: f64 = LAMBDA * D_O;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn geom(m: f64, r: f64, l: f64) -> OpticalGeometry {
    OpticalGeometry::with_magnification(LAMBDA, D_O, m, r, l).unwrap()
}

/// Patch side giving lens Fresnel number `f` for pupil radius `r`.
fn side_for(f: f64, r: f64) -> f64 {
    (f / PI).sqrt() * LD / r
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn farfield_law_lens() -> Outcome {
    let start = Instant::now();
    let f = 1e-3;
    let g = geom(1.0, 1e-2, side_for(f, 1e-2));
    let s = NumericalSettings::default().spectrum(Scenario::Lens, &g).map_err(|e| e.to_string())?;
    let eta = s.eta();
    let elapsed = start.elapsed();
    let detail = format!(
        "F = {:.3e}, eta1/F^2 = {:.6}, eta2/eta1 = {:.3e}, converged = {}, {:.1}s",
        fresnel_lens(&g),
        eta[0] / (f * f),
        eta[1] / eta[0],
        s.converged,
        elapsed.as_secs_f64()
    );
    ensure(
        within(eta[0], f * f, 0.05) && eta[1] <= 1e-2 * eta[0] && elapsed <= Duration::from_secs(60),
        detail,
    )
}

fn farfield_law_free_space() -> Outcome {
    let start = Instant::now();
    // F_fs = L^4 / (4 (lambda D_o)^2) with M = 1
    let l = (4e-3f64).sqrt().sqrt() * LD.sqrt();
    let g = geom(1.0, 1e-2, l);
    let ffs = fresnel_free_space(&g);
    let s = NumericalSettings::default().spectrum(Scenario::FreeSpace, &g).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "F_fs = {ffs:.3e}, eta1/F_fs = {:.6}, converged = {}, {:.1}s",
        s.top() / ffs,
        s.converged,
        elapsed.as_secs_f64()
    );
    ensure(within(ffs, 1e-3, 1e-12) && within(s.top(), ffs, 0.05) && elapsed <= Duration::from_secs(60), detail)
}

fn nearfield_mode_count() -> Outcome {
    let start = Instant::now();
    let f = 20.0;
    let g = geom(1.0, 1e-2, side_for(f, 1e-2));
    let numerics = NumericalSettings {
        convergence: ConvergenceOptions { initial_order: 12, max_order: 48, rtol: 1e-4 },
        ..Default::default()
    };
    let s = numerics.spectrum(Scenario::Lens, &g).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let nu = s.nu_threshold as f64;
    let strong = (0.7 * f).floor() as usize;
    let weakest_strong = s.eta()[strong - 1];
    let detail = format!(
        "F = {f}, nu_eff = {nu} (nu/F = {:.3}), eta_{strong} = {weakest_strong:.4}, sum eta = {:.3}, converged = {}, {:.1}s",
        nu / f,
        s.nu_sum,
        s.converged,
        elapsed.as_secs_f64()
    );
    ensure(
        within(nu, f, 0.15) && weakest_strong >= 0.9 && elapsed <= Duration::from_secs(600),
        detail,
    )
}

fn r1_consistency() -> Outcome {
    let g = geom(1.0, 1e-2, side_for(1e-3, 1e-2));
    let numerics = NumericalSettings::default();
    let lens = numerics.spectrum(Scenario::Lens, &g).map_err(|e| e.to_string())?;
    let fs = numerics.spectrum(Scenario::FreeSpace, &g).map_err(|e| e.to_string())?;
    let measured = lens.top() / fs.top();
    let r1 = ratio_r1(&g);
    ensure(
        fresnel_free_space(&g) <= 1e-3 && within(measured, r1, 0.10),
        format!("eta1(lens)/eta1(fs) = {measured:.5}, r1 = {r1:.5}"),
    )
}

fn composition_bounds() -> Outcome {
    let cases: [(&str, OpticalGeometry, GridOrder, usize); 6] = [
        ("farfield F=1e-3", geom(1.0, 1e-2, side_for(1e-3, 1e-2)), GridOrder::polar(12), 16),
        ("farfield F=1e-2, M=2", geom(2.0, 1e-2, side_for(1e-2, 1e-2)), GridOrder::polar(12), 16),
        ("farfield F=0.05", geom(1.0, 5e-3, side_for(0.05, 5e-3)), GridOrder::polar(16), 16),
        ("intermediate F=1", geom(1.0, 1e-2, side_for(1.0, 1e-2)), GridOrder::polar(32), 24),
        ("farfield F=0.08, M=0.5", geom(0.5, 1e-2, side_for(0.08, 1e-2)), GridOrder::polar(16), 16),
        (
            "nearfield F=12",
            geom(1.0, 1.4e-2, side_for(12.0, 1.4e-2)),
            GridOrder::Polar { radial: 48, angular: 160 },
            32,
        ),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, g, pupil, max_order) in cases {
        let numerics = NumericalSettings {
            convergence: ConvergenceOptions { initial_order: 8, max_order, rtol: 1e-4 },
            pupil_order: pupil,
            include_phase: false,
        };
        let r = screen_negligibility(&g, &numerics, Default::default()).map_err(|e| format!("{label}: {e}"))?;
        let (a, b) = hole_stage_fresnel(&g);
        let product = (a * b).min(r.stage_tops.0 * r.stage_tops.1);
        let eta_ok = r.hole_top <= product * 1.05;
        let nu_ok = r.hole_modes <= r.stage_modes.0.min(r.stage_modes.1) + 1;
        ok &= eta_ok && nu_ok;
        lines.push(format!(
            "{label}: eta1 = {:.4e} <= {:.4e} [{}], nu = {} <= min({}, {}) + 1 [{}], converged = {}",
            r.hole_top,
            product,
            if eta_ok { "ok" } else { "violated" },
            r.hole_modes,
            r.stage_modes.0,
            r.stage_modes.1,
            if nu_ok { "ok" } else { "violated" },
            r.converged
        ));
    }
    ensure(ok, lines.join("; "))
}

fn gain_asymptotes() -> Outcome {
    let s = GainSettings::default();
    let mut checks: Vec<(String, bool)> = Vec::new();
    let mut check = |name: &str, value: f64, target: f64, rel: f64| {
        checks.push((format!("{name} = {value:.5} vs {target:.5}"), within(value, target, rel)));
    };

    // farfield pair with r1 = 4 pi^2 R^4 / (lambda D_o)^2 = 4
    let r = (LD / PI).sqrt();
    let far = geom(1.0, r, side_for(1e-3, r));
    let ffs = fresnel_free_space(&far);
    let r1 = ratio_r1(&far);
    check("G1(eta_fs N = 1e-20)", gain_g1(&far, 1e-20 / ffs, &s).unwrap(), r1, 0.05);
    check("G1(eta_fs N = 1e20)", gain_g1(&far, 1e20 / ffs, &s).unwrap(), 1.0, 0.05);

    // nearfield pair: F_fs = 12, r2 = F / F_fs = 4
    let l = (12f64.sqrt() * 2.0 * LD).sqrt();
    let near = geom(1.0, l / PI.sqrt(), l);
    let nu = fresnel_lens(&near);
    let r2 = ratio_r2(&near);
    check("G2(N/nu = 1e20)", gain_g2(&near, 1e20 * nu, &s).unwrap(), r2, 0.05);
    check("G2(N/nu = 1e-20)", gain_g2(&near, 1e-20 * nu, &s).unwrap(), 1.0, 0.05);

    // mixed pair: F = 400, F_fs = 0.01
    let l = (2.0 * 0.1 * LD).sqrt();
    let mixed = geom(1.0, (400.0 / PI).sqrt() * LD / l, l);
    assert!(mixed_regime_check(&mixed, DEFAULT_MIXED_MARGIN).unwrap().holds);
    let nu3 = fresnel_lens(&mixed);
    let eta3 = fresnel_free_space(&mixed);
    check("G3(N = 1e20 nu)", gain_g3(&mixed, 1e20 * nu3, &s).unwrap(), nu3, 0.10);
    check("G3(eta_fs N = 1e-20)", gain_g3(&mixed, 1e-20 / eta3, &s).unwrap(), 1.0 / eta3, 0.10);

    // thermal variants
    let t = thermal_gain_for(GainKind::G1, &far, 1.0, 1e6).unwrap();
    check("G1 thermal(N_th = 1e6)", t.gain, r1, 0.05);
    let t = thermal_gain_for(GainKind::G2, &near, 1e-12 * nu, 1e-6).unwrap();
    check("G2 thermal(N_th = 1e-6, N/nu = 1e-12)", t.gain, r2, 0.05);
    for n in [1e-9, 1e-3, 1.0, 1e3] {
        let t = thermal_gain_for(GainKind::G1, &far, n, 0.0).unwrap();
        check(&format!("G1 thermal(N_th = 0, N = {n:e})"), t.gain, gain_g1(&far, n, &s).unwrap(), 1e-12);
    }

    let ok = checks.iter().all(|(_, ok)| *ok);
    let detail = checks
        .iter()
        .map(|(d, ok)| format!("{d} [{}]", if *ok { "ok" } else { "violated" }))
        .collect::<Vec<_>>()
        .join("; ");
    ensure(ok, detail)
}

fn capacity3(eta: &[f64; 3], n: &[f64; 3]) -> f64 {
    eta.iter().zip(n).map(|(e, x)| g(e * x).unwrap()).sum()
}

fn water_filling() -> Outcome {
    let eta = [0.9, 0.5, 0.1];
    let total = 3.0;
    let spec = ModeSpectrum::from_transmissivities(eta.to_vec()).unwrap();
    let report = optimal_capacity(&spec, PhotonBudget::pure_loss(total).unwrap()).unwrap();

    // simplex grid, step 1e-3
    let step = 1e-3;
    let steps = (total / step).round() as usize;
    let mut best = (f64::MIN, [0.0; 3]);
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let n = [i as f64 * step, j as f64 * step, total - (i + j) as f64 * step];
            let c = capacity3(&eta, &n);
            if c > best.0 {
                best = (c, n);
            }
        }
    }
    // local pattern refinement on the simplex
    let mut h = step;
    while h > 1e-12 {
        let mut improved = false;
        for (a, b) in [(0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)] {
            let mut n = best.1;
            n[a] += h;
            n[b] -= h;
            if n[b] < 0.0 {
                continue;
            }
            let c = capacity3(&eta, &n);
            if c > best.0 {
                best = (c, n);
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    let diff = (best.0 - report.total_nats).abs();

    let mu = report.allocation.multiplier.unwrap();
    let kkt = eta
        .iter()
        .zip(&report.allocation.photons)
        .filter(|(_, &n)| n > 0.0)
        .map(|(&e, &n)| (e * (1.0 / (e * n)).ln_1p() - mu).abs())
        .fold(0.0, f64::max)
        / mu;

    let equal = ModeSpectrum::from_transmissivities(vec![0.4; 5]).unwrap();
    let wf = optimal_capacity(&equal, PhotonBudget::pure_loss(2.0).unwrap()).unwrap().total_nats;
    let uniform = capacity_equal(0.4, 5.0, 2.0).unwrap();
    let eq_diff = (wf - uniform).abs();

    ensure(
        diff <= 1e-6 && kkt <= 1e-8 && eq_diff <= 1e-12,
        format!(
            "water-fill {:.12} vs brute force {:.12} (diff {diff:.2e}), KKT residual {kkt:.2e}, equal-spectrum diff {eq_diff:.2e}",
            report.total_nats, best.0
        ),
    )
}

fn phase_invariance() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (m, f, order) in [(1.0, 1.0, 16), (2.0, 5.0, 24), (0.5, 1e-2, 12)] {
        let g = geom(m, 1e-2, side_for(f, 1e-2));
        let plain = Channel::new(&KernelSpec::new(Scenario::Lens, g)).unwrap().spectrum(order).unwrap();
        let phased = Channel::new(&KernelSpec::new(Scenario::Lens, g).with_phase(true))
            .unwrap()
            .spectrum(order)
            .unwrap();
        for (a, b) in plain.eta().iter().zip(phased.eta()) {
            if a.max(*b) > 1e-14 {
                worst = worst.max((a - b).abs() / a.max(*b));
                compared += 1;
            }
        }
    }
    ensure(worst <= 1e-10, format!("{compared} transmissivities, worst relative difference {worst:.3e}"))
}

fn thermal_reduction() -> Outcome {
    let mut worst: f64 = 0.0;
    for &eta in &[0.0, 1e-6, 0.3, 1.0] {
        for &nu in &[1.0, 2.5, 40.0] {
            for &n in &[0.0, 1e-9, 0.5, 17.0, 1e9] {
                let a = capacity_thermal(eta, nu, n, 0.0).unwrap();
                let b = capacity_equal(eta, nu, n).unwrap();
                if a != b {
                    worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
                }
            }
        }
    }
    ensure(worst <= 1e-12, format!("worst relative difference {worst:.3e} over 60 cases"))
}

fn cli_contract() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_optcap");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let config = |side: f64, extra: &str| {
        format!(
            r#"{{"geometry": {{"wavelength": 1e-6, "object_distance": 100.0, "magnification": 1.0,
              "pupil_radius": 0.01, "object_side": {side:e}}}{extra}}}"#
        )
    };
    let run = |args: &[&Path]| -> i32 {
        let out = Command::new(bin).args(args).output().expect("binary runs");
        out.status.code().unwrap_or(-1)
    };
    let mut notes: Vec<(String, bool)> = Vec::new();
    fn expect(notes: &mut Vec<(String, bool)>, what: &str, got: i32, want: i32) {
        notes.push((format!("{what}: exit {got} (want {want})"), got == want));
    }

    std::fs::write(p("good.json"), config(side_for(2.0, 1e-2), r#", "budget": {"n": 3.0}"#)).unwrap();
    std::fs::write(p("bad.json"), r#"{"geometry": {"wavelength": "red"}}"#).unwrap();
    std::fs::write(
        p("coarse.json"),
        config(side_for(2.0, 1e-2), r#", "grid": {"initial_order": 4, "max_order": 4}"#),
    )
    .unwrap();
    std::fs::write(p("dead.csv"), "k,sigma,eta\n1,0,0\n").unwrap();

    let a = |s: &str| Path::new(s).to_path_buf();
    let spectrum = a("spectrum");
    let capacity = a("capacity");
    let cfg_flag = a("--config");
    let out_flag = a("--out");
    let spec_flag = a("--spectrum");

    let s1 = p("s1.csv");
    let s2 = p("s2.csv");
    expect(&mut notes, "spectrum", run(&[&spectrum, &cfg_flag, &p("good.json"), &out_flag, &s1]), 0);
    expect(&mut notes, "spectrum rerun", run(&[&spectrum, &cfg_flag, &p("good.json"), &out_flag, &s2]), 0);
    let identical = std::fs::read(&s1).ok() == std::fs::read(&s2).ok()
        && std::fs::read(s1.with_extension("csv.meta.json")).ok()
            == std::fs::read(s2.with_extension("csv.meta.json")).ok();
    notes.push((format!("byte-identical rerun: {identical}"), identical));

    expect(&mut notes, "malformed config", run(&[&spectrum, &cfg_flag, &p("bad.json")]), 2);
    expect(&mut notes, "unconverged", run(&[&spectrum, &cfg_flag, &p("coarse.json"), &out_flag, &p("c.csv")]), 3);
    let written = p("c.csv").exists();
    notes.push((format!("unconverged output written: {written}"), written));
    expect(
        &mut notes,
        "dead channel",
        run(&[&capacity, &cfg_flag, &p("good.json"), &spec_flag, &p("dead.csv"), &out_flag, &p("d.csv")]),
        4,
    );

    expect(&mut notes, "capacity", run(&[&capacity, &cfg_flag, &p("good.json"), &out_flag, &p("direct.csv")]), 0);
    expect(
        &mut notes,
        "capacity from file",
        run(&[&capacity, &cfg_flag, &p("good.json"), &spec_flag, &s1, &out_flag, &p("file.csv")]),
        0,
    );
    let total = |path: &Path| -> Option<f64> {
        let text = std::fs::read_to_string(path).ok()?;
        text.lines().last()?.split(',').nth(1)?.parse().ok()
    };
    match (total(&p("direct.csv")), total(&p("file.csv"))) {
        (Some(x), Some(y)) => {
            let rel = (x - y).abs() / x.abs();
            notes.push((format!("round trip {x:.15e} vs {y:.15e} (rel {rel:.1e})"), rel <= 1e-12 && x > 0.0));
        }
        _ => notes.push(("round trip totals missing".into(), false)),
    }
    let ok = notes.iter().all(|(_, ok)| *ok);
    ensure(ok, notes.into_iter().map(|(n, _)| n).collect::<Vec<_>>().join("; "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "farfield lens law", farfield_law_lens),
        (2, "farfield free-space law", farfield_law_free_space),
        (3, "nearfield mode count", nearfield_mode_count),
        (4, "r1 consistency", r1_consistency),
        (5, "composition bounds", composition_bounds),
        (6, "gain asymptotes", gain_asymptotes),
        (7, "water-filling correctness", water_filling),
        (8, "phase invariance", phase_invariance),
        (9, "thermal reduction", thermal_reduction),
        (10, "CLI contract", cli_contract),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                println!("criterion {id} ({name}): FAIL [{secs:.1}s] {detail}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
