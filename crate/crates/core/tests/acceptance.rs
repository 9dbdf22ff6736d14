//! Acceptance criteria. Each test prints one PASS/FAIL line.

use std::sync::Arc;
use std::time::Instant;

use ebm_spectral::analysis::SATURATION_FLOOR;
use ebm_spectral::basis::eval_all;
use ebm_spectral::kernels::lag_weights;
use ebm_spectral::{
    canonical_case, eigenvalue, gauss_rule, l2_norm, modal_oracle_error, solve, spatial_study,
    synthesize, temporal_study, CaseId, ConvergenceReport, KernelSpec, MemoryRule, ProblemSpec,
    SchemeConfig, SpatialStudy, SpectralCoeffs, TemporalStudy,
};

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "[{}] criterion {id}: {name} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn benchmark_cases() -> Vec<CaseId> {
    vec![
        CaseId::nonlinear_default(),
        CaseId::gaussian_default(),
        CaseId::fractional_default(),
    ]
}

fn spatial_reports() -> Vec<ConvergenceReport> {
    benchmark_cases()
        .into_iter()
        .map(|id| spatial_study(&canonical_case(id).unwrap(), &SpatialStudy::default()).unwrap())
        .collect()
}

fn temporal_reports() -> Vec<ConvergenceReport> {
    benchmark_cases()
        .into_iter()
        .map(|id| temporal_study(&canonical_case(id).unwrap(), &TemporalStudy::default()).unwrap())
        .collect()
}

fn print_report(r: &ConvergenceReport) {
    println!("  {} (t = {}, reference {})", r.case, r.t_eval, r.reference);
    for row in &r.rows {
        println!(
            "    {:>10} {:>12.4e} {:?}",
            row.resolution, row.error, row.eoc
        );
    }
}

fn criterion_1_spatial_spectral_accuracy() -> bool {
    let start = Instant::now();
    let reports = spatial_reports();
    let elapsed = start.elapsed().as_secs_f64();
    let mut ok = elapsed <= 60.0;
    let mut notes = Vec::new();
    for r in &reports {
        print_report(r);
        let e = r.errors();
        // monotone down to the saturation floor
        let monotone = e
            .windows(2)
            .all(|w| w[1] <= w[0] || w[0] <= SATURATION_FLOOR);
        // geometric decay while both neighbours are resolved
        let worst_ratio = e
            .windows(2)
            .filter(|w| w[1] > SATURATION_FLOOR)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max);
        let n14 = r
            .rows
            .iter()
            .find(|row| row.resolution == 14.0)
            .map(|row| row.error)
            .unwrap();
        let case_ok = monotone && worst_ratio <= 0.3 && n14 <= 1e-9;
        ok &= case_ok;
        notes.push(format!(
            "{}: monotone={monotone} max ratio={worst_ratio:.3} e(14)={n14:.2e}",
            r.case
        ));
    }
    report(
        1,
        "spatial spectral accuracy",
        ok,
        &format!("{}; {elapsed:.1}s", notes.join("; ")),
    );
    ok
}

fn criterion_2_temporal_order_two() -> bool {
    let start = Instant::now();
    let reports = temporal_reports();
    let elapsed = start.elapsed().as_secs_f64();
    let mut ok = elapsed <= 120.0;
    let mut notes = Vec::new();
    for r in &reports {
        print_report(r);
        let eoc = r.terminal_eoc().unwrap_or(f64::NAN);
        ok &= (1.8..=2.2).contains(&eoc);
        notes.push(format!("{}: eoc={eoc:.3}", r.case));
    }
    report(
        2,
        "temporal order two",
        ok,
        &format!("{}; {elapsed:.1}s", notes.join("; ")),
    );
    ok
}

fn criterion_3_first_order_family_member() -> bool {
    // theta = 0 is the fully implicit end of the family
    let study = TemporalStudy {
        theta: 0.0,
        ..TemporalStudy::default()
    };
    let r = temporal_study(
        &canonical_case(CaseId::nonlinear_default()).unwrap(),
        &study,
    )
    .unwrap();
    print_report(&r);
    let eoc = r.terminal_eoc().unwrap_or(f64::NAN);
    let ok = (0.8..=1.2).contains(&eoc);
    report(
        3,
        "first-order family member",
        ok,
        &format!("theta=0 eoc={eoc:.3}"),
    );
    ok
}

fn criterion_4_modal_oracle() -> bool {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for mode in [0, 1, 2] {
        let coarse = modal_oracle_error(mode, 0.5, 0.01, 0.5).unwrap();
        let fine = modal_oracle_error(mode, 0.5, 0.005, 0.5).unwrap();
        let order = (coarse.exact / fine.exact).log2();
        let case_ok =
            coarse.recurrence <= 1e-13 && fine.recurrence <= 1e-13 && (order - 2.0).abs() <= 0.2;
        ok &= case_ok;
        notes.push(format!(
            "mode {mode}: recurrence={:.1e} eoc={order:.3}",
            coarse.recurrence.max(fine.recurrence)
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    report(
        4,
        "modal oracle equivalence",
        ok,
        &format!("{}; {elapsed:.2}s", notes.join("; ")),
    );
    ok
}

fn memory_consistency_eoc(rule: MemoryRule) -> f64 {
    // y(t) = t^2, K = 1, t = 1
    let tau = 0.4;
    let k = KernelSpec::constant(1.0, tau).unwrap();
    let y = |t: f64| t * t;
    let exact = (1.0 - (1.0 - tau).powi(3)) / 3.0;
    let hs = [0.1, 0.05, 0.025];
    let errs: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let w = lag_weights(&k, h, rule).unwrap();
            let approx: f64 = w
                .weights()
                .iter()
                .enumerate()
                .map(|(i, wi)| wi * y(1.0 - i as f64 * h))
                .sum();
            (approx - exact).abs()
        })
        .collect();
    (errs[1] / errs[2]).ln() / (hs[1] / hs[2]).ln()
}

fn criterion_5_quadrature_weights() -> bool {
    let start = Instant::now();
    let tau = 0.4;
    let kernels = [
        KernelSpec::constant(1.0, tau).unwrap(),
        KernelSpec::gaussian_default(tau).unwrap(),
        KernelSpec::fractional(0.5, tau).unwrap(),
    ];
    let mut ok = true;
    let mut worst_sum = 0.0f64;
    for k in &kernels {
        let total = k.integral(0.0, tau).unwrap();
        for h in [0.1, 0.05, 0.02, 0.002] {
            for rule in [MemoryRule::Rectangle, MemoryRule::Trapezoid] {
                let w = lag_weights(k, h, rule).unwrap();
                worst_sum = worst_sum.max((w.sum() - total).abs());
            }
        }
    }
    ok &= worst_sum <= 1e-10;

    let h = 0.05;
    let w = lag_weights(&kernels[0], h, MemoryRule::Trapezoid).unwrap();
    let m = w.lags();
    let hat_ok = w.weights().iter().enumerate().all(|(i, &wi)| {
        let expect = if i == 0 || i == m { h / 2.0 } else { h };
        (wi - expect).abs() <= 1e-15
    });
    ok &= hat_ok;

    let rect = memory_consistency_eoc(MemoryRule::Rectangle);
    let trap = memory_consistency_eoc(MemoryRule::Trapezoid);
    ok &= (rect - 1.0).abs() <= 0.2 && (trap - 2.0).abs() <= 0.2;
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 5.0;
    report(
        5,
        "quadrature-weight suite",
        ok,
        &format!(
            "max |sum w - int K|={worst_sum:.1e}; hat weights={hat_ok}; eoc rect={rect:.3} trap={trap:.3}; {elapsed:.2}s"
        ),
    );
    ok
}

fn criterion_6_basis_suite() -> bool {
    let start = Instant::now();
    let n = 30;
    let rule = gauss_rule(2 * n + 1);
    let q = rule.len();
    let mut values = vec![0.0; q * (n + 1)];
    let mut slopes = vec![0.0; q * (n + 1)];
    for (k, &x) in rule.nodes().iter().enumerate() {
        let r = k * (n + 1)..(k + 1) * (n + 1);
        eval_all(n, x, &mut values[r.clone()], &mut slopes[r]);
    }
    let mut ortho = 0.0f64;
    let mut eigen = 0.0f64;
    for i in 0..=n {
        for j in 0..=n {
            let mut mass = 0.0;
            let mut stiff = 0.0;
            for (k, (&x, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
                let (vi, vj) = (values[k * (n + 1) + i], values[k * (n + 1) + j]);
                let (di, dj) = (slopes[k * (n + 1) + i], slopes[k * (n + 1) + j]);
                mass += w * vi * vj;
                stiff += w * (1.0 - x * x) * di * dj;
            }
            let delta = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((mass - delta).abs());
            // a(phi_i, phi_j) = stiffness + mass
            eigen = eigen.max((stiff + mass - (eigenvalue(i) + 1.0) * delta).abs());
        }
    }
    // Plancherel on deterministic pseudo-random coefficients
    let mut plancherel = 0.0f64;
    let mut state = 0x2545_f491_4f6c_dd1du64;
    for len in 1..=n + 1 {
        let coeffs: Vec<f64> = (0..len)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state as f64 / u64::MAX as f64) * 2.0 - 1.0
            })
            .collect();
        let c = SpectralCoeffs::new(coeffs);
        let vals = synthesize(&c, rule.nodes());
        let quad: f64 = vals
            .iter()
            .zip(rule.weights())
            .map(|(v, w)| w * v * v)
            .sum();
        plancherel = plancherel.max((quad - l2_norm(&c).powi(2)).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = ortho <= 1e-10 && eigen <= 1e-10 && plancherel <= 1e-10 && elapsed < 5.0;
    report(
        6,
        "basis suite",
        ok,
        &format!(
            "orthonormality {ortho:.1e}, eigen-relation {eigen:.1e}, Plancherel {plancherel:.1e}; {elapsed:.2}s"
        ),
    );
    ok
}

fn unforced(id: CaseId) -> ProblemSpec {
    let mut p = canonical_case(id).unwrap();
    p.source = Arc::new(|_, _, _, _| 0.0);
    p
}

fn criterion_7_decay() -> bool {
    let mut ok = true;
    let mut notes = Vec::new();
    for id in benchmark_cases() {
        let p = unforced(id);
        for h in [0.1, 0.01] {
            let traj = solve(&p, &SchemeConfig::new(h, 20).with_trajectory(true)).unwrap();
            let norms: Vec<f64> = traj.levels.iter().map(l2_norm).collect();
            let worst = norms
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            ok &= worst <= 0.0;
            notes.push(format!("{} h={h}: max increment {worst:.2e}", id.name()));
        }
    }
    report(7, "decay without forcing", ok, &notes.join("; "));
    ok
}

fn bits(reports: &[ConvergenceReport]) -> Vec<u64> {
    reports
        .iter()
        .flat_map(|r| r.rows.iter().map(|row| row.error.to_bits()))
        .collect()
}

fn criterion_8_determinism() -> bool {
    let mut runs = Vec::new();
    for threads in [1, 2, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let (s, t) = pool.install(|| (spatial_reports(), temporal_reports()));
        runs.push((threads, bits(&s), bits(&t)));
    }
    let ok = runs
        .windows(2)
        .all(|w| w[0].1 == w[1].1 && w[0].2 == w[1].2);
    report(
        8,
        "determinism across thread counts",
        ok,
        &format!(
            "threads 1/2/8, {} error cells compared",
            runs[0].1.len() + runs[0].2.len()
        ),
    );
    ok
}

fn main() {
    let criteria: [fn() -> bool; 8] = [
        criterion_1_spatial_spectral_accuracy,
        criterion_2_temporal_order_two,
        criterion_3_first_order_family_member,
        criterion_4_modal_oracle,
        criterion_5_quadrature_weights,
        criterion_6_basis_suite,
        criterion_7_decay,
        criterion_8_determinism,
    ];
    let passed = criteria.iter().filter(|c| c()).count();
    println!("acceptance: {passed} of {} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
