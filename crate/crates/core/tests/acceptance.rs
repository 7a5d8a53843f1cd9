//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line each, and fails at the end if any criterion failed.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use divkit::closed_form::{chi_order_k, hf_cauchy, hf_normal, kl_mvn_general, HfFunction};
use divkit::estimators::{mc_affinity, mc_estimate, quad_fdiv_1d, reduce_location, tabulate_runtime};
use divkit::generators::{alpha_generator, FGenerator};
use divkit::radial::{Family, RadialDensity};
use divkit::spd::{mahalanobis_sq, relative_spectrum, AffineElement, LocationScaleParam, SpdMatrix, Spectrum};
use divkit::spectral::{bhattacharyya_rho, bhattacharyya_rho_spectral, spectral_fdiv_generic, spectral_kl};
use divkit::tabulate::{fit_rational, monotonicity_report, tabulate_hf, TableMethod};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn report(line: &str) {
    // bypasses the test harness capture so the summary is always visible
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SpdMatrix {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    SpdMatrix::new(&a * a.transpose() + DMatrix::identity(d, d) * 0.3).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-r..r)).collect()
}

fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

fn unit_pair(u: f64) -> (LocationScaleParam, LocationScaleParam) {
    (
        LocationScaleParam::standard(1),
        LocationScaleParam::new(&[u.sqrt()], SpdMatrix::identity(1)).unwrap(),
    )
}

fn quad_h(gen: &FGenerator, u: f64) -> f64 {
    let (p, q) = unit_pair(u);
    quad_fdiv_1d(gen, &RadialDensity::normal(1), &p, &q).unwrap().value
}

fn within(value: f64, target: f64, se: f64) -> bool {
    (value - target).abs() <= 3.0 * se
}

fn c1_kl_location() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_closed: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    for case in 0..20 {
        let d = rng.random_range(1..=8);
        let sigma = random_spd(&mut rng, d);
        let mu1 = random_vec(&mut rng, d, 1.0);
        let mu2 = random_vec(&mut rng, d, 1.0);
        let m = mahalanobis_sq(&mu1, &mu2, &sigma).unwrap();
        let h = HfFunction::new(FGenerator::Kl, Family::Normal, d).unwrap().eval(m).unwrap();
        worst_closed = worst_closed.max((h - 0.5 * m).abs());
        ensure!((h - 0.5 * m).abs() <= 1e-10, "case {case}: closed {h} vs {}", 0.5 * m);
        let p1 = LocationScaleParam::new(&mu1, sigma.clone()).unwrap();
        let p2 = LocationScaleParam::new(&mu2, sigma).unwrap();
        let e = mc_estimate(&FGenerator::Kl, &RadialDensity::normal(d), &p1, &p2, 1_000_000, 1000 + case).unwrap();
        worst_z = worst_z.max((e.value - h).abs() / e.std_error);
        ensure!(within(e.value, h, e.std_error), "case {case} (d={d}): mc {e} vs closed {h}");
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "runtime {secs:.1}s exceeds 10s");
    Ok(format!("max closed error {worst_closed:.1e}, max |z| {worst_z:.2}"))
}

fn c2_table_oracles() -> Outcome {
    let t = Instant::now();
    let gens = [
        FGenerator::Kl,
        FGenerator::SquaredHellinger,
        FGenerator::PearsonChi2,
        alpha_generator(0.5),
        alpha_generator(-0.5),
        FGenerator::JensenShannon,
        FGenerator::TotalVariation,
    ];
    let mut worst: f64 = 0.0;
    for g in gens {
        for u in [0.25, 1.0, 4.0, 9.0] {
            let h = hf_normal(&g, u).unwrap();
            let q = quad_h(&g, u);
            let tol = 1e-6f64.max(1e-4 * h.abs());
            worst = worst.max((h - q).abs() / tol);
            ensure!((h - q).abs() <= tol, "{g} at u={u}: closed {h} vs quadrature {q}");
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "runtime {secs:.1}s exceeds 30s");
    Ok(format!("28 pairs, worst error {worst:.2e} of tolerance"))
}

fn c3_chi_order() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        for u in [0.5, 1.0, 2.0] {
            let c = chi_order_k(k, u).unwrap();
            let q = quad_h(&FGenerator::ChiOrder(k), u);
            worst = worst.max((c - q).abs());
            ensure!((c - q).abs() <= 1e-6, "k={k} u={u}: closed {c} vs quadrature {q}");
            if k == 1 {
                ensure!(c == 0.0, "k=1 gives {c}");
            }
        }
    }
    let v: Vec<f64> = (2..=4).map(|k| chi_order_k(k, 2.0).unwrap()).collect();
    ensure!(v[0] < v[1] && v[1] < v[2], "no growth in k at u=2: {v:?}");
    Ok(format!("worst error {worst:.1e}, k=2..4 at u=2: {:.1} < {:.1} < {:.1}", v[0], v[1], v[2]))
}

fn c4_cauchy_polynomial() -> Outcome {
    let t = Instant::now();
    let rd = RadialDensity::cauchy(3);
    let p = LocationScaleParam::standard(3);
    let mut zs = Vec::new();
    for (i, u) in [0.5f64, 1.0, 2.0].into_iter().enumerate() {
        let q = LocationScaleParam::new(&[u.sqrt(), 0.0, 0.0], SpdMatrix::identity(3)).unwrap();
        let e = mc_estimate(&FGenerator::PearsonChi2, &rd, &p, &q, 10_000_000, 400 + i as u64).unwrap();
        let exact = hf_cauchy(&FGenerator::PearsonChi2, u, 3).unwrap();
        ensure!((exact - (2.0 / 3.0 * u + u * u / 8.0)).abs() < 1e-15, "polynomial mismatch");
        zs.push((e.value - exact) / e.std_error);
        ensure!(within(e.value, exact, e.std_error), "Δ²={u}: mc {e} vs {exact}");
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "runtime {secs:.1}s exceeds 60s");
    Ok(format!("z = {:.2}, {:.2}, {:.2}", zs[0], zs[1], zs[2]))
}

fn c5_js_fit() -> Outcome {
    let grid: Vec<f64> = (0..20).map(|i| 0.5 + 4.5 * i as f64 / 19.0).collect();
    let table = tabulate_hf(&FGenerator::JensenShannon, &RadialDensity::normal(1), &grid, TableMethod::Quad).unwrap();
    let fit = fit_rational(&table).unwrap();
    let da = (fit.a / 2.06709 - 1.0).abs();
    let db = (fit.b / 8.27508 - 1.0).abs();
    ensure!(da <= 0.02 && db <= 0.02, "fit {fit} is off by {da:.3}/{db:.3}");
    ensure!(fit.max_rel_error < 0.005, "max relative error {}", fit.max_rel_error);
    Ok(fit.to_string())
}

fn c6_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut zs: Vec<f64> = Vec::new();
    for d in [3usize, 8] {
        let sigma = random_spd(&mut rng, d);
        let mu1 = random_vec(&mut rng, d, 0.5);
        let mu2 = random_vec(&mut rng, d, 0.5);
        let p1 = LocationScaleParam::new(&mu1, sigma.clone()).unwrap();
        let p2 = LocationScaleParam::new(&mu2, sigma).unwrap();
        let r = reduce_location(&p1, &p2).unwrap();
        for (i, g) in [FGenerator::Kl, FGenerator::JensenShannon, FGenerator::TotalVariation].into_iter().enumerate() {
            let full = mc_estimate(&g, &RadialDensity::normal(d), &p1, &p2, 1_000_000, 60 + (d * 10 + i) as u64).unwrap();
            let red = quad_fdiv_1d(&g, &RadialDensity::normal(1), &r.p1, &r.p2).unwrap();
            zs.push((full.value - red.value) / full.std_error);
            ensure!(full.agrees_with(&red, 3.0), "{g} d={d}: full {full} vs reduced {red}");
        }
    }
    let bench = tabulate_runtime(&FGenerator::Kl, &[32], 1_000_000, 6).unwrap();
    let ratio = bench.rows[0].ratio;
    ensure!(ratio > 4.0, "speed-up at d=32 only {ratio:.2}");
    let zmax = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    Ok(format!("max |z| {zmax:.2}, d=32 speed-up {ratio:.1}x"))
}

fn c7_affine_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let families = [Family::Normal, Family::CAUCHY, Family::Student(3.0)];
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let family = families[t % 3];
        let d = rng.random_range(1..=4);
        let rd = RadialDensity::new(family, d).unwrap();
        let p1 = LocationScaleParam::new(&random_vec(&mut rng, d, 1.0), random_spd(&mut rng, d)).unwrap();
        let p2 = LocationScaleParam::new(&random_vec(&mut rng, d, 1.0), random_spd(&mut rng, d)).unwrap();
        let mut a: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| rng.random_range(-2.0..2.0));
        while a.determinant().abs() < 0.1 {
            a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-2.0..2.0));
        }
        let g = AffineElement::new(&random_vec(&mut rng, d, 3.0), a).unwrap();
        let (q1, q2) = (g.act(&p1).unwrap(), g.act(&p2).unwrap());
        for gen in [FGenerator::Kl, FGenerator::SquaredHellinger] {
            let seed = 7000 + t as u64;
            let e = mc_estimate(&gen, &rd, &p1, &p2, 50_000, seed).unwrap();
            let f = mc_estimate(&gen, &rd, &q1, &q2, 50_000, seed).unwrap();
            let se = e.std_error.hypot(f.std_error);
            if se > 0.0 {
                worst = worst.max((e.value - f.value).abs() / se);
            }
            ensure!(e.agrees_with(&f, 3.0), "transform {t} ({family}, {gen}): {e} vs {f}");
        }
    }
    Ok(format!("100 comparisons, max |z| {worst:.2e}"))
}

fn c8_scale_spectral() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    // (a) spectral KL against the general normal KL
    let mut worst_a: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(1..=6);
        let mu = random_vec(&mut rng, d, 1.0);
        let s1 = random_spd(&mut rng, d);
        let s2 = random_spd(&mut rng, d);
        let sp = relative_spectrum(&s1, &s2).unwrap();
        let general = kl_mvn_general(
            &LocationScaleParam::new(&mu, s1).unwrap(),
            &LocationScaleParam::new(&mu, s2).unwrap(),
        )
        .unwrap()
        .total;
        let diff = (spectral_kl(&sp) - general).abs() / general.max(1.0);
        worst_a = worst_a.max(diff);
        ensure!(diff <= 1e-8, "(a) spectral {} vs general {general}", spectral_kl(&sp));
    }
    // (b) determinant and spectral forms of ρ_β
    let mut worst_b: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(1..=6);
        let beta = rng.random_range(0.01..0.99);
        let s1 = random_spd(&mut rng, d);
        let s2 = random_spd(&mut rng, d);
        let det = bhattacharyya_rho(beta, &s1, &s2).unwrap();
        let sp = bhattacharyya_rho_spectral(beta, &relative_spectrum(&s1, &s2).unwrap()).unwrap();
        worst_b = worst_b.max((det - sp).abs());
        ensure!((det - sp).abs() <= 1e-12, "(b) β={beta}: {det} vs {sp}");
    }
    // (c) Monte Carlo affinity
    let cases: [(f64, &[f64], &[f64]); 3] = [
        (0.5, &[1.0, 1.0], &[4.0, 1.0]),
        (0.3, &[1.0, 2.0, 0.5], &[2.0, 1.0, 1.0]),
        (0.7, &[2.0, 0.5], &[0.7, 1.5]),
    ];
    let mut zs = Vec::new();
    for (i, (beta, d1, d2)) in cases.iter().enumerate() {
        let s1 = SpdMatrix::from_diagonal(d1).unwrap();
        let s2 = SpdMatrix::from_diagonal(d2).unwrap();
        let d = d1.len();
        let p1 = LocationScaleParam::new(&vec![0.0; d], s1.clone()).unwrap();
        let p2 = LocationScaleParam::new(&vec![0.0; d], s2.clone()).unwrap();
        let det = bhattacharyya_rho(*beta, &s1, &s2).unwrap();
        let sp = bhattacharyya_rho_spectral(*beta, &relative_spectrum(&s1, &s2).unwrap()).unwrap();
        let e = mc_affinity(*beta, &RadialDensity::normal(d), &p1, &p2, 10_000_000, 880 + i as u64).unwrap();
        zs.push((e.value - det) / e.std_error);
        ensure!(within(e.value, det, e.std_error) && within(e.value, sp, e.std_error), "(c) case {i}: mc {e} vs {det}");
    }
    // (d) orthogonal conjugation
    let mut worst_d: f64 = 0.0;
    for _ in 0..10 {
        let d = rng.random_range(2..=5);
        let s1 = random_spd(&mut rng, d);
        let s2 = random_spd(&mut rng, d);
        let u = random_orthogonal(&mut rng, d);
        let c1 = SpdMatrix::new(&u * s1.matrix() * u.transpose()).unwrap();
        let c2 = SpdMatrix::new(&u * s2.matrix() * u.transpose()).unwrap();
        let pairs = [
            (spectral_kl(&relative_spectrum(&s1, &s2).unwrap()), spectral_kl(&relative_spectrum(&c1, &c2).unwrap())),
            (bhattacharyya_rho(0.4, &s1, &s2).unwrap(), bhattacharyya_rho(0.4, &c1, &c2).unwrap()),
            (
                bhattacharyya_rho_spectral(0.4, &relative_spectrum(&s1, &s2).unwrap()).unwrap(),
                bhattacharyya_rho_spectral(0.4, &relative_spectrum(&c1, &c2).unwrap()).unwrap(),
            ),
        ];
        for (a, b) in pairs {
            worst_d = worst_d.max((a - b).abs());
            ensure!((a - b).abs() <= 1e-8, "(d) {a} vs {b}");
        }
    }
    // (e) monotone in |1 - λ|
    let up: Vec<f64> = (0..=39).map(|i| 1.1 + 0.1 * i as f64).collect();
    let down: Vec<f64> = (0..=8).map(|i| 0.9 - 0.1 * i as f64).collect();
    for grid in [up, down] {
        let (mut prev_kl, mut prev_h) = (0.0, 0.0);
        for l in grid {
            let s = Spectrum::new(vec![l]).unwrap();
            let kl = spectral_kl(&s);
            let h = 4.0 * (1.0 - bhattacharyya_rho_spectral(0.5, &s).unwrap());
            ensure!(kl > prev_kl && h > prev_h, "(e) not increasing at λ={l}");
            prev_kl = kl;
            prev_h = h;
        }
    }
    Ok(format!(
        "(a) {worst_a:.1e} (b) {worst_b:.1e} (c) z = {:.2}, {:.2}, {:.2} (d) {worst_d:.1e} (e) ok",
        zs[0], zs[1], zs[2]
    ))
}

fn c9_generic_spectral() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut i = 0;
    for family in [Family::Normal, Family::Student(2.0)] {
        let rd = RadialDensity::new(family, 2).unwrap();
        for eigs in [[2.0, 0.5], [3.0, 1.0]] {
            let spectrum = Spectrum::new(eigs.to_vec()).unwrap();
            let p1 = LocationScaleParam::standard(2);
            let p2 = LocationScaleParam::new(&[0.0, 0.0], SpdMatrix::from_diagonal(&eigs).unwrap()).unwrap();
            for gen in [FGenerator::Kl, FGenerator::SquaredHellinger] {
                i += 1;
                let s = spectral_fdiv_generic(&gen, &rd, &spectrum, 1_000_000, 900 + i).unwrap();
                let f = mc_estimate(&gen, &rd, &p1, &p2, 1_000_000, 950 + i).unwrap();
                worst = worst.max((s.value - f.value).abs() / s.std_error.hypot(f.std_error));
                ensure!(s.agrees_with(&f, 3.0), "{family} {eigs:?} {gen}: spectral {s} vs full {f}");
            }
        }
    }
    Ok(format!("8 comparisons, max |z| {worst:.2}"))
}

fn c10_bounds_monotonicity() -> Outcome {
    let ln2 = std::f64::consts::LN_2;
    let mut checked = 0;
    let mut seed = 1000;
    for family in [Family::Normal, Family::CAUCHY, Family::Student(3.0)] {
        for d in [1usize, 3] {
            let rd = RadialDensity::new(family, d).unwrap();
            let p = LocationScaleParam::standard(d);
            for u in [0.5f64, 2.0, 8.0, 32.0, 128.0] {
                let mut loc = vec![0.0; d];
                loc[0] = u.sqrt();
                let q = LocationScaleParam::new(&loc, SpdMatrix::identity(d)).unwrap();
                seed += 1;
                let tv = mc_estimate(&FGenerator::TotalVariation, &rd, &p, &q, 100_000, seed).unwrap();
                ensure!(tv.value <= 1.0 + 3.0 * tv.std_error, "TV {tv} for {family} d={d} u={u}");
                // the generator integrates to twice the Jensen-Shannon divergence
                let js = mc_estimate(&FGenerator::JensenShannon, &rd, &p, &q, 100_000, seed).unwrap();
                ensure!(
                    0.5 * js.value <= ln2 + 1.5 * js.std_error,
                    "JS {} for {family} d={d} u={u}",
                    0.5 * js.value
                );
                checked += 2;
            }
        }
    }
    for u in [0.5, 4.0, 64.0, 400.0] {
        let js = 0.5 * hf_normal(&FGenerator::JensenShannon, u).unwrap();
        let tv = hf_normal(&FGenerator::TotalVariation, u).unwrap();
        ensure!(js <= ln2 + 1e-9 && tv <= 1.0, "closed JS {js} / TV {tv} at u={u}");
    }
    let grid: Vec<f64> = (0..15).map(|i| 0.25 + 0.5 * i as f64).collect();
    let gens = [
        FGenerator::Kl,
        FGenerator::SquaredHellinger,
        FGenerator::PearsonChi2,
        alpha_generator(0.5),
        alpha_generator(-0.5),
        FGenerator::JensenShannon,
        FGenerator::TotalVariation,
        FGenerator::Jeffreys,
    ];
    let mut tables = 0;
    for g in gens {
        let t = tabulate_hf(&g, &RadialDensity::normal(1), &grid, TableMethod::Quad).unwrap();
        let r = monotonicity_report(&t);
        ensure!(r.pass, "{g} table not increasing at row {:?}", r.first_violation);
        tables += 1;
    }
    let t = tabulate_hf(&FGenerator::PearsonChi2, &RadialDensity::cauchy(1), &grid, TableMethod::Quad).unwrap();
    ensure!(monotonicity_report(&t).pass, "cauchy table not increasing");
    tables += 1;
    for g in gens.iter().chain([FGenerator::ChiOrder(3), FGenerator::NeymanChi2, FGenerator::ReverseKl].iter()) {
        let h0 = hf_normal(g, 0.0).unwrap();
        ensure!(h0.abs() <= 1e-10, "{g}: h(0) = {h0}");
    }
    for d in [1, 3] {
        ensure!(hf_cauchy(&FGenerator::PearsonChi2, 0.0, d).unwrap() == 0.0, "cauchy h(0)");
    }
    Ok(format!("{checked} bound checks, {tables} tables monotone, h(0) = 0 for all closed forms"))
}

fn run_cli(args: &[&str], threads: &str, dir: &Path) -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_divkit"))
        .args(args)
        .args(["--threads", threads])
        .current_dir(dir)
        .env_remove("DIVKIT_THREADS")
        .output()
        .expect("binary runs");
    (out.stdout, out.status.code().unwrap_or(-1))
}

fn c11_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["div", "--family", "normal", "--gen", "kl", "--mu1", "0,0", "--mu2", "1,1", "--sigma1", "1,0;0,1", "--method", "mc", "--n", "1000000", "--seed", "7"],
        vec!["div", "--family", "cauchy", "--gen", "chi2:pearson", "--mu1", "0,0,0", "--mu2", "1,0,0", "--sigma1", "1,0,0;0,1,0;0,0,1", "--method", "mc", "--n", "300000"],
        vec!["div", "--family", "student:3", "--gen", "js", "--mu1", "0,1", "--mu2", "1,0", "--sigma1", "2,0.3;0.3,1", "--sigma2", "1,0;0,3", "--method", "mc", "--n", "200000", "--seed", "0xBEEF"],
        vec!["div", "--family", "normal", "--gen", "tv", "--mu1", "0", "--mu2", "2", "--sigma1", "1", "--method", "quad"],
        vec!["spectral", "--gen", "h2", "--eigs", "3,1", "--family", "student:2", "--n", "200000", "--seed", "3"],
        vec!["spectral", "--gen", "kl", "--eigs", "2,0.5"],
        vec!["hf-table", "--gen", "js", "--family", "normal", "--grid", "0.5:5:20", "--method", "quad", "--out", "t.csv"],
        vec!["hf-table", "--gen", "tv", "--family", "cauchy", "--dim", "2", "--grid", "0.5:4:4", "--method", "mc:100000", "--seed", "9", "--out", "m.csv"],
        vec!["fit-rational", "--in", "t.csv", "--out", "fit.txt"],
    ];
    let files = ["t.csv", "m.csv", "fit.txt"];
    let mut runs: Vec<(Vec<Vec<u8>>, Vec<Vec<u8>>)> = Vec::new();
    for threads in ["1", "8", "1"] {
        let mut stdouts = Vec::new();
        for args in &invocations {
            let (out, code) = run_cli(args, threads, dir.path());
            ensure!(code == 0, "`{}` exited with {code}", args.join(" "));
            stdouts.push(out);
        }
        let contents = files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect();
        runs.push((stdouts, contents));
        for f in files {
            std::fs::remove_file(dir.path().join(f)).unwrap();
        }
    }
    ensure!(runs[0] == runs[2], "reruns with --threads 1 differ");
    ensure!(runs[0] == runs[1], "--threads 1 and --threads 8 differ");
    Ok(format!("{} invocations x 3 runs byte-identical (threads 1, 8, 1)", invocations.len()))
}

fn run_criterion(id: usize, name: &str, f: fn() -> Outcome, failures: &mut Vec<usize>) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let elapsed: Duration = start.elapsed();
    match outcome {
        Ok(detail) => report(&format!("PASS [{id:>2}] {name} ({:.1}s): {detail}", elapsed.as_secs_f64())),
        Err(detail) => {
            failures.push(id);
            report(&format!("FAIL [{id:>2}] {name} ({:.1}s): {detail}", elapsed.as_secs_f64()));
        }
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("KL location closed form vs Monte Carlo", c1_kl_location),
        ("normal location closed forms vs quadrature", c2_table_oracles),
        ("order-k chi divergences", c3_chi_order),
        ("Cauchy d=3 chi-square polynomial", c4_cauchy_polynomial),
        ("Jensen-Shannon rational fit", c5_js_fit),
        ("dimension reduction", c6_reduction),
        ("affine invariance", c7_affine_invariance),
        ("scale spectral suite", c8_scale_spectral),
        ("generic spectral evaluator", c9_generic_spectral),
        ("bounds and monotonicity", c10_bounds_monotonicity),
        ("CLI reproducibility", c11_reproducibility),
    ];
    report("");
    let mut failures = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        run_criterion(i + 1, name, *f, &mut failures);
    }
    report(&format!("acceptance: {} of {} criteria passed", criteria.len() - failures.len(), criteria.len()));
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
