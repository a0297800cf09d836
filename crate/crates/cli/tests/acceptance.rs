//! The twelve acceptance criteria, each reported as one PASS/FAIL line.
//!
//! Criteria 1 to 11 run through the library and append their numbers to a
//! result record. Criterion 12 repeats the whole run, compares the records
//! byte for byte, and does the same for files written by the binary.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use leafspace::condent::{additivity_counterexample, conditional_entropy_imbedded};
use leafspace::entropy::von_neumann_entropy;
use leafspace::experiments::{
    bifurcation_scan, binary_entropy, default_grid, gamma_ensemble, m2_pair_amplitudes, m2_symmetric_state,
    m3_symmetric_state, orbit_ansatz, permutation_action, ScanOptions,
};
use leafspace::leaf::{leaf_from_ensemble, leaf_linearity_check, max_pairwise_first_order, pair_weight_grid};
use leafspace::operator::{kron, CMatrix};
use leafspace::random::{haar_stiefel_with, random_density, random_density_with, random_simplex_with, stream_rng};
use leafspace::roof::{
    brute_force_roof, entanglement_of_formation, roof_gradient, Direction, Ensemble, HjwFactor, RoofOptions,
    RoofResult, StiefelPoint,
};
use leafspace::{Block, DensityMatrix, PureStateVector, SubalgebraSpec, C64};

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Run {
    verdicts: Vec<Verdict>,
    /// Every number that enters a verdict, in `{:?}` form.
    record: String,
    /// Optimal ensembles of criteria 1 to 6, for criterion 7.
    ensembles: Vec<(String, RoofResult, SubalgebraSpec)>,
}

impl Run {
    fn verdict(&mut self, id: usize, pass: bool, detail: String) {
        writeln!(self.record, "criterion {id}: {pass} {detail}").unwrap();
        self.verdicts.push(Verdict { id, pass, detail });
    }

    /// Like [`Run::verdict`], with the wall-clock time shown but kept out of the record.
    fn timed_verdict(&mut self, id: usize, pass: bool, detail: String, elapsed: Duration) {
        writeln!(self.record, "criterion {id}: {pass} {detail}").unwrap();
        let detail = format!("{detail}, {:.2} s", elapsed.as_secs_f64());
        self.verdicts.push(Verdict { id, pass, detail });
    }
}

fn opts() -> RoofOptions {
    RoofOptions::default()
}

fn diag(n: usize) -> SubalgebraSpec {
    SubalgebraSpec::diagonal(n).unwrap()
}

fn criterion_1(run: &mut Run) {
    let t = Instant::now();
    let res = entanglement_of_formation(&m3_symmetric_state(0.0).unwrap(), &diag(3), &opts()).unwrap();
    let elapsed = t.elapsed();
    let pass = res.value.abs() < 1e-6 && elapsed < Duration::from_secs(5);
    run.timed_verdict(1, pass, format!("E = {:e}", res.value), elapsed);
    run.ensembles.push(("m3 z=0".into(), res, diag(3)));
}

fn criterion_2(run: &mut Run) {
    let res = entanglement_of_formation(&m3_symmetric_state(1.0 / 3.0).unwrap(), &diag(3), &opts()).unwrap();
    let err = (res.value - 3f64.ln()).abs();
    run.verdict(2, err < 1e-9, format!("E = {:?}, |E - ln 3| = {err:e}", res.value));
    run.ensembles.push(("m3 z=1/3".into(), res, diag(3)));
}

fn criterion_3(run: &mut Run) {
    let rho = m3_symmetric_state(-1.0 / 6.0).unwrap();
    let res = entanglement_of_formation(&rho, &diag(3), &opts()).unwrap();
    let g = permutation_action(3).unwrap();
    let candidate = PureStateVector::from_real(&[1.0, -1.0, 0.0]).unwrap();
    let orbit = orbit_ansatz(&rho, &g, &candidate, &diag(3)).unwrap().value();
    let ln2 = 2f64.ln();
    let pass = (res.value - ln2).abs() < 2e-4
        && orbit.is_some_and(|v| (v - ln2).abs() < 2e-4 && (v - res.value).abs() < 2e-4);
    run.verdict(3, pass, format!("optimizer {:?}, orbit ansatz {orbit:?}", res.value));
    run.ensembles.push(("m3 z=-1/6".into(), res, diag(3)));
}

fn criterion_4(run: &mut Run) {
    let t = Instant::now();
    let report = bifurcation_scan(&default_grid(), &ScanOptions::default()).unwrap();
    let elapsed = t.elapsed();
    let d = &report.detected;
    let inside = |b: Option<leafspace::experiments::Bracket>, lo: f64, hi: f64| {
        b.is_some_and(|b| b.lo > lo && b.hi < hi && b.width() <= 1e-3 + 1e-12)
    };
    let pass = inside(d.z0, -1.0 / 6.0, 0.0) && inside(d.z1, 0.0, 1.0 / 3.0) && elapsed < Duration::from_secs(1800);
    run.timed_verdict(
        4,
        pass,
        format!("z0 {:?}, z1 {:?}, {} points", d.z0, d.z1, report.points.len()),
        elapsed,
    );
    writeln!(run.record, "scan {:?}", report.points.iter().map(|p| p.e_direct).collect::<Vec<_>>()).unwrap();
}

/// `Σ_l p_l ρ_l ⊗ |l⟩⟨l|` on `C² ⊗ C³`.
fn m2_tensor_abelian(seed: u64) -> DensityMatrix {
    let mut rng = stream_rng(seed, 0x5a);
    let p = random_simplex_with(&mut rng, 3);
    let mut m = CMatrix::zeros(6, 6);
    for (l, pl) in p.iter().enumerate() {
        let block = random_density_with(&mut rng, 2, 2);
        let mut e = CMatrix::zeros(3, 3);
        e[(l, l)] = C64::new(*pl, 0.0);
        m += kron(block.matrix(), &e);
    }
    DensityMatrix::from_noisy(&m).unwrap()
}

fn criterion_5(run: &mut Run) {
    let m2 = SubalgebraSpec::tensor_factor(&[2, 3], &[0]).unwrap();
    let framing = leafspace::operator::factor_permutation(&[2, 3], &[1]).unwrap();
    let abelian = SubalgebraSpec::new(6, vec![Block::new(1, 2); 3], Some(framing)).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let rho = m2_tensor_abelian(seed);
        for (label, a) in [("M2", &m2), ("diag3", &abelian)] {
            let res = entanglement_of_formation(&rho, a, &opts()).unwrap();
            worst = worst.max(res.value.abs());
            if seed < 3 {
                run.ensembles.push((format!("M2 x diag3 seed {seed} vs {label}"), res, a.clone()));
            }
        }
    }
    run.verdict(5, worst < 1e-4, format!("max |E| over 40 runs = {worst:e}"));
}

/// Pair grid for two extremals, vertices plus centroid otherwise.
fn leaf_grid(k: usize) -> Vec<Vec<f64>> {
    if k == 2 {
        return pair_weight_grid(11);
    }
    let mut grid: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    if k > 1 {
        grid.push(vec![1.0 / k as f64; k]);
    }
    grid
}

fn criterion_6(run: &mut Run) {
    let mut worst_agree: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..11 {
        let x = -1.0 + 0.2 * i as f64;
        let rho = m2_symmetric_state(x).unwrap();
        let res = entanglement_of_formation(&rho, &diag(2), &opts()).unwrap();
        let (a, _) = m2_pair_amplitudes(x);
        let formula = binary_entropy(a * a);
        let brute = brute_force_roof(&rho, &diag(2), 4096, Direction::Min).unwrap();
        let agree = (res.value - formula).abs().max((res.value - brute).abs()).max((formula - brute).abs());
        worst_agree = worst_agree.max(agree);
        match leaf_from_ensemble(&res, &diag(2)) {
            Ok(leaf) => {
                let gap = leaf_linearity_check(&leaf, &leaf_grid(leaf.len()), &opts()).unwrap().max_gap;
                worst_gap = worst_gap.max(gap);
            }
            Err(e) => failures.push(format!("x={x}: {e}")),
        }
        writeln!(run.record, "m2 x={x:?} opt {:?} formula {formula:?} brute {brute:?}", res.value).unwrap();
        run.ensembles.push((format!("m2 x={x:.1}"), res, diag(2)));
    }
    let pass = worst_agree < 1e-4 && worst_gap < 2e-4 && failures.is_empty();
    run.verdict(
        6,
        pass,
        format!("max pairwise disagreement {worst_agree:e}, max leaf gap {worst_gap:e}, uncertified {failures:?}"),
    );
}

fn criterion_7(run: &mut Run) {
    let mut worst: f64 = 0.0;
    let mut certified = 0;
    let mut worst_label = String::new();
    let mut skipped = Vec::new();
    for (label, res, a) in &run.ensembles {
        if leaf_from_ensemble(res, a).is_err() {
            skipped.push(format!("{label} ({:e})", res.stationarity_residual));
            continue;
        }
        certified += 1;
        let vs = res.ensemble.pure_vectors().expect("optimizer ensembles are pure");
        let r = max_pairwise_first_order(vs, a).unwrap();
        if r > worst {
            worst = r;
            worst_label = label.clone();
        }
    }
    let total = run.ensembles.len();
    run.verdict(
        7,
        worst < 1e-4 && certified > 0,
        format!("{certified}/{total} certified, max residual {worst:e} ({worst_label}); uncertified {skipped:?}"),
    );
}

/// `Σ_i ‖ψ_i‖² S(ψ_iψ_i†/‖ψ_i‖² |_A)` with `Ψ = B Vᵀ`, evaluated straight
/// from the restricted entropy so it shares no code with the gradient.
fn independent_objective(b: &HjwFactor, v: &CMatrix, a: &SubalgebraSpec) -> f64 {
    let psi = b.members(v);
    (0..psi.ncols())
        .map(|i| {
            let col = psi.column(i).into_owned();
            let w = col.norm_squared();
            if w < 1e-300 {
                return 0.0;
            }
            let rho = DensityMatrix::from_noisy(&(&col * col.adjoint() / C64::new(w, 0.0))).unwrap();
            w * a.restricted_entropy(&rho).unwrap()
        })
        .sum()
}

fn gradient_config(seed: u64) -> (DensityMatrix, SubalgebraSpec, StiefelPoint) {
    let d = 2 + (seed % 3) as usize;
    let mut rng = stream_rng(seed, 0x9d);
    let rank = 1 + (seed / 3 % d as u64) as usize;
    let rho = random_density(seed, d, rank);
    let a = match (seed / 2) % 3 {
        0 => diag(d),
        1 if d == 4 => SubalgebraSpec::tensor_factor(&[2, 2], &[(seed % 2) as usize]).unwrap(),
        _ => {
            let u = leafspace::random::haar_unitary(seed + 1000, d);
            let blocks = if d == 2 { vec![Block::new(1, 1); 2] } else { vec![Block::new(d - 1, 1), Block::new(1, 1)] };
            SubalgebraSpec::framed(blocks, u).unwrap()
        }
    };
    let n = (rank * rank).max(2);
    let v = StiefelPoint::new(haar_stiefel_with(&mut rng, n, rank)).unwrap();
    (rho, a, v)
}

fn criterion_8(run: &mut Run) {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let (rho, a, v) = gradient_config(seed);
        let g = roof_gradient(&v, &rho, &a).unwrap().euclidean;
        let b = HjwFactor::new(&rho);
        let vm = v.matrix();
        let mut fd = CMatrix::zeros(vm.nrows(), vm.ncols());
        for i in 0..vm.nrows() {
            for j in 0..vm.ncols() {
                let mut parts = [0.0; 2];
                for (k, dir) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].into_iter().enumerate() {
                    let mut plus = vm.clone();
                    plus[(i, j)] += dir * h;
                    let mut minus = vm.clone();
                    minus[(i, j)] -= dir * h;
                    parts[k] = (independent_objective(&b, &plus, &a) - independent_objective(&b, &minus, &a)) / (2.0 * h);
                }
                fd[(i, j)] = C64::new(parts[0], parts[1]);
            }
        }
        let scale = g.norm().max(fd.norm());
        let err = if scale < 1e-12 { 0.0 } else { (&g - &fd).norm() / scale };
        worst = worst.max(err);
    }
    run.verdict(8, worst < 1e-5, format!("max relative error {worst:e} over 50 configurations"));
}

fn criterion_9(run: &mut Run) {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let n = 2 + (seed % 2) as usize;
        let p = random_simplex_with(&mut stream_rng(seed, 0xd1), n);
        let rho = DensityMatrix::diagonal(&p).unwrap();
        let h = conditional_entropy_imbedded(&rho, &diag(n), &opts()).unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        worst = worst.max((h.value - s).abs());
        writeln!(run.record, "condent seed {seed} {:?} {s:?}", h.value).unwrap();
    }
    run.verdict(9, worst < 2e-4, format!("max |H - S| = {worst:e}"));
}

fn criterion_10(run: &mut Run) {
    let t = Instant::now();
    let r = additivity_counterexample(2, &opts()).unwrap();
    let elapsed = t.elapsed();
    let ln2 = 2f64.ln();
    let pass = (r.h_full - 4.0 * ln2).abs() < 1e-6
        && r.h_cc.abs() < 1e-9
        && r.margin > 0.5
        && r.nonadditive
        && elapsed < Duration::from_secs(1200);
    let flagged = r.flags.iter().any(|f| f == "h_ab_differs_from_published");
    run.timed_verdict(
        10,
        pass,
        format!(
            "H_full {:?}, H_AB {:?} (published {:?}, discrepancy flagged: {flagged}), H_CC {:e}, margin {:?}",
            r.h_full, r.h_ab, r.published_h_ab, r.h_cc, r.margin
        ),
        elapsed,
    );
}

fn criterion_11(run: &mut Run) {
    let mut worst: f64 = 0.0;
    for x in [-0.8, -0.3, 0.2, 0.5, 0.9] {
        let res = entanglement_of_formation(&m2_symmetric_state(x).unwrap(), &diag(2), &opts()).unwrap();
        let pushed: Ensemble = gamma_ensemble(&res.ensemble).unwrap();
        let pushed_value = pushed.roof_value(&diag(3)).unwrap();
        let direct = entanglement_of_formation(pushed.target(), &diag(3), &opts()).unwrap();
        worst = worst.max((pushed_value - direct.value).abs());
        writeln!(run.record, "gamma x={x:?} {pushed_value:?} {:?}", direct.value).unwrap();
    }
    run.verdict(11, worst < 2e-4, format!("max |pushed - direct| = {worst:e}"));
}

fn run_library() -> Run {
    let mut run = Run::default();
    criterion_1(&mut run);
    criterion_2(&mut run);
    criterion_3(&mut run);
    criterion_4(&mut run);
    criterion_5(&mut run);
    criterion_6(&mut run);
    criterion_7(&mut run);
    criterion_8(&mut run);
    criterion_9(&mut run);
    criterion_10(&mut run);
    criterion_11(&mut run);
    run
}

const CLI_RUNS: &[&[&str]] = &[
    &["eof", "--preset", "m3:z=0"],
    &["eof", "--preset", "m3:z=0.3333333333333333"],
    &["eof", "--preset", "m3:z=-0.16666666666666666"],
    &["scan-m3", "--steps", "31"],
    &["eof", "--preset", "m2:x=0.6", "--subalg", "diag:n=2"],
    &["leaf-check", "--preset", "m2:x=0.6"],
    &["condent", "--preset", "diag:p=0.2,0.3,0.5", "--subalg", "diag:n=3"],
    &["counterexample", "--n", "2"],
    &["compat", "--preset", "m2:x=0.6", "--steps", "20"],
];

fn cli_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for (k, args) in CLI_RUNS.iter().enumerate() {
        let out = dir.join(format!("run{k}.out"));
        let status = Command::new(env!("CARGO_BIN_EXE_leafspace"))
            .args(*args)
            .arg("--out")
            .arg(&out)
            .status()
            .expect("binary runs");
        assert!(status.code().is_some_and(|c| c == 0 || c == 3), "{args:?} exited with {status}");
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(&format!("run{k}.")))
            .collect();
        entries.sort();
        for p in entries {
            files.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
        }
    }
    files
}

#[test]
fn acceptance_criteria() {
    let first = run_library();
    let second = run_library();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let files: Vec<_> = dirs.iter().map(|d| cli_files(d.path())).collect();
    for d in &dirs {
        std::fs::write(d.path().join("library.txt"), &first.record).unwrap();
    }
    let same_cli = files[0] == files[1];
    let same_lib = first.record == second.record;
    let mut verdicts = first.verdicts;
    verdicts.push(Verdict {
        id: 12,
        pass: same_cli && same_lib,
        detail: format!(
            "library record identical: {same_lib}, {} CLI result files identical: {same_cli}",
            files[0].len()
        ),
    });
    // Written to the raw handle so the lines survive libtest's output capture.
    let mut err = std::io::stderr().lock();
    for v in &verdicts {
        writeln!(err, "criterion {:>2}: {} ({})", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail).unwrap();
    }
    drop(err);
    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
