//! End-to-end acceptance suite. Each test prints one PASS/FAIL line with
//! the measured quantity next to its threshold; thresholds are fixed here,
//! not tuned at runtime.

use std::path::Path;
use std::process::Command;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use somtest::*;

const ALPHA: f64 = 0.1;
/// Exact binomial 99% acceptance band around 0.1 with 200 repetitions.
const TYPE1_BAND: (f64, f64) = (0.045, 0.155);
const REPS: usize = 200;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "{} {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

/// Rejection rate of `method` at alpha = 0.1 over `reps` generated pairs.
fn rejection_rate(
    method: Method,
    family: Family,
    dim: usize,
    n: usize,
    reps: usize,
    under_null: bool,
    seed_base: u64,
) -> f64 {
    let base = GeneratorSpec::new(family, dim, 0);
    let rejects: usize = (0..reps)
        .into_par_iter()
        .map(|i| {
            let spec = base.with_seed(seed_base.wrapping_add(i as u64));
            let (x, z) = sample_pair(&spec, n, n, under_null).unwrap();
            let params = TestParams::new(seed_base.wrapping_add(100_000 + i as u64));
            let res = run_test(method, &x, &z, &params).unwrap();
            usize::from(res.p_value <= ALPHA)
        })
        .sum();
    rejects as f64 / reps as f64
}

#[test]
fn calibration_type1_error_within_band() {
    for method in Method::ALL {
        let rate = rejection_rate(method, Family::GaussLocation, 5, 500, REPS, true, 1_000);
        report(
            "calibration",
            (TYPE1_BAND.0..=TYPE1_BAND.1).contains(&rate),
            &format!(
                "{}: type I rate {rate:.3} within [{}, {}] at alpha {ALPHA}",
                method.name(),
                TYPE1_BAND.0,
                TYPE1_BAND.1
            ),
        );
    }
}

#[test]
fn location_power_at_dim_10() {
    let thresholds = [
        (Method::SomChi2, 0.95),
        (Method::KnnCoincidence, 0.95),
        (Method::C2stNn, 0.8),
        (Method::C2stKnn, 0.8),
    ];
    for (method, min_power) in thresholds {
        let power = rejection_rate(method, Family::GaussLocation, 10, 500, REPS, false, 2_000);
        report(
            "location-power",
            power >= min_power,
            &format!("{}: power {power:.3} >= {min_power}", method.name()),
        );
    }
}

#[test]
fn fair_location_gains_nothing_from_dimensions() {
    for method in Method::ALL {
        let p1 = rejection_rate(method, Family::GaussFairLocation, 1, 500, REPS, false, 3_000);
        let p10 = rejection_rate(method, Family::GaussFairLocation, 10, 500, REPS, false, 4_000);
        report(
            "fair-location",
            p10 <= p1 + 0.05,
            &format!(
                "{}: power at d=10 ({p10:.3}) <= power at d=1 ({p1:.3}) + 0.05",
                method.name()
            ),
        );
    }
}

#[test]
fn chi2_matches_independent_oracles() {
    // Direct summation of the statistic, coded separately from the library.
    fn stat_oracle(r: &[usize], s: &[usize]) -> Option<(f64, usize)> {
        let nx: usize = r.iter().sum();
        let nz: usize = s.iter().sum();
        let k1 = (nz as f64 / nx as f64).sqrt();
        let k2 = (nx as f64 / nz as f64).sqrt();
        let mut total = 0.0;
        let mut occupied = 0;
        for (&ri, &si) in r.iter().zip(s) {
            if ri + si > 0 {
                occupied += 1;
                let d = k1 * ri as f64 - k2 * si as f64;
                total += d * d / (ri + si) as f64;
            }
        }
        let c = usize::from(nx == nz);
        (occupied > c).then_some((total, occupied - c))
    }

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let cells = rng.gen_range(1..=25);
        let r: Vec<usize> = (0..cells).map(|_| rng.gen_range(0..=50)).collect();
        let s: Vec<usize> = (0..cells).map(|_| rng.gen_range(0..=50)).collect();
        if r.iter().sum::<usize>() == 0 || s.iter().sum::<usize>() == 0 {
            continue;
        }
        let grid = CountGrid::from_counts(r.clone(), s.clone()).unwrap();
        match (chi2_from_counts(&grid), stat_oracle(&r, &s)) {
            (Ok((stat, dof)), Some((ostat, odof))) => {
                assert_eq!(dof, odof);
                worst = worst.max((stat - ostat).abs());
            }
            (Err(_), None) => {}
            other => panic!("oracle disagreement: {other:?}"),
        }
        checked += 1;
    }
    report(
        "chi2-statistic-oracle",
        worst < 1e-9,
        &format!("1000 random count grids, max |difference| {worst:.2e} < 1e-9"),
    );

    // Survival function against a standalone Lentz continued fraction
    // (tail regime) and the Poisson partial sum (even dofs, any x).
    fn ln_gamma_stirling(mut a: f64) -> f64 {
        let mut shift = 0.0;
        while a < 12.0 {
            shift -= a.ln();
            a += 1.0;
        }
        const B: [f64; 6] = [
            1.0 / 12.0,
            -1.0 / 360.0,
            1.0 / 1260.0,
            -1.0 / 1680.0,
            1.0 / 1188.0,
            -691.0 / 360_360.0,
        ];
        let mut series = 0.0;
        let mut pow = a;
        for b in B {
            series += b / pow;
            pow *= a * a;
        }
        shift + (a - 0.5) * a.ln() - a + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
    }
    fn cf_oracle(a: f64, x: f64) -> f64 {
        let mut num = x + 1.0 - a;
        let mut c = 1.0 / 1e-308;
        let mut d = 1.0 / num;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            num += 2.0;
            d = an * d + num;
            if d.abs() < 1e-308 {
                d = 1e-308;
            }
            c = num + an / c;
            if c.abs() < 1e-308 {
                c = 1e-308;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        (-x + a * x.ln() - ln_gamma_stirling(a)).exp() * h
    }
    fn poisson_oracle(dof: usize, x: f64) -> f64 {
        // P(chi2_2k >= x) = exp(-x/2) * sum_{j<k} (x/2)^j / j!
        let k = dof / 2;
        let lam = x / 2.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..k {
            term *= lam / j as f64;
            sum += term;
        }
        (-lam).exp() * sum
    }

    let mut worst_sf: f64 = 0.0;
    for dof in [1usize, 2, 3, 5, 10, 30, 60] {
        let a = dof as f64 / 2.0;
        for step in 1..=40 {
            let x = step as f64 * 2.5;
            if x / 2.0 >= a + 1.0 {
                let diff = (chi2_sf(x, dof).unwrap() - cf_oracle(a, x / 2.0)).abs();
                worst_sf = worst_sf.max(diff);
            }
        }
    }
    for dof in [2usize, 4, 8, 20] {
        for step in 1..=60 {
            let x = step as f64 * 0.5;
            let diff = (chi2_sf(x, dof).unwrap() - poisson_oracle(dof, x)).abs();
            worst_sf = worst_sf.max(diff);
        }
    }
    report(
        "chi2-sf-oracle",
        worst_sf < 1e-8,
        &format!("survival function max |difference| {worst_sf:.2e} < 1e-8"),
    );
}

#[test]
fn small_instances_match_exact_enumeration() {
    // Independent oracle: full neighbor sort and recursive enumeration of
    // every label assignment.
    fn oracle_pvalue(x: &Dataset, z: &Dataset, k: usize) -> f64 {
        let n = x.n() + z.n();
        let mut points: Vec<Vec<f64>> = Vec::new();
        for row in x.view().rows() {
            points.push(row.to_vec());
        }
        for row in z.view().rows() {
            points.push(row.to_vec());
        }
        let mut neighbors = Vec::new();
        for i in 0..n {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist: f64 = points[i]
                        .iter()
                        .zip(&points[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            neighbors.push(d.into_iter().take(k).map(|(_, j)| j).collect::<Vec<_>>());
        }
        let t_of = |plus: &[bool]| -> usize {
            let mut t = 0;
            for i in 0..n {
                for &j in &neighbors[i] {
                    if plus[i] == plus[j] {
                        t += 1;
                    }
                }
            }
            t
        };
        let mut observed_labels = vec![false; n];
        for l in observed_labels.iter_mut().take(x.n()) {
            *l = true;
        }
        let observed = t_of(&observed_labels);

        let mut total = 0usize;
        let mut at_least = 0usize;
        fn recurse(
            labels: &mut Vec<bool>,
            start: usize,
            remaining: usize,
            t_of: &dyn Fn(&[bool]) -> usize,
            observed: usize,
            total: &mut usize,
            at_least: &mut usize,
        ) {
            if remaining == 0 {
                *total += 1;
                if t_of(labels) >= observed {
                    *at_least += 1;
                }
                return;
            }
            if labels.len() - start < remaining {
                return;
            }
            labels[start] = true;
            recurse(labels, start + 1, remaining - 1, t_of, observed, total, at_least);
            labels[start] = false;
            recurse(labels, start + 1, remaining, t_of, observed, total, at_least);
        }
        let mut scratch = vec![false; n];
        recurse(&mut scratch, 0, x.n(), &t_of, observed, &mut total, &mut at_least);
        at_least as f64 / total as f64
    }

    // The two isolated pairs: p must be exactly 2/6.
    let x = Dataset::from_rows(&[vec![0.0], vec![0.1]]).unwrap();
    let z = Dataset::from_rows(&[vec![10.0], vec![10.1]]).unwrap();
    let res = knn_coincidence_test(&x, &z, 1, 199, 0).unwrap();
    report(
        "exact-enumeration",
        res.p_value == 2.0 / 6.0 && res.p_value == oracle_pvalue(&x, &z, 1),
        &format!("two isolated pairs: p = {} (exactly 2/6)", res.p_value),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = 0;
    for (nx, nz, dim) in [(2usize, 6usize, 1usize), (3, 5, 2), (4, 4, 2), (3, 3, 1)] {
        for k in [1usize, 3] {
            let gen = |n: usize, rng: &mut ChaCha8Rng| {
                Dataset::from_rows(
                    &(0..n)
                        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                        .collect::<Vec<_>>(),
                )
                .unwrap()
            };
            let x = gen(nx, &mut rng);
            let z = gen(nz, &mut rng);
            let res = knn_coincidence_test(&x, &z, k, 199, 1).unwrap();
            let expected = oracle_pvalue(&x, &z, k);
            assert_eq!(
                res.p_value, expected,
                "pooled {nx}+{nz}, k={k}: {} vs {expected}",
                res.p_value
            );
            cases += 1;
        }
    }
    report(
        "exact-enumeration",
        true,
        &format!("{cases} randomized pooled-size<=8 cases match the enumeration oracle exactly"),
    );
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    for config in 0..20 {
        let dim = 1 + (config % 6);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let labels: Vec<i32> = (0..5)
            .map(|i| if (i + config) % 2 == 0 { -1 } else { 1 })
            .collect();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let data = Dataset::with_labels(
            Array2::from_shape_vec((5, dim), flat).unwrap(),
            labels,
        )
        .unwrap();
        let model = MlpModel::new_random(dim, 500 + config as u64);
        let analytic = model.loss_gradients(&data).unwrap();

        let params = model.flat_params();
        let step = 1e-5;
        let mut probe = model.clone();
        let mut sq_diff = 0.0;
        let mut sq_norm = 0.0;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += step;
            probe.set_flat_params(&p).unwrap();
            let up = probe.loss(&data).unwrap();
            p[i] = params[i] - step;
            probe.set_flat_params(&p).unwrap();
            let down = probe.loss(&data).unwrap();
            let numeric = (up - down) / (2.0 * step);
            sq_diff += (analytic[i] - numeric) * (analytic[i] - numeric);
            sq_norm += analytic[i] * analytic[i];
        }
        let rel = sq_diff.sqrt() / sq_norm.sqrt().max(1e-12);
        worst = worst.max(rel);
    }
    report(
        "mlp-gradient-check",
        worst <= 1e-4,
        &format!("20 configurations, worst relative error {worst:.2e} <= 1e-4"),
    );
}

#[test]
fn mmd_block_50_calibrates_too() {
    // Same null setting with an explicit block size of 50.
    let rejects: usize = (0..REPS)
        .into_par_iter()
        .map(|i| {
            let spec = GeneratorSpec::new(Family::GaussLocation, 5, 40_000 + i as u64);
            let (x, z) = sample_pair(&spec, 500, 500, true).unwrap();
            let res = mmd_block_test(&x, &z, 50, None, 41_000 + i as u64).unwrap();
            usize::from(res.p_value <= ALPHA)
        })
        .sum();
    let rate = rejects as f64 / REPS as f64;
    report(
        "mmd-block-50",
        (0.03..=0.18).contains(&rate),
        &format!("rejection rate {rate:.3} within [0.03, 0.18] under the null"),
    );
}

#[test]
fn null_pvalues_close_to_uniform() {
    let pvalues: Vec<f64> = (0..REPS)
        .into_par_iter()
        .map(|i| {
            let spec = GeneratorSpec::new(Family::GaussLocation, 5, 7_000 + i as u64);
            let (x, z) = sample_pair(&spec, 500, 500, true).unwrap();
            let params = TestParams::new(9_000 + i as u64);
            run_test(Method::SomChi2, &x, &z, &params).unwrap().p_value
        })
        .collect();
    let mut sorted = pvalues;
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, p) in sorted.iter().enumerate() {
        ks = ks
            .max((p - i as f64 / n).abs())
            .max((p - (i + 1) as f64 / n).abs());
    }
    report(
        "null-pvalue-uniformity",
        ks < 0.15,
        &format!("KS distance from uniform {ks:.3} < 0.15 over {REPS} null runs"),
    );
}

#[test]
fn topology_adjacent_neurons_stay_close() {
    let mut passes = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let geom = MapGeometry::new(10, 10).unwrap();
        let schedule = TrainSchedule {
            epochs: 20,
            ..TrainSchedule::for_geometry(&geom).with_seed(seed)
        };
        let model = fit_som(&data, geom, &schedule).unwrap();
        let cb = model.codebook();
        let dist = |a: usize, b: usize| -> f64 {
            cb.row(a)
                .iter()
                .zip(cb.row(b).iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let mut adj_sum = 0.0;
        let mut adj_count = 0;
        for a in 0..geom.neuron_count() {
            for b in (a + 1)..geom.neuron_count() {
                if geom.grid_distance_sq(a, b) == 1.0 {
                    adj_sum += dist(a, b);
                    adj_count += 1;
                }
            }
        }
        let adjacent = adj_sum / adj_count as f64;
        let mut rand_sum = 0.0;
        let mut sampled = 0;
        while sampled < 1000 {
            let a = rng.gen_range(0..geom.neuron_count());
            let b = rng.gen_range(0..geom.neuron_count());
            if a == b || geom.grid_distance_sq(a, b) == 1.0 {
                continue;
            }
            rand_sum += dist(a, b);
            sampled += 1;
        }
        if adjacent < rand_sum / 1000.0 {
            passes += 1;
        }
    }
    report(
        "topology-preservation",
        passes >= 19,
        &format!("adjacent < random mean distance in {passes}/20 seeded runs (need >= 19)"),
    );
}

#[test]
fn som_classifier_tracks_bayes_accuracy() {
    // Two unit-variance Gaussians two apart: Bayes accuracy is Phi(1) = 0.841.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..1000 {
        let v: f64 = StandardNormal.sample(&mut rng);
        rows.push(v);
        labels.push(-1);
        let v: f64 = StandardNormal.sample(&mut rng);
        rows.push(2.0 + v);
        labels.push(1);
    }
    let data = Dataset::with_labels(
        Array2::from_shape_vec((2000, 1), rows).unwrap(),
        labels,
    )
    .unwrap();
    let geom = MapGeometry::new(10, 10).unwrap();
    let schedule = TrainSchedule::for_geometry(&geom).with_seed(5);
    let acc = som_classifier_cv(&data, geom, &schedule, 50).unwrap();
    report(
        "som-classifier",
        (acc - 0.84).abs() <= 0.05,
        &format!("50-fold majority-rule accuracy {acc:.4} within 0.84 +- 0.05"),
    );
}

#[test]
fn cli_outputs_are_byte_identical() {
    let bin = env!("CARGO_BIN_EXE_somtest");
    let dir = tempfile::tempdir().unwrap();
    let x_csv = dir.path().join("x.csv");
    let z_csv = dir.path().join("z.csv");
    let spec = GeneratorSpec::new(Family::GaussLocation, 3, 99);
    somtest::cli::write_sample_csvs(&spec, 120, 120, false, &x_csv, &z_csv).unwrap();

    let run_ok = |args: &[&str]| {
        let out = Command::new(bin).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let read = |p: &Path| std::fs::read(p).unwrap();

    // som test twice: all five artifacts byte-identical.
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&[
            "test",
            x_csv.to_str().unwrap(),
            z_csv.to_str().unwrap(),
            "--method",
            "som",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let artifacts = [
        "result.json",
        "som_model.json",
        "counts.json",
        "relative_difference.json",
        "codebook_planes.json",
    ];
    for name in artifacts {
        assert_eq!(
            read(&a.join(name)),
            read(&b.join(name)),
            "artifact {name} differs between identical runs"
        );
    }

    // every other method: result documents byte-identical.
    for method in ["knn", "c2st-nn", "c2st-knn", "mmd"] {
        let (ma, mb) = (
            dir.path().join(format!("{method}-a")),
            dir.path().join(format!("{method}-b")),
        );
        for out in [&ma, &mb] {
            run_ok(&[
                "test",
                x_csv.to_str().unwrap(),
                z_csv.to_str().unwrap(),
                "--method",
                method,
                "--seed",
                "7",
                "--out",
                out.to_str().unwrap(),
            ]);
        }
        assert_eq!(
            read(&ma.join("result.json")),
            read(&mb.join("result.json")),
            "{method} result differs between identical runs"
        );
    }

    // export twice from the saved model.
    let (ea, eb) = (dir.path().join("ea"), dir.path().join("eb"));
    for out in [&ea, &eb] {
        run_ok(&[
            "export",
            "--model",
            a.join("som_model.json").to_str().unwrap(),
            x_csv.to_str().unwrap(),
            z_csv.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    for name in ["counts.json", "relative_difference.json", "codebook_planes.json"] {
        assert_eq!(read(&ea.join(name)), read(&eb.join(name)));
    }

    // power twice: rows identical except the wall-clock column.
    let (pa, pb) = (dir.path().join("pa.csv"), dir.path().join("pb.csv"));
    for out in [&pa, &pb] {
        run_ok(&[
            "power",
            "--method",
            "som",
            "--family",
            "gauss-location",
            "--dim",
            "3",
            "--n",
            "80",
            "--reps",
            "20",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let strip_runtime = |text: String| -> Vec<String> {
        text.lines()
            .map(|line| {
                let cells: Vec<&str> = line.split(',').collect();
                cells[..cells.len().saturating_sub(1)].join(",")
            })
            .collect()
    };
    let ra = strip_runtime(std::fs::read_to_string(&pa).unwrap());
    let rb = strip_runtime(std::fs::read_to_string(&pb).unwrap());
    assert_eq!(ra, rb, "statistical power columns differ between identical runs");

    report(
        "cli-determinism",
        true,
        "test/export artifacts byte-identical; power rows identical up to wall-clock",
    );
}
