//! Quick invariant checks printed as one PASS/FAIL line each.

use subdiff_core::nn::{read_checkpoint, write_checkpoint, Init, Mlp};
use subdiff_core::{
    benchmark_field, benchmark_initial, discover_source, forward_solve, gamma, inject_noise,
    l1_weights, thomas_solve, ExecPolicy, Grid, NoiseKind, NoiseSpec, Problem, TridiagonalSystem,
};

type Check = fn(ExecPolicy) -> Result<String, String>;

fn l1_kernel(_: ExecPolicy) -> Result<String, String> {
    let n = 200;
    let w = l1_weights(0.5, 1e-3, n).map_err(|e| e.to_string())?;
    if w.w(0) <= 0.0 || (1..n).any(|j| w.w(j) >= 0.0) {
        return Err("weight signs".into());
    }
    let sum: f64 = (0..n).map(|j| w.w(j)).sum();
    let gap = (sum + w.start_coefficient(n)).abs() / w.w(0);
    if gap > 1e-12 {
        return Err(format!("telescoping gap {gap:.1e}"));
    }
    Ok(format!("telescoping gap {gap:.1e}"))
}

fn gamma_values(_: ExecPolicy) -> Result<String, String> {
    let half = (gamma(0.5).map_err(|e| e.to_string())? - std::f64::consts::PI.sqrt()).abs();
    let five = (gamma(5.0).map_err(|e| e.to_string())? - 24.0).abs();
    if half > 1e-13 || five > 1e-12 {
        return Err(format!(
            "gamma(0.5) off by {half:.1e}, gamma(5) off by {five:.1e}"
        ));
    }
    Ok(format!("max deviation {:.1e}", half.max(five)))
}

fn thomas(_: ExecPolicy) -> Result<String, String> {
    let n = 50;
    let sys = TridiagonalSystem {
        lower: vec![-1.0; n - 1],
        diag: (0..n).map(|i| 4.0 + (i % 3) as f64).collect(),
        upper: vec![-1.5; n - 1],
        rhs: (0..n).map(|i| (i as f64).sin()).collect(),
    };
    let x = thomas_solve(&sys).map_err(|e| e.to_string())?;
    let res = sys
        .apply(&x)
        .iter()
        .zip(&sys.rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if res > 1e-12 {
        return Err(format!("residual {res:.1e}"));
    }
    Ok(format!("residual {res:.1e}"))
}

fn roundtrip(policy: ExecPolicy) -> Result<String, String> {
    let grid = Grid::unit_square(40).map_err(|e| e.to_string())?;
    let f = benchmark_field(subdiff_core::Example::Ex2, grid).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for alpha in [0.1, 0.5, 1.0] {
        let problem =
            Problem::new(alpha, benchmark_initial, f.clone()).map_err(|e| e.to_string())?;
        let u = forward_solve(&problem, policy).map_err(|e| e.to_string())?;
        let back = discover_source(&u, alpha, policy).map_err(|e| e.to_string())?;
        let scale = f.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (m, n) in grid.masked_nodes() {
            worst = worst.max((back.field().get(m, n) - f.get(m, n)).abs() / scale);
        }
    }
    if worst > 1e-10 {
        return Err(format!("relative mismatch {worst:.1e}"));
    }
    Ok(format!("relative mismatch {worst:.1e}"))
}

fn noise_determinism(_: ExecPolicy) -> Result<String, String> {
    let grid = Grid::unit_square(20).map_err(|e| e.to_string())?;
    let f = benchmark_field(subdiff_core::Example::Ex1, grid).map_err(|e| e.to_string())?;
    let spec = NoiseSpec {
        kind: NoiseKind::Gaussian,
        level: 0.5,
        seed: 7,
    };
    let a = inject_noise(&f, &spec).map_err(|e| e.to_string())?;
    let b = inject_noise(&f, &spec).map_err(|e| e.to_string())?;
    if a.values() != b.values() || a.values() == f.values() {
        return Err("noise not reproducible".into());
    }
    Ok("same seed, same draw".into())
}

fn checkpoint(_: ExecPolicy) -> Result<String, String> {
    let mlp = Mlp::new(&[2, 8, 8, 1], Init::Normal, 11).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_checkpoint(&mlp, &mut buf).map_err(|e| e.to_string())?;
    let back = read_checkpoint(buf.as_slice()).map_err(|e| e.to_string())?;
    if back.layers() != mlp.layers() {
        return Err("parameters changed".into());
    }
    Ok(format!("{} parameters bit-exact", mlp.parameter_count()))
}

const CHECKS: &[(&str, Check)] = &[
    ("gamma function", gamma_values),
    ("L1 kernel", l1_kernel),
    ("tridiagonal solve", thomas),
    ("forward/inverse roundtrip", roundtrip),
    ("noise determinism", noise_determinism),
    ("checkpoint roundtrip", checkpoint),
];

pub fn run(policy: ExecPolicy) -> bool {
    let mut ok = true;
    for (name, check) in CHECKS {
        match check(policy) {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                ok = false;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    ok
}
