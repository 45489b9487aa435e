//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fkup_core::energies::{continuum_energy_meso, continuum_f, continuum_f_eps, discrete_energy_of, grad_discrete};
use fkup_core::functions::{dirichlet_energy, interpolate, var_of_p_composed};
use fkup_core::harness::{self, ExperimentConfig, SweepResult};
use fkup_core::{
    ChainState, Direction, EnergyKind, HeteroclinicProfile, MesoscaleParams, PairPotentialSpec, PiecewiseAffine,
    TwoScaleParams, UniformPartition, WeakPotential,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn run(json: &str) -> SweepResult {
    harness::run(&ExperimentConfig::from_json(json).expect("valid config")).expect("experiment runs")
}

fn failed_checks(r: &SweepResult) -> String {
    r.checks
        .iter()
        .map(|c| format!("{}={} ({})", c.name, if c.passed { "ok" } else { "FAIL" }, c.detail))
        .collect::<Vec<_>>()
        .join("; ")
}

fn c1(pot: &WeakPotential) -> Outcome {
    let r = pot.validate();
    outcome(
        r.passed && r.curvature_at_well > 0.0 && r.min_w_off_integers > 0.0,
        format!(
            "|w(m)| {:.1e}, min w off Z {:.3e}, w''(0) {:.3}, period {:.1e}, symmetry {:.1e}",
            r.max_abs_w_at_integers,
            r.min_w_off_integers,
            r.curvature_at_well,
            r.max_periodicity_defect,
            r.max_symmetry_defect
        ),
    )
}

fn c2() -> Outcome {
    let r = run(r#"{"experiment":"gap-order","parameter_grid":[[0.2],[0.1],[0.05],[0.025]],"test_profile":"reference"}"#);
    let order = r.fitted_order.unwrap_or(f64::NAN);
    outcome((1.8..=2.2).contains(&order), format!("fitted slope {order:.4}"))
}

fn c3(pot: &WeakPotential) -> Outcome {
    let oracle = 2.0 * simpson(|x| pot.sqrt_w(x), 0.0, 1.0, 1_000_000);
    let p_bar = pot.p_bar();
    let agree = (oracle - p_bar).abs();
    let r = run(r#"{"experiment":"minimize","parameter_grid":[[0.05]],"window_halfwidth":20}"#);
    let energy = r.rows[0].energy;
    let rel = (energy - oracle).abs() / oracle;
    outcome(
        agree <= 1e-8 && rel <= 0.01,
        format!("p_bar {p_bar:.10} vs Simpson {oracle:.10} (diff {agree:.1e}); energy {energy:.6}, rel err {rel:.4}"),
    )
}

fn c4(pot: &WeakPotential) -> Outcome {
    let profile = HeteroclinicProfile::new(pot, 1e-4, Direction::Increasing).expect("profile builds");
    let (kin, pw) = profile.energy_split(pot);
    let p_bar = pot.p_bar();
    let tol = 1e-4 * p_bar;
    let d = (kin - pw).abs();
    let (dk, dp) = ((kin - p_bar / 2.0).abs(), (pw - p_bar / 2.0).abs());
    outcome(
        d <= tol && dk <= tol && dp <= tol,
        format!("|K - W| {d:.2e}, |K - p/2| {dk:.2e}, |W - p/2| {dp:.2e}, bound {tol:.2e}"),
    )
}

fn c5() -> Outcome {
    let r = run(
        r#"{"experiment":"recovery","parameter_grid":[[0.1,0.1],[0.01,0.05],[0.001,0.01]],
            "target":{"breakpoints":[0.0],"levels":[0,1]}}"#,
    );
    let errs: Vec<f64> = r.rows.iter().map(|x| x.relative_error).collect();
    let last = *errs.last().unwrap();
    let monotone = errs.windows(2).all(|e| e[1] < e[0]);
    outcome(
        r.passed && last <= 0.02 && monotone,
        format!("rel errs {errs:.4?}; {}", failed_checks(&r)),
    )
}

fn c6() -> Outcome {
    let k2 = run(
        r#"{"experiment":"recovery","parameter_grid":[[0.001,0.01]],
            "target":{"breakpoints":[0.0],"levels":[0,2]}}"#,
    );
    let e2 = k2.rows[0].relative_error;
    let multi = run(
        r#"{"experiment":"recovery","parameter_grid":[[0.001,0.01]],
            "target":{"breakpoints":[0.0,5.0],"levels":[0,2,1]}}"#,
    );
    let e3 = multi.rows[0].relative_error;
    outcome(
        e2 <= 0.03 && e3 <= 0.05,
        format!("K=2 rel err {e2:.4} (<= 0.03), (0,2,1) rel err {e3:.4} (<= 0.05)"),
    )
}

fn random_admissible(rng: &mut ChaCha8Rng) -> PiecewiseAffine {
    let delta = [0.2, 0.1, 0.05][rng.gen_range(0..3)];
    let halfwidth = rng.gen_range(2..7) as f64;
    let part = UniformPartition::symmetric(delta, halfwidth).unwrap();
    let n = part.len();
    let (left, right) = (rng.gen_range(-1..=1) as f64, rng.gen_range(0..=2) as f64);
    let mut v: Vec<f64> = match rng.gen_range(0..3) {
        // Generic values.
        0 => (0..n).map(|_| rng.gen_range(-1.5..2.5)).collect(),
        // A random walk.
        1 => {
            let mut x = left;
            (0..n)
                .map(|_| {
                    x += rng.gen_range(-0.3..0.3);
                    x
                })
                .collect()
        }
        // Near-optimal walls of random width.
        _ => {
            let width = rng.gen_range(0.2..3.0);
            let c = rng.gen_range(-1.0..1.0);
            part.nodes()
                .map(|x| left + (right - left) * 0.5 * (1.0 + ((x - c) / width).tanh()))
                .collect()
        }
    };
    v[0] = left;
    v[n - 1] = right;
    PiecewiseAffine::new(part, v).unwrap()
}

fn c7(pot: &WeakPotential) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let g = random_admissible(&mut rng);
        let mp = MesoscaleParams::new(g.spacing()).unwrap();
        let e = continuum_energy_meso(&g, pot, &mp).unwrap();
        let var = var_of_p_composed(&g, pot).unwrap();
        worst = worst.max(var - e);
        if e < var - 1e-7 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations, max(var - E) {worst:.3e}"))
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for _ in 0..100 {
        let terms: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..5))
            .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(0.2..4.0), rng.gen_range(-5.0..5.0)))
            .collect();
        let (om, ph) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..6.0));
        let f = |x: f64| {
            terms.iter().map(|&(a, b, c)| a * (b * (x - c)).tanh()).sum::<f64>() + 0.3 * (om * x + ph).sin()
        };
        let df = |x: f64| {
            terms.iter().map(|&(a, b, c)| a * b / (b * (x - c)).cosh().powi(2)).sum::<f64>()
                + 0.3 * om * (om * x + ph).cos()
        };
        let delta = [0.5, 0.2, 0.1, 0.05][rng.gen_range(0..4)];
        let part = UniformPartition::symmetric(delta, 10.0).unwrap();
        let g = interpolate(f, &part, (f(part.left()), f(part.right()))).unwrap();
        let smooth = simpson(|x| df(x).powi(2), part.left(), part.right(), 400_000);
        let discrete = dirichlet_energy(&g);
        min_margin = min_margin.min(smooth - discrete);
        if discrete > smooth * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations, min(smooth - interpolant) {min_margin:.3e}"))
}

fn c9() -> Outcome {
    let r = run(
        r#"{"experiment":"minimize","parameter_grid":[[0.02,0.05]],"window_halfwidth":20,
            "boundary":{"m_left":0,"m_right":2}}"#,
    );
    let row = &r.rows[0];
    let walls = row.wall_count.unwrap_or(0);
    outcome(
        row.relative_error <= 0.05 && walls == 2,
        format!("energy {:.6}, rel err {:.4}, wall_count {walls}", row.energy, row.relative_error),
    )
}

fn c10(pot: &WeakPotential) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let delta = [0.2, 0.1, 0.05][rng.gen_range(0..3)];
        let kind = if k % 2 == 0 {
            EnergyKind::Meso(MesoscaleParams::new(delta).unwrap())
        } else {
            EnergyKind::TwoScale(TwoScaleParams::new([0.1, 0.02][rng.gen_range(0..2)], delta).unwrap())
        };
        let n = rng.gen_range(5..60);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..2.5)).collect();
        let c = ChainState::new(kind.spacing(), -(n as i64) / 2, values.clone()).unwrap();
        let g = grad_discrete(&c, pot, &kind).unwrap();
        let h = 1e-5;
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for i in 1..n - 1 {
            let e = |dx: f64| {
                let mut v = values.clone();
                v[i] += dx;
                discrete_energy_of(&ChainState::new(kind.spacing(), c.i_min(), v).unwrap(), pot, &kind).unwrap()
            };
            let fd = (e(h) - e(-h)) / (2.0 * h);
            err = err.max((fd - g[i]).abs());
            scale = scale.max(g[i].abs());
        }
        worst = worst.max(err / scale.max(1.0));
    }
    outcome(worst <= 1e-6, format!("max relative deviation {worst:.2e} over 100 chains of each kind"))
}

fn c11(pot: &WeakPotential) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let delta = [0.2, 0.1, 0.05][rng.gen_range(0..3)];
        let n = rng.gen_range(3..120);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..2.5)).collect();
        let g = PiecewiseAffine::new(UniformPartition::new(delta, -(n as i64) / 2, n as i64 - 1 - n as i64 / 2).unwrap(), values)
            .unwrap();
        let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
        let f = continuum_f(&g, pot);
        let fe = continuum_f_eps(&g.dilated(eps).unwrap(), pot, eps).unwrap();
        worst = worst.max((f - fe).abs() / f.max(1.0));
    }
    outcome(worst <= 1e-10, format!("max relative deviation {worst:.2e}"))
}

fn main() -> ExitCode {
    let pot = WeakPotential::new(PairPotentialSpec::default()).expect("default potential builds");
    type Criterion<'a> = (&'a str, f64, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("potential validity", 1.0, Box::new(|| c1(&pot))),
        ("discrete/continuum gap order", 10.0, Box::new(c2)),
        ("mesoscale limit energy", 30.0, Box::new(|| c3(&pot))),
        ("wall equipartition", 1.0, Box::new(|| c4(&pot))),
        ("unit-step recovery", 10.0, Box::new(c5)),
        ("multi-jump recovery", 20.0, Box::new(c6)),
        ("variation lower bound", 30.0, Box::new(|| c7(&pot))),
        ("interpolation energy bound", 10.0, Box::new(c8)),
        ("two-scale minimization", 60.0, Box::new(c9)),
        ("gradient vs finite differences", 5.0, Box::new(|| c10(&pot))),
        ("dilation identity", 5.0, Box::new(|| c11(&pot))),
    ];
    let mut all = true;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs_f64(*limit);
        let passed = o.passed && in_time;
        all &= passed;
        println!(
            "{} criterion {:>2} [{name}]: {} ({:.2} s, limit {limit} s)",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
