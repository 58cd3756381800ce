// scratch diagnostics (deleted before release)
use mqcm::collocation::{build_centers, residual_at, solve_linear};
use mqcm::problem::{make_benchmark, validate_registration, DdeProblem};

#[derive(Clone, Copy, Debug)]
enum Variant {
    Printed,     // interior mu*d_j*(1 +- gamma), boundary lambda*mu*d1
    BoostAll,    // interior lambda*mu*d_j*(1 +- gamma), boundary lambda*mu*d1
    BoostAllB2,  // interior lambda*mu*d_j*(1 +- gamma), boundary lambda^2*mu*d1
    FrozenDelta, // interior mu*D0*(1 +- gamma), boundary lambda*mu*D0
}

fn shapes_for(nodes: &[f64], lambda: f64, mu: f64, gamma: f64, d0: f64, v: Variant) -> Vec<f64> {
    let n = nodes.len();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let l = if i > 0 { nodes[i] - nodes[i - 1] } else { f64::INFINITY };
            let r = if i + 1 < n { nodes[i + 1] - nodes[i] } else { f64::INFINITY };
            l.min(r)
        })
        .collect();
    let mut out = Vec::with_capacity(n + 1);
    let (bnd, scale_d): (f64, Box<dyn Fn(usize) -> f64>) = match v {
        Variant::Printed => (lambda * mu * d[0], Box::new(move |i| mu * d[i])),
        Variant::BoostAll => (lambda * mu * d[0], Box::new(move |i| lambda * mu * d[i])),
        Variant::BoostAllB2 => (lambda * lambda * mu * d[0], Box::new(move |i| lambda * mu * d[i])),
        Variant::FrozenDelta => (lambda * mu * d0, Box::new(move |_| mu * d0)),
    };
    out.push(bnd);
    for j in 1..=n {
        if j == n {
            out.push(bnd);
        } else {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            out.push(scale_d(j - 1) * (1.0 + gamma * sign));
        }
    }
    out
}

fn run_variant(
    case_name: &str,
    params: &[(String, f64)],
    n0: usize,
    v: Variant,
    itmax: usize,
    rcond: Option<f64>,
) {
    use mqcm::collocation::{assemble_linear, Interpolant};
    use mqcm::linsolve::pseudo_solve;
    let case = make_benchmark(case_name, params).unwrap();
    let problem = match &case.problem {
        DdeProblem::Linear(p) => p.clone(),
        _ => unreachable!(),
    };
    let (a, b) = (problem.a, problem.b);
    let d0 = (b - a) / (n0 - 1) as f64;
    let mu = (40.0 / n0 as f64).sqrt();
    let (lambda, gamma, eta, tmax, tmin) = (10.0, 0.1, 10.0, 1e-13, 1e-14);

    let mut nodes: Vec<f64> = (0..n0).map(|i| a + (b - a) * i as f64 / (n0 - 1) as f64).collect();
    println!("--- {case_name} {params:?} variant {v:?} rcond {rcond:?}");
    for k in 0..=itmax {
        let mut basis = build_centers(&nodes, 1, d0).unwrap();
        let shapes = shapes_for(&nodes, lambda, mu, gamma, d0, v);
        basis.apply_shapes(&shapes).unwrap();
        if basis.len() > 2500 {
            println!("  it {k}: node explosion ({})", basis.len());
            return;
        }
        let (interp, info) = match rcond {
            None => solve_linear(&problem, &basis).unwrap(),
            Some(rc) => {
                let ns = basis.node_positions();
                let (mat, rhs) = assemble_linear(&problem, &basis, &ns).unwrap();
                let (alpha, info) = pseudo_solve(&mat, &rhs, rc).unwrap();
                (Interpolant::new(basis.clone(), alpha).unwrap(), info)
            }
        };

        let mut rms = 0.0;
        for i in 0..103 {
            let x = a + (b - a) * i as f64 / 102.0;
            let e = interp.eval(x, 0).unwrap() - case.exact.eval(x);
            rms += e * e;
        }
        rms = (rms / 103.0).sqrt();

        let mids: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let absr: Vec<f64> = mids
            .iter()
            .map(|&z| residual_at(&case.problem, &interp, z).unwrap().abs())
            .collect();
        let maxr = absr.iter().cloned().fold(0.0f64, f64::max);
        let alpha_max = interp
            .coefficients()
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        println!(
            "  it {k:2} dof {:4} maxres {maxr:9.3e} kappa {:9.3e} rms {rms:9.3e} |a| {alpha_max:8.2e}",
            basis.len(),
            info.condition
        );
        if maxr < tmax {
            println!("  converged");
            return;
        }
        let theta = tmax.max(maxr / eta);
        let mut next: Vec<f64> = Vec::new();
        for (i, &x) in nodes.iter().enumerate() {
            let del = i > 0 && i + 1 < nodes.len() && absr[i - 1] < tmin && absr[i] < tmin;
            if !del {
                next.push(x);
            }
        }
        for (j, w) in nodes.windows(2).enumerate() {
            if absr[j] > theta {
                next.push(0.5 * (w[0] + w[1]));
            }
        }
        next.sort_by(|p, q| p.partial_cmp(q).unwrap());
        next.dedup_by(|p, q| (*p - *q).abs() < 1e-12 * (b - a));
        nodes = next;
    }
}

fn main() {
    let q = vec![("q".to_string(), 0.5)];
    for rc in [None, Some(f64::EPSILON), Some(1e-17), Some(1e-14)] {
        run_variant("example2", &q, 6, Variant::BoostAll, 16, rc);
    }
}
