//! Derivative-free Nelder–Mead simplex minimizer.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values is below `ftol * max(1, |f_best|)`.
    pub ftol: f64,
    /// ... and every vertex is within `xtol` (infinity norm) of the best one.
    pub xtol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 2_000,
            ftol: 1e-12,
            xtol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`, with the initial simplex built from per-axis `steps`.
///
/// `f` may return `+inf` to mark infeasible points. Restarts once from the
/// best vertex after the first convergence to guard against collapsed simplices.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len());
    let mut evals = 0;
    let mut best = run(&mut f, x0, steps, opts, &mut evals);
    if best.converged && evals < opts.max_evals {
        let restart = run(&mut f, &best.x.clone(), steps, opts, &mut evals);
        let converged = restart.converged;
        if restart.value <= best.value {
            best = restart;
        }
        best.converged = converged;
    }
    best.evals = evals;
    best
}

fn run<F>(f: &mut F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions, evals: &mut usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let dim = x0.len();
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0, evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x, evals);
        simplex.push((x, v));
    }

    let mut converged = false;
    while *evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[dim].1;
        let spread = f_worst - f_best;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_best.is_finite() && spread <= opts.ftol * f_best.abs().max(1.0) && size <= opts.xtol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-ALPHA);
        let fr = eval(&xr, evals);
        if fr < simplex[0].1 {
            let xe = along(-GAMMA);
            let fe = eval(&xe, evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[dim].1 {
            let xc = along(-RHO);
            let fc = eval(&xc, evals);
            (xc, fc)
        } else {
            let xc = along(RHO);
            let fc = eval(&xc, evals);
            (xc, fc)
        };
        if fc < fr.min(simplex[dim].1) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + SIGMA * (v - b)).collect();
            let v = eval(&x, evals);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evals: *evals,
        converged,
    }
}
