//! Derivative-free Nelder-Mead simplex minimizer.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Hard budget of objective evaluations.
    pub max_evaluations: usize,
    /// Converged once `f_worst - f_best <= tolerance * |f_best|` over the simplex.
    pub tolerance: f64,
    /// Restarts from the best vertex after convergence, guarding against a
    /// collapsed simplex.
    pub max_restarts: usize,
}

impl NelderMeadOptions {
    /// Defaults scaled to the problem dimension: `500 * dim` evaluations,
    /// relative tolerance 1e-8.
    pub fn for_dimension(dim: usize) -> Self {
        Self {
            max_evaluations: 500 * dim.max(1),
            tolerance: 1e-8,
            max_restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` starting from `x0` with initial simplex edge lengths `steps`.
///
/// Returns [`Error::NonConvergence`] carrying the best iterate when the
/// evaluation budget runs out first.
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], options: NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    if x0.is_empty() || x0.len() != steps.len() {
        return Err(Error::invalid("simplex start and step vectors must be non-empty and equal length"));
    }
    let mut counted = Counted { f, evaluations: 0 };
    let mut best = x0.to_vec();
    let mut best_value = counted.eval(&best);
    let mut restarts = 0;
    loop {
        let (x, value, converged) = run_simplex(&mut counted, &best, steps, &options);
        let improved = best_value - value > options.tolerance * value.abs();
        if value <= best_value {
            best = x;
            best_value = value;
        }
        if !converged {
            return Err(Error::NonConvergence {
                last: best,
                objective: best_value,
                evaluations: counted.evaluations,
            });
        }
        if restarts >= options.max_restarts || (restarts > 0 && !improved) {
            return Ok(Minimum {
                x: best,
                value: best_value,
                evaluations: counted.evaluations,
            });
        }
        restarts += 1;
    }
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    f: &mut Counted<F>,
    start: &[f64],
    steps: &[f64],
    options: &NelderMeadOptions,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for (i, step) in steps.iter().enumerate() {
        let mut v = start.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f.eval(v)).collect();

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (f_best, f_worst) = (values[0], values[n]);
        if f_worst - f_best <= options.tolerance * f_best.abs() {
            return (simplex.swap_remove(0), f_best, true);
        }
        if f.evaluations >= options.max_evaluations {
            return (simplex.swap_remove(0), f_best, false);
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let toward = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (w - c))
                .collect()
        };

        let reflected = toward(-1.0);
        let f_reflected = f.eval(&reflected);
        if f_reflected < values[0] {
            let expanded = toward(-2.0);
            let f_expanded = f.eval(&expanded);
            if f_expanded < f_reflected {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_reflected;
            continue;
        }
        let (contracted, f_contracted) = if f_reflected < values[n] {
            let c = toward(-0.5);
            let fc = f.eval(&c);
            (c, fc)
        } else {
            let c = toward(0.5);
            let fc = f.eval(&c);
            (c, fc)
        };
        if f_contracted < values[n].min(f_reflected) {
            simplex[n] = contracted;
            values[n] = f_contracted;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            values[i] = f.eval(&shrunk);
            simplex[i] = shrunk;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + 2.0;
        let m = nelder_mead(f, &[0.0, 0.0], &[1.0, 1.0], NelderMeadOptions::for_dimension(2)).unwrap();
        assert!((m.x[0] - 3.0).abs() < 1e-3);
        assert!((m.x[1] + 1.0).abs() < 1e-3);
        assert!((m.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2) + 1.0;
        let opts = NelderMeadOptions {
            max_evaluations: 5000,
            tolerance: 1e-12,
            max_restarts: 3,
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], opts).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn budget_exhaustion_reports_last_iterate() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() + 1.0;
        let opts = NelderMeadOptions {
            max_evaluations: 10,
            tolerance: 1e-14,
            max_restarts: 0,
        };
        match nelder_mead(f, &[10.0, 10.0, 10.0], &[1.0; 3], opts) {
            Err(Error::NonConvergence { last, objective, evaluations }) => {
                assert_eq!(last.len(), 3);
                assert!(objective < 244.0);
                assert!(evaluations >= 10);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| (x[0].sin() + 2.0) * (1.0 + x[0] * x[0]);
        let start = f(&[0.7]);
        let m = nelder_mead(f, &[0.7], &[0.3], NelderMeadOptions::for_dimension(1)).unwrap();
        assert!(m.value <= start);
    }
}
