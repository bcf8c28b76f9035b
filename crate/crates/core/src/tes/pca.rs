use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::{Result, TesError, TraceSet};

/// Rows per partial sum; fixed so reductions do not depend on thread count.
const BLOCK_ROWS: usize = 4096;

/// Mean trace and first principal component of a trace set.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponent {
    pub mean_trace: Vec<f64>,
    /// Unit norm; sign chosen so that its overlap with the mean trace is nonnegative.
    pub component: Vec<f64>,
    pub eigenvalue: f64,
    /// Fraction of total variance carried by the component.
    pub explained: f64,
}

fn block_sums<T, F>(traces: &TraceSet, init: impl Fn() -> T + Sync, fold: F, add: impl Fn(T, T) -> T) -> T
where
    T: Send,
    F: Fn(&mut T, &[f32]) + Sync,
{
    let ns = traces.num_samples();
    let partials: Vec<T> = traces
        .as_slice()
        .par_chunks(BLOCK_ROWS * ns)
        .map(|block| {
            let mut acc = init();
            for row in block.chunks_exact(ns) {
                fold(&mut acc, row);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(init(), add)
}

/// Leading eigenvector of the `num_samples × num_samples` second-moment matrix
/// of the mean-subtracted traces.
pub fn principal_component(traces: &TraceSet) -> Result<PrincipalComponent> {
    let n = traces.num_pulses();
    if n < 2 {
        return Err(TesError::Degenerate(format!("PCA needs at least 2 traces, got {n}")));
    }
    let ns = traces.num_samples();
    let sum = block_sums(
        traces,
        || vec![0.0f64; ns],
        |acc, row| {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v as f64;
            }
        },
        |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        },
    );
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();

    let moment = block_sums(
        traces,
        || DMatrix::<f64>::zeros(ns, ns),
        |acc, row| {
            let centered: Vec<f64> = row.iter().zip(&mean).map(|(&v, m)| v as f64 - m).collect();
            for j in 0..ns {
                let cj = centered[j];
                if cj == 0.0 {
                    continue;
                }
                for i in j..ns {
                    acc[(i, j)] += centered[i] * cj;
                }
            }
        },
        |a, b| a + b,
    );
    let moment = DMatrix::from_fn(ns, ns, |i, j| if i >= j { moment[(i, j)] } else { moment[(j, i)] });

    let trace_total: f64 = moment.diagonal().sum();
    if !(trace_total > 0.0) {
        return Err(TesError::Degenerate("traces have zero variance".into()));
    }
    let eig = SymmetricEigen::new(moment);
    let (top, eigenvalue) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &v)| (i, v))
        .expect("non-empty");
    let mut component: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let norm = component.iter().map(|v| v * v).sum::<f64>().sqrt();
    component.iter_mut().for_each(|v| *v /= norm);

    let overlap: f64 = component.iter().zip(&mean).map(|(a, b)| a * b).sum();
    let mean_norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    let flip = if overlap.abs() > 1e-9 * mean_norm {
        overlap < 0.0
    } else {
        // no usable mean: make the largest-magnitude entry positive
        let big = component
            .iter()
            .cloned()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        big < 0.0
    };
    if flip {
        component.iter_mut().for_each(|v| *v = -*v);
    }

    Ok(PrincipalComponent {
        mean_trace: mean,
        component,
        eigenvalue,
        explained: eigenvalue / trace_total,
    })
}

/// `s_i = Σ_t (v_i(t) − mean(t))·PC(t)·Δt` for every trace.
pub fn project_scores(traces: &TraceSet, pca: &PrincipalComponent) -> Result<Vec<f64>> {
    let ns = traces.num_samples();
    if pca.mean_trace.len() != ns || pca.component.len() != ns {
        return Err(TesError::Domain(format!(
            "projection basis has {} / {} samples, traces have {ns}",
            pca.mean_trace.len(),
            pca.component.len()
        )));
    }
    let dt = traces.sample_period;
    Ok(traces
        .as_slice()
        .par_chunks_exact(ns)
        .map(|row| {
            row.iter()
                .zip(&pca.mean_trace)
                .zip(&pca.component)
                .map(|((&v, m), p)| (v as f64 - m) * p)
                .sum::<f64>()
                * dt
        })
        .collect())
}
