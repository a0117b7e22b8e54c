use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// `[[0, I], [-I, 0]]` for the ordering `(Q_1..Q_n, P_1..P_n)`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    omega
}

/// Applies `f` to the eigenvalues of a real symmetric matrix.
pub(crate) fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub(crate) fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub(crate) fn max_abs_c(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

pub(crate) fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Ratio of extreme singular values.
pub(crate) fn condition_number_c(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Least-squares solve with column equilibration.
///
/// Returns the solution, the numerical rank and the indices of columns that
/// take part in the numerical null space.
pub(crate) struct LstsqOutcome {
    pub solution: DVector<f64>,
    pub rank: usize,
    pub null_columns: Vec<usize>,
    pub condition: f64,
}

pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> LstsqOutcome {
    let ncols = a.ncols();
    let scale: Vec<f64> = (0..ncols)
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for j in 0..ncols {
        scaled.column_mut(j).unscale_mut(scale[j]);
    }
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let threshold = rel_tol * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > threshold).count();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let mut null_columns = Vec::new();
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    // Columns of the right null space (including rank lost to row shortage).
    let full = v_t.nrows();
    let mut null_vectors: Vec<DVector<f64>> = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= threshold {
            null_vectors.push(v_t.row(i).transpose());
        }
    }
    if full < ncols {
        // Fewer rows than columns: complete the basis by projection.
        let proj = v_t.transpose() * v_t;
        let comp = DMatrix::<f64>::identity(ncols, ncols) - proj;
        for j in 0..ncols {
            null_vectors.push(comp.column(j).into_owned());
        }
    }
    for j in 0..ncols {
        if null_vectors.iter().any(|v| v[j].abs() > 1e-6) {
            null_columns.push(j);
        }
    }

    let mut solution = svd
        .solve(b, threshold)
        .unwrap_or_else(|_| DVector::zeros(ncols));
    for j in 0..ncols {
        solution[j] /= scale[j];
    }
    LstsqOutcome {
        solution,
        rank: rank.min(a.nrows()),
        null_columns,
        condition,
    }
}
