//! Matrix model updating: minimally change stiffness `K` and damping `D` so
//! the quadratic pencil `λ²M + λD + K` acquires prescribed eigenpairs.
//!
//! The unknown is the `2n x 2n` matrix `X = diag(K~, D~)`, flattened row-major.
//! It must lie in two affine sets:
//!
//! * `S`: zero off-diagonal blocks and symmetric diagonal blocks;
//! * `V = {X : A + Î^T X W = 0}` with `Î = (I; I)` and `W = (C; B)`.
//!
//! The best approximation of `X0 = diag(K, D)` in `S ∩ V` is the update.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::Phase;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{DenseMatrix, Point};
use crate::oracle::{stack_blocks, StackedConstraints};
use crate::sets::{AffineSet, StructuredSet};
use crate::solver::SolveResult;

/// Index of `S` in [`MmupProblem::sets`].
pub const SET_S: usize = 0;
/// Index of `V` in [`MmupProblem::sets`].
pub const SET_V: usize = 1;

/// `P(λ) = λ²M + λD + K`.
#[derive(Debug, Clone)]
pub struct PencilData {
    pub m: DenseMatrix,
    pub d: DenseMatrix,
    pub k: DenseMatrix,
}

impl PencilData {
    pub fn new(m: DenseMatrix, d: DenseMatrix, k: DenseMatrix) -> Result<Self> {
        let n = m.rows();
        for mat in [&m, &d, &k] {
            check_dim(n, mat.rows())?;
            check_dim(n, mat.cols())?;
        }
        Ok(Self { m, d, k })
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    /// `P(mu) y`
    pub fn apply(&self, mu: Complex64, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let coef = mu * mu * self.m.get(i, j) + mu * self.d.get(i, j) + self.k.get(i, j);
                        coef * y[j]
                    })
                    .sum()
            })
            .collect()
    }

    /// The `2n` eigenvalues, from the companion matrix
    /// `[[0, I], [-M^-1 K, -M^-1 D]]`, sorted by imaginary then real part.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let n = self.n();
        let m_inv = self
            .m
            .as_na()
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidProblem("mass matrix is singular".into()))?;
        let mut comp = DMatrix::<f64>::zeros(2 * n, 2 * n);
        comp.view_mut((0, n), (n, n)).fill_with_identity();
        comp.view_mut((n, 0), (n, n)).copy_from(&(-&m_inv * self.k.as_na()));
        comp.view_mut((n, n), (n, n)).copy_from(&(-&m_inv * self.d.as_na()));
        let mut eig: Vec<Complex64> = comp.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
        eig.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        Ok(eig)
    }
}

/// A desired eigenvalue with its eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetPair {
    pub mu: Complex64,
    pub y: Vec<Complex64>,
    /// Stands for both `(mu, y)` and its conjugate.
    pub conjugate: bool,
}

impl TargetPair {
    pub fn real(mu: f64, y: Vec<f64>) -> Self {
        Self {
            mu: Complex64::new(mu, 0.0),
            y: y.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            conjugate: false,
        }
    }

    pub fn conjugate_pair(mu: Complex64, y: Vec<Complex64>) -> Self {
        Self { mu, y, conjugate: true }
    }

    fn columns(&self) -> usize {
        if self.conjugate {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetSpectrum {
    pub pairs: Vec<TargetPair>,
}

impl TargetSpectrum {
    /// Number of real columns `p` of `A`, `B` and `C`.
    pub fn columns(&self) -> usize {
        self.pairs.iter().map(TargetPair::columns).sum()
    }
}

/// `A = M Y Λ²`, `B = Y Λ`, `C = Y` in real form.
///
/// A real target contributes one column; a conjugate pair `(mu, y)`
/// contributes the real and imaginary parts of `y mu²`, `y mu` and `y`.
pub fn build_abc(m: &DenseMatrix, targets: &TargetSpectrum) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let n = m.rows();
    check_dim(n, m.cols())?;
    let p = targets.columns();
    if p == 0 {
        return Err(Error::InvalidProblem("no target eigenpairs".into()));
    }
    let mut my = DMatrix::<f64>::zeros(n, p);
    let mut b = DMatrix::<f64>::zeros(n, p);
    let mut c = DMatrix::<f64>::zeros(n, p);
    let mut col = 0;
    for t in &targets.pairs {
        check_dim(n, t.y.len())?;
        if !t.conjugate && (t.mu.im != 0.0 || t.y.iter().any(|v| v.im != 0.0)) {
            return Err(Error::InvalidProblem("complex target must be flagged as a conjugate pair".into()));
        }
        let mu2 = t.mu * t.mu;
        for (i, y) in t.y.iter().enumerate() {
            let (ym2, ym) = (y * mu2, y * t.mu);
            my[(i, col)] = ym2.re;
            b[(i, col)] = ym.re;
            c[(i, col)] = y.re;
            if t.conjugate {
                my[(i, col + 1)] = ym2.im;
                b[(i, col + 1)] = ym.im;
                c[(i, col + 1)] = y.im;
            }
        }
        col += t.columns();
    }
    let a = m.as_na() * my;
    Ok((DenseMatrix::from_na(a), DenseMatrix::from_na(b), DenseMatrix::from_na(c)))
}

/// Projection onto `S` for a flattened `2n x 2n` matrix.
fn project_s_flat(x: &[f64], n: usize) -> Vec<f64> {
    let size = 2 * n;
    let mut out = vec![0.0; size * size];
    for block in 0..2 {
        let o = block * n;
        for i in 0..n {
            for j in 0..n {
                let (r, c) = (o + i, o + j);
                out[r * size + c] = 0.5 * (x[r * size + c] + x[c * size + r]);
            }
        }
    }
    out
}

/// Projection onto block-diagonal matrices with symmetric diagonal blocks.
pub fn project_s(x: &DenseMatrix) -> Result<DenseMatrix> {
    let size = x.rows();
    check_dim(size, x.cols())?;
    if !size.is_multiple_of(2) {
        return Err(Error::InvalidProblem(format!("S needs an even dimension, got {size}")));
    }
    let flat = project_s_flat(x.to_point().as_slice(), size / 2);
    DenseMatrix::from_point(size, size, &Point::from_vec(flat))
}

/// Row constraints whose solution set is `S`: `2n²` off-diagonal zeros then
/// `n(n-1)` symmetry rows.
pub fn export_rows_s(n: usize) -> StackedConstraints {
    let size = 2 * n;
    let dim = size * size;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for r in 0..size {
        for c in 0..size {
            if (r < n) != (c < n) {
                let mut row = vec![0.0; dim];
                row[r * size + c] = 1.0;
                rows.push(row);
            }
        }
    }
    for o in [0, n] {
        for i in 0..n {
            for j in (i + 1)..n {
                let mut row = vec![0.0; dim];
                row[(o + i) * size + (o + j)] = 1.0;
                row[(o + j) * size + (o + i)] = -1.0;
                rows.push(row);
            }
        }
    }
    let count = rows.len();
    StackedConstraints { matrix: DenseMatrix::from_rows(&rows).expect("n >= 1"), rhs: Point::zeros(count) }
}

#[derive(Debug)]
struct SetS {
    n: usize,
}

impl StructuredSet for SetS {
    fn dim(&self) -> usize {
        4 * self.n * self.n
    }

    fn project(&self, x: &Point) -> Point {
        Point::from_vec(project_s_flat(x.as_slice(), self.n))
    }

    fn row_constraints(&self) -> Option<(DenseMatrix, Point)> {
        let sc = export_rows_s(self.n);
        Some((sc.matrix, sc.rhs))
    }

    fn label(&self) -> &str {
        "S"
    }
}

/// Data defining `V`, shared by the set and the problem.
#[derive(Debug)]
struct Variety {
    n: usize,
    a: DMatrix<f64>,
    w: DMatrix<f64>,
    wtw_inv: DMatrix<f64>,
}

impl Variety {
    /// `A + Î^T X W`
    fn constraint(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let folded = x.rows(0, n) + x.rows(n, n);
        &self.a + folded * &self.w
    }

    /// `X + Î Σ W^T` with `Σ = -½ (A + Î^T X W)(W^T W)^-1`.
    fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let sigma = self.constraint(x) * &self.wtw_inv * -0.5;
        let corr = sigma * self.w.transpose();
        let mut out = x.clone();
        let mut top = out.rows_mut(0, n);
        top += &corr;
        let mut bottom = out.rows_mut(n, n);
        bottom += &corr;
        out
    }

    fn rows(&self) -> StackedConstraints {
        let n = self.n;
        let size = 2 * n;
        let p = self.w.ncols();
        let mut rows = Vec::with_capacity(n * p);
        let mut rhs = Vec::with_capacity(n * p);
        for r in 0..n {
            for col in 0..p {
                let mut row = vec![0.0; size * size];
                for a in [r, r + n] {
                    for b in 0..size {
                        row[a * size + b] = self.w[(b, col)];
                    }
                }
                rows.push(row);
                rhs.push(-self.a[(r, col)]);
            }
        }
        StackedConstraints { matrix: DenseMatrix::from_rows(&rows).expect("non-empty"), rhs: Point::from_vec(rhs) }
    }
}

#[derive(Debug)]
struct SetV(Arc<Variety>);

impl StructuredSet for SetV {
    fn dim(&self) -> usize {
        4 * self.0.n * self.0.n
    }

    fn project(&self, x: &Point) -> Point {
        let size = 2 * self.0.n;
        let xm = DMatrix::from_row_slice(size, size, x.as_slice());
        DenseMatrix::from_na(self.0.project(&xm)).to_point()
    }

    fn row_constraints(&self) -> Option<(DenseMatrix, Point)> {
        let sc = self.0.rows();
        Some((sc.matrix, sc.rhs))
    }

    fn label(&self) -> &str {
        "V"
    }
}

/// An updating problem ready for the solvers: `sets()[0] = S`, `sets()[1] = V`.
#[derive(Clone)]
pub struct MmupProblem {
    pub pencil: PencilData,
    pub targets: TargetSpectrum,
    pub x0: DenseMatrix,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub w: DenseMatrix,
    pub ihat: DenseMatrix,
    variety: Arc<Variety>,
    set_s: AffineSet,
    set_v: AffineSet,
}

impl fmt::Debug for MmupProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MmupProblem")
            .field("n", &self.n())
            .field("p", &self.p())
            .field("targets", &self.targets)
            .finish_non_exhaustive()
    }
}

impl MmupProblem {
    pub fn new(pencil: PencilData, targets: TargetSpectrum) -> Result<Self> {
        let n = pencil.n();
        let (a, b, c) = build_abc(&pencil.m, &targets)?;
        let p = a.cols();

        let mut w = DMatrix::<f64>::zeros(2 * n, p);
        w.rows_mut(0, n).copy_from(c.as_na());
        w.rows_mut(n, n).copy_from(b.as_na());
        let wtw = w.tr_mul(&w);
        let wtw_inv = Cholesky::new(wtw).ok_or_else(|| Error::InvalidProblem("W^T W is singular".into()))?.inverse();

        let mut ihat = DMatrix::<f64>::zeros(2 * n, n);
        ihat.rows_mut(0, n).fill_with_identity();
        ihat.rows_mut(n, n).fill_with_identity();

        let mut x0 = DMatrix::<f64>::zeros(2 * n, 2 * n);
        x0.view_mut((0, 0), (n, n)).copy_from(pencil.k.as_na());
        x0.view_mut((n, n), (n, n)).copy_from(pencil.d.as_na());

        let variety = Arc::new(Variety { n, a: a.as_na().clone(), w: w.clone(), wtw_inv });
        Ok(Self {
            pencil,
            targets,
            x0: DenseMatrix::from_na(x0),
            a,
            b,
            c,
            w: DenseMatrix::from_na(w),
            ihat: DenseMatrix::from_na(ihat),
            set_s: AffineSet::custom(SetS { n }),
            set_v: AffineSet::Custom(Arc::new(SetV(variety.clone()))),
            variety,
        })
    }

    pub fn n(&self) -> usize {
        self.pencil.n()
    }

    pub fn p(&self) -> usize {
        self.a.cols()
    }

    /// Dimension of the flattened variable, `4n²`.
    pub fn dim(&self) -> usize {
        4 * self.n() * self.n()
    }

    /// `[S, V]`
    pub fn sets(&self) -> Vec<AffineSet> {
        vec![self.set_s.clone(), self.set_v.clone()]
    }

    pub fn x0_point(&self) -> Point {
        self.x0.to_point()
    }

    pub fn to_matrix(&self, x: &Point) -> Result<DenseMatrix> {
        DenseMatrix::from_point(2 * self.n(), 2 * self.n(), x)
    }

    pub fn export_rows(&self) -> Result<StackedConstraints> {
        let s = export_rows_s(self.n());
        let v = self.variety.rows();
        stack_blocks(&[(s.matrix, s.rhs), (v.matrix, v.rhs)])
    }
}

/// Projection onto `V` via the closed form `X + Î Σ W^T`.
pub fn project_v(x: &DenseMatrix, prob: &MmupProblem) -> Result<DenseMatrix> {
    let size = 2 * prob.n();
    check_dim(size, x.rows())?;
    check_dim(size, x.cols())?;
    Ok(DenseMatrix::from_na(prob.variety.project(x.as_na())))
}

/// Row constraints whose solution set is `V`: `n p` rows.
pub fn export_rows_v(prob: &MmupProblem) -> StackedConstraints {
    prob.variety.rows()
}

/// `|A + Î^T X W|_F`
pub fn pencil_residual(prob: &MmupProblem, x: &DenseMatrix) -> f64 {
    prob.variety.constraint(x.as_na()).norm()
}

/// Same as [`pencil_residual`] on a flattened iterate.
pub fn pencil_residual_flat(prob: &MmupProblem, x: &Point) -> f64 {
    let size = 2 * prob.n();
    pencil_residual(prob, &DenseMatrix::from_na(DMatrix::from_row_slice(size, size, x.as_slice())))
}

/// `(K~, D~)`: the two diagonal blocks.
pub fn extract_update(x: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let size = x.rows();
    check_dim(size, x.cols())?;
    if !size.is_multiple_of(2) {
        return Err(Error::InvalidProblem(format!("expected an even dimension, got {size}")));
    }
    let n = size / 2;
    let k = x.as_na().view((0, 0), (n, n)).into_owned();
    let d = x.as_na().view((n, n), (n, n)).into_owned();
    Ok((DenseMatrix::from_na(k), DenseMatrix::from_na(d)))
}

/// `diag(K~, D~)`
pub fn embed_update(k: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    let n = k.rows();
    check_dim(n, d.rows())?;
    let mut x = DMatrix::<f64>::zeros(2 * n, 2 * n);
    x.view_mut((0, 0), (n, n)).copy_from(k.as_na());
    x.view_mut((n, n), (n, n)).copy_from(d.as_na());
    Ok(DenseMatrix::from_na(x))
}

/// Pencil residual of the point each `V` projection is applied to, followed
/// by the final iterate when the run converged. Entry `c` is the residual
/// after `c` projections onto `V`. The trace must hold points.
pub fn residual_per_v_projection(prob: &MmupProblem, result: &SolveResult) -> Vec<f64> {
    let mut curve = Vec::new();
    for w in result.trace.windows(2) {
        if w[1].phase == Phase::SetProjection && w[1].set_index == Some(SET_V) {
            if let Some(p) = &w[0].point {
                curve.push(pencil_residual_flat(prob, p));
            }
        }
    }
    if result.converged {
        curve.push(pencil_residual_flat(prob, &result.solution));
    }
    curve
}

/// First index of `curve` at or below `tol`.
pub fn projections_to_reach(curve: &[f64], tol: f64) -> Option<usize> {
    curve.iter().position(|&r| r <= tol)
}

fn mat(rows: [[f64; 4]; 4]) -> DenseMatrix {
    DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).expect("4x4")
}

/// The 4x4 reference instance: one unstable conjugate pair moved to
/// `-0.1 ± 1.6242i`. `M` is taken verbatim, including its asymmetric
/// (3,4)/(4,3) entries.
pub fn experiment1() -> Result<MmupProblem> {
    let m = mat([
        [1.4685, 0.7177, 0.4757, 0.4311],
        [0.7177, 2.6938, 1.2660, 0.9676],
        [0.4757, 1.2660, 2.7061, 1.3948],
        [0.4311, 0.9676, 1.3918, 2.1876],
    ]);
    let d = mat([
        [1.3525, 1.2695, 0.7967, 0.8160],
        [1.2695, 1.3274, 0.9144, 0.7325],
        [0.7967, 0.9144, 0.9456, 0.8310],
        [0.8160, 0.7325, 0.8310, 1.1536],
    ]);
    let k = mat([
        [1.7824, 0.0076, -0.1359, -0.7290],
        [0.0076, 1.0287, -0.0101, -0.0493],
        [-0.1359, -0.0101, 2.8360, -0.2564],
        [-0.7290, -0.0493, -0.2564, 1.9130],
    ]);
    let y = vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0535, 0.3834),
        Complex64::new(0.5297, 0.0668),
        Complex64::new(0.6711, 0.4175),
    ];
    let targets = TargetSpectrum { pairs: vec![TargetPair::conjugate_pair(Complex64::new(-0.1, 1.6242), y)] };
    MmupProblem::new(PencilData::new(m, d, k)?, targets)
}

/// The 30x30 instance: `M = D = 4I`, path-Laplacian `K`, the zero eigenvalue
/// with constant eigenvector moved to `-0.018`.
pub fn experiment2() -> Result<MmupProblem> {
    let n = 30;
    let m = DenseMatrix::from_na(DMatrix::identity(n, n) * 4.0);
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
        if i + 1 < n {
            k[(i, i + 1)] = -1.0;
            k[(i + 1, i)] = -1.0;
        }
    }
    let y = vec![1.0 / (n as f64).sqrt(); n];
    let targets = TargetSpectrum { pairs: vec![TargetPair::real(-0.018, y)] };
    MmupProblem::new(PencilData::new(m.clone(), m, DenseMatrix::from_na(k))?, targets)
}

/// Plain-text matrix: one row per line, comma-separated decimals.
pub fn parse_matrix_csv(text: &str) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Error::Parse(format!("matrix entry: {e}")))?);
    }
    DenseMatrix::from_rows(&rows)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

/// Inline nested rows, or a path to a CSV file relative to the problem file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(DenseMatrix),
    Csv(String),
}

impl MatrixSource {
    fn load(&self, base: Option<&Path>) -> Result<DenseMatrix> {
        match self {
            MatrixSource::Inline(m) => Ok(m.clone()),
            MatrixSource::Csv(p) => {
                let path = base.map_or_else(|| Path::new(p).to_path_buf(), |b| b.join(p));
                read_matrix_csv(path)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetEntry {
    pub mu_re: f64,
    #[serde(default)]
    pub mu_im: f64,
    pub y_re: Vec<f64>,
    #[serde(default)]
    pub y_im: Vec<f64>,
    /// Defaults to `true` exactly when `mu` or `y` has an imaginary part.
    #[serde(default)]
    pub conjugate: Option<bool>,
}

/// JSON problem file `{M, D, K, targets: [{mu_re, mu_im, y_re, y_im}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(rename = "M")]
    pub m: MatrixSource,
    #[serde(rename = "D")]
    pub d: MatrixSource,
    #[serde(rename = "K")]
    pub k: MatrixSource,
    pub targets: Vec<TargetEntry>,
}

impl ProblemFile {
    pub fn into_problem(self, base: Option<&Path>) -> Result<MmupProblem> {
        let pencil = PencilData::new(self.m.load(base)?, self.d.load(base)?, self.k.load(base)?)?;
        let mut pairs = Vec::with_capacity(self.targets.len());
        for t in self.targets {
            let y_im = if t.y_im.is_empty() { vec![0.0; t.y_re.len()] } else { t.y_im };
            check_dim(t.y_re.len(), y_im.len())?;
            let complex = t.mu_im != 0.0 || y_im.iter().any(|v| *v != 0.0);
            let y = t.y_re.iter().zip(&y_im).map(|(r, i)| Complex64::new(*r, *i)).collect();
            pairs.push(TargetPair {
                mu: Complex64::new(t.mu_re, t.mu_im),
                y,
                conjugate: t.conjugate.unwrap_or(complex),
            });
        }
        MmupProblem::new(pencil, TargetSpectrum { pairs })
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<MmupProblem> {
    let path = path.as_ref();
    let file: ProblemFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    file.into_problem(path.parent())
}
