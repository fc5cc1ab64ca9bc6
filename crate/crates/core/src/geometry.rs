//! Vector fields on a coordinate chart: Lie brackets, Lie derivatives,
//! symbolic determinants, frame decompositions and sampled ranks.

use std::collections::BTreeMap;
use std::ops;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{
    differentiate, is_identically_zero, is_nonvanishing, parse_expr_with_params, Expr,
    NonVanishing, ParseError, SamplePlan, Scalar, Witness, ZeroTest,
};

/// Ordered coordinate names; variable `i` of every expression is `names[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chart {
    names: Vec<String>,
}

impl Chart {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Chart {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        assert!(names.len() <= crate::expr::MAX_VARS, "too many coordinates");
        Chart { names }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn var(&self, i: usize) -> Expr {
        Expr::var(i, &self.names[i])
    }

    pub fn parse(&self, src: &str, params: &BTreeMap<String, Scalar>) -> Result<Expr, ParseError> {
        let names: Vec<&str> = self.names.iter().map(String::as_str).collect();
        parse_expr_with_params(src, &names, params)
    }

    /// The coordinate field ∂/∂x_i.
    pub fn coordinate_field(&self, i: usize) -> VectorField {
        VectorField::new((0..self.dim()).map(|j| if i == j { Expr::one() } else { Expr::zero() }))
    }
}

/// A vector field given by its components in the chart.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VectorField(Vec<Expr>);

impl VectorField {
    pub fn new(components: impl IntoIterator<Item = Expr>) -> VectorField {
        VectorField(components.into_iter().collect())
    }

    pub fn zero(dim: usize) -> VectorField {
        VectorField(vec![Expr::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.0
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.0[i]
    }

    /// Derivative of a function along the field: L_v h = Σ v^j ∂_j h.
    pub fn apply(&self, h: &Expr) -> Expr {
        Expr::sum(
            self.0
                .iter()
                .enumerate()
                .filter(|(j, vj)| !vj.is_zero() && h.depends_on(*j))
                .map(|(j, vj)| vj * differentiate(h, j)),
        )
    }

    pub fn scale(&self, s: &Expr) -> VectorField {
        VectorField(self.0.iter().map(|c| s * c).collect())
    }

    pub fn map(&self, f: impl FnMut(&Expr) -> Expr) -> VectorField {
        VectorField(self.0.iter().map(f).collect())
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, crate::expr::Singular> {
        crate::expr::Tape::compile(&self.0).eval(point)
    }

    pub fn is_identically_zero(&self, base: &[f64], plan: &SamplePlan) -> ZeroTest {
        is_identically_zero(&self.0, base, plan)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Expr::is_zero)
    }
}

impl ops::Add<&VectorField> for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        assert_eq!(self.dim(), rhs.dim());
        VectorField(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl ops::Sub<&VectorField> for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        assert_eq!(self.dim(), rhs.dim());
        VectorField(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl ops::Neg for &VectorField {
    type Output = VectorField;
    fn neg(self) -> VectorField {
        VectorField(self.0.iter().map(|a| -a).collect())
    }
}

/// [f,g]^i = L_f g^i − L_g f^i.
pub fn lie_bracket(f: &VectorField, g: &VectorField) -> VectorField {
    assert_eq!(f.dim(), g.dim());
    VectorField(
        (0..f.dim())
            .map(|i| f.apply(&g.0[i]) - g.apply(&f.0[i]))
            .collect(),
    )
}

/// L_v^order h.
pub fn lie_derivative(v: &VectorField, h: &Expr, order: usize) -> Expr {
    (0..order).fold(h.clone(), |acc, _| v.apply(&acc))
}

/// Gradient (components of dh).
pub fn differential(h: &Expr, dim: usize) -> Vec<Expr> {
    (0..dim).map(|j| differentiate(h, j)).collect()
}

/// Determinant by Laplace expansion along the first row, skipping zero entries.
pub fn determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    assert!(
        m.iter().all(|r| r.len() == n),
        "determinant of a non-square matrix"
    );
    let cols: Vec<usize> = (0..n).collect();
    minor(m, 0, &cols)
}

fn minor(m: &[Vec<Expr>], row: usize, cols: &[usize]) -> Expr {
    if cols.is_empty() {
        return Expr::one();
    }
    if cols.len() == 1 {
        return m[row][cols[0]].clone();
    }
    let mut terms = Vec::new();
    for (k, &c) in cols.iter().enumerate() {
        let entry = &m[row][c];
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let sub = minor(m, row + 1, &rest);
        if sub.is_zero() {
            continue;
        }
        let t = entry * sub;
        terms.push(if k % 2 == 0 { t } else { -t });
    }
    Expr::sum(terms)
}

/// Matrix whose columns are the given fields.
pub fn column_matrix(fields: &[VectorField]) -> Vec<Vec<Expr>> {
    let n = fields.first().map_or(0, VectorField::dim);
    (0..n)
        .map(|i| fields.iter().map(|f| f.0[i].clone()).collect())
        .collect()
}

/// An ordered set of vector fields, expected to form a basis near the base point.
#[derive(Clone, Debug)]
pub struct Frame {
    pub fields: Vec<VectorField>,
}

impl Frame {
    pub fn new(fields: Vec<VectorField>) -> Frame {
        Frame { fields }
    }

    pub fn determinant(&self) -> Expr {
        determinant(&column_matrix(&self.fields))
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FrameError {
    #[error("frame has {fields} fields in dimension {dim}")]
    Shape { fields: usize, dim: usize },
    #[error("frame is degenerate at {:?} (det = {})", .0.point, .0.value)]
    Degenerate(Witness),
    #[error(
        "frame non-degeneracy could not be decided ({valid} valid samples, {singular} singular)"
    )]
    Inconclusive { valid: usize, singular: usize },
    #[error("decomposition residual is not zero at {:?} (value {})", .0.point, .0.value)]
    Residual(Witness),
}

/// Coefficients `c` with `v = Σ c_j frame_j`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub coefficients: Vec<Expr>,
    pub determinant: Expr,
}

/// Expresses `v` in the frame by Cramer's rule and checks the result by sampling.
pub fn decompose_in_frame(
    v: &VectorField,
    frame: &Frame,
    base: &[f64],
    plan: &SamplePlan,
) -> Result<Decomposition, FrameError> {
    let n = v.dim();
    if frame.fields.len() != n || frame.fields.iter().any(|f| f.dim() != n) {
        return Err(FrameError::Shape {
            fields: frame.fields.len(),
            dim: n,
        });
    }
    let m = column_matrix(&frame.fields);
    let det = determinant(&m);
    match is_nonvanishing(&det, base, plan) {
        NonVanishing::NonVanishing { .. } => {}
        NonVanishing::Vanishes(w) => return Err(FrameError::Degenerate(w)),
        NonVanishing::Inconclusive { valid, singular } => {
            return Err(FrameError::Inconclusive { valid, singular })
        }
    }
    let coefficients: Vec<Expr> = (0..n)
        .map(|j| {
            let mut mj = m.clone();
            for (i, row) in mj.iter_mut().enumerate() {
                row[j] = v.0[i].clone();
            }
            determinant(&mj) / &det
        })
        .collect();
    let recombined = frame
        .fields
        .iter()
        .zip(&coefficients)
        .fold(VectorField::zero(n), |acc, (f, c)| &acc + &f.scale(c));
    match (v - &recombined).is_identically_zero(base, plan) {
        ZeroTest::NonZero(w) => Err(FrameError::Residual(w)),
        _ => Ok(Decomposition {
            coefficients,
            determinant: det,
        }),
    }
}

/// Numerical rank of a family of rows, sampled around the base point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub rank_at_base: usize,
    pub min_rank: usize,
    pub max_rank: usize,
    /// A sample where the rank differs from the rank at the base point.
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
    pub inconclusive: bool,
}

impl RankReport {
    pub fn is_constant(&self) -> bool {
        !self.inconclusive && self.min_rank == self.max_rank
    }
}

/// Rank of the matrix whose rows are `rows`, evaluated at sample points.
pub fn sampled_rank_rows(rows: &[Vec<Expr>], base: &[f64], plan: &SamplePlan) -> RankReport {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    let flat: Vec<Expr> = rows.iter().flatten().cloned().collect();
    let sampled = plan.evaluate(&flat, base);
    let mut report = RankReport {
        rank_at_base: 0,
        min_rank: usize::MAX,
        max_rank: 0,
        witness: None,
        samples: sampled.samples.len(),
        inconclusive: sampled.is_inconclusive(),
    };
    for (k, s) in sampled.samples.iter().enumerate() {
        let rank = numerical_rank(&DMatrix::from_row_slice(r, c, &s.values));
        if k == 0 {
            report.rank_at_base = rank;
        } else if rank != report.rank_at_base && report.witness.is_none() {
            report.witness = Some(s.point.clone());
        }
        report.min_rank = report.min_rank.min(rank);
        report.max_rank = report.max_rank.max(rank);
    }
    if sampled.samples.is_empty() {
        report.min_rank = 0;
    }
    report
}

/// Rank of the span of `fields`, sampled around the base point.
pub fn sampled_rank(fields: &[VectorField], base: &[f64], plan: &SamplePlan) -> RankReport {
    let rows: Vec<Vec<Expr>> = fields.iter().map(|f| f.0.clone()).collect();
    sampled_rank_rows(&rows, base, plan)
}

/// Singular values above `1e-8·(σ_max + 1)` count towards the rank.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = 1e-8 * (max + 1.0);
    sv.iter().filter(|&&s| s > threshold).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart::new(["x", "y", "w"])
    }

    fn field(c: &Chart, comps: [&str; 3]) -> VectorField {
        VectorField::new(comps.iter().map(|s| c.parse(s, &BTreeMap::new()).unwrap()))
    }

    #[test]
    fn brackets_of_the_elliptic_model() {
        let c = chart();
        let f = field(&c, ["1", "0", "0"]);
        let g = field(&c, ["-y", "x", "1"]);
        let plan = SamplePlan::default();
        let base = [0.0; 3];
        let fg = lie_bracket(&f, &g);
        assert!((&fg - &field(&c, ["0", "1", "0"]))
            .is_identically_zero(&base, &plan)
            .is_zero());
        let gf = lie_bracket(&g, &f);
        let ggf = lie_bracket(&g, &gf);
        assert!((&ggf - &field(&c, ["-1", "0", "0"]))
            .is_identically_zero(&base, &plan)
            .is_zero());
    }

    #[test]
    fn bracket_is_antisymmetric_and_satisfies_jacobi() {
        let c = chart();
        let a = field(&c, ["x*y", "sin(w)", "1"]);
        let b = field(&c, ["w^2", "x", "exp(y)"]);
        let d = field(&c, ["1", "y*w", "x - w"]);
        let plan = SamplePlan::default();
        let base = [0.1, 0.2, 0.3];
        let anti = &lie_bracket(&a, &b) + &lie_bracket(&b, &a);
        assert!(anti.is_identically_zero(&base, &plan).is_zero());
        let jacobi = &(&lie_bracket(&a, &lie_bracket(&b, &d))
            + &lie_bracket(&b, &lie_bracket(&d, &a)))
            + &lie_bracket(&d, &lie_bracket(&a, &b));
        assert!(jacobi.is_identically_zero(&base, &plan).is_zero());
    }

    #[test]
    fn determinant_and_cramer() {
        let c = chart();
        let m = vec![
            vec![Expr::int(2), Expr::int(1), Expr::zero()],
            vec![Expr::int(1), Expr::int(3), Expr::int(1)],
            vec![Expr::zero(), Expr::int(1), Expr::int(4)],
        ];
        assert_eq!(determinant(&m), Expr::int(18));
        let frame = Frame::new(vec![
            field(&c, ["1", "0", "0"]),
            field(&c, ["y", "1", "0"]),
            field(&c, ["0", "x", "1 + w^2"]),
        ]);
        let v = field(&c, ["x", "y", "w"]);
        let dec = decompose_in_frame(&v, &frame, &[0.0; 3], &SamplePlan::default()).unwrap();
        let at = [0.3, -0.2, 0.5];
        let coeffs: Vec<f64> = dec
            .coefficients
            .iter()
            .map(|e| e.eval(&at).unwrap())
            .collect();
        let c2 = 0.5 / 1.25;
        let c1 = -0.2 - 0.3 * c2;
        let c0 = 0.3 - (-0.2) * c1;
        for (a, b) in coeffs.iter().zip([c0, c1, c2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_frame_is_refused() {
        let c = chart();
        let frame = Frame::new(vec![
            field(&c, ["1", "0", "0"]),
            field(&c, ["x", "0", "0"]),
            field(&c, ["0", "0", "1"]),
        ]);
        let v = field(&c, ["x", "y", "w"]);
        let err = decompose_in_frame(&v, &frame, &[0.0; 3], &SamplePlan::default()).unwrap_err();
        assert!(matches!(err, FrameError::Degenerate(_)));
    }

    #[test]
    fn rank_detects_jumps() {
        let c = chart();
        let fields = [field(&c, ["1", "0", "0"]), field(&c, ["0", "x", "0"])];
        let r = sampled_rank(&fields, &[0.0; 3], &SamplePlan::default());
        assert_eq!(r.rank_at_base, 1);
        assert_eq!(r.max_rank, 2);
        assert!(!r.is_constant());
        assert!(r.witness.is_some());
        let r = sampled_rank(&fields, &[1.0, 0.0, 0.0], &SamplePlan::default());
        assert!(r.is_constant());
        assert_eq!(r.rank_at_base, 2);
    }

    #[test]
    fn iterated_lie_derivative() {
        let c = chart();
        let f = field(&c, ["1", "0", "0"]);
        let h = c.parse("x^3", &BTreeMap::new()).unwrap();
        assert_eq!(lie_derivative(&f, &h, 3), Expr::int(6));
        assert!(lie_derivative(&f, &h, 4).is_zero());
    }
}
