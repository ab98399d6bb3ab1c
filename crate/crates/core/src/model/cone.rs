//! Closed convex cones with exact Euclidean projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper limit on the number of generators of a finitely generated cone.
pub const MAX_GENERATORS: usize = 16;

/// Relative tolerance under which a vector is treated as a member of a
/// generated cone and returned unchanged by [`ConeSpec::project`].
const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeKind {
    FullSpace,
    Zero,
    NonnegativeOrthant,
    HalfLine { direction: Vec<f64> },
    Generated { generators: Vec<Vec<f64>> },
}

/// A closed convex cone in R^m.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    kind: ConeKind,
    dim: usize,
    // Unit direction for half-lines, generator matrix (columns) for generated cones.
    direction: Option<DVector<f64>>,
    generators: Option<DMatrix<f64>>,
}

impl ConeSpec {
    pub fn full_space(dim: usize) -> Self {
        Self { kind: ConeKind::FullSpace, dim, direction: None, generators: None }
    }

    pub fn zero(dim: usize) -> Self {
        Self { kind: ConeKind::Zero, dim, direction: None, generators: None }
    }

    pub fn nonnegative_orthant(dim: usize) -> Self {
        Self { kind: ConeKind::NonnegativeOrthant, dim, direction: None, generators: None }
    }

    /// Ray spanned by `direction`; the direction is normalized.
    pub fn half_line(direction: &[f64]) -> Result<Self> {
        let d = DVector::from_column_slice(direction);
        let norm = d.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Config("half_line direction must be a nonzero finite vector".into()));
        }
        let unit = d / norm;
        Ok(Self {
            kind: ConeKind::HalfLine { direction: unit.iter().copied().collect() },
            dim: direction.len(),
            direction: Some(unit),
            generators: None,
        })
    }

    pub fn generated(dim: usize, generators: &[Vec<f64>]) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Config("generated cone needs at least one generator".into()));
        }
        if generators.len() > MAX_GENERATORS {
            return Err(Error::Config(format!(
                "generated cone has {} generators, limit is {MAX_GENERATORS}",
                generators.len()
            )));
        }
        for g in generators {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "cone generator".into(),
                    expected: dim,
                    got: g.len(),
                });
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("cone generator has non-finite entries".into()));
            }
        }
        let cols: Vec<DVector<f64>> =
            generators.iter().map(|g| DVector::from_column_slice(g)).collect();
        Ok(Self {
            kind: ConeKind::Generated { generators: generators.to_vec() },
            dim,
            direction: None,
            generators: Some(DMatrix::from_columns(&cols)),
        })
    }

    pub fn from_kind(kind: ConeKind, dim: usize) -> Result<Self> {
        match kind {
            ConeKind::FullSpace => Ok(Self::full_space(dim)),
            ConeKind::Zero => Ok(Self::zero(dim)),
            ConeKind::NonnegativeOrthant => Ok(Self::nonnegative_orthant(dim)),
            ConeKind::HalfLine { direction } => {
                if direction.len() != dim {
                    return Err(Error::DimensionMismatch {
                        what: "half_line direction".into(),
                        expected: dim,
                        got: direction.len(),
                    });
                }
                Self::half_line(&direction)
            }
            ConeKind::Generated { generators } => Self::generated(dim, &generators),
        }
    }

    pub fn kind(&self) -> &ConeKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_full_space(&self) -> bool {
        matches!(self.kind, ConeKind::FullSpace)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ConeKind::Zero) || self.dim == 0
    }

    /// Whether the cone is invariant under negation.
    pub fn is_symmetric(&self) -> bool {
        matches!(self.kind, ConeKind::FullSpace | ConeKind::Zero)
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v.len())?;
        let mut out = v.clone();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// Projection onto the cone intersected with the ball of radius `radius`.
    ///
    /// For a closed convex cone the two projections compose: project onto the
    /// cone, then shrink radially.
    pub fn project_truncated(&self, v: &DVector<f64>, radius: Option<f64>) -> Result<DVector<f64>> {
        self.check_dim(v.len())?;
        let mut out = v.clone();
        self.project_truncated_in_place(&mut out, radius);
        Ok(out)
    }

    pub(crate) fn project_truncated_in_place(&self, v: &mut DVector<f64>, radius: Option<f64>) {
        self.project_in_place(v);
        if let Some(k) = radius {
            let n = v.norm();
            if n > k {
                *v *= k / n;
            }
        }
    }

    /// Orthonormal basis of the smallest face of the cone containing `v`
    /// (assumed to be a member); `None` when that face is `{0}`.
    pub(crate) fn face_basis(&self, v: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.dim;
        match &self.kind {
            ConeKind::FullSpace if n > 0 => Some(DMatrix::identity(n, n)),
            ConeKind::FullSpace | ConeKind::Zero => None,
            ConeKind::NonnegativeOrthant => {
                let free: Vec<usize> = (0..n).filter(|&i| v[i] > 0.0).collect();
                if free.is_empty() {
                    return None;
                }
                let mut z = DMatrix::zeros(n, free.len());
                for (c, &i) in free.iter().enumerate() {
                    z[(i, c)] = 1.0;
                }
                Some(z)
            }
            ConeKind::HalfLine { .. } => {
                let d = self.direction.as_ref().expect("half-line direction");
                (v.dot(d) > 0.0).then(|| DMatrix::from_column_slice(n, 1, d.as_slice()))
            }
            ConeKind::Generated { .. } => {
                let g = self.generators.as_ref().expect("generator matrix");
                let lambda = nnls(g, v);
                let cut = MEMBERSHIP_TOL * lambda.amax().max(1.0);
                let cols: Vec<usize> = (0..g.ncols()).filter(|&i| lambda[i] > cut).collect();
                if cols.is_empty() {
                    return None;
                }
                let sub = g.select_columns(&cols);
                let svd = sub.svd(true, false);
                let u = svd.u.expect("left singular vectors");
                let smax = svd.singular_values.max();
                let keep: Vec<usize> =
                    (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax).collect();
                (!keep.is_empty()).then(|| u.select_columns(&keep))
            }
        }
    }

    /// Caller guarantees `v.len() == self.dim()`.
    pub(crate) fn project_in_place(&self, v: &mut DVector<f64>) {
        match &self.kind {
            ConeKind::FullSpace => {}
            ConeKind::Zero => v.fill(0.0),
            ConeKind::NonnegativeOrthant => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            ConeKind::HalfLine { .. } => {
                let d = self.direction.as_ref().expect("half-line direction");
                let p = d * v.dot(d).max(0.0);
                keep_if_member(v, p);
            }
            ConeKind::Generated { .. } => {
                let g = self.generators.as_ref().expect("generator matrix");
                let p = g * nnls(g, v);
                keep_if_member(v, p);
            }
        }
    }

    /// Membership test with the same tolerance used by projection.
    pub fn contains(&self, v: &DVector<f64>) -> bool {
        if v.len() != self.dim {
            return false;
        }
        let mut p = v.clone();
        self.project_in_place(&mut p);
        (&p - v).norm() <= MEMBERSHIP_TOL * v.norm().max(1.0)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch { what: "cone projection".into(), expected: self.dim, got });
        }
        Ok(())
    }
}

/// Points already in the cone are returned untouched, so projection is idempotent.
fn keep_if_member(v: &mut DVector<f64>, p: DVector<f64>) {
    if (&p - &*v).norm() > MEMBERSHIP_TOL * v.norm().max(1.0) {
        v.copy_from(&p);
    }
}

/// Nonnegative least squares `min ||A x - b||, x >= 0` (Lawson-Hanson active set).
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-14 * a.norm().max(1.0) * b.norm().max(1.0);
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z_p = restricted_lstsq(a, b, &idx);
            if z_p.iter().all(|&z| z > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z_p[k];
                }
                break;
            }
            // Step back toward feasibility and drop the variables that hit zero.
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z_p[k] <= 0.0 {
                    let denom = x[j] - z_p[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z_p[k] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

fn restricted_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let cols: Vec<DVector<f64>> = idx.iter().map(|&j| a.column(j).into_owned()).collect();
    let sub = DMatrix::from_columns(&cols);
    let svd = sub.svd(true, true);
    svd.solve(b, 1e-13).expect("svd with u and v computed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn orthant_clamps() {
        let c = ConeSpec::nonnegative_orthant(2);
        assert_eq!(c.project(&v(&[-1.0, 2.0])).unwrap(), v(&[0.0, 2.0]));
    }

    #[test]
    fn full_space_is_identity() {
        let c = ConeSpec::full_space(3);
        assert_eq!(c.project(&v(&[1.0, -4.0, 2.0])).unwrap(), v(&[1.0, -4.0, 2.0]));
    }

    #[test]
    fn half_line_drops_opposite_direction() {
        let c = ConeSpec::half_line(&[1.0, 0.0]).unwrap();
        assert_eq!(c.project(&v(&[-3.0, 5.0])).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(c.project(&v(&[3.0, 5.0])).unwrap(), v(&[3.0, 0.0]));
    }

    #[test]
    fn dimension_mismatch() {
        let c = ConeSpec::zero(2);
        assert!(matches!(c.project(&v(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn generated_cone_matches_orthant() {
        let c = ConeSpec::generated(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = c.project(&v(&[-1.0, 2.0])).unwrap();
        assert!((p - v(&[0.0, 2.0])).norm() < 1e-14);
    }

    #[test]
    fn generated_cone_wedge() {
        // Wedge between (1,0) and (1,1); (0,1) projects onto the (1,1) edge.
        let c = ConeSpec::generated(2, &[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let p = c.project(&v(&[0.0, 1.0])).unwrap();
        assert!((p - v(&[0.5, 0.5])).norm() < 1e-14);
        // Polar direction goes to the origin.
        let p = c.project(&v(&[-1.0, -0.5])).unwrap();
        assert!(p.norm() < 1e-14);
    }

    #[test]
    fn too_many_generators() {
        let gens = vec![vec![1.0]; MAX_GENERATORS + 1];
        assert!(ConeSpec::generated(1, &gens).is_err());
    }

    fn cone_strategy() -> impl Strategy<Value = ConeSpec> {
        let dim = 3usize;
        prop_oneof![
            Just(ConeSpec::full_space(dim)),
            Just(ConeSpec::zero(dim)),
            Just(ConeSpec::nonnegative_orthant(dim)),
            prop::collection::vec(-1.0f64..1.0, dim)
                .prop_filter("nonzero", |d| d.iter().map(|x| x * x).sum::<f64>() > 1e-3)
                .prop_map(|d| ConeSpec::half_line(&d).unwrap()),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 1..6)
                .prop_map(move |g| ConeSpec::generated(dim, &g).unwrap()),
        ]
    }

    fn vec3() -> impl Strategy<Value = DVector<f64>> {
        prop::collection::vec(-10.0f64..10.0, 3).prop_map(DVector::from_vec)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn projection_is_idempotent(c in cone_strategy(), xs in prop::collection::vec(vec3(), 5)) {
            for x in xs {
                let p = c.project(&x).unwrap();
                let pp = c.project(&p).unwrap();
                prop_assert_eq!(&pp, &p);
                prop_assert!(c.contains(&p));
            }
        }

        #[test]
        fn projection_is_nearest(c in cone_strategy(), x in vec3(), ws in prop::collection::vec(vec3(), 100)) {
            let p = c.project(&x).unwrap();
            let d = (&x - &p).norm();
            for w in ws {
                let w_in = c.project(&w).unwrap();
                prop_assert!(d <= (&x - &w_in).norm() + 1e-12);
            }
        }

        #[test]
        fn projection_is_positively_homogeneous(c in cone_strategy(), x in vec3(), lam in 0.0f64..5.0) {
            let p = c.project(&x).unwrap();
            let q = c.project(&(&x * lam)).unwrap();
            prop_assert!((q - p * lam).norm() <= 1e-10 * (1.0 + lam * x.norm()));
        }

        #[test]
        fn cone_is_closed_under_scaling(c in cone_strategy(), x in vec3(), lam in 0.0f64..5.0) {
            let p = c.project(&x).unwrap();
            prop_assert!(c.contains(&(p * lam)));
        }
    }
}
