use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::RegimeModel;
use crate::error::{Error, Result, Site};

/// Absolute tolerance for eigenvalue and row-sum checks.
pub const CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularCase {
    /// D'D >= delta and R2 >= delta
    I,
    /// D'D >= delta and F'F >= delta
    II,
    /// R1 >= delta and F'F >= delta
    III,
}

impl std::str::FromStr for SingularCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Self::I),
            "II" | "2" => Ok(Self::II),
            "III" | "3" => Ok(Self::III),
            other => Err(Error::Config(format!("unknown singular case '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseFlags {
    pub standard: bool,
    pub singular_case: Option<SingularCase>,
    pub delta: f64,
}

impl CaseFlags {
    pub fn standard(delta: f64) -> Self {
        Self { standard: true, singular_case: None, delta }
    }

    pub fn singular(case: SingularCase, delta: f64) -> Self {
        Self { standard: false, singular_case: Some(case), delta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offender {
    /// 1-based regime.
    pub regime: usize,
    pub t: f64,
    pub atom: Option<usize>,
    pub what: String,
    /// Slack of the violated (or tightest) inequality; negative means violated.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Tightest constraint seen, whether or not it was violated.
    pub worst: Option<Offender>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub generator: CheckResult,
    pub bounded_nonnegative: CheckResult,
    pub standard: Option<CheckResult>,
    pub singular: Option<CheckResult>,
    pub accepted: bool,
}

/// Tracks the tightest slack across a sweep of inequality constraints.
struct Sweep {
    name: String,
    worst: Option<Offender>,
}

impl Sweep {
    fn new(name: &str) -> Self {
        Self { name: name.into(), worst: None }
    }

    fn record(&mut self, site: Site, what: &str, slack: f64) {
        if self.worst.as_ref().is_none_or(|w| slack < w.slack) {
            self.worst = Some(Offender {
                regime: site.regime + 1,
                t: site.t,
                atom: site.atom,
                what: what.into(),
                slack,
            });
        }
    }

    fn finish(self) -> CheckResult {
        let passed = self.worst.as_ref().is_none_or(|w| w.slack >= -CHECK_TOL);
        CheckResult { name: self.name, passed, worst: self.worst }
    }
}

/// Smallest eigenvalue of the symmetric part; `+inf` for empty matrices.
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Check the standing assumptions and the requested definiteness case.
pub fn validate(model: &RegimeModel, flags: &CaseFlags) -> Result<ValidationReport> {
    let generator = check_generator(model)?;
    let bounded_nonnegative = check_basic(model)?;

    if !(flags.delta.is_finite() && flags.delta > 0.0) {
        return Err(Error::Config(format!("delta must be positive, got {}", flags.delta)));
    }
    if !flags.standard && flags.singular_case.is_none() {
        return Err(Error::Config("no case declared: set standard or a singular case".into()));
    }

    let standard = flags.standard.then(|| check_standard(model, flags.delta));
    let singular = flags.singular_case.map(|case| check_singular(model, case, flags.delta));

    let accepted = standard.as_ref().is_some_and(|c| c.passed) || singular.as_ref().is_some_and(|c| c.passed);
    if !accepted {
        let failing = standard
            .iter()
            .chain(singular.iter())
            .filter_map(|c| c.worst.as_ref())
            .min_by(|a, b| a.slack.total_cmp(&b.slack))
            .expect("a declared case always records at least one constraint");
        return Err(Error::DefinitenessFailure {
            what: failing.what.clone(),
            min_eig: failing.slack + flags.delta,
            bound: flags.delta,
            site: Site { regime: failing.regime - 1, t: failing.t, atom: failing.atom },
        });
    }

    Ok(ValidationReport { generator, bounded_nonnegative, standard, singular, accepted })
}

fn check_generator(model: &RegimeModel) -> Result<CheckResult> {
    let q = model.generator();
    let mut sweep = Sweep::new("generator");
    for i in 0..q.nrows() {
        let mut sum = 0.0;
        for j in 0..q.ncols() {
            let v = q[(i, j)];
            if !v.is_finite() {
                return Err(Error::Config(format!("generator entry q[{i}][{j}] is not finite")));
            }
            if i != j && v < 0.0 {
                return Err(Error::NegativeRate { row: i, col: j, value: v });
            }
            sum += v;
        }
        if sum.abs() > CHECK_TOL {
            return Err(Error::NonConservativeGenerator { row: i, sum });
        }
        sweep.record(Site::new(i, 0.0), "row sum", -sum.abs());
    }
    Ok(sweep.finish())
}

fn finite_matrix(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

fn check_basic(model: &RegimeModel) -> Result<CheckResult> {
    let mut sweep = Sweep::new("bounded_nonnegative");
    for (i, regime) in model.regimes().iter().enumerate() {
        let g = regime.g;
        if !g.is_finite() {
            return Err(Error::Config(format!("terminal weight G of regime {} is not finite", i + 1)));
        }
        if g < 0.0 {
            return Err(Error::NegativeWeight { what: "G".into(), value: g, site: Site::new(i, model.horizon()) });
        }
        for (t, piece) in regime.knots().iter().zip(regime.pieces()) {
            let site = Site::new(i, *t);
            let c = &piece.diffusion;
            let finite = c.a.is_finite()
                && c.q.is_finite()
                && c.b1.iter().chain(c.c.iter()).all(|x| x.is_finite())
                && finite_matrix(&c.d)
                && finite_matrix(&c.r1);
            if !finite {
                return Err(Error::Config(format!("unbounded coefficient at {site}")));
            }
            if c.q < 0.0 {
                return Err(Error::NegativeWeight { what: "Q".into(), value: c.q, site });
            }
            check_psd("R1", &c.r1, site, &mut sweep)?;
            for (k, j) in piece.jumps.iter().enumerate() {
                let site = Site::with_atom(i, *t, k);
                let finite = j.b2.iter().chain(j.e.iter()).all(|x| x.is_finite())
                    && finite_matrix(&j.f)
                    && finite_matrix(&j.r2);
                if !finite {
                    return Err(Error::Config(format!("unbounded jump coefficient at {site}")));
                }
                check_psd("R2", &j.r2, site, &mut sweep)?;
            }
        }
    }
    Ok(sweep.finish())
}

fn check_psd(what: &str, m: &DMatrix<f64>, site: Site, sweep: &mut Sweep) -> Result<()> {
    if (m - m.transpose()).amax() > CHECK_TOL {
        return Err(Error::Config(format!("{what} is not symmetric at {site}")));
    }
    let e = min_eigenvalue(m);
    if e < -CHECK_TOL {
        return Err(Error::DefinitenessFailure { what: what.into(), min_eig: e, bound: 0.0, site });
    }
    if e.is_finite() {
        sweep.record(site, what, e);
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Bound {
    R1,
    DtD,
    R2,
    FtF,
}

fn sweep_bound(model: &RegimeModel, bound: Bound, delta: f64, sweep: &mut Sweep) {
    for (i, regime) in model.regimes().iter().enumerate() {
        for (t, piece) in regime.knots().iter().zip(regime.pieces()) {
            match bound {
                Bound::R1 => {
                    let e = min_eigenvalue(&piece.diffusion.r1);
                    if e.is_finite() {
                        sweep.record(Site::new(i, *t), "R1 >= delta*I", e - delta);
                    }
                }
                Bound::DtD => {
                    let e = min_eigenvalue(&piece.diffusion.dtd());
                    if e.is_finite() {
                        sweep.record(Site::new(i, *t), "D'D >= delta*I", e - delta);
                    }
                }
                Bound::R2 | Bound::FtF => {
                    for (k, j) in piece.jumps.iter().enumerate() {
                        let (what, m) = match bound {
                            Bound::R2 => ("R2 >= delta*I", j.r2.clone()),
                            _ => ("F'F >= delta*I", j.f.transpose() * &j.f),
                        };
                        let e = min_eigenvalue(&m);
                        if e.is_finite() {
                            sweep.record(Site::with_atom(i, *t, k), what, e - delta);
                        }
                    }
                }
            }
        }
    }
}

fn check_standard(model: &RegimeModel, delta: f64) -> CheckResult {
    let mut sweep = Sweep::new("standard");
    sweep_bound(model, Bound::R1, delta, &mut sweep);
    sweep_bound(model, Bound::R2, delta, &mut sweep);
    sweep.finish()
}

fn check_singular(model: &RegimeModel, case: SingularCase, delta: f64) -> CheckResult {
    let mut sweep = Sweep::new(&format!("singular case {case:?}"));
    for (i, r) in model.regimes().iter().enumerate() {
        sweep.record(Site::new(i, model.horizon()), "G >= delta", r.g - delta);
    }
    let pair = match case {
        SingularCase::I => [Bound::DtD, Bound::R2],
        SingularCase::II => [Bound::DtD, Bound::FtF],
        SingularCase::III => [Bound::R1, Bound::FtF],
    };
    for b in pair {
        sweep_bound(model, b, delta, &mut sweep);
    }
    sweep.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, Coefficients, ConeSpec, Dims, JumpCoefficients, JumpMeasure, Piece, Regime};
    use nalgebra::DMatrix;

    const DIMS: Dims = Dims { n1: 1, n2: 1, m1: 1, m2: 1 };

    fn one_regime(diff: Coefficients, jumps: Vec<JumpCoefficients>, g: f64, generator: DMatrix<f64>) -> Result<RegimeModel> {
        let nu = JumpMeasure::new(jumps.iter().map(|_| Atom { mark: vec![1.0], weight: 1.0 }).collect())?;
        let ell = generator.nrows();
        let regimes = (0..ell).map(|_| Regime::constant(Piece { diffusion: diff.clone(), jumps: jumps.clone() }, g)).collect();
        RegimeModel::new(DIMS, 1.0, generator, nu, ConeSpec::full_space(1), ConeSpec::full_space(1), regimes)
    }

    #[test]
    fn identity_weights_pass_standard() {
        let m = one_regime(
            Coefficients::scalar(0.0, 0.0, 0.0, 0.0, 1.0, 0.0),
            vec![JumpCoefficients::scalar(0.0, 0.0, 0.0, 1.0)],
            0.0,
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let rep = validate(&m, &CaseFlags::standard(1.0)).unwrap();
        assert!(rep.accepted);
        assert!(rep.standard.unwrap().passed);
    }

    #[test]
    fn non_conservative_generator() {
        let gen = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 1.0, -1.0]);
        let m = one_regime(Coefficients::scalar(0.0, 0.0, 0.0, 0.0, 1.0, 0.0), vec![], 0.0, gen).unwrap();
        match validate(&m, &CaseFlags::standard(1.0)) {
            Err(Error::NonConservativeGenerator { row: 0, sum }) => assert_eq!(sum, -0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_off_diagonal_rejected() {
        let gen = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]);
        let m = one_regime(Coefficients::scalar(0.0, 0.0, 0.0, 0.0, 1.0, 0.0), vec![], 0.0, gen).unwrap();
        assert!(matches!(validate(&m, &CaseFlags::standard(1.0)), Err(Error::NegativeRate { .. })));
    }

    #[test]
    fn singular_case_two_passes() {
        let m = one_regime(
            Coefficients::scalar(0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
            vec![JumpCoefficients::scalar(0.0, 0.0, 1.0, 0.0)],
            1.0,
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let rep = validate(&m, &CaseFlags::singular(SingularCase::II, 1.0)).unwrap();
        assert!(rep.singular.unwrap().passed);
        // The same model is not standard: R1 = 0.
        assert!(matches!(validate(&m, &CaseFlags::standard(1.0)), Err(Error::DefinitenessFailure { .. })));
    }

    #[test]
    fn negative_q_and_g() {
        let m = one_regime(Coefficients::scalar(0.0, 0.0, 0.0, 0.0, 1.0, -1.0), vec![], 0.0, DMatrix::zeros(1, 1)).unwrap();
        assert!(matches!(validate(&m, &CaseFlags::standard(1.0)), Err(Error::NegativeWeight { .. })));
        let m = one_regime(Coefficients::scalar(0.0, 0.0, 0.0, 0.0, 1.0, 0.0), vec![], -1.0, DMatrix::zeros(1, 1)).unwrap();
        assert!(matches!(validate(&m, &CaseFlags::standard(1.0)), Err(Error::NegativeWeight { .. })));
    }

    #[test]
    fn worst_offender_reported() {
        let m = one_regime(
            Coefficients::scalar(0.0, 0.0, 0.0, 0.0, 0.5, 0.0),
            vec![JumpCoefficients::scalar(0.0, 0.0, 0.0, 2.0)],
            0.0,
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        match validate(&m, &CaseFlags::standard(1.0)) {
            Err(Error::DefinitenessFailure { what, min_eig, .. }) => {
                assert_eq!(what, "R1 >= delta*I");
                assert!((min_eig - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn generator_acceptance_is_exact(off in prop::collection::vec(-1.0f64..2.0, 6), bump in -1e-3f64..1e-3) {
            let mut q = DMatrix::zeros(3, 3);
            let mut k = 0;
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        q[(i, j)] = off[k];
                        k += 1;
                    }
                }
                let s: f64 = (0..3).filter(|&j| j != i).map(|j| q[(i, j)]).sum();
                q[(i, i)] = -s;
            }
            q[(0, 0)] += bump;
            let m = one_regime(Coefficients::scalar(0.0, 0.0, 0.0, 0.0, 1.0, 0.0), vec![], 0.0, q.clone()).unwrap();
            let ok = validate(&m, &CaseFlags::standard(1.0)).is_ok();
            let row_sums_zero = (0..3).all(|i| q.row(i).sum().abs() <= CHECK_TOL);
            let nonneg = (0..3).all(|i| (0..3).all(|j| i == j || q[(i, j)] >= 0.0));
            prop_assert_eq!(ok, row_sums_zero && nonneg);
        }
    }
}
