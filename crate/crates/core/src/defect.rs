//! Loewner's torus inequality and its defect-term strengthenings, evaluated
//! with explicit margins and systole error budgets.

use serde::Serialize;

use crate::error::Result;
use crate::field::l1_norm;
use crate::metric::TorusMetric;
use crate::real::Real;
use crate::systole::{
    averaged_metric_along, flat_systole, one_variable_axis, systole_one_var, systole_one_var_estimate, systole_upper, Axis,
    SystoleEstimate,
};

/// Relative rounding allowance added to every error budget.
pub const ROUNDING_TOL: f64 = 1e-12;
/// Equality detection: `variance <= EQUALITY_VAR_TOL * area`.
pub const EQUALITY_VAR_TOL: f64 = 1e-6;
/// Equality detection: `|tau - e^{i pi/3}| <= EQUALITY_TAU_TOL`.
pub const EQUALITY_TAU_TOL: f64 = 1e-6;

/// One inequality `lhs >= rhs`. Numbers are absent when not applicable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Inequality<T: Real> {
    pub applicable: bool,
    pub lhs: Option<T>,
    pub rhs: Option<T>,
    pub margin: Option<T>,
    pub error_budget: Option<T>,
    /// `margin >= -error_budget`.
    pub pass: Option<bool>,
    /// `margin >= 0`.
    pub strong_pass: Option<bool>,
}

impl<T: Real> Inequality<T> {
    /// `lhs >= rhs` judged with `budget` plus a rounding allowance.
    pub fn evaluate(lhs: T, rhs: T, budget: T) -> Self {
        let margin = lhs - rhs;
        let budget = budget + T::tol(ROUNDING_TOL) * lhs.abs().max(rhs.abs());
        Self {
            applicable: true,
            lhs: Some(lhs),
            rhs: Some(rhs),
            margin: Some(margin),
            error_budget: Some(budget),
            pass: Some(margin >= -budget),
            strong_pass: Some(margin >= T::zero()),
        }
    }

    pub fn not_applicable() -> Self {
        Self { applicable: false, lhs: None, rhs: None, margin: None, error_budget: None, pass: None, strong_pass: None }
    }

    /// Applicable and failed even with the error budget.
    pub fn is_violation(&self) -> bool {
        self.pass == Some(false)
    }
}

/// Auxiliary inequality from a proof step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Check<T: Real> {
    pub name: &'static str,
    #[serde(flatten)]
    pub row: Inequality<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EqualityCase<T: Real> {
    pub detected: bool,
    pub distance_to_eisenstein: T,
    pub variance: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport<T: Real> {
    pub area: T,
    pub mean: T,
    pub variance: T,
    pub sigma_sq: T,
    pub sys_upper: T,
    pub sys_err: T,
    pub flat_lambda1: T,
    /// `|f - E(f)|_1`.
    pub centered_l1: T,
    /// `|P(f)|_1` on the unit square.
    pub projection_l1: Option<T>,
    /// `area - sqrt(3)/2 sys^2 >= 0`.
    pub loewner: Inequality<T>,
    /// `area - sqrt(3)/2 sys^2 >= var`.
    pub loewner_defect: Inequality<T>,
    /// `area - sigma^2 sys^2 >= var`.
    pub sigma_defect: Inequality<T>,
    /// `area - sys^2 >= var` for pure imaginary `tau`.
    pub rectangular: Inequality<T>,
    /// `area - var >= (sys + |f0|_1 / 2)^2` for one-variable factors.
    pub one_var_second: Inequality<T>,
    /// `area - sys^2 >= var + |f0|_1^2 / 4` for one-variable factors.
    pub one_var_nosys: Inequality<T>,
    /// `area - sys^2 >= var + |P(f)|_1^2 / 16` on the unit square.
    pub biaxial_second: Inequality<T>,
    pub checks: Vec<Check<T>>,
    pub equality_case: EqualityCase<T>,
}

impl<T: Real> DefectReport<T> {
    /// Main inequalities by name, in report order.
    pub fn rows(&self) -> [(&'static str, &Inequality<T>); 7] {
        [
            ("loewner", &self.loewner),
            ("loewner_defect", &self.loewner_defect),
            ("sigma_defect", &self.sigma_defect),
            ("rectangular", &self.rectangular),
            ("one_var_second", &self.one_var_second),
            ("one_var_nosys", &self.one_var_nosys),
            ("biaxial_second", &self.biaxial_second),
        ]
    }

    /// Main rows followed by the auxiliary checks.
    pub fn all_rows(&self) -> Vec<(&'static str, &Inequality<T>)> {
        let mut rows = self.rows().to_vec();
        rows.extend(self.checks.iter().map(|c| (c.name, &c.row)));
        rows
    }

    pub fn has_violation(&self) -> bool {
        self.all_rows().iter().any(|(_, r)| r.is_violation())
    }
}

/// Budget for `c sys^2` when `sys` may be overestimated by `err`.
fn square_budget<T: Real>(c: T, sys: T, err: T) -> T {
    c * (T::lit(2.0) * sys * err + err * err)
}

/// Full report. The systole is taken from `sys` for the grid-based rows;
/// one-variable rows use the exact systole.
pub fn loewner_defect_report<T: Real>(metric: &TorusMetric<T>, sys: &SystoleEstimate<T>) -> Result<DefectReport<T>> {
    let (area, var) = (metric.area(), metric.variance());
    let sigma_sq = metric.reduced().sigma_sq;
    let (s, err) = (sys.upper, sys.err);
    let s2 = s * s;
    let hermite = T::lit(3.0).sqrt() / T::lit(2.0);
    let rectangular = if metric.reduced().is_rectangular() {
        Inequality::evaluate(area - s2, var, square_budget(T::one(), s, err))
    } else {
        Inequality::not_applicable()
    };
    let one_var = second_defect_one_var(metric)?;
    let biaxial = second_defect_biaxial(metric, sys)?;
    let mut checks = one_var.checks;
    checks.extend(biaxial.checks);
    Ok(DefectReport {
        area,
        mean: metric.mean(),
        variance: var,
        sigma_sq,
        sys_upper: s,
        sys_err: err,
        flat_lambda1: flat_systole(metric.lattice()),
        centered_l1: l1_norm(&metric.factor().centered()),
        projection_l1: biaxial.projection_l1,
        loewner: Inequality::evaluate(area - hermite * s2, T::zero(), square_budget(hermite, s, err)),
        loewner_defect: Inequality::evaluate(area - hermite * s2, var, square_budget(hermite, s, err)),
        sigma_defect: Inequality::evaluate(area - sigma_sq * s2, var, square_budget(sigma_sq, s, err)),
        rectangular,
        one_var_second: one_var.second,
        one_var_nosys: one_var.nosys,
        biaxial_second: biaxial.row,
        checks,
        equality_case: equality_case_check(metric),
    })
}

/// Systole estimate and report in one step: exact for one-variable factors
/// on the unit square, grid search otherwise.
pub fn analyze<T: Real>(metric: &TorusMetric<T>) -> Result<(SystoleEstimate<T>, DefectReport<T>)> {
    let sys = match one_variable_axis(metric) {
        Some(_) => systole_one_var_estimate(metric)?,
        None => systole_upper(metric)?,
    };
    let report = loewner_defect_report(metric, &sys)?;
    Ok((sys, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneVarRows<T: Real> {
    pub second: Inequality<T>,
    pub nosys: Inequality<T>,
    pub checks: Vec<Check<T>>,
}

/// Second-defect rows for a factor depending on one coordinate of the unit
/// square, with the exact systole `min f`.
pub fn second_defect_one_var<T: Real>(metric: &TorusMetric<T>) -> Result<OneVarRows<T>> {
    if one_variable_axis(metric).is_none() {
        return Ok(OneVarRows { second: Inequality::not_applicable(), nosys: Inequality::not_applicable(), checks: Vec::new() });
    }
    let sys = systole_one_var(metric)?;
    let l1 = l1_norm(&metric.factor().centered());
    let (area, var, mean) = (metric.area(), metric.variance(), metric.mean());
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let second = Inequality::evaluate(area - var, (sys + half * l1).powi(2), T::zero());
    let nosys = Inequality::evaluate(area - sys * sys, var + quarter * l1 * l1, T::zero());
    let gap = Check { name: "one_var_mean_gap", row: Inequality::evaluate(mean - sys, half * l1, T::zero()) };
    Ok(OneVarRows { second, nosys, checks: vec![gap] })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiaxialRows<T: Real> {
    pub row: Inequality<T>,
    pub projection_l1: Option<T>,
    pub checks: Vec<Check<T>>,
}

/// Second defect with the biaxial projection on the unit square, plus the
/// comparison chain through the metric averaged along the axis carrying the
/// larger single-axis part.
pub fn second_defect_biaxial<T: Real>(metric: &TorusMetric<T>, sys: &SystoleEstimate<T>) -> Result<BiaxialRows<T>> {
    if !metric.lattice().is_unit_square() {
        return Ok(BiaxialRows { row: Inequality::not_applicable(), projection_l1: None, checks: Vec::new() });
    }
    let parts = metric.factor().biaxial_decompose()?;
    let p1 = l1_norm(&parts.projection());
    let (g1, h1) = (l1_norm(&parts.g_grid()), l1_norm(&parts.h_grid()));
    let (area, var, mean) = (metric.area(), metric.variance(), metric.mean());
    let (s, err) = (sys.upper, sys.err);
    let budget = square_budget(T::one(), s, err);
    let sixteenth = T::lit(1.0 / 16.0);
    let row = Inequality::evaluate(area - s * s, var + sixteenth * p1 * p1, budget);

    let (axis, bar_l1) = if h1 >= g1 { (Axis::Y, h1) } else { (Axis::X, g1) };
    let averaged = averaged_metric_along(metric, axis)?;
    let bar_sys = systole_one_var(&averaged)?;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let mut checks = vec![
        Check { name: "biaxial_axis_share", row: Inequality::evaluate(bar_l1, half * p1, T::zero()) },
        Check { name: "averaged_systole", row: Inequality::evaluate(bar_sys, s, err) },
        Check { name: "averaged_mean_gap", row: Inequality::evaluate(mean, bar_sys + half * bar_l1, T::zero()) },
        Check { name: "biaxial_mean_gap", row: Inequality::evaluate(mean, s + quarter * p1, err) },
    ];
    if one_variable_axis(metric).is_some() {
        checks.push(Check {
            name: "biaxial_second_quarter",
            row: Inequality::evaluate(area - s * s, var + quarter * p1 * p1, budget),
        });
    }
    Ok(BiaxialRows { row, projection_l1: Some(p1), checks })
}

/// Flat and Eisenstein, up to the equality tolerances.
pub fn equality_case_check<T: Real>(metric: &TorusMetric<T>) -> EqualityCase<T> {
    let variance = metric.variance();
    let distance_to_eisenstein = metric.reduced().distance_to_eisenstein();
    let detected = variance <= T::tol(EQUALITY_VAR_TOL) * metric.area() && distance_to_eisenstein <= T::tol(EQUALITY_TAU_TOL);
    EqualityCase { detected, distance_to_eisenstein, variance }
}
