//! Crank-Nicolson time stepping with each step solved as an LS-SVR problem.
//!
//! One step looks for `u^{n+1} = sum_j w_j phi_j` minimizing
//! `1/2 |w|^2 + gamma/2 |e|^2` subject to the soft constraints
//! `(L u^{n+1})(x_i) = f^n(x_i) + e_i` (collocation) or
//! `<L u^{n+1}, phi_i> = <f^n, phi_i> + e_i` (Galerkin), plus the hard
//! endpoint constraints `u^{n+1}(0) = g_0`, `u^{n+1}(1) = g_1`. Here
//! `L u = u - theta dt F(u)` with the diffusivity frozen at a known state and
//! `f^n = u^n + (1 - theta) dt F(u^n)`.
//!
//! With multipliers `alpha` (soft) and `beta` (hard) the optimality
//! conditions are `w = A^T alpha + B^T beta`, `e = -alpha / gamma`,
//! `A w - e = b` and `B w = g`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionConfig;
use crate::error::{Error, Result};
use crate::metrics::{snr_db, snr_db_clean, Snr};
use crate::orthopoly::{gauss_rule, legendre_roots, BasisSpec, QuadratureRule};
use crate::signal::{uniform_grid, SampledSignal, SpectralSignal};

/// Scale at which the KKT optimality conditions are required to hold.
pub const KKT_TOL: f64 = 1e-9;
/// Condition number above which a step records a warning.
pub const CONDITION_WARN: f64 = 1e14;
pub const DEFAULT_GAMMA: f64 = 1e6;
pub const DEFAULT_ORDER: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Collocation,
    Galerkin,
}

/// Where the collocation constraints are imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrainingRule {
    /// `count` equidistant points including both endpoints.
    Equidistant { count: usize },
    /// Roots of `P_count` mapped onto [0, 1].
    LegendreRoots { count: usize },
}

impl TrainingRule {
    pub fn count(&self) -> usize {
        match *self {
            TrainingRule::Equidistant { count } | TrainingRule::LegendreRoots { count } => count,
        }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        match *self {
            TrainingRule::Equidistant { count } if count >= 2 => Ok(uniform_grid(count)),
            TrainingRule::Equidistant { count: 1 } => Ok(vec![0.5]),
            TrainingRule::LegendreRoots { count } if count >= 1 => Ok(legendre_roots(count)?
                .into_iter()
                .map(|t| 0.5 * (t + 1.0))
                .collect()),
            _ => Err(Error::invalid("at least one training point is required")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    /// Diffusivity frozen at `u^n`: one linear solve per step.
    SemiImplicit,
    /// Re-freeze at the latest iterate until the weights settle.
    Picard { max_iter: usize, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LssvrConfig {
    pub formulation: Formulation,
    pub gamma: f64,
    /// Highest basis degree `N`.
    pub order: usize,
    pub training: TrainingRule,
    pub nonlinearity: Nonlinearity,
    /// Gauss points for the Galerkin inner products; `2N + 2` when absent.
    #[serde(default)]
    pub quad_order: Option<usize>,
}

impl Default for LssvrConfig {
    fn default() -> Self {
        Self::collocation(DEFAULT_ORDER, DEFAULT_GAMMA)
    }
}

impl LssvrConfig {
    /// Collocation at `2(N + 1)` equidistant points, semi-implicit.
    pub fn collocation(order: usize, gamma: f64) -> Self {
        Self {
            formulation: Formulation::Collocation,
            gamma,
            order,
            training: TrainingRule::Equidistant {
                count: 2 * (order + 1),
            },
            nonlinearity: Nonlinearity::SemiImplicit,
            quad_order: None,
        }
    }

    pub fn galerkin(order: usize, gamma: f64) -> Self {
        Self {
            formulation: Formulation::Galerkin,
            ..Self::collocation(order, gamma)
        }
    }

    pub fn basis(&self) -> BasisSpec {
        BasisSpec::orthonormal(self.order)
    }

    pub fn effective_quad_order(&self) -> usize {
        self.quad_order.unwrap_or(2 * self.order + 2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.training.count() == 0 {
            return Err(Error::invalid("at least one training point is required"));
        }
        if let Nonlinearity::Picard { max_iter, tol } = self.nonlinearity {
            if max_iter == 0 || !(tol > 0.0) {
                return Err(Error::invalid(
                    "Picard iteration needs max_iter >= 1 and tol > 0",
                ));
            }
        }
        if self.formulation == Formulation::Galerkin
            && self.effective_quad_order() < 2 * self.order + 2
        {
            return Err(Error::invalid(format!(
                "Galerkin quadrature needs at least {} points",
                2 * self.order + 2
            )));
        }
        Ok(())
    }

    /// Non-fatal issues with the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.formulation == Formulation::Collocation && self.training.count() < self.order + 1 {
            out.push(format!(
                "{} training points for {} unknowns: the collocation problem is under-determined and relies on gamma",
                self.training.count(),
                self.order + 1
            ));
        }
        out
    }
}

/// `f^n(x) = u^n(x) + (1 - theta) dt F(u^n)(x)`.
#[derive(Debug, Clone)]
pub struct RhsFunction {
    u: SpectralSignal,
    config: DiffusionConfig,
}

pub fn rhs_function(u_n: &SpectralSignal, config: &DiffusionConfig) -> RhsFunction {
    RhsFunction {
        u: u_n.clone(),
        config: *config,
    }
}

impl RhsFunction {
    pub fn eval(&self, x: f64) -> f64 {
        self.at_derivs(self.u.eval_derivs(x))
    }

    fn at_derivs(&self, [u, u_x, u_xx]: [f64; 3]) -> f64 {
        let explicit = (1.0 - self.config.theta) * self.config.dt;
        u + explicit * crate::diffusion::pde_rhs(&self.config, u_x, u_xx)
    }

    fn eval_with_table(&self, table: &[[f64; 3]]) -> f64 {
        self.at_derivs(combine_table(self.u.weights(), table))
    }
}

/// `L u = u - theta dt (c u_xx + c_x u_x)` with `c` and `c_x` taken from a
/// fixed coefficient source, so that `L` is linear in the weights of `u`.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    config: DiffusionConfig,
    source: SpectralSignal,
}

pub fn linear_operator(config: &DiffusionConfig, coeff_source: &SpectralSignal) -> LinearOperator {
    LinearOperator {
        config: *config,
        source: coeff_source.clone(),
    }
}

impl LinearOperator {
    pub fn basis(&self) -> BasisSpec {
        self.source.basis()
    }

    /// `(c, dc/dx)` frozen at the coefficient source.
    pub fn frozen(&self, x: f64) -> (f64, f64) {
        let [_, s_x, s_xx] = self.source.eval_derivs(x);
        self.config.frozen_fields(s_x, s_xx)
    }

    /// `(L phi_j)(x)` for every basis function.
    pub fn basis_images(&self, x: f64) -> Vec<f64> {
        let table = self.basis().eval_all_derivs(x);
        self.images_with_table(&table)
    }

    pub fn apply(&self, u: &SpectralSignal, x: f64) -> f64 {
        self.basis_images(x)
            .iter()
            .zip(u.weights())
            .map(|(l, w)| l * w)
            .sum()
    }

    fn images_with_table(&self, table: &[[f64; 3]]) -> Vec<f64> {
        let [_, s_x, s_xx] = combine_table(self.source.weights(), table);
        let (c, c_x) = self.config.frozen_fields(s_x, s_xx);
        let h = self.config.theta * self.config.dt;
        table
            .iter()
            .map(|&[p, p_x, p_xx]| p - h * (c * p_xx + c_x * p_x))
            .collect()
    }
}

fn combine_table(weights: &[f64], table: &[[f64; 3]]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (w, row) in weights.iter().zip(table) {
        out[0] += w * row[0];
        out[1] += w * row[1];
        out[2] += w * row[2];
    }
    out
}

/// Training points or quadrature nodes with the basis tabulated on them.
#[derive(Debug, Clone)]
pub struct Discretization {
    formulation: Formulation,
    basis: BasisSpec,
    points: Vec<f64>,
    weights: Vec<f64>,
    tables: Vec<Vec<[f64; 3]>>,
    boundary: [Vec<f64>; 2],
}

impl Discretization {
    pub fn new(config: &LssvrConfig) -> Result<Self> {
        config.validate()?;
        let basis = config.basis();
        let (points, weights) = match config.formulation {
            Formulation::Collocation => {
                let p = config.training.points()?;
                let n = p.len();
                (p, vec![1.0; n])
            }
            Formulation::Galerkin => {
                let rule: QuadratureRule = gauss_rule(config.effective_quad_order())?;
                (rule.nodes().to_vec(), rule.weights().to_vec())
            }
        };
        let tables = points.iter().map(|&x| basis.eval_all_derivs(x)).collect();
        let boundary = [0.0, 1.0].map(|x: f64| {
            basis
                .eval_all_derivs(x)
                .iter()
                .map(|r| r[0])
                .collect::<Vec<f64>>()
        });
        Ok(Self {
            formulation: config.formulation,
            basis,
            points,
            weights,
            tables,
            boundary,
        })
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    /// Collocation points, or quadrature nodes for Galerkin.
    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Residuals of the three optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `|w - A^T alpha - B^T beta|_2` over the sum of the three term norms.
    pub stationarity: f64,
    /// `|e + alpha / gamma|_inf`.
    pub slack: f64,
    /// `|B w - g|_inf`.
    pub feasibility: f64,
}

impl KktResiduals {
    pub fn within(&self, tol: f64) -> bool {
        self.stationarity <= tol && self.slack <= tol && self.feasibility <= tol
    }
}

/// Saddle-point system of one time step.
#[derive(Debug, Clone)]
pub struct KktSystem {
    /// Soft constraint rows.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Hard boundary rows, `2 x (N + 1)`.
    pub hard: DMatrix<f64>,
    pub g: DVector<f64>,
    pub solution: Option<KktSolution>,
}

#[derive(Debug, Clone)]
pub struct KktSolution {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub w: DVector<f64>,
    /// Soft-constraint residuals `A w - b`.
    pub e: DVector<f64>,
    pub residuals: KktResiduals,
    /// 2-norm condition number of the factorized system.
    pub condition: f64,
}

/// Builds the constraint rows for one step.
pub fn assemble(
    disc: &Discretization,
    op: &LinearOperator,
    rhs: &RhsFunction,
    targets: [f64; 2],
) -> KktSystem {
    let n = disc.basis.len();
    let (a, b) = match disc.formulation {
        Formulation::Collocation => {
            let m = disc.points.len();
            let mut a = DMatrix::zeros(m, n);
            let mut b = DVector::zeros(m);
            for (i, table) in disc.tables.iter().enumerate() {
                for (j, v) in op.images_with_table(table).into_iter().enumerate() {
                    a[(i, j)] = v;
                }
                b[i] = rhs.eval_with_table(table);
            }
            (a, b)
        }
        Formulation::Galerkin => {
            let mut a = DMatrix::zeros(n, n);
            let mut b = DVector::zeros(n);
            for (q, table) in disc.tables.iter().enumerate() {
                let wq = disc.weights[q];
                let images = op.images_with_table(table);
                let f = rhs.eval_with_table(table);
                for i in 0..n {
                    let phi_i = wq * table[i][0];
                    b[i] += phi_i * f;
                    for (j, l) in images.iter().enumerate() {
                        a[(i, j)] += phi_i * l;
                    }
                }
            }
            (a, b)
        }
    };
    let mut hard = DMatrix::zeros(2, n);
    for (r, row) in disc.boundary.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            hard[(r, j)] = *v;
        }
    }
    KktSystem {
        a,
        b,
        hard,
        g: DVector::from_row_slice(&targets),
        solution: None,
    }
}

/// Solves the optimality system of `min 1/2 |w|^2 + gamma/2 |e|^2`.
///
/// Eliminating `w` and `e` gives
/// `[A A^T + I/gamma, A B^T; B A^T, B B^T] [alpha; beta] = [b; g]`. That
/// matrix is factorized here in its unreduced form
/// `[I, A^T, B^T; A, -I/gamma, 0; B, 0, 0] [w; -alpha; -beta] = [0; b; g]`,
/// which has the same solution but avoids squaring the condition number of
/// `A`.
pub fn solve_kkt(mut sys: KktSystem, gamma: f64) -> Result<KktSystem> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let (m, n) = sys.a.shape();
    let h = sys.hard.nrows();
    if sys.hard.ncols() != n || sys.b.len() != m || sys.g.len() != h {
        return Err(Error::invalid("KKT blocks have inconsistent shapes"));
    }
    if h > 0 {
        let bbt = &sys.hard * sys.hard.transpose();
        let scale = bbt.diagonal().iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let sv = bbt.singular_values();
        let smallest = sv.iter().fold(f64::INFINITY, |s, v| s.min(*v));
        if scale == 0.0 || smallest <= 1e-12 * scale {
            return Err(Error::SingularSystem(
                "hard constraint rows are linearly dependent".into(),
            ));
        }
    }

    let size = n + m + h;
    let mut k = DMatrix::<f64>::zeros(size, size);
    for i in 0..n {
        k[(i, i)] = 1.0;
    }
    for i in 0..m {
        for j in 0..n {
            k[(n + i, j)] = sys.a[(i, j)];
            k[(j, n + i)] = sys.a[(i, j)];
        }
        k[(n + i, n + i)] = -1.0 / gamma;
    }
    for r in 0..h {
        for j in 0..n {
            k[(n + m + r, j)] = sys.hard[(r, j)];
            k[(j, n + m + r)] = sys.hard[(r, j)];
        }
    }
    let mut rhs = DVector::<f64>::zeros(size);
    rhs.rows_mut(n, m).copy_from(&sys.b);
    rhs.rows_mut(n + m, h).copy_from(&sys.g);

    let lu = k.clone().lu();
    let mut z = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("KKT matrix is singular".into()))?;
    for _ in 0..2 {
        let r = &rhs - &k * &z;
        if let Some(dz) = lu.solve(&r) {
            z += dz;
        }
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem(
            "KKT solve produced non-finite values".into(),
        ));
    }

    let sv = k.singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(a, b), v| (a.max(*v), b.min(*v)));
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };

    let w = z.rows(0, n).into_owned();
    let alpha = -z.rows(n, m).into_owned();
    let beta = -z.rows(n + m, h).into_owned();
    let e = &sys.a * &w - &sys.b;
    let residuals = kkt_residuals(&sys, &w, &alpha, &beta, &e, gamma);
    sys.solution = Some(KktSolution {
        alpha,
        beta,
        w,
        e,
        residuals,
        condition,
    });
    Ok(sys)
}

fn kkt_residuals(
    sys: &KktSystem,
    w: &DVector<f64>,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    e: &DVector<f64>,
    gamma: f64,
) -> KktResiduals {
    let at_alpha = sys.a.transpose() * alpha;
    let bt_beta = sys.hard.transpose() * beta;
    let stat = w - &at_alpha - &bt_beta;
    // Relative to the size of the terms that cancel.
    let scale = w.norm() + at_alpha.norm() + bt_beta.norm();
    let stationarity = if scale > 0.0 {
        stat.norm() / scale
    } else {
        0.0
    };
    let slack = (e + alpha / gamma).amax();
    let feasibility = if sys.g.is_empty() {
        0.0
    } else {
        (&sys.hard * w - &sys.g).amax()
    };
    KktResiduals {
        stationarity,
        slack,
        feasibility,
    }
}

/// Noisy (and optionally clean) reference used to track the SNR of each
/// step on an evaluation interval.
#[derive(Debug, Clone)]
pub struct SnrReference {
    pub noisy: SampledSignal,
    pub clean: Option<SampledSignal>,
    pub interval: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub kkt: KktResiduals,
    /// `|A w - b|_2` of the accepted solve.
    pub soft_residual: f64,
    pub condition: f64,
    pub energy: f64,
    pub picard_iterations: usize,
    pub picard_converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Snr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_clean_db: Option<Snr>,
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub step: usize,
    pub time: f64,
    pub u: SpectralSignal,
    /// Absent for the initial state.
    pub diagnostics: Option<StepDiagnostics>,
}

impl EvolutionState {
    pub fn initial(u0: SpectralSignal) -> Self {
        Self {
            step: 0,
            time: 0.0,
            u: u0,
            diagnostics: None,
        }
    }
}

/// Endpoint values imposed as hard constraints on every step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BoundaryTargets {
    /// `u(0)` and `u(1)` of the initial state.
    #[default]
    FromInitial,
    Fixed([f64; 2]),
}

/// Stepper with its discretization prepared once.
#[derive(Debug, Clone)]
pub struct DiffusionSolver {
    dconfig: DiffusionConfig,
    sconfig: LssvrConfig,
    disc: Discretization,
    targets: [f64; 2],
}

impl DiffusionSolver {
    pub fn new(dconfig: DiffusionConfig, sconfig: LssvrConfig, targets: [f64; 2]) -> Result<Self> {
        dconfig.validate()?;
        let disc = Discretization::new(&sconfig)?;
        Ok(Self {
            dconfig,
            sconfig,
            disc,
            targets,
        })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn solve_frozen(&self, rhs: &RhsFunction, source: &SpectralSignal) -> Result<KktSolution> {
        let op = linear_operator(&self.dconfig, source);
        let sys = assemble(&self.disc, &op, rhs, self.targets);
        let solved = solve_kkt(sys, self.sconfig.gamma)?;
        let sol = solved.solution.expect("solve_kkt fills the solution");
        debug_assert!(
            sol.residuals.within(KKT_TOL),
            "KKT optimality conditions violated: {:?}",
            sol.residuals
        );
        Ok(sol)
    }

    /// Advances `state` by one time step.
    pub fn step(&self, state: &EvolutionState) -> Result<EvolutionState> {
        if state.u.basis() != self.sconfig.basis() {
            return Err(Error::invalid(
                "state basis does not match the solver basis",
            ));
        }
        let rhs = rhs_function(&state.u, &self.dconfig);
        let basis = self.sconfig.basis();
        let (sol, iterations, converged) = match self.sconfig.nonlinearity {
            Nonlinearity::SemiImplicit => (self.solve_frozen(&rhs, &state.u)?, 1, true),
            Nonlinearity::Picard { max_iter, tol } => {
                let mut sol = self.solve_frozen(&rhs, &state.u)?;
                let mut iterations = 1;
                let mut converged = false;
                while iterations < max_iter {
                    let source = SpectralSignal::new(basis, sol.w.iter().copied().collect())?;
                    let next = self.solve_frozen(&rhs, &source)?;
                    iterations += 1;
                    let change = (&next.w - &sol.w).amax();
                    sol = next;
                    if change < tol {
                        converged = true;
                        break;
                    }
                }
                (sol, iterations, converged)
            }
        };
        let u = SpectralSignal::new(basis, sol.w.iter().copied().collect())?;
        let step = state.step + 1;
        let diagnostics = StepDiagnostics {
            step,
            time: step as f64 * self.dconfig.dt,
            kkt: sol.residuals,
            soft_residual: sol.e.norm(),
            condition: sol.condition,
            energy: u.energy(),
            picard_iterations: iterations,
            picard_converged: converged,
            snr_db: None,
            snr_clean_db: None,
        };
        Ok(EvolutionState {
            step,
            time: diagnostics.time,
            u,
            diagnostics: Some(diagnostics),
        })
    }
}

/// Single step with boundary targets taken from `state` itself.
pub fn step(
    state: &EvolutionState,
    dconfig: &DiffusionConfig,
    sconfig: &LssvrConfig,
) -> Result<EvolutionState> {
    let targets = [state.u.eval_derivs(0.0)[0], state.u.eval_derivs(1.0)[0]];
    DiffusionSolver::new(*dconfig, *sconfig, targets)?.step(state)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub boundary: BoundaryTargets,
    pub reference: Option<SnrReference>,
}

#[derive(Debug, Clone)]
pub struct DiffusionRun {
    /// States at the requested snapshot times followed by the final state.
    pub snapshots: Vec<EvolutionState>,
    /// Diagnostics of every step in order.
    pub history: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
}

impl DiffusionRun {
    pub fn final_state(&self) -> &EvolutionState {
        self.snapshots
            .last()
            .expect("a run always has a final state")
    }
}

/// Converts snapshot times to step indices.
pub fn snapshot_steps(times: &[f64], dt: f64, steps: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!(
                "snapshot time {t} must be nonnegative"
            )));
        }
        let k = if t == 0.0 {
            0
        } else if dt > 0.0 {
            (t / dt).round() as usize
        } else {
            return Err(Error::invalid(format!(
                "snapshot time {t} with a zero time step"
            )));
        };
        if (t - k as f64 * dt).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "snapshot time {t} is not a multiple of the time step {dt}"
            )));
        }
        if k > steps {
            return Err(Error::invalid(format!(
                "snapshot time {t} lies beyond the final time {}",
                steps as f64 * dt
            )));
        }
        out.push(k);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Evolves `u0` for `dconfig.steps` steps.
pub fn run_diffusion(
    u0: &SpectralSignal,
    dconfig: &DiffusionConfig,
    sconfig: &LssvrConfig,
    snapshots: &[f64],
    options: &RunOptions,
) -> Result<DiffusionRun> {
    let wanted = snapshot_steps(snapshots, dconfig.dt, dconfig.steps)?;
    let targets = match options.boundary {
        BoundaryTargets::FromInitial => [u0.eval_derivs(0.0)[0], u0.eval_derivs(1.0)[0]],
        BoundaryTargets::Fixed(g) => g,
    };
    let solver = DiffusionSolver::new(*dconfig, *sconfig, targets)?;
    let mut warnings = sconfig.warnings();

    let eval_grid: Option<Vec<f64>> = options.reference.as_ref().map(|r| r.noisy.xs().to_vec());
    let measure = |u: &SpectralSignal, d: &mut StepDiagnostics| -> Result<()> {
        if let (Some(r), Some(grid)) = (&options.reference, &eval_grid) {
            let s = u.render(grid)?;
            d.snr_db = Some(snr_db(&s, &r.noisy, r.interval)?);
            if let Some(clean) = &r.clean {
                d.snr_clean_db = Some(snr_db_clean(&s, clean, r.interval)?);
            }
        }
        Ok(())
    };

    let mut state = EvolutionState::initial(u0.clone());
    let mut out = Vec::new();
    if wanted.first() == Some(&0) && dconfig.steps > 0 {
        out.push(state.clone());
    }
    let mut history = Vec::with_capacity(dconfig.steps);
    for n in 0..dconfig.steps {
        let mut next = solver.step(&state).map_err(|e| Error::Step {
            step: n + 1,
            source: Box::new(e),
        })?;
        let d = next.diagnostics.as_mut().expect("step sets diagnostics");
        measure(&next.u, d)?;
        if d.condition > CONDITION_WARN {
            warnings.push(format!(
                "step {}: condition number {:.3e}",
                d.step, d.condition
            ));
        }
        if !d.picard_converged {
            warnings.push(format!(
                "step {}: Picard iteration stopped after {} iterations without converging",
                d.step, d.picard_iterations
            ));
        }
        history.push(d.clone());
        state = next;
        if wanted.binary_search(&state.step).is_ok() && state.step < dconfig.steps {
            out.push(state.clone());
        }
    }
    out.push(state);
    Ok(DiffusionRun {
        snapshots: out,
        history,
        warnings,
    })
}
