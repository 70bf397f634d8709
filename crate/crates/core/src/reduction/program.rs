use serde::{Deserialize, Serialize};

use super::class::{DataBand, PriorClassSpec};
use crate::error::{Error, Result};
use crate::measures::{
    data_probability, data_probability_limit, ConstraintSpec, DiscreteMeasure, Interval, MomentFn, MomentMap,
    Observation, QuantityOfInterest, Support,
};
use crate::numeric::ext_f64;

/// Sample count for the nonnegativity check of `ψ₀`.
const PSI0_CHECK_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sup,
    Inf,
}

impl Direction {
    /// `+1` for sup, `-1` for inf: inf problems are solved as sup of `-Φ`.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Sup => 1.0,
            Direction::Inf => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProgramKind {
    PriorPrimary,
    PositiveMeasure,
    PosteriorFractional,
    LambdaThreshold,
}

/// How data probabilities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// Open balls of the observation's radius.
    #[default]
    Finite,
    /// Radius shrunk to zero: ball masses become point masses at the
    /// observed points, or, under a band, a free relative factor.
    Limit,
}

/// One measure variable of a program, with the relative data factor used
/// by band-constrained limit programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub measure: DiscreteMeasure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_factor: Option<f64>,
}

impl Candidate {
    pub fn new(measure: DiscreteMeasure) -> Self {
        Self { measure, data_factor: None }
    }

    pub fn with_factor(measure: DiscreteMeasure, factor: f64) -> Self {
        Self { measure, data_factor: Some(factor) }
    }
}

/// Extra data of a positive-measure program.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositiveSpec {
    pub psi0: MomentFn,
    pub factorized: bool,
}

/// Measures and mixing weights attaining a program value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub measures: Vec<DiscreteMeasure>,
    pub mixing: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_factors: Option<Vec<f64>>,
}

impl Witness {
    pub fn candidates(&self) -> Vec<Candidate> {
        self.measures
            .iter()
            .enumerate()
            .map(|(j, m)| Candidate {
                measure: m.clone(),
                data_factor: self.data_factors.as_ref().map(|f| f[j]),
            })
            .collect()
    }

    pub fn atom_count(&self) -> usize {
        self.measures
            .iter()
            .zip(&self.mixing)
            .filter(|(_, &p)| p > 0.0)
            .map(|(m, _)| m.active_atoms(0.0))
            .sum()
    }
}

/// Values of one measure variable: `Φ(μ)`, `Ψ(μ)` and its data term.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnValues {
    pub phi: f64,
    pub psi: Vec<f64>,
    /// `D(μ)[B]` for posterior programs, `E_μ[ψ₀]` for positive programs and
    /// `1` for prior programs.
    pub data: f64,
}

/// Objective value, feasibility residual and denominator of a witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessEvaluation {
    pub value: f64,
    pub residual: f64,
    pub denominator: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableDescriptor {
    pub name: String,
    #[serde(with = "ext_f64")]
    pub lower: f64,
    #[serde(with = "ext_f64")]
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintDescriptor {
    pub name: String,
    #[serde(with = "ext_f64")]
    pub lower: f64,
    #[serde(with = "ext_f64")]
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveDescriptor {
    pub form: String,
    pub numerator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator: Option<String>,
}

/// Finite-dimensional program produced by a reduction theorem.
#[derive(Debug, Clone)]
pub struct ReducedProgram {
    pub(crate) kind: ProgramKind,
    pub(crate) direction: Direction,
    pub(crate) n_atoms: usize,
    pub(crate) n_measures: usize,
    pub(crate) qoi: QuantityOfInterest,
    pub(crate) moment_map: MomentMap,
    pub(crate) constraints: ConstraintSpec,
    pub(crate) observation: Option<Observation>,
    pub(crate) data_mode: DataMode,
    pub(crate) band: Option<DataBand>,
    pub(crate) positive: Option<PositiveSpec>,
    pub(crate) lambda: Option<f64>,
    pub(crate) candidates: Vec<Candidate>,
    pub(crate) pinned: bool,
}

#[derive(Serialize, Deserialize)]
struct ProgramRepr {
    kind: ProgramKind,
    direction: Direction,
    n_atoms: usize,
    n_measures: usize,
    qoi: QuantityOfInterest,
    moment_map: MomentMap,
    constraints: ConstraintSpec,
    #[serde(default)]
    observation: Option<Observation>,
    #[serde(default)]
    data_mode: DataMode,
    #[serde(default)]
    band: Option<DataBand>,
    #[serde(default)]
    positive: Option<PositiveSpec>,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    candidates: Vec<Candidate>,
    #[serde(default)]
    pinned: bool,
}

#[derive(Serialize)]
struct DumpRepr<'a> {
    #[serde(flatten)]
    program: ProgramRepr,
    variables: &'a [VariableDescriptor],
    constraint_descriptors: &'a [ConstraintDescriptor],
    objective: &'a ObjectiveDescriptor,
}

impl Serialize for ReducedProgram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let vars = self.variables();
        let cons = self.constraint_descriptors();
        let obj = self.objective_descriptor();
        DumpRepr {
            program: ProgramRepr {
                kind: self.kind,
                direction: self.direction,
                n_atoms: self.n_atoms,
                n_measures: self.n_measures,
                qoi: self.qoi.clone(),
                moment_map: self.moment_map.clone(),
                constraints: self.constraints.clone(),
                observation: self.observation.clone(),
                data_mode: self.data_mode,
                band: self.band.clone(),
                positive: self.positive.clone(),
                lambda: self.lambda,
                candidates: self.candidates.clone(),
                pinned: self.pinned,
            },
            variables: &vars,
            constraint_descriptors: &cons,
            objective: &obj,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReducedProgram {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = ProgramRepr::deserialize(d)?;
        let p = ReducedProgram {
            kind: r.kind,
            direction: r.direction,
            n_atoms: r.n_atoms,
            n_measures: r.n_measures,
            qoi: r.qoi,
            moment_map: r.moment_map,
            constraints: r.constraints,
            observation: r.observation,
            data_mode: r.data_mode,
            band: r.band,
            positive: r.positive,
            lambda: r.lambda,
            candidates: r.candidates,
            pinned: r.pinned,
        };
        p.validate().map_err(D::Error::custom)?;
        Ok(p)
    }
}

/// Options of [`reduce_posterior`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorOptions {
    pub mode: DataMode,
    /// Atoms per measure beyond `n_constraints + n_obs + 1`.
    pub atom_slack: usize,
    /// Number of measure variables; defaults to `n_constraints + 1`.
    pub n_measures: Option<usize>,
}

impl PosteriorOptions {
    pub fn limit() -> Self {
        Self { mode: DataMode::Limit, ..Self::default() }
    }
}

impl ReducedProgram {
    pub fn kind(&self) -> ProgramKind {
        self.kind
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_measures(&self) -> usize {
        self.n_measures
    }

    pub fn qoi(&self) -> &QuantityOfInterest {
        &self.qoi
    }

    pub fn moment_map(&self) -> &MomentMap {
        &self.moment_map
    }

    pub fn constraints(&self) -> &ConstraintSpec {
        &self.constraints
    }

    pub fn observation(&self) -> Option<&Observation> {
        self.observation.as_ref()
    }

    pub fn data_mode(&self) -> DataMode {
        self.data_mode
    }

    pub fn band(&self) -> Option<&DataBand> {
        self.band.as_ref()
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    pub fn support(&self) -> &Support {
        self.moment_map.support()
    }

    pub fn n_obs(&self) -> usize {
        self.observation.as_ref().map_or(0, Observation::count)
    }

    /// Whether data factors are free variables (band under limit mode).
    pub fn uses_data_factors(&self) -> bool {
        self.band.is_some() && self.data_mode == DataMode::Limit && self.n_obs() > 0
    }

    /// Adds measures that the solver must consider besides its own pool.
    pub fn with_candidates(mut self, candidates: Vec<Candidate>) -> Self {
        self.candidates.extend(candidates);
        self
    }

    /// Restricts the measure variables to the given candidates: only the
    /// mixing weights remain free.
    pub fn pinned_to(mut self, candidates: Vec<Candidate>) -> Self {
        self.candidates = candidates;
        self.pinned = true;
        self
    }

    /// Program of `V(λ) = sup_π E_π[(Φ - λ) D]` over the same class.
    pub fn threshold_program(&self, lambda: f64) -> Result<Self> {
        if self.kind != ProgramKind::PosteriorFractional {
            return Err(Error::InvalidInput("threshold programs derive from posterior programs".into()));
        }
        let mut p = self.clone();
        p.kind = ProgramKind::LambdaThreshold;
        p.lambda = Some(lambda);
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn validate(&self) -> Result<()> {
        let m = self.constraints.dim();
        if self.moment_map.dim() != m {
            return Err(Error::InvalidInput("moment map and constraints disagree in dimension".into()));
        }
        let need = match self.kind {
            ProgramKind::PriorPrimary => m + 1,
            ProgramKind::PositiveMeasure => {
                let pos = self.positive.as_ref().ok_or_else(|| {
                    Error::InvalidInput("positive program without psi0".into())
                })?;
                if pos.factorized {
                    m + 1
                } else {
                    m + 2
                }
            }
            ProgramKind::PosteriorFractional | ProgramKind::LambdaThreshold => m + self.n_obs() + 1,
        };
        if self.n_atoms < need {
            return Err(Error::InvalidInput(format!(
                "{:?} program needs at least {need} atoms, got {}",
                self.kind, self.n_atoms
            )));
        }
        if self.kind == ProgramKind::LambdaThreshold && !self.lambda.is_some_and(f64::is_finite) {
            return Err(Error::InvalidInput("threshold program needs a finite lambda".into()));
        }
        if self.n_measures == 0 {
            return Err(Error::InvalidInput("program needs at least one measure variable".into()));
        }
        Ok(())
    }

    /// `Φ`, `Ψ` and the data term of one measure variable; `None` when the
    /// candidate lies outside the model class (band violated).
    pub fn column(&self, c: &Candidate) -> Result<Option<ColumnValues>> {
        let mu = &c.measure;
        match self.kind {
            ProgramKind::PriorPrimary => Ok(Some(ColumnValues {
                phi: self.qoi.evaluate(mu)?,
                psi: self.moment_map.eval(mu),
                data: 1.0,
            })),
            ProgramKind::PositiveMeasure => {
                let psi0 = &self.positive.as_ref().expect("validated").psi0;
                Ok(Some(ColumnValues {
                    phi: self.qoi.evaluate(mu)?,
                    psi: self.moment_map.eval(mu),
                    data: mu.expect(|x| psi0.eval(x)),
                }))
            }
            ProgramKind::PosteriorFractional | ProgramKind::LambdaThreshold => {
                let data = match self.data_term(c) {
                    Some(d) => d,
                    None => return Ok(None),
                };
                Ok(Some(ColumnValues { phi: self.qoi.evaluate(mu)?, psi: self.moment_map.eval(mu), data }))
            }
        }
    }

    fn data_term(&self, c: &Candidate) -> Option<f64> {
        let obs = match &self.observation {
            Some(o) if !o.is_empty() => o,
            _ => return Some(1.0),
        };
        if self.uses_data_factors() {
            let (lo, hi) = self.band.as_ref().expect("band").relative_range(obs.count());
            let f = c.data_factor?;
            return (f >= lo * (1.0 - 1e-12) && f <= hi * (1.0 + 1e-12)).then_some(f);
        }
        if c.data_factor.is_some() {
            return None;
        }
        match self.data_mode {
            DataMode::Limit => Some(data_probability_limit(&c.measure, obs)),
            DataMode::Finite => {
                if let Some(band) = &self.band {
                    if !band.admits(&c.measure, obs) {
                        return None;
                    }
                }
                Some(data_probability(&c.measure, obs))
            }
        }
    }

    /// Numerator and denominator contributed by a column, in the sign
    /// convention where the solver maximizes `num / den`.
    pub(crate) fn objective_terms(&self, phi: f64, data: f64) -> (f64, f64) {
        let s = self.direction.sign();
        match self.kind {
            ProgramKind::PriorPrimary => (s * phi, 1.0),
            ProgramKind::PositiveMeasure => (s * phi, data),
            ProgramKind::PosteriorFractional => (s * phi * data, data),
            ProgramKind::LambdaThreshold => ((s * phi - self.lambda.expect("validated")) * data, 1.0),
        }
    }

    /// Maps a maximized ratio back to the program's reported value.
    pub(crate) fn report_value(&self, ratio: f64) -> f64 {
        match self.kind {
            ProgramKind::LambdaThreshold => ratio,
            // `+ 0.0` maps `-0.0` to `0.0`
            _ => self.direction.sign() * ratio + 0.0,
        }
    }

    /// Re-evaluates a witness from scratch through the measures module.
    pub fn evaluate(&self, w: &Witness) -> Result<WitnessEvaluation> {
        if w.measures.len() != w.mixing.len() {
            return Err(Error::InvalidInput("witness mixing length mismatch".into()));
        }
        let m = self.constraints.dim();
        let mut psi = vec![0.0; m];
        let (mut num, mut den) = (0.0, 0.0);
        let mut band_violation = false;
        for (c, &p) in w.candidates().iter().zip(&w.mixing) {
            match self.column(c)? {
                Some(col) => {
                    let (n, d) = self.objective_terms(col.phi, col.data);
                    num += p * n;
                    den += p * d;
                    for (acc, v) in psi.iter_mut().zip(&col.psi) {
                        *acc += p * v;
                    }
                }
                None => band_violation = true,
            }
        }
        let mix_total: f64 = w.mixing.iter().sum();
        let mut residual = (mix_total - 1.0).abs();
        if w.mixing.iter().any(|&p| p < 0.0) || band_violation {
            residual = f64::INFINITY;
        }
        if self.kind == ProgramKind::PositiveMeasure {
            // constraints are stated for the normalized measure E[ψ_i]/E[ψ₀]
            residual = den - 1.0;
            residual = residual.abs();
            if den > 0.0 {
                let scaled: Vec<f64> = psi.iter().map(|v| v / den).collect();
                residual = residual.max(self.constraints.residual(&scaled));
            }
        } else {
            residual = residual.max(self.constraints.residual(&psi));
        }
        let value = if den > 0.0 { self.report_value(num / den) } else { f64::NAN };
        Ok(WitnessEvaluation { value, residual, denominator: den })
    }

    /// Charnes–Cooper weights `α_j = p_j / Σ p D` satisfying the
    /// normalization `Σ α_j D(μ_j)[B] = 1`.
    pub fn normalized_mixing(&self, w: &Witness) -> Result<Vec<f64>> {
        let den = self.evaluate(w)?.denominator;
        if den <= 0.0 {
            return Err(Error::NullEvent);
        }
        Ok(w.mixing.iter().map(|p| p / den).collect())
    }

    pub fn variables(&self) -> Vec<VariableDescriptor> {
        let s = self.support();
        let mut v = Vec::new();
        let w_hi = if self.kind == ProgramKind::PositiveMeasure { f64::INFINITY } else { 1.0 };
        for j in 0..self.n_measures {
            for i in 0..self.n_atoms {
                v.push(VariableDescriptor { name: format!("x[{j}][{i}]"), lower: s.lo(), upper: s.hi() });
                v.push(VariableDescriptor { name: format!("w[{j}][{i}]"), lower: 0.0, upper: w_hi });
            }
        }
        if matches!(self.kind, ProgramKind::PosteriorFractional | ProgramKind::LambdaThreshold) {
            let a_hi = if self.kind == ProgramKind::PosteriorFractional { f64::INFINITY } else { 1.0 };
            for j in 0..self.n_measures {
                v.push(VariableDescriptor { name: format!("alpha[{j}]"), lower: 0.0, upper: a_hi });
            }
            if self.uses_data_factors() {
                let (lo, hi) = self.band.as_ref().expect("band").relative_range(self.n_obs());
                for j in 0..self.n_measures {
                    v.push(VariableDescriptor { name: format!("r[{j}]"), lower: lo, upper: hi });
                }
            }
        }
        v
    }

    pub fn constraint_descriptors(&self) -> Vec<ConstraintDescriptor> {
        let mut c = Vec::new();
        let names: Vec<String> = self.moment_map.components().iter().map(MomentFn::name).collect();
        let eq = |name: String, v: f64| ConstraintDescriptor { name, lower: v, upper: v };
        match self.kind {
            ProgramKind::PriorPrimary => {
                c.push(eq("sum_i w[0][i]".into(), 1.0));
                for (n, iv) in names.iter().zip(self.constraints.intervals()) {
                    c.push(ConstraintDescriptor { name: format!("sum_i w[0][i] {n}(x[0][i])"), lower: iv.lo, upper: iv.hi });
                }
            }
            ProgramKind::PositiveMeasure => {
                let psi0 = self.positive.as_ref().expect("validated").psi0.name();
                c.push(eq(format!("sum_i w[0][i] {psi0}(x[0][i])"), 1.0));
                for (n, iv) in names.iter().zip(self.constraints.intervals()) {
                    c.push(ConstraintDescriptor { name: format!("sum_i w[0][i] {n}(x[0][i])"), lower: iv.lo, upper: iv.hi });
                }
            }
            ProgramKind::PosteriorFractional | ProgramKind::LambdaThreshold => {
                for j in 0..self.n_measures {
                    c.push(eq(format!("sum_i w[{j}][i]"), 1.0));
                }
                for (n, iv) in names.iter().zip(self.constraints.intervals()) {
                    c.push(ConstraintDescriptor {
                        name: format!("sum_j alpha[j] (E_mu[j][{n}] - q) = 0, q in [lo, hi]"),
                        lower: iv.lo,
                        upper: iv.hi,
                    });
                }
                if self.kind == ProgramKind::PosteriorFractional {
                    c.push(eq("sum_j alpha[j] D(mu[j])[B]".into(), 1.0));
                } else {
                    c.push(eq("sum_j alpha[j]".into(), 1.0));
                }
                if let (Some(band), false) = (&self.band, self.uses_data_factors()) {
                    let (lo, hi) = band.relative_range(self.n_obs());
                    for j in 0..self.n_measures {
                        c.push(ConstraintDescriptor { name: format!("band D(mu[{j}])[B] / D(mu0)[B]"), lower: lo, upper: hi });
                    }
                }
            }
        }
        c
    }

    pub fn objective_descriptor(&self) -> ObjectiveDescriptor {
        let phi = self.qoi.name();
        let dir = match self.direction {
            Direction::Sup => "sup",
            Direction::Inf => "inf",
        };
        match self.kind {
            ProgramKind::PriorPrimary => ObjectiveDescriptor {
                form: "linear".into(),
                numerator: format!("{dir} sum_i w[0][i] {phi}(x[0][i])"),
                denominator: None,
            },
            ProgramKind::PositiveMeasure => ObjectiveDescriptor {
                form: "linear".into(),
                numerator: format!("{dir} sum_i w[0][i] {phi}(x[0][i])"),
                denominator: None,
            },
            ProgramKind::PosteriorFractional => ObjectiveDescriptor {
                form: "linear_fractional".into(),
                numerator: format!("{dir} sum_j alpha[j] {phi}(mu[j]) D(mu[j])[B]"),
                denominator: Some("sum_j alpha[j] D(mu[j])[B]".into()),
            },
            ProgramKind::LambdaThreshold => ObjectiveDescriptor {
                form: "linear".into(),
                numerator: format!(
                    "sup sum_j alpha[j] ({phi}(mu[j]) - {}) D(mu[j])[B]",
                    self.lambda.unwrap_or(f64::NAN)
                ),
                denominator: None,
            },
        }
    }
}

/// Primary reduction: `sup/inf E_π[Φ]` over `Π(Z)` becomes a program over one
/// measure with `n + 1` atoms.
pub fn reduce_prior(phi: &QuantityOfInterest, spec: &PriorClassSpec, direction: Direction) -> Result<ReducedProgram> {
    if spec.band().is_some() {
        return Err(Error::Precondition("prior reduction takes classes without a data band".into()));
    }
    if !phi.is_affine() {
        return Err(Error::RequiresNestedPath(format!(
            "{} is not affine in the measure; use the nested reduction",
            phi.name()
        )));
    }
    let m = spec.constraints().dim();
    Ok(ReducedProgram {
        kind: ProgramKind::PriorPrimary,
        direction,
        n_atoms: m + 1,
        n_measures: 1,
        qoi: phi.clone(),
        moment_map: spec.moment_map().clone(),
        constraints: spec.constraints().clone(),
        observation: None,
        data_mode: DataMode::Finite,
        band: None,
        positive: None,
        lambda: None,
        candidates: Vec::new(),
        pinned: false,
    })
}

/// Posterior reduction: `sup/inf` of the conditional expectation of `Φ`
/// given `B` over `Π(Z)` becomes a linear-fractional program over a few
/// finitely supported measures.
pub fn reduce_posterior(
    phi: &QuantityOfInterest,
    spec: &PriorClassSpec,
    obs: &Observation,
    direction: Direction,
    opts: PosteriorOptions,
) -> Result<ReducedProgram> {
    if obs.support() != spec.support() {
        return Err(Error::InvalidInput("observation and prior class live on different supports".into()));
    }
    let m = spec.constraints().dim();
    let n_measures = opts.n_measures.unwrap_or(m + 1).max(1);
    Ok(ReducedProgram {
        kind: ProgramKind::PosteriorFractional,
        direction,
        n_atoms: m + obs.count() + 1 + opts.atom_slack,
        n_measures,
        qoi: phi.clone(),
        moment_map: spec.moment_map().clone(),
        constraints: spec.constraints().clone(),
        observation: Some(obs.clone()),
        data_mode: opts.mode,
        band: spec.band().cloned(),
        positive: None,
        lambda: None,
        candidates: Vec::new(),
        pinned: false,
    })
}

/// Reduction over positive measures: `sup/inf E_{π₊}[Φ]` subject to
/// `E_{π₊}[ψ₀] = 1` and `E_{π₊}[ψ_i] = 0`.
pub fn reduce_positive(
    phi: &QuantityOfInterest,
    psi0: MomentFn,
    psis: Vec<MomentFn>,
    support: Support,
    direction: Direction,
    factorized: bool,
) -> Result<ReducedProgram> {
    if !phi.is_affine() {
        return Err(Error::RequiresNestedPath(format!("{} has no atom-level evaluator", phi.name())));
    }
    let mut pts = support.grid(PSI0_CHECK_SAMPLES);
    pts.extend(psi0.breakpoints().into_iter().filter(|t| support.contains(*t)));
    if let Some(x) = pts.into_iter().find(|&x| !(psi0.eval(x) >= 0.0)) {
        return Err(Error::Precondition(format!(
            "psi0 = {} is negative at x = {x} ({})",
            psi0.name(),
            psi0.eval(x)
        )));
    }
    let n = psis.len();
    let moment_map = MomentMap::new(support, psis)?;
    let constraints = ConstraintSpec::new(vec![Interval::point(0.0); n])?;
    Ok(ReducedProgram {
        kind: ProgramKind::PositiveMeasure,
        direction,
        n_atoms: if factorized { n + 1 } else { n + 2 },
        n_measures: 1,
        qoi: phi.clone(),
        moment_map,
        constraints,
        observation: None,
        data_mode: DataMode::Finite,
        band: None,
        positive: Some(PositiveSpec { psi0, factorized }),
        lambda: None,
        candidates: Vec::new(),
        pinned: false,
    })
}
