//! Gambles, three-option choice sets, the random task distribution and the
//! structured decoy tasks (attraction, compromise, similarity, Wedell sets).

use rand::Rng;
use rand_distr::{Beta, Distribution, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of rejected value draws before sampling gives up.
pub const MAX_VALUE_REJECTIONS: usize = 1000;

pub const DEFAULT_TIE_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("invalid gamble (p={p}, v={v}): p must lie in [0, 1] and v must be positive")]
    InvalidGamble { p: f64, v: f64 },
    #[error("invalid task distribution: {0}")]
    InvalidDistribution(String),
    #[error("value sampler rejected {0} consecutive non-positive draws")]
    TooManyRejections(usize),
    #[error("invalid context task: {0}")]
    InvalidSpec(String),
    #[error("wedell set index {0} out of range 1..=4")]
    WedellIndex(usize),
}

/// A two-outcome gamble: win `v` with probability `p`, otherwise nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamble {
    pub p: f64,
    pub v: f64,
}

impl Gamble {
    pub fn new(p: f64, v: f64) -> Result<Self, TaskError> {
        let g = Gamble { p, v };
        if g.is_valid() {
            Ok(g)
        } else {
            Err(TaskError::InvalidGamble { p, v })
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.p) && self.v > 0.0 && self.v.is_finite()
    }

    #[inline]
    pub fn expected_value(&self) -> f64 {
        self.p * self.v
    }
}

/// Objective expected value `p * v`.
#[inline]
pub fn expected_value(g: &Gamble) -> f64 {
    g.expected_value()
}

/// `a` dominates `b` when it is at least as good on both attributes and
/// strictly better on one.
pub fn dominates(a: &Gamble, b: &Gamble) -> bool {
    a.p >= b.p && a.v >= b.v && (a.p > b.p || a.v > b.v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Target,
    Competitor,
    Decoy,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Target, Role::Competitor, Role::Decoy];

    pub fn name(self) -> &'static str {
        match self {
            Role::Target => "target",
            Role::Competitor => "competitor",
            Role::Decoy => "decoy",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Three gambles indexed X, Y, Z, optionally labelled with context roles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceSet {
    options: [Gamble; 3],
    roles: Option<[Role; 3]>,
}

impl ChoiceSet {
    pub fn new(options: [Gamble; 3]) -> Self {
        ChoiceSet { options, roles: None }
    }

    pub fn with_roles(options: [Gamble; 3], roles: [Role; 3]) -> Result<Self, TaskError> {
        let mut seen = [false; 3];
        for r in roles {
            if std::mem::replace(&mut seen[r.index()], true) {
                return Err(TaskError::InvalidSpec(format!("duplicate role {:?}", r)));
            }
        }
        Ok(ChoiceSet { options, roles: Some(roles) })
    }

    pub fn options(&self) -> &[Gamble; 3] {
        &self.options
    }

    pub fn option(&self, i: usize) -> &Gamble {
        &self.options[i]
    }

    pub fn roles(&self) -> Option<&[Role; 3]> {
        self.roles.as_ref()
    }

    pub fn role_of(&self, i: usize) -> Option<Role> {
        self.roles.map(|r| r[i])
    }

    /// Position of the option holding `role`, if roles are assigned.
    pub fn position_of(&self, role: Role) -> Option<usize> {
        self.roles.and_then(|r| r.iter().position(|&x| x == role))
    }

    pub fn expected_values(&self) -> [f64; 3] {
        self.options.map(|g| g.expected_value())
    }

    pub fn max_expected_value(&self) -> f64 {
        self.expected_values().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Reorders the options so that new position `i` holds old option `perm[i]`.
    /// Roles travel with their options.
    pub fn permuted(&self, perm: [usize; 3]) -> ChoiceSet {
        ChoiceSet { options: perm.map(|i| self.options[i]), roles: self.roles.map(|r| perm.map(|i| r[i])) }
    }
}

/// Beta-distributed probabilities and location-scale Student-t values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskDistribution {
    pub beta_a: f64,
    pub beta_b: f64,
    pub t_location: f64,
    pub t_scale: f64,
    pub t_df: f64,
}

impl Default for TaskDistribution {
    fn default() -> Self {
        TaskDistribution { beta_a: 1.0, beta_b: 1.0, t_location: 19.60, t_scale: 8.08, t_df: 100.0 }
    }
}

impl TaskDistribution {
    pub fn with_scale(t_scale: f64) -> Self {
        TaskDistribution { t_scale, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(TaskError::InvalidDistribution(what.to_string()))
            }
        };
        check(self.beta_a > 0.0 && self.beta_a.is_finite(), "beta_a must be > 0")?;
        check(self.beta_b > 0.0 && self.beta_b.is_finite(), "beta_b must be > 0")?;
        check(self.t_scale > 0.0 && self.t_scale.is_finite(), "t_scale must be > 0")?;
        check(self.t_df > 0.0 && self.t_df.is_finite(), "t_df must be > 0")?;
        check(self.t_location.is_finite(), "t_location must be finite")
    }

    pub fn sampler(&self) -> Result<TaskSampler, TaskError> {
        TaskSampler::new(*self)
    }
}

/// Prepared sampler for a [`TaskDistribution`]; cheap to clone and share.
#[derive(Debug, Clone)]
pub struct TaskSampler {
    dist: TaskDistribution,
    beta: Beta<f64>,
    student: StudentT<f64>,
}

impl TaskSampler {
    pub fn new(dist: TaskDistribution) -> Result<Self, TaskError> {
        dist.validate()?;
        let beta = Beta::new(dist.beta_a, dist.beta_b).map_err(|e| TaskError::InvalidDistribution(e.to_string()))?;
        let student = StudentT::new(dist.t_df).map_err(|e| TaskError::InvalidDistribution(e.to_string()))?;
        Ok(TaskSampler { dist, beta, student })
    }

    pub fn distribution(&self) -> &TaskDistribution {
        &self.dist
    }

    pub fn sample_probability<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.beta.sample(rng).clamp(0.0, 1.0)
    }

    /// Draws a value, resampling non-positive draws.
    pub fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, TaskError> {
        for _ in 0..MAX_VALUE_REJECTIONS {
            let v = self.dist.t_location + self.dist.t_scale * self.student.sample(rng);
            if v > 0.0 {
                return Ok(v);
            }
        }
        Err(TaskError::TooManyRejections(MAX_VALUE_REJECTIONS))
    }

    pub fn sample_gamble<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Gamble, TaskError> {
        let p = self.sample_probability(rng);
        let v = self.sample_value(rng)?;
        Ok(Gamble { p, v })
    }

    pub fn sample_choice_set<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChoiceSet, TaskError> {
        Ok(ChoiceSet::new([self.sample_gamble(rng)?, self.sample_gamble(rng)?, self.sample_gamble(rng)?]))
    }
}

/// Samples three independent gambles from `dist`.
pub fn sample_choice_set<R: Rng + ?Sized>(dist: &TaskDistribution, rng: &mut R) -> Result<ChoiceSet, TaskError> {
    TaskSampler::new(*dist)?.sample_choice_set(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContextKind {
    Attraction,
    Compromise,
    Similarity,
    WedellSet1,
    WedellSet2,
    WedellSet3,
    WedellSet4,
}

impl ContextKind {
    pub const EFFECTS: [ContextKind; 3] = [ContextKind::Attraction, ContextKind::Compromise, ContextKind::Similarity];

    pub fn wedell(index: usize) -> Result<Self, TaskError> {
        match index {
            1 => Ok(ContextKind::WedellSet1),
            2 => Ok(ContextKind::WedellSet2),
            3 => Ok(ContextKind::WedellSet3),
            4 => Ok(ContextKind::WedellSet4),
            other => Err(TaskError::WedellIndex(other)),
        }
    }

    pub fn wedell_index(self) -> Option<usize> {
        match self {
            ContextKind::WedellSet1 => Some(1),
            ContextKind::WedellSet2 => Some(2),
            ContextKind::WedellSet3 => Some(3),
            ContextKind::WedellSet4 => Some(4),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ContextKind::Attraction => "attraction",
            ContextKind::Compromise => "compromise",
            ContextKind::Similarity => "similarity",
            ContextKind::WedellSet1 => "wedell_1",
            ContextKind::WedellSet2 => "wedell_2",
            ContextKind::WedellSet3 => "wedell_3",
            ContextKind::WedellSet4 => "wedell_4",
        }
    }
}

/// Decoy displacement in (probability units, value units). Its meaning
/// depends on the task kind; see [`make_context_task`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyOffset {
    pub dp: f64,
    pub dv: f64,
}

impl DecoyOffset {
    pub const fn new(dp: f64, dv: f64) -> Self {
        DecoyOffset { dp, dv }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextTaskSpec {
    pub kind: ContextKind,
    pub target: Gamble,
    pub competitor: Gamble,
    pub decoy_offset: DecoyOffset,
    pub tie_epsilon: f64,
}

/// Builds a role-labelled choice set, options ordered (Target, Competitor, Decoy).
///
/// Decoy placement by kind:
/// - attraction and Wedell sets: `D = (T.p - dp, T.v - dv)`;
/// - compromise: `D.p = T.p + s*dp` with `s` pointing away from the competitor's
///   probability, and `D.v = EV(T)/D.p - dv`, i.e. on (or `dv` below) the iso-EV line;
/// - similarity: `D.p = T.p + dp`, `D.v = EV(T)/D.p`.
pub fn make_context_task(spec: &ContextTaskSpec) -> Result<ChoiceSet, TaskError> {
    let t = spec.target;
    let c = spec.competitor;
    let eps = spec.tie_epsilon;
    for (name, g) in [("target", t), ("competitor", c)] {
        if !g.is_valid() {
            return Err(TaskError::InvalidSpec(format!("{name} {g:?} is not a valid gamble")));
        }
    }
    if (t.expected_value() - c.expected_value()).abs() >= eps {
        return Err(TaskError::InvalidSpec(format!(
            "target EV {} and competitor EV {} differ by more than {eps}",
            t.expected_value(),
            c.expected_value()
        )));
    }
    if dominates(&t, &c) || dominates(&c, &t) {
        return Err(TaskError::InvalidSpec("target and competitor must trade off".into()));
    }
    let DecoyOffset { dp, dv } = spec.decoy_offset;
    let ev_t = t.expected_value();

    let d = match spec.kind {
        ContextKind::Attraction
        | ContextKind::WedellSet1
        | ContextKind::WedellSet2
        | ContextKind::WedellSet3
        | ContextKind::WedellSet4 => Gamble { p: t.p - dp, v: t.v - dv },
        ContextKind::Compromise => {
            let s = (t.p - c.p).signum();
            let p = t.p + s * dp;
            Gamble { p, v: ev_t / p - dv }
        }
        ContextKind::Similarity => {
            let p = t.p + dp;
            Gamble { p, v: ev_t / p }
        }
    };
    if !d.is_valid() || d.p <= 0.0 {
        return Err(TaskError::InvalidSpec(format!("decoy {d:?} falls outside p in (0,1], v > 0")));
    }

    let ok = match spec.kind {
        ContextKind::Attraction | ContextKind::WedellSet1 | ContextKind::WedellSet2 | ContextKind::WedellSet3 => {
            dominates(&t, &d) && !dominates(&c, &d)
        }
        ContextKind::WedellSet4 => dominates(&t, &d) == dominates(&c, &d),
        ContextKind::Compromise => {
            let between = |lo: f64, mid: f64, hi: f64| (lo < mid && mid < hi) || (hi < mid && mid < lo);
            between(c.p, t.p, d.p) && between(c.v, t.v, d.v)
        }
        ContextKind::Similarity => (d.expected_value() - ev_t).abs() < eps && d.p != t.p,
    };
    if !ok {
        return Err(TaskError::InvalidSpec(format!("decoy {d:?} does not satisfy the {} geometry", spec.kind.name())));
    }
    ChoiceSet::with_roles([t, c, d], [Role::Target, Role::Competitor, Role::Decoy])
}

/// Target/competitor pair plus the four decoy placements of the Wedell sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedellGeometry {
    pub target: Gamble,
    pub competitor: Gamble,
    pub offsets: [DecoyOffset; 4],
}

pub fn make_wedell_set(index: usize, geometry: &WedellGeometry, tie_epsilon: f64) -> Result<ChoiceSet, TaskError> {
    let kind = ContextKind::wedell(index)?;
    make_context_task(&ContextTaskSpec {
        kind,
        target: geometry.target,
        competitor: geometry.competitor,
        decoy_offset: geometry.offsets[index - 1],
        tie_epsilon,
    })
}
