//! Named scenarios, looked up by subcommand.

use cvphase::conditional::{
    certify_scan, certify_unphysical, conditional_wigner, default_alice_grid, negativity_summary,
    remote_conditioned_state, JointState, JointWigner, ScanOutcome, WitnessOperator,
};
use cvphase::gaussian::{
    gaussian_steerable, make_tmsv, optimal_number_witness, schur_complement, GaussianState,
};
use cvphase::phase_space::{axis_labels, joint_axis_labels, Party, PhaseGrid, WignerField};
use cvphase::steering::{reid_product, verify_variance_chain, ChainReport, QuadratureAxis, ReidResult, SteeringGrid};
use cvphase::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{config_error, DumpTarget, Loaded, StateSpec, SweepParameter};
use crate::error::CliError;
use crate::output::OutputDir;

/// What a scenario hands back for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Failed assertions; any entry makes the run exit with code 2.
    pub failures: Vec<String>,
    /// Grids actually used, echoed into the manifest.
    pub grids: Value,
}

pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, cfg: &Loaded, out: &mut OutputDir) -> Result<Outcome, CliError>;
}

pub fn registry() -> Vec<Box<dyn Scenario>> {
    vec![
        Box::new(SteerSweep),
        Box::new(Counterexample),
        Box::new(RemoteNegativity),
        Box::new(ChainAudit),
        Box::new(FieldDump),
    ]
}

pub fn lookup(name: &str) -> Option<Box<dyn Scenario>> {
    registry().into_iter().find(|s| s.name() == name)
}

const DEFAULT_FIELD_POINTS: usize = 128;
const DEFAULT_JOINT_POINTS: usize = 24;
const FIELD_SIGMAS: f64 = 6.0;

fn steering_grid(cfg: &Loaded) -> SteeringGrid {
    let grid = cfg.config.grid;
    let default = SteeringGrid::default();
    SteeringGrid {
        points: grid.points.unwrap_or(default.points),
        half_width: grid.half_width,
    }
}

fn homodyne_axes(cfg: &Loaded) -> Result<(QuadratureAxis, QuadratureAxis), CliError> {
    let axes = &cfg.config.axes;
    Ok((
        QuadratureAxis::new(Party::Alice, &axes.alice).map_err(config_error)?,
        QuadratureAxis::new(Party::Bob, &axes.bob).map_err(config_error)?,
    ))
}

fn single_modes(joint: &dyn JointWigner) -> bool {
    let l = joint.layout();
    l.alice_modes() == 1 && l.bob_modes() == 1
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Neighbouring sweep values between which `flags` changes.
fn flips(values: &[f64], flags: &[bool]) -> Vec<[f64; 2]> {
    (1..flags.len())
        .filter(|&i| flags[i] != flags[i - 1])
        .map(|i| [values[i - 1], values[i]])
        .collect()
}

fn thermal_default() -> StateSpec {
    StateSpec::FockMixture {
        weights: None,
        t: Some(1.0),
        cutoff: None,
    }
}

fn state_kind(state: &JointState) -> &'static str {
    match state {
        JointState::Gaussian(_) => "gaussian",
        JointState::FockMixture(_) => "fock-mixture",
        JointState::NumericGrid(_) => "field",
    }
}

// ---------------------------------------------------------------------------

struct SteerSweep;

#[derive(Serialize)]
struct SweepRow {
    parameter: f64,
    heisenberg_defect: f64,
    number_witness_value: f64,
    certified: bool,
    certificate_witness: Option<String>,
    certificate_value: Option<f64>,
    reid_product: Option<f64>,
    reid_flag: Option<bool>,
    gaussian_steerable: bool,
}

impl SteerSweep {
    fn states(&self, cfg: &Loaded) -> Result<(SweepParameter, Party, Vec<(f64, GaussianState)>), CliError> {
        let (parameter, values, party) = match &cfg.config.sweep {
            Some(s) => (s.parameter, s.resolve()?, s.party),
            None => (SweepParameter::R, vec![0.0, 0.25, 0.5, 1.0], Party::Alice),
        };
        let gaussian = |s: JointState| match s {
            JointState::Gaussian(g) => Ok(g),
            _ => Err(CliError::Config("steer-sweep needs a Gaussian state".into())),
        };
        let mut states = Vec::with_capacity(values.len());
        match parameter {
            SweepParameter::R => {
                if !matches!(cfg.config.state, None | Some(StateSpec::Tmsv { .. })) {
                    return Err(CliError::Config("an r sweep runs over TMSV states".into()));
                }
                for r in values {
                    let s = JointState::Gaussian(make_tmsv(r).map_err(config_error)?);
                    states.push((r, gaussian(cfg.attenuated(s)?)?));
                }
            }
            SweepParameter::Eta => {
                let base = gaussian(cfg.state_or(StateSpec::Tmsv { r: 0.7 })?)?;
                for eta in values {
                    let s = cvphase::gaussian::attenuate(&base, party, eta).map_err(config_error)?;
                    states.push((eta, s));
                }
            }
        }
        Ok((parameter, party, states))
    }
}

impl Scenario for SteerSweep {
    fn name(&self) -> &'static str {
        "steer-sweep"
    }

    fn run(&self, cfg: &Loaded, out: &mut OutputDir) -> Result<Outcome, CliError> {
        let (parameter, party, states) = self.states(cfg)?;
        let grid = steering_grid(cfg);
        let (g, f) = homodyne_axes(cfg)?;
        let mut rows = Vec::with_capacity(states.len());
        for (value, state) in &states {
            let verdict = gaussian_steerable(state)?;
            let witness = optimal_number_witness(&schur_complement(state)?)?;
            let x_a = state.alice_mean().as_slice().to_vec();
            let cert = certify_unphysical(state, &x_a, &cfg.config.witness)?;
            let reid = if single_modes(state) {
                Some(reid_product(state, &g, &f, &grid)?)
            } else {
                None
            };
            rows.push(SweepRow {
                parameter: *value,
                heisenberg_defect: verdict.defect,
                number_witness_value: witness.value,
                certified: cert.is_some(),
                certificate_witness: cert.as_ref().map(|c| c.witness.family().to_string()),
                certificate_value: cert.as_ref().map(|c| c.value),
                reid_product: reid.map(|r| r.product),
                reid_flag: reid.map(|r| r.steering),
                gaussian_steerable: verdict.steerable,
            });
        }

        let mut failures = Vec::new();
        for row in &rows {
            if row.certified != row.gaussian_steerable {
                failures.push(format!(
                    "parameter {}: certificate found = {} but Gaussian steerable = {}",
                    row.parameter, row.certified, row.gaussian_steerable
                ));
            }
            if row.reid_flag == Some(true) && !row.gaussian_steerable {
                failures.push(format!(
                    "parameter {}: Reid flags steering but the Heisenberg test does not",
                    row.parameter
                ));
            }
        }
        if parameter == SweepParameter::R && cfg.config.attenuation.is_none() {
            let mut by_r: Vec<(f64, f64)> =
                rows.iter().map(|r| (r.parameter.abs(), r.heisenberg_defect)).collect();
            by_r.sort_by(|a, b| a.0.total_cmp(&b.0));
            if by_r.windows(2).any(|w| w[1].1 > w[0].1 + 1e-12) {
                failures.push("Heisenberg defect is not monotone in |r|".into());
            }
        }

        let values: Vec<f64> = rows.iter().map(|r| r.parameter).collect();
        let flag = |k: fn(&SweepRow) -> bool| rows.iter().map(k).collect::<Vec<_>>();
        let report = json!({
            "parameter": parameter,
            "party": party,
            "rows": rows.len(),
            "flips": {
                "gaussian_steerable": flips(&values, &flag(|r| r.gaussian_steerable)),
                "certified": flips(&values, &flag(|r| r.certified)),
                "reid": flips(&values, &flag(|r| r.reid_flag.unwrap_or(false))),
            },
        });
        out.csv("sweep.csv", &rows)?;
        out.json("report.json", &report)?;
        Ok(Outcome {
            failures,
            grids: json!({ "homodyne": grid, "witness_quadrature_points": cfg.config.witness.quadrature_points }),
        })
    }
}

// ---------------------------------------------------------------------------

struct Counterexample;

/// Inclusive lattice over `center ± half_width` per coordinate, then the
/// seeded random points.
fn scan_points(cfg: &Loaded, center: &[f64]) -> Result<Vec<Vec<f64>>, CliError> {
    let scan = &cfg.config.scan;
    let center = scan.center.clone().unwrap_or_else(|| center.to_vec());
    let d = center.len();
    let n = scan.points_per_axis;
    let total = n
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 20)
        .ok_or_else(|| CliError::Config("scan lattice is too large".into()))?;
    let node = |axis: usize, i: usize| {
        center[axis] - scan.half_width + 2.0 * scan.half_width * i as f64 / (n - 1) as f64
    };
    let mut points: Vec<Vec<f64>> = (0..total)
        .map(|mut k| {
            let mut x = vec![0.0; d];
            for axis in (0..d).rev() {
                x[axis] = node(axis, k % n);
                k /= n;
            }
            x
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.config.seed);
    for _ in 0..scan.random_points {
        points.push(
            center
                .iter()
                .map(|c| c + rng.gen_range(-scan.half_width..=scan.half_width))
                .collect(),
        );
    }
    Ok(points)
}

impl Scenario for Counterexample {
    fn name(&self) -> &'static str {
        "counterexample"
    }

    fn run(&self, cfg: &Loaded, out: &mut OutputDir) -> Result<Outcome, CliError> {
        let state = cfg.state_or(thermal_default())?;
        let joint = state.as_joint();
        let layout = joint.layout();
        let mean = joint.mean();
        let points = scan_points(cfg, &mean[..layout.alice_dim()])?;
        let entries = certify_scan(joint, &points, &cfg.config.witness)?;

        let mut header = axis_labels(Party::Alice, layout.alice_modes());
        header.extend(["status", "witness", "level", "value", "error_bound"].map(String::from));
        let (mut certified, mut unsupported) = (0usize, 0usize);
        let rows: Vec<Vec<String>> = entries
            .iter()
            .map(|e| {
                let mut row: Vec<String> = e.x_a.iter().map(|v| v.to_string()).collect();
                match &e.outcome {
                    ScanOutcome::Certified { certificate: c } => {
                        certified += 1;
                        let level = match &c.witness {
                            WitnessOperator::FockProjector { level, .. } => Some(*level as f64),
                            _ => None,
                        };
                        row.extend([
                            "certified".into(),
                            c.witness.family().into(),
                            fmt_opt(level),
                            c.value.to_string(),
                            c.error_bound.to_string(),
                        ]);
                    }
                    ScanOutcome::NoViolationFound => {
                        row.extend(["no-violation-found".into(), String::new(), String::new(), String::new(), String::new()]);
                    }
                    ScanOutcome::Unsupported { alice_density, .. } => {
                        unsupported += 1;
                        row.extend(["unsupported".into(), String::new(), String::new(), alice_density.to_string(), String::new()]);
                    }
                }
                row
            })
            .collect();
        out.csv_records("certificates.csv", &header, &rows)?;

        let mut failures = Vec::new();
        let coverage = certified as f64 / entries.len() as f64;
        if certified != entries.len() {
            failures.push(format!(
                "{} of {} conditioning points lack a certificate",
                entries.len() - certified,
                entries.len()
            ));
        }
        let grid = steering_grid(cfg);
        let (reid, chain): (Option<ReidResult>, Option<Value>) = if single_modes(joint) {
            let (g, f) = homodyne_axes(cfg)?;
            let reid = reid_product(joint, &g, &f, &grid)?;
            if reid.steering {
                failures.push(format!("Reid's criterion flags steering (product {})", reid.product));
            }
            let chain = chain_json(verify_variance_chain(joint, &g, &f, &grid), &mut failures)?;
            (Some(reid), Some(chain))
        } else {
            (None, None)
        };
        let origin = entries
            .iter()
            .find(|e| e.x_a.iter().zip(&mean).all(|(a, b)| a == b));
        let report = json!({
            "state": state_kind(&state),
            "separable": matches!(state, JointState::FockMixture(_)),
            "points": entries.len(),
            "certified": certified,
            "unsupported": unsupported,
            "coverage": coverage,
            "at_mean": origin,
            "reid": reid,
            "chain": chain,
        });
        out.json("report.json", &report)?;
        Ok(Outcome {
            failures,
            grids: json!({
                "scan": cfg.config.scan,
                "homodyne": grid,
                "witness_quadrature_points": cfg.config.witness.quadrature_points,
            }),
        })
    }
}

fn chain_json(result: cvphase::Result<ChainReport>, failures: &mut Vec<String>) -> Result<Value, CliError> {
    match result {
        Ok(report) => {
            if report.flag && report.witness_point.is_none() {
                failures.push("Reid-positive state without a conditional-Wigner witness point".into());
            }
            Ok(serde_json::to_value(report)?)
        }
        Err(e @ Error::ChainViolation { .. }) => {
            failures.push(e.to_string());
            Ok(json!({ "violation": e.to_string() }))
        }
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------------

struct RemoteNegativity;

impl Scenario for RemoteNegativity {
    fn name(&self) -> &'static str {
        "remote-negativity"
    }

    fn run(&self, cfg: &Loaded, out: &mut OutputDir) -> Result<Outcome, CliError> {
        let state = cfg.state_or(thermal_default())?;
        let joint = state.as_joint();
        let herald = cfg.config.herald.clone().unwrap_or_else(|| WitnessOperator::fock(1));
        let spec = cfg.config.grid;
        let mut grid = default_alice_grid(joint, spec.points.unwrap_or(DEFAULT_FIELD_POINTS))?;
        if spec.points.is_some() || spec.half_width.is_some() {
            grid = PhaseGrid::new(
                grid.center().to_vec(),
                spec.half_width.unwrap_or(grid.half_width()),
                spec.points.unwrap_or(grid.points_per_axis()),
            )?;
        }
        let remote = remote_conditioned_state(joint, &herald, &grid, &cfg.config.witness)?;
        let summary = negativity_summary(&remote.alice);
        out.field("alice_field", &remote.alice, cfg.field_format())?;
        out.json(
            "report.json",
            &json!({
                "state": state_kind(&state),
                "herald": herald,
                "success_probability": remote.success_probability,
                "alice": summary,
            }),
        )?;
        Ok(Outcome {
            failures: Vec::new(),
            grids: json!({ "alice": grid_json(&grid) }),
        })
    }
}

fn grid_json(grid: &PhaseGrid) -> Value {
    json!({
        "center": grid.center(),
        "half_width": grid.half_width(),
        "points_per_axis": grid.points_per_axis(),
    })
}

// ---------------------------------------------------------------------------

struct ChainAudit;

impl Scenario for ChainAudit {
    fn name(&self) -> &'static str {
        "chain-audit"
    }

    fn run(&self, cfg: &Loaded, out: &mut OutputDir) -> Result<Outcome, CliError> {
        let state = cfg.state_or(StateSpec::Tmsv { r: 0.5 })?;
        let (g, f) = homodyne_axes(cfg)?;
        let grid = steering_grid(cfg);
        let mut failures = Vec::new();
        let chain = chain_json(verify_variance_chain(state.as_joint(), &g, &f, &grid), &mut failures)?;
        out.json("chain.json", &chain)?;
        Ok(Outcome {
            failures,
            grids: json!({ "homodyne": grid }),
        })
    }
}

// ---------------------------------------------------------------------------

struct FieldDump;

impl Scenario for FieldDump {
    fn name(&self) -> &'static str {
        "field-dump"
    }

    fn run(&self, cfg: &Loaded, out: &mut OutputDir) -> Result<Outcome, CliError> {
        let state = cfg.state_or(StateSpec::Tmsv { r: 0.5 })?;
        let joint = state.as_joint();
        let layout = joint.layout();
        let spec = cfg.config.grid;
        let points = spec.points.unwrap_or(match cfg.config.dump.target {
            DumpTarget::Joint => DEFAULT_JOINT_POINTS,
            _ => DEFAULT_FIELD_POINTS,
        });
        let resize = |grid: PhaseGrid| -> Result<PhaseGrid, CliError> {
            match spec.half_width {
                Some(l) => Ok(PhaseGrid::new(grid.center().to_vec(), l, points)?),
                None => Ok(grid),
            }
        };
        let mut x_a = None;
        let field: WignerField = match cfg.config.dump.target {
            DumpTarget::Joint => {
                let half_width = spec
                    .half_width
                    .unwrap_or(FIELD_SIGMAS * joint.max_std().max(1.0));
                let grid = PhaseGrid::new(joint.mean(), half_width, points)?;
                WignerField::from_fn(grid, joint_axis_labels(layout), |x| joint.joint(x))?
            }
            DumpTarget::Alice => {
                let reduced = joint.alice_reduced();
                reduced.to_field(&resize(reduced.default_grid(points)?)?, Party::Alice)?
            }
            DumpTarget::Bob => {
                let reduced = joint.bob_reduced();
                reduced.to_field(&resize(reduced.default_grid(points)?)?, Party::Bob)?
            }
            DumpTarget::Conditional => {
                let point = cfg
                    .config
                    .dump
                    .x_a
                    .clone()
                    .unwrap_or_else(|| joint.mean()[..layout.alice_dim()].to_vec());
                let cond = conditional_wigner(joint, &point)?;
                x_a = Some(point);
                cond.to_field(&resize(cond.default_grid(points)?)?, Party::Bob)?
            }
        };
        let stem = match cfg.config.dump.target {
            DumpTarget::Joint => "joint",
            DumpTarget::Alice => "alice",
            DumpTarget::Bob => "bob",
            DumpTarget::Conditional => "conditional",
        };
        out.field(stem, &field, cfg.field_format())?;
        out.json(
            "report.json",
            &json!({
                "state": state_kind(&state),
                "target": cfg.config.dump.target,
                "x_a": x_a,
                "integral": field.integrate(),
                "min": field.min_value().0,
                "max": field.max_value(),
            }),
        )?;
        Ok(Outcome {
            failures: Vec::new(),
            grids: json!({ "field": grid_json(field.grid()) }),
        })
    }
}
