//! Subcommand dispatch. Every command renders a [`Tsv`] document.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fockforge_core::conditioning::{
    catalysis_closed_form, extract_conditional_operator, success_probability, verify_proposition,
    AncillaSpec, DetectionSpec, Proposition,
};
use fockforge_core::float::{polar, ComplexExt, Float};
use fockforge_core::fock::PureState;
use fockforge_core::gates::{self, CphaseVariant, CzComponent, GateRecipe, GateReport, PauliAxis};
use fockforge_core::interferometer::{
    random_unitary, BeamSplitterParams, Element, NetworkDescription,
};
use fockforge_core::linalg::{CMatrix, C64};
use fockforge_core::lossy::{
    choose_t_for_sigma_z, noisy_sigma_z_experiment_with_t, sigma_z_closed_forms,
    sigma_z_transmission_exact,
};
use fockforge_core::optimizer::{optimize_gate, Objective};
use fockforge_core::permanent::{
    check_appendix_bounds, permanent_naive, permanent_ryser, NAIVE_MAX,
};
use fockforge_core::{rng, Error};

use crate::circuit::{
    parse_circuit, serialize_circuit, CircuitFile, Detection, InputSpec, ParseError,
};
use crate::sim::{self, Outcome};
use crate::tsv::{num, occupation, Tsv};

/// Environment variable capping the worker count; `0` or unset means auto.
pub const THREADS_ENV: &str = "FOCKFORGE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "fockforge",
    version,
    about = "Post-selected linear-optics gates on truncated Fock spaces"
)]
pub struct Cli {
    /// Photon cutoff of the working space.
    #[arg(long, global = true)]
    pub cutoff: Option<u32>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Threshold for pass/fail checks and for printing small entries.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Multistart budget of optimizing commands.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evolve the circuit input and print the post-detection state.
    Simulate { circuit: Option<PathBuf> },
    /// Conditional operator of a lossless circuit with Fock ancillas.
    Condition { circuit: Option<PathBuf> },
    /// Run a named gate recipe.
    Gate(GateArgs),
    /// Search a network for a diagonal single-mode target.
    Optimize(OptimizeArgs),
    /// Lossy sign-flip experiment on an absorbing slab.
    Loss(LossArgs),
    /// Closed-form checks of the conditioning and permanent layers.
    Verify(VerifyArgs),
    /// Permanent of a matrix read from a file or standard input.
    Perm(PermArgs),
    /// Print the circuit in canonical form.
    Fmt { circuit: Option<PathBuf> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GateName {
    Swap,
    Nss,
    Su3,
    Ralph,
    Cphase,
    CphaseVacuum,
    PauliX,
    PauliY,
    Hadamard,
    HadamardVacuum,
    Cnot,
}

#[derive(Args, Debug)]
pub struct GateArgs {
    #[arg(long, value_enum)]
    pub name: GateName,
    /// Conditional phase of `cphase`.
    #[arg(long, default_value_t = PI, allow_negative_numbers = true)]
    pub phi: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi2: f64,
    /// Squeezing parameter of the Pauli recipes.
    #[arg(long, default_value_t = gates::PAULI_Q)]
    pub q: f64,
    /// Angle grid of the CNOT search.
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
    /// Print the recipe as a circuit file instead of a report.
    #[arg(long)]
    pub emit_circuit: bool,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Ancilla photons, one per auxiliary mode, e.g. `1,0`.
    #[arg(long)]
    pub ancilla: String,
    /// Detected photons, one per auxiliary mode.
    #[arg(long)]
    pub detect: String,
    /// Diagonal targets `RE[:IM]`, one per signal photon number.
    #[arg(long, conflicts_with = "phases", allow_hyphen_values = true)]
    pub targets: Option<String>,
    /// Diagonal targets as phases `e^{iφ}`.
    #[arg(long, allow_hyphen_values = true)]
    pub phases: Option<String>,
    /// Template size; defaults to one signal mode plus the auxiliaries.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Weight of the success-probability reward.
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
    #[arg(long)]
    pub emit_circuit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TransmissionChoice {
    /// `(√(3 − 2|A|²) − 1)/2`.
    Formula,
    /// Exact root of the sign-flip condition.
    Exact,
}

#[derive(Args, Debug)]
pub struct LossArgs {
    #[arg(long, default_value_t = 0.0)]
    pub absorption: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value = "0.7071067811865476", allow_hyphen_values = true)]
    pub c0: String,
    #[arg(long, default_value = "0.7071067811865476", allow_hyphen_values = true)]
    pub c1: String,
    #[arg(long, value_enum, default_value_t = TransmissionChoice::Formula)]
    pub transmission: TransmissionChoice,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Proposition 1, 2 or 3.
    #[arg(long)]
    pub prop: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub aux: usize,
    /// Permanent inequalities over random unitaries.
    #[arg(long)]
    pub appendix: bool,
    /// Single beam-splitter catalysis operator against its closed form.
    #[arg(long)]
    pub catalysis: bool,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct PermArgs {
    /// Whitespace-separated rows of `RE` or `RE:IM` entries.
    pub matrix: Option<PathBuf>,
    /// Use a seeded Haar unitary of this size instead.
    #[arg(long)]
    pub random: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(ParseError),
    Core(Error),
    Io(io::Error),
    /// A verification finished but missed its tolerance.
    Check(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn is_infeasible(e: &Error) -> bool {
    match e {
        Error::Infeasible { .. } => true,
        Error::Stage { source, .. } => is_infeasible(source),
        _ => false,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => EXIT_PARSE,
            CliError::Core(e) if is_infeasible(e) => EXIT_INFEASIBLE,
            CliError::Core(_) | CliError::Io(_) | CliError::Check(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Parse(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "numeric error: {e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_PARSE
            } else {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                let _ = writeln!(
                    stderr,
                    "usage error: {THREADS_ENV}={v} is not a worker count"
                );
                return EXIT_PARSE;
            }
        },
        Err(_) => 0,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "io error: {e}");
            return EXIT_NUMERIC;
        }
    };
    let mut piped = Vec::new();
    if cli.reads_stdin() {
        if let Err(e) = stdin.read_to_end(&mut piped) {
            let _ = writeln!(stderr, "io error: {e}");
            return EXIT_NUMERIC;
        }
    }
    match pool.install(|| execute(&cli, &mut piped.as_slice())) {
        Ok(doc) => match stdout
            .write_all(doc.as_bytes())
            .and_then(|_| stdout.flush())
        {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "io error: {e}");
                EXIT_NUMERIC
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

impl Cli {
    /// Whether the command takes its document from standard input.
    pub fn reads_stdin(&self) -> bool {
        let piped = |p: &Option<PathBuf>| p.as_ref().map_or(true, |p| p.as_os_str() == "-");
        match &self.command {
            Command::Simulate { circuit }
            | Command::Condition { circuit }
            | Command::Fmt { circuit } => piped(circuit),
            Command::Perm(a) => a.random.is_none() && piped(&a.matrix),
            _ => false,
        }
    }
}

pub fn execute(cli: &Cli, stdin: &mut dyn Read) -> CliResult<String> {
    match &cli.command {
        Command::Simulate { circuit } => simulate(cli, &read_circuit(circuit.as_ref(), stdin)?),
        Command::Condition { circuit } => condition(cli, &read_circuit(circuit.as_ref(), stdin)?),
        Command::Gate(a) => gate(cli, a),
        Command::Optimize(a) => optimize(cli, a),
        Command::Loss(a) => loss(a),
        Command::Verify(a) => verify(cli, a),
        Command::Perm(a) => perm(cli, a, stdin),
        Command::Fmt { circuit } => Ok(serialize_circuit(&read_circuit(circuit.as_ref(), stdin)?)),
    }
}

fn read_text(path: Option<&PathBuf>, stdin: &mut dyn Read) -> CliResult<String> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p).map_err(CliError::Io),
        _ => {
            let mut s = String::new();
            stdin.read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn read_circuit(path: Option<&PathBuf>, stdin: &mut dyn Read) -> CliResult<CircuitFile> {
    Ok(parse_circuit(&read_text(path, stdin)?)?)
}

fn check_cutoff(cutoff: u32, photons: u32) -> CliResult<()> {
    if cutoff < photons {
        return Err(CliError::Usage(format!(
            "cutoff {cutoff} is below the {photons} declared input photons"
        )));
    }
    Ok(())
}

fn simulate(cli: &Cli, c: &CircuitFile) -> CliResult<String> {
    let cutoff = cli.cutoff.unwrap_or_else(|| sim::default_cutoff(c));
    check_cutoff(cutoff, c.fock_photons())?;
    let tol = cli.tolerance.unwrap_or(1e-12);
    let s = sim::simulate(c, cutoff)?;
    let mut t = Tsv::new();
    t.section("summary", &["quantity", "value"]);
    t.kv_text("cutoff", cutoff.to_string());
    t.kv_text(
        "remaining_modes",
        s.remaining
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    t.kv("input_truncation_loss", s.truncation_loss);
    t.kv("probability", s.probability);
    match &s.outcome {
        Outcome::Pure(psi) => {
            t.section("amplitudes", &["occupation", "re", "im", "probability"]);
            for (occ, a) in psi.basis().states().iter().zip(psi.amplitudes()) {
                if a.modulus() > tol {
                    t.row([occupation(occ), num(a.re), num(a.im), num(a.norm_sqr())]);
                }
            }
        }
        Outcome::Mixed(rho) => {
            t.section("density", &["row", "col", "re", "im"]);
            let states = rho.basis().states();
            for (i, si) in states.iter().enumerate() {
                for (j, sj) in states.iter().enumerate() {
                    let z = rho.matrix()[(i, j)];
                    if z.modulus() > tol {
                        t.complex_row(&[occupation(si), occupation(sj)], z);
                    }
                }
            }
        }
        Outcome::Empty => {}
    }
    Ok(t.into_string())
}

/// Signal modes, ancilla and detection of a lossless Fock-heralded circuit.
pub fn heralding_partition(c: &CircuitFile) -> CliResult<(Vec<usize>, AncillaSpec, DetectionSpec)> {
    let mut signal = Vec::new();
    let mut anc = Vec::new();
    let mut det = Vec::new();
    for m in 0..c.modes {
        match c.detection_on(m) {
            None => signal.push(m),
            Some(d) => {
                if d.efficiency() < 1.0 {
                    return Err(CliError::Usage(format!(
                        "detector on mode {m} is not ideal; use simulate"
                    )));
                }
                det.push(d.photons);
                anc.push(match c.input_on(m) {
                    None => 0,
                    Some(InputSpec::Fock { photons, .. }) => *photons,
                    Some(_) => {
                        return Err(CliError::Usage(format!(
                            "ancilla on mode {m} must be a Fock state"
                        )))
                    }
                });
            }
        }
    }
    if signal.is_empty() {
        return Err(CliError::Usage(
            "every mode is detected; nothing is left to condition".into(),
        ));
    }
    Ok((signal, AncillaSpec(anc), DetectionSpec(det)))
}

fn condition(cli: &Cli, c: &CircuitFile) -> CliResult<String> {
    let net = c.network().ok_or_else(|| {
        CliError::Usage("condition needs a lossless circuit; use simulate".into())
    })?;
    let (signal, anc, det) = heralding_partition(c)?;
    let mut reference = Vec::new();
    for &m in &signal {
        reference.push(match c.input_on(m) {
            None => 0,
            Some(InputSpec::Fock { photons, .. }) => *photons,
            Some(_) => {
                return Err(CliError::Usage(format!(
                    "reference input on mode {m} must be a Fock state"
                )))
            }
        });
    }
    let declared: u32 = reference.iter().sum();
    let cutoff = cli.cutoff.unwrap_or(declared.max(1));
    check_cutoff(cutoff, declared)?;
    let u = fockforge_core::interferometer::compose(&net)?;
    let y = extract_conditional_operator(&u, &signal, &anc, &det, cutoff)?;
    let psi = PureState::basis_state(y.operator.domain().clone(), &reference)?;
    let p = success_probability(&y, &psi)?;
    let m = y.matrix();
    let mean = Float::powi(m.frobenius(), 2) / m.cols().max(1) as f64;

    let mut t = Tsv::new();
    t.section("summary", &["quantity", "value"]);
    t.kv_text(
        "signal_modes",
        signal
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    t.kv_text("cutoff", cutoff.to_string());
    t.kv_text("reference_input", occupation(&reference));
    t.kv("success_probability", p);
    t.kv("mean_success_probability", mean);
    t.section("operator", &["out", "in", "re", "im"]);
    let (outs, ins) = (y.operator.codomain().states(), y.operator.domain().states());
    for (i, o) in outs.iter().enumerate() {
        for (j, n) in ins.iter().enumerate() {
            let z = m[(i, j)];
            if z.modulus() > cli.tolerance.unwrap_or(1e-14) {
                t.complex_row(&[occupation(o), occupation(n)], z);
            }
        }
    }
    Ok(t.into_string())
}

fn network_rows(t: &mut Tsv, net: &NetworkDescription) {
    t.section(
        "network",
        &["element", "mode_a", "mode_b", "theta", "phase_t", "phase_r"],
    );
    for e in net.elements() {
        match e {
            Element::BeamSplitter(b) => t.row([
                "bs".to_string(),
                b.mode_a.to_string(),
                b.mode_b.to_string(),
                num(b.theta),
                num(b.phase_t),
                num(b.phase_r),
            ]),
            Element::Phase(p) => t.row([
                "phase".to_string(),
                p.mode.to_string(),
                "-".into(),
                num(p.angle),
                "-".into(),
                "-".into(),
            ]),
        }
    }
}

fn matrix_rows(t: &mut Tsv, name: &str, m: &CMatrix) {
    t.section(name, &["row", "col", "re", "im"]);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            t.complex_row(&[i.to_string(), j.to_string()], m[(i, j)]);
        }
    }
}

/// Circuit file of a network fed with Fock ancillas on the auxiliary
/// modes and heralded on `detection`.
pub fn heralded_circuit(
    network: &NetworkDescription,
    signal: &[usize],
    ancilla: &AncillaSpec,
    detection: &DetectionSpec,
) -> CliResult<CircuitFile> {
    let mut c = CircuitFile::from_network(network);
    let aux: Vec<usize> = (0..network.modes())
        .filter(|m| !signal.contains(m))
        .collect();
    if aux.len() != ancilla.0.len() || aux.len() != detection.0.len() {
        return Err(CliError::Usage(
            "ancilla and detection do not cover the auxiliary modes".into(),
        ));
    }
    for (k, &m) in aux.iter().enumerate() {
        c.inputs.push(InputSpec::Fock {
            mode: m,
            photons: ancilla.0[k],
        });
        c.detections.push(Detection {
            mode: m,
            photons: detection.0[k],
            eta: None,
            vacuum: false,
        });
    }
    Ok(c)
}

fn recipe_circuit(recipe: &GateRecipe) -> CliResult<String> {
    if recipe.ancilla_state.is_some() {
        return Err(CliError::Usage(format!(
            "recipe '{}' uses an entangled ancilla and has no circuit form",
            recipe.name
        )));
    }
    let c = heralded_circuit(
        &recipe.network,
        &recipe.signal_modes,
        &recipe.ancilla,
        &recipe.detection,
    )?;
    Ok(serialize_circuit(&c))
}

fn gate_report(t: &mut Tsv, recipe: &GateRecipe, rep: &GateReport) {
    t.section("gate", &["quantity", "value"]);
    t.kv_text("name", &recipe.name);
    t.kv("residual", rep.residual);
    t.kv("success_probability", rep.success_probability);
    for (k, v) in &rep.extras {
        t.kv(k, *v);
    }
    t.section("stages", &["index", "stage"]);
    for (k, s) in recipe.stages.iter().enumerate() {
        t.row([k.to_string(), s.clone()]);
    }
    matrix_rows(t, "achieved", &rep.achieved);
    network_rows(t, &recipe.network);
}

fn gate(cli: &Cli, a: &GateArgs) -> CliResult<String> {
    let seed = cli.seed;
    let r = cli.restarts;
    let mut t = Tsv::new();
    let recipe = match a.name {
        GateName::Ralph => {
            let rep = gates::ralph_cz_check_with(seed, r.unwrap_or(gates::NSS_RESTARTS))?;
            t.section("ralph", &["quantity", "value"]);
            t.kv("root_0", rep.roots[0]);
            t.kv("root_1", rep.roots[1]);
            t.kv("forced_lambda11", rep.forced_lambda11);
            t.kv("optimized_lambda11_re", rep.optimized_lambda11.re);
            t.kv("optimized_lambda11_im", rep.optimized_lambda11.im);
            t.kv("max_probability", rep.max_probability);
            t.kv("constraint_residual_0", rep.constraint_residuals[0]);
            t.kv("constraint_residual_1", rep.constraint_residuals[1]);
            matrix_rows(&mut t, "unitary", rep.unitary.matrix());
            return Ok(t.into_string());
        }
        GateName::Cnot => {
            let rep = gates::cnot_obstruction_search(a.grid, r.unwrap_or(200), seed)?;
            t.section("cnot", &["quantity", "value"]);
            t.kv("bs_matrix_deviation", rep.bs_matrix_deviation);
            t.kv("cz_residual", rep.cz_residual);
            t.kv("cnot_residual", rep.cnot_residual);
            t.kv("best_phi", rep.best_phi);
            t.kv("best_phi_prime", rep.best_phi_prime);
            t.kv_text("grid_size", rep.grid_size.to_string());
            t.kv_text("restarts", rep.restarts.to_string());
            t.kv_text(
                "contradicts_obstruction",
                rep.contradicts_obstruction.to_string(),
            );
            return Ok(t.into_string());
        }
        GateName::Swap => gates::swap_gate()?,
        GateName::Nss => gates::nss_gate_klm_with(seed, r.unwrap_or(gates::NSS_RESTARTS))?,
        GateName::Su3 => {
            gates::su3_phase_gate_with(a.phi1, a.phi2, seed, r.unwrap_or(gates::SU3_RESTARTS))?
        }
        GateName::Cphase => gates::cphase_gate_with(
            a.phi,
            CphaseVariant::FourPhoton,
            seed,
            r.unwrap_or(gates::CPHASE_RESTARTS),
        )?,
        GateName::CphaseVacuum => gates::cphase_gate_with(
            a.phi,
            CphaseVariant::VacuumDetector,
            seed,
            r.unwrap_or(gates::CPHASE_RESTARTS),
        )?,
        GateName::PauliX => {
            gates::pauli_xy_gate_with(PauliAxis::X, a.q, seed, r.unwrap_or(gates::PAULI_RESTARTS))?
        }
        GateName::PauliY => {
            gates::pauli_xy_gate_with(PauliAxis::Y, a.q, seed, r.unwrap_or(gates::PAULI_RESTARTS))?
        }
        GateName::Hadamard => gates::hadamard_gate_with(CzComponent::Ideal, seed)?,
        GateName::HadamardVacuum => gates::hadamard_gate_with(CzComponent::VacuumDetector, seed)?,
    };
    let (recipe, rep) = recipe;
    if a.emit_circuit {
        return recipe_circuit(&recipe);
    }
    gate_report(&mut t, &recipe, &rep);
    Ok(t.into_string())
}

fn parse_counts(s: &str, what: &str) -> CliResult<Vec<u32>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| CliError::Usage(format!("{what}: '{x}' is not a photon count")))
        })
        .collect()
}

/// `RE` or `RE:IM`.
pub fn parse_complex(s: &str) -> CliResult<C64> {
    let bad = || CliError::Usage(format!("'{s}' is not a complex number (RE or RE:IM)"));
    let (re, im) = s.split_once(':').unwrap_or((s, "0"));
    let re: f64 = re.trim().parse().map_err(|_| bad())?;
    let im: f64 = im.trim().parse().map_err(|_| bad())?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

fn optimize(cli: &Cli, a: &OptimizeArgs) -> CliResult<String> {
    let ancilla = parse_counts(&a.ancilla, "--ancilla")?;
    let detect = parse_counts(&a.detect, "--detect")?;
    if ancilla.len() != detect.len() {
        return Err(CliError::Usage(
            "--ancilla and --detect need the same length".into(),
        ));
    }
    let targets: Vec<C64> = match (&a.targets, &a.phases) {
        (Some(t), None) => t.split(',').map(parse_complex).collect::<CliResult<_>>()?,
        (None, Some(p)) => p
            .split(',')
            .map(|x| parse_complex(x).map(|z| polar(1.0, z.re)))
            .collect::<CliResult<_>>()?,
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --targets and --phases".into(),
            ))
        }
    };
    let mut objective = Objective::single_mode_diagonal(&ancilla, &detect, &targets);
    objective.probability_weight = a.weight;
    let modes = a.modes.unwrap_or(objective.modes());
    if modes != objective.modes() {
        return Err(CliError::Usage(format!(
            "template of {modes} modes does not match 1 signal and {} auxiliary modes",
            ancilla.len()
        )));
    }
    let best = optimize_gate(
        &objective,
        modes,
        cli.seed,
        cli.restarts.unwrap_or(gates::NSS_RESTARTS),
    )?;
    let net = best.params.to_network()?;
    if a.emit_circuit {
        let c = heralded_circuit(&net, &[0], &objective.ancilla, &objective.detection)?;
        return Ok(serialize_circuit(&c));
    }
    let mut t = Tsv::new();
    t.section("optimum", &["quantity", "value"]);
    t.kv("residual", best.residual);
    t.kv("success_probability", best.success_probability);
    t.kv("scale_re", best.scale.re);
    t.kv("scale_im", best.scale.im);
    t.kv_text("feasible", best.feasible().to_string());
    t.kv_text("restart", best.restart.to_string());
    t.kv_text("evaluations", best.evaluations.to_string());
    network_rows(&mut t, &net);
    Ok(t.into_string())
}

fn loss(a: &LossArgs) -> CliResult<String> {
    if !(0.0..1.0).contains(&a.absorption) {
        return Err(CliError::Usage(format!(
            "--absorption {} outside [0, 1)",
            a.absorption
        )));
    }
    if !(a.eta > 0.0 && a.eta <= 1.0) {
        return Err(CliError::Usage(format!("--eta {} outside (0, 1]", a.eta)));
    }
    let (c0, c1) = (parse_complex(&a.c0)?, parse_complex(&a.c1)?);
    let t_val = match a.transmission {
        TransmissionChoice::Formula => choose_t_for_sigma_z(a.absorption),
        TransmissionChoice::Exact => sigma_z_transmission_exact(a.absorption),
    };
    let rep = noisy_sigma_z_experiment_with_t(a.absorption, a.eta, c0, c1, t_val)?;
    let eta = a.eta;
    let c1sq = c1.norm_sqr();
    let coef = rep.coefficients();
    let closed = sigma_z_closed_forms(a.absorption);
    let formula = a.transmission == TransmissionChoice::Formula;

    let mut t = Tsv::new();
    t.section("slab", &["quantity", "value"]);
    t.kv("absorption", a.absorption);
    t.kv("eta", eta);
    t.kv("transmission", rep.transmission);
    t.kv("reflection_re", rep.reflection.re);
    t.kv("reflection_im", rep.reflection.im);
    t.kv("success_probability", rep.success_probability);
    t.kv("sigma_z_defect", rep.sigma_z_defect);
    t.kv("sigma_z_deviation", rep.sigma_z_deviation(c0, c1));
    t.kv("decomposition_defect", rep.decomposition_defect);
    t.kv("trace", rep.density.trace());

    // `eta_scaled` carries one factor of η; `weight` is the full prefactor
    // of each term in the density matrix.
    t.section(
        "coefficients",
        &["term", "coefficient", "closed_form", "eta_scaled", "weight"],
    );
    let closed_cell = |v: f64| if formula { num(v) } else { "-".into() };
    t.row([
        "wanted".to_string(),
        num(coef[0]),
        closed_cell(closed[0] / 2.0),
        num(eta * coef[0]),
        num(eta * coef[0]),
    ]);
    t.row([
        "detector".to_string(),
        num(coef[1]),
        closed_cell(closed[1]),
        num(eta * coef[1]),
        num(eta * (1.0 - eta) * c1sq * coef[1]),
    ]);
    t.row([
        "absorption".to_string(),
        num(coef[2]),
        closed_cell(closed[2]),
        num(eta * coef[2]),
        num(eta * c1sq * coef[2]),
    ]);
    t.section("density", &["row", "col", "re", "im"]);
    let states = rep.density.basis().states();
    for (i, si) in states.iter().enumerate() {
        for (j, sj) in states.iter().enumerate() {
            t.complex_row(
                &[occupation(si), occupation(sj)],
                rep.density.matrix()[(i, j)],
            );
        }
    }
    Ok(t.into_string())
}

/// Largest relative gap between the extracted single-splitter operator
/// and its closed form, for `n ≤ cutoff`.
pub fn catalysis_deviation(seed: u64, cutoff: u32) -> CliResult<(BeamSplitterParams, f64)> {
    let mut r = rng::stream_rng(seed, 0);
    let theta = rng::uniform_range(&mut r, 0.05, PI / 2.0 - 0.05);
    let pt = rng::uniform_range(&mut r, 0.0, 2.0 * PI);
    let pr = rng::uniform_range(&mut r, 0.0, 2.0 * PI);
    let bs = BeamSplitterParams::new(0, 1, theta, pt, pr)?;
    let u = fockforge_core::interferometer::bs_matrix(&bs, 2)?;
    let y = extract_conditional_operator(
        &u,
        &[0],
        &AncillaSpec(vec![1]),
        &DetectionSpec(vec![1]),
        cutoff,
    )?;
    let mut dev: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for n in 0..=cutoff {
        let want = catalysis_closed_form(bs.transmission(), bs.reflection(), n);
        dev = dev.max((y.diagonal(n) - want).modulus());
        scale = scale.max(want.modulus());
    }
    Ok((bs, dev / scale.max(f64::MIN_POSITIVE)))
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn verify(cli: &Cli, a: &VerifyArgs) -> CliResult<String> {
    let tol = cli.tolerance.unwrap_or(1e-9);
    let mut t = Tsv::new();
    let picked = usize::from(a.prop.is_some()) + usize::from(a.appendix) + usize::from(a.catalysis);
    if picked != 1 {
        return Err(CliError::Usage(
            "choose exactly one of --prop, --appendix and --catalysis".into(),
        ));
    }
    let ok;
    if let Some(k) = a.prop {
        let which = Proposition::from_index(k)
            .map_err(|_| CliError::Usage(format!("no proposition {k}")))?;
        let cutoff = cli.cutoff.unwrap_or(a.aux as u32 + 3);
        let rep = verify_proposition(which, a.aux, cli.seed, cutoff)?;
        ok = rep.max_deviation < tol;
        t.section(
            "proposition",
            &[
                "proposition",
                "aux",
                "seed",
                "cutoff",
                "reseeds",
                "max_deviation",
                "status",
            ],
        );
        t.row([
            k.to_string(),
            rep.n_aux.to_string(),
            rep.seed.to_string(),
            rep.cutoff.to_string(),
            rep.reseeds.to_string(),
            num(rep.max_deviation),
            status(ok).into(),
        ]);
    } else if a.appendix {
        let rep = check_appendix_bounds(a.dim, a.samples, cli.seed)?;
        ok = rep.holds();
        t.section("appendix", &["quantity", "value"]);
        t.kv_text("dimension", rep.dimension.to_string());
        t.kv_text("samples", rep.samples.to_string());
        t.kv("max_permanent", rep.max_permanent);
        t.kv("max_principal_subpermanent", rep.max_principal_subpermanent);
        t.kv("max_minor_subpermanent", rep.max_minor_subpermanent);
        t.kv_text(
            "marcus_newman_violations",
            rep.marcus_newman_violations.to_string(),
        );
        t.kv("marcus_newman_max_ratio", rep.marcus_newman_max_ratio);
        t.kv("minor_coverage_min", rep.minor_coverage.0);
        t.kv("minor_coverage_max", rep.minor_coverage.1);
        t.kv_text(
            "cross_term_violations",
            rep.cross_term_violations.to_string(),
        );
        t.kv_text("status", status(ok));
    } else {
        let cutoff = cli.cutoff.unwrap_or(6);
        t.section(
            "catalysis",
            &[
                "seed",
                "theta",
                "phase_t",
                "phase_r",
                "relative_deviation",
                "status",
            ],
        );
        let mut all = true;
        for k in 0..a.samples as u64 {
            let seed = cli.seed.wrapping_add(k);
            let (bs, dev) = catalysis_deviation(seed, cutoff)?;
            let pass = dev < tol;
            all &= pass;
            t.row([
                seed.to_string(),
                num(bs.theta),
                num(bs.phase_t),
                num(bs.phase_r),
                num(dev),
                status(pass).into(),
            ]);
        }
        ok = all;
    }
    if ok {
        Ok(t.into_string())
    } else {
        Err(CliError::Check(format!(
            "tolerance {tol:e} missed:\n{}",
            t.into_string()
        )))
    }
}

/// Matrix text: one row per line, entries `RE` or `RE:IM`.
pub fn parse_matrix(text: &str) -> CliResult<CMatrix> {
    let rows: Vec<Vec<C64>> = text
        .lines()
        .map(|l| l.split_once('#').map_or(l, |(a, _)| a))
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(parse_complex)
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(
            "matrix must be square and non-empty".into(),
        ));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn perm(cli: &Cli, a: &PermArgs, stdin: &mut dyn Read) -> CliResult<String> {
    let m = match a.random {
        Some(n) => random_unitary(n, cli.seed)?.matrix().clone(),
        None => parse_matrix(&read_text(a.matrix.as_ref(), stdin)?)?,
    };
    let ryser = permanent_ryser(&m)?;
    let mut t = Tsv::new();
    t.section("permanent", &["quantity", "value"]);
    t.kv_text("dimension", m.rows().to_string());
    t.kv("ryser_re", ryser.re);
    t.kv("ryser_im", ryser.im);
    t.kv("abs", ryser.modulus());
    if m.rows() <= NAIVE_MAX {
        let naive = permanent_naive(&m)?;
        t.kv("naive_re", naive.re);
        t.kv("naive_im", naive.im);
        t.kv("deviation", (naive - ryser).modulus());
    }
    Ok(t.into_string())
}
