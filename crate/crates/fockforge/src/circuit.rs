//! Line-oriented circuit files.
//!
//! ```text
//! modes 3
//! input fock 1 1
//! bs 0 1 0.3 0 0
//! phase 2 3.141592653589793
//! detect fock 1 1
//! detect vacuum 2
//! ```

use std::fmt;

use fockforge_core::interferometer::{Element, NetworkDescription};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    Semantic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ErrorKind,
    /// 1-based.
    pub line: usize,
    /// 1-based character column of the offending token.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Syntax => "syntax error",
            ErrorKind::Semantic => "semantic error",
        };
        write!(
            f,
            "{kind} at line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputSpec {
    Fock { mode: usize, photons: u32 },
    Coherent { mode: usize, re: f64, im: f64 },
    Tmsv { modes: (usize, usize), q: f64 },
}

impl InputSpec {
    pub fn modes(&self) -> Vec<usize> {
        match *self {
            InputSpec::Fock { mode, .. } | InputSpec::Coherent { mode, .. } => vec![mode],
            InputSpec::Tmsv { modes, .. } => vec![modes.0, modes.1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CircuitElement {
    Bs {
        a: usize,
        b: usize,
        theta: f64,
        phase_t: f64,
        phase_r: f64,
    },
    Phase {
        mode: usize,
        angle: f64,
    },
    LossyBs {
        a: usize,
        b: usize,
        theta: f64,
        phase_t: f64,
        phase_r: f64,
        abs: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub mode: usize,
    pub photons: u32,
    /// `None` for an ideal counter.
    pub eta: Option<f64>,
    /// Written as `detect vacuum`.
    pub vacuum: bool,
}

impl Detection {
    pub fn efficiency(&self) -> f64 {
        self.eta.unwrap_or(1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CircuitFile {
    pub modes: usize,
    pub inputs: Vec<InputSpec>,
    pub elements: Vec<CircuitElement>,
    pub detections: Vec<Detection>,
}

impl CircuitFile {
    pub fn input_on(&self, mode: usize) -> Option<&InputSpec> {
        self.inputs.iter().find(|i| i.modes().contains(&mode))
    }

    pub fn detection_on(&self, mode: usize) -> Option<&Detection> {
        self.detections.iter().find(|d| d.mode == mode)
    }

    pub fn fock_photons(&self) -> u32 {
        self.inputs
            .iter()
            .map(|i| match i {
                InputSpec::Fock { photons, .. } => *photons,
                _ => 0,
            })
            .sum()
    }

    pub fn is_lossy(&self) -> bool {
        self.elements
            .iter()
            .any(|e| matches!(e, CircuitElement::LossyBs { .. }))
            || self.detections.iter().any(|d| d.efficiency() < 1.0)
    }

    /// Lossless part of the circuit; fails on a `lossybs`.
    pub fn network(&self) -> Option<NetworkDescription> {
        let mut net = NetworkDescription::new(self.modes);
        for e in &self.elements {
            match *e {
                CircuitElement::Bs {
                    a,
                    b,
                    theta,
                    phase_t,
                    phase_r,
                } => net.push_bs(a, b, theta, phase_t, phase_r).ok()?,
                CircuitElement::Phase { mode, angle } => net.push_phase(mode, angle).ok()?,
                CircuitElement::LossyBs { .. } => return None,
            }
        }
        Some(net)
    }

    /// Circuit holding the elements of `network` and nothing else.
    pub fn from_network(network: &NetworkDescription) -> Self {
        let elements = network
            .elements()
            .iter()
            .map(|e| match *e {
                Element::BeamSplitter(b) => CircuitElement::Bs {
                    a: b.mode_a,
                    b: b.mode_b,
                    theta: b.theta,
                    phase_t: b.phase_t,
                    phase_r: b.phase_r,
                },
                Element::Phase(p) => CircuitElement::Phase {
                    mode: p.mode,
                    angle: p.angle,
                },
            })
            .collect();
        CircuitFile {
            modes: network.modes(),
            elements,
            ..Default::default()
        }
    }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, ch)) in line.char_indices().enumerate() {
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push(Token {
                    text: &line[b..byte],
                    column: c + 1,
                });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        out.push(Token {
            text: &line[b..],
            column: c + 1,
        });
    }
    out
}

struct LineParser<'a> {
    line: usize,
    end_column: usize,
    tokens: Vec<Token<'a>>,
    pos: usize,
}

impl<'a> LineParser<'a> {
    fn syntax(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            kind: ErrorKind::Syntax,
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn semantic(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            kind: ErrorKind::Semantic,
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&Token<'a>, ParseError> {
        if self.pos >= self.tokens.len() {
            return Err(self.syntax(self.end_column, format!("expected {what}")));
        }
        self.pos += 1;
        Ok(&self.tokens[self.pos - 1])
    }

    fn has_more(&self) -> bool {
        self.pos < self.tokens.len()
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.tokens.get(self.pos) {
            Some(t) => Err(self.syntax(t.column, format!("unexpected token '{}'", t.text))),
            None => Ok(()),
        }
    }

    fn uint(&mut self, what: &str) -> Result<(u64, usize), ParseError> {
        let t = self.next(what)?;
        let (text, column) = (t.text, t.column);
        if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.syntax(column, format!("expected {what}, found '{text}'")));
        }
        text.parse::<u64>()
            .map(|v| (v, column))
            .map_err(|_| self.syntax(column, format!("{what} '{text}' is too large")))
    }

    fn count(&mut self, what: &str) -> Result<(u32, usize), ParseError> {
        let (v, col) = self.uint(what)?;
        u32::try_from(v)
            .map(|v| (v, col))
            .map_err(|_| self.syntax(col, format!("{what} {v} is too large")))
    }

    fn real(&mut self, what: &str) -> Result<(f64, usize), ParseError> {
        let t = self.next(what)?;
        let (text, column) = (t.text, t.column);
        match parse_decimal(text) {
            Some(v) => Ok((v, column)),
            None => Err(self.syntax(column, format!("expected decimal {what}, found '{text}'"))),
        }
    }
}

/// `[+-]digits[.digits]` or `[+-].digits`; no exponent, no inf/nan.
fn parse_decimal(text: &str) -> Option<f64> {
    let body = text.strip_prefix(['+', '-']).unwrap_or(text);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || !frac.map_or(true, digits) || int.len() + frac.map_or(0, str::len) == 0 {
        return None;
    }
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

struct Builder {
    modes: Option<usize>,
    circuit: CircuitFile,
}

impl Builder {
    fn mode(&self, p: &LineParser<'_>, (m, col): (u64, usize)) -> Result<usize, ParseError> {
        let Some(n) = self.modes else {
            return Err(p.semantic(col, "mode referenced before the 'modes' directive"));
        };
        if m >= n as u64 {
            return Err(p.semantic(col, format!("mode {m} undeclared (circuit has {n} modes)")));
        }
        Ok(m as usize)
    }

    fn claim_input(&self, p: &LineParser<'_>, mode: usize, col: usize) -> Result<(), ParseError> {
        if self.circuit.input_on(mode).is_some() {
            return Err(p.semantic(col, format!("mode {mode} already has an input")));
        }
        Ok(())
    }

    fn directive(&mut self, p: &mut LineParser<'_>) -> Result<(), ParseError> {
        let head = p.next("directive")?;
        let (word, col) = (head.text, head.column);
        match word {
            "modes" => {
                if self.modes.is_some() {
                    return Err(p.semantic(col, "'modes' declared twice"));
                }
                let (n, ncol) = p.uint("mode count")?;
                if n == 0 || n > 64 {
                    return Err(p.semantic(ncol, format!("mode count {n} outside 1..=64")));
                }
                self.modes = Some(n as usize);
                self.circuit.modes = n as usize;
            }
            "input" => {
                let kind = p.next("input kind")?;
                let (kind, kcol) = (kind.text, kind.column);
                let spec = match kind {
                    "fock" => {
                        let m = p.uint("mode")?;
                        let mode = self.mode(p, m)?;
                        self.claim_input(p, mode, m.1)?;
                        let (photons, _) = p.count("photon number")?;
                        InputSpec::Fock { mode, photons }
                    }
                    "coherent" => {
                        let m = p.uint("mode")?;
                        let mode = self.mode(p, m)?;
                        self.claim_input(p, mode, m.1)?;
                        let (re, _) = p.real("real part")?;
                        let (im, _) = p.real("imaginary part")?;
                        InputSpec::Coherent { mode, re, im }
                    }
                    "tmsv" => {
                        let m1 = p.uint("mode")?;
                        let a = self.mode(p, m1)?;
                        self.claim_input(p, a, m1.1)?;
                        let m2 = p.uint("mode")?;
                        let b = self.mode(p, m2)?;
                        self.claim_input(p, b, m2.1)?;
                        if a == b {
                            return Err(p.semantic(m2.1, "tmsv needs two distinct modes"));
                        }
                        let (q, qcol) = p.real("squeezing q")?;
                        if !(0.0..1.0).contains(&q) {
                            return Err(p.semantic(qcol, format!("q = {q} outside [0, 1)")));
                        }
                        InputSpec::Tmsv { modes: (a, b), q }
                    }
                    other => return Err(p.syntax(kcol, format!("unknown input kind '{other}'"))),
                };
                self.circuit.inputs.push(spec);
            }
            "bs" | "lossybs" => {
                let m1 = p.uint("mode")?;
                let a = self.mode(p, m1)?;
                let m2 = p.uint("mode")?;
                let b = self.mode(p, m2)?;
                if a == b {
                    return Err(p.semantic(m2.1, "beam splitter needs two distinct modes"));
                }
                let (theta, _) = p.real("angle")?;
                let (phase_t, _) = p.real("transmission phase")?;
                let (phase_r, _) = p.real("reflection phase")?;
                let e = if word == "bs" {
                    CircuitElement::Bs {
                        a,
                        b,
                        theta,
                        phase_t,
                        phase_r,
                    }
                } else {
                    let (abs, acol) = p.real("absorption")?;
                    if !(0.0..1.0).contains(&abs) {
                        return Err(p.semantic(acol, format!("absorption {abs} outside [0, 1)")));
                    }
                    CircuitElement::LossyBs {
                        a,
                        b,
                        theta,
                        phase_t,
                        phase_r,
                        abs,
                    }
                };
                self.circuit.elements.push(e);
            }
            "phase" => {
                let m = p.uint("mode")?;
                let mode = self.mode(p, m)?;
                let (angle, _) = p.real("angle")?;
                self.circuit
                    .elements
                    .push(CircuitElement::Phase { mode, angle });
            }
            "detect" => {
                let kind = p.next("detector kind")?;
                let (kind, kcol) = (kind.text, kind.column);
                let vacuum = match kind {
                    "fock" => false,
                    "vacuum" => true,
                    other => return Err(p.syntax(kcol, format!("unknown detector kind '{other}'"))),
                };
                let m = p.uint("mode")?;
                let mode = self.mode(p, m)?;
                if self.circuit.detection_on(mode).is_some() {
                    return Err(p.semantic(m.1, format!("mode {mode} already has a detector")));
                }
                let photons = if vacuum {
                    0
                } else {
                    p.count("photon count")?.0
                };
                let eta = if p.has_more() {
                    let (eta, ecol) = p.real("efficiency")?;
                    if !(eta > 0.0 && eta <= 1.0) {
                        return Err(p.semantic(ecol, format!("efficiency {eta} outside (0, 1]")));
                    }
                    Some(eta)
                } else {
                    None
                };
                self.circuit.detections.push(Detection {
                    mode,
                    photons,
                    eta,
                    vacuum,
                });
            }
            other => return Err(p.syntax(col, format!("unknown directive '{other}'"))),
        }
        p.finish()
    }
}

pub fn parse_circuit(text: &str) -> Result<CircuitFile, ParseError> {
    let mut b = Builder {
        modes: None,
        circuit: CircuitFile::default(),
    };
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(code, _)| code);
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let mut p = LineParser {
            line: k + 1,
            end_column: line.trim_end().chars().count() + 1,
            tokens,
            pos: 0,
        };
        b.directive(&mut p)?;
    }
    if b.modes.is_none() {
        return Err(ParseError {
            kind: ErrorKind::Semantic,
            line: 1,
            column: 1,
            message: "missing 'modes' directive".into(),
        });
    }
    Ok(b.circuit)
}

/// Canonical text: `modes`, inputs, elements, detections, one per line.
pub fn serialize_circuit(c: &CircuitFile) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "modes {}", c.modes);
    for i in &c.inputs {
        let _ = match *i {
            InputSpec::Fock { mode, photons } => writeln!(s, "input fock {mode} {photons}"),
            InputSpec::Coherent { mode, re, im } => writeln!(s, "input coherent {mode} {re} {im}"),
            InputSpec::Tmsv { modes, q } => writeln!(s, "input tmsv {} {} {q}", modes.0, modes.1),
        };
    }
    for e in &c.elements {
        let _ = match *e {
            CircuitElement::Bs {
                a,
                b,
                theta,
                phase_t,
                phase_r,
            } => writeln!(s, "bs {a} {b} {theta} {phase_t} {phase_r}"),
            CircuitElement::Phase { mode, angle } => writeln!(s, "phase {mode} {angle}"),
            CircuitElement::LossyBs {
                a,
                b,
                theta,
                phase_t,
                phase_r,
                abs,
            } => writeln!(s, "lossybs {a} {b} {theta} {phase_t} {phase_r} {abs}"),
        };
    }
    for d in &c.detections {
        if d.vacuum {
            let _ = write!(s, "detect vacuum {}", d.mode);
        } else {
            let _ = write!(s, "detect fock {} {}", d.mode, d.photons);
        }
        if let Some(eta) = d.eta {
            let _ = write!(s, " {eta}");
        }
        s.push('\n');
    }
    s
}
