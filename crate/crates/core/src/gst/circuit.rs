//! Gate labels, GST circuits and their text grammar.
//!
//! Grammar: `prep;germ^power;meas`, each part a `-`-separated label list or
//! `e` for empty. The bare-fiducial block serializes as `prep;e;meas`, and a
//! germ without `^` has power 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateLabel {
    I,
    X1,
    Y1,
    X2,
    Y2,
    CZ,
    /// Zero-duration no-op; never serialized.
    Null,
}

impl GateLabel {
    /// The six physical gates, in gate-set order.
    pub const GATES: [GateLabel; 6] = [GateLabel::I, GateLabel::X1, GateLabel::Y1, GateLabel::X2, GateLabel::Y2, GateLabel::CZ];

    /// Index into [`GateLabel::GATES`]; `None` for the null gate.
    pub fn index(self) -> Option<usize> {
        match self {
            GateLabel::I => Some(0),
            GateLabel::X1 => Some(1),
            GateLabel::Y1 => Some(2),
            GateLabel::X2 => Some(3),
            GateLabel::Y2 => Some(4),
            GateLabel::CZ => Some(5),
            GateLabel::Null => None,
        }
    }

    /// Nominal duration in seconds (`I` and `CZ` are 100 ns; single-qubit
    /// bursts depend on calibration and are reported as `None`).
    pub fn nominal_duration(self) -> Option<f64> {
        match self {
            GateLabel::I | GateLabel::CZ => Some(100e-9),
            GateLabel::Null => Some(0.0),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateLabel::I => "I",
            GateLabel::X1 => "X1",
            GateLabel::Y1 => "Y1",
            GateLabel::X2 => "X2",
            GateLabel::Y2 => "Y2",
            GateLabel::CZ => "CZ",
            GateLabel::Null => "NULL",
        }
    }
}

impl fmt::Display for GateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "I" => GateLabel::I,
            "X1" => GateLabel::X1,
            "Y1" => GateLabel::Y1,
            "X2" => GateLabel::X2,
            "Y2" => GateLabel::Y2,
            "CZ" => GateLabel::CZ,
            _ => return Err(Error::Parse(format!("unknown gate label {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Circuit {
    pub prep: Vec<GateLabel>,
    pub germ: Vec<GateLabel>,
    pub power: usize,
    pub meas: Vec<GateLabel>,
}

impl Circuit {
    pub fn new(prep: Vec<GateLabel>, germ: Vec<GateLabel>, power: usize, meas: Vec<GateLabel>) -> Self {
        // empty germs and zero powers are the same bare-fiducial circuit
        let (germ, power) = if germ.is_empty() || power == 0 { (Vec::new(), 0) } else { (germ, power) };
        Self { prep, germ, power, meas }
    }

    /// Germ-part length `len(germ) × power`.
    pub fn germ_length(&self) -> usize {
        self.germ.len() * self.power
    }

    /// Time-ordered gate sequence.
    pub fn gates(&self) -> Vec<GateLabel> {
        let mut out = self.prep.clone();
        for _ in 0..self.power {
            out.extend_from_slice(&self.germ);
        }
        out.extend_from_slice(&self.meas);
        out
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, labels: &[GateLabel]) -> fmt::Result {
    if labels.is_empty() {
        return f.write_str("e");
    }
    for (k, l) in labels.iter().enumerate() {
        if k > 0 {
            f.write_str("-")?;
        }
        f.write_str(l.name())?;
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<GateLabel>> {
    if s == "e" {
        return Ok(Vec::new());
    }
    s.split('-').map(str::parse).collect()
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_list(f, &self.prep)?;
        f.write_str(";")?;
        write_list(f, &self.germ)?;
        if self.power > 1 {
            write!(f, "^{}", self.power)?;
        }
        f.write_str(";")?;
        write_list(f, &self.meas)
    }
}

impl FromStr for Circuit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("circuit {s:?} must have three ';'-separated parts")));
        }
        let (germ_text, power) = match parts[1].split_once('^') {
            Some((g, p)) => {
                let p: usize = p.parse().map_err(|_| Error::Parse(format!("bad power in {s:?}")))?;
                if p == 0 {
                    return Err(Error::Parse(format!("zero power in {s:?}; write the germ as 'e'")));
                }
                (g, p)
            }
            None => (parts[1], 1),
        };
        let germ = parse_list(germ_text)?;
        if germ.is_empty() && parts[1].contains('^') {
            return Err(Error::Parse(format!("empty germ cannot carry a power in {s:?}")));
        }
        Ok(Circuit::new(parse_list(parts[0])?, germ, power, parse_list(parts[2])?))
    }
}

/// The six per-qubit fiducials `{null, X, XX, XXX, Y, YYY}`.
fn single_qubit_fiducials(x: GateLabel, y: GateLabel) -> Vec<Vec<GateLabel>> {
    vec![vec![], vec![x], vec![x, x], vec![x, x, x], vec![y], vec![y, y, y]]
}

/// 36 two-qubit fiducials: every Q1 fiducial followed by every Q2 fiducial.
pub fn build_fiducials() -> Vec<Vec<GateLabel>> {
    let q1 = single_qubit_fiducials(GateLabel::X1, GateLabel::Y1);
    let q2 = single_qubit_fiducials(GateLabel::X2, GateLabel::Y2);
    let mut out = Vec::with_capacity(36);
    for a in &q1 {
        for b in &q2 {
            let mut f = a.clone();
            f.extend_from_slice(b);
            out.push(f);
        }
    }
    out
}

pub fn build_germs() -> Vec<Vec<GateLabel>> {
    use GateLabel::*;
    let mut germs: Vec<Vec<GateLabel>> = GateLabel::GATES.iter().map(|g| vec![*g]).collect();
    germs.extend([
        vec![X1, Y1],
        vec![X2, Y2],
        vec![X1, X2],
        vec![Y1, Y2],
        vec![CZ, X1],
        vec![CZ, X2],
        vec![CZ, Y1],
        vec![CZ, Y2],
        vec![CZ, X2, Y1, CZ, Y2, X1],
    ]);
    germs
}

/// One germ-power block of the design; `power == 0` is the bare block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub germ: Vec<GateLabel>,
    pub power: usize,
}

/// Fiducial × germ-power experiment layout.
#[derive(Debug, Clone)]
pub struct Design {
    pub fiducials: Vec<Vec<GateLabel>>,
    pub blocks: Vec<Block>,
}

impl Design {
    pub fn standard(max_l: usize) -> Result<Self> {
        Self::new(build_fiducials(), &build_germs(), max_l)
    }

    /// Blocks for `L ∈ {1, 2, 4, …, max_L}` with `power = ⌊L/len(g)⌋`,
    /// dropping `L < len(g)`, plus the `L = 0` block.
    pub fn new(fiducials: Vec<Vec<GateLabel>>, germs: &[Vec<GateLabel>], max_l: usize) -> Result<Self> {
        if max_l == 0 || !max_l.is_power_of_two() {
            return Err(Error::Domain(format!("max_L must be a power of two, got {max_l}")));
        }
        let mut blocks = vec![Block { germ: vec![], power: 0 }];
        for germ in germs {
            let mut l = 1;
            while l <= max_l {
                if l >= germ.len() {
                    let b = Block { germ: germ.clone(), power: l / germ.len() };
                    if !blocks.contains(&b) {
                        blocks.push(b);
                    }
                }
                l *= 2;
            }
        }
        Ok(Self { fiducials, blocks })
    }

    pub fn n_circuits(&self) -> usize {
        self.blocks.len() * self.fiducials.len() * self.fiducials.len()
    }

    /// Circuits in block-major, then prep, then meas order.
    pub fn circuits(&self) -> Vec<Circuit> {
        let mut out = Vec::with_capacity(self.n_circuits());
        for b in &self.blocks {
            for p in &self.fiducials {
                for m in &self.fiducials {
                    out.push(Circuit::new(p.clone(), b.germ.clone(), b.power, m.clone()));
                }
            }
        }
        out
    }

    /// Number of circuits in the blocks with germ length `≤ l`.
    pub fn n_circuits_up_to(&self, l: usize) -> usize {
        let nf = self.fiducials.len();
        self.blocks.iter().filter(|b| b.germ.len() * b.power <= l).count() * nf * nf
    }
}

/// All circuits of the standard design up to `max_l`.
pub fn compile_sequences(max_l: usize) -> Result<Vec<Circuit>> {
    Ok(Design::standard(max_l)?.circuits())
}
