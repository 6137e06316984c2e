//! Compiled cross-section points and their CSV form.
//!
//! Combined error is the RMS of all components. Asymmetric bounds are folded
//! per side, `up = √(stat² + syst² + hi²)` and `down = √(stat² + syst² + lo²)`,
//! then symmetrised as `(up + down)/2`.

use super::DiffractError;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

/// Shipped single-diffractive compilation (2σ_SD, mb).
pub const SD_CSV: &str = include_str!("../../data/sd_cross_sections.csv");
/// Shipped double-diffractive compilation (σ_DD, mb).
pub const DD_CSV: &str = include_str!("../../data/dd_cross_sections.csv");

/// E710 side counts: N_L (antiproton dissociation) and N_R (proton dissociation).
pub const E710_N_L: (f64, f64) = (42904.0, 16021.0);
pub const E710_N_R: (f64, f64) = (52787.0, 12582.0);
/// E710 recommended 2σ_SD at 1800 GeV and its error (mb).
pub const E710_AVERAGE: (f64, f64) = (9.4, 1.4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiffractionKind {
    #[serde(rename = "SD")]
    Single,
    #[serde(rename = "DD")]
    Double,
}

/// Reaction classes: A–D single diffraction, E–G double diffraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReactionClass {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl ReactionClass {
    pub fn parse(s: &str) -> Result<Self, DiffractError> {
        Ok(match s.trim() {
            "A" => Self::A,
            "B" => Self::B,
            "C" => Self::C,
            "D" => Self::D,
            "E" => Self::E,
            "F" => Self::F,
            "G" => Self::G,
            other => return Err(DiffractError::UnknownClass(other.to_string())),
        })
    }

    pub fn kind(self) -> DiffractionKind {
        match self {
            Self::A | Self::B | Self::C | Self::D => DiffractionKind::Single,
            _ => DiffractionKind::Double,
        }
    }

    /// Number of φ-suppressed couplings: 0..=3 for A..D, 0..=2 for E..G.
    pub fn k(self) -> u32 {
        match self {
            Self::A | Self::E => 0,
            Self::B | Self::F => 1,
            Self::C | Self::G => 2,
            Self::D => 3,
        }
    }

    pub fn of_kind(kind: DiffractionKind) -> &'static [ReactionClass] {
        match kind {
            DiffractionKind::Single => &[Self::A, Self::B, Self::C, Self::D],
            DiffractionKind::Double => &[Self::E, Self::F, Self::G],
        }
    }
}

impl std::fmt::Display for ReactionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionPoint {
    pub experiment: String,
    pub kind: DiffractionKind,
    pub class: ReactionClass,
    pub sqrt_s: f64,
    /// mb; SD values are 2σ_SD.
    pub value: f64,
    pub err_stat: f64,
    pub err_syst: f64,
    pub err_lo: Option<f64>,
    pub err_hi: Option<f64>,
    pub include: bool,
    pub note: String,
}

impl CrossSectionPoint {
    /// s in GeV².
    pub fn s(&self) -> f64 {
        self.sqrt_s * self.sqrt_s
    }

    pub fn error_up(&self) -> f64 {
        rms3(self.err_stat, self.err_syst, self.err_hi.unwrap_or(0.0))
    }

    pub fn error_down(&self) -> f64 {
        rms3(self.err_stat, self.err_syst, self.err_lo.unwrap_or(0.0))
    }

    /// Symmetrised combined error.
    pub fn error(&self) -> f64 {
        0.5 * (self.error_up() + self.error_down())
    }
}

fn rms3(a: f64, b: f64, c: f64) -> f64 {
    (a * a + b * b + c * c).sqrt()
}

#[derive(Debug, Deserialize)]
struct RawRow {
    experiment: String,
    kind: String,
    class: String,
    sqrt_s_gev: f64,
    value_mb: f64,
    err_stat: f64,
    err_syst: f64,
    err_lo: Option<f64>,
    err_hi: Option<f64>,
    include: bool,
    note: Option<String>,
}

fn convert(row: usize, raw: RawRow) -> Result<CrossSectionPoint, DiffractError> {
    let malformed = |message: String| DiffractError::MalformedRow { row, message };
    let kind = match raw.kind.trim() {
        "SD" => DiffractionKind::Single,
        "DD" => DiffractionKind::Double,
        other => return Err(malformed(format!("unknown kind {other:?}"))),
    };
    let class = ReactionClass::parse(&raw.class)?;
    if class.kind() != kind {
        return Err(malformed(format!("class {class} is not a {} class", raw.kind.trim())));
    }
    if !(raw.value_mb > 0.0) {
        return Err(DiffractError::NonPositiveValue { row, value: raw.value_mb });
    }
    if !(raw.sqrt_s_gev > 0.0) {
        return Err(malformed(format!("sqrt_s_gev must be positive (got {})", raw.sqrt_s_gev)));
    }
    let errs = [Some(raw.err_stat), Some(raw.err_syst), raw.err_lo, raw.err_hi];
    if errs.iter().flatten().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(malformed("errors must be finite and non-negative".into()));
    }
    let point = CrossSectionPoint {
        experiment: raw.experiment.trim().to_string(),
        kind,
        class,
        sqrt_s: raw.sqrt_s_gev,
        value: raw.value_mb,
        err_stat: raw.err_stat,
        err_syst: raw.err_syst,
        err_lo: raw.err_lo,
        err_hi: raw.err_hi,
        include: raw.include,
        note: raw.note.unwrap_or_default(),
    };
    if !(point.error() > 0.0) {
        return Err(malformed("combined error must be positive".into()));
    }
    Ok(point)
}

/// Parses dataset CSV. Row numbers in errors count the header as row 1.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Vec<CrossSectionPoint>, DiffractError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RawRow>().enumerate() {
        let row = i + 2;
        let raw = rec.map_err(|e| DiffractError::MalformedRow { row, message: e.to_string() })?;
        out.push(convert(row, raw)?);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<CrossSectionPoint>, DiffractError> {
    parse_dataset(std::fs::File::open(path)?)
}

pub fn shipped_sd() -> Vec<CrossSectionPoint> {
    parse_dataset(SD_CSV.as_bytes()).expect("shipped SD dataset is valid")
}

pub fn shipped_dd() -> Vec<CrossSectionPoint> {
    parse_dataset(DD_CSV.as_bytes()).expect("shipped DD dataset is valid")
}

/// E710 side-separated 2σ values at 1800 GeV as (class C, class B) points.
///
/// `2σ_side = 2·σ_avg·N_side/(N_L + N_R)`, with relative error
/// `√((δN_side/N_side)² + (δσ_avg/σ_avg)²)`.
pub fn e710_side_points(average: (f64, f64), n_l: (f64, f64), n_r: (f64, f64)) -> [CrossSectionPoint; 2] {
    let total = n_l.0 + n_r.0;
    let side = |class: ReactionClass, (n, dn): (f64, f64), label: &str| {
        let value = 2.0 * average.0 * n / total;
        let rel = (dn / n).hypot(average.1 / average.0);
        CrossSectionPoint {
            experiment: "E710".into(),
            kind: DiffractionKind::Single,
            class,
            sqrt_s: 1800.0,
            value,
            err_stat: 0.0,
            err_syst: value * rel,
            err_lo: None,
            err_hi: None,
            include: true,
            note: format!("derived from {label}"),
        }
    };
    [side(ReactionClass::C, n_l, "N_L"), side(ReactionClass::B, n_r, "N_R")]
}

/// Included points of one kind.
pub fn included(data: &[CrossSectionPoint], kind: DiffractionKind) -> Vec<&CrossSectionPoint> {
    data.iter().filter(|p| p.include && p.kind == kind).collect()
}
