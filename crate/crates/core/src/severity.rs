//! Ordinal severity scoring: four L/M/H/C ratings summed into a 4..=16 total
//! and banded. Ships the six published context tables as data and checks
//! every printed cell against the method.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgencyBucket, DrivingMode, ThreatId};

const TABLE_DATA: &str = include_str!("../data/severity_tables.csv");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeverityError {
    #[error("total {0} is outside 4..=16")]
    TotalOutOfRange(u32),
    #[error("unknown rating `{0}` (expected L, M, H or C)")]
    UnknownRating(String),
    #[error("unknown band `{0}`")]
    UnknownBand(String),
    #[error("unknown dimension `{0}` (expected SI, SD, P or SM)")]
    UnknownDimension(String),
    #[error("{0} has no severity table entry (cross-layer vectors are not scored)")]
    NotScored(ThreatId),
    #[error("severity table row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rating {
    L,
    M,
    H,
    C,
}

impl Rating {
    pub const ALL: [Rating; 4] = [Rating::L, Rating::M, Rating::H, Rating::C];
}

impl FromStr for Rating {
    type Err = SeverityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L" => Ok(Rating::L),
            "M" => Ok(Rating::M),
            "H" => Ok(Rating::H),
            "C" => Ok(Rating::C),
            _ => Err(SeverityError::UnknownRating(s.to_string())),
        }
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

pub fn points(r: Rating) -> u32 {
    match r {
        Rating::L => 1,
        Rating::M => 2,
        Rating::H => 3,
        Rating::C => 4,
    }
}

pub fn total(si: Rating, sd: Rating, p: Rating, sm: Rating) -> u32 {
    points(si) + points(sd) + points(p) + points(sm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    Low,
    Medium,
    High,
    Critical,
}

impl FromStr for Band {
    type Err = SeverityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(Band::Low),
            "medium" => Ok(Band::Medium),
            "high" => Ok(Band::High),
            "critical" => Ok(Band::Critical),
            _ => Err(SeverityError::UnknownBand(s.to_string())),
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

pub fn band(total: u32) -> Result<Band, SeverityError> {
    match total {
        4..=7 => Ok(Band::Low),
        8..=10 => Ok(Band::Medium),
        11..=13 => Ok(Band::High),
        14..=16 => Ok(Band::Critical),
        t => Err(SeverityError::TotalOutOfRange(t)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    SafetyImpact,
    StealthDetectability,
    Persistence,
    SemanticMisalignment,
}

impl FromStr for Dimension {
    type Err = SeverityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SI" => Ok(Dimension::SafetyImpact),
            "SD" => Ok(Dimension::StealthDetectability),
            "P" => Ok(Dimension::Persistence),
            "SM" => Ok(Dimension::SemanticMisalignment),
            _ => Err(SeverityError::UnknownDimension(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratings {
    pub si: Rating,
    pub sd: Rating,
    pub p: Rating,
    pub sm: Rating,
}

impl Ratings {
    pub fn total(&self) -> u32 {
        total(self.si, self.sd, self.p, self.sm)
    }

    pub fn band(&self) -> Band {
        band(self.total()).expect("four ratings always total 4..=16")
    }

    pub fn set(&mut self, dim: Dimension, r: Rating) {
        match dim {
            Dimension::SafetyImpact => self.si = r,
            Dimension::StealthDetectability => self.sd = r,
            Dimension::Persistence => self.p = r,
            Dimension::SemanticMisalignment => self.sm = r,
        }
    }

    pub fn as_array(&self) -> [Rating; 4] {
        [self.si, self.sd, self.p, self.sm]
    }
}

/// Table I..VI in publication order: Manual then Autonomous, Low/Medium/High agency.
pub fn table_id(mode: DrivingMode, agency: AgencyBucket) -> &'static str {
    match (mode, agency) {
        (DrivingMode::Manual, AgencyBucket::Low) => "I",
        (DrivingMode::Manual, AgencyBucket::Medium) => "II",
        (DrivingMode::Manual, AgencyBucket::High) => "III",
        (DrivingMode::Autonomous, AgencyBucket::Low) => "IV",
        (DrivingMode::Autonomous, AgencyBucket::Medium) => "V",
        (DrivingMode::Autonomous, AgencyBucket::High) => "VI",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityRecord {
    pub table: String,
    pub threat: ThreatId,
    pub mode: DrivingMode,
    pub agency: AgencyBucket,
    pub ratings: Ratings,
    pub printed_total: u32,
    /// Band implied by the printed cell color.
    pub printed_band: Band,
}

#[derive(Debug, Deserialize)]
struct Row {
    table: String,
    mode: String,
    agency: String,
    threat: String,
    si: String,
    sd: String,
    p: String,
    sm: String,
    printed_total: u32,
    printed_band: String,
}

fn parse_tables(data: &str) -> Result<Vec<SeverityRecord>, SeverityError> {
    let mut reader = csv::Reader::from_reader(data.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let bad = |reason: String| SeverityError::BadRow { row: i + 1, reason };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let mode: DrivingMode = row
            .mode
            .parse()
            .map_err(|e: crate::domain::DomainError| bad(e.to_string()))?;
        let agency: AgencyBucket = row
            .agency
            .parse()
            .map_err(|e: crate::domain::DomainError| bad(e.to_string()))?;
        let threat: ThreatId = row
            .threat
            .parse()
            .map_err(|e: crate::domain::DomainError| bad(e.to_string()))?;
        if row.table != table_id(mode, agency) {
            return Err(bad(format!("table {} does not match {mode}/{agency}", row.table)));
        }
        out.push(SeverityRecord {
            table: row.table,
            threat,
            mode,
            agency,
            ratings: Ratings {
                si: row.si.parse()?,
                sd: row.sd.parse()?,
                p: row.p.parse()?,
                sm: row.sm.parse()?,
            },
            printed_total: row.printed_total,
            printed_band: row.printed_band.parse()?,
        });
    }
    Ok(out)
}

/// All 90 published cells, ordered by table then threat.
pub fn records() -> &'static [SeverityRecord] {
    static RECORDS: OnceLock<Vec<SeverityRecord>> = OnceLock::new();
    RECORDS.get_or_init(|| parse_tables(TABLE_DATA).expect("embedded severity tables are well-formed"))
}

pub fn lookup(
    threat: ThreatId,
    mode: DrivingMode,
    agency: AgencyBucket,
) -> Result<&'static SeverityRecord, SeverityError> {
    records()
        .iter()
        .find(|r| r.threat == threat && r.mode == mode && r.agency == agency)
        .ok_or(SeverityError::NotScored(threat))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub table: String,
    pub threat: ThreatId,
    pub printed_total: u32,
    pub recomputed_total: u32,
    pub printed_band: Band,
    pub recomputed_band: Band,
}

impl Discrepancy {
    pub fn total_mismatch(&self) -> bool {
        self.printed_total != self.recomputed_total
    }

    pub fn band_mismatch(&self) -> bool {
        self.printed_band != self.recomputed_band
    }
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Table {} {}:", self.table, self.threat)?;
        if self.total_mismatch() {
            write!(
                f,
                " printed total {} vs recomputed {}",
                self.printed_total, self.recomputed_total
            )?;
        }
        if self.band_mismatch() {
            if self.total_mismatch() {
                f.write_str(";")?;
            }
            write!(
                f,
                " printed band {} vs recomputed {}",
                self.printed_band, self.recomputed_band
            )?;
        }
        Ok(())
    }
}

fn table_rank(table: &str) -> usize {
    ["I", "II", "III", "IV", "V", "VI"]
        .iter()
        .position(|t| *t == table)
        .unwrap_or(usize::MAX)
}

pub fn validate_records(records: &[SeverityRecord]) -> Vec<Discrepancy> {
    let mut out: Vec<Discrepancy> = records
        .iter()
        .filter_map(|r| {
            let recomputed_total = r.ratings.total();
            let recomputed_band = r.ratings.band();
            (recomputed_total != r.printed_total || recomputed_band != r.printed_band).then(|| Discrepancy {
                table: r.table.clone(),
                threat: r.threat,
                printed_total: r.printed_total,
                recomputed_total,
                printed_band: r.printed_band,
                recomputed_band,
            })
        })
        .collect();
    out.sort_by_key(|d| (table_rank(&d.table), d.threat));
    out
}

pub fn validate_tables() -> Vec<Discrepancy> {
    validate_records(records())
}

pub fn what_if(
    threat: ThreatId,
    mode: DrivingMode,
    agency: AgencyBucket,
    overrides: &[(Dimension, Rating)],
) -> Result<(u32, Band), SeverityError> {
    let mut ratings = lookup(threat, mode, agency)?.ratings;
    for (dim, r) in overrides {
        ratings.set(*dim, *r);
    }
    Ok((ratings.total(), ratings.band()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationViolation {
    pub threat: ThreatId,
    pub agency: AgencyBucket,
    pub manual_total: u32,
    pub autonomous_total: u32,
}

/// Cells where autonomous operation scores below manual operation for the
/// same threat and agency bucket.
pub fn escalation_violations() -> Vec<EscalationViolation> {
    let mut out = Vec::new();
    for threat in ThreatId::AGENTIC {
        for agency in AgencyBucket::ALL {
            let manual = lookup(threat, DrivingMode::Manual, agency).expect("table is total");
            let auto = lookup(threat, DrivingMode::Autonomous, agency).expect("table is total");
            if auto.ratings.total() < manual.ratings.total() {
                out.push(EscalationViolation {
                    threat,
                    agency,
                    manual_total: manual.ratings.total(),
                    autonomous_total: auto.ratings.total(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_and_totals() {
        assert_eq!(points(Rating::L), 1);
        assert_eq!(points(Rating::M), 2);
        assert_eq!(points(Rating::C), 4);
        assert_eq!(total(Rating::L, Rating::L, Rating::L, Rating::L), 4);
        assert_eq!(total(Rating::C, Rating::C, Rating::C, Rating::C), 16);
        assert_eq!(total(Rating::H, Rating::H, Rating::H, Rating::C), 13);
    }

    #[test]
    fn band_edges() {
        assert_eq!(band(7), Ok(Band::Low));
        assert_eq!(band(8), Ok(Band::Medium));
        assert_eq!(band(10), Ok(Band::Medium));
        assert_eq!(band(13), Ok(Band::High));
        assert_eq!(band(14), Ok(Band::Critical));
        assert!(band(3).is_err());
        assert!(band(17).is_err());
    }

    #[test]
    fn tables_are_total() {
        assert_eq!(records().len(), 90);
        for t in ThreatId::AGENTIC {
            for m in DrivingMode::ALL {
                for a in AgencyBucket::ALL {
                    assert!(lookup(t, m, a).is_ok());
                }
            }
        }
        assert!(lookup(ThreatId::XV2x, DrivingMode::Manual, AgencyBucket::Low).is_err());
    }

    #[test]
    fn lookup_examples() {
        let r = lookup(ThreatId::T11, DrivingMode::Autonomous, AgencyBucket::Medium).unwrap();
        assert_eq!(r.ratings.as_array(), [Rating::C, Rating::H, Rating::C, Rating::H]);
        assert_eq!(r.ratings.total(), 14);
        let r = lookup(ThreatId::T10, DrivingMode::Autonomous, AgencyBucket::Low).unwrap();
        assert_eq!(r.ratings.total(), 4);
        let r = lookup(ThreatId::T7, DrivingMode::Autonomous, AgencyBucket::High).unwrap();
        assert_eq!((r.ratings.total(), r.ratings.band()), (16, Band::Critical));
    }

    #[test]
    fn known_inconsistency_flagged() {
        let d = validate_tables();
        let t11 = d
            .iter()
            .find(|d| d.table == "III" && d.threat == ThreatId::T11)
            .unwrap();
        assert_eq!((t11.printed_total, t11.recomputed_total), (13, 14));
        assert!(!d.iter().any(|d| d.table == "I" && d.threat == ThreatId::T1));
        assert_eq!(validate_tables(), d);
    }

    #[test]
    fn what_if_examples() {
        let (t, b) = what_if(
            ThreatId::T1,
            DrivingMode::Manual,
            AgencyBucket::Low,
            &[(Dimension::SafetyImpact, Rating::C)],
        )
        .unwrap();
        assert_eq!((t, b), (7, Band::Low));
        let all_c: Vec<_> = ["SI", "SD", "P", "SM"]
            .iter()
            .map(|d| (d.parse().unwrap(), Rating::C))
            .collect();
        assert_eq!(
            what_if(ThreatId::T1, DrivingMode::Manual, AgencyBucket::Low, &all_c).unwrap(),
            (16, Band::Critical)
        );
    }

    #[test]
    fn malformed_row_is_rejected() {
        let bad = "table,mode,agency,threat,si,sd,p,sm,printed_total,printed_band\nII,Manual,Low,T1,L,L,L,L,4,Low\n";
        assert!(matches!(parse_tables(bad), Err(SeverityError::BadRow { row: 1, .. })));
    }
}
