//! Report tables (overall agreement, per-subgroup agreement, diagnostic performance, decision
//! curve) and the paired-observation CSV format `id,qfr,ffr,vessel,quality`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    agreement_stats, decision_curve, default_threshold_grid, roc_analysis, AgreementReport,
    DecisionCurve, PairedObservation, QualityLabel, RocReport, StatsError, VesselLabel,
    DEFAULT_CLINICAL_THRESHOLD,
};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SubgroupRow<T> {
    pub subgroup: String,
    pub n: usize,
    /// Absent when the subgroup is too small or has no spread.
    pub agreement: Option<AgreementReport<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ValidationTables<T> {
    pub n: usize,
    pub agreement: AgreementReport<T>,
    pub subgroups: Vec<SubgroupRow<T>>,
    pub diagnostic: RocReport<T>,
    pub decision_curve: DecisionCurve<T>,
}

fn subgroup<T: Scalar>(
    name: String,
    pairs: &[PairedObservation<T>],
    keep: impl Fn(&PairedObservation<T>) -> bool,
) -> Option<SubgroupRow<T>> {
    let subset: Vec<_> = pairs.iter().filter(|p| keep(p)).cloned().collect();
    (!subset.is_empty()).then(|| SubgroupRow {
        subgroup: name,
        n: subset.len(),
        agreement: agreement_stats(&subset).ok(),
    })
}

pub fn validation_tables<T: Scalar>(
    pairs: &[PairedObservation<T>],
) -> Result<ValidationTables<T>, StatsError> {
    for p in pairs {
        p.validate()?;
    }
    let agreement = agreement_stats(pairs)?;
    let diagnostic = roc_analysis(pairs, T::lit(DEFAULT_CLINICAL_THRESHOLD))?;
    let decision_curve = decision_curve(pairs, &default_threshold_grid())?;
    let mut subgroups = Vec::new();
    for v in [VesselLabel::LAD, VesselLabel::RCA, VesselLabel::LCx] {
        subgroups.extend(subgroup(format!("vessel={v:?}"), pairs, |p| {
            p.vessel == Some(v)
        }));
    }
    for q in [QualityLabel::Good, QualityLabel::Suboptimal] {
        subgroups.extend(subgroup(format!("quality={q:?}"), pairs, |p| {
            p.quality == Some(q)
        }));
    }
    Ok(ValidationTables {
        n: pairs.len(),
        agreement,
        subgroups,
        diagnostic,
        decision_curve,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    id: Option<String>,
    qfr: f64,
    ffr: f64,
    vessel: Option<String>,
    quality: Option<String>,
}

fn parse_label<L: for<'de> Deserialize<'de>>(raw: Option<String>) -> Result<Option<L>, StatsError> {
    match raw.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map(Some)
            .map_err(|_| StatsError::Csv(format!("unknown label '{s}'"))),
    }
}

pub fn read_pairs_csv<T: Scalar, R: Read>(
    reader: R,
) -> Result<Vec<PairedObservation<T>>, StatsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<PairRow>().enumerate() {
        let row = row.map_err(|e| StatsError::Csv(format!("row {}: {e}", line + 1)))?;
        let obs = PairedObservation {
            id: row.id.filter(|s| !s.is_empty()),
            qfr: T::lit(row.qfr),
            ffr: T::lit(row.ffr),
            vessel: parse_label(row.vessel)?,
            quality: parse_label(row.quality)?,
        };
        obs.validate()
            .map_err(|e| StatsError::Csv(format!("row {}: {e}", line + 1)))?;
        out.push(obs);
    }
    Ok(out)
}

pub fn write_pairs_csv<T: Scalar, W: Write>(
    writer: W,
    pairs: &[PairedObservation<T>],
) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in pairs {
        w.serialize(PairRow {
            id: p.id.clone(),
            qfr: p.qfr.to_f64_lossy(),
            ffr: p.ffr.to_f64_lossy(),
            vessel: p.vessel.map(|v| format!("{v:?}")),
            quality: p.quality.map(|q| format!("{q:?}")),
        })
        .map_err(|e| StatsError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| StatsError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "id,qfr,ffr,vessel,quality\n\
        a,0.78,0.76,LAD,Good\n\
        b,0.91,0.89,RCA,Suboptimal\n\
        c,0.70,0.74,LAD,Good\n\
        d,0.86,0.84,LCx,\n\
        e,0.82,0.81,,Good\n";

    #[test]
    fn csv_round_trip() {
        let pairs: Vec<PairedObservation<f64>> = read_pairs_csv(CSV.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 5);
        assert_eq!(pairs[0].vessel, Some(VesselLabel::LAD));
        assert_eq!(pairs[3].quality, None);
        assert_eq!(pairs[4].vessel, None);
        let mut buf = Vec::new();
        write_pairs_csv(&mut buf, &pairs).unwrap();
        let again: Vec<PairedObservation<f64>> = read_pairs_csv(buf.as_slice()).unwrap();
        assert_eq!(pairs, again);
    }

    #[test]
    fn bad_rows_rejected() {
        let bad = "id,qfr,ffr,vessel,quality\na,1.7,0.8,,\n";
        assert!(matches!(
            read_pairs_csv::<f64, _>(bad.as_bytes()),
            Err(StatsError::Csv(_))
        ));
        let label = "id,qfr,ffr,vessel,quality\na,0.7,0.8,OM,\n";
        assert!(matches!(
            read_pairs_csv::<f64, _>(label.as_bytes()),
            Err(StatsError::Csv(_))
        ));
    }

    #[test]
    fn tables_have_subgroups() {
        let pairs: Vec<PairedObservation<f64>> = read_pairs_csv(CSV.as_bytes()).unwrap();
        let t = validation_tables(&pairs).unwrap();
        assert_eq!(t.n, 5);
        let lad = t
            .subgroups
            .iter()
            .find(|s| s.subgroup == "vessel=LAD")
            .unwrap();
        assert_eq!(lad.n, 2);
        assert!(lad.agreement.is_some());
        let json = serde_json::to_value(&t).unwrap();
        assert!(json["diagnostic"]["auroc"].is_number());
    }
}
