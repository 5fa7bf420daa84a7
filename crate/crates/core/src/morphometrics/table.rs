use super::{Feature, FeatureVector, FEATURE_LEN};
use crate::error::{Error, Result};
use crate::model::EpithelialRegion;
use crate::numfmt::sig6;

/// The 21 value columns: `lower_ana`, …, `upper_pli`.
pub fn feature_columns() -> Vec<String> {
    EpithelialRegion::ALL
        .iter()
        .flat_map(|r| Feature::ALL.iter().map(move |f| format!("{}_{}", r.name().to_lowercase(), f.name())))
        .collect()
}

fn validity_columns() -> [String; 3] {
    EpithelialRegion::ALL.map(|r| format!("{}_valid", r.name().to_lowercase()))
}

/// Feature table with `sep_id`, `label`, the value columns and the three
/// band validity flags (`1`/`0`).
pub fn write_features_csv(rows: &[FeatureVector<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sep_id".to_string(), "label".to_string()];
    header.extend(feature_columns());
    header.extend(validity_columns());
    w.write_record(&header)?;
    for fv in rows {
        let mut rec = vec![fv.sep_id.clone(), fv.label.map(|g| g.to_string()).unwrap_or_default()];
        rec.extend(fv.values.iter().map(|&v| sig6(v)));
        rec.extend(fv.region_valid.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Table(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Table(e.to_string()))
}

pub fn read_features_csv(text: &str) -> Result<Vec<FeatureVector<f64>>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Table(format!("missing column {name}")))
    };
    let id_col = col("sep_id")?;
    let label_col = header.iter().position(|h| h == "label");
    let value_cols = feature_columns().iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let valid_cols: Vec<Option<usize>> = validity_columns().iter().map(|c| header.iter().position(|h| h == c)).collect();

    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let label = match label_col.map(field) {
            Some(s) if !s.is_empty() => Some(s.parse().map_err(|_| Error::Table(format!("row {}: bad label {s:?}", line + 1)))?),
            _ => None,
        };
        let mut values = [0.0; FEATURE_LEN];
        for (slot, &c) in values.iter_mut().zip(&value_cols) {
            *slot = field(c)
                .parse()
                .map_err(|_| Error::Table(format!("row {}: bad number {:?}", line + 1, field(c))))?;
        }
        let mut region_valid = [true; 3];
        for (slot, c) in region_valid.iter_mut().zip(&valid_cols) {
            if let Some(c) = c {
                *slot = matches!(field(*c), "1" | "true");
            }
        }
        out.push(FeatureVector {
            sep_id: field(id_col).to_string(),
            label,
            values,
            region_valid,
            ncr_saturated: [false; 3],
        });
    }
    Ok(out)
}
