use serde::{Deserialize, Serialize};

use super::record::EvalRecord;
use super::EvalError;
use crate::label::DataType;

/// Distance under which a prediction counts as close.
pub const UNDER_KM_THRESHOLD: f64 = 3.0;

/// City accuracy per image type; `None` for types absent from the records.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CityAccuracyByType {
    pub panorama: Option<f64>,
    pub photo: Option<f64>,
    pub satellite: Option<f64>,
}

impl CityAccuracyByType {
    pub fn get(&self, data_type: DataType) -> Option<f64> {
        match data_type {
            DataType::Panorama => self.panorama,
            DataType::Photo => self.photo,
            DataType::Satellite => self.satellite,
        }
    }

    fn set(&mut self, data_type: DataType, value: Option<f64>) {
        match data_type {
            DataType::Panorama => self.panorama = value,
            DataType::Photo => self.photo = value,
            DataType::Satellite => self.satellite = value,
        }
    }
}

/// Sample counts per image type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeCounts {
    pub panorama: usize,
    pub photo: usize,
    pub satellite: usize,
}

/// Benchmark metrics. Accuracies and rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_samples: usize,
    pub n_by_type: TypeCounts,
    pub n_geocoded: usize,
    pub country_acc: f64,
    pub province_acc: f64,
    pub city_acc: f64,
    pub city_acc_by_type: CityAccuracyByType,
    pub under_3km_rate: f64,
    pub median_distance_km: f64,
}

fn percent(hits: usize, total: usize) -> f64 {
    hits as f64 * 100.0 / total as f64
}

/// Folds records into a report. Every record is in every denominator; the
/// median runs over all distances, miss distances included.
pub fn aggregate(records: &[EvalRecord]) -> Result<MetricsReport, EvalError> {
    let n = records.len();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    let count = |f: &dyn Fn(&EvalRecord) -> bool| records.iter().filter(|r| f(r)).count();

    let mut by_type = CityAccuracyByType::default();
    let mut n_by_type = TypeCounts::default();
    for dt in DataType::ALL {
        let of_type = count(&|r| r.data_type == dt);
        let hits = count(&|r| r.data_type == dt && r.verdicts.city);
        by_type.set(dt, (of_type > 0).then(|| percent(hits, of_type)));
        match dt {
            DataType::Panorama => n_by_type.panorama = of_type,
            DataType::Photo => n_by_type.photo = of_type,
            DataType::Satellite => n_by_type.satellite = of_type,
        }
    }

    let mut distances: Vec<f64> = records.iter().map(|r| r.distance_km).collect();
    distances.sort_by(f64::total_cmp);
    let mid = n / 2;
    let median = if n % 2 == 1 { distances[mid] } else { (distances[mid - 1] + distances[mid]) / 2.0 };

    Ok(MetricsReport {
        n_samples: n,
        n_by_type,
        n_geocoded: count(&|r| r.geocoded()),
        country_acc: percent(count(&|r| r.verdicts.country), n),
        province_acc: percent(count(&|r| r.verdicts.province), n),
        city_acc: percent(count(&|r| r.verdicts.city), n),
        city_acc_by_type: by_type,
        under_3km_rate: percent(count(&|r| r.geocoded() && r.distance_km < UNDER_KM_THRESHOLD), n),
        median_distance_km: median,
    })
}

/// Text table with one row per named report.
pub fn render_table(rows: &[(&str, &MetricsReport)]) -> String {
    let header = [
        "Model",
        "Country %",
        "Provincial/State %",
        "City %",
        "Panorama City %",
        "Photo City %",
        "Satellite City %",
        "<3 km %",
        "Median km",
    ];
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            vec![
                name.to_string(),
                fmt(Some(r.country_acc)),
                fmt(Some(r.province_acc)),
                fmt(Some(r.city_acc)),
                fmt(r.city_acc_by_type.panorama),
                fmt(r.city_acc_by_type.photo),
                fmt(r.city_acc_by_type.satellite),
                fmt(Some(r.under_3km_rate)),
                fmt(Some(r.median_distance_km)),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| body.iter().map(|row| row[i].chars().count()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(header.iter().map(|h| h.to_string()).collect());
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect()));
    for row in body {
        out.push_str(&line(row));
    }
    out
}
