use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};

use super::extract::{extract_predicted_address, AddressExtractor};
use super::verify::{verify_levels, LevelVerifier};
use crate::geo::{haversine_km, MAX_GREAT_CIRCLE_KM};
use crate::label::{DataType, GeoLabel};
use crate::protocol::Trajectory;
use crate::tools::{GeocodeStatus, Geocoder};
use crate::verdict::LevelVerdicts;
use crate::GeoPoint;

/// How far the distance pipeline got for a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    /// Geocoded; the distance is real.
    Ok,
    /// The trajectory has no final answer.
    Unanswered,
    /// No address could be extracted from the answer.
    Unaddressable,
    /// The geocoder found no match.
    NotFound,
    /// The geocoder failed.
    ProviderError,
}

/// Evaluation of one sample. `distance_km` is the great-circle distance to
/// the label, or [`MAX_GREAT_CIRCLE_KM`] unless `status` is `ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    pub data_type: DataType,
    pub verdicts: LevelVerdicts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_point: Option<GeoPoint>,
    pub distance_km: f64,
    pub status: EvalStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl EvalRecord {
    pub fn geocoded(&self) -> bool {
        self.status == EvalStatus::Ok
    }
}

/// Helper services used during evaluation.
#[derive(Clone)]
pub struct EvalClients {
    pub verifier: Option<Arc<dyn LevelVerifier>>,
    pub extractor: Option<Arc<dyn AddressExtractor>>,
    pub geocoder: Geocoder,
}

impl EvalClients {
    pub fn rules_only(geocoder: Geocoder) -> Self {
        Self { verifier: None, extractor: None, geocoder }
    }
}

/// Scores one trajectory: level verdicts, then address extraction,
/// geocoding and distance. Unanswered trajectories are wrong at every level
/// and get the miss distance.
pub fn evaluate_sample(trajectory: &Trajectory, label: &GeoLabel, data_type: DataType, clients: &EvalClients) -> EvalRecord {
    let mut record = EvalRecord {
        sample_id: trajectory.sample_id.clone(),
        data_type,
        verdicts: LevelVerdicts::none(),
        predicted_address: None,
        predicted_point: None,
        distance_km: MAX_GREAT_CIRCLE_KM,
        status: EvalStatus::Unanswered,
        flags: Vec::new(),
    };
    let Some(answer) = trajectory.final_answer.as_deref().filter(|a| !a.trim().is_empty()) else {
        return record;
    };
    let id = trajectory.sample_id.as_str();

    let verification = verify_levels(id, answer, label, clients.verifier.as_deref());
    record.verdicts = verification.verdicts;
    record.flags.extend(verification.flags);

    let extraction = extract_predicted_address(id, answer, clients.extractor.as_deref());
    record.flags.extend(extraction.flag);
    let Some(address) = extraction.address else {
        record.status = EvalStatus::Unaddressable;
        return record;
    };
    let geocoded = clients.geocoder.geocode(&address);
    record.predicted_address = Some(address);
    match geocoded.status() {
        GeocodeStatus::Ok => {
            let point = geocoded.point().expect("ok geocode carries a point");
            record.predicted_point = Some(point);
            record.distance_km = haversine_km(&point, &label.point());
            record.status = EvalStatus::Ok;
        }
        GeocodeStatus::NotFound => record.status = EvalStatus::NotFound,
        GeocodeStatus::ProviderError => {
            record.status = EvalStatus::ProviderError;
            if let crate::tools::GeocodeOutcome::ProviderError { message } = geocoded.outcome {
                record.flags.push(format!("geocoder failed: {message}"));
            }
        }
    }
    record
}

/// Evaluates `(trajectory, label, data_type)` triples on `workers` threads;
/// output order follows input order.
pub fn evaluate_batch(
    items: &[(&Trajectory, &GeoLabel, DataType)],
    clients: &EvalClients,
    workers: usize,
) -> Vec<EvalRecord> {
    let slots: Vec<Mutex<Option<EvalRecord>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((traj, label, data_type)) = items.get(i) else { break };
                let record = evaluate_sample(traj, label, *data_type, clients);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(record);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every item evaluated"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LevelAliases;
    use crate::protocol::Termination;
    use crate::tools::FixtureGeocoder;

    fn hamburg() -> GeoLabel {
        GeoLabel::new("Germany", "Hamburg", "Hamburg", GeoPoint::new(53.5511, 9.9937).unwrap(), LevelAliases::default())
            .unwrap()
    }

    fn answered(text: &str) -> Trajectory {
        let mut t = Trajectory::new("s1");
        t.final_answer = Some(text.into());
        t.termination = Termination::Answered;
        t
    }

    fn clients() -> EvalClients {
        let mut fixture = FixtureGeocoder::default();
        fixture.insert("Mönckebergstraße, Hamburg, Germany", GeoPoint::new(53.5511, 10.0118).unwrap());
        fixture.insert("Bavaria, Germany", GeoPoint::new(48.7904, 11.4979).unwrap());
        EvalClients::rules_only(Geocoder::new(Arc::new(fixture)))
    }

    #[test]
    fn answered_sample_gets_a_distance() {
        let r = evaluate_sample(&answered("Mönckebergstraße, Hamburg, Germany"), &hamburg(), DataType::Photo, &clients());
        assert_eq!(r.status, EvalStatus::Ok);
        assert!(r.verdicts.city);
        let expected = haversine_km(&GeoPoint::new(53.5511, 10.0118).unwrap(), &hamburg().point());
        assert_eq!(r.distance_km, expected);
        assert!(r.distance_km > 1.1 && r.distance_km < 1.3);
    }

    #[test]
    fn unanswered_sample_misses() {
        let r = evaluate_sample(&Trajectory::new("s1"), &hamburg(), DataType::Photo, &clients());
        assert_eq!(r.status, EvalStatus::Unanswered);
        assert_eq!(r.verdicts, LevelVerdicts::none());
        assert_eq!(r.distance_km, MAX_GREAT_CIRCLE_KM);
    }

    #[test]
    fn country_only_answer() {
        let r = evaluate_sample(&answered("Bavaria, Germany"), &hamburg(), DataType::Panorama, &clients());
        assert_eq!((r.verdicts.country, r.verdicts.province, r.verdicts.city), (true, false, false));
        assert_eq!(r.status, EvalStatus::Ok);
    }

    #[test]
    fn geocode_miss_uses_sentinel() {
        let r = evaluate_sample(&answered("Nowhere Street, Atlantis"), &hamburg(), DataType::Photo, &clients());
        assert_eq!(r.status, EvalStatus::NotFound);
        assert_eq!(r.distance_km, MAX_GREAT_CIRCLE_KM);
        assert_eq!(r.predicted_address.as_deref(), Some("Nowhere Street, Atlantis"));
    }

    #[test]
    fn batch_preserves_order() {
        let trajs: Vec<Trajectory> = (0..6)
            .map(|i| {
                let mut t = answered("Mönckebergstraße, Hamburg, Germany");
                t.sample_id = format!("s{i}");
                t
            })
            .collect();
        let label = hamburg();
        let items: Vec<_> = trajs.iter().map(|t| (t, &label, DataType::Photo)).collect();
        let out = evaluate_batch(&items, &clients(), 3);
        let ids: Vec<_> = out.iter().map(|r| r.sample_id.as_str()).collect();
        assert_eq!(ids, ["s0", "s1", "s2", "s3", "s4", "s5"]);
    }
}
