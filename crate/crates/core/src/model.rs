//! Stations, hourly wind series and the validated dataset every other module
//! consumes.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const HOUR: i64 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StationClass {
    Met,
    A,
    B,
    C,
    U,
}

impl StationClass {
    pub const ALL: [StationClass; 5] = [
        StationClass::Met,
        StationClass::A,
        StationClass::B,
        StationClass::C,
        StationClass::U,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StationClass::Met => "MET",
            StationClass::A => "A",
            StationClass::B => "B",
            StationClass::C => "C",
            StationClass::U => "U",
        }
    }

    pub fn is_met(self) -> bool {
        self == StationClass::Met
    }
}

impl fmt::Display for StationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MET" => Ok(StationClass::Met),
            "A" => Ok(StationClass::A),
            "B" => Ok(StationClass::B),
            "C" => Ok(StationClass::C),
            "U" => Ok(StationClass::U),
            other => Err(Error::InvalidConfig(alloc::format!("unknown station class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRecord {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub class: StationClass,
    pub dist_to_sea_km: Option<f64>,
}

impl StationRecord {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64, class: StationClass) -> Self {
        StationRecord {
            id: id.into(),
            lat,
            lon,
            class,
            dist_to_sea_km: None,
        }
    }
}

/// Hourly series starting at `t0`; `None` marks a missing hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindSeries {
    pub station_id: String,
    pub t0: Timestamp,
    pub values: Vec<Option<f64>>,
}

impl WindSeries {
    pub fn new(station_id: impl Into<String>, t0: Timestamp, values: Vec<Option<f64>>) -> Self {
        WindSeries {
            station_id: station_id.into(),
            t0,
            values,
        }
    }

    pub fn present(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn n_present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidParameter {
                name: "shape",
                value: shape,
            });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "scale",
                value: scale,
            });
        }
        Ok(WeibullParams { shape, scale })
    }
}

/// Hour of day in 1..=24, with midnight mapped to 24.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HourOfDay(u8);

impl HourOfDay {
    pub fn new(h: u8) -> Result<Self> {
        if (1..=24).contains(&h) {
            Ok(HourOfDay(h))
        } else {
            Err(Error::InvalidParameter {
                name: "hour",
                value: h as f64,
            })
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based slot 0..24 (hour 1 → 0, hour 24 → 23).
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn successor(self) -> HourOfDay {
        HourOfDay(self.0 % 24 + 1)
    }
}

pub fn hour_of_day(ts: Timestamp) -> Result<HourOfDay> {
    if ts.rem_euclid(HOUR) != 0 {
        return Err(Error::NotHourAligned(ts));
    }
    let h = ts.div_euclid(HOUR).rem_euclid(24) as u8;
    Ok(HourOfDay(if h == 0 { 24 } else { h }))
}

/// Validated stations plus a common hourly axis. `values[s][t]` is station
/// `s` at time `t0 + t` hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub stations: Vec<StationRecord>,
    pub t0: Timestamp,
    pub n_times: usize,
    pub values: Vec<Vec<Option<f64>>>,
}

fn check_station(s: &StationRecord) -> Result<()> {
    let ok = s.lat.is_finite()
        && s.lon.is_finite()
        && (-90.0..=90.0).contains(&s.lat)
        && (-180.0..=180.0).contains(&s.lon);
    if !ok {
        return Err(Error::InvalidCoordinates {
            station: s.id.clone(),
            lat: s.lat,
            lon: s.lon,
        });
    }
    if let Some(d) = s.dist_to_sea_km {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "dist_to_sea_km",
                value: d,
            });
        }
    }
    Ok(())
}

fn check_value(station: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(station.into()));
    }
    if v < 0.0 {
        return Err(Error::NegativeWindSpeed {
            station: station.into(),
            value: v,
        });
    }
    Ok(())
}

/// Check stations and series and align every series on the union hourly
/// axis. Stations with no series get an all-missing row.
pub fn validate_dataset(stations: Vec<StationRecord>, series: Vec<WindSeries>) -> Result<Dataset> {
    let mut index = BTreeMap::new();
    for (i, s) in stations.iter().enumerate() {
        check_station(s)?;
        if index.insert(s.id.clone(), i).is_some() {
            return Err(Error::DuplicateStation(s.id.clone()));
        }
    }
    let mut seen = vec![false; stations.len()];
    let (mut start, mut end) = (i64::MAX, i64::MIN);
    for ser in &series {
        let &i = index
            .get(&ser.station_id)
            .ok_or_else(|| Error::UnknownStation(ser.station_id.clone()))?;
        if core::mem::replace(&mut seen[i], true) {
            return Err(Error::DuplicateStation(ser.station_id.clone()));
        }
        if ser.t0.rem_euclid(HOUR) != 0 {
            return Err(Error::NotHourAligned(ser.t0));
        }
        if ser.values.is_empty() {
            return Err(Error::EmptySeries(ser.station_id.clone()));
        }
        for v in ser.values.iter().flatten() {
            check_value(&ser.station_id, *v)?;
        }
        start = start.min(ser.t0);
        end = end.max(ser.t0 + (ser.values.len() as i64 - 1) * HOUR);
    }
    if series.is_empty() {
        return Ok(Dataset {
            stations,
            t0: 0,
            n_times: 0,
            values: Vec::new(),
        });
    }
    let n_times = ((end - start) / HOUR + 1) as usize;
    let mut values = vec![vec![None; n_times]; stations.len()];
    for ser in series {
        let i = index[&ser.station_id];
        let off = ((ser.t0 - start) / HOUR) as usize;
        for (k, v) in ser.values.into_iter().enumerate() {
            values[i][off + k] = v;
        }
    }
    Ok(Dataset {
        stations,
        t0: start,
        n_times,
        values,
    })
}

impl Dataset {
    pub fn n_sites(&self) -> usize {
        self.stations.len()
    }

    pub fn timestamp(&self, t: usize) -> Timestamp {
        self.t0 + t as i64 * HOUR
    }

    pub fn hour(&self, t: usize) -> HourOfDay {
        // t0 is hour-aligned by construction
        hour_of_day(self.timestamp(t)).unwrap_or(HourOfDay(24))
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    pub fn series(&self, s: usize) -> WindSeries {
        WindSeries::new(self.stations[s].id.clone(), self.t0, self.values[s].clone())
    }

    pub fn n_present(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_some()).count()
    }

    /// Keep only the stations selected by `keep` (time axis unchanged).
    pub fn filter_stations<F: FnMut(usize, &StationRecord) -> bool>(&self, mut keep: F) -> Dataset {
        let mut stations = Vec::new();
        let mut values = Vec::new();
        for (i, s) in self.stations.iter().enumerate() {
            if keep(i, s) {
                stations.push(s.clone());
                values.push(self.values[i].clone());
            }
        }
        Dataset {
            stations,
            t0: self.t0,
            n_times: self.n_times,
            values,
        }
    }

    pub fn without_station(&self, idx: usize) -> Dataset {
        self.filter_stations(|i, _| i != idx)
    }

    /// Replace the values of every station; shapes must match.
    pub fn with_values(&self, values: Vec<Vec<Option<f64>>>) -> Result<Dataset> {
        if values.len() != self.stations.len() {
            return Err(Error::LengthMismatch(values.len(), self.stations.len()));
        }
        if let Some(row) = values.iter().find(|r| r.len() != self.n_times) {
            return Err(Error::LengthMismatch(row.len(), self.n_times));
        }
        Ok(Dataset {
            stations: self.stations.clone(),
            t0: self.t0,
            n_times: self.n_times,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const JUNE1: i64 = 1_717_200_000; // 2024-06-01T00:00:00Z

    fn st(id: &str) -> StationRecord {
        StationRecord::new(id, 53.0, -8.0, StationClass::Met)
    }

    #[test]
    fn aligned_series() {
        let ds = validate_dataset(
            vec![st("a"), st("b")],
            vec![
                WindSeries::new("a", JUNE1, vec![Some(1.0), Some(2.0)]),
                WindSeries::new("b", JUNE1, vec![Some(3.0), None]),
            ],
        )
        .unwrap();
        assert_eq!((ds.n_sites(), ds.n_times), (2, 2));
    }

    #[test]
    fn negative_rejected() {
        let e = validate_dataset(vec![st("a")], vec![WindSeries::new("a", JUNE1, vec![Some(-1.0)])]);
        assert!(matches!(e, Err(Error::NegativeWindSpeed { .. })));
        assert!(alloc::format!("{}", e.unwrap_err()).contains("negative wind speed"));
    }

    #[test]
    fn union_axis_with_offsets() {
        // a covers hours 0..2, b covers hours 1..3
        let ds = validate_dataset(
            vec![st("a"), st("b")],
            vec![
                WindSeries::new("a", JUNE1, vec![Some(1.0), Some(2.0)]),
                WindSeries::new("b", JUNE1 + HOUR, vec![Some(5.0), Some(6.0)]),
            ],
        )
        .unwrap();
        assert_eq!(ds.t0, JUNE1);
        assert_eq!(ds.n_times, 3);
        assert_eq!(ds.values[0], vec![Some(1.0), Some(2.0), None]);
        assert_eq!(ds.values[1], vec![None, Some(5.0), Some(6.0)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            validate_dataset(vec![st("a"), st("a")], vec![]),
            Err(Error::DuplicateStation(_))
        ));
        assert!(matches!(
            validate_dataset(vec![st("a")], vec![WindSeries::new("z", JUNE1, vec![Some(1.0)])]),
            Err(Error::UnknownStation(_))
        ));
        assert!(matches!(
            validate_dataset(vec![st("a")], vec![WindSeries::new("a", JUNE1 + 60, vec![Some(1.0)])]),
            Err(Error::NotHourAligned(_))
        ));
        assert!(matches!(
            validate_dataset(vec![st("a")], vec![WindSeries::new("a", JUNE1, vec![Some(f64::NAN)])]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn hours() {
        assert_eq!(hour_of_day(JUNE1 + 5 * HOUR).unwrap().get(), 5);
        assert_eq!(hour_of_day(JUNE1).unwrap().get(), 24);
        assert_eq!(hour_of_day(JUNE1 + 23 * HOUR).unwrap().get(), 23);
        assert_eq!(HourOfDay::new(24).unwrap().successor().get(), 1);
        assert!(hour_of_day(JUNE1 + 1).is_err());
        assert_eq!(hour_of_day(-HOUR).unwrap().get(), 23);
    }
}
