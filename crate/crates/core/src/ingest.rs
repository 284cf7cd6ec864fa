//! Trip record parsing, cleaning and transition counting.

use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDateTime;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::geo::{hour_of_week, locate, GeoPoint, StateSpace, HOURS_PER_WEEK};
use crate::{Error, Result};

/// One raw ride as read from a trips file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTripRecord {
    pub pickup_datetime: NaiveDateTime,
    pub pickup: GeoPoint,
    pub dropoff: GeoPoint,
    /// Miles, as reported.
    pub trip_distance: f64,
    pub trip_time_in_secs: f64,
    pub passenger_count: i64,
}

/// A row that could not be turned into a [`RawTripRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct MalformedRecord {
    pub line: u64,
    pub reason: String,
}

/// A cleaned ride mapped onto the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trip {
    pub hour: usize,
    pub pickup_tract: usize,
    pub dropoff_tract: usize,
}

impl Trip {
    pub fn new(hour: usize, pickup_tract: usize, dropoff_tract: usize) -> Self {
        Self {
            hour,
            pickup_tract,
            dropoff_tract,
        }
    }
}

/// Why a record was dropped by [`clean_trips`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    Malformed,
    Distance,
    Duration,
    Passengers,
    OutOfArea,
    SelfLoop,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        RejectReason::Malformed,
        RejectReason::Distance,
        RejectReason::Duration,
        RejectReason::Passengers,
        RejectReason::OutOfArea,
        RejectReason::SelfLoop,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Malformed => "malformed",
            RejectReason::Distance => "distance",
            RejectReason::Duration => "duration",
            RejectReason::Passengers => "passengers",
            RejectReason::OutOfArea => "out_of_area",
            RejectReason::SelfLoop => "self_loop",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-reason rejection counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RejectionTally {
    counts: [usize; 6],
}

impl RejectionTally {
    pub fn add(&mut self, reason: RejectReason) {
        self.counts[reason as usize] += 1;
    }

    pub fn get(&self, reason: RejectReason) -> usize {
        self.counts[reason as usize]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Reasons with a nonzero count, in declaration order.
    pub fn nonzero(&self) -> impl Iterator<Item = (RejectReason, usize)> + '_ {
        RejectReason::ALL
            .iter()
            .map(|r| (*r, self.get(*r)))
            .filter(|(_, c)| *c > 0)
    }
}

/// Output of [`clean_trips`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleanedTrips {
    pub trips: Vec<Trip>,
    pub rejected: RejectionTally,
}

/// Applies the record filters and maps both endpoints onto tracts.
///
/// Each rejected record is counted once, under the first failing check in the
/// order: malformed, distance, duration, passengers, out of area, self loop.
pub fn clean_trips<'a, I>(records: I, space: &StateSpace, exclude_self_loops: bool) -> CleanedTrips
where
    I: IntoIterator<Item = &'a Result<RawTripRecord, MalformedRecord>>,
{
    let mut out = CleanedTrips::default();
    for record in records {
        match classify(record, space, exclude_self_loops) {
            Ok(trip) => out.trips.push(trip),
            Err(reason) => out.rejected.add(reason),
        }
    }
    out
}

fn classify(
    record: &Result<RawTripRecord, MalformedRecord>,
    space: &StateSpace,
    exclude_self_loops: bool,
) -> Result<Trip, RejectReason> {
    let r = record.as_ref().map_err(|_| RejectReason::Malformed)?;
    // NaN fails these comparisons and is rejected with them.
    if r.trip_distance.is_nan() || r.trip_distance <= 0.0 {
        return Err(RejectReason::Distance);
    }
    if r.trip_time_in_secs.is_nan() || r.trip_time_in_secs <= 0.0 {
        return Err(RejectReason::Duration);
    }
    if r.passenger_count <= 0 {
        return Err(RejectReason::Passengers);
    }
    let pickup = locate(r.pickup, space).ok_or(RejectReason::OutOfArea)?;
    let dropoff = locate(r.dropoff, space).ok_or(RejectReason::OutOfArea)?;
    if exclude_self_loops && pickup == dropoff {
        return Err(RejectReason::SelfLoop);
    }
    Ok(Trip::new(hour_of_week(&r.pickup_datetime), pickup, dropoff))
}

/// Observed transition counts `n_ij` between tracts.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounts {
    counts: Array2<u64>,
    total: u64,
}

impl TransitionCounts {
    pub fn zeros(size: usize) -> Self {
        Self {
            counts: Array2::zeros((size, size)),
            total: 0,
        }
    }

    pub fn from_matrix(counts: Array2<u64>) -> Result<Self> {
        let (rows, cols) = counts.dim();
        if rows != cols {
            return Err(Error::ShapeMismatch(format!(
                "transition counts must be square, got {rows}x{cols}"
            )));
        }
        let total = counts.sum();
        Ok(Self { counts, total })
    }

    pub fn size(&self) -> usize {
        self.counts.nrows()
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[[i, j]]
    }
}

/// Counts pickup→dropoff transitions over `size` tracts.
pub fn transition_counts(trips: &[Trip], size: usize) -> Result<TransitionCounts> {
    let mut out = TransitionCounts::zeros(size);
    for trip in trips {
        for index in [trip.pickup_tract, trip.dropoff_tract] {
            if index >= size {
                return Err(Error::OutOfBounds { index, size });
            }
        }
        out.counts[[trip.pickup_tract, trip.dropoff_tract]] += 1;
        out.total += 1;
    }
    Ok(out)
}

const TRIP_COLUMNS: [&str; 8] = [
    "pickup_datetime",
    "pickup_lat",
    "pickup_lon",
    "dropoff_lat",
    "dropoff_lon",
    "trip_distance",
    "trip_time_in_secs",
    "passenger_count",
];

/// Parses an ISO-8601 local timestamp (`T` or space separated, optional
/// fractional seconds).
pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
}

/// Reads a trips file. A missing header column is fatal; any bad row becomes
/// a [`MalformedRecord`] in place.
pub fn read_trip_records<R: Read>(reader: R) -> Result<Vec<Result<RawTripRecord, MalformedRecord>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 8];
    for (slot, name) in cols.iter_mut().zip(TRIP_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("trips file is missing column `{name}`")))?;
    }

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let parsed = match record {
            Ok(record) => parse_trip_row(&record, &cols).map_err(|reason| MalformedRecord { line, reason }),
            Err(e) => Err(MalformedRecord {
                line,
                reason: e.to_string(),
            }),
        };
        out.push(parsed);
    }
    Ok(out)
}

fn parse_trip_row(record: &csv::StringRecord, cols: &[usize; 8]) -> Result<RawTripRecord, String> {
    let field = |k: usize| {
        record
            .get(cols[k])
            .ok_or_else(|| format!("missing `{}`", TRIP_COLUMNS[k]))
    };
    let number = |k: usize| -> Result<f64, String> {
        let text = field(k)?;
        text.parse::<f64>()
            .map_err(|_| format!("`{}` is not a number: `{text}`", TRIP_COLUMNS[k]))
    };
    let when = field(0)?;
    let pickup_datetime = parse_timestamp(when).ok_or_else(|| format!("bad timestamp `{when}`"))?;
    let pickup = GeoPoint::new(number(1)?, number(2)?).map_err(|e| e.to_string())?;
    let dropoff = GeoPoint::new(number(3)?, number(4)?).map_err(|e| e.to_string())?;
    let passengers = field(7)?;
    let passenger_count = passengers
        .parse::<i64>()
        .map_err(|_| format!("`passenger_count` is not an integer: `{passengers}`"))?;
    Ok(RawTripRecord {
        pickup_datetime,
        pickup,
        dropoff,
        trip_distance: number(5)?,
        trip_time_in_secs: number(6)?,
        passenger_count,
    })
}

/// Writes raw records in the trips file format.
pub fn write_trip_records<W: Write>(writer: W, records: &[RawTripRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TRIP_COLUMNS)?;
    for r in records {
        wtr.write_record([
            r.pickup_datetime.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.pickup.lat().to_string(),
            r.pickup.lon().to_string(),
            r.dropoff.lat().to_string(),
            r.dropoff.lon().to_string(),
            r.trip_distance.to_string(),
            r.trip_time_in_secs.to_string(),
            r.passenger_count.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes cleaned trips as `hour,pickup_tract,dropoff_tract`.
pub fn write_trips<W: Write>(writer: W, trips: &[Trip]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for trip in trips {
        wtr.serialize(trip)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads cleaned trips written by [`write_trips`], validating the hour range.
pub fn read_trips<R: Read>(reader: R) -> Result<Vec<Trip>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut trips = Vec::new();
    for trip in rdr.deserialize() {
        let trip: Trip = trip?;
        if trip.hour >= HOURS_PER_WEEK {
            return Err(Error::OutOfBounds {
                index: trip.hour,
                size: HOURS_PER_WEEK,
            });
        }
        trips.push(trip);
    }
    Ok(trips)
}

/// Writes nonzero counts as `pickup,dropoff,count` in row-major order.
pub fn write_counts<W: Write>(writer: W, counts: &TransitionCounts) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["pickup", "dropoff", "count"])?;
    for ((i, j), c) in counts.counts().indexed_iter() {
        if *c > 0 {
            wtr.write_record([i.to_string(), j.to_string(), c.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a sparse counts file written by [`write_counts`].
pub fn read_counts<R: Read>(reader: R, size: usize) -> Result<TransitionCounts> {
    #[derive(Deserialize)]
    struct Row {
        pickup: usize,
        dropoff: usize,
        count: u64,
    }
    let mut counts = Array2::zeros((size, size));
    let mut rdr = csv::Reader::from_reader(reader);
    for row in rdr.deserialize() {
        let row: Row = row?;
        for index in [row.pickup, row.dropoff] {
            if index >= size {
                return Err(Error::OutOfBounds { index, size });
            }
        }
        counts[[row.pickup, row.dropoff]] += row.count;
    }
    TransitionCounts::from_matrix(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Tract;
    use std::collections::BTreeMap;

    fn square_space() -> StateSpace {
        // Two unit squares side by side in (lat, lon) degrees.
        let sq = |lon0: f64| {
            vec![
                GeoPoint::new(0.0, lon0).unwrap(),
                GeoPoint::new(0.0, lon0 + 1.0).unwrap(),
                GeoPoint::new(1.0, lon0 + 1.0).unwrap(),
                GeoPoint::new(1.0, lon0).unwrap(),
            ]
        };
        let tracts = (0..2)
            .map(|i| {
                Tract::new(
                    format!("T{i}"),
                    i,
                    GeoPoint::new(0.5, i as f64 + 0.5).unwrap(),
                    1.0,
                    Some(sq(i as f64)),
                    BTreeMap::new(),
                )
                .unwrap()
            })
            .collect();
        StateSpace::new(tracts).unwrap()
    }

    fn record(lon_from: f64, lon_to: f64) -> RawTripRecord {
        RawTripRecord {
            pickup_datetime: parse_timestamp("2013-01-09 09:15:00").unwrap(),
            pickup: GeoPoint::new(0.5, lon_from).unwrap(),
            dropoff: GeoPoint::new(0.5, lon_to).unwrap(),
            trip_distance: 1.2,
            trip_time_in_secs: 300.0,
            passenger_count: 1,
        }
    }

    #[test]
    fn cleaning_filters_and_tally() {
        let space = square_space();
        let mut records: Vec<Result<RawTripRecord, MalformedRecord>> = (0..10).map(|_| Ok(record(0.5, 1.5))).collect();
        if let Ok(r) = &mut records[1] {
            r.trip_distance = 0.0;
        }
        if let Ok(r) = &mut records[4] {
            r.trip_distance = -3.0;
        }
        if let Ok(r) = &mut records[6] {
            r.passenger_count = 0;
        }
        if let Ok(r) = &mut records[8] {
            r.dropoff = GeoPoint::new(5.0, 5.0).unwrap();
        }
        let out = clean_trips(&records, &space, true);
        assert_eq!(out.trips.len(), 6);
        assert_eq!(out.rejected.get(RejectReason::Distance), 2);
        assert_eq!(out.rejected.get(RejectReason::Passengers), 1);
        assert_eq!(out.rejected.get(RejectReason::OutOfArea), 1);
        assert_eq!(out.rejected.total(), 4);
        assert!(out.trips.iter().all(|t| *t == Trip::new(57, 0, 1)));
    }

    #[test]
    fn self_loops_follow_the_flag() {
        let space = square_space();
        let records = vec![Ok(record(0.2, 0.8))];
        let out = clean_trips(&records, &space, true);
        assert!(out.trips.is_empty());
        assert_eq!(out.rejected.get(RejectReason::SelfLoop), 1);
        let out = clean_trips(&records, &space, false);
        assert_eq!(out.trips, vec![Trip::new(57, 0, 0)]);
    }

    #[test]
    fn empty_input() {
        let space = square_space();
        let out = clean_trips(&[], &space, true);
        assert!(out.trips.is_empty());
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn malformed_rows_are_tallied() {
        let text = "pickup_datetime,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,trip_distance,trip_time_in_secs,passenger_count\n\
                    2013-01-07T00:30:00,0.5,0.5,0.5,1.5,1.0,60,1\n\
                    not-a-date,0.5,0.5,0.5,1.5,1.0,60,1\n\
                    2013-01-07T00:30:00,abc,0.5,0.5,1.5,1.0,60,1\n\
                    2013-01-07T00:30:00,95,0.5,0.5,1.5,1.0,60,1\n\
                    2013-01-07T00:30:00,0.5,0.5\n\
                    2013-01-13 23:59:00,0.5,1.5,0.5,0.5,1.0,60,2\n";
        let records = read_trip_records(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 6);
        let out = clean_trips(&records, &square_space(), true);
        assert_eq!(out.rejected.get(RejectReason::Malformed), 4);
        assert_eq!(out.trips, vec![Trip::new(0, 0, 1), Trip::new(167, 1, 0)]);
    }

    #[test]
    fn missing_header_is_fatal() {
        let text = "pickup_datetime,pickup_lat\n2013-01-07T00:30:00,0.5\n";
        assert!(read_trip_records(text.as_bytes()).is_err());
    }

    #[test]
    fn counting_transitions() {
        let trips = [Trip::new(0, 0, 1), Trip::new(5, 0, 1), Trip::new(9, 2, 0)];
        let counts = transition_counts(&trips, 3).unwrap();
        assert_eq!(counts.get(0, 1), 2);
        assert_eq!(counts.get(2, 0), 1);
        assert_eq!(counts.total(), 3);
        assert_eq!(counts.counts().sum(), 3);

        let empty = transition_counts(&[], 3).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(empty.counts().iter().all(|c| *c == 0));

        assert!(matches!(
            transition_counts(&[Trip::new(0, 3, 0)], 3),
            Err(Error::OutOfBounds { index: 3, size: 3 })
        ));
    }

    #[test]
    fn counts_and_trips_files() {
        let trips = vec![Trip::new(1, 0, 2), Trip::new(2, 0, 2), Trip::new(3, 1, 0)];
        let mut buf = Vec::new();
        write_trips(&mut buf, &trips).unwrap();
        assert_eq!(read_trips(buf.as_slice()).unwrap(), trips);

        let counts = transition_counts(&trips, 3).unwrap();
        let mut buf = Vec::new();
        write_counts(&mut buf, &counts).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "pickup,dropoff,count\n0,2,2\n1,0,1\n"
        );
        assert_eq!(read_counts(buf.as_slice(), 3).unwrap(), counts);
        assert!(read_counts(buf.as_slice(), 2).is_err());
    }
}
