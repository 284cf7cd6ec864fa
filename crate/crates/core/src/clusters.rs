//! Concrete clusters from CP components via top-N selection.
//!
//! A component's cluster is every trip whose pickup hour is among the top-N
//! hours of its time factor and whose dropoff tract is among the top-N tracts
//! of its dropoff factor. Pickup tracts are left unconstrained. Clusters of
//! different components may overlap.

use std::collections::BTreeSet;
use std::io::Write;

use crate::ingest::{transition_counts, TransitionCounts, Trip};
use crate::tensorfac::FactorSet;
use crate::{Error, Result};

/// Default top-N selection size.
pub const DEFAULT_TOP_N: usize = 10;

/// Indices of the `n` largest weights, descending, ties broken by lower index.
pub fn top_indices(column: &[f64], n: usize) -> Result<Vec<usize>> {
    if column.is_empty() {
        return Err(Error::InvalidParameter("cannot select from an empty vector".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("selection size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[b].total_cmp(&column[a]).then(a.cmp(&b)));
    order.truncate(n);
    Ok(order)
}

/// Selection conditions for one component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSpec {
    pub component: usize,
    pub top_hours: BTreeSet<usize>,
    pub top_dropoffs: BTreeSet<usize>,
    pub n: usize,
}

impl ClusterSpec {
    pub fn from_factors(f: &FactorSet, component: usize, n: usize) -> Result<Self> {
        if component >= f.rank() {
            return Err(Error::OutOfBounds {
                index: component,
                size: f.rank(),
            });
        }
        let hours = top_indices(&f.time.column(component).to_vec(), n)?;
        let dropoffs = top_indices(&f.dropoff.column(component).to_vec(), n)?;
        Ok(Self {
            component,
            top_hours: hours.into_iter().collect(),
            top_dropoffs: dropoffs.into_iter().collect(),
            n,
        })
    }

    pub fn contains(&self, trip: &Trip) -> bool {
        self.top_hours.contains(&trip.hour) && self.top_dropoffs.contains(&trip.dropoff_tract)
    }
}

/// Trips matching the spec's hour and dropoff conditions, in input order.
pub fn select_cluster_trips(trips: &[Trip], spec: &ClusterSpec) -> Vec<Trip> {
    trips.iter().filter(|t| spec.contains(t)).copied().collect()
}

/// Transition counts of one component's cluster.
pub fn cluster_counts(
    trips: &[Trip],
    f: &FactorSet,
    component: usize,
    n: usize,
    size: usize,
) -> Result<TransitionCounts> {
    let spec = ClusterSpec::from_factors(f, component, n)?;
    transition_counts(&select_cluster_trips(trips, &spec), size)
}

/// Writes `kind,index,weight` rows: the selected hours, then the selected
/// dropoff tracts, each in descending weight order.
pub fn write_membership<W: Write>(writer: W, f: &FactorSet, spec: &ClusterSpec) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["kind", "index", "weight"])?;
    let c = spec.component;
    for (kind, column) in [("hour", f.time.column(c)), ("dropoff", f.dropoff.column(c))] {
        let set = if kind == "hour" {
            &spec.top_hours
        } else {
            &spec.top_dropoffs
        };
        for index in top_indices(&column.to_vec(), spec.n)? {
            debug_assert!(set.contains(&index));
            wtr.write_record([kind.to_string(), index.to_string(), column[index].to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    #[test]
    fn top_indices_examples() {
        assert_eq!(top_indices(&[0.1, 0.9, 0.5], 2).unwrap(), vec![1, 2]);
        assert_eq!(top_indices(&[0.4, 0.4, 0.1], 1).unwrap(), vec![0]);
        assert_eq!(top_indices(&[0.2, 0.0, 0.7], 5).unwrap(), vec![2, 0, 1]);
        assert!(top_indices(&[], 1).is_err());
        assert!(top_indices(&[1.0], 0).is_err());
    }

    fn spec(hours: &[usize], dropoffs: &[usize]) -> ClusterSpec {
        ClusterSpec {
            component: 0,
            top_hours: hours.iter().copied().collect(),
            top_dropoffs: dropoffs.iter().copied().collect(),
            n: 10,
        }
    }

    #[test]
    fn selection_by_hour_and_dropoff() {
        let trip = Trip::new(9, 3, 7);
        assert_eq!(select_cluster_trips(&[trip], &spec(&[9], &[7])), vec![trip]);
        assert!(select_cluster_trips(&[trip], &spec(&[9], &[8])).is_empty());
        assert!(select_cluster_trips(&[trip], &spec(&[10], &[7])).is_empty());
    }

    #[test]
    fn pickup_never_affects_membership() {
        let s = spec(&[9], &[7]);
        for pickup in 0..20 {
            assert!(s.contains(&Trip::new(9, pickup, 7)));
            assert!(!s.contains(&Trip::new(8, pickup, 7)));
        }
    }

    fn two_component_factors() -> FactorSet {
        FactorSet {
            time: array![[0.5, 0.0], [0.5, 0.1], [0.0, 0.9]],
            pickup: array![[0.5, 0.5], [0.5, 0.5]],
            dropoff: array![[1.0, 0.2], [0.0, 0.8]],
            scale: Array1::from(vec![10.0, 5.0]),
        }
    }

    #[test]
    fn counts_per_component() {
        let f = two_component_factors();
        let trips = [
            Trip::new(0, 1, 0),
            Trip::new(1, 0, 0),
            Trip::new(2, 0, 1),
            Trip::new(2, 1, 1),
            Trip::new(0, 0, 1),
        ];
        let c0 = cluster_counts(&trips, &f, 0, 1, 2).unwrap();
        // top hour of component 0 is 0 (tie with 1, lower index), top dropoff 0.
        assert_eq!(c0.total(), 1);
        assert_eq!(c0.get(1, 0), 1);
        let c1 = cluster_counts(&trips, &f, 1, 1, 2).unwrap();
        assert_eq!(c1.total(), 2);
        assert_eq!(c1.get(0, 1), 1);
        assert_eq!(c1.get(1, 1), 1);

        // n covering every hour and tract selects everything.
        let all = cluster_counts(&trips, &f, 0, 3, 2).unwrap();
        assert_eq!(all, transition_counts(&trips, 2).unwrap());

        assert_eq!(cluster_counts(&[], &f, 0, 2, 2).unwrap().total(), 0);
        assert!(cluster_counts(&trips, &f, 2, 2, 2).is_err());
    }

    #[test]
    fn membership_export() {
        let f = two_component_factors();
        let spec = ClusterSpec::from_factors(&f, 1, 2).unwrap();
        let mut buf = Vec::new();
        write_membership(&mut buf, &f, &spec).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kind,index,weight\nhour,2,0.9\nhour,1,0.1\ndropoff,1,0.8\ndropoff,0,0.2\n"
        );
    }

    proptest! {
        #[test]
        fn growing_n_never_removes_trips(
            weights in proptest::collection::vec(0.0f64..1.0, 6),
            trips in proptest::collection::vec((0usize..6, 0usize..6, 0usize..6), 0..40),
            n in 1usize..6,
        ) {
            let col = Array1::from(weights.clone());
            let f = FactorSet {
                time: col.clone().insert_axis(ndarray::Axis(1)),
                pickup: col.clone().insert_axis(ndarray::Axis(1)),
                dropoff: Array1::from(weights.iter().rev().copied().collect::<Vec<_>>()).insert_axis(ndarray::Axis(1)),
                scale: Array1::from(vec![1.0]),
            };
            let trips: Vec<Trip> = trips.into_iter().map(|(h, p, d)| Trip::new(h, p, d)).collect();
            let small = select_cluster_trips(&trips, &ClusterSpec::from_factors(&f, 0, n).unwrap());
            let large = select_cluster_trips(&trips, &ClusterSpec::from_factors(&f, 0, n + 1).unwrap());
            prop_assert!(small.iter().all(|t| large.contains(t)));

            let full = transition_counts(&trips, 6).unwrap();
            let part = cluster_counts(&trips, &f, 0, n, 6).unwrap();
            prop_assert!(part.counts().iter().zip(full.counts().iter()).all(|(a, b)| a <= b));
        }
    }
}
