//! GPS to UTC conversion checked against hifitime's independent leap table.

use hifitime::Epoch;
use scint_core::ingest::{gps_to_utc_auto, utc_to_gps, GnssTime, GPS_EPOCH_UNIX};
use scint_core::rng::SeededRng;

// UTC dates on which GPS-UTC stepped up by one second, 1981 onward.
const LEAP_DATES: [(i32, u8, u8); 18] = [
    (1981, 7, 1),
    (1982, 7, 1),
    (1983, 7, 1),
    (1985, 7, 1),
    (1988, 1, 1),
    (1990, 1, 1),
    (1991, 1, 1),
    (1992, 7, 1),
    (1993, 7, 1),
    (1994, 7, 1),
    (1996, 1, 1),
    (1997, 7, 1),
    (1999, 1, 1),
    (2006, 1, 1),
    (2009, 1, 1),
    (2012, 7, 1),
    (2015, 7, 1),
    (2017, 1, 1),
];

fn oracle_unix(gps_seconds: i64) -> i64 {
    let unix = Epoch::from_gpst_seconds(gps_seconds as f64).to_unix_seconds();
    assert_eq!(unix.fract(), 0.0);
    unix as i64
}

fn ours_unix(gps_seconds: i64) -> i64 {
    let t = GnssTime::from_gps_seconds(gps_seconds).unwrap();
    gps_to_utc_auto(t).unwrap().unix_seconds()
}

#[test]
fn random_instants_match_hifitime() {
    // 1980-01-06 through 2024-12-31.
    let span = 1_735_603_200 - GPS_EPOCH_UNIX;
    let mut rng = SeededRng::new(2024);
    for _ in 0..100 {
        let gps = rng.below(span as usize) as i64;
        assert_eq!(ours_unix(gps), oracle_unix(gps), "gps seconds {gps}");
        let t = GnssTime::from_gps_seconds(gps).unwrap();
        let week_tow = t.week_number() as i64 * 604_800 + t.time_of_week() as i64;
        assert_eq!(week_tow, gps);
    }
}

#[test]
fn leap_boundaries_match_hifitime() {
    for (n, &(y, m, d)) in LEAP_DATES.iter().enumerate() {
        let new_offset = n as i64 + 1;
        let midnight = Epoch::from_gregorian_utc_at_midnight(y, m, d).to_unix_seconds() as i64;
        // GPS instant of the first UTC second carrying the new offset. The one
        // before it is the inserted second, which has no Unix representation.
        let start = midnight - GPS_EPOCH_UNIX + new_offset;
        for delta in [-86_400, -3_600, -60, 0, 1, 2, 3_600, 86_400] {
            let gps = start + delta;
            assert_eq!(ours_unix(gps), oracle_unix(gps), "{y}-{m}-{d} delta {delta}");
        }
        // hifitime switches offsets TAI-UTC seconds early, so in the last
        // minute before the step the old offset is checked by hand.
        for delta in -59..=-2 {
            let gps = start + delta;
            assert_eq!(ours_unix(gps), midnight + delta + 1, "{y}-{m}-{d} delta {delta}");
        }
        assert_eq!(ours_unix(start), midnight);
    }
}

#[test]
fn utc_round_trip_away_from_inserted_seconds() {
    let mut rng = SeededRng::new(7);
    for _ in 0..1_000 {
        let gps = rng.below(1_400_000_000) as i64;
        let utc = gps_to_utc_auto(GnssTime::from_gps_seconds(gps).unwrap()).unwrap();
        let back = utc_to_gps(utc).unwrap();
        let back = back.week_number() as i64 * 604_800 + back.time_of_week() as i64;
        // Only an inserted second maps onto the following second.
        assert!(back == gps || back == gps + 1, "{gps} -> {back}");
    }
}

