//! Event stream data model, validation and time-window sequencing.
//!
//! All timestamps are integer microseconds. Streams are sorted by time, and
//! events sharing a timestamp keep their construction order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Microseconds.
pub type Timestamp = u64;

/// A single brightness-change report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub t: Timestamp,
    pub x: u16,
    pub y: u16,
    /// -1 or +1.
    pub p: i8,
}

impl Event {
    pub const fn new(t: Timestamp, x: u16, y: u16, p: i8) -> Self {
        Self { t, x, y, p }
    }

    pub fn is_positive(&self) -> bool {
        self.p > 0
    }

    /// Canonical ordering key used when merging per-pixel event lists.
    pub fn sort_key(&self) -> (Timestamp, u16, u16, i8) {
        (self.t, self.y, self.x, self.p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    /// DAVIS346 resolution.
    pub const DAVIS346: SensorGeometry = SensorGeometry {
        width: 346,
        height: 260,
    };

    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!(
                "sensor geometry must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self::DAVIS346
    }
}

impl fmt::Display for SensorGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    XOutOfBounds { x: u16, width: u16 },
    YOutOfBounds { y: u16, height: u16 },
    InvalidPolarity(i8),
    TimestampInversion { previous: Timestamp, current: Timestamp },
}

/// First invariant violation found in a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::XOutOfBounds { x, width } => {
                write!(f, "event {}: x={} outside width {}", self.index, x, width)
            }
            ViolationKind::YOutOfBounds { y, height } => {
                write!(f, "event {}: y={} outside height {}", self.index, y, height)
            }
            ViolationKind::InvalidPolarity(p) => {
                write!(f, "event {}: polarity {} is not -1 or +1", self.index, p)
            }
            ViolationKind::TimestampInversion { previous, current } => write!(
                f,
                "event {}: timestamp {} precedes previous timestamp {}",
                self.index, current, previous
            ),
        }
    }
}

impl std::error::Error for Violation {}

/// Checks geometry bounds, polarity values and time ordering.
pub fn validate_events(geometry: SensorGeometry, events: &[Event]) -> Result<(), Violation> {
    let mut previous: Option<Timestamp> = None;
    for (index, e) in events.iter().enumerate() {
        let kind = if e.x >= geometry.width {
            Some(ViolationKind::XOutOfBounds {
                x: e.x,
                width: geometry.width,
            })
        } else if e.y >= geometry.height {
            Some(ViolationKind::YOutOfBounds {
                y: e.y,
                height: geometry.height,
            })
        } else if e.p != 1 && e.p != -1 {
            Some(ViolationKind::InvalidPolarity(e.p))
        } else {
            match previous {
                Some(prev) if e.t < prev => Some(ViolationKind::TimestampInversion {
                    previous: prev,
                    current: e.t,
                }),
                _ => None,
            }
        };
        if let Some(kind) = kind {
            return Err(Violation { index, kind });
        }
        previous = Some(e.t);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
}

impl EventStream {
    /// Builds a stream, rejecting any invariant violation.
    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Result<Self> {
        validate_events(geometry, &events)?;
        Ok(Self { geometry, events })
    }

    /// Builds a stream without checking; call [`EventStream::validate`] before use.
    pub fn from_raw(geometry: SensorGeometry, events: Vec<Event>) -> Self {
        Self { geometry, events }
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            events: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate_events(self.geometry, &self.events)
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_time(&self) -> Option<Timestamp> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_time(&self) -> Option<Timestamp> {
        self.events.last().map(|e| e.t)
    }

    /// The whole stream as a single window closed at both ends.
    pub fn as_window(&self) -> TimeWindow<'_> {
        let (t_start, t_end) = match (self.first_time(), self.last_time()) {
            (Some(a), Some(b)) => (a, b.max(a + 1)),
            _ => (0, 1),
        };
        TimeWindow {
            t_start,
            t_end,
            end_inclusive: true,
            events: &self.events,
        }
    }

    /// Events with `t0 <= t < t1`, order preserved. Returns an empty stream when `t0 >= t1`.
    pub fn slice(&self, t0: Timestamp, t1: Timestamp) -> EventStream {
        if t0 >= t1 {
            return EventStream::empty(self.geometry);
        }
        let lo = self.events.partition_point(|e| e.t < t0);
        let hi = self.events.partition_point(|e| e.t < t1);
        EventStream {
            geometry: self.geometry,
            events: self.events[lo..hi].to_vec(),
        }
    }

    pub fn stats(&self) -> StreamStats {
        stream_stats(self)
    }
}

/// A contiguous view of a stream covering `[t_start, t_end)`, or `[t_start, t_end]`
/// when `end_inclusive` is set (final window of a sequence).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeWindow<'a> {
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub end_inclusive: bool,
    pub events: &'a [Event],
}

impl<'a> TimeWindow<'a> {
    pub fn new(t_start: Timestamp, t_end: Timestamp, events: &'a [Event]) -> Result<Self> {
        if t_start >= t_end {
            return Err(invalid(format!(
                "window start {t_start} must precede end {t_end}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            end_inclusive: false,
            events,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn contains_time(&self, t: Timestamp) -> bool {
        t >= self.t_start && (t < self.t_end || (self.end_inclusive && t == self.t_end))
    }

    pub fn first_time(&self) -> Option<Timestamp> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_time(&self) -> Option<Timestamp> {
        self.events.last().map(|e| e.t)
    }

    pub fn to_stream(&self, geometry: SensorGeometry) -> EventStream {
        EventStream::from_raw(geometry, self.events.to_vec())
    }
}

/// Splits `[t_1, t_N]` into blocks of `delta_t`, each divided into `n` sub-windows.
///
/// Sub-window widths are `delta_t / n` in integer arithmetic; the remainder goes
/// to the last sub-window of each block. The final window also contains `t_N`.
pub fn window_by_time(
    stream: &EventStream,
    delta_t: Timestamp,
    n: usize,
) -> Result<Vec<TimeWindow<'_>>> {
    check_window_args(delta_t, n)?;
    match (stream.first_time(), stream.last_time()) {
        (Some(first), Some(last)) => Ok(windows_over(stream.events(), first, last, delta_t, n)),
        _ => Ok(Vec::new()),
    }
}

/// Same block layout as [`window_by_time`] but anchored at `origin` and covering
/// `[origin, last]`; events outside that range are not assigned to any window.
pub fn window_span(
    events: &[Event],
    origin: Timestamp,
    last: Timestamp,
    delta_t: Timestamp,
    n: usize,
) -> Result<Vec<TimeWindow<'_>>> {
    check_window_args(delta_t, n)?;
    if last < origin {
        return Err(invalid(format!(
            "window span end {last} precedes origin {origin}"
        )));
    }
    Ok(windows_over(events, origin, last, delta_t, n))
}

fn check_window_args(delta_t: Timestamp, n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("window count n must be positive"));
    }
    if delta_t < n as Timestamp {
        return Err(invalid(format!(
            "delta_t ({delta_t} us) must be at least n ({n}) so sub-windows span >= 1 us"
        )));
    }
    Ok(())
}

/// Window boundaries `(start, end)` for a span; shared by the windowing functions.
pub fn window_bounds(
    origin: Timestamp,
    last: Timestamp,
    delta_t: Timestamp,
    n: usize,
) -> Vec<(Timestamp, Timestamp)> {
    let span = last - origin;
    let blocks = span.div_ceil(delta_t).max(1);
    let base = delta_t / n as Timestamp;
    let mut out = Vec::with_capacity(blocks as usize * n);
    for b in 0..blocks {
        let block_start = origin + b * delta_t;
        for j in 0..n {
            let start = block_start + j as Timestamp * base;
            let end = if j + 1 == n {
                block_start + delta_t
            } else {
                start + base
            };
            out.push((start, end));
        }
    }
    out
}

/// Window bounds plus the index range of the events each window holds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowRange {
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub end_inclusive: bool,
    pub events: std::ops::Range<usize>,
}

/// Index ranges for the windows of `[origin, last]` over sorted `events`.
pub fn window_ranges(
    events: &[Event],
    origin: Timestamp,
    last: Timestamp,
    delta_t: Timestamp,
    n: usize,
) -> Result<Vec<WindowRange>> {
    check_window_args(delta_t, n)?;
    if last < origin {
        return Err(invalid(format!(
            "window span end {last} precedes origin {origin}"
        )));
    }
    let bounds = window_bounds(origin, last, delta_t, n);
    let count = bounds.len();
    let mut lo = events.partition_point(|e| e.t < origin);
    Ok(bounds
        .into_iter()
        .enumerate()
        .map(|(i, (t_start, t_end))| {
            let end_inclusive = i + 1 == count;
            let hi = if end_inclusive {
                // `last <= t_end` always holds, so this closes the final window at `last`.
                events.partition_point(|e| e.t <= last)
            } else {
                events.partition_point(|e| e.t < t_end)
            }
            .max(lo);
            let r = WindowRange {
                t_start,
                t_end,
                end_inclusive,
                events: lo..hi,
            };
            lo = hi;
            r
        })
        .collect())
}

fn windows_over(
    events: &[Event],
    origin: Timestamp,
    last: Timestamp,
    delta_t: Timestamp,
    n: usize,
) -> Vec<TimeWindow<'_>> {
    window_ranges(events, origin, last, delta_t, n)
        .expect("arguments checked by caller")
        .into_iter()
        .map(|r| TimeWindow {
            t_start: r.t_start,
            t_end: r.t_end,
            end_inclusive: r.end_inclusive,
            events: &events[r.events],
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StreamStats {
    pub count: usize,
    /// `t_N - t_1` in microseconds.
    pub duration_us: Timestamp,
    /// Events per second over the duration; 0 for empty or single-instant streams.
    pub mean_rate_hz: f64,
    /// Fraction of positive events; 0.5 for an empty stream.
    pub polarity_balance: f64,
    pub positive: usize,
    pub negative: usize,
}

pub fn stream_stats(stream: &EventStream) -> StreamStats {
    let count = stream.len();
    let positive = stream.events().iter().filter(|e| e.p > 0).count();
    let duration_us = match (stream.first_time(), stream.last_time()) {
        (Some(a), Some(b)) => b - a,
        _ => 0,
    };
    let mean_rate_hz = if duration_us > 0 {
        count as f64 / (duration_us as f64 * 1e-6)
    } else {
        0.0
    };
    let polarity_balance = if count == 0 {
        0.5
    } else {
        positive as f64 / count as f64
    };
    StreamStats {
        count,
        duration_us,
        mean_rate_hz,
        polarity_balance,
        positive,
        negative: count - positive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> SensorGeometry {
        SensorGeometry::DAVIS346
    }

    fn at_times(ts: &[Timestamp]) -> EventStream {
        let events = ts.iter().map(|&t| Event::new(t, 1, 1, 1)).collect();
        EventStream::from_raw(geom(), events)
    }

    #[test]
    fn empty_stream_is_valid() {
        assert!(EventStream::empty(geom()).validate().is_ok());
    }

    #[test]
    fn inversion_reported_at_second_index() {
        let v = at_times(&[5, 3]).validate().unwrap_err();
        assert_eq!(v.index, 1);
        assert!(matches!(v.kind, ViolationKind::TimestampInversion { .. }));
    }

    #[test]
    fn x_out_of_bounds() {
        let s = EventStream::from_raw(geom(), vec![Event::new(0, 400, 10, 1)]);
        let v = s.validate().unwrap_err();
        assert_eq!(v.index, 0);
        assert!(matches!(v.kind, ViolationKind::XOutOfBounds { x: 400, .. }));
    }

    #[test]
    fn bad_polarity() {
        let s = EventStream::from_raw(geom(), vec![Event::new(0, 1, 1, 0)]);
        assert!(matches!(
            s.validate().unwrap_err().kind,
            ViolationKind::InvalidPolarity(0)
        ));
        assert!(EventStream::new(geom(), vec![Event::new(0, 1, 1, 2)]).is_err());
    }

    #[test]
    fn zero_geometry_rejected() {
        assert!(SensorGeometry::new(0, 5).is_err());
        assert!(SensorGeometry::new(5, 0).is_err());
    }

    #[test]
    fn windows_on_10khz_stream() {
        let ts: Vec<Timestamp> = (0..9).map(|k| k * 10_000).chain([99_000]).collect();
        let s = at_times(&ts);
        let w = window_by_time(&s, 33_333, 1).unwrap();
        // Direct assignment: [0,33333) [33333,66666) [66666,99999]
        let oracle = |lo: u64, hi: u64| ts.iter().filter(|&&t| t >= lo && t < hi).count();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].len(), oracle(0, 33_333));
        assert_eq!(w[1].len(), oracle(33_333, 66_666));
        assert_eq!(w[2].len(), oracle(66_666, 99_999));
        assert_eq!(
            w.iter().map(|w| w.len()).collect::<Vec<_>>(),
            vec![4, 3, 3]
        );
    }

    #[test]
    fn single_event_three_subwindows() {
        let s = at_times(&[0]);
        let w = window_by_time(&s, 33_333, 3).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!((w[0].t_start, w[0].t_end), (0, 11_111));
        assert_eq!(w[0].len(), 1);
        assert!(w[1].is_empty() && w[2].is_empty());
        // remainder of 33333 / 3 is zero; last window ends at the block end
        assert_eq!(w[2].t_end, 33_333);
    }

    #[test]
    fn remainder_goes_to_last_subwindow() {
        let s = at_times(&[0, 99]);
        let w = window_by_time(&s, 100, 3).unwrap();
        let bounds: Vec<_> = w.iter().map(|w| (w.t_start, w.t_end)).collect();
        assert_eq!(bounds, vec![(0, 33), (33, 66), (66, 100)]);
    }

    #[test]
    fn last_window_includes_t_n_on_boundary() {
        let s = at_times(&[0, 33_333]);
        let w = window_by_time(&s, 33_333, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].len(), 2);
        assert!(w[0].end_inclusive);
    }

    #[test]
    fn frame_rate_window() {
        // 30 fps source, one sub-window per frame gap
        let s = at_times(&[0, 10, 40_000]);
        let w = window_by_time(&s, 1_000_000 / 30, 1).unwrap();
        assert_eq!(w[0].t_end - w[0].t_start, 33_333);
    }

    #[test]
    fn window_args_checked() {
        let s = at_times(&[0]);
        assert!(window_by_time(&s, 2, 3).is_err());
        assert!(window_by_time(&s, 10, 0).is_err());
        assert!(window_by_time(&EventStream::empty(geom()), 10, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn slice_semantics() {
        assert!(EventStream::empty(geom()).slice(0, 10).is_empty());
        let s = at_times(&[1, 5, 9]);
        let sl = s.slice(2, 9);
        assert_eq!(sl.events().iter().map(|e| e.t).collect::<Vec<_>>(), vec![5]);
        assert_eq!(s.slice(1, 10), s);
    }

    #[test]
    fn stats() {
        let empty = stream_stats(&EventStream::empty(geom()));
        assert_eq!(empty.count, 0);
        assert_eq!(empty.mean_rate_hz, 0.0);

        let ts: Vec<Timestamp> = (0..100).map(|k| k * 1_000_000 / 99).collect();
        let mut s = at_times(&ts);
        *s.events.last_mut().unwrap() = Event::new(1_000_000, 1, 1, 1);
        let st = s.stats();
        assert_eq!(st.duration_us, 1_000_000);
        assert!((st.mean_rate_hz - 100.0).abs() < 1e-9);

        let balanced = EventStream::from_raw(
            geom(),
            vec![Event::new(0, 0, 0, 1), Event::new(1, 0, 0, -1)],
        );
        assert_eq!(balanced.stats().polarity_balance, 0.5);
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        prop::collection::vec((0u64..200_000, 0u16..32, 0u16..32, any::<bool>()), 0..300)
            .prop_map(|mut raw| {
                raw.sort_by_key(|r| r.0);
                let events = raw
                    .into_iter()
                    .map(|(t, x, y, p)| Event::new(t, x, y, if p { 1 } else { -1 }))
                    .collect();
                EventStream::new(SensorGeometry::new(32, 32).unwrap(), events).unwrap()
            })
    }

    proptest! {
        #[test]
        fn windows_partition_stream(s in arb_stream(), delta_t in 1u64..100_000, n in 1usize..5) {
            prop_assume!(delta_t >= n as u64);
            let windows = window_by_time(&s, delta_t, n).unwrap();
            let total: usize = windows.iter().map(|w| w.len()).sum();
            prop_assert_eq!(total, s.len());
            let mut flat = Vec::new();
            for w in &windows {
                for e in w.events {
                    prop_assert!(w.contains_time(e.t));
                }
                flat.extend_from_slice(w.events);
            }
            prop_assert_eq!(flat.as_slice(), s.events());
            for pair in windows.windows(2) {
                prop_assert_eq!(pair[0].t_end, pair[1].t_start);
            }
            let again = window_by_time(&s, delta_t, n).unwrap();
            prop_assert_eq!(windows, again);
        }

        #[test]
        fn full_slice_is_identity(s in arb_stream()) {
            if let (Some(a), Some(b)) = (s.first_time(), s.last_time()) {
                prop_assert_eq!(s.slice(a, b + 1), s);
            }
        }
    }
}
