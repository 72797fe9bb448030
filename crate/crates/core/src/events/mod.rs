//! Event ingestion and binning.
//!
//! Tactile events arrive as `(timestamp, taxel, channel)` triples. Binning maps them onto
//! a fixed grid of `bin_width`-second frames; a cell is 1 when at least one event landed
//! in it, so the network always sees binary spikes.

mod manifest;
mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array3, ArrayView3};

use crate::error::{Error, Result};
use crate::graph::strip_comment;

pub use manifest::{load_manifest, Dataset, DatasetManifest, ManifestEntry, Sample};
pub use synth::{generate_synthetic, SynthConfig, TemplateKind};

/// Bin width used for both published tactile datasets.
pub const DEFAULT_BIN_WIDTH: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub timestamp: f64,
    pub taxel: usize,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    duration: f64,
    num_taxels: usize,
    num_channels: usize,
}

impl EventStream {
    /// Validates ranges and sorts events by timestamp (stable).
    pub fn new(
        mut events: Vec<Event>,
        duration: f64,
        num_taxels: usize,
        num_channels: usize,
    ) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidParameter(format!("duration must be positive, got {duration}")));
        }
        if num_taxels == 0 || num_channels == 0 {
            return Err(Error::InvalidParameter("streams need at least one taxel and channel".into()));
        }
        for (i, e) in events.iter().enumerate() {
            check_event(e, duration, num_taxels, num_channels)
                .map_err(|msg| Error::InvalidParameter(format!("event {i}: {msg}")))?;
        }
        events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Ok(Self { events, duration, num_taxels, num_channels })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn num_taxels(&self) -> usize {
        self.num_taxels
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Per-taxel event counts summed over channels.
    pub fn taxel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_taxels];
        for e in &self.events {
            counts[e.taxel] += 1;
        }
        counts
    }

    /// Parses the event wire format.
    ///
    /// Header lines `taxels N`, `channels C` and `duration S` precede the events, which are
    /// `timestamp taxel_id channel` triples. `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let (mut taxels, mut channels, mut duration) = (None, None, None);
        let mut events = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let header = |value: &str| -> Result<usize> {
                value.parse().map_err(|_| Error::parse(path, lineno, format!("bad header value {value:?}")))
            };
            match fields.as_slice() {
                ["taxels", v] if events.is_empty() => taxels = Some(header(v)?),
                ["channels", v] if events.is_empty() => channels = Some(header(v)?),
                ["duration", v] if events.is_empty() => {
                    let d: f64 = v.parse().map_err(|_| Error::parse(path, lineno, "bad duration"))?;
                    if !(d.is_finite() && d > 0.0) {
                        return Err(Error::parse(path, lineno, "duration must be positive"));
                    }
                    duration = Some(d);
                }
                [t, n, c] => {
                    let (Some(nt), Some(nc), Some(d)) = (taxels, channels, duration) else {
                        return Err(Error::parse(
                            path,
                            lineno,
                            "event before the taxels/channels/duration header",
                        ));
                    };
                    let event = Event {
                        timestamp: t.parse().map_err(|_| Error::parse(path, lineno, "bad timestamp"))?,
                        taxel: n.parse().map_err(|_| Error::parse(path, lineno, "bad taxel id"))?,
                        channel: c.parse().map_err(|_| Error::parse(path, lineno, "bad channel"))?,
                    };
                    check_event(&event, d, nt, nc).map_err(|msg| Error::parse(path, lineno, msg))?;
                    events.push(event);
                }
                _ => return Err(Error::parse(path, lineno, format!("unrecognized line {line:?}"))),
            }
        }
        let missing = |what: &str| Error::Data { path: path.into(), msg: format!("missing `{what}` header") };
        let taxels = taxels.ok_or_else(|| missing("taxels"))?;
        let channels = channels.ok_or_else(|| missing("channels"))?;
        let duration = duration.ok_or_else(|| missing("duration"))?;
        Self::new(events, duration, taxels, channels)
            .map_err(|e| Error::Data { path: path.into(), msg: e.to_string() })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "taxels {}", self.num_taxels).unwrap();
        writeln!(out, "channels {}", self.num_channels).unwrap();
        writeln!(out, "duration {}", self.duration).unwrap();
        for e in &self.events {
            writeln!(out, "{} {} {}", e.timestamp, e.taxel, e.channel).unwrap();
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn check_event(e: &Event, duration: f64, taxels: usize, channels: usize) -> std::result::Result<(), String> {
    if !(0.0..=duration).contains(&e.timestamp) {
        return Err(format!("timestamp {} outside [0, {duration}]", e.timestamp));
    }
    if e.taxel >= taxels {
        return Err(format!("taxel id {} >= {taxels}", e.taxel));
    }
    if e.channel >= channels {
        return Err(format!("channel {} >= {channels}", e.channel));
    }
    Ok(())
}

pub fn load_event_file(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EventStream::parse(&text, path)
}

// Ratios within this relative distance of an integer are treated as that integer, so
// 6.5 s / 0.02 s is 325 bins and an event at 0.04 s lands in bin 2.
const SNAP: f64 = 1e-9;

fn snapped(ratio: f64) -> Option<f64> {
    let nearest = ratio.round();
    ((ratio - nearest).abs() <= SNAP * nearest.abs().max(1.0)).then_some(nearest)
}

/// `ceil(duration / bin_width)`, at least 1.
pub fn num_bins(duration: f64, bin_width: f64) -> usize {
    let ratio = duration / bin_width;
    (snapped(ratio).unwrap_or_else(|| ratio.ceil()) as usize).max(1)
}

fn bin_index(timestamp: f64, bin_width: f64, bins: usize) -> usize {
    let ratio = timestamp / bin_width;
    let idx = snapped(ratio).unwrap_or_else(|| ratio.floor()) as usize;
    idx.min(bins - 1)
}

/// Binary spike frames indexed `(t, taxel, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTensor {
    data: Array3<u8>,
    bin_width: f64,
}

impl SpikeTensor {
    pub fn new(data: Array3<u8>, bin_width: f64) -> Result<Self> {
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("spike tensor values must be 0 or 1".into()));
        }
        Ok(Self { data, bin_width })
    }

    pub fn data(&self) -> ArrayView3<'_, u8> {
        self.data.view()
    }

    pub fn timesteps(&self) -> usize {
        self.data.dim().0
    }

    pub fn num_taxels(&self) -> usize {
        self.data.dim().1
    }

    pub fn num_channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_frames(&self) -> Array3<f64> {
        self.data.mapv(f64::from)
    }
}

/// Bins a stream over its own duration.
pub fn bin_events(stream: &EventStream, bin_width: f64) -> Result<SpikeTensor> {
    bin_events_window(stream, bin_width, stream.duration())
}

/// Bins a stream over a fixed `window` (seconds), zero-padding past the stream's end.
pub fn bin_events_window(stream: &EventStream, bin_width: f64, window: f64) -> Result<SpikeTensor> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width must be positive, got {bin_width}")));
    }
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::InvalidParameter(format!("window must be positive, got {window}")));
    }
    let bins = num_bins(window, bin_width);
    let mut data = Array3::zeros((bins, stream.num_taxels(), stream.num_channels()));
    for e in stream.events() {
        if e.timestamp > window {
            return Err(Error::InvalidParameter(format!(
                "event at {} s lies past the {window} s window",
                e.timestamp
            )));
        }
        data[[bin_index(e.timestamp, bin_width, bins), e.taxel, e.channel]] = 1;
    }
    Ok(SpikeTensor { data, bin_width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(events: &[(f64, usize, usize)], duration: f64) -> EventStream {
        let events =
            events.iter().map(|&(timestamp, taxel, channel)| Event { timestamp, taxel, channel }).collect();
        EventStream::new(events, duration, 3, 2).unwrap()
    }

    #[test]
    fn empty_stream_bins_to_zeros() {
        let s = bin_events(&stream(&[], 1.0), 0.02).unwrap();
        assert_eq!(s.data().dim(), (50, 3, 2));
        assert_eq!(s.count_ones(), 0);
    }

    #[test]
    fn event_lands_in_floor_bin() {
        let s = bin_events(&stream(&[(0.03, 1, 0)], 1.0), 0.02).unwrap();
        assert_eq!(s.data()[[1, 1, 0]], 1);
        assert_eq!(s.count_ones(), 1);
    }

    #[test]
    fn bin_counts() {
        assert_eq!(num_bins(5.0, 0.02), 250);
        assert_eq!(num_bins(6.5, 0.02), 325);
        assert_eq!(num_bins(1.0, 0.3), 4);
        assert_eq!(bin_index(0.04, 0.02, 10), 2);
    }

    #[test]
    fn end_of_stream_goes_to_last_bin() {
        let s = bin_events(&stream(&[(1.0, 2, 1), (0.0, 0, 0)], 1.0), 0.02).unwrap();
        assert_eq!(s.data()[[49, 2, 1]], 1);
        assert_eq!(s.data()[[0, 0, 0]], 1);
    }

    #[test]
    fn window_pads_and_rejects_late_events() {
        let st = stream(&[(0.5, 0, 0)], 0.5);
        let s = bin_events_window(&st, 0.02, 1.0).unwrap();
        assert_eq!(s.timesteps(), 50);
        assert_eq!(s.data()[[25, 0, 0]], 1);
        assert!(bin_events_window(&st, 0.02, 0.25).is_err());
        assert!(bin_events(&st, 0.0).is_err());
    }

    #[test]
    fn repeated_events_clamp_to_one() {
        let s = bin_events(&stream(&[(0.1, 0, 0), (0.105, 0, 0)], 1.0), 0.02).unwrap();
        assert_eq!(s.count_ones(), 1);
    }

    #[test]
    fn parse_sorts_and_validates() {
        let text = "# sample\ntaxels 3\nchannels 2\nduration 1\n0.5 1 0\n0.1 2 1\n0.3 0 0\n";
        let s = EventStream::parse(text, Path::new("e")).unwrap();
        assert_eq!(s.len(), 3);
        let ts: Vec<f64> = s.events().iter().map(|e| e.timestamp).collect();
        assert_eq!(ts, [0.1, 0.3, 0.5]);

        let bad = "taxels 3\nchannels 2\nduration 1\n0.5 1 0\n0.1 3 0\n";
        let err = EventStream::parse(bad, Path::new("e")).unwrap_err();
        assert!(err.to_string().starts_with("e:5:"), "{err}");
        let late = "taxels 3\nchannels 2\nduration 1\n1.5 1 0\n";
        assert!(EventStream::parse(late, Path::new("e")).is_err());
        let headless = "0.5 1 0\n";
        assert!(EventStream::parse(headless, Path::new("e")).is_err());
        assert!(EventStream::parse("taxels 3\nchannels 2\n", Path::new("e")).is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(ts in proptest::collection::vec(0.0f64..2.0, 0..50)) {
            let events: Vec<_> = ts.iter().enumerate().map(|(i, &t)| (t, i % 3, i % 2)).collect();
            let s = stream(&events, 2.0);
            let back = EventStream::parse(&s.to_text(), Path::new("e")).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn binning_never_creates_spikes(ts in proptest::collection::vec(0.0f64..1.0, 0..80)) {
            let events: Vec<_> = ts.iter().enumerate().map(|(i, &t)| (t, i % 3, (i / 3) % 2)).collect();
            let st = stream(&events, 1.0);
            let tensor = bin_events(&st, 0.02).unwrap();
            prop_assert!(tensor.count_ones() <= st.len());

            // bin centers reproduce the same tensor
            let mut centers = Vec::new();
            for ((t, n, c), &v) in tensor.data().indexed_iter() {
                if v == 1 {
                    centers.push(((t as f64 + 0.5) * 0.02, n, c));
                }
            }
            let again = bin_events(&stream(&centers, 1.0), 0.02).unwrap();
            prop_assert_eq!(again, tensor);
        }
        #[test]
        fn distinct_cells_are_all_kept(
            cells in proptest::collection::btree_set((0usize..50, 0usize..3, 0usize..2), 0..60),
            offset in 0.05f64..0.95,
        ) {
            let events: Vec<_> = cells.iter().map(|&(b, n, c)| ((b as f64 + offset) * 0.02, n, c)).collect();
            let st = stream(&events, 1.0);
            let tensor = bin_events(&st, 0.02).unwrap();
            prop_assert_eq!(tensor.count_ones(), st.len());
            for &(b, n, c) in &cells {
                prop_assert_eq!(tensor.data()[[b, n, c]], 1);
            }
        }
    }
}
