use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{bin_events_window, load_event_file, SpikeTensor};
use crate::error::{Error, Result};
use crate::graph::strip_comment;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Resolved sample path (relative entries are taken relative to the manifest's directory).
    pub path: PathBuf,
    pub label: usize,
}

/// Dataset index: header fields followed by `path label` lines.
///
/// ```text
/// taxels 10
/// channels 2
/// bin_width 0.02
/// duration 1
/// classes press slide tap poke
/// samples/class00_000.events 0
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
    pub num_taxels: usize,
    pub num_channels: usize,
    pub bin_width: f64,
    /// Fixed sample window in seconds; every sample is binned to `ceil(duration / bin_width)` steps.
    pub duration: f64,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let (mut taxels, mut channels, mut bin_width, mut duration) = (None, None, None, None);
        let mut class_names: Option<Vec<String>> = None;
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            let bad = |what: &str| Error::parse(path, lineno, format!("bad {what} value {rest:?}"));
            match key {
                "taxels" => taxels = Some(rest.parse::<usize>().map_err(|_| bad("taxels"))?),
                "channels" => channels = Some(rest.parse::<usize>().map_err(|_| bad("channels"))?),
                "bin_width" => bin_width = Some(rest.parse::<f64>().map_err(|_| bad("bin_width"))?),
                "duration" => duration = Some(rest.parse::<f64>().map_err(|_| bad("duration"))?),
                "classes" => class_names = Some(rest.split_whitespace().map(str::to_owned).collect()),
                sample => {
                    let label = rest
                        .parse::<usize>()
                        .map_err(|_| Error::parse(path, lineno, "expected `path label`"))?;
                    let p = Path::new(sample);
                    let path = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
                    entries.push(ManifestEntry { path, label });
                }
            }
        }
        let missing = |what: &str| Error::Data { path: path.into(), msg: format!("missing `{what}` header") };
        let manifest = Self {
            entries,
            class_names: class_names.ok_or_else(|| missing("classes"))?,
            num_taxels: taxels.ok_or_else(|| missing("taxels"))?,
            num_channels: channels.ok_or_else(|| missing("channels"))?,
            bin_width: bin_width.ok_or_else(|| missing("bin_width"))?,
            duration: duration.ok_or_else(|| missing("duration"))?,
        };
        manifest.check_header(path)?;
        Ok(manifest)
    }

    fn check_header(&self, path: &Path) -> Result<()> {
        let fail = |msg: String| Err(Error::Data { path: path.into(), msg });
        if self.class_names.len() < 2 {
            return fail("manifest needs at least two classes".into());
        }
        if self.num_taxels == 0 || self.num_channels == 0 {
            return fail("taxels and channels must be positive".into());
        }
        if !(self.bin_width > 0.0 && self.duration > 0.0) {
            return fail("bin_width and duration must be positive".into());
        }
        let mut seen = vec![false; self.class_names.len()];
        for e in &self.entries {
            match seen.get_mut(e.label) {
                Some(s) => *s = true,
                None => return fail(format!("{}: label {} out of range", e.path.display(), e.label)),
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return fail(format!("labels are not dense: class {c} ({}) has no samples", self.class_names[c]));
        }
        Ok(())
    }

    /// Writes the manifest. Entry paths under `path`'s directory are stored relative to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let mut out = String::from("# tactile event dataset\n");
        writeln!(out, "taxels {}", self.num_taxels).unwrap();
        writeln!(out, "channels {}", self.num_channels).unwrap();
        writeln!(out, "bin_width {}", self.bin_width).unwrap();
        writeln!(out, "duration {}", self.duration).unwrap();
        writeln!(out, "classes {}", self.class_names.join(" ")).unwrap();
        for e in &self.entries {
            let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
            writeln!(out, "{} {}", rel.display(), e.label).unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Same header with only the chosen entries.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self { entries: indices.iter().map(|&i| self.entries[i].clone()).collect(), ..self.clone() }
    }

    /// Loads and bins every sample, checking it against the header.
    pub fn load_samples(&self) -> Result<Dataset> {
        let samples = self
            .entries
            .par_iter()
            .map(|entry| {
                let stream = load_event_file(&entry.path)?;
                let fail = |msg: String| Error::Data { path: entry.path.clone(), msg };
                if stream.num_taxels() != self.num_taxels || stream.num_channels() != self.num_channels {
                    return Err(fail(format!(
                        "sample is {} taxels x {} channels, manifest says {} x {}",
                        stream.num_taxels(),
                        stream.num_channels(),
                        self.num_taxels,
                        self.num_channels
                    )));
                }
                let spikes = bin_events_window(&stream, self.bin_width, self.duration)
                    .map_err(|e| fail(e.to_string()))?;
                Ok(Sample { spikes, label: entry.label })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { samples, class_names: self.class_names.clone() })
    }
}

/// Parses a manifest and validates every referenced sample.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = DatasetManifest::parse(&text, path)?;
    manifest.load_samples()?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub spikes: SpikeTensor,
    pub label: usize,
}

/// Binned samples held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let path = manifest_path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DatasetManifest::parse(&text, path)?.load_samples()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Event, EventStream};

    fn write_sample(dir: &Path, name: &str) {
        let s = EventStream::new(vec![Event { timestamp: 0.1, taxel: 1, channel: 0 }], 1.0, 2, 1).unwrap();
        s.save(dir.join(name)).unwrap();
    }

    const HEADER: &str = "taxels 2\nchannels 1\nbin_width 0.02\nduration 1\nclasses a b\n";

    #[test]
    fn loads_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), "x.events");
        write_sample(dir.path(), "y.events");
        let path = dir.path().join("m.txt");
        fs::write(&path, format!("{HEADER}x.events 0\ny.events 1\n")).unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].path, dir.path().join("x.events"));
        let data = m.load_samples().unwrap();
        assert_eq!(data.samples[1].spikes.data()[[5, 1, 0]], 1);

        let copy = dir.path().join("copy.txt");
        m.save(&copy).unwrap();
        assert_eq!(load_manifest(&copy).unwrap(), m);
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), "x.events");
        let path = dir.path().join("m.txt");
        fs::write(&path, format!("{HEADER}x.events 0\nghost.events 1\n")).unwrap();
        let err = load_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("ghost.events"), "{err}");
    }

    #[test]
    fn non_dense_labels_fail() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), "x.events");
        let path = dir.path().join("m.txt");
        fs::write(&path, format!("{HEADER}x.events 0\nx.events 0\n")).unwrap();
        assert!(load_manifest(&path).unwrap_err().to_string().contains("not dense"));
        fs::write(&path, format!("{HEADER}x.events 0\nx.events 2\n")).unwrap();
        assert!(load_manifest(&path).unwrap_err().to_string().contains("out of range"));
    }

    #[test]
    fn header_mismatch_fails() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), "x.events");
        let path = dir.path().join("m.txt");
        let header = HEADER.replace("taxels 2", "taxels 3");
        fs::write(&path, format!("{header}x.events 0\nx.events 1\n")).unwrap();
        assert!(load_manifest(&path).is_err());
    }
}
