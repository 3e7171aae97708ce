//! Simulated network latency, keyed by frame resolution and destination.
//! Values are seconds per frame and are only ever added up, never slept on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where key frames are sent for stylization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    #[default]
    Edge,
    CloudLa,
    CloudHk,
}

impl Destination {
    pub const ALL: [Destination; 3] = [Destination::Edge, Destination::CloudLa, Destination::CloudHk];

    pub fn as_str(self) -> &'static str {
        match self {
            Destination::Edge => "edge",
            Destination::CloudLa => "cloud_la",
            Destination::CloudHk => "cloud_hk",
        }
    }
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Destination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Destination::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown destination '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkLatency {
    pub uplink: f64,
    pub downlink: f64,
}

impl LinkLatency {
    pub fn round_trip(&self) -> f64 {
        self.uplink + self.downlink
    }
}

/// `"WxH"` → destination → latency.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatencyTable {
    entries: BTreeMap<String, BTreeMap<Destination, LinkLatency>>,
}

pub fn resolution_key(width: usize, height: usize) -> String {
    format!("{width}x{height}")
}

impl LatencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Measured one-way transmission latency per frame for the four
    /// reference resolutions, edge server vs. two remote clouds. The same
    /// value is used for uplink and downlink.
    pub fn reference() -> Self {
        let rows = [
            ("512x256", [0.003, 0.028, 0.088]),
            ("768x384", [0.006, 0.058, 0.176]),
            ("1024x512", [0.011, 0.105, 0.312]),
            ("1920x1080", [0.031, 0.318, 0.925]),
        ];
        let mut t = Self::new();
        for (res, values) in rows {
            for (dest, v) in Destination::ALL.into_iter().zip(values) {
                t.insert(
                    res,
                    dest,
                    LinkLatency {
                        uplink: v,
                        downlink: v,
                    },
                );
            }
        }
        t
    }

    pub fn insert(&mut self, resolution: &str, dest: Destination, latency: LinkLatency) {
        self.entries
            .entry(resolution.to_string())
            .or_default()
            .insert(dest, latency);
    }

    pub fn get(&self, resolution: &str, dest: Destination) -> Option<LinkLatency> {
        self.entries.get(resolution)?.get(&dest).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (res, row) in &self.entries {
            parse_resolution(res)?;
            for (dest, l) in row {
                if !(l.uplink >= 0.0 && l.downlink >= 0.0) {
                    return Err(Error::Config(format!(
                        "latency for {res}/{dest} must be non-negative, got {l:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parses `"WxH"` into `(width, height)`.
pub fn parse_resolution(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("resolution must look like 512x256, got '{s}'"));
    let (w, h) = s.split_once('x').ok_or_else(bad)?;
    let w: usize = w.parse().map_err(|_| bad())?;
    let h: usize = h.parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}
