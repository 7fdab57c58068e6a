use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;

use nalgebra::Vector3;

use super::{MatchBackend, MatchError, MatchResult, Result, UavObservation};
use crate::tiledb::TileRecord;

pub const MATCH_FILE_HEADER: &str = "#crossview-match-v1";

/// Wraps a backend and logs every result it produces.
#[derive(Debug)]
pub struct Recorder<B> {
    inner: B,
    log: Mutex<Vec<(u64, MatchResult)>>,
}

impl<B: MatchBackend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<(u64, MatchResult)> {
        self.log.lock().expect("recorder lock").clone()
    }

    /// Record file: header then `frame tile d px py pz psi theta` per line.
    pub fn to_text(&self) -> String {
        let log = self.log.lock().expect("recorder lock");
        let mut out = String::with_capacity(64 * (log.len() + 1));
        out.push_str(MATCH_FILE_HEADER);
        out.push('\n');
        for (frame, r) in log.iter() {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                frame, r.tile_id, r.d, r.p_hat.x, r.p_hat.y, r.p_hat.z, r.psi_hat, r.theta_hat
            );
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: MatchBackend> MatchBackend for Recorder<B> {
    fn match_pair(&self, obs: &UavObservation, tile: &TileRecord) -> Result<MatchResult> {
        let r = self.inner.match_pair(obs, tile)?;
        self.log
            .lock()
            .expect("recorder lock")
            .push((obs.frame(), r));
        Ok(r)
    }
}

/// Serves previously recorded results keyed by `(frame, tile)`.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    results: HashMap<(u64, u32), MatchResult>,
}

impl ReplayBackend {
    pub fn from_records(records: impl IntoIterator<Item = (u64, MatchResult)>) -> Self {
        Self {
            results: records
                .into_iter()
                .map(|(f, r)| ((f, r.tile_id), r))
                .collect(),
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let err = |line, msg: String| MatchError::Parse { line, msg };
        match lines.next() {
            Some((_, h)) if h == MATCH_FILE_HEADER => {}
            Some((n, h)) => {
                return Err(err(
                    n,
                    format!("expected header `{MATCH_FILE_HEADER}`, found `{h}`"),
                ))
            }
            None => return Err(err(1, "empty file".into())),
        }
        let mut results = HashMap::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 8 {
                return Err(err(n, format!("expected 8 fields, found {}", f.len())));
            }
            let frame = f[0]
                .parse::<u64>()
                .map_err(|e| err(n, format!("bad frame: {e}")))?;
            let tile_id = f[1]
                .parse::<u32>()
                .map_err(|e| err(n, format!("bad tile: {e}")))?;
            let mut v = [0.0; 6];
            for (slot, s) in v.iter_mut().zip(&f[2..]) {
                *slot = s
                    .parse::<f64>()
                    .map_err(|e| err(n, format!("bad value `{s}`: {e}")))?;
            }
            if !(v[0] > 0.0) || v.iter().any(|x| !x.is_finite()) {
                return Err(err(n, "distance must be positive and values finite".into()));
            }
            let r = MatchResult {
                tile_id,
                d: v[0],
                p_hat: Vector3::new(v[1], v[2], v[3]),
                psi_hat: v[4],
                theta_hat: v[5],
            };
            if results.insert((frame, tile_id), r).is_some() {
                return Err(err(n, format!("duplicate key ({frame}, {tile_id})")));
            }
        }
        Ok(Self { results })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

impl MatchBackend for ReplayBackend {
    fn match_pair(&self, obs: &UavObservation, tile: &TileRecord) -> Result<MatchResult> {
        self.results
            .get(&(obs.frame(), tile.tile_id))
            .copied()
            .ok_or(MatchError::ReplayMiss {
                frame: obs.frame(),
                tile: tile.tile_id,
            })
    }
}
