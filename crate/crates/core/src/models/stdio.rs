//! Line-delimited JSON protocol for models living in a child process.
//!
//! The client writes one request per line to the child's stdin and reads one
//! response per line from its stdout:
//!
//! ```text
//! -> {"id":0,"op":"info"}
//! <- {"id":0,"n_classes":C,"d":D,"t":T}
//! -> {"id":1,"op":"predict","instances":[[[...T...], ...D...], ...batch...]}
//! <- {"id":1,"probs":[[...C...], ...batch...]}
//! ```
//!
//! Responses must carry the request id, one normalized probability vector
//! per instance, and arrive within the configured timeout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Capabilities, Model};
use crate::series::{ProbVector, Series};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub instances: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub id: u64,
    pub n_classes: usize,
    pub d: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub id: u64,
    pub probs: Vec<Vec<f64>>,
}

pub fn encode_info_request(id: u64) -> String {
    let req = Request {
        id,
        op: "info".into(),
        instances: None,
    };
    serde_json::to_string(&req).expect("request serializes")
}

pub fn encode_predict_request(id: u64, batch: &[Series]) -> String {
    let req = Request {
        id,
        op: "predict".into(),
        instances: Some(batch.iter().map(Series::to_rows).collect()),
    };
    serde_json::to_string(&req).expect("request serializes")
}

/// Parses any request line; used by model servers.
pub fn decode_request(line: &str) -> Result<Request> {
    serde_json::from_str(line).map_err(|_| Error::ProtocolError(line.to_string()))
}

/// Parses the instances of a predict request back into series.
pub fn decode_predict_request(line: &str) -> Result<(u64, Vec<Series>)> {
    let req = decode_request(line)?;
    if req.op != "predict" {
        return Err(Error::ProtocolError(line.to_string()));
    }
    let batch = req
        .instances
        .ok_or_else(|| Error::ProtocolError(line.to_string()))?
        .into_iter()
        .map(Series::from_rows)
        .collect::<Result<Vec<_>>>()
        .map_err(|_| Error::ProtocolError(line.to_string()))?;
    Ok((req.id, batch))
}

pub fn encode_predict_response(id: u64, probs: &[ProbVector]) -> String {
    let resp = PredictResponse {
        id,
        probs: probs.iter().map(|p| p.as_slice().to_vec()).collect(),
    };
    serde_json::to_string(&resp).expect("response serializes")
}

/// Validates a predict response against the request id, batch size and
/// class count.
pub fn decode_predict_response(
    line: &str,
    id: u64,
    batch_len: usize,
    n_classes: usize,
) -> Result<Vec<ProbVector>> {
    let bad = || Error::ProtocolError(line.to_string());
    let resp: PredictResponse = serde_json::from_str(line).map_err(|_| bad())?;
    if resp.id != id || resp.probs.len() != batch_len {
        return Err(bad());
    }
    resp.probs
        .into_iter()
        .map(|p| {
            if p.len() != n_classes {
                return Err(bad());
            }
            ProbVector::new(p).map_err(|_| bad())
        })
        .collect()
}

struct Conn {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    next_id: u64,
    broken: bool,
    closed: bool,
}

/// Kills everything the shell started, not just the shell itself.
#[cfg(unix)]
fn kill_group(child: &Child) {
    let _ = Command::new("kill")
        .arg("-KILL")
        .arg("--")
        .arg(format!("-{}", child.id()))
        .stderr(Stdio::null())
        .status();
}

#[cfg(not(unix))]
fn kill_group(_child: &Child) {}

impl Conn {
    fn roundtrip(&mut self, line: &str, timeout: Duration) -> Result<String> {
        if self.broken {
            return Err(Error::ProtocolError("model connection is closed".into()));
        }
        let sent = writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush());
        if let Err(e) = sent {
            self.broken = true;
            return Err(Error::ProtocolError(format!("write failed: {e}")));
        }
        match self.lines.recv_timeout(timeout) {
            Ok(resp) => Ok(resp),
            Err(RecvTimeoutError::Timeout) => {
                self.shutdown();
                Err(Error::ModelTimeout(timeout.as_secs_f64()))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.broken = true;
                Err(Error::ProtocolError(
                    "model process closed its output".into(),
                ))
            }
        }
    }

    fn shutdown(&mut self) {
        self.broken = true;
        if self.closed {
            return;
        }
        self.closed = true;
        kill_group(&self.child);
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A model served by a child process over the stdio protocol.
pub struct StdioModel {
    n_classes: usize,
    shape: (usize, usize),
    timeout: Duration,
    conn: Mutex<Conn>,
}

/// Spawns `command` through `sh -c` with the default timeout.
pub fn stdio_model(command: &str, n_classes: usize) -> Result<StdioModel> {
    StdioModel::spawn(command, n_classes, DEFAULT_TIMEOUT)
}

impl StdioModel {
    /// Spawns the process and performs the `info` handshake. A class count
    /// different from `n_classes` is a protocol error.
    pub fn spawn(command: &str, n_classes: usize, timeout: Duration) -> Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command);
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::SpawnError(e.to_string()))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut conn = Conn {
            child,
            stdin,
            lines: rx,
            next_id: 1,
            broken: false,
            closed: false,
        };
        let resp = match conn.roundtrip(&encode_info_request(0), timeout) {
            Ok(r) => r,
            Err(e) => {
                conn.shutdown();
                return Err(e);
            }
        };
        let info: InfoResponse = match serde_json::from_str(&resp) {
            Ok(info) => info,
            Err(_) => {
                conn.shutdown();
                return Err(Error::ProtocolError(resp));
            }
        };
        if info.id != 0 || info.n_classes != n_classes {
            conn.shutdown();
            return Err(Error::ProtocolError(resp));
        }
        Ok(StdioModel {
            n_classes,
            shape: (info.d, info.t),
            timeout,
            conn: Mutex::new(conn),
        })
    }

    /// `(D, T)` announced by the model process.
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }
}

impl Model for StdioModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_batch(&self, batch: &[Series]) -> Result<Vec<ProbVector>> {
        if let Some(i) = batch.iter().position(|s| s.shape() != self.shape) {
            return Err(Error::ShapeMismatch(i));
        }
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let id = conn.next_id;
        conn.next_id += 1;
        let line = conn.roundtrip(&encode_predict_request(id, batch), self.timeout)?;
        decode_predict_response(&line, id, batch.len(), self.n_classes)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_gradient: false,
            parallel_safe: false,
        }
    }
}

impl Drop for StdioModel {
    fn drop(&mut self) {
        self.conn
            .get_mut()
            .unwrap_or_else(|e| e.into_inner())
            .shutdown();
    }
}
