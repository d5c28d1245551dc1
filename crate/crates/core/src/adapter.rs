//! Client for external generator/classifier processes.
//!
//! The adapter is a child process that reads one JSON request per line on
//! its standard input and answers with exactly one JSON object per line on
//! its standard output. The first exchange is a handshake declaring the
//! protocol version, the supported genres and the supported operations.
//! Any response carrying an `"error"` field is turned into
//! [`Error::Adapter`] with the full response as payload.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

/// Environment variable naming the adapter executable.
pub const ADAPTER_ENV: &str = "TOPICSHIFT_ADAPTER";

pub fn adapter_path_from_env() -> Option<PathBuf> {
    std::env::var_os(ADAPTER_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Handshake {
        protocol: u32,
    },
    Generate {
        genre: String,
        keywords: Vec<String>,
        max_tokens: usize,
        seed: u64,
    },
    Train {
        manifest: String,
        train: String,
        val: String,
        seed: u64,
    },
    Predict {
        texts: Vec<String>,
    },
}

impl Request {
    /// The exact bytes sent for this request, newline included.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("requests always serialize");
        s.push('\n');
        s
    }

    fn op(&self) -> &'static str {
        match self {
            Request::Handshake { .. } => "handshake",
            Request::Generate { .. } => "generate",
            Request::Train { .. } => "train",
            Request::Predict { .. } => "predict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    pub protocol: u32,
    pub genres: Vec<String>,
    pub ops: Vec<String>,
}

/// Something that answers protocol requests; lets generator and classifier
/// handles share one session without knowing its transport.
pub trait AdapterLink: Send {
    fn call(&mut self, request: &Request) -> Result<Value>;
    fn capabilities(&self) -> &Capabilities;
}

pub type SharedAdapter = Arc<Mutex<Box<dyn AdapterLink>>>;

pub fn share<L: AdapterLink + 'static>(link: L) -> SharedAdapter {
    Arc::new(Mutex::new(Box::new(link)))
}

/// A protocol session over any line-oriented reader/writer pair.
#[derive(Debug)]
pub struct AdapterClient<R, W> {
    reader: R,
    writer: W,
    capabilities: Capabilities,
    exchanged: u64,
}

impl<R: BufRead, W: Write> AdapterClient<R, W> {
    /// Perform the handshake.
    pub fn connect(mut reader: R, mut writer: W) -> Result<Self> {
        let hello = Request::Handshake {
            protocol: PROTOCOL_VERSION,
        };
        let value = exchange(&mut reader, &mut writer, &hello)?;
        let capabilities: Capabilities = serde_json::from_value(value.clone()).map_err(|e| Error::Adapter {
            message: format!("malformed handshake: {e}"),
            payload: Some(value),
        })?;
        if capabilities.protocol != PROTOCOL_VERSION {
            return Err(Error::adapter(format!(
                "adapter speaks protocol {}, expected {PROTOCOL_VERSION}",
                capabilities.protocol
            )));
        }
        Ok(AdapterClient {
            reader,
            writer,
            capabilities,
            exchanged: 1,
        })
    }

    /// Number of request/response pairs completed, handshake included.
    pub fn exchanged(&self) -> u64 {
        self.exchanged
    }

    pub fn into_parts(self) -> (R, W) {
        (self.reader, self.writer)
    }

    fn checked_call(&mut self, request: &Request) -> Result<Value> {
        let op = request.op();
        if !self.capabilities.ops.iter().any(|o| o == op) {
            return Err(Error::adapter(format!("adapter does not support op {op:?}")));
        }
        let v = exchange(&mut self.reader, &mut self.writer, request)?;
        self.exchanged += 1;
        Ok(v)
    }
}

impl<R: BufRead + Send, W: Write + Send> AdapterLink for AdapterClient<R, W> {
    fn call(&mut self, request: &Request) -> Result<Value> {
        self.checked_call(request)
    }

    fn capabilities(&self) -> &Capabilities {
        &self.capabilities
    }
}

fn exchange<R: BufRead, W: Write>(reader: &mut R, writer: &mut W, request: &Request) -> Result<Value> {
    let io = |e| Error::adapter(format!("adapter I/O failed: {e}"));
    writer.write_all(request.to_line().as_bytes()).map_err(io)?;
    writer.flush().map_err(io)?;
    let mut line = String::new();
    if reader.read_line(&mut line).map_err(io)? == 0 {
        return Err(Error::adapter(format!("adapter closed its output during {:?}", request.op())));
    }
    let value: Value = serde_json::from_str(line.trim_end_matches(['\n', '\r'])).map_err(|e| Error::Adapter {
        message: format!("malformed response to {:?}: {e}", request.op()),
        payload: Some(Value::String(line.clone())),
    })?;
    if !value.is_object() {
        return Err(Error::Adapter {
            message: "response is not a JSON object".into(),
            payload: Some(value),
        });
    }
    if let Some(err) = value.get("error") {
        return Err(Error::Adapter {
            message: format!("adapter reported {err} for {:?}", request.op()),
            payload: Some(value),
        });
    }
    Ok(value)
}

fn field<'v>(value: &'v Value, name: &str) -> Result<&'v Value> {
    value.get(name).ok_or_else(|| Error::Adapter {
        message: format!("response lacks {name:?}"),
        payload: Some(value.clone()),
    })
}

/// `generate` request; returns the raw text.
pub fn generate(link: &mut dyn AdapterLink, genre: &str, keywords: &[String], max_tokens: usize, seed: u64) -> Result<String> {
    let v = link.call(&Request::Generate {
        genre: genre.to_owned(),
        keywords: keywords.to_vec(),
        max_tokens,
        seed,
    })?;
    field(&v, "text")?.as_str().map(str::to_owned).ok_or_else(|| Error::Adapter {
        message: "\"text\" is not a string".into(),
        payload: Some(v.clone()),
    })
}

/// `train` request pointing the adapter at a split's files.
pub fn train(link: &mut dyn AdapterLink, manifest: &Path, train: &Path, val: &Path, seed: u64) -> Result<Value> {
    link.call(&Request::Train {
        manifest: manifest.display().to_string(),
        train: train.display().to_string(),
        val: val.display().to_string(),
        seed,
    })
}

/// `predict` request; checks one label per text.
pub fn predict(link: &mut dyn AdapterLink, texts: &[String]) -> Result<Vec<String>> {
    let v = link.call(&Request::Predict { texts: texts.to_vec() })?;
    let labels: Vec<String> = serde_json::from_value(field(&v, "labels")?.clone()).map_err(|e| Error::Adapter {
        message: format!("\"labels\" is not a string list: {e}"),
        payload: Some(v.clone()),
    })?;
    if labels.len() != texts.len() {
        return Err(Error::Adapter {
            message: format!("{} labels for {} texts", labels.len(), texts.len()),
            payload: Some(v),
        });
    }
    Ok(labels)
}

/// A spawned adapter process; killed when dropped.
pub struct AdapterProcess {
    child: Child,
    client: AdapterClient<BufReader<ChildStdout>, ChildStdin>,
}

impl AdapterProcess {
    pub fn spawn(program: &Path, args: &[&str]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::io(program, e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        match AdapterClient::connect(stdout, stdin) {
            Ok(client) => Ok(AdapterProcess { child, client }),
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(e)
            }
        }
    }

    pub fn exchanged(&self) -> u64 {
        self.client.exchanged()
    }
}

impl AdapterLink for AdapterProcess {
    fn call(&mut self, request: &Request) -> Result<Value> {
        self.client.checked_call(request)
    }

    fn capabilities(&self) -> &Capabilities {
        &self.client.capabilities
    }
}

impl Drop for AdapterProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
