//! Line-oriented probe protocol.
//!
//! Each request and response is one JSON object per line:
//!
//! ```text
//! > {"id":"case-00003/pre/s1r1/next_object","kind":"next_object","prompt":"kalo mirta occupation","candidate":"sari"}
//! < {"id":"case-00003/pre/s1r1/next_object","probability":0.82}
//! > {"id":"case-00003/pre/s1r1/generate","kind":"generate","prompt":"kalo mirta occupation"}
//! < {"id":"case-00003/pre/s1r1/generate","text":"sari"}
//! > {"id":"case-00003/pre/tf/truth","kind":"truth","prompt":"\"kalo mirta occupation sari\" is","candidate":"true"}
//! < {"id":"case-00003/pre/tf/truth","probability":0.82}
//! ```
//!
//! Responses are matched by id and may arrive in any order. Edits are requested with
//! `{"id":..,"kind":"edit","prompt":"s r","candidate":"o","weight":88}` and undone with
//! `{"id":..,"kind":"revert"}`; both are acknowledged by a response carrying the same id.
//! A response with an `error` field marks the request as failed.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    NextObject,
    Truth,
    Generate,
    Edit,
    Revert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeQuery {
    pub id: String,
    pub kind: ProbeKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl ProbeQuery {
    pub fn new(id: String, kind: ProbeKind, prompt: String, candidate: Option<String>) -> Self {
        Self {
            id,
            kind,
            prompt,
            candidate,
            weight: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ProbeResponse {
    pub fn probability(id: &str, p: f64) -> Self {
        Self {
            id: id.to_string(),
            probability: Some(p),
            ..Self::default()
        }
    }

    pub fn text(id: &str, t: String) -> Self {
        Self {
            id: id.to_string(),
            text: Some(t),
            ..Self::default()
        }
    }

    pub fn error(id: &str, e: impl ToString) -> Self {
        Self {
            id: id.to_string(),
            error: Some(e.to_string()),
            ..Self::default()
        }
    }

    pub fn ack(id: &str) -> Self {
        Self {
            id: id.to_string(),
            ..Self::default()
        }
    }
}

/// Anything that can answer probes and take edits.
pub trait ProbeModel {
    /// Answers a batch of probe queries. Missing ids count as failures.
    fn answer(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError>;

    /// Applies an edit making `candidate` the answer to `prompt` with the given weight.
    fn edit(
        &mut self,
        id: &str,
        prompt: &str,
        candidate: &str,
        weight: f64,
    ) -> Result<(), EvalError>;

    /// Undoes the most recent edit.
    fn revert(&mut self, id: &str) -> Result<(), EvalError>;
}

impl<M: ProbeModel + ?Sized> ProbeModel for Box<M> {
    fn answer(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError> {
        (**self).answer(queries)
    }

    fn edit(
        &mut self,
        id: &str,
        prompt: &str,
        candidate: &str,
        weight: f64,
    ) -> Result<(), EvalError> {
        (**self).edit(id, prompt, candidate, weight)
    }

    fn revert(&mut self, id: &str) -> Result<(), EvalError> {
        (**self).revert(id)
    }
}

/// Speaks the protocol over any reader/writer pair, sending up to `window` requests before
/// collecting their responses.
pub struct LineClient<R, W> {
    reader: R,
    writer: W,
    window: usize,
    line: String,
}

impl<R: BufRead, W: Write> LineClient<R, W> {
    pub fn new(reader: R, writer: W, window: usize) -> Self {
        Self {
            reader,
            writer,
            window: window.max(1),
            line: String::new(),
        }
    }

    fn send(&mut self, q: &ProbeQuery) -> Result<(), EvalError> {
        serde_json::to_writer(&mut self.writer, q)
            .map_err(|e| EvalError::Protocol(e.to_string()))?;
        self.writer.write_all(b"\n")?;
        Ok(())
    }

    /// Reads one response; `None` at end of stream.
    fn recv(&mut self) -> Result<Option<ProbeResponse>, EvalError> {
        loop {
            self.line.clear();
            if self.reader.read_line(&mut self.line)? == 0 {
                return Ok(None);
            }
            let l = self.line.trim();
            if l.is_empty() {
                continue;
            }
            return serde_json::from_str(l)
                .map(Some)
                .map_err(|e| EvalError::Protocol(format!("bad response line {l:?}: {e}")));
        }
    }

    fn exchange(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(self.window) {
            let mut pending: HashSet<&str> = chunk.iter().map(|q| q.id.as_str()).collect();
            for q in chunk {
                self.send(q)?;
            }
            self.writer.flush()?;
            while !pending.is_empty() {
                let Some(r) = self.recv()? else {
                    return Ok(out);
                };
                if !pending.remove(r.id.as_str()) {
                    return Err(EvalError::Protocol(format!(
                        "response for unknown id {:?}",
                        r.id
                    )));
                }
                out.push(r);
            }
        }
        Ok(out)
    }

    fn control(&mut self, q: ProbeQuery) -> Result<(), EvalError> {
        let r = self.exchange(std::slice::from_ref(&q))?;
        match r.into_iter().next() {
            None => Err(EvalError::EditHook(format!(
                "no acknowledgement for {}",
                q.id
            ))),
            Some(ProbeResponse { error: Some(e), .. }) => Err(EvalError::EditHook(e)),
            Some(_) => Ok(()),
        }
    }
}

impl<R: BufRead, W: Write> ProbeModel for LineClient<R, W> {
    fn answer(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError> {
        self.exchange(queries)
    }

    fn edit(
        &mut self,
        id: &str,
        prompt: &str,
        candidate: &str,
        weight: f64,
    ) -> Result<(), EvalError> {
        let mut q = ProbeQuery::new(
            id.to_string(),
            ProbeKind::Edit,
            prompt.to_string(),
            Some(candidate.to_string()),
        );
        q.weight = Some(weight);
        self.control(q)
    }

    fn revert(&mut self, id: &str) -> Result<(), EvalError> {
        self.control(ProbeQuery::new(
            id.to_string(),
            ProbeKind::Revert,
            String::new(),
            None,
        ))
    }
}

/// A model running as a subprocess that reads requests on stdin and answers on stdout.
pub struct ExecClient {
    child: Child,
    client: LineClient<BufReader<ChildStdout>, BufWriter<ChildStdin>>,
}

impl ExecClient {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str, window: usize) -> Result<Self, EvalError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        Ok(Self {
            child,
            client: LineClient::new(BufReader::new(stdout), BufWriter::new(stdin), window),
        })
    }
}

impl Drop for ExecClient {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl ProbeModel for ExecClient {
    fn answer(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError> {
        self.client.answer(queries)
    }

    fn edit(
        &mut self,
        id: &str,
        prompt: &str,
        candidate: &str,
        weight: f64,
    ) -> Result<(), EvalError> {
        self.client.edit(id, prompt, candidate, weight)
    }

    fn revert(&mut self, id: &str) -> Result<(), EvalError> {
        self.client.revert(id)
    }
}

pub type TcpClient = LineClient<BufReader<TcpStream>, BufWriter<TcpStream>>;

pub fn connect_tcp(addr: &str, window: usize) -> Result<TcpClient, EvalError> {
    let stream = TcpStream::connect(addr)?;
    let reader = BufReader::new(stream.try_clone()?);
    Ok(LineClient::new(reader, BufWriter::new(stream), window))
}

/// Answers protocol requests read from `input` with `model`, writing responses to `output`.
/// This is the server side of [`LineClient`], used to expose built-in agents.
pub fn serve<M: ProbeModel, R: BufRead, W: Write>(
    model: &mut M,
    input: R,
    mut output: W,
) -> Result<usize, EvalError> {
    let mut handled = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q: ProbeQuery = serde_json::from_str(&line)
            .map_err(|e| EvalError::Protocol(format!("bad request line {line:?}: {e}")))?;
        let r = match q.kind {
            ProbeKind::Edit => {
                let res = model.edit(
                    &q.id,
                    &q.prompt,
                    q.candidate.as_deref().unwrap_or_default(),
                    q.weight.unwrap_or(0.0),
                );
                res.map_or_else(
                    |e| ProbeResponse::error(&q.id, e),
                    |_| ProbeResponse::ack(&q.id),
                )
            }
            ProbeKind::Revert => model.revert(&q.id).map_or_else(
                |e| ProbeResponse::error(&q.id, e),
                |_| ProbeResponse::ack(&q.id),
            ),
            _ => model
                .answer(std::slice::from_ref(&q))?
                .into_iter()
                .next()
                .unwrap_or_else(|| ProbeResponse::error(&q.id, "no answer")),
        };
        serde_json::to_writer(&mut output, &r).map_err(|e| EvalError::Protocol(e.to_string()))?;
        output.write_all(b"\n")?;
        output.flush()?;
        handled += 1;
    }
    Ok(handled)
}
