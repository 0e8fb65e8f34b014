//! External evaluator speaking line-delimited JSON over the child's stdio.
//!
//! Request, one line per evaluation:
//!
//! ```text
//! {"id": 7, "names": ["x1", "x2"], "x": [0.25, 0.5]}
//! ```
//!
//! Response, one line:
//!
//! ```text
//! {"id": 7, "bv": 41.5, "rsp_on": 3.2}
//! {"id": 7, "error": "solver did not converge"}
//! ```
//!
//! `bv` is in V, `rsp_on` in mΩ·mm². The FOM is never transmitted. Closing
//! the child's stdin asks it to shut down.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Evaluation, Evaluator, EvaluatorError};
use crate::design_space::DesignPoint;

const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Serialize)]
pub struct Request<'a> {
    pub id: u64,
    pub names: &'a [String],
    pub x: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Measured { id: u64, bv: f64, rsp_on: f64 },
    Failed { id: u64, error: String },
}

impl Response {
    pub fn id(&self) -> u64 {
        match self {
            Response::Measured { id, .. } | Response::Failed { id, .. } => *id,
        }
    }
}

/// Parses one response line. `None` for anything that is not a well-formed
/// response object.
pub fn parse_response(line: &str) -> Option<Response> {
    serde_json::from_str(line.trim()).ok()
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Running {
    fn shutdown(mut self) {
        drop(self.stdin);
        let deadline = Instant::now() + SHUTDOWN_GRACE;
        loop {
            match self.child.try_wait() {
                Ok(Some(_)) => return,
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => break,
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Subprocess evaluator handle. The child is spawned when the handle is
/// created and reused for every request; a child that crashes or times out is
/// replaced on the next request.
pub struct SubprocessEvaluator {
    command: Vec<String>,
    names: Vec<String>,
    timeout: Duration,
    next_id: u64,
    running: Option<Running>,
}

impl std::fmt::Debug for SubprocessEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessEvaluator")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .field("next_id", &self.next_id)
            .field("running", &self.running.is_some())
            .finish()
    }
}

impl SubprocessEvaluator {
    pub fn spawn(command: Vec<String>, names: Vec<String>, timeout_s: f64) -> Result<Self, EvaluatorError> {
        if command.is_empty() {
            return Err(EvaluatorError::EmptyCommand);
        }
        let timeout = Duration::try_from_secs_f64(timeout_s)
            .map_err(|_| EvaluatorError::Unavailable(format!("invalid timeout {timeout_s}")))?;
        let mut me = Self {
            command,
            names,
            timeout,
            next_id: 0,
            running: None,
        };
        me.running = Some(me.start()?);
        Ok(me)
    }

    /// Spawns the child, retrying once.
    fn start(&self) -> Result<Running, EvaluatorError> {
        self.try_start()
            .or_else(|_| self.try_start())
            .map_err(|e| EvaluatorError::Unavailable(format!("cannot spawn {:?}: {e}", self.command)))
    }

    fn try_start(&self) -> std::io::Result<Running> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(Running {
            child,
            stdin,
            lines: rx,
        })
    }

    fn exchange(&self, running: &mut Running, id: u64, x: &DesignPoint) -> Outcome {
        let request = Request {
            id,
            names: &self.names,
            x: x.values(),
        };
        let mut line = serde_json::to_string(&request).expect("request serializes");
        line.push('\n');
        if running
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| running.stdin.flush())
            .is_err()
        {
            return Outcome::ChildGone;
        }

        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match running.lines.recv_timeout(remaining) {
                Ok(line) => match parse_response(&line) {
                    // stale answer to a request we already gave up on
                    Some(r) if r.id() < id => continue,
                    Some(Response::Measured { id: rid, bv, rsp_on }) if rid == id => {
                        return Outcome::Done(Evaluation::from_measurements(bv, rsp_on));
                    }
                    _ => return Outcome::Done(Evaluation::invalid()),
                },
                Err(RecvTimeoutError::Timeout) => return Outcome::TimedOut,
                Err(RecvTimeoutError::Disconnected) => return Outcome::ChildGone,
            }
        }
    }
}

enum Outcome {
    Done(Evaluation),
    TimedOut,
    ChildGone,
}

impl Evaluator for SubprocessEvaluator {
    fn evaluate(&mut self, x: &DesignPoint) -> Result<Evaluation, EvaluatorError> {
        let mut running = match self.running.take() {
            Some(r) => r,
            None => self.start()?,
        };
        let id = self.next_id;
        self.next_id += 1;
        let started = Instant::now();
        let outcome = self.exchange(&mut running, id, x);
        let elapsed = started.elapsed().as_secs_f64();
        let eval = match outcome {
            Outcome::Done(e) => {
                self.running = Some(running);
                e
            }
            Outcome::TimedOut | Outcome::ChildGone => {
                running.kill();
                Evaluation::invalid()
            }
        };
        Ok(eval.with_wall_time(elapsed))
    }
}

impl Drop for SubprocessEvaluator {
    fn drop(&mut self) {
        if let Some(r) = self.running.take() {
            r.shutdown();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn sh(script: &str) -> Vec<String> {
        vec!["sh".into(), "-c".into(), script.into()]
    }

    #[test]
    fn response_parsing() {
        assert_eq!(
            parse_response(r#"{"id": 3, "bv": 40, "rsp_on": 4}"#),
            Some(Response::Measured {
                id: 3,
                bv: 40.0,
                rsp_on: 4.0
            })
        );
        assert_eq!(
            parse_response(r#"{"id": 3, "error": "nope"}"#),
            Some(Response::Failed {
                id: 3,
                error: "nope".into()
            })
        );
        assert_eq!(parse_response("garbage"), None);
        assert_eq!(parse_response(r#"{"id": 3}"#), None);
    }

    #[test]
    fn request_line_shape() {
        let n = names();
        let r = Request {
            id: 1,
            names: &n,
            x: &[0.5, 0.25],
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":1,"names":["x1","x2"],"x":[0.5,0.25]}"#
        );
    }

    #[test]
    fn echoing_child_gives_valid_evaluation() {
        // answers every request with bv 40, rsp_on 4, echoing the id
        let script = r#"while read -r line; do id=$(echo "$line" | sed 's/.*"id":\([0-9]*\).*/\1/'); echo "{\"id\":$id,\"bv\":40,\"rsp_on\":4}"; done"#;
        let mut ev = SubprocessEvaluator::spawn(sh(script), names(), 5.0).unwrap();
        for _ in 0..3 {
            let e = ev.evaluate(&DesignPoint::new(vec![0.1, 0.2])).unwrap();
            assert!(e.valid);
            assert_eq!((e.bv, e.rsp_on, e.fom), (40.0, 4.0, 400.0));
            assert!(e.wall_time.is_some());
        }
    }

    #[test]
    fn nonzero_exit_is_invalid_not_fatal() {
        let mut ev = SubprocessEvaluator::spawn(sh("read -r line; exit 3"), names(), 5.0).unwrap();
        let e = ev.evaluate(&DesignPoint::new(vec![0.1, 0.2])).unwrap();
        assert!(!e.valid);
        // the replacement child fails the same way
        let e = ev.evaluate(&DesignPoint::new(vec![0.1, 0.2])).unwrap();
        assert!(!e.valid);
    }

    #[test]
    fn silent_child_times_out() {
        let mut ev = SubprocessEvaluator::spawn(sh("sleep 30"), names(), 0.2).unwrap();
        let started = Instant::now();
        let e = ev.evaluate(&DesignPoint::new(vec![0.1, 0.2])).unwrap();
        assert!(!e.valid);
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn missing_binary_is_unavailable() {
        let err = SubprocessEvaluator::spawn(vec!["/nonexistent/evaluator".into()], names(), 1.0).unwrap_err();
        assert!(matches!(err, EvaluatorError::Unavailable(_)));
    }
}
