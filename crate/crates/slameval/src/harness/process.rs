//! Out-of-process SUT adapter. Real SLAM systems are wrapped by a small
//! executable speaking a line protocol on stdin/stdout:
//!
//! ```text
//! harness -> wrapper:  INIT
//! wrapper -> harness:  READY
//! harness -> wrapper:  FRAME <timestamp>
//! wrapper -> harness:  POSE <tx> <ty> <tz> <qx> <qy> <qz> <qw>   (or LOST)
//! harness -> wrapper:  QUIT
//! ```
//!
//! One request line per frame, one response line per request; timestamps and
//! pose fields are decimal text, space separated.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::geometry::PoseSE3;

use super::{Frame, FrameResult, Sut};

pub struct ProcessSut {
    command: Vec<String>,
    response_timeout: Duration,
    child: Option<Child>,
    stdin: Option<std::process::ChildStdin>,
    lines: Option<mpsc::Receiver<std::io::Result<String>>>,
}

impl ProcessSut {
    pub fn new(command: Vec<String>, response_timeout: Duration) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Config("empty SUT command".into()));
        }
        Ok(ProcessSut {
            command,
            response_timeout,
            child: None,
            stdin: None,
            lines: None,
        })
    }

    fn send(&mut self, line: &str) -> Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Protocol("SUT process not running".into()))?;
        writeln!(stdin, "{line}")?;
        stdin.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String> {
        let rx = self
            .lines
            .as_ref()
            .ok_or_else(|| Error::Protocol("SUT process not running".into()))?;
        match rx.recv_timeout(self.response_timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(e.into()),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                Err(Error::Protocol("SUT response timed out".into()))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(Error::Protocol("SUT closed its output stream".into()))
            }
        }
    }
}

impl Sut for ProcessSut {
    fn init(&mut self) -> Result<()> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| {
                Error::Config(format!("failed to spawn SUT {:?}: {e}", self.command[0]))
            })?;
        self.stdin = child.stdin.take();
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| Error::Protocol("SUT stdout unavailable".into()))?;
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        self.lines = Some(rx);
        self.child = Some(child);

        self.send("INIT")?;
        let reply = self.recv()?;
        if reply.trim() != "READY" {
            return Err(Error::Protocol(format!(
                "expected READY handshake, got {reply:?}"
            )));
        }
        Ok(())
    }

    fn process_frame(&mut self, frame: &Frame) -> Result<FrameResult> {
        self.send(&format!("FRAME {:.9}", frame.time.0))?;
        let reply = self.recv()?;
        let fields: Vec<&str> = reply.split_whitespace().collect();
        match fields.first().copied() {
            Some("LOST") => Ok(FrameResult {
                pose: None,
                tracking: false,
            }),
            Some("POSE") if fields.len() == 8 => {
                let vals: Option<Vec<f64>> = fields[1..].iter().map(|f| f.parse().ok()).collect();
                let v = vals
                    .ok_or_else(|| Error::Protocol(format!("malformed POSE response {reply:?}")))?;
                let (pose, _) = PoseSE3::from_parts([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]])?;
                Ok(FrameResult {
                    pose: Some(pose),
                    tracking: true,
                })
            }
            _ => Err(Error::Protocol(format!(
                "unexpected SUT response {reply:?}"
            ))),
        }
    }

    fn shutdown(&mut self) {
        let _ = self.send("QUIT");
        if let Some(mut child) = self.child.take() {
            // Give the wrapper a moment to exit cleanly, then reap it.
            let deadline = std::time::Instant::now() + Duration::from_millis(500);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if std::time::Instant::now() < deadline => {
                        std::thread::sleep(Duration::from_millis(10));
                    }
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
        }
        self.stdin = None;
        self.lines = None;
    }
}

impl Drop for ProcessSut {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
