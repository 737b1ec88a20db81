//! Line-delimited JSON transport for running the two agents in separate
//! processes.
//!
//! ```text
//! handshake  {"v":1,"role":"chaser","tol":0.001,"max_iter":50000}
//! round      {"k":3,"p":[1.0,2.0,3.0],"halt":false}
//! final      {"k":17,"x":[1.0,2.0,3.0],"done":true}
//! ```
//!
//! Floats are written as shortest round-trip decimals, so a wire session
//! reproduces the in-memory iterate sequence bit for bit.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    run_agent, AgentMessage, AgentOutcome, AgentRole, AgentState, Envelope, FinalMessage, FistaError, FistaOptions,
    Transport,
};
use crate::geometry::{Ellipsoid, MarginResult, Method};
use crate::linalg::Vec3;

pub const PROTOCOL_VERSION: u32 = 1;
const CONNECT_ATTEMPTS: u32 = 50;
const CONNECT_BACKOFF: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Handshake {
    pub v: u32,
    pub role: AgentRole,
    pub tol: f64,
    pub max_iter: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum WireMessage {
    Final { k: u64, x: Vec3, done: bool },
    Round { k: u64, p: Vec3, halt: bool },
}

fn io_error(err: io::Error) -> FistaError {
    match err.kind() {
        io::ErrorKind::UnexpectedEof
        | io::ErrorKind::ConnectionReset
        | io::ErrorKind::ConnectionAborted
        | io::ErrorKind::BrokenPipe => FistaError::ConnectionLost,
        _ => FistaError::TransportFailure(err.to_string()),
    }
}

fn write_line<W: Write, T: Serialize>(writer: &mut W, value: &T) -> Result<(), FistaError> {
    let mut line = serde_json::to_vec(value).map_err(|e| FistaError::TransportFailure(e.to_string()))?;
    line.push(b'\n');
    writer.write_all(&line).map_err(io_error)?;
    writer.flush().map_err(io_error)
}

fn read_line<R: BufRead>(reader: &mut R, buf: &mut String) -> Result<(), FistaError> {
    buf.clear();
    let n = reader.read_line(buf).map_err(io_error)?;
    if n == 0 || !buf.ends_with('\n') {
        return Err(FistaError::ConnectionLost);
    }
    Ok(())
}

/// One end of a line-delimited JSON stream.
#[derive(Debug)]
pub struct LineTransport<R, W> {
    reader: R,
    writer: W,
    peer: AgentRole,
    buf: String,
}

impl<R: BufRead, W: Write> LineTransport<R, W> {
    /// Exchanges handshakes and checks that the peer plays the other role
    /// with the same options.
    pub fn handshake(mut reader: R, mut writer: W, role: AgentRole, opts: &FistaOptions) -> Result<Self, FistaError> {
        let ours = Handshake { v: PROTOCOL_VERSION, role, tol: opts.tol_step, max_iter: opts.max_iter };
        write_line(&mut writer, &ours)?;
        let mut buf = String::new();
        read_line(&mut reader, &mut buf)?;
        let theirs: Handshake = serde_json::from_str(&buf)
            .map_err(|e| FistaError::HandshakeMismatch(format!("unreadable handshake: {e}")))?;
        if theirs.v != PROTOCOL_VERSION {
            return Err(FistaError::HandshakeMismatch(format!("protocol version {} != {}", theirs.v, PROTOCOL_VERSION)));
        }
        if theirs.role != role.peer() {
            return Err(FistaError::HandshakeMismatch(format!("peer role {} conflicts with {}", theirs.role, role)));
        }
        if theirs.tol.to_bits() != ours.tol.to_bits() || theirs.max_iter != ours.max_iter {
            return Err(FistaError::HandshakeMismatch(format!(
                "options differ: tol {} vs {}, max_iter {} vs {}",
                theirs.tol, ours.tol, theirs.max_iter, ours.max_iter
            )));
        }
        Ok(LineTransport { reader, writer, peer: theirs.role, buf })
    }
}

impl<R: BufRead, W: Write> Transport for LineTransport<R, W> {
    fn send(&mut self, msg: &Envelope) -> Result<(), FistaError> {
        let wire = match *msg {
            Envelope::Round(m) => WireMessage::Round { k: m.iteration, p: m.point, halt: m.halt },
            Envelope::Final(m) => WireMessage::Final { k: m.iteration, x: m.point, done: true },
        };
        write_line(&mut self.writer, &wire)
    }

    fn recv(&mut self) -> Result<Envelope, FistaError> {
        read_line(&mut self.reader, &mut self.buf)?;
        let wire: WireMessage = serde_json::from_str(&self.buf)
            .map_err(|e| FistaError::Protocol(format!("malformed message {:?}: {e}", self.buf.trim_end())))?;
        Ok(match wire {
            WireMessage::Round { k, p, halt } => {
                Envelope::Round(AgentMessage { iteration: k, point: p, agent_id: self.peer, halt })
            }
            WireMessage::Final { k, x, done: true } => {
                Envelope::Final(FinalMessage { iteration: k, point: x, agent_id: self.peer })
            }
            WireMessage::Final { done: false, .. } => {
                return Err(FistaError::Protocol("final message with done=false".into()));
            }
        })
    }
}

/// Runs one agent over an arbitrary byte stream, handshake included.
pub fn run_session<R: BufRead, W: Write>(
    reader: R,
    writer: W,
    role: AgentRole,
    ellipsoid: Ellipsoid,
    opts: &FistaOptions,
    observe: impl FnMut(&AgentState),
) -> Result<AgentOutcome, FistaError> {
    let mut transport = LineTransport::handshake(reader, writer, role, opts)?;
    run_agent(role, ellipsoid, *opts, &mut transport, observe)
}

/// Which side opens the TCP connection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Listen(String),
    Connect(String),
}

pub fn open_stream(endpoint: &Endpoint) -> Result<TcpStream, FistaError> {
    match endpoint {
        Endpoint::Listen(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| FistaError::TransportFailure(format!("{addr}: {e}")))?;
            let (stream, _) = listener.accept().map_err(io_error)?;
            Ok(stream)
        }
        Endpoint::Connect(addr) => {
            let mut last = None;
            for _ in 0..CONNECT_ATTEMPTS {
                match TcpStream::connect(addr) {
                    Ok(stream) => return Ok(stream),
                    Err(e) => last = Some(e),
                }
                thread::sleep(CONNECT_BACKOFF);
            }
            let err = last.map(|e| e.to_string()).unwrap_or_default();
            Err(FistaError::TransportFailure(format!("{addr}: {err}")))
        }
    }
}

/// Runs one agent over TCP. Only this side's ellipsoid is known here, so the
/// overlap flag is never set and the margin is the raw distance between the
/// final iterates.
pub fn run_wire_session(
    endpoint: &Endpoint,
    role: AgentRole,
    ellipsoid: Ellipsoid,
    opts: &FistaOptions,
) -> Result<MarginResult, FistaError> {
    let stream = open_stream(endpoint)?;
    stream.set_nodelay(true).map_err(io_error)?;
    let reader = BufReader::new(stream.try_clone().map_err(io_error)?);
    let outcome = run_session(reader, stream, role, ellipsoid, opts, |_| {})?;
    Ok(outcome_result(&outcome))
}

pub fn outcome_result(outcome: &AgentOutcome) -> MarginResult {
    let (x, y) = outcome.points();
    MarginResult::from_points(x, y, outcome.iterations as usize, outcome.converged, Method::Fista)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn unit(center: Vec3) -> Ellipsoid {
        Ellipsoid::sphere(center, 1.0).unwrap()
    }

    #[test]
    fn round_and_final_encoding() {
        let round = WireMessage::Round { k: 3, p: Vec3::new(0.1, -2.0, 3.5), halt: false };
        assert_eq!(serde_json::to_string(&round).unwrap(), r#"{"k":3,"p":[0.1,-2.0,3.5],"halt":false}"#);
        let fin = WireMessage::Final { k: 9, x: Vec3::new(1.0, 0.0, 0.0), done: true };
        let text = serde_json::to_string(&fin).unwrap();
        assert_eq!(text, r#"{"k":9,"x":[1.0,0.0,0.0],"done":true}"#);
        assert_eq!(serde_json::from_str::<WireMessage>(&text).unwrap(), fin);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let v = Vec3::new(0.1 + 0.2, 1.0 / 3.0, -6.02214076e23);
        let text = serde_json::to_string(&WireMessage::Round { k: 0, p: v, halt: true }).unwrap();
        match serde_json::from_str::<WireMessage>(&text).unwrap() {
            WireMessage::Round { p, .. } => {
                for i in 0..3 {
                    assert_eq!(p[i].to_bits(), v[i].to_bits());
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn handshake_rejects_same_role() {
        let peer = br#"{"v":1,"role":"chaser","tol":0.001,"max_iter":50000}
"#;
        let err = LineTransport::handshake(Cursor::new(&peer[..]), Vec::new(), AgentRole::Chaser, &FistaOptions::default())
            .unwrap_err();
        assert!(matches!(err, FistaError::HandshakeMismatch(_)));
    }

    #[test]
    fn handshake_rejects_other_options_and_versions() {
        let opts = FistaOptions::default();
        for peer in [
            &br#"{"v":1,"role":"target","tol":0.01,"max_iter":50000}
"#[..],
            &br#"{"v":2,"role":"target","tol":0.001,"max_iter":50000}
"#[..],
            &b"not json\n"[..],
        ] {
            let err = LineTransport::handshake(Cursor::new(peer), Vec::new(), AgentRole::Chaser, &opts).unwrap_err();
            assert!(matches!(err, FistaError::HandshakeMismatch(_)), "{err:?}");
        }
    }

    #[test]
    fn closed_stream_is_connection_lost() {
        let peer = br#"{"v":1,"role":"target","tol":0.001,"max_iter":50000}
{"k":0,"p":[3.0,0.0,0.0],"halt":false}
"#;
        let err = run_session(
            Cursor::new(&peer[..]),
            Vec::new(),
            AgentRole::Chaser,
            unit(Vec3::ZERO),
            &FistaOptions::default(),
            |_| {},
        )
        .unwrap_err();
        assert_eq!(err, FistaError::ConnectionLost);
    }

    #[test]
    fn tcp_session_matches_in_memory() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        drop(listener);
        let chaser = unit(Vec3::ZERO);
        let target = unit(Vec3::new(2.0, 2.0, 1.0));
        let opts = FistaOptions::default();
        let listen = Endpoint::Listen(addr.clone());
        let connect = Endpoint::Connect(addr);
        let (a, b) = thread::scope(|s| {
            let a = s.spawn(|| run_wire_session(&listen, AgentRole::Chaser, chaser, &opts));
            let b = s.spawn(|| run_wire_session(&connect, AgentRole::Target, target, &opts));
            (a.join().unwrap().unwrap(), b.join().unwrap().unwrap())
        });
        let direct = crate::fista::solve_fista(&crate::geometry::Conjunction::pair(chaser, target), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x_star, direct.x_star);
        assert_eq!(a.y_star, direct.y_star);
        assert_eq!(a.margin, direct.margin);
    }
}
