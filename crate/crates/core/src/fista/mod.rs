//! Distributed margin solver: per-agent FISTA in lockstep.
//!
//! Each agent owns one ellipsoid and never reveals it. Per round both agents
//! publish their extrapolation point `p^k`, take a gradient step of length
//! `1/L` with `L = 4` (the spectral norm of the Hessian of `‖x - y‖²`), project
//! onto their own ellipsoid, and update the momentum:
//!
//! ```text
//! x^{k+1} = P(p_i - (2/L)(p_i - p_j))
//! t^{k+1} = (1 + √(1 + 4 t²)) / 2
//! p^{k+1} = x^{k+1} + ((t^k - 1) / t^{k+1}) (x^{k+1} - x^k)
//! ```
//!
//! Termination is symmetric: each round message carries a `halt` bit (own
//! last step within tolerance), and both agents stop after two consecutive
//! rounds in which both bits were set. The agent logic lives in
//! [`AgentSession`], a state machine that is driven either directly (both
//! agents on one thread) or through a [`Transport`].

pub mod transport;
pub mod wire;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Conjunction, Ellipsoid, MarginResult, Method};
use crate::linalg::Vec3;
use crate::overlap::{overlap_test, OverlapError};
use crate::projection::{project_ellipsoid, ProjectionError};

pub use transport::{ChannelTransport, Transport};

/// Lipschitz constant of the gradient of `‖x - y‖²`.
pub const LIPSCHITZ: f64 = 4.0;
/// Consecutive all-halt rounds required before stopping.
pub const HALT_ROUNDS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FistaError {
    #[error("iteration mismatch: expected {expected}, peer sent {got}")]
    IterationMismatch { expected: u64, got: u64 },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("handshake mismatch: {0}")]
    HandshakeMismatch(String),
    #[error("connection lost")]
    ConnectionLost,
    #[error("transport failure: {0}")]
    TransportFailure(String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Overlap(#[from] OverlapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Chaser,
    Target,
}

impl AgentRole {
    pub fn peer(self) -> AgentRole {
        match self {
            AgentRole::Chaser => AgentRole::Target,
            AgentRole::Target => AgentRole::Chaser,
        }
    }
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentRole::Chaser => "chaser",
            AgentRole::Target => "target",
        })
    }
}

/// The only per-round datum that leaves an agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentMessage {
    pub iteration: u64,
    pub point: Vec3,
    pub agent_id: AgentRole,
    pub halt: bool,
}

/// Final iterate, exchanged once so both sides can report the margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalMessage {
    pub iteration: u64,
    pub point: Vec3,
    pub agent_id: AgentRole,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    Round(AgentMessage),
    Final(FinalMessage),
}

pub fn next_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// One agent's private FISTA state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub agent_id: AgentRole,
    ellipsoid: Ellipsoid,
    pub x: Vec3,
    pub p: Vec3,
    pub t: f64,
    pub k: u64,
}

impl AgentState {
    /// Starts at the ellipsoid center.
    pub fn new(agent_id: AgentRole, ellipsoid: Ellipsoid) -> Self {
        let c = ellipsoid.center();
        AgentState { agent_id, ellipsoid, x: c, p: c, t: 1.0, k: 0 }
    }

    pub fn ellipsoid(&self) -> &Ellipsoid {
        &self.ellipsoid
    }

    pub fn message(&self, halt: bool) -> AgentMessage {
        AgentMessage { iteration: self.k, point: self.p, agent_id: self.agent_id, halt }
    }

    /// One FISTA update given the peer's extrapolation point for this round.
    pub fn step(&self, peer: &AgentMessage) -> Result<AgentState, FistaError> {
        if peer.iteration != self.k {
            return Err(FistaError::IterationMismatch { expected: self.k, got: peer.iteration });
        }
        if peer.agent_id == self.agent_id {
            return Err(FistaError::Protocol(format!("message from own role {}", self.agent_id)));
        }
        let descent = self.p - (self.p - peer.point) * (2.0 / LIPSCHITZ);
        let x = project_ellipsoid(&self.ellipsoid, descent)?;
        let t = next_momentum(self.t);
        let p = x + (x - self.x) * ((self.t - 1.0) / t);
        Ok(AgentState { x, p, t, k: self.k + 1, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FistaOptions {
    /// Per-agent step tolerance (km).
    pub tol_step: f64,
    pub max_iter: u64,
}

impl Default for FistaOptions {
    fn default() -> Self {
        FistaOptions { tol_step: 1e-3, max_iter: 50_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Running,
    Finishing { converged: bool },
    Done { converged: bool, peer_x: Vec3 },
}

/// What an agent knows once the session has ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentOutcome {
    pub agent_id: AgentRole,
    pub x: Vec3,
    pub peer_x: Vec3,
    pub iterations: u64,
    pub converged: bool,
}

impl AgentOutcome {
    pub fn margin(&self) -> f64 {
        self.x.distance(self.peer_x)
    }

    /// Orders the two final points as (chaser, target).
    pub fn points(&self) -> (Vec3, Vec3) {
        match self.agent_id {
            AgentRole::Chaser => (self.x, self.peer_x),
            AgentRole::Target => (self.peer_x, self.x),
        }
    }
}

/// Lockstep agent protocol as a send/receive state machine.
#[derive(Debug, Clone)]
pub struct AgentSession {
    state: AgentState,
    opts: FistaOptions,
    halt: bool,
    agreed_rounds: u32,
    phase: Phase,
}

impl AgentSession {
    pub fn new(agent_id: AgentRole, ellipsoid: Ellipsoid, opts: FistaOptions) -> Self {
        let phase = if opts.max_iter == 0 { Phase::Finishing { converged: false } } else { Phase::Running };
        AgentSession {
            state: AgentState::new(agent_id, ellipsoid),
            opts,
            halt: false,
            agreed_rounds: 0,
            phase,
        }
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        matches!(self.phase, Phase::Done { .. })
    }

    /// The message this agent publishes next.
    pub fn outgoing(&self) -> Envelope {
        match self.phase {
            Phase::Running => Envelope::Round(self.state.message(self.halt)),
            Phase::Finishing { .. } | Phase::Done { .. } => Envelope::Final(FinalMessage {
                iteration: self.state.k,
                point: self.state.x,
                agent_id: self.state.agent_id,
            }),
        }
    }

    /// Consumes the peer's message for the current round. Returns the new
    /// state when a FISTA step was taken.
    pub fn receive(&mut self, incoming: &Envelope) -> Result<Option<&AgentState>, FistaError> {
        match (self.phase, incoming) {
            (Phase::Running, Envelope::Round(peer)) => {
                if peer.iteration != self.state.k {
                    return Err(FistaError::IterationMismatch { expected: self.state.k, got: peer.iteration });
                }
                if self.halt && peer.halt {
                    self.agreed_rounds += 1;
                } else {
                    self.agreed_rounds = 0;
                }
                if self.agreed_rounds >= HALT_ROUNDS {
                    self.phase = Phase::Finishing { converged: true };
                    return Ok(None);
                }
                let next = self.state.step(peer)?;
                self.halt = next.x.distance(self.state.x) <= self.opts.tol_step;
                self.state = next;
                if self.state.k >= self.opts.max_iter {
                    self.phase = Phase::Finishing { converged: false };
                }
                Ok(Some(&self.state))
            }
            (Phase::Finishing { converged }, Envelope::Final(peer)) => {
                if peer.iteration != self.state.k {
                    return Err(FistaError::IterationMismatch { expected: self.state.k, got: peer.iteration });
                }
                if peer.agent_id == self.state.agent_id {
                    return Err(FistaError::Protocol("final message from own role".into()));
                }
                self.phase = Phase::Done { converged, peer_x: peer.point };
                Ok(None)
            }
            (phase, msg) => Err(FistaError::Protocol(format!("unexpected {msg:?} in phase {phase:?}"))),
        }
    }

    pub fn outcome(&self) -> Option<AgentOutcome> {
        match self.phase {
            Phase::Done { converged, peer_x } => Some(AgentOutcome {
                agent_id: self.state.agent_id,
                x: self.state.x,
                peer_x,
                iterations: self.state.k,
                converged,
            }),
            _ => None,
        }
    }
}

/// Drives one agent over `transport` until the session completes.
/// `observe` sees the state after every FISTA step.
pub fn run_agent<T: Transport + ?Sized>(
    agent_id: AgentRole,
    ellipsoid: Ellipsoid,
    opts: FistaOptions,
    transport: &mut T,
    mut observe: impl FnMut(&AgentState),
) -> Result<AgentOutcome, FistaError> {
    let mut session = AgentSession::new(agent_id, ellipsoid, opts);
    while !session.is_done() {
        transport.send(&session.outgoing())?;
        let incoming = transport.recv()?;
        if let Some(state) = session.receive(&incoming)? {
            observe(state);
        }
    }
    Ok(session.outcome().expect("session is done"))
}

/// Iterate sequences of both agents, `x^1, x^2, ...`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FistaTrace {
    pub chaser: Vec<Vec3>,
    pub target: Vec<Vec3>,
}

pub fn solve_fista(c: &Conjunction, opts: &FistaOptions) -> Result<MarginResult, FistaError> {
    solve_fista_observed(c, opts, |_| {})
}

/// Runs both agents alternately on the calling thread.
pub fn solve_fista_observed(
    c: &Conjunction,
    opts: &FistaOptions,
    mut observe: impl FnMut(&AgentState),
) -> Result<MarginResult, FistaError> {
    let mut chaser = AgentSession::new(AgentRole::Chaser, c.chaser, *opts);
    let mut target = AgentSession::new(AgentRole::Target, c.target, *opts);
    while !(chaser.is_done() && target.is_done()) {
        let to_target = chaser.outgoing();
        let to_chaser = target.outgoing();
        if let Some(s) = chaser.receive(&to_chaser)? {
            observe(s);
        }
        if let Some(s) = target.receive(&to_target)? {
            observe(s);
        }
    }
    let outcome = chaser.outcome().expect("session is done");
    finish(c, &outcome)
}

/// Runs the two agents on two threads connected by an in-memory channel.
pub fn solve_fista_threaded(c: &Conjunction, opts: &FistaOptions) -> Result<(MarginResult, FistaTrace), FistaError> {
    let (mut chaser_link, mut target_link) = ChannelTransport::pair();
    let (chaser_out, target_out) = std::thread::scope(|scope| {
        let chaser = scope.spawn(|| {
            let mut xs = Vec::new();
            let out = run_agent(AgentRole::Chaser, c.chaser, *opts, &mut chaser_link, |s| xs.push(s.x));
            out.map(|o| (o, xs))
        });
        let target = scope.spawn(|| {
            let mut xs = Vec::new();
            let out = run_agent(AgentRole::Target, c.target, *opts, &mut target_link, |s| xs.push(s.x));
            out.map(|o| (o, xs))
        });
        (chaser.join().expect("chaser thread"), target.join().expect("target thread"))
    });
    let (outcome, chaser_xs) = chaser_out?;
    let (_, target_xs) = target_out?;
    let result = finish(c, &outcome)?;
    Ok((result, FistaTrace { chaser: chaser_xs, target: target_xs }))
}

/// Collects both iterate sequences from the single-threaded driver.
pub fn solve_fista_traced(c: &Conjunction, opts: &FistaOptions) -> Result<(MarginResult, FistaTrace), FistaError> {
    let mut trace = FistaTrace::default();
    let result = solve_fista_observed(c, opts, |s| match s.agent_id {
        AgentRole::Chaser => trace.chaser.push(s.x),
        AgentRole::Target => trace.target.push(s.x),
    })?;
    Ok((result, trace))
}

/// With both ellipsoids at hand, an overlap verdict clamps the margin to 0.
fn finish(c: &Conjunction, outcome: &AgentOutcome) -> Result<MarginResult, FistaError> {
    let (x, y) = outcome.points();
    let mut result = MarginResult::from_points(x, y, outcome.iterations as usize, outcome.converged, Method::Fista);
    if overlap_test(c)?.overlapping {
        result.margin = 0.0;
        result.overlap = true;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(center: Vec3) -> Ellipsoid {
        Ellipsoid::sphere(center, 1.0).unwrap()
    }

    #[test]
    fn momentum_first_step_is_golden_ratio() {
        assert!((next_momentum(1.0) - 1.618_033_988_7).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_keeps_the_point() {
        let s = AgentState::new(AgentRole::Chaser, unit(Vec3::new(1.0, 2.0, 3.0)));
        let peer = AgentMessage { iteration: 0, point: s.p, agent_id: AgentRole::Target, halt: false };
        let next = s.step(&peer).unwrap();
        assert_eq!(next.x, s.x);
        assert_eq!(next.p, s.p);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn midpoint_step_projects_to_sphere() {
        let s = AgentState::new(AgentRole::Chaser, unit(Vec3::ZERO));
        let peer = AgentMessage { iteration: 0, point: Vec3::new(3.0, 0.0, 0.0), agent_id: AgentRole::Target, halt: false };
        let next = s.step(&peer).unwrap();
        assert!((next.x - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn step_rejects_out_of_order_peer() {
        let s = AgentState::new(AgentRole::Chaser, unit(Vec3::ZERO));
        let peer = AgentMessage { iteration: 3, point: Vec3::ZERO, agent_id: AgentRole::Target, halt: false };
        assert_eq!(s.step(&peer), Err(FistaError::IterationMismatch { expected: 0, got: 3 }));
    }

    #[test]
    fn unit_spheres_margin() {
        let c = Conjunction::pair(unit(Vec3::ZERO), unit(Vec3::new(3.0, 0.0, 0.0)));
        let r = solve_fista(&c, &FistaOptions::default()).unwrap();
        assert!((r.margin - 1.0).abs() < 1e-4);
        assert!(r.converged);
    }

    #[test]
    fn identical_ellipsoids_clamp_to_zero() {
        let c = Conjunction::pair(unit(Vec3::ZERO), unit(Vec3::ZERO));
        let r = solve_fista(&c, &FistaOptions::default()).unwrap();
        assert_eq!(r.margin, 0.0);
        assert!(r.overlap);
    }

    #[test]
    fn max_iter_stops_unconverged() {
        let c = Conjunction::pair(unit(Vec3::ZERO), unit(Vec3::new(0.5, 9.0, 1.0)));
        let opts = FistaOptions { tol_step: -1.0, max_iter: 5 };
        let r = solve_fista(&c, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 5);
    }

    #[test]
    fn threaded_and_single_threaded_agree() {
        let c = Conjunction::pair(
            Ellipsoid::from_covariance(Vec3::ZERO, crate::linalg::SymMat3::diag(4.0, 1.0, 0.25)).unwrap(),
            unit(Vec3::new(4.0, 3.0, -1.0)),
        );
        let opts = FistaOptions::default();
        let (a, ta) = solve_fista_traced(&c, &opts).unwrap();
        let (b, tb) = solve_fista_threaded(&c, &opts).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
    }
}
