"""Deterministic in-process network harness for exchange scenarios.

A scenario scripts what happens to each message the endpoints send, in
send order: deliver it, drop it, duplicate it, or delay it until just
after the next delivered message (delayed traffic with no successor is
flushed at the end). Everything runs single-threaded off one FIFO, so a
given scenario always produces the same trace.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .errors import AmsError, MalformedScenario, TokenMismatch, VersionMismatch
from .sync import ExchangeEndpoint, ReplicaState, merge_state
from .wire import decode_frames, encode_frame

ACTIONS = ("deliver", "drop", "duplicate", "delay")

CONVERGED = "converged"
STALLED = "failed:TransportFailure"


@dataclass
class Scenario:
    replicas: list[ReplicaState]
    exchanges: list[tuple[int, int]]
    actions: Sequence[str] = ()  # consumed per send; missing entries deliver
    token: str = "pair"
    tokens: Sequence[str] | None = None  # per-replica override of token

    def token_for(self, index: int) -> str:
        return self.token if self.tokens is None else self.tokens[index]


@dataclass(frozen=True)
class TraceEvent:
    exchange: int
    sender: int
    receiver: int
    msg_type: str
    action: str


@dataclass
class ExchangeTrace:
    events: list[TraceEvent] = field(default_factory=list)
    outcomes: list[str] = field(default_factory=list)
    final_states: list[ReplicaState] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return bool(self.outcomes) and all(o == CONVERGED for o in self.outcomes)


def _validate(scenario: Scenario) -> None:
    if len(scenario.replicas) < 2:
        raise MalformedScenario("scenario needs at least 2 replicas")
    if not scenario.exchanges:
        raise MalformedScenario("scenario has no exchanges")
    for pair in scenario.exchanges:
        if len(pair) != 2 or pair[0] == pair[1]:
            raise MalformedScenario(f"bad exchange pair {pair}")
        for index in pair:
            if not 0 <= index < len(scenario.replicas):
                raise MalformedScenario(f"replica index {index} out of range")
    for action in scenario.actions:
        if action not in ACTIONS:
            raise MalformedScenario(f"unknown action {action!r}")
    if scenario.tokens is not None and len(scenario.tokens) != len(scenario.replicas):
        raise MalformedScenario("tokens must match replica count")


def simulate_network(scenario: Scenario) -> ExchangeTrace:
    """Run the scripted exchanges and report the trace and final states."""
    _validate(scenario)
    trace = ExchangeTrace()
    states = list(scenario.replicas)
    actions = deque(scenario.actions)

    for exchange_index, (left, right) in enumerate(scenario.exchanges):
        endpoints = {
            left: ExchangeEndpoint(states[left], scenario.token_for(left)),
            right: ExchangeEndpoint(states[right], scenario.token_for(right)),
        }
        peer = {left: right, right: left}
        inflight: deque[tuple[int, int, bytes]] = deque()
        delayed: list[tuple[int, int, bytes]] = []
        failure: AmsError | None = None

        def post(sender: int, messages) -> None:
            for message in messages:
                action = actions.popleft() if actions else "deliver"
                frame = encode_frame(message)
                trace.events.append(
                    TraceEvent(
                        exchange_index, sender, peer[sender], message["type"], action
                    )
                )
                if action == "drop":
                    continue
                if action == "duplicate":
                    inflight.append((sender, peer[sender], frame))
                    inflight.append((sender, peer[sender], frame))
                    continue
                if action == "delay":
                    delayed.append((sender, peer[sender], frame))
                    continue
                inflight.append((sender, peer[sender], frame))
                while delayed:
                    inflight.append(delayed.pop(0))

        post(left, endpoints[left].start())
        post(right, endpoints[right].start())

        while inflight and failure is None:
            sender, receiver, frame = inflight.popleft()
            endpoint = endpoints[receiver]
            if endpoint.done:
                continue  # late or duplicate traffic after completion
            try:
                for message in decode_frames(frame):
                    post(receiver, endpoint.on_message(message))
            except (TokenMismatch, VersionMismatch) as exc:
                failure = exc
            # anything still delayed with no follow-up send flushes at the end
            if not inflight and delayed:
                inflight.extend(delayed)
                delayed.clear()

        if failure is not None:
            trace.outcomes.append(f"failed:{type(failure).__name__}")
            continue
        # an endpoint that finished applies its merge; a stalled one is untouched
        for index in (left, right):
            if endpoints[index].done:
                states[index] = endpoints[index].result
        if endpoints[left].done and endpoints[right].done:
            trace.outcomes.append(CONVERGED)
        else:
            trace.outcomes.append(STALLED)

    trace.final_states = states
    return trace


def exchange_pair(
    a: ReplicaState, b: ReplicaState, token: str = "pair"
) -> tuple[ReplicaState, ReplicaState]:
    """Convenience full exchange between two replicas, no faults."""
    trace = simulate_network(Scenario([a, b], [(0, 1)], token=token))
    if not trace.converged:
        raise AmsError(f"exchange did not converge: {trace.outcomes}")
    return trace.final_states[0], trace.final_states[1]
