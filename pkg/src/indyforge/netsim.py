"""A simulated validator pool that replicates governance transactions.

Every :class:`SimNode` owns its own :class:`~indyforge.poolstate.PoolState`
and talks to the others only through a transport keyed by ``(ip, port)``.
Total order comes from a sequencer: the live node whose alias sorts first.

Message flow for one client submission::

    client --REQUEST--> target   (client endpoint)
    target --PROPAGATE--> orderer  (node endpoint; skipped if target is orderer)
    orderer --ORDER--> every other live node
    orderer/target --REPLY--> client

A node that joins late sends CATCHUP_REQ to the orderer and replays the
CATCHUP_REP log on top of genesis.

The default scheduler is deterministic: it delivers messages in rounds
(everything in flight at the start of a round, in send order) until nothing
is left in flight. That point is quiescence.
"""

from __future__ import annotations

import json
import logging
import socket
import struct
import threading
from collections import deque
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import Any

from . import sample
from .errors import EndpointInUse, UnknownNode
from .genesis import GenesisDoc, build_domain_genesis, build_pool_genesis, canonical_json
from .poolstate import (
    AuthCode,
    AuthError,
    PoolState,
    Submission,
    add_node_workflow,
    apply_txn,
    bootstrap_state,
    node_addition,
)
from .roster import ParticipantRecord, Role, ValidatorInfo

log = logging.getLogger(__name__)

Endpoint = tuple[str, int]
Handler = Callable[[dict[str, Any]], None]

CLIENT_ENDPOINT: Endpoint = ("client", 0)
_FRAME_HEADER = struct.Struct(">I")
MAX_FRAME = 16 * 1024 * 1024


def encode_frame(message: dict[str, Any]) -> bytes:
    body = canonical_json(message)
    return _FRAME_HEADER.pack(len(body)) + body


def decode_frame(frame: bytes) -> dict[str, Any]:
    (length,) = _FRAME_HEADER.unpack_from(frame)
    body = frame[_FRAME_HEADER.size :]
    if length != len(body):
        raise ValueError(f"frame announces {length} bytes, carries {len(body)}")
    return json.loads(body.decode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> dict[str, Any] | None:
    """Read one length-prefixed frame; None on a clean EOF."""
    header = _recv_exact(sock, _FRAME_HEADER.size)
    if header is None:
        return None
    (length,) = _FRAME_HEADER.unpack(header)
    if length > MAX_FRAME:
        raise ValueError(f"frame of {length} bytes exceeds limit")
    body = _recv_exact(sock, length)
    if body is None:
        raise ConnectionError("connection closed mid-frame")
    return decode_frame(header + body)


class InProcTransport:
    """Single-threaded transport: frames sit in a FIFO until the scheduler delivers them."""

    def __init__(self) -> None:
        self._handlers: dict[Endpoint, Handler] = {}
        self._queue: deque[tuple[Endpoint, bytes]] = deque()
        self.dropped = 0

    def bind(self, endpoint: Endpoint, handler: Handler) -> None:
        if endpoint in self._handlers:
            raise EndpointInUse(f"{endpoint[0]}:{endpoint[1]} already bound")
        self._handlers[endpoint] = handler

    def is_bound(self, endpoint: Endpoint) -> bool:
        return endpoint in self._handlers

    def send(self, endpoint: Endpoint, message: dict[str, Any]) -> None:
        self._queue.append((endpoint, encode_frame(message)))

    def in_flight(self) -> int:
        return len(self._queue)

    def deliver_round(self) -> int:
        batch = list(self._queue)
        self._queue.clear()
        for endpoint, frame in batch:
            handler = self._handlers.get(endpoint)
            if handler is None:
                self.dropped += 1
                continue
            handler(decode_frame(frame))
        return len(batch)

    def close(self) -> None:
        self._handlers.clear()
        self._queue.clear()


class TcpTransport:
    """Loopback TCP transport with 4-byte big-endian length-prefixed frames.

    Each logical endpoint gets a real listener on 127.0.0.1. Reader threads
    only queue frames; handlers still run on the scheduler's thread, in send
    order, so round structure matches :class:`InProcTransport`.
    """

    def __init__(self, timeout: float = 10.0) -> None:
        self.timeout = timeout
        self._handlers: dict[Endpoint, Handler] = {}
        self._listeners: dict[Endpoint, socket.socket] = {}
        self._ports: dict[Endpoint, int] = {}
        self._arrived: list[tuple[int, Endpoint, dict[str, Any]]] = []
        self._cond = threading.Condition()
        self._sent = 0
        self._delivered = 0
        self._threads: list[threading.Thread] = []
        self._closed = False
        self.dropped = 0

    def bind(self, endpoint: Endpoint, handler: Handler) -> None:
        if endpoint in self._handlers:
            raise EndpointInUse(f"{endpoint[0]}:{endpoint[1]} already bound")
        listener = socket.create_server(("127.0.0.1", 0))
        self._handlers[endpoint] = handler
        self._listeners[endpoint] = listener
        self._ports[endpoint] = listener.getsockname()[1]
        thread = threading.Thread(target=self._accept_loop, args=(endpoint, listener), daemon=True)
        thread.start()
        self._threads.append(thread)

    def is_bound(self, endpoint: Endpoint) -> bool:
        return endpoint in self._handlers

    def _accept_loop(self, endpoint: Endpoint, listener: socket.socket) -> None:
        while True:
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            with conn:
                try:
                    while (envelope := read_frame(conn)) is not None:
                        with self._cond:
                            self._arrived.append((envelope["n"], endpoint, envelope["msg"]))
                            self._cond.notify_all()
                except (OSError, ValueError) as exc:
                    log.warning("bad frame on %s: %s", endpoint, exc)

    def send(self, endpoint: Endpoint, message: dict[str, Any]) -> None:
        n = self._sent
        self._sent += 1
        port = self._ports.get(endpoint)
        if port is None:
            self._delivered += 1
            self.dropped += 1
            return
        with socket.create_connection(("127.0.0.1", port), timeout=self.timeout) as conn:
            conn.sendall(encode_frame({"msg": message, "n": n}))

    def in_flight(self) -> int:
        return self._sent - self._delivered

    def deliver_round(self) -> int:
        expected = self.in_flight()
        with self._cond:
            if not self._cond.wait_for(lambda: len(self._arrived) >= expected, timeout=self.timeout):
                raise TimeoutError(f"only {len(self._arrived)} of {expected} frames arrived")
            batch = sorted(self._arrived, key=lambda item: item[0])
            self._arrived.clear()
        self._delivered += len(batch)
        for _, endpoint, message in batch:
            self._handlers[endpoint](message)
        return len(batch)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        for listener in self._listeners.values():
            try:
                listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            listener.close()
        for thread in self._threads:
            thread.join(timeout=1.0)


def make_transport(kind: str = "inproc") -> InProcTransport | TcpTransport:
    if kind == "inproc":
        return InProcTransport()
    if kind == "tcp":
        return TcpTransport()
    raise ValueError(f"unknown transport {kind!r}")


class SimNode:
    """One logical validator process."""

    def __init__(
        self,
        alias: str,
        node_endpoint: Endpoint,
        client_endpoint: Endpoint,
        local_state: PoolState,
        transport: InProcTransport | TcpTransport,
    ) -> None:
        self.alias = alias
        self.node_endpoint = node_endpoint
        self.client_endpoint = client_endpoint
        self.local_state = local_state
        self.transport = transport
        # applied submissions in global order
        self.log: list[Submission] = []
        self.peers: dict[str, Endpoint] = {}
        self._pending: dict[int, Submission] = {}
        transport.bind(node_endpoint, self.on_node_message)
        transport.bind(client_endpoint, self.on_client_message)

    @property
    def orderer(self) -> str:
        return min([self.alias, *self.peers])

    def _reply(self, req_id: int, **fields: Any) -> None:
        self.transport.send(CLIENT_ENDPOINT, {"type": "REPLY", "req_id": req_id, "node": self.alias, **fields})

    def _reject(self, req_id: int, error: AuthError) -> None:
        self._reply(req_id, accepted=False, code=error.code, detail=error.detail)

    def on_client_message(self, message: dict[str, Any]) -> None:
        if message["type"] != "REQUEST":
            raise ValueError(f"{self.alias}: unexpected client message {message['type']}")
        sub = Submission.from_json(message["submission"])
        try:
            apply_txn(self.local_state, sub)
        except AuthError as exc:
            self._reject(message["req_id"], exc)
            return
        if self.orderer == self.alias:
            self._order(message["req_id"], sub)
        else:
            self.transport.send(
                self.peers[self.orderer],
                {"type": "PROPAGATE", "req_id": message["req_id"], "submission": sub.to_json()},
            )

    def on_node_message(self, message: dict[str, Any]) -> None:
        kind = message["type"]
        if kind == "PROPAGATE":
            self._order(message["req_id"], Submission.from_json(message["submission"]))
        elif kind == "ORDER":
            self._pending[message["seq"]] = Submission.from_json(message["submission"])
            self._drain()
        elif kind == "CATCHUP_REQ":
            entries = [sub.to_json() for sub in self.log[message["have"] :]]
            self.transport.send(
                tuple(message["reply_to"]),
                {"type": "CATCHUP_REP", "start": message["have"], "entries": entries},
            )
        elif kind == "CATCHUP_REP":
            for offset, entry in enumerate(message["entries"]):
                self._pending[message["start"] + offset + 1] = Submission.from_json(entry)
            self._drain()
        else:
            raise ValueError(f"{self.alias}: unexpected node message {kind}")

    def _order(self, req_id: int, sub: Submission) -> None:
        if self.orderer != self.alias:
            raise RuntimeError(f"{self.alias} asked to order but {self.orderer} is the orderer")
        try:
            self.local_state = apply_txn(self.local_state, sub)
        except AuthError as exc:
            self._reject(req_id, exc)
            return
        self.log.append(sub)
        seq = len(self.log)
        for alias in sorted(self.peers):
            self.transport.send(self.peers[alias], {"type": "ORDER", "seq": seq, "submission": sub.to_json()})
        self._reply(req_id, accepted=True, seq=seq)

    def _drain(self) -> None:
        while (nxt := len(self.log) + 1) in self._pending:
            sub = self._pending.pop(nxt)
            # the orderer already authorized this; a failure here means replicas diverged
            self.local_state = apply_txn(self.local_state, sub)
            self.log.append(sub)


@dataclass
class SimReport:
    converged: bool
    rounds_to_converge: int
    membership_size: dict[str, int]
    steps: int = 0
    accepted: bool | None = None
    error: AuthError | None = None
    seq: int | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "converged": self.converged,
            "rounds_to_converge": self.rounds_to_converge,
            "membership_size": dict(self.membership_size),
            "steps": self.steps,
        }
        if self.accepted is not None:
            out["accepted"] = self.accepted
        if self.seq is not None:
            out["seq"] = self.seq
        if self.error is not None:
            out["error"] = self.error.to_dict()
        return out


@dataclass
class SimPool:
    network_name: str
    domain: GenesisDoc
    pool: GenesisDoc
    transport: InProcTransport | TcpTransport
    strict: bool = True
    nodes: list[SimNode] = field(default_factory=list)
    replies: dict[int, dict[str, Any]] = field(default_factory=dict)
    _next_req: int = 0

    def __post_init__(self) -> None:
        self.transport.bind(CLIENT_ENDPOINT, self._on_reply)

    def _on_reply(self, message: dict[str, Any]) -> None:
        self.replies[message["req_id"]] = message

    def node(self, alias: str) -> SimNode:
        for node in self.nodes:
            if node.alias == alias:
                return node
        raise UnknownNode(f"no live node named {alias!r}")

    @property
    def orderer(self) -> SimNode:
        return min(self.nodes, key=lambda n: n.alias)

    @property
    def ordering_log(self) -> list[Submission]:
        return list(self.orderer.log)

    def states(self) -> dict[str, PoolState]:
        return {node.alias: node.local_state for node in self.nodes}

    def _refresh_peers(self) -> None:
        for node in self.nodes:
            node.peers = {other.alias: other.node_endpoint for other in self.nodes if other is not node}

    def settle(self, max_rounds: int = 10_000) -> tuple[int, int]:
        """Deliver messages until quiescence; returns (rounds, messages delivered)."""
        rounds = steps = 0
        while self.transport.in_flight():
            if rounds >= max_rounds:
                raise RuntimeError(f"no quiescence after {max_rounds} rounds")
            steps += self.transport.deliver_round()
            rounds += 1
        return rounds, steps

    def converged(self) -> bool:
        if self.transport.in_flight():
            return False
        digests = {node.local_state.digest() for node in self.nodes}
        return len(digests) <= 1

    def report(self, rounds: int = 0, steps: int = 0) -> SimReport:
        return SimReport(
            converged=self.converged(),
            rounds_to_converge=rounds,
            membership_size={node.alias: len(node.local_state.validators) for node in self.nodes},
            steps=steps,
        )

    def close(self) -> None:
        self.transport.close()

    def __enter__(self) -> SimPool:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def _start_node(sim: SimPool, validator: ValidatorInfo) -> SimNode:
    state = bootstrap_state(sim.network_name, sim.domain, sim.pool, strict=sim.strict)
    node = SimNode(validator.alias, validator.node_endpoint, validator.client_endpoint, state, sim.transport)
    sim.nodes.append(node)
    return node


def spawn_pool(
    domain: GenesisDoc,
    pool: GenesisDoc,
    network_name: str = "sandbox",
    strict: bool = True,
    transport: str = "inproc",
) -> SimPool:
    """Start one node per NODE transaction, each bootstrapped from the same genesis."""
    # validate once up front so a bad pair fails before any endpoint is bound
    bootstrap_state(network_name, domain, pool, strict=strict)
    sim = SimPool(network_name, domain, pool, make_transport(transport), strict=strict)
    try:
        for txn in pool.transactions():
            _start_node(sim, txn.to_validator())
    except Exception:
        sim.close()
        raise
    sim._refresh_peers()
    return sim


def submit(sim: SimPool, target_alias: str, sub: Submission) -> SimReport:
    """Send ``sub`` to the client endpoint of ``target_alias`` and run to quiescence."""
    target = sim.node(target_alias)
    req_id = sim._next_req
    sim._next_req += 1
    sim.transport.send(target.client_endpoint, {"type": "REQUEST", "req_id": req_id, "submission": sub.to_json()})
    rounds, steps = sim.settle()
    report = sim.report(rounds, steps)
    reply = sim.replies.pop(req_id, None)
    if reply is None:
        raise RuntimeError(f"request {req_id} got no reply")
    report.accepted = reply["accepted"]
    if reply["accepted"]:
        report.seq = reply["seq"]
    else:
        report.error = AuthError(AuthCode(reply["code"]), reply["detail"])
    return report


def join_new_node(
    sim: SimPool,
    steward: ParticipantRecord,
    validator: ValidatorInfo,
    sponsor_trustee: str,
    target_alias: str | None = None,
) -> SimReport:
    """Onboard a steward and its validator, then start the validator as a new node.

    The trustee's NYM and the steward's NODE both go through the ordering
    path. They are dry-run against the target's state first so the pair is
    all-or-nothing. The newcomer bootstraps from genesis and catches up from
    the orderer's log.
    """
    target = sim.node(target_alias) if target_alias is not None else sim.orderer
    used = target.local_state.endpoints_in_use()
    for endpoint in validator.endpoints():
        if endpoint in used or sim.transport.is_bound(endpoint):
            raise EndpointInUse(f"endpoint {endpoint[0]}:{endpoint[1]} is already in use")
    try:
        add_node_workflow(target.local_state, sponsor_trustee, steward, validator)
    except AuthError as exc:
        report = sim.report()
        report.accepted = False
        report.error = exc
        return report

    rounds = steps = 0
    for sub in node_addition(sponsor_trustee, steward, validator):
        step = submit(sim, target.alias, sub)
        rounds += step.rounds_to_converge
        steps += step.steps
        if not step.accepted:
            # only reachable if replicas disagree with the dry run
            raise RuntimeError(f"ordered onboarding rejected: {step.error}")

    newcomer = _start_node(sim, validator)
    sim.transport.send(
        sim.orderer.node_endpoint if sim.orderer is not newcomer else target.node_endpoint,
        {"type": "CATCHUP_REQ", "have": 0, "reply_to": list(newcomer.node_endpoint)},
    )
    r, s = sim.settle()
    sim._refresh_peers()
    report = sim.report(rounds + r, steps + s)
    report.accepted = True
    return report


def run_scenario(sim: SimPool, actions: Iterable[dict[str, Any]]) -> list[SimReport]:
    """Run scripted actions (see :func:`load_scenario`) and collect one report each."""
    reports = []
    for action in actions:
        if action.get("action", "submit") == "join":
            steward = ParticipantRecord(role=Role.STEWARD, **action["steward"])
            validator = ValidatorInfo(steward_did=steward.did, **action["validator"])
            reports.append(join_new_node(sim, steward, validator, action["trustee"], action.get("target")))
        else:
            reports.append(submit(sim, action["target"], Submission.from_json(action)))
    return reports


def load_scenario(content: bytes) -> list[dict[str, Any]]:
    """Parse a scenario file: a JSON list of actions.

    A submit action is ``{"target": alias, "submitter": did, "txn": {...}}``
    with ``txn`` in genesis layout. A join action is ``{"action": "join",
    "trustee": did, "steward": {name, did, verkey}, "validator": {alias,
    node_ip, node_port, client_ip, client_port, verkey, bls_key, bls_pop}}``.
    """
    actions = json.loads(content.decode("utf-8"))
    if not isinstance(actions, list) or not all(isinstance(a, dict) for a in actions):
        raise ValueError("scenario must be a JSON list of objects")
    return actions


def measure_bootstrap(pool_size: int, joins: int, transport: str = "inproc") -> SimReport:
    """Spawn a synthetic pool, perform ``joins`` node additions, and count the work.

    ``rounds_to_converge`` and ``steps`` are totals over all joins, so the
    numbers are a regression metric for the protocol, not a timing.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be at least 1")
    net = sample.sample_network(stewards=pool_size + joins, trustees=3)
    founders = net.roster(strict=False, limit=pool_size)
    sim = spawn_pool(build_domain_genesis(founders), build_pool_genesis(founders), strict=False, transport=transport)
    with sim:
        rounds = steps = 0
        for steward, validator in net.steward_pairs[pool_size:]:
            report = join_new_node(sim, steward, validator, net.trustees[0].did)
            if report.error is not None:
                raise report.error
            rounds += report.rounds_to_converge
            steps += report.steps
        return sim.report(rounds, steps)
