"""Governance state machine over NYM and NODE transactions.

States are immutable values. :func:`apply_txn` returns a new state or raises
:class:`AuthError`; the input state is never touched, so a caller that holds
"the current state" only swaps its reference on success.

Authorization is structural: the submitter DID is looked up in the state and
its role decides what it may write. Nothing here checks signatures.
"""

from __future__ import annotations

import enum
import hashlib
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any

from .errors import GenesisInvalid, IndyForgeError, ReplayAborted
from .genesis import GenesisDoc, NodeTxn, NymTxn, Txn, canonical_json, txn_from_json, verify_genesis_pair
from .roster import ParticipantRecord, Role, ValidatorInfo


class AuthCode(str, enum.Enum):
    UNKNOWN_SUBMITTER = "UnknownSubmitter"
    NOT_TRUSTEE = "NotTrustee"
    NOT_STEWARD = "NotSteward"
    STEWARD_ALREADY_HAS_NODE = "StewardAlreadyHasNode"
    DUPLICATE_ALIAS = "DuplicateAlias"
    DUPLICATE_ENDPOINT = "DuplicateEndpoint"
    DUPLICATE_DID = "DuplicateDid"
    FOREIGN_NODE = "ForeignNode"


class AuthError(IndyForgeError):
    def __init__(self, code: AuthCode, detail: str) -> None:
        super().__init__(detail)
        self.auth_code = AuthCode(code)
        self.detail = detail

    @property
    def code(self) -> str:
        return self.auth_code.value

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AuthError) and (self.auth_code, self.detail) == (other.auth_code, other.detail)

    def __hash__(self) -> int:
        return hash((self.auth_code, self.detail))


@dataclass(frozen=True)
class Participant:
    verkey: str
    role: Role
    alias: str | None = None


@dataclass(frozen=True)
class Submission:
    submitter_did: str
    txn: Txn

    def to_json(self) -> dict[str, Any]:
        return {"submitter": self.submitter_did, "txn": self.txn.to_json()}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> Submission:
        submitter = obj.get("submitter")
        if not isinstance(submitter, str):
            raise ValueError("submission needs a 'submitter' did")
        return cls(submitter_did=submitter, txn=txn_from_json(obj.get("txn")))


@dataclass(frozen=True)
class LedgerEntry:
    seq_no: int
    txn: Txn
    submitter_did: str | None = None


@dataclass(frozen=True, eq=False)
class PoolState:
    network_name: str
    participants: Mapping[str, Participant]
    validators: Mapping[str, ValidatorInfo]
    ledger: tuple[LedgerEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "participants", MappingProxyType(dict(self.participants)))
        object.__setattr__(self, "validators", MappingProxyType(dict(self.validators)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PoolState):
            return NotImplemented
        return (
            self.network_name == other.network_name
            and dict(self.participants) == dict(other.participants)
            and dict(self.validators) == dict(other.validators)
            and self.ledger == other.ledger
        )

    def __hash__(self) -> int:
        return hash((self.network_name, self.ledger))

    def role_of(self, did: str) -> Role | None:
        participant = self.participants.get(did)
        return participant.role if participant else None

    def validator_of(self, steward_did: str) -> ValidatorInfo | None:
        for validator in self.validators.values():
            if validator.steward_did == steward_did:
                return validator
        return None

    def endpoints_in_use(self) -> dict[tuple[str, int], str]:
        used: dict[tuple[str, int], str] = {}
        for validator in self.validators.values():
            for endpoint in validator.endpoints():
                used[endpoint] = validator.alias
        return used

    def digest(self) -> str:
        """Stable fingerprint of the state, used to compare replicas cheaply."""
        body = {
            "network": self.network_name,
            "ledger": [
                {"seqNo": e.seq_no, "submitter": e.submitter_did, "txn": e.txn.to_json()} for e in self.ledger
            ],
        }
        return hashlib.sha256(canonical_json(body)).hexdigest()


def check_invariants(state: PoolState) -> None:
    """Assert the structural invariants every reachable state must satisfy."""
    owners: set[str] = set()
    endpoints: set[tuple[str, int]] = set()
    for alias, validator in state.validators.items():
        assert alias == validator.alias, f"validator keyed under {alias!r} is {validator.alias!r}"
        assert state.role_of(validator.steward_did) is Role.STEWARD, f"{alias!r} has no steward"
        assert validator.steward_did not in owners, f"steward {validator.steward_did} owns two validators"
        owners.add(validator.steward_did)
        for endpoint in validator.endpoints():
            assert endpoint not in endpoints, f"endpoint {endpoint} reused"
            endpoints.add(endpoint)
    assert [e.seq_no for e in state.ledger] == list(range(1, len(state.ledger) + 1))


def bootstrap_state(network_name: str, domain: GenesisDoc, pool: GenesisDoc, strict: bool = True) -> PoolState:
    report = verify_genesis_pair(domain, pool, strict=strict)
    if not report.ok:
        raise GenesisInvalid(f"genesis pair has {len(report.violations)} violation(s)", report=report)
    participants = {}
    for txn in domain.transactions():
        participants[txn.dest] = Participant(verkey=txn.verkey, role=txn.role, alias=txn.alias)
    validators = {txn.alias: txn.to_validator() for txn in pool.transactions()}
    ledger = tuple(
        LedgerEntry(seq_no=seq_no, txn=txn, submitter_did=getattr(txn, "from_did", None))
        for seq_no, txn in enumerate([*domain.transactions(), *pool.transactions()], start=1)
    )
    return PoolState(network_name=network_name, participants=participants, validators=validators, ledger=ledger)


def _check_nym(state: PoolState, submitter_role: Role, txn: NymTxn) -> None:
    if submitter_role is not Role.TRUSTEE:
        raise AuthError(AuthCode.NOT_TRUSTEE, f"only a trustee may register a {txn.role.value.lower()}")
    if txn.dest in state.participants:
        raise AuthError(AuthCode.DUPLICATE_DID, f"did {txn.dest} is already registered")


def _check_node(state: PoolState, submitter: str, submitter_role: Role, txn: NodeTxn) -> None:
    if submitter_role is not Role.STEWARD:
        raise AuthError(AuthCode.NOT_STEWARD, "only a steward may add a validator node")
    if txn.from_did != submitter:
        raise AuthError(AuthCode.FOREIGN_NODE, f"node {txn.alias!r} belongs to {txn.from_did}, not {submitter}")
    existing = state.validator_of(submitter)
    if existing is not None:
        raise AuthError(
            AuthCode.STEWARD_ALREADY_HAS_NODE, f"steward {submitter} already operates {existing.alias!r}"
        )
    if txn.alias in state.validators:
        raise AuthError(AuthCode.DUPLICATE_ALIAS, f"alias {txn.alias!r} is taken")
    used = state.endpoints_in_use()
    for endpoint in ((txn.node_ip, txn.node_port), (txn.client_ip, txn.client_port)):
        if endpoint in used:
            raise AuthError(
                AuthCode.DUPLICATE_ENDPOINT, f"endpoint {endpoint[0]}:{endpoint[1]} is used by {used[endpoint]!r}"
            )
    if (txn.node_ip, txn.node_port) == (txn.client_ip, txn.client_port):
        raise AuthError(AuthCode.DUPLICATE_ENDPOINT, f"node and client endpoints of {txn.alias!r} coincide")


def apply_txn(state: PoolState, sub: Submission) -> PoolState:
    """Authorize ``sub`` against ``state`` and return the successor state.

    Raises :class:`AuthError`; ``state`` is unchanged either way.
    """
    role = state.role_of(sub.submitter_did)
    if role is None:
        raise AuthError(AuthCode.UNKNOWN_SUBMITTER, f"submitter {sub.submitter_did} is not a participant")
    txn = sub.txn
    participants = dict(state.participants)
    validators = dict(state.validators)
    if isinstance(txn, NymTxn):
        _check_nym(state, role, txn)
        participants[txn.dest] = Participant(verkey=txn.verkey, role=txn.role, alias=txn.alias)
    elif isinstance(txn, NodeTxn):
        _check_node(state, sub.submitter_did, role, txn)
        validators[txn.alias] = txn.to_validator()
    else:
        raise TypeError(f"cannot apply {type(txn).__name__}")
    entry = LedgerEntry(seq_no=len(state.ledger) + 1, txn=txn, submitter_did=sub.submitter_did)
    return PoolState(
        network_name=state.network_name,
        participants=participants,
        validators=validators,
        ledger=state.ledger + (entry,),
    )


def node_addition(trustee_did: str, steward: ParticipantRecord, validator: ValidatorInfo) -> list[Submission]:
    """The two submissions that onboard a steward together with its node."""
    nym = NymTxn(dest=steward.did, verkey=steward.verkey, role_code="2", alias=steward.name)
    return [
        Submission(submitter_did=trustee_did, txn=nym),
        Submission(submitter_did=steward.did, txn=NodeTxn.from_validator(validator)),
    ]


def add_node_workflow(
    state: PoolState, trustee_did: str, steward: ParticipantRecord, validator: ValidatorInfo
) -> PoolState:
    """Register ``steward`` (as ``trustee_did``) and then its validator, all or nothing."""
    for sub in node_addition(trustee_did, steward, validator):
        state = apply_txn(state, sub)
    return state


def replay(
    network_name: str,
    domain: GenesisDoc,
    pool: GenesisDoc,
    submissions: Iterable[Submission],
    strict: bool = True,
) -> PoolState:
    """Fold :func:`apply_txn` over ``submissions`` starting from genesis.

    A rejected submission aborts with :class:`ReplayAborted` carrying its
    0-based position.
    """
    state = bootstrap_state(network_name, domain, pool, strict=strict)
    for position, sub in enumerate(submissions):
        try:
            state = apply_txn(state, sub)
        except AuthError as exc:
            raise ReplayAborted(position, exc) from exc
    return state
