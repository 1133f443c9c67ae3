"""Domain and pool genesis files.

Each file is line-delimited canonical JSON in the usual indy layout::

    {"reqSignature":{},"txn":{"data":{...},"metadata":{...},"type":"1"},
     "txnMetadata":{"seqNo":1,"txnId":"..."},"ver":"1"}

``txnId`` links every transaction to its predecessor:
``txnId[k] = sha256(txnId[k-1] + canonical(line[k] without txnMetadata))``
with the empty string standing in for ``txnId[0]``. Any edit to a body line
therefore breaks the chain at that position.
"""

from __future__ import annotations

import enum
import hashlib
import json
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any, Union

from . import keymat
from .errors import BadJson, ChainMismatch, EncodingError, KindMismatch, SeqNoGap
from .roster import Role, Roster, ValidatorInfo, check_endpoints

NYM_TYPE = "1"
NODE_TYPE = "0"
TXN_VERSION = "1"

ROLE_CODES = {Role.TRUSTEE: "0", Role.STEWARD: "2"}
ROLES_BY_CODE = {code: role for role, code in ROLE_CODES.items()}

VALIDATOR_SERVICE = "VALIDATOR"

DOMAIN_FILE = "domain_transactions_genesis"
POOL_FILE = "pool_transactions_genesis"


class GenesisKind(str, enum.Enum):
    DOMAIN = "Domain"
    POOL = "Pool"

    @property
    def file_name(self) -> str:
        return DOMAIN_FILE if self is GenesisKind.DOMAIN else POOL_FILE


def canonical_json(obj: Any) -> bytes:
    """Sorted keys, no insignificant whitespace, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


@dataclass(frozen=True)
class NymTxn:
    dest: str
    verkey: str
    role_code: str
    alias: str | None = None

    def __post_init__(self) -> None:
        if self.role_code not in ROLES_BY_CODE:
            raise ValueError(f"role_code must be one of {sorted(ROLES_BY_CODE)}, got {self.role_code!r}")

    @property
    def role(self) -> Role:
        return ROLES_BY_CODE[self.role_code]

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {"dest": self.dest, "role": self.role_code, "verkey": self.verkey}
        if self.alias is not None:
            data["alias"] = self.alias
        return {"data": data, "metadata": {}, "type": NYM_TYPE}


@dataclass(frozen=True)
class NodeTxn:
    dest: str
    alias: str
    node_ip: str
    node_port: int
    client_ip: str
    client_port: int
    blskey: str
    blskey_pop: str
    from_did: str
    services: tuple[str, ...] = (VALIDATOR_SERVICE,)

    def __post_init__(self) -> None:
        if not self.services:
            raise ValueError("NODE txn needs at least one service")

    @classmethod
    def from_validator(cls, validator: ValidatorInfo) -> NodeTxn:
        return cls(
            dest=validator.verkey,
            alias=validator.alias,
            node_ip=validator.node_ip,
            node_port=validator.node_port,
            client_ip=validator.client_ip,
            client_port=validator.client_port,
            blskey=validator.bls_key,
            blskey_pop=validator.bls_pop,
            from_did=validator.steward_did,
        )

    def to_validator(self) -> ValidatorInfo:
        return ValidatorInfo(
            alias=self.alias,
            node_ip=self.node_ip,
            node_port=self.node_port,
            client_ip=self.client_ip,
            client_port=self.client_port,
            verkey=self.dest,
            bls_key=self.blskey,
            bls_pop=self.blskey_pop,
            steward_did=self.from_did,
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "data": {
                "data": {
                    "alias": self.alias,
                    "blskey": self.blskey,
                    "blskey_pop": self.blskey_pop,
                    "client_ip": self.client_ip,
                    "client_port": self.client_port,
                    "node_ip": self.node_ip,
                    "node_port": self.node_port,
                    "services": list(self.services),
                },
                "dest": self.dest,
            },
            "metadata": {"from": self.from_did},
            "type": NODE_TYPE,
        }


Txn = Union[NymTxn, NodeTxn]


def _expect(obj: Any, key: str, kind: type | tuple[type, ...]) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise ValueError(f"missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ValueError(f"field {key!r} has the wrong type")
    return value


def txn_from_json(obj: Any) -> Txn:
    """Inverse of ``NymTxn.to_json`` / ``NodeTxn.to_json``; ValueError on bad shape."""
    if not isinstance(obj, dict) or set(obj) != {"data", "metadata", "type"}:
        raise ValueError("txn must have exactly data, metadata and type")
    kind = _expect(obj, "type", str)
    data = _expect(obj, "data", dict)
    metadata = _expect(obj, "metadata", dict)
    if kind == NYM_TYPE:
        if metadata or not {"dest", "role", "verkey"} <= set(data) <= {"dest", "role", "verkey", "alias"}:
            raise ValueError("unexpected NYM fields")
        alias = _expect(data, "alias", str) if "alias" in data else None
        return NymTxn(
            dest=_expect(data, "dest", str),
            verkey=_expect(data, "verkey", str),
            role_code=_expect(data, "role", str),
            alias=alias,
        )
    if kind == NODE_TYPE:
        if set(data) != {"data", "dest"} or set(metadata) != {"from"}:
            raise ValueError("unexpected NODE fields")
        inner = _expect(data, "data", dict)
        expected = {"alias", "blskey", "blskey_pop", "client_ip", "client_port", "node_ip", "node_port", "services"}
        if set(inner) != expected:
            raise ValueError("unexpected NODE data fields")
        services = _expect(inner, "services", list)
        if not all(isinstance(s, str) for s in services):
            raise ValueError("services must be strings")
        return NodeTxn(
            dest=_expect(data, "dest", str),
            alias=_expect(inner, "alias", str),
            node_ip=_expect(inner, "node_ip", str),
            node_port=_expect(inner, "node_port", int),
            client_ip=_expect(inner, "client_ip", str),
            client_port=_expect(inner, "client_port", int),
            blskey=_expect(inner, "blskey", str),
            blskey_pop=_expect(inner, "blskey_pop", str),
            from_did=_expect(metadata, "from", str),
            services=tuple(services),
        )
    raise ValueError(f"unknown txn type {kind!r}")


@dataclass(frozen=True)
class GenesisEntry:
    seq_no: int
    txn_id: str
    txn: Txn

    def body(self) -> dict[str, Any]:
        return {"reqSignature": {}, "txn": self.txn.to_json(), "ver": TXN_VERSION}

    def to_json(self) -> dict[str, Any]:
        out = self.body()
        out["txnMetadata"] = {"seqNo": self.seq_no, "txnId": self.txn_id}
        return out


def chain_txn_id(previous: str, body: dict[str, Any]) -> str:
    return hashlib.sha256(previous.encode("ascii") + canonical_json(body)).hexdigest()


@dataclass(frozen=True)
class GenesisDoc:
    kind: GenesisKind
    txns: tuple[GenesisEntry, ...] = ()

    @classmethod
    def from_txns(cls, kind: GenesisKind, txns: Iterable[Txn]) -> GenesisDoc:
        entries = []
        previous = ""
        for seq_no, txn in enumerate(txns, start=1):
            entry = GenesisEntry(seq_no=seq_no, txn_id="", txn=txn)
            previous = chain_txn_id(previous, entry.body())
            entries.append(GenesisEntry(seq_no=seq_no, txn_id=previous, txn=txn))
        return cls(kind=kind, txns=tuple(entries))

    def __len__(self) -> int:
        return len(self.txns)

    def transactions(self) -> list[Txn]:
        return [entry.txn for entry in self.txns]


def build_domain_genesis(roster: Roster) -> GenesisDoc:
    txns = [
        NymTxn(dest=p.did, verkey=p.verkey, role_code=ROLE_CODES[p.role], alias=p.name)
        for p in (*roster.trustees, *roster.stewards)
    ]
    return GenesisDoc.from_txns(GenesisKind.DOMAIN, txns)


def build_pool_genesis(roster: Roster) -> GenesisDoc:
    return GenesisDoc.from_txns(GenesisKind.POOL, [NodeTxn.from_validator(v) for v in roster.validators])


def serialize_genesis(doc: GenesisDoc) -> bytes:
    return b"".join(canonical_json(entry.to_json()) + b"\n" for entry in doc.txns)


def _kind_of_type(txn_type: Any) -> GenesisKind | None:
    return {NYM_TYPE: GenesisKind.DOMAIN, NODE_TYPE: GenesisKind.POOL}.get(txn_type)


def parse_genesis(content: bytes, kind: GenesisKind | str) -> GenesisDoc:
    """Rebuild a :class:`GenesisDoc`, re-checking seqNo continuity and the txnId chain.

    Lines must be byte-for-byte canonical; anything else (stray whitespace,
    reordered keys, a missing final LF) is reported as :class:`BadJson`.
    """
    kind = GenesisKind(kind)
    if not content:
        return GenesisDoc(kind=kind)
    if not content.endswith(b"\n"):
        raise BadJson(content.count(b"\n") + 1, "file must end with a line feed")
    entries = []
    previous = ""
    for line_no, line in enumerate(content[:-1].split(b"\n"), start=1):
        try:
            obj = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BadJson(line_no, f"not JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise BadJson(line_no, "not a JSON object")
        if canonical_json(obj) != line:
            raise BadJson(line_no, "not in canonical form")
        if set(obj) != {"reqSignature", "txn", "txnMetadata", "ver"}:
            raise BadJson(line_no, "unexpected top-level fields")
        txn_type = obj["txn"].get("type") if isinstance(obj["txn"], dict) else None
        found_kind = _kind_of_type(txn_type)
        if found_kind is not None and found_kind is not kind:
            raise KindMismatch(line_no, kind.value, "NYM" if found_kind is GenesisKind.DOMAIN else "NODE")
        meta = obj["txnMetadata"]
        if not isinstance(meta, dict) or set(meta) != {"seqNo", "txnId"}:
            raise BadJson(line_no, "txnMetadata must hold exactly seqNo and txnId")
        if meta["seqNo"] != line_no or isinstance(meta["seqNo"], bool):
            raise SeqNoGap(line_no, meta["seqNo"])
        if obj["reqSignature"] != {} or obj["ver"] != TXN_VERSION:
            raise BadJson(line_no, "unsupported reqSignature or ver")
        try:
            txn = txn_from_json(obj["txn"])
        except ValueError as exc:
            raise BadJson(line_no, str(exc)) from None
        entry = GenesisEntry(seq_no=line_no, txn_id="", txn=txn)
        expected = chain_txn_id(previous, entry.body())
        if meta["txnId"] != expected:
            raise ChainMismatch(line_no, expected, str(meta["txnId"]))
        entries.append(GenesisEntry(seq_no=line_no, txn_id=expected, txn=txn))
        previous = expected
    return GenesisDoc(kind=kind, txns=tuple(entries))


def infer_kind(content: bytes) -> GenesisKind:
    """Guess the kind of a genesis file from its first transaction type."""
    first = content.split(b"\n", 1)[0]
    try:
        obj = json.loads(first.decode("utf-8"))
        found = _kind_of_type(obj["txn"]["type"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise BadJson(1, f"cannot determine genesis kind: {exc}") from None
    if found is None:
        raise BadJson(1, "cannot determine genesis kind")
    return found


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str
    kind: str | None = None
    seq_no: int | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"code": self.code, "message": self.detail}
        if self.kind is not None:
            out["kind"] = self.kind
        if self.seq_no is not None:
            out["seqNo"] = self.seq_no
        return out


@dataclass(frozen=True)
class VerificationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def verify_genesis_pair(domain: GenesisDoc, pool: GenesisDoc, strict: bool = True) -> VerificationReport:
    """Cross-check a domain/pool pair; an empty report means the pair is launch-ready."""
    found: list[Violation] = []

    def flag(code: str, detail: str, doc: GenesisDoc, seq_no: int | None = None) -> None:
        found.append(Violation(code, detail, doc.kind.value, seq_no))

    for doc, expected_kind, expected_type in ((domain, GenesisKind.DOMAIN, NymTxn), (pool, GenesisKind.POOL, NodeTxn)):
        if doc.kind is not expected_kind:
            flag("KindMismatch", f"expected a {expected_kind.value} genesis, got {doc.kind.value}", doc)
        for entry in doc.txns:
            if not isinstance(entry.txn, expected_type):
                flag("KindMismatch", f"{type(entry.txn).__name__} in a {doc.kind.value} genesis", doc, entry.seq_no)
        if [e.seq_no for e in doc.txns] != list(range(1, len(doc.txns) + 1)):
            flag("SeqNoGap", "seqNo values are not 1..N", doc)
        if doc.txns != GenesisDoc.from_txns(doc.kind, doc.transactions()).txns:
            flag("ChainMismatch", "txnId chain does not match transaction contents", doc)

    nyms = [e for e in domain.txns if isinstance(e.txn, NymTxn)]
    nodes = [e for e in pool.txns if isinstance(e.txn, NodeTxn)]

    roles: dict[str, Role] = {}
    for entry in nyms:
        txn = entry.txn
        if txn.dest in roles:
            flag("DuplicateDid", f"did {txn.dest} registered more than once", domain, entry.seq_no)
            continue
        roles[txn.dest] = txn.role
        try:
            coupled = keymat.did_matches_verkey(txn.dest, txn.verkey)
        except EncodingError:
            coupled = False
        if not coupled:
            flag("CouplingViolation", f"did {txn.dest} does not match verkey {txn.verkey}", domain, entry.seq_no)

    owners: dict[str, str] = {}
    aliases: set[str] = set()
    endpoints: dict[tuple[str, int], str] = {}
    for entry in nodes:
        txn = entry.txn
        if roles.get(txn.from_did) is not Role.STEWARD:
            flag("UnknownSteward", f"unknown steward {txn.from_did} submitted node {txn.alias!r}", pool, entry.seq_no)
        if txn.from_did in owners:
            flag(
                "MultipleValidatorsPerSteward",
                f"steward {txn.from_did} already operates {owners[txn.from_did]!r}",
                pool,
                entry.seq_no,
            )
        else:
            owners[txn.from_did] = txn.alias
        if txn.alias in aliases:
            flag("DuplicateAlias", f"duplicate alias {txn.alias!r}", pool, entry.seq_no)
        aliases.add(txn.alias)
        try:
            check_endpoints(txn.node_ip, txn.node_port, txn.client_ip, txn.client_port)
        except ValueError as exc:
            flag("BadEndpoint", str(exc), pool, entry.seq_no)
        for endpoint in {(txn.node_ip, txn.node_port), (txn.client_ip, txn.client_port)}:
            if endpoint in endpoints:
                flag(
                    "DuplicateEndpoint",
                    f"duplicate endpoint {endpoint[0]}:{endpoint[1]} ({endpoints[endpoint]!r} and {txn.alias!r})",
                    pool,
                    entry.seq_no,
                )
            else:
                endpoints[endpoint] = txn.alias
        try:
            pop_ok = keymat.verify_pop(txn.blskey, txn.blskey_pop)
        except EncodingError:
            pop_ok = False
        if not pop_ok:
            flag("InvalidProofOfPossession", f"invalid proof of possession for node {txn.alias!r}", pool, entry.seq_no)

    if strict:
        counts = Counter(roles.values())
        if counts[Role.TRUSTEE] < 3:
            flag("TooFewTrustees", f"at least 3 trustees required, got {counts[Role.TRUSTEE]}", domain)
        if counts[Role.STEWARD] != 4:
            flag("WrongStewardCount", f"exactly 4 genesis stewards required, got {counts[Role.STEWARD]}", domain)

    return VerificationReport(tuple(found))


def load_pair(domain_bytes: bytes, pool_bytes: bytes) -> tuple[GenesisDoc, GenesisDoc]:
    return parse_genesis(domain_bytes, GenesisKind.DOMAIN), parse_genesis(pool_bytes, GenesisKind.POOL)

