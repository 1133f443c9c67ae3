"""Trustee and Steward CSV sheets: parsing and governance validation.

Two sheets feed genesis construction:

* trustees: ``name,did,verkey``
* stewards: ``name,did,verkey,alias,node_ip,node_port,client_ip,client_port,node_verkey,bls_key,bls_pop``

Rows are reported with spreadsheet numbering, so the header is row 1 and the
first data row is row 2.
"""

from __future__ import annotations

import csv
import enum
import io
import ipaddress
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from . import keymat
from .errors import (
    BadEncoding,
    BadEndpoint,
    CouplingViolation,
    CsvShape,
    DuplicateAlias,
    DuplicateDid,
    DuplicateEndpoint,
    EncodingError,
    MultipleValidatorsPerSteward,
    TooFewTrustees,
    WrongStewardCount,
)

TRUSTEE_COLUMNS = ("name", "did", "verkey")
STEWARD_COLUMNS = (
    "name",
    "did",
    "verkey",
    "alias",
    "node_ip",
    "node_port",
    "client_ip",
    "client_port",
    "node_verkey",
    "bls_key",
    "bls_pop",
)

MIN_TRUSTEES = 3
GENESIS_STEWARDS = 4


class Role(str, enum.Enum):
    TRUSTEE = "Trustee"
    STEWARD = "Steward"


@dataclass(frozen=True)
class ParticipantRecord:
    name: str
    did: str
    verkey: str
    role: Role


@dataclass(frozen=True)
class ValidatorInfo:
    alias: str
    node_ip: str
    node_port: int
    client_ip: str
    client_port: int
    verkey: str
    bls_key: str
    bls_pop: str
    steward_did: str

    @property
    def node_endpoint(self) -> tuple[str, int]:
        return (self.node_ip, self.node_port)

    @property
    def client_endpoint(self) -> tuple[str, int]:
        return (self.client_ip, self.client_port)

    def endpoints(self) -> tuple[tuple[str, int], tuple[str, int]]:
        return (self.node_endpoint, self.client_endpoint)


@dataclass(frozen=True)
class Roster:
    trustees: tuple[ParticipantRecord, ...]
    stewards: tuple[ParticipantRecord, ...]
    validators: tuple[ValidatorInfo, ...]
    strict: bool = True

    def steward_pairs(self) -> list[tuple[ParticipantRecord, ValidatorInfo]]:
        return list(zip(self.stewards, self.validators))


def normalize_ip(text: str) -> str:
    """Canonical text form of an IPv4/IPv6 address; ValueError if unparsable."""
    return str(ipaddress.ip_address(text.strip()))


def parse_port(text: str | int) -> int:
    if isinstance(text, bool):
        raise ValueError(f"bad port {text!r}")
    if isinstance(text, int):
        port = text
    else:
        text = text.strip()
        if not text.isdigit():
            raise ValueError(f"port {text!r} is not a number")
        port = int(text)
    if not 1 <= port <= 65535:
        raise ValueError(f"port {port} outside 1..65535")
    return port


def check_endpoints(
    node_ip: str, node_port: str | int, client_ip: str, client_port: str | int
) -> tuple[str, int, str, int]:
    """Validate and normalize a validator's two endpoints.

    Raises ValueError describing the first problem found. Both endpoints may
    share an IP (common behind NAT) but not the full (ip, port) pair.
    """
    nip, cip = normalize_ip(node_ip), normalize_ip(client_ip)
    nport, cport = parse_port(node_port), parse_port(client_port)
    if (nip, nport) == (cip, cport):
        raise ValueError(f"node and client endpoints are both {nip}:{nport}")
    return nip, nport, cip, cport


def _read_rows(content: bytes, columns: Sequence[str], source: str) -> list[tuple[int, dict[str, str]]]:
    try:
        text = content.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise CsvShape(f"not UTF-8: {exc}", source=source) from None
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        header = next(reader, None)
        if header is None:
            raise CsvShape("empty file, expected a header row", source=source)
        header = [cell.strip() for cell in header]
        if tuple(header) != tuple(columns):
            raise CsvShape(
                f"header must be {','.join(columns)}; got {','.join(header)}", source=source, row=1
            )
        rows: list[tuple[int, dict[str, str]]] = []
        for row_no, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(columns):
                raise CsvShape(
                    f"expected {len(columns)} columns, got {len(cells)}", source=source, row=row_no
                )
            rows.append((row_no, {col: cell.strip() for col, cell in zip(columns, cells)}))
    except csv.Error as exc:
        raise CsvShape(f"malformed CSV: {exc}", source=source, row=reader.line_num) from None
    return rows


def _participant(fields: dict[str, str], role: Role, source: str, row: int) -> ParticipantRecord:
    if not fields["name"]:
        raise CsvShape("name is empty", source=source, row=row)
    did, verkey = fields["did"], fields["verkey"]
    try:
        raw_did = keymat.b58decode(did)
        raw_verkey = keymat.b58decode(verkey)
    except EncodingError as exc:
        raise BadEncoding(exc.message, source=source, row=row) from None
    if len(raw_verkey) != keymat.VERKEY_LEN:
        raise BadEncoding(f"verkey decodes to {len(raw_verkey)} bytes, expected 32", source=source, row=row)
    if len(raw_did) != keymat.DID_LEN:
        raise BadEncoding(f"did decodes to {len(raw_did)} bytes, expected 16", source=source, row=row)
    if raw_verkey[: keymat.DID_LEN] != raw_did:
        raise CouplingViolation(
            f"did {did} is not the first 16 bytes of verkey {verkey}", source=source, row=row
        )
    return ParticipantRecord(name=fields["name"], did=did, verkey=verkey, role=role)


def parse_trustee_csv(content: bytes, source: str = "trustees.csv") -> list[ParticipantRecord]:
    return [
        _participant(fields, Role.TRUSTEE, source, row)
        for row, fields in _read_rows(content, TRUSTEE_COLUMNS, source)
    ]


def _validator(fields: dict[str, str], steward_did: str, source: str, row: int) -> ValidatorInfo:
    if not fields["alias"]:
        raise CsvShape("alias is empty", source=source, row=row)
    try:
        nip, nport, cip, cport = check_endpoints(
            fields["node_ip"], fields["node_port"], fields["client_ip"], fields["client_port"]
        )
    except ValueError as exc:
        raise BadEndpoint(str(exc), source=source, row=row) from None
    for column, expected in (("node_verkey", keymat.VERKEY_LEN), ("bls_key", None), ("bls_pop", None)):
        try:
            raw = keymat.b58decode(fields[column])
        except EncodingError as exc:
            raise BadEncoding(f"{column}: {exc.message}", source=source, row=row) from None
        if expected is not None and len(raw) != expected:
            raise BadEncoding(f"{column} decodes to {len(raw)} bytes, expected {expected}", source=source, row=row)
    return ValidatorInfo(
        alias=fields["alias"],
        node_ip=nip,
        node_port=nport,
        client_ip=cip,
        client_port=cport,
        verkey=fields["node_verkey"],
        bls_key=fields["bls_key"],
        bls_pop=fields["bls_pop"],
        steward_did=steward_did,
    )


def parse_steward_csv(
    content: bytes, source: str = "stewards.csv"
) -> list[tuple[ParticipantRecord, ValidatorInfo]]:
    pairs = []
    for row, fields in _read_rows(content, STEWARD_COLUMNS, source):
        steward = _participant(fields, Role.STEWARD, source, row)
        pairs.append((steward, _validator(fields, steward.did, source, row)))
    return pairs


def parse_steward_row(line: str, source: str = "<row>") -> tuple[ParticipantRecord, ValidatorInfo]:
    """Parse a single headerless steward row (used by ``node add``)."""
    content = (",".join(STEWARD_COLUMNS) + "\n" + line.strip() + "\n").encode("utf-8")
    pairs = parse_steward_csv(content, source)
    if len(pairs) != 1:
        raise CsvShape(f"expected exactly one steward row, got {len(pairs)}", source=source)
    return pairs[0]


def validate_roster(
    trustees: Iterable[ParticipantRecord],
    steward_pairs: Iterable[tuple[ParticipantRecord, ValidatorInfo]],
    strict: bool = True,
) -> Roster:
    """Apply the governance rules and return an immutable :class:`Roster`.

    Uniqueness rules always apply. ``strict`` adds the production counting
    rules: at least three trustees and exactly four genesis stewards. Row
    numbers in errors count steward pairs from 1.
    """
    trustees = tuple(trustees)
    pairs = list(steward_pairs)
    stewards = tuple(s for s, _ in pairs)
    validators = tuple(v for _, v in pairs)

    owners: dict[str, int] = {}
    for index, (steward, validator) in enumerate(pairs, start=1):
        if validator.steward_did != steward.did:
            raise MultipleValidatorsPerSteward(
                f"validator {validator.alias!r} is owned by {validator.steward_did}, not {steward.did}",
                row=index,
            )
        if steward.did in owners:
            raise MultipleValidatorsPerSteward(
                f"steward {steward.did} already operates a validator (entry {owners[steward.did]})",
                row=index,
            )
        owners[steward.did] = index

    seen_dids: dict[str, str] = {}
    for record in trustees + stewards:
        if record.did in seen_dids:
            raise DuplicateDid(
                f"did {record.did} appears as both {seen_dids[record.did]} and {record.role.value} {record.name!r}"
            )
        seen_dids[record.did] = f"{record.role.value} {record.name!r}"

    aliases: set[str] = set()
    endpoints: dict[tuple[str, int], str] = {}
    for index, validator in enumerate(validators, start=1):
        if validator.alias in aliases:
            raise DuplicateAlias(f"alias {validator.alias!r} used by more than one validator", row=index)
        aliases.add(validator.alias)
        for endpoint in validator.endpoints():
            if endpoint in endpoints:
                raise DuplicateEndpoint(
                    f"endpoint {endpoint[0]}:{endpoint[1]} used by {endpoints[endpoint]!r} and {validator.alias!r}",
                    row=index,
                )
            endpoints[endpoint] = validator.alias

    if strict:
        if len(trustees) < MIN_TRUSTEES:
            raise TooFewTrustees(f"a production network needs at least {MIN_TRUSTEES} trustees, got {len(trustees)}")
        if len(stewards) != GENESIS_STEWARDS:
            raise WrongStewardCount(f"exactly {GENESIS_STEWARDS} genesis stewards required, got {len(stewards)}")

    return Roster(trustees=trustees, stewards=stewards, validators=validators, strict=strict)
