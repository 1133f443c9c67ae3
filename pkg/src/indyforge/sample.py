"""Deterministic demo networks for tests, fixtures and simulator metrics.

Seeds are the familiar indy-style 32-character ASCII strings, e.g.
``000000000000000000000000Steward1``. They are public; never use them for a
real network.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from . import keymat
from .roster import (
    STEWARD_COLUMNS,
    TRUSTEE_COLUMNS,
    ParticipantRecord,
    Role,
    Roster,
    ValidatorInfo,
    validate_roster,
)

NODE_PORT = 9701
CLIENT_PORT = 9702


def demo_seed(label: str) -> bytes:
    return label.rjust(keymat.SEED_LEN, "0").encode("ascii")


def demo_ip(index: int) -> str:
    return f"10.0.{index // 250}.{index % 250 + 1}"


@dataclass
class SampleNetwork:
    trustees: list[ParticipantRecord] = field(default_factory=list)
    steward_pairs: list[tuple[ParticipantRecord, ValidatorInfo]] = field(default_factory=list)
    # label -> seed, for secret-hygiene checks
    seeds: dict[str, bytes] = field(default_factory=dict)

    def roster(self, strict: bool = True, limit: int | None = None) -> Roster:
        pairs = self.steward_pairs if limit is None else self.steward_pairs[:limit]
        return validate_roster(self.trustees, pairs, strict=strict)

    def trustee_csv(self) -> bytes:
        return _csv(TRUSTEE_COLUMNS, [(t.name, t.did, t.verkey) for t in self.trustees])

    def steward_csv(self, limit: int | None = None) -> bytes:
        pairs = self.steward_pairs if limit is None else self.steward_pairs[:limit]
        return _csv(STEWARD_COLUMNS, [steward_row(s, v) for s, v in pairs])


def steward_row(steward: ParticipantRecord, validator: ValidatorInfo) -> tuple[str, ...]:
    return (
        steward.name,
        steward.did,
        steward.verkey,
        validator.alias,
        validator.node_ip,
        str(validator.node_port),
        validator.client_ip,
        str(validator.client_port),
        validator.verkey,
        validator.bls_key,
        validator.bls_pop,
    )


def _csv(header: tuple[str, ...], rows: list[tuple[str, ...]]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def demo_participant(label: str, role: Role, seeds: dict[str, bytes] | None = None) -> ParticipantRecord:
    seed = demo_seed(label)
    if seeds is not None:
        seeds[label] = seed
    ident = keymat.derive_signing_identity(seed)
    return ParticipantRecord(name=label, did=ident.did, verkey=ident.verkey, role=role)


def demo_validator(index: int, steward_did: str, seeds: dict[str, bytes] | None = None) -> ValidatorInfo:
    label = f"Node{index}"
    seed = demo_seed(label)
    if seeds is not None:
        seeds[label] = seed
    ident = keymat.derive_signing_identity(seed)
    bls = keymat.derive_bls_identity(seed)
    ip = demo_ip(index)
    return ValidatorInfo(
        alias=label,
        node_ip=ip,
        node_port=NODE_PORT,
        client_ip=ip,
        client_port=CLIENT_PORT,
        verkey=ident.verkey,
        bls_key=bls.bls_key,
        bls_pop=bls.bls_pop,
        steward_did=steward_did,
    )


def sample_network(stewards: int = 4, trustees: int = 3) -> SampleNetwork:
    """Build ``trustees`` Trustee records and ``stewards`` steward/validator pairs (1-based labels)."""
    net = SampleNetwork()
    for i in range(1, trustees + 1):
        net.trustees.append(demo_participant(f"Trustee{i}", Role.TRUSTEE, net.seeds))
    for i in range(1, stewards + 1):
        steward = demo_participant(f"Steward{i}", Role.STEWARD, net.seeds)
        net.steward_pairs.append((steward, demo_validator(i, steward.did, net.seeds)))
    return net
