import json
import random
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import gen
import oracles
from indyforge import errors, keymat
from indyforge.genesis import (
    GenesisDoc,
    GenesisKind,
    NodeTxn,
    NymTxn,
    build_domain_genesis,
    build_pool_genesis,
    parse_genesis,
    serialize_genesis,
    verify_genesis_pair,
)
from indyforge.roster import validate_roster


def _lines(content: bytes) -> list[bytes]:
    return content.splitlines(keepends=True)


def test_domain_has_trustees_then_stewards(domain_doc, fixture_roster):
    assert len(domain_doc) == 7
    assert [e.seq_no for e in domain_doc.txns] == list(range(1, 8))
    assert [e.txn.role_code for e in domain_doc.txns] == ["0"] * 3 + ["2"] * 4
    expected = [p.did for p in fixture_roster.trustees + fixture_roster.stewards]
    assert [e.txn.dest for e in domain_doc.txns] == expected


def test_pool_has_one_node_per_validator(pool_doc, fixture_roster):
    assert len(pool_doc) == 4
    for entry, validator in zip(pool_doc.txns, fixture_roster.validators):
        assert isinstance(entry.txn, NodeTxn)
        assert entry.txn.from_did == validator.steward_did
        assert entry.txn.services == ("VALIDATOR",)


def test_ports_verbatim_in_pool_file(golden_pool):
    for line in golden_pool.splitlines():
        data = json.loads(line)["txn"]["data"]["data"]
        assert (data["node_port"], data["client_port"]) == (9701, 9702)


def test_empty_relaxed_roster():
    roster = validate_roster([], [], strict=False)
    assert len(build_domain_genesis(roster)) == 0
    assert len(build_pool_genesis(roster)) == 0
    assert serialize_genesis(build_domain_genesis(roster)) == b""
    assert parse_genesis(b"", GenesisKind.DOMAIN) == GenesisDoc(GenesisKind.DOMAIN)


def test_build_is_deterministic(fixture_roster):
    assert build_domain_genesis(fixture_roster) == build_domain_genesis(fixture_roster)
    assert build_pool_genesis(fixture_roster) == build_pool_genesis(fixture_roster)


def test_golden_bytes(domain_doc, pool_doc, golden_domain, golden_pool):
    assert serialize_genesis(domain_doc) == golden_domain
    assert serialize_genesis(pool_doc) == golden_pool


def test_golden_txn_ids_match_oracle(golden_domain, golden_pool):
    for content in (golden_domain, golden_pool):
        ids = [json.loads(line)["txnMetadata"]["txnId"] for line in content.splitlines()]
        assert ids == oracles.chain_ids(content)


def test_canonical_layout(golden_domain):
    first = golden_domain.splitlines()[0]
    assert b" " not in first
    obj = json.loads(first)
    assert list(obj) == sorted(obj)
    assert obj["txn"]["type"] == "1" and obj["ver"] == "1"
    assert golden_domain.endswith(b"\n") and b"\r" not in golden_domain


def test_round_trip_fixture(domain_doc, pool_doc, golden_domain, golden_pool):
    assert parse_genesis(golden_domain, "Domain") == domain_doc
    assert parse_genesis(golden_pool, GenesisKind.POOL) == pool_doc


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(min_value=0, max_value=2**32))
def test_round_trip_random_rosters(seed):
    roster = gen.random_roster(random.Random(seed))
    for doc in (build_domain_genesis(roster), build_pool_genesis(roster)):
        assert parse_genesis(serialize_genesis(doc), doc.kind) == doc


def test_seq_gap(golden_domain):
    lines = _lines(golden_domain)
    with pytest.raises(errors.SeqNoGap) as info:
        parse_genesis(lines[0] + lines[2], GenesisKind.DOMAIN)
    assert (info.value.expected, info.value.found) == (2, 3)


def test_edited_ip_breaks_chain(golden_pool):
    lines = _lines(golden_pool)
    ip = json.loads(lines[1])["txn"]["data"]["data"]["node_ip"]
    lines[1] = lines[1].replace(f'"node_ip":"{ip}"'.encode(), b'"node_ip":"10.9.9.9"')
    tampered = b"".join(lines)
    with pytest.raises(errors.ChainMismatch) as info:
        parse_genesis(tampered, GenesisKind.POOL)
    assert info.value.seq_no == 2
    # the id the parser expected is what the oracle computes for the edited line
    assert info.value.context["expected"] == oracles.chain_ids(tampered)[1]


def test_kind_mismatch(golden_pool, golden_domain):
    with pytest.raises(errors.KindMismatch):
        parse_genesis(golden_pool, GenesisKind.DOMAIN)
    with pytest.raises(errors.KindMismatch):
        parse_genesis(golden_domain, GenesisKind.POOL)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: b"{not json\n" + c,
        lambda c: c[:-1],
        lambda c: c.replace(b'"ver":"1"', b'"ver": "1"', 1),
        lambda c: c.replace(b"\n", b"\r\n"),
        lambda c: b"[]\n",
        lambda c: c + b"\n",
    ],
)
def test_bad_json(golden_domain, mutate):
    with pytest.raises(errors.BadJson):
        parse_genesis(mutate(golden_domain), GenesisKind.DOMAIN)


def test_truncated_file_is_rejected(golden_pool):
    with pytest.raises(errors.GenesisFormatError):
        parse_genesis(golden_pool[: len(golden_pool) // 2 + 17], GenesisKind.POOL)


def test_fixture_pair_verifies(domain_doc, pool_doc):
    report = verify_genesis_pair(domain_doc, pool_doc, strict=True)
    assert report.ok and report.violations == ()


def _rebuild(doc, index, **changes):
    txns = doc.transactions()
    txns[index] = replace(txns[index], **changes)
    return GenesisDoc.from_txns(doc.kind, txns)


def test_unknown_steward(domain_doc, pool_doc):
    stranger = keymat.derive_signing_identity(b"x" * 32).did
    report = verify_genesis_pair(domain_doc, _rebuild(pool_doc, 0, from_did=stranger))
    assert report.codes() == ["UnknownSteward"]
    assert "unknown steward" in report.violations[0].detail


def test_trustee_is_not_a_steward(domain_doc, pool_doc):
    trustee = domain_doc.txns[0].txn.dest
    report = verify_genesis_pair(domain_doc, _rebuild(pool_doc, 0, from_did=trustee))
    assert "UnknownSteward" in report.codes()


def test_flipped_pop_bit(domain_doc, pool_doc):
    raw = bytearray(keymat.b58decode(pool_doc.txns[2].txn.blskey_pop))
    raw[10] ^= 0x04
    report = verify_genesis_pair(domain_doc, _rebuild(pool_doc, 2, blskey_pop=keymat.b58encode(bytes(raw))))
    assert report.codes() == ["InvalidProofOfPossession"]
    assert report.violations[0].seq_no == 3
    assert "invalid proof of possession" in report.violations[0].detail


def test_swapped_pop_between_nodes(domain_doc, pool_doc):
    other = pool_doc.txns[1].txn.blskey_pop
    report = verify_genesis_pair(domain_doc, _rebuild(pool_doc, 0, blskey_pop=other))
    assert report.codes() == ["InvalidProofOfPossession"]


def test_steward_with_two_nodes(domain_doc, pool_doc):
    owner = pool_doc.txns[0].txn.from_did
    report = verify_genesis_pair(domain_doc, _rebuild(pool_doc, 1, from_did=owner))
    assert "MultipleValidatorsPerSteward" in report.codes()


def test_duplicate_alias_and_endpoint(domain_doc, pool_doc):
    first = pool_doc.txns[0].txn
    report = verify_genesis_pair(domain_doc, _rebuild(pool_doc, 1, alias=first.alias))
    assert report.codes() == ["DuplicateAlias"]
    report = verify_genesis_pair(domain_doc, _rebuild(pool_doc, 1, client_ip=first.node_ip, client_port=9701))
    assert report.codes() == ["DuplicateEndpoint"]


def test_strict_counts(fixture_net):
    roster = validate_roster(fixture_net.trustees[:2], fixture_net.steward_pairs[:3], strict=False)
    domain, pool = build_domain_genesis(roster), build_pool_genesis(roster)
    assert verify_genesis_pair(domain, pool, strict=False).ok
    assert verify_genesis_pair(domain, pool, strict=True).codes() == ["TooFewTrustees", "WrongStewardCount"]


def test_kind_purity(domain_doc, pool_doc):
    assert not verify_genesis_pair(pool_doc, domain_doc).ok
    mixed = GenesisDoc(GenesisKind.DOMAIN, domain_doc.txns + pool_doc.txns[:1])
    assert "KindMismatch" in verify_genesis_pair(mixed, pool_doc).codes()


def test_coupling_checked(domain_doc, pool_doc):
    other = domain_doc.txns[1].txn.verkey
    report = verify_genesis_pair(_rebuild(domain_doc, 0, verkey=other), pool_doc)
    assert report.codes() == ["CouplingViolation"]


def test_hand_built_doc_with_stale_chain(domain_doc, pool_doc):
    entries = list(pool_doc.txns)
    entries[0] = replace(entries[0], txn=replace(entries[0].txn, node_port=9999))
    report = verify_genesis_pair(domain_doc, GenesisDoc(GenesisKind.POOL, tuple(entries)))
    assert "ChainMismatch" in report.codes()


def test_nym_role_code_validated():
    with pytest.raises(ValueError):
        NymTxn("did", "verkey", "101")


def _detected(content: bytes, kind, other: bytes) -> bool:
    try:
        doc = parse_genesis(content, kind)
        peer = parse_genesis(other, GenesisKind.POOL if kind is GenesisKind.DOMAIN else GenesisKind.DOMAIN)
    except errors.GenesisFormatError:
        return True
    pair = (doc, peer) if kind is GenesisKind.DOMAIN else (peer, doc)
    return not verify_genesis_pair(*pair).ok


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_single_byte_mutations_detected(data, golden_domain, golden_pool):
    kind = data.draw(st.sampled_from([GenesisKind.DOMAIN, GenesisKind.POOL]))
    content, other = (golden_domain, golden_pool) if kind is GenesisKind.DOMAIN else (golden_pool, golden_domain)
    pos = data.draw(st.integers(0, len(content) - 1))
    value = data.draw(st.integers(0, 255).filter(lambda b: b != content[pos]))
    mutated = content[:pos] + bytes([value]) + content[pos + 1 :]
    assert _detected(mutated, kind, other)
