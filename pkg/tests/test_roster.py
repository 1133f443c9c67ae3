import random
from dataclasses import replace

import pytest

import gen
from indyforge import errors, sample
from indyforge.roster import (
    Role,
    parse_steward_csv,
    parse_steward_row,
    parse_trustee_csv,
    validate_roster,
)
from conftest import FIXTURES

STEWARD_HEADER = "name,did,verkey,alias,node_ip,node_port,client_ip,client_port,node_verkey,bls_key,bls_pop\n"


def _rows(net, limit=None):
    return [sample.steward_row(s, v) for s, v in net.steward_pairs[:limit]]


def _steward_csv(rows) -> bytes:
    return (STEWARD_HEADER + "".join(",".join(r) + "\n" for r in rows)).encode()


def test_trustee_sheet_in_file_order():
    records = parse_trustee_csv((FIXTURES / "trustees.csv").read_bytes())
    assert [r.name for r in records] == ["Trustee1", "Trustee2", "Trustee3"]
    assert all(r.role is Role.TRUSTEE for r in records)


def test_header_only_trustee_sheet():
    assert parse_trustee_csv(b"name,did,verkey\n") == []


def test_crlf_bom_quotes_and_whitespace(fixture_net):
    t = fixture_net.trustees[0]
    content = f'﻿name , did,verkey\r\n"Doe, Jane",  {t.did}  ,{t.verkey}\r\n'.encode()
    [record] = parse_trustee_csv(content)
    assert (record.name, record.did, record.verkey) == ("Doe, Jane", t.did, t.verkey)


def test_coupling_violation_names_row(fixture_net):
    a, b = fixture_net.trustees[0], fixture_net.trustees[1]
    content = f"name,did,verkey\nA,{a.did},{a.verkey}\nB,{a.did},{b.verkey}\n".encode()
    with pytest.raises(errors.CouplingViolation) as info:
        parse_trustee_csv(content, source="t.csv")
    assert info.value.row == 3
    assert "t.csv:3" in str(info.value)


@pytest.mark.parametrize(
    "content,exc",
    [
        (b"", errors.CsvShape),
        (b"name,did\n", errors.CsvShape),
        (b"name,did,verkey\nx,y\n", errors.CsvShape),
        (b"name,did,verkey\nx,0OOO,abc\n", errors.BadEncoding),
        (b"name,did,verkey\n\xff\xfe\n", errors.CsvShape),
    ],
)
def test_trustee_sheet_shape_errors(content, exc):
    with pytest.raises(exc):
        parse_trustee_csv(content)


def test_empty_name_rejected(fixture_net):
    t = fixture_net.trustees[0]
    with pytest.raises(errors.CsvShape):
        parse_trustee_csv(f"name,did,verkey\n ,{t.did},{t.verkey}\n".encode())


def test_four_steward_rows(fixture_net):
    pairs = parse_steward_csv((FIXTURES / "stewards.csv").read_bytes())
    assert len(pairs) == 4
    for (steward, validator), (exp_s, exp_v) in zip(pairs, fixture_net.steward_pairs):
        assert steward == exp_s
        assert validator == exp_v
        assert validator.steward_did == steward.did
        assert (validator.node_port, validator.client_port) == (9701, 9702)


@pytest.mark.parametrize(
    "column,value",
    [
        (5, "0"),
        (7, "65536"),
        (5, "97o1"),
        (4, "300.1.1.1"),
        (6, "not-an-ip"),
    ],
)
def test_bad_endpoints(fixture_net, column, value):
    row = list(_rows(fixture_net, 1)[0])
    row[column] = value
    with pytest.raises(errors.BadEndpoint):
        parse_steward_csv(_steward_csv([row]))


def test_identical_node_and_client_endpoint_rejected(fixture_net):
    row = list(_rows(fixture_net, 1)[0])
    row[7] = row[5]
    with pytest.raises(errors.BadEndpoint):
        parse_steward_csv(_steward_csv([row]))


def test_shared_ip_different_ports_accepted(fixture_net):
    [(_, validator)] = parse_steward_csv(_steward_csv(_rows(fixture_net, 1)))
    assert validator.node_ip == validator.client_ip


def test_ipv6_normalized(fixture_net):
    row = list(_rows(fixture_net, 1)[0])
    row[4] = row[6] = "2001:DB8:0:0::1"
    [(_, validator)] = parse_steward_csv(_steward_csv([row]))
    assert validator.node_ip == "2001:db8::1"


def test_bad_bls_encoding(fixture_net):
    row = list(_rows(fixture_net, 1)[0])
    row[9] = "0OIl"
    with pytest.raises(errors.BadEncoding):
        parse_steward_csv(_steward_csv([row]))


def test_steward_row_parse(fixture_net):
    steward, validator = parse_steward_row(",".join(_rows(fixture_net, 1)[0]))
    assert steward == fixture_net.steward_pairs[0][0]
    assert validator == fixture_net.steward_pairs[0][1]


def test_strict_fixture_roster_is_valid(fixture_roster):
    assert len(fixture_roster.trustees) == 3
    assert len(fixture_roster.stewards) == 4
    assert fixture_roster.strict


def test_two_trustees_strict(fixture_net):
    with pytest.raises(errors.TooFewTrustees):
        validate_roster(fixture_net.trustees[:2], fixture_net.steward_pairs, strict=True)


@pytest.mark.parametrize("count", [3, 5])
def test_wrong_steward_count_strict(count):
    net = sample.sample_network(stewards=5)
    with pytest.raises(errors.WrongStewardCount):
        validate_roster(net.trustees, net.steward_pairs[:count], strict=True)


def test_relaxed_skips_counts_only(fixture_net):
    roster = validate_roster(fixture_net.trustees[:1], fixture_net.steward_pairs, strict=False)
    assert len(roster.trustees) == 1 and not roster.strict
    with pytest.raises(errors.DuplicateAlias):
        (s1, v1), (s2, v2) = fixture_net.steward_pairs[:2]
        validate_roster([], [(s1, v1), (s2, replace(v2, alias=v1.alias))], strict=False)


def test_two_validators_one_steward(fixture_net):
    (s1, v1), (s2, v2) = fixture_net.steward_pairs[:2]
    rows = _rows(fixture_net)
    rows[1] = (s1.name, s1.did, s1.verkey) + rows[1][3:]
    pairs = parse_steward_csv(_steward_csv(rows))
    with pytest.raises(errors.MultipleValidatorsPerSteward):
        validate_roster(fixture_net.trustees, pairs, strict=True)


def test_duplicate_endpoint(fixture_net):
    (s1, v1), (s2, v2) = fixture_net.steward_pairs[:2]
    clash = replace(v2, client_ip=v1.node_ip, client_port=v1.node_port)
    with pytest.raises(errors.DuplicateEndpoint):
        validate_roster([], [(s1, v1), (s2, clash)], strict=False)


def test_trustee_cannot_also_be_steward(fixture_net):
    steward, validator = fixture_net.steward_pairs[0]
    trustee_too = replace(steward, role=Role.TRUSTEE)
    with pytest.raises(errors.DuplicateDid):
        validate_roster([trustee_too], [(steward, validator)], strict=False)


def test_validation_is_idempotent():
    rng = random.Random(11)
    for _ in range(20):
        roster = gen.random_roster(rng)
        assert validate_roster(roster.trustees, roster.steward_pairs(), strict=roster.strict) == roster


def test_parse_totality_row_numbers(fixture_net):
    rows = _rows(fixture_net)
    rng = random.Random(3)
    for _ in range(30):
        broken = [list(r) for r in rows]
        target = rng.randrange(len(broken))
        broken[target][rng.choice([1, 2, 5, 8])] = "0"
        with pytest.raises(errors.RosterError) as info:
            parse_steward_csv(_steward_csv(broken))
        assert info.value.row == target + 2
