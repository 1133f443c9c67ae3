import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from indyforge import keymat
from indyforge.errors import EncodingError, SeedLength

STEWARD1 = b"000000000000000000000000Steward1"

# produced once by the py_ecc reference (oracles.bls_identity) and frozen
GOLDEN_BLS_SEED = bytes([1]) * 32
GOLDEN_BLS_KEY = "6VMqE4pk2DzqaP8tVQuQExm2b5BpSfgxBknRJmKuUCQ2ZuvMPEvDLZvJoq5MxMz2t2"
GOLDEN_BLS_POP = (
    "ncd3iNyfuDANFcHjn9AaHwoC9nvGp1giW8ZXnhQaJ2UQBrG6NqEGqykAvUTUNXwZUJCSLCTP3X4TRnWuftxLLeTYo"
    "ABpcKMXfFSua9XGq64FDMQiX9yr92VvfmfUKpWP2jv"
)


def test_steward1_did_vector():
    ident = keymat.derive_signing_identity(STEWARD1)
    assert ident.did == "Th7MpTaRZVRYnPiabds81Y"
    assert (ident.did, ident.verkey) == oracles.ed25519_identity(STEWARD1)


def test_signing_identity_is_deterministic():
    seed = random.Random(1).randbytes(32)
    assert keymat.derive_signing_identity(seed) == keymat.derive_signing_identity(seed)


@pytest.mark.parametrize("bad", [b"", b"x" * 31, b"x" * 33])
def test_seed_length_enforced(bad):
    with pytest.raises(SeedLength):
        keymat.derive_signing_identity(bad)
    with pytest.raises(SeedLength):
        keymat.derive_bls_identity(bad)


@settings(max_examples=50, deadline=None)
@given(st.binary(min_size=32, max_size=32))
def test_did_is_verkey_prefix(seed):
    ident = keymat.derive_signing_identity(seed)
    raw = oracles.b58decode(ident.verkey)
    assert len(raw) == 32
    assert oracles.b58decode(ident.did) == raw[:16]
    assert keymat.did_matches_verkey(ident.did, ident.verkey)


@settings(max_examples=50, deadline=None)
@given(st.binary(min_size=0, max_size=40))
def test_base58_matches_longhand(raw):
    assert keymat.b58encode(raw) == oracles.b58encode(raw)
    if raw:
        assert keymat.b58decode(oracles.b58encode(raw)) == raw


def test_bls_keygen_matches_reference():
    from py_ecc.bls import G2ProofOfPossession as ref

    rng = random.Random(5)
    for _ in range(5):
        seed = rng.randbytes(32)
        assert keymat.bls_secret_from_seed(seed) == ref.KeyGen(seed)


def test_bls_golden_vector():
    assert oracles.bls_identity(GOLDEN_BLS_SEED) == (GOLDEN_BLS_KEY, GOLDEN_BLS_POP)
    bls = keymat.derive_bls_identity(GOLDEN_BLS_SEED)
    assert (bls.bls_key, bls.bls_pop) == (GOLDEN_BLS_KEY, GOLDEN_BLS_POP)


def test_bls_identity_is_deterministic_and_verifies():
    seed = random.Random(2).randbytes(32)
    a, b = keymat.derive_bls_identity(seed), keymat.derive_bls_identity(seed)
    assert a == b
    assert keymat.verify_pop(a.bls_key, a.bls_pop)


def test_flipped_pop_bit_is_rejected():
    raw = bytearray(oracles.b58decode(GOLDEN_BLS_POP))
    for bit in (0, 7, 100, 383, 767):
        mutated = bytearray(raw)
        mutated[bit // 8] ^= 1 << (bit % 8)
        assert keymat.verify_pop(GOLDEN_BLS_KEY, oracles.b58encode(bytes(mutated))) is False


def test_cross_seed_pop_rejected_by_both_routes():
    key_a, pop_a = oracles.bls_identity(bytes([1]) * 32)
    key_b, pop_b = oracles.bls_identity(bytes([2]) * 32)
    assert oracles.bls_verify(key_a, pop_b) is False
    assert keymat.verify_pop(key_a, pop_b) is False
    assert keymat.verify_pop(key_b, pop_a) is False


def test_pop_soundness_random_pairs():
    rng = random.Random(1000)
    for _ in range(1000):
        s1, s2 = rng.randbytes(32), rng.randbytes(32)
        assert s1 != s2
        assert not keymat.verify_pop(keymat.derive_bls_identity(s1).bls_key, keymat.derive_bls_identity(s2).bls_pop)


@pytest.mark.parametrize(
    "key,pop",
    [
        ("0OIl", GOLDEN_BLS_POP),
        (GOLDEN_BLS_KEY, "not-base58!"),
        ("", GOLDEN_BLS_POP),
        (keymat.b58encode(bytes(48)), GOLDEN_BLS_POP),
        (keymat.b58encode(b"\x01" * 20), GOLDEN_BLS_POP),
    ],
)
def test_verify_pop_encoding_errors(key, pop):
    with pytest.raises(EncodingError):
        keymat.verify_pop(key, pop)


def test_parse_seed_forms():
    assert keymat.parse_seed(STEWARD1.decode()) == STEWARD1
    assert keymat.parse_seed(STEWARD1.hex()) == STEWARD1
    assert keymat.parse_seed(keymat.b58encode(STEWARD1)) == STEWARD1
    with pytest.raises(SeedLength):
        keymat.parse_seed("abc")
