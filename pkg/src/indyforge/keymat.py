"""Seed-derived identity material: Ed25519 verkeys, DIDs and BLS12-381 keys.

All functions are pure. A seed is 32 bytes of secret entropy; the same seed
always yields the same verkey, DID, BLS key and proof of possession.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import string
from dataclasses import dataclass

import base58
from blspy import G1Element, G2Element, PopSchemeMPL, PrivateKey
from nacl.signing import SigningKey

from .errors import EncodingError, SeedLength

SEED_LEN = 32
VERKEY_LEN = 32
DID_LEN = 16

BLS_PUBKEY_LEN = 48
BLS_POP_LEN = 96

# Group order of BLS12-381.
_CURVE_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
_KEYGEN_SALT = b"BLS-SIG-KEYGEN-SALT-"
_KEYGEN_OKM_LEN = 48


@dataclass(frozen=True)
class SigningIdentity:
    verkey: str
    did: str


@dataclass(frozen=True)
class BlsIdentity:
    bls_key: str
    bls_pop: str


def b58encode(raw: bytes) -> str:
    return base58.b58encode(raw).decode("ascii")


def b58decode(text: str) -> bytes:
    """Decode Bitcoin-alphabet base58, raising :class:`EncodingError`."""
    if not isinstance(text, str) or not text:
        raise EncodingError(f"not base58 text: {text!r}")
    try:
        return base58.b58decode(text.encode("ascii"))
    except (ValueError, UnicodeEncodeError) as exc:
        raise EncodingError(f"not base58 text: {text!r}") from exc


def check_seed(seed: bytes) -> bytes:
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != SEED_LEN:
        got = len(seed) if isinstance(seed, (bytes, bytearray)) else type(seed).__name__
        raise SeedLength(f"seed must be exactly {SEED_LEN} bytes, got {got}")
    return bytes(seed)


def random_seed() -> bytes:
    return secrets.token_bytes(SEED_LEN)


def parse_seed(text: str) -> bytes:
    """Parse an operator-supplied seed.

    Accepted forms, tried in order: 64 hex digits, a 32-character ASCII
    string (the form indy tooling prints), base58 of 32 bytes.
    """
    if len(text) == 2 * SEED_LEN and all(c in string.hexdigits for c in text):
        return bytes.fromhex(text)
    if len(text) == SEED_LEN and text.isascii():
        return text.encode("ascii")
    try:
        raw = b58decode(text)
    except EncodingError:
        raise SeedLength("seed is neither 64 hex digits, 32 ASCII characters nor base58") from None
    return check_seed(raw)


def derive_signing_identity(seed: bytes) -> SigningIdentity:
    seed = check_seed(seed)
    raw_verkey = bytes(SigningKey(seed).verify_key)
    return SigningIdentity(verkey=b58encode(raw_verkey), did=b58encode(raw_verkey[:DID_LEN]))


def did_matches_verkey(did: str, verkey: str) -> bool:
    """True iff ``did`` decodes to the first 16 bytes of the 32-byte ``verkey``."""
    raw_did = b58decode(did)
    raw_verkey = b58decode(verkey)
    return len(raw_verkey) == VERKEY_LEN and len(raw_did) == DID_LEN and raw_verkey[:DID_LEN] == raw_did


def bls_secret_from_seed(seed: bytes) -> int:
    """HKDF-based KeyGen for BLS12-381 secret scalars (IETF BLS signature draft, v4+)."""
    seed = check_seed(seed)
    salt = _KEYGEN_SALT
    sk = 0
    while sk == 0:
        salt = hashlib.sha256(salt).digest()
        prk = hmac.new(salt, seed + b"\x00", hashlib.sha256).digest()
        info = _KEYGEN_OKM_LEN.to_bytes(2, "big")
        okm = b""
        block = b""
        counter = 1
        while len(okm) < _KEYGEN_OKM_LEN:
            block = hmac.new(prk, block + info + bytes([counter]), hashlib.sha256).digest()
            okm += block
            counter += 1
        sk = int.from_bytes(okm[:_KEYGEN_OKM_LEN], "big") % _CURVE_ORDER
    return sk


def derive_bls_identity(seed: bytes) -> BlsIdentity:
    sk = PrivateKey.from_bytes(bls_secret_from_seed(seed).to_bytes(32, "big"))
    public = bytes(sk.get_g1())
    pop = bytes(PopSchemeMPL.pop_prove(sk))
    return BlsIdentity(bls_key=b58encode(public), bls_pop=b58encode(pop))


def verify_pop(bls_key: str, bls_pop: str) -> bool:
    """Check that ``bls_pop`` proves possession of the secret behind ``bls_key``.

    Raises :class:`EncodingError` when either value is not base58 or the key
    is not a valid G1 point. A proof that does not decode to a G2 point is
    simply not a valid proof and yields False.
    """
    raw_key = b58decode(bls_key)
    raw_pop = b58decode(bls_pop)
    if len(raw_key) != BLS_PUBKEY_LEN:
        raise EncodingError(f"BLS key must be {BLS_PUBKEY_LEN} bytes, got {len(raw_key)}")
    try:
        public = G1Element.from_bytes(raw_key)
    except (ValueError, RuntimeError) as exc:
        raise EncodingError(f"BLS key is not a G1 point: {exc}") from exc
    if len(raw_pop) != BLS_POP_LEN:
        return False
    try:
        proof = G2Element.from_bytes(raw_pop)
    except (ValueError, RuntimeError):
        return False
    return bool(PopSchemeMPL.pop_verify(public, proof))
