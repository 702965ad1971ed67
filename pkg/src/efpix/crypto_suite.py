"""Public-key encryption, signatures, hashing and proof-of-work.

Two suites share one size contract (256-byte ciphertext, 256-byte signature,
64-byte hash):

* ``REFERENCE_RSA2048_SHA512``: RSA-2048 with PKCS#1 v1.5 encryption padding
  (245-byte plaintext ceiling) and PKCS#1 v1.5 / SHA-512 signatures.
* ``MOCK_FIXED_SIZE``: a keyed, deterministic stand-in built from SHA-512 and
  SHAKE-256. It is **not secure**: anyone holding the public key can decrypt
  and forge. It exists so simulations with thousands of deliveries stay fast
  and reproducible.

Key blobs are self-describing, so every operation takes just the key bytes
and dispatches on the suite the key belongs to.

Decryption returns ``None`` on failure instead of raising, because every
relay node tries every message and failure is the common case.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import gmpy2
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from .errors import (
    InvalidLength,
    KeyGenError,
    NonceExhausted,
    PlaintextTooLong,
    PlaintextTooShort,
    SignError,
)

BLOB_SIZE = 256
SIGNATURE_SIZE = 256
HASH_SIZE = 64
NONCE_SIZE = 3
SEED_SIZE = 32

# serialized payload header: timestamp 9 + alias 16 + internal address 4
MIN_PLAINTEXT = 29
# 256-byte modulus minus 11 bytes of PKCS#1 v1.5 padding
MAX_PLAINTEXT = 245

MAX_DIFFICULTY_BITS = 20
NONCE_SPACE = 1 << (8 * NONCE_SIZE)

RandBytes = Callable[[int], bytes]


class CipherSuiteId(enum.Enum):
    REFERENCE_RSA2048_SHA512 = "reference-rsa2048-sha512"
    MOCK_FIXED_SIZE = "mock-fixed-size"

    @classmethod
    def parse(cls, name: str) -> "CipherSuiteId":
        """Accept the enum value, the member name, or ``reference``/``mock``."""
        key = name.strip().lower()
        aliases = {"reference": cls.REFERENCE_RSA2048_SHA512, "mock": cls.MOCK_FIXED_SIZE}
        if key in aliases:
            return aliases[key]
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown cipher suite {name!r}")


@dataclass(frozen=True)
class KeyPair:
    public_key: bytes
    private_key: bytes = field(repr=False)
    suite: CipherSuiteId


@dataclass(frozen=True)
class PowParams:
    """Proof-of-work difficulty. ``nonce_width`` is fixed by the wire format."""

    difficulty_bits: int = 16
    nonce_width: int = NONCE_SIZE

    def __post_init__(self):
        if self.nonce_width != NONCE_SIZE:
            raise ValueError(f"nonce width is fixed at {NONCE_SIZE} bytes")
        if not 0 <= self.difficulty_bits <= MAX_DIFFICULTY_BITS:
            raise ValueError(
                f"difficulty_bits must be in [0, {MAX_DIFFICULTY_BITS}], got {self.difficulty_bits}"
            )


# ---------------------------------------------------------------------------
# key handling

_MOCK_PUB = b"EFPIX-MOCK-PUB\x00"
_MOCK_PRV = b"EFPIX-MOCK-PRV\x00"
_RSA_E = 65537
_RSA_BITS = 2048


def suite_of(key: bytes) -> CipherSuiteId:
    """Identify the suite a public or private key blob belongs to."""
    if key.startswith(_MOCK_PUB) or key.startswith(_MOCK_PRV):
        return CipherSuiteId.MOCK_FIXED_SIZE
    return CipherSuiteId.REFERENCE_RSA2048_SHA512


def _mock_key_id(seed: bytes) -> bytes:
    return hashlib.sha256(b"efpix-mock-key" + seed).digest()


def _mock_id_from_public(public_key: bytes) -> bytes:
    key_id = public_key[len(_MOCK_PUB):]
    if len(key_id) != 32:
        raise InvalidLength("mock public key must carry a 32-byte key id")
    return key_id


def _mock_id_from_private(private_key: bytes) -> bytes:
    seed = private_key[len(_MOCK_PRV):]
    if len(seed) != SEED_SIZE:
        raise InvalidLength("mock private key must carry a 32-byte seed")
    return _mock_key_id(seed)


def _seeded_prime(seed: bytes, label: bytes, bits: int) -> int:
    counter = 0
    while True:
        draw = hashlib.shake_256(b"efpix-rsa" + label + seed + counter.to_bytes(4, "big"))
        candidate = int.from_bytes(draw.digest(bits // 8), "big")
        # top two bits set so the product has exactly 2*bits bits
        candidate |= (0b11 << (bits - 2)) | 1
        p = int(gmpy2.next_prime(candidate))
        if p.bit_length() == bits and gmpy2.gcd(_RSA_E, p - 1) == 1:
            return p
        counter += 1


def _seeded_rsa_key(seed: bytes) -> rsa.RSAPrivateKey:
    half = _RSA_BITS // 2
    p = _seeded_prime(seed, b"p", half)
    q = _seeded_prime(seed, b"q", half)
    if p == q:
        raise KeyGenError("degenerate seed produced p == q")
    if p < q:
        p, q = q, p
    d = pow(_RSA_E, -1, (p - 1) * (q - 1))
    public = rsa.RSAPublicNumbers(_RSA_E, p * q)
    numbers = rsa.RSAPrivateNumbers(
        p=p,
        q=q,
        d=d,
        dmp1=rsa.rsa_crt_dmp1(d, p),
        dmq1=rsa.rsa_crt_dmq1(d, q),
        iqmp=rsa.rsa_crt_iqmp(p, q),
        public_numbers=public,
    )
    return numbers.private_key()


def generate_keypair(suite: CipherSuiteId, seed: Optional[bytes] = None) -> KeyPair:
    """Create a key pair.

    The mock suite requires ``seed`` (32 bytes). The reference suite uses
    system entropy unless a seed is given, in which case the RSA primes are
    derived deterministically from it (useful for fixtures and simulations).
    """
    if seed is not None and len(seed) != SEED_SIZE:
        raise KeyGenError(f"seed must be {SEED_SIZE} bytes, got {len(seed)}")

    if suite is CipherSuiteId.MOCK_FIXED_SIZE:
        if seed is None:
            raise KeyGenError("the mock suite needs an explicit seed")
        return KeyPair(_MOCK_PUB + _mock_key_id(seed), _MOCK_PRV + seed, suite)

    try:
        if seed is None:
            key = rsa.generate_private_key(public_exponent=_RSA_E, key_size=_RSA_BITS)
        else:
            key = _seeded_rsa_key(seed)
    except KeyGenError:
        raise
    except Exception as exc:  # entropy or backend failure
        raise KeyGenError(str(exc)) from exc

    private_der = key.private_bytes(
        serialization.Encoding.DER,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )
    public_der = key.public_key().public_bytes(
        serialization.Encoding.DER,
        serialization.PublicFormat.SubjectPublicKeyInfo,
    )
    return KeyPair(public_der, private_der, suite)


@dataclass(frozen=True)
class _RsaPublic:
    key: rsa.RSAPublicKey
    n: object
    e: object


@dataclass(frozen=True)
class _RsaPrivate:
    key: rsa.RSAPrivateKey
    n: object
    p: object
    q: object
    dp: object
    dq: object
    qinv: object


@lru_cache(maxsize=512)
def _load_public(blob: bytes) -> _RsaPublic:
    key = serialization.load_der_public_key(blob)
    if not isinstance(key, rsa.RSAPublicKey) or key.key_size != _RSA_BITS:
        raise ValueError("reference suite requires an RSA-2048 public key")
    nums = key.public_numbers()
    return _RsaPublic(key, gmpy2.mpz(nums.n), gmpy2.mpz(nums.e))


@lru_cache(maxsize=512)
def _load_private(blob: bytes) -> _RsaPrivate:
    key = serialization.load_der_private_key(blob, password=None)
    if not isinstance(key, rsa.RSAPrivateKey) or key.key_size != _RSA_BITS:
        raise ValueError("reference suite requires an RSA-2048 private key")
    nums = key.private_numbers()
    mpz = gmpy2.mpz
    return _RsaPrivate(
        key,
        mpz(nums.public_numbers.n),
        mpz(nums.p),
        mpz(nums.q),
        mpz(nums.dmp1),
        mpz(nums.dmq1),
        mpz(nums.iqmp),
    )


def public_modulus_size(public_key: bytes) -> int:
    """Byte length of an RSA public modulus (reference suite only)."""
    n = _load_public(public_key).n
    return (int(n).bit_length() + 7) // 8


# ---------------------------------------------------------------------------
# encryption

def _check_plaintext(plaintext: bytes) -> None:
    if len(plaintext) > MAX_PLAINTEXT:
        raise PlaintextTooLong(f"plaintext is {len(plaintext)} bytes, limit {MAX_PLAINTEXT}")
    if len(plaintext) < MIN_PLAINTEXT:
        raise PlaintextTooShort(f"plaintext is {len(plaintext)} bytes, minimum {MIN_PLAINTEXT}")


def _nonzero_bytes(n: int, randbytes: RandBytes) -> bytes:
    out = bytearray()
    while len(out) < n:
        out.extend(b for b in randbytes(n - len(out) + 8) if b)
    return bytes(out[:n])


def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


_MOCK_BODY = BLOB_SIZE - 10
_MOCK_TAG = 10


def encrypt(public_key: bytes, plaintext: bytes, randbytes: Optional[RandBytes] = None) -> bytes:
    """Encrypt ``plaintext`` (29 to 245 bytes) into a 256-byte blob.

    ``randbytes`` supplies the PKCS#1 padding randomness for the reference
    suite; it defaults to ``os.urandom``. Pass a seeded source only for
    reproducible fixtures and simulations.
    """
    _check_plaintext(plaintext)
    if suite_of(public_key) is CipherSuiteId.MOCK_FIXED_SIZE:
        key_id = _mock_id_from_public(public_key)
        body = bytes([len(plaintext)]) + plaintext.ljust(_MOCK_BODY - 1, b"\x00")
        tag = hashlib.sha512(b"tag" + key_id + body).digest()[:_MOCK_TAG]
        stream = hashlib.shake_256(b"ks" + key_id + tag).digest(_MOCK_BODY)
        return _xor(body, stream) + tag

    pub = _load_public(public_key)
    randbytes = randbytes or os.urandom
    pad = _nonzero_bytes(BLOB_SIZE - 3 - len(plaintext), randbytes)
    em = b"\x00\x02" + pad + b"\x00" + plaintext
    c = gmpy2.powmod(gmpy2.mpz(int.from_bytes(em, "big")), pub.e, pub.n)
    return int(c).to_bytes(BLOB_SIZE, "big")


def decrypt(private_key: bytes, blob: bytes) -> Optional[bytes]:
    """Recover the plaintext, or ``None`` if this key cannot open ``blob``.

    The reference path does the PKCS#1 v1.5 unpadding itself: OpenSSL's
    implicit rejection would otherwise hand back random bytes for the wrong
    key. This path is not constant time.
    """
    if len(blob) != BLOB_SIZE:
        raise InvalidLength(f"encrypted blob must be {BLOB_SIZE} bytes, got {len(blob)}")

    if suite_of(private_key) is CipherSuiteId.MOCK_FIXED_SIZE:
        key_id = _mock_id_from_private(private_key)
        tag = blob[_MOCK_BODY:]
        stream = hashlib.shake_256(b"ks" + key_id + tag).digest(_MOCK_BODY)
        body = _xor(blob[:_MOCK_BODY], stream)
        expected = hashlib.sha512(b"tag" + key_id + body).digest()[:_MOCK_TAG]
        if not hmac.compare_digest(tag, expected):
            return None
        n = body[0]
        if n > MAX_PLAINTEXT:
            return None
        return body[1:1 + n]

    priv = _load_private(private_key)
    c = gmpy2.mpz(int.from_bytes(blob, "big"))
    if c >= priv.n:
        return None
    m1 = gmpy2.powmod(c, priv.dp, priv.p)
    m2 = gmpy2.powmod(c, priv.dq, priv.q)
    h = (priv.qinv * (m1 - m2)) % priv.p
    em = int(m2 + h * priv.q).to_bytes(BLOB_SIZE, "big")
    if em[0] != 0 or em[1] != 2:
        return None
    sep = em.find(0, 2)
    # at least 8 padding bytes
    if sep < 10:
        return None
    return em[sep + 1:]


# ---------------------------------------------------------------------------
# signatures

def sign(private_key: bytes, data: bytes) -> bytes:
    """Deterministic 256-byte signature over ``data``."""
    if not data:
        raise SignError("refusing to sign empty data")
    if suite_of(private_key) is CipherSuiteId.MOCK_FIXED_SIZE:
        try:
            key_id = _mock_id_from_private(private_key)
        except InvalidLength as exc:
            raise SignError(str(exc)) from exc
        return hashlib.shake_256(b"sig" + key_id + data).digest(SIGNATURE_SIZE)
    try:
        key = _load_private(private_key).key
        return key.sign(data, padding.PKCS1v15(), hashes.SHA512())
    except Exception as exc:
        raise SignError(f"cannot sign: {exc}") from exc


def verify(public_key: bytes, data: bytes, signature: bytes) -> bool:
    """True iff ``signature`` was made over ``data`` by the matching private key.

    Never raises: malformed keys or signatures simply fail verification.
    """
    if len(signature) != SIGNATURE_SIZE:
        return False
    try:
        if suite_of(public_key) is CipherSuiteId.MOCK_FIXED_SIZE:
            key_id = _mock_id_from_public(public_key)
            expected = hashlib.shake_256(b"sig" + key_id + data).digest(SIGNATURE_SIZE)
            return hmac.compare_digest(signature, expected)
        _load_public(public_key).key.verify(signature, data, padding.PKCS1v15(), hashes.SHA512())
        return True
    except InvalidSignature:
        return False
    except Exception:
        return False


# ---------------------------------------------------------------------------
# hashing and proof-of-work

def hash_message(encrypted_blob: bytes, signature: bytes) -> bytes:
    """Message identity: SHA-512 over blob and signature. The nonce is not included."""
    if len(encrypted_blob) != BLOB_SIZE or len(signature) != SIGNATURE_SIZE:
        raise InvalidLength("hash_message needs a 256-byte blob and a 256-byte signature")
    return hashlib.sha512(encrypted_blob + signature).digest()


def leading_zero_bits(digest: bytes) -> int:
    return 8 * len(digest) - int.from_bytes(digest, "big").bit_length()


def pow_digest(message_hash: bytes, nonce: bytes) -> bytes:
    return hashlib.sha512(message_hash + nonce).digest()


def pow_check(message_hash: bytes, nonce: bytes, params: PowParams) -> bool:
    """True iff SHA-512(hash || nonce) has at least ``difficulty_bits`` leading zero bits."""
    if len(message_hash) != HASH_SIZE or len(nonce) != NONCE_SIZE:
        raise InvalidLength("pow_check needs a 64-byte hash and a 3-byte nonce")
    return leading_zero_bits(pow_digest(message_hash, nonce)) >= params.difficulty_bits


def mine_nonce(message_hash: bytes, params: PowParams) -> bytes:
    """Smallest big-endian nonce, searched upward from zero, that passes :func:`pow_check`."""
    if len(message_hash) != HASH_SIZE:
        raise InvalidLength("mine_nonce needs a 64-byte hash")
    bound = 1 << (8 * HASH_SIZE - params.difficulty_bits)
    base = hashlib.sha512(message_hash)
    for n in range(NONCE_SPACE):
        nonce = n.to_bytes(NONCE_SIZE, "big")
        h = base.copy()
        h.update(nonce)
        if int.from_bytes(h.digest(), "big") < bound:
            return nonce
    raise NonceExhausted(f"no nonce reaches {params.difficulty_bits} leading zero bits")


def mining_attempts(nonce: bytes) -> int:
    """Digests computed by :func:`mine_nonce` to find ``nonce``."""
    return int.from_bytes(nonce, "big") + 1
