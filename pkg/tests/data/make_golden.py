"""Regenerate the golden wire fixtures. Run from the repo root:

    python tests/data/make_golden.py

Only rerun on an intentional wire-format change; test_codec compares the
current encoder against these files byte for byte.
"""

import hashlib
import json
import random
from pathlib import Path

from efpix import crypto_suite as cs
from efpix.codec import PlainPayload, serialize_payload
from efpix.identity import Contact, ContactBook
from efpix.relay import create_message

HERE = Path(__file__).parent
GOLDEN = json.loads((HERE / "golden.json").read_text())


def seed(label):
    return hashlib.sha256(label.encode()).digest()


def build(suite_name):
    suite = cs.CipherSuiteId(GOLDEN["suites"][suite_name])
    sender = cs.generate_keypair(suite, seed(GOLDEN["sender_seed_label"]))
    recipient = cs.generate_keypair(suite, seed(GOLDEN["recipient_seed_label"]))
    book = ContactBook(sender, [Contact(GOLDEN["recipient_alias"], recipient.public_key, GOLDEN["sender_alias"])])
    msg = create_message(
        book,
        GOLDEN["recipient_alias"],
        GOLDEN["internal_address"],
        GOLDEN["message"].encode("utf-8"),
        GOLDEN["created_at"],
        cs.PowParams(GOLDEN["difficulty_bits"]),
        random.Random(GOLDEN["padding_seed"]).randbytes,
    )
    return msg.to_bytes()


if __name__ == "__main__":
    payload = serialize_payload(PlainPayload(
        GOLDEN["created_at"], GOLDEN["sender_alias"], GOLDEN["internal_address"], GOLDEN["message"].encode("utf-8")
    ))
    (HERE / "golden_payload.bin").write_bytes(payload)
    for name in GOLDEN["suites"]:
        (HERE / f"golden_{name}.bin").write_bytes(build(name))
    print("wrote golden fixtures")
