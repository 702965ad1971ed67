# %% [markdown]
# # What goes over the wire
#
# One message is always 580 bytes, whatever it says. This walk-through builds
# a message between two seeded identities, takes it apart field by field and
# shows what a stranger can and cannot learn from it.

# %%
import hashlib

from efpix import crypto_suite as cs
from efpix.codec import PlainPayload, parse_message, serialize_payload
from efpix.crypto_suite import CipherSuiteId, PowParams
from efpix.identity import Contact, ContactBook
from efpix.relay import SECOND, NodeConfig, RelayNode, create_message

suite = CipherSuiteId.REFERENCE_RSA2048_SHA512
alice = cs.generate_keypair(suite, hashlib.sha256(b"demo-alice").digest())
bob = cs.generate_keypair(suite, hashlib.sha256(b"demo-bob").digest())

# Alice calls Bob "bob"; Bob knows Alice as "ally".
alice_book = ContactBook(alice, [Contact("bob", bob.public_key, "ally")])
bob_book = ContactBook(bob, [Contact("ally", alice.public_key, "bob")])

# %% [markdown]
# ## The plaintext payload
#
# Timestamp, the alias the recipient knows us by, an application address and
# the message itself. Only the message part varies in length.

# %%
now = 1_760_000_000 * SECOND
payload = serialize_payload(PlainPayload(now, "ally", 443, b"lunch?"))
print(len(payload), "payload bytes")
print("timestamp ", payload[:9].hex())
print("alias     ", payload[9:25])
print("address   ", int.from_bytes(payload[25:29], "big"))
print("message   ", payload[29:])

# %% [markdown]
# ## The encoded message
#
# The payload is signed, then encrypted to Bob. The hash covers the blob and
# the signature; the nonce is mined so that hash plus nonce starts with 16
# zero bits.

# %%
msg = create_message(alice_book, "bob", 443, b"lunch?", now, PowParams(16))
wire = msg.to_bytes()
fields = [("version", 0, 1), ("hash", 1, 65), ("nonce", 65, 68), ("blob", 68, 324), ("signature", 324, 580)]
for name, lo, hi in fields:
    print(f"{name:<10} [{lo:>3}:{hi:>3}] {wire[lo:hi][:12].hex()}...")
print("mining attempts:", cs.mining_attempts(msg.nonce))
print("PoW digest:", cs.pow_digest(msg.hash, msg.nonce)[:4].hex())

# %% [markdown]
# ## What a relay sees
#
# A relay can check structure, hash and proof of work. It cannot read the
# payload, and it learns neither sender nor recipient.

# %%
stranger = RelayNode(ContactBook(cs.generate_keypair(suite, bytes(32))), NodeConfig())
decision, outcome = stranger.on_receive(wire, now + SECOND)
print("stranger:", decision, outcome)

receiver = RelayNode(bob_book, NodeConfig())
decision, outcome = receiver.on_receive(wire, now + SECOND)
print("bob:     ", decision, outcome)
print(outcome.result.to_json())

# %% [markdown]
# The second copy of the same frame is dropped without any decryption work.

# %%
print(receiver.on_receive(wire, now + 2 * SECOND))
assert parse_message(wire) == msg
