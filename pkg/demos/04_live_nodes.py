# %% [markdown]
# # Three nodes on loopback
#
# Starts three daemons in one event loop (alice - relay - bob), injects a
# message at alice and waits for bob to print it.

# %%
import asyncio
import hashlib
import io

from efpix import crypto_suite as cs
from efpix.crypto_suite import CipherSuiteId, PowParams
from efpix.daemon import Daemon, PeerConfig
from efpix.identity import Contact, ContactBook
from efpix.relay import MILLISECOND, NodeConfig, create_message, now_us

suite = CipherSuiteId.REFERENCE_RSA2048_SHA512
keys = {n: cs.generate_keypair(suite, hashlib.sha256(n.encode()).digest()) for n in ("alice", "relay", "bob")}
books = {
    "alice": ContactBook(keys["alice"], [Contact("bob", keys["bob"].public_key, "alice")]),
    "relay": ContactBook(keys["relay"]),
    "bob": ContactBook(keys["bob"], [Contact("alice", keys["alice"].public_key, "bob")]),
}
node = NodeConfig(pow=PowParams(12), relay_delay_max=100 * MILLISECOND)


async def main():
    relay = Daemon(PeerConfig(listen=("127.0.0.1", 0), node=node), books["relay"], io.StringIO())
    await relay.start()
    alice = Daemon(PeerConfig(listen=("127.0.0.1", 0), peers=[relay.listen_address], node=node),
                   books["alice"], io.StringIO())
    bob = Daemon(PeerConfig(peers=[relay.listen_address], node=node), books["bob"], io.StringIO())
    await alice.start()
    await bob.start()
    while len(relay.links) < 2:
        await asyncio.sleep(0.05)

    msg = create_message(books["alice"], "bob", 1, b"hello over TCP", now_us(), PowParams(12))
    alice.inject(msg.to_bytes())
    while not bob.delivered:
        await asyncio.sleep(0.05)
    print("bob received:", bob.out.getvalue().strip())
    print("relay delivered:", relay.delivered)
    for d in (alice, relay, bob):
        await d.stop()


asyncio.run(main())
