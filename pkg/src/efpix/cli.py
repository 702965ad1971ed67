"""Command-line front end.

Failures print one JSON line ``{"error": <kind>, "detail": <text>}`` to
stderr and exit with status 1.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import logging
import os
import socket
import sys
from pathlib import Path

import click

from . import crypto_suite as cs
from .codec import MAX_MESSAGE, parse_message
from .crypto_suite import CipherSuiteId, PowParams
from .daemon import KEYSTORE_ENV, PeerConfig, run_daemon
from .errors import EfpixError
from .framing import frame_write, parse_hostport
from .identity import Contact, ContactBook, load_book, save_book
from .relay import create_message, now_us
from .simulator import load_scenario


class CommandFailed(Exception):
    def __init__(self, kind: str, detail: str):
        super().__init__(detail)
        self.kind = kind


def _fail(kind: str, detail: str):
    raise CommandFailed(kind, detail)


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CommandFailed as exc:
            kind, detail = exc.kind, str(exc)
        except EfpixError as exc:
            kind, detail = type(exc).__name__, str(exc)
        except (OSError, ValueError) as exc:
            kind, detail = type(exc).__name__, str(exc)
        click.echo(json.dumps({"error": kind, "detail": detail}), err=True)
        sys.exit(1)

    return wrapper


def _echo_json(doc) -> None:
    click.echo(json.dumps(doc, sort_keys=True))


keystore_option = click.option(
    "--keystore",
    envvar=KEYSTORE_ENV,
    default="keystore.json",
    show_default=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help=f"Keystore file (env: {KEYSTORE_ENV}).",
)


@click.group()
@click.option("-v", "--verbose", count=True, help="Log to stderr (-vv for debug).")
def main(verbose: int):
    """Encrypted flood relay: keys, contacts, messages, live nodes and simulations."""
    level = logging.WARNING - 10 * verbose
    logging.basicConfig(level=max(level, logging.DEBUG), stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


@main.command()
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--suite", default="reference", show_default=True, help="reference or mock")
@click.option("--seed", default=None, help="64 hex chars; deterministic keys (testing only).")
@click.option("--force", is_flag=True, help="Overwrite an existing keystore.")
@_guard
def keygen(out: Path, suite: str, seed, force: bool):
    """Create a keystore with a fresh key pair."""
    if out.exists() and not force:
        _fail("KeystoreExists", f"{out} already exists (use --force)")
    suite_id = CipherSuiteId.parse(suite)
    seed_bytes = bytes.fromhex(seed) if seed else None
    if suite_id is CipherSuiteId.MOCK_FIXED_SIZE and seed_bytes is None:
        seed_bytes = os.urandom(cs.SEED_SIZE)
    book = ContactBook(cs.generate_keypair(suite_id, seed_bytes))
    save_book(book, out)
    _echo_json({
        "keystore": str(out),
        "suite": suite_id.value,
        "public_key_sha256": hashlib.sha256(book.own_keypair.public_key).hexdigest(),
    })


@main.command("export-key")
@keystore_option
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@_guard
def export_key(keystore: Path, out: Path):
    """Write this keystore's public key blob for sharing with contacts."""
    book = load_book(keystore)
    out.write_bytes(book.own_keypair.public_key)


@main.group()
def contact():
    """Manage the alias -> (public key, my alias) map."""


@contact.command("add")
@keystore_option
@click.option("--alias", required=True, help="Their alias.")
@click.option("--key", "key_file", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--my-alias", required=True, help="The alias they know me by.")
@click.option("--replace", is_flag=True)
@_guard
def contact_add(keystore: Path, alias: str, key_file: Path, my_alias: str, replace: bool):
    book = load_book(keystore)
    book.add_contact(Contact(alias, key_file.read_bytes(), my_alias), replace=replace)
    save_book(book, keystore)


@contact.command("list")
@keystore_option
@_guard
def contact_list(keystore: Path):
    """Print one line per contact: their alias, then my alias for them."""
    for c in sorted(load_book(keystore), key=lambda c: c.their_alias):
        click.echo(f"{c.their_alias}\t{c.my_alias_for_them}")


@main.command()
@keystore_option
@click.option("--to", "to_alias", required=True)
@click.option("--addr", "internal_address", default=0, show_default=True, type=click.IntRange(0, 2**32 - 1))
@click.option("--message", "text", default=None, help="Message text (UTF-8).")
@click.option("--message-file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--difficulty", default=16, show_default=True, type=click.IntRange(0, cs.MAX_DIFFICULTY_BITS))
@click.option("--peer", default=None, help="host:port of a running node to inject into.")
@click.option("--out", "out", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="Write the 580-byte frame to a file instead.")
@_guard
def send(keystore, to_alias, internal_address, text, message_file, difficulty, peer, out):
    """Build a message and inject it into a node or write it to a file."""
    if (text is None) == (message_file is None):
        _fail("UsageError", "give exactly one of --message / --message-file")
    if (peer is None) == (out is None):
        _fail("UsageError", "give exactly one of --peer / --out")
    body = text.encode("utf-8") if text is not None else message_file.read_bytes()
    if len(body) > MAX_MESSAGE:
        _fail("MessageTooLong", f"message is {len(body)} bytes, limit {MAX_MESSAGE}")
    book = load_book(keystore)
    msg = create_message(book, to_alias, internal_address, body, now_us(), PowParams(difficulty))
    wire = msg.to_bytes()
    if out is not None:
        out.write_bytes(wire)
    else:
        host, port = parse_hostport(peer)
        with socket.create_connection((host, port), timeout=10) as sock:
            frame_write(sock, wire)
    _echo_json({"hash": msg.hash.hex(), "nonce": msg.nonce.hex(), "size": len(wire)})


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--listen", default=None, help="Override the listen host:port.")
@click.option("--peer", "peers", multiple=True, help="Replace the peer list (repeatable).")
@click.option("--keystore", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="Override the keystore path, including the environment variable.")
@click.option("--difficulty", default=None, type=click.IntRange(0, cs.MAX_DIFFICULTY_BITS),
              help="Override the required PoW bits.")
@_guard
def run(config_path: Path, listen, peers, keystore, difficulty):
    """Run a relay daemon; delivered messages go to stdout as JSON lines."""
    config = PeerConfig.load(config_path)
    changes = {}
    if listen:
        changes["listen"] = parse_hostport(listen)
    if peers:
        changes["peers"] = [parse_hostport(p) for p in peers]
    if keystore:
        changes["keystore"] = keystore
    if difficulty is not None:
        changes["node"] = dataclasses.replace(config.node, pow=PowParams(difficulty))
    run_daemon(dataclasses.replace(config, **changes))


@main.command()
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--seed", default=None, type=int, help="Override the scenario seed.")
@click.option("--out", "out", default=None, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False, path_type=Path))
@_guard
def simulate(scenario_path: Path, seed, out, csv_path):
    """Run a scenario file; exits 1 if any expectation in it fails."""
    scenario = load_scenario(scenario_path)
    metrics = scenario.run(seed)
    results = scenario.check(metrics)
    text = metrics.to_json(expectations=results)
    if out is not None:
        out.write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)
    if csv_path is not None:
        csv_path.write_text(metrics.to_csv(), encoding="utf-8")
    failed = [r for r in results if not r["passed"]]
    if failed:
        _fail("ExpectationFailed", f"{len(failed)} of {len(results)} expectations failed")


@main.command()
@click.argument("frame_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--difficulty", default=16, show_default=True, type=click.IntRange(0, cs.MAX_DIFFICULTY_BITS))
@_guard
def inspect(frame_file: Path, difficulty: int):
    """Check a frame's structure, hash and PoW without decrypting it."""
    raw = frame_file.read_bytes()
    msg = parse_message(raw)
    hash_valid = cs.hash_message(msg.encrypted_blob, msg.signature) == msg.hash
    zero_bits = cs.leading_zero_bits(cs.pow_digest(msg.hash, msg.nonce))
    report = {
        "size": len(raw),
        "version": msg.version,
        "hash": msg.hash.hex(),
        "nonce": msg.nonce.hex(),
        "hash_valid": hash_valid,
        "pow_leading_zero_bits": zero_bits,
        "pow_valid": zero_bits >= difficulty,
    }
    _echo_json(report)
    if not hash_valid:
        _fail("BadHash", "embedded hash does not match blob and signature")
    if not report["pow_valid"]:
        _fail("BadPow", f"{zero_bits} leading zero bits, need {difficulty}")


if __name__ == "__main__":
    main()
