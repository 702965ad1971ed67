"""Contact book: the map from a correspondent's alias to (their public key, my alias).

Persisted as a JSON keystore::

    {
      "format": "efpix-keystore",
      "version": 1,
      "suite": "reference-rsa2048-sha512",
      "public_key": "<base64>",
      "private_key": "<base64>",
      "contacts": [
        {"their_alias": "bob", "their_public_key": "<base64>", "my_alias_for_them": "al"}
      ]
    }

The file is written atomically and chmod'ed to 0600.
"""

from __future__ import annotations

import base64
import binascii
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Optional, Union

from .codec import encode_alias
from .crypto_suite import CipherSuiteId, KeyPair
from .errors import DuplicateAlias, InvalidAlias, KeystoreCorrupt, KeystoreNotFound

KEYSTORE_FORMAT = "efpix-keystore"
KEYSTORE_VERSION = 1


@dataclass(frozen=True)
class Contact:
    their_alias: str
    their_public_key: bytes
    my_alias_for_them: str

    def __post_init__(self):
        encode_alias(self.their_alias)
        encode_alias(self.my_alias_for_them)
        if not self.their_public_key:
            raise InvalidAlias(f"contact {self.their_alias!r} has no public key")


class ContactBook:
    """Own key pair plus known correspondents.

    Single writer, many readers: writes swap in a fresh mapping, so a reader
    holding :attr:`contacts` keeps a consistent snapshot.
    """

    def __init__(self, own_keypair: KeyPair, contacts=()):
        self.own_keypair = own_keypair
        self._contacts: Mapping[str, Contact] = {}
        for c in contacts:
            self.add_contact(c)

    @property
    def contacts(self) -> Mapping[str, Contact]:
        return self._contacts

    def __len__(self):
        return len(self._contacts)

    def __iter__(self) -> Iterator[Contact]:
        return iter(list(self._contacts.values()))

    def __eq__(self, other):
        if not isinstance(other, ContactBook):
            return NotImplemented
        return self.own_keypair == other.own_keypair and dict(self._contacts) == dict(other._contacts)

    def __repr__(self):
        return f"ContactBook(suite={self.own_keypair.suite.value}, contacts={sorted(self._contacts)})"

    def add_contact(self, contact: Contact, replace: bool = False) -> "ContactBook":
        if not isinstance(contact, Contact):
            raise TypeError("expected a Contact")
        if contact.their_alias in self._contacts and not replace:
            raise DuplicateAlias(f"contact {contact.their_alias!r} already exists")
        updated = dict(self._contacts)
        updated[contact.their_alias] = contact
        self._contacts = updated
        return self

    def remove_contact(self, alias: str) -> None:
        updated = dict(self._contacts)
        del updated[alias]
        self._contacts = updated

    def lookup_sender(self, alias: str) -> Optional[Contact]:
        """Contact for ``alias``, or ``None`` when unknown (the anonymous path)."""
        if not isinstance(alias, str):
            return None
        return self._contacts.get(alias)


def add_contact(book: ContactBook, contact: Contact, replace: bool = False) -> ContactBook:
    return book.add_contact(contact, replace=replace)


def lookup_sender(book: ContactBook, alias: str) -> Optional[Contact]:
    return book.lookup_sender(alias)


def _b64(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def _unb64(text: str) -> bytes:
    if not isinstance(text, str):
        raise KeystoreCorrupt("key material must be a base64 string")
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise KeystoreCorrupt(f"bad base64: {exc}") from None


def book_to_dict(book: ContactBook) -> dict:
    kp = book.own_keypair
    return {
        "format": KEYSTORE_FORMAT,
        "version": KEYSTORE_VERSION,
        "suite": kp.suite.value,
        "public_key": _b64(kp.public_key),
        "private_key": _b64(kp.private_key),
        "contacts": [
            {
                "their_alias": c.their_alias,
                "their_public_key": _b64(c.their_public_key),
                "my_alias_for_them": c.my_alias_for_them,
            }
            for c in sorted(book, key=lambda c: c.their_alias)
        ],
    }


def book_from_dict(doc: dict) -> ContactBook:
    try:
        if doc.get("format") != KEYSTORE_FORMAT or doc.get("version") != KEYSTORE_VERSION:
            raise KeystoreCorrupt("not an efpix keystore (format/version mismatch)")
        keypair = KeyPair(
            public_key=_unb64(doc["public_key"]),
            private_key=_unb64(doc["private_key"]),
            suite=CipherSuiteId(doc["suite"]),
        )
        book = ContactBook(keypair)
        for entry in doc["contacts"]:
            book.add_contact(
                Contact(
                    their_alias=entry["their_alias"],
                    their_public_key=_unb64(entry["their_public_key"]),
                    my_alias_for_them=entry["my_alias_for_them"],
                )
            )
    except KeystoreCorrupt:
        raise
    except (AttributeError, KeyError, TypeError, ValueError) as exc:
        raise KeystoreCorrupt(f"invalid keystore: {exc!r}") from None
    return book


def save_book(book: ContactBook, path: Union[str, os.PathLike]) -> None:
    path = Path(path)
    data = json.dumps(book_to_dict(book), indent=2, sort_keys=True).encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=".keystore-", dir=path.parent or ".")
    try:
        os.fchmod(fd, 0o600)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_book(path: Union[str, os.PathLike]) -> ContactBook:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise KeystoreNotFound(f"no keystore at {path}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise KeystoreCorrupt(f"keystore {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise KeystoreCorrupt(f"keystore {path} is not a JSON object")
    return book_from_dict(doc)
