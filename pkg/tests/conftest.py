import hashlib

import pytest

from efpix import crypto_suite as cs
from efpix.crypto_suite import CipherSuiteId
from efpix.identity import Contact, ContactBook

REF = CipherSuiteId.REFERENCE_RSA2048_SHA512
MOCK = CipherSuiteId.MOCK_FIXED_SIZE


def seed_for(label: str) -> bytes:
    return hashlib.sha256(label.encode()).digest()


@pytest.fixture(scope="session")
def ref_keys():
    """Three seeded RSA-2048 key pairs: alice, bob, carol."""
    return {name: cs.generate_keypair(REF, seed_for(name)) for name in ("alice", "bob", "carol")}


@pytest.fixture(scope="session")
def mock_keys():
    return {name: cs.generate_keypair(MOCK, seed_for(name)) for name in ("alice", "bob", "carol")}


def make_books(keys):
    """Contact books where everyone knows everyone, alias = name."""
    books = {name: ContactBook(kp) for name, kp in keys.items()}
    for name, book in books.items():
        for other, kp in keys.items():
            if other != name:
                book.add_contact(Contact(other, kp.public_key, name))
    return books


# acceptance summary: one line per criterion

_criteria = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[marker] = report.outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), outcome in sorted(_criteria.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] AC{number:>2} {title}")
