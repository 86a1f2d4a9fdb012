from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ssicharge.crypto import make_backend  # noqa: E402
from ssicharge.crypto.rng import Rng  # noqa: E402
from ssicharge.crypto.types import ContractCredential, ProofRequest  # noqa: E402

SCHEMA = ("emsp_id", "tariff", "valid_until")
ATTRS = {"emsp_id": "EMSP-A", "tariff": "standard", "valid_until": "2030-12-31"}

# criterion number -> (ok, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@dataclass
class Issuer:
    backend: object
    pk: object
    sk: object
    registry: object

    def issue(self, attrs: dict[str, str] | None = None, seed: int = 0) -> ContractCredential:
        """Run blinding, issuance and completion; the registry advances."""
        attrs = dict(attrs or ATTRS)
        be = self.backend
        ms = be.new_master_secret()
        nonce = be.random_bytes(16)
        blinded, v_prime = be.blind_master_secret(self.pk, ms, nonce)
        res = be.issue_credential(self.sk, blinded, attrs, nonce, self.registry)
        A, e, v = be.complete_credential(res.pre_credential, v_prime, ms, attrs, res.rev_index_prime, self.pk)
        self.registry = res.registry
        return ContractCredential(
            self.registry.cred_def_id, attrs, A, e, v, ms, res.rev_index_prime, res.witness,
            self.registry.registry_id, res.registry.version, be.random_bytes(32), be.random_bytes(16),
        )

    def request(self, reveal=("emsp_id",), version: int | None = None) -> ProofRequest:
        v = self.registry.version if version is None else version
        return ProofRequest(self.backend.random_bytes(16), tuple(reveal), ((self.registry.cred_def_id, v),))


def make_issuer(backend_name: str, seed: int = 1, bits: int = 512) -> Issuer:
    be = make_backend(backend_name, Rng(seed))
    pk, sk = be.issuer_keygen(SCHEMA, bits)
    registry = be.registry_setup(sk, "creddef:test")
    return Issuer(be, pk, sk, registry)


@pytest.fixture(scope="session")
def concrete_issuer_template() -> Issuer:
    return make_issuer("concrete")


@pytest.fixture
def concrete_issuer(concrete_issuer_template) -> Issuer:
    t = concrete_issuer_template
    return Issuer(t.backend, t.pk, t.sk, t.registry)


@pytest.fixture(params=["concrete", "symbolic"])
def issuer(request) -> Issuer:
    return make_issuer(request.param)
