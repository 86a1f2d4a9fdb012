"""Exception hierarchy shared by all modules.

Class names double as the error codes that appear in traces, scenario
outcomes and CLI diagnostics, so they are part of the external interface.
"""


class SsiChargeError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


# crypto


class CryptoError(SsiChargeError):
    pass


class DecryptFailed(CryptoError):
    pass


class InvalidBlinding(CryptoError):
    pass


class SchemaMismatch(CryptoError):
    pass


class InvalidSignature(CryptoError):
    pass


class StaleWitness(CryptoError):
    pass


class UnknownElement(CryptoError):
    pass


class Revoked(CryptoError):
    pass


class BadTag(CryptoError):
    pass


class Expired(CryptoError):
    pass


class Replayed(CryptoError):
    pass


# ledger


class LedgerError(SsiChargeError):
    pass


class PermissionDenied(LedgerError):
    pass


class DuplicateDid(LedgerError):
    pass


class DanglingReference(LedgerError):
    pass


class VersionConflict(LedgerError):
    pass


class NotFound(LedgerError):
    pass


class InvalidObject(LedgerError):
    pass


# protocol / actors


class ProtocolError(SsiChargeError):
    pass


class UnexpectedMessage(ProtocolError):
    pass


class AuthFailed(ProtocolError):
    pass


class PopFailed(ProtocolError):
    pass


class BadSignature(ProtocolError):
    pass


class NonceMismatch(ProtocolError):
    pass


class UnknownDid(ProtocolError):
    pass


class NoContract(ProtocolError):
    pass


class NoCommonMode(ProtocolError):
    pass


class ProofInvalid(ProtocolError):
    pass


class RevokedCredential(ProtocolError):
    pass


class StaleRegistryVersion(ProtocolError):
    pass


class UnknownEmsp(ProtocolError):
    pass


class NotImplementedMode(ProtocolError):
    """Negotiated a mode whose flow is only stubbed (certificate PnC)."""


# harness


class ScriptError(SsiChargeError):
    pass
