from .backend import ConcreteBackend, CryptoBackend, make_backend
from .contract_auth import check_contract_auth, make_contract_auth
from .rng import Rng
from .symbolic import SymbolicBackend
from .types import (
    MASTER_SECRET,
    REV_INDEX,
    BlindedSecret,
    ContractAuthData,
    ContractCredential,
    DidKeys,
    IssuanceResult,
    IssuerPublicKey,
    IssuerSecretKey,
    NonRevocationProof,
    PreCredential,
    Presentation,
    ProofRequest,
    RegistryDelta,
    RevocationRegistryState,
    encode_attr,
    sha256,
)

__all__ = [
    "ConcreteBackend",
    "CryptoBackend",
    "SymbolicBackend",
    "make_backend",
    "check_contract_auth",
    "make_contract_auth",
    "Rng",
    "MASTER_SECRET",
    "REV_INDEX",
    "BlindedSecret",
    "ContractAuthData",
    "ContractCredential",
    "DidKeys",
    "IssuanceResult",
    "IssuerPublicKey",
    "IssuerSecretKey",
    "NonRevocationProof",
    "PreCredential",
    "Presentation",
    "ProofRequest",
    "RegistryDelta",
    "RevocationRegistryState",
    "encode_attr",
    "sha256",
]
