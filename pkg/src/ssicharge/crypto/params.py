"""Bit-length parameters for the CL credential scheme.

The 2048-bit profile follows the AnonCreds constants. Smaller profiles only
shrink the quantities that depend on the modulus (v, v', the A-randomizer r);
the prime e keeps its size because it must stay larger than the attribute
space, and attributes stay 256-bit hashes.
"""

from __future__ import annotations

from dataclasses import dataclass

L_STATZK = 80
L_HASH = 256
L_ATTR = 256
L_E = 596
L_E_RANGE = 119
# v'' is 2724 bits at n=2048
V_OVER_N = 676


@dataclass(frozen=True)
class ClParams:
    l_n: int
    l_e: int = L_E
    l_e_range: int = L_E_RANGE
    l_m: int = L_ATTR
    l_statzk: int = L_STATZK
    l_h: int = L_HASH

    @property
    def l_v(self) -> int:
        return self.l_n + V_OVER_N

    @property
    def l_v_prime(self) -> int:
        return self.l_n + self.l_statzk

    @property
    def l_r(self) -> int:
        return self.l_n + self.l_statzk

    # blinding widths for Schnorr responses: secret width + statzk + hash
    @property
    def l_m_tilde(self) -> int:
        return self.l_m + self.l_statzk + self.l_h + 1

    @property
    def l_e_tilde(self) -> int:
        return self.l_e_range + self.l_statzk + self.l_h + 1

    @property
    def l_v_tilde(self) -> int:
        return self.l_v + 1 + self.l_statzk + self.l_h

    @property
    def l_v_prime_tilde(self) -> int:
        return self.l_v_prime + self.l_statzk + self.l_h

    @property
    def e_start(self) -> int:
        return 1 << (self.l_e - 1)

    @property
    def e_end(self) -> int:
        return self.e_start + (1 << (self.l_e_range - 1))


PROFILES = {
    "test": ClParams(l_n=512),
    "1024": ClParams(l_n=1024),
    "2048": ClParams(l_n=2048),
}


def params_for_bits(bits: int) -> ClParams:
    key = "test" if bits == 512 else str(bits)
    try:
        return PROFILES[key]
    except KeyError:
        raise ValueError(f"unsupported modulus size {bits}; use 512, 1024 or 2048") from None


def profile_bits(profile: str) -> int:
    if profile in ("test", "512"):
        return 512
    if profile in ("1024", "2048"):
        return int(profile)
    raise ValueError(f"unknown key profile {profile!r}")
