"""Closed-form operation-count estimates for the implemented receivers and
the two external reference architectures (daisy chain, hierarchical
SIC-VMP), as functions of the system dimensions."""

from __future__ import annotations


def complexity_estimates(M: int, K: int, B: int, mod_size: int,
                         J: int, T: int) -> dict:
    """Operation counts for all receiver families.

    Returns a dict with:
      mf_per_lpu          one LPU's mean-field work per visit
      decentral_worst     chain receiver, no user ever clears the SIC gate
      decentral_best      chain receiver, all users SIC-detected in sweep 1
      daisy_chain         decentralized ZF-approximation reference
      zf                  centralized zero-forcing
      central_vmp         centralized mean-field receiver
      sic_vmp             hierarchical receiver with central SIC
    """
    for name, v in (("M", M), ("K", K), ("B", B), ("mod_size", mod_size),
                    ("J", J), ("T", T)):
        if v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    mb = M / B
    s = mod_size
    c_mf = J * (K * (4 + s) + mb) + 3 * mb * K
    worst = T * (B * c_mf + K * (B * (2 * s + 1) - 2 * s))
    best = B * c_mf + K * (2 * s * (B - 1) + 1)
    return {
        "mf_per_lpu": c_mf,
        "decentral_worst": worst,
        "decentral_best": best,
        "daisy_chain": M * (K + 2),
        "zf": K**3 / 3 + M * K**2 + M * K,
        "central_vmp": J * (M * (3 + 2 * K) + M * K * s) + 3 * M * K,
        "sic_vmp": (K**2 / 2) * (3 * M + B * (s + 4) + 1) + M * K,
    }
