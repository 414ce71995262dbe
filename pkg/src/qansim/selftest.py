"""Fast sanity checks behind ``qansim selftest``; one PASS/FAIL line each."""
from __future__ import annotations

import math
from typing import Callable, TextIO

import numpy as np

from . import qsim
from .attacks import forge_bit
from .experiments import anonymity_exact, detection_curve, detection_law, pairwise_max_tvd
from .protocol import SessionConfig
from .rng import RngStream
from .shares import generate_shares, reconstruct


def _channels(rng: RngStream) -> bool:
    psi = rng.generator.normal(size=4) + 1j * rng.generator.normal(size=4)
    st = qsim.DensityState.from_ket(psi / np.linalg.norm(psi))
    mixed = qsim.depolarize2(st, 0, 1, 15 / 16)
    return np.allclose(mixed.rho, np.eye(4) / 4, atol=1e-9)


def _shares(rng: RngStream) -> bool:
    for i in range(200):
        s = generate_shares(5, float(rng.uniform(0, 2 * math.pi)), excluded_user=i % 5, rng=rng.child(i))
        if abs(math.remainder(reconstruct(s) - s.target, 2 * math.pi)) > 1e-9:
            return False
    return True


def _anonymity(rng: RngStream) -> bool:
    return pairwise_max_tvd(anonymity_exact(4)) < 1e-10


def _detection(rng: RngStream) -> bool:
    pts = detection_curve((0.3,), 3, 400, rng, SessionConfig())
    return all(abs(p.prob - detection_law(p.pz, p.k)) < 4 * max(p.stderr, 0.01) for p in pts)


def _forgery(rng: RngStream) -> bool:
    for n in range(1, 5):
        for word in range(2**n):
            bits = [(word >> i) & 1 for i in range(n)]
            for target in (0, 1):
                if sum(bits + [forge_bit(bits, target)]) % 2 != target:
                    return False
    return True


CHECKS: dict[str, Callable[[RngStream], bool]] = {
    "depolarizing-to-mixed": _channels,
    "share-reconstruction": _shares,
    "anonymity-exact": _anonymity,
    "detection-law": _detection,
    "parity-forgery": _forgery,
}


def run_selftest(out: TextIO, seed: int = 12345) -> bool:
    root = RngStream(seed)
    ok = True
    for i, (name, check) in enumerate(CHECKS.items()):
        passed = bool(check(root.child(i)))
        ok &= passed
        out.write(f"{'PASS' if passed else 'FAIL'} {name}\n")
    return ok
