import itertools
import math
from collections import Counter

import numpy as np
import pytest

from qansim.errors import InvalidArgument
from qansim.protocol import (
    AngleMode,
    GhzAssignment,
    Scope,
    SessionConfig,
    Variant,
    assign_ghz,
    baseline_circuit,
    broadcast_and_collect,
    modified_circuit,
    parities_from_broadcasts,
    run_round_baseline,
    run_round_modified,
    run_session,
)
from qansim.qsim import NoiseParams, exact_distribution
from qansim.rng import RngStream
from qansim.shares import generate_shares, zero_shares


def test_assign_ghz_uniform_over_s3():
    root = RngStream(11)
    counts = Counter(assign_ghz(3, 0, root.child(i)).mapping for i in range(10_000))
    assert set(counts) == set(itertools.permutations(range(3)))
    for c in counts.values():
        assert abs(c / 10_000 - 1 / 6) < 0.03


def test_assignment_is_invertible():
    a = assign_ghz(5, 2, RngStream(4))
    for u in range(5):
        assert a.user_at(a.slot_of(u)) == u
    with pytest.raises(InvalidArgument):
        GhzAssignment(0, (0, 0, 1))
    assert assign_ghz(2, 0, RngStream(1)).mapping in {(0, 1), (1, 0)}


@pytest.mark.parametrize("seed", range(5))
def test_modified_kick_gives_parity_one(seed):
    cfg = SessionConfig(n=4, notifier=0, receiver=2)
    a = assign_ghz(4, 0, RngStream(seed))
    s = generate_shares(4, 0.0, 0, RngStream(seed + 100))
    hit = run_round_modified(cfg, a, s, RngStream(seed), force_kick=True)
    idle = run_round_modified(cfg, a, s, RngStream(seed), force_kick=False)
    assert hit.parities[0] == 1 and hit.kick_applied
    assert idle.parities[0] == 0 and not idle.kick_applied


def test_share_invariance_exact():
    cfg = SessionConfig(n=4, notifier=1, receiver=3)
    a = GhzAssignment(1, (2, 0, 3, 1))
    ref = exact_distribution(modified_circuit(cfg, a, zero_shares(4, 1, 1)))
    ref_kick = exact_distribution(modified_circuit(cfg, a, zero_shares(4, 1, 1), kick_slot=2))
    for i in range(10):
        s = generate_shares(4, 0.0, 1, RngStream(i), ghz_index=1)
        np.testing.assert_allclose(exact_distribution(modified_circuit(cfg, a, s)), ref, atol=1e-10)
        np.testing.assert_allclose(
            exact_distribution(modified_circuit(cfg, a, s, kick_slot=2)), ref_kick, atol=1e-10
        )


def test_mask_must_exclude_distributor():
    cfg = SessionConfig(n=3)
    a = assign_ghz(3, 0, RngStream(0))
    with pytest.raises(InvalidArgument):
        run_round_modified(cfg, a, zero_shares(3, None, 0), RngStream(0))
    with pytest.raises(InvalidArgument):
        run_round_modified(cfg, a, zero_shares(3, 1, 0), RngStream(0))


def test_wrong_distributor_rejected():
    cfg = SessionConfig(n=3, notifier=0, receiver=1)
    with pytest.raises(InvalidArgument):
        run_round_baseline(cfg, assign_ghz(3, 1, RngStream(0)), RngStream(0))


def test_baseline_z_and_identity():
    cfg = SessionConfig(n=4, notifier=0, receiver=3, variant="baseline")
    a = assign_ghz(4, 0, RngStream(2))
    for seed in range(5):
        assert run_round_baseline(cfg, a, RngStream(seed), force_kick=True).parities[0] == 1
        assert run_round_baseline(cfg, a, RngStream(seed), force_kick=False).parities[0] == 0


def test_baseline_and_modified_agree_noiseless():
    a = GhzAssignment(0, (3, 1, 0, 2))
    cfg = SessionConfig(n=4)
    for kick in (None, 1):
        m = exact_distribution(modified_circuit(cfg, a, zero_shares(4, 0, 0), kick))
        b = exact_distribution(baseline_circuit(cfg, a, kick))
        np.testing.assert_allclose(m, b, atol=1e-12)


def test_broadcast_preserves_parities():
    cfg = SessionConfig(n=4, scope="all-ghz", angle_mode="per-ghz", pz=0.5)
    res = run_session(cfg.replace(k_rounds=20), RngStream(5))
    for rec in res.records:
        assert rec.announced_parities == rec.parities
        for g in rec.ghz:
            assert g.parity == sum(rec.bits[(g.label, u)] for u in range(4)) % 2


def test_broadcast_single_ghz_is_identity_permutation():
    cfg = SessionConfig(n=3)
    rec = run_round_modified(cfg, assign_ghz(3, 0, RngStream(1)), zero_shares(3, 0, 0), RngStream(1))
    rec = broadcast_and_collect(rec, RngStream(2))
    assert all(list(p) == [0] for p in rec.permutations)


def test_broadcast_permutation_marginals_uniform():
    cfg = SessionConfig(n=3, scope="all-ghz")
    root = RngStream(8)
    assigns = [assign_ghz(3, j, RngStream(j)) for j in range(3)]
    shares = [zero_shares(3, j, j) for j in range(3)]
    rec = run_round_modified(cfg, assigns, shares, RngStream(0))
    first = Counter()
    for i in range(10_000):
        broadcast_and_collect(rec, root.child(i))
        first[int(rec.permutations[0][0])] += 1
    for c in first.values():
        assert abs(c / 10_000 - 1 / 3) < 0.03


def test_parities_from_broadcasts_order_free():
    bc = [[(0, 1), (1, 0)], [(1, 1), (0, 1)], [(0, 1), (1, 1)]]
    assert parities_from_broadcasts(bc, [0, 1]) == {0: 1, 1: 0}
    assert parities_from_broadcasts(bc[::-1], [1, 0]) == {0: 1, 1: 0}


def test_detection_rate_k3():
    cfg = SessionConfig(n=4, pz=0.3, k_rounds=3)
    root = RngStream(99)
    hits = sum(run_session(cfg, root.child(t)).detected for t in range(10_000))
    assert abs(hits / 10_000 - (1 - 0.7**3)) < 0.02


def test_pz_one_always_detects_in_round_zero():
    for variant in Variant:
        cfg = SessionConfig(n=3, pz=1.0, variant=variant)
        res = run_session(cfg, RngStream(1))
        assert res.detected and res.detection_round == 0


@pytest.mark.parametrize("scope", list(Scope))
@pytest.mark.parametrize("mode", [AngleMode.ZERO, AngleMode.PER_GHZ])
def test_noiseless_never_false_positive(scope, mode):
    cfg = SessionConfig(n=4, pz=0.7, k_rounds=6, scope=scope, angle_mode=mode)
    for t in range(30):
        res = run_session(cfg, RngStream(t))
        assert not res.false_positive
        assert not any(res.false_positive_flags.values())


@pytest.mark.parametrize("scope", list(Scope))
def test_shared_mode_leaves_residual_phase(scope):
    # one share set reused everywhere: skipping the distributor leaves -share[j]
    cfg = SessionConfig(n=4, pz=0.0, k_rounds=10, scope=scope, angle_mode="shared")
    flips = sum(run_session(cfg, RngStream(t)).false_positive for t in range(50))
    assert flips > 0


def test_zero_noise_pz_zero_all_parities_zero():
    cfg = SessionConfig(n=5, pz=0.0, k_rounds=5, scope="all-ghz", angle_mode="per-ghz")
    for t in range(20):
        res = run_session(cfg, RngStream(t))
        assert all(v == 0 for r in res.records for v in r.parities.values())


def test_noisy_false_positive_flags_exclude_receiver():
    cfg = SessionConfig(n=4, pz=0.0, k_rounds=9, noise=NoiseParams(0.05, 0.05))
    res = next(r for t in range(100) if (r := run_session(cfg, RngStream(t))).false_positive)
    assert cfg.receiver not in res.false_positive_flags
    assert any(res.false_positive_flags.values())


def test_config_validation():
    with pytest.raises(InvalidArgument):
        SessionConfig(notifier=1, receiver=1)
    with pytest.raises(InvalidArgument):
        SessionConfig(pz=1.5)
    with pytest.raises(InvalidArgument):
        SessionConfig(k_rounds=0)
    with pytest.raises(InvalidArgument):
        SessionConfig(backend="gpu")
    with pytest.raises(ValueError):
        SessionConfig(variant="legacy")


def test_sessions_reproducible():
    cfg = SessionConfig(n=4, pz=0.4, k_rounds=5, noise=NoiseParams(0.01, 0.02))
    a = run_session(cfg, RngStream(3))
    b = run_session(cfg, RngStream(3))
    assert [r.bits for r in a.records] == [r.bits for r in b.records]


def test_trajectory_backend_sessions():
    cfg = SessionConfig(n=4, pz=1.0, backend="trajectory")
    assert run_session(cfg, RngStream(0)).detected
