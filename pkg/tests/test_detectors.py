import numpy as np
import pytest

from envcap.detectors import (
    DetectorParams,
    InapplicableError,
    PovmElement,
    best_detector_bound,
    detector_bound_large_deficit,
    detector_bound_small_deficit,
    min_trace_ppt_detector,
    nearest_maximally_entangled,
    project_to_ppt_box,
    random_ppt_element,
    random_ppt_povm,
    schmidt_tail_mass,
    truncate_state,
    verify_detector_bounds,
)
from envcap.metrics import fidelity, trace_distance
from envcap.tensor import (
    BipartiteShape,
    DomainError,
    PureStateVector,
    partial_transpose,
    schmidt_decompose,
)

from conftest import maximally_entangled, random_pure


SHAPE22 = BipartiteShape(2, 2)


def state_from_coefficients(lam, db, dc):
    lam = np.asarray(lam, dtype=float)
    vec = np.zeros(db * dc, dtype=complex)
    for j, l in enumerate(lam):
        vec[j * dc + j] = np.sqrt(l)
    return PureStateVector(vec, BipartiteShape(db, dc))


# --- closed-form floors -----------------------------------------------------


def test_small_deficit_perfect():
    assert detector_bound_small_deficit(4, 0.0, 0.0) == pytest.approx(4.0)


def test_small_deficit_plug_in():
    value = detector_bound_small_deficit(8, 0.05, 1e-4)
    assert value == pytest.approx((1 - 0.05 - np.sqrt(2) * 0.1) * 8, abs=1e-12)
    assert value == pytest.approx(6.4686, abs=1e-3)


def test_small_deficit_clamps_vacuous():
    assert detector_bound_small_deficit(4, 0.2, 1.0) == 0.0


def test_large_deficit_plug_in():
    value = detector_bound_large_deficit(32, 0.0, 1.0, 16.0)
    assert value == pytest.approx((1 - np.sqrt(0.5)) * 2, abs=1e-12)
    assert value == pytest.approx(0.5858, abs=1e-4)


def test_large_deficit_vanishes_at_large_k():
    assert detector_bound_large_deficit(32, 0.0, 1.0, 2.0**40) < 1e-9
    with pytest.raises(DomainError):
        detector_bound_large_deficit(32, 0.0, 1.0, 1.0)


def test_selector_small_deficit_regime():
    sel = best_detector_bound(8, 0.1, 0.0)
    assert sel.winner == "small-deficit"
    assert sel.value == pytest.approx(8 * 0.9, abs=1e-9)


def test_selector_large_deficit_regime():
    sel = best_detector_bound(64, 0.0, 2.5)
    # small-deficit form is vacuous here, the K-optimized one is not
    assert sel.small_deficit == 0.0
    assert sel.large_deficit > 0.0
    assert sel.winner == "large-deficit"


def test_detector_params_validation():
    with pytest.raises(DomainError):
        DetectorParams(epsilon=1.2, delta_cap=0.0)
    with pytest.raises(DomainError):
        DetectorParams(epsilon=0.1, delta_cap=0.0, k_factor=1.0)


# --- Schmidt tails ----------------------------------------------------------


def test_tail_mass_uniform_coefficients():
    psi = maximally_entangled(3)
    rep = schmidt_tail_mass(schmidt_decompose(psi), 3, 1.5)
    assert rep.q_mass == 0.0
    assert rep.delta == pytest.approx(0.0, abs=1e-9)
    assert rep.satisfied


def test_tail_mass_hand_example():
    psi = state_from_coefficients([0.9, 0.1], 2, 2)
    rep = schmidt_tail_mass(schmidt_decompose(psi), 2, 1.5)
    assert rep.q_mass == pytest.approx(0.9, abs=1e-12)
    assert rep.delta == pytest.approx(0.531004, abs=1e-5)
    assert rep.cap == pytest.approx(2.617269, abs=1e-5)
    assert rep.satisfied


def test_tail_mass_excludes_threshold_ties():
    # coefficient exactly at K/d_B does not count
    psi = state_from_coefficients([0.75, 0.25], 2, 2)
    rep = schmidt_tail_mass(schmidt_decompose(psi), 2, 1.5)
    assert rep.q_mass == 0.0


def test_truncate_noop_when_no_tail():
    psi = maximally_entangled(2)
    out = truncate_state(psi, 2, 1.5)
    assert out.tail_mass == pytest.approx(0.0, abs=1e-12)
    assert abs(fidelity(out.state.projector(), psi.projector()) - 1.0) < 1e-9


def test_truncate_hand_example():
    psi = state_from_coefficients([0.9, 0.1], 2, 2)
    out = truncate_state(psi, 2, 1.5)
    assert out.fidelity == pytest.approx(0.1, abs=1e-12)
    lam = schmidt_decompose(out.state).coefficients
    assert lam[0] == pytest.approx(1.0, abs=1e-12)


def test_truncate_degenerate():
    psi = state_from_coefficients([1.0], 2, 2)
    with pytest.raises(DomainError):
        truncate_state(psi, 2, 1.5)


def test_truncate_trace_distance_bound(rng):
    for _ in range(1000):
        db, dc = rng.integers(2, 4, size=2)
        if db > dc:
            db, dc = dc, db
        psi = random_pure(BipartiteShape(db, dc), rng)
        k = float(rng.uniform(1.01, 3.0))
        dec = schmidt_decompose(psi)
        if (dec.coefficients <= k / db).sum() == 0:
            continue
        out = truncate_state(psi, db, k)
        t = trace_distance(psi.projector(), out.state.projector())
        assert t <= np.sqrt(out.tail_mass) + 1e-9
        f = fidelity(psi.projector(), out.state.projector())
        assert f == pytest.approx(1.0 - out.tail_mass, abs=1e-9)


def test_nearest_max_entangled_fixed_point():
    psi = maximally_entangled(3)
    out = nearest_maximally_entangled(psi, 3)
    assert out.fidelity == pytest.approx(1.0, abs=1e-9)
    assert abs(abs(np.vdot(out.state.amplitudes, psi.amplitudes)) - 1.0) < 1e-9


def test_nearest_max_entangled_product():
    psi = state_from_coefficients([1.0], 2, 2)
    out = nearest_maximally_entangled(psi, 2)
    assert out.fidelity == pytest.approx(0.5, abs=1e-12)


def test_nearest_max_entangled_pinsker_chain(rng):
    for _ in range(1000):
        db = int(rng.integers(2, 4))
        dc = int(rng.integers(db, 5))
        psi = random_pure(BipartiteShape(db, dc), rng)
        out = nearest_maximally_entangled(psi, db)
        floor = max(0.0, 1.0 - np.sqrt(out.deficit)) ** 2
        assert out.fidelity >= floor - 1e-9
        # the construction achieves the best fidelity among purifications
        assert out.fidelity <= 1.0 + 1e-12


# --- detector checks --------------------------------------------------------


def test_verify_identity_detector():
    psi = maximally_entangled(2)
    m = PovmElement.certified(np.eye(4), SHAPE22)
    chk = verify_detector_bounds(psi, m)
    assert chk.trace == pytest.approx(4.0)
    assert chk.epsilon == pytest.approx(0.0, abs=1e-12)
    assert chk.slack_small == pytest.approx((2 - 1) * 2, abs=1e-9)
    assert chk.satisfied


def test_verify_product_projector_vacuous():
    vec = np.zeros(4)
    vec[0] = 1.0
    psi = PureStateVector(vec, SHAPE22)
    m = PovmElement.certified(np.outer(vec, vec), SHAPE22)
    chk = verify_detector_bounds(psi, m)
    assert chk.delta == pytest.approx(1.0, abs=1e-9)
    assert chk.satisfied  # both floors are vacuous at full deficit


def test_verify_rejects_non_ppt():
    psi = maximally_entangled(2)
    m = PovmElement(psi.projector(), SHAPE22)
    with pytest.raises(InapplicableError):
        verify_detector_bounds(psi, m)


def test_povm_element_validation():
    with pytest.raises(DomainError):
        PovmElement(np.eye(4) * 1.5, SHAPE22)
    with pytest.raises(DomainError):
        PovmElement(np.eye(4), SHAPE22, ppt_certificate=-0.3)


# --- minimum-trace solver ---------------------------------------------------


def test_solver_product_target():
    vec = np.zeros(4)
    vec[0] = 1.0
    sol = min_trace_ppt_detector(PureStateVector(vec, SHAPE22), 0.0)
    assert sol.converged
    assert sol.trace == pytest.approx(1.0, abs=1e-6)


def test_solver_bell_target():
    sol = min_trace_ppt_detector(maximally_entangled(2), 0.0)
    assert sol.converged
    assert 2.0 - 1e-3 <= sol.trace <= 2.1
    assert sol.max_residual <= 1e-6


def test_solver_monotone_in_epsilon(rng):
    psi = random_pure(BipartiteShape(2, 3), rng)
    traces = [min_trace_ppt_detector(psi, eps).trace for eps in (0.0, 0.05, 0.1, 0.2)]
    for a, b in zip(traces, traces[1:]):
        assert b <= a + 1e-6


def test_solver_feasibility_random_targets(rng):
    for dims in ((2, 2), (2, 3), (3, 3)):
        psi = random_pure(BipartiteShape(*dims), rng)
        sol = min_trace_ppt_detector(psi, 0.05)
        assert sol.converged
        assert sol.max_residual <= 1e-6
        chk = verify_detector_bounds(psi, sol.element)
        assert chk.slack_small >= -1e-6
        assert chk.slack_large >= -1e-6


def test_solver_rejects_large_dimension(rng):
    psi = random_pure(BipartiteShape(3, 6), rng)
    with pytest.raises(DomainError):
        min_trace_ppt_detector(psi, 0.0)


# --- proof-step sweeps ------------------------------------------------------


def test_ppt_projection_produces_ppt(rng):
    for _ in range(50):
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        m = project_to_ppt_box((g + g.conj().T) / 2, SHAPE22)
        w = np.linalg.eigvalsh(m)
        wg = np.linalg.eigvalsh(partial_transpose(m, SHAPE22))
        assert w[0] >= -1e-10 and w[-1] <= 1 + 1e-10 and wg[0] >= -1e-10


def test_max_entangled_overlap_capped_by_trace(rng):
    # tr(psi_hat M) <= tr(M)/d_B for PPT M and any maximally entangled psi_hat
    from envcap.tensor import haar_random_unitary

    violations = 0
    for trial in range(1000):
        db, dc = (2, 2) if trial % 2 == 0 else (2, 3)
        shape = BipartiteShape(db, dc)
        m = random_ppt_element(shape, rng)
        base = maximally_entangled_in(db, dc)
        v = haar_random_unitary(db, rng)
        w = haar_random_unitary(dc, rng)
        psi = np.kron(v, w) @ base
        overlap = float(np.real(np.vdot(psi, m.matrix @ psi)))
        if overlap > m.trace() / db + 1e-9:
            violations += 1
    assert violations == 0


def maximally_entangled_in(db, dc):
    vec = np.zeros(db * dc, dtype=complex)
    for j in range(db):
        vec[j * dc + j] = 1.0 / np.sqrt(db)
    return vec


def test_truncated_overlap_capped_by_trace(rng):
    # tr(psi_tilde M) <= (K/d_B) tr(M) for PPT M and truncated psi_tilde
    for trial in range(1000):
        db, dc = (2, 2) if trial % 2 == 0 else (2, 3)
        shape = BipartiteShape(db, dc)
        m = random_ppt_element(shape, rng)
        psi = random_pure(shape, rng)
        k = float(rng.uniform(1.01, 2.5))
        dec = schmidt_decompose(psi)
        if (dec.coefficients <= k / db).sum() == 0:
            continue
        tilde = truncate_state(psi, db, k).state
        overlap = float(np.real(np.vdot(tilde.amplitudes, m.matrix @ tilde.amplitudes)))
        assert overlap <= (k / db) * m.trace() + 1e-9


def test_random_ppt_povm_is_complete_and_ppt(rng):
    for dims in ((2, 2), (2, 3)):
        shape = BipartiteShape(*dims)
        povm = random_ppt_povm(shape, 4, rng)
        total = sum(e.matrix for e in povm)
        assert np.abs(total - np.eye(shape.total)).max() < 1e-10
        assert all(e.is_ppt for e in povm)
