import math

import pytest

import config
from diophantine import dirichlet_asymptote
from errors import OracleError
from gapcount import select_gaps
from oracle import (
    BoxDiscretization,
    box_eigenvalues,
    box_gap_modes,
    decay_periods,
    default_margin,
    dirichlet_spectrum,
    gap_count_oracle,
)
from floquet import discriminant
from potential import PolyPiece, constant_spec, periodized_defect_pieces


@pytest.fixture(scope="module")
def kp_gap_map(kp_spec):
    return {g.index: g for g in select_gaps(kp_spec, 5, 9)}


def test_box_geometry(kp_spec):
    a = kp_spec.period
    box = BoxDiscretization(2 * a, 2 * a, 5000)
    assert box.length == pytest.approx(4 * a + 1.0)
    nodes = box.nodes()
    assert nodes[0] == pytest.approx(-2 * a + box.h)
    assert nodes[-1] == pytest.approx(1.0 + 2 * a - box.h)
    bigger = box.enlarged(kp_spec)
    assert bigger.L_left == pytest.approx(3 * a)
    assert bigger.h == pytest.approx(box.h, rel=1e-3)


def test_box_validation(kp_spec):
    a = kp_spec.period
    with pytest.raises(OracleError):
        box_eigenvalues(kp_spec, BoxDiscretization(2.5 * a, 2 * a, 5000), 100.0)
    with pytest.raises(OracleError):
        box_eigenvalues(kp_spec, BoxDiscretization(2 * a, 2 * a, 500), 100.0)
    with pytest.raises(OracleError):
        box_eigenvalues(kp_spec, BoxDiscretization(400 * a, 400 * a, 1000), 100.0)


def test_free_box_eigenvalues():
    spec = constant_spec(1.0, 0.0, 0.0)
    box = BoxDiscretization(3.0, 3.0, 4000)
    vals = box_eigenvalues(spec, box, 2.0)
    expected = [(n * math.pi / 7.0) ** 2 for n in range(1, len(vals) + 1)]
    assert len(vals) == 3
    assert vals == pytest.approx(expected, rel=1e-6)
    assert box_eigenvalues(spec, box, -5.0) == []


def test_dispersion_correction_removes_stencil_bias():
    spec = constant_spec(1.0, 0.0, 0.0)
    box = BoxDiscretization(3.0, 3.0, 4000)
    exact = (20 * math.pi / 7.0) ** 2
    raw = [E for E in box_eigenvalues(spec, box, 82.0) if E > 79.0]
    modes = box_gap_modes(spec, box, 79.0, 82.0)
    assert len(modes) == 1 == len(raw)
    assert abs(raw[0] - exact) > 1e-3
    assert modes[0][0] == pytest.approx(exact, abs=1e-6)
    # An extended standing wave has much of its weight near the walls
    assert modes[0][1] > config.BOX_ARTIFACT_MASS


def test_decay_periods_and_margin(kp_spec, kp_gap_map):
    gap = kp_gap_map[9]
    assert decay_periods(kp_spec, gap) >= config.BOX_PERIODS
    box = BoxDiscretization(12 * kp_spec.period, 12 * kp_spec.period, 60000)
    margin = default_margin(kp_spec, box, gap.E_hi)
    assert 0 < margin < 1e-3 * gap.width


def test_oracle_box_arguments(kp_spec, kp_gap_map):
    a = kp_spec.period
    box = BoxDiscretization(12 * a, 12 * a, 20000)
    with pytest.raises(OracleError):
        gap_count_oracle(kp_spec, kp_gap_map[9], boxes=[box])
    with pytest.raises(OracleError):
        gap_count_oracle(kp_spec, kp_gap_map[9], boxes=[box, box])


def test_dirichlet_spectrum_of_free_interval():
    pieces = [PolyPiece(0.0, math.pi, (0.0,))]
    assert dirichlet_spectrum(pieces, math.pi, 5) == pytest.approx([1.0, 4.0, 9.0, 16.0, 25.0], rel=1e-8)
    with pytest.raises(OracleError):
        dirichlet_spectrum(pieces, math.pi, 0)


def test_constant_defect_dirichlet_levels(kp_spec):
    q_def = kp_spec.defect[0].coeffs[0]
    levels = dirichlet_spectrum(periodized_defect_pieces(kp_spec), 1.0, 6)
    expected = [dirichlet_asymptote(1.0, q_def, n) for n in range(1, 7)]
    assert levels == pytest.approx(expected, rel=1e-9)


@pytest.mark.slow
def test_linear_defect_approaches_dirichlet_asymptote():
    pieces = [PolyPiece(0.0, 1.0, (0.0, 10.0))]
    levels = dirichlet_spectrum(pieces, 1.0, 25)
    gaps = [abs(mu - dirichlet_asymptote(1.0, 5.0, n)) for n, mu in enumerate(levels, start=1)]
    assert gaps[-1] < 0.5
    assert gaps[-1] < gaps[1]


@pytest.mark.slow
@pytest.mark.parametrize("j, expected", [(5, 1), (7, 1), (9, 2)])
def test_box_oracle_counts(kp_spec, kp_gap_map, j, expected):
    assert gap_count_oracle(kp_spec, kp_gap_map[j]) == expected



@pytest.fixture(scope="module")
def kp_dirichlet_levels(kp_spec):
    return dirichlet_spectrum(kp_spec.periodic, kp_spec.period, 25)


def test_square_wave_dirichlet_levels_approach_asymptote(kp_spec, kp_dirichlet_levels):
    # The square wave has zero mean
    deviation = [
        abs(mu - dirichlet_asymptote(kp_spec.period, 0.0, n)) for n, mu in enumerate(kp_dirichlet_levels, start=1)
    ]
    assert deviation[-1] < 0.5
    assert max(deviation[20:]) < max(deviation[:5])


def test_square_wave_dirichlet_levels_sit_in_gaps(kp_spec, kp_dirichlet_levels):
    # u(a) = 0 makes the monodromy triangular, so |trace| = |u'(a) + 1/u'(a)| >= 2
    for mu in kp_dirichlet_levels:
        assert abs(discriminant(kp_spec, mu)) >= 2 - 1e-6


@pytest.mark.slow
def test_nth_dirichlet_level_lies_in_nth_gap(kp_spec, kp_dirichlet_levels):
    open_gaps = {g.index: g for g in select_gaps(kp_spec, 1, 25)}
    assert open_gaps
    for n, mu in enumerate(kp_dirichlet_levels, start=1):
        gap = open_gaps.get(n)
        if gap is None:
            continue
        assert gap.E_lo - 1e-6 <= mu <= gap.E_hi + 1e-6
