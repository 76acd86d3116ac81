import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delay_etc.benchmarks import EXAMPLE2_PARAMS, example1_phi
from delay_etc.certificate import ClassKFunction, KrasovskiiCertificate
from delay_etc.errors import RejectedInputError, TunerInfeasibleError
from delay_etc.history import HistoryWindow
from delay_etc.systems import LinearDelaySystem
from delay_etc.trigger import TriggerParams
from delay_etc.tuner import (
    LipschitzConstants,
    NontrivialityVariant,
    amplitude_ratio,
    check_linear_feasibility,
    check_nontriviality,
    compute_m_bar,
    compute_m_tilde,
    decay_rate,
    decay_ratio,
    evaluate_constants,
    nontriviality_bound,
    satisfies_amplitude_condition,
    satisfies_decay_condition,
    satisfies_rate_condition,
    tune,
)

unit = st.floats(min_value=0.01, max_value=0.95)
small = st.floats(min_value=0.0, max_value=2.0)


def test_m_bar_zero_amplitude():
    assert compute_m_bar(0.0, 0.47, 0.01, 0.3) == 0.0
    assert compute_m_bar(0.0, 1.0, 0.5, 0.5, xi=0.25) == 0.0


def test_m_bar_example1_value():
    assert compute_m_bar(16.0, 0.4701, 0.01, 0.303) == pytest.approx(16 * 0.4701 / 0.293)
    assert compute_m_bar(16.0, 0.4701, 0.01, 0.303) == pytest.approx(25.67, abs=0.01)


def test_m_bar_log_branch():
    expected = 1.0 / (0.5 * (math.log(0.75) - math.log(0.5)))
    assert compute_m_bar(1.0, 1.0, 0.5, 0.5, xi=0.25) == pytest.approx(expected)
    assert expected == pytest.approx(4.933, abs=1e-3)


def test_m_bar_log_branch_needs_xi():
    with pytest.raises(RejectedInputError):
        compute_m_bar(1.0, 1.0, 0.5, 0.5)
    with pytest.raises(RejectedInputError):
        compute_m_bar(1.0, 1.0, 0.5, 0.5, xi=0.5)


def test_m_bar_finite_near_branch_switch():
    c = 0.3
    near = compute_m_bar(1.0, 1.0, c - 1e-6, c)
    on = compute_m_bar(1.0, 1.0, c, c, xi=c - 1e-6)
    assert 0.0 < near < math.inf
    assert 0.0 < on < math.inf


def test_decay_rate():
    assert decay_rate(0.01, 0.3) == 0.01
    assert decay_rate(0.4, 0.3) == 0.3
    assert decay_rate(0.3, 0.3, xi=0.1) == 0.1


def test_m_tilde(ex1_cert, ex1_phi):
    assert compute_m_tilde(ex1_cert, ex1_phi) == pytest.approx(math.sqrt(2) * (1 + ex1_cert.eps))


def test_linear_feasibility_example1(ex1_system):
    assert check_linear_feasibility(ex1_system)


def test_linear_feasibility_degenerate_cases():
    marginal = LinearDelaySystem(A1=np.eye(2), A2=np.zeros((2, 2)), B=np.eye(2), K=np.zeros((2, 2)))
    assert check_linear_feasibility(marginal)
    aggressive = LinearDelaySystem(A1=[[2.0]], A2=[[0.0]], B=[[1.0]], K=[[-1.0]])
    assert not check_linear_feasibility(aggressive)


def test_example1_published_parameters_nontrivial(ex1_cert, ex1_consts, ex1_phi):
    params = TriggerParams(sigma=0.1, a=16.0, b=0.01)
    result = evaluate_constants(params, ex1_cert, ex1_consts, ex1_phi)
    assert result.b < result.c
    assert check_nontriviality(params, ex1_consts, result.m, 1)
    assert result.nontrivial_certified
    # nontriviality bound divided by a
    ratio = decay_ratio(0.01, 16.0, result.c, result.m_tilde, ex1_consts, 1)
    assert ratio == pytest.approx(0.90, abs=0.03)


def test_example2_published_parameters_nontrivial(ex2_cert, ex2_consts, ex2_phi):
    result = evaluate_constants(EXAMPLE2_PARAMS, ex2_cert, ex2_consts, ex2_phi)
    assert EXAMPLE2_PARAMS.b < ex2_cert.mu - EXAMPLE2_PARAMS.sigma
    assert result.nontrivial_certified


def test_zero_amplitude_fails_condition(ex2_consts):
    params = TriggerParams.state_only(sigma=0.05, b=0.02)
    assert not check_nontriviality(params, ex2_consts, m=0.22, tau=1)


def test_evaluate_constants_without_decay(ex1_cert, ex1_consts, ex1_phi):
    result = evaluate_constants(TriggerParams(sigma=0.5, a=16.0, b=0.01), ex1_cert, ex1_consts, ex1_phi)
    assert result.c < 0
    assert not result.nontrivial_certified


def test_evaluate_constants_log_branch_default_xi(ex1_cert, ex1_consts, ex1_phi):
    sigma = 0.1
    c = ex1_cert.mu - sigma
    result = evaluate_constants(TriggerParams(sigma=sigma, a=16.0, b=c), ex1_cert, ex1_consts, ex1_phi)
    assert result.xi == pytest.approx(c / 2)
    assert result.eta == result.xi
    assert not result.nontrivial_certified


def test_tune_infeasible():
    consts = LipschitzConstants(l11=0.5, l12=0.25, l2=0.25, L=1.0, L1=1.0)
    cert = KrasovskiiCertificate(mu=0.1, eps=0.0, chi_lipschitz=1.0)
    with pytest.raises(TunerInfeasibleError) as info:
        tune(0.1, consts, HistoryWindow.constant([1.0], tau=1), cert, tau=1)
    assert info.value.mu == 0.1
    assert info.value.lipschitz_product == pytest.approx(1.0)


def _assert_tuned(result, consts, cert, tau):
    assert result.nontrivial_certified
    assert result.b < result.c == pytest.approx(cert.mu - result.sigma)
    assert satisfies_rate_condition(result.c, consts)
    assert satisfies_amplitude_condition(result.a, result.c, result.m_tilde, consts)
    assert satisfies_decay_condition(result.b, result.a, result.c, result.m_tilde, consts, tau)
    assert check_nontriviality(result.params, consts, result.m, tau)


def test_tune_example1(ex1_cert, ex1_consts):
    for initial in ((1.0, 1.0), (-2.0, 3.0)):
        phi = example1_phi(initial)
        result = tune(ex1_cert.mu, ex1_consts, phi, ex1_cert, tau=1)
        _assert_tuned(result, ex1_consts, ex1_cert, 1)
        assert result == tune(ex1_cert.mu, ex1_consts, phi, ex1_cert, tau=1)


def test_tune_example2(ex2_cert, ex2_consts, ex2_phi):
    result = tune(ex2_cert.mu, ex2_consts, ex2_phi, ex2_cert, tau=1)
    _assert_tuned(result, ex2_consts, ex2_cert, 1)


def test_tune_retightens_nonlinear_chi():
    chi = ClassKFunction(lambda r: 0.1 * r + 0.001 * r * r, name="soft", lipschitz=lambda a: 0.1 + 0.002 * a)
    cert = KrasovskiiCertificate(mu=0.5, eps=0.1, chi_lipschitz=0.1, chi=chi)
    consts = LipschitzConstants(l11=0.1, l12=0.05, l2=0.5, L=0.1, L1=1.0)
    phi = HistoryWindow.constant([1.0], tau=1)
    result = tune(cert.mu, consts, phi, cert, tau=1)
    assert result.nontrivial_certified
    tightened = LipschitzConstants(0.1, 0.05, 0.5, chi.lipschitz_on(result.a), 1.0)
    assert result.m_bar == pytest.approx(compute_m_bar(result.a, tightened.L, result.b, result.c))


@given(
    a=st.floats(0.0, 100.0), b=unit, m=st.floats(0.0, 50.0),
    l11=small, l12=small, l2=small, L1=st.floats(0.0, 3.0), tau=st.integers(0, 5),
)
@settings(max_examples=300, deadline=None)
def test_combined_implies_split(a, b, m, l11, l12, l2, L1, tau):
    consts = LipschitzConstants(l11=l11, l12=l12, l2=l2, L=1.0, L1=L1)
    params = TriggerParams(sigma=0.0, a=a, b=b)
    if check_nontriviality(params, consts, m, tau, NontrivialityVariant.COMBINED):
        assert check_nontriviality(params, consts, m, tau, NontrivialityVariant.SPLIT)


@given(
    a=st.floats(0.1, 100.0), c=st.floats(0.05, 0.95), frac=st.floats(0.05, 0.95),
    m_tilde=st.floats(0.0, 20.0), l11=small, l12=small, l2=small, L=small, tau=st.integers(0, 4),
)
@settings(max_examples=300, deadline=None)
def test_decay_condition_times_a_is_nontriviality(a, c, frac, m_tilde, l11, l12, l2, L, tau):
    b = frac * c
    consts = LipschitzConstants(l11=l11, l12=l12, l2=l2, L=L, L1=1.0)
    m = compute_m_bar(a, L, b, c) + m_tilde
    scaled = a * decay_ratio(b, a, c, m_tilde, consts, tau)
    bound = nontriviality_bound(b, consts, m, tau, NontrivialityVariant.SPLIT)
    assert scaled == pytest.approx(bound, rel=1e-9, abs=1e-12)


def test_amplitude_ratio_decreases_with_a(ex1_consts):
    assert amplitude_ratio(32.0, 0.3, 1.4, ex1_consts) < amplitude_ratio(16.0, 0.3, 1.4, ex1_consts)


def test_tune_covers_final_amplitude_with_chi_lipschitz():
    # the first retune doubles a, so L has to be measured again
    chi = ClassKFunction(
        lambda r: 0.1 * r + 0.025 * r * r, name="steep", lipschitz=lambda a: 0.1 + 0.05 * a
    )
    cert = KrasovskiiCertificate(mu=0.5, eps=0.1, chi_lipschitz=0.1, chi=chi)
    consts = LipschitzConstants(l11=0.1, l12=0.05, l2=0.5, L=0.1, L1=1.0)
    phi = HistoryWindow.constant([1.0], tau=1)
    result = tune(cert.mu, consts, phi, cert, tau=1)
    assert result.nontrivial_certified
    assert result.a == pytest.approx(2.2)
    assert result.b == pytest.approx(0.03125)
    covering = chi.lipschitz_on(result.a)
    assert covering == pytest.approx(0.21)
    assert result.m_bar == pytest.approx(compute_m_bar(result.a, covering, result.b, result.c))


def test_tune_rejects_runaway_chi_lipschitz():
    chi = ClassKFunction(
        lambda r: 0.1 * math.expm1(r), name="runaway", lipschitz=lambda a: 0.1 * math.exp(a)
    )
    cert = KrasovskiiCertificate(mu=0.5, eps=0.1, chi_lipschitz=0.1, chi=chi)
    consts = LipschitzConstants(l11=0.1, l12=0.05, l2=0.5, L=0.1, L1=1.0)
    with pytest.raises(TunerInfeasibleError):
        tune(cert.mu, consts, HistoryWindow.constant([1.0], tau=1), cert, tau=1)
