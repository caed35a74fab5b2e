import numpy as np
import pytest
from hypothesis import given, strategies as st

from mureassign.energy import FEMTO, PICO, EnergyParams, enb_power, network_power, savings_report
from mureassign.network import NetworkState


def test_reference_powers():
    assert abs(enb_power(FEMTO, True) - 10.0) < 1e-12
    assert abs(enb_power(FEMTO, False) - 5.8) < 1e-12
    assert abs(enb_power(PICO, True) - 15.68) < 1e-12
    assert FEMTO.active_full_load == pytest.approx(10.0)
    assert PICO.idle == pytest.approx(8.6)


def test_load_output_bounds():
    assert enb_power(FEMTO, True, 0.0) == pytest.approx(9.6)
    with pytest.raises(ValueError):
        enb_power(FEMTO, True, 1.0)


def test_network_power_examples():
    assert network_power(np.ones(8, bool), FEMTO)[0] == pytest.approx(80.0)
    assert network_power(np.zeros(8, bool), FEMTO)[0] == pytest.approx(46.4)
    assert network_power(np.zeros(0, bool), FEMTO)[0] == 0.0
    state = NetworkState([0, 1], [True, True, False])
    total, per = network_power(state, FEMTO)
    assert per == pytest.approx([10.0, 10.0, 5.8])
    assert total == pytest.approx(25.8)


def test_savings_examples():
    assert savings_report(80, 80) == 0.0
    assert savings_report(80, 46.4) == pytest.approx(0.42)
    assert savings_report(80, 75.8) == pytest.approx(0.0525)
    with pytest.raises(ValueError):
        savings_report(0, 0)


def test_params_validation():
    with pytest.raises(ValueError):
        EnergyParams(-1, 1, 1, 0)
    with pytest.raises(ValueError):
        EnergyParams(1.0, 1.0, 0.1, 2.0)


@given(st.lists(st.booleans(), max_size=30), st.sampled_from([FEMTO, PICO]))
def test_power_additive_and_deactivation_never_adds(flags, params):
    flags = np.array(flags, dtype=bool)
    total, per = network_power(flags, params)
    assert total == pytest.approx(sum(per))
    perm = np.random.default_rng(len(flags)).permutation(len(flags))
    assert network_power(flags[perm], params)[0] == pytest.approx(total)
    fewer = flags.copy()
    fewer[: len(fewer) // 2] = False
    assert network_power(fewer, params)[0] <= total + 1e-12
