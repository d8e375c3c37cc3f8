import math

import numpy as np
import pytest

from phonongate.analytic import infidelity_dephasing, infidelity_thermal
from phonongate.errors import ConfigError, LayoutError, ParameterError
from phonongate.gate import (
    FULL_LAYOUT_BUDGET,
    LOGICAL_LABELS,
    GateConfig,
    LogicalQubit,
    block_hamiltonian,
    conditional_phase,
    entangled_target,
    full_hamiltonian,
    ideal_gate,
    logical_basis,
    prepare_initial,
    product_superposition,
    run_gate,
    selectivity_scan,
    truth_table,
    unprotected_gate_oracle,
)
from phonongate.model import SystemParams

PLUS, MINUS, AUX = 0, 1, 2


def ket(*levels):
    v = np.zeros(3 ** len(levels), dtype=complex)
    v[int(np.ravel_multi_index(levels, (3,) * len(levels)))] = 1.0
    return v


@pytest.fixture(scope="module")
def config_nbar2():
    return GateConfig.standard(1 / 40, 2.0)


# -- encoding and preparation -----------------------------------------------------------


def test_logical_qubit_states():
    q = LogicalQubit((1, 2))
    assert np.allclose(q.zero, ket(MINUS, PLUS))
    assert np.allclose(q.A, ket(AUX, AUX))


@pytest.mark.parametrize("pair", [(1, 1), (0, 2)])
def test_logical_qubit_rejects_bad_pair(pair):
    with pytest.raises(LayoutError):
        LogicalQubit(pair)


@pytest.mark.parametrize("pairs", [((1, 2), (2, 3)), ((1, 2), (3, 5))])
def test_logical_pairs_must_tile_the_register(pairs):
    with pytest.raises(LayoutError):
        logical_basis(tuple(LogicalQubit(p) for p in pairs))


def test_logical_basis_orthonormal():
    b = logical_basis()
    M = np.array([[b[i].conj() @ b[j] for j in LOGICAL_LABELS] for i in LOGICAL_LABELS])
    assert np.allclose(M, np.eye(4))
    assert np.allclose(b["00"], ket(MINUS, PLUS, MINUS, PLUS))


def test_prepare_initial_target():
    psi = prepare_initial()
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-15)
    q = LogicalQubit((1, 2))
    assert q.zero.conj() @ psi == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert np.allclose(psi, (q.zero + q.A) / math.sqrt(2), atol=1e-15)


def test_prepare_initial_intermediate_steps():
    _, steps = prepare_initial(return_steps=True)
    assert np.allclose(steps["i"], ket(MINUS, PLUS))
    e = (ket(PLUS) + ket(MINUS)) / math.sqrt(2)
    g = (ket(PLUS) - ket(MINUS)) / math.sqrt(2)
    bell = (np.kron(e, e) - np.kron(g, g)) / math.sqrt(2)
    assert np.allclose(steps["ii"], bell, atol=1e-15)
    assert np.allclose(steps["iii_rotation"], (np.kron(e, e) + ket(AUX, AUX)) / math.sqrt(2), atol=1e-15)


def test_entangled_target_is_maximally_entangled():
    psi = entangled_target().reshape(9, 9)
    # Schmidt coefficients across the two logical qubits
    s = np.linalg.svd(psi, compute_uv=False)
    assert np.allclose(s[:2], [1 / math.sqrt(2)] * 2)
    assert np.allclose(s[2:], 0)


# -- configuration ----------------------------------------------------------------------


def test_standard_schedule():
    cfg = GateConfig.standard(1 / 40, 2.0)
    p = cfg.params
    assert p.DeltaBar[1] == p.DeltaBar[2] == 0
    assert p.DeltaBar[0] == pytest.approx(802 * p.gbar)
    assert cfg.metadata["suppression_ratio"] >= 20
    assert cfg.tau == pytest.approx(2 * math.pi / p.gbar)


def test_standard_rejects_odd_shift():
    with pytest.raises(ConfigError):
        GateConfig.standard(1 / 40, shift=41)


def test_config_rejects_small_detuning():
    with pytest.raises(ConfigError, match="suppression"):
        GateConfig.standard(1 / 40, shift=10)


def test_config_rejects_unequal_middle_shifts():
    base = SystemParams.symmetric_case(1 / 40, n_spins=4)
    g = base.gbar
    with pytest.raises(ConfigError):
        GateConfig(base.replace(DeltaBar=(100 * g, 0.0, 50 * g, -100 * g)))


def test_config_needs_four_spins():
    with pytest.raises(ConfigError):
        GateConfig(SystemParams.symmetric_case(1 / 40, n_spins=2))


def test_block_hamiltonian_matches_full_layout():
    p = GateConfig.standard(1 / 20, 1.0).params
    N = 3
    full = full_hamiltonian(p, N).matrix.reshape(81, N, 81, N)
    for n in range(N):
        assert np.allclose(full[:, n, :, n], block_hamiltonian(p, n).matrix, atol=1e-15)
    assert np.allclose(full[:, 0, :, 1], 0)


def test_aux_level_decoupled():
    H = block_hamiltonian(GateConfig.standard(1 / 40).params, 3).matrix
    v = logical_basis()["AA"]
    assert np.allclose(H @ v, 0)


# -- noiseless gate ----------------------------------------------------------------------


def test_truth_table_vacuum_is_diagonal():
    tt = truth_table(GateConfig.standard(1 / 40, 0.0))
    A = tt["amplitudes"]
    assert np.max(np.abs(A - np.diag(np.diag(A)))) < 1e-3
    assert np.allclose(np.sign(np.real(np.diag(A))), [ideal_gate()[k] for k in LOGICAL_LABELS])
    assert abs(abs(conditional_phase(A)) - math.pi) < 0.02


def test_truth_table_thermal(config_nbar2):
    tt = truth_table(config_nbar2)
    floor = 1 - infidelity_thermal(2.0, 1 / 40) - 0.005
    for lab in LOGICAL_LABELS:
        assert tt["fidelity"][lab] >= floor


def test_00_line_within_thermal_budget(config_nbar2):
    res = run_gate(config_nbar2, logical_basis()["00"])
    assert res.fidelity >= 1 - infidelity_thermal(2.0, 1 / 40) - 0.002
    assert np.allclose(res.target, -logical_basis()["00"])


def test_AA_unchanged(config_nbar2):
    res = run_gate(config_nbar2, logical_basis()["AA"])
    assert abs(res.fidelity - 1) < 1e-12


def test_entangling_overlap(config_nbar2):
    res = run_gate(config_nbar2, product_superposition(), target=entangled_target())
    assert res.fidelity >= 0.98


def test_default_target_of_superposition_is_entangled_state(config_nbar2):
    res = run_gate(config_nbar2, product_superposition())
    assert np.allclose(res.target, entangled_target())


def test_fidelity_decreases_with_temperature():
    fids = [run_gate(GateConfig.standard(1 / 40, nb), logical_basis()["00"]).fidelity for nb in (0, 1, 2, 5, 10)]
    assert all(a > b for a, b in zip(fids, fids[1:]))


@pytest.mark.parametrize("nbar", [1.0, 2.0, 5.0])
def test_infidelity_within_factor_two_of_budget(nbar):
    res = run_gate(GateConfig.standard(1 / 40, nbar), logical_basis()["00"])
    ratio = (1 - res.fidelity) / infidelity_thermal(nbar, 1 / 40)
    assert 0.5 <= ratio <= 2.0


def test_undriven_pairs_do_not_interact():
    # spins 3, 4 have no oscillator coupling: their logical state survives whatever pair (1, 2) does
    a = 1 / 40
    p = SystemParams(g=(a, a, 0.0, 0.0), delta=(1.0,) * 4, nbar=2.0)
    tau = 2 * math.pi / (2 * (a**2 - 2 * a**4))
    q2 = LogicalQubit((3, 4))
    for n in (0, 3):
        vals, vecs = np.linalg.eigh(block_hamiltonian(p, n).matrix)
        U = vecs @ np.diag(np.exp(-1j * vals * tau / 3)) @ vecs.conj().T
        for lab in ("00", "0A"):
            out = (U @ logical_basis()[lab]).reshape(9, 9)
            phi = q2.zero if lab[1] == "0" else q2.A
            red = out.T @ out.conj()
            assert np.allclose(red, np.outer(phi, phi.conj()), atol=1e-10)
    idle = SystemParams(g=(0.0,) * 4, delta=(1.0,) * 4)
    assert np.allclose(block_hamiltonian(idle, 2).matrix, 0, atol=1e-15)


def test_run_gate_input_validation(config_nbar2):
    with pytest.raises(LayoutError):
        run_gate(config_nbar2, np.ones(9))
    with pytest.raises(ParameterError):
        run_gate(config_nbar2, 2 * logical_basis()["00"])
    with pytest.raises(ConfigError):
        run_gate(config_nbar2, logical_basis()["00"], noise={"kappa": 1.0})


# -- noisy gate ----------------------------------------------------------------------------


def test_dephasing_costs_four_spins():
    # four spins dephase during the gate against two in the protected-pair budget
    cfg = GateConfig.standard(1 / 20, 0.0)
    res = run_gate(cfg, logical_basis()["00"], noise={"Gamma": 1e-5})
    assert res.metadata["trace"] == pytest.approx(1.0, abs=1e-10)
    ratio = (1 - res.fidelity) / infidelity_dephasing(1e-5, 1 / 20)
    assert 1.6 < ratio < 2.4


def test_mechanical_damping_full_layout():
    cfg = GateConfig.standard(1 / 20, 0.0)
    clean = run_gate(cfg, logical_basis()["00"]).fidelity
    res = run_gate(cfg, logical_basis()["00"], noise={"gamma": 1e-4})
    assert res.metadata["N"] * 81 <= FULL_LAYOUT_BUDGET
    assert np.trace(res.rho).real == pytest.approx(1.0, abs=1e-8)
    assert 0 < clean - res.fidelity < 1e-3


def test_mechanical_damping_budget_guard(config_nbar2):
    with pytest.raises(ConfigError, match="full layout"):
        run_gate(config_nbar2, logical_basis()["00"], noise={"gamma": 1e-4})


# -- selectivity and the unprotected encoding ------------------------------------------------


def test_selectivity():
    scan = selectivity_scan(1 / 40, 2.0, ratios=(1.0,))
    assert scan["max_transfer"][1.0] < 1e-3
    assert scan["resonant_vs_analytic"] < 1e-6


def test_common_shift_does_not_change_flopping():
    a = selectivity_scan(1 / 40, 2.0, ratios=())
    b = selectivity_scan(1 / 40, 2.0, ratios=(), common_shift=1.0)
    assert np.max(np.abs(a["resonant"]["F"] - b["resonant"]["F"])) < 1e-6


@pytest.mark.parametrize("nbar,expected", [(0.0, 0.0), (2.0, 0.4), (0.125, 0.1)])
def test_unprotected_oracle(nbar, expected):
    out = unprotected_gate_oracle(nbar)
    assert out["infidelity"] == pytest.approx(expected, abs=1e-10)
    assert out["difference"] < 1e-10


def test_unprotected_phases():
    beta = unprotected_gate_oracle(1.0)["beta"]
    assert beta[0] == pytest.approx(-1j)
    assert beta[1] == pytest.approx(1j)
