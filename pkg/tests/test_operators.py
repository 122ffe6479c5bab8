from unittest import mock

import numpy as np
import pytest

from qutrit_lg import config
from qutrit_lg.operators import (
    ContractViolation,
    DensityOperator,
    KrausChannel,
    UnitaryOperator,
    apply_channel,
    diagonal_populations,
    partial_trace,
    purity,
    tensor_all,
    tensor_product,
    trace_distance,
)

from .support import random_density, random_unitary

INVALID_DENSITY_CASES = [
    pytest.param([[1, 1], [0, 0]], "not Hermitian", id="non-hermitian"),
    pytest.param([[0.7, 0], [0, 0.7]], "does not match norm", id="trace"),
    pytest.param([[1.5, 0], [0, -0.5]], "eigenvalue", id="negative"),
    pytest.param([[1, 0, 0]], "square", id="shape"),
]


@pytest.mark.parametrize(("matrix", "message"), INVALID_DENSITY_CASES)
def test_density_operator_rejects(matrix: list[list[float]], message: str):
    with pytest.raises(ContractViolation, match=message):
        DensityOperator(np.array(matrix))


def test_density_operator_is_read_only():
    rho = DensityOperator.basis(3, 1)
    assert not rho.matrix.flags.writeable
    with pytest.raises(ValueError, match="read-only"):
        rho.matrix[0, 0] = 1


def test_sub_normalized_state_carries_norm():
    rho = DensityOperator.from_matrix(np.diag([0.25, 0.0, 0.0]))
    assert rho.norm == pytest.approx(0.25)
    assert rho.normalized().norm == 1
    assert rho.normalized().matrix[0, 0] == pytest.approx(1)

    with pytest.raises(ContractViolation, match="zero trace"):
        DensityOperator.from_matrix(np.zeros((3, 3))).normalized()


def test_constructors():
    assert DensityOperator.pure([1, 1j]).matrix == pytest.approx(np.array([[0.5, -0.5j], [0.5j, 0.5]]))
    assert DensityOperator.maximally_mixed(4).matrix == pytest.approx(np.eye(4) / 4)
    assert purity(DensityOperator.maximally_mixed(4)) == pytest.approx(0.25)
    assert purity(DensityOperator.basis(3, 2)) == pytest.approx(1)

    with pytest.raises(ContractViolation, match="basis index"):
        DensityOperator.basis(3, 3)


def test_mixtures_add_norms():
    mixed = DensityOperator.basis(2, 0).scaled(0.3) + DensityOperator.basis(2, 1).scaled(0.7)
    assert mixed.norm == pytest.approx(1)
    assert np.diag(mixed.matrix).real == pytest.approx([0.3, 0.7])


def test_unitary_validation():
    with pytest.raises(ContractViolation, match="not unitary"):
        UnitaryOperator(np.array([[1, 0], [0, 1.01]]))

    with mock.patch.object(config, "STRUCTURAL_TOL", 0.1):
        UnitaryOperator(np.array([[1, 0], [0, 1.01]]))


def test_conjugation_keeps_norm(rng: np.random.Generator):
    rho = random_density(rng, 3).scaled(0.4)
    u = random_unitary(rng, 3)
    out = u.conjugate(rho)
    assert out.norm == pytest.approx(0.4)
    assert np.linalg.eigvalsh(out.matrix) == pytest.approx(np.linalg.eigvalsh(rho.matrix), abs=1e-12)
    assert apply_channel(rho, u.as_channel()).matrix == pytest.approx(out.matrix, abs=1e-12)


def test_kraus_channel_validation():
    half = np.sqrt(0.5) * np.eye(2)
    with pytest.raises(ContractViolation, match="not trace preserving"):
        KrausChannel((half,))
    with pytest.raises(ContractViolation, match="K\\^dagger K <= 1"):
        KrausChannel((2 * np.eye(2),), complete=False)
    with pytest.raises(ContractViolation, match="share one shape"):
        KrausChannel((np.eye(2), np.eye(3)), complete=False)

    channel = KrausChannel.from_subchannels(
        [KrausChannel((half,), complete=False), KrausChannel((half,), complete=False)], complete=True
    )
    assert channel.completeness_error() <= 1e-15


def test_compose_applies_left_first(rng: np.random.Generator):
    rho = random_density(rng, 3)
    first, second = random_unitary(rng, 3), random_unitary(rng, 3)
    composed = first.as_channel().compose(second.as_channel())
    expected = second.conjugate(first.conjugate(rho))
    assert apply_channel(rho, composed).matrix == pytest.approx(expected.matrix, abs=1e-12)
    assert KrausChannel.identity(3).compose(first.as_channel()).operators[0] == pytest.approx(first.matrix)


def test_tensor_product_and_partial_trace(rng: np.random.Generator):
    a, b, c = random_density(rng, 2), random_density(rng, 3), random_density(rng, 2)
    joint = tensor_all([a, b, c])
    assert joint.dim == 12

    assert partial_trace(joint, 0, (2, 3, 2)).matrix == pytest.approx(a.matrix, abs=1e-12)
    assert partial_trace(joint, 1, (2, 3, 2)).matrix == pytest.approx(b.matrix, abs=1e-12)
    assert partial_trace(joint, [0, 2], (2, 3, 2)).matrix == pytest.approx(
        tensor_product(a, c).matrix, abs=1e-12
    )

    with pytest.raises(ContractViolation, match="do not multiply"):
        partial_trace(joint, 0, (2, 2))
    with pytest.raises(ContractViolation, match="cannot tensor"):
        tensor_product(a, UnitaryOperator.identity(2))


def test_sub_channel_reports_retained_probability():
    projector = np.diag([1, 0, 0]).astype(complex)
    rho = DensityOperator.maximally_mixed(3)
    out = apply_channel(rho, KrausChannel((projector,), complete=False))
    assert out.norm == pytest.approx(1 / 3)


def test_trace_distance(rng: np.random.Generator):
    assert trace_distance(DensityOperator.basis(2, 0), DensityOperator.basis(2, 1)) == pytest.approx(1)
    rho = random_density(rng, 4)
    assert trace_distance(rho, rho) == pytest.approx(0, abs=1e-12)


def test_diagonal_populations_clip_round_off():
    rho = DensityOperator.from_matrix(np.diag([1 + 1e-13, -1e-13, 0]))
    assert diagonal_populations(rho).tolist() == [1.0, 0.0, 0.0]
    assert diagonal_populations(DensityOperator.basis(3, 2).scaled(0.5)) == pytest.approx([0, 0, 0.5])
