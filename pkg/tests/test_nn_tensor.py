import numpy as np
import pytest

from ticktrader import nn
from ticktrader.errors import DataError, InputError
from ticktrader.nn.tensor import ParameterSet, Tensor


def test_tensor_shape_and_grad_slot():
    t = Tensor(np.arange(6.0).reshape(2, 3))
    assert t.shape == (2, 3)
    assert t.grad is None
    t.zero_grad()
    assert t.grad.shape == (2, 3)
    with pytest.raises(Exception):
        t.set_grad(np.zeros(5))


def test_parameter_set_unique_names_and_count():
    p = ParameterSet()
    p.add("a", Tensor(np.zeros((2, 3))))
    p.add("b", Tensor(np.zeros(4), trainable=False))
    p.add("c", Tensor(np.zeros(5)))
    with pytest.raises(InputError):
        p.add("a", Tensor(np.zeros(1)))
    assert p.total_count() == 6 + 5  # frozen tensor excluded


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(42)
    p = ParameterSet()
    p.add("conv.w", Tensor(rng.normal(size=(4, 3, 5))))
    p.add("conv.b", Tensor(rng.normal(size=4), regularized=False))
    p.add("head.w", Tensor(rng.normal(size=(3, 17))))
    path = tmp_path / "model.ptnn"
    nn.save_params(path, p)
    q = nn.load_params(path)
    assert q.names() == p.names()
    for name in p.names():
        assert q[name].values.tobytes() == p[name].values.tobytes()
        assert q[name].values.shape == p[name].values.shape
    # saving the loaded set must reproduce the file byte for byte
    path2 = tmp_path / "model2.ptnn"
    nn.save_params(path2, q)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.ptnn"
    bad.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DataError):
        nn.load_params(bad)


def test_checkpoint_magic_and_layout(tmp_path):
    p = ParameterSet()
    p.add("w", Tensor(np.array([1.5])))
    path = tmp_path / "t.ptnn"
    nn.save_params(path, p)
    blob = path.read_bytes()
    assert blob[:4] == b"PTNN"
    assert int.from_bytes(blob[4:8], "little") == 1   # version
    assert int.from_bytes(blob[8:12], "little") == 1  # tensor count
