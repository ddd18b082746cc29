import numpy as np
import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(1234)


def randn64(*shape) -> torch.Tensor:
    return torch.randn(*shape, dtype=torch.float64)
