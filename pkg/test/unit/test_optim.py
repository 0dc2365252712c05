"""
Unit tests for the Adam optimizer and the parameter store.
"""

import numpy as np
import pytest

from src.errors import ContractError
from src.numerics import Adam, Parameter, ParameterStore, adam_step


@pytest.mark.unit
class TestAdam:
    """Test cases for Adam updates."""

    def test_zero_gradient_leaves_values(self):
        """Zero gradients do not move parameters; the step counter still advances."""
        p = Parameter("p", np.array([1.0, -2.0]))
        opt = Adam([p])
        opt.step()
        assert p.data.tolist() == [1.0, -2.0]
        assert opt.t == 1

    def test_first_step_is_minus_lr(self):
        """With g=1 and lr=0.1 the first step is about -0.1."""
        p = Parameter("p", np.array([0.0]))
        p.grad[:] = 1.0
        adam_step([p], lr=0.1, t=1)
        assert p.data[0] == pytest.approx(-0.1, abs=1e-7)

    def test_gradients_zeroed_after_step(self):
        """adam_step clears the gradients it consumed."""
        p = Parameter("p", np.array([0.0, 0.0]))
        p.grad[:] = [1.0, -1.0]
        adam_step([p])
        assert p.grad.tolist() == [0.0, 0.0]

    def test_constant_gradient_step_tends_to_lr(self):
        """A constant gradient gives steps of magnitude lr in the long run."""
        p = Parameter("p", np.array([5.0]))
        opt = Adam([p], lr=0.01)
        previous = p.data[0]
        for _ in range(1000):
            p.grad[:] = -3.0
            opt.step()
            step = p.data[0] - previous
            previous = p.data[0]
        assert step == pytest.approx(0.01, rel=1e-6)

    def test_step_counter_must_start_at_one(self):
        """t < 1 is a contract violation."""
        with pytest.raises(ContractError):
            adam_step([Parameter("p", np.zeros(1))], t=0)


@pytest.mark.unit
class TestParameterStore:
    """Test cases for ParameterStore."""

    def test_scoped_names(self):
        """Nested scopes produce dotted names sharing one registry."""
        store = ParameterStore(0)
        store.scope("stack").scope(0).zeros("W_q", (2, 2))
        assert "stack.0.W_q" in store
        assert [p.name for p in store.parameters()] == ["stack.0.W_q"]

    def test_duplicate_name_rejected(self):
        """Registering the same name twice is a contract error."""
        store = ParameterStore(0)
        store.ones("gamma", (3,))
        with pytest.raises(ContractError):
            store.ones("gamma", (3,))

    def test_seeded_initialisation_is_reproducible(self):
        """The same seed gives identical values."""
        a = ParameterStore(5).uniform("W", (3, 3), 0.5)
        b = ParameterStore(5).uniform("W", (3, 3), 0.5)
        assert np.array_equal(a.data, b.data)

    def test_scope_view_filters_and_counts(self):
        """A scope lists only its own parameters; numel sums sizes."""
        store = ParameterStore(0)
        store.scope("a").zeros("x", (2, 3))
        store.scope("b").zeros("y", (4,))
        assert store.numel() == 10
        assert len(store.scope("a")) == 1
        assert list(store.scope("b").named_parameters()) == ["b.y"]

    def test_zero_grad(self):
        """zero_grad clears every registered gradient."""
        store = ParameterStore(0)
        p = store.ones("w", (2,))
        p.grad[:] = 3.0
        store.zero_grad()
        assert p.grad.tolist() == [0.0, 0.0]
