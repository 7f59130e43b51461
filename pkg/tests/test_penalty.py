import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegsev.errors import ConfigError
from eegsev.penalty import (MINORITY_DEFAULTS, PenaltyConfig, penalty_triggered,
                            penalty_value)

SQRT2 = math.sqrt(2.0)
MINORITY = PenaltyConfig(minority_classes=frozenset({1, 2}))


class TestTrigger:
    def test_misclassified_minority_triggers(self):
        assert penalty_triggered(1, 0, MINORITY)

    def test_correct_minority_does_not(self):
        assert not penalty_triggered(1, 1, MINORITY)

    def test_majority_exempt(self):
        assert not penalty_triggered(0, 1, MINORITY)
        assert not penalty_triggered(0, 2, MINORITY)

    def test_empty_set_is_inert(self):
        cfg = PenaltyConfig()
        assert not any(
            penalty_triggered(t, p, cfg) for t in range(5) for p in range(5))


class TestPenaltyValue:
    def test_zero(self):
        assert penalty_value(0.0, MINORITY) == 0.0

    def test_boundary(self):
        assert penalty_value(MINORITY.max_norm, MINORITY) == 1.0

    def test_midpoint(self):
        val = penalty_value(0.4 * SQRT2, PenaltyConfig(max_norm=0.8 * SQRT2))
        assert val == pytest.approx(0.5, abs=1e-12)

    def test_unclamped_exceeds_one(self):
        cfg = PenaltyConfig(max_norm=0.8 * SQRT2, clamp=False)
        assert penalty_value(SQRT2, cfg) == pytest.approx(1.25, abs=1e-9)

    def test_clamped_capped_at_one(self):
        cfg = PenaltyConfig(max_norm=0.8 * SQRT2, clamp=True)
        assert penalty_value(SQRT2, cfg) == 1.0

    @given(st.floats(0, 1.1), st.floats(0.001, 0.02))
    @settings(max_examples=100, deadline=None)
    def test_strictly_monotone_below_clamp(self, nel2, delta):
        cfg = PenaltyConfig(max_norm=1.2)
        a = penalty_value(nel2, cfg)
        b = penalty_value(nel2 + delta, cfg)
        if nel2 + delta < cfg.max_norm:
            assert b > a
        else:
            assert b >= a

    def test_defaults_per_scale(self):
        assert MINORITY_DEFAULTS["PHQ9"] == frozenset({1, 2})
        assert MINORITY_DEFAULTS["BDI"] == frozenset({1, 2, 3})

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            PenaltyConfig(max_norm=0.0)
