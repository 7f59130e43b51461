"""EEG depression-severity classification with confidence-weighted training."""

__version__ = "0.1.0"
