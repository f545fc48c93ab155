"""Vision-aided V2V mmWave beam tracking on synthetic data."""

__version__ = "0.1.0"
