"""Rate-coded spiking dual-memory reinforcement learner."""

__version__ = "0.1.0"
