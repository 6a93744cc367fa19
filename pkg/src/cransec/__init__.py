"""Secure hybrid beamforming for a fronthaul-limited C-RAN cluster.

Modules: ``model`` (configuration and channels), ``analogbf`` (quantized
analog stage), ``rates`` (rate evaluation), ``conic`` (SDP plumbing),
``srm`` (CCCP secrecy-rate maximization), ``rankrec`` (rank-one recovery)
and ``harness`` (experiments, acceptance suite, CLI).
"""
__version__ = "0.1.0"
