"""Stability-aware downlink scheduling for edge-controlled AGVs.

Subpackages by layer: ``numerics`` (special functions, quadrature),
``channel`` (path loss, correlated Rayleigh fading), ``control`` (unicycle
plant and tracking controller), ``link_adaptation`` (MCS/BLER tables),
``stability`` (back-to-back error and instability probabilities),
``scheduler`` (per-tick allocation policies), ``simulator`` (run engine)
and ``cli`` (sweeps).
"""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
