"""Weak-coherent-pulse QKD: closed-form security analysis and event-level simulation."""

from .analytics import ProtocolKind
from .qmath import PhotonDistribution, SourceKind, overlap_angle

__version__ = "0.1.0"

__all__ = ["PhotonDistribution", "ProtocolKind", "SourceKind", "overlap_angle"]
