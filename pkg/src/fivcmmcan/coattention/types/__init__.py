__all__ = ["Center", "CoAttentionNetwork"]

from .base import Center, CoAttentionNetwork
