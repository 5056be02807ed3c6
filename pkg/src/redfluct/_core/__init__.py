"""Hot kernels. The compiled extension is used when importable."""
from . import _fallback

try:
    from ._xyz import apply_xyz
    KERNEL = "cython"
except ImportError:  # pragma: no cover - depends on the build
    from ._fallback import apply_xyz
    KERNEL = "python"

apply_xyz_python = _fallback.apply_xyz

__all__ = ["apply_xyz", "apply_xyz_python", "KERNEL"]
