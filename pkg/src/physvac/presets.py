"""Named initial velocities and perturbation shapes.

Every preset is periodic in x1 and x2 and smooth up to the vacuum faces.
"""
import numpy as np

from .errors import ConfigurationError

__all__ = ["VELOCITY_PRESETS", "initial_velocity", "pulse_potential"]

VELOCITY_PRESETS = ("rest", "tangential-shear", "irrotational-pulse", "compression")


def _s2(z):
    return np.sin(np.pi * z) ** 2


def pulse_potential(grid):
    """Smooth bump ``sin^2(pi x1) sin^2(pi x2) sin^2(pi x3)`` centred in the slab."""
    return _s2(grid.x1) * _s2(grid.x2) * _s2(grid.x3)


def _pulse_gradient(grid):
    # d/dz sin^2(pi z) = pi sin(2 pi z); scaled by 1/pi so the peak is O(1)
    x1, x2, x3 = grid.x1, grid.x2, grid.x3
    return np.stack(np.broadcast_arrays(
        np.sin(2 * np.pi * x1) * _s2(x2) * _s2(x3),
        _s2(x1) * np.sin(2 * np.pi * x2) * _s2(x3),
        _s2(x1) * _s2(x2) * np.sin(2 * np.pi * x3),
    )).astype(float)


def initial_velocity(name, amplitude, grid):
    """Velocity field ``(3, n1, n2, n3)`` for a named preset.

    * ``rest``: zero.
    * ``tangential-shear``: ``amplitude * sin(2 pi x1)`` in the x2 component.
    * ``irrotational-pulse``: ``amplitude`` times the gradient of a smooth bump.
    * ``compression``: ``-amplitude * (x3 - 1/2)`` in the normal component;
      the tangential part of ``-(x - centre)`` is dropped because it is not
      periodic.
    """
    v = grid.zeros(3)
    if name == "rest":
        return v
    if name == "tangential-shear":
        v[1] = amplitude * np.sin(2 * np.pi * grid.x1)
        return v
    if name == "irrotational-pulse":
        return amplitude * _pulse_gradient(grid)
    if name == "compression":
        v[2] = -amplitude * (grid.x3 - 0.5)
        return v
    raise ConfigurationError("velocity", f"unknown preset {name!r}; choose from {VELOCITY_PRESETS}")
