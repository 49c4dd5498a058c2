"""Valley-Hall bent-interface toolkit: bulk spectra, interface bands, out-going
Green functions, and boundary-integral bent-mode solves on triangular-lattice media."""

from .lattice import LatticeGeometry, MediumSpec, build_geometry, build_medium, fourier_coefficients

__all__ = [
    "LatticeGeometry",
    "MediumSpec",
    "build_geometry",
    "build_medium",
    "fourier_coefficients",
]
