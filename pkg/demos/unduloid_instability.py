"""Weak stability of free-boundary pieces between two parallel planes.

Unduloid pieces meet both planes orthogonally and carry a negative
constrained eigenvalue; flat disks and caps do not. The mesh refinement
shows how lambda_1 settles.
"""
from capillary.stability import spectrum_study
from capillary.surfaces import SurfaceSpec, make_surface

CASES = [
    ("unduloid neck 0.2", SurfaceSpec("unduloid_piece", params={"neck": 0.2})),
    ("unduloid neck 0.6", SurfaceSpec("unduloid_piece", params={"neck": 0.6})),
    ("geodesic disk", SurfaceSpec("geodesic_disk")),
    ("cap theta=pi/2 rho=1", SurfaceSpec("spherical_cap", params={"theta": 1.5707963267948966,
                                                                "rho": 1.0})),
]


def main():
    for name, spec in CASES:
        rep = spectrum_study(make_surface(spec), levels=(1, 2), k=3)
        lam = ", ".join(f"{ev[0]:.4f}" for ev in rep.level_eigenvalues)
        print(f"{name:24s} lambda_1 by level: {lam:30s} -> {rep.classification}")


if __name__ == "__main__":
    main()
