"""Heintze-Karcher-Ros margins along the cap axis.

Orthogonal caps (theta = pi/2) sit on the equality case; other contact
angles and bumpy perturbations leave a strictly positive margin. A cap with
negative mean curvature is refused.
"""
import numpy as np

from capillary.hkr import hkr_check
from capillary.spaceform import SpaceForm
from capillary.surfaces import SurfaceSpec, make_surface


def show(name, spec):
    patch = make_surface(spec)
    rep = hkr_check(patch, patch.info["axis"], level=2)
    if rep.refusal:
        print(f"{name:34s} refused: {rep.refusal}")
    else:
        print(f"{name:34s} lhs={rep.lhs:.8f} rhs={rep.rhs:.8f} margin={rep.relative_margin:.2e}")


def main():
    for K in (-1, 0, 1):
        rho = 0.6 * SpaceForm(K, 1.0, 2).r_model
        for theta, tag in ((np.pi / 2, "pi/2"), (np.pi / 3, "pi/3")):
            show(f"cap K={K:+d} theta={tag}", SurfaceSpec("spherical_cap", K=K, params={
                "theta": theta, "rho": rho}))
    for amp in (0.02, 0.05):
        show(f"perturbed cap amplitude {amp}", SurfaceSpec("perturbed_cap", params={
            "theta": np.pi / 2, "rho": 0.8, "amplitude": amp, "mode": 2}))
    show("unduloid neck 0.4", SurfaceSpec("unduloid_piece", params={"neck": 0.4}))


if __name__ == "__main__":
    main()
