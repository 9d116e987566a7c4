"""The block-diagonal conditions in spin-coefficient language."""

import random

from edslab import blockdiag as bd

rng = random.Random(0)
tau = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
np_ = bd.NPScalars(rho=0.3, rho_p=-0.7, tau=tau, tau_p=tau.conjugate(),
                   kappa=0.2 + 0.1j, kappa_p=-0.4j, sigma=0.5 - 0.2j, sigma_p=0.1 + 0.3j, Psi2=0.25 + 0.04j)
rec = bd.np_constraint(np_)
print("reality conditions:", rec.reality)
print("constraint Im(Psi2 + kappa kappa' - sigma sigma'):", rec.constraint)
print("Im K, Im K*, Im Psi2:", rec.im_K, rec.im_K_star, np_.Psi2.imag)

boosted = bd.np_constraint(np_.rescaled(0.6 + 0.8j))
print("after a spin/boost the constraint is unchanged:", boosted.constraint)
