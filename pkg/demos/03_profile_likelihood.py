import numpy as np

from stsar import SimConfig, gen_dataset, profile_loglik, profile_score
from stsar.model import xi_in_box

cfg = SimConfig(4, 2, 4, seed=3)
data = gen_dataset(cfg)
w = cfg.weights()

# beta and sigma2 have closed forms given xi = (theta, alpha), so the
# likelihood only has to be searched over two coordinates.
ev = profile_loglik(data, w, [0.5, 0.1], score=True)
print("loglik", ev.loglik)
print("beta_hat", ev.beta_hat, " sigma2_hat", ev.sigma2_hat)
print("log|S_nm|", ev.logdet, "score", ev.score)

# Coarse scan over the feasible box
grid = np.linspace(-0.9, 0.9, 19)
surface = np.full((grid.size, grid.size), np.nan)
for i, t in enumerate(grid):
    for j, a in enumerate(grid):
        if xi_in_box([t], a):
            surface[i, j] = profile_loglik(data, w, [t, a]).loglik
i, j = np.unravel_index(np.nanargmax(surface), surface.shape)
print("grid maximum at theta =", grid[i], " alpha =", grid[j])

# The analytic score against a central difference
xi = np.array([grid[i], grid[j]])
h = 1e-6
fd = [(profile_loglik(data, w, xi + h * e).loglik - profile_loglik(data, w, xi - h * e).loglik) / (2 * h)
      for e in np.eye(2)]
print("score", profile_score(data, w, xi), " finite difference", np.array(fd))
