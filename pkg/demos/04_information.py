import numpy as np

from stsar import PAPER_TRUTH, SimConfig, expected_information, gen_dataset, info_blocks
from stsar.model import StOperator

# Expected information at the truth, parameter order (beta, theta, alpha, sigma2).
cfg = SimConfig(4, 1, 5)
data = gen_dataset(cfg)
w = cfg.weights()
info = expected_information(PAPER_TRUTH, data, w)
np.set_printoptions(precision=3, suppress=True)
print(info)

# The default leaves the (theta, alpha) entry at zero. The exact Gaussian
# information has tr(G' H) there, which is not zero once alpha != 0.
full = expected_information(PAPER_TRUTH, data, w, cross=True)
print("theta-alpha entry:", full[2, 3])
print("se default:", np.sqrt(np.diag(np.linalg.inv(info))))
print("se exact:  ", np.sqrt(np.diag(np.linalg.inv(full))))

b = info_blocks(StOperator(w, PAPER_TRUTH.theta, PAPER_TRUTH.alpha), w, cfg.m)
print("tr(H) =", b.tr_H, " tr(H^2) =", b.tr_H2, " tr(H'H) =", b.tr_HtH)

# At theta + alpha = 1 the intercept direction carries a unit root: after
# whitening, only the first time block informs beta0, so its asymptotic sd
# does not shrink with m.
for m in (2, 5, 10, 20):
    c = SimConfig(4, 1, m)
    I = expected_information(PAPER_TRUTH, gen_dataset(c), w)
    print("m =", m, " sd(beta0) =", np.sqrt(np.linalg.inv(I)[0, 0]).round(4),
          " sd(theta) =", np.sqrt(np.linalg.inv(I)[2, 2]).round(4))
