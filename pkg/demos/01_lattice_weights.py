import numpy as np

from stsar import build_lattice, build_neighbors, lattice_weights, row_standardize

# A 4 x 4 lattice of unit cells, one site per cell.
sites = build_lattice(4, 1)
print(sites.n, "sites")
print(sites.coords[:5])

# Neighbours are sites within distance (0, 1]: rook contiguity at unit spacing.
nb = build_neighbors(sites, (0.0, 1.0))
counts = np.asarray(nb.adjacency[0].sum(axis=1)).ravel()
print(counts.reshape(4, 4))   # 2 at corners, 3 on edges, 4 inside

w = row_standardize(nb)
W = w.weights[0].toarray()
print("row sums", np.unique(W.sum(axis=1)))
print("h_n =", w.h_n)

# Infill: split every cell into r* x r* sub-cells but keep the threshold at 1
# in the original units. The neighbour count grows with r*.
for rs in (1, 2, 4):
    print("r* =", rs, " n =", lattice_weights(4, rs).n, " h_n =", lattice_weights(4, rs).h_n)

# Increasing domain: a bigger lattice at the same resolution leaves h_n alone.
for r in (4, 8):
    print("r =", r, " h_n =", lattice_weights(r, 2).h_n)

# A second order: sites in (1, 1.5], i.e. the diagonal neighbours.
w2 = lattice_weights(4, 1, (0.0, 1.0, 1.5))
print("orders:", w2.q, " nonzeros per order:", [wk.nnz for wk in w2.weights])
