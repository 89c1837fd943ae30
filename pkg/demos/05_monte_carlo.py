import time

from stsar.harness import McConfig, format_pretty, run_mc

# A reduced version of the infill / time study: r = 4, r* in {1, 2}, m in {2, 5}.
grid = [(4, rs, m) for rs in (1, 2) for m in (2, 5)]
cfg = McConfig(grid=grid, reps=30, base_seed=11)

t0 = time.perf_counter()
summary = run_mc(cfg, threads=4)
print(f"{len(summary.replicates)} fits in {time.perf_counter() - t0:.1f} s")

print(format_pretty(summary))

# Coverage of nominal 95% intervals, per cell
for cell in grid:
    rows = summary.cell_rows(cell)
    print(cell, {k: round(v["coverage95"], 2) for k, v in rows.items()})

# Same base seed, different worker count: identical numbers
again = run_mc(cfg, threads=1)
print("identical:", again.rows == summary.rows)
