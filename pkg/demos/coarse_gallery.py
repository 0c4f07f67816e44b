"""Render a few elementary rules raw, filtered and coarse-grained into one directory.

    python demos/coarse_gallery.py [OUT_DIR]
"""
import sys
from pathlib import Path

from complexca import coarse
from complexca.ca import CaSpec, Grid, eca_rule, eca_spec, random_grid, simulate
from complexca.io import save_image
from complexca.sampling import make_rng


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "gallery")
    out.mkdir(parents=True, exist_ok=True)
    for rule in (18, 54, 110):
        st = simulate(random_grid(eca_spec(400), make_rng(rule)), eca_rule(rule), 400)
        grid = Grid(CaSpec(2, 2, 1, st.data.shape), st.data)
        save_image(st.data, 2, out / f"eca{rule}_raw", ("png",), scale=2)
        save_image(coarse.filter_eca(st, rule).data, 2, out / f"eca{rule}_filter", ("png",), scale=4)
        for level, g in enumerate(coarse.pyramid(grid, 2, 3, 3), 1):
            save_image(g.cells, g.spec.num_states, out / f"eca{rule}_histogram_level{level}", ("png",),
                       scale=2 ** (level + 1))
        avg = coarse.local_average(grid, 4)
        save_image(avg.cells, 2, out / f"eca{rule}_average_b4", ("png",), scale=8)
    for p in sorted(out.glob("*.png")):
        print(p)


if __name__ == "__main__":
    main()
