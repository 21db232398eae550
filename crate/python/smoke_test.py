"""Smoke test for the hdiv_stokes_py extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`,
or copy target/release/libhdiv_stokes_py.so to hdiv_stokes_py.so on the
Python path.
"""

import math

import hdiv_stokes_py as hs


def main():
    mesh = hs.unit_square_mesh(3)
    assert (mesh.n_cells, mesh.n_vertices) == (32, 25)
    assert mesh.n_vertices - mesh.n_faces + mesh.n_cells == 1
    assert abs(mesh.volume() - 1.0) < 1e-12
    assert mesh.locate([0.3, 0.7]) is not None
    assert mesh.locate([2.0, 0.0]) is None

    cube = hs.unit_cube_mesh(1)
    assert (cube.n_cells, cube.n_faces) == (6, 18)

    pts, wts = hs.simplex_rule(2, 5)
    assert abs(sum(wts) - 0.5) < 1e-14
    exact = 1.0 / 180.0  # x^2 y^2 on the unit triangle
    approx = sum(w * p[0] ** 2 * p[1] ** 2 for p, w in zip(pts, wts))
    assert abs(approx - exact) < 1e-14

    rows = hs.run_convergence("ex1", 1, (3, 5))
    assert [r.level for r in rows] == [3, 4, 5]
    assert all(r.divergence_sup < 1e-10 for r in rows)
    assert rows[-1].velocity_rate is not None and rows[-1].velocity_rate > 1.5
    for r in rows:
        print(r.level, hs.format_sci(r.velocity_l2), hs.format_sci(r.energy), hs.format_sci(r.pressure_l2))

    sol = hs.solve("ex2", 3, 2, mu=1e-6)
    assert sol.errors.velocity_l2 < 1e-9
    u, p = sol.evaluate([0.25, 0.5])
    assert len(u) == 2 and math.isfinite(p)

    th = hs.solve("ex2", 3, 2, family="taylor-hood", mu=1e-6)
    assert th.errors.velocity_l2 > 1.0

    assert hs.infsup_estimate(1, 2) > 0.0
    assert hs.format_sci(4.468e-3) == "0.4468E-02"

    try:
        hs.solve("ex1", 2, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("degree 0 must be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
