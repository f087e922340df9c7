"""Time-step and domain convergence of the split-step and Crank-Nicolson schemes.

Prints the window-restricted density error against the closed form for a
ladder of time steps under a sinusoidal push, then the error at t = pi as
the domain grows. These numbers are the basis for the default thresholds.

    python3 scripts/convergence_study.py
"""
import argparse
import math

import numpy as np

from airy_evolve import (
    Aperture,
    ForceProfile,
    GridSpec,
    PhysicalConstants,
    StepScheme,
    ai_packet,
    analytic_field,
    evolve,
    phase_check,
    shape_error,
)

UNIT = PhysicalConstants()


def density_error(field, force, t, window):
    ref = analytic_field(UNIT, force, field.grid, t)
    sel = field.grid.window_mask(*window)
    return float(np.max(np.abs(field.density[sel] - ref.density[sel])))


def time_step_ladder(kind, t_end, window):
    grid = GridSpec(-60.0, 60.0, 4096)
    aperture = Aperture(-40.0, 40.0, 8.0)
    force = ForceProfile.sinusoid(1.0, 1.0)
    start = ai_packet(1.0, 0.0, grid)
    print(f"\n{kind}: density error at t = {t_end} in {window}")
    prev = None
    for dt in (0.1, 0.05, 0.025, 0.0125, 0.00625):
        (_, f), = evolve(start, UNIT, force, StepScheme(kind, dt), aperture, t_end)
        err = density_error(f, force, t_end, window)
        ratio = "" if prev is None else f"  ratio {prev / err:.2f}"
        print(f"  dt = {dt:<8g} error = {err:.3e}{ratio}")
        prev = err


def domain_ladder(window):
    force = ForceProfile.sinusoid(1.0, 1.0)
    dt = math.pi / 3140
    print(f"\nsplit-step with sin(t) push, t = pi, window {window}")
    for half, n in ((60, 4096), (120, 8192), (240, 16384)):
        grid = GridSpec(-half, half, n)
        aperture = Aperture(-(half - 20.0 * half / 60), half - 20.0 * half / 60, 8.0 * half / 60)
        (_, f), = evolve(ai_packet(1.0, 0.0, grid), UNIT, force, StepScheme("split_step_strang", dt), aperture, math.pi)
        shape = shape_error(f, UNIT, force, math.pi, window).max_abs_dev
        phase = phase_check(f, UNIT, force, math.pi, window)
        print(f"  grid [-{half}, {half}] n = {n:<6d} shape {shape:.3e}  phase {phase:.3e} rad")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-end", type=float, default=1.0)
    parser.add_argument("--skip-domain", action="store_true")
    args = parser.parse_args()
    window = (-8.0, 8.0)
    for kind in ("split_step_strang", "crank_nicolson"):
        time_step_ladder(kind, args.t_end, window)
    if not args.skip_domain:
        domain_ladder((-10.0, 10.0))


if __name__ == "__main__":
    main()
