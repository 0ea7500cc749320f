"""Render figures from the data the CLI emits.

    python scripts/make_figures.py data/g12.json --outdir figures

Writes ``singular_values.png`` (sigma curves with the computed norm and the
predictor levels) and ``cutoff.png`` (cut-off frequency against N).  Needs
matplotlib (``pip install .[plot]``).
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from delayhinf import compute_hinf, cutoff_table, load_system, sweep_oracle  # noqa: E402


def singular_value_figure(sys, res, path, omega_max=None, points=2000):
    if omega_max is None:
        omega_max = max(10.0, 3.0 * res.peak_omega if np.isfinite(res.peak_omega) else 10.0)
    sw = sweep_oracle(sys, omega_max, points)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sw.grid, sw.all_sigmas, lw=1)
    for h in res.prediction.state.history:
        ax.axhline(h["xi"], color="0.7", lw=0.6, ls=":")
    ax.axhline(res.norm, color="k", lw=0.8, ls="--", label=f"norm {res.norm:.6g}")
    if np.isfinite(res.peak_omega):
        ax.plot([res.peak_omega], [res.norm], "ko", ms=4)
    ax.set_xscale("symlog", linthresh=1.0)
    ax.set_xlabel("omega")
    ax.set_ylabel("singular values of G(j omega)")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cutoff_figure(path, nmax=25, delta=0.1):
    rows = cutoff_table(delta, nmax)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([r[0] for r in rows], [r[1] for r in rows], "o-", ms=3)
    ax.set_xlabel("N")
    ax.set_ylabel(f"cut-off frequency (delta={delta})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("system")
    ap.add_argument("--N", type=int, default=None)
    ap.add_argument("--omega-max", type=float, default=None)
    ap.add_argument("--outdir", default="figures")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    sys = load_system(args.system)
    res = compute_hinf(sys, N=args.N)
    singular_value_figure(sys, res, out / "singular_values.png", args.omega_max)
    cutoff_figure(out / "cutoff.png")
    print(f"wrote {out / 'singular_values.png'} and {out / 'cutoff.png'}")


if __name__ == "__main__":
    main()
